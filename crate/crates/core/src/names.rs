//! String-valued enums with a canonical lower snake_case spelling.
//!
//! Parsing accepts any casing and `-` or space as separators; serialization
//! always writes the canonical name. Unknown values fail with serde's
//! standard `unknown variant` error so callers can recover the list of
//! accepted names.

macro_rules! named_enum {
    (
        $(#[$meta:meta])*
        pub enum $name:ident {
            $( $(#[$vmeta:meta])* $variant:ident => $text:literal ),+ $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $( $(#[$vmeta])* $variant ),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];
            pub const NAMES: &'static [&'static str] = &[$($text),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl ::std::fmt::Display for $name {
            fn fmt(&self, f: &mut ::std::fmt::Formatter<'_>) -> ::std::fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl ::std::str::FromStr for $name {
            type Err = $crate::names::UnknownName;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let norm = $crate::names::normalize(s);
                match norm.as_str() {
                    $($text => Ok($name::$variant),)+
                    _ => Err($crate::names::UnknownName {
                        value: s.to_string(),
                        expected: Self::NAMES,
                    }),
                }
            }
        }

        impl ::serde::Serialize for $name {
            fn serialize<S: ::serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> ::serde::Deserialize<'de> for $name {
            fn deserialize<D: ::serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let raw = <::std::borrow::Cow<'de, str> as ::serde::Deserialize>::deserialize(d)?;
                raw.parse()
                    .map_err(|_| <D::Error as ::serde::de::Error>::unknown_variant(&raw, Self::NAMES))
            }
        }

        impl ::schemars::JsonSchema for $name {
            fn schema_name() -> ::std::borrow::Cow<'static, str> {
                stringify!($name).into()
            }

            fn json_schema(_: &mut ::schemars::SchemaGenerator) -> ::schemars::Schema {
                ::schemars::json_schema!({ "type": "string", "enum": [$($text),+] })
            }
        }
    };
}

pub(crate) use named_enum;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown value `{value}`, expected one of {}", expected.join(", "))]
pub struct UnknownName {
    pub value: String,
    pub expected: &'static [&'static str],
}

impl UnknownName {
    pub fn suggestion(&self) -> Option<&'static str> {
        suggest(&self.value, self.expected)
    }
}

pub fn normalize(s: &str) -> String {
    s.trim()
        .chars()
        .map(|c| match c {
            '-' | ' ' => '_',
            c => c.to_ascii_lowercase(),
        })
        .collect()
}

/// Closest accepted name by normalized Levenshtein similarity, if any is close enough.
pub fn suggest<'a>(value: &str, expected: &[&'a str]) -> Option<&'a str> {
    let norm = normalize(value);
    expected
        .iter()
        .map(|e| (strsim::normalized_levenshtein(&norm, e), *e))
        .filter(|(score, _)| *score >= 0.5)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, e)| e)
}

#[cfg(test)]
mod tests {
    use super::*;

    named_enum! {
        pub enum Colour {
            DeepRed => "deep_red",
            Blue => "blue",
        }
    }

    #[test]
    fn parses_any_casing() {
        assert_eq!("Deep-Red".parse::<Colour>().unwrap(), Colour::DeepRed);
        assert_eq!("BLUE".parse::<Colour>().unwrap(), Colour::Blue);
        assert_eq!(Colour::ALL.len(), Colour::NAMES.len());
        let e = "deepred2".parse::<Colour>().unwrap_err();
        assert_eq!(e.suggestion(), Some("deep_red"));
        assert_eq!(suggest("zzzzzzzz", Colour::NAMES), None);
    }

    #[test]
    fn serde_uses_canonical_names() {
        let c: Colour = serde_json::from_str("\"Deep Red\"").unwrap();
        assert_eq!(serde_json::to_string(&c).unwrap(), "\"deep_red\"");
        let e = serde_json::from_str::<Colour>("\"green\"").unwrap_err();
        assert!(e.to_string().contains("unknown variant `green`"));
    }
}

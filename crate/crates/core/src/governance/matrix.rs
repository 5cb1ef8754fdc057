use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{GovernanceError, MechanismFamily, Property};

const MATRIX_DATA: &str = include_str!("../../data/property_matrix.toml");

/// Highest score a cell can take.
pub const STRONG: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub family: MechanismFamily,
    pub property: Property,
    pub score: u8,
    pub basis: String,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyMatrix {
    cells: Vec<MatrixCell>,
    #[serde(skip)]
    index: BTreeMap<(MechanismFamily, Property), u8>,
}

#[derive(Deserialize)]
struct MatrixFile {
    cell: Vec<MatrixCell>,
}

impl PropertyMatrix {
    fn from_cells(cells: Vec<MatrixCell>) -> Result<Self, String> {
        let mut index = BTreeMap::new();
        for c in &cells {
            if c.score > STRONG {
                return Err(format!(
                    "score {} out of range for {}/{}",
                    c.score, c.family, c.property
                ));
            }
            if index.insert((c.family, c.property), c.score).is_some() {
                return Err(format!("duplicate cell {}/{}", c.family, c.property));
            }
        }
        for f in MechanismFamily::ALL {
            for p in Property::ALL {
                if !index.contains_key(&(f, p)) {
                    return Err(format!("missing cell {f}/{p}"));
                }
            }
        }
        Ok(PropertyMatrix { cells, index })
    }

    pub fn score(&self, family: MechanismFamily, property: Property) -> u8 {
        self.index[&(family, property)]
    }

    pub fn cells(&self) -> &[MatrixCell] {
        &self.cells
    }

    pub fn cell(&self, family: MechanismFamily, property: Property) -> &MatrixCell {
        self.cells
            .iter()
            .find(|c| c.family == family && c.property == property)
            .expect("matrix is complete")
    }

    /// `true` when `family` meets every minimum in `required`.
    pub fn satisfies(&self, family: MechanismFamily, required: &BTreeMap<Property, u8>) -> bool {
        required
            .iter()
            .all(|(p, min)| self.score(family, *p) >= *min)
    }

    /// Properties where `family` falls short of `required`, with the actual score.
    pub fn shortfalls(
        &self,
        family: MechanismFamily,
        required: &BTreeMap<Property, u8>,
    ) -> Vec<(Property, u8, u8)> {
        required
            .iter()
            .filter_map(|(p, min)| {
                let s = self.score(family, *p);
                (s < *min).then_some((*p, *min, s))
            })
            .collect()
    }
}

pub fn property_matrix() -> &'static PropertyMatrix {
    static MATRIX: OnceLock<PropertyMatrix> = OnceLock::new();
    MATRIX.get_or_init(|| {
        let file: MatrixFile = toml::from_str(MATRIX_DATA).expect("bundled property matrix parses");
        PropertyMatrix::from_cells(file.cell).expect("bundled property matrix is complete")
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedFamily {
    pub family: MechanismFamily,
    pub scores: BTreeMap<Property, u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recommendation {
    pub ranked: Vec<RankedFamily>,
    /// Set when no family meets the requirements.
    pub no_candidate: bool,
}

impl Recommendation {
    pub fn families(&self) -> Vec<MechanismFamily> {
        self.ranked.iter().map(|r| r.family).collect()
    }

    pub fn first(&self) -> Option<MechanismFamily> {
        self.ranked.first().map(|r| r.family)
    }
}

/// Families meeting every minimum score, ordered by the `prefer` properties
/// (higher score first, in the given order) and then by family name.
pub fn recommend_mechanism(
    required: &BTreeMap<Property, u8>,
    prefer: &[Property],
) -> Result<Recommendation, GovernanceError> {
    if let Some((&property, &level)) = required.iter().find(|(_, l)| **l > STRONG) {
        return Err(GovernanceError::LevelOutOfRange { property, level });
    }
    let matrix = property_matrix();
    let mut candidates: Vec<MechanismFamily> = MechanismFamily::ALL
        .into_iter()
        .filter(|f| matrix.satisfies(*f, required))
        .collect();
    candidates.sort_by(|a, b| {
        let key = |f: &MechanismFamily| {
            prefer
                .iter()
                .map(|p| matrix.score(*f, *p))
                .collect::<Vec<_>>()
        };
        key(b).cmp(&key(a)).then_with(|| a.name().cmp(b.name()))
    });
    let ranked: Vec<RankedFamily> = candidates
        .into_iter()
        .map(|family| RankedFamily {
            family,
            scores: Property::ALL
                .into_iter()
                .map(|p| (p, matrix.score(family, p)))
                .collect(),
        })
        .collect();
    Ok(Recommendation {
        no_candidate: ranked.is_empty(),
        ranked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn req(pairs: &[(Property, u8)]) -> BTreeMap<Property, u8> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn matrix_cells_from_characterizations() {
        let m = property_matrix();
        assert_eq!(
            m.score(MechanismFamily::OneTokenOneVote, Property::Simplicity),
            2
        );
        assert_eq!(
            m.score(MechanismFamily::OneTokenOneVote, Property::Inclusivity),
            0
        );
        for f in MechanismFamily::ALL {
            assert!(m.score(f, Property::Security) < STRONG, "{f}");
        }
        assert_eq!(m.cells().len(), 30);
        assert_eq!(
            m.cell(MechanismFamily::Quadratic, Property::Accountability)
                .basis,
            "default"
        );
    }

    #[test]
    fn accountability_and_security_select_conviction() {
        let r = recommend_mechanism(
            &req(&[(Property::Accountability, 2), (Property::Security, 1)]),
            &[Property::Simplicity],
        )
        .unwrap();
        assert_eq!(r.first(), Some(MechanismFamily::Conviction));
        assert!(!r.families().contains(&MechanismFamily::OneTokenOneVote));
        assert!(!r.no_candidate);
    }

    #[test]
    fn empty_requirements_return_everything() {
        let r = recommend_mechanism(&BTreeMap::new(), &[Property::Simplicity]).unwrap();
        assert_eq!(
            r.families(),
            vec![
                MechanismFamily::OneTokenOneVote,
                MechanismFamily::Conviction,
                MechanismFamily::Quadratic,
                MechanismFamily::ReputationWeighted,
                MechanismFamily::VoteEscrow,
            ]
        );
        let r = recommend_mechanism(&BTreeMap::new(), &[]).unwrap();
        assert_eq!(r.families().len(), 5);
        assert_eq!(r.first(), Some(MechanismFamily::Conviction));
    }

    #[test]
    fn perfect_security_has_no_candidate() {
        let r = recommend_mechanism(&req(&[(Property::Security, 2)]), &[]).unwrap();
        assert!(r.no_candidate);
        assert!(r.ranked.is_empty());
    }

    #[test]
    fn bad_matrix_rejected() {
        let cell = MatrixCell {
            family: MechanismFamily::Quadratic,
            property: Property::Security,
            score: 3,
            basis: "stated".into(),
            rationale: String::new(),
        };
        assert!(PropertyMatrix::from_cells(vec![cell]).is_err());
        assert!(PropertyMatrix::from_cells(vec![]).is_err());
    }

    fn arb_required() -> impl Strategy<Value = BTreeMap<Property, u8>> {
        proptest::collection::btree_map(
            proptest::sample::select(Property::ALL.to_vec()),
            0u8..=2,
            0..6,
        )
    }

    proptest! {
        #[test]
        fn tightening_never_enlarges(required in arb_required(), p in proptest::sample::select(Property::ALL.to_vec())) {
            let loose = recommend_mechanism(&required, &[]).unwrap().families();
            let mut tight = required.clone();
            let e = tight.entry(p).or_insert(0);
            *e = (*e + 1).min(STRONG);
            let tight = recommend_mechanism(&tight, &[]).unwrap().families();
            prop_assert!(tight.iter().all(|f| loose.contains(f)));
        }

        #[test]
        fn levels_above_strong_are_refused(p in proptest::sample::select(Property::ALL.to_vec()), level in 3u8..) {
            let required = req(&[(p, level)]);
            prop_assert_eq!(
                recommend_mechanism(&required, &[]),
                Err(GovernanceError::LevelOutOfRange { property: p, level })
            );
        }
    }
}

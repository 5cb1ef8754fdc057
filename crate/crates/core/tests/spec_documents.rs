use std::path::PathBuf;

use tedm_core::spec::{
    compare_specs, fixtures, json_schema, normalize_and_serialize, parse_spec, validate_spec,
    Severity,
};

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

/// Compares against a checked-in file; `UPDATE_GOLDEN=1` rewrites it.
fn assert_golden(name: &str, actual: &str) {
    let path = golden(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected =
        std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(
        actual, expected,
        "golden mismatch for {name}; rerun with UPDATE_GOLDEN=1 after review"
    );
}

#[test]
fn comparison_golden() {
    let u = parse_spec(fixtures::UNISWAP).unwrap();
    let c = parse_spec(fixtures::CURVE).unwrap();
    assert_golden(
        "compare_uniswap_curve.txt",
        &compare_specs(&u, &c).render_text(),
    );
}

#[test]
fn canonical_fixture_goldens() {
    for (name, doc) in fixtures::ALL {
        let spec = parse_spec(doc).unwrap();
        assert_golden(
            &format!("{name}.canonical.toml"),
            &normalize_and_serialize(&spec),
        );
    }
}

#[test]
fn published_schema_in_sync() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("schema/economy-spec.schema.json");
    let actual = serde_json::to_string_pretty(&json_schema()).unwrap() + "\n";
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &actual).unwrap();
    }
    assert_eq!(actual, std::fs::read_to_string(&path).unwrap());
}

#[test]
fn key_order_and_comments_do_not_matter() {
    let a = r#"
# leading comment
tedm_version = 1
name = "x"
[incentives]
stakeholders = [{ category = "users", name = "u" }]
[governance]
decentralization_target = "Public-Decentralized"
areas = ["treasury"]
chosen_mechanism = { family = "quadratic" }
[[tokenomics.tokens]]
timing = "post_launch"
symbol = "T"
supply_policy = { kind = "uncapped" }
distribution = [{ share = "1/2", channel = "airdrop" }, { channel = "reserve", share = 0.5 }]
"#;
    let b = r#"
name = "x"
tedm_version = 1
[governance]
chosen_mechanism = { family = "quadratic" } # trailing comment
areas = ["treasury"]
decentralization_target = "public_decentralized"
[incentives]
stakeholders = [{ name = "u", category = "USERS" }]
[[tokenomics.tokens]]
symbol = "T"
supply_policy = { kind = "uncapped" }
distribution = [{ channel = "airdrop", share = "0.5" }, { channel = "reserve", share = "1/2" }]
timing = "post_launch"
"#;
    let ca = normalize_and_serialize(&parse_spec(a).unwrap());
    let cb = normalize_and_serialize(&parse_spec(b).unwrap());
    assert_eq!(ca, cb);
    assert!(!ca.contains('#'));
    assert!(validate_spec(&parse_spec(&ca).unwrap())
        .with_severity(Severity::Error)
        .next()
        .is_none());
}

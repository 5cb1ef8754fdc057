use std::path::PathBuf;

use tedm_core::governance::VotingMechanism;
use tedm_core::metrics::concentration_report;
use tedm_core::quantity::{q, Quantity};
use tedm_core::sim::{
    preset, resolve_spec, run_scenario, run_scenario_with, write_csv, Scenario, PRESETS,
};
use tedm_core::spec::{fixtures, parse_spec, EconomySpec};

fn spec_for(s: &Scenario) -> EconomySpec {
    resolve_spec(s, None).unwrap().unwrap()
}

fn run(s: &Scenario) -> tedm_core::sim::ScenarioReport {
    run_scenario(&spec_for(s), s).unwrap()
}

const HOLDERS_ONLY: &str = r#"
name = "quiet"
spec = "uniswap"
epochs = 30
seed = 1

[[agents]]
name = "holders"
category = "community"
population = 50
balance = { kind = "pareto", scale = 100.0, shape = 1.2 }
"#;

#[test]
fn same_seed_same_run() {
    let s = preset("capture").unwrap();
    let a = serde_json::to_string(&run(&s)).unwrap();
    let b = serde_json::to_string(&run(&s)).unwrap();
    assert_eq!(a, b);

    let mut other = s.clone();
    other.seed += 1;
    assert_ne!(run(&other).epochs[0].holdings, run(&s).epochs[0].holdings);
}

#[test]
fn nothing_happens_without_shocks() {
    let s = Scenario::parse(HOLDERS_ONLY).unwrap();
    let r = run(&s);
    let first = &r.epochs[0];
    for e in &r.epochs {
        assert_eq!(e.supply.circulating, first.supply.circulating);
        assert_eq!(e.holdings, first.holdings);
        assert_eq!(e.concentration, first.concentration);
        assert!(e.events.is_empty());
    }
    assert_eq!(r.summary.events, 0);
}

#[test]
fn streaming_sees_every_epoch_in_order() {
    let s = Scenario::parse(HOLDERS_ONLY).unwrap();
    let mut seen = Vec::new();
    let r = run_scenario_with(&spec_for(&s), &s, |e| seen.push(e.epoch)).unwrap();
    assert_eq!(seen, (1..=30).collect::<Vec<_>>());
    assert_eq!(r.epochs.len(), 30);
}

fn whale_scenario(mechanism: &str) -> Scenario {
    // whale ends up with 60% of balances but only half its lock
    Scenario::parse(&format!(
        r#"
name = "whale"
spec = "curve"
epochs = 3
seed = 9
mechanism = {mechanism}

[[agents]]
name = "others"
category = "users"
population = 40
balance = {{ kind = "fixed", amount = 1000 }}
lock_epochs = 208
relock = true

[[agents]]
name = "whale"
category = "investors"
population = 1
cluster = "whale"
balance = {{ kind = "fixed", amount = 60000 }}
lock_epochs = 104
relock = true
"#
    ))
    .unwrap()
}

#[test]
fn time_weighting_blunts_a_short_locked_whale() {
    let ve = run(&whale_scenario(
        r#"{ family = "vote_escrow", lock_max = 208 }"#,
    ));
    assert!(!ve.summary.captured);
    let flat = run(&whale_scenario(r#"{ family = "one_token_one_vote" }"#));
    assert!(flat.summary.captured);
    assert_eq!(flat.summary.first_capture_epoch, Some(1));
}

#[test]
fn capture_preset_flips_at_the_accumulation() {
    let r = run(&preset("capture").unwrap());
    assert_eq!(r.summary.first_capture_epoch, Some(50));
    assert_eq!(r.summary.capture_epochs, 51);
    let at = &r.epochs[49];
    let whale = at
        .holdings
        .entries
        .iter()
        .find(|h| h.entity == "whale-0000")
        .unwrap();
    let share = (&whale.weight / &at.holdings.total()).to_f64();
    assert!((0.6..0.6001).contains(&share), "{share}");
    // holdings only change hands; supply is untouched
    assert_eq!(at.supply, r.epochs[48].supply.clone().with_epoch(50));
}

trait WithEpoch {
    fn with_epoch(self, epoch: u64) -> Self;
}

impl WithEpoch for tedm_core::supply::SupplyState {
    fn with_epoch(mut self, epoch: u64) -> Self {
        self.epoch = epoch;
        self
    }
}

#[test]
fn sell_off_cascade_trips_thresholds_in_order() {
    let r = run(&preset("sell_off_cascade").unwrap());
    assert!(r.epochs[9].events.iter().any(|e| e.kind == "sell_off"));
    let prices: Vec<f64> = r.epochs.iter().map(|e| e.price.unwrap()).collect();
    assert!(prices[..9].iter().all(|p| *p == 1.0));
    assert!(prices.windows(2).all(|w| w[1] <= w[0]));
    assert!(r.summary.max_drawdown.unwrap() > 0.3);
}

#[test]
fn unlock_cliff_releases_in_one_block() {
    let r = run(&preset("unlock_cliff").unwrap());
    let before = &r.epochs[38].supply;
    let at = &r.epochs[39].supply;
    assert_eq!(&at.circulating - &before.circulating, q("300000"));
    assert!(at.vesting_locked.is_zero());
    assert_eq!(before.vesting_locked, q("300000"));
    assert!(r.epochs[40].price.unwrap() < 1.0);
}

#[test]
fn sybil_splits_change_nothing_under_one_token_one_vote() {
    let mut split = preset("sybil").unwrap();
    split.mechanism = Some(VotingMechanism::OneTokenOneVote);
    let mut baseline = split.clone();
    baseline.shocks.clear();
    let (a, b) = (run(&split), run(&baseline));
    for (x, y) in a.epochs.iter().zip(&b.epochs) {
        let tallies = |e: &tedm_core::sim::EpochRecord| {
            e.governance
                .iter()
                .map(|g| g.result.clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(tallies(x), tallies(y), "epoch {}", x.epoch);
        assert_eq!(x.voting_power, y.voting_power);
    }
}

#[test]
fn sybil_splits_pay_off_under_quadratic() {
    let r = run(&preset("sybil").unwrap());
    let path = &r.summary.tracked_share_path;
    assert_eq!(path.len(), 100);
    assert!(path.windows(2).all(|w| w[1] >= w[0]));
    for t in [10usize, 20, 30, 40, 50] {
        assert!(path[t - 1] > path[t - 2], "no gain at epoch {t}");
    }
}

#[test]
fn minting_past_the_cap_is_truncated() {
    let s = Scenario::parse(
        r#"
name = "overmint"
spec = "curve"
epochs = 3
seed = 2
market_pool = 3030303000

[[agents]]
name = "users"
category = "users"
population = 2
balance = { kind = "fixed", amount = 10 }

[[flows]]
epoch = 2
minted = 100
"#,
    )
    .unwrap();
    let r = run(&s);
    let t = r.epochs[1].truncation.as_ref().unwrap();
    assert_eq!(t.requested, q("100"));
    assert_eq!(t.minted, q("11"));
    assert_eq!(r.epochs[1].supply.outstanding(), q("3030303031"));
    assert_eq!(r.summary.truncations, 1);
}

#[test]
fn invalid_documents_and_scenarios_are_refused() {
    let mut spec = parse_spec(fixtures::UNISWAP).unwrap();
    spec.tokenomics.tokens[0].distribution[0].share = q("0.9");
    let s = Scenario::parse(HOLDERS_ONLY).unwrap();
    assert!(run_scenario(&spec, &s).is_err());

    let mut bad = s.clone();
    bad.epochs = 0;
    assert!(run_scenario(&spec_for(&s), &bad).is_err());
    assert!(preset("nope").is_err());
}

#[test]
fn csv_has_a_row_per_epoch() {
    let r = run(&Scenario::parse(HOLDERS_ONLY).unwrap());
    let mut out = Vec::new();
    write_csv(&r, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 31);
    assert!(text.starts_with("epoch,circulating,"));
}

fn check_epoch_invariants(r: &tedm_core::sim::ScenarioReport) {
    let spec = match r.spec.as_str() {
        "Uniswap" => parse_spec(fixtures::UNISWAP).unwrap(),
        other => panic!("unexpected document {other}"),
    };
    let cap = spec.primary_token().unwrap().supply_policy.s_max().cloned();
    let mut burned = Quantity::zero();
    for e in &r.epochs {
        let again = concentration_report(&e.holdings, 10).unwrap();
        assert_eq!(e.concentration.as_ref(), Some(&again), "epoch {}", e.epoch);
        let voting = concentration_report(&e.voting_power, 10).unwrap();
        assert_eq!(e.voting_concentration.as_ref(), Some(&voting));
        assert_eq!(e.capture, voting.nakamoto == 1, "epoch {}", e.epoch);
        assert_eq!(&e.holdings.total() + &e.market_pool, e.supply.circulating);
        assert!(e.supply.cumulative_burned >= burned);
        burned = e.supply.cumulative_burned.clone();
        if let Some(cap) = &cap {
            assert!(&e.supply.outstanding() <= cap);
        }
    }
}

#[test]
fn preset_summary_goldens() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for (name, _) in PRESETS {
        let r = run(&preset(name).unwrap());
        check_epoch_invariants(&r);
        let actual = serde_json::to_string_pretty(&r.summary).unwrap() + "\n";
        let path = dir.join(format!("{name}.summary.json"));
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::write(&path, &actual).unwrap();
        }
        let expected = std::fs::read_to_string(&path).unwrap_or_default();
        assert_eq!(
            actual, expected,
            "{name} summary drifted; rerun with UPDATE_GOLDEN=1 if intended"
        );
    }
}

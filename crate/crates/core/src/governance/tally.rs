use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{
    conviction_update, power_1t1v, power_reputation, power_ve, votes_quadratic, GovernanceError,
    Proposal, Voter, VotingMechanism,
};
use crate::metrics::SnapshotRow;
use crate::quantity::Quantity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    For,
    Against,
    Abstain,
}

impl std::str::FromStr for Choice {
    type Err = GovernanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "for" | "yes" | "yea" => Ok(Choice::For),
            "against" | "no" | "nay" => Ok(Choice::Against),
            "abstain" => Ok(Choice::Abstain),
            other => Err(GovernanceError::VoteSet {
                row: 0,
                message: format!("unknown choice `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ballot {
    pub voter: Voter,
    pub choice: Choice,
    /// Credits spent for quadratic tallies; defaults to the voter's whole credit balance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_input: Option<Quantity>,
}

impl Ballot {
    pub fn new(voter: Voter, choice: Choice) -> Self {
        Ballot {
            voter,
            choice,
            weight_input: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyResult {
    #[serde(rename = "for")]
    pub for_power: Quantity,
    #[serde(rename = "against")]
    pub against_power: Quantity,
    #[serde(rename = "abstain")]
    pub abstain_power: Quantity,
    /// Total power cast, abstentions included.
    pub turnout: Quantity,
    pub passed: bool,
    /// Accumulated conviction after this round (conviction family only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conviction: Option<Quantity>,
}

impl TallyResult {
    pub fn for_share(&self) -> Option<f64> {
        let decided = &self.for_power + &self.against_power;
        if decided.is_zero() {
            None
        } else {
            Some((&self.for_power / &decided).to_f64())
        }
    }
}

fn ballot_power(ballot: &Ballot, mechanism: &VotingMechanism) -> Result<Quantity, GovernanceError> {
    let voter = &ballot.voter;
    Ok(match mechanism {
        VotingMechanism::OneTokenOneVote | VotingMechanism::Conviction { .. } => power_1t1v(voter),
        VotingMechanism::VoteEscrow {
            lock_max,
            stake_scaling,
        } => &power_ve(voter, *lock_max) * stake_scaling,
        VotingMechanism::ReputationWeighted => power_reputation(voter),
        VotingMechanism::Quadratic { credit_budget } => {
            let spent = ballot.weight_input.as_ref().unwrap_or(&voter.credits);
            let budget = match credit_budget {
                Some(b) if b < &voter.credits => b,
                _ => &voter.credits,
            };
            let votes = votes_quadratic(spent, budget).map_err(|e| match e {
                GovernanceError::BudgetExceeded { spent, budget, .. } => {
                    GovernanceError::BudgetExceeded {
                        voter: voter.id.clone(),
                        spent,
                        budget,
                    }
                }
                other => other,
            })?;
            Quantity::from_f64(votes).unwrap_or_default()
        }
    })
}

/// Tallies a sealed ballot set. Binary families pass when the `for` share of
/// decided power strictly exceeds the threshold; conviction passes when the
/// accumulated conviction reaches the proposal's conviction threshold.
pub fn tally(
    proposal: &Proposal,
    ballots: &[Ballot],
    mechanism: &VotingMechanism,
) -> Result<TallyResult, GovernanceError> {
    mechanism.check()?;
    if !proposal.threshold.is_positive() || proposal.threshold > 1 {
        return Err(GovernanceError::InvalidThreshold(
            proposal.threshold.clone(),
        ));
    }
    let mut seen = BTreeSet::new();
    let mut by_choice: [Vec<Quantity>; 3] = Default::default();
    for b in ballots {
        if !seen.insert(b.voter.id.as_str()) {
            return Err(GovernanceError::DuplicateVote(b.voter.id.clone()));
        }
        b.voter.check()?;
        let p = ballot_power(b, mechanism)?;
        let slot = match b.choice {
            Choice::For => 0,
            Choice::Against => 1,
            Choice::Abstain => 2,
        };
        by_choice[slot].push(p);
    }
    let [for_power, against_power, abstain_power] =
        by_choice.map(|v| v.into_iter().sum::<Quantity>());

    let (passed, conviction) = match mechanism {
        VotingMechanism::Conviction { alpha } => {
            let threshold = proposal
                .conviction_threshold
                .as_ref()
                .ok_or_else(|| GovernanceError::MissingConvictionThreshold(proposal.id.clone()))?;
            let y = conviction_update(&proposal.prior_conviction, &for_power, alpha)?;
            (&y >= threshold, Some(y))
        }
        _ => {
            let decided = &for_power + &against_power;
            let passed = decided.is_positive() && for_power > &proposal.threshold * &decided;
            (passed, None)
        }
    };

    let turnout = &(&for_power + &against_power) + &abstain_power;
    Ok(TallyResult {
        for_power,
        against_power,
        abstain_power,
        turnout,
        passed,
        conviction,
    })
}

/// Builds ballots from a `voter,choice,weight_input` vote set joined with a
/// holder snapshot (`entity,weight[,lock_end]`).
///
/// Balances and locks come from the snapshot; `lock_end` is converted to a
/// remaining lock relative to `now`. `weight_input` is the credits spent for
/// quadratic tallies and the reputation score for reputation-weighted ones;
/// when a voter has no snapshot row it is taken as the balance.
pub fn ballots_from_csv<R: Read>(
    votes: R,
    snapshot: &[SnapshotRow],
    now: u64,
) -> Result<Vec<Ballot>, GovernanceError> {
    let err = |row: usize, message: String| GovernanceError::VoteSet { row, message };
    let by_entity: BTreeMap<&str, &SnapshotRow> =
        snapshot.iter().map(|r| (r.entity.as_str(), r)).collect();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(votes);
    let headers = rdr.headers().map_err(|e| err(1, e.to_string()))?.clone();
    let col = |n: &str| headers.iter().position(|h| h == n);
    let (Some(vc), Some(cc)) = (col("voter"), col("choice")) else {
        return Err(err(1, "header must contain `voter,choice`".into()));
    };
    let wc = col("weight_input");
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| err(row, e.to_string()))?;
        let id = rec.get(vc).unwrap_or("").to_string();
        let choice: Choice = rec.get(cc).unwrap_or("").parse().map_err(|_| {
            err(
                row,
                format!("invalid choice `{}`", rec.get(cc).unwrap_or("")),
            )
        })?;
        let weight_input = match wc.and_then(|c| rec.get(c)).filter(|s| !s.is_empty()) {
            Some(s) => Some(s.parse::<Quantity>().map_err(|e| err(row, e.to_string()))?),
            None => None,
        };
        let mut voter = Voter::new(id.clone(), Quantity::zero());
        match by_entity.get(id.as_str()) {
            Some(snap) => {
                voter.balance = snap.weight.clone();
                voter.lock_remaining = snap.lock_end.map(|e| e.saturating_sub(now)).unwrap_or(0);
            }
            None => match &weight_input {
                Some(w) => voter.balance = w.clone(),
                None => {
                    return Err(err(
                        row,
                        format!("voter `{id}` not in snapshot and no weight_input"),
                    ))
                }
            },
        }
        if let Some(w) = &weight_input {
            voter.credits = w.clone();
            voter.reputation = w.clone();
        } else {
            voter.credits = voter.balance.clone();
        }
        out.push(Ballot {
            voter,
            choice,
            weight_input,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::governance::{MechanismFamily, ProposalKind};
    use crate::metrics::read_snapshot_rows;
    use crate::quantity::q;

    fn prop(threshold: &str) -> Proposal {
        Proposal::new("p1", ProposalKind::Treasury, q(threshold))
    }

    fn ballot(id: &str, balance: &str, choice: Choice) -> Ballot {
        Ballot::new(Voter::new(id, q(balance)), choice)
    }

    #[test]
    fn simple_majority_passes() {
        let ballots = vec![
            ballot("a", "60", Choice::For),
            ballot("b", "40", Choice::Against),
        ];
        let r = tally(&prop("0.5"), &ballots, &VotingMechanism::OneTokenOneVote).unwrap();
        assert!(r.passed);
        assert_eq!(r.for_power, 60);
        assert_eq!(r.against_power, 40);
        assert_eq!(r.turnout, 100);
        assert_eq!(r.for_share(), Some(0.6));
    }

    #[test]
    fn exact_threshold_does_not_pass() {
        let ballots = vec![
            ballot("a", "50", Choice::For),
            ballot("b", "50", Choice::Against),
        ];
        assert!(
            !tally(&prop("0.5"), &ballots, &VotingMechanism::OneTokenOneVote)
                .unwrap()
                .passed
        );
        assert!(
            !tally(&prop("0.5"), &[], &VotingMechanism::OneTokenOneVote)
                .unwrap()
                .passed
        );
    }

    #[test]
    fn majority_holder_decides_alone() {
        // 51 of 100 supply votes alone against a proposal everyone else would back
        let ballots = vec![ballot("whale", "51", Choice::Against)];
        let r = tally(&prop("0.5"), &ballots, &VotingMechanism::OneTokenOneVote).unwrap();
        assert!(!r.passed);
        let ballots = vec![
            ballot("whale", "51", Choice::For),
            ballot("rest", "49", Choice::Against),
        ];
        assert!(
            tally(&prop("0.5"), &ballots, &VotingMechanism::OneTokenOneVote)
                .unwrap()
                .passed
        );
    }

    #[test]
    fn vote_escrow_lock_outweighs_equal_balance() {
        let ve = VotingMechanism::default_for(MechanismFamily::VoteEscrow);
        let ballots = vec![
            Ballot::new(Voter::new("long", q("100")).with_lock(4), Choice::For),
            Ballot::new(Voter::new("short", q("100")).with_lock(1), Choice::Against),
        ];
        let r = tally(&prop("0.5"), &ballots, &ve).unwrap();
        assert_eq!(r.for_power, 100);
        assert_eq!(r.against_power, 25);
        assert!(r.passed);
    }

    #[test]
    fn duplicate_votes_rejected() {
        let ballots = vec![
            ballot("a", "1", Choice::For),
            ballot("a", "1", Choice::Against),
        ];
        assert_eq!(
            tally(&prop("0.5"), &ballots, &VotingMechanism::OneTokenOneVote).unwrap_err(),
            GovernanceError::DuplicateVote("a".into())
        );
    }

    #[test]
    fn conviction_accumulates_to_threshold() {
        let mech = VotingMechanism::default_for(MechanismFamily::Conviction);
        let mut p = prop("0.5").with_conviction_threshold(q("50"));
        let ballots = vec![
            ballot("a", "10", Choice::For),
            ballot("b", "30", Choice::Against),
        ];
        let mut passed_at = None;
        for round in 1..=20 {
            let r = tally(&p, &ballots, &mech).unwrap();
            p.prior_conviction = r.conviction.clone().unwrap();
            if r.passed && passed_at.is_none() {
                passed_at = Some(round);
            }
        }
        // 10 * (1 - 0.9^k) / 0.1 >= 50  <=>  0.9^k <= 0.5  <=>  k >= 7
        assert_eq!(passed_at, Some(7));
        assert!(matches!(
            tally(&prop("0.5"), &ballots, &mech),
            Err(GovernanceError::MissingConvictionThreshold(_))
        ));
    }

    #[test]
    fn quadratic_budget_enforced() {
        let mech = VotingMechanism::Quadratic {
            credit_budget: Some(q("10")),
        };
        let mut b = Ballot::new(Voter::new("a", q("0")).with_credits(q("100")), Choice::For);
        b.weight_input = Some(q("16"));
        assert!(matches!(
            tally(&prop("0.5"), &[b.clone()], &mech),
            Err(GovernanceError::BudgetExceeded { .. })
        ));
        b.weight_input = Some(q("9"));
        let r = tally(&prop("0.5"), &[b], &mech).unwrap();
        assert_eq!(r.for_power, 3);
    }

    #[test]
    fn invalid_threshold() {
        assert!(tally(&prop("0"), &[], &VotingMechanism::OneTokenOneVote).is_err());
        assert!(tally(&prop("1.1"), &[], &VotingMechanism::OneTokenOneVote).is_err());
        assert!(tally(&prop("1"), &[], &VotingMechanism::OneTokenOneVote).is_ok());
    }

    #[test]
    fn vote_set_csv_joins_snapshot() {
        let snap =
            read_snapshot_rows("entity,weight,lock_end\na,100,14\nb,100,11\n".as_bytes()).unwrap();
        let votes = "voter,choice,weight_input\na,for,\nb,against,\nc,for,5\n";
        let ballots = ballots_from_csv(votes.as_bytes(), &snap, 10).unwrap();
        assert_eq!(ballots.len(), 3);
        assert_eq!(ballots[0].voter.lock_remaining, 4);
        assert_eq!(ballots[1].voter.lock_remaining, 1);
        assert_eq!(ballots[2].voter.balance, 5);
        let r = tally(
            &prop("0.5"),
            &ballots,
            &VotingMechanism::default_for(MechanismFamily::VoteEscrow),
        )
        .unwrap();
        assert_eq!(r.for_power, 100);
        assert_eq!(r.against_power, 25);

        assert!(ballots_from_csv("voter,choice\nz,for\n".as_bytes(), &snap, 0).is_err());
        assert!(ballots_from_csv("voter,choice\na,maybe\n".as_bytes(), &snap, 0).is_err());
    }
}

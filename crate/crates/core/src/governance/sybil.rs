use super::{Ballot, GovernanceError, Voter};
use crate::quantity::Quantity;

fn split_voter(voter: &Voter, cluster: &str, k: usize) -> Vec<Voter> {
    let parts = Quantity::from(k as u64);
    let balance = &voter.balance / &parts;
    let credits = &voter.credits / &parts;
    (0..k)
        .map(|i| Voter {
            id: if i == 0 {
                voter.id.clone()
            } else {
                format!("{}~{}", voter.id, i)
            },
            balance: balance.clone(),
            lock_remaining: voter.lock_remaining,
            // reputation is identity-bound and stays with the original
            reputation: if i == 0 {
                voter.reputation.clone()
            } else {
                Quantity::zero()
            },
            credits: credits.clone(),
            identity_cluster: Some(cluster.to_string()),
        })
        .collect()
}

/// Replaces every voter of `cluster` with `k` identities that share its
/// balance and credits evenly. Locks are inherited; reputation is not split.
pub fn sybil_split(
    voters: &[Voter],
    cluster: &str,
    k: usize,
) -> Result<Vec<Voter>, GovernanceError> {
    if k == 0 {
        return Err(GovernanceError::InvalidSplit);
    }
    if !voters.iter().any(|v| v.cluster() == cluster) {
        return Err(GovernanceError::UnknownCluster(cluster.to_string()));
    }
    Ok(voters
        .iter()
        .flat_map(|v| {
            if v.cluster() == cluster {
                split_voter(v, cluster, k)
            } else {
                vec![v.clone()]
            }
        })
        .collect())
}

/// [`sybil_split`] over a ballot set; every clone casts the original choice
/// and spends an equal share of the original credit input.
pub fn sybil_split_ballots(
    ballots: &[Ballot],
    cluster: &str,
    k: usize,
) -> Result<Vec<Ballot>, GovernanceError> {
    if k == 0 {
        return Err(GovernanceError::InvalidSplit);
    }
    if !ballots.iter().any(|b| b.voter.cluster() == cluster) {
        return Err(GovernanceError::UnknownCluster(cluster.to_string()));
    }
    let parts = Quantity::from(k as u64);
    Ok(ballots
        .iter()
        .flat_map(|b| {
            if b.voter.cluster() != cluster {
                return vec![b.clone()];
            }
            let input = b.weight_input.as_ref().map(|w| w / &parts);
            split_voter(&b.voter, cluster, k)
                .into_iter()
                .map(|voter| Ballot {
                    voter,
                    choice: b.choice,
                    weight_input: input.clone(),
                })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::governance::{
        tally, Choice, MechanismFamily, Proposal, ProposalKind, VotingMechanism,
    };
    use crate::quantity::q;

    #[test]
    fn split_in_two() {
        let voters = vec![
            Voter::new("att", q("100"))
                .with_cluster("x")
                .with_reputation(q("3"))
                .with_lock(2),
            Voter::new("b", q("10")),
        ];
        let out = sybil_split(&voters, "x", 2).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].balance, 50);
        assert_eq!(out[1].balance, 50);
        assert_eq!(out[1].id, "att~1");
        assert_eq!(out[0].reputation, 3);
        assert_eq!(out[1].reputation, 0);
        assert_eq!(out[1].lock_remaining, 2);
        assert_eq!(out[2], voters[1]);
    }

    #[test]
    fn split_errors() {
        let voters = vec![Voter::new("a", q("1"))];
        assert_eq!(
            sybil_split(&voters, "zz", 2).unwrap_err(),
            GovernanceError::UnknownCluster("zz".into())
        );
        assert_eq!(
            sybil_split(&voters, "a", 0).unwrap_err(),
            GovernanceError::InvalidSplit
        );
        assert_eq!(
            sybil_split(&voters, "a", 1).unwrap()[0]
                .identity_cluster
                .as_deref(),
            Some("a")
        );
    }

    #[test]
    fn split_ballots_preserve_linear_tally_and_amplify_quadratic() {
        let ballots = vec![
            Ballot::new(
                Voter::new("att", q("100"))
                    .with_credits(q("16"))
                    .with_cluster("x"),
                Choice::For,
            ),
            Ballot::new(
                Voter::new("b", q("150")).with_credits(q("25")),
                Choice::Against,
            ),
        ];
        let p = Proposal::new("p", ProposalKind::Treasury, q("0.5"));
        let split = sybil_split_ballots(&ballots, "x", 2).unwrap();

        let lin = VotingMechanism::OneTokenOneVote;
        assert_eq!(
            tally(&p, &ballots, &lin).unwrap(),
            tally(&p, &split, &lin).unwrap()
        );

        let quad = VotingMechanism::default_for(MechanismFamily::Quadratic);
        let before = tally(&p, &ballots, &quad).unwrap();
        let after = tally(&p, &split, &quad).unwrap();
        assert_eq!(before.for_power, 4);
        assert!((after.for_power.to_f64() - 2.0 * 8f64.sqrt()).abs() < 1e-12);
        assert!(!before.passed);
        assert!(after.passed);
    }
}

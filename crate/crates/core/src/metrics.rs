//! Decentralization indicators over holder distributions.
//!
//! The Gini coefficient is evaluated exactly from the sorted-rank form
//!
//! ```text
//! sum_i sum_j |x_i - x_j| = 2 * sum_k (2k - n - 1) * x_(k)     (x sorted ascending, k = 1..n)
//! G = sum_i sum_j |x_i - x_j| / (2 n^2 mean) = sum_i sum_j |x_i - x_j| / (2 n total)
//! ```
//!
//! and the Nakamoto coefficient is the smallest number of largest holders whose
//! combined weight strictly exceeds half of the total.

use std::io::Read;
use std::path::Path;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::quantity::Quantity;

/// Fractional digits used when rendering metric values.
pub const DEFAULT_PRECISION: usize = 6;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(&'static str),
    #[error("negative weight {weight} for entity `{entity}`")]
    NegativeWeight { entity: String, weight: Quantity },
    #[error("snapshot row {row}: {message}")]
    Snapshot { row: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Holding {
    pub entity: String,
    pub weight: Quantity,
}

/// Snapshot of per-entity balances or voting power.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HolderDistribution {
    pub entries: Vec<Holding>,
}

impl HolderDistribution {
    pub fn new(entries: Vec<Holding>) -> Result<Self, MetricsError> {
        if let Some(h) = entries.iter().find(|h| h.weight.is_negative()) {
            return Err(MetricsError::NegativeWeight {
                entity: h.entity.clone(),
                weight: h.weight.clone(),
            });
        }
        Ok(HolderDistribution { entries })
    }

    /// Entities are named `h0`, `h1`, ... in input order.
    pub fn from_weights<I, W>(weights: I) -> Result<Self, MetricsError>
    where
        I: IntoIterator<Item = W>,
        W: Into<Quantity>,
    {
        let entries = weights
            .into_iter()
            .enumerate()
            .map(|(i, w)| Holding {
                entity: format!("h{i}"),
                weight: w.into(),
            })
            .collect();
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> Quantity {
        self.entries.iter().map(|h| &h.weight).sum()
    }

    pub fn weights(&self) -> impl Iterator<Item = &Quantity> {
        self.entries.iter().map(|h| &h.weight)
    }

    /// Weights rescaled to integers over their common denominator and sorted
    /// ascending, with the scaled total and the denominator. Integer arithmetic
    /// avoids a gcd per addition.
    fn scaled_sorted(&self) -> Result<(Vec<BigInt>, BigInt, BigInt), MetricsError> {
        if self.entries.is_empty() {
            return Err(MetricsError::DegenerateDistribution("no holders"));
        }
        let den = self
            .weights()
            .fold(BigInt::one(), |acc, w| acc.lcm(w.as_rational().denom()));
        let mut scaled: Vec<BigInt> = self
            .weights()
            .map(|w| {
                let r = w.as_rational();
                if r.denom() == &den {
                    r.numer().clone()
                } else {
                    r.numer() * (&den / r.denom())
                }
            })
            .collect();
        scaled.sort_unstable();
        let total: BigInt = scaled.iter().sum();
        if total.is_zero() {
            return Err(MetricsError::DegenerateDistribution("all weights are zero"));
        }
        Ok((scaled, total, den))
    }
}

fn gini_sorted(sorted: &[BigInt], total: &BigInt) -> BigRational {
    let n = sorted.len() as i64;
    let mut acc = BigInt::zero();
    for (idx, x) in sorted.iter().enumerate() {
        let coeff = 2 * (idx as i64 + 1) - n - 1;
        if coeff != 0 {
            acc += x * coeff;
        }
    }
    // acc is half the double sum, so G = 2 acc / (2 n total) = acc / (n total)
    BigRational::new(acc, total * n)
}

fn nakamoto_sorted(sorted: &[BigInt], total: &BigInt) -> usize {
    let mut running = BigInt::zero();
    for (idx, w) in sorted.iter().rev().enumerate() {
        running += w;
        if &running * 2 > *total {
            return idx + 1;
        }
    }
    unreachable!("the full holder set always exceeds half of a positive total")
}

/// Exact Gini coefficient as a rational in [0, 1].
pub fn gini_exact(dist: &HolderDistribution) -> Result<BigRational, MetricsError> {
    let (sorted, total, _) = dist.scaled_sorted()?;
    Ok(gini_sorted(&sorted, &total))
}

pub fn gini(dist: &HolderDistribution) -> Result<f64, MetricsError> {
    gini_exact(dist).map(|g| Quantity::from_rational(g).to_f64())
}

pub fn nakamoto(dist: &HolderDistribution) -> Result<usize, MetricsError> {
    let (sorted, total, _) = dist.scaled_sorted()?;
    Ok(nakamoto_sorted(&sorted, &total))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub gini: f64,
    pub nakamoto: usize,
    pub total_weight: Quantity,
    pub holder_count: usize,
    /// `(k, share of the k largest holders)`, ending at `(holder_count, 1.0)`.
    pub top_k_shares: Vec<(usize, f64)>,
}

pub fn concentration_report(
    dist: &HolderDistribution,
    top_k_prefix: usize,
) -> Result<ConcentrationReport, MetricsError> {
    let (sorted, total, den) = dist.scaled_sorted()?;
    let g = Quantity::from_rational(gini_sorted(&sorted, &total)).to_f64();
    let n_coef = nakamoto_sorted(&sorted, &total);
    let n = sorted.len();
    let mut shares = Vec::with_capacity(top_k_prefix.min(n) + 1);
    let mut running = BigInt::zero();
    for (idx, w) in sorted.iter().rev().enumerate() {
        running += w;
        let k = idx + 1;
        if k <= top_k_prefix || k == n {
            let share =
                Quantity::from_rational(BigRational::new(running.clone(), total.clone())).to_f64();
            shares.push((k, share));
        }
    }
    Ok(ConcentrationReport {
        gini: g,
        nakamoto: n_coef,
        total_weight: Quantity::from_rational(BigRational::new(total, den)),
        holder_count: n,
        top_k_shares: shares,
    })
}

impl ConcentrationReport {
    /// Rounds float fields to `places` digits for display or stable output.
    pub fn rounded(&self, places: usize) -> ConcentrationReport {
        let r = |v: f64| round_to(v, places);
        ConcentrationReport {
            gini: r(self.gini),
            nakamoto: self.nakamoto,
            total_weight: self.total_weight.clone(),
            holder_count: self.holder_count,
            top_k_shares: self.top_k_shares.iter().map(|&(k, s)| (k, r(s))).collect(),
        }
    }
}

pub fn round_to(v: f64, places: usize) -> f64 {
    format!("{v:.places$}").parse().unwrap_or(v)
}

/// One row of a holder snapshot CSV (`entity,weight[,lock_end]`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotRow {
    pub entity: String,
    pub weight: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lock_end: Option<u64>,
}

pub fn read_snapshot_rows<R: Read>(reader: R) -> Result<Vec<SnapshotRow>, MetricsError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(entity_col), Some(weight_col)) = (col("entity"), col("weight")) else {
        return Err(MetricsError::Snapshot {
            row: 0,
            message: "header must contain `entity,weight`".into(),
        });
    };
    let lock_col = col("lock_end");
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 2;
        let field = |c: usize| record.get(c).unwrap_or("");
        let weight: Quantity = field(weight_col)
            .parse()
            .map_err(|e| MetricsError::Snapshot {
                row,
                message: format!("{e}"),
            })?;
        let lock_end = match lock_col.map(field) {
            None | Some("") => None,
            Some(s) => Some(s.parse().map_err(|_| MetricsError::Snapshot {
                row,
                message: format!("invalid lock_end `{s}`"),
            })?),
        };
        rows.push(SnapshotRow {
            entity: field(entity_col).to_string(),
            weight,
            lock_end,
        });
    }
    Ok(rows)
}

pub fn read_snapshot<R: Read>(reader: R) -> Result<HolderDistribution, MetricsError> {
    let entries = read_snapshot_rows(reader)?
        .into_iter()
        .map(|r| Holding {
            entity: r.entity,
            weight: r.weight,
        })
        .collect();
    HolderDistribution::new(entries)
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<HolderDistribution, MetricsError> {
    read_snapshot(std::fs::File::open(path)?)
}

pub fn write_snapshot<W: std::io::Write>(
    dist: &HolderDistribution,
    writer: W,
) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["entity", "weight"])?;
    for h in &dist.entries {
        w.write_record([h.entity.as_str(), &h.weight.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

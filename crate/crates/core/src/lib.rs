//! Token economy design toolkit.
//!
//! - [`metrics`]: Gini and Nakamoto concentration indicators.
//! - [`supply`]: capped/uncapped supply accounting, vesting, burns, buybacks and staking.
//! - [`governance`]: voting-mechanism families, tallies, the property matrix and recommender.
//! - [`spec`]: economy documents, validation, canonical form and side-by-side comparison.
//! - [`sim`]: seeded discrete-epoch scenario runs over a spec.

mod names;

pub mod governance;
pub mod metrics;
pub mod quantity;
pub mod sim;
pub mod spec;
pub mod supply;

pub use quantity::Quantity;

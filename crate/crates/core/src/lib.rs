//! Budget-constrained real-time-bidding engine.
//!
//! The crate covers the full offline pipeline for a demand-side platform:
//!
//! * [`bidlog`] — bid-log data model, TSV ingestion, synthetic generation,
//!   and censoring transforms.
//! * [`landscape`] — market-price distribution models: Kaplan-Meier,
//!   gamma regression, and a recurrent landscape forecaster trained with
//!   minibatch SGD.
//! * [`metrics`] — AUC, log loss, and average negative log probability.
//! * [`bidopt`] — the bidding MDP: exact and truncated backward-induction
//!   solvers plus MCPC and linear bid rules.
//! * [`simulator`] — second-price auction replay under per-episode budgets,
//!   producing campaign reports.
//! * [`cli`] — the `bidcraft` command-line surface tying the stages
//!   together.

pub mod bidlog;
pub mod bidopt;
pub mod cli;
pub mod error;
pub mod landscape;
pub mod metrics;
pub mod simulator;

pub use error::{Error, Result};

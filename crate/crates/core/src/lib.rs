//! Statistical validation battery for AI/ML diagnostic device outputs.
//!
//! The crate is organised by analysis family:
//!
//! - [`dataset`]: the validation record model, CSV ingestion, integrity checks
//!   and descriptive summaries.
//! - [`binary_accuracy`]: 2×2 accuracy metrics, exact binomial intervals,
//!   likelihood ratios, performance-goal tests and exact power.
//! - [`qc_triage`]: the three-row (Positive / Negative / Ungradable) confusion
//!   analysis of quality-control failures, including the worst case.
//! - [`risk_score`]: calibration, discrimination and clinical utility of
//!   continuous risk scores.
//! - [`agreement`]: Bland-Altman, Deming regression and precision variance
//!   components.
//! - [`survival`]: Kaplan-Meier, log-rank, Cox partial likelihood and the
//!   added-value likelihood ratio test.
//! - [`resample`]: seeded simulators, bootstrap intervals and the noisy
//!   test-reuse guard.
//! - [`report`]: analysis plans, orchestration and report rendering.

pub mod agreement;
pub mod binary_accuracy;
pub mod dataset;
pub mod error;
pub mod float;
pub mod qc_triage;
pub mod report;
pub mod resample;
pub mod risk_score;
pub mod special;
pub mod survival;

pub use error::{Error, Result};

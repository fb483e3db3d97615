//! Validation of continuous risk scores: calibration, discrimination and
//! clinical utility.

mod calibration;
mod roc;
mod utility;

pub use calibration::{calibration_plot, fit_recalibration, CalibrationBin, CalibrationResult, RecalibrationMode};
pub use roc::{auc_ci, delong_components, roc_curve, RocCurve, RocPoint};
pub use utility::{
    decision_curve, default_dca_grid, risk_strata_analysis, threshold_grid, DecisionCurve, RiskStrata, Stratum,
    ThresholdMetrics,
};

use crate::{Error, Result};

/// Clipping applied to scores before taking logits.
pub const SCORE_EPSILON: f64 = 1e-6;

pub fn logit(p: f64) -> Result<f64> {
    if p > 0.0 && p < 1.0 {
        Ok((p / (1.0 - p)).ln())
    } else {
        Err(Error::invalid(format!("logit of {p} is undefined; clip scores into (0, 1) first")))
    }
}

pub fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Clip into `[eps, 1 - eps]`, returning whether the value moved.
pub fn clip_score(p: f64, eps: f64) -> (f64, bool) {
    let clipped = p.clamp(eps, 1.0 - eps);
    (clipped, clipped != p)
}

/// Bayes adjustment of a predicted probability from the training prevalence
/// to a target prevalence: the posterior odds are multiplied by the ratio of
/// prior odds.
pub fn prevalence_scale(p: f64, train_prev: f64, target_prev: f64) -> Result<f64> {
    for (name, v) in [("probability", p), ("training prevalence", train_prev), ("target prevalence", target_prev)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::invalid(format!("{name} {v} must lie strictly inside (0, 1)")));
        }
    }
    let r = (target_prev / (1.0 - target_prev)) / (train_prev / (1.0 - train_prev));
    Ok(p * r / (p * r + (1.0 - p)))
}

/// Sorted scores against their empirical quantile `i / n`.
pub fn predictiveness_curve(scores: &[f64]) -> Result<Vec<(f64, f64)>> {
    if scores.is_empty() {
        return Err(Error::invalid("predictiveness curve of an empty score list"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted.into_iter().enumerate().map(|(i, s)| ((i + 1) as f64 / n, s)).collect())
}

pub(crate) fn check_scores(scores: &[f64], outcomes: &[bool]) -> Result<()> {
    if scores.len() != outcomes.len() {
        return Err(Error::invalid(format!("{} scores but {} outcomes", scores.len(), outcomes.len())));
    }
    if scores.is_empty() {
        return Err(Error::invalid("no scores"));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::invalid(format!("non-finite score {bad}")));
    }
    Ok(())
}

use super::check_scores;
use crate::binary_accuracy::{
    accuracy_metrics, proportion_ci, ratio_of_proportions, CiMethod, Confusion2x2, ProportionCi, RatioCi,
};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

fn confusion_at(scores: &[f64], outcomes: &[bool], t: f64) -> Confusion2x2 {
    let mut c = Confusion2x2::default();
    for (&s, &y) in scores.iter().zip(outcomes) {
        match (y, s >= t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub threshold: f64,
    pub table: Confusion2x2,
    pub sensitivity: Option<ProportionCi>,
    pub specificity: Option<ProportionCi>,
}

/// Sensitivity and specificity at each threshold, calling `score >= t`
/// positive.
pub fn threshold_grid(
    scores: &[f64],
    outcomes: &[bool],
    thresholds: &[f64],
    level: f64,
    method: CiMethod,
) -> Result<Vec<ThresholdMetrics>> {
    check_scores(scores, outcomes)?;
    if thresholds.is_empty() {
        return Err(Error::invalid("empty threshold list"));
    }
    thresholds
        .iter()
        .map(|&t| {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::invalid(format!("threshold {t} outside (0, 1)")));
            }
            let table = confusion_at(scores, outcomes, t);
            let m = accuracy_metrics(&table, level, method)?;
            Ok(ThresholdMetrics { threshold: t, table, sensitivity: m.sensitivity, specificity: m.specificity })
        })
        .collect()
}

/// `t = 0.01, 0.02, …, 0.99`.
pub fn default_dca_grid() -> Vec<f64> {
    (1..100).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionCurve {
    pub thresholds: Vec<f64>,
    pub nb_model: Vec<f64>,
    pub nb_all: Vec<f64>,
    pub nb_none: Vec<f64>,
    /// Net benefit divided by prevalence.
    pub snb_model: Vec<f64>,
    pub prevalence: f64,
}

/// Net benefit `TP/n - FP/n · t/(1 - t)` of the rule `score >= t`, of
/// treating everyone, and of treating no one.
pub fn decision_curve(scores: &[f64], outcomes: &[bool], thresholds: &[f64]) -> Result<DecisionCurve> {
    check_scores(scores, outcomes)?;
    if thresholds.is_empty() {
        return Err(Error::invalid("empty threshold list"));
    }
    let n = scores.len() as f64;
    let positives = outcomes.iter().filter(|&&y| y).count() as f64;
    let prevalence = positives / n;
    let mut curve = DecisionCurve {
        thresholds: thresholds.to_vec(),
        nb_model: Vec::with_capacity(thresholds.len()),
        nb_all: Vec::with_capacity(thresholds.len()),
        nb_none: vec![0.0; thresholds.len()],
        snb_model: Vec::with_capacity(thresholds.len()),
        prevalence,
    };
    for &t in thresholds {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::invalid(format!("decision threshold {t} outside (0, 1)")));
        }
        let odds = t / (1.0 - t);
        let c = confusion_at(scores, outcomes, t);
        let nb = c.tp as f64 / n - c.fp as f64 / n * odds;
        curve.nb_model.push(nb);
        curve.nb_all.push(prevalence - (1.0 - prevalence) * odds);
        curve.snb_model.push(if prevalence > 0.0 { nb / prevalence } else { f64::NAN });
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    /// `[lower, upper)`, the last stratum closed at 1.
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
    pub n_positive: usize,
    /// `None` for an empty stratum.
    pub posttest_risk: Option<ProportionCi>,
    /// `P(stratum | positive) / P(stratum | negative)`; `None` when empty.
    pub dlr: Option<RatioCi>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskStrata {
    pub cutoffs: Vec<f64>,
    pub strata: Vec<Stratum>,
    pub pretest_risk: f64,
}

pub fn risk_strata_analysis(
    scores: &[f64],
    outcomes: &[bool],
    cutoffs: &[f64],
    level: f64,
    method: CiMethod,
) -> Result<RiskStrata> {
    check_scores(scores, outcomes)?;
    if cutoffs.iter().any(|&c| !(c > 0.0 && c < 1.0)) {
        return Err(Error::invalid("risk cutoffs must lie in (0, 1)"));
    }
    if cutoffs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("risk cutoffs must be strictly ascending"));
    }
    let k = cutoffs.len() + 1;
    let mut pos = vec![0u64; k];
    let mut neg = vec![0u64; k];
    for (&s, &y) in scores.iter().zip(outcomes) {
        let idx = cutoffs.partition_point(|&c| c <= s);
        if y {
            pos[idx] += 1;
        } else {
            neg[idx] += 1;
        }
    }
    let n1: u64 = pos.iter().sum();
    let n0: u64 = neg.iter().sum();
    if n1 == 0 || n0 == 0 {
        return Err(Error::invalid("risk stratification needs both outcome classes"));
    }
    let edges: Vec<f64> = std::iter::once(0.0).chain(cutoffs.iter().copied()).chain(std::iter::once(1.0)).collect();
    let strata = (0..k)
        .map(|i| {
            let n = pos[i] + neg[i];
            let (posttest_risk, dlr) = if n == 0 {
                (None, None)
            } else {
                (
                    Some(proportion_ci(pos[i], n, level, method)?),
                    Some(ratio_of_proportions(pos[i], n1, neg[i], n0, level)?),
                )
            };
            Ok(Stratum {
                lower: edges[i],
                upper: edges[i + 1],
                n: n as usize,
                n_positive: pos[i] as usize,
                posttest_risk,
                dlr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RiskStrata { cutoffs: cutoffs.to_vec(), strata, pretest_risk: n1 as f64 / (n1 + n0) as f64 })
}

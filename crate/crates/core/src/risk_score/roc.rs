use super::check_scores;
use crate::special::{midranks, z_for_level};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Classification rule `score >= threshold`; the first point uses +inf.
    #[serde(with = "crate::float")]
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    /// Mann-Whitney estimate with ties credited one half.
    pub auc: f64,
    /// DeLong standard error.
    pub auc_se: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl RocCurve {
    /// Trapezoidal area under the empirical curve.
    pub fn trapezoidal_area(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum()
    }
}

fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// DeLong structural components: for each positive, the fraction of
/// negatives it outranks; for each negative, the fraction of positives that
/// outrank it (ties count one half). Computed from mid-ranks.
pub fn delong_components(scores: &[f64], outcomes: &[bool]) -> (Vec<f64>, Vec<f64>) {
    let all = midranks(scores);
    let pos: Vec<f64> = scores.iter().zip(outcomes).filter(|(_, &y)| y).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(outcomes).filter(|(_, &y)| !y).map(|(&s, _)| s).collect();
    let (n1, n0) = (pos.len() as f64, neg.len() as f64);
    let pos_ranks = midranks(&pos);
    let neg_ranks = midranks(&neg);
    let (mut v10, mut v01) = (Vec::with_capacity(pos.len()), Vec::with_capacity(neg.len()));
    let (mut ip, mut ineg) = (0, 0);
    for (i, &y) in outcomes.iter().enumerate() {
        if y {
            v10.push((all[i] - pos_ranks[ip]) / n0);
            ip += 1;
        } else {
            v01.push(1.0 - (all[i] - neg_ranks[ineg]) / n1);
            ineg += 1;
        }
    }
    (v10, v01)
}

pub fn roc_curve(scores: &[f64], outcomes: &[bool]) -> Result<RocCurve> {
    check_scores(scores, outcomes)?;
    let n_pos = outcomes.iter().filter(|&&y| y).count();
    let n_neg = outcomes.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("ROC analysis needs both outcome classes"));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));
    let mut points = vec![RocPoint { threshold: f64::INFINITY, tpr: 0.0, fpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let threshold = scores[order[k]];
        while k < order.len() && scores[order[k]] == threshold {
            if outcomes[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push(RocPoint { threshold, tpr: tp as f64 / n_pos as f64, fpr: fp as f64 / n_neg as f64 });
    }

    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(outcomes).filter(|(_, &y)| y).map(|(r, _)| r).sum();
    let (n1, n0) = (n_pos as f64, n_neg as f64);
    let auc = (rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * n0);

    let (v10, v01) = delong_components(scores, outcomes);
    let auc_se = (sample_variance(&v10) / n1 + sample_variance(&v01) / n0).sqrt();
    Ok(RocCurve { points, auc, auc_se, n_pos, n_neg })
}

/// Normal interval on the AUC with the DeLong standard error, truncated to
/// `[0, 1]`.
pub fn auc_ci(roc: &RocCurve, level: f64) -> Result<(f64, f64)> {
    if roc.n_pos < 2 || roc.n_neg < 2 {
        return Err(Error::invalid("AUC interval needs at least two cases in each class"));
    }
    let z = z_for_level(level)?;
    Ok(((roc.auc - z * roc.auc_se).max(0.0), (roc.auc + z * roc.auc_se).min(1.0)))
}

use super::km::check_times;
use crate::special::chi2_sf;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// One group's right-censored sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalGroup {
    pub label: String,
    pub times: Vec<f64>,
    pub events: Vec<bool>,
}

impl SurvivalGroup {
    pub fn new(label: impl Into<String>, times: Vec<f64>, events: Vec<bool>) -> Self {
        Self { label: label.into(), times, events }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogrankResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub observed: Vec<f64>,
    pub expected: Vec<f64>,
    /// No events anywhere, or a variance matrix of rank zero.
    pub degenerate: bool,
}

/// k-sample log-rank test: `U' V⁻ U` over the first `k - 1` groups, with
/// the hypergeometric covariance and a pseudo-inverse for rank-deficient
/// designs.
pub fn logrank(groups: &[SurvivalGroup]) -> Result<LogrankResult> {
    if groups.len() < 2 {
        return Err(Error::invalid("log-rank needs at least two groups"));
    }
    for g in groups {
        check_times(&g.times, &g.events)?;
        if g.times.is_empty() {
            return Err(Error::invalid(format!("group `{}` is empty", g.label)));
        }
    }
    let k = groups.len();
    let mut pooled: Vec<(f64, bool, usize)> = groups
        .iter()
        .enumerate()
        .flat_map(|(gi, g)| g.times.iter().zip(&g.events).map(move |(&t, &e)| (t, e, gi)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut at_risk: Vec<f64> = groups.iter().map(|g| g.times.len() as f64).collect();
    let mut observed = vec![0.0; k];
    let mut expected = vec![0.0; k];
    let mut cov = DMatrix::<f64>::zeros(k, k);
    let mut i = 0;
    while i < pooled.len() {
        let t = pooled[i].0;
        let mut j = i;
        let mut deaths = vec![0.0; k];
        let mut leaving = vec![0.0; k];
        while j < pooled.len() && pooled[j].0 == t {
            let (_, e, g) = pooled[j];
            if e {
                deaths[g] += 1.0;
            }
            leaving[g] += 1.0;
            j += 1;
        }
        let d: f64 = deaths.iter().sum();
        let n: f64 = at_risk.iter().sum();
        if d > 0.0 {
            for g in 0..k {
                observed[g] += deaths[g];
                expected[g] += d * at_risk[g] / n;
            }
            if n > 1.0 {
                let f = d * (n - d) / (n - 1.0);
                for g in 0..k {
                    for h in 0..k {
                        let delta = if g == h { 1.0 } else { 0.0 };
                        cov[(g, h)] += f * at_risk[g] / n * (delta - at_risk[h] / n);
                    }
                }
            }
        }
        for g in 0..k {
            at_risk[g] -= leaving[g];
        }
        i = j;
    }

    let u = DVector::from_iterator(k - 1, (0..k - 1).map(|g| observed[g] - expected[g]));
    let v = cov.view((0, 0), (k - 1, k - 1)).into_owned();
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let (statistic, rank) = if scale == 0.0 {
        (0.0, 0)
    } else {
        let svd = v.svd(true, true);
        let tol = scale * 1e-10;
        let rank = svd.rank(tol);
        let pinv = svd.pseudo_inverse(tol).map_err(|e| Error::invalid(e.to_string()))?;
        ((u.transpose() * pinv * &u)[(0, 0)].max(0.0), rank)
    };
    let df = k - 1;
    Ok(LogrankResult {
        statistic,
        df,
        p_value: if rank == 0 { 1.0 } else { chi2_sf(statistic, rank as f64) },
        observed,
        expected,
        degenerate: rank == 0,
    })
}

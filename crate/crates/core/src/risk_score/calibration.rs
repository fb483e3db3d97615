use super::{check_scores, clip_score, inv_logit, logit, SCORE_EPSILON};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_BINS: usize = 10;
const GRADIENT_TOLERANCE: f64 = 1e-8;
const MAX_ITERATIONS: usize = 50;
const MAX_HALVINGS: usize = 40;
const SEPARATION_BOUND: f64 = 15.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecalibrationMode {
    /// Slope fixed at 1: the intercept is calibration-in-the-large.
    #[default]
    InterceptOnly,
    InterceptAndSlope,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub mean_predicted: f64,
    pub observed_rate: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub intercept: f64,
    pub slope: f64,
    pub constrained: RecalibrationMode,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub gradient_norm: f64,
    /// Scores moved into `[eps, 1 - eps]` before the logit.
    pub clipped: usize,
    pub bins: Vec<CalibrationBin>,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

struct Design<'a> {
    logits: Vec<f64>,
    outcomes: &'a [bool],
}

impl Design<'_> {
    fn log_likelihood(&self, a: f64, b: f64) -> f64 {
        self.logits
            .iter()
            .zip(self.outcomes)
            .map(|(&l, &y)| {
                let eta = a + b * l;
                if y {
                    eta - softplus(eta)
                } else {
                    -softplus(eta)
                }
            })
            .sum()
    }

    /// Score vector and observed information for `(a, b)`.
    fn derivatives(&self, a: f64, b: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        let mut g = [0.0; 2];
        let mut info = [[0.0; 2]; 2];
        for (&l, &y) in self.logits.iter().zip(self.outcomes) {
            let p = inv_logit(a + b * l);
            let r = f64::from(u8::from(y)) - p;
            let w = p * (1.0 - p);
            g[0] += r;
            g[1] += r * l;
            info[0][0] += w;
            info[0][1] += w * l;
            info[1][1] += w * l * l;
        }
        info[1][0] = info[0][1];
        (g, info)
    }
}

/// Complete or quasi-complete separation on a single predictor: some cut
/// puts every event on one side and every non-event on the other.
fn separated(logits: &[f64], outcomes: &[bool]) -> bool {
    let range = |want: bool| {
        logits
            .iter()
            .zip(outcomes)
            .filter(|(_, &y)| y == want)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&l, _)| (lo.min(l), hi.max(l)))
    };
    let (pos_lo, pos_hi) = range(true);
    let (neg_lo, neg_hi) = range(false);
    neg_hi <= pos_lo || pos_hi <= neg_lo
}

/// Logistic recalibration: regress the outcome on `logit(score)` by Newton
/// iteration with step halving.
pub fn fit_recalibration(scores: &[f64], outcomes: &[bool], mode: RecalibrationMode) -> Result<CalibrationResult> {
    check_scores(scores, outcomes)?;
    let events = outcomes.iter().filter(|&&y| y).count();
    if events == 0 || events == outcomes.len() {
        return Err(Error::invalid("recalibration needs both outcome classes"));
    }
    let mut clipped = 0;
    let logits = scores
        .iter()
        .map(|&s| {
            let (c, moved) = clip_score(s, SCORE_EPSILON);
            clipped += usize::from(moved);
            logit(c)
        })
        .collect::<Result<Vec<f64>>>()?;
    let design = Design { logits, outcomes };
    let fit_slope = mode == RecalibrationMode::InterceptAndSlope;
    if fit_slope {
        let first = design.logits[0];
        if design.logits.iter().all(|&l| l == first) {
            return Err(Error::invalid("all scores are equal; the calibration slope is not identifiable"));
        }
        if separated(&design.logits, outcomes) {
            return Err(Error::Separation("outcome is perfectly ordered by score".into()));
        }
    }

    let (mut a, mut b) = (0.0, 1.0);
    let mut ll = design.log_likelihood(a, b);
    let mut iterations = 0;
    let mut converged = false;
    let mut gradient_norm;
    loop {
        let (g, info) = design.derivatives(a, b);
        gradient_norm = if fit_slope { g[0].abs().max(g[1].abs()) } else { g[0].abs() };
        if gradient_norm < GRADIENT_TOLERANCE {
            converged = true;
            break;
        }
        if iterations == MAX_ITERATIONS {
            break;
        }
        iterations += 1;
        let (da, db) = if fit_slope {
            let det = info[0][0] * info[1][1] - info[0][1] * info[1][0];
            if det <= 0.0 || !det.is_finite() {
                return Err(Error::Separation(format!("singular information matrix at iteration {iterations}")));
            }
            ((info[1][1] * g[0] - info[0][1] * g[1]) / det, (info[0][0] * g[1] - info[1][0] * g[0]) / det)
        } else {
            if info[0][0] <= 0.0 {
                return Err(Error::Separation(format!("zero information at iteration {iterations}")));
            }
            (g[0] / info[0][0], 0.0)
        };
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let (na, nb) = (a + step * da, b + step * db);
            let nll = design.log_likelihood(na, nb);
            // tolerate rounding noise so a converged Newton step is not halved away
            if nll >= ll - 1e-12 * (1.0 + ll.abs()) {
                a = na;
                b = nb;
                ll = nll;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        if a.abs() > SEPARATION_BOUND || (fit_slope && b.abs() > SEPARATION_BOUND) {
            return Err(Error::Separation(format!(
                "coefficients diverging (intercept {a:.3}, slope {b:.3}) with increasing likelihood"
            )));
        }
    }
    if !converged {
        return Err(Error::NonConvergence { iterations, gradient: gradient_norm });
    }

    let n_bins = DEFAULT_BINS.min(scores.len());
    Ok(CalibrationResult {
        intercept: a,
        slope: b,
        constrained: mode,
        converged,
        iterations,
        log_likelihood: ll,
        gradient_norm,
        clipped,
        bins: calibration_plot(scores, outcomes, n_bins)?,
    })
}

/// Equal-count bins over the sorted scores; bin `k` takes sorted positions
/// `floor(k n / bins) .. floor((k + 1) n / bins)`. Cases with tied scores
/// carry their tie group's event rate, so a group split across a boundary
/// is shared between bins pro rata and the result does not depend on input
/// order.
pub fn calibration_plot(scores: &[f64], outcomes: &[bool], n_bins: usize) -> Result<Vec<CalibrationBin>> {
    check_scores(scores, outcomes)?;
    let n = scores.len();
    if n_bins < 2 {
        return Err(Error::invalid("calibration plot needs at least 2 bins"));
    }
    if n_bins > n {
        return Err(Error::invalid(format!("{n_bins} bins requested for {n} cases")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    let mut smoothed = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let group = &order[start..end];
        let rate = group.iter().filter(|&&i| outcomes[i]).count() as f64 / group.len() as f64;
        for &i in group {
            smoothed[i] = rate;
        }
        start = end;
    }
    Ok((0..n_bins)
        .map(|k| {
            let members = &order[k * n / n_bins..(k + 1) * n / n_bins];
            let m = members.len() as f64;
            CalibrationBin {
                mean_predicted: members.iter().map(|&i| scores[i]).sum::<f64>() / m,
                observed_rate: members.iter().map(|&i| smoothed[i]).sum::<f64>() / m,
                n: members.len(),
            }
        })
        .collect())
}

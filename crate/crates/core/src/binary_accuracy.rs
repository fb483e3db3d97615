//! 2×2 diagnostic accuracy: sensitivity, specificity, predictive values,
//! likelihood ratios, Bayes updating, and exact performance-goal testing.

use crate::dataset::{DeviceOutput, Label, ValidationRecord};
use crate::special::{binom_sf, check_level, inv_reg_inc_beta, z_for_level};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Upper limit on the sample-size search in [`power_and_n`].
pub const MAX_SAMPLE_SIZE: u64 = 100_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion2x2 {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion2x2 {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn diseased(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn healthy(&self) -> u64 {
        self.fp + self.tn
    }

    /// Swap the meaning of Positive and Negative in both truth and output.
    pub fn swap_labels(&self) -> Self {
        Self { tp: self.tn, fp: self.fn_, fn_: self.fp, tn: self.tp }
    }

    pub fn add(&mut self, truth: Label, call: Label) {
        match (truth, call) {
            (Label::Positive, Label::Positive) => self.tp += 1,
            (Label::Positive, Label::Negative) => self.fn_ += 1,
            (Label::Negative, Label::Positive) => self.fp += 1,
            (Label::Negative, Label::Negative) => self.tn += 1,
        }
    }
}

/// Cross-classify binary device calls against truth. Score and Ungradable
/// outputs are rejected: threshold scores upstream and route ungradable
/// cases through [`crate::qc_triage`].
pub fn confusion_from_records(records: &[ValidationRecord]) -> Result<Confusion2x2> {
    let mut conf = Confusion2x2::default();
    for r in records {
        let truth = r.truth.ok_or_else(|| Error::invalid(format!("record `{}` has no truth label", r.subject_id)))?;
        match r.output {
            DeviceOutput::Binary(call) => conf.add(truth, call),
            DeviceOutput::Score(_) => {
                return Err(Error::invalid(format!("record `{}` has a score output; threshold it first", r.subject_id)))
            }
            DeviceOutput::Ungradable => {
                return Err(Error::invalid(format!(
                    "record `{}` is ungradable; use the QC triage analysis",
                    r.subject_id
                )))
            }
        }
    }
    Ok(conf)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CiMethod {
    #[default]
    #[serde(rename = "cp", alias = "clopper-pearson")]
    ClopperPearson,
    #[serde(rename = "wilson")]
    Wilson,
}

impl std::str::FromStr for CiMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cp" | "clopper-pearson" | "clopperpearson" => Ok(CiMethod::ClopperPearson),
            "wilson" => Ok(CiMethod::Wilson),
            other => Err(Error::invalid(format!("unknown CI method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionCi {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub method: CiMethod,
    #[serde(rename = "x")]
    pub numerator: u64,
    #[serde(rename = "n")]
    pub denominator: u64,
}

/// Two-sided interval for a binomial proportion `x / n`.
pub fn proportion_ci(x: u64, n: u64, level: f64, method: CiMethod) -> Result<ProportionCi> {
    if n == 0 {
        return Err(Error::invalid("proportion with zero denominator"));
    }
    if x > n {
        return Err(Error::invalid(format!("x = {x} exceeds n = {n}")));
    }
    check_level(level)?;
    let alpha = 1.0 - level;
    let estimate = x as f64 / n as f64;
    let (mut lower, mut upper) = match method {
        CiMethod::ClopperPearson => (cp_lower(x, n, alpha / 2.0), cp_upper(x, n, alpha / 2.0)),
        CiMethod::Wilson => {
            let z = z_for_level(level)?;
            let nf = n as f64;
            let z2 = z * z;
            let centre = (x as f64 + z2 / 2.0) / (nf + z2);
            let half = z / (nf + z2) * (x as f64 * (n - x) as f64 / nf + z2 / 4.0).sqrt();
            (centre - half, centre + half)
        }
    };
    if x == 0 {
        lower = 0.0;
    }
    if x == n {
        upper = 1.0;
    }
    lower = lower.clamp(0.0, estimate);
    upper = upper.clamp(estimate, 1.0);
    Ok(ProportionCi { estimate, lower, upper, level, method, numerator: x, denominator: n })
}

/// One-sided Clopper-Pearson lower bound with tail probability `tail`:
/// the `tail` quantile of Beta(x, n - x + 1).
pub fn cp_lower(x: u64, n: u64, tail: f64) -> f64 {
    if x == 0 {
        0.0
    } else {
        inv_reg_inc_beta(x as f64, (n - x + 1) as f64, tail)
    }
}

/// One-sided Clopper-Pearson upper bound: the `1 - tail` quantile of
/// Beta(x + 1, n - x).
pub fn cp_upper(x: u64, n: u64, tail: f64) -> f64 {
    if x == n {
        1.0
    } else {
        inv_reg_inc_beta((x + 1) as f64, (n - x) as f64, 1.0 - tail)
    }
}

/// Metrics whose denominator is zero are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMetrics {
    pub sensitivity: Option<ProportionCi>,
    pub specificity: Option<ProportionCi>,
    pub ppv: Option<ProportionCi>,
    pub npv: Option<ProportionCi>,
}

pub fn accuracy_metrics(conf: &Confusion2x2, level: f64, method: CiMethod) -> Result<AccuracyMetrics> {
    check_level(level)?;
    let metric = |x: u64, n: u64| -> Result<Option<ProportionCi>> {
        if n == 0 {
            Ok(None)
        } else {
            proportion_ci(x, n, level, method).map(Some)
        }
    };
    Ok(AccuracyMetrics {
        sensitivity: metric(conf.tp, conf.tp + conf.fn_)?,
        specificity: metric(conf.tn, conf.tn + conf.fp)?,
        ppv: metric(conf.tp, conf.tp + conf.fp)?,
        npv: metric(conf.tn, conf.tn + conf.fn_)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioCi {
    #[serde(with = "crate::float")]
    pub estimate: f64,
    #[serde(with = "crate::float")]
    pub lower: f64,
    #[serde(with = "crate::float")]
    pub upper: f64,
    pub level: f64,
    /// A zero cell made the estimate 0, +inf or 0/0; the interval is then
    /// the uninformative `[0, +inf]` rather than a continuity-corrected one.
    pub degenerate: bool,
}

/// Ratio of two proportions `(a / n1) / (b / n0)` with the log-method
/// interval, `se(log R) = sqrt(1/a - 1/n1 + 1/b - 1/n0)`.
pub fn ratio_of_proportions(a: u64, n1: u64, b: u64, n0: u64, level: f64) -> Result<RatioCi> {
    if n1 == 0 || n0 == 0 {
        return Err(Error::invalid("likelihood ratio needs nonempty diseased and non-diseased groups"));
    }
    let z = z_for_level(level)?;
    let p1 = a as f64 / n1 as f64;
    let p0 = b as f64 / n0 as f64;
    if a == 0 || b == 0 {
        let estimate = if a == 0 && b == 0 { f64::NAN } else { p1 / p0 };
        return Ok(RatioCi { estimate, lower: 0.0, upper: f64::INFINITY, level, degenerate: true });
    }
    let estimate = p1 / p0;
    let se = (1.0 / a as f64 - 1.0 / n1 as f64 + 1.0 / b as f64 - 1.0 / n0 as f64).max(0.0).sqrt();
    Ok(RatioCi {
        estimate,
        lower: (estimate.ln() - z * se).exp(),
        upper: (estimate.ln() + z * se).exp(),
        level,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodRatios {
    pub lr_pos: RatioCi,
    pub lr_neg: RatioCi,
}

pub fn likelihood_ratios(conf: &Confusion2x2, level: f64) -> Result<LikelihoodRatios> {
    let (d, h) = (conf.diseased(), conf.healthy());
    Ok(LikelihoodRatios {
        lr_pos: ratio_of_proportions(conf.tp, d, conf.fp, h, level)?,
        lr_neg: ratio_of_proportions(conf.fn_, d, conf.tn, h, level)?,
    })
}

/// Bayes update: post-odds = pre-odds × LR.
pub fn posttest_risk(pretest: f64, lr: f64) -> Result<f64> {
    if !(pretest > 0.0 && pretest < 1.0) {
        return Err(Error::invalid(format!("pre-test risk {pretest} must lie strictly inside (0, 1)")));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::invalid(format!("likelihood ratio {lr} must be positive and finite")));
    }
    let post_odds = pretest / (1.0 - pretest) * lr;
    Ok(post_odds / (1.0 + post_odds))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// H0: p ≤ goal against H1: p > goal.
    #[default]
    GreaterThan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalTest {
    pub x: u64,
    pub n: u64,
    pub goal: f64,
    pub alpha: f64,
    pub p_value: f64,
    pub reject: bool,
    /// Smallest success count that rejects; `None` when even `x = n` cannot.
    pub critical_count: Option<u64>,
    /// One-sided `1 - alpha` Clopper-Pearson lower limit.
    pub lower_limit: f64,
}

fn check_goal_alpha(goal: f64, alpha: f64) -> Result<()> {
    if !(goal > 0.0 && goal < 1.0) {
        return Err(Error::invalid(format!("performance goal {goal} outside (0, 1)")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(())
}

/// Smallest `k` with `P(X >= k | n, goal) <= alpha`.
pub fn critical_count(n: u64, goal: f64, alpha: f64) -> Option<u64> {
    // the tail is decreasing in k: bisect for the first k with tail <= alpha
    if binom_sf(n, n, goal) > alpha {
        return None;
    }
    let (mut lo, mut hi) = (0, n);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if binom_sf(mid, n, goal) <= alpha {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Some(lo)
}

/// Exact one-sided binomial test of H0: p ≤ goal.
pub fn test_vs_goal(x: u64, n: u64, goal: f64, alpha: f64, direction: Direction) -> Result<GoalTest> {
    let Direction::GreaterThan = direction;
    check_goal_alpha(goal, alpha)?;
    if n == 0 || x > n {
        return Err(Error::invalid(format!("need 0 <= x <= n and n >= 1 (x = {x}, n = {n})")));
    }
    let p_value = binom_sf(x, n, goal);
    Ok(GoalTest {
        x,
        n,
        goal,
        alpha,
        p_value,
        reject: p_value <= alpha,
        critical_count: critical_count(n, goal, alpha),
        lower_limit: cp_lower(x, n, alpha),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub alpha: f64,
    pub power: f64,
    pub critical_count: u64,
    pub sample_size: u64,
    pub goal: f64,
    pub assumed_true: f64,
    /// `P(X >= critical_count | goal)`, never above alpha.
    pub achieved_alpha: f64,
}

/// Exact power of the goal test at sample size `n`, with its critical count.
pub fn exact_power(n: u64, goal: f64, assumed_true: f64, alpha: f64) -> (f64, Option<u64>) {
    match critical_count(n, goal, alpha) {
        Some(k) => (binom_sf(k, n, assumed_true), Some(k)),
        None => (0.0, None),
    }
}

/// Smallest `n` whose exact power reaches `target_power`.
pub fn power_and_n(goal: f64, assumed_true: f64, alpha: f64, target_power: f64) -> Result<PowerResult> {
    check_goal_alpha(goal, alpha)?;
    if !(target_power > 0.0 && target_power < 1.0) {
        return Err(Error::invalid(format!("target power {target_power} outside (0, 1)")));
    }
    if !(assumed_true > goal && assumed_true < 1.0 + f64::EPSILON) {
        return Err(Error::invalid(format!("assumed true performance {assumed_true} must exceed the goal {goal}")));
    }
    for n in 1..=MAX_SAMPLE_SIZE {
        if let (power, Some(k)) = exact_power(n, goal, assumed_true, alpha) {
            if power >= target_power {
                return Ok(PowerResult {
                    alpha,
                    power,
                    critical_count: k,
                    sample_size: n,
                    goal,
                    assumed_true,
                    achieved_alpha: binom_sf(k, n, goal),
                });
            }
        }
    }
    Err(Error::invalid(format!("no sample size up to {MAX_SAMPLE_SIZE} reaches power {target_power}")))
}

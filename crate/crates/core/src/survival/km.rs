use crate::special::z_for_level;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Product-limit survival curve evaluated at the distinct event times.
///
/// An event and a censoring at the same instant count the censored subject
/// as still at risk for that event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub greenwood_se: Vec<f64>,
    /// Log-log transformed pointwise interval at `level`.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub at_risk: Vec<usize>,
    pub events: Vec<usize>,
    /// Running `Σ d / (n (n - d))`, the Greenwood sum.
    pub greenwood_sum: Vec<f64>,
    pub level: f64,
    pub n: usize,
    /// Largest observed time, event or censored.
    pub follow_up_end: f64,
}

pub(crate) fn check_times(times: &[f64], events: &[bool]) -> Result<()> {
    if times.len() != events.len() {
        return Err(Error::invalid(format!("{} times but {} event flags", times.len(), events.len())));
    }
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::invalid(format!("survival time {t} must be finite and nonnegative")));
    }
    Ok(())
}

fn loglog_interval(s: f64, greenwood_sum: f64, z: f64) -> (f64, f64) {
    if s >= 1.0 || greenwood_sum == 0.0 {
        return (s, s);
    }
    if s <= 0.0 {
        return (0.0, 0.0);
    }
    let se = greenwood_sum.sqrt() / s.ln().abs();
    (s.powf((z * se).exp()), s.powf((-z * se).exp()))
}

pub fn km_estimate(times: &[f64], events: &[bool]) -> Result<KmCurve> {
    km_estimate_at_level(times, events, 0.95)
}

pub fn km_estimate_at_level(times: &[f64], events: &[bool], level: f64) -> Result<KmCurve> {
    check_times(times, events)?;
    if times.is_empty() {
        return Err(Error::invalid("Kaplan-Meier needs at least one subject"));
    }
    let z = z_for_level(level)?;
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&i, &j| times[i].total_cmp(&times[j]));

    let mut curve = KmCurve {
        times: Vec::new(),
        survival: Vec::new(),
        greenwood_se: Vec::new(),
        lower: Vec::new(),
        upper: Vec::new(),
        at_risk: Vec::new(),
        events: Vec::new(),
        greenwood_sum: Vec::new(),
        level,
        n: times.len(),
        follow_up_end: times[order[order.len() - 1]],
    };
    let (mut s, mut sum) = (1.0_f64, 0.0_f64);
    let mut at_risk = times.len();
    let mut censored = false;
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut j = i;
        let mut d = 0;
        while j < order.len() && times[order[j]] == t {
            d += usize::from(events[order[j]]);
            j += 1;
        }
        if d > 0 {
            // before any censoring the product telescopes to a count ratio
            s = if censored {
                s * (1.0 - d as f64 / at_risk as f64)
            } else {
                (at_risk - d) as f64 / times.len() as f64
            };
            if d < at_risk {
                sum += d as f64 / (at_risk as f64 * (at_risk - d) as f64);
            }
            let (lo, hi) = loglog_interval(s, sum, z);
            curve.times.push(t);
            curve.survival.push(s);
            curve.greenwood_se.push(if s > 0.0 { s * sum.sqrt() } else { 0.0 });
            curve.lower.push(lo);
            curve.upper.push(hi);
            curve.at_risk.push(at_risk);
            curve.events.push(d);
            curve.greenwood_sum.push(sum);
        }
        censored |= j - i > d;
        at_risk -= j - i;
        i = j;
    }
    Ok(curve)
}

impl KmCurve {
    /// Index of the latest event time `<= t`.
    fn index_at(&self, t: f64) -> Option<usize> {
        self.times.partition_point(|&x| x <= t).checked_sub(1)
    }

    pub fn survival_at(&self, t: f64) -> f64 {
        self.index_at(t).map_or(1.0, |i| self.survival[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmRisk {
    pub t: f64,
    pub risk: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    /// `t` lies beyond the last observed time.
    pub extrapolated: bool,
}

/// Cumulative risk `1 - S(t)` with the complemented log-log interval.
pub fn km_risk_at(curve: &KmCurve, t: f64, level: f64) -> Result<KmRisk> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::invalid(format!("horizon {t} must be nonnegative")));
    }
    let z = z_for_level(level)?;
    let (s, lo, hi) = match curve.index_at(t) {
        None => (1.0, 1.0, 1.0),
        Some(i) => {
            let s = curve.survival[i];
            let (lo, hi) = loglog_interval(s, curve.greenwood_sum[i], z);
            (s, lo, hi)
        }
    };
    Ok(KmRisk { t, risk: 1.0 - s, lower: 1.0 - hi, upper: 1.0 - lo, level, extrapolated: t > curve.follow_up_end })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmCalibration {
    pub mean_predicted: f64,
    pub observed: f64,
    /// `mean_predicted - observed`; positive means over-prediction.
    pub difference: f64,
    pub n: usize,
}

pub fn km_calibration_check(predicted_risks: &[f64], curve: &KmCurve, t: f64) -> Result<KmCalibration> {
    if predicted_risks.is_empty() {
        return Err(Error::invalid("empty risk group"));
    }
    if let Some(r) = predicted_risks.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::invalid(format!("predicted risk {r} outside [0, 1]")));
    }
    let mean_predicted = predicted_risks.iter().sum::<f64>() / predicted_risks.len() as f64;
    let observed = 1.0 - curve.survival_at(t);
    Ok(KmCalibration { mean_predicted, observed, difference: mean_predicted - observed, n: predicted_risks.len() })
}

use super::km::check_times;
use crate::special::chi2_sf;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

const GRADIENT_TOLERANCE: f64 = 1e-8;
const STEP_TOLERANCE: f64 = 1e-6;
const MAX_ITERATIONS: usize = 100;
const MAX_HALVINGS: usize = 40;
/// Largest standardized coefficient `|β sd(x)|` accepted as finite.
const MONOTONE_BOUND: f64 = 15.0;
/// Share of events in tied groups above which Breslow ties are flagged.
pub const TIES_WARNING_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    /// Covariate names in design-matrix order.
    pub covariates: Vec<String>,
    pub coefficients: BTreeMap<String, f64>,
    pub standard_errors: BTreeMap<String, f64>,
    pub log_partial_likelihood: f64,
    pub null_log_partial_likelihood: f64,
    /// Log partial likelihood after each accepted Newton step, starting at β = 0.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub ties_method: String,
    pub tied_event_fraction: f64,
    pub ties_warning: bool,
    pub n: usize,
    pub n_events: usize,
    /// Covariates that never vary; their coefficients are held at 0.
    pub constant_covariates: Vec<String>,
    pub means: Vec<f64>,
    /// Breslow cumulative baseline hazard at the mean covariate vector.
    pub baseline_times: Vec<f64>,
    pub baseline_cumulative_hazard: Vec<f64>,
}

struct RiskSets {
    /// Subjects sorted by time.
    order: Vec<usize>,
    /// `(start, end, deaths)` blocks of tied times in `order`, with the
    /// events of each block.
    blocks: Vec<(usize, usize, Vec<usize>)>,
}

impl RiskSets {
    fn new(times: &[f64], events: &[bool]) -> Self {
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&i, &j| times[i].total_cmp(&times[j]));
        let mut blocks = Vec::new();
        let mut i = 0;
        while i < order.len() {
            let mut j = i;
            while j < order.len() && times[order[j]] == times[order[i]] {
                j += 1;
            }
            let deaths: Vec<usize> = order[i..j].iter().copied().filter(|&s| events[s]).collect();
            blocks.push((i, j, deaths));
            i = j;
        }
        Self { order, blocks }
    }
}

struct Problem<'a> {
    x: &'a DMatrix<f64>,
    sets: RiskSets,
}

impl Problem<'_> {
    /// Breslow log partial likelihood with gradient and information.
    fn evaluate(&self, beta: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let p = self.x.ncols();
        let eta = self.x * beta;
        let mut ll = 0.0;
        let mut grad = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        // sweep from the latest time so the risk set only grows
        let mut s0 = 0.0;
        let mut s1 = DVector::<f64>::zeros(p);
        let mut s2 = DMatrix::<f64>::zeros(p, p);
        for (start, end, deaths) in self.sets.blocks.iter().rev() {
            for &i in &self.sets.order[*start..*end] {
                let w = eta[i].exp();
                let xi = self.x.row(i).transpose();
                s0 += w;
                s1.axpy(w, &xi, 1.0);
                s2.ger(w, &xi, &xi, 1.0);
            }
            if deaths.is_empty() {
                continue;
            }
            let d = deaths.len() as f64;
            let mean = &s1 / s0;
            for &i in deaths {
                ll += eta[i];
                grad += self.x.row(i).transpose();
            }
            ll -= d * s0.ln();
            grad.axpy(-d, &mean, 1.0);
            info += (&s2 / s0 - &mean * mean.transpose()) * d;
        }
        (ll, grad, info)
    }
}

fn sd(column: &[f64]) -> f64 {
    let n = column.len() as f64;
    let m = column.iter().sum::<f64>() / n;
    (column.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt()
}

/// Cox proportional-hazards fit by Newton iteration with step halving on
/// the Breslow partial likelihood. Covariates are centered internally;
/// `rows[i]` holds subject `i`'s covariates in `names` order.
pub fn cox_fit(names: &[String], rows: &[Vec<f64>], times: &[f64], events: &[bool]) -> Result<CoxFit> {
    check_times(times, events)?;
    let n = times.len();
    if rows.len() != n {
        return Err(Error::invalid(format!("{} covariate rows for {n} subjects", rows.len())));
    }
    if let Some(r) = rows.iter().position(|r| r.len() != names.len()) {
        return Err(Error::invalid(format!(
            "covariate row {} has {} values, expected {}",
            r + 1,
            rows[r].len(),
            names.len()
        )));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("missing or non-finite covariate value"));
    }
    let n_events = events.iter().filter(|&&e| e).count();
    if n_events == 0 {
        return Err(Error::invalid("Cox regression needs at least one event"));
    }

    let p_all = names.len();
    let columns: Vec<Vec<f64>> = (0..p_all).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let means: Vec<f64> = columns.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let sds: Vec<f64> = columns.iter().map(|c| sd(c)).collect();
    let active: Vec<usize> = (0..p_all).filter(|&j| sds[j] > 0.0).collect();
    let constant_covariates = (0..p_all).filter(|&j| sds[j] == 0.0).map(|j| names[j].clone()).collect();
    let x = DMatrix::from_fn(n, active.len(), |i, k| columns[active[k]][i] - means[active[k]]);

    let problem = Problem { x: &x, sets: RiskSets::new(times, events) };
    let p = active.len();
    let mut beta = DVector::<f64>::zeros(p);
    let (mut ll, mut grad, mut info) = problem.evaluate(&beta);
    let null_ll = ll;
    let mut trace = vec![ll];
    let mut iterations = 0;
    let mut converged = p == 0;
    let mut last_step = f64::INFINITY;
    while !converged && iterations < MAX_ITERATIONS {
        let gradient_norm = grad.amax();
        if gradient_norm < GRADIENT_TOLERANCE && last_step < STEP_TOLERANCE {
            converged = true;
            break;
        }
        iterations += 1;
        let delta = match info.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => {
                return Err(Error::MonotoneLikelihood(format!(
                    "information matrix not positive definite at iteration {iterations}"
                )))
            }
        };
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let candidate = &beta + &delta * step;
            let (cll, cgrad, cinfo) = problem.evaluate(&candidate);
            if cll.is_finite() && cll >= ll - 1e-12 * (1.0 + ll.abs()) {
                last_step = (0..p).map(|k| (delta[k] * step * sds[active[k]]).abs()).fold(0.0, f64::max);
                beta = candidate;
                ll = cll;
                grad = cgrad;
                info = cinfo;
                trace.push(ll);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        if let Some(k) = (0..p).find(|&k| (beta[k] * sds[active[k]]).abs() > MONOTONE_BOUND) {
            return Err(Error::MonotoneLikelihood(format!(
                "coefficient of `{}` is diverging ({:.3}) while the partial likelihood keeps increasing",
                names[active[k]], beta[k]
            )));
        }
    }
    let gradient_norm = if p == 0 { 0.0 } else { grad.amax() };
    if !converged {
        if gradient_norm < GRADIENT_TOLERANCE {
            converged = true;
        } else {
            return Err(Error::NonConvergence { iterations, gradient: gradient_norm });
        }
    }

    let mut full_beta = vec![0.0; p_all];
    let mut se = vec![0.0; p_all];
    let covariance = if p > 0 { info.clone().try_inverse() } else { None };
    for (k, &j) in active.iter().enumerate() {
        full_beta[j] = beta[k];
        se[j] = covariance.as_ref().map_or(f64::NAN, |c| c[(k, k)].max(0.0).sqrt());
    }

    // Breslow baseline at the covariate means
    let eta = &x * &beta;
    let mut baseline_times = Vec::new();
    let mut baseline_cumulative_hazard = Vec::new();
    let mut at_risk_weight: f64 = eta.iter().map(|e| e.exp()).sum();
    let mut cumulative = 0.0;
    let mut tied_events = 0;
    for (start, end, deaths) in &problem.sets.blocks {
        if !deaths.is_empty() {
            cumulative += deaths.len() as f64 / at_risk_weight;
            baseline_times.push(times[problem.sets.order[*start]]);
            baseline_cumulative_hazard.push(cumulative);
            if deaths.len() > 1 {
                tied_events += deaths.len();
            }
        }
        for &i in &problem.sets.order[*start..*end] {
            at_risk_weight -= eta[i].exp();
        }
        at_risk_weight = at_risk_weight.max(0.0);
    }
    let tied_event_fraction = tied_events as f64 / n_events as f64;

    Ok(CoxFit {
        covariates: names.to_vec(),
        coefficients: names.iter().cloned().zip(full_beta).collect(),
        standard_errors: names.iter().cloned().zip(se).collect(),
        log_partial_likelihood: ll,
        null_log_partial_likelihood: null_ll,
        log_likelihood_trace: trace,
        iterations,
        converged,
        gradient_norm,
        ties_method: "breslow".into(),
        tied_event_fraction,
        ties_warning: tied_event_fraction > TIES_WARNING_FRACTION,
        n,
        n_events,
        constant_covariates,
        means,
        baseline_times,
        baseline_cumulative_hazard,
    })
}

impl CoxFit {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.coefficients.get(name).copied()
    }

    pub fn cumulative_baseline_hazard(&self, t: f64) -> f64 {
        match self.baseline_times.partition_point(|&x| x <= t) {
            0 => 0.0,
            k => self.baseline_cumulative_hazard[k - 1],
        }
    }

    /// Linear predictor relative to the covariate means.
    pub fn linear_predictor(&self, covariates: &[f64]) -> Result<f64> {
        if covariates.len() != self.covariates.len() {
            return Err(Error::invalid(format!(
                "{} covariate values for a {}-covariate model",
                covariates.len(),
                self.covariates.len()
            )));
        }
        Ok(self
            .covariates
            .iter()
            .zip(covariates)
            .zip(&self.means)
            .map(|((name, x), m)| self.coefficients[name] * (x - m))
            .sum())
    }

    /// Predicted event probability by time `t`.
    pub fn predicted_risk(&self, covariates: &[f64], t: f64) -> Result<f64> {
        let lp = self.linear_predictor(covariates)?;
        Ok(1.0 - (-self.cumulative_baseline_hazard(t) * lp.exp()).exp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrtResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Likelihood ratio test for covariates added to a nested baseline model.
pub fn added_value_lrt(baseline: &CoxFit, full: &CoxFit, added_df: usize) -> Result<LrtResult> {
    if added_df == 0 {
        return Err(Error::invalid("added_df must be at least 1"));
    }
    if baseline.n != full.n || baseline.n_events != full.n_events {
        return Err(Error::invalid("models were not fit on the same records"));
    }
    if let Some(missing) = baseline.covariates.iter().find(|c| !full.covariates.contains(c)) {
        return Err(Error::invalid(format!("baseline covariate `{missing}` is absent from the full model")));
    }
    if !(baseline.converged && full.converged) {
        return Err(Error::invalid("both models must have converged"));
    }
    let statistic = 2.0 * (full.log_partial_likelihood - baseline.log_partial_likelihood);
    if statistic < -1e-8 {
        return Err(Error::invalid(format!(
            "negative likelihood ratio statistic {statistic:.3e}: models are not nested or not at their maxima"
        )));
    }
    let statistic = statistic.max(0.0);
    Ok(LrtResult { statistic, df: added_df, p_value: chi2_sf(statistic, added_df as f64) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskHistograms {
    /// `n_bins + 1` shared edges over `[0, 1]`.
    pub edges: Vec<f64>,
    pub baseline_counts: Vec<usize>,
    pub full_counts: Vec<usize>,
}

pub fn predicted_risk_histograms(baseline_risks: &[f64], full_risks: &[f64], n_bins: usize) -> Result<RiskHistograms> {
    if n_bins < 1 {
        return Err(Error::invalid("histograms need at least one bin"));
    }
    let count = |risks: &[f64]| -> Result<Vec<usize>> {
        let mut counts = vec![0; n_bins];
        for &r in risks {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::invalid(format!("predicted risk {r} outside [0, 1]")));
            }
            counts[((r * n_bins as f64) as usize).min(n_bins - 1)] += 1;
        }
        Ok(counts)
    };
    Ok(RiskHistograms {
        edges: (0..=n_bins).map(|k| k as f64 / n_bins as f64).collect(),
        baseline_counts: count(baseline_risks)?,
        full_counts: count(full_risks)?,
    })
}

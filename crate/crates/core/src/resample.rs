//! Seeded simulation of synthetic validation studies, case-resampling
//! bootstrap and the noisy test-reuse guard.
//!
//! Every random quantity flows from a [`SeededGenerator`]: a `(seed,
//! stream_id)` pair mapped to a ChaCha20 keystream. Bootstrap replicate `r`
//! and noisy query `k` draw from their own substreams, so results do not
//! depend on execution order.

use crate::dataset::{DeviceOutput, Label, SurvivalOutcome, ValidationRecord};
use crate::special::{normal_quantile, quantile_sorted};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeededGenerator {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SeededGenerator {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream_id: 0 }
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Fresh RNG positioned at the start of this generator's stream.
    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Child generator for replicate `index`. Distinct `(stream_id, index)`
    /// pairs under one seed give distinct `(seed, stream)` keys.
    pub fn substream(&self, index: u64) -> SeededGenerator {
        SeededGenerator { seed: splitmix64(self.seed ^ splitmix64(self.stream_id)), stream_id: index }
    }
}

fn check_probability(name: &str, p: f64, open: bool) -> Result<()> {
    let ok = if open { p > 0.0 && p < 1.0 } else { (0.0..=1.0).contains(&p) };
    if ok {
        Ok(())
    } else {
        let range = if open { "(0, 1)" } else { "[0, 1]" };
        Err(Error::invalid(format!("{name} = {p} outside {range}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryStudyParams {
    pub n: usize,
    pub prevalence: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    /// Probability that a case fails QC, independent of truth.
    #[serde(default)]
    pub ungradable_rate: f64,
}

impl BinaryStudyParams {
    pub fn new(n: usize, prevalence: f64, sensitivity: f64, specificity: f64) -> Self {
        Self { n, prevalence, sensitivity, specificity, ungradable_rate: 0.0 }
    }
}

fn subject_id(i: usize) -> String {
    format!("sim-{:05}", i + 1)
}

pub fn simulate_binary_study(params: &BinaryStudyParams, gen: &SeededGenerator) -> Result<Vec<ValidationRecord>> {
    if params.n == 0 {
        return Err(Error::invalid("simulated study needs n >= 1"));
    }
    check_probability("prevalence", params.prevalence, true)?;
    check_probability("sensitivity", params.sensitivity, false)?;
    check_probability("specificity", params.specificity, false)?;
    check_probability("ungradable_rate", params.ungradable_rate, false)?;
    if params.ungradable_rate >= 1.0 {
        return Err(Error::invalid("ungradable_rate must be below 1"));
    }
    let mut rng = gen.rng();
    Ok((0..params.n)
        .map(|i| {
            let diseased = rng.random::<f64>() < params.prevalence;
            let correct = rng.random::<f64>() < if diseased { params.sensitivity } else { params.specificity };
            let failed = rng.random::<f64>() < params.ungradable_rate;
            let truth = if diseased { Label::Positive } else { Label::Negative };
            let output = if failed {
                DeviceOutput::Ungradable
            } else {
                DeviceOutput::Binary(if correct { truth } else { truth.flip() })
            };
            let mut r = ValidationRecord::new(subject_id(i), Some(truth), output);
            r.site_id = "sim".into();
            r
        })
        .collect())
}

/// Binormal scores: latent `N(δ y, 1)` with `δ = √2 Φ⁻¹(auc)`, mapped to
/// (0, 1) by the logistic function.
pub fn simulate_risk_scores(
    n: usize,
    prevalence: f64,
    auc_target: f64,
    gen: &SeededGenerator,
) -> Result<(Vec<f64>, Vec<bool>)> {
    if n == 0 {
        return Err(Error::invalid("simulation needs n >= 1"));
    }
    check_probability("prevalence", prevalence, true)?;
    if !(auc_target > 0.5 && auc_target < 1.0) {
        return Err(Error::invalid(format!("target AUC {auc_target} outside (0.5, 1)")));
    }
    let delta = std::f64::consts::SQRT_2 * normal_quantile(auc_target);
    let mut rng = gen.rng();
    let mut scores = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    for _ in 0..n {
        let y = rng.random::<f64>() < prevalence;
        let z: f64 = StandardNormal.sample(&mut rng);
        let latent = z + if y { delta / 2.0 } else { -delta / 2.0 };
        scores.push(1.0 / (1.0 + (-latent).exp()));
        outcomes.push(y);
    }
    Ok((scores, outcomes))
}

/// Scores spread over (0, 1) with outcomes drawn as `Bernoulli(score)`,
/// i.e. a perfectly calibrated model.
pub fn simulate_calibrated_scores(n: usize, gen: &SeededGenerator) -> Result<(Vec<f64>, Vec<bool>)> {
    if n == 0 {
        return Err(Error::invalid("simulation needs n >= 1"));
    }
    let latent = Normal::new(-0.5, 1.5).expect("valid normal");
    let mut rng = gen.rng();
    Ok((0..n)
        .map(|_| {
            let z: f64 = latent.sample(&mut rng);
            let s = 1.0 / (1.0 + (-z).exp());
            (s, rng.random::<f64>() < s)
        })
        .unzip())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateKind {
    /// Bernoulli(1/2) group indicator.
    #[default]
    Binary,
    StandardNormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalSimParams {
    pub n: usize,
    pub baseline_hazard: f64,
    pub log_hazard_ratio: f64,
    pub censor_rate: f64,
    #[serde(default)]
    pub covariate: CovariateKind,
    /// Names of extra standard-normal covariates with no effect on hazard.
    #[serde(default)]
    pub noise_covariates: Vec<String>,
}

impl SurvivalSimParams {
    pub fn new(n: usize, baseline_hazard: f64, log_hazard_ratio: f64, censor_rate: f64) -> Self {
        Self {
            n,
            baseline_hazard,
            log_hazard_ratio,
            censor_rate,
            covariate: CovariateKind::Binary,
            noise_covariates: Vec::new(),
        }
    }

    /// Median event time of the `x = 0` group.
    pub fn baseline_median(&self) -> f64 {
        std::f64::consts::LN_2 / self.baseline_hazard
    }
}

/// Exponential event times with hazard `h0 exp(β x)` and independent
/// exponential censoring. The covariate is stored as `x`; the output score
/// is the true event probability by the baseline median time.
pub fn simulate_survival(params: &SurvivalSimParams, gen: &SeededGenerator) -> Result<Vec<ValidationRecord>> {
    if params.n == 0 {
        return Err(Error::invalid("simulation needs n >= 1"));
    }
    for (name, rate) in [("baseline_hazard", params.baseline_hazard), ("censor_rate", params.censor_rate)] {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::invalid(format!("{name} = {rate} must be positive")));
        }
    }
    if !params.log_hazard_ratio.is_finite() {
        return Err(Error::invalid("log hazard ratio must be finite"));
    }
    let censor = Exp::new(params.censor_rate).map_err(|e| Error::invalid(e.to_string()))?;
    let horizon = params.baseline_median();
    let mut rng = gen.rng();
    (0..params.n)
        .map(|i| {
            let x = match params.covariate {
                CovariateKind::Binary => f64::from(u8::from(rng.random::<bool>())),
                CovariateKind::StandardNormal => StandardNormal.sample(&mut rng),
            };
            let hazard = params.baseline_hazard * (params.log_hazard_ratio * x).exp();
            let event_time = Exp::new(hazard).map_err(|e| Error::invalid(e.to_string()))?.sample(&mut rng);
            let censor_time = censor.sample(&mut rng);
            let risk = 1.0 - (-hazard * horizon).exp();
            let mut r = ValidationRecord::new(subject_id(i), None, DeviceOutput::Score(risk));
            r.site_id = "sim".into();
            r.survival = Some(SurvivalOutcome { time: event_time.min(censor_time), event: event_time <= censor_time });
            r.covariates.insert("x".into(), x);
            for name in &params.noise_covariates {
                r.covariates.insert(name.clone(), StandardNormal.sample(&mut rng));
            }
            Ok(r)
        })
        .collect()
}

pub const MIN_BOOTSTRAP_REPLICATES: usize = 100;
/// Largest tolerated share of replicates on which the statistic fails.
pub const MAX_MISSING_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub replicates: usize,
    /// Replicates on which the statistic was undefined.
    pub missing: usize,
    pub standard_error: f64,
}

fn resample<T: Clone>(data: &[T], gen: &SeededGenerator) -> Vec<T> {
    let mut rng = gen.rng();
    (0..data.len()).map(|_| data[rng.random_range(0..data.len())].clone()).collect()
}

fn replicate_values<T: Clone, F>(
    statistic: F,
    data: &[T],
    replicates: usize,
    gen: &SeededGenerator,
) -> Result<(Vec<f64>, usize)>
where
    F: Fn(&[T]) -> Result<f64>,
{
    if data.is_empty() {
        return Err(Error::invalid("cannot bootstrap an empty sample"));
    }
    if replicates < MIN_BOOTSTRAP_REPLICATES {
        return Err(Error::invalid(format!("bootstrap needs at least {MIN_BOOTSTRAP_REPLICATES} replicates")));
    }
    let mut values = Vec::with_capacity(replicates);
    let mut missing = 0;
    for r in 0..replicates {
        match statistic(&resample(data, &gen.substream(r as u64))) {
            Ok(v) if v.is_finite() => values.push(v),
            _ => missing += 1,
        }
    }
    if missing as f64 > MAX_MISSING_FRACTION * replicates as f64 {
        return Err(Error::invalid(format!("statistic undefined on {missing} of {replicates} bootstrap replicates")));
    }
    values.sort_by(f64::total_cmp);
    Ok((values, missing))
}

/// Percentile bootstrap interval over case-resampled replicates.
pub fn bootstrap_ci<T: Clone, F>(
    statistic: F,
    data: &[T],
    replicates: usize,
    level: f64,
    gen: &SeededGenerator,
) -> Result<BootstrapInterval>
where
    F: Fn(&[T]) -> Result<f64>,
{
    crate::special::check_level(level)?;
    let (values, missing) = replicate_values(statistic, data, replicates, gen)?;
    let alpha = 1.0 - level;
    Ok(BootstrapInterval {
        lower: quantile_sorted(&values, alpha / 2.0),
        upper: quantile_sorted(&values, 1.0 - alpha / 2.0),
        level,
        replicates,
        missing,
        standard_error: sample_sd(&values),
    })
}

/// Bootstrap standard error of `statistic`.
pub fn bootstrap_se<T: Clone, F>(statistic: F, data: &[T], replicates: usize, gen: &SeededGenerator) -> Result<f64>
where
    F: Fn(&[T]) -> Result<f64>,
{
    let (values, _) = replicate_values(statistic, data, replicates, gen)?;
    Ok(sample_sd(&values))
}

fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = values.iter().sum::<f64>() / values.len() as f64;
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Budgeted access to a test statistic, perturbed by Gaussian noise on
/// every read. Query `k` draws from substream `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyQueryLedger {
    pub noise_sd: f64,
    pub query_budget: usize,
    pub queries_used: usize,
    pub generator: SeededGenerator,
}

impl NoisyQueryLedger {
    pub fn new(noise_sd: f64, query_budget: usize, generator: SeededGenerator) -> Result<Self> {
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(Error::invalid(format!("noise sd {noise_sd} must be nonnegative")));
        }
        if query_budget == 0 {
            return Err(Error::invalid("query budget must be positive"));
        }
        Ok(Self { noise_sd, query_budget, queries_used: 0, generator })
    }

    pub fn remaining(&self) -> usize {
        self.query_budget - self.queries_used
    }

    pub fn noisy_query(&mut self, value: f64) -> Result<f64> {
        if self.queries_used >= self.query_budget {
            return Err(Error::BudgetExhausted(self.query_budget));
        }
        let k = self.queries_used as u64;
        self.queries_used += 1;
        if self.noise_sd == 0.0 {
            return Ok(value);
        }
        let z: f64 = StandardNormal.sample(&mut self.generator.substream(k).rng());
        Ok(value + self.noise_sd * z)
    }
}

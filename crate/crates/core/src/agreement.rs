//! Agreement between continuous measurements (Bland-Altman limits, Deming
//! regression) and precision variance components (repeatability and
//! reproducibility SD and %CV).

use crate::dataset::ValidationRecord;
use crate::special::z_for_level;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Conventional limits-of-agreement multiplier.
pub const LOA_MULTIPLIER: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementResult {
    pub mean_difference: f64,
    pub sd_difference: f64,
    pub multiplier: f64,
    pub loa_lower: f64,
    pub loa_upper: f64,
    /// Normal-approximation half-width of the CI on each limit.
    pub loa_ci_halfwidth: f64,
    pub level: f64,
    pub n: usize,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn check_pairs(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} x values but {} y values", x.len(), y.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite measurement"));
    }
    Ok(())
}

/// Bland-Altman analysis of `d = x - y` with the conventional 1.96 multiplier.
pub fn bland_altman(x: &[f64], y: &[f64], level: f64) -> Result<AgreementResult> {
    bland_altman_with_multiplier(x, y, level, LOA_MULTIPLIER)
}

/// Bland-Altman with an explicit limits multiplier. The CI half-width uses
/// `se(limit) = sd · sqrt(1/n + k²/(2(n - 1)))`.
pub fn bland_altman_with_multiplier(x: &[f64], y: &[f64], level: f64, multiplier: f64) -> Result<AgreementResult> {
    check_pairs(x, y)?;
    if x.len() < 2 {
        return Err(Error::invalid("Bland-Altman needs at least two pairs"));
    }
    if !(multiplier > 0.0 && multiplier.is_finite()) {
        return Err(Error::invalid(format!("limits multiplier {multiplier} must be positive")));
    }
    let z = z_for_level(level)?;
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let n = d.len() as f64;
    let m = mean(&d);
    let sd = (d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let se_limit = sd * (1.0 / n + multiplier * multiplier / (2.0 * (n - 1.0))).sqrt();
    Ok(AgreementResult {
        mean_difference: m,
        sd_difference: sd,
        multiplier,
        loa_lower: m - multiplier * sd,
        loa_upper: m + multiplier * sd,
        loa_ci_halfwidth: z * se_limit,
        level,
        n: d.len(),
    })
}

/// `(mean of pair, difference)` points for a Bland-Altman plot.
pub fn bland_altman_points(x: &[f64], y: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_pairs(x, y)?;
    Ok(x.iter().zip(y).map(|(a, b)| ((a + b) / 2.0, a - b)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemingFit {
    pub slope: f64,
    pub intercept: f64,
    /// Ratio of the y-error variance to the x-error variance.
    pub lambda: f64,
    pub n: usize,
}

/// Closed-form Deming regression with known error-variance ratio `lambda`.
pub fn deming(x: &[f64], y: &[f64], lambda: f64) -> Result<DemingFit> {
    check_pairs(x, y)?;
    if x.len() < 3 {
        return Err(Error::invalid("Deming regression needs at least three points"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("error-variance ratio {lambda} must be positive")));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    let n1 = (x.len() - 1) as f64;
    let (sxx, syy, sxy) = (sxx / n1, syy / n1, sxy / n1);
    if sxx == 0.0 {
        return Err(Error::invalid("x values have no spread"));
    }
    let u = syy - lambda * sxx;
    let slope = if sxy == 0.0 {
        if u < 0.0 {
            0.0
        } else {
            return Err(Error::invalid("s_xy = 0 with s_yy >= lambda·s_xx: line orientation undefined"));
        }
    } else {
        let root = (u * u + 4.0 * lambda * sxy * sxy).sqrt();
        // two algebraically equal forms; pick the one free of cancellation
        if u >= 0.0 {
            (u + root) / (2.0 * sxy)
        } else {
            2.0 * lambda * sxy / (root - u)
        }
    };
    Ok(DemingFit { slope, intercept: my - slope * mx, lambda, n: x.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionObservation {
    pub subject: String,
    pub condition: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionComponents {
    pub grand_mean: f64,
    pub repeatability_sd: f64,
    pub between_condition_sd: f64,
    pub reproducibility_sd: f64,
    /// `None` when the grand mean is zero.
    pub cv_repeatability: Option<f64>,
    pub cv_reproducibility: Option<f64>,
    pub repeatability_df: f64,
    pub between_condition_df: f64,
    /// The pooled between-condition estimate was negative and set to zero.
    pub between_clipped: bool,
    pub n_subjects: usize,
    pub n_observations: usize,
}

/// Which record key identifies the measurement condition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKey {
    #[default]
    Operator,
    DeviceUnit,
    Site,
}

impl std::str::FromStr for ConditionKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "operator" | "operator_id" => Ok(ConditionKey::Operator),
            "device_unit" | "device_unit_id" => Ok(ConditionKey::DeviceUnit),
            "site" | "site_id" => Ok(ConditionKey::Site),
            other => Err(Error::invalid(format!("unknown condition key `{other}`"))),
        }
    }
}

/// Extract `(subject, condition, score)` observations from precision-study
/// records. Only replicated records take part; each must carry a score.
pub fn precision_observations(records: &[ValidationRecord], key: ConditionKey) -> Result<Vec<PrecisionObservation>> {
    records
        .iter()
        .filter(|r| r.is_precision())
        .map(|r| {
            let value = r
                .output
                .score()
                .ok_or_else(|| Error::invalid(format!("precision record `{}` has no score output", r.subject_id)))?;
            let condition = match key {
                ConditionKey::Operator => r.operator_id.clone(),
                ConditionKey::DeviceUnit => r.device_unit_id.clone(),
                ConditionKey::Site => Some(r.site_id.clone()),
            }
            .unwrap_or_default();
            Ok(PrecisionObservation { subject: r.subject_id.clone(), condition, value })
        })
        .collect()
}

/// Per-subject one-way ANOVA over conditions, method of moments:
/// `σ²_r = MS_within`, `σ²_c = (MS_between - MS_within) / n0` with
/// `n0 = (N - Σ n_c² / N) / (k - 1)`. Within-cell sums of squares are pooled
/// over subjects by degrees of freedom; the condition component is the
/// df-weighted mean of the per-subject estimates, clipped at zero.
pub fn variance_components(observations: &[PrecisionObservation]) -> Result<PrecisionComponents> {
    if observations.is_empty() {
        return Err(Error::invalid("no precision observations"));
    }
    if observations.iter().any(|o| !o.value.is_finite()) {
        return Err(Error::invalid("non-finite precision measurement"));
    }
    let mut subjects: BTreeMap<&str, BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for o in observations {
        subjects.entry(&o.subject).or_default().entry(&o.condition).or_default().push(o.value);
    }

    let (mut ss_within, mut df_within) = (0.0, 0.0);
    let (mut between_weighted, mut df_between) = (0.0, 0.0);
    let mut per_subject = Vec::new();
    for cells in subjects.values() {
        let mut ssw = 0.0;
        let mut dfw = 0.0;
        for values in cells.values() {
            let m = mean(values);
            ssw += values.iter().map(|v| (v - m).powi(2)).sum::<f64>();
            dfw += (values.len() - 1) as f64;
        }
        ss_within += ssw;
        df_within += dfw;
        per_subject.push((cells, ssw, dfw));
    }
    if df_within == 0.0 {
        return Err(Error::invalid("no replicated (subject, condition) cell"));
    }
    let ms_within = ss_within / df_within;

    for (cells, _, _) in &per_subject {
        let k = cells.len();
        if k < 2 {
            continue;
        }
        let n_total: usize = cells.values().map(Vec::len).sum();
        let subject_mean = cells.values().flatten().sum::<f64>() / n_total as f64;
        let ssb: f64 = cells.values().map(|v| v.len() as f64 * (mean(v) - subject_mean).powi(2)).sum();
        let dfb = (k - 1) as f64;
        let n0 =
            (n_total as f64 - cells.values().map(|v| (v.len() * v.len()) as f64).sum::<f64>() / n_total as f64) / dfb;
        between_weighted += dfb * (ssb / dfb - ms_within) / n0;
        df_between += dfb;
    }

    let raw_between = if df_between > 0.0 { between_weighted / df_between } else { 0.0 };
    let between_clipped = raw_between < 0.0;
    let between_var = raw_between.max(0.0);
    let grand_mean = observations.iter().map(|o| o.value).sum::<f64>() / observations.len() as f64;
    let repeatability_sd = ms_within.sqrt();
    let reproducibility_sd = (ms_within + between_var).sqrt();
    let cv = |sd: f64| (grand_mean != 0.0).then(|| 100.0 * sd / grand_mean.abs());
    Ok(PrecisionComponents {
        grand_mean,
        repeatability_sd,
        between_condition_sd: between_var.sqrt(),
        reproducibility_sd,
        cv_repeatability: cv(repeatability_sd),
        cv_reproducibility: cv(reproducibility_sd),
        repeatability_df: df_within,
        between_condition_df: df_between,
        between_clipped,
        n_subjects: subjects.len(),
        n_observations: observations.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obs(subject: &str, condition: &str, value: f64) -> PrecisionObservation {
        PrecisionObservation { subject: subject.into(), condition: condition.into(), value }
    }

    #[test]
    fn identical_methods() {
        let x = [1.0, 2.5, 3.0, 7.0];
        let r = bland_altman(&x, &x, 0.95).unwrap();
        assert_eq!((r.mean_difference, r.sd_difference, r.loa_lower, r.loa_upper), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_offset() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v| v + 2.0).collect();
        let r = bland_altman(&x, &y, 0.95).unwrap();
        assert_eq!(r.mean_difference, -2.0);
        assert_eq!(r.sd_difference, 0.0);
        assert!(bland_altman(&[1.0], &[2.0], 0.95).is_err());
        assert!(bland_altman(&[1.0, 2.0], &[2.0], 0.95).is_err());
    }

    #[test]
    fn limits_and_halfwidth() {
        let x = [10.0, 12.0, 9.5, 11.0, 10.5];
        let y = [9.0, 12.5, 9.0, 10.0, 11.5];
        let r = bland_altman(&x, &y, 0.95).unwrap();
        let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let m = d.iter().sum::<f64>() / 5.0;
        let sd = (d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 4.0).sqrt();
        assert!((r.loa_upper - (m + 1.96 * sd)).abs() < 1e-12);
        let z = 1.959_963_984_540_054;
        assert!((r.loa_ci_halfwidth - z * sd * (0.2 + 1.96_f64.powi(2) / 8.0).sqrt()).abs() < 1e-12);
        assert!(r.loa_lower <= r.mean_difference && r.mean_difference <= r.loa_upper);
    }

    #[test]
    fn deming_exact_lines() {
        let x = [1.0, 2.0, 3.0, 5.0, 8.0];
        let fit = deming(&x, &x, 1.0).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12 && fit.intercept.abs() < 1e-12);
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        for lambda in [0.1, 1.0, 4.0, 25.0] {
            let fit = deming(&x, &y, lambda).unwrap();
            assert!((fit.slope - 2.0).abs() < 1e-12, "lambda {lambda}");
            assert!((fit.intercept - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deming_degenerate_inputs() {
        assert!(deming(&[1.0, 2.0], &[1.0, 2.0], 1.0).is_err());
        assert!(deming(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0], 1.0).is_err());
        // circle-like cloud: s_xy = 0 and s_yy = s_xx
        assert!(deming(&[1.0, -1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, -1.0], 1.0).is_err());
        // s_xy = 0 with s_yy < lambda·s_xx: horizontal line
        let fit = deming(&[1.0, -1.0, 2.0, -2.0], &[0.5, 0.5, -0.5, -0.5], 1.0).unwrap();
        assert_eq!(fit.slope, 0.0);
    }

    #[test]
    fn deming_line_passes_through_centroid() {
        let x = [1.0, 2.2, 2.9, 4.1, 5.3, 5.8];
        let y = [1.4, 2.0, 3.3, 3.9, 5.9, 6.1];
        let fit = deming(&x, &y, 0.7).unwrap();
        let (mx, my) = (mean(&x), mean(&y));
        assert!((fit.intercept + fit.slope * mx - my).abs() < 1e-12);
    }

    #[test]
    fn single_cell_repeatability() {
        let c = variance_components(&[obs("s", "c", 9.0), obs("s", "c", 10.0), obs("s", "c", 11.0)]).unwrap();
        assert!((c.repeatability_sd - 1.0).abs() < 1e-15);
        assert!((c.grand_mean - 10.0).abs() < 1e-15);
        assert!((c.cv_repeatability.unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(c.between_condition_sd, 0.0);
    }

    #[test]
    fn identical_conditions_add_nothing() {
        let mut o = Vec::new();
        for cond in ["op1", "op2"] {
            for v in [4.0, 5.0, 6.5] {
                o.push(obs("s", cond, v));
            }
        }
        let c = variance_components(&o).unwrap();
        assert_eq!(c.between_condition_sd, 0.0);
        assert!(c.between_clipped);
        assert_eq!(c.reproducibility_sd, c.repeatability_sd);
    }

    #[test]
    fn unreplicated_design_is_rejected() {
        assert!(variance_components(&[obs("s", "a", 1.0), obs("s", "b", 2.0)]).is_err());
        assert!(variance_components(&[]).is_err());
    }

    fn noisy_line(n: usize, x_noise: f64, y_noise: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let unit = Normal::new(0.0, 1.0).unwrap();
        (0..n)
            .map(|i| {
                let truth = i as f64 / 5.0;
                (truth + x_noise * unit.sample(&mut rng), 0.5 + 1.3 * truth + y_noise * unit.sample(&mut rng))
            })
            .unzip()
    }

    #[test]
    fn deming_swap_symmetry() {
        let (x, y) = noisy_line(50, 0.4, 0.6, 7);
        for lambda in [0.25, 1.0, 3.0] {
            let forward = deming(&x, &y, lambda).unwrap();
            let backward = deming(&y, &x, 1.0 / lambda).unwrap();
            assert!((forward.slope - 1.0 / backward.slope).abs() < 1e-9, "lambda {lambda}");
        }
    }

    #[test]
    fn deming_approaches_ols_as_x_noise_vanishes() {
        let y_noise = 0.5;
        let gaps: Vec<f64> = [0.3, 0.1, 0.01, 0.001]
            .iter()
            .map(|&x_noise| {
                let (x, y) = noisy_line(60, x_noise, y_noise, 11);
                let (mx, my) = (mean(&x), mean(&y));
                let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
                let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
                let lambda = (y_noise / x_noise).powi(2);
                (deming(&x, &y, lambda).unwrap().slope - sxy / sxx).abs()
            })
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
        assert!(gaps[3] < 1e-4, "{gaps:?}");
    }

    #[test]
    fn balanced_design_matches_mean_square_oracle() {
        // two subjects, two conditions, three replicates
        let data = [[[10.1, 9.7, 10.4], [11.0, 10.6, 11.3]], [[20.3, 19.6, 20.0], [19.2, 19.9, 19.5]]];
        let mut o = Vec::new();
        for (s, subject) in data.iter().enumerate() {
            for (c, cell) in subject.iter().enumerate() {
                for &v in cell {
                    o.push(obs(&format!("s{s}"), &format!("c{c}"), v));
                }
            }
        }
        let got = variance_components(&o).unwrap();

        let mut ssw = 0.0;
        for subject in &data {
            for cell in subject {
                let m = cell.iter().sum::<f64>() / 3.0;
                ssw += cell.iter().map(|v| (v - m).powi(2)).sum::<f64>();
            }
        }
        let msw = ssw / 8.0;
        let mut between = 0.0;
        for subject in &data {
            let cell_means: Vec<f64> = subject.iter().map(|c| c.iter().sum::<f64>() / 3.0).collect();
            let m = (cell_means[0] + cell_means[1]) / 2.0;
            let msb = 3.0 * cell_means.iter().map(|c| (c - m).powi(2)).sum::<f64>();
            between += (msb - msw) / 3.0 / 2.0;
        }
        assert!((got.repeatability_sd.powi(2) - msw).abs() < 1e-10);
        assert!((got.between_condition_sd.powi(2) - between.max(0.0)).abs() < 1e-10);
        assert!((got.reproducibility_sd.powi(2) - msw - between.max(0.0)).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn reproducibility_dominates(values in proptest::collection::vec(-5.0..5.0f64, 12)) {
            let o: Vec<_> = values
                .iter()
                .enumerate()
                .map(|(i, &v)| obs(&format!("s{}", i / 6), &format!("c{}", (i / 3) % 2), v))
                .collect();
            let c = variance_components(&o).unwrap();
            prop_assert!(c.reproducibility_sd >= c.repeatability_sd);
        }

        #[test]
        fn invariant_to_relabel_and_reorder(values in proptest::collection::vec(0.0..1.0f64, 12), rot in 0usize..12) {
            let o: Vec<_> = values
                .iter()
                .enumerate()
                .map(|(i, &v)| obs(&format!("s{}", i / 6), &format!("c{}", (i / 3) % 2), v))
                .collect();
            let mut shuffled: Vec<_> = o.iter().cloned().map(|mut x| { x.subject = format!("renamed-{}", x.subject); x }).collect();
            shuffled.rotate_left(rot);
            let a = variance_components(&o).unwrap();
            let b = variance_components(&shuffled).unwrap();
            prop_assert!((a.repeatability_sd - b.repeatability_sd).abs() < 1e-12);
            prop_assert!((a.between_condition_sd - b.between_condition_sd).abs() < 1e-12);
        }

        #[test]
        fn bland_altman_antisymmetry_and_shift(
            pairs in proptest::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 2..20),
            shift in -50.0..50.0f64,
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let a = bland_altman(&x, &y, 0.95).unwrap();
            let b = bland_altman(&y, &x, 0.95).unwrap();
            prop_assert_eq!(a.mean_difference, -b.mean_difference);
            let xs: Vec<f64> = x.iter().map(|v| v + shift).collect();
            let ys: Vec<f64> = y.iter().map(|v| v + shift).collect();
            let c = bland_altman(&xs, &ys, 0.95).unwrap();
            prop_assert!((c.mean_difference - a.mean_difference).abs() < 1e-9);
            prop_assert!((c.sd_difference - a.sd_difference).abs() < 1e-9);
        }
    }
}

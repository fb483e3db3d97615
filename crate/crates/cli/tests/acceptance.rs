//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Oracles here are written independently of the library: brute-force pair
//! counting, direct binomial sums, grid-search likelihood maximization and
//! textbook ANOVA mean squares.

use daval_core::agreement::{bland_altman, deming, variance_components, PrecisionObservation};
use daval_core::binary_accuracy::{cp_lower, proportion_ci, test_vs_goal, CiMethod, Direction};
use daval_core::float::sig;
use daval_core::qc_triage::{TriageConfusion, TriageRow};
use daval_core::resample::{simulate_calibrated_scores, simulate_survival, SeededGenerator, SurvivalSimParams};
use daval_core::risk_score::{decision_curve, fit_recalibration, prevalence_scale, roc_curve, RecalibrationMode};
use daval_core::survival::{added_value_lrt, cox_fit, km_estimate};
use num_rational::Ratio;
use rand::Rng;
use serde_json::Value;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))
}

fn daval(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_daval")).args(args).output().expect("daval binary runs")
}

fn demo_plan() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("demo/demo_plan.json")
}

fn table1_fidelity() -> Outcome {
    let start = Instant::now();
    let out = daval(&["qc", "--counts", "40,5,5,10,85,5"]);
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
    let json: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    within(Duration::from_secs(1), start)?;
    let est = |path: &str| json.pointer(path).and_then(Value::as_f64).ok_or(format!("missing {path}"));
    let checks = [
        ("positive post-test risk", est("/rows/0/posttest_risk/estimate")?, "0.8000"),
        ("positive LR", est("/rows/0/likelihood_ratio/estimate")?, "8.000"),
        ("ungradable LR", est("/rows/2/likelihood_ratio/estimate")?, "2.000"),
        ("worst-case sensitivity", est("/worst_case/sensitivity/estimate")?, "0.8000"),
        ("worst-case specificity", est("/worst_case/specificity/estimate")?, "0.8500"),
        ("pre-test risk", est("/worst_case/pretest_risk/estimate")?, "0.3333"),
    ];
    for (name, value, want) in checks {
        ensure(sig(value, 4) == want, || format!("{name}: {} != {want}", sig(value, 4)))?;
    }
    let t = TriageConfusion::new(40, 5, 5, 10, 85, 5);
    let exact = [
        (t.posttest_exact(TriageRow::Positive), Ratio::new(4, 5)),
        (t.lr_exact(TriageRow::Positive), Ratio::from_integer(8)),
        (t.lr_exact(TriageRow::Ungradable), Ratio::from_integer(2)),
        (t.worst_sensitivity_exact(), Ratio::new(4, 5)),
        (t.worst_specificity_exact(), Ratio::new(17, 20)),
        (t.pretest_exact(), Ratio::new(1, 3)),
    ];
    for (got, want) in exact {
        ensure(got == Some(want), || format!("exact value {got:?} != {want}"))?;
    }
    Ok(format!("{:?}", start.elapsed()))
}

fn bayes_coherence() -> Outcome {
    let start = Instant::now();
    let mut checked = 0u64;
    let odds = |p: Ratio<u64>| p / (Ratio::from_integer(1) - p);
    for cells in (0..6u64.pow(6)).map(|k| (0..6).map(|i| k / 6u64.pow(i) % 6).collect::<Vec<_>>()) {
        let t = TriageConfusion::from_slice(&cells).map_err(|e| e.to_string())?;
        if t.truth_positive() == 0 || t.truth_negative() == 0 {
            continue;
        }
        let pre = odds(t.pretest_exact().ok_or("pre-test undefined")?);
        for row in TriageRow::ALL {
            let (_, neg) = t.row(row);
            if neg == 0 {
                continue;
            }
            let post = odds(t.posttest_exact(row).ok_or("post-test undefined")?);
            let lr = t.lr_exact(row).ok_or("LR undefined")?;
            ensure(post == pre * lr, || format!("{cells:?} {row:?}: {post} != {pre} * {lr}"))?;
            checked += 1;
        }
    }
    within(Duration::from_secs(10), start)?;
    Ok(format!("{checked} row identities, {:?}", start.elapsed()))
}

fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    let mut pmf = vec![(1.0 - p).powi(n as i32)];
    for x in 0..n {
        let next = pmf[x as usize] * (n - x) as f64 / (x + 1) as f64 * p / (1.0 - p);
        pmf.push(next);
    }
    pmf
}

fn coverage(n: u64, p: f64, method: CiMethod) -> Result<f64, String> {
    let mut total = 0.0;
    for (x, w) in binomial_pmf(n, p).into_iter().enumerate() {
        let ci = proportion_ci(x as u64, n, 0.95, method).map_err(|e| e.to_string())?;
        if ci.lower <= p && p <= ci.upper {
            total += w;
        }
    }
    Ok(total)
}

fn interval_coverage() -> Outcome {
    let start = Instant::now();
    let (mut cp_min, mut wilson_min) = ((1.0_f64, 0, 0.0), (1.0_f64, 0, 0.0));
    for n in [10, 20, 30] {
        for k in 1..=19 {
            let p = k as f64 * 0.05;
            let cp = coverage(n, p, CiMethod::ClopperPearson)?;
            let wilson = coverage(n, p, CiMethod::Wilson)?;
            if cp < cp_min.0 {
                cp_min = (cp, n, p);
            }
            if wilson < wilson_min.0 {
                wilson_min = (wilson, n, p);
            }
        }
    }
    within(Duration::from_secs(5), start)?;
    let detail = format!(
        "min CP coverage {:.4} (n={}, p={:.2}); min Wilson coverage {:.4} (n={}, p={:.2})",
        cp_min.0, cp_min.1, cp_min.2, wilson_min.0, wilson_min.1, wilson_min.2
    );
    ensure(cp_min.0 >= 0.95 && wilson_min.0 >= 0.93, || detail.clone())?;
    Ok(detail)
}

fn test_ci_duality() -> Outcome {
    let (n, goal) = (25, 0.8);
    let mut rejected = Vec::new();
    for x in 0..=n {
        let test = test_vs_goal(x, n, goal, 0.05, Direction::GreaterThan).map_err(|e| e.to_string())?;
        let by_ci = cp_lower(x, n, 0.05) > goal;
        ensure(test.reject == by_ci, || format!("x = {x}: test {} vs interval {by_ci}", test.reject))?;
        if test.reject {
            rejected.push(x);
        }
    }
    Ok(format!("rejection set {rejected:?}"))
}

fn auc_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = SeededGenerator::new(5).rng();
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..=30);
        let mut outcomes: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        outcomes[0] = true;
        outcomes[1] = false;
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..=10) as f64 / 10.0).collect();
        let roc = roc_curve(&scores, &outcomes).map_err(|e| e.to_string())?;
        let (mut credit, mut pairs) = (0.0, 0.0);
        for i in (0..n).filter(|&i| outcomes[i]) {
            for j in (0..n).filter(|&j| !outcomes[j]) {
                pairs += 1.0;
                credit += match scores[i].partial_cmp(&scores[j]) {
                    Some(std::cmp::Ordering::Greater) => 1.0,
                    Some(std::cmp::Ordering::Equal) => 0.5,
                    _ => 0.0,
                };
            }
        }
        let trapezoid: f64 = roc.points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum();
        let brute = credit / pairs;
        worst = worst.max((roc.auc - brute).abs()).max((roc.auc - trapezoid).abs());
    }
    within(Duration::from_secs(10), start)?;
    ensure(worst <= 1e-12, || format!("max discrepancy {worst:e}"))?;
    Ok(format!("max discrepancy {worst:e}, {:?}", start.elapsed()))
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn log_likelihood(a: f64, b: f64, scores: &[f64], outcomes: &[bool]) -> f64 {
    scores
        .iter()
        .zip(outcomes)
        .map(|(&s, &y)| {
            let eta = a + b * logit(s);
            f64::from(u8::from(y)) * eta - eta.exp().ln_1p()
        })
        .sum()
}

/// Coarse-to-fine grid search: a 41×41 grid around the incumbent, shrinking tenfold each round.
fn grid_maximize(scores: &[f64], outcomes: &[bool]) -> (f64, f64) {
    let (mut a, mut b, mut step) = (0.0, 1.0, 0.25);
    while step > 1e-7 {
        let (mut best, mut arg) = (f64::NEG_INFINITY, (a, b));
        for i in -20..=20 {
            for j in -20..=20 {
                let (ca, cb) = (a + i as f64 * step, b + j as f64 * step);
                let ll = log_likelihood(ca, cb, scores, outcomes);
                if ll > best {
                    best = ll;
                    arg = (ca, cb);
                }
            }
        }
        (a, b) = arg;
        step /= 10.0;
    }
    (a, b)
}

fn calibration_recovery() -> Outcome {
    let (scores, outcomes) =
        simulate_calibrated_scores(5000, &SeededGenerator::new(2024)).map_err(|e| e.to_string())?;
    let fit = fit_recalibration(&scores, &outcomes, RecalibrationMode::InterceptAndSlope).map_err(|e| e.to_string())?;
    ensure((-0.1..=0.1).contains(&fit.intercept) && (0.9..=1.1).contains(&fit.slope), || {
        format!("intercept {}, slope {}", fit.intercept, fit.slope)
    })?;

    let small: Vec<f64> = (0..20).map(|i| 0.04 + 0.046 * i as f64).collect();
    let events = [0, 0, 1, 0, 0, 0, 1, 0, 0, 1, 0, 1, 1, 0, 1, 1, 0, 1, 1, 1];
    let small_outcomes: Vec<bool> = events.iter().map(|&e| e == 1).collect();
    let newton =
        fit_recalibration(&small, &small_outcomes, RecalibrationMode::InterceptAndSlope).map_err(|e| e.to_string())?;
    let (a, b) = grid_maximize(&small, &small_outcomes);
    let gap = (newton.intercept - a).abs().max((newton.slope - b).abs());
    ensure(gap <= 1e-4, || format!("Newton ({}, {}) vs grid ({a}, {b})", newton.intercept, newton.slope))?;
    Ok(format!("intercept {:.4}, slope {:.4}; 20-case oracle gap {gap:.1e}", fit.intercept, fit.slope))
}

fn prevalence_scaling() -> Outcome {
    let scale = |p, a, b| prevalence_scale(p, a, b).map_err(|e| e.to_string());
    for &p in &[0.01, 0.2, 0.5, 0.77, 0.99] {
        for &(train, target) in &[(0.3, 0.3), (0.5, 0.1), (0.05, 0.4), (0.9, 0.2)] {
            if train == target {
                ensure((scale(p, train, target)? - p).abs() <= 1e-12, || format!("identity fails at {p}"))?;
            }
            let back = scale(scale(p, train, target)?, target, train)?;
            ensure((back - p).abs() <= 1e-12, || format!("round trip {p} -> {back}"))?;
        }
    }
    // finite population: 10,000 subjects at training prevalence 0.5, all scored 0.5;
    // resample positives and negatives to reach the target prevalence
    let (n, train, target, p) = (10_000.0, 0.5, 0.1, 0.5);
    let (pos, neg) = (n * train, n * (1.0 - train));
    let (w_pos, w_neg) = (target / train, (1.0 - target) / (1.0 - train));
    let stratum_pos = pos * p / train * w_pos * train;
    let stratum_neg = neg * (1.0 - p) / (1.0 - train) * w_neg * (1.0 - train);
    let bayes = stratum_pos / (stratum_pos + stratum_neg);
    let scaled = scale(p, train, target)?;
    ensure((scaled - bayes).abs() <= 1e-10 && (scaled - 0.1).abs() <= 1e-10, || {
        format!("scaled {scaled}, finite-population {bayes}")
    })?;
    Ok(format!("(0.5, 0.5, 0.1) -> {scaled}"))
}

fn decision_curve_identities() -> Outcome {
    let grid: Vec<f64> = (1..100).map(|k| k as f64 / 100.0).collect();
    for prevalence in [0.1, 0.3] {
        let n = 100;
        let positives = (prevalence * n as f64).round() as usize;
        let outcomes: Vec<bool> = (0..n).map(|i| i < positives).collect();
        let noisy: Vec<f64> = (0..n).map(|i| ((i * 37) % 100) as f64 / 100.0).collect();
        let dc = decision_curve(&noisy, &outcomes, &[prevalence]).map_err(|e| e.to_string())?;
        ensure(dc.nb_all[0].abs() <= 1e-12, || format!("nb_all at prevalence {prevalence}: {}", dc.nb_all[0]))?;

        let perfect: Vec<f64> = outcomes.iter().map(|&y| if y { 1.0 } else { 0.0 }).collect();
        let dc = decision_curve(&perfect, &outcomes, &grid).map_err(|e| e.to_string())?;
        ensure(dc.nb_none.iter().all(|&v| v == 0.0), || "nb_none is not identically 0".into())?;
        for (t, nb) in grid.iter().zip(&dc.nb_model) {
            ensure((nb - prevalence).abs() <= 1e-12, || format!("perfect model nb {nb} at t = {t}"))?;
        }
    }
    Ok("prevalence 0.1 and 0.3".into())
}

fn km_checks() -> Outcome {
    let curve = km_estimate(&[1.0, 2.0, 3.0], &[true, false, true]).map_err(|e| e.to_string())?;
    let (s1, s3) = (sig(curve.survival_at(1.0), 4), sig(curve.survival_at(3.0), 4));
    ensure(s1 == "0.6667" && s3 == "0.0000", || format!("S(1) = {s1}, S(3) = {s3}"))?;
    let mut rng = SeededGenerator::new(9).rng();
    for _ in 0..100 {
        let n = rng.random_range(1..=40);
        let times: Vec<f64> = (0..n).map(|_| rng.random_range(1..=15) as f64).collect();
        let curve = km_estimate(&times, &vec![true; n]).map_err(|e| e.to_string())?;
        for t in 0..=16 {
            let t = t as f64;
            let empirical = times.iter().filter(|&&x| x > t).count() as f64 / n as f64;
            let km = curve.survival_at(t);
            ensure(km == empirical, || format!("S({t}) = {km}, empirical {empirical}"))?;
        }
    }
    Ok(format!("S(1) = {s1}, S(3) = {s3}"))
}

fn partial_log_likelihood(beta: f64, x: &[f64], times: &[f64], events: &[bool]) -> f64 {
    (0..x.len())
        .filter(|&i| events[i])
        .map(|i| {
            let risk_set: f64 = (0..x.len()).filter(|&j| times[j] >= times[i]).map(|j| (beta * x[j]).exp()).sum();
            beta * x[i] - risk_set.ln()
        })
        .sum()
}

fn cox_checks() -> Outcome {
    let start = Instant::now();
    let x = [0.5, 1.2, -0.3, 0.8, -1.0, 0.1];
    let times = [2.0, 1.0, 4.0, 3.0, 6.0, 5.0];
    let events = [true, true, false, true, true, false];
    let rows: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
    let fit = cox_fit(&["x".to_string()], &rows, &times, &events).map_err(|e| e.to_string())?;
    let (mut beta, mut step) = (0.0, 0.5);
    while step > 1e-8 {
        beta = (-40..=40)
            .map(|k| beta + k as f64 * step)
            .max_by(|a, b| {
                partial_log_likelihood(*a, &x, &times, &events)
                    .total_cmp(&partial_log_likelihood(*b, &x, &times, &events))
            })
            .unwrap_or(beta);
        step /= 10.0;
    }
    let coef = fit.coefficients["x"];
    ensure((coef - beta).abs() <= 1e-4, || format!("Newton {coef} vs grid {beta}"))?;

    let root = SeededGenerator::new(77);
    let mut params = SurvivalSimParams::new(200, 0.1, 0.7, 0.05);
    params.noise_covariates = vec!["z".into()];
    let (base_names, full_names) = (vec!["x".to_string()], vec!["x".to_string(), "z".to_string()]);
    let replicates = 1000;
    let mut rejections = 0;
    for r in 0..replicates {
        let records = simulate_survival(&params, &root.substream(r)).map_err(|e| e.to_string())?;
        let times: Vec<f64> = records.iter().map(|r| r.survival.expect("simulated").time).collect();
        let events: Vec<bool> = records.iter().map(|r| r.survival.expect("simulated").event).collect();
        let full_rows: Vec<Vec<f64>> = records.iter().map(|r| vec![r.covariates["x"], r.covariates["z"]]).collect();
        let base_rows: Vec<Vec<f64>> = full_rows.iter().map(|v| vec![v[0]]).collect();
        let base = cox_fit(&base_names, &base_rows, &times, &events).map_err(|e| e.to_string())?;
        let full = cox_fit(&full_names, &full_rows, &times, &events).map_err(|e| e.to_string())?;
        if added_value_lrt(&base, &full, 1).map_err(|e| e.to_string())?.p_value < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / replicates as f64;
    within(Duration::from_secs(60), start)?;
    ensure((0.03..=0.07).contains(&rate), || format!("null rejection rate {rate}"))?;
    Ok(format!("beta {coef:.6} (grid {beta:.6}); null rejection rate {rate}, {:?}", start.elapsed()))
}

fn deming_bland_altman() -> Outcome {
    let x: Vec<f64> = (0..12).map(|i| 0.7 + 1.3 * i as f64).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.5 + 0.75 * v).collect();
    let fit = deming(&x, &y, 1.0).map_err(|e| e.to_string())?;
    ensure((fit.slope - 0.75).abs() <= 1e-12 && (fit.intercept - 2.5).abs() <= 1e-12, || {
        format!("noiseless fit slope {}, intercept {}", fit.slope, fit.intercept)
    })?;

    let noise = |i: usize| ((i * 7919) % 101) as f64 / 101.0 - 0.5;
    let xn: Vec<f64> = (0..30).map(|i| i as f64 + 0.4 * noise(i)).collect();
    let yn: Vec<f64> = (0..30).map(|i| 1.0 + 1.1 * i as f64 + 0.6 * noise(i + 13)).collect();
    for lambda in [0.25, 1.0, 3.0] {
        let forward = deming(&xn, &yn, lambda).map_err(|e| e.to_string())?;
        let backward = deming(&yn, &xn, 1.0 / lambda).map_err(|e| e.to_string())?;
        ensure((forward.slope - 1.0 / backward.slope).abs() <= 1e-9, || {
            format!("lambda {lambda}: {} vs 1/{}", forward.slope, backward.slope)
        })?;
    }

    let a: Vec<f64> = (0..20).map(|i| (i * 5 % 17) as f64 / 8.0).collect();
    let b: Vec<f64> = (0..20).map(|i| (i * 3 % 13) as f64 / 8.0 + 0.5).collect();
    let base = bland_altman(&a, &b, 0.95).map_err(|e| e.to_string())?;
    let shifted_a: Vec<f64> = a.iter().map(|v| v + 4.0).collect();
    let shifted_b: Vec<f64> = b.iter().map(|v| v + 4.0).collect();
    let shifted = bland_altman(&shifted_a, &shifted_b, 0.95).map_err(|e| e.to_string())?;
    ensure(base == shifted, || "Bland-Altman result changed under a common shift".into())?;
    Ok("noiseless, swap and shift checks".into())
}

fn anova_oracle(cells: &[Vec<f64>]) -> (f64, f64) {
    let k = cells.len() as f64;
    let r = cells[0].len() as f64;
    let means: Vec<f64> = cells.iter().map(|c| c.iter().sum::<f64>() / r).collect();
    let grand = means.iter().sum::<f64>() / k;
    let msw = cells.iter().zip(&means).map(|(c, m)| c.iter().map(|v| (v - m) * (v - m)).sum::<f64>()).sum::<f64>()
        / (k * (r - 1.0));
    let msb = r * means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (k - 1.0);
    let between = ((msb - msw) / r).max(0.0);
    (msw.sqrt(), (msw + between).sqrt())
}

fn precision_components() -> Outcome {
    let cells = vec![vec![10.1, 10.4, 9.8], vec![11.0, 11.6, 11.3]];
    let obs: Vec<PrecisionObservation> = cells
        .iter()
        .enumerate()
        .flat_map(|(c, values)| {
            values.iter().map(move |&value| PrecisionObservation {
                subject: "s1".into(),
                condition: format!("c{c}"),
                value,
            })
        })
        .collect();
    let got = variance_components(&obs).map_err(|e| e.to_string())?;
    let (repeat, repro) = anova_oracle(&cells);
    ensure((got.repeatability_sd - repeat).abs() <= 1e-10 && (got.reproducibility_sd - repro).abs() <= 1e-10, || {
        format!("({}, {}) vs oracle ({repeat}, {repro})", got.repeatability_sd, got.reproducibility_sd)
    })?;

    let mut rng = SeededGenerator::new(12).rng();
    for _ in 0..1000 {
        let (subjects, conditions) = (rng.random_range(1..=4), rng.random_range(2..=4));
        let mut obs = Vec::new();
        for s in 0..subjects {
            for c in 0..conditions {
                let shift: f64 = rng.random_range(-1.0..1.0);
                for _ in 0..rng.random_range(2..=4) {
                    obs.push(PrecisionObservation {
                        subject: format!("s{s}"),
                        condition: format!("c{c}"),
                        value: 5.0 + shift + rng.random_range(-1.0..1.0),
                    });
                }
            }
        }
        let v = variance_components(&obs).map_err(|e| e.to_string())?;
        ensure(v.reproducibility_sd >= v.repeatability_sd, || {
            format!("reproducibility {} < repeatability {}", v.reproducibility_sd, v.repeatability_sd)
        })?;
    }
    Ok(format!("repeatability {repeat:.6}, reproducibility {repro:.6}"))
}

fn end_to_end_determinism() -> Outcome {
    let plan = demo_plan();
    let plan = plan.to_str().ok_or("non-UTF-8 path")?;
    let dirs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().expect("temp dir")).collect();
    let mut reports = Vec::new();
    for dir in &dirs {
        let out_dir = dir.path().to_str().ok_or("non-UTF-8 path")?;
        let out = daval(&["run", "--plan", plan, "--seed", "42", "--out", out_dir]);
        ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
        reports.push(std::fs::read(dir.path().join("report.json")).map_err(|e| e.to_string())?);
    }
    ensure(reports[0] == reports[1], || "reports differ".into())?;
    Ok(format!("{} identical bytes", reports[0].len()))
}

fn main() {
    let criteria: [Criterion; 13] = [
        ("Table 1 fidelity", table1_fidelity),
        ("Bayes coherence sweep", bayes_coherence),
        ("Clopper-Pearson and Wilson coverage", interval_coverage),
        ("test/CI duality", test_ci_duality),
        ("AUC oracle equivalence", auc_equivalence),
        ("calibration recovery", calibration_recovery),
        ("prevalence scaling", prevalence_scaling),
        ("decision curve identities", decision_curve_identities),
        ("Kaplan-Meier hand example", km_checks),
        ("Cox oracle and LRT null calibration", cox_checks),
        ("Deming and Bland-Altman", deming_bland_altman),
        ("precision components", precision_components),
        ("end-to-end determinism", end_to_end_determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS  {:>2}. {name}: {detail}", k + 1),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {:>2}. {name}: {reason}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

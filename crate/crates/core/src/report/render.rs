use super::plan::AnalysisKind;
use super::run::{AnalysisResult, GroupSurvival, ValidationReport};
use crate::binary_accuracy::{ProportionCi, RatioCi};
use crate::float::{percent as pct, sig};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

const DIGITS: usize = 4;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    #[serde(alias = "markdown")]
    Md,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "md" | "markdown" => Ok(ReportFormat::Md),
            other => Err(Error::invalid(format!("unknown report format `{other}`"))),
        }
    }
}

/// Pretty JSON with a trailing newline; the machine-readable source of truth.
pub fn to_json(report: &ValidationReport) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

fn s(v: f64) -> String {
    sig(v, DIGITS)
}

fn ci(p: &ProportionCi) -> String {
    format!("{} ({}, {})", s(p.estimate), s(p.lower), s(p.upper))
}

fn opt_ci(p: &Option<ProportionCi>) -> String {
    p.as_ref().map(ci).unwrap_or_else(|| "undefined".into())
}

fn ratio(r: &RatioCi) -> String {
    let flag = if r.degenerate { " (zero cell)" } else { "" };
    format!("{} ({}, {}){flag}", s(r.estimate), s(r.lower), s(r.upper))
}

/// Human-readable report: header, warnings, then one section per analysis.
pub fn to_markdown(report: &ValidationReport) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "# Validation report\n");
    let _ = writeln!(w, "- Tool: {} {}", report.tool, report.tool_version);
    let _ = writeln!(w, "- Plan hash: `{}`", report.plan_hash);
    let _ = writeln!(
        w,
        "- Dataset: `{}` ({} rows, sha256 `{}`)",
        report.dataset.path, report.dataset.rows, report.dataset.sha256
    );
    let _ = writeln!(w, "- Confidence level: {}", pct(report.level));
    let _ = writeln!(w, "- Seed: {}", report.seed);
    let _ = writeln!(w, "- Records: {}", report.integrity.n_records);
    if let Some(p) = report.summary.prevalence {
        let _ = writeln!(w, "- Prevalence: {}", s(p));
    }
    let _ = writeln!(w, "\n## Warnings\n");
    let all_warnings: Vec<String> = report
        .warnings
        .iter()
        .cloned()
        .chain(report.results.iter().flat_map(|b| b.warnings.iter().map(move |m| format!("{}: {m}", b.analysis))))
        .collect();
    if all_warnings.is_empty() {
        let _ = writeln!(w, "None.");
    }
    for m in &all_warnings {
        let _ = writeln!(w, "- {m}");
    }
    for block in &report.results {
        let _ = writeln!(w, "\n## {}\n", title(block.analysis));
        let _ = writeln!(w, "Records analysed: {}\n", block.n_records);
        match (&block.result, &block.error) {
            (_, Some(e)) => {
                let _ = writeln!(w, "**Analysis failed:** {e}");
            }
            (Some(r), None) => render_result(w, r, report.level),
            (None, None) => {}
        }
    }
    out
}

fn title(kind: AnalysisKind) -> &'static str {
    match kind {
        AnalysisKind::Accuracy => "Binary accuracy",
        AnalysisKind::Qc => "QC triage",
        AnalysisKind::Riskscore => "Risk score",
        AnalysisKind::Agreement => "Agreement",
        AnalysisKind::Precision => "Precision",
        AnalysisKind::Survival => "Survival",
    }
}

fn render_result(w: &mut String, result: &AnalysisResult, level: f64) {
    let level_pct = pct(level);
    match result {
        AnalysisResult::Accuracy(a) => {
            let t = &a.table;
            let _ = writeln!(w, "| | Truth Positive | Truth Negative |\n|---|---|---|");
            let _ = writeln!(w, "| Device Positive | {} | {} |", t.tp, t.fp);
            let _ = writeln!(w, "| Device Negative | {} | {} |\n", t.fn_, t.tn);
            let _ = writeln!(w, "| Metric | Estimate ({level_pct} CI) |\n|---|---|");
            let _ = writeln!(w, "| Sensitivity | {} |", opt_ci(&a.metrics.sensitivity));
            let _ = writeln!(w, "| Specificity | {} |", opt_ci(&a.metrics.specificity));
            let _ = writeln!(w, "| PPV | {} |", opt_ci(&a.metrics.ppv));
            let _ = writeln!(w, "| NPV | {} |", opt_ci(&a.metrics.npv));
            let _ = writeln!(w, "| LR+ | {} |", ratio(&a.likelihood_ratios.lr_pos));
            let _ = writeln!(w, "| LR- | {} |", ratio(&a.likelihood_ratios.lr_neg));
            let _ = writeln!(w, "| Prevalence | {} |", s(a.prevalence));
            if let Some(g) = &a.goal_tests {
                let _ = writeln!(w, "\n| Goal test | x / n | Goal | p-value | Reject H0 |\n|---|---|---|---|---|");
                for (name, test) in [("Sensitivity", &g.sensitivity), ("Specificity", &g.specificity)] {
                    if let Some(t) = test {
                        let _ = writeln!(
                            w,
                            "| {name} | {} / {} | {} | {} | {} |",
                            t.x,
                            t.n,
                            s(t.goal),
                            s(t.p_value),
                            t.reject
                        );
                    }
                }
            }
            if let Some(p) = &a.power {
                let _ = writeln!(
                    w,
                    "\nSample size for power {} at assumed performance {}: n = {} (critical count {}, achieved alpha {}).",
                    s(p.power),
                    s(p.assumed_true),
                    p.sample_size,
                    p.critical_count,
                    s(p.achieved_alpha)
                );
            }
        }
        AnalysisResult::Qc(report) => {
            let _ = write!(w, "{}", report.to_markdown());
        }
        AnalysisResult::Riskscore(r) => {
            let (lo, hi) = r.auc_ci;
            let _ = writeln!(w, "| Metric | Value |\n|---|---|");
            let _ = writeln!(w, "| Cases | {} |", r.n);
            let _ = writeln!(w, "| Prevalence | {} |", s(r.prevalence));
            let _ = writeln!(w, "| AUC ({level_pct} CI, DeLong) | {} ({}, {}) |", s(r.roc.auc), s(lo), s(hi));
            if let Some(b) = &r.auc_bootstrap {
                let _ = writeln!(w, "| AUC bootstrap interval | ({}, {}) |", s(b.lower), s(b.upper));
            }
            let c = &r.calibration;
            let _ = writeln!(w, "| Calibration intercept | {} |", s(c.intercept));
            let _ = writeln!(w, "| Calibration slope | {} |", s(c.slope));
            if let Some(adj) = &r.prevalence_adjustment {
                let _ = writeln!(
                    w,
                    "| Mean risk after prevalence scaling {} to {} | {} |",
                    s(adj.train_prevalence),
                    s(adj.target_prevalence),
                    s(adj.mean_adjusted_score)
                );
            }
            let _ = writeln!(w, "\n| Bin | n | Mean predicted | Observed rate |\n|---|---|---|---|");
            for (k, b) in c.bins.iter().enumerate() {
                let _ = writeln!(w, "| {} | {} | {} | {} |", k + 1, b.n, s(b.mean_predicted), s(b.observed_rate));
            }
            if let Some(st) = &r.strata {
                let _ = writeln!(
                    w,
                    "\n| Risk stratum | n | Events | Post-test risk ({level_pct} CI) | Stratum LR ({level_pct} CI) |\n|---|---|---|---|---|"
                );
                for x in &st.strata {
                    let lr = x.dlr.as_ref().map(ratio).unwrap_or_else(|| "undefined".into());
                    let _ = writeln!(
                        w,
                        "| [{}, {}) | {} | {} | {} | {} |",
                        s(x.lower),
                        s(x.upper),
                        x.n,
                        x.n_positive,
                        opt_ci(&x.posttest_risk),
                        lr
                    );
                }
            }
            let d = &r.decision_curve;
            let _ = writeln!(w, "\n| Threshold | NB model | NB treat all | NB treat none |\n|---|---|---|---|");
            for (i, t) in d.thresholds.iter().enumerate() {
                if d.thresholds.len() <= 20 || i % 10 == 9 {
                    let _ =
                        writeln!(w, "| {} | {} | {} | {} |", s(*t), s(d.nb_model[i]), s(d.nb_all[i]), s(d.nb_none[i]));
                }
            }
        }
        AnalysisResult::Agreement(a) => {
            let b = &a.bland_altman;
            let _ = writeln!(w, "Methods: `{}` vs `{}` (n = {})\n", a.x, a.y, b.n);
            let _ = writeln!(w, "| Quantity | Value |\n|---|---|");
            let _ = writeln!(w, "| Mean difference | {} |", s(b.mean_difference));
            let _ = writeln!(w, "| SD of differences | {} |", s(b.sd_difference));
            let _ = writeln!(w, "| Lower limit of agreement | {} ± {} |", s(b.loa_lower), s(b.loa_ci_halfwidth));
            let _ = writeln!(w, "| Upper limit of agreement | {} ± {} |", s(b.loa_upper), s(b.loa_ci_halfwidth));
            let _ = writeln!(w, "| Deming slope (lambda {}) | {} |", s(a.deming.lambda), s(a.deming.slope));
            let _ = writeln!(w, "| Deming intercept | {} |", s(a.deming.intercept));
        }
        AnalysisResult::Precision(p) => {
            let cv = |v: Option<f64>| v.map(s).unwrap_or_else(|| "undefined".into());
            let _ = writeln!(w, "| Component | SD | %CV |\n|---|---|---|");
            let _ = writeln!(w, "| Repeatability | {} | {} |", s(p.repeatability_sd), cv(p.cv_repeatability));
            let _ = writeln!(w, "| Between-condition | {} | |", s(p.between_condition_sd));
            let _ = writeln!(w, "| Reproducibility | {} | {} |", s(p.reproducibility_sd), cv(p.cv_reproducibility));
            let _ = writeln!(
                w,
                "\nGrand mean {} over {} subjects, {} observations.",
                s(p.grand_mean),
                p.n_subjects,
                p.n_observations
            );
            if p.between_clipped {
                let _ = writeln!(w, "The between-condition variance estimate was negative and set to 0.");
            }
        }
        AnalysisResult::Survival(r) => {
            let _ = writeln!(w, "Subjects {}, events {}.\n", r.n, r.n_events);
            let _ = writeln!(
                w,
                "| Group | n | Events | Risk at horizon ({level_pct} CI) | Mean predicted | Difference |\n|---|---|---|---|---|---|"
            );
            for g in std::iter::once(&r.overall).chain(&r.groups) {
                survival_row(w, g);
            }
            if let Some(l) = &r.logrank {
                let _ = writeln!(w, "\nLog-rank: chi-square {} on {} df, p = {}.", s(l.statistic), l.df, s(l.p_value));
            }
            if let Some(c) = &r.cox {
                let _ = writeln!(w, "\n| Covariate | Baseline coefficient | Full coefficient |\n|---|---|---|");
                for name in &c.full.covariates {
                    let base = c.baseline.coefficient(name).map(s).unwrap_or_default();
                    let _ = writeln!(w, "| {name} | {base} | {} |", s(c.full.coefficients[name]));
                }
                let _ = writeln!(
                    w,
                    "\nAdded-value LRT: statistic {} on {} df, p = {}.",
                    s(c.lrt.statistic),
                    c.lrt.df,
                    s(c.lrt.p_value)
                );
                let h = &c.histograms;
                let _ = writeln!(w, "\n| Predicted risk bin | Baseline | Full |\n|---|---|---|");
                for k in 0..h.baseline_counts.len() {
                    let _ = writeln!(
                        w,
                        "| [{}, {}) | {} | {} |",
                        s(h.edges[k]),
                        s(h.edges[k + 1]),
                        h.baseline_counts[k],
                        h.full_counts[k]
                    );
                }
            }
        }
    }
}

fn survival_row(w: &mut String, g: &GroupSurvival) {
    let events: usize = g.curve.events.iter().sum();
    let risk = g.risk_at_horizon.map(|r| format!("{} ({}, {})", s(r.risk), s(r.lower), s(r.upper))).unwrap_or_default();
    let (mean, diff) = g.calibration.map(|c| (s(c.mean_predicted), s(c.difference))).unwrap_or_default();
    let _ = writeln!(w, "| {} | {} | {events} | {risk} | {mean} | {diff} |", g.group, g.n);
}

fn csv_number(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Plot-data CSVs for the analyses present in the report.
pub fn write_plot_data(report: &ValidationReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut emit = |name: &str, header: &[&str], rows: Vec<Vec<String>>| -> Result<()> {
        let path = dir.join(name);
        write_csv(&path, header, rows)?;
        written.push(path);
        Ok(())
    };
    for block in &report.results {
        match &block.result {
            Some(AnalysisResult::Riskscore(r)) => {
                let f = csv_number;
                emit(
                    "roc.csv",
                    &["threshold", "fpr", "tpr"],
                    r.roc.points.iter().map(|p| vec![f(p.threshold), f(p.fpr), f(p.tpr)]).collect(),
                )?;
                emit(
                    "calibration.csv",
                    &["mean_pred", "obs_rate", "n"],
                    r.calibration
                        .bins
                        .iter()
                        .map(|b| vec![f(b.mean_predicted), f(b.observed_rate), b.n.to_string()])
                        .collect(),
                )?;
                let d = &r.decision_curve;
                emit(
                    "dca.csv",
                    &["t", "nb_model", "nb_all", "nb_none", "snb"],
                    (0..d.thresholds.len())
                        .map(|i| {
                            vec![
                                f(d.thresholds[i]),
                                f(d.nb_model[i]),
                                f(d.nb_all[i]),
                                f(d.nb_none[i]),
                                f(d.snb_model[i]),
                            ]
                        })
                        .collect(),
                )?;
                emit(
                    "predictiveness.csv",
                    &["quantile", "risk"],
                    r.predictiveness.iter().map(|(q, v)| vec![f(*q), f(*v)]).collect(),
                )?;
            }
            Some(AnalysisResult::Agreement(a)) => {
                emit(
                    "bland_altman.csv",
                    &["mean", "difference"],
                    a.points.iter().map(|(m, d)| vec![csv_number(*m), csv_number(*d)]).collect(),
                )?;
            }
            Some(AnalysisResult::Survival(r)) => {
                let mut rows = Vec::new();
                for g in std::iter::once(&r.overall).chain(&r.groups) {
                    let c = &g.curve;
                    rows.push(vec![g.group.clone(), "0".into(), "1".into(), "1".into(), "1".into(), c.n.to_string()]);
                    for k in 0..c.times.len() {
                        rows.push(vec![
                            g.group.clone(),
                            csv_number(c.times[k]),
                            csv_number(c.survival[k]),
                            csv_number(c.lower[k]),
                            csv_number(c.upper[k]),
                            c.at_risk[k].to_string(),
                        ]);
                    }
                }
                emit("km.csv", &["group", "time", "survival", "lower", "upper", "at_risk"], rows)?;
            }
            _ => {}
        }
    }
    Ok(written)
}

/// Write the report in `format` plus plot-data CSVs into `dir`.
pub fn emit_report(report: &ValidationReport, dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (name, text) = match format {
        ReportFormat::Json => ("report.json", to_json(report)?),
        ReportFormat::Md => ("report.md", to_markdown(report)),
    };
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    let mut written = vec![path];
    written.extend(write_plot_data(report, dir)?);
    Ok(written)
}

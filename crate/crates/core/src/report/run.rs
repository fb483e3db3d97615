use super::plan::{AnalysisKind, AnalysisPlan};
use crate::agreement::{
    bland_altman_points, bland_altman_with_multiplier, deming, precision_observations, variance_components,
    AgreementResult, DemingFit, PrecisionComponents,
};
use crate::binary_accuracy::{
    accuracy_metrics, confusion_from_records, likelihood_ratios, power_and_n, test_vs_goal, AccuracyMetrics,
    Confusion2x2, Direction, GoalTest, LikelihoodRatios, PowerResult,
};
use crate::dataset::{
    descriptive_summary, dichotomize, ingest_csv, validate_records, DatasetSummary, DeviceOutput, IntegrityReport,
    Label, RowError, ValidationRecord,
};
use crate::qc_triage::{triage_report, triage_table, TriageReport};
use crate::resample::{bootstrap_ci, BootstrapInterval, SeededGenerator};
use crate::risk_score::{
    auc_ci, calibration_plot, decision_curve, default_dca_grid, fit_recalibration, predictiveness_curve,
    prevalence_scale, risk_strata_analysis, roc_curve, CalibrationResult, DecisionCurve, RiskStrata, RocCurve,
};
use crate::survival::{
    added_value_lrt, cox_fit, km_calibration_check, km_estimate_at_level, km_risk_at, logrank,
    predicted_risk_histograms, survival_data, CoxFit, KmCalibration, KmCurve, KmRisk, LogrankResult, LrtResult,
    RiskHistograms, SurvivalGroup,
};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

pub const TOOL_NAME: &str = "daval";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Substream ids for the analyses that draw random numbers.
const STREAM_RISKSCORE_BOOTSTRAP: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFingerprint {
    pub path: String,
    /// Data rows in the file (header excluded).
    pub rows: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalTests {
    pub sensitivity: Option<GoalTest>,
    pub specificity: Option<GoalTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub table: Confusion2x2,
    pub prevalence: f64,
    pub metrics: AccuracyMetrics,
    pub likelihood_ratios: LikelihoodRatios,
    pub threshold: Option<f64>,
    pub excluded_ungradable: usize,
    pub goal_tests: Option<GoalTests>,
    pub power: Option<PowerResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceAdjustment {
    pub train_prevalence: f64,
    pub target_prevalence: f64,
    pub mean_score: f64,
    pub mean_adjusted_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskScoreReport {
    pub n: usize,
    pub prevalence: f64,
    pub roc: RocCurve,
    pub auc_ci: (f64, f64),
    pub auc_bootstrap: Option<BootstrapInterval>,
    pub calibration: CalibrationResult,
    pub decision_curve: DecisionCurve,
    pub strata: Option<RiskStrata>,
    pub prevalence_adjustment: Option<PrevalenceAdjustment>,
    /// `(population quantile, predicted risk)` pairs.
    pub predictiveness: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub x: String,
    pub y: String,
    pub bland_altman: AgreementResult,
    pub deming: DemingFit,
    /// `(mean, difference)` per pair.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSurvival {
    pub group: String,
    pub n: usize,
    pub curve: KmCurve,
    pub risk_at_horizon: Option<KmRisk>,
    pub calibration: Option<KmCalibration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxComparison {
    pub baseline: CoxFit,
    pub full: CoxFit,
    pub lrt: LrtResult,
    pub histograms: RiskHistograms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalReport {
    pub n: usize,
    pub n_events: usize,
    pub horizon: Option<f64>,
    pub overall: GroupSurvival,
    pub groups: Vec<GroupSurvival>,
    pub logrank: Option<LogrankResult>,
    pub cox: Option<CoxComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisResult {
    Accuracy(AccuracyReport),
    Qc(TriageReport),
    Riskscore(Box<RiskScoreReport>),
    Agreement(AgreementReport),
    Precision(PrecisionComponents),
    Survival(Box<SurvivalReport>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisBlock {
    pub analysis: AnalysisKind,
    pub n_records: usize,
    pub result: Option<AnalysisResult>,
    pub error: Option<String>,
    pub warnings: Vec<String>,
}

impl AnalysisBlock {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub tool: String,
    pub tool_version: String,
    pub plan_hash: String,
    pub plan: AnalysisPlan,
    pub dataset: DatasetFingerprint,
    pub level: f64,
    pub seed: u64,
    pub integrity: IntegrityReport,
    pub summary: DatasetSummary,
    pub quarantined_rows: Vec<RowError>,
    pub warnings: Vec<String>,
    pub results: Vec<AnalysisBlock>,
}

impl ValidationReport {
    pub fn has_failures(&self) -> bool {
        self.results.iter().any(AnalysisBlock::failed)
    }

    pub fn block(&self, kind: AnalysisKind) -> Option<&AnalysisBlock> {
        self.results.iter().find(|b| b.analysis == kind)
    }
}

fn dataset_fingerprint(plan: &AnalysisPlan) -> Result<(DatasetFingerprint, Vec<u8>)> {
    let path = plan.dataset_path();
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(bytes.as_slice());
    let rows = reader.records().count();
    Ok((
        DatasetFingerprint {
            path: plan.dataset.display().to_string(),
            rows,
            sha256: hex::encode(Sha256::digest(&bytes)),
        },
        bytes,
    ))
}

/// Validate the plan, ingest the dataset and run the enabled analyses in
/// fixed order. Plan or data problems are errors; a failing analysis is
/// recorded in its block and the others still run.
pub fn run_plan(plan: &AnalysisPlan) -> Result<ValidationReport> {
    let plan_hash = plan.hash();
    plan.validate()?;
    let (dataset, _) = dataset_fingerprint(plan)?;
    let ingested = ingest_csv(plan.dataset_path(), &plan.mapping)?;
    if plan.strict && !ingested.errors.is_empty() {
        let e = &ingested.errors[0];
        return Err(Error::Row { row: e.row, message: e.message.clone() });
    }
    let records = ingested.records;
    let integrity = validate_records(&records);
    let summary = descriptive_summary(&records, &plan.strata)?;

    let mut warnings = integrity.warnings.clone();
    if !ingested.errors.is_empty() {
        warnings.push(format!("{} row(s) quarantined during ingestion", ingested.errors.len()));
    }
    if plan.analyses.is_empty() {
        warnings.push("no analyses enabled".into());
    }

    let mut kinds = plan.analyses.clone();
    kinds.sort();
    let results = kinds.into_iter().map(|kind| run_analysis(kind, plan, &records)).collect();

    Ok(ValidationReport {
        tool: TOOL_NAME.into(),
        tool_version: TOOL_VERSION.into(),
        plan_hash,
        plan: plan.clone(),
        dataset,
        level: plan.level,
        seed: plan.seed,
        integrity,
        summary,
        quarantined_rows: ingested.errors,
        warnings,
        results,
    })
}

/// Run one analysis on in-memory records.
pub fn run_analysis(kind: AnalysisKind, plan: &AnalysisPlan, records: &[ValidationRecord]) -> AnalysisBlock {
    let mut warnings = Vec::new();
    let (n_records, outcome) = match kind {
        AnalysisKind::Accuracy => with_count(accuracy_cohort(records), |r| run_accuracy(plan, r, &mut warnings)),
        AnalysisKind::Qc => with_count(accuracy_cohort(records), |r| run_qc(plan, r)),
        AnalysisKind::Riskscore => with_count(accuracy_cohort(records), |r| run_riskscore(plan, r, &mut warnings)),
        AnalysisKind::Agreement => with_count(records.to_vec(), |r| run_agreement(plan, r, &mut warnings)),
        AnalysisKind::Precision => with_count(records.iter().filter(|r| r.is_precision()).cloned().collect(), |r| {
            Ok(AnalysisResult::Precision(variance_components(&precision_observations(
                r,
                plan.precision.condition_by,
            )?)?))
        }),
        AnalysisKind::Survival => {
            with_count(records.iter().filter(|r| !r.is_precision() && r.survival.is_some()).cloned().collect(), |r| {
                run_survival(plan, r, &mut warnings)
            })
        }
    };
    let (result, error) = match outcome {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    AnalysisBlock { analysis: kind, n_records, result, error, warnings }
}

fn with_count(
    records: Vec<ValidationRecord>,
    f: impl FnOnce(&[ValidationRecord]) -> Result<AnalysisResult>,
) -> (usize, Result<AnalysisResult>) {
    (records.len(), f(&records))
}

/// Diagnostic-accuracy cohort: non-replicate records with a truth label.
fn accuracy_cohort(records: &[ValidationRecord]) -> Vec<ValidationRecord> {
    records.iter().filter(|r| !r.is_precision() && r.truth.is_some()).cloned().collect()
}

fn binary_calls(records: &[ValidationRecord], threshold: Option<f64>) -> Result<Vec<ValidationRecord>> {
    match threshold {
        Some(t) => Ok(dichotomize(records, t)),
        None => {
            if let Some(r) = records.iter().find(|r| matches!(r.output, DeviceOutput::Score(_))) {
                return Err(Error::invalid(format!(
                    "record `{}` has a score output and no threshold is set",
                    r.subject_id
                )));
            }
            Ok(records.to_vec())
        }
    }
}

fn run_accuracy(
    plan: &AnalysisPlan,
    records: &[ValidationRecord],
    warnings: &mut Vec<String>,
) -> Result<AnalysisResult> {
    let p = &plan.accuracy;
    let calls = binary_calls(records, p.threshold)?;
    let (gradable, ungradable): (Vec<_>, Vec<_>) =
        calls.into_iter().partition(|r| r.output != DeviceOutput::Ungradable);
    if !ungradable.is_empty() {
        warnings.push(format!("{} ungradable record(s) excluded from accuracy; see the qc analysis", ungradable.len()));
    }
    let table = confusion_from_records(&gradable)?;
    if table.total() == 0 {
        return Err(Error::invalid("no gradable records with truth"));
    }
    let goal_tests = match p.goal {
        Some(goal) => {
            let test = |x, n| {
                if n > 0 {
                    test_vs_goal(x, n, goal, p.alpha, Direction::GreaterThan).map(Some)
                } else {
                    Ok(None)
                }
            };
            Some(GoalTests {
                sensitivity: test(table.tp, table.diseased())?,
                specificity: test(table.tn, table.healthy())?,
            })
        }
        None => None,
    };
    let power = match (p.goal, p.power) {
        (Some(goal), Some(pw)) => Some(power_and_n(goal, pw.assumed_true, p.alpha, pw.target_power)?),
        _ => None,
    };
    Ok(AnalysisResult::Accuracy(AccuracyReport {
        prevalence: table.diseased() as f64 / table.total() as f64,
        metrics: accuracy_metrics(&table, plan.level, p.ci_method)?,
        likelihood_ratios: likelihood_ratios(&table, plan.level)?,
        table,
        threshold: p.threshold,
        excluded_ungradable: ungradable.len(),
        goal_tests,
        power,
    }))
}

fn run_qc(plan: &AnalysisPlan, records: &[ValidationRecord]) -> Result<AnalysisResult> {
    let calls = binary_calls(records, plan.qc.threshold)?;
    let table = triage_table(&calls)?;
    Ok(AnalysisResult::Qc(triage_report(&table, plan.level, plan.qc.ci_method)?))
}

fn scores_and_outcomes(records: &[ValidationRecord]) -> Result<(Vec<f64>, Vec<bool>, usize)> {
    let mut scores = Vec::new();
    let mut outcomes = Vec::new();
    let mut skipped = 0;
    for r in records {
        match (r.output.score(), r.truth) {
            (Some(s), Some(t)) => {
                scores.push(s);
                outcomes.push(t == Label::Positive);
            }
            _ => skipped += 1,
        }
    }
    if scores.is_empty() {
        return Err(Error::invalid("no records with both a score output and truth"));
    }
    Ok((scores, outcomes, skipped))
}

fn run_riskscore(
    plan: &AnalysisPlan,
    records: &[ValidationRecord],
    warnings: &mut Vec<String>,
) -> Result<AnalysisResult> {
    let p = &plan.riskscore;
    let (scores, outcomes, skipped) = scores_and_outcomes(records)?;
    if skipped > 0 {
        warnings.push(format!("{skipped} record(s) without a score output excluded from the risk-score analysis"));
    }
    let n = scores.len();
    let roc = roc_curve(&scores, &outcomes)?;
    let ci = auc_ci(&roc, plan.level)?;
    let auc_bootstrap = if p.bootstrap_replicates > 0 {
        let pairs: Vec<(f64, bool)> = scores.iter().copied().zip(outcomes.iter().copied()).collect();
        let statistic = |sample: &[(f64, bool)]| {
            let (s, y): (Vec<f64>, Vec<bool>) = sample.iter().copied().unzip();
            Ok(roc_curve(&s, &y)?.auc)
        };
        let gen = SeededGenerator::with_stream(plan.seed, STREAM_RISKSCORE_BOOTSTRAP);
        Some(bootstrap_ci(statistic, &pairs, p.bootstrap_replicates, plan.level, &gen)?)
    } else {
        None
    };
    let mut calibration = fit_recalibration(&scores, &outcomes, p.calibration)?;
    calibration.bins = calibration_plot(&scores, &outcomes, p.bins.min(n))?;
    if calibration.clipped > 0 {
        warnings.push(format!("{} score(s) of exactly 0 or 1 clipped before the logit", calibration.clipped));
    }
    let grid = p.thresholds.clone().unwrap_or_else(default_dca_grid);
    let prevalence = outcomes.iter().filter(|&&y| y).count() as f64 / n as f64;
    let prevalence_adjustment = match (p.train_prevalence, p.target_prevalence) {
        (Some(train), Some(target)) => {
            let adjusted = scores.iter().map(|&s| prevalence_scale(s, train, target)).collect::<Result<Vec<f64>>>()?;
            Some(PrevalenceAdjustment {
                train_prevalence: train,
                target_prevalence: target,
                mean_score: scores.iter().sum::<f64>() / n as f64,
                mean_adjusted_score: adjusted.iter().sum::<f64>() / n as f64,
            })
        }
        _ => None,
    };
    Ok(AnalysisResult::Riskscore(Box::new(RiskScoreReport {
        n,
        prevalence,
        auc_ci: ci,
        auc_bootstrap,
        roc,
        calibration,
        decision_curve: decision_curve(&scores, &outcomes, &grid)?,
        strata: if p.cutoffs.is_empty() {
            None
        } else {
            Some(risk_strata_analysis(&scores, &outcomes, &p.cutoffs, plan.level, p.ci_method)?)
        },
        prevalence_adjustment,
        predictiveness: predictiveness_curve(&scores)?,
    })))
}

fn run_agreement(
    plan: &AnalysisPlan,
    records: &[ValidationRecord],
    warnings: &mut Vec<String>,
) -> Result<AnalysisResult> {
    let p = &plan.agreement;
    let (x, y): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter_map(|r| Some((r.numeric(&p.x)?, r.numeric(&p.y)?)))
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .unzip();
    let lambda = p.lambda.unwrap_or_else(|| {
        warnings.push("Deming error-variance ratio not given; using lambda = 1".into());
        1.0
    });
    Ok(AnalysisResult::Agreement(AgreementReport {
        x: p.x.clone(),
        y: p.y.clone(),
        bland_altman: bland_altman_with_multiplier(&x, &y, plan.level, p.multiplier)?,
        deming: deming(&x, &y, lambda)?,
        points: bland_altman_points(&x, &y)?,
    }))
}

fn group_survival(
    group: String,
    members: &[&ValidationRecord],
    horizon: Option<f64>,
    level: f64,
    warnings: &mut Vec<String>,
) -> Result<GroupSurvival> {
    let times: Vec<f64> = members.iter().map(|r| r.survival.map_or(0.0, |s| s.time)).collect();
    let events: Vec<bool> = members.iter().map(|r| r.survival.is_some_and(|s| s.event)).collect();
    let curve = km_estimate_at_level(&times, &events, level)?;
    let (risk_at_horizon, calibration) = match horizon {
        Some(h) => {
            let risk = km_risk_at(&curve, h, level)?;
            if risk.extrapolated {
                warnings.push(format!("horizon {h} lies beyond follow-up in group `{group}`"));
            }
            let predicted: Vec<f64> = members.iter().filter_map(|r| r.output.score()).collect();
            let calibration = if predicted.len() == members.len() {
                Some(km_calibration_check(&predicted, &curve, h)?)
            } else {
                None
            };
            (Some(risk), calibration)
        }
        None => (None, None),
    };
    Ok(GroupSurvival { group, n: members.len(), curve, risk_at_horizon, calibration })
}

/// Covariate matrix over the subjects that have every named covariate,
/// with their times and events. `score` is read from the device output.
fn complete_cases(
    records: &[ValidationRecord],
    names: &[String],
    times: &[f64],
    events: &[bool],
) -> (Vec<Vec<f64>>, Vec<f64>, Vec<bool>) {
    let mut rows = Vec::new();
    let (mut t, mut e) = (Vec::new(), Vec::new());
    for (i, r) in records.iter().enumerate() {
        if let Some(row) = names.iter().map(|n| r.numeric(n)).collect::<Option<Vec<f64>>>() {
            rows.push(row);
            t.push(times[i]);
            e.push(events[i]);
        }
    }
    (rows, t, e)
}

fn run_survival(
    plan: &AnalysisPlan,
    records: &[ValidationRecord],
    warnings: &mut Vec<String>,
) -> Result<AnalysisResult> {
    let p = &plan.survival;
    let (times, events) = survival_data(records)?;
    let all: Vec<&ValidationRecord> = records.iter().collect();
    let overall = group_survival("all".into(), &all, p.horizon, plan.level, warnings)?;

    let mut grouped: BTreeMap<String, Vec<&ValidationRecord>> = BTreeMap::new();
    if !p.cutoffs.is_empty() {
        let mut unscored = 0;
        for r in records {
            let Some(s) = r.output.score() else {
                unscored += 1;
                grouped.entry("ungradable".into()).or_default().push(r);
                continue;
            };
            let k = p.cutoffs.partition_point(|&c| c <= s);
            let lo = if k == 0 { 0.0 } else { p.cutoffs[k - 1] };
            let hi = p.cutoffs.get(k).copied().unwrap_or(1.0);
            grouped.entry(format!("{k}: [{lo}, {hi})")).or_default().push(r);
        }
        if unscored > 0 {
            warnings.push(format!("{unscored} subject(s) without a score form the `ungradable` survival group"));
        }
    } else if let Some(field) = &p.groups_by {
        for r in records {
            let v = r.field_value(field).unwrap_or_else(|| "NA".into());
            grouped.entry(v).or_default().push(r);
        }
    }
    let mut groups = Vec::new();
    let mut samples = Vec::new();
    for (label, members) in grouped {
        samples.push(SurvivalGroup::new(
            label.clone(),
            members.iter().map(|r| r.survival.map_or(0.0, |s| s.time)).collect(),
            members.iter().map(|r| r.survival.is_some_and(|s| s.event)).collect(),
        ));
        groups.push(group_survival(label, &members, p.horizon, plan.level, warnings)?);
    }
    let logrank = if samples.len() >= 2 { Some(logrank(&samples)?) } else { None };

    let cox = if p.added_covariates.is_empty() {
        None
    } else {
        let horizon = p.horizon.ok_or_else(|| Error::invalid("a horizon is needed for predicted risks"))?;
        let base_names = p.baseline_covariates.clone();
        let full_names: Vec<String> = base_names.iter().chain(&p.added_covariates).cloned().collect();
        let (full_rows, cox_times, cox_events) = complete_cases(records, &full_names, &times, &events);
        let dropped = records.len() - full_rows.len();
        if dropped > 0 {
            warnings
                .push(format!("{dropped} subject(s) without every Cox covariate excluded from the model comparison"));
        }
        let base_rows: Vec<Vec<f64>> = full_rows.iter().map(|x| x[..base_names.len()].to_vec()).collect();
        let baseline = cox_fit(&base_names, &base_rows, &cox_times, &cox_events)?;
        let full = cox_fit(&full_names, &full_rows, &cox_times, &cox_events)?;
        if full.ties_warning {
            warnings.push(format!(
                "{:.0}% of events are tied; Breslow ties may bias coefficients",
                100.0 * full.tied_event_fraction
            ));
        }
        let lrt = added_value_lrt(&baseline, &full, p.added_covariates.len())?;
        let base_risk = base_rows.iter().map(|x| baseline.predicted_risk(x, horizon)).collect::<Result<Vec<_>>>()?;
        let full_risk = full_rows.iter().map(|x| full.predicted_risk(x, horizon)).collect::<Result<Vec<_>>>()?;
        let histograms = predicted_risk_histograms(&base_risk, &full_risk, p.histogram_bins)?;
        Some(CoxComparison { baseline, full, lrt, histograms })
    };

    Ok(AnalysisResult::Survival(Box::new(SurvivalReport {
        n: times.len(),
        n_events: events.iter().filter(|&&e| e).count(),
        horizon: p.horizon,
        overall,
        groups,
        logrank,
        cox,
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    const SIX: &str = "subject_id,site_id,truth,output\n\
        s1,a,pos,pos\ns2,a,pos,pos\ns3,a,pos,neg\ns4,b,neg,neg\ns5,b,neg,neg\ns6,b,neg,pos\n";

    fn dataset(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn accuracy_only_plan() {
        let data = dataset(SIX);
        let plan = AnalysisPlan::new(data.path(), vec![AnalysisKind::Accuracy]);
        let report = run_plan(&plan).unwrap();
        assert_eq!(report.results.len(), 1);
        assert!(!report.has_failures());
        let Some(AnalysisResult::Accuracy(a)) = &report.block(AnalysisKind::Accuracy).unwrap().result else {
            panic!("accuracy block missing");
        };
        assert_eq!((a.table.tp, a.table.fn_, a.table.fp, a.table.tn), (2, 1, 1, 2));
        assert_eq!(report.dataset.rows, 6);
        assert_eq!(report.plan_hash, plan.hash());
    }

    #[test]
    fn rerun_is_identical() {
        let data = dataset(SIX);
        let plan = AnalysisPlan::new(data.path(), vec![AnalysisKind::Qc, AnalysisKind::Accuracy]);
        let a = serde_json::to_string(&run_plan(&plan).unwrap()).unwrap();
        let b = serde_json::to_string(&run_plan(&plan).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fixed_order() {
        let data = dataset(SIX);
        let plan = AnalysisPlan::new(data.path(), vec![AnalysisKind::Qc, AnalysisKind::Accuracy]);
        let kinds: Vec<_> = run_plan(&plan).unwrap().results.iter().map(|b| b.analysis).collect();
        assert_eq!(kinds, [AnalysisKind::Accuracy, AnalysisKind::Qc]);
    }

    #[test]
    fn repeated_analysis_is_a_plan_error() {
        let data = dataset(SIX);
        let plan = AnalysisPlan::new(data.path(), vec![AnalysisKind::Qc, AnalysisKind::Qc]);
        assert!(matches!(run_plan(&plan), Err(Error::Plan(_))));
    }

    #[test]
    fn missing_column_fails_before_computation() {
        let data = dataset(SIX);
        let mut plan = AnalysisPlan::new(data.path(), vec![AnalysisKind::Survival]);
        plan.survival.horizon = Some(1.0);
        assert!(matches!(run_plan(&plan), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn failing_analysis_does_not_abort_others() {
        // risk-score analysis needs scores; the binary outputs make it fail
        let data = dataset(SIX);
        let plan = AnalysisPlan::new(data.path(), vec![AnalysisKind::Accuracy, AnalysisKind::Agreement]);
        let mut plan = plan;
        plan.agreement.x = "score".into();
        plan.agreement.y = "score".into();
        match run_plan(&plan) {
            Ok(report) => {
                assert!(report.block(AnalysisKind::Accuracy).unwrap().result.is_some());
                assert!(report.has_failures());
            }
            Err(e) => assert!(matches!(e, Error::MissingColumn(_)), "{e}"),
        }
    }

    #[test]
    fn no_analyses_warns() {
        let data = dataset(SIX);
        let report = run_plan(&AnalysisPlan::new(data.path(), Vec::new())).unwrap();
        assert!(report.results.is_empty());
        assert!(report.warnings.iter().any(|w| w.contains("no analyses")));
    }
}

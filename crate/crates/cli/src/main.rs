//! `daval`: run validation analyses on a device-output dataset.

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use daval_core::agreement::ConditionKey;
use daval_core::binary_accuracy::CiMethod;
use daval_core::dataset::{self, ColumnMapping, DeviceOutput, Label, ValidationRecord};
use daval_core::qc_triage::{triage_report, TriageConfusion};
use daval_core::report::{
    emit_report, run_plan, to_json, to_markdown, AnalysisKind, AnalysisPlan, PowerParams, ReportFormat,
};
use daval_core::resample::{
    simulate_binary_study, simulate_calibrated_scores, simulate_risk_scores, simulate_survival, BinaryStudyParams,
    CovariateKind, SeededGenerator, SurvivalSimParams,
};
use daval_core::risk_score::RecalibrationMode;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_VALIDATION: u8 = 1;
const EXIT_ANALYSIS: u8 = 2;

#[derive(Parser)]
#[command(name = "daval", version, about = "Statistical validation battery for diagnostic device outputs")]
struct Cli {
    /// Output directory; the report is printed to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Seed for every random draw; overrides the plan seed.
    #[arg(long, global = true, env = "DAVAL_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Md,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Md => ReportFormat::Md,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CiArg {
    Cp,
    Wilson,
}

impl From<CiArg> for CiMethod {
    fn from(c: CiArg) -> Self {
        match c {
            CiArg::Cp => CiMethod::ClopperPearson,
            CiArg::Wilson => CiMethod::Wilson,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CalibrationArg {
    Large,
    Slope,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConditionArg {
    Operator,
    DeviceUnit,
    Site,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimKind {
    Binary,
    Riskscore,
    Survival,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset CSV in the canonical schema.
    #[arg(long)]
    data: PathBuf,
    /// JSON object mapping canonical field names to header names.
    #[arg(long)]
    mapping: Option<PathBuf>,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Abort on unparseable rows instead of quarantining them.
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Sensitivity, specificity, predictive values, likelihood ratios and goal tests.
    Accuracy {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = CiArg::Cp)]
        ci_method: CiArg,
        /// Score threshold for calling a positive.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        goal: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Assumed true performance for the sample-size calculation.
        #[arg(long, requires = "goal")]
        assumed_true: Option<f64>,
        #[arg(long, default_value_t = 0.8)]
        target_power: f64,
    },
    /// Positive / Negative / Ungradable triage table with the worst case.
    Qc {
        /// Cells a,b,c,d,e,f: truth-positive then truth-negative counts per device row.
        #[arg(long, value_delimiter = ',', conflicts_with = "data")]
        counts: Option<Vec<u64>>,
        #[arg(long, required_unless_present = "counts")]
        data: Option<PathBuf>,
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, value_enum, default_value_t = CiArg::Cp)]
        ci_method: CiArg,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Discrimination, calibration and clinical utility of a risk score.
    Riskscore {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = CalibrationArg::Slope)]
        calibration: CalibrationArg,
        #[arg(long, default_value_t = 10)]
        bins: usize,
        #[arg(long)]
        train_prev: Option<f64>,
        #[arg(long)]
        target_prev: Option<f64>,
        /// Ascending risk-stratum cutoffs.
        #[arg(long, value_delimiter = ',')]
        cutoffs: Vec<f64>,
        /// Decision-curve thresholds.
        #[arg(long, value_delimiter = ',')]
        dca_grid: Option<Vec<f64>>,
        /// Bootstrap replicates for an AUC percentile interval.
        #[arg(long, default_value_t = 0)]
        bootstrap: usize,
    },
    /// Bland-Altman limits of agreement and Deming regression.
    Agreement {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "score")]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Repeatability and reproducibility variance components.
    Precision {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = ConditionArg::Operator)]
        condition_by: ConditionArg,
    },
    /// Kaplan-Meier, log-rank and the Cox added-value test.
    Survival {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        groups_by: Option<String>,
        /// Score cutoffs defining risk groups.
        #[arg(long, value_delimiter = ',')]
        cutoffs: Vec<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        baseline_covariates: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        added_covariates: Vec<String>,
    },
    /// Write a synthetic dataset in the canonical CSV schema.
    Simulate {
        #[arg(value_enum)]
        kind: SimKind,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0.3)]
        prevalence: f64,
        #[arg(long, default_value_t = 0.9)]
        sensitivity: f64,
        #[arg(long, default_value_t = 0.9)]
        specificity: f64,
        #[arg(long, default_value_t = 0.0)]
        ungradable_rate: f64,
        /// Target AUC; without it scores are drawn perfectly calibrated.
        #[arg(long)]
        auc: Option<f64>,
        #[arg(long, default_value_t = 0.1)]
        baseline_hazard: f64,
        #[arg(long, default_value_t = 0.0)]
        log_hr: f64,
        #[arg(long, default_value_t = 0.05)]
        censor_rate: f64,
        #[arg(long)]
        normal_covariate: bool,
        #[arg(long, value_delimiter = ',')]
        noise_covariates: Vec<String>,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Execute a pre-specified analysis plan.
    Run {
        #[arg(long)]
        plan: PathBuf,
    },
}

enum Failure {
    Validation(anyhow::Error),
    Analysis,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Validation(e)
    }
}

impl From<daval_core::Error> for Failure {
    fn from(e: daval_core::Error) -> Self {
        Failure::Validation(e.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_VALIDATION) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Analysis) => ExitCode::from(EXIT_ANALYSIS),
    }
}

fn data_plan(args: DataArgs, kind: AnalysisKind) -> anyhow::Result<AnalysisPlan> {
    let mut plan = AnalysisPlan::new(args.data, vec![kind]);
    if let Some(path) = args.mapping {
        plan.mapping = ColumnMapping::from_file(&path)?;
    }
    plan.level = args.level;
    plan.strict = args.strict;
    Ok(plan)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let mut plan = match cli.command {
        Command::Run { plan } => AnalysisPlan::from_file(&plan)?,
        Command::Accuracy { data, ci_method, threshold, goal, alpha, assumed_true, target_power } => {
            let mut plan = data_plan(data, AnalysisKind::Accuracy)?;
            let p = &mut plan.accuracy;
            p.ci_method = ci_method.into();
            p.threshold = threshold;
            p.goal = goal;
            p.alpha = alpha;
            p.power = assumed_true.map(|assumed_true| PowerParams { assumed_true, target_power });
            plan
        }
        Command::Qc { counts: Some(cells), level, ci_method, .. } => {
            return qc_counts(&cells, level, ci_method.into(), cli.out.as_deref(), cli.format);
        }
        Command::Qc { counts: None, data, mapping, level, ci_method, threshold } => {
            let data = data.context("--data or --counts is required")?;
            let mut plan = data_plan(DataArgs { data, mapping, level, strict: false }, AnalysisKind::Qc)?;
            plan.qc.ci_method = ci_method.into();
            plan.qc.threshold = threshold;
            plan
        }
        Command::Riskscore { data, calibration, bins, train_prev, target_prev, cutoffs, dca_grid, bootstrap } => {
            let mut plan = data_plan(data, AnalysisKind::Riskscore)?;
            let p = &mut plan.riskscore;
            p.calibration = match calibration {
                CalibrationArg::Large => RecalibrationMode::InterceptOnly,
                CalibrationArg::Slope => RecalibrationMode::InterceptAndSlope,
            };
            p.bins = bins;
            p.train_prevalence = train_prev;
            p.target_prevalence = target_prev;
            p.cutoffs = cutoffs;
            p.thresholds = dca_grid;
            p.bootstrap_replicates = bootstrap;
            plan
        }
        Command::Agreement { data, x, y, lambda } => {
            let mut plan = data_plan(data, AnalysisKind::Agreement)?;
            plan.agreement.x = x;
            plan.agreement.y = y;
            plan.agreement.lambda = lambda;
            plan
        }
        Command::Precision { data, condition_by } => {
            let mut plan = data_plan(data, AnalysisKind::Precision)?;
            plan.precision.condition_by = match condition_by {
                ConditionArg::Operator => ConditionKey::Operator,
                ConditionArg::DeviceUnit => ConditionKey::DeviceUnit,
                ConditionArg::Site => ConditionKey::Site,
            };
            plan
        }
        Command::Survival { data, groups_by, cutoffs, horizon, baseline_covariates, added_covariates } => {
            let mut plan = data_plan(data, AnalysisKind::Survival)?;
            let p = &mut plan.survival;
            p.groups_by = groups_by;
            p.cutoffs = cutoffs;
            p.horizon = horizon;
            p.baseline_covariates = baseline_covariates;
            p.added_covariates = added_covariates;
            plan
        }
        Command::Simulate {
            kind,
            n,
            prevalence,
            sensitivity,
            specificity,
            ungradable_rate,
            auc,
            baseline_hazard,
            log_hr,
            censor_rate,
            normal_covariate,
            noise_covariates,
            output,
        } => {
            let gen = SeededGenerator::new(cli.seed.unwrap_or(0));
            let records = match kind {
                SimKind::Binary => {
                    let mut params = BinaryStudyParams::new(n, prevalence, sensitivity, specificity);
                    params.ungradable_rate = ungradable_rate;
                    simulate_binary_study(&params, &gen)?
                }
                SimKind::Riskscore => {
                    let (scores, outcomes) = match auc {
                        Some(auc) => simulate_risk_scores(n, prevalence, auc, &gen)?,
                        None => simulate_calibrated_scores(n, &gen)?,
                    };
                    score_records(&scores, &outcomes)
                }
                SimKind::Survival => {
                    let mut params = SurvivalSimParams::new(n, baseline_hazard, log_hr, censor_rate);
                    if normal_covariate {
                        params.covariate = CovariateKind::StandardNormal;
                    }
                    params.noise_covariates = noise_covariates;
                    simulate_survival(&params, &gen)?
                }
            };
            return write_dataset(&records, output.as_deref());
        }
    };
    if let Some(seed) = cli.seed {
        plan.seed = seed;
    }
    let report = run_plan(&plan)?;
    match &cli.out {
        Some(dir) => {
            for path in emit_report(&report, dir, cli.format.into())? {
                eprintln!("wrote {}", path.display());
            }
        }
        None => {
            let text = match cli.format {
                Format::Json => to_json(&report)?,
                Format::Md => to_markdown(&report),
            };
            print!("{text}");
        }
    }
    if report.has_failures() {
        for block in report.results.iter().filter(|b| b.failed()) {
            eprintln!("{} failed: {}", block.analysis, block.error.as_deref().unwrap_or_default());
        }
        return Err(Failure::Analysis);
    }
    Ok(())
}

fn score_records(scores: &[f64], outcomes: &[bool]) -> Vec<ValidationRecord> {
    scores
        .iter()
        .zip(outcomes)
        .enumerate()
        .map(|(i, (&s, &y))| {
            let truth = if y { Label::Positive } else { Label::Negative };
            let mut r = ValidationRecord::new(format!("sim-{:05}", i + 1), Some(truth), DeviceOutput::Score(s));
            r.site_id = "sim".into();
            r
        })
        .collect()
}

fn write_dataset(records: &[ValidationRecord], output: Option<&Path>) -> Result<(), Failure> {
    match output {
        Some(path) => {
            let file = std::fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            dataset::write_csv(records, file)?;
        }
        None => dataset::write_csv(records, std::io::stdout().lock())?,
    }
    Ok(())
}

fn qc_counts(cells: &[u64], level: f64, method: CiMethod, out: Option<&Path>, format: Format) -> Result<(), Failure> {
    let table = TriageConfusion::from_slice(cells)?;
    let report = triage_report(&table, level, method)?;
    let mut json = serde_json::to_string_pretty(&report).context("serializing triage report")?;
    json.push('\n');
    let text = match format {
        Format::Json => json,
        Format::Md => format!("{}\n```json\n{json}```\n", report.to_markdown()),
    };
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            let name = match format {
                Format::Json => "qc.json",
                Format::Md => "qc.md",
            };
            let path = dir.join(name);
            std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).context("writing to stdout")?;
        }
    }
    Ok(())
}

use crate::agreement::ConditionKey;
use crate::binary_accuracy::CiMethod;
use crate::dataset::{read_header, ColumnMapping, ResolvedColumns};
use crate::risk_score::RecalibrationMode;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

/// Analyses in the order they always run and appear in the report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisKind {
    Accuracy,
    Qc,
    Riskscore,
    Agreement,
    Precision,
    Survival,
}

impl AnalysisKind {
    pub const ALL: [AnalysisKind; 6] = [
        AnalysisKind::Accuracy,
        AnalysisKind::Qc,
        AnalysisKind::Riskscore,
        AnalysisKind::Agreement,
        AnalysisKind::Precision,
        AnalysisKind::Survival,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnalysisKind::Accuracy => "accuracy",
            AnalysisKind::Qc => "qc",
            AnalysisKind::Riskscore => "riskscore",
            AnalysisKind::Agreement => "agreement",
            AnalysisKind::Precision => "precision",
            AnalysisKind::Survival => "survival",
        }
    }
}

impl fmt::Display for AnalysisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_level() -> f64 {
    0.95
}

fn default_alpha() -> f64 {
    0.05
}

fn default_bins() -> usize {
    10
}

fn default_multiplier() -> f64 {
    crate::agreement::LOA_MULTIPLIER
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerParams {
    pub assumed_true: f64,
    pub target_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccuracyParams {
    pub ci_method: CiMethod,
    /// Call `score >= threshold` positive when outputs are scores.
    pub threshold: Option<f64>,
    /// Performance goal for the one-sided exact tests of sensitivity and specificity.
    pub goal: Option<f64>,
    pub alpha: f64,
    pub power: Option<PowerParams>,
}

impl Default for AccuracyParams {
    fn default() -> Self {
        Self { ci_method: CiMethod::ClopperPearson, threshold: None, goal: None, alpha: default_alpha(), power: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QcParams {
    pub ci_method: CiMethod,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskScoreParams {
    pub ci_method: CiMethod,
    pub calibration: RecalibrationMode,
    pub bins: usize,
    /// Ascending risk-stratum cutoffs in (0, 1).
    pub cutoffs: Vec<f64>,
    /// Decision-curve thresholds; `None` uses 0.01..0.99.
    pub thresholds: Option<Vec<f64>>,
    pub train_prevalence: Option<f64>,
    pub target_prevalence: Option<f64>,
    /// Bootstrap replicates for an AUC percentile interval; 0 disables it.
    pub bootstrap_replicates: usize,
}

impl Default for RiskScoreParams {
    fn default() -> Self {
        Self {
            ci_method: CiMethod::ClopperPearson,
            calibration: RecalibrationMode::InterceptAndSlope,
            bins: default_bins(),
            cutoffs: Vec::new(),
            thresholds: None,
            train_prevalence: None,
            target_prevalence: None,
            bootstrap_replicates: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgreementParams {
    /// Column holding the first method (`score` or a covariate column).
    pub x: String,
    pub y: String,
    /// Error-variance ratio for Deming regression; `None` means 1 with a warning.
    pub lambda: Option<f64>,
    pub multiplier: f64,
}

impl Default for AgreementParams {
    fn default() -> Self {
        Self { x: String::new(), y: String::new(), lambda: None, multiplier: default_multiplier() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrecisionParams {
    pub condition_by: ConditionKey,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurvivalParams {
    /// Field defining risk groups. With `cutoffs`, groups are score strata.
    pub groups_by: Option<String>,
    pub cutoffs: Vec<f64>,
    pub horizon: Option<f64>,
    pub baseline_covariates: Vec<String>,
    pub added_covariates: Vec<String>,
    pub histogram_bins: usize,
}

impl Default for SurvivalParams {
    fn default() -> Self {
        Self {
            groups_by: None,
            cutoffs: Vec::new(),
            horizon: None,
            baseline_covariates: Vec::new(),
            added_covariates: Vec::new(),
            histogram_bins: default_bins(),
        }
    }
}

/// Pre-specified analysis plan. Read from JSON; every parameter is
/// checked against the dataset header before any computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisPlan {
    /// CSV path, relative to the plan file's directory when not absolute.
    pub dataset: PathBuf,
    #[serde(default)]
    pub mapping: ColumnMapping,
    #[serde(default)]
    pub analyses: Vec<AnalysisKind>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub seed: u64,
    /// Abort on any unparseable row instead of quarantining it.
    #[serde(default)]
    pub strict: bool,
    /// Fields for the descriptive summary strata.
    #[serde(default)]
    pub strata: Vec<String>,
    #[serde(default)]
    pub accuracy: AccuracyParams,
    #[serde(default)]
    pub qc: QcParams,
    #[serde(default)]
    pub riskscore: RiskScoreParams,
    #[serde(default)]
    pub agreement: AgreementParams,
    #[serde(default)]
    pub precision: PrecisionParams,
    #[serde(default)]
    pub survival: SurvivalParams,
    #[serde(skip)]
    base_dir: Option<PathBuf>,
}

fn plan_err(msg: impl Into<String>) -> Error {
    Error::Plan(msg.into())
}

fn check_unit_open(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(plan_err(format!("{name} = {v} must lie in (0, 1)")))
    }
}

fn check_cutoffs(name: &str, cutoffs: &[f64]) -> Result<()> {
    for &c in cutoffs {
        check_unit_open(name, c)?;
    }
    if cutoffs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(plan_err(format!("{name} must be strictly ascending")));
    }
    Ok(())
}

const KEY_FIELDS: [&str; 4] = ["site_id", "operator_id", "device_unit_id", "truth"];

impl AnalysisPlan {
    pub fn new(dataset: impl Into<PathBuf>, analyses: Vec<AnalysisKind>) -> Self {
        Self {
            dataset: dataset.into(),
            mapping: ColumnMapping::default(),
            analyses,
            level: default_level(),
            seed: 0,
            strict: false,
            strata: Vec::new(),
            accuracy: AccuracyParams::default(),
            qc: QcParams::default(),
            riskscore: RiskScoreParams::default(),
            agreement: AgreementParams::default(),
            precision: PrecisionParams::default(),
            survival: SurvivalParams::default(),
            base_dir: None,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| plan_err(format!("cannot parse plan: {e}")))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut plan = Self::from_json_str(&text)?;
        plan.base_dir = path.parent().map(Path::to_path_buf);
        Ok(plan)
    }

    /// Dataset location after resolving a relative path against the plan file.
    pub fn dataset_path(&self) -> PathBuf {
        match &self.base_dir {
            Some(dir) if self.dataset.is_relative() => dir.join(&self.dataset),
            _ => self.dataset.clone(),
        }
    }

    /// SHA-256 of the canonical JSON form (sorted keys, no whitespace).
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("plan serializes");
        let canonical = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Parameter checks that need no data.
    pub fn validate_parameters(&self) -> Result<()> {
        check_unit_open("level", self.level)?;
        let unique: BTreeSet<_> = self.analyses.iter().collect();
        if unique.len() != self.analyses.len() {
            return Err(plan_err("an analysis is listed more than once"));
        }
        let enabled = |k| self.analyses.contains(&k);
        if enabled(AnalysisKind::Accuracy) {
            let p = &self.accuracy;
            if let Some(t) = p.threshold {
                check_unit_open("accuracy.threshold", t)?;
            }
            if let Some(g) = p.goal {
                check_unit_open("accuracy.goal", g)?;
            }
            check_unit_open("accuracy.alpha", p.alpha)?;
            if let Some(pw) = p.power {
                let goal = p.goal.ok_or_else(|| plan_err("accuracy.power needs accuracy.goal"))?;
                check_unit_open("accuracy.power.target_power", pw.target_power)?;
                if !(pw.assumed_true > goal && pw.assumed_true <= 1.0) {
                    return Err(plan_err("accuracy.power.assumed_true must exceed the goal"));
                }
            }
        }
        if enabled(AnalysisKind::Qc) {
            if let Some(t) = self.qc.threshold {
                check_unit_open("qc.threshold", t)?;
            }
        }
        if enabled(AnalysisKind::Riskscore) {
            let p = &self.riskscore;
            if p.bins < 2 {
                return Err(plan_err("riskscore.bins must be at least 2"));
            }
            check_cutoffs("riskscore.cutoffs", &p.cutoffs)?;
            if let Some(ts) = &p.thresholds {
                if ts.is_empty() {
                    return Err(plan_err("riskscore.thresholds is empty"));
                }
                check_cutoffs("riskscore.thresholds", ts)?;
            }
            match (p.train_prevalence, p.target_prevalence) {
                (Some(a), Some(b)) => {
                    check_unit_open("riskscore.train_prevalence", a)?;
                    check_unit_open("riskscore.target_prevalence", b)?;
                }
                (None, None) => {}
                _ => return Err(plan_err("riskscore needs both train_prevalence and target_prevalence, or neither")),
            }
            if p.bootstrap_replicates != 0 && p.bootstrap_replicates < crate::resample::MIN_BOOTSTRAP_REPLICATES {
                return Err(plan_err(format!(
                    "riskscore.bootstrap_replicates must be 0 or at least {}",
                    crate::resample::MIN_BOOTSTRAP_REPLICATES
                )));
            }
        }
        if enabled(AnalysisKind::Agreement) {
            let p = &self.agreement;
            if p.x.is_empty() || p.y.is_empty() {
                return Err(plan_err("agreement needs both x and y columns"));
            }
            if let Some(l) = p.lambda {
                if !(l > 0.0 && l.is_finite()) {
                    return Err(plan_err("agreement.lambda must be positive"));
                }
            }
            if !(p.multiplier > 0.0 && p.multiplier.is_finite()) {
                return Err(plan_err("agreement.multiplier must be positive"));
            }
        }
        if enabled(AnalysisKind::Survival) {
            let p = &self.survival;
            check_cutoffs("survival.cutoffs", &p.cutoffs)?;
            if let Some(h) = p.horizon {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(plan_err("survival.horizon must be positive"));
                }
            }
            if p.histogram_bins < 1 {
                return Err(plan_err("survival.histogram_bins must be at least 1"));
            }
            let overlap: Vec<_> = p.added_covariates.iter().filter(|c| p.baseline_covariates.contains(c)).collect();
            if !overlap.is_empty() {
                return Err(plan_err(format!("covariate `{}` is both baseline and added", overlap[0])));
            }
            if !p.added_covariates.is_empty() && p.horizon.is_none() {
                return Err(plan_err("survival.added_covariates needs survival.horizon for predicted risks"));
            }
        }
        Ok(())
    }

    /// Check that every referenced column exists in the dataset header.
    pub fn validate_columns(&self, columns: &ResolvedColumns) -> Result<()> {
        let covariates: BTreeSet<&str> = columns.covariate_names().collect();
        let numeric = |f: &str| (f == "score" && columns.has("score")) || covariates.contains(f);
        let field = |f: &str| numeric(f) || (KEY_FIELDS.contains(&f) && columns.has(f)) || f == "output";
        let need = |canonical: &str, who: AnalysisKind| {
            if columns.has(canonical) {
                Ok(())
            } else {
                Err(Error::MissingColumn(format!("{} (needed by {who})", self.mapping.header_name(canonical))))
            }
        };
        for f in &self.strata {
            if !field(f) {
                return Err(Error::MissingColumn(format!("{f} (summary stratum)")));
            }
        }
        for &kind in &self.analyses {
            match kind {
                AnalysisKind::Accuracy | AnalysisKind::Qc => {
                    need("truth", kind)?;
                    let threshold =
                        if kind == AnalysisKind::Accuracy { self.accuracy.threshold } else { self.qc.threshold };
                    if !columns.has("output") && !(threshold.is_some() && columns.has("score")) {
                        need("output", kind)?;
                    }
                }
                AnalysisKind::Riskscore => {
                    need("truth", kind)?;
                    need("score", kind)?;
                }
                AnalysisKind::Agreement => {
                    for f in [&self.agreement.x, &self.agreement.y] {
                        if !numeric(f) {
                            return Err(Error::MissingColumn(format!("{f} (needed by agreement)")));
                        }
                    }
                }
                AnalysisKind::Precision => {
                    need("replicate_index", kind)?;
                    need("score", kind)?;
                    let key = match self.precision.condition_by {
                        ConditionKey::Operator => "operator_id",
                        ConditionKey::DeviceUnit => "device_unit_id",
                        ConditionKey::Site => "site_id",
                    };
                    need(key, kind)?;
                }
                AnalysisKind::Survival => {
                    need("time", kind)?;
                    need("event", kind)?;
                    let p = &self.survival;
                    if let Some(g) = &p.groups_by {
                        if !field(g) {
                            return Err(Error::MissingColumn(format!("{g} (survival groups)")));
                        }
                    }
                    if !p.cutoffs.is_empty() {
                        need("score", kind)?;
                    }
                    for c in p.baseline_covariates.iter().chain(&p.added_covariates) {
                        if c == "score" {
                            need("score", kind)?;
                        } else if !covariates.contains(c.as_str()) {
                            return Err(Error::MissingColumn(format!("{c} (survival covariate)")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Full validation against the dataset header; runs before any analysis.
    pub fn validate(&self) -> Result<ResolvedColumns> {
        self.validate_parameters()?;
        let header = read_header(self.dataset_path())?;
        let columns = self.mapping.resolve(&header)?;
        self.validate_columns(&columns)?;
        Ok(columns)
    }
}

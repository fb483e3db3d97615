//! Analysis plans, plan execution and report rendering.
//!
//! A run is fully determined by the plan, the dataset bytes, the seed and
//! the tool version: analyses execute in a fixed order and all randomness
//! comes from the plan seed.

mod plan;
mod render;
mod run;

pub use plan::{
    AccuracyParams, AgreementParams, AnalysisKind, AnalysisPlan, PowerParams, PrecisionParams, QcParams,
    RiskScoreParams, SurvivalParams,
};
pub use render::{emit_report, to_json, to_markdown, write_plot_data, ReportFormat};
pub use run::{
    run_analysis, run_plan, AccuracyReport, AgreementReport, AnalysisBlock, AnalysisResult, CoxComparison,
    DatasetFingerprint, GoalTests, GroupSurvival, PrevalenceAdjustment, RiskScoreReport, SurvivalReport,
    ValidationReport, TOOL_NAME, TOOL_VERSION,
};

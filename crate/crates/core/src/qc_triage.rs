//! Quality-control triage: the three-row confusion table that keeps
//! ungradable (QC-failed) cases in view.
//!
//! Cells follow the usual layout, with device result in rows and truth in
//! columns:
//!
//! | Device     | Truth + | Truth − |
//! |------------|---------|---------|
//! | Positive   | a       | d       |
//! | Negative   | b       | e       |
//! | Ungradable | c       | f       |
//!
//! Row post-test risk is `a/(a+d)` etc.; row likelihood ratio is
//! `(a/(a+b+c)) / (d/(d+e+f))` etc. The worst case counts every ungradable
//! case as a misclassification: sensitivity `a/(a+b+c)`, specificity
//! `e/(d+e+f)`.

use crate::binary_accuracy::{
    accuracy_metrics, proportion_ci, ratio_of_proportions, AccuracyMetrics, CiMethod, Confusion2x2, ProportionCi,
    RatioCi,
};
use crate::dataset::{DeviceOutput, Label, ValidationRecord};
use crate::float::{percent, sig};
use crate::{Error, Result};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriageConfusion {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
    pub e: u64,
    pub f: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TriageRow {
    Positive,
    Negative,
    Ungradable,
}

impl TriageRow {
    pub const ALL: [TriageRow; 3] = [TriageRow::Positive, TriageRow::Negative, TriageRow::Ungradable];

    pub fn name(self) -> &'static str {
        match self {
            TriageRow::Positive => "Positive",
            TriageRow::Negative => "Negative",
            TriageRow::Ungradable => "Ungradable",
        }
    }
}

impl TriageConfusion {
    pub fn new(a: u64, b: u64, c: u64, d: u64, e: u64, f: u64) -> Self {
        Self { a, b, c, d, e, f }
    }

    pub fn from_slice(cells: &[u64]) -> Result<Self> {
        match cells {
            &[a, b, c, d, e, f] => Ok(Self { a, b, c, d, e, f }),
            _ => Err(Error::invalid(format!("triage table needs six cells a..f, got {}", cells.len()))),
        }
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d + self.e + self.f
    }

    /// a + b + c
    pub fn truth_positive(&self) -> u64 {
        self.a + self.b + self.c
    }

    /// d + e + f
    pub fn truth_negative(&self) -> u64 {
        self.d + self.e + self.f
    }

    /// `(truth Positive, truth Negative)` counts of a row.
    pub fn row(&self, row: TriageRow) -> (u64, u64) {
        match row {
            TriageRow::Positive => (self.a, self.d),
            TriageRow::Negative => (self.b, self.e),
            TriageRow::Ungradable => (self.c, self.f),
        }
    }

    /// The gradable-only 2×2 table (tp = a, fn = b, fp = d, tn = e).
    pub fn gradable(&self) -> Confusion2x2 {
        Confusion2x2 { tp: self.a, fn_: self.b, fp: self.d, tn: self.e }
    }

    /// Exact row post-test risk; `None` for an empty row.
    pub fn posttest_exact(&self, row: TriageRow) -> Option<Ratio<u64>> {
        let (pos, neg) = self.row(row);
        (pos + neg > 0).then(|| Ratio::new(pos, pos + neg))
    }

    /// Exact row likelihood ratio; `None` when the ratio is 0/0, infinite,
    /// or a margin is empty.
    pub fn lr_exact(&self, row: TriageRow) -> Option<Ratio<u64>> {
        let (pos, neg) = self.row(row);
        let (n1, n0) = (self.truth_positive(), self.truth_negative());
        (n1 > 0 && n0 > 0 && neg > 0).then(|| Ratio::new(pos, n1) / Ratio::new(neg, n0))
    }

    pub fn pretest_exact(&self) -> Option<Ratio<u64>> {
        let n = self.total();
        (n > 0).then(|| Ratio::new(self.truth_positive(), n))
    }

    pub fn worst_sensitivity_exact(&self) -> Option<Ratio<u64>> {
        let n1 = self.truth_positive();
        (n1 > 0).then(|| Ratio::new(self.a, n1))
    }

    pub fn worst_specificity_exact(&self) -> Option<Ratio<u64>> {
        let n0 = self.truth_negative();
        (n0 > 0).then(|| Ratio::new(self.e, n0))
    }

    fn check_margins(&self) -> Result<()> {
        if self.truth_positive() == 0 || self.truth_negative() == 0 {
            Err(Error::invalid("triage table has an empty truth-positive or truth-negative column"))
        } else {
            Ok(())
        }
    }
}

pub fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Partition records into the six cells. Score outputs must be thresholded
/// first (see [`crate::dataset::dichotomize`]).
pub fn triage_table(records: &[ValidationRecord]) -> Result<TriageConfusion> {
    let mut t = TriageConfusion::default();
    for r in records {
        let truth = r.truth.ok_or_else(|| Error::invalid(format!("record `{}` has no truth label", r.subject_id)))?;
        let cell = match (r.output, truth) {
            (DeviceOutput::Binary(Label::Positive), Label::Positive) => &mut t.a,
            (DeviceOutput::Binary(Label::Negative), Label::Positive) => &mut t.b,
            (DeviceOutput::Ungradable, Label::Positive) => &mut t.c,
            (DeviceOutput::Binary(Label::Positive), Label::Negative) => &mut t.d,
            (DeviceOutput::Binary(Label::Negative), Label::Negative) => &mut t.e,
            (DeviceOutput::Ungradable, Label::Negative) => &mut t.f,
            (DeviceOutput::Score(_), _) => {
                return Err(Error::invalid(format!(
                    "record `{}` has a score output; threshold it before triage",
                    r.subject_id
                )))
            }
        };
        *cell += 1;
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMetric {
    pub row: TriageRow,
    pub truth_positive: u64,
    pub truth_negative: u64,
    /// `None` when the row is empty.
    pub posttest_risk: Option<ProportionCi>,
    pub likelihood_ratio: RatioCi,
}

pub fn row_metrics(tri: &TriageConfusion, level: f64, method: CiMethod) -> Result<Vec<RowMetric>> {
    tri.check_margins()?;
    let (n1, n0) = (tri.truth_positive(), tri.truth_negative());
    TriageRow::ALL
        .iter()
        .map(|&row| {
            let (pos, neg) = tri.row(row);
            let posttest_risk = if pos + neg > 0 { Some(proportion_ci(pos, pos + neg, level, method)?) } else { None };
            let mut likelihood_ratio = ratio_of_proportions(pos, n1, neg, n0, level)?;
            if let Some(exact) = tri.lr_exact(row) {
                likelihood_ratio.estimate = ratio_to_f64(exact);
            }
            Ok(RowMetric { row, truth_positive: pos, truth_negative: neg, posttest_risk, likelihood_ratio })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub sensitivity: ProportionCi,
    pub specificity: ProportionCi,
    pub pretest_risk: ProportionCi,
}

pub fn worst_case(tri: &TriageConfusion, level: f64, method: CiMethod) -> Result<WorstCase> {
    tri.check_margins()?;
    Ok(WorstCase {
        sensitivity: proportion_ci(tri.a, tri.truth_positive(), level, method)?,
        specificity: proportion_ci(tri.e, tri.truth_negative(), level, method)?,
        pretest_risk: proportion_ci(tri.truth_positive(), tri.total(), level, method)?,
    })
}

pub fn ungradable_proportion(tri: &TriageConfusion, level: f64, method: CiMethod) -> Result<ProportionCi> {
    if tri.total() == 0 {
        return Err(Error::invalid("empty triage table"));
    }
    proportion_ci(tri.c + tri.f, tri.total(), level, method)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageReport {
    pub table: TriageConfusion,
    pub level: f64,
    pub rows: Vec<RowMetric>,
    pub worst_case: WorstCase,
    pub ungradable: ProportionCi,
    /// Gradable-only metrics, for side-by-side comparison with the worst case.
    pub gradable_only: AccuracyMetrics,
    /// Likelihood ratio of the whole population (no test information).
    pub pretest_likelihood_ratio: f64,
}

pub fn triage_report(tri: &TriageConfusion, level: f64, method: CiMethod) -> Result<TriageReport> {
    Ok(TriageReport {
        table: *tri,
        level,
        rows: row_metrics(tri, level, method)?,
        worst_case: worst_case(tri, level, method)?,
        ungradable: ungradable_proportion(tri, level, method)?,
        gradable_only: accuracy_metrics(&tri.gradable(), level, method)?,
        pretest_likelihood_ratio: 1.0,
    })
}

fn fmt_ci(ci: &ProportionCi) -> String {
    format!("{} ({}, {})", sig(ci.estimate, 4), sig(ci.lower, 4), sig(ci.upper, 4))
}

fn fmt_ratio(r: &RatioCi) -> String {
    let flag = if r.degenerate { " †" } else { "" };
    format!("{} ({}, {}){flag}", sig(r.estimate, 4), sig(r.lower, 4), sig(r.upper, 4))
}

impl TriageReport {
    /// Markdown rendering: device result rows, then the worst-case row.
    pub fn to_markdown(&self) -> String {
        let t = &self.table;
        let pct = percent(self.level);
        let mut out = String::new();
        let _ = writeln!(out, "| Device Result | True Positive | True Negative | Post-test Risk ({pct} CI) | Likelihood Ratio ({pct} CI) |");
        let _ = writeln!(out, "|---|---|---|---|---|");
        for m in &self.rows {
            let risk = m.posttest_risk.as_ref().map(fmt_ci).unwrap_or_else(|| "undefined".into());
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} |",
                m.row.name(),
                m.truth_positive,
                m.truth_negative,
                risk,
                fmt_ratio(&m.likelihood_ratio)
            );
        }
        let w = &self.worst_case;
        let _ = writeln!(
            out,
            "| Worst Case Scenario | Sensitivity = {} | Specificity = {} | Pre-test Risk = {} | 1 |",
            fmt_ci(&w.sensitivity),
            fmt_ci(&w.specificity),
            fmt_ci(&w.pretest_risk)
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "Total cases: {}; ungradable proportion: {}", t.total(), fmt_ci(&self.ungradable));
        if self.rows.iter().any(|r| r.likelihood_ratio.degenerate) {
            let _ = writeln!(out, "\n† zero cell: estimate is 0, infinite or undefined; interval left uninformative.");
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "| Metric | Gradable only | Worst case |");
        let _ = writeln!(out, "|---|---|---|");
        let or_undef = |m: &Option<ProportionCi>| m.as_ref().map(fmt_ci).unwrap_or_else(|| "undefined".into());
        let _ = writeln!(
            out,
            "| Sensitivity | {} | {} |",
            or_undef(&self.gradable_only.sensitivity),
            fmt_ci(&w.sensitivity)
        );
        let _ = writeln!(
            out,
            "| Specificity | {} | {} |",
            or_undef(&self.gradable_only.specificity),
            fmt_ci(&w.specificity)
        );
        out
    }
}

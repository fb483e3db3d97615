//! Validation records, CSV ingestion and descriptive summaries.
//!
//! Ingestion never drops a row silently: rows that fail to parse are
//! quarantined in [`Ingested::errors`] together with their 1-based data-row
//! number (the header is not counted). Callers that want any bad row to be
//! fatal use [`Ingested::into_strict`].

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

/// Clinical reference-standard result.
pub type TruthLabel = Label;

impl Label {
    pub fn flip(self) -> Self {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }

    fn parse(raw: &str) -> Option<Self> {
        match raw.to_ascii_lowercase().as_str() {
            "pos" | "positive" => Some(Label::Positive),
            "neg" | "negative" => Some(Label::Negative),
            _ => None,
        }
    }

    fn code(self) -> &'static str {
        match self {
            Label::Positive => "pos",
            Label::Negative => "neg",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum DeviceOutput {
    Binary(Label),
    Score(f64),
    Ungradable,
}

impl DeviceOutput {
    pub fn score(&self) -> Option<f64> {
        match self {
            DeviceOutput::Score(s) => Some(*s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalOutcome {
    pub time: f64,
    /// `false` means right-censored at `time`.
    pub event: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub subject_id: String,
    pub site_id: String,
    pub truth: Option<Label>,
    pub output: DeviceOutput,
    pub survival: Option<SurvivalOutcome>,
    pub operator_id: Option<String>,
    pub device_unit_id: Option<String>,
    pub replicate_index: Option<u32>,
    pub covariates: BTreeMap<String, f64>,
}

impl ValidationRecord {
    /// Minimal record; the remaining fields default to empty.
    pub fn new(subject_id: impl Into<String>, truth: Option<Label>, output: DeviceOutput) -> Self {
        Self {
            subject_id: subject_id.into(),
            site_id: String::new(),
            truth,
            output,
            survival: None,
            operator_id: None,
            device_unit_id: None,
            replicate_index: None,
            covariates: BTreeMap::new(),
        }
    }

    pub fn is_precision(&self) -> bool {
        self.replicate_index.is_some()
    }

    /// Value of a key field or covariate rendered as a stratum label.
    /// `None` when the field name is unknown for this record.
    pub fn field_value(&self, field: &str) -> Option<String> {
        let na = || "NA".to_string();
        match field {
            "subject_id" => Some(self.subject_id.clone()),
            "site_id" => Some(self.site_id.clone()),
            "operator_id" => Some(self.operator_id.clone().unwrap_or_else(na)),
            "device_unit_id" => Some(self.device_unit_id.clone().unwrap_or_else(na)),
            "truth" => Some(self.truth.map(|t| t.to_string()).unwrap_or_else(na)),
            "output" => Some(
                match self.output {
                    DeviceOutput::Binary(l) => l.code(),
                    DeviceOutput::Score(_) => "score",
                    DeviceOutput::Ungradable => "ungradable",
                }
                .to_string(),
            ),
            other => self.covariates.get(other).map(|v| v.to_string()),
        }
    }

    /// Numeric value of `score` or a covariate.
    pub fn numeric(&self, field: &str) -> Option<f64> {
        match field {
            "score" => self.output.score(),
            "time" => self.survival.map(|s| s.time),
            other => self.covariates.get(other).copied(),
        }
    }
}

pub const CANONICAL_COLUMNS: [&str; 10] = [
    "subject_id",
    "site_id",
    "truth",
    "output",
    "score",
    "time",
    "event",
    "operator_id",
    "device_unit_id",
    "replicate_index",
];

const KEY_FIELDS: [&str; 5] = ["subject_id", "site_id", "operator_id", "device_unit_id", "truth"];

/// Canonical column name → actual header name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColumnMapping(pub BTreeMap<String, String>);

impl ColumnMapping {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let map: BTreeMap<String, String> = serde_json::from_str(text)?;
        let mapping = ColumnMapping(map);
        mapping.check_keys()?;
        Ok(mapping)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_json_str(&text)
    }

    fn check_keys(&self) -> Result<()> {
        for key in self.0.keys() {
            if !CANONICAL_COLUMNS.contains(&key.as_str()) {
                return Err(Error::invalid(format!("unknown canonical column `{key}` in mapping")));
            }
        }
        Ok(())
    }

    /// Resolve every canonical column against a header. Explicitly mapped
    /// columns must exist; unmapped ones are picked up by their canonical
    /// name when present.
    pub fn resolve(&self, header: &[String]) -> Result<ResolvedColumns> {
        self.check_keys()?;
        let position = |name: &str| header.iter().position(|h| h == name);
        let mut index = BTreeMap::new();
        for canonical in CANONICAL_COLUMNS {
            match self.0.get(canonical) {
                Some(actual) => {
                    let at = position(actual).ok_or_else(|| Error::MissingColumn(actual.clone()))?;
                    index.insert(canonical, at);
                }
                None => {
                    if let Some(at) = position(canonical) {
                        index.insert(canonical, at);
                    }
                }
            }
        }
        if !index.contains_key("subject_id") {
            let name = self.0.get("subject_id").cloned().unwrap_or_else(|| "subject_id".into());
            return Err(Error::MissingColumn(name));
        }
        let used: BTreeSet<usize> = index.values().copied().collect();
        let covariates =
            header.iter().enumerate().filter(|(i, _)| !used.contains(i)).map(|(i, h)| (h.clone(), i)).collect();
        Ok(ResolvedColumns { index, covariates })
    }

    /// Actual header name for a canonical column or covariate.
    pub fn header_name<'a>(&'a self, field: &'a str) -> &'a str {
        self.0.get(field).map(String::as_str).unwrap_or(field)
    }
}

#[derive(Debug, Clone)]
pub struct ResolvedColumns {
    index: BTreeMap<&'static str, usize>,
    covariates: Vec<(String, usize)>,
}

impl ResolvedColumns {
    pub fn has(&self, canonical: &str) -> bool {
        self.index.contains_key(canonical)
    }

    pub fn covariate_names(&self) -> impl Iterator<Item = &str> {
        self.covariates.iter().map(|(n, _)| n.as_str())
    }

    fn cell<'r>(&self, row: &'r csv::StringRecord, canonical: &str) -> Option<&'r str> {
        self.index.get(canonical).and_then(|&i| row.get(i)).map(str::trim).filter(|s| !s.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub row: usize,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}, row {}", self.message, self.row)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub records: Vec<ValidationRecord>,
    pub errors: Vec<RowError>,
}

impl Ingested {
    /// Fail on the first quarantined row.
    pub fn into_strict(self) -> Result<Vec<ValidationRecord>> {
        match self.errors.into_iter().next() {
            Some(e) => Err(Error::Row { row: e.row, message: e.message }),
            None => Ok(self.records),
        }
    }
}

/// Read just the header of a CSV file.
pub fn read_header(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let file = std::fs::File::open(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    Ok(reader.headers()?.iter().map(str::to_string).collect())
}

pub fn ingest_csv(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<Ingested> {
    let file = std::fs::File::open(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    ingest_reader(file, mapping)
}

pub fn ingest_reader<R: Read>(reader: R, mapping: &ColumnMapping) -> Result<Ingested> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let columns = mapping.resolve(&header)?;
    let mut out = Ingested::default();
    for (i, row) in reader.records().enumerate() {
        let row_number = i + 1;
        let parsed = row.map_err(|e| e.to_string()).and_then(|row| parse_row(&row, &columns));
        match parsed {
            Ok(record) => out.records.push(record),
            Err(message) => out.errors.push(RowError { row: row_number, message }),
        }
    }
    Ok(out)
}

fn parse_row(row: &csv::StringRecord, cols: &ResolvedColumns) -> std::result::Result<ValidationRecord, String> {
    let subject_id = cols.cell(row, "subject_id").ok_or("empty subject_id")?.to_string();
    let site_id = cols.cell(row, "site_id").unwrap_or("").to_string();

    let truth = match cols.cell(row, "truth") {
        None => None,
        Some(raw) => Some(Label::parse(raw).ok_or_else(|| format!("unrecognised truth `{raw}`"))?),
    };

    let score = match cols.cell(row, "score") {
        None => None,
        Some(raw) => {
            let s: f64 = raw.parse().map_err(|_| format!("unparseable score `{raw}`"))?;
            if !(0.0..=1.0).contains(&s) {
                return Err("score out of range".into());
            }
            Some(s)
        }
    };
    let output = match (cols.cell(row, "output"), score) {
        (Some(raw), score) if raw.eq_ignore_ascii_case("ungradable") => {
            if score.is_some() {
                return Err("ungradable record carries a score".into());
            }
            DeviceOutput::Ungradable
        }
        (Some(raw), None) => {
            DeviceOutput::Binary(Label::parse(raw).ok_or_else(|| format!("unrecognised output `{raw}`"))?)
        }
        (Some(_), Some(_)) => return Err("both binary output and score present".into()),
        (None, Some(s)) => DeviceOutput::Score(s),
        (None, None) => return Err("missing device output".into()),
    };

    let survival = match (cols.cell(row, "time"), cols.cell(row, "event")) {
        (None, None) => None,
        (Some(t), Some(e)) => {
            let time: f64 = t.parse().map_err(|_| format!("unparseable time `{t}`"))?;
            if !time.is_finite() || time < 0.0 {
                return Err("negative survival time".into());
            }
            let event = match e.to_ascii_lowercase().as_str() {
                "1" | "true" => true,
                "0" | "false" => false,
                other => return Err(format!("unrecognised event `{other}`")),
            };
            Some(SurvivalOutcome { time, event })
        }
        _ => return Err("time and event must be given together".into()),
    };

    let replicate_index = match cols.cell(row, "replicate_index") {
        None => None,
        Some(raw) => Some(raw.parse::<u32>().map_err(|_| format!("unparseable replicate_index `{raw}`"))?),
    };

    let mut covariates = BTreeMap::new();
    for (name, at) in &cols.covariates {
        let Some(raw) = row.get(*at).map(str::trim).filter(|s| !s.is_empty()) else {
            continue;
        };
        let value: f64 = raw
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| format!("non-numeric covariate `{name}` = `{raw}`"))?;
        covariates.insert(name.clone(), value);
    }

    Ok(ValidationRecord {
        subject_id,
        site_id,
        truth,
        output,
        survival,
        operator_id: cols.cell(row, "operator_id").map(str::to_string),
        device_unit_id: cols.cell(row, "device_unit_id").map(str::to_string),
        replicate_index,
        covariates,
    })
}

/// Serialize records with the canonical header followed by the sorted union
/// of covariate names. Re-ingesting the output yields the same records.
pub fn write_csv<W: Write>(records: &[ValidationRecord], writer: W) -> Result<()> {
    let covariate_names: BTreeSet<&str> =
        records.iter().flat_map(|r| r.covariates.keys().map(String::as_str)).collect();
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = CANONICAL_COLUMNS.to_vec();
    header.extend(covariate_names.iter().copied());
    w.write_record(&header)?;
    for r in records {
        let (output, score) = match r.output {
            DeviceOutput::Binary(l) => (l.code().to_string(), String::new()),
            DeviceOutput::Score(s) => (String::new(), s.to_string()),
            DeviceOutput::Ungradable => ("ungradable".to_string(), String::new()),
        };
        let (time, event) = match r.survival {
            Some(s) => (s.time.to_string(), if s.event { "1" } else { "0" }.to_string()),
            None => (String::new(), String::new()),
        };
        let mut fields = vec![
            r.subject_id.clone(),
            r.site_id.clone(),
            r.truth.map(|t| t.code().to_string()).unwrap_or_default(),
            output,
            score,
            time,
            event,
            r.operator_id.clone().unwrap_or_default(),
            r.device_unit_id.clone().unwrap_or_default(),
            r.replicate_index.map(|i| i.to_string()).unwrap_or_default(),
        ];
        for name in &covariate_names {
            fields.push(r.covariates.get(*name).map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Replace `Score` outputs by `Binary` calls using `score >= threshold`.
pub fn dichotomize(records: &[ValidationRecord], threshold: f64) -> Vec<ValidationRecord> {
    records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if let DeviceOutput::Score(s) = r.output {
                r.output = DeviceOutput::Binary(if s >= threshold { Label::Positive } else { Label::Negative });
            }
            r
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrityReport {
    pub n_records: usize,
    /// `(subject_id, replicate_index)` pairs seen more than once.
    pub duplicates: Vec<(String, Option<u32>)>,
    /// Records outside a precision study that lack a reference standard.
    pub missing_truth: usize,
    pub site_counts: BTreeMap<String, usize>,
    pub single_site: bool,
    /// Largest site holds more than `SITE_IMBALANCE_RATIO` times the smallest.
    pub site_imbalance: bool,
    pub warnings: Vec<String>,
}

pub const SITE_IMBALANCE_RATIO: usize = 4;

impl IntegrityReport {
    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }
}

pub fn validate_records(records: &[ValidationRecord]) -> IntegrityReport {
    let mut seen: BTreeMap<(&str, Option<u32>), usize> = BTreeMap::new();
    for r in records {
        *seen.entry((r.subject_id.as_str(), r.replicate_index)).or_default() += 1;
    }
    let duplicates: Vec<(String, Option<u32>)> =
        seen.into_iter().filter(|(_, count)| *count > 1).map(|((s, i), _)| (s.to_string(), i)).collect();
    let missing_truth = records.iter().filter(|r| !r.is_precision() && r.truth.is_none()).count();
    let mut site_counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in records {
        *site_counts.entry(r.site_id.clone()).or_default() += 1;
    }
    let single_site = !records.is_empty() && site_counts.len() == 1;
    let site_imbalance = site_counts.len() > 1 && {
        let max = site_counts.values().max().copied().unwrap_or(0);
        let min = site_counts.values().min().copied().unwrap_or(0);
        max > SITE_IMBALANCE_RATIO * min
    };

    let mut warnings = Vec::new();
    for (subject, replicate) in &duplicates {
        match replicate {
            Some(i) => warnings.push(format!("duplicate record: subject `{subject}` replicate {i}")),
            None => warnings.push(format!("duplicate record: subject `{subject}`")),
        }
    }
    if missing_truth > 0 {
        warnings.push(format!("{missing_truth} record(s) lack a reference-standard truth label"));
    }
    if single_site {
        warnings.push("single-site dataset: all records come from one site".into());
    }
    if site_imbalance {
        warnings.push(format!("site imbalance: largest site exceeds {SITE_IMBALANCE_RATIO}x the smallest"));
    }
    IntegrityReport {
        n_records: records.len(),
        duplicates,
        missing_truth,
        site_counts,
        single_site,
        site_imbalance,
        warnings,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputCounts {
    pub positive: usize,
    pub negative: usize,
    pub ungradable: usize,
    pub score: usize,
}

impl OutputCounts {
    fn add(&mut self, output: &DeviceOutput) {
        match output {
            DeviceOutput::Binary(Label::Positive) => self.positive += 1,
            DeviceOutput::Binary(Label::Negative) => self.negative += 1,
            DeviceOutput::Ungradable => self.ungradable += 1,
            DeviceOutput::Score(_) => self.score += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSummary {
    /// `(field, value)` pairs identifying the stratum.
    pub key: Vec<(String, String)>,
    pub n: usize,
    pub n_with_truth: usize,
    pub n_positive: usize,
    pub prevalence: Option<f64>,
    pub outputs: OutputCounts,
    pub mean_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub n_with_truth: usize,
    pub prevalence: Option<f64>,
    pub strata: Vec<StratumSummary>,
    /// Fraction of records missing each optional field or covariate.
    pub missingness: BTreeMap<String, f64>,
    pub site_counts: BTreeMap<String, usize>,
}

#[derive(Default)]
struct Accumulator {
    n: usize,
    n_with_truth: usize,
    n_positive: usize,
    outputs: OutputCounts,
    score_sum: f64,
}

impl Accumulator {
    fn add(&mut self, r: &ValidationRecord) {
        self.n += 1;
        if let Some(t) = r.truth {
            self.n_with_truth += 1;
            if t == Label::Positive {
                self.n_positive += 1;
            }
        }
        self.outputs.add(&r.output);
        if let Some(s) = r.output.score() {
            self.score_sum += s;
        }
    }

    fn prevalence(&self) -> Option<f64> {
        (self.n_with_truth > 0).then(|| self.n_positive as f64 / self.n_with_truth as f64)
    }
}

pub fn descriptive_summary(records: &[ValidationRecord], strata_fields: &[String]) -> Result<DatasetSummary> {
    let covariate_names: BTreeSet<&str> =
        records.iter().flat_map(|r| r.covariates.keys().map(String::as_str)).collect();
    for field in strata_fields {
        let known =
            KEY_FIELDS.contains(&field.as_str()) || field == "output" || covariate_names.contains(field.as_str());
        if !known {
            return Err(Error::invalid(format!("unknown stratum field `{field}`")));
        }
    }

    let mut total = Accumulator::default();
    let mut strata: BTreeMap<Vec<(String, String)>, Accumulator> = BTreeMap::new();
    for r in records {
        total.add(r);
        let key = strata_fields.iter().map(|f| (f.clone(), r.field_value(f).unwrap_or_else(|| "NA".into()))).collect();
        strata.entry(key).or_default().add(r);
    }

    let n = records.len();
    let frac = |missing: usize| if n == 0 { 0.0 } else { missing as f64 / n as f64 };
    let mut missingness = BTreeMap::new();
    missingness.insert("truth".into(), frac(records.iter().filter(|r| r.truth.is_none()).count()));
    missingness.insert("survival".into(), frac(records.iter().filter(|r| r.survival.is_none()).count()));
    missingness.insert("operator_id".into(), frac(records.iter().filter(|r| r.operator_id.is_none()).count()));
    missingness.insert("device_unit_id".into(), frac(records.iter().filter(|r| r.device_unit_id.is_none()).count()));
    for name in &covariate_names {
        let missing = records.iter().filter(|r| !r.covariates.contains_key(*name)).count();
        missingness.insert(name.to_string(), frac(missing));
    }

    let mut site_counts = BTreeMap::new();
    for r in records {
        *site_counts.entry(r.site_id.clone()).or_insert(0) += 1;
    }

    Ok(DatasetSummary {
        n,
        n_with_truth: total.n_with_truth,
        prevalence: total.prevalence(),
        strata: strata
            .into_iter()
            .filter(|(_, acc)| acc.n > 0)
            .map(|(key, acc)| StratumSummary {
                key,
                n: acc.n,
                n_with_truth: acc.n_with_truth,
                n_positive: acc.n_positive,
                prevalence: acc.prevalence(),
                mean_score: (acc.outputs.score > 0).then(|| acc.score_sum / acc.outputs.score as f64),
                outputs: acc.outputs,
            })
            .collect(),
        missingness,
        site_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ingest_str(text: &str) -> Result<Ingested> {
        ingest_reader(text.as_bytes(), &ColumnMapping::default())
    }

    #[test]
    fn three_rows_no_errors() {
        let got =
            ingest_str("subject_id,site_id,truth,output\nA,S1,pos,pos\nB,S1,neg,neg\nC,S2,pos,ungradable\n").unwrap();
        assert_eq!(got.records.len(), 3);
        assert!(got.errors.is_empty());
        assert_eq!(got.records[0].output, DeviceOutput::Binary(Label::Positive));
        assert_eq!(got.records[2].output, DeviceOutput::Ungradable);
        assert_eq!(got.records[1].subject_id, "B");
    }

    #[test]
    fn out_of_range_score_is_quarantined_with_row_number() {
        let got = ingest_str("subject_id,truth,score\nA,pos,0.3\nB,neg,1.2\nC,neg,0.1\n").unwrap();
        assert_eq!(got.records.len(), 2);
        assert_eq!(got.errors.len(), 1);
        assert_eq!(got.errors[0].to_string(), "score out of range, row 2");
        let strict = ingest_str("subject_id,truth,score\nA,pos,0.3\nB,neg,1.2\n").unwrap().into_strict();
        assert_eq!(strict.unwrap_err().to_string(), "score out of range, row 2");
    }

    #[test]
    fn header_only_is_empty() {
        let got = ingest_str("subject_id,truth,output\n").unwrap();
        assert!(got.records.is_empty());
        assert!(got.errors.is_empty());
    }

    #[test]
    fn negative_time_and_missing_column() {
        let got = ingest_str("subject_id,score,time,event\nA,0.5,-1,1\n").unwrap();
        assert_eq!(got.errors[0].to_string(), "negative survival time, row 1");

        let mapping = ColumnMapping::from_json_str(r#"{"truth": "Reference"}"#).unwrap();
        let err = ingest_reader("subject_id,truth\nA,pos\n".as_bytes(), &mapping).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "Reference"));
        assert!(matches!(ingest_csv("/definitely/not/here.csv", &ColumnMapping::default()), Err(Error::Io { .. })));
    }

    #[test]
    fn column_mapping_renames() {
        let mapping =
            ColumnMapping::from_json_str(r#"{"subject_id": "PID", "truth": "Biopsy", "score": "Prob"}"#).unwrap();
        let got = ingest_reader("PID,Biopsy,Prob,age\nX1,neg,0.25,61\n".as_bytes(), &mapping).unwrap();
        let r = &got.records[0];
        assert_eq!(r.subject_id, "X1");
        assert_eq!(r.truth, Some(Label::Negative));
        assert_eq!(r.output, DeviceOutput::Score(0.25));
        assert_eq!(r.covariates["age"], 61.0);
        assert!(ColumnMapping::from_json_str(r#"{"nonsense": "x"}"#).is_err());
    }

    #[test]
    fn duplicates_and_single_site() {
        let mut a = ValidationRecord::new("s1", None, DeviceOutput::Score(0.5));
        a.replicate_index = Some(0);
        let records = vec![a.clone(), a];
        let report = validate_records(&records);
        assert_eq!(report.duplicates, vec![("s1".to_string(), Some(0))]);
        assert!(report.single_site);
        assert_eq!(report.missing_truth, 0, "precision records need no truth");
        assert_eq!(report, validate_records(&records));
    }

    #[test]
    fn clean_dataset_has_empty_report() {
        let mut records = Vec::new();
        for (i, site) in ["S1", "S2", "S1", "S2"].iter().enumerate() {
            let mut r =
                ValidationRecord::new(format!("p{i}"), Some(Label::Positive), DeviceOutput::Binary(Label::Positive));
            r.site_id = site.to_string();
            records.push(r);
        }
        let report = validate_records(&records);
        assert!(report.is_clean(), "{:?}", report.warnings);
        assert_eq!(report, validate_records(&records));
    }

    fn summary_fixture() -> Vec<ValidationRecord> {
        (0..10)
            .map(|i| {
                let truth = if i < 4 { Label::Positive } else { Label::Negative };
                let mut r = ValidationRecord::new(format!("p{i}"), Some(truth), DeviceOutput::Binary(truth));
                r.site_id = if i % 5 < 3 { "S1" } else { "S2" }.into();
                r
            })
            .collect()
    }

    #[test]
    fn pooled_prevalence() {
        let s = descriptive_summary(&summary_fixture(), &[]).unwrap();
        assert_eq!(s.prevalence, Some(0.4));
        assert_eq!(s.strata.len(), 1);
        assert_eq!(s.strata[0].n, 10);
    }

    #[test]
    fn site_strata_and_weighted_mean() {
        let records = summary_fixture();
        let s = descriptive_summary(&records, &["site_id".to_string()]).unwrap();
        let counts: Vec<usize> = s.strata.iter().map(|x| x.n).collect();
        assert_eq!(counts, vec![6, 4]);
        // pooled prevalence is the truth-count-weighted mean of stratum prevalences
        let weighted: f64 =
            s.strata.iter().map(|x| x.prevalence.unwrap() * x.n_with_truth as f64).sum::<f64>() / s.n_with_truth as f64;
        let direct = records.iter().filter(|r| r.truth == Some(Label::Positive)).count() as f64 / records.len() as f64;
        assert!((weighted - direct).abs() < 1e-15);
        assert!((s.prevalence.unwrap() - direct).abs() < 1e-15);
        assert!(descriptive_summary(&records, &["shoe_size".to_string()]).is_err());
    }

    fn arb_record() -> impl Strategy<Value = ValidationRecord> {
        let output = prop_oneof![
            any::<bool>().prop_map(|b| DeviceOutput::Binary(if b { Label::Positive } else { Label::Negative })),
            (0.0..=1.0f64).prop_map(DeviceOutput::Score),
            Just(DeviceOutput::Ungradable),
        ];
        let truth = prop_oneof![Just(None), Just(Some(Label::Positive)), Just(Some(Label::Negative))];
        let survival = proptest::option::of(
            (0.0..1e4f64, any::<bool>()).prop_map(|(time, event)| SurvivalOutcome { time, event }),
        );
        (
            "[a-z][a-z0-9]{0,6}",
            "[A-Z]{0,3}",
            truth,
            output,
            survival,
            proptest::option::of("[a-z]{1,4}"),
            proptest::option::of(0u32..5),
            proptest::collection::btree_map("cov_[a-c]", -1e6..1e6f64, 0..3),
        )
            .prop_map(
                |(subject_id, site_id, truth, output, survival, operator_id, replicate_index, covariates)| {
                    ValidationRecord {
                        subject_id,
                        site_id,
                        truth,
                        output,
                        survival,
                        operator_id,
                        device_unit_id: None,
                        replicate_index,
                        covariates,
                    }
                },
            )
    }

    proptest! {
        #[test]
        fn csv_round_trip(records in proptest::collection::vec(arb_record(), 0..12)) {
            let mut buf = Vec::new();
            write_csv(&records, &mut buf).unwrap();
            let back = ingest_reader(buf.as_slice(), &ColumnMapping::default()).unwrap().into_strict().unwrap();
            prop_assert_eq!(back, records);
        }

        #[test]
        fn strata_counts_sum_to_total(records in proptest::collection::vec(arb_record(), 0..30)) {
            let s = descriptive_summary(&records, &["site_id".to_string(), "output".to_string()]).unwrap();
            prop_assert_eq!(s.strata.iter().map(|x| x.n).sum::<usize>(), records.len());
        }
    }
}

//! Loading defect datasets into normalized [`DefectRecord`]s.
//!
//! Three input formats are supported:
//!
//! * `canonical`: one JSON object per line, exactly the serialized form of
//!   [`DefectRecord`]. Writing and re-reading is lossless.
//! * `csv`: a header row naming record fields; `cross_refs` is `;`-separated
//!   and the ODC columns are `odc_defect_type`, `trigger`, `phase_found`.
//! * `github_export`: a JSON array of issues (`id`/`number`, `title`,
//!   `body`, `labels`), with issue labels mapped onto defect-type labels by a
//!   [`LabelMapping`]. `#N` references in the body become cross references.
//!
//! Rows that are well-formed but semantically invalid (empty id, unknown
//! platform) are rejected and reported; syntactically broken input and
//! duplicate ids fail the whole load.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{fold_name, OdcAttributes, OdcDefectType, UnknownValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Platform {
    GitHub,
    StackOverflow,
    Other,
}

impl Platform {
    pub fn name(self) -> &'static str {
        match self {
            Platform::GitHub => "GitHub",
            Platform::StackOverflow => "StackOverflow",
            Platform::Other => "Other",
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Platform {
    type Err = UnknownValue;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match fold_name(s.trim()).as_str() {
            "github" => Ok(Platform::GitHub),
            "stackoverflow" => Ok(Platform::StackOverflow),
            "other" => Ok(Platform::Other),
            _ => Err(UnknownValue::new("platform", s)),
        }
    }
}

impl From<Platform> for String {
    fn from(p: Platform) -> String {
        p.name().to_string()
    }
}

impl TryFrom<String> for Platform {
    type Error = UnknownValue;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// A normalized defect report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectRecord {
    pub id: String,
    pub platform: Platform,
    pub framework: String,
    pub title: String,
    pub description: String,
    /// Lowercase, single-space separated; empty when the source had none.
    pub defect_type_label: String,
    pub cross_refs: BTreeSet<String>,
    pub odc: OdcAttributes,
    pub created_at: Option<DateTime<Utc>>,
}

impl DefectRecord {
    pub fn is_labeled(&self) -> bool {
        !self.defect_type_label.is_empty()
    }
}

/// Lowercases, trims and collapses internal whitespace.
pub fn normalize_label(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("dataset file not found: {0}")]
    FileMissing(PathBuf),
    #[error("reading dataset: {0}")]
    Io(#[from] io::Error),
    #[error("parse error at row {row}: {message}")]
    ParseError { row: usize, message: String },
    #[error("duplicate defect id {0:?}")]
    DuplicateId(String),
    #[error("label mapping line {line}: {message}")]
    BadMapping { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Canonical,
    Csv,
    GithubExport,
}

impl FromStr for DatasetFormat {
    type Err = UnknownValue;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match fold_name(s).as_str() {
            "canonical" | "jsonl" => Ok(DatasetFormat::Canonical),
            "csv" => Ok(DatasetFormat::Csv),
            "githubexport" | "github" => Ok(DatasetFormat::GithubExport),
            _ => Err(UnknownValue::new("dataset format", s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub row: usize,
    pub reason: String,
}

/// Outcome of a load: accepted records plus everything that was set aside.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub records: Vec<DefectRecord>,
    pub rejected: Vec<Rejection>,
    /// Ids of accepted records with no defect-type label.
    pub unlabeled: Vec<String>,
}

/// Maps issue-tracker labels onto defect-type labels.
///
/// File format: `<issue label> => <defect type label>` per line, `#` comments.
/// Matching is on normalized text; the first mapped label of an issue wins.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelMapping {
    entries: Vec<(String, String)>,
}

impl LabelMapping {
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (from, to) = line.split_once("=>").ok_or_else(|| IngestError::BadMapping {
                line: i + 1,
                message: "expected `<issue label> => <defect type label>`".into(),
            })?;
            entries.push((normalize_label(from), normalize_label(to)));
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        Self::parse(&read(path.as_ref())?)
    }

    pub fn lookup(&self, issue_label: &str) -> Option<&str> {
        let key = normalize_label(issue_label);
        self.entries
            .iter()
            .find(|(from, _)| *from == key)
            .map(|(_, to)| to.as_str())
    }
}

/// Extra inputs for the GitHub-export adapter.
#[derive(Debug, Clone, Default)]
pub struct ExportOptions {
    pub mapping: LabelMapping,
    /// Framework tag given to every issue in the export.
    pub framework: String,
}

pub fn load_defects(
    path: impl AsRef<Path>,
    format: DatasetFormat,
    export: Option<&ExportOptions>,
) -> Result<LoadReport, IngestError> {
    let text = read(path.as_ref())?;
    match format {
        DatasetFormat::Canonical => parse_canonical(&text),
        DatasetFormat::Csv => parse_csv(&text),
        DatasetFormat::GithubExport => {
            let default = ExportOptions::default();
            parse_github_export(&text, export.unwrap_or(&default))
        }
    }
}

fn read(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => IngestError::FileMissing(path.to_path_buf()),
        _ => IngestError::Io(e),
    })
}

/// Accumulates rows, enforcing id uniqueness and label normalization.
#[derive(Default)]
struct Collector {
    report: LoadReport,
    ids: HashSet<String>,
}

impl Collector {
    fn accept(&mut self, row: usize, mut rec: DefectRecord) -> Result<(), IngestError> {
        rec.id = rec.id.trim().to_string();
        if rec.id.is_empty() {
            self.reject(row, "empty id");
            return Ok(());
        }
        if !self.ids.insert(rec.id.clone()) {
            return Err(IngestError::DuplicateId(rec.id));
        }
        rec.defect_type_label = normalize_label(&rec.defect_type_label);
        rec.framework = normalize_label(&rec.framework);
        if !rec.is_labeled() {
            self.report.unlabeled.push(rec.id.clone());
        }
        self.report.records.push(rec);
        Ok(())
    }

    fn reject(&mut self, row: usize, reason: impl Into<String>) {
        self.report.rejected.push(Rejection {
            row,
            reason: reason.into(),
        });
    }
}

/// Parses the canonical line-delimited format. Rows are 1-based line numbers.
pub fn parse_canonical(text: &str) -> Result<LoadReport, IngestError> {
    let mut c = Collector::default();
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| IngestError::ParseError {
                row,
                message: e.to_string(),
            })?;
        match serde_json::from_value::<DefectRecord>(value) {
            Ok(rec) => c.accept(row, rec)?,
            Err(e) => c.reject(row, e.to_string()),
        }
    }
    Ok(c.report)
}

pub fn write_canonical<W: Write>(records: &[DefectRecord], mut w: W) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_canonical_string(records: &[DefectRecord]) -> String {
    let mut buf = Vec::new();
    write_canonical(records, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    id: String,
    platform: String,
    framework: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    defect_type_label: String,
    #[serde(default)]
    cross_refs: String,
    #[serde(default)]
    odc_defect_type: String,
    #[serde(default)]
    trigger: String,
    #[serde(default)]
    phase_found: String,
    #[serde(default)]
    created_at: String,
}

fn non_empty(s: String) -> Option<String> {
    Some(s.trim().to_string()).filter(|s| !s.is_empty())
}

impl CsvRow {
    fn into_record(self) -> Result<DefectRecord, String> {
        let platform = self.platform.parse::<Platform>().map_err(|e| e.to_string())?;
        let defect_type = non_empty(self.odc_defect_type)
            .map(|t| t.parse::<OdcDefectType>())
            .transpose()
            .map_err(|e| e.to_string())?;
        let created_at = non_empty(self.created_at)
            .map(|t| DateTime::parse_from_rfc3339(&t).map(|d| d.with_timezone(&Utc)))
            .transpose()
            .map_err(|e| format!("created_at: {e}"))?;
        Ok(DefectRecord {
            id: self.id,
            platform,
            framework: self.framework,
            title: self.title,
            description: self.description,
            defect_type_label: self.defect_type_label,
            cross_refs: self
                .cross_refs
                .split(';')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect(),
            odc: OdcAttributes {
                defect_type,
                trigger: non_empty(self.trigger),
                phase_found: non_empty(self.phase_found),
            },
            created_at,
        })
    }
}

/// Parses the CSV adapter format. Rows are 1-based line numbers (header = 1).
pub fn parse_csv(text: &str) -> Result<LoadReport, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::Headers)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| IngestError::ParseError {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut c = Collector::default();
    for result in reader.records() {
        let record = result.map_err(|e| IngestError::ParseError {
            row: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        match record.deserialize::<CsvRow>(Some(&headers)) {
            Ok(raw) => match raw.into_record() {
                Ok(rec) => c.accept(row, rec)?,
                Err(reason) => c.reject(row, reason),
            },
            Err(e) => c.reject(row, e.to_string()),
        }
    }
    Ok(c.report)
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum IdValue {
    Number(u64),
    Text(String),
}

impl fmt::Display for IdValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IdValue::Number(n) => write!(f, "{n}"),
            IdValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum IssueLabel {
    Name(String),
    Object { name: String },
}

impl IssueLabel {
    fn name(&self) -> &str {
        match self {
            IssueLabel::Name(n) | IssueLabel::Object { name: n } => n,
        }
    }
}

#[derive(Debug, Deserialize)]
struct ExportedIssue {
    id: Option<IdValue>,
    number: Option<IdValue>,
    #[serde(default)]
    title: String,
    #[serde(default)]
    body: Option<String>,
    #[serde(default)]
    labels: Vec<IssueLabel>,
    #[serde(default)]
    created_at: Option<DateTime<Utc>>,
    #[serde(default)]
    cross_refs: Vec<String>,
}

/// `#123` style references in free text.
fn issue_refs(text: &str) -> impl Iterator<Item = String> + '_ {
    text.match_indices('#').filter_map(move |(i, _)| {
        let digits: String = text[i + 1..]
            .chars()
            .take_while(char::is_ascii_digit)
            .collect();
        let preceded_by_word = text[..i]
            .chars()
            .next_back()
            .is_some_and(|c| c.is_alphanumeric());
        (!digits.is_empty() && !preceded_by_word).then_some(digits)
    })
}

/// Parses a GitHub issue export. Rows are 1-based array positions.
pub fn parse_github_export(text: &str, opts: &ExportOptions) -> Result<LoadReport, IngestError> {
    let items: Vec<serde_json::Value> =
        serde_json::from_str(text).map_err(|e| IngestError::ParseError {
            row: 0,
            message: e.to_string(),
        })?;
    let mut c = Collector::default();
    for (i, item) in items.into_iter().enumerate() {
        let row = i + 1;
        let issue: ExportedIssue = match serde_json::from_value(item) {
            Ok(issue) => issue,
            Err(e) => {
                c.reject(row, e.to_string());
                continue;
            }
        };
        let Some(id) = issue.number.as_ref().or(issue.id.as_ref()) else {
            c.reject(row, "issue has neither `number` nor `id`");
            continue;
        };
        let id = id.to_string();
        let body = issue.body.unwrap_or_default();
        let label = issue
            .labels
            .iter()
            .find_map(|l| opts.mapping.lookup(l.name()))
            .unwrap_or_default()
            .to_string();
        let mut cross_refs: BTreeSet<String> = issue.cross_refs.into_iter().collect();
        cross_refs.extend(issue_refs(&body).filter(|r| *r != id));
        c.accept(
            row,
            DefectRecord {
                id,
                platform: Platform::GitHub,
                framework: opts.framework.clone(),
                title: issue.title,
                description: body,
                defect_type_label: label,
                cross_refs,
                odc: OdcAttributes::default(),
                created_at: issue.created_at,
            },
        )?;
    }
    Ok(c.report)
}

/// Order-preserving subset matching every supplied predicate.
///
/// Framework tags compare case-insensitively.
pub fn filter_defects(
    records: &[DefectRecord],
    platform: Option<Platform>,
    framework: Option<&str>,
) -> Vec<DefectRecord> {
    let framework = framework.map(normalize_label);
    records
        .iter()
        .filter(|r| platform.is_none_or(|p| r.platform == p))
        .filter(|r| framework.as_ref().is_none_or(|f| r.framework == *f))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dedupe {
    pub kept: Vec<DefectRecord>,
    /// Each dropped record with the id of the record kept in its place.
    pub dropped: Vec<(DefectRecord, String)>,
}

/// Collapses records linked through `cross_refs` into one representative per
/// linked class: the record with the lexicographically smallest id.
///
/// Links are symmetric and transitive; references to ids outside the input are
/// ignored.
pub fn dedupe_by_issue_id(records: &[DefectRecord]) -> Dedupe {
    let index: HashMap<&str, usize> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.as_str(), i))
        .collect();
    let mut parent: Vec<usize> = (0..records.len()).collect();

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for (i, r) in records.iter().enumerate() {
        for target in &r.cross_refs {
            if let Some(&j) = index.get(target.as_str()) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    // keep the smaller id at the root
                    if records[a].id <= records[b].id {
                        parent[b] = a;
                    } else {
                        parent[a] = b;
                    }
                }
            }
        }
    }

    let mut out = Dedupe::default();
    for (i, r) in records.iter().enumerate() {
        let root = find(&mut parent, i);
        if root == i {
            out.kept.push(r.clone());
        } else {
            out.dropped.push((r.clone(), records[root].id.clone()));
        }
    }
    out
}

//! Text, CSV and JSON renderings of analysis results, and the on-disk
//! analysis bundle.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyze::{
    chi_square_independence, impact_frequencies, one_way, two_way, AnalyzeError, Attribute,
    ContingencyTable, Distribution, ImpactFrequency, IndependenceTest,
};
use crate::annotate::AgreementResult;
use crate::classify::{ClassificationLabel, RuleSet};
use crate::taxonomy::{fold_name, Taxonomy};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unsupported output format {0:?} (expected text, csv or structured)")]
    UnsupportedFormat(String),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed distribution CSV: {0}")]
    BadCsv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Text,
    Csv,
    /// Pretty-printed JSON.
    Structured,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Text => "txt",
            OutputFormat::Csv => "csv",
            OutputFormat::Structured => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = ReportError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match fold_name(s).as_str() {
            "text" | "txt" => Ok(OutputFormat::Text),
            "csv" => Ok(OutputFormat::Csv),
            "structured" | "json" => Ok(OutputFormat::Structured),
            _ => Err(ReportError::UnsupportedFormat(s.to_string())),
        }
    }
}

fn to_json<T: Serialize + ?Sized>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report values serialize");
    s.push('\n');
    s
}

fn csv_string(rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).expect("in-memory CSV");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("UTF-8 input")
}

/// Lays out cells in columns two spaces apart, right-aligned except for the
/// columns listed in `left`.
fn align(rows: &[Vec<String>], left: &[usize]) -> String {
    let ncols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..ncols)
        .map(|j| rows.iter().filter_map(|r| r.get(j)).map(|c| c.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let mut line = String::new();
        for (j, cell) in r.iter().enumerate() {
            if j > 0 {
                line.push_str("  ");
            }
            if left.contains(&j) {
                let _ = write!(line, "{cell:<w$}", w = widths[j]);
            } else {
                let _ = write!(line, "{cell:>w$}", w = widths[j]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

pub fn render_distribution(d: &Distribution, format: OutputFormat) -> String {
    match format {
        OutputFormat::Text => {
            let mut rows = vec![vec![d.attribute.clone(), "n".into(), "%".into()]];
            rows.extend(
                d.rows
                    .iter()
                    .map(|r| vec![r.category.clone(), r.count.to_string(), r.percent.to_string()]),
            );
            let mut out = align(&rows, &[]);
            if !d.rows.is_empty() {
                let _ = writeln!(out, "total: {}", d.total);
                if d.excluded > 0 {
                    let _ = writeln!(out, "excluded: {}", d.excluded);
                }
            }
            out
        }
        OutputFormat::Csv => csv_string(
            std::iter::once(vec!["category".into(), "count".into(), "percent".into()]).chain(
                d.rows
                    .iter()
                    .map(|r| vec![r.category.clone(), r.count.to_string(), r.percent.to_string()]),
            ),
        ),
        OutputFormat::Structured => to_json(d),
    }
}

/// Reads back `(category, count)` pairs from [`render_distribution`]'s CSV.
pub fn parse_distribution_csv(text: &str) -> Result<Vec<(String, u64)>, ReportError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| ReportError::BadCsv(e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != ["category", "count", "percent"] {
        return Err(ReportError::BadCsv(format!("unexpected header {header:?}")));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| ReportError::BadCsv(e.to_string()))?;
            let count = rec[1]
                .parse()
                .map_err(|_| ReportError::BadCsv(format!("bad count {:?}", &rec[1])))?;
            Ok((rec[0].to_string(), count))
        })
        .collect()
}

/// A contingency table with its independence test, or the reason the test
/// could not run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContingencyView<'a> {
    #[serde(flatten)]
    pub table: &'a ContingencyTable,
    pub independence: Option<IndependenceTest>,
    pub note: Option<String>,
}

impl<'a> ContingencyView<'a> {
    pub fn new(table: &'a ContingencyTable) -> Self {
        match chi_square_independence(table) {
            Ok(t) => Self {
                table,
                independence: Some(t),
                note: None,
            },
            Err(e) => Self {
                table,
                independence: None,
                note: Some(format!("{e:?}: {e}")),
            },
        }
    }
}

pub fn render_contingency(t: &ContingencyTable, format: OutputFormat) -> String {
    let view = ContingencyView::new(t);
    match format {
        OutputFormat::Text => {
            let mut rows = vec![std::iter::once(format!("{} \\ {}", t.row_attribute, t.col_attribute))
                .chain(t.col_categories.iter().cloned())
                .chain(["Total".to_string()])
                .collect::<Vec<_>>()];
            for (i, cat) in t.row_categories.iter().enumerate() {
                rows.push(
                    std::iter::once(cat.clone())
                        .chain(t.counts[i].iter().map(u64::to_string))
                        .chain([t.row_marginals[i].to_string()])
                        .collect(),
                );
            }
            rows.push(
                std::iter::once("Total".to_string())
                    .chain(t.col_marginals.iter().map(u64::to_string))
                    .chain([t.total.to_string()])
                    .collect(),
            );
            let mut out = align(&rows, &[0]);
            if t.excluded > 0 {
                let _ = writeln!(out, "excluded: {}", t.excluded);
            }
            match (&view.independence, &view.note) {
                (Some(test), _) => {
                    let _ = writeln!(
                        out,
                        "chi-square: {:.4}  dof: {}  p: {:.6}",
                        test.statistic, test.dof, test.p_value
                    );
                    if test.low_expected {
                        out.push_str("warning: some expected counts are below 5\n");
                    }
                }
                (None, Some(note)) => {
                    let _ = writeln!(out, "note: {note}");
                }
                (None, None) => {}
            }
            out
        }
        OutputFormat::Csv => {
            let header = std::iter::once(t.row_attribute.clone())
                .chain(t.col_categories.iter().cloned())
                .chain(["Total".to_string()])
                .collect();
            let body = t.row_categories.iter().enumerate().map(|(i, cat)| {
                std::iter::once(cat.clone())
                    .chain(t.counts[i].iter().map(u64::to_string))
                    .chain([t.row_marginals[i].to_string()])
                    .collect()
            });
            let footer = std::iter::once("Total".to_string())
                .chain(t.col_marginals.iter().map(u64::to_string))
                .chain([t.total.to_string()])
                .collect();
            csv_string(std::iter::once(header).chain(body).chain([footer]))
        }
        OutputFormat::Structured => to_json(&view),
    }
}

/// Plain matrix for plotting: one row per row category, integer cells.
pub fn render_heatmap_csv(t: &ContingencyTable) -> String {
    let header = std::iter::once(t.row_attribute.clone())
        .chain(t.col_categories.iter().cloned())
        .collect();
    let body = t.row_categories.iter().zip(&t.counts).map(|(cat, row)| {
        std::iter::once(cat.clone()).chain(row.iter().map(u64::to_string)).collect()
    });
    csv_string(std::iter::once(header).chain(body))
}

pub fn render_impacts(freqs: &[ImpactFrequency], format: OutputFormat) -> String {
    let row = |f: &ImpactFrequency| vec![f.model.name().to_string(), f.characteristic.clone(), f.count.to_string()];
    let header = vec!["model".to_string(), "characteristic".into(), "count".into()];
    match format {
        OutputFormat::Text => {
            let rows: Vec<_> = std::iter::once(header).chain(freqs.iter().map(row)).collect();
            align(&rows, &[0, 1])
        }
        OutputFormat::Csv => csv_string(std::iter::once(header).chain(freqs.iter().map(row))),
        OutputFormat::Structured => to_json(freqs),
    }
}

pub fn render_agreement(results: &[AgreementResult], format: OutputFormat) -> String {
    let row = |a: &AgreementResult| {
        vec![
            a.attribute.to_string(),
            a.n.to_string(),
            format!("{:.4}", a.observed_agreement),
            format!("{:.4}", a.expected_agreement),
            format!("{:.4}", a.kappa),
        ]
    };
    let header: Vec<String> = ["attribute", "n", "observed", "expected", "kappa"]
        .map(String::from)
        .to_vec();
    match format {
        OutputFormat::Text => {
            let rows: Vec<_> = std::iter::once(header).chain(results.iter().map(row)).collect();
            align(&rows, &[0])
        }
        OutputFormat::Csv => csv_string(std::iter::once(header).chain(results.iter().map(row))),
        OutputFormat::Structured => to_json(results),
    }
}

fn empty_artifact(format: OutputFormat, header: &[&str], reason: &str) -> String {
    match format {
        OutputFormat::Text => format!("(empty: {reason})\n"),
        OutputFormat::Csv => csv_string([header.iter().map(|s| s.to_string()).collect()]),
        OutputFormat::Structured => to_json(&serde_json::json!({ "empty": true, "reason": reason })),
    }
}

#[derive(Debug, Clone, Default)]
pub struct BundleOptions {
    pub dataset_id: String,
    pub format: OutputFormat,
    /// Kappa results from an annotation session, if the labels came from one.
    pub agreement: Vec<AgreementResult>,
    /// Fixed generation time; the current time when `None`.
    pub generated_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub file: String,
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleMetadata {
    pub dataset: String,
    pub label_count: usize,
    pub rules_version: String,
    pub taxonomy_version: String,
    pub format: OutputFormat,
    pub artifacts: Vec<Artifact>,
    /// Kept last so it sits on its own line of `metadata.json`.
    pub generated_at: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub metadata: BundleMetadata,
    pub dir: PathBuf,
}

/// Writes every analysis artifact plus `metadata.json` into `out_dir`.
///
/// Output bytes depend only on the inputs, except for the `generated_at`
/// line of the metadata file.
pub fn export_analysis_bundle(
    labels: &[ClassificationLabel],
    rules: &RuleSet,
    taxonomy: &Taxonomy,
    options: &BundleOptions,
    out_dir: impl AsRef<Path>,
) -> Result<ReportBundle, ReportError> {
    let out_dir = out_dir.as_ref();
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ReportError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let fmt = options.format;
    let ext = fmt.extension();
    let no_labels = "no labels";
    let mut files: Vec<(String, String, String, bool)> = Vec::new();
    let mut push = |name: &str, file: String, body: String, empty: bool| {
        files.push((name.to_string(), file, body, empty));
    };

    for (name, attr) in [("one_way_ai", Attribute::Ai), ("one_way_severity", Attribute::Severity)] {
        let file = format!("{name}.{ext}");
        match one_way(labels, attr) {
            Ok(d) => push(name, file, render_distribution(&d, fmt), false),
            Err(_) => push(name, file, empty_artifact(fmt, &["category", "count", "percent"], no_labels), true),
        }
    }

    match two_way(labels, Attribute::Ai, Attribute::Severity) {
        Ok(t) => {
            push("two_way_ai_severity", format!("two_way_ai_severity.{ext}"), render_contingency(&t, fmt), false);
            push("heatmap_ai_severity", "heatmap_ai_severity.csv".into(), render_heatmap_csv(&t), false);
        }
        Err(AnalyzeError::EmptyInput) | Err(_) => {
            let mut header = vec!["AI"];
            header.extend(Attribute::Severity.categories());
            let mut with_total = header.clone();
            with_total.push("Total");
            push(
                "two_way_ai_severity",
                format!("two_way_ai_severity.{ext}"),
                empty_artifact(fmt, &with_total, no_labels),
                true,
            );
            push(
                "heatmap_ai_severity",
                "heatmap_ai_severity.csv".into(),
                empty_artifact(OutputFormat::Csv, &header, no_labels),
                true,
            );
        }
    }

    let freqs = impact_frequencies(labels);
    if freqs.is_empty() {
        push(
            "impact_frequencies",
            format!("impact_frequencies.{ext}"),
            empty_artifact(fmt, &["model", "characteristic", "count"], "no impact paths"),
            true,
        );
    } else {
        push("impact_frequencies", format!("impact_frequencies.{ext}"), render_impacts(&freqs, fmt), false);
    }

    if options.agreement.is_empty() {
        push(
            "agreement",
            format!("agreement.{ext}"),
            empty_artifact(
                fmt,
                &["attribute", "n", "observed", "expected", "kappa"],
                "no annotation session",
            ),
            true,
        );
    } else {
        push("agreement", format!("agreement.{ext}"), render_agreement(&options.agreement, fmt), false);
    }

    for (_, file, body, _) in &files {
        let path = out_dir.join(file);
        fs::write(&path, body).map_err(io_err(&path))?;
    }

    let generated_at = options
        .generated_at
        .unwrap_or_else(Utc::now)
        .to_rfc3339_opts(SecondsFormat::Secs, true);
    let metadata = BundleMetadata {
        dataset: options.dataset_id.clone(),
        label_count: labels.len(),
        rules_version: rules.version.clone(),
        taxonomy_version: taxonomy.version.clone(),
        format: fmt,
        artifacts: files
            .into_iter()
            .map(|(name, file, _, empty)| Artifact { name, file, empty })
            .collect(),
        generated_at,
    };
    let path = out_dir.join("metadata.json");
    fs::write(&path, to_json(&metadata)).map_err(io_err(&path))?;
    Ok(ReportBundle {
        metadata,
        dir: out_dir.to_path_buf(),
    })
}

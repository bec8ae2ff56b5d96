//! One-way distributions, AI × severity contingency tables, the chi-square
//! independence test and impact-characteristic frequencies.

mod chi_square;
mod gamma;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::classify::ClassificationLabel;
use crate::taxonomy::{fold_name, AiAttribute, QualityModel, Severity, UnknownValue};

pub use chi_square::{chi_square_independence, IndependenceTest};
pub use gamma::{chi_square_sf, gamma_q, ln_gamma};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum AnalyzeError {
    #[error("no labels to analyze")]
    EmptyInput,
    #[error("table has fewer than two non-empty rows or columns")]
    DegenerateTable,
    #[error("counts matrix does not match the category lists")]
    ShapeMismatch,
}

/// A label attribute that can be tabulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Attribute {
    #[serde(rename = "AI")]
    Ai,
    Severity,
}

impl Attribute {
    pub fn name(self) -> &'static str {
        match self {
            Attribute::Ai => "AI",
            Attribute::Severity => "Severity",
        }
    }

    /// Canonical order: AI as Data, Learning, Thinking, NotRelated; severity
    /// from Catastrophic down to Low.
    pub fn categories(self) -> Vec<&'static str> {
        match self {
            Attribute::Ai => AiAttribute::CATEGORIES.iter().map(|a| a.name()).collect(),
            Attribute::Severity => Severity::DESCENDING.iter().map(|s| s.name()).collect(),
        }
    }

    /// Index into [`Attribute::categories`]; `None` for unclassified or
    /// missing values.
    fn index_of(self, label: &ClassificationLabel) -> Option<usize> {
        match self {
            Attribute::Ai => AiAttribute::CATEGORIES.iter().position(|&a| a == label.ai),
            Attribute::Severity => {
                let s = label.severity?;
                Severity::DESCENDING.iter().position(|&d| d == s)
            }
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attribute {
    type Err = UnknownValue;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match fold_name(s).as_str() {
            "ai" => Ok(Attribute::Ai),
            "severity" | "sev" => Ok(Attribute::Severity),
            _ => Err(UnknownValue::new("attribute", s)),
        }
    }
}

/// A percentage held as an integer number of hundredths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Percent(u32);

impl Percent {
    /// `100 × count / total`, rounded half-up to two decimals. Zero when
    /// `total` is zero.
    pub fn of(count: u64, total: u64) -> Self {
        if total == 0 {
            return Percent(0);
        }
        let hundredths = (20_000 * u128::from(count) + u128::from(total)) / (2 * u128::from(total));
        Percent(hundredths as u32)
    }

    pub fn from_hundredths(h: u32) -> Self {
        Percent(h)
    }

    pub fn hundredths(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 100.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}%", self.0 / 100, self.0 % 100)
    }
}

impl FromStr for Percent {
    type Err = UnknownValue;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || UnknownValue::new("percent", s);
        let body = s.trim().trim_end_matches('%');
        let (int, frac) = body.split_once('.').unwrap_or((body, "0"));
        if frac.len() > 2 || frac.is_empty() {
            return Err(bad());
        }
        let int: u32 = int.parse().map_err(|_| bad())?;
        let frac: u32 = format!("{frac:0<2}").parse().map_err(|_| bad())?;
        Ok(Percent(int * 100 + frac))
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for Percent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        if !(0.0..=100.0).contains(&v) {
            return Err(serde::de::Error::custom(format!("percent out of range: {v}")));
        }
        Ok(Percent((v * 100.0).round() as u32))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub category: String,
    pub count: u64,
    pub percent: Percent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distribution {
    pub attribute: String,
    pub rows: Vec<DistributionRow>,
    pub total: u64,
    /// Labels left out of `total` (unclassified or without severity).
    pub excluded: u64,
}

impl Distribution {
    pub fn from_counts(
        attribute: impl Into<String>,
        counts: impl IntoIterator<Item = (String, u64)>,
        excluded: u64,
    ) -> Self {
        let counts: Vec<(String, u64)> = counts.into_iter().collect();
        let total = counts.iter().map(|(_, c)| c).sum();
        Self {
            attribute: attribute.into(),
            rows: counts
                .into_iter()
                .map(|(category, count)| DistributionRow {
                    category,
                    count,
                    percent: Percent::of(count, total),
                })
                .collect(),
            total,
            excluded,
        }
    }

    pub fn count(&self, category: &str) -> Option<u64> {
        self.rows.iter().find(|r| r.category == category).map(|r| r.count)
    }
}

pub fn one_way(labels: &[ClassificationLabel], attribute: Attribute) -> Result<Distribution, AnalyzeError> {
    if labels.is_empty() {
        return Err(AnalyzeError::EmptyInput);
    }
    let cats = attribute.categories();
    let mut counts = vec![0u64; cats.len()];
    let mut excluded = 0;
    for l in labels {
        match attribute.index_of(l) {
            Some(i) => counts[i] += 1,
            None => excluded += 1,
        }
    }
    Ok(Distribution::from_counts(
        attribute.name(),
        cats.into_iter().map(str::to_string).zip(counts),
        excluded,
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub row_attribute: String,
    pub col_attribute: String,
    pub row_categories: Vec<String>,
    pub col_categories: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub row_marginals: Vec<u64>,
    pub col_marginals: Vec<u64>,
    pub total: u64,
    /// Labels missing either attribute.
    pub excluded: u64,
}

impl ContingencyTable {
    pub fn from_counts(
        row_attribute: impl Into<String>,
        col_attribute: impl Into<String>,
        row_categories: Vec<String>,
        col_categories: Vec<String>,
        counts: Vec<Vec<u64>>,
    ) -> Result<Self, AnalyzeError> {
        if counts.len() != row_categories.len()
            || counts.iter().any(|r| r.len() != col_categories.len())
        {
            return Err(AnalyzeError::ShapeMismatch);
        }
        let row_marginals: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
        let col_marginals: Vec<u64> = (0..col_categories.len())
            .map(|j| counts.iter().map(|r| r[j]).sum())
            .collect();
        Ok(Self {
            row_attribute: row_attribute.into(),
            col_attribute: col_attribute.into(),
            total: row_marginals.iter().sum(),
            row_categories,
            col_categories,
            counts,
            row_marginals,
            col_marginals,
            excluded: 0,
        })
    }

    /// Table with generic category names, for tests and ad-hoc use.
    pub fn from_matrix(counts: Vec<Vec<u64>>) -> Result<Self, AnalyzeError> {
        let rows = (0..counts.len()).map(|i| format!("r{i}")).collect();
        let cols = (0..counts.first().map_or(0, Vec::len)).map(|j| format!("c{j}")).collect();
        Self::from_counts("row", "col", rows, cols, counts)
    }

    pub fn cell(&self, row: &str, col: &str) -> Option<u64> {
        let i = self.row_categories.iter().position(|c| c == row)?;
        let j = self.col_categories.iter().position(|c| c == col)?;
        Some(self.counts[i][j])
    }
}

pub fn two_way(
    labels: &[ClassificationLabel],
    row: Attribute,
    col: Attribute,
) -> Result<ContingencyTable, AnalyzeError> {
    if labels.is_empty() {
        return Err(AnalyzeError::EmptyInput);
    }
    let rows = row.categories();
    let cols = col.categories();
    let mut counts = vec![vec![0u64; cols.len()]; rows.len()];
    let mut excluded = 0;
    for l in labels {
        match (row.index_of(l), col.index_of(l)) {
            (Some(i), Some(j)) => counts[i][j] += 1,
            _ => excluded += 1,
        }
    }
    let mut t = ContingencyTable::from_counts(
        row.name(),
        col.name(),
        rows.into_iter().map(str::to_string).collect(),
        cols.into_iter().map(str::to_string).collect(),
        counts,
    )?;
    t.excluded = excluded;
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpactFrequency {
    pub model: QualityModel,
    pub characteristic: String,
    pub count: u64,
}

/// Occurrences of each (model, characteristic) at every layer of every
/// impact path, most frequent first.
pub fn impact_frequencies(labels: &[ClassificationLabel]) -> Vec<ImpactFrequency> {
    let mut counts: BTreeMap<(QualityModel, &str), u64> = BTreeMap::new();
    for path in labels.iter().flat_map(|l| &l.impacts) {
        for c in &path.characteristics {
            *counts.entry((path.model, c.as_str())).or_default() += 1;
        }
    }
    let mut out: Vec<ImpactFrequency> = counts
        .into_iter()
        .map(|((model, c), count)| ImpactFrequency {
            model,
            characteristic: c.to_string(),
            count,
        })
        .collect();
    out.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.characteristic.cmp(&b.characteristic))
            .then_with(|| a.model.cmp(&b.model))
    });
    out
}

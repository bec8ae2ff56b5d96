use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::severity::{Criticality, Reversibility, Scope, SeverityMatrix};
use crate::ingest::normalize_label;
use crate::taxonomy::{
    validate_impact_path, AiAttribute, ImpactPath, ImpactPathError, Severity, Taxonomy,
    UnknownValue,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AiRule {
    pub pattern: String,
    pub attribute: AiAttribute,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImpactRule {
    pub pattern: String,
    pub paths: Vec<ImpactPath>,
}

/// Substring fallback used when no exact rule matches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeywordRule {
    pub keyword: String,
    pub attribute: AiAttribute,
}

/// Keyword fallbacks applied when a rule file has no `[keywords]` section.
pub const DEFAULT_KEYWORDS: &[(&str, AiAttribute)] = &[
    ("data", AiAttribute::Data),
    ("dataset", AiAttribute::Data),
    ("tensor shape", AiAttribute::Data),
    ("preprocess", AiAttribute::Data),
    ("epoch", AiAttribute::Learning),
    ("batch", AiAttribute::Learning),
    ("loss", AiAttribute::Learning),
    ("optimiz", AiAttribute::Learning),
    ("train", AiAttribute::Learning),
    ("layer", AiAttribute::Thinking),
    ("architecture", AiAttribute::Thinking),
    ("activation", AiAttribute::Thinking),
    ("inference", AiAttribute::Thinking),
    ("network", AiAttribute::Thinking),
    ("api", AiAttribute::NotRelated),
    ("documentation", AiAttribute::NotRelated),
    ("build", AiAttribute::NotRelated),
];

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("rule file not found: {0}")]
    FileMissing(PathBuf),
    #[error("reading rule file: {0}")]
    Io(#[from] io::Error),
    #[error("rule file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("rule file line {line}: pattern {pattern:?} already has an AI rule")]
    DuplicatePattern { line: usize, pattern: String },
    #[error("rule file line {line}: impact path {path}: {source}")]
    InvalidImpactPath {
        line: usize,
        path: String,
        source: ImpactPathError,
    },
    #[error("severity matrix incomplete: {0}")]
    IncompleteMatrix(String),
}

/// Declarative classification rules. Immutable once loaded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleSet {
    pub version: String,
    ai_rules: Vec<AiRule>,
    impact_rules: Vec<ImpactRule>,
    keyword_rules: Vec<KeywordRule>,
    severity_matrix: SeverityMatrix,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Ai,
    Impact,
    Matrix,
    Keywords,
}

impl RuleSet {
    pub fn load(path: impl AsRef<Path>, taxonomy: &Taxonomy) -> Result<Self, RuleError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => RuleError::FileMissing(path.to_path_buf()),
            _ => RuleError::Io(e),
        })?;
        Self::parse(&text, taxonomy)
    }

    /// Parses a rule file and validates every impact path against `taxonomy`.
    pub fn parse(text: &str, taxonomy: &Taxonomy) -> Result<Self, RuleError> {
        let mut version = None;
        let mut section = Section::None;
        let mut ai_rules = Vec::new();
        let mut impact_rules = Vec::new();
        let mut keyword_rules: Option<Vec<KeywordRule>> = None;
        let mut base = BTreeMap::new();
        let mut shift = BTreeMap::new();
        let mut seen_ai = HashSet::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| RuleError::Parse {
                line: line_no,
                message,
            };
            if let Some(v) = line.strip_prefix("@version") {
                version = Some(v.trim().to_string()).filter(|v| !v.is_empty());
                continue;
            }
            if line.starts_with('[') {
                section = match line {
                    "[ai-rules]" => Section::Ai,
                    "[impact-rules]" => Section::Impact,
                    "[severity-matrix]" => Section::Matrix,
                    "[keywords]" => {
                        keyword_rules.get_or_insert_with(Vec::new);
                        Section::Keywords
                    }
                    other => return Err(err(format!("unknown section {other}"))),
                };
                continue;
            }
            let (lhs, rhs) = line
                .split_once("=>")
                .ok_or_else(|| err("expected `<left> => <right>`".into()))?;
            let (lhs, rhs) = (lhs.trim(), rhs.trim());
            let unknown = |e: UnknownValue| err(e.to_string());
            match section {
                Section::None => return Err(err("rule outside of any section".into())),
                Section::Ai => {
                    let pattern = normalize_label(lhs);
                    if !seen_ai.insert(pattern.clone()) {
                        return Err(RuleError::DuplicatePattern {
                            line: line_no,
                            pattern,
                        });
                    }
                    ai_rules.push(AiRule {
                        pattern,
                        attribute: rhs.parse().map_err(unknown)?,
                    });
                }
                Section::Impact => {
                    let mut paths = Vec::new();
                    for part in rhs.split(';').map(str::trim).filter(|p| !p.is_empty()) {
                        let path: ImpactPath = part.parse().map_err(|e| err(format!("{e}")))?;
                        validate_impact_path(&path, taxonomy).map_err(|source| {
                            RuleError::InvalidImpactPath {
                                line: line_no,
                                path: part.to_string(),
                                source,
                            }
                        })?;
                        paths.push(path);
                    }
                    impact_rules.push(ImpactRule {
                        pattern: normalize_label(lhs),
                        paths,
                    });
                }
                Section::Matrix => {
                    let left: Vec<&str> = lhs.split_whitespace().collect();
                    match left[..] {
                        [r, s] => {
                            let r: Reversibility = r.parse().map_err(unknown)?;
                            let s: Scope = s.parse().map_err(unknown)?;
                            let sev: Severity = rhs.parse().map_err(unknown)?;
                            if base.insert((r, s), sev).is_some() {
                                return Err(err(format!("cell {r} {s} given twice")));
                            }
                        }
                        [c] => {
                            let c: Criticality = c.parse().map_err(unknown)?;
                            let delta: i8 = rhs
                                .trim_start_matches('+')
                                .parse()
                                .ok()
                                .filter(|d: &i8| (-1..=1).contains(d))
                                .ok_or_else(|| err(format!("shift must be +1, 0 or -1, got {rhs}")))?;
                            if shift.insert(c, delta).is_some() {
                                return Err(err(format!("shift for {c} given twice")));
                            }
                        }
                        _ => {
                            return Err(err(
                                "expected `<reversibility> <scope> => <severity>` or `<criticality> => <shift>`".into(),
                            ))
                        }
                    }
                }
                Section::Keywords => {
                    let keyword = normalize_label(lhs);
                    if keyword.is_empty() {
                        return Err(err("empty keyword".into()));
                    }
                    keyword_rules.get_or_insert_with(Vec::new).push(KeywordRule {
                        keyword,
                        attribute: rhs.parse().map_err(unknown)?,
                    });
                }
            }
        }

        let severity_matrix =
            SeverityMatrix::from_parts(&base, &shift).map_err(RuleError::IncompleteMatrix)?;
        Ok(Self {
            version: version.unwrap_or_else(|| "unversioned".into()),
            ai_rules,
            impact_rules,
            keyword_rules: keyword_rules.unwrap_or_else(default_keywords),
            severity_matrix,
        })
    }

    pub fn ai_rules(&self) -> &[AiRule] {
        &self.ai_rules
    }

    pub fn impact_rules(&self) -> &[ImpactRule] {
        &self.impact_rules
    }

    pub fn keyword_rules(&self) -> &[KeywordRule] {
        &self.keyword_rules
    }

    pub fn severity_matrix(&self) -> &SeverityMatrix {
        &self.severity_matrix
    }
}

fn default_keywords() -> Vec<KeywordRule> {
    DEFAULT_KEYWORDS
        .iter()
        .map(|&(k, a)| KeywordRule {
            keyword: k.to_string(),
            attribute: a,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    const MATRIX: &str = "[severity-matrix]
Irreversible Systemic => Catastrophic
Irreversible Localized => Critical
Reversible Systemic => Critical
Reversible Localized => High
Transient Systemic => High
Transient Localized => Medium
SafetyCritical => +1
Enterprise => 0
NonCritical => -1
";

    #[test]
    fn bundled_rules_cover_the_case_study() {
        let rules = bundled::rules();
        assert_eq!(rules.version, "aiodc-paper/1");
        assert_eq!(rules.ai_rules().len(), 17);
        assert_eq!(rules.impact_rules().len(), 17);
        let total: usize = rules.impact_rules().iter().map(|r| r.paths.len()).sum();
        assert_eq!(total, 30);
        for ai in rules.ai_rules() {
            assert!(
                rules.impact_rules().iter().any(|r| r.pattern == ai.pattern),
                "{} has no impact rule",
                ai.pattern
            );
        }
        assert_eq!(rules.severity_matrix(), &SeverityMatrix::default());
        let keywords: Vec<(&str, AiAttribute)> = rules
            .keyword_rules()
            .iter()
            .map(|k| (k.keyword.as_str(), k.attribute))
            .collect();
        assert_eq!(keywords, DEFAULT_KEYWORDS);
    }

    #[test]
    fn keywords_default_when_section_absent() {
        let tax = bundled::taxonomy();
        let rules = RuleSet::parse(MATRIX, &tax).unwrap();
        assert_eq!(rules.keyword_rules().len(), DEFAULT_KEYWORDS.len());
        assert_eq!(rules.version, "unversioned");
        let empty = RuleSet::parse(&format!("{MATRIX}[keywords]\n"), &tax).unwrap();
        assert!(empty.keyword_rules().is_empty());
    }

    #[test]
    fn duplicate_ai_pattern() {
        let text = format!("[ai-rules]\nfoo bar => Data\n  FOO   bar => Learning\n{MATRIX}");
        assert!(matches!(
            RuleSet::parse(&text, &bundled::taxonomy()),
            Err(RuleError::DuplicatePattern { line: 3, .. })
        ));
    }

    #[test]
    fn impact_paths_are_validated() {
        let text = format!("[impact-rules]\nfoo => AI: Accuracy\n{MATRIX}");
        assert!(matches!(
            RuleSet::parse(&text, &bundled::taxonomy()),
            Err(RuleError::InvalidImpactPath {
                line: 2,
                source: ImpactPathError::LayerMismatch { .. },
                ..
            })
        ));
    }

    #[test]
    fn matrix_must_be_total() {
        let partial = MATRIX.replace("Transient Localized => Medium\n", "");
        assert!(matches!(
            RuleSet::parse(&partial, &bundled::taxonomy()),
            Err(RuleError::IncompleteMatrix(_))
        ));
        let no_shift = MATRIX.replace("Enterprise => 0\n", "");
        assert!(matches!(
            RuleSet::parse(&no_shift, &bundled::taxonomy()),
            Err(RuleError::IncompleteMatrix(_))
        ));
        let big_shift = MATRIX.replace("SafetyCritical => +1", "SafetyCritical => +2");
        assert!(matches!(
            RuleSet::parse(&big_shift, &bundled::taxonomy()),
            Err(RuleError::Parse { .. })
        ));
    }

    #[test]
    fn syntax_errors() {
        let tax = bundled::taxonomy();
        for bad in [
            "foo => Data",
            "[ai-rules]\nfoo Data",
            "[ai-rules]\nfoo => Learn",
            "[bogus]",
            "[impact-rules]\nfoo => Trustworthiness",
        ] {
            assert!(matches!(RuleSet::parse(bad, &tax), Err(RuleError::Parse { .. })), "{bad}");
        }
    }
}

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::UnknownValue;

/// Maximum depth of the characteristic hierarchy.
pub const MAX_LAYER: u8 = 3;

/// The quality model an impact path is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum QualityModel {
    /// Quality of the AI itself.
    Ai,
    /// Quality of the AI platform.
    Aip,
}

impl QualityModel {
    pub fn name(self) -> &'static str {
        match self {
            QualityModel::Ai => "AI",
            QualityModel::Aip => "AIP",
        }
    }
}

impl fmt::Display for QualityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QualityModel {
    type Err = UnknownValue;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "AI" => Ok(QualityModel::Ai),
            "AIP" => Ok(QualityModel::Aip),
            _ => Err(UnknownValue::new("quality model", s)),
        }
    }
}

impl From<QualityModel> for String {
    fn from(m: QualityModel) -> String {
        m.name().to_string()
    }
}

impl TryFrom<String> for QualityModel {
    type Error = UnknownValue;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Which quality model(s) a characteristic belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelScope {
    #[serde(rename = "AI")]
    Ai,
    #[serde(rename = "AIP")]
    Aip,
    Shared,
}

impl ModelScope {
    pub fn includes(self, model: QualityModel) -> bool {
        match self {
            ModelScope::Shared => true,
            ModelScope::Ai => model == QualityModel::Ai,
            ModelScope::Aip => model == QualityModel::Aip,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelScope::Ai => "AI",
            ModelScope::Aip => "AIP",
            ModelScope::Shared => "Shared",
        }
    }
}

impl FromStr for ModelScope {
    type Err = UnknownValue;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ai" => Ok(ModelScope::Ai),
            "aip" => Ok(ModelScope::Aip),
            "shared" => Ok(ModelScope::Shared),
            _ => Err(UnknownValue::new("model scope", s)),
        }
    }
}

/// Depth of a characteristic in the hierarchy.
///
/// Shared characteristics may sit at different depths in the two models
/// (Accuracy is top level for the platform but hangs under Trustworthiness for
/// the AI), hence the per-model form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSpec {
    Uniform(u8),
    PerModel { ai: Option<u8>, aip: Option<u8> },
}

impl LayerSpec {
    pub fn layer_in(self, model: QualityModel) -> Option<u8> {
        match self {
            LayerSpec::Uniform(l) => Some(l),
            LayerSpec::PerModel { ai, aip } => match model {
                QualityModel::Ai => ai,
                QualityModel::Aip => aip,
            },
        }
    }

    fn layers(self) -> impl Iterator<Item = u8> {
        let v: Vec<u8> = match self {
            LayerSpec::Uniform(l) => vec![l],
            LayerSpec::PerModel { ai, aip } => ai.into_iter().chain(aip).collect(),
        };
        v.into_iter()
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LayerSpec::Uniform(l) => write!(f, "{l}"),
            LayerSpec::PerModel { ai, aip } => {
                let parts: Vec<String> = [(QualityModel::Ai, ai), (QualityModel::Aip, aip)]
                    .into_iter()
                    .filter_map(|(m, l)| l.map(|l| format!("{m}:{l}")))
                    .collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityCharacteristic {
    pub name: String,
    pub scope: ModelScope,
    pub layer: LayerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("taxonomy file not found: {0}")]
    FileMissing(PathBuf),
    #[error("reading taxonomy: {0}")]
    Io(#[from] io::Error),
    #[error("taxonomy parse error on line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("characteristic {0:?} is defined more than once")]
    DuplicateCharacteristic(String),
    #[error("characteristic {0:?} has an invalid layer")]
    BadLayer(String),
}

/// An immutable set of quality characteristics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub version: String,
    characteristics: Vec<QualityCharacteristic>,
}

impl Taxonomy {
    pub fn new(
        version: impl Into<String>,
        characteristics: Vec<QualityCharacteristic>,
    ) -> Result<Self, TaxonomyError> {
        let mut seen = HashSet::new();
        for c in &characteristics {
            if !seen.insert(c.name.as_str()) {
                return Err(TaxonomyError::DuplicateCharacteristic(c.name.clone()));
            }
            check_layer(c)?;
        }
        Ok(Self {
            version: version.into(),
            characteristics,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TaxonomyError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => TaxonomyError::FileMissing(path.to_path_buf()),
            _ => TaxonomyError::Io(e),
        })?;
        Self::parse(&text)
    }

    /// Parses the line-oriented taxonomy format.
    ///
    /// ```text
    /// @version <text>
    /// <name> <AI|AIP|Shared> <layer> [comment...]
    /// ```
    ///
    /// `<layer>` is `1`..`3` or a list such as `AI:2,AIP:1`. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self, TaxonomyError> {
        let mut version = None;
        let mut characteristics = Vec::new();
        let mut last_line = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            last_line = line_no;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("@version") {
                let v = rest.trim();
                if v.is_empty() {
                    return Err(parse_err(line_no, "empty @version directive"));
                }
                version = Some(v.to_string());
                continue;
            }
            if line.starts_with('@') {
                return Err(parse_err(line_no, format!("unknown directive {line:?}")));
            }
            let (name, rest) = split_token(line);
            let (scope, rest) = split_token(rest);
            let (layer, rest) = split_token(rest);
            if scope.is_empty() || layer.is_empty() {
                return Err(parse_err(line_no, "expected <name> <model> <layer>"));
            }
            let scope: ModelScope = scope
                .parse()
                .map_err(|e: UnknownValue| parse_err(line_no, e.to_string()))?;
            let layer =
                parse_layer(layer).ok_or_else(|| TaxonomyError::BadLayer(name.to_string()))?;
            let comment = Some(rest.trim()).filter(|c| !c.is_empty()).map(String::from);
            characteristics.push(QualityCharacteristic {
                name: name.to_string(),
                scope,
                layer,
                comment,
            });
        }
        if characteristics.is_empty() {
            return Err(parse_err(last_line.max(1), "no characteristics defined"));
        }
        Self::new(version.unwrap_or_else(|| "unversioned".into()), characteristics)
    }

    /// Renders the taxonomy back into its file format.
    pub fn render(&self) -> String {
        let mut out = format!("@version {}\n", self.version);
        for c in &self.characteristics {
            let mut line = format!("{} {} {}", c.name, c.scope.name(), c.layer);
            if let Some(comment) = &c.comment {
                line.push(' ');
                line.push_str(comment);
            }
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn get(&self, name: &str) -> Option<&QualityCharacteristic> {
        self.characteristics.iter().find(|c| c.name == name)
    }

    pub fn characteristics(&self) -> &[QualityCharacteristic] {
        &self.characteristics
    }

    pub fn len(&self) -> usize {
        self.characteristics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.characteristics.is_empty()
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> TaxonomyError {
    TaxonomyError::ParseError {
        line,
        message: message.into(),
    }
}

fn split_token(s: &str) -> (&str, &str) {
    let s = s.trim_start();
    match s.find(char::is_whitespace) {
        Some(i) => (&s[..i], &s[i..]),
        None => (s, ""),
    }
}

fn parse_layer(s: &str) -> Option<LayerSpec> {
    if !s.contains(':') {
        return s.parse().ok().map(LayerSpec::Uniform);
    }
    let (mut ai, mut aip) = (None, None);
    for part in s.split(',') {
        let (model, layer) = part.split_once(':')?;
        let layer: u8 = layer.trim().parse().ok()?;
        let slot = match model.parse::<QualityModel>().ok()? {
            QualityModel::Ai => &mut ai,
            QualityModel::Aip => &mut aip,
        };
        if slot.replace(layer).is_some() {
            return None;
        }
    }
    Some(LayerSpec::PerModel { ai, aip })
}

fn check_layer(c: &QualityCharacteristic) -> Result<(), TaxonomyError> {
    let bad = || TaxonomyError::BadLayer(c.name.clone());
    if c.layer.layers().any(|l| !(1..=MAX_LAYER).contains(&l)) {
        return Err(bad());
    }
    if let LayerSpec::PerModel { ai, aip } = c.layer {
        let ok = match c.scope {
            ModelScope::Ai => aip.is_none() && ai.is_some(),
            ModelScope::Aip => ai.is_none() && aip.is_some(),
            ModelScope::Shared => ai.is_some() && aip.is_some(),
        };
        if !ok {
            return Err(bad());
        }
    }
    Ok(())
}

/// An ordered chain of degraded characteristics, layer 1 first.
///
/// Deeper layers that do not apply are simply absent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ImpactPath {
    pub model: QualityModel,
    pub characteristics: Vec<String>,
}

impl ImpactPath {
    pub fn new<S: Into<String>>(model: QualityModel, characteristics: impl IntoIterator<Item = S>) -> Self {
        Self {
            model,
            characteristics: characteristics.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for ImpactPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.model, self.characteristics.join(" > "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed impact path {0:?}; expected \"<AI|AIP>: A > B > C\"")]
pub struct MalformedPath(pub String);

impl FromStr for ImpactPath {
    type Err = MalformedPath;

    /// Parses `AI: Trustworthiness > Accuracy`. Trailing `=` cells are
    /// accepted and dropped.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || MalformedPath(s.to_string());
        let (model, rest) = s.split_once(':').ok_or_else(malformed)?;
        let model: QualityModel = model.parse().map_err(|_| malformed())?;
        let mut names: Vec<String> = Vec::new();
        let mut truncated = false;
        for part in rest.split('>') {
            let part = part.trim();
            if part == "=" {
                truncated = true;
                continue;
            }
            if part.is_empty() && rest.trim().is_empty() {
                break;
            }
            if part.is_empty() || truncated || part.contains(char::is_whitespace) {
                return Err(malformed());
            }
            names.push(part.to_string());
        }
        Ok(ImpactPath {
            model,
            characteristics: names,
        })
    }
}

impl Serialize for ImpactPath {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ImpactPath {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImpactPathError {
    #[error("impact path is empty")]
    EmptyPath,
    #[error("impact path has {0} characteristics; at most 3 are allowed")]
    TooLong(usize),
    #[error("unknown characteristic {name:?} at position {position}")]
    UnknownCharacteristic { position: usize, name: String },
    #[error("characteristic {name:?} does not belong to the {model} model")]
    ModelMismatch { name: String, model: QualityModel },
    #[error("characteristic {name:?} is at layer {actual} in the {model} model but appears at position {position}")]
    LayerMismatch {
        position: usize,
        name: String,
        model: QualityModel,
        actual: u8,
    },
}

/// Checks an impact path against a taxonomy, reporting the first violation.
///
/// Positions are 1-based so they read as layer numbers.
pub fn validate_impact_path(path: &ImpactPath, tax: &Taxonomy) -> Result<(), ImpactPathError> {
    if path.characteristics.is_empty() {
        return Err(ImpactPathError::EmptyPath);
    }
    if path.characteristics.len() > MAX_LAYER as usize {
        return Err(ImpactPathError::TooLong(path.characteristics.len()));
    }
    for (i, name) in path.characteristics.iter().enumerate() {
        let position = i + 1;
        let c = tax
            .get(name)
            .ok_or_else(|| ImpactPathError::UnknownCharacteristic {
                position,
                name: name.clone(),
            })?;
        if !c.scope.includes(path.model) {
            return Err(ImpactPathError::ModelMismatch {
                name: name.clone(),
                model: path.model,
            });
        }
        let actual = c.layer.layer_in(path.model).ok_or_else(|| ImpactPathError::ModelMismatch {
            name: name.clone(),
            model: path.model,
        })?;
        if actual as usize != position {
            return Err(ImpactPathError::LayerMismatch {
                position,
                name: name.clone(),
                model: path.model,
                actual,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    fn path(model: QualityModel, names: &[&str]) -> ImpactPath {
        ImpactPath::new(model, names.iter().copied())
    }

    #[test]
    fn bundled_taxonomy_loads() {
        let tax = bundled::taxonomy();
        assert!(tax.len() >= 10);
        let t = tax.get("Trustworthiness").unwrap();
        assert_eq!(t.scope, ModelScope::Ai);
        assert_eq!(t.layer.layer_in(QualityModel::Ai), Some(1));
        let a = tax.get("Accuracy").unwrap();
        assert_eq!(a.scope, ModelScope::Shared);
        assert_eq!(a.layer.layer_in(QualityModel::Ai), Some(2));
        assert_eq!(a.layer.layer_in(QualityModel::Aip), Some(1));
        for name in [
            "Maintainability",
            "Reliability",
            "Security",
            "Integrity",
            "Accuracy",
            "Trustworthiness",
            "Robustness",
            "Effectiveness",
            "Explainability",
            "Completeness",
        ] {
            assert!(tax.get(name).is_some(), "{name} missing");
        }
        assert_eq!(tax.get("Completeness").unwrap().scope, ModelScope::Ai);
    }

    #[test]
    fn empty_file_is_parse_error() {
        assert!(matches!(Taxonomy::parse(""), Err(TaxonomyError::ParseError { .. })));
        assert!(matches!(
            Taxonomy::parse("# only comments\n\n"),
            Err(TaxonomyError::ParseError { .. })
        ));
    }

    #[test]
    fn duplicate_names_rejected() {
        let text = "Accuracy Shared 1\nAccuracy AI 2\n";
        match Taxonomy::parse(text) {
            Err(TaxonomyError::DuplicateCharacteristic(n)) => assert_eq!(n, "Accuracy"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_layers_rejected() {
        for text in [
            "Foo AI 4",
            "Foo AI 0",
            "Foo AI x",
            "Foo AI AIP:1",
            "Foo Shared AI:1",
            "Foo AI AI:1,AI:2",
        ] {
            assert!(
                matches!(Taxonomy::parse(text), Err(TaxonomyError::BadLayer(ref n)) if n == "Foo"),
                "{text}"
            );
        }
    }

    #[test]
    fn malformed_lines_report_line_number() {
        let text = "# header\nGood AI 1\nBad\n";
        match Taxonomy::parse(text) {
            Err(TaxonomyError::ParseError { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            Taxonomy::parse("Foo Alien 1"),
            Err(TaxonomyError::ParseError { line: 1, .. })
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            Taxonomy::load("/definitely/not/here.taxonomy"),
            Err(TaxonomyError::FileMissing(_))
        ));
    }

    #[test]
    fn validate_examples() {
        let tax = bundled::taxonomy();
        assert_eq!(
            validate_impact_path(&path(QualityModel::Aip, &["Maintainability"]), &tax),
            Ok(())
        );
        assert_eq!(
            validate_impact_path(&path(QualityModel::Ai, &[]), &tax),
            Err(ImpactPathError::EmptyPath)
        );
        assert!(matches!(
            validate_impact_path(&path(QualityModel::Ai, &["Accuracy", "Trustworthiness"]), &tax),
            Err(ImpactPathError::LayerMismatch { position: 1, ref name, actual: 2, .. }) if name == "Accuracy"
        ));
        assert!(matches!(
            validate_impact_path(&path(QualityModel::Ai, &["Maintainability"]), &tax),
            Err(ImpactPathError::ModelMismatch { .. })
        ));
        assert!(matches!(
            validate_impact_path(&path(QualityModel::Ai, &["Usability"]), &tax),
            Err(ImpactPathError::UnknownCharacteristic { position: 1, .. })
        ));
        assert!(matches!(
            validate_impact_path(
                &path(QualityModel::Ai, &["Trustworthiness", "Accuracy", "Accuracy", "Accuracy"]),
                &tax
            ),
            Err(ImpactPathError::TooLong(4))
        ));
        assert_eq!(
            validate_impact_path(&path(QualityModel::Ai, &["Explainability", "Completeness"]), &tax),
            Ok(())
        );
        // Completeness is read as AI-only.
        assert!(validate_impact_path(&path(QualityModel::Aip, &["Completeness"]), &tax).is_err());
    }

    #[test]
    fn impact_path_text_form() {
        let p: ImpactPath = "AI: Security > Integrity > =".parse().unwrap();
        assert_eq!(p, path(QualityModel::Ai, &["Security", "Integrity"]));
        assert_eq!(p.to_string(), "AI: Security > Integrity");
        assert_eq!("AIP:Accuracy".parse::<ImpactPath>().unwrap().characteristics, ["Accuracy"]);
        assert!("Accuracy".parse::<ImpactPath>().is_err());
        assert!("XX: Accuracy".parse::<ImpactPath>().is_err());
        assert!("AI: = > Accuracy".parse::<ImpactPath>().is_err());
        assert!("AI: Trust worthiness".parse::<ImpactPath>().is_err());
        assert!("AI: ".parse::<ImpactPath>().unwrap().characteristics.is_empty());
    }

    #[test]
    fn accepted_paths_survive_taxonomy_round_trip() {
        let tax = bundled::taxonomy();
        let reparsed = Taxonomy::parse(&tax.render()).unwrap();
        assert_eq!(reparsed, tax);
        let rules = bundled::rules();
        for rule in rules.impact_rules() {
            for p in &rule.paths {
                assert_eq!(validate_impact_path(p, &reparsed), Ok(()), "{p}");
            }
        }
    }
}

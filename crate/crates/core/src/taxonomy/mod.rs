//! The classification attribute universe.

mod quality;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use quality::{
    validate_impact_path, ImpactPath, ImpactPathError, LayerSpec, ModelScope,
    QualityCharacteristic, QualityModel, Taxonomy, TaxonomyError,
};

/// A value that did not name any member of the attribute it was parsed as.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {kind} value {value:?}")]
pub struct UnknownValue {
    pub kind: &'static str,
    pub value: String,
}

impl UnknownValue {
    pub(crate) fn new(kind: &'static str, value: &str) -> Self {
        Self {
            kind,
            value: value.to_string(),
        }
    }
}

/// Lowercases `s` and drops spaces, dashes and underscores so that
/// `Not Related`, `not-related` and `NotRelated` compare equal.
pub(crate) fn fold_name(s: &str) -> String {
    s.chars()
        .filter(|c| !matches!(c, ' ' | '-' | '_'))
        .flat_map(char::to_lowercase)
        .collect()
}

/// Which part of an AI system a defect originates in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum AiAttribute {
    Data,
    Learning,
    Thinking,
    NotRelated,
    /// No rule matched; the defect needs a human label.
    Unclassified,
}

impl AiAttribute {
    /// The four categories that count in distributions, in canonical order.
    pub const CATEGORIES: [AiAttribute; 4] = [
        AiAttribute::Data,
        AiAttribute::Learning,
        AiAttribute::Thinking,
        AiAttribute::NotRelated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AiAttribute::Data => "Data",
            AiAttribute::Learning => "Learning",
            AiAttribute::Thinking => "Thinking",
            AiAttribute::NotRelated => "NotRelated",
            AiAttribute::Unclassified => "Unclassified",
        }
    }

    /// Rubric text shown to annotators.
    pub fn description(self) -> &'static str {
        match self {
            AiAttribute::Data => "Issues with training / testing data.",
            AiAttribute::Learning => "Faults in the AI model training process.",
            AiAttribute::Thinking => "Faults in inference, logic, or decision making.",
            AiAttribute::NotRelated => "Defects unrelated to AI logic or behavior.",
            AiAttribute::Unclassified => "Not yet classified; routed to human annotation.",
        }
    }

    pub fn is_classified(self) -> bool {
        self != AiAttribute::Unclassified
    }
}

impl fmt::Display for AiAttribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AiAttribute {
    type Err = UnknownValue;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match fold_name(s.trim()).as_str() {
            "data" => Ok(AiAttribute::Data),
            "learning" => Ok(AiAttribute::Learning),
            "thinking" => Ok(AiAttribute::Thinking),
            "notrelated" => Ok(AiAttribute::NotRelated),
            "unclassified" => Ok(AiAttribute::Unclassified),
            _ => Err(UnknownValue::new("AI attribute", s)),
        }
    }
}

impl From<AiAttribute> for String {
    fn from(a: AiAttribute) -> String {
        a.name().to_string()
    }
}

impl TryFrom<String> for AiAttribute {
    type Error = UnknownValue;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Five-tier severity. The derived ordering follows the rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Severity {
    Low = 1,
    Medium = 2,
    High = 3,
    Critical = 4,
    Catastrophic = 5,
}

impl Severity {
    /// Report order: most severe first.
    pub const DESCENDING: [Severity; 5] = [
        Severity::Catastrophic,
        Severity::Critical,
        Severity::High,
        Severity::Medium,
        Severity::Low,
    ];

    pub fn rank(self) -> u8 {
        self as u8
    }

    pub fn from_rank(rank: u8) -> Option<Severity> {
        match rank {
            1 => Some(Severity::Low),
            2 => Some(Severity::Medium),
            3 => Some(Severity::High),
            4 => Some(Severity::Critical),
            5 => Some(Severity::Catastrophic),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Severity::Low => "Low",
            Severity::Medium => "Medium",
            Severity::High => "High",
            Severity::Critical => "Critical",
            Severity::Catastrophic => "Catastrophic",
        }
    }
}

/// Free-function form of [`Severity::rank`].
pub fn severity_rank(s: Severity) -> u8 {
    s.rank()
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Severity {
    type Err = UnknownValue;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" => Ok(Severity::Low),
            "medium" => Ok(Severity::Medium),
            "high" => Ok(Severity::High),
            "critical" => Ok(Severity::Critical),
            "catastrophic" => Ok(Severity::Catastrophic),
            _ => Err(UnknownValue::new("severity", s)),
        }
    }
}

impl From<Severity> for String {
    fn from(s: Severity) -> String {
        s.name().to_string()
    }
}

impl TryFrom<String> for Severity {
    type Error = UnknownValue;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// ODC defect types: the eight original types plus the two cloud extensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum OdcDefectType {
    Function,
    Interface,
    Checking,
    Assignment,
    TimingSerialization,
    BuildPackageMerge,
    Documentation,
    Algorithm,
    Isolation,
    IaasPaas,
}

impl OdcDefectType {
    pub const ALL: [OdcDefectType; 10] = [
        OdcDefectType::Function,
        OdcDefectType::Interface,
        OdcDefectType::Checking,
        OdcDefectType::Assignment,
        OdcDefectType::TimingSerialization,
        OdcDefectType::BuildPackageMerge,
        OdcDefectType::Documentation,
        OdcDefectType::Algorithm,
        OdcDefectType::Isolation,
        OdcDefectType::IaasPaas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OdcDefectType::Function => "Function",
            OdcDefectType::Interface => "Interface",
            OdcDefectType::Checking => "Checking",
            OdcDefectType::Assignment => "Assignment",
            OdcDefectType::TimingSerialization => "TimingSerialization",
            OdcDefectType::BuildPackageMerge => "BuildPackageMerge",
            OdcDefectType::Documentation => "Documentation",
            OdcDefectType::Algorithm => "Algorithm",
            OdcDefectType::Isolation => "Isolation",
            OdcDefectType::IaasPaas => "IaaSPaaS",
        }
    }

    /// True for the types added by the cloud variant of ODC.
    pub fn is_cloud_extension(self) -> bool {
        matches!(self, OdcDefectType::Isolation | OdcDefectType::IaasPaas)
    }
}

impl fmt::Display for OdcDefectType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OdcDefectType {
    type Err = UnknownValue;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        // accepts "Timing/Serialization", "build-package-merge", "IaaS/PaaS", ...
        let folded: String = fold_name(s.trim()).replace('/', "");
        OdcDefectType::ALL
            .into_iter()
            .find(|t| t.name().to_ascii_lowercase() == folded)
            .ok_or_else(|| UnknownValue::new("ODC defect type", s))
    }
}

impl From<OdcDefectType> for String {
    fn from(t: OdcDefectType) -> String {
        t.name().to_string()
    }
}

impl TryFrom<String> for OdcDefectType {
    type Error = UnknownValue;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// The ODC attributes carried through classification as metadata.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OdcAttributes {
    pub defect_type: Option<OdcDefectType>,
    pub trigger: Option<String>,
    pub phase_found: Option<String>,
}

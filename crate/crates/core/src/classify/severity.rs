use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{fold_name, Severity, UnknownValue};

macro_rules! factor_enum {
    ($(#[$m:meta])* $name:ident, $kind:literal { $($variant:ident),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self { $($name::$variant => stringify!($variant)),+ }
            }

            fn index(self) -> usize {
                self as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = UnknownValue;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let folded = fold_name(s.trim());
                Self::ALL
                    .iter()
                    .copied()
                    .find(|v| v.name().to_ascii_lowercase() == folded)
                    .ok_or_else(|| UnknownValue::new($kind, s))
            }
        }
    };
}

factor_enum!(
    /// How much harm the host application can do. Ordered from least to most
    /// critical.
    Criticality, "criticality" { NonCritical, Enterprise, SafetyCritical }
);
factor_enum!(
    /// Whether the harm caused by a failure can be undone.
    Reversibility, "reversibility" { Irreversible, Reversible, Transient }
);
factor_enum!(
    /// How far a failure spreads.
    Scope, "scope" { Systemic, Localized }
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeverityContext {
    pub criticality: Criticality,
    pub reversibility: Reversibility,
    pub scope: Scope,
}

impl SeverityContext {
    pub fn new(criticality: Criticality, reversibility: Reversibility, scope: Scope) -> Self {
        Self {
            criticality,
            reversibility,
            scope,
        }
    }

    /// All 18 factor combinations.
    pub fn all() -> impl Iterator<Item = SeverityContext> {
        Criticality::ALL.iter().flat_map(|&c| {
            Reversibility::ALL
                .iter()
                .flat_map(move |&r| Scope::ALL.iter().map(move |&s| SeverityContext::new(c, r, s)))
        })
    }
}

/// Base severity per (reversibility, scope) cell, shifted by criticality and
/// clamped to the scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeverityMatrix {
    base: [[Severity; 2]; 3],
    shift: [i8; 3],
}

impl Default for SeverityMatrix {
    fn default() -> Self {
        use Severity::*;
        Self {
            // rows: Irreversible, Reversible, Transient; cols: Systemic, Localized
            base: [[Catastrophic, Critical], [Critical, High], [High, Medium]],
            // NonCritical, Enterprise, SafetyCritical
            shift: [-1, 0, 1],
        }
    }
}

impl SeverityMatrix {
    pub fn base(&self, reversibility: Reversibility, scope: Scope) -> Severity {
        self.base[reversibility.index()][scope.index()]
    }

    pub fn shift(&self, criticality: Criticality) -> i8 {
        self.shift[criticality.index()]
    }

    pub fn assign(&self, ctx: &SeverityContext) -> Severity {
        let rank = self.base(ctx.reversibility, ctx.scope).rank() as i8 + self.shift(ctx.criticality);
        Severity::from_rank(rank.clamp(1, 5) as u8).expect("clamped rank is on the scale")
    }

    /// Builds a matrix from explicit cells; every cell and level must be given.
    pub(crate) fn from_parts(
        base: &BTreeMap<(Reversibility, Scope), Severity>,
        shift: &BTreeMap<Criticality, i8>,
    ) -> Result<Self, String> {
        let mut m = SeverityMatrix::default();
        for &r in Reversibility::ALL {
            for &s in Scope::ALL {
                m.base[r.index()][s.index()] = *base
                    .get(&(r, s))
                    .ok_or_else(|| format!("missing cell {r} {s}"))?;
            }
        }
        for &c in Criticality::ALL {
            m.shift[c.index()] = *shift
                .get(&c)
                .ok_or_else(|| format!("missing criticality shift for {c}"))?;
        }
        Ok(m)
    }
}

pub fn assign_severity(ctx: &SeverityContext, matrix: &SeverityMatrix) -> Severity {
    matrix.assign(ctx)
}

#[derive(Debug, Error)]
pub enum ContextError {
    #[error("context file not found: {0}")]
    FileMissing(std::path::PathBuf),
    #[error("reading context file: {0}")]
    Io(#[from] io::Error),
    #[error("context file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("context for {0:?} given twice")]
    DuplicateId(String),
}

/// Parses `<id> <criticality> <reversibility> <scope>` lines.
pub fn parse_contexts(text: &str) -> Result<BTreeMap<String, SeverityContext>, ContextError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse = |message: String| ContextError::Parse {
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [id, c, r, s] = fields[..] else {
            return Err(parse(format!(
                "expected 4 fields, found {}",
                fields.len()
            )));
        };
        let ctx = SeverityContext {
            criticality: c.parse().map_err(|e: UnknownValue| parse(e.to_string()))?,
            reversibility: r.parse().map_err(|e: UnknownValue| parse(e.to_string()))?,
            scope: s.parse().map_err(|e: UnknownValue| parse(e.to_string()))?,
        };
        if out.insert(id.to_string(), ctx).is_some() {
            return Err(ContextError::DuplicateId(id.to_string()));
        }
    }
    Ok(out)
}

pub fn load_contexts(
    path: impl AsRef<Path>,
) -> Result<BTreeMap<String, SeverityContext>, ContextError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => ContextError::FileMissing(path.to_path_buf()),
        _ => ContextError::Io(e),
    })?;
    parse_contexts(&text)
}

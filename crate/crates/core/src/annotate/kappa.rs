use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum KappaError {
    #[error("no item was labeled by both annotators")]
    NoOverlap,
    #[error("chance agreement is 1; kappa is undefined")]
    DegenerateMarginals,
}

/// Components of Cohen's kappa for one pair of raters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    pub n: usize,
    pub observed: f64,
    pub expected: f64,
    pub kappa: f64,
}

/// Cohen's kappa over paired categorical ratings.
///
/// `p_o` is the fraction of equal pairs and `p_e = Σ_c p_a(c) · p_b(c)` from
/// the two raters' marginal frequencies.
pub fn cohen_kappa<T: Ord>(pairs: &[(T, T)]) -> Result<Kappa, KappaError> {
    let n = pairs.len();
    if n == 0 {
        return Err(KappaError::NoOverlap);
    }
    let mut marginals: BTreeMap<&T, (u64, u64)> = BTreeMap::new();
    let mut agree = 0u64;
    for (a, b) in pairs {
        marginals.entry(a).or_default().0 += 1;
        marginals.entry(b).or_default().1 += 1;
        if a == b {
            agree += 1;
        }
    }
    let n2 = (n as u64) * (n as u64);
    let chance: u64 = marginals.values().map(|(a, b)| a * b).sum();
    if chance == n2 {
        return Err(KappaError::DegenerateMarginals);
    }
    let observed = agree as f64 / n as f64;
    let expected = chance as f64 / n2 as f64;
    Ok(Kappa {
        n,
        observed,
        expected,
        kappa: (observed - expected) / (1.0 - expected),
    })
}

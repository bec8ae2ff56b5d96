use serde::{Deserialize, Serialize};

use super::{gamma::chi_square_sf, AnalyzeError, ContingencyTable};

/// Smallest expected count at which the chi-square approximation is usually
/// trusted.
pub const MIN_EXPECTED: f64 = 5.0;

/// Pearson chi-square test of independence over a table's non-empty rows and
/// columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceTest {
    pub statistic: f64,
    pub dof: u32,
    pub p_value: f64,
    /// Categories kept after dropping all-zero rows and columns.
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub expected: Vec<Vec<f64>>,
    /// Some expected cell is below [`MIN_EXPECTED`].
    pub low_expected: bool,
}

/// No continuity correction is applied, even for 2×2 tables.
pub fn chi_square_independence(table: &ContingencyTable) -> Result<IndependenceTest, AnalyzeError> {
    let rows: Vec<usize> = (0..table.row_categories.len())
        .filter(|&i| table.row_marginals[i] > 0)
        .collect();
    let cols: Vec<usize> = (0..table.col_categories.len())
        .filter(|&j| table.col_marginals[j] > 0)
        .collect();
    if rows.len() < 2 || cols.len() < 2 {
        return Err(AnalyzeError::DegenerateTable);
    }
    let total = table.total as f64;
    let mut statistic = 0.0;
    let mut low_expected = false;
    let expected: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| {
            cols.iter()
                .map(|&j| {
                    let e = table.row_marginals[i] as f64 * table.col_marginals[j] as f64 / total;
                    let diff = table.counts[i][j] as f64 - e;
                    statistic += diff * diff / e;
                    low_expected |= e < MIN_EXPECTED;
                    e
                })
                .collect()
        })
        .collect();
    let dof = ((rows.len() - 1) * (cols.len() - 1)) as u32;
    Ok(IndependenceTest {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
        rows: rows.iter().map(|&i| table.row_categories[i].clone()).collect(),
        cols: cols.iter().map(|&j| table.col_categories[j].clone()).collect(),
        expected,
        low_expected,
    })
}

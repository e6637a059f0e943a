//! Observation storage shared by all model families.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// The three supported model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    /// Piecewise-constant sparse mean vector.
    Mean,
    /// Piecewise-constant sparse regression coefficients with response y.
    Regression,
    /// Piecewise-constant precision matrix of centered Gaussian observations.
    Graphical,
}

impl std::fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelFamily::Mean => "mean",
            ModelFamily::Regression => "regression",
            ModelFamily::Graphical => "graphical",
        };
        f.write_str(s)
    }
}

/// An n-by-p observation matrix, optional response, and family tag.
///
/// Rows are stored row-major; row `i` (0-based) is observation position `i+1`
/// in the 1-based interval convention of [`crate::segment`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    xs: Vec<f64>,
    ys: Option<Vec<f64>>,
    family: ModelFamily,
}

impl Dataset {
    /// Builds a dataset from row-major values, checking shape and finiteness.
    ///
    /// # Errors
    /// Shape mismatches and non-finite cells are rejected; regression data
    /// must supply `ys` of length `n`.
    pub fn new(
        xs: Vec<f64>,
        n: usize,
        p: usize,
        ys: Option<Vec<f64>>,
        family: ModelFamily,
    ) -> Result<Self> {
        if n == 0 || p == 0 || xs.len() != n * p {
            return Err(Error::InfeasibleConfig(format!(
                "data shape {} does not match n = {n}, p = {p}",
                xs.len()
            )));
        }
        if let Some(pos) = xs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / p,
                col: pos % p,
            });
        }
        match (&ys, family) {
            (None, ModelFamily::Regression) => return Err(Error::MissingResponse),
            (Some(y), _) => {
                if y.len() != n {
                    return Err(Error::InfeasibleConfig(format!(
                        "response length {} does not match n = {n}",
                        y.len()
                    )));
                }
                if let Some(row) = y.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { row, col: p });
                }
            }
            (None, _) => {}
        }
        Ok(Self {
            n,
            p,
            xs,
            ys,
            family,
        })
    }

    #[must_use]
    pub fn n(&self) -> usize {
        self.n
    }

    #[must_use]
    pub fn p(&self) -> usize {
        self.p
    }

    #[must_use]
    pub fn family(&self) -> ModelFamily {
        self.family
    }

    /// Row `i` as a slice of length p.
    #[must_use]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.xs[i * self.p..(i + 1) * self.p]
    }

    /// Full row-major storage.
    #[must_use]
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    #[must_use]
    pub fn ys(&self) -> Option<&[f64]> {
        self.ys.as_deref()
    }

    /// Rows at the given positions, in order, as a new dataset (same family).
    ///
    /// Used by the odd/even cross-validation split.
    #[must_use]
    pub fn take_rows(&self, rows: &[usize]) -> Dataset {
        let mut xs = Vec::with_capacity(rows.len() * self.p);
        for &r in rows {
            xs.extend_from_slice(self.row(r));
        }
        let ys = self
            .ys
            .as_ref()
            .map(|y| rows.iter().map(|&r| y[r]).collect());
        Dataset {
            n: rows.len(),
            p: self.p,
            xs,
            ys,
            family: self.family,
        }
    }
}

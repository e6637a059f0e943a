//! Candidate breakpoint grids for the divide step.

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How the interior grid nodes are chosen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GridSpec {
    /// `Q` equispaced nodes `floor(i * n / (Q + 1))`, `i = 1..Q`.
    Uniform { q: usize },
    /// `Q` nodes drawn without replacement from `{1, .., n-1}`; deterministic
    /// given `seed`.
    Random { q: usize, seed: u64 },
    /// Caller-provided node locations, each strictly inside `(0, n)`.
    Explicit { points: Vec<usize> },
}

impl GridSpec {
    /// Interior node count requested (before deduplication).
    #[must_use]
    pub fn q(&self) -> usize {
        match self {
            GridSpec::Uniform { q } | GridSpec::Random { q, .. } => *q,
            GridSpec::Explicit { points } => points.len(),
        }
    }
}

/// Resolves `spec` to sorted, deduplicated interior nodes in `(0, n)`.
///
/// # Errors
/// `InvalidGrid` when `Q >= n` or an explicit point lies outside `(0, n)`.
pub fn resolve_grid(spec: &GridSpec, n: usize) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::InvalidGrid(format!("series length {n} < 2")));
    }
    match spec {
        GridSpec::Uniform { q } => {
            if *q >= n {
                return Err(Error::InvalidGrid(format!("Q = {q} >= n = {n}")));
            }
            let mut nodes: Vec<usize> = (1..=*q).map(|i| i * n / (q + 1)).collect();
            nodes.retain(|&s| s > 0);
            nodes.dedup();
            Ok(nodes)
        }
        GridSpec::Random { q, seed } => {
            if *q >= n {
                return Err(Error::InvalidGrid(format!("Q = {q} >= n = {n}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            // Draw q of the n-1 interior positions without replacement.
            let mut nodes: Vec<usize> = rand::seq::index::sample(&mut rng, n - 1, *q)
                .into_iter()
                .map(|i| i + 1)
                .collect();
            nodes.sort_unstable();
            Ok(nodes)
        }
        GridSpec::Explicit { points } => {
            let mut nodes = points.clone();
            nodes.sort_unstable();
            nodes.dedup();
            if let Some(&bad) = nodes.iter().find(|&&s| s == 0 || s >= n) {
                return Err(Error::InvalidGrid(format!(
                    "explicit point {bad} outside (0, {n})"
                )));
            }
            Ok(nodes)
        }
    }
}

/// Default interior node count `min(n - 1, ceil((4n / delta_min_hint) * ln^2 n))`.
///
/// `delta_min_hint` is the caller's guess at the minimal spacing between true
/// change points; smaller hints buy denser grids.
#[must_use]
pub fn default_grid_size(n: usize, delta_min_hint: usize) -> usize {
    assert!(n >= 2, "series length must be >= 2");
    assert!(
        (1..=n).contains(&delta_min_hint),
        "delta_min_hint must lie in 1..=n"
    );
    let ln = (n as f64).ln();
    let q = (4.0 * n as f64 / delta_min_hint as f64 * ln * ln).ceil();
    (n - 1).min(q as usize)
}

//! Index intervals, change point sets, and the Hausdorff evaluation metric.
//!
//! Throughout the crate an interval `(s, e]` refers to 1-based observation
//! positions `s+1 ..= e`, which occupy 0-based storage rows `s .. e`. A change
//! point `eta` is the last index of its left segment: the induced partition of
//! `(0, n]` is `(eta_0, eta_1], ..., (eta_K, eta_{K+1}]` with `eta_0 = 0` and
//! `eta_{K+1} = n`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Half-open index range `(start, end]`: `start` exclusive, `end` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    /// Creates `(start, end]`, requiring `start < end <= n`.
    pub fn new(start: usize, end: usize, n: usize) -> Result<Self> {
        if start >= end || end > n {
            return Err(Error::InvalidInterval { start, end, n });
        }
        Ok(Self { start, end })
    }

    /// Number of observations covered.
    #[must_use]
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}]", self.start, self.end)
    }
}

/// Strictly increasing interior indices partitioning `(0, n]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangePoints {
    points: Vec<usize>,
    n: usize,
}

impl ChangePoints {
    /// Validates that `points` are strictly increasing and strictly inside
    /// `(0, n)`.
    pub fn new(points: Vec<usize>, n: usize) -> Result<Self> {
        for (i, &p) in points.iter().enumerate() {
            if p == 0 || p >= n {
                return Err(Error::InvalidChangePoints(format!(
                    "point {p} outside (0, {n})"
                )));
            }
            if i > 0 && points[i - 1] >= p {
                return Err(Error::InvalidChangePoints(format!(
                    "points not strictly increasing at {p}"
                )));
            }
        }
        Ok(Self { points, n })
    }

    /// Like [`ChangePoints::new`] but validity is only checked in debug
    /// builds. For internal call sites that construct points by algorithm.
    #[must_use]
    pub fn from_sorted_unchecked(points: Vec<usize>, n: usize) -> Self {
        debug_assert!(
            Self::new(points.clone(), n).is_ok(),
            "invalid change point set {points:?} for n = {n}"
        );
        Self { points, n }
    }

    #[must_use]
    pub fn empty(n: usize) -> Self {
        Self {
            points: Vec::new(),
            n,
        }
    }

    #[must_use]
    pub fn points(&self) -> &[usize] {
        &self.points
    }

    /// Series length this set partitions.
    #[must_use]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of change points K.
    #[must_use]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The K+1 segments `(eta_{k-1}, eta_k]` covering `(0, n]`.
    #[must_use]
    pub fn partition(&self) -> Vec<Interval> {
        let mut out = Vec::with_capacity(self.points.len() + 1);
        let mut prev = 0usize;
        for &p in &self.points {
            out.push(Interval {
                start: prev,
                end: p,
            });
            prev = p;
        }
        out.push(Interval {
            start: prev,
            end: self.n,
        });
        out
    }
}

/// Segments `(eta_{k-1}, eta_k]` induced by `cps`; concatenation covers `(0, n]`.
#[must_use]
pub fn partition_of(cps: &ChangePoints) -> Vec<Interval> {
    cps.partition()
}

/// Two-sided Hausdorff distance between nonempty index sets:
/// `max(max_a min_b |a - b|, max_b min_a |a - b|)`.
///
/// # Errors
/// [`Error::UndefinedMetric`] when either set is empty; callers tally such
/// runs under the K-hat mismatch counts instead of coercing to 0 or infinity.
pub fn hausdorff(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::UndefinedMetric);
    }
    let directed = |from: &[usize], to: &[usize]| -> u64 {
        from.iter()
            .map(|&x| {
                to.iter()
                    .map(|&y| x.abs_diff(y) as u64)
                    .min()
                    .expect("nonempty")
            })
            .max()
            .expect("nonempty")
    };
    Ok(directed(a, b).max(directed(b, a)) as f64)
}

//! Prefix sufficient statistics for O(1)-amortized interval aggregation.
//!
//! The divide step evaluates many interval fits; each fit only needs interval
//! sums of `X_i`, `X_i X_i^T`, `X_i y_i`, `y_i^2`, or elementwise squares.
//! Storing cumulative sums makes any interval a subtraction. The second-order
//! table `cum_gram` costs `(n+1) p^2` entries, so it is budget-guarded; when
//! absent (or when streaming is requested explicitly) consumers fall back to
//! running accumulators that add one row or one block at a time, which is the
//! same update pattern the complexity argument for the divide step uses.

use crate::data::{Dataset, ModelFamily};
use crate::error::{Error, Result};
use crate::segment::Interval;
use serde::{Deserialize, Serialize};

/// Storage/traversal policy for the second-order statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheMode {
    /// Store the gram table if it fits the entry budget; otherwise behave
    /// like `Streamed`.
    Auto,
    /// Always store every prefix table (ignores the budget).
    Prefix,
    /// Never store the gram table; scanning consumers use running
    /// accumulators for all statistics.
    Streamed,
}

/// Default gram-table budget: number of f64 entries (2e8 = 1.6 GB).
pub const DEFAULT_GRAM_BUDGET: usize = 200_000_000;

/// Interval statistics bundle. Fields not used by the family are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsBuf {
    /// Observation count of the interval.
    pub len: usize,
    /// Per-coordinate sums of X_i (length p).
    pub sum_x: Vec<f64>,
    /// Per-coordinate sums of squares (length p; mean family).
    pub sum_x2: Vec<f64>,
    /// Row-major p-by-p sum of outer products (regression/graphical).
    pub gram: Vec<f64>,
    /// Per-coordinate sums of X_i y_i (regression).
    pub sum_xy: Vec<f64>,
    /// Sum of squared responses (regression).
    pub sum_yy: f64,
}

impl StatsBuf {
    /// Allocates the shapes needed by `family` at dimension `p`.
    #[must_use]
    pub fn new(p: usize, family: ModelFamily) -> Self {
        let (x2, gram, xy) = match family {
            ModelFamily::Mean => (p, 0, 0),
            ModelFamily::Regression => (0, p * p, p),
            ModelFamily::Graphical => (0, p * p, 0),
        };
        StatsBuf {
            len: 0,
            sum_x: vec![0.0; p],
            sum_x2: vec![0.0; x2],
            gram: vec![0.0; gram],
            sum_xy: vec![0.0; xy],
            sum_yy: 0.0,
        }
    }

    pub fn reset(&mut self) {
        self.len = 0;
        self.sum_x.fill(0.0);
        self.sum_x2.fill(0.0);
        self.gram.fill(0.0);
        self.sum_xy.fill(0.0);
        self.sum_yy = 0.0;
    }

    /// Total sum of squared entries over the interval (mean family).
    #[must_use]
    pub fn sum_sq(&self) -> f64 {
        self.sum_x2.iter().sum()
    }
}

/// Immutable prefix tables over one dataset.
///
/// Entry `t` of each table is the sum of the first `t` rows, so the sum over
/// the interval `(s, e]` is entry `e` minus entry `s`, exactly.
pub struct PrefixCache<'a> {
    data: &'a Dataset,
    mode: CacheMode,
    gram_stored: bool,
    cum_x: Vec<f64>,
    cum_x2: Vec<f64>,
    cum_gram: Vec<f64>,
    cum_xy: Vec<f64>,
    cum_yy: Vec<f64>,
}

impl<'a> PrefixCache<'a> {
    /// Builds the prefix tables for `data` under `mode` with the given gram
    /// budget (f64 entry count).
    ///
    /// # Errors
    /// [`Error::MissingResponse`] when a regression dataset lacks a response
    /// (already enforced by [`Dataset::new`], re-checked for safety).
    pub fn build(data: &'a Dataset, mode: CacheMode, gram_budget: usize) -> Result<Self> {
        let n = data.n();
        let p = data.p();
        let family = data.family();
        if family == ModelFamily::Regression && data.ys().is_none() {
            return Err(Error::MissingResponse);
        }

        let needs_gram = matches!(family, ModelFamily::Regression | ModelFamily::Graphical);
        let gram_entries = (n as u128 + 1) * (p as u128) * (p as u128);
        let gram_stored = needs_gram
            && match mode {
                CacheMode::Prefix => true,
                CacheMode::Auto => gram_entries <= gram_budget as u128,
                CacheMode::Streamed => false,
            };

        let mut cum_x = vec![0.0; (n + 1) * p];
        for t in 0..n {
            let row = data.row(t);
            let (prev, next) = cum_x[t * p..(t + 2) * p].split_at_mut(p);
            for j in 0..p {
                next[j] = prev[j] + row[j];
            }
        }

        let mut cum_x2 = Vec::new();
        if family == ModelFamily::Mean {
            cum_x2 = vec![0.0; (n + 1) * p];
            for t in 0..n {
                let row = data.row(t);
                let (prev, next) = cum_x2[t * p..(t + 2) * p].split_at_mut(p);
                for j in 0..p {
                    next[j] = prev[j] + row[j] * row[j];
                }
            }
        }

        let mut cum_gram = Vec::new();
        if gram_stored {
            cum_gram = vec![0.0; (n + 1) * p * p];
            let pp = p * p;
            for t in 0..n {
                let row = data.row(t);
                let (prev, next) = cum_gram[t * pp..(t + 2) * pp].split_at_mut(pp);
                for i in 0..p {
                    let xi = row[i];
                    let prev_i = &prev[i * p..(i + 1) * p];
                    let next_i = &mut next[i * p..(i + 1) * p];
                    for j in 0..p {
                        next_i[j] = prev_i[j] + xi * row[j];
                    }
                }
            }
        }

        let mut cum_xy = Vec::new();
        let mut cum_yy = Vec::new();
        if family == ModelFamily::Regression {
            let ys = data.ys().expect("checked above");
            cum_xy = vec![0.0; (n + 1) * p];
            cum_yy = vec![0.0; n + 1];
            for t in 0..n {
                let row = data.row(t);
                let y = ys[t];
                let (prev, next) = cum_xy[t * p..(t + 2) * p].split_at_mut(p);
                for j in 0..p {
                    next[j] = prev[j] + y * row[j];
                }
                cum_yy[t + 1] = cum_yy[t] + y * y;
            }
        }

        Ok(PrefixCache {
            data,
            mode,
            gram_stored,
            cum_x,
            cum_x2,
            cum_gram,
            cum_xy,
            cum_yy,
        })
    }

    #[must_use]
    pub fn n(&self) -> usize {
        self.data.n()
    }

    #[must_use]
    pub fn p(&self) -> usize {
        self.data.p()
    }

    #[must_use]
    pub fn family(&self) -> ModelFamily {
        self.data.family()
    }

    #[must_use]
    pub fn data(&self) -> &Dataset {
        self.data
    }

    /// Whether the p-by-p gram table is stored.
    #[must_use]
    pub fn gram_stored(&self) -> bool {
        self.gram_stored
    }

    /// Whether scanning consumers should use running accumulators rather than
    /// per-interval prefix queries. True when explicitly requested or when the
    /// family needs second-order statistics that are not stored.
    #[must_use]
    pub fn scan_streamed(&self) -> bool {
        self.mode == CacheMode::Streamed
            || (matches!(
                self.family(),
                ModelFamily::Regression | ModelFamily::Graphical
            ) && !self.gram_stored)
    }

    /// Fills `buf` with the statistics of `iv`, reusing its allocations.
    ///
    /// First-order statistics are prefix differences (bit-identical to
    /// entry-minus-entry); the gram falls back to a direct row loop when the
    /// table is not stored.
    ///
    /// # Errors
    /// `InvalidInterval` when `iv` is out of range.
    pub fn interval_stats_into(&self, iv: Interval, buf: &mut StatsBuf) -> Result<()> {
        let n = self.n();
        let p = self.p();
        if iv.start >= iv.end || iv.end > n {
            return Err(Error::InvalidInterval {
                start: iv.start,
                end: iv.end,
                n,
            });
        }
        let (s, e) = (iv.start, iv.end);
        buf.len = e - s;
        debug_assert_eq!(buf.sum_x.len(), p);
        for j in 0..p {
            buf.sum_x[j] = self.cum_x[e * p + j] - self.cum_x[s * p + j];
        }
        match self.family() {
            ModelFamily::Mean => {
                for j in 0..p {
                    buf.sum_x2[j] = self.cum_x2[e * p + j] - self.cum_x2[s * p + j];
                }
            }
            ModelFamily::Regression => {
                self.gram_into(s, e, &mut buf.gram);
                for j in 0..p {
                    buf.sum_xy[j] = self.cum_xy[e * p + j] - self.cum_xy[s * p + j];
                }
                buf.sum_yy = self.cum_yy[e] - self.cum_yy[s];
            }
            ModelFamily::Graphical => {
                self.gram_into(s, e, &mut buf.gram);
            }
        }
        Ok(())
    }

    /// Allocating convenience wrapper around [`PrefixCache::interval_stats_into`].
    pub fn interval_stats(&self, iv: Interval) -> Result<StatsBuf> {
        let mut buf = StatsBuf::new(self.p(), self.family());
        self.interval_stats_into(iv, &mut buf)?;
        Ok(buf)
    }

    fn gram_into(&self, s: usize, e: usize, out: &mut [f64]) {
        let p = self.p();
        let pp = p * p;
        debug_assert_eq!(out.len(), pp);
        if self.gram_stored {
            let hi = &self.cum_gram[e * pp..(e + 1) * pp];
            let lo = &self.cum_gram[s * pp..(s + 1) * pp];
            for k in 0..pp {
                out[k] = hi[k] - lo[k];
            }
        } else {
            out.fill(0.0);
            for t in s..e {
                let row = self.data.row(t);
                for i in 0..p {
                    let xi = row[i];
                    let out_i = &mut out[i * p..(i + 1) * p];
                    for j in 0..p {
                        out_i[j] += xi * row[j];
                    }
                }
            }
        }
    }
}

/// Streaming interval accumulator for scan loops (DP inner loop, refinement
/// window scans). Supports extending by single rows or whole blocks and
/// removing single rows, so a split point can slide in O(row cost).
pub struct RunningStats {
    family: ModelFamily,
    buf: StatsBuf,
}

impl RunningStats {
    #[must_use]
    pub fn new(p: usize, family: ModelFamily) -> Self {
        RunningStats {
            family,
            buf: StatsBuf::new(p, family),
        }
    }

    pub fn reset(&mut self) {
        self.buf.reset();
    }

    #[must_use]
    pub fn stats(&self) -> &StatsBuf {
        &self.buf
    }

    /// Adds row `t` (0-based) of `data`.
    pub fn add_row(&mut self, data: &Dataset, t: usize) {
        self.update_row(data, t, 1.0);
        self.buf.len += 1;
    }

    /// Removes row `t`; the row must currently be included.
    pub fn remove_row(&mut self, data: &Dataset, t: usize) {
        debug_assert!(self.buf.len > 0);
        self.update_row(data, t, -1.0);
        self.buf.len -= 1;
    }

    /// Adds all rows of the interval `iv` = `(s, e]` (rows `s..e`).
    pub fn add_block(&mut self, data: &Dataset, iv: Interval) {
        for t in iv.start..iv.end {
            self.add_row(data, t);
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn update_row(&mut self, data: &Dataset, t: usize, sign: f64) {
        let p = data.p();
        let row = data.row(t);
        for j in 0..p {
            self.buf.sum_x[j] += sign * row[j];
        }
        match self.family {
            ModelFamily::Mean => {
                for j in 0..p {
                    self.buf.sum_x2[j] += sign * row[j] * row[j];
                }
            }
            ModelFamily::Regression => {
                for i in 0..p {
                    let xi = sign * row[i];
                    let g = &mut self.buf.gram[i * p..(i + 1) * p];
                    for j in 0..p {
                        g[j] += xi * row[j];
                    }
                }
                let y = data.ys().expect("regression data")[t];
                for j in 0..p {
                    self.buf.sum_xy[j] += sign * y * row[j];
                }
                self.buf.sum_yy += sign * y * y;
            }
            ModelFamily::Graphical => {
                for i in 0..p {
                    let xi = sign * row[i];
                    let g = &mut self.buf.gram[i * p..(i + 1) * p];
                    for j in 0..p {
                        g[j] += xi * row[j];
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, ModelFamily};

    fn mean_data(rows: &[&[f64]]) -> Dataset {
        let p = rows[0].len();
        let xs: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Dataset::new(xs, rows.len(), p, None, ModelFamily::Mean).unwrap()
    }

    #[test]
    fn single_row_mean_tables() {
        let d = mean_data(&[&[1.0, 2.0]]);
        let c = PrefixCache::build(&d, CacheMode::Auto, DEFAULT_GRAM_BUDGET).unwrap();
        assert_eq!(c.cum_x, vec![0.0, 0.0, 1.0, 2.0]);
        let s = c.interval_stats(Interval { start: 0, end: 1 }).unwrap();
        assert_eq!(s.sum_x, vec![1.0, 2.0]);
        assert_eq!(s.sum_x2, vec![1.0, 4.0]);
    }

    #[test]
    fn graphical_one_hot_rows_sum_to_identity() {
        let xs = vec![1.0, 0.0, 0.0, 1.0];
        let d = Dataset::new(xs, 2, 2, None, ModelFamily::Graphical).unwrap();
        let c = PrefixCache::build(&d, CacheMode::Auto, DEFAULT_GRAM_BUDGET).unwrap();
        let s = c.interval_stats(Interval { start: 0, end: 2 }).unwrap();
        assert_eq!(s.gram, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn full_interval_equals_final_entry() {
        let d = mean_data(&[&[1.0, -2.0], &[0.5, 4.0], &[3.0, 0.0]]);
        let c = PrefixCache::build(&d, CacheMode::Auto, DEFAULT_GRAM_BUDGET).unwrap();
        let s = c.interval_stats(Interval { start: 0, end: 3 }).unwrap();
        assert_eq!(s.sum_x, vec![c.cum_x[6], c.cum_x[7]]);
    }

    #[test]
    fn out_of_range_interval_rejected() {
        let d = mean_data(&[&[0.0], &[1.0]]);
        let c = PrefixCache::build(&d, CacheMode::Auto, DEFAULT_GRAM_BUDGET).unwrap();
        assert!(c.interval_stats(Interval { start: 1, end: 1 }).is_err());
        assert!(c.interval_stats(Interval { start: 0, end: 3 }).is_err());
    }

    #[test]
    fn streamed_mode_skips_gram_but_matches_values() {
        let xs: Vec<f64> = (0..24).map(|i| (i as f64).sin()).collect();
        let d = Dataset::new(xs, 8, 3, None, ModelFamily::Graphical).unwrap();
        let with = PrefixCache::build(&d, CacheMode::Prefix, DEFAULT_GRAM_BUDGET).unwrap();
        let without = PrefixCache::build(&d, CacheMode::Streamed, 0).unwrap();
        assert!(with.gram_stored());
        assert!(!without.gram_stored());
        assert!(without.scan_streamed());
        let iv = Interval { start: 2, end: 7 };
        let a = with.interval_stats(iv).unwrap();
        let b = without.interval_stats(iv).unwrap();
        for (x, y) in a.gram.iter().zip(&b.gram) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn running_stats_match_interval_stats() {
        let xs: Vec<f64> = (0..40).map(|i| ((i * 7 % 11) as f64) - 5.0).collect();
        let ys: Vec<f64> = (0..10).map(|i| (i as f64) * 0.5 - 2.0).collect();
        let d = Dataset::new(xs, 10, 4, Some(ys), ModelFamily::Regression).unwrap();
        let c = PrefixCache::build(&d, CacheMode::Auto, DEFAULT_GRAM_BUDGET).unwrap();
        let iv = Interval { start: 3, end: 9 };
        let direct = c.interval_stats(iv).unwrap();
        let mut run = RunningStats::new(4, ModelFamily::Regression);
        run.add_block(&d, iv);
        assert_eq!(run.stats().len, direct.len);
        for (a, b) in run.stats().gram.iter().zip(&direct.gram) {
            assert!((a - b).abs() < 1e-9);
        }
        // Slide: remove the leading row, matching (4, 9].
        let mut run2 = run;
        run2.remove_row(&d, 3);
        let direct2 = c.interval_stats(Interval { start: 4, end: 9 }).unwrap();
        for (a, b) in run2.stats().sum_xy.iter().zip(&direct2.sum_xy) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((run2.stats().sum_yy - direct2.sum_yy).abs() < 1e-9);
    }
}

//! Independent reference implementations the test suites compare against.
//! Everything here is written from the definitions with plain loops, not by
//! calling back into the library's fitting code.
#![allow(dead_code)]

use dcdp::{Dataset, ModelFamily};

/// Argmin of a convex function on [lo, hi] by golden-section search.
pub fn golden_argmin(f: impl Fn(f64) -> f64, lo: f64, hi: f64, iters: usize) -> f64 {
    let inv_phi = 0.618_033_988_749_894_8_f64;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Numeric minimizer of `||v - u||^2 + zeta * ||v||` over v in R^2.
///
/// Any minimizer is a nonnegative multiple of u: at fixed radius r the
/// quadratic term is smallest when v points along u, and the penalty only
/// depends on r. That reduction is elementary and does not presuppose the
/// closed-form shrinkage factor, which is what the library side computes.
pub fn group_shrink_oracle(u1: f64, u2: f64, zeta: f64) -> (f64, f64) {
    let norm = (u1 * u1 + u2 * u2).sqrt();
    if norm == 0.0 {
        return (0.0, 0.0);
    }
    let f = |r: f64| (r - norm) * (r - norm) + zeta * r;
    let r = golden_argmin(f, 0.0, norm, 90);
    let r = if f(0.0) <= f(r) { 0.0 } else { r };
    (r * u1 / norm, r * u2 / norm)
}

/// Scalar mean-fit objective: squared residuals plus the scaled penalty.
/// Used to check the per-coordinate soft threshold numerically.
pub fn scalar_mean_argmin(values: &[f64], lambda: f64) -> f64 {
    let len = values.len() as f64;
    let f = |m: f64| {
        let resid: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
        resid + lambda * len.sqrt() * m.abs()
    };
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let m = golden_argmin(f, lo.min(0.0), hi.max(0.0), 90);
    // The objective is piecewise smooth at 0; make sure 0 is considered.
    if f(0.0) <= f(m) {
        0.0
    } else {
        m
    }
}

/// Gated univariate mean goodness of fit from scratch (direct loops).
pub fn naive_mean_gof(rows: &[f64], s: usize, e: usize, lambda: f64, min_span: usize) -> f64 {
    let len = e - s;
    if len < min_span {
        return 0.0;
    }
    let seg = &rows[s..e];
    let mean: f64 = seg.iter().sum::<f64>() / len as f64;
    let thr = lambda / (2.0 * (len as f64).sqrt());
    let mu = if mean > thr {
        mean - thr
    } else if mean < -thr {
        mean + thr
    } else {
        0.0
    };
    seg.iter().map(|v| (v - mu) * (v - mu)).sum()
}

/// Multivariate gated mean goodness of fit from scratch.
pub fn naive_mean_gof_multi(
    data: &Dataset,
    s: usize,
    e: usize,
    lambda: f64,
    min_span: usize,
) -> f64 {
    assert_eq!(data.family(), ModelFamily::Mean);
    let len = e - s;
    if len < min_span {
        return 0.0;
    }
    let p = data.p();
    let thr = lambda / (2.0 * (len as f64).sqrt());
    let mut total = 0.0;
    for j in 0..p {
        let mean: f64 = (s..e).map(|t| data.row(t)[j]).sum::<f64>() / len as f64;
        let mu = if mean > thr {
            mean - thr
        } else if mean < -thr {
            mean + thr
        } else {
            0.0
        };
        total += (s..e)
            .map(|t| (data.row(t)[j] - mu) * (data.row(t)[j] - mu))
            .sum::<f64>();
    }
    total
}

/// Best segmentation objective over every subset of the candidate cuts, by
/// brute force. Returns (best objective, best cut set).
pub fn exhaustive_best_segmentation(
    data: &Dataset,
    grid: &[usize],
    gamma: f64,
    lambda: f64,
    min_span: usize,
) -> (f64, Vec<usize>) {
    let n = data.n();
    let mut best = f64::INFINITY;
    let mut best_cuts = Vec::new();
    let m = grid.len();
    for mask in 0u32..(1 << m) {
        let cuts: Vec<usize> = (0..m)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| grid[i])
            .collect();
        let mut bounds = vec![0];
        bounds.extend(&cuts);
        bounds.push(n);
        let mut obj = gamma * (cuts.len() + 1) as f64;
        for w in bounds.windows(2) {
            obj += naive_mean_gof_multi(data, w[0], w[1], lambda, min_span);
        }
        if obj < best {
            best = obj;
            best_cuts = cuts;
        }
    }
    (best, best_cuts)
}

/// Textbook quadratic-time segmentation over every index 1..n-1, univariate
/// mean model. Returns (cut points, objective).
pub fn reference_full_dp(
    rows: &[f64],
    gamma: f64,
    lambda: f64,
    min_span: usize,
) -> (Vec<usize>, f64) {
    let n = rows.len();
    let mut best = vec![f64::INFINITY; n + 1];
    let mut back = vec![0usize; n + 1];
    best[0] = 0.0;
    for j in 1..=n {
        for l in 0..j {
            let cand = best[l] + gamma + naive_mean_gof(rows, l, j, lambda, min_span);
            if cand < best[j] {
                best[j] = cand;
                back[j] = l;
            }
        }
    }
    let mut cuts = Vec::new();
    let mut j = n;
    while j > 0 {
        let l = back[j];
        if l > 0 {
            cuts.push(l);
        }
        j = l;
    }
    cuts.reverse();
    (cuts, best[n])
}

/// Direct-summation interval statistics for the cache oracle.
pub struct NaiveStats {
    pub sum_x: Vec<f64>,
    pub sum_x2: Vec<f64>,
    pub gram: Vec<f64>,
    pub sum_xy: Vec<f64>,
    pub sum_yy: f64,
}

#[allow(clippy::needless_range_loop)]
pub fn naive_interval_stats(data: &Dataset, s: usize, e: usize) -> NaiveStats {
    let p = data.p();
    let mut out = NaiveStats {
        sum_x: vec![0.0; p],
        sum_x2: vec![0.0; p],
        gram: vec![0.0; p * p],
        sum_xy: vec![0.0; p],
        sum_yy: 0.0,
    };
    for t in s..e {
        let row = data.row(t);
        for i in 0..p {
            out.sum_x[i] += row[i];
            out.sum_x2[i] += row[i] * row[i];
            for j in 0..p {
                out.gram[i * p + j] += row[i] * row[j];
            }
        }
        if let Some(ys) = data.ys() {
            for i in 0..p {
                out.sum_xy[i] += ys[t] * row[i];
            }
            out.sum_yy += ys[t] * ys[t];
        }
    }
    out
}

/// Relative gap |a - b| / max(1, |a|, |b|).
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Least-squares slope of y on x.
pub fn lsq_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Stationarity violation for the interval lasso, computed from raw
/// statistics. The objective is b'Gb - 2 b'xy + lambda sqrt(n) |b|_1, so a
/// nonzero coordinate needs xy_j - (G b)_j = sign(b_j) lambda sqrt(n) / 2 and
/// a zero coordinate needs |xy_j - (G b)_j| <= lambda sqrt(n) / 2.
pub fn naive_lasso_kkt(gram: &[f64], sum_xy: &[f64], n: usize, lambda: f64, beta: &[f64]) -> f64 {
    let p = beta.len();
    let thr = lambda * (n as f64).sqrt() / 2.0;
    let mut worst = 0.0f64;
    for j in 0..p {
        let mut r = sum_xy[j];
        for k in 0..p {
            r -= gram[j * p + k] * beta[k];
        }
        let v = if beta[j] > 0.0 {
            (r - thr).abs()
        } else if beta[j] < 0.0 {
            (r + thr).abs()
        } else {
            (r.abs() - thr).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

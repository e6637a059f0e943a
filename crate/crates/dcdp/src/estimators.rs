//! Per-family penalized interval estimators.
//!
//! Each family maps an interval's sufficient statistics to a fitted parameter
//! and a penalized goodness of fit:
//! mean: soft-thresholded coordinate means, squared error loss;
//! regression: lasso via cyclic coordinate descent, squared error loss;
//! graphical: inverse of the (possibly ridged) covariance, Gaussian
//! negative log-likelihood up to constants.
//!
//! Intervals shorter than `min_span` are gated: their goodness of fit is zero
//! and no parameter is produced. Gating applies to the divide-step objective,
//! not to fixed-parameter losses (`loss_at`), which are plain sums.

use crate::cache::{PrefixCache, StatsBuf};
use crate::data::{Dataset, ModelFamily};
use crate::error::{Error, Result};
use crate::segment::Interval;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SPARSITY_HINT: usize = 5;
pub const DEFAULT_CD_TOL: f64 = 1e-7;
pub const DEFAULT_CD_MAX_ITER: usize = 10_000;
pub const DEFAULT_RIDGE_EPS: f64 = 1e-8;

/// max(x - t, 0) with sign, the lasso shrinkage map. `t` must be >= 0.
#[inline]
#[must_use]
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// User-facing model knobs; `None` fields resolve to data-driven defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub family: ModelFamily,
    /// Regularization level; default `lambda_scale * sigma_hat * sqrt(log(max(n, p)))`.
    pub lambda: Option<f64>,
    pub lambda_scale: f64,
    /// Shortest interval that is fitted rather than gated.
    pub min_span: Option<usize>,
    /// Expected per-segment support size, drives the default `min_span`.
    pub sparsity_hint: usize,
    pub cd_tol: f64,
    pub cd_max_iter: usize,
    pub ridge_eps: f64,
}

impl ModelConfig {
    #[must_use]
    pub fn new(family: ModelFamily) -> Self {
        ModelConfig {
            family,
            lambda: None,
            lambda_scale: 1.0,
            min_span: None,
            sparsity_hint: DEFAULT_SPARSITY_HINT,
            cd_tol: DEFAULT_CD_TOL,
            cd_max_iter: DEFAULT_CD_MAX_ITER,
            ridge_eps: DEFAULT_RIDGE_EPS,
        }
    }

    /// Resolves every default against the data.
    ///
    /// # Errors
    /// `InvalidGrid`-style validation is not needed here; fails only when a
    /// provided knob is out of range.
    // `!(x >= 0)` rather than `x < 0`: NaN must be rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn resolve(&self, data: &Dataset) -> Result<ModelSpec> {
        if self.family != data.family() {
            return Err(Error::InfeasibleConfig(format!(
                "model family {} does not match data family {}",
                self.family,
                data.family()
            )));
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0) {
                return Err(Error::InfeasibleConfig(format!(
                    "lambda must be >= 0, got {l}"
                )));
            }
        }
        if self.lambda_scale < 0.0 || self.cd_tol <= 0.0 || self.ridge_eps < 0.0 {
            return Err(Error::InfeasibleConfig(
                "lambda_scale and ridge_eps must be >= 0, cd_tol > 0".into(),
            ));
        }
        if let Some(m) = self.min_span {
            if m == 0 {
                return Err(Error::InfeasibleConfig("min_span must be >= 1".into()));
            }
        }
        let n = data.n();
        let p = data.p();
        let log_np = (n.max(p) as f64).ln().max(1.0);
        let noise_scale = estimate_noise_scale(data);
        let lambda = self
            .lambda
            .unwrap_or(self.lambda_scale * noise_scale * log_np.sqrt());
        let min_span = self.min_span.unwrap_or_else(|| match self.family {
            ModelFamily::Mean | ModelFamily::Regression => {
                2usize.max((0.5 * self.sparsity_hint as f64 * log_np).ceil() as usize)
            }
            ModelFamily::Graphical => (2 * p).max((0.2 * p as f64 * log_np).ceil() as usize),
        });
        Ok(ModelSpec {
            family: self.family,
            lambda,
            min_span,
            cd_tol: self.cd_tol,
            cd_max_iter: self.cd_max_iter,
            ridge_eps: self.ridge_eps,
            noise_scale,
        })
    }
}

/// Fully resolved model parameters, shared by divide, refine, and tuning.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub lambda: f64,
    pub min_span: usize,
    pub cd_tol: f64,
    pub cd_max_iter: usize,
    pub ridge_eps: f64,
    /// Robust noise level estimate used by the default lambda/zeta scales.
    pub noise_scale: f64,
}

/// Robust noise scale: scaled median absolute deviation of first differences
/// (pooled over coordinates; the response for regression). Differencing
/// cancels piecewise-constant signal except at the change points themselves.
#[must_use]
pub fn estimate_noise_scale(data: &Dataset) -> f64 {
    let diffs: Vec<f64> = match data.family() {
        ModelFamily::Regression => {
            let ys = data.ys().expect("regression data has a response");
            ys.windows(2).map(|w| w[1] - w[0]).collect()
        }
        _ => {
            let p = data.p();
            let mut d = Vec::with_capacity(data.n().saturating_sub(1) * p);
            for t in 1..data.n() {
                let (a, b) = (data.row(t - 1), data.row(t));
                for j in 0..p {
                    d.push(b[j] - a[j]);
                }
            }
            d
        }
    };
    if diffs.is_empty() {
        return 1.0;
    }
    let center = median(diffs.clone());
    let mad = median(diffs.into_iter().map(|d| (d - center).abs()).collect());
    mad / 0.6745 / std::f64::consts::SQRT_2
}

fn median(mut v: Vec<f64>) -> f64 {
    debug_assert!(!v.is_empty());
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).expect("finite"));
    let hi = *m;
    if v.len() % 2 == 1 {
        hi
    } else {
        let lo = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// Fitted interval parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimate {
    Mean { mu: Vec<f64> },
    Coefficients { beta: Vec<f64> },
    Precision { omega: DMatrix<f64>, log_det: f64 },
}

/// Ungated fit output.
#[derive(Debug, Clone)]
pub struct FitCore {
    pub theta: Estimate,
    pub gof: f64,
    pub converged: bool,
}

/// Gated fit output: `gated` implies `gof == 0` and no parameter.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta: Option<Estimate>,
    pub gof: f64,
    pub gated: bool,
    pub converged: bool,
}

/// Reusable workspace for the hot fitting paths.
pub struct FitScratch {
    beta: Vec<f64>,
    sigma: DMatrix<f64>,
}

impl FitScratch {
    #[must_use]
    pub fn new(p: usize) -> Self {
        FitScratch {
            beta: vec![0.0; p],
            sigma: DMatrix::zeros(p, p),
        }
    }
}

/// Ungated fit from interval statistics. Always produces a parameter,
/// regardless of interval length (graphical fits may still fail on singular
/// covariances when `ridge_eps == 0`).
#[allow(clippy::needless_range_loop)]
pub fn fit_stats(stats: &StatsBuf, spec: &ModelSpec, scratch: &mut FitScratch) -> Result<FitCore> {
    debug_assert!(stats.len > 0);
    match spec.family {
        ModelFamily::Mean => {
            let p = stats.sum_x.len();
            let len = stats.len as f64;
            let thr = spec.lambda / (2.0 * len.sqrt());
            let mut mu = vec![0.0; p];
            let mut gof = stats.sum_sq();
            for j in 0..p {
                let m = soft_threshold(stats.sum_x[j] / len, thr);
                mu[j] = m;
                gof += m * (len * m - 2.0 * stats.sum_x[j]);
            }
            Ok(FitCore {
                theta: Estimate::Mean { mu },
                gof,
                converged: true,
            })
        }
        ModelFamily::Regression => {
            scratch.beta.fill(0.0);
            let (gof, converged) = lasso_cd(stats, spec, &mut scratch.beta)?;
            Ok(FitCore {
                theta: Estimate::Coefficients {
                    beta: scratch.beta.clone(),
                },
                gof,
                converged,
            })
        }
        ModelFamily::Graphical => {
            let (omega, log_det, gof) = precision_mle(stats, spec, &mut scratch.sigma)?;
            Ok(FitCore {
                theta: Estimate::Precision { omega, log_det },
                gof,
                converged: true,
            })
        }
    }
}

/// Ungated goodness of fit only; avoids parameter materialization where the
/// family allows it.
pub fn gof_stats(stats: &StatsBuf, spec: &ModelSpec, scratch: &mut FitScratch) -> Result<f64> {
    match spec.family {
        ModelFamily::Mean => {
            let len = stats.len as f64;
            let thr = spec.lambda / (2.0 * len.sqrt());
            let mut gof = stats.sum_sq();
            for &sx in &stats.sum_x {
                let m = soft_threshold(sx / len, thr);
                gof += m * (len * m - 2.0 * sx);
            }
            Ok(gof)
        }
        ModelFamily::Regression => {
            scratch.beta.fill(0.0);
            let (gof, _) = lasso_cd(stats, spec, &mut scratch.beta)?;
            Ok(gof)
        }
        ModelFamily::Graphical => {
            let (_, _, gof) = precision_mle(stats, spec, &mut scratch.sigma)?;
            Ok(gof)
        }
    }
}

/// Goodness of fit with the short-interval gate applied.
pub fn gated_gof_stats(
    stats: &StatsBuf,
    spec: &ModelSpec,
    scratch: &mut FitScratch,
) -> Result<f64> {
    if stats.len < spec.min_span {
        Ok(0.0)
    } else {
        gof_stats(stats, spec, scratch)
    }
}

/// Gated interval fit.
pub fn fit(cache: &PrefixCache, iv: Interval, spec: &ModelSpec) -> Result<FitResult> {
    let stats = cache.interval_stats(iv)?;
    if stats.len < spec.min_span {
        return Ok(FitResult {
            theta: None,
            gof: 0.0,
            gated: true,
            converged: true,
        });
    }
    let mut scratch = FitScratch::new(cache.p());
    let core = fit_stats(&stats, spec, &mut scratch)?;
    Ok(FitResult {
        theta: Some(core.theta),
        gof: core.gof,
        gated: false,
        converged: core.converged,
    })
}

/// Gated interval goodness of fit.
pub fn goodness_of_fit(cache: &PrefixCache, iv: Interval, spec: &ModelSpec) -> Result<f64> {
    let stats = cache.interval_stats(iv)?;
    let mut scratch = FitScratch::new(cache.p());
    gated_gof_stats(&stats, spec, &mut scratch)
}

/// Loss of a fixed parameter on an interval (no penalty, no gating).
/// `stats` must carry the shapes of the matching family.
#[must_use]
#[allow(clippy::needless_range_loop)]
pub fn loss_at(theta: &Estimate, stats: &StatsBuf) -> f64 {
    let len = stats.len as f64;
    match theta {
        Estimate::Mean { mu } => {
            debug_assert_eq!(mu.len(), stats.sum_x.len());
            let mut loss = stats.sum_sq();
            for (m, sx) in mu.iter().zip(&stats.sum_x) {
                loss += m * (len * m - 2.0 * sx);
            }
            loss
        }
        Estimate::Coefficients { beta } => {
            let p = beta.len();
            debug_assert_eq!(stats.gram.len(), p * p);
            let mut loss = stats.sum_yy;
            for j in 0..p {
                loss -= 2.0 * beta[j] * stats.sum_xy[j];
            }
            for i in 0..p {
                let bi = beta[i];
                if bi == 0.0 {
                    continue;
                }
                let g = &stats.gram[i * p..(i + 1) * p];
                for j in 0..p {
                    loss += bi * g[j] * beta[j];
                }
            }
            loss
        }
        Estimate::Precision { omega, log_det } => {
            let p = omega.nrows();
            debug_assert_eq!(stats.gram.len(), p * p);
            let mut tr = 0.0;
            for i in 0..p {
                for j in 0..p {
                    tr += omega[(i, j)] * stats.gram[i * p + j];
                }
            }
            tr - len * log_det
        }
    }
}

/// Loss of a fixed parameter over `iv`, via the cache.
pub fn segment_loss(cache: &PrefixCache, iv: Interval, theta: &Estimate) -> Result<f64> {
    let stats = cache.interval_stats(iv)?;
    Ok(loss_at(theta, &stats))
}

/// Cyclic coordinate descent for the interval lasso. `beta` supplies the
/// warm start and receives the solution. Returns (gof, converged).
///
/// The stationarity condition solved per coordinate:
/// `beta_j = ST(b_j - sum_{k != j} G_jk beta_k, lambda sqrt(len) / 2) / G_jj`.
pub fn lasso_cd(stats: &StatsBuf, spec: &ModelSpec, beta: &mut Vec<f64>) -> Result<(f64, bool)> {
    let p = stats.sum_xy.len();
    beta.resize(p, 0.0);
    let g = &stats.gram;
    let b = &stats.sum_xy;
    let thr = spec.lambda * (stats.len as f64).sqrt() / 2.0;
    let mut converged = false;
    for _ in 0..spec.cd_max_iter {
        let mut max_delta = 0.0f64;
        for j in 0..p {
            let grow = &g[j * p..(j + 1) * p];
            let gjj = grow[j];
            let mut s = b[j];
            for k in 0..p {
                s -= grow[k] * beta[k];
            }
            s += gjj * beta[j];
            let num = soft_threshold(s, thr);
            let new = if gjj > 0.0 {
                num / gjj
            } else {
                // Exactly-zero column: s collapses to b_j which is 0 for real
                // data; anything materially nonzero has no finite minimizer.
                if num.abs() > 1e-10 * (1.0 + b[j].abs()) {
                    return Err(Error::DegenerateDesign { coord: j });
                }
                0.0
            };
            let delta = (new - beta[j]).abs();
            if delta > max_delta {
                max_delta = delta;
            }
            beta[j] = new;
        }
        if max_delta < spec.cd_tol {
            converged = true;
            break;
        }
    }
    let mut gof = stats.sum_yy;
    for j in 0..p {
        gof -= 2.0 * beta[j] * b[j];
    }
    for i in 0..p {
        let bi = beta[i];
        if bi == 0.0 {
            continue;
        }
        let grow = &g[i * p..(i + 1) * p];
        for j in 0..p {
            gof += bi * grow[j] * beta[j];
        }
    }
    Ok((gof, converged))
}

/// Largest violation of the lasso stationarity conditions at `beta`:
/// zero coordinates need |b_j - (G beta)_j| <= threshold, active ones need
/// equality with the signed threshold.
#[must_use]
pub fn lasso_kkt_residual(stats: &StatsBuf, spec: &ModelSpec, beta: &[f64]) -> f64 {
    let p = beta.len();
    let thr = spec.lambda * (stats.len as f64).sqrt() / 2.0;
    let mut worst = 0.0f64;
    for j in 0..p {
        let mut r = stats.sum_xy[j];
        let grow = &stats.gram[j * p..(j + 1) * p];
        for k in 0..p {
            r -= grow[k] * beta[k];
        }
        let v = if beta[j] > 0.0 {
            (r - thr).abs()
        } else if beta[j] < 0.0 {
            (r + thr).abs()
        } else {
            (r.abs() - thr).max(0.0)
        };
        if v > worst {
            worst = v;
        }
    }
    worst
}

/// Gaussian MLE of the precision matrix with a relative ridge guard.
/// Returns (omega, log det omega, goodness of fit). The trace term always
/// uses the unridged covariance.
fn precision_mle(
    stats: &StatsBuf,
    spec: &ModelSpec,
    sigma: &mut DMatrix<f64>,
) -> Result<(DMatrix<f64>, f64, f64)> {
    let p = (stats.gram.len() as f64).sqrt() as usize;
    debug_assert_eq!(p * p, stats.gram.len());
    let len = stats.len as f64;
    if sigma.nrows() != p {
        *sigma = DMatrix::zeros(p, p);
    }
    for i in 0..p {
        for j in 0..p {
            sigma[(i, j)] = stats.gram[i * p + j] / len;
        }
    }
    let trace: f64 = (0..p).map(|i| sigma[(i, i)]).sum();
    let floor = spec.ridge_eps * trace / p as f64;
    let eig_min = sigma
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let mut ridged = sigma.clone();
    if spec.ridge_eps == 0.0 {
        // Exactly singular matrices land at +-rounding noise; compare against
        // a relative numerical zero rather than literal zero.
        if eig_min <= trace / p as f64 * 1e-12 {
            return Err(Error::SingularCovariance { len: stats.len, p });
        }
    } else if eig_min < floor {
        for i in 0..p {
            ridged[(i, i)] += floor;
        }
    }
    let chol =
        nalgebra::Cholesky::new(ridged).ok_or(Error::SingularCovariance { len: stats.len, p })?;
    let log_det_sigma: f64 = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>();
    let omega = chol.inverse();
    let mut tr = 0.0;
    for i in 0..p {
        for j in 0..p {
            tr += omega[(i, j)] * sigma[(i, j)];
        }
    }
    let gof = len * (tr + log_det_sigma);
    Ok((omega, -log_det_sigma, gof))
}

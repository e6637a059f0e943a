//! Conquer step: local refinement of the divide-step cut points.
//!
//! Each preliminary point gets a window reaching a third of the way toward
//! its neighbors. Inside the window a two-segment model is fitted jointly at
//! every candidate split (stage 1); the split is then re-scanned with the
//! stage-1 parameters frozen and the plain two-segment loss (stage 2). The
//! stage-2 minimizer is reported. Points are processed left to right and each
//! scan starts strictly after the previous refined point, so the output keeps
//! the cardinality and ordering of the input.
//!
//! The joint penalty couples the two sides per coordinate through
//! `zeta * ||(sqrt(n_L) theta_L_i, sqrt(n_R) theta_R_i)||`, which has a
//! closed-form minimizer for the mean family and is handled by proximal
//! gradient descent for regression. Graphical fits are per-side likelihood
//! maximizers (the coupling penalty is zero for that family); an alternative
//! covariance least-squares scan is available behind a flag.

use crate::cache::{PrefixCache, RunningStats, StatsBuf};
use crate::data::ModelFamily;
use crate::error::{Error, Result};
use crate::estimators::{fit_stats, loss_at, Estimate, FitScratch, ModelSpec};
use crate::segment::{ChangePoints, Interval};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefineConfig {
    /// Coupling penalty level; must be >= 0.
    pub zeta: f64,
    /// Candidates keep at least this many rows on each side of the window.
    pub edge_margin: usize,
    pub model: ModelSpec,
    /// Graphical family only: scan the covariance least-squares objective
    /// instead of the Gaussian likelihood.
    pub graphical_frobenius: bool,
}

impl RefineConfig {
    /// Config with the default margin for the model at dimension `p`.
    #[must_use]
    pub fn new(zeta: f64, model: ModelSpec, p: usize) -> Self {
        let edge_margin = default_edge_margin(&model, p);
        RefineConfig {
            zeta,
            edge_margin,
            model,
            graphical_frobenius: false,
        }
    }
}

/// Mean and regression flanks only need a couple of rows; graphical flanks
/// must be full rank or the likelihood is unbounded below, so the margin
/// clears the dimension.
#[must_use]
pub fn default_edge_margin(spec: &ModelSpec, p: usize) -> usize {
    let quarter = spec.min_span / 4;
    match spec.family {
        ModelFamily::Mean | ModelFamily::Regression => 2usize.max(quarter),
        ModelFamily::Graphical => (p + 2).max(quarter),
    }
}

/// Scan windows for each point: from a third of the way back toward the left
/// neighbor to a third of the way toward the right neighbor (0 and n act as
/// virtual neighbors at the ends).
#[must_use]
pub fn refine_windows(cps: &ChangePoints) -> Vec<(usize, usize)> {
    let pts = cps.points();
    let n = cps.n();
    (0..pts.len())
        .map(|k| {
            let prev = if k == 0 { 0 } else { pts[k - 1] };
            let next = if k + 1 == pts.len() { n } else { pts[k + 1] };
            let s = (2 * prev + pts[k]) / 3;
            let e = (pts[k] + 2 * next).div_ceil(3);
            (s, e)
        })
        .collect()
}

/// Joint two-segment fit at a fixed split.
#[derive(Debug, Clone)]
pub struct TwoSegmentFit {
    pub eta: usize,
    pub theta_left: Estimate,
    pub theta_right: Estimate,
    /// Loss plus the coupling penalty, the stage-1 scan objective.
    pub penalized: f64,
    /// Loss of the fitted parameters alone.
    pub unpenalized: f64,
    pub converged: bool,
}

/// Outcome for one refined point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinedPoint {
    pub initial: usize,
    pub refined: usize,
    pub window: (usize, usize),
    /// False when the window was too narrow and the initial point was kept.
    pub scanned: bool,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub change_points: ChangePoints,
    pub details: Vec<RefinedPoint>,
}

// `!(zeta >= 0)` rather than `zeta < 0`: NaN must be rejected too.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn refine(
    cache: &PrefixCache,
    cps: &ChangePoints,
    cfg: &RefineConfig,
) -> Result<RefineOutcome> {
    if cfg.model.family != cache.family() {
        return Err(Error::InfeasibleConfig(format!(
            "model family {} does not match data family {}",
            cfg.model.family,
            cache.family()
        )));
    }
    if !(cfg.zeta >= 0.0) {
        return Err(Error::InfeasibleConfig(format!(
            "zeta must be >= 0, got {}",
            cfg.zeta
        )));
    }
    if cfg.edge_margin == 0 {
        return Err(Error::InfeasibleConfig("edge_margin must be >= 1".into()));
    }
    if cps.n() != cache.n() {
        return Err(Error::InvalidChangePoints(format!(
            "change points are over n={} but data has n={}",
            cps.n(),
            cache.n()
        )));
    }
    if cps.is_empty() {
        return Ok(RefineOutcome {
            change_points: ChangePoints::empty(cache.n()),
            details: vec![],
        });
    }

    let windows = refine_windows(cps);
    let m = cfg.edge_margin;
    let mut refined = Vec::with_capacity(cps.len());
    let mut details = Vec::with_capacity(cps.len());
    let mut prev = 0usize;
    let mut scratch = FitScratch::new(cache.p());
    // Regression warm-start state persists across candidates and windows.
    let mut warm_a = vec![0.0; cache.p()];
    let mut warm_b = vec![0.0; cache.p()];

    for (k, &eta0) in cps.points().iter().enumerate() {
        let (s, e) = windows[k];
        let range = if e - s > 2 * m {
            let lo = (s + m).max(prev + 1);
            let hi = e - m;
            (lo <= hi).then_some((lo, hi))
        } else {
            None
        };
        let Some((lo, hi)) = range else {
            refined.push(eta0);
            details.push(RefinedPoint {
                initial: eta0,
                refined: eta0,
                window: (s, e),
                scanned: false,
                converged: true,
            });
            prev = eta0;
            continue;
        };

        let (eta2, converged) =
            if cfg.model.family == ModelFamily::Graphical && cfg.graphical_frobenius {
                refine_one_frobenius(cache, s, e, lo, hi)?
            } else {
                let (_, frozen, converged) = stage1_scan(
                    cache,
                    s,
                    e,
                    lo,
                    hi,
                    cfg,
                    &mut scratch,
                    &mut warm_a,
                    &mut warm_b,
                )?;
                (stage2_scan(cache, s, e, lo, hi, &frozen), converged)
            };

        refined.push(eta2);
        details.push(RefinedPoint {
            initial: eta0,
            refined: eta2,
            window: (s, e),
            scanned: true,
            converged,
        });
        prev = eta2;
    }

    let change_points = ChangePoints::new(refined, cache.n())?;
    Ok(RefineOutcome {
        change_points,
        details,
    })
}

/// Stage-1 scan: jointly fitted penalized loss at every candidate split,
/// smallest minimizer wins. Returns the frozen parameters refit at the
/// winner.
#[allow(clippy::too_many_arguments)]
fn stage1_scan(
    cache: &PrefixCache,
    s: usize,
    e: usize,
    lo: usize,
    hi: usize,
    cfg: &RefineConfig,
    scratch: &mut FitScratch,
    warm_a: &mut [f64],
    warm_b: &mut [f64],
) -> Result<(usize, (Estimate, Estimate), bool)> {
    let data = cache.data();
    let p = cache.p();
    let family = cfg.model.family;
    let mut left = RunningStats::new(p, family);
    let mut right = RunningStats::new(p, family);
    left.add_block(data, Interval { start: s, end: lo });
    right.add_block(data, Interval { start: lo, end: e });

    let mut best_eta = lo;
    let mut best_val = f64::INFINITY;
    for eta in lo..=hi {
        if eta > lo {
            left.add_row(data, eta - 1);
            right.remove_row(data, eta - 1);
        }
        let val = match family {
            ModelFamily::Mean => mean_joint_value(left.stats(), right.stats(), cfg.zeta),
            ModelFamily::Regression => {
                prox_group_lasso(
                    left.stats(),
                    right.stats(),
                    cfg.zeta,
                    &cfg.model,
                    warm_a,
                    warm_b,
                )
                .0
            }
            ModelFamily::Graphical => {
                fit_stats(left.stats(), &cfg.model, scratch)?.gof
                    + fit_stats(right.stats(), &cfg.model, scratch)?.gof
            }
        };
        if val < best_val {
            best_val = val;
            best_eta = eta;
        }
    }

    // Refit at the winner to materialize the frozen parameters.
    let lstats = cache.interval_stats(Interval {
        start: s,
        end: best_eta,
    })?;
    let rstats = cache.interval_stats(Interval {
        start: best_eta,
        end: e,
    })?;
    let (frozen, converged) = match family {
        ModelFamily::Mean => {
            let (mu1, mu2, _, _) = mean_joint(&lstats, &rstats, cfg.zeta);
            (
                (Estimate::Mean { mu: mu1 }, Estimate::Mean { mu: mu2 }),
                true,
            )
        }
        ModelFamily::Regression => {
            let (_, _, conv) =
                prox_group_lasso(&lstats, &rstats, cfg.zeta, &cfg.model, warm_a, warm_b);
            let nl = (lstats.len as f64).sqrt();
            let nr = (rstats.len as f64).sqrt();
            let beta1 = warm_a.iter().map(|a| a / nl).collect();
            let beta2 = warm_b.iter().map(|b| b / nr).collect();
            (
                (
                    Estimate::Coefficients { beta: beta1 },
                    Estimate::Coefficients { beta: beta2 },
                ),
                conv,
            )
        }
        ModelFamily::Graphical => {
            let l = fit_stats(&lstats, &cfg.model, scratch)?;
            let r = fit_stats(&rstats, &cfg.model, scratch)?;
            ((l.theta, r.theta), l.converged && r.converged)
        }
    };
    Ok((best_eta, frozen, converged))
}

/// Stage-2 scan: fixed-parameter loss at every candidate, smallest minimizer.
fn stage2_scan(
    cache: &PrefixCache,
    s: usize,
    e: usize,
    lo: usize,
    hi: usize,
    frozen: &(Estimate, Estimate),
) -> usize {
    let data = cache.data();
    let p = cache.p();
    let family = cache.family();
    let mut left = RunningStats::new(p, family);
    let mut right = RunningStats::new(p, family);
    left.add_block(data, Interval { start: s, end: lo });
    right.add_block(data, Interval { start: lo, end: e });
    let mut best_eta = lo;
    let mut best_val = f64::INFINITY;
    for eta in lo..=hi {
        if eta > lo {
            left.add_row(data, eta - 1);
            right.remove_row(data, eta - 1);
        }
        let val = loss_at(&frozen.0, left.stats()) + loss_at(&frozen.1, right.stats());
        if val < best_val {
            best_val = val;
            best_eta = eta;
        }
    }
    best_eta
}

/// Covariance least-squares refinement: both stages scan Frobenius losses of
/// per-side sample covariances. The quartic row norms are window constants,
/// so each stage-1 value reduces to `-||gram||_F^2 / len` per side.
fn refine_one_frobenius(
    cache: &PrefixCache,
    s: usize,
    e: usize,
    lo: usize,
    hi: usize,
) -> Result<(usize, bool)> {
    let data = cache.data();
    let p = cache.p();
    let mut left = RunningStats::new(p, ModelFamily::Graphical);
    let mut right = RunningStats::new(p, ModelFamily::Graphical);
    left.add_block(data, Interval { start: s, end: lo });
    right.add_block(data, Interval { start: lo, end: e });
    let mut best_eta = lo;
    let mut best_val = f64::INFINITY;
    for eta in lo..=hi {
        if eta > lo {
            left.add_row(data, eta - 1);
            right.remove_row(data, eta - 1);
        }
        let val = -frob_norm2(&left.stats().gram) / left.stats().len as f64
            - frob_norm2(&right.stats().gram) / right.stats().len as f64;
        if val < best_val {
            best_val = val;
            best_eta = eta;
        }
    }

    // Freeze the covariances of the stage-1 winner.
    let lstats = cache.interval_stats(Interval {
        start: s,
        end: best_eta,
    })?;
    let rstats = cache.interval_stats(Interval {
        start: best_eta,
        end: e,
    })?;
    let sl: Vec<f64> = lstats.gram.iter().map(|g| g / lstats.len as f64).collect();
    let sr: Vec<f64> = rstats.gram.iter().map(|g| g / rstats.len as f64).collect();
    let sl2 = frob_norm2(&sl);
    let sr2 = frob_norm2(&sr);

    let mut left = RunningStats::new(p, ModelFamily::Graphical);
    let mut right = RunningStats::new(p, ModelFamily::Graphical);
    left.add_block(data, Interval { start: s, end: lo });
    right.add_block(data, Interval { start: lo, end: e });
    let mut best2 = lo;
    let mut best2_val = f64::INFINITY;
    for eta in lo..=hi {
        if eta > lo {
            left.add_row(data, eta - 1);
            right.remove_row(data, eta - 1);
        }
        let ls = left.stats();
        let rs = right.stats();
        let val = ls.len as f64 * sl2 - 2.0 * dot(&ls.gram, &sl) + rs.len as f64 * sr2
            - 2.0 * dot(&rs.gram, &sr);
        if val < best2_val {
            best2_val = val;
            best2 = eta;
        }
    }
    Ok((best2, true))
}

fn frob_norm2(m: &[f64]) -> f64 {
    m.iter().map(|v| v * v).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Closed-form joint mean fit. Per coordinate the rescaled side means are
/// group soft-thresholded together, which either shrinks both or zeroes both.
/// Returns (mu_left, mu_right, penalized, unpenalized).
fn mean_joint(left: &StatsBuf, right: &StatsBuf, zeta: f64) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let p = left.sum_x.len();
    let nl = left.len as f64;
    let nr = right.len as f64;
    let (sl, sr) = (nl.sqrt(), nr.sqrt());
    let mut mu1 = vec![0.0; p];
    let mut mu2 = vec![0.0; p];
    let mut penalty = 0.0;
    let mut unpen = left.sum_sq() + right.sum_sq();
    for i in 0..p {
        let u1 = left.sum_x[i] / sl;
        let u2 = right.sum_x[i] / sr;
        let norm = (u1 * u1 + u2 * u2).sqrt();
        let scale = if norm > 0.0 {
            (1.0 - zeta / (2.0 * norm)).max(0.0)
        } else {
            0.0
        };
        let (v1, v2) = (scale * u1, scale * u2);
        let (m1, m2) = (v1 / sl, v2 / sr);
        penalty += zeta * (v1 * v1 + v2 * v2).sqrt();
        unpen += m1 * (nl * m1 - 2.0 * left.sum_x[i]) + m2 * (nr * m2 - 2.0 * right.sum_x[i]);
        mu1[i] = m1;
        mu2[i] = m2;
    }
    (mu1, mu2, unpen + penalty, unpen)
}

/// Penalized value only, allocation free; used by the stage-1 scan.
fn mean_joint_value(left: &StatsBuf, right: &StatsBuf, zeta: f64) -> f64 {
    let nl = left.len as f64;
    let nr = right.len as f64;
    let (sl, sr) = (nl.sqrt(), nr.sqrt());
    let mut val = left.sum_sq() + right.sum_sq();
    for i in 0..left.sum_x.len() {
        let u1 = left.sum_x[i] / sl;
        let u2 = right.sum_x[i] / sr;
        let norm = (u1 * u1 + u2 * u2).sqrt();
        let scale = if norm > 0.0 {
            (1.0 - zeta / (2.0 * norm)).max(0.0)
        } else {
            0.0
        };
        let (v1, v2) = (scale * u1, scale * u2);
        let (m1, m2) = (v1 / sl, v2 / sr);
        val += m1 * (nl * m1 - 2.0 * left.sum_x[i]) + m2 * (nr * m2 - 2.0 * right.sum_x[i]);
        val += zeta * (v1 * v1 + v2 * v2).sqrt();
    }
    val
}

/// Proximal gradient descent for the joint regression fit, in the rescaled
/// variables `a = sqrt(n_L) beta_L`, `b = sqrt(n_R) beta_R` where the
/// coupling penalty is a plain row-group lasso. `a`/`b` carry the warm start
/// and receive the solution. Returns (penalized value, unpenalized, converged).
fn prox_group_lasso(
    left: &StatsBuf,
    right: &StatsBuf,
    zeta: f64,
    spec: &ModelSpec,
    a: &mut [f64],
    b: &mut [f64],
) -> (f64, f64, bool) {
    let p = a.len();
    let nl = left.len as f64;
    let nr = right.len as f64;
    let (sl, sr) = (nl.sqrt(), nr.sqrt());
    // Smooth part per side: yy - 2 (a . c) + a^T H a with H = gram / n,
    // c = sum_xy / sqrt(n).
    let lip = 2.0
        * 1.01
        * lambda_max_scaled(&left.gram, p, nl).max(lambda_max_scaled(&right.gram, p, nr));
    let step = 1.0 / lip.max(1e-12);

    let objective = |a: &[f64], b: &[f64]| -> (f64, f64) {
        let mut smooth = left.sum_yy + right.sum_yy;
        for i in 0..p {
            smooth -= 2.0 * a[i] * left.sum_xy[i] / sl + 2.0 * b[i] * right.sum_xy[i] / sr;
        }
        for i in 0..p {
            let (ai, bi) = (a[i], b[i]);
            let gl = &left.gram[i * p..(i + 1) * p];
            let gr = &right.gram[i * p..(i + 1) * p];
            for j in 0..p {
                smooth += ai * gl[j] * a[j] / nl + bi * gr[j] * b[j] / nr;
            }
        }
        let mut pen = 0.0;
        for i in 0..p {
            pen += (a[i] * a[i] + b[i] * b[i]).sqrt();
        }
        (smooth + zeta * pen, smooth)
    };

    let (mut prev_obj, mut prev_smooth) = objective(a, b);
    let mut converged = false;
    let mut grad_a = vec![0.0; p];
    let mut grad_b = vec![0.0; p];
    for _ in 0..spec.cd_max_iter {
        for i in 0..p {
            let mut ga = -2.0 * left.sum_xy[i] / sl;
            let mut gb = -2.0 * right.sum_xy[i] / sr;
            let gl = &left.gram[i * p..(i + 1) * p];
            let gr = &right.gram[i * p..(i + 1) * p];
            for j in 0..p {
                ga += 2.0 * gl[j] * a[j] / nl;
                gb += 2.0 * gr[j] * b[j] / nr;
            }
            grad_a[i] = ga;
            grad_b[i] = gb;
        }
        for i in 0..p {
            let za = a[i] - step * grad_a[i];
            let zb = b[i] - step * grad_b[i];
            let norm = (za * za + zb * zb).sqrt();
            let scale = if norm > 0.0 {
                (1.0 - step * zeta / norm).max(0.0)
            } else {
                0.0
            };
            a[i] = scale * za;
            b[i] = scale * zb;
        }
        let (obj, smooth) = objective(a, b);
        let drop = prev_obj - obj;
        prev_obj = obj;
        prev_smooth = smooth;
        if drop.abs() < spec.cd_tol {
            converged = true;
            break;
        }
    }
    (prev_obj, prev_smooth, converged)
}

/// Largest eigenvalue of `gram / n` by power iteration; gram is PSD so the
/// iteration is monotone from a positive start.
fn lambda_max_scaled(gram: &[f64], p: usize, n: f64) -> f64 {
    let mut v = vec![1.0 / (p as f64).sqrt(); p];
    let mut w = vec![0.0; p];
    let mut lam = 0.0;
    for _ in 0..50 {
        for i in 0..p {
            let g = &gram[i * p..(i + 1) * p];
            let mut s = 0.0;
            for j in 0..p {
                s += g[j] * v[j];
            }
            w[i] = s / n;
        }
        lam = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if lam <= 0.0 {
            return 0.0;
        }
        for i in 0..p {
            v[i] = w[i] / lam;
        }
    }
    lam
}

/// Joint two-segment mean fit at the split `eta` of the window `(s, e]`.
pub fn two_segment_mean(
    cache: &PrefixCache,
    s: usize,
    e: usize,
    eta: usize,
    zeta: f64,
) -> Result<TwoSegmentFit> {
    check_split(cache, ModelFamily::Mean, s, e, eta)?;
    let left = cache.interval_stats(Interval { start: s, end: eta })?;
    let right = cache.interval_stats(Interval { start: eta, end: e })?;
    let (mu1, mu2, penalized, unpenalized) = mean_joint(&left, &right, zeta);
    Ok(TwoSegmentFit {
        eta,
        theta_left: Estimate::Mean { mu: mu1 },
        theta_right: Estimate::Mean { mu: mu2 },
        penalized,
        unpenalized,
        converged: true,
    })
}

/// Joint two-segment regression fit (cold start) at the split `eta`.
pub fn two_segment_regression(
    cache: &PrefixCache,
    s: usize,
    e: usize,
    eta: usize,
    zeta: f64,
    spec: &ModelSpec,
) -> Result<TwoSegmentFit> {
    check_split(cache, ModelFamily::Regression, s, e, eta)?;
    let left = cache.interval_stats(Interval { start: s, end: eta })?;
    let right = cache.interval_stats(Interval { start: eta, end: e })?;
    let p = cache.p();
    let mut a = vec![0.0; p];
    let mut b = vec![0.0; p];
    let (penalized, unpenalized, converged) =
        prox_group_lasso(&left, &right, zeta, spec, &mut a, &mut b);
    let sl = (left.len as f64).sqrt();
    let sr = (right.len as f64).sqrt();
    Ok(TwoSegmentFit {
        eta,
        theta_left: Estimate::Coefficients {
            beta: a.iter().map(|x| x / sl).collect(),
        },
        theta_right: Estimate::Coefficients {
            beta: b.iter().map(|x| x / sr).collect(),
        },
        penalized,
        unpenalized,
        converged,
    })
}

/// Per-side precision fits at the split `eta`; the coupling penalty is zero
/// for this family, so penalized and unpenalized coincide.
pub fn two_segment_precision(
    cache: &PrefixCache,
    s: usize,
    e: usize,
    eta: usize,
    spec: &ModelSpec,
) -> Result<TwoSegmentFit> {
    check_split(cache, ModelFamily::Graphical, s, e, eta)?;
    let left = cache.interval_stats(Interval { start: s, end: eta })?;
    let right = cache.interval_stats(Interval { start: eta, end: e })?;
    let mut scratch = FitScratch::new(cache.p());
    let l = fit_stats(&left, spec, &mut scratch)?;
    let r = fit_stats(&right, spec, &mut scratch)?;
    let value = l.gof + r.gof;
    Ok(TwoSegmentFit {
        eta,
        theta_left: l.theta,
        theta_right: r.theta,
        penalized: value,
        unpenalized: value,
        converged: l.converged && r.converged,
    })
}

fn check_split(
    cache: &PrefixCache,
    family: ModelFamily,
    s: usize,
    e: usize,
    eta: usize,
) -> Result<()> {
    if cache.family() != family {
        return Err(Error::InfeasibleConfig(format!(
            "two-segment fit for {family} on {} data",
            cache.family()
        )));
    }
    if !(s < eta && eta < e && e <= cache.n()) {
        return Err(Error::InvalidInterval {
            start: s,
            end: e,
            n: cache.n(),
        });
    }
    Ok(())
}

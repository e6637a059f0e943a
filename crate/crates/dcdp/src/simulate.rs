//! Synthetic piecewise data and a parallel trial runner.
//!
//! Change point locations are equally spaced up to uniform jitter of a
//! configurable fraction of the spacing. Segment parameters rotate a small
//! support (five coordinates, shifted by five per segment, wrapping at p)
//! with alternating sign, so consecutive segments always differ. Graphical
//! segments alternate between the identity covariance and a tridiagonal one.
//!
//! Every trial draws from its own counter-based stream of one seeded
//! generator, so trials are reproducible individually and independent of
//! how many run or in what order.

use crate::data::{Dataset, ModelFamily};
use crate::detect::{detect, DetectorConfig};
use crate::error::{Error, Result};
use crate::segment::{hausdorff, ChangePoints};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub family: ModelFamily,
    pub n: usize,
    pub p: usize,
    /// Number of change points.
    pub k: usize,
    /// Signal size per affected coordinate (mean shift or coefficient).
    pub delta: f64,
    /// Diagonal of the alternate graphical covariance.
    pub delta_diag: f64,
    /// Off-diagonal of the alternate graphical covariance.
    pub delta_off: f64,
    /// Observation noise level (mean and regression).
    pub sigma_eps: f64,
    /// Location jitter as a fraction of the nominal spacing.
    pub jitter: f64,
    pub seed: u64,
}

impl SimConfig {
    #[must_use]
    pub fn new(family: ModelFamily, n: usize, p: usize, k: usize) -> Self {
        SimConfig {
            family,
            n,
            p,
            k,
            delta: 5.0,
            delta_diag: 5.0,
            delta_off: 0.3,
            sigma_eps: 1.0,
            jitter: 0.3,
            seed: 0,
        }
    }
}

/// Draws jittered, strictly increasing locations; retries the jitter up to
/// 100 times before giving up on a config that leaves no room.
pub fn draw_change_points(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if cfg.k == 0 {
        return Ok(vec![]);
    }
    if !(0.0..0.5).contains(&cfg.jitter) {
        return Err(Error::InfeasibleConfig(format!(
            "jitter must be in [0, 0.5), got {}",
            cfg.jitter
        )));
    }
    let spacing = cfg.n as f64 / (cfg.k + 1) as f64;
    if spacing * (1.0 - cfg.jitter) < 1.0 {
        return Err(Error::InfeasibleConfig(format!(
            "n = {} cannot hold {} jittered change points",
            cfg.n, cfg.k
        )));
    }
    let jit = cfg.jitter * spacing;
    for _ in 0..100 {
        let pts: Vec<usize> = (1..=cfg.k)
            .map(|i| {
                let off = if jit > 0.0 {
                    rng.gen_range(-jit..=jit)
                } else {
                    0.0
                };
                (i as f64 * spacing + off).round() as usize
            })
            .collect();
        let ok = pts.first().is_some_and(|&f| f >= 1)
            && pts.last().is_some_and(|&l| l < cfg.n)
            && pts.windows(2).all(|w| w[0] < w[1]);
        if ok {
            return Ok(pts);
        }
    }
    Err(Error::InfeasibleConfig(
        "could not draw strictly increasing change points in 100 attempts".into(),
    ))
}

/// Support of segment `seg`: five coordinates starting at `5 * seg`, wrapped
/// at p, holding `delta` with the segment-alternating sign.
fn segment_vector(seg: usize, p: usize, delta: f64) -> Vec<f64> {
    let mut v = vec![0.0; p];
    let sign = if seg % 2 == 1 { -1.0 } else { 1.0 };
    for c in 0..5 {
        v[(5 * seg + c) % p] = sign * delta;
    }
    v
}

/// Generates one trial. The stream index makes trials independent draws of
/// one seeded generator.
#[allow(clippy::needless_range_loop)]
pub fn generate(cfg: &SimConfig, trial: u64) -> Result<(Dataset, ChangePoints)> {
    if cfg.n == 0 || cfg.p == 0 {
        return Err(Error::InfeasibleConfig("n and p must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial);
    let pts = draw_change_points(cfg, &mut rng)?;
    let cps = ChangePoints::new(pts, cfg.n)?;
    let (n, p) = (cfg.n, cfg.p);

    let data = match cfg.family {
        ModelFamily::Mean => {
            let means: Vec<Vec<f64>> = (0..=cfg.k)
                .map(|s| segment_vector(s, p, cfg.delta))
                .collect();
            let mut xs = Vec::with_capacity(n * p);
            for (seg, iv) in cps.partition().into_iter().enumerate() {
                for _ in iv.start..iv.end {
                    for j in 0..p {
                        let z: f64 = rng.sample(StandardNormal);
                        xs.push(means[seg][j] + cfg.sigma_eps * z);
                    }
                }
            }
            Dataset::new(xs, n, p, None, ModelFamily::Mean)?
        }
        ModelFamily::Regression => {
            let betas: Vec<Vec<f64>> = (0..=cfg.k)
                .map(|s| segment_vector(s, p, cfg.delta))
                .collect();
            let mut xs = Vec::with_capacity(n * p);
            let mut ys = Vec::with_capacity(n);
            for (seg, iv) in cps.partition().into_iter().enumerate() {
                for _ in iv.start..iv.end {
                    let mut y = 0.0;
                    for j in 0..p {
                        let x: f64 = rng.sample(StandardNormal);
                        y += betas[seg][j] * x;
                        xs.push(x);
                    }
                    let z: f64 = rng.sample(StandardNormal);
                    ys.push(y + cfg.sigma_eps * z);
                }
            }
            Dataset::new(xs, n, p, Some(ys), ModelFamily::Regression)?
        }
        ModelFamily::Graphical => {
            if !(cfg.delta_off >= 0.0 && cfg.delta_diag > 2.0 * cfg.delta_off) {
                return Err(Error::InfeasibleConfig(format!(
                    "tridiagonal covariance needs delta_diag > 2 * delta_off >= 0, got {} and {}",
                    cfg.delta_diag, cfg.delta_off
                )));
            }
            let mut alt = DMatrix::<f64>::zeros(p, p);
            for i in 0..p {
                alt[(i, i)] = cfg.delta_diag;
                if i + 1 < p {
                    alt[(i, i + 1)] = cfg.delta_off;
                    alt[(i + 1, i)] = cfg.delta_off;
                }
            }
            let chol = nalgebra::Cholesky::new(alt).ok_or_else(|| {
                Error::InfeasibleConfig("alternate covariance is not positive definite".into())
            })?;
            let l = chol.l();
            let mut xs = Vec::with_capacity(n * p);
            let mut z = vec![0.0; p];
            for (seg, iv) in cps.partition().into_iter().enumerate() {
                let alternate = seg % 2 == 1;
                for _ in iv.start..iv.end {
                    for zj in z.iter_mut() {
                        *zj = rng.sample(StandardNormal);
                    }
                    if alternate {
                        // Row = L z realizes the tridiagonal covariance.
                        for i in 0..p {
                            let mut v = 0.0;
                            for j in 0..=i {
                                v += l[(i, j)] * z[j];
                            }
                            xs.push(v);
                        }
                    } else {
                        xs.extend_from_slice(&z);
                    }
                }
            }
            Dataset::new(xs, n, p, None, ModelFamily::Graphical)?
        }
    };
    Ok((data, cps))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub true_points: Vec<usize>,
    pub k_true: usize,
    pub points: Vec<usize>,
    pub divide_points: Vec<usize>,
    pub k_hat: usize,
    pub divide_k: usize,
    /// Distance between the refined points and the truth; absent when either
    /// set is empty.
    pub hausdorff: Option<f64>,
    pub divide_hausdorff: Option<f64>,
    pub gamma: f64,
    pub zeta: f64,
    pub cv_seconds: f64,
    pub divide_seconds: f64,
    pub refine_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trials: usize,
    pub k_under: usize,
    pub k_exact: usize,
    pub k_over: usize,
    /// Trials where the distance to the truth was defined.
    pub h_defined: usize,
    pub h_mean: Option<f64>,
    pub h_sd: Option<f64>,
    pub h_median: Option<f64>,
    pub divide_h_median: Option<f64>,
    pub cv_seconds_mean: f64,
    pub cv_seconds_sd: f64,
    pub divide_seconds_mean: f64,
    pub divide_seconds_sd: f64,
    pub refine_seconds_mean: f64,
    pub refine_seconds_sd: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialReport {
    pub outcomes: Vec<TrialOutcome>,
    pub summary: TrialSummary,
}

/// Runs `trials` independent simulate-detect rounds, in parallel across the
/// given number of threads (or rayon's default). Outcomes keep trial order.
pub fn run_trials(
    sim: &SimConfig,
    det: &DetectorConfig,
    trials: u64,
    jobs: Option<usize>,
) -> Result<TrialReport> {
    if det.model.family != sim.family {
        return Err(Error::InfeasibleConfig(format!(
            "detector family {} does not match simulation family {}",
            det.model.family, sim.family
        )));
    }
    if trials == 0 {
        return Err(Error::InfeasibleConfig("trials must be >= 1".into()));
    }
    let t0 = Instant::now();
    let run_one = |trial: u64| -> Result<TrialOutcome> {
        let (data, truth) = generate(sim, trial)?;
        let out = detect(&data, det)?;
        let h = hausdorff(&out.change_points, truth.points()).ok();
        let dh = hausdorff(&out.divide_points, truth.points()).ok();
        Ok(TrialOutcome {
            trial,
            true_points: truth.points().to_vec(),
            k_true: truth.len(),
            k_hat: out.change_points.len(),
            divide_k: out.divide_points.len(),
            points: out.change_points,
            divide_points: out.divide_points,
            hausdorff: h,
            divide_hausdorff: dh,
            gamma: out.gamma,
            zeta: out.zeta,
            cv_seconds: out.timings.cv_seconds,
            divide_seconds: out.timings.divide_seconds,
            refine_seconds: out.timings.refine_seconds,
        })
    };
    let outcomes: Result<Vec<TrialOutcome>> = match jobs {
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| Error::InfeasibleConfig(format!("thread pool: {e}")))?;
            pool.install(|| (0..trials).into_par_iter().map(run_one).collect())
        }
        None => (0..trials).into_par_iter().map(run_one).collect(),
    };
    let outcomes = outcomes?;
    let summary = summarize(&outcomes, t0.elapsed().as_secs_f64());
    Ok(TrialReport { outcomes, summary })
}

#[must_use]
pub fn summarize(outcomes: &[TrialOutcome], total_seconds: f64) -> TrialSummary {
    let trials = outcomes.len();
    let k_under = outcomes.iter().filter(|o| o.k_hat < o.k_true).count();
    let k_exact = outcomes.iter().filter(|o| o.k_hat == o.k_true).count();
    let k_over = outcomes.iter().filter(|o| o.k_hat > o.k_true).count();
    let hs: Vec<f64> = outcomes.iter().filter_map(|o| o.hausdorff).collect();
    let dhs: Vec<f64> = outcomes.iter().filter_map(|o| o.divide_hausdorff).collect();
    let (h_mean, h_sd) = if hs.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_sd(&hs);
        (Some(m), Some(s))
    };
    let cv: Vec<f64> = outcomes.iter().map(|o| o.cv_seconds).collect();
    let dv: Vec<f64> = outcomes.iter().map(|o| o.divide_seconds).collect();
    let rf: Vec<f64> = outcomes.iter().map(|o| o.refine_seconds).collect();
    let (cv_m, cv_s) = mean_sd(&cv);
    let (dv_m, dv_s) = mean_sd(&dv);
    let (rf_m, rf_s) = mean_sd(&rf);
    TrialSummary {
        trials,
        k_under,
        k_exact,
        k_over,
        h_defined: hs.len(),
        h_mean,
        h_sd,
        h_median: median_of(&hs),
        divide_h_median: median_of(&dhs),
        cv_seconds_mean: cv_m,
        cv_seconds_sd: cv_s,
        divide_seconds_mean: dv_m,
        divide_seconds_sd: dv_s,
        refine_seconds_mean: rf_m,
        refine_seconds_sd: rf_s,
        total_seconds,
    }
}

/// Sample mean and sd (n - 1 denominator; a single value has sd 0).
#[must_use]
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
    (mean, var.sqrt())
}

/// Median of a sample; `None` when empty. Even lengths average the middle pair.
#[must_use]
pub fn median_of(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

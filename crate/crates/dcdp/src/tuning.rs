//! Penalty selection by sample splitting.
//!
//! Odd-indexed observations (1-based) train, even-indexed ones test. Both
//! halves keep the time order, so a boundary after t train rows sits after t
//! test rows as well; train-scale cut points transfer to the test half
//! unchanged (and double to land on the full scale). For each candidate
//! penalty pair the full divide-plus-refine pipeline runs on the training
//! half, segment parameters are refit on the training segments, and the
//! fixed-parameter loss of those estimates on the test half is the risk.

use crate::cache::{CacheMode, PrefixCache, DEFAULT_GRAM_BUDGET};
use crate::data::{Dataset, ModelFamily};
use crate::divide::{divide, DivideConfig};
use crate::error::{Error, Result};
use crate::estimators::{fit_stats, gof_stats, loss_at, FitScratch, ModelSpec};
use crate::grid::GridSpec;
use crate::refine::{refine, RefineConfig};
use crate::segment::{ChangePoints, Interval};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Position i pairs gamma_i with zeta_i; lengths must match.
    Zipped,
    /// Every gamma meets every zeta.
    Cartesian,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvPlan {
    pub gammas: Vec<f64>,
    pub zetas: Vec<f64>,
    pub pairing: Pairing,
    /// Goodness-of-fit pivot behind a default gamma ladder, for reporting.
    pub gamma_pivot: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvCandidate {
    pub gamma: f64,
    pub zeta: f64,
    pub risk: f64,
    /// Segments found on the training half.
    pub k_hat: usize,
    /// True when the candidate pipeline failed and the single-segment
    /// fallback risk was used instead.
    pub fallback: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub candidates: Vec<CvCandidate>,
    pub selected: usize,
    pub gamma_pivot: Option<f64>,
    /// Another candidate achieved exactly the selected risk.
    pub tie: bool,
}

impl CvReport {
    #[must_use]
    pub fn selected_gamma(&self) -> f64 {
        self.candidates[self.selected].gamma
    }

    #[must_use]
    pub fn selected_zeta(&self) -> f64 {
        self.candidates[self.selected].zeta
    }
}

/// Splits rows into (train, test) by alternating positions, train first.
///
/// # Errors
/// `TooShort` when `n < 4` (each half needs at least two rows).
pub fn odd_even_split(data: &Dataset) -> Result<(Dataset, Dataset)> {
    let n = data.n();
    if n < 4 {
        return Err(Error::TooShort {
            op: "sample split",
            min: 4,
            n,
        });
    }
    let train_rows: Vec<usize> = (0..n).step_by(2).collect();
    let test_rows: Vec<usize> = (1..n).step_by(2).collect();
    Ok((data.take_rows(&train_rows), data.take_rows(&test_rows)))
}

/// Maps train-scale cut points onto the full scale (each boundary after t
/// train rows falls after 2t full rows).
pub fn scale_train_points_to_full(points: &[usize], n_full: usize) -> Result<ChangePoints> {
    let doubled: Vec<usize> = points.iter().map(|t| 2 * t).collect();
    ChangePoints::new(doubled, n_full)
}

/// Default gamma ladder: eight geometric points spanning [0.05, 5] times the
/// pivot, where the pivot is the whole-series goodness of fit spread over
/// `k_hint + 1` segments. Returns (ladder, pivot).
pub fn default_gamma_ladder(
    cache: &PrefixCache,
    model: &ModelSpec,
    k_hint: usize,
) -> Result<(Vec<f64>, f64)> {
    let stats = cache.interval_stats(Interval {
        start: 0,
        end: cache.n(),
    })?;
    let mut scratch = FitScratch::new(cache.p());
    let gof = gof_stats(&stats, model, &mut scratch)?;
    let mut pivot = gof / (k_hint + 1) as f64;
    if !pivot.is_finite() || pivot <= 0.0 {
        pivot = 1.0;
    }
    let ladder = (0..8)
        .map(|i| pivot * 0.05 * 100f64.powf(i as f64 / 7.0))
        .collect();
    Ok((ladder, pivot))
}

/// Default refinement penalty: `scale * sqrt(log(max(n, p)))`.
#[must_use]
pub fn default_zeta(n: usize, p: usize, scale: f64) -> f64 {
    scale * (n.max(p) as f64).ln().max(1.0).sqrt()
}

/// Runs the candidate sweep with automatic cache storage.
pub fn cv_select(
    data: &Dataset,
    plan: &CvPlan,
    divide_template: &DivideConfig,
    refine_template: &RefineConfig,
) -> Result<CvReport> {
    cv_select_with_mode(
        data,
        plan,
        divide_template,
        refine_template,
        CacheMode::Auto,
        DEFAULT_GRAM_BUDGET,
    )
}

pub fn cv_select_with_mode(
    data: &Dataset,
    plan: &CvPlan,
    divide_template: &DivideConfig,
    refine_template: &RefineConfig,
    mode: CacheMode,
    gram_budget: usize,
) -> Result<CvReport> {
    let pairs: Vec<(f64, f64)> = match plan.pairing {
        Pairing::Zipped => {
            if plan.gammas.len() != plan.zetas.len() {
                return Err(Error::InfeasibleConfig(format!(
                    "zipped pairing needs equal ladder lengths, got {} gammas and {} zetas",
                    plan.gammas.len(),
                    plan.zetas.len()
                )));
            }
            plan.gammas
                .iter()
                .copied()
                .zip(plan.zetas.iter().copied())
                .collect()
        }
        Pairing::Cartesian => plan
            .gammas
            .iter()
            .flat_map(|&g| plan.zetas.iter().map(move |&z| (g, z)))
            .collect(),
    };
    if pairs.is_empty() {
        return Err(Error::InfeasibleConfig("empty candidate set".into()));
    }

    let (train, test) = odd_even_split(data)?;
    let train_cache = PrefixCache::build(&train, mode, gram_budget)?;
    let test_cache = PrefixCache::build(&test, mode, gram_budget)?;
    let m_train = train.n();
    let m_test = test.n();
    let grid = shrink_grid(
        &divide_template.grid,
        m_train,
        divide_template.model.min_span,
    );
    let p = data.p();
    // Margins resolved for the full scale are halved on the training half,
    // but never below the family floor (graphical flanks must stay full rank).
    let floor = match data.family() {
        ModelFamily::Graphical => p + 2,
        _ => 2,
    };
    let train_margin = floor.max(refine_template.edge_margin / 2);
    let mut scratch = FitScratch::new(p);

    let mut candidates = Vec::with_capacity(pairs.len());
    for (gamma, zeta) in pairs {
        let attempt = (|| -> Result<(f64, usize)> {
            let dcfg = DivideConfig {
                gamma,
                grid: grid.clone(),
                model: divide_template.model.clone(),
            };
            let div = divide(&train_cache, &dcfg)?;
            let rcfg = RefineConfig {
                zeta,
                edge_margin: train_margin,
                model: refine_template.model.clone(),
                graphical_frobenius: refine_template.graphical_frobenius,
            };
            let cps = refine(&train_cache, &div.change_points, &rcfg)?.change_points;
            let risk = split_risk(
                &train_cache,
                &test_cache,
                &cps,
                &divide_template.model,
                &mut scratch,
                m_test,
            )?;
            Ok((risk, cps.len()))
        })();
        let (risk, k_hat, fallback) = match attempt {
            Ok((risk, k)) => (risk, k, false),
            Err(_) => {
                let single = ChangePoints::empty(m_train);
                let risk = split_risk(
                    &train_cache,
                    &test_cache,
                    &single,
                    &divide_template.model,
                    &mut scratch,
                    m_test,
                )
                .unwrap_or(f64::INFINITY);
                (risk, 0, true)
            }
        };
        candidates.push(CvCandidate {
            gamma,
            zeta,
            risk,
            k_hat,
            fallback,
        });
    }

    let mut selected = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.risk < candidates[selected].risk {
            selected = i;
        }
    }
    let tie = candidates
        .iter()
        .enumerate()
        .any(|(i, c)| i != selected && c.risk == candidates[selected].risk);
    Ok(CvReport {
        candidates,
        selected,
        gamma_pivot: plan.gamma_pivot,
        tie,
    })
}

/// Test risk of a train-scale segmentation: refit each training segment
/// without gating, evaluate the frozen estimates on the aligned test
/// segments (clipped to the test length; empty ones contribute nothing).
fn split_risk(
    train_cache: &PrefixCache,
    test_cache: &PrefixCache,
    cps: &ChangePoints,
    model: &ModelSpec,
    scratch: &mut FitScratch,
    m_test: usize,
) -> Result<f64> {
    let mut risk = 0.0;
    for seg in cps.partition() {
        let stats = train_cache.interval_stats(seg)?;
        let core = fit_stats(&stats, model, scratch)?;
        let lo = seg.start.min(m_test);
        let hi = seg.end.min(m_test);
        if lo < hi {
            let tstats = test_cache.interval_stats(Interval { start: lo, end: hi })?;
            risk += loss_at(&core.theta, &tstats);
        }
    }
    Ok(risk)
}

/// Re-targets a grid specification at the training length: sizes clamp to
/// m - 1, explicit full-scale points halve (dropping 0 and duplicates).
fn shrink_grid(grid: &GridSpec, m: usize, min_span: usize) -> GridSpec {
    // Node spacing below the fit gate would let the train DP build segments
    // whose goodness of fit is identically zero; cap the density instead.
    let cap = (m / min_span.max(1)).saturating_sub(1).max(1);
    match grid {
        GridSpec::Uniform { q } => GridSpec::Uniform {
            q: (*q).min(m.saturating_sub(1)).min(cap).max(1),
        },
        GridSpec::Random { q, seed } => GridSpec::Random {
            q: (*q).min(m.saturating_sub(1)).min(cap).max(1),
            seed: *seed,
        },
        GridSpec::Explicit { points } => {
            let mut halved: Vec<usize> = points.iter().map(|t| t / 2).filter(|&t| t > 0).collect();
            halved.sort_unstable();
            halved.dedup();
            GridSpec::Explicit { points: halved }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::DEFAULT_GRAM_BUDGET;
    use crate::estimators::ModelConfig;
    use crate::refine::default_edge_margin;

    fn series(n: usize, step_at: usize, size: f64) -> Dataset {
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let base = if i < step_at { 0.0 } else { size };
                base + ((i as f64 * 12.9898).sin() * 43758.5453).fract() - 0.5
            })
            .collect();
        Dataset::new(vals, n, 1, None, ModelFamily::Mean).unwrap()
    }

    #[test]
    fn split_alternates_rows() {
        let d = Dataset::new(
            vec![10.0, 11.0, 12.0, 13.0, 14.0, 15.0],
            6,
            1,
            None,
            ModelFamily::Mean,
        )
        .unwrap();
        let (train, test) = odd_even_split(&d).unwrap();
        assert_eq!(train.xs(), &[10.0, 12.0, 14.0]);
        assert_eq!(test.xs(), &[11.0, 13.0, 15.0]);

        let odd = Dataset::new(vec![0.0; 7], 7, 1, None, ModelFamily::Mean).unwrap();
        let (tr, te) = odd_even_split(&odd).unwrap();
        assert_eq!(tr.n(), 4);
        assert_eq!(te.n(), 3);
    }

    #[test]
    fn split_needs_four_rows() {
        let d = Dataset::new(vec![0.0; 3], 3, 1, None, ModelFamily::Mean).unwrap();
        assert!(matches!(odd_even_split(&d), Err(Error::TooShort { .. })));
    }

    #[test]
    fn train_points_double_onto_full_scale() {
        let cps = scale_train_points_to_full(&[2], 8).unwrap();
        assert_eq!(cps.points(), &[4]);
    }

    #[test]
    fn selects_gamma_that_recovers_the_shift() {
        let d = series(80, 40, 6.0);
        let model = ModelConfig::new(ModelFamily::Mean).resolve(&d).unwrap();
        let cache = PrefixCache::build(&d, CacheMode::Auto, DEFAULT_GRAM_BUDGET).unwrap();
        let (gammas, pivot) = default_gamma_ladder(&cache, &model, 3).unwrap();
        let zeta = default_zeta(d.n(), d.p(), 1.0);
        let plan = CvPlan {
            zetas: vec![zeta; gammas.len()],
            gammas,
            pairing: Pairing::Zipped,
            gamma_pivot: Some(pivot),
        };
        let dcfg = DivideConfig {
            gamma: 1.0,
            grid: GridSpec::Uniform { q: 20 },
            model: model.clone(),
        };
        let rcfg = RefineConfig {
            zeta,
            edge_margin: default_edge_margin(&model, 1),
            model: model.clone(),
            graphical_frobenius: false,
        };
        let report = cv_select(&d, &plan, &dcfg, &rcfg).unwrap();
        let chosen = &report.candidates[report.selected];
        assert_eq!(chosen.k_hat, 1, "candidates: {:?}", report.candidates);
        assert!(!chosen.fallback);
        assert!(report.gamma_pivot.is_some());
        for c in &report.candidates {
            assert!(chosen.risk <= c.risk);
        }
    }

    #[test]
    fn zipped_length_mismatch_rejected() {
        let d = series(20, 10, 3.0);
        let model = ModelConfig::new(ModelFamily::Mean).resolve(&d).unwrap();
        let plan = CvPlan {
            gammas: vec![1.0, 2.0],
            zetas: vec![0.5],
            pairing: Pairing::Zipped,
            gamma_pivot: None,
        };
        let dcfg = DivideConfig {
            gamma: 1.0,
            grid: GridSpec::Uniform { q: 5 },
            model: model.clone(),
        };
        let rcfg = RefineConfig {
            zeta: 0.5,
            edge_margin: 2,
            model,
            graphical_frobenius: false,
        };
        assert!(cv_select(&d, &plan, &dcfg, &rcfg).is_err());
    }

    #[test]
    fn exact_duplicate_candidates_flag_a_tie() {
        let d = series(40, 20, 5.0);
        let model = ModelConfig::new(ModelFamily::Mean).resolve(&d).unwrap();
        let plan = CvPlan {
            gammas: vec![2.0, 2.0],
            zetas: vec![0.5, 0.5],
            pairing: Pairing::Zipped,
            gamma_pivot: None,
        };
        let dcfg = DivideConfig {
            gamma: 1.0,
            grid: GridSpec::Uniform { q: 10 },
            model: model.clone(),
        };
        let rcfg = RefineConfig {
            zeta: 0.5,
            edge_margin: 2,
            model,
            graphical_frobenius: false,
        };
        let report = cv_select(&d, &plan, &dcfg, &rcfg).unwrap();
        assert_eq!(report.selected, 0);
        assert!(report.tie);
    }

    #[test]
    fn explicit_grid_points_halve_for_the_training_scale() {
        // Halving maps 1,2,3 onto 0,1,1; zero drops and duplicates merge.
        let g = shrink_grid(
            &GridSpec::Explicit {
                points: vec![1, 2, 3, 8],
            },
            10,
            1,
        );
        match g {
            GridSpec::Explicit { points } => assert_eq!(points, vec![1, 4]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ladder_spans_two_decades_around_pivot() {
        let d = series(60, 30, 4.0);
        let model = ModelConfig::new(ModelFamily::Mean).resolve(&d).unwrap();
        let cache = PrefixCache::build(&d, CacheMode::Auto, DEFAULT_GRAM_BUDGET).unwrap();
        let (ladder, pivot) = default_gamma_ladder(&cache, &model, 3).unwrap();
        assert_eq!(ladder.len(), 8);
        assert!((ladder[0] - 0.05 * pivot).abs() < 1e-9 * pivot);
        assert!((ladder[7] - 5.0 * pivot).abs() < 1e-9 * pivot);
        for w in ladder.windows(2) {
            assert!(w[1] > w[0]);
        }
    }
}

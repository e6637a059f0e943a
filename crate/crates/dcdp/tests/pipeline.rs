//! Property tests for the detection pipeline invariants: statistic caching,
//! estimator optimality against numeric minimizers, segmentation optimality
//! against brute force, metric axioms, and refinement output shape.

mod common;

use common::*;
use dcdp::cache::{CacheMode, PrefixCache, RunningStats, StatsBuf};
use dcdp::data::{Dataset, ModelFamily};
use dcdp::divide::{divide, divide_objective, DivideConfig};
use dcdp::estimators::{fit, fit_stats, Estimate, FitScratch, ModelSpec};
use dcdp::grid::{resolve_grid, GridSpec};
use dcdp::refine::{refine, two_segment_mean, RefineConfig};
use dcdp::segment::{hausdorff, ChangePoints, Interval};
use dcdp::tuning::{cv_select, CvPlan, Pairing};
use dcdp::DEFAULT_GRAM_BUDGET;
use proptest::prelude::*;

fn spec_for(family: ModelFamily, lambda: f64, min_span: usize) -> ModelSpec {
    ModelSpec {
        family,
        lambda,
        min_span,
        cd_tol: 1e-11,
        cd_max_iter: 200_000,
        ridge_eps: 1e-8,
        noise_scale: 1.0,
    }
}

fn dataset_of(
    family: ModelFamily,
    xs: Vec<f64>,
    n: usize,
    p: usize,
    ys: Option<Vec<f64>>,
) -> Dataset {
    Dataset::new(xs, n, p, ys, family).expect("finite values by construction")
}

/// (dataset, inner split point s < m < e interval) over all three families.
fn additivity_case() -> impl Strategy<Value = (Dataset, usize, usize, usize)> {
    (0u8..3, 3usize..28, 1usize..5).prop_flat_map(|(fam, n, p)| {
        let family = match fam {
            0 => ModelFamily::Mean,
            1 => ModelFamily::Regression,
            _ => ModelFamily::Graphical,
        };
        let xs = prop::collection::vec(-5.0..5.0f64, n * p);
        let ys = if family == ModelFamily::Regression {
            prop::collection::vec(-5.0..5.0f64, n)
                .prop_map(Some)
                .boxed()
        } else {
            Just(None).boxed()
        };
        (xs, ys, 0..n - 2, Just(n), Just(p), Just(family)).prop_flat_map(
            |(xs, ys, s, n, p, family)| {
                let data = dataset_of(family, xs, n, p, ys);
                (Just(data), Just(s), s + 1..n, Just(n))
                    .prop_flat_map(|(d, s, m, n)| (Just(d), Just(s), Just(m), m + 1..=n))
            },
        )
    })
}

fn assert_additive(parts: (&[f64], &[f64]), whole: &[f64], tol: f64) {
    let (a, b) = parts;
    for ((x, y), z) in a.iter().zip(b).zip(whole) {
        let err = rel_err(x + y, *z);
        assert!(
            err <= tol,
            "additivity violated: {x} + {y} vs {z} (rel {err:.3e})"
        );
    }
}

proptest! {
    /// Interval statistics add across an interior split, all families.
    #[test]
    fn interval_stats_are_additive((data, s, m, e) in additivity_case()) {
        let cache = PrefixCache::build(&data, CacheMode::Prefix, DEFAULT_GRAM_BUDGET).unwrap();
        let left = cache.interval_stats(Interval { start: s, end: m }).unwrap();
        let right = cache.interval_stats(Interval { start: m, end: e }).unwrap();
        let whole = cache.interval_stats(Interval { start: s, end: e }).unwrap();
        prop_assert_eq!(left.len + right.len, whole.len);
        assert_additive((&left.sum_x, &right.sum_x), &whole.sum_x, 1e-12);
        assert_additive((&left.sum_x2, &right.sum_x2), &whole.sum_x2, 1e-12);
        assert_additive((&left.gram, &right.gram), &whole.gram, 1e-12);
        assert_additive((&left.sum_xy, &right.sum_xy), &whole.sum_xy, 1e-12);
        prop_assert!(rel_err(left.sum_yy + right.sum_yy, whole.sum_yy) <= 1e-12);
    }

    /// The prefix tables agree with direct summation over the rows.
    #[test]
    fn interval_stats_match_direct_summation((data, s, _m, e) in additivity_case()) {
        let cache = PrefixCache::build(&data, CacheMode::Prefix, DEFAULT_GRAM_BUDGET).unwrap();
        let got = cache.interval_stats(Interval { start: s, end: e }).unwrap();
        let want = naive_interval_stats(&data, s, e);
        for (g, w) in got.sum_x.iter().zip(&want.sum_x) {
            prop_assert!(rel_err(*g, *w) <= 1e-12);
        }
        for (g, w) in got.sum_x2.iter().zip(&want.sum_x2[..got.sum_x2.len()]) {
            prop_assert!(rel_err(*g, *w) <= 1e-12);
        }
        let p = data.p();
        for (k, g) in got.gram.iter().enumerate() {
            prop_assert!(rel_err(*g, want.gram[k]) <= 1e-12, "gram entry {k} of p = {p}");
        }
        for (g, w) in got.sum_xy.iter().zip(&want.sum_xy) {
            prop_assert!(rel_err(*g, *w) <= 1e-12);
        }
        if data.family() == ModelFamily::Regression {
            prop_assert!(rel_err(got.sum_yy, want.sum_yy) <= 1e-12);
        }
    }

    /// A running accumulator with arbitrary row removals equals direct
    /// summation over the retained rows.
    #[test]
    #[allow(clippy::needless_range_loop)]
    fn running_stats_track_retained_rows(
        (data, _s, _m, _e) in additivity_case(),
        mask_seed in any::<u64>(),
    ) {
        let n = data.n();
        let p = data.p();
        let mut run = RunningStats::new(p, data.family());
        for t in 0..n {
            run.add_row(&data, t);
        }
        let mut kept = vec![true; n];
        let mut state = mask_seed | 1;
        for (t, keep) in kept.iter_mut().enumerate() {
            // Small xorshift; only drives which rows get removed.
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            if state % 3 == 0 && t > 0 {
                *keep = false;
                run.remove_row(&data, t);
            }
        }
        let got = run.stats();
        let rows: Vec<usize> = (0..n).filter(|&t| kept[t]).collect();
        let mut sum_x = vec![0.0; p];
        let mut gram = vec![0.0; p * p];
        let mut sum_xy = vec![0.0; p];
        let mut sum_yy = 0.0;
        for &t in &rows {
            let row = data.row(t);
            for i in 0..p {
                sum_x[i] += row[i];
                for j in 0..p {
                    gram[i * p + j] += row[i] * row[j];
                }
            }
            if let Some(ys) = data.ys() {
                for i in 0..p {
                    sum_xy[i] += ys[t] * row[i];
                }
                sum_yy += ys[t] * ys[t];
            }
        }
        prop_assert_eq!(got.len, rows.len());
        for j in 0..p {
            prop_assert!((got.sum_x[j] - sum_x[j]).abs() <= 1e-9);
        }
        for (k, g) in got.gram.iter().enumerate() {
            prop_assert!((g - gram[k]).abs() <= 1e-9);
        }
        for (k, g) in got.sum_xy.iter().enumerate() {
            prop_assert!((g - sum_xy[k]).abs() <= 1e-9);
        }
        if data.family() == ModelFamily::Regression {
            prop_assert!((got.sum_yy - sum_yy).abs() <= 1e-9);
        }
    }
}

fn point_set() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::btree_set(1usize..60, 1..6).prop_map(|s| s.into_iter().collect())
}

proptest! {
    /// Distance axioms for the set metric used to score detections.
    #[test]
    fn hausdorff_metric_axioms(a in point_set(), b in point_set(), c in point_set()) {
        let hab = hausdorff(&a, &b).unwrap();
        let hba = hausdorff(&b, &a).unwrap();
        let hac = hausdorff(&a, &c).unwrap();
        let hbc = hausdorff(&b, &c).unwrap();
        prop_assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(hab, hba);
        prop_assert!(hab >= 0.0);
        prop_assert!(hac <= hab + hbc + 1e-12, "triangle: {hac} > {hab} + {hbc}");
        prop_assert_eq!(hab == 0.0, a == b);
    }
}

proptest! {
    /// The per-coordinate mean estimate matches a golden-section minimizer of
    /// the penalized scalar objective.
    #[test]
    fn mean_fit_matches_numeric_minimizer(
        values in prop::collection::vec(-6.0..6.0f64, 2..25),
        lambda in 0.0..8.0f64,
    ) {
        let n = values.len();
        let data = dataset_of(ModelFamily::Mean, values.clone(), n, 1, None);
        let cache = PrefixCache::build(&data, CacheMode::Prefix, DEFAULT_GRAM_BUDGET).unwrap();
        let spec = spec_for(ModelFamily::Mean, lambda, 1);
        let out = fit(&cache, Interval { start: 0, end: n }, &spec).unwrap();
        let Some(Estimate::Mean { mu }) = out.theta else { panic!("mean estimate") };
        let want = scalar_mean_argmin(&values, lambda);
        prop_assert!((mu[0] - want).abs() <= 1e-6, "mu {} vs numeric {}", mu[0], want);
        prop_assert!(rel_err(out.gof, naive_mean_gof(&values, 0, n, lambda, 1)) <= 1e-9);
    }

    /// The joint two-segment mean fit applies the group shrinkage that a
    /// numeric minimizer of the coupled objective produces.
    #[test]
    fn group_shrinkage_matches_numeric_minimizer(
        u1 in -6.0..6.0f64,
        u2 in -6.0..6.0f64,
        zeta in 0.0..8.0f64,
    ) {
        // Four constant rows per side make the scaled segment sums exactly
        // (2 c_left, 2 c_right); choose c so those sums equal (u1, u2).
        let mut xs = vec![u1 / 2.0; 4];
        xs.extend(vec![u2 / 2.0; 4]);
        let data = dataset_of(ModelFamily::Mean, xs, 8, 1, None);
        let cache = PrefixCache::build(&data, CacheMode::Prefix, DEFAULT_GRAM_BUDGET).unwrap();
        let fit = two_segment_mean(&cache, 0, 8, 4, zeta).unwrap();
        let (v1, v2) = group_shrink_oracle(u1, u2, zeta);
        let Estimate::Mean { mu: ml } = &fit.theta_left else { panic!("mean estimate") };
        let Estimate::Mean { mu: mr } = &fit.theta_right else { panic!("mean estimate") };
        prop_assert!((ml[0] - v1 / 2.0).abs() <= 1e-6, "left {} vs {}", ml[0], v1 / 2.0);
        prop_assert!((mr[0] - v2 / 2.0).abs() <= 1e-6, "right {} vs {}", mr[0], v2 / 2.0);
    }
}

/// Small mean instance plus candidate cuts for brute-force comparison.
fn small_dp_case() -> impl Strategy<Value = (Dataset, Vec<usize>, f64, f64, usize)> {
    (6usize..13, 1usize..4).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec(-4.0..4.0f64, n * p),
            prop::collection::btree_set(1..n, 1..5),
            0.5..25.0f64,
            0.0..4.0f64,
            1usize..3,
            Just(n),
            Just(p),
        )
            .prop_map(|(xs, grid, gamma, lambda, min_span, n, p)| {
                let data = dataset_of(ModelFamily::Mean, xs, n, p, None);
                (data, grid.into_iter().collect(), gamma, lambda, min_span)
            })
    })
}

proptest! {
    /// The divide step equals brute-force enumeration over the candidate set.
    #[test]
    fn divide_matches_exhaustive_enumeration(
        (data, grid, gamma, lambda, min_span) in small_dp_case(),
    ) {
        let cache = PrefixCache::build(&data, CacheMode::Prefix, DEFAULT_GRAM_BUDGET).unwrap();
        let cfg = DivideConfig {
            gamma,
            grid: GridSpec::Explicit { points: grid.clone() },
            model: spec_for(ModelFamily::Mean, lambda, min_span),
        };
        let out = divide(&cache, &cfg).unwrap();
        let (best, _) = exhaustive_best_segmentation(&data, &grid, gamma, lambda, min_span);
        prop_assert!(
            (out.objective - best).abs() <= 1e-9,
            "dp {} vs exhaustive {}",
            out.objective,
            best
        );
        // The reported points must themselves achieve the reported objective.
        let recomputed = divide_objective(&cache, &out.change_points, &cfg).unwrap();
        prop_assert!(rel_err(out.objective, recomputed) <= 1e-9);
    }

    /// Prefix and streamed scans reach the same optimum.
    #[test]
    fn streamed_scan_matches_prefix_scan((data, grid, gamma, lambda, min_span) in small_dp_case()) {
        let cfg = DivideConfig {
            gamma,
            grid: GridSpec::Explicit { points: grid },
            model: spec_for(ModelFamily::Mean, lambda, min_span),
        };
        let pre = PrefixCache::build(&data, CacheMode::Prefix, DEFAULT_GRAM_BUDGET).unwrap();
        let st = PrefixCache::build(&data, CacheMode::Streamed, DEFAULT_GRAM_BUDGET).unwrap();
        let a = divide(&pre, &cfg).unwrap();
        let b = divide(&st, &cfg).unwrap();
        prop_assert!(rel_err(a.objective, b.objective) <= 1e-9);
    }
}

proptest! {
    /// Lasso coordinate descent satisfies the stationarity conditions,
    /// checked with statistics recomputed directly from the rows.
    #[test]
    fn lasso_solution_satisfies_kkt(
        (n, p) in (15usize..40, 2usize..7),
        seed in any::<u32>(),
        lambda in 0.05..3.0f64,
    ) {
        let mut xs = Vec::with_capacity(n * p);
        let mut ys = Vec::with_capacity(n);
        let mut state = u64::from(seed) | 1;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..n {
            for _ in 0..p {
                xs.push(next() * 2.0);
            }
            ys.push(next() * 3.0);
        }
        let data = dataset_of(ModelFamily::Regression, xs, n, p, Some(ys));
        let cache = PrefixCache::build(&data, CacheMode::Prefix, DEFAULT_GRAM_BUDGET).unwrap();
        let spec = spec_for(ModelFamily::Regression, lambda, 1);
        let out = fit(&cache, Interval { start: 0, end: n }, &spec).unwrap();
        prop_assert!(out.converged);
        let Some(Estimate::Coefficients { beta }) = out.theta else { panic!("beta") };
        let stats = naive_interval_stats(&data, 0, n);
        let resid = naive_lasso_kkt(&stats.gram, &stats.sum_xy, n, lambda, &beta);
        prop_assert!(resid <= 1e-5, "kkt residual {resid:.3e}");
    }

    /// The fitted precision matrix inverts the sample covariance.
    #[test]
    #[allow(clippy::needless_range_loop)]
    fn precision_estimate_inverts_covariance(
        p in 2usize..7,
        len in 10usize..50,
        entries in prop::collection::vec(-1.0..1.0f64, 49),
        bump in 0.5..2.0f64,
    ) {
        // Sigma = B B^T + bump I is comfortably positive definite, so no
        // ridge engages and the inverse should be essentially exact.
        let mut sigma = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                let mut acc = if i == j { bump } else { 0.0 };
                for k in 0..p {
                    acc += entries[i * 7 + k] * entries[j * 7 + k];
                }
                sigma[i * p + j] = acc;
            }
        }
        let mut stats = StatsBuf::new(p, ModelFamily::Graphical);
        stats.len = len;
        for k in 0..p * p {
            stats.gram[k] = sigma[k] * len as f64;
        }
        let spec = spec_for(ModelFamily::Graphical, 0.0, 1);
        let mut scratch = FitScratch::new(p);
        let core = fit_stats(&stats, &spec, &mut scratch).unwrap();
        let Estimate::Precision { omega, .. } = core.theta else { panic!("precision") };
        for i in 0..p {
            for j in 0..p {
                let mut prod = 0.0;
                for k in 0..p {
                    prod += omega[(i, k)] * sigma[k * p + j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!(
                    (prod - target).abs() <= 1e-8,
                    "(omega sigma)[{i},{j}] = {prod}"
                );
            }
        }
    }
}

/// Mean data with shifts plus arbitrary initial points for refinement.
fn refine_case() -> impl Strategy<Value = (Dataset, Vec<usize>, f64)> {
    (24usize..60, 1usize..4).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec(-3.0..3.0f64, n * p),
            prop::collection::btree_set(2..n - 1, 1..5),
            0.0..3.0f64,
            Just(n),
            Just(p),
        )
            .prop_map(|(xs, pts, zeta, n, p)| {
                let data = dataset_of(ModelFamily::Mean, xs, n, p, None);
                (data, pts.into_iter().collect(), zeta)
            })
    })
}

proptest! {
    /// Refinement preserves cardinality and strict ordering and stays inside
    /// the sample, whatever the input.
    #[test]
    fn refine_preserves_cardinality_and_order((data, pts, zeta) in refine_case()) {
        let n = data.n();
        let cache = PrefixCache::build(&data, CacheMode::Prefix, DEFAULT_GRAM_BUDGET).unwrap();
        let spec = spec_for(ModelFamily::Mean, 1.0, 2);
        let cfg = RefineConfig::new(zeta, spec, data.p());
        let cps = ChangePoints::new(pts.clone(), n).unwrap();
        let out = refine(&cache, &cps, &cfg).unwrap();
        let refined = out.change_points.points();
        prop_assert_eq!(refined.len(), pts.len());
        for w in refined.windows(2) {
            prop_assert!(w[0] < w[1], "not strictly increasing: {:?}", refined);
        }
        for &r in refined {
            prop_assert!(r >= 1 && r < n);
        }
        for d in &out.details {
            if !d.scanned {
                prop_assert_eq!(d.refined, d.initial);
            }
        }
    }
}

proptest! {
    /// Resolved search grids are strictly increasing interior points.
    #[test]
    fn resolved_grids_are_sorted_interior(
        (n, q) in (3usize..200).prop_flat_map(|n| (Just(n), 1..(n - 1).min(50))),
        seed in any::<u64>(),
    ) {
        for spec in [GridSpec::Uniform { q }, GridSpec::Random { q, seed }] {
            let pts = resolve_grid(&spec, n).unwrap();
            prop_assert!(!pts.is_empty());
            prop_assert!(pts.len() <= q);
            for w in pts.windows(2) {
                prop_assert!(w[0] < w[1]);
            }
            prop_assert!(*pts.first().unwrap() >= 1);
            prop_assert!(*pts.last().unwrap() < n);
        }
    }
}

#[test]
fn cv_selected_candidate_achieves_minimum_risk() {
    let n = 80;
    let p = 3;
    let mut xs = Vec::with_capacity(n * p);
    for t in 0..n {
        let level = if t < 40 { 0.0 } else { 4.0 };
        for j in 0..p {
            let wob: f64 = ((t * p + j) as f64 * 12.9898).sin() * 0.3;
            xs.push(level + wob);
        }
    }
    let data = dataset_of(ModelFamily::Mean, xs, n, p, None);
    let spec = spec_for(ModelFamily::Mean, 1.0, 2);
    let plan = CvPlan {
        gammas: vec![0.5, 5.0, 50.0, 5000.0],
        zetas: vec![0.5; 4],
        pairing: Pairing::Zipped,
        gamma_pivot: None,
    };
    let divide_cfg = DivideConfig {
        gamma: 1.0,
        grid: GridSpec::Uniform { q: 20 },
        model: spec.clone(),
    };
    let refine_cfg = RefineConfig::new(0.5, spec, p);
    let report = cv_select(&data, &plan, &divide_cfg, &refine_cfg).unwrap();
    assert_eq!(report.candidates.len(), 4);
    let best = report
        .candidates
        .iter()
        .map(|c| c.risk)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(report.candidates[report.selected].risk, best);
    assert!(best.is_finite());
    assert!(!report.candidates[report.selected].fallback);
}

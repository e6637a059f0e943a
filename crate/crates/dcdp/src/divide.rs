//! Divide step: exact penalized segmentation over a coarse candidate grid.
//!
//! Nodes are `{0} ∪ grid ∪ {n}`. `B[r]` is the cheapest cost of segmenting
//! `(0, node_r]` using cut points among earlier nodes, where each segment
//! contributes its gated goodness of fit plus `gamma`. Ties prefer the
//! smallest predecessor, so equal-cost solutions resolve to the earliest
//! cuts deterministically.
//!
//! Two inner loops produce the same values: per-pair prefix queries when the
//! second-order tables are stored, and a right-to-left running accumulation
//! (one block per predecessor) otherwise. The running loop touches each row
//! O(grid size) times in total per endpoint, which is what keeps the divide
//! pass near-linear in `n` at fixed grid size.

use crate::cache::{PrefixCache, RunningStats, StatsBuf};
use crate::error::{Error, Result};
use crate::estimators::{gated_gof_stats, FitScratch, ModelSpec};
use crate::grid::{resolve_grid, GridSpec};
use crate::segment::{ChangePoints, Interval};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DivideConfig {
    /// Per-segment penalty; must be > 0.
    pub gamma: f64,
    pub grid: GridSpec,
    pub model: ModelSpec,
}

/// Dynamic-programming table, kept for inspection and tests.
#[derive(Debug, Clone, Serialize)]
pub struct DpState {
    pub nodes: Vec<usize>,
    pub best_cost: Vec<f64>,
    pub back_ptr: Vec<Option<usize>>,
}

#[derive(Debug, Clone)]
pub struct DivideOutcome {
    pub change_points: ChangePoints,
    /// Total cost of the selected segmentation: sum of gated goodness of fit
    /// plus `gamma` times the number of segments.
    pub objective: f64,
    pub state: DpState,
}

// `!(gamma > 0)` rather than `gamma <= 0`: NaN must be rejected too.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn divide(cache: &PrefixCache, cfg: &DivideConfig) -> Result<DivideOutcome> {
    if !(cfg.gamma > 0.0) {
        return Err(Error::InfeasibleConfig(format!(
            "gamma must be > 0, got {}",
            cfg.gamma
        )));
    }
    if cfg.model.family != cache.family() {
        return Err(Error::InfeasibleConfig(format!(
            "model family {} does not match data family {}",
            cfg.model.family,
            cache.family()
        )));
    }
    let n = cache.n();
    let grid = resolve_grid(&cfg.grid, n)?;
    let mut nodes = Vec::with_capacity(grid.len() + 2);
    nodes.push(0);
    nodes.extend(grid);
    nodes.push(n);
    let m = nodes.len();

    let mut best = vec![f64::INFINITY; m];
    let mut back: Vec<Option<usize>> = vec![None; m];
    best[0] = 0.0;
    let mut scratch = FitScratch::new(cache.p());

    if cache.scan_streamed() {
        let data = cache.data();
        let mut acc = RunningStats::new(cache.p(), cache.family());
        for r in 1..m {
            acc.reset();
            let mut best_r = f64::INFINITY;
            let mut arg = None;
            // Descending l extends the interval leftwards block by block;
            // <= keeps the smallest predecessor on ties.
            for l in (0..r).rev() {
                acc.add_block(
                    data,
                    Interval {
                        start: nodes[l],
                        end: nodes[l + 1],
                    },
                );
                let f = gated_gof_stats(acc.stats(), &cfg.model, &mut scratch)?;
                let cand = best[l] + cfg.gamma + f;
                if cand <= best_r {
                    best_r = cand;
                    arg = Some(l);
                }
            }
            best[r] = best_r;
            back[r] = arg;
        }
    } else {
        let mut buf = StatsBuf::new(cache.p(), cache.family());
        for r in 1..m {
            let mut best_r = f64::INFINITY;
            let mut arg = None;
            for l in 0..r {
                cache.interval_stats_into(
                    Interval {
                        start: nodes[l],
                        end: nodes[r],
                    },
                    &mut buf,
                )?;
                let f = gated_gof_stats(&buf, &cfg.model, &mut scratch)?;
                let cand = best[l] + cfg.gamma + f;
                if cand < best_r {
                    best_r = cand;
                    arg = Some(l);
                }
            }
            best[r] = best_r;
            back[r] = arg;
        }
    }

    let mut cuts = Vec::new();
    let mut r = m - 1;
    while let Some(l) = back[r] {
        if l != 0 {
            cuts.push(nodes[l]);
        }
        r = l;
    }
    debug_assert_eq!(r, 0, "back pointers must chain to the origin");
    cuts.reverse();
    let change_points = ChangePoints::new(cuts, n)?;
    Ok(DivideOutcome {
        objective: best[m - 1],
        state: DpState {
            nodes,
            best_cost: best,
            back_ptr: back,
        },
        change_points,
    })
}

/// Cost of an arbitrary segmentation under the divide objective. Matches the
/// DP optimum when `cps` is the DP solution.
pub fn divide_objective(
    cache: &PrefixCache,
    cps: &ChangePoints,
    cfg: &DivideConfig,
) -> Result<f64> {
    let mut scratch = FitScratch::new(cache.p());
    let mut buf = StatsBuf::new(cache.p(), cache.family());
    let mut total = 0.0;
    for iv in cps.partition() {
        cache.interval_stats_into(iv, &mut buf)?;
        total += cfg.gamma + gated_gof_stats(&buf, &cfg.model, &mut scratch)?;
    }
    Ok(total)
}

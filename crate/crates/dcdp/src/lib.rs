//! Offline multiple change point detection in high-dimensional time series
//! by divide-and-conquer dynamic programming.
//!
//! The divide step solves a penalized segmentation exactly, but only over a
//! coarse grid of candidate cut points, which keeps the dynamic program far
//! below the quadratic cost of scanning every index. The conquer step then
//! refines each preliminary point inside a local window with a two-segment
//! penalized fit. Both steps share interval statistics served from prefix
//! tables or running accumulators (see [`cache`]).
//!
//! Three model families are supported over the same pipeline:
//! sparse mean shifts, sparse linear regression with drifting coefficients,
//! and Gaussian graphical models with changing precision matrices.
//!
//! Penalties are selected by sample splitting ([`tuning`]); [`detect`] wires
//! the whole pipeline together and [`simulate`] provides matching synthetic
//! data generators and a parallel trial runner.
//!
//! Index convention used throughout: an interval `(s, e]` over 1-based
//! positions covers 0-based rows `s..e`, and a change point is the last
//! 1-based index of the segment it closes, equivalently the first 0-based
//! row of the next regime.

pub mod cache;
pub mod data;
pub mod detect;
pub mod divide;
pub mod error;
pub mod estimators;
pub mod grid;
pub mod refine;
pub mod segment;
pub mod simulate;
pub mod tuning;

pub use cache::{CacheMode, PrefixCache, RunningStats, StatsBuf, DEFAULT_GRAM_BUDGET};
pub use data::{Dataset, ModelFamily};
pub use detect::{detect, Detection, DetectorConfig, StageTimings};
pub use divide::{divide, divide_objective, DivideConfig, DivideOutcome, DpState};
pub use error::{Error, Result};
pub use estimators::{Estimate, FitResult, ModelConfig, ModelSpec};
pub use grid::{default_grid_size, resolve_grid, GridSpec};
pub use refine::{refine, refine_windows, RefineConfig, RefineOutcome, RefinedPoint};
pub use segment::{hausdorff, ChangePoints, Interval};
pub use simulate::{generate, run_trials, SimConfig, TrialOutcome, TrialReport, TrialSummary};
pub use tuning::{cv_select, odd_even_split, CvPlan, CvReport, Pairing};

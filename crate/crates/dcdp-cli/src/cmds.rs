//! Subcommand bodies.

use crate::input::{load_csv, write_csv, write_truth, CliError};
use crate::presets::{self, PresetKind};
use crate::report::{write_json, Manifest};
use crate::{BenchArgs, DetectArgs, ModelArgs, SimulateArgs, TuneArgs};
use dcdp::cache::{CacheMode, PrefixCache, DEFAULT_GRAM_BUDGET};
use dcdp::data::ModelFamily;
use dcdp::detect::DetectorConfig;
use dcdp::divide::{divide, DivideConfig};
use dcdp::estimators::ModelConfig;
use dcdp::grid::GridSpec;
use dcdp::refine::{default_edge_margin, RefineConfig};
use dcdp::simulate::{generate, run_trials, SimConfig, TrialReport};
use dcdp::tuning::{cv_select_with_mode, default_gamma_ladder, default_zeta, CvPlan, Pairing};
use serde_json::json;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

/// Stdout print that shrugs off a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {
        let _ = writeln!(std::io::stdout(), $($arg)*);
    };
}

fn grid_from_args(model: &ModelArgs) -> Option<GridSpec> {
    if let Some(q) = model.grid_q {
        Some(GridSpec::Uniform { q })
    } else if let Some(q) = model.grid_random {
        Some(GridSpec::Random {
            q,
            seed: model.grid_seed,
        })
    } else {
        model
            .grid_points
            .clone()
            .map(|points| GridSpec::Explicit { points })
    }
}

fn detector_from_args(model: &ModelArgs) -> DetectorConfig {
    let mut det = DetectorConfig::new(model.family.into());
    det.model.lambda = model.lambda;
    det.model.min_span = model.min_span;
    if let Some(s) = model.sparsity_hint {
        det.model.sparsity_hint = s;
    }
    det.grid = grid_from_args(model);
    det.delta_min_hint = model.delta_min_hint;
    det.cache_mode = model.cache_mode.into();
    if let Some(k) = model.k_hint {
        det.cv.k_hint = k;
    }
    det
}

pub fn detect(args: &DetectArgs, argv: &[String]) -> Result<(), CliError> {
    let family: ModelFamily = args.model.family.into();
    let (data, digest) = load_csv(&args.input, family, args.model.response_col)?;

    let mut det = detector_from_args(&args.model);
    det.gamma = args.gamma;
    det.zeta = args.zeta;
    det.refine = !args.no_refine;
    det.edge_margin = args.edge_margin;

    let detection = dcdp::detect(&data, &det)?;

    // The resolved values, not the flag values: defaults materialized.
    let config = json!({
        "family": detection.family,
        "response_col": args.model.response_col,
        "model": detection.model,
        "grid": detection.grid,
        "grid_size": detection.grid_size,
        "gamma": detection.gamma,
        "zeta": detection.zeta,
        "edge_margin": detection.edge_margin,
        "cache_mode": det.cache_mode,
        "gram_budget": det.gram_budget,
        "refine": det.refine,
        "k_hint": det.cv.k_hint,
    });
    let mut manifest = Manifest::new("detect", argv, config)
        .input(&args.input, digest)
        .output(&args.output);
    manifest.timings =
        serde_json::to_value(&detection.timings).map_err(|e| CliError::runtime(e.to_string()))?;

    write_json(
        &args.output,
        &json!({ "manifest": manifest, "detection": &detection }),
    )?;

    let pts: Vec<String> = detection
        .change_points
        .iter()
        .map(|p| p.to_string())
        .collect();
    if pts.is_empty() {
        say!("no change points");
    } else {
        say!("{} change points: {}", pts.len(), pts.join(", "));
    }
    say!("report: {}", args.output.display());
    Ok(())
}

fn sim_from_args(args: &SimulateArgs) -> SimConfig {
    let mut sim = SimConfig::new(args.family.into(), args.n, args.p, args.k);
    sim.delta = args.delta;
    sim.delta_diag = args.delta_diag;
    sim.delta_off = args.delta_off;
    sim.sigma_eps = args.sigma;
    sim.jitter = args.jitter;
    sim.seed = args.seed;
    sim
}

pub fn simulate(args: &SimulateArgs, argv: &[String]) -> Result<(), CliError> {
    let sim = sim_from_args(args);
    let t0 = Instant::now();
    let (data, truth) = generate(&sim, args.trial)?;
    let generate_seconds = t0.elapsed().as_secs_f64();

    write_csv(&args.output, &data)?;
    write_truth(&args.truth_output, truth.points())?;

    let config = json!({ "sim": sim, "trial": args.trial });
    let mut manifest = Manifest::new("simulate", argv, config)
        .output(&args.output)
        .output(&args.truth_output)
        .output(&args.manifest_output);
    manifest.timings = json!({ "generate_seconds": generate_seconds });
    write_json(&args.manifest_output, &json!({ "manifest": manifest }))?;

    let pts: Vec<String> = truth.points().iter().map(|p| p.to_string()).collect();
    say!(
        "wrote {} rows, {} change points: {}",
        data.n(),
        pts.len(),
        pts.join(", ")
    );
    Ok(())
}

fn jobs_with_env(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| {
        std::env::var("DCDP_JOBS")
            .ok()
            .and_then(|v| v.trim().parse().ok())
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

/// Per-trial CSV side file; point lists are ';'-joined inside one field.
fn write_trials_csv(path: &Path, report: &TrialReport) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_path(path)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    let io_err = |e: csv::Error| CliError::runtime(format!("cannot write {}: {e}", path.display()));
    wtr.write_record([
        "trial",
        "k_true",
        "k_hat",
        "divide_k",
        "hausdorff",
        "divide_hausdorff",
        "gamma",
        "zeta",
        "true_points",
        "points",
        "divide_points",
        "cv_seconds",
        "divide_seconds",
        "refine_seconds",
    ])
    .map_err(io_err)?;
    let join = |pts: &[usize]| {
        pts.iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join(";")
    };
    for o in &report.outcomes {
        wtr.write_record([
            o.trial.to_string(),
            o.k_true.to_string(),
            o.k_hat.to_string(),
            o.divide_k.to_string(),
            o.hausdorff.map_or_else(String::new, |h| format!("{h}")),
            o.divide_hausdorff
                .map_or_else(String::new, |h| format!("{h}")),
            format!("{}", o.gamma),
            format!("{}", o.zeta),
            join(&o.true_points),
            join(&o.points),
            join(&o.divide_points),
            format!("{}", o.cv_seconds),
            format!("{}", o.divide_seconds),
            format!("{}", o.refine_seconds),
        ])
        .map_err(io_err)?;
    }
    wtr.flush()
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    (mean, var.sqrt())
}

fn lsq_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// Table row in the published format: distance mean (sd), seconds per trial
/// mean (sd), and the split of trials by estimated segment count.
fn table_row(report: &TrialReport) -> String {
    let s = &report.summary;
    let times: Vec<f64> = report
        .outcomes
        .iter()
        .map(|o| o.cv_seconds + o.divide_seconds + o.refine_seconds)
        .collect();
    let (t_mean, t_sd) = mean_sd(&times);
    format!(
        "H {} ({})  time {t_mean:.2}s ({t_sd:.2})  K<K: {}  K=K: {}  K>K: {}",
        fmt_opt(s.h_mean),
        fmt_opt(s.h_sd),
        s.k_under,
        s.k_exact,
        s.k_over
    )
}

fn run_table_bench(
    args: &BenchArgs,
    argv: &[String],
    preset_name: Option<&str>,
    mut sim: SimConfig,
    trials: u64,
) -> Result<(), CliError> {
    if let Some(seed) = args.seed {
        sim.seed = seed;
    }
    let mut det = DetectorConfig::new(sim.family);
    det.gamma = args.gamma;
    det.zeta = args.zeta;
    if let Some(q) = args.grid_q {
        det.grid = Some(GridSpec::Uniform { q });
    }
    if preset_name == Some("refine-benefit") {
        det.grid = Some(GridSpec::Uniform { q: 13 });
    }
    let jobs = jobs_with_env(args.jobs);

    let t0 = Instant::now();
    let report = run_trials(&sim, &det, trials, jobs)?;
    let wall = t0.elapsed().as_secs_f64();

    let row = table_row(&report);
    say!("{row}");
    if preset_name == Some("refine-benefit") {
        say!(
            "median H: divide {}  refined {}",
            fmt_opt(report.summary.divide_h_median),
            fmt_opt(report.summary.h_median)
        );
    }

    write_trials_csv(&args.csv_output, &report)?;

    let config = json!({
        "preset": preset_name,
        "sim": sim,
        "detector": det,
        "trials": trials,
        "jobs": jobs,
    });
    let mut manifest = Manifest::new("bench", argv, config)
        .output(&args.output)
        .output(&args.csv_output);
    manifest.timings = json!({ "wall_seconds": wall });
    write_json(
        &args.output,
        &json!({
            "manifest": manifest,
            "table_row": row,
            "summary": report.summary,
            "outcomes": report.outcomes,
        }),
    )?;
    say!("report: {}", args.output.display());
    Ok(())
}

fn timed_divide(cache: &PrefixCache, cfg: &DivideConfig) -> Result<f64, CliError> {
    let mut best = f64::INFINITY;
    for _ in 0..3 {
        let t = Instant::now();
        divide(cache, cfg)?;
        best = best.min(t.elapsed().as_secs_f64());
    }
    Ok(best)
}

/// Divide-step wall time swept over series length or grid size; emits the
/// log-log slope and a plot-ready CSV of the sweep.
fn run_scaling_bench(
    args: &BenchArgs,
    argv: &[String],
    preset_name: &str,
    sweep_n: bool,
) -> Result<(), CliError> {
    let (x_label, xs): (&str, Vec<usize>) = if sweep_n {
        ("n", vec![1000, 2000, 4000, 8000])
    } else {
        ("q", vec![25, 50, 100, 200])
    };

    let mut points = Vec::new();
    if sweep_n {
        // Streamed scan on the mean family: cost grows with rows visited.
        for &n in &xs {
            let mut sim = SimConfig::new(ModelFamily::Mean, n, 100, 3);
            sim.seed = 23;
            let (data, _) = generate(&sim, 0)?;
            let model = ModelConfig::new(ModelFamily::Mean).resolve(&data)?;
            let cache = PrefixCache::build(&data, CacheMode::Streamed, DEFAULT_GRAM_BUDGET)?;
            let cfg = DivideConfig {
                gamma: 25.0,
                grid: GridSpec::Uniform { q: 100 },
                model,
            };
            points.push((n, timed_divide(&cache, &cfg)?));
        }
    } else {
        // Stored prefix tables on regression: cost grows with node pairs.
        let mut sim = SimConfig::new(ModelFamily::Regression, 8000, 50, 3);
        sim.seed = 29;
        let (data, _) = generate(&sim, 0)?;
        let model = ModelConfig::new(ModelFamily::Regression).resolve(&data)?;
        let cache = PrefixCache::build(&data, CacheMode::Prefix, DEFAULT_GRAM_BUDGET)?;
        for &q in &xs {
            let cfg = DivideConfig {
                gamma: 25.0,
                grid: GridSpec::Uniform { q },
                model: model.clone(),
            };
            points.push((q, timed_divide(&cache, &cfg)?));
        }
    }

    let slope = lsq_slope(
        &points
            .iter()
            .map(|(x, _)| (*x as f64).ln())
            .collect::<Vec<_>>(),
        &points.iter().map(|(_, t)| t.ln()).collect::<Vec<_>>(),
    );

    let mut body = format!("{x_label},divide_seconds\n");
    for (x, t) in &points {
        body.push_str(&format!("{x},{t}\n"));
    }
    std::fs::write(&args.csv_output, body).map_err(|e| {
        CliError::runtime(format!("cannot write {}: {e}", args.csv_output.display()))
    })?;

    let row = format!(
        "divide seconds vs {x_label}: slope {slope:.2}  ({})",
        points
            .iter()
            .map(|(x, t)| format!("{x}: {t:.3}s"))
            .collect::<Vec<_>>()
            .join("  ")
    );
    say!("{row}");

    let config = json!({ "preset": preset_name, "sweep": x_label, "values": xs });
    let mut manifest = Manifest::new("bench", argv, config)
        .output(&args.output)
        .output(&args.csv_output);
    manifest.timings = json!({
        "divide_seconds": points.iter().map(|(x, t)| json!({x_label: x, "seconds": t})).collect::<Vec<_>>(),
    });
    write_json(
        &args.output,
        &json!({ "manifest": manifest, "table_row": row, "slope": slope }),
    )?;
    say!("report: {}", args.output.display());
    Ok(())
}

pub fn bench(args: &BenchArgs, argv: &[String]) -> Result<(), CliError> {
    if let Some(name) = &args.preset {
        let Some(preset) = presets::find(name) else {
            return Err(CliError::config(format!(
                "unknown preset {name:?}; available presets: {}",
                presets::listing()
            )));
        };
        match &preset.kind {
            PresetKind::Table(setting) => {
                let trials = args.trials.unwrap_or(10);
                run_table_bench(args, argv, Some(preset.name), setting.sim(), trials)
            }
            PresetKind::ScalingN => run_scaling_bench(args, argv, preset.name, true),
            PresetKind::ScalingQ => run_scaling_bench(args, argv, preset.name, false),
            PresetKind::RefineBenefit => {
                let mut sim = SimConfig::new(ModelFamily::Mean, 200, 20, 3);
                sim.delta = 1.0;
                sim.seed = 31;
                let trials = args.trials.unwrap_or(20);
                run_table_bench(args, argv, Some(preset.name), sim, trials)
            }
        }
    } else {
        let (Some(family), Some(n), Some(p), Some(k)) = (args.family, args.n, args.p, args.k)
        else {
            return Err(CliError::config(
                "bench needs --preset or all of --family/--n/--p/--k",
            ));
        };
        let mut sim = SimConfig::new(family.into(), n, p, k);
        if let Some(d) = args.delta {
            sim.delta = d;
        }
        if let Some(d) = args.delta_diag {
            sim.delta_diag = d;
        }
        if let Some(d) = args.delta_off {
            sim.delta_off = d;
        }
        if let Some(s) = args.sigma {
            sim.sigma_eps = s;
        }
        let trials = args.trials.unwrap_or(10);
        run_table_bench(args, argv, None, sim, trials)
    }
}

pub fn tune(args: &TuneArgs, argv: &[String]) -> Result<(), CliError> {
    let family: ModelFamily = args.model.family.into();
    let (data, digest) = load_csv(&args.input, family, args.model.response_col)?;
    let n = data.n();
    let p = data.p();

    let det = detector_from_args(&args.model);
    let model = det.model.resolve(&data)?;
    let grid = det.grid.clone().unwrap_or_else(|| {
        let hint = det.delta_min_hint.unwrap_or((n / 10).max(1));
        let cap = (n / model.min_span.max(1)).saturating_sub(1).max(1);
        GridSpec::Uniform {
            q: dcdp::grid::default_grid_size(n, hint).min(cap),
        }
    });
    let edge_margin = default_edge_margin(&model, p);

    let t0 = Instant::now();
    let mut pivot = None;
    let gammas = match &args.gammas {
        Some(list) => list.clone(),
        None => {
            let cache = PrefixCache::build(&data, det.cache_mode, det.gram_budget)?;
            let (ladder, pv) = default_gamma_ladder(&cache, &model, det.cv.k_hint)?;
            pivot = Some(pv);
            ladder
        }
    };
    let zetas = match &args.zetas {
        Some(list) => list.clone(),
        None => vec![default_zeta(n, p, 1.0)],
    };
    let pairing = match args.pairing {
        crate::PairingArg::Zipped => Pairing::Zipped,
        crate::PairingArg::Cartesian => Pairing::Cartesian,
    };
    let (gammas, zetas) = match pairing {
        Pairing::Cartesian => (gammas, zetas),
        Pairing::Zipped if gammas.len() == zetas.len() => (gammas, zetas),
        Pairing::Zipped if gammas.len() == 1 => (vec![gammas[0]; zetas.len()], zetas),
        Pairing::Zipped if zetas.len() == 1 => {
            let z = vec![zetas[0]; gammas.len()];
            (gammas, z)
        }
        Pairing::Zipped => (gammas, zetas),
    };
    let plan = CvPlan {
        gammas,
        zetas,
        pairing,
        gamma_pivot: pivot,
    };
    let dcfg = DivideConfig {
        gamma: 1.0,
        grid: grid.clone(),
        model: model.clone(),
    };
    let rcfg = RefineConfig {
        zeta: 0.0,
        edge_margin,
        model: model.clone(),
        graphical_frobenius: false,
    };
    let report = cv_select_with_mode(&data, &plan, &dcfg, &rcfg, det.cache_mode, det.gram_budget)?;
    let cv_seconds = t0.elapsed().as_secs_f64();

    // Candidates were judged on the half-length training series; the
    // suggested pair carries the same full-scale mapping detect applies.
    let m = n.div_ceil(2);
    let gamma_scale = (m + n) as f64 / (2 * m) as f64;
    let suggested = json!({
        "gamma": report.selected_gamma() * gamma_scale,
        "zeta": report.selected_zeta(),
    });

    let config = json!({
        "family": family,
        "response_col": args.model.response_col,
        "model": model,
        "grid": grid,
        "pairing": pairing,
        "k_hint": det.cv.k_hint,
        "cache_mode": det.cache_mode,
        "gram_budget": det.gram_budget,
    });
    let mut manifest = Manifest::new("tune", argv, config)
        .input(&args.input, digest)
        .output(&args.output);
    manifest.timings = json!({ "cv_seconds": cv_seconds });
    write_json(
        &args.output,
        &json!({
            "manifest": manifest,
            "cv": &report,
            "selected": {
                "gamma": report.selected_gamma(),
                "zeta": report.selected_zeta(),
            },
            "suggested": suggested,
        }),
    )?;

    say!(
        "selected gamma {:.4}, zeta {:.4} over {} candidates (suggested full-scale gamma {:.4})",
        report.selected_gamma(),
        report.selected_zeta(),
        report.candidates.len(),
        report.selected_gamma() * gamma_scale,
    );
    say!("report: {}", args.output.display());
    Ok(())
}

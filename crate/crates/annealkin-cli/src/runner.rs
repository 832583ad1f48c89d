//! Experiment runners: map validated requests onto library calls and write
//! the artifact files plus the run manifest.

use std::path::{Path, PathBuf};

use serde_json::json;

use annealkin::elevation::{check_trap_condition, critical_height, cup};
use annealkin::gibbs::{
    compare_empirical, sample_gibbs, spectral_gap_sweep, tail_mass, GibbsMeasure, VelocityFactor,
};
use annealkin::integrator::{AnnealSchedule, CupWatch, Dynamics};
use annealkin::landscape::{
    build_velocity_potential, periodize_with_min_half_width, GridLandscape, PeriodizedPotential,
    PhaseState, PotentialSpec, VelocityPotential,
};
use annealkin::linearization::{contraction_radius, jacobian, lyapunov_certificate};
use annealkin::montecarlo::{phase_sweep, run_ensemble, ExperimentConfig, InitialCondition};

use crate::config::{
    self, GibbsRequest, GridConfig, InitialConfig, LandscapeRequest, LyapunovRequest,
    ParsedConfig, Request, SimulateRequest, SweepRequest, VariantConfig,
};
use crate::manifest::{now_unix_ms, write_manifest, RunManifest};
use crate::plot::{line_chart, Series};
use crate::{CliError, CliResult};

pub struct RunOptions {
    pub out_dir: PathBuf,
    pub plot: bool,
    /// Overrides the config's base seed.
    pub seed: Option<u64>,
}

/// Run a parsed request end to end and return the manifest's output list
/// (sorted artifact names, manifest included).
pub fn execute(parsed: &ParsedConfig, opts: &RunOptions) -> CliResult<Vec<String>> {
    let started = now_unix_ms();
    std::fs::create_dir_all(&opts.out_dir)?;
    let seed = opts.seed.or_else(|| parsed.request.seed());
    let (outputs, notes) = match &parsed.request {
        Request::Landscape(r) => run_landscape(r, opts)?,
        Request::Simulate(r) => run_simulate(r, seed.unwrap_or(0), opts)?,
        Request::Sweep(r) => run_sweep(r, seed.unwrap_or(0), opts)?,
        Request::GibbsCheck(r) => run_gibbs_check(r, seed.unwrap_or(0), opts)?,
        Request::Lyapunov(r) => run_lyapunov(r, opts)?,
    };
    let mut all = outputs.clone();
    write_manifest(
        &opts.out_dir,
        RunManifest {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            command: parsed.request.kind().to_string(),
            config_hash: config::config_hash(&parsed.raw),
            base_seed: parsed.request.seed().map(|_| seed.unwrap_or(0)),
            started_unix_ms: started,
            finished_unix_ms: now_unix_ms(),
            outputs,
            notes,
        },
    )?;
    all.push("manifest.json".into());
    all.sort();
    Ok(all)
}

fn write_text(dir: &Path, name: &str, text: &str) -> CliResult<()> {
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Domain(format!("serializing {name} failed: {e}")))?;
    write_text(dir, name, &(text + "\n"))
}

// ---------------------------------------------------------------------------
// Shared construction.

/// Owned torus objects for the requested variant (both `None` on the free
/// variant, velocity surrogate only on the compact one).
struct Variant {
    pp: Option<PeriodizedPotential>,
    vp: Option<VelocityPotential>,
}

fn build_variant(spec: &PotentialSpec, v: &VariantConfig) -> CliResult<Variant> {
    Ok(match v {
        VariantConfig::Free(_) => Variant { pp: None, vp: None },
        VariantConfig::Torus(t) => Variant {
            pp: Some(periodize_with_min_half_width(spec, t.cutoff, t.min_half_width)?),
            vp: None,
        },
        VariantConfig::Compact(c) => {
            let pp = periodize_with_min_half_width(spec, c.cutoff, c.min_half_width)?;
            let vp = build_velocity_potential(c.cutoff, pp.half_width(), pp.grad_sup_norm(512))?;
            Variant { pp: Some(pp), vp: Some(vp) }
        }
    })
}

fn dynamics_view<'a>(
    spec: &'a PotentialSpec,
    var: &'a Variant,
    cfg: &VariantConfig,
) -> Dynamics<'a> {
    match cfg {
        VariantConfig::Free(_) => Dynamics::Free(spec),
        VariantConfig::Torus(_) => Dynamics::Torus(var.pp.as_ref().expect("torus built")),
        VariantConfig::Compact(_) => Dynamics::Compact {
            potential: var.pp.as_ref().expect("torus built"),
            velocity: var.vp.as_ref().expect("surrogate built"),
        },
    }
}

fn velocity_factor(var: &Variant) -> VelocityFactor<'_> {
    match &var.vp {
        Some(vp) => VelocityFactor::Surrogate(vp),
        None => VelocityFactor::Gaussian,
    }
}

/// Position grid for quadrature or cup construction: torus variants sample
/// their own cell, free variants need explicit bounds.
fn context_grid(
    spec: &PotentialSpec,
    var: &Variant,
    grid_cfg: Option<&GridConfig>,
    counts: Option<usize>,
) -> CliResult<GridLandscape> {
    if let Some(pp) = &var.pp {
        let n = counts.or_else(|| grid_cfg.map(|g| g.counts[0])).unwrap_or(1025);
        Ok(pp.sample(n)?)
    } else if let Some(g) = grid_cfg {
        Ok(spec.sample_grid(&g.bounds(), &g.counts)?)
    } else {
        Err(CliError::Config("free-variant request needs an explicit grid".into()))
    }
}

/// Grid behind derived thresholds and measured critical heights: the
/// explicit `analysis` grid, the torus cell, or a padded box around the
/// landscape's minima.
fn analysis_grid(
    spec: &PotentialSpec,
    var: &Variant,
    explicit: Option<&GridConfig>,
) -> CliResult<GridLandscape> {
    if explicit.is_some() || var.pp.is_some() {
        return context_grid(spec, var, explicit, None);
    }
    let d = spec.dimension();
    let nodes = match d {
        1 => 2001,
        2 => 257,
        _ => {
            return Err(CliError::Domain(
                "default analysis grids support dimension <= 2; pass `analysis` bounds".into(),
            ))
        }
    };
    let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); d];
    for m in spec.minima() {
        for i in 0..d {
            bounds[i].0 = bounds[i].0.min(m[i]);
            bounds[i].1 = bounds[i].1.max(m[i]);
        }
    }
    let bounds: Vec<(f64, f64)> = bounds.into_iter().map(|(lo, hi)| (lo - 2.0, hi + 2.0)).collect();
    Ok(spec.sample_grid(&bounds, &vec![nodes; d])?)
}

/// Log-spaced observation ladder ending exactly at the horizon.
fn default_checkpoints(horizon: f64, dt: f64) -> Vec<f64> {
    if horizon <= 0.0 {
        return vec![0.0];
    }
    let lo = (horizon / 1000.0).max(dt.min(horizon));
    if lo >= horizon {
        return vec![horizon];
    }
    let n = 16;
    (0..n)
        .map(|i| (lo * (horizon / lo).powf(i as f64 / (n - 1) as f64)).min(horizon))
        .collect()
}

/// Everything derived while assembling an experiment config.
struct Aux {
    thresholds: Vec<f64>,
    thresholds_derived: bool,
    /// Critical height measured on the analysis grid (sweeps only).
    c_star: Option<f64>,
    checkpoints: Vec<f64>,
}

/// Build the borrow-heavy experiment config in one scope and hand it to `f`.
fn with_experiment<T>(
    r: &SimulateRequest,
    base_seed: u64,
    need_c_star: bool,
    f: impl FnOnce(&ExperimentConfig, &Aux) -> CliResult<T>,
) -> CliResult<T> {
    let spec = r.landscape.build()?;
    let var = build_variant(&spec, &r.variant)?;
    let cooling = r.schedule.cooling.build()?;
    let friction = r.schedule.friction.build()?;

    let mut thresholds = r.thresholds.clone().unwrap_or_default();
    let mut thresholds_derived = false;
    let mut c_star = None;
    if thresholds.is_empty() || need_c_star {
        let grid = analysis_grid(&spec, &var, r.analysis.as_ref())?;
        let summary = critical_height(&grid)?;
        if need_c_star {
            c_star = Some(summary.c_star);
        }
        if thresholds.is_empty() {
            let min_depth = summary
                .depths
                .iter()
                .copied()
                .filter(|d| d.is_finite())
                .fold(f64::INFINITY, f64::min);
            if !min_depth.is_finite() {
                return Err(CliError::Domain(
                    "every basin on the analysis grid is global; set `thresholds` explicitly"
                        .into(),
                ));
            }
            thresholds.push(0.2 * min_depth);
            thresholds_derived = true;
        }
    }
    let checkpoints =
        r.checkpoints.clone().unwrap_or_else(|| default_checkpoints(r.horizon, r.dt));

    // Initial-condition context in declaration order, so later locals can
    // borrow earlier ones.
    let init_grid: Option<GridLandscape> = match &r.initial {
        InitialConfig::Fixed(_) => None,
        InitialConfig::Gibbs(g) => Some(context_grid(&spec, &var, g.grid.as_ref(), g.counts)?),
        InitialConfig::UniformCup(u) => {
            Some(context_grid(&spec, &var, u.grid.as_ref(), u.counts)?)
        }
    };
    let init_measure: Option<GibbsMeasure> = match &r.initial {
        InitialConfig::Gibbs(g) => Some(GibbsMeasure::new(
            init_grid.as_ref().expect("grid built above"),
            g.beta,
            velocity_factor(&var),
        )?),
        _ => None,
    };
    let init_members: Vec<usize> = match &r.initial {
        InitialConfig::UniformCup(u) => {
            let grid = init_grid.as_ref().expect("grid built above");
            cup(grid, grid.nearest_node(&u.center), u.level)?.members
        }
        _ => Vec::new(),
    };
    let z0 = match &r.initial {
        InitialConfig::Fixed(fx) => InitialCondition::Fixed(PhaseState::new(
            fx.x.clone(),
            fx.y.clone().unwrap_or_else(|| vec![0.0; fx.x.len()]),
        )?),
        InitialConfig::Gibbs(_) => {
            InitialCondition::GibbsDraw(init_measure.as_ref().expect("measure built above"))
        }
        InitialConfig::UniformCup(_) => InitialCondition::UniformInCup {
            grid: init_grid.as_ref().expect("grid built above"),
            members: &init_members,
        },
    };

    let cup_grid: Option<GridLandscape> = match &r.cup {
        Some(c) => Some(context_grid(&spec, &var, c.grid.as_ref(), c.counts)?),
        None => None,
    };
    let cup_members: Vec<usize> = match (&r.cup, &cup_grid) {
        (Some(c), Some(grid)) => cup(grid, grid.nearest_node(&c.center), c.level)?.members,
        _ => Vec::new(),
    };
    let cup_watch =
        cup_grid.as_ref().map(|grid| CupWatch { grid, members: &cup_members });

    let config = ExperimentConfig {
        dynamics: dynamics_view(&spec, &var, &r.variant),
        schedule: AnnealSchedule::new(cooling, friction),
        z0,
        n_trajectories: r.trajectories,
        scheme: r.scheme.build(),
        dt: r.dt,
        horizon: r.horizon,
        checkpoints: checkpoints.clone(),
        thresholds: thresholds.clone(),
        cup: cup_watch,
        base_seed,
    };
    let aux = Aux { thresholds, thresholds_derived, c_star, checkpoints };
    f(&config, &aux)
}

// ---------------------------------------------------------------------------
// Runners.

type RunOutput = (Vec<String>, Option<serde_json::Value>);

fn run_landscape(r: &LandscapeRequest, opts: &RunOptions) -> CliResult<RunOutput> {
    let spec = r.landscape.build()?;
    let grid = match &r.periodize {
        Some(p) => {
            periodize_with_min_half_width(&spec, p.cutoff, p.min_half_width)?.sample(r.grid.counts[0])?
        }
        None => spec.sample_grid(&r.grid.bounds(), &r.grid.counts)?,
    };
    let summary = critical_height(&grid)?;
    let trap_report = match r.trap_level {
        Some(c) => Some(check_trap_condition(&grid, c)?),
        None => None,
    };

    let mut outputs = Vec::new();
    let mut buf = Vec::new();
    grid.write_csv(&mut buf)?;
    std::fs::write(opts.out_dir.join("landscape.csv"), &buf)?;
    outputs.push("landscape.csv".into());

    let minima_coords: Vec<Vec<f64>> = summary.minima.iter().map(|&i| grid.coords(i)).collect();
    let value = json!({
        "dimension": grid.dim(),
        "nodes": grid.len(),
        "minima": summary.minima,
        "minima_coords": minima_coords,
        "minima_values": summary.minima_values,
        "depths": summary.depths,
        "elevations": summary.elevations,
        "barriers": summary.barriers,
        "c_star": summary.c_star,
        "trap_check": trap_report,
    });
    write_json(&opts.out_dir, "landscape.json", &value)?;
    outputs.push("landscape.json".into());
    let notes = json!({ "c_star": summary.c_star, "minima": summary.minima.len() });
    Ok((outputs, Some(notes)))
}

fn run_simulate(r: &SimulateRequest, base_seed: u64, opts: &RunOptions) -> CliResult<RunOutput> {
    with_experiment(r, base_seed, false, |config, aux| {
        let stats = run_ensemble(config)?;
        let mut outputs = Vec::new();

        let mut csv = String::from("t,threshold,p_hat,ci_lo,ci_hi\n");
        for cp in &stats.checkpoints {
            for (k, &th) in aux.thresholds.iter().enumerate() {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    cp.time, th, cp.estimates[k], cp.intervals[k].0, cp.intervals[k].1,
                ));
            }
        }
        write_text(&opts.out_dir, "ensemble.csv", &csv)?;
        outputs.push("ensemble.csv".into());

        let summary = json!({
            "seed": base_seed,
            "thresholds": aux.thresholds,
            "stats": stats,
        });
        write_json(&opts.out_dir, "summary.json", &summary)?;
        outputs.push("summary.json".into());

        if opts.plot {
            let series_points: Vec<Vec<(f64, f64)>> = (0..aux.thresholds.len())
                .map(|k| stats.checkpoints.iter().map(|cp| (cp.time, cp.estimates[k])).collect())
                .collect();
            let series: Vec<Series> = series_points
                .iter()
                .zip(&aux.thresholds)
                .map(|(pts, th)| Series { label: format!("H >= {th}"), points: pts })
                .collect();
            let first = aux.checkpoints.first().copied().unwrap_or(0.0);
            let last = aux.checkpoints.last().copied().unwrap_or(0.0);
            let log_x = first > 0.0 && last / first >= 100.0;
            let svg =
                line_chart("energy exceedance", "t", "P(H >= threshold)", &series, log_x);
            write_text(&opts.out_dir, "ensemble.svg", &svg)?;
            outputs.push("ensemble.svg".into());
        }

        let notes = json!({
            "thresholds": aux.thresholds,
            "thresholds_derived": aux.thresholds_derived,
            "kappa_eff": stats.kappa_eff,
            "l_eff": stats.l_eff,
            "trapped": stats.trapped,
            "escaped": stats.escaped,
            "diverged": stats.diverged,
        });
        Ok((outputs, Some(notes)))
    })
}

fn run_sweep(r: &SweepRequest, base_seed: u64, opts: &RunOptions) -> CliResult<RunOutput> {
    with_experiment(&r.simulate, base_seed, r.c_star.is_none(), |config, aux| {
        let c_star = r.c_star.or(aux.c_star).expect("measured when not configured");
        let points = phase_sweep(config, &r.c_values, c_star)?;
        let mut outputs = Vec::new();

        let mut csv = String::from("c,n,successes,p_hat,ci_lo,ci_hi\n");
        for p in &points {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.c, p.n, p.successes, p.estimate, p.interval.0, p.interval.1,
            ));
        }
        write_text(&opts.out_dir, "sweep.csv", &csv)?;
        outputs.push("sweep.csv".into());

        let value = json!({
            "seed": base_seed,
            "c_star": c_star,
            "c_star_measured": r.c_star.is_none(),
            "success_threshold": aux.thresholds[0],
            "points": points,
        });
        write_json(&opts.out_dir, "sweep.json", &value)?;
        outputs.push("sweep.json".into());

        if opts.plot {
            let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.c, p.estimate)).collect();
            let series = [Series { label: "success rate".into(), points: &pts }];
            let svg = line_chart("cooling-speed sweep", "c", "P(success)", &series, false);
            write_text(&opts.out_dir, "sweep.svg", &svg)?;
            outputs.push("sweep.svg".into());
        }

        let notes = json!({ "c_star": c_star, "success_threshold": aux.thresholds[0] });
        Ok((outputs, Some(notes)))
    })
}

fn run_gibbs_check(r: &GibbsRequest, base_seed: u64, opts: &RunOptions) -> CliResult<RunOutput> {
    let spec = r.landscape.build()?;
    let var = build_variant(&spec, &r.variant)?;
    let grid = context_grid(&spec, &var, r.grid.as_ref(), r.counts)?;
    let [pos_bins, vel_bins] = r.bins.unwrap_or([8, 8]);

    let gaps: Option<Vec<f64>> =
        if r.spectral { Some(spectral_gap_sweep(&grid, &r.betas)?) } else { None };

    let mut rows = Vec::new();
    for (i, &beta) in r.betas.iter().enumerate() {
        let measure = GibbsMeasure::new(&grid, beta, velocity_factor(&var))?;
        let tail = r.delta.map(|d| tail_mass(&measure, d));
        let samples = sample_gibbs(&measure, r.samples, base_seed.wrapping_add(i as u64))?;
        let cmp = compare_empirical(&samples, &measure, pos_bins, vel_bins)?;
        rows.push(json!({
            "beta": beta,
            "log_partition": measure.log_partition(),
            "tail_mass": tail,
            "l2": cmp.l2,
            "tv": cmp.tv,
            "position_bins": cmp.position_bins,
            "velocity_bins": cmp.velocity_bins,
            "coarsened": cmp.coarsened,
            "spectral_gap": gaps.as_ref().map(|g| g[i]),
        }));
    }

    let mut outputs = Vec::new();
    let mut csv = String::from("beta,log_partition,tail_mass,l2,tv,spectral_gap\n");
    for row in &rows {
        let opt = |v: &serde_json::Value| {
            if v.is_null() { String::new() } else { v.to_string() }
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row["beta"],
            row["log_partition"],
            opt(&row["tail_mass"]),
            row["l2"],
            row["tv"],
            opt(&row["spectral_gap"]),
        ));
    }
    write_text(&opts.out_dir, "gibbs.csv", &csv)?;
    outputs.push("gibbs.csv".into());

    let value = json!({
        "seed": base_seed,
        "samples": r.samples,
        "delta": r.delta,
        "rows": rows,
    });
    write_json(&opts.out_dir, "gibbs.json", &value)?;
    outputs.push("gibbs.json".into());

    if opts.plot {
        let mut series_data: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        if r.delta.is_some() {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter_map(|row| {
                    let t = row["tail_mass"].as_f64()?;
                    (t > 0.0).then(|| (row["beta"].as_f64().unwrap(), t.ln()))
                })
                .collect();
            series_data.push(("ln tail mass".into(), pts));
        }
        if let Some(g) = &gaps {
            let pts: Vec<(f64, f64)> = r
                .betas
                .iter()
                .zip(g)
                .filter(|(_, gap)| **gap > 0.0)
                .map(|(&b, &gap)| (b, gap.ln()))
                .collect();
            series_data.push(("ln spectral gap".into(), pts));
        }
        let series: Vec<Series> = series_data
            .iter()
            .map(|(label, pts)| Series { label: label.clone(), points: pts })
            .collect();
        let svg = line_chart("equilibrium diagnostics", "beta", "ln value", &series, false);
        write_text(&opts.out_dir, "gibbs.svg", &svg)?;
        outputs.push("gibbs.svg".into());
    }

    Ok((outputs, None))
}

fn run_lyapunov(r: &LyapunovRequest, opts: &RunOptions) -> CliResult<RunOutput> {
    let spec = r.landscape.build()?;
    let d = spec.dimension();
    let x = r.at.clone().unwrap_or_else(|| spec.global_minimum().to_vec());
    let z = PhaseState::new(x.clone(), vec![0.0; d])?;
    let j = jacobian(&spec, r.gamma, &z)?;
    let cert = lyapunov_certificate(&j)?;
    // The radius search is anchored at the global minimum, so skip it for
    // custom expansion points.
    let radius = match &r.at {
        None => Some(contraction_radius(&spec, r.gamma, &cert, r.search_max)?),
        Some(_) => None,
    };
    let n = cert.m.nrows();
    let m_rows: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| cert.m[(i, j)]).collect()).collect();
    let value = json!({
        "dimension": d,
        "gamma": r.gamma,
        "expansion_point": x,
        "m": m_rows,
        "r": cert.r,
        "residual": cert.residual,
        "contraction_radius": radius,
    });
    write_json(&opts.out_dir, "lyapunov.json", &value)?;
    let notes = json!({ "r": cert.r, "residual": cert.residual });
    Ok((vec!["lyapunov.json".into()], Some(notes)))
}

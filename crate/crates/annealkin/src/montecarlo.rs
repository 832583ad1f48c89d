//! Ensemble experiments over independent annealing trajectories.
//!
//! Every estimator here is a pure function of the experiment configuration
//! and the base seed: trajectory `i` consumes its own generator seeded with
//! `base_seed ^ i`, trajectories are simulated in parallel, and the
//! per-trajectory summaries are reduced in index order, so results are
//! bit-identical regardless of how many threads the pool has.
//!
//! A trajectory that blows up numerically is replayed up to its last finite
//! step (same seed, hence bit-identical prefix); checkpoints before the
//! blow-up use the replayed data, and the trajectory counts as a failure for
//! every later checkpoint and for every survival-style statistic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::gibbs::{sample_gibbs, GibbsMeasure};
use crate::integrator::{
    simulate, AnnealSchedule, CupWatch, Dynamics, EventConfig, EventKind, Scheme, SimParams,
    Trajectory,
};
use crate::landscape::{GridLandscape, PhaseState};
use crate::schedules::{
    classify, epsilon_envelope, validate_friction, CoolingSchedule, FrictionReport, ScheduleClass,
};
use crate::{Error, Result};

/// Seed salt for the initial-condition stream, kept separate from the
/// per-trajectory simulation streams.
const INIT_SALT: u64 = 0x517c_c1b7_2722_0a95;
/// Cap on recorded states per trajectory; the stride grows with the horizon.
const MAX_RECORDS: usize = 4096;
/// 97.5% standard normal quantile: two-sided 95% coverage.
const WILSON_Z: f64 = 1.959_963_984_540_054;

/// 95% Wilson score interval for `successes` out of `n` Bernoulli trials.
/// Unlike the Wald interval it stays inside `[0, 1]` and keeps sane coverage
/// at the boundary counts; `n = 0` yields the vacuous interval.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    debug_assert!(successes <= n);
    let z2 = WILSON_Z * WILSON_Z;
    let nf = n as f64;
    let k = successes as f64;
    let denom = nf + z2;
    let center = (k + 0.5 * z2) / denom;
    let half = WILSON_Z * (k * (nf - k) / nf + 0.25 * z2).sqrt() / denom;
    // At the boundary counts the score bounds are exactly 0 and 1; spare
    // them the rounding of the general formula.
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// How each trajectory picks its starting state.
#[derive(Clone)]
pub enum InitialCondition<'a> {
    /// Every trajectory starts from the same phase point.
    Fixed(PhaseState),
    /// Independent draws from a Gibbs measure (typically at the initial
    /// inverse temperature).
    GibbsDraw(&'a GibbsMeasure<'a>),
    /// Positions uniform over the grid cells of the given cup members (a
    /// draw can land marginally outside a ragged cup boundary), velocities
    /// zero.
    UniformInCup {
        grid: &'a GridLandscape,
        members: &'a [usize],
    },
}

/// One ensemble experiment: dynamics, schedules, initial condition, and the
/// observables to record.
#[derive(Clone)]
pub struct ExperimentConfig<'a> {
    pub dynamics: Dynamics<'a>,
    pub schedule: AnnealSchedule,
    pub z0: InitialCondition<'a>,
    pub n_trajectories: usize,
    pub scheme: Scheme,
    pub dt: f64,
    pub horizon: f64,
    /// Observation times; each is snapped to the nearest recorded step.
    pub checkpoints: Vec<f64>,
    /// Energy exceedance levels counted at every checkpoint.
    pub thresholds: Vec<f64>,
    /// Cup whose first exit is watched every step.
    pub cup: Option<CupWatch<'a>>,
    pub base_seed: u64,
}

impl ExperimentConfig<'_> {
    fn sim_params(&self, seed: u64) -> SimParams {
        let steps = (self.horizon / self.dt + 1e-9).floor() as usize + 1;
        SimParams {
            scheme: self.scheme,
            dt: self.dt,
            seed,
            horizon: self.horizon,
            record_stride: steps.div_ceil(MAX_RECORDS).max(1),
        }
    }

    /// Validate the experiment and return the friction report for the run.
    /// The friction constraints are checked over at least one step even for
    /// a zero-length horizon.
    fn validate(&self) -> Result<FrictionReport> {
        if self.n_trajectories == 0 {
            return Err(Error::invalid("ensembles need at least one trajectory"));
        }
        let params = self.sim_params(0);
        params.validate()?;
        for &t in &self.checkpoints {
            if !(t.is_finite() && (0.0..=self.horizon).contains(&t)) {
                return Err(Error::invalid(format!(
                    "checkpoint {t} lies outside the horizon [0, {}]",
                    self.horizon
                )));
            }
        }
        for &delta in &self.thresholds {
            if !delta.is_finite() {
                return Err(Error::invalid("energy thresholds must be finite"));
            }
        }
        let dim = self.dynamics.dim();
        match &self.z0 {
            InitialCondition::Fixed(z) => {
                if z.dim() != dim {
                    return Err(Error::invalid(
                        "initial state dimension does not match the dynamics",
                    ));
                }
                if !z.is_finite() {
                    return Err(Error::invalid("initial state must be finite"));
                }
            }
            InitialCondition::GibbsDraw(measure) => {
                if measure.grid().dim() != dim {
                    return Err(Error::invalid(
                        "Gibbs measure dimension does not match the dynamics",
                    ));
                }
            }
            InitialCondition::UniformInCup { grid, members } => {
                if grid.dim() != dim {
                    return Err(Error::invalid(
                        "cup grid dimension does not match the dynamics",
                    ));
                }
                if members.is_empty() {
                    return Err(Error::invalid("cannot start inside an empty cup"));
                }
                if members.iter().any(|&m| m >= grid.values.len()) {
                    return Err(Error::invalid("cup member index out of range"));
                }
            }
        }
        let report = validate_friction(
            &self.schedule.friction,
            &self.schedule.cooling,
            self.horizon.max(self.dt),
        )?;
        if let Some(violation) = report.violations.first() {
            return Err(Error::invalid(format!(
                "declared friction constants fail on this horizon: {violation:?} \
                 (largest consistent floor {:.6}, smallest consistent coupling {:.6})",
                report.kappa_eff, report.l_eff
            )));
        }
        Ok(report)
    }

    /// One starting state per trajectory, drawn from a stream independent of
    /// the simulation streams.
    fn initial_states(&self) -> Result<Vec<PhaseState>> {
        let n = self.n_trajectories;
        match &self.z0 {
            InitialCondition::Fixed(z) => Ok(vec![z.clone(); n]),
            InitialCondition::GibbsDraw(measure) => {
                sample_gibbs(measure, n, self.base_seed ^ INIT_SALT)
            }
            InitialCondition::UniformInCup { grid, members } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.base_seed ^ INIT_SALT);
                let d = grid.dim();
                let mut states = Vec::with_capacity(n);
                for _ in 0..n {
                    let node = members[rng.gen_range(0..members.len())];
                    let mut x = grid.coords(node);
                    for a in 0..d {
                        x[a] += grid.spacing[a] * rng.gen_range(-0.5..0.5);
                    }
                    states.push(PhaseState::new(x, vec![0.0; d])?);
                }
                Ok(states)
            }
        }
    }
}

/// Exceedance counts observed at one checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckpointStat {
    pub requested_time: f64,
    /// The recorded step time the checkpoint snapped to.
    pub time: f64,
    /// Per threshold: trajectories with energy at or above it (trajectories
    /// already diverged by this time always count).
    pub counts: Vec<usize>,
    pub estimates: Vec<f64>,
    /// Per threshold: 95% Wilson interval for the exceedance probability.
    pub intervals: Vec<(f64, f64)>,
}

/// Aggregated results of one ensemble.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub n: usize,
    pub checkpoints: Vec<CheckpointStat>,
    /// Trajectories that stayed finite and never left the watched cup
    /// (without a cup watch, every finite trajectory).
    pub trapped: usize,
    /// Finite trajectories whose first cup exit fired.
    pub escaped: usize,
    /// Trajectories that left the representable range before the horizon.
    pub diverged: usize,
    /// Final energy per trajectory; NaN marks a diverged trajectory.
    pub final_energies: Vec<f64>,
    /// Smallest recorded potential energy per trajectory (the running-best
    /// position the annealer visited).
    pub best_potentials: Vec<f64>,
    /// Largest friction floor consistent with the schedule on this horizon.
    pub kappa_eff: f64,
    /// Smallest friction-temperature coupling consistent with the schedule.
    pub l_eff: f64,
}

struct Summary {
    checkpoint_h: Vec<f64>,
    final_h: f64,
    best_potential: f64,
    exit_time: Option<f64>,
    envelope_ok: bool,
    diverged_at: Option<f64>,
}

struct EnvelopeCheck {
    center: Vec<f64>,
    /// Squared admissible distance per recorded step.
    bound2: Vec<f64>,
}

fn kinetic_part(dynamics: &Dynamics, z: &PhaseState) -> f64 {
    match dynamics {
        Dynamics::Free(_) | Dynamics::Torus(_) => z.kinetic(),
        Dynamics::Compact { velocity, .. } => velocity.w(&z.y),
    }
}

fn torus_half_width(dynamics: &Dynamics) -> Option<f64> {
    match dynamics {
        Dynamics::Free(_) => None,
        Dynamics::Torus(p) | Dynamics::Compact { potential: p, .. } => Some(p.half_width()),
    }
}

fn envelope_satisfied(
    traj: &Trajectory,
    check: &EnvelopeCheck,
    half_width: Option<f64>,
) -> bool {
    traj.states.iter().zip(&check.bound2).all(|(z, &b2)| {
        let mut d2 = 0.0;
        for (xi, ci) in z.x.iter().zip(&check.center) {
            let mut diff = xi - ci;
            if let Some(l) = half_width {
                diff = (diff + l).rem_euclid(2.0 * l) - l;
            }
            d2 += diff * diff;
        }
        d2 <= b2
    })
}

fn summarize_full(
    traj: &Trajectory,
    dynamics: &Dynamics,
    checkpoint_idx: &[usize],
    envelope: Option<&EnvelopeCheck>,
) -> Summary {
    let best_potential = traj
        .states
        .iter()
        .zip(&traj.energies)
        .map(|(z, h)| h - kinetic_part(dynamics, z))
        .fold(f64::INFINITY, f64::min);
    Summary {
        checkpoint_h: checkpoint_idx.iter().map(|&i| traj.energies[i]).collect(),
        final_h: *traj.energies.last().expect("trajectories are never empty"),
        best_potential,
        exit_time: traj.event_time(&EventKind::CupExit),
        envelope_ok: envelope
            .map_or(true, |c| envelope_satisfied(traj, c, torus_half_width(dynamics))),
        diverged_at: None,
    }
}

/// Summarize the replayed prefix of a trajectory that diverged at `t_div`.
/// Checkpoints past the prefix are marked NaN; the envelope verdict is a
/// failure by definition.
fn summarize_prefix(
    prefix: &Trajectory,
    dynamics: &Dynamics,
    record_times: &[f64],
    checkpoint_idx: &[usize],
    t_div: f64,
) -> Summary {
    let checkpoint_h = checkpoint_idx
        .iter()
        .map(|&i| {
            let t = record_times[i];
            match prefix.times.binary_search_by(|probe| probe.total_cmp(&t)) {
                Ok(j) => prefix.energies[j],
                Err(_) => f64::NAN,
            }
        })
        .collect();
    let best_potential = prefix
        .states
        .iter()
        .zip(&prefix.energies)
        .map(|(z, h)| h - kinetic_part(dynamics, z))
        .fold(f64::INFINITY, f64::min);
    Summary {
        checkpoint_h,
        final_h: f64::NAN,
        best_potential,
        exit_time: prefix.event_time(&EventKind::CupExit),
        envelope_ok: false,
        diverged_at: Some(t_div),
    }
}

fn run_one(
    config: &ExperimentConfig,
    z0: &PhaseState,
    seed: u64,
    record_times: &[f64],
    checkpoint_idx: &[usize],
    envelope: Option<&EnvelopeCheck>,
) -> Result<Summary> {
    let params = config.sim_params(seed);
    let events = EventConfig {
        energy_thresholds: &[],
        cup: config.cup,
        envelope: None,
    };
    match simulate(&config.dynamics, &config.schedule, z0, &params, &events) {
        Ok(traj) => {
            debug_assert_eq!(traj.times.len(), record_times.len());
            Ok(summarize_full(&traj, &config.dynamics, checkpoint_idx, envelope))
        }
        Err(Error::Diverged { t, .. }) => {
            // Replay the longest full-step prefix that ends strictly before
            // the diverging step; the same seed reproduces it bit for bit.
            let steps_before = ((t - config.dt * 1e-6) / config.dt).floor().max(0.0);
            let prefix_params = SimParams {
                horizon: steps_before * config.dt,
                ..params
            };
            let prefix = simulate(&config.dynamics, &config.schedule, z0, &prefix_params, &events)?;
            Ok(summarize_prefix(
                &prefix,
                &config.dynamics,
                record_times,
                checkpoint_idx,
                t,
            ))
        }
        Err(e) => Err(e),
    }
}

/// Snap each requested checkpoint to the index of the nearest recorded time.
fn checkpoint_indices(record_times: &[f64], requested: &[f64]) -> Vec<usize> {
    requested
        .iter()
        .map(|&t| {
            record_times
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| (*a - t).abs().total_cmp(&(*b - t).abs()))
                .map(|(i, _)| i)
                .expect("record grids are never empty")
        })
        .collect()
}

fn run_trajectories(
    config: &ExperimentConfig,
    envelope: Option<&EnvelopeCheck>,
) -> Result<(Vec<f64>, Vec<usize>, Vec<Summary>, FrictionReport)> {
    let report = config.validate()?;
    let z0s = config.initial_states()?;
    let record_times = config.sim_params(0).record_times();
    let checkpoint_idx = checkpoint_indices(&record_times, &config.checkpoints);
    let summaries: Result<Vec<Summary>> = (0..config.n_trajectories)
        .into_par_iter()
        .map(|i| {
            run_one(
                config,
                &z0s[i],
                config.base_seed ^ i as u64,
                &record_times,
                &checkpoint_idx,
                envelope,
            )
        })
        .collect();
    Ok((record_times, checkpoint_idx, summaries?, report))
}

/// Simulate `n_trajectories` independent annealing runs and aggregate the
/// configured observables. The result depends only on the configuration and
/// the base seed, never on thread scheduling.
pub fn run_ensemble(config: &ExperimentConfig) -> Result<EnsembleStats> {
    let (record_times, checkpoint_idx, summaries, report) = run_trajectories(config, None)?;
    let n = summaries.len();

    let checkpoints = config
        .checkpoints
        .iter()
        .zip(&checkpoint_idx)
        .enumerate()
        .map(|(j, (&requested, &idx))| {
            let counts: Vec<usize> = config
                .thresholds
                .iter()
                .map(|&delta| {
                    summaries
                        .iter()
                        .filter(|s| {
                            let h = s.checkpoint_h[j];
                            h.is_nan() || h >= delta
                        })
                        .count()
                })
                .collect();
            let estimates = counts.iter().map(|&k| k as f64 / n as f64).collect();
            let intervals = counts.iter().map(|&k| wilson_interval(k, n)).collect();
            CheckpointStat {
                requested_time: requested,
                time: record_times[idx],
                counts,
                estimates,
                intervals,
            }
        })
        .collect();

    let diverged = summaries.iter().filter(|s| s.diverged_at.is_some()).count();
    let escaped = summaries
        .iter()
        .filter(|s| s.diverged_at.is_none() && s.exit_time.is_some())
        .count();
    Ok(EnsembleStats {
        n,
        checkpoints,
        trapped: n - escaped - diverged,
        escaped,
        diverged,
        final_energies: summaries.iter().map(|s| s.final_h).collect(),
        best_potentials: summaries.iter().map(|s| s.best_potential).collect(),
        kappa_eff: report.kappa_eff,
        l_eff: report.l_eff,
    })
}

/// Trapping probability with a plateau diagnostic at a tenth of the horizon.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrapEstimate {
    pub n: usize,
    pub horizon: f64,
    /// Trajectories that never left the cup (and stayed finite) up to the
    /// horizon.
    pub trapped: usize,
    pub estimate: f64,
    pub interval: (f64, f64),
    /// The same count up to `horizon / 10`: if the estimate has plateaued,
    /// the two estimates agree; a decaying probability keeps sliding.
    pub early_time: f64,
    pub early_trapped: usize,
    pub early_estimate: f64,
    pub early_interval: (f64, f64),
}

/// Estimate the probability that a trajectory never leaves the watched cup
/// over the whole horizon. The finite horizon stands in for "for all time";
/// compare `early_estimate` against `estimate` to judge whether the
/// probability has levelled off or is still decaying.
pub fn trap_probability(config: &ExperimentConfig) -> Result<TrapEstimate> {
    let cup = config
        .cup
        .as_ref()
        .ok_or_else(|| Error::invalid("trapping experiments need a cup watch"))?;
    if let InitialCondition::Fixed(z) = &config.z0 {
        let node = cup.grid.nearest_node(&z.x);
        if cup.members.binary_search(&node).is_err() {
            return Err(Error::invalid(
                "the fixed initial position lies outside the watched cup",
            ));
        }
    }
    let (_, _, summaries, _) = run_trajectories(config, None)?;
    let n = summaries.len();
    let trapped_at = |tau: f64| {
        summaries
            .iter()
            .filter(|s| {
                s.diverged_at.map_or(true, |t| t > tau)
                    && s.exit_time.map_or(true, |t| t > tau)
            })
            .count()
    };
    let trapped = trapped_at(config.horizon);
    let early_time = config.horizon / 10.0;
    let early_trapped = trapped_at(early_time);
    Ok(TrapEstimate {
        n,
        horizon: config.horizon,
        trapped,
        estimate: trapped as f64 / n as f64,
        interval: wilson_interval(trapped, n),
        early_time,
        early_trapped,
        early_estimate: early_trapped as f64 / n as f64,
        early_interval: wilson_interval(early_trapped, n),
    })
}

/// One row of a cooling-rate sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseSweepPoint {
    pub c: f64,
    pub n: usize,
    /// Trajectories whose final energy lies strictly below the success
    /// threshold.
    pub successes: usize,
    pub estimate: f64,
    pub interval: (f64, f64),
}

/// Rerun the ensemble for each logarithmic cooling rate in `c_values`,
/// keeping everything else (including the seeds, for common random numbers)
/// fixed, and report the success probability at the horizon. Success means
/// the final energy is below the first configured threshold. When more than
/// one rate is given they must straddle `c_star`, so the sweep actually
/// crosses the predicted transition.
pub fn phase_sweep(
    config: &ExperimentConfig,
    c_values: &[f64],
    c_star: f64,
) -> Result<Vec<PhaseSweepPoint>> {
    let beta0 = match config.schedule.cooling {
        CoolingSchedule::Logarithmic { beta0, .. } => beta0,
        _ => {
            return Err(Error::invalid(
                "phase sweeps vary the rate of a logarithmic cooling schedule",
            ))
        }
    };
    let &delta = config
        .thresholds
        .first()
        .ok_or_else(|| Error::invalid("phase sweeps need a success threshold"))?;
    if c_values.is_empty() {
        return Err(Error::invalid("phase sweeps need at least one rate"));
    }
    if c_values.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
        return Err(Error::invalid("cooling rates must be finite and positive"));
    }
    if c_values.len() >= 2 {
        if !(c_star.is_finite() && c_star > 0.0) {
            return Err(Error::invalid("the reference rate must be finite and positive"));
        }
        let lo = c_values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = c_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(lo < c_star && c_star < hi) {
            return Err(Error::invalid(
                "swept rates must straddle the reference rate",
            ));
        }
    }
    let mut rows = Vec::with_capacity(c_values.len());
    for &c in c_values {
        let mut swept = config.clone();
        swept.schedule.cooling = CoolingSchedule::logarithmic(c, beta0)?;
        let (_, _, summaries, _) = run_trajectories(&swept, None)?;
        let n = summaries.len();
        let successes = summaries
            .iter()
            .filter(|s| !s.final_h.is_nan() && s.final_h < delta)
            .count();
        rows.push(PhaseSweepPoint {
            c,
            n,
            successes,
            estimate: successes as f64 / n as f64,
            interval: wilson_interval(successes, n),
        });
    }
    Ok(rows)
}

/// Fraction of trajectories that stayed inside the accuracy envelope.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeEstimate {
    pub n: usize,
    pub satisfied: usize,
    pub estimate: f64,
    pub interval: (f64, f64),
}

/// Estimate how often a trajectory keeps `|X_t - x_star|` within
/// `min(delta, sqrt(epsilon_t))` at every recorded time up to the horizon,
/// where `epsilon_t` is the accuracy envelope with the given amplitude and
/// rate. Requires cooling faster than any logarithm (the noiseless constant
/// schedule is accepted as the degenerate limit, with the temperature term
/// of the envelope identically zero) and initial positions within
/// `delta / 2` of the target, matching the regime where the envelope means
/// anything.
pub fn envelope_frequency(
    config: &ExperimentConfig,
    x_star: &[f64],
    delta: f64,
    amplitude: f64,
    rate: f64,
) -> Result<EnvelopeEstimate> {
    if x_star.len() != config.dynamics.dim() {
        return Err(Error::invalid(
            "target dimension does not match the dynamics",
        ));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid("the envelope needs a positive finite delta"));
    }
    let cooling = &config.schedule.cooling;
    let noiseless = matches!(
        cooling,
        CoolingSchedule::Constant { beta } if beta.is_infinite()
    );
    if !noiseless && classify(cooling, f64::MIN_POSITIVE)? != ScheduleClass::SuperLogarithmic {
        return Err(Error::invalid(
            "the accuracy envelope applies only to cooling faster than any logarithm",
        ));
    }
    let epsilon = |t: f64| -> Result<f64> {
        if noiseless {
            Ok(amplitude * (-rate * t).exp())
        } else {
            epsilon_envelope(t, amplitude, rate, cooling)
        }
    };

    // Pre-state check: every starting position must sit within delta/2 of
    // the target, whatever policy generated it.
    config.validate()?;
    let half_width = torus_half_width(&config.dynamics);
    for z in config.initial_states()? {
        let mut d2 = 0.0;
        for (xi, ci) in z.x.iter().zip(x_star) {
            let mut diff = xi - ci;
            if let Some(l) = half_width {
                diff = (diff + l).rem_euclid(2.0 * l) - l;
            }
            d2 += diff * diff;
        }
        if d2.sqrt() > 0.5 * delta {
            return Err(Error::invalid(
                "an initial position lies farther than delta/2 from the target",
            ));
        }
    }

    let record_times = config.sim_params(0).record_times();
    let bound2 = record_times
        .iter()
        .map(|&t| {
            let eps = epsilon(t)?.max(0.0);
            Ok(delta.min(eps.sqrt()).powi(2))
        })
        .collect::<Result<Vec<f64>>>()?;
    let check = EnvelopeCheck {
        center: x_star.to_vec(),
        bound2,
    };
    let (_, _, summaries, _) = run_trajectories(config, Some(&check))?;
    let n = summaries.len();
    let satisfied = summaries.iter().filter(|s| s.envelope_ok).count();
    Ok(EnvelopeEstimate {
        n,
        satisfied,
        estimate: satisfied as f64 / n as f64,
        interval: wilson_interval(satisfied, n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elevation::cup;
    use crate::gibbs::{tail_mass, VelocityFactor};
    use crate::integrator::Scheme;
    use crate::landscape::{PotentialFamily, PotentialSpec};
    use crate::schedules::{FrictionKind, FrictionSchedule};
    use approx::assert_relative_eq;

    fn constant_schedule(gamma: f64, beta: f64) -> AnnealSchedule {
        AnnealSchedule::new(
            CoolingSchedule::constant(beta).unwrap(),
            FrictionSchedule::new(FrictionKind::Constant { gamma }, gamma.min(1.0), 1e6).unwrap(),
        )
    }

    fn quadratic(omega2: f64) -> PotentialSpec {
        PotentialSpec::new(PotentialFamily::Quadratic { omega2 }, 1).unwrap()
    }

    fn double_well(height: f64, tilt: f64) -> PotentialSpec {
        PotentialSpec::new(PotentialFamily::DoubleWell1D { height, tilt }, 1).unwrap()
    }

    fn base_config<'a>(
        dynamics: Dynamics<'a>,
        schedule: AnnealSchedule,
        z0: PhaseState,
        n: usize,
        horizon: f64,
        dt: f64,
    ) -> ExperimentConfig<'a> {
        ExperimentConfig {
            dynamics,
            schedule,
            z0: InitialCondition::Fixed(z0),
            n_trajectories: n,
            scheme: Scheme::SplittingBaoab,
            dt,
            horizon,
            checkpoints: vec![horizon],
            thresholds: vec![0.5],
            cup: None,
            base_seed: 17,
        }
    }

    #[test]
    fn wilson_interval_basics() {
        let (lo, hi) = wilson_interval(50, 100);
        assert!(lo < 0.5 && 0.5 < hi);
        assert!(hi - lo < 0.21);
        let (lo, hi) = wilson_interval(0, 40);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.15);
        let (lo, hi) = wilson_interval(40, 40);
        assert_eq!(hi, 1.0);
        assert!(lo > 0.85);
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
    }

    #[test]
    fn wilson_coverage_on_synthetic_bernoulli() {
        // Nominal 95% coverage; demand at least 90% over 200 replications.
        let mut rng = ChaCha8Rng::seed_from_u64(321);
        let mut covered = 0;
        for _ in 0..200 {
            let k = (0..100).filter(|_| rng.gen_range(0.0..1.0) < 0.5).count();
            let (lo, hi) = wilson_interval(k, 100);
            if lo <= 0.5 && 0.5 <= hi {
                covered += 1;
            }
        }
        assert!(covered >= 180, "covered only {covered} of 200");
    }

    #[test]
    fn zero_horizon_reports_initial_indicator() {
        let spec = quadratic(1.0);
        let z0 = PhaseState::new(vec![0.5], vec![-1.0]).unwrap();
        // H = 0.5 * 0.25 + 0.5 = 0.625.
        let mut config = base_config(
            Dynamics::Free(&spec),
            constant_schedule(1.0, 4.0),
            z0,
            1,
            0.0,
            0.1,
        );
        config.checkpoints = vec![0.0];
        config.thresholds = vec![0.5, 0.7];
        let stats = run_ensemble(&config).unwrap();
        assert_eq!(stats.n, 1);
        assert_eq!(stats.checkpoints.len(), 1);
        assert_eq!(stats.checkpoints[0].time, 0.0);
        assert_eq!(stats.checkpoints[0].counts, vec![1, 0]);
        assert_eq!(stats.diverged, 0);
        assert_eq!(stats.trapped, 1);
        assert_relative_eq!(stats.final_energies[0], 0.625, max_relative = 1e-12);
        assert_relative_eq!(stats.best_potentials[0], 0.125, max_relative = 1e-12);
    }

    #[test]
    fn stationary_exceedance_matches_quadrature() {
        let spec = quadratic(1.0);
        let beta = 8.0;
        let delta = 0.5;
        let grid = spec.sample_grid(&[(-6.0, 6.0)], &[2001]).unwrap();
        let measure = GibbsMeasure::new(&grid, beta, VelocityFactor::Gaussian).unwrap();
        let oracle = tail_mass(&measure, delta);

        let n = 500;
        let mut config = base_config(
            Dynamics::Free(&spec),
            constant_schedule(1.0, beta),
            PhaseState::new(vec![0.0], vec![0.0]).unwrap(),
            n,
            30.0,
            0.01,
        );
        config.z0 = InitialCondition::GibbsDraw(&measure);
        config.thresholds = vec![delta];
        let stats = run_ensemble(&config).unwrap();
        let p_hat = stats.checkpoints[0].estimates[0];
        let se = (oracle * (1.0 - oracle) / n as f64).sqrt();
        assert!(
            (p_hat - oracle).abs() <= 4.0 * se + 0.005,
            "p_hat {p_hat} vs oracle {oracle} (se {se})"
        );
        let (lo, hi) = stats.checkpoints[0].intervals[0];
        assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi) && lo <= hi);
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let spec = double_well(1.0, 0.3);
        let z0 = PhaseState::new(vec![0.9], vec![0.0]).unwrap();
        let mut config = base_config(
            Dynamics::Free(&spec),
            constant_schedule(1.0, 2.0),
            z0,
            64,
            2.0,
            0.02,
        );
        config.checkpoints = vec![0.5, 2.0];
        config.thresholds = vec![0.3, 1.0];
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_ensemble(&config).unwrap());
        let quad = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_ensemble(&config).unwrap());
        assert_eq!(single, quad);
        // And rerunning in the ambient pool reproduces it again.
        assert_eq!(single, run_ensemble(&config).unwrap());
    }

    #[test]
    fn whole_grid_cup_always_traps() {
        let spec = double_well(1.0, 0.0);
        let grid = spec.sample_grid(&[(-2.0, 2.0)], &[201]).unwrap();
        let members: Vec<usize> = (0..grid.values.len()).collect();
        let z0 = PhaseState::new(vec![-1.0], vec![0.0]).unwrap();
        let mut config = base_config(
            Dynamics::Free(&spec),
            constant_schedule(1.0, 2.0),
            z0,
            30,
            5.0,
            0.02,
        );
        config.cup = Some(CupWatch {
            grid: &grid,
            members: &members,
        });
        let trap = trap_probability(&config).unwrap();
        assert_eq!(trap.trapped, 30);
        assert_eq!(trap.estimate, 1.0);
        assert_eq!(trap.early_estimate, 1.0);
    }

    fn left_well_cup(grid: &GridLandscape) -> Vec<usize> {
        let bottom = grid.nearest_node(&[-1.0]);
        cup(grid, bottom, 0.9).unwrap().members
    }

    #[test]
    fn hot_slow_schedule_keeps_escaping() {
        let spec = double_well(1.0, 0.0);
        let grid = spec.sample_grid(&[(-2.2, 2.2)], &[441]).unwrap();
        let members = left_well_cup(&grid);
        let z0 = PhaseState::new(vec![-1.0], vec![0.0]).unwrap();
        let schedule = AnnealSchedule::new(
            CoolingSchedule::logarithmic(8.0, 1.5).unwrap(),
            FrictionSchedule::new(FrictionKind::Constant { gamma: 1.0 }, 0.9, 1.0).unwrap(),
        );
        let mut config = base_config(Dynamics::Free(&spec), schedule, z0, 200, 40.0, 0.02);
        config.cup = Some(CupWatch {
            grid: &grid,
            members: &members,
        });
        let trap = trap_probability(&config).unwrap();
        assert!(
            trap.early_estimate >= trap.estimate + 0.15,
            "expected decay: early {} vs final {}",
            trap.early_estimate,
            trap.estimate
        );
        assert!(trap.estimate < 0.4, "estimate {}", trap.estimate);
    }

    #[test]
    fn cold_fast_schedule_plateaus() {
        let spec = double_well(1.0, 0.0);
        let grid = spec.sample_grid(&[(-2.2, 2.2)], &[441]).unwrap();
        let members = left_well_cup(&grid);
        let z0 = PhaseState::new(vec![-1.0], vec![0.0]).unwrap();
        let schedule = AnnealSchedule::new(
            CoolingSchedule::logarithmic(1.0, 8.0).unwrap(),
            FrictionSchedule::new(FrictionKind::Constant { gamma: 1.0 }, 0.9, 0.2).unwrap(),
        );
        let mut config = base_config(Dynamics::Free(&spec), schedule, z0, 200, 40.0, 0.02);
        config.cup = Some(CupWatch {
            grid: &grid,
            members: &members,
        });
        let trap = trap_probability(&config).unwrap();
        assert!(trap.estimate >= 0.9, "estimate {}", trap.estimate);
        assert!(
            trap.early_estimate - trap.estimate <= 0.05,
            "no plateau: early {} vs final {}",
            trap.early_estimate,
            trap.estimate
        );
    }

    #[test]
    fn trap_needs_cup_and_inside_start() {
        let spec = double_well(1.0, 0.0);
        let z0 = PhaseState::new(vec![-1.0], vec![0.0]).unwrap();
        let config = base_config(
            Dynamics::Free(&spec),
            constant_schedule(1.0, 2.0),
            z0,
            4,
            1.0,
            0.1,
        );
        assert!(trap_probability(&config).is_err());

        let grid = spec.sample_grid(&[(-2.2, 2.2)], &[441]).unwrap();
        let members = left_well_cup(&grid);
        let z_out = PhaseState::new(vec![1.0], vec![0.0]).unwrap();
        let mut outside = base_config(
            Dynamics::Free(&spec),
            constant_schedule(1.0, 2.0),
            z_out,
            4,
            1.0,
            0.1,
        );
        outside.cup = Some(CupWatch {
            grid: &grid,
            members: &members,
        });
        let err = trap_probability(&outside).unwrap_err().to_string();
        assert!(err.contains("outside the watched cup"), "{err}");
    }

    #[test]
    fn single_rate_sweep_matches_ensemble() {
        let spec = double_well(1.0, 0.3);
        let z0 = PhaseState::new(vec![0.96], vec![0.0]).unwrap();
        let schedule = AnnealSchedule::new(
            CoolingSchedule::logarithmic(2.0, 0.5).unwrap(),
            FrictionSchedule::new(FrictionKind::Constant { gamma: 1.0 }, 0.4, 2.0).unwrap(),
        );
        let mut config = base_config(Dynamics::Free(&spec), schedule, z0, 80, 20.0, 0.02);
        config.thresholds = vec![0.4];
        let rows = phase_sweep(&config, &[2.0], 0.7).unwrap();
        assert_eq!(rows.len(), 1);
        let stats = run_ensemble(&config).unwrap();
        // The final checkpoint sits exactly at the horizon, so failures
        // there complement the sweep's successes.
        assert_eq!(rows[0].successes, stats.n - stats.checkpoints[0].counts[0]);
        assert_eq!(rows[0].n, stats.n);
    }

    #[test]
    fn sweep_success_grows_with_slower_cooling() {
        let spec = double_well(1.0, 0.3);
        let c_star = spec.known_c_star().unwrap();
        assert!((0.4..1.1).contains(&c_star), "c_star {c_star}");
        let z0 = PhaseState::new(vec![0.96], vec![0.0]).unwrap();
        let schedule = AnnealSchedule::new(
            CoolingSchedule::logarithmic(c_star, 0.5).unwrap(),
            FrictionSchedule::new(FrictionKind::Constant { gamma: 1.0 }, 0.4, 2.1).unwrap(),
        );
        let mut config = base_config(Dynamics::Free(&spec), schedule, z0, 150, 300.0, 0.02);
        config.thresholds = vec![0.35];
        let cs = [0.5 * c_star, c_star, 1.5 * c_star, 2.0 * c_star];
        let rows = phase_sweep(&config, &cs, c_star).unwrap();
        for pair in rows.windows(2) {
            assert!(
                pair[1].estimate >= pair[0].estimate - 0.12,
                "success should not drop sharply with slower cooling: {:?}",
                rows.iter().map(|r| r.estimate).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn sweep_rejects_bad_arguments() {
        let spec = double_well(1.0, 0.3);
        let z0 = PhaseState::new(vec![0.96], vec![0.0]).unwrap();
        let log_config = {
            let schedule = AnnealSchedule::new(
                CoolingSchedule::logarithmic(2.0, 0.5).unwrap(),
                FrictionSchedule::new(FrictionKind::Constant { gamma: 1.0 }, 0.4, 2.0).unwrap(),
            );
            base_config(Dynamics::Free(&spec), schedule, z0.clone(), 4, 1.0, 0.1)
        };
        // Rates on one side of the reference do not straddle it.
        assert!(phase_sweep(&log_config, &[1.0, 2.0], 0.5).is_err());
        assert!(phase_sweep(&log_config, &[], 0.5).is_err());
        // Non-logarithmic cooling cannot be swept in c.
        let const_config = base_config(
            Dynamics::Free(&spec),
            constant_schedule(1.0, 2.0),
            z0,
            4,
            1.0,
            0.1,
        );
        assert!(phase_sweep(&const_config, &[1.0], 0.5).is_err());
    }

    #[test]
    fn noiseless_start_at_target_satisfies_envelope() {
        let spec = quadratic(2.0);
        let z0 = PhaseState::new(vec![0.0], vec![0.0]).unwrap();
        let config = base_config(
            Dynamics::Free(&spec),
            constant_schedule(1.0, f64::INFINITY),
            z0,
            3,
            10.0,
            0.01,
        );
        let est = envelope_frequency(&config, &[0.0], 0.5, 1.0, 0.5).unwrap();
        assert_eq!(est.satisfied, 3);
        assert_eq!(est.estimate, 1.0);
    }

    #[test]
    fn power_cooling_keeps_positive_envelope_frequency() {
        let spec = quadratic(2.0);
        let z0 = PhaseState::new(vec![0.2], vec![0.0]).unwrap();
        let schedule = AnnealSchedule::new(
            CoolingSchedule::power(2.0, 0.7).unwrap(),
            FrictionSchedule::new(FrictionKind::Constant { gamma: 1.0 }, 0.9, 0.6).unwrap(),
        );
        let config = base_config(Dynamics::Free(&spec), schedule, z0, 80, 20.0, 0.01);
        let est = envelope_frequency(&config, &[0.0], 0.8, 2.0, 0.5).unwrap();
        assert!(est.satisfied > 0, "no trajectory satisfied the envelope");
        assert!(est.estimate > 0.0 && est.estimate <= 1.0);
        let (lo, hi) = est.interval;
        assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
    }

    #[test]
    fn envelope_rejects_wrong_schedules_and_far_starts() {
        let spec = quadratic(2.0);
        let z0 = PhaseState::new(vec![0.0], vec![0.0]).unwrap();
        let log_schedule = AnnealSchedule::new(
            CoolingSchedule::logarithmic(2.0, 0.5).unwrap(),
            FrictionSchedule::new(FrictionKind::Constant { gamma: 1.0 }, 0.4, 2.0).unwrap(),
        );
        let log_config = base_config(Dynamics::Free(&spec), log_schedule, z0, 4, 1.0, 0.1);
        let err = envelope_frequency(&log_config, &[0.0], 0.5, 1.0, 0.5)
            .unwrap_err()
            .to_string();
        assert!(err.contains("faster than any logarithm"), "{err}");

        let far = PhaseState::new(vec![0.4], vec![0.0]).unwrap();
        let far_config = base_config(
            Dynamics::Free(&spec),
            constant_schedule(1.0, f64::INFINITY),
            far,
            4,
            1.0,
            0.1,
        );
        let err = envelope_frequency(&far_config, &[0.0], 0.5, 1.0, 0.5)
            .unwrap_err()
            .to_string();
        assert!(err.contains("delta/2"), "{err}");
    }

    #[test]
    fn diverged_trajectories_are_counted_and_fail_later_checkpoints() {
        // A stiff quartic stepped far too coarsely, started noiselessly from
        // positions spread across the step size's stability basin: inner
        // starts settle into a well, outer starts blow up deterministically.
        let spec = PotentialSpec::new(
            PotentialFamily::MultiWellPolynomial {
                coeffs: vec![1.0, 0.0, -2.0, 0.0, 1.0],
            },
            1,
        )
        .unwrap();
        let grid = spec.sample_grid(&[(-3.5, 3.5)], &[141]).unwrap();
        let everywhere: Vec<usize> = (0..grid.values.len()).collect();
        let mut config = base_config(
            Dynamics::Free(&spec),
            constant_schedule(1.0, f64::INFINITY),
            PhaseState::new(vec![0.0], vec![0.0]).unwrap(),
            40,
            30.0,
            0.25,
        );
        config.z0 = InitialCondition::UniformInCup {
            grid: &grid,
            members: &everywhere,
        };
        config.checkpoints = vec![0.0, 30.0];
        config.thresholds = vec![1e6];
        let stats = run_ensemble(&config).unwrap();
        assert_eq!(stats.trapped + stats.escaped + stats.diverged, stats.n);
        assert!(
            stats.diverged > 0 && stats.diverged < stats.n,
            "wanted a mix, got {} diverged of {}",
            stats.diverged,
            stats.n
        );
        // At t=0 nothing exceeds the huge threshold; by the horizon every
        // diverged trajectory must be counted against it.
        assert_eq!(stats.checkpoints[0].counts[0], 0);
        assert!(stats.checkpoints[1].counts[0] >= stats.diverged);
        let nan_finals = stats.final_energies.iter().filter(|h| h.is_nan()).count();
        assert_eq!(nan_finals, stats.diverged);
        // Replayed prefixes still yield a finite best potential.
        assert!(stats.best_potentials.iter().all(|u| u.is_finite()));
    }

    #[test]
    fn uniform_cup_starts_stay_inside_the_cup_cells() {
        let spec = double_well(1.0, 0.0);
        let grid = spec.sample_grid(&[(-2.2, 2.2)], &[441]).unwrap();
        let members = left_well_cup(&grid);
        let mut config = base_config(
            Dynamics::Free(&spec),
            constant_schedule(1.0, 4.0),
            PhaseState::new(vec![-1.0], vec![0.0]).unwrap(),
            64,
            0.0,
            0.1,
        );
        config.z0 = InitialCondition::UniformInCup {
            grid: &grid,
            members: &members,
        };
        config.checkpoints = vec![0.0];
        let stats = run_ensemble(&config).unwrap();
        assert_eq!(stats.n, 64);
        // All starts carry zero velocity, so the recorded energy is the
        // potential alone and lies near or below the cup level (a few grid
        // cells of slack for the half-cell jitter).
        assert!(stats
            .final_energies
            .iter()
            .all(|&h| h.is_finite() && h < 0.95));
    }

    #[test]
    fn config_validation_rejects_bad_inputs() {
        let spec = quadratic(1.0);
        let z0 = PhaseState::new(vec![0.0], vec![0.0]).unwrap();
        let good = base_config(
            Dynamics::Free(&spec),
            constant_schedule(1.0, 4.0),
            z0,
            4,
            1.0,
            0.1,
        );

        let mut no_traj = good.clone();
        no_traj.n_trajectories = 0;
        assert!(run_ensemble(&no_traj).is_err());

        let mut late = good.clone();
        late.checkpoints = vec![2.0];
        assert!(run_ensemble(&late).is_err());

        let mut wrong_dim = good.clone();
        wrong_dim.z0 =
            InitialCondition::Fixed(PhaseState::new(vec![0.0, 0.0], vec![0.0, 0.0]).unwrap());
        assert!(run_ensemble(&wrong_dim).is_err());

        // Declared friction floor above the actual constant friction.
        let mut bad_friction = good.clone();
        bad_friction.schedule = AnnealSchedule::new(
            CoolingSchedule::constant(4.0).unwrap(),
            FrictionSchedule::new(FrictionKind::Constant { gamma: 1.0 }, 2.0, 1e6).unwrap(),
        );
        let err = run_ensemble(&bad_friction).unwrap_err().to_string();
        assert!(err.contains("friction"), "{err}");
    }
}

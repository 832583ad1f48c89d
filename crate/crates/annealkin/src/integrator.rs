//! SDE integrators for the annealing dynamics.
//!
//! Three variants of the dynamics are simulated: the free-space kinetic
//! Langevin equation, its wrap onto the torus of a periodized potential, and
//! the fully compact process whose velocity marginal also lives on the torus
//! (quadratic kinetic energy replaced by a periodic surrogate `W` and an
//! extra position noise gated by the coupling field `sigma`). Two steppers
//! are available: Euler-Maruyama with all coefficients frozen at the left
//! endpoint, and a BAOAB splitting whose friction/noise sub-step uses the
//! exact Ornstein-Uhlenbeck update. A linearized Gaussian companion process
//! (force replaced by a fixed Hessian) supports coupling experiments.

use std::io::Write;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::landscape::{
    GridLandscape, PeriodizedPotential, PhaseState, PotentialSpec, VelocityPotential,
};
use crate::schedules::{CoolingSchedule, FrictionSchedule};
use crate::{Error, Result};

/// Cooling and friction paired for one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub cooling: CoolingSchedule,
    pub friction: FrictionSchedule,
}

impl AnnealSchedule {
    pub fn new(cooling: CoolingSchedule, friction: FrictionSchedule) -> Self {
        AnnealSchedule { cooling, friction }
    }

    pub fn beta_at(&self, t: f64) -> Result<f64> {
        self.cooling.beta_at(t)
    }

    pub fn gamma_at(&self, t: f64) -> Result<f64> {
        self.friction.gamma_at(&self.cooling, t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMaruyama,
    SplittingBaoab,
}

/// Discretization parameters for one simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub scheme: Scheme,
    /// Base time step. Euler-Maruyama sub-steps automatically whenever
    /// `dt * gamma_t > 0.5` so the stability guard holds even for growing
    /// friction.
    pub dt: f64,
    pub seed: u64,
    /// Total simulated time.
    pub horizon: f64,
    /// A state is recorded every this many steps (the initial and final
    /// states are always recorded).
    pub record_stride: usize,
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt must be finite and > 0"));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid("horizon must be finite and >= 0"));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("record_stride must be >= 1"));
        }
        Ok(())
    }

    /// Number of full base steps and whether a trailing partial step is
    /// needed to land exactly on the horizon.
    fn step_layout(&self) -> (usize, bool) {
        let n_full = (self.horizon / self.dt + 1e-9).floor() as usize;
        let remainder = self.horizon - n_full as f64 * self.dt;
        (n_full, remainder > self.dt * 1e-9)
    }

    /// The exact times `simulate` will record for these parameters: the
    /// initial time, every `record_stride`-th step, and the final step.
    pub fn record_times(&self) -> Vec<f64> {
        let (n_full, has_partial) = self.step_layout();
        let total_steps = n_full + usize::from(has_partial);
        let mut times = vec![0.0];
        for k in 0..total_steps {
            if (k + 1) % self.record_stride == 0 || k + 1 == total_steps {
                let t = if k < n_full {
                    (k + 1) as f64 * self.dt
                } else {
                    self.horizon
                };
                times.push(t);
            }
        }
        times
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum EventKind {
    /// Total energy first reached the threshold.
    EnergyCross { threshold: f64 },
    /// Position first left the watched cup.
    CupExit,
    /// Position first left the shrinking ball around the watched center.
    EnvelopeViolation,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Event {
    pub kind: EventKind,
    pub time: f64,
}

/// Recorded simulation output. `energies` holds the variant's total energy
/// (potential plus kinetic or its compact surrogate) per recorded state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    pub energies: Vec<f64>,
    pub events: Vec<Event>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &PhaseState {
        self.states.last().expect("trajectories are never empty")
    }

    /// First time the given event kind fired, if it did.
    pub fn event_time(&self, kind: &EventKind) -> Option<f64> {
        self.events.iter().find(|e| &e.kind == kind).map(|e| e.time)
    }

    /// CSV export: `t,x0..,y0..,h` per recorded state.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.states.first().map_or(0, |s| s.dim());
        let mut header = String::from("t");
        for i in 0..d {
            header.push_str(&format!(",x{i}"));
        }
        for i in 0..d {
            header.push_str(&format!(",y{i}"));
        }
        header.push_str(",h");
        writeln!(w, "{header}")?;
        for ((t, z), h) in self.times.iter().zip(&self.states).zip(&self.energies) {
            let mut row = format!("{t}");
            for v in z.x.iter().chain(z.y.iter()) {
                row.push_str(&format!(",{v}"));
            }
            row.push_str(&format!(",{h}"));
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

/// Which dynamics to integrate.
#[derive(Clone, Copy, Debug)]
pub enum Dynamics<'a> {
    /// Kinetic Langevin dynamics on the free potential.
    Free(&'a PotentialSpec),
    /// Same dynamics with positions wrapped onto the torus of a periodized
    /// potential.
    Torus(&'a PeriodizedPotential),
    /// Fully compact process: positions and velocities both wrapped, kinetic
    /// energy surrogate `W`, coupling field `sigma`. Always integrated with
    /// Euler-Maruyama (the exact friction sub-step of the splitting scheme
    /// does not apply to the `sigma`-gated position noise).
    Compact {
        potential: &'a PeriodizedPotential,
        velocity: &'a VelocityPotential,
    },
}

impl Dynamics<'_> {
    pub fn dim(&self) -> usize {
        match self {
            Dynamics::Free(spec) => spec.dimension(),
            Dynamics::Torus(p) => p.dimension(),
            Dynamics::Compact { potential, .. } => potential.dimension(),
        }
    }
}

/// Cup membership watch: fires when the nearest grid node leaves `members`
/// (sorted flat indices).
#[derive(Clone, Copy)]
pub struct CupWatch<'a> {
    pub grid: &'a GridLandscape,
    pub members: &'a [usize],
}

/// Ball watch: fires when the squared distance from `center` exceeds
/// `radius_squared(t)` (squared distances are wrapped on torus variants).
#[derive(Clone, Copy)]
pub struct EnvelopeWatch<'a> {
    pub center: &'a [f64],
    pub radius_squared: &'a (dyn Fn(f64) -> f64 + Sync),
}

/// Event detectors, checked once per step (and at t=0); each fires at most
/// once, at the first step whose post-state satisfies it, so detection is
/// conservative by one step.
#[derive(Clone, Copy, Default)]
pub struct EventConfig<'a> {
    pub energy_thresholds: &'a [f64],
    pub cup: Option<CupWatch<'a>>,
    pub envelope: Option<EnvelopeWatch<'a>>,
}

impl EventConfig<'static> {
    pub fn none() -> Self {
        EventConfig::default()
    }
}

impl EventConfig<'_> {
    fn is_empty(&self) -> bool {
        self.energy_thresholds.is_empty() && self.cup.is_none() && self.envelope.is_none()
    }
}

/// One Euler-Maruyama step of the kinetic dynamics, all coefficients frozen
/// at time `t`: `x += y dt; y += -(grad U(x) + gamma y) dt + sqrt(2 gamma /
/// beta) dW`. Does not sub-step; `simulate` adds the stability guard.
pub fn step_euler(
    z: &PhaseState,
    t: f64,
    dt: f64,
    spec: &PotentialSpec,
    schedule: &AnnealSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<PhaseState> {
    check_step_args(z, dt, spec.dimension())?;
    if dt == 0.0 {
        return Ok(z.clone());
    }
    let mut x = z.x.clone();
    let mut y = z.y.clone();
    let gamma = schedule.gamma_at(t)?;
    let beta = schedule.beta_at(t)?;
    let g = spec.grad(&x);
    euler_kick(&mut x, &mut y, &g, dt, gamma, beta, rng);
    finite_or_diverged(t + dt, &x, &y)?;
    PhaseState::new(x, y)
}

/// One BAOAB step: half force kick, half free flight, exact
/// Ornstein-Uhlenbeck friction/noise update, half free flight, half force
/// kick. Coefficients frozen at time `t`.
pub fn step_splitting(
    z: &PhaseState,
    t: f64,
    dt: f64,
    spec: &PotentialSpec,
    schedule: &AnnealSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<PhaseState> {
    check_step_args(z, dt, spec.dimension())?;
    if dt == 0.0 {
        return Ok(z.clone());
    }
    let mut x = z.x.clone();
    let mut y = z.y.clone();
    let gamma = schedule.gamma_at(t)?;
    let beta = schedule.beta_at(t)?;
    let mut cache = OuCache::stale();
    baoab_kick(
        &mut x,
        &mut y,
        |x| spec.grad(x),
        dt,
        gamma,
        beta,
        rng,
        &mut cache,
    );
    finite_or_diverged(t + dt, &x, &y)?;
    PhaseState::new(x, y)
}

fn check_step_args(z: &PhaseState, dt: f64, dim: usize) -> Result<()> {
    if z.dim() != dim {
        return Err(Error::invalid(format!(
            "state dimension {} does not match the potential's {dim}",
            z.dim()
        )));
    }
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt must be finite and >= 0"));
    }
    if !z.is_finite() {
        return Err(Error::invalid("initial state must be finite"));
    }
    Ok(())
}

fn finite_or_diverged(t: f64, x: &[f64], y: &[f64]) -> Result<()> {
    if x.iter().chain(y.iter()).all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged {
            t,
            detail: format!("state became non-finite: x={x:?} y={y:?}"),
        })
    }
}

fn euler_kick(
    x: &mut [f64],
    y: &mut [f64],
    grad: &[f64],
    dt: f64,
    gamma: f64,
    beta: f64,
    rng: &mut ChaCha8Rng,
) {
    let noise = if beta.is_finite() {
        (2.0 * gamma / beta).sqrt() * dt.sqrt()
    } else {
        0.0
    };
    for i in 0..x.len() {
        x[i] += y[i] * dt;
    }
    for i in 0..y.len() {
        let xi: f64 = if noise > 0.0 {
            StandardNormal.sample(rng)
        } else {
            0.0
        };
        y[i] += -(grad[i] + gamma * y[i]) * dt + noise * xi;
    }
}

/// Cached exact Ornstein-Uhlenbeck coefficients; the exponential is only
/// recomputed when `(gamma, dt)` changes, which matters for constant-friction
/// runs of millions of steps.
struct OuCache {
    gamma: f64,
    dt: f64,
    decay: f64,
}

impl OuCache {
    fn stale() -> Self {
        OuCache {
            gamma: f64::NAN,
            dt: f64::NAN,
            decay: f64::NAN,
        }
    }

    fn decay(&mut self, gamma: f64, dt: f64) -> f64 {
        if gamma != self.gamma || dt != self.dt {
            self.gamma = gamma;
            self.dt = dt;
            self.decay = (-gamma * dt).exp();
        }
        self.decay
    }
}

#[allow(clippy::too_many_arguments)]
fn baoab_kick(
    x: &mut [f64],
    y: &mut [f64],
    grad: impl Fn(&[f64]) -> Vec<f64>,
    dt: f64,
    gamma: f64,
    beta: f64,
    rng: &mut ChaCha8Rng,
    cache: &mut OuCache,
) {
    let half = 0.5 * dt;
    let g = grad(x);
    for i in 0..y.len() {
        y[i] -= g[i] * half;
    }
    for i in 0..x.len() {
        x[i] += y[i] * half;
    }
    let decay = cache.decay(gamma, dt);
    let noise = if beta.is_finite() {
        ((1.0 - decay * decay) / beta).sqrt()
    } else {
        0.0
    };
    for i in 0..y.len() {
        let xi: f64 = if noise > 0.0 {
            StandardNormal.sample(rng)
        } else {
            0.0
        };
        y[i] = decay * y[i] + noise * xi;
    }
    for i in 0..x.len() {
        x[i] += y[i] * half;
    }
    let g = grad(x);
    for i in 0..y.len() {
        y[i] -= g[i] * half;
    }
}

/// Force field seen by the kinetic engine.
enum Force<'a> {
    Spec(&'a PotentialSpec),
    Periodized(&'a PeriodizedPotential),
    Hessian(&'a DMatrix<f64>),
}

impl Force<'_> {
    fn grad(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Force::Spec(s) => s.grad(x),
            Force::Periodized(p) => p.grad(x),
            Force::Hessian(h) => {
                let v = nalgebra::DVector::from_column_slice(x);
                ((*h) * v).data.into()
            }
        }
    }

    fn potential(&self, x: &[f64]) -> f64 {
        match self {
            Force::Spec(s) => s.eval(x),
            Force::Periodized(p) => p.eval(x),
            Force::Hessian(h) => {
                let v = nalgebra::DVector::from_column_slice(x);
                0.5 * ((*h) * &v).dot(&v)
            }
        }
    }
}

enum Engine<'a> {
    Kinetic {
        force: Force<'a>,
        /// Present for the torus variant: wraps positions after each step.
        wrap: Option<&'a PeriodizedPotential>,
    },
    Compact {
        potential: &'a PeriodizedPotential,
        velocity: &'a VelocityPotential,
    },
}

impl Engine<'_> {
    fn energy(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Engine::Kinetic { force, .. } => {
                force.potential(x) + 0.5 * y.iter().map(|v| v * v).sum::<f64>()
            }
            Engine::Compact {
                potential,
                velocity,
            } => potential.eval(x) + velocity.w(y),
        }
    }

    fn torus_half_width(&self) -> Option<f64> {
        match self {
            Engine::Kinetic { wrap, .. } => wrap.map(|p| p.half_width()),
            Engine::Compact { potential, .. } => Some(potential.half_width()),
        }
    }

    /// Advance one base step of size `dt` from time `t`. Euler-Maruyama
    /// paths sub-step to keep `sub_dt * gamma <= 0.5`.
    fn step(
        &self,
        scheme: Scheme,
        x: &mut Vec<f64>,
        y: &mut Vec<f64>,
        t: f64,
        dt: f64,
        schedule: &AnnealSchedule,
        rng: &mut ChaCha8Rng,
        cache: &mut OuCache,
    ) -> Result<()> {
        match self {
            Engine::Kinetic { force, wrap } => {
                match scheme {
                    Scheme::EulerMaruyama => {
                        let k = substep_count(schedule.gamma_at(t)?, dt);
                        let h = dt / k as f64;
                        for j in 0..k {
                            let tj = t + h * j as f64;
                            let gamma = schedule.gamma_at(tj)?;
                            let beta = schedule.beta_at(tj)?;
                            let g = force.grad(x);
                            euler_kick(x, y, &g, h, gamma, beta, rng);
                            if let Some(p) = wrap {
                                *x = p.wrap(x);
                            }
                        }
                    }
                    Scheme::SplittingBaoab => {
                        let gamma = schedule.gamma_at(t)?;
                        let beta = schedule.beta_at(t)?;
                        baoab_kick(x, y, |x| force.grad(x), dt, gamma, beta, rng, cache);
                        if let Some(p) = wrap {
                            *x = p.wrap(x);
                        }
                    }
                }
                Ok(())
            }
            Engine::Compact {
                potential,
                velocity,
            } => {
                // Euler-Maruyama regardless of the configured scheme; the
                // position noise is gated by sigma(y) and has no exact
                // friction sub-step.
                let k = substep_count(schedule.gamma_at(t)?, dt);
                let h = dt / k as f64;
                for j in 0..k {
                    let tj = t + h * j as f64;
                    let gamma = schedule.gamma_at(tj)?;
                    let beta = schedule.beta_at(tj)?;
                    compact_kick(potential, velocity, x, y, h, gamma, beta, rng);
                }
                Ok(())
            }
        }
    }
}

fn substep_count(gamma: f64, dt: f64) -> usize {
    ((gamma * dt / 0.5).ceil() as usize).max(1)
}

/// One Euler-Maruyama step of the fully compact dynamics:
/// `x += (grad W(y) - sigma(y) grad U(x)) dt + sqrt(2 sigma(y)/beta) dW~`,
/// `y += (-grad U(x) - gamma grad W(y)) dt + sqrt(2 gamma/beta) dW`,
/// then both coordinates wrap onto the torus. The position noise draw happens
/// even where `sigma = 0` so the stream layout does not depend on the state.
fn compact_kick(
    potential: &PeriodizedPotential,
    velocity: &VelocityPotential,
    x: &mut Vec<f64>,
    y: &mut Vec<f64>,
    dt: f64,
    gamma: f64,
    beta: f64,
    rng: &mut ChaCha8Rng,
) {
    let gx = potential.grad(x);
    let gw = velocity.grad_w(y);
    let sigma = velocity.sigma(y);
    let sqdt = dt.sqrt();
    let (x_noise, y_noise) = if beta.is_finite() {
        (
            (2.0 * sigma / beta).sqrt() * sqdt,
            (2.0 * gamma / beta).sqrt() * sqdt,
        )
    } else {
        (0.0, 0.0)
    };
    let with_noise = beta.is_finite();
    for i in 0..x.len() {
        let xi: f64 = if with_noise {
            StandardNormal.sample(rng)
        } else {
            0.0
        };
        x[i] += (gw[i] - sigma * gx[i]) * dt + x_noise * xi;
    }
    for i in 0..y.len() {
        let xi: f64 = if with_noise {
            StandardNormal.sample(rng)
        } else {
            0.0
        };
        y[i] += (-gx[i] - gamma * gw[i]) * dt + y_noise * xi;
    }
    *x = potential.wrap(x);
    *y = potential.wrap(y);
}

/// Simulate one trajectory of the chosen dynamics.
pub fn simulate(
    dynamics: &Dynamics,
    schedule: &AnnealSchedule,
    z0: &PhaseState,
    params: &SimParams,
    events: &EventConfig,
) -> Result<Trajectory> {
    let engine = match dynamics {
        Dynamics::Free(spec) => Engine::Kinetic {
            force: Force::Spec(spec),
            wrap: None,
        },
        Dynamics::Torus(p) => Engine::Kinetic {
            force: Force::Periodized(p),
            wrap: Some(p),
        },
        Dynamics::Compact {
            potential,
            velocity,
        } => {
            if velocity.half_width() != potential.half_width() {
                return Err(Error::invalid(format!(
                    "compact dynamics needs matching torus half-widths, got {} (position) vs {} (velocity)",
                    potential.half_width(),
                    velocity.half_width()
                )));
            }
            Engine::Compact {
                potential,
                velocity,
            }
        }
    };
    run(engine, dynamics.dim(), schedule, z0, params, events)
}

/// Simulate the Gaussian companion process: same dynamics with the force
/// linearized to `hessian * x` around the origin.
pub fn simulate_linearized(
    hessian: &DMatrix<f64>,
    schedule: &AnnealSchedule,
    z0: &PhaseState,
    params: &SimParams,
) -> Result<Trajectory> {
    if hessian.nrows() != hessian.ncols() {
        return Err(Error::invalid("hessian must be square"));
    }
    if nalgebra::Cholesky::new(hessian.clone()).is_none() {
        return Err(Error::invalid(
            "hessian must be positive definite to define the Gaussian companion process",
        ));
    }
    let engine = Engine::Kinetic {
        force: Force::Hessian(hessian),
        wrap: None,
    };
    run(
        engine,
        hessian.nrows(),
        schedule,
        z0,
        params,
        &EventConfig::none(),
    )
}

fn run(
    engine: Engine,
    dim: usize,
    schedule: &AnnealSchedule,
    z0: &PhaseState,
    params: &SimParams,
    events: &EventConfig,
) -> Result<Trajectory> {
    params.validate()?;
    if z0.dim() != dim {
        return Err(Error::invalid(format!(
            "initial state dimension {} does not match the dynamics' {dim}",
            z0.dim()
        )));
    }
    if !z0.is_finite() {
        return Err(Error::invalid("initial state must be finite"));
    }

    let mut x = z0.x.clone();
    let mut y = z0.y.clone();
    match &engine {
        Engine::Kinetic { wrap: Some(p), .. } => x = p.wrap(&x),
        Engine::Compact { potential, .. } => {
            x = potential.wrap(&x);
            y = potential.wrap(&y);
        }
        _ => {}
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut cache = OuCache::stale();
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        energies: Vec::new(),
        events: Vec::new(),
    };

    let torus_l = engine.torus_half_width();
    let mut energy_fired = vec![false; events.energy_thresholds.len()];
    let mut cup_fired = false;
    let mut envelope_fired = false;
    let mut check_events =
        |t: f64, x: &[f64], h: f64, traj: &mut Trajectory| {
            for (i, &threshold) in events.energy_thresholds.iter().enumerate() {
                if !energy_fired[i] && h >= threshold {
                    energy_fired[i] = true;
                    traj.events.push(Event {
                        kind: EventKind::EnergyCross { threshold },
                        time: t,
                    });
                }
            }
            if let Some(watch) = &events.cup {
                if !cup_fired {
                    let node = watch.grid.nearest_node(x);
                    if watch.members.binary_search(&node).is_err() {
                        cup_fired = true;
                        traj.events.push(Event {
                            kind: EventKind::CupExit,
                            time: t,
                        });
                    }
                }
            }
            if let Some(watch) = &events.envelope {
                if !envelope_fired {
                    let mut d2 = 0.0;
                    for (xi, ci) in x.iter().zip(watch.center) {
                        let mut diff = xi - ci;
                        if let Some(l) = torus_l {
                            diff = (diff + l).rem_euclid(2.0 * l) - l;
                        }
                        d2 += diff * diff;
                    }
                    if d2 > (watch.radius_squared)(t) {
                        envelope_fired = true;
                        traj.events.push(Event {
                            kind: EventKind::EnvelopeViolation,
                            time: t,
                        });
                    }
                }
            }
        };

    let h0 = engine.energy(&x, &y);
    traj.times.push(0.0);
    traj.states.push(PhaseState::new(x.clone(), y.clone())?);
    traj.energies.push(h0);
    check_events(0.0, &x, h0, &mut traj);

    // Full steps of size dt, plus one trailing partial step when the horizon
    // is not a multiple of dt.
    let (n_full, has_partial) = params.step_layout();
    let remainder = params.horizon - n_full as f64 * params.dt;
    let total_steps = n_full + usize::from(has_partial);
    let watch_events = !events.is_empty();

    for k in 0..total_steps {
        let t = k as f64 * params.dt;
        let (dt, t_next) = if k < n_full {
            (params.dt, (k + 1) as f64 * params.dt)
        } else {
            (remainder, params.horizon)
        };
        engine.step(
            params.scheme,
            &mut x,
            &mut y,
            t,
            dt,
            schedule,
            &mut rng,
            &mut cache,
        )?;
        finite_or_diverged(t_next, &x, &y)?;

        let is_record = (k + 1) % params.record_stride == 0 || k + 1 == total_steps;
        if is_record || watch_events {
            let h = engine.energy(&x, &y);
            if watch_events {
                check_events(t_next, &x, h, &mut traj);
            }
            if is_record {
                traj.times.push(t_next);
                traj.states.push(PhaseState::new(x.clone(), y.clone())?);
                traj.energies.push(h);
            }
        }
    }
    Ok(traj)
}

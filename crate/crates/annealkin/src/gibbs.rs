//! Gibbs measures of the annealing dynamics: quadrature normalizers, energy
//! tail masses, reference samplers, empirical-density diagnostics, and the
//! spectral gap of the overdamped position dynamics.
//!
//! The stationary law at inverse temperature `beta` has density proportional
//! to `exp(-beta H)` with `H(x, y) = U(x) + K(y)`; the kinetic part `K` is
//! either the Gaussian `|y|^2 / 2` or the periodic surrogate `W`. Positions
//! live on a tabulated landscape (a box or a torus cell) and are integrated
//! by tensor trapezoid quadrature, which keeps every number here exactly
//! reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::landscape::{GridLandscape, PhaseState, VelocityPotential};
use crate::{Error, Result};

/// Quadrature nodes per velocity axis for the periodic kinetic surrogate.
const SURROGATE_NODES_1D: usize = 4096;
const SURROGATE_NODES_2D: usize = 512;
/// Gaussian velocities are binned over this many standard deviations.
const GAUSSIAN_BIN_SPAN: f64 = 8.0;
/// Rejection-sampler health check: below this acceptance rate the sampler
/// reports an efficiency error instead of spinning forever.
const MIN_ACCEPTANCE: f64 = 1e-6;
const ACCEPTANCE_CHECK_AFTER: u64 = 1 << 20;

/// Which kinetic factor the measure carries alongside the position part.
#[derive(Clone, Copy, Debug)]
pub enum VelocityFactor<'a> {
    /// Position marginal only; the kinetic part is dropped.
    None,
    /// Gaussian factor `exp(-beta |y|^2 / 2)` on free velocities.
    Gaussian,
    /// Periodic surrogate factor `exp(-beta W(y))` on the velocity torus.
    Surrogate(&'a VelocityPotential),
}

/// A Gibbs probability measure `exp(-beta H) / Z` over a tabulated position
/// landscape and one of the kinetic factors.
pub struct GibbsMeasure<'a> {
    grid: &'a GridLandscape,
    beta: f64,
    velocity: VelocityFactor<'a>,
    log_z_position: f64,
    log_z_velocity: f64,
    /// Normalized quadrature mass per grid node.
    position_masses: Vec<f64>,
    /// Per-axis quadrature table for the surrogate kinetic factor.
    velocity_axis: Option<VelocityAxis>,
}

struct VelocityAxis {
    nodes: Vec<f64>,
    /// Normalized per-axis masses (sum to 1).
    masses: Vec<f64>,
    kinetic: Vec<f64>,
}

impl<'a> GibbsMeasure<'a> {
    pub fn new(
        grid: &'a GridLandscape,
        beta: f64,
        velocity: VelocityFactor<'a>,
    ) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid("beta must be finite and > 0"));
        }
        if grid.dim() > 2 {
            return Err(Error::invalid(
                "quadrature supports at most two position dimensions",
            ));
        }
        let weights = quadrature_weights(grid);
        let u_min = grid.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut masses: Vec<f64> = grid
            .values
            .iter()
            .zip(&weights)
            .map(|(u, w)| w * (-beta * (u - u_min)).exp())
            .collect();
        let z_rel: f64 = masses.iter().sum();
        if !(z_rel > 0.0 && z_rel.is_finite()) {
            return Err(Error::Landscape(
                "position partition function vanished or overflowed".into(),
            ));
        }
        for m in &mut masses {
            *m /= z_rel;
        }
        let log_z_position = -beta * u_min + z_rel.ln();

        let d = grid.dim();
        let (log_z_velocity, velocity_axis) = match velocity {
            VelocityFactor::None => (0.0, None),
            VelocityFactor::Gaussian => {
                (d as f64 / 2.0 * (2.0 * std::f64::consts::PI / beta).ln(), None)
            }
            VelocityFactor::Surrogate(vp) => {
                let n = if d == 1 { SURROGATE_NODES_1D } else { SURROGATE_NODES_2D };
                let l = vp.half_width();
                let h = 2.0 * l / n as f64;
                let nodes: Vec<f64> = (0..n).map(|i| -l + i as f64 * h).collect();
                let kinetic: Vec<f64> = nodes.iter().map(|&s| vp.w(&[s])).collect();
                let mut masses: Vec<f64> =
                    kinetic.iter().map(|w| (-beta * w).exp()).collect();
                let z: f64 = masses.iter().sum();
                for m in &mut masses {
                    *m /= z;
                }
                let log_axis = (z * h).ln();
                (
                    d as f64 * log_axis,
                    Some(VelocityAxis {
                        nodes,
                        masses,
                        kinetic,
                    }),
                )
            }
        };
        Ok(GibbsMeasure {
            grid,
            beta,
            velocity,
            log_z_position,
            log_z_velocity,
            position_masses: masses,
            velocity_axis,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn grid(&self) -> &GridLandscape {
        self.grid
    }

    /// `ln Z = ln integral of exp(-beta H)` over the full phase space.
    pub fn log_partition(&self) -> f64 {
        self.log_z_position + self.log_z_velocity
    }

    /// Normalized quadrature mass per position node.
    pub fn position_masses(&self) -> &[f64] {
        &self.position_masses
    }

    fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Survival function of the kinetic energy under the velocity factor.
    fn kinetic_tail(&self) -> KineticTail {
        match self.velocity {
            VelocityFactor::None => KineticTail::Zero,
            VelocityFactor::Gaussian => KineticTail::Gaussian {
                beta: self.beta,
                d: self.dim(),
            },
            VelocityFactor::Surrogate(_) => {
                let axis = self.velocity_axis.as_ref().expect("surrogate table built in new");
                let (values, masses): (Vec<f64>, Vec<f64>) = if self.dim() == 1 {
                    (axis.kinetic.clone(), axis.masses.clone())
                } else {
                    let mut values = Vec::with_capacity(axis.kinetic.len().pow(2));
                    let mut masses = Vec::with_capacity(axis.kinetic.len().pow(2));
                    for (ka, ma) in axis.kinetic.iter().zip(&axis.masses) {
                        for (kb, mb) in axis.kinetic.iter().zip(&axis.masses) {
                            values.push(ka + kb);
                            masses.push(ma * mb);
                        }
                    }
                    (values, masses)
                };
                let mut order: Vec<usize> = (0..values.len()).collect();
                order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
                let sorted_values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
                let mut suffix: Vec<f64> = order.iter().map(|&i| masses[i]).collect();
                for i in (0..suffix.len().saturating_sub(1)).rev() {
                    suffix[i] += suffix[i + 1];
                }
                KineticTail::Table {
                    values: sorted_values,
                    suffix,
                }
            }
        }
    }
}

/// `P(K > s)` for the kinetic part of a Gibbs measure.
enum KineticTail {
    Zero,
    Gaussian { beta: f64, d: usize },
    Table { values: Vec<f64>, suffix: Vec<f64> },
}

impl KineticTail {
    fn survival(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 1.0;
        }
        match self {
            KineticTail::Zero => 0.0,
            KineticTail::Gaussian { beta, d } => match d {
                1 => libm::erfc((beta * s).sqrt()),
                2 => (-beta * s).exp(),
                _ => unreachable!("dimension checked at construction"),
            },
            KineticTail::Table { values, suffix } => {
                let idx = values.partition_point(|v| *v <= s);
                if idx < suffix.len() {
                    suffix[idx]
                } else {
                    0.0
                }
            }
        }
    }
}

/// Tensor quadrature weight per node: trapezoid on boxes (half weight at the
/// boundary nodes), equal weights on periodic cells.
fn quadrature_weights(grid: &GridLandscape) -> Vec<f64> {
    let dim = grid.dim();
    let mut weights = vec![1.0; grid.len()];
    for (flat, w) in weights.iter_mut().enumerate() {
        let multi = grid.multi_index(flat);
        for a in 0..dim {
            let mut wa = grid.spacing[a];
            if !grid.periodic && (multi[a] == 0 || multi[a] == grid.counts[a] - 1) {
                wa *= 0.5;
            }
            *w *= wa;
        }
    }
    weights
}

/// `ln Z` of the Gibbs measure on the given landscape.
pub fn log_partition(
    grid: &GridLandscape,
    beta: f64,
    velocity: VelocityFactor,
) -> Result<f64> {
    Ok(GibbsMeasure::new(grid, beta, velocity)?.log_partition())
}

/// `mu_beta(H > delta)`: total Gibbs mass at energies above `delta`,
/// computed by combining the position quadrature with the kinetic survival
/// function (positions and velocities are independent under the measure).
pub fn tail_mass(measure: &GibbsMeasure, delta: f64) -> f64 {
    let u_min = measure
        .grid
        .values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let tail = measure.kinetic_tail();
    measure
        .grid
        .values
        .iter()
        .zip(&measure.position_masses)
        .map(|(u, m)| {
            // Energies are measured from the landscape floor, matching the
            // normalizer's reference level.
            m * tail.survival(delta - (u - u_min))
        })
        .sum()
}

/// Draw `n` independent samples from the Gibbs measure: rejection sampling
/// for positions under the flat envelope `sup exp(-beta U)`, exact Gaussian
/// (or per-axis rejection under `W`) for velocities.
pub fn sample_gibbs(measure: &GibbsMeasure, n: usize, seed: u64) -> Result<Vec<PhaseState>> {
    let grid = measure.grid;
    let d = measure.dim();
    let beta = measure.beta;
    let u_min = grid.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let (lo, hi) = position_cell(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut proposals: u64 = 0;
    let mut accepted: u64 = 0;
    let mut states = Vec::with_capacity(n);
    while states.len() < n {
        let x: Vec<f64> = (0..d).map(|a| rng.gen_range(lo[a]..hi[a])).collect();
        proposals += 1;
        let u = grid.interpolate(&x) - u_min;
        if rng.gen_range(0.0..1.0) < (-beta * u).exp() {
            accepted += 1;
            let y = sample_velocity(measure, &mut rng)?;
            states.push(PhaseState::new(x, y)?);
        }
        if proposals >= ACCEPTANCE_CHECK_AFTER
            && (accepted as f64) < MIN_ACCEPTANCE * proposals as f64
        {
            return Err(Error::Efficiency(format!(
                "position rejection sampler acceptance rate {:.3e} is below {MIN_ACCEPTANCE:.0e}; \
                 lower beta or sample a landscape that resolves the wells",
                accepted as f64 / proposals as f64
            )));
        }
    }
    Ok(states)
}

fn sample_velocity(measure: &GibbsMeasure, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let d = measure.dim();
    match measure.velocity {
        VelocityFactor::None => Ok(vec![0.0; d]),
        VelocityFactor::Gaussian => {
            let scale = (1.0 / measure.beta).sqrt();
            Ok((0..d)
                .map(|_| {
                    let xi: f64 = StandardNormal.sample(rng);
                    scale * xi
                })
                .collect())
        }
        VelocityFactor::Surrogate(vp) => {
            let l = vp.half_width();
            let beta = measure.beta;
            let mut y = Vec::with_capacity(d);
            for _ in 0..d {
                let mut proposals: u64 = 0;
                loop {
                    let s = rng.gen_range(-l..l);
                    proposals += 1;
                    if rng.gen_range(0.0..1.0) < (-beta * vp.w(&[s])).exp() {
                        y.push(s);
                        break;
                    }
                    if proposals >= ACCEPTANCE_CHECK_AFTER {
                        return Err(Error::Efficiency(
                            "velocity rejection sampler stalled; lower beta".into(),
                        ));
                    }
                }
            }
            Ok(y)
        }
    }
}

/// The position cell spanned by a grid: the half-open fundamental cell for
/// periodic grids, the closed bounding box otherwise.
fn position_cell(grid: &GridLandscape) -> (Vec<f64>, Vec<f64>) {
    let d = grid.dim();
    let lo = grid.origin.clone();
    let hi: Vec<f64> = (0..d)
        .map(|a| {
            let extent = if grid.periodic {
                grid.counts[a] as f64
            } else {
                (grid.counts[a] - 1) as f64
            };
            grid.origin[a] + extent * grid.spacing[a]
        })
        .collect();
    (lo, hi)
}

/// Histogram comparison between an ensemble and its reference Gibbs measure.
#[derive(Clone, Debug, Serialize)]
pub struct DensityComparison {
    /// Final bins per position axis (after any automatic coarsening).
    pub position_bins: usize,
    /// Final bins per velocity axis.
    pub velocity_bins: usize,
    /// True when empty Gibbs bins forced coarser bins than requested.
    pub coarsened: bool,
    pub empirical: Vec<f64>,
    pub gibbs: Vec<f64>,
    /// `sum (emp - gibbs)^2 / gibbs`: squared relative-density statistic.
    pub l2: f64,
    /// `1/2 sum |emp - gibbs|`: total-variation distance of the histograms.
    pub tv: f64,
}

/// Bin an ensemble and the Gibbs reference over a shared phase-space grid of
/// `position_bins` per position axis times `velocity_bins` per velocity
/// axis. Requested bins with zero Gibbs mass trigger automatic coarsening
/// (halving both bin counts), reported in the result.
pub fn compare_empirical(
    states: &[PhaseState],
    measure: &GibbsMeasure,
    position_bins: usize,
    velocity_bins: usize,
) -> Result<DensityComparison> {
    if position_bins == 0 || velocity_bins == 0 {
        return Err(Error::invalid("bin counts must be >= 1"));
    }
    let d = measure.dim();
    if states.iter().any(|z| z.dim() != d) {
        return Err(Error::invalid("ensemble dimension does not match the measure"));
    }
    let (mut pb, mut vb) = (position_bins, velocity_bins);
    loop {
        let total_bins = pb.pow(d as u32) * vb.pow(d as u32);
        if states.len() < 10 * total_bins {
            if pb == 1 && vb == 1 {
                return Err(Error::invalid("ensemble too small to compare"));
            }
            pb = (pb / 2).max(1);
            vb = (vb / 2).max(1);
            continue;
        }
        let gibbs = gibbs_histogram(measure, pb, vb);
        if gibbs.iter().all(|g| *g > 0.0) {
            let empirical = empirical_histogram(states, measure, pb, vb);
            let l2 = empirical
                .iter()
                .zip(&gibbs)
                .map(|(e, g)| (e - g) * (e - g) / g)
                .sum();
            let tv = 0.5
                * empirical
                    .iter()
                    .zip(&gibbs)
                    .map(|(e, g)| (e - g).abs())
                    .sum::<f64>();
            return Ok(DensityComparison {
                position_bins: pb,
                velocity_bins: vb,
                coarsened: pb != position_bins || vb != velocity_bins,
                empirical,
                gibbs,
                l2,
                tv,
            });
        }
        if pb == 1 && vb == 1 {
            return Err(Error::Landscape(
                "Gibbs reference mass vanished on the whole cell".into(),
            ));
        }
        pb = (pb / 2).max(1);
        vb = (vb / 2).max(1);
    }
}

/// Velocity binning range per axis.
fn velocity_range(measure: &GibbsMeasure) -> (f64, f64) {
    match measure.velocity {
        VelocityFactor::None => (-1.0, 1.0),
        VelocityFactor::Gaussian => {
            let span = GAUSSIAN_BIN_SPAN / measure.beta.sqrt();
            (-span, span)
        }
        VelocityFactor::Surrogate(vp) => (-vp.half_width(), vp.half_width()),
    }
}

/// Gibbs mass per velocity bin along one axis. Outer bins absorb any mass
/// beyond the binning range, so the masses always sum to one.
fn velocity_bin_masses(measure: &GibbsMeasure, vb: usize) -> Vec<f64> {
    let (lo, hi) = velocity_range(measure);
    let width = (hi - lo) / vb as f64;
    match measure.velocity {
        VelocityFactor::None => {
            // Point mass at zero velocity.
            let mut masses = vec![0.0; vb];
            let idx = (((0.0 - lo) / width) as usize).min(vb - 1);
            masses[idx] = 1.0;
            masses
        }
        VelocityFactor::Gaussian => {
            let sqrt_beta = measure.beta.sqrt();
            let cdf = |v: f64| 0.5 * (1.0 + libm::erf(v * sqrt_beta / std::f64::consts::SQRT_2));
            (0..vb)
                .map(|j| {
                    let a = if j == 0 { f64::NEG_INFINITY } else { lo + j as f64 * width };
                    let b = if j == vb - 1 {
                        f64::INFINITY
                    } else {
                        lo + (j + 1) as f64 * width
                    };
                    let ca = if a.is_finite() { cdf(a) } else { 0.0 };
                    let cb = if b.is_finite() { cdf(b) } else { 1.0 };
                    cb - ca
                })
                .collect()
        }
        VelocityFactor::Surrogate(_) => {
            let axis = measure.velocity_axis.as_ref().expect("surrogate table built in new");
            let mut masses = vec![0.0; vb];
            for (s, m) in axis.nodes.iter().zip(&axis.masses) {
                let j = (((s - lo) / width) as usize).min(vb - 1);
                masses[j] += m;
            }
            masses
        }
    }
}

/// Joint Gibbs mass per phase-space bin: the product of the position-bin
/// mass and the per-axis velocity-bin masses (independent factors).
fn gibbs_histogram(measure: &GibbsMeasure, pb: usize, vb: usize) -> Vec<f64> {
    let grid = measure.grid;
    let d = measure.dim();
    let (lo, hi) = position_cell(grid);
    let mut position = vec![0.0; pb.pow(d as u32)];
    for (flat, mass) in measure.position_masses.iter().enumerate() {
        let coords = grid.coords(flat);
        let mut bin = 0usize;
        for a in 0..d {
            let width = (hi[a] - lo[a]) / pb as f64;
            let j = (((coords[a] - lo[a]) / width) as usize).min(pb - 1);
            bin = bin * pb + j;
        }
        position[bin] += mass;
    }
    let vel_axis = velocity_bin_masses(measure, vb);
    let mut velocity = vec![1.0];
    for _ in 0..d {
        let mut next = Vec::with_capacity(velocity.len() * vb);
        for v in &velocity {
            for m in &vel_axis {
                next.push(v * m);
            }
        }
        velocity = next;
    }
    let mut joint = Vec::with_capacity(position.len() * velocity.len());
    for p in &position {
        for v in &velocity {
            joint.push(p * v);
        }
    }
    joint
}

fn empirical_histogram(
    states: &[PhaseState],
    measure: &GibbsMeasure,
    pb: usize,
    vb: usize,
) -> Vec<f64> {
    let grid = measure.grid;
    let d = measure.dim();
    let (plo, phi) = position_cell(grid);
    let (vlo, vhi) = velocity_range(measure);
    let vwidth = (vhi - vlo) / vb as f64;
    let mut counts = vec![0.0; pb.pow(d as u32) * vb.pow(d as u32)];
    let weight = 1.0 / states.len() as f64;
    for z in states {
        let mut pbin = 0usize;
        for a in 0..d {
            let span = phi[a] - plo[a];
            let mut xa = z.x[a];
            if grid.periodic {
                xa = plo[a] + (xa - plo[a]).rem_euclid(span);
            }
            let width = span / pb as f64;
            let j = (((xa - plo[a]) / width).floor().max(0.0) as usize).min(pb - 1);
            pbin = pbin * pb + j;
        }
        let mut vbin = 0usize;
        for a in 0..d {
            let j = (((z.y[a] - vlo) / vwidth).floor().max(0.0) as usize).min(vb - 1);
            vbin = vbin * vb + j;
        }
        counts[pbin * vb.pow(d as u32) + vbin] += weight;
    }
    counts
}

/// Spectral gap of the overdamped position dynamics `Lf = f'' - beta U' f'`
/// on a 1D periodic landscape: the generator is discretized with
/// detailed-balance conductances `sqrt(mu_i mu_j) / h^2` on edges, giving a
/// symmetric eigenproblem whose smallest nonzero eigenvalue is returned.
pub fn spectral_gap_position(grid: &GridLandscape, beta: f64) -> Result<f64> {
    if grid.dim() != 1 || !grid.periodic {
        return Err(Error::invalid(
            "spectral gap estimation supports only 1D periodic landscapes",
        ));
    }
    let n = grid.counts[0];
    if n < 64 {
        return Err(Error::invalid("spectral gap needs at least 64 grid nodes"));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid("beta must be finite and >= 0"));
    }
    let h2 = grid.spacing[0] * grid.spacing[0];
    // Similarity-transformed generator: off-diagonal entries are exactly
    // 1/h^2 (symmetric by construction), the diagonal carries the Boltzmann
    // ratios of the neighbors.
    let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let prev = (i + n - 1) % n;
        let next = (i + 1) % n;
        a[(i, prev)] = 1.0 / h2;
        a[(i, next)] = 1.0 / h2;
        let ratio = |j: usize| (-beta * (grid.values[j] - grid.values[i]) / 2.0).exp();
        a[(i, i)] = -(ratio(prev) + ratio(next)) / h2;
    }
    debug_assert_eq!(a, a.transpose());
    let mut eigs: Vec<f64> = nalgebra::SymmetricEigen::new(-a)
        .eigenvalues
        .iter()
        .cloned()
        .collect();
    eigs.sort_by(f64::total_cmp);
    // eigs[0] is the zero mode (stationarity); the gap is the next one.
    Ok(eigs[1])
}

/// Spectral gaps for several temperatures, computed in parallel.
pub fn spectral_gap_sweep(grid: &GridLandscape, betas: &[f64]) -> Result<Vec<f64>> {
    betas
        .par_iter()
        .map(|b| spectral_gap_position(grid, *b))
        .collect()
}

/// Least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("slope fit needs at least two paired points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("slope fit needs distinct x values"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

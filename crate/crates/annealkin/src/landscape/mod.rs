//! Potential landscapes and their discretizations.
//!
//! A [`PotentialSpec`] bundles an analytic potential family with the metadata
//! the rest of the crate relies on: the located minima, the shift that makes
//! `min U = 0`, and (when known in closed form) the critical height. Grids
//! sampled from a spec feed the barrier analysis in [`crate::elevation`];
//! periodized potentials and velocity confinement potentials support the
//! torus and fully-compact process variants.

mod grid;
mod periodize;
mod velocity;

pub use grid::GridLandscape;
pub use periodize::{periodize, periodize_with_min_half_width, PeriodizedPotential};
pub use velocity::{build_velocity_potential, VelocityPotential};

use crate::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// A point in phase space: position and velocity of equal dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PhaseState {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::invalid(format!(
                "position dimension {} != velocity dimension {}",
                x.len(),
                y.len()
            )));
        }
        Ok(PhaseState { x, y })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).all(|v| v.is_finite())
    }

    /// Kinetic part |y|^2 / 2.
    pub fn kinetic(&self) -> f64 {
        0.5 * self.y.iter().map(|v| v * v).sum::<f64>()
    }
}

/// Analytic potential families.
///
/// All families are normalized at construction so the global minimum value is
/// exactly zero; the applied shift is recorded on the [`PotentialSpec`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum PotentialFamily {
    /// `omega2 * |x|^2 / 2`, any dimension.
    Quadratic { omega2: f64 },
    /// `height * (x^2 - 1)^2 + tilt * (x + 1)`, one-dimensional.
    DoubleWell1D { height: f64, tilt: f64 },
    /// Polynomial with ascending-power coefficients, one-dimensional.
    MultiWellPolynomial { coeffs: Vec<f64> },
    /// `alpha * ln(1 + ln(1 + |x|^2))`: grows slower than any power, so the
    /// Gibbs measure is not normalizable at any temperature. Useful as the
    /// stress case for schedule experiments.
    SlowGrowth { alpha: f64 },
    /// Values interpolated multilinearly from a grid; derivatives by central
    /// finite differences.
    Tabulated { grid: GridLandscape },
}

/// A potential together with located minima and normalization metadata.
#[derive(Clone, Debug)]
pub struct PotentialSpec {
    family: PotentialFamily,
    dimension: usize,
    /// Subtracted from the raw family value so that `min U = 0`.
    shift: f64,
    /// Positions of the local minima (refined to gradient norm <= 1e-10).
    minima: Vec<Vec<f64>>,
    /// Critical height in closed form where the family admits one.
    known_c_star: Option<f64>,
}

impl PotentialSpec {
    pub fn new(family: PotentialFamily, dimension: usize) -> Result<Self> {
        validate_family(&family, dimension)?;
        let (minima, shift, known_c_star) = analyze_family(&family, dimension)?;
        Ok(PotentialSpec {
            family,
            dimension,
            shift,
            minima,
            known_c_star,
        })
    }

    pub fn family(&self) -> &PotentialFamily {
        &self.family
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Local minima found at construction, sorted by position.
    pub fn minima(&self) -> &[Vec<f64>] {
        &self.minima
    }

    /// The minimizer with the smallest potential value.
    pub fn global_minimum(&self) -> &[f64] {
        let mut best = 0;
        let mut best_val = f64::INFINITY;
        for (i, m) in self.minima.iter().enumerate() {
            let v = self.eval(m);
            if v < best_val {
                best_val = v;
                best = i;
            }
        }
        &self.minima[best]
    }

    pub fn known_c_star(&self) -> Option<f64> {
        self.known_c_star
    }

    /// Potential value, normalized so the global minimum is 0.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dimension);
        raw_eval(&self.family, x) - self.shift
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dimension);
        match &self.family {
            PotentialFamily::Quadratic { omega2 } => x.iter().map(|&xi| omega2 * xi).collect(),
            PotentialFamily::DoubleWell1D { height, tilt } => {
                let x = x[0];
                vec![4.0 * height * x * (x * x - 1.0) + tilt]
            }
            PotentialFamily::MultiWellPolynomial { coeffs } => {
                vec![poly_eval(&poly_derivative(coeffs), x[0])]
            }
            PotentialFamily::SlowGrowth { alpha } => {
                let s: f64 = x.iter().map(|v| v * v).sum();
                let gp = alpha / ((1.0 + (1.0 + s).ln()) * (1.0 + s));
                x.iter().map(|&xi| 2.0 * gp * xi).collect()
            }
            PotentialFamily::Tabulated { grid } => fd_grad(grid, x),
        }
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        debug_assert_eq!(x.len(), self.dimension);
        let d = self.dimension;
        match &self.family {
            PotentialFamily::Quadratic { omega2 } => DMatrix::identity(d, d) * *omega2,
            PotentialFamily::DoubleWell1D { height, .. } => {
                let x = x[0];
                DMatrix::from_element(1, 1, 4.0 * height * (3.0 * x * x - 1.0))
            }
            PotentialFamily::MultiWellPolynomial { coeffs } => {
                let d2 = poly_derivative(&poly_derivative(coeffs));
                DMatrix::from_element(1, 1, poly_eval(&d2, x[0]))
            }
            PotentialFamily::SlowGrowth { alpha } => {
                let s: f64 = x.iter().map(|v| v * v).sum();
                let l = (1.0 + s).ln();
                let gp = alpha / ((1.0 + l) * (1.0 + s));
                let gpp = -alpha * (2.0 + l) / ((1.0 + l) * (1.0 + l) * (1.0 + s) * (1.0 + s));
                let mut h = DMatrix::identity(d, d) * (2.0 * gp);
                for i in 0..d {
                    for j in 0..d {
                        h[(i, j)] += 4.0 * gpp * x[i] * x[j];
                    }
                }
                h
            }
            PotentialFamily::Tabulated { grid } => fd_hessian(grid, x),
        }
    }

    /// Total energy `U(x) + |y|^2 / 2`.
    pub fn hamiltonian(&self, z: &PhaseState) -> f64 {
        self.eval(&z.x) + z.kinetic()
    }

    /// Sample onto a rectangular grid and normalize so the grid minimum is 0.
    /// The subtracted offset is recorded on the grid.
    pub fn sample_grid(&self, bounds: &[(f64, f64)], counts: &[usize]) -> Result<GridLandscape> {
        if bounds.len() != self.dimension || counts.len() != self.dimension {
            return Err(Error::invalid(format!(
                "bounds/counts dimension mismatch: potential is {}-dimensional",
                self.dimension
            )));
        }
        for (lo, hi) in bounds {
            if !(hi > lo) {
                return Err(Error::invalid("grid bounds must satisfy hi > lo"));
            }
        }
        if counts.iter().any(|&c| c < 2) {
            return Err(Error::invalid("grids need at least 2 nodes per axis"));
        }
        let origin: Vec<f64> = bounds.iter().map(|b| b.0).collect();
        let spacing: Vec<f64> = bounds
            .iter()
            .zip(counts)
            .map(|(b, &c)| (b.1 - b.0) / (c - 1) as f64)
            .collect();
        let mut grid = GridLandscape::from_fn(origin, spacing, counts.to_vec(), false, |x| {
            self.eval(x)
        })?;
        grid.normalize();
        Ok(grid)
    }
}

fn validate_family(family: &PotentialFamily, dimension: usize) -> Result<()> {
    if dimension == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    match family {
        PotentialFamily::Quadratic { omega2 } => {
            if !(*omega2 > 0.0) {
                return Err(Error::invalid("Quadratic needs omega2 > 0"));
            }
        }
        PotentialFamily::DoubleWell1D { height, tilt } => {
            if dimension != 1 {
                return Err(Error::invalid("DoubleWell1D is one-dimensional"));
            }
            if !(*height > 0.0) || !tilt.is_finite() {
                return Err(Error::invalid("DoubleWell1D needs height > 0 and finite tilt"));
            }
        }
        PotentialFamily::MultiWellPolynomial { coeffs } => {
            if dimension != 1 {
                return Err(Error::invalid("MultiWellPolynomial is one-dimensional"));
            }
            let degree = coeffs.len().saturating_sub(1);
            let leading = coeffs.last().copied().unwrap_or(0.0);
            if degree < 2 || degree % 2 != 0 || !(leading > 0.0) {
                return Err(Error::invalid(
                    "MultiWellPolynomial needs even degree >= 2 with positive leading coefficient",
                ));
            }
        }
        PotentialFamily::SlowGrowth { alpha } => {
            if !(*alpha > 0.0) {
                return Err(Error::invalid("SlowGrowth needs alpha > 0"));
            }
        }
        PotentialFamily::Tabulated { grid } => {
            if grid.dim() != dimension {
                return Err(Error::invalid(format!(
                    "tabulated grid is {}-dimensional, spec says {}",
                    grid.dim(),
                    dimension
                )));
            }
        }
    }
    Ok(())
}

fn raw_eval(family: &PotentialFamily, x: &[f64]) -> f64 {
    match family {
        PotentialFamily::Quadratic { omega2 } => {
            0.5 * omega2 * x.iter().map(|v| v * v).sum::<f64>()
        }
        PotentialFamily::DoubleWell1D { height, tilt } => {
            let x = x[0];
            let q = x * x - 1.0;
            height * q * q + tilt * (x + 1.0)
        }
        PotentialFamily::MultiWellPolynomial { coeffs } => poly_eval(coeffs, x[0]),
        PotentialFamily::SlowGrowth { alpha } => {
            let s: f64 = x.iter().map(|v| v * v).sum();
            alpha * (1.0 + (1.0 + s).ln()).ln()
        }
        PotentialFamily::Tabulated { grid } => grid.interpolate(x),
    }
}

/// Locate minima, the normalizing shift, and (for 1D families) the exact
/// critical height from the interior maxima between consecutive minima.
fn analyze_family(
    family: &PotentialFamily,
    dimension: usize,
) -> Result<(Vec<Vec<f64>>, f64, Option<f64>)> {
    match family {
        PotentialFamily::Quadratic { .. } | PotentialFamily::SlowGrowth { .. } => {
            Ok((vec![vec![0.0; dimension]], 0.0, Some(0.0)))
        }
        PotentialFamily::DoubleWell1D { height, tilt } => {
            // Critical points of 4h x (x^2-1) + s all lie inside |x| <= 1 + |s/h|.
            let r = 1.5 + (tilt / height).abs();
            analyze_1d(family, -r, r)
        }
        PotentialFamily::MultiWellPolynomial { coeffs } => {
            let dp = poly_derivative(coeffs);
            let lead = *dp.last().expect("degree >= 2");
            // Cauchy bound on the roots of U'.
            let r = 1.0 + dp[..dp.len() - 1]
                .iter()
                .map(|c| (c / lead).abs())
                .fold(0.0, f64::max);
            analyze_1d(family, -r, r)
        }
        PotentialFamily::Tabulated { grid } => {
            let mut best = f64::INFINITY;
            let mut arg = 0;
            for (i, &v) in grid.values.iter().enumerate() {
                if v < best {
                    best = v;
                    arg = i;
                }
            }
            Ok((vec![grid.coords(arg)], best, None))
        }
    }
}

/// Scan + Newton-refine the critical points of a 1D family.
fn analyze_1d(
    family: &PotentialFamily,
    lo: f64,
    hi: f64,
) -> Result<(Vec<Vec<f64>>, f64, Option<f64>)> {
    let deriv = |x: f64| match family {
        PotentialFamily::DoubleWell1D { height, tilt } => 4.0 * height * x * (x * x - 1.0) + tilt,
        PotentialFamily::MultiWellPolynomial { coeffs } => poly_eval(&poly_derivative(coeffs), x),
        _ => unreachable!(),
    };
    let second = |x: f64| match family {
        PotentialFamily::DoubleWell1D { height, .. } => 4.0 * height * (3.0 * x * x - 1.0),
        PotentialFamily::MultiWellPolynomial { coeffs } => {
            poly_eval(&poly_derivative(&poly_derivative(coeffs)), x)
        }
        _ => unreachable!(),
    };
    let value = |x: f64| raw_eval(family, &[x]);

    const N: usize = 8192;
    let step = (hi - lo) / N as f64;
    let mut crits: Vec<f64> = Vec::new();
    let mut prev_x = lo;
    let mut prev_d = deriv(lo);
    for i in 1..=N {
        let x = lo + i as f64 * step;
        let d = deriv(x);
        if prev_d == 0.0 {
            crits.push(prev_x);
        } else if prev_d * d < 0.0 {
            // Bisection bracket, then Newton polish.
            let (mut a, mut b) = (prev_x, x);
            for _ in 0..60 {
                let mid = 0.5 * (a + b);
                if deriv(a) * deriv(mid) <= 0.0 {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            let mut root = 0.5 * (a + b);
            for _ in 0..8 {
                let d2 = second(root);
                if d2.abs() > 1e-12 {
                    root -= deriv(root) / d2;
                }
            }
            crits.push(root);
        }
        prev_x = x;
        prev_d = d;
    }
    crits.dedup_by(|a, b| (*a - *b).abs() < 1e-7);

    let minima: Vec<f64> = crits
        .iter()
        .copied()
        .filter(|&x| second(x) > 0.0)
        .collect();
    if minima.is_empty() {
        return Err(Error::Landscape(
            "no local minimum found in the scanned range".into(),
        ));
    }
    let shift = minima.iter().map(|&x| value(x)).fold(f64::INFINITY, f64::min);

    // Exact 1D critical height: the lowest crossing between minima x_i < x_j is
    // the running max of the interior maxima, so the pairwise barrier is
    // max(U) - U(x_i) - U(x_j) and c* is the best pair.
    let mut c_star: f64 = 0.0;
    for i in 0..minima.len() {
        for j in (i + 1)..minima.len() {
            let peak = crits
                .iter()
                .copied()
                .filter(|&x| x > minima[i] && x < minima[j] && second(x) < 0.0)
                .map(value)
                .fold(f64::NEG_INFINITY, f64::max);
            if peak.is_finite() {
                let c = (peak - shift) - (value(minima[i]) - shift) - (value(minima[j]) - shift);
                c_star = c_star.max(c);
            }
        }
    }
    Ok((minima.into_iter().map(|x| vec![x]).collect(), shift, Some(c_star)))
}

pub(crate) fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub(crate) fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    if coeffs.len() <= 1 {
        return vec![0.0];
    }
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| i as f64 * c)
        .collect()
}

const FD_BASE_STEP: f64 = 1e-5;

fn fd_step(x: f64) -> f64 {
    FD_BASE_STEP * x.abs().max(1.0)
}

fn fd_grad(grid: &GridLandscape, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for a in 0..x.len() {
        let h = fd_step(x[a]);
        xp[a] = x[a] + h;
        let up = grid.interpolate(&xp);
        xp[a] = x[a] - h;
        let um = grid.interpolate(&xp);
        xp[a] = x[a];
        g[a] = (up - um) / (2.0 * h);
    }
    g
}

fn fd_hessian(grid: &GridLandscape, x: &[f64]) -> DMatrix<f64> {
    let d = x.len();
    let mut hmat = DMatrix::zeros(d, d);
    let u0 = grid.interpolate(x);
    let mut xp = x.to_vec();
    for a in 0..d {
        let ha = fd_step(x[a]);
        xp[a] = x[a] + ha;
        let up = grid.interpolate(&xp);
        xp[a] = x[a] - ha;
        let um = grid.interpolate(&xp);
        xp[a] = x[a];
        hmat[(a, a)] = (up - 2.0 * u0 + um) / (ha * ha);
        for b in (a + 1)..d {
            let hb = fd_step(x[b]);
            let mut f = |sa: f64, sb: f64| {
                xp[a] = x[a] + sa * ha;
                xp[b] = x[b] + sb * hb;
                let v = grid.interpolate(&xp);
                xp[a] = x[a];
                xp[b] = x[b];
                v
            };
            let v = (f(1.0, 1.0) - f(1.0, -1.0) - f(-1.0, 1.0) + f(-1.0, -1.0))
                / (4.0 * ha * hb);
            hmat[(a, b)] = v;
            hmat[(b, a)] = v;
        }
    }
    hmat
}

//! Lyapunov certificates for the linearized dynamics.
//!
//! Around a non-degenerate minimum the drift of the kinetic process has the
//! block Jacobian `J(z) = (0, I; -hess U(x), -gamma I)`. When `J` at the
//! minimum is Hurwitz, solving the continuous Lyapunov equation
//! `M J + J^T M = -I` yields a metric `M` and a rate `r` in which the
//! linear flow contracts; sampling `J` on small `M`-spheres then estimates
//! how far from the minimum the contraction survives. The envelope check
//! classifies trajectories by whether they stay inside the shrinking
//! neighborhood `min(delta, sqrt(eps_t))` of the minimum.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::integrator::Trajectory;
use crate::landscape::{PhaseState, PotentialSpec};
use crate::{Error, Result};

/// Fixed stream for the sample-based checks, so results are reproducible.
const SAMPLING_SEED: u64 = 0x4c59_4150;
/// Unit vectors drawn when verifying the certificate inequality.
const CERTIFICATE_CHECK_VECTORS: usize = 10_000;
/// Sphere states and directions per contraction-radius candidate.
const RADIUS_STATES: usize = 512;
const RADIUS_DIRECTIONS: usize = 128;

/// Quadratic-form certificate of local contraction: a positive definite
/// metric `M` and a rate `r` with `u . M J0 u <= -2 r u . M u` for all `u`.
#[derive(Clone, Debug, Serialize)]
pub struct LyapunovCertificate {
    /// Symmetric positive definite metric, size 2d x 2d.
    pub m: DMatrix<f64>,
    /// Contraction rate.
    pub r: f64,
    /// Spectral norm of `M J0 + J0^T M + I` (how well the solve closed).
    pub residual: f64,
}

impl LyapunovCertificate {
    /// `sqrt(z . M z)`.
    pub fn norm(&self, z: &[f64]) -> f64 {
        let v = DVector::from_column_slice(z);
        (&self.m * &v).dot(&v).sqrt()
    }
}

/// Drift Jacobian of the kinetic dynamics at phase point `z`:
/// `(0, I; -hess U(x), -gamma I)`.
pub fn jacobian(spec: &PotentialSpec, gamma: f64, z: &PhaseState) -> Result<DMatrix<f64>> {
    if gamma <= 0.0 || !gamma.is_finite() {
        return Err(Error::invalid("gamma must be finite and > 0"));
    }
    if z.dim() != spec.dimension() {
        return Err(Error::invalid(format!(
            "state dimension {} does not match the potential's {}",
            z.dim(),
            spec.dimension()
        )));
    }
    let d = spec.dimension();
    let hess = spec.hessian(&z.x);
    let mut j = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        j[(i, d + i)] = 1.0;
        j[(d + i, d + i)] = -gamma;
        for k in 0..d {
            j[(d + i, k)] = -hess[(i, k)];
        }
    }
    Ok(j)
}

/// Largest real part among the eigenvalues of a square matrix.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Solve the continuous Lyapunov equation `M A + A^T M = -Q` for symmetric
/// `M` by vectorizing to a dense linear system.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(Error::invalid("Lyapunov solve needs square matrices of equal size"));
    }
    // vec(M A) = (A^T kron I) vec(M), vec(A^T M) = (I kron A^T) vec(M).
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let system = at.kronecker(&eye) + eye.kronecker(&at);
    let rhs = DVector::from_column_slice((-q).as_slice());
    let sol = nalgebra::LU::new(system)
        .solve(&rhs)
        .ok_or_else(|| Error::Certificate("Lyapunov system is singular".into()))?;
    let m = DMatrix::from_column_slice(n, n, sol.as_slice());
    // The exact solution is symmetric; remove roundoff asymmetry.
    Ok((&m + m.transpose()) * 0.5)
}

/// Build the contraction certificate for a Hurwitz drift Jacobian: solve
/// `M J0 + J0^T M = -I`, set `r = 1 / (4 lambda_max(M))`, and verify the
/// defining inequality on random unit vectors.
pub fn lyapunov_certificate(j0: &DMatrix<f64>) -> Result<LyapunovCertificate> {
    let n = j0.nrows();
    if j0.ncols() != n || n == 0 {
        return Err(Error::invalid("Jacobian must be square and non-empty"));
    }
    // Hurwitz check first: every eigenvalue strictly in the left half-plane.
    for l in j0.complex_eigenvalues().iter() {
        if l.re >= 0.0 {
            return Err(Error::Certificate(format!(
                "drift Jacobian is not Hurwitz: eigenvalue {} + {}i has non-negative real part",
                l.re, l.im
            )));
        }
    }
    let m = solve_lyapunov(j0, &DMatrix::identity(n, n))?;
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let lambda_min = eig.eigenvalues.min();
    let lambda_max = eig.eigenvalues.max();
    if lambda_min <= 0.0 {
        return Err(Error::Certificate(format!(
            "Lyapunov metric is not positive definite (min eigenvalue {lambda_min})"
        )));
    }
    let r = 1.0 / (4.0 * lambda_max);
    let residual_matrix = &m * j0 + j0.transpose() * &m + DMatrix::identity(n, n);
    let residual = nalgebra::SymmetricEigen::new(residual_matrix)
        .eigenvalues
        .amax();

    // Verify u . M J0 u <= -2 r u . M u on random unit vectors.
    let mj = &m * j0;
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLING_SEED);
    for _ in 0..CERTIFICATE_CHECK_VECTORS {
        let u = random_unit_vector(n, &mut rng);
        let lhs = (&mj * &u).dot(&u);
        let rhs = -2.0 * r * (&m * &u).dot(&u);
        if rhs - lhs < -1e-9 {
            return Err(Error::Certificate(format!(
                "certificate inequality failed on a sampled direction: {lhs} > {rhs}"
            )));
        }
    }
    Ok(LyapunovCertificate { m, r, residual })
}

fn random_unit_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let v: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Largest sampled radius of an `M`-sphere around the global minimum on
/// which the certified contraction inequality `u . M J(z) u <= -r u . M u`
/// still holds. Sample-based estimate: each candidate radius is checked on
/// `RADIUS_STATES` sphere states times `RADIUS_DIRECTIONS` directions.
pub fn contraction_radius(
    spec: &PotentialSpec,
    gamma: f64,
    cert: &LyapunovCertificate,
    search_max: f64,
) -> Result<f64> {
    contraction_radius_sampled(spec, gamma, cert, search_max, RADIUS_STATES, RADIUS_DIRECTIONS)
}

/// As [`contraction_radius`] with explicit sampling density (for
/// cross-checking the estimate's stability).
pub fn contraction_radius_sampled(
    spec: &PotentialSpec,
    gamma: f64,
    cert: &LyapunovCertificate,
    search_max: f64,
    states: usize,
    directions: usize,
) -> Result<f64> {
    if !(search_max > 0.0 && search_max.is_finite()) {
        return Err(Error::invalid("search_max must be finite and > 0"));
    }
    if gamma <= 0.0 || !gamma.is_finite() {
        return Err(Error::invalid("gamma must be finite and > 0"));
    }
    let d = spec.dimension();
    if cert.m.nrows() != 2 * d {
        return Err(Error::invalid(format!(
            "certificate metric is {}x{} but the phase space has dimension {}",
            cert.m.nrows(),
            cert.m.ncols(),
            2 * d
        )));
    }
    let x_star = spec.global_minimum().to_vec();

    let accepts = |delta: f64| -> Result<bool> {
        // Identical sample set for every candidate, so acceptance is a
        // deterministic, monotone-friendly function of the radius.
        let mut rng = ChaCha8Rng::seed_from_u64(SAMPLING_SEED);
        let dirs: Vec<DVector<f64>> = (0..directions)
            .map(|_| random_unit_vector(2 * d, &mut rng))
            .collect();
        let bounds: Vec<f64> = dirs
            .iter()
            .map(|u| -cert.r * (&cert.m * u).dot(u))
            .collect();
        for _ in 0..states {
            let g = random_unit_vector(2 * d, &mut rng);
            let m_norm = (&cert.m * &g).dot(&g).sqrt();
            let offset = g * (delta / m_norm);
            let z = PhaseState::new(
                (0..d).map(|i| x_star[i] + offset[i]).collect(),
                (0..d).map(|i| offset[d + i]).collect(),
            )?;
            let mj = &cert.m * jacobian(spec, gamma, &z)?;
            for (u, bound) in dirs.iter().zip(&bounds) {
                if (&mj * u).dot(u) > *bound {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    };

    if accepts(search_max)? {
        return Ok(search_max);
    }
    let (mut lo, mut hi) = (0.0f64, search_max);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if accepts(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo <= 1e-6 {
        return Err(Error::Landscape(format!(
            "no contraction radius above 1e-6 within search_max {search_max}: \
             the landscape is degenerate at the minimum"
        )));
    }
    Ok(lo)
}

/// Whether a trajectory stayed inside the shrinking envelope
/// `|X_t - x_star| <= min(delta, sqrt(eps(t)))` at every recorded time.
/// Returns the verdict and the first recorded violation time, if any.
pub fn envelope_event(
    traj: &Trajectory,
    x_star: &[f64],
    delta: f64,
    epsilon: impl Fn(f64) -> f64,
) -> (bool, Option<f64>) {
    for (t, z) in traj.times.iter().zip(&traj.states) {
        let dist = z
            .x
            .iter()
            .zip(x_star)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let bound = delta.min(epsilon(*t).max(0.0).sqrt());
        if dist > bound {
            return (false, Some(*t));
        }
    }
    (true, None)
}

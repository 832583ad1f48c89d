//! Velocity confinement for the fully compact process.
//!
//! The velocity marginal must live on the same torus as the position. Two
//! ingredients: a kinetic-energy surrogate `W` that equals `|y|^2 / 2` on the
//! box where the dynamics actually needs velocities (so the process is
//! unchanged there) and flattens out to be `2L`-periodic, and a coupling field
//! `sigma(x)` that vanishes on the region the trajectories should stay in and
//! switches on near the plateau, satisfying `|grad sigma|^2 <= sigma` so the
//! extra drift never overwhelms the restoring force.

use crate::{Error, Result};

/// Periodic kinetic surrogate plus coupling field, on the torus of half-width
/// `L` shared with the periodized position potential.
#[derive(Clone, Debug)]
pub struct VelocityPotential {
    /// Energy cutoff of the periodized potential this pairs with.
    k: f64,
    /// Torus half-width (per axis).
    l: f64,
    /// Inner radius: the coupling field vanishes on the sup-norm ball of this
    /// radius, which contains every velocity reachable at energies below K.
    n: f64,
    /// Outer radius: the coupling field is maximal beyond it; `W` is exactly
    /// quadratic out to this radius.
    m: f64,
    /// Amplitude of the coupling field.
    r: f64,
}

/// Build the velocity-space data for cutoff `k` on a torus of half-width
/// `half_width`. `grad_sup` is the largest gradient magnitude of the
/// periodized position potential; it bounds the coupling amplitude.
pub fn build_velocity_potential(k: f64, half_width: f64, grad_sup: f64) -> Result<VelocityPotential> {
    if !(k > 0.0) {
        return Err(Error::invalid("velocity potential needs a cutoff K > 0"));
    }
    let n = (2.0 * k).sqrt() + 1.0;
    let m = n + 1.0;
    if half_width <= m {
        return Err(Error::Landscape(format!(
            "torus half-width {half_width} leaves no room for the velocity ramp \
             (needs more than {m}); periodize with a larger minimum half-width"
        )));
    }
    // Respect sigma >= |grad sigma|^2 (field shape gives infimum 1/12 of
    // shape/|grad shape|^2) and keep sigma * |grad U| below the quadratic
    // restoring drift (|grad shape| peaks at 3/2).
    let mut r = (1.0 / 12.0f64).min(1.0);
    if grad_sup > 0.0 {
        r = r.min(1.0 / (3.0 * grad_sup));
    }
    Ok(VelocityPotential { k, l: half_width, n, m, r })
}

impl VelocityPotential {
    pub fn cutoff(&self) -> f64 {
        self.k
    }

    pub fn half_width(&self) -> f64 {
        self.l
    }

    pub fn inner_radius(&self) -> f64 {
        self.n
    }

    pub fn outer_radius(&self) -> f64 {
        self.m
    }

    /// Supremum of the coupling field.
    pub fn sigma_star(&self) -> f64 {
        self.r
    }

    fn wrap(&self, s: f64) -> f64 {
        if (-self.l..self.l).contains(&s) {
            s
        } else {
            (s + self.l).rem_euclid(2.0 * self.l) - self.l
        }
    }

    /// One-dimensional kinetic surrogate: `s^2 / 2` for `|s| <= m`, then a
    /// ramp whose slope falls as a half-cosine from `m` to zero at the torus
    /// seam, extended even and `2L`-periodic.
    pub fn w1(&self, s: f64) -> f64 {
        let s = self.wrap(s).abs();
        if s <= self.m {
            return 0.5 * s * s;
        }
        let span = self.l - self.m;
        let w = (s - self.m) / span;
        0.5 * self.m * self.m
            + self.m * span * (0.5 * w + (std::f64::consts::PI * w).sin() / (2.0 * std::f64::consts::PI))
    }

    pub fn w1_prime(&self, s: f64) -> f64 {
        let wrapped = self.wrap(s);
        let a = wrapped.abs();
        if a <= self.m {
            return wrapped;
        }
        let w = (a - self.m) / (self.l - self.m);
        wrapped.signum() * self.m * 0.5 * (1.0 + (std::f64::consts::PI * w).cos())
    }

    /// `W(y) = sum_i W1(y_i)`.
    pub fn w(&self, y: &[f64]) -> f64 {
        y.iter().map(|&s| self.w1(s)).sum()
    }

    pub fn grad_w(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|&s| self.w1_prime(s)).collect()
    }

    fn shape(&self, x: &[f64]) -> (f64, f64, usize) {
        // Cubic switch in the sup-norm: 0 inside radius n, 1 outside radius
        // m. Returns (value, radial derivative, argmax axis).
        let mut rho = 0.0;
        let mut axis = 0;
        for (a, &xi) in x.iter().enumerate() {
            let w = self.wrap(xi).abs();
            if w > rho {
                rho = w;
                axis = a;
            }
        }
        let v = ((rho - self.n) / (self.m - self.n)).clamp(0.0, 1.0);
        let value = v * v * (3.0 - 2.0 * v);
        let slope = if v > 0.0 && v < 1.0 { 6.0 * v * (1.0 - v) / (self.m - self.n) } else { 0.0 };
        (value, slope, axis)
    }

    /// Coupling field at position `x` (on the torus).
    pub fn sigma(&self, x: &[f64]) -> f64 {
        self.r * self.shape(x).0
    }

    pub fn grad_sigma(&self, x: &[f64]) -> Vec<f64> {
        let (_, slope, axis) = self.shape(x);
        let mut g = vec![0.0; x.len()];
        if slope != 0.0 {
            g[axis] = self.r * slope * self.wrap(x[axis]).signum();
        }
        g
    }
}

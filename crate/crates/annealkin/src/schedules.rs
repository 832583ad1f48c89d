//! Cooling and friction schedules.
//!
//! The inverse temperature `beta_t` and the friction `gamma_t` drive the
//! annealing dynamics. The central family is the logarithmic cooling
//! `beta_t = ln(e^{c beta_0} + t) / c`, whose speed parameter `c` is compared
//! against a landscape's critical height to predict success or trapping;
//! faster-than-logarithmic schedules come with a decaying accuracy envelope
//! instead. Friction must stay above a floor `kappa`, vary no faster than
//! `1/(kappa (1+t))`, and remain below `L * beta_t`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Inverse-temperature schedule `t -> beta_t`.
///
/// `Constant` allows `beta = +infinity` as the zero-noise sentinel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoolingSchedule {
    /// `beta_t = ln(e^{c beta0} + t) / c`.
    Logarithmic { c: f64, beta0: f64 },
    /// `beta_t = beta0 (1 + t)^p`, cooling faster than any logarithm.
    Power { beta0: f64, p: f64 },
    Constant { beta: f64 },
    /// Piecewise-linear interpolation of `(t, beta)` knots, clamped outside.
    PiecewiseTable { knots: Vec<(f64, f64)> },
}

impl CoolingSchedule {
    pub fn logarithmic(c: f64, beta0: f64) -> Result<Self> {
        let s = CoolingSchedule::Logarithmic { c, beta0 };
        s.validate()?;
        Ok(s)
    }

    pub fn power(beta0: f64, p: f64) -> Result<Self> {
        let s = CoolingSchedule::Power { beta0, p };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(beta: f64) -> Result<Self> {
        let s = CoolingSchedule::Constant { beta };
        s.validate()?;
        Ok(s)
    }

    pub fn piecewise(knots: Vec<(f64, f64)>) -> Result<Self> {
        let s = CoolingSchedule::PiecewiseTable { knots };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CoolingSchedule::Logarithmic { c, beta0 } => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(Error::invalid("logarithmic cooling needs finite c > 0"));
                }
                if !(beta0.is_finite() && *beta0 > 0.0) {
                    return Err(Error::invalid("logarithmic cooling needs finite beta0 > 0"));
                }
            }
            CoolingSchedule::Power { beta0, p } => {
                if !(beta0.is_finite() && *beta0 > 0.0) || !(p.is_finite() && *p > 0.0) {
                    return Err(Error::invalid("power cooling needs beta0 > 0 and p > 0"));
                }
            }
            CoolingSchedule::Constant { beta } => {
                // +infinity is the zero-noise sentinel and is allowed.
                if !(*beta > 0.0) {
                    return Err(Error::invalid("constant cooling needs beta > 0"));
                }
            }
            CoolingSchedule::PiecewiseTable { knots } => {
                if knots.is_empty() {
                    return Err(Error::invalid("piecewise cooling needs at least one knot"));
                }
                for w in knots.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return Err(Error::invalid("piecewise knots need increasing times"));
                    }
                }
                if knots.iter().any(|&(t, b)| t < 0.0 || !(b > 0.0) || !b.is_finite()) {
                    return Err(Error::invalid(
                        "piecewise knots need t >= 0 and finite beta > 0",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Inverse temperature at time `t >= 0`. May be `+infinity` (zero noise).
    pub fn beta_at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("schedule time must be >= 0, got {t}")));
        }
        Ok(match self {
            // Stable form of ln(e^{c beta0} + t)/c: never materializes the
            // exponential, so large c*beta0 cannot overflow.
            CoolingSchedule::Logarithmic { c, beta0 } => {
                beta0 + (t * (-c * beta0).exp()).ln_1p() / c
            }
            CoolingSchedule::Power { beta0, p } => beta0 * (1.0 + t).powf(*p),
            CoolingSchedule::Constant { beta } => *beta,
            CoolingSchedule::PiecewiseTable { knots } => interp_table(knots, t).0,
        })
    }

    /// Time derivative of `beta` at `t >= 0`.
    pub fn beta_prime(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("schedule time must be >= 0, got {t}")));
        }
        Ok(match self {
            // 1 / (c (e^{c beta0} + t)), written overflow-free.
            CoolingSchedule::Logarithmic { c, beta0 } => {
                let em = (-c * beta0).exp();
                em / (c * (1.0 + t * em))
            }
            CoolingSchedule::Power { beta0, p } => beta0 * p * (1.0 + t).powf(p - 1.0),
            CoolingSchedule::Constant { .. } => 0.0,
            CoolingSchedule::PiecewiseTable { knots } => interp_table(knots, t).1,
        })
    }
}

/// Linear interpolation in a knot table; returns (value, slope). Clamped to
/// the end values outside the knot range (slope 0 there).
fn interp_table(knots: &[(f64, f64)], t: f64) -> (f64, f64) {
    if t <= knots[0].0 {
        return (knots[0].1, 0.0);
    }
    if t >= knots[knots.len() - 1].0 {
        return (knots[knots.len() - 1].1, 0.0);
    }
    let i = knots.partition_point(|&(kt, _)| kt <= t) - 1;
    let (t0, b0) = knots[i];
    let (t1, b1) = knots[i + 1];
    let slope = (b1 - b0) / (t1 - t0);
    (b0 + slope * (t - t0), slope)
}

/// Friction schedule `t -> gamma_t` with its declared constraint constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrictionSchedule {
    #[serde(flatten)]
    pub kind: FrictionKind,
    /// Declared friction floor: the schedule promises `gamma_t >= kappa` and
    /// `gamma'_t <= 1/(kappa (1+t))`.
    pub kappa: f64,
    /// Declared coupling bound: `gamma_t <= l * beta_t`.
    pub l: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrictionKind {
    Constant { gamma: f64 },
    /// `gamma_t = beta_t` of the paired cooling schedule.
    EqualsBeta,
    Table { knots: Vec<(f64, f64)> },
}

impl FrictionSchedule {
    pub fn new(kind: FrictionKind, kappa: f64, l: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) || !(l.is_finite() && l > 0.0) {
            return Err(Error::invalid("friction needs finite kappa > 0 and L > 0"));
        }
        if let FrictionKind::Constant { gamma } = kind {
            if !(gamma.is_finite() && gamma > 0.0) {
                return Err(Error::invalid("constant friction needs finite gamma > 0"));
            }
        }
        if let FrictionKind::Table { knots } = &kind {
            if knots.is_empty() {
                return Err(Error::invalid("friction table needs at least one knot"));
            }
            for w in knots.windows(2) {
                if !(w[1].0 > w[0].0) {
                    return Err(Error::invalid("friction knots need increasing times"));
                }
            }
            if knots.iter().any(|&(t, g)| t < 0.0 || !(g > 0.0) || !g.is_finite()) {
                return Err(Error::invalid("friction knots need t >= 0 and finite gamma > 0"));
            }
        }
        Ok(FrictionSchedule { kind, kappa, l })
    }

    pub fn gamma_at(&self, cooling: &CoolingSchedule, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("schedule time must be >= 0, got {t}")));
        }
        Ok(match &self.kind {
            FrictionKind::Constant { gamma } => *gamma,
            FrictionKind::EqualsBeta => cooling.beta_at(t)?,
            FrictionKind::Table { knots } => interp_table(knots, t).0,
        })
    }

    pub fn gamma_prime_at(&self, cooling: &CoolingSchedule, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("schedule time must be >= 0, got {t}")));
        }
        Ok(match &self.kind {
            FrictionKind::Constant { .. } => 0.0,
            FrictionKind::EqualsBeta => cooling.beta_prime(t)?,
            FrictionKind::Table { knots } => interp_table(knots, t).1,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FrictionConstraint {
    /// `gamma_t >= kappa` failed.
    Floor,
    /// `gamma'_t <= 1/(kappa (1+t))` failed.
    Variation,
    /// `gamma_t <= l * beta_t` failed.
    Coupling,
}

#[derive(Clone, Debug, Serialize)]
pub struct FrictionViolation {
    pub t: f64,
    pub constraint: FrictionConstraint,
    pub observed: f64,
    pub bound: f64,
}

/// Result of checking a friction schedule against a cooling schedule.
#[derive(Clone, Debug, Serialize)]
pub struct FrictionReport {
    /// Largest floor consistent with the sampled schedule: the minimum of
    /// `gamma_t` and of `1/((1+t) gamma'_t)` over the grid.
    pub kappa_eff: f64,
    /// Smallest coupling constant consistent with the sampled schedule:
    /// the maximum of `gamma_t / beta_t`.
    pub l_eff: f64,
    /// Violations of the *declared* `kappa` and `l`, at sampled times.
    pub violations: Vec<FrictionViolation>,
}

impl FrictionReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check the three friction constraints on a log-spaced grid of 1000 sampled
/// times covering `[0, horizon]`.
pub fn validate_friction(
    friction: &FrictionSchedule,
    cooling: &CoolingSchedule,
    horizon: f64,
) -> Result<FrictionReport> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("validation horizon must be finite and > 0"));
    }
    const POINTS: usize = 1000;
    let mut times = Vec::with_capacity(POINTS);
    times.push(0.0);
    let lo = (horizon * 1e-9).max(1e-12);
    for i in 0..POINTS - 1 {
        times.push(lo * (horizon / lo).powf(i as f64 / (POINTS - 2) as f64));
    }

    let mut kappa_eff = f64::INFINITY;
    let mut l_eff: f64 = 0.0;
    let mut violations = Vec::new();
    for &t in &times {
        let gamma = friction.gamma_at(cooling, t)?;
        let gamma_prime = friction.gamma_prime_at(cooling, t)?;
        let beta = cooling.beta_at(t)?;

        kappa_eff = kappa_eff.min(gamma);
        if gamma_prime > 0.0 {
            kappa_eff = kappa_eff.min(1.0 / ((1.0 + t) * gamma_prime));
        }
        let ratio = if beta.is_finite() { gamma / beta } else { 0.0 };
        l_eff = l_eff.max(ratio);

        if gamma < friction.kappa {
            violations.push(FrictionViolation {
                t,
                constraint: FrictionConstraint::Floor,
                observed: gamma,
                bound: friction.kappa,
            });
        }
        let variation_bound = 1.0 / (friction.kappa * (1.0 + t));
        if gamma_prime > variation_bound {
            violations.push(FrictionViolation {
                t,
                constraint: FrictionConstraint::Variation,
                observed: gamma_prime,
                bound: variation_bound,
            });
        }
        let coupling_bound = if beta.is_finite() {
            friction.l * beta
        } else {
            f64::INFINITY
        };
        if gamma > coupling_bound {
            violations.push(FrictionViolation {
                t,
                constraint: FrictionConstraint::Coupling,
                observed: gamma,
                bound: coupling_bound,
            });
        }
    }
    Ok(FrictionReport {
        kappa_eff,
        l_eff,
        violations,
    })
}

/// Speed class of a cooling schedule relative to a critical height.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ScheduleClass {
    /// Logarithmic with `c > c*`: slow enough to escape every trap.
    SlowLog,
    /// Logarithmic with `c < c*`: trapping has positive probability.
    FastLog,
    /// Logarithmic with `c = c*` within tolerance: the borderline case.
    CriticalLog,
    /// `ln t = o(beta_t)`: cools faster than any logarithm; convergence to
    /// the Gibbs flow holds only up to a decaying accuracy envelope.
    SuperLogarithmic,
    Other,
}

const CLASSIFY_TOL: f64 = 1e-9;

pub fn classify(cooling: &CoolingSchedule, c_star: f64) -> Result<ScheduleClass> {
    if !(c_star >= 0.0 && c_star.is_finite()) {
        return Err(Error::invalid("classification needs finite c_star >= 0"));
    }
    Ok(match cooling {
        CoolingSchedule::Logarithmic { c, .. } => {
            if (c - c_star).abs() <= CLASSIFY_TOL {
                ScheduleClass::CriticalLog
            } else if *c > c_star {
                ScheduleClass::SlowLog
            } else {
                ScheduleClass::FastLog
            }
        }
        CoolingSchedule::Power { .. } => ScheduleClass::SuperLogarithmic,
        CoolingSchedule::Constant { .. } | CoolingSchedule::PiecewiseTable { .. } => {
            ScheduleClass::Other
        }
    })
}

/// Accuracy envelope for super-logarithmic cooling:
/// `amplitude * (e^{-rate t} + sup_{s >= t/2} ln+(s) / beta_s)`.
///
/// The sup runs over an unbounded tail; it is evaluated on a log-spaced
/// sample of the window `[t/2, 10 t (1 + ln(1+t))]`. Truncating there is
/// exact once the window covers the point after which `ln(s)/beta_s`
/// provably decreases (for the power schedule, `p ln s >= 1 + 1/s` holds
/// from `s = e^{2/p}` on); for small `t` the exponential term dominates and
/// the windowed sup is the documented value.
pub fn epsilon_envelope(
    t: f64,
    amplitude: f64,
    rate: f64,
    cooling: &CoolingSchedule,
) -> Result<f64> {
    if !(amplitude > 0.0) || !(rate > 0.0) {
        return Err(Error::invalid("envelope needs amplitude > 0 and rate > 0"));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid("envelope time must be >= 0"));
    }
    if !matches!(cooling, CoolingSchedule::Power { .. }) {
        return Err(Error::invalid(
            "the accuracy envelope applies only to cooling faster than any logarithm",
        ));
    }
    let positive_log_ratio = |s: f64| -> f64 {
        let lnp = s.ln().max(0.0);
        if lnp == 0.0 {
            0.0
        } else {
            lnp / cooling.beta_at(s).expect("s >= 0")
        }
    };
    let lo = 0.5 * t;
    let hi = 10.0 * t * (1.0 + (1.0 + t).ln());
    let mut sup = positive_log_ratio(lo);
    // ln+(s)/beta_s vanishes on [0,1], so a positive log-spaced start loses
    // nothing when lo = 0.
    let start = lo.max(1e-12);
    const SAMPLES: usize = 600;
    if hi > start {
        for i in 0..=SAMPLES {
            let s = start * (hi / start).powf(i as f64 / SAMPLES as f64);
            sup = sup.max(positive_log_ratio(s));
        }
    }
    Ok(amplitude * ((-rate * t).exp() + sup))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn logarithmic_values() {
        let s = CoolingSchedule::logarithmic(1.0, 2.0).unwrap();
        assert_relative_eq!(s.beta_at(0.0).unwrap(), 2.0);
        // ln(e^2 + (e^3 - e^2)) = 3.
        let t = 3f64.exp() - 2f64.exp();
        assert_relative_eq!(s.beta_at(t).unwrap(), 3.0, epsilon = 1e-12);
        assert!(s.beta_at(-0.1).is_err());
    }

    #[test]
    fn constant_values() {
        let s = CoolingSchedule::constant(5.0).unwrap();
        assert_eq!(s.beta_at(123.0).unwrap(), 5.0);
        assert_eq!(s.beta_prime(123.0).unwrap(), 0.0);
        // Infinite beta is the zero-noise sentinel.
        let frozen = CoolingSchedule::constant(f64::INFINITY).unwrap();
        assert!(frozen.beta_at(1.0).unwrap().is_infinite());
    }

    #[test]
    fn exp_identity_holds_everywhere() {
        // e^{c beta_t} = e^{c beta0} + t, the defining identity.
        for &(c, beta0) in &[(1.0, 2.0), (0.3, 0.7), (2.5, 1.1), (13.0, 1.0)] {
            let s = CoolingSchedule::logarithmic(c, beta0).unwrap();
            let base = (c * beta0).exp();
            for i in 0..1000 {
                let t = 1e-3 * 10f64.powf(12.0 * i as f64 / 999.0);
                let beta = s.beta_at(t).unwrap();
                assert_relative_eq!((c * beta).exp(), base + t, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn logarithmic_is_increasing_and_concave() {
        let s = CoolingSchedule::logarithmic(0.8, 1.5).unwrap();
        let mut prev = 0.0;
        let mut prev_diff = f64::INFINITY;
        for i in 0..200 {
            let t = i as f64 * 0.5;
            let b = s.beta_at(t).unwrap();
            assert!(b > prev);
            if i > 0 {
                let diff = b - prev;
                assert!(diff <= prev_diff + 1e-15, "second differences must be <= 0");
                prev_diff = diff;
            }
            prev = b;
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let schedules = [
            CoolingSchedule::logarithmic(1.3, 0.9).unwrap(),
            CoolingSchedule::power(1.0, 0.7).unwrap(),
            CoolingSchedule::piecewise(vec![(0.0, 1.0), (2.0, 3.0), (5.0, 4.0)]).unwrap(),
        ];
        for s in &schedules {
            for &t in &[0.5, 1.0, 3.0, 4.4, 10.0] {
                let h = 1e-6;
                let fd = (s.beta_at(t + h).unwrap() - s.beta_at(t - h).unwrap()) / (2.0 * h);
                assert_relative_eq!(s.beta_prime(t).unwrap(), fd, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn piecewise_clamps_outside() {
        let s = CoolingSchedule::piecewise(vec![(1.0, 2.0), (3.0, 6.0)]).unwrap();
        assert_eq!(s.beta_at(0.0).unwrap(), 2.0);
        assert_eq!(s.beta_at(10.0).unwrap(), 6.0);
        assert_relative_eq!(s.beta_at(2.0).unwrap(), 4.0);
        assert_relative_eq!(s.beta_prime(2.0).unwrap(), 2.0);
        assert_eq!(s.beta_prime(10.0).unwrap(), 0.0);
    }

    #[test]
    fn constant_friction_report() {
        let cooling = CoolingSchedule::logarithmic(1.0, 2.0).unwrap();
        let friction = FrictionSchedule::new(FrictionKind::Constant { gamma: 1.0 }, 1.0, 0.5).unwrap();
        let report = validate_friction(&friction, &cooling, 1e4).unwrap();
        assert!(report.is_valid(), "violations: {:?}", report.violations);
        // gamma / beta is maximal at t = 0 where beta = beta0.
        assert_relative_eq!(report.l_eff, 0.5);
        assert_relative_eq!(report.kappa_eff, 1.0);
    }

    #[test]
    fn equals_beta_friction_window() {
        let cooling = CoolingSchedule::logarithmic(1.0, 2.0).unwrap();
        // Near t = 0 the variation bound admits kappa up to c e^{c beta0}
        // (~7.39), so the floor constraint (kappa <= beta0 = 2) is binding.
        let friction = FrictionSchedule::new(FrictionKind::EqualsBeta, 2.0, 1.0).unwrap();
        let report = validate_friction(&friction, &cooling, 1e-3).unwrap();
        assert!(report.is_valid(), "violations: {:?}", report.violations);
        assert_relative_eq!(report.kappa_eff, 2.0, epsilon = 1e-6);

        // Declaring kappa above c e^{c beta0} breaks the variation bound
        // right at t = 0.
        let too_big = FrictionSchedule::new(FrictionKind::EqualsBeta, 7.5, 1.0).unwrap();
        let report = validate_friction(&too_big, &cooling, 1e-3).unwrap();
        assert!(report
            .violations
            .iter()
            .any(|v| v.constraint == FrictionConstraint::Variation));

        // On long horizons the variation bound tightens towards kappa <= c:
        // (1+t) gamma'_t climbs to 1/c, so kappa = 1.5 > c = 1 must fail...
        let mid = FrictionSchedule::new(FrictionKind::EqualsBeta, 1.5, 1.0).unwrap();
        let report = validate_friction(&mid, &cooling, 1e6).unwrap();
        assert!(report
            .violations
            .iter()
            .any(|v| v.constraint == FrictionConstraint::Variation));
        // ...while kappa <= min(c, beta0) = 1 stays valid at any horizon.
        let ok = FrictionSchedule::new(FrictionKind::EqualsBeta, 1.0, 1.0).unwrap();
        let report = validate_friction(&ok, &cooling, 1e6).unwrap();
        assert!(report.is_valid(), "violations: {:?}", report.violations);
    }

    #[test]
    fn decaying_friction_violates_floor() {
        let cooling = CoolingSchedule::constant(5.0).unwrap();
        // Sampled e^{-t} on knots: drops below kappa = 0.5 past t = ln 2.
        let knots: Vec<(f64, f64)> = (0..200).map(|i| {
            let t = i as f64 * 0.05;
            (t, (-t).exp())
        }).collect();
        let friction = FrictionSchedule::new(FrictionKind::Table { knots }, 0.5, 1.0).unwrap();
        let report = validate_friction(&friction, &cooling, 5.0).unwrap();
        let floor_violations: Vec<_> = report
            .violations
            .iter()
            .filter(|v| v.constraint == FrictionConstraint::Floor)
            .collect();
        assert!(!floor_violations.is_empty());
        assert!(floor_violations.iter().all(|v| v.t > 2f64.ln() - 1e-9));
    }

    #[test]
    fn classification() {
        assert_eq!(
            classify(&CoolingSchedule::logarithmic(2.0, 1.0).unwrap(), 1.0).unwrap(),
            ScheduleClass::SlowLog
        );
        assert_eq!(
            classify(&CoolingSchedule::logarithmic(0.5, 1.0).unwrap(), 1.0).unwrap(),
            ScheduleClass::FastLog
        );
        assert_eq!(
            classify(&CoolingSchedule::logarithmic(1.0, 1.0).unwrap(), 1.0 + 1e-12).unwrap(),
            ScheduleClass::CriticalLog
        );
        assert_eq!(
            classify(&CoolingSchedule::power(1.0, 0.7).unwrap(), 1.0).unwrap(),
            ScheduleClass::SuperLogarithmic
        );
        assert_eq!(
            classify(&CoolingSchedule::constant(5.0).unwrap(), 1.0).unwrap(),
            ScheduleClass::Other
        );
        // Classification depends only on the sign of c - c_star.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let c: f64 = rng.gen_range(0.01..10.0);
            let c_star: f64 = rng.gen_range(0.0..10.0);
            let class = classify(&CoolingSchedule::logarithmic(c, 1.0).unwrap(), c_star).unwrap();
            let expected = if (c - c_star).abs() <= 1e-9 {
                ScheduleClass::CriticalLog
            } else if c > c_star {
                ScheduleClass::SlowLog
            } else {
                ScheduleClass::FastLog
            };
            assert_eq!(class, expected);
        }
    }

    #[test]
    fn envelope_at_zero_and_large_rate() {
        let s = CoolingSchedule::power(1.0, 0.7).unwrap();
        // At t=0 the sup term vanishes (ln+ = 0 up to s=1) and e^0 = 1.
        assert_relative_eq!(epsilon_envelope(0.0, 3.0, 0.5, &s).unwrap(), 3.0);
        // Huge rate kills the exponential term entirely.
        let sup_only = epsilon_envelope(1.0, 1.0, 1e6, &s).unwrap();
        let with_exp = epsilon_envelope(1.0, 1.0, 0.1, &s).unwrap();
        assert!(sup_only < with_exp);
        assert!(sup_only > 0.0);
    }

    #[test]
    fn envelope_tail_matches_closed_form() {
        // Past the monotone point the sup sits exactly at s = t/2.
        let s = CoolingSchedule::power(1.0, 0.7).unwrap();
        let t: f64 = 1000.0;
        let expected = 2.0 * ((-0.01 * t).exp() + (500f64).ln() / (501f64).powf(0.7));
        assert_relative_eq!(
            epsilon_envelope(t, 2.0, 0.01, &s).unwrap(),
            expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn envelope_decreases_eventually() {
        let s = CoolingSchedule::power(0.5, 0.6).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..60 {
            let t = 50.0 + 16.0 * i as f64;
            let eps = epsilon_envelope(t, 1.0, 0.05, &s).unwrap();
            assert!(eps <= prev + 1e-12, "envelope rose at t={t}");
            prev = eps;
        }
    }

    #[test]
    fn envelope_rejects_wrong_kinds() {
        let log = CoolingSchedule::logarithmic(1.0, 1.0).unwrap();
        assert!(epsilon_envelope(1.0, 1.0, 1.0, &log).is_err());
        let cst = CoolingSchedule::constant(2.0).unwrap();
        assert!(epsilon_envelope(1.0, 1.0, 1.0, &cst).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(CoolingSchedule::logarithmic(0.0, 1.0).is_err());
        assert!(CoolingSchedule::logarithmic(1.0, -1.0).is_err());
        assert!(CoolingSchedule::power(1.0, 0.0).is_err());
        assert!(CoolingSchedule::constant(0.0).is_err());
        assert!(CoolingSchedule::piecewise(vec![]).is_err());
        assert!(CoolingSchedule::piecewise(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(FrictionSchedule::new(FrictionKind::EqualsBeta, 0.0, 1.0).is_err());
        assert!(FrictionSchedule::new(FrictionKind::Constant { gamma: -1.0 }, 1.0, 1.0).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let s = CoolingSchedule::logarithmic(1.5, 0.5).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"kind\":\"logarithmic\""));
        let back: CoolingSchedule = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let f = FrictionSchedule::new(FrictionKind::EqualsBeta, 1.0, 2.0).unwrap();
        let json = serde_json::to_string(&f).unwrap();
        let back: FrictionSchedule = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
    }
}

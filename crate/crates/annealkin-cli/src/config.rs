//! Strict JSON experiment configs.
//!
//! Every config is an object with exactly one top-level key naming the
//! request kind (`landscape`, `simulate`, `sweep`, `gibbs_check`,
//! `lyapunov`). Unknown keys are rejected with the offending name, its
//! location, and a nearest-match suggestion; semantic problems are collected
//! and reported all at once rather than one per run.

use std::path::Path;

use serde::Deserialize;

use annealkin::landscape::{PotentialFamily, PotentialSpec};
use annealkin::schedules::{CoolingSchedule, FrictionKind, FrictionSchedule};
use annealkin::integrator::Scheme;

use crate::{CliError, CliResult};

/// A parsed request plus the raw JSON it came from (kept for hashing).
#[derive(Debug)]
pub struct ParsedConfig {
    pub request: Request,
    pub raw: serde_json::Value,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Request {
    Landscape(LandscapeRequest),
    Simulate(SimulateRequest),
    Sweep(SweepRequest),
    GibbsCheck(GibbsRequest),
    Lyapunov(LyapunovRequest),
}

impl Request {
    pub fn kind(&self) -> &'static str {
        match self {
            Request::Landscape(_) => "landscape",
            Request::Simulate(_) => "simulate",
            Request::Sweep(_) => "sweep",
            Request::GibbsCheck(_) => "gibbs-check",
            Request::Lyapunov(_) => "lyapunov",
        }
    }

    /// Base seed of the request, if the request kind draws randomness.
    pub fn seed(&self) -> Option<u64> {
        match self {
            Request::Landscape(_) | Request::Lyapunov(_) => None,
            Request::Simulate(r) => Some(r.seed),
            Request::Sweep(r) => Some(r.simulate.seed),
            Request::GibbsCheck(r) => Some(r.seed),
        }
    }
}

// ---------------------------------------------------------------------------
// Landscape families.

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyConfig {
    Quadratic(QuadraticConfig),
    DoubleWell(DoubleWellConfig),
    Polynomial(PolynomialConfig),
    SlowGrowth(SlowGrowthConfig),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticConfig {
    pub omega2: f64,
    #[serde(default = "one")]
    pub dimension: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubleWellConfig {
    pub height: f64,
    pub tilt: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialConfig {
    /// Ascending-power coefficients of a one-dimensional polynomial.
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlowGrowthConfig {
    pub alpha: f64,
    #[serde(default = "one")]
    pub dimension: usize,
}

fn one() -> usize {
    1
}

impl FamilyConfig {
    pub fn build(&self) -> annealkin::Result<PotentialSpec> {
        match self {
            FamilyConfig::Quadratic(c) => {
                PotentialSpec::new(PotentialFamily::Quadratic { omega2: c.omega2 }, c.dimension)
            }
            FamilyConfig::DoubleWell(c) => PotentialSpec::new(
                PotentialFamily::DoubleWell1D { height: c.height, tilt: c.tilt },
                1,
            ),
            FamilyConfig::Polynomial(c) => PotentialSpec::new(
                PotentialFamily::MultiWellPolynomial { coeffs: c.coeffs.clone() },
                1,
            ),
            FamilyConfig::SlowGrowth(c) => {
                PotentialSpec::new(PotentialFamily::SlowGrowth { alpha: c.alpha }, c.dimension)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Domain variants and grids.

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantConfig {
    Free(FreeConfig),
    Torus(TorusConfig),
    Compact(CompactConfig),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeConfig {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusConfig {
    /// Periodization cutoff: the potential is clamped to a plateau at this
    /// height and repeated over a torus cell that contains the sublevel set.
    pub cutoff: f64,
    #[serde(default)]
    pub min_half_width: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompactConfig {
    pub cutoff: f64,
    #[serde(default)]
    pub min_half_width: f64,
}

fn default_variant() -> VariantConfig {
    VariantConfig::Free(FreeConfig {})
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// `[lo, hi]` per position axis.
    pub ranges: Vec<[f64; 2]>,
    /// Nodes per axis, aligned with `ranges`.
    pub counts: Vec<usize>,
}

impl GridConfig {
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.ranges.iter().map(|r| (r[0], r[1])).collect()
    }
}

// ---------------------------------------------------------------------------
// Schedules.

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoolingConfig {
    Logarithmic(LogarithmicConfig),
    Power(PowerConfig),
    Constant(ConstantCoolingConfig),
    Table(CoolingTableConfig),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogarithmicConfig {
    /// Cooling speed: smaller `c` cools faster.
    pub c: f64,
    pub beta0: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfig {
    pub beta0: f64,
    pub p: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantCoolingConfig {
    /// Fixed inverse temperature. Omit for the zero-noise limit.
    #[serde(default)]
    pub beta: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoolingTableConfig {
    pub knots: Vec<(f64, f64)>,
}

impl CoolingConfig {
    pub fn build(&self) -> annealkin::Result<CoolingSchedule> {
        match self {
            CoolingConfig::Logarithmic(c) => CoolingSchedule::logarithmic(c.c, c.beta0),
            CoolingConfig::Power(c) => CoolingSchedule::power(c.beta0, c.p),
            CoolingConfig::Constant(c) => {
                CoolingSchedule::constant(c.beta.unwrap_or(f64::INFINITY))
            }
            CoolingConfig::Table(c) => CoolingSchedule::piecewise(c.knots.clone()),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrictionKindConfig {
    Constant(ConstantFrictionConfig),
    EqualsBeta(EqualsBetaConfig),
    Table(FrictionTableConfig),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantFrictionConfig {
    pub gamma: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqualsBetaConfig {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionTableConfig {
    pub knots: Vec<(f64, f64)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionConfig {
    pub kind: FrictionKindConfig,
    /// Declared friction floor (`gamma_t >= kappa`).
    pub kappa: f64,
    /// Declared coupling bound (`gamma_t <= l * beta_t`).
    pub l: f64,
}

impl FrictionConfig {
    pub fn build(&self) -> annealkin::Result<FrictionSchedule> {
        let kind = match &self.kind {
            FrictionKindConfig::Constant(c) => FrictionKind::Constant { gamma: c.gamma },
            FrictionKindConfig::EqualsBeta(_) => FrictionKind::EqualsBeta,
            FrictionKindConfig::Table(c) => FrictionKind::Table { knots: c.knots.clone() },
        };
        FrictionSchedule::new(kind, self.kappa, self.l)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub cooling: CoolingConfig,
    pub friction: FrictionConfig,
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeConfig {
    EulerMaruyama,
    #[default]
    SplittingBaoab,
}

impl SchemeConfig {
    pub fn build(self) -> Scheme {
        match self {
            SchemeConfig::EulerMaruyama => Scheme::EulerMaruyama,
            SchemeConfig::SplittingBaoab => Scheme::SplittingBaoab,
        }
    }
}

// ---------------------------------------------------------------------------
// Initial conditions and cup watches.

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialConfig {
    Fixed(FixedInitConfig),
    Gibbs(GibbsInitConfig),
    UniformCup(UniformCupConfig),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedInitConfig {
    pub x: Vec<f64>,
    /// Initial velocity; zeros when omitted.
    #[serde(default)]
    pub y: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsInitConfig {
    /// Inverse temperature of the start distribution.
    pub beta: f64,
    /// Quadrature grid for the start measure. Required on the free variant;
    /// torus and compact variants default to sampling their own cell.
    #[serde(default)]
    pub grid: Option<GridConfig>,
    /// Nodes per axis when the grid is derived from a torus cell.
    #[serde(default)]
    pub counts: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformCupConfig {
    /// Point whose nearest grid node seeds the cup.
    pub center: Vec<f64>,
    /// Cup height above the bottom node.
    pub level: f64,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub counts: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CupConfig {
    pub center: Vec<f64>,
    pub level: f64,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub counts: Option<usize>,
}

// ---------------------------------------------------------------------------
// Requests.

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeRequest {
    pub landscape: FamilyConfig,
    pub grid: GridConfig,
    /// Analyze the periodized variant on its own torus cell instead of the
    /// boxed grid (`grid.counts[0]` nodes per axis).
    #[serde(default)]
    pub periodize: Option<PeriodizeConfig>,
    /// Probe height for the trap certificate: checks that every cup of this
    /// height around a non-global minimum certifies return below the probe.
    #[serde(default)]
    pub trap_level: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodizeConfig {
    pub cutoff: f64,
    #[serde(default)]
    pub min_half_width: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    pub landscape: FamilyConfig,
    #[serde(default = "default_variant")]
    pub variant: VariantConfig,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub scheme: SchemeConfig,
    pub dt: f64,
    pub horizon: f64,
    pub trajectories: usize,
    /// Observation times; defaults to a log-spaced ladder ending at the
    /// horizon.
    #[serde(default)]
    pub checkpoints: Option<Vec<f64>>,
    /// Energy exceedance thresholds; defaults to 0.2 times the smallest
    /// finite escape depth found on the analysis grid.
    #[serde(default)]
    pub thresholds: Option<Vec<f64>>,
    pub initial: InitialConfig,
    #[serde(default)]
    pub cup: Option<CupConfig>,
    #[serde(default)]
    pub seed: u64,
    /// Grid used for default thresholds and sweep critical heights. Free
    /// variants fall back to a padded box around the minima; torus and
    /// compact variants sample their own cell.
    #[serde(default)]
    pub analysis: Option<GridConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRequest {
    pub simulate: SimulateRequest,
    /// Cooling speeds to sweep; must straddle `c_star` when more than one.
    pub c_values: Vec<f64>,
    /// Critical height; measured from the analysis grid when omitted.
    #[serde(default)]
    pub c_star: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsRequest {
    pub landscape: FamilyConfig,
    #[serde(default = "default_variant")]
    pub variant: VariantConfig,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub counts: Option<usize>,
    pub betas: Vec<f64>,
    /// Energy threshold for the tail-mass table; omitted skips tails.
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// `[position_bins, velocity_bins]` for the sampler comparison.
    #[serde(default)]
    pub bins: Option<[usize; 2]>,
    /// Also sweep the position spectral gap over `betas` (1D grids only).
    #[serde(default)]
    pub spectral: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_samples() -> usize {
    20_000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovRequest {
    pub landscape: FamilyConfig,
    pub gamma: f64,
    /// Expansion point; the global minimum when omitted.
    #[serde(default)]
    pub at: Option<Vec<f64>>,
    #[serde(default = "default_search_max")]
    pub search_max: f64,
}

fn default_search_max() -> f64 {
    8.0
}

// ---------------------------------------------------------------------------
// Parsing.

/// Read and parse a config file: strict JSON, strict keys, then semantic
/// validation that reports every violation at once.
pub fn parse_config(path: &Path) -> CliResult<ParsedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!("{}: invalid JSON: {e}", path.display()))
    })?;
    let request: Request = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {}", path.display(), decorate(&e))))?;
    let violations = validate(&request);
    if !violations.is_empty() {
        let mut msg = format!(
            "{}: invalid config ({} problem{}):",
            path.display(),
            violations.len(),
            if violations.len() == 1 { "" } else { "s" },
        );
        for v in &violations {
            msg.push_str("\n  - ");
            msg.push_str(v);
        }
        return Err(CliError::Config(msg));
    }
    Ok(ParsedConfig { request, raw })
}

/// serde's unknown-field errors already carry the location and the expected
/// key list; add a nearest-match suggestion for the typo.
fn decorate(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    if let Some(rest) = msg.strip_prefix("unknown field `") {
        if let Some((unknown, tail)) = rest.split_once('`') {
            let candidates: Vec<&str> = tail
                .split('`')
                .skip(1)
                .step_by(2)
                .filter(|c| !c.is_empty())
                .collect();
            if let Some(best) = nearest(unknown, &candidates) {
                return format!("{msg} — did you mean `{best}`?");
            }
        }
    }
    msg
}

/// Closest candidate by edit distance, if any is plausibly a typo.
fn nearest<'a>(unknown: &str, candidates: &[&'a str]) -> Option<&'a str> {
    let mut best: Option<(&str, usize)> = None;
    for &c in candidates {
        let d = levenshtein(unknown, c);
        if best.map_or(true, |(_, bd)| d < bd) {
            best = Some((c, d));
        }
    }
    let (name, d) = best?;
    let budget = (unknown.chars().count() / 3).max(2);
    (d <= budget).then_some(name)
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut prev = row[0];
        row[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let cost = if ca == cb { prev } else { prev + 1 };
            prev = row[j + 1];
            row[j + 1] = cost.min(prev + 1).min(row[j] + 1);
        }
    }
    row[b.len()]
}

// ---------------------------------------------------------------------------
// Semantic validation.

fn validate(request: &Request) -> Vec<String> {
    let mut v = Vec::new();
    match request {
        Request::Landscape(r) => {
            check_family(&r.landscape, &mut v);
            check_grid(&r.grid, family_dimension(&r.landscape), &mut v);
            if let Some(p) = &r.periodize {
                if !(p.cutoff > 0.0 && p.cutoff.is_finite()) {
                    v.push(format!("periodize.cutoff must be finite and > 0, got {}", p.cutoff));
                }
            }
            if let Some(c) = r.trap_level {
                if !(c > 0.0 && c.is_finite()) {
                    v.push(format!("trap_level must be finite and > 0, got {c}"));
                }
            }
        }
        Request::Simulate(r) => check_simulate(r, &mut v),
        Request::Sweep(r) => {
            check_simulate(&r.simulate, &mut v);
            if r.c_values.is_empty() {
                v.push("c_values must not be empty".into());
            }
            if r.c_values.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
                v.push("c_values must all be finite and > 0".into());
            }
            if let Some(cs) = r.c_star {
                if !(cs.is_finite() && cs > 0.0) {
                    v.push(format!("c_star must be finite and > 0, got {cs}"));
                }
            }
            if !matches!(r.simulate.schedule.cooling, CoolingConfig::Logarithmic(_)) {
                v.push("sweep requests need logarithmic cooling (its beta0 anchors the sweep)".into());
            }
        }
        Request::GibbsCheck(r) => {
            check_family(&r.landscape, &mut v);
            let dim = family_dimension(&r.landscape);
            match (&r.variant, &r.grid) {
                (VariantConfig::Free(_), None) => {
                    v.push("free-variant gibbs checks need an explicit grid".into())
                }
                (_, Some(g)) => check_grid(g, dim, &mut v),
                _ => {}
            }
            check_variant(&r.variant, &mut v);
            if r.betas.is_empty() {
                v.push("betas must not be empty".into());
            }
            if r.betas.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
                v.push("betas must all be finite and > 0".into());
            }
            if let Some(d) = r.delta {
                if !(d.is_finite() && d > 0.0) {
                    v.push(format!("delta must be finite and > 0, got {d}"));
                }
            }
            if r.samples == 0 {
                v.push("samples must be >= 1".into());
            }
            if let Some([pb, vb]) = r.bins {
                if pb == 0 || vb == 0 {
                    v.push("bins must both be >= 1".into());
                }
            }
            if r.spectral && dim != 1 {
                v.push("spectral gap sweeps support one-dimensional grids only".into());
            }
        }
        Request::Lyapunov(r) => {
            check_family(&r.landscape, &mut v);
            if !(r.gamma > 0.0 && r.gamma.is_finite()) {
                v.push(format!("gamma must be finite and > 0, got {}", r.gamma));
            }
            if !(r.search_max > 0.0 && r.search_max.is_finite()) {
                v.push(format!("search_max must be finite and > 0, got {}", r.search_max));
            }
            if let Some(at) = &r.at {
                if at.len() != family_dimension(&r.landscape) {
                    v.push(format!(
                        "expansion point has dimension {}, landscape has {}",
                        at.len(),
                        family_dimension(&r.landscape),
                    ));
                }
                if at.iter().any(|x| !x.is_finite()) {
                    v.push("expansion point must be finite".into());
                }
            }
        }
    }
    v
}

fn family_dimension(f: &FamilyConfig) -> usize {
    match f {
        FamilyConfig::Quadratic(c) => c.dimension,
        FamilyConfig::SlowGrowth(c) => c.dimension,
        FamilyConfig::DoubleWell(_) | FamilyConfig::Polynomial(_) => 1,
    }
}

fn check_family(f: &FamilyConfig, v: &mut Vec<String>) {
    if let Err(e) = f.build() {
        v.push(format!("landscape: {e}"));
    }
}

fn check_variant(variant: &VariantConfig, v: &mut Vec<String>) {
    let cutoff = match variant {
        VariantConfig::Free(_) => return,
        VariantConfig::Torus(t) => t.cutoff,
        VariantConfig::Compact(c) => c.cutoff,
    };
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        v.push(format!("variant cutoff must be finite and > 0, got {cutoff}"));
    }
}

fn check_grid(g: &GridConfig, dimension: usize, v: &mut Vec<String>) {
    if g.ranges.len() != g.counts.len() {
        v.push(format!(
            "grid has {} range(s) but {} count(s)",
            g.ranges.len(),
            g.counts.len(),
        ));
    }
    if g.ranges.len() != dimension {
        v.push(format!(
            "grid has {} axis/axes, landscape has dimension {}",
            g.ranges.len(),
            dimension,
        ));
    }
    for (i, r) in g.ranges.iter().enumerate() {
        if !(r[0].is_finite() && r[1].is_finite() && r[1] > r[0]) {
            v.push(format!("grid range {i} must be finite with hi > lo, got [{}, {}]", r[0], r[1]));
        }
    }
    for (i, &c) in g.counts.iter().enumerate() {
        if c < 2 {
            v.push(format!("grid count {i} must be >= 2, got {c}"));
        }
    }
}

fn check_simulate(r: &SimulateRequest, v: &mut Vec<String>) {
    check_family(&r.landscape, &mut *v);
    check_variant(&r.variant, v);
    if let Err(e) = r.schedule.cooling.build() {
        v.push(format!("cooling: {e}"));
    }
    if let Err(e) = r.schedule.friction.build() {
        v.push(format!("friction: {e}"));
    }
    if !(r.dt > 0.0 && r.dt.is_finite()) {
        v.push(format!("dt must be finite and > 0, got {}", r.dt));
    }
    if !(r.horizon >= 0.0 && r.horizon.is_finite()) {
        v.push(format!("horizon must be finite and >= 0, got {}", r.horizon));
    }
    if r.trajectories == 0 {
        v.push("trajectories must be >= 1".into());
    }
    if let Some(cps) = &r.checkpoints {
        for &t in cps {
            if !(t.is_finite() && t >= 0.0 && t <= r.horizon) {
                v.push(format!("checkpoint {t} is outside [0, horizon]"));
                break;
            }
        }
    }
    if let Some(ths) = &r.thresholds {
        if ths.is_empty() {
            v.push("thresholds must not be empty when given".into());
        }
        if ths.iter().any(|d| !d.is_finite()) {
            v.push("thresholds must be finite".into());
        }
    }
    let dim = family_dimension(&r.landscape);
    match &r.initial {
        InitialConfig::Fixed(f) => {
            if f.x.len() != dim {
                v.push(format!("initial.x has dimension {}, landscape has {dim}", f.x.len()));
            }
            if let Some(y) = &f.y {
                if y.len() != dim {
                    v.push(format!("initial.y has dimension {}, landscape has {dim}", y.len()));
                }
            }
        }
        InitialConfig::Gibbs(g) => {
            if !(g.beta > 0.0 && g.beta.is_finite()) {
                v.push(format!("initial.beta must be finite and > 0, got {}", g.beta));
            }
            if matches!(r.variant, VariantConfig::Free(_)) && g.grid.is_none() {
                v.push("gibbs initial conditions on the free variant need a grid".into());
            }
            if let Some(g) = &g.grid {
                check_grid(g, dim, v);
            }
        }
        InitialConfig::UniformCup(u) => {
            check_cup_shape(&u.center, u.level, u.grid.as_ref(), &r.variant, dim, "initial", v);
        }
    }
    if let Some(c) = &r.cup {
        check_cup_shape(&c.center, c.level, c.grid.as_ref(), &r.variant, dim, "cup", v);
    }
    if let Some(a) = &r.analysis {
        check_grid(a, dim, v);
    }
}

fn check_cup_shape(
    center: &[f64],
    level: f64,
    grid: Option<&GridConfig>,
    variant: &VariantConfig,
    dim: usize,
    what: &str,
    v: &mut Vec<String>,
) {
    if center.len() != dim {
        v.push(format!("{what} center has dimension {}, landscape has {dim}", center.len()));
    }
    if center.iter().any(|x| !x.is_finite()) {
        v.push(format!("{what} center must be finite"));
    }
    if !(level > 0.0 && level.is_finite()) {
        v.push(format!("{what} level must be finite and > 0, got {level}"));
    }
    if matches!(variant, VariantConfig::Free(_)) && grid.is_none() {
        v.push(format!("{what} on the free variant needs an explicit grid"));
    }
    if let Some(g) = grid {
        check_grid(g, dim, v);
    }
}

// ---------------------------------------------------------------------------
// Canonical hashing.

/// Canonical text form of a JSON value: object keys sorted, no whitespace,
/// numbers in serde_json's shortest round-trip form. Two configs that differ
/// only in key order or formatting hash identically.
pub fn canonical_json(v: &serde_json::Value) -> String {
    let mut out = String::new();
    write_canonical(v, &mut out);
    out
}

fn write_canonical(v: &serde_json::Value, out: &mut String) {
    match v {
        serde_json::Value::Null => out.push_str("null"),
        serde_json::Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        serde_json::Value::Number(n) => out.push_str(&n.to_string()),
        serde_json::Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("strings always serialize"))
        }
        serde_json::Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        serde_json::Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("strings always serialize"));
                out.push(':');
                write_canonical(&map[*k], out);
            }
            out.push('}');
        }
    }
}

/// Hex SHA-256 of the canonical form.
pub fn config_hash(v: &serde_json::Value) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(canonical_json(v).as_bytes());
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write;
        write!(hex, "{byte:02x}").expect("writing to a String cannot fail");
    }
    hex
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn parse_str(text: &str) -> CliResult<ParsedConfig> {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(text.as_bytes()).unwrap();
        parse_config(file.path())
    }

    fn minimal_simulate(extra_cooling_key: &str) -> String {
        format!(
            r#"{{
  "simulate": {{
    "landscape": {{"double_well": {{"height": 1.0, "tilt": 0.3}}}},
    "schedule": {{
      "cooling": {{"logarithmic": {{"c": 2.0, "beta0": 1.0{extra_cooling_key}}}}},
      "friction": {{"kind": {{"constant": {{"gamma": 1.0}}}}, "kappa": 0.9, "l": 2.0}}
    }},
    "dt": 0.01,
    "horizon": 1.0,
    "trajectories": 4,
    "initial": {{"fixed": {{"x": [-1.0]}}}},
    "thresholds": [0.5]
  }}
}}"#
        )
    }

    #[test]
    fn minimal_config_parses() {
        let parsed = parse_str(&minimal_simulate("")).unwrap();
        assert_eq!(parsed.request.kind(), "simulate");
        assert_eq!(parsed.request.seed(), Some(0));
    }

    #[test]
    fn unknown_key_is_rejected_with_suggestion() {
        let text = minimal_simulate("").replace("\"beta0\": 1.0", "\"betta0\": 1.0");
        let err = parse_str(&text).unwrap_err().to_string();
        assert!(err.contains("unknown field `betta0`"), "got: {err}");
        assert!(err.contains("did you mean `beta0`?"), "got: {err}");
        assert!(err.contains("line"), "location missing: {err}");
    }

    #[test]
    fn semantic_validation_lists_every_problem() {
        let text = minimal_simulate("")
            .replace("\"c\": 2.0", "\"c\": -1.0")
            .replace("\"dt\": 0.01", "\"dt\": 0.0")
            .replace("\"trajectories\": 4", "\"trajectories\": 0");
        let err = parse_str(&text).unwrap_err().to_string();
        assert!(err.contains("3 problems"), "got: {err}");
        assert!(err.contains("cooling"), "got: {err}");
        assert!(err.contains("dt"), "got: {err}");
        assert!(err.contains("trajectories"), "got: {err}");
    }

    #[test]
    fn hash_is_stable_under_key_reordering() {
        let a: serde_json::Value =
            serde_json::from_str(r#"{"b": 1.5, "a": {"y": [1, 2], "x": null}}"#).unwrap();
        let b: serde_json::Value =
            serde_json::from_str(r#"{"a": {"x": null, "y": [1, 2]}, "b": 1.5}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_eq!(canonical_json(&a), r#"{"a":{"x":null,"y":[1,2]},"b":1.5}"#);
        let c: serde_json::Value = serde_json::from_str(r#"{"b": 2.5, "a": 1}"#).unwrap();
        assert_ne!(config_hash(&a), config_hash(&c));
    }

    #[test]
    fn levenshtein_matches_known_distances() {
        assert_eq!(levenshtein("betta0", "beta0"), 1);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(nearest("betta0", &["c", "beta0"]), Some("beta0"));
        assert_eq!(nearest("zzzzzz", &["c", "beta0"]), None);
    }
}

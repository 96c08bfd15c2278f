//! Back-off and gain optimization of a PA cascade.
//!
//! The objective is `sum_n |G x_n / sqrt(p0) - y_n^(K)|^2` over one frozen
//! signal and noise realization. Because the excitation is built as
//! `sqrt(p0) * x_unit`, the reference reduces to `G * x_unit` and does not
//! move with `p0`.
//!
//! Parameter vectors are laid out as `[p0]`, `[g]`, `[g_1..g_K]`, `[p0, g]`
//! or `[p0, g_1..g_K]` depending on the [`Mode`].

mod lm;

pub use lm::{fd_jacobian, grid_search, minimize_box, LmOptions, LmOutcome, Status};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cascade::{cascade_output, scenario2_gain, CascadeConfig};
use crate::error::{Error, Result};
use crate::signal::{NoiseRealization, Signal};

/// Smallest admissible input power; the open bound `p0 > 0` made concrete.
pub const POWER_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[serde(rename = "power")]
    PowerOnly,
    EqualGains,
    UnequalGains,
    #[serde(rename = "joint-equal")]
    JointEqualGains,
    #[serde(rename = "joint-unequal")]
    JointUnequalGains,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::PowerOnly,
        Mode::EqualGains,
        Mode::UnequalGains,
        Mode::JointEqualGains,
        Mode::JointUnequalGains,
    ];

    pub fn dimension(self, stages: usize) -> usize {
        match self {
            Mode::PowerOnly | Mode::EqualGains => 1,
            Mode::UnequalGains => stages,
            Mode::JointEqualGains => 2,
            Mode::JointUnequalGains => stages + 1,
        }
    }

    pub fn optimizes_power(self) -> bool {
        matches!(
            self,
            Mode::PowerOnly | Mode::JointEqualGains | Mode::JointUnequalGains
        )
    }

    pub fn optimizes_gains(self) -> bool {
        self != Mode::PowerOnly
    }

    /// CLI / file name of the mode.
    pub fn name(self) -> &'static str {
        match self {
            Mode::PowerOnly => "power",
            Mode::EqualGains => "equal-gains",
            Mode::UnequalGains => "unequal-gains",
            Mode::JointEqualGains => "joint-equal",
            Mode::JointUnequalGains => "joint-unequal",
        }
    }

    /// Restricts a full `[p0, g_1..g_K]` vector to this mode's parameters.
    pub fn select(self, full: &[f64]) -> Vec<f64> {
        match self {
            Mode::PowerOnly => vec![full[0]],
            Mode::EqualGains => vec![full[1]],
            Mode::UnequalGains => full[1..].to_vec(),
            Mode::JointEqualGains => vec![full[0], full[1]],
            Mode::JointUnequalGains => full.to_vec(),
        }
    }

    fn check_dimension(self, dim: usize) -> Result<()> {
        let ok = match self {
            Mode::PowerOnly | Mode::EqualGains => dim == 1,
            Mode::JointEqualGains => dim == 2,
            Mode::UnequalGains => dim >= 1,
            Mode::JointUnequalGains => dim >= 2,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "{} takes a different parameter count than {dim}",
                self.name()
            )))
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode '{s}'")))
    }
}

/// Starting configurations bracketing the search: unit gains, or every
/// stage amplifying `x_max` back to itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioInit {
    One,
    Two,
}

impl ScenarioInit {
    pub fn number(self) -> u8 {
        match self {
            ScenarioInit::One => 1,
            ScenarioInit::Two => 2,
        }
    }

    pub fn stage_gain(self, alpha: Complex64) -> Result<f64> {
        match self {
            ScenarioInit::One => Ok(1.0),
            ScenarioInit::Two => scenario2_gain(alpha),
        }
    }
}

/// Full `[p0 = 1, g_1..g_K]` start vector for a scenario.
pub fn scenario_start(scenario: ScenarioInit, stages: usize, alpha: Complex64) -> Result<Vec<f64>> {
    if stages == 0 {
        return Err(Error::invalid("cascade needs at least one stage"));
    }
    let g = scenario.stage_gain(alpha)?;
    let mut v = Vec::with_capacity(stages + 1);
    v.push(1.0);
    v.extend(std::iter::repeat_n(g, stages));
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Start {
    Scenario(ScenarioInit),
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationSpec {
    pub mode: Mode,
    pub start: Start,
    pub power_bounds: (f64, f64),
    pub gain_bounds: (f64, f64),
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
}

impl OptimizationSpec {
    /// Default tolerances, bounds taken from the cascade's `G` and `epsilon`.
    pub fn new(mode: Mode, start: Start, config: &CascadeConfig) -> Self {
        let defaults = LmOptions::default();
        OptimizationSpec {
            mode,
            start,
            power_bounds: (POWER_FLOOR, 1.0),
            gain_bounds: config.gain_bounds(),
            max_iterations: defaults.max_iterations,
            gradient_tolerance: defaults.gradient_tolerance,
            step_tolerance: defaults.step_tolerance,
        }
    }

    pub fn bounds(&self, dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.mode.check_dimension(dim)?;
        let (p, g) = (self.power_bounds, self.gain_bounds);
        let per_axis: Vec<(f64, f64)> = match self.mode {
            Mode::PowerOnly => vec![p],
            Mode::EqualGains | Mode::UnequalGains => vec![g; dim],
            Mode::JointEqualGains | Mode::JointUnequalGains => std::iter::once(p)
                .chain(std::iter::repeat_n(g, dim - 1))
                .collect(),
        };
        Ok(per_axis.into_iter().unzip())
    }

    fn options(&self) -> LmOptions {
        LmOptions {
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            step_tolerance: self.step_tolerance,
            ..LmOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub mode: Mode,
    pub parameters: Vec<f64>,
    /// Final residual sum of squares.
    pub objective: f64,
    pub objective_history: Vec<f64>,
    pub status: Status,
    pub iterations: usize,
}

/// A real-valued residual vector as a function of a parameter vector.
pub trait ResidualFunction {
    fn dimension(&self) -> usize;

    fn residual(&self, params: &[f64]) -> Result<Vec<f64>>;

    /// Start vector for a scenario, when the residual knows how to build one.
    fn scenario_start(&self, _scenario: ScenarioInit) -> Result<Vec<f64>> {
        Err(Error::invalid(
            "this residual has no scenario starting points",
        ))
    }
}

/// Residual of a cascade against its linear reference, with the signal and
/// noise frozen at construction.
#[derive(Debug, Clone)]
pub struct CascadeResidual {
    x_unit: Signal,
    reference: Vec<Complex64>,
    config: CascadeConfig,
    noise: NoiseRealization,
    mode: Mode,
}

/// Binds a unit excitation, cascade and noise draw into a residual for `mode`.
/// Parameters the mode does not optimize are taken from `config`.
pub fn build_residual(
    x0_unit: &Signal,
    config: &CascadeConfig,
    noise: &NoiseRealization,
    mode: Mode,
) -> Result<CascadeResidual> {
    config.validate()?;
    if noise.stages() < config.len() || noise.len() != x0_unit.len() {
        return Err(Error::invalid(
            "noise realization does not cover the cascade and signal",
        ));
    }
    let reference = x0_unit
        .samples()
        .iter()
        .map(|x| x * config.reference_gain)
        .collect();
    Ok(CascadeResidual {
        x_unit: x0_unit.clone(),
        reference,
        config: config.clone(),
        noise: noise.clone(),
        mode,
    })
}

impl CascadeResidual {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn config(&self) -> &CascadeConfig {
        &self.config
    }

    pub fn x_unit(&self) -> &Signal {
        &self.x_unit
    }

    /// `G * x_unit`.
    pub fn reference(&self) -> Signal {
        self.x_unit
            .with_samples(self.reference.clone())
            .expect("reference has signal length")
    }

    /// `(p0, gains)` for a parameter vector of this mode.
    pub fn unpack(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        let k = self.config.len();
        if params.len() != self.mode.dimension(k) {
            return Err(Error::invalid(format!(
                "{} expects {} parameters, got {}",
                self.mode,
                self.mode.dimension(k),
                params.len()
            )));
        }
        let fixed_p0 = self.config.input_power;
        Ok(match self.mode {
            Mode::PowerOnly => (params[0], self.config.gains()),
            Mode::EqualGains => (fixed_p0, vec![params[0]; k]),
            Mode::UnequalGains => (fixed_p0, params.to_vec()),
            Mode::JointEqualGains => (params[0], vec![params[1]; k]),
            Mode::JointUnequalGains => (params[0], params[1..].to_vec()),
        })
    }

    /// Cascade configuration realized by a parameter vector.
    pub fn configure(&self, params: &[f64]) -> Result<CascadeConfig> {
        let (p0, gains) = self.unpack(params)?;
        let mut cfg = self.config.with_gains(&gains)?;
        cfg.input_power = p0;
        Ok(cfg)
    }

    /// Cascade input `sqrt(p0) * x_unit` and output for a parameter vector.
    pub fn simulate(&self, params: &[f64]) -> Result<(Signal, Signal)> {
        let (p0, gains) = self.unpack(params)?;
        if !(p0 >= 0.0 && p0.is_finite()) {
            return Err(Error::invalid(format!("input power {p0} must be >= 0")));
        }
        let cfg = self.config.with_gains(&gains)?;
        let x0 = self.x_unit.scaled(Complex64::new(p0.sqrt(), 0.0));
        let y = cascade_output(&x0, &cfg, &self.noise)?;
        Ok((x0, y))
    }

    /// Residual sum of squares.
    pub fn objective(&self, params: &[f64]) -> Result<f64> {
        let (_, y) = self.simulate(params)?;
        Ok(self
            .reference
            .iter()
            .zip(y.samples())
            .map(|(d, a)| (d - a).norm_sqr())
            .sum())
    }
}

impl ResidualFunction for CascadeResidual {
    fn dimension(&self) -> usize {
        self.mode.dimension(self.config.len())
    }

    /// Real parts of `G x_unit - y` followed by the imaginary parts.
    fn residual(&self, params: &[f64]) -> Result<Vec<f64>> {
        let (_, y) = self.simulate(params)?;
        let n = y.len();
        let mut out = vec![0.0; 2 * n];
        for (i, (d, a)) in self.reference.iter().zip(y.samples()).enumerate() {
            let r = d - a;
            out[i] = r.re;
            out[n + i] = r.im;
        }
        Ok(out)
    }

    fn scenario_start(&self, scenario: ScenarioInit) -> Result<Vec<f64>> {
        let alpha = self.config.stages[0].alpha;
        let full = scenario_start(scenario, self.config.len(), alpha)?;
        Ok(self.mode.select(&full))
    }
}

/// Projected Levenberg-Marquardt on `residual` within the bounds of `spec`.
pub fn solve<R: ResidualFunction + ?Sized>(
    spec: &OptimizationSpec,
    residual: &R,
) -> Result<OptimizationResult> {
    let dim = residual.dimension();
    let (lower, upper) = spec.bounds(dim)?;
    let start = match &spec.start {
        Start::Scenario(s) => residual.scenario_start(*s)?,
        Start::Explicit(v) => v.clone(),
    };
    if start.len() != dim {
        return Err(Error::invalid(format!(
            "start vector has {} entries, residual takes {dim}",
            start.len()
        )));
    }
    let out = minimize_box(
        |p: &[f64]| residual.residual(p),
        &start,
        &lower,
        &upper,
        &spec.options(),
    )?;
    Ok(OptimizationResult {
        mode: spec.mode,
        parameters: out.params,
        objective: out.objective,
        objective_history: out.history,
        status: out.status,
        iterations: out.iterations,
    })
}

/// Grid argmin of the cascade objective over the bounds of `spec`, for modes with
/// at most two parameters.
pub fn grid_oracle(
    residual: &CascadeResidual,
    spec: &OptimizationSpec,
    resolution: usize,
) -> Result<(Vec<f64>, f64)> {
    let dim = residual.dimension();
    if dim > 2 {
        return Err(Error::UnsupportedMode(dim));
    }
    if resolution < 50 {
        return Err(Error::invalid(
            "grid oracle needs at least 50 points per axis",
        ));
    }
    let (lower, upper) = spec.bounds(dim)?;
    grid_search(
        |p: &[f64]| residual.objective(p),
        &lower,
        &upper,
        resolution,
    )
}

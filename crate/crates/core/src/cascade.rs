//! Cascade of third-order memoryless PAs with AWGN injected before each stage,
//! and its first-order equivalent-PA summary.
//!
//! Stage `k` maps its input `u` to `g_k * (u + alpha_k * u * |u|^2)`, where the
//! input is the previous stage output plus `sigma * w_k`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{NoiseRealization, Signal};

/// Largest `|alpha|` accepted by [`PaStage::new`].
pub const DEFAULT_ALPHA_LIMIT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaStage {
    pub alpha: Complex64,
    /// Linear amplification combined with the following connector loss.
    pub gain: f64,
}

impl PaStage {
    pub fn new(alpha: Complex64, gain: f64) -> Result<Self> {
        let stage = PaStage { alpha, gain };
        stage.validate()?;
        Ok(stage)
    }

    fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(Error::invalid(format!(
                "stage gain {} must be > 0",
                self.gain
            )));
        }
        if !(self.alpha.norm() <= DEFAULT_ALPHA_LIMIT) {
            return Err(Error::invalid(format!(
                "|alpha| = {} outside model-validity range {}",
                self.alpha.norm(),
                DEFAULT_ALPHA_LIMIT
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    pub stages: Vec<PaStage>,
    /// Noise standard deviation (total, complex) injected before each stage.
    pub sigma: f64,
    /// Input power `p0`, as average symbol energy.
    pub input_power: f64,
    /// Desired end-to-end linear gain `G`.
    pub reference_gain: f64,
    /// Half-width of the allowed gain interval around `G`, relative.
    pub epsilon: f64,
}

impl CascadeConfig {
    /// `k` identical stages.
    pub fn uniform(k: usize, alpha: Complex64, gain: f64, sigma: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("cascade needs at least one stage"));
        }
        let cfg = CascadeConfig {
            stages: vec![PaStage::new(alpha, gain)?; k],
            sigma,
            input_power: 1.0,
            reference_gain: 1.0,
            epsilon: 0.3,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn gains(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.gain).collect()
    }

    pub fn alphas(&self) -> Vec<Complex64> {
        self.stages.iter().map(|s| s.alpha).collect()
    }

    /// Replaces the stage gains, keeping the nonlinearity coefficients.
    pub fn with_gains(&self, gains: &[f64]) -> Result<Self> {
        if gains.len() != self.stages.len() {
            return Err(Error::invalid(format!(
                "{} gains for {} stages",
                gains.len(),
                self.stages.len()
            )));
        }
        let stages = self
            .stages
            .iter()
            .zip(gains)
            .map(|(s, &g)| PaStage::new(s.alpha, g))
            .collect::<Result<_>>()?;
        Ok(CascadeConfig {
            stages,
            ..self.clone()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::invalid("cascade needs at least one stage"));
        }
        for s in &self.stages {
            s.validate()?;
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma {} must be >= 0", self.sigma)));
        }
        if !(self.input_power > 0.0 && self.input_power <= 1.0) {
            return Err(Error::invalid(format!(
                "input power {} outside (0, 1]",
                self.input_power
            )));
        }
        if !(self.reference_gain > 0.0 && self.reference_gain.is_finite()) {
            return Err(Error::invalid("reference gain must be > 0"));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::invalid(format!(
                "epsilon {} outside [0, 1)",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Allowed gain interval `[(1 - eps) G, (1 + eps) G]`.
    pub fn gain_bounds(&self) -> (f64, f64) {
        (
            (1.0 - self.epsilon) * self.reference_gain,
            (1.0 + self.epsilon) * self.reference_gain,
        )
    }

    /// Whether every stage gain lies inside [`gain_bounds`](Self::gain_bounds).
    pub fn is_feasible(&self) -> bool {
        let (lo, hi) = self.gain_bounds();
        self.stages.iter().all(|s| s.gain >= lo && s.gain <= hi)
            && self.input_power > 0.0
            && self.input_power <= 1.0
    }
}

/// First-order summary `(g~, alpha~, sigma~)` of a cascade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalentPa {
    pub g_tilde: f64,
    pub alpha_tilde: Complex64,
    pub sigma_tilde: f64,
}

impl EquivalentPa {
    pub fn from_config(config: &CascadeConfig) -> Result<Self> {
        let gains = config.gains();
        Ok(EquivalentPa {
            g_tilde: equivalent_gain(&gains),
            alpha_tilde: equivalent_alpha(&gains, &config.alphas())?,
            sigma_tilde: equivalent_sigma(&gains, config.sigma),
        })
    }
}

/// Stage `k` was driven past the monotone region of the cubic model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityWarning {
    pub stage: usize,
    pub peak_input_power: f64,
    pub limit: f64,
}

impl std::fmt::Display for ValidityWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "stage {}: peak input power {:.4} exceeds x_max^2 = {:.4}; cubic model folds over",
            self.stage + 1,
            self.peak_input_power,
            self.limit
        )
    }
}

/// Output of [`cascade_forward`]: every stage output `y^(1..K)`.
#[derive(Debug, Clone)]
pub struct CascadeOutput {
    pub stage_outputs: Vec<Signal>,
    pub warnings: Vec<ValidityWarning>,
}

impl CascadeOutput {
    pub fn output(&self) -> &Signal {
        self.stage_outputs
            .last()
            .expect("cascade has at least one stage")
    }

    pub fn into_output(mut self) -> Signal {
        self.stage_outputs
            .pop()
            .expect("cascade has at least one stage")
    }
}

#[inline]
pub fn pa_nonlinearity(x: Complex64, alpha: Complex64) -> Complex64 {
    x + alpha * x * x.norm_sqr()
}

#[inline]
fn stage_sample(y: Complex64, stage: &PaStage, sigma: f64, w: Complex64) -> Complex64 {
    pa_nonlinearity(y + w * sigma, stage.alpha) * stage.gain
}

/// One PA stage: `g * f(y_prev + sigma * w)`.
pub fn stage_forward(
    y_prev: &Signal,
    stage: &PaStage,
    sigma: f64,
    noise_slice: &[Complex64],
) -> Result<Signal> {
    if noise_slice.len() != y_prev.len() {
        return Err(Error::invalid(format!(
            "noise length {} does not match signal length {}",
            noise_slice.len(),
            y_prev.len()
        )));
    }
    let out = y_prev
        .samples()
        .iter()
        .zip(noise_slice)
        .map(|(&y, &w)| stage_sample(y, stage, sigma, w))
        .collect();
    y_prev.with_samples(out)
}

fn check_cascade_inputs(
    x0: &Signal,
    config: &CascadeConfig,
    noise: &NoiseRealization,
) -> Result<()> {
    if config.stages.is_empty() {
        return Err(Error::invalid("cascade needs at least one stage"));
    }
    if noise.stages() < config.stages.len() {
        return Err(Error::invalid(format!(
            "noise has {} stage sequences, cascade has {} stages",
            noise.stages(),
            config.stages.len()
        )));
    }
    if noise.len() != x0.len() {
        return Err(Error::invalid(format!(
            "noise length {} does not match signal length {}",
            noise.len(),
            x0.len()
        )));
    }
    if !(config.sigma >= 0.0) {
        return Err(Error::invalid("sigma must be >= 0"));
    }
    Ok(())
}

/// Runs all `K` stages and keeps every intermediate output.
pub fn cascade_forward(
    x0: &Signal,
    config: &CascadeConfig,
    noise: &NoiseRealization,
) -> Result<CascadeOutput> {
    check_cascade_inputs(x0, config, noise)?;
    let mut stage_outputs: Vec<Signal> = Vec::with_capacity(config.stages.len());
    let mut warnings = Vec::new();
    for (k, stage) in config.stages.iter().enumerate() {
        let input = stage_outputs.last().unwrap_or(x0);
        if let Some(w) = validity_check(k, input, stage, config.sigma, noise.stage(k)) {
            warnings.push(w);
        }
        let y = stage_forward(input, stage, config.sigma, noise.stage(k))?;
        stage_outputs.push(y);
    }
    Ok(CascadeOutput {
        stage_outputs,
        warnings,
    })
}

fn validity_check(
    k: usize,
    input: &Signal,
    stage: &PaStage,
    sigma: f64,
    noise: &[Complex64],
) -> Option<ValidityWarning> {
    let limit = x_max(stage.alpha).ok()?.powi(2);
    let peak = input
        .samples()
        .iter()
        .zip(noise)
        .map(|(&y, &w)| (y + w * sigma).norm_sqr())
        .fold(0.0, f64::max);
    (peak > limit).then_some(ValidityWarning {
        stage: k,
        peak_input_power: peak,
        limit,
    })
}

/// Final output only; samplewise identical to [`cascade_forward`] without
/// holding the intermediate stages.
pub fn cascade_output(
    x0: &Signal,
    config: &CascadeConfig,
    noise: &NoiseRealization,
) -> Result<Signal> {
    check_cascade_inputs(x0, config, noise)?;
    let sigma = config.sigma;
    let out = x0
        .samples()
        .iter()
        .enumerate()
        .map(|(n, &x)| {
            config.stages.iter().enumerate().fold(x, |y, (k, stage)| {
                stage_sample(y, stage, sigma, noise.stage(k)[n])
            })
        })
        .collect();
    x0.with_samples(out)
}

pub fn equivalent_gain(gains: &[f64]) -> f64 {
    gains.iter().product()
}

/// `alpha_1 + sum_{k>=2} alpha_k * prod_{q<k} g_q^2`.
pub fn equivalent_alpha(gains: &[f64], alphas: &[Complex64]) -> Result<Complex64> {
    if gains.len() != alphas.len() || gains.is_empty() {
        return Err(Error::invalid(format!(
            "{} gains and {} alphas; need equal, nonzero lengths",
            gains.len(),
            alphas.len()
        )));
    }
    let mut weight = 1.0;
    let mut total = Complex64::new(0.0, 0.0);
    for (&g, &a) in gains.iter().zip(alphas) {
        total += a * weight;
        weight *= g * g;
    }
    Ok(total)
}

/// `sigma * sqrt(sum_k prod_{q>=k} g_q^2)`.
pub fn equivalent_sigma(gains: &[f64], sigma: f64) -> f64 {
    let mut tail = 1.0;
    let mut sum = 0.0;
    for &g in gains.iter().rev() {
        tail *= g * g;
        sum += tail;
    }
    sigma * sum.sqrt()
}

/// One-shot equivalent-PA model `g~ (x + alpha~ x |x|^2) + sigma~ w`.
/// Pass zeros as `noise_equiv` for the noise-free form.
pub fn approx_cascade_forward(
    x0: &Signal,
    config: &CascadeConfig,
    noise_equiv: &[Complex64],
) -> Result<Signal> {
    if noise_equiv.len() != x0.len() {
        return Err(Error::invalid(format!(
            "noise length {} does not match signal length {}",
            noise_equiv.len(),
            x0.len()
        )));
    }
    let eq = EquivalentPa::from_config(config)?;
    let out = x0
        .samples()
        .iter()
        .zip(noise_equiv)
        .map(|(&x, &w)| pa_nonlinearity(x, eq.alpha_tilde) * eq.g_tilde + w * eq.sigma_tilde)
        .collect();
    x0.with_samples(out)
}

/// Input magnitude at which `|f(x)|` peaks: `sqrt(1 / (3 |alpha|))`.
pub fn x_max(alpha: Complex64) -> Result<f64> {
    let mag = alpha.norm();
    if mag == 0.0 {
        return Err(Error::UndefinedSaturation);
    }
    Ok((1.0 / (3.0 * mag)).sqrt())
}

/// Stage gain that maps `x_max` back to magnitude `x_max`: `x_max / |f(x_max)|`.
pub fn scenario2_gain(alpha: Complex64) -> Result<f64> {
    let xm = x_max(alpha)?;
    let y = pa_nonlinearity(Complex64::new(xm, 0.0), alpha);
    Ok(xm / y.norm())
}

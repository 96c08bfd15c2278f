//! Excitation and noise generation.
//!
//! The excitation is a 16-QAM symbol stream with unit average symbol energy,
//! shaped by a unit-energy root-raised-cosine filter. Because the filter has
//! unit energy, the mean sample power of the shaped stream is `1 / oversampling`
//! per unit of symbol energy; [`unit_excitation`] pins that level exactly so
//! that scaling by `sqrt(p0)` yields an input whose symbol energy is `p0`.

use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ROLLOFF: f64 = 0.22;
pub const DEFAULT_OVERSAMPLING: usize = 8;
pub const DEFAULT_SPAN_SYMBOLS: usize = 16;
pub const DEFAULT_SYMBOLS: usize = 4096;

const QAM16_LEVELS: [f64; 4] = [-3.0, -1.0, 1.0, 3.0];
/// Average energy of the unnormalized {±1, ±3}² constellation.
const QAM16_ENERGY: f64 = 10.0;

/// Complex baseband sample sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    samples: Vec<Complex64>,
    oversampling: usize,
    symbol_count: usize,
    nominal_power: f64,
}

impl Signal {
    /// Wraps raw samples. The length must be a whole number of symbols.
    pub fn new(samples: Vec<Complex64>, oversampling: usize) -> Result<Self> {
        if oversampling == 0 {
            return Err(Error::invalid("oversampling must be at least 1"));
        }
        if samples.is_empty() || !samples.len().is_multiple_of(oversampling) {
            return Err(Error::invalid(format!(
                "signal length {} is not a positive multiple of oversampling {}",
                samples.len(),
                oversampling
            )));
        }
        let symbol_count = samples.len() / oversampling;
        let nominal_power = mean_power(&samples);
        Ok(Signal {
            samples,
            oversampling,
            symbol_count,
            nominal_power,
        })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn oversampling(&self) -> usize {
        self.oversampling
    }

    pub fn symbol_count(&self) -> usize {
        self.symbol_count
    }

    /// Mean `|x|^2` recorded at construction or after the last rescale.
    pub fn nominal_power(&self) -> f64 {
        self.nominal_power
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sum of `|x|^2`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Multiplies every sample by `factor`.
    pub fn scaled(&self, factor: Complex64) -> Signal {
        Signal {
            samples: self.samples.iter().map(|s| s * factor).collect(),
            oversampling: self.oversampling,
            symbol_count: self.symbol_count,
            nominal_power: self.nominal_power * factor.norm_sqr(),
        }
    }

    /// Same metadata, new samples. Lengths must match.
    pub fn with_samples(&self, samples: Vec<Complex64>) -> Result<Signal> {
        if samples.len() != self.samples.len() {
            return Err(Error::invalid(format!(
                "sample count {} does not match signal length {}",
                samples.len(),
                self.samples.len()
            )));
        }
        let nominal_power = mean_power(&samples);
        Ok(Signal {
            samples,
            oversampling: self.oversampling,
            symbol_count: self.symbol_count,
            nominal_power,
        })
    }
}

/// Frozen per-stage unit-variance AWGN.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    stage_noise: Vec<Vec<Complex64>>,
    seed: u64,
}

impl NoiseRealization {
    /// All-zero realization, for noise-free runs that still need the plumbing.
    pub fn silent(stages: usize, length: usize) -> Self {
        NoiseRealization {
            stage_noise: vec![vec![Complex64::new(0.0, 0.0); length]; stages],
            seed: 0,
        }
    }

    pub fn stages(&self) -> usize {
        self.stage_noise.len()
    }

    pub fn len(&self) -> usize {
        self.stage_noise.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stage(&self, k: usize) -> &[Complex64] {
        &self.stage_noise[k]
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

pub(crate) fn mean_power(samples: &[Complex64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64
}

/// Uniform 16-QAM symbols on the unnormalized {±1, ±3} × {±1, ±3} grid.
pub fn generate_qam16(symbol_count: usize, seed: u64) -> Result<Vec<Complex64>> {
    if symbol_count == 0 {
        return Err(Error::invalid("symbol_count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..symbol_count)
        .map(|_| {
            let bits = rng.next_u32();
            Complex64::new(
                QAM16_LEVELS[(bits & 3) as usize],
                QAM16_LEVELS[((bits >> 2) & 3) as usize],
            )
        })
        .collect())
}

/// Unit-energy root-raised-cosine taps spanning `span_symbols` symbols,
/// `span_symbols * oversampling + 1` taps long and centered on the middle tap.
pub fn rrc_taps(oversampling: usize, rolloff: f64, span_symbols: usize) -> Result<Vec<f64>> {
    check_shaping(oversampling, rolloff, span_symbols)?;
    let half = (span_symbols * oversampling / 2) as isize;
    let os = oversampling as f64;
    let beta = rolloff;
    let pi = std::f64::consts::PI;

    let mut taps: Vec<f64> = (-half..=half)
        .map(|i| {
            let t = i as f64 / os;
            if i == 0 {
                1.0 - beta + 4.0 * beta / pi
            } else if ((4.0 * beta * t).abs() - 1.0).abs() < 1e-12 {
                beta / 2f64.sqrt()
                    * ((1.0 + 2.0 / pi) * (pi / (4.0 * beta)).sin()
                        + (1.0 - 2.0 / pi) * (pi / (4.0 * beta)).cos())
            } else {
                let num =
                    (pi * t * (1.0 - beta)).sin() + 4.0 * beta * t * (pi * t * (1.0 + beta)).cos();
                let den = pi * t * (1.0 - (4.0 * beta * t).powi(2));
                num / den
            }
        })
        .collect();

    let norm = taps.iter().map(|h| h * h).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|h| *h /= norm);
    Ok(taps)
}

fn check_shaping(oversampling: usize, rolloff: f64, span_symbols: usize) -> Result<()> {
    if oversampling < 2 {
        return Err(Error::invalid(
            "oversampling must be at least 2 or the adjacent channel aliases",
        ));
    }
    if !(rolloff > 0.0 && rolloff <= 1.0) {
        return Err(Error::invalid(format!("rolloff {rolloff} outside (0, 1]")));
    }
    if span_symbols < 4 {
        return Err(Error::invalid("span_symbols must be at least 4"));
    }
    Ok(())
}

/// Zero-insertion upsampling followed by RRC filtering. The filter delay is
/// removed so sample `n * oversampling` sits on symbol `n`.
pub fn pulse_shape(
    symbols: &[Complex64],
    oversampling: usize,
    rolloff: f64,
    span_symbols: usize,
) -> Result<Signal> {
    let taps = rrc_taps(oversampling, rolloff, span_symbols)?;
    if symbols.is_empty() {
        return Err(Error::invalid("no symbols to shape"));
    }
    let len = symbols.len() * oversampling;
    let delay = (taps.len() - 1) / 2;
    let mut out = vec![Complex64::new(0.0, 0.0); len];

    for (j, &sym) in symbols.iter().enumerate() {
        // tap k lands on output index j*os + k - delay
        let base = (j * oversampling) as isize - delay as isize;
        let k_lo = (-base).max(0) as usize;
        let k_hi = ((len as isize - base).min(taps.len() as isize)).max(0) as usize;
        for k in k_lo..k_hi {
            out[(base + k as isize) as usize] += sym * taps[k];
        }
    }
    Signal::new(out, oversampling)
}

/// Rescales by one real factor so that mean `|x|^2` equals `target_power`.
pub fn normalize_power(signal: &Signal, target_power: f64) -> Result<Signal> {
    if !(target_power > 0.0 && target_power.is_finite()) {
        return Err(Error::invalid(format!(
            "target power {target_power} must be positive and finite"
        )));
    }
    let current = mean_power(&signal.samples);
    if current == 0.0 {
        return Err(Error::DegenerateSignal("all-zero signal".into()));
    }
    let factor = (target_power / current).sqrt();
    let mut out = signal.scaled(Complex64::new(factor, 0.0));
    out.nominal_power = target_power;
    Ok(out)
}

/// Shaped 16-QAM excitation with unit average symbol energy, i.e. mean
/// sample power exactly `1 / oversampling`.
pub fn unit_excitation(
    symbol_count: usize,
    oversampling: usize,
    rolloff: f64,
    span_symbols: usize,
    seed: u64,
) -> Result<Signal> {
    let scale = QAM16_ENERGY.sqrt().recip();
    let symbols: Vec<Complex64> = generate_qam16(symbol_count, seed)?
        .into_iter()
        .map(|s| s * scale)
        .collect();
    let shaped = pulse_shape(&symbols, oversampling, rolloff, span_symbols)?;
    normalize_power(&shaped, 1.0 / oversampling as f64)
}

/// Excitation whose average symbol energy is `symbol_energy` (the input
/// power `p0` of the cascade).
pub fn excitation_at(unit: &Signal, symbol_energy: f64) -> Result<Signal> {
    if !(symbol_energy > 0.0 && symbol_energy.is_finite()) {
        return Err(Error::invalid(format!(
            "input power {symbol_energy} must be positive and finite"
        )));
    }
    normalize_power(unit, symbol_energy / unit.oversampling() as f64)
}

/// `stages` independent sequences of circularly-symmetric complex Gaussian
/// samples with unit total variance.
pub fn draw_noise(stages: usize, length: usize, seed: u64) -> Result<NoiseRealization> {
    if stages == 0 || length == 0 {
        return Err(Error::invalid("stages and length must both be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let stage_noise = (0..stages)
        .map(|_| {
            (0..length)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re * scale, im * scale)
                })
                .collect()
        })
        .collect();
    Ok(NoiseRealization { stage_noise, seed })
}

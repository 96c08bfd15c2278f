//! Distortion metrics: NMSE, Welch PSD, ACLR and AM/AM scatter.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Signal;

/// Serialized stand-in for `-inf` dB ("below floor").
pub const DB_FLOOR: f64 = -300.0;

pub const DEFAULT_SEGMENT_LENGTH: usize = 1024;
pub const DEFAULT_OVERLAP: f64 = 0.5;

/// Clamps a dB value to [`DB_FLOOR`] so it stays finite in CSV/JSON.
pub fn db_for_output(db: f64) -> f64 {
    if db.is_nan() {
        db
    } else {
        db.max(DB_FLOOR)
    }
}

fn to_db(ratio: f64) -> f64 {
    if ratio == 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * ratio.log10()
    }
}

/// `10 log10( sum |d - a|^2 / sum |d|^2 )`; `-inf` when the signals match exactly.
pub fn nmse(desired: &Signal, actual: &Signal) -> Result<f64> {
    nmse_samples(desired.samples(), actual.samples())
}

pub fn nmse_samples(desired: &[Complex64], actual: &[Complex64]) -> Result<f64> {
    if desired.len() != actual.len() {
        return Err(Error::invalid(format!(
            "nmse: length {} vs {}",
            desired.len(),
            actual.len()
        )));
    }
    let reference: f64 = desired.iter().map(|d| d.norm_sqr()).sum();
    if reference == 0.0 {
        return Err(Error::DegenerateReference);
    }
    let residual: f64 = desired
        .iter()
        .zip(actual)
        .map(|(d, a)| (d - a).norm_sqr())
        .sum();
    Ok(to_db(residual / reference))
}

/// Averaged-periodogram PSD on a symbol-rate-normalized frequency axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    /// Frequencies in symbol rates, increasing, symmetric about 0.
    pub frequencies: Vec<f64>,
    /// Density in dB relative to [`peak_density`](Self::peak_density).
    pub power_density: Vec<f64>,
    pub segment_length: usize,
    pub overlap_fraction: f64,
    /// Largest linear density, power per unit symbol rate.
    pub peak_density: f64,
}

impl PsdEstimate {
    /// Absolute linear densities.
    pub fn linear(&self) -> Vec<f64> {
        self.power_density
            .iter()
            .map(|&db| self.peak_density * 10f64.powf(db / 10.0))
            .collect()
    }

    /// Integral of the density over the whole axis (mean signal power).
    pub fn total_power(&self) -> f64 {
        if self.frequencies.len() < 2 {
            return 0.0;
        }
        let df = self.frequencies[1] - self.frequencies[0];
        self.linear().iter().sum::<f64>() * df
    }
}

/// Welch estimate with a periodic Hann window.
///
/// For an even segment length the Nyquist bin is split evenly between
/// `-OS/2` and `+OS/2`, so the axis has `segment_length + 1` points.
pub fn estimate_psd(
    signal: &Signal,
    segment_length: usize,
    overlap_fraction: f64,
) -> Result<PsdEstimate> {
    if segment_length < 2 || segment_length > signal.len() {
        return Err(Error::invalid(format!(
            "segment length {} must be in 2..={}",
            segment_length,
            signal.len()
        )));
    }
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(Error::invalid(format!(
            "overlap {overlap_fraction} outside [0, 1)"
        )));
    }
    let l = segment_length;
    let step = ((l as f64 * (1.0 - overlap_fraction)).round() as usize).max(1);
    let window: Vec<f64> = (0..l)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / l as f64).cos())
        .collect();
    let window_energy: f64 = window.iter().map(|w| w * w).sum();

    let fft = FftPlanner::<f64>::new().plan_fft_forward(l);
    let mut buf = vec![Complex64::new(0.0, 0.0); l];
    let mut acc = vec![0.0; l];
    let samples = signal.samples();
    let mut segments = 0usize;
    let mut start = 0;
    while start + l <= samples.len() {
        for ((b, &x), &w) in buf.iter_mut().zip(&samples[start..start + l]).zip(&window) {
            *b = x * w;
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        segments += 1;
        start += step;
    }

    let fs = signal.oversampling() as f64;
    let scale = 1.0 / (segments as f64 * fs * window_energy);
    let df = fs / l as f64;

    // fftshift to ascending frequency
    let (frequencies, mut density): (Vec<f64>, Vec<f64>) = if l.is_multiple_of(2) {
        let half = l / 2;
        let mut f = Vec::with_capacity(l + 1);
        let mut p = Vec::with_capacity(l + 1);
        let nyquist = acc[half] * scale / 2.0;
        f.push(-(half as f64) * df);
        p.push(nyquist);
        for k in 1..half {
            f.push(-((half - k) as f64) * df);
            p.push(acc[l - (half - k)] * scale);
        }
        for k in 0..half {
            f.push(k as f64 * df);
            p.push(acc[k] * scale);
        }
        f.push(half as f64 * df);
        p.push(nyquist);
        (f, p)
    } else {
        let half = (l - 1) / 2;
        (0..l)
            .map(|i| {
                let k = i as isize - half as isize;
                let idx = k.rem_euclid(l as isize) as usize;
                (k as f64 * df, acc[idx] * scale)
            })
            .unzip()
    };

    let peak = density.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::DegenerateSignal(
            "all-zero signal has no spectrum".into(),
        ));
    }
    density.iter_mut().for_each(|p| *p = to_db(*p / peak));

    Ok(PsdEstimate {
        frequencies,
        power_density: density,
        segment_length: l,
        overlap_fraction,
        peak_density: peak,
    })
}

/// Main channel `[-B/2, B/2]` with adjacent channels of the same width at `±B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelPlan {
    /// Channel bandwidth in symbol rates.
    pub bandwidth: f64,
}

impl ChannelPlan {
    /// Occupied bandwidth `(1 + rolloff)` of an RRC-shaped signal.
    pub fn for_rolloff(rolloff: f64) -> Self {
        ChannelPlan {
            bandwidth: 1.0 + rolloff,
        }
    }
}

/// Worst adjacent-channel power over main-channel power, in dB.
pub fn aclr(psd: &PsdEstimate, plan: ChannelPlan) -> Result<f64> {
    let b = plan.bandwidth;
    if !(b > 0.0) {
        return Err(Error::invalid("channel bandwidth must be positive"));
    }
    let top = psd.frequencies.last().copied().unwrap_or(0.0);
    let bottom = psd.frequencies.first().copied().unwrap_or(0.0);
    if top < 1.5 * b || bottom > -1.5 * b {
        return Err(Error::invalid(format!(
            "PSD spans [{bottom}, {top}] symbol rates; need ±{}",
            1.5 * b
        )));
    }
    let (mut main, mut upper, mut lower) = (0.0, 0.0, 0.0);
    for (&f, &db) in psd.frequencies.iter().zip(&psd.power_density) {
        let p = 10f64.powf(db / 10.0);
        if f.abs() <= b / 2.0 {
            main += p;
        } else if f > b / 2.0 && f <= 1.5 * b {
            upper += p;
        } else if f < -b / 2.0 && f >= -1.5 * b {
            lower += p;
        }
    }
    if main == 0.0 {
        return Err(Error::DegenerateSignal(
            "no power in the main channel".into(),
        ));
    }
    Ok(to_db(upper.max(lower) / main))
}

/// `(|x_n|, |y_n|)` pairs, keeping every `stride`-th sample.
pub fn amam_points(input: &Signal, output: &Signal, stride: usize) -> Result<Vec<(f64, f64)>> {
    if input.len() != output.len() {
        return Err(Error::invalid(format!(
            "AM/AM: input length {} vs output length {}",
            input.len(),
            output.len()
        )));
    }
    let stride = stride.max(1);
    Ok(input
        .samples()
        .iter()
        .zip(output.samples())
        .step_by(stride)
        .map(|(x, y)| (x.norm(), y.norm()))
        .collect())
}

/// Estimator and channel settings shared by every report in a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSettings {
    pub segment_length: usize,
    pub overlap_fraction: f64,
    pub channel: ChannelPlan,
    pub amam_stride: usize,
}

impl MetricSettings {
    pub fn for_rolloff(rolloff: f64) -> Self {
        MetricSettings {
            segment_length: DEFAULT_SEGMENT_LENGTH,
            overlap_fraction: DEFAULT_OVERLAP,
            channel: ChannelPlan::for_rolloff(rolloff),
            amam_stride: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub nmse_db: f64,
    pub aclr_db: f64,
    pub psd: PsdEstimate,
    pub amam: Vec<(f64, f64)>,
}

impl MetricsReport {
    /// `desired` is the linear reference, `input` the cascade input used for AM/AM.
    pub fn compute(
        desired: &Signal,
        input: &Signal,
        output: &Signal,
        settings: &MetricSettings,
    ) -> Result<Self> {
        let psd = estimate_psd(output, settings.segment_length, settings.overlap_fraction)?;
        Ok(MetricsReport {
            nmse_db: nmse(desired, output)?,
            aclr_db: aclr(&psd, settings.channel)?,
            amam: amam_points(input, output, settings.amam_stride)?,
            psd,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{pa_nonlinearity, x_max};
    use crate::signal::{draw_noise, mean_power, unit_excitation};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn white(n: usize, os: usize, seed: u64) -> Signal {
        let w = draw_noise(1, n, seed).unwrap();
        Signal::new(w.stage(0).to_vec(), os).unwrap()
    }

    #[test]
    fn nmse_basics() {
        let x = unit_excitation(64, 8, 0.22, 16, 1).unwrap();
        assert_eq!(nmse(&x, &x).unwrap(), f64::NEG_INFINITY);
        let y = x.scaled(c(1.1, 0.0));
        assert!((nmse(&x, &y).unwrap() + 20.0).abs() < 1e-9);
        let zero = Signal::new(vec![c(0.0, 0.0); x.len()], 8).unwrap();
        assert!(matches!(nmse(&zero, &x), Err(Error::DegenerateReference)));
        assert!(nmse_samples(&x.samples()[1..], x.samples()).is_err());
    }

    #[test]
    fn floor_sentinel() {
        assert_eq!(db_for_output(f64::NEG_INFINITY), DB_FLOOR);
        assert_eq!(db_for_output(-12.5), -12.5);
        assert_eq!(db_for_output(-400.0), DB_FLOOR);
    }

    #[test]
    fn tone_lands_in_its_bin() {
        let os = 8;
        let n = 8192;
        let f0 = 1.3; // symbol rates
        let s: Vec<Complex64> = (0..n)
            .map(|i| {
                Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * f0 * i as f64 / os as f64)
            })
            .collect();
        let psd = estimate_psd(&Signal::new(s, os).unwrap(), 1024, 0.5).unwrap();
        let (i_peak, _) =
            psd.power_density
                .iter()
                .enumerate()
                .fold(
                    (0, f64::MIN),
                    |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc },
                );
        let df = os as f64 / 1024.0;
        assert!((psd.frequencies[i_peak] - f0).abs() <= df);
    }

    #[test]
    fn axis_is_symmetric_and_increasing() {
        let psd = estimate_psd(&white(4096, 8, 1), 1024, 0.5).unwrap();
        let f = &psd.frequencies;
        assert_eq!(f.len(), 1025);
        assert_eq!(f.len(), psd.power_density.len());
        assert!(f.windows(2).all(|w| w[1] > w[0]));
        for i in 0..f.len() {
            assert_eq!(f[i], -f[f.len() - 1 - i]);
        }
        assert_eq!(f[0], -4.0);
        let psd = estimate_psd(&white(4096, 8, 1), 1023, 0.5).unwrap();
        assert_eq!(psd.frequencies.len(), 1023);
        assert_eq!(psd.frequencies[511], 0.0);
    }

    #[test]
    fn white_noise_is_flat() {
        // 64 averaged segments without overlap
        let psd = estimate_psd(&white(64 * 1024, 8, 3), 1024, 0.0).unwrap();
        // smooth over 8 bins to compare levels rather than single-bin scatter
        let lin = psd.linear();
        let blocks: Vec<f64> = lin[1..1025]
            .chunks(8)
            .map(|c| c.iter().sum::<f64>() / 8.0)
            .collect();
        let hi = blocks.iter().cloned().fold(f64::MIN, f64::max);
        let lo = blocks.iter().cloned().fold(f64::MAX, f64::min);
        assert!(10.0 * (hi / lo).log10() < 2.0);
    }

    #[test]
    fn white_noise_aclr_near_zero() {
        let psd = estimate_psd(&white(32768, 8, 5), 1024, 0.5).unwrap();
        let a = aclr(&psd, ChannelPlan::for_rolloff(0.22)).unwrap();
        assert!(a.abs() < 0.5, "aclr {a}");
    }

    #[test]
    fn psd_parseval() {
        let x = unit_excitation(4096, 8, 0.22, 16, 7).unwrap();
        let psd = estimate_psd(&x, 1024, 0.5).unwrap();
        let ratio = psd.total_power() / mean_power(x.samples());
        assert!((ratio - 1.0).abs() < 0.02, "ratio {ratio}");
        let w = white(32768, 8, 2);
        let psd = estimate_psd(&w, 1024, 0.5).unwrap();
        assert!((psd.total_power() / mean_power(w.samples()) - 1.0).abs() < 0.02);
    }

    #[test]
    fn shaped_qam_band_edges() {
        let x = unit_excitation(4096, 8, 0.22, 16, 11).unwrap();
        let psd = estimate_psd(&x, 1024, 0.5).unwrap();
        let lin = psd.linear();
        let inband: Vec<f64> = psd
            .frequencies
            .iter()
            .zip(&lin)
            .filter(|(f, _)| f.abs() < 0.3)
            .map(|(_, p)| *p)
            .collect();
        let level = inband.iter().sum::<f64>() / inband.len() as f64;
        let half = level / 2.0;
        let pos = psd
            .frequencies
            .iter()
            .zip(&lin)
            .find(|(f, p)| **f > 0.3 && **p < half)
            .map(|(f, _)| *f)
            .unwrap();
        let neg = psd
            .frequencies
            .iter()
            .zip(&lin)
            .rev()
            .find(|(f, p)| **f < -0.3 && **p < half)
            .map(|(f, _)| *f)
            .unwrap();
        assert!((pos - 0.5).abs() < 0.03, "upper edge {pos}");
        assert!((neg + 0.5).abs() < 0.03, "lower edge {neg}");
    }

    #[test]
    fn shaped_signal_is_band_limited() {
        let x = unit_excitation(4096, 8, 0.22, 16, 13).unwrap();
        let psd = estimate_psd(&x, 1024, 0.5).unwrap();
        let lin = psd.linear();
        let edge = (1.0 + 0.22) / 2.0;
        let (mut inside, mut outside) = (0.0, 0.0);
        for (f, p) in psd.frequencies.iter().zip(&lin) {
            if f.abs() <= edge {
                inside += p;
            } else {
                outside += p;
            }
        }
        let frac = outside / (inside + outside);
        assert!(frac < 1e-4, "out-of-band fraction {frac}");
        assert!(10.0 * (outside / inside).log10() < -40.0);
    }

    #[test]
    fn ideal_band_limited_psd_has_no_leakage() {
        let frequencies: Vec<f64> = (-400..=400).map(|k| k as f64 / 100.0).collect();
        let power_density = frequencies
            .iter()
            .map(|f: &f64| {
                if f.abs() <= 0.6 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let psd = PsdEstimate {
            frequencies,
            power_density,
            segment_length: 801,
            overlap_fraction: 0.0,
            peak_density: 1.0,
        };
        assert_eq!(
            aclr(&psd, ChannelPlan::for_rolloff(0.22)).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn aclr_rejects_narrow_span() {
        let psd = estimate_psd(&white(4096, 2, 1), 256, 0.5).unwrap();
        assert!(aclr(&psd, ChannelPlan::for_rolloff(0.22)).is_err());
    }

    #[test]
    fn amam_linear_and_peak() {
        let x = unit_excitation(64, 8, 0.22, 16, 3).unwrap();
        let y = x.scaled(c(2.0, 0.0));
        for (a, b) in amam_points(&x, &y, 1).unwrap() {
            assert!((b - 2.0 * a).abs() < 1e-14);
        }
        assert_eq!(amam_points(&x, &y, 8).unwrap().len(), 64);

        let alpha = c(-0.25, 0.0);
        let mags: Vec<Complex64> = (0..20_000).map(|i| c(i as f64 * 1e-4, 0.0)).collect();
        let xin = Signal::new(mags.clone(), 2).unwrap();
        let yout =
            Signal::new(mags.iter().map(|&m| pa_nonlinearity(m, alpha)).collect(), 2).unwrap();
        let pts = amam_points(&xin, &yout, 1).unwrap();
        let peak = pts
            .iter()
            .fold((0.0, 0.0), |acc, &p| if p.1 > acc.1 { p } else { acc });
        assert!((peak.0 - x_max(alpha).unwrap()).abs() < 2e-4);
        assert!(amam_points(&xin, &x, 1).is_err());
    }

    proptest! {
        #[test]
        fn nmse_scale_invariant(seed in 0u64..500, re in -3.0f64..3.0, im in -3.0f64..3.0) {
            prop_assume!(re.abs() + im.abs() > 1e-3);
            let k = c(re, im);
            let a = white(256, 2, seed);
            let b = white(256, 2, seed + 1000);
            let base = nmse(&a, &b).unwrap();
            let scaled = nmse(&a.scaled(k), &b.scaled(k)).unwrap();
            prop_assert!((base - scaled).abs() < 1e-10);
        }
    }
}

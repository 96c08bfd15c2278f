//! Scenario and optimization sweeps over the cascade length, with CSV/JSON export.
//!
//! Every stochastic input is derived from `ExperimentConfig::seed`: the
//! excitation uses the seed itself, metric evaluation uses `seed + 1` and the
//! noise frozen inside each optimization uses `seed + 2`. Outputs therefore
//! regenerate byte for byte from the configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cascade::{cascade_forward, CascadeConfig, ValidityWarning, DEFAULT_ALPHA_LIMIT};
use crate::error::{Error, Result};
use crate::metrics::{db_for_output, MetricSettings, MetricsReport};
use crate::optimizer::{
    build_residual, solve, Mode, OptimizationResult, OptimizationSpec, ScenarioInit, Start,
};
use crate::signal::{draw_noise, unit_excitation, NoiseRealization, Signal, DEFAULT_SPAN_SYMBOLS};

const EVALUATION_SEED_OFFSET: u64 = 1;
const OPTIMIZATION_SEED_OFFSET: u64 = 2;

/// Sweep configuration. JSON keys mirror the field names; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Third-order coefficient shared by all stages, as `[re, im]`.
    pub alpha: Complex64,
    pub sigma_sq: f64,
    #[serde(rename = "G")]
    pub reference_gain: f64,
    pub epsilon: f64,
    #[serde(rename = "K_range")]
    pub k_range: Vec<usize>,
    pub symbols: usize,
    pub oversampling: usize,
    pub rolloff: f64,
    pub seed: u64,
    pub modes: Vec<Mode>,
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            alpha: Complex64::new(-0.33, 0.033),
            sigma_sq: 1e-5,
            reference_gain: 1.0,
            epsilon: 0.3,
            k_range: (1..=5).collect(),
            symbols: crate::signal::DEFAULT_SYMBOLS,
            oversampling: crate::signal::DEFAULT_OVERSAMPLING,
            rolloff: crate::signal::DEFAULT_ROLLOFF,
            seed: 1,
            modes: Mode::ALL.to_vec(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.alpha.norm() <= DEFAULT_ALPHA_LIMIT) {
            return bad(format!(
                "|alpha| = {} exceeds {DEFAULT_ALPHA_LIMIT}",
                self.alpha.norm()
            ));
        }
        if !(self.sigma_sq >= 0.0 && self.sigma_sq.is_finite()) {
            return bad(format!("sigma_sq {} must be >= 0", self.sigma_sq));
        }
        if !(self.reference_gain > 0.0 && self.reference_gain.is_finite()) {
            return bad(format!("G {} must be > 0", self.reference_gain));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return bad(format!("epsilon {} outside [0, 1)", self.epsilon));
        }
        if self.k_range.contains(&0) {
            return bad("K_range entries must be >= 1".into());
        }
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) {
            return bad(format!("rolloff {} outside (0, 1]", self.rolloff));
        }
        // ACLR needs +-1.5 channel widths inside +-OS/2
        if (self.oversampling as f64) < 3.0 * (1.0 + self.rolloff) {
            return bad(format!(
                "oversampling {} too low to hold the adjacent channels for rolloff {}",
                self.oversampling, self.rolloff
            ));
        }
        let settings = self.metric_settings();
        if self.symbols * self.oversampling < settings.segment_length {
            return bad(format!(
                "{} symbols give fewer samples than one PSD segment ({})",
                self.symbols, settings.segment_length
            ));
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_sq.sqrt()
    }

    pub fn metric_settings(&self) -> MetricSettings {
        let mut s = MetricSettings::for_rolloff(self.rolloff);
        s.amam_stride = self.oversampling;
        s
    }

    fn max_k(&self) -> usize {
        self.k_range.iter().copied().max().unwrap_or(0)
    }

    /// Cascade of `k` identical stages with gain `gain`, at full input power.
    pub fn cascade(&self, k: usize, gain: f64) -> Result<CascadeConfig> {
        let mut cfg = CascadeConfig::uniform(k, self.alpha, gain, self.sigma())?;
        cfg.reference_gain = self.reference_gain;
        cfg.epsilon = self.epsilon;
        cfg.input_power = 1.0;
        Ok(cfg)
    }
}

/// Frozen signals shared by every run of a sweep.
#[derive(Debug, Clone)]
pub struct Bench {
    pub x_unit: Signal,
    pub evaluation_noise: NoiseRealization,
    pub optimization_noise: NoiseRealization,
    pub settings: MetricSettings,
}

impl Bench {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let x_unit = unit_excitation(
            config.symbols,
            config.oversampling,
            config.rolloff,
            DEFAULT_SPAN_SYMBOLS,
            config.seed,
        )?;
        let stages = config.max_k().max(1);
        let n = x_unit.len();
        Ok(Bench {
            evaluation_noise: draw_noise(
                stages,
                n,
                config.seed.wrapping_add(EVALUATION_SEED_OFFSET),
            )?,
            optimization_noise: draw_noise(
                stages,
                n,
                config.seed.wrapping_add(OPTIMIZATION_SEED_OFFSET),
            )?,
            settings: config.metric_settings(),
            x_unit,
        })
    }

    /// `G * x_unit`.
    pub fn reference(&self, config: &ExperimentConfig) -> Signal {
        self.x_unit
            .scaled(Complex64::new(config.reference_gain, 0.0))
    }

    /// Metrics of `cascade` driven at input power `p0`, on the evaluation noise.
    pub fn evaluate(
        &self,
        config: &ExperimentConfig,
        cascade: &CascadeConfig,
        p0: f64,
    ) -> Result<(MetricsReport, Vec<ValidityWarning>)> {
        if !(p0 > 0.0 && p0.is_finite()) {
            return Err(Error::invalid(format!(
                "input power {p0} must be positive and finite"
            )));
        }
        let x0 = self.x_unit.scaled(Complex64::new(p0.sqrt(), 0.0));
        let out = cascade_forward(&x0, cascade, &self.evaluation_noise)?;
        let report =
            MetricsReport::compute(&self.reference(config), &x0, out.output(), &self.settings)?;
        Ok((report, out.warnings))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioRun {
    pub k: usize,
    pub scenario: u8,
    pub stage_gain: f64,
    pub metrics: MetricsReport,
    #[serde(skip)]
    pub warnings: Vec<ValidityWarning>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizationRun {
    /// Table label: the mode name, or `power-scenario{1,2}` for power-only runs.
    pub case: String,
    pub k: usize,
    pub mode: Mode,
    pub input_power: f64,
    pub gains: Vec<f64>,
    pub result: OptimizationResult,
    pub before: MetricsReport,
    pub after: MetricsReport,
    #[serde(skip)]
    pub warnings: Vec<ValidityWarning>,
}

#[derive(Debug, Clone, Default)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub scenarios: Vec<ScenarioRun>,
    pub optimizations: Vec<OptimizationRun>,
    /// Runs whose solver returned an error; the sweep carries on without them.
    pub failures: Vec<String>,
    pub timings: Vec<(String, Duration)>,
}

impl RunRecord {
    fn empty(config: &ExperimentConfig) -> Self {
        RunRecord {
            config: config.clone(),
            ..RunRecord::default()
        }
    }

    pub fn merge(&mut self, other: RunRecord) {
        self.scenarios.extend(other.scenarios);
        self.optimizations.extend(other.optimizations);
        self.failures.extend(other.failures);
        self.timings.extend(other.timings);
    }

    pub fn scenario(&self, k: usize, scenario: u8) -> Option<&ScenarioRun> {
        self.scenarios
            .iter()
            .find(|r| r.k == k && r.scenario == scenario)
    }

    pub fn optimization(&self, k: usize, case: &str) -> Option<&OptimizationRun> {
        self.optimizations
            .iter()
            .find(|r| r.k == k && r.case == case)
    }
}

/// Unoptimized cascades at `p0 = 1` for both starting scenarios.
pub fn run_scenarios(config: &ExperimentConfig) -> Result<RunRecord> {
    run_scenarios_for(config, &[ScenarioInit::One, ScenarioInit::Two])
}

pub fn run_scenarios_for(
    config: &ExperimentConfig,
    scenarios: &[ScenarioInit],
) -> Result<RunRecord> {
    let bench = Bench::new(config)?;
    run_scenarios_on(&bench, config, scenarios)
}

fn run_scenarios_on(
    bench: &Bench,
    config: &ExperimentConfig,
    scenarios: &[ScenarioInit],
) -> Result<RunRecord> {
    let mut record = RunRecord::empty(config);
    for &k in &config.k_range {
        for &scenario in scenarios {
            let started = Instant::now();
            let gain = scenario.stage_gain(config.alpha)?;
            let cascade = config.cascade(k, gain)?;
            let (metrics, warnings) = bench.evaluate(config, &cascade, 1.0)?;
            record.scenarios.push(ScenarioRun {
                k,
                scenario: scenario.number(),
                stage_gain: gain,
                metrics,
                warnings,
            });
            record.timings.push((
                format!("scenario{} K={k}", scenario.number()),
                started.elapsed(),
            ));
        }
    }
    Ok(record)
}

/// The optimization cases run for a mode: power-only is run from both
/// scenarios, every other mode from Scenario 1.
fn cases_for(mode: Mode) -> Vec<(String, ScenarioInit)> {
    match mode {
        Mode::PowerOnly => vec![
            ("power-scenario1".into(), ScenarioInit::One),
            ("power-scenario2".into(), ScenarioInit::Two),
        ],
        m => vec![(m.name().into(), ScenarioInit::One)],
    }
}

/// Solves every requested mode for every `K` and evaluates each optimum on
/// the evaluation noise.
pub fn run_optimizations(config: &ExperimentConfig) -> Result<RunRecord> {
    let bench = Bench::new(config)?;
    run_optimizations_on(&bench, config)
}

fn run_optimizations_on(bench: &Bench, config: &ExperimentConfig) -> Result<RunRecord> {
    let mut record = RunRecord::empty(config);
    for &k in &config.k_range {
        for &mode in &config.modes {
            for (case, scenario) in cases_for(mode) {
                let started = Instant::now();
                match optimize_case(bench, config, k, mode, &case, scenario) {
                    Ok(run) => record.optimizations.push(run),
                    Err(e) => record.failures.push(format!("{case} K={k}: {e}")),
                }
                record
                    .timings
                    .push((format!("{case} K={k}"), started.elapsed()));
            }
        }
    }
    Ok(record)
}

/// Solves one case on the optimization noise.
pub fn optimize_case(
    bench: &Bench,
    config: &ExperimentConfig,
    k: usize,
    mode: Mode,
    case: &str,
    scenario: ScenarioInit,
) -> Result<OptimizationRun> {
    // Gains the mode leaves alone come from the starting scenario.
    let base = config.cascade(k, scenario.stage_gain(config.alpha)?)?;
    let residual = build_residual(&bench.x_unit, &base, &bench.optimization_noise, mode)?;
    let spec = OptimizationSpec::new(mode, Start::Scenario(scenario), &base);
    let result = solve(&spec, &residual)?;

    let (before_p0, before_gains) = residual.unpack(
        &crate::optimizer::ResidualFunction::scenario_start(&residual, scenario)?,
    )?;
    let (before, _) = bench.evaluate(config, &base.with_gains(&before_gains)?, before_p0)?;

    let (input_power, gains) = residual.unpack(&result.parameters)?;
    let (after, warnings) = bench.evaluate(config, &base.with_gains(&gains)?, input_power)?;

    Ok(OptimizationRun {
        case: case.to_string(),
        k,
        mode,
        input_power,
        gains,
        result,
        before,
        after,
        warnings,
    })
}

/// Scenario sweep followed by the optimization sweep, sharing one bench.
pub fn run_sweep(config: &ExperimentConfig) -> Result<RunRecord> {
    let bench = Bench::new(config)?;
    let mut record = run_scenarios_on(&bench, config, &[ScenarioInit::One, ScenarioInit::Two])?;
    record.merge(run_optimizations_on(&bench, config)?);
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: serde_json::Value,
    pub seed: u64,
    pub files: Vec<FileDigest>,
    pub failures: Vec<String>,
}

impl Manifest {
    /// Digest over all listed file digests.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for f in &self.files {
            h.update(f.name.as_bytes());
            h.update(b"\0");
            h.update(f.sha256.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

fn fmt_db(v: f64) -> String {
    format!("{}", db_for_output(v))
}

fn amam_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("input_mag,output_mag\n");
    for (x, y) in points {
        let _ = writeln!(s, "{x},{y}");
    }
    s
}

fn psd_csv(report: &MetricsReport) -> String {
    let mut s = String::from("freq_symrate,psd_db\n");
    for (f, p) in report.psd.frequencies.iter().zip(&report.psd.power_density) {
        let _ = writeln!(s, "{f},{}", fmt_db(*p));
    }
    s
}

/// File name and content of every CSV for a record, in write order.
pub fn render_outputs(record: &RunRecord) -> Vec<(String, String)> {
    let mut files = Vec::new();

    for run in &record.scenarios {
        files.push((
            format!("amam_K{}_scenario{}.csv", run.k, run.scenario),
            amam_csv(&run.metrics.amam),
        ));
        files.push((
            format!("psd_K{}_scenario{}.csv", run.k, run.scenario),
            psd_csv(&run.metrics),
        ));
    }
    for run in record
        .optimizations
        .iter()
        .filter(|r| matches!(r.mode, Mode::JointEqualGains | Mode::JointUnequalGains))
    {
        files.push((
            format!("amam_K{}_{}.csv", run.k, run.case),
            amam_csv(&run.after.amam),
        ));
        files.push((
            format!("psd_K{}_{}.csv", run.k, run.case),
            psd_csv(&run.after),
        ));
    }

    if !record.scenarios.is_empty() || !record.optimizations.is_empty() {
        let mut s = String::from("K,scenario_or_mode,nmse_db,aclr_db\n");
        for run in &record.scenarios {
            let _ = writeln!(
                s,
                "{},scenario{},{},{}",
                run.k,
                run.scenario,
                fmt_db(run.metrics.nmse_db),
                fmt_db(run.metrics.aclr_db)
            );
        }
        for run in &record.optimizations {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                run.k,
                run.case,
                fmt_db(run.after.nmse_db),
                fmt_db(run.after.aclr_db)
            );
        }
        files.push(("metrics_vs_K.csv".into(), s));
    }

    if !record.optimizations.is_empty() {
        let mut power = String::from("case,K,p0\n");
        let mut gains = String::from("case,K,k,gain\n");
        for run in &record.optimizations {
            if run.mode.optimizes_power() {
                let _ = writeln!(power, "{},{},{}", run.case, run.k, run.input_power);
            }
            if run.mode.optimizes_gains() {
                for (i, g) in run.gains.iter().enumerate() {
                    let _ = writeln!(gains, "{},{},{},{}", run.case, run.k, i + 1, g);
                }
            }
        }
        files.push(("table_power.csv".into(), power));
        files.push(("table_gains.csv".into(), gains));
    }
    files
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the CSVs and `manifest.json` into `dir`. Files already written are
/// removed again if a later write fails.
pub fn emit_outputs(record: &RunRecord, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let mut digests = Vec::new();

    let write = |name: &str, content: &[u8], written: &mut Vec<PathBuf>| -> Result<()> {
        let path = dir.join(name);
        match fs::write(&path, content) {
            Ok(()) => {
                written.push(path);
                Ok(())
            }
            Err(e) => {
                for p in written.iter() {
                    let _ = fs::remove_file(p);
                }
                Err(Error::io(path, e))
            }
        }
    };

    for (name, content) in render_outputs(record) {
        write(&name, content.as_bytes(), &mut written)?;
        digests.push(FileDigest {
            sha256: sha256_hex(content.as_bytes()),
            bytes: content.len(),
            name,
        });
    }
    digests.sort_by(|a, b| a.name.cmp(&b.name));

    let manifest = Manifest {
        config: serde_json::to_value(&record.config).map_err(|e| Error::Config(e.to_string()))?,
        seed: record.config.seed,
        files: digests,
        failures: record.failures.clone(),
    };
    let mut text =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    write("manifest.json", text.as_bytes(), &mut written)?;
    Ok(manifest)
}

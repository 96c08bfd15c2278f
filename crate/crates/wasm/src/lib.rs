//! Browser bindings. Each exported function returns a JSON document; the
//! `*_json` functions carry the logic and are testable natively.

use pacascade::cascade::{x_max, EquivalentPa};
use pacascade::experiment::{optimize_case, Bench, ExperimentConfig};
use pacascade::metrics::MetricsReport;
use pacascade::{CascadeConfig, Complex64, Mode, ScenarioInit};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Demo signals are shorter than the library default to keep the page responsive.
pub const DEMO_SYMBOLS: usize = 1024;

#[derive(Serialize)]
struct Curves {
    amam: Vec<(f64, f64)>,
    freq: Vec<f64>,
    psd_db: Vec<f64>,
    nmse_db: f64,
    aclr_db: f64,
}

impl From<&MetricsReport> for Curves {
    fn from(m: &MetricsReport) -> Self {
        Curves {
            amam: m.amam.clone(),
            freq: m.psd.frequencies.clone(),
            psd_db: m.psd.power_density.iter().map(|&v| v.max(-300.0)).collect(),
            nmse_db: m.nmse_db.max(-300.0),
            aclr_db: m.aclr_db.max(-300.0),
        }
    }
}

#[derive(Serialize)]
struct SimulateResponse {
    k: usize,
    scenario: u8,
    stage_gain: f64,
    x_max: f64,
    warnings: Vec<String>,
    curves: Curves,
}

#[derive(Serialize)]
struct OptimizeResponse {
    k: usize,
    mode: Mode,
    p0: f64,
    gains: Vec<f64>,
    status: String,
    iterations: usize,
    objective_history: Vec<f64>,
    before: Curves,
    after: Curves,
}

#[derive(Serialize)]
struct EquivalentResponse {
    g_tilde: f64,
    alpha_tilde: (f64, f64),
    sigma_tilde: f64,
}

#[derive(Serialize)]
struct ErrorResponse {
    error: String,
}

fn to_json<T: Serialize>(result: Result<T, String>) -> String {
    let text = match &result {
        Ok(v) => serde_json::to_string(v),
        Err(e) => serde_json::to_string(&ErrorResponse { error: e.clone() }),
    };
    text.unwrap_or_else(|e| format!("{{\"error\":\"{e}\"}}"))
}

fn demo_config(
    alpha_re: f64,
    alpha_im: f64,
    k: usize,
    seed: u64,
) -> Result<ExperimentConfig, String> {
    let cfg = ExperimentConfig {
        alpha: Complex64::new(alpha_re, alpha_im),
        k_range: vec![k],
        symbols: DEMO_SYMBOLS,
        seed,
        ..ExperimentConfig::default()
    };
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn scenario(n: u8) -> Result<ScenarioInit, String> {
    match n {
        1 => Ok(ScenarioInit::One),
        2 => Ok(ScenarioInit::Two),
        _ => Err(format!("scenario must be 1 or 2, got {n}")),
    }
}

pub fn simulate_json(k: usize, scenario_no: u8, alpha_re: f64, alpha_im: f64, seed: u64) -> String {
    to_json((|| {
        let cfg = demo_config(alpha_re, alpha_im, k, seed)?;
        let s = scenario(scenario_no)?;
        let bench = Bench::new(&cfg).map_err(|e| e.to_string())?;
        let gain = s.stage_gain(cfg.alpha).map_err(|e| e.to_string())?;
        let cascade = cfg.cascade(k, gain).map_err(|e| e.to_string())?;
        let (metrics, warnings) = bench
            .evaluate(&cfg, &cascade, 1.0)
            .map_err(|e| e.to_string())?;
        Ok(SimulateResponse {
            k,
            scenario: scenario_no,
            stage_gain: gain,
            x_max: x_max(cfg.alpha).map_err(|e| e.to_string())?,
            warnings: warnings.iter().map(ToString::to_string).collect(),
            curves: Curves::from(&metrics),
        })
    })())
}

pub fn optimize_json(mode: &str, k: usize, alpha_re: f64, alpha_im: f64, seed: u64) -> String {
    to_json((|| {
        let mode: Mode = mode.parse().map_err(|e: pacascade::Error| e.to_string())?;
        let cfg = demo_config(alpha_re, alpha_im, k, seed)?;
        let bench = Bench::new(&cfg).map_err(|e| e.to_string())?;
        // Power-only starts from the scenario that actually needs back-off.
        let start = if mode == Mode::PowerOnly {
            ScenarioInit::Two
        } else {
            ScenarioInit::One
        };
        let run =
            optimize_case(&bench, &cfg, k, mode, mode.name(), start).map_err(|e| e.to_string())?;
        Ok(OptimizeResponse {
            k,
            mode,
            p0: run.input_power,
            gains: run.gains,
            status: format!("{:?}", run.result.status),
            iterations: run.result.iterations,
            objective_history: run.result.objective_history,
            before: Curves::from(&run.before),
            after: Curves::from(&run.after),
        })
    })())
}

pub fn equivalent_json(gains: &[f64], alpha_re: f64, alpha_im: f64, sigma: f64) -> String {
    to_json((|| {
        let cfg =
            CascadeConfig::uniform(gains.len(), Complex64::new(alpha_re, alpha_im), 1.0, sigma)
                .and_then(|c| c.with_gains(gains))
                .map_err(|e| e.to_string())?;
        let eq = EquivalentPa::from_config(&cfg).map_err(|e| e.to_string())?;
        Ok(EquivalentResponse {
            g_tilde: eq.g_tilde,
            alpha_tilde: (eq.alpha_tilde.re, eq.alpha_tilde.im),
            sigma_tilde: eq.sigma_tilde,
        })
    })())
}

#[wasm_bindgen]
pub fn simulate(k: usize, scenario: u8, alpha_re: f64, alpha_im: f64, seed: u32) -> String {
    simulate_json(k, scenario, alpha_re, alpha_im, u64::from(seed))
}

#[wasm_bindgen]
pub fn optimize(mode: &str, k: usize, alpha_re: f64, alpha_im: f64, seed: u32) -> String {
    optimize_json(mode, k, alpha_re, alpha_im, u64::from(seed))
}

#[wasm_bindgen]
pub fn equivalent(gains: Vec<f64>, alpha_re: f64, alpha_im: f64, sigma: f64) -> String {
    equivalent_json(&gains, alpha_re, alpha_im, sigma)
}

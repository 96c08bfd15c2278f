use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pacascade::experiment::{
    emit_outputs, run_optimizations, run_scenarios_for, run_sweep, RunRecord,
};
use pacascade::{Complex64, Error, ExperimentConfig, Mode, ScenarioInit};

const EXIT_CONFIG: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "pacascade",
    version,
    about = "Simulate and optimize cascades of third-order power amplifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one unoptimized cascade and export AM/AM, PSD and metrics.
    Simulate {
        #[arg(long, value_parser = parse_scenario)]
        scenario: ScenarioInit,
        #[arg(long = "K")]
        k: usize,
        #[command(flatten)]
        shared: Shared,
    },
    /// Optimize input power and/or gains for one cascade length.
    Optimize {
        #[arg(long)]
        mode: Mode,
        #[arg(long = "K")]
        k: usize,
        #[command(flatten)]
        shared: Shared,
    },
    /// Run scenarios and all configured optimization modes over K_range.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        shared: Shared,
    },
}

/// Overrides applied on top of the defaults (or of the sweep config file).
#[derive(Args, Debug, Default)]
struct Shared {
    #[arg(long, allow_hyphen_values = true)]
    alpha_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha_im: Option<f64>,
    #[arg(long)]
    sigma_sq: Option<f64>,
    #[arg(long = "G")]
    g: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    symbols: Option<usize>,
    #[arg(long)]
    oversampling: Option<usize>,
    #[arg(long)]
    rolloff: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Shared {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(re) = self.alpha_re {
            cfg.alpha = Complex64::new(re, cfg.alpha.im);
        }
        if let Some(im) = self.alpha_im {
            cfg.alpha = Complex64::new(cfg.alpha.re, im);
        }
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = &self.$field { cfg.$target = v.clone(); })*
            };
        }
        set!(sigma_sq => sigma_sq, g => reference_gain, epsilon => epsilon, symbols => symbols,
             oversampling => oversampling, rolloff => rolloff, seed => seed, out => output_dir);
    }
}

fn parse_scenario(s: &str) -> Result<ScenarioInit, String> {
    match s {
        "1" => Ok(ScenarioInit::One),
        "2" => Ok(ScenarioInit::Two),
        other => Err(format!("scenario must be 1 or 2, got {other:?}")),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn build(command: Command) -> Result<(ExperimentConfig, RunRecord), Error> {
    match command {
        Command::Simulate {
            scenario,
            k,
            shared,
        } => {
            let mut cfg = ExperimentConfig::default();
            shared.apply(&mut cfg);
            cfg.k_range = vec![k];
            cfg.validate()?;
            let record = run_scenarios_for(&cfg, &[scenario])?;
            Ok((cfg, record))
        }
        Command::Optimize { mode, k, shared } => {
            let mut cfg = ExperimentConfig::default();
            shared.apply(&mut cfg);
            cfg.k_range = vec![k];
            cfg.modes = vec![mode];
            cfg.validate()?;
            let record = run_optimizations(&cfg)?;
            Ok((cfg, record))
        }
        Command::Sweep { config, shared } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            shared.apply(&mut cfg);
            cfg.validate()?;
            let record = run_sweep(&cfg)?;
            Ok((cfg, record))
        }
    }
}

fn report(record: &RunRecord) {
    for run in &record.scenarios {
        for w in &run.warnings {
            eprintln!("warning: K={} scenario {}: {w}", run.k, run.scenario);
        }
        println!(
            "K={} scenario{}: NMSE {:.2} dB, ACLR {:.2} dB",
            run.k, run.scenario, run.metrics.nmse_db, run.metrics.aclr_db
        );
    }
    for run in &record.optimizations {
        for w in &run.warnings {
            eprintln!("warning: K={} {}: {w}", run.k, run.case);
        }
        let gains: Vec<String> = run.gains.iter().map(|g| format!("{g:.4}")).collect();
        println!(
            "K={} {}: p0 {:.4}, gains [{}], NMSE {:.2} -> {:.2} dB, ACLR {:.2} -> {:.2} dB, {:?} after {} iterations",
            run.k,
            run.case,
            run.input_power,
            gains.join(", "),
            run.before.nmse_db,
            run.after.nmse_db,
            run.before.aclr_db,
            run.after.aclr_db,
            run.result.status,
            run.result.iterations
        );
    }
    for f in &record.failures {
        eprintln!("error: solver failed for {f}");
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (cfg, record) = match build(cli.command) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    if cfg.k_range.is_empty() {
        eprintln!("warning: K_range is empty; only the manifest is written");
    }
    report(&record);
    if let Err(e) = emit_outputs(&record, &cfg.output_dir) {
        eprintln!("error: {e}");
        return ExitCode::from(exit_code(&e));
    }
    println!("wrote {}", cfg.output_dir.display());
    if record.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_SOLVER)
    }
}

//! Command-line experiment runner.
//!
//! Exit status: 0 on success, 2 for configuration or argument errors,
//! 3 when the output cannot be written, 1 for anything else.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmtls::config::{Config, ConfigError};
use mmtls::experiment::{plot_script, run_experiment, Estimator, ExperimentKind, ExperimentSpec};

#[derive(Parser, Debug)]
#[command(name = "mmtls", version, about = "Monte-Carlo experiments for robust joint SI/RT channel estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// LMS, TLS and MTLS learning curves on the impulse-noise testbench.
    Fig2(Common),
    /// Received, remote and post-cancellation power spectra.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Use a single trial instead of averaging.
        #[arg(long)]
        single_trial: bool,
    },
    /// Terminal RT misalignment of MMSE, MTLS and m-MTLS over SNR.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated SNR points in dB.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "0,10,20,30")]
        snr: Vec<f64>,
    },
    /// Misalignment and residual SI over ISR.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated ISR points in dB.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "20,30,40")]
        isr: Vec<f64>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Worker threads. Output does not depend on this.
    #[arg(long)]
    jobs: Option<usize>,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a matplotlib script that plots the CSV.
    #[arg(long)]
    plot_script: Option<PathBuf>,
    /// Comma-separated subset of lms, tls, mtls, mmtls, mmse.
    #[arg(long, value_delimiter = ',')]
    estimators: Vec<String>,
    #[command(flatten)]
    keys: KeyOverrides,
}

/// One flag per configuration key; these override the file.
#[derive(Args, Debug)]
struct KeyOverrides {
    #[arg(long = "si_len", alias = "si-len")]
    si_len: Option<String>,
    #[arg(long = "rt_len", alias = "rt-len")]
    rt_len: Option<String>,
    #[arg(long = "isr_db", alias = "isr-db", allow_negative_numbers = true)]
    isr_db: Option<String>,
    #[arg(long = "snr_db", alias = "snr-db", allow_negative_numbers = true)]
    snr_db: Option<String>,
    #[arg(long = "impulse_prob", alias = "impulse-prob")]
    impulse_prob: Option<String>,
    #[arg(long = "impulse_var_ratio", alias = "impulse-var-ratio")]
    impulse_var_ratio: Option<String>,
    #[arg(long)]
    ns: Option<String>,
    #[arg(long = "sample_rate_hz", alias = "sample-rate-hz")]
    sample_rate_hz: Option<String>,
    #[arg(long = "bandwidth_hz", alias = "bandwidth-hz")]
    bandwidth_hz: Option<String>,
    #[arg(long)]
    layers: Option<String>,
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long = "lambda_sigma", alias = "lambda-sigma")]
    lambda_sigma: Option<String>,
    #[arg(long)]
    nw: Option<String>,
    #[arg(long)]
    c1: Option<String>,
    #[arg(long = "exclude_first_layer", alias = "exclude-first-layer")]
    exclude_first_layer: Option<String>,
}

impl KeyOverrides {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        [
            ("si_len", &self.si_len),
            ("rt_len", &self.rt_len),
            ("isr_db", &self.isr_db),
            ("snr_db", &self.snr_db),
            ("impulse_prob", &self.impulse_prob),
            ("impulse_var_ratio", &self.impulse_var_ratio),
            ("ns", &self.ns),
            ("sample_rate_hz", &self.sample_rate_hz),
            ("bandwidth_hz", &self.bandwidth_hz),
            ("layers", &self.layers),
            ("mu", &self.mu),
            ("gamma", &self.gamma),
            ("lambda_sigma", &self.lambda_sigma),
            ("nw", &self.nw),
            ("c1", &self.c1),
            ("exclude_first_layer", &self.exclude_first_layer),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
        .collect()
    }
}

enum Failure {
    Usage(String),
    Output(String),
    Run(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Run(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Output(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Output(m) | Failure::Run(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(format!("config error: {e}"))
    }
}

fn load_config(common: &Common) -> Result<Config, Failure> {
    let mut cfg = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    for (key, value) in common.keys.pairs() {
        cfg.set(key, value, None)?;
    }
    if let Some(seed) = common.seed {
        cfg.scenario.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn build_spec(kind: ExperimentKind, common: &Common) -> Result<ExperimentSpec, Failure> {
    let mut spec = ExperimentSpec::new(kind, load_config(common)?);
    if common.trials == 0 {
        return Err(Failure::Usage("--trials must be at least 1".into()));
    }
    spec.trials = common.trials;
    spec.jobs = match common.jobs {
        Some(0) => return Err(Failure::Usage("--jobs must be at least 1".into())),
        Some(j) => j,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    spec.estimators = common
        .estimators
        .iter()
        .map(|s| s.parse::<Estimator>().map_err(|e| Failure::Usage(e.to_string())))
        .collect::<Result<_, _>>()?;
    Ok(spec)
}

fn create(path: &Path) -> Result<File, Failure> {
    File::create(path).map_err(|e| Failure::Output(format!("cannot write {}: {e}", path.display())))
}

fn write_all(mut sink: impl Write, text: &str, what: &str) -> Result<(), Failure> {
    sink.write_all(text.as_bytes())
        .and_then(|_| sink.flush())
        .map_err(|e| Failure::Output(format!("cannot write {what}: {e}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (kind, common) = match &cli.command {
        Command::Fig2(c) => (ExperimentKind::Fig2Impulse, c),
        Command::Spectrum { common, .. } => (ExperimentKind::Spectrum, common),
        Command::Compare { common, .. } => (ExperimentKind::NmsdCompare, common),
        Command::Sweep { common, .. } => (ExperimentKind::Sweep, common),
    };
    let mut spec = build_spec(kind, common)?;
    match &cli.command {
        Command::Spectrum { single_trial, .. } => spec.single_trial = *single_trial,
        Command::Compare { snr, .. } => spec.snr_points = snr.clone(),
        Command::Sweep { isr, .. } => spec.isr_points = isr.clone(),
        Command::Fig2(_) => {}
    }

    // Open outputs before the run so a bad path fails fast.
    let out_file = common.out.as_deref().map(create).transpose()?;
    let plot_file = common.plot_script.as_deref().map(create).transpose()?;

    let table = run_experiment(&spec).map_err(|e| match e {
        mmtls::Error::InvalidConfig(_) | mmtls::Error::InvalidArgument(_) => Failure::Usage(e.to_string()),
        other => Failure::Run(other.to_string()),
    })?;
    let csv = table.to_csv();
    match out_file {
        Some(f) => write_all(f, &csv, "output")?,
        None => write_all(io::stdout().lock(), &csv, "output")?,
    }
    if let Some(f) = plot_file {
        let csv_name = common.out.as_ref().map_or("results.csv".to_string(), |p| p.display().to_string());
        write_all(f, &plot_script(kind, &csv_name), "plot script")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("mmtls: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

//! Monte-Carlo experiment drivers and CSV tables.
//!
//! Trials run on a dedicated thread pool; results are collected in trial
//! order and reduced sequentially, so the output does not depend on the
//! number of worker threads. Misalignment is averaged over trials in linear
//! units and converted to dB afterwards.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::filters::{lms_step, mtls_step, tls_step, Algorithm, FilterState};
use crate::joint::{run_training, LayerStack};
use crate::metrics::{mmse_baseline, nmsd_ratio, to_db, welch_psd, DEFAULT_FLOOR_DB};
use crate::robust::{MEstimateConfig, MEstimateState};
use crate::scalar::dot;
use crate::sim::{fig2_testbench_with, gen_channels, synthesize, trial_rng, Fig2Config, SignalRecord};

/// Step size shared by LMS, TLS and MTLS on the impulse testbench.
pub const FIG2_REFERENCE_MU: f64 = 0.06;
/// Step size of every layer in the joint experiments.
pub const JOINT_REFERENCE_MU: f64 = 0.003;
/// Samples generated after training to measure cancellation.
pub const EVAL_LEN: usize = 8192;
pub const PSD_SEGMENT_LEN: usize = 256;
pub const PSD_OVERLAP: f64 = 0.5;

const STREAM_FIG2: u64 = 1;
const STREAM_JOINT: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    Fig2Impulse,
    Spectrum,
    NmsdCompare,
    Sweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Fig2Impulse => "fig2_impulse",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::NmsdCompare => "nmsd_compare",
            ExperimentKind::Sweep => "sweep",
        }
    }

    /// Estimators that have a column in this experiment's table.
    pub fn estimators(self) -> &'static [Estimator] {
        match self {
            ExperimentKind::Fig2Impulse => &[Estimator::Lms, Estimator::Tls, Estimator::Mtls],
            ExperimentKind::Spectrum => &[Estimator::Mmtls],
            ExperimentKind::NmsdCompare => &[Estimator::Mmse, Estimator::Mtls, Estimator::Mmtls],
            ExperimentKind::Sweep => &[Estimator::Mtls, Estimator::Mmtls],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Lms,
    Tls,
    Mtls,
    Mmtls,
    Mmse,
}

impl Estimator {
    pub fn column_tag(self) -> &'static str {
        match self {
            Estimator::Lms => "lms",
            Estimator::Tls => "tls",
            Estimator::Mtls => "mtls",
            Estimator::Mmtls => "mmtls",
            Estimator::Mmse => "mmse",
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "lms" => Ok(Estimator::Lms),
            "tls" => Ok(Estimator::Tls),
            "mtls" => Ok(Estimator::Mtls),
            "mmtls" => Ok(Estimator::Mmtls),
            "mmse" => Ok(Estimator::Mmse),
            _ => Err(Error::InvalidArgument(format!("unknown estimator `{s}`"))),
        }
    }
}

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub config: Config,
    pub trials: usize,
    /// Columns to emit. Empty means every estimator the experiment supports.
    pub estimators: Vec<Estimator>,
    /// Worker threads.
    pub jobs: usize,
    /// SNR points of `nmsd_compare`.
    pub snr_points: Vec<f64>,
    /// ISR points of `sweep`.
    pub isr_points: Vec<f64>,
    /// `spectrum` only: use trial 0 instead of averaging.
    pub single_trial: bool,
    /// Testbench of `fig2_impulse`; the scenario part of `config` is ignored there.
    pub fig2: Fig2Config,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, config: Config) -> Self {
        Self {
            kind,
            config,
            trials: 100,
            estimators: Vec::new(),
            jobs: 1,
            snr_points: vec![0.0, 10.0, 20.0, 30.0],
            isr_points: vec![20.0, 30.0, 40.0],
            single_trial: false,
            fig2: Fig2Config::default(),
        }
    }

    pub fn reference_mu(&self) -> f64 {
        match self.kind {
            ExperimentKind::Fig2Impulse => FIG2_REFERENCE_MU,
            _ => JOINT_REFERENCE_MU,
        }
    }

    pub fn mu(&self) -> f64 {
        self.config.mu_or(self.reference_mu())
    }

    fn selected(&self) -> Result<Vec<Estimator>> {
        let supported = self.kind.estimators();
        if self.estimators.is_empty() {
            return Ok(supported.to_vec());
        }
        for e in &self.estimators {
            if !supported.contains(e) {
                return Err(Error::InvalidArgument(format!(
                    "{} does not support estimator {}",
                    self.kind,
                    e.column_tag()
                )));
            }
        }
        Ok(supported.iter().copied().filter(|e| self.estimators.contains(e)).collect())
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.jobs == 0 {
            return Err(Error::InvalidArgument("jobs must be at least 1".into()));
        }
        self.config.validate().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        self.config.scenario.validate()
    }
}

/// A CSV table with `#` metadata lines in front of the header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub metadata: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for m in &self.metadata {
            let _ = writeln!(out, "# {m}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// Runs `f(trial)` for every trial on `jobs` threads, returning results in trial order.
pub fn run_trials<R, F>(trials: usize, jobs: usize, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(u64) -> Result<R> + Sync + Send,
{
    if jobs == 0 {
        return Err(Error::InvalidArgument("jobs must be at least 1".into()));
    }
    if jobs == 1 {
        return (0..trials as u64).map(&f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    pool.install(|| (0..trials as u64).into_par_iter().map(&f).collect())
}

/// Mean of linear values, in the order given.
pub fn mean_linear(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

pub fn db(linear: f64) -> f64 {
    to_db(linear, DEFAULT_FLOOR_DB)
}

/// Trial-averaged linear misalignment curves on the impulse testbench.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig2Curves {
    pub lms: Vec<f64>,
    pub tls: Vec<f64>,
    pub mtls: Vec<f64>,
}

impl Fig2Curves {
    pub fn curve(&self, estimator: Estimator) -> Option<&[f64]> {
        match estimator {
            Estimator::Lms => Some(&self.lms),
            Estimator::Tls => Some(&self.tls),
            Estimator::Mtls => Some(&self.mtls),
            _ => None,
        }
    }
}

struct Fig2Trial {
    lms: Vec<f64>,
    tls: Vec<f64>,
    mtls: Vec<f64>,
}

fn fig2_trial(cfg: &Fig2Config, mu: f64, gamma: f64, mest: MEstimateConfig<f64>, seed: u64, t: u64) -> Result<Fig2Trial> {
    let mut rng = trial_rng(seed, STREAM_FIG2, t);
    let tb = fig2_testbench_with::<f64, _>(cfg, &mut rng);
    let mut lms = FilterState::new(Algorithm::Lms, cfg.dim, mu, gamma)?;
    let mut tls = FilterState::new(Algorithm::Tls, cfg.dim, mu, gamma)?;
    let mut mtls = FilterState::new(Algorithm::Mtls, cfg.dim, mu, gamma)?;
    let mut mstate = MEstimateState::new(mest)?;
    let mut out = Fig2Trial {
        lms: Vec::with_capacity(cfg.horizon),
        tls: Vec::with_capacity(cfg.horizon),
        mtls: Vec::with_capacity(cfg.horizon),
    };
    for sample in &tb.samples {
        lms = lms_step(&lms, sample)?.0;
        tls = tls_step(&tls, sample)?.0;
        let step = mtls_step(&mtls, &mstate, sample)?;
        mtls = step.state;
        mstate = step.mstate;
        out.lms.push(nmsd_ratio(lms.weights(), &tb.truth)?);
        out.tls.push(nmsd_ratio(tls.weights(), &tb.truth)?);
        out.mtls.push(nmsd_ratio(mtls.weights(), &tb.truth)?);
    }
    Ok(out)
}

/// LMS, TLS and MTLS with a common step size on the impulse testbench.
/// `gamma` and `mest` configure TLS and MTLS.
pub fn fig2_curves(
    cfg: &Fig2Config,
    mu: f64,
    gamma: f64,
    mest: MEstimateConfig<f64>,
    seed: u64,
    trials: usize,
    jobs: usize,
) -> Result<Fig2Curves> {
    let per_trial = run_trials(trials, jobs, |t| fig2_trial(cfg, mu, gamma, mest, seed, t))?;
    let mut sums = Fig2Curves {
        lms: vec![0.0; cfg.horizon],
        tls: vec![0.0; cfg.horizon],
        mtls: vec![0.0; cfg.horizon],
    };
    for tr in &per_trial {
        for (acc, v) in [(&mut sums.lms, &tr.lms), (&mut sums.tls, &tr.tls), (&mut sums.mtls, &tr.mtls)] {
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x;
            }
        }
    }
    let scale = 1.0 / trials.max(1) as f64;
    for c in [&mut sums.lms, &mut sums.tls, &mut sums.mtls] {
        c.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(sums)
}

/// Reaction of a linear curve to a disturbance at index `at`: the peak rise
/// and the largest absolute excursion, both in dB, over `span` samples from
/// `at` on, relative to the mean of the `pre_len` samples before `at`.
pub fn disturbance_response(curve: &[f64], at: usize, pre_len: usize, span: usize) -> Result<(f64, f64)> {
    if pre_len == 0 || at < pre_len || at + span > curve.len() || span == 0 {
        return Err(Error::InvalidArgument(format!("window around {at} does not fit the curve")));
    }
    let pre = db(mean_linear(&curve[at - pre_len..at]));
    let after: Vec<f64> = curve[at..at + span].iter().map(|&v| db(v) - pre).collect();
    let rise = after.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let excursion = after.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((rise, excursion))
}

/// Per-trial result of a joint training run, all linear.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTrial {
    pub mmse: f64,
    /// Layer 1 alone, which is exactly a single-layer stack.
    pub mtls: f64,
    pub mmtls: f64,
    /// Residual SI power after layers `1..=l` on the evaluation segment.
    pub residual_si: Vec<f64>,
}

/// Trial-averaged joint results, linear.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPoint {
    pub mmse: f64,
    pub mtls: f64,
    pub mmtls: f64,
    pub residual_si: Vec<f64>,
}

pub fn aggregate_joint(trials: &[JointTrial]) -> JointPoint {
    let layers = trials.first().map_or(0, |t| t.residual_si.len());
    let col = |f: &dyn Fn(&JointTrial) -> f64| mean_linear(&trials.iter().map(f).collect::<Vec<_>>());
    JointPoint {
        mmse: col(&|t| t.mmse),
        mtls: col(&|t| t.mtls),
        mmtls: col(&|t| t.mmtls),
        residual_si: (0..layers).map(|l| col(&|t| t.residual_si[l])).collect(),
    }
}

/// Residual SI power `mean (s - sum_{k<=l} w_k^T i)^2` for every `l`, with
/// the clean local reference.
pub fn layer_residual_si(stack: &LayerStack<f64>, records: &[SignalRecord<f64>]) -> Result<Vec<f64>> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to evaluate".into()));
    }
    let n_si = stack.si_len();
    let mut cumulative = vec![0.0; n_si];
    let mut out = Vec::with_capacity(stack.num_layers());
    for layer in stack.layers() {
        for (c, &w) in cumulative.iter_mut().zip(layer.si_part(n_si)) {
            *c += w;
        }
        let power = records
            .iter()
            .map(|r| {
                let d = r.si_component - dot(&cumulative, &r.i_clean);
                d * d
            })
            .sum::<f64>()
            / records.len() as f64;
        out.push(power);
    }
    Ok(out)
}

fn build_stack(config: &Config, mu: f64) -> Result<LayerStack<f64>> {
    let sc = &config.scenario;
    LayerStack::new(sc.si_len, sc.rt_len, config.layers, config.layer_params(mu))?
        .excluding_first_layer(config.exclude_first_layer)
}

/// One joint trial. Channels and data depend only on the seed and trial
/// index, so scenarios differing in SNR or impulse rate share random numbers.
pub fn joint_trial(config: &Config, mu: f64, eval_len: usize, t: u64) -> Result<JointTrial> {
    let sc = &config.scenario;
    let mut rng = trial_rng(sc.seed, STREAM_JOINT, t);
    let channels = gen_channels::<f64, _>(sc, &mut rng)?;
    let records = synthesize(sc, &channels, sc.ns + eval_len, &mut rng)?;
    let (train, eval) = records.split_at(sc.ns);
    let stack = build_stack(config, mu)?;
    let trace = run_training(&stack, train, sc.ns, &channels.as_joint())?;
    let mmse = mmse_baseline(train, sc.si_len, sc.rt_len, sc.noise_variance())?;
    let residual_si = if eval.is_empty() { Vec::new() } else { layer_residual_si(&trace.final_stack, eval)? };
    Ok(JointTrial {
        mmse: nmsd_ratio(&mmse.rt_part, &channels.rt_taps)?,
        mtls: *trace.rt_misalignment_first_layer.last().expect("ns >= 1"),
        mmtls: *trace.rt_misalignment.last().expect("ns >= 1"),
        residual_si,
    })
}

pub fn joint_trials(config: &Config, mu: f64, eval_len: usize, trials: usize, jobs: usize) -> Result<Vec<JointTrial>> {
    run_trials(trials, jobs, |t| joint_trial(config, mu, eval_len, t))
}

pub fn joint_point(config: &Config, mu: f64, eval_len: usize, trials: usize, jobs: usize) -> Result<JointPoint> {
    Ok(aggregate_joint(&joint_trials(config, mu, eval_len, trials, jobs)?))
}

/// Trial-averaged one-sided densities on the evaluation segment after training.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub freqs_hz: Vec<f64>,
    /// Received signal.
    pub rx: Vec<f64>,
    /// Remote signal alone.
    pub rt: Vec<f64>,
    /// Remote signal plus receiver noise: what an SI-free receiver would see.
    pub rt_plus_noise: Vec<f64>,
    /// Received signal after subtracting the trained SI estimate.
    pub post_sic: Vec<f64>,
    pub rt_plus_noise_power: f64,
    pub post_sic_power: f64,
}

struct SpectrumTrial {
    freqs: Vec<f64>,
    densities: [Vec<f64>; 4],
    powers: [f64; 2],
}

fn spectrum_trial(config: &Config, mu: f64, t: u64) -> Result<SpectrumTrial> {
    let sc = &config.scenario;
    let mut rng = trial_rng(sc.seed, STREAM_JOINT, t);
    let channels = gen_channels::<f64, _>(sc, &mut rng)?;
    let records = synthesize(sc, &channels, sc.ns + EVAL_LEN, &mut rng)?;
    let (train, eval) = records.split_at(sc.ns);
    let trace = run_training(&build_stack(config, mu)?, train, sc.ns, &channels.as_joint())?;
    let w_hat = trace.final_stack.total_si_estimate();

    let rx: Vec<f64> = eval.iter().map(|r| r.y).collect();
    let rt: Vec<f64> = eval.iter().map(|r| r.rt_component).collect();
    let rtn: Vec<f64> = eval.iter().map(|r| r.rt_component + r.noise).collect();
    let post: Vec<f64> = eval.iter().map(|r| r.y - dot(&w_hat, &r.i_clean)).collect();
    let mean_sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;

    let mut freqs = Vec::new();
    let mut densities: [Vec<f64>; 4] = Default::default();
    for (slot, sig) in densities.iter_mut().zip([&rx, &rt, &rtn, &post]) {
        let spec = welch_psd(sig, sc.sample_rate_hz, PSD_SEGMENT_LEN, PSD_OVERLAP)?;
        freqs = spec.freqs_hz;
        *slot = spec.density;
    }
    Ok(SpectrumTrial { freqs, densities, powers: [mean_sq(&rtn), mean_sq(&post)] })
}

pub fn spectrum_result(config: &Config, mu: f64, trials: usize, jobs: usize) -> Result<SpectrumResult> {
    let per_trial = run_trials(trials, jobs, |t| spectrum_trial(config, mu, t))?;
    let bins = per_trial.first().map_or(0, |t| t.freqs.len());
    let mut sums: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; bins]);
    let mut powers = [0.0; 2];
    for tr in &per_trial {
        for (acc, d) in sums.iter_mut().zip(&tr.densities) {
            for (a, x) in acc.iter_mut().zip(d) {
                *a += x;
            }
        }
        powers[0] += tr.powers[0];
        powers[1] += tr.powers[1];
    }
    let scale = 1.0 / per_trial.len().max(1) as f64;
    let [rx, rt, rt_plus_noise, post_sic] = sums.map(|v| v.into_iter().map(|x| x * scale).collect::<Vec<_>>());
    Ok(SpectrumResult {
        freqs_hz: per_trial.first().map(|t| t.freqs.clone()).unwrap_or_default(),
        rx,
        rt,
        rt_plus_noise,
        post_sic,
        rt_plus_noise_power: powers[0] * scale,
        post_sic_power: powers[1] * scale,
    })
}

fn metadata(spec: &ExperimentSpec, mu: f64) -> Vec<String> {
    let mut meta = vec![
        format!("experiment = {}", spec.kind),
        format!("trials = {}", spec.trials),
    ];
    match spec.kind {
        ExperimentKind::Fig2Impulse => {
            let f = &spec.fig2;
            meta.push(format!(
                "testbench: dim = {}, horizon = {}, input_noise_var = {}, output_noise_var = {}, impulse_var = {}, impulse_times = {:?}",
                f.dim, f.horizon, f.input_noise_var, f.output_noise_var, f.impulse_var, f.impulse_times
            ));
        }
        ExperimentKind::Spectrum => {
            meta.push(format!(
                "evaluation: samples = {EVAL_LEN}, segment_len = {PSD_SEGMENT_LEN}, overlap = {PSD_OVERLAP}, single_trial = {}",
                spec.single_trial
            ));
            meta.push("psd_rt_db is the remote signal plus receiver noise".into());
        }
        ExperimentKind::NmsdCompare => meta.push(format!("snr_points = {:?}", spec.snr_points)),
        ExperimentKind::Sweep => meta.push(format!("isr_points = {:?}", spec.isr_points)),
    }
    meta.extend(spec.config.echo(mu).lines().map(str::to_string));
    meta
}

/// Runs an experiment and returns its table.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Table> {
    spec.validate()?;
    let selected = spec.selected()?;
    let mu = spec.mu();
    let cfg = &spec.config;
    let metadata = metadata(spec, mu);

    let (columns, rows) = match spec.kind {
        ExperimentKind::Fig2Impulse => {
            let curves =
                fig2_curves(&spec.fig2, mu, cfg.gamma, cfg.mest_config(), cfg.scenario.seed, spec.trials, spec.jobs)?;
            let mut columns = vec!["n".to_string()];
            columns.extend(selected.iter().map(|e| format!("nmsd_{}_db", e.column_tag())));
            let rows = (0..spec.fig2.horizon)
                .map(|n| {
                    let mut row = vec![n as f64];
                    row.extend(selected.iter().map(|&e| db(curves.curve(e).expect("supported")[n])));
                    row
                })
                .collect();
            (columns, rows)
        }
        ExperimentKind::Spectrum => {
            let trials = if spec.single_trial { 1 } else { spec.trials };
            let s = spectrum_result(cfg, mu, trials, spec.jobs)?;
            let columns = ["freq_hz", "psd_rx_db", "psd_rt_db", "psd_post_sic_db"].map(String::from).to_vec();
            let rows = (0..s.freqs_hz.len())
                .map(|k| vec![s.freqs_hz[k], db(s.rx[k]), db(s.rt_plus_noise[k]), db(s.post_sic[k])])
                .collect();
            (columns, rows)
        }
        ExperimentKind::NmsdCompare => {
            let mut columns = vec!["snr_db".to_string()];
            columns.extend(selected.iter().map(|e| format!("nmsd_{}_db", e.column_tag())));
            let mut rows = Vec::with_capacity(spec.snr_points.len());
            for &snr in &spec.snr_points {
                let mut point_cfg = cfg.clone();
                point_cfg.scenario.snr_db = snr;
                let p = joint_point(&point_cfg, mu, 0, spec.trials, spec.jobs)?;
                let mut row = vec![snr];
                row.extend(selected.iter().map(|e| match e {
                    Estimator::Mmse => db(p.mmse),
                    Estimator::Mtls => db(p.mtls),
                    _ => db(p.mmtls),
                }));
                rows.push(row);
            }
            (columns, rows)
        }
        ExperimentKind::Sweep => {
            let mut columns = vec!["isr_db".to_string()];
            columns.extend(selected.iter().map(|e| format!("nmsd_{}_db", e.column_tag())));
            columns.push("residual_si_db".to_string());
            let mut rows = Vec::with_capacity(spec.isr_points.len());
            for &isr in &spec.isr_points {
                let mut point_cfg = cfg.clone();
                point_cfg.scenario.isr_db = isr;
                let p = joint_point(&point_cfg, mu, EVAL_LEN / 4, spec.trials, spec.jobs)?;
                let mut row = vec![isr];
                row.extend(selected.iter().map(|e| if *e == Estimator::Mtls { db(p.mtls) } else { db(p.mmtls) }));
                row.push(db(*p.residual_si.last().expect("at least one layer")));
                rows.push(row);
            }
            (columns, rows)
        }
    };
    Ok(Table { metadata, columns, rows })
}

/// Python/matplotlib script that plots the CSV written for `kind`.
pub fn plot_script(kind: ExperimentKind, csv_path: &str) -> String {
    let (xlabel, ylabel) = match kind {
        ExperimentKind::Fig2Impulse => ("iteration n", "NMSD (dB)"),
        ExperimentKind::Spectrum => ("frequency (Hz)", "PSD (dB/Hz)"),
        ExperimentKind::NmsdCompare => ("SNR (dB)", "NMSD (dB)"),
        ExperimentKind::Sweep => ("ISR (dB)", "dB"),
    };
    let marker = if matches!(kind, ExperimentKind::NmsdCompare | ExperimentKind::Sweep) { "o-" } else { "-" };
    format!(
        r##"import csv
import matplotlib.pyplot as plt

with open({csv_path:?}) as f:
    rows = [r for r in csv.reader(f) if r and not r[0].startswith("#")]
header, data = rows[0], [[float(v) for v in r] for r in rows[1:]]
x = [r[0] for r in data]
for j, name in enumerate(header[1:], start=1):
    plt.plot(x, [r[j] for r in data], "{marker}", label=name)
plt.xlabel("{xlabel}")
plt.ylabel("{ylabel}")
plt.title("{kind}")
plt.grid(True)
plt.legend()
plt.show()
"##
    )
}

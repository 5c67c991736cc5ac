//! Scenario synthesis for the full-duplex receiver and the impulse-noise
//! system-identification testbench.
//!
//! Received sample: `y(n) = w^T i(n) + h^T x(n) + v_a(n) + v_i(n)`, where
//! `i(n)` and `x(n)` are sliding windows over the local and remote BPSK
//! streams. The estimator is handed `i(n) + v_b(n)`; the SI itself is formed
//! from the clean window.
//!
//! Channel energy convention: the SI channel is normalised to `||w||^2 = 1`
//! (unit SI power for unit-power BPSK) and `h` is scaled so that
//! `||w||^2 / ||h||^2` equals the configured ISR exactly. SNR is taken
//! against the SI power, so `sigma_a^2 = 10^(-snr_db/10)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::filters::RegressionSample;
use crate::joint::{JointChannelEstimate, JointObservation};
use crate::scalar::{dot, norm_sqr, Real};

/// Scenario parameters. Defaults follow the reference receiver setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarScenario {
    pub si_len: usize,
    pub rt_len: usize,
    pub isr_db: f64,
    pub snr_db: f64,
    pub impulse_prob: f64,
    /// Impulse variance relative to the Gaussian noise variance.
    pub impulse_var_ratio: f64,
    /// Training length.
    pub ns: usize,
    pub sample_rate_hz: f64,
    pub bandwidth_hz: f64,
    pub seed: u64,
}

impl Default for StarScenario {
    fn default() -> Self {
        Self {
            si_len: 4,
            rt_len: 10,
            isr_db: 20.0,
            snr_db: 20.0,
            impulse_prob: 0.01,
            impulse_var_ratio: 100.0,
            ns: 1000,
            sample_rate_hz: 10_000.0,
            bandwidth_hz: 5_000.0,
            seed: 1,
        }
    }
}

impl StarScenario {
    pub fn validate(&self) -> Result<()> {
        if self.si_len == 0 || self.rt_len == 0 {
            return Err(Error::InvalidConfig("channel lengths must be at least 1".into()));
        }
        if self.ns == 0 {
            return Err(Error::InvalidConfig("training length must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.impulse_prob) {
            return Err(Error::InvalidConfig(format!(
                "impulse probability must lie in [0, 1], got {}",
                self.impulse_prob
            )));
        }
        if !(self.impulse_var_ratio > 0.0) || !self.impulse_var_ratio.is_finite() {
            return Err(Error::InvalidConfig("impulse variance ratio must be positive".into()));
        }
        if !self.isr_db.is_finite() || !self.snr_db.is_finite() {
            return Err(Error::InvalidConfig("ISR and SNR must be finite".into()));
        }
        if !(self.sample_rate_hz > 0.0) || !(self.bandwidth_hz > 0.0) {
            return Err(Error::InvalidConfig("sample rate and bandwidth must be positive".into()));
        }
        Ok(())
    }

    pub fn isr_linear(&self) -> f64 {
        10f64.powf(self.isr_db / 10.0)
    }

    /// Gaussian noise variance `sigma_a^2` for unit SI power. The local
    /// reference noise uses the same variance.
    pub fn noise_variance(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }
}

/// True channel taps of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization<T> {
    pub si_taps: Vec<T>,
    pub rt_taps: Vec<T>,
}

impl<T: Real> ChannelRealization<T> {
    pub fn as_joint(&self) -> JointChannelEstimate<T> {
        JointChannelEstimate::new(self.si_taps.clone(), self.rt_taps.clone())
    }

    pub fn zeros(si_len: usize, rt_len: usize) -> Self {
        Self { si_taps: vec![T::zero(); si_len], rt_taps: vec![T::zero(); rt_len] }
    }
}

/// One received sample plus the hidden quantities that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord<T> {
    pub y: T,
    /// Local reference window as delivered to the estimator (noisy).
    pub i_vec: Vec<T>,
    /// Clean local reference window; hidden truth.
    pub i_clean: Vec<T>,
    pub x_vec: Vec<T>,
    pub si_component: T,
    pub rt_component: T,
    /// Gaussian plus impulse noise on `y`.
    pub noise: T,
}

impl<T: Real> JointObservation<T> for SignalRecord<T> {
    fn observation(&self) -> T {
        self.y
    }
    fn local_ref(&self) -> &[T] {
        &self.i_vec
    }
    fn remote_ref(&self) -> &[T] {
        &self.x_vec
    }
}

fn normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T
where
    StandardNormal: Distribution<T>,
{
    StandardNormal.sample(rng)
}

/// I.i.d. equiprobable `+-1` symbols.
pub fn gen_bpsk<T: Real, R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<T> {
    (0..count)
        .map(|_| if rng.random::<bool>() { T::one() } else { -T::one() })
        .collect()
}

fn gaussian_taps<T: Real, R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<T>
where
    StandardNormal: Distribution<T>,
{
    loop {
        let taps: Vec<T> = (0..len).map(|_| normal(rng)).collect();
        if norm_sqr(&taps) > T::zero() {
            return taps;
        }
    }
}

fn scale_to_energy<T: Real>(taps: &mut [T], energy: T) {
    let k = (energy / norm_sqr(taps)).sqrt();
    taps.iter_mut().for_each(|t| *t = *t * k);
}

/// Gaussian SI and RT taps with `||w||^2 = 1` and `||w||^2 / ||h||^2` equal to the ISR.
pub fn gen_channels<T: Real, R: Rng + ?Sized>(scenario: &StarScenario, rng: &mut R) -> Result<ChannelRealization<T>>
where
    StandardNormal: Distribution<T>,
{
    scenario.validate()?;
    let mut si_taps = gaussian_taps(scenario.si_len, rng);
    let mut rt_taps = gaussian_taps(scenario.rt_len, rng);
    scale_to_energy(&mut si_taps, T::one());
    scale_to_energy(&mut rt_taps, T::lit(1.0 / scenario.isr_linear()));
    Ok(ChannelRealization { si_taps, rt_taps })
}

/// Additive noise on the received signal, split into its two parts.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseStreams<T> {
    pub gaussian: Vec<T>,
    /// Bernoulli-Gaussian impulses; zero where no impulse occurred.
    pub impulses: Vec<T>,
}

/// Gaussian noise of variance `sigma_a^2` and Bernoulli-Gaussian impulses
/// with occurrence probability `Pi` and variance `impulse_var_ratio * sigma_a^2`.
///
/// Random draws per sample are the same whatever `Pi` and the SNR are, so
/// scenarios that only differ in those see common random numbers.
pub fn gen_noise<T: Real, R: Rng + ?Sized>(count: usize, scenario: &StarScenario, rng: &mut R) -> NoiseStreams<T>
where
    StandardNormal: Distribution<T>,
{
    let sigma = T::lit(scenario.noise_variance().sqrt());
    let impulse_sigma = sigma * T::lit(scenario.impulse_var_ratio.sqrt());
    let mut gaussian = Vec::with_capacity(count);
    let mut impulses = Vec::with_capacity(count);
    for _ in 0..count {
        gaussian.push(sigma * normal::<T, _>(rng));
        let hit = rng.random::<f64>() < scenario.impulse_prob;
        let g: T = normal(rng);
        impulses.push(if hit { impulse_sigma * g } else { T::zero() });
    }
    NoiseStreams { gaussian, impulses }
}

/// Window `[s(n), s(n-1), ..., s(n-len+1)]` over a stream that carries
/// `len - 1` symbols of history in front.
fn window<T: Copy>(stream: &[T], n: usize, len: usize) -> Vec<T> {
    let newest = n + len - 1;
    (0..len).map(|k| stream[newest - k]).collect()
}

/// Generates `count` received samples for the given channels.
pub fn synthesize<T: Real, R: Rng + ?Sized>(
    scenario: &StarScenario,
    channels: &ChannelRealization<T>,
    count: usize,
    rng: &mut R,
) -> Result<Vec<SignalRecord<T>>>
where
    StandardNormal: Distribution<T>,
{
    scenario.validate()?;
    let (n_si, n_rt) = (scenario.si_len, scenario.rt_len);
    if channels.si_taps.len() != n_si || channels.rt_taps.len() != n_rt {
        return Err(Error::InvalidArgument("channel lengths do not match the scenario".into()));
    }
    let local: Vec<T> = gen_bpsk(count + n_si - 1, rng);
    let remote: Vec<T> = gen_bpsk(count + n_rt - 1, rng);
    let ref_sigma = T::lit(scenario.noise_variance().sqrt());
    let local_noisy: Vec<T> = local.iter().map(|&a| a + ref_sigma * normal::<T, _>(rng)).collect();
    let noise = gen_noise::<T, _>(count, scenario, rng);

    Ok((0..count)
        .map(|n| {
            let i_clean = window(&local, n, n_si);
            let i_vec = window(&local_noisy, n, n_si);
            let x_vec = window(&remote, n, n_rt);
            let si_component = dot(&channels.si_taps, &i_clean);
            let rt_component = dot(&channels.rt_taps, &x_vec);
            let v = noise.gaussian[n] + noise.impulses[n];
            SignalRecord {
                y: si_component + rt_component + v,
                i_vec,
                i_clean,
                x_vec,
                si_component,
                rt_component,
                noise: v,
            }
        })
        .collect())
}

/// Impulse-noise system-identification setup.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig2Config {
    pub dim: usize,
    pub horizon: usize,
    pub input_noise_var: f64,
    pub output_noise_var: f64,
    pub impulse_var: f64,
    pub impulse_times: Vec<usize>,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Self {
            dim: 10,
            horizon: 4000,
            input_noise_var: 0.1,
            output_noise_var: 0.1,
            impulse_var: 10.0,
            impulse_times: vec![1000, 1500, 2000, 3000],
        }
    }
}

/// Generated testbench data. `samples[n]` carries time index `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig2Testbench<T> {
    pub samples: Vec<RegressionSample<T>>,
    pub truth: Vec<T>,
    /// Per-symbol perturbation of the input stream (hidden truth).
    pub input_noise: Vec<T>,
    /// Total output perturbation per sample, impulses included (hidden truth).
    pub output_noise: Vec<T>,
}

/// Unknown unit-energy system of length `dim` driven by a white Gaussian
/// tapped-delay-line input. Both input and output are observed in Gaussian
/// noise; the output also receives impulses at fixed instants.
pub fn fig2_testbench_with<T: Real, R: Rng + ?Sized>(config: &Fig2Config, rng: &mut R) -> Fig2Testbench<T>
where
    StandardNormal: Distribution<T>,
{
    let mut truth = gaussian_taps(config.dim, rng);
    scale_to_energy(&mut truth, T::one());

    let stream_len = config.horizon + config.dim - 1;
    let clean: Vec<T> = (0..stream_len).map(|_| normal(rng)).collect();
    let in_sigma = T::lit(config.input_noise_var.sqrt());
    let input_noise: Vec<T> = (0..stream_len).map(|_| in_sigma * normal::<T, _>(rng)).collect();
    let noisy: Vec<T> = clean.iter().zip(&input_noise).map(|(&a, &b)| a + b).collect();

    let out_sigma = T::lit(config.output_noise_var.sqrt());
    let imp_sigma = T::lit(config.impulse_var.sqrt());
    let mut output_noise = Vec::with_capacity(config.horizon);
    let samples = (0..config.horizon)
        .map(|n| {
            let x = window(&clean, n, config.dim);
            let mut v = out_sigma * normal::<T, _>(rng);
            let g: T = normal(rng);
            if config.impulse_times.contains(&n) {
                v = v + imp_sigma * g;
            }
            output_noise.push(v);
            RegressionSample::new(window(&noisy, n, config.dim), dot(&truth, &x) + v, n as u64)
        })
        .collect();
    Fig2Testbench { samples, truth, input_noise, output_noise }
}

/// The default testbench: length 10, noise variances 0.1, impulses of
/// variance 10 at n = 1000, 1500, 2000, 3000 over 4000 samples.
pub fn fig2_testbench<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Fig2Testbench<T>
where
    StandardNormal: Distribution<T>,
{
    fig2_testbench_with(&Fig2Config::default(), rng)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` in stream `stream` derived from a base seed.
pub fn trial_seed(base: u64, stream: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ stream) ^ trial)
}

pub fn trial_rng(base: u64, stream: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trial_seed(base, stream, trial))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn bpsk_alphabet_and_moments() {
        assert!(gen_bpsk::<f64, _>(0, &mut rng(1)).is_empty());
        let s: Vec<f64> = gen_bpsk(100_000, &mut rng(2));
        assert!(s.iter().all(|&v| v == 1.0 || v == -1.0));
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let power = s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64;
        assert!(mean.abs() < 0.02);
        assert_eq!(power, 1.0);
    }

    #[test]
    fn channel_energy_ratio_is_exact() {
        for isr in [0.0, 20.0, 40.0] {
            let sc = StarScenario { isr_db: isr, ..Default::default() };
            let ch: ChannelRealization<f64> = gen_channels(&sc, &mut rng(3)).unwrap();
            assert_eq!(ch.si_taps.len(), 4);
            assert_eq!(ch.rt_taps.len(), 10);
            let ratio = norm_sqr(&ch.si_taps) / norm_sqr(&ch.rt_taps);
            assert!((ratio / 10f64.powf(isr / 10.0) - 1.0).abs() < 1e-12);
            assert!((norm_sqr(&ch.si_taps) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn snr_does_not_touch_channels() {
        let a: ChannelRealization<f64> =
            gen_channels(&StarScenario { snr_db: 0.0, ..Default::default() }, &mut rng(4)).unwrap();
        let b: ChannelRealization<f64> =
            gen_channels(&StarScenario { snr_db: 30.0, ..Default::default() }, &mut rng(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn no_impulses_without_probability() {
        let sc = StarScenario { impulse_prob: 0.0, ..Default::default() };
        let n: NoiseStreams<f64> = gen_noise(10_000, &sc, &mut rng(5));
        assert!(n.impulses.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn always_on_impulses_match_gaussian_moments() {
        let sc = StarScenario { impulse_prob: 1.0, impulse_var_ratio: 1.0, snr_db: 0.0, ..Default::default() };
        let n: NoiseStreams<f64> = gen_noise(1_000_000, &sc, &mut rng(6));
        let var = n.impulses.iter().map(|v| v * v).sum::<f64>() / n.impulses.len() as f64;
        assert!((var - sc.noise_variance()).abs() / sc.noise_variance() < 0.01);
    }

    #[test]
    fn impulse_count_is_binomial() {
        let sc = StarScenario { impulse_prob: 0.01, ..Default::default() };
        let n: NoiseStreams<f64> = gen_noise(1_000_000, &sc, &mut rng(7));
        let hits = n.impulses.iter().filter(|&&v| v != 0.0).count() as f64;
        let bound = 3.0 * (1e6f64 * 0.01 * 0.99).sqrt();
        assert!((hits - 1e4).abs() <= bound, "{hits}");
    }

    #[test]
    fn decomposition_and_window_shift() {
        let sc = StarScenario::default();
        let mut r = rng(8);
        let ch: ChannelRealization<f64> = gen_channels(&sc, &mut r).unwrap();
        let recs = synthesize(&sc, &ch, 500, &mut r).unwrap();
        for pair in recs.windows(2) {
            assert_eq!(pair[1].i_vec[1..], pair[0].i_vec[..3]);
            assert_eq!(pair[1].i_clean[1..], pair[0].i_clean[..3]);
            assert_eq!(pair[1].x_vec[1..], pair[0].x_vec[..9]);
        }
        for rec in &recs {
            assert_eq!(rec.y, rec.si_component + rec.rt_component + rec.noise);
            assert_eq!(rec.si_component, dot(&ch.si_taps, &rec.i_clean));
        }
    }

    #[test]
    fn zero_channels_leave_only_noise() {
        let sc = StarScenario::default();
        let ch = ChannelRealization::<f64>::zeros(4, 10);
        let recs = synthesize(&sc, &ch, 200, &mut rng(9)).unwrap();
        assert!(recs.iter().all(|r| r.y == r.noise));
    }

    #[test]
    fn empirical_isr_matches_configuration() {
        let sc = StarScenario { isr_db: 20.0, ..Default::default() };
        let mut r = rng(10);
        let ch: ChannelRealization<f64> = gen_channels(&sc, &mut r).unwrap();
        let recs = synthesize(&sc, &ch, 100_000, &mut r).unwrap();
        let ps = recs.iter().map(|r| r.si_component.powi(2)).sum::<f64>();
        let pr = recs.iter().map(|r| r.rt_component.powi(2)).sum::<f64>();
        assert!((10.0 * (ps / pr).log10() - 20.0).abs() < 0.5);
    }

    #[test]
    fn deterministic_given_seed() {
        let sc = StarScenario::default();
        let gen = |seed| {
            let mut r = trial_rng(seed, 0, 3);
            let ch: ChannelRealization<f64> = gen_channels(&sc, &mut r).unwrap();
            synthesize(&sc, &ch, 100, &mut r).unwrap()
        };
        assert_eq!(gen(42), gen(42));
        assert_ne!(gen(42), gen(43));
        assert_ne!(trial_seed(1, 0, 0), trial_seed(1, 0, 1));
        assert_ne!(trial_seed(1, 0, 0), trial_seed(1, 1, 0));
    }

    #[test]
    fn fig2_truth_and_impulse_instants() {
        let tb: Fig2Testbench<f64> = fig2_testbench(&mut rng(11));
        assert!((norm_sqr(&tb.truth) - 1.0).abs() < 1e-12);
        assert_eq!(tb.truth.len(), 10);
        assert!(tb.samples.len() >= 3500);

        // Same seed without impulses isolates the impulse contribution.
        let quiet = Fig2Config { impulse_times: vec![], ..Default::default() };
        let tb0: Fig2Testbench<f64> = fig2_testbench_with(&quiet, &mut rng(11));
        assert_eq!(tb.output_noise[1200], tb0.output_noise[1200]);
        assert_eq!(tb.output_noise[999], tb0.output_noise[999]);
        assert_ne!(tb.output_noise[1500], tb0.output_noise[1500]);
    }

    #[test]
    fn fig2_input_noise_variance() {
        let cfg = Fig2Config { horizon: 100_000, ..Default::default() };
        let tb: Fig2Testbench<f64> = fig2_testbench_with(&cfg, &mut rng(12));
        let var = tb.input_noise.iter().map(|v| v * v).sum::<f64>() / tb.input_noise.len() as f64;
        assert!((var - 0.1).abs() / 0.1 < 0.02);
    }

    #[test]
    fn scenario_validation() {
        assert!(StarScenario { impulse_prob: 1.5, ..Default::default() }.validate().is_err());
        assert!(StarScenario { si_len: 0, ..Default::default() }.validate().is_err());
        assert!(StarScenario { ns: 0, ..Default::default() }.validate().is_err());
        assert!(StarScenario::default().validate().is_ok());
    }
}

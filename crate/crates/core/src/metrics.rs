//! Evaluation metrics and the block MMSE baseline.

use rustfft::num_complex::Complex;
use rustfft::{FftNum, FftPlanner};

use crate::error::{check_dim, Error, Result};
use crate::joint::{build_joint_input, JointChannelEstimate, JointObservation};
use crate::scalar::{dot, norm_sqr, Real};
use crate::sim::SignalRecord;

/// Clamp applied to dB values of exact (zero-error) estimates.
pub const DEFAULT_FLOOR_DB: f64 = -300.0;

/// `10 log10(x)`, clamped below at `floor_db`.
pub fn to_db<T: Real>(x: T, floor_db: T) -> T {
    let db = T::lit(10.0) * x.log10();
    if db > floor_db {
        db
    } else {
        floor_db
    }
}

/// Linear misalignment `||estimate - truth||^2 / ||truth||^2`.
pub fn nmsd_ratio<T: Real>(estimate: &[T], truth: &[T]) -> Result<T> {
    check_dim(truth.len(), estimate.len())?;
    let t2 = norm_sqr(truth);
    if !(t2 > T::zero()) {
        return Err(Error::InvalidArgument("NMSD of a zero reference vector".into()));
    }
    let d2: T = estimate.iter().zip(truth).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok(d2 / t2)
}

/// Normalized mean squared difference in dB, floored at [`DEFAULT_FLOOR_DB`].
pub fn nmsd<T: Real>(estimate: &[T], truth: &[T]) -> Result<T> {
    Ok(to_db(nmsd_ratio(estimate, truth)?, T::lit(DEFAULT_FLOOR_DB)))
}

/// NMSD learning curve in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct NmsdTrace<T> {
    pub values_db: Vec<T>,
    pub floor_db: T,
}

impl<T: Real> NmsdTrace<T> {
    /// Converts an (already trial-averaged) linear misalignment curve to dB.
    pub fn from_linear(linear: &[T]) -> Self {
        let floor_db = T::lit(DEFAULT_FLOOR_DB);
        Self { values_db: linear.iter().map(|&v| to_db(v, floor_db)).collect(), floor_db }
    }

    pub fn len(&self) -> usize {
        self.values_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values_db.is_empty()
    }
}

/// One-sided power spectral density on `0..=fs/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    pub freqs_hz: Vec<T>,
    /// Power per Hz; integrates to the signal variance.
    pub density: Vec<T>,
}

impl<T: Real> Spectrum<T> {
    pub fn bin_width(&self) -> T {
        if self.freqs_hz.len() < 2 {
            T::zero()
        } else {
            self.freqs_hz[1] - self.freqs_hz[0]
        }
    }

    /// Total power (sum of density times bin width).
    pub fn total_power(&self) -> T {
        self.density.iter().copied().sum::<T>() * self.bin_width()
    }

    pub fn to_db(&self) -> Vec<T> {
        self.density.iter().map(|&p| to_db(p, T::lit(DEFAULT_FLOOR_DB))).collect()
    }
}

/// Welch averaged periodogram with a periodic Hann window.
pub fn welch_psd<T: Real + FftNum>(
    signal: &[T],
    sample_rate_hz: T,
    segment_len: usize,
    overlap: T,
) -> Result<Spectrum<T>> {
    if segment_len < 2 {
        return Err(Error::InvalidArgument(format!("segment length {segment_len} is too short")));
    }
    if signal.len() < segment_len {
        return Err(Error::InvalidArgument(format!(
            "signal of length {} is shorter than one segment ({segment_len})",
            signal.len()
        )));
    }
    if !(overlap >= T::zero() && overlap < T::one()) {
        return Err(Error::InvalidArgument(format!("overlap must lie in [0, 1), got {overlap}")));
    }
    if !(sample_rate_hz > T::zero()) {
        return Err(Error::InvalidArgument("sample rate must be positive".into()));
    }

    let seg = T::from_usize_lossy(segment_len);
    let two_pi = T::lit(std::f64::consts::TAU);
    let window: Vec<T> = (0..segment_len)
        .map(|k| T::lit(0.5) * (T::one() - (two_pi * T::from_usize_lossy(k) / seg).cos()))
        .collect();
    let window_power: T = norm_sqr(&window);

    let hop = ((T::one() - overlap) * seg).floor().to_usize().unwrap_or(1).max(1);
    let bins = segment_len / 2 + 1;
    let mut acc = vec![T::zero(); bins];
    let fft = FftPlanner::<T>::new().plan_fft_forward(segment_len);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); segment_len];
    let mut segments = 0usize;
    let mut start = 0;
    while start + segment_len <= signal.len() {
        for ((b, &s), &w) in buf.iter_mut().zip(&signal[start..start + segment_len]).zip(&window) {
            *b = Complex::new(s * w, T::zero());
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a = *a + b.norm_sqr();
        }
        segments += 1;
        start += hop;
    }

    let scale = T::one() / (sample_rate_hz * window_power * T::from_usize_lossy(segments));
    let has_nyquist = segment_len % 2 == 0;
    let density = acc
        .into_iter()
        .enumerate()
        .map(|(k, p)| {
            let folded = k != 0 && !(has_nyquist && k == bins - 1);
            let factor = if folded { T::lit(2.0) } else { T::one() };
            p * scale * factor
        })
        .collect();
    let df = sample_rate_hz / seg;
    let freqs_hz = (0..bins).map(|k| T::from_usize_lossy(k) * df).collect();
    Ok(Spectrum { freqs_hz, density })
}

/// Welch PSD in dB relative to unit power. Returns `(freqs_hz, psd_db)`.
pub fn power_spectrum<T: Real + FftNum>(
    signal: &[T],
    sample_rate_hz: T,
    segment_len: usize,
    overlap: T,
) -> Result<(Vec<T>, Vec<T>)> {
    let spec = welch_psd(signal, sample_rate_hz, segment_len, overlap)?;
    let db = spec.to_db();
    Ok((spec.freqs_hz, db))
}

/// Mean power of `s(n) - w_hat^T i(n)` in dB, using the simulator's hidden
/// clean SI and clean local reference.
pub fn residual_si_power<T: Real>(records: &[SignalRecord<T>], si_estimate: &[T]) -> Result<T> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to evaluate".into()));
    }
    let mut acc = T::zero();
    for r in records {
        check_dim(r.i_clean.len(), si_estimate.len())?;
        let d = r.si_component - dot(si_estimate, &r.i_clean);
        acc = acc + d * d;
    }
    Ok(to_db(acc / T::from_usize_lossy(records.len()), T::lit(DEFAULT_FLOOR_DB)))
}

/// Block linear-MMSE estimate `(U^T U + noise_var I)^{-1} U^T y` over all
/// records, split into SI and RT parts.
pub fn mmse_baseline<T: Real, R: JointObservation<T>>(
    records: &[R],
    si_len: usize,
    rt_len: usize,
    noise_var: T,
) -> Result<JointChannelEstimate<T>> {
    let dim = si_len + rt_len;
    if records.len() < dim {
        return Err(Error::InvalidArgument(format!(
            "MMSE baseline needs at least {dim} records, got {}",
            records.len()
        )));
    }
    if !(noise_var >= T::zero()) || !noise_var.is_finite() {
        return Err(Error::InvalidArgument(format!("noise variance must be non-negative, got {noise_var}")));
    }
    let mut gram = vec![T::zero(); dim * dim];
    let mut rhs = vec![T::zero(); dim];
    for rec in records {
        let u = build_joint_input(rec.local_ref(), rec.remote_ref(), si_len, rt_len)?;
        let y = rec.observation();
        for r in 0..dim {
            rhs[r] = rhs[r] + u[r] * y;
            // lower triangle only
            for c in 0..=r {
                gram[r * dim + c] = gram[r * dim + c] + u[r] * u[c];
            }
        }
    }
    for d in 0..dim {
        gram[d * dim + d] = gram[d * dim + d] + noise_var;
    }
    let coeffs = cholesky_solve(&mut gram, dim, rhs)?;
    JointChannelEstimate::split(&coeffs, si_len)
}

/// Solves `A x = b` for symmetric positive-definite `A` given by its lower
/// triangle (row-major, overwritten with the Cholesky factor).
fn cholesky_solve<T: Real>(a: &mut [T], n: usize, mut b: Vec<T>) -> Result<Vec<T>> {
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag = diag - a[j * n + k] * a[j * n + k];
        }
        if !(diag > T::zero()) || !diag.is_finite() {
            return Err(Error::Numerical("regularized normal matrix is not positive definite".into()));
        }
        let diag = diag.sqrt();
        a[j * n + j] = diag;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v = v - a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / diag;
        }
    }
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v = v - a[i * n + k] * b[k];
        }
        b[i] = v / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in i + 1..n {
            v = v - a[k * n + i] * b[k];
        }
        b[i] = v / a[i * n + i];
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    type Rec = (f64, Vec<f64>, Vec<f64>);

    fn gauss(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn records(rng: &mut ChaCha8Rng, w: &[f64], h: &[f64], count: usize, noise: f64) -> Vec<Rec> {
        (0..count)
            .map(|_| {
                let i = gauss(rng, w.len());
                let x = gauss(rng, h.len());
                let y = dot(w, &i) + dot(h, &x) + noise * rng.sample::<f64, _>(StandardNormal);
                (y, i, x)
            })
            .collect()
    }

    #[test]
    fn nmsd_examples() {
        let h = [0.5, -0.25, 1.0];
        assert_eq!(nmsd(&h, &h).unwrap(), DEFAULT_FLOOR_DB);
        assert!(nmsd(&[0.0; 3], &h).unwrap().abs() < 1e-12);
        let twice: Vec<f64> = h.iter().map(|v| 2.0 * v).collect();
        assert!(nmsd(&twice, &h).unwrap().abs() < 1e-12);
        assert!(matches!(nmsd(&h, &[0.0; 3]), Err(Error::InvalidArgument(_))));
        assert!(matches!(nmsd(&h, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn sinusoid_is_concentrated() {
        let fs = 10_000.0;
        let sig: Vec<f64> = (0..8192)
            .map(|n| (std::f64::consts::TAU * (fs / 8.0) * n as f64 / fs).cos())
            .collect();
        let (freqs, db) = power_spectrum(&sig, fs, 256, 0.5).unwrap();
        let peak = db
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(freqs[peak], fs / 8.0);
        // Bins outside the Hann main lobe.
        for (k, &v) in db.iter().enumerate() {
            if k.abs_diff(peak) >= 2 {
                assert!(db[peak] - v >= 30.0, "bin {k}: {v} vs peak {}", db[peak]);
            }
        }
    }

    #[test]
    fn white_noise_integrates_to_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sig = gauss(&mut rng, 100_000);
        let spec = welch_psd(&sig, 10_000.0, 256, 0.5).unwrap();
        assert!((spec.total_power() - 1.0).abs() < 0.05);
    }

    #[test]
    fn scaling_shifts_psd_by_20_db() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sig = gauss(&mut rng, 4096);
        let scaled: Vec<f64> = sig.iter().map(|v| 10.0 * v).collect();
        let (_, a) = power_spectrum(&sig, 1.0, 128, 0.5).unwrap();
        let (_, b) = power_spectrum(&scaled, 1.0, 128, 0.5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((y - x - 20.0).abs() < 1e-9);
        }
    }

    #[test]
    fn psd_argument_errors() {
        assert!(power_spectrum(&[1.0; 10], 1.0, 16, 0.5).is_err());
        assert!(power_spectrum(&[1.0; 32], 1.0, 16, 1.0).is_err());
        assert!(power_spectrum(&[1.0; 32], 1.0, 16, -0.1).is_err());
    }

    #[test]
    fn mmse_matches_independent_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let w = gauss(&mut rng, 4);
        let h = gauss(&mut rng, 10);
        let recs = records(&mut rng, &w, &h, 200, 0.3);
        let noise_var = 0.09;
        let est = mmse_baseline(&recs, 4, 10, noise_var).unwrap();

        let u = DMatrix::from_fn(recs.len(), 14, |r, c| if c < 4 { recs[r].1[c] } else { recs[r].2[c - 4] });
        let y = DVector::from_iterator(recs.len(), recs.iter().map(|r| r.0));
        let a = u.transpose() * &u + DMatrix::identity(14, 14) * noise_var;
        let oracle = a.lu().solve(&(u.transpose() * y)).unwrap();
        let got = DVector::from_vec(est.stacked());
        assert!((&got - &oracle).norm() / oracle.norm() < 1e-10);
    }

    #[test]
    fn mmse_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let w = gauss(&mut rng, 4);
        let h = gauss(&mut rng, 10);
        let recs = records(&mut rng, &w, &h, 500, 0.0);
        let est = mmse_baseline(&recs, 4, 10, 1e-14).unwrap();
        assert!(nmsd(&est.si_part, &w).unwrap() < -100.0);
        assert!(nmsd(&est.rt_part, &h).unwrap() < -100.0);

        let est = mmse_baseline(&recs, 4, 10, 1e12).unwrap();
        assert!(nmsd(&est.rt_part, &h).unwrap().abs() < 1e-3);

        assert!(mmse_baseline(&recs[..13], 4, 10, 0.1).is_err());
        assert!(mmse_baseline(&recs, 4, 10, -1.0).is_err());
    }

    #[test]
    fn mmse_nmsd_non_increasing_on_nested_noiseless_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let w = gauss(&mut rng, 2);
        let h = gauss(&mut rng, 3);
        let recs = records(&mut rng, &w, &h, 400, 0.0);
        let mut last = f64::INFINITY;
        for n in [10, 20, 50, 100, 200, 400] {
            let est = mmse_baseline(&recs[..n], 2, 3, 1e-3).unwrap();
            let v = nmsd_ratio(&est.rt_part, &h).unwrap();
            assert!(v <= last * (1.0 + 1e-9), "n = {n}: {v} > {last}");
            last = v;
        }
    }

    proptest! {
        #[test]
        fn nmsd_depends_only_on_relative_error(seed in any::<u64>(), scale in 0.1f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = gauss(&mut rng, 5);
            let d = gauss(&mut rng, 5);
            let a: Vec<f64> = h.iter().zip(&d).map(|(x, y)| x + y).collect();
            let hs: Vec<f64> = h.iter().map(|x| x * scale).collect();
            let b: Vec<f64> = hs.iter().zip(&d).map(|(x, y)| x + y * scale).collect();
            prop_assert!((nmsd(&a, &h).unwrap() - nmsd(&b, &hs).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn psd_grid_ignores_content(seed in any::<u64>(), seg_pow in 4u32..9) {
            let seg = 1usize << seg_pow;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = gauss(&mut rng, 3 * seg);
            let b = vec![0.25; 3 * seg];
            let (fa, pa) = power_spectrum(&a, 8000.0, seg, 0.5).unwrap();
            let (fb, pb) = power_spectrum(&b, 8000.0, seg, 0.5).unwrap();
            prop_assert_eq!(fa, fb);
            prop_assert_eq!(pa.len(), pb.len());
            prop_assert_eq!(pa.len(), seg / 2 + 1);
        }

        #[test]
        fn mmse_permutation_invariant(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = gauss(&mut rng, 2);
            let h = gauss(&mut rng, 3);
            let mut recs = records(&mut rng, &w, &h, 40, 0.1);
            let a = mmse_baseline(&recs, 2, 3, 0.01).unwrap();
            recs.reverse();
            let b = mmse_baseline(&recs, 2, 3, 0.01).unwrap();
            for (x, y) in a.stacked().iter().zip(b.stacked()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}

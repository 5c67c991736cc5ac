//! Sample-by-sample LMS, TLS and MTLS updates on the errors-in-variables
//! linear model `y~ = (x + u)^T h + v`.
//!
//! All updates are pure: they borrow the current state and return the next
//! one, so a trajectory can be replayed or forked at any point.

use crate::error::{check_dim, Error, Result};
use crate::robust::MEstimateState;
use crate::scalar::{dot, norm_sqr, Real};

/// Which update rule a [`FilterState`] is driven by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Lms,
    Tls,
    Mtls,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Lms => "LMS",
            Algorithm::Tls => "TLS",
            Algorithm::Mtls => "MTLS",
        })
    }
}

/// One time step of noisy regressor and noisy observation.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSample<T> {
    pub input: Vec<T>,
    pub output: T,
    pub time_index: u64,
}

impl<T: Real> RegressionSample<T> {
    pub fn new(input: Vec<T>, output: T, time_index: u64) -> Self {
        Self { input, output, time_index }
    }
}

/// Adaptive weight vector together with its hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState<T> {
    weights: Vec<T>,
    step_size: T,
    gamma: T,
    algorithm: Algorithm,
}

impl<T: Real> FilterState<T> {
    /// Zero-initialised filter of dimension `dim`.
    pub fn new(algorithm: Algorithm, dim: usize, step_size: T, gamma: T) -> Result<Self> {
        Self::with_weights(algorithm, vec![T::zero(); dim], step_size, gamma)
    }

    pub fn with_weights(algorithm: Algorithm, weights: Vec<T>, step_size: T, gamma: T) -> Result<Self> {
        if !(step_size > T::zero()) || !step_size.is_finite() {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {step_size}")));
        }
        if !(gamma > T::zero()) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("initial weights"));
        }
        Ok(Self { weights, step_size, gamma, algorithm })
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn step_size(&self) -> T {
        self.step_size
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    /// A-priori error `y - w^T x` for `sample`.
    pub fn prior_error(&self, sample: &RegressionSample<T>) -> Result<T> {
        check_dim(self.dim(), sample.input.len())?;
        Ok(sample.output - dot(&self.weights, &sample.input))
    }

    fn expect(&self, algorithm: Algorithm) -> Result<()> {
        if self.algorithm == algorithm {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "{} update applied to a {} filter",
                algorithm, self.algorithm
            )))
        }
    }

    /// `||w||^2 + gamma`, rejected if it is not a usable positive number.
    fn denominator(&self) -> Result<T> {
        let d = norm_sqr(&self.weights) + self.gamma;
        if d > T::zero() && d.is_finite() {
            Ok(d)
        } else {
            Err(Error::Numerical(format!("cost denominator ||w||^2 + gamma = {d}")))
        }
    }

    fn advanced(&self, direction: impl Iterator<Item = T>) -> Result<Self> {
        let weights: Vec<T> = self
            .weights
            .iter()
            .zip(direction)
            .map(|(&w, d)| w + self.step_size * d)
            .collect();
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("updated weights"));
        }
        Ok(Self { weights, ..self.clone() })
    }
}

/// Rayleigh-quotient TLS cost `(1/N) sum (y - w^T x)^2 / (||w||^2 + gamma)`.
/// Empty sample sets cost zero.
pub fn tls_cost<T: Real>(weights: &[T], samples: &[RegressionSample<T>], gamma: T) -> Result<T> {
    if !(gamma > T::zero()) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    if samples.is_empty() {
        return Ok(T::zero());
    }
    let denom = norm_sqr(weights) + gamma;
    let mut acc = T::zero();
    for s in samples {
        check_dim(weights.len(), s.input.len())?;
        let e = s.output - dot(weights, &s.input);
        acc = acc + e * e;
    }
    Ok(acc / (denom * T::from_usize_lossy(samples.len())))
}

/// TLS descent direction `alpha (x + alpha w)` with
/// `alpha = (y - x^T w) / (||w||^2 + gamma)`. The update adds `mu` times it.
pub fn tls_gradient<T: Real>(state: &FilterState<T>, sample: &RegressionSample<T>) -> Result<Vec<T>> {
    let e = state.prior_error(sample)?;
    let alpha = e / state.denominator()?;
    Ok(sample
        .input
        .iter()
        .zip(&state.weights)
        .map(|(&x, &w)| alpha * (x + alpha * w))
        .collect())
}

/// Gradient of `rho(e) / (||w||^2 + gamma)` inside the threshold:
/// `-[(||w||^2 + gamma) e x + e^2 w] / (||w||^2 + gamma)^2`.
pub fn mtls_gradient<T: Real>(weights: &[T], gamma: T, error: T, input: &[T]) -> Result<Vec<T>> {
    check_dim(weights.len(), input.len())?;
    let d = norm_sqr(weights) + gamma;
    if !(d > T::zero() && d.is_finite()) {
        return Err(Error::Numerical(format!("cost denominator ||w||^2 + gamma = {d}")));
    }
    let d2 = d * d;
    let e2 = error * error;
    Ok(input
        .iter()
        .zip(weights)
        .map(|(&x, &w)| -(d * error * x + e2 * w) / d2)
        .collect())
}

/// One TLS gradient-descent step. Returns the next state and the a-priori error.
pub fn tls_step<T: Real>(state: &FilterState<T>, sample: &RegressionSample<T>) -> Result<(FilterState<T>, T)> {
    state.expect(Algorithm::Tls)?;
    let e = state.prior_error(sample)?;
    let alpha = e / state.denominator()?;
    let next = state.advanced(
        sample
            .input
            .iter()
            .zip(&state.weights)
            .map(|(&x, &w)| alpha * (x + alpha * w)),
    )?;
    Ok((next, e))
}

/// Standard LMS step `w + mu e x`.
pub fn lms_step<T: Real>(state: &FilterState<T>, sample: &RegressionSample<T>) -> Result<(FilterState<T>, T)> {
    state.expect(Algorithm::Lms)?;
    let e = state.prior_error(sample)?;
    let next = state.advanced(sample.input.iter().map(|&x| e * x))?;
    Ok((next, e))
}

/// Result of one MTLS step.
#[derive(Debug, Clone, PartialEq)]
pub struct MtlsOutcome<T> {
    pub state: FilterState<T>,
    pub mstate: MEstimateState<T>,
    pub prior_error: T,
    pub rejected: bool,
}

/// MTLS step against an explicit threshold `xi`. Errors with `|e| >= xi`
/// leave the weights untouched; pass `T::infinity()` to disable rejection.
pub fn mtls_update<T: Real>(
    state: &FilterState<T>,
    sample: &RegressionSample<T>,
    xi: T,
) -> Result<(FilterState<T>, T, bool)> {
    state.expect(Algorithm::Mtls)?;
    let e = state.prior_error(sample)?;
    if e.abs() >= xi {
        return Ok((state.clone(), e, true));
    }
    let grad = mtls_gradient(&state.weights, state.gamma, e, &sample.input)?;
    let next = state.advanced(grad.into_iter().map(|g| -g))?;
    Ok((next, e, false))
}

/// MTLS step with the robust threshold tracked in `mstate`.
///
/// The scale tracker sees the error before the threshold is evaluated. The
/// very first sample of a stream is always accepted since the tracker has no
/// scale information yet.
pub fn mtls_step<T: Real>(
    state: &FilterState<T>,
    mstate: &MEstimateState<T>,
    sample: &RegressionSample<T>,
) -> Result<MtlsOutcome<T>> {
    state.expect(Algorithm::Mtls)?;
    let e = state.prior_error(sample)?;
    let first = mstate.is_fresh();
    let mut mstate = mstate.clone();
    mstate.observe(sample.output);
    let mstate = mstate.sigma_update(e, first);
    let xi = if first { T::infinity() } else { mstate.threshold() };
    let (state, prior_error, rejected) = mtls_update(state, sample, xi)?;
    Ok(MtlsOutcome { state, mstate, prior_error, rejected })
}

//! Saturating M-estimate loss and the recursive robust error-scale tracker
//! that sets the outlier threshold for the MTLS update.
//!
//! The scale estimate follows
//!
//! ```text
//! sigma2(n) = lambda * sigma2(n-1) + c2 * (1 - lambda) * med(A_e(n))
//! xi        = c1 * sqrt(sigma2(n))
//! c2        = 1.483 * (1 + 5 / (Nw - 1))
//! ```
//!
//! where `A_e(n)` holds the last `Nw` squared a-priori errors.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default threshold multiplier (99% two-sided Gaussian quantile).
pub const DEFAULT_C1: f64 = 2.576;
pub const DEFAULT_LAMBDA_SIGMA: f64 = 0.98;
pub const DEFAULT_WINDOW_LEN: usize = 14;
/// Threshold floor relative to the running RMS of the observations.
pub const DEFAULT_XI_FLOOR_SCALE: f64 = 1e-6;

/// Saturating M-estimate loss: `e^2/2` inside the threshold, `xi^2/2` outside.
pub fn mest_rho<T: Real>(e: T, xi: T) -> T {
    let half = T::lit(0.5);
    if e.abs() < xi {
        half * e * e
    } else {
        half * xi * xi
    }
}

/// Median of a non-empty window. Even lengths average the two central order
/// statistics.
pub fn median<T: Real>(window: &[T]) -> Result<T> {
    if window.is_empty() {
        return Err(Error::InvalidArgument("median of an empty window".into()));
    }
    let mut buf = window.to_vec();
    let n = buf.len();
    let cmp = |a: &T, b: &T| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal);
    let mid = n / 2;
    let (lower, &mut upper_mid, _) = buf.select_nth_unstable_by(mid, cmp);
    if n % 2 == 1 {
        Ok(upper_mid)
    } else {
        let lower_mid = lower
            .iter()
            .copied()
            .fold(T::neg_infinity(), |acc, v| if v > acc { v } else { acc });
        Ok((lower_mid + upper_mid) * T::lit(0.5))
    }
}

/// Consistency factor for the windowed median of squared errors.
pub fn c2_for_window<T: Real>(window_len: usize) -> T {
    T::lit(1.483) * (T::one() + T::lit(5.0) / T::from_usize_lossy(window_len - 1))
}

/// Hyperparameters of the robust scale tracker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MEstimateConfig<T> {
    pub lambda_sigma: T,
    pub c1: T,
    pub window_len: usize,
    pub xi_floor_scale: T,
}

impl<T: Real> Default for MEstimateConfig<T> {
    fn default() -> Self {
        Self {
            lambda_sigma: T::lit(DEFAULT_LAMBDA_SIGMA),
            c1: T::lit(DEFAULT_C1),
            window_len: DEFAULT_WINDOW_LEN,
            xi_floor_scale: T::lit(DEFAULT_XI_FLOOR_SCALE),
        }
    }
}

impl<T: Real> MEstimateConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_sigma >= T::lit(0.9) && self.lambda_sigma < T::one()) {
            return Err(Error::InvalidConfig(format!(
                "lambda_sigma must lie in [0.9, 1), got {}",
                self.lambda_sigma
            )));
        }
        if !(self.c1 > T::zero()) || !self.c1.is_finite() {
            return Err(Error::InvalidConfig(format!("c1 must be positive, got {}", self.c1)));
        }
        if self.window_len < 2 {
            return Err(Error::InvalidConfig(format!(
                "window length must be at least 2, got {}",
                self.window_len
            )));
        }
        if !(self.xi_floor_scale > T::zero()) {
            return Err(Error::InvalidConfig("threshold floor scale must be positive".into()));
        }
        Ok(())
    }
}

/// Sliding window of squared errors plus the recursive variance estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct MEstimateState<T> {
    config: MEstimateConfig<T>,
    c2: T,
    /// Squared errors, oldest at the front.
    window: VecDeque<T>,
    sigma2: T,
    /// Running mean of squared observations, feeds the threshold floor.
    obs_power: T,
    observed: usize,
}

impl<T: Real> MEstimateState<T> {
    pub fn new(config: MEstimateConfig<T>) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            c2: c2_for_window(config.window_len),
            window: VecDeque::with_capacity(config.window_len),
            sigma2: T::zero(),
            obs_power: T::zero(),
            observed: 0,
            config,
        })
    }

    pub fn config(&self) -> &MEstimateConfig<T> {
        &self.config
    }

    pub fn c2(&self) -> T {
        self.c2
    }

    pub fn sigma2(&self) -> T {
        self.sigma2
    }

    /// True until the first error has been pushed into the window.
    pub fn is_fresh(&self) -> bool {
        self.window.is_empty()
    }

    pub fn window(&self) -> impl ExactSizeIterator<Item = &T> {
        self.window.iter()
    }

    /// Folds one observation into the running power used by the threshold floor.
    pub(crate) fn observe(&mut self, y: T) {
        self.observed += 1;
        let k = T::from_usize_lossy(self.observed);
        self.obs_power = self.obs_power + (y * y - self.obs_power) / k;
    }

    /// Smallest threshold ever returned.
    pub fn xi_floor(&self) -> T {
        let floor = self.config.xi_floor_scale * self.obs_power.sqrt();
        if floor > T::zero() {
            floor
        } else {
            T::min_positive_value()
        }
    }

    /// Pushes `e^2` into the window (replicating it on the first sample) and
    /// advances the recursive variance estimate.
    pub fn sigma_update(&self, e: T, is_first_sample: bool) -> Self {
        let mut next = self.clone();
        let e2 = e * e;
        let nw = next.config.window_len;
        if is_first_sample || next.window.is_empty() {
            next.window.clear();
            next.window.extend(std::iter::repeat_n(e2, nw));
        } else {
            if next.window.len() == nw {
                next.window.pop_front();
            }
            next.window.push_back(e2);
        }
        let (head, tail) = next.window.as_slices();
        let med = if tail.is_empty() {
            median(head)
        } else {
            median(&next.window.iter().copied().collect::<Vec<_>>())
        }
        .expect("window is non-empty after an update");
        let lambda = next.config.lambda_sigma;
        next.sigma2 = lambda * next.sigma2 + next.c2 * (T::one() - lambda) * med;
        next
    }

    /// Outlier threshold `xi = c1 * sigma`, never below the floor.
    pub fn threshold(&self) -> T {
        let xi = self.config.c1 * self.sigma2.sqrt();
        let floor = self.xi_floor();
        if xi > floor {
            xi
        } else {
            floor
        }
    }

    #[cfg(test)]
    pub(crate) fn with_sigma2(mut self, sigma2: T) -> Self {
        self.sigma2 = sigma2;
        self
    }
}

/// Free-function form of [`MEstimateState::sigma_update`].
pub fn mest_sigma_update<T: Real>(
    state: &MEstimateState<T>,
    e: T,
    is_first_sample: bool,
) -> MEstimateState<T> {
    state.sigma_update(e, is_first_sample)
}

/// Free-function form of [`MEstimateState::threshold`].
pub fn mest_threshold<T: Real>(state: &MEstimateState<T>) -> T {
    state.threshold()
}

//! Multi-layered M-estimate TLS joint estimation of the self-interference
//! channel `w` and the remote-transmission channel `h`.
//!
//! Every layer runs an MTLS filter over the stacked regressor `u = [i; x]`.
//! Layer `l` sees `y_l`; after its update it removes its own (a-priori) SI
//! estimate, `y_{l+1} = y_l - w_l^T i`, and hands the residual to the next
//! layer. The RT estimate is the mean of the per-layer `h_l`.

use crate::error::{check_dim, Error, Result};
use crate::filters::{mtls_step, Algorithm, FilterState, RegressionSample};
use crate::metrics::nmsd_ratio;
use crate::robust::{MEstimateConfig, MEstimateState};
use crate::scalar::{dot, Real};

/// Stacked SI and RT channel taps.
#[derive(Debug, Clone, PartialEq)]
pub struct JointChannelEstimate<T> {
    pub si_part: Vec<T>,
    pub rt_part: Vec<T>,
}

impl<T: Real> JointChannelEstimate<T> {
    pub fn new(si_part: Vec<T>, rt_part: Vec<T>) -> Self {
        Self { si_part, rt_part }
    }

    /// Splits a stacked vector `[w; h]` at `si_len`.
    pub fn split(stacked: &[T], si_len: usize) -> Result<Self> {
        if si_len > stacked.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot split a vector of length {} at {si_len}",
                stacked.len()
            )));
        }
        let (w, h) = stacked.split_at(si_len);
        Ok(Self::new(w.to_vec(), h.to_vec()))
    }

    pub fn stacked(&self) -> Vec<T> {
        self.si_part.iter().chain(&self.rt_part).copied().collect()
    }
}

/// `u = [i; x]`, local reference first.
pub fn build_joint_input<T: Real>(local_ref: &[T], remote_ref: &[T], si_len: usize, rt_len: usize) -> Result<Vec<T>> {
    check_dim(si_len, local_ref.len())?;
    check_dim(rt_len, remote_ref.len())?;
    Ok(local_ref.iter().chain(remote_ref).copied().collect())
}

/// Hyperparameters of a single layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerParams<T> {
    pub step_size: T,
    pub gamma: T,
    pub mest: MEstimateConfig<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub filter: FilterState<T>,
    pub mest: MEstimateState<T>,
}

impl<T: Real> Layer<T> {
    fn fresh(dim: usize, params: &LayerParams<T>) -> Result<Self> {
        Ok(Self {
            filter: FilterState::new(Algorithm::Mtls, dim, params.step_size, params.gamma)?,
            mest: MEstimateState::new(params.mest)?,
        })
    }

    pub fn si_part(&self, si_len: usize) -> &[T] {
        &self.filter.weights()[..si_len]
    }

    pub fn rt_part(&self, si_len: usize) -> &[T] {
        &self.filter.weights()[si_len..]
    }
}

/// `L` MTLS layers over the joint dimension `N + M`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack<T> {
    si_len: usize,
    rt_len: usize,
    layers: Vec<Layer<T>>,
    include_first_layer_in_average: bool,
}

impl<T: Real> LayerStack<T> {
    /// Zero-initialised stack sharing one set of hyperparameters.
    pub fn new(si_len: usize, rt_len: usize, num_layers: usize, params: LayerParams<T>) -> Result<Self> {
        Self::with_layer_params(si_len, rt_len, &vec![params; num_layers])
    }

    /// One parameter set per layer.
    pub fn with_layer_params(si_len: usize, rt_len: usize, params: &[LayerParams<T>]) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidConfig("a layer stack needs at least one layer".into()));
        }
        if si_len == 0 || rt_len == 0 {
            return Err(Error::InvalidConfig("channel lengths must be positive".into()));
        }
        let layers = params
            .iter()
            .map(|p| Layer::fresh(si_len + rt_len, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { si_len, rt_len, layers, include_first_layer_in_average: true })
    }

    /// Drop the first layer's RT estimate from the average.
    pub fn excluding_first_layer(mut self, exclude: bool) -> Result<Self> {
        if exclude && self.layers.len() < 2 {
            return Err(Error::InvalidConfig(
                "cannot exclude the first layer from the average of a single-layer stack".into(),
            ));
        }
        self.include_first_layer_in_average = !exclude;
        Ok(self)
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn si_len(&self) -> usize {
        self.si_len
    }

    pub fn rt_len(&self) -> usize {
        self.rt_len
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn includes_first_layer_in_average(&self) -> bool {
        self.include_first_layer_in_average
    }

    /// Joint estimate held by layer `l` (zero-based).
    pub fn layer_estimate(&self, l: usize) -> JointChannelEstimate<T> {
        JointChannelEstimate::split(self.layers[l].filter.weights(), self.si_len).expect("layer dimension")
    }

    /// Total SI estimate `sum_l w_l`: what the whole stack subtracts from `y`.
    pub fn total_si_estimate(&self) -> Vec<T> {
        let mut acc = vec![T::zero(); self.si_len];
        for layer in &self.layers {
            for (a, &w) in acc.iter_mut().zip(layer.si_part(self.si_len)) {
                *a = *a + w;
            }
        }
        acc
    }
}

/// Mean of the per-layer RT estimates, optionally skipping layer 1.
pub fn average_rt_estimate<T: Real>(stack: &LayerStack<T>) -> Result<Vec<T>> {
    let skip = usize::from(!stack.include_first_layer_in_average);
    if skip >= stack.layers.len() {
        return Err(Error::InvalidConfig(
            "excluding the first layer leaves no layers to average".into(),
        ));
    }
    let included = &stack.layers[skip..];
    let mut acc = vec![T::zero(); stack.rt_len];
    for layer in included {
        for (a, &h) in acc.iter_mut().zip(layer.rt_part(stack.si_len)) {
            *a = *a + h;
        }
    }
    let count = T::from_usize_lossy(included.len());
    Ok(acc.into_iter().map(|a| a / count).collect())
}

/// Output of one [`mmtls_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput<T> {
    pub stack: LayerStack<T>,
    pub rt_estimate: Vec<T>,
    /// `y_{l+1}` for `l = 1..L`: the observation left after layer `l` removed its SI estimate.
    pub layer_residuals: Vec<T>,
    /// A-priori error of each layer.
    pub layer_errors: Vec<T>,
    pub rejected: Vec<bool>,
}

/// One time step of the layered estimator.
///
/// `u` is the stacked regressor `[i; x]` and `local_ref` its first `N`
/// entries. With `is_first_sample` set every layer's robust scale tracker is
/// restarted and seeded with this sample's error.
pub fn mmtls_step<T: Real>(
    stack: &LayerStack<T>,
    y: T,
    u: &[T],
    local_ref: &[T],
    is_first_sample: bool,
) -> Result<StepOutput<T>> {
    let dim = stack.si_len + stack.rt_len;
    check_dim(dim, u.len())?;
    check_dim(stack.si_len, local_ref.len())?;
    if !y.is_finite() {
        return Err(Error::NonFinite("observation"));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("joint regressor"));
    }

    let n_layers = stack.layers.len();
    let mut next = stack.clone();
    let mut layer_residuals = Vec::with_capacity(n_layers);
    let mut layer_errors = Vec::with_capacity(n_layers);
    let mut rejected = Vec::with_capacity(n_layers);
    let mut sample = RegressionSample::new(u.to_vec(), y, 0);
    let mut y_l = y;

    for layer in next.layers.iter_mut() {
        if is_first_sample {
            layer.mest = MEstimateState::new(*layer.mest.config())?;
        }
        // SI estimate available before this sample's update.
        let si_prior = dot(layer.si_part(stack.si_len), local_ref);

        sample.output = y_l;
        let out = mtls_step(&layer.filter, &layer.mest, &sample)?;
        layer.filter = out.state;
        layer.mest = out.mstate;
        layer_errors.push(out.prior_error);
        rejected.push(out.rejected);

        y_l = y_l - si_prior;
        layer_residuals.push(y_l);
    }

    let rt_estimate = average_rt_estimate(&next)?;
    Ok(StepOutput { stack: next, rt_estimate, layer_residuals, layer_errors, rejected })
}

/// Anything that can feed one training step: observation plus both reference windows.
pub trait JointObservation<T> {
    fn observation(&self) -> T;
    fn local_ref(&self) -> &[T];
    fn remote_ref(&self) -> &[T];
}

impl<T: Copy> JointObservation<T> for (T, Vec<T>, Vec<T>) {
    fn observation(&self) -> T {
        self.0
    }
    fn local_ref(&self) -> &[T] {
        &self.1
    }
    fn remote_ref(&self) -> &[T] {
        &self.2
    }
}

/// Per-sample record of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTrace<T> {
    /// Linear misalignment `||w_1 - w||^2 / ||w||^2` after each sample
    /// (unnormalised `||w_1||^2` when the true SI channel is zero).
    pub si_misalignment: Vec<T>,
    /// Linear misalignment of the averaged RT estimate after each sample.
    pub rt_misalignment: Vec<T>,
    /// Linear misalignment of layer 1's RT estimate alone (the single-layer MTLS estimate).
    pub rt_misalignment_first_layer: Vec<T>,
    /// `rejected[n][l]`.
    pub rejected: Vec<Vec<bool>>,
    pub final_stack: LayerStack<T>,
    pub final_rt_estimate: Vec<T>,
}

impl<T: Real> TrainingTrace<T> {
    pub fn len(&self) -> usize {
        self.rt_misalignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rt_misalignment.is_empty()
    }

    /// Final layer-1 SI estimate.
    pub fn final_si_estimate(&self) -> Vec<T> {
        self.final_stack.layer_estimate(0).si_part
    }

    /// Fraction of samples each layer rejected.
    pub fn rejection_rates(&self) -> Vec<T> {
        let layers = self.final_stack.num_layers();
        let mut counts = vec![0usize; layers];
        for row in &self.rejected {
            for (c, &r) in counts.iter_mut().zip(row) {
                *c += usize::from(r);
            }
        }
        let n = T::from_usize_lossy(self.rejected.len().max(1));
        counts.into_iter().map(|c| T::from_usize_lossy(c) / n).collect()
    }
}

/// Runs the layered estimator over the first `ns` records, tracking
/// misalignment against `truth`.
pub fn run_training<T: Real, R: JointObservation<T>>(
    stack: &LayerStack<T>,
    records: &[R],
    ns: usize,
    truth: &JointChannelEstimate<T>,
) -> Result<TrainingTrace<T>> {
    if records.len() < ns {
        return Err(Error::InvalidArgument(format!(
            "training needs {ns} records, got {}",
            records.len()
        )));
    }
    check_dim(stack.si_len, truth.si_part.len())?;
    check_dim(stack.rt_len, truth.rt_part.len())?;

    let mut trace = TrainingTrace {
        si_misalignment: Vec::with_capacity(ns),
        rt_misalignment: Vec::with_capacity(ns),
        rt_misalignment_first_layer: Vec::with_capacity(ns),
        rejected: Vec::with_capacity(ns),
        final_rt_estimate: average_rt_estimate(stack)?,
        final_stack: stack.clone(),
    };
    let si_is_zero = truth.si_part.iter().all(|&v| v == T::zero());
    let mut current = stack.clone();
    for (n, rec) in records[..ns].iter().enumerate() {
        let u = build_joint_input(rec.local_ref(), rec.remote_ref(), stack.si_len, stack.rt_len)?;
        let out = mmtls_step(&current, rec.observation(), &u, rec.local_ref(), n == 0)?;
        current = out.stack;
        let first = &current.layers[0];
        let si = first.si_part(stack.si_len);
        trace.si_misalignment.push(if si_is_zero {
            si.iter().map(|&v| v * v).sum()
        } else {
            nmsd_ratio(si, &truth.si_part)?
        });
        trace
            .rt_misalignment_first_layer
            .push(nmsd_ratio(first.rt_part(stack.si_len), &truth.rt_part)?);
        trace.rt_misalignment.push(nmsd_ratio(&out.rt_estimate, &truth.rt_part)?);
        trace.rejected.push(out.rejected);
        trace.final_rt_estimate = out.rt_estimate;
    }
    trace.final_stack = current;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::mtls_step;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn params() -> LayerParams<f64> {
        LayerParams { step_size: 0.01, gamma: 1.0, mest: MEstimateConfig::default() }
    }

    fn random_records(
        rng: &mut ChaCha8Rng,
        w: &[f64],
        h: &[f64],
        count: usize,
        noise: f64,
    ) -> Vec<(f64, Vec<f64>, Vec<f64>)> {
        (0..count)
            .map(|_| {
                let i: Vec<f64> = (0..w.len()).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
                let x: Vec<f64> = (0..h.len()).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
                let v: f64 = rng.sample::<f64, _>(StandardNormal) * noise;
                (dot(w, &i) + dot(h, &x) + v, i, x)
            })
            .collect()
    }

    #[test]
    fn joint_input_order_and_split() {
        let u = build_joint_input(&[1.0, 2.0], &[3.0], 2, 1).unwrap();
        assert_eq!(u, vec![1.0, 2.0, 3.0]);
        assert_eq!(build_joint_input(&[0.0; 4], &[0.0; 10], 4, 10).unwrap(), vec![0.0; 14]);
        let back = JointChannelEstimate::split(&u, 2).unwrap();
        assert_eq!(back.si_part, vec![1.0, 2.0]);
        assert_eq!(back.rt_part, vec![3.0]);
        assert_eq!(back.stacked(), u);
        assert!(matches!(
            build_joint_input(&[1.0], &[3.0], 2, 1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn average_examples() {
        let mut stack = LayerStack::new(1, 2, 2, params()).unwrap();
        stack.layers[0].filter = FilterState::with_weights(Algorithm::Mtls, vec![9.0, 1.0, 0.0], 0.01, 1.0).unwrap();
        stack.layers[1].filter = FilterState::with_weights(Algorithm::Mtls, vec![7.0, 0.0, 1.0], 0.01, 1.0).unwrap();
        assert_eq!(average_rt_estimate(&stack).unwrap(), vec![0.5, 0.5]);

        let mut stack = LayerStack::new(1, 2, 3, params()).unwrap();
        for l in 0..3 {
            stack.layers[l].filter =
                FilterState::with_weights(Algorithm::Mtls, vec![0.0, 0.25, -1.0], 0.01, 1.0).unwrap();
        }
        assert_eq!(average_rt_estimate(&stack).unwrap(), vec![0.25, -1.0]);

        let rts = [[3.0, 3.0], [1.0, 2.0], [2.0, 5.0]];
        for (l, rt) in rts.iter().enumerate() {
            stack.layers[l].filter =
                FilterState::with_weights(Algorithm::Mtls, vec![0.0, rt[0], rt[1]], 0.01, 1.0).unwrap();
        }
        let stack = stack.excluding_first_layer(true).unwrap();
        assert_eq!(average_rt_estimate(&stack).unwrap(), vec![1.5, 3.5]);
    }

    #[test]
    fn excluding_only_layer_is_rejected() {
        let stack = LayerStack::new(1, 2, 1, params()).unwrap();
        assert!(matches!(stack.excluding_first_layer(true), Err(Error::InvalidConfig(_))));
        assert!(LayerStack::new(1, 2, 0, params()).is_err());
    }

    #[test]
    fn single_layer_matches_plain_mtls() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = [0.9, -0.3];
        let h = [0.1, 0.05, -0.02];
        let recs = random_records(&mut rng, &w, &h, 300, 0.05);
        let mut stack = LayerStack::new(2, 3, 1, params()).unwrap();
        let mut filter = FilterState::new(Algorithm::Mtls, 5, 0.01, 1.0).unwrap();
        let mut mest = MEstimateState::new(MEstimateConfig::default()).unwrap();
        for (n, rec) in recs.iter().enumerate() {
            let u = build_joint_input(&rec.1, &rec.2, 2, 3).unwrap();
            let out = mmtls_step(&stack, rec.0, &u, &rec.1, n == 0).unwrap();
            let plain = mtls_step(&filter, &mest, &RegressionSample::new(u.clone(), rec.0, n as u64)).unwrap();
            assert_eq!(out.stack.layers[0].filter.weights(), plain.state.weights());
            assert_eq!(out.rejected[0], plain.rejected);
            stack = out.stack;
            filter = plain.state;
            mest = plain.mstate;
        }
    }

    #[test]
    fn perfect_first_layer_leaves_pure_rt_signal() {
        let w = vec![0.8, -0.5];
        let h = vec![0.2, 0.1, 0.3];
        let mut stack = LayerStack::new(2, 3, 2, params()).unwrap();
        let mut c = w.clone();
        c.extend(&h);
        stack.layers[0].filter = FilterState::with_weights(Algorithm::Mtls, c, 0.01, 1.0).unwrap();
        let i = [1.0, -1.0];
        let x = [1.0, 1.0, -1.0];
        let y = dot(&w, &i) + dot(&h, &x);
        let u = build_joint_input(&i, &x, 2, 3).unwrap();
        let out = mmtls_step(&stack, y, &u, &i, true).unwrap();
        assert!((out.layer_residuals[0] - dot(&h, &x)).abs() < 1e-15);
        assert_eq!(out.stack.layers[0].filter.weights(), stack.layers[0].filter.weights());
    }

    #[test]
    fn split_and_telescoping_hold_on_random_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..5 {
            let w: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
            let h: Vec<f64> = (0..6).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
            let recs = random_records(&mut rng, &w, &h, 400, 0.1);
            let mut stack = LayerStack::new(4, 6, 3, params()).unwrap();
            for (n, rec) in recs.iter().enumerate() {
                let u = build_joint_input(&rec.1, &rec.2, 4, 6).unwrap();
                let priors: Vec<f64> = stack.layers.iter().map(|l| dot(l.si_part(4), &rec.1)).collect();
                let out = mmtls_step(&stack, rec.0, &u, &rec.1, n == 0).unwrap();
                let mut removed = 0.0;
                for l in 0..3 {
                    removed += priors[l];
                    let err = (out.layer_residuals[l] + removed - rec.0).abs();
                    assert!(err <= 1e-12 * (1.0 + rec.0.abs()), "trial {trial} n {n} l {l}: {err}");
                    let est = out.stack.layer_estimate(l);
                    assert_eq!(est.stacked(), out.stack.layers[l].filter.weights());
                }
                stack = out.stack;
            }
        }
    }

    #[test]
    fn non_finite_inputs_fail() {
        let stack = LayerStack::new(1, 1, 2, params()).unwrap();
        assert!(matches!(mmtls_step(&stack, f64::NAN, &[1.0, 1.0], &[1.0], true), Err(Error::NonFinite(_))));
        assert!(matches!(
            mmtls_step(&stack, 1.0, &[f64::INFINITY, 1.0], &[f64::INFINITY], true),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(mmtls_step(&stack, 1.0, &[1.0], &[1.0], true), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn empty_training_keeps_initial_state() {
        let stack = LayerStack::new(2, 3, 2, params()).unwrap();
        let truth = JointChannelEstimate::new(vec![1.0, 0.0], vec![0.5, 0.0, 0.0]);
        let recs: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
        let trace = run_training(&stack, &recs, 0, &truth).unwrap();
        assert!(trace.is_empty());
        assert_eq!(trace.final_stack, stack);
        assert_eq!(trace.final_rt_estimate, vec![0.0; 3]);
        assert!(run_training(&stack, &recs, 1, &truth).is_err());
    }

    #[test]
    fn noiseless_rt_only_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let w = vec![0.0; 4];
        let h: Vec<f64> = (0..10).map(|_| rng.sample::<f64, _>(StandardNormal) / 10f64.sqrt()).collect();
        let ns = 3000;
        let recs = random_records(&mut rng, &w, &h, ns, 0.0);
        let p = LayerParams { step_size: 0.02, ..params() };
        let stack = LayerStack::new(4, 10, 1, p).unwrap();
        let truth = JointChannelEstimate::new(w, h);
        let trace = run_training(&stack, &recs, ns, &truth).unwrap();
        let early = 10.0 * trace.rt_misalignment[ns / 10 - 1].log10();
        let late = 10.0 * trace.rt_misalignment[ns - 1].log10();
        assert!(late < early - 10.0, "early {early} dB, late {late} dB");
    }
}

//! Variational quantum classifier: feature encoding, noisy forward
//! evaluation, three-class label bands, MSE loss, parameter-shift
//! gradients, and SGD training with per-epoch trajectory recording.
//!
//! A sample's four features enter as `RY(x_j)` on qubit `j`; the circuit
//! output is the ground-projector expectation on one qubit, thresholded at
//! 1/6 and 1/2 into labels 0/1/2 (everything above 1/2 reads as class 2).
//! Regression targets default to the band midpoints `{0, 1/3, 2/3}`, the
//! only values the bounded output can actually reach; raw labels are
//! selectable for comparison.

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuits::CircuitTemplate;
use crate::error::{Error, Result};
use crate::readout::{CalibrationMatrix, ProbabilityVector};
use crate::scalar::Scalar;
use crate::sim::{DensityMatrix, DephasingChannel, Gate, NoisePlacement, Observable};
use crate::streams;

pub const NUM_FEATURES: usize = 4;
pub const NUM_CLASSES: usize = 3;

const FEATURE_SLACK: f64 = 1e-9;

/// One labelled example with min-max-normalized features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<T> {
    pub features: [T; NUM_FEATURES],
    pub label: u8,
}

impl<T: Scalar> Sample<T> {
    pub fn new(features: [T; NUM_FEATURES], label: u8) -> Result<Self> {
        if label as usize >= NUM_CLASSES {
            return Err(Error::LabelRange { got: label as i64 });
        }
        check_features(&features)?;
        Ok(Self { features, label })
    }
}

fn check_features<T: Scalar>(features: &[T; NUM_FEATURES]) -> Result<()> {
    let slack = T::of(FEATURE_SLACK);
    for (index, &x) in features.iter().enumerate() {
        if !(x >= -slack && x <= T::one() + slack) {
            return Err(Error::FeatureRange {
                index,
                value: x.as_f64(),
            });
        }
    }
    Ok(())
}

/// Train/validation/test partition of a dataset.
#[derive(Debug, Clone, Default)]
pub struct DataSplits<T> {
    pub train: Vec<Sample<T>>,
    pub valid: Vec<Sample<T>>,
    pub test: Vec<Sample<T>>,
}

/// Gate encoding: one `RY(x_j)` on qubit `j` per feature, angle equal to
/// the normalized feature in radians.
pub fn encode<T: Scalar>(features: &[T; NUM_FEATURES]) -> Result<Vec<Gate<T>>> {
    check_features(features)?;
    Ok(features
        .iter()
        .enumerate()
        .map(|(q, &x)| Gate::ry(q, x))
        .collect())
}

/// Label from a bounded circuit output: 0 for `o <= 1/6`, 1 for
/// `o <= 1/2`, otherwise 2 (outputs above 5/6 clamp to class 2).
pub fn predict_label<T: Scalar>(output: T) -> Result<u8> {
    if !(output >= -T::of(FEATURE_SLACK) && output <= T::one() + T::of(FEATURE_SLACK)) {
        return Err(Error::OutputRange {
            got: output.as_f64(),
        });
    }
    if output <= T::of(1.0 / 6.0) {
        Ok(0)
    } else if output <= T::of(0.5) {
        Ok(1)
    } else {
        Ok(2)
    }
}

/// Regression target for a label: the midpoint of its decision band.
pub fn target_of<T: Scalar>(label: u8) -> Result<T> {
    if label as usize >= NUM_CLASSES {
        return Err(Error::LabelRange { got: label as i64 });
    }
    Ok(T::of(label as f64) / T::of(3.0))
}

/// How labels map to regression targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetMode {
    /// Band midpoints `{0, 1/3, 2/3}`.
    #[default]
    BandMidpoint,
    /// Raw labels `{0, 1, 2}` (unreachable by a projector expectation; kept
    /// for comparison runs).
    RawLabel,
}

pub fn target_for<T: Scalar>(label: u8, mode: TargetMode) -> Result<T> {
    match mode {
        TargetMode::BandMidpoint => target_of(label),
        TargetMode::RawLabel => {
            if label as usize >= NUM_CLASSES {
                Err(Error::LabelRange { got: label as i64 })
            } else {
                Ok(T::of(label as f64))
            }
        }
    }
}

/// Mean square error `(1/2n) sum (o_i - y_i)^2`.
pub fn mse_loss<T: Scalar>(outputs: &[T], targets: &[T]) -> Result<T> {
    if outputs.is_empty() {
        return Err(Error::Empty { what: "loss inputs" });
    }
    if outputs.len() != targets.len() {
        return Err(Error::Dimension {
            expected: outputs.len(),
            got: targets.len(),
        });
    }
    let mut acc = T::zero();
    for (&o, &y) in outputs.iter().zip(targets) {
        acc += (o - y) * (o - y);
    }
    Ok(acc / (T::of(2.0) * T::of(outputs.len() as f64)))
}

/// Optional readout-error stage applied to the final state's diagonal
/// before the expectation is taken. Off by default.
#[derive(Debug, Clone, Default)]
pub enum ReadoutEffect<T> {
    #[default]
    Off,
    /// Corrupt the outcome distribution with the calibration matrix.
    Simulate(CalibrationMatrix<T>),
    /// Corrupt, then undo by solving the calibration system.
    SimulateAndCorrect(CalibrationMatrix<T>),
}

/// Everything a circuit evaluation needs besides the template and its
/// parameters: the noise channel, the measured observable, the optional
/// readout stage, and the target convention.
#[derive(Debug, Clone)]
pub struct EvalContext<T> {
    pub noise: DephasingChannel<T>,
    pub observable: Observable,
    pub readout: ReadoutEffect<T>,
    pub target_mode: TargetMode,
}

impl<T: Scalar> Default for EvalContext<T> {
    fn default() -> Self {
        Self {
            noise: DephasingChannel::noiseless(),
            observable: Observable::ground_projector(0),
            readout: ReadoutEffect::Off,
            target_mode: TargetMode::BandMidpoint,
        }
    }
}

impl<T: Scalar> EvalContext<T> {
    pub fn with_noise(noise: DephasingChannel<T>) -> Self {
        Self {
            noise,
            ..Self::default()
        }
    }

    fn dephase_after_gate(&self, state: &mut DensityMatrix<T>, gate: &Gate<T>) -> Result<()> {
        if self.noise.placement() == NoisePlacement::AfterEachGate && !self.noise.is_noiseless() {
            for q in gate.qubits() {
                state.apply_dephasing(q, self.noise.strength())?;
            }
        }
        Ok(())
    }

    fn dephase_after_block(&self, state: &mut DensityMatrix<T>) -> Result<()> {
        if self.noise.placement() == NoisePlacement::AfterEachBlock && !self.noise.is_noiseless() {
            state.apply_dephasing_all(self.noise.strength())?;
        }
        Ok(())
    }

    /// Encoding layer plus its channel (the encoding counts as one block).
    fn apply_encoding(&self, state: &mut DensityMatrix<T>, features: &[T; NUM_FEATURES]) -> Result<()> {
        for gate in encode(features)? {
            state.apply_gate(&gate)?;
            self.dephase_after_gate(state, &gate)?;
        }
        self.dephase_after_block(state)
    }

    fn apply_block(
        &self,
        state: &mut DensityMatrix<T>,
        template: &CircuitTemplate<T>,
        block: usize,
        params: &[T],
        shift: Option<(usize, T)>,
    ) -> Result<()> {
        for gate in template.bound_block_gates(block, params, shift) {
            state.apply_gate(&gate)?;
            self.dephase_after_gate(state, &gate)?;
        }
        self.dephase_after_block(state)
    }

    /// Expectation of the observable, optionally routed through the
    /// readout-error stage.
    fn expectation_of(&self, state: &DensityMatrix<T>) -> Result<T> {
        match &self.readout {
            ReadoutEffect::Off => state.expectation(&self.observable),
            ReadoutEffect::Simulate(f) => {
                let p = ProbabilityVector::new(clamp_diagonal(state))?;
                Ok(self.observable.marginal(f.apply(&p)?.values()))
            }
            ReadoutEffect::SimulateAndCorrect(f) => {
                let p = ProbabilityVector::new(clamp_diagonal(state))?;
                let measured = f.apply(&p)?;
                Ok(self.observable.marginal(f.correct(&measured)?.values()))
            }
        }
    }

    /// Deterministic classifier output `Tr(Pi U rho U^dagger)` in `[0, 1]`.
    pub fn forward(
        &self,
        template: &CircuitTemplate<T>,
        params: &[T],
        features: &[T; NUM_FEATURES],
    ) -> Result<T> {
        template.check_params(params)?;
        let mut state = DensityMatrix::ground_state(template.num_qubits())?;
        self.apply_encoding(&mut state, features)?;
        for block in 0..template.num_blocks() {
            self.apply_block(&mut state, template, block, params, None)?;
        }
        self.expectation_of(&state)
    }

    /// States after the encoding block and after every template block
    /// (`num_blocks + 1` entries); shifted evaluations resume from these
    /// instead of replaying the whole circuit.
    fn prefix_states(
        &self,
        template: &CircuitTemplate<T>,
        params: &[T],
        features: &[T; NUM_FEATURES],
    ) -> Result<Vec<DensityMatrix<T>>> {
        let mut state = DensityMatrix::ground_state(template.num_qubits())?;
        self.apply_encoding(&mut state, features)?;
        let mut prefixes = Vec::with_capacity(template.num_blocks() + 1);
        prefixes.push(state);
        for block in 0..template.num_blocks() {
            let mut next = prefixes[block].clone();
            self.apply_block(&mut next, template, block, params, None)?;
            prefixes.push(next);
        }
        Ok(prefixes)
    }

    fn resume_expectation(
        &self,
        template: &CircuitTemplate<T>,
        params: &[T],
        start: &DensityMatrix<T>,
        from_block: usize,
        shift: (usize, T),
    ) -> Result<T> {
        let mut state = start.clone();
        self.apply_block(&mut state, template, from_block, params, Some(shift))?;
        for block in from_block + 1..template.num_blocks() {
            self.apply_block(&mut state, template, block, params, None)?;
        }
        self.expectation_of(&state)
    }

    /// Parameter-shift gradient of the circuit output for one input:
    /// `d<O>/d theta_k = (<O>(theta_k + pi/2) - <O>(theta_k - pi/2)) / 2`,
    /// two shifted evaluations per parameter. Exact for rotation gates,
    /// also under the (parameter-independent) dephasing channel.
    pub fn expectation_gradient(
        &self,
        template: &CircuitTemplate<T>,
        params: &[T],
        features: &[T; NUM_FEATURES],
    ) -> Result<Vec<T>> {
        template.check_params(params)?;
        let prefixes = self.prefix_states(template, params, features)?;
        let mut grad = vec![T::zero(); template.num_params()];
        let half_pi = T::FRAC_PI_2();
        for block in 0..template.num_blocks() {
            let slots: Vec<usize> = template.block_slots(block).collect();
            for slot in slots {
                let plus =
                    self.resume_expectation(template, params, &prefixes[block], block, (slot, half_pi))?;
                let minus =
                    self.resume_expectation(template, params, &prefixes[block], block, (slot, -half_pi))?;
                grad[slot] = (plus - minus) / T::of(2.0);
            }
        }
        Ok(grad)
    }

    /// Gradient of the batch MSE via the chain rule through the
    /// parameter-shift rule.
    pub fn gradient(
        &self,
        template: &CircuitTemplate<T>,
        params: &[T],
        batch: &[Sample<T>],
    ) -> Result<Vec<T>> {
        template.check_params(params)?;
        if batch.is_empty() {
            return Err(Error::Empty { what: "batch" });
        }
        let mut grad = vec![T::zero(); template.num_params()];
        let inv_n = T::one() / T::of(batch.len() as f64);
        let half_pi = T::FRAC_PI_2();
        for sample in batch {
            let prefixes = self.prefix_states(template, params, &sample.features)?;
            let output = self.expectation_of(prefixes.last().expect("prefixes non-empty"))?;
            let target = target_for(sample.label, self.target_mode)?;
            let coeff = (output - target) * inv_n;
            for block in 0..template.num_blocks() {
                let slots: Vec<usize> = template.block_slots(block).collect();
                for slot in slots {
                    let plus = self.resume_expectation(
                        template,
                        params,
                        &prefixes[block],
                        block,
                        (slot, half_pi),
                    )?;
                    let minus = self.resume_expectation(
                        template,
                        params,
                        &prefixes[block],
                        block,
                        (slot, -half_pi),
                    )?;
                    grad[slot] += coeff * (plus - minus) / T::of(2.0);
                }
            }
        }
        Ok(grad)
    }

    /// MSE over a dataset at fixed parameters.
    pub fn dataset_loss(
        &self,
        template: &CircuitTemplate<T>,
        params: &[T],
        samples: &[Sample<T>],
    ) -> Result<T> {
        if samples.is_empty() {
            return Err(Error::Empty { what: "dataset" });
        }
        let mut outputs = Vec::with_capacity(samples.len());
        let mut targets = Vec::with_capacity(samples.len());
        for s in samples {
            outputs.push(self.forward(template, params, &s.features)?);
            targets.push(target_for(s.label, self.target_mode)?);
        }
        mse_loss(&outputs, &targets)
    }

    /// Fraction of samples whose banded prediction matches the label.
    pub fn accuracy(
        &self,
        template: &CircuitTemplate<T>,
        params: &[T],
        samples: &[Sample<T>],
    ) -> Result<T> {
        if samples.is_empty() {
            return Err(Error::Empty { what: "dataset" });
        }
        let mut correct = 0usize;
        for s in samples {
            let output = self.forward(template, params, &s.features)?;
            if predict_label(output)? == s.label {
                correct += 1;
            }
        }
        Ok(T::of(correct as f64) / T::of(samples.len() as f64))
    }

    /// SGD from a fresh uniform `[-pi, pi]` initialization.
    pub fn train(
        &self,
        template: &CircuitTemplate<T>,
        splits: &DataSplits<T>,
        config: &TrainConfig<T>,
    ) -> Result<TrainOutcome<T>> {
        let init = init_params(template.num_params(), config.seed);
        self.train_from(template, init, splits, config)
    }

    /// SGD from explicit initial parameters (fine-tuning entry point).
    pub fn train_from(
        &self,
        template: &CircuitTemplate<T>,
        init: Vec<T>,
        splits: &DataSplits<T>,
        config: &TrainConfig<T>,
    ) -> Result<TrainOutcome<T>> {
        config.validate()?;
        template.check_params(&init)?;
        if splits.train.is_empty() {
            return Err(Error::Empty { what: "training set" });
        }

        let mut params = init;
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
        shuffle_rng.set_stream(streams::BATCH_SHUFFLE);
        let mut indices: Vec<usize> = (0..splits.train.len()).collect();

        let mut trajectory = Trajectory::new();
        let mut metrics = Vec::with_capacity(config.epochs);
        for epoch in 0..config.epochs {
            indices.shuffle(&mut shuffle_rng);
            for chunk in indices.chunks(config.batch_size) {
                let batch: Vec<Sample<T>> = chunk.iter().map(|&i| splits.train[i]).collect();
                let grad = self.gradient(template, &params, &batch)?;
                for (p, g) in params.iter_mut().zip(&grad) {
                    *p = *p - config.learning_rate * *g;
                }
            }
            let train_loss = self.dataset_loss(template, &params, &splits.train)?;
            let valid_accuracy = self.accuracy(template, &params, &splits.valid)?;
            let test_accuracy = self.accuracy(template, &params, &splits.test)?;
            trajectory.push(params.clone(), train_loss)?;
            metrics.push(EpochMetrics {
                epoch,
                train_loss,
                valid_accuracy,
                test_accuracy,
            });
        }
        Ok(TrainOutcome {
            params,
            trajectory,
            metrics,
        })
    }
}

fn clamp_diagonal<T: Scalar>(state: &DensityMatrix<T>) -> Vec<T> {
    // Rounding can leave populations at -1e-17; snap to the simplex edge.
    state
        .diagonal()
        .into_iter()
        .map(|v| if v < T::zero() { T::zero() } else { v })
        .collect()
}

/// Fresh uniform `[-pi, pi]` parameter draw from the run seed.
pub fn init_params<T: Scalar>(num_params: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(streams::PARAM_INIT);
    (0..num_params)
        .map(|_| T::of(rng.gen_range(-std::f64::consts::PI..=std::f64::consts::PI)))
        .collect()
}

/// SGD hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig<T> {
    pub learning_rate: T,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            learning_rate: T::of(0.2),
            batch_size: 4,
            epochs: 50,
            seed: 0,
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= T::zero()) {
            return Err(Error::LearningRate {
                got: self.learning_rate.as_f64(),
            });
        }
        if self.batch_size < 1 {
            return Err(Error::BatchSize);
        }
        if self.epochs < 1 {
            return Err(Error::EpochCount);
        }
        Ok(())
    }
}

/// Parameter vector and loss recorded once per epoch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory<T> {
    steps: Vec<Vec<T>>,
    losses: Vec<T>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new() -> Self {
        Self {
            steps: Vec::new(),
            losses: Vec::new(),
        }
    }

    pub fn push(&mut self, params: Vec<T>, loss: T) -> Result<()> {
        if let Some(first) = self.steps.first() {
            if first.len() != params.len() {
                return Err(Error::Dimension {
                    expected: first.len(),
                    got: params.len(),
                });
            }
        }
        self.steps.push(params);
        self.losses.push(loss);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.steps.first().map_or(0, Vec::len)
    }

    pub fn steps(&self) -> &[Vec<T>] {
        &self.steps
    }

    pub fn losses(&self) -> &[T] {
        &self.losses
    }
}

/// Per-epoch metrics row, the unit of the metrics CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics<T> {
    pub epoch: usize,
    pub train_loss: T,
    pub valid_accuracy: T,
    pub test_accuracy: T,
}

/// Final parameters, per-epoch trajectory, and metrics of one training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: Vec<T>,
    pub trajectory: Trajectory<T>,
    pub metrics: Vec<EpochMetrics<T>>,
}

impl<T: Scalar> TrainOutcome<T> {
    pub fn final_metrics(&self) -> Option<&EpochMetrics<T>> {
        self.metrics.last()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{build_hea, realize, random_genotype, CircuitTemplate, Param, SearchSpace, TemplateOp};
    use crate::readout::synthetic_calibration;
    use crate::sim::Axis;

    fn ctx() -> EvalContext<f64> {
        EvalContext::default()
    }

    fn noisy_ctx(p: f64) -> EvalContext<f64> {
        EvalContext::with_noise(
            DephasingChannel::new(p, NoisePlacement::AfterEachBlock).unwrap(),
        )
    }

    #[test]
    fn encode_is_one_ry_per_qubit() {
        let gates = encode(&[0.1f64, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(gates.len(), 4);
        for (q, gate) in gates.iter().enumerate() {
            match gate {
                Gate::Rot { axis: Axis::Y, qubit, .. } => assert_eq!(*qubit, q),
                other => panic!("unexpected encoding gate {other:?}"),
            }
        }
        assert!(encode(&[1.1f64, 0.0, 0.0, 0.0]).is_err());
        assert!(encode(&[-0.1f64, 0.0, 0.0, 0.0]).is_err());
        assert!(encode(&[1.0 + 1e-10, 0.0, 0.0, 0.0]).is_ok());
    }

    #[test]
    fn zero_features_and_zero_params_give_unit_output() {
        let template = build_hea::<f64>(1).unwrap();
        let out = ctx()
            .forward(&template, &[0.0; 4], &[0.0, 0.0, 0.0, 0.0])
            .unwrap();
        assert!((out - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_feature_output_is_cosine_squared() {
        let template = build_hea::<f64>(1).unwrap();
        let out = ctx()
            .forward(&template, &[0.0; 4], &[1.0, 0.0, 0.0, 0.0])
            .unwrap();
        let expect = (0.5f64).cos().powi(2); // cos^2(x/2) at x = 1
        assert!((out - expect).abs() < 1e-12, "out {out} expect {expect}");
        assert!((expect - 0.770151).abs() < 1e-6);
    }

    #[test]
    fn forward_checks_param_length() {
        let template = build_hea::<f64>(2).unwrap();
        let err = ctx().forward(&template, &[0.0; 3], &[0.0; 4]);
        assert!(err.is_err());
    }

    #[test]
    fn forward_stays_in_unit_interval() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(61);
        let space = SearchSpace::chain(2).unwrap();
        for _ in 0..30 {
            let g = random_genotype(&space, &mut rng);
            let template = realize::<f64>(&space, &g).unwrap();
            let params: Vec<f64> = (0..template.num_params())
                .map(|_| rng.gen_range(-3.15..3.15))
                .collect();
            let features = [rng.gen(), rng.gen(), rng.gen(), rng.gen()];
            let p = rng.gen_range(0.0..0.5);
            let out = noisy_ctx(p).forward(&template, &params, &features).unwrap();
            assert!((-1e-12..=1.0 + 1e-12).contains(&out));
        }
    }

    #[test]
    fn full_dephasing_drives_output_to_half_with_depth() {
        // L blocks of RY(pi/4) on qubit 0 with p = 0.5 after each block:
        // the qubit's coherence dies every block, so the population follows
        // z_L = cos(pi/4)^L and the output is (1 + z_L) / 2, monotonically
        // approaching 1/2.
        let mut previous = 1.0f64;
        for layers in 1..=6 {
            let blocks = (0..layers)
                .map(|l| {
                    vec![TemplateOp::<f64>::Rot {
                        axis: Axis::Y,
                        qubit: 0,
                        param: Param::Slot(l),
                    }]
                })
                .collect();
            let template = CircuitTemplate::new(4, blocks).unwrap();
            let params = vec![std::f64::consts::FRAC_PI_4; layers];
            let out = noisy_ctx(0.5)
                .forward(&template, &params, &[0.0; 4])
                .unwrap();
            let closed_form = (1.0 + (std::f64::consts::FRAC_PI_4).cos().powi(layers as i32)) / 2.0;
            assert!((out - closed_form).abs() < 1e-12);
            assert!(out < previous && out > 0.5);
            previous = out;
        }
    }

    #[test]
    fn predict_label_bands() {
        assert_eq!(predict_label(0.1f64).unwrap(), 0);
        assert_eq!(predict_label(0.4f64).unwrap(), 1);
        assert_eq!(predict_label(0.7f64).unwrap(), 2);
        assert_eq!(predict_label(1.0f64 / 6.0).unwrap(), 0);
        assert_eq!(predict_label(0.5f64).unwrap(), 1);
        assert_eq!(predict_label(0.95f64).unwrap(), 2);
        assert!(predict_label(-0.1f64).is_err());
        assert!(predict_label(1.1f64).is_err());
    }

    #[test]
    fn targets_are_band_midpoints() {
        assert_eq!(target_of::<f64>(0).unwrap(), 0.0);
        assert!((target_of::<f64>(1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((target_of::<f64>(2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(target_of::<f64>(3).is_err());
        assert_eq!(target_for::<f64>(2, TargetMode::RawLabel).unwrap(), 2.0);
    }

    #[test]
    fn mse_loss_examples() {
        assert_eq!(mse_loss(&[0.3f64, 0.6], &[0.3, 0.6]).unwrap(), 0.0);
        let l = mse_loss(&[0.5f64], &[1.0 / 3.0]).unwrap();
        assert!((l - 1.0 / 72.0).abs() < 1e-15);
        let l = mse_loss(&[0.0f64, 1.0], &[0.0, 0.0]).unwrap();
        assert!((l - 0.25).abs() < 1e-15);
        assert!(mse_loss::<f64>(&[], &[]).is_err());
    }

    #[test]
    fn zero_loss_implies_full_accuracy_under_midpoints() {
        for label in 0..3u8 {
            let target = target_of::<f64>(label).unwrap();
            assert_eq!(predict_label(target).unwrap(), label);
        }
    }

    #[test]
    fn shift_rule_on_single_rotation() {
        // <O> = cos^2(theta/2); derivative at pi/2 is -1/2.
        let template = CircuitTemplate::new(
            4,
            vec![vec![TemplateOp::<f64>::Rot {
                axis: Axis::Y,
                qubit: 0,
                param: Param::Slot(0),
            }]],
        )
        .unwrap();
        let grad = ctx()
            .expectation_gradient(&template, &[std::f64::consts::FRAC_PI_2], &[0.0; 4])
            .unwrap();
        assert!((grad[0] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn gradient_vanishes_for_commuting_parameter() {
        // RZ on the measured qubit commutes with the projector; its
        // parameter cannot move the output.
        let template = CircuitTemplate::new(
            4,
            vec![vec![
                TemplateOp::<f64>::Rot {
                    axis: Axis::Y,
                    qubit: 0,
                    param: Param::Slot(0),
                },
                TemplateOp::Rot {
                    axis: Axis::Z,
                    qubit: 0,
                    param: Param::Slot(1),
                },
            ]],
        )
        .unwrap();
        let grad = ctx()
            .expectation_gradient(&template, &[0.8, 0.3], &[0.2, 0.0, 0.0, 0.0])
            .unwrap();
        assert!(grad[0].abs() > 1e-3);
        assert!(grad[1].abs() < 1e-15, "commuting gradient {}", grad[1]);
    }

    fn finite_difference_gradient(
        ctx: &EvalContext<f64>,
        template: &CircuitTemplate<f64>,
        params: &[f64],
        batch: &[Sample<f64>],
        h: f64,
    ) -> Vec<f64> {
        let loss = |p: &[f64]| ctx.dataset_loss(template, p, batch).unwrap();
        (0..params.len())
            .map(|k| {
                let mut plus = params.to_vec();
                let mut minus = params.to_vec();
                plus[k] += h;
                minus[k] -= h;
                (loss(&plus) - loss(&minus)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(67);
        let space = SearchSpace::chain(2).unwrap();
        for trial in 0..5 {
            let g = random_genotype(&space, &mut rng);
            let template = realize::<f64>(&space, &g).unwrap();
            let params: Vec<f64> = (0..template.num_params())
                .map(|_| rng.gen_range(-3.0..3.0))
                .collect();
            let batch: Vec<Sample<f64>> = (0..3)
                .map(|i| {
                    Sample::new(
                        [rng.gen(), rng.gen(), rng.gen(), rng.gen()],
                        (i % 3) as u8,
                    )
                    .unwrap()
                })
                .collect();
            let context = if trial % 2 == 0 { ctx() } else { noisy_ctx(0.1) };
            let analytic = context.gradient(&template, &params, &batch).unwrap();
            let numeric = finite_difference_gradient(&context, &template, &params, &batch, 1e-5);
            for (a, b) in analytic.iter().zip(&numeric) {
                let tol = 1e-4 * a.abs().max(b.abs()).max(1e-3);
                assert!((a - b).abs() < tol, "analytic {a} numeric {b}");
            }
        }
    }

    fn tiny_splits() -> DataSplits<f64> {
        let samples: Vec<Sample<f64>> = (0..6)
            .map(|i| {
                Sample::new(
                    [
                        0.1 * (i as f64 + 1.0),
                        0.9 - 0.1 * i as f64,
                        0.2,
                        0.5,
                    ],
                    (i % 3) as u8,
                )
                .unwrap()
            })
            .collect();
        DataSplits {
            train: samples.clone(),
            valid: samples.clone(),
            test: samples,
        }
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let template = build_hea::<f64>(1).unwrap();
        let splits = tiny_splits();
        let init = vec![0.3f64, -0.2, 0.9, 0.1];
        let config = TrainConfig {
            learning_rate: 0.0,
            batch_size: 2,
            epochs: 2,
            seed: 9,
        };
        let outcome = ctx().train_from(&template, init.clone(), &splits, &config).unwrap();
        assert_eq!(outcome.params, init);
    }

    #[test]
    fn training_is_deterministic_and_rejects_zero_epochs() {
        let template = build_hea::<f64>(1).unwrap();
        let splits = tiny_splits();
        let config = TrainConfig {
            epochs: 3,
            seed: 11,
            ..TrainConfig::default()
        };
        let a = ctx().train(&template, &splits, &config).unwrap();
        let b = ctx().train(&template, &splits, &config).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.trajectory, b.trajectory);

        let bad = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(ctx().train(&template, &splits, &bad).is_err());
    }

    #[test]
    fn accuracy_is_order_invariant_and_bounded() {
        let template = build_hea::<f64>(1).unwrap();
        let splits = tiny_splits();
        let params = init_params::<f64>(4, 3);
        let forward_order = ctx().accuracy(&template, &params, &splits.train).unwrap();
        let mut reversed = splits.train.clone();
        reversed.reverse();
        let reverse_order = ctx().accuracy(&template, &params, &reversed).unwrap();
        assert_eq!(forward_order, reverse_order);
        assert!((0.0..=1.0).contains(&forward_order));
        assert!(ctx().accuracy(&template, &params, &[]).is_err());
    }

    #[test]
    fn constant_output_on_balanced_data_gives_one_third() {
        // Identical features everywhere make the classifier constant, so it
        // can land in only one band of a balanced three-class set.
        let template = build_hea::<f64>(1).unwrap();
        let samples: Vec<Sample<f64>> = (0..9)
            .map(|i| Sample::new([0.4, 0.4, 0.4, 0.4], (i % 3) as u8).unwrap())
            .collect();
        let params = init_params::<f64>(4, 5);
        let acc = ctx().accuracy(&template, &params, &samples).unwrap();
        assert!((acc - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn readout_stage_composes_with_forward() {
        use rand::SeedableRng;
        let template = build_hea::<f64>(1).unwrap();
        let params = init_params::<f64>(4, 21);
        let features = [0.3, 0.6, 0.1, 0.8];

        let clean = ctx().forward(&template, &params, &features).unwrap();

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(71);
        let f = synthetic_calibration::<f64, _>(4, 0.8, &mut rng).unwrap();

        let mut simulate = ctx();
        simulate.readout = ReadoutEffect::Simulate(f.clone());
        let corrupted = simulate.forward(&template, &params, &features).unwrap();
        assert!((corrupted - clean).abs() > 1e-4);
        assert!((0.0..=1.0).contains(&corrupted));

        let mut corrected = ctx();
        corrected.readout = ReadoutEffect::SimulateAndCorrect(f);
        let recovered = corrected.forward(&template, &params, &features).unwrap();
        assert!((recovered - clean).abs() < 1e-9);
    }
}

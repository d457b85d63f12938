//! One-shot architecture search over the ansatz pool.
//!
//! Pipeline: initialize shared parameter pools (supernets), train each
//! supernet by sampling one architecture per batch and updating only its
//! bound sub-vector (weight sharing propagates the update to every
//! architecture reading those positions), then rank uniformly sampled
//! candidates by validation accuracy and fine-tune the winner from its
//! inherited parameters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuits::{random_genotype, realize, Genotype, SearchSpace};
use crate::classifier::{DataSplits, EvalContext, Sample, TrainConfig, TrainOutcome, Trajectory};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sim::Axis;
use crate::streams;

/// Shared trainable angles, keyed by `(block, qubit, candidate gate)`.
/// Holds `blocks x qubits x candidates` entries; binding a genotype selects
/// the `blocks x qubits` entries matching its gate choices.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPool<T> {
    num_blocks: usize,
    num_qubits: usize,
    candidates: Vec<Axis>,
    angles: Vec<T>,
}

impl<T: Scalar> ParameterPool<T> {
    /// All angles drawn uniform `[-pi, pi]` from `rng`.
    pub fn init_uniform<R: rand::Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> Self {
        let len = space.num_blocks() * space.num_qubits() * space.single_candidates().len();
        let angles = (0..len)
            .map(|_| T::of(rng.gen_range(-std::f64::consts::PI..=std::f64::consts::PI)))
            .collect();
        Self {
            num_blocks: space.num_blocks(),
            num_qubits: space.num_qubits(),
            candidates: space.single_candidates().to_vec(),
            angles,
        }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angles(&self) -> &[T] {
        &self.angles
    }

    fn index(&self, block: usize, qubit: usize, axis: Axis) -> Result<usize> {
        let kind = self
            .candidates
            .iter()
            .position(|&c| c == axis)
            .ok_or_else(|| {
                Error::GenotypeShape(format!("gate {} not in the candidate set", axis.letter()))
            })?;
        if block >= self.num_blocks || qubit >= self.num_qubits {
            return Err(Error::GenotypeShape(format!(
                "position (block {block}, qubit {qubit}) outside pool"
            )));
        }
        Ok((block * self.num_qubits + qubit) * self.candidates.len() + kind)
    }

    pub fn angle(&self, block: usize, qubit: usize, axis: Axis) -> Result<T> {
        Ok(self.angles[self.index(block, qubit, axis)?])
    }

    /// Gathers the genotype's parameter vector in template slot order
    /// (block-major, then qubit).
    pub fn bind(&self, genotype: &Genotype) -> Result<Vec<T>> {
        let mut out = Vec::with_capacity(self.num_blocks * self.num_qubits);
        for (block, choice) in genotype.blocks.iter().enumerate() {
            for (qubit, &axis) in choice.gates.iter().enumerate() {
                out.push(self.angles[self.index(block, qubit, axis)?]);
            }
        }
        Ok(out)
    }

    /// Pool indices a genotype binds, in template slot order; always
    /// `blocks x qubits` entries.
    pub fn bound_indices(&self, genotype: &Genotype) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(self.num_blocks * self.num_qubits);
        for (block, choice) in genotype.blocks.iter().enumerate() {
            for (qubit, &axis) in choice.gates.iter().enumerate() {
                out.push(self.index(block, qubit, axis)?);
            }
        }
        Ok(out)
    }

    /// Writes an updated bound vector back into the shared pool.
    pub fn write_back(&mut self, genotype: &Genotype, params: &[T]) -> Result<()> {
        let expected = self.num_blocks * self.num_qubits;
        if params.len() != expected {
            return Err(Error::ParamCount {
                expected,
                got: params.len(),
            });
        }
        for (block, choice) in genotype.blocks.iter().enumerate() {
            for (qubit, &axis) in choice.gates.iter().enumerate() {
                let idx = self.index(block, qubit, axis)?;
                self.angles[idx] = params[block * self.num_qubits + qubit];
            }
        }
        Ok(())
    }
}

/// A search space plus one shared parameter pool.
#[derive(Debug, Clone)]
pub struct Supernet<T> {
    pub id: usize,
    pub space: SearchSpace,
    pub pool: ParameterPool<T>,
}

/// `count` independent supernets with pools drawn from one seeded stream.
pub fn init_pools<T: Scalar>(
    space: &SearchSpace,
    count: usize,
    seed: u64,
) -> Result<Vec<Supernet<T>>> {
    if count < 1 {
        return Err(Error::SupernetCount);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(streams::POOL_INIT);
    Ok((0..count)
        .map(|id| Supernet {
            id,
            space: space.clone(),
            pool: ParameterPool::init_uniform(space, &mut rng),
        })
        .collect())
}

/// Supernet training schedule; mirrors [`TrainConfig`] without the epochs
/// default (the search phase trains longer than fine-tuning).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupernetTrainConfig<T> {
    pub epochs: usize,
    pub learning_rate: T,
    pub batch_size: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for SupernetTrainConfig<T> {
    fn default() -> Self {
        Self {
            epochs: 40,
            learning_rate: T::of(0.2),
            batch_size: 4,
            seed: 0,
        }
    }
}

/// Mean sampled-batch loss per epoch for one supernet.
#[derive(Debug, Clone)]
pub struct SupernetLog<T> {
    pub supernet_id: usize,
    pub mean_batch_loss: Vec<T>,
}

/// Trains every supernet in place: per batch, sample a genotype, bind its
/// parameters from the pool, take one SGD step on the bound sub-vector,
/// and write it back. Architectures sharing positions with the sampled one
/// receive the update through the pool.
pub fn train_supernets<T: Scalar>(
    supernets: &mut [Supernet<T>],
    ctx: &EvalContext<T>,
    train_data: &[Sample<T>],
    config: &SupernetTrainConfig<T>,
) -> Result<Vec<SupernetLog<T>>> {
    if train_data.is_empty() {
        return Err(Error::Empty { what: "training set" });
    }
    if config.epochs < 1 {
        return Err(Error::EpochCount);
    }
    if config.batch_size < 1 {
        return Err(Error::BatchSize);
    }
    let mut logs = Vec::with_capacity(supernets.len());
    for supernet in supernets.iter_mut() {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(streams::SUPERNET_BASE + supernet.id as u64);
        let log = train_one_supernet(supernet, ctx, train_data, config, &mut rng)?;
        logs.push(log);
    }
    Ok(logs)
}

fn train_one_supernet<T: Scalar>(
    supernet: &mut Supernet<T>,
    ctx: &EvalContext<T>,
    train_data: &[Sample<T>],
    config: &SupernetTrainConfig<T>,
    rng: &mut ChaCha8Rng,
) -> Result<SupernetLog<T>> {
    use rand::seq::SliceRandom;

    let mut indices: Vec<usize> = (0..train_data.len()).collect();
    let mut mean_batch_loss = Vec::with_capacity(config.epochs);
    for _epoch in 0..config.epochs {
        indices.shuffle(rng);
        let mut epoch_loss = T::zero();
        let mut batches = 0usize;
        for chunk in indices.chunks(config.batch_size) {
            let batch: Vec<Sample<T>> = chunk.iter().map(|&i| train_data[i]).collect();
            let genotype = random_genotype(&supernet.space, rng);
            let template = realize(&supernet.space, &genotype)?;
            let mut params = supernet.pool.bind(&genotype)?;
            epoch_loss += ctx.dataset_loss(&template, &params, &batch)?;
            let grad = ctx.gradient(&template, &params, &batch)?;
            for (p, g) in params.iter_mut().zip(&grad) {
                *p = *p - config.learning_rate * *g;
            }
            supernet.pool.write_back(&genotype, &params)?;
            batches += 1;
        }
        mean_batch_loss.push(epoch_loss / T::of(batches as f64));
    }
    Ok(SupernetLog {
        supernet_id: supernet.id,
        mean_batch_loss,
    })
}

/// A candidate architecture with the best accuracy it achieved across
/// supernets, carrying the pool parameters it was evaluated with.
#[derive(Debug, Clone)]
pub struct RankedCandidate<T> {
    pub genotype: Genotype,
    pub supernet_id: usize,
    pub validation_accuracy: T,
    pub params: Vec<T>,
    pub sample_index: usize,
    pub cz_count: usize,
}

/// Ranked candidates plus sampling accounting (duplicates among the
/// requested draws are evaluated once).
#[derive(Debug, Clone)]
pub struct SearchOutcome<T> {
    pub candidates: Vec<RankedCandidate<T>>,
    pub requested_samples: usize,
    pub unique_samples: usize,
}

/// Samples `num_samples` genotypes uniformly, scores each one under every
/// supernet's pool on the validation set, keeps the best score per
/// genotype, and ranks by accuracy (ties: fewer CZ gates, then sample
/// order).
pub fn search<T: Scalar>(
    supernets: &[Supernet<T>],
    ctx: &EvalContext<T>,
    valid_data: &[Sample<T>],
    num_samples: usize,
    seed: u64,
) -> Result<SearchOutcome<T>> {
    if valid_data.is_empty() {
        return Err(Error::Empty { what: "validation set" });
    }
    if supernets.is_empty() {
        return Err(Error::SupernetCount);
    }
    let space = &supernets[0].space;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(streams::SEARCH_SAMPLING);

    let mut seen = std::collections::HashSet::new();
    let mut unique: Vec<(usize, Genotype)> = Vec::new();
    for sample_index in 0..num_samples {
        let genotype = random_genotype(space, &mut rng);
        if seen.insert(genotype.clone()) {
            unique.push((sample_index, genotype));
        }
    }

    let mut candidates = Vec::with_capacity(unique.len());
    for (sample_index, genotype) in unique {
        let template = realize(space, &genotype)?;
        let mut best: Option<(usize, T, Vec<T>)> = None;
        for supernet in supernets {
            let params = supernet.pool.bind(&genotype)?;
            let accuracy = ctx.accuracy(&template, &params, valid_data)?;
            let better = match &best {
                None => true,
                Some((_, incumbent, _)) => accuracy > *incumbent,
            };
            if better {
                best = Some((supernet.id, accuracy, params));
            }
        }
        let (supernet_id, validation_accuracy, params) = best.expect("at least one supernet");
        candidates.push(RankedCandidate {
            cz_count: genotype.cz_count(),
            genotype,
            supernet_id,
            validation_accuracy,
            params,
            sample_index,
        });
    }
    rank(&mut candidates);
    Ok(SearchOutcome {
        requested_samples: num_samples,
        unique_samples: candidates.len(),
        candidates,
    })
}

/// Sort key: validation accuracy descending, CZ count ascending, sample
/// order ascending.
pub(crate) fn rank<T: Scalar>(candidates: &mut [RankedCandidate<T>]) {
    candidates.sort_by(|a, b| {
        b.validation_accuracy
            .partial_cmp(&a.validation_accuracy)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cz_count.cmp(&b.cz_count))
            .then(a.sample_index.cmp(&b.sample_index))
    });
}

/// Fine-tunes the candidate's architecture starting from its inherited
/// pool parameters. `epochs = 0` skips training entirely and returns the
/// inherited parameters with a single metrics snapshot.
pub fn fine_tune<T: Scalar>(
    candidate: &RankedCandidate<T>,
    space: &SearchSpace,
    ctx: &EvalContext<T>,
    splits: &DataSplits<T>,
    config: &TrainConfig<T>,
) -> Result<TrainOutcome<T>> {
    let template = realize(space, &candidate.genotype)?;
    if config.epochs == 0 {
        let params = candidate.params.clone();
        let train_loss = ctx.dataset_loss(&template, &params, &splits.train)?;
        let valid_accuracy = ctx.accuracy(&template, &params, &splits.valid)?;
        let test_accuracy = ctx.accuracy(&template, &params, &splits.test)?;
        return Ok(TrainOutcome {
            params,
            trajectory: Trajectory::new(),
            metrics: vec![crate::classifier::EpochMetrics {
                epoch: 0,
                train_loss,
                valid_accuracy,
                test_accuracy,
            }],
        });
    }
    ctx.train_from(&template, candidate.params.clone(), splits, config)
}

/// Full pipeline configuration with the experiment defaults: 5 supernets
/// for 40 epochs, 100 ranked samples, 10 fine-tuning epochs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QasConfig<T> {
    pub supernet_count: usize,
    pub supernet_epochs: usize,
    pub search_samples: usize,
    pub fine_tune_epochs: usize,
    pub learning_rate: T,
    pub batch_size: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for QasConfig<T> {
    fn default() -> Self {
        Self {
            supernet_count: 5,
            supernet_epochs: 40,
            search_samples: 100,
            fine_tune_epochs: 10,
            learning_rate: T::of(0.2),
            batch_size: 4,
            seed: 0,
        }
    }
}

/// Everything the pipeline produced, winner first.
#[derive(Debug, Clone)]
pub struct QasOutcome<T> {
    pub winner: RankedCandidate<T>,
    pub candidates: Vec<RankedCandidate<T>>,
    pub requested_samples: usize,
    pub unique_samples: usize,
    pub supernet_logs: Vec<SupernetLog<T>>,
    pub fine_tune: TrainOutcome<T>,
}

/// Runs supernet training, search, ranking, and fine-tuning end to end.
pub fn run_pipeline<T: Scalar>(
    space: &SearchSpace,
    ctx: &EvalContext<T>,
    splits: &DataSplits<T>,
    config: &QasConfig<T>,
) -> Result<QasOutcome<T>> {
    let mut supernets = init_pools::<T>(space, config.supernet_count, config.seed)?;
    let train_config = SupernetTrainConfig {
        epochs: config.supernet_epochs,
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        seed: config.seed,
    };
    let supernet_logs = train_supernets(&mut supernets, ctx, &splits.train, &train_config)?;
    let outcome = search(&supernets, ctx, &splits.valid, config.search_samples, config.seed)?;
    let winner = outcome.candidates.first().cloned().ok_or(Error::Empty {
        what: "ranked candidates",
    })?;
    let fine_tune_config = TrainConfig {
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        epochs: config.fine_tune_epochs,
        seed: config.seed,
    };
    let fine_tuned = fine_tune(&winner, space, ctx, splits, &fine_tune_config)?;
    Ok(QasOutcome {
        winner,
        candidates: outcome.candidates,
        requested_samples: outcome.requested_samples,
        unique_samples: outcome.unique_samples,
        supernet_logs,
        fine_tune: fine_tuned,
    })
}

//! Glue between pruning, training and the search: the evaluator used for
//! every individual, and the choice of state the QFIM is computed on.

use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::{Evaluation, Evaluator};
use crate::genome::Genome;
use crate::qfim::{prune_redundant_with, PruneConfig, PruneResult};
use crate::simulator::StateVector;
use crate::trainer::{train, DatasetSplit, LabeledDataset, TrainConfig, TrainedModel};

/// Normalized mean of the prepared training states. Falls back to the first
/// sample if the mean vanishes.
pub fn reference_state(train: &LabeledDataset) -> Result<StateVector> {
    let first = train.inputs().first().ok_or(Error::Empty("training set"))?;
    let mut sum = vec![Complex64::new(0.0, 0.0); first.len()];
    for s in train.inputs() {
        for (acc, a) in sum.iter_mut().zip(s.amplitudes()) {
            *acc += a;
        }
    }
    let norm = sum.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm < 1e-9 {
        return Ok(first.clone());
    }
    StateVector::from_amplitudes(sum.into_iter().map(|a| a / norm).collect())
}

/// State the QFIM is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PruneInput {
    /// `|0…0⟩`: redundancy of the circuit on its own, ignoring the data.
    #[default]
    Zero,
    /// Normalized mean of the prepared training states.
    Mean,
}

impl FromStr for PruneInput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(PruneInput::Mean),
            "zero" => Ok(PruneInput::Zero),
            other => Err(Error::Config(format!(
                "unknown prune input `{other}` (expected mean or zero)"
            ))),
        }
    }
}

/// Result of pruning then training one genome.
#[derive(Debug, Clone, PartialEq)]
pub struct Assessment {
    pub prune: Option<PruneResult>,
    pub model: TrainedModel,
}

impl Assessment {
    pub fn genome<'a>(&'a self, original: &'a Genome) -> &'a Genome {
        self.prune.as_ref().map_or(original, |p| &p.pruned_genome)
    }
}

/// Prunes (optionally) and trains genomes against a fixed dataset split.
#[derive(Debug, Clone)]
pub struct ClassifierEvaluator<'a> {
    data: &'a DatasetSplit,
    reference: StateVector,
    pub train: TrainConfig,
    pub prune: PruneConfig,
    pub prune_enabled: bool,
}

impl<'a> ClassifierEvaluator<'a> {
    pub fn new(data: &'a DatasetSplit, train: TrainConfig) -> Result<Self> {
        Self::with_prune_input(data, train, PruneInput::default())
    }

    pub fn with_prune_input(data: &'a DatasetSplit, train: TrainConfig, input: PruneInput) -> Result<Self> {
        let n_qubits = data.train.n_qubits().ok_or(Error::Empty("training set"))?;
        let reference = match input {
            PruneInput::Mean => reference_state(&data.train)?,
            PruneInput::Zero => StateVector::zero(n_qubits)?,
        };
        Ok(ClassifierEvaluator {
            reference,
            data,
            train,
            prune: PruneConfig::default(),
            prune_enabled: true,
        })
    }

    pub fn reference(&self) -> &StateVector {
        &self.reference
    }

    pub fn data(&self) -> &DatasetSplit {
        self.data
    }

    /// Training only, no pruning.
    pub fn train_genome(&self, genome: &Genome, seed: u64, max_steps: usize) -> Result<TrainedModel> {
        self.check_geometry(genome)?;
        let cfg = TrainConfig {
            seed,
            max_steps,
            ..self.train
        };
        train(&genome.to_circuit(), self.data, &cfg)
    }

    fn check_geometry(&self, genome: &Genome) -> Result<()> {
        if genome.n_qubits() != self.reference.n_qubits() {
            return Err(Error::Geometry(format!(
                "genome has {} qubits, dataset needs {}",
                genome.n_qubits(),
                self.reference.n_qubits()
            )));
        }
        Ok(())
    }

    pub fn prune_genome(&self, genome: &Genome, seed: u64) -> Result<PruneResult> {
        self.check_geometry(genome)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prune_redundant_with(genome, &self.reference, &mut rng, &self.prune)
    }

    /// Prunes with `seed`, then trains the survivor with the same seed.
    pub fn assess(&self, genome: &Genome, seed: u64, max_steps: usize) -> Result<Assessment> {
        let prune = if self.prune_enabled {
            Some(self.prune_genome(genome, seed)?)
        } else {
            None
        };
        let target = prune.as_ref().map_or(genome, |p| &p.pruned_genome);
        let model = self.train_genome(target, seed, max_steps)?;
        Ok(Assessment { prune, model })
    }
}

impl Evaluator for ClassifierEvaluator<'_> {
    /// Accuracy is measured on the held-out split.
    fn evaluate(&self, genome: &Genome, seed: u64) -> Result<Evaluation> {
        let a = self.assess(genome, seed, self.train.max_steps)?;
        Ok(Evaluation {
            accuracy: a.model.test_accuracy,
            pruned: a.genome(genome).clone(),
            params: a.model.params,
        })
    }
}

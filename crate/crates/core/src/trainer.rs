//! Hybrid training of circuit parameters: `⟨Z⟩` readout on qubit 0, mean
//! squared error against ±1 labels, minibatch Adam.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::simulator::{expectation_and_gradient, run_circuit, Circuit, StateVector};

pub const READOUT_QUBIT: usize = 0;

/// Encoded samples (prepared states, encoding and prelude already applied)
/// with ±1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    inputs: Vec<StateVector>,
    labels: Vec<i8>,
}

impl LabeledDataset {
    pub fn new(inputs: Vec<StateVector>, labels: Vec<i8>) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::Dimension {
                expected: inputs.len(),
                actual: labels.len(),
            });
        }
        if let Some(l) = labels.iter().find(|l| l.abs() != 1) {
            return Err(Error::Data(format!("label {l} is not ±1")));
        }
        if let Some(first) = inputs.first() {
            if let Some(bad) = inputs.iter().find(|s| s.n_qubits() != first.n_qubits()) {
                return Err(Error::Dimension {
                    expected: first.len(),
                    actual: bad.len(),
                });
            }
        }
        Ok(LabeledDataset { inputs, labels })
    }

    pub fn inputs(&self) -> &[StateVector] {
        &self.inputs
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_qubits(&self) -> Option<usize> {
        self.inputs.first().map(StateVector::n_qubits)
    }

    /// Copy with every label negated.
    pub fn flipped(&self) -> LabeledDataset {
        LabeledDataset {
            inputs: self.inputs.clone(),
            labels: self.labels.iter().map(|l| -l).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            batch_size: 10,
            max_steps: 40,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: Vec<f64>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Minibatch loss at each step, evaluated before the update.
    pub loss_history: Vec<f64>,
}

/// Model output `⟨Z⟩` on the readout qubit.
pub fn predict(circuit: &Circuit, params: &[f64], encoded_input: &StateVector) -> Result<f64> {
    run_circuit(circuit, params, encoded_input)?.expectation_z(READOUT_QUBIT)
}

/// Sign of the output, ties to +1.
pub fn classify(output: f64) -> i8 {
    if output >= 0.0 {
        1
    } else {
        -1
    }
}

pub fn mse_loss(outputs: &[f64], labels: &[i8]) -> Result<f64> {
    if outputs.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if outputs.len() != labels.len() {
        return Err(Error::Dimension {
            expected: outputs.len(),
            actual: labels.len(),
        });
    }
    let sum: f64 = outputs
        .iter()
        .zip(labels)
        .map(|(o, &l)| (o - f64::from(l)).powi(2))
        .sum();
    Ok(sum / outputs.len() as f64)
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, cfg: &TrainConfig) {
    assert_eq!(params.len(), grads.len(), "parameter/gradient length mismatch");
    assert_eq!(params.len(), state.m.len(), "parameter/moment length mismatch");
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

/// MSE over `indices` and its gradient, chaining `dL/do = 2(o − y)/B` with
/// the circuit gradient of each sample.
pub fn batch_loss_and_gradient(
    circuit: &Circuit,
    params: &[f64],
    data: &LabeledDataset,
    indices: &[usize],
) -> Result<(f64, Vec<f64>)> {
    if indices.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let scale = 1.0 / indices.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; circuit.n_params()];
    for &i in indices {
        let (out, g) = expectation_and_gradient(circuit, params, &data.inputs[i], READOUT_QUBIT)?;
        let residual = out - f64::from(data.labels[i]);
        loss += residual * residual * scale;
        for (acc, gi) in grad.iter_mut().zip(&g) {
            *acc += 2.0 * residual * scale * gi;
        }
    }
    Ok((loss, grad))
}

/// Fraction of samples whose classified output equals the label.
pub fn evaluate(circuit: &Circuit, params: &[f64], data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let mut correct = 0usize;
    for (input, &label) in data.inputs.iter().zip(&data.labels) {
        if classify(predict(circuit, params, input)?) == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Minibatch Adam from parameters drawn uniformly on `[0, 2π)`. Batches are
/// drawn without replacement from a per-epoch shuffle; a trailing partial
/// batch is dropped and the order reshuffled.
pub fn train(circuit: &Circuit, data: &DatasetSplit, cfg: &TrainConfig) -> Result<TrainedModel> {
    train_with(circuit, data, cfg, |_, _, _| Ok(()))
}

/// [`train`], calling `on_step(step, batch_loss, updated_params)` after each
/// update.
pub fn train_with<F>(circuit: &Circuit, data: &DatasetSplit, cfg: &TrainConfig, mut on_step: F) -> Result<TrainedModel>
where
    F: FnMut(usize, f64, &[f64]) -> Result<()>,
{
    if data.train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if data.test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    if data.train.n_qubits() != Some(circuit.n_qubits()) {
        return Err(Error::Dimension {
            expected: 1 << circuit.n_qubits(),
            actual: data.train.inputs[0].len(),
        });
    }
    if cfg.batch_size == 0 || cfg.batch_size > data.train.len() {
        return Err(Error::Config(format!(
            "batch size {} must be in 1..={}",
            cfg.batch_size,
            data.train.len()
        )));
    }
    if cfg.learning_rate.is_nan() || cfg.learning_rate <= 0.0 {
        return Err(Error::Config(format!(
            "learning rate {} must be positive",
            cfg.learning_rate
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params: Vec<f64> = (0..circuit.n_params()).map(|_| rng.gen_range(0.0..TAU)).collect();
    let mut loss_history = Vec::new();

    if circuit.n_params() > 0 {
        let mut adam = AdamState::new(params.len());
        let mut order: Vec<usize> = (0..data.train.len()).collect();
        let mut cursor = order.len();
        for step in 0..cfg.max_steps {
            if cursor + cfg.batch_size > order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let batch = &order[cursor..cursor + cfg.batch_size];
            cursor += cfg.batch_size;
            let (loss, grad) = batch_loss_and_gradient(circuit, &params, &data.train, batch)?;
            loss_history.push(loss);
            adam_step(&mut params, &grad, &mut adam, cfg);
            on_step(step, loss, &params)?;
        }
    }

    Ok(TrainedModel {
        train_accuracy: evaluate(circuit, &params, &data.train)?,
        test_accuracy: evaluate(circuit, &params, &data.test)?,
        params,
        loss_history,
    })
}

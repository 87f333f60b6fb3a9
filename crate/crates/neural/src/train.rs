//! Adam training over (sequence, target) pairs.
//!
//! Full batch by default: the gradient is the mean over all instances,
//! accumulated per fixed-size chunk in parallel and combined in chunk order,
//! so results are bit-identical for any thread count. An optional batch size
//! switches to seeded mini-batch shuffling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::net::{HeadKind, LstmNet, Workspace};
use crate::NeuralError;

/// One training instance: an input sequence and the target the head is
/// trained against (next-step values, a one-hot block, or a 0/1 label).
pub type Sample = (Vec<Vec<f64>>, Vec<f64>);

/// Chunk size for deterministic parallel gradient accumulation.
const GRAD_CHUNK: usize = 64;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// `None` trains full-batch; `Some(b)` uses seeded mini-batches.
    pub batch_size: Option<usize>,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: None,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), NeuralError> {
        if self.epochs == 0 {
            return Err(NeuralError::EmptyInput("epochs"));
        }
        if !(self.learning_rate > 0.0)
            || !(self.beta1 > 0.0 && self.beta1 < 1.0)
            || !(self.beta2 > 0.0 && self.beta2 < 1.0)
        {
            return Err(NeuralError::EmptyInput("learning rate or betas out of range"));
        }
        Ok(())
    }
}

/// Per-epoch mean training loss.
#[derive(Debug, Clone)]
pub struct TrainTrace {
    pub epoch_losses: Vec<f64>,
}

impl TrainTrace {
    /// Means over consecutive windows of `w` epochs (tail window included).
    pub fn windowed_means(&self, w: usize) -> Vec<f64> {
        self.epoch_losses
            .chunks(w)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let b1t = 1.0 - cfg.beta1.powi(self.t as i32);
        let b2t = 1.0 - cfg.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grads[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

/// Mean loss and mean gradient over a slice of samples, accumulated in
/// fixed chunk order.
pub(crate) fn batch_gradient(net: &LstmNet, data: &[&Sample]) -> (f64, Vec<f64>) {
    let chunks: Vec<(f64, Vec<f64>)> = data
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut ws = Workspace::default();
            let mut grads = vec![0.0; net.num_params()];
            let mut loss = 0.0;
            for (seq, target) in chunk {
                loss += net.accumulate_gradient(&mut ws, seq, target, &mut grads);
            }
            (loss, grads)
        })
        .collect();
    let n = data.len() as f64;
    let mut total_loss = 0.0;
    let mut grads = vec![0.0; net.num_params()];
    for (loss, g) in chunks {
        total_loss += loss;
        for (acc, v) in grads.iter_mut().zip(&g) {
            *acc += v;
        }
    }
    for g in grads.iter_mut() {
        *g /= n;
    }
    (total_loss / n, grads)
}

fn check_data(net: &LstmNet, data: &[Sample]) -> Result<(), NeuralError> {
    if data.is_empty() {
        return Err(NeuralError::EmptyInput("training set"));
    }
    for (seq, target) in data {
        if seq.is_empty() {
            return Err(NeuralError::EmptyInput("sequence"));
        }
        for v in seq {
            if v.len() != net.input_dim() {
                return Err(NeuralError::DimensionMismatch {
                    expected: net.input_dim(),
                    got: v.len(),
                    context: "sequence step",
                });
            }
        }
        if target.len() != net.out_dim() {
            return Err(NeuralError::DimensionMismatch {
                expected: net.out_dim(),
                got: target.len(),
                context: "target",
            });
        }
    }
    Ok(())
}

/// Trains the net in place, returning the per-epoch loss trace. Fails with
/// the epoch index if the loss turns non-finite.
pub fn train(
    net: &mut LstmNet,
    data: &[Sample],
    cfg: &TrainConfig,
) -> Result<TrainTrace, NeuralError> {
    cfg.validate()?;
    check_data(net, data)?;
    if net.head() == HeadKind::Sigmoid {
        let positives = data.iter().filter(|(_, t)| t[0] >= 0.5).count();
        if positives == 0 || positives == data.len() {
            return Err(NeuralError::SingleClass);
        }
    }

    let mut adam = Adam::new(net.num_params());
    let mut trace = TrainTrace {
        epoch_losses: Vec::with_capacity(cfg.epochs),
    };
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    shuffle_rng.set_stream(7);

    for epoch in 0..cfg.epochs {
        let epoch_loss = match cfg.batch_size {
            None => {
                let refs: Vec<&Sample> = data.iter().collect();
                let (loss, grads) = batch_gradient(net, &refs);
                adam.step(&mut net.params, &grads, cfg);
                loss
            }
            Some(batch) => {
                // Seeded Fisher-Yates reshuffle each epoch.
                for i in (1..order.len()).rev() {
                    let j = shuffle_rng.random_range(0..=i);
                    order.swap(i, j);
                }
                let mut loss_sum = 0.0;
                let mut seen = 0usize;
                for ids in order.chunks(batch.max(1)) {
                    let refs: Vec<&Sample> = ids.iter().map(|&i| &data[i]).collect();
                    let (loss, grads) = batch_gradient(net, &refs);
                    adam.step(&mut net.params, &grads, cfg);
                    loss_sum += loss * refs.len() as f64;
                    seen += refs.len();
                }
                loss_sum / seen as f64
            }
        };
        if !epoch_loss.is_finite() {
            return Err(NeuralError::NanLoss { epoch });
        }
        trace.epoch_losses.push(epoch_loss);
    }
    net.epochs_trained += cfg.epochs as u64;
    Ok(trace)
}

/// Forecast-head flavor: numeric (linear + MSE) or categorical one-hot
/// (softmax + cross-entropy).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForecastHead {
    Numeric,
    Categorical,
}

/// Trains a fresh forecaster on next-step targets: input sequences are the
/// years before the last, targets the last year's values (numeric dims or a
/// one-hot community block).
pub fn train_forecaster(
    data: &[Sample],
    input_dim: usize,
    out_dim: usize,
    head: ForecastHead,
    hidden: &[usize],
    cfg: &TrainConfig,
) -> Result<(LstmNet, TrainTrace), NeuralError> {
    let kind = match head {
        ForecastHead::Numeric => HeadKind::Linear,
        ForecastHead::Categorical => HeadKind::Softmax,
    };
    let mut net = LstmNet::new(input_dim, hidden, out_dim, kind, cfg.rng_seed);
    let trace = train(&mut net, data, cfg)?;
    Ok((net, trace))
}

/// Trains a fresh binary classifier (single-unit sigmoid head) on labeled
/// sequences; errors when only one class is present.
pub fn train_classifier(
    data: &[Sample],
    input_dim: usize,
    hidden: &[usize],
    cfg: &TrainConfig,
) -> Result<(LstmNet, TrainTrace), NeuralError> {
    let mut net = LstmNet::new(input_dim, hidden, 1, HeadKind::Sigmoid, cfg.rng_seed);
    let trace = train(&mut net, data, cfg)?;
    Ok((net, trace))
}

/// Applies the trained head to a series: numeric values for the linear
/// head, a probability simplex for softmax, a probability for sigmoid.
pub fn forecast(net: &LstmNet, series: &[Vec<f64>]) -> Result<Vec<f64>, NeuralError> {
    net.output(series)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_samples(n: usize) -> Vec<Sample> {
        (0..n)
            .map(|i| {
                let c = i as f64 / n as f64;
                (vec![vec![c]; 5], vec![c])
            })
            .collect()
    }

    #[test]
    fn full_batch_training_is_thread_count_independent() {
        let data = constant_samples(70);
        let cfg = TrainConfig {
            epochs: 5,
            rng_seed: 3,
            ..TrainConfig::default()
        };
        let run = || {
            let mut net = LstmNet::new(1, &[6, 6], 1, HeadKind::Linear, 3);
            train(&mut net, &data, &cfg).unwrap();
            net.params().to_vec()
        };
        let a = run();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(run);
        assert_eq!(a, b);
    }

    #[test]
    fn single_class_training_errors() {
        let data: Vec<Sample> = (0..4).map(|_| (vec![vec![0.1]; 3], vec![1.0])).collect();
        let cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let mut net = LstmNet::new(1, &[4], 1, HeadKind::Sigmoid, 1);
        assert!(matches!(
            train(&mut net, &data, &cfg),
            Err(NeuralError::SingleClass)
        ));
    }

    #[test]
    fn minibatch_training_runs_and_is_seeded() {
        let data = constant_samples(30);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: Some(8),
            rng_seed: 5,
            ..TrainConfig::default()
        };
        let mut a = LstmNet::new(1, &[4], 1, HeadKind::Linear, 5);
        let mut b = LstmNet::new(1, &[4], 1, HeadKind::Linear, 5);
        train(&mut a, &data, &cfg).unwrap();
        train(&mut b, &data, &cfg).unwrap();
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn training_rejects_empty_set() {
        let cfg = TrainConfig::default();
        let mut net = LstmNet::new(1, &[4], 1, HeadKind::Linear, 1);
        assert!(matches!(
            train(&mut net, &[], &cfg),
            Err(NeuralError::EmptyInput(_))
        ));
    }
}

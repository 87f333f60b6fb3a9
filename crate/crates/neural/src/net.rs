//! Stacked LSTM with a task head, stored as one flat parameter vector.
//!
//! Gate blocks are stacked in the order input, forget, candidate, output.
//! Per layer the parameters are W (4h x in), U (4h x h) and b (4h); the head
//! adds W_out (out x h_last) and b_out. Flat storage keeps the adam state,
//! finite-difference checks, and checkpointing aligned with a single index
//! space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::math::{
    axpy, bce_from_logit, matvec_acc, matvec_transpose_acc, outer_acc, sigmoid, softmax,
};
use crate::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    /// Identity head trained with mean-squared error.
    Linear,
    /// Softmax head trained with categorical cross-entropy.
    Softmax,
    /// Single-unit sigmoid head trained with binary cross-entropy.
    Sigmoid,
}

#[derive(Debug, Clone)]
struct LayerOffsets {
    w: usize,
    u: usize,
    b: usize,
    input_dim: usize,
    hidden_dim: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct NetLayout {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub out_dim: usize,
    pub head: HeadKind,
    layers: Vec<LayerOffsets>,
    head_w: usize,
    head_b: usize,
    len: usize,
}

impl NetLayout {
    fn new(input_dim: usize, hidden: &[usize], out_dim: usize, head: HeadKind) -> Self {
        assert!(!hidden.is_empty(), "at least one recurrent layer");
        assert!(input_dim > 0 && out_dim > 0);
        if head == HeadKind::Sigmoid {
            assert_eq!(out_dim, 1, "sigmoid head is a single unit");
        }
        let mut offset = 0;
        let mut layers = Vec::new();
        let mut prev = input_dim;
        for &h in hidden {
            let w = offset;
            offset += 4 * h * prev;
            let u = offset;
            offset += 4 * h * h;
            let b = offset;
            offset += 4 * h;
            layers.push(LayerOffsets {
                w,
                u,
                b,
                input_dim: prev,
                hidden_dim: h,
            });
            prev = h;
        }
        let head_w = offset;
        offset += out_dim * prev;
        let head_b = offset;
        offset += out_dim;
        NetLayout {
            input_dim,
            hidden: hidden.to_vec(),
            out_dim,
            head,
            layers,
            head_w,
            head_b,
            len: offset,
        }
    }
}

/// Per-step cached activations of one layer.
#[derive(Debug, Clone, Default)]
struct StepCache {
    /// Post-activation gates [i; f; g; o], length 4h.
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

/// Reusable buffers for forward/backward passes; create one per worker and
/// reuse it across instances.
#[derive(Debug, Default)]
pub struct Workspace {
    steps: Vec<Vec<StepCache>>,
    logits: Vec<f64>,
    probs: Vec<f64>,
    // backward scratch
    d_gates: Vec<f64>,
    dh: Vec<f64>,
    dc: Vec<f64>,
    dh_carry: Vec<f64>,
    dh_seq: Vec<Vec<Vec<f64>>>,
}

/// Final (h, c) pair per layer after consuming a sequence.
#[derive(Debug, Clone)]
pub struct LstmFinalState {
    pub hidden: Vec<Vec<f64>>,
    pub cell: Vec<Vec<f64>>,
}

/// Checkpoint payload: shapes, seed, epoch count and the raw parameters.
#[derive(Serialize, Deserialize)]
struct Checkpoint {
    input_dim: usize,
    hidden: Vec<usize>,
    out_dim: usize,
    head: HeadKind,
    init_seed: u64,
    epochs_trained: u64,
    params: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmNet {
    pub(crate) params: Vec<f64>,
    pub(crate) layout: NetLayout,
    pub init_seed: u64,
    pub epochs_trained: u64,
}

impl LstmNet {
    /// Fresh network with uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights,
    /// zero biases except the forget gate at +1, drawn from a seeded RNG.
    pub fn new(
        input_dim: usize,
        hidden: &[usize],
        out_dim: usize,
        head: HeadKind,
        seed: u64,
    ) -> Self {
        let layout = NetLayout::new(input_dim, hidden, out_dim, head);
        let mut params = vec![0.0; layout.len];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &layout.layers {
            let h = layer.hidden_dim;
            let wb = 1.0 / (layer.input_dim as f64).sqrt();
            for p in &mut params[layer.w..layer.w + 4 * h * layer.input_dim] {
                *p = rng.random_range(-wb..wb);
            }
            let ub = 1.0 / (h as f64).sqrt();
            for p in &mut params[layer.u..layer.u + 4 * h * h] {
                *p = rng.random_range(-ub..ub);
            }
            // Biases start at zero; forget gate (second block) at +1.
            for p in &mut params[layer.b + h..layer.b + 2 * h] {
                *p = 1.0;
            }
        }
        let hb = 1.0 / (*hidden.last().unwrap() as f64).sqrt();
        for p in &mut params[layout.head_w..layout.head_w + out_dim * hidden[hidden.len() - 1]] {
            *p = rng.random_range(-hb..hb);
        }
        LstmNet {
            params,
            layout,
            init_seed: seed,
            epochs_trained: 0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layout.input_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layout.out_dim
    }

    pub fn hidden_dims(&self) -> &[usize] {
        &self.layout.hidden
    }

    pub fn head(&self) -> HeadKind {
        self.layout.head
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn check_seq(&self, seq: &[Vec<f64>]) -> Result<(), NeuralError> {
        if seq.is_empty() {
            return Err(NeuralError::EmptyInput("sequence"));
        }
        for v in seq {
            if v.len() != self.layout.input_dim {
                return Err(NeuralError::DimensionMismatch {
                    expected: self.layout.input_dim,
                    got: v.len(),
                    context: "sequence step",
                });
            }
        }
        Ok(())
    }

    /// Runs the recurrence, filling the workspace caches; returns nothing.
    fn forward_into(&self, ws: &mut Workspace, seq: &[Vec<f64>]) {
        let n_layers = self.layout.layers.len();
        let steps = seq.len();
        ws.steps.resize_with(n_layers, Vec::new);
        for (l, layer) in self.layout.layers.iter().enumerate() {
            let h = layer.hidden_dim;
            ws.steps[l].resize_with(steps, StepCache::default);
            for cache in &mut ws.steps[l] {
                cache.gates.resize(4 * h, 0.0);
                cache.c.resize(h, 0.0);
                cache.tanh_c.resize(h, 0.0);
                cache.h.resize(h, 0.0);
            }
        }

        for t in 0..steps {
            for (l, layer) in self.layout.layers.iter().enumerate() {
                let h = layer.hidden_dim;
                let ind = layer.input_dim;
                let (done, rest) = ws.steps.split_at_mut(l);
                let (prev_steps, cur_steps) = rest[0].split_at_mut(t);
                let StepCache {
                    gates: pre,
                    c,
                    tanh_c,
                    h: h_out,
                } = &mut cur_steps[0];
                let x: &[f64] = if l == 0 { &seq[t] } else { &done[l - 1][t].h };
                // Gate preactivations: W x + U h_prev + b.
                pre.copy_from_slice(&self.params[layer.b..layer.b + 4 * h]);
                matvec_acc(pre, &self.params[layer.w..layer.w + 4 * h * ind], ind, x);
                if t > 0 {
                    matvec_acc(
                        pre,
                        &self.params[layer.u..layer.u + 4 * h * h],
                        h,
                        &prev_steps[t - 1].h,
                    );
                }
                // Activations and state update.
                for j in 0..h {
                    pre[j] = sigmoid(pre[j]); // input gate
                    pre[h + j] = sigmoid(pre[h + j]); // forget gate
                    pre[2 * h + j] = pre[2 * h + j].tanh(); // candidate
                    pre[3 * h + j] = sigmoid(pre[3 * h + j]); // output gate
                }
                for j in 0..h {
                    let c_prev = if t > 0 { prev_steps[t - 1].c[j] } else { 0.0 };
                    let cj = pre[h + j] * c_prev + pre[j] * pre[2 * h + j];
                    let tc = cj.tanh();
                    c[j] = cj;
                    tanh_c[j] = tc;
                    h_out[j] = pre[3 * h + j] * tc;
                }
            }
        }

        // Head on the last hidden state of the top layer.
        let last_h = &ws.steps[n_layers - 1][steps - 1].h;
        let out = self.layout.out_dim;
        let h_last = *self.layout.hidden.last().unwrap();
        ws.logits.resize(out, 0.0);
        ws.logits
            .copy_from_slice(&self.params[self.layout.head_b..self.layout.head_b + out]);
        matvec_acc(
            &mut ws.logits,
            &self.params[self.layout.head_w..self.layout.head_w + out * h_last],
            h_last,
            last_h,
        );
        ws.probs.resize(out, 0.0);
        match self.layout.head {
            HeadKind::Linear => ws.probs.copy_from_slice(&ws.logits),
            HeadKind::Softmax => softmax(&ws.logits, &mut ws.probs),
            HeadKind::Sigmoid => ws.probs[0] = sigmoid(ws.logits[0]),
        }
    }

    /// Head output for a sequence: raw values (linear), probabilities
    /// summing to one (softmax), or a single probability (sigmoid).
    pub fn output(&self, seq: &[Vec<f64>]) -> Result<Vec<f64>, NeuralError> {
        self.check_seq(seq)?;
        let mut ws = Workspace::default();
        self.forward_into(&mut ws, seq);
        Ok(ws.probs.clone())
    }

    /// Per-step hidden vectors of the top layer plus the final (h, c) state
    /// of every layer.
    pub fn hidden_sequence(
        &self,
        seq: &[Vec<f64>],
    ) -> Result<(Vec<Vec<f64>>, LstmFinalState), NeuralError> {
        self.check_seq(seq)?;
        let mut ws = Workspace::default();
        self.forward_into(&mut ws, seq);
        let top = ws.steps.len() - 1;
        let outputs = ws.steps[top].iter().map(|s| s.h.clone()).collect();
        let last = seq.len() - 1;
        let state = LstmFinalState {
            hidden: ws.steps.iter().map(|l| l[last].h.clone()).collect(),
            cell: ws.steps.iter().map(|l| l[last].c.clone()).collect(),
        };
        Ok((outputs, state))
    }

    /// Loss of one (sequence, target) pair under the head's criterion.
    pub fn loss(&self, seq: &[Vec<f64>], target: &[f64]) -> Result<f64, NeuralError> {
        self.check_seq(seq)?;
        self.check_target(target)?;
        let mut ws = Workspace::default();
        self.forward_into(&mut ws, seq);
        Ok(self.loss_from_probs(&ws, target))
    }

    fn check_target(&self, target: &[f64]) -> Result<(), NeuralError> {
        if target.len() != self.layout.out_dim {
            return Err(NeuralError::DimensionMismatch {
                expected: self.layout.out_dim,
                got: target.len(),
                context: "target",
            });
        }
        Ok(())
    }

    fn loss_from_probs(&self, ws: &Workspace, target: &[f64]) -> f64 {
        match self.layout.head {
            HeadKind::Linear => {
                let out = self.layout.out_dim as f64;
                ws.probs
                    .iter()
                    .zip(target)
                    .map(|(y, t)| (y - t) * (y - t))
                    .sum::<f64>()
                    / out
            }
            HeadKind::Softmax => {
                // Cross-entropy via log-sum-exp of the cached logits.
                let max = ws.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = ws.logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
                ws.logits
                    .iter()
                    .zip(target)
                    .map(|(&z, &t)| -t * (z - lse))
                    .sum()
            }
            HeadKind::Sigmoid => bce_from_logit(ws.logits[0], target[0]),
        }
    }

    /// Forward plus backward for one instance; accumulates parameter
    /// gradients into `grads` (flat, same indexing as `params`) and returns
    /// the loss. `ws` is reused scratch.
    pub(crate) fn accumulate_gradient(
        &self,
        ws: &mut Workspace,
        seq: &[Vec<f64>],
        target: &[f64],
        grads: &mut [f64],
    ) -> f64 {
        self.forward_into(ws, seq);
        let loss = self.loss_from_probs(ws, target);

        let steps = seq.len();
        let n_layers = self.layout.layers.len();
        let out = self.layout.out_dim;
        let h_last = *self.layout.hidden.last().unwrap();

        // dz at the head: identical algebra for all three heads.
        let mut dz = vec![0.0; out];
        match self.layout.head {
            HeadKind::Linear => {
                for j in 0..out {
                    dz[j] = 2.0 * (ws.probs[j] - target[j]) / out as f64;
                }
            }
            HeadKind::Softmax | HeadKind::Sigmoid => {
                for j in 0..out {
                    dz[j] = ws.probs[j] - target[j];
                }
            }
        }

        // Head parameter gradients and dh for the top layer's last step.
        outer_acc(
            &mut grads[self.layout.head_w..self.layout.head_w + out * h_last],
            &dz,
            &ws.steps[n_layers - 1][steps - 1].h,
        );
        axpy(
            &mut grads[self.layout.head_b..self.layout.head_b + out],
            1.0,
            &dz,
        );

        // dh_seq[l][t]: gradient flowing into layer l's hidden output at t.
        ws.dh_seq.resize_with(n_layers, Vec::new);
        for (l, layer) in self.layout.layers.iter().enumerate() {
            ws.dh_seq[l].resize_with(steps, Vec::new);
            for v in &mut ws.dh_seq[l] {
                v.resize(layer.hidden_dim, 0.0);
                v.fill(0.0);
            }
        }
        matvec_transpose_acc(
            &mut ws.dh_seq[n_layers - 1][steps - 1],
            &self.params[self.layout.head_w..self.layout.head_w + out * h_last],
            h_last,
            &dz,
        );

        for l in (0..n_layers).rev() {
            let layer = &self.layout.layers[l];
            let h = layer.hidden_dim;
            let ind = layer.input_dim;
            ws.dh.resize(h, 0.0);
            ws.dc.resize(h, 0.0);
            ws.dc.fill(0.0);
            ws.d_gates.resize(4 * h, 0.0);
            ws.dh_carry.resize(h, 0.0);
            ws.dh_carry.fill(0.0);
            for t in (0..steps).rev() {
                for j in 0..h {
                    ws.dh[j] = ws.dh_seq[l][t][j] + ws.dh_carry[j];
                }
                let cache = &ws.steps[l][t];
                let dg = &mut ws.d_gates;
                for j in 0..h {
                    let i_g = cache.gates[j];
                    let f_g = cache.gates[h + j];
                    let g_g = cache.gates[2 * h + j];
                    let o_g = cache.gates[3 * h + j];
                    let tc = cache.tanh_c[j];
                    let c_prev = if t > 0 { ws.steps[l][t - 1].c[j] } else { 0.0 };

                    let d_o = ws.dh[j] * tc;
                    let dc = ws.dc[j] + ws.dh[j] * o_g * (1.0 - tc * tc);
                    let d_i = dc * g_g;
                    let d_f = dc * c_prev;
                    let d_g = dc * i_g;

                    dg[j] = d_i * i_g * (1.0 - i_g);
                    dg[h + j] = d_f * f_g * (1.0 - f_g);
                    dg[2 * h + j] = d_g * (1.0 - g_g * g_g);
                    dg[3 * h + j] = d_o * o_g * (1.0 - o_g);
                    ws.dc[j] = dc * f_g; // becomes dc for step t-1
                }

                let x: &[f64] = if l == 0 { &seq[t] } else { &ws.steps[l - 1][t].h };
                outer_acc(&mut grads[layer.w..layer.w + 4 * h * ind], &ws.d_gates, x);
                if t > 0 {
                    outer_acc(
                        &mut grads[layer.u..layer.u + 4 * h * h],
                        &ws.d_gates,
                        &ws.steps[l][t - 1].h,
                    );
                }
                axpy(&mut grads[layer.b..layer.b + 4 * h], 1.0, &ws.d_gates);

                if l > 0 {
                    // Route dx into the layer below.
                    let (lower, _) = ws.dh_seq.split_at_mut(l);
                    matvec_transpose_acc(
                        &mut lower[l - 1][t],
                        &self.params[layer.w..layer.w + 4 * h * ind],
                        ind,
                        &ws.d_gates,
                    );
                }
                ws.dh_carry.fill(0.0);
                matvec_transpose_acc(
                    &mut ws.dh_carry,
                    &self.params[layer.u..layer.u + 4 * h * h],
                    h,
                    &ws.d_gates,
                );
            }
        }
        loss
    }

    /// Serializes shapes, seed, epoch count and parameters; the f64 encoding
    /// is shortest-round-trip so loading restores bits exactly.
    pub fn to_checkpoint_string(&self) -> String {
        let cp = Checkpoint {
            input_dim: self.layout.input_dim,
            hidden: self.layout.hidden.clone(),
            out_dim: self.layout.out_dim,
            head: self.layout.head,
            init_seed: self.init_seed,
            epochs_trained: self.epochs_trained,
            params: self.params.clone(),
        };
        serde_json::to_string(&cp).expect("checkpoint serialization")
    }

    pub fn from_checkpoint_str(text: &str) -> Result<Self, NeuralError> {
        let cp: Checkpoint =
            serde_json::from_str(text).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
        let layout = NetLayout::new(cp.input_dim, &cp.hidden, cp.out_dim, cp.head);
        if cp.params.len() != layout.len {
            return Err(NeuralError::Checkpoint(format!(
                "parameter count {} does not match shapes (expected {})",
                cp.params.len(),
                layout.len
            )));
        }
        Ok(LstmNet {
            params: cp.params,
            layout,
            init_seed: cp.init_seed,
            epochs_trained: cp.epochs_trained,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), NeuralError> {
        std::fs::write(path, self.to_checkpoint_string())
            .map_err(|e| NeuralError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, NeuralError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NeuralError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_checkpoint_str(&text)
    }
}

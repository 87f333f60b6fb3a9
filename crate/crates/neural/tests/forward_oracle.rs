//! Forward-pass oracle: an independently coded, gate-by-gate scalar-loop
//! recomputation of the stacked LSTM, with parameters written into the flat
//! vector by this test's own offset arithmetic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kcn_neural::{HeadKind, LstmNet};

type Mat = Vec<Vec<f64>>;

struct OracleLayer {
    // One matrix/vector per gate, order: input, forget, candidate, output.
    w: [Mat; 4],
    u: [Mat; 4],
    b: [Vec<f64>; 4],
}

struct Oracle {
    layers: Vec<OracleLayer>,
    head_w: Mat,
    head_b: Vec<f64>,
}

fn rand_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(-0.7..0.7)).collect())
        .collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Oracle {
    fn random(rng: &mut ChaCha8Rng, input_dim: usize, hidden: &[usize], out_dim: usize) -> Self {
        let mut layers = Vec::new();
        let mut prev = input_dim;
        for &h in hidden {
            layers.push(OracleLayer {
                w: std::array::from_fn(|_| rand_mat(rng, h, prev)),
                u: std::array::from_fn(|_| rand_mat(rng, h, h)),
                b: std::array::from_fn(|_| (0..h).map(|_| rng.random_range(-0.5..0.5)).collect()),
            });
            prev = h;
        }
        Oracle {
            layers,
            head_w: rand_mat(rng, out_dim, prev),
            head_b: (0..out_dim).map(|_| rng.random_range(-0.5..0.5)).collect(),
        }
    }

    /// Writes the oracle parameters into the net's flat layout: per layer
    /// W (4h x in) with gate blocks stacked row-wise, then U, then b; head
    /// W and b at the end. Offsets computed here, independently.
    fn write_into(&self, net: &mut LstmNet, input_dim: usize, hidden: &[usize], out_dim: usize) {
        let params = net.params_mut();
        let mut off = 0;
        let mut prev = input_dim;
        for (l, &h) in hidden.iter().enumerate() {
            let layer = &self.layers[l];
            for gate in 0..4 {
                for j in 0..h {
                    for k in 0..prev {
                        params[off + (gate * h + j) * prev + k] = layer.w[gate][j][k];
                    }
                }
            }
            off += 4 * h * prev;
            for gate in 0..4 {
                for j in 0..h {
                    for k in 0..h {
                        params[off + (gate * h + j) * h + k] = layer.u[gate][j][k];
                    }
                }
            }
            off += 4 * h * h;
            for gate in 0..4 {
                for j in 0..h {
                    params[off + gate * h + j] = layer.b[gate][j];
                }
            }
            off += 4 * h;
            prev = h;
        }
        for j in 0..out_dim {
            for k in 0..prev {
                params[off + j * prev + k] = self.head_w[j][k];
            }
        }
        off += out_dim * prev;
        for j in 0..out_dim {
            params[off + j] = self.head_b[j];
        }
        off += out_dim;
        assert_eq!(off, params.len(), "layout sizes must agree");
    }

    /// Gate-by-gate scalar recomputation; returns the top layer's hidden
    /// vector per step and the head linear output.
    fn forward(&self, seq: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut inputs: Vec<Vec<f64>> = seq.to_vec();
        let mut top = Vec::new();
        for layer in &self.layers {
            let h = layer.b[0].len();
            let mut h_prev = vec![0.0; h];
            let mut c_prev = vec![0.0; h];
            let mut outs = Vec::new();
            for x in &inputs {
                let mut h_t = vec![0.0; h];
                let mut c_t = vec![0.0; h];
                for j in 0..h {
                    let mut pre = [0.0f64; 4];
                    for gate in 0..4 {
                        let mut acc = layer.b[gate][j];
                        for (k, &xv) in x.iter().enumerate() {
                            acc += layer.w[gate][j][k] * xv;
                        }
                        for (k, &hv) in h_prev.iter().enumerate() {
                            acc += layer.u[gate][j][k] * hv;
                        }
                        pre[gate] = acc;
                    }
                    let i_g = sigmoid(pre[0]);
                    let f_g = sigmoid(pre[1]);
                    let g_g = pre[2].tanh();
                    let o_g = sigmoid(pre[3]);
                    c_t[j] = f_g * c_prev[j] + i_g * g_g;
                    h_t[j] = o_g * c_t[j].tanh();
                }
                outs.push(h_t.clone());
                h_prev = h_t;
                c_prev = c_t;
            }
            inputs = outs.clone();
            top = outs;
        }
        let last = top.last().unwrap();
        let head: Vec<f64> = self
            .head_w
            .iter()
            .zip(&self.head_b)
            .map(|(row, b)| {
                let mut acc = *b;
                for (k, &hv) in last.iter().enumerate() {
                    acc += row[k] * hv;
                }
                acc
            })
            .collect();
        (top, head)
    }
}

#[test]
fn forward_matches_scalar_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for (input_dim, hidden, out_dim, steps) in [
        (3usize, vec![5usize, 4], 2usize, 7usize),
        (1, vec![6, 6], 1, 4),
        (8, vec![3], 5, 6),
    ] {
        let oracle = Oracle::random(&mut rng, input_dim, &hidden, out_dim);
        let mut net = LstmNet::new(input_dim, &hidden, out_dim, HeadKind::Linear, 0);
        oracle.write_into(&mut net, input_dim, &hidden, out_dim);

        let seq: Vec<Vec<f64>> = (0..steps)
            .map(|_| (0..input_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();

        let (hidden_seq, _) = net.hidden_sequence(&seq).unwrap();
        let output = net.output(&seq).unwrap();
        let (oracle_hidden, oracle_head) = oracle.forward(&seq);

        for (t, (got, want)) in hidden_seq.iter().zip(&oracle_hidden).enumerate() {
            for (j, (a, b)) in got.iter().zip(want).enumerate() {
                assert!(
                    (a - b).abs() < 1e-10,
                    "hidden mismatch at step {t} unit {j}: {a} vs {b}"
                );
            }
        }
        for (a, b) in output.iter().zip(&oracle_head) {
            assert!((a - b).abs() < 1e-10, "head mismatch: {a} vs {b}");
        }
    }
}

#[test]
fn forward_is_deterministic_across_calls() {
    let net = LstmNet::new(4, &[8, 8], 3, HeadKind::Softmax, 13);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let seq: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let a = net.output(&seq).unwrap();
    let b = net.output(&seq).unwrap();
    assert_eq!(a, b);
}

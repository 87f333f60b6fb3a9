//! Dense kernels and activations for the LSTM hot path.
//!
//! Dot products use four independent accumulators in a fixed combination
//! order: fast enough to vectorize, deterministic across runs and thread
//! counts.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let rem_a = chunks_a.remainder();
    let rem_b = chunks_b.remainder();
    for (pa, pb) in chunks_a.zip(chunks_b) {
        acc[0] += pa[0] * pb[0];
        acc[1] += pa[1] * pb[1];
        acc[2] += pa[2] * pb[2];
        acc[3] += pa[3] * pb[3];
    }
    let mut tail = 0.0;
    for (x, y) in rem_a.iter().zip(rem_b) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// out[r] += M[r, :] . x for a row-major (rows x cols) matrix slice.
#[inline]
pub fn matvec_acc(out: &mut [f64], m: &[f64], cols: usize, x: &[f64]) {
    debug_assert_eq!(m.len(), out.len() * cols);
    for (r, o) in out.iter_mut().enumerate() {
        *o += dot(&m[r * cols..(r + 1) * cols], x);
    }
}

/// out[k] += sum_r dz[r] * M[r, k]: transposed product, row-major M.
#[inline]
pub fn matvec_transpose_acc(out: &mut [f64], m: &[f64], cols: usize, dz: &[f64]) {
    debug_assert_eq!(m.len(), dz.len() * cols);
    for (r, &s) in dz.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        axpy(out, s, &m[r * cols..(r + 1) * cols]);
    }
}

/// out += s * v.
#[inline]
pub fn axpy(out: &mut [f64], s: f64, v: &[f64]) {
    debug_assert_eq!(out.len(), v.len());
    for (o, &x) in out.iter_mut().zip(v) {
        *o += s * x;
    }
}

/// Rank-one accumulation: G[r, k] += dz[r] * x[k], row-major G.
#[inline]
pub fn outer_acc(g: &mut [f64], dz: &[f64], x: &[f64]) {
    debug_assert_eq!(g.len(), dz.len() * x.len());
    let cols = x.len();
    for (r, &s) in dz.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        axpy(&mut g[r * cols..(r + 1) * cols], s, x);
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax into `out`.
pub fn softmax(z: &[f64], out: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Binary cross-entropy from the logit, stable for large |z|.
pub fn bce_from_logit(z: f64, target: f64) -> f64 {
    z.max(0.0) - z * target + (1.0 + (-z.abs()).exp()).ln()
}

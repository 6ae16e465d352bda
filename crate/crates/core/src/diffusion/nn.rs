//! Minimal neural-net primitives with explicit forward/backward passes.
//!
//! Everything is generic over the float type: training and sampling run in
//! f32, while the finite-difference gradient test instantiates the identical
//! code in f64. Parameters live in one flat buffer with named (rows, cols)
//! entries, which keeps checkpointing, Adam state and per-weight gradient
//! checks trivial.

use ndarray::{Array1, Array2, ArrayView2, Axis, NdFloat};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::sync::Arc;

/// Named parameter layout shared between a store and its optimizer state.
#[derive(Debug, Clone)]
pub struct ParamLayout {
    entries: Vec<Entry>,
    by_name: HashMap<String, usize>,
    total: usize,
}

#[derive(Debug, Clone)]
pub struct Entry {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Entry {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }
}

#[derive(Default)]
pub struct LayoutBuilder {
    entries: Vec<Entry>,
    total: usize,
}

impl LayoutBuilder {
    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize) {
        let name = name.into();
        self.entries.push(Entry { name, offset: self.total, rows, cols });
        self.total += rows * cols;
    }

    pub fn build(self) -> Arc<ParamLayout> {
        let by_name = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.name.clone(), i))
            .collect();
        Arc::new(ParamLayout { entries: self.entries, by_name, total: self.total })
    }
}

impl ParamLayout {
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn entry(&self, name: &str) -> &Entry {
        let idx = self.by_name[name];
        &self.entries[idx]
    }
}

/// Flat parameter buffer plus an equally-shaped gradient buffer.
pub struct ParamStore<F> {
    pub layout: Arc<ParamLayout>,
    pub data: Vec<F>,
    pub grad: Vec<F>,
}

impl<F: NdFloat> ParamStore<F> {
    pub fn zeros(layout: Arc<ParamLayout>) -> Self {
        let n = layout.total();
        Self { layout, data: vec![F::zero(); n], grad: vec![F::zero(); n] }
    }

    /// Gaussian init with per-entry std; biases and norm gains are handled by
    /// the model init, which overwrites what it needs.
    pub fn init_normal(&mut self, rng: &mut ChaCha8Rng, std: f64) {
        for v in self.data.iter_mut() {
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen();
            let g = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            *v = F::from(g * std).unwrap();
        }
    }

    pub fn view(&self, name: &str) -> ArrayView2<'_, F> {
        let e = self.layout.entry(name);
        ArrayView2::from_shape((e.rows, e.cols), &self.data[e.offset..e.offset + e.len()])
            .expect("entry shape")
    }

    pub fn set(&mut self, name: &str, value: &Array2<F>) {
        let e = self.layout.entry(name).clone();
        assert_eq!((e.rows, e.cols), value.dim(), "{name}");
        let slice = &mut self.data[e.offset..e.offset + e.len()];
        for (dst, src) in slice.iter_mut().zip(value.iter()) {
            *dst = *src;
        }
    }

    pub fn accumulate_grad(&mut self, name: &str, contribution: &Array2<F>) {
        let e = self.layout.entry(name).clone();
        assert_eq!((e.rows, e.cols), contribution.dim(), "{name}");
        let slice = &mut self.grad[e.offset..e.offset + e.len()];
        for (dst, src) in slice.iter_mut().zip(contribution.iter()) {
            *dst = *dst + *src;
        }
    }

    pub fn zero_grad(&mut self) {
        for g in self.grad.iter_mut() {
            *g = F::zero();
        }
    }

    /// Adds another store's gradients into this one (batch reduction).
    pub fn merge_grad(&mut self, other: &ParamStore<F>) {
        for (dst, src) in self.grad.iter_mut().zip(other.grad.iter()) {
            *dst = *dst + *src;
        }
    }
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

/// y = x W + b with W: (d_in, d_out), x: (L, d_in).
pub fn linear_forward<F: NdFloat>(
    store: &ParamStore<F>,
    w: &str,
    b: &str,
    x: &Array2<F>,
) -> Array2<F> {
    let mut y = x.dot(&store.view(w));
    let bias = store.view(b);
    let bias_row = bias.row(0);
    for mut row in y.rows_mut() {
        row += &bias_row;
    }
    y
}

/// Returns dx and accumulates dW, db.
pub fn linear_backward<F: NdFloat>(
    store: &mut ParamStore<F>,
    w: &str,
    b: &str,
    x: &Array2<F>,
    dy: &Array2<F>,
) -> Array2<F> {
    let dw = x.t().dot(dy);
    let db = dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dx = dy.dot(&store.view(w).t());
    store.accumulate_grad(w, &dw);
    store.accumulate_grad(b, &db);
    dx
}

// ---------------------------------------------------------------------------
// LayerNorm over the feature axis
// ---------------------------------------------------------------------------

pub struct LayerNormCache<F> {
    x_hat: Array2<F>,
    inv_std: Array1<F>,
}

pub fn layer_norm_forward<F: NdFloat>(
    store: &ParamStore<F>,
    gain: &str,
    bias: &str,
    x: &Array2<F>,
) -> (Array2<F>, LayerNormCache<F>) {
    let eps = F::from(1e-5).unwrap();
    let d = F::from(x.ncols()).unwrap();
    let mean = x.sum_axis(Axis(1)) / d;
    let mut x_hat = x.clone();
    for (mut row, &m) in x_hat.rows_mut().into_iter().zip(mean.iter()) {
        row.mapv_inplace(|v| v - m);
    }
    let var = x_hat.mapv(|v| v * v).sum_axis(Axis(1)) / d;
    let inv_std = var.mapv(|v| F::one() / (v + eps).sqrt());
    for (mut row, &s) in x_hat.rows_mut().into_iter().zip(inv_std.iter()) {
        row.mapv_inplace(|v| v * s);
    }
    let g = store.view(gain);
    let b = store.view(bias);
    let mut y = x_hat.clone();
    for mut row in y.rows_mut() {
        row *= &g.row(0);
        row += &b.row(0);
    }
    (y, LayerNormCache { x_hat, inv_std })
}

pub fn layer_norm_backward<F: NdFloat>(
    store: &mut ParamStore<F>,
    gain: &str,
    bias: &str,
    cache: &LayerNormCache<F>,
    dy: &Array2<F>,
) -> Array2<F> {
    let d = F::from(dy.ncols()).unwrap();
    let dgain = (dy * &cache.x_hat).sum_axis(Axis(0)).insert_axis(Axis(0));
    let dbias = dy.sum_axis(Axis(0)).insert_axis(Axis(0));

    let g = store.view(gain).row(0).to_owned();
    let mut dxhat = dy.clone();
    for mut row in dxhat.rows_mut() {
        row *= &g.view();
    }
    // dx = inv_std * (dxhat - mean(dxhat) - x_hat * mean(dxhat * x_hat))
    let mean_dxhat = dxhat.sum_axis(Axis(1)) / d;
    let mean_dxhat_xhat = (&dxhat * &cache.x_hat).sum_axis(Axis(1)) / d;
    let mut dx = dxhat;
    for ((mut row, x_row), ((&m1, &m2), &s)) in dx
        .rows_mut()
        .into_iter()
        .zip(cache.x_hat.rows())
        .zip(mean_dxhat.iter().zip(mean_dxhat_xhat.iter()).zip(cache.inv_std.iter()))
    {
        for (v, &xh) in row.iter_mut().zip(x_row.iter()) {
            *v = (*v - m1 - xh * m2) * s;
        }
    }
    store.accumulate_grad(gain, &dgain);
    store.accumulate_grad(bias, &dbias);
    dx
}

// ---------------------------------------------------------------------------
// SiLU
// ---------------------------------------------------------------------------

pub fn silu_forward<F: NdFloat>(x: &Array2<F>) -> Array2<F> {
    x.mapv(|v| v * sigmoid(v))
}

pub fn silu_backward<F: NdFloat>(x: &Array2<F>, dy: &Array2<F>) -> Array2<F> {
    let mut dx = dy.clone();
    for (d, &v) in dx.iter_mut().zip(x.iter()) {
        let s = sigmoid(v);
        *d = *d * (s * (F::one() + v * (F::one() - s)));
    }
    dx
}

fn sigmoid<F: NdFloat>(v: F) -> F {
    F::one() / (F::one() + (-v).exp())
}

// ---------------------------------------------------------------------------
// Row softmax
// ---------------------------------------------------------------------------

pub fn softmax_rows<F: NdFloat>(x: &Array2<F>) -> Array2<F> {
    let mut y = x.clone();
    for mut row in y.rows_mut() {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    y
}

/// Given s = softmax(a) and ds, returns da.
pub fn softmax_rows_backward<F: NdFloat>(s: &Array2<F>, ds: &Array2<F>) -> Array2<F> {
    let mut da = ds * s;
    let dot = da.sum_axis(Axis(1));
    for ((mut row, s_row), &d) in da.rows_mut().into_iter().zip(s.rows()).zip(dot.iter()) {
        for (v, &sv) in row.iter_mut().zip(s_row.iter()) {
            *v = *v - sv * d;
        }
    }
    da
}

// ---------------------------------------------------------------------------
// Multi-head self-attention over an already-concatenated token sequence
// ---------------------------------------------------------------------------

pub struct AttentionCache<F> {
    pub q: Array2<F>,
    pub k: Array2<F>,
    pub v: Array2<F>,
    /// Per-head softmax matrices.
    pub probs: Vec<Array2<F>>,
}

/// Scaled dot-product attention with `heads` heads over q/k/v of shape (L, d).
/// Returns the (L, d) context and a cache for backward.
pub fn attention_forward<F: NdFloat>(
    q: Array2<F>,
    k: Array2<F>,
    v: Array2<F>,
    heads: usize,
) -> (Array2<F>, AttentionCache<F>) {
    let (l, d) = q.dim();
    assert_eq!(d % heads, 0);
    let dh = d / heads;
    let scale = F::from(1.0 / (dh as f64).sqrt()).unwrap();
    let mut out = Array2::zeros((l, d));
    let mut probs = Vec::with_capacity(heads);
    for h in 0..heads {
        let cols = h * dh..(h + 1) * dh;
        let qh = q.slice(ndarray::s![.., cols.clone()]);
        let kh = k.slice(ndarray::s![.., cols.clone()]);
        let vh = v.slice(ndarray::s![.., cols.clone()]);
        let scores = qh.dot(&kh.t()).mapv(|x| x * scale);
        let p = softmax_rows(&scores);
        let ctx = p.dot(&vh);
        out.slice_mut(ndarray::s![.., cols]).assign(&ctx);
        probs.push(p);
    }
    (out, AttentionCache { q, k, v, probs })
}

/// Backward of [`attention_forward`]; returns (dq, dk, dv).
pub fn attention_backward<F: NdFloat>(
    cache: &AttentionCache<F>,
    dout: &Array2<F>,
    heads: usize,
) -> (Array2<F>, Array2<F>, Array2<F>) {
    let (l, d) = cache.q.dim();
    let dh = d / heads;
    let scale = F::from(1.0 / (dh as f64).sqrt()).unwrap();
    let mut dq = Array2::zeros((l, d));
    let mut dk = Array2::zeros((l, d));
    let mut dv = Array2::zeros((l, d));
    for h in 0..heads {
        let cols = h * dh..(h + 1) * dh;
        let qh = cache.q.slice(ndarray::s![.., cols.clone()]);
        let kh = cache.k.slice(ndarray::s![.., cols.clone()]);
        let vh = cache.v.slice(ndarray::s![.., cols.clone()]);
        let p = &cache.probs[h];
        let dctx = dout.slice(ndarray::s![.., cols.clone()]);

        let dvh = p.t().dot(&dctx);
        let dp = dctx.dot(&vh.t());
        let dscores = softmax_rows_backward(p, &dp).mapv(|x| x * scale);
        let dqh = dscores.dot(&kh);
        let dkh = dscores.t().dot(&qh);

        dq.slice_mut(ndarray::s![.., cols.clone()]).assign(&dqh);
        dk.slice_mut(ndarray::s![.., cols.clone()]).assign(&dkh);
        dv.slice_mut(ndarray::s![.., cols]).assign(&dvh);
    }
    (dq, dk, dv)
}

// ---------------------------------------------------------------------------
// Sinusoidal embeddings (fixed, no parameters)
// ---------------------------------------------------------------------------

/// Standard interleaved sin/cos embedding of a scalar in [0, 1].
pub fn sinusoidal_embedding<F: NdFloat>(value: f64, dim: usize) -> Array1<F> {
    let half = dim / 2;
    let mut out = Array1::zeros(dim);
    for i in 0..half {
        let freq = (10_000f64).powf(-(i as f64) / half as f64);
        let angle = value * freq * 100.0;
        out[2 * i] = F::from(angle.sin()).unwrap();
        out[2 * i + 1] = F::from(angle.cos()).unwrap();
    }
    out
}

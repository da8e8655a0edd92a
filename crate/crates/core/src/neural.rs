//! Tensor and layer kernels for the stratagem classifier:
//! embedding → conv1d (valid) → ReLU → maxpool(2) → flatten → dense sigmoid.
//!
//! Kernels are generic over the float type so the same code runs in `f32`
//! for training and `f64` for gradient checking.

use std::fmt::{Debug, Display};
use std::fs;
use std::path::Path;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::Execution;

pub trait Scalar: Float + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static {}

impl<T> Scalar for T where T: Float + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static {}

#[inline]
fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("finite literal")
}

/// Pooling window and stride.
pub const POOL: usize = 2;
/// Probabilities are clamped to `[BCE_EPS, 1 - BCE_EPS]` inside the loss.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    /// Vocabulary size.
    pub input_dim: usize,
    pub input_length: usize,
    /// Embedding width.
    pub dense_vectors: usize,
    pub num_filters: usize,
    pub kernel: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            input_dim: 1536,
            input_length: 64,
            dense_vectors: 16,
            num_filters: 32,
            kernel: 5,
        }
    }
}

impl Architecture {
    /// 32 filters of width 5 over the given vocabulary, length and width.
    pub fn new(input_dim: usize, input_length: usize, dense_vectors: usize) -> Result<Self> {
        let arch = Architecture {
            input_dim,
            input_length,
            dense_vectors,
            ..Architecture::default()
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.dense_vectors == 0 || self.num_filters == 0 || self.kernel == 0 {
            return Err(Error::Shape(format!("zero-sized dimension in {self:?}")));
        }
        if self.input_length < self.kernel {
            return Err(Error::Shape(format!(
                "input_length {} is shorter than the kernel {}",
                self.input_length, self.kernel
            )));
        }
        if self.conv_len() < POOL {
            return Err(Error::Shape(format!("conv output length {} is too short to pool", self.conv_len())));
        }
        Ok(())
    }

    /// `input_length - kernel + 1`, i.e. `L - 4` for the default kernel.
    pub fn conv_len(&self) -> usize {
        self.input_length + 1 - self.kernel
    }

    pub fn pooled_len(&self) -> usize {
        self.conv_len() / POOL
    }

    pub fn flatten_len(&self) -> usize {
        self.pooled_len() * self.num_filters
    }

    pub fn parameter_count(&self) -> usize {
        self.input_dim * self.dense_vectors
            + self.num_filters * self.kernel * self.dense_vectors
            + self.num_filters
            + self.flatten_len()
            + 1
    }
}

/// Row-major dense array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Copy + Default> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!("shape {shape:?} needs {expected} values, got {}", data.len())));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![T::default(); n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

impl<T: Scalar> Tensor<T> {
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|v| U::from_f64(v.to_f64().expect("finite")).expect("finite"))
                .collect(),
        }
    }
}

pub const PARAM_NAMES: [&str; 5] = ["embedding", "conv_w", "conv_b", "dense_w", "dense_b"];

/// Trainable parameters. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    /// `[input_dim × dense_vectors]`
    pub embedding: Tensor<T>,
    /// `[num_filters × kernel × dense_vectors]`
    pub conv_w: Tensor<T>,
    /// `[num_filters]`
    pub conv_b: Tensor<T>,
    /// `[flatten_len]`, flatten order is pooled time major, filter minor.
    pub dense_w: Tensor<T>,
    /// `[1]`
    pub dense_b: Tensor<T>,
}

impl<T: Scalar> Params<T> {
    pub fn zeros(arch: &Architecture) -> Self {
        Params {
            embedding: Tensor::zeros(vec![arch.input_dim, arch.dense_vectors]),
            conv_w: Tensor::zeros(vec![arch.num_filters, arch.kernel, arch.dense_vectors]),
            conv_b: Tensor::zeros(vec![arch.num_filters]),
            dense_w: Tensor::zeros(vec![arch.flatten_len()]),
            dense_b: Tensor::zeros(vec![1]),
        }
    }

    /// Embeddings `U(-0.05, 0.05)`; conv and dense weights LeCun-uniform
    /// `U(-sqrt(3 / fan_in), sqrt(3 / fan_in))`; biases zero. Values are
    /// drawn in `f32` so every scalar type starts from the same point.
    pub fn init(arch: &Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Params::zeros(arch);
        let mut fill = |t: &mut Tensor<T>, limit: f32| {
            for v in t.data_mut() {
                *v = lit(rng.random_range(-limit..limit) as f64);
            }
        };
        fill(&mut p.embedding, 0.05);
        fill(&mut p.conv_w, (3.0 / (arch.kernel * arch.dense_vectors) as f32).sqrt());
        fill(&mut p.dense_w, (3.0 / arch.flatten_len() as f32).sqrt());
        p
    }

    pub fn tensors(&self) -> [&Tensor<T>; 5] {
        [&self.embedding, &self.conv_w, &self.conv_b, &self.dense_w, &self.dense_b]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor<T>; 5] {
        [
            &mut self.embedding,
            &mut self.conv_w,
            &mut self.conv_b,
            &mut self.dense_w,
            &mut self.dense_b,
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Params<U> {
        Params {
            embedding: self.embedding.cast(),
            conv_w: self.conv_w.cast(),
            conv_b: self.conv_b.cast(),
            dense_w: self.dense_w.cast(),
            dense_b: self.dense_b.cast(),
        }
    }

    /// Errors unless every tensor has the shape `arch` implies.
    pub fn check(&self, arch: &Architecture) -> Result<()> {
        let want = Params::<T>::zeros(arch);
        for ((name, got), want) in PARAM_NAMES.iter().zip(self.tensors()).zip(want.tensors()) {
            if got.shape() != want.shape() {
                return Err(Error::Shape(format!("{name}: expected {:?}, got {:?}", want.shape(), got.shape())));
            }
        }
        Ok(())
    }
}

// ---- per-example kernels on flat slices -----------------------------------

fn embed_into<T: Scalar>(indices: &[usize], embedding: &[T], d: usize, out: &mut [T]) {
    for (row, &i) in out.chunks_exact_mut(d).zip(indices) {
        row.copy_from_slice(&embedding[i * d..(i + 1) * d]);
    }
}

/// Valid convolution of `x [l × c]` with `w [f × k × c]`; `out [(l-k+1) × f]`.
fn conv_into<T: Scalar>(x: &[T], c: usize, w: &[T], b: &[T], k: usize, out: &mut [T]) {
    let f = b.len();
    let span = k * c;
    for (t, row) in out.chunks_exact_mut(f).enumerate() {
        let window = &x[t * c..t * c + span];
        for (j, o) in row.iter_mut().enumerate() {
            let filter = &w[j * span..(j + 1) * span];
            *o = window.iter().zip(filter).fold(b[j], |acc, (&a, &b)| acc + a * b);
        }
    }
}

fn relu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

/// Max over non-overlapping pairs along time. `argmax` gets flat indices
/// into `x`; the earlier element wins ties.
fn pool_into<T: Scalar>(x: &[T], f: usize, out: &mut [T], argmax: &mut [usize]) {
    let pooled = out.len() / f;
    for t in 0..pooled {
        for j in 0..f {
            let a = (POOL * t) * f + j;
            let mut best = a;
            for step in 1..POOL {
                let cand = a + step * f;
                if x[cand] > x[best] {
                    best = cand;
                }
            }
            out[t * f + j] = x[best];
            argmax[t * f + j] = best;
        }
    }
}

/// Logistic function kept strictly inside (0, 1) in `T`'s precision.
pub fn sigmoid<T: Scalar>(z: T) -> T {
    let one = T::one();
    let p = if z >= T::zero() {
        one / (one + (-z).exp())
    } else {
        let e = z.exp();
        e / (one + e)
    };
    let top = one - T::epsilon() / lit(2.0);
    p.max(T::min_positive_value()).min(top)
}

// ---- batch operations -------------------------------------------------------

fn check_index_range(batch: &[Vec<usize>], input_dim: usize) -> Result<usize> {
    let l = batch.first().map(Vec::len).unwrap_or(0);
    for seq in batch {
        if seq.len() != l {
            return Err(Error::Shape("sequences in a batch must share one length".into()));
        }
        if let Some(&bad) = seq.iter().find(|&&i| i >= input_dim) {
            return Err(Error::InvalidInput(format!("token index {bad} out of range for vocabulary {input_dim}")));
        }
    }
    Ok(l)
}

/// `[B × L]` indices → `[B × L × D]`.
pub fn embed_forward<T: Scalar>(batch: &[Vec<usize>], embedding: &Tensor<T>) -> Result<Tensor<T>> {
    let [v, d] = embedding.shape() else {
        return Err(Error::Shape("embedding must be 2-d".into()));
    };
    let (v, d) = (*v, *d);
    let l = check_index_range(batch, v)?;
    let mut out = Tensor::zeros(vec![batch.len(), l, d]);
    for (seq, dst) in batch.iter().zip(out.data_mut().chunks_exact_mut((l * d).max(1))) {
        embed_into(seq, embedding.data(), d, dst);
    }
    Ok(out)
}

/// `[B × L × C]` → `[B × (L-K+1) × F]`, before the nonlinearity.
pub fn conv1d_forward<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let ([batch, l, c], [f, k, wc], [bf]) = (x.shape(), w.shape(), b.shape()) else {
        return Err(Error::Shape("conv1d expects x [B×L×C], w [F×K×C], b [F]".into()));
    };
    if c != wc || f != bf {
        return Err(Error::Shape(format!("conv1d channel/filter mismatch: x {:?}, w {:?}, b {:?}", x.shape(), w.shape(), b.shape())));
    }
    if l < k {
        return Err(Error::Shape(format!("sequence length {l} is shorter than the kernel {k}")));
    }
    let t = l - k + 1;
    let mut out = Tensor::zeros(vec![*batch, t, *f]);
    for (src, dst) in x.data().chunks_exact(l * c).zip(out.data_mut().chunks_exact_mut(t * f)) {
        conv_into(src, *c, w.data(), b.data(), *k, dst);
    }
    Ok(out)
}

pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    Tensor {
        shape: x.shape.clone(),
        data: x.data.iter().map(|&v| relu(v)).collect(),
    }
}

/// `[B × T × F]` → `[B × ⌊T/2⌋ × F]` plus flat argmax indices into `x`.
pub fn maxpool1d_forward<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
    let [batch, t, f] = x.shape() else {
        return Err(Error::Shape("maxpool expects [B×T×F]".into()));
    };
    if *t < POOL {
        return Err(Error::Shape(format!("cannot pool a sequence of length {t}")));
    }
    let pooled = t / POOL;
    let mut out = Tensor::zeros(vec![*batch, pooled, *f]);
    let mut argmax = vec![0; batch * pooled * f];
    for (i, ((src, dst), arg)) in x
        .data()
        .chunks_exact(t * f)
        .zip(out.data_mut().chunks_exact_mut(pooled * f))
        .zip(argmax.chunks_exact_mut(pooled * f))
        .enumerate()
    {
        pool_into(src, *f, dst, arg);
        for a in arg.iter_mut() {
            *a += i * t * f;
        }
    }
    Ok((out, argmax))
}

/// Routes each pooled gradient to its argmax position.
pub fn maxpool1d_backward<T: Scalar>(grad: &Tensor<T>, argmax: &[usize], input_shape: &[usize]) -> Result<Tensor<T>> {
    if grad.len() != argmax.len() {
        return Err(Error::Shape("gradient and argmax lengths differ".into()));
    }
    let mut dx = Tensor::zeros(input_shape.to_vec());
    for (&g, &a) in grad.data().iter().zip(argmax) {
        dx.data_mut()[a] = dx.data()[a] + g;
    }
    Ok(dx)
}

/// `[B × N]` → `[B × 1]`, `σ(w·x + b)`.
pub fn dense_sigmoid_forward<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let [batch, n] = x.shape() else {
        return Err(Error::Shape("dense expects [B×N]".into()));
    };
    if w.len() != *n || b.len() != 1 {
        return Err(Error::Shape(format!("dense weights {:?} do not fit input width {n}", w.shape())));
    }
    let out = x
        .data()
        .chunks_exact((*n).max(1))
        .take(*batch)
        .map(|row| sigmoid(dot(row, w.data()) + b.data()[0]))
        .collect();
    Tensor::new(vec![*batch, 1], out)
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Mean binary cross-entropy with probabilities clamped to `[1e-7, 1 - 1e-7]`.
pub fn bce_loss<T: Scalar>(p: &[T], y: &[T]) -> T {
    bce_loss_weighted(p, y, T::one())
}

/// As [`bce_loss`] with positive examples scaled by `pos_weight`.
pub fn bce_loss_weighted<T: Scalar>(p: &[T], y: &[T], pos_weight: T) -> T {
    if p.is_empty() {
        return T::zero();
    }
    let eps: T = lit(BCE_EPS);
    let one = T::one();
    let total = p.iter().zip(y).fold(T::zero(), |acc, (&p, &y)| {
        let pc = p.max(eps).min(one - eps);
        acc - (pos_weight * y * pc.ln() + (one - y) * (one - pc).ln())
    });
    total / lit(p.len() as f64)
}

/// `dL/dz` for one example of the weighted loss through the sigmoid. The
/// clamp only guards the loss value, so saturated mistakes still get a
/// gradient.
fn bce_logit_grad<T: Scalar>(p: T, y: T, pos_weight: T) -> T {
    let one = T::one();
    (one - y) * p - pos_weight * y * (one - p)
}

// ---- whole model ------------------------------------------------------------

/// Intermediate values of one example's forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub indices: Vec<usize>,
    /// `[L × D]`
    pub embedded: Vec<T>,
    /// `[(L-K+1) × F]` before ReLU.
    pub conv_pre: Vec<T>,
    /// `[pooled × F]`, also the flattened dense input.
    pub pooled: Vec<T>,
    pub argmax: Vec<usize>,
    pub logit: T,
    pub prob: T,
}

impl<T: Scalar> ForwardCache<T> {
    /// Pooling winners and whether each winner is past the ReLU. The loss
    /// only sees winners, so equal patterns mean the same linear piece.
    pub fn activation_pattern(&self) -> Vec<usize> {
        self.argmax
            .iter()
            .map(|&a| 2 * a + usize::from(self.conv_pre[a] > T::zero()))
            .collect()
    }
}

fn check_example(arch: &Architecture, indices: &[usize]) -> Result<()> {
    if indices.len() != arch.input_length {
        return Err(Error::Shape(format!(
            "expected {} indices, got {}",
            arch.input_length,
            indices.len()
        )));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= arch.input_dim) {
        return Err(Error::InvalidInput(format!("token index {bad} out of range for vocabulary {}", arch.input_dim)));
    }
    Ok(())
}

pub fn forward_example<T: Scalar>(arch: &Architecture, params: &Params<T>, indices: &[usize]) -> Result<ForwardCache<T>> {
    check_example(arch, indices)?;
    let (d, f) = (arch.dense_vectors, arch.num_filters);
    let mut embedded = vec![T::zero(); arch.input_length * d];
    embed_into(indices, params.embedding.data(), d, &mut embedded);
    let mut conv_pre = vec![T::zero(); arch.conv_len() * f];
    conv_into(&embedded, d, params.conv_w.data(), params.conv_b.data(), arch.kernel, &mut conv_pre);
    let act: Vec<T> = conv_pre.iter().map(|&v| relu(v)).collect();
    let mut pooled = vec![T::zero(); arch.flatten_len()];
    let mut argmax = vec![0; arch.flatten_len()];
    pool_into(&act, f, &mut pooled, &mut argmax);
    let logit = dot(&pooled, params.dense_w.data()) + params.dense_b.data()[0];
    Ok(ForwardCache {
        indices: indices.to_vec(),
        embedded,
        conv_pre,
        pooled,
        argmax,
        logit,
        prob: sigmoid(logit),
    })
}

/// One probability per example, in input order.
pub fn predict<T: Scalar>(arch: &Architecture, params: &Params<T>, batch: &[Vec<usize>], exec: Execution) -> Result<Vec<T>> {
    exec.map_slice(batch, |seq| forward_example(arch, params, seq).map(|c| c.prob))
        .into_iter()
        .collect()
}

/// One example's gradients. The embedding gradient is kept per position and
/// scattered into rows during reduction.
struct ExampleGrad<T> {
    loss: T,
    d_embedded: Vec<T>,
    conv_w: Vec<T>,
    conv_b: Vec<T>,
    dense_w: Vec<T>,
    dense_b: T,
}

fn backward_example<T: Scalar>(
    arch: &Architecture,
    params: &Params<T>,
    cache: &ForwardCache<T>,
    dz: T,
) -> ExampleGrad<T> {
    let (d, f, k) = (arch.dense_vectors, arch.num_filters, arch.kernel);
    let span = k * d;
    let dense_w: Vec<T> = cache.pooled.iter().map(|&x| dz * x).collect();

    // pool + relu: each pooled slot feeds exactly one conv position
    let mut d_pre = vec![T::zero(); cache.conv_pre.len()];
    for (&w, &a) in params.dense_w.data().iter().zip(&cache.argmax) {
        if cache.conv_pre[a] > T::zero() {
            d_pre[a] = d_pre[a] + dz * w;
        }
    }

    let mut conv_w = vec![T::zero(); params.conv_w.len()];
    let mut conv_b = vec![T::zero(); f];
    let mut d_embedded = vec![T::zero(); cache.embedded.len()];
    let w = params.conv_w.data();
    for (t, row) in d_pre.chunks_exact(f).enumerate() {
        let window = &cache.embedded[t * d..t * d + span];
        for (j, &g) in row.iter().enumerate() {
            if g == T::zero() {
                continue;
            }
            conv_b[j] = conv_b[j] + g;
            for (gw, &x) in conv_w[j * span..(j + 1) * span].iter_mut().zip(window) {
                *gw = *gw + g * x;
            }
            for (dx, &wv) in d_embedded[t * d..t * d + span].iter_mut().zip(&w[j * span..(j + 1) * span]) {
                *dx = *dx + g * wv;
            }
        }
    }
    ExampleGrad {
        loss: T::zero(),
        d_embedded,
        conv_w,
        conv_b,
        dense_w,
        dense_b: dz,
    }
}

fn check_batch<T>(batch: &[Vec<usize>], targets: &[T]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    if batch.len() != targets.len() {
        return Err(Error::Shape(format!("{} examples but {} targets", batch.len(), targets.len())));
    }
    Ok(())
}

/// Mean weighted BCE of the batch.
pub fn loss<T: Scalar>(arch: &Architecture, params: &Params<T>, batch: &[Vec<usize>], targets: &[T], pos_weight: T) -> Result<T> {
    check_batch(batch, targets)?;
    let p = predict(arch, params, batch, Execution::Sequential)?;
    Ok(bce_loss_weighted(&p, targets, pos_weight))
}

/// Mean loss and its gradient. Per-example work may run in parallel; the
/// reduction always runs in example order, so the result does not depend on
/// the execution mode.
pub fn loss_and_grad<T: Scalar>(
    arch: &Architecture,
    params: &Params<T>,
    batch: &[Vec<usize>],
    targets: &[T],
    pos_weight: T,
    exec: Execution,
) -> Result<(T, Params<T>)> {
    check_batch(batch, targets)?;
    let scale = T::one() / lit(batch.len() as f64);
    let per_example = exec.map_range(batch.len(), |i| -> Result<ExampleGrad<T>> {
        let cache = forward_example(arch, params, &batch[i])?;
        let dz = bce_logit_grad(cache.prob, targets[i], pos_weight) * scale;
        let mut g = backward_example(arch, params, &cache, dz);
        g.loss = bce_loss_weighted(&[cache.prob], &targets[i..=i], pos_weight);
        Ok(g)
    });

    let d = arch.dense_vectors;
    let mut grads = Params::zeros(arch);
    let mut total = T::zero();
    for (i, g) in per_example.into_iter().enumerate() {
        let g = g?;
        total = total + g.loss;
        let emb = grads.embedding.data_mut();
        for (&row, dx) in batch[i].iter().zip(g.d_embedded.chunks_exact(d)) {
            for (e, &v) in emb[row * d..(row + 1) * d].iter_mut().zip(dx) {
                *e = *e + v;
            }
        }
        for (dst, src) in [
            (grads.conv_w.data_mut(), &g.conv_w),
            (grads.conv_b.data_mut(), &g.conv_b),
            (grads.dense_w.data_mut(), &g.dense_w),
        ] {
            for (a, &b) in dst.iter_mut().zip(src) {
                *a = *a + b;
            }
        }
        grads.dense_b.data_mut()[0] = grads.dense_b.data()[0] + g.dense_b;
    }
    Ok((total * scale, grads))
}

// ---- optimizer --------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam<T> {
    cfg: AdamConfig,
    step: u64,
    m: Params<T>,
    v: Params<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(arch: &Architecture, cfg: AdamConfig) -> Self {
        Adam {
            cfg,
            step: 0,
            m: Params::zeros(arch),
            v: Params::zeros(arch),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn learning_rate(&self) -> f64 {
        self.cfg.learning_rate
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.cfg.learning_rate = lr;
    }

    pub fn step(&mut self, params: &mut Params<T>, grads: &Params<T>) {
        self.step += 1;
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let (b1, b2): (T, T) = (lit(b1), lit(b2));
        let (c1, c2): (T, T) = (lit(c1), lit(c2));
        let lr: T = lit(self.cfg.learning_rate);
        let eps: T = lit(self.cfg.epsilon);
        let one = T::one();
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for (((p, &g), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

// ---- checkpoint -------------------------------------------------------------

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LMNLCNN\0";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 * 6;

/// Magic, then little-endian u32 version, input_dim, input_length,
/// dense_vectors, num_filters, kernel, then each tensor of
/// [`PARAM_NAMES`] as little-endian f32.
pub fn checkpoint_bytes(arch: &Architecture, params: &Params<f32>) -> Result<Vec<u8>> {
    params.check(arch)?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * params.parameter_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    for v in [
        CHECKPOINT_VERSION as usize,
        arch.input_dim,
        arch.input_length,
        arch.dense_vectors,
        arch.num_filters,
        arch.kernel,
    ] {
        let v = u32::try_from(v).map_err(|_| Error::Shape(format!("dimension {v} does not fit the header")))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    for t in params.tensors() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<(Architecture, Params<f32>)> {
    let bad = |msg: &str| Error::format("checkpoint", msg);
    if bytes.len() < HEADER_LEN || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("missing magic"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().expect("4 bytes")) as usize;
    if word(0) != CHECKPOINT_VERSION as usize {
        return Err(bad(&format!("unsupported version {}", word(0))));
    }
    let arch = Architecture {
        input_dim: word(1),
        input_length: word(2),
        dense_vectors: word(3),
        num_filters: word(4),
        kernel: word(5),
    };
    arch.validate().map_err(|e| bad(&e.to_string()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 4 * arch.parameter_count() {
        return Err(bad(&format!(
            "expected {} parameter bytes, found {}",
            4 * arch.parameter_count(),
            body.len()
        )));
    }
    let mut values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")));
    let mut params = Params::<f32>::zeros(&arch);
    for t in params.tensors_mut() {
        for v in t.data_mut() {
            *v = values.next().expect("length checked");
        }
    }
    Ok((arch, params))
}

pub fn save_checkpoint(path: &Path, arch: &Architecture, params: &Params<f32>) -> Result<()> {
    fs::write(path, checkpoint_bytes(arch, params)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(Architecture, Params<f32>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Architecture {
        Architecture {
            input_dim: 10,
            input_length: 8,
            dense_vectors: 3,
            num_filters: 4,
            kernel: 5,
        }
    }

    #[test]
    fn default_shape_contract() {
        let a = Architecture::default();
        assert_eq!(a.conv_len(), 60);
        assert_eq!(a.pooled_len(), 30);
        assert_eq!(a.flatten_len(), 960);
        assert!(Architecture::new(1536, 4, 16).is_err());
        assert!(Architecture::new(1536, 5, 16).is_err()); // conv length 1 cannot pool
        assert!(Architecture::new(1536, 6, 16).is_ok());
    }

    #[test]
    fn tensor_shape_checked() {
        assert!(Tensor::new(vec![2, 3], vec![0.0f32; 6]).is_ok());
        assert!(Tensor::new(vec![2, 3], vec![0.0f32; 5]).is_err());
    }

    #[test]
    fn embedding_copies_rows() {
        let emb = Tensor::new(vec![3, 2], vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5f32]).unwrap();
        let out = embed_forward(&[vec![2, 0], vec![0, 0]], &emb).unwrap();
        assert_eq!(out.shape(), &[2, 2, 2]);
        assert_eq!(out.data(), &[2.0, 2.5, 0.0, 0.5, 0.0, 0.5, 0.0, 0.5]);
        assert!(embed_forward(&[vec![3]], &emb).is_err());
    }

    #[test]
    fn zero_filter_outputs_bias() {
        let x = Tensor::new(vec![1, 7, 2], (0..14).map(|v| v as f32).collect()).unwrap();
        let w = Tensor::zeros(vec![1, 5, 2]);
        let b = Tensor::new(vec![1], vec![0.75f32]).unwrap();
        let out = conv1d_forward(&x, &w, &b).unwrap();
        assert_eq!(out.shape(), &[1, 3, 1]);
        assert!(out.data().iter().all(|&v| v == 0.75));
        let short = Tensor::<f32>::zeros(vec![1, 4, 2]);
        assert!(matches!(conv1d_forward(&short, &w, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn pool_pairs() {
        let x = Tensor::new(vec![1, 4, 1], vec![1.0, 3.0, 2.0, 0.0f32]).unwrap();
        let (out, arg) = maxpool1d_forward(&x).unwrap();
        assert_eq!(out.data(), &[3.0, 2.0]);
        assert_eq!(arg, vec![1, 2]);
        let odd = Tensor::new(vec![1, 5, 1], vec![1.0, 0.0, 0.0, 4.0, 9.0f32]).unwrap();
        assert_eq!(maxpool1d_forward(&odd).unwrap().0.data(), &[1.0, 4.0]);
        let one = Tensor::<f32>::zeros(vec![1, 1, 1]);
        assert!(maxpool1d_forward(&one).is_err());
        let g = Tensor::new(vec![1, 2, 1], vec![5.0f32, 7.0]).unwrap();
        assert_eq!(maxpool1d_backward(&g, &arg, &[1, 4, 1]).unwrap().data(), &[0.0, 5.0, 7.0, 0.0]);
    }

    #[test]
    fn dense_sigmoid_range() {
        let x = Tensor::new(vec![2, 2], vec![1.0, 2.0, -3.0, 4.0f32]).unwrap();
        let zero = dense_sigmoid_forward(&x, &Tensor::zeros(vec![2]), &Tensor::zeros(vec![1])).unwrap();
        assert_eq!(zero.data(), &[0.5, 0.5]);
        let big = Tensor::new(vec![2], vec![1e4f32, 1e4]).unwrap();
        let out = dense_sigmoid_forward(&x, &big, &Tensor::zeros(vec![1])).unwrap();
        for &p in out.data() {
            assert!(p > 0.0 && p < 1.0 && !p.is_nan());
        }
        assert!(sigmoid(1e6f32) < 1.0);
        assert!(sigmoid(-1e6f32) > 0.0);
    }

    #[test]
    fn bce_analytic_values() {
        assert!((bce_loss(&[0.5f64; 4], &[0.0, 1.0, 1.0, 0.0]) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(bce_loss(&[1.0f64, 0.0], &[1.0, 0.0]) < 1e-6);
        let p = [0.9f64, 0.2, 0.6];
        let y = [1.0, 0.0, 0.0];
        let direct = -((0.9f64).ln() + (0.8f64).ln() + (0.4f64).ln()) / 3.0;
        assert!((bce_loss(&p, &y) - direct).abs() < 1e-7);
        assert!((bce_loss_weighted(&p, &y, 2.0) - (direct - (0.9f64).ln() / 3.0)).abs() < 1e-7);
    }

    #[test]
    fn model_forward_matches_layer_ops() {
        let arch = tiny();
        let params = Params::<f64>::init(&arch, 3);
        let seq = vec![1, 4, 0, 9, 2, 2, 7, 3];
        let cache = forward_example(&arch, &params, &seq).unwrap();
        let x = embed_forward(&[seq], &params.embedding).unwrap();
        let pre = conv1d_forward(&x, &params.conv_w, &params.conv_b).unwrap();
        assert_eq!(pre.data(), &cache.conv_pre[..]);
        let (pooled, _) = maxpool1d_forward(&relu_forward(&pre)).unwrap();
        let flat = Tensor::new(vec![1, arch.flatten_len()], pooled.into_data()).unwrap();
        let p = dense_sigmoid_forward(&flat, &params.dense_w, &params.dense_b).unwrap();
        assert_eq!(p.data()[0], cache.prob);
    }

    #[test]
    fn bad_examples_rejected() {
        let arch = tiny();
        let params = Params::<f32>::init(&arch, 0);
        assert!(forward_example(&arch, &params, &[0; 7]).is_err());
        assert!(forward_example(&arch, &params, &[10; 8]).is_err());
        assert!(loss_and_grad(&arch, &params, &[], &[], 1.0, Execution::Sequential).is_err());
    }

    #[test]
    fn init_is_seeded_and_scaled() {
        let a = Architecture::default();
        let p = Params::<f32>::init(&a, 7);
        assert_eq!(p, Params::<f32>::init(&a, 7));
        assert_ne!(p, Params::<f32>::init(&a, 8));
        assert!(p.embedding.data().iter().all(|v| v.abs() <= 0.05));
        let limit = (3.0f32 / 960.0).sqrt();
        assert!(p.dense_w.data().iter().all(|v| v.abs() <= limit));
        assert!(p.conv_b.data().iter().all(|&v| v == 0.0));
        assert_eq!(p.parameter_count(), a.parameter_count());
        // f64 starts from the same values
        assert_eq!(Params::<f64>::init(&a, 7).cast::<f32>(), p);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let arch = tiny();
        let mut p = Params::<f64>::zeros(&arch);
        let mut g = Params::<f64>::zeros(&arch);
        g.dense_b.data_mut()[0] = 3.0;
        g.conv_b.data_mut()[0] = -0.5;
        let mut adam = Adam::new(&arch, AdamConfig::default());
        adam.step(&mut p, &g);
        assert!((p.dense_b.data()[0] + 1e-3).abs() < 1e-9);
        assert!((p.conv_b.data()[0] - 1e-3).abs() < 1e-9);
        assert_eq!(p.conv_b.data()[1], 0.0);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn gradient_modes_agree() {
        let arch = tiny();
        let params = Params::<f32>::init(&arch, 1);
        let batch: Vec<Vec<usize>> = (0..40).map(|i| (0..8).map(|t| (i * 3 + t) % 10).collect()).collect();
        let y: Vec<f32> = (0..40).map(|i| (i % 3 == 0) as u8 as f32).collect();
        let a = loss_and_grad(&arch, &params, &batch, &y, 1.0, Execution::Sequential).unwrap();
        let b = loss_and_grad(&arch, &params, &batch, &y, 1.0, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn checkpoint_round_trip_and_corruption() {
        let arch = tiny();
        let params = Params::<f32>::init(&arch, 5);
        let bytes = checkpoint_bytes(&arch, &params).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 4 * arch.parameter_count());
        assert_eq!(checkpoint_from_bytes(&bytes).unwrap(), (arch, params));
        assert!(checkpoint_from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(checkpoint_from_bytes(&wrong).is_err());
        let mut version = bytes;
        version[8] = 9;
        assert!(checkpoint_from_bytes(&version).is_err());
    }
}

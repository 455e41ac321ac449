//! Attention-based bag aggregators and their analytic gradients.
//!
//! All three heads score each instance `h_k` of a bag with a small two-layer
//! network, pool the bag into an embedding `z` and classify it with a shared
//! linear layer `logits = Wc z + bc`.
//!
//! * MIL: `score_k = wᵀ tanh(V h_k)`, softmax weights.
//! * Gated MIL: `score_k = wᵀ (tanh(V h_k) ⊙ σ(U h_k))`, softmax weights.
//! * MRL: two dropout streams `s1 = drop(softplus(V h_k))` and
//!   `s2 = drop(σ(U h_k))` merged as `e_k = s1 s2 / (s1 + s2 + ε)`; the raw
//!   score `a_k = wᵀ e_k` weights a mean over the bag.

use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::Rng;

use crate::math;
use crate::matrix::{axpy, dot, Matrix};
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AttentionError {
    #[error("forward cache shape ({hidden}, {dim}, {classes}) does not match parameters")]
    CacheMismatch { hidden: usize, dim: usize, classes: usize },
    #[error("upstream gradient has {actual} entries, expected {expected}")]
    GradientLength { expected: usize, actual: usize },
    #[error("bag dimension {actual} does not match head dimension {expected}")]
    BagDimension { expected: usize, actual: usize },
    #[error("bag is empty")]
    EmptyBag,
    #[error("unknown head {0:?}")]
    UnknownHead(alloc::string::String),
    #[error("unknown MRL pooling {0:?}")]
    UnknownPooling(alloc::string::String),
}

/// Added to the MRL quotient denominator so two dropped streams give 0.
pub const MRL_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeadKind {
    Mil = 0,
    GatedMil = 1,
    Mrl = 2,
}

impl HeadKind {
    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(HeadKind::Mil),
            1 => Some(HeadKind::GatedMil),
            2 => Some(HeadKind::Mrl),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Mil => "mil",
            HeadKind::GatedMil => "gmil",
            HeadKind::Mrl => "mrl",
        }
    }
}

impl FromStr for HeadKind {
    type Err = AttentionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mil" => Ok(HeadKind::Mil),
            "gmil" | "gated-mil" | "gated_mil" => Ok(HeadKind::GatedMil),
            "mrl" => Ok(HeadKind::Mrl),
            _ => Err(AttentionError::UnknownHead(s.into())),
        }
    }
}

/// How MRL turns raw scores into a bag embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MrlPooling {
    /// `z = (1/n) Σ a_k h_k`.
    #[default]
    Mean,
    /// `z = Σ (a_k / Σ_j a_j) h_k`.
    SumNormalized,
}

impl MrlPooling {
    pub fn name(self) -> &'static str {
        match self {
            MrlPooling::Mean => "mean",
            MrlPooling::SumNormalized => "sum-normalized",
        }
    }
}

impl FromStr for MrlPooling {
    type Err = AttentionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(MrlPooling::Mean),
            "sum-normalized" => Ok(MrlPooling::SumNormalized),
            _ => Err(AttentionError::UnknownPooling(s.into())),
        }
    }
}

/// Learnable weights of one head and its classifier. Also used as the
/// gradient container, with the same shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    /// `L × d` first-stream projection.
    pub v: Matrix,
    /// `L × d` gate / second-stream projection; unused by plain MIL.
    pub u: Matrix,
    /// `L` scoring vector.
    pub w: Vec<f64>,
    /// `K × d` classifier weights.
    pub wc: Matrix,
    /// `K` classifier bias.
    pub bc: Vec<f64>,
}

fn glorot(rng: &mut impl Rng, fan_in: usize, fan_out: usize, count: usize) -> Vec<f64> {
    let bound = glorot_bound(fan_in, fan_out);
    (0..count).map(|_| rng.random_range(-bound..bound)).collect()
}

/// `√(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    math::sqrt(6.0 / (fan_in + fan_out) as f64)
}

impl HeadParams {
    pub fn zeros(hidden: usize, dim: usize, classes: usize) -> Self {
        Self {
            v: Matrix::zeros(hidden, dim),
            u: Matrix::zeros(hidden, dim),
            w: vec![0.0; hidden],
            wc: Matrix::zeros(classes, dim),
            bc: vec![0.0; classes],
        }
    }

    /// Glorot-uniform weights, zero bias, fully determined by `seed`.
    pub fn init(hidden: usize, dim: usize, classes: usize, seed: u64) -> Self {
        let mut rng = rng::stream(seed, Purpose::Init, 0);
        let v = glorot(&mut rng, dim, hidden, hidden * dim);
        let u = glorot(&mut rng, dim, hidden, hidden * dim);
        let w = glorot(&mut rng, hidden, 1, hidden);
        let wc = glorot(&mut rng, dim, classes, classes * dim);
        Self {
            v: Matrix::from_vec(hidden, dim, v).expect("shape"),
            u: Matrix::from_vec(hidden, dim, u).expect("shape"),
            w,
            wc: Matrix::from_vec(classes, dim, wc).expect("shape"),
            bc: vec![0.0; classes],
        }
    }

    pub fn hidden(&self) -> usize {
        self.w.len()
    }

    pub fn dim(&self) -> usize {
        self.v.cols()
    }

    pub fn classes(&self) -> usize {
        self.bc.len()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.hidden(), self.dim(), self.classes())
    }

    /// Tensors in storage order V, U, w, Wc, bc.
    pub fn tensors(&self) -> [&[f64]; 5] {
        [self.v.as_slice(), self.u.as_slice(), &self.w, self.wc.as_slice(), &self.bc]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 5] {
        [self.v.as_mut_slice(), self.u.as_mut_slice(), &mut self.w, self.wc.as_mut_slice(), &mut self.bc]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.v.rows() == other.v.rows()
            && self.v.cols() == other.v.cols()
            && self.u.rows() == other.u.rows()
            && self.u.cols() == other.u.cols()
            && self.w.len() == other.w.len()
            && self.wc.rows() == other.wc.rows()
            && self.wc.cols() == other.wc.cols()
            && self.bc.len() == other.bc.len()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Whether dropout is active for a forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Eval,
    /// Inverted dropout with masks drawn from `seed`.
    Train { dropout_rate: f64, seed: u64 },
}

/// Head selection plus its MRL-specific settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadConfig {
    pub kind: HeadKind,
    pub pooling: MrlPooling,
    pub dropout_rate: f64,
}

impl HeadConfig {
    pub fn new(kind: HeadKind) -> Self {
        Self { kind, pooling: MrlPooling::Mean, dropout_rate: 0.25 }
    }

    pub fn forward(&self, bag: &Matrix, p: &HeadParams, train_seed: Option<u64>) -> Result<Forward, AttentionError> {
        let mode = match train_seed {
            Some(seed) => Mode::Train { dropout_rate: self.dropout_rate, seed },
            None => Mode::Eval,
        };
        match self.kind {
            HeadKind::Mil => mil_forward(bag, p),
            HeadKind::GatedMil => gated_mil_forward(bag, p),
            HeadKind::Mrl => mrl_forward(bag, p, mode, self.pooling),
        }
    }
}

/// Everything a head computed, enough to run [`backward`] without a second
/// forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    kind: HeadKind,
    pooling: MrlPooling,
    instances: Matrix,
    /// First-stream activations per instance: `tanh(Vh)` or `s1`.
    first: Matrix,
    /// Second-stream activations: `σ(Uh)` for gated MIL, `s2` for MRL.
    second: Option<Matrix>,
    /// Pre-dropout `σ(Vh)` (softplus derivative) and `σ(Uh)` for MRL.
    mrl_sigmoids: Option<(Matrix, Matrix)>,
    /// Per-unit dropout multipliers (0 or 1/(1−rate)); `None` in eval mode.
    masks: Option<(Matrix, Matrix)>,
    /// `e_k` rows.
    merged: Matrix,
    scores: Vec<f64>,
    weights: Vec<f64>,
    embedding: Vec<f64>,
    classes: usize,
}

impl ForwardCache {
    pub fn kind(&self) -> HeadKind {
        self.kind
    }

    /// Per-instance activations that feed the scoring vector: `tanh(Vh)` for
    /// MIL, the gated product for gated MIL and `e_k` for MRL.
    pub fn merged(&self) -> &Matrix {
        &self.merged
    }

    /// Pooled bag embedding `z`.
    pub fn embedding(&self) -> &[f64] {
        &self.embedding
    }

    /// Pooling weight applied to each instance.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub logits: Vec<f64>,
    /// Softmax attention for MIL heads, raw scores `a_k` for MRL.
    pub attention: Vec<f64>,
    pub cache: ForwardCache,
}

impl Forward {
    /// Attention rescaled to sum to one.
    pub fn normalized_attention(&self) -> Vec<f64> {
        let total: f64 = self.attention.iter().sum();
        self.attention.iter().map(|a| a / total).collect()
    }
}

fn check_bag(bag: &Matrix, p: &HeadParams) -> Result<(), AttentionError> {
    if bag.rows() == 0 {
        return Err(AttentionError::EmptyBag);
    }
    if bag.cols() != p.dim() {
        return Err(AttentionError::BagDimension { expected: p.dim(), actual: bag.cols() });
    }
    Ok(())
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| math::exp(s - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn pool(bag: &Matrix, weights: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; bag.cols()];
    for (k, &wk) in weights.iter().enumerate() {
        axpy(wk, bag.row(k), &mut z);
    }
    z
}

fn classify(p: &HeadParams, z: &[f64]) -> Vec<f64> {
    let mut logits = p.wc.mul_vec(z);
    for (l, b) in logits.iter_mut().zip(&p.bc) {
        *l += b;
    }
    logits
}

fn map_rows(m: &Matrix, f: impl Fn(f64) -> f64) -> Matrix {
    let data = m.as_slice().iter().map(|&x| f(x)).collect();
    Matrix::from_vec(m.rows(), m.cols(), data).expect("shape preserved")
}

/// `n × L` pre-activations `h_k Pᵀ`.
fn project(bag: &Matrix, proj: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(bag.rows(), proj.rows());
    for k in 0..bag.rows() {
        let h = bag.row(k);
        for (j, o) in out.row_mut(k).iter_mut().enumerate() {
            *o = dot(proj.row(j), h);
        }
    }
    out
}

fn softmax_head(bag: &Matrix, p: &HeadParams, gated: bool) -> Result<Forward, AttentionError> {
    check_bag(bag, p)?;
    let first = map_rows(&project(bag, &p.v), math::tanh);
    let second = gated.then(|| map_rows(&project(bag, &p.u), math::sigmoid));
    let merged = match &second {
        Some(g) => {
            let data = first.as_slice().iter().zip(g.as_slice()).map(|(t, s)| t * s).collect();
            Matrix::from_vec(first.rows(), first.cols(), data).expect("shape")
        }
        None => first.clone(),
    };
    let scores: Vec<f64> = (0..bag.rows()).map(|k| dot(&p.w, merged.row(k))).collect();
    let weights = softmax(&scores);
    let embedding = pool(bag, &weights);
    let logits = classify(p, &embedding);
    Ok(Forward {
        logits,
        attention: weights.clone(),
        cache: ForwardCache {
            kind: if gated { HeadKind::GatedMil } else { HeadKind::Mil },
            pooling: MrlPooling::Mean,
            instances: bag.clone(),
            first,
            second,
            mrl_sigmoids: None,
            masks: None,
            merged,
            scores,
            weights,
            embedding,
            classes: p.classes(),
        },
    })
}

/// Softmax attention pooling over `wᵀ tanh(V h_k)`.
pub fn mil_forward(bag: &Matrix, p: &HeadParams) -> Result<Forward, AttentionError> {
    softmax_head(bag, p, false)
}

/// Softmax attention pooling over `wᵀ (tanh(V h_k) ⊙ σ(U h_k))`.
pub fn gated_mil_forward(bag: &Matrix, p: &HeadParams) -> Result<Forward, AttentionError> {
    softmax_head(bag, p, true)
}

/// Dropout multipliers for both MRL streams: each unit of each instance is
/// dropped with probability `rate`, otherwise scaled by `1/(1−rate)`.
fn dropout_masks(n: usize, hidden: usize, rate: f64, seed: u64) -> (Matrix, Matrix) {
    let mut rng = rng::stream(seed, Purpose::Dropout, 0);
    let keep = 1.0 / (1.0 - rate);
    let mut draw = || {
        let data = (0..n * hidden).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect();
        Matrix::from_vec(n, hidden, data).expect("shape")
    };
    let first = draw();
    let second = draw();
    (first, second)
}

/// Two-stream MRL forward pass.
pub fn mrl_forward(bag: &Matrix, p: &HeadParams, mode: Mode, pooling: MrlPooling) -> Result<Forward, AttentionError> {
    check_bag(bag, p)?;
    let (n, hidden) = (bag.rows(), p.hidden());
    let pre_v = project(bag, &p.v);
    let pre_u = project(bag, &p.u);
    let sig_v = map_rows(&pre_v, math::sigmoid);
    let sig_u = map_rows(&pre_u, math::sigmoid);
    let mut s1 = map_rows(&pre_v, math::softplus);
    let mut s2 = sig_u.clone();
    let masks = match mode {
        Mode::Eval => None,
        Mode::Train { dropout_rate, seed } => {
            let (m1, m2) = dropout_masks(n, hidden, dropout_rate, seed);
            for (x, m) in s1.as_mut_slice().iter_mut().zip(m1.as_slice()) {
                *x *= m;
            }
            for (x, m) in s2.as_mut_slice().iter_mut().zip(m2.as_slice()) {
                *x *= m;
            }
            Some((m1, m2))
        }
    };
    let merged_data = s1
        .as_slice()
        .iter()
        .zip(s2.as_slice())
        .map(|(a, b)| a * b / (a + b + MRL_EPSILON))
        .collect();
    let merged = Matrix::from_vec(n, hidden, merged_data).expect("shape");
    let scores: Vec<f64> = (0..n).map(|k| dot(&p.w, merged.row(k))).collect();
    let weights: Vec<f64> = match pooling {
        MrlPooling::Mean => scores.iter().map(|a| a / n as f64).collect(),
        MrlPooling::SumNormalized => {
            let total: f64 = scores.iter().sum();
            scores.iter().map(|a| a / total).collect()
        }
    };
    let embedding = pool(bag, &weights);
    let logits = classify(p, &embedding);
    Ok(Forward {
        logits,
        attention: scores.clone(),
        cache: ForwardCache {
            kind: HeadKind::Mrl,
            pooling,
            instances: bag.clone(),
            first: s1,
            second: Some(s2),
            mrl_sigmoids: Some((sig_v, sig_u)),
            masks,
            merged,
            scores,
            weights,
            embedding,
            classes: p.classes(),
        },
    })
}

/// Gradients of `dlogitsᵀ · logits` with respect to every parameter.
pub fn backward(cache: &ForwardCache, p: &HeadParams, dlogits: &[f64]) -> Result<HeadParams, AttentionError> {
    let (n, d) = (cache.instances.rows(), cache.instances.cols());
    let hidden = cache.merged.cols();
    if hidden != p.hidden() || d != p.dim() || cache.classes != p.classes() || p.u.rows() != hidden {
        return Err(AttentionError::CacheMismatch { hidden, dim: d, classes: cache.classes });
    }
    if dlogits.len() != p.classes() {
        return Err(AttentionError::GradientLength { expected: p.classes(), actual: dlogits.len() });
    }
    let mut g = p.zeros_like();
    g.bc.copy_from_slice(dlogits);
    g.wc.add_outer(1.0, dlogits, &cache.embedding);
    let dz = p.wc.mul_vec_t(dlogits);

    // Gradient of each pooling weight, then of each raw score.
    let dweights: Vec<f64> = (0..n).map(|k| dot(cache.instances.row(k), &dz)).collect();
    let dscores: Vec<f64> = match (cache.kind, cache.pooling) {
        (HeadKind::Mil | HeadKind::GatedMil, _) => {
            let mean: f64 = cache.weights.iter().zip(&dweights).map(|(a, g)| a * g).sum();
            cache.weights.iter().zip(&dweights).map(|(a, g)| a * (g - mean)).collect()
        }
        (HeadKind::Mrl, MrlPooling::Mean) => dweights.iter().map(|g| g / n as f64).collect(),
        (HeadKind::Mrl, MrlPooling::SumNormalized) => {
            let total: f64 = cache.scores.iter().sum();
            let mean: f64 = cache.weights.iter().zip(&dweights).map(|(a, g)| a * g).sum();
            dweights.iter().map(|g| (g - mean) / total).collect()
        }
    };

    let mut dpre_v = vec![0.0; hidden];
    let mut dpre_u = vec![0.0; hidden];
    for (k, &ds) in dscores.iter().enumerate() {
        axpy(ds, cache.merged.row(k), &mut g.w);
        let h = cache.instances.row(k);
        let first = cache.first.row(k);
        match cache.kind {
            HeadKind::Mil => {
                for j in 0..hidden {
                    dpre_v[j] = ds * p.w[j] * (1.0 - first[j] * first[j]);
                }
                g.v.add_outer(1.0, &dpre_v, h);
            }
            HeadKind::GatedMil => {
                let gate = cache.second.as_ref().expect("gated cache").row(k);
                for j in 0..hidden {
                    let de = ds * p.w[j];
                    dpre_v[j] = de * gate[j] * (1.0 - first[j] * first[j]);
                    dpre_u[j] = de * first[j] * gate[j] * (1.0 - gate[j]);
                }
                g.v.add_outer(1.0, &dpre_v, h);
                g.u.add_outer(1.0, &dpre_u, h);
            }
            HeadKind::Mrl => {
                let s2 = cache.second.as_ref().expect("mrl cache").row(k);
                let (sig_v, sig_u) = cache.mrl_sigmoids.as_ref().expect("mrl cache");
                let (sig_v, sig_u) = (sig_v.row(k), sig_u.row(k));
                for j in 0..hidden {
                    let (a, b) = (first[j], s2[j]);
                    let denom = a + b + MRL_EPSILON;
                    let de = ds * p.w[j];
                    // Quotient rule on a·b / (a + b + ε).
                    let da = de * b * (b + MRL_EPSILON) / (denom * denom);
                    let db = de * a * (a + MRL_EPSILON) / (denom * denom);
                    let (m1, m2) = match &cache.masks {
                        Some((m1, m2)) => (m1.get(k, j), m2.get(k, j)),
                        None => (1.0, 1.0),
                    };
                    dpre_v[j] = da * m1 * sig_v[j];
                    dpre_u[j] = db * m2 * sig_u[j] * (1.0 - sig_u[j]);
                }
                g.v.add_outer(1.0, &dpre_v, h);
                g.u.add_outer(1.0, &dpre_u, h);
            }
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bag(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = HeadParams::init(8, 16, 6, 11);
        assert_eq!(a, HeadParams::init(8, 16, 6, 11));
        assert_ne!(a, HeadParams::init(8, 16, 6, 12));
        assert!(a.bc.iter().all(|&b| b == 0.0));
        let vb = glorot_bound(16, 8);
        assert!((vb - 0.5).abs() < 1e-15);
        assert!(a.v.as_slice().iter().chain(a.u.as_slice()).all(|x| x.abs() <= vb));
        let wb = glorot_bound(8, 1);
        assert!(a.w.iter().all(|x| x.abs() <= wb));
        let cb = glorot_bound(16, 6);
        assert!(a.wc.as_slice().iter().all(|x| x.abs() <= cb));
    }

    #[test]
    fn singleton_bags() {
        let p = HeadParams::init(3, 2, 6, 1);
        let b = bag(&[&[0.3, -1.2]]);
        assert_eq!(mil_forward(&b, &p).unwrap().attention, vec![1.0]);
        assert_eq!(gated_mil_forward(&b, &p).unwrap().attention, vec![1.0]);
        let f = mrl_forward(&b, &p, Mode::Eval, MrlPooling::Mean).unwrap();
        let a = f.attention[0];
        assert_eq!(f.cache.embedding(), &[a * 0.3, a * -1.2]);
    }

    #[test]
    fn identical_instances_get_equal_attention() {
        let p = HeadParams::init(4, 3, 6, 2);
        let row: &[f64] = &[1.0, 2.0, 3.0];
        let b = bag(&[row; 4]);
        for f in [mil_forward(&b, &p).unwrap(), gated_mil_forward(&b, &p).unwrap()] {
            assert!(f.attention.iter().all(|&a| (a - 0.25).abs() < 1e-15));
        }
        let f = mrl_forward(&b, &p, Mode::Eval, MrlPooling::Mean).unwrap();
        assert!(f.attention.iter().all(|&a| a == f.attention[0]));
    }

    #[test]
    fn zero_gate_halves_mil_scores() {
        let mut p = HeadParams::init(5, 4, 6, 3);
        p.u = Matrix::zeros(5, 4);
        let b = bag(&[&[0.1, 0.2, -0.3, 0.4], &[1.0, -1.0, 0.5, 0.0], &[-0.7, 0.2, 0.9, -0.1]]);
        let mil = mil_forward(&b, &p).unwrap();
        let gated = gated_mil_forward(&b, &p).unwrap();
        let halved: Vec<f64> = mil.cache.scores.iter().map(|s| 0.5 * s).collect();
        for (g, h) in gated.cache.scores.iter().zip(&halved) {
            assert!((g - h).abs() < 1e-15);
        }
        for (a, b) in gated.attention.iter().zip(softmax(&halved)) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let p = HeadParams::init(4, 3, 6, 4);
        let b = bag(&[&[0.5, -0.5, 1.0], &[0.0, 2.0, -1.0]]);
        for kind in [HeadKind::Mil, HeadKind::GatedMil, HeadKind::Mrl] {
            let f = HeadConfig::new(kind).forward(&b, &p, None).unwrap();
            let g = backward(&f.cache, &p, &[0.0; 6]).unwrap();
            assert!(g.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)), "{kind:?}");
        }
    }

    #[test]
    fn backward_rejects_mismatched_shapes() {
        let p = HeadParams::init(4, 3, 6, 4);
        let b = bag(&[&[0.5, -0.5, 1.0]]);
        let f = mil_forward(&b, &p).unwrap();
        let other = HeadParams::init(5, 3, 6, 4);
        assert!(matches!(backward(&f.cache, &other, &[0.0; 6]), Err(AttentionError::CacheMismatch { .. })));
        assert!(matches!(backward(&f.cache, &p, &[0.0; 5]), Err(AttentionError::GradientLength { .. })));
        assert!(matches!(mil_forward(&bag(&[&[1.0, 2.0]]), &p), Err(AttentionError::BagDimension { .. })));
    }

    #[test]
    fn zero_rate_training_matches_eval_bitwise() {
        let p = HeadParams::init(6, 4, 6, 5);
        let b = bag(&[&[0.1, 0.2, -0.3, 0.4], &[1.0, -1.0, 0.5, 0.0]]);
        let eval = mrl_forward(&b, &p, Mode::Eval, MrlPooling::Mean).unwrap();
        let train = mrl_forward(&b, &p, Mode::Train { dropout_rate: 0.0, seed: 9 }, MrlPooling::Mean).unwrap();
        assert_eq!(eval.logits, train.logits);
        assert_eq!(eval.attention, train.attention);
    }

    #[test]
    fn dropout_masks_are_seeded() {
        let p = HeadParams::init(16, 4, 6, 5);
        let b = bag(&[&[0.1, 0.2, -0.3, 0.4], &[1.0, -1.0, 0.5, 0.0]]);
        let mode = Mode::Train { dropout_rate: 0.5, seed: 3 };
        let a = mrl_forward(&b, &p, mode, MrlPooling::Mean).unwrap();
        assert_eq!(a, mrl_forward(&b, &p, mode, MrlPooling::Mean).unwrap());
        let (m1, _) = a.cache.masks.as_ref().unwrap();
        assert!(m1.as_slice().contains(&0.0));
        assert!(m1.as_slice().iter().all(|&m| m == 0.0 || m == 2.0));
    }
}

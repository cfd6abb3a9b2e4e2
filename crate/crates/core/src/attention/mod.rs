//! Toy-scale forward passes of the spectral gating path and the saliency
//! guided attention block, with hand-written backward passes checked
//! against finite differences (see [`gradcheck`]).
//!
//! Features are token-major: `tokens × dim`, tokens ordered row-major over
//! the `(h, w)` spatial grid. Every 1×1 convolution is a per-token linear map
//! `x·W + b`.

mod backward;
pub mod gradcheck;
mod mat;

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use backward::{
    guided_attention_backward, layer_norm_backward, mlp_backward, positional_embedding_backward,
    sgab_backward, sgab_stack_backward, srgm_gate_backward, srgm_refine_backward, AttentionGrads,
    BlockGrads, GateGrads, GuidedAttentionGrads, LinearGrads, MlpGrads, NormGrads, SgabGrads,
};
pub use mat::Mat;

use crate::raster::SaliencyMap;
use crate::{Error, Result};

/// Number of guided attention blocks stacked in the enhancer.
pub const SGAB_COUNT: usize = 4;

/// Layer-norm variance epsilon.
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Token features with their spatial arrangement.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    spatial: (usize, usize),
    data: Mat,
}

impl FeatureMap {
    pub fn new(spatial: (usize, usize), data: Mat) -> Result<Self> {
        if spatial.0 * spatial.1 != data.rows() {
            return Err(Error::ShapeMismatch("token count must equal h·w"));
        }
        if data.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { spatial, data })
    }

    pub fn tokens(&self) -> usize {
        self.data.rows()
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    pub fn spatial(&self) -> (usize, usize) {
        self.spatial
    }

    pub fn data(&self) -> &Mat {
        &self.data
    }

    pub fn into_data(self) -> Mat {
        self.data
    }

    fn with_data(&self, data: Mat) -> Self {
        Self {
            spatial: self.spatial,
            data,
        }
    }
}

/// Sigmoid gate, every value strictly inside `(0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GateMap {
    spatial: (usize, usize),
    data: Mat,
}

impl GateMap {
    pub fn new(spatial: (usize, usize), data: Mat) -> Result<Self> {
        if spatial.0 * spatial.1 != data.rows() {
            return Err(Error::ShapeMismatch("token count must equal h·w"));
        }
        if data.as_slice().iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::ValueOutOfRange { value: f64::NAN });
        }
        Ok(Self { spatial, data })
    }

    /// A gate with every entry equal to `value`.
    pub fn uniform(spatial: (usize, usize), dim: usize, value: f64) -> Result<Self> {
        Self::new(spatial, Mat::filled(spatial.0 * spatial.1, dim, value))
    }

    pub fn data(&self) -> &Mat {
        &self.data
    }

    pub fn spatial(&self) -> (usize, usize) {
        self.spatial
    }
}

/// `y = x·W + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Mat,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Mat::zeros(input, output),
            bias: alloc::vec![0.0; output],
        }
    }

    pub fn forward(&self, x: &Mat) -> Mat {
        x.matmul(&self.weight).add_row(&self.bias)
    }

    fn random(input: usize, output: usize, rng: &mut ChaCha8Rng, amplitude: f64) -> Self {
        Self {
            weight: random_mat(input, output, rng, amplitude),
            bias: (0..output).map(|_| rng.random_range(-amplitude..amplitude)).collect(),
        }
    }
}

/// The two 1×1 convolutions of the spectral gate: `σ(θ(relu(φ(x))))`.
#[derive(Clone, Debug, PartialEq)]
pub struct GateParams {
    pub phi: Linear,
    pub theta: Linear,
}

/// Query/key/value projections (no bias, single head).
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams {
    pub query: Mat,
    pub key: Mat,
    pub value: Mat,
}

impl AttentionParams {
    pub fn zeros(dim: usize) -> Self {
        Self {
            query: Mat::zeros(dim, dim),
            key: Mat::zeros(dim, dim),
            value: Mat::zeros(dim, dim),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl LayerNorm {
    pub fn identity(dim: usize) -> Self {
        Self {
            gamma: alloc::vec![1.0; dim],
            beta: alloc::vec![0.0; dim],
        }
    }
}

/// Pre-norm block: `x = f + GA(LN₁(f))`, `out = x + MLP(LN₂(x))`, MLP width
/// `4·dim` with GELU.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockParams {
    pub norm1: LayerNorm,
    pub attention: AttentionParams,
    pub norm2: LayerNorm,
    pub mlp_in: Linear,
    pub mlp_out: Linear,
}

impl BlockParams {
    /// A block whose attention projections and MLP are all zero.
    pub fn zeros(dim: usize) -> Self {
        Self {
            norm1: LayerNorm::identity(dim),
            attention: AttentionParams::zeros(dim),
            norm2: LayerNorm::identity(dim),
            mlp_in: Linear::zeros(dim, 4 * dim),
            mlp_out: Linear::zeros(4 * dim, dim),
        }
    }
}

/// All toy weights, drawn from a seeded uniform(−0.1, 0.1) initializer
/// (layer-norm gains start at 1, shifts at 0).
#[derive(Clone, Debug, PartialEq)]
pub struct ToyParams {
    pub seed: u64,
    pub spatial: (usize, usize),
    pub dim: usize,
    pub gate: GateParams,
    pub attention: AttentionParams,
    pub blocks: Vec<BlockParams>,
    pub positional: Mat,
}

/// Default toy token grid.
pub const TOY_SPATIAL: (usize, usize) = (4, 4);
/// Default toy embedding dimension.
pub const TOY_DIM: usize = 8;
/// Initializer half-width.
pub const INIT_AMPLITUDE: f64 = 0.1;

fn random_mat(rows: usize, cols: usize, rng: &mut ChaCha8Rng, amplitude: f64) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-amplitude..amplitude))
}

impl ToyParams {
    pub fn init(spatial: (usize, usize), dim: usize, blocks: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = INIT_AMPLITUDE;
        let gate = GateParams {
            phi: Linear::random(dim, dim, &mut rng, a),
            theta: Linear::random(dim, dim, &mut rng, a),
        };
        let attention = random_attention(dim, &mut rng, a);
        let blocks = (0..blocks)
            .map(|_| BlockParams {
                norm1: LayerNorm::identity(dim),
                attention: random_attention(dim, &mut rng, a),
                norm2: LayerNorm::identity(dim),
                mlp_in: Linear::random(dim, 4 * dim, &mut rng, a),
                mlp_out: Linear::random(4 * dim, dim, &mut rng, a),
            })
            .collect();
        let positional = random_mat(spatial.0 * spatial.1, dim, &mut rng, a);
        Self {
            seed,
            spatial,
            dim,
            gate,
            attention,
            blocks,
            positional,
        }
    }
}

fn random_attention(dim: usize, rng: &mut ChaCha8Rng, amplitude: f64) -> AttentionParams {
    AttentionParams {
        query: random_mat(dim, dim, rng, amplitude),
        key: random_mat(dim, dim, rng, amplitude),
        value: random_mat(dim, dim, rng, amplitude),
    }
}

fn inv_sqrt(dim: usize) -> f64 {
    1.0 / libm::sqrt(dim as f64)
}

/// Attention weights `softmax(F·Fᵀ/√C)` of the projection-free refinement.
pub fn srgm_attention(f: &FeatureMap) -> Mat {
    let x = f.data();
    x.matmul_t(x).scale(inv_sqrt(f.dim())).softmax_rows()
}

/// `F′ = F + softmax(F·Fᵀ/√C)·F`.
pub fn srgm_refine(f: &FeatureMap) -> FeatureMap {
    let x = f.data();
    let attended = srgm_attention(f).matmul(x);
    f.with_data(x.add(&attended))
}

/// Output of the spectral gate.
#[derive(Clone, Debug, PartialEq)]
pub struct GateOutput {
    pub gate: GateMap,
    /// Channel mean of the gate on the token grid.
    pub refinement: SaliencyMap,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `G = σ(θ(relu(φ(F′))))` per token, and its channel mean.
pub fn srgm_gate(refined: &FeatureMap, params: &GateParams) -> Result<GateOutput> {
    check_linear(&params.phi, refined.dim(), refined.dim())?;
    check_linear(&params.theta, refined.dim(), refined.dim())?;
    let hidden = params.phi.forward(refined.data()).map(|v| v.max(0.0));
    let mut g = params.theta.forward(&hidden).map(sigmoid);
    // keep the gate strictly inside (0, 1) when the logit saturates
    let lo = f64::MIN_POSITIVE;
    let hi = 1.0 - f64::EPSILON / 2.0;
    g.as_mut_slice().iter_mut().for_each(|v| *v = v.clamp(lo, hi));
    let (h, w) = refined.spatial();
    let c = g.cols() as f64;
    let refinement = SaliencyMap::new(h, w, (0..g.rows()).map(|t| g.row(t).iter().sum::<f64>() / c).collect())?;
    Ok(GateOutput {
        gate: GateMap::new(refined.spatial(), g)?,
        refinement,
    })
}

fn check_linear(l: &Linear, input: usize, output: usize) -> Result<()> {
    if l.weight.shape() != (input, output) || l.bias.len() != output {
        return Err(Error::ShapeMismatch("linear layer does not match feature dim"));
    }
    Ok(())
}

fn check_attention(p: &AttentionParams, dim: usize) -> Result<()> {
    for m in [&p.query, &p.key, &p.value] {
        if m.shape() != (dim, dim) {
            return Err(Error::ShapeMismatch("projection does not match feature dim"));
        }
    }
    Ok(())
}

/// Intermediate values of guided attention, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct AttentionTrace {
    pub query: Mat,
    pub key: Mat,
    pub value: Mat,
    pub gated_value: Mat,
    pub weights: Mat,
    pub output: Mat,
}

/// Guided attention on raw matrices, keeping every intermediate.
pub fn guided_attention_trace(x: &Mat, gate: &Mat, params: &AttentionParams) -> AttentionTrace {
    let query = x.matmul(&params.query);
    let key = x.matmul(&params.key);
    let value = x.matmul(&params.value);
    let gated_value = value.hadamard(gate);
    let weights = query.matmul_t(&key).scale(inv_sqrt(x.cols())).softmax_rows();
    let output = weights.matmul(&gated_value);
    AttentionTrace {
        query,
        key,
        value,
        gated_value,
        weights,
        output,
    }
}

fn check_gate(f: &FeatureMap, gate: &GateMap) -> Result<()> {
    if gate.data().shape() != f.data().shape() {
        return Err(Error::ShapeMismatch("gate and features differ in shape"));
    }
    Ok(())
}

/// `softmax(Q·Kᵀ/√C) · (V ⊙ G)` with `Q, K, V` projected from `f_i`.
pub fn guided_attention(f_i: &FeatureMap, gate: &GateMap, params: &AttentionParams) -> Result<FeatureMap> {
    check_gate(f_i, gate)?;
    check_attention(params, f_i.dim())?;
    let t = guided_attention_trace(f_i.data(), gate.data(), params);
    Ok(f_i.with_data(t.output))
}

/// Plain single-head self-attention with the same projections.
pub fn self_attention(f: &FeatureMap, params: &AttentionParams) -> Result<FeatureMap> {
    check_attention(params, f.dim())?;
    let x = f.data();
    let q = x.matmul(&params.query);
    let k = x.matmul(&params.key);
    let v = x.matmul(&params.value);
    Ok(f.with_data(q.matmul_t(&k).scale(inv_sqrt(f.dim())).softmax_rows().matmul(&v)))
}

pub(crate) struct NormTrace {
    pub normalized: Mat,
    pub inv_std: Vec<f64>,
    pub output: Mat,
}

pub(crate) fn layer_norm_trace(x: &Mat, ln: &LayerNorm) -> NormTrace {
    let c = x.cols() as f64;
    let mut normalized = Mat::zeros(x.rows(), x.cols());
    let mut inv_std = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / c;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c;
        let is = 1.0 / libm::sqrt(var + LAYER_NORM_EPS);
        for (o, v) in normalized.row_mut(r).iter_mut().zip(row) {
            *o = (v - mean) * is;
        }
        inv_std.push(is);
    }
    let output = Mat::from_fn(x.rows(), x.cols(), |r, col| {
        ln.gamma[col] * normalized.get(r, col) + ln.beta[col]
    });
    NormTrace {
        normalized,
        inv_std,
        output,
    }
}

const GELU_K: f64 = 0.797_884_560_802_865_4; // √(2/π)
const GELU_C: f64 = 0.044_715;

/// Tanh approximation of GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::tanh(GELU_K * (x + GELU_C * x * x * x)))
}

pub(crate) fn gelu_derivative(x: f64) -> f64 {
    let t = libm::tanh(GELU_K * (x + GELU_C * x * x * x));
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_K * (1.0 + 3.0 * GELU_C * x * x)
}

pub(crate) struct BlockTrace {
    pub norm1: NormTrace,
    pub attention: AttentionTrace,
    pub norm2: NormTrace,
    pub hidden_pre: Mat,
    pub hidden: Mat,
    pub output: Mat,
}

pub(crate) fn sgab_trace(x: &Mat, gate: &Mat, p: &BlockParams) -> BlockTrace {
    let norm1 = layer_norm_trace(x, &p.norm1);
    let attention = guided_attention_trace(&norm1.output, gate, &p.attention);
    let residual = x.add(&attention.output);
    let norm2 = layer_norm_trace(&residual, &p.norm2);
    let hidden_pre = p.mlp_in.forward(&norm2.output);
    let hidden = hidden_pre.map(gelu);
    let output = residual.add(&p.mlp_out.forward(&hidden));
    BlockTrace {
        norm1,
        attention,
        norm2,
        hidden_pre,
        hidden,
        output,
    }
}

fn check_block(p: &BlockParams, dim: usize) -> Result<()> {
    check_attention(&p.attention, dim)?;
    check_linear(&p.mlp_in, dim, 4 * dim)?;
    check_linear(&p.mlp_out, 4 * dim, dim)?;
    for v in [&p.norm1.gamma, &p.norm1.beta, &p.norm2.gamma, &p.norm2.beta] {
        if v.len() != dim {
            return Err(Error::ShapeMismatch("layer norm does not match feature dim"));
        }
    }
    Ok(())
}

/// One saliency guided attention block.
pub fn sgab_forward(f_i: &FeatureMap, gate: &GateMap, params: &BlockParams) -> Result<FeatureMap> {
    check_gate(f_i, gate)?;
    check_block(params, f_i.dim())?;
    Ok(f_i.with_data(sgab_trace(f_i.data(), gate.data(), params).output))
}

/// Blocks applied in sequence, all sharing one gate.
pub fn sgab_stack(f_i: &FeatureMap, gate: &GateMap, blocks: &[BlockParams]) -> Result<FeatureMap> {
    let mut x = f_i.clone();
    for b in blocks {
        x = sgab_forward(&x, gate, b)?;
    }
    Ok(x)
}

/// Adds a learned per-token offset.
pub fn add_positional_embedding(f: &FeatureMap, table: &Mat) -> Result<FeatureMap> {
    if table.shape() != f.data().shape() {
        return Err(Error::ShapeMismatch("positional table does not match features"));
    }
    Ok(f.with_data(f.data().add(table)))
}

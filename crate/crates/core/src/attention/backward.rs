//! Reverse-mode gradients of the toy modules.

use alloc::vec::Vec;

use super::mat::{softmax_rows_backward, Mat};
use super::{
    gelu_derivative, guided_attention_trace, inv_sqrt, layer_norm_trace, sgab_trace, srgm_attention,
    AttentionParams, AttentionTrace, BlockParams, FeatureMap, GateParams, LayerNorm, Linear, NormTrace,
};

/// `dF` of [`super::srgm_refine`] given the output gradient.
pub fn srgm_refine_backward(f: &FeatureMap, d_out: &Mat) -> Mat {
    let x = f.data();
    let a = srgm_attention(f);
    let da = d_out.matmul_t(x);
    let ds = softmax_rows_backward(&a, &da);
    let scale = inv_sqrt(f.dim());
    let sym = ds.add(&ds.transpose());
    d_out.add(&a.t_matmul(d_out)).add(&sym.matmul(x).scale(scale))
}

#[derive(Clone, Debug)]
pub struct LinearGrads {
    pub weight: Mat,
    pub bias: Vec<f64>,
}

fn linear_backward(x: &Mat, l: &Linear, dy: &Mat) -> (Mat, LinearGrads) {
    let dx = dy.matmul_t(&l.weight);
    (
        dx,
        LinearGrads {
            weight: x.t_matmul(dy),
            bias: dy.column_sums(),
        },
    )
}

#[derive(Clone, Debug)]
pub struct GateGrads {
    pub input: Mat,
    pub phi: LinearGrads,
    pub theta: LinearGrads,
}

/// Gradients of [`super::srgm_gate`] given `dG` and `dG_ref` (token-major,
/// one value per token).
pub fn srgm_gate_backward(refined: &FeatureMap, params: &GateParams, d_gate: &Mat, d_refinement: &[f64]) -> GateGrads {
    let x = refined.data();
    let pre = params.phi.forward(x);
    let hidden = pre.map(|v| v.max(0.0));
    let gate = params.theta.forward(&hidden).map(|z| {
        if z >= 0.0 {
            1.0 / (1.0 + libm::exp(-z))
        } else {
            let e = libm::exp(z);
            e / (1.0 + e)
        }
    });
    let c = gate.cols() as f64;
    let d_g = Mat::from_fn(gate.rows(), gate.cols(), |t, j| d_gate.get(t, j) + d_refinement[t] / c);
    let dz = Mat::from_fn(gate.rows(), gate.cols(), |t, j| {
        let g = gate.get(t, j);
        d_g.get(t, j) * g * (1.0 - g)
    });
    let (d_hidden, theta) = linear_backward(&hidden, &params.theta, &dz);
    let d_pre = d_hidden.zip_map(&pre, |d, p| if p > 0.0 { d } else { 0.0 });
    let (input, phi) = linear_backward(x, &params.phi, &d_pre);
    GateGrads { input, phi, theta }
}

#[derive(Clone, Debug)]
pub struct AttentionGrads {
    pub query: Mat,
    pub key: Mat,
    pub value: Mat,
}

#[derive(Clone, Debug)]
pub struct GuidedAttentionGrads {
    pub input: Mat,
    pub gate: Mat,
    pub params: AttentionGrads,
}

pub(crate) fn attention_trace_backward(
    x: &Mat,
    gate: &Mat,
    params: &AttentionParams,
    t: &AttentionTrace,
    d_out: &Mat,
) -> GuidedAttentionGrads {
    let scale = inv_sqrt(x.cols());
    let d_gated = t.weights.t_matmul(d_out);
    let d_weights = d_out.matmul_t(&t.gated_value);
    let ds = softmax_rows_backward(&t.weights, &d_weights).scale(scale);
    let dq = ds.matmul(&t.key);
    let dk = ds.t_matmul(&t.query);
    let dv = d_gated.hadamard(gate);
    let d_gate = d_gated.hadamard(&t.value);
    let input = dq
        .matmul_t(&params.query)
        .add(&dk.matmul_t(&params.key))
        .add(&dv.matmul_t(&params.value));
    GuidedAttentionGrads {
        input,
        gate: d_gate,
        params: AttentionGrads {
            query: x.t_matmul(&dq),
            key: x.t_matmul(&dk),
            value: x.t_matmul(&dv),
        },
    }
}

/// Gradients of [`super::guided_attention`].
pub fn guided_attention_backward(f_i: &FeatureMap, gate: &Mat, params: &AttentionParams, d_out: &Mat) -> GuidedAttentionGrads {
    let t = guided_attention_trace(f_i.data(), gate, params);
    attention_trace_backward(f_i.data(), gate, params, &t, d_out)
}

#[derive(Clone, Debug)]
pub struct NormGrads {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

pub(crate) fn norm_trace_backward(ln: &LayerNorm, t: &NormTrace, dy: &Mat) -> (Mat, NormGrads) {
    let (rows, cols) = dy.shape();
    let c = cols as f64;
    let mut dx = Mat::zeros(rows, cols);
    let mut gamma = alloc::vec![0.0; cols];
    let mut beta = alloc::vec![0.0; cols];
    for r in 0..rows {
        let xhat = t.normalized.row(r);
        let dyr = dy.row(r);
        let dxhat: Vec<f64> = dyr.iter().zip(&ln.gamma).map(|(d, g)| d * g).collect();
        let mean_d = dxhat.iter().sum::<f64>() / c;
        let mean_dx = dxhat.iter().zip(xhat).map(|(d, x)| d * x).sum::<f64>() / c;
        for (j, o) in dx.row_mut(r).iter_mut().enumerate() {
            *o = (dxhat[j] - mean_d - xhat[j] * mean_dx) * t.inv_std[r];
        }
        for j in 0..cols {
            gamma[j] += dyr[j] * xhat[j];
            beta[j] += dyr[j];
        }
    }
    (dx, NormGrads { gamma, beta })
}

/// Gradients of a layer norm given its input and output gradient.
pub fn layer_norm_backward(x: &Mat, ln: &LayerNorm, dy: &Mat) -> (Mat, NormGrads) {
    let t = layer_norm_trace(x, ln);
    norm_trace_backward(ln, &t, dy)
}

#[derive(Clone, Debug)]
pub struct MlpGrads {
    pub input: Mat,
    pub mlp_in: LinearGrads,
    pub mlp_out: LinearGrads,
}

/// Gradients of `mlp_out(gelu(mlp_in(x)))`.
pub fn mlp_backward(x: &Mat, mlp_in: &Linear, mlp_out: &Linear, dy: &Mat) -> MlpGrads {
    let pre = mlp_in.forward(x);
    let hidden = pre.map(super::gelu);
    mlp_backward_from(x, &pre, &hidden, mlp_in, mlp_out, dy)
}

fn mlp_backward_from(x: &Mat, pre: &Mat, hidden: &Mat, mlp_in: &Linear, mlp_out: &Linear, dy: &Mat) -> MlpGrads {
    let (d_hidden, out_grads) = linear_backward(hidden, mlp_out, dy);
    let d_pre = d_hidden.zip_map(pre, |d, p| d * gelu_derivative(p));
    let (input, in_grads) = linear_backward(x, mlp_in, &d_pre);
    MlpGrads {
        input,
        mlp_in: in_grads,
        mlp_out: out_grads,
    }
}

#[derive(Clone, Debug)]
pub struct BlockGrads {
    pub norm1: NormGrads,
    pub attention: AttentionGrads,
    pub norm2: NormGrads,
    pub mlp_in: LinearGrads,
    pub mlp_out: LinearGrads,
}

#[derive(Clone, Debug)]
pub struct SgabGrads {
    pub input: Mat,
    pub gate: Mat,
    pub block: BlockGrads,
}

pub(crate) fn sgab_backward_mat(x: &Mat, gate: &Mat, p: &BlockParams, d_out: &Mat) -> SgabGrads {
    let t = sgab_trace(x, gate, p);
    let mlp = mlp_backward_from(&t.norm2.output, &t.hidden_pre, &t.hidden, &p.mlp_in, &p.mlp_out, d_out);
    let (d_norm2_in, norm2) = norm_trace_backward(&p.norm2, &t.norm2, &mlp.input);
    let d_residual = d_out.add(&d_norm2_in);
    let att = attention_trace_backward(&t.norm1.output, gate, &p.attention, &t.attention, &d_residual);
    let (d_norm1_in, norm1) = norm_trace_backward(&p.norm1, &t.norm1, &att.input);
    SgabGrads {
        input: d_residual.add(&d_norm1_in),
        gate: att.gate,
        block: BlockGrads {
            norm1,
            attention: att.params,
            norm2,
            mlp_in: mlp.mlp_in,
            mlp_out: mlp.mlp_out,
        },
    }
}

/// Gradients of [`super::sgab_forward`].
pub fn sgab_backward(f_i: &FeatureMap, gate: &Mat, params: &BlockParams, d_out: &Mat) -> SgabGrads {
    sgab_backward_mat(f_i.data(), gate, params, d_out)
}

/// Gradients of [`super::sgab_stack`]: input, accumulated gate, and one
/// [`BlockGrads`] per block.
pub fn sgab_stack_backward(f_i: &FeatureMap, gate: &Mat, blocks: &[BlockParams], d_out: &Mat) -> (Mat, Mat, Vec<BlockGrads>) {
    let mut inputs = Vec::with_capacity(blocks.len());
    let mut x = f_i.data().clone();
    for b in blocks {
        let next = sgab_trace(&x, gate, b).output;
        inputs.push(core::mem::replace(&mut x, next));
    }
    let mut d = d_out.clone();
    let mut d_gate = Mat::zeros(gate.rows(), gate.cols());
    let mut grads = Vec::with_capacity(blocks.len());
    for (b, x) in blocks.iter().zip(&inputs).rev() {
        let g = sgab_backward_mat(x, gate, b, &d);
        d_gate.add_assign(&g.gate);
        d = g.input;
        grads.push(g.block);
    }
    grads.reverse();
    (d, d_gate, grads)
}

/// Gradients of [`super::add_positional_embedding`]: `(dF, dTable)`.
pub fn positional_embedding_backward(d_out: &Mat) -> (Mat, Mat) {
    (d_out.clone(), d_out.clone())
}

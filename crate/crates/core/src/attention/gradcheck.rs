//! Finite-difference verification of the toy backward passes.
//!
//! Each module is wrapped as a scalar function of one flat vector holding
//! its inputs and parameters; the scalar is `Σ out ⊙ R` for a seeded random
//! readout `R`. The analytic gradient is compared against central differences
//! entry by entry.

use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::backward::{self, BlockGrads, LinearGrads};
use super::mat::Mat;
use super::{
    add_positional_embedding, guided_attention, sgab_forward, sgab_stack, srgm_gate, srgm_refine,
    AttentionParams, BlockParams, FeatureMap, GateMap, GateParams, LayerNorm, Linear, SGAB_COUNT,
};

/// Denominator floor of the relative error, so entries whose true gradient
/// is ~0 are judged on absolute error.
pub const RELATIVE_FLOOR: f64 = 1e-4;

/// Default finite-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Modules covered by [`grad_check`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ToyModule {
    SrgmRefine,
    SrgmGate,
    GuidedAttention,
    Sgab,
    SgabStack,
    PositionalEmbedding,
}

impl ToyModule {
    pub const ALL: [ToyModule; 6] = [
        ToyModule::SrgmRefine,
        ToyModule::SrgmGate,
        ToyModule::GuidedAttention,
        ToyModule::Sgab,
        ToyModule::SgabStack,
        ToyModule::PositionalEmbedding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ToyModule::SrgmRefine => "srgm_refine",
            ToyModule::SrgmGate => "srgm_gate",
            ToyModule::GuidedAttention => "guided_attention",
            ToyModule::Sgab => "sgab",
            ToyModule::SgabStack => "sgab_stack",
            ToyModule::PositionalEmbedding => "positional_embedding",
        }
    }
}

impl fmt::Display for ToyModule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckOptions {
    pub spatial: (usize, usize),
    pub dim: usize,
    pub step: f64,
    /// Adds `delta` to analytic gradient entry `index` before comparing;
    /// used to confirm the harness notices a wrong gradient.
    pub corrupt: Option<(usize, f64)>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            spatial: (2, 2),
            dim: 3,
            step: DEFAULT_STEP,
            corrupt: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckReport {
    pub module: ToyModule,
    pub seed: u64,
    pub entries: usize,
    pub max_relative_error: f64,
}

/// Flat (de)serialization of parameter sets.
trait Flat {
    fn push_to(&self, out: &mut Vec<f64>);
    fn load_from(&mut self, src: &mut &[f64]);
}

fn take<'a>(src: &mut &'a [f64], n: usize) -> &'a [f64] {
    let (head, tail) = src.split_at(n);
    *src = tail;
    head
}

impl Flat for Mat {
    fn push_to(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.as_slice());
    }
    fn load_from(&mut self, src: &mut &[f64]) {
        let n = self.as_slice().len();
        self.as_mut_slice().copy_from_slice(take(src, n));
    }
}

impl Flat for Vec<f64> {
    fn push_to(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self);
    }
    fn load_from(&mut self, src: &mut &[f64]) {
        let n = self.len();
        self.copy_from_slice(take(src, n));
    }
}

impl Flat for Linear {
    fn push_to(&self, out: &mut Vec<f64>) {
        self.weight.push_to(out);
        self.bias.push_to(out);
    }
    fn load_from(&mut self, src: &mut &[f64]) {
        self.weight.load_from(src);
        self.bias.load_from(src);
    }
}

impl Flat for LinearGrads {
    fn push_to(&self, out: &mut Vec<f64>) {
        self.weight.push_to(out);
        self.bias.push_to(out);
    }
    fn load_from(&mut self, _: &mut &[f64]) {
        unreachable!("gradients are write-only")
    }
}

impl Flat for AttentionParams {
    fn push_to(&self, out: &mut Vec<f64>) {
        self.query.push_to(out);
        self.key.push_to(out);
        self.value.push_to(out);
    }
    fn load_from(&mut self, src: &mut &[f64]) {
        self.query.load_from(src);
        self.key.load_from(src);
        self.value.load_from(src);
    }
}

impl Flat for LayerNorm {
    fn push_to(&self, out: &mut Vec<f64>) {
        self.gamma.push_to(out);
        self.beta.push_to(out);
    }
    fn load_from(&mut self, src: &mut &[f64]) {
        self.gamma.load_from(src);
        self.beta.load_from(src);
    }
}

impl Flat for BlockParams {
    fn push_to(&self, out: &mut Vec<f64>) {
        self.norm1.push_to(out);
        self.attention.push_to(out);
        self.norm2.push_to(out);
        self.mlp_in.push_to(out);
        self.mlp_out.push_to(out);
    }
    fn load_from(&mut self, src: &mut &[f64]) {
        self.norm1.load_from(src);
        self.attention.load_from(src);
        self.norm2.load_from(src);
        self.mlp_in.load_from(src);
        self.mlp_out.load_from(src);
    }
}

fn push_block_grads(g: &BlockGrads, out: &mut Vec<f64>) {
    out.extend_from_slice(&g.norm1.gamma);
    out.extend_from_slice(&g.norm1.beta);
    g.attention.query.push_to(out);
    g.attention.key.push_to(out);
    g.attention.value.push_to(out);
    out.extend_from_slice(&g.norm2.gamma);
    out.extend_from_slice(&g.norm2.beta);
    g.mlp_in.push_to(out);
    g.mlp_out.push_to(out);
}

fn flat<T: Flat>(items: &[&T]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in items {
        i.push_to(&mut out);
    }
    out
}

/// Randomized instance for one module.
struct Instance {
    spatial: (usize, usize),
    input: Mat,
    gate: Mat,
    readout: Mat,
    readout_ref: Vec<f64>,
    gate_params: GateParams,
    attention: AttentionParams,
    blocks: Vec<BlockParams>,
    positional: Mat,
}

fn random_mat(rows: usize, cols: usize, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn random_linear(i: usize, o: usize, rng: &mut ChaCha8Rng) -> Linear {
    Linear {
        weight: random_mat(i, o, rng, -0.8, 0.8),
        bias: random_vec(o, rng, -0.5, 0.5),
    }
}

fn random_attention(d: usize, rng: &mut ChaCha8Rng) -> AttentionParams {
    AttentionParams {
        query: random_mat(d, d, rng, -1.0, 1.0),
        key: random_mat(d, d, rng, -1.0, 1.0),
        value: random_mat(d, d, rng, -1.0, 1.0),
    }
}

fn random_norm(d: usize, rng: &mut ChaCha8Rng) -> LayerNorm {
    LayerNorm {
        gamma: random_vec(d, rng, 0.5, 1.5),
        beta: random_vec(d, rng, -0.5, 0.5),
    }
}

impl Instance {
    fn new(options: &GradCheckOptions, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = options.spatial.0 * options.spatial.1;
        let d = options.dim;
        let input = random_mat(n, d, &mut rng, -1.0, 1.0);
        let gate = random_mat(n, d, &mut rng, 0.1, 0.9);
        let readout = random_mat(n, d, &mut rng, -1.0, 1.0);
        let readout_ref = random_vec(n, &mut rng, -1.0, 1.0);
        let gate_params = GateParams {
            phi: random_linear(d, d, &mut rng),
            theta: random_linear(d, d, &mut rng),
        };
        let attention = random_attention(d, &mut rng);
        let blocks = (0..SGAB_COUNT)
            .map(|_| BlockParams {
                norm1: random_norm(d, &mut rng),
                attention: random_attention(d, &mut rng),
                norm2: random_norm(d, &mut rng),
                mlp_in: random_linear(d, 4 * d, &mut rng),
                mlp_out: random_linear(4 * d, d, &mut rng),
            })
            .collect();
        let positional = random_mat(n, d, &mut rng, -1.0, 1.0);
        Self {
            spatial: options.spatial,
            input,
            gate,
            readout,
            readout_ref,
            gate_params,
            attention,
            blocks,
            positional,
        }
    }

    fn features(&self, x: Mat) -> FeatureMap {
        FeatureMap::new(self.spatial, x).expect("instance shapes are consistent")
    }

    fn dot(&self, m: &Mat) -> f64 {
        m.as_slice().iter().zip(self.readout.as_slice()).map(|(a, b)| a * b).sum()
    }

    /// Flat vector of everything the module's output depends on.
    fn pack(&self, module: ToyModule) -> Vec<f64> {
        let mut v = Vec::new();
        self.input.push_to(&mut v);
        match module {
            ToyModule::SrgmRefine => {}
            ToyModule::SrgmGate => self.gate_params.phi.push_to(&mut v),
            ToyModule::GuidedAttention => {
                self.gate.push_to(&mut v);
                self.attention.push_to(&mut v);
            }
            ToyModule::Sgab => {
                self.gate.push_to(&mut v);
                self.blocks[0].push_to(&mut v);
            }
            ToyModule::SgabStack => {
                self.gate.push_to(&mut v);
                for b in &self.blocks {
                    b.push_to(&mut v);
                }
            }
            ToyModule::PositionalEmbedding => self.positional.push_to(&mut v),
        }
        if module == ToyModule::SrgmGate {
            self.gate_params.theta.push_to(&mut v);
        }
        v
    }

    fn unpack(&mut self, module: ToyModule, v: &[f64]) {
        let mut src = v;
        self.input.load_from(&mut src);
        match module {
            ToyModule::SrgmRefine => {}
            ToyModule::SrgmGate => {
                self.gate_params.phi.load_from(&mut src);
                self.gate_params.theta.load_from(&mut src);
            }
            ToyModule::GuidedAttention => {
                self.gate.load_from(&mut src);
                self.attention.load_from(&mut src);
            }
            ToyModule::Sgab => {
                self.gate.load_from(&mut src);
                self.blocks[0].load_from(&mut src);
            }
            ToyModule::SgabStack => {
                self.gate.load_from(&mut src);
                for b in self.blocks.iter_mut() {
                    b.load_from(&mut src);
                }
            }
            ToyModule::PositionalEmbedding => self.positional.load_from(&mut src),
        }
        debug_assert!(src.is_empty());
    }

    fn gate_map(&self) -> GateMap {
        GateMap::new(self.spatial, self.gate.clone()).expect("gate stays inside (0, 1)")
    }

    fn objective(&self, module: ToyModule) -> f64 {
        let f = self.features(self.input.clone());
        match module {
            ToyModule::SrgmRefine => self.dot(srgm_refine(&f).data()),
            ToyModule::SrgmGate => {
                let out = srgm_gate(&f, &self.gate_params).expect("shapes");
                self.dot(out.gate.data())
                    + out
                        .refinement
                        .as_slice()
                        .iter()
                        .zip(&self.readout_ref)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
            }
            ToyModule::GuidedAttention => {
                self.dot(guided_attention(&f, &self.gate_map(), &self.attention).expect("shapes").data())
            }
            ToyModule::Sgab => self.dot(sgab_forward(&f, &self.gate_map(), &self.blocks[0]).expect("shapes").data()),
            ToyModule::SgabStack => self.dot(sgab_stack(&f, &self.gate_map(), &self.blocks).expect("shapes").data()),
            ToyModule::PositionalEmbedding => {
                self.dot(add_positional_embedding(&f, &self.positional).expect("shapes").data())
            }
        }
    }

    /// Analytic gradient laid out like [`Instance::pack`].
    fn gradient(&self, module: ToyModule) -> Vec<f64> {
        let f = self.features(self.input.clone());
        let d = &self.readout;
        let mut v = Vec::new();
        match module {
            ToyModule::SrgmRefine => backward::srgm_refine_backward(&f, d).push_to(&mut v),
            ToyModule::SrgmGate => {
                let g = backward::srgm_gate_backward(&f, &self.gate_params, d, &self.readout_ref);
                g.input.push_to(&mut v);
                g.phi.push_to(&mut v);
                g.theta.push_to(&mut v);
            }
            ToyModule::GuidedAttention => {
                let g = backward::guided_attention_backward(&f, &self.gate, &self.attention, d);
                v = flat(&[&g.input, &g.gate, &g.params.query, &g.params.key, &g.params.value]);
            }
            ToyModule::Sgab => {
                let g = backward::sgab_backward(&f, &self.gate, &self.blocks[0], d);
                v = flat(&[&g.input, &g.gate]);
                push_block_grads(&g.block, &mut v);
            }
            ToyModule::SgabStack => {
                let (dx, dg, blocks) = backward::sgab_stack_backward(&f, &self.gate, &self.blocks, d);
                v = flat(&[&dx, &dg]);
                for b in &blocks {
                    push_block_grads(b, &mut v);
                }
            }
            ToyModule::PositionalEmbedding => {
                let (dx, dt) = backward::positional_embedding_backward(d);
                v = flat(&[&dx, &dt]);
            }
        }
        v
    }
}

/// Relative error with [`RELATIVE_FLOOR`] in the denominator.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    libm::fabs(analytic - numeric) / libm::fabs(analytic).max(libm::fabs(numeric)).max(RELATIVE_FLOOR)
}

/// Central-difference gradient of `f` at `x`.
pub fn numeric_gradient(x: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + step;
            let plus = f(&probe);
            probe[i] = orig - step;
            let minus = f(&probe);
            probe[i] = orig;
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

/// Checks `module` on a seeded 2×2-token, dim-3 instance.
pub fn grad_check(module: ToyModule, seed: u64) -> GradCheckReport {
    grad_check_with(module, seed, &GradCheckOptions::default())
}

pub fn grad_check_with(module: ToyModule, seed: u64, options: &GradCheckOptions) -> GradCheckReport {
    let mut instance = Instance::new(options, seed);
    let x = instance.pack(module);
    let mut analytic = instance.gradient(module);
    debug_assert_eq!(analytic.len(), x.len());
    if let Some((index, delta)) = options.corrupt {
        if let Some(a) = analytic.get_mut(index) {
            *a += delta;
        }
    }
    let numeric = numeric_gradient(&x, options.step, |v| {
        instance.unpack(module, v);
        instance.objective(module)
    });
    let max_relative_error = analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max);
    GradCheckReport {
        module,
        seed,
        entries: x.len(),
        max_relative_error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_module_passes_on_seed_zero() {
        for m in ToyModule::ALL {
            let r = grad_check(m, 0);
            assert!(r.max_relative_error < 1e-4, "{m}: {}", r.max_relative_error);
        }
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let opts = GradCheckOptions {
            corrupt: Some((0, 0.1)),
            ..GradCheckOptions::default()
        };
        for m in [ToyModule::SrgmRefine, ToyModule::SrgmGate] {
            assert!(grad_check_with(m, 0, &opts).max_relative_error > 1e-2);
        }
    }
}

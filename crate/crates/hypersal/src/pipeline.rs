//! Per-scene pipeline shared by the CLI and the annotation service, so both
//! produce identical bytes for identical inputs.

use std::fs;
use std::path::{Path, PathBuf};

use hypersal_core::attention::gradcheck::{grad_check, ToyModule};
use hypersal_core::attention::{self, FeatureMap, Mat, ToyParams};
use hypersal_core::crf::refine_saliency;
use hypersal_core::metrics::{binary_ground_truth, evaluate, MetricsReport};
use hypersal_core::pseudo_label::{generate_pseudo_label_with, EdgeInputs, PseudoLabel};
use hypersal_core::resample::{default_false_color_bands, false_color};
use hypersal_core::saliency::spectral_saliency_with_levels;
use hypersal_core::{BinaryMask, HyperCube, Label, PointSet, RgbImage, SaliencyMap, TriMask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::io::{self, quantize16};

fn quantized(values: Vec<f64>) -> Vec<f64> {
    values.into_iter().map(quantize16).collect()
}

/// False-color rendering, quantized to what a 16-bit file would hold.
pub fn render_falsecolor(cube: &HyperCube, config: &PipelineConfig) -> Result<RgbImage> {
    let bands = config.bands.unwrap_or_else(|| default_false_color_bands(cube.bands()));
    let rgb = false_color(cube, bands)?;
    let (h, w) = rgb.dims();
    let planes = rgb.planes().clone().map(quantized);
    Ok(RgbImage::new(h, w, planes)?)
}

/// Spectral saliency, quantized to what `sal.pgm` holds.
pub fn render_specsal(cube: &HyperCube, config: &PipelineConfig) -> Result<SaliencyMap> {
    let s = spectral_saliency_with_levels(cube, config.levels)?;
    let (h, w) = s.dims();
    Ok(SaliencyMap::new(h, w, quantized(s.into_vec()))?)
}

#[derive(Clone, Debug)]
pub struct Layers {
    pub falsecolor: RgbImage,
    pub specsal: SaliencyMap,
}

impl Layers {
    pub fn compute(cube: &HyperCube, config: &PipelineConfig) -> Result<Self> {
        Ok(Self {
            falsecolor: render_falsecolor(cube, config)?,
            specsal: render_specsal(cube, config)?,
        })
    }

    pub fn pseudo_label(&self, points: &PointSet, config: &PipelineConfig, edges: EdgeInputs<'_>) -> Result<PseudoLabel> {
        Ok(generate_pseudo_label_with(
            &self.falsecolor,
            &self.specsal,
            points,
            &config.label_config(),
            edges,
        )?)
    }

    /// Both CRF refinements, binarized and intersected.
    pub fn refine(&self, pred: &SaliencyMap, config: &PipelineConfig) -> Result<BinaryMask> {
        let params = config.crf_params();
        Ok(refine_saliency(
            pred,
            &self.falsecolor,
            &self.specsal,
            &params,
            &params,
            config.refine_tau,
        )?)
    }
}

/// Stand-in for a trained network's output: definite pseudo-label pixels
/// keep their label, unknown pixels take the spectral saliency value.
pub fn soft_prediction(label: &TriMask, specsal: &SaliencyMap) -> Result<SaliencyMap> {
    let (h, w) = label.dims();
    if specsal.dims() != (h, w) {
        return Err(hypersal_core::Error::DimensionMismatch {
            expected: (h, w),
            found: specsal.dims(),
        }
        .into());
    }
    let data = label
        .as_slice()
        .iter()
        .zip(specsal.as_slice())
        .map(|(&l, &s)| match l {
            Label::Foreground => 1.0,
            Label::Background => 0.0,
            Label::Unknown => s,
        })
        .collect();
    Ok(SaliencyMap::new(h, w, data)?)
}

pub fn metrics_json(r: &MetricsReport) -> Value {
    json!({
        "mae": r.mae,
        "f_beta": r.f_beta,
        "max_f_beta": r.max_f_beta,
        "e_measure": r.e_measure,
        "auc": r.auc,
        "cc": r.cc,
    })
}

pub fn mask_to_map(mask: &BinaryMask) -> SaliencyMap {
    let (h, w) = mask.dims();
    SaliencyMap::new(h, w, mask.as_slice().iter().map(|&b| f64::from(u8::from(b))).collect())
        .expect("mask dims are valid")
}

/// Inputs of one `run` invocation.
#[derive(Clone, Debug)]
pub struct RunInputs {
    pub cube: PathBuf,
    pub points: PathBuf,
    pub gt: Option<PathBuf>,
    /// A real prediction to refine instead of the stand-in.
    pub pred: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub counts: (usize, usize, usize),
    pub leak: bool,
    pub metrics: Option<Value>,
}

/// Runs saliency, pseudo-labeling, refinement and (with ground truth)
/// evaluation, writing `sal.pgm`, `label.pgm`, `refined.pgm` and
/// `metrics.json` into `out_dir`.
pub fn run_scene(inputs: &RunInputs, config: &PipelineConfig, out_dir: &Path) -> Result<RunSummary> {
    config.validate()?;
    let points = io::read_points(&inputs.points)?;
    let cube = io::read_cube(&inputs.cube)?;
    let gt = inputs.gt.as_deref().map(io::read_map_pgm).transpose()?;
    let given_pred = inputs.pred.as_deref().map(io::read_map_pgm).transpose()?;

    let layers = Layers::compute(&cube, config)?;
    let label = layers.pseudo_label(&points, config, EdgeInputs::default())?;
    let pred = match given_pred {
        Some(p) => p,
        None => soft_prediction(&label.mask, &layers.specsal)?,
    };
    let refined = layers.refine(&pred, config)?;

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    io::write_map_pgm(&layers.specsal, &out_dir.join("sal.pgm"))?;
    io::write_mask_pgm(&label.mask, &out_dir.join("label.pgm"))?;
    io::pnm::write_binary_pgm(&refined, &out_dir.join("refined.pgm"))?;

    let metrics = match gt {
        Some(gt) => {
            let gt = binary_ground_truth(&gt)?;
            let value = json!({
                "prediction": metrics_json(&evaluate(&pred, &gt)?),
                "refined": metrics_json(&evaluate(&mask_to_map(&refined), &gt)?),
            });
            let path = out_dir.join("metrics.json");
            let text = serde_json::to_string_pretty(&value).expect("metrics serialize");
            fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
            Some(value)
        }
        None => None,
    };
    Ok(RunSummary {
        counts: label.counts(),
        leak: label.leak,
        metrics,
    })
}

fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Gradient checks for every toy module plus a forward pass through the full
/// toy network. `passed` is false when any error reaches `tolerance` or a
/// shape or range check fails.
pub fn toy_check(seed: u64, tolerance: f64) -> Result<Value> {
    let checks: Vec<Value> = ToyModule::ALL
        .iter()
        .map(|&m| {
            let r = grad_check(m, seed);
            json!({
                "module": m.name(),
                "entries": r.entries,
                "max_relative_error": r.max_relative_error,
                "passed": r.max_relative_error < tolerance,
            })
        })
        .collect();

    let spatial = attention::TOY_SPATIAL;
    let dim = attention::TOY_DIM;
    let tokens = spatial.0 * spatial.1;
    let params = ToyParams::init(spatial, dim, attention::SGAB_COUNT, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f_s = FeatureMap::new(spatial, random_mat(&mut rng, tokens, dim))?;
    let f_i = FeatureMap::new(spatial, random_mat(&mut rng, tokens, dim))?;
    let refined = attention::srgm_refine(&f_s);
    let gate = attention::srgm_gate(&refined, &params.gate)?;
    let x = attention::add_positional_embedding(&f_i, &params.positional)?;
    let out = attention::sgab_stack(&x, &gate.gate, &params.blocks)?;
    let gate_in_range = gate.gate.data().as_slice().iter().all(|&g| g > 0.0 && g < 1.0);
    let shapes_ok = out.spatial() == spatial && out.data().shape() == (tokens, dim);

    let passed = shapes_ok && gate_in_range && checks.iter().all(|c| c["passed"] == true);
    Ok(json!({
        "seed": seed,
        "tolerance": tolerance,
        "grad_checks": checks,
        "forward": {
            "blocks": params.blocks.len(),
            "output_shape": [out.data().rows(), out.data().cols()],
            "shapes_preserved": shapes_ok,
            "gate_in_open_unit_interval": gate_in_range,
        },
        "passed": passed,
    }))
}

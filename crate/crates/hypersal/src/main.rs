use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use hypersal::config::PipelineConfig;
use hypersal::io::{self, png, pnm};
use hypersal::pipeline::{self, Layers, RunInputs};
use hypersal::service::{self, AppState};
use hypersal::{Error, Result};
use hypersal_core::loss::{total_loss, LossInputs};
use hypersal_core::metrics::{binary_ground_truth, evaluate};
use hypersal_core::pseudo_label::{EdgeInput, EdgeInputs};
use hypersal_core::EdgeMap;
use rayon::prelude::*;
use serde_json::json;

#[derive(Parser)]
#[command(name = "hypersal", version, about = "Point-supervised hyperspectral salient object detection toolkit")]
struct Cli {
    /// Flat `key = value` config file; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(flatten)]
    tunables: Tunables,

    #[command(subcommand)]
    command: Command,
}

/// Overrides for [`PipelineConfig`] fields.
#[derive(Args, Default)]
struct Tunables {
    /// Gaussian pyramid depth.
    #[arg(long, global = true)]
    levels: Option<usize>,
    /// Working-resolution factor for pseudo-labeling.
    #[arg(long, global = true)]
    scale: Option<f64>,
    /// Edge binarization threshold.
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// False-color band triple `r,g,b`, or `auto`.
    #[arg(long, global = true)]
    bands: Option<String>,
    #[arg(long, global = true)]
    sigma_i: Option<f64>,
    #[arg(long, global = true)]
    sigma_p: Option<f64>,
    #[arg(long, global = true)]
    sigma_i_spec: Option<f64>,
    #[arg(long, global = true)]
    sigma_p_spec: Option<f64>,
    /// CRF loss neighborhood side.
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    weight_falsecolor: Option<f64>,
    #[arg(long, global = true)]
    weight_spectral: Option<f64>,
    #[arg(long, global = true)]
    crf_iterations: Option<usize>,
    #[arg(long, global = true)]
    crf_w_spatial: Option<f64>,
    #[arg(long, global = true)]
    crf_w_bilateral: Option<f64>,
    #[arg(long, global = true)]
    crf_theta_gamma: Option<f64>,
    #[arg(long, global = true)]
    crf_theta_alpha: Option<f64>,
    #[arg(long, global = true)]
    crf_theta_beta: Option<f64>,
    /// CRF window half-size; 0 means exact dense inference.
    #[arg(long, global = true)]
    crf_radius: Option<usize>,
    /// Threshold applied to each CRF marginal before intersecting.
    #[arg(long, global = true)]
    refine_tau: Option<f64>,
}

impl Tunables {
    fn apply(&self, c: &mut PipelineConfig) -> Result<()> {
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    c.$field = v;
                }
            )*};
        }
        take!(
            levels,
            scale,
            tau,
            sigma_i,
            sigma_p,
            sigma_i_spec,
            sigma_p_spec,
            k,
            weight_falsecolor,
            weight_spectral,
            crf_iterations,
            crf_w_spatial,
            crf_w_bilateral,
            crf_theta_gamma,
            crf_theta_alpha,
            crf_theta_beta,
            crf_radius,
            refine_tau
        );
        if let Some(b) = &self.bands {
            c.set("bands", b)?;
        }
        Ok(())
    }
}

/// Where guidance layers come from: a cube, or precomputed files.
#[derive(Args)]
struct GuidanceArgs {
    /// ENVI header of the scene cube.
    #[arg(long, value_name = "HDR")]
    input: Option<PathBuf>,
    /// False-color image: P6, P5, a cube header, or `r.pgm,g.pgm,b.pgm`.
    #[arg(long, value_name = "IMAGE")]
    falsecolor: Option<String>,
    /// Precomputed spectral saliency map (P5).
    #[arg(long, value_name = "PGM")]
    specsal: Option<PathBuf>,
}

impl GuidanceArgs {
    fn load(&self, config: &PipelineConfig) -> Result<Layers> {
        let cube = self.input.as_deref().map(io::read_cube).transpose()?;
        let falsecolor = match (&self.falsecolor, &cube) {
            (Some(spec), _) => io::read_rgb(spec)?,
            (None, Some(cube)) => pipeline::render_falsecolor(cube, config)?,
            (None, None) => return Err(Error::Config("pass --input or --falsecolor".into())),
        };
        let specsal = match (&self.specsal, &cube) {
            (Some(path), _) => io::read_map_pgm(path)?,
            (None, Some(cube)) => pipeline::render_specsal(cube, config)?,
            (None, None) => return Err(Error::Config("pass --input or --specsal".into())),
        };
        Ok(Layers { falsecolor, specsal })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Spectral saliency map of a cube.
    Saliency {
        #[arg(long, value_name = "HDR")]
        input: PathBuf,
        #[arg(long, value_name = "PGM")]
        out: PathBuf,
    },
    /// False-color rendering of a cube (`.png` for 8-bit PNG, else 16-bit P6).
    Falsecolor {
        #[arg(long, value_name = "HDR")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pseudo-label from point annotations; prints counts and the leak flag.
    Pseudolabel {
        #[command(flatten)]
        guidance: GuidanceArgs,
        #[arg(long, value_name = "JSON")]
        points: PathBuf,
        #[arg(long, value_name = "PGM")]
        out: PathBuf,
        /// False-color edge map (P5) replacing Sobel extraction, or `none`.
        #[arg(long, value_name = "PGM")]
        edges_i: Option<String>,
        /// Spectral edge map (P5) replacing Sobel extraction, or `none`.
        #[arg(long, value_name = "PGM")]
        edges_s: Option<String>,
    },
    /// Dense-CRF refinement of a prediction, intersected across both guidances.
    Refine {
        #[command(flatten)]
        guidance: GuidanceArgs,
        #[arg(long, value_name = "PGM")]
        pred: PathBuf,
        #[arg(long, value_name = "PGM")]
        out: PathBuf,
    },
    /// Training objective terms for a prediction, as JSON.
    Loss {
        #[command(flatten)]
        guidance: GuidanceArgs,
        #[arg(long, value_name = "PGM")]
        pred: PathBuf,
        /// Pseudo-label mask (P5, 0 / 32768 / 65535).
        #[arg(long, value_name = "PGM")]
        label: PathBuf,
        #[arg(long, value_name = "PGM", requires = "edge_gt")]
        edge_pred: Option<PathBuf>,
        #[arg(long, value_name = "PGM", requires = "edge_pred")]
        edge_gt: Option<PathBuf>,
        #[arg(long, value_name = "PGM")]
        gate_ref: Option<PathBuf>,
    },
    /// Saliency metrics of a prediction against binary ground truth.
    Eval {
        #[arg(long, value_name = "PGM")]
        pred: PathBuf,
        #[arg(long, value_name = "PGM")]
        gt: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Gradient and shape checks of the toy attention modules.
    Toycheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Full pipeline: saliency, pseudo-label, refinement and metrics.
    Run {
        #[arg(long, value_name = "HDR", required_unless_present = "glob", conflicts_with = "glob")]
        input: Option<PathBuf>,
        #[arg(long, value_name = "JSON", required_unless_present = "glob", conflicts_with = "glob")]
        points: Option<PathBuf>,
        #[arg(long, value_name = "PGM", conflicts_with = "glob")]
        gt: Option<PathBuf>,
        /// Prediction to refine instead of the pseudo-label stand-in.
        #[arg(long, value_name = "PGM", conflicts_with = "glob")]
        pred: Option<PathBuf>,
        /// Batch mode: every matching `.hdr`, with `<stem>.points.json` and an
        /// optional `<stem>.gt.pgm` next to it; outputs go to `<out>/<stem>/`.
        #[arg(long, value_name = "PATTERN")]
        glob: Option<String>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Annotation HTTP service.
    Serve {
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Static UI assets served for non-API paths.
        #[arg(long, value_name = "DIR")]
        ui: Option<PathBuf>,
    },
}

fn edge_input(arg: &Option<String>, holder: &mut Option<EdgeMap>) -> Result<bool> {
    match arg.as_deref() {
        None => Ok(false),
        Some("none") => Ok(true),
        Some(path) => {
            *holder = Some(io::read_edge_map(Path::new(path))?);
            Ok(false)
        }
    }
}

fn resolve(omit: bool, map: &Option<EdgeMap>) -> EdgeInput<'_> {
    match (omit, map) {
        (true, _) => EdgeInput::Omit,
        (_, Some(m)) => EdgeInput::Supplied(m),
        _ => EdgeInput::Extract,
    }
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json"));
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("HYPERSAL_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("HYPERSAL_THREADS must be a positive integer, found `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn run_batch(pattern: &str, out: &Path, config: &PipelineConfig) -> Result<i32> {
    let headers: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| Error::Config(format!("invalid glob `{pattern}`: {e}")))?
        .filter_map(|p| p.ok())
        .filter(|p| p.extension().is_some_and(|e| e == "hdr"))
        .collect();
    let results: Vec<_> = headers
        .par_iter()
        .map(|hdr| {
            let stem = hdr.file_stem().and_then(|s| s.to_str()).unwrap_or("scene").to_string();
            let sibling = |suffix: &str| hdr.with_file_name(format!("{stem}{suffix}"));
            let gt = Some(sibling(".gt.pgm")).filter(|p| p.is_file());
            let inputs = RunInputs {
                cube: hdr.clone(),
                points: sibling(".points.json"),
                gt,
                pred: None,
            };
            (stem.clone(), pipeline::run_scene(&inputs, config, &out.join(&stem)))
        })
        .collect();
    let mut code = 0;
    let mut summary = Vec::new();
    for (stem, result) in results {
        match result {
            Ok(s) => summary.push(json!({ "scene": stem, "leak": s.leak, "metrics": s.metrics })),
            Err(e) => {
                code = code.max(e.exit_code());
                summary.push(json!({ "scene": stem, "error": e.to_json()["error"] }));
            }
        }
    }
    print_json(&json!(summary));
    Ok(code)
}

fn execute(cli: Cli) -> Result<i32> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cli.tunables.apply(&mut config)?;
    config.validate()?;

    match cli.command {
        Command::Saliency { input, out } => {
            let cube = io::read_cube(&input)?;
            io::write_map_pgm(&pipeline::render_specsal(&cube, &config)?, &out)?;
        }
        Command::Falsecolor { input, out } => {
            let cube = io::read_cube(&input)?;
            let rgb = pipeline::render_falsecolor(&cube, &config)?;
            let bytes = if out.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
                png::rgb_png(&rgb)
            } else {
                pnm::rgb_to_ppm(&rgb)?
            };
            write_file(&out, &bytes)?;
        }
        Command::Pseudolabel {
            guidance,
            points,
            out,
            edges_i,
            edges_s,
        } => {
            let points = io::read_points(&points)?;
            let (mut fc_map, mut ss_map) = (None, None);
            let omit_fc = edge_input(&edges_i, &mut fc_map)?;
            let omit_ss = edge_input(&edges_s, &mut ss_map)?;
            let layers = guidance.load(&config)?;
            let inputs = EdgeInputs {
                falsecolor: resolve(omit_fc, &fc_map),
                spectral: resolve(omit_ss, &ss_map),
            };
            let label = layers.pseudo_label(&points, &config, inputs)?;
            io::write_mask_pgm(&label.mask, &out)?;
            let (fg, bg, unknown) = label.counts();
            print_json(&json!({
                "counts": { "foreground": fg, "background": bg, "unknown": unknown },
                "leak": label.leak,
                "scale": config.scale,
                "tau": config.tau,
            }));
        }
        Command::Refine { guidance, pred, out } => {
            let pred = io::read_map_pgm(&pred)?;
            let layers = guidance.load(&config)?;
            io::pnm::write_binary_pgm(&layers.refine(&pred, &config)?, &out)?;
        }
        Command::Loss {
            guidance,
            pred,
            label,
            edge_pred,
            edge_gt,
            gate_ref,
        } => {
            let pred = io::read_map_pgm(&pred)?;
            let label = io::read_mask_pgm(&label)?;
            let layers = guidance.load(&config)?;
            let edges = match (edge_pred, edge_gt) {
                (Some(p), Some(g)) => Some((io::read_map_pgm(&p)?, io::read_edge_map(&g)?)),
                _ => None,
            };
            let gate_ref = gate_ref.as_deref().map(io::read_map_pgm).transpose()?;
            let inputs = LossInputs {
                pred: &pred,
                falsecolor: &layers.falsecolor,
                specsal: &layers.specsal,
                label: &label,
                edges: edges.as_ref().map(|(p, g)| (p, g)),
                gate_ref: gate_ref.as_ref(),
            };
            let b = total_loss(&inputs, &config.loss_params())?;
            print_json(&json!({
                "hybrid_crf": b.hybrid_crf,
                "partial_bce": b.partial_bce,
                "edge_bce": b.edge_bce,
                "gate_bce": b.gate_bce,
                "bce": b.bce,
                "total": b.total,
            }));
        }
        Command::Eval { pred, gt, json } => {
            let pred = io::read_map_pgm(&pred)?;
            let gt = binary_ground_truth(&io::read_map_pgm(&gt)?)?;
            let r = evaluate(&pred, &gt)?;
            if json {
                print_json(&pipeline::metrics_json(&r));
            } else {
                println!("MAE      {:.6}", r.mae);
                println!("F_beta   {:.6}", r.f_beta);
                println!("maxF     {:.6}", r.max_f_beta);
                println!("E        {:.6}", r.e_measure);
                println!("AUC      {:.6}", r.auc);
                println!("CC       {:.6}", r.cc);
            }
        }
        Command::Toycheck { seed, tolerance } => {
            let report = pipeline::toy_check(seed, tolerance)?;
            print_json(&report);
            if report["passed"] != true {
                return Ok(1);
            }
        }
        Command::Run {
            input,
            points,
            gt,
            pred,
            glob,
            out,
        } => {
            if let Some(pattern) = glob {
                return run_batch(&pattern, &out, &config);
            }
            let inputs = RunInputs {
                cube: input.expect("required by clap"),
                points: points.expect("required by clap"),
                gt,
                pred,
            };
            let s = pipeline::run_scene(&inputs, &config, &out)?;
            let (fg, bg, unknown) = s.counts;
            print_json(&json!({
                "counts": { "foreground": fg, "background": bg, "unknown": unknown },
                "leak": s.leak,
                "metrics": s.metrics,
            }));
        }
        Command::Serve { data, port, host, ui } => {
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env()
                        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
                )
                .with_writer(std::io::stderr)
                .init();
            let state = Arc::new(AppState::new(data, config));
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::Io {
                path: PathBuf::from("<runtime>"),
                source: e,
            })?;
            runtime
                .block_on(service::serve(SocketAddr::new(host, port), state, ui.as_deref()))
                .map_err(|e| Error::Io {
                    path: PathBuf::from(format!("{host}:{port}")),
                    source: e,
                })?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| execute(cli));
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

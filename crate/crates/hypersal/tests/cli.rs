use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hypersal::fixture;
use tempfile::tempdir;

const ARTIFACTS: [&str; 4] = ["sal.pgm", "label.pgm", "refined.pgm", "metrics.json"];

fn hypersal(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hypersal"));
    cmd.args(args).env_remove("HYPERSAL_THREADS");
    if let Some(t) = threads {
        cmd.env("HYPERSAL_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

fn run_args<'a>(dir: &'a str, out: &'a str) -> Vec<String> {
    vec![
        "run".into(),
        "--input".into(),
        format!("{dir}/square.hdr"),
        "--points".into(),
        format!("{dir}/square.points.json"),
        "--gt".into(),
        format!("{dir}/square.gt.pgm"),
        "--out".into(),
        out.into(),
    ]
}

fn run(dir: &Path, out: &Path, threads: Option<&str>) -> Output {
    let args = run_args(dir.to_str().unwrap(), out.to_str().unwrap());
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    hypersal(&args, threads)
}

#[test]
fn run_writes_all_artifacts() {
    let dir = tempdir().unwrap();
    fixture::square_scene().write(dir.path(), "square").unwrap();
    let out = dir.path().join("out");
    let o = run(dir.path(), &out, None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for a in ARTIFACTS {
        assert!(out.join(a).is_file(), "{a} missing");
    }
    let metrics: serde_json::Value = serde_json::from_slice(&fs::read(out.join("metrics.json")).unwrap()).unwrap();
    for section in ["prediction", "refined"] {
        for key in ["mae", "f_beta", "max_f_beta", "e_measure", "auc", "cc"] {
            assert!(metrics[section][key].is_f64(), "{section}.{key}");
        }
    }
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempdir().unwrap();
    fixture::square_scene().write(dir.path(), "square").unwrap();
    let outs: Vec<_> = [None, Some("1"), Some("8"), None]
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let out = dir.path().join(format!("out{i}"));
            assert!(run(dir.path(), &out, *t).status.success());
            out
        })
        .collect();
    for a in ARTIFACTS {
        let first = fs::read(outs[0].join(a)).unwrap();
        for o in &outs[1..] {
            assert_eq!(fs::read(o.join(a)).unwrap(), first, "{a} differs in {}", o.display());
        }
    }
}

#[test]
fn missing_points_file_is_an_input_error() {
    let dir = tempdir().unwrap();
    fixture::square_scene().write(dir.path(), "square").unwrap();
    fs::remove_file(dir.path().join("square.points.json")).unwrap();
    let o = run(dir.path(), &dir.path().join("out"), None);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"]["kind"], "input-missing");
}

#[test]
fn bad_thread_count_and_config_are_input_errors() {
    let o = hypersal(&["toycheck"], Some("zero"));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"]["kind"], "config");

    let dir = tempdir().unwrap();
    let cfg = dir.path().join("c.txt");
    fs::write(&cfg, "tau = 0.5\nwhat = 1\n").unwrap();
    let o = hypersal(&["--config", cfg.to_str().unwrap(), "toycheck"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempdir().unwrap();
    fixture::square_scene().write(dir.path(), "square").unwrap();
    let cfg = dir.path().join("c.txt");
    fs::write(&cfg, "tau = 0.3\nscale = 1\n").unwrap();
    let d = dir.path().to_str().unwrap();
    let args = [
        "pseudolabel",
        "--config",
        cfg.to_str().unwrap(),
        "--tau",
        "0.7",
        "--input",
        &format!("{d}/square.hdr"),
        "--points",
        &format!("{d}/square.points.json"),
        "--out",
        &format!("{d}/label.pgm"),
    ];
    let o = hypersal(&args, None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!((v["tau"].as_f64(), v["scale"].as_f64()), (Some(0.7), Some(1.0)));
}

#[test]
fn pseudolabel_edge_ablation_from_the_command_line() {
    let dir = tempdir().unwrap();
    fixture::overexposed_scene().write(dir.path(), "over").unwrap();
    let d = dir.path().to_str().unwrap();
    let base = [
        "pseudolabel".to_string(),
        "--input".into(),
        format!("{d}/over.hdr"),
        "--points".into(),
        format!("{d}/over.points.json"),
        "--out".into(),
        format!("{d}/label.pgm"),
    ];
    let leak = |extra: &[&str]| {
        let mut args: Vec<&str> = base.iter().map(String::as_str).collect();
        args.extend_from_slice(extra);
        let o = hypersal(&args, None);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        serde_json::from_slice::<serde_json::Value>(&o.stdout).unwrap()["leak"].as_bool().unwrap()
    };
    assert!(!leak(&[]));
    assert!(leak(&["--edges-s", "none"]));
}

#[test]
fn saliency_eval_refine_and_loss_subcommands() {
    let dir = tempdir().unwrap();
    fixture::square_scene().write(dir.path(), "square").unwrap();
    let d = dir.path().to_str().unwrap();
    let hdr = format!("{d}/square.hdr");
    let sal = format!("{d}/sal.pgm");
    let gt = format!("{d}/square.gt.pgm");
    assert!(hypersal(&["saliency", "--input", &hdr, "--out", &sal], None).status.success());
    let o = hypersal(&["eval", "--pred", &sal, "--gt", &gt, "--json"], None);
    let m: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((0.0..=1.0).contains(&m["auc"].as_f64().unwrap()));

    let refined = format!("{d}/refined.pgm");
    let o = hypersal(&["refine", "--input", &hdr, "--pred", &gt, "--out", &refined], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let label = format!("{d}/label.pgm");
    let points = format!("{d}/square.points.json");
    assert!(hypersal(&["pseudolabel", "--input", &hdr, "--points", &points, "--out", &label], None)
        .status
        .success());
    let o = hypersal(&["loss", "--input", &hdr, "--pred", &gt, "--label", &label], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let l: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let sum = l["hybrid_crf"].as_f64().unwrap() + l["partial_bce"].as_f64().unwrap() + l["bce"].as_f64().unwrap();
    assert!((l["total"].as_f64().unwrap() - sum).abs() < 1e-12);

    let fc = format!("{d}/fc.ppm");
    assert!(hypersal(&["falsecolor", "--input", &hdr, "--out", &fc], None).status.success());
    let o = hypersal(&["refine", "--falsecolor", &fc, "--specsal", &sal, "--pred", &gt, "--out", &refined], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn toycheck_passes() {
    let o = hypersal(&["toycheck", "--seed", "3"], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["grad_checks"].as_array().unwrap().len(), 6);
}

#[test]
fn batch_mode_matches_single_runs() {
    let dir = tempdir().unwrap();
    fixture::square_scene().write(dir.path(), "square").unwrap();
    fixture::overexposed_scene().write(dir.path(), "over").unwrap();
    let batch = dir.path().join("batch");
    let pattern = format!("{}/*.hdr", dir.path().display());
    let o = hypersal(&["run", "--glob", &pattern, "--out", batch.to_str().unwrap()], Some("4"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let single = dir.path().join("single");
    assert!(run(dir.path(), &single, None).status.success());
    for a in ARTIFACTS {
        assert_eq!(fs::read(batch.join("square").join(a)).unwrap(), fs::read(single.join(a)).unwrap());
    }
    assert!(batch.join("over").join("label.pgm").is_file());
}

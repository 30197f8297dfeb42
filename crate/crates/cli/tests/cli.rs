use std::fs;
use std::path::Path;
use std::process::Command;

use quadflow::config::neurons;
use quadflow::{CliError, ExperimentConfig, ExperimentKind, Overrides};

fn quadflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quadflow"))
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn experiment_names_round_trip() {
    for k in ExperimentKind::ALL {
        assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
    }
    let err = "fig-nonexistent".parse::<ExperimentKind>().unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn config_parses_and_overrides_apply() {
    let mut cfg = ExperimentConfig::from_json(
        r#"{"experiment": "fig-density", "d": [400], "alpha": 0.3, "alpha_star": 0.5, "seed": 3, "bins": 20}"#,
    )
    .unwrap();
    assert_eq!(cfg.kind().unwrap(), ExperimentKind::FigDensity);
    assert_eq!(cfg.seeds, 5);
    cfg.apply(&Overrides { seed: Some(9), d: vec![100, 200], eta: Some(0.005), ..Overrides::default() }).unwrap();
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.d, vec![100, 200]);
    assert_eq!(cfg.eta, 0.005);
    assert_eq!(cfg.bins, 20);
    assert_eq!(cfg.seed_list(), vec![9, 10, 11, 12, 13]);
    cfg.validate().unwrap();
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(ExperimentConfig::from_json(r#"{"experiment": "fig-density", "colour": 1}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"experiment": "fig-plots"}"#).is_err());
    let base = ExperimentConfig { experiment: Some(ExperimentKind::FigPhiOrtho), ..ExperimentConfig::default() };
    base.validate().unwrap();
    for bad in [
        ExperimentConfig { eta: -1.0, ..base.clone() },
        ExperimentConfig { alpha: Some(0.5), ..base.clone() },
        ExperimentConfig { alpha: Some(1.5), alpha_star: Some(0.5), ..base.clone() },
        ExperimentConfig { d: vec![0], ..base.clone() },
        ExperimentConfig { seeds: 0, ..base.clone() },
        ExperimentConfig { horizon: Some(0.0), ..base.clone() },
        ExperimentConfig { experiment: None, ..base.clone() },
        ExperimentConfig { m: Some(5), m_star: Some(3), d: vec![4], ..base.clone() },
    ] {
        let err = bad.validate().unwrap_err();
        assert!(matches!(err, CliError::Config(_)), "{bad:?}");
        assert_eq!(err.exit_code(), 1);
    }
}

#[test]
fn neuron_counts_round_and_clamp() {
    assert_eq!(neurons(0.3, 2000), 600);
    assert_eq!(neurons(0.25, 100), 25);
    assert_eq!(neurons(0.001, 10), 1);
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let numerical = CliError::from(quadflow_core::Error::Divergence { step: 3, loss: 1e9, initial: 1.0 });
    assert_eq!(numerical.exit_code(), 2);
    let shape = CliError::from(quadflow_core::Error::InvalidParameter("x".into()));
    assert_eq!(shape.exit_code(), 1);
    assert_eq!(CliError::Acceptance("criterion 4".into()).exit_code(), 2);
}

#[test]
fn list_prints_the_catalog() {
    let out = quadflow().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for k in ExperimentKind::ALL {
        assert!(text.contains(k.name()));
    }
}

#[test]
fn run_writes_csv_svg_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("overlap");
    let status = quadflow()
        .args(["run", "--experiment", "fig-overlap-rates", "--horizon", "1", "--seed", "4", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let manifest = read_json(&out.join("manifest.json"));
    for key in ["experiment", "seed", "params", "started_at", "duration_s", "versions", "files"] {
        assert!(manifest.get(key).is_some(), "manifest lacks {key}");
    }
    assert_eq!(manifest["experiment"], "fig-overlap-rates");
    assert_eq!(manifest["seed"], 4);
    for f in manifest["files"].as_array().unwrap() {
        assert!(out.join(f.as_str().unwrap()).is_file());
    }
    assert!(out.join("overlap_a0.50_as0.25.csv").is_file());
    assert!(out.join("overlap_a0.50_as0.25.svg").is_file());
}

#[test]
fn config_file_runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("density.json");
    fs::write(&config, r#"{"experiment": "fig-density", "d": [200], "alpha": 0.3, "alpha_star": 0.5, "seeds": 2}"#)
        .unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = quadflow().arg("run").arg("--config").arg(&config).arg("--out").arg(&out).status().unwrap();
        assert!(status.success());
        outputs.push(out);
    }
    for name in ["density_d200_histogram.csv", "density_d200_curve.csv", "density_d200_curve.json"] {
        assert_eq!(fs::read(outputs[0].join(name)).unwrap(), fs::read(outputs[1].join(name)).unwrap(), "{name}");
    }
    let header = read_json(&outputs[0].join("density_d200_curve.json"));
    assert!(header["r_plus"].as_f64().unwrap() > header["r_minus"].as_f64().unwrap());
}

#[test]
fn unknown_experiment_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let status = quadflow().args(["run", "--experiment", "fig-everything", "--out"]).arg(dir.path()).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let status = quadflow()
        .args(["run", "--experiment", "fig-overlap-rates", "--horizon", "0.1", "--out"])
        .arg(blocker.join("sub"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn divergent_step_size_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let status = quadflow()
        .args(["run", "--experiment", "fig-phi-gauss", "--d", "10", "--alpha", "0.5", "--alpha-star", "0.5"])
        .args(["--eta", "5", "--horizon", "20", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

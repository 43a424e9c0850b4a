use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use brainmask::autodiff::Checkpoint;
use brainmask::backbone::BackboneParams;
use brainmask::explainer::{mask_to_text, EdgeMask};
use brainmask::graph::{load_dataset, PlantedTruth};
use serde_json::Value;

const CONFIG: &str = "[train]\nepochs = 3\nhidden = 8\n[explain]\nepochs = 3\n[synth]\nn = 16\nper_class = 6\nplanted_edges = 4\n";

fn brainmask(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brainmask"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = brainmask(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: String,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let config = root.join("run.toml");
        std::fs::write(&config, CONFIG).unwrap();
        Self {
            config: config.to_string_lossy().into_owned(),
            root,
            _dir: dir,
        }
    }

    fn path(&self, rel: &str) -> String {
        self.root.join(rel).to_string_lossy().into_owned()
    }

    /// Writes a synthetic cohort under `synth/` and returns the dataset path.
    fn synth(&self, seed: &str) -> String {
        ok(&[
            "synth",
            "--config",
            &self.config,
            "--seed",
            seed,
            "--out",
            &self.path("synth"),
        ]);
        self.path("synth/dataset.json")
    }
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(brainmask(&["--help"]).status.code(), Some(0));
    assert_eq!(brainmask(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(brainmask(&[]).status.code(), Some(1));
}

#[test]
fn missing_dataset_names_the_path() {
    let ws = Workspace::new();
    let missing = ws.path("nowhere/cohort.json");
    let out = brainmask(&[
        "train",
        "--config",
        &ws.config,
        "--dataset",
        &missing,
        "--out",
        &ws.path("o"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&missing));
}

#[test]
fn unknown_config_key_is_rejected() {
    let ws = Workspace::new();
    let bad = ws.path("bad.toml");
    std::fs::write(&bad, "[train]\nepoch = 3\n").unwrap();
    let out = brainmask(&["synth", "--config", &bad, "--out", &ws.path("o")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epoch"));
}

#[test]
fn synth_echoes_the_request_and_depends_on_seed() {
    let ws = Workspace::new();
    let a = ws.synth("1");
    let first = std::fs::read(&a).unwrap();
    let truth: PlantedTruth =
        serde_json::from_value(json(Path::new(&ws.path("synth/planted.json")))).unwrap();
    assert_eq!(truth.n, 16);
    assert_eq!(truth.pairs.len(), 4);
    let d = load_dataset(Path::new(&a)).unwrap();
    assert_eq!(d.len(), 12);
    assert_eq!(d.n_nodes(), 16);

    ws.synth("2");
    assert_ne!(std::fs::read(&a).unwrap(), first);
    let report = json(Path::new(&ws.path("synth/synth_report.json")));
    assert_eq!(report["schema_version"], 1);
}

#[test]
fn checkpoint_reloads_to_identical_parameters() {
    let ws = Workspace::new();
    let dataset = ws.synth("3");
    ok(&[
        "train",
        "--config",
        &ws.config,
        "--dataset",
        &dataset,
        "--out",
        &ws.path("train"),
    ]);
    let path = ws.path("train/checkpoint.json");
    let params =
        BackboneParams::from_checkpoint(&Checkpoint::load(Path::new(&path)).unwrap()).unwrap();
    let again = ws.path("again.json");
    params.to_checkpoint().save(Path::new(&again)).unwrap();
    let reloaded =
        BackboneParams::from_checkpoint(&Checkpoint::load(Path::new(&again)).unwrap()).unwrap();
    assert_eq!(reloaded, params);
    assert_eq!(
        std::fs::read(&again).unwrap(),
        std::fs::read(&path).unwrap()
    );
}

#[test]
fn explain_without_epochs_writes_the_initial_mask() {
    let ws = Workspace::new();
    let dataset = ws.synth("4");
    ok(&[
        "train",
        "--config",
        &ws.config,
        "--seed",
        "4",
        "--dataset",
        &dataset,
        "--out",
        &ws.path("train"),
    ]);
    ok(&[
        "explain",
        "--config",
        &ws.config,
        "--seed",
        "4",
        "--dataset",
        &dataset,
        "--checkpoint",
        &ws.path("train/checkpoint.json"),
        "--epochs",
        "0",
        "--out",
        &ws.path("explain"),
    ]);
    let init = EdgeMask::init(16, 1.0, 0.1, 4).unwrap();
    assert_eq!(
        std::fs::read_to_string(ws.path("explain/mask.csv")).unwrap(),
        mask_to_text(&init.sigma_matrix())
    );
    let report = json(Path::new(&ws.path("explain/explain_report.json")));
    assert_eq!(report["log"]["best_epoch"], 0);
}

fn uniform_mask(ws: &Workspace, n: usize) -> String {
    let path = ws.path("mask.csv");
    std::fs::write(
        &path,
        mask_to_text(&EdgeMask::constant(n, 0.3).sigma_matrix()),
    )
    .unwrap();
    path
}

#[test]
fn analyze_with_top_one_keeps_one_edge() {
    let ws = Workspace::new();
    let dataset = ws.synth("5");
    let mask = uniform_mask(&ws, 16);
    ok(&[
        "analyze",
        "--config",
        &ws.config,
        "--dataset",
        &dataset,
        "--mask",
        &mask,
        "--top-k",
        "1",
        "--out",
        &ws.path("an"),
    ]);
    let report = json(Path::new(&ws.path("an/analysis_report.json")));
    for entry in report["entries"].as_array().unwrap() {
        assert_eq!(entry["kept_edges"], 1);
    }
    let all = json(Path::new(&ws.path("an/connectome-all.json")));
    assert_eq!(all["edges"].as_array().unwrap().len(), 1);
}

#[test]
fn single_system_atlas_ranks_one_system() {
    let ws = Workspace::new();
    let dataset = ws.synth("6");
    let atlas = ws.path("one.csv");
    let mut csv = String::from("index,abbreviation,system\n");
    for i in 0..16 {
        csv.push_str(&format!("{i},R{i},DMN\n"));
    }
    std::fs::write(&atlas, csv).unwrap();
    let mask = uniform_mask(&ws, 16);
    ok(&[
        "analyze",
        "--config",
        &ws.config,
        "--dataset",
        &dataset,
        "--mask",
        &mask,
        "--atlas",
        &atlas,
        "--threshold",
        "0.2",
        "--out",
        &ws.path("an"),
    ]);
    let report = json(Path::new(&ws.path("an/analysis_report.json")));
    let first = &report["entries"][0];
    assert_eq!(first["ranking"]["degree"].as_array().unwrap().len(), 1);
    assert_eq!(first["ranking"]["degree"][0]["system"], "DMN");
    // a single reference community makes homogeneity trivially 1
    assert_eq!(first["original"]["agreement"]["homogeneity"], 1.0);
}

#[test]
fn mask_of_the_wrong_size_is_rejected() {
    let ws = Workspace::new();
    let dataset = ws.synth("7");
    let mask = uniform_mask(&ws, 15);
    let out = brainmask(&[
        "analyze",
        "--config",
        &ws.config,
        "--dataset",
        &dataset,
        "--mask",
        &mask,
        "--out",
        &ws.path("an"),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn commands_leave_their_inputs_untouched() {
    let ws = Workspace::new();
    let dataset = ws.synth("8");
    let before = std::fs::read(&dataset).unwrap();
    let config_before = std::fs::read(&ws.config).unwrap();
    ok(&[
        "pipeline",
        "--config",
        &ws.config,
        "--dataset",
        &dataset,
        "--planted",
        &ws.path("synth/planted.json"),
        "--out",
        &ws.path("pipe"),
    ]);
    let mask = ws.path("pipe/mask.csv");
    let mask_before = std::fs::read(&mask).unwrap();
    ok(&[
        "analyze",
        "--config",
        &ws.config,
        "--dataset",
        &dataset,
        "--mask",
        &mask,
        "--out",
        &ws.path("an"),
    ]);
    assert_eq!(std::fs::read(&dataset).unwrap(), before);
    assert_eq!(std::fs::read(&ws.config).unwrap(), config_before);
    assert_eq!(std::fs::read(&mask).unwrap(), mask_before);
    let report = json(Path::new(&ws.path("pipe/pipeline_report.json")));
    assert!(report["recovery_auc"].is_number());
}

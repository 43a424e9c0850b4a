//! Reproducible runs behind the `brainmask` binary.
//!
//! Each command reads its inputs, writes JSON reports (with a
//! `schema_version` field) and data files into the output directory, and
//! returns the report. Identical inputs and seeds give byte-identical files.

mod config;

pub use config::{AnalysisConfig, AnalysisMode, RunConfig, SplitConfig, SynthConfig};

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    analyze_graph, AgreementScores, CommunityReport, ConnectomeExport, GraphAnalysis, SubgraphRule,
    SystemRanking,
};
use crate::autodiff::{Checkpoint, Tensor};
use crate::backbone::{evaluate, prepare_inputs, train_backbone, BackboneParams, TrainLog};
use crate::error::{Error, Result};
use crate::explainer::{
    load_mask, recovery_auc, save_mask, three_step_train, train_mask, MaskLog, StepMetrics,
};
use crate::features::FeatureScheme;
use crate::graph::{
    generate_synthetic_cohort, load_dataset, planted_within_systems, save_dataset, split_dataset,
    AtlasMap, CohortSpec, Dataset, PlantedTruth, Split,
};

/// Version of every JSON report written by the commands.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "brainmask",
    version,
    about = "Brain-network classification with a shared explanation mask"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for the split, training, and synthetic data.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the backbone on raw graphs.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Train one model per feature scheme and keep the best on validation.
        #[arg(long, value_delimiter = ',')]
        schemes: Vec<FeatureScheme>,
    },
    /// Learn the shared mask for a trained checkpoint.
    Explain {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        /// Planted-truth file; enables the recovery AUC.
        #[arg(long)]
        planted: Option<PathBuf>,
    },
    /// Train, explain, and retrain on masked graphs.
    Pipeline {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        planted: Option<PathBuf>,
    },
    /// Interpret a mask: subgraphs, system ranking, and communities.
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        atlas: Option<PathBuf>,
        #[arg(long, conflicts_with = "threshold")]
        top_k: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Analyze every subject instead of the per-label mean graphs.
        #[arg(long)]
        per_subject: bool,
    },
    /// Generate a synthetic cohort with planted discriminative edges.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long)]
        planted_edges: Option<usize>,
        #[arg(long)]
        effect: Option<f64>,
        #[arg(long)]
        noise_sd: Option<f64>,
    },
}

fn base_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    })
}

fn split_for(d: &Dataset, cfg: &RunConfig) -> Result<Split> {
    let [a, b, c] = cfg.split.ratios;
    split_dataset(d, (a, b, c), cfg.split.seed)
}

/// Explicit atlas file, else the dataset's attached atlas, else a known atlas name.
fn resolve_atlas(d: &Dataset, explicit: Option<&Path>) -> Result<AtlasMap> {
    let atlas = if let Some(path) = explicit {
        AtlasMap::load(path)?
    } else if let Some(a) = &d.atlas {
        a.clone()
    } else if d.atlas_name == "aal90" {
        AtlasMap::aal90()
    } else if let Some((n, k)) = parse_blocks_name(&d.atlas_name) {
        AtlasMap::blocks(n, k)?
    } else {
        return Err(Error::invalid(format!(
            "no atlas for {:?}: pass --atlas or set `atlas` in the config",
            d.atlas_name
        )));
    };
    if atlas.n() != d.n_nodes() {
        return Err(Error::NodeCount {
            context: format!("atlas {} against the dataset", atlas.name()),
            expected: d.n_nodes(),
            found: atlas.n(),
        });
    }
    Ok(atlas)
}

fn parse_blocks_name(name: &str) -> Option<(usize, usize)> {
    let (n, k) = name.strip_prefix("blocks")?.split_once('x')?;
    Some((n.parse().ok()?, k.parse().ok()?))
}

fn check_checkpoint(params: &BackboneParams, d: &Dataset) -> Result<()> {
    let s = &params.shape;
    let width = s.feature_scheme.width(d.n_nodes(), &s.feature_params);
    if width != s.feature_width || s.num_classes != d.num_classes {
        return Err(Error::NodeCount {
            context: format!(
                "checkpoint feature width ({} features, {} classes) against the dataset",
                s.feature_width, s.num_classes
            ),
            expected: width,
            found: s.feature_width,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl From<&Split> for SplitSizes {
    fn from(s: &Split) -> Self {
        Self {
            train: s.train.len(),
            val: s.val.len(),
            test: s.test.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeRun {
    pub scheme: FeatureScheme,
    pub checkpoint: String,
    pub test: StepMetrics,
    pub log: TrainLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub schema_version: u32,
    pub seed: u64,
    pub split: SplitSizes,
    /// Scheme whose model was written to `checkpoint.json`.
    pub selected: FeatureScheme,
    pub runs: Vec<SchemeRun>,
}

pub fn cmd_train(cfg: &RunConfig, schemes: &[FeatureScheme]) -> Result<TrainReport> {
    let d = load_dataset(cfg.dataset_path()?)?;
    let split = split_for(&d, cfg)?;
    prepare_out(&cfg.out)?;
    let sweep = !schemes.is_empty();
    let schemes = if sweep {
        schemes.to_vec()
    } else {
        vec![cfg.train.feature_scheme]
    };

    let mut runs = Vec::with_capacity(schemes.len());
    let mut best: Option<(f64, usize, BackboneParams)> = None;
    for (k, &scheme) in schemes.iter().enumerate() {
        let tc = crate::backbone::TrainConfig {
            feature_scheme: scheme,
            ..cfg.train.clone()
        };
        let (params, log) = train_backbone(&d, &split, &tc, None)?;
        let test = evaluate(
            &params,
            &prepare_inputs(
                split.test.iter().map(|&i| &d.graphs[i]),
                scheme,
                &tc.feature_params,
            )?,
        )?;
        let name = if sweep {
            format!("checkpoint-{}.json", scheme.tag())
        } else {
            "checkpoint.json".into()
        };
        params.to_checkpoint().save(&cfg.out.join(&name))?;
        log::info!(
            "{}: best validation accuracy {:.3} at epoch {}",
            scheme.tag(),
            log.best_val_accuracy,
            log.best_epoch
        );
        if best
            .as_ref()
            .is_none_or(|(acc, _, _)| log.best_val_accuracy > *acc)
        {
            best = Some((log.best_val_accuracy, k, params));
        }
        runs.push(SchemeRun {
            scheme,
            checkpoint: name,
            test: StepMetrics {
                accuracy: test.accuracy,
                auc: test.auc,
            },
            log,
        });
    }
    let (_, selected, params) = best.expect("at least one scheme");
    if sweep {
        params
            .to_checkpoint()
            .save(&cfg.out.join("checkpoint.json"))?;
    }
    let report = TrainReport {
        schema_version: REPORT_SCHEMA_VERSION,
        seed: cfg.train.seed,
        split: SplitSizes::from(&split),
        selected: schemes[selected],
        runs,
    };
    write_json(&cfg.out.join("train_report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainReport {
    pub schema_version: u32,
    pub seed: u64,
    pub mask_file: String,
    pub recovery_auc: Option<f64>,
    pub log: MaskLog,
}

pub fn cmd_explain(
    cfg: &RunConfig,
    checkpoint: &Path,
    planted: Option<&Path>,
) -> Result<ExplainReport> {
    let d = load_dataset(cfg.dataset_path()?)?;
    let params = BackboneParams::from_checkpoint(&Checkpoint::load(checkpoint)?)?;
    check_checkpoint(&params, &d)?;
    let truth = planted.map(read_json::<PlantedTruth>).transpose()?;
    let split = split_for(&d, cfg)?;
    prepare_out(&cfg.out)?;
    let (mask, log) = train_mask(&params, &d, &split, &cfg.explain)?;
    save_mask(&mask, &cfg.out.join("mask.csv"))?;
    let recovery_auc = truth.map(|t| recovery_auc(&mask, &t)).transpose()?;
    let report = ExplainReport {
        schema_version: REPORT_SCHEMA_VERSION,
        seed: cfg.explain.seed,
        mask_file: "mask.csv".into(),
        recovery_auc,
        log,
    };
    write_json(&cfg.out.join("explain_report.json"), &report)?;
    Ok(report)
}

/// The four numbers compared across steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    pub step1_accuracy: f64,
    pub step1_auc: Option<f64>,
    pub step3_accuracy: f64,
    pub step3_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub schema_version: u32,
    pub seed: u64,
    pub split: SplitSizes,
    pub headline: Headline,
    pub recovery_auc: Option<f64>,
    pub step1_log: TrainLog,
    pub mask_log: MaskLog,
    pub step3_log: TrainLog,
}

pub fn cmd_pipeline(cfg: &RunConfig, planted: Option<&Path>) -> Result<PipelineReport> {
    let d = load_dataset(cfg.dataset_path()?)?;
    let truth = planted.map(read_json::<PlantedTruth>).transpose()?;
    let split = split_for(&d, cfg)?;
    prepare_out(&cfg.out)?;
    let out = three_step_train(&d, &split, &cfg.train, &cfg.explain)?;
    out.step1
        .to_checkpoint()
        .save(&cfg.out.join("checkpoint-step1.json"))?;
    out.step3
        .to_checkpoint()
        .save(&cfg.out.join("checkpoint-step3.json"))?;
    save_mask(&out.mask, &cfg.out.join("mask.csv"))?;
    let r = out.report;
    let report = PipelineReport {
        schema_version: REPORT_SCHEMA_VERSION,
        seed: cfg.train.seed,
        split: SplitSizes::from(&split),
        headline: Headline {
            step1_accuracy: r.step1.accuracy,
            step1_auc: r.step1.auc,
            step3_accuracy: r.step3.accuracy,
            step3_auc: r.step3.auc,
        },
        recovery_auc: truth.map(|t| recovery_auc(&out.mask, &t)).transpose()?,
        step1_log: r.step1_log,
        mask_log: r.mask_log,
        step3_log: r.step3_log,
    };
    write_json(&cfg.out.join("pipeline_report.json"), &report)?;
    Ok(report)
}

/// Analysis of one group-mean graph or one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisEntry {
    /// Class label of the group or subject; `None` for the whole cohort.
    pub label: Option<usize>,
    pub subject: Option<String>,
    pub subjects: usize,
    /// Connectome export written for this entry, if any.
    pub connectome: Option<String>,
    pub kept_edges: usize,
    pub ranking: SystemRanking,
    pub masked: CommunityReport,
    pub original: CommunityReport,
    pub agreement_delta: AgreementScores,
}

impl AnalysisEntry {
    fn new(
        a: GraphAnalysis,
        label: Option<usize>,
        subject: Option<String>,
        subjects: usize,
        connectome: Option<String>,
    ) -> Self {
        Self {
            label,
            subject,
            subjects,
            connectome,
            kept_edges: a.connectome.edges.len(),
            ranking: a.ranking,
            masked: a.masked,
            original: a.original,
            agreement_delta: a.agreement_delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub atlas: String,
    pub rule: SubgraphRule,
    pub mode: AnalysisMode,
    pub entries: Vec<AnalysisEntry>,
}

/// Reads a σ(M) matrix file and checks it against `n` nodes.
pub fn read_mask_file(path: &Path, n: usize) -> Result<Tensor> {
    let sigma = load_mask(path)?;
    if sigma.rows() != n {
        return Err(Error::NodeCount {
            context: format!("mask {}", path.display()),
            expected: n,
            found: sigma.rows(),
        });
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (sigma.get(i, j), sigma.get(j, i));
            if (a - b).abs() > 1e-12 || !(0.0..=1.0).contains(&a) {
                return Err(Error::Parse {
                    context: format!("mask {}", path.display()),
                    message: format!(
                        "entry ({i}, {j}) is {a} / {b}; expected a symmetric matrix in [0, 1]"
                    ),
                });
            }
        }
    }
    Ok(sigma)
}

pub fn cmd_analyze(cfg: &RunConfig, mask_path: &Path) -> Result<AnalysisReport> {
    let d = load_dataset(cfg.dataset_path()?)?;
    let atlas = resolve_atlas(&d, cfg.atlas.as_deref())?;
    let sigma = read_mask_file(mask_path, d.n_nodes())?;
    let a = &cfg.analysis;
    prepare_out(&cfg.out)?;

    let mut entries = Vec::new();
    let export = |name: String, c: &ConnectomeExport| -> Result<Option<String>> {
        write_json(&cfg.out.join(&name), c)?;
        Ok(Some(name))
    };
    match a.mode {
        AnalysisMode::Group => {
            let mut groups: Vec<Option<usize>> = vec![None];
            groups.extend((0..d.num_classes).map(Some));
            for label in groups {
                let keep = |g: &crate::graph::BrainGraph| label.is_none_or(|c| g.label == c);
                let count = d.graphs.iter().filter(|g| keep(g)).count();
                let Some(mean) = d.mean_weights(keep) else {
                    continue;
                };
                let result = analyze_graph(&mean, &sigma, &atlas, a.rule, a.top_systems)?;
                let name = match label {
                    Some(c) => format!("connectome-label{c}.json"),
                    None => "connectome-all.json".into(),
                };
                let file = export(name, &result.connectome)?;
                entries.push(AnalysisEntry::new(result, label, None, count, file));
            }
        }
        AnalysisMode::PerSubject => {
            for g in &d.graphs {
                let result = analyze_graph(g.weights(), &sigma, &atlas, a.rule, a.top_systems)?;
                entries.push(AnalysisEntry::new(
                    result,
                    Some(g.label),
                    Some(g.subject_id.clone()),
                    1,
                    None,
                ));
            }
        }
    }
    let report = AnalysisReport {
        schema_version: REPORT_SCHEMA_VERSION,
        atlas: atlas.name().to_string(),
        rule: a.rule,
        mode: a.mode,
        entries,
    };
    write_json(&cfg.out.join("analysis_report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub schema_version: u32,
    pub spec: CohortSpec,
    pub subjects: usize,
    pub files: Vec<String>,
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<SynthReport> {
    let s = &cfg.synth;
    let atlas = AtlasMap::blocks(s.n, 8)?;
    let spec = CohortSpec {
        n: s.n,
        per_class: s.per_class,
        planted_edges: planted_within_systems(&atlas, s.planted_edges, s.seed)?,
        effect: s.effect,
        noise_sd: s.noise_sd,
        seed: s.seed,
    };
    let (d, truth) = generate_synthetic_cohort(&spec)?;
    prepare_out(&cfg.out)?;
    save_dataset(&d, &cfg.out.join("dataset.json"))?;
    write_json(&cfg.out.join("planted.json"), &truth)?;
    let atlas_path = cfg.out.join("atlas.csv");
    std::fs::write(&atlas_path, atlas.to_csv()).map_err(|e| Error::io(&atlas_path, e))?;
    let report = SynthReport {
        schema_version: REPORT_SCHEMA_VERSION,
        spec,
        subjects: d.len(),
        files: vec![
            "dataset.json".into(),
            "planted.json".into(),
            "atlas.csv".into(),
        ],
    };
    write_json(&cfg.out.join("synth_report.json"), &report)?;
    Ok(report)
}

/// Runs a parsed command line and returns a one-line summary.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Train {
            common,
            dataset,
            epochs,
            schemes,
        } => {
            let mut cfg = base_config(&common)?;
            cfg.dataset = dataset.or(cfg.dataset);
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            let r = cmd_train(&cfg, &schemes)?;
            let best = r
                .runs
                .iter()
                .find(|x| x.scheme == r.selected)
                .expect("selected scheme ran");
            Ok(format!(
                "trained {} scheme(s); selected {} with test accuracy {:.4}",
                r.runs.len(),
                r.selected.tag(),
                best.test.accuracy
            ))
        }
        Command::Explain {
            common,
            dataset,
            checkpoint,
            epochs,
            planted,
        } => {
            let mut cfg = base_config(&common)?;
            cfg.dataset = dataset.or(cfg.dataset);
            if let Some(e) = epochs {
                cfg.explain.epochs = e;
            }
            let r = cmd_explain(&cfg, &checkpoint, planted.as_deref())?;
            let mut line = format!(
                "mask from epoch {} written to {}",
                r.log.best_epoch,
                cfg.out.join(&r.mask_file).display()
            );
            if let Some(a) = r.recovery_auc {
                line.push_str(&format!("; recovery auc {a:.4}"));
            }
            Ok(line)
        }
        Command::Pipeline {
            common,
            dataset,
            planted,
        } => {
            let mut cfg = base_config(&common)?;
            cfg.dataset = dataset.or(cfg.dataset);
            let r = cmd_pipeline(&cfg, planted.as_deref())?;
            let h = r.headline;
            let fmt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.4}"));
            let mut line = format!(
                "step 1: accuracy {:.4}, auc {}; step 3: accuracy {:.4}, auc {}",
                h.step1_accuracy,
                fmt(h.step1_auc),
                h.step3_accuracy,
                fmt(h.step3_auc)
            );
            if let Some(a) = r.recovery_auc {
                line.push_str(&format!("; recovery auc {a:.4}"));
            }
            Ok(line)
        }
        Command::Analyze {
            common,
            mask,
            dataset,
            atlas,
            top_k,
            threshold,
            per_subject,
        } => {
            let mut cfg = base_config(&common)?;
            cfg.dataset = dataset.or(cfg.dataset);
            cfg.atlas = atlas.or(cfg.atlas);
            if let Some(k) = top_k {
                cfg.analysis.rule = SubgraphRule::TopK(k);
            }
            if let Some(t) = threshold {
                cfg.analysis.rule = SubgraphRule::Threshold(t);
            }
            if per_subject {
                cfg.analysis.mode = AnalysisMode::PerSubject;
            }
            let r = cmd_analyze(&cfg, &mask)?;
            let first = r
                .entries
                .first()
                .expect("a dataset has at least one subject");
            Ok(format!(
                "analyzed {} graph(s); completeness delta {:+.4} on the first",
                r.entries.len(),
                first.agreement_delta.completeness
            ))
        }
        Command::Synth {
            common,
            n,
            per_class,
            planted_edges,
            effect,
            noise_sd,
        } => {
            let mut cfg = base_config(&common)?;
            let s = &mut cfg.synth;
            s.n = n.unwrap_or(s.n);
            s.per_class = per_class.unwrap_or(s.per_class);
            s.planted_edges = planted_edges.unwrap_or(s.planted_edges);
            s.effect = effect.unwrap_or(s.effect);
            s.noise_sd = noise_sd.unwrap_or(s.noise_sd);
            let r = cmd_synth(&cfg)?;
            Ok(format!(
                "wrote {} subjects to {}",
                r.subjects,
                cfg.out.display()
            ))
        }
    }
}

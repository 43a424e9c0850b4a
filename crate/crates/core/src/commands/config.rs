use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::SubgraphRule;
use crate::backbone::TrainConfig;
use crate::error::{Error, Result};
use crate::explainer::ExplainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            ratios: [0.8, 0.1, 0.1],
            seed: 0,
        }
    }
}

/// Whether system ranking runs on the group-mean graph of each label or on every subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisMode {
    #[default]
    Group,
    PerSubject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub rule: SubgraphRule,
    pub top_systems: usize,
    pub mode: AnalysisMode,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            rule: SubgraphRule::default(),
            top_systems: 3,
            mode: AnalysisMode::Group,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub per_class: usize,
    pub planted_edges: usize,
    pub effect: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 20,
            per_class: 30,
            planted_edges: 8,
            effect: 1.0,
            noise_sd: 0.1,
            seed: 0,
        }
    }
}

/// Everything a run needs, read from TOML. Command-line flags override it.
///
/// ```toml
/// dataset = "data/cohort.json"
/// out = "runs/first"
///
/// [split]
/// ratios = [0.8, 0.1, 0.1]
///
/// [train]
/// epochs = 100
/// feature_scheme = "ldp"
///
/// [explain]
/// lambda_s = 0.005
///
/// [analysis]
/// rule = { top_k = 100 }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub atlas: Option<PathBuf>,
    pub out: PathBuf,
    pub split: SplitConfig,
    pub train: TrainConfig,
    pub explain: ExplainConfig,
    pub analysis: AnalysisConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            atlas: None,
            out: PathBuf::from("out"),
            split: SplitConfig::default(),
            train: TrainConfig::default(),
            explain: ExplainConfig::default(),
            analysis: AnalysisConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                context: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            context: "run config".into(),
            message: e.to_string(),
        })
    }

    /// One seed for the split, both trainings, and the synthetic cohort.
    pub fn set_seed(&mut self, seed: u64) {
        self.split.seed = seed;
        self.train.seed = seed;
        self.explain.seed = seed;
        self.synth.seed = seed;
    }

    pub fn dataset_path(&self) -> Result<&Path> {
        self.dataset.as_deref().ok_or_else(|| {
            Error::invalid("no dataset given: pass --dataset or set `dataset` in the config")
        })
    }
}

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The eight functional groupings ROIs are mapped to.
///
/// Declaration order is the canonical tag order used for tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NeuralSystem {
    /// Visual network
    VN,
    /// Auditory network
    AN,
    /// Bilateral limbic network
    BLN,
    /// Default mode network
    DMN,
    /// Somato-motor network
    SMN,
    /// Subcortical network
    SN,
    /// Memory network
    MN,
    /// Cognitive control network
    CCN,
}

impl NeuralSystem {
    pub const ALL: [NeuralSystem; 8] = [
        NeuralSystem::VN,
        NeuralSystem::AN,
        NeuralSystem::BLN,
        NeuralSystem::DMN,
        NeuralSystem::SMN,
        NeuralSystem::SN,
        NeuralSystem::MN,
        NeuralSystem::CCN,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            NeuralSystem::VN => "VN",
            NeuralSystem::AN => "AN",
            NeuralSystem::BLN => "BLN",
            NeuralSystem::DMN => "DMN",
            NeuralSystem::SMN => "SMN",
            NeuralSystem::SN => "SN",
            NeuralSystem::MN => "MN",
            NeuralSystem::CCN => "CCN",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for NeuralSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for NeuralSystem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NeuralSystem::ALL
            .into_iter()
            .find(|sys| sys.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownSystem(s.to_string()))
    }
}

/// One atlas row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub index: usize,
    pub abbreviation: String,
    pub system: NeuralSystem,
}

/// Node index → region abbreviation → neural system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtlasMap {
    name: String,
    regions: Vec<Region>,
}

#[derive(Debug, Deserialize)]
struct AtlasRow {
    index: usize,
    abbreviation: String,
    system: String,
}

const AAL90_CSV: &str = include_str!("../../data/aal90.csv");

impl AtlasMap {
    /// Builds an atlas from rows in any order; indices must cover `0..n` exactly once.
    pub fn new(name: impl Into<String>, mut regions: Vec<Region>) -> Result<Self> {
        regions.sort_by_key(|r| r.index);
        for (expected, r) in regions.iter().enumerate() {
            if r.index != expected {
                return Err(Error::Parse {
                    context: "atlas".into(),
                    message: format!("node indices must cover 0..{} exactly once; found {} at position {expected}", regions.len(), r.index),
                });
            }
        }
        if regions.is_empty() {
            return Err(Error::Parse {
                context: "atlas".into(),
                message: "atlas has no regions".into(),
            });
        }
        Ok(Self {
            name: name.into(),
            regions,
        })
    }

    /// Parses comma-delimited `index,abbreviation,system` rows (header required).
    pub fn from_csv(name: impl Into<String>, text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut regions = Vec::new();
        for row in reader.deserialize::<AtlasRow>() {
            let row = row.map_err(|e| Error::Parse {
                context: "atlas".into(),
                message: e.to_string(),
            })?;
            regions.push(Region {
                index: row.index,
                abbreviation: row.abbreviation,
                system: row.system.parse()?,
            });
        }
        Self::new(name, regions)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "atlas".into());
        Self::from_csv(name, &text)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,abbreviation,system\n");
        for r in &self.regions {
            out.push_str(&format!("{},{},{}\n", r.index, r.abbreviation, r.system));
        }
        out
    }

    /// The bundled 90-region AAL atlas with its neural-system assignment.
    pub fn aal90() -> Self {
        Self::from_csv("aal90", AAL90_CSV).expect("bundled AAL90 atlas is valid")
    }

    /// `n` nodes in contiguous, near-equal blocks over the first
    /// `min(n, systems)` tags. Used for synthetic cohorts.
    pub fn blocks(n: usize, systems: usize) -> Result<Self> {
        if n == 0 || systems == 0 || systems > NeuralSystem::ALL.len() {
            return Err(Error::invalid(format!(
                "block atlas needs n ≥ 1 and 1..=8 systems (got n={n}, systems={systems})"
            )));
        }
        let k = systems.min(n);
        let regions = (0..n)
            .map(|i| Region {
                index: i,
                abbreviation: format!("R{i}"),
                system: NeuralSystem::ALL[i * k / n],
            })
            .collect();
        Self::new(format!("blocks{n}x{k}"), regions)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.regions.len()
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn system_of(&self, node: usize) -> NeuralSystem {
        self.regions[node].system
    }

    pub fn abbreviation(&self, node: usize) -> &str {
        &self.regions[node].abbreviation
    }

    /// Nodes belonging to `system`, ascending.
    pub fn members(&self, system: NeuralSystem) -> Vec<usize> {
        self.regions
            .iter()
            .filter(|r| r.system == system)
            .map(|r| r.index)
            .collect()
    }

    /// System index per node, usable as a ground-truth partition.
    pub fn system_labels(&self) -> Vec<usize> {
        self.regions.iter().map(|r| r.system.index()).collect()
    }
}

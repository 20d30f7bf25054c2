//! Sample archives, train/test split protocols, and manufactured samples.

mod archive;
pub mod manufactured;
pub mod npy;
pub mod rng;
pub mod split;

use std::collections::HashSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::CoreError;
use crate::flow::Sample;
use crate::grid::Grid;

pub use archive::{
    load_archive, load_predictions, write_archive, write_npz, ChannelMap, GeometryChannel,
    NpzArray,
};
pub use manufactured::{manufactured_sample, Expected, Manufactured, ManufacturedKind};
pub use split::{
    extrapolatory_split, random_split, subsample, subsample_stratified, ExtrapolationMode,
    Protocol, SplitKey, SplitParameters, SplitResult,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed archive entry `{entry}`: {message}")]
    Parse { entry: String, message: String },

    #[error("shape mismatch in `{entry}`: {message}")]
    ShapeMismatch { entry: String, message: String },

    #[error("sample `{sample}` is missing channel `{channel}`")]
    MissingChannel { sample: String, channel: String },

    #[error("sample `{sample}` channel `{channel}` contains non-finite data")]
    NonFiniteData { sample: String, channel: String },

    #[error("sample `{sample}` mask is not binary (found {value})")]
    NonBinaryMask { sample: String, value: f64 },

    #[error("sample `{sample}` Reynolds channel is not constant (relative spread {spread:e})")]
    NonConstantRe { sample: String, spread: f64 },

    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),

    #[error("unknown sample id `{0}`")]
    UnknownId(String),

    #[error("samples are defined on different grids")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("requested {requested} training samples but only {available} are available")]
    SubsetTooLarge { requested: usize, available: usize },

    #[error("sample `{sample}`: {source}")]
    Sample { sample: String, source: CoreError },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl DatasetError {
    pub(crate) fn parse(entry: impl Into<String>, message: impl Into<String>) -> Self {
        DatasetError::Parse { entry: entry.into(), message: message.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DatasetError::Io { path: path.into(), source }
    }
}

/// Container format a dataset was read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchiveFormat {
    CanonicalDir,
    CanonicalZip,
    Npz,
    InMemory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub path: Option<PathBuf>,
    pub format: ArchiveFormat,
}

impl Provenance {
    pub fn in_memory() -> Self {
        Provenance { path: None, format: ArchiveFormat::InMemory }
    }
}

/// An ordered collection of samples sharing one grid, with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, provenance: Provenance) -> Result<Self, DatasetError> {
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            if !seen.insert(s.id()) {
                return Err(DatasetError::DuplicateId(s.id().to_string()));
            }
        }
        if let Some(first) = samples.first() {
            if samples.iter().any(|s| s.grid() != first.grid()) {
                return Err(DatasetError::GridMismatch);
            }
        }
        Ok(Dataset { samples, provenance })
    }

    pub fn in_memory(samples: Vec<Sample>) -> Result<Self, DatasetError> {
        Dataset::new(samples, Provenance::in_memory())
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.samples.first().map(Sample::grid)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(Sample::id)
    }

    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.samples.iter().find(|s| s.id() == id)
    }

    /// What the split protocols need from each sample.
    pub fn keys(&self) -> Vec<SplitKey> {
        self.samples
            .iter()
            .map(|s| SplitKey { id: s.id().to_string(), re: s.re(), category: s.category() })
            .collect()
    }

    /// Samples with the given ids, in the order given.
    pub fn select(&self, ids: &[String]) -> Result<Vec<&Sample>, DatasetError> {
        let index: std::collections::HashMap<&str, &Sample> =
            self.samples.iter().map(|s| (s.id(), s)).collect();
        ids.iter()
            .map(|id| index.get(id.as_str()).copied().ok_or_else(|| DatasetError::UnknownId(id.clone())))
            .collect()
    }
}

//! Edge-weight-aware graph classification for brain networks, with a single
//! explanation mask shared by every subject.
//!
//! The crate covers the whole workflow:
//!
//! - [`graph`]: subjects, atlases, dataset files, stratified splits, and
//!   synthetic cohorts with planted discriminative edges;
//! - [`features`]: node features (one-hot identity, local degree profile, degree, binned degree);
//! - [`autodiff`]: a small dense reverse-mode engine with MLP layers and Adam;
//! - [`backbone`]: the message-passing classifier and its training loop;
//! - [`explainer`]: the shared edge mask, its objective, and three-step training;
//! - [`analysis`]: explanation subgraphs, node metrics, neural-system ranking,
//!   spectral communities, and clustering-agreement scores;
//! - [`commands`]: the reproducible runs behind the `brainmask` binary.

pub mod analysis;
pub mod autodiff;
pub mod backbone;
pub mod commands;
pub mod error;
pub mod explainer;
pub mod features;
pub mod graph;

pub use error::{Error, Result};

//! Out-of-core pre-shuffling of a collection of stores into one store.
//!
//! The concatenated rows are cut into contiguous blocks of `block_rows`; the
//! blocks are visited in random order, `buffer_rows` at a time, and each
//! in-memory round is permuted before being appended to the output. Memory
//! is bounded by the round size, not by the data size. A provenance sidecar
//! records where every output row came from.

mod chain;
mod collection;
mod plan;
pub mod provenance;
mod run;
mod verify;

use std::path::PathBuf;

pub use chain::{pass_path, pass_seed, run_shuffle_passes};
pub use collection::{DatasetCollection, JoinMode, Member};
pub use plan::{plan_shuffle, ShufflePlan};
pub use provenance::{read_provenance, ProvenanceManifest, ProvenanceMap, ProvenanceRecord};
pub use run::{run_shuffle, OutputOptions, ShuffleOutput, ShuffleStats};
pub use verify::{collection_from_manifest, verify_shuffle, VerifyOptions, VerifyReport, Violation};

use crate::store::StoreError;

#[derive(Debug, thiserror::Error)]
pub enum ShuffleError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("invalid shuffle plan: {0}")]
    InvalidPlan(String),
    #[error("incompatible dataset: {0}")]
    Incompatible(String),
    #[error("no provenance sidecar under {}", .0.display())]
    MissingProvenance(PathBuf),
    #[error("corrupt provenance sidecar: {0}")]
    CorruptProvenance(String),
}

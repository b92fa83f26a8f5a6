//! Shared fixtures for the kernel benchmarks.

use std::path::PathBuf;

pub use wlab_core;
use wlab_core::ingest::load;
use wlab_core::modforms::NewformData;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/forms")
}

/// A form from the bundled data set; panics if it is missing or fails validation.
pub fn form(label: &str) -> NewformData {
    load(&data_dir().join(format!("{label}.form"))).unwrap_or_else(|e| panic!("{label}: {e}")).0
}

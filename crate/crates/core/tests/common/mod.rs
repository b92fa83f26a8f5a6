#![allow(dead_code)]

use std::path::PathBuf;

use wlab_core::ingest::load;
use wlab_core::modforms::NewformData;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/forms")
}

pub fn form(label: &str) -> NewformData {
    load(&data_dir().join(format!("{label}.form"))).unwrap_or_else(|e| panic!("{label}: {e}")).0
}

pub const LEVEL_25: [&str; 6] = ["25.2.k2.a", "25.2.k2.b", "25.2.k4.a", "25.2.k16.a", "25.2.k18.a", "25.2.k18.b"];
pub const LEVEL_49: [&str; 3] = ["49.2.k6.a", "49.2.k6.b", "49.2.k6.c"];

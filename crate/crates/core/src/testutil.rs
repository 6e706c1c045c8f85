//! Helpers shared by unit tests.

use std::path::PathBuf;

use crate::spectral::{Assets, NumericTable};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Numeric rows of a reference fixture.
pub fn fixture(name: &str) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(fixture_path(name)).unwrap();
    NumericTable::parse(&text, name).unwrap().rows.into_iter().map(|(_, r)| r).collect()
}

pub fn assets() -> Assets {
    Assets::bundled().unwrap()
}

#[path = "../tests/common/oracles.rs"]
pub mod oracles;

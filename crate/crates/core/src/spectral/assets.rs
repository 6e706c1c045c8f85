use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{parse_srf, LeafCoefficientTables, SensorResponse, SoilBasis};
use crate::error::{read_to_string, Error, Result};

/// Environment variable naming an asset directory that replaces the bundled
/// copies.
pub const ASSET_DIR_ENV: &str = "PROSAIL_TVAE_ASSETS";

pub const COEFFICIENTS_FILE: &str = "prospect5_coefficients.txt";
pub const SRF_FILE: &str = "s2a_msi_srf.csv";
pub const SOIL_FILE: &str = "soil_basis.txt";
pub const MANIFEST_FILE: &str = "SHA256SUMS";
pub const ASSET_FILES: [&str; 3] = [COEFFICIENTS_FILE, SRF_FILE, SOIL_FILE];

const BUNDLED: [(&str, &str); 3] = [
    (COEFFICIENTS_FILE, include_str!("../../assets/prospect5_coefficients.txt")),
    (SRF_FILE, include_str!("../../assets/s2a_msi_srf.csv")),
    (SOIL_FILE, include_str!("../../assets/soil_basis.txt")),
];
const BUNDLED_MANIFEST: &str = include_str!("../../assets/SHA256SUMS");

/// File name to lowercase hex SHA-256.
pub type AssetChecksums = BTreeMap<String, String>;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Parses `name  sha256` lines; blank lines and `#` comments are skipped.
pub fn parse_manifest(text: &str) -> Result<AssetChecksums> {
    let mut out = AssetChecksums::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [name, digest] = fields[..] else {
            return Err(Error::parse(MANIFEST_FILE, idx + 1, "expected `name  sha256`"));
        };
        if digest.len() != 64 || !digest.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::parse(MANIFEST_FILE, idx + 1, format!("malformed digest for {name}")));
        }
        if out.insert(name.to_string(), digest.to_ascii_lowercase()).is_some() {
            return Err(Error::parse(MANIFEST_FILE, idx + 1, format!("duplicate entry for {name}")));
        }
    }
    Ok(out)
}

fn verify(name: &str, bytes: &[u8], manifest: &AssetChecksums) -> Result<String> {
    let expected = manifest
        .get(name)
        .ok_or_else(|| Error::Data(format!("{name} is not listed in {MANIFEST_FILE}")))?;
    let found = sha256_hex(bytes);
    if &found != expected {
        return Err(Error::Checksum { name: name.to_string(), expected: expected.clone(), found });
    }
    Ok(found)
}

/// Every spectral constant the forward model needs, checksum-verified.
#[derive(Debug, Clone)]
pub struct Assets {
    pub tables: LeafCoefficientTables,
    pub soil: SoilBasis,
    pub srf: SensorResponse,
    pub checksums: AssetChecksums,
    /// `bundled` or the directory the files were read from.
    pub origin: String,
}

impl Assets {
    /// Copies compiled into the library.
    pub fn bundled() -> Result<Self> {
        Self::from_texts(
            BUNDLED[0].1,
            BUNDLED[1].1,
            BUNDLED[2].1,
            BUNDLED_MANIFEST,
            "bundled".to_string(),
        )
    }

    /// Reads and verifies the asset files and `SHA256SUMS` in `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str| read_to_string(&dir.join(name));
        Self::from_texts(
            &read(COEFFICIENTS_FILE)?,
            &read(SRF_FILE)?,
            &read(SOIL_FILE)?,
            &read(MANIFEST_FILE)?,
            dir.display().to_string(),
        )
    }

    /// The directory in [`ASSET_DIR_ENV`] when set, else the bundled copies.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(ASSET_DIR_ENV) {
            Some(dir) if !dir.is_empty() => Self::from_dir(&PathBuf::from(dir)),
            _ => Self::bundled(),
        }
    }

    fn from_texts(coefficients: &str, srf: &str, soil: &str, manifest: &str, origin: String) -> Result<Self> {
        let manifest = parse_manifest(manifest)?;
        let mut checksums = AssetChecksums::new();
        for (name, text) in [(COEFFICIENTS_FILE, coefficients), (SRF_FILE, srf), (SOIL_FILE, soil)] {
            checksums.insert(name.to_string(), verify(name, text.as_bytes(), &manifest)?);
        }
        let tables = LeafCoefficientTables::parse(coefficients, COEFFICIENTS_FILE)?;
        let grid = tables.grid();
        let soil = SoilBasis::parse(soil, SOIL_FILE, grid)?;
        let srf = parse_srf(srf, SRF_FILE, grid)?;
        Ok(Self { tables, soil, srf, checksums, origin })
    }

    /// Files shipped with the library, for writing out an editable copy.
    pub fn bundled_files() -> Vec<(&'static str, &'static str)> {
        let mut files = BUNDLED.to_vec();
        files.push((MANIFEST_FILE, BUNDLED_MANIFEST));
        files
    }
}

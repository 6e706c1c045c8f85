//! Binary dataset files: one text header line, then little-endian `f32`
//! rows of 14 parameters, 10 clean bands and 10 noisy bands.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{bands_to_f32, ResolvedSampler, SimulatedSample};
use crate::error::{Error, Result};
use crate::params::{ParameterVector, N_PARAMS, VARIABLES};
use crate::spectral::{BandReflectance, BAND_IDS, N_BANDS};

pub const DATASET_MAGIC: &str = "prosail-tvae-dataset/1";
pub const DATASET_COLUMNS: usize = N_PARAMS + 2 * N_BANDS;

pub fn column_names() -> Vec<String> {
    VARIABLES
        .iter()
        .map(|v| v.name.to_string())
        .chain(BAND_IDS.iter().map(|b| format!("clean_{b}")))
        .chain(BAND_IDS.iter().map(|b| format!("noisy_{b}")))
        .collect()
}

fn header(rows: usize) -> String {
    format!("{DATASET_MAGIC} rows={rows} columns={}\n", column_names().join(","))
}

/// Streams rows to `inner` after writing the header for a fixed row count.
pub struct DatasetWriter<W: Write> {
    inner: W,
    rows: usize,
    written: usize,
    hasher: Sha256,
}

impl<W: Write> DatasetWriter<W> {
    pub fn new(mut inner: W, rows: usize) -> Result<Self> {
        let head = header(rows);
        inner.write_all(head.as_bytes()).map_err(|e| Error::io("<dataset>", e))?;
        let mut hasher = Sha256::new();
        hasher.update(head.as_bytes());
        Ok(Self { inner, rows, written: 0, hasher })
    }

    pub fn push(&mut self, s: &SimulatedSample) -> Result<()> {
        if self.written == self.rows {
            return Err(Error::Data(format!("dataset declared {} rows; refusing another", self.rows)));
        }
        let mut buf = Vec::with_capacity(DATASET_COLUMNS * 4);
        let params = s.params.to_array();
        let values = params
            .iter()
            .map(|&x| x as f32)
            .chain(bands_to_f32(&s.clean_bands))
            .chain(bands_to_f32(&s.noisy_bands));
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.inner.write_all(&buf).map_err(|e| Error::io("<dataset>", e))?;
        self.hasher.update(&buf);
        self.written += 1;
        Ok(())
    }

    /// SHA-256 of everything written so far.
    pub fn digest_so_far(&self) -> String {
        hex::encode(self.hasher.clone().finalize())
    }

    /// Flushes and returns the sink; fails if fewer rows than declared were
    /// written.
    pub fn finish(mut self) -> Result<W> {
        if self.written != self.rows {
            return Err(Error::Data(format!("dataset declared {} rows but {} were written", self.rows, self.written)));
        }
        self.inner.flush().map_err(|e| Error::io("<dataset>", e))?;
        Ok(self.inner)
    }
}

/// Side-car describing how a dataset was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub rows: usize,
    pub seed: u64,
    pub config_sha256: String,
    pub sampler: ResolvedSampler,
    pub asset_checksums: BTreeMap<String, String>,
    pub data_sha256: String,
    pub code_version: String,
    pub columns: Vec<String>,
}

impl DatasetManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::error::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.line(), e.to_string()))
    }
}

/// A decoded dataset held in memory, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: usize,
    data: Vec<f32>,
}

impl Dataset {
    /// Parses a dataset file image; `name` labels errors.
    pub fn decode(bytes: &[u8], name: &str) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::parse(name, 1, "missing header line"))?;
        let head = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::parse(name, 1, "header is not UTF-8"))?;
        let mut fields = head.split(' ');
        if fields.next() != Some(DATASET_MAGIC) {
            return Err(Error::parse(name, 1, format!("not a {DATASET_MAGIC} file")));
        }
        let rows = fields
            .next()
            .and_then(|f| f.strip_prefix("rows="))
            .and_then(|r| r.parse::<usize>().ok())
            .ok_or_else(|| Error::parse(name, 1, "missing or malformed rows="))?;
        let columns = fields
            .next()
            .and_then(|f| f.strip_prefix("columns="))
            .ok_or_else(|| Error::parse(name, 1, "missing columns="))?;
        if fields.next().is_some() {
            return Err(Error::parse(name, 1, "trailing header fields"));
        }
        if columns.split(',').ne(column_names().iter().map(String::as_str)) {
            return Err(Error::parse(name, 1, format!("unexpected column list `{columns}`")));
        }
        let body = &bytes[nl + 1..];
        let expected = rows.checked_mul(DATASET_COLUMNS * 4);
        if expected != Some(body.len()) {
            return Err(Error::parse(
                name,
                2,
                format!("body has {} bytes; {rows} rows need {}", body.len(), rows.saturating_mul(DATASET_COLUMNS * 4)),
            ));
        }
        let data: Vec<f32> = body.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("{name}: non-finite value in row {}", k / DATASET_COLUMNS)));
        }
        Ok(Self { rows, data })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes, &path.display().to_string())
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * DATASET_COLUMNS..(i + 1) * DATASET_COLUMNS]
    }

    pub fn params(&self, i: usize) -> ParameterVector {
        let r = self.row(i);
        ParameterVector::from_array(&std::array::from_fn(|k| r[k] as f64))
    }

    pub fn clean(&self, i: usize) -> BandReflectance {
        let r = self.row(i);
        BandReflectance(std::array::from_fn(|b| r[N_PARAMS + b] as f64))
    }

    pub fn noisy(&self, i: usize) -> BandReflectance {
        let r = self.row(i);
        BandReflectance(std::array::from_fn(|b| r[N_PARAMS + N_BANDS + b] as f64))
    }

    /// Keeps the rows in `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        let start = range.start.min(self.rows);
        let range = start..range.end.clamp(start, self.rows);
        Self {
            rows: range.len(),
            data: self.data[range.start * DATASET_COLUMNS..range.end * DATASET_COLUMNS].to_vec(),
        }
    }

    /// Writes all rows as CSV with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let map = |e: csv::Error| Error::Data(format!("CSV export failed: {e}"));
        w.write_record(column_names()).map_err(map)?;
        for i in 0..self.rows {
            w.write_record(self.row(i).iter().map(|v| v.to_string())).map_err(map)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }
}

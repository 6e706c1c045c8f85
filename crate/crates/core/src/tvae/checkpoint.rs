//! Checkpoint files.
//!
//! Layout: 8-byte magic, `u32` version, `u64` metadata length, JSON
//! metadata, then little-endian `f64` tensors (current parameters, best
//! parameters, Adam first moments, Adam second moments; each list in
//! parameter order), then the SHA-256 of all preceding bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{TrainConfig, TrainState, TrainedModel};
use crate::autodiff::{Adam, AdamConfig, Tensor};
use crate::error::{Error, Result};
use crate::params::VARIABLES;
use crate::spectral::N_BANDS;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PTVAECKP";
pub const CHECKPOINT_VERSION: u32 = 1;

const HEAD: usize = 8 + 4 + 8;
const DIGEST: usize = 32;

/// Provenance of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub seed: u64,
    pub config: TrainConfig,
    pub train_sha256: String,
    pub val_sha256: String,
    pub train_rows: usize,
    pub val_rows: usize,
    pub asset_checksums: BTreeMap<String, String>,
    pub code_version: String,
    /// Reason the last run stopped early, if it did.
    pub diverged: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct OptimizerMeta {
    config: AdamConfig,
    step: u64,
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    manifest: TrainingManifest,
    state: TrainState,
    optimizer: Option<OptimizerMeta>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub manifest: TrainingManifest,
    pub state: TrainState,
}

fn shapes(model: &TrainedModel) -> Vec<(usize, usize)> {
    let mut s: Vec<(usize, usize)> = model.encoder.layout().into_iter().map(|(_, shape)| shape).collect();
    s.push((1, N_BANDS));
    s
}

fn push_tensor(out: &mut Vec<u8>, values: impl Iterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    name: &'a str,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("{}: truncated while reading {what}", self.name)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn values(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let len = n.checked_mul(8).ok_or_else(|| Error::Checkpoint(format!("{}: {what} is too large", self.name)))?;
        let raw = self.take(len, what)?;
        let v: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Checkpoint(format!("{}: non-finite value in {what}", self.name)));
        }
        Ok(v)
    }

    fn tensors(&mut self, shapes: &[(usize, usize)], what: &str) -> Result<Vec<Tensor>> {
        shapes
            .iter()
            .map(|&(r, c)| Ok(Array2::from_shape_vec((r, c), self.values(r * c, what)?).expect("shape matches length")))
            .collect()
    }
}

impl Checkpoint {
    /// Model used for inference: the best validation checkpoint.
    pub fn model(&self) -> &TrainedModel {
        &self.state.best
    }

    pub fn encode(&self) -> Vec<u8> {
        let meta = Metadata {
            manifest: self.manifest.clone(),
            state: self.state.clone(),
            optimizer: self.state.optimizer.as_ref().map(|o| OptimizerMeta { config: o.config, step: o.step }),
        };
        let json = serde_json::to_vec(&meta).expect("checkpoint metadata serializes");
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for model in [&self.state.current, &self.state.best] {
            for p in model.parameters() {
                push_tensor(&mut out, p.iter().copied());
            }
        }
        if let Some(o) = &self.state.optimizer {
            let (first, second) = o.moments();
            for m in first.iter().chain(second) {
                push_tensor(&mut out, m.iter().copied());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    /// Parses and verifies a checkpoint image; `name` labels errors.
    pub fn decode(bytes: &[u8], name: &str) -> Result<Self> {
        let bad = |m: String| Error::Checkpoint(format!("{name}: {m}"));
        if bytes.len() < HEAD + DIGEST {
            return Err(bad("file is too short".into()));
        }
        if &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint file".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::Checksum {
                name: name.to_string(),
                expected: hex::encode(digest),
                found: hex::encode(Sha256::digest(body)),
            });
        }
        let meta_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
        let mut r = Reader { bytes: body, pos: HEAD, name };
        let meta_len = usize::try_from(meta_len).map_err(|_| bad("metadata length overflows".into()))?;
        let json = r.take(meta_len, "metadata")?;
        let meta: Metadata = serde_json::from_slice(json).map_err(|e| bad(format!("metadata: {e}")))?;
        let Metadata { manifest, mut state, optimizer } = meta;
        for m in [&state.current, &state.best] {
            m.encoder.validate().map_err(|e| bad(e.to_string()))?;
            if m.encoder != manifest.config.encoder {
                return Err(bad("encoder configuration disagrees with the manifest".into()));
            }
        }
        let shapes = shapes(&state.current);
        let total: usize = shapes.iter().map(|&(r, c)| r * c).sum();
        let lists = 2 + if optimizer.is_some() { 2 } else { 0 };
        if total.checked_mul(8 * lists) != Some(body.len().saturating_sub(r.pos)) {
            return Err(bad("tensor section length does not match the encoder configuration".into()));
        }
        let current = r.tensors(&shapes, "current weights")?;
        let best = r.tensors(&shapes, "best weights")?;
        state.current.set_parameters(current);
        state.best.set_parameters(best);
        state.optimizer = match optimizer {
            Some(o) => {
                let sizes: Vec<usize> = shapes.iter().map(|&(r, c)| r * c).collect();
                let first = sizes.iter().map(|&n| r.values(n, "optimizer moments")).collect::<Result<Vec<_>>>()?;
                let second = sizes.iter().map(|&n| r.values(n, "optimizer moments")).collect::<Result<Vec<_>>>()?;
                Some(Adam::from_parts(o.config, o.step, first, second).ok_or_else(|| bad("optimizer moments are inconsistent".into()))?)
            }
            None => None,
        };
        Ok(Self { manifest, state })
    }

    pub fn summary_path(path: &Path) -> PathBuf {
        let mut p = path.as_os_str().to_owned();
        p.push(".summary.txt");
        PathBuf::from(p)
    }

    /// Writes the checkpoint and its summary side-car.
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))?;
        let side = Self::summary_path(path);
        std::fs::write(&side, self.summary()).map_err(|e| Error::io(&side, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes, &path.display().to_string())
    }

    pub fn summary(&self) -> String {
        let m = &self.manifest;
        let s = &self.state;
        let e = &m.config.encoder;
        let mut t = String::new();
        let _ = writeln!(t, "checkpoint format {CHECKPOINT_VERSION}, code version {}", m.code_version);
        let _ = writeln!(t, "seed: {}", m.seed);
        let _ = writeln!(
            t,
            "encoder: d_model {} heads {} layers {} d_ff {} latents {} ({} weights)",
            e.d_model,
            e.heads,
            e.layers,
            e.d_ff,
            e.n_latent,
            s.best.weight_count()
        );
        let _ = writeln!(t, "train rows {} sha256 {}", m.train_rows, m.train_sha256);
        let _ = writeln!(t, "val rows {} sha256 {}", m.val_rows, m.val_sha256);
        let _ = writeln!(t, "epochs completed: {} of {}", s.epochs_done, m.config.epochs);
        let _ = writeln!(t, "best epoch: {} (val L_rec + beta_end L_KL = {})", s.best_epoch, s.best_score);
        if let Some(reason) = &m.diverged {
            let _ = writeln!(t, "stopped early: {reason}");
        }
        let sd: Vec<String> = s.best.log_noise_sd.iter().map(|l| format!("{:.5}", l.exp())).collect();
        let _ = writeln!(t, "decoder noise sd: {}", sd.join(" "));
        let _ = writeln!(t, "latents: {}", VARIABLES[..e.n_latent].iter().map(|v| v.name).collect::<Vec<_>>().join(" "));
        if let Some(last) = s.log.last() {
            let _ = writeln!(
                t,
                "last epoch: beta {} train L {} val L {} val L_rec {} val L_KL {}",
                last.beta, last.train.total, last.val.total, last.val.rec, last.val.kl
            );
        }
        t
    }
}

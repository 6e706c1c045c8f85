//! Simulated training data: prior sampling with LAI-driven co-distributions,
//! forward simulation, sensor noise and dataset files.

mod config;
mod dataset;

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{
    default_rules, CoDistributionRule, Comparator, NoiseMode, ResolvedRule, ResolvedSampler, SamplerConfig,
    VariableOverride, VariableSpec,
};
pub use dataset::{column_names, Dataset, DatasetManifest, DatasetWriter, DATASET_COLUMNS, DATASET_MAGIC};

use crate::error::Result;
use crate::forward::Prosail;
use crate::params::{idx, Family, ParameterVector, N_PARAMS};
use crate::sail::ViewGeometry;
use crate::spectral::{BandReflectance, N_BANDS};
use crate::truncnorm::TruncatedNormal;

/// Draws one value by inverse-CDF transform of a single uniform.
///
/// Panics if `spec` is not a validated truncated-normal spec.
pub fn sample_truncated_normal<R: Rng + ?Sized>(spec: &VariableSpec, rng: &mut R) -> f64 {
    let (mean, sd) = spec.mean.zip(spec.sd).expect("truncated normal spec has mean and sd");
    let tn = TruncatedNormal::new(mean, sd, spec.lower, spec.upper).expect("validated spec");
    tn.quantile(rng.random::<f64>())
}

/// Draws one value from either family.
pub fn sample_variable<R: Rng + ?Sized>(spec: &VariableSpec, rng: &mut R) -> f64 {
    match spec.family {
        Family::TruncatedNormal => sample_truncated_normal(spec, rng),
        Family::Uniform => {
            let u: f64 = rng.random();
            (spec.lower + u * (spec.upper - spec.lower)).clamp(spec.lower, spec.upper)
        }
    }
}

/// Draws LAI first, applies every rule it triggers, then draws the rest in
/// parameter-vector order.
pub fn sample_parameters<R: Rng + ?Sized>(sampler: &ResolvedSampler, rng: &mut R) -> ParameterVector {
    let mut x = [0.0; N_PARAMS];
    x[idx::LAI] = sample_variable(&sampler.specs[idx::LAI], rng);
    let bounds = effective_bounds(sampler, x[idx::LAI]);
    for i in (0..N_PARAMS).filter(|&i| i != idx::LAI) {
        let (lo, hi) = bounds[i];
        x[i] = sample_variable(&sampler.specs[i].with_bounds(lo, hi), rng);
    }
    ParameterVector::from_array(&x)
}

/// Adds independent Gaussian noise to every band and clips to [0, 1].
pub fn add_noise<R: Rng + ?Sized>(bands: &BandReflectance, rng: &mut R, level: f64, mode: NoiseMode) -> BandReflectance {
    BandReflectance(std::array::from_fn(|b| {
        let e: f64 = rng.sample(StandardNormal);
        let x = bands.0[b];
        let sd = match mode {
            NoiseMode::Absolute => level,
            NoiseMode::Relative => level * x.abs(),
        };
        (x + sd * e).clamp(0.0, 1.0)
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSample {
    pub params: ParameterVector,
    pub clean_bands: BandReflectance,
    pub noisy_bands: BandReflectance,
}

impl SimulatedSample {
    pub fn geometry(&self) -> ViewGeometry {
        self.params.geometry
    }
}

/// Random stream of sample `index`: independent of how samples are
/// scheduled across threads.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn simulate_sample(model: &Prosail, sampler: &ResolvedSampler, seed: u64, index: u64) -> Result<SimulatedSample> {
    let mut rng = sample_rng(seed, index);
    let params = sample_parameters(sampler, &mut rng);
    let clean_bands = model.bands(&params)?;
    let noisy_bands = add_noise(&clean_bands, &mut rng, sampler.noise_level, sampler.noise_mode);
    Ok(SimulatedSample { params, clean_bands, noisy_bands })
}

/// Sampling interval of every variable given the drawn LAI; later rules
/// take precedence.
pub fn effective_bounds(sampler: &ResolvedSampler, lai: f64) -> [(f64, f64); N_PARAMS] {
    let mut bounds: [(f64, f64); N_PARAMS] = std::array::from_fn(|i| (sampler.specs[i].lower, sampler.specs[i].upper));
    for rule in sampler.rules.iter().filter(|r| r.fires(lai)) {
        for &(i, lo, hi) in &rule.overrides {
            bounds[i] = (lo, hi);
        }
    }
    bounds
}

/// Names of the variables outside their effective bounds.
pub fn bound_violations(sampler: &ResolvedSampler, pv: &ParameterVector) -> Vec<&'static str> {
    let x = pv.to_array();
    let bounds = effective_bounds(sampler, x[idx::LAI]);
    (0..N_PARAMS)
        .filter(|&i| !(bounds[i].0..=bounds[i].1).contains(&x[i]))
        .map(|i| crate::params::VARIABLES[i].name)
        .collect()
}

/// SHA-256 of the resolved sampler configuration.
pub fn config_sha256(sampler: &ResolvedSampler) -> String {
    let json = serde_json::to_vec(sampler).expect("sampler serializes");
    hex::encode(Sha256::digest(&json))
}

/// Summary printed after generation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub rows: usize,
    pub bound_violations: usize,
    pub rule_fired: usize,
}

const CHUNK: usize = 2048;

/// Simulates `n` samples and streams them to `sink` in index order.
pub fn generate_dataset<W: Write>(
    n: usize,
    sampler: &ResolvedSampler,
    seed: u64,
    model: &Prosail,
    asset_checksums: &BTreeMap<String, String>,
    sink: &mut DatasetWriter<W>,
) -> Result<(DatasetManifest, GenerationSummary)> {
    let mut summary = GenerationSummary::default();
    for start in (0..n).step_by(CHUNK) {
        let end = (start + CHUNK).min(n);
        let chunk: Vec<Result<SimulatedSample>> =
            (start..end).into_par_iter().map(|i| simulate_sample(model, sampler, seed, i as u64)).collect();
        for s in chunk {
            let s = s?;
            summary.bound_violations += usize::from(!bound_violations(sampler, &s.params).is_empty());
            summary.rule_fired += usize::from(sampler.rules.iter().any(|r| r.fires(s.params.canopy.lai)));
            sink.push(&s)?;
        }
    }
    summary.rows = n;
    let data_sha256 = sink.digest_so_far();
    let manifest = DatasetManifest {
        format: DATASET_MAGIC.to_string(),
        rows: n,
        seed,
        config_sha256: config_sha256(sampler),
        sampler: sampler.clone(),
        asset_checksums: asset_checksums.clone(),
        data_sha256,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        columns: column_names(),
    };
    Ok((manifest, summary))
}

pub(crate) fn bands_to_f32(b: &BandReflectance) -> [f32; N_BANDS] {
    std::array::from_fn(|i| b.0[i] as f32)
}

#[cfg(test)]
mod tests;

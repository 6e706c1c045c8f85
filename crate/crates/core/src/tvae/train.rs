//! Mini-batch training of the encoder and decoder noise.
//!
//! Defaults: Adam (lr 1e-3, clip 10), batch 64, 30 epochs, β rising linearly
//! from 1e-4 to 1 over the first half of the epochs and constant afterwards,
//! one latent draw per sample, decoder noise starting at 0.005.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    draw_uniforms, new_optimizer, sample_loss, sample_loss_and_grad, EncoderConfig, LossContext, LossValue,
    Normalization, TrainedModel, SIGMA_FLOOR,
};
use crate::autodiff::{Adam, AdamConfig, Tensor};
use crate::error::{Error, Result};
use crate::forward::Prosail;
use crate::sampler::Dataset;

const DRAW_SALT: u64 = 0x6c8e_9cf5_7093_2a1d;
const SHUFFLE_SALT: u64 = 0x2545_f491_4f6c_dd1d;
const INIT_SALT: u64 = 0x9e37_79b9_7f4a_7c15;
const VAL_EPOCH: u64 = u32::MAX as u64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub encoder: EncoderConfig,
    pub optimizer: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    /// Fraction of the epochs over which β rises to `beta_end`.
    pub warmup_fraction: f64,
    /// Reparameterized draws averaged per reconstruction term.
    pub latent_samples: usize,
    pub init_noise_sd: f64,
    /// Posterior width of the untrained head, normalized units.
    pub init_sigma: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::default(),
            optimizer: AdamConfig::default(),
            batch_size: 64,
            epochs: 30,
            beta_start: 1e-4,
            beta_end: 1.0,
            warmup_fraction: 0.5,
            latent_samples: 1,
            init_noise_sd: 0.005,
            init_sigma: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size == 0 || self.epochs == 0 || self.latent_samples == 0 {
            return bad("batch_size, epochs and latent_samples must be positive");
        }
        if !(self.beta_start >= 0.0 && self.beta_end >= 0.0 && self.beta_start.is_finite() && self.beta_end.is_finite()) {
            return bad("beta_start and beta_end must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return bad("warmup_fraction must lie in [0, 1]");
        }
        if !(self.init_noise_sd > 0.0 && self.init_noise_sd.is_finite()) {
            return bad("init_noise_sd must be positive");
        }
        if !(self.init_sigma > SIGMA_FLOOR && self.init_sigma.is_finite()) {
            return bad("init_sigma must exceed the sigma floor");
        }
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0 && (0.0..1.0).contains(&o.beta1) && (0.0..1.0).contains(&o.beta2) && o.epsilon > 0.0) {
            return bad("optimizer needs learning_rate > 0, beta1 and beta2 in [0, 1), epsilon > 0");
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// β of zero-based `epoch`.
pub fn beta_at(cfg: &TrainConfig, epoch: usize) -> f64 {
    let warm = (cfg.warmup_fraction * cfg.epochs as f64).round() as usize;
    if warm == 0 {
        return cfg.beta_end;
    }
    let t = (epoch as f64 / warm as f64).min(1.0);
    cfg.beta_start + t * (cfg.beta_end - cfg.beta_start)
}

/// One row of the training log; `epoch` counts from 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub beta: f64,
    pub train: LossValue,
    pub val: LossValue,
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl EpochLog {
    pub const CSV_HEADER: &'static str = "epoch,beta,train_loss,train_rec,train_kl,val_loss,val_rec,val_kl,wall_seconds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{:.3}",
            self.epoch,
            self.beta,
            self.train.total,
            self.train.rec,
            self.train.kl,
            self.val.total,
            self.val.rec,
            self.val.kl,
            self.wall_seconds
        )
    }

    pub fn write_csv<W: Write>(rows: &[EpochLog], mut out: W) -> Result<()> {
        let mut text = String::from(Self::CSV_HEADER);
        text.push('\n');
        for r in rows {
            text.push_str(&r.csv_row());
            text.push('\n');
        }
        out.write_all(text.as_bytes()).map_err(|e| Error::io("<training log>", e))
    }
}

/// Everything needed to continue a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub current: TrainedModel,
    #[serde(skip)]
    pub optimizer: Option<Adam>,
    /// Model with the lowest validation score so far (initial weights before
    /// the first epoch).
    pub best: TrainedModel,
    /// Zero until an epoch improves on the initial weights.
    pub best_epoch: usize,
    /// Validation `L_rec + β_end L_KL` of `best`.
    pub best_score: f64,
    pub initial_val: LossValue,
    pub epochs_done: usize,
    pub log: Vec<EpochLog>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: TrainState,
    /// Epoch (1-based) and reason when a non-finite loss stopped the run.
    pub diverged: Option<(usize, String)>,
}

fn draw_rng(seed: u64, epoch: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ DRAW_SALT);
    rng.set_stream((epoch << 32) | index as u64);
    rng
}

fn stream_rng(seed: u64, salt: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
    rng.set_stream(stream);
    rng
}

/// Fresh model and training state for `train_set`.
pub fn initial_state(prosail: &Prosail, train_set: &Dataset, val_set: &Dataset, cfg: &TrainConfig, seed: u64) -> Result<TrainState> {
    cfg.validate()?;
    let normalization = Normalization::fit((0..train_set.len()).map(|i| train_set.noisy(i)).collect::<Vec<_>>().iter())?;
    let mut rng = stream_rng(seed, INIT_SALT, 0);
    let model = TrainedModel::new(cfg.encoder, cfg.init_sigma, cfg.init_noise_sd, normalization, &mut rng)?;
    let optimizer = new_optimizer(cfg, &model);
    let initial_val = validate(prosail, &model, val_set, cfg, seed, beta_at(cfg, 0))?;
    Ok(TrainState {
        best: model.clone(),
        current: model,
        optimizer: Some(optimizer),
        best_epoch: 0,
        best_score: initial_val.rec + cfg.beta_end * initial_val.kl,
        initial_val,
        epochs_done: 0,
        log: Vec::new(),
    })
}

/// Mean validation loss with draws fixed per validation row.
pub fn validate(prosail: &Prosail, model: &TrainedModel, val_set: &Dataset, cfg: &TrainConfig, seed: u64, beta: f64) -> Result<LossValue> {
    if val_set.is_empty() {
        return Err(Error::Data("validation set is empty".into()));
    }
    let ctx = LossContext::new(prosail, model);
    let params = model.parameters();
    let values: Vec<Result<LossValue>> = (0..val_set.len())
        .into_par_iter()
        .map(|i| {
            let u = draw_uniforms(&mut draw_rng(seed, VAL_EPOCH, i), cfg.latent_samples);
            let geom = val_set.params(i).geometry;
            sample_loss(&ctx, &params, &val_set.noisy(i), &geom, beta, &u)
        })
        .collect();
    let mut sum = LossValue::default();
    for v in values {
        sum.add(&v?);
    }
    Ok(sum.scaled(1.0 / val_set.len() as f64))
}

fn not_finite(v: &LossValue) -> bool {
    !(v.total.is_finite() && v.rec.is_finite() && v.kl.is_finite())
}

/// Runs the remaining epochs of `cfg` from `state` (or a fresh start).
/// `on_epoch` sees each log row as it is produced.
pub fn train(
    prosail: &Prosail,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
    seed: u64,
    resume: Option<TrainState>,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let mut state = match resume {
        Some(s) => s,
        None => initial_state(prosail, train_set, val_set, cfg, seed)?,
    };
    if state.current.encoder != cfg.encoder {
        return Err(Error::Config("resumed state was trained with a different encoder configuration".into()));
    }
    let sizes: Vec<usize> = state.current.parameters().iter().map(|p| p.len()).collect();
    let mut optimizer = match state.optimizer.take() {
        Some(mut o) if o.matches(&sizes) => {
            o.config = cfg.optimizer;
            o
        }
        Some(_) => return Err(Error::Checkpoint("optimizer state does not match the model".into())),
        None => new_optimizer(cfg, &state.current),
    };

    let n = train_set.len();
    for epoch in state.epochs_done..cfg.epochs {
        let started = Instant::now();
        let beta = beta_at(cfg, epoch);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream_rng(seed, SHUFFLE_SALT, epoch as u64));

        let mut params = state.current.parameters();
        let epoch_start_model = state.current.clone();
        let epoch_start_opt = optimizer.clone();
        let mut sum = LossValue::default();
        let mut failure: Option<String> = None;
        for batch in order.chunks(cfg.batch_size) {
            let ctx = LossContext::new(prosail, &state.current);
            let results: Vec<Result<(LossValue, Vec<Tensor>)>> = {
                let params = &params;
                batch
                    .par_iter()
                    .map(|&i| {
                        let u = draw_uniforms(&mut draw_rng(seed, epoch as u64, i), cfg.latent_samples);
                        let geom = train_set.params(i).geometry;
                        sample_loss_and_grad(&ctx, params, &train_set.noisy(i), &geom, beta, &u)
                    })
                    .collect()
            };
            let mut grad: Option<Vec<Tensor>> = None;
            for (k, r) in results.into_iter().enumerate() {
                let (v, g) = match r {
                    Ok(x) => x,
                    Err(Error::Diff(e)) => {
                        failure = Some(format!("sample {}: {e}", batch[k]));
                        break;
                    }
                    Err(e) => return Err(e),
                };
                if not_finite(&v) {
                    failure = Some(format!("non-finite loss at sample {}", batch[k]));
                    break;
                }
                sum.add(&v);
                match grad.as_mut() {
                    None => grad = Some(g),
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                }
            }
            if failure.is_some() {
                break;
            }
            let mut grad = grad.expect("non-empty batch");
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            let norm = optimizer.update(&mut params, &grad);
            if !norm.is_finite() || params.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
                failure = Some("non-finite gradient".into());
                break;
            }
            state.current.set_parameters(params.clone());
        }

        let val = match failure {
            None => validate(prosail, &state.current, val_set, cfg, seed, beta),
            Some(_) => Ok(LossValue::default()),
        };
        let val = match val {
            Ok(v) if failure.is_none() && !not_finite(&v) => v,
            Ok(_) | Err(Error::Diff(_)) => {
                let reason = failure.unwrap_or_else(|| "non-finite validation loss".into());
                state.current = epoch_start_model;
                state.optimizer = Some(epoch_start_opt);
                return Ok(TrainOutcome { state, diverged: Some((epoch + 1, reason)) });
            }
            Err(e) => return Err(e),
        };

        let row = EpochLog {
            epoch: epoch + 1,
            beta,
            train: sum.scaled(1.0 / n as f64),
            val,
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        let score = val.rec + cfg.beta_end * val.kl;
        if score < state.best_score {
            state.best_score = score;
            state.best_epoch = epoch + 1;
            state.best = state.current.clone();
        }
        state.epochs_done = epoch + 1;
        state.log.push(row);
        on_epoch(&row);
    }
    state.optimizer = Some(optimizer);
    Ok(TrainOutcome { state, diverged: None })
}

//! Transformer encoder with truncated-normal latent heads, trained as a VAE
//! whose decoder is the fixed PROSAIL operator.

mod checkpoint;
mod encoder;
mod gradcheck;
mod infer;
mod latent;
mod train;

use ndarray::Array2;
use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, TrainingManifest, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use encoder::{
    encode_on_tape, init_weights, positional_encoding, EncoderConfig, Normalization, N_TOKENS, SIGMA_FLOOR,
};
pub use gradcheck::{check_loss_gradients, LossGradCheck, GRAD_CHECK_FLOOR, LATENT_STEP, WEIGHT_STEPS};
pub use infer::{encode, infer, ParameterEstimate, VariableEstimate, INTERVAL_LEVEL};
pub use latent::{kl_to_unit_uniform_on_tape, tn_sample_on_tape, LatentPosterior, TruncatedNormalSpec};
pub use train::{beta_at, initial_state, train, validate, EpochLog, TrainConfig, TrainOutcome, TrainState};

use crate::autodiff::{Adam, Tape, Tensor, Var};
use crate::error::Result;
use crate::forward::Prosail;
use crate::params::{N_LATENT, VARIABLES};
use crate::sail::ViewGeometry;
use crate::spectral::{BandReflectance, N_BANDS};

/// Encoder weights, decoder noise and input normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub encoder: EncoderConfig,
    #[serde(skip)]
    pub weights: Vec<Tensor>,
    /// Per-band log standard deviation of the Gaussian likelihood.
    pub log_noise_sd: [f64; N_BANDS],
    pub normalization: Normalization,
}

impl TrainedModel {
    pub fn new<R: Rng + ?Sized>(encoder: EncoderConfig, init_sigma: f64, noise_sd: f64, normalization: Normalization, rng: &mut R) -> Result<Self> {
        encoder.validate()?;
        Ok(Self {
            weights: init_weights(&encoder, init_sigma, rng),
            encoder,
            log_noise_sd: [noise_sd.ln(); N_BANDS],
            normalization,
        })
    }

    pub fn weight_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum()
    }

    /// Optimized tensors: encoder weights, then the noise row.
    pub fn parameters(&self) -> Vec<Tensor> {
        let mut p = self.weights.clone();
        p.push(Array2::from_shape_vec((1, N_BANDS), self.log_noise_sd.to_vec()).expect("noise row"));
        p
    }

    pub(crate) fn set_parameters(&mut self, mut p: Vec<Tensor>) {
        let noise = p.pop().expect("noise row");
        self.log_noise_sd = std::array::from_fn(|i| noise[[0, i]]);
        self.weights = p;
    }
}

/// `½ Σ_l [ln 2πσ_l² + (x_l − μ_l)²/σ_l²]` for rows `x`, `mean`, `log_sd`.
pub fn reconstruction_nll_on_tape<'t>(x: Var<'t>, mean: Var<'t>, log_sd: Var<'t>) -> Var<'t> {
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let resid = (x - mean) * (-log_sd).exp();
    ((log_sd * 2.0 + ln_2pi + resid.square()) * 0.5).sum()
}

/// Plain evaluation of the Gaussian reconstruction loss.
pub fn reconstruction_nll(x: &BandReflectance, mean: &BandReflectance, log_sd: &[f64; N_BANDS]) -> f64 {
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    (0..N_BANDS)
        .map(|l| {
            let r = (x.0[l] - mean.0[l]) / log_sd[l].exp();
            0.5 * (ln_2pi + 2.0 * log_sd[l] + r * r)
        })
        .sum()
}

/// The three loss terms of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossValue {
    pub total: f64,
    pub rec: f64,
    pub kl: f64,
}

impl LossValue {
    fn add(&mut self, o: &LossValue) {
        self.total += o.total;
        self.rec += o.rec;
        self.kl += o.kl;
    }

    fn scaled(self, c: f64) -> Self {
        Self { total: self.total * c, rec: self.rec * c, kl: self.kl * c }
    }
}

/// Fixed pieces shared by every loss evaluation.
pub struct LossContext<'a> {
    pub prosail: &'a Prosail,
    pub encoder: EncoderConfig,
    pub normalization: &'a Normalization,
    pe: Tensor,
}

impl<'a> LossContext<'a> {
    pub fn new(prosail: &'a Prosail, model: &'a TrainedModel) -> Self {
        Self {
            prosail,
            encoder: model.encoder,
            normalization: &model.normalization,
            pe: positional_encoding(model.encoder.d_model),
        }
    }
}

/// Uniform draws for the reparameterized latents, one row per latent sample.
pub fn draw_uniforms<R: Rng + ?Sized>(rng: &mut R, samples: usize) -> Vec<[f64; N_LATENT]> {
    (0..samples).map(|_| std::array::from_fn(|_| rng.sample(Open01))).collect()
}

/// Normalized latent row to the eleven physical scalars.
pub fn to_physical_on_tape<'t>(z: Var<'t>) -> [Var<'t>; N_LATENT] {
    let tape = z.tape();
    let lower = tape.constant_row(&VARIABLES[..N_LATENT].iter().map(|v| v.lower).collect::<Vec<_>>());
    let width = tape.constant_row(&VARIABLES[..N_LATENT].iter().map(|v| v.width()).collect::<Vec<_>>());
    let phys = lower + z * width;
    std::array::from_fn(|i| phys.col(i))
}

/// Reconstruction loss of observed `bands` from physical latents.
pub fn reconstruction_from_physical<'t>(
    prosail: &Prosail,
    latent: &[Var<'t>; N_LATENT],
    geom: &ViewGeometry,
    bands: &BandReflectance,
    log_sd: Var<'t>,
) -> Var<'t> {
    let tape = log_sd.tape();
    let mean = prosail.bands_on_tape(latent, geom);
    reconstruction_nll_on_tape(tape.constant_row(&bands.0), mean, log_sd)
}

/// `(L, L_rec, L_KL)` of one observation, with `L = L_rec + β L_KL`. The
/// reconstruction term averages over the rows of `u`.
pub fn sample_loss_on_tape<'t>(
    ctx: &LossContext<'_>,
    weights: &[Var<'t>],
    log_sd: Var<'t>,
    bands: &BandReflectance,
    geom: &ViewGeometry,
    beta: f64,
    u: &[[f64; N_LATENT]],
) -> (Var<'t>, Var<'t>, Var<'t>) {
    let tokens = ctx.normalization.tokens(bands, geom);
    let (mu, sigma) = encode_on_tape(&ctx.encoder, weights, &tokens, &ctx.pe);
    let kl = kl_to_unit_uniform_on_tape(mu, sigma).sum();
    let mut rec: Option<Var<'t>> = None;
    for draw in u {
        let z = tn_sample_on_tape(mu, sigma, draw);
        let r = reconstruction_from_physical(ctx.prosail, &to_physical_on_tape(z), geom, bands, log_sd);
        rec = Some(match rec {
            Some(acc) => acc + r,
            None => r,
        });
    }
    let rec = rec.expect("at least one latent sample") * (1.0 / u.len() as f64);
    (rec + kl * beta, rec, kl)
}

/// Loss value and gradients for every optimized tensor.
pub fn sample_loss_and_grad(
    ctx: &LossContext<'_>,
    params: &[Tensor],
    bands: &BandReflectance,
    geom: &ViewGeometry,
    beta: f64,
    u: &[[f64; N_LATENT]],
) -> Result<(LossValue, Vec<Tensor>)> {
    let tape = Tape::new();
    let vars: Vec<Var<'_>> = params.iter().map(|p| tape.var(p.clone())).collect();
    let (weights, noise) = vars.split_at(vars.len() - 1);
    let (total, rec, kl) = sample_loss_on_tape(ctx, weights, noise[0], bands, geom, beta, u);
    let grads = tape.backward(total)?;
    let value = LossValue { total: total.item(), rec: rec.item(), kl: kl.item() };
    Ok((value, vars.iter().map(|v| grads.wrt(*v)).collect()))
}

/// Loss value only.
pub fn sample_loss(
    ctx: &LossContext<'_>,
    params: &[Tensor],
    bands: &BandReflectance,
    geom: &ViewGeometry,
    beta: f64,
    u: &[[f64; N_LATENT]],
) -> Result<LossValue> {
    let tape = Tape::new();
    let vars: Vec<Var<'_>> = params.iter().map(|p| tape.constant(p.clone())).collect();
    let (weights, noise) = vars.split_at(vars.len() - 1);
    let (total, rec, kl) = sample_loss_on_tape(ctx, weights, noise[0], bands, geom, beta, u);
    tape.check()?;
    Ok(LossValue { total: total.item(), rec: rec.item(), kl: kl.item() })
}

pub(crate) fn new_optimizer(cfg: &TrainConfig, model: &TrainedModel) -> Adam {
    let sizes: Vec<usize> = model.parameters().iter().map(|p| p.len()).collect();
    Adam::new(cfg.optimizer, &sizes)
}

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::params::{idx, N_LATENT, VARIABLES};
use crate::sail::ViewGeometry;
use crate::spectral::{BandReflectance, N_BANDS};

/// Ten band tokens followed by three angle tokens.
pub const N_TOKENS: usize = N_BANDS + 3;

const LN_EPS: f64 = 1e-5;
/// Floor added to the softplus of the raw width.
pub const SIGMA_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub d_ff: usize,
    pub n_latent: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { d_model: 32, heads: 4, layers: 2, d_ff: 64, n_latent: N_LATENT }
    }
}

impl EncoderConfig {
    /// Sizing in the range of the published model (about 0.8M weights).
    pub fn reference() -> Self {
        Self { d_model: 128, heads: 8, layers: 4, d_ff: 512, n_latent: N_LATENT }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.heads == 0 || self.layers == 0 || self.d_ff == 0 {
            return Err(Error::Config("encoder sizes must be positive".into()));
        }
        if self.d_model > 4096 || self.heads > 64 || self.layers > 64 || self.d_ff > 16384 {
            return Err(Error::Config("encoder sizes exceed d_model 4096, heads 64, layers 64, d_ff 16384".into()));
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return Err(Error::Config(format!("d_model {} is not divisible by heads {}", self.d_model, self.heads)));
        }
        if self.n_latent != N_LATENT {
            return Err(Error::Config(format!("n_latent must be {N_LATENT}, got {}", self.n_latent)));
        }
        Ok(())
    }

    /// Name and shape of every weight tensor, in storage order.
    pub fn layout(&self) -> Vec<(String, (usize, usize))> {
        let (d, f) = (self.d_model, self.d_ff);
        let mut out = vec![("lift.w".to_string(), (N_TOKENS, d)), ("lift.b".to_string(), (N_TOKENS, d))];
        for l in 0..self.layers {
            for (name, shape) in [
                ("ln1.g", (1, d)),
                ("ln1.b", (1, d)),
                ("attn.wq", (d, d)),
                ("attn.wk", (d, d)),
                ("attn.wv", (d, d)),
                ("attn.wo", (d, d)),
                ("attn.bo", (1, d)),
                ("ln2.g", (1, d)),
                ("ln2.b", (1, d)),
                ("ff.w1", (d, f)),
                ("ff.b1", (1, f)),
                ("ff.w2", (f, d)),
                ("ff.b2", (1, d)),
            ] {
                out.push((format!("layer{l}.{name}"), shape));
            }
        }
        out.push(("final_ln.g".to_string(), (1, d)));
        out.push(("final_ln.b".to_string(), (1, d)));
        out.push(("head.w".to_string(), (d, 2 * self.n_latent)));
        out.push(("head.b".to_string(), (1, 2 * self.n_latent)));
        out
    }

    pub fn weight_count(&self) -> usize {
        self.layout().iter().map(|(_, (r, c))| r * c).sum()
    }
}

const PER_LAYER: usize = 13;

/// Initial weights: Xavier-normal matrices, unit layer-norm gains, zero
/// biases; the head starts at posterior centre 0.5 and width `init_sigma`.
pub fn init_weights<R: Rng + ?Sized>(cfg: &EncoderConfig, init_sigma: f64, rng: &mut R) -> Vec<Tensor> {
    cfg.layout()
        .into_iter()
        .map(|(name, (r, c))| {
            let mut normal = |sd: f64| Array2::from_shape_simple_fn((r, c), || sd * rng.sample::<f64, _>(StandardNormal));
            let leaf = name.rsplit('.').next().unwrap_or_default();
            if name == "lift.w" {
                normal(1.0)
            } else if name == "head.w" {
                normal(0.01 / (r as f64).sqrt())
            } else if name == "head.b" {
                let raw = crate::special::softplus_inv(init_sigma - SIGMA_FLOOR);
                Array2::from_shape_fn((r, c), |(_, j)| if j < cfg.n_latent { 0.0 } else { raw })
            } else if leaf == "g" {
                Array2::ones((r, c))
            } else if r == 1 || name == "lift.b" {
                Array2::zeros((r, c))
            } else {
                normal((2.0 / (r + c) as f64).sqrt())
            }
        })
        .collect()
}

/// Fixed sinusoidal position codes, `N_TOKENS x d`.
pub fn positional_encoding(d: usize) -> Tensor {
    Array2::from_shape_fn((N_TOKENS, d), |(pos, i)| {
        let freq = 10_000f64.powf(-((2 * (i / 2)) as f64) / d as f64);
        let a = pos as f64 * freq;
        if i % 2 == 0 {
            a.sin()
        } else {
            a.cos()
        }
    })
}

/// Per-band centring and scaling of encoder inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub band_mean: [f64; N_BANDS],
    pub band_sd: [f64; N_BANDS],
}

impl Normalization {
    pub fn identity() -> Self {
        Self { band_mean: [0.0; N_BANDS], band_sd: [1.0; N_BANDS] }
    }

    /// Band statistics of a set of band vectors.
    pub fn fit<'a>(bands: impl Iterator<Item = &'a BandReflectance>) -> Result<Self> {
        let mut n = 0usize;
        let mut sum = [0.0; N_BANDS];
        let mut sq = [0.0; N_BANDS];
        for b in bands {
            n += 1;
            for k in 0..N_BANDS {
                sum[k] += b.0[k];
                sq[k] += b.0[k] * b.0[k];
            }
        }
        if n < 2 {
            return Err(Error::Data("at least two samples are needed to fit the input normalization".into()));
        }
        let nf = n as f64;
        let band_mean = sum.map(|s| s / nf);
        let band_sd = std::array::from_fn(|k| ((sq[k] - nf * band_mean[k] * band_mean[k]) / (nf - 1.0)).max(0.0).sqrt().max(1e-6));
        Ok(Self { band_mean, band_sd })
    }

    /// The thirteen scalar tokens.
    pub fn tokens(&self, bands: &BandReflectance, geom: &ViewGeometry) -> [f64; N_TOKENS] {
        let angles = [
            (geom.sun_zenith_deg, &VARIABLES[idx::SUN_ZENITH]),
            (geom.view_zenith_deg, &VARIABLES[idx::VIEW_ZENITH]),
            (geom.rel_azimuth_deg, &VARIABLES[idx::REL_AZIMUTH]),
        ];
        std::array::from_fn(|i| {
            if i < N_BANDS {
                (bands.0[i] - self.band_mean[i]) / self.band_sd[i]
            } else {
                let (a, info) = angles[i - N_BANDS];
                crate::params::scale_to_unit(a, info)
            }
        })
    }
}

fn layer_norm<'t>(x: Var<'t>, g: Var<'t>, b: Var<'t>) -> Var<'t> {
    let centred = x - x.mean_cols();
    let var = centred.square().mean_cols();
    centred / (var + LN_EPS).sqrt() * g + b
}

/// Posterior centres (`1 x n_latent`, in (0, 1)) and widths (`> 0`) for one
/// token vector. `w` follows [`EncoderConfig::layout`].
pub fn encode_on_tape<'t>(cfg: &EncoderConfig, w: &[Var<'t>], tokens: &[f64; N_TOKENS], pe: &Tensor) -> (Var<'t>, Var<'t>) {
    let tape: &'t Tape = w[0].tape();
    let x = tape.constant(Array2::from_shape_fn((N_TOKENS, 1), |(i, _)| tokens[i]));
    let mut h = x * w[0] + w[1] + tape.constant(pe.clone());
    let dh = cfg.d_model / cfg.heads;
    let scale = 1.0 / (dh as f64).sqrt();
    for l in 0..cfg.layers {
        let p = &w[2 + l * PER_LAYER..2 + (l + 1) * PER_LAYER];
        let n = layer_norm(h, p[0], p[1]);
        let (q, k, v) = (n.matmul(p[2]), n.matmul(p[3]), n.matmul(p[4]));
        let heads: Vec<Var<'t>> = (0..cfg.heads)
            .map(|hd| {
                let cols = hd * dh..(hd + 1) * dh;
                let qh = q.slice_cols(cols.start, cols.end);
                let kh = k.slice_cols(cols.start, cols.end);
                let vh = v.slice_cols(cols.start, cols.end);
                (qh.matmul(kh.t()) * scale).softmax_rows().matmul(vh)
            })
            .collect();
        h = h + Var::concat_cols(&heads).matmul(p[5]) + p[6];
        let n = layer_norm(h, p[7], p[8]);
        h = h + (n.matmul(p[9]) + p[10]).gelu().matmul(p[11]) + p[12];
    }
    let base = 2 + cfg.layers * PER_LAYER;
    let pooled = layer_norm(h.mean_rows(), w[base], w[base + 1]);
    let out = pooled.matmul(w[base + 2]) + w[base + 3];
    let mu = out.slice_cols(0, cfg.n_latent).logistic();
    let sigma = out.slice_cols(cfg.n_latent, 2 * cfg.n_latent).softplus() + SIGMA_FLOOR;
    (mu, sigma)
}

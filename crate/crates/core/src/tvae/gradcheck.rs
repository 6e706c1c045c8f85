use rand::Rng;

use super::{draw_uniforms, reconstruction_from_physical, sample_loss, sample_loss_and_grad, LossContext, TrainedModel};
use crate::autodiff::{relative_error, GradCheckReport, GradCheckRow, Tape};
use crate::error::Result;
use crate::forward::Prosail;
use crate::params::{idx, N_LATENT, VARIABLES};
use crate::sampler::SimulatedSample;

/// Steps of the five-point central differences for weights, relative to
/// `max(1, |x|)`. The loss is O(10³) while single weight gradients reach
/// O(10⁻⁶), so no single step keeps both round-off and truncation small. The
/// estimate used is the one with the least round-off bound plus disagreement
/// with its neighbouring step.
pub const WEIGHT_STEPS: [f64; 3] = [1e-2, 1e-3, 1e-4];
/// Round-off of one loss evaluation, in units of `ε |L|`.
const ROUNDOFF_ULPS: f64 = 64.0;
/// Step of the two-point central differences for physical latents, relative
/// to the variable's range width.
pub const LATENT_STEP: f64 = 1e-5;
/// Denominator floor of the relative error.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Finite-difference audit of one sample's loss.
#[derive(Debug, Clone)]
pub struct LossGradCheck {
    /// One random coordinate per optimized tensor; `index` is the tensor.
    pub weights: GradCheckReport,
    /// Reconstruction loss against each physical latent at the sample's true
    /// parameters, scaled by the range width; `index` is the variable.
    pub latents: GradCheckReport,
}

impl LossGradCheck {
    pub fn passed(&self) -> bool {
        self.weights.passed() && self.latents.passed()
    }

    pub fn worst_error(&self) -> f64 {
        self.weights.rows.iter().chain(&self.latents.rows).map(|r| r.rel_error).fold(0.0, f64::max)
    }
}

fn row(index: usize, analytic: f64, numeric: f64, tol: f64) -> GradCheckRow {
    let rel_error = relative_error(analytic, numeric, GRAD_CHECK_FLOOR);
    GradCheckRow { index, analytic, numeric, rel_error, pass: rel_error <= tol }
}

/// Compares reverse-mode gradients of the loss with central differences.
/// Latent coordinates whose stencil leaves the variable's range, or where
/// the soil spectrum may saturate, are left out.
pub fn check_loss_gradients<R: Rng + ?Sized>(
    prosail: &Prosail,
    model: &TrainedModel,
    sample: &SimulatedSample,
    beta: f64,
    tol: f64,
    rng: &mut R,
) -> Result<LossGradCheck> {
    let ctx = LossContext::new(prosail, model);
    let params = model.parameters();
    let (bands, geom) = (&sample.noisy_bands, sample.geometry());
    let u = draw_uniforms(rng, 1);
    let (_, grads) = sample_loss_and_grad(&ctx, &params, bands, &geom, beta, &u)?;
    let mut weights = Vec::with_capacity(params.len());
    for t in 0..params.len() {
        let k = rng.random_range(0..params[t].len());
        let x = params[t].as_slice().expect("contiguous")[k];
        let eval = |v: f64| -> Result<f64> {
            let mut p = params.clone();
            p[t].as_slice_mut().expect("contiguous")[k] = v;
            Ok(sample_loss(&ctx, &p, bands, &geom, beta, &u)?.total)
        };
        let scale = eval(x)?.abs().max(1.0);
        let mut est = [0.0; 3];
        let mut noise = [0.0; 3];
        for k in 0..3 {
            let h = WEIGHT_STEPS[k] * x.abs().max(1.0);
            est[k] = (8.0 * (eval(x + h)? - eval(x - h)?) - (eval(x + 2.0 * h)? - eval(x - 2.0 * h)?)) / (12.0 * h);
            noise[k] = ROUNDOFF_ULPS * f64::EPSILON * scale * 1.5 / h;
        }
        let err = |k: usize| noise[k] + (est[k] - est[if k == 2 { 1 } else { k + 1 }]).abs();
        let numeric = est[(0..3).min_by(|&a, &b| err(a).total_cmp(&err(b))).expect("three steps")];
        weights.push(row(t, grads[t].as_slice().expect("contiguous")[k], numeric, tol));
    }

    let log_sd = model.log_noise_sd;
    let z = sample.params.latent();
    let eval = |x: &[f64; N_LATENT]| -> Result<f64> {
        let tape = Tape::new();
        let vars: [_; N_LATENT] = std::array::from_fn(|i| tape.constant_scalar(x[i]));
        let loss = reconstruction_from_physical(prosail, &vars, &geom, bands, tape.constant_row(&log_sd));
        tape.check()?;
        Ok(loss.item())
    };
    let tape = Tape::new();
    let vars: [_; N_LATENT] = std::array::from_fn(|i| tape.scalar(z[i]));
    let loss = reconstruction_from_physical(prosail, &vars, &geom, bands, tape.constant_row(&log_sd));
    let g = tape.backward(loss)?;
    let mut latents = Vec::new();
    for i in 0..N_LATENT {
        let w = VARIABLES[i].width();
        let h = LATENT_STEP * w;
        let (mut hi, mut lo) = (z, z);
        hi[i] += h;
        lo[i] -= h;
        if !(VARIABLES[i].contains(hi[i]) && VARIABLES[i].contains(lo[i])) || (i == idx::SOIL_BRIGHT && z[i] > 1.5) {
            continue;
        }
        let numeric = (eval(&hi)? - eval(&lo)?) / (2.0 * h);
        latents.push(row(i, g.scalar(vars[i]) * w, numeric * w, tol));
    }
    Ok(LossGradCheck { weights: GradCheckReport { rows: weights, tol }, latents: GradCheckReport { rows: latents, tol } })
}

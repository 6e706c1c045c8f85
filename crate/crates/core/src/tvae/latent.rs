//! Truncated-normal latents on the unit box, recorded on the tape.
//!
//! Lanes whose centre lies above 0.5 are mirrored (`z -> 1 - z`), so the
//! standardized lower bound is never positive and `Φ` is evaluated on its
//! accurate side.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::autodiff::Var;
use crate::error::Result;
use crate::params::{scale_to_physical, VARIABLES};
use crate::truncnorm::TruncatedNormal;

const LN_SQRT_2PI_E: f64 = 1.418_938_533_204_672_7; // ln sqrt(2 pi e)

struct Mirrored<'t> {
    mask: Array2<bool>,
    mu: Var<'t>,
    alpha: Var<'t>,
    beta: Var<'t>,
    mass: Var<'t>,
}

fn mirrored<'t>(mu: Var<'t>, sigma: Var<'t>) -> Mirrored<'t> {
    let mask = mu.value().mapv(|m| m > 0.5);
    let mu = Var::select(&mask, 1.0 - mu, mu);
    let alpha = -mu / sigma;
    let beta = (1.0 - mu) / sigma;
    let mass = beta.normal_cdf() - alpha.normal_cdf();
    Mirrored { mask, mu, alpha, beta, mass }
}

/// Reparameterized draw `z = μ + σ Φ⁻¹(Φ(ā) + u (Φ(b̄) − Φ(ā)))` on [0, 1]
/// for fixed uniforms `u` in (0, 1).
pub fn tn_sample_on_tape<'t>(mu: Var<'t>, sigma: Var<'t>, u: &[f64]) -> Var<'t> {
    let tape = mu.tape();
    let m = mirrored(mu, sigma);
    let u = Array2::from_shape_fn(m.mask.dim(), |(_, j)| if m.mask[[0, j]] { 1.0 - u[j] } else { u[j] });
    let p = m.alpha.normal_cdf() + tape.constant(u) * m.mass;
    let z = m.mu + sigma * p.normal_quantile();
    Var::select(&m.mask, 1.0 - z, z).clamp(0.0, 1.0)
}

/// Per-lane `KL[TN(μ, σ; 0, 1) ‖ U(0, 1)] = −H`, `1 x n`.
pub fn kl_to_unit_uniform_on_tape<'t>(mu: Var<'t>, sigma: Var<'t>) -> Var<'t> {
    let m = mirrored(mu, sigma);
    let s = (m.alpha * m.alpha.normal_pdf() - m.beta * m.beta.normal_pdf()) / m.mass;
    -((sigma * m.mass).ln() + LN_SQRT_2PI_E + 0.5 * s)
}

/// Posterior of one variable in normalized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNormalSpec {
    pub mu: f64,
    pub sigma: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TruncatedNormalSpec {
    pub fn distribution(&self) -> Result<TruncatedNormal> {
        TruncatedNormal::new(self.mu, self.sigma, self.lower, self.upper)
    }
}

/// Encoder output: one truncated normal per latent, in parameter-vector
/// order, each on the normalized [0, 1] box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPosterior {
    pub specs: Vec<TruncatedNormalSpec>,
}

impl LatentPosterior {
    pub fn new(mu: &[f64], sigma: &[f64]) -> Self {
        Self {
            specs: mu
                .iter()
                .zip(sigma)
                .map(|(&mu, &sigma)| TruncatedNormalSpec { mu, sigma, lower: 0.0, upper: 1.0 })
                .collect(),
        }
    }

    /// Physical-units truncated normal of latent `i`.
    pub fn physical(&self, i: usize) -> Result<TruncatedNormal> {
        let info = &VARIABLES[i];
        let s = &self.specs[i];
        TruncatedNormal::new(
            scale_to_physical(s.mu, info),
            s.sigma * info.width(),
            info.lower,
            info.upper,
        )
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }
}

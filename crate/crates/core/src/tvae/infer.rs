use serde::{Deserialize, Serialize};

use super::{encode_on_tape, positional_encoding, LatentPosterior, TrainedModel};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::params::VARIABLES;
use crate::sail::ViewGeometry;
use crate::spectral::BandReflectance;

/// Nominal coverage of the reported central intervals.
pub const INTERVAL_LEVEL: f64 = 0.95;

/// Physical-units summary of one latent's posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableEstimate {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEstimate {
    pub variables: Vec<VariableEstimate>,
    pub posterior: LatentPosterior,
}

impl ParameterEstimate {
    pub fn get(&self, name: &str) -> Option<&VariableEstimate> {
        self.variables.iter().find(|v| v.name == name)
    }
}

/// Posterior over the normalized latents for one observation.
pub fn encode(model: &TrainedModel, bands: &BandReflectance, geom: &ViewGeometry) -> Result<LatentPosterior> {
    let angles = [geom.sun_zenith_deg, geom.view_zenith_deg, geom.rel_azimuth_deg];
    if bands.0.iter().chain(&angles).any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite band or angle value".into()));
    }
    let tape = Tape::new();
    let weights: Vec<Var<'_>> = model.weights.iter().map(|w| tape.constant(w.clone())).collect();
    let tokens = model.normalization.tokens(bands, geom);
    let (mu, sigma) = encode_on_tape(&model.encoder, &weights, &tokens, &positional_encoding(model.encoder.d_model));
    tape.check()?;
    let (mu, sigma) = (mu.value(), sigma.value());
    Ok(LatentPosterior::new(mu.as_slice().expect("row"), sigma.as_slice().expect("row")))
}

/// Posterior mean, sd and central interval of every latent, physical units.
pub fn infer(model: &TrainedModel, bands: &BandReflectance, geom: &ViewGeometry) -> Result<ParameterEstimate> {
    let posterior = encode(model, bands, geom)?;
    let tail = 0.5 * (1.0 - INTERVAL_LEVEL);
    let variables = (0..posterior.len())
        .map(|i| {
            let tn = posterior.physical(i)?;
            Ok(VariableEstimate {
                name: VARIABLES[i].name.to_string(),
                mean: tn.mean(),
                sd: tn.variance().sqrt(),
                lower: tn.quantile(tail),
                upper: tn.quantile(1.0 - tail),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ParameterEstimate { variables, posterior })
}

//! Physics-informed Transformer VAE for canopy trait retrieval.
//!
//! The PROSPECT-5 leaf model and the 4SAIL canopy model form a fixed,
//! differentiable decoder. A Transformer encoder maps ten Sentinel-2 band
//! reflectances plus the sun/view geometry to truncated-normal posteriors over
//! the eleven leaf and canopy variables; training uses simulated data only.

pub mod autodiff;
pub mod special;
pub mod error;
pub mod forward;
pub mod metrics;
pub mod params;
pub mod prospect;
pub mod sampler;
pub mod sail;
pub mod spectral;
pub mod truncnorm;
pub mod tvae;

pub use error::{Error, Result};

#[cfg(test)]
mod testutil;

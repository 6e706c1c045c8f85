//! 4SAIL canopy reflectance and the two-parameter soil model.

mod foursail;
mod lidf;

pub use foursail::{foursail_on_tape, volscatt, CanopyVars, SailGeometry};
pub use lidf::{lidf_on_tape, lidf_weights, LIDF_CLASSES};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::prospect::LeafOptics;
use crate::spectral::{SoilBasis, SpectrumCurve};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanopyParams {
    pub lai: f64,
    pub ala_deg: f64,
    pub hotspot: f64,
    /// Weight of the wet soil end member.
    pub soil_wet: f64,
    pub soil_bright: f64,
}

impl CanopyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lai >= 0.0) || !self.lai.is_finite() {
            return Err(Error::Domain(format!("LAI = {} must be non-negative", self.lai)));
        }
        if !(self.ala_deg > 0.0 && self.ala_deg < 90.0) {
            return Err(Error::Domain(format!("mean leaf angle {} outside (0, 90)", self.ala_deg)));
        }
        if !(self.hotspot >= 0.0) || !self.hotspot.is_finite() {
            return Err(Error::Domain(format!("hotspot {} must be non-negative", self.hotspot)));
        }
        if !(0.0..=1.0).contains(&self.soil_wet) {
            return Err(Error::Domain(format!("soil wetness {} outside [0, 1]", self.soil_wet)));
        }
        if !(self.soil_bright > 0.0) || !self.soil_bright.is_finite() {
            return Err(Error::Domain(format!("soil brightness {} must be positive", self.soil_bright)));
        }
        Ok(())
    }
}

/// Sun and sensor angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewGeometry {
    pub sun_zenith_deg: f64,
    pub view_zenith_deg: f64,
    pub rel_azimuth_deg: f64,
}

impl ViewGeometry {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sun zenith", self.sun_zenith_deg), ("view zenith", self.view_zenith_deg)] {
            if !(0.0..90.0).contains(&v) {
                return Err(Error::Domain(format!("{name} {v} outside [0, 90)")));
            }
        }
        if !self.rel_azimuth_deg.is_finite() {
            return Err(Error::Domain("relative azimuth must be finite".into()));
        }
        Ok(())
    }
}

/// `r_S (ρ_S wet + (1 - ρ_S) dry)` clipped to `[0, 1]`; the gradient is zero
/// where the clip is active.
pub fn soil_on_tape<'t>(soil_wet: Var<'t>, soil_bright: Var<'t>, dry: &Tensor, wet: &Tensor) -> Var<'t> {
    let tape = soil_wet.tape();
    let mix = soil_wet * tape.constant(wet.clone()) + (1.0 - soil_wet) * tape.constant(dry.clone());
    (soil_bright * mix).clamp(0.0, 1.0)
}

pub fn soil_spectrum(soil_wet: f64, soil_bright: f64, basis: &SoilBasis) -> SpectrumCurve {
    let values = basis
        .dry
        .values
        .iter()
        .zip(&basis.wet.values)
        .map(|(&d, &w)| (soil_bright * (soil_wet * w + (1.0 - soil_wet) * d)).clamp(0.0, 1.0))
        .collect();
    SpectrumCurve { grid: basis.dry.grid, values }
}

/// Canopy reflectance on the leaf-optics grid. `LAI = 0` returns `soil`
/// unchanged.
pub fn sail4(leaf: &LeafOptics, canopy: &CanopyParams, geom: &ViewGeometry, soil: &SpectrumCurve) -> Result<SpectrumCurve> {
    canopy.validate()?;
    geom.validate()?;
    let grid = leaf.reflectance.grid;
    if leaf.transmittance.grid != grid || soil.grid != grid {
        return Err(Error::GridMismatch("leaf optics and soil must share one grid".into()));
    }
    if canopy.lai == 0.0 {
        return Ok(soil.clone());
    }
    let tape = Tape::new();
    let row = |v: &[f64]| Array2::from_shape_vec((1, v.len()), v.to_vec()).expect("row");
    let rho = tape.constant(row(&leaf.reflectance.values));
    let tau = tape.constant(row(&leaf.transmittance.values));
    let soil_row = tape.constant(row(&soil.values));
    let vars = CanopyVars {
        lai: tape.constant_scalar(canopy.lai),
        ala_deg: tape.constant_scalar(canopy.ala_deg),
        hotspot: tape.constant_scalar(canopy.hotspot),
    };
    let out = foursail_on_tape(rho, tau, &vars, &SailGeometry::new(geom, LIDF_CLASSES), soil_row);
    tape.check()?;
    SpectrumCurve::new(grid, out.to_vec())
}

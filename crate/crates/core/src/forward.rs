//! The PROSPECT-5 + 4SAIL forward operator from parameters to band
//! reflectance.

use ndarray::Array2;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::Result;
use crate::params::{idx, ParameterVector, N_LATENT};
use crate::prospect::{prospect5, prospect5_on_tape, LeafConstants, LeafVars};
use crate::sail::{foursail_on_tape, sail4, soil_on_tape, soil_spectrum, CanopyVars, SailGeometry, ViewGeometry, LIDF_CLASSES};
use crate::spectral::{convolve_to_bands, Assets, BandReflectance, SpectrumCurve, N_BANDS};

/// Forward operator restricted to the wavelengths where some band responds.
#[derive(Debug, Clone)]
pub struct Prosail {
    lanes: Vec<usize>,
    leaf: LeafConstants,
    dry: Tensor,
    wet: Tensor,
    /// `lanes x N_BANDS`, each column summing to one.
    band_matrix: Tensor,
}

impl Prosail {
    pub fn new(assets: &Assets) -> Self {
        let lanes = assets.srf.support();
        let row = |c: &SpectrumCurve| Array2::from_shape_fn((1, lanes.len()), |(_, j)| c.values[lanes[j]]);
        Self {
            leaf: LeafConstants::new(&assets.tables, &lanes),
            dry: row(&assets.soil.dry),
            wet: row(&assets.soil.wet),
            band_matrix: assets.srf.weight_matrix(&lanes),
            lanes,
        }
    }

    /// Grid indices evaluated.
    pub fn lanes(&self) -> &[usize] {
        &self.lanes
    }

    /// Band reflectance (`1 x N_BANDS`) for the eleven leaf and canopy
    /// variables in physical units, in parameter-vector order. Geometry is a
    /// fixed input.
    pub fn bands_on_tape<'t>(&self, latent: &[Var<'t>; N_LATENT], geom: &ViewGeometry) -> Var<'t> {
        let tape = latent[0].tape();
        let leaf = LeafVars {
            n_struct: latent[idx::N],
            cab: latent[idx::CAB],
            car: latent[idx::CAR],
            cbrown: latent[idx::CBROWN],
            cw: latent[idx::CW],
            cm: latent[idx::CM],
        };
        let soil = soil_on_tape(latent[idx::SOIL_WET], latent[idx::SOIL_BRIGHT], &self.dry, &self.wet);
        let lai = latent[idx::LAI];
        let spectrum = if lai.item() <= 0.0 {
            soil
        } else {
            let (rho, tau) = prospect5_on_tape(&leaf, &self.leaf);
            let canopy = CanopyVars { lai, ala_deg: latent[idx::ALA], hotspot: latent[idx::HOTSPOT] };
            foursail_on_tape(rho, tau, &canopy, &SailGeometry::new(geom, LIDF_CLASSES), soil)
        };
        spectrum.matmul(tape.constant(self.band_matrix.clone()))
    }

    pub fn bands(&self, pv: &ParameterVector) -> Result<BandReflectance> {
        pv.leaf.validate()?;
        pv.canopy.validate()?;
        pv.geometry.validate()?;
        let tape = Tape::new();
        let a = pv.to_array();
        let latent: [Var<'_>; N_LATENT] = std::array::from_fn(|i| tape.constant_scalar(a[i]));
        let out = self.bands_on_tape(&latent, &pv.geometry);
        tape.check()?;
        let v = out.to_vec();
        debug_assert_eq!(v.len(), N_BANDS);
        Ok(BandReflectance(std::array::from_fn(|i| v[i])))
    }
}

/// Canopy reflectance on the full model grid.
pub fn prosail_spectrum(pv: &ParameterVector, assets: &Assets) -> Result<SpectrumCurve> {
    pv.canopy.validate()?;
    let soil = soil_spectrum(pv.canopy.soil_wet, pv.canopy.soil_bright, &assets.soil);
    if pv.canopy.lai == 0.0 {
        pv.leaf.validate()?;
        pv.geometry.validate()?;
        return Ok(soil);
    }
    let leaf = prospect5(&pv.leaf, &assets.tables)?;
    sail4(&leaf, &pv.canopy, &pv.geometry, &soil)
}

/// Band reflectance of one parameter vector over the full grid.
pub fn prosail_forward(pv: &ParameterVector, assets: &Assets) -> Result<BandReflectance> {
    convolve_to_bands(&prosail_spectrum(pv, assets)?, &assets.srf)
}

#[cfg(test)]
mod tests;

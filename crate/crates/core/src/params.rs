//! The fourteen simulation variables, their physical ranges and prior families.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prospect::LeafParams;
use crate::sail::{CanopyParams, ViewGeometry};

/// Number of variables the encoder infers (all but the three angles).
pub const N_LATENT: usize = 11;
pub const N_PARAMS: usize = 14;

/// Index of each variable in [`ParameterVector::to_array`] order.
pub mod idx {
    pub const N: usize = 0;
    pub const CAB: usize = 1;
    pub const CAR: usize = 2;
    pub const CBROWN: usize = 3;
    pub const CW: usize = 4;
    pub const CM: usize = 5;
    pub const LAI: usize = 6;
    pub const ALA: usize = 7;
    pub const HOTSPOT: usize = 8;
    pub const SOIL_WET: usize = 9;
    pub const SOIL_BRIGHT: usize = 10;
    pub const SUN_ZENITH: usize = 11;
    pub const VIEW_ZENITH: usize = 12;
    pub const REL_AZIMUTH: usize = 13;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    TruncatedNormal,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariableInfo {
    pub name: &'static str,
    pub unit: &'static str,
    pub family: Family,
    pub lower: f64,
    pub upper: f64,
}

impl VariableInfo {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.lower..=self.upper).contains(&x)
    }
}

const fn var(name: &'static str, unit: &'static str, family: Family, lower: f64, upper: f64) -> VariableInfo {
    VariableInfo { name, unit, family, lower, upper }
}

use Family::{TruncatedNormal as TN, Uniform as U};

/// Physical ranges and prior families, in parameter-vector order.
pub const VARIABLES: [VariableInfo; N_PARAMS] = [
    var("N", "-", TN, 1.2, 1.8),
    var("Cab", "ug/cm2", TN, 20.0, 90.0),
    var("Car", "ug/cm2", TN, 5.0, 23.0),
    var("Cbrown", "-", TN, 0.0, 2.0),
    var("Cw", "cm", TN, 0.0075, 0.075),
    var("Cm", "g/cm2", TN, 0.003, 0.011),
    var("LAI", "-", TN, 0.0, 10.0),
    var("ALA", "deg", TN, 30.0, 80.0),
    var("hotspot", "-", TN, 0.0, 0.5),
    var("soil_wet", "-", U, 0.0, 1.0),
    var("soil_bright", "-", TN, 0.3, 3.5),
    var("sun_zenith", "deg", U, 15.0, 60.0),
    var("view_zenith", "deg", U, 0.0, 10.0),
    var("rel_azimuth", "deg", U, 0.0, 180.0),
];

pub fn variable_index(name: &str) -> Option<usize> {
    VARIABLES.iter().position(|v| v.name == name)
}

/// Affine map from the unit interval to the variable's physical range.
pub fn scale_to_physical(z_norm: f64, info: &VariableInfo) -> f64 {
    info.lower + z_norm * info.width()
}

pub fn scale_to_unit(x: f64, info: &VariableInfo) -> f64 {
    (x - info.lower) / info.width()
}

/// One complete forward-model input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub leaf: LeafParams,
    pub canopy: CanopyParams,
    pub geometry: ViewGeometry,
}

impl ParameterVector {
    pub fn to_array(&self) -> [f64; N_PARAMS] {
        let l = &self.leaf;
        let c = &self.canopy;
        let g = &self.geometry;
        [
            l.n_struct,
            l.cab,
            l.car,
            l.cbrown,
            l.cw,
            l.cm,
            c.lai,
            c.ala_deg,
            c.hotspot,
            c.soil_wet,
            c.soil_bright,
            g.sun_zenith_deg,
            g.view_zenith_deg,
            g.rel_azimuth_deg,
        ]
    }

    pub fn from_array(a: &[f64; N_PARAMS]) -> Self {
        Self {
            leaf: LeafParams { n_struct: a[0], cab: a[1], car: a[2], cbrown: a[3], cw: a[4], cm: a[5] },
            canopy: CanopyParams { lai: a[6], ala_deg: a[7], hotspot: a[8], soil_wet: a[9], soil_bright: a[10] },
            geometry: ViewGeometry { sun_zenith_deg: a[11], view_zenith_deg: a[12], rel_azimuth_deg: a[13] },
        }
    }

    /// Every variable at the midpoint of its range.
    pub fn midpoint() -> Self {
        let mut a = [0.0; N_PARAMS];
        for (x, v) in a.iter_mut().zip(&VARIABLES) {
            *x = v.midpoint();
        }
        Self::from_array(&a)
    }

    pub fn latent(&self) -> [f64; N_LATENT] {
        let a = self.to_array();
        std::array::from_fn(|i| a[i])
    }

    /// Fails with the first variable outside its range.
    pub fn check_bounds(&self) -> Result<()> {
        for (x, v) in self.to_array().iter().zip(&VARIABLES) {
            if !v.contains(*x) {
                return Err(Error::Domain(format!("{} = {x} outside [{}, {}]", v.name, v.lower, v.upper)));
            }
        }
        Ok(())
    }
}

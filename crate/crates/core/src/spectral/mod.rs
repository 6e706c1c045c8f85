//! Wavelength grids, spectral assets and band convolution.

pub(crate) mod assets;
mod srf;
mod table;

pub use assets::{parse_manifest, Assets, AssetChecksums, ASSET_DIR_ENV, ASSET_FILES};
pub use srf::{convolve_to_bands, load_srf, parse_srf, SensorResponse};
pub use table::NumericTable;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, Error, Result};

/// Number of Sentinel-2 bands in the observation vector.
pub const N_BANDS: usize = 10;

/// Sentinel-2 band identifiers in storage order.
pub const BAND_IDS: [&str; N_BANDS] = ["B02", "B03", "B04", "B05", "B06", "B07", "B08", "B8A", "B11", "B12"];

/// Wavelength range the model grid is clamped to.
pub const MODEL_MIN_NM: f64 = 400.0;
pub const MODEL_MAX_NM: f64 = 2500.0;

/// Uniform wavelength grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub start_nm: f64,
    pub step_nm: f64,
    pub count: usize,
}

impl SpectralGrid {
    pub fn new(start_nm: f64, step_nm: f64, count: usize) -> Result<Self> {
        if !(step_nm > 0.0) || count < 2 || !start_nm.is_finite() {
            return Err(Error::Domain(format!(
                "invalid grid: start {start_nm}, step {step_nm}, count {count}"
            )));
        }
        Ok(Self { start_nm, step_nm, count })
    }

    /// 1 nm grid over the intersection of `[first, last]` with the model range.
    pub fn model(first_nm: f64, last_nm: f64) -> Result<Self> {
        let start = first_nm.max(MODEL_MIN_NM).ceil();
        let end = last_nm.min(MODEL_MAX_NM).floor();
        if end < start + 1.0 {
            return Err(Error::Domain(format!(
                "coverage [{first_nm}, {last_nm}] nm leaves fewer than 2 model wavelengths"
            )));
        }
        Self::new(start, 1.0, (end - start) as usize + 1)
    }

    pub fn wavelength(&self, i: usize) -> f64 {
        self.start_nm + self.step_nm * i as f64
    }

    pub fn wavelengths(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.wavelength(i)).collect()
    }

    pub fn end_nm(&self) -> f64 {
        self.wavelength(self.count - 1)
    }

    /// Index of the grid point nearest to `nm`, if inside the grid.
    pub fn index_of(&self, nm: f64) -> Option<usize> {
        let x = ((nm - self.start_nm) / self.step_nm).round();
        (x >= 0.0 && (x as usize) < self.count).then_some(x as usize)
    }
}

/// Values sampled on a [`SpectralGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCurve {
    pub grid: SpectralGrid,
    pub values: Vec<f64>,
}

impl SpectrumCurve {
    pub fn new(grid: SpectralGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.count {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {}",
                values.len(),
                grid.count
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: SpectralGrid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.count] }
    }

    pub fn at(&self, nm: f64) -> Option<f64> {
        self.grid.index_of(nm).map(|i| self.values[i])
    }

    /// Linear interpolation onto `grid`; `fill` outside the source support.
    pub fn resample(&self, grid: SpectralGrid, fill: Option<f64>) -> Result<Self> {
        if self.grid == grid {
            return Ok(self.clone());
        }
        let xs = self.grid.wavelengths();
        resample_points(&xs, &self.values, grid, fill)
    }
}

/// Linear interpolation of `(xs, ys)` onto `grid`. `xs` must be strictly
/// ascending. Without `fill`, every grid point must lie inside `xs`.
pub fn resample_points(xs: &[f64], ys: &[f64], grid: SpectralGrid, fill: Option<f64>) -> Result<SpectrumCurve> {
    debug_assert_eq!(xs.len(), ys.len());
    let mut out = Vec::with_capacity(grid.count);
    let mut j = 0;
    for i in 0..grid.count {
        let x = grid.wavelength(i);
        let v = if x < xs[0] || x > xs[xs.len() - 1] {
            fill.ok_or_else(|| {
                Error::Domain(format!("wavelength {x} nm outside source coverage [{}, {}]", xs[0], xs[xs.len() - 1]))
            })?
        } else {
            while j + 1 < xs.len() - 1 && xs[j + 1] < x {
                j += 1;
            }
            let (x0, x1) = (xs[j], xs[j + 1]);
            if x == x0 {
                ys[j]
            } else if x == x1 {
                ys[j + 1]
            } else {
                let w = (x - x0) / (x1 - x0);
                (1.0 - w) * ys[j] + w * ys[j + 1]
            }
        };
        out.push(v);
    }
    SpectrumCurve::new(grid, out)
}

/// Band-averaged reflectance in the fixed band order of the sensor file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandReflectance(pub [f64; N_BANDS]);

impl BandReflectance {
    pub fn values(&self) -> &[f64; N_BANDS] {
        &self.0
    }
}

/// Specific absorption coefficients and refractive index of the leaf model.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafCoefficientTables {
    pub refractive_index: SpectrumCurve,
    pub k_cab: SpectrumCurve,
    pub k_car: SpectrumCurve,
    pub k_brown: SpectrumCurve,
    pub k_cw: SpectrumCurve,
    pub k_cm: SpectrumCurve,
}

impl LeafCoefficientTables {
    pub fn grid(&self) -> SpectralGrid {
        self.refractive_index.grid
    }

    /// Parses `wavelength n k_cab k_car k_brown k_cw k_cm` rows.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let table = NumericTable::parse(text, source_name)?;
        if table.width() != 7 {
            return Err(Error::parse(
                source_name,
                table.rows[0].0,
                format!("expected 7 columns (wavelength n k_cab k_car k_brown k_cw k_cm), found {}", table.width()),
            ));
        }
        table.check_ascending(source_name)?;
        for (line, row) in &table.rows {
            if row[1] <= 1.0 {
                return Err(Error::parse(source_name, *line, format!("refractive index {} must exceed 1", row[1])));
            }
            if let Some(j) = row[2..].iter().position(|&v| v < 0.0) {
                const NAMES: [&str; 5] = ["k_cab", "k_car", "k_brown", "k_cw", "k_cm"];
                return Err(Error::parse(
                    source_name,
                    *line,
                    format!("negative absorption coefficient {} = {}", NAMES[j], row[2 + j]),
                ));
            }
        }
        let xs = table.column(0);
        let grid = SpectralGrid::model(xs[0], xs[xs.len() - 1])?;
        let curve = |j: usize| resample_points(&xs, &table.column(j), grid, None);
        Ok(Self {
            refractive_index: curve(1)?,
            k_cab: curve(2)?,
            k_car: curve(3)?,
            k_brown: curve(4)?,
            k_cw: curve(5)?,
            k_cm: curve(6)?,
        })
    }
}

pub fn load_coefficient_tables(path: &Path) -> Result<LeafCoefficientTables> {
    LeafCoefficientTables::parse(&read_to_string(path)?, &path.display().to_string())
}

/// Dry and wet soil reflectance end members.
#[derive(Debug, Clone, PartialEq)]
pub struct SoilBasis {
    pub dry: SpectrumCurve,
    pub wet: SpectrumCurve,
}

impl SoilBasis {
    /// Parses `wavelength dry wet` rows and resamples onto `grid`.
    pub fn parse(text: &str, source_name: &str, grid: SpectralGrid) -> Result<Self> {
        let table = NumericTable::parse(text, source_name)?;
        if table.width() != 3 {
            return Err(Error::parse(
                source_name,
                table.rows[0].0,
                format!("expected 3 columns (wavelength dry wet), found {}", table.width()),
            ));
        }
        table.check_ascending(source_name)?;
        for (line, row) in &table.rows {
            if row[1..].iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::parse(source_name, *line, "soil reflectance outside [0, 1]"));
            }
        }
        let xs = table.column(0);
        Ok(Self {
            dry: resample_points(&xs, &table.column(1), grid, None)?,
            wet: resample_points(&xs, &table.column(2), grid, None)?,
        })
    }
}

pub fn load_soil_basis(path: &Path, grid: SpectralGrid) -> Result<SoilBasis> {
    SoilBasis::parse(&read_to_string(path)?, &path.display().to_string(), grid)
}

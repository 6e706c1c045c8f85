use std::path::Path;

use ndarray::Array2;

use super::{resample_points, BandReflectance, NumericTable, SpectralGrid, SpectrumCurve, N_BANDS};
use crate::error::{read_to_string, Error, Result};

/// Per-band spectral response weights on the model grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorResponse {
    pub bands: Vec<(String, SpectrumCurve)>,
}

impl SensorResponse {
    /// Validates band count, shared grid, non-negative weights and positive
    /// normalizers.
    pub fn new(bands: Vec<(String, SpectrumCurve)>) -> Result<Self> {
        if bands.len() != N_BANDS {
            let ids: Vec<&str> = bands.iter().map(|(id, _)| id.as_str()).collect();
            return Err(Error::Data(format!(
                "expected {N_BANDS} bands, found {}: {}",
                bands.len(),
                ids.join(", ")
            )));
        }
        let grid = bands[0].1.grid;
        for (id, w) in &bands {
            if w.grid != grid {
                return Err(Error::GridMismatch(format!("band {id} is not on the shared grid")));
            }
            if w.values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(Error::Data(format!("band {id} has a negative or non-finite weight")));
            }
            if !(w.values.iter().sum::<f64>() > 0.0) {
                return Err(Error::Data(format!("band {id} has no positive weight")));
            }
        }
        Ok(Self { bands })
    }

    pub fn grid(&self) -> SpectralGrid {
        self.bands[0].1.grid
    }

    pub fn ids(&self) -> Vec<&str> {
        self.bands.iter().map(|(id, _)| id.as_str()).collect()
    }

    /// `Σ_λ w_b(λ) · step` per band.
    pub fn normalizers(&self) -> Vec<f64> {
        let step = self.grid().step_nm;
        self.bands.iter().map(|(_, w)| w.values.iter().sum::<f64>() * step).collect()
    }

    /// Grid indices where at least one band has positive weight, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.grid().count)
            .filter(|&i| self.bands.iter().any(|(_, w)| w.values[i] > 0.0))
            .collect()
    }

    /// `lanes.len() x N_BANDS` matrix of weights divided by each band's total,
    /// so that `spectrum(1 x lanes) · M` is the band vector when `lanes`
    /// covers the support.
    pub fn weight_matrix(&self, lanes: &[usize]) -> Array2<f64> {
        let mut m = Array2::zeros((lanes.len(), N_BANDS));
        for (b, (_, w)) in self.bands.iter().enumerate() {
            let total: f64 = w.values.iter().sum();
            for (r, &i) in lanes.iter().enumerate() {
                m[[r, b]] = w.values[i] / total;
            }
        }
        m
    }
}

/// Parses a wide CSV: header `wavelength,<band ids...>`, one row per
/// wavelength. Weights are resampled onto `grid` with zeros outside their
/// support.
pub fn parse_srf(text: &str, source_name: &str, grid: SpectralGrid) -> Result<SensorResponse> {
    let table = NumericTable::parse(text, source_name)?;
    let header = table
        .header
        .as_ref()
        .ok_or_else(|| Error::parse(source_name, 0, "missing header line naming the bands"))?;
    table.check_ascending(source_name)?;
    for (line, row) in &table.rows {
        if row[1..].iter().any(|&v| v < 0.0) {
            return Err(Error::parse(source_name, *line, "negative response weight"));
        }
    }
    let xs = table.column(0);
    let bands = header[1..]
        .iter()
        .enumerate()
        .map(|(j, id)| Ok((id.clone(), resample_points(&xs, &table.column(j + 1), grid, Some(0.0))?)))
        .collect::<Result<Vec<_>>>()?;
    SensorResponse::new(bands)
}

pub fn load_srf(path: &Path, grid: SpectralGrid) -> Result<SensorResponse> {
    parse_srf(&read_to_string(path)?, &path.display().to_string(), grid)
}

/// `b = Σ w_b(λ) ρ(λ) / Σ w_b(λ)` per band.
pub fn convolve_to_bands(spectrum: &SpectrumCurve, srf: &SensorResponse) -> Result<BandReflectance> {
    if spectrum.grid != srf.grid() {
        return Err(Error::GridMismatch(format!(
            "spectrum grid {:?} differs from response grid {:?}",
            spectrum.grid,
            srf.grid()
        )));
    }
    let mut out = [0.0; N_BANDS];
    for (o, (_, w)) in out.iter_mut().zip(&srf.bands) {
        let (num, den) = w
            .values
            .iter()
            .zip(&spectrum.values)
            .fold((0.0, 0.0), |(n, d), (&w, &r)| (n + w * r, d + w));
        *o = num / den;
    }
    Ok(BandReflectance(out))
}

//! Field-record CSV files.
//!
//! Header (case-insensitive): `site,date,b02,b03,b04,b05,b06,b07,b08,b8a,b11,b12,
//! sun_zen,view_zen,rel_az,lai,ccc,ccc_unit,lai_sd`. Empty cells are missing
//! values. For inference inputs the four truth columns may be omitted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sail::ViewGeometry;
use crate::sampler::SimulatedSample;
use crate::spectral::{BandReflectance, BAND_IDS, N_BANDS};

const ID_COLUMNS: [&str; 2] = ["site", "date"];
const ANGLE_COLUMNS: [&str; 3] = ["sun_zen", "view_zen", "rel_az"];
const TRUTH_COLUMNS: [&str; 4] = ["lai", "ccc", "ccc_unit", "lai_sd"];

pub fn field_columns() -> Vec<String> {
    ID_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(BAND_IDS.iter().map(|b| b.to_ascii_lowercase()))
        .chain(ANGLE_COLUMNS.iter().chain(&TRUTH_COLUMNS).map(|s| s.to_string()))
        .collect()
}

/// Chlorophyll-per-ground-area unit declared in a field file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CccUnit {
    /// µg cm⁻², the unit of `LAI · Cab`.
    MicrogramPerSquareCentimetre,
    MilligramPerSquareMetre,
    GramPerSquareMetre,
}

impl CccUnit {
    pub fn parse(s: &str) -> Option<Self> {
        let key: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
        match key.replace('µ', "u").as_str() {
            "ug/cm2" | "ugcm-2" | "ug/cm^2" => Some(Self::MicrogramPerSquareCentimetre),
            "mg/m2" | "mgm-2" | "mg/m^2" => Some(Self::MilligramPerSquareMetre),
            "g/m2" | "gm-2" | "g/m^2" => Some(Self::GramPerSquareMetre),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::MicrogramPerSquareCentimetre => "ug/cm2",
            Self::MilligramPerSquareMetre => "mg/m2",
            Self::GramPerSquareMetre => "g/m2",
        }
    }

    /// Multiplier taking µg cm⁻² to this unit.
    pub fn from_ug_per_cm2(self) -> f64 {
        match self {
            Self::MicrogramPerSquareCentimetre => 1.0,
            Self::MilligramPerSquareMetre => 10.0,
            Self::GramPerSquareMetre => 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    pub site: String,
    pub date: String,
    pub bands: BandReflectance,
    pub geometry: ViewGeometry,
    pub lai: Option<f64>,
    pub ccc: Option<f64>,
    pub ccc_unit: Option<CccUnit>,
    pub lai_sd: Option<f64>,
}

impl FieldRecord {
    pub fn has_truth(&self) -> bool {
        self.lai.is_some() || self.ccc.is_some()
    }

    /// Record whose truth is the simulated LAI and `LAI · Cab`.
    pub fn from_simulated(site: &str, date: &str, s: &SimulatedSample) -> Self {
        Self {
            site: site.to_string(),
            date: date.to_string(),
            bands: s.noisy_bands,
            geometry: s.params.geometry,
            lai: Some(s.params.canopy.lai),
            ccc: Some(s.params.canopy.lai * s.params.leaf.cab),
            ccc_unit: Some(CccUnit::MicrogramPerSquareCentimetre),
            lai_sd: None,
        }
    }
}

/// Rows that parsed, plus the 1-based line number and reason of each row
/// that did not.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedRecords {
    pub records: Vec<FieldRecord>,
    pub malformed: Vec<(usize, String)>,
}

struct Columns {
    site: usize,
    date: usize,
    bands: [usize; N_BANDS],
    angles: [usize; 3],
    truth: [Option<usize>; 4],
}

fn locate(header: &csv::StringRecord, name: &str, require_truth: bool) -> Result<Columns> {
    let names: Vec<String> = header.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    let find = |c: &str| names.iter().position(|n| n == c);
    let need = |c: &str| find(c).ok_or_else(|| Error::parse(name, 1, format!("missing column `{c}`")));
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(Error::parse(name, 1, format!("duplicate column `{n}`")));
        }
    }
    let mut bands = [0; N_BANDS];
    for (k, b) in BAND_IDS.iter().enumerate() {
        bands[k] = need(&b.to_ascii_lowercase())?;
    }
    let truth = TRUTH_COLUMNS.map(find);
    if require_truth {
        for (c, t) in TRUTH_COLUMNS.iter().zip(&truth) {
            if t.is_none() {
                return Err(Error::parse(name, 1, format!("missing column `{c}`")));
            }
        }
    }
    Ok(Columns {
        site: need("site")?,
        date: need("date")?,
        bands,
        angles: [need("sun_zen")?, need("view_zen")?, need("rel_az")?],
        truth,
    })
}

fn number(row: &csv::StringRecord, col: usize, what: &str) -> std::result::Result<Option<f64>, String> {
    let cell = row.get(col).unwrap_or("").trim();
    if cell.is_empty() {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(format!("{what}: `{cell}` is not a finite number")),
    }
}

fn required(row: &csv::StringRecord, col: usize, what: &str) -> std::result::Result<f64, String> {
    number(row, col, what)?.ok_or_else(|| format!("{what} is empty"))
}

fn record(row: &csv::StringRecord, c: &Columns) -> std::result::Result<FieldRecord, String> {
    let mut bands = [0.0; N_BANDS];
    for (k, &col) in c.bands.iter().enumerate() {
        let v = required(row, col, BAND_IDS[k])?;
        if !(0.0..=1.0).contains(&v) {
            return Err(format!("{} reflectance {v} outside [0, 1]", BAND_IDS[k]));
        }
        bands[k] = v;
    }
    let [sun, view, rel] = [0, 1, 2].map(|k| required(row, c.angles[k], ANGLE_COLUMNS[k]));
    let geometry = ViewGeometry { sun_zenith_deg: sun?, view_zenith_deg: view?, rel_azimuth_deg: rel? };
    if !(0.0..90.0).contains(&geometry.sun_zenith_deg) || !(0.0..90.0).contains(&geometry.view_zenith_deg) {
        return Err("zenith angles must lie in [0, 90)".into());
    }
    let opt = |k: usize| match c.truth[k] {
        Some(col) => number(row, col, TRUTH_COLUMNS[k]),
        None => Ok(None),
    };
    let lai = opt(0)?;
    let ccc = opt(1)?;
    let lai_sd = opt(3)?;
    let unit_cell = c.truth[2].and_then(|col| row.get(col)).unwrap_or("").trim();
    let ccc_unit = if unit_cell.is_empty() {
        None
    } else {
        Some(CccUnit::parse(unit_cell).ok_or_else(|| format!("unknown ccc_unit `{unit_cell}`"))?)
    };
    if ccc.is_some() && ccc_unit.is_none() {
        return Err("ccc given without ccc_unit".into());
    }
    if lai.is_some_and(|v| v < 0.0) || ccc.is_some_and(|v| v < 0.0) || lai_sd.is_some_and(|v| v < 0.0) {
        return Err("negative lai, ccc or lai_sd".into());
    }
    Ok(FieldRecord {
        site: row.get(c.site).unwrap_or("").trim().to_string(),
        date: row.get(c.date).unwrap_or("").trim().to_string(),
        bands: BandReflectance(bands),
        geometry,
        lai,
        ccc,
        ccc_unit,
        lai_sd,
    })
}

/// Parses a field CSV. A bad header or an empty file is an error; rows that
/// fail to parse are collected in `malformed`. With `require_truth` the
/// four truth columns must be present in the header.
pub fn parse_field_csv(text: &str, name: &str, require_truth: bool) -> Result<ParsedRecords> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).has_headers(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::parse(name, 1, e.to_string()))?.clone();
    if header.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::parse(name, 1, "empty file"));
    }
    let cols = locate(&header, name, require_truth)?;
    let mut out = ParsedRecords::default();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        match row {
            Ok(r) if r.iter().all(|c| c.trim().is_empty()) => {}
            Ok(r) if r.len() != header.len() => {
                out.malformed.push((line, format!("{} fields, header has {}", r.len(), header.len())))
            }
            Ok(r) => match record(&r, &cols) {
                Ok(rec) => out.records.push(rec),
                Err(m) => out.malformed.push((line, m)),
            },
            Err(e) => out.malformed.push((line, e.to_string())),
        }
    }
    Ok(out)
}

pub fn read_field_csv(path: &std::path::Path, require_truth: bool) -> Result<ParsedRecords> {
    let text = crate::error::read_to_string(path)?;
    parse_field_csv(&text, &path.display().to_string(), require_truth)
}

/// Writes records in the field CSV layout.
pub fn write_field_csv<W: std::io::Write>(records: &[FieldRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| Error::Data(format!("CSV export failed: {e}"));
    w.write_record(field_columns()).map_err(map)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        let mut row = vec![r.site.clone(), r.date.clone()];
        row.extend(r.bands.0.iter().map(|v| v.to_string()));
        let g = &r.geometry;
        row.extend([g.sun_zenith_deg, g.view_zenith_deg, g.rel_azimuth_deg].map(|v| v.to_string()));
        row.push(opt(r.lai));
        row.push(opt(r.ccc));
        row.push(r.ccc_unit.map(|u| u.label().to_string()).unwrap_or_default());
        row.push(opt(r.lai_sd));
        w.write_record(&row).map_err(map)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

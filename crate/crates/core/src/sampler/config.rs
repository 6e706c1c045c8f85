use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{variable_index, Family, VariableInfo, N_PARAMS, VARIABLES};

/// Sampling distribution of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub name: String,
    pub family: Family,
    pub lower: f64,
    pub upper: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
}

impl VariableSpec {
    /// Default spec: the variable-table bounds; truncated normals centred on the
    /// midpoint with a quarter-range standard deviation.
    pub fn default_for(info: &VariableInfo) -> Self {
        let (mean, sd) = match info.family {
            Family::TruncatedNormal => (Some(info.midpoint()), Some(info.width() / 4.0)),
            Family::Uniform => (None, None),
        };
        Self { name: info.name.to_string(), family: info.family, lower: info.lower, upper: info.upper, mean, sd }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("variable {}: {what}", self.name)));
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return bad(&format!("bounds [{}, {}] must be finite with lower < upper", self.lower, self.upper));
        }
        if let Some(i) = variable_index(&self.name) {
            let info = &VARIABLES[i];
            if self.lower < info.lower || self.upper > info.upper {
                return bad(&format!("bounds [{}, {}] leave the physical range [{}, {}]", self.lower, self.upper, info.lower, info.upper));
            }
        } else {
            return bad("unknown variable");
        }
        if self.family == Family::TruncatedNormal {
            match (self.mean, self.sd) {
                (Some(m), Some(s)) if m.is_finite() && s.is_finite() && s > 0.0 => {}
                _ => return bad("truncated normal needs a finite mean and sd > 0"),
            }
        }
        Ok(())
    }

    pub(crate) fn with_bounds(&self, lower: f64, upper: f64) -> Self {
        Self { lower, upper, ..self.clone() }
    }
}

/// Per-variable changes applied on top of the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableOverride {
    pub family: Option<Family>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
}

impl Comparator {
    pub fn holds(self, x: f64, threshold: f64) -> bool {
        match self {
            Comparator::Ge => x >= threshold,
            Comparator::Gt => x > threshold,
            Comparator::Le => x <= threshold,
            Comparator::Lt => x < threshold,
        }
    }
}

/// Bounds replaced for the other variables when the LAI predicate holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoDistributionRule {
    pub comparator: Comparator,
    pub threshold: f64,
    /// Variable name to `[lower, upper]`.
    pub bounds: BTreeMap<String, [f64; 2]>,
}

impl CoDistributionRule {
    pub fn fires(&self, lai: f64) -> bool {
        self.comparator.holds(lai, self.threshold)
    }
}

/// Dense-canopy rule: LAI >= 7 favours green leaves, a slightly higher
/// structure index and darker soil.
pub fn default_rules() -> Vec<CoDistributionRule> {
    vec![CoDistributionRule {
        comparator: Comparator::Ge,
        threshold: 7.0,
        bounds: BTreeMap::from([
            ("Cab".to_string(), [45.0, 90.0]),
            ("N".to_string(), [1.3, 1.8]),
            ("soil_bright".to_string(), [0.5, 1.2]),
        ]),
    }]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Standard deviation in reflectance units.
    #[default]
    Absolute,
    /// Standard deviation as a fraction of each band value.
    Relative,
}

/// The `[sampler]` configuration table as written by users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub noise_level: f64,
    pub noise_mode: NoiseMode,
    pub variables: BTreeMap<String, VariableOverride>,
    pub rules: Vec<CoDistributionRule>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { noise_level: 0.005, noise_mode: NoiseMode::Absolute, variables: BTreeMap::new(), rules: default_rules() }
    }
}

impl SamplerConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))
    }

    /// Applies the overrides to the defaults and validates the result.
    pub fn resolve(&self) -> Result<ResolvedSampler> {
        let mut specs: Vec<VariableSpec> = VARIABLES.iter().map(VariableSpec::default_for).collect();
        for (name, o) in &self.variables {
            let i = variable_index(name).ok_or_else(|| Error::Config(format!("unknown variable `{name}`")))?;
            let s = &mut specs[i];
            if let Some(f) = o.family {
                s.family = f;
            }
            s.lower = o.lower.unwrap_or(s.lower);
            s.upper = o.upper.unwrap_or(s.upper);
            if s.family == Family::TruncatedNormal {
                s.mean = o.mean.or(s.mean).or(Some(0.5 * (s.lower + s.upper)));
                s.sd = o.sd.or(s.sd).or(Some((s.upper - s.lower) / 4.0));
            } else {
                s.mean = None;
                s.sd = None;
            }
        }
        for s in &specs {
            s.validate()?;
        }
        if !(self.noise_level.is_finite() && self.noise_level >= 0.0) {
            return Err(Error::Config(format!("noise_level must be >= 0, got {}", self.noise_level)));
        }
        let lai = crate::params::idx::LAI;
        let mut rules = Vec::with_capacity(self.rules.len());
        for r in &self.rules {
            if !r.threshold.is_finite() {
                return Err(Error::Config("rule threshold must be finite".into()));
            }
            let mut overrides = Vec::with_capacity(r.bounds.len());
            for (name, &[lo, hi]) in &r.bounds {
                let i = variable_index(name).ok_or_else(|| Error::Config(format!("rule references unknown variable `{name}`")))?;
                if i == lai {
                    return Err(Error::Config("a rule cannot override its trigger variable LAI".into()));
                }
                let base = &specs[i];
                if !(lo < hi && lo >= base.lower && hi <= base.upper) {
                    return Err(Error::Config(format!(
                        "rule bounds [{lo}, {hi}] for {name} are not nested in [{}, {}]",
                        base.lower, base.upper
                    )));
                }
                overrides.push((i, lo, hi));
            }
            rules.push(ResolvedRule { comparator: r.comparator, threshold: r.threshold, overrides });
        }
        let specs: [VariableSpec; N_PARAMS] = specs.try_into().expect("one spec per variable");
        Ok(ResolvedSampler { specs, rules, noise_level: self.noise_level, noise_mode: self.noise_mode })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRule {
    pub comparator: Comparator,
    pub threshold: f64,
    /// `(variable index, lower, upper)`.
    pub overrides: Vec<(usize, f64, f64)>,
}

impl ResolvedRule {
    pub fn fires(&self, lai: f64) -> bool {
        self.comparator.holds(lai, self.threshold)
    }
}

/// Validated sampler: one spec per variable in parameter-vector order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSampler {
    pub specs: [VariableSpec; N_PARAMS],
    pub rules: Vec<ResolvedRule>,
    pub noise_level: f64,
    pub noise_mode: NoiseMode,
}

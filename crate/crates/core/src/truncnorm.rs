//! Two-sided truncated normal distribution in plain `f64`.
//!
//! Probabilities are taken from whichever tail keeps the truncation mass
//! well conditioned: when the interval sits above the mean the distribution
//! is mirrored, so `Φ` is only ever evaluated where it is accurate.

use crate::error::{Error, Result};
use crate::special::{norm_cdf, norm_pdf, norm_quantile};

/// Truncation mass below which the distribution collapses onto the nearest
/// bound.
pub const DEGENERATE_MASS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormal {
    pub mu: f64,
    pub sigma: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TruncatedNormal {
    pub fn new(mu: f64, sigma: f64, lower: f64, upper: f64) -> Result<Self> {
        if !(mu.is_finite() && sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Domain(format!("truncated normal needs finite mu and sigma > 0, got ({mu}, {sigma})")));
        }
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::Domain(format!("truncated normal needs lower < upper, got [{lower}, {upper}]")));
        }
        Ok(Self { mu, sigma, lower, upper })
    }

    /// Standardized bounds `(ā, b̄)`.
    pub fn std_bounds(&self) -> (f64, f64) {
        ((self.lower - self.mu) / self.sigma, (self.upper - self.mu) / self.sigma)
    }

    fn mirrored(&self) -> bool {
        let (a, b) = self.std_bounds();
        a + b > 0.0
    }

    fn mirror(&self) -> Self {
        Self { mu: -self.mu, sigma: self.sigma, lower: -self.upper, upper: -self.lower }
    }

    /// `Φ(b̄) − Φ(ā)`.
    pub fn mass(&self) -> f64 {
        let (a, b) = self.std_bounds();
        if a + b > 0.0 {
            norm_cdf(-a) - norm_cdf(-b)
        } else {
            norm_cdf(b) - norm_cdf(a)
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.mass() < DEGENERATE_MASS
    }

    fn nearest_bound(&self) -> f64 {
        self.mu.clamp(self.lower, self.upper)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !(self.lower..=self.upper).contains(&x) {
            return 0.0;
        }
        norm_pdf((x - self.mu) / self.sigma) / (self.sigma * self.mass())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lower {
            return 0.0;
        }
        if x >= self.upper {
            return 1.0;
        }
        if self.mirrored() {
            return 1.0 - self.mirror().cdf(-x);
        }
        let (a, _) = self.std_bounds();
        ((norm_cdf((x - self.mu) / self.sigma) - norm_cdf(a)) / self.mass()).clamp(0.0, 1.0)
    }

    /// Inverse CDF; also the reparameterized draw for a uniform `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        if self.is_degenerate() {
            return self.nearest_bound();
        }
        if self.mirrored() {
            return -self.mirror().quantile(1.0 - p);
        }
        let (a, _) = self.std_bounds();
        let target = norm_cdf(a) + p * self.mass();
        (self.mu + self.sigma * norm_quantile(target)).clamp(self.lower, self.upper)
    }

    pub fn mean(&self) -> f64 {
        if self.is_degenerate() {
            return self.nearest_bound();
        }
        let (a, b) = self.std_bounds();
        self.mu + self.sigma * (norm_pdf(a) - norm_pdf(b)) / self.mass()
    }

    pub fn variance(&self) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        let (a, b) = self.std_bounds();
        let z = self.mass();
        let r = (norm_pdf(a) - norm_pdf(b)) / z;
        let s = (a * norm_pdf(a) - b * norm_pdf(b)) / z;
        (self.sigma * self.sigma * (1.0 + s - r * r)).max(0.0)
    }

    /// Differential entropy in nats.
    pub fn entropy(&self) -> f64 {
        let (a, b) = self.std_bounds();
        let z = self.mass();
        let s = (a * norm_pdf(a) - b * norm_pdf(b)) / z;
        (2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt().ln() + (self.sigma * z).ln() + 0.5 * s
    }

    /// `KL[self ‖ Uniform(lower, upper)] = −H + ln(upper − lower)`.
    pub fn kl_to_uniform(&self, lower: f64, upper: f64) -> Result<f64> {
        if self.lower < lower || self.upper > upper {
            return Err(Error::Domain(format!(
                "truncated normal support [{}, {}] is not inside [{lower}, {upper}]",
                self.lower, self.upper
            )));
        }
        Ok(-self.entropy() + (upper - lower).ln())
    }
}

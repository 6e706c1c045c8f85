//! PROSPECT-5 generalized plate model of leaf reflectance and transmittance.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::special::exp_int_e1;
use crate::spectral::{LeafCoefficientTables, SpectrumCurve};

/// Incidence cone half-angle of light reaching the upper leaf surface.
pub const TOP_SURFACE_ALPHA_DEG: f64 = 40.0;

/// Below this absorption the plate transmission uses its first-order limit.
const SMALL_ABSORPTION: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafParams {
    pub n_struct: f64,
    pub cab: f64,
    pub car: f64,
    pub cbrown: f64,
    pub cw: f64,
    pub cm: f64,
}

impl LeafParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_struct >= 1.0) {
            return Err(Error::Domain(format!("leaf structure N = {} must be at least 1", self.n_struct)));
        }
        let contents = [("Cab", self.cab), ("Car", self.car), ("Cbrown", self.cbrown), ("Cw", self.cw), ("Cm", self.cm)];
        for (name, v) in contents {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} = {v} must be non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafOptics {
    pub reflectance: SpectrumCurve,
    pub transmittance: SpectrumCurve,
}

/// Mean transmissivity of a dielectric interface with relative index `n`
/// for isotropic light within a cone of half-angle `alpha_deg`.
pub fn tav(alpha_deg: f64, n: f64) -> f64 {
    let n2 = n * n;
    let np = n2 + 1.0;
    let nm = n2 - 1.0;
    let a = (n + 1.0) * (n + 1.0) / 2.0;
    let k = -(n2 - 1.0) * (n2 - 1.0) / 4.0;
    let sa = alpha_deg.to_radians().sin();
    let b1 = if alpha_deg == 90.0 {
        0.0
    } else {
        ((sa * sa - np / 2.0) * (sa * sa - np / 2.0) + k).sqrt()
    };
    let b2 = sa * sa - np / 2.0;
    let b = b1 - b2;
    let ts = (k * k / (6.0 * b.powi(3)) + k / b - b / 2.0) - (k * k / (6.0 * a.powi(3)) + k / a - a / 2.0);
    let tp1 = -2.0 * n2 * (b - a) / (np * np);
    let tp2 = -2.0 * n2 * np * (b / a).ln() / (nm * nm);
    let tp3 = n2 * (1.0 / b - 1.0 / a) / 2.0;
    let tp4 = 16.0 * n2 * n2 * (n2 * n2 + 1.0) * ((2.0 * np * b - nm * nm) / (2.0 * np * a - nm * nm)).ln()
        / (np.powi(3) * nm * nm);
    let tp5 = 16.0 * n2.powi(3) * (1.0 / (2.0 * np * b - nm * nm) - 1.0 / (2.0 * np * a - nm * nm)) / np.powi(3);
    (ts + tp1 + tp2 + tp3 + tp4 + tp5) / (2.0 * sa * sa)
}

/// Transmission of one absorbing plate with absorption thickness `k`:
/// `(1-k)e^{-k} + k² E1(k)`.
pub fn plate_transmission(k: f64) -> f64 {
    if k < SMALL_ABSORPTION {
        1.0 - 2.0 * k
    } else {
        (1.0 - k) * (-k).exp() + k * k * exp_int_e1(k)
    }
}

/// Derivative of [`plate_transmission`]: `2(k E1(k) - e^{-k})`.
pub fn plate_transmission_deriv(k: f64) -> f64 {
    if k < SMALL_ABSORPTION {
        -2.0
    } else {
        2.0 * (k * exp_int_e1(k) - (-k).exp())
    }
}

/// Per-wavelength constants of the plate model, restricted to a lane set.
#[derive(Debug, Clone)]
pub struct LeafConstants {
    /// Rows of `k_cab, k_car, k_brown, k_cw, k_cm`, each `1 x lanes`.
    k: [Tensor; 5],
    talf: Tensor,
    ralf: Tensor,
    t12: Tensor,
    r12: Tensor,
    t21: Tensor,
    r21: Tensor,
}

impl LeafConstants {
    pub fn new(tables: &LeafCoefficientTables, lanes: &[usize]) -> Self {
        let row = |c: &SpectrumCurve| Array2::from_shape_fn((1, lanes.len()), |(_, j)| c.values[lanes[j]]);
        let nr = row(&tables.refractive_index);
        let talf = nr.mapv(|n| tav(TOP_SURFACE_ALPHA_DEG, n));
        let t12 = nr.mapv(|n| tav(90.0, n));
        let t21 = Zip::from(&t12).and(&nr).map_collect(|&t, &n| t / (n * n));
        Self {
            k: [row(&tables.k_cab), row(&tables.k_car), row(&tables.k_brown), row(&tables.k_cw), row(&tables.k_cm)],
            ralf: talf.mapv(|t| 1.0 - t),
            r12: t12.mapv(|t| 1.0 - t),
            r21: t21.mapv(|t| 1.0 - t),
            talf,
            t12,
            t21,
        }
    }

    pub fn full(tables: &LeafCoefficientTables) -> Self {
        let lanes: Vec<usize> = (0..tables.grid().count).collect();
        Self::new(tables, &lanes)
    }

    pub fn lanes(&self) -> usize {
        self.talf.ncols()
    }
}

/// Leaf parameters recorded on a tape, in [`LeafParams`] order.
#[derive(Debug, Clone, Copy)]
pub struct LeafVars<'t> {
    pub n_struct: Var<'t>,
    pub cab: Var<'t>,
    pub car: Var<'t>,
    pub cbrown: Var<'t>,
    pub cw: Var<'t>,
    pub cm: Var<'t>,
}

impl<'t> LeafVars<'t> {
    pub fn constant(tape: &'t Tape, p: &LeafParams) -> Self {
        let c = |v| tape.constant_scalar(v);
        Self { n_struct: c(p.n_struct), cab: c(p.cab), car: c(p.car), cbrown: c(p.cbrown), cw: c(p.cw), cm: c(p.cm) }
    }
}

/// Reflectance and transmittance rows (`1 x lanes`) of a leaf of `n_struct`
/// plates. Lanes where the elementary layer does not absorb use the
/// non-absorbing stack solution.
pub fn prospect5_on_tape<'t>(leaf: &LeafVars<'t>, c: &LeafConstants) -> (Var<'t>, Var<'t>) {
    let tape = leaf.n_struct.tape();
    let k_row = |i: usize| tape.constant(c.k[i].clone());
    let content = leaf.cab * k_row(0) + leaf.car * k_row(1) + leaf.cbrown * k_row(2) + leaf.cw * k_row(3) + leaf.cm * k_row(4);
    let kall = content / leaf.n_struct;
    let tau = kall.map_checked("plate_transmission", |k| k >= 0.0, plate_transmission, |k, _| plate_transmission_deriv(k));

    let cst = |t: &Tensor| tape.constant(t.clone());
    let (talf, ralf, t12, r12, t21, r21) = (cst(&c.talf), cst(&c.ralf), cst(&c.t12), cst(&c.r12), cst(&c.t21), cst(&c.r21));

    // Elementary layer.
    let denom = 1.0 - r21 * r21 * tau * tau;
    let ta = talf * tau * t21 / denom;
    let ra = ralf + r21 * tau * ta;
    let t = t12 * tau * t21 / denom;
    let r = r12 + r21 * tau * t;

    // Stack of N - 1 further layers.
    let n = leaf.n_struct;
    let lossless = Zip::from(&*r.value())
        .and(&*t.value())
        .and(&*tau.value())
        .map_collect(|&r, &t, &tau| r + t >= 1.0 || tau >= 1.0);
    let any_lossless = lossless.iter().any(|&m| m);
    let (rg, tg) = if any_lossless {
        let safe = tape.constant(Array2::from_elem(lossless.dim(), 0.1));
        (Var::select(&lossless, safe, r), Var::select(&lossless, safe, t))
    } else {
        (r, t)
    };
    let d = ((1.0 + rg + tg) * (1.0 + rg - tg) * (1.0 - rg + tg) * (1.0 - rg - tg)).sqrt();
    let (rq, tq) = (rg * rg, tg * tg);
    let a = (1.0 + rq - tq + d) / (2.0 * rg);
    let b = (1.0 - rq + tq + d) / (2.0 * tg);
    let b_nm1 = ((n - 1.0) * b.ln()).exp();
    let b_n2 = b_nm1 * b_nm1;
    let a2 = a * a;
    let denom = a2 * b_n2 - 1.0;
    let mut rsub = a * (b_n2 - 1.0) / denom;
    let mut tsub = b_nm1 * (a2 - 1.0) / denom;
    if any_lossless {
        let tsub_lossless = t / (t + (1.0 - t) * (n - 1.0));
        tsub = Var::select(&lossless, tsub_lossless, tsub);
        rsub = Var::select(&lossless, 1.0 - tsub_lossless, rsub);
    }

    let denom = 1.0 - rsub * r;
    let tran = ta * tsub / denom;
    let refl = ra + ta * rsub * t / denom;
    (refl, tran)
}

/// Leaf reflectance and transmittance on the coefficient grid.
pub fn prospect5(params: &LeafParams, tables: &LeafCoefficientTables) -> Result<LeafOptics> {
    params.validate()?;
    let consts = LeafConstants::full(tables);
    let tape = Tape::new();
    let (r, t) = prospect5_on_tape(&LeafVars::constant(&tape, params), &consts);
    tape.check()?;
    let grid = tables.grid();
    Ok(LeafOptics {
        reflectance: SpectrumCurve::new(grid, r.to_vec())?,
        transmittance: SpectrumCurve::new(grid, t.to_vec())?,
    })
}

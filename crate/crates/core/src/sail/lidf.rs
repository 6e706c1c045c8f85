//! Campbell ellipsoidal leaf inclination distribution, parameterized by the
//! mean leaf angle.

use ndarray::Array2;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// Inclination classes of equal width between 0 and 90 degrees.
pub const LIDF_CLASSES: usize = 18;

/// `asinh(√u)/√u` for `u > 0`, `asin(√-u)/√-u` for `u < 0`, continuous at 0.
fn arc_ratio(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        1.0 - u / 6.0 + 3.0 * u * u / 40.0 - 5.0 * u.powi(3) / 112.0 + 35.0 * u.powi(4) / 1152.0
    } else if u > 0.0 {
        let r = u.sqrt();
        r.asinh() / r
    } else {
        let r = (-u).sqrt();
        r.asin() / r
    }
}

fn arc_ratio_deriv(u: f64, value: f64) -> f64 {
    if u.abs() < 1e-4 {
        -1.0 / 6.0 + 3.0 * u / 20.0 - 15.0 * u * u / 112.0 + 35.0 * u.powi(3) / 288.0
    } else {
        (1.0 / (1.0 + u).sqrt() - value) / (2.0 * u)
    }
}

/// Class weights (`1 x n_classes`) for mean leaf angle `ala_deg`.
///
/// The ellipsoid eccentricity `χ` follows Campbell's polynomial fit in the
/// mean angle. With `x(θ) = χ cosθ / sqrt(cos²θ + χ² sin²θ)` and
/// `s = 1 - 1/χ²`, the cumulative mass from `θ` to 90° is proportional to
/// `G(x) = x sqrt(1 + s x²) + x·arc_ratio(s x²)`, which stays well
/// conditioned through the spherical case `χ = 1`.
pub fn lidf_on_tape<'t>(ala_deg: Var<'t>, n_classes: usize) -> Var<'t> {
    let tape = ala_deg.tape();
    let a = ala_deg;
    let poly = a * a * a * -1.6184e-5 + a * a * 2.1145e-3 - a * 1.2390e-1 + 3.2491;
    let chi = poly.exp();
    let step = 90.0 / n_classes as f64;
    let edge = |i: usize| -> (f64, f64) {
        if i == n_classes {
            (0.0, 1.0)
        } else {
            let th = (i as f64 * step).to_radians();
            (th.cos(), th.sin())
        }
    };
    let cos = tape.constant(Array2::from_shape_fn((1, n_classes + 1), |(_, i)| edge(i).0));
    let sin2 = tape.constant(Array2::from_shape_fn((1, n_classes + 1), |(_, i)| edge(i).1.powi(2)));
    let x = chi * cos / (cos * cos + chi * chi * sin2).sqrt();
    let s = 1.0 - (chi * chi).recip();
    let u = s * x * x;
    let g = x * (1.0 + u).sqrt() + x * u.map("arc_ratio", arc_ratio, arc_ratio_deriv);
    let freq = g.slice_cols(0, n_classes) - g.slice_cols(1, n_classes + 1);
    freq / freq.sum()
}

/// `(class centre angle in degrees, weight)` pairs for mean angle `ala_deg`.
pub fn lidf_weights(ala_deg: f64, n_classes: usize) -> Result<Vec<(f64, f64)>> {
    if !(ala_deg > 0.0 && ala_deg < 90.0) {
        return Err(Error::Domain(format!("mean leaf angle {ala_deg} outside (0, 90)")));
    }
    if n_classes < 9 {
        return Err(Error::Domain(format!("{n_classes} inclination classes; at least 9 required")));
    }
    let tape = Tape::new();
    let w = lidf_on_tape(tape.constant_scalar(ala_deg), n_classes);
    tape.check()?;
    let step = 90.0 / n_classes as f64;
    Ok(w.to_vec().into_iter().enumerate().map(|(i, w)| ((i as f64 + 0.5) * step, w)).collect())
}

//! Four-stream canopy radiative transfer with hotspot correction.

use ndarray::Array2;

use super::lidf::lidf_on_tape;
use super::ViewGeometry;
use crate::autodiff::{Tensor, Var};

/// Hotspot sharpness beyond which the joint-gap integral equals its
/// no-correlation limit to working precision.
const ALF_SATURATION: f64 = 1e12;

/// Interception and volume-scattering factors for one leaf inclination.
/// Returns `(chi_s, chi_o, frho, ftau)`.
pub fn volscatt(tts: f64, tto: f64, psi: f64, ttl: f64) -> (f64, f64, f64, f64) {
    use std::f64::consts::PI;
    let (cts, cto) = (tts.to_radians().cos(), tto.to_radians().cos());
    let (sts, sto) = (tts.to_radians().sin(), tto.to_radians().sin());
    let psir = psi.to_radians();
    let cospsi = psir.cos();
    let (cttl, sttl) = (ttl.to_radians().cos(), ttl.to_radians().sin());
    let cs = cttl * cts;
    let co = cttl * cto;
    let ss = sttl * sts;
    let so = sttl * sto;
    let cosbts = if ss.abs() > 1e-6 { -cs / ss } else { 5.0 };
    let cosbto = if so.abs() > 1e-6 { -co / so } else { 5.0 };
    let (bts, ds) = if cosbts.abs() < 1.0 { (cosbts.acos(), ss) } else { (PI, cs) };
    let chi_s = 2.0 / PI * ((bts - PI * 0.5) * cs + bts.sin() * ss);
    let (bto, do_) = if cosbto.abs() < 1.0 {
        (cosbto.acos(), so)
    } else if tto < 90.0 {
        (PI, co)
    } else {
        (0.0, -co)
    };
    let chi_o = 2.0 / PI * ((bto - PI * 0.5) * co + bto.sin() * so);
    let btran1 = (bts - bto).abs();
    let btran2 = PI - (bts + bto - PI).abs();
    let (bt1, bt2, bt3) = if psir <= btran1 {
        (psir, btran1, btran2)
    } else if psir <= btran2 {
        (btran1, psir, btran2)
    } else {
        (btran1, btran2, psir)
    };
    let t1 = 2.0 * cs * co + ss * so * cospsi;
    let t2 = if bt2 > 0.0 { bt2.sin() * (2.0 * ds * do_ + ss * so * bt1.cos() * bt3.cos()) } else { 0.0 };
    let denom = 2.0 * PI * PI;
    let frho = (((PI - bt2) * t1 + t2) / denom).max(0.0);
    let ftau = ((-bt2 * t1 + t2) / denom).max(0.0);
    (chi_s, chi_o, frho, ftau)
}

/// Geometry-only quantities: per-class extinction and scattering factors
/// plus the hotspot distance `dso`.
#[derive(Debug, Clone)]
pub struct SailGeometry {
    pub n_classes: usize,
    /// Rows `1 x n_classes` of `ks, ko, sob, sof, bf` per inclination class.
    pub ks: Tensor,
    pub ko: Tensor,
    pub sob: Tensor,
    pub sof: Tensor,
    pub bf: Tensor,
    pub dso: f64,
}

impl SailGeometry {
    pub fn new(geom: &ViewGeometry, n_classes: usize) -> Self {
        let (tts, tto, psi) = (geom.sun_zenith_deg, geom.view_zenith_deg, geom.rel_azimuth_deg);
        let cts = tts.to_radians().cos();
        let cto = tto.to_radians().cos();
        let ctscto = cts * cto;
        let tants = tts.to_radians().tan();
        let tanto = tto.to_radians().tan();
        let cospsi = psi.to_radians().cos();
        let dso = (tants * tants + tanto * tanto - 2.0 * tants * tanto * cospsi).max(0.0).sqrt();
        let step = 90.0 / n_classes as f64;
        let mut rows = [(); 5].map(|_| Array2::zeros((1, n_classes)));
        for i in 0..n_classes {
            let ttl = i as f64 * step + 0.5 * step;
            let (chi_s, chi_o, frho, ftau) = volscatt(tts, tto, psi, ttl);
            rows[0][[0, i]] = chi_s / cts;
            rows[1][[0, i]] = chi_o / cto;
            rows[2][[0, i]] = frho * std::f64::consts::PI / ctscto;
            rows[3][[0, i]] = ftau * std::f64::consts::PI / ctscto;
            rows[4][[0, i]] = ttl.to_radians().cos().powi(2);
        }
        let [ks, ko, sob, sof, bf] = rows;
        Self { n_classes, ks, ko, sob, sof, bf, dso }
    }
}

/// Canopy structure recorded on a tape.
#[derive(Debug, Clone, Copy)]
pub struct CanopyVars<'t> {
    pub lai: Var<'t>,
    pub ala_deg: Var<'t>,
    pub hotspot: Var<'t>,
}

/// `(e^{-l t} - e^{-k t}) / (k - l)` with its series form where `k ≈ l`.
fn j1<'t>(k: Var<'t>, l: Var<'t>, t: Var<'t>) -> Var<'t> {
    let tape = k.tape();
    let del = (k - l) * t;
    let far = del.value().mapv(|d| d.abs() > 1e-3);
    let n_far = far.iter().filter(|&&m| m).count();
    let near_form = |l: Var<'t>| 0.5 * t * ((-k * t).exp() + (-l * t).exp()) * (1.0 - del * del / 12.0);
    if n_far == far.len() {
        return ((-l * t).exp() - (-k * t).exp()) / (k - l);
    }
    if n_far == 0 {
        return near_form(l);
    }
    let one = tape.constant(Array2::ones(far.dim()));
    let denom = Var::select(&far, k - l, one);
    let far_form = ((-l * t).exp() - (-k * t).exp()) / denom;
    Var::select(&far, far_form, near_form(l))
}

fn j2<'t>(k: Var<'t>, l: Var<'t>, t: Var<'t>) -> Var<'t> {
    (1.0 - (-(k + l) * t).exp()) / (k + l)
}

/// Replaces exact zeros (or values below `floor`) by `floor`.
fn floor_at<'t>(x: Var<'t>, floor: f64) -> Var<'t> {
    let mask = x.value().mapv(|v| v < floor || v == 0.0);
    if mask.iter().any(|&m| m) {
        let f = x.tape().constant(Array2::from_elem(mask.dim(), floor));
        Var::select(&mask, f, x)
    } else {
        x
    }
}

/// `(tsstoo, sumint)`: bidirectional gap probability and the integral of the
/// joint gap probability over canopy depth.
fn hotspot_terms<'t>(lai: Var<'t>, h: Var<'t>, ks: Var<'t>, ko: Var<'t>, tss: Var<'t>, dso: f64) -> (Var<'t>, Var<'t>) {
    let tape = lai.tape();
    let uncorrelated = || {
        let k = (ko + ks) * lai;
        let t = (-k).exp();
        (t, (1.0 - t) / k)
    };
    if h.item() <= 0.0 {
        return uncorrelated();
    }
    // Breon's 2/(ks+ko) correction of the hotspot size.
    let alf = dso / h * 2.0 / (ks + ko);
    let alf_v = alf.item();
    if alf_v == 0.0 {
        return (tss, (1.0 - tss) / (ks * lai));
    }
    if alf_v > ALF_SATURATION {
        return uncorrelated();
    }
    let fhot = lai * (ko * ks).sqrt();
    let fint = (1.0 - (-alf).exp()) * 0.05;
    let mut x1 = tape.constant_scalar(0.0);
    let mut y1 = tape.constant_scalar(0.0);
    let mut f1 = tape.constant_scalar(1.0);
    let mut sumint = tape.constant_scalar(0.0);
    for istep in 1..=20 {
        let x2 = if istep < 20 { -(1.0 - fint * istep as f64).ln() / alf } else { tape.constant_scalar(1.0) };
        let y2 = -(ko + ks) * lai * x2 + fhot * (1.0 - (-alf * x2).exp()) / alf;
        let f2 = y2.exp();
        sumint = sumint + (f2 - f1) * (x2 - x1) / (y2 - y1);
        x1 = x2;
        y1 = y2;
        f1 = f2;
    }
    (f1, sumint)
}

/// Top-of-canopy bidirectional reflectance (`1 x lanes`) from leaf
/// reflectance `rho`, transmittance `tau` and soil reflectance `soil` rows.
/// `lai` must be positive.
pub fn foursail_on_tape<'t>(
    rho: Var<'t>,
    tau: Var<'t>,
    canopy: &CanopyVars<'t>,
    geo: &SailGeometry,
    soil: Var<'t>,
) -> Var<'t> {
    let tape = rho.tape();
    let lai = canopy.lai;
    let lidf = lidf_on_tape(canopy.ala_deg, geo.n_classes);
    let wsum = |row: &Tensor| (lidf * tape.constant(row.clone())).sum();
    let (ks, ko, bf, sob, sof) = (wsum(&geo.ks), wsum(&geo.ko), wsum(&geo.bf), wsum(&geo.sob), wsum(&geo.sof));

    let sdb = 0.5 * (ks + bf);
    let sdf = 0.5 * (ks - bf);
    let dob = 0.5 * (ko + bf);
    let dof = 0.5 * (ko - bf);
    let ddb = 0.5 * (1.0 + bf);
    let ddf = 0.5 * (1.0 - bf);

    let sigb = floor_at(ddb * rho + ddf * tau, 1e-36);
    let sigf = floor_at(ddf * rho + ddb * tau, 1e-36);
    let att = 1.0 - sigf;
    let m = (att * att - sigb * sigb).sqrt();
    let sb = sdb * rho + sdf * tau;
    let sf = sdf * rho + sdb * tau;
    let vb = dob * rho + dof * tau;
    let vf = dof * rho + dob * tau;
    let w = sob * rho + sof * tau;

    let e1 = (-m * lai).exp();
    let e2 = e1 * e1;
    let rinf = (att - m) / sigb;
    let rinf2 = rinf * rinf;
    let re = rinf * e1;
    let denom = 1.0 - rinf2 * e2;
    let j1ks = j1(ks, m, lai);
    let j2ks = j2(ks, m, lai);
    let j1ko = j1(ko, m, lai);
    let j2ko = j2(ko, m, lai);
    let pss = (sf + sb * rinf) * j1ks;
    let qss = (sf * rinf + sb) * j2ks;
    let pv = (vf + vb * rinf) * j1ko;
    let qv = (vf * rinf + vb) * j2ko;
    let rdd = rinf * (1.0 - e2) / denom;
    let tsd = (pss - re * qss) / denom;
    let tdo = (pv - re * qv) / denom;
    let rdo = (qv - re * pv) / denom;
    let tss = (-ks * lai).exp();
    let too = (-ko * lai).exp();
    let z = j2(ks, ko, lai);
    let g1 = (z - j1ks * too) / (ko + m);
    let g2 = (z - j1ko * tss) / (ks + m);
    let tv1 = (vf * rinf + vb) * g1;
    let tv2 = (vf + vb * rinf) * g2;
    let t1 = tv1 * (sf + sb * rinf);
    let t2 = tv2 * (sf * rinf + sb);
    let t3 = (rdo * qss + tdo * pss) * rinf;
    let rsod = (t1 + t2 - t3) / (1.0 - rinf2);

    let (tsstoo, sumint) = hotspot_terms(lai, canopy.hotspot, ks, ko, tss, geo.dso);
    let rsos = w * lai * sumint;
    let rso = rsos + rsod;

    let dn = floor_at(1.0 - soil * rdd, 1e-36);
    let rsodt = ((tss + tsd) * tdo + (tsd + tss * soil * rdd) * too) * soil / dn;
    let rsost = rso + tsstoo * soil;
    rsost + rsodt
}

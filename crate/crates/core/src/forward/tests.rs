use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::relative_error;
use crate::params::{N_PARAMS, VARIABLES};
use crate::testutil::{assets, fixture};

fn reference_rows(name: &str) -> Vec<(ParameterVector, [f64; N_BANDS])> {
    fixture(name)
        .into_iter()
        .map(|r| {
            let p: [f64; N_PARAMS] = std::array::from_fn(|i| r[i]);
            (ParameterVector::from_array(&p), std::array::from_fn(|i| r[N_PARAMS + i]))
        })
        .collect()
}

fn random_pv(rng: &mut ChaCha8Rng) -> ParameterVector {
    let a: [f64; N_PARAMS] = std::array::from_fn(|i| rng.random_range(VARIABLES[i].lower..=VARIABLES[i].upper));
    ParameterVector::from_array(&a)
}

#[test]
fn band_fixture_equivalence() {
    let a = assets();
    let model = Prosail::new(&a);
    let rows = reference_rows("bands_reference.txt");
    assert_eq!(rows.len(), 100);
    for (pv, want) in rows {
        let lanes = model.bands(&pv).unwrap();
        let full = prosail_forward(&pv, &a).unwrap();
        for b in 0..N_BANDS {
            assert!((lanes.0[b] - want[b]).abs() < 1e-6, "{pv:?} band {b}");
            assert!((full.0[b] - lanes.0[b]).abs() < 1e-14);
        }
    }
}

#[test]
fn azimuth_changes_bands() {
    let model = Prosail::new(&assets());
    let rows = reference_rows("bands_azimuth_pair.txt");
    let out: Vec<_> = rows.iter().map(|(pv, _)| model.bands(pv).unwrap()).collect();
    for ((_, want), got) in rows.iter().zip(&out) {
        for b in 0..N_BANDS {
            assert!((got.0[b] - want[b]).abs() < 1e-6);
        }
    }
    assert!(out[0].0.iter().zip(&out[1].0).all(|(x, y)| (x - y).abs() > 1e-4));
}

#[test]
fn bare_soil_bands_equal_dry_soil_bands() {
    let a = assets();
    let mut pv = ParameterVector::midpoint();
    pv.canopy.lai = 0.0;
    pv.canopy.soil_bright = 1.0;
    pv.canopy.soil_wet = 0.0;
    let want = convolve_to_bands(&a.soil.dry, &a.srf).unwrap();
    assert_eq!(prosail_forward(&pv, &a).unwrap(), want);
    let lanes = Prosail::new(&a).bands(&pv).unwrap();
    for b in 0..N_BANDS {
        assert!((lanes.0[b] - want.0[b]).abs() < 1e-15);
    }
}

#[test]
fn bands_bounded_over_random_draws() {
    let a = assets();
    let model = Prosail::new(&a);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut saturated = 0;
    for _ in 0..10_000 {
        let pv = random_pv(&mut rng);
        let b = model.bands(&pv).unwrap();
        assert!(b.0.iter().all(|v| *v >= 0.0), "{pv:?}: {b:?}");
        // A saturated Lambertian soil under a sparse canopy lets the hotspot
        // push the reflectance factor above one; the reference model agrees.
        let soil = crate::sail::soil_spectrum(pv.canopy.soil_wet, pv.canopy.soil_bright, &a.soil);
        if soil.values.iter().any(|&v| v >= 1.0) {
            saturated += 1;
        } else {
            assert!(b.0.iter().all(|v| *v <= 1.0), "{pv:?}: {b:?}");
        }
    }
    assert!(saturated > 0);
}

#[test]
fn forward_is_deterministic() {
    let model = Prosail::new(&assets());
    let pv = ParameterVector::midpoint();
    assert_eq!(model.bands(&pv).unwrap(), model.bands(&pv).unwrap());
}

#[test]
fn band_gradients_match_finite_differences() {
    let model = Prosail::new(&assets());
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let checked = [idx::LAI, idx::CAB, idx::CW, idx::ALA, idx::HOTSPOT, idx::SOIL_WET, idx::SOIL_BRIGHT, idx::N, idx::CAR, idx::CBROWN, idx::CM];
    let eval = |x: &[f64; N_PARAMS]| model.bands(&ParameterVector::from_array(x)).unwrap().0;
    for _ in 0..20 {
        let mut pv = random_pv(&mut rng);
        // Keep the soil unclipped so that the soil gradient is informative.
        pv.canopy.soil_bright = pv.canopy.soil_bright.min(1.5);
        let x = pv.to_array();
        let tape = Tape::new();
        let latent: [Var<'_>; N_LATENT] = std::array::from_fn(|i| tape.scalar(x[i]));
        let out = model.bands_on_tape(&latent, &pv.geometry);
        for b in 0..N_BANDS {
            let g = tape.backward(out.col(b)).unwrap();
            for &i in &checked {
                let h = 1e-5 * VARIABLES[i].width();
                let (mut up, mut down) = (x, x);
                up[i] += h;
                down[i] -= h;
                let numeric = (eval(&up)[b] - eval(&down)[b]) / (2.0 * h);
                let analytic = g.scalar(latent[i]);
                let w = VARIABLES[i].width();
                assert!(
                    relative_error(analytic * w, numeric * w, 1e-6) < 1e-4,
                    "{} band {b}: {analytic} vs {numeric} at {pv:?}",
                    VARIABLES[i].name
                );
            }
        }
    }
}

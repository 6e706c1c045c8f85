use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::params::{variable_index, VARIABLES};
use crate::spectral::Assets;
use crate::testutil::oracles::{ks_statistic, mean_and_se, truncated_normal_by_quadrature};

fn tn_spec(lower: f64, upper: f64, mean: f64, sd: f64) -> VariableSpec {
    VariableSpec { name: "LAI".into(), family: Family::TruncatedNormal, lower, upper, mean: Some(mean), sd: Some(sd) }
}

fn draws(spec: &VariableSpec, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample_variable(spec, &mut rng)).collect()
}

fn resolved(text: &str) -> ResolvedSampler {
    SamplerConfig::from_toml(text).unwrap().resolve().unwrap()
}

#[test]
fn very_wide_truncated_normal_is_uniform() {
    let mut xs = draws(&tn_spec(0.0, 10.0, 5.0, 1e6), 100_000, 1);
    assert!(xs.iter().all(|x| (0.0..=10.0).contains(x)));
    let d = ks_statistic(&mut xs, |x| x / 10.0);
    assert!(d < 0.01, "KS statistic {d}");
}

#[test]
fn symmetric_spec_has_centred_mean() {
    let xs = draws(&tn_spec(4.0, 6.0, 5.0, 0.8), 100_000, 2);
    let (m, se) = mean_and_se(&xs);
    assert!((m - 5.0).abs() < 3.0 * se, "{m} ± {se}");
}

#[test]
fn draws_match_quadrature_moments() {
    let xs = draws(&tn_spec(0.0, 1.0, 0.5, 0.2), 100_000, 3);
    let (_, mean, var, _) = truncated_normal_by_quadrature(0.5, 0.2, 0.0, 1.0);
    let (m, se) = mean_and_se(&xs);
    assert!((m - mean).abs() < 3.0 * se);
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let (v, se) = mean_and_se(&sq);
    assert!((v - var).abs() < 3.0 * se, "{v} vs {var} ± {se}");
}

#[test]
fn default_config_matches_the_variable_table() {
    let s = SamplerConfig::default().resolve().unwrap();
    for (spec, info) in s.specs.iter().zip(&VARIABLES) {
        assert_eq!((spec.name.as_str(), spec.family, spec.lower, spec.upper), (info.name, info.family, info.lower, info.upper));
        if info.family == Family::TruncatedNormal {
            assert_eq!(spec.mean, Some(info.midpoint()));
            assert_eq!(spec.sd, Some(info.width() / 4.0));
        }
    }
    assert_eq!(s.noise_level, 0.005);
    assert_eq!(s.rules.len(), 1);
}

#[test]
fn dense_canopies_trigger_the_rule() {
    let s = resolved("[variables.LAI]\nlower = 7.0\n");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20_000 {
        let pv = sample_parameters(&s, &mut rng);
        assert!((45.0..=90.0).contains(&pv.leaf.cab));
        assert!((1.3..=1.8).contains(&pv.leaf.n_struct));
        assert!((0.5..=1.2).contains(&pv.canopy.soil_bright));
        assert!(bound_violations(&s, &pv).is_empty());
    }
}

#[test]
fn sparse_canopies_keep_the_full_ranges() {
    let s = resolved("[variables.LAI]\nupper = 6.0\n");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cab: Vec<f64> = (0..20_000).map(|_| sample_parameters(&s, &mut rng).leaf.cab).collect();
    assert!(cab.iter().all(|c| (20.0..=90.0).contains(c)));
    assert!(cab.iter().any(|&c| c < 45.0));
}

#[test]
fn empty_rule_list_respects_table_bounds() {
    let s = resolved("rules = []\n");
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100_000 {
        let x = sample_parameters(&s, &mut rng).to_array();
        for (v, info) in x.iter().zip(&VARIABLES) {
            assert!(info.contains(*v), "{} = {v}", info.name);
        }
    }
}

#[test]
fn config_errors_name_the_problem() {
    let e = SamplerConfig::from_toml("noise_levl = 0.1\n").unwrap_err().to_string();
    assert!(e.contains("noise_levl"), "{e}");
    let e = resolved_err("[variables.LIA]\nsd = 1.0\n");
    assert!(e.contains("LIA"), "{e}");
    let e = resolved_err("[[rules]]\ncomparator = \">=\"\nthreshold = 7.0\nbounds = { Cbb = [45.0, 90.0] }\n");
    assert!(e.contains("Cbb"), "{e}");
    let e = resolved_err("[[rules]]\ncomparator = \">=\"\nthreshold = 7.0\nbounds = { Cab = [10.0, 90.0] }\n");
    assert!(e.contains("not nested"), "{e}");
    let e = resolved_err("[variables.Cab]\nsd = -1.0\n");
    assert!(e.contains("Cab"), "{e}");
    let e = resolved_err("[variables.LAI]\nupper = 12.0\n");
    assert!(e.contains("physical range"), "{e}");
}

fn resolved_err(text: &str) -> String {
    SamplerConfig::from_toml(text).unwrap().resolve().unwrap_err().to_string()
}

#[test]
fn overrides_change_one_variable() {
    let s = resolved("[variables.LAI]\nmean = 2.0\nsd = 1.5\n");
    let lai = &s.specs[idx::LAI];
    assert_eq!((lai.mean, lai.sd), (Some(2.0), Some(1.5)));
    let cab = &s.specs[variable_index("Cab").unwrap()];
    assert_eq!(cab.mean, Some(55.0));
}

#[test]
fn zero_noise_is_identity() {
    let b = BandReflectance([0.01, 0.05, 0.03, 0.1, 0.3, 0.4, 0.45, 0.47, 0.25, 0.12]);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    assert_eq!(add_noise(&b, &mut rng, 0.0, NoiseMode::Absolute), b);
}

#[test]
fn noise_has_requested_spread() {
    let b = BandReflectance([0.3; N_BANDS]);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 100_000;
    let mut cols: Vec<Vec<f64>> = (0..N_BANDS).map(|_| Vec::with_capacity(n)).collect();
    for _ in 0..n {
        let y = add_noise(&b, &mut rng, 0.005, NoiseMode::Absolute);
        for (c, v) in cols.iter_mut().zip(y.0) {
            c.push(v);
        }
    }
    for c in &cols {
        let (m, _) = mean_and_se(c);
        let sd = (c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        assert!((sd - 0.005).abs() < 0.05 * 0.005, "sd {sd}");
    }
}

#[test]
fn noise_never_goes_negative() {
    let b = BandReflectance([0.001; N_BANDS]);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10_000 {
        assert!(add_noise(&b, &mut rng, 0.005, NoiseMode::Absolute).0.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

#[test]
fn relative_noise_scales_with_the_band() {
    let b = BandReflectance([0.0; N_BANDS]);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    assert_eq!(add_noise(&b, &mut rng, 0.5, NoiseMode::Relative), b);
}

fn generate(n: usize, seed: u64, threads: usize) -> (Vec<u8>, DatasetManifest, GenerationSummary) {
    let assets = Assets::bundled().unwrap();
    let model = Prosail::new(&assets);
    let sampler = SamplerConfig::default().resolve().unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let mut w = DatasetWriter::new(Vec::new(), n).unwrap();
        let (m, s) = generate_dataset(n, &sampler, seed, &model, &assets.checksums, &mut w).unwrap();
        (w.finish().unwrap(), m, s)
    })
}

#[test]
fn generation_is_deterministic_across_runs_and_threads() {
    let (a, ma, _) = generate(100, 7, 1);
    let (b, mb, _) = generate(100, 7, 3);
    assert_eq!(a, b);
    assert_eq!(ma, mb);
    let (c, _, _) = generate(100, 8, 1);
    assert_ne!(a, c);
    assert_eq!(ma.data_sha256, hex::encode(Sha256::digest(&a)));
}

#[test]
fn generated_rows_respect_bounds_and_rules() {
    let (bytes, manifest, summary) = generate(1000, 11, 2);
    assert_eq!(summary.bound_violations, 0);
    assert!(summary.rule_fired > 0);
    let ds = Dataset::decode(&bytes, "mem").unwrap();
    assert_eq!((ds.len(), manifest.rows), (1000, 1000));
    let sampler = SamplerConfig::default().resolve().unwrap();
    let mut dense_cab = Vec::new();
    for i in 0..ds.len() {
        let pv = ds.params(i);
        for (v, spec) in pv.to_array().iter().zip(&sampler.specs) {
            // Stored as f32: allow one rounding step outside the interval.
            assert!(*v >= spec.lower - 1e-6 * spec.upper.abs() && *v <= spec.upper * (1.0 + 1e-6));
        }
        if pv.canopy.lai >= 7.0 {
            dense_cab.push(pv.leaf.cab);
        }
        assert!(ds.noisy(i).0.iter().all(|v| (0.0..=1.0).contains(v)));
    }
    assert!(!dense_cab.is_empty());
    assert!(dense_cab.iter().all(|&c| c >= 45.0 - 1e-4));
}

#[test]
fn stored_rows_match_simulation() {
    let (bytes, _, _) = generate(5, 3, 1);
    let ds = Dataset::decode(&bytes, "mem").unwrap();
    let assets = Assets::bundled().unwrap();
    let model = Prosail::new(&assets);
    let sampler = SamplerConfig::default().resolve().unwrap();
    for i in 0..5 {
        let s = simulate_sample(&model, &sampler, 3, i as u64).unwrap();
        let want: Vec<f32> = s
            .params
            .to_array()
            .iter()
            .map(|&x| x as f32)
            .chain(bands_to_f32(&s.clean_bands))
            .chain(bands_to_f32(&s.noisy_bands))
            .collect();
        assert_eq!(ds.row(i), &want[..]);
    }
}

#[test]
fn decode_rejects_damaged_files() {
    let (bytes, _, _) = generate(3, 1, 1);
    assert!(Dataset::decode(&bytes[..bytes.len() - 1], "cut").is_err());
    assert!(Dataset::decode(b"garbage", "g").is_err());
    let mut wrong = bytes.clone();
    wrong[0] = b'X';
    assert!(Dataset::decode(&wrong, "magic").is_err());
    let text = String::from_utf8_lossy(&bytes[..bytes.iter().position(|&b| b == b'\n').unwrap()]).replace("rows=3", "rows=4");
    let mut more = text.into_bytes();
    more.extend_from_slice(&bytes[bytes.iter().position(|&b| b == b'\n').unwrap()..]);
    let e = Dataset::decode(&more, "rows").unwrap_err().to_string();
    assert!(e.contains("rows need"), "{e}");
}

#[test]
fn writer_enforces_row_count() {
    let w = DatasetWriter::new(Vec::new(), 2).unwrap();
    assert!(w.finish().is_err());
}

#[test]
fn csv_export_has_header_and_rows() {
    let (bytes, _, _) = generate(4, 2, 1);
    let ds = Dataset::decode(&bytes, "mem").unwrap();
    let mut out = Vec::new();
    ds.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0].split(',').count(), DATASET_COLUMNS);
    assert!(lines[0].starts_with("N,Cab,Car"));
    assert_eq!(lines[1].split(',').next().unwrap().parse::<f32>().unwrap(), ds.row(0)[0]);
}

#[test]
fn manifest_round_trips() {
    let (_, m, _) = generate(2, 5, 1);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.json");
    m.save(&p).unwrap();
    assert_eq!(DatasetManifest::load(&p).unwrap(), m);
    assert_eq!(m.config_sha256.len(), 64);
    assert_eq!(m.asset_checksums.len(), 3);
}

proptest! {
    #[test]
    fn any_seed_stays_in_bounds(seed in any::<u64>(), index in 0u64..1_000_000) {
        let s = SamplerConfig::default().resolve().unwrap();
        let pv = sample_parameters(&s, &mut sample_rng(seed, index));
        prop_assert!(bound_violations(&s, &pv).is_empty());
    }
}

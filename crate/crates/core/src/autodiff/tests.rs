use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn fd<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

#[test]
fn square_value_and_gradient() {
    let rec = forward(|_, x| vec![x[0] * x[0]], &[3.0]).unwrap();
    assert_eq!(rec.outputs(), vec![9.0]);
    assert_eq!(rec.gradient(0).unwrap(), vec![6.0]);
}

#[test]
fn product_gradient() {
    let rec = forward(|_, v| vec![v[0] * v[1]], &[2.0, 5.0]).unwrap();
    assert_eq!(rec.gradient(0).unwrap(), vec![5.0, 2.0]);
}

#[test]
fn log_of_zero_is_a_domain_error() {
    let err = forward(|_, v| vec![v[0].ln()], &[0.0]).err().unwrap();
    assert_eq!(err, DiffError::Domain { op: "log" });
    assert_eq!(err.to_string(), "log domain");
}

#[test]
fn non_finite_value_names_primitive() {
    let err = forward(|_, v| vec![v[0].exp()], &[1e4]).err().unwrap();
    assert_eq!(err, DiffError::NonFinite { op: "exp" });
}

#[test]
fn output_index_out_of_range() {
    let rec = forward(|_, v| vec![v[0]], &[1.0]).unwrap();
    assert!(matches!(rec.gradient(3), Err(DiffError::OutputIndex { .. })));
}

// Every primitive against central differences at 10 random points.
#[test]
fn unary_primitives_match_finite_differences() {
    type Prim = (&'static str, fn(Var<'_>) -> Var<'_>, fn(f64) -> f64, (f64, f64));
    let prims: Vec<Prim> = vec![
        ("exp", |v| v.exp(), f64::exp, (-3.0, 3.0)),
        ("ln", |v| v.ln(), f64::ln, (0.1, 5.0)),
        ("sqrt", |v| v.sqrt(), f64::sqrt, (0.1, 5.0)),
        ("powf", |v| v.powf(2.7), |x| x.powf(2.7), (0.2, 3.0)),
        ("square", |v| v.square(), |x| x * x, (-3.0, 3.0)),
        ("recip", |v| v.recip(), |x| 1.0 / x, (0.2, 3.0)),
        ("tanh", |v| v.tanh(), f64::tanh, (-3.0, 3.0)),
        ("logistic", |v| v.logistic(), crate::special::logistic, (-6.0, 6.0)),
        ("softplus", |v| v.softplus(), crate::special::softplus, (-6.0, 6.0)),
        ("gelu", |v| v.gelu(), |x| 0.5 * x * (1.0 + (0.797_884_560_802_865_4 * (x + 0.044_715 * x.powi(3))).tanh()), (-3.0, 3.0)),
        ("normal_pdf", |v| v.normal_pdf(), |x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(), (-5.0, 5.0)),
        ("erf", |v| v.erf(), crate::special::erf, (-2.5, 2.5)),
        ("normal_cdf", |v| v.normal_cdf(), crate::special::norm_cdf, (-4.0, 4.0)),
        ("normal_quantile", |v| v.normal_quantile(), crate::special::norm_quantile, (0.01, 0.99)),
        ("asin", |v| v.asin(), f64::asin, (-0.9, 0.9)),
        ("abs", |v| v.abs(), f64::abs, (0.1, 3.0)),
        ("neg", |v| -v, |x| -x, (-3.0, 3.0)),
        ("add_const", |v| v + 2.5, |x| x + 2.5, (-3.0, 3.0)),
        ("rsub_const", |v| 2.5 - v, |x| 2.5 - x, (-3.0, 3.0)),
        ("rdiv_const", |v| 2.5 / v, |x| 2.5 / x, (0.3, 3.0)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (name, op, plain, (lo, hi)) in prims {
        for _ in 0..10 {
            let x = rng.random_range(lo..hi);
            let rec = forward(|_, v| vec![op(v[0])], &[x]).unwrap();
            assert!((rec.outputs()[0] - plain(x)).abs() <= 1e-15 * plain(x).abs().max(1.0), "{name}");
            let g = rec.gradient(0).unwrap()[0];
            let n = fd(plain, x, 1e-6);
            assert!(relative_error(g, n, 1e-8) < 1e-6, "{name} at {x}: {g} vs {n}");
        }
    }
}

#[test]
fn binary_primitives_match_finite_differences() {
    type Prim = (&'static str, for<'t> fn(Var<'t>, Var<'t>) -> Var<'t>, fn(f64, f64) -> f64);
    let prims: Vec<Prim> = vec![
        ("add", |a, b| a + b, |a, b| a + b),
        ("sub", |a, b| a - b, |a, b| a - b),
        ("mul", |a, b| a * b, |a, b| a * b),
        ("div", |a, b| a / b, |a, b| a / b),
        ("pow", |a, b| a.pow(b), f64::powf),
        ("max", |a, b| a.max(b), f64::max),
        ("min", |a, b| a.min(b), f64::min),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (name, op, plain) in prims {
        for _ in 0..10 {
            let a = rng.random_range(0.2..3.0);
            let b = rng.random_range(0.2..3.0);
            let rec = forward(|_, v| vec![op(v[0], v[1])], &[a, b]).unwrap();
            let want = plain(a, b);
            assert!((rec.outputs()[0] - want).abs() <= 1e-15 * want.abs(), "{name}");
            let g = rec.gradient(0).unwrap();
            let na = fd(|x| plain(x, b), a, 1e-6);
            let nb = fd(|y| plain(a, y), b, 1e-6);
            assert!(relative_error(g[0], na, 1e-8) < 1e-6, "{name} d/da");
            assert!(relative_error(g[1], nb, 1e-8) < 1e-6, "{name} d/db");
        }
    }
}

#[test]
fn min_max_ties_go_to_first_argument() {
    let rec = forward(|_, v| vec![v[0].max(v[1]), v[0].min(v[1])], &[2.0, 2.0]).unwrap();
    assert_eq!(rec.gradient(0).unwrap(), vec![1.0, 0.0]);
    assert_eq!(rec.gradient(1).unwrap(), vec![1.0, 0.0]);
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
}

// d(sum(W ⊙ f(X)))/dX for matrix-valued primitives, via central differences.
fn check_matrix_op(name: &str, f: impl for<'t> Fn(Var<'t>) -> Var<'t>, x: Array2<f64>, w: Array2<f64>) {
    let loss = |x: &Array2<f64>| {
        let tape = Tape::new();
        let xv = tape.constant(x.clone());
        let y = f(xv);
        (y.value().as_ref() * &w).sum()
    };
    let tape = Tape::new();
    let xv = tape.var(x.clone());
    let y = f(xv);
    let l = (y * tape.constant(w.clone())).sum();
    let g = tape.backward(l).unwrap().wrt(xv);
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let mut up = x.clone();
            up[[i, j]] += 1e-6;
            let mut down = x.clone();
            down[[i, j]] -= 1e-6;
            let n = (loss(&up) - loss(&down)) / 2e-6;
            assert!(relative_error(g[[i, j]], n, 1e-8) < 1e-6, "{name} at ({i},{j}): {} vs {n}", g[[i, j]]);
        }
    }
}

#[test]
fn matrix_primitives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10 {
        let b = random_matrix(&mut rng, 4, 3);
        let x = random_matrix(&mut rng, 5, 4);
        let bb = b.clone();
        check_matrix_op("matmul", move |v| v.matmul(v.tape().constant(bb.clone())), x.clone(), random_matrix(&mut rng, 5, 3));
        check_matrix_op("transpose", |v| v.t(), x.clone(), random_matrix(&mut rng, 4, 5));
        check_matrix_op("softmax", |v| v.softmax_rows(), x.clone(), random_matrix(&mut rng, 5, 4));
        check_matrix_op("sum_rows", |v| v.sum_rows(), x.clone(), random_matrix(&mut rng, 1, 4));
        check_matrix_op("sum_cols", |v| v.sum_cols(), x.clone(), random_matrix(&mut rng, 5, 1));
        check_matrix_op("mean", |v| v.mean(), x.clone(), random_matrix(&mut rng, 1, 1));
        check_matrix_op("slice", |v| v.slice_cols(1, 3), x.clone(), random_matrix(&mut rng, 5, 2));
        check_matrix_op(
            "concat",
            |v| Var::concat_cols(&[v.slice_cols(2, 4), v.exp(), v.col(0)]),
            x.clone(),
            random_matrix(&mut rng, 5, 7),
        );
        check_matrix_op("row_broadcast", |v| v * v.sum_rows(), x.clone(), random_matrix(&mut rng, 5, 4));
        check_matrix_op("col_broadcast", |v| v / (v.square().sum_cols() + 1.0), x.clone(), random_matrix(&mut rng, 5, 4));
        let mask = Array2::from_shape_fn((5, 4), |_| rng.random_bool(0.5));
        check_matrix_op("select", move |v| Var::select(&mask, v.exp(), v * 3.0), x.clone(), random_matrix(&mut rng, 5, 4));
        check_matrix_op("clamp", |v| v.clamp(-0.5, 0.5), x.clone(), random_matrix(&mut rng, 5, 4));
    }
}

#[test]
fn replay_is_bit_identical() {
    let f = |x: &[f64]| {
        let rec = forward(
            |_, v| vec![(v[0].exp() * v[1]).tanh() + v[1].ln() * v[0].softplus()],
            x,
        )
        .unwrap();
        (rec.outputs()[0].to_bits(), rec.gradient(0).unwrap().iter().map(|g| g.to_bits()).collect::<Vec<_>>())
    };
    assert_eq!(f(&[0.3, 1.7]), f(&[0.3, 1.7]));
}

#[test]
fn grad_check_passes_polynomial_and_flags_wrong_partial() {
    let report = grad_check(|_, v| v[0] * v[0] * v[1] + v[1].powf(3.0), &[1.3, -0.7], 1e-5, 1e-6).unwrap();
    assert!(report.passed(), "{report}");

    // Deliberately wrong derivative for the second coordinate.
    let report = grad_check(
        |_, v| v[0] * 2.0 + v[1].map("bad_square", |x| x * x, |x, _| 3.0 * x),
        &[0.5, 1.5],
        1e-5,
        1e-6,
    )
    .unwrap();
    assert!(!report.passed());
    let bad: Vec<_> = report.failures().map(|r| r.index).collect();
    assert_eq!(bad, vec![1]);
    assert!(report.to_string().contains("FAIL"));
}

#[test]
fn adam_minimizes_quadratic() {
    let mut params = vec![array![[3.0, -2.0]]];
    let mut opt = Adam::new(AdamConfig { learning_rate: 0.1, ..Default::default() }, &[2]);
    for _ in 0..500 {
        let g = params[0].mapv(|w| 2.0 * w);
        opt.update(&mut params, &[g]);
    }
    assert!(params[0].iter().all(|w| w.abs() < 1e-2), "{:?}", params[0]);
}

#[test]
fn adam_clips_gradient_norm() {
    let mut params = vec![array![[0.0]]];
    let cfg = AdamConfig { learning_rate: 1.0, clip_norm: 1.0, ..Default::default() };
    let mut opt = Adam::new(cfg, &[1]);
    let norm = opt.update(&mut params, &[array![[100.0]]]);
    assert_eq!(norm, 100.0);
    // First Adam step has magnitude lr regardless of scale.
    assert!((params[0][[0, 0]] + 1.0).abs() < 1e-6);
}

proptest! {
    #[test]
    fn differentiation_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, x in 0.2f64..2.0, y in 0.2f64..2.0) {
        let g1 = forward(|_, v| vec![v[0].exp() * v[1]], &[x, y]).unwrap().gradient(0).unwrap();
        let g2 = forward(|_, v| vec![v[0].ln() + v[1].square()], &[x, y]).unwrap().gradient(0).unwrap();
        let gc = forward(|_, v| vec![(v[0].exp() * v[1]) * a + (v[0].ln() + v[1].square()) * b], &[x, y])
            .unwrap()
            .gradient(0)
            .unwrap();
        for i in 0..2 {
            let want = a * g1[i] + b * g2[i];
            prop_assert!((gc[i] - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }
}

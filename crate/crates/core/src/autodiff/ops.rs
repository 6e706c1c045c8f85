use std::ops::{Add, Div, Mul, Neg, Sub};

use ndarray::{Array2, Axis, Zip};

use super::tape::{Op, Partial, Tensor, Var};
use crate::special;

fn broadcast_shape(a: (usize, usize), b: (usize, usize)) -> Option<(usize, usize)> {
    let dim = |x: usize, y: usize| match (x, y) {
        _ if x == y => Some(x),
        (1, y) => Some(y),
        (x, 1) => Some(x),
        _ => None,
    };
    Some((dim(a.0, b.0)?, dim(a.1, b.1)?))
}

fn all_finite(t: &Tensor) -> bool {
    t.iter().all(|v| v.is_finite())
}

impl<'t> Var<'t> {
    fn same_tape(&self, other: &Var<'t>) {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "variables recorded on different tapes"
        );
    }

    /// Elementwise primitive with value `f(x)` and derivative `df(x, f(x))`.
    pub fn map(
        self,
        name: &'static str,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64, f64) -> f64,
    ) -> Var<'t> {
        let tape = self.tape;
        let x = self.value();
        let y = x.mapv(&f);
        let rg = self.requires_grad();
        let d = if rg {
            let mut d = Array2::zeros(x.dim());
            Zip::from(&mut d).and(&*x).and(&y).for_each(|d, &x, &y| *d = df(x, y));
            Some(d)
        } else {
            None
        };
        let finite = all_finite(&y) && d.as_ref().is_none_or(all_finite);
        let op = match d {
            Some(d) => Op::Unary { x: self.id, d },
            None => Op::Leaf,
        };
        let id = tape.push(y, op, rg);
        if !finite {
            tape.record_fault(name, id, false);
        }
        Var { tape, id }
    }

    /// Like [`Var::map`] but flags a domain fault when `valid(x)` fails.
    pub fn map_checked(
        self,
        name: &'static str,
        valid: impl Fn(f64) -> bool,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64, f64) -> f64,
    ) -> Var<'t> {
        if !self.value().iter().all(|&x| valid(x)) {
            // The faulting node is the one about to be pushed.
            self.tape.record_fault(name, self.tape.len(), true);
        }
        self.map(name, f, df)
    }

    fn binary(
        self,
        rhs: Var<'t>,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        partials: impl Fn(&Tensor, &Tensor, &Tensor) -> (Partial, Partial),
    ) -> Var<'t> {
        self.same_tape(&rhs);
        let tape = self.tape;
        let a = self.value();
        let b = rhs.value();
        let shape = broadcast_shape(a.dim(), b.dim()).unwrap_or_else(|| {
            panic!("{name}: incompatible shapes {:?} and {:?}", a.dim(), b.dim())
        });
        let av = a.broadcast(shape).expect("broadcast lhs");
        let bv = b.broadcast(shape).expect("broadcast rhs");
        let mut y = Array2::zeros(shape);
        Zip::from(&mut y).and(&av).and(&bv).for_each(|y, &a, &b| *y = f(a, b));
        let (ra, rb) = (self.requires_grad(), rhs.requires_grad());
        let mut finite = all_finite(&y);
        let op = if ra || rb {
            let (pa, pb) = partials(&av.to_owned(), &bv.to_owned(), &y);
            for p in [&pa, &pb] {
                if let Partial::Scaled(d) = p {
                    finite &= all_finite(d);
                }
            }
            Op::Binary {
                a: self.id,
                b: rhs.id,
                da: ra.then_some(pa),
                db: rb.then_some(pb),
            }
        } else {
            Op::Leaf
        };
        let id = tape.push(y, op, ra || rb);
        if !finite {
            tape.record_fault(name, id, false);
        }
        Var { tape, id }
    }

    pub fn exp(self) -> Var<'t> {
        self.map("exp", f64::exp, |_, y| y)
    }

    /// Natural logarithm; non-positive input is a `log` domain fault.
    pub fn ln(self) -> Var<'t> {
        self.map_checked("log", |x| x > 0.0, f64::ln, |x, _| 1.0 / x)
    }

    pub fn sqrt(self) -> Var<'t> {
        self.map_checked("sqrt", |x| x >= 0.0, f64::sqrt, |_, y| 0.5 / y)
    }

    pub fn powf(self, p: f64) -> Var<'t> {
        self.map("powf", move |x| x.powf(p), move |x, _| p * x.powf(p - 1.0))
    }

    pub fn square(self) -> Var<'t> {
        self.map("square", |x| x * x, |x, _| 2.0 * x)
    }

    pub fn recip(self) -> Var<'t> {
        self.map("recip", |x| 1.0 / x, |_, y| -y * y)
    }

    pub fn tanh(self) -> Var<'t> {
        self.map("tanh", f64::tanh, |_, y| 1.0 - y * y)
    }

    pub fn logistic(self) -> Var<'t> {
        self.map("logistic", special::logistic, |_, y| y * (1.0 - y))
    }

    pub fn softplus(self) -> Var<'t> {
        self.map("softplus", special::softplus, |x, _| special::logistic(x))
    }

    pub fn erf(self) -> Var<'t> {
        self.map("erf", special::erf, |x, _| {
            2.0 / std::f64::consts::PI.sqrt() * (-x * x).exp()
        })
    }

    pub fn gelu(self) -> Var<'t> {
        self.map("gelu", special::gelu, |x, _| special::gelu_deriv(x))
    }

    /// Standard normal density.
    pub fn normal_pdf(self) -> Var<'t> {
        self.map("normal_pdf", special::norm_pdf, |x, y| -x * y)
    }

    /// Standard normal CDF.
    pub fn normal_cdf(self) -> Var<'t> {
        self.map("normal_cdf", special::norm_cdf, |x, _| special::norm_pdf(x))
    }

    /// Standard normal quantile; input must lie in (0, 1).
    pub fn normal_quantile(self) -> Var<'t> {
        self.map_checked(
            "normal_quantile",
            |p| p > 0.0 && p < 1.0,
            special::norm_quantile,
            |_, y| 1.0 / special::norm_pdf(y),
        )
    }

    pub fn asin(self) -> Var<'t> {
        self.map_checked(
            "asin",
            |x| (-1.0..=1.0).contains(&x),
            f64::asin,
            |x, _| 1.0 / (1.0 - x * x).sqrt(),
        )
    }

    /// |x| with subgradient +1 at zero.
    pub fn abs(self) -> Var<'t> {
        self.map("abs", f64::abs, |x, _| if x >= 0.0 { 1.0 } else { -1.0 })
    }

    /// Clamp into `[lo, hi]`; gradient is zero where the clamp is active.
    pub fn clamp(self, lo: f64, hi: f64) -> Var<'t> {
        self.map(
            "clamp",
            move |x| x.clamp(lo, hi),
            move |x, _| if (lo..=hi).contains(&x) { 1.0 } else { 0.0 },
        )
    }

    /// Elementwise maximum; ties send the gradient to `self`.
    pub fn max(self, other: Var<'t>) -> Var<'t> {
        self.binary(other, "max", f64::max, |a, b, _| {
            let m = Zip::from(a).and(b).map_collect(|&a, &b| if a >= b { 1.0 } else { 0.0 });
            (Partial::Scaled(m.clone()), Partial::Scaled(m.mapv(|v| 1.0 - v)))
        })
    }

    /// Elementwise minimum; ties send the gradient to `self`.
    pub fn min(self, other: Var<'t>) -> Var<'t> {
        self.binary(other, "min", f64::min, |a, b, _| {
            let m = Zip::from(a).and(b).map_collect(|&a, &b| if a <= b { 1.0 } else { 0.0 });
            (Partial::Scaled(m.clone()), Partial::Scaled(m.mapv(|v| 1.0 - v)))
        })
    }

    pub fn max_scalar(self, c: f64) -> Var<'t> {
        self.map("max", move |x| x.max(c), move |x, _| if x >= c { 1.0 } else { 0.0 })
    }

    /// `self` raised to a differentiable exponent; the base must be positive.
    pub fn pow(self, exponent: Var<'t>) -> Var<'t> {
        (exponent * self.ln()).exp()
    }

    /// Chooses `on_true` where `mask` holds and `on_false` elsewhere. Gradient
    /// flows only into the chosen branch.
    pub fn select(mask: &Array2<bool>, on_true: Var<'t>, on_false: Var<'t>) -> Var<'t> {
        on_true.same_tape(&on_false);
        let tape = on_true.tape;
        let shape = mask.dim();
        let a = on_true.value();
        let b = on_false.value();
        let av = a.broadcast(shape).expect("select: true branch shape");
        let bv = b.broadcast(shape).expect("select: false branch shape");
        let y = Zip::from(mask).and(&av).and(&bv).map_collect(|&m, &a, &b| if m { a } else { b });
        let (ra, rb) = (on_true.requires_grad(), on_false.requires_grad());
        let op = if ra || rb {
            let m = mask.mapv(|b| if b { 1.0 } else { 0.0 });
            Op::Binary {
                a: on_true.id,
                b: on_false.id,
                da: ra.then(|| Partial::Scaled(m.clone())),
                db: rb.then(|| Partial::Scaled(m.mapv(|v| 1.0 - v))),
            }
        } else {
            Op::Leaf
        };
        let finite = all_finite(&y);
        let id = tape.push(y, op, ra || rb);
        if !finite {
            tape.record_fault("select", id, false);
        }
        Var { tape, id }
    }

    pub fn matmul(self, rhs: Var<'t>) -> Var<'t> {
        self.same_tape(&rhs);
        let a = self.value();
        let b = rhs.value();
        assert_eq!(a.ncols(), b.nrows(), "matmul: inner dimensions differ");
        let y = a.dot(&*b);
        let rg = self.requires_grad() || rhs.requires_grad();
        let op = if rg { Op::MatMul { a: self.id, b: rhs.id } } else { Op::Leaf };
        self.finish("matmul", y, op, rg)
    }

    pub fn t(self) -> Var<'t> {
        let y = self.value().t().to_owned();
        let rg = self.requires_grad();
        let op = if rg { Op::Transpose { x: self.id } } else { Op::Leaf };
        self.finish("transpose", y, op, rg)
    }

    pub fn sum(self) -> Var<'t> {
        let y = Array2::from_elem((1, 1), self.value().sum());
        let rg = self.requires_grad();
        let op = if rg { Op::SumAll { x: self.id } } else { Op::Leaf };
        self.finish("sum", y, op, rg)
    }

    pub fn mean(self) -> Var<'t> {
        let n = self.value().len() as f64;
        self.sum() * (1.0 / n)
    }

    /// Sum over rows, giving a 1xC row.
    pub fn sum_rows(self) -> Var<'t> {
        let y = self.value().sum_axis(Axis(0)).insert_axis(Axis(0));
        let rg = self.requires_grad();
        let op = if rg { Op::SumRows { x: self.id } } else { Op::Leaf };
        self.finish("sum_rows", y, op, rg)
    }

    /// Sum over columns, giving an Rx1 column.
    pub fn sum_cols(self) -> Var<'t> {
        let y = self.value().sum_axis(Axis(1)).insert_axis(Axis(1));
        let rg = self.requires_grad();
        let op = if rg { Op::SumCols { x: self.id } } else { Op::Leaf };
        self.finish("sum_cols", y, op, rg)
    }

    pub fn mean_rows(self) -> Var<'t> {
        let n = self.shape().0 as f64;
        self.sum_rows() * (1.0 / n)
    }

    pub fn mean_cols(self) -> Var<'t> {
        let n = self.shape().1 as f64;
        self.sum_cols() * (1.0 / n)
    }

    /// Row-wise softmax.
    pub fn softmax_rows(self) -> Var<'t> {
        let x = self.value();
        let mut y = (*x).clone();
        for mut row in y.rows_mut() {
            let m = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            row.mapv_inplace(|v| (v - m).exp());
            let s = row.sum();
            row.mapv_inplace(|v| v / s);
        }
        let rg = self.requires_grad();
        let op = if rg { Op::SoftmaxRows { x: self.id } } else { Op::Leaf };
        self.finish("softmax", y, op, rg)
    }

    /// Columns `start..end`.
    pub fn slice_cols(self, start: usize, end: usize) -> Var<'t> {
        let y = self.value().slice(ndarray::s![.., start..end]).to_owned();
        let rg = self.requires_grad();
        let op = if rg { Op::SliceCols { x: self.id, start } } else { Op::Leaf };
        self.finish("slice", y, op, rg)
    }

    /// Single column `j` as an Rx1 value.
    pub fn col(self, j: usize) -> Var<'t> {
        self.slice_cols(j, j + 1)
    }

    pub fn concat_cols(parts: &[Var<'t>]) -> Var<'t> {
        assert!(!parts.is_empty(), "concat of nothing");
        let tape = parts[0].tape;
        let values: Vec<_> = parts.iter().map(|p| p.value()).collect();
        let views: Vec<_> = values.iter().map(|v| v.view()).collect();
        let y = ndarray::concatenate(Axis(1), &views).expect("concat rows differ");
        let rg = parts.iter().any(|p| p.requires_grad());
        let op = if rg {
            Op::ConcatCols { parts: parts.iter().map(|p| (p.id, p.shape().1)).collect() }
        } else {
            Op::Leaf
        };
        let id = tape.push(y, op, rg);
        Var { tape, id }
    }

    fn finish(self, name: &'static str, y: Tensor, op: Op, rg: bool) -> Var<'t> {
        let finite = all_finite(&y);
        let id = self.tape.push(y, op, rg);
        if !finite {
            self.tape.record_fault(name, id, false);
        }
        Var { tape: self.tape, id }
    }

    fn scale(self, c: f64) -> Var<'t> {
        self.map("mul", move |x| x * c, move |_, _| c)
    }

    fn offset(self, c: f64) -> Var<'t> {
        self.map("add", move |x| x + c, |_, _| 1.0)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, "add", |a, b| a + b, |_, _, _| (Partial::One, Partial::One))
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, "sub", |a, b| a - b, |_, _, _| (Partial::One, Partial::NegOne))
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, "mul", |a, b| a * b, |a, b, _| {
            (Partial::Scaled(b.clone()), Partial::Scaled(a.clone()))
        })
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, "div", |a, b| a / b, |_, b, y| {
            (Partial::Scaled(b.mapv(|b| 1.0 / b)), Partial::Scaled(-(y / b)))
        })
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.scale(-1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, c: f64) -> Var<'t> {
        self.offset(c)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, c: f64) -> Var<'t> {
        self.offset(-c)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, c: f64) -> Var<'t> {
        self.scale(c)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, c: f64) -> Var<'t> {
        self.scale(1.0 / c)
    }
}

impl<'t> Add<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn add(self, v: Var<'t>) -> Var<'t> {
        v.offset(self)
    }
}

impl<'t> Sub<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn sub(self, v: Var<'t>) -> Var<'t> {
        v.map("sub", move |x| self - x, |_, _| -1.0)
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, v: Var<'t>) -> Var<'t> {
        v.scale(self)
    }
}

impl<'t> Div<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn div(self, v: Var<'t>) -> Var<'t> {
        v.map("div", move |x| self / x, move |x, _| -self / (x * x))
    }
}

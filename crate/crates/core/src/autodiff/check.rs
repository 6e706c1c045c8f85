use std::fmt;

use super::{DiffError, Tape, Var};

/// Denominator floor of the relative error metric.
pub const RELATIVE_FLOOR: f64 = 1e-8;

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

#[derive(Debug, Clone)]
pub struct GradCheckRow {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub rows: Vec<GradCheckRow>,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &GradCheckRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn worst(&self) -> Option<&GradCheckRow> {
        self.rows.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>6} {:>16} {:>16} {:>10}  status", "coord", "analytic", "numeric", "rel_err")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>6} {:>16.9e} {:>16.9e} {:>10.3e}  {}",
                r.index,
                r.analytic,
                r.numeric,
                r.rel_error,
                if r.pass { "ok" } else { "FAIL" }
            )?;
        }
        write!(
            f,
            "{} of {} coordinates within tol {:e}",
            self.rows.iter().filter(|r| r.pass).count(),
            self.rows.len(),
            self.tol
        )
    }
}

/// Compares the reverse-mode gradient of scalar `f` at `x` with central
/// differences. The step for coordinate `i` is `step * max(1, |x_i|)`.
pub fn grad_check<F>(f: F, x: &[f64], step: f64, tol: f64) -> Result<GradCheckReport, DiffError>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    assert!(step > 0.0, "finite-difference step must be positive");
    let eval = |point: &[f64]| -> Result<f64, DiffError> {
        let tape = Tape::new();
        let vars: Vec<_> = point.iter().map(|&v| tape.constant_scalar(v)).collect();
        let y = f(&tape, &vars);
        tape.check()?;
        Ok(y.item())
    };

    let tape = Tape::new();
    let vars: Vec<_> = x.iter().map(|&v| tape.scalar(v)).collect();
    let y = f(&tape, &vars);
    let grads = tape.backward(y)?;

    let mut rows = Vec::with_capacity(x.len());
    let mut point = x.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let h = step * x[i].abs().max(1.0);
        point[i] = x[i] + h;
        let up = eval(&point)?;
        point[i] = x[i] - h;
        let down = eval(&point)?;
        point[i] = x[i];
        let numeric = (up - down) / (2.0 * h);
        let analytic = grads.scalar(*v);
        let rel_error = relative_error(analytic, numeric, RELATIVE_FLOOR);
        rows.push(GradCheckRow { index: i, analytic, numeric, rel_error, pass: rel_error <= tol });
    }
    Ok(GradCheckReport { rows, tol })
}

use nalgebra::{DMatrix, DVector};

use crate::chart::Chart;
use crate::error::{Error, Result};

use super::expr::Expr;
use super::tape::Tape;

/// Value, coordinate gradient and coordinate Hessian of a scalar at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

/// A scalar field with its first and second partials compiled for repeated
/// evaluation.
#[derive(Clone, Debug)]
pub struct CompiledJet {
    dim: usize,
    tape: Tape,
}

impl CompiledJet {
    pub fn new(e: &Expr, dim: usize) -> CompiledJet {
        let mut exprs = vec![e.clone()];
        let first: Vec<Expr> = (0..dim).map(|i| e.diff(i)).collect();
        exprs.extend(first.iter().cloned());
        for i in 0..dim {
            for j in i..dim {
                exprs.push(first[i].diff(j));
            }
        }
        CompiledJet {
            dim,
            tape: Tape::compile(&exprs),
        }
    }

    pub fn eval(&self, p: &[f64]) -> Result<Jet2> {
        let n = self.dim;
        let out = self.tape.eval(p)?;
        let grad = DVector::from_iterator(n, out[1..=n].iter().copied());
        let mut hess = DMatrix::zeros(n, n);
        let mut k = n + 1;
        for i in 0..n {
            for j in i..n {
                hess[(i, j)] = out[k];
                hess[(j, i)] = out[k];
                k += 1;
            }
        }
        Ok(Jet2 {
            value: out[0],
            grad,
            hess,
        })
    }
}

/// Evaluates `e` and its symbolic first and second partials at `p`.
pub fn eval_jet2(e: &Expr, p: &[f64]) -> Result<Jet2> {
    CompiledJet::new(e, p.len()).eval(p)
}

/// Central-difference gradient and Hessian with step `h`.
///
/// When a chart is given, every stencil point must lie inside its domain.
pub fn fd_oracle(e: &Expr, p: &[f64], h: f64, chart: Option<&Chart>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = p.len();
    if let Some(chart) = chart {
        if !chart.contains(p) {
            return Err(Error::OutOfDomain { point: p.to_vec() });
        }
        let (lo, hi) = chart.domain().iter().zip(p).fold((true, true), |acc, ((a, b), x)| {
            (acc.0 && x - h >= *a, acc.1 && x + h <= *b)
        });
        if !(lo && hi) {
            return Err(Error::StepTooLarge {
                step: h,
                point: p.to_vec(),
            });
        }
    }
    let f = |dx: &[(usize, f64)]| -> Result<f64> {
        let mut q = p.to_vec();
        for &(i, d) in dx {
            q[i] += d;
        }
        e.eval(&q)
    };
    let f0 = f(&[])?;
    let mut grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        let fp = f(&[(i, h)])?;
        let fm = f(&[(i, -h)])?;
        grad[i] = (fp - fm) / (2.0 * h);
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let v = (f(&[(i, h), (j, h)])? - f(&[(i, h), (j, -h)])? - f(&[(i, -h), (j, h)])? + f(&[(i, -h), (j, -h)])?)
                / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok((grad, hess))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::parse_with;

    fn p(text: &str, n: usize) -> Expr {
        let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        parse_with(text, &names, &[]).unwrap()
    }

    #[test]
    fn jet_of_square_times_sine() {
        let e = p("x0^2*sin(x1)", 2);
        let j = eval_jet2(&e, &[2.0, std::f64::consts::FRAC_PI_2]).unwrap();
        assert!((j.value - 4.0).abs() < 1e-14);
        assert!((j.grad[0] - 4.0).abs() < 1e-14);
        assert!(j.grad[1].abs() < 1e-14);
        assert!((j.hess[(0, 0)] - 2.0).abs() < 1e-14);
        assert!(j.hess[(0, 1)].abs() < 1e-14);
        assert!((j.hess[(1, 1)] + 4.0).abs() < 1e-14);
    }

    #[test]
    fn log_at_zero_is_domain_error() {
        assert!(matches!(
            eval_jet2(&p("log(x0)", 2), &[0.0, 1.0]),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn fd_cube() {
        let (g, _) = fd_oracle(&p("x0^3", 1), &[1.0], 1e-3, None).unwrap();
        assert!((g[0] - 3.0).abs() < 1e-5);
    }

    #[test]
    fn fd_linear_is_exact() {
        let e = p("3*x0 - 2*x1 + 0.5", 2);
        for h in [1e-1, 1e-3, 0.7] {
            let (g, _) = fd_oracle(&e, &[0.2, -1.1], h, None).unwrap();
            assert!((g[0] - 3.0).abs() < 1e-11);
            assert!((g[1] + 2.0).abs() < 1e-11);
        }
    }

    #[test]
    fn fd_error_quarters_when_step_halves() {
        let e = p("sin(x0)", 1);
        let exact = 1f64.cos();
        let err = |h: f64| (fd_oracle(&e, &[1.0], h, None).unwrap().0[0] - exact).abs();
        let ratio = err(1e-2) / err(5e-3);
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn fd_step_leaving_domain() {
        let chart = Chart::new(vec!["x0".into()], vec![(0.0, 1.0)]).unwrap();
        assert!(matches!(
            fd_oracle(&p("x0", 1), &[0.05], 0.1, Some(&chart)),
            Err(Error::StepTooLarge { .. })
        ));
    }
}

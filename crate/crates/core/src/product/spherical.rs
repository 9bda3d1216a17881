use serde::Serialize;

use crate::calculus::{FieldBatch, FieldId, MetricField};
use crate::error::{Error, Result};
use crate::sampling::SamplePlan;
use crate::scalar::Expr;

use super::{build_metric, Kind, ProductSpec, TwistedSpec};

/// Three equivalent ways of saying that block `i` of a warped product stays
/// spherical after the conformal change `φ²`.
///
/// * `ii`: `|⟨∇_{X⊥}W, X_i⟩ − ⟨X⊥,W⟩⟨X_i,W⟩|` with `W = −∇ log φ`;
/// * `iii`: `|Hess φ(X_i, X⊥)|`;
/// * `v`: `|∂_c(ρ̃_i⁻¹ ∂_a φ⁻¹)|` for `a` in block `i`, `c` outside it.
///
/// The first two are taken in the metric `φ²·spec` over normalized
/// coordinate pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SphericalResiduals {
    pub ii: f64,
    pub iii: f64,
    pub v: f64,
}

impl SphericalResiduals {
    fn max(self, o: SphericalResiduals) -> SphericalResiduals {
        SphericalResiduals {
            ii: self.ii.max(o.ii),
            iii: self.iii.max(o.iii),
            v: self.v.max(o.v),
        }
    }
}

struct Checker {
    metric: MetricField,
    block: Vec<usize>,
    outside: Vec<usize>,
    batch: FieldBatch,
    phi: FieldId,
    structure: Vec<(usize, FieldId)>,
}

impl Checker {
    fn new(spec: &TwistedSpec, phi: &Expr, i: usize) -> Result<Checker> {
        if !matches!(spec.kind(), Kind::Product | Kind::Warped) {
            return Err(Error::KindConstraint(format!(
                "spherical factor check needs a warped or product spec, got {}",
                spec.kind().name()
            )));
        }
        let blocks = spec.blocks();
        if i >= blocks.len() {
            return Err(Error::InvalidNet(format!("block {i} does not exist")));
        }
        let base = build_metric(&ProductSpec::Base(spec.clone()))?;
        let metric = base.scaled(&Expr::pow(phi.clone(), 2.0));
        let n = metric.dim();
        let block = blocks[i].clone();
        let outside: Vec<usize> = (0..n).filter(|c| !block.contains(c)).collect();
        let mut batch = FieldBatch::new(n);
        let phi_id = batch.scalar(phi, 2);
        let inv = phi.clone().recip();
        let rho = &spec.twists()[i];
        let structure = block
            .iter()
            .map(|&a| (a, batch.scalar(&(inv.diff(a) / rho.clone()), 1)))
            .collect();
        Ok(Checker {
            metric,
            block,
            outside,
            batch,
            phi: phi_id,
            structure,
        })
    }

    fn at(&self, p: &[f64]) -> Result<SphericalResiduals> {
        let geo = self.metric.geometry_at(p)?;
        let vals = self.batch.eval(p)?;
        let phi = vals.scalar(self.phi);
        if !(phi.value > 0.0) {
            return Err(Error::NonPositive {
                what: "conformal factor".into(),
                point: p.to_vec(),
                value: phi.value,
            });
        }
        let f = phi.value;
        let mut log_phi = phi.clone();
        log_phi.value = f.ln();
        log_phi.grad = &phi.grad / f;
        log_phi.hess = &phi.hess / f - (&phi.grad * phi.grad.transpose()) / (f * f);
        let hess_phi = geo.hessian(&phi);
        let hess_log = geo.hessian(&log_phi);
        let w = &log_phi.grad;
        let mut r = SphericalResiduals::default();
        for &a in &self.block {
            for &c in &self.outside {
                let norms = (geo.g[(a, a)] * geo.g[(c, c)]).sqrt();
                r.ii = r.ii.max((-hess_log[(c, a)] - w[c] * w[a]).abs() / norms);
                r.iii = r.iii.max(hess_phi[(a, c)].abs() / norms);
            }
        }
        for &(_, id) in &self.structure {
            let q = vals.scalar(id);
            for &c in &self.outside {
                r.v = r.v.max(q.grad[c].abs());
            }
        }
        Ok(r)
    }
}

/// Residuals at one point.
pub fn spherical_factor_check(spec: &TwistedSpec, phi: &Expr, i: usize, p: &[f64]) -> Result<SphericalResiduals> {
    Checker::new(spec, phi, i)?.at(p)
}

/// Maxima of the residuals over a sample plan.
pub fn spherical_factor_max(spec: &TwistedSpec, phi: &Expr, i: usize, plan: &SamplePlan) -> Result<SphericalResiduals> {
    let checker = Checker::new(spec, phi, i)?;
    plan.points(spec.chart())
        .iter()
        .try_fold(SphericalResiduals::default(), |acc, p| Ok(acc.max(checker.at(p)?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Chart;
    use crate::scalar::parse_with;

    fn product_2d() -> TwistedSpec {
        let c = Chart::with_domain(vec![(0.2, 1.2); 2])
            .unwrap()
            .with_blocks(vec![vec![0], vec![1]], false)
            .unwrap();
        let one = vec![vec![Expr::one()]];
        TwistedSpec::new(Kind::Product, c, vec![one.clone(), one], vec![Expr::one(), Expr::one()]).unwrap()
    }

    fn e(s: &str) -> Expr {
        parse_with(s, &["x0".into(), "x1".into()], &[]).unwrap()
    }

    #[test]
    fn sum_separable_inverse_factor_passes() {
        let r = spherical_factor_max(&product_2d(), &e("1/(x0 + x1)"), 1, &SamplePlan::default()).unwrap();
        assert!(r.ii <= 1e-9 && r.iii <= 1e-9 && r.v <= 1e-9, "{r:?}");
    }

    #[test]
    fn constant_factor_is_trivial() {
        let r = spherical_factor_check(&product_2d(), &Expr::constant(3.0), 0, &[0.5, 0.5]).unwrap();
        assert_eq!(r, SphericalResiduals::default());
    }

    #[test]
    fn product_inverse_factor_fails() {
        let r = spherical_factor_max(&product_2d(), &e("1/(x0*x1)"), 1, &SamplePlan::default()).unwrap();
        assert!(r.ii > 1e-3 && r.iii > 1e-3 && r.v > 1e-3, "{r:?}");
    }
}

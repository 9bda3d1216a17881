//! Product, warped, quasi-warped and twisted metrics on product charts,
//! conformal rescaling, the connection identity relating a twisted product
//! to its untwisted factors, and separability tests for twist functions.

mod factorize;
pub mod random;
mod spherical;

use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use crate::calculus::{FieldBatch, MetricField, VectorField};
use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::linalg::SymMat;
use crate::sampling::SamplePlan;
use crate::scalar::{eval_jet2, Expr};

pub use factorize::{factorize_cwp, ClosedForm, Factorization, FactorizeOptions, ProductForm};
pub use spherical::{spherical_factor_check, spherical_factor_max, SphericalResiduals};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Product,
    Warped,
    QuasiWarped,
    Twisted,
}

impl Kind {
    pub fn parse(s: &str) -> Option<Kind> {
        match s {
            "product" => Some(Kind::Product),
            "warped" => Some(Kind::Warped),
            "quasi-warped" | "quasi_warped" => Some(Kind::QuasiWarped),
            "twisted" => Some(Kind::Twisted),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::Product => "product",
            Kind::Warped => "warped",
            Kind::QuasiWarped => "quasi-warped",
            Kind::Twisted => "twisted",
        }
    }
}

/// `Σ ρ_i² π_i*⟨,⟩_i` on a chart whose blocks are the factors.
///
/// Factor metrics are written in the chart's own coordinates and may only
/// mention coordinates of their block.
#[derive(Clone, Debug)]
pub struct TwistedSpec {
    kind: Kind,
    chart: Chart,
    factors: Vec<SymMat>,
    twists: Vec<Expr>,
}

#[derive(Clone, Debug)]
pub enum ProductSpec {
    Base(TwistedSpec),
    /// `φ² · build(inner)`.
    ConformalOf {
        inner: Box<ProductSpec>,
        phi: Expr,
    },
}

fn uses_only(e: &Expr, allowed: &[usize]) -> Option<usize> {
    e.vars().into_iter().find(|v| !allowed.contains(v))
}

impl TwistedSpec {
    pub fn new(kind: Kind, chart: Chart, factors: Vec<SymMat>, twists: Vec<Expr>) -> Result<TwistedSpec> {
        let blocks = chart
            .blocks()
            .ok_or_else(|| Error::InvalidChart("product chart needs a block partition".into()))?
            .to_vec();
        let k = blocks.len();
        if factors.len() != k || twists.len() != k {
            return Err(Error::Dimension(format!(
                "{k} blocks but {} factor metrics and {} twist functions",
                factors.len(),
                twists.len()
            )));
        }
        for (i, (f, block)) in factors.iter().zip(&blocks).enumerate() {
            let d = block.len();
            if f.len() != d || f.iter().any(|r| r.len() != d) {
                return Err(Error::Dimension(format!("factor metric {i} must be {d}x{d}")));
            }
            for e in f.iter().flatten() {
                if let Some(v) = uses_only(e, block) {
                    return Err(Error::KindConstraint(format!(
                        "factor metric {i} mentions coordinate {} outside its block",
                        chart.names().get(v).map_or("?", |s| s.as_str())
                    )));
                }
            }
        }
        let all: Vec<usize> = (0..chart.dim()).collect();
        for (i, t) in twists.iter().enumerate() {
            if let Some(v) = uses_only(t, &all) {
                return Err(Error::Dimension(format!(
                    "twist {i} uses coordinate {v} beyond the chart"
                )));
            }
        }
        let name = |v: usize| chart.names()[v].clone();
        match kind {
            Kind::Product => {
                if let Some(i) = twists.iter().position(|t| !t.is_one()) {
                    return Err(Error::KindConstraint(format!("product requires twist {i} to be 1")));
                }
            }
            Kind::Warped | Kind::QuasiWarped => {
                if !twists[0].is_one() {
                    return Err(Error::KindConstraint(format!(
                        "{} requires the base twist to be 1",
                        kind.name()
                    )));
                }
                for (i, t) in twists.iter().enumerate().skip(1) {
                    let mut allowed = blocks[0].clone();
                    if kind == Kind::QuasiWarped {
                        allowed.extend(&blocks[i]);
                    }
                    if let Some(v) = uses_only(t, &allowed) {
                        return Err(Error::KindConstraint(format!(
                            "{} twist {i} depends on `{}`",
                            kind.name(),
                            name(v)
                        )));
                    }
                }
            }
            Kind::Twisted => {}
        }
        Ok(TwistedSpec {
            kind,
            chart,
            factors,
            twists,
        })
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        self.chart.blocks().expect("validated at construction")
    }

    pub fn factors(&self) -> &[SymMat] {
        &self.factors
    }

    pub fn twists(&self) -> &[Expr] {
        &self.twists
    }

    /// The same factors with every twist set to 1.
    pub fn untwisted(&self) -> TwistedSpec {
        TwistedSpec {
            kind: Kind::Product,
            chart: self.chart.clone(),
            factors: self.factors.clone(),
            twists: vec![Expr::one(); self.twists.len()],
        }
    }

    fn assemble(&self) -> SymMat {
        let n = self.chart.dim();
        let mut g = vec![vec![Expr::zero(); n]; n];
        for ((block, f), rho) in self.blocks().iter().zip(&self.factors).zip(&self.twists) {
            let r2 = Expr::pow(rho.clone(), 2.0);
            for (a, &ia) in block.iter().enumerate() {
                for (b, &ib) in block.iter().enumerate() {
                    g[ia][ib] = &r2 * &f[a][b];
                }
            }
        }
        g
    }
}

impl ProductSpec {
    pub fn chart(&self) -> &Chart {
        self.base().chart()
    }

    /// The innermost twisted spec.
    pub fn base(&self) -> &TwistedSpec {
        match self {
            ProductSpec::Base(t) => t,
            ProductSpec::ConformalOf { inner, .. } => inner.base(),
        }
    }

    /// Product of all conformal factors wrapped around the base spec.
    pub fn conformal_factor(&self) -> Expr {
        match self {
            ProductSpec::Base(_) => Expr::one(),
            ProductSpec::ConformalOf { inner, phi } => phi * inner.conformal_factor(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ProductSpec::Base(t) => t.kind.name().to_string(),
            ProductSpec::ConformalOf { inner, .. } => format!("conformal-of({})", inner.label()),
        }
    }
}

/// Builds the block-diagonal metric of a spec; provenance is attached.
pub fn build_metric(spec: &ProductSpec) -> Result<MetricField> {
    let base = spec.base();
    let phi = spec.conformal_factor();
    let mut g = base.assemble();
    if !phi.is_one() {
        let p2 = Expr::pow(phi, 2.0);
        for row in &mut g {
            for e in row.iter_mut() {
                if !e.is_zero() {
                    *e = &p2 * &*e;
                }
            }
        }
    }
    Ok(MetricField::new(base.chart.clone(), g)?.with_provenance(Arc::new(spec.clone())))
}

/// `φ² g`, after checking `φ > 0` at every sample of `plan`.
pub fn conformal_scale(g: &MetricField, phi: &Expr, plan: &SamplePlan) -> Result<MetricField> {
    for p in plan.points(g.chart()) {
        let v = phi.eval(&p)?;
        if !(v > 0.0) {
            return Err(Error::NonPositive {
                what: "conformal factor".into(),
                point: p,
                value: v,
            });
        }
    }
    let scaled = g.scaled(&Expr::pow(phi.clone(), 2.0));
    Ok(match g.provenance() {
        Some(spec) => scaled.with_provenance(Arc::new(ProductSpec::ConformalOf {
            inner: Box::new((**spec).clone()),
            phi: phi.clone(),
        })),
        None => scaled,
    })
}

/// `‖∇_X Y − RHS‖_g`, where RHS is the untwisted connection plus the twist
/// correction `Σ(⟨X^i,Y^i⟩U_i − ⟨X,U_i⟩Y^i − ⟨Y,U_i⟩X^i)` with
/// `U_i = −∇ log ρ_i` taken in the twisted metric.
pub fn verify_connection_identity(spec: &TwistedSpec, x: &VectorField, y: &VectorField, p: &[f64]) -> Result<f64> {
    let metric = build_metric(&ProductSpec::Base(spec.clone()))?;
    let flat = build_metric(&ProductSpec::Base(spec.untwisted()))?;
    let geo = metric.geometry_at(p)?;
    let geo_flat = flat.geometry_at(p)?;
    let n = metric.dim();
    let mut batch = FieldBatch::new(n);
    let ix = batch.vector(&x.comps, true);
    let iy = batch.vector(&y.comps, true);
    let rho_ids: Vec<_> = spec.twists.iter().map(|r| batch.scalar(r, 1)).collect();
    let vals = batch.eval(p)?;
    let (xj, yj) = (vals.vector(ix), vals.vector(iy));
    let lhs = geo.cov_deriv(&xj.value, &yj);
    let mut rhs = geo_flat.cov_deriv(&xj.value, &yj);
    let restrict =
        |v: &DVector<f64>, block: &[usize]| DVector::from_fn(n, |k, _| if block.contains(&k) { v[k] } else { 0.0 });
    for (block, id) in spec.blocks().iter().zip(rho_ids) {
        let rho = vals.scalar(id);
        if !(rho.value > 0.0) {
            return Err(Error::NonPositive {
                what: "twist function".into(),
                point: p.to_vec(),
                value: rho.value,
            });
        }
        let u = -geo.grad(&(rho.grad / rho.value));
        let (xi, yi) = (restrict(&xj.value, block), restrict(&yj.value, block));
        rhs += &u * geo.inner(&xi, &yi) - &yi * geo.inner(&xj.value, &u) - &xi * geo.inner(&yj.value, &u);
    }
    Ok(geo.norm(&(lhs - rhs)))
}

/// `max |∂²(log ρ)/∂x_a∂x_b|` over `a ∈ block_a`, `b ∈ block_b`.
pub fn separability_residual(rho: &Expr, block_a: &[usize], block_b: &[usize], p: &[f64]) -> Result<f64> {
    let j = eval_jet2(rho, p)?;
    if !(j.value > 0.0) {
        return Err(Error::NonPositive {
            what: "ρ".into(),
            point: p.to_vec(),
            value: j.value,
        });
    }
    let mut worst: f64 = 0.0;
    for &a in block_a {
        for &b in block_b {
            let m = j.hess[(a, b)] / j.value - j.grad[a] * j.grad[b] / (j.value * j.value);
            worst = worst.max(m.abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{classify_net, OrthogonalNet};
    use crate::scalar::parse_with;

    fn chart(n: usize, blocks: Vec<Vec<usize>>, lo: f64, hi: f64) -> Chart {
        Chart::with_domain(vec![(lo, hi); n])
            .unwrap()
            .with_blocks(blocks, false)
            .unwrap()
    }

    fn e(s: &str, n: usize) -> Expr {
        let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        parse_with(s, &names, &[]).unwrap()
    }

    fn one() -> SymMat {
        vec![vec![Expr::one()]]
    }

    #[test]
    fn product_of_lines_is_euclidean() {
        let c = chart(2, vec![vec![0], vec![1]], 0.0, 1.0);
        let s = TwistedSpec::new(Kind::Product, c, vec![one(), one()], vec![Expr::one(), Expr::one()]).unwrap();
        let g = build_metric(&ProductSpec::Base(s)).unwrap();
        let (m, _) = g.metric_at(&[0.5, 0.5]).unwrap();
        assert_eq!(m, nalgebra::DMatrix::identity(2, 2));
    }

    #[test]
    fn warped_twist_is_polar() {
        let c = chart(2, vec![vec![0], vec![1]], 0.5, 3.0);
        let s = TwistedSpec::new(Kind::Warped, c, vec![one(), one()], vec![Expr::one(), Expr::var(0)]).unwrap();
        let g = build_metric(&ProductSpec::Base(s)).unwrap();
        let (m, _) = g.metric_at(&[2.0, 1.0]).unwrap();
        assert_eq!(m[(1, 1)], 4.0);
        assert_eq!(m[(0, 1)], 0.0);
    }

    #[test]
    fn kind_constraints_are_enforced() {
        let c = chart(2, vec![vec![0], vec![1]], 0.5, 3.0);
        let bad = TwistedSpec::new(
            Kind::Warped,
            c.clone(),
            vec![one(), one()],
            vec![Expr::one(), Expr::var(1)],
        );
        assert!(matches!(bad, Err(Error::KindConstraint(_))));
        let bad = TwistedSpec::new(
            Kind::Product,
            c.clone(),
            vec![one(), one()],
            vec![Expr::one(), Expr::var(0)],
        );
        assert!(matches!(bad, Err(Error::KindConstraint(_))));
        let c3 = chart(3, vec![vec![0], vec![1], vec![2]], 0.5, 3.0);
        let bad = TwistedSpec::new(
            Kind::QuasiWarped,
            c3,
            vec![one(), one(), one()],
            vec![Expr::one(), e("x0*x2 + 1", 3), Expr::one()],
        );
        assert!(matches!(bad, Err(Error::KindConstraint(_))));
        let ok = TwistedSpec::new(
            Kind::Twisted,
            c,
            vec![one(), one()],
            vec![Expr::one(), e("1 + x0^2*x1", 2)],
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn twisted_is_tp_not_wp() {
        let c = chart(2, vec![vec![0], vec![1]], 0.0, 1.0);
        let s = TwistedSpec::new(
            Kind::Twisted,
            c,
            vec![one(), one()],
            vec![Expr::one(), e("1 + x0^2*x1", 2)],
        )
        .unwrap();
        let g = build_metric(&ProductSpec::Base(s)).unwrap();
        let net = OrthogonalNet::coordinate(2, vec![vec![0], vec![1]]).unwrap();
        let r = classify_net(&g, &net, &SamplePlan::default(), 1e-8).unwrap();
        assert!(r.flags.tp.holds());
        assert!(r.flags.wp.fails());
        assert!(r.flags.cwp.fails());
    }

    #[test]
    fn conformal_scale_rules() {
        let c = Chart::with_domain(vec![(-1.0, 1.0); 2]).unwrap();
        let g = MetricField::euclidean(c);
        let plan = SamplePlan::default();
        let same = conformal_scale(&g, &Expr::one(), &plan).unwrap();
        assert_eq!(
            same.metric_at(&[0.1, 0.2]).unwrap().0,
            nalgebra::DMatrix::identity(2, 2)
        );
        let two = conformal_scale(&g, &Expr::constant(2.0), &plan).unwrap();
        assert_eq!(
            two.metric_at(&[0.1, 0.2]).unwrap().0,
            nalgebra::DMatrix::identity(2, 2) * 4.0
        );
        assert!(matches!(
            conformal_scale(&g, &Expr::var(0), &plan),
            Err(Error::NonPositive { .. })
        ));
    }

    #[test]
    fn polar_connection_identity() {
        let c = chart(2, vec![vec![0], vec![1]], 0.5, 3.0);
        let s = TwistedSpec::new(Kind::Warped, c, vec![one(), one()], vec![Expr::one(), Expr::var(0)]).unwrap();
        let t = VectorField::coordinate(1, 2);
        assert!(verify_connection_identity(&s, &t, &t, &[2.0, 1.3]).unwrap() < 1e-14);
        let u = s.untwisted();
        let x = VectorField::new(vec![e("x1", 2), e("x0^2", 2)]);
        assert!(verify_connection_identity(&u, &x, &t, &[1.0, 1.3]).unwrap() < 1e-14);
    }

    #[test]
    fn separability_examples() {
        let p = [0.7, 1.3];
        let sep = e("(1 + x0^2)*(1 + x1^2)", 2);
        assert!(separability_residual(&sep, &[0], &[1], &p).unwrap() < 1e-14);
        let ex = e("exp(x0*x1)", 2);
        assert!((separability_residual(&ex, &[0], &[1], &p).unwrap() - 1.0).abs() < 1e-13);
        let neg = e("1 + x0^2*x1", 2);
        // ∂0∂1 log ρ = 2x0/ρ − 2x0·x0²/ρ² at (1,1): 1 − 0.5
        assert!((separability_residual(&neg, &[0], &[1], &[1.0, 1.0]).unwrap() - 0.5).abs() < 1e-14);
        assert!(matches!(
            separability_residual(&e("x0 - 1", 2), &[0], &[1], &p),
            Err(Error::NonPositive { .. })
        ));
    }
}

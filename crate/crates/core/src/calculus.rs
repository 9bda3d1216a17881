//! Levi-Civita calculus of a metric given by expression entries.
//!
//! Two layers live here. The numeric layer evaluates the metric and its
//! first partials at a point ([`PointGeometry`]) and derives Christoffel
//! symbols, covariant derivatives, gradients and covariant Hessians from
//! them. The symbolic layer produces expressions for lowered covariant
//! derivatives, which lets derived fields (mean curvature normals and the
//! like) be differentiated once more.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::linalg::SymMat;
use crate::product::ProductSpec;
use crate::scalar::{Expr, Jet2, Tape};

pub const SPD_FLOOR: f64 = 1e-10;
pub const COND_WARN: f64 = 1e8;

/// A vector field given by coordinate components.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub comps: Vec<Expr>,
}

impl VectorField {
    pub fn new(comps: Vec<Expr>) -> VectorField {
        VectorField { comps }
    }

    /// The coordinate field `∂_i`.
    pub fn coordinate(i: usize, dim: usize) -> VectorField {
        VectorField {
            comps: (0..dim)
                .map(|k| if k == i { Expr::one() } else { Expr::zero() })
                .collect(),
        }
    }

    pub fn constant(v: &[f64]) -> VectorField {
        VectorField {
            comps: v.iter().map(|&c| Expr::constant(c)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn scale(&self, f: &Expr) -> VectorField {
        VectorField {
            comps: self.comps.iter().map(|c| f * c).collect(),
        }
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        VectorField {
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a + b).collect(),
        }
    }
}

/// A list of vector fields on one chart.
#[derive(Clone, Debug, Default)]
pub struct VectorFieldSet {
    pub fields: Vec<VectorField>,
}

impl VectorFieldSet {
    pub fn coordinate_frame(dim: usize) -> VectorFieldSet {
        VectorFieldSet {
            fields: (0..dim).map(|i| VectorField::coordinate(i, dim)).collect(),
        }
    }
}

/// Value and Jacobian of a vector field at a point; `jac[(k, i)] = ∂_i v^k`.
#[derive(Clone, Debug)]
pub struct FieldJet {
    pub value: DVector<f64>,
    pub jac: DMatrix<f64>,
}

impl FieldJet {
    /// Directional derivative `X(v)` of the components.
    pub fn along(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.jac * x
    }
}

#[derive(Clone, Copy, Debug)]
enum Slot {
    Scalar { at: usize, order: u8 },
    Vector { at: usize, jac: bool },
}

/// Several scalar and vector fields compiled into one tape, so shared
/// subterms are evaluated once per point.
#[derive(Clone, Debug)]
pub struct FieldBatch {
    dim: usize,
    exprs: Vec<Expr>,
    slots: Vec<Slot>,
    tape: OnceLock<Tape>,
}

/// Handle returned by [`FieldBatch`] registration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FieldId(usize);

/// Values of a [`FieldBatch`] at one point.
pub struct BatchValues<'a> {
    batch: &'a FieldBatch,
    out: Vec<f64>,
}

impl FieldBatch {
    pub fn new(dim: usize) -> FieldBatch {
        FieldBatch {
            dim,
            exprs: Vec::new(),
            slots: Vec::new(),
            tape: OnceLock::new(),
        }
    }

    /// Registers a scalar with partials up to `order` (0, 1 or 2).
    pub fn scalar(&mut self, e: &Expr, order: u8) -> FieldId {
        let at = self.exprs.len();
        self.exprs.push(e.clone());
        if order >= 1 {
            let first: Vec<Expr> = (0..self.dim).map(|i| e.diff(i)).collect();
            self.exprs.extend(first.iter().cloned());
            if order >= 2 {
                for i in 0..self.dim {
                    for j in i..self.dim {
                        self.exprs.push(first[i].diff(j));
                    }
                }
            }
        }
        self.slots.push(Slot::Scalar { at, order });
        FieldId(self.slots.len() - 1)
    }

    /// Registers a vector field, optionally with its Jacobian.
    pub fn vector(&mut self, v: &[Expr], jac: bool) -> FieldId {
        assert_eq!(v.len(), self.dim, "vector field dimension");
        let at = self.exprs.len();
        self.exprs.extend(v.iter().cloned());
        if jac {
            for c in v {
                for i in 0..self.dim {
                    self.exprs.push(c.diff(i));
                }
            }
        }
        self.slots.push(Slot::Vector { at, jac });
        FieldId(self.slots.len() - 1)
    }

    pub fn eval(&self, p: &[f64]) -> Result<BatchValues<'_>> {
        let tape = self.tape.get_or_init(|| Tape::compile(&self.exprs));
        Ok(BatchValues {
            batch: self,
            out: tape.eval(p)?,
        })
    }
}

impl BatchValues<'_> {
    pub fn scalar(&self, id: FieldId) -> Jet2 {
        let n = self.batch.dim;
        let Slot::Scalar { at, order } = self.batch.slots[id.0] else {
            panic!("field {} is not a scalar", id.0)
        };
        let o = &self.out;
        let grad = if order >= 1 {
            DVector::from_iterator(n, o[at + 1..at + 1 + n].iter().copied())
        } else {
            DVector::from_element(n, f64::NAN)
        };
        let mut hess = DMatrix::from_element(n, n, f64::NAN);
        if order >= 2 {
            let mut k = at + 1 + n;
            for i in 0..n {
                for j in i..n {
                    hess[(i, j)] = o[k];
                    hess[(j, i)] = o[k];
                    k += 1;
                }
            }
        }
        Jet2 {
            value: o[at],
            grad,
            hess,
        }
    }

    pub fn vector(&self, id: FieldId) -> FieldJet {
        let n = self.batch.dim;
        let Slot::Vector { at, jac } = self.batch.slots[id.0] else {
            panic!("field {} is not a vector", id.0)
        };
        let o = &self.out;
        let value = DVector::from_iterator(n, o[at..at + n].iter().copied());
        let jac = if jac {
            DMatrix::from_fn(n, n, |k, i| o[at + n + k * n + i])
        } else {
            DMatrix::from_element(n, n, f64::NAN)
        };
        FieldJet { value, jac }
    }
}

/// Metric quantities at one point.
#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub point: Vec<f64>,
    pub g: DMatrix<f64>,
    pub ginv: DMatrix<f64>,
    /// `dg[l] = ∂_l g`.
    pub dg: Vec<DMatrix<f64>>,
    /// `gamma[k][(i, j)] = Γ^k_{ij}`.
    pub gamma: Vec<DMatrix<f64>>,
    pub min_eigenvalue: f64,
    pub condition: f64,
}

impl PointGeometry {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn inner(&self, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        v.dot(&(&self.g * w))
    }

    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    /// `Γ(X, Y)^k = Γ^k_{ij} X^i Y^j`.
    pub fn gamma_apply(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.gamma.iter().map(|gk| x.dot(&(gk * y))))
    }

    /// `∇_X Y` from the value of `X` and the jet of `Y`.
    pub fn cov_deriv(&self, x: &DVector<f64>, y: &FieldJet) -> DVector<f64> {
        y.along(x) + self.gamma_apply(x, &y.value)
    }

    pub fn grad(&self, df: &DVector<f64>) -> DVector<f64> {
        &self.ginv * df
    }

    /// Covariant Hessian matrix `∂_ij f − Γ^k_ij ∂_k f`.
    pub fn hessian(&self, f: &Jet2) -> DMatrix<f64> {
        let mut h = f.hess.clone();
        for (k, gk) in self.gamma.iter().enumerate() {
            h -= gk * f.grad[k];
        }
        h
    }

    pub fn hessian_pair(&self, f: &Jet2, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&(self.hessian(f) * y))
    }
}

/// `[X, Y]^k = X^i ∂_i Y^k − Y^i ∂_i X^k`.
pub fn bracket(x: &FieldJet, y: &FieldJet) -> DVector<f64> {
    y.along(&x.value) - x.along(&y.value)
}

/// Lie bracket of two fields at `p`.
pub fn lie_bracket(x: &VectorField, y: &VectorField, p: &[f64]) -> Result<DVector<f64>> {
    let mut b = FieldBatch::new(p.len());
    let (ix, iy) = (b.vector(&x.comps, true), b.vector(&y.comps, true));
    let v = b.eval(p)?;
    Ok(bracket(&v.vector(ix), &v.vector(iy)))
}

/// Riemannian metric on a chart, stored as a symmetric matrix of expressions.
#[derive(Clone, Debug)]
pub struct MetricField {
    chart: Chart,
    g: SymMat,
    spd_floor: f64,
    provenance: Option<Arc<ProductSpec>>,
    tape: OnceLock<Tape>,
    first_kind: OnceLock<Vec<SymMat>>,
}

impl MetricField {
    /// Builds a metric from a full matrix. Off-diagonal entries must agree
    /// numerically with their mirror at the chart center.
    pub fn new(chart: Chart, g: SymMat) -> Result<MetricField> {
        let n = chart.dim();
        if g.len() != n || g.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension(format!(
                "metric must be {n}x{n}, got {}x{}",
                g.len(),
                g.first().map_or(0, |r| r.len())
            )));
        }
        for row in &g {
            for e in row {
                if let Some(i) = e.max_var() {
                    if i >= n {
                        return Err(Error::Dimension(format!(
                            "metric entry `{e}` uses coordinate {i} on a {n}-dimensional chart"
                        )));
                    }
                }
            }
        }
        let c = chart.center();
        for i in 0..n {
            for j in 0..i {
                if g[i][j].ptr_id() == g[j][i].ptr_id() {
                    continue;
                }
                let (a, b) = (g[i][j].eval(&c), g[j][i].eval(&c));
                if let (Ok(a), Ok(b)) = (a, b) {
                    if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                        return Err(Error::NotSymmetric(format!(
                            "g[{i}][{j}] = {a} but g[{j}][{i}] = {b} at the chart center"
                        )));
                    }
                }
            }
        }
        let mut sym = g;
        for i in 0..n {
            for j in 0..i {
                sym[i][j] = sym[j][i].clone();
            }
        }
        Ok(MetricField {
            chart,
            g: sym,
            spd_floor: SPD_FLOOR,
            provenance: None,
            tape: OnceLock::new(),
            first_kind: OnceLock::new(),
        })
    }

    pub fn diagonal(chart: Chart, diag: Vec<Expr>) -> Result<MetricField> {
        let n = diag.len();
        let g = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { diag[i].clone() } else { Expr::zero() })
                    .collect()
            })
            .collect();
        MetricField::new(chart, g)
    }

    pub fn euclidean(chart: Chart) -> MetricField {
        let n = chart.dim();
        MetricField::diagonal(chart, vec![Expr::one(); n]).expect("identity metric")
    }

    pub fn with_provenance(mut self, spec: Arc<ProductSpec>) -> MetricField {
        self.provenance = Some(spec);
        self
    }

    pub fn with_spd_floor(mut self, floor: f64) -> MetricField {
        self.spd_floor = floor;
        self
    }

    pub fn provenance(&self) -> Option<&Arc<ProductSpec>> {
        self.provenance.as_ref()
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn entries(&self) -> &SymMat {
        &self.g
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.g[i][j]
    }

    /// Metric with every entry multiplied by `f`.
    pub fn scaled(&self, f: &Expr) -> MetricField {
        let g = self.g.iter().map(|row| row.iter().map(|e| f * e).collect()).collect();
        let mut m = MetricField::new(self.chart.clone(), g).expect("scaling keeps shape");
        m.spd_floor = self.spd_floor;
        m
    }

    fn tape(&self) -> &Tape {
        self.tape.get_or_init(|| {
            let n = self.dim();
            let mut exprs = Vec::new();
            for i in 0..n {
                for j in i..n {
                    exprs.push(self.g[i][j].clone());
                }
            }
            for l in 0..n {
                for i in 0..n {
                    for j in i..n {
                        exprs.push(self.g[i][j].diff(l));
                    }
                }
            }
            Tape::compile(&exprs)
        })
    }

    /// Metric value, inverse, first partials and Christoffel symbols at `p`.
    pub fn geometry_at(&self, p: &[f64]) -> Result<PointGeometry> {
        self.chart.check_point(p)?;
        let n = self.dim();
        let out = self.tape().eval(p)?;
        let m = n * (n + 1) / 2;
        let unpack = |base: usize| {
            let mut a = DMatrix::zeros(n, n);
            let mut k = base;
            for i in 0..n {
                for j in i..n {
                    a[(i, j)] = out[k];
                    a[(j, i)] = out[k];
                    k += 1;
                }
            }
            a
        };
        let g = unpack(0);
        let dg: Vec<DMatrix<f64>> = (0..n).map(|l| unpack(m * (l + 1))).collect();
        let eig = SymmetricEigen::new(g.clone());
        let min = eig.eigenvalues.min();
        let max = eig.eigenvalues.max();
        if !(min > self.spd_floor) {
            return Err(Error::NotSpd {
                point: p.to_vec(),
                eigenvalue: min,
            });
        }
        let condition = max / min;
        if condition > COND_WARN {
            log::warn!("metric condition number {condition:e} at {p:?}");
        }
        let ginv = g
            .clone()
            .cholesky()
            .ok_or(Error::NotSpd {
                point: p.to_vec(),
                eigenvalue: min,
            })?
            .inverse();
        // Γ_{l,ij} = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij), then raise l.
        let low: Vec<DMatrix<f64>> = (0..n)
            .map(|l| DMatrix::from_fn(n, n, |i, j| 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)])))
            .collect();
        let gamma = (0..n)
            .map(|k| {
                let mut acc = DMatrix::zeros(n, n);
                for (l, gl) in low.iter().enumerate() {
                    acc += gl * ginv[(k, l)];
                }
                acc
            })
            .collect();
        Ok(PointGeometry {
            point: p.to_vec(),
            g,
            ginv,
            dg,
            gamma,
            min_eigenvalue: min,
            condition,
        })
    }

    pub fn metric_at(&self, p: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let geo = self.geometry_at(p)?;
        Ok((geo.g, geo.ginv))
    }

    pub fn christoffel(&self, p: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        Ok(self.geometry_at(p)?.gamma)
    }

    pub fn cov_deriv(&self, x: &VectorField, y: &VectorField, p: &[f64]) -> Result<DVector<f64>> {
        let geo = self.geometry_at(p)?;
        let mut b = FieldBatch::new(self.dim());
        let (ix, iy) = (b.vector(&x.comps, false), b.vector(&y.comps, true));
        let v = b.eval(p)?;
        Ok(geo.cov_deriv(&v.vector(ix).value, &v.vector(iy)))
    }

    pub fn grad_field(&self, f: &Expr, p: &[f64]) -> Result<DVector<f64>> {
        let geo = self.geometry_at(p)?;
        let mut b = FieldBatch::new(self.dim());
        let i = b.scalar(f, 1);
        Ok(geo.grad(&b.eval(p)?.scalar(i).grad))
    }

    /// Covariant Hessian `Hess f(X, Y) = X(Y f) − (∇_X Y) f`.
    pub fn hessian_lc(&self, f: &Expr, x: &VectorField, y: &VectorField, p: &[f64]) -> Result<f64> {
        let geo = self.geometry_at(p)?;
        let mut b = FieldBatch::new(self.dim());
        let fi = b.scalar(f, 2);
        let (ix, iy) = (b.vector(&x.comps, false), b.vector(&y.comps, false));
        let v = b.eval(p)?;
        Ok(geo.hessian_pair(&v.scalar(fi), &v.vector(ix).value, &v.vector(iy).value))
    }

    pub fn inner(&self, v: &DVector<f64>, w: &DVector<f64>, p: &[f64]) -> Result<f64> {
        let (g, _) = self.metric_at(p)?;
        Ok(v.dot(&(g * w)))
    }

    /// Christoffel symbols of the first kind `Γ_{l,ij}` as expressions,
    /// indexed `[l][i][j]`.
    pub fn christoffel_first_kind_sym(&self) -> &Vec<SymMat> {
        self.first_kind.get_or_init(|| {
            let n = self.dim();
            let dg: Vec<SymMat> = (0..n)
                .map(|l| {
                    self.g
                        .iter()
                        .map(|row| row.iter().map(|e| e.diff(l)).collect())
                        .collect()
                })
                .collect();
            (0..n)
                .map(|l| {
                    (0..n)
                        .map(|i| {
                            (0..n)
                                .map(|j| {
                                    let s = &dg[i][j][l] + &dg[j][i][l] - &dg[l][i][j];
                                    s * 0.5
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
    }

    /// Lowered covariant derivative `(∇_X Y)_l` as expressions.
    pub fn cov_deriv_lowered_sym(&self, x: &[Expr], y: &[Expr]) -> Vec<Expr> {
        let n = self.dim();
        let gam = self.christoffel_first_kind_sym();
        // X(Y^k)
        let xy: Vec<Expr> = (0..n)
            .map(|k| Expr::sum((0..n).filter(|&i| !x[i].is_zero()).map(|i| &x[i] * y[k].diff(i))))
            .collect();
        (0..n)
            .map(|l| {
                let transport = Expr::sum((0..n).map(|k| &self.g[l][k] * &xy[k]));
                let conn = Expr::sum((0..n).flat_map(|i| {
                    (0..n)
                        .filter(move |&j| !x[i].is_zero() && !y[j].is_zero())
                        .map(move |j| &gam[l][i][j] * &x[i] * &y[j])
                }));
                transport + conn
            })
            .collect()
    }

    pub fn inner_sym(&self, v: &[Expr], w: &[Expr]) -> Expr {
        let n = self.dim();
        Expr::sum((0..n).flat_map(|i| {
            (0..n)
                .filter(move |&j| !v[i].is_zero() && !w[j].is_zero() && !self.g[i][j].is_zero())
                .map(move |j| &self.g[i][j] * &v[i] * &w[j])
        }))
    }

    /// Checks positive definiteness at every point.
    pub fn check_spd(&self, points: &[Vec<f64>]) -> Result<()> {
        for p in points {
            self.geometry_at(p)?;
        }
        Ok(())
    }
}

/// How far the computed connection is from being Levi-Civita at one point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LeviCivitaDefects {
    /// `|X⟨Y,Z⟩ − ⟨∇_X Y, Z⟩ − ⟨Y, ∇_X Z⟩|`, with `X⟨Y,Z⟩` differentiated
    /// symbolically rather than through the Christoffel symbols.
    pub compatibility: f64,
    /// `‖∇_X Y − ∇_Y X − [X, Y]‖`.
    pub torsion: f64,
}

pub fn levi_civita_defects(
    metric: &MetricField,
    x: &VectorField,
    y: &VectorField,
    z: &VectorField,
    p: &[f64],
) -> Result<LeviCivitaDefects> {
    let geo = metric.geometry_at(p)?;
    let mut b = FieldBatch::new(metric.dim());
    let (ix, iy, iz) = (
        b.vector(&x.comps, true),
        b.vector(&y.comps, true),
        b.vector(&z.comps, true),
    );
    let yz = b.scalar(&metric.inner_sym(&y.comps, &z.comps), 1);
    let v = b.eval(p)?;
    let (xj, yj, zj) = (v.vector(ix), v.vector(iy), v.vector(iz));
    let direct = v.scalar(yz).grad.dot(&xj.value);
    let via_connection =
        geo.inner(&geo.cov_deriv(&xj.value, &yj), &zj.value) + geo.inner(&yj.value, &geo.cov_deriv(&xj.value, &zj));
    let torsion = geo.cov_deriv(&xj.value, &yj) - geo.cov_deriv(&yj.value, &xj) - bracket(&xj, &yj);
    Ok(LeviCivitaDefects {
        compatibility: (direct - via_connection).abs(),
        torsion: torsion.norm(),
    })
}

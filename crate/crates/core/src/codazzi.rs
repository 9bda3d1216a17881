//! Codazzi tensors with two eigenvalues: the Codazzi residual, eigenvalue
//! splitting, the eigenbundle-net criteria, the warped-splitting classifier and
//! canonical constructions.
//!
//! Eigenvalue fields are built symbolically so that their gradients and
//! covariant Hessians are exact. For a tensor `A` with eigenvalues `λ`
//! (rank `r`) and `μ` (rank `m`), `n = r + m`, the traces `s1 = tr A` and
//! `s2 = tr A²` give `D = n s2 − s1² = r m (λ − μ)²`, hence
//! `λ = s1/n + σ √(m D / r)/n` and `μ = s1/n − σ √(r D / m)/n` with
//! `σ = sign(λ − μ)`. Eigenbundle frames come from the projector
//! `P_λ = (A − μ I)/(λ − μ)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::calculus::{FieldBatch, FieldId, MetricField, PointGeometry, VectorField, VectorFieldSet};
use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::linalg::SymMat;
use crate::nets::{classify_net, NetAnalyzer, NetPoint, NetReport, OrthogonalNet};
use crate::product::{build_metric, Kind, ProductSpec, TwistedSpec};
use crate::sampling::SamplePlan;
use crate::scalar::{Expr, Jet2, UserFn};
use crate::verdict::{max_of, Flag, FAIL_FACTOR};

/// Smallest eigenvalue separation accepted as two distinct eigenvalues.
pub const GAP_MIN: f64 = 1e-6;

/// Relative tolerance on `g Φ` being symmetric.
pub const SELF_ADJOINT_TOL: f64 = 1e-8;

/// A (1,1)-tensor field; `comps[k][j] = Φ^k_j`.
#[derive(Clone, Debug)]
pub struct SymTensorField {
    comps: SymMat,
}

impl SymTensorField {
    pub fn new(metric: &MetricField, comps: SymMat) -> Result<SymTensorField> {
        let n = metric.dim();
        if comps.len() != n || comps.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(format!("tensor must be {n}x{n}")));
        }
        if let Some(v) = comps.iter().flatten().filter_map(Expr::max_var).max() {
            if v >= n {
                return Err(Error::Dimension(format!(
                    "tensor uses coordinate {v} beyond dimension {n}"
                )));
            }
        }
        Ok(SymTensorField { comps })
    }

    pub fn diagonal(metric: &MetricField, diag: Vec<Expr>) -> Result<SymTensorField> {
        let n = diag.len();
        let mut comps = vec![vec![Expr::zero(); n]; n];
        for (k, d) in diag.into_iter().enumerate() {
            comps[k][k] = d;
        }
        SymTensorField::new(metric, comps)
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn comps(&self) -> &SymMat {
        &self.comps
    }

    pub fn scaled(&self, c: f64) -> SymTensorField {
        SymTensorField {
            comps: self.comps.iter().map(|r| r.iter().map(|e| c * e).collect()).collect(),
        }
    }

    fn is_diagonal(&self) -> bool {
        self.comps
            .iter()
            .enumerate()
            .all(|(k, r)| r.iter().enumerate().all(|(j, e)| j == k || e.is_zero()))
    }

    pub fn at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            for j in 0..n {
                m[(k, j)] = self.comps[k][j].eval(p)?;
            }
        }
        Ok(m)
    }
}

/// The two eigenvalues of a tensor at a point with g-orthonormal bases.
#[derive(Clone, Debug, Serialize)]
pub struct EigenPair {
    pub lambda: f64,
    pub mu: f64,
    pub basis_lambda: Vec<Vec<f64>>,
    pub basis_mu: Vec<Vec<f64>>,
    pub gap: f64,
}

struct Cluster {
    value: f64,
    basis: Vec<DVector<f64>>,
}

/// `max |(gΦ)_ij − (gΦ)_ji| / √(g_ii g_jj)`, relative to `max(1, max |Φ|)`.
fn self_adjoint_defect_at(geo: &PointGeometry, a: &DMatrix<f64>) -> f64 {
    let b = &geo.g * a;
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((b[(i, j)] - b[(j, i)]).abs() / (geo.g[(i, i)] * geo.g[(j, j)]).sqrt());
        }
    }
    worst / a.amax().max(1.0)
}

fn check_self_adjoint(geo: &PointGeometry, a: &DMatrix<f64>) -> Result<()> {
    let defect = self_adjoint_defect_at(geo, a);
    if defect > SELF_ADJOINT_TOL {
        return Err(Error::NotSelfAdjoint {
            point: geo.point.clone(),
            defect,
        });
    }
    Ok(())
}

/// Splits the spectrum of the g-self-adjoint `a` into exactly two clusters.
fn two_clusters(geo: &PointGeometry, a: &DMatrix<f64>) -> Result<[Cluster; 2]> {
    let p = &geo.point;
    let chol = geo.g.clone().cholesky().ok_or_else(|| Error::NotSpd {
        point: p.clone(),
        eigenvalue: geo.min_eigenvalue,
    })?;
    let l = chol.l();
    let lt = l.transpose();
    // Lᵀ A L⁻ᵀ is symmetric when A is g-self-adjoint.
    let linv_t = lt.clone().try_inverse().expect("Cholesky factor is invertible");
    let s = &lt * a * &linv_t;
    let sym = (&s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let n = vals.len();
    if vals[n - 1] - vals[0] < GAP_MIN {
        return Err(Error::Coalescence {
            point: p.clone(),
            detail: format!("single eigenvalue {:e}", vals[0]),
        });
    }
    // 1-D two-means: the split with least within-cluster scatter.
    let sse = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
    };
    let split = (1..n)
        .min_by(|&a, &b| (sse(&vals[..a]) + sse(&vals[a..])).total_cmp(&(sse(&vals[..b]) + sse(&vals[b..]))))
        .expect("dimension at least two");
    let gap = vals[split] - vals[split - 1];
    if gap < GAP_MIN {
        return Err(Error::Coalescence {
            point: p.clone(),
            detail: format!("eigenvalue gap {gap:e} below {GAP_MIN:e}"),
        });
    }
    for w in vals[..split].windows(2).chain(vals[split..].windows(2)) {
        if w[1] - w[0] >= GAP_MIN {
            return Err(Error::Coalescence {
                point: p.clone(),
                detail: format!("more than two distinct eigenvalues (spectrum {vals:?})"),
            });
        }
    }
    let vec_of = |i: usize| {
        let w = eig.eigenvectors.column(order[i]).into_owned();
        lt.clone().solve_upper_triangular(&w).expect("triangular solve")
    };
    let make = |range: std::ops::Range<usize>| Cluster {
        value: vals[range.clone()].iter().sum::<f64>() / range.len() as f64,
        basis: range.map(vec_of).collect(),
    };
    Ok([make(0..split), make(split..n)])
}

/// Weight of `∂_0` in a cluster's eigenspace: `Σ ⟨v, ∂_0⟩_g²`.
fn first_axis_weight(geo: &PointGeometry, c: &Cluster) -> f64 {
    c.basis.iter().map(|v| (&geo.g * v)[0].powi(2)).sum()
}

/// Orders two clusters as (λ, μ): λ is the one whose eigenspace carries
/// most of the first coordinate direction.
fn label_by_axis(geo: &PointGeometry, [a, b]: [Cluster; 2]) -> (Cluster, Cluster) {
    if first_axis_weight(geo, &a) >= first_axis_weight(geo, &b) {
        (a, b)
    } else {
        (b, a)
    }
}

fn pair_of(lambda: Cluster, mu: Cluster) -> EigenPair {
    let to_vec = |c: &Cluster| c.basis.iter().map(|v| v.iter().copied().collect()).collect();
    EigenPair {
        lambda: lambda.value,
        mu: mu.value,
        basis_lambda: to_vec(&lambda),
        basis_mu: to_vec(&mu),
        gap: (lambda.value - mu.value).abs(),
    }
}

/// Self-adjointness defect of `Φ` at `p`.
pub fn self_adjoint_defect(g: &MetricField, phi: &SymTensorField, p: &[f64]) -> Result<f64> {
    let geo = g.geometry_at(p)?;
    Ok(self_adjoint_defect_at(&geo, &phi.at(p)?))
}

/// Eigenvalues and g-orthonormal eigenbases of `Φ` at `p`.
pub fn eigen_two(g: &MetricField, phi: &SymTensorField, p: &[f64]) -> Result<EigenPair> {
    let geo = g.geometry_at(p)?;
    let a = phi.at(p)?;
    check_self_adjoint(&geo, &a)?;
    let (l, m) = label_by_axis(&geo, two_clusters(&geo, &a)?);
    Ok(pair_of(l, m))
}

/// `max_{a,b} ‖(∇_aΦ)∂_b − (∇_bΦ)∂_a‖_g / (‖∂_a‖‖∂_b‖)`.
fn codazzi_at(geo: &PointGeometry, a: &DMatrix<f64>, da: &[DMatrix<f64>]) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let r = DVector::from_fn(n, |k, _| {
                let mut v = da[i][(k, j)] - da[j][(k, i)];
                for l in 0..n {
                    v += geo.gamma[k][(i, l)] * a[(l, j)] - geo.gamma[k][(j, l)] * a[(l, i)];
                }
                v
            });
            worst = worst.max(geo.norm(&r) / (geo.g[(i, i)] * geo.g[(j, j)]).sqrt());
        }
    }
    worst
}

/// Codazzi residual of `Φ` at `p` over coordinate pairs.
pub fn codazzi_residual(g: &MetricField, phi: &SymTensorField, p: &[f64]) -> Result<f64> {
    let geo = g.geometry_at(p)?;
    let n = g.dim();
    let mut batch = FieldBatch::new(n);
    let ids: Vec<Vec<FieldId>> = phi
        .comps
        .iter()
        .map(|r| r.iter().map(|e| batch.scalar(e, 1)).collect())
        .collect();
    let vals = batch.eval(p)?;
    let (a, da) = tensor_jet(&vals_fn(&vals, &ids), n);
    check_self_adjoint(&geo, &a)?;
    Ok(codazzi_at(&geo, &a, &da))
}

fn vals_fn<'a>(
    vals: &'a crate::calculus::BatchValues<'a>,
    ids: &'a [Vec<FieldId>],
) -> impl Fn(usize, usize) -> Jet2 + 'a {
    move |k, j| vals.scalar(ids[k][j])
}

/// Value and coordinate partials `da[l] = ∂_l Φ` of a tensor.
fn tensor_jet(f: &dyn Fn(usize, usize) -> Jet2, n: usize) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
    let mut a = DMatrix::zeros(n, n);
    let mut da = vec![DMatrix::zeros(n, n); n];
    for k in 0..n {
        for j in 0..n {
            let jet = f(k, j);
            a[(k, j)] = jet.value;
            for (l, d) in da.iter_mut().enumerate() {
                d[(k, j)] = jet.grad[l];
            }
        }
    }
    (a, da)
}

/// Cross-check of `μ` against a known relation `μ = f(σ)`.
#[derive(Clone, Debug)]
pub struct ClosedFormCheck {
    pub sigma: Expr,
    pub mu_of_sigma: UserFn,
}

/// Residuals of the eigenbundle-net criteria at one point.
#[derive(Clone, Debug, Serialize)]
pub struct CodazziPointRecord {
    pub point: Vec<f64>,
    pub lambda: f64,
    pub mu: f64,
    pub codazzi: f64,
    pub self_adjoint_defect: f64,
    /// `‖(λI − Φ)η − (∇λ)_{E_μ}‖`.
    pub mcn: f64,
    /// Mean curvature normals against `(λ−μ)⁻¹(∇λ)_{E_μ}` and `(μ−λ)⁻¹(∇μ)_{E_λ}`.
    pub pns: f64,
    /// `None` where `|λ + μ|` is below the tolerance.
    pub cpnet: Option<f64>,
    pub mulambda1: f64,
    pub mulambda2: f64,
    pub s1: f64,
    pub s2: f64,
    pub grad_lambda_along_lambda: f64,
    pub grad_mu_along_mu: f64,
    pub grad_lambda: f64,
    pub grad_mu: f64,
    pub sphericity_lambda: f64,
    pub sphericity_mu: f64,
    /// `|λ − h(μ)|`, when `h` is given.
    pub h_relation: Option<f64>,
    /// `|T(μ) − (h(μ) − μ) T(log σ)|` along a unit `T ∈ E_λ`, rank one only.
    pub tilmu: Option<f64>,
    pub closed_form: Option<f64>,
}

/// Symbolic eigen-structure fixed at a reference point.
struct Split {
    lambda: Expr,
    mu: Expr,
    rank_lambda: usize,
    frame: Vec<Vec<Expr>>,
    blocks: Vec<Vec<usize>>,
    coordinate: bool,
}

fn split_at(g: &MetricField, phi: &SymTensorField, p: &[f64]) -> Result<Split> {
    let geo = g.geometry_at(p)?;
    let a = phi.at(p)?;
    check_self_adjoint(&geo, &a)?;
    let (lc, mc) = label_by_axis(&geo, two_clusters(&geo, &a)?);
    let n = phi.dim();
    let (r, m) = (lc.basis.len(), mc.basis.len());
    if phi.is_diagonal() {
        let in_lambda: Vec<bool> = (0..n)
            .map(|k| (a[(k, k)] - lc.value).abs() < (a[(k, k)] - mc.value).abs())
            .collect();
        let bl: Vec<usize> = (0..n).filter(|&k| in_lambda[k]).collect();
        let bm: Vec<usize> = (0..n).filter(|&k| !in_lambda[k]).collect();
        let mean = |idx: &[usize]| Expr::sum(idx.iter().map(|&k| phi.comps[k][k].clone())) / idx.len() as f64;
        return Ok(Split {
            lambda: mean(&bl),
            mu: mean(&bm),
            rank_lambda: bl.len(),
            frame: VectorFieldSet::coordinate_frame(n)
                .fields
                .into_iter()
                .map(|f| f.comps)
                .collect(),
            blocks: vec![bl, bm],
            coordinate: true,
        });
    }
    let nf = n as f64;
    let s1 = Expr::sum((0..n).map(|k| phi.comps[k][k].clone()));
    let s2 = Expr::sum(
        (0..n)
            .flat_map(|k| (0..n).map(move |j| (k, j)))
            .map(|(k, j)| &phi.comps[k][j] * &phi.comps[j][k]),
    );
    let d = nf * s2 - Expr::pow(s1.clone(), 2.0);
    let sigma = if lc.value > mc.value { 1.0 } else { -1.0 };
    let root_l = (m as f64 / r as f64 * d.clone()).sqrt();
    let root_m = (r as f64 / m as f64 * d).sqrt();
    let lambda = &s1 / nf + sigma / nf * root_l;
    let mu = &s1 / nf - sigma / nf * root_m;
    let diff = &lambda - &mu;
    let proj_l: SymMat = (0..n)
        .map(|k| {
            (0..n)
                .map(|j| {
                    let shifted = if k == j {
                        &phi.comps[k][j] - &mu
                    } else {
                        phi.comps[k][j].clone()
                    };
                    shifted / &diff
                })
                .collect()
        })
        .collect();
    let proj_m: SymMat = (0..n)
        .map(|k| {
            (0..n)
                .map(|j| if k == j { 1.0 - &proj_l[k][j] } else { -&proj_l[k][j] })
                .collect()
        })
        .collect();
    let column = |pm: &SymMat, j: usize| -> Vec<Expr> { (0..n).map(|k| pm[k][j].clone()).collect() };
    let mut frame = Vec::with_capacity(n);
    for (pm, rank) in [(&proj_l, r), (&proj_m, m)] {
        let chosen = pivot_columns(&geo, pm, p, rank)?;
        frame.extend(chosen.into_iter().map(|j| column(pm, j)));
    }
    Ok(Split {
        lambda,
        mu,
        rank_lambda: r,
        frame,
        blocks: vec![(0..r).collect(), (r..n).collect()],
        coordinate: false,
    })
}

/// Greedy choice of `rank` columns of a projector with the largest
/// g-orthogonal residuals at `p`.
fn pivot_columns(geo: &PointGeometry, pm: &SymMat, p: &[f64], rank: usize) -> Result<Vec<usize>> {
    let n = pm.len();
    let cols: Vec<DVector<f64>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|k| pm[k][j].eval(p))
                .collect::<Result<Vec<f64>>>()
                .map(DVector::from_vec)
        })
        .collect::<Result<_>>()?;
    let mut chosen: Vec<usize> = Vec::new();
    let mut ortho: Vec<DVector<f64>> = Vec::new();
    for _ in 0..rank {
        let residual = |v: &DVector<f64>| {
            let mut r = v.clone();
            for q in &ortho {
                r -= q * geo.inner(q, v);
            }
            r
        };
        let best = (0..n)
            .filter(|j| !chosen.contains(j))
            .max_by(|&a, &b| geo.norm(&residual(&cols[a])).total_cmp(&geo.norm(&residual(&cols[b]))))
            .expect("enough columns");
        let r = residual(&cols[best]);
        let nr = geo.norm(&r);
        if !(nr > 1e-8) {
            return Err(Error::DegenerateFrame {
                point: p.to_vec(),
                detail: "eigenprojector has lower rank than its cluster".into(),
            });
        }
        ortho.push(r / nr);
        chosen.push(best);
    }
    Ok(chosen)
}

/// Compiled analysis of one tensor on one metric.
pub struct CodazziAnalyzer<'m> {
    metric: &'m MetricField,
    split: Split,
    net: OrthogonalNet,
    nets: NetAnalyzer<'m>,
    batch: FieldBatch,
    phi_ids: Vec<Vec<FieldId>>,
    lambda_id: FieldId,
    mu_id: FieldId,
    h_of_mu: Option<FieldId>,
    closed: Option<(FieldId, FieldId)>,
    tol: f64,
}

impl<'m> CodazziAnalyzer<'m> {
    /// Fixes the eigenvalue labels and eigenbundle frame at `reference`.
    pub fn new(
        metric: &'m MetricField,
        phi: &SymTensorField,
        reference: &[f64],
        tol: f64,
        h: Option<&UserFn>,
        closed: Option<&ClosedFormCheck>,
    ) -> Result<CodazziAnalyzer<'m>> {
        if phi.dim() != metric.dim() {
            return Err(Error::Dimension(format!(
                "tensor is {}x{} but the metric has dimension {}",
                phi.dim(),
                phi.dim(),
                metric.dim()
            )));
        }
        let split = split_at(metric, phi, reference)?;
        let net = if split.coordinate {
            OrthogonalNet::coordinate(metric.dim(), split.blocks.clone())?
        } else {
            let fields = split.frame.iter().cloned().map(VectorField::new).collect();
            OrthogonalNet::from_frame(VectorFieldSet { fields }, split.blocks.clone())?
        };
        let nets = NetAnalyzer::new(metric, &net, tol.max(1e-12))?;
        let n = metric.dim();
        let mut batch = FieldBatch::new(n);
        let phi_ids = phi
            .comps
            .iter()
            .map(|r| r.iter().map(|e| batch.scalar(e, 1)).collect())
            .collect();
        let lambda_id = batch.scalar(&split.lambda, 2);
        let mu_id = batch.scalar(&split.mu, 2);
        let h_of_mu = h.map(|h| batch.scalar(&h.apply(&split.mu), 0));
        let closed = closed.map(|c| {
            let s = batch.scalar(&c.sigma, 0);
            let f = batch.scalar(&c.mu_of_sigma.apply(&c.sigma), 0);
            (s, f)
        });
        Ok(CodazziAnalyzer {
            metric,
            split,
            net,
            nets,
            batch,
            phi_ids,
            lambda_id,
            mu_id,
            h_of_mu,
            closed,
            tol,
        })
    }

    pub fn net(&self) -> &OrthogonalNet {
        &self.net
    }

    pub fn rank_lambda(&self) -> usize {
        self.split.rank_lambda
    }

    pub fn rank_mu(&self) -> usize {
        self.metric.dim() - self.split.rank_lambda
    }

    /// Numeric eigenvalues at `p`, labeled by proximity to `previous_lambda`
    /// (or by the first-axis rule when absent), checked against the
    /// symbolic fields.
    pub fn track(&self, p: &[f64], previous_lambda: Option<f64>) -> Result<EigenPair> {
        let geo = self.metric.geometry_at(p)?;
        let a = self.tensor_value(p)?;
        check_self_adjoint(&geo, &a)?;
        let [c0, c1] = two_clusters(&geo, &a)?;
        let (l, m) = match previous_lambda {
            Some(prev) if (c0.value - prev).abs() <= (c1.value - prev).abs() => (c0, c1),
            Some(_) => (c1, c0),
            None => label_by_axis(&geo, [c0, c1]),
        };
        if l.basis.len() != self.split.rank_lambda {
            return Err(Error::Coalescence {
                point: p.to_vec(),
                detail: format!(
                    "rank of the λ-eigenbundle changed from {} to {}",
                    self.split.rank_lambda,
                    l.basis.len()
                ),
            });
        }
        let vals = self.batch.eval(p)?;
        let lam = vals.scalar(self.lambda_id).value;
        if (lam - l.value).abs() > 1e-8 * l.value.abs().max(1.0) {
            return Err(Error::Coalescence {
                point: p.to_vec(),
                detail: format!("eigenvalue labels switched (tracked {:e}, field {lam:e})", l.value),
            });
        }
        Ok(pair_of(l, m))
    }

    fn tensor_value(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let vals = self.batch.eval(p)?;
        let n = self.metric.dim();
        Ok(DMatrix::from_fn(n, n, |k, j| vals.scalar(self.phi_ids[k][j]).value))
    }

    /// All criteria residuals at `p`.
    pub fn residuals(&self, p: &[f64]) -> Result<CodazziPointRecord> {
        let np = self.nets.at(p)?;
        let geo = &np.geo;
        let vals = self.batch.eval(p)?;
        let n = self.metric.dim();
        let (a, da) = tensor_jet(&vals_fn(&vals, &self.phi_ids), n);
        let self_adjoint_defect = self_adjoint_defect_at(geo, &a);
        if self_adjoint_defect > SELF_ADJOINT_TOL {
            return Err(Error::NotSelfAdjoint {
                point: p.to_vec(),
                defect: self_adjoint_defect,
            });
        }
        let lj = vals.scalar(self.lambda_id);
        let mj = vals.scalar(self.mu_id);
        let (l, m) = (lj.value, mj.value);
        let grad_l = geo.grad(&lj.grad);
        let grad_m = geo.grad(&mj.grad);
        let (bl, bm) = (&self.net.blocks()[0], &self.net.blocks()[1]);
        let gl_mu = np.project(bm, &grad_l)?;
        let gm_lambda = np.project(bl, &grad_m)?;
        let eta = &np.h[0];
        let zeta = &np.h[1];
        let ident = DMatrix::identity(n, n);
        let mcn = geo.norm(&((ident * l - &a) * &eta.value - &gl_mu));
        let pns = geo
            .norm(&(&eta.value - &gl_mu / (l - m)))
            .max(geo.norm(&(&zeta.value - &gm_lambda / (m - l))));

        let xs = orthonormal(&np, bl);
        let ys = orthonormal(&np, bm);
        let hl = geo.hessian(&lj);
        let hm = geo.hessian(&mj);
        let d = |v: &DVector<f64>, f: &DVector<f64>| v.dot(f);
        let alpha = 0.5 * (l + m);
        let cp_applicable = (l + m).abs() >= self.tol;
        let beta = (m - l) / (m + l);
        let dalpha = (&lj.grad + &mj.grad) * 0.5;
        let dbeta = (&mj.grad * (2.0 * l) - &lj.grad * (2.0 * m)) / ((l + m) * (l + m));
        let halpha = (&hl + &hm) * 0.5;
        let mut cp: f64 = 0.0;
        let (mut ml1, mut ml2, mut s1, mut s2): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
        for x in &xs {
            let d_eta = geo.cov_deriv(x, eta);
            for y in &ys {
                let (xl, yl, xm, ym) = (d(x, &lj.grad), d(y, &lj.grad), d(x, &mj.grad), d(y, &mj.grad));
                let hess_l = x.dot(&(&hl * y));
                let hess_m = x.dot(&(&hm * y));
                if cp_applicable {
                    let (xa, ya) = (d(x, &dalpha), d(y, &dalpha));
                    let (xb, yb) = (d(x, &dbeta), d(y, &dbeta));
                    let lhs =
                        2.0 * beta * xa * ya + alpha * xa * yb + alpha * ya * xb - alpha * beta * x.dot(&(&halpha * y));
                    cp = cp.max(lhs.abs());
                }
                let e1 = 2.0 * xm * ym - xm * yl + (l - m) * hess_m;
                let e2 = 2.0 * xl * yl - xm * yl - (l - m) * hess_l;
                ml1 = ml1.max(e1.abs());
                ml2 = ml2.max(e2.abs());
                let inv2 = 1.0 / ((l - m) * (l - m));
                let lhs1 = geo.inner(&d_eta, y);
                let lhs2 = geo.inner(&geo.cov_deriv(y, zeta), x);
                s1 = s1.max((lhs1 + inv2 * e2).abs());
                s2 = s2.max((lhs2 + inv2 * e1).abs());
            }
        }
        let gl_lambda = np.project(bl, &grad_l)?;
        let gm_mu = np.project(bm, &grad_m)?;
        let geo_l = np.geometry(0)?;
        let geo_m = np.geometry(1)?;
        let h_val = self.h_of_mu.map(|id| vals.scalar(id).value);
        let tilmu = match h_val {
            Some(hv) if xs.len() == 1 => {
                let t = &xs[0];
                // ζ = −∇ log σ, so T(log σ) = −⟨ζ, T⟩.
                let dlog_sigma = -geo.inner(&zeta.value, t);
                Some((d(t, &mj.grad) - (hv - m) * dlog_sigma).abs())
            }
            _ => None,
        };
        let closed_form = self.closed.map(|(_, f)| (m - vals.scalar(f).value).abs());
        Ok(CodazziPointRecord {
            point: p.to_vec(),
            lambda: l,
            mu: m,
            codazzi: codazzi_at(geo, &a, &da),
            self_adjoint_defect,
            mcn,
            pns,
            cpnet: cp_applicable.then_some(cp),
            mulambda1: ml1,
            mulambda2: ml2,
            s1,
            s2,
            grad_lambda_along_lambda: geo.norm(&gl_lambda),
            grad_mu_along_mu: geo.norm(&gm_mu),
            grad_lambda: geo.norm(&grad_l),
            grad_mu: geo.norm(&grad_m),
            sphericity_lambda: geo_l.sphericity,
            sphericity_mu: geo_m.sphericity,
            h_relation: h_val.map(|hv| (l - hv).abs()),
            tilmu,
            closed_form,
        })
    }
}

/// g-orthonormal basis of the span of frame vectors `idx`.
fn orthonormal(np: &NetPoint<'_>, idx: &[usize]) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(idx.len());
    for &a in idx {
        let mut v = np.frame[a].value.clone();
        for q in &out {
            v -= q * np.geo.inner(q, &v);
        }
        let nv = np.geo.norm(&v);
        out.push(v / nv);
    }
    out
}

/// Criteria residuals at a single point, with labels fixed there.
pub fn criteria_residuals(g: &MetricField, phi: &SymTensorField, p: &[f64], tol: f64) -> Result<CodazziPointRecord> {
    CodazziAnalyzer::new(g, phi, p, tol, None, None)?.residuals(p)
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureCase {
    /// Both eigenvalues constant: a Riemannian product with `Φ = A₀Π₀ + A₁Π₁`.
    ConstantEigenvalues {
        a0: f64,
        a1: f64,
    },
    /// Rank-one `E_λ`: a warped product over an interval.
    Warped,
    Outside {
        reason: String,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct StructureReport {
    pub case: StructureCase,
    /// `max ‖(∇μ)_{E_μ}‖`.
    pub mu_along_mu: f64,
    /// `max |λ − h(μ)|`.
    pub h_relation: f64,
    /// Product (case i) or warped (case ii) structure of the eigenbundle net.
    pub expected_structure: Option<Flag>,
    pub tilmu: Option<Flag>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CodazziFlags {
    /// Conformal to a Riemannian product, by the `α, β` criterion.
    pub isothermic: Flag,
    pub mulambda1: Flag,
    pub mulambda2: Flag,
    /// Both `mulambda` equations.
    pub mulambda: Flag,
    /// CP classification of the eigenbundle net.
    pub cp_net: Flag,
    /// Both eigenbundles spherical.
    pub spherical_eigenbundles: Flag,
}

#[derive(Clone, Debug, Serialize)]
pub struct CodazziReport {
    pub tolerance: f64,
    pub samples: usize,
    pub rank_lambda: usize,
    pub rank_mu: usize,
    pub codazzi: Flag,
    pub mcn: Flag,
    pub pns: Flag,
    pub s1: Flag,
    pub s2: Flag,
    pub flags: CodazziFlags,
    pub structure: Option<StructureReport>,
    pub closed_form: Option<Flag>,
    pub net: NetReport,
    pub points: Vec<CodazziPointRecord>,
}

impl CodazziReport {
    pub fn verdicts(&self) -> Vec<(String, Flag)> {
        let mut v = vec![
            ("codazzi".to_string(), self.codazzi),
            ("mcn".into(), self.mcn),
            ("pns".into(), self.pns),
            ("s1".into(), self.s1),
            ("s2".into(), self.s2),
            ("isothermic".into(), self.flags.isothermic),
            ("mulambda1".into(), self.flags.mulambda1),
            ("mulambda2".into(), self.flags.mulambda2),
            ("cp_net".into(), self.flags.cp_net),
            ("spherical_eigenbundles".into(), self.flags.spherical_eigenbundles),
            ("mulambda".into(), self.flags.mulambda),
        ];
        if let Some(c) = &self.structure {
            if let Some(f) = c.expected_structure {
                v.push(("expected_structure".into(), f));
            }
            if let Some(f) = c.tilmu {
                v.push(("tilmu".into(), f));
            }
        }
        if let Some(f) = self.closed_form {
            v.push(("closed_form".into(), f));
        }
        v
    }
}

/// Full analysis of a Codazzi tensor over a sample plan.
pub fn classify_codazzi(
    g: &MetricField,
    phi: &SymTensorField,
    h: Option<&UserFn>,
    closed: Option<&ClosedFormCheck>,
    plan: &SamplePlan,
    tol: f64,
) -> Result<CodazziReport> {
    let points = plan.points(g.chart());
    let first = points
        .first()
        .ok_or_else(|| Error::Precondition("sampling produced no interior points".into()))?;
    let an = CodazziAnalyzer::new(g, phi, first, tol, h, closed)?;
    let mut prev = None;
    let mut records = Vec::with_capacity(points.len());
    for p in &points {
        let e = an.track(p, prev)?;
        prev = Some(e.lambda);
        let rec = an.residuals(p)?;
        if rec.codazzi > tol {
            return Err(Error::NotCodazzi {
                point: p.clone(),
                residual: rec.codazzi,
            });
        }
        records.push(rec);
    }
    let net = classify_net(g, an.net(), plan, tol)?;
    let max = |f: fn(&CodazziPointRecord) -> f64| max_of(records.iter().map(f));
    let (r, m) = (an.rank_lambda(), an.rank_mu());
    let decisive = FAIL_FACTOR * tol;
    if r >= 2 && max(|p| p.grad_lambda_along_lambda) > decisive {
        return Err(Error::ConstantEigenvalueViolated(format!(
            "λ-eigenbundle has rank {r} but λ varies along it ({:e})",
            max(|p| p.grad_lambda_along_lambda)
        )));
    }
    if m >= 2 && max(|p| p.grad_mu_along_mu) > decisive {
        return Err(Error::ConstantEigenvalueViolated(format!(
            "μ-eigenbundle has rank {m} but μ varies along it ({:e})",
            max(|p| p.grad_mu_along_mu)
        )));
    }
    let cp_values: Vec<f64> = records.iter().filter_map(|p| p.cpnet).collect();
    let isothermic = if cp_values.is_empty() {
        Flag::not_applicable(tol)
    } else {
        Flag::new(max_of(cp_values), tol)
    };
    let ml1 = Flag::new(max(|p| p.mulambda1), tol);
    let ml2 = Flag::new(max(|p| p.mulambda2), tol);
    let flags = CodazziFlags {
        isothermic,
        mulambda1: ml1,
        mulambda2: ml2,
        mulambda: Flag::new(ml1.max_residual.max(ml2.max_residual), tol),
        cp_net: net.flags.cp,
        spherical_eigenbundles: Flag::new(max(|p| p.sphericity_lambda).max(max(|p| p.sphericity_mu)), tol),
    };
    let structure = h.map(|_| structure(&records, &net, r, tol));
    let closed_form = closed.map(|_| Flag::new(max_of(records.iter().filter_map(|p| p.closed_form)), tol));
    Ok(CodazziReport {
        tolerance: tol,
        samples: records.len(),
        rank_lambda: r,
        rank_mu: m,
        codazzi: Flag::new(max(|p| p.codazzi), tol),
        mcn: Flag::new(max(|p| p.mcn), tol),
        pns: Flag::new(max(|p| p.pns), tol),
        s1: Flag::new(max(|p| p.s1), tol),
        s2: Flag::new(max(|p| p.s2), tol),
        flags,
        structure,
        closed_form,
        net,
        points: records,
    })
}

fn structure(records: &[CodazziPointRecord], net: &NetReport, rank_lambda: usize, tol: f64) -> StructureReport {
    let max = |f: &dyn Fn(&CodazziPointRecord) -> f64| max_of(records.iter().map(f));
    let mu_along_mu = max(&|p| p.grad_mu_along_mu);
    let h_relation = max(&|p| p.h_relation.unwrap_or(f64::NAN));
    let mut report = StructureReport {
        case: StructureCase::Outside { reason: String::new() },
        mu_along_mu,
        h_relation,
        expected_structure: None,
        tilmu: None,
    };
    if !(mu_along_mu <= tol) {
        report.case = StructureCase::Outside {
            reason: format!("μ is not constant along its eigenbundle ({mu_along_mu:e})"),
        };
        return report;
    }
    if !(h_relation <= tol) {
        report.case = StructureCase::Outside {
            reason: format!("λ differs from h(μ) by {h_relation:e}"),
        };
        return report;
    }
    let constant = max(&|p| p.grad_lambda) <= tol && max(&|p| p.grad_mu) <= tol;
    if constant {
        let mean = |f: &dyn Fn(&CodazziPointRecord) -> f64| records.iter().map(f).sum::<f64>() / records.len() as f64;
        report.case = StructureCase::ConstantEigenvalues {
            a0: mean(&|p| p.lambda),
            a1: mean(&|p| p.mu),
        };
        let geodesy = max_of(net.maxima.iter().map(|m| m.geodesy));
        report.expected_structure = Some(Flag::new(geodesy, tol));
    } else if rank_lambda == 1 {
        report.case = StructureCase::Warped;
        report.expected_structure = Some(net.flags.wp);
        report.tilmu = Some(Flag::new(max(&|p| p.tilmu.unwrap_or(f64::NAN)), tol));
    } else {
        report.case = StructureCase::Outside {
            reason: "eigenvalues are not constant and the λ-eigenbundle has rank at least two; \
                     outside the warped-splitting hypotheses as interpreted"
                .into(),
        };
    }
    report
}

/// Canonical Codazzi constructions.
#[derive(Clone, Debug)]
pub enum CandidateKind {
    /// `g = φ²(h₀ ⊕ h₁)` with `φ⁻¹ = φ₀ + φ₁` and `Φ = φ₁ Π₀ − φ₀ Π₁`.
    ConformalSum {
        phi0: Expr,
        phi1: Expr,
        factors: Vec<SymMat>,
    },
    /// `g = dt² + σ̃² h₁` with `Φ = h(μ̃) Π₀ + μ̃ Π₁`.
    WarpedInterval {
        h: UserFn,
        sigma: Expr,
        mu: Expr,
        fiber: SymMat,
    },
}

#[derive(Clone, Debug)]
pub struct Candidate {
    pub metric: MetricField,
    pub tensor: SymTensorField,
    /// Maximum Codazzi residual on a coarse grid.
    pub codazzi_residual: f64,
    /// Differentiated relation between `μ̃` and `σ̃` (warped interval only).
    pub tilmu_residual: Option<f64>,
}

fn block_tensor(n: usize, blocks: &[Vec<usize>], values: [Expr; 2]) -> SymMat {
    let mut comps = vec![vec![Expr::zero(); n]; n];
    for (block, v) in blocks.iter().zip(values) {
        for &k in block {
            comps[k][k] = v.clone();
        }
    }
    comps
}

fn only_uses(e: &Expr, allowed: &[usize], what: &str) -> Result<()> {
    match e.vars().into_iter().find(|v| !allowed.contains(v)) {
        Some(v) => Err(Error::KindConstraint(format!("{what} depends on coordinate {v}"))),
        None => Ok(()),
    }
}

/// Builds a metric and tensor from canonical data and checks the result.
pub fn build_codazzi_candidate(chart: &Chart, kind: &CandidateKind, tol: f64) -> Result<Candidate> {
    let blocks = chart
        .blocks()
        .ok_or_else(|| Error::InvalidChart("canonical constructions need a two-block chart".into()))?
        .to_vec();
    if blocks.len() != 2 {
        return Err(Error::InvalidChart(format!(
            "expected two blocks, found {}",
            blocks.len()
        )));
    }
    let n = chart.dim();
    let coarse = SamplePlan::grid_only(5, 0.1);
    let samples = coarse.points(chart);
    let positive = |e: &Expr, what: &str| -> Result<()> {
        for p in &samples {
            let v = e.eval(p)?;
            if !(v > 0.0) {
                return Err(Error::NonPositive {
                    what: what.into(),
                    point: p.clone(),
                    value: v,
                });
            }
        }
        Ok(())
    };
    let (metric, tensor, tilmu_residual) = match kind {
        CandidateKind::ConformalSum { phi0, phi1, factors } => {
            only_uses(phi0, &blocks[0], "φ₀")?;
            only_uses(phi1, &blocks[1], "φ₁")?;
            let inv = phi0 + phi1;
            positive(&inv, "φ⁻¹")?;
            let base = TwistedSpec::new(Kind::Product, chart.clone(), factors.clone(), vec![Expr::one(); 2])?;
            let spec = ProductSpec::ConformalOf {
                inner: Box::new(ProductSpec::Base(base)),
                phi: inv.recip(),
            };
            let metric = build_metric(&spec)?;
            let tensor = SymTensorField::new(&metric, block_tensor(n, &blocks, [phi1.clone(), -phi0]))?;
            (metric, tensor, None)
        }
        CandidateKind::WarpedInterval { h, sigma, mu, fiber } => {
            if blocks[0].len() != 1 {
                return Err(Error::InvalidChart(
                    "the warped-interval construction needs a one-dimensional base".into(),
                ));
            }
            only_uses(sigma, &blocks[0], "σ̃")?;
            only_uses(mu, &blocks[0], "μ̃")?;
            positive(sigma, "σ̃")?;
            let t = blocks[0][0];
            let h_mu = h.apply(mu);
            let relation = mu.diff(t) - (&h_mu - mu) * (sigma.diff(t) / sigma);
            let residual = max_of(
                samples
                    .iter()
                    .map(|p| relation.eval(p).map(f64::abs).unwrap_or(f64::NAN)),
            );
            if !(residual <= tol) {
                return Err(Error::Rejected(format!(
                    "μ̃ and σ̃ do not satisfy the relation with h (residual {residual:e})"
                )));
            }
            let base = TwistedSpec::new(
                Kind::Warped,
                chart.clone(),
                vec![vec![vec![Expr::one()]], fiber.clone()],
                vec![Expr::one(), sigma.clone()],
            )?;
            let metric = build_metric(&ProductSpec::Base(base))?;
            let tensor = SymTensorField::new(&metric, block_tensor(n, &blocks, [h_mu, mu.clone()]))?;
            (metric, tensor, Some(residual))
        }
    };
    let codazzi = samples
        .iter()
        .map(|p| codazzi_residual(&metric, &tensor, p))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Candidate {
        metric,
        tensor,
        codazzi_residual: max_of(codazzi),
        tilmu_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::scalar::parse_with;
    use std::f64::consts::PI;

    fn e2(s: &str) -> Expr {
        parse_with(s, &["x0".into(), "x1".into()], &[]).unwrap()
    }

    fn euclid(n: usize) -> MetricField {
        MetricField::euclidean(Chart::with_domain(vec![(-1.0, 1.0); n]).unwrap())
    }

    #[test]
    fn multiple_of_identity_is_codazzi() {
        let g = fixtures::polar().metric;
        let phi = SymTensorField::diagonal(&g, vec![Expr::constant(3.0); 2]).unwrap();
        assert_eq!(codazzi_residual(&g, &phi, &[1.3, 0.2]).unwrap(), 0.0);
    }

    #[test]
    fn torus_shape_operator() {
        let f = fixtures::torus_shape_operator();
        let p = [PI / 3.0, 0.0];
        assert!(codazzi_residual(&f.metric, &f.tensor, &p).unwrap() <= 1e-10);
        let e = eigen_two(&f.metric, &f.tensor, &p).unwrap();
        assert!((e.lambda - 1.0).abs() <= 1e-10 && (e.mu - 0.2).abs() <= 1e-10, "{e:?}");
        assert!(e.basis_lambda[0][1].abs() < 1e-12);
    }

    #[test]
    fn polar_cone_is_codazzi() {
        let f = fixtures::polar_cone();
        assert!(codazzi_residual(&f.metric, &f.tensor, &[1.7, 0.4]).unwrap() <= 1e-14);
    }

    #[test]
    fn coalescence_and_ranks() {
        let g = euclid(2);
        let id = SymTensorField::diagonal(&g, vec![Expr::one(); 2]).unwrap();
        assert!(matches!(
            eigen_two(&g, &id, &[0.0, 0.0]),
            Err(Error::Coalescence { .. })
        ));
        let g3 = euclid(3);
        let phi =
            SymTensorField::diagonal(&g3, vec![Expr::constant(2.0), Expr::constant(3.0), Expr::constant(3.0)]).unwrap();
        let e = eigen_two(&g3, &phi, &[0.0; 3]).unwrap();
        assert_eq!(
            (e.lambda, e.basis_lambda.len(), e.mu, e.basis_mu.len()),
            (2.0, 1, 3.0, 2)
        );
        let three =
            SymTensorField::diagonal(&g3, vec![Expr::constant(1.0), Expr::constant(2.0), Expr::constant(3.0)]).unwrap();
        assert!(matches!(
            eigen_two(&g3, &three, &[0.0; 3]),
            Err(Error::Coalescence { .. })
        ));
    }

    #[test]
    fn non_self_adjoint_is_reported() {
        let g = euclid(2);
        let phi = SymTensorField::new(
            &g,
            vec![vec![Expr::one(), Expr::one()], vec![Expr::zero(), Expr::constant(2.0)]],
        )
        .unwrap();
        assert!(matches!(
            codazzi_residual(&g, &phi, &[0.0, 0.0]),
            Err(Error::NotSelfAdjoint { .. })
        ));
    }

    #[test]
    fn constant_eigenvalues_make_every_criterion_vanish() {
        let g = euclid(2);
        let phi = SymTensorField::diagonal(&g, vec![Expr::zero(), Expr::one()]).unwrap();
        let r = criteria_residuals(&g, &phi, &[0.1, 0.2], 1e-8).unwrap();
        for v in [r.mcn, r.pns, r.cpnet.unwrap(), r.mulambda1, r.mulambda2, r.s1, r.s2] {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn constant_mean_makes_cpnet_vanish() {
        // λ = 1 + f, μ = 1 − f with f depending on the λ-direction only;
        // Codazzi on the flat plane since each eigenvalue is constant on its
        // own eigenbundle's orthogonal complement... checked only for cpnet.
        let g = euclid(2);
        let phi = SymTensorField::diagonal(&g, vec![e2("1 + 0.3*x1"), e2("1 - 0.3*x1")]).unwrap();
        let r = criteria_residuals(&g, &phi, &[0.2, 0.1], 1e-8).unwrap();
        assert!(r.cpnet.unwrap() <= 1e-14);
    }

    #[test]
    fn torus_classification() {
        let f = fixtures::torus_shape_operator();
        let closed = ClosedFormCheck {
            sigma: e2("2 + cos(x0)"),
            mu_of_sigma: UserFn::parse("m", "s", "1 - 2/s", &[]).unwrap(),
        };
        let r = classify_codazzi(
            &f.metric,
            &f.tensor,
            f.h.as_ref(),
            Some(&closed),
            &SamplePlan::default(),
            1e-8,
        )
        .unwrap();
        assert!(r.codazzi.max_residual <= 1e-10);
        assert!(r.flags.isothermic.max_residual <= 1e-9);
        assert!(r.flags.mulambda1.max_residual <= 1e-9);
        assert!(r.s1.max_residual <= 1e-9 && r.s2.max_residual <= 1e-9);
        let c = r.structure.unwrap();
        assert!(matches!(c.case, StructureCase::Warped));
        assert!(c.tilmu.unwrap().max_residual <= 1e-9);
        assert!(r.closed_form.unwrap().max_residual <= 1e-9);
    }

    #[test]
    fn polar_cone_case_two() {
        let f = fixtures::polar_cone();
        let r = classify_codazzi(&f.metric, &f.tensor, f.h.as_ref(), None, &SamplePlan::default(), 1e-8).unwrap();
        let c = r.structure.unwrap();
        assert!(matches!(c.case, StructureCase::Warped), "{:?}", c.case);
        assert!(c.tilmu.unwrap().max_residual <= 1e-12);
    }

    #[test]
    fn constants_give_case_one() {
        let g = MetricField::euclidean(Chart::with_domain(vec![(0.0, 1.0); 2]).unwrap());
        let phi = SymTensorField::diagonal(&g, vec![Expr::constant(2.0), Expr::constant(3.0)]).unwrap();
        let h = UserFn::constant("h", 2.0);
        let r = classify_codazzi(&g, &phi, Some(&h), None, &SamplePlan::default(), 1e-8).unwrap();
        match r.structure.unwrap().case {
            StructureCase::ConstantEigenvalues { a0, a1 } => assert_eq!((a0, a1), (2.0, 3.0)),
            c => panic!("{c:?}"),
        }
        assert!(r.net.flags.cp.holds() && r.net.flags.wp.holds());
    }

    #[test]
    fn warped_interval_candidates() {
        let c = Chart::with_domain(vec![(0.5, 3.0), (-3.0, 3.0)])
            .unwrap()
            .with_blocks(vec![vec![0], vec![1]], false)
            .unwrap();
        let make = |mu: &str| CandidateKind::WarpedInterval {
            h: UserFn::constant("h", 0.0),
            sigma: Expr::var(0),
            mu: e2(mu),
            fiber: vec![vec![Expr::one()]],
        };
        let a = build_codazzi_candidate(&c, &make("1/x0"), 1e-8).unwrap();
        assert!(a.codazzi_residual <= 1e-12);
        let b = build_codazzi_candidate(&c, &make("2/x0"), 1e-8).unwrap();
        assert!(b.codazzi_residual <= 1e-10);
        assert!(matches!(
            build_codazzi_candidate(&c, &make("1/x0^2"), 1e-8),
            Err(Error::Rejected(_))
        ));
    }

    #[test]
    fn conformal_sum_candidate_is_codazzi() {
        let f = fixtures::conformal_sum();
        let r = classify_codazzi(&f.metric, &f.tensor, None, None, &SamplePlan::default(), 1e-8).unwrap();
        assert!(r.codazzi.max_residual <= 1e-8);
        assert!(r.s1.max_residual <= 1e-9 && r.s2.max_residual <= 1e-9);
        assert!(r.flags.cp_net.holds() && r.flags.mulambda.holds());
    }

    #[test]
    fn general_frame_matches_diagonal() {
        // λ(y0) on the direction e = (c, s), constant μ across it: a Codazzi
        // tensor on the plane written in rotated coordinates.
        let g = euclid(2);
        let (c, s) = (0.8f64, 0.6f64);
        let lam = 1.0 + 0.2 * (c * Expr::var(0) + s * Expr::var(1));
        let mu = Expr::constant(-0.5);
        let comps = vec![
            vec![c * c * &lam + s * s * &mu, c * s * (&lam - &mu)],
            vec![c * s * (&lam - &mu), s * s * &lam + c * c * &mu],
        ];
        let phi = SymTensorField::new(&g, comps).unwrap();
        let p = [0.3, -0.2];
        let an = CodazziAnalyzer::new(&g, &phi, &p, 1e-8, None, None).unwrap();
        let r = an.residuals(&p).unwrap();
        assert!((r.lambda - 1.024).abs() < 1e-12 && (r.mu + 0.5).abs() < 1e-12, "{r:?}");
        assert!(r.codazzi <= 1e-14 && r.mcn <= 1e-12, "{r:?}");
        assert!(r.pns <= 1e-12 && r.s1 <= 1e-12 && r.s2 <= 1e-12, "{r:?}");
    }
}

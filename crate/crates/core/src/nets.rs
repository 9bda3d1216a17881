//! Orthogonal nets and the geometry of their distributions: mean curvature
//! normals, umbilicity, sphericity, total geodesy, integrability, and the
//! TP/WP/QW/CQW/CWP/CP classification.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::calculus::{bracket, FieldBatch, FieldId, FieldJet, MetricField, PointGeometry, VectorFieldSet};
use crate::chart::validate_partition;
use crate::error::{Error, Result};
use crate::linalg;
use crate::sampling::SamplePlan;
use crate::scalar::Expr;
use crate::verdict::{max_of, Flag, Verdict};

/// A frame split into mutually orthogonal blocks `E_0, …, E_k`.
#[derive(Clone, Debug)]
pub struct OrthogonalNet {
    frame: Vec<Vec<Expr>>,
    blocks: Vec<Vec<usize>>,
    coordinate: bool,
}

impl OrthogonalNet {
    /// Net spanned by coordinate fields, grouped by `blocks`.
    pub fn coordinate(dim: usize, blocks: Vec<Vec<usize>>) -> Result<OrthogonalNet> {
        validate_partition(&blocks, dim, false).map_err(Error::InvalidNet)?;
        if blocks.len() < 2 {
            return Err(Error::InvalidNet("a net needs at least two blocks".into()));
        }
        Ok(OrthogonalNet {
            frame: VectorFieldSet::coordinate_frame(dim)
                .fields
                .into_iter()
                .map(|f| f.comps)
                .collect(),
            blocks,
            coordinate: true,
        })
    }

    /// Net spanned by an explicit frame; `blocks` partitions frame indices.
    pub fn from_frame(frame: VectorFieldSet, blocks: Vec<Vec<usize>>) -> Result<OrthogonalNet> {
        let n = frame.fields.len();
        if frame.fields.iter().any(|f| f.dim() != n) {
            return Err(Error::InvalidNet(format!(
                "frame must consist of {n} vectors with {n} components"
            )));
        }
        validate_partition(&blocks, n, false).map_err(Error::InvalidNet)?;
        if blocks.len() < 2 {
            return Err(Error::InvalidNet("a net needs at least two blocks".into()));
        }
        Ok(OrthogonalNet {
            frame: frame.fields.into_iter().map(|f| f.comps).collect(),
            blocks,
            coordinate: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.frame.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn frame(&self) -> &[Vec<Expr>] {
        &self.frame
    }

    pub fn is_coordinate(&self) -> bool {
        self.coordinate
    }

    /// Frame indices outside block `i`.
    pub fn complement(&self, i: usize) -> Vec<usize> {
        let mut c: Vec<usize> = self
            .blocks
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, b)| b.iter().copied())
            .collect();
        c.sort_unstable();
        c
    }
}

/// Geometry of block `i` and of its orthogonal complement at one point.
#[derive(Clone, Debug, Serialize)]
pub struct DistributionGeometry {
    pub block: usize,
    #[serde(rename = "H")]
    pub h: Vec<f64>,
    pub eta: Vec<f64>,
    pub umbilicity: f64,
    pub umbilicity_perp: f64,
    pub sphericity: f64,
    pub sphericity_perp: f64,
    pub geodesy: f64,
    pub geodesy_perp: f64,
    pub integrability: f64,
    pub integrability_perp: f64,
}

/// Symbolic mean curvature normal of the distribution spanned by frame
/// vectors `inside`, with normal space spanned by `outside`.
pub(crate) fn mean_curvature_sym(
    metric: &MetricField,
    frame: &[Vec<Expr>],
    inside: &[usize],
    outside: &[usize],
) -> Vec<Expr> {
    let n = metric.dim();
    if outside.is_empty() {
        return vec![Expr::zero(); n];
    }
    let gram = |idx: &[usize]| -> linalg::SymMat {
        idx.iter()
            .map(|&a| idx.iter().map(|&b| metric.inner_sym(&frame[a], &frame[b])).collect())
            .collect()
    };
    let gin = linalg::inverse(&gram(inside));
    let gout = linalg::inverse(&gram(outside));
    // Trace of the second fundamental form, still lowered.
    let mut trace = vec![Expr::zero(); n];
    for (a, &fa) in inside.iter().enumerate() {
        for (b, &fb) in inside.iter().enumerate() {
            if gin[a][b].is_zero() {
                continue;
            }
            let low = metric.cov_deriv_lowered_sym(&frame[fa], &frame[fb]);
            for l in 0..n {
                trace[l] = &trace[l] + &gin[a][b] * &low[l];
            }
        }
    }
    let pairing: Vec<Expr> = outside
        .iter()
        .map(|&d| Expr::sum((0..n).map(|l| &frame[d][l] * &trace[l])))
        .collect();
    let inv_rank = Expr::constant(1.0 / inside.len() as f64);
    (0..n)
        .map(|k| {
            let s = Expr::sum(outside.iter().enumerate().flat_map(|(c, &fc)| {
                let gout = &gout;
                let pairing = &pairing;
                let frame = &frame;
                (0..outside.len()).map(move |d| &frame[fc][k] * &gout[c][d] * &pairing[d])
            }));
            &inv_rank * s
        })
        .collect()
}

/// Compiled analysis of one net on one metric.
pub struct NetAnalyzer<'m> {
    metric: &'m MetricField,
    net: OrthogonalNet,
    batch: FieldBatch,
    frame_ids: Vec<FieldId>,
    h_ids: Vec<FieldId>,
    eta_ids: Vec<FieldId>,
    orth_tol: f64,
}

/// Everything the residuals need at one point.
pub struct NetPoint<'a> {
    analyzer: &'a NetAnalyzer<'a>,
    pub geo: PointGeometry,
    pub frame: Vec<FieldJet>,
    pub h: Vec<FieldJet>,
    pub eta: Vec<FieldJet>,
}

impl<'m> NetAnalyzer<'m> {
    /// `orth_tol` bounds the normalized cross-block inner products (and, for
    /// coordinate nets, the normalized off-block metric entries).
    pub fn new(metric: &'m MetricField, net: &OrthogonalNet, orth_tol: f64) -> Result<NetAnalyzer<'m>> {
        if net.dim() != metric.dim() {
            return Err(Error::Dimension(format!(
                "net has {} frame vectors, metric dimension is {}",
                net.dim(),
                metric.dim()
            )));
        }
        let mut batch = FieldBatch::new(metric.dim());
        let frame_ids = net.frame.iter().map(|f| batch.vector(f, true)).collect();
        let mut h_ids = Vec::new();
        let mut eta_ids = Vec::new();
        for (i, block) in net.blocks.iter().enumerate() {
            let comp = net.complement(i);
            let h = mean_curvature_sym(metric, &net.frame, block, &comp);
            let eta = mean_curvature_sym(metric, &net.frame, &comp, block);
            h_ids.push(batch.vector(&h, true));
            eta_ids.push(batch.vector(&eta, true));
        }
        Ok(NetAnalyzer {
            metric,
            net: net.clone(),
            batch,
            frame_ids,
            h_ids,
            eta_ids,
            orth_tol,
        })
    }

    pub fn net(&self) -> &OrthogonalNet {
        &self.net
    }

    pub fn metric(&self) -> &MetricField {
        self.metric
    }

    /// Evaluates and validates the net at `p`.
    pub fn at(&self, p: &[f64]) -> Result<NetPoint<'_>> {
        let geo = self.metric.geometry_at(p)?;
        let vals = self.batch.eval(p)?;
        let frame: Vec<FieldJet> = self.frame_ids.iter().map(|&id| vals.vector(id)).collect();
        let h = self.h_ids.iter().map(|&id| vals.vector(id)).collect();
        let eta = self.eta_ids.iter().map(|&id| vals.vector(id)).collect();
        let np = NetPoint {
            analyzer: self,
            geo,
            frame,
            h,
            eta,
        };
        np.validate()?;
        Ok(np)
    }

    /// g-orthogonal projection of `v` onto the span of the given frame vectors.
    pub fn project(&self, indices: &[usize], v: &DVector<f64>, p: &[f64]) -> Result<DVector<f64>> {
        self.at(p)?.project(indices, v)
    }

    pub fn geometry(&self, i: usize, p: &[f64]) -> Result<DistributionGeometry> {
        self.at(p)?.geometry(i)
    }
}

impl NetPoint<'_> {
    fn fv(&self, a: usize) -> &DVector<f64> {
        &self.frame[a].value
    }

    fn validate(&self) -> Result<()> {
        let n = self.frame.len();
        let norms: Vec<f64> = (0..n).map(|a| self.geo.norm(self.fv(a))).collect();
        let p = &self.geo.point;
        if let Some(a) = norms.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::DegenerateFrame {
                point: p.clone(),
                detail: format!("frame vector {a} vanishes"),
            });
        }
        let cosines = DMatrix::from_fn(n, n, |a, b| {
            self.geo.inner(self.fv(a), self.fv(b)) / (norms[a] * norms[b])
        });
        let min_eig = cosines.clone().symmetric_eigenvalues().min();
        if !(min_eig > 1e-10) {
            return Err(Error::DegenerateFrame {
                point: p.clone(),
                detail: format!("frame Gram matrix is singular (normalized eigenvalue {min_eig:e})"),
            });
        }
        let net = &self.analyzer.net;
        let tol = self.analyzer.orth_tol;
        for (i, block) in net.blocks.iter().enumerate() {
            for j in (i + 1)..net.blocks.len() {
                for &a in block {
                    for &b in &net.blocks[j] {
                        let c = cosines[(a, b)].abs();
                        if c > tol {
                            let what = if net.coordinate {
                                format!("metric is not block-diagonal: normalized g[{a}][{b}] = {c:e}")
                            } else {
                                format!("frame vectors {a} and {b} in blocks {i} and {j} are not orthogonal ({c:e})")
                            };
                            return Err(Error::InvalidNet(format!("{what} at {p:?}")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// g-orthogonal projection onto the span of frame vectors `indices`.
    pub fn project(&self, indices: &[usize], v: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.geo.dim();
        if indices.is_empty() {
            return Ok(DVector::zeros(n));
        }
        let m = indices.len();
        let gram = DMatrix::from_fn(m, m, |a, b| self.geo.inner(self.fv(indices[a]), self.fv(indices[b])));
        let rhs = DVector::from_iterator(m, indices.iter().map(|&a| self.geo.inner(self.fv(a), v)));
        let coef = gram.cholesky().ok_or_else(|| Error::DegenerateFrame {
            point: self.geo.point.clone(),
            detail: format!("sub-frame {indices:?} is singular"),
        })?;
        let c = coef.solve(&rhs);
        let mut out = DVector::zeros(n);
        for (k, &a) in indices.iter().enumerate() {
            out += self.fv(a) * c[k];
        }
        Ok(out)
    }

    fn umbilicity(&self, inside: &[usize], outside: &[usize], normal: &DVector<f64>) -> Result<f64> {
        if inside.len() < 2 {
            return Ok(0.0);
        }
        let mut worst: f64 = 0.0;
        for &a in inside {
            for &b in inside {
                let d = self.geo.cov_deriv(self.fv(a), &self.frame[b]);
                let perp = self.project(outside, &d)?;
                let gab = self.geo.inner(self.fv(a), self.fv(b));
                let r = self.geo.norm(&(perp - normal * gab)) / (self.geo.norm(self.fv(a)) * self.geo.norm(self.fv(b)));
                worst = worst.max(r);
            }
        }
        Ok(worst)
    }

    fn sphericity(&self, inside: &[usize], outside: &[usize], normal: &FieldJet) -> f64 {
        let mut worst: f64 = 0.0;
        for &a in inside {
            let d = self.geo.cov_deriv(self.fv(a), normal);
            for &c in outside {
                let r = self.geo.inner(&d, self.fv(c)).abs() / (self.geo.norm(self.fv(a)) * self.geo.norm(self.fv(c)));
                worst = worst.max(r);
            }
        }
        worst
    }

    fn integrability(&self, inside: &[usize], outside: &[usize]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (k, &a) in inside.iter().enumerate() {
            for &b in &inside[k + 1..] {
                let br = bracket(&self.frame[a], &self.frame[b]);
                let perp = self.project(outside, &br)?;
                let r = self.geo.norm(&perp) / (self.geo.norm(self.fv(a)) * self.geo.norm(self.fv(b)));
                worst = worst.max(r);
            }
        }
        Ok(worst)
    }

    pub fn geometry(&self, i: usize) -> Result<DistributionGeometry> {
        let net = &self.analyzer.net;
        let inside = &net.blocks[i];
        let outside = net.complement(i);
        let h = &self.h[i];
        let eta = &self.eta[i];
        let umbilicity = self.umbilicity(inside, &outside, &h.value)?;
        let umbilicity_perp = self.umbilicity(&outside, inside, &eta.value)?;
        Ok(DistributionGeometry {
            block: i,
            h: h.value.iter().copied().collect(),
            eta: eta.value.iter().copied().collect(),
            umbilicity,
            umbilicity_perp,
            sphericity: self.sphericity(inside, &outside, h),
            sphericity_perp: self.sphericity(&outside, inside, eta),
            geodesy: umbilicity + self.geo.norm(&h.value),
            geodesy_perp: umbilicity_perp + self.geo.norm(&eta.value),
            integrability: self.integrability(inside, &outside)?,
            integrability_perp: self.integrability(&outside, inside)?,
        })
    }

    /// Symmetry defect `|⟨∇_{X⊥} η_i, X_i⟩ − ⟨∇_{X_i} H_i, X⊥⟩|` over
    /// normalized frame pairs, or `None` when block `i` or its complement is
    /// not umbilical within `umb_tol`.
    pub fn cwp_residual(&self, i: usize, umb_tol: f64) -> Result<Option<f64>> {
        let g = self.geometry(i)?;
        Ok(self.cwp_residual_given(i, &g, umb_tol))
    }

    fn cwp_residual_given(&self, i: usize, g: &DistributionGeometry, umb_tol: f64) -> Option<f64> {
        if g.umbilicity > umb_tol || g.umbilicity_perp > umb_tol {
            return None;
        }
        let net = &self.analyzer.net;
        let inside = &net.blocks[i];
        let outside = net.complement(i);
        let mut worst: f64 = 0.0;
        for &a in inside {
            let dh = self.geo.cov_deriv(self.fv(a), &self.h[i]);
            for &c in &outside {
                let de = self.geo.cov_deriv(self.fv(c), &self.eta[i]);
                let lhs = self.geo.inner(&de, self.fv(a));
                let rhs = self.geo.inner(&dh, self.fv(c));
                let r = (lhs - rhs).abs() / (self.geo.norm(self.fv(a)) * self.geo.norm(self.fv(c)));
                worst = worst.max(r);
            }
        }
        Some(worst)
    }

    /// `‖H_0 − Σ_{i≥1} η_i‖_g`.
    pub fn h0_sum_residual(&self) -> f64 {
        let mut d = self.h[0].value.clone();
        for eta in &self.eta[1..] {
            d -= &eta.value;
        }
        self.geo.norm(&d)
    }
}

/// Per-point record of a classification run.
#[derive(Clone, Debug, Serialize)]
pub struct NetPointRecord {
    pub point: Vec<f64>,
    pub blocks: Vec<DistributionGeometry>,
    /// Symmetry defect per block; `None` where its umbilicity precondition fails.
    pub cwp: Vec<Option<f64>>,
    pub h0_sum: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NetFlags {
    #[serde(rename = "TP")]
    pub tp: Flag,
    #[serde(rename = "WP")]
    pub wp: Flag,
    #[serde(rename = "QW")]
    pub qw: Flag,
    #[serde(rename = "CQW")]
    pub cqw: Flag,
    #[serde(rename = "CQW0")]
    pub cqw0: Flag,
    #[serde(rename = "CWP")]
    pub cwp: Flag,
    #[serde(rename = "CP")]
    pub cp: Flag,
}

impl NetFlags {
    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &Flag)> {
        [
            ("TP", &self.tp),
            ("WP", &self.wp),
            ("QW", &self.qw),
            ("CQW", &self.cqw),
            ("CQW0", &self.cqw0),
            ("CWP", &self.cwp),
            ("CP", &self.cp),
        ]
        .into_iter()
    }

    /// Names of the flags that hold.
    pub fn holding(&self) -> Vec<&'static str> {
        self.iter().filter(|(_, f)| f.holds()).map(|(n, _)| n).collect()
    }
}

/// Maxima over all samples of one block's residuals.
#[derive(Clone, Debug, Default, Serialize)]
pub struct BlockMaxima {
    pub umbilicity: f64,
    pub umbilicity_perp: f64,
    pub sphericity: f64,
    pub sphericity_perp: f64,
    pub geodesy: f64,
    pub geodesy_perp: f64,
    pub integrability: f64,
    pub integrability_perp: f64,
    /// `None` if the symmetry defect was not applicable at some sample.
    pub cwp: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NetReport {
    pub blocks: Vec<Vec<usize>>,
    pub tolerance: f64,
    pub samples: usize,
    pub flags: NetFlags,
    pub h0_sum_residual: f64,
    /// Symmetry defect for block 0, evaluated when CP holds.
    pub cwp0: Option<Flag>,
    pub maxima: Vec<BlockMaxima>,
    pub points: Vec<NetPointRecord>,
}

impl NetReport {
    /// All verdicts that count toward a pass/fail outcome.
    pub fn verdicts(&self) -> Vec<(String, Flag)> {
        let mut v: Vec<(String, Flag)> = self.flags.iter().map(|(n, f)| (n.to_string(), *f)).collect();
        if let Some(f) = self.cwp0 {
            v.push(("CWP_block0".into(), f));
        }
        v
    }
}

/// Evaluates every distribution residual of `net` on the sample plan and
/// derives the classification flags.
pub fn classify_net(metric: &MetricField, net: &OrthogonalNet, plan: &SamplePlan, tol: f64) -> Result<NetReport> {
    let points = plan.points(metric.chart());
    if points.is_empty() {
        return Err(Error::Precondition("sampling produced no interior points".into()));
    }
    let analyzer = NetAnalyzer::new(metric, net, tol.max(1e-12))?;
    let k = net.blocks.len();
    let mut records = Vec::with_capacity(points.len());
    for p in &points {
        let np = analyzer.at(p)?;
        let blocks: Vec<DistributionGeometry> = (0..k).map(|i| np.geometry(i)).collect::<Result<_>>()?;
        let cwp = (0..k).map(|i| np.cwp_residual_given(i, &blocks[i], tol)).collect();
        records.push(NetPointRecord {
            point: p.clone(),
            blocks,
            cwp,
            h0_sum: np.h0_sum_residual(),
        });
    }
    Ok(summarize(net, tol, records))
}

fn summarize(net: &OrthogonalNet, tol: f64, records: Vec<NetPointRecord>) -> NetReport {
    let k = net.blocks.len();
    let maxima: Vec<BlockMaxima> = (0..k)
        .map(|i| {
            let m = |f: fn(&DistributionGeometry) -> f64| max_of(records.iter().map(|r| f(&r.blocks[i])));
            let cwp = records
                .iter()
                .map(|r| r.cwp[i])
                .try_fold(0.0f64, |acc, c| c.map(|c| acc.max(c)));
            BlockMaxima {
                umbilicity: m(|g| g.umbilicity),
                umbilicity_perp: m(|g| g.umbilicity_perp),
                sphericity: m(|g| g.sphericity),
                sphericity_perp: m(|g| g.sphericity_perp),
                geodesy: m(|g| g.geodesy),
                geodesy_perp: m(|g| g.geodesy_perp),
                integrability: m(|g| g.integrability),
                integrability_perp: m(|g| g.integrability_perp),
                cwp,
            }
        })
        .collect();
    let over = |f: &dyn Fn(&BlockMaxima) -> f64, from: usize| max_of(maxima[from..].iter().map(f));
    // Where the symmetry defect is not applicable the umbilicity terms of the
    // same flag already exceed the tolerance, so they decide the verdict.
    let cwp_terms = |from: usize| {
        max_of(
            records
                .iter()
                .flat_map(|r| r.cwp[from..].iter().map(|c| c.unwrap_or(0.0))),
        )
    };
    let umb = over(&|m| m.umbilicity, 0);
    let umb1 = over(&|m| m.umbilicity, 1);
    let umb_perp1 = over(&|m| m.umbilicity_perp, 1);
    let tp = Flag::new(umb.max(over(&|m| m.integrability_perp, 0)), tol);
    let wp = Flag::new(
        umb1.max(over(&|m| m.sphericity, 1)).max(over(&|m| m.geodesy_perp, 1)),
        tol,
    );
    let qw = Flag::new(umb1.max(over(&|m| m.geodesy_perp, 1)), tol);
    let cqw_r = umb1.max(umb_perp1);
    let cqw = Flag::new(cqw_r, tol);
    let cqw0 = Flag::new(cqw_r.max(maxima[0].umbilicity_perp), tol);
    let cwp = Flag::new(cqw_r.max(cwp_terms(1)), tol);
    let cp = Flag::new(cwp.max_residual.max(maxima[0].umbilicity_perp), tol);
    let cwp0 = if cp.holds() {
        let f = match maxima[0].cwp {
            Some(r) => Flag::new(r, tol),
            None => Flag {
                verdict: Verdict::Inconclusive,
                max_residual: f64::NAN,
                tolerance: tol,
            },
        };
        if f.fails() {
            log::warn!("CP holds but the block-0 symmetry defect is {:e}", f.max_residual);
        }
        Some(f)
    } else {
        None
    };
    NetReport {
        blocks: net.blocks.clone(),
        tolerance: tol,
        samples: records.len(),
        flags: NetFlags {
            tp,
            wp,
            qw,
            cqw,
            cqw0,
            cwp,
            cp,
        },
        h0_sum_residual: max_of(records.iter().map(|r| r.h0_sum)),
        cwp0,
        maxima,
        points: records,
    }
}

/// Symmetry defect of block `i` at `p`; `None` when not applicable.
pub fn cwp_residual(metric: &MetricField, net: &OrthogonalNet, i: usize, p: &[f64], tol: f64) -> Result<Option<f64>> {
    NetAnalyzer::new(metric, net, tol.max(1e-12))?
        .at(p)?
        .cwp_residual(i, tol)
}

/// Distribution geometry of block `i` at `p`.
pub fn distribution_geometry(
    metric: &MetricField,
    net: &OrthogonalNet,
    i: usize,
    p: &[f64],
) -> Result<DistributionGeometry> {
    NetAnalyzer::new(metric, net, 1e-8)?.geometry(i, p)
}

/// g-orthogonal projection of `v` onto the frame vectors `indices` at `p`.
pub fn project(
    metric: &MetricField,
    net: &OrthogonalNet,
    indices: &[usize],
    v: &DVector<f64>,
    p: &[f64],
) -> Result<DVector<f64>> {
    NetAnalyzer::new(metric, net, 1e-8)?.project(indices, v, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Chart;
    use crate::fixtures;
    use crate::scalar::parse_with;

    fn plan() -> SamplePlan {
        SamplePlan::default()
    }

    #[test]
    fn polar_circles_curve_inward() {
        let f = fixtures::polar();
        let circles = distribution_geometry(&f.metric, &f.net, 1, &[2.0, 0.5]).unwrap();
        assert!(
            (circles.h[0] + 0.5).abs() < 1e-14 && circles.h[1].abs() < 1e-14,
            "{:?}",
            circles.h
        );
        let rays = distribution_geometry(&f.metric, &f.net, 0, &[2.0, 0.5]).unwrap();
        assert!(rays.h.iter().all(|x| x.abs() < 1e-14));
        assert!(rays.umbilicity < 1e-14 && circles.sphericity < 1e-14);
    }

    #[test]
    fn polar_is_warped_and_conformally_flat() {
        let f = fixtures::polar();
        let r = classify_net(&f.metric, &f.net, &plan(), 1e-8).unwrap();
        assert_eq!(r.flags.holding(), vec!["TP", "WP", "QW", "CQW", "CQW0", "CWP", "CP"]);
    }

    #[test]
    fn exponential_warp_over_a_plane() {
        let names: Vec<String> = (0..3).map(|i| format!("x{i}")).collect();
        let c = Chart::with_domain(vec![(-1.0, 1.0); 3]).unwrap();
        let w = parse_with("exp(2*x0)", &names, &[]).unwrap();
        let g = MetricField::diagonal(c, vec![Expr::one(), Expr::one(), w]).unwrap();
        let net = OrthogonalNet::coordinate(3, vec![vec![0, 1], vec![2]]).unwrap();
        let r = classify_net(&g, &net, &plan(), 1e-8).unwrap();
        assert!(r.flags.tp.holds() && r.flags.wp.holds() && r.flags.cwp.holds());
    }

    #[test]
    fn conformally_flat_is_cp() {
        let f = fixtures::conformal_flat();
        let r = classify_net(&f.metric, &f.net, &plan(), 1e-8).unwrap();
        assert!(r.flags.cwp.holds() && r.flags.cp.holds());
        // Line fields in the plane are always umbilical with integrable complements.
        assert!(r.flags.tp.holds());
    }

    #[test]
    fn twisted_control_is_not_cwp() {
        let f = fixtures::twisted_control();
        let r = classify_net(&f.metric, &f.net, &plan(), 1e-8).unwrap();
        assert!(r.flags.tp.holds());
        assert!(
            r.flags.cwp.fails() && r.flags.cwp.max_residual > 1e-3,
            "{:?}",
            r.flags.cwp
        );
        let at = cwp_residual(&f.metric, &f.net, 1, &[0.5, 0.5], 1e-8).unwrap().unwrap();
        assert!(at > 0.1);
    }

    #[test]
    fn three_block_mean_curvature_sum() {
        let f = fixtures::cqw3();
        let r = classify_net(&f.metric, &f.net, &plan(), 1e-8).unwrap();
        assert!(r.flags.cqw.holds());
        assert!(r.h0_sum_residual <= 1e-9, "{}", r.h0_sum_residual);
    }

    #[test]
    fn skew_coordinate_net_is_rejected() {
        let c = Chart::with_domain(vec![(-1.0, 1.0); 2]).unwrap();
        let half = Expr::constant(0.5);
        let g = MetricField::new(c, vec![vec![Expr::one(), half.clone()], vec![half, Expr::one()]]).unwrap();
        let net = OrthogonalNet::coordinate(2, vec![vec![0], vec![1]]).unwrap();
        assert!(classify_net(&g, &net, &plan(), 1e-8).is_err());
    }
}

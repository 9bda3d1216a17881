//! Recovers the conformal factor and warped-product data of a metric whose
//! coordinate-block net is CWP (or CP).
//!
//! On such a net the non-base components of `∇ log φ` are `−η_i`, the mean
//! curvature normals of the complements `E_i⊥`. Integrating that 1-form
//! along axis-parallel paths that leave the base block fixed gives `log φ`,
//! normalized to vanish on the slice through the base point. The warping
//! functions then follow from volume ratios of the fiber blocks along that
//! slice.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::calculus::MetricField;
use crate::error::{Error, Result};
use crate::nets::{classify_net, mean_curvature_sym, NetReport, OrthogonalNet};
use crate::sampling::{tensor_grid, SamplePlan};
use crate::scalar::{Expr, Tape};

use super::{Kind, ProductSpec};

#[derive(Clone, Debug)]
pub struct FactorizeOptions {
    /// Nodes per axis of the reconstruction grid.
    pub grid: usize,
    pub margin: f64,
    /// Defaults to the center of the chart box.
    pub base: Option<Vec<f64>>,
    pub classify_tol: f64,
    pub classify_plan: SamplePlan,
    pub path_tol: f64,
    pub quad_tol: f64,
}

impl Default for FactorizeOptions {
    fn default() -> Self {
        FactorizeOptions {
            grid: 9,
            margin: 0.1,
            base: None,
            classify_tol: 1e-8,
            classify_plan: SamplePlan::default(),
            path_tol: 1e-7,
            quad_tol: 1e-10,
        }
    }
}

/// Conformal-to-Riemannian-product form `φ*²(h*_0 + Σ h*_i)`, available
/// when the net is CP: `φ* = φ ψ_1`, `h*_0 = ψ_1⁻² h̃_0`, `h*_i = a_i² h̃_i`.
#[derive(Clone, Debug, Serialize)]
pub struct ProductForm {
    /// `a_i` with `ψ_i = a_i ψ_1`; the first entry is 1.
    pub scale: Vec<f64>,
    /// Max deviation of `log ψ_i − log ψ_1 − log a_i` over the base grid.
    pub fit_residual: f64,
    pub phi_star: Vec<f64>,
    pub reconstruction_error: f64,
}

/// Closed-form data carried over from a spec built by this crate.
#[derive(Clone, Debug, Serialize)]
pub struct ClosedForm {
    pub conformal_factor: String,
    pub warping: Vec<String>,
    /// Max `|log φ_grid − log φ_closed|` after matching the base-slice gauge.
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Factorization {
    pub blocks: Vec<Vec<usize>>,
    pub base: Vec<f64>,
    /// Grid nodes per axis; grid values are in lexicographic order.
    pub axes: Vec<Vec<f64>>,
    /// Conformal factor, equal to 1 on the slice through `base` that varies
    /// only the block-0 coordinates.
    pub phi: Vec<f64>,
    /// Base-block grid nodes (lexicographic) at which `rho` is sampled.
    pub base_nodes: Vec<Vec<f64>>,
    /// `rho[i − 1][m]` is `ρ̃_i` at `base_nodes[m]`, normalized to 1 at `base`.
    pub rho: Vec<Vec<f64>>,
    pub path_consistency: f64,
    pub reconstruction_error: f64,
    pub product_form: Option<ProductForm>,
    pub closed_form: Option<ClosedForm>,
    pub classification: NetReport,
}

struct Potential<'a> {
    metric: &'a MetricField,
    tape: Tape,
    /// Output slot of `∂_a log φ` for each coordinate, or `None` on block 0.
    slot: Vec<Option<usize>>,
    axes_asc: Vec<usize>,
    quad_tol: f64,
}

impl Potential<'_> {
    fn integrand(&self, axis: usize, q: &[f64]) -> Result<f64> {
        let out = self.tape.eval(q)?;
        Ok(out[self.slot[axis].expect("non-base axis")])
    }

    /// Romberg integration of `∂_axis log φ` from `from[axis]` to `to`,
    /// other coordinates held at `from`.
    fn segment(&self, from: &[f64], axis: usize, to: f64) -> Result<f64> {
        let (a, b) = (from[axis], to);
        if a == b {
            return Ok(0.0);
        }
        let mut q = from.to_vec();
        let mut f = |x: f64| -> Result<f64> {
            q[axis] = x;
            self.integrand(axis, &q)
        };
        const MIN_LEVEL: usize = 3;
        const MAX_LEVEL: usize = 18;
        let h0 = b - a;
        let mut prev: Vec<f64> = vec![0.5 * h0 * (f(a)? + f(b)?)];
        let mut last_change = f64::INFINITY;
        for level in 1..=MAX_LEVEL {
            let n_new = 1usize << (level - 1);
            let h = h0 / (1usize << level) as f64;
            let mut sum = 0.0;
            for j in 0..n_new {
                sum += f(a + (2 * j + 1) as f64 * h)?;
            }
            let mut row = vec![0.5 * prev[0] + h * sum];
            let mut factor = 1.0;
            for m in 1..=level {
                factor *= 4.0;
                let r = row[m - 1] + (row[m - 1] - prev[m - 1]) / (factor - 1.0);
                row.push(r);
            }
            last_change = (row[level] - prev[level - 1]).abs();
            if level >= MIN_LEVEL && last_change < self.quad_tol * row[level].abs().max(1.0) {
                return Ok(row[level]);
            }
            prev = row;
        }
        Err(Error::Quadrature {
            a,
            b,
            change: last_change,
        })
    }

    /// `log φ(x)` along the path that moves the non-base axes in `order`.
    fn along(&self, base: &[f64], x: &[f64], order: &[usize]) -> Result<f64> {
        let mut cur: Vec<f64> = base.to_vec();
        for (k, s) in self.slot.iter().enumerate() {
            if s.is_none() {
                cur[k] = x[k];
            }
        }
        let mut total = 0.0;
        for &axis in order {
            total += self.segment(&cur, axis, x[axis])?;
            cur[axis] = x[axis];
        }
        Ok(total)
    }

    /// Ascending- and descending-order estimates of `log φ(x)`.
    fn log_phi(&self, base: &[f64], x: &[f64]) -> Result<(f64, f64)> {
        let asc = self.along(base, x, &self.axes_asc)?;
        let desc_order: Vec<usize> = self.axes_asc.iter().rev().copied().collect();
        let desc = if desc_order.len() > 1 {
            self.along(base, x, &desc_order)?
        } else {
            asc
        };
        Ok((asc, desc))
    }
}

fn block_matrix(g: &DMatrix<f64>, block: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(block.len(), block.len(), |a, b| g[(block[a], block[b])])
}

fn relative_error(rebuilt: &DMatrix<f64>, actual: &DMatrix<f64>) -> f64 {
    (rebuilt - actual).amax() / actual.amax()
}

/// Recovers `φ`, the warping functions and the factor metrics of a CWP
/// coordinate-block net, and measures how well they rebuild `g`.
pub fn factorize_cwp(g: &MetricField, net: &OrthogonalNet, opts: &FactorizeOptions) -> Result<Factorization> {
    if !net.is_coordinate() {
        return Err(Error::Precondition("factorization needs a coordinate-block net".into()));
    }
    let report = classify_net(g, net, &opts.classify_plan, opts.classify_tol)?;
    if !report.flags.cwp.holds() {
        return Err(Error::Precondition(format!(
            "net is not CWP (verdict {}, residual {:e})",
            report.flags.cwp.verdict.symbol(),
            report.flags.cwp.max_residual
        )));
    }
    let chart = g.chart();
    let n = chart.dim();
    let blocks = net.blocks().to_vec();
    let base = match &opts.base {
        Some(b) => {
            chart.check_point(b)?;
            b.clone()
        }
        None => chart.center(),
    };

    // Integrand ∂_a log φ = −⟨η_i, ∂_a⟩ for a in block i ≥ 1.
    let mut exprs = Vec::new();
    let mut slot = vec![None; n];
    for (i, block) in blocks.iter().enumerate().skip(1) {
        let comp = net.complement(i);
        let eta = mean_curvature_sym(g, net.frame(), &comp, block);
        for &a in block {
            let low = Expr::sum((0..n).map(|k| g.entry(a, k) * &eta[k]));
            slot[a] = Some(exprs.len());
            exprs.push(-low);
        }
    }
    let axes_asc: Vec<usize> = (0..n).filter(|&a| slot[a].is_some()).collect();
    let pot = Potential {
        metric: g,
        tape: Tape::compile(&exprs),
        slot,
        axes_asc,
        quad_tol: opts.quad_tol,
    };

    let plan = SamplePlan::grid_only(opts.grid, opts.margin);
    let axes = plan.axes(chart);
    let grid = tensor_grid(&axes);
    let mut log_phi = Vec::with_capacity(grid.len());
    let mut consistency: f64 = 0.0;
    for x in &grid {
        let (asc, desc) = pot.log_phi(&base, x)?;
        consistency = consistency.max((asc - desc).abs());
        log_phi.push(asc);
    }
    if consistency > opts.path_tol {
        return Err(Error::PathInconsistent {
            residual: consistency,
            tolerance: opts.path_tol,
        });
    }
    let phi: Vec<f64> = log_phi.iter().map(|l| l.exp()).collect();

    // Warping functions from fiber volume ratios along the base slice.
    let b0 = &blocks[0];
    let base_axes: Vec<Vec<f64>> = b0.iter().map(|&a| axes[a].clone()).collect();
    let base_nodes = tensor_grid(&base_axes);
    let with_base = |x0: &[f64]| {
        let mut q = base.clone();
        for (k, &a) in b0.iter().enumerate() {
            q[a] = x0[k];
        }
        q
    };
    let (g_base, _) = g.metric_at(&base)?;
    let det_base: Vec<f64> = blocks.iter().map(|b| block_matrix(&g_base, b).determinant()).collect();
    let warping = |x0: &[f64]| -> Result<Vec<f64>> {
        let (gm, _) = pot.metric.metric_at(&with_base(x0))?;
        Ok(blocks
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, b)| (block_matrix(&gm, b).determinant() / det_base[i]).powf(0.5 / b.len() as f64))
            .collect())
    };
    let mut rho = vec![Vec::with_capacity(base_nodes.len()); blocks.len() - 1];
    for x0 in &base_nodes {
        for (i, r) in warping(x0)?.into_iter().enumerate() {
            rho[i].push(r);
        }
    }

    // Rebuild g = φ²(h̃_0 ⊕ Σ ρ̃_i² h̃_i) on the grid.
    let fiber_metric = |i: usize, x: &[f64]| -> Result<DMatrix<f64>> {
        let mut q = base.clone();
        for &a in &blocks[i] {
            q[a] = x[a];
        }
        let (gm, _) = g.metric_at(&q)?;
        let (lp, _) = pot.log_phi(&base, &q)?;
        Ok(block_matrix(&gm, &blocks[i]) * (-2.0 * lp).exp())
    };
    let mut reconstruction: f64 = 0.0;
    let mut pieces = Vec::with_capacity(grid.len());
    for (x, &ph) in grid.iter().zip(&phi) {
        let x0: Vec<f64> = b0.iter().map(|&a| x[a]).collect();
        let (g0, _) = g.metric_at(&with_base(&x0))?;
        let h0 = block_matrix(&g0, b0);
        let w = warping(&x0)?;
        let fibers: Vec<DMatrix<f64>> = (1..blocks.len()).map(|i| fiber_metric(i, x)).collect::<Result<_>>()?;
        let mut rebuilt = DMatrix::zeros(n, n);
        let mut place = |m: &DMatrix<f64>, block: &[usize], s: f64| {
            for (a, &ia) in block.iter().enumerate() {
                for (b, &ib) in block.iter().enumerate() {
                    rebuilt[(ia, ib)] = s * m[(a, b)];
                }
            }
        };
        place(&h0, b0, ph * ph);
        for (i, f) in fibers.iter().enumerate() {
            place(f, &blocks[i + 1], ph * ph * w[i] * w[i]);
        }
        let (actual, _) = g.metric_at(x)?;
        reconstruction = reconstruction.max(relative_error(&rebuilt, &actual));
        pieces.push((x0, h0, w, fibers, actual));
    }

    let product_form = if report.flags.cp.holds() {
        let k = blocks.len() - 1;
        let mut scale = vec![1.0];
        let mut fit: f64 = 0.0;
        for i in 1..k {
            let diffs: Vec<f64> = rho[i].iter().zip(&rho[0]).map(|(a, b)| a.ln() - b.ln()).collect();
            let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
            fit = fit.max(diffs.iter().map(|d| (d - mean).abs()).fold(0.0, f64::max));
            scale.push(mean.exp());
        }
        let mut phi_star = Vec::with_capacity(grid.len());
        let mut err: f64 = 0.0;
        for ((x0, h0, w, fibers, actual), &ph) in pieces.iter().zip(&phi) {
            let _ = x0;
            let psi1 = w[0];
            let ps = ph * psi1;
            phi_star.push(ps);
            let mut rebuilt = DMatrix::zeros(n, n);
            let mut place = |m: &DMatrix<f64>, block: &[usize], s: f64| {
                for (a, &ia) in block.iter().enumerate() {
                    for (b, &ib) in block.iter().enumerate() {
                        rebuilt[(ia, ib)] = s * m[(a, b)];
                    }
                }
            };
            place(h0, b0, ps * ps / (psi1 * psi1));
            for (i, f) in fibers.iter().enumerate() {
                place(f, &blocks[i + 1], ps * ps * scale[i] * scale[i]);
            }
            err = err.max(relative_error(&rebuilt, actual));
        }
        Some(ProductForm {
            scale,
            fit_residual: fit,
            phi_star,
            reconstruction_error: err,
        })
    } else {
        None
    };

    let closed_form = match g.provenance().map(|p| p.as_ref()) {
        Some(spec)
            if matches!(spec.base().kind(), Kind::Product | Kind::Warped)
                && spec.base().blocks() == blocks.as_slice() =>
        {
            Some(closed_form(spec, &base, &grid, &log_phi, b0)?)
        }
        _ => None,
    };

    Ok(Factorization {
        blocks,
        base,
        axes,
        phi,
        base_nodes,
        rho,
        path_consistency: consistency,
        reconstruction_error: reconstruction,
        product_form,
        closed_form,
        classification: report,
    })
}

fn closed_form(
    spec: &ProductSpec,
    base: &[f64],
    grid: &[Vec<f64>],
    log_phi: &[f64],
    b0: &[usize],
) -> Result<ClosedForm> {
    let phi = spec.conformal_factor();
    let names = spec.chart().names();
    let mut residual: f64 = 0.0;
    for (x, lp) in grid.iter().zip(log_phi) {
        let mut slice = base.to_vec();
        for &a in b0 {
            slice[a] = x[a];
        }
        let expected = phi.eval(x)?.ln() - phi.eval(&slice)?.ln();
        residual = residual.max((expected - lp).abs());
    }
    Ok(ClosedForm {
        conformal_factor: phi.display(names).to_string(),
        warping: spec.base().twists()[1..]
            .iter()
            .map(|t| t.display(names).to_string())
            .collect(),
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Chart;
    use crate::product::{build_metric, conformal_scale, TwistedSpec};
    use crate::scalar::parse_with;

    fn polar_spec(domain: [(f64, f64); 2]) -> ProductSpec {
        let c = Chart::with_domain(domain.to_vec())
            .unwrap()
            .with_blocks(vec![vec![0], vec![1]], false)
            .unwrap();
        let one = vec![vec![Expr::one()]];
        ProductSpec::Base(
            TwistedSpec::new(Kind::Warped, c, vec![one.clone(), one], vec![Expr::one(), Expr::var(0)]).unwrap(),
        )
    }

    fn net2() -> OrthogonalNet {
        OrthogonalNet::coordinate(2, vec![vec![0], vec![1]]).unwrap()
    }

    #[test]
    fn polar_recovers_trivial_factor() {
        let g = build_metric(&polar_spec([(0.5, 1.5), (-1.0, 1.0)])).unwrap();
        let opts = FactorizeOptions {
            base: Some(vec![1.0, 0.0]),
            ..FactorizeOptions::default()
        };
        let f = factorize_cwp(&g, &net2(), &opts).unwrap();
        assert!(f.phi.iter().all(|p| (p - 1.0).abs() < 1e-12));
        for (x0, r) in f.base_nodes.iter().zip(&f.rho[0]) {
            assert!((r - x0[0]).abs() < 1e-12);
        }
        assert!(f.reconstruction_error <= 1e-8);
        assert!(f.closed_form.unwrap().residual < 1e-12);
    }

    #[test]
    fn conformally_flat_exponential() {
        let c = Chart::with_domain(vec![(-0.5, 0.5); 2]).unwrap();
        let g = MetricField::euclidean(c);
        let names = ["x0".to_string(), "x1".to_string()];
        let phi = parse_with("exp(x0 + x1)", &names, &[]).unwrap();
        let g = conformal_scale(&g, &phi, &SamplePlan::default()).unwrap();
        let opts = FactorizeOptions {
            base: Some(vec![0.0, 0.0]),
            ..FactorizeOptions::default()
        };
        let f = factorize_cwp(&g, &net2(), &opts).unwrap();
        assert!(f.reconstruction_error <= 1e-6);
        let pf = f.product_form.expect("CP");
        assert!(pf.reconstruction_error <= 1e-6);
        let grid = tensor_grid(&f.axes);
        // φ* equals e^{x0+x1} up to a constant.
        let c0 = pf.phi_star[0] / (grid[0][0] + grid[0][1]).exp();
        for (x, ps) in grid.iter().zip(&pf.phi_star) {
            assert!((ps / (x[0] + x[1]).exp() - c0).abs() < 1e-8);
        }
    }

    #[test]
    fn twisted_input_is_rejected() {
        let c = Chart::with_domain(vec![(0.0, 1.0); 2])
            .unwrap()
            .with_blocks(vec![vec![0], vec![1]], false)
            .unwrap();
        let one = vec![vec![Expr::one()]];
        let names = ["x0".to_string(), "x1".to_string()];
        let rho = parse_with("1 + x0^2*x1", &names, &[]).unwrap();
        let spec = TwistedSpec::new(Kind::Twisted, c, vec![one.clone(), one], vec![Expr::one(), rho]).unwrap();
        let g = build_metric(&ProductSpec::Base(spec)).unwrap();
        assert!(matches!(
            factorize_cwp(&g, &net2(), &FactorizeOptions::default()),
            Err(Error::Precondition(_))
        ));
    }
}

//! Reference metrics, nets and tensors with known geometry, shared by the
//! self-test battery, the acceptance suite and the documentation.

use crate::calculus::MetricField;
use crate::chart::Chart;
use crate::codazzi::{build_codazzi_candidate, CandidateKind, SymTensorField};
use crate::linalg::SymMat;
use crate::nets::OrthogonalNet;
use crate::product::{build_metric, Kind, ProductSpec, TwistedSpec};
use crate::scalar::{parse_with, Expr, UserFn};

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

fn expr(text: &str, n: usize) -> Expr {
    parse_with(text, &names(n), &[]).expect("fixture expression parses")
}

fn lines(k: usize) -> Vec<SymMat> {
    vec![vec![vec![Expr::one()]]; k]
}

fn singletons(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|i| vec![i]).collect()
}

fn product_chart(domain: Vec<(f64, f64)>, blocks: Vec<Vec<usize>>) -> Chart {
    Chart::with_domain(domain)
        .and_then(|c| c.with_blocks(blocks, false))
        .expect("fixture chart is valid")
}

/// A named metric with the coordinate-block net it is studied with.
pub struct Fixture {
    pub name: &'static str,
    pub metric: MetricField,
    pub net: OrthogonalNet,
}

impl Fixture {
    fn new(name: &'static str, metric: MetricField, blocks: Vec<Vec<usize>>) -> Fixture {
        let net = OrthogonalNet::coordinate(metric.dim(), blocks).expect("fixture net is valid");
        Fixture { name, metric, net }
    }
}

pub fn euclidean() -> Fixture {
    let c = product_chart(vec![(-1.0, 1.0); 2], singletons(2));
    let spec = TwistedSpec::new(Kind::Product, c, lines(2), vec![Expr::one(); 2]).expect("product spec");
    Fixture::new(
        "euclidean",
        build_metric(&ProductSpec::Base(spec)).expect("metric"),
        singletons(2),
    )
}

/// `dr² + r² dθ²` on `[0.5, 3] × [−3, 3]`, built as a warped product.
pub fn polar_spec() -> ProductSpec {
    let c = product_chart(vec![(0.5, 3.0), (-3.0, 3.0)], singletons(2));
    ProductSpec::Base(
        TwistedSpec::new(Kind::Warped, c, lines(2), vec![Expr::one(), Expr::var(0)]).expect("warped spec"),
    )
}

pub fn polar() -> Fixture {
    Fixture::new("polar", build_metric(&polar_spec()).expect("metric"), singletons(2))
}

/// Torus of revolution with radii 2 and 1: `du² + (2 + cos u)² dv²`.
pub fn torus() -> Fixture {
    let c = product_chart(vec![(0.1, 3.0), (0.0, 6.0)], singletons(2));
    let spec =
        TwistedSpec::new(Kind::Warped, c, lines(2), vec![Expr::one(), expr("2 + cos(x0)", 2)]).expect("warped spec");
    Fixture::new(
        "torus",
        build_metric(&ProductSpec::Base(spec)).expect("metric"),
        singletons(2),
    )
}

/// `ρ² (dx0² + dx1²)` with `ρ = 1 + x0² x1` on the unit square.
pub fn conformal_flat() -> Fixture {
    let c = product_chart(vec![(0.0, 1.0); 2], singletons(2));
    let flat = TwistedSpec::new(Kind::Product, c, lines(2), vec![Expr::one(); 2]).expect("product spec");
    let spec = ProductSpec::ConformalOf {
        inner: Box::new(ProductSpec::Base(flat)),
        phi: expr("1 + x0^2*x1", 2),
    };
    Fixture::new("conformal-flat", build_metric(&spec).expect("metric"), singletons(2))
}

/// `dx0² + ρ² dx1²` with `ρ = 1 + x0² x1`: twisted but not conformal to a
/// warped product.
pub fn twisted_control() -> Fixture {
    let c = product_chart(vec![(0.0, 1.0); 2], singletons(2));
    let spec =
        TwistedSpec::new(Kind::Twisted, c, lines(2), vec![Expr::one(), expr("1 + x0^2*x1", 2)]).expect("twisted spec");
    Fixture::new(
        "twisted-control",
        build_metric(&ProductSpec::Base(spec)).expect("metric"),
        singletons(2),
    )
}

/// Conformal image of a three-factor quasi-warped product on `[0.2, 1.2]³`.
pub fn cqw3() -> Fixture {
    let c = product_chart(vec![(0.2, 1.2); 3], singletons(3));
    let qw = TwistedSpec::new(
        Kind::QuasiWarped,
        c,
        lines(3),
        vec![
            Expr::one(),
            expr("1 + 0.5*x0*x1", 3),
            expr("exp(0.7*x0*x2 - 0.3*x0)", 3),
        ],
    )
    .expect("quasi-warped spec");
    let spec = ProductSpec::ConformalOf {
        inner: Box::new(ProductSpec::Base(qw)),
        phi: expr("exp(0.3*x0 + 0.2*x1 - 0.1*x2)", 3),
    };
    Fixture::new("cqw3", build_metric(&spec).expect("metric"), singletons(3))
}

/// Metrics checked against the Levi-Civita axioms and conformal invariance.
pub fn metric_fixtures() -> Vec<Fixture> {
    vec![euclidean(), polar(), torus(), conformal_flat(), twisted_control()]
}

/// A metric with a Codazzi tensor on it.
pub struct TensorFixture {
    pub name: &'static str,
    pub metric: MetricField,
    pub tensor: SymTensorField,
    pub h: Option<UserFn>,
}

/// Torus with its shape operator `diag(1, cos u / (2 + cos u))`; `h ≡ 1`.
pub fn torus_shape_operator() -> TensorFixture {
    let metric = torus().metric;
    let tensor =
        SymTensorField::diagonal(&metric, vec![Expr::one(), expr("cos(x0)/(2 + cos(x0))", 2)]).expect("tensor");
    TensorFixture {
        name: "torus",
        metric,
        tensor,
        h: Some(UserFn::constant("h", 1.0)),
    }
}

/// Polar cone pair `diag(0, 1/t)` on the polar metric; `h ≡ 0`.
pub fn polar_cone() -> TensorFixture {
    let metric = polar().metric;
    let tensor = SymTensorField::diagonal(&metric, vec![Expr::zero(), expr("1/x0", 2)]).expect("tensor");
    TensorFixture {
        name: "polar-cone",
        metric,
        tensor,
        h: Some(UserFn::constant("h", 0.0)),
    }
}

/// Canonical Codazzi pair with `φ⁻¹ = x0 + x1` on Euclidean lines.
pub fn conformal_sum() -> TensorFixture {
    let c = product_chart(vec![(0.15, 1.0); 2], singletons(2));
    let pair = build_codazzi_candidate(
        &c,
        &CandidateKind::ConformalSum {
            phi0: Expr::var(0),
            phi1: Expr::var(1),
            factors: lines(2),
        },
        1e-8,
    )
    .expect("canonical pair");
    let (metric, tensor) = (pair.metric, pair.tensor);
    TensorFixture {
        name: "conformal-sum",
        metric,
        tensor,
        h: None,
    }
}

pub fn tensor_fixtures() -> Vec<TensorFixture> {
    vec![torus_shape_operator(), polar_cone(), conformal_sum()]
}

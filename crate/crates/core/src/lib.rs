//! Chart-level verification of product structures on Riemannian metrics.
//!
//! The crate works with metrics given by closed-form expressions on a
//! rectangular coordinate chart. It differentiates them exactly, evaluates
//! Levi-Civita quantities at sample points, and from there decides whether an
//! orthogonal net is the product net of a twisted, warped, quasi-warped or
//! conformally (warped) product metric. For nets that are conformal to warped
//! products it reconstructs the conformal factor and the warping data, and it
//! analyzes Codazzi tensors with two eigenvalues through the eigenbundle net.
//!
//! ```
//! use confnet::chart::Chart;
//! use confnet::calculus::MetricField;
//! use confnet::nets::{classify_net, OrthogonalNet};
//! use confnet::sampling::SamplePlan;
//! use confnet::scalar::parse_expr;
//!
//! let chart = Chart::new(vec!["r".into(), "t".into()], vec![(0.5, 3.0), (-3.0, 3.0)]).unwrap();
//! let r2 = parse_expr("r^2", &chart).unwrap();
//! let g = MetricField::diagonal(chart, vec![1.0.into(), r2]).unwrap();
//! let net = OrthogonalNet::coordinate(2, vec![vec![0], vec![1]]).unwrap();
//! let report = classify_net(&g, &net, &SamplePlan::default(), 1e-8).unwrap();
//! assert!(report.flags.wp.holds());
//! ```

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::should_implement_trait
)]

pub mod calculus;
pub mod chart;
pub mod cli;
pub mod codazzi;
pub mod error;
pub mod fixtures;
pub mod linalg;
pub mod nets;
pub mod product;
pub mod sampling;
pub mod scalar;
pub mod verdict;

pub use error::{Error, Result};

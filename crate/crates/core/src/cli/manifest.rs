//! Manifest loading and validation.
//!
//! A manifest names a chart, a metric (directly or as a product spec), the
//! nets and tensors to study, helper functions, sampling and a tolerance.
//! Schema errors carry the JSON pointer of the offending value.

use std::path::Path;

use serde::Deserialize;
use serde_path_to_error::Segment;

use crate::calculus::{MetricField, VectorField, VectorFieldSet};
use crate::chart::Chart;
use crate::codazzi::{ClosedFormCheck, SymTensorField};
use crate::error::{Error, Result};
use crate::linalg::SymMat;
use crate::nets::OrthogonalNet;
use crate::product::{build_metric, Kind, ProductSpec, TwistedSpec};
use crate::sampling::SamplePlan;
use crate::scalar::{parse_with, Expr, UserFn};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    chart: RawChart,
    metric: Option<RawMetric>,
    product: Option<RawProduct>,
    #[serde(default)]
    nets: Vec<RawNet>,
    #[serde(default)]
    tensors: Vec<RawTensor>,
    #[serde(default)]
    functions: Vec<RawFunction>,
    sampling: Option<RawSampling>,
    tolerance: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChart {
    dim: usize,
    names: Option<Vec<String>>,
    domain: Vec<[f64; 2]>,
    blocks: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMetric {
    components: Vec<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProduct {
    kind: String,
    factors: Vec<RawFactor>,
    twists: Vec<String>,
    /// Conformal factor `φ` of `φ² g`.
    conformal: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFactor {
    metric: Vec<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNet {
    blocks: Vec<Vec<usize>>,
    /// One row of components per frame vector.
    frame: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTensor {
    name: String,
    components: Vec<Vec<String>>,
    h: Option<String>,
    closed_form: Option<RawClosedForm>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClosedForm {
    sigma: String,
    mu_of_sigma: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFunction {
    name: String,
    var: String,
    body: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampling {
    grid: Option<usize>,
    margin: Option<f64>,
    random: Option<usize>,
    seed: Option<u64>,
}

/// A tensor entry with its optional relation `λ = h(μ)` and closed form.
#[derive(Clone, Debug)]
pub struct TensorEntry {
    pub name: String,
    pub tensor: SymTensorField,
    pub h: Option<UserFn>,
    pub closed_form: Option<ClosedFormCheck>,
}

/// A validated manifest.
#[derive(Clone, Debug)]
pub struct Manifest {
    pub chart: Chart,
    pub metric: MetricField,
    pub product: Option<ProductSpec>,
    pub nets: Vec<OrthogonalNet>,
    pub tensors: Vec<TensorEntry>,
    pub functions: Vec<UserFn>,
    pub sampling: SamplePlan,
    pub tolerance: f64,
}

fn at(pointer: impl Into<String>, message: impl ToString) -> Error {
    Error::Manifest {
        pointer: pointer.into(),
        message: message.to_string(),
    }
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_manifest(&text)
}

pub fn parse_manifest(text: &str) -> Result<Manifest> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawManifest = serde_path_to_error::deserialize(de).map_err(|e| at(pointer_of(e.path()), e.inner()))?;
    validate(raw)
}

struct Ctx<'a> {
    names: &'a [String],
    functions: &'a [UserFn],
}

impl Ctx<'_> {
    fn expr(&self, text: &str, pointer: &str) -> Result<Expr> {
        parse_with(text, self.names, self.functions).map_err(|e| at(pointer, e))
    }

    fn matrix(&self, rows: &[Vec<String>], n: usize, pointer: &str) -> Result<SymMat> {
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            let cols = rows.first().map_or(0, Vec::len);
            return Err(at(
                pointer,
                format!("expected a {n}x{n} matrix, found {}x{cols}", rows.len()),
            ));
        }
        rows.iter()
            .enumerate()
            .map(|(i, r)| {
                r.iter()
                    .enumerate()
                    .map(|(j, t)| self.expr(t, &format!("{pointer}/{i}/{j}")))
                    .collect()
            })
            .collect()
    }

    fn function(&self, name: &str, pointer: &str) -> Result<UserFn> {
        self.functions
            .iter()
            .find(|f| f.name == name)
            .cloned()
            .ok_or_else(|| at(pointer, format!("unknown function '{name}'")))
    }
}

fn validate(raw: RawManifest) -> Result<Manifest> {
    let rc = &raw.chart;
    if rc.domain.len() != rc.dim {
        return Err(at(
            "/chart/domain",
            format!("expected {} intervals, found {}", rc.dim, rc.domain.len()),
        ));
    }
    let names = rc
        .names
        .clone()
        .unwrap_or_else(|| (0..rc.dim).map(|i| format!("x{i}")).collect());
    if names.len() != rc.dim {
        return Err(at(
            "/chart/names",
            format!("expected {} names, found {}", rc.dim, names.len()),
        ));
    }
    let mut chart =
        Chart::new(names.clone(), rc.domain.iter().map(|d| (d[0], d[1])).collect()).map_err(|e| at("/chart", e))?;
    if let Some(blocks) = &rc.blocks {
        chart = chart
            .with_blocks(blocks.clone(), false)
            .map_err(|e| at("/chart/blocks", e))?;
    }
    let n = rc.dim;

    let mut functions: Vec<UserFn> = Vec::new();
    for (i, f) in raw.functions.iter().enumerate() {
        if functions.iter().any(|g| g.name == f.name) {
            return Err(at(
                format!("/functions/{i}/name"),
                format!("function '{}' defined twice", f.name),
            ));
        }
        let parsed =
            UserFn::parse(&f.name, &f.var, &f.body, &functions).map_err(|e| at(format!("/functions/{i}/body"), e))?;
        functions.push(parsed);
    }
    let ctx = Ctx {
        names: &names,
        functions: &functions,
    };

    let (metric, product) = match (&raw.metric, &raw.product) {
        (Some(_), Some(_)) => return Err(at("", "give either 'metric' or 'product', not both")),
        (None, None) => return Err(at("", "missing 'metric' or 'product'")),
        (Some(m), None) => {
            let g = ctx.matrix(&m.components, n, "/metric/components")?;
            (
                MetricField::new(chart.clone(), g).map_err(|e| at("/metric/components", e))?,
                None,
            )
        }
        (None, Some(p)) => {
            let spec = product_spec(&ctx, p, &chart)?;
            (build_metric(&spec).map_err(|e| at("/product", e))?, Some(spec))
        }
    };

    let mut nets = Vec::with_capacity(raw.nets.len());
    for (i, rn) in raw.nets.iter().enumerate() {
        let pointer = format!("/nets/{i}");
        let net = match &rn.frame {
            None => OrthogonalNet::coordinate(n, rn.blocks.clone()),
            Some(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(at(
                        format!("{pointer}/frame"),
                        format!("expected {n} vectors of {n} components"),
                    ));
                }
                let fields = rows
                    .iter()
                    .enumerate()
                    .map(|(a, r)| {
                        r.iter()
                            .enumerate()
                            .map(|(k, t)| ctx.expr(t, &format!("{pointer}/frame/{a}/{k}")))
                            .collect::<Result<Vec<Expr>>>()
                            .map(VectorField::new)
                    })
                    .collect::<Result<Vec<_>>>()?;
                OrthogonalNet::from_frame(VectorFieldSet { fields }, rn.blocks.clone())
            }
        }
        .map_err(|e| at(format!("{pointer}/blocks"), e))?;
        nets.push(net);
    }

    let mut tensors = Vec::with_capacity(raw.tensors.len());
    for (i, rt) in raw.tensors.iter().enumerate() {
        let pointer = format!("/tensors/{i}");
        let comps = ctx.matrix(&rt.components, n, &format!("{pointer}/components"))?;
        let tensor = SymTensorField::new(&metric, comps).map_err(|e| at(format!("{pointer}/components"), e))?;
        let h =
            rt.h.as_deref()
                .map(|name| ctx.function(name, &format!("{pointer}/h")))
                .transpose()?;
        let closed_form = match &rt.closed_form {
            None => None,
            Some(c) => Some(ClosedFormCheck {
                sigma: ctx.expr(&c.sigma, &format!("{pointer}/closed_form/sigma"))?,
                mu_of_sigma: ctx.function(&c.mu_of_sigma, &format!("{pointer}/closed_form/mu_of_sigma"))?,
            }),
        };
        tensors.push(TensorEntry {
            name: rt.name.clone(),
            tensor,
            h,
            closed_form,
        });
    }

    let s = raw.sampling.unwrap_or_default();
    let d = SamplePlan::default();
    let sampling = SamplePlan {
        grid: s.grid.unwrap_or(d.grid),
        margin: s.margin.unwrap_or(d.margin),
        random: s.random.unwrap_or(d.random),
        seed: s.seed.unwrap_or(d.seed),
    };
    if !(0.0..0.5).contains(&sampling.margin) {
        return Err(at("/sampling/margin", "margin must lie in [0, 0.5)"));
    }
    let tolerance = raw.tolerance.unwrap_or(1e-8);
    if !(tolerance > 0.0) {
        return Err(at("/tolerance", "tolerance must be positive"));
    }
    Ok(Manifest {
        chart,
        metric,
        product,
        nets,
        tensors,
        functions,
        sampling,
        tolerance,
    })
}

fn product_spec(ctx: &Ctx<'_>, p: &RawProduct, chart: &Chart) -> Result<ProductSpec> {
    let kind = Kind::parse(&p.kind).ok_or_else(|| at("/product/kind", format!("unknown product kind '{}'", p.kind)))?;
    let blocks = chart
        .blocks()
        .ok_or_else(|| at("/chart/blocks", "a product spec needs chart blocks"))?
        .to_vec();
    if p.factors.len() != blocks.len() {
        return Err(at(
            "/product/factors",
            format!("expected {} factors, found {}", blocks.len(), p.factors.len()),
        ));
    }
    let factors = p
        .factors
        .iter()
        .zip(&blocks)
        .enumerate()
        .map(|(i, (f, b))| ctx.matrix(&f.metric, b.len(), &format!("/product/factors/{i}/metric")))
        .collect::<Result<Vec<_>>>()?;
    let twists = p
        .twists
        .iter()
        .enumerate()
        .map(|(i, t)| ctx.expr(t, &format!("/product/twists/{i}")))
        .collect::<Result<Vec<_>>>()?;
    let base = TwistedSpec::new(kind, chart.clone(), factors, twists).map_err(|e| at("/product", e))?;
    Ok(match &p.conformal {
        None => ProductSpec::Base(base),
        Some(phi) => ProductSpec::ConformalOf {
            inner: Box::new(ProductSpec::Base(base)),
            phi: ctx.expr(phi, "/product/conformal")?,
        },
    })
}

impl Manifest {
    /// Nets to analyze: the declared ones, or the chart's block net.
    pub fn nets_or_default(&self) -> Result<Vec<OrthogonalNet>> {
        if !self.nets.is_empty() {
            return Ok(self.nets.clone());
        }
        match self.chart.blocks() {
            Some(b) => Ok(vec![OrthogonalNet::coordinate(self.chart.dim(), b.to_vec())?]),
            None => Err(at("/nets", "no nets declared and the chart has no blocks")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const POLAR: &str = r#"{
        "chart": {"dim": 2, "names": ["r", "t"], "domain": [[0.5, 3], [-3, 3]], "blocks": [[0], [1]]},
        "metric": {"components": [["1", "0"], ["0", "r^2"]]}
    }"#;

    fn pointer(text: &str) -> String {
        match parse_manifest(text) {
            Err(Error::Manifest { pointer, .. }) => pointer,
            other => panic!("expected a manifest error, got {other:?}"),
        }
    }

    #[test]
    fn polar_parses_with_defaults() {
        let m = parse_manifest(POLAR).unwrap();
        assert_eq!(m.sampling, SamplePlan::default());
        assert_eq!(m.tolerance, 1e-8);
        assert_eq!(m.nets_or_default().unwrap().len(), 1);
    }

    #[test]
    fn wrong_matrix_shape() {
        let bad = POLAR.replace(
            r#"[["1", "0"], ["0", "r^2"]]"#,
            r#"[["1", "0"], ["0", "r^2"], ["0", "0"]]"#,
        );
        assert_eq!(pointer(&bad), "/metric/components");
    }

    #[test]
    fn unknown_function_in_expression() {
        let bad = POLAR.replace("r^2", "k(r)");
        assert_eq!(pointer(&bad), "/metric/components/1/1");
    }

    #[test]
    fn schema_errors_point_at_the_value() {
        let bad = POLAR.replace("[-3, 3]", r#"[-3, "x"]"#);
        assert_eq!(pointer(&bad), "/chart/domain/1/1");
        let extra = POLAR.replace(r#""dim": 2,"#, r#""dim": 2, "colour": 1,"#);
        assert!(pointer(&extra).starts_with("/chart"));
    }

    #[test]
    fn undeclared_h_is_reported() {
        let text = r#"{
            "chart": {"dim": 2, "domain": [[0.5, 3], [-3, 3]]},
            "metric": {"components": [["1", "0"], ["0", "x0^2"]]},
            "tensors": [{"name": "a", "components": [["0", "0"], ["0", "1/x0"]], "h": "k"}]
        }"#;
        assert_eq!(pointer(text), "/tensors/0/h");
    }
}

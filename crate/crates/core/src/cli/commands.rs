use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::calculus::VectorField;
use crate::codazzi::classify_codazzi;
use crate::error::{Error, Result};
use crate::nets::{classify_net, OrthogonalNet};
use crate::product::{factorize_cwp, random, verify_connection_identity, FactorizeOptions, ProductSpec};
use crate::verdict::Flag;

use super::manifest::Manifest;
use super::report::{NamedCodazzi, ProductCheck, Report};

/// Relative grid error accepted when rebuilding a metric from its factors.
pub const RECONSTRUCTION_TOL: f64 = 1e-6;

/// Random vector fields tried per sample in the connection identity.
const RANDOM_FIELD_PAIRS: usize = 4;

pub fn classify(m: &Manifest, report: &mut Report) -> Result<()> {
    for (i, net) in m.nets_or_default()?.iter().enumerate() {
        let r = classify_net(&m.metric, net, &m.sampling, m.tolerance)?;
        report.push(&format!("net{i}."), r.verdicts());
        report.nets.push(r);
    }
    Ok(())
}

/// Flags that hold for every spec of this shape.
pub fn guaranteed_flags(spec: &ProductSpec) -> Vec<&'static str> {
    let base = spec.base();
    let flags = random::expected_flags(base.kind(), base.blocks().len() - 1);
    match spec {
        ProductSpec::Base(_) => flags,
        // Only the conformally invariant conditions survive rescaling.
        ProductSpec::ConformalOf { .. } => flags
            .into_iter()
            .filter(|f| matches!(*f, "CQW" | "CQW0" | "CWP" | "CP"))
            .collect(),
    }
}

pub fn verify_product(m: &Manifest, report: &mut Report) -> Result<()> {
    let spec = m
        .product
        .as_ref()
        .ok_or_else(|| Error::Precondition("verify-product needs a 'product' section in the manifest".into()))?;
    let base = spec.base();
    let n = m.chart.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(m.sampling.seed);
    let mut fields: Vec<VectorField> = (0..n).map(|i| VectorField::coordinate(i, n)).collect();
    fields.extend((0..2 * RANDOM_FIELD_PAIRS).map(|_| random::vector_field(&mut rng, n)));
    let mut identity: f64 = 0.0;
    for p in m.sampling.points(&m.chart) {
        for x in &fields {
            for y in fields.iter().take(n) {
                identity = identity.max(verify_connection_identity(base, x, y, &p)?);
            }
        }
    }
    let net = OrthogonalNet::coordinate(n, base.blocks().to_vec())?;
    let classification = classify_net(&m.metric, &net, &m.sampling, m.tolerance)?;
    let guaranteed = guaranteed_flags(spec);
    report.push(
        "",
        vec![("connection_identity".to_string(), Flag::new(identity, m.tolerance))],
    );
    report.push(
        "net.",
        classification
            .flags
            .iter()
            .filter(|(name, _)| guaranteed.contains(name))
            .map(|(name, f)| (name.to_string(), *f)),
    );
    report.product = Some(ProductCheck {
        label: spec.label(),
        guaranteed: guaranteed.iter().map(|s| s.to_string()).collect(),
        connection_identity: identity,
        classification,
    });
    Ok(())
}

pub fn factorize(m: &Manifest, report: &mut Report) -> Result<()> {
    let opts = FactorizeOptions {
        classify_tol: m.tolerance,
        classify_plan: m.sampling,
        ..FactorizeOptions::default()
    };
    for (i, net) in m.nets_or_default()?.iter().enumerate() {
        let f = factorize_cwp(&m.metric, net, &opts)?;
        let mut v = vec![
            (
                "path_consistency".to_string(),
                Flag::new(f.path_consistency, opts.path_tol),
            ),
            (
                "reconstruction".to_string(),
                Flag::new(f.reconstruction_error, RECONSTRUCTION_TOL),
            ),
        ];
        if let Some(pf) = &f.product_form {
            v.push((
                "product_form".into(),
                Flag::new(pf.reconstruction_error, RECONSTRUCTION_TOL),
            ));
        }
        if let Some(c) = &f.closed_form {
            v.push(("closed_form".into(), Flag::new(c.residual, RECONSTRUCTION_TOL)));
        }
        report.push(&format!("factorization{i}."), v);
        report.factorizations.push(f);
    }
    Ok(())
}

pub fn codazzi(m: &Manifest, report: &mut Report) -> Result<()> {
    if m.tensors.is_empty() {
        return Err(Error::Precondition(
            "codazzi needs at least one entry in 'tensors'".into(),
        ));
    }
    for t in &m.tensors {
        let r = classify_codazzi(
            &m.metric,
            &t.tensor,
            t.h.as_ref(),
            t.closed_form.as_ref(),
            &m.sampling,
            m.tolerance,
        )?;
        report.push(&format!("{}.", t.name), r.verdicts());
        report.codazzi.push(NamedCodazzi {
            name: t.name.clone(),
            report: r,
        });
    }
    Ok(())
}

//! Built-in battery: each case rebuilds a known configuration and checks
//! one identity or classification against its expected outcome.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::{levi_civita_defects, VectorField};
use crate::chart::Chart;
use crate::codazzi::{classify_codazzi, ClosedFormCheck};
use crate::error::Result;
use crate::fixtures;
use crate::nets::{classify_net, OrthogonalNet};
use crate::product::{
    build_metric, conformal_scale, factorize_cwp, random, spherical_factor_max, verify_connection_identity,
    FactorizeOptions, Kind, ProductSpec, TwistedSpec,
};
use crate::sampling::SamplePlan;
use crate::scalar::{eval_jet2, fd_oracle, parse_with, Expr, UserFn};
use crate::verdict::{max_of, Verdict};

use super::report::SelftestCase;

fn residual_case(name: &str, detail: String, residual: f64, tolerance: f64) -> SelftestCase {
    SelftestCase {
        name: name.to_string(),
        detail,
        verdict: Verdict::of(residual, tolerance),
        residual,
        tolerance,
    }
}

fn expectation_case(name: &str, detail: String, ok: bool, residual: f64, tolerance: f64) -> SelftestCase {
    SelftestCase {
        name: name.to_string(),
        detail,
        verdict: if ok { Verdict::Holds } else { Verdict::Fails },
        residual,
        tolerance,
    }
}

fn errored(name: &str, e: crate::Error) -> SelftestCase {
    SelftestCase {
        name: name.to_string(),
        detail: format!("error: {e}"),
        verdict: Verdict::Fails,
        residual: f64::NAN,
        tolerance: f64::NAN,
    }
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

type Case = fn(u64, &SamplePlan, f64) -> Result<SelftestCase>;

/// Runs the whole battery. `tol` is the classification tolerance.
pub fn run(seed: u64, plan: &SamplePlan, tol: f64) -> Vec<SelftestCase> {
    let cases: Vec<(&str, Case)> = vec![
        ("derivatives", derivatives),
        ("levi_civita", levi_civita),
        ("connection_identity", connection_identity),
        ("classification_round_trip", round_trip),
        ("twisted_control_rejected", twisted_control),
        ("conformal_invariance", conformal_invariance),
        ("spherical_factor", spherical_factor),
        ("factorization", factorization),
        ("codazzi_torus", codazzi_torus),
        ("two_path_identity", two_path),
        ("mean_curvature_sum", mean_curvature_sum),
    ];
    cases
        .into_iter()
        .map(|(name, f)| f(seed, plan, tol).unwrap_or_else(|e| errored(name, e)))
        .collect()
}

fn derivatives(seed: u64, _: &SamplePlan, _: f64) -> Result<SelftestCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let count = 40;
    for _ in 0..count {
        let dim = rng.gen_range(1..=3);
        let e = crate::scalar::random::smooth_expr(&mut rng, dim, 3);
        let p = crate::scalar::random::point(&mut rng, dim, -0.8, 0.8);
        let jet = eval_jet2(&e, &p)?;
        let (g, h) = fd_oracle(&e, &p, 1e-4, None)?;
        let scale = jet.value.abs().max(1.0);
        worst = worst
            .max((&jet.grad - g).amax() / scale)
            .max((&jet.hess - h).amax() / scale);
    }
    Ok(residual_case(
        "derivatives",
        format!("{count} random expressions, symbolic against central differences at h = 1e-4"),
        worst,
        1e-5,
    ))
}

fn levi_civita(seed: u64, plan: &SamplePlan, _: f64) -> Result<SelftestCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let fx = fixtures::metric_fixtures();
    for f in &fx {
        let n = f.metric.dim();
        let x = random::vector_field(&mut rng, n);
        let y = random::vector_field(&mut rng, n);
        let z = VectorField::coordinate(n - 1, n);
        for p in plan.points(f.metric.chart()) {
            let d = levi_civita_defects(&f.metric, &x, &y, &z, &p)?;
            worst = worst.max(d.compatibility).max(d.torsion);
        }
    }
    Ok(residual_case(
        "levi_civita",
        format!("metric compatibility and torsion on {} fixture metrics", fx.len()),
        worst,
        1e-10,
    ))
}

fn connection_identity(seed: u64, _: &SamplePlan, _: f64) -> Result<SelftestCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let specs = 6;
    for _ in 0..specs {
        let n = rng.gen_range(2..=4);
        let spec = random::spec(&mut rng, Kind::Twisted, n);
        for _ in 0..4 {
            let x = random::vector_field(&mut rng, n);
            let y = random::vector_field(&mut rng, n);
            let p = crate::scalar::random::point(&mut rng, n, random::DOMAIN.0 + 0.05, random::DOMAIN.1 - 0.05);
            worst = worst.max(verify_connection_identity(&spec, &x, &y, &p)?);
        }
    }
    Ok(residual_case(
        "connection_identity",
        format!("{specs} random twisted products, four field pairs each"),
        worst,
        1e-9,
    ))
}

fn round_trip(seed: u64, plan: &SamplePlan, tol: f64) -> Result<SelftestCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut mismatches = Vec::new();
    let mut total = 0;
    for kind in [Kind::Product, Kind::Warped, Kind::QuasiWarped, Kind::Twisted] {
        for _ in 0..2 {
            let n = rng.gen_range(2..=3);
            let spec = random::spec(&mut rng, kind, n);
            let k = spec.blocks().len() - 1;
            let net = OrthogonalNet::coordinate(n, spec.blocks().to_vec())?;
            let g = build_metric(&ProductSpec::Base(spec))?;
            let r = classify_net(&g, &net, plan, tol)?;
            let expected = random::expected_flags(kind, k);
            let holding = r.flags.holding();
            for (name, f) in r.flags.iter() {
                if expected.contains(&name) {
                    worst = worst.max(f.max_residual);
                }
            }
            total += 1;
            if holding != expected {
                mismatches.push(format!(
                    "{} with {} fibers: {:?} vs {:?}",
                    kind.name(),
                    k,
                    holding,
                    expected
                ));
            }
        }
    }
    let detail = if mismatches.is_empty() {
        format!("{total} random specs yield exactly their expected flag sets")
    } else {
        mismatches.join("; ")
    };
    Ok(expectation_case(
        "classification_round_trip",
        detail,
        mismatches.is_empty(),
        worst,
        tol,
    ))
}

fn twisted_control(_: u64, plan: &SamplePlan, tol: f64) -> Result<SelftestCase> {
    let f = fixtures::twisted_control();
    let r = classify_net(&f.metric, &f.net, plan, tol)?;
    let cwp = r.flags.cwp;
    Ok(expectation_case(
        "twisted_control_rejected",
        "twisted product with ρ = 1 + x0² x1 is not conformal to a warped product".into(),
        cwp.fails() && cwp.max_residual > 1e-3,
        cwp.max_residual,
        1e-3,
    ))
}

fn conformal_invariance(seed: u64, plan: &SamplePlan, tol: f64) -> Result<SelftestCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut differing = Vec::new();
    let mut worst: f64 = 0.0;
    for f in fixtures::metric_fixtures() {
        let base = classify_net(&f.metric, &f.net, plan, tol)?;
        for _ in 0..2 {
            let phi = random::positive_factor(&mut rng, f.metric.chart());
            let scaled = conformal_scale(&f.metric, &phi, plan)?;
            let r = classify_net(&scaled, &f.net, plan, tol)?;
            for (a, b) in [(base.flags.cwp, r.flags.cwp), (base.flags.cp, r.flags.cp)] {
                if a.verdict != b.verdict {
                    differing.push(f.name);
                }
                if a.holds() {
                    worst = worst.max(b.max_residual);
                }
            }
        }
    }
    let ok = differing.is_empty();
    let detail = if ok {
        "CWP and CP verdicts unchanged by conformal rescaling".to_string()
    } else {
        format!("verdicts changed on {differing:?}")
    };
    Ok(expectation_case("conformal_invariance", detail, ok, worst, tol))
}

fn unit_square_product() -> Result<TwistedSpec> {
    let c = Chart::with_domain(vec![(0.2, 1.2); 2])?.with_blocks(vec![vec![0], vec![1]], false)?;
    let one = vec![vec![Expr::one()]];
    TwistedSpec::new(Kind::Product, c, vec![one.clone(), one], vec![Expr::one(); 2])
}

fn spherical_factor(_: u64, plan: &SamplePlan, _: f64) -> Result<SelftestCase> {
    let spec = unit_square_product()?;
    let e = |s: &str| parse_with(s, &names(2), &[]);
    let good = spherical_factor_max(&spec, &e("1/(x0 + x1)")?, 1, plan)?;
    let bad = spherical_factor_max(&spec, &e("1/(x0*x1)")?, 1, plan)?;
    let pass = good.ii.max(good.iii).max(good.v);
    let fail = bad.ii.min(bad.iii).min(bad.v);
    Ok(expectation_case(
        "spherical_factor",
        format!("sum-separable inverse factor {pass:.3e}, product control {fail:.3e}"),
        pass <= 1e-9 && fail > 1e-3,
        pass,
        1e-9,
    ))
}

fn factorization(_: u64, plan: &SamplePlan, tol: f64) -> Result<SelftestCase> {
    let polar = fixtures::polar();
    let phi = parse_with("exp(x0 + x1)", &names(2), &[])?;
    let g = conformal_scale(&polar.metric, &phi, plan)?;
    let opts = FactorizeOptions {
        classify_tol: tol,
        classify_plan: *plan,
        ..FactorizeOptions::default()
    };
    let f = factorize_cwp(&g, &polar.net, &opts)?;
    Ok(expectation_case(
        "factorization",
        format!(
            "exp(x0 + x1)² times polar: reconstruction {:.3e}, path consistency {:.3e}",
            f.reconstruction_error, f.path_consistency
        ),
        f.reconstruction_error <= 1e-6 && f.path_consistency <= 1e-7,
        f.reconstruction_error,
        1e-6,
    ))
}

fn codazzi_torus(_: u64, plan: &SamplePlan, tol: f64) -> Result<SelftestCase> {
    let t = fixtures::torus_shape_operator();
    let closed = ClosedFormCheck {
        sigma: parse_with("2 + cos(x0)", &names(2), &[])?,
        mu_of_sigma: UserFn::parse("m", "s", "1 - 2/s", &[])?,
    };
    let r = classify_codazzi(&t.metric, &t.tensor, t.h.as_ref(), Some(&closed), plan, tol)?;
    let st = r.structure.as_ref();
    let warped = st.is_some_and(|s| matches!(s.case, crate::codazzi::StructureCase::Warped));
    let tilmu = st.and_then(|s| s.tilmu).map_or(f64::NAN, |f| f.max_residual);
    let worst = max_of([
        r.flags.isothermic.max_residual,
        r.flags.mulambda1.max_residual,
        tilmu,
        r.closed_form.map_or(f64::NAN, |f| f.max_residual),
    ]);
    Ok(expectation_case(
        "codazzi_torus",
        format!("torus shape operator, warped splitting detected: {warped}"),
        warped && r.codazzi.max_residual <= 1e-10 && worst <= 1e-9,
        worst,
        1e-9,
    ))
}

fn two_path(_: u64, plan: &SamplePlan, tol: f64) -> Result<SelftestCase> {
    let mut worst: f64 = 0.0;
    let fx = fixtures::tensor_fixtures();
    for t in &fx {
        let r = classify_codazzi(&t.metric, &t.tensor, None, None, plan, tol)?;
        worst = worst.max(r.s1.max_residual).max(r.s2.max_residual);
    }
    Ok(residual_case(
        "two_path_identity",
        format!(
            "second derivatives of the mean curvature normals on {} tensors",
            fx.len()
        ),
        worst,
        1e-9,
    ))
}

fn mean_curvature_sum(_: u64, plan: &SamplePlan, tol: f64) -> Result<SelftestCase> {
    let f = fixtures::cqw3();
    let r = classify_net(&f.metric, &f.net, plan, tol)?;
    Ok(residual_case(
        "mean_curvature_sum",
        "three-block conformal quasi-warped fixture".into(),
        r.h0_sum_residual,
        1e-9,
    ))
}

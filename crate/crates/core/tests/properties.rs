use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use confnet::nets::{classify_net, OrthogonalNet};
use confnet::product::{build_metric, conformal_scale, random, verify_connection_identity, Kind, ProductSpec};
use confnet::sampling::SamplePlan;
use confnet::scalar::{self, eval_jet2, fd_oracle, parse_with};
use confnet::verdict::{Verdict, FAIL_FACTOR};

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

fn kind_of(i: u8) -> Kind {
    [Kind::Product, Kind::Warped, Kind::QuasiWarped, Kind::Twisted][i as usize % 4]
}

fn small_plan(seed: u64) -> SamplePlan {
    SamplePlan {
        grid: 3,
        margin: 0.1,
        random: 4,
        seed,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn printed_expressions_reparse_to_the_same_function(seed in any::<u64>(), dim in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = scalar::random::smooth_expr(&mut rng, dim, 3);
        let text = e.display(&names(dim)).to_string();
        let back = parse_with(&text, &names(dim), &[]).unwrap();
        for _ in 0..3 {
            let p = scalar::random::point(&mut rng, dim, -1.0, 1.0);
            let (a, b) = (e.eval(&p).unwrap(), back.eval(&p).unwrap());
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{text}: {a} vs {b}");
        }
    }

    #[test]
    fn symbolic_derivatives_match_differences(seed in any::<u64>(), dim in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = scalar::random::smooth_expr(&mut rng, dim, 3);
        let p = scalar::random::point(&mut rng, dim, -0.8, 0.8);
        let jet = eval_jet2(&e, &p).unwrap();
        let (g, h) = fd_oracle(&e, &p, 1e-4, None).unwrap();
        let scale = jet.value.abs().max(1.0);
        prop_assert!((&jet.grad - g).amax() <= 1e-5 * scale);
        prop_assert!((&jet.hess - h).amax() <= 1e-4 * scale);
        prop_assert!((&jet.hess - jet.hess.transpose()).amax() == 0.0);
    }

    #[test]
    fn christoffel_symbols_are_symmetric_and_inverse_is_exact(seed in any::<u64>(), n in 2usize..=4, kind in 0u8..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random::spec(&mut rng, kind_of(kind), n);
        let g = build_metric(&ProductSpec::Base(spec)).unwrap();
        let p = scalar::random::point(&mut rng, n, random::DOMAIN.0, random::DOMAIN.1);
        let geo = g.geometry_at(&p).unwrap();
        let id = &geo.g * &geo.ginv;
        prop_assert!((id - nalgebra::DMatrix::identity(n, n)).amax() <= 1e-12);
        for gk in g.christoffel(&p).unwrap() {
            prop_assert!((&gk - gk.transpose()).amax() <= 1e-13);
        }
    }

    #[test]
    fn twisted_connection_identity(seed in any::<u64>(), n in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random::spec(&mut rng, Kind::Twisted, n);
        let x = random::vector_field(&mut rng, n);
        let y = random::vector_field(&mut rng, n);
        let p = scalar::random::point(&mut rng, n, random::DOMAIN.0, random::DOMAIN.1);
        prop_assert!(verify_connection_identity(&spec, &x, &y, &p).unwrap() <= 1e-9);
    }

    #[test]
    fn verdict_bands(r in 0.0f64..1.0, tol in 1e-12f64..1e-2) {
        let v = Verdict::of(r, tol);
        if r <= tol {
            prop_assert_eq!(v, Verdict::Holds);
        } else if r > FAIL_FACTOR * tol {
            prop_assert_eq!(v, Verdict::Fails);
        } else {
            prop_assert_eq!(v, Verdict::Inconclusive);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn classification_respects_implications(seed in any::<u64>(), n in 2usize..=4, kind in 0u8..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kind = kind_of(kind);
        let spec = random::spec(&mut rng, kind, n);
        let k = spec.blocks().len() - 1;
        let net = OrthogonalNet::coordinate(n, spec.blocks().to_vec()).unwrap();
        let g = build_metric(&ProductSpec::Base(spec)).unwrap();
        let r = classify_net(&g, &net, &small_plan(seed), 1e-8).unwrap();
        let f = &r.flags;
        prop_assert!(!f.wp.holds() || f.tp.holds());
        prop_assert!(!f.qw.holds() || f.tp.holds());
        prop_assert!(!f.cp.holds() || f.cwp.holds());
        prop_assert!(!f.cwp.holds() || f.cqw.holds());
        prop_assert_eq!(f.holding(), random::expected_flags(kind, k));
    }

    #[test]
    fn conformal_flags_survive_rescaling(seed in any::<u64>(), n in 2usize..=3, kind in 0u8..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random::spec(&mut rng, kind_of(kind), n);
        let net = OrthogonalNet::coordinate(n, spec.blocks().to_vec()).unwrap();
        let g = build_metric(&ProductSpec::Base(spec)).unwrap();
        let plan = small_plan(seed);
        let phi = random::positive_factor(&mut rng, g.chart());
        let scaled = conformal_scale(&g, &phi, &plan).unwrap();
        let a = classify_net(&g, &net, &plan, 1e-8).unwrap();
        let b = classify_net(&scaled, &net, &plan, 1e-8).unwrap();
        for (x, y) in [(a.flags.cwp, b.flags.cwp), (a.flags.cp, b.flags.cp), (a.flags.cqw, b.flags.cqw)] {
            prop_assert_eq!(x.verdict, y.verdict);
        }
    }
}

//! Seeded generators of smooth expressions, used by the self-test battery
//! and the property tests.

use rand::Rng;

use super::{Expr, Func};

/// Random expression in `dim` variables that is smooth and finite on
/// `[-1, 1]^dim`, with nesting depth at most `depth`.
///
/// Logs, square roots and negative powers only ever see arguments bounded
/// below by 1, so evaluation on the box never hits a domain error.
pub fn smooth_expr<R: Rng>(rng: &mut R, dim: usize, depth: usize) -> Expr {
    if depth == 0 || rng.gen_bool(0.2) {
        return leaf(rng, dim);
    }
    let a = smooth_expr(rng, dim, depth - 1);
    match rng.gen_range(0..9) {
        0 | 1 => a + smooth_expr(rng, dim, depth - 1),
        2 | 3 => a * smooth_expr(rng, dim, depth - 1),
        4 => Expr::func(Func::Sin, a),
        5 => Expr::func(Func::Cos, a),
        // Bounded argument keeps the exponential tame.
        6 => Expr::func(Func::Exp, Expr::func(Func::Sin, a)),
        7 => Expr::func(Func::Log, 1.5 + Expr::pow(a, 2.0)),
        _ => {
            let p = [0.5, -0.5, 1.5, -1.0][rng.gen_range(0..4)];
            Expr::pow(1.0 + Expr::pow(a, 2.0), p)
        }
    }
}

fn leaf<R: Rng>(rng: &mut R, dim: usize) -> Expr {
    let v = Expr::var(rng.gen_range(0..dim));
    let c: f64 = rng.gen_range(-1.5..1.5);
    if rng.gen_bool(0.5) {
        c * v
    } else {
        v + c
    }
}

/// Uniform point in `[lo, hi]^dim`.
pub fn point<R: Rng>(rng: &mut R, dim: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(lo..hi)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_expressions_evaluate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let e = smooth_expr(&mut rng, 3, 4);
            let p = point(&mut rng, 3, -1.0, 1.0);
            assert!(e.eval(&p).unwrap().is_finite());
        }
    }
}

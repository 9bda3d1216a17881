//! Seeded random product specs, conformal factors and vector fields.
//!
//! Specs live on `[0.2, 1.2]^n` and are generic for their kind: twists that
//! may depend on more coordinates do so non-separably, and distinct fibers
//! get unrelated warping functions, so every flag the kind does not force
//! fails by a wide margin.

use rand::Rng;

use crate::calculus::VectorField;
use crate::chart::Chart;
use crate::linalg::SymMat;
use crate::scalar::Expr;

use super::{Kind, TwistedSpec};

pub const DOMAIN: (f64, f64) = (0.2, 1.2);

/// Random partition of `0..n` into at least two contiguous blocks.
pub fn blocks<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec<usize>> {
    assert!(n >= 2);
    loop {
        let mut out = vec![vec![0]];
        for a in 1..n {
            if rng.gen_bool(0.6) {
                out.push(vec![a]);
            } else {
                out.last_mut().expect("non-empty").push(a);
            }
        }
        if out.len() >= 2 {
            return out;
        }
    }
}

fn coef<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let c = rng.gen_range(lo..hi);
    if rng.gen_bool(0.5) {
        c
    } else {
        -c
    }
}

/// SPD factor metric on the coordinates of `block`: diagonal `1 + a x²`
/// with small bilinear off-diagonal terms.
fn factor<R: Rng>(rng: &mut R, block: &[usize]) -> SymMat {
    let d = block.len();
    let mut m = vec![vec![Expr::zero(); d]; d];
    for a in 0..d {
        let x = Expr::var(block[a]);
        m[a][a] = 1.0 + rng.gen_range(0.1..0.8) * Expr::pow(x, 2.0);
        for b in 0..a {
            let off = coef(rng, 0.02, 0.15) * (Expr::var(block[a]) * Expr::var(block[b]));
            m[a][b] = off.clone();
            m[b][a] = off;
        }
    }
    m
}

/// `Σ a_b x_b + c x_{b0}²` over the coordinates of `block`.
fn linear_quadratic<R: Rng>(rng: &mut R, block: &[usize]) -> Expr {
    let lin = Expr::sum(block.iter().map(|&b| coef(rng, 0.1, 0.8) * Expr::var(b)));
    lin + coef(rng, 0.1, 0.5) * Expr::pow(Expr::var(block[0]), 2.0)
}

/// Random spec of the given kind with total dimension `n`.
pub fn spec<R: Rng>(rng: &mut R, kind: Kind, n: usize) -> TwistedSpec {
    let blocks = blocks(rng, n);
    let chart = Chart::with_domain(vec![DOMAIN; n])
        .and_then(|c| c.with_blocks(blocks.clone(), false))
        .expect("valid random chart");
    let factors = blocks.iter().map(|b| factor(rng, b)).collect();
    let k = blocks.len() - 1;
    let base = &blocks[0];
    let mut twists = vec![Expr::one(); k + 1];
    match kind {
        Kind::Product => {}
        Kind::Warped => {
            for t in twists.iter_mut().skip(1) {
                *t = linear_quadratic(rng, base).exp();
            }
        }
        Kind::QuasiWarped => {
            for i in 1..=k {
                let mixed = coef(rng, 0.4, 0.9) * (Expr::var(base[0]) * Expr::var(blocks[i][0]));
                twists[i] = (linear_quadratic(rng, base) + mixed).exp();
            }
        }
        Kind::Twisted => {
            // Each twist couples its own block to the next one, cyclically,
            // with coupling strengths kept well apart.
            let strengths: Vec<f64> = (0..=k)
                .map(|i| (0.3 + 0.35 * i as f64) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
                .collect();
            for i in 0..=k {
                let next = &blocks[(i + 1) % (k + 1)];
                let mixed = strengths[i] * (Expr::var(blocks[i][0]) * Expr::var(next[0]));
                let drift = if i == 0 {
                    Expr::zero()
                } else {
                    linear_quadratic(rng, base)
                };
                twists[i] = (drift + mixed).exp();
            }
        }
    }
    TwistedSpec::new(kind, chart, factors, twists).expect("random spec satisfies its kind")
}

/// Flags a generic spec of this kind and number of fibers must carry, and
/// no others.
pub fn expected_flags(kind: Kind, fibers: usize) -> Vec<&'static str> {
    let single = fibers == 1;
    let mut v: Vec<&'static str> = match kind {
        Kind::Product => vec!["TP", "WP", "QW", "CQW", "CQW0", "CWP", "CP"],
        Kind::Warped => vec!["TP", "WP", "QW", "CQW", "CWP"],
        Kind::QuasiWarped => vec!["TP", "QW", "CQW"],
        Kind::Twisted => vec!["TP"],
    };
    if single {
        match kind {
            Kind::Warped => v.extend(["CQW0", "CP"]),
            Kind::QuasiWarped => v.push("CQW0"),
            Kind::Twisted => v.extend(["CQW", "CQW0"]),
            Kind::Product => {}
        }
    }
    let order = ["TP", "WP", "QW", "CQW", "CQW0", "CWP", "CP"];
    v.sort_by_key(|f| order.iter().position(|o| o == f));
    v.dedup();
    v
}

/// Positive conformal factor `exp(Σ a_k u_k + b u_i u_j)` in the
/// coordinates `u` rescaled to `[-1, 1]` on the chart box.
pub fn positive_factor<R: Rng>(rng: &mut R, chart: &Chart) -> Expr {
    let u: Vec<Expr> = chart
        .domain()
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| (Expr::var(k) - 0.5 * (a + b)) * (2.0 / (b - a)))
        .collect();
    let n = u.len();
    let lin = Expr::sum(u.iter().map(|uk| coef(rng, 0.05, 0.7) * uk.clone()));
    let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
    (lin + coef(rng, 0.05, 0.5) * (u[i].clone() * u[j].clone())).exp()
}

/// Vector field with components of the form `a + b x_j + c x_k x_l + d sin(x_m)`.
pub fn vector_field<R: Rng>(rng: &mut R, n: usize) -> VectorField {
    VectorField::new(
        (0..n)
            .map(|_| {
                let mut pick = || Expr::var(rng.gen_range(0..n));
                let (xj, xk, xl, xm) = (pick(), pick(), pick(), pick());
                rng.gen_range(-1.0..1.0)
                    + rng.gen_range(-1.0..1.0) * xj
                    + rng.gen_range(-1.0..1.0) * (xk * xl)
                    + rng.gen_range(-1.0..1.0) * xm.sin()
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn partitions_cover_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 2..=4 {
            for _ in 0..20 {
                let b = blocks(&mut rng, n);
                assert!(b.len() >= 2);
                assert_eq!(b.concat(), (0..n).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn expected_sets_respect_implications() {
        for kind in [Kind::Product, Kind::Warped, Kind::QuasiWarped, Kind::Twisted] {
            for k in 1..=3 {
                let f = expected_flags(kind, k);
                let has = |s| f.contains(&s);
                assert!(!has("WP") || has("TP"));
                assert!(!has("QW") || has("TP"));
                assert!(!has("CP") || has("CWP"));
            }
        }
    }
}

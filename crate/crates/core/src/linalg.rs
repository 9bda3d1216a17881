//! Small symbolic matrix helpers.

use std::collections::HashMap;

use crate::scalar::Expr;

pub type SymMat = Vec<Vec<Expr>>;

/// Connected components of the nonzero pattern of a square matrix.
fn components(m: &SymMat) -> Vec<Vec<usize>> {
    let n = m.len();
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![s];
        comp[s] = id;
        let mut k = 0;
        while k < members.len() {
            let i = members[k];
            for j in 0..n {
                if comp[j] == usize::MAX && (!m[i][j].is_zero() || !m[j][i].is_zero()) {
                    comp[j] = id;
                    members.push(j);
                }
            }
            k += 1;
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Determinant of the submatrix on `rows × cols` by cofactor expansion along
/// the first row, memoized on the column set.
fn minor_det(m: &SymMat, rows: &[usize], cols: &[usize], memo: &mut HashMap<(Vec<usize>, Vec<usize>), Expr>) -> Expr {
    match rows.len() {
        0 => return Expr::one(),
        1 => return m[rows[0]][cols[0]].clone(),
        2 => return &m[rows[0]][cols[0]] * &m[rows[1]][cols[1]] - &m[rows[0]][cols[1]] * &m[rows[1]][cols[0]],
        _ => {}
    }
    let key = (rows.to_vec(), cols.to_vec());
    if let Some(d) = memo.get(&key) {
        return d.clone();
    }
    let r0 = rows[0];
    let mut acc = Expr::zero();
    for (k, &c) in cols.iter().enumerate() {
        if m[r0][c].is_zero() {
            continue;
        }
        let sub_cols: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
        let term = &m[r0][c] * minor_det(m, &rows[1..], &sub_cols, memo);
        acc = if k % 2 == 0 { acc + term } else { acc - term };
    }
    memo.insert(key, acc.clone());
    acc
}

pub fn det(m: &SymMat) -> Expr {
    let comps = components(m);
    let mut memo = HashMap::new();
    comps
        .iter()
        .map(|c| minor_det(m, c, c, &mut memo))
        .fold(Expr::one(), |a, b| a * b)
}

/// Symbolic inverse via the adjugate, applied separately to each block of
/// the sparsity pattern so diagonal and block-diagonal inputs stay small.
pub fn inverse(m: &SymMat) -> SymMat {
    let n = m.len();
    let mut inv = vec![vec![Expr::zero(); n]; n];
    let mut memo = HashMap::new();
    for comp in components(m) {
        if comp.len() == 1 {
            let i = comp[0];
            inv[i][i] = m[i][i].clone().recip();
            continue;
        }
        let d = minor_det(m, &comp, &comp, &mut memo);
        for (a, &i) in comp.iter().enumerate() {
            for (b, &j) in comp.iter().enumerate() {
                // inv[i][j] = (-1)^(a+b) M_{ji} / det
                let rows: Vec<usize> = comp.iter().copied().filter(|&x| x != j).collect();
                let cols: Vec<usize> = comp.iter().copied().filter(|&x| x != i).collect();
                let minor = minor_det(m, &rows, &cols, &mut memo);
                let signed = if (a + b) % 2 == 0 { minor } else { -minor };
                inv[i][j] = signed / d.clone();
            }
        }
    }
    inv
}

pub fn mat_vec(m: &SymMat, v: &[Expr]) -> Vec<Expr> {
    m.iter()
        .map(|row| Expr::sum(row.iter().zip(v).map(|(a, b)| a * b)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> Expr {
        Expr::var(i)
    }

    #[test]
    fn inverse_of_dense_three_by_three() {
        let m: SymMat = vec![
            vec![x(0) + 2.0, x(1), Expr::constant(0.5)],
            vec![x(1), Expr::constant(3.0), x(0)],
            vec![Expr::constant(0.5), x(0), x(1) * x(1) + 1.0],
        ];
        let inv = inverse(&m);
        let p = [0.3, 0.7];
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3)
                    .map(|k| m[i][k].eval(&p).unwrap() * inv[k][j].eval(&p).unwrap())
                    .sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn block_diagonal_inverse_stays_blockwise() {
        let m: SymMat = vec![
            vec![x(0), Expr::zero(), Expr::zero()],
            vec![Expr::zero(), Expr::one(), x(0)],
            vec![Expr::zero(), x(0), Expr::constant(4.0)],
        ];
        let inv = inverse(&m);
        assert!(inv[0][1].is_zero() && inv[2][0].is_zero());
        assert_eq!(inv[0][0].eval(&[2.0]).unwrap(), 0.5);
        assert!((det(&m).eval(&[1.0]).unwrap() - 3.0).abs() < 1e-15);
    }
}

//! Dense linear algebra: exact elimination over a [`Field`] and complex
//! null spaces through nalgebra's SVD.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::field::Field;

/// Row-reduces `rows` in place to reduced echelon form and returns the pivot
/// columns.
pub fn rref<F: Field>(field: &F, rows: &mut Vec<Vec<F::Elem>>, ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut top = 0;
    for col in 0..ncols {
        if top == rows.len() {
            break;
        }
        let Some(p) = (top..rows.len()).find(|&i| !field.is_zero(&rows[i][col])) else {
            continue;
        };
        rows.swap(top, p);
        let inv = field.inv(&rows[top][col]).expect("nonzero pivot");
        for x in rows[top].iter_mut().skip(col) {
            *x = field.mul(x, &inv);
        }
        let pivot_row = rows[top].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == top || field.is_zero(&row[col]) {
                continue;
            }
            let factor = row[col].clone();
            for (x, pv) in row.iter_mut().zip(&pivot_row).skip(col) {
                if !field.is_zero(pv) {
                    *x = field.sub(x, &field.mul(&factor, pv));
                }
            }
        }
        pivots.push(col);
        top += 1;
    }
    pivots
}

/// Rank by forward elimination (no back substitution).
pub fn rank<F: Field>(field: &F, mut rows: Vec<Vec<F::Elem>>, ncols: usize) -> usize {
    let mut r = 0;
    for col in 0..ncols {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&i| !field.is_zero(&rows[i][col])) else {
            continue;
        };
        rows.swap(r, p);
        let inv = field.inv(&rows[r][col]).expect("nonzero pivot");
        let (head, tail) = rows.split_at_mut(r + 1);
        let pivot_row = &head[r];
        for row in tail.iter_mut() {
            if field.is_zero(&row[col]) {
                continue;
            }
            let factor = field.mul(&row[col], &inv);
            for (x, pv) in row.iter_mut().zip(pivot_row).skip(col) {
                if !field.is_zero(pv) {
                    *x = field.sub(x, &field.mul(&factor, pv));
                }
            }
        }
        r += 1;
    }
    r
}

/// Basis of the right null space `{v : rows * v = 0}`.
pub fn kernel_basis<F: Field>(field: &F, rows: &[Vec<F::Elem>], ncols: usize) -> Vec<Vec<F::Elem>> {
    let mut m = rows.to_vec();
    let pivots = rref(field, &mut m, ncols);
    let mut is_pivot = vec![false; ncols];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let mut basis = Vec::new();
    for free in (0..ncols).filter(|&c| !is_pivot[c]) {
        let mut v = vec![field.zero(); ncols];
        v[free] = field.one();
        for (row, &p) in m.iter().zip(&pivots) {
            v[p] = field.neg(&row[free]);
        }
        basis.push(v);
    }
    basis
}

pub fn to_dmatrix(rows: &[Vec<Complex64>], ncols: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<Complex64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Smallest over largest singular value; 0 for a zero matrix.
pub fn inverse_condition(m: &DMatrix<Complex64>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    }
}

/// Complex null space of a `rows x ncols` matrix.
///
/// With `dim = Some(k)` the right singular vectors of the `k` smallest
/// singular values are returned; otherwise every singular value below
/// `rel_tol * sigma_max` counts as zero. Returns the basis (orthonormal) and
/// the full list of singular values, padded with zeros up to `ncols`.
pub fn complex_kernel(
    rows: &[Vec<Complex64>],
    ncols: usize,
    dim: Option<usize>,
    rel_tol: f64,
) -> (Vec<Vec<Complex64>>, Vec<f64>) {
    let nrows = rows.len().max(ncols);
    // zero padding gives a square matrix, so V is complete
    let mut m = DMatrix::<Complex64>::zeros(nrows, ncols);
    for (i, row) in rows.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            m[(i, j)] = x;
        }
    }
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let smax = sv.first().copied().unwrap_or(0.0);
    let k = match dim {
        Some(k) => k.min(ncols),
        None => sv.iter().filter(|&&s| s <= rel_tol * smax).count(),
    };
    let basis = order[ncols - k..]
        .iter()
        .map(|&i| (0..ncols).map(|j| v_t[(i, j)].conj()).collect())
        .collect();
    (basis, sv)
}

/// Solves `A x = b` for square complex `A` by LU; `None` if singular.
pub fn solve(a: DMatrix<Complex64>, b: &[Complex64]) -> Option<Vec<Complex64>> {
    let rhs = nalgebra::DVector::from_column_slice(b);
    a.lu().solve(&rhs).map(|x| x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{PrimeField, Rationals};
    use num_rational::BigRational;

    #[test]
    fn rank_and_kernel_over_fp() {
        let f = PrimeField::new(101);
        let rows = vec![vec![1, 2, 3], vec![2, 4, 6], vec![0, 1, 1]];
        assert_eq!(rank(&f, rows.clone(), 3), 2);
        let k = kernel_basis(&f, &rows, 3);
        assert_eq!(k.len(), 1);
        for row in &rows {
            let s = row.iter().zip(&k[0]).fold(0, |acc, (a, b)| f.add(&acc, &f.mul(a, b)));
            assert_eq!(s, 0);
        }
    }

    #[test]
    fn rank_over_rationals() {
        let q = Rationals;
        let r = |a: i64| BigRational::from_integer(a.into());
        let rows = vec![vec![r(1), r(1)], vec![r(1), r(-1)], vec![r(2), r(0)]];
        assert_eq!(rank(&q, rows, 2), 2);
    }

    #[test]
    fn complex_kernel_of_rank_one() {
        let c = |x: f64| Complex64::new(x, 0.0);
        let rows = vec![vec![c(1.0), c(1.0), c(0.0)]];
        let (k, sv) = complex_kernel(&rows, 3, None, 1e-12);
        assert_eq!(k.len(), 2);
        assert_eq!(sv.len(), 3);
        for v in &k {
            assert!((v[0] + v[1]).norm() < 1e-12);
        }
    }
}

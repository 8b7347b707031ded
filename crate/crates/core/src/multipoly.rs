//! Multihomogeneous forms on `P^{r_1} x ... x P^{r_n}`.
//!
//! Monomial order: factors in index order with factor 0 most significant;
//! inside a factor, exponent vectors `(e_0, ..., e_r)` in descending
//! lexicographic order. Affine charts fix the last homogeneous coordinate of
//! each factor to 1, so a point stores `r_i` affine coordinates per factor.
//!
//! Coordinates are flattened factor by factor. "Homogeneous" routines work on
//! all `sum (r_i + 1)` coordinates; "affine" routines differentiate only with
//! respect to the first `r_i` coordinates of each factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::formats::Format;

/// Affine point: one coordinate vector of length `r_i` per factor.
pub type AffinePoint<T> = Vec<Vec<T>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarKind {
    Fp { prime: u64 },
    Rational,
    Complex,
}

#[derive(Debug, Clone)]
pub struct MonomialBasis {
    format: Format,
    /// Offset of factor `i` in the flattened homogeneous coordinates.
    offsets: Vec<usize>,
    nvars: usize,
    exps: Vec<u32>,
    /// Multinomial coefficient of each factor, `len * n` entries.
    weights: Vec<u64>,
    len: usize,
}

fn factor_exponents(r: usize, d: usize) -> Vec<Vec<u32>> {
    fn rec(vars: usize, d: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if vars == 1 {
            prefix.push(d);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=d).rev() {
            prefix.push(e);
            rec(vars - 1, d - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(r + 1, d as u32, &mut Vec::new(), &mut out);
    out
}

fn multinomial(exps: &[u32]) -> u64 {
    let mut total = 0u32;
    let mut acc: u128 = 1;
    for &e in exps {
        for j in 1..=e {
            total += 1;
            acc = acc * total as u128 / j as u128;
        }
    }
    u64::try_from(acc).expect("multinomial coefficient exceeds 64 bits")
}

/// Canonical monomial basis of `O(d_1, ..., d_n)`.
pub fn basis(format: &Format) -> Result<MonomialBasis> {
    MonomialBasis::new(format)
}

impl MonomialBasis {
    pub fn new(format: &Format) -> Result<Self> {
        let len = format.ncoeff_usize()?;
        let per_factor: Vec<Vec<Vec<u32>>> =
            format.r().iter().zip(format.d()).map(|(&r, &d)| factor_exponents(r, d)).collect();
        let mut offsets = Vec::with_capacity(format.n());
        let mut nvars = 0;
        for &r in format.r() {
            offsets.push(nvars);
            nvars += r + 1;
        }
        let n = format.n();
        let mut exps = Vec::with_capacity(len * nvars);
        let mut weights = Vec::with_capacity(len * n);
        let factor_weights: Vec<Vec<u64>> =
            per_factor.iter().map(|fe| fe.iter().map(|e| multinomial(e)).collect()).collect();
        let mut idx = vec![0usize; n];
        for _ in 0..len {
            for i in 0..n {
                exps.extend_from_slice(&per_factor[i][idx[i]]);
                weights.push(factor_weights[i][idx[i]]);
            }
            // mixed-radix increment, last factor fastest
            for i in (0..n).rev() {
                idx[i] += 1;
                if idx[i] < per_factor[i].len() {
                    break;
                }
                idx[i] = 0;
            }
        }
        Ok(MonomialBasis { format: format.clone(), offsets, nvars, exps, weights, len })
    }

    pub fn format(&self) -> &Format {
        &self.format
    }
    pub fn len(&self) -> usize {
        self.len
    }
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
    /// Number of homogeneous coordinates, `sum (r_i + 1)`.
    pub fn nvars(&self) -> usize {
        self.nvars
    }
    /// Number of affine coordinates, `sum r_i`.
    pub fn naffine(&self) -> usize {
        self.format.sum_r()
    }
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Flattened exponents of monomial `m`.
    pub fn exponents(&self, m: usize) -> &[u32] {
        &self.exps[m * self.nvars..(m + 1) * self.nvars]
    }

    /// Product of the per-factor multinomial coefficients of monomial `m`.
    pub fn weight<F: Field>(&self, field: &F, m: usize) -> F::Elem {
        let n = self.format.n();
        self.weights[m * n..(m + 1) * n]
            .iter()
            .fold(field.one(), |acc, &w| field.mul(&acc, &field.from_u64(w)))
    }

    pub fn weight_f64(&self, m: usize) -> f64 {
        let n = self.format.n();
        self.weights[m * n..(m + 1) * n].iter().map(|&w| w as f64).product()
    }

    /// Flattened index of the affine variable `(factor, j)` among the
    /// homogeneous coordinates.
    pub fn affine_to_homogeneous(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.naffine());
        for (i, &r) in self.format.r().iter().enumerate() {
            out.extend((0..r).map(|j| self.offsets[i] + j));
        }
        out
    }

    /// Appends the chart coordinate 1 to every factor and flattens.
    pub fn homogenize<F: Field>(&self, field: &F, point: &[Vec<F::Elem>]) -> Vec<F::Elem> {
        debug_assert_eq!(point.len(), self.format.n());
        let mut y = Vec::with_capacity(self.nvars);
        for (i, coords) in point.iter().enumerate() {
            debug_assert_eq!(coords.len(), self.format.r()[i]);
            y.extend(coords.iter().cloned());
            y.push(field.one());
        }
        y
    }

    fn power_tables<F: Field>(&self, field: &F, y: &[F::Elem]) -> Vec<Vec<F::Elem>> {
        let mut tables = Vec::with_capacity(self.nvars);
        for (i, &r) in self.format.r().iter().enumerate() {
            let d = self.format.d()[i];
            for j in 0..=r {
                let x = &y[self.offsets[i] + j];
                let mut t = Vec::with_capacity(d + 1);
                t.push(field.one());
                for e in 1..=d {
                    let next = field.mul(&t[e - 1], x);
                    t.push(next);
                }
                tables.push(t);
            }
        }
        tables
    }

    /// Values of every monomial at a homogeneous point.
    pub fn eval_row_h<F: Field>(&self, field: &F, y: &[F::Elem]) -> Vec<F::Elem> {
        let pw = self.power_tables(field, y);
        (0..self.len)
            .map(|m| {
                self.exponents(m)
                    .iter()
                    .enumerate()
                    .fold(field.one(), |acc, (v, &e)| field.mul(&acc, &pw[v][e as usize]))
            })
            .collect()
    }

    /// `d(monomial)/d y_v` for each homogeneous coordinate `v` in `vars`.
    fn partial_rows_for<F: Field>(&self, field: &F, y: &[F::Elem], vars: &[usize]) -> Vec<Vec<F::Elem>> {
        let pw = self.power_tables(field, y);
        let mut rows = vec![Vec::with_capacity(self.len); vars.len()];
        for m in 0..self.len {
            let ex = self.exponents(m);
            for (row, &v) in rows.iter_mut().zip(vars) {
                let ev = ex[v];
                if ev == 0 {
                    row.push(field.zero());
                    continue;
                }
                let mut acc = field.mul(&field.from_u64(ev as u64), &pw[v][ev as usize - 1]);
                for (u, &e) in ex.iter().enumerate() {
                    if u != v && e != 0 {
                        acc = field.mul(&acc, &pw[u][e as usize]);
                    }
                }
                row.push(acc);
            }
        }
        rows
    }

    /// One row per homogeneous coordinate.
    pub fn gradient_rows_h<F: Field>(&self, field: &F, y: &[F::Elem]) -> Vec<Vec<F::Elem>> {
        let vars: Vec<usize> = (0..self.nvars).collect();
        self.partial_rows_for(field, y, &vars)
    }

    /// Monomial values at an affine point, in basis order.
    pub fn eval_monomial_row<F: Field>(&self, field: &F, point: &[Vec<F::Elem>]) -> Vec<F::Elem> {
        self.eval_row_h(field, &self.homogenize(field, point))
    }

    /// One row per affine variable: the partial derivatives of every monomial.
    pub fn eval_partial_rows<F: Field>(&self, field: &F, point: &[Vec<F::Elem>]) -> Vec<Vec<F::Elem>> {
        let y = self.homogenize(field, point);
        self.partial_rows_for(field, &y, &self.affine_to_homogeneous())
    }

    /// Value of `sum_m c_m x^m` at a homogeneous point.
    pub fn value_h<F: Field>(&self, field: &F, coeffs: &[F::Elem], y: &[F::Elem]) -> F::Elem {
        dot(field, coeffs, &self.eval_row_h(field, y))
    }

    /// Homogeneous gradient of a section.
    pub fn gradient_h<F: Field>(&self, field: &F, coeffs: &[F::Elem], y: &[F::Elem]) -> Vec<F::Elem> {
        self.gradient_rows_h(field, y).iter().map(|row| dot(field, coeffs, row)).collect()
    }

    /// Homogeneous Hessian (`nvars x nvars`) of a section.
    pub fn hessian_h<F: Field>(&self, field: &F, coeffs: &[F::Elem], y: &[F::Elem]) -> Vec<Vec<F::Elem>> {
        let pw = self.power_tables(field, y);
        let nv = self.nvars;
        let mut h = vec![vec![field.zero(); nv]; nv];
        for (m, c) in coeffs.iter().enumerate() {
            if field.is_zero(c) {
                continue;
            }
            let ex = self.exponents(m);
            for u in 0..nv {
                if ex[u] == 0 {
                    continue;
                }
                for v in u..nv {
                    let term = if u == v {
                        let e = ex[u];
                        if e < 2 {
                            continue;
                        }
                        let mut acc = field.mul(&field.from_u64((e * (e - 1)) as u64), &pw[u][e as usize - 2]);
                        for (w, &ew) in ex.iter().enumerate() {
                            if w != u && ew != 0 {
                                acc = field.mul(&acc, &pw[w][ew as usize]);
                            }
                        }
                        acc
                    } else {
                        if ex[v] == 0 {
                            continue;
                        }
                        let (eu, ev) = (ex[u], ex[v]);
                        let mut acc = field.mul(&field.from_u64(eu as u64 * ev as u64), &pw[u][eu as usize - 1]);
                        acc = field.mul(&acc, &pw[v][ev as usize - 1]);
                        for (w, &ew) in ex.iter().enumerate() {
                            if w != u && w != v && ew != 0 {
                                acc = field.mul(&acc, &pw[w][ew as usize]);
                            }
                        }
                        acc
                    };
                    let add = field.mul(c, &term);
                    h[u][v] = field.add(&h[u][v], &add);
                }
            }
        }
        for u in 0..nv {
            for v in 0..u {
                h[u][v] = h[v][u].clone();
            }
        }
        h
    }

    /// Coefficients of `scalar * l_1^{d_1} ... l_n^{d_n}` including the
    /// multinomial weights, so that evaluation reproduces the product of
    /// powers of the linear forms.
    pub fn expand_rank_one<F: Field>(&self, field: &F, scalar: &F::Elem, linforms: &[Vec<F::Elem>]) -> Result<Vec<F::Elem>> {
        if linforms.len() != self.format.n()
            || linforms.iter().zip(self.format.r()).any(|(l, &r)| l.len() != r + 1)
        {
            return Err(Error::Precondition(format!(
                "linear forms do not match format {}",
                self.format
            )));
        }
        let y: Vec<F::Elem> = linforms.iter().flatten().cloned().collect();
        let row = self.eval_row_h(field, &y);
        Ok(row
            .into_iter()
            .enumerate()
            .map(|(m, v)| field.mul(&field.mul(scalar, &self.weight(field, m)), &v))
            .collect())
    }
}

pub fn dot<F: Field>(field: &F, a: &[F::Elem], b: &[F::Elem]) -> F::Elem {
    a.iter().zip(b).fold(field.zero(), |acc, (x, y)| field.add(&acc, &field.mul(x, y)))
}

/// A multihomogeneous form as a coefficient vector in basis order.
#[derive(Debug, Clone, PartialEq)]
pub struct Section<T> {
    pub format: Format,
    pub coeffs: Vec<T>,
}

impl<T> Section<T> {
    pub fn new(format: Format, coeffs: Vec<T>) -> Result<Self> {
        let n = format.ncoeff_usize()?;
        if coeffs.len() != n {
            return Err(Error::Precondition(format!(
                "{} coefficients for format {format} with {n} monomials",
                coeffs.len()
            )));
        }
        Ok(Section { format, coeffs })
    }
}

impl Section<num_complex::Complex64> {
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Points of a product of projective spaces, stored in the affine chart.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfig<T> {
    pub format: Format,
    pub points: Vec<AffinePoint<T>>,
    pub kind: ScalarKind,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Complexes, PrimeField};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rand_c(rng: &mut ChaCha8Rng) -> Complex64 {
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    #[test]
    fn binary_quadratic_basis() {
        let b = basis(&Format::veronese(1, 2).unwrap()).unwrap();
        let e: Vec<&[u32]> = (0..b.len()).map(|m| b.exponents(m)).collect();
        assert_eq!(e, vec![&[2, 0][..], &[1, 1], &[0, 2]]);
    }

    #[test]
    fn basis_sizes() {
        let b = basis(&"r=1;d=1,1".parse().unwrap()).unwrap();
        assert_eq!(b.len(), 4);
        // x0*y0, x0*y1, x1*y0, x1*y1
        assert_eq!(b.exponents(1), &[1, 0, 0, 1]);
        assert_eq!(b.exponents(2), &[0, 1, 1, 0]);
        assert_eq!(basis(&"r=2;d=5".parse().unwrap()).unwrap().len(), 21);
    }

    #[test]
    fn eval_special_points() {
        let f = PrimeField::default();
        let b = basis(&"r=2,1;d=2,3".parse::<Format>().unwrap()).unwrap();
        let ones = vec![vec![1u64, 1], vec![1]];
        assert!(b.eval_monomial_row(&f, &ones).iter().all(|&v| v == 1));
        let origin = vec![vec![0u64, 0], vec![0]];
        let row = b.eval_monomial_row(&f, &origin);
        let hits: Vec<usize> = (0..b.len()).filter(|&m| row[m] != 0).collect();
        assert_eq!(hits.len(), 1);
        assert_eq!(b.exponents(hits[0]), &[0, 0, 2, 0, 3]);
    }

    #[test]
    fn eval_matches_product_oracle_over_fp() {
        let f = PrimeField::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fmt: Format = "r=1,2;d=3,2".parse().unwrap();
        let b = basis(&fmt).unwrap();
        let pt: AffinePoint<u64> =
            fmt.r().iter().map(|&r| (0..r).map(|_| rng.random_range(1..f.modulus())).collect()).collect();
        let row = b.eval_monomial_row(&f, &pt);
        let y = b.homogenize(&f, &pt);
        for m in 0..b.len() {
            let mut v = 1u64;
            for (k, &e) in b.exponents(m).iter().enumerate() {
                for _ in 0..e {
                    v = v * y[k] % f.modulus();
                }
            }
            assert_eq!(row[m], v);
        }
    }

    #[test]
    fn partial_rows_of_linear_format_select_coordinates() {
        let f = PrimeField::default();
        let b = basis(&Format::veronese(2, 1).unwrap()).unwrap();
        let rows = b.eval_partial_rows(&f, &[vec![5, 7]]);
        assert_eq!(rows, vec![vec![1, 0, 0], vec![0, 1, 0]]);
    }

    #[test]
    fn partial_rows_match_finite_differences() {
        let cf = Complexes;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fmt: Format = "r=1,2;d=3,4".parse().unwrap();
        let b = basis(&fmt).unwrap();
        let pt: AffinePoint<Complex64> =
            fmt.r().iter().map(|&r| (0..r).map(|_| rand_c(&mut rng)).collect()).collect();
        let rows = b.eval_partial_rows(&cf, &pt);
        let h = 1e-5;
        let mut var = 0;
        for i in 0..fmt.n() {
            for j in 0..fmt.r()[i] {
                let mut plus = pt.clone();
                let mut minus = pt.clone();
                plus[i][j] += h;
                minus[i][j] -= h;
                let rp = b.eval_monomial_row(&cf, &plus);
                let rm = b.eval_monomial_row(&cf, &minus);
                for m in 0..b.len() {
                    let fd = (rp[m] - rm[m]) / (2.0 * h);
                    let err = (fd - rows[var][m]).norm();
                    assert!(err <= 1e-6 * rows[var][m].norm().max(1.0), "var {var} mono {m}: {err}");
                }
                var += 1;
            }
        }
    }

    #[test]
    fn expansion_examples() {
        let cf = Complexes;
        let b = basis(&Format::veronese(1, 2).unwrap()).unwrap();
        let coeffs = b.expand_rank_one(&cf, &c(1.0, 0.0), &[vec![c(1.0, 0.0), c(1.0, 0.0)]]).unwrap();
        assert_eq!(coeffs, vec![c(1.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);

        let fmt: Format = "r=1,2;d=2,3".parse().unwrap();
        let b = basis(&fmt).unwrap();
        let e0 = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]];
        let coeffs = b.expand_rank_one(&cf, &c(1.0, 0.0), &e0).unwrap();
        assert_eq!(coeffs[0], c(1.0, 0.0));
        assert!(coeffs[1..].iter().all(|z| z.norm() == 0.0));
        assert!(b.expand_rank_one(&cf, &c(1.0, 0.0), &e0[..1]).is_err());
    }

    #[test]
    fn hessian_of_xy_on_conics() {
        let cf = Complexes;
        let b = basis(&Format::veronese(2, 2).unwrap()).unwrap();
        // x0*x1 has exponent (1,1,0)
        let mut coeffs = vec![c(0.0, 0.0); b.len()];
        let m = (0..b.len()).find(|&m| b.exponents(m) == [1, 1, 0]).unwrap();
        coeffs[m] = c(1.0, 0.0);
        let y = b.homogenize(&cf, &[vec![c(0.0, 0.0), c(0.0, 0.0)]]);
        let h = b.hessian_h(&cf, &coeffs, &y);
        assert_eq!(h[0][1], c(1.0, 0.0));
        assert_eq!(h[1][0], c(1.0, 0.0));
        assert_eq!(h[0][0], c(0.0, 0.0));
    }
}

//! Double-point interpolation and Terracini secant verdicts.
//!
//! A double point imposes `1 + sum r_i` linear conditions on sections: the
//! value and every affine partial derivative vanish. All dimensions here are
//! vector-space dimensions of the space of sections, so the expected
//! dimension is `max(0, ncoeff - conditions)` and no projective `-1` enters.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Complexes, Field, PrimeField, Rationals, DEFAULT_PRIME, FALLBACK_PRIME};
use crate::formats::Format;
use crate::linalg;
use crate::multipoly::{AffinePoint, MonomialBasis, ScalarKind, Section};
use crate::seed::SeedSplitter;

/// Above this many monomials rational elimination is refused.
pub const RATIONAL_LIMIT: usize = 500;
/// Relative singular-value threshold for complex null spaces.
pub const KERNEL_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SchemeShape {
    /// Double points in general position.
    pub free: usize,
    /// Double points on the divisor `D` of type `(0, ..., 0, 1)`.
    pub on_divisor: usize,
}

impl SchemeShape {
    pub fn free(count: usize) -> Self {
        SchemeShape { free: count, on_divisor: 0 }
    }
    pub fn total(&self) -> usize {
        self.free + self.on_divisor
    }
}

/// Double points, some of them constrained to a common last-factor
/// coordinate (the divisor `D`).
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleScheme<T> {
    pub free: Vec<AffinePoint<T>>,
    pub on_divisor: Vec<AffinePoint<T>>,
}

impl<T: Clone + PartialEq> DoubleScheme<T> {
    pub fn empty() -> Self {
        DoubleScheme { free: Vec::new(), on_divisor: Vec::new() }
    }

    pub fn shape(&self) -> SchemeShape {
        SchemeShape { free: self.free.len(), on_divisor: self.on_divisor.len() }
    }

    pub fn points(&self) -> impl Iterator<Item = &AffinePoint<T>> {
        self.free.iter().chain(&self.on_divisor)
    }

    /// All divisor points share their last-factor coordinates.
    pub fn divisor_is_consistent(&self) -> bool {
        self.on_divisor.windows(2).all(|w| w[0].last() == w[1].last())
    }

    /// Divisor points with the last factor dropped, i.e. as points of `D`.
    pub fn divisor_trace(&self) -> Vec<AffinePoint<T>> {
        self.on_divisor.iter().map(|p| p[..p.len() - 1].to_vec()).collect()
    }
}

fn random_scheme<T: Clone>(
    format: &Format,
    shape: SchemeShape,
    rng: &mut impl Rng,
    mut draw: impl FnMut(&mut dyn rand::RngCore) -> T,
) -> DoubleScheme<T> {
    let mut point = |rng: &mut dyn rand::RngCore, factors: &[usize]| -> AffinePoint<T> {
        factors.iter().map(|&r| (0..r).map(|_| draw(rng)).collect()).collect()
    };
    let free = (0..shape.free).map(|_| point(rng, format.r())).collect();
    let on_divisor = if shape.on_divisor > 0 {
        let last = point(rng, &format.r()[format.n() - 1..]).pop().unwrap();
        (0..shape.on_divisor)
            .map(|_| {
                let mut p = point(rng, &format.r()[..format.n() - 1]);
                p.push(last.clone());
                p
            })
            .collect()
    } else {
        Vec::new()
    };
    DoubleScheme { free, on_divisor }
}

/// Coordinates uniform in `[1, p - 1]`.
pub fn random_scheme_fp(format: &Format, shape: SchemeShape, prime: u64, rng: &mut impl Rng) -> DoubleScheme<u64> {
    random_scheme(format, shape, rng, |r| r.random_range(1..prime))
}

/// Small nonzero integers, for rational elimination.
pub fn random_scheme_rational(format: &Format, shape: SchemeShape, rng: &mut impl Rng) -> DoubleScheme<BigRational> {
    random_scheme(format, shape, rng, |r| {
        let v: i64 = r.random_range(1..=97);
        let s = if r.random_bool(0.5) { -v } else { v };
        BigRational::from_integer(BigInt::from(s))
    })
}

/// Uniform in the unit disc.
pub fn random_unit_disc(rng: &mut dyn rand::RngCore) -> Complex64 {
    loop {
        let re: f64 = rng.random_range(-1.0..1.0);
        let im: f64 = rng.random_range(-1.0..1.0);
        if re * re + im * im < 1.0 {
            return Complex64::new(re, im);
        }
    }
}

pub fn random_scheme_complex(format: &Format, shape: SchemeShape, rng: &mut impl Rng) -> DoubleScheme<Complex64> {
    random_scheme(format, shape, rng, random_unit_disc)
}

/// Interpolation matrix: for every point, its value row followed by one row
/// per affine partial derivative.
pub fn assemble<F: Field>(field: &F, basis: &MonomialBasis, scheme: &DoubleScheme<F::Elem>) -> Vec<Vec<F::Elem>> {
    let mut rows = Vec::with_capacity(scheme.shape().total() * (1 + basis.naffine()));
    for p in scheme.points() {
        rows.push(basis.eval_monomial_row(field, p));
        rows.extend(basis.eval_partial_rows(field, p));
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    /// Dimension equals the expected one; a certificate.
    Expected,
    /// Dimension larger than expected on every trial; probabilistic.
    Deficient,
    /// Dimension below the expected one. Cannot happen for a correct
    /// elimination; kept so that such a bug is visible in reports.
    Exceeds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankBackend {
    PrimeField,
    Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpConfig {
    pub prime: u64,
    pub fallback_prime: u64,
    pub trials: u32,
    pub backend: RankBackend,
}

impl Default for InterpConfig {
    fn default() -> Self {
        InterpConfig { prime: DEFAULT_PRIME, fallback_prime: FALLBACK_PRIME, trials: 3, backend: RankBackend::PrimeField }
    }
}

impl InterpConfig {
    fn prime_for_trial(&self, t: u32) -> u64 {
        if self.trials > 1 && t + 1 == self.trials {
            self.fallback_prime
        } else {
            self.prime
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub format: Format,
    pub scheme: SchemeShape,
    pub ncoeff: usize,
    pub conditions: usize,
    pub rank: usize,
    pub expected_dim: usize,
    pub actual_dim: usize,
    pub status: VerdictStatus,
    pub trials: u32,
    pub scalar: ScalarKind,
    pub confidence: String,
}

impl Verdict {
    fn from_rank(format: &Format, scheme: SchemeShape, ncoeff: usize, conditions: usize, rank: usize) -> Self {
        let expected_dim = ncoeff.saturating_sub(conditions);
        let actual_dim = ncoeff - rank;
        let status = match actual_dim.cmp(&expected_dim) {
            std::cmp::Ordering::Equal => VerdictStatus::Expected,
            std::cmp::Ordering::Greater => VerdictStatus::Deficient,
            std::cmp::Ordering::Less => VerdictStatus::Exceeds,
        };
        Verdict {
            format: format.clone(),
            scheme,
            ncoeff,
            conditions,
            rank,
            expected_dim,
            actual_dim,
            status,
            trials: 1,
            scalar: ScalarKind::Complex,
            confidence: String::new(),
        }
    }

    pub fn is_expected(&self) -> bool {
        self.status == VerdictStatus::Expected
    }

    /// Generic rank `min(ncoeff, conditions)`.
    pub fn expected_rank(&self) -> usize {
        self.ncoeff.min(self.conditions)
    }

    /// Secant reading: the variety is defective iff the rank is short.
    pub fn defective(&self) -> bool {
        self.rank < self.expected_rank()
    }
}

/// Rank of the interpolation matrix of `scheme` over `F_p`.
pub fn rank_fp(basis: &MonomialBasis, scheme: &DoubleScheme<u64>, prime: u64) -> (usize, usize) {
    let f = PrimeField::new(prime);
    let rows = assemble(&f, basis, scheme);
    let n = rows.len();
    (linalg::rank(&f, rows, basis.len()), n)
}

/// Verdict for one explicit scheme over `F_p`.
pub fn sysdim_at(basis: &MonomialBasis, scheme: &DoubleScheme<u64>, prime: u64) -> Verdict {
    let (rank, rows) = rank_fp(basis, scheme, prime);
    let mut v = Verdict::from_rank(basis.format(), scheme.shape(), basis.len(), rows, rank);
    v.scalar = ScalarKind::Fp { prime };
    v.confidence = confidence_note(v.status, 1);
    v
}

fn confidence_note(status: VerdictStatus, trials: u32) -> String {
    match status {
        VerdictStatus::Expected => "certificate: exact full-rank elimination at explicit points".into(),
        VerdictStatus::Deficient => format!("defective (probabilistic): rank short on {trials} independent trial(s)"),
        VerdictStatus::Exceeds => "inconsistent: dimension below generic bound".into(),
    }
}

/// Dimension of sections of `format` through random double points of the
/// given shape, retrying with fresh points (and the fallback prime on the
/// last trial) before reporting a deficiency.
pub fn sysdim(format: &Format, shape: SchemeShape, config: &InterpConfig, seed: SeedSplitter) -> Result<Verdict> {
    if shape.on_divisor > 0 && format.n() < 2 {
        return Err(Error::Precondition("divisor points need at least two factors".into()));
    }
    let basis = MonomialBasis::new(format)?;
    let trials = config.trials.max(1);
    let mut best: Option<Verdict> = None;
    for t in 0..trials {
        let mut rng = seed.child(t as u64).rng();
        let mut v = match config.backend {
            RankBackend::PrimeField => {
                let prime = config.prime_for_trial(t);
                let scheme = random_scheme_fp(format, shape, prime, &mut rng);
                sysdim_at(&basis, &scheme, prime)
            }
            RankBackend::Rational => {
                if basis.len() > RATIONAL_LIMIT {
                    return Err(Error::TooLarge(format!(
                        "rational elimination limited to {RATIONAL_LIMIT} monomials, {format} has {}",
                        basis.len()
                    )));
                }
                let scheme = random_scheme_rational(format, shape, &mut rng);
                let rows = assemble(&Rationals, &basis, &scheme);
                let n = rows.len();
                let rank = linalg::rank(&Rationals, rows, basis.len());
                let mut v = Verdict::from_rank(format, shape, basis.len(), n, rank);
                v.scalar = ScalarKind::Rational;
                v
            }
        };
        v.trials = t + 1;
        v.confidence = confidence_note(v.status, t + 1);
        if v.status != VerdictStatus::Deficient {
            return Ok(v);
        }
        if best.as_ref().is_none_or(|b| v.rank >= b.rank) {
            best = Some(v);
        }
    }
    let mut v = best.expect("at least one trial");
    v.trials = trials;
    v.confidence = confidence_note(v.status, trials);
    Ok(v)
}

/// Terracini: the affine cone over the `k`-th secant variety has dimension
/// equal to the rank of the conditions imposed by `k + 1` general double
/// points.
pub fn secant_dim(format: &Format, k: usize, config: &InterpConfig, seed: SeedSplitter) -> Result<Verdict> {
    sysdim(format, SchemeShape::free(k + 1), config, seed)
}

/// Pseudo-random element of the space of sections through `scheme`, over
/// the complex numbers, normalised to unit coefficient norm.
pub fn kernel_section(format: &Format, scheme: &DoubleScheme<Complex64>, seed: SeedSplitter) -> Result<Section<Complex64>> {
    let basis = MonomialBasis::new(format)?;
    let rows = assemble(&Complexes, &basis, scheme);
    let kernel = if rows.is_empty() {
        (0..basis.len())
            .map(|i| {
                let mut v = vec![Complex64::new(0.0, 0.0); basis.len()];
                v[i] = Complex64::new(1.0, 0.0);
                v
            })
            .collect()
    } else {
        linalg::complex_kernel(&rows, basis.len(), None, KERNEL_REL_TOL).0
    };
    let mut rng = seed.rng();
    let coeffs = random_combination(&kernel, basis.len(), &mut rng, |rng| {
        Complex64::new(gaussian(rng), gaussian(rng))
    }, |a, b| a * b, |a, b| a + b)
    .ok_or(Error::EmptySystem)?;
    let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    Section::new(format.clone(), coeffs.into_iter().map(|c| c / norm).collect())
}

/// Exact counterpart of [`kernel_section`] over `F_p`.
pub fn kernel_section_fp(format: &Format, scheme: &DoubleScheme<u64>, prime: u64, seed: SeedSplitter) -> Result<Section<u64>> {
    let f = PrimeField::new(prime);
    let basis = MonomialBasis::new(format)?;
    let rows = assemble(&f, &basis, scheme);
    let kernel = linalg::kernel_basis(&f, &rows, basis.len());
    let mut rng = seed.rng();
    let coeffs = random_combination(&kernel, basis.len(), &mut rng, |rng| rng.random_range(1..prime), |a, b| f.mul(&a, &b), |a, b| f.add(&a, &b))
        .ok_or(Error::EmptySystem)?;
    Section::new(format.clone(), coeffs)
}

fn random_combination<T: Clone + Default, R: Rng>(
    kernel: &[Vec<T>],
    len: usize,
    rng: &mut R,
    mut draw: impl FnMut(&mut R) -> T,
    mul: impl Fn(T, T) -> T,
    add: impl Fn(T, T) -> T,
) -> Option<Vec<T>> {
    if kernel.is_empty() {
        return None;
    }
    let mut out = vec![T::default(); len];
    for v in kernel {
        let w = draw(rng);
        for (o, x) in out.iter_mut().zip(v) {
            *o = add(o.clone(), mul(w.clone(), x.clone()));
        }
    }
    Some(out)
}

/// Standard normal deviate (Box–Muller).
pub fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fmt(s: &str) -> Format {
        s.parse().unwrap()
    }

    #[test]
    fn assemble_row_counts() {
        let f = PrimeField::default();
        let format = fmt("r=2;d=5");
        let basis = MonomialBasis::new(&format).unwrap();
        let mut rng = SeedSplitter::new(1).rng();
        let empty = random_scheme_fp(&format, SchemeShape::free(0), f.modulus(), &mut rng);
        assert!(assemble(&f, &basis, &empty).is_empty());
        let seven = random_scheme_fp(&format, SchemeShape::free(7), f.modulus(), &mut rng);
        let rows = assemble(&f, &basis, &seven);
        assert_eq!(rows.len(), 21);
        assert!(rows.iter().all(|r| r.len() == 21));
    }

    #[test]
    fn single_point_on_binary_quadrics() {
        // f = a x0^2 + b x0 x1 + c x1^2 at (t, 1): rows (t^2, t, 1) and (2t, 1, 0).
        let f = PrimeField::default();
        let basis = MonomialBasis::new(&Format::veronese(1, 2).unwrap()).unwrap();
        let scheme = DoubleScheme { free: vec![vec![vec![5u64]]], on_divisor: vec![] };
        let rows = assemble(&f, &basis, &scheme);
        assert_eq!(rows, vec![vec![25, 5, 1], vec![10, 1, 0]]);
        assert_eq!(linalg::rank(&f, rows, 3), 2);
    }

    #[test]
    fn divisor_points_share_last_coordinate() {
        let format = fmt("r=1;d=3,3,3");
        let mut rng = SeedSplitter::new(3).rng();
        let s = random_scheme_fp(&format, SchemeShape { free: 2, on_divisor: 4 }, DEFAULT_PRIME, &mut rng);
        assert!(s.divisor_is_consistent());
        assert_eq!(s.divisor_trace()[0].len(), 2);
        assert_ne!(s.free[0].last(), s.on_divisor[0].last());
    }

    #[test]
    fn sysdim_examples() {
        let cfg = InterpConfig::default();
        let v = sysdim(&fmt("r=1;d=4,5"), SchemeShape::free(10), &cfg, SeedSplitter::new(1)).unwrap();
        assert_eq!((v.actual_dim, v.expected_dim, v.status), (0, 0, VerdictStatus::Expected));
        let v = sysdim(&fmt("r=2;d=2"), SchemeShape::free(2), &cfg, SeedSplitter::new(1)).unwrap();
        assert_eq!((v.actual_dim, v.expected_dim, v.status), (1, 0, VerdictStatus::Deficient));
        assert_eq!(v.trials, 3);
        assert_eq!(v.scalar, ScalarKind::Fp { prime: FALLBACK_PRIME });
        let v = sysdim(&fmt("r=2;d=4"), SchemeShape::free(5), &cfg, SeedSplitter::new(1)).unwrap();
        assert_eq!((v.actual_dim, v.rank), (1, 14));
    }

    #[test]
    fn rational_backend_agrees_on_small_controls() {
        let cfg = InterpConfig { backend: RankBackend::Rational, ..Default::default() };
        let v = sysdim(&fmt("r=2;d=2"), SchemeShape::free(2), &cfg, SeedSplitter::new(2)).unwrap();
        assert_eq!(v.rank, 5);
        assert_eq!(v.scalar, ScalarKind::Rational);
        let v = sysdim(&fmt("r=1;d=2,2"), SchemeShape::free(2), &cfg, SeedSplitter::new(2)).unwrap();
        assert!(v.is_expected() || v.status == VerdictStatus::Deficient);
        assert!(sysdim(&fmt("r=1;d=30,30"), SchemeShape::free(1), &cfg, SeedSplitter::new(2)).is_err());
    }

    #[test]
    fn secant_examples() {
        let cfg = InterpConfig::default();
        let v = secant_dim(&fmt("r=2;d=5"), 6, &cfg, SeedSplitter::new(9)).unwrap();
        assert_eq!(v.rank, 21);
        assert!(!v.defective());
        let v = secant_dim(&fmt("r=1;d=4,5"), 9, &cfg, SeedSplitter::new(9)).unwrap();
        assert_eq!(v.rank, 30);
        let v = secant_dim(&fmt("r=2;d=2"), 1, &cfg, SeedSplitter::new(9)).unwrap();
        assert_eq!((v.rank, v.expected_rank()), (5, 6));
        assert!(v.defective());
    }

    #[test]
    fn kernel_section_of_two_points_on_conics_is_double_line() {
        let format = Format::veronese(2, 2).unwrap();
        let basis = MonomialBasis::new(&format).unwrap();
        let mut rng = SeedSplitter::new(5).rng();
        let scheme = random_scheme_complex(&format, SchemeShape::free(2), &mut rng);
        let s = kernel_section(&format, &scheme, SeedSplitter::new(6)).unwrap();
        // the symmetric 3x3 Gram matrix of a square of a linear form has rank 1
        let y = basis.homogenize(&Complexes, &scheme.free[0]);
        let h = basis.hessian_h(&Complexes, &s.coeffs, &y);
        let m = nalgebra::DMatrix::from_fn(3, 3, |i, j| h[i][j]);
        let sv = linalg::singular_values(&m);
        assert!(sv[1] < 1e-9 * sv[0], "{sv:?}");
        let again = kernel_section(&format, &scheme, SeedSplitter::new(6)).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn kernel_section_residuals_vanish() {
        let format = fmt("r=1;d=4,5");
        let basis = MonomialBasis::new(&format).unwrap();
        let mut rng = SeedSplitter::new(8).rng();
        let scheme = random_scheme_complex(&format, SchemeShape::free(9), &mut rng);
        let s = kernel_section(&format, &scheme, SeedSplitter::new(1)).unwrap();
        for row in assemble(&Complexes, &basis, &scheme) {
            let r: Complex64 = row.iter().zip(&s.coeffs).map(|(a, b)| a * b).sum();
            assert!(r.norm() <= 1e-9 * s.norm());
        }
        let empty = kernel_section(&format, &DoubleScheme::empty(), SeedSplitter::new(1)).unwrap();
        assert_eq!(empty.coeffs.len(), 30);

        let fp = kernel_section_fp(&format, &random_scheme_fp(&format, SchemeShape::free(9), DEFAULT_PRIME, &mut rng), DEFAULT_PRIME, SeedSplitter::new(2));
        assert!(fp.is_ok());
        let full = random_scheme_complex(&format, SchemeShape::free(10), &mut rng);
        assert!(matches!(kernel_section(&format, &full, SeedSplitter::new(1)), Err(Error::EmptySystem)));
    }
}

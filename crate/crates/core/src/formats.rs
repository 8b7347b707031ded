//! Segre–Veronese formats and their counting functions.
//!
//! A [`Format`] records the factor dimensions `r_i` and degrees `d_i` of
//! `P^{r_1} x ... x P^{r_n}` embedded by `O(d_1, ..., d_n)`. All counts are
//! computed with arbitrary-precision integers.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Condition of the three-factor family exactly as it is usually printed;
/// the enumerator uses the full product `(d1+1)(d2+1)(d3+1) = 4(k+1)`.
pub const COROLLARY_THREE_PRINTED_CONDITION: &str = "(d_1+1)(d_2+1)=4(k+1)";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "FormatRepr", into = "FormatRepr")]
pub struct Format {
    r: Vec<usize>,
    d: Vec<usize>,
    /// `original_order[i]` is the input position of factor `i`.
    original_order: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct FormatRepr {
    n: usize,
    r: Vec<usize>,
    d: Vec<usize>,
}

impl TryFrom<FormatRepr> for Format {
    type Error = Error;
    fn try_from(v: FormatRepr) -> Result<Self> {
        if v.n != v.r.len() {
            return Err(Error::InvalidFormat(format!(
                "n = {} but {} factor dimensions given",
                v.n,
                v.r.len()
            )));
        }
        Format::raw(v.r, v.d)
    }
}

impl From<Format> for FormatRepr {
    fn from(f: Format) -> Self {
        FormatRepr { n: f.n(), r: f.r, d: f.d }
    }
}

impl Format {
    /// Builds a format, sorting the degrees ascending when all factor
    /// dimensions agree. The permutation applied is kept in
    /// [`Format::original_order`].
    pub fn new(r: Vec<usize>, d: Vec<usize>) -> Result<Self> {
        let mut f = Format::raw(r, d)?;
        if f.all_r_equal() {
            let mut idx: Vec<usize> = (0..f.n()).collect();
            idx.sort_by_key(|&i| (f.d[i], i));
            f.d = idx.iter().map(|&i| f.d[i]).collect();
            f.original_order = idx;
        }
        Ok(f)
    }

    /// Builds a format with the factors in the given order.
    pub fn raw(r: Vec<usize>, d: Vec<usize>) -> Result<Self> {
        if r.is_empty() {
            return Err(Error::InvalidFormat("at least one factor required".into()));
        }
        if r.len() != d.len() {
            return Err(Error::InvalidFormat(format!(
                "{} factor dimensions but {} degrees",
                r.len(),
                d.len()
            )));
        }
        if r.iter().chain(d.iter()).any(|&x| x == 0) {
            return Err(Error::InvalidFormat("all r_i and d_i must be >= 1".into()));
        }
        let n = r.len();
        Ok(Format { r, d, original_order: (0..n).collect() })
    }

    /// Symmetric case: one factor `P^r` with degree `d`.
    pub fn veronese(r: usize, d: usize) -> Result<Self> {
        Format::raw(vec![r], vec![d])
    }

    pub fn n(&self) -> usize {
        self.r.len()
    }
    pub fn r(&self) -> &[usize] {
        &self.r
    }
    pub fn d(&self) -> &[usize] {
        &self.d
    }
    pub fn original_order(&self) -> &[usize] {
        &self.original_order
    }
    pub fn sum_r(&self) -> usize {
        self.r.iter().sum()
    }
    pub fn all_r_equal(&self) -> bool {
        self.r.windows(2).all(|w| w[0] == w[1])
    }
    pub fn is_sorted(&self) -> bool {
        self.d.windows(2).all(|w| w[0] <= w[1])
    }

    /// Number of monomials, `prod C(r_i + d_i, r_i)`.
    pub fn ncoeff(&self) -> BigUint {
        self.r
            .iter()
            .zip(&self.d)
            .map(|(&r, &d)| binomial(r + d, r))
            .product()
    }

    /// [`Format::ncoeff`] as a machine integer, for dense linear algebra.
    pub fn ncoeff_usize(&self) -> Result<usize> {
        self.ncoeff()
            .to_usize()
            .ok_or_else(|| Error::TooLarge(format!("ncoeff of {self}")))
    }

    /// Projective dimension `N = ncoeff - 1` of the span of the variety.
    pub fn span_dim(&self) -> BigUint {
        self.ncoeff() - BigUint::one()
    }

    /// Projective dimension `M = prod (r_i+1)^{d_i} - 1` of the full tensor space.
    pub fn tensor_space_dim(&self) -> BigUint {
        self.r
            .iter()
            .zip(&self.d)
            .map(|(&r, &d)| BigUint::from(r + 1).pow(d as u32))
            .product::<BigUint>()
            - BigUint::one()
    }

    /// Factors `0..count` only.
    pub fn leading(&self, count: usize) -> Result<Format> {
        if count == 0 || count > self.n() {
            return Err(Error::InvalidFormat(format!("cannot keep {count} factors of {self}")));
        }
        Format::raw(self.r[..count].to_vec(), self.d[..count].to_vec())
    }

    /// Same factors with the last degree replaced; order is preserved.
    pub fn with_last_degree(&self, d_last: usize) -> Result<Format> {
        let mut d = self.d.clone();
        *d.last_mut().expect("nonempty") = d_last;
        Format::raw(self.r.clone(), d)
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "r={};d={}", join(&self.r), join(&self.d))
    }
}

impl FromStr for Format {
    type Err = Error;

    /// Parses `r=<ints>;d=<ints>`. A single `r` value is broadcast to every
    /// factor. Degrees are normalised as in [`Format::new`].
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidFormat(format!("{msg} in {s:?}"));
        let mut r = None;
        let mut d = None;
        for part in s.split(';') {
            let (key, val) = part.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let nums = val
                .split(',')
                .map(|x| x.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("expected comma-separated integers"))?;
            match key.trim() {
                "r" if r.is_none() => r = Some(nums),
                "d" if d.is_none() => d = Some(nums),
                _ => return Err(bad("unknown or repeated key")),
            }
        }
        let d = d.ok_or_else(|| bad("missing d"))?;
        let mut r = r.ok_or_else(|| bad("missing r"))?;
        if r.len() == 1 && d.len() > 1 {
            r = vec![r[0]; d.len()];
        }
        Format::new(r, d)
    }
}

/// Exact binomial coefficient; zero when `b > a`.
pub fn binomial(a: usize, b: usize) -> BigUint {
    if b > a {
        return BigUint::zero();
    }
    let b = b.min(a - b);
    let mut acc = BigUint::one();
    for i in 0..b {
        acc *= BigUint::from(a - i);
        acc /= BigUint::from(i + 1);
    }
    acc
}

/// `ncoeff` as a plain integer for small enumerations.
fn small_binomial(a: u64, b: u64) -> u128 {
    if b > a {
        return 0;
    }
    let b = b.min(a - b);
    (0..b).fold(1u128, |acc, i| acc * (a - i) as u128 / (i + 1) as u128)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuExpectation {
    Unique,
    Multiple,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerfectCase {
    pub format: Format,
    pub k: u64,
    pub nu_expected: NuExpectation,
    /// Integral-part bound of the three-factor family; `None` where it does
    /// not apply.
    pub assumption1_ok: Option<bool>,
}

impl PerfectCase {
    /// Checks `ncoeff = (sum r_i + 1)(k + 1)` exactly.
    pub fn is_consistent(&self) -> bool {
        self.format.ncoeff() == BigUint::from(self.format.sum_r() + 1) * BigUint::from(self.k + 1)
    }
}

/// Returns `k` when `ncoeff = (sum r_i + 1)(k + 1)` with `k + 1 >= 2`.
pub fn perfect_k(format: &Format) -> Result<Option<u64>> {
    if !format.all_r_equal() {
        return Err(Error::UnequalDimensions(format.r().to_vec()));
    }
    if format.sum_r() < 2 {
        return Err(Error::Precondition(format!("n*r >= 2 required, got {}", format.sum_r())));
    }
    let nc = format.ncoeff();
    let m = BigUint::from(format.sum_r() + 1);
    if !(&nc % &m).is_zero() {
        return Ok(None);
    }
    let kp1 = nc / m;
    if kp1 < BigUint::from(2u32) {
        return Ok(None);
    }
    let k = (kp1 - BigUint::one())
        .to_u64()
        .ok_or_else(|| Error::TooLarge("k does not fit in 64 bits".into()))?;
    Ok(Some(k))
}

/// Two-factor family on `P^1 x P^1`: `(d1+1)(d2+1) = 3(k+1)`, `4 <= d1 <= d2 <= dmax`.
pub fn enumerate_corollary_two(dmax: usize) -> Vec<PerfectCase> {
    let mut out = Vec::new();
    for d1 in 4..=dmax {
        for d2 in d1..=dmax {
            let prod = (d1 as u128 + 1) * (d2 as u128 + 1);
            if !prod.is_multiple_of(3) || prod / 3 < 2 {
                continue;
            }
            let format = Format::raw(vec![1, 1], vec![d1, d2]).expect("valid");
            out.push(PerfectCase {
                format,
                k: (prod / 3 - 1) as u64,
                nu_expected: NuExpectation::Multiple,
                assumption1_ok: None,
            });
        }
    }
    out
}

/// `k + 1 <= (d3 - 2) * floor((d1+1)(d2+1)/3)`.
pub fn corollary_three_assumption(d: [usize; 3], k: u64) -> bool {
    let bound = (d[2] as u128).saturating_sub(2) * ((d[0] as u128 + 1) * (d[1] as u128 + 1) / 3);
    (k as u128 + 1) <= bound
}

/// Three-factor family on `(P^1)^3`: `(d1+1)(d2+1)(d3+1) = 4(k+1)` together
/// with [`corollary_three_assumption`], `3 <= d1 <= d2 <= d3 <= dmax`.
pub fn enumerate_corollary_three(dmax: usize) -> Vec<PerfectCase> {
    let mut out = Vec::new();
    for d1 in 3..=dmax {
        for d2 in d1..=dmax {
            for d3 in d2..=dmax {
                let prod = (d1 as u128 + 1) * (d2 as u128 + 1) * (d3 as u128 + 1);
                if !prod.is_multiple_of(4) || prod / 4 < 2 {
                    continue;
                }
                let k = (prod / 4 - 1) as u64;
                if !corollary_three_assumption([d1, d2, d3], k) {
                    continue;
                }
                out.push(PerfectCase {
                    format: Format::raw(vec![1, 1, 1], vec![d1, d2, d3]).expect("valid"),
                    k,
                    nu_expected: NuExpectation::Multiple,
                    assumption1_ok: Some(true),
                });
            }
        }
    }
    out
}

/// Perfect cases of the symmetric family `(k+1)(r+1) = C(r+d, r)` with
/// `d > r > 1`; only `(r, d) = (2, 5)` is expected to be unique.
pub fn enumerate_symmetric(rmax: usize, dmax: usize) -> Vec<PerfectCase> {
    let mut out = Vec::new();
    for r in 2..=rmax {
        for d in (r + 1)..=dmax {
            let nc = small_binomial((r + d) as u64, r as u64);
            if !nc.is_multiple_of(r as u128 + 1) || nc / (r as u128 + 1) < 2 {
                continue;
            }
            out.push(PerfectCase {
                format: Format::veronese(r, d).expect("valid"),
                k: (nc / (r as u128 + 1) - 1) as u64,
                nu_expected: if (r, d) == (2, 5) { NuExpectation::Unique } else { NuExpectation::Multiple },
                assumption1_ok: None,
            });
        }
    }
    out
}

/// `-(r+1) + d_i (r+1)/d_1 >= 0` for every `i`, in exact arithmetic.
pub fn nef_check(format: &Format) -> Result<bool> {
    if !format.all_r_equal() {
        return Err(Error::UnequalDimensions(format.r().to_vec()));
    }
    if !format.is_sorted() {
        return Err(Error::Precondition(format!("degrees of {format} must be ascending")));
    }
    let rp1 = BigRational::from_integer((format.r()[0] as u64 + 1).into());
    let d1 = BigRational::from_integer((format.d()[0] as u64).into());
    let inv_mu = &rp1 / &d1;
    Ok(format.d().iter().all(|&di| {
        let di = BigRational::from_integer((di as u64).into());
        -rp1.clone() + &inv_mu * di >= BigRational::zero()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeaklySchedule {
    pub s: u64,
    pub h0: u64,
    pub t0: u64,
    /// Whether the last degree satisfies `d_{n+1} >= t0 + 3`.
    pub degree_ok: bool,
}

/// Maximal number of double points `floor(ncoeff / (sum_{i<=n} r_i + 2))` for
/// a format whose last factor is `P^1`.
pub fn max_double_points(format: &Format) -> Result<u64> {
    check_last_is_line(format)?;
    let base_sum = format.sum_r() - 1;
    (format.ncoeff() / BigUint::from(base_sum + 2))
        .to_u64()
        .ok_or_else(|| Error::TooLarge("double point bound".into()))
}

/// `floor(prod_{i<=n} C(r_i+d_i, r_i) / (sum_{i<=n} r_i + 1))`.
pub fn divisor_capacity(format: &Format) -> Result<u64> {
    check_last_is_line(format)?;
    let base = format.leading(format.n() - 1)?;
    (base.ncoeff() / BigUint::from(base.sum_r() + 1))
        .to_u64()
        .ok_or_else(|| Error::TooLarge("divisor capacity".into()))
}

fn check_last_is_line(format: &Format) -> Result<()> {
    if format.n() < 2 || *format.r().last().unwrap() != 1 {
        return Err(Error::InvalidFormat(format!(
            "{format}: need at least two factors with the last one P^1"
        )));
    }
    Ok(())
}

/// Degeneration schedule for `s` double points: `h0` points per step on the
/// divisor and `t0` steps with `1 <= s - t0*h0 <= h0`.
pub fn weakly_schedule(format: &Format, s: u64) -> Result<WeaklySchedule> {
    let h0 = divisor_capacity(format)?;
    let smax = max_double_points(format)?;
    if s == 0 || s > smax {
        return Err(Error::NoSchedule(format!("s = {s} outside [1, {smax}] for {format}")));
    }
    if h0 == 0 {
        return Err(Error::NoSchedule(format!("h0 = 0 for {format}")));
    }
    let t0 = (s - 1) / h0;
    let d_last = *format.d().last().unwrap() as u64;
    Ok(WeaklySchedule { s, h0, t0, degree_ok: d_last >= t0 + 3 })
}

//! Numerical decomposition of partially symmetric tensors into sums of
//! decomposable terms `lambda * l_1^{d_1} ... l_n^{d_n}`, and the multi-start
//! experiment counting essentially distinct decompositions.
//!
//! Linear forms are kept at unit norm with the scale in the scalar; steps
//! move each form along the orthogonal complement of itself, so in the
//! perfect case the unknowns match the coefficients one for one. A random
//! start is carried to the target by path tracking from an exact
//! decomposition of a random tensor, then polished by a complex
//! Levenberg–Marquardt descent on the coefficient residual.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Complexes;
use crate::formats::Format;
use crate::interpolation::gaussian;
use crate::multipoly::{MonomialBasis, Section};
use crate::seed::SeedSplitter;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOneTerm {
    pub scalar: Complex64,
    pub linforms: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub format: Format,
    pub terms: Vec<RankOneTerm>,
    /// `|sum of terms - target| / |target|`.
    pub residual: f64,
    pub converged: bool,
}

fn complex_gaussian(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(gaussian(rng), gaussian(rng)) / std::f64::consts::SQRT_2
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Coefficients of the sum of `terms`.
pub fn expand_terms(basis: &MonomialBasis, terms: &[RankOneTerm]) -> Result<Vec<Complex64>> {
    let mut out = vec![ZERO; basis.len()];
    for t in terms {
        for (o, c) in out.iter_mut().zip(basis.expand_rank_one(&Complexes, &t.scalar, &t.linforms)?) {
            *o += c;
        }
    }
    Ok(out)
}

/// Relative distance of the expanded `terms` from `target`.
pub fn relative_residual(target: &Section<Complex64>, terms: &[RankOneTerm]) -> Result<f64> {
    let basis = MonomialBasis::new(&target.format)?;
    let sum = expand_terms(&basis, terms)?;
    let diff: Vec<Complex64> = sum.iter().zip(&target.coeffs).map(|(a, b)| a - b).collect();
    Ok(norm(&diff) / target.norm())
}

/// Random target with a known decomposition into `k + 1` canonical terms.
pub fn synthesize_target(format: &Format, k: usize, seed: SeedSplitter) -> Result<(Section<Complex64>, Decomposition)> {
    let basis = MonomialBasis::new(format)?;
    let mut rng = seed.rng();
    // unit-norm forms and scalars of comparable size, so that no term is
    // negligible in the target
    let terms: Vec<RankOneTerm> = (0..=k)
        .map(|_| {
            let linforms = format
                .r()
                .iter()
                .map(|&r| {
                    let l: Vec<Complex64> = (0..=r).map(|_| complex_gaussian(&mut rng)).collect();
                    let n = norm(&l);
                    l.into_iter().map(|c| c / n).collect()
                })
                .collect();
            let modulus = rng.random_range(0.5..1.5);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            RankOneTerm { scalar: Complex64::from_polar(modulus, phase), linforms }
        })
        .collect();
    let witness = canonicalize(&Decomposition { format: format.clone(), terms, residual: 0.0, converged: true })?;
    let target = Section::new(format.clone(), expand_terms(&basis, &witness.terms)?)?;
    let residual = relative_residual(&target, &witness.terms)?;
    Ok((target, Decomposition { residual, ..witness }))
}

/// Unit-norm linear form whose first non-negligible coordinate is real
/// positive, and the scale `s` with `l = s * unit`.
fn canonical_form(l: &[Complex64]) -> Option<(Vec<Complex64>, Complex64)> {
    let n = norm(l);
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    let lead = l.iter().find(|c| c.norm() > 1e-10 * n).copied()?;
    let s = lead / lead.norm() * n;
    Some((l.iter().map(|c| c / s).collect(), s))
}

fn sort_key(t: &RankOneTerm) -> Vec<i64> {
    t.linforms
        .iter()
        .flatten()
        .flat_map(|c| [(c.re * 1e6).round() as i64, (c.im * 1e6).round() as i64])
        .collect()
}

/// Unit-norm, phase-normalised linear forms with the scale moved into the
/// scalar, terms sorted by rounded coordinates.
pub fn canonicalize(dec: &Decomposition) -> Result<Decomposition> {
    let d = dec.format.d();
    let mut terms = Vec::with_capacity(dec.terms.len());
    for (ti, t) in dec.terms.iter().enumerate() {
        let mut scalar = t.scalar;
        let mut linforms = Vec::with_capacity(t.linforms.len());
        for (fi, l) in t.linforms.iter().enumerate() {
            let (u, s) = canonical_form(l).ok_or(Error::ZeroLinearForm { term: ti, factor: fi })?;
            scalar *= s.powu(d[fi] as u32);
            linforms.push(u);
        }
        terms.push(RankOneTerm { scalar, linforms });
    }
    terms.sort_by(|a, b| {
        sort_key(a).cmp(&sort_key(b)).then_with(|| {
            (a.scalar.re, a.scalar.im).partial_cmp(&(b.scalar.re, b.scalar.im)).unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    Ok(Decomposition { terms, ..dec.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Relative residual at which a fit counts as converged.
    pub tol: f64,
    /// Converged fits keep iterating towards this residual.
    pub polish_tol: f64,
    pub mu0: f64,
    pub mu_increase: f64,
    pub mu_decrease: f64,
    /// Reach the target from the random start by path tracking before the
    /// descent; random starts otherwise stall far from any decomposition.
    pub continuation: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { max_iterations: 400, tol: 1e-8, polish_tol: 1e-13, mu0: 1e-3, mu_increase: 10.0, mu_decrease: 0.3, continuation: true }
    }
}

/// Coefficient residual of a sum of terms and its derivatives.
///
/// Derivatives are taken in homogeneous coordinates (`jacobian_h`) and in the
/// local chart at the current point (`jacobian`): per term the scalar, and
/// for each factor `r_i` coordinates along an orthonormal basis of the
/// complement of the current linear form. The chart moves with the iterate,
/// so no linear form is ever near infinity of its chart and the number of
/// unknowns stays `(k + 1)(1 + sum r_i)`.
pub struct ResidualMap<'a> {
    basis: &'a MonomialBasis,
    target: &'a [Complex64],
    weights: Vec<f64>,
}

impl<'a> ResidualMap<'a> {
    pub fn new(basis: &'a MonomialBasis, target: &'a [Complex64]) -> Self {
        let weights = (0..basis.len()).map(|m| basis.weight_f64(m)).collect();
        ResidualMap { basis, target, weights }
    }

    /// Local unknowns per term.
    pub fn block(&self) -> usize {
        1 + self.basis.naffine()
    }

    /// `x^e` for `e = 0..=d_i`, per homogeneous coordinate.
    fn powers(&self, t: &RankOneTerm) -> Vec<Vec<Complex64>> {
        let mut out = Vec::with_capacity(self.basis.nvars());
        for (l, &d) in t.linforms.iter().zip(self.basis.format().d()) {
            for &x in l {
                let mut p = Vec::with_capacity(d + 1);
                let mut acc = ONE;
                for _ in 0..=d {
                    p.push(acc);
                    acc *= x;
                }
                out.push(p);
            }
        }
        out
    }

    /// `sum of terms - target`.
    pub fn residual(&self, terms: &[RankOneTerm]) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = self.target.iter().map(|t| -t).collect();
        for t in terms {
            let pw = self.powers(t);
            for (m, o) in out.iter_mut().enumerate() {
                let e = self.basis.exponents(m);
                let v: Complex64 = e.iter().enumerate().map(|(v, &ev)| pw[v][ev as usize]).product();
                *o += t.scalar * self.weights[m] * v;
            }
        }
        out
    }

    /// Jacobian with respect to `[scalar, all homogeneous coordinates]` per
    /// term, `ncoeff x nterms (1 + nvars)`.
    pub fn jacobian_h(&self, terms: &[RankOneTerm]) -> DMatrix<Complex64> {
        let n = self.basis.len();
        let nv = self.basis.nvars();
        let b = 1 + nv;
        let mut jac = DMatrix::zeros(n, terms.len() * b);
        for (j, t) in terms.iter().enumerate() {
            let pw = self.powers(t);
            for m in 0..n {
                let e = self.basis.exponents(m);
                let w = self.weights[m];
                let v: Complex64 = e.iter().enumerate().map(|(v, &ev)| pw[v][ev as usize]).product();
                jac[(m, j * b)] = w * v;
                for hv in 0..nv {
                    let ev = e[hv] as usize;
                    if ev == 0 {
                        continue;
                    }
                    let rest: Complex64 = e
                        .iter()
                        .enumerate()
                        .filter(|&(v, _)| v != hv)
                        .map(|(v, &ex)| pw[v][ex as usize])
                        .product();
                    jac[(m, j * b + 1 + hv)] = t.scalar * w * (ev as f64) * pw[hv][ev - 1] * rest;
                }
            }
        }
        jac
    }

    /// Orthonormal bases of the complements of each term's linear forms.
    pub fn tangent_bases(&self, terms: &[RankOneTerm]) -> Vec<Vec<DMatrix<Complex64>>> {
        terms.iter().map(|t| t.linforms.iter().map(|l| complement(l)).collect()).collect()
    }

    /// Jacobian in the local chart given by `tangent_bases`.
    pub fn jacobian(&self, terms: &[RankOneTerm], bases: &[Vec<DMatrix<Complex64>>]) -> DMatrix<Complex64> {
        let jh = self.jacobian_h(terms);
        let nv = self.basis.nvars();
        let b = self.block();
        let mut jac = DMatrix::zeros(jh.nrows(), terms.len() * b);
        for j in 0..terms.len() {
            let hb = j * (1 + nv);
            jac.set_column(j * b, &jh.column(hb));
            let (mut hpos, mut lpos) = (hb + 1, j * b + 1);
            for basis in &bases[j] {
                let (rows, cols) = basis.shape();
                let block = jh.columns(hpos, rows) * basis;
                jac.columns_mut(lpos, cols).copy_from(&block);
                hpos += rows;
                lpos += cols;
            }
        }
        jac
    }

    /// Terms moved by a local step.
    pub fn step(&self, terms: &[RankOneTerm], bases: &[Vec<DMatrix<Complex64>>], delta: &[Complex64]) -> Vec<RankOneTerm> {
        let b = self.block();
        terms
            .iter()
            .enumerate()
            .map(|(j, t)| {
                let d = &delta[j * b..(j + 1) * b];
                let mut pos = 1;
                let linforms = t
                    .linforms
                    .iter()
                    .zip(&bases[j])
                    .map(|(l, basis)| {
                        let a = DVector::from_column_slice(&d[pos..pos + basis.ncols()]);
                        pos += basis.ncols();
                        let moved = basis * a;
                        l.iter().zip(moved.iter()).map(|(x, y)| x + y).collect()
                    })
                    .collect();
                RankOneTerm { scalar: t.scalar + d[0], linforms }
            })
            .collect()
    }
}

/// Orthonormal basis of the Hermitian complement of `l`, as columns.
fn complement(l: &[Complex64]) -> DMatrix<Complex64> {
    let n = l.len();
    let skip = (0..n).max_by(|&a, &b| l[a].norm().partial_cmp(&l[b].norm()).unwrap()).unwrap_or(0);
    let mut m = DMatrix::zeros(n, n);
    for (i, &x) in l.iter().enumerate() {
        m[(i, 0)] = x;
    }
    let mut col = 1;
    for i in (0..n).filter(|&i| i != skip) {
        m[(i, col)] = ONE;
        col += 1;
    }
    let q = m.qr().q();
    q.columns(1, n - 1).into_owned()
}

/// Unit-norm linear forms with the scale moved into the scalar; the tensor
/// is unchanged.
fn normalize_terms(terms: &mut [RankOneTerm], d: &[usize]) {
    for t in terms.iter_mut() {
        for (l, &di) in t.linforms.iter_mut().zip(d) {
            let n = norm(l);
            if n > 0.0 && n.is_finite() {
                l.iter_mut().for_each(|c| *c /= n);
                t.scalar *= n.powi(di as i32);
            }
        }
    }
}

/// Outcome of one fit with the residual after every accepted step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub decomposition: Decomposition,
    pub history: Vec<f64>,
    pub iterations: usize,
}

/// Least-squares scalars for fixed linear forms.
fn optimal_scalars(map: &ResidualMap, terms: &mut [RankOneTerm]) {
    for t in terms.iter_mut() {
        t.scalar = ONE;
    }
    let jh = map.jacobian_h(terms);
    let b = 1 + map.basis.nvars();
    let a = DMatrix::from_fn(jh.nrows(), terms.len(), |i, c| jh[(i, c * b)]);
    let rhs = DVector::from_column_slice(map.target);
    if let Ok(x) = a.svd(true, true).solve(&rhs, 1e-12) {
        for (t, &s) in terms.iter_mut().zip(x.iter()) {
            t.scalar = s;
        }
    }
}

fn levenberg_marquardt(map: &ResidualMap, mut terms: Vec<RankOneTerm>, config: &FitConfig) -> (Vec<RankOneTerm>, Vec<f64>, usize) {
    let d = map.basis.format().d().to_vec();
    normalize_terms(&mut terms, &d);
    let tnorm = norm(map.target);
    let mut r = map.residual(&terms);
    let mut cost = norm(&r) / tnorm;
    let mut history = vec![cost];
    let mut mu = config.mu0;
    let mut iterations = 0;
    let mut polish_steps = 0;
    while iterations < config.max_iterations && cost > config.polish_tol && cost.is_finite() {
        iterations += 1;
        let bases = map.tangent_bases(&terms);
        let jac = map.jacobian(&terms, &bases);
        let (nr, np) = (jac.nrows(), jac.ncols());
        let col_norms: Vec<f64> = (0..np).map(|c| jac.column(c).norm().max(1e-300)).collect();
        let mut accepted = false;
        while mu <= 1e16 {
            // damped least squares as the stacked problem [J; sqrt(mu) D],
            // solved by QR so the conditioning is not squared
            let mut a = DMatrix::zeros(nr + np, np);
            a.view_mut((0, 0), (nr, np)).copy_from(&jac);
            for (c, &cn) in col_norms.iter().enumerate() {
                a[(nr + c, c)] = Complex64::new(mu.sqrt() * cn, 0.0);
            }
            let mut rhs = DVector::zeros(nr + np);
            for (i, x) in r.iter().enumerate() {
                rhs[i] = -x;
            }
            let (q, rr) = a.qr().unpack();
            let Some(delta) = rr.solve_upper_triangular(&(q.adjoint() * rhs)) else {
                mu *= config.mu_increase;
                continue;
            };
            let trial = map.step(&terms, &bases, delta.as_slice());
            let tr = map.residual(&trial);
            let tcost = norm(&tr) / tnorm;
            if tcost.is_finite() && tcost < cost {
                terms = trial;
                normalize_terms(&mut terms, &d);
                r = tr;
                cost = tcost;
                history.push(cost);
                mu = (mu * config.mu_decrease).max(1e-15);
                accepted = true;
                break;
            }
            mu *= config.mu_increase;
        }
        if !accepted {
            break;
        }
        if cost <= config.tol {
            polish_steps += 1;
            let prev = history[history.len() - 2];
            if polish_steps > 20 || cost > 0.5 * prev {
                break;
            }
        }
    }
    (terms, history, iterations)
}

fn run_fit(map: &ResidualMap, target: &Section<Complex64>, init: Vec<RankOneTerm>, config: &FitConfig) -> FitTrace {
    let (terms, history, iterations) = levenberg_marquardt(map, init, config);
    let residual = *history.last().unwrap();
    let decomposition = Decomposition { format: target.format.clone(), terms, residual, converged: residual <= config.tol };
    FitTrace { decomposition, history, iterations }
}

fn check_target(target: &Section<Complex64>) -> Result<MonomialBasis> {
    if target.norm() == 0.0 {
        return Err(Error::Precondition("zero target".into()));
    }
    MonomialBasis::new(&target.format)
}

/// Fits `init.len()` terms to `target` starting from `init`.
pub fn fit_from(target: &Section<Complex64>, init: &[RankOneTerm], config: &FitConfig) -> Result<FitTrace> {
    let basis = check_target(target)?;
    for (ti, t) in init.iter().enumerate() {
        if let Some(fi) = t.linforms.iter().position(|l| norm(l) == 0.0) {
            return Err(Error::ZeroLinearForm { term: ti, factor: fi });
        }
    }
    let map = ResidualMap::new(&basis, &target.coeffs);
    Ok(run_fit(&map, target, init.to_vec(), config))
}

/// Least-squares solution of `jac x = rhs`.
fn solve_ls(jac: &DMatrix<Complex64>, rhs: DVector<Complex64>) -> Option<DVector<Complex64>> {
    let (q, r) = jac.clone().qr().unpack();
    let x = r.solve_upper_triangular(&(q.adjoint() * rhs))?;
    x.iter().all(|c| c.is_finite()).then_some(x)
}

/// Tracks `start`, an exact decomposition of `start_target`, along
/// `(1 - t) gamma start_target + t target` up to `t = 1`. The random
/// `gamma` keeps the real path away from the finitely many branch points.
/// Returns `None` if the step size collapses.
fn track(map: &ResidualMap, start: Vec<RankOneTerm>, start_target: &[Complex64], gamma: Complex64) -> Option<Vec<RankOneTerm>> {
    let d = map.basis.format().d().to_vec();
    let tnorm = norm(map.target);
    // d(target(t))/dt
    let velocity: Vec<Complex64> = map.target.iter().zip(start_target).map(|(a, b)| a - gamma * b).collect();
    // residual against target(t) from the residual against the final target
    let shifted = |terms: &[RankOneTerm], t: f64| -> DVector<Complex64> {
        let r = map.residual(terms);
        DVector::from_iterator(r.len(), r.iter().zip(&velocity).map(|(x, v)| x + (1.0 - t) * v))
    };
    let mut terms: Vec<RankOneTerm> =
        start.into_iter().map(|t| RankOneTerm { scalar: t.scalar * gamma, ..t }).collect();
    let (mut t, mut dt) = (0.0f64, 0.02f64);
    let mut steps = 0;
    while t < 1.0 {
        steps += 1;
        if dt < 1e-9 || steps > 20_000 {
            return None;
        }
        let dt_now = dt.min(1.0 - t);
        let t_next = if dt_now == 1.0 - t { 1.0 } else { t + dt_now };
        // Euler predictor
        let bases = map.tangent_bases(&terms);
        let jac = map.jacobian(&terms, &bases);
        let rhs = DVector::from_iterator(velocity.len(), velocity.iter().map(|v| v * (t_next - t)));
        let Some(dx) = solve_ls(&jac, rhs) else {
            dt *= 0.5;
            continue;
        };
        let mut trial = map.step(&terms, &bases, dx.as_slice());
        normalize_terms(&mut trial, &d);
        // Newton corrector, which must contract quickly
        let mut ok = false;
        let mut prev = f64::INFINITY;
        let mut iters = 0;
        for _ in 0..4 {
            iters += 1;
            let r = shifted(&trial, t_next);
            let rn = r.norm() / tnorm;
            if !rn.is_finite() || rn > 0.5 * prev {
                break;
            }
            if rn < 1e-10 {
                ok = true;
                break;
            }
            prev = rn;
            let bases = map.tangent_bases(&trial);
            let jac = map.jacobian(&trial, &bases);
            let Some(dx) = solve_ls(&jac, -r) else { break };
            trial = map.step(&trial, &bases, dx.as_slice());
            normalize_terms(&mut trial, &d);
        }
        if !ok {
            dt *= 0.5;
            continue;
        }
        terms = trial;
        t = t_next;
        if iters <= 2 {
            dt = (dt * 2.0).min(0.1);
        }
    }
    Some(terms)
}

/// Fit from a random start: complex Gaussian linear forms. With
/// continuation, and as many unknowns as coefficients, the start is an exact
/// decomposition of a random tensor carried to the target; otherwise the
/// scalars are linear least squares.
pub fn fit_traced(target: &Section<Complex64>, k: usize, seed: SeedSplitter, config: &FitConfig) -> Result<FitTrace> {
    let basis = check_target(target)?;
    let map = ResidualMap::new(&basis, &target.coeffs);
    let mut rng = seed.rng();
    let mut init: Vec<RankOneTerm> = (0..=k)
        .map(|_| RankOneTerm {
            scalar: complex_gaussian(&mut rng),
            linforms: target.format.r().iter().map(|&r| (0..=r).map(|_| complex_gaussian(&mut rng)).collect()).collect(),
        })
        .collect();
    if config.continuation && basis.len() == init.len() * map.block() {
        normalize_terms(&mut init, target.format.d());
        let mut start_target = expand_terms(&basis, &init)?;
        let scale = target.norm() / norm(&start_target);
        init.iter_mut().for_each(|t| t.scalar *= scale);
        start_target.iter_mut().for_each(|c| *c *= scale);
        let gamma = Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
        if let Some(end) = track(&map, init.clone(), &start_target, gamma) {
            init = end;
        } else {
            optimal_scalars(&map, &mut init);
        }
    } else {
        optimal_scalars(&map, &mut init);
    }
    Ok(run_fit(&map, target, init, config))
}

pub fn fit(target: &Section<Complex64>, k: usize, seed: SeedSplitter, config: &FitConfig) -> Result<Decomposition> {
    Ok(fit_traced(target, k, seed, config)?.decomposition)
}

/// Minimum-cost perfect matching of a square cost matrix; returns the column
/// assigned to each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // potentials formulation, 1-based with a virtual column 0
    let (mut u, mut v) = (vec![0.0; n + 1], vec![0.0; n + 1]);
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    assign
}

/// Linear-form distances plus relative scalar distance.
pub fn term_distance(a: &RankOneTerm, b: &RankOneTerm) -> f64 {
    let forms: f64 = a.linforms.iter().zip(&b.linforms).map(|(x, y)| {
        x.iter().zip(y).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt()
    }).sum();
    let scale = 1f64.max(a.scalar.norm()).max(b.scalar.norm());
    forms + (a.scalar - b.scalar).norm() / scale
}

/// Optimal-assignment distance between canonical decompositions.
pub fn decomposition_distance(a: &Decomposition, b: &Decomposition) -> f64 {
    if a.terms.len() != b.terms.len() {
        return f64::INFINITY;
    }
    let cost: Vec<Vec<f64>> = a.terms.iter().map(|s| b.terms.iter().map(|t| term_distance(s, t)).collect()).collect();
    hungarian(&cost).iter().enumerate().map(|(i, &j)| cost[i][j]).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub tol: f64,
    pub nu_est: usize,
    /// Member indices per cluster, clusters ordered by size then by
    /// representative.
    pub members: Vec<Vec<usize>>,
    /// Index of each cluster's representative (smallest residual).
    pub representatives: Vec<usize>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Single-linkage clustering of canonical decompositions from a precomputed
/// distance matrix.
fn cluster_with(decs: &[Decomposition], dist: &[Vec<f64>], tol: f64) -> Clustering {
    let n = decs.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in 0..i {
            if dist[i][j] <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    let rep_of = |g: &Vec<usize>| -> usize {
        *g.iter()
            .min_by(|&&a, &&b| {
                decs[a].residual.partial_cmp(&decs[b].residual).unwrap_or(std::cmp::Ordering::Equal).then_with(|| {
                    let ka: Vec<Vec<i64>> = decs[a].terms.iter().map(sort_key).collect();
                    let kb: Vec<Vec<i64>> = decs[b].terms.iter().map(sort_key).collect();
                    ka.cmp(&kb)
                })
            })
            .unwrap()
    };
    let mut clusters: Vec<(Vec<usize>, usize)> = groups.into_values().map(|g| {
        let r = rep_of(&g);
        (g, r)
    }).collect();
    clusters.sort_by(|a, b| {
        b.0.len().cmp(&a.0.len()).then_with(|| {
            let ka: Vec<Vec<i64>> = decs[a.1].terms.iter().map(sort_key).collect();
            let kb: Vec<Vec<i64>> = decs[b.1].terms.iter().map(sort_key).collect();
            ka.cmp(&kb)
        })
    });
    Clustering {
        tol,
        nu_est: clusters.len(),
        representatives: clusters.iter().map(|c| c.1).collect(),
        members: clusters.into_iter().map(|c| c.0).collect(),
    }
}

fn distance_matrix(decs: &[Decomposition]) -> Vec<Vec<f64>> {
    (0..decs.len())
        .into_par_iter()
        .map(|i| (0..decs.len()).map(|j| if i == j { 0.0 } else { decomposition_distance(&decs[i], &decs[j]) }).collect())
        .collect()
}

/// Clusters decompositions (canonicalised here) up to `tol`.
pub fn cluster(decs: &[Decomposition], tol: f64) -> Result<Clustering> {
    let canon: Vec<Decomposition> = decs.iter().map(canonicalize).collect::<Result<_>>()?;
    Ok(cluster_with(&canon, &distance_matrix(&canon), tol))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuReport {
    pub format: Format,
    pub k: usize,
    pub nstarts: usize,
    pub nconverged: usize,
    /// Converged fits whose terms cancel (large scalars); excluded from
    /// clustering.
    pub ndegenerate: usize,
    /// Lower bound: `nu >= nu_est`.
    pub nu_est: usize,
    pub tol: f64,
    pub cluster_sizes: Vec<usize>,
    /// `(tol, nu_est)` for the sensitivity sweep.
    pub sweep: Vec<(f64, usize)>,
    pub sweep_stable: bool,
    pub residuals: Option<ResidualStats>,
    /// Cluster index containing the known decomposition of the target.
    pub witness_cluster: Option<usize>,
    pub inconclusive: bool,
    pub representatives: Vec<Decomposition>,
    pub target: Vec<Complex64>,
    pub witness: Decomposition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuConfig {
    pub fit: FitConfig,
    pub tol: f64,
    pub sweep: [f64; 2],
    pub min_converged: usize,
    /// A fit is degenerate when `sum |term| / |target|` exceeds this.
    pub cancellation_limit: f64,
}

impl Default for NuConfig {
    fn default() -> Self {
        NuConfig { fit: FitConfig::default(), tol: 1e-4, sweep: [1e-3, 1e-5], min_converged: 10, cancellation_limit: 1e4 }
    }
}

fn cancellation(basis: &MonomialBasis, dec: &Decomposition, tnorm: f64) -> f64 {
    dec.terms
        .iter()
        .map(|t| basis.expand_rank_one(&Complexes, &t.scalar, &t.linforms).map(|c| norm(&c)).unwrap_or(f64::INFINITY))
        .sum::<f64>()
        / tnorm
}

/// Multi-start estimate of the number of decompositions of a random target
/// with `k + 1` terms.
pub fn nu_experiment(format: &Format, k: usize, nstarts: usize, seed: SeedSplitter, config: &NuConfig) -> Result<NuReport> {
    let (target, witness) = synthesize_target(format, k, seed.named("target"))?;
    let basis = MonomialBasis::new(format)?;
    let starts = seed.named("starts");
    let fits: Vec<Decomposition> = (0..nstarts)
        .into_par_iter()
        .map(|i| fit(&target, k, starts.child(i as u64), &config.fit))
        .collect::<Result<_>>()?;
    let converged: Vec<Decomposition> = fits.into_iter().filter(|d| d.converged).collect();
    let nconverged = converged.len();
    let tnorm = target.norm();
    let (good, degenerate): (Vec<Decomposition>, Vec<Decomposition>) = converged
        .into_iter()
        .partition(|d| cancellation(&basis, d, tnorm) <= config.cancellation_limit);
    let canon: Vec<Decomposition> = good.iter().map(canonicalize).collect::<Result<_>>()?;
    let dist = distance_matrix(&canon);
    let main = cluster_with(&canon, &dist, config.tol);
    let sweep: Vec<(f64, usize)> = config.sweep.iter().map(|&t| (t, cluster_with(&canon, &dist, t).nu_est)).collect();
    let sweep_stable = sweep.iter().all(|&(_, nu)| nu == main.nu_est);
    let residuals = if canon.is_empty() {
        None
    } else {
        let mut r: Vec<f64> = canon.iter().map(|d| d.residual).collect();
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Some(ResidualStats { min: r[0], median: r[r.len() / 2], max: r[r.len() - 1] })
    };
    let witness_cluster = main
        .members
        .iter()
        .position(|g| g.iter().any(|&i| decomposition_distance(&canon[i], &witness) <= config.tol));
    Ok(NuReport {
        format: format.clone(),
        k,
        nstarts,
        nconverged,
        ndegenerate: degenerate.len(),
        nu_est: main.nu_est,
        tol: config.tol,
        cluster_sizes: main.members.iter().map(|g| g.len()).collect(),
        sweep,
        sweep_stable,
        residuals,
        witness_cluster,
        inconclusive: canon.len() < config.min_converged,
        representatives: main.representatives.iter().map(|&i| canon[i].clone()).collect(),
        target: target.coeffs,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interpolation::random_unit_disc;

    fn fmt(s: &str) -> Format {
        s.parse().unwrap()
    }

    #[test]
    fn single_term_target() {
        let f = fmt("r=1,1;d=2,3");
        let (target, w) = synthesize_target(&f, 0, SeedSplitter::new(1)).unwrap();
        assert_eq!(w.terms.len(), 1);
        let basis = MonomialBasis::new(&f).unwrap();
        let one = basis.expand_rank_one(&Complexes, &w.terms[0].scalar, &w.terms[0].linforms).unwrap();
        assert_eq!(target.coeffs, one);
        assert_eq!(w.residual, 0.0);
    }

    #[test]
    fn synthesis_is_deterministic() {
        let f = fmt("r=2;d=5");
        let a = synthesize_target(&f, 6, SeedSplitter::new(9)).unwrap();
        let b = synthesize_target(&f, 6, SeedSplitter::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn witness_is_a_fixed_point() {
        let f = fmt("r=1,1;d=4,5");
        let (target, w) = synthesize_target(&f, 9, SeedSplitter::new(3)).unwrap();
        let t = fit_from(&target, &w.terms, &FitConfig::default()).unwrap();
        assert!(t.decomposition.converged);
        assert!(t.decomposition.residual <= 1e-12);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let f = fmt("r=1,2;d=2,3");
        let basis = MonomialBasis::new(&f).unwrap();
        let mut rng = SeedSplitter::new(4).rng();
        let target: Vec<Complex64> = (0..basis.len()).map(|_| random_unit_disc(&mut rng)).collect();
        let map = ResidualMap::new(&basis, &target);
        for _ in 0..20 {
            let terms: Vec<RankOneTerm> = (0..3)
                .map(|_| RankOneTerm {
                    scalar: complex_gaussian(&mut rng),
                    linforms: f.r().iter().map(|&r| (0..=r).map(|_| complex_gaussian(&mut rng)).collect()).collect(),
                })
                .collect();
            let bases = map.tangent_bases(&terms);
            let jac = map.jacobian(&terms, &bases);
            let h = 1e-6;
            for q in 0..jac.ncols() {
                let mut e = vec![ZERO; jac.ncols()];
                e[q] = Complex64::new(h, 0.0);
                let rp = map.residual(&map.step(&terms, &bases, &e));
                e[q] = Complex64::new(-h, 0.0);
                let rm = map.residual(&map.step(&terms, &bases, &e));
                let fd: Vec<Complex64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
                let exact: Vec<Complex64> = (0..basis.len()).map(|m| jac[(m, q)]).collect();
                let diff: Vec<Complex64> = fd.iter().zip(&exact).map(|(a, b)| a - b).collect();
                assert!(norm(&diff) <= 1e-6 * norm(&exact), "param {q}: {}", norm(&diff) / norm(&exact));
            }
        }
    }

    #[test]
    fn accepted_steps_never_increase_the_residual() {
        let f = fmt("r=1,1;d=3,3");
        let (target, _) = synthesize_target(&f, 4, SeedSplitter::new(5)).unwrap();
        for s in 0..5 {
            let t = fit_traced(&target, 4, SeedSplitter::new(100 + s), &FitConfig::default()).unwrap();
            assert!(t.history.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn canonical_form_absorbs_gauge() {
        let f = fmt("r=1,2;d=3,2");
        let (_, w) = synthesize_target(&f, 3, SeedSplitter::new(6)).unwrap();
        let mut rng = SeedSplitter::new(7).rng();
        for _ in 0..100 {
            let mut g = w.clone();
            for t in g.terms.iter_mut() {
                for (i, l) in t.linforms.iter_mut().enumerate() {
                    let s = complex_gaussian(&mut rng) * 3.0;
                    for c in l.iter_mut() {
                        *c *= s;
                    }
                    t.scalar /= s.powu(f.d()[i] as u32);
                }
            }
            g.terms.reverse();
            let c = canonicalize(&g).unwrap();
            assert!(decomposition_distance(&c, &w) <= 1e-10);
            assert_eq!(c.terms.iter().map(sort_key).collect::<Vec<_>>(), w.terms.iter().map(sort_key).collect::<Vec<_>>());
        }
    }

    #[test]
    fn scaling_by_two_is_invisible() {
        let f = fmt("r=1;d=4");
        let w = Decomposition {
            format: f.clone(),
            terms: vec![RankOneTerm { scalar: Complex64::new(1.5, 0.0), linforms: vec![vec![Complex64::new(1.0, 0.0), Complex64::new(2.0, 1.0)]] }],
            residual: 0.0,
            converged: true,
        };
        let mut g = w.clone();
        g.terms[0].linforms[0].iter_mut().for_each(|c| *c *= 2.0);
        g.terms[0].scalar /= 16.0;
        let (a, b) = (canonicalize(&w).unwrap(), canonicalize(&g).unwrap());
        assert!(decomposition_distance(&a, &b) < 1e-14);
        assert!(a.terms[0].linforms[0][0].im == 0.0 && a.terms[0].linforms[0][0].re > 0.0);
    }

    #[test]
    fn zero_form_is_rejected() {
        let d = Decomposition {
            format: fmt("r=1;d=2"),
            terms: vec![RankOneTerm { scalar: ONE, linforms: vec![vec![ZERO, ZERO]] }],
            residual: 0.0,
            converged: false,
        };
        assert!(matches!(canonicalize(&d), Err(Error::ZeroLinearForm { term: 0, factor: 0 })));
    }

    #[test]
    fn hungarian_against_brute_force() {
        let mut rng = SeedSplitter::new(8).rng();
        for n in 1..=6 {
            let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(0.0..10.0)).collect()).collect();
            let a = hungarian(&cost);
            let got: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            let mut perm: Vec<usize> = (0..n).collect();
            let mut best = f64::INFINITY;
            permute(&mut perm, 0, &mut |p| {
                best = best.min(p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum());
            });
            assert!((got - best).abs() < 1e-12);
        }
    }

    fn permute(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == p.len() {
            f(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permute(p, k + 1, f);
            p.swap(k, i);
        }
    }

    #[test]
    fn duplicates_form_one_cluster() {
        let f = fmt("r=1,1;d=2,2");
        let (_, w) = synthesize_target(&f, 2, SeedSplitter::new(10)).unwrap();
        let mut permuted = w.clone();
        permuted.terms.rotate_left(1);
        let c = cluster(&[w.clone(), w.clone(), permuted], 1e-4).unwrap();
        assert_eq!(c.nu_est, 1);
        let (_, other) = synthesize_target(&f, 2, SeedSplitter::new(11)).unwrap();
        let c = cluster(&[w.clone(), other.clone(), w.clone()], 1e-4).unwrap();
        assert_eq!(c.nu_est, 2);
        assert_eq!(c.members[0], vec![0, 2]);
        let c2 = cluster(&[other, w.clone(), w], 1e-4).unwrap();
        assert_eq!(c2.nu_est, 2);
    }

    #[test]
    fn witness_recovered_from_perturbation() {
        let f = fmt("r=1,1;d=4,5");
        let (target, w) = synthesize_target(&f, 9, SeedSplitter::new(12)).unwrap();
        let mut rng = SeedSplitter::new(13).rng();
        let mut init = w.terms.clone();
        for t in init.iter_mut() {
            for l in t.linforms.iter_mut() {
                for c in l.iter_mut() {
                    *c += complex_gaussian(&mut rng) * 1e-3;
                }
            }
        }
        let d = fit_from(&target, &init, &FitConfig::default()).unwrap().decomposition;
        assert!(d.converged);
        let c = canonicalize(&d).unwrap();
        assert!(decomposition_distance(&c, &w) <= 1e-6);
    }

    #[test]
    fn rank_one_cannot_fit_generic_target() {
        let f = fmt("r=1,1;d=4,5");
        let (target, _) = synthesize_target(&f, 9, SeedSplitter::new(14)).unwrap();
        let mut best = f64::INFINITY;
        for s in 0..20 {
            let d = fit(&target, 0, SeedSplitter::new(200 + s), &FitConfig::default()).unwrap();
            assert!(!d.converged);
            best = best.min(d.residual);
        }
        assert!(best > 0.1, "best rank-one residual {best}");
    }

    #[test]
    fn stored_residual_matches_expansion() {
        let f = fmt("r=1,1;d=3,3");
        let (target, _) = synthesize_target(&f, 4, SeedSplitter::new(15)).unwrap();
        let d = fit(&target, 4, SeedSplitter::new(16), &FitConfig::default()).unwrap();
        let c = canonicalize(&d).unwrap();
        let r = relative_residual(&target, &c.terms).unwrap();
        assert!((r - d.residual).abs() <= 1e-12);
    }

    #[test]
    fn plane_quintic_converges_from_random_starts() {
        let f = fmt("r=2;d=5");
        let (target, _) = synthesize_target(&f, 6, SeedSplitter::new(17)).unwrap();
        let n = 20;
        let ok = (0..n).filter(|&s| fit(&target, 6, SeedSplitter::new(300 + s), &FitConfig::default()).unwrap().converged).count();
        assert!(ok * 10 >= n as usize * 3, "{ok}/{n} converged");
    }

    #[test]
    fn track_reaches_target_exactly() {
        let f = fmt("r=1,1;d=4,5");
        let (target, _) = synthesize_target(&f, 9, SeedSplitter::new(18)).unwrap();
        let basis = MonomialBasis::new(&f).unwrap();
        let map = ResidualMap::new(&basis, &target.coeffs);
        let (start_target, start) = synthesize_target(&f, 9, SeedSplitter::new(19)).unwrap();
        let end = track(&map, start.terms, &start_target.coeffs, Complex64::from_polar(1.0, 0.7)).unwrap();
        assert!(relative_residual(&target, &end).unwrap() < 1e-9);
    }
}

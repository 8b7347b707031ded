//! Contact divisors: sections singular at prescribed general points, and
//! whether they acquire any further singularities.
//!
//! A variety is `(k-1)`-weakly defective exactly when the general section
//! singular at `k` general points is singular somewhere else as well (or
//! degenerate at the points). The check below draws such a section, tests
//! that each imposed point is an ordinary double point (nondegenerate affine
//! Hessian) and searches for further singular points. When the format has
//! two affine variables the search is complete by resultant elimination;
//! otherwise it is a multi-start Gauss–Newton search and is labelled
//! heuristic.

pub mod plane;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Complexes, Field};
use crate::formats::Format;
use crate::interpolation::{gaussian, kernel_section, random_scheme_complex, random_unit_disc, SchemeShape};
use crate::linalg;
use crate::multipoly::{AffinePoint, MonomialBasis, Section};
use crate::seed::SeedSplitter;

use plane::{DegreeBounds, PlaneSystem};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certification {
    Certified,
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangencyConfig {
    /// Hessian at an imposed point is nondegenerate iff
    /// `sigma_min > hessian_tol * sigma_max`.
    pub hessian_tol: f64,
    /// Relative residual below which a point counts as singular.
    pub singular_tol: f64,
    /// Random chart changes in addition to the standard chart.
    pub charts: usize,
    /// Starts of the heuristic search, spread over all charts.
    pub starts: usize,
    pub max_iterations: usize,
}

impl Default for TangencyConfig {
    fn default() -> Self {
        TangencyConfig { hessian_tol: 1e-8, singular_tol: 1e-8, charts: 3, starts: 200, max_iterations: 80 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularPoint {
    /// Homogeneous coordinates per factor, unit norm.
    pub point: Vec<Vec<Complex64>>,
    pub value_residual: f64,
    pub gradient_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityReport {
    pub format: Format,
    /// Coefficients of the contact section in basis order.
    pub section: Vec<Complex64>,
    pub imposed_points: Vec<AffinePoint<Complex64>>,
    pub hessian_ok: Vec<bool>,
    /// `sigma_min / sigma_max` of each imposed Hessian.
    pub hessian_ratio: Vec<f64>,
    /// Largest relative value/gradient residual at the imposed points.
    pub imposed_residual: f64,
    pub extra_singularities: Vec<SingularPoint>,
    /// The singular locus has a curve component (found by the resultant
    /// search through a common factor of the partials).
    pub positive_dimensional: bool,
    /// Imposed points rediscovered by the search in the standard chart.
    pub imposed_recovered: usize,
    pub certification: Certification,
    pub charts: usize,
    pub starts: usize,
}

impl SingularityReport {
    pub fn weakly_defective(&self) -> bool {
        !ordinary_double_points_only(self)
    }
}

/// Every imposed point is an ordinary double point and there is no other
/// singular point.
pub fn ordinary_double_points_only(report: &SingularityReport) -> bool {
    report.hessian_ok.iter().all(|&ok| ok) && report.extra_singularities.is_empty() && !report.positive_dimensional
}

/// Matrix of second affine partial derivatives at an affine point.
pub fn hessian_at<F: Field>(field: &F, section: &Section<F::Elem>, point: &[Vec<F::Elem>]) -> Result<Vec<Vec<F::Elem>>> {
    let basis = MonomialBasis::new(&section.format)?;
    let y = basis.homogenize(field, point);
    let h = basis.hessian_h(field, &section.coeffs, &y);
    let idx = basis.affine_to_homogeneous();
    Ok(idx.iter().map(|&i| idx.iter().map(|&j| h[i][j].clone()).collect()).collect())
}

/// `sigma_min / sigma_max` of a complex matrix given by rows.
pub fn hessian_ratio(h: &[Vec<Complex64>]) -> f64 {
    if h.is_empty() {
        return 1.0;
    }
    linalg::inverse_condition(&linalg::to_dmatrix(h, h.len()))
}

/// Linear chart `u -> y_i = G_i (u_i, 1)` on every factor.
#[derive(Debug, Clone)]
struct Chart {
    mats: Vec<DMatrix<Complex64>>,
}

impl Chart {
    fn standard(format: &Format) -> Self {
        Chart { mats: format.r().iter().map(|&r| DMatrix::identity(r + 1, r + 1)).collect() }
    }

    fn random(format: &Format, rng: &mut impl Rng) -> Self {
        Chart {
            mats: format
                .r()
                .iter()
                .map(|&r| {
                    // unitary, so the chart change keeps coefficients balanced
                    let g = DMatrix::from_fn(r + 1, r + 1, |_, _| Complex64::new(gaussian(rng), gaussian(rng)));
                    g.qr().q()
                })
                .collect(),
        }
    }

    fn lift(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut y = Vec::new();
        let mut pos = 0;
        for g in &self.mats {
            let r = g.nrows() - 1;
            for row in 0..=r {
                let mut s = g[(row, r)];
                for j in 0..r {
                    s += g[(row, j)] * u[pos + j];
                }
                y.push(s);
            }
            pos += r;
        }
        y
    }

    /// `dy / du`, `nvars x naffine`.
    fn jacobian(&self, nvars: usize, naffine: usize) -> DMatrix<Complex64> {
        let mut a = DMatrix::zeros(nvars, naffine);
        let (mut row0, mut col0) = (0, 0);
        for g in &self.mats {
            let r = g.nrows() - 1;
            for i in 0..=r {
                for j in 0..r {
                    a[(row0 + i, col0 + j)] = g[(i, j)];
                }
            }
            row0 += r + 1;
            col0 += r;
        }
        a
    }
}

/// Section together with everything needed to evaluate it in charts.
struct Evaluator<'a> {
    basis: &'a MonomialBasis,
    coeffs: &'a [Complex64],
    coeff_norm: f64,
}

impl Evaluator<'_> {
    fn split(&self, y: &[Complex64]) -> Vec<Vec<Complex64>> {
        let mut out = Vec::new();
        let mut pos = 0;
        for &r in self.basis.format().r() {
            out.push(y[pos..pos + r + 1].to_vec());
            pos += r + 1;
        }
        out
    }

    /// Per-factor unit-norm representative.
    fn normalize(&self, y: &[Complex64]) -> Vec<Complex64> {
        self.split(y)
            .into_iter()
            .flat_map(|f| {
                let n = f.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                f.into_iter().map(move |c| c / n)
            })
            .collect()
    }

    /// Relative value and gradient residuals at the normalised point.
    fn residuals(&self, y: &[Complex64]) -> (f64, f64) {
        let y = self.normalize(y);
        let row = self.basis.eval_row_h(&Complexes, &y);
        let rn = row.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let v: Complex64 = row.iter().zip(self.coeffs).map(|(a, b)| a * b).sum();
        let grads = self.basis.gradient_rows_h(&Complexes, &y);
        let gn = grads.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let g = grads
            .iter()
            .map(|r| r.iter().zip(self.coeffs).map(|(a, b)| a * b).sum::<Complex64>().norm_sqr())
            .sum::<f64>()
            .sqrt();
        (v.norm() / (self.coeff_norm * rn), g / (self.coeff_norm * gn.max(f64::MIN_POSITIVE)))
    }

    fn is_singular(&self, y: &[Complex64], tol: f64) -> Option<SingularPoint> {
        let (vr, gr) = self.residuals(y);
        if vr <= tol && gr <= tol && vr.is_finite() && gr.is_finite() {
            Some(SingularPoint { point: self.split(&self.normalize(y)), value_residual: vr, gradient_residual: gr })
        } else {
            None
        }
    }
}

/// `max_i sqrt(1 - |<a_i, b_i>|^2)` over factors of unit-norm points.
fn projective_distance(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let nx = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            let ny = y.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            let ip: Complex64 = x.iter().zip(y).map(|(p, q)| p.conj() * q).sum();
            let cos2 = (ip.norm() / (nx * ny)).powi(2);
            (1.0 - cos2).max(0.0).sqrt()
        })
        .fold(0.0, f64::max)
}

const SAME_POINT: f64 = 1e-6;

fn affine_to_homogeneous_factors(point: &AffinePoint<Complex64>) -> Vec<Vec<Complex64>> {
    point.iter().map(|f| f.iter().copied().chain([ONE]).collect()).collect()
}

/// Section restricted to a chart with two affine variables: `(P, Q)` is the
/// affine gradient.
struct PlaneGradient<'a> {
    eval: &'a Evaluator<'a>,
    chart: &'a Chart,
    jac: DMatrix<Complex64>,
}

impl PlaneSystem for PlaneGradient<'_> {
    fn eval(&self, x: Complex64, y: Complex64) -> [Complex64; 2] {
        let yy = self.chart.lift(&[x, y]);
        let g = self.eval.basis.gradient_h(&Complexes, self.eval.coeffs, &yy);
        let mut out = [ZERO; 2];
        for (k, o) in out.iter_mut().enumerate() {
            *o = g.iter().enumerate().map(|(i, gi)| gi * self.jac[(i, k)]).sum();
        }
        out
    }

    fn jacobian(&self, x: Complex64, y: Complex64) -> [[Complex64; 2]; 2] {
        let yy = self.chart.lift(&[x, y]);
        let h = self.eval.basis.hessian_h(&Complexes, self.eval.coeffs, &yy);
        let hm = DMatrix::from_fn(h.len(), h.len(), |i, j| h[i][j]);
        let hp = self.jac.transpose() * hm * &self.jac;
        [[hp[(0, 0)], hp[(0, 1)]], [hp[(1, 0)], hp[(1, 1)]]]
    }
}

fn plane_bounds(format: &Format) -> DegreeBounds {
    if format.n() == 1 {
        let d = format.d()[0];
        let e = d.saturating_sub(1);
        DegreeBounds { p_x: e, p_y: e, q_x: e, q_y: e }
    } else {
        let (a, b) = (format.d()[0], format.d()[1]);
        DegreeBounds { p_x: a.saturating_sub(1), p_y: b, q_x: a, q_y: b.saturating_sub(1) }
    }
}

struct SearchResult {
    found: Vec<Vec<Vec<Complex64>>>,
    points: Vec<SingularPoint>,
    curve: bool,
}

fn plane_search(eval: &Evaluator, charts: &[Chart], tol: f64, rng: &mut impl Rng) -> SearchResult {
    let format = eval.basis.format();
    let bounds = plane_bounds(format);
    let mut points = Vec::new();
    let mut found = Vec::new();
    let mut curve = false;
    for chart in charts {
        let jac = chart.jacobian(eval.basis.nvars(), 2);
        let sys = PlaneGradient { eval, chart, jac };
        let probes: Vec<Complex64> = (0..4).map(|_| random_unit_disc(rng)).collect();
        let accept = |x: Complex64, y: Complex64| eval.is_singular(&chart.lift(&[x, y]), tol).is_some();
        let sol = plane::solve(&sys, &bounds, &probes, 1e-11, &accept);
        curve |= sol.curve_component;
        for (x, y) in sol.points {
            if let Some(sp) = eval.is_singular(&chart.lift(&[x, y]), tol) {
                found.push(sp.point.clone());
                points.push(sp);
            }
        }
    }
    SearchResult { found, points, curve }
}

/// Damped Gauss–Newton on the homogeneous gradient in one chart.
fn gradient_descent_start(eval: &Evaluator, chart: &Chart, mut u: Vec<Complex64>, max_iter: usize, tol: f64) -> Option<SingularPoint> {
    let basis = eval.basis;
    let (nv, na) = (basis.nvars(), basis.naffine());
    let jac_chart = chart.jacobian(nv, na);
    let residual = |u: &[Complex64]| -> (Vec<Complex64>, f64) {
        let y = chart.lift(u);
        let g = basis.gradient_h(&Complexes, eval.coeffs, &y);
        let n = g.iter().map(|c| c.norm_sqr()).sum::<f64>();
        (g, n)
    };
    let (mut g, mut cost) = residual(&u);
    let mut mu = 1e-3;
    for _ in 0..max_iter {
        if !cost.is_finite() {
            return None;
        }
        let y = chart.lift(&u);
        let h = basis.hessian_h(&Complexes, eval.coeffs, &y);
        let hm = DMatrix::from_fn(nv, nv, |i, j| h[i][j]);
        let j = hm * &jac_chart;
        let jh = j.adjoint();
        let mut a = &jh * &j;
        let gv = nalgebra::DVector::from_column_slice(&g);
        let rhs = -(&jh * gv);
        let diag_max = (0..na).map(|i| a[(i, i)].re).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for i in 0..na {
            a[(i, i)] += Complex64::new(mu * diag_max, 0.0);
        }
        let Some(step) = a.lu().solve(&rhs) else {
            mu *= 10.0;
            continue;
        };
        let trial: Vec<Complex64> = u.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let (tg, tcost) = residual(&trial);
        if tcost.is_finite() && tcost < cost {
            u = trial;
            g = tg;
            cost = tcost;
            mu = (mu * 0.3).max(1e-15);
            if eval.residuals(&chart.lift(&u)).1 <= 1e-14 {
                break;
            }
        } else {
            mu *= 10.0;
            if mu > 1e12 {
                break;
            }
        }
    }
    eval.is_singular(&chart.lift(&u), tol)
}

fn heuristic_search(eval: &Evaluator, charts: &[Chart], config: &TangencyConfig, seed: SeedSplitter) -> SearchResult {
    let na = eval.basis.naffine();
    let results: Vec<Option<SingularPoint>> = (0..config.starts)
        .into_par_iter()
        .map(|s| {
            let chart = &charts[s % charts.len()];
            let mut rng = seed.child(s as u64).rng();
            let u: Vec<Complex64> = (0..na).map(|_| random_unit_disc(&mut rng)).collect();
            gradient_descent_start(eval, chart, u, config.max_iterations, config.singular_tol)
        })
        .collect();
    let points: Vec<SingularPoint> = results.into_iter().flatten().collect();
    SearchResult { found: points.iter().map(|p| p.point.clone()).collect(), points, curve: false }
}

/// Weak-defectivity instance test with `npoints` general double points.
pub fn check_weak_defectivity(format: &Format, npoints: usize, seed: SeedSplitter, config: &TangencyConfig) -> Result<SingularityReport> {
    let mut rng = seed.named("points").rng();
    let scheme = random_scheme_complex(format, SchemeShape::free(npoints), &mut rng);
    let section = kernel_section(format, &scheme, seed.named("section"))?;
    analyze_section(&section, &scheme.free, seed, config)
}

/// Singularity analysis of an explicit section that should be singular at
/// `imposed`.
pub fn analyze_section(
    section: &Section<Complex64>,
    imposed: &[AffinePoint<Complex64>],
    seed: SeedSplitter,
    config: &TangencyConfig,
) -> Result<SingularityReport> {
    let format = &section.format;
    let basis = MonomialBasis::new(format)?;
    let coeff_norm = section.norm();
    if coeff_norm == 0.0 {
        return Err(Error::EmptySystem);
    }
    let eval = Evaluator { basis: &basis, coeffs: &section.coeffs, coeff_norm };

    let mut hessian_ok = Vec::with_capacity(imposed.len());
    let mut ratios = Vec::with_capacity(imposed.len());
    let mut imposed_residual: f64 = 0.0;
    for p in imposed {
        let h = hessian_at(&Complexes, section, p)?;
        let ratio = hessian_ratio(&h);
        ratios.push(ratio);
        hessian_ok.push(ratio > config.hessian_tol);
        let (vr, gr) = eval.residuals(&basis.homogenize(&Complexes, p));
        imposed_residual = imposed_residual.max(vr).max(gr);
    }

    let mut chart_rng = seed.named("charts").rng();
    let mut charts = vec![Chart::standard(format)];
    for _ in 0..config.charts {
        charts.push(Chart::random(format, &mut chart_rng));
    }

    let certified = format.sum_r() == 2 && format.d().iter().sum::<usize>() >= 2;
    let search = if certified {
        plane_search(&eval, &charts, config.singular_tol, &mut seed.named("probes").rng())
    } else {
        heuristic_search(&eval, &charts, config, seed.named("starts"))
    };

    let imposed_h: Vec<Vec<Vec<Complex64>>> = imposed.iter().map(affine_to_homogeneous_factors).collect();
    let imposed_recovered = imposed_h
        .iter()
        .filter(|p| search.found.iter().any(|q| projective_distance(p, q) < SAME_POINT))
        .count();
    let mut extra: Vec<SingularPoint> = Vec::new();
    for sp in search.points {
        if imposed_h.iter().any(|p| projective_distance(p, &sp.point) < SAME_POINT) {
            continue;
        }
        if extra.iter().any(|e| projective_distance(&e.point, &sp.point) < SAME_POINT) {
            continue;
        }
        extra.push(sp);
    }

    Ok(SingularityReport {
        format: format.clone(),
        section: section.coeffs.clone(),
        imposed_points: imposed.to_vec(),
        hessian_ok,
        hessian_ratio: ratios,
        imposed_residual,
        extra_singularities: extra,
        positive_dimensional: search.curve,
        imposed_recovered,
        certification: if certified { Certification::Certified } else { Certification::Heuristic },
        charts: charts.len(),
        starts: if certified { 0 } else { config.starts },
    })
}

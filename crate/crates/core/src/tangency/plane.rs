//! Common zeros of two bivariate polynomials by resultant elimination.
//!
//! The polynomials are only available through evaluation, so every
//! coefficient extraction is a discrete Fourier transform on roots of unity:
//! coefficients in `y` for a fixed `x`, then the resultant `Res_y(P, Q)(x)`
//! from its values on a circle. Roots of the resultant are found as
//! companion-matrix eigenvalues; each is lifted to `(x, y)` candidates and
//! polished by Newton's method on the pair.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Degree bounds of `P` and `Q` in `x` and `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegreeBounds {
    pub p_x: usize,
    pub p_y: usize,
    pub q_x: usize,
    pub q_y: usize,
}

impl DegreeBounds {
    /// Bound on the `x`-degree of `Res_y(P, Q)`.
    pub fn resultant_degree(&self) -> usize {
        self.p_x * self.q_y + self.q_x * self.p_y
    }
}

/// Value of the pair `(P, Q)` and its Jacobian at `(x, y)`.
pub trait PlaneSystem: Sync {
    fn eval(&self, x: Complex64, y: Complex64) -> [Complex64; 2];
    fn jacobian(&self, x: Complex64, y: Complex64) -> [[Complex64; 2]; 2];
}

#[derive(Debug, Clone, Default)]
pub struct PlaneSolution {
    pub points: Vec<(Complex64, Complex64)>,
    /// `P` and `Q` share a factor: the zero set has a curve component and
    /// `points` holds samples of it.
    pub curve_component: bool,
}

fn unity(k: usize, m: usize) -> Complex64 {
    Complex64::from_polar(1.0, TAU * k as f64 / m as f64)
}

/// Coefficients (low to high) of a polynomial of degree `< m` from its values
/// at the `m`-th roots of unity scaled by `radius`.
fn interpolate_circle(values: &[Complex64], radius: f64) -> Vec<Complex64> {
    let m = values.len();
    (0..m)
        .map(|j| {
            let s: Complex64 = values.iter().enumerate().map(|(k, v)| v * unity(k, m).powi(-(j as i32))).sum();
            s / (m as f64 * radius.powi(j as i32))
        })
        .collect()
}

/// Coefficients in `y` of `P(x, .)` and `Q(x, .)`.
fn y_coefficients<S: PlaneSystem + ?Sized>(sys: &S, x: Complex64, b: &DegreeBounds) -> (Vec<Complex64>, Vec<Complex64>) {
    let m = b.p_y.max(b.q_y) + 1;
    let (mut pv, mut qv) = (Vec::with_capacity(m), Vec::with_capacity(m));
    for k in 0..m {
        let [p, q] = sys.eval(x, unity(k, m));
        pv.push(p);
        qv.push(q);
    }
    let mut p = interpolate_circle(&pv, 1.0);
    let mut q = interpolate_circle(&qv, 1.0);
    p.truncate(b.p_y + 1);
    q.truncate(b.q_y + 1);
    (p, q)
}

/// Sylvester matrix of `p` (formal degree `len - 1`) and `q`.
fn sylvester(p: &[Complex64], q: &[Complex64]) -> DMatrix<Complex64> {
    let m = p.len() - 1;
    let n = q.len() - 1;
    let size = m + n;
    let mut s = DMatrix::zeros(size, size);
    for i in 0..n {
        for (j, c) in p.iter().rev().enumerate() {
            s[(i, i + j)] = *c;
        }
    }
    for i in 0..m {
        for (j, c) in q.iter().rev().enumerate() {
            s[(n + i, i + j)] = *c;
        }
    }
    s
}

fn normalized_rows(mut s: DMatrix<Complex64>) -> DMatrix<Complex64> {
    for mut row in s.row_iter_mut() {
        let n = row.norm();
        if n > 0.0 {
            row /= Complex64::new(n, 0.0);
        }
    }
    s
}

/// Roots of `sum c_j z^j` (low to high). Negligible leading coefficients are
/// dropped first.
pub fn poly_roots(coeffs: &[Complex64], rel_trim: f64) -> Vec<Complex64> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Vec::new();
    }
    let mut deg = coeffs.len() - 1;
    while deg > 0 && coeffs[deg].norm() <= rel_trim * scale {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let lead = coeffs[deg];
    let mut comp = DMatrix::<Complex64>::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -coeffs[i] / lead;
    }
    let t = comp.schur().unpack().1;
    let horner = |z: Complex64| -> (Complex64, Complex64) {
        let mut p = ZERO;
        let mut dp = ZERO;
        for c in coeffs[..=deg].iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    };
    (0..deg)
        .map(|i| {
            let mut z = t[(i, i)];
            for _ in 0..3 {
                let (p, dp) = horner(z);
                if dp.norm() == 0.0 {
                    break;
                }
                let step = p / dp;
                if !step.is_finite() || step.norm() > 1e-2 * (1.0 + z.norm()) {
                    break;
                }
                z -= step;
            }
            z
        })
        .collect()
}

/// Newton iteration on the pair; returns the final point and `|(P, Q)|`.
pub fn newton_polish<S: PlaneSystem + ?Sized>(sys: &S, mut x: Complex64, mut y: Complex64, iters: usize) -> (Complex64, Complex64, f64) {
    let mut res = {
        let [p, q] = sys.eval(x, y);
        (p.norm_sqr() + q.norm_sqr()).sqrt()
    };
    for _ in 0..iters {
        let [p, q] = sys.eval(x, y);
        let [[a, b], [c, d]] = sys.jacobian(x, y);
        let det = a * d - b * c;
        if det.norm() == 0.0 || !det.is_finite() {
            break;
        }
        let dx = (d * p - b * q) / det;
        let dy = (a * q - c * p) / det;
        let (nx, ny) = (x - dx, y - dy);
        let [np, nq] = sys.eval(nx, ny);
        let nres = (np.norm_sqr() + nq.norm_sqr()).sqrt();
        if !nres.is_finite() || nres >= res {
            break;
        }
        x = nx;
        y = ny;
        res = nres;
        if dx.norm() + dy.norm() <= 1e-15 * (1.0 + x.norm() + y.norm()) {
            break;
        }
    }
    (x, y, res)
}

/// `sys` restricted to a vertical line; Newton only moves `y`.
struct FixedX<'a, S: ?Sized> {
    sys: &'a S,
    x: Complex64,
}

impl<S: PlaneSystem + ?Sized> PlaneSystem for FixedX<'_, S> {
    fn eval(&self, _x: Complex64, y: Complex64) -> [Complex64; 2] {
        let [p, _] = self.sys.eval(self.x, y);
        [ZERO, p]
    }
    fn jacobian(&self, _x: Complex64, y: Complex64) -> [[Complex64; 2]; 2] {
        let j = self.sys.jacobian(self.x, y);
        [[ONE, ZERO], [ZERO, j[0][1]]]
    }
}

/// Inverse condition of the Sylvester matrix at `x`, rows normalised.
pub fn sylvester_conditioning<S: PlaneSystem + ?Sized>(sys: &S, x: Complex64, b: &DegreeBounds) -> f64 {
    let (p, q) = y_coefficients(sys, x, b);
    crate::linalg::inverse_condition(&normalized_rows(sylvester(&p, &q)))
}

/// All common zeros of `P` and `Q` in `C^2`.
///
/// `accept` decides whether a polished candidate is a genuine zero (the
/// caller knows the natural scale of the system). `probe_x` are generic
/// abscissae used to detect a common factor and, if there is one, to sample
/// the curve.
pub fn solve<S: PlaneSystem + ?Sized>(
    sys: &S,
    bounds: &DegreeBounds,
    probe_x: &[Complex64],
    degenerate_tol: f64,
    accept: &dyn Fn(Complex64, Complex64) -> bool,
) -> PlaneSolution {
    if bounds.p_y + bounds.q_y == 0 {
        return PlaneSolution::default();
    }
    let degenerate = !probe_x.is_empty()
        && probe_x.iter().all(|&x| sylvester_conditioning(sys, x, bounds) < degenerate_tol);
    let mut points: Vec<(Complex64, Complex64)> = Vec::new();
    let push = |x: Complex64, y: Complex64, pts: &mut Vec<(Complex64, Complex64)>| {
        let close = |a: &(Complex64, Complex64)| {
            let scale = 1.0 + x.norm() + y.norm();
            (a.0 - x).norm() + (a.1 - y).norm() <= 1e-7 * scale
        };
        if !pts.iter().any(close) {
            pts.push((x, y));
        }
    };

    if degenerate {
        // a common factor shows up as accepted zeros on every probe line;
        // ill-conditioning without them is only bad scaling
        let mut on_every_probe = true;
        for &x in probe_x {
            let (p, _) = y_coefficients(sys, x, bounds);
            let before = points.len();
            for y in poly_roots(&p, 1e-12) {
                let (_, y, _) = newton_polish(&FixedX { sys, x }, x, y, 10);
                if accept(x, y) {
                    push(x, y, &mut points);
                }
            }
            on_every_probe &= points.len() > before;
        }
        if on_every_probe {
            return PlaneSolution { points, curve_component: true };
        }
        points.clear();
    }

    let deg = bounds.resultant_degree();
    let k = deg + 1;
    let values: Vec<Complex64> = (0..k)
        .map(|j| {
            let (p, q) = y_coefficients(sys, unity(j, k), bounds);
            sylvester(&p, &q).determinant()
        })
        .collect();
    let res = interpolate_circle(&values, 1.0);
    for x0 in poly_roots(&res, 1e-13) {
        let (p, q) = y_coefficients(sys, x0, bounds);
        let mut ys = poly_roots(&p, 1e-12);
        ys.extend(poly_roots(&q, 1e-12));
        for y0 in ys {
            let (x, y, _) = newton_polish(sys, x0, y0, 30);
            if accept(x, y) {
                push(x, y, &mut points);
            }
        }
    }
    PlaneSolution { points, curve_component: false }
}

//! Horace induction on `P^{r_1} x ... x P^{r_n} x P^1`.
//!
//! One step splits a double-point scheme into `l` general points and `h`
//! points on a divisor `D = {t = const}` of type `(0, ..., 0, 1)`. If the
//! residual systems behave (three rank checks), the full system has the
//! expected dimension. The degeneration certificate strings `t0 + 1` such
//! statements together; every statement is an exact rank computation.
//!
//! Dimensions are vector-space dimensions of spaces of sections. Expected
//! dimension means `max(0, ncoeff - conditions)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{divisor_capacity, max_double_points, nef_check, weakly_schedule, Format, PerfectCase, WeaklySchedule};
use crate::interpolation::{secant_dim, sysdim, InterpConfig, SchemeShape, Verdict};
use crate::seed::SeedSplitter;
use crate::tangency::{check_weak_defectivity, ordinary_double_points_only, SingularityReport, TangencyConfig};

/// A rank check together with the inequality it has to satisfy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub label: String,
    pub verdict: Verdict,
    /// For the inequality hypothesis: the upper bound on the dimension.
    pub bound: Option<i64>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoraceStep {
    pub format: Format,
    pub l: usize,
    pub h: usize,
    /// Degree `d_last - 1`, `l` general double points: expected dimension.
    pub residual: Hypothesis,
    /// On `D`, `h` double points: expected dimension.
    pub trace: Hypothesis,
    /// Degree `d_last - 2`, `l` general double points: dimension at most
    /// the residual's expected dimension minus `h`.
    pub vanishing_on_divisor: Hypothesis,
    pub hypotheses_hold: bool,
    /// Degree `d_last`, `l` general plus `h` divisor points, computed
    /// directly.
    pub conclusion: Verdict,
    /// `false` only if the hypotheses hold but the conclusion is not
    /// expected, which would be a bug.
    pub consistent: bool,
}

fn check_line_last(format: &Format) -> Result<()> {
    if format.n() < 2 || *format.r().last().unwrap() != 1 {
        return Err(Error::Precondition(format!("{format}: need at least two factors, the last one P^1")));
    }
    Ok(())
}

/// Sections of `format` with the last degree replaced by `e`, or the first
/// factors alone when `e = 0` (sections constant along `P^1`; a double point
/// then imposes the conditions of its projection).
fn with_last(format: &Format, e: usize) -> Result<Format> {
    if e == 0 {
        format.leading(format.n() - 1)
    } else {
        format.with_last_degree(e)
    }
}

/// Bounds on `(l, h)` for one step.
pub fn step_bounds(format: &Format) -> Result<(usize, usize)> {
    check_line_last(format)?;
    let h0 = divisor_capacity(format)? as usize;
    let lmax = (max_double_points(format)? as usize).saturating_sub(h0);
    Ok((lmax, h0))
}

pub fn horace_step(format: &Format, l: usize, h: usize, config: &InterpConfig, seed: SeedSplitter) -> Result<HoraceStep> {
    check_line_last(format)?;
    let d_last = *format.d().last().unwrap();
    if d_last < 2 {
        return Err(Error::Precondition(format!("{format}: last degree must be at least 2")));
    }
    let (lmax, hmax) = step_bounds(format)?;
    if h > hmax || l > lmax {
        return Err(Error::Precondition(format!("{format}: need h <= {hmax} and l <= {lmax}, got l = {l}, h = {h}")));
    }
    let base = format.leading(format.n() - 1)?;
    let per_point = format.sum_r() + 1;

    let a_format = with_last(format, d_last - 1)?;
    let a = sysdim(&a_format, SchemeShape::free(l), config, seed.named("residual"))?;
    let b = sysdim(&base, SchemeShape::free(h), config, seed.named("trace"))?;
    let c_format = with_last(format, d_last - 2)?;
    let c = sysdim(&c_format, SchemeShape::free(l), config, seed.named("vanishing"))?;

    let bound = a_format.ncoeff_usize()? as i64 - (per_point * l) as i64 - h as i64;
    let residual = Hypothesis { label: "residual".into(), holds: a.is_expected(), verdict: a, bound: None };
    let trace = Hypothesis { label: "trace".into(), holds: b.is_expected(), verdict: b, bound: None };
    let vanishing_on_divisor = Hypothesis {
        label: "vanishing_on_divisor".into(),
        holds: (c.actual_dim as i64) <= bound,
        verdict: c,
        bound: Some(bound),
    };
    let hypotheses_hold = residual.holds && trace.holds && vanishing_on_divisor.holds;
    let conclusion = sysdim(format, SchemeShape { free: l, on_divisor: h }, config, seed.named("conclusion"))?;
    let consistent = !hypotheses_hold || conclusion.is_expected();
    Ok(HoraceStep { format: format.clone(), l, h, residual, trace, vanishing_on_divisor, hypotheses_hold, conclusion, consistent })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateStatus {
    Certified,
    Failed,
    Partial,
}

/// One expected-dimension statement of the degeneration. The statement is
/// settled by `leaf`; `support` is the Horace step that would explain it,
/// recorded when `(l, h)` is within the step's bounds. Its hypotheses may
/// fail (e.g. more divisor points than the residual system has room for)
/// without affecting the statement, but an inconsistent step fails the node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateNode {
    /// `1..=t0` for the degree drops, `t0 + 1` for the final statement.
    pub t: u64,
    pub statement: String,
    pub leaf: Verdict,
    pub support: Option<HoraceStep>,
}

impl CertificateNode {
    pub fn holds(&self) -> bool {
        self.leaf.is_expected() && self.support.as_ref().is_none_or(|s| s.consistent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub statement: String,
    pub format: Format,
    pub schedule: WeaklySchedule,
    pub nodes: Vec<CertificateNode>,
    pub status: CertificateStatus,
    /// First `t` whose statement failed.
    pub failing_t: Option<u64>,
}

impl Certificate {
    pub fn leaf_count(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes whose statement also follows from a verified Horace step.
    pub fn explained_by_horace(&self) -> usize {
        self.nodes.iter().filter(|n| n.support.as_ref().is_some_and(|s| s.hypotheses_hold)).count()
    }
}

/// Checks the `t0 + 1` statements of the degeneration for `s` double points.
/// A certified result means the general section through `s` general double
/// points has only ordinary double points there and is smooth elsewhere.
pub fn certify_weakly(format: &Format, s: u64, config: &InterpConfig, seed: SeedSplitter) -> Result<Certificate> {
    check_line_last(format)?;
    let schedule = weakly_schedule(format, s)?;
    if !schedule.degree_ok {
        return Err(Error::Precondition(format!(
            "{format}: last degree {} < t0 + 3 = {}",
            format.d().last().unwrap(),
            schedule.t0 + 3
        )));
    }
    let (h0, t0) = (schedule.h0 as usize, schedule.t0 as usize);
    let d_last = *format.d().last().unwrap();
    let s = s as usize;
    // (t, degree, free, on divisor)
    let mut plan: Vec<(u64, usize, usize, usize)> =
        (1..=t0).map(|t| (t as u64, d_last - t + 1, s - t * h0, h0)).collect();
    plan.push((t0 as u64 + 1, d_last - t0, 1, s - t0 * h0 - 1));

    let nodes: Vec<CertificateNode> = plan
        .par_iter()
        .map(|&(t, degree, free, on_divisor)| -> Result<CertificateNode> {
            let f = format.with_last_degree(degree)?;
            let node_seed = seed.child(t);
            let leaf = sysdim(&f, SchemeShape { free, on_divisor }, config, node_seed.named("leaf"))?;
            let support = match step_bounds(&f) {
                Ok((lmax, hmax)) if free <= lmax && on_divisor <= hmax => {
                    Some(horace_step(&f, free, on_divisor, config, node_seed.named("step"))?)
                }
                _ => None,
            };
            Ok(CertificateNode {
                t,
                statement: format!("{f}: {free} general + {on_divisor} divisor double points, expected dimension"),
                leaf,
                support,
            })
        })
        .collect::<Result<_>>()?;

    let failing_t = nodes.iter().find(|n| !n.holds()).map(|n| n.t);
    let status = match failing_t {
        None => CertificateStatus::Certified,
        Some(_) if nodes.iter().any(|n| n.holds()) => CertificateStatus::Partial,
        Some(_) => CertificateStatus::Failed,
    };
    Ok(Certificate {
        statement: format!("{format}: general section through {s} general double points has only ordinary double points"),
        format: format.clone(),
        schedule,
        nodes,
        status,
        failing_t,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub case: PerfectCase,
    pub secant: Verdict,
    pub weak_defectivity: Option<SingularityReport>,
    pub certificate: Option<Certificate>,
    pub nef: bool,
    /// Stage at which the pipeline stopped, if it did.
    pub halted_at: Option<String>,
    pub hypotheses_verified: bool,
    pub verdict: String,
}

/// Checks the hypotheses of the multiplicity theorem on one perfect case:
/// non-defectivity of the `k`-th secant, absence of weak defectivity at `k`
/// points (instance test) and, for three factors, the degeneration
/// certificate with `s = k`.
pub fn corollary_pipeline(
    case: &PerfectCase,
    config: &InterpConfig,
    tangency: &TangencyConfig,
    seed: SeedSplitter,
) -> Result<PipelineReport> {
    let format = &case.format;
    let k = case.k as usize;
    let nef = nef_check(format)?;
    let secant = secant_dim(format, k, config, seed.named("secant"))?;
    let mut report = PipelineReport {
        case: case.clone(),
        secant,
        weak_defectivity: None,
        certificate: None,
        nef,
        halted_at: None,
        hypotheses_verified: false,
        verdict: String::new(),
    };
    if report.secant.defective() {
        report.halted_at = Some("secant_dim".into());
        report.verdict = format!("halted: {k}-th secant variety is defective (probabilistic)");
        return Ok(report);
    }
    let weak = match check_weak_defectivity(format, k, seed.named("weak"), tangency) {
        Ok(r) => r,
        Err(Error::EmptySystem) => {
            report.halted_at = Some("weak_defectivity".into());
            report.verdict = "halted: no section singular at the k points".into();
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    let weak_ok = ordinary_double_points_only(&weak);
    report.weak_defectivity = Some(weak);
    let cert_ok = if format.n() == 3 && *format.r().last().unwrap() == 1 {
        let cert = certify_weakly(format, case.k, config, seed.named("certificate"))?;
        let ok = cert.status == CertificateStatus::Certified;
        report.certificate = Some(cert);
        ok
    } else {
        true
    };
    report.hypotheses_verified = weak_ok && cert_ok && nef;
    report.verdict = if report.hypotheses_verified {
        "hypotheses verified (probabilistic): not k-defective, not (k-1)-weakly defective".into()
    } else if !weak_ok {
        report.halted_at = Some("weak_defectivity".into());
        "weakly defective instance found".into()
    } else if !cert_ok {
        report.halted_at = Some("certificate".into());
        "degeneration certificate not established".into()
    } else {
        report.halted_at = Some("nef_check".into());
        "nef inequality fails".into()
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interpolation::VerdictStatus;

    fn fmt(s: &str) -> Format {
        Format::raw(
            s.split(';').next().unwrap()[2..].split(',').map(|x| x.parse().unwrap()).collect(),
            s.split(';').nth(1).unwrap()[2..].split(',').map(|x| x.parse().unwrap()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn step_on_cubic_threefold_format() {
        let f = fmt("r=1,1,1;d=3,3,3");
        let s = horace_step(&f, 8, 5, &InterpConfig::default(), SeedSplitter::new(1)).unwrap();
        assert!(s.hypotheses_hold);
        assert!(s.conclusion.is_expected());
        assert!(s.consistent);
        // degree 2 in the last factor with 8 points: 48 - 32 = 16
        assert_eq!(s.residual.verdict.expected_dim, 16);
        assert_eq!(s.trace.verdict.expected_dim, 1);
        assert_eq!(s.vanishing_on_divisor.bound, Some(11));
        assert_eq!(s.conclusion.expected_dim, 64 - 4 * 13);
    }

    #[test]
    fn step_without_divisor_points() {
        let f = fmt("r=1,1;d=3,4");
        let s = horace_step(&f, 3, 0, &InterpConfig::default(), SeedSplitter::new(2)).unwrap();
        assert!(s.trace.verdict.is_expected());
        assert_eq!(s.trace.verdict.conditions, 0);
        assert_eq!(s.conclusion.conditions, 9);
    }

    #[test]
    fn single_divisor_point() {
        let f = fmt("r=1,1;d=2,3");
        let s = horace_step(&f, 0, 1, &InterpConfig::default(), SeedSplitter::new(3)).unwrap();
        assert!(s.trace.holds);
        assert_eq!(s.trace.verdict.actual_dim, 3 - 2);
    }

    #[test]
    fn degree_two_uses_projection() {
        let f = fmt("r=1,1;d=3,2");
        let s = horace_step(&f, 2, 1, &InterpConfig::default(), SeedSplitter::new(4)).unwrap();
        assert_eq!(s.vanishing_on_divisor.verdict.format, fmt("r=1;d=3"));
        assert!(s.consistent);
    }

    #[test]
    fn step_bounds_are_enforced() {
        let f = fmt("r=1,1;d=3,3");
        let (lmax, hmax) = step_bounds(&f).unwrap();
        assert_eq!(hmax, 2);
        assert_eq!(lmax, 16 / 3 - 2);
        assert!(horace_step(&f, lmax + 1, 0, &InterpConfig::default(), SeedSplitter::new(0)).is_err());
        assert!(horace_step(&f, 0, hmax + 1, &InterpConfig::default(), SeedSplitter::new(0)).is_err());
        assert!(horace_step(&fmt("r=1,2;d=3,3"), 0, 0, &InterpConfig::default(), SeedSplitter::new(0)).is_err());
    }

    #[test]
    fn collapsed_schedule_has_one_node() {
        let f = fmt("r=1,1,1;d=2,2,4");
        let c = certify_weakly(&f, 3, &InterpConfig::default(), SeedSplitter::new(5)).unwrap();
        assert_eq!(c.schedule.t0, 0);
        assert_eq!(c.leaf_count(), 1);
        assert_eq!(c.nodes[0].leaf.scheme, SchemeShape { free: 1, on_divisor: 2 });
    }

    #[test]
    fn degree_threshold_blocks_certificate() {
        // h0 = 3, s = 7 gives t0 = 2, so the last degree must be at least 5
        let f = fmt("r=1,1,1;d=2,2,4");
        assert!(matches!(certify_weakly(&f, 7, &InterpConfig::default(), SeedSplitter::new(0)), Err(Error::Precondition(_))));
    }

    #[test]
    fn small_certificate() {
        let f = fmt("r=1,1,1;d=3,3,6");
        let c = certify_weakly(&f, 20, &InterpConfig::default(), SeedSplitter::new(6)).unwrap();
        assert_eq!(c.schedule.h0, 5);
        assert_eq!(c.schedule.t0, 3);
        assert_eq!(c.leaf_count(), 4);
        assert_eq!(c.status, CertificateStatus::Certified);
        let shapes: Vec<SchemeShape> = c.nodes.iter().map(|n| n.leaf.scheme).collect();
        assert_eq!(
            shapes,
            vec![
                SchemeShape { free: 15, on_divisor: 5 },
                SchemeShape { free: 10, on_divisor: 5 },
                SchemeShape { free: 5, on_divisor: 5 },
                SchemeShape { free: 1, on_divisor: 4 },
            ]
        );
        let degrees: Vec<usize> = c.nodes.iter().map(|n| *n.leaf.format.d().last().unwrap()).collect();
        assert_eq!(degrees, vec![6, 5, 4, 3]);
        assert!(c.nodes.iter().all(|n| n.support.as_ref().is_some_and(|s| s.consistent)));
    }

    #[test]
    fn defective_control_halts_at_secant() {
        let case = PerfectCase {
            format: Format::veronese(2, 2).unwrap(),
            k: 1,
            nu_expected: crate::formats::NuExpectation::Unknown,
            assumption1_ok: None,
        };
        let r = corollary_pipeline(&case, &InterpConfig::default(), &TangencyConfig::default(), SeedSplitter::new(1)).unwrap();
        assert_eq!(r.halted_at.as_deref(), Some("secant_dim"));
        assert_eq!(r.secant.status, VerdictStatus::Deficient);
        assert!(!r.hypotheses_verified);
    }

    #[test]
    fn bidegree_pipeline_passes() {
        let case = crate::formats::enumerate_corollary_two(5).remove(0);
        let r = corollary_pipeline(&case, &InterpConfig::default(), &TangencyConfig::default(), SeedSplitter::new(1)).unwrap();
        assert!(r.hypotheses_verified, "{}", r.verdict);
        assert!(r.certificate.is_none());
    }
}

use anyhow::{bail, Context, Result};
use serde::Serialize;
use waring_core::formats::{self, perfect_k, NuExpectation, PerfectCase};
use waring_core::horace::{certify_weakly, corollary_pipeline, horace_step, PipelineReport};
use waring_core::interpolation::{secant_dim, InterpConfig};
use waring_core::tangency::{check_weak_defectivity, TangencyConfig};
use waring_core::tensor_file::TensorFile;
use waring_core::waring::{nu_experiment, NuConfig, NuReport};
use waring_core::{
    Certificate, CertificateStatus, Format, HoraceStep, SeedSplitter, Section, SingularityReport, Verdict,
    FALLBACK_PRIME, DEFAULT_PRIME, VERSION,
};

use crate::{Cli, Command, Family};

#[derive(Serialize)]
struct Report<'a, T> {
    version: &'static str,
    config: &'a Cli,
    prime: u64,
    fallback_prime: u64,
    /// Root of the seed tree; each subcommand draws from `named(<subcommand>)`.
    seed: u64,
    result: T,
}

#[derive(Serialize)]
struct PipelineResult {
    pipeline: PipelineReport,
    decompositions: Option<NuReport>,
}

fn interp_config(cli: &Cli) -> InterpConfig {
    let prime = cli.global.prime;
    let fallback_prime = if prime == FALLBACK_PRIME { DEFAULT_PRIME } else { FALLBACK_PRIME };
    InterpConfig { prime, fallback_prime, trials: cli.global.trials, ..InterpConfig::default() }
}

pub fn run(cli: &Cli) -> Result<()> {
    match cli.global.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs as usize)
            .build()
            .context("building worker pool")?
            .install(|| dispatch(cli)),
        None => dispatch(cli),
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let root = SeedSplitter::new(cli.global.seed);
    let interp = interp_config(cli);
    match &cli.command {
        Command::Enumerate { corollary, dmax, rmax } => {
            let cases = match corollary {
                Family::Two => formats::enumerate_corollary_two(*dmax),
                Family::Three => formats::enumerate_corollary_three(*dmax),
                Family::Symmetric => formats::enumerate_symmetric(*rmax, *dmax),
            };
            let csv = enumerate_csv(&cases);
            if let Some(path) = &cli.global.out {
                std::fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
            }
            if cli.global.json {
                println!("{}", serde_json::to_string_pretty(&report(cli, &interp, &cases))?);
            } else if cli.global.out.is_none() {
                print!("{csv}");
            } else {
                println!("{} perfect cases", cases.len());
            }
            Ok(())
        }
        Command::Defect { format, k } => {
            let v = secant_dim(format, *k, &interp, root.named("defect"))?;
            emit(cli, &interp, &v, summarize_verdict)
        }
        Command::Weakdefect { format, points, starts } => {
            let config = TangencyConfig { starts: *starts, ..TangencyConfig::default() };
            let r = check_weak_defectivity(format, *points, root.named("weakdefect"), &config)?;
            emit(cli, &interp, &r, summarize_singularities)
        }
        Command::Horace { format, l, h } => {
            let step = horace_step(format, *l, *h, &interp, root.named("horace"))?;
            emit(cli, &interp, &step, summarize_step)
        }
        Command::Certify { format, s } => {
            let c = certify_weakly(format, *s, &interp, root.named("certify"))?;
            emit(cli, &interp, &c, summarize_certificate)
        }
        Command::Decompose { format, k, starts, tol, max_iterations, save_target } => {
            let mut config = NuConfig { tol: *tol, ..NuConfig::default() };
            config.fit.max_iterations = *max_iterations;
            let r = nu_experiment(format, *k, *starts, root.named("decompose"), &config)?;
            if let Some(path) = save_target {
                let section = Section::new(format.clone(), r.target.clone())?;
                TensorFile::from(&section).write(path)?;
            }
            emit(cli, &interp, &r, summarize_nu)
        }
        Command::Pipeline { corollary, d, r, starts } => {
            let case = pipeline_case(*corollary, d, *r)?;
            let pipeline = corollary_pipeline(&case, &interp, &TangencyConfig::default(), root.named("pipeline"))?;
            let decompositions = if *starts > 0 {
                Some(nu_experiment(&case.format, case.k as usize, *starts, root.named("decompose"), &NuConfig::default())?)
            } else {
                None
            };
            emit(cli, &interp, &PipelineResult { pipeline, decompositions }, summarize_pipeline)
        }
    }
}

fn pipeline_case(family: Family, d: &[usize], r: usize) -> Result<PerfectCase> {
    let (format, nu_expected) = match family {
        Family::Two => {
            if d.len() != 2 {
                bail!("the two-factor family takes two degrees");
            }
            (Format::new(vec![1, 1], d.to_vec())?, NuExpectation::Multiple)
        }
        Family::Three => {
            if d.len() != 3 {
                bail!("the three-factor family takes three degrees");
            }
            (Format::new(vec![1, 1, 1], d.to_vec())?, NuExpectation::Multiple)
        }
        Family::Symmetric => {
            if d.len() != 1 {
                bail!("the symmetric family takes one degree");
            }
            let expected = if (r, d[0]) == (2, 5) { NuExpectation::Unique } else { NuExpectation::Unknown };
            (Format::veronese(r, d[0])?, expected)
        }
    };
    let Some(k) = perfect_k(&format)? else {
        bail!("{format} is not a perfect case");
    };
    let assumption1_ok = match family {
        Family::Three => {
            let dd = format.d();
            Some(formats::corollary_three_assumption([dd[0], dd[1], dd[2]], k))
        }
        _ => None,
    };
    Ok(PerfectCase { format, k, nu_expected, assumption1_ok })
}

fn enumerate_csv(cases: &[PerfectCase]) -> String {
    let width = cases.iter().map(|c| c.format.n()).max().unwrap_or(1);
    let mut out = String::from("n,r,");
    for i in 1..=width {
        out += &format!("d{i},");
    }
    out += "k,ncoeff,assumption1_ok\n";
    for c in cases {
        let f = &c.format;
        out += &format!("{},{},", f.n(), f.r()[0]);
        for i in 0..width {
            out += &f.d().get(i).map(|x| x.to_string()).unwrap_or_default();
            out += ",";
        }
        let a = c.assumption1_ok.map(|b| b.to_string()).unwrap_or_default();
        out += &format!("{},{},{a}\n", c.k, f.ncoeff());
    }
    out
}

fn report<'a, T: Serialize>(cli: &'a Cli, interp: &InterpConfig, result: T) -> Report<'a, T> {
    Report {
        version: VERSION,
        config: cli,
        prime: interp.prime,
        fallback_prime: interp.fallback_prime,
        seed: cli.global.seed,
        result,
    }
}

fn emit<T: Serialize>(cli: &Cli, interp: &InterpConfig, result: &T, summary: fn(&T) -> String) -> Result<()> {
    let json = serde_json::to_string_pretty(&report(cli, interp, result))?;
    if let Some(path) = &cli.global.out {
        std::fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
    }
    if cli.global.json {
        println!("{json}");
    } else {
        print!("{}", summary(result));
    }
    Ok(())
}

fn summarize_verdict(v: &Verdict) -> String {
    format!(
        "{} with {} double points ({} on D): rank {} of {} conditions, dim {} (expected {}): {:?}\n",
        v.format, v.scheme.free + v.scheme.on_divisor, v.scheme.on_divisor, v.rank, v.conditions, v.actual_dim, v.expected_dim, v.status
    )
}

fn summarize_singularities(r: &SingularityReport) -> String {
    let nondeg = r.hessian_ok.iter().filter(|&&ok| ok).count();
    format!(
        "{} through {} double points: {}/{} Hessians nondegenerate, {} further singular points{}, search {:?}\nweakly defective: {}\n",
        r.format,
        r.imposed_points.len(),
        nondeg,
        r.hessian_ok.len(),
        r.extra_singularities.len(),
        if r.positive_dimensional { ", singular curve" } else { "" },
        r.certification,
        r.weakly_defective()
    )
}

fn summarize_step(s: &HoraceStep) -> String {
    let mut out = format!("{} with l = {}, h = {}\n", s.format, s.l, s.h);
    for h in [&s.residual, &s.trace, &s.vanishing_on_divisor] {
        let bound = h.bound.map(|b| format!(" (bound {b})")).unwrap_or_default();
        out += &format!("  {}: dim {}{bound}: {}\n", h.label, h.verdict.actual_dim, if h.holds { "holds" } else { "fails" });
    }
    out += &format!("  conclusion: {}", summarize_verdict(&s.conclusion));
    out += &format!("  consistent: {}\n", s.consistent);
    out
}

fn summarize_certificate(c: &Certificate) -> String {
    let mut out = format!(
        "{}: s = {}, h0 = {}, t0 = {}\n",
        c.format, c.schedule.s, c.schedule.h0, c.schedule.t0
    );
    for n in &c.nodes {
        out += &format!("  t = {:>2}: {} -> {}\n", n.t, n.statement, if n.holds() { "ok" } else { "FAILS" });
    }
    out += &format!("{} leaves, {} also explained by a Horace step: {:?}\n", c.leaf_count(), c.explained_by_horace(), c.status);
    if c.status != CertificateStatus::Certified {
        if let Some(t) = c.failing_t {
            out += &format!("first failing t = {t}\n");
        }
    }
    out
}

fn summarize_nu(r: &NuReport) -> String {
    let mut out = format!("{} with {} terms: {}/{} starts converged", r.format, r.k + 1, r.nconverged, r.nstarts);
    if r.ndegenerate > 0 {
        out += &format!(", {} degenerate", r.ndegenerate);
    }
    out += "\n";
    if r.inconclusive {
        out += "inconclusive: too few converged starts\n";
    } else {
        out += &format!("nu >= {} (cluster sizes {:?}, sweep stable: {})\n", r.nu_est, r.cluster_sizes, r.sweep_stable);
    }
    out
}

fn summarize_pipeline(p: &PipelineResult) -> String {
    let r = &p.pipeline;
    let mut out = format!("{} with k = {}\n", r.case.format, r.case.k);
    out += &format!("  secant: {}", summarize_verdict(&r.secant));
    if let Some(w) = &r.weak_defectivity {
        out += &format!("  tangency: {}", summarize_singularities(w));
    }
    if let Some(c) = &r.certificate {
        out += &format!("  certificate: {} leaves, {:?}\n", c.leaf_count(), c.status);
    }
    out += &format!("  nef: {}\n", r.nef);
    out += &format!("{}\n", r.verdict);
    if let Some(nu) = &p.decompositions {
        out += &summarize_nu(nu);
    }
    out
}

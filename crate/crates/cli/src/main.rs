mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use waring_core::{Format, DEFAULT_PRIME};

#[derive(Debug, Parser, Serialize)]
#[command(name = "waring", version, about = "Defectivity checks, Horace certificates and decomposition counts for partially symmetric tensors")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct Global {
    /// Root seed; every random draw descends from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Prime for exact rank computations.
    #[arg(long, global = true, env = "WARING_PRIME", default_value_t = DEFAULT_PRIME, value_parser = parse_prime)]
    pub prime: u64,
    /// Independent random trials per rank verdict.
    #[arg(long, global = true, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub trials: u32,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    #[serde(skip)]
    pub jobs: Option<u64>,
    /// Print the JSON report instead of a summary.
    #[arg(long, global = true)]
    pub json: bool,
    /// Write the report (JSON, or CSV for `enumerate`) to this file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// File of additional flags, one or more per line, `#` comments.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `P^1 x P^1`, `(d1+1)(d2+1) = 3(k+1)`.
    #[value(name = "2")]
    Two,
    /// `(P^1)^3`, `(d1+1)(d2+1)(d3+1) = 4(k+1)`.
    #[value(name = "3")]
    Three,
    /// One factor `P^r`, `(k+1)(r+1) = C(r+d, r)`.
    Symmetric,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum Command {
    /// List the perfect cases of a family as CSV.
    Enumerate {
        #[arg(long, value_enum)]
        corollary: Family,
        #[arg(long)]
        dmax: usize,
        /// Largest `r` for the symmetric family.
        #[arg(long, default_value_t = 4)]
        rmax: usize,
    },
    /// Dimension of the k-th secant variety via double-point interpolation.
    Defect {
        #[arg(long, value_parser = parse_format)]
        #[serde(serialize_with = "ser_format")]
        format: Format,
        #[arg(long)]
        k: usize,
    },
    /// Singularities of a general section through general double points.
    Weakdefect {
        #[arg(long, value_parser = parse_format)]
        #[serde(serialize_with = "ser_format")]
        format: Format,
        #[arg(long)]
        points: usize,
        /// Starts for the heuristic search.
        #[arg(long, default_value_t = 200)]
        starts: usize,
    },
    /// One Horace step with `l` general and `h` divisor points.
    Horace {
        #[arg(long, value_parser = parse_format)]
        #[serde(serialize_with = "ser_format")]
        format: Format,
        #[arg(long)]
        l: usize,
        #[arg(long)]
        h: usize,
    },
    /// Degeneration certificate for `s` double points.
    Certify {
        #[arg(long, value_parser = parse_format)]
        #[serde(serialize_with = "ser_format")]
        format: Format,
        #[arg(long)]
        s: u64,
    },
    /// Multi-start decompositions of a random target with `k + 1` terms.
    Decompose {
        #[arg(long, value_parser = parse_format)]
        #[serde(serialize_with = "ser_format")]
        format: Format,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 200)]
        starts: usize,
        /// Cluster tolerance.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 400)]
        max_iterations: usize,
        /// Also write the target as a tensor file.
        #[arg(long)]
        save_target: Option<PathBuf>,
    },
    /// All checks for one perfect case of a family.
    Pipeline {
        #[arg(long, value_enum)]
        corollary: Family,
        /// Degrees, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        d: Vec<usize>,
        /// Factor dimension for the symmetric family.
        #[arg(long, default_value_t = 2)]
        r: usize,
        /// Decomposition starts; 0 skips the count.
        #[arg(long, default_value_t = 0)]
        starts: usize,
    },
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse::<Format>().map_err(|e| e.to_string())
}

fn ser_format<S: serde::Serializer>(f: &Format, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&f.to_string())
}

fn parse_prime(s: &str) -> Result<u64, String> {
    let p: u64 = s.parse().map_err(|e| format!("{e}"))?;
    if !(3..1 << 32).contains(&p) {
        return Err("prime must lie in [3, 2^32)".into());
    }
    if (2..).take_while(|i| i * i <= p).any(|i| p.is_multiple_of(i)) {
        return Err(format!("{p} is not prime"));
    }
    Ok(p)
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::try_parse_from(args).unwrap_or_else(|e| e.exit());
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

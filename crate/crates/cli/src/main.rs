use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use iocc::experiment::{make_example1, make_example2, make_example3};
use iocc::sweep::{run_sweep, write_outputs};
use iocc::{Criterion, Error, ExperimentSpec};

/// RAU placement sweeps comparing location-only and input-output clustering.
#[derive(Parser, Debug)]
#[command(name = "iocc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// 2 km line with a linear demand ramp.
    Example1(Overrides),
    /// 500×500 m area with PPP users and a diagonal demand ramp.
    Example2(Overrides),
    /// 500×500 m area with a radial demand peak and equal powers.
    Example3 {
        #[command(flatten)]
        overrides: Overrides,
        /// Path-loss exponent; runs 3 and 4 (in subdirectories) when omitted.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Runs a TOML spec file.
    Run {
        spec_file: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// RAU counts: `1..6` (inclusive), `2,4,8` or a single number.
    #[arg(long, value_parser = parse_k_sweep)]
    k_sweep: Option<KList>,
    /// `sdc`, `iocc` or `both`.
    #[arg(long)]
    criterion: Option<String>,
    /// Number of seeds.
    #[arg(long)]
    seeds: Option<usize>,
    /// Monte Carlo draws per location.
    #[arg(long)]
    mc_draws: Option<usize>,
    /// Evaluate at most this many locations per cell (0 = all).
    #[arg(long)]
    eval_locations: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
struct KList(Vec<usize>);

fn parse_k_sweep(s: &str) -> Result<KList, String> {
    let bad = |e: std::num::ParseIntError| format!("invalid K list `{s}`: {e}");
    let ks: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b): (usize, usize) = (a.trim().parse().map_err(bad)?, b.trim().parse().map_err(bad)?);
        (a..=b).collect()
    } else {
        s.split(',').map(|v| v.trim().parse().map_err(bad)).collect::<Result<_, _>>()?
    };
    if ks.is_empty() {
        return Err(format!("empty K list `{s}`"));
    }
    Ok(KList(ks))
}

fn parse_criteria(s: &str) -> Result<Vec<Criterion>, Error> {
    if s.eq_ignore_ascii_case("both") {
        return Ok(vec![Criterion::Sdc, Criterion::Iocc]);
    }
    s.split(',')
        .map(|c| c.trim().parse().map_err(Error::InvalidExperiment))
        .collect()
}

impl Overrides {
    fn apply(&self, spec: &mut ExperimentSpec) -> Result<(), Error> {
        if let Some(k) = &self.k_sweep {
            spec.run.k_sweep = k.0.clone();
        }
        if let Some(c) = &self.criterion {
            spec.run.criteria = parse_criteria(c)?;
        }
        if let Some(s) = self.seeds {
            spec.run.seeds = s;
        }
        if let Some(d) = self.mc_draws {
            spec.mc.num_draws = d;
        }
        if let Some(e) = self.eval_locations {
            spec.mc.eval_locations = e;
        }
        spec.validate()
    }
}

enum Failure {
    Validation(Error),
    Runtime(String),
}

fn run_one(spec: &ExperimentSpec, out: &Path) -> Result<(), Failure> {
    let result = run_sweep(spec).map_err(|e| match e {
        Error::InvalidExperiment(_) | Error::InvalidScenario(_) => Failure::Validation(e),
        other => Failure::Runtime(other.to_string()),
    })?;
    write_outputs(&result, spec, out).map_err(|e| Failure::Runtime(e.to_string()))?;
    log::info!(
        "{}: {} cells written to {}",
        spec.name,
        result.cells.len(),
        out.display()
    );
    if result.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!(
            "{} of {} cells failed; see {}",
            result.failures.len(),
            result.failures.len() + result.cells.len(),
            out.join("failures.csv").display()
        )))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    ExitCode::from(execute(&Cli::parse()))
}

/// Runs the parsed command and returns the process exit code.
fn execute(cli: &Cli) -> u8 {
    let mut jobs: Vec<(ExperimentSpec, PathBuf)> = Vec::new();
    let prepared = (|| -> Result<(), Error> {
        match &cli.command {
            Command::Example1(o) | Command::Example2(o) => {
                let mut spec = if matches!(cli.command, Command::Example1(_)) {
                    make_example1()
                } else {
                    make_example2()
                };
                o.apply(&mut spec)?;
                let out = o.out.clone().unwrap_or_else(|| PathBuf::from("out").join(&spec.name));
                jobs.push((spec, out));
            }
            Command::Example3 { overrides, alpha } => {
                let alphas = alpha.map_or(vec![3.0, 4.0], |a| vec![a]);
                let root = overrides.out.clone().unwrap_or_else(|| PathBuf::from("out").join("example3"));
                for a in alphas {
                    let mut spec = make_example3(a);
                    overrides.apply(&mut spec)?;
                    let out = if alpha.is_some() { root.clone() } else { root.join(format!("alpha{a}")) };
                    jobs.push((spec, out));
                }
            }
            Command::Run { spec_file, overrides } => {
                let mut spec = ExperimentSpec::from_file(spec_file)?;
                overrides.apply(&mut spec)?;
                let out = overrides.out.clone().unwrap_or_else(|| PathBuf::from("out").join(&spec.name));
                jobs.push((spec, out));
            }
        }
        Ok(())
    })();
    if let Err(e) = prepared {
        eprintln!("error: {e}");
        return 2;
    }
    for (spec, out) in &jobs {
        match run_one(spec, out) {
            Ok(()) => {}
            Err(Failure::Validation(e)) => {
                eprintln!("error: {e}");
                return 2;
            }
            Err(Failure::Runtime(msg)) => {
                eprintln!("error: {msg}");
                return 3;
            }
        }
    }
    0
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use corona::instance::InstanceFile;
use corona::suite::{self, CheckRow, SuiteConfig, SuiteReport, RIESZ_BAND};
use corona::{generate_instance, CoronaInstance, GenerateSpec, Result};

#[derive(Parser)]
#[command(name = "corona", version, about = "Numerical checks for the matrix-valued H^p corona problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded instance with certified delta^2.
    Gen(GenArgs),
    /// Closed-form derivative identities against finite differences.
    CheckIdentities(SuiteArgs),
    /// Potential bounds and Laplacian inequalities.
    CheckPotentials(SuiteArgs),
    /// Carleson and xi embedding inequalities (disk instances).
    CheckEmbedding(SuiteArgs),
    /// Dual functional split and bound.
    CheckFunctional(SuiteArgs),
    /// Minimal-norm solution against the explicit bound.
    Solve(SuiteArgs),
    /// Splittings of (H^2)^perp and of Pi (H^2)^perp on the torus.
    Decompose(SuiteArgs),
    /// Empirical Riesz projection norm.
    Riesz(RieszArgs),
    /// Every check: quadrature, outer functions, Riesz and per-instance suites.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1)]
    rows: usize,
    #[arg(long, default_value_t = 2)]
    cols: usize,
    #[arg(long, default_value_t = 1)]
    nvars: usize,
    #[arg(long, default_value_t = 1)]
    degree: usize,
    /// `c` in `F0 = [c I | G]`.
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    /// Scale of the random block; 0 gives constant F.
    #[arg(long, default_value_t = 1.0)]
    coupling: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exponent stored in the file (number or `inf`).
    #[arg(long, default_value = "2")]
    p: String,
    /// Number of instances, seeded `seed..seed+count`.
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Output file, or directory when `--count` exceeds one. Stdout if absent.
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Residual tolerance for the identity checks.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Grid size override (identity mesh, potential density or quadrature radial count).
    #[arg(long)]
    grid: Option<usize>,
    /// Fourier band for the torus model.
    #[arg(long, default_value_t = 32)]
    band: usize,
    /// Truncation degree for the solver.
    #[arg(long)]
    trunc: Option<usize>,
    /// Exponent override (number or `inf`).
    #[arg(long)]
    p: Option<String>,
    /// Random draws per instance.
    #[arg(long, default_value_t = 5)]
    trials: usize,
    /// Write the report here instead of stdout.
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
    /// Fill the runtime column.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct SuiteArgs {
    /// Instance files.
    #[arg(long = "instance", required = true, num_args = 1..)]
    instances: Vec<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct RieszArgs {
    #[arg(long, default_value = "4")]
    p: String,
    #[arg(long, default_value_t = RIESZ_BAND)]
    band: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "instance", num_args = 1..)]
    instances: Vec<PathBuf>,
    #[command(flatten)]
    common: Common,
    /// Band for the Riesz rows.
    #[arg(long, default_value_t = RIESZ_BAND)]
    riesz_band: usize,
}

fn parse_p(s: &str) -> std::result::Result<f64, String> {
    match s {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => s.parse::<f64>().map_err(|e| format!("invalid exponent {s:?}: {e}")),
    }
}

impl Common {
    fn config(&self) -> std::result::Result<SuiteConfig, String> {
        Ok(SuiteConfig {
            seed: self.seed,
            tol: self.tol,
            grid: self.grid,
            band: self.band,
            truncation: self.trunc,
            p: self.p.as_deref().map(parse_p).transpose()?,
            trials: self.trials,
            ..SuiteConfig::default()
        })
    }
}

fn load(paths: &[PathBuf]) -> Result<Vec<CoronaInstance>> {
    paths.iter().map(|p| InstanceFile::read(p)?.to_instance()).collect()
}

type Runner = fn(&CoronaInstance, &SuiteConfig) -> Result<Vec<CheckRow>>;

/// Runs `runner` on every instance in parallel and keeps input order.
fn per_instance(insts: &[CoronaInstance], cfg: &SuiteConfig, runner: Runner) -> Result<Vec<CheckRow>> {
    let chunks: Vec<Vec<CheckRow>> = insts.par_iter().map(|i| runner(i, cfg)).collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

fn emit(report: &SuiteReport, timing: bool, output: Option<&Path>) -> std::io::Result<()> {
    let text = report.to_tsv(timing);
    match output {
        Some(path) => std::fs::write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_gen(args: &GenArgs) -> std::result::Result<(), String> {
    let p = parse_p(&args.p)?;
    let mut texts = Vec::new();
    for k in 0..args.count {
        let spec = GenerateSpec {
            coupling: args.coupling,
            ..GenerateSpec::new(args.rows, args.cols, args.nvars, args.degree, args.delta, args.seed + k)
        };
        let mut inst = generate_instance(&spec).map_err(|e| e.to_string())?;
        inst.p = p;
        texts.push((inst.name.clone(), InstanceFile::from_instance(&inst).to_json()));
    }
    match &args.output {
        None => texts.iter().for_each(|(_, t)| print!("{t}")),
        Some(path) if args.count == 1 => std::fs::write(path, &texts[0].1).map_err(|e| format!("{}: {e}", path.display()))?,
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            for (name, t) in &texts {
                let path = dir.join(format!("{name}.json"));
                std::fs::write(&path, t).map_err(|e| format!("{}: {e}", path.display()))?;
            }
        }
    }
    Ok(())
}

fn run_suite(cmd: &Command) -> std::result::Result<(SuiteReport, bool, Option<PathBuf>), String> {
    let mut report = SuiteReport::default();
    let err = |e: corona::CoronaError| e.to_string();
    let (common, rows) = match cmd {
        Command::Gen(_) => unreachable!("handled separately"),
        Command::Riesz(a) => {
            let cfg = SuiteConfig { seed: a.seed, trials: a.trials, ..SuiteConfig::default() };
            report.extend(suite::riesz_checks(parse_p(&a.p)?, a.band, &cfg).map_err(err)?);
            return Ok((report, a.timing, a.output.clone()));
        }
        Command::Report(a) => {
            let cfg = a.common.config()?;
            let insts = load(&a.instances).map_err(err)?;
            let q = cfg.disk_quadrature().map_err(err)?;
            let mut rows = suite::quadrature_checks(&q, &cfg).map_err(err)?;
            rows.extend(suite::outer_checks(&cfg).map_err(err)?);
            for p in [2.0, 4.0] {
                rows.extend(suite::riesz_checks(p, a.riesz_band, &cfg).map_err(err)?);
            }
            rows.extend(per_instance(&insts, &cfg, suite::instance_report).map_err(err)?);
            (&a.common, rows)
        }
        Command::CheckIdentities(a)
        | Command::CheckPotentials(a)
        | Command::CheckEmbedding(a)
        | Command::CheckFunctional(a)
        | Command::Solve(a)
        | Command::Decompose(a) => {
            let runner: Runner = match cmd {
                Command::CheckIdentities(_) => suite::identity_checks,
                Command::CheckPotentials(_) => suite::potential_checks,
                Command::CheckEmbedding(_) => suite::embedding_checks,
                Command::CheckFunctional(_) => suite::functional_checks,
                Command::Solve(_) => suite::solve_checks,
                _ => suite::decompose_checks,
            };
            let cfg = a.common.config()?;
            let insts = load(&a.instances).map_err(err)?;
            (&a.common, per_instance(&insts, &cfg, runner).map_err(err)?)
        }
    };
    report.extend(rows);
    Ok((report, common.timing, common.output.clone()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Gen(args) = &cli.command {
        return match run_gen(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        };
    }
    match run_suite(&cli.command) {
        Ok((report, timing, output)) => {
            if let Err(e) = emit(&report, timing, output.as_deref()) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            for r in report.failures() {
                eprintln!("FAIL {} {} value={:e} bound={:?}", r.instance, r.check, r.value, r.bound);
            }
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

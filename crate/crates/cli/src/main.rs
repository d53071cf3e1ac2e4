//! Command-line front end: flag parsing, problem resolution, dispatch to the
//! library operations, and the exit-code contract (0 = pass, 1 = the checked
//! property fails or an obstruction was found, 2 = usage or runtime error).

mod commands;
mod config;
mod presets;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use commands::Problem;
use report::{ArtifactSink, Verdict};

#[derive(Parser)]
#[command(
    name = "affine-spectra",
    version,
    about = "Constructs and numerically certifies spectra and Fourier frames for integral self-affine measures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InputArgs {
    /// Bundled example problem to run on.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// JSON problem description (see README for the schema).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CommonArgs {
    /// Output directory for report.json and artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Numeric tolerance for the command's verdict.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Verify that (R, B, L) forms a compatible exponential-matrix triple.
    VerifyTriple {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Report the invariant lattice of (R, B) and the reduced pair.
    LatticeInfo {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Sample the attractor exactly at a fixed cylinder depth.
    Attractor {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Cylinder depth of the sample.
        #[arg(long, default_value_t = 6)]
        depth: u32,
    },
    /// Scan the fundamental domain for periodic-zero obstructions.
    ZeroScan {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Grid resolution per coordinate.
        #[arg(long, default_value_t = 16)]
        grid: u32,
        /// Integer translation window half-width.
        #[arg(long, default_value_t = 4)]
        window: i64,
    },
    /// Build the candidate frequency set of the default staged plan.
    SpectrumBuild {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Number of construction stages.
        #[arg(long = "K", value_name = "STAGES", default_value_t = 6)]
        k: usize,
    },
    /// Check packing sums and pairwise orthogonality of the candidate set.
    JpCheck {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Number of construction stages.
        #[arg(long = "K", value_name = "STAGES", default_value_t = 6)]
        k: usize,
        /// Grid resolution per coordinate.
        #[arg(long, default_value_t = 16)]
        grid: u32,
    },
    /// Track the running transform-modulus minimum over the staged build.
    Delta {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Number of construction stages.
        #[arg(long = "K", value_name = "STAGES", default_value_t = 8)]
        k: usize,
    },
    /// Certify frame bounds: tower certificate with L, dense bounds without.
    FrameBounds {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Cylinder depth n of the system.
        #[arg(long, default_value_t = 1)]
        depth: u32,
    },
    /// Search residue subsets for the best lower frame bound.
    FrameSearch {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Cylinder depth n of the system.
        #[arg(long, default_value_t = 1)]
        depth: u32,
        /// Subset size (default: the number of depth-n digit words).
        #[arg(long)]
        size: Option<usize>,
        /// Seed for the randomized restarts of the greedy fallback.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare step-function energies against their frequency coefficients.
    StepCheck {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Number of construction stages for the frequency set.
        #[arg(long = "K", value_name = "STAGES", default_value_t = 6)]
        k: usize,
        /// Cylinder depth of the random step functions.
        #[arg(long, default_value_t = 2)]
        depth: u32,
        /// Number of random step functions.
        #[arg(long, default_value_t = 100)]
        trials: u32,
        /// Seed for the random step functions.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn resolve(input: &InputArgs) -> Result<Problem> {
    let cfg = match (&input.preset, &input.config) {
        (Some(name), None) => presets::preset(name).with_context(|| {
            format!(
                "unknown preset `{name}`; available: {}",
                presets::PRESET_NAMES.join(", ")
            )
        })?,
        (None, Some(path)) => config::parse_config(path)?,
        (None, None) => bail!("choose a problem with --preset or --config"),
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    cfg.validate()?;
    Ok(Problem::new(cfg))
}

fn drive(
    name: &str,
    input: &InputArgs,
    common: &CommonArgs,
    f: impl FnOnce(&Problem, f64, &mut ArtifactSink) -> Result<(Verdict, Value)>,
) -> Result<Verdict> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring --threads")?;
    }
    let problem = resolve(input)?;
    let start = Instant::now();
    let mut sink = ArtifactSink::new(&common.out);
    let (verdict, details) = f(&problem, common.tol, &mut sink)?;
    let wall = start.elapsed().as_millis();
    let report = sink.finish(name, &problem.config, common.tol, &verdict, details, wall)?;
    match &verdict {
        Verdict::Pass => println!("{name}: pass"),
        Verdict::Fail(reason) => println!("{name}: FAIL — {reason}"),
    }
    println!("{}", serde_json::to_string_pretty(&report.details)?);
    println!("report: {}", common.out.join("report.json").display());
    Ok(verdict)
}

fn run(cli: Cli) -> Result<Verdict> {
    match cli.command {
        Command::VerifyTriple { input, common } => drive("verify-triple", &input, &common, |p, tol, sink| {
            commands::cmd_verify_triple(p, tol, sink)
        }),
        Command::LatticeInfo { input, common } => drive("lattice-info", &input, &common, |p, _tol, sink| {
            commands::cmd_lattice_info(p, sink)
        }),
        Command::Attractor { input, common, depth } => drive("attractor", &input, &common, |p, _tol, sink| {
            commands::cmd_attractor(p, depth, sink)
        }),
        Command::ZeroScan { input, common, grid, window } => {
            drive("zero-scan", &input, &common, |p, tol, sink| {
                commands::cmd_zero_scan(p, grid, window, tol, sink)
            })
        }
        Command::SpectrumBuild { input, common, k } => {
            drive("spectrum-build", &input, &common, |p, _tol, sink| {
                commands::cmd_spectrum_build(p, k, sink)
            })
        }
        Command::JpCheck { input, common, k, grid } => {
            drive("jp-check", &input, &common, |p, _tol, sink| {
                commands::cmd_jp_check(p, k, grid, sink)
            })
        }
        Command::Delta { input, common, k } => drive("delta", &input, &common, |p, _tol, sink| {
            commands::cmd_delta(p, k, sink)
        }),
        Command::FrameBounds { input, common, depth } => {
            drive("frame-bounds", &input, &common, |p, tol, sink| {
                commands::cmd_frame_bounds(p, depth, tol, sink)
            })
        }
        Command::FrameSearch { input, common, depth, size, seed } => {
            drive("frame-search", &input, &common, |p, _tol, sink| {
                commands::cmd_frame_search(p, depth, size, seed, sink)
            })
        }
        Command::StepCheck { input, common, k, depth, trials, seed } => {
            drive("step-check", &input, &common, |p, _tol, sink| {
                commands::cmd_step_check(p, k, depth, trials, seed, sink)
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(verdict) => {
            if verdict.is_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

//! `magnilift`: command-line front end. JSON results go to stdout (or
//! `--output`); summaries go to stderr with `-v`. Exit status is 0 for a
//! definitive verdict, 2 for an inconclusive one and 1 for input errors.

mod commands;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use magnilift::instance_gen::{GenKind, GenParams};

use commands::{Common, MethodArg, Outcome, Report};
use input::InputError;

#[derive(Parser, Debug)]
#[command(name = "magnilift", version, about = "Vector and phase retrieval from magnitudes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Write the JSON result here instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Numerical tolerance (each command documents its default).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Search budget for randomized searches.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Random seed.
    #[arg(long, global = true, env = "MAGNILIFT_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads for parallel searches.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Print a summary on stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Reconstruct a vector field from norms of vertices and edge differences.
    ReconstructField {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
        /// Largest accepted consistency residual (default 1e-6).
        #[arg(long)]
        residual_tol: Option<f64>,
        /// Positive-definiteness threshold of the simplex tests (default 1e-10).
        #[arg(long)]
        pd_tol: Option<f64>,
    },
    /// Build the simplex graph of an instance (`--tol` is the definiteness threshold).
    SimplexGraph {
        #[arg(short, long)]
        input: PathBuf,
    },
    /// Decide conjugate phase retrieval for a real measurement matrix.
    CertifyRange {
        /// Matrix as CSV rows or JSON.
        #[arg(short, long, visible_alias = "matrix")]
        input: PathBuf,
        /// Check a single complex vector given as `re,im` lines or JSON pairs.
        #[arg(long)]
        vector: Option<PathBuf>,
    },
    /// Evaluate the uniqueness criterion of a hat-spline coefficient sequence.
    HatCheck {
        #[arg(short, long, visible_alias = "coeffs")]
        input: PathBuf,
    },
    /// Recover all coefficient classes consistent with magnitude samples.
    HatRecover {
        #[arg(short, long, visible_alias = "samples")]
        input: PathBuf,
    },
    /// Check conjugate phase retrieval of a quaternion function.
    QuatCheck {
        #[arg(short, long, visible_alias = "function")]
        input: PathBuf,
        /// Candidate functions with the same magnitudes.
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// Basis of the real space W_R (JSON list of real vectors); default: all functions.
        #[arg(long)]
        space: Option<PathBuf>,
    },
    /// Check phase retrieval for affine measurements.
    AffineCheck {
        #[arg(short, long, visible_alias = "system")]
        input: PathBuf,
    },
    /// Generate a synthetic instance.
    Gen {
        #[arg(long, value_parser = parse_kind)]
        kind: GenKind,
        #[command(flatten)]
        params: GenArgs,
    },
    /// Replace the field of an instance by its observation.
    Observe {
        #[arg(short, long)]
        input: PathBuf,
        /// Keep the field next to the norms.
        #[arg(long)]
        keep_field: bool,
    },
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    length: Option<usize>,
    /// References per affine measurement.
    #[arg(short = 'N', long)]
    refs: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    directions: Option<usize>,
    #[arg(long)]
    im_positions: Option<usize>,
    #[arg(long)]
    mode: Option<String>,
}

impl From<GenArgs> for GenParams {
    fn from(a: GenArgs) -> Self {
        GenParams {
            n: a.n,
            d: a.d,
            m: a.m,
            length: a.length,
            refs: a.refs,
            p: a.p,
            density: a.density,
            directions: a.directions,
            im_positions: a.im_positions,
            mode: a.mode,
        }
    }
}

fn parse_kind(s: &str) -> Result<GenKind, String> {
    s.parse::<GenKind>().map_err(|e| {
        let names: Vec<_> = GenKind::ALL.iter().map(|k| k.name()).collect();
        format!("{e}; expected one of {}", names.join(", "))
    })
}

fn run(cli: Cli) -> Result<Report, InputError> {
    let g = &cli.global;
    let common = Common {
        tol: g.tol,
        budget: g.budget,
        seed: g.seed,
    };
    if let Some(t) = g.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(InputError::Invalid {
                path: "--tol".into(),
                message: format!("must be a positive number, got {t}"),
            });
        }
    }
    match cli.command {
        Command::ReconstructField {
            input,
            method,
            residual_tol,
            pd_tol,
        } => commands::reconstruct_field(&input, method, residual_tol, pd_tol, &common),
        Command::SimplexGraph { input } => commands::simplex_graph(&input, &common),
        Command::CertifyRange { input, vector } => commands::certify_range(&input, vector.as_ref(), &common),
        Command::HatCheck { input } => commands::hat_check(&input, &common),
        Command::HatRecover { input } => commands::hat_recover(&input, &common),
        Command::QuatCheck {
            input,
            candidates,
            space,
        } => commands::quat_check(&input, candidates.as_ref(), space.as_ref(), &common),
        Command::AffineCheck { input } => commands::affine_check(&input, &common),
        Command::Gen { kind, params } => commands::gen(kind, params.into(), &common),
        Command::Observe { input, keep_field } => commands::observe(&input, keep_field),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let threads = cli.global.threads.max(1);
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("error: thread pool: {e}");
        return ExitCode::from(1);
    }
    let verbose = cli.global.verbose;
    let output = cli.global.output.clone();
    let report = match run(cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if verbose >= 1 {
        eprintln!("{}", report.summary);
    }
    match output {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, &report.json) {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{}", report.json),
    }
    match report.outcome {
        Outcome::Definitive => ExitCode::SUCCESS,
        Outcome::Inconclusive => ExitCode::from(2),
    }
}

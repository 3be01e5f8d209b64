//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 deck or input error, 3 numerical
//! failure, 4 validation tolerance missed.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::deck::{load_deck_with, Deck, OutputFormat};
use crate::error::Error;
use crate::output::write_text;
use crate::runtime::Runtime;
use crate::simulation::Simulation;
use crate::study::{run_bench, run_convergence};
use crate::validate::{run_case, Case};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DECK: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "peridyn", version, about = "Meshfree peridynamics simulations")]
pub struct Cli {
    /// Worker threads; defaults to PERIDYN_THREADS or the core count.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a deck and write snapshots.
    Run(RunArgs),
    /// Estimate the convergence rate over a series of refined meshes.
    Converge(ConvergeArgs),
    /// Compare a built-in case against classical elasticity.
    Validate(ValidateArgs),
    /// Time a deck for several thread counts.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct DeckArgs {
    #[arg(long)]
    pub deck: PathBuf,

    /// `key.path=value` in deck units; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Vtk,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Vtk => OutputFormat::Vtk,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub deck: DeckArgs,

    /// Snapshot directory; overrides the deck.
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub deck: DeckArgs,

    /// Mesh spacings in metres, coarse to fine, refined by a constant ratio.
    #[arg(long = "h", value_delimiter = ',', required = true)]
    pub spacings: Vec<f64>,

    /// Time window `lo,hi` left out of the averaged rate.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub exclude: Option<Vec<f64>>,

    /// Directory receiving `rates.csv`; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// `1d-tensile` or `2d-tensile`.
    #[arg(value_parser = parse_case)]
    pub case: Case,

    /// `key.path=value` applied to the built-in deck; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Directory receiving `<case>_comparison.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub deck: DeckArgs,

    /// Thread counts to time, e.g. `1,2,4`.
    #[arg(long = "thread-list", value_delimiter = ',', default_value = "1")]
    pub thread_list: Vec<usize>,

    /// Directory receiving `bench.csv` and `counters.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_case(s: &str) -> Result<Case, String> {
    s.parse()
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Deck(_)
        | Error::Geometry(_)
        | Error::Horizon(_)
        | Error::Parameter(_)
        | Error::Dimension(_)
        | Error::ZeroLengthBond(..)
        | Error::Io { .. } => EXIT_DECK,
        _ => EXIT_NUMERICAL,
    }
}

/// Parses `args` (including the program name) and runs the command,
/// writing to the process streams.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// As [`main_with_args`], with explicit output streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn runtime(threads: Option<usize>) -> crate::Result<Runtime> {
    match threads {
        Some(t) => Runtime::new(t),
        None => Runtime::from_env(),
    }
}

fn load(args: &DeckArgs) -> crate::Result<Deck> {
    Ok(load_deck_with(&args.deck, &args.overrides)?)
}

fn write_or_print(out: &mut dyn Write, dir: Option<&Path>, name: &str, text: &str) -> crate::Result<()> {
    match dir {
        Some(dir) => {
            let path = dir.join(name);
            write_text(&path, text)?;
            let _ = writeln!(out, "wrote {}", path.display());
        }
        None => {
            let _ = out.write_all(text.as_bytes());
        }
    }
    Ok(())
}

fn execute(cli: Cli, out: &mut dyn Write) -> crate::Result<i32> {
    match cli.command {
        Command::Run(args) => {
            let rt = runtime(cli.threads)?;
            let deck = load(&args.deck)?;
            let dir = args
                .out
                .or_else(|| deck.output.directory.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let format = args.format.map_or(deck.output.format, OutputFormat::from);
            let sim = Simulation::from_deck(deck, &rt)?;
            let _ = writeln!(out, "{} nodes, {} bonds, {} threads", sim.body.len(), sim.body.nbrs.bond_count(), rt.threads());
            let result = sim.run(&rt)?;
            for (s, report) in result.newton.iter().enumerate() {
                for (k, r) in report.residuals.iter().enumerate() {
                    let _ = writeln!(out, "load step {} iteration {k}: |r| = {r:e}", s + 1);
                }
            }
            let paths = sim.write_outputs(&result, &dir, format, &rt)?;
            let _ = writeln!(out, "wrote {} snapshots to {}", paths.len(), dir.display());
            Ok(EXIT_OK)
        }
        Command::Converge(args) => {
            let rt = runtime(cli.threads)?;
            let deck = load(&args.deck)?;
            let exclude = match args.exclude.as_deref() {
                None => None,
                Some([lo, hi]) if lo <= hi => Some((*lo, *hi)),
                Some(w) => return Err(Error::Parameter(format!("--exclude needs lo,hi, got {w:?}"))),
            };
            let study = run_convergence(&deck, &args.spacings, &rt)?;
            write_or_print(out, args.out.as_deref(), "rates.csv", &study.csv())?;
            for (k, mean) in study.means(exclude).iter().enumerate() {
                match mean {
                    Some(a) => writeln!(out, "set {}: mean rate {a:.4}", k + 1),
                    None => writeln!(out, "set {}: mean rate undefined", k + 1),
                }
                .ok();
            }
            Ok(EXIT_OK)
        }
        Command::Validate(args) => {
            let rt = runtime(cli.threads)?;
            let report = run_case(args.case, &args.overrides, &rt)?;
            if let Some(dir) = &args.out {
                let path = dir.join(format!("{}_comparison.csv", args.case.name()));
                write_text(&path, &report.csv())?;
            }
            let _ = out.write_all(report.summary().as_bytes());
            Ok(if report.passed() { EXIT_OK } else { EXIT_VALIDATION })
        }
        Command::Bench(args) => {
            let deck = load(&args.deck)?;
            let report = run_bench(&deck, &args.thread_list)?;
            write_or_print(out, args.out.as_deref(), "bench.csv", &report.csv())?;
            if let Some(dir) = &args.out {
                write_or_print(out, Some(dir), "counters.csv", &report.counters_csv())?;
            }
            if !report.identical {
                let _ = writeln!(out, "warning: final fields differ between thread counts");
            }
            Ok(EXIT_OK)
        }
    }
}

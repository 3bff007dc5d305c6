use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use deconflict::{ControlBounds, EnvelopeMode, InstanceSpec, PositionLaw, ResolutionStatus};
use deconflict_cli::{
    bench, cmd_bench, cmd_generate, cmd_generate_batch, cmd_plot, cmd_solve, cmd_verify, exit, parse_bounds,
    parse_sizes, BenchOptions, CliError, SolveOptions, Suite,
};

/// Aircraft conflict resolution with combined speed and heading control.
///
/// Log level comes from DECONFLICT_LOG (error, warn, info, debug, trace).
#[derive(Parser)]
#[command(name = "deconflict", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Cp,
    Rcp,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Cp => Suite::Cp,
            SuiteArg::Rcp => Suite::Rcp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvelopeArg {
    Verbatim,
    Qbar,
}

#[derive(Clone, Copy, ValueEnum)]
enum PositionsArg {
    Even,
    Uniform,
}

impl From<PositionsArg> for PositionLaw {
    fn from(p: PositionsArg) -> Self {
        match p {
            PositionsArg::Even => PositionLaw::Even,
            PositionsArg::Uniform => PositionLaw::Uniform,
        }
    }
}

#[derive(clap::Args)]
struct SolveArgs {
    /// Control bounds q_lo,q_hi,th_lo,th_hi (radians).
    #[arg(long, value_parser = parse_bounds_arg)]
    bounds: Option<ControlBounds>,
    /// Time limit of each mixed-integer step, in seconds.
    #[arg(long, default_value_t = 300.0)]
    time_limit: f64,
    /// Secant used for the relaxed speed floor.
    #[arg(long, value_enum, default_value_t = EnvelopeArg::Verbatim)]
    envelope: EnvelopeArg,
    /// Write zero for every time so output is reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
}

impl SolveArgs {
    fn options(&self) -> Result<SolveOptions, CliError> {
        if !(self.time_limit > 0.0) {
            return Err(CliError::Input(format!("time limit must be positive, got {}", self.time_limit)));
        }
        Ok(SolveOptions {
            bounds: self.bounds.unwrap_or_default(),
            time_limit_s: self.time_limit,
            envelope: match self.envelope {
                EnvelopeArg::Verbatim => EnvelopeMode::Verbatim,
                EnvelopeArg::Qbar => EnvelopeMode::Qbar,
            },
            record_timing: !self.no_timing,
        })
    }
}

fn parse_bounds_arg(s: &str) -> Result<ControlBounds, String> {
    parse_bounds(s).map_err(|e| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Write a CP or RCP instance file, or a directory of RCP instances.
    Generate {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        /// Number of aircraft.
        #[arg(long)]
        n: usize,
        /// RCP seed; with --count, the first of consecutive seeds.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// RCP instances to write into the --out directory.
        #[arg(long)]
        count: Option<usize>,
        /// How RCP places aircraft on the circle.
        #[arg(long, value_enum, default_value_t = PositionsArg::Even)]
        positions: PositionsArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Resolve an instance and print or save the report.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        solve: SolveArgs,
        /// Report JSON; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a report's controls against its instance.
    Verify {
        instance: PathBuf,
        report: PathBuf,
        #[arg(long, value_parser = parse_bounds_arg)]
        bounds: Option<ControlBounds>,
    },
    /// Run a benchmark suite and write CSV tables.
    Bench {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        /// Sizes such as 4-20 or 10,20,30; the suite's sizes when absent.
        #[arg(long)]
        sizes: Option<String>,
        /// RCP instances per size.
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// First RCP seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = PositionsArg::Even)]
        positions: PositionsArg,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[command(flatten)]
        solve: SolveArgs,
        /// Main table: per-instance rows for CP, per-size summary for RCP.
        #[arg(long)]
        out: PathBuf,
        /// Also write per-instance rows here.
        #[arg(long)]
        rows: Option<PathBuf>,
        /// Also write every report into this directory.
        #[arg(long)]
        reports: Option<PathBuf>,
    },
    /// Draw an instance, and optionally a report's resolved headings, as SVG.
    Plot {
        instance: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Generate {
            suite,
            n,
            seed,
            count,
            positions,
            out,
        } => {
            let spec = match suite {
                SuiteArg::Cp => InstanceSpec::cp(n),
                SuiteArg::Rcp => InstanceSpec {
                    positions: positions.into(),
                    ..InstanceSpec::rcp(n, seed)
                },
            };
            match (suite, count) {
                (SuiteArg::Rcp, Some(count)) => {
                    let paths = cmd_generate_batch(&spec, count, &out)?;
                    println!("wrote {} instances to {}", paths.len(), out.display());
                }
                (SuiteArg::Cp, Some(_)) => {
                    return Err(CliError::Input("--count applies to the rcp suite only".into()));
                }
                (_, None) => {
                    let file = cmd_generate(&spec, &out)?;
                    println!("wrote {} to {}", file.id(), out.display());
                }
            }
            Ok(exit::SUCCESS)
        }
        Command::Solve { instance, solve, out } => {
            let report = cmd_solve(&instance, &solve.options()?, out.as_deref())?;
            if out.is_none() {
                print!("{}", serde_json::to_string_pretty(&report)? + "\n");
            } else {
                eprintln!(
                    "{}: {} objective {}",
                    instance.display(),
                    report.status.label(),
                    report.objective.map_or("-".to_string(), |o| format!("{o:.6}"))
                );
            }
            Ok(match report.status {
                ResolutionStatus::Global | ResolutionStatus::Local => exit::SUCCESS,
                ResolutionStatus::Infeas | ResolutionStatus::Nosol => exit::NO_SOLUTION,
            })
        }
        Command::Verify {
            instance,
            report,
            bounds,
        } => {
            let check = cmd_verify(&instance, &report, bounds.unwrap_or_default())?;
            println!(
                "feasible {} | min margin {:.6} NM | violated pairs {} | bound violations {}",
                check.feasible,
                check.min_margin,
                check.violated_pairs(),
                check.bound_violations
            );
            Ok(if check.feasible { exit::SUCCESS } else { exit::NO_SOLUTION })
        }
        Command::Bench {
            suite,
            sizes,
            count,
            seed,
            positions,
            parallel,
            solve,
            out,
            rows,
            reports,
        } => {
            let suite: Suite = suite.into();
            let opts = BenchOptions {
                sizes: match sizes {
                    Some(s) => parse_sizes(&s)?,
                    None => suite.default_sizes(),
                },
                count,
                seed,
                positions: positions.into(),
                solve: solve.options()?,
                parallel: parallel.max(1),
                ..BenchOptions::new(suite)
            };
            let result = cmd_bench(&opts)?;
            bench::write_outputs(&result, suite, &out, rows.as_deref())?;
            if let Some(dir) = reports {
                std::fs::create_dir_all(&dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
                for (row, report) in result.rows.iter().zip(&result.reports) {
                    let path = dir.join(format!("{}.json", row.id));
                    let text = serde_json::to_string_pretty(report)? + "\n";
                    std::fs::write(&path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                }
            }
            eprintln!("{} instances, table written to {}", result.rows.len(), out.display());
            Ok(exit::SUCCESS)
        }
        Command::Plot { instance, report, out } => {
            cmd_plot(&instance, report.as_deref(), &out)?;
            eprintln!("wrote {}", out.display());
            Ok(exit::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DECONFLICT_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::INPUT as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

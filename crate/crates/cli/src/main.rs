use clap::{Args, Parser, Subcommand, ValueEnum};
use lindscat::pipeline::{self, Command, Format};
use lindscat::scenario::{parse_scenario, validate, Scenario};
use lindscat::verify::{verify, Suite, VerifyOptions};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lindscat", version, about = "Scattering diagnostics for Lindblad dynamics on finite lattices")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Smoothness constants, wave operators and (with a [capture] section) capture analysis.
    Run(RunArgs),
    /// Smoothness constants and the bounds they imply.
    Smoothness(RunArgs),
    /// Hilbert-space and Lindblad wave operators.
    WaveOp(RunArgs),
    /// Bound and decaying subspaces, escape probabilities and the amplitude sweep.
    Capture(RunArgs),
    /// Run acceptance suites and print one line per criterion plus a JSON summary.
    Verify {
        #[arg(value_enum, default_value = "all")]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replace the Lindbladian in the random-model checks by a sign-corrupted one.
        #[arg(long, hide = true)]
        corrupt_dissipator: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    file: PathBuf,
    /// Overrides `schedule.t_max`.
    #[arg(long, allow_hyphen_values = true)]
    t_max: Option<f64>,
    /// Overrides `tolerances.smoothness_dt`.
    #[arg(long, allow_hyphen_values = true)]
    dt: Option<f64>,
    /// Overrides `tolerances.limit`.
    #[arg(long, allow_hyphen_values = true)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; without it the report goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    All,
    Qds,
    Dissipative,
    Lindblad,
    Capture,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    #[value(name = "json+csv")]
    JsonCsv,
}

fn load(args: &RunArgs) -> Result<Scenario, String> {
    let text = std::fs::read_to_string(&args.file).map_err(|e| format!("{}: {e}", args.file.display()))?;
    let mut s = parse_scenario(&text).map_err(|e| format!("{}: {e}", args.file.display()))?;
    if args.t_max.is_some() {
        s.schedule.t_max = args.t_max;
    }
    if let Some(dt) = args.dt {
        s.tolerances.smoothness_dt = dt;
    }
    if let Some(tol) = args.tol {
        s.tolerances.limit = tol;
    }
    if let Some(seed) = args.seed {
        s.seed = seed;
    }
    // Flags are not in the file, so errors carry the field but no line.
    validate(&s, "").map_err(|e| format!("command line: {e}"))?;
    Ok(s)
}

fn run(command: Command, args: &RunArgs) -> u8 {
    let s = match load(args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let report = pipeline::run(&s, command);
    for e in &report.errors {
        eprintln!("error: {e}");
    }
    for c in report.failed() {
        eprintln!("failed: {}", c.name);
    }
    match &args.out {
        Some(dir) => {
            let format = match args.format {
                FormatArg::Json => Format::Json,
                FormatArg::JsonCsv => Format::JsonCsv,
            };
            match pipeline::write_outputs(dir, &report, format) {
                Ok(files) => files.iter().for_each(|f| eprintln!("wrote {}", f.display())),
                Err(e) => {
                    eprintln!("error: {}: {e}", dir.display());
                    return 2;
                }
            }
        }
        None => print!("{}", pipeline::report_json(&report)),
    }
    report.exit_code() as u8
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Sub::Run(a) => run(Command::Run, a),
        Sub::Smoothness(a) => run(Command::Smoothness, a),
        Sub::WaveOp(a) => run(Command::WaveOp, a),
        Sub::Capture(a) => run(Command::Capture, a),
        Sub::Verify { suite, seed, corrupt_dissipator } => {
            let suite = match suite {
                SuiteArg::All => Suite::All,
                SuiteArg::Qds => Suite::Qds,
                SuiteArg::Dissipative => Suite::Dissipative,
                SuiteArg::Lindblad => Suite::Lindblad,
                SuiteArg::Capture => Suite::Capture,
            };
            let opts = VerifyOptions { seed: *seed, corrupt_dissipator: *corrupt_dissipator };
            let summary = verify(suite, &opts, |o| println!("{o}"));
            println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
            summary.exit_code() as u8
        }
    };
    ExitCode::from(code)
}

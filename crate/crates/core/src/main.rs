use clap::{Parser, Subcommand, ValueEnum};
use polyshell::error::Error;
use polyshell::harness::config::{RunConfig, CONFIG_REFERENCE};
use polyshell::harness::output::output_dir;
use polyshell::harness::runs::{self, RunOutcome};
use polyshell::harness::scenarios::{scenario, scenario_catalogue};
use polyshell::harness::validate::{run_suite, Suite};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Polymer fluid coupled to an elastic shell: coupled runs, kinetic-only and
/// shell-only runs, the acceptance suite and the regularization sweep.
#[derive(Parser)]
#[command(name = "polyshell", version, after_long_help = CONFIG_REFERENCE)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Config file, or the name of a built-in preset.
    config: String,
    /// Write outputs here instead of `<output root>/<output.dir>/<run.name>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Fast,
    Full,
}

#[derive(Subcommand)]
enum Cmd {
    /// Full coupled fluid, polymer and shell run with the energy ledger.
    Simulate(RunArgs),
    /// Fokker-Planck equation alone under a prescribed flow and boundary motion.
    Fpk(RunArgs),
    /// Shell dynamics alone under the configured load.
    Shell(RunArgs),
    /// Run the acceptance suite.
    Validate {
        #[arg(long, value_enum, default_value = "fast")]
        suite: SuiteArg,
    },
    /// Repeat a coupled run for every regularization level in `sweep.rhos`.
    SweepRho(RunArgs),
    /// List the built-in presets.
    Presets,
}

fn load(arg: &str) -> Result<RunConfig, Error> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(s) = scenario(arg) {
            return s.config();
        }
    }
    RunConfig::load(path)
}

fn run(args: &RunArgs, driver: fn(&RunConfig, &Path) -> Result<RunOutcome, Error>) -> Result<RunOutcome, Error> {
    let cfg = load(&args.config)?;
    let dir = args.out.clone().unwrap_or_else(|| output_dir(&cfg.output.dir).join(&cfg.run.name));
    let outcome = driver(&cfg, &dir)?;
    println!("{}: {} steps to t = {} in {}", cfg.run.name, outcome.summary.steps, outcome.summary.t_final, dir.display());
    for (k, v) in &outcome.summary.details {
        println!("  {k} = {v:e}");
    }
    Ok(outcome)
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("polyshell: error[{}]: {e}", e.category());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Cmd::Simulate(a) => run(a, runs::simulate),
        Cmd::Fpk(a) => run(a, runs::fpk),
        Cmd::Shell(a) => run(a, runs::shell),
        Cmd::SweepRho(a) => run(a, runs::sweep_rho),
        Cmd::Presets => {
            for s in scenario_catalogue() {
                println!("{:<24} {}", s.name, s.command.name());
            }
            return ExitCode::SUCCESS;
        }
        Cmd::Validate { suite } => {
            let suite = match suite {
                SuiteArg::Fast => Suite::Fast,
                SuiteArg::Full => Suite::Full,
            };
            let exe = match std::env::current_exe() {
                Ok(p) => p,
                Err(e) => return fail(&Error::io(Path::new("current executable"), e)),
            };
            let verdicts = run_suite(suite, &exe, |v| println!("{}", v.line()));
            let failed: Vec<String> = verdicts.iter().filter(|v| !v.passed).map(|v| v.id.to_string()).collect();
            if failed.is_empty() {
                return ExitCode::SUCCESS;
            }
            return fail(&Error::Inequality(format!("criteria {} failed", failed.join(", "))));
        }
    };
    match outcome {
        Ok(o) => match &o.error {
            None => ExitCode::SUCCESS,
            Some(e) => fail(e),
        },
        Err(e) => fail(&e),
    }
}

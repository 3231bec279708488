use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use filippov_cli::builtins;
use filippov_cli::pipeline::{self, EXIT_PARSE, EXIT_TASK};
use filippov_cli::scenario::{parse_scenario_with, Scenario, ScenarioError};

#[derive(Parser)]
#[command(name = "filippov", version, about = "Filippov semiflows, periodic orbits and Conley-index checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the switching manifold and report unsupported tangencies
    Validate(RunArgs),
    /// Integrate the semiflow from each `simulate` task
    Simulate(RunArgs),
    /// Locate periodic orbits through a Poincaré section
    Detect(RunArgs),
    /// Run the Conley-index check (runs `detect` first)
    Conley(RunArgs),
    /// Continue the orbit through regularized systems
    Regularize(RunArgs),
    /// Run every task of the scenario in order
    Pipeline(RunArgs),
    /// Print a scenario in canonical form, with overrides applied
    Show(Source),
    /// List the builtin scenarios
    Builtins,
}

#[derive(Args)]
struct Source {
    /// Scenario file
    #[arg(long, required_unless_present = "builtin", conflicts_with = "builtin")]
    scenario: Option<PathBuf>,
    /// Name of a builtin scenario
    #[arg(long)]
    builtin: Option<String>,
    /// Override a scenario value, e.g. `conley.resolution=128`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory
    #[arg(long, env = "FILIPPOV_OUT", default_value = "filippov-out")]
    out: PathBuf,
}

fn load(src: &Source) -> Result<Scenario, String> {
    let (origin, text) = match (&src.scenario, &src.builtin) {
        (Some(path), _) => (
            path.display().to_string(),
            std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?,
        ),
        (None, Some(name)) => match builtins::builtin(name) {
            Some(t) => (format!("builtin {name}"), t.to_string()),
            None => {
                let known: Vec<_> = builtins::names().collect();
                return Err(format!("unknown builtin `{name}` (known: {})", known.join(", ")));
            }
        },
        (None, None) => return Err("no scenario given".into()),
    };
    parse_scenario_with(&text, &src.set).map_err(|e| match e {
        ScenarioError::Parse { line: 0, message, .. } | ScenarioError::Semantic { line: 0, message, .. } => {
            format!("{origin}: in --set override: {message}")
        }
        e => format!("{origin}: {e}"),
    })
}

fn run(command: &str, args: &RunArgs) -> i32 {
    let scenario = match load(&args.source) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_PARSE;
        }
    };
    if command != "pipeline"
        && command != "validate"
        && !scenario.tasks.iter().any(|t| t.name() == command)
    {
        eprintln!("error: scenario `{}` has no `{command}` task", scenario.name);
        return EXIT_PARSE;
    }
    match pipeline::run(&scenario, &args.out, command) {
        Ok(outcome) => {
            for t in outcome.summary["tasks"].as_array().into_iter().flatten() {
                let mut line = format!("{:<10} {}", t["task"].as_str().unwrap_or("?"), t["status"].as_str().unwrap_or("?"));
                for key in ["verdict", "kind", "period", "truncation", "error"] {
                    if let Some(v) = t.get(key) {
                        line.push_str(&format!("  {key}={v}"));
                    }
                }
                println!("{line}");
            }
            println!("output: {}", args.out.display());
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: writing {}: {e}", args.out.display());
            EXIT_TASK
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match &cli.command {
        Command::Validate(a) => run("validate", a),
        Command::Simulate(a) => run("simulate", a),
        Command::Detect(a) => run("detect", a),
        Command::Conley(a) => run("conley", a),
        Command::Regularize(a) => run("regularize", a),
        Command::Pipeline(a) => run("pipeline", a),
        Command::Show(src) => match load(src) {
            Ok(s) => {
                print!("{s}");
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_PARSE
            }
        },
        Command::Builtins => {
            for n in builtins::names() {
                println!("{n}");
            }
            0
        }
    };
    ExitCode::from(code as u8)
}

use std::path::PathBuf;
use std::process::ExitCode;

use bslice::scenario::Task;
use bslice::{builtins, load, run_task, Error, Options};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bslice", version, about = "Normal forms near orbits of b-symplectic group actions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closedness, nondegeneracy, collar contract and action axioms.
    Check(RunArgs),
    /// Modular period, cover order, group decomposition and isotropy.
    Invariants(RunArgs),
    /// Trivializing cover, deck maps and lifted form.
    Cover(RunArgs),
    /// Slice model for each anchor.
    NormalForm(RunArgs),
    /// Moser flow certification from the `[moser]` section.
    Moser(RunArgs),
    /// Tasks listed in the scenario's `[task]` section.
    Run(RunArgs),
    /// Packaged example scenarios.
    Builtin {
        #[command(subcommand)]
        action: BuiltinCommand,
    },
}

#[derive(Subcommand)]
enum BuiltinCommand {
    List,
    Show { name: String },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file, or `builtin:<name>`.
    scenario: String,
    /// Replace the scenario anchors with one point, e.g. `t=1/2,x=0.3`.
    #[arg(long)]
    anchor: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the report here.
    #[arg(long)]
    json: Option<PathBuf>,
    /// RK4 steps for Moser flows.
    #[arg(long)]
    steps: Option<usize>,
}

fn run(args: &RunArgs, command: &str, task: Option<Task>) -> Result<u8, Error> {
    let scenario = load(&args.scenario)?;
    let tasks = match task {
        Some(t) => vec![t],
        None => scenario.tasks.clone(),
    };
    let opts = Options { seed: args.seed, steps: args.steps, anchor: args.anchor.clone() };
    let report = run_task(&scenario, command, &tasks, &opts)?;
    let json = report.to_json();
    println!("{json}");
    if let Some(path) = &args.json {
        std::fs::write(path, format!("{json}\n"))?;
    }
    Ok(report.status.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check(a) => run(a, "check", Some(Task::Check)),
        Command::Invariants(a) => run(a, "invariants", Some(Task::Invariants)),
        Command::Cover(a) => run(a, "cover", Some(Task::Cover)),
        Command::NormalForm(a) => run(a, "normal-form", Some(Task::NormalForm)),
        Command::Moser(a) => run(a, "moser", Some(Task::Moser)),
        Command::Run(a) => run(a, "run", None),
        Command::Builtin { action: BuiltinCommand::List } => {
            for name in builtins::names() {
                println!("{name}");
            }
            Ok(0)
        }
        Command::Builtin { action: BuiltinCommand::Show { name } } => builtins::source(name).map(|s| {
            print!("{s}");
            0
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser)]
#[command(name = "reinfect", version, about = "Epidemic models with reinfection and varying infectivity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the agent-based model once for each configured population size.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Simulate only this population size.
        #[arg(long)]
        population: Option<usize>,
    },
    /// Solve the large-population limit equations.
    Limit(Common),
    /// Classify the regime and locate the endemic equilibrium.
    Equilibrium(Common),
    /// Solve the age-structured PDE of the `[pde]` section.
    Pde(Common),
    /// Measure how simulations approach the limit as the population grows.
    Converge(Common),
    /// Compare the PDE aggregates with the limit solver.
    Crosscheck(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; defaults to the scenario's `output` or `out/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Added to every seed in the scenario.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, population) = match &cli.command {
        Command::Simulate { common, population } => (common, *population),
        Command::Limit(c)
        | Command::Equilibrium(c)
        | Command::Pde(c)
        | Command::Converge(c)
        | Command::Crosscheck(c) => (c, None),
    };
    if let Some(t) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let run = || -> reinfect::Result<Vec<PathBuf>> {
        let scn = reinfect::scenario::load_scenario(&common.scenario)?;
        let out = common
            .out
            .clone()
            .or_else(|| scn.output.clone())
            .unwrap_or_else(|| PathBuf::from("out").join(&scn.name));
        std::fs::create_dir_all(&out)?;
        let ctx = commands::Context {
            scenario: &scn,
            out: &out,
            seed_offset: common.seed_offset,
        };
        match cli.command {
            Command::Simulate { .. } => commands::simulate(&ctx, population),
            Command::Limit(_) => commands::limit(&ctx),
            Command::Equilibrium(_) => commands::equilibrium(&ctx),
            Command::Pde(_) => commands::pde(&ctx),
            Command::Converge(_) => commands::converge(&ctx),
            Command::Crosscheck(_) => commands::crosscheck(&ctx),
        }
    };
    match run() {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use octoarm_cli::{
    bendprofile_cmd, equilibrium_cmd, exit_code, pursue_cmd, simulate_cmd, DEFAULT_CHI, DEFAULT_CUTOFF_HZ,
};

#[derive(Parser)]
#[command(name = "octoarm", version, about = "Planar soft-arm simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// `section.key=value`, repeatable
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write rod, sensory and bend series
    Simulate(Common),
    /// Equilibrium profile and gain sweep for the scenario target
    Equilibrium(Common),
    /// Compare the closest-point path with unicycle pursuers
    Pursue {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = DEFAULT_CHI)]
        chi: f64,
    },
    /// Bend track and filtered speed of an existing run
    Bendprofile {
        /// Run directory or rod.csv
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CUTOFF_HZ)]
        cutoff: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => {
            simulate_cmd(&c.config, &c.overrides, &c.out).map(|s| serde_json::to_value(s).unwrap_or_default())
        }
        Command::Equilibrium(c) => equilibrium_cmd(&c.config, &c.overrides, &c.out),
        Command::Pursue { common: c, chi } => pursue_cmd(&c.config, &c.overrides, &c.out, *chi),
        Command::Bendprofile { input, out, cutoff } => bendprofile_cmd(input, out, *cutoff),
    };
    match result {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

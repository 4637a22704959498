//! Command-line front end for the travel-planning pipeline: sandbox and
//! query generation, protocol dataset builds, plan evaluation, reward
//! scoring, the desk-scale training demo, and report rendering.
//!
//! Failures print a single machine-readable JSON object to stderr
//! (`{"error":{"kind":...,"message":...}}`) and exit nonzero.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tripwright_core::sandbox::SizeProfile;

use config::PipelineConfig;

#[derive(Debug, Parser)]
#[command(
    name = "tripwright",
    version,
    about = "Travel-planning pipeline: generate, orchestrate, evaluate, train"
)]
struct Cli {
    /// TOML config file; flags override individual settings.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Worker threads for batch subcommands.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a deterministic sandbox and save it as JSON.
    GenSandbox {
        #[arg(long)]
        seed: Option<u64>,
        /// Sandbox size: tiny | standard.
        #[arg(long)]
        profile: Option<SizeProfile>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Generate deduplicated queries with their reference information.
    GenQueries {
        #[arg(long, value_name = "PATH")]
        sandbox: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Run the reasoner/judge/reflector protocol and record full traces.
    RunMas {
        #[arg(long, value_name = "PATH")]
        sandbox: PathBuf,
        #[arg(long, value_name = "PATH")]
        queries: PathBuf,
        /// Process only the first N queries.
        #[arg(long, value_name = "N")]
        limit: Option<usize>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Run the protocol and emit the fine-tuning dataset, resuming past
    /// query ids already present in the output file.
    BuildSft {
        #[arg(long, value_name = "PATH")]
        sandbox: PathBuf,
        #[arg(long, value_name = "PATH")]
        queries: PathBuf,
        /// Process only the first N queries.
        #[arg(long, value_name = "N")]
        limit: Option<usize>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Check responses against all constraints and write a batch report.
    Eval {
        #[arg(long, value_name = "PATH")]
        sandbox: PathBuf,
        #[arg(long, value_name = "PATH")]
        queries: PathBuf,
        /// JSONL rows {"query_id", "response"} (or "completion"); queries
        /// without a row count as undelivered.
        #[arg(long, value_name = "PATH")]
        responses: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Also write one CSV row per query with per-check verdicts.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Emit one composite-reward breakdown per response.
    Reward {
        #[arg(long, value_name = "PATH")]
        sandbox: PathBuf,
        #[arg(long, value_name = "PATH")]
        queries: PathBuf,
        #[arg(long, value_name = "PATH")]
        responses: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Train the toy policy with group-relative updates and log each step.
    GrpoDemo {
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Render batch reports as an aligned six-column table plus CSV.
    Report {
        /// Batch report JSON; repeat for side-by-side runs.
        #[arg(long = "input", value_name = "PATH", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = PipelineConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::GenSandbox { seed, profile, out } => {
            commands::cmd_gen_sandbox(&config, seed, profile, out)
        }
        Command::GenQueries {
            sandbox,
            count,
            seed,
            out,
        } => commands::cmd_gen_queries(&config, &sandbox, count, seed, out),
        Command::RunMas {
            sandbox,
            queries,
            limit,
            out,
        } => commands::cmd_run_mas(&config, &sandbox, &queries, limit, out, cli.jobs),
        Command::BuildSft {
            sandbox,
            queries,
            limit,
            out,
        } => commands::cmd_build_sft(&config, &sandbox, &queries, limit, out, cli.jobs),
        Command::Eval {
            sandbox,
            queries,
            responses,
            out,
            csv,
        } => commands::cmd_eval(&config, &sandbox, &queries, &responses, out, csv),
        Command::Reward {
            sandbox,
            queries,
            responses,
            out,
        } => commands::cmd_reward(&config, &sandbox, &queries, &responses, out),
        Command::GrpoDemo { steps, seed, out } => {
            commands::cmd_grpo_demo(&config, steps, seed, out)
        }
        Command::Report { inputs, out, csv } => commands::cmd_report(&inputs, out, csv),
    }
}

fn error_kind(error: &anyhow::Error) -> &'static str {
    if error.downcast_ref::<config::ConfigError>().is_some() {
        return "config";
    }
    for cause in error.chain() {
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
    }
    "run"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            let payload = serde_json::json!({
                "error": { "kind": error_kind(&error), "message": format!("{error:#}") }
            });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use cgrag::config::ConfigOverrides;
use cgrag::eval::AblationMode;
use cgrag::Error;
use clap::{Args, Parser, Subcommand};

/// Causal-first knowledge graph retrieval for multiple-choice QA.
#[derive(Parser, Debug)]
#[command(name = "cgrag", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// Pipeline config file (TOML).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Causality threshold.
    #[arg(long, global = true)]
    pub theta: Option<f64>,

    /// Paths kept per segment pair.
    #[arg(long, global = true)]
    pub k: Option<usize>,

    /// Longest path searched, in edges.
    #[arg(long, global = true)]
    pub max_hops: Option<usize>,

    /// Fraction of fused paths kept as final evidence.
    #[arg(long, global = true)]
    pub keep_ratio: Option<f64>,

    /// Model for the reasoning-chain stage.
    #[arg(long, global = true, value_name = "MODEL")]
    pub cot_model: Option<String>,

    /// Model for the path summary stage.
    #[arg(long, global = true, value_name = "MODEL")]
    pub enhance_model: Option<String>,

    /// Model for the answer stage.
    #[arg(long, global = true, value_name = "MODEL")]
    pub infer_model: Option<String>,

    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

impl GlobalArgs {
    pub fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            theta: self.theta,
            k: self.k,
            max_hops: self.max_hops,
            keep_ratio: self.keep_ratio,
            cot_model: self.cot_model.clone(),
            enhance_model: self.enhance_model.clone(),
            infer_model: self.infer_model.clone(),
        }
    }
}

/// Options shared by the commands that run the pipeline.
#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// Graph artifact written by build-graph.
    #[arg(long, value_name = "FILE")]
    pub graph: PathBuf,

    /// full, kg-only, no-llm-enhanced or no-enhancer.
    #[arg(long, default_value = "full", value_parser = parse_mode)]
    pub mode: AblationMode,

    /// Replay responses from a transcript instead of calling LLM_ENDPOINT.
    #[arg(long, value_name = "FILE")]
    pub mock_transcript: Option<PathBuf>,

    /// Strength updates (subject, predicate, object, strength TSV) applied to
    /// the causal view before running.
    #[arg(long, value_name = "FILE")]
    pub updates: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<AblationMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ingest a triple TSV and write a graph artifact.
    BuildGraph { triples: PathBuf, output: PathBuf },
    /// Answer one question.
    Answer {
        #[command(flatten)]
        run: RunArgs,

        #[arg(long)]
        question: String,

        /// Answer option as LABEL=TEXT; repeat for each option.
        #[arg(long = "option", value_name = "LABEL=TEXT", required = true)]
        options: Vec<String>,

        /// Print the full trace as JSON.
        #[arg(long)]
        trace: bool,
    },
    /// Run a dataset and write a report.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,

        /// Line-delimited JSON questions.
        #[arg(long, value_name = "FILE")]
        dataset: PathBuf,

        #[arg(long, value_name = "FILE")]
        report: PathBuf,
    },
    /// Causal view size across a theta sweep.
    CausalStats {
        #[arg(long, value_name = "FILE")]
        graph: PathBuf,

        /// Comma-separated thetas; defaults to 0.0, 0.1, ..., 1.0.
        #[arg(long, value_delimiter = ',')]
        sweep: Vec<f64>,
    },
    /// Apply a strength-update TSV to the causal view and report the effect.
    UpdateStrengths {
        #[arg(long, value_name = "FILE")]
        graph: PathBuf,

        updates: PathBuf,
    },
}

/// 0 success, 1 data error, 2 usage or I/O error, 3 transport error.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Ingest(_)
        | Error::Parse { .. }
        | Error::NotFound(_)
        | Error::Artifact(_)
        | Error::Data(_) => 1,
        Error::Validation(_) | Error::Io(_) => 2,
        Error::Transport(_) | Error::Transcript(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let g = &cli.global;
    let result = match cli.command {
        Command::BuildGraph { triples, output } => commands::build_graph(g, &triples, &output),
        Command::Answer {
            run,
            question,
            options,
            trace,
        } => commands::answer(g, &run, &question, &options, trace),
        Command::Evaluate {
            run,
            dataset,
            report,
        } => commands::evaluate(g, &run, &dataset, &report),
        Command::CausalStats { graph, sweep } => commands::causal_stats(g, &graph, &sweep),
        Command::UpdateStrengths { graph, updates } => {
            commands::update_strengths(g, &graph, &updates)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cgrag: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

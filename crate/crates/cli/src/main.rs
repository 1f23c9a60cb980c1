use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use winosg::ablate::{AblationKind, DEFAULT_MASK_TOKEN};
use winosg::assignment::Objective;
use winosg::embed::OovPolicy;

mod commands;
mod io;

/// Scene-graph tools for Winoground-style evaluation.
#[derive(Debug, Parser)]
#[command(name = "winosg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// CoNLL-U to scene-graph JSONL.
    Parse(ParseArgs),
    /// Add a scene-graph augmented strategy to every record.
    Score(ScoreArgs),
    /// Text / image / group table for one or more strategies.
    Eval(EvalArgs),
    /// Masked and swapped captions.
    Ablate(AblateArgs),
    /// Random-chance baselines.
    Simulate(SimulateArgs),
    /// Flat and two-turn prompts, or scored traces with --mock.
    Prompt(PromptArgs),
}

#[derive(Debug, Args)]
struct OutputArg {
    /// Write here instead of stdout (replaced atomically).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ParseArgs {
    #[arg(long)]
    conllu: PathBuf,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Max,
    Min,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Max => Objective::Maximize,
            ObjectiveArg::Min => Objective::Minimize,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OovArg {
    Strict,
    Lenient,
}

impl From<OovArg> for OovPolicy {
    fn from(o: OovArg) -> Self {
        match o {
            OovArg::Strict => OovPolicy::Strict,
            OovArg::Lenient => OovPolicy::Lenient,
        }
    }
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    examples: PathBuf,
    #[arg(long)]
    conllu: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// Strategy whose quad gets the prior.
    #[arg(long, default_value = "base")]
    base: String,
    /// Name of the new strategy [default: <base>+SG].
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long, default_value_t = winosg::DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, value_enum, default_value = "max")]
    objective: ObjectiveArg,
    #[arg(long, value_enum, default_value = "strict")]
    oov: OovArg,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    examples: PathBuf,
    /// Strategies to report, comma-separated [default: all present in every record].
    #[arg(long, value_delimiter = ',')]
    strategy: Vec<String>,
    #[arg(long)]
    per_tag: bool,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[arg(long)]
    examples: PathBuf,
    #[arg(long)]
    conllu: PathBuf,
    /// Comma-separated: mask-subjects, mask-objects, mask-both, swap [default: all].
    #[arg(long, value_delimiter = ',')]
    kinds: Vec<AblationKind>,
    #[arg(long, default_value = DEFAULT_MASK_TOKEN)]
    mask_token: String,
    /// Fix sentence-initial capitals after a swap.
    #[arg(long)]
    normalize_case: bool,
    /// Only nsubj/dobj spans; ignore prepositional objects.
    #[arg(long)]
    no_pobj: bool,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Debug, Args)]
struct PromptArgs {
    #[arg(long)]
    conllu: PathBuf,
    /// Records whose captions are looked up in the sidecar [default: every sidecar sentence].
    #[arg(long)]
    examples: Option<PathBuf>,
    /// Directory with template overrides.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Show the caption to the model in Turn 1.
    #[arg(long)]
    turn1_with_caption: bool,
    /// Scripted model JSON; runs the two-turn protocol and reports scores.
    #[arg(long)]
    mock: Option<PathBuf>,
    #[command(flatten)]
    out: OutputArg,
}

/// Exit status classes: 1 for usage problems, 2 for bad data.
#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(anyhow::anyhow!(msg.into()))
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<winosg::Error> for Failure {
    fn from(e: winosg::Error) -> Self {
        Failure::Data(e.into())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Parse(a) => commands::parse(a),
        Command::Score(a) => commands::score(a),
        Command::Eval(a) => commands::eval(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Prompt(a) => commands::prompt(a),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

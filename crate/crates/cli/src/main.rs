//! `amrkit`: every pipeline stage as a subcommand.
//!
//! Each run computes its outputs in memory, then writes them together with a
//! `manifest.json` into `--out`. On error nothing new is left behind.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use amr_core::config::PipelineConfig;
use commands::CliError;

#[derive(Parser)]
#[command(
    name = "amrkit",
    version,
    about = "Action-based AMR concept identification and parsing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key; applied after the file, in order.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CorpusArgs {
    /// AMR file with `# ::id` blocks.
    #[arg(long)]
    amr: PathBuf,
    /// Annotated sentences, one JSON object per line.
    #[arg(long)]
    sentences: PathBuf,
    /// Alignments to use; sentences without one are aligned automatically.
    #[arg(long)]
    alignments: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Align AMR nodes to tokens; writes alignments.tsv.
    Align {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Label tokens with actions; writes labels.tsv, dict.tsv and reliability.tsv.
    Extract {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Train the classifier and edge scorer; writes the model files.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Output directory of a previous `extract`; extraction runs inline otherwise.
        #[arg(long)]
        extracted: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Parse annotated sentences; writes parses.amr.
    Parse {
        /// Directory holding the output of `train`.
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        sentences: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Smatch of predicted against gold AMR files; writes smatch.tsv.
    EvalSmatch {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Token accuracy and confusion of two label files; writes actions.tsv.
    EvalActions {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        sentences: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Node accuracy of two alignment files; writes align_eval.tsv.
    EvalAlign {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        amr: PathBuf,
        #[arg(long)]
        sentences: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Action distribution over the tokens of a corpus; writes report.tsv.
    Report {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Align { .. } => "align",
            Command::Extract { .. } => "extract",
            Command::Train { .. } => "train",
            Command::Parse { .. } => "parse",
            Command::EvalSmatch { .. } => "eval-smatch",
            Command::EvalActions { .. } => "eval-actions",
            Command::EvalAlign { .. } => "eval-align",
            Command::Report { .. } => "report",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Align { common, .. }
            | Command::Extract { common, .. }
            | Command::Train { common, .. }
            | Command::Parse { common, .. }
            | Command::EvalSmatch { common, .. }
            | Command::EvalActions { common, .. }
            | Command::EvalAlign { common, .. }
            | Command::Report { common, .. } => common,
        }
    }
}

fn load_config(common: &Common) -> Result<PipelineConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    for assignment in &common.overrides {
        config.set_assignment(assignment)?;
    }
    config.validate()?;
    Ok(config)
}

fn run(command: &Command) -> Result<String, CliError> {
    let common = command.common();
    let config = load_config(common)?;
    let result = match command {
        Command::Align { corpus, .. } => commands::align(corpus, &config)?,
        Command::Extract { corpus, .. } => commands::extract(corpus, &config)?,
        Command::Train {
            corpus, extracted, ..
        } => commands::train(corpus, extracted.as_deref(), &config)?,
        Command::Parse {
            models, sentences, ..
        } => commands::parse(models, sentences, &config)?,
        Command::EvalSmatch { pred, gold, .. } => commands::eval_smatch(pred, gold, &config)?,
        Command::EvalActions {
            pred,
            gold,
            sentences,
            ..
        } => commands::eval_actions(pred, gold, sentences)?,
        Command::EvalAlign {
            pred,
            gold,
            amr,
            sentences,
            ..
        } => commands::eval_align(pred, gold, amr, sentences)?,
        Command::Report { corpus, .. } => commands::report(corpus, &config)?,
    };
    output::write(&common.out, command.name(), &config, &result)?;
    Ok(result.summary)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let stage = cli.command.name();
    match std::panic::catch_unwind(|| run(&cli.command)) {
        Ok(Ok(summary)) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Ok(Err(e)) => {
            eprintln!("amrkit {stage}: {e}");
            ExitCode::from(e.exit_code())
        }
        Err(_) => {
            eprintln!("amrkit {stage}: internal error");
            ExitCode::from(3)
        }
    }
}

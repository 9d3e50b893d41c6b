use clap::{Parser, Subcommand};
use craic_cli::commands::{
    cmd_extract, cmd_prep, cmd_report, cmd_score, cmd_train, PrepOptions, ReportBy,
    ReportOptions, ScoreOptions, TrainOptions,
};
use craic_cli::config::{PipelineConfig, Profile};
use craic_cli::error::CliError;
use craic_core::neural::ModelKind;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "craic",
    version,
    about = "Rank method comment sentences by how predictable they are from the code"
)]
struct Cli {
    /// key=value config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Work directory holding the stage artifacts.
    #[arg(long, global = true)]
    work: Option<PathBuf>,
    /// Run even when recorded input hashes no longer match.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine method/comment pairs and sentences from Java source.
    Extract {
        /// Directory tree of .java files, or a manifest listing paths.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Compress methods, split the corpus and build vocabularies.
    Prep {
        /// signature | begin-end | identifier
        #[arg(long)]
        compression: Option<String>,
        /// Token budget L for methods and comments.
        #[arg(long)]
        max_tokens: Option<usize>,
        #[arg(long)]
        vocab_size: Option<usize>,
        #[arg(long)]
        train_n: Option<usize>,
        #[arg(long)]
        valid_n: Option<usize>,
        #[arg(long)]
        test_n: Option<usize>,
    },
    /// Train a model and write its checkpoint.
    Train {
        /// lm | s2s
        #[arg(long)]
        model: String,
        /// desk | full hyperparameter profile.
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        hidden_size: Option<usize>,
        #[arg(long)]
        max_epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f32>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Keep probability for dropout.
        #[arg(long)]
        dropout_keep: Option<f32>,
        /// Drop probability for dropout (alternative reading).
        #[arg(long, conflicts_with = "dropout_keep")]
        dropout_drop: Option<f32>,
        /// Continue training from an existing checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Score sentences and write the ranked redundancy report.
    Score {
        /// lm | s2s
        #[arg(long, default_value = "s2s")]
        model: String,
        /// Explicit checkpoint path (defaults to the work-dir checkpoint).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// train | valid | test | all
        #[arg(long, default_value = "test")]
        split: String,
        /// Print ranked rows as JSON lines to stdout.
        #[arg(long)]
        json: bool,
        /// Also write source copies with sentences below this perplexity
        /// removed.
        #[arg(long)]
        strip: Option<f64>,
        /// Output directory for stripped sources.
        #[arg(long)]
        strip_out: Option<PathBuf>,
    },
    /// Aggregate reports over the scored corpus or the mined pairs.
    Report {
        /// javadoc | category | stats
        #[arg(long)]
        by: String,
        /// Minimum tag occurrences for the javadoc report.
        #[arg(long)]
        min_count: Option<usize>,
        /// pair_id<TAB>category file for the category report.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Also write the table to a file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn model_kind(s: &str) -> Result<ModelKind, CliError> {
    match s {
        "lm" => Ok(ModelKind::Lm),
        "s2s" | "seq2seq" => Ok(ModelKind::Seq2Seq),
        other => Err(CliError::ConfigInvalid(format!(
            "unknown model `{other}` (expected lm|s2s)"
        ))),
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(work) = &cli.work {
        config.work = work.clone();
    }

    match cli.command {
        Command::Extract { input } => {
            if let Some(input) = input {
                config.input = Some(input);
            }
            cmd_extract(&config)
        }
        Command::Prep {
            compression,
            max_tokens,
            vocab_size,
            train_n,
            valid_n,
            test_n,
        } => {
            if let Some(c) = compression {
                config.compression = c.parse().map_err(CliError::ConfigInvalid)?;
            }
            if let Some(l) = max_tokens {
                config.max_tokens = l;
            }
            if let Some(v) = vocab_size {
                config.vocab_size = v;
            }
            if train_n.is_some() || valid_n.is_some() || test_n.is_some() {
                config.train_n = train_n;
                config.valid_n = valid_n;
                config.test_n = test_n;
            }
            cmd_prep(&config, &PrepOptions { force: cli.force })
        }
        Command::Train {
            model,
            profile,
            hidden_size,
            max_epochs,
            learning_rate,
            batch_size,
            dropout_keep,
            dropout_drop,
            resume,
        } => {
            let kind = model_kind(&model)?;
            if let Some(p) = profile {
                config.profile = match p.as_str() {
                    "desk" => Profile::Desk,
                    "full" => Profile::Full,
                    other => {
                        return Err(CliError::ConfigInvalid(format!(
                            "unknown profile `{other}` (expected desk|full)"
                        )))
                    }
                };
            }
            match kind {
                ModelKind::Lm => {
                    if hidden_size.is_some() {
                        config.hidden_size_lm = hidden_size;
                    }
                    if max_epochs.is_some() {
                        config.max_epochs_lm = max_epochs;
                    }
                }
                ModelKind::Seq2Seq => {
                    if hidden_size.is_some() {
                        config.hidden_size_s2s = hidden_size;
                    }
                    if max_epochs.is_some() {
                        config.max_epochs_s2s = max_epochs;
                    }
                }
            }
            if learning_rate.is_some() {
                config.learning_rate = learning_rate;
            }
            if batch_size.is_some() {
                config.batch_size = batch_size;
            }
            if let Some(keep) = dropout_keep {
                config.dropout_keep = Some(keep);
            }
            if let Some(drop) = dropout_drop {
                config.dropout_keep = Some(1.0 - drop);
            }
            cmd_train(
                &config,
                kind,
                &TrainOptions {
                    force: cli.force,
                    resume,
                },
            )
        }
        Command::Score {
            model,
            checkpoint,
            split,
            json,
            strip,
            strip_out,
        } => {
            let kind = model_kind(&model)?;
            if strip.is_some() {
                config.strip_threshold = strip;
            }
            let summary = cmd_score(
                &config,
                &ScoreOptions {
                    kind,
                    checkpoint,
                    split: split.parse().map_err(CliError::ConfigInvalid)?,
                    force: cli.force,
                    strip_threshold: config.strip_threshold,
                    strip_out,
                },
            )?;
            if json {
                let path = config
                    .work
                    .join(craic_cli::artifacts::RANKED_JSONL_FILE);
                let text = std::fs::read_to_string(path)?;
                let rows: String = text.lines().skip(1).collect::<Vec<_>>().join("\n");
                return Ok(format!("{rows}\n{summary}"));
            }
            Ok(summary)
        }
        Command::Report {
            by,
            min_count,
            labels,
            out,
        } => {
            if let Some(m) = min_count {
                config.min_count = m;
            }
            cmd_report(
                &config,
                &ReportOptions {
                    by: by.parse::<ReportBy>().map_err(CliError::ConfigInvalid)?,
                    labels,
                    out,
                },
            )
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => println!("{summary}"),
        Err(err) => {
            eprintln!("{}", err.machine_line());
            std::process::exit(1);
        }
    }
}

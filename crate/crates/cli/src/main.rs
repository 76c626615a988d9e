//! Command-line driver: train, tag, eval, selfcheck and synth subcommands
//! over the attrex library.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure, 4 selfcheck failure.

mod commands;

use std::path::PathBuf;
use std::process::exit;

use attrex::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "attrex", version, about = "BiLSTM-CRF product-attribute tagger")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

// The enum exists once for the length of the run; boxing TrainArgs would
// only complicate the match.
#[allow(clippy::large_enum_variant)]
#[derive(Subcommand)]
enum Command {
    /// Train a model on a labeled dataset and write a model file.
    Train(TrainArgs),
    /// Tag titles with a trained model, one `title<TAB>value` line each.
    Tag(TagArgs),
    /// Score a trained model against a labeled dataset.
    Eval(EvalArgs),
    /// Run the built-in verification oracles.
    Selfcheck(SelfcheckArgs),
    /// Generate a synthetic labeled corpus.
    Synth(SynthArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled dataset (token TAB tag lines, blank line between titles).
    #[arg(long)]
    data: PathBuf,
    /// Where to write the trained model.
    #[arg(long)]
    out: PathBuf,
    /// Where to write the per-epoch log (default: model path + ".log").
    #[arg(long)]
    log: Option<PathBuf>,
    /// Flat key=value settings file; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model variant: bilstm, bilstm-attn, bilstm-crf or bilstm-crf-attn.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    /// LSTM hidden units per direction.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long = "word-dim")]
    word_dim: Option<usize>,
    #[arg(long = "char-dim")]
    char_dim: Option<usize>,
    /// Global gradient-norm clip threshold.
    #[arg(long)]
    clip: Option<f64>,
    /// Drop words seen fewer times than this from the vocabulary.
    #[arg(long = "min-count")]
    min_count: Option<usize>,
    /// Case-fold words before vocabulary lookup.
    #[arg(long)]
    lowercase: bool,
    /// Forbid impossible BIO transitions in the CRF instead of learning them.
    #[arg(long)]
    constrain: bool,
    #[arg(long)]
    folds: Option<usize>,
    /// Also run k-fold cross-validation on the train+val portion.
    #[arg(long)]
    cv: bool,
    /// Worker threads for cross-validation folds.
    #[arg(long = "parallel-folds")]
    parallel_folds: Option<usize>,
    /// Report metrics as TSV lines instead of the block format.
    #[arg(long)]
    tsv: bool,
}

#[derive(Args)]
struct TagArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    /// Titles to tag, one per line.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    /// Labeled dataset to score against.
    #[arg(long)]
    data: PathBuf,
    /// Emit one TSV line instead of the block format.
    #[arg(long)]
    tsv: bool,
}

#[derive(Args)]
struct SelfcheckArgs {
    /// Random instances for the CRF and normalization checks.
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Seeds per variant for the gradient check.
    #[arg(long = "grad-seeds", default_value_t = 5)]
    grad_seeds: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Corrupt one analytic gradient so the gradient check must fail.
    #[arg(long = "perturb-gradients")]
    perturb_gradients: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Where to write the generated dataset.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    titles: usize,
    /// Brand lexicon size.
    #[arg(long, default_value_t = 200)]
    brands: usize,
    /// Share of titles generated without any brand span.
    #[arg(long = "no-brand-fraction", default_value_t = 0.1)]
    no_brand_fraction: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 1,
        Error::Numeric { .. } => 3,
        _ => 2,
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            exit(code);
        }
    };
    let outcome = match &cli.command {
        Command::Train(args) => commands::cmd_train(args),
        Command::Tag(args) => commands::cmd_tag(args),
        Command::Eval(args) => commands::cmd_eval(args),
        Command::Selfcheck(args) => commands::cmd_selfcheck(args),
        Command::Synth(args) => commands::cmd_synth(args),
    };
    match outcome {
        Ok(code) => exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            exit(exit_code(&err));
        }
    }
}

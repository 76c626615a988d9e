//! Subcommand implementations.

use std::io::Write;
use std::path::{Path, PathBuf};

use attrex::config::ConfigFile;
use attrex::corpus::{decode_spans, read_conll, split_dataset, tokenize, write_conll};
use attrex::error::{Error, Result};
use attrex::eval::{format_report, format_tsv};
use attrex::model_file::ModelFile;
use attrex::numeric::SeededRng;
use attrex::synth::{generate, SynthConfig};
use attrex::training::{
    cross_validate, evaluate_model, predict_tags, train, ModelConfig, TrainLog, Variant,
};

use crate::{EvalArgs, SelfcheckArgs, SynthArgs, TagArgs, TrainArgs};

/// Stream tag for the train/val/test shuffle, distinct from the streams the
/// training module derives from the same seed.
const STREAM_SPLIT: u64 = 6;

const CONFIG_FILE_KEYS: [&str; 14] = [
    "variant",
    "seed",
    "epochs",
    "lr",
    "dropout",
    "hidden",
    "word-dim",
    "char-dim",
    "clip",
    "min-count",
    "lowercase",
    "constrain",
    "folds",
    "parallel-folds",
];

fn load_config_file(path: Option<&Path>) -> Result<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::config(format!("cannot read config file {}: {e}", path.display()))
    })?;
    let file = ConfigFile::parse(&text)?;
    for key in file.keys() {
        if !CONFIG_FILE_KEYS.contains(&key) {
            return Err(Error::config(format!(
                "unknown config file key {key:?} in {}",
                path.display()
            )));
        }
    }
    Ok(file)
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Flags override the config file, which overrides built-in defaults.
fn resolve_train_config(args: &TrainArgs) -> Result<(ModelConfig, usize)> {
    let file = load_config_file(args.config.as_deref())?;
    let variant = match (&args.variant, file.get("variant")) {
        (Some(s), _) => Variant::parse(s)?,
        (None, Some(s)) => Variant::parse(s)?,
        (None, None) => Variant::BilstmCrf,
    };
    let defaults = ModelConfig::new(variant);
    let config = ModelConfig {
        variant,
        word_dim: pick(args.word_dim, file.get_parsed("word-dim")?, defaults.word_dim),
        char_dim: pick(args.char_dim, file.get_parsed("char-dim")?, defaults.char_dim),
        hidden: pick(args.hidden, file.get_parsed("hidden")?, defaults.hidden),
        dropout: pick(args.dropout, file.get_parsed("dropout")?, defaults.dropout),
        learning_rate: pick(args.lr, file.get_parsed("lr")?, defaults.learning_rate),
        clip_norm: pick(args.clip, file.get_parsed("clip")?, defaults.clip_norm),
        epochs: pick(args.epochs, file.get_parsed("epochs")?, defaults.epochs),
        folds: pick(args.folds, file.get_parsed("folds")?, defaults.folds),
        seed: pick(args.seed, file.get_parsed("seed")?, defaults.seed),
        min_count: pick(args.min_count, file.get_parsed("min-count")?, defaults.min_count),
        lowercase: args.lowercase || file.get_bool("lowercase")?.unwrap_or(false),
        constrain: args.constrain || file.get_bool("constrain")?.unwrap_or(false),
    };
    config.validate()?;
    let parallel_folds = pick(args.parallel_folds, file.get_parsed("parallel-folds")?, 1);
    Ok((config, parallel_folds.max(1)))
}

fn default_log_path(model_path: &Path) -> PathBuf {
    let mut name = model_path.as_os_str().to_owned();
    name.push(".log");
    PathBuf::from(name)
}

fn write_train_log(path: &Path, log: &TrainLog) -> Result<()> {
    let mut out = String::from("epoch\tmean_loss\tval_f1\tval_label_accuracy\n");
    for r in log {
        out.push_str(&format!(
            "{}\t{:.6}\t{:.6}\t{:.6}\n",
            r.epoch, r.mean_loss, r.val_f1, r.val_label_accuracy
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn cmd_train(args: &TrainArgs) -> Result<i32> {
    let (config, parallel_folds) = resolve_train_config(args)?;
    let data = read_conll(&args.data).map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", args.data.display()),
        )),
        other => other,
    })?;

    let mut split_rng = SeededRng::new(config.seed).derive(STREAM_SPLIT);
    let (train_part, val_part, test_part) =
        split_dataset(&data.sequences, (0.6, 0.2, 0.2), &mut split_rng)?;
    println!(
        "loaded {} sequences, split {} train / {} val / {} test",
        data.sequences.len(),
        train_part.len(),
        val_part.len(),
        test_part.len()
    );

    if args.cv {
        let mut pool = train_part.clone();
        pool.extend(val_part.iter().cloned());
        let cv = cross_validate(&config, &pool, parallel_folds)?;
        if args.tsv {
            for (i, report) in cv.fold_reports.iter().enumerate() {
                println!("{}", format_tsv(&format!("{}-fold{i}", config.variant), report));
            }
            println!("{}", format_tsv(config.variant.name(), &cv.aggregate));
        } else {
            println!("cross-validation on {} sequences:", pool.len());
            for (i, report) in cv.fold_reports.iter().enumerate() {
                println!("fold {i}: f1 {:.4}", report.f1);
            }
            print!("{}", format_report(&cv.aggregate));
        }
    }

    let outcome = train(&config, &train_part, &val_part)?;
    println!(
        "trained {} epochs on {} sequences; keeping epoch {}",
        config.epochs,
        train_part.len(),
        outcome.best_epoch
    );
    let report = evaluate_model(&outcome.params, &config, &outcome.vocab, &val_part)?;
    if args.tsv {
        println!("{}", format_tsv(config.variant.name(), &report));
    } else {
        println!("validation report:");
        print!("{}", format_report(&report));
    }

    let model = ModelFile {
        config: config.clone(),
        vocab: outcome.vocab,
        params: outcome.params,
        attribute: data.attribute.clone(),
        best_epoch: outcome.best_epoch,
        epochs_completed: config.epochs,
    };
    model.save(&args.out)?;
    let log_path = args.log.clone().unwrap_or_else(|| default_log_path(&args.out));
    write_train_log(&log_path, &outcome.log)?;
    println!("wrote model to {}", args.out.display());
    println!("wrote training log to {}", log_path.display());
    Ok(0)
}

pub fn cmd_tag(args: &TagArgs) -> Result<i32> {
    let model = ModelFile::load(&args.model)?;
    let text = std::fs::read_to_string(&args.data).map_err(|e| {
        std::io::Error::new(e.kind(), format!("{}: {e}", args.data.display()))
    })?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut skipped = 0usize;
    for line in text.lines() {
        if line.trim().is_empty() {
            skipped += 1;
            continue;
        }
        let seq = tokenize(line)?;
        let tags = predict_tags(&model.params, &model.config, &model.vocab, &seq)?;
        let spans = decode_spans(&seq, &tags)?;
        let mut fields = vec![seq.tokens().join(" ")];
        if spans.is_empty() {
            fields.push(String::new());
        } else {
            fields.extend(spans.into_iter().map(|(_, value)| value));
        }
        writeln!(out, "{}", fields.join("\t"))?;
    }
    if skipped > 0 {
        let noun = if skipped == 1 { "line" } else { "lines" };
        eprintln!("warning: skipped {skipped} empty title {noun}");
    }
    Ok(0)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<i32> {
    let model = ModelFile::load(&args.model)?;
    let data = read_conll(&args.data)?;
    let report = evaluate_model(&model.params, &model.config, &model.vocab, &data.sequences)?;
    if args.tsv {
        println!("{}", format_tsv(model.config.variant.name(), &report));
    } else {
        print!("{}", format_report(&report));
    }
    Ok(0)
}

pub fn cmd_selfcheck(args: &SelfcheckArgs) -> Result<i32> {
    if args.trials == 0 || args.grad_seeds == 0 {
        return Err(Error::config(
            "selfcheck needs at least one trial and one gradient seed".to_owned(),
        ));
    }
    let reports = attrex::check::run_all(
        args.trials,
        args.grad_seeds,
        args.seed,
        args.perturb_gradients,
    );
    let mut all_passed = true;
    for r in &reports {
        if r.passed {
            println!("check {}: ok ({})", r.name, r.detail);
        } else {
            all_passed = false;
            println!("check {}: FAILED: {}", r.name, r.detail);
        }
    }
    if all_passed {
        println!("all checks passed");
        Ok(0)
    } else {
        println!("selfcheck failed");
        Ok(4)
    }
}

pub fn cmd_synth(args: &SynthArgs) -> Result<i32> {
    let config = SynthConfig {
        titles: args.titles,
        brand_count: args.brands,
        no_brand_fraction: args.no_brand_fraction,
        seed: args.seed,
    };
    let data = generate(&config)?;
    let attribute = data.attribute.as_deref().unwrap_or("Value");
    write_conll(&args.out, &data.sequences, attribute)?;
    println!("wrote {} titles to {}", data.sequences.len(), args.out.display());
    Ok(0)
}

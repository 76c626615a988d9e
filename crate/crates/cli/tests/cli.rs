//! Black-box tests of the attrex binary: flags, exit codes, file handling
//! and output formats.

use std::path::Path;
use std::process::{Command, Output};

fn attrex(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attrex"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn make_corpus(dir: &Path, titles: usize) {
    let out = attrex(
        &[
            "synth",
            "--out",
            "corpus.conll",
            "--titles",
            &titles.to_string(),
            "--seed",
            "9",
        ],
        dir,
    );
    assert!(out.status.success(), "{}", stderr(&out));
}

fn train_small(dir: &Path, model: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "train",
        "--data",
        "corpus.conll",
        "--out",
        model,
        "--epochs",
        "2",
        "--hidden",
        "8",
        "--word-dim",
        "8",
        "--char-dim",
        "4",
        "--seed",
        "5",
    ];
    args.extend_from_slice(extra);
    attrex(&args, dir)
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    for flag in ["--help", "--version"] {
        let out = attrex(&[flag], dir.path());
        assert_eq!(out.status.code(), Some(0), "{flag}");
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = attrex(&["frobnicate"], dir.path());
    assert_eq!(unknown.status.code(), Some(1));
    let missing_flag = attrex(&["train", "--data", "x.conll"], dir.path());
    assert_eq!(missing_flag.status.code(), Some(1));
}

#[test]
fn train_writes_model_and_log() {
    let dir = tempfile::tempdir().unwrap();
    make_corpus(dir.path(), 40);
    let out = train_small(dir.path(), "model.stg", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(dir.path().join("model.stg").exists());
    assert!(dir.path().join("model.stg.log").exists());
    let text = stdout(&out);
    assert!(text.contains("validation report:"), "{text}");
    assert!(text.contains("wrote model to"), "{text}");

    let log = std::fs::read_to_string(dir.path().join("model.stg.log")).unwrap();
    let mut lines = log.lines();
    assert_eq!(
        lines.next(),
        Some("epoch\tmean_loss\tval_f1\tval_label_accuracy")
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn missing_data_file_exits_two_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = attrex(
        &["train", "--data", "absent.conll", "--out", "m.stg"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("absent.conll"), "{}", stderr(&out));
}

#[test]
fn invalid_dropout_is_rejected_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let out = attrex(
        &[
            "train",
            "--data",
            "absent.conll",
            "--out",
            "m.stg",
            "--dropout",
            "1.5",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("dropout"), "{}", stderr(&out));
}

#[test]
fn config_file_fills_defaults_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    make_corpus(dir.path(), 40);
    std::fs::write(
        dir.path().join("sweep.cfg"),
        "# sweep base\nepochs=1\nhidden=6\nlr=0.5\nword-dim=8\nchar-dim=4\n",
    )
    .unwrap();
    let out = attrex(
        &[
            "train",
            "--data",
            "corpus.conll",
            "--out",
            "m.stg",
            "--config",
            "sweep.cfg",
            "--hidden",
            "9",
            "--seed",
            "5",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let model = std::fs::read(dir.path().join("m.stg")).unwrap();
    let header = String::from_utf8_lossy(&model[..400]);
    assert!(header.contains("epochs=1\n"), "config epochs ignored: {header}");
    assert!(header.contains("learning_rate=0.5\n"), "config lr ignored: {header}");
    assert!(header.contains("hidden=9\n"), "flag override lost: {header}");
}

#[test]
fn constrain_flag_lands_in_the_model_and_tagging_still_works() {
    let dir = tempfile::tempdir().unwrap();
    make_corpus(dir.path(), 40);
    let out = train_small(dir.path(), "m.stg", &["--constrain"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let model = std::fs::read(dir.path().join("m.stg")).unwrap();
    let header = String::from_utf8_lossy(&model[..400]);
    assert!(header.contains("constrain=true\n"), "flag lost: {header}");

    std::fs::write(dir.path().join("titles.txt"), "Woodland Imports Decorative Bottle\n").unwrap();
    let tagged = attrex(
        &["tag", "--model", "m.stg", "--data", "titles.txt"],
        dir.path(),
    );
    assert_eq!(tagged.status.code(), Some(0), "{}", stderr(&tagged));
    assert!(stdout(&tagged).contains('\t'));
}

#[test]
fn constrain_with_a_softmax_variant_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = attrex(
        &[
            "train",
            "--data",
            "absent.conll",
            "--out",
            "m.stg",
            "--variant",
            "bilstm",
            "--constrain",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("crf"), "{}", stderr(&out));
}

#[test]
fn unknown_config_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "epochs=1\nmomentum=0.9\n").unwrap();
    let out = attrex(
        &[
            "train",
            "--data",
            "absent.conll",
            "--out",
            "m.stg",
            "--config",
            "bad.cfg",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("momentum"), "{}", stderr(&out));
}

#[test]
fn tag_emits_title_tab_value_lines_and_warns_on_empty_lines() {
    let dir = tempfile::tempdir().unwrap();
    make_corpus(dir.path(), 40);
    let trained = train_small(dir.path(), "model.stg", &[]);
    assert!(trained.status.success(), "{}", stderr(&trained));

    std::fs::write(
        dir.path().join("titles.txt"),
        "Ceramic Mug Set\n\nWoodland Imports Decorative Bottle\n   \n",
    )
    .unwrap();
    let out = attrex(
        &["tag", "--model", "model.stg", "--data", "titles.txt"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2, "{text}");
    assert!(lines[0].starts_with("Ceramic Mug Set\t"), "{text}");
    assert!(
        lines[1].starts_with("Woodland Imports Decorative Bottle\t"),
        "{text}"
    );
    for line in &lines {
        assert!(line.split('\t').count() >= 2, "{line}");
    }
    assert!(stderr(&out).contains("skipped 2 empty title lines"), "{}", stderr(&out));

    let again = attrex(
        &["tag", "--model", "model.stg", "--data", "titles.txt"],
        dir.path(),
    );
    assert_eq!(out.stdout, again.stdout, "tagging must be deterministic");
}

#[test]
fn eval_tsv_line_has_five_fields() {
    let dir = tempfile::tempdir().unwrap();
    make_corpus(dir.path(), 40);
    let trained = train_small(dir.path(), "model.stg", &[]);
    assert!(trained.status.success(), "{}", stderr(&trained));

    let out = attrex(
        &[
            "eval",
            "--model",
            "model.stg",
            "--data",
            "corpus.conll",
            "--tsv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let line = text.lines().next().unwrap();
    assert_eq!(line.split('\t').count(), 5, "{line}");
    assert!(line.starts_with("bilstm-crf\t"), "{line}");
}

#[test]
fn corrupt_model_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("broken.stg"), b"attrex model v9\nbinary\n").unwrap();
    std::fs::write(dir.path().join("titles.txt"), "Ceramic Mug\n").unwrap();
    let out = attrex(
        &["tag", "--model", "broken.stg", "--data", "titles.txt"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("version"), "{}", stderr(&out));
}

#[test]
fn selfcheck_passes_and_the_negative_control_fails() {
    let dir = tempfile::tempdir().unwrap();
    let ok = attrex(
        &["selfcheck", "--trials", "20", "--grad-seeds", "1", "--seed", "3"],
        dir.path(),
    );
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    assert!(stdout(&ok).contains("all checks passed"));

    let bad = attrex(
        &[
            "selfcheck",
            "--trials",
            "5",
            "--grad-seeds",
            "1",
            "--perturb-gradients",
        ],
        dir.path(),
    );
    assert_eq!(bad.status.code(), Some(4), "{}", stdout(&bad));
    assert!(stdout(&bad).contains("FAILED"));
}

#[test]
fn synth_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.conll", "b.conll"] {
        let out = attrex(
            &["synth", "--out", name, "--titles", "50", "--seed", "4"],
            dir.path(),
        );
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let a = std::fs::read(dir.path().join("a.conll")).unwrap();
    let b = std::fs::read(dir.path().join("b.conll")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn train_with_cv_reports_folds() {
    let dir = tempfile::tempdir().unwrap();
    make_corpus(dir.path(), 50);
    let out = train_small(
        dir.path(),
        "model.stg",
        &["--cv", "--folds", "2", "--parallel-folds", "2", "--tsv"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("bilstm-crf-fold0\t"), "{text}");
    assert!(text.contains("bilstm-crf-fold1\t"), "{text}");
}

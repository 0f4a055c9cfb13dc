use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempkb_core::checkpoint::{self, Checkpoint};
use tempkb_core::data::{self, augment_reciprocal, Format, Discretization};
use tempkb_core::evaluation::{self, EvalOptions, FilterIndex, RankingReport};
use tempkb_core::training::{EpochRecord, TrainConfig};
use tempkb_core::{Complex, EmbeddingTable, ModelKind, ModelParams, Trainer};

fn tempkb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tempkb")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A small ICEWS-style quadruple dataset with all three splits.
fn write_toy(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    let mut lines = Vec::new();
    for i in 0..12 {
        for day in 1..=4 {
            let o = (i * 5 + day * 3) % 12;
            let r = if (i + day) % 2 == 0 { "Consult" } else { "Make statement" };
            lines.push(format!("Actor {i}\t{r}\tActor {o}\t2014-01-0{day}"));
        }
    }
    let (train, rest) = lines.split_at(36);
    let (valid, test) = rest.split_at(6);
    fs::write(dir.join("train.txt"), train.join("\n") + "\n").unwrap();
    fs::write(dir.join("valid.txt"), valid.join("\n") + "\n").unwrap();
    fs::write(dir.join("test.txt"), test.join("\n") + "\n").unwrap();
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|path| (path.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&path).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn preprocess_reports_stats_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw");
    write_toy(&raw);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let out = tempkb(&["preprocess", "--input", p(&raw), "--format", "quadruples", "--out", p(&a)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("entities=12 predicates=4 timestamps=4 base_predicates=2 train=36 valid=6 test=6"));
    assert!(tempkb(&["preprocess", "--input", p(&raw), "--out", p(&b)]).status.success());
    assert_eq!(read_dir_bytes(&a), read_dir_bytes(&b));

    let missing = tempkb(&["preprocess", "--input", p(&tmp.path().join("nope")), "--out", p(&b)]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("does not exist"));
}

#[test]
fn malformed_input_names_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw");
    fs::create_dir_all(&raw).unwrap();
    fs::write(raw.join("train.txt"), "a\tr\tb\t2014-01-01\na\tr\tb\n").unwrap();
    let out = tempkb(&["preprocess", "--input", p(&raw), "--out", p(&tmp.path().join("c"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train.txt:2:"), "{}", String::from_utf8_lossy(&out.stderr));
}

fn cache(tmp: &Path) -> PathBuf {
    let raw = tmp.join("raw");
    write_toy(&raw);
    let dir = tmp.join("cache");
    assert!(tempkb(&["preprocess", "--input", p(&raw), "--out", p(&dir)]).status.success());
    dir
}

const TRAIN: &[&str] = &["--kind", "tntcomplex", "--rank", "4", "--batch-size", "16", "--seed", "11", "--reg", "omega3", "--lambda", "0.01", "--temporal-strength", "0.01"];

fn train_args<'a>(data: &'a str, out: &'a str, epochs: &'a str) -> Vec<&'a str> {
    let mut args = vec!["train", "--dataset", data, "--output", out, "--epochs", epochs];
    args.extend_from_slice(TRAIN);
    args
}

fn log_without_wall_time(dir: &Path) -> Vec<EpochRecord> {
    fs::read_to_string(dir.join("train_log.jsonl"))
        .unwrap()
        .lines()
        .map(|l| EpochRecord { wall_time_s: 0.0, ..serde_json::from_str(l).unwrap() })
        .collect()
}

#[test]
fn zero_epochs_writes_the_initialization() {
    let tmp = tempfile::tempdir().unwrap();
    let data = cache(tmp.path());
    let run = tmp.path().join("run");
    let out = tempkb(&train_args(p(&data), p(&run), "0"));
    assert!(out.status.success());
    assert!(stdout(&out).contains("seed=11"));
    let ckpt = checkpoint::load(&run.join("checkpoint.bin")).unwrap();
    let bundle = augment_reciprocal(data::read_bundle(&data).unwrap()).unwrap();
    let config = TrainConfig { kind: ModelKind::TNTComplEx, rank: 4, seed: 11, ..TrainConfig::default() };
    assert_eq!(&ckpt.params, Trainer::new(&bundle, config).unwrap().params());
    assert_eq!(ckpt.header.epoch, 0);
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let data = cache(tmp.path());
    let full = tmp.path().join("full");
    let part = tmp.path().join("part");
    assert!(tempkb(&train_args(p(&data), p(&full), "4")).status.success());
    assert!(tempkb(&train_args(p(&data), p(&part), "2")).status.success());
    let ckpt = part.join("checkpoint.bin");
    let mut args = train_args(p(&data), p(&part), "4");
    args.extend(["--resume", p(&ckpt)]);
    let resumed = tempkb(&args);
    assert!(resumed.status.success(), "{}", String::from_utf8_lossy(&resumed.stderr));
    assert_eq!(log_without_wall_time(&full), log_without_wall_time(&part));
    assert_eq!(fs::read(full.join("checkpoint.bin")).unwrap(), fs::read(part.join("checkpoint.bin")).unwrap());

    let other_seed = tempkb(&[args.as_slice(), &["--seed", "12"]].concat());
    assert_eq!(other_seed.status.code(), Some(1));
}

#[test]
fn eval_matches_in_process_evaluation() {
    let tmp = tempfile::tempdir().unwrap();
    let data = cache(tmp.path());
    let run = tmp.path().join("run");
    assert!(tempkb(&train_args(p(&data), p(&run), "3")).status.success());
    let report_path = run.join("report.json");
    let ranks_path = run.join("ranks.tsv");
    let ckpt_path = run.join("checkpoint.bin");
    let out = tempkb(&[
        "eval", "--dataset", p(&data), "--checkpoint", p(&ckpt_path), "--out", p(&report_path),
        "--rank-dump", p(&ranks_path), "--time-auprc",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let text = fs::read_to_string(&report_path).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let report: RankingReport = serde_json::from_value(value.clone()).unwrap();
    assert_eq!(value["seed"], 11);

    let bundle = data::read_bundle(&data).unwrap();
    let params = checkpoint::load(&ckpt_path).unwrap().params;
    let queries = evaluation::queries_from_facts(&bundle.test, bundle.date_range(), 11);
    let expected = evaluation::evaluate(&params, &queries, &FilterIndex::from_bundle(&bundle, true), EvalOptions::default()).unwrap();
    assert_eq!(report, expected);
    assert_eq!(serde_json::from_str::<RankingReport>(&serde_json::to_string(&report).unwrap()).unwrap(), report);
    assert_eq!(fs::read_to_string(&ranks_path).unwrap().lines().count(), 1 + 2 * bundle.test.len());
}

#[test]
fn memorizing_model_scores_perfect_mrr() {
    // Facts (e_i, r, e_i): one-hot real entities and v = 1 score 1 on the
    // diagonal and 0 elsewhere.
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw");
    fs::create_dir_all(&raw).unwrap();
    let facts: Vec<String> = (0..4).map(|i| format!("e{i}\tr\te{i}\t2014")).collect();
    fs::write(raw.join("train"), facts.join("\n")).unwrap();
    fs::write(raw.join("test"), facts.join("\n")).unwrap();
    let bundle = data::load_dataset(&raw, Format::Quadruples, Discretization::Year).unwrap();
    let one = Complex::new(1.0, 0.0);
    let zero = Complex::new(0.0, 0.0);
    let u: Vec<Vec<_>> = (0..4).map(|i| (0..4).map(|r| if r == i { one } else { zero }).collect()).collect();
    let params = ModelParams::from_tables(
        ModelKind::ComplEx,
        EmbeddingTable::from_rows(&u).unwrap(),
        EmbeddingTable::filled(2, 4, one),
        None,
        None,
    )
    .unwrap();
    let ckpt_path = tmp.path().join("m.bin");
    checkpoint::save(&Checkpoint::new(params, None, 0, 0), &ckpt_path).unwrap();
    let report_path = tmp.path().join("r.json");
    let out = tempkb(&[
        "eval", "--dataset", p(&raw), "--discretization", "year", "--checkpoint", p(&ckpt_path), "--out", p(&report_path),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: RankingReport = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report.mrr, 1.0);
    assert_eq!(report.count, 2 * bundle.test.len());
}

#[test]
fn shape_mismatch_and_truncation_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let data = cache(tmp.path());
    let run = tmp.path().join("run");
    assert!(tempkb(&train_args(p(&data), p(&run), "1")).status.success());
    let ckpt_path = run.join("checkpoint.bin");

    let other = tmp.path().join("other");
    assert!(tempkb(&["synth", "--out", p(&other), "--entities", "5", "--predicates", "2", "--timestamps", "3", "--rank", "2"]).status.success());
    let mismatch = tempkb(&["eval", "--dataset", p(&other), "--checkpoint", p(&ckpt_path)]);
    assert_eq!(mismatch.status.code(), Some(1));
    let err = String::from_utf8_lossy(&mismatch.stderr);
    assert!(err.contains("entities=12") && err.contains("entities=5"), "{err}");

    let bytes = fs::read(&ckpt_path).unwrap();
    let cut = tmp.path().join("cut.bin");
    fs::write(&cut, &bytes[..bytes.len() - 5]).unwrap();
    let truncated = tempkb(&["eval", "--dataset", p(&data), "--checkpoint", p(&cut)]);
    assert_eq!(truncated.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&truncated.stderr).contains("truncated"));
}

#[test]
fn trace_writes_one_file_per_object() {
    let tmp = tempfile::tempdir().unwrap();
    let data = cache(tmp.path());
    let run = tmp.path().join("run");
    assert!(tempkb(&train_args(p(&data), p(&run), "1")).status.success());
    let ckpt_path = run.join("checkpoint.bin");
    let traces = tmp.path().join("traces");
    let out = tempkb(&[
        "trace", "--dataset", p(&data), "--checkpoint", p(&ckpt_path), "--subject", "Actor 1", "--predicate", "Consult",
        "--object", "Actor 2", "--object", "Actor 7", "--out", p(&traces),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let files = read_dir_bytes(&traces);
    assert_eq!(files.len(), 2);

    let bundle = data::read_bundle(&data).unwrap();
    let params = checkpoint::load(&ckpt_path).unwrap().params;
    let e = |l: &str| bundle.vocab.entities.get(l).unwrap();
    let expected = evaluation::score_trace(&params, e("Actor 1"), bundle.vocab.predicates.get("Consult").unwrap(), e("Actor 2")).unwrap();
    let text = String::from_utf8(files[0].1.clone()).unwrap();
    let rows: Vec<(String, f64)> = text
        .lines()
        .map(|l| {
            let (t, s) = l.split_once('\t').unwrap();
            (t.to_string(), s.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), bundle.num_timestamps());
    for ((label, score), (t, want)) in rows.iter().zip(expected) {
        assert_eq!(label, bundle.vocab.timestamps.label(t));
        assert_eq!(*score, want);
    }

    let unknown = tempkb(&[
        "trace", "--dataset", p(&data), "--checkpoint", p(&ckpt_path), "--subject", "Actr 1", "--predicate", "Consult",
        "--object", "Actor 2", "--out", p(&traces),
    ]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("did you mean Actor 1"));
}

fn grid_rows(dir: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(dir.join("grid.tsv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

#[test]
fn grid_tabulates_every_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let data = cache(tmp.path());
    let out_dir = tmp.path().join("grid");
    let mut args = vec!["grid", "--dataset", p(&data), "--output", p(&out_dir), "--epochs", "2"];
    args.extend_from_slice(TRAIN);
    args.extend(["--lambdas", "0.01,0.1", "--temporal-strengths", "0,0.01"]);
    let out = tempkb(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("grid cells=4"));
    let rows = grid_rows(&out_dir);
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[5] == "ok"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("grid_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["best_per_temporal_strength"].as_array().unwrap().len(), 2);
}

#[test]
fn single_cell_grid_equals_train_then_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let data = cache(tmp.path());
    let grid_dir = tmp.path().join("grid");
    let mut args = vec!["grid", "--dataset", p(&data), "--output", p(&grid_dir), "--epochs", "2"];
    args.extend_from_slice(TRAIN);
    args.extend(["--lambdas", "0.01", "--temporal-strengths", "0.01"]);
    assert!(tempkb(&args).status.success());
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(grid_dir.join("grid_summary.json")).unwrap()).unwrap();

    let run = tmp.path().join("run");
    assert!(tempkb(&train_args(p(&data), p(&run), "2")).status.success());
    let report_path = run.join("valid.json");
    let ckpt_path = run.join("checkpoint.bin");
    assert!(tempkb(&["eval", "--dataset", p(&data), "--checkpoint", p(&ckpt_path), "--split", "valid", "--out", p(&report_path)]).status.success());
    let report: RankingReport = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(summary["best"]["valid_mrr"].as_f64().unwrap(), report.mrr);
    assert_eq!(fs::read(grid_dir.join("cells/0/checkpoint.bin")).unwrap(), fs::read(&ckpt_path).unwrap());
}

#[test]
fn config_file_and_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = cache(tmp.path());
    let config = tmp.path().join("exp.toml");
    fs::write(
        &config,
        format!(
            "output = {:?}\n[dataset]\npath = {:?}\n[train]\nkind = \"TComplEx\"\nrank = 3\nepochs = 1\nseed = 5\n",
            p(&tmp.path().join("run")),
            p(&data)
        ),
    )
    .unwrap();
    let out = tempkb(&["train", "--config", p(&config)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("seed=5"));
    let effective = fs::read_to_string(tmp.path().join("run/config.toml")).unwrap();
    assert!(effective.contains("kind = \"TComplEx\"") && effective.contains("rank = 3"));

    assert_eq!(tempkb(&["train", "--config", p(&config), "--batch-size", "0"]).status.code(), Some(1));
    assert_eq!(tempkb(&["train", "--bogus-flag"]).status.code(), Some(1));
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[train]\nrnak = 3\n").unwrap();
    assert_eq!(tempkb(&["train", "--config", p(&bad)]).status.code(), Some(1));
    let diverged = tempkb(&["train", "--config", p(&config), "--learning-rate", "1e300", "--init-std", "1e150"]);
    assert_eq!(diverged.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&diverged.stderr).contains("epoch 1"), "{}", String::from_utf8_lossy(&diverged.stderr));
}

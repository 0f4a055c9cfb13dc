use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tempkb_core::checkpoint::{self, Checkpoint};
use tempkb_core::data::{
    self, augment_reciprocal, synthesize, unfold_yago_modes, DatasetBundle, Discretization, Format, Labels, Split,
    SyntheticSizes,
};
use tempkb_core::evaluation::{self, EvalOptions, FilterIndex, RankingReport};
use tempkb_core::training::{EpochRecord, TrainConfig};
use tempkb_core::{ModelParams, Trainer};

use crate::config::{self, EvalConfig, ExperimentConfig};
use crate::CliError;

fn require_exists(path: &Path, what: &str) -> Result<(), CliError> {
    if path.as_os_str().is_empty() {
        return Err(CliError::Config(format!("no {what} given")));
    }
    if !path.exists() {
        return Err(CliError::Config(format!("{what} {} does not exist", path.display())));
    }
    Ok(())
}

fn load_raw(input: &Path, format: Format, disc: Discretization) -> Result<DatasetBundle, CliError> {
    let bundle = data::load_dataset(input, format, disc)?;
    Ok(if format == Format::Yago { unfold_yago_modes(bundle)? } else { bundle })
}

/// A preprocessed cache if `path` holds one, otherwise raw files.
pub fn load_bundle(dataset: &config::DatasetConfig) -> Result<DatasetBundle, CliError> {
    require_exists(&dataset.path, "dataset")?;
    if dataset.path.join("meta.json").is_file() {
        Ok(data::read_bundle(&dataset.path)?)
    } else {
        load_raw(&dataset.path, dataset.format, dataset.discretization)
    }
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| tempkb_core::Error::io(path, e).into())
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| tempkb_core::Error::io(path, e).into())
}

/// Writes next to the target and renames, so an interrupted run never leaves
/// a half-written checkpoint behind.
fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    checkpoint::save(ckpt, &tmp)?;
    fs::rename(&tmp, path).map_err(|e| tempkb_core::Error::io(path, e).into())
}

fn print_stats(bundle: &DatasetBundle) {
    println!("{}", bundle.stats());
    for split in Split::ALL {
        println!("{}: temporal_fraction={:.4}", split.name(), bundle.temporal_fraction(split));
    }
}

pub fn preprocess(input: &Path, format: Format, disc: Discretization, out: &Path) -> Result<(), CliError> {
    require_exists(input, "input directory")?;
    let bundle = load_raw(input, format, disc)?;
    data::write_bundle(&bundle, out)?;
    print_stats(&bundle);
    println!("cache={}", out.display());
    Ok(())
}

pub fn synth(
    out: &Path,
    rank: usize,
    sizes: SyntheticSizes,
    noise: f64,
    seed: u64,
) -> Result<(), CliError> {
    let (bundle, _) = synthesize(rank, sizes, noise, seed).map_err(|e| match e {
        tempkb_core::Error::InvalidConfig(m) => CliError::Config(m),
        other => other.into(),
    })?;
    data::write_bundle(&bundle, out)?;
    println!("seed={seed}");
    print_stats(&bundle);
    println!("cache={}", out.display());
    Ok(())
}

fn training_bundle(bundle: DatasetBundle) -> Result<DatasetBundle, CliError> {
    Ok(if bundle.augmented { bundle } else { augment_reciprocal(bundle)? })
}

fn check_shape(ckpt: &Checkpoint, bundle: &DatasetBundle) -> Result<(), CliError> {
    let h = &ckpt.header;
    let want = bundle.model_shape(h.rank);
    let timestamps_ok = !h.kind.is_temporal() || h.timestamps == want.timestamps;
    if h.entities != want.entities || h.predicates != want.predicates || !timestamps_ok {
        return Err(CliError::Config(format!(
            "checkpoint shape (entities={}, predicates={}, timestamps={}) does not match dataset shape \
             (entities={}, predicates={}, timestamps={})",
            h.entities, h.predicates, h.timestamps, want.entities, want.predicates, want.timestamps
        )));
    }
    Ok(())
}

fn read_log(path: &Path, keep_through: usize) -> Result<Vec<String>, CliError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = File::open(path).map_err(|e| tempkb_core::Error::io(path, e))?;
    let mut kept = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| tempkb_core::Error::io(path, e))?;
        let record: EpochRecord = serde_json::from_str(&line).map_err(tempkb_core::Error::from)?;
        if record.epoch <= keep_through {
            kept.push(line);
        }
    }
    Ok(kept)
}

/// Trains (or resumes) and leaves `checkpoint.bin`, `train_log.jsonl` and the
/// effective `config.toml` in the output directory.
pub fn train(config: &ExperimentConfig, resume: Option<&Path>) -> Result<PathBuf, CliError> {
    let bundle = training_bundle(load_bundle(&config.dataset)?)?;
    create_dir(&config.output)?;
    write_file(&config.output.join("config.toml"), config::to_toml(config))?;
    println!("seed={}", config.train.seed);

    let mut trainer = match resume {
        Some(path) => {
            require_exists(path, "checkpoint")?;
            let ckpt = checkpoint::load(path)?;
            check_shape(&ckpt, &bundle)?;
            if ckpt.header.seed != config.train.seed {
                return Err(CliError::Config(format!(
                    "checkpoint was trained with seed {}, configuration says {}",
                    ckpt.header.seed, config.train.seed
                )));
            }
            let state = ckpt
                .optimizer
                .ok_or_else(|| CliError::Config(format!("{} holds no optimizer state", path.display())))?;
            Trainer::from_parts(ckpt.params, state, ckpt.header.epoch, config.train.clone())?
        }
        None => Trainer::new(&bundle, config.train.clone())?,
    };

    let log_path = config.output.join("train_log.jsonl");
    let previous = read_log(&log_path, trainer.epoch())?;
    let mut log = File::create(&log_path).map_err(|e| tempkb_core::Error::io(&log_path, e))?;
    for line in previous {
        writeln!(log, "{line}").map_err(|e| tempkb_core::Error::io(&log_path, e))?;
    }

    let ckpt_path = config.output.join("checkpoint.bin");
    let seed = config.train.seed;
    let every = config.checkpoint_every;
    let snapshot = |t: &Trainer| {
        Checkpoint::new(t.params().clone(), Some(t.state().clone()), t.epoch(), seed)
    };
    let result = trainer.train_with(&bundle, |record, t| {
        let line = serde_json::to_string(record)?;
        writeln!(log, "{line}").map_err(|e| tempkb_core::Error::io(&log_path, e))?;
        println!("{line}");
        if every > 0 && record.epoch % every == 0 {
            save_checkpoint(&snapshot(t), &ckpt_path).map_err(|e| tempkb_core::Error::Checkpoint(e.to_string()))?;
        }
        Ok(())
    });
    result?;
    save_checkpoint(&snapshot(&trainer), &ckpt_path)?;
    println!("checkpoint={}", ckpt_path.display());
    Ok(ckpt_path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub checkpoint: String,
    pub split: String,
    /// Seed of the timestamp draws for interval facts.
    pub seed: u64,
    pub filter_time: bool,
    #[serde(flatten)]
    pub report: RankingReport,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub time_auprc: Option<f64>,
}

/// Filtered ranking of one split, as the `eval` command computes it.
pub fn evaluate_split(
    params: &ModelParams,
    bundle: &DatasetBundle,
    split: Split,
    options: EvalConfig,
    seed: u64,
) -> Result<(RankingReport, Vec<evaluation::QueryRank>), CliError> {
    let filter = FilterIndex::from_bundle(bundle, options.filter_time);
    let queries = evaluation::queries_from_facts(bundle.split(split), bundle.date_range(), seed);
    Ok(evaluation::evaluate_with_ranks(params, &queries, &filter, EvalOptions { rhs_only: options.rhs_only })?)
}

pub struct EvalArgs<'a> {
    pub checkpoint: &'a Path,
    pub split: Split,
    pub out: Option<PathBuf>,
    pub ranks: Option<PathBuf>,
    pub seed: Option<u64>,
    pub time_auprc: bool,
}

pub fn eval(config: &ExperimentConfig, args: EvalArgs<'_>) -> Result<EvalOutput, CliError> {
    require_exists(args.checkpoint, "checkpoint")?;
    let ckpt = checkpoint::load(args.checkpoint)?;
    let bundle = load_bundle(&config.dataset)?;
    check_shape(&ckpt, &bundle)?;
    let seed = args.seed.unwrap_or(ckpt.header.seed);
    let (report, ranks) = evaluate_split(&ckpt.params, &bundle, args.split, config.eval, seed)?;
    let time_auprc = if args.time_auprc {
        Some(evaluation::time_auprc(&ckpt.params, bundle.split(args.split), bundle.date_range())?)
    } else {
        None
    };
    let output = EvalOutput {
        checkpoint: args.checkpoint.display().to_string(),
        split: args.split.name().to_string(),
        seed,
        filter_time: config.eval.filter_time,
        report,
        time_auprc,
    };
    let out = args.out.unwrap_or_else(|| config.output.join(format!("report_{}.json", args.split.name())));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_file(&out, serde_json::to_string_pretty(&output).map_err(tempkb_core::Error::from)? + "\n")?;
    if let Some(path) = args.ranks {
        let mut text = String::from("s\tp\tt\tgold\trank\n");
        for r in &ranks {
            text.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", r.s, r.p, r.t, r.gold, r.rank));
        }
        write_file(&path, text)?;
    }
    println!("seed={seed}");
    println!(
        "split={} mrr={:.4} hits@1={:.4} hits@3={:.4} hits@10={:.4} count={} t_mrr={:.4} nt_mrr={:.4}",
        output.split,
        report.mrr,
        report.hits_at_1,
        report.hits_at_3,
        report.hits_at_10,
        report.count,
        report.temporal.mrr,
        report.non_temporal.mrr
    );
    if let Some(a) = time_auprc {
        println!("time_auprc={a:.4}");
    }
    println!("report={}", out.display());
    Ok(output)
}

/// Up to three labels closest to `query` by edit distance.
pub fn suggestions<'a>(query: &str, candidates: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut scored: Vec<(usize, &str)> = candidates.map(|c| (strsim::levenshtein(query, c), c)).collect();
    scored.sort();
    scored.into_iter().take(3).map(|(_, c)| c.to_string()).collect()
}

fn resolve(kind: &str, label: &str, labels: &[String]) -> Result<usize, CliError> {
    labels.iter().position(|l| l == label).ok_or_else(|| {
        let near = suggestions(label, labels.iter().map(String::as_str));
        CliError::Config(format!("unknown {kind} `{label}`; did you mean {}?", near.join(", ")))
    })
}

fn file_stem(label: &str) -> String {
    label.chars().map(|c| if c.is_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

/// Writes one `timestamp<TAB>score` file per object.
pub fn trace(
    config: &ExperimentConfig,
    checkpoint_path: &Path,
    subject: &str,
    predicate: &str,
    objects: &[String],
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    require_exists(checkpoint_path, "checkpoint")?;
    let ckpt = checkpoint::load(checkpoint_path)?;
    let bundle = load_bundle(&config.dataset)?;
    check_shape(&ckpt, &bundle)?;
    let entities = bundle.vocab.entities.labels();
    let predicates: Vec<String> = (0..2 * bundle.num_base_predicates()).map(|p| bundle.predicate_label(p)).collect();
    let s = resolve("entity", subject, entities)?;
    let p = resolve("predicate", predicate, &predicates)?;
    let os = objects.iter().map(|o| resolve("entity", o, entities)).collect::<Result<Vec<_>, _>>()?;
    create_dir(out)?;
    let times: &Labels = &bundle.vocab.timestamps;
    let mut written = Vec::new();
    for (i, (&o, label)) in os.iter().zip(objects).enumerate() {
        let mut text = String::new();
        for (t, score) in evaluation::score_trace(&ckpt.params, s, p, o)? {
            text.push_str(&format!("{}\t{score}\n", times.label(t)));
        }
        let path = out.join(format!("{i}_{}.tsv", file_stem(label)));
        write_file(&path, text)?;
        println!("{}", path.display());
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub rank: usize,
    pub lambda: f64,
    pub temporal_strength: f64,
    pub valid_mrr: Option<f64>,
    pub test_mrr: Option<f64>,
    /// `ok` or the error that stopped the cell.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub seed: u64,
    pub cells: Vec<GridCell>,
    pub best: Option<GridCell>,
    /// Best cell per temporal strength, in increasing strength.
    pub best_per_temporal_strength: Vec<GridCell>,
}

fn run_cell(config: &ExperimentConfig, bundle: &DatasetBundle, train: TrainConfig, dir: &Path) -> Result<(Option<f64>, Option<f64>), CliError> {
    let mut trainer = Trainer::new(bundle, train.clone())?;
    trainer.train_with(bundle, |_, _| Ok(()))?;
    create_dir(dir)?;
    save_checkpoint(&Checkpoint::new(trainer.params().clone(), Some(trainer.state().clone()), trainer.epoch(), train.seed), &dir.join("checkpoint.bin"))?;
    let score = |split: Split| -> Result<Option<f64>, CliError> {
        if bundle.split(split).is_empty() {
            return Ok(None);
        }
        Ok(Some(evaluate_split(trainer.params(), bundle, split, config.eval, train.seed)?.0.mrr))
    };
    Ok((score(Split::Valid)?, score(Split::Test)?))
}

/// Higher validation MRR wins; ties go to the smaller lambda, then the
/// smaller temporal strength, then the smaller rank.
fn better(a: &GridCell, b: &GridCell) -> bool {
    let (Some(va), vb) = (a.valid_mrr, b.valid_mrr) else { return false };
    match vb {
        None => true,
        Some(vb) if va != vb => va > vb,
        Some(_) => (a.lambda, a.temporal_strength, a.rank) < (b.lambda, b.temporal_strength, b.rank),
    }
}

pub fn grid(config: &ExperimentConfig, jobs: usize) -> Result<GridSummary, CliError> {
    let g = &config.grid;
    let ranks = if g.ranks.is_empty() { vec![config.train.rank] } else { g.ranks.clone() };
    if g.lambdas.is_empty() || g.temporal_strengths.is_empty() {
        return Err(CliError::Config("grid lists must be non-empty".into()));
    }
    let bundle = training_bundle(load_bundle(&config.dataset)?)?;
    create_dir(&config.output)?;
    write_file(&config.output.join("config.toml"), config::to_toml(config))?;
    let mut specs = Vec::new();
    for &rank in &ranks {
        for &lambda in &g.lambdas {
            for &temporal_strength in &g.temporal_strengths {
                specs.push((rank, lambda, temporal_strength));
            }
        }
    }
    println!("seed={}", config.train.seed);
    println!("grid cells={} (ranks={} lambdas={} temporal_strengths={})", specs.len(), ranks.len(), g.lambdas.len(), g.temporal_strengths.len());

    let run = |(i, &(rank, lambda, temporal_strength)): (usize, &(usize, f64, f64))| {
        let mut train = config.train.clone();
        train.rank = rank;
        train.reg.lambda = lambda;
        train.reg.temporal_strength = temporal_strength;
        let dir = config.output.join("cells").join(i.to_string());
        let outcome = train.validate().map_err(CliError::from).and_then(|_| run_cell(config, &bundle, train, &dir));
        let (valid_mrr, test_mrr, status) = match outcome {
            Ok((v, t)) => (v, t, "ok".to_string()),
            Err(e) => {
                log::warn!("grid cell {i} failed: {e}");
                (None, None, format!("error: {e}"))
            }
        };
        GridCell { rank, lambda, temporal_strength, valid_mrr, test_mrr, status }
    };
    let cells: Vec<GridCell> = if jobs > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;
        pool.install(|| specs.par_iter().enumerate().map(run).collect())
    } else {
        specs.iter().enumerate().map(run).collect()
    };

    let best = cells.iter().fold(None::<&GridCell>, |acc, c| match acc {
        Some(b) if !better(c, b) => Some(b),
        _ if c.valid_mrr.is_some() => Some(c),
        other => other,
    });
    let mut per_strength: BTreeMap<u64, &GridCell> = BTreeMap::new();
    for c in &cells {
        let key = c.temporal_strength.to_bits();
        match per_strength.get(&key) {
            Some(b) if !better(c, b) => {}
            _ if c.valid_mrr.is_some() => {
                per_strength.insert(key, c);
            }
            _ => {}
        }
    }
    let mut best_per_temporal_strength: Vec<GridCell> = per_strength.into_values().cloned().collect();
    best_per_temporal_strength.sort_by(|a, b| a.temporal_strength.total_cmp(&b.temporal_strength));

    let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
    let mut table = String::from("rank\tlambda\ttemporal_strength\tvalid_mrr\ttest_mrr\tstatus\n");
    for c in &cells {
        table.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            c.rank,
            c.lambda,
            c.temporal_strength,
            fmt(c.valid_mrr),
            fmt(c.test_mrr),
            c.status
        ));
    }
    print!("{table}");
    write_file(&config.output.join("grid.tsv"), &table)?;
    println!("best per temporal strength:");
    for c in &best_per_temporal_strength {
        println!("  temporal_strength={} lambda={} rank={} valid_mrr={} test_mrr={}", c.temporal_strength, c.lambda, c.rank, fmt(c.valid_mrr), fmt(c.test_mrr));
    }
    if let Some(b) = best {
        println!("best: rank={} lambda={} temporal_strength={} valid_mrr={} test_mrr={}", b.rank, b.lambda, b.temporal_strength, fmt(b.valid_mrr), fmt(b.test_mrr));
    }
    let summary = GridSummary { seed: config.train.seed, best: best.cloned(), best_per_temporal_strength, cells };
    write_file(
        &config.output.join("grid_summary.json"),
        serde_json::to_string_pretty(&summary).map_err(tempkb_core::Error::from)? + "\n",
    )?;
    Ok(summary)
}

//! Dataset ingestion, vocabularies, timestamp discretization and bundles.
//!
//! Three tab-separated input layouts are supported, one fact per line:
//!
//! * quadruples: `subject  predicate  object  timestamp`
//! * intervals: `subject  predicate  object  begin  end` (empty = unspecified)
//! * yago: `subject  predicate  object  timestamp  tag` with tag
//!   `occursSince`, `occursUntil` or empty
//!
//! A dataset directory holds `train`, `valid` and `test` files (an optional
//! `.txt` extension is accepted). The vocabulary is built over the union of
//! the three splits; timestamp indices follow chronological order.

mod cache;
mod params;
mod synthetic;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelShape;

pub use cache::{read_bundle, write_bundle, CACHE_FORMAT_VERSION};
pub use params::{de_simple_parameter_count, parameter_count, rank_match, VocabSizes, DE_SIMPLE_GAMMA};
pub use synthetic::{synthesize, SyntheticSizes};

/// Integer-indexed `(subject, predicate, object, timestamp)` tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TemporalFact {
    pub s: usize,
    pub p: usize,
    pub o: usize,
    pub t: usize,
}

impl TemporalFact {
    pub fn new(s: usize, p: usize, o: usize, t: usize) -> Self {
        Self { s, p, o, t }
    }
}

/// Yago-style temporal qualifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimeTag {
    Since,
    Until,
}

impl TimeTag {
    fn parse(s: &str) -> Option<Option<TimeTag>> {
        match s {
            "" => Some(None),
            "occursSince" => Some(Some(TimeTag::Since)),
            "occursUntil" => Some(Some(TimeTag::Until)),
            _ => None,
        }
    }
}

/// A fact with an optional validity range over timestamp indices.
///
/// Point-in-time facts have `begin == end`. A fact carries time when at least
/// one bound is present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntervalFact {
    pub s: usize,
    pub p: usize,
    pub o: usize,
    pub begin: Option<usize>,
    pub end: Option<usize>,
    pub tag: Option<TimeTag>,
}

impl IntervalFact {
    pub fn point(s: usize, p: usize, o: usize, t: usize) -> Self {
        Self { s, p, o, begin: Some(t), end: Some(t), tag: None }
    }

    pub fn untimed(s: usize, p: usize, o: usize) -> Self {
        Self { s, p, o, begin: None, end: None, tag: None }
    }

    pub fn has_time(&self) -> bool {
        self.begin.is_some() || self.end.is_some()
    }

    /// Inclusive timestamp range after filling missing bounds from `date_range`.
    pub fn bounds(&self, date_range: (usize, usize)) -> (usize, usize) {
        (self.begin.unwrap_or(date_range.0), self.end.unwrap_or(date_range.1))
    }
}

/// How raw timestamp labels are mapped to discrete timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Discretization {
    /// Labels used as-is (ISO dates or integers).
    None,
    /// Keep the year only.
    Year,
    /// Fixed-width buckets of this many days, labelled by their first day.
    Bucket(u32),
}

impl FromStr for Discretization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Discretization::None),
            "year" => Ok(Discretization::Year),
            _ => match s.strip_prefix("bucket:").and_then(|d| d.parse::<u32>().ok()) {
                Some(days) if days > 0 => Ok(Discretization::Bucket(days)),
                _ => Err(Error::InvalidConfig(format!(
                    "unknown discretization `{s}` (expected none, year or bucket:<days>)"
                ))),
            },
        }
    }
}

impl fmt::Display for Discretization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Discretization::None => f.write_str("none"),
            Discretization::Year => f.write_str("year"),
            Discretization::Bucket(d) => write!(f, "bucket:{d}"),
        }
    }
}

impl TryFrom<String> for Discretization {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Discretization> for String {
    fn from(d: Discretization) -> String {
        d.to_string()
    }
}

fn parse_iso_date(label: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(label, "%Y-%m-%d").ok()
}

/// Leading (optionally negative) year of a label like `2014-05-01` or `1996-##-##`.
fn leading_year(label: &str) -> Option<i32> {
    let (sign, rest) = match label.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, label),
    };
    let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
    if digits.is_empty() {
        return None;
    }
    digits.parse::<i32>().ok().map(|y| sign * y)
}

/// Chronological sort key in days.
fn chrono_key(label: &str) -> Option<i64> {
    if let Some(d) = parse_iso_date(label) {
        return Some(i64::from(d.num_days_from_ce()));
    }
    let year: i32 = label.parse().ok()?;
    NaiveDate::from_ymd_opt(year, 1, 1).map(|d| i64::from(d.num_days_from_ce()))
}

impl Discretization {
    /// Maps a raw label to its discretized label.
    pub fn apply(&self, label: &str) -> Option<String> {
        match self {
            Discretization::None => chrono_key(label).map(|_| label.to_string()),
            Discretization::Year => leading_year(label).map(|y| y.to_string()),
            Discretization::Bucket(days) => {
                let date = parse_iso_date(label)?;
                let day = i64::from(date.num_days_from_ce());
                let start = day.div_euclid(i64::from(*days)) * i64::from(*days);
                NaiveDate::from_num_days_from_ce_opt(start as i32).map(|d| d.format("%Y-%m-%d").to_string())
            }
        }
    }
}

/// Dense label <-> index map.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Labels {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl Labels {
    pub fn from_labels(labels: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::Dataset(format!("duplicate label `{l}`")));
            }
        }
        Ok(Self { labels, index })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Entity, predicate and timestamp vocabularies.
///
/// Timestamp index order equals chronological order, so index adjacency is
/// temporal adjacency.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    pub entities: Labels,
    pub predicates: Labels,
    pub timestamps: Labels,
}

/// Input file layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Quadruples,
    Intervals,
    Yago,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadruples" => Ok(Format::Quadruples),
            "intervals" => Ok(Format::Intervals),
            "yago" => Ok(Format::Yago),
            _ => Err(Error::InvalidConfig(format!(
                "unknown format `{s}` (expected quadruples, intervals or yago)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            _ => Err(Error::InvalidConfig(format!("unknown split `{s}`"))),
        }
    }
}

/// Vocabulary sizes and split sizes of a bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub entities: usize,
    /// Rows of the predicate table, reciprocals included.
    pub predicates: usize,
    pub base_predicates: usize,
    pub timestamps: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "entities={} predicates={} timestamps={} base_predicates={} train={} valid={} test={}",
            self.entities, self.predicates, self.timestamps, self.base_predicates, self.train, self.valid, self.test
        )
    }
}

/// Train/valid/test facts over one shared vocabulary.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetBundle {
    pub vocab: Vocabulary,
    pub train: Vec<IntervalFact>,
    pub valid: Vec<IntervalFact>,
    pub test: Vec<IntervalFact>,
    /// Training split contains reciprocal facts.
    pub augmented: bool,
    /// Predicates were unfolded with the since/until tag.
    pub yago_unfolded: bool,
}

impl DatasetBundle {
    pub fn split(&self, split: Split) -> &[IntervalFact] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn num_entities(&self) -> usize {
        self.vocab.entities.len()
    }

    /// Predicates before reciprocal augmentation.
    pub fn num_base_predicates(&self) -> usize {
        self.vocab.predicates.len()
    }

    pub fn num_timestamps(&self) -> usize {
        self.vocab.timestamps.len()
    }

    /// Model shape; the predicate table always holds the reciprocal rows.
    pub fn model_shape(&self, rank: usize) -> ModelShape {
        ModelShape {
            rank,
            entities: self.num_entities(),
            predicates: 2 * self.num_base_predicates(),
            timestamps: self.num_timestamps(),
        }
    }

    /// Inclusive span of timestamp indices; unspecified bounds fall back to it.
    pub fn date_range(&self) -> (usize, usize) {
        (0, self.num_timestamps().saturating_sub(1))
    }

    pub fn stats(&self) -> DatasetStats {
        DatasetStats {
            entities: self.num_entities(),
            predicates: 2 * self.num_base_predicates(),
            base_predicates: self.num_base_predicates(),
            timestamps: self.num_timestamps(),
            train: self.train.len(),
            valid: self.valid.len(),
            test: self.test.len(),
        }
    }

    /// Fraction of facts in `split` that carry any time annotation.
    pub fn temporal_fraction(&self, split: Split) -> f64 {
        let facts = self.split(split);
        if facts.is_empty() {
            return 0.0;
        }
        facts.iter().filter(|f| f.has_time()).count() as f64 / facts.len() as f64
    }

    pub fn sizes(&self) -> VocabSizes {
        VocabSizes {
            entities: self.num_entities(),
            predicates: self.num_base_predicates(),
            timestamps: self.num_timestamps(),
        }
    }

    /// Human-readable predicate label, reciprocal rows marked with `^-1`.
    pub fn predicate_label(&self, p: usize) -> String {
        let n = self.num_base_predicates();
        if p < n {
            self.vocab.predicates.label(p).to_string()
        } else {
            format!("{}^-1", self.vocab.predicates.label(p - n))
        }
    }

    /// Checks that every index is within the vocabulary.
    pub fn validate(&self) -> Result<()> {
        let ne = self.num_entities();
        let np = if self.augmented { 2 * self.num_base_predicates() } else { self.num_base_predicates() };
        let nt = self.num_timestamps();
        for split in Split::ALL {
            for f in self.split(split) {
                let bad_time = [f.begin, f.end].iter().flatten().any(|&t| t >= nt);
                if f.s >= ne || f.o >= ne || f.p >= np || bad_time {
                    return Err(Error::Dataset(format!("{} fact {f:?} out of vocabulary range", split.name())));
                }
                if let (Some(b), Some(e)) = (f.begin, f.end) {
                    if b > e {
                        return Err(Error::Dataset(format!("{} fact {f:?} has begin > end", split.name())));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Adds `(o, p + |P|, s, t)` for every training fact `(s, p, o, t)`.
///
/// Only the training split is augmented; evaluation answers left-hand-side
/// queries through the reciprocal predicates directly. Augmenting twice is
/// refused.
pub fn augment_reciprocal(bundle: DatasetBundle) -> Result<DatasetBundle> {
    if bundle.augmented {
        return Err(Error::Dataset("bundle is already augmented with reciprocal predicates".into()));
    }
    let n = bundle.num_base_predicates();
    let mut out = bundle;
    let reciprocals: Vec<IntervalFact> = out
        .train
        .iter()
        .map(|f| IntervalFact { s: f.o, p: f.p + n, o: f.s, ..*f })
        .collect();
    out.train.extend(reciprocals);
    out.augmented = true;
    Ok(out)
}

const SINCE_SUFFIX: &str = "@occursSince";
const UNTIL_SUFFIX: &str = "@occursUntil";

/// Folds the since/until tag into the predicate mode: `p -> 2p` (since or
/// untimed) and `p -> 2p + 1` (until). Must run before reciprocal augmentation.
pub fn unfold_yago_modes(bundle: DatasetBundle) -> Result<DatasetBundle> {
    if bundle.augmented {
        return Err(Error::Dataset("unfold the since/until mode before reciprocal augmentation".into()));
    }
    if bundle.yago_unfolded {
        return Err(Error::Dataset("bundle is already unfolded".into()));
    }
    let mut out = bundle;
    for split in [&mut out.train, &mut out.valid, &mut out.test] {
        for f in split.iter_mut() {
            f.p = match (f.has_time(), f.tag) {
                (_, Some(TimeTag::Until)) => 2 * f.p + 1,
                (_, Some(TimeTag::Since)) | (false, None) => 2 * f.p,
                (true, None) => {
                    return Err(Error::Dataset(format!("temporal record {f:?} has no occursSince/occursUntil tag")))
                }
            };
        }
    }
    let labels = out
        .vocab
        .predicates
        .labels()
        .iter()
        .flat_map(|l| [format!("{l}{SINCE_SUFFIX}"), format!("{l}{UNTIL_SUFFIX}")])
        .collect();
    out.vocab.predicates = Labels::from_labels(labels)?;
    out.yago_unfolded = true;
    Ok(out)
}

/// Inverse of [`unfold_yago_modes`].
pub fn fold_yago_modes(bundle: DatasetBundle) -> Result<DatasetBundle> {
    if !bundle.yago_unfolded || bundle.augmented {
        return Err(Error::Dataset("only unfolded, non-augmented bundles can be folded".into()));
    }
    let mut out = bundle;
    for split in [&mut out.train, &mut out.valid, &mut out.test] {
        for f in split.iter_mut() {
            f.p /= 2;
        }
    }
    let labels = out
        .vocab
        .predicates
        .labels()
        .iter()
        .step_by(2)
        .map(|l| l.strip_suffix(SINCE_SUFFIX).unwrap_or(l).to_string())
        .collect();
    out.vocab.predicates = Labels::from_labels(labels)?;
    out.yago_unfolded = false;
    Ok(out)
}

#[derive(Debug, Clone)]
struct RawRecord {
    s: String,
    p: String,
    o: String,
    begin: Option<String>,
    end: Option<String>,
    tag: Option<TimeTag>,
}

fn non_empty(s: &str) -> Option<String> {
    let s = s.trim();
    (!s.is_empty()).then(|| s.to_string())
}

fn parse_line(format: Format, line: &str) -> std::result::Result<RawRecord, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    let triple = |c: &[&str]| -> std::result::Result<(String, String, String), String> {
        let get = |i: usize, what: &str| non_empty(c[i]).ok_or_else(|| format!("empty {what}"));
        Ok((get(0, "subject")?, get(1, "predicate")?, get(2, "object")?))
    };
    match format {
        Format::Quadruples => {
            if cols.len() != 4 {
                return Err(format!("expected 4 tab-separated columns, found {}", cols.len()));
            }
            let (s, p, o) = triple(&cols)?;
            let t = non_empty(cols[3]).ok_or("empty timestamp")?;
            Ok(RawRecord { s, p, o, begin: Some(t.clone()), end: Some(t), tag: None })
        }
        Format::Intervals => {
            if cols.len() != 5 && cols.len() != 3 {
                return Err(format!("expected 5 tab-separated columns, found {}", cols.len()));
            }
            let (s, p, o) = triple(&cols)?;
            let begin = cols.get(3).and_then(|c| non_empty(c));
            let end = cols.get(4).and_then(|c| non_empty(c));
            Ok(RawRecord { s, p, o, begin, end, tag: None })
        }
        Format::Yago => {
            if cols.len() != 5 && cols.len() != 3 {
                return Err(format!("expected 5 tab-separated columns, found {}", cols.len()));
            }
            let (s, p, o) = triple(&cols)?;
            let time = cols.get(3).and_then(|c| non_empty(c));
            let tag_str = cols.get(4).map_or("", |c| c.trim());
            let tag = TimeTag::parse(tag_str).ok_or_else(|| format!("unknown temporal tag `{tag_str}`"))?;
            if tag.is_some() != time.is_some() {
                return Err("a temporal tag requires a timestamp and vice versa".to_string());
            }
            Ok(RawRecord { s, p, o, begin: time.clone(), end: time, tag })
        }
    }
}

fn read_records(path: &Path, format: Format, disc: Discretization) -> Result<Vec<(usize, RawRecord)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { path: path.to_path_buf(), line: line_no, message };
        let mut rec = parse_line(format, line).map_err(parse_err)?;
        for bound in [&mut rec.begin, &mut rec.end] {
            if let Some(raw) = bound.take() {
                let label = disc
                    .apply(&raw)
                    .ok_or_else(|| parse_err(format!("cannot interpret timestamp `{raw}` with {disc} discretization")))?;
                *bound = Some(label);
            }
        }
        out.push((line_no, rec));
    }
    Ok(out)
}

fn split_path(dir: &Path, split: Split) -> Option<PathBuf> {
    [split.name().to_string(), format!("{}.txt", split.name())]
        .iter()
        .map(|n| dir.join(n))
        .find(|p| p.is_file())
}

/// Loads a dataset directory with the given layout.
///
/// Records whose begin is after their end are skipped with a warning.
pub fn load_dataset(dir: &Path, format: Format, disc: Discretization) -> Result<DatasetBundle> {
    let train_path = split_path(dir, Split::Train)
        .ok_or_else(|| Error::io(dir.join("train"), std::io::Error::from(std::io::ErrorKind::NotFound)))?;
    let mut raw: Vec<(PathBuf, Vec<(usize, RawRecord)>)> = Vec::with_capacity(3);
    raw.push((train_path.clone(), read_records(&train_path, format, disc)?));
    for split in [Split::Valid, Split::Test] {
        match split_path(dir, split) {
            Some(path) => {
                let recs = read_records(&path, format, disc)?;
                raw.push((path, recs));
            }
            None => {
                log::warn!("no {} split in {}", split.name(), dir.display());
                raw.push((dir.join(split.name()), Vec::new()));
            }
        }
    }

    let mut entities = BTreeSet::new();
    let mut predicates = BTreeSet::new();
    let mut timestamps = BTreeSet::new();
    for (_, recs) in &raw {
        for (_, r) in recs {
            entities.insert(r.s.clone());
            entities.insert(r.o.clone());
            predicates.insert(r.p.clone());
            for t in [&r.begin, &r.end].into_iter().flatten() {
                timestamps.insert(t.clone());
            }
        }
    }
    let mut ts: Vec<(i64, String)> = timestamps
        .into_iter()
        .map(|l| {
            let key = chrono_key(&l).ok_or_else(|| Error::Dataset(format!("timestamp label `{l}` is not chronological")))?;
            Ok((key, l))
        })
        .collect::<Result<_>>()?;
    ts.sort();
    let vocab = Vocabulary {
        entities: Labels::from_labels(entities.into_iter().collect())?,
        predicates: Labels::from_labels(predicates.into_iter().collect())?,
        timestamps: Labels::from_labels(ts.into_iter().map(|(_, l)| l).collect())?,
    };

    let mut splits: Vec<Vec<IntervalFact>> = Vec::with_capacity(3);
    for (path, recs) in raw {
        let mut facts = Vec::with_capacity(recs.len());
        for (line, r) in recs {
            let idx = |l: &Option<String>| l.as_ref().and_then(|l| vocab.timestamps.get(l));
            let fact = IntervalFact {
                s: vocab.entities.get(&r.s).expect("in vocabulary"),
                p: vocab.predicates.get(&r.p).expect("in vocabulary"),
                o: vocab.entities.get(&r.o).expect("in vocabulary"),
                begin: idx(&r.begin),
                end: idx(&r.end),
                tag: r.tag,
            };
            if let (Some(b), Some(e)) = (fact.begin, fact.end) {
                if b > e {
                    log::warn!(
                        "{}:{line}: rejected record with begin {} after end {}",
                        path.display(),
                        vocab.timestamps.label(b),
                        vocab.timestamps.label(e)
                    );
                    continue;
                }
            }
            facts.push(fact);
        }
        splits.push(facts);
    }
    let test = splits.pop().unwrap_or_default();
    let valid = splits.pop().unwrap_or_default();
    let train = splits.pop().unwrap_or_default();
    Ok(DatasetBundle { vocab, train, valid, test, augmented: false, yago_unfolded: false })
}

/// Loads `(s, p, o, timestamp)` files.
pub fn load_quadruples(dir: &Path, disc: Discretization) -> Result<DatasetBundle> {
    load_dataset(dir, Format::Quadruples, disc)
}

/// Loads `(s, p, o, begin, end)` files with optional bounds.
pub fn load_intervals(dir: &Path, disc: Discretization) -> Result<DatasetBundle> {
    load_dataset(dir, Format::Intervals, disc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_split(dir: &Path, name: &str, lines: &[&str]) {
        fs::write(dir.join(name), lines.join("\n") + "\n").unwrap();
    }

    #[test]
    fn repeated_entity_counted_once() {
        let dir = tempfile::tempdir().unwrap();
        write_split(dir.path(), "train", &["a\tp\tb\t2014-01-02", "a\tq\tc\t2014-01-01"]);
        let b = load_quadruples(dir.path(), Discretization::None).unwrap();
        assert_eq!(b.num_entities(), 3);
        assert_eq!(b.num_base_predicates(), 2);
        assert_eq!(b.vocab.timestamps.labels(), &["2014-01-01", "2014-01-02"]);
        assert_eq!(b.train[0].begin, Some(1));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        write_split(dir.path(), "train", &["a\tp\tb\t2014-01-02", "a\tq\tc"]);
        let err = load_quadruples(dir.path(), Discretization::None).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn chronological_not_lexicographic_order() {
        let dir = tempfile::tempdir().unwrap();
        write_split(dir.path(), "train", &["a\tp\tb\t10", "a\tp\tb\t9", "a\tp\tb\t-5", "a\tp\tb\t100"]);
        let b = load_quadruples(dir.path(), Discretization::None).unwrap();
        assert_eq!(b.vocab.timestamps.labels(), &["-5", "9", "10", "100"]);
    }

    #[test]
    fn intervals_with_years() {
        let dir = tempfile::tempdir().unwrap();
        write_split(
            dir.path(),
            "train",
            &["a\tp\tb\t2009-01-20\t2017-01-20", "a\tq\tb\t\t", "c\tq\tb\t2012\t", "c\tq\tb\t2020\t2010"],
        );
        write_split(dir.path(), "test", &["a\tp\tz\t\t2015"]);
        let b = load_intervals(dir.path(), Discretization::Year).unwrap();
        let label = |i: Option<usize>| i.map(|i| b.vocab.timestamps.label(i).to_string());
        assert_eq!(label(b.train[0].begin).as_deref(), Some("2009"));
        assert_eq!(label(b.train[0].end).as_deref(), Some("2017"));
        assert!(!b.train[1].has_time());
        assert_eq!(b.train[2].end, None);
        // begin > end rejected
        assert_eq!(b.train.len(), 3);
        assert_eq!(b.test.len(), 1);
        assert!(b.vocab.entities.get("z").is_some());
    }

    #[test]
    fn temporal_fraction_counts() {
        let mut b = DatasetBundle::default();
        b.train = (0..10).map(|i| IntervalFact::untimed(i, 0, i)).collect();
        b.train[3].begin = Some(0);
        assert!((b.temporal_fraction(Split::Train) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn discretization_parsing_and_buckets() {
        assert!("weekly".parse::<Discretization>().is_err());
        assert_eq!("bucket:7".parse::<Discretization>().unwrap(), Discretization::Bucket(7));
        let d = Discretization::Bucket(7);
        assert_eq!(d.apply("2014-01-01"), d.apply("2014-01-03"));
        assert_eq!(Discretization::Year.apply("1996-##-##").as_deref(), Some("1996"));
        assert_eq!(Discretization::None.apply("t3"), None);
    }

    #[test]
    fn reciprocal_augmentation() {
        let mut b = DatasetBundle::default();
        b.vocab.predicates = Labels::from_labels(vec!["p".into()]).unwrap();
        let empty = augment_reciprocal(b.clone()).unwrap();
        assert!(empty.train.is_empty() && empty.augmented);

        b.train = vec![IntervalFact::point(0, 0, 1, 0)];
        let a = augment_reciprocal(b).unwrap();
        assert_eq!(a.train, vec![IntervalFact::point(0, 0, 1, 0), IntervalFact::point(1, 1, 0, 0)]);
        assert!(augment_reciprocal(a).is_err());
    }

    #[test]
    fn yago_unfolding() {
        let dir = tempfile::tempdir().unwrap();
        write_split(
            dir.path(),
            "train",
            &["a\tp\tb\t1990\toccursSince", "a\tp\tb\t1995\toccursUntil", "a\tq\tc\t\t"],
        );
        let b = load_dataset(dir.path(), Format::Yago, Discretization::Year).unwrap();
        assert_eq!(b.num_base_predicates(), 2);
        let u = unfold_yago_modes(b.clone()).unwrap();
        assert_eq!(u.num_base_predicates(), 4);
        assert_ne!(u.train[0].p, u.train[1].p);
        assert_eq!(u.train[0].tag, Some(TimeTag::Since));
        assert_eq!(fold_yago_modes(u.clone()).unwrap(), b);

        let aug = augment_reciprocal(u).unwrap();
        assert_eq!(aug.model_shape(1).predicates, 8);
        assert!(unfold_yago_modes(aug).is_err());

        let mut untagged = b;
        untagged.train[0].tag = None;
        assert!(unfold_yago_modes(untagged).is_err());
    }

    #[test]
    fn missing_directory_is_io_error() {
        let err = load_quadruples(Path::new("/nonexistent/dataset"), Discretization::None).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}

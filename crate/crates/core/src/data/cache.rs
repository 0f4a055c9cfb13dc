//! On-disk bundle cache.
//!
//! Layout of a cache directory:
//!
//! ```text
//! meta.json                          format version, flags, sizes
//! entities.txt predicates.txt timestamps.txt   one label per line
//! train.bin valid.bin test.bin       fact arrays
//! ```
//!
//! Fact arrays start with the 8-byte magic `TKBFACTS`, a little-endian `u64`
//! format version and a `u64` record count, followed by records of six
//! little-endian `i64`: `s, p, o, begin, end, tag` (`-1` for absent bounds and
//! tags, `0` since, `1` until).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetBundle, IntervalFact, Labels, Split, TimeTag, Vocabulary};
use crate::error::{Error, Result};

pub const CACHE_FORMAT_VERSION: u64 = 1;
const MAGIC: &[u8; 8] = b"TKBFACTS";
const FIELDS: usize = 6;

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    format_version: u64,
    augmented: bool,
    yago_unfolded: bool,
    entities: usize,
    predicates: usize,
    timestamps: usize,
    train: usize,
    valid: usize,
    test: usize,
}

fn write_labels(path: &Path, labels: &Labels) -> Result<()> {
    let mut text = String::new();
    for l in labels.labels() {
        if l.contains('\n') {
            return Err(Error::Dataset(format!("label {l:?} contains a newline")));
        }
        text.push_str(l);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_labels(path: &Path, expected: usize) -> Result<Labels> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let labels: Vec<String> = text.lines().map(str::to_string).collect();
    if labels.len() != expected {
        return Err(Error::Dataset(format!("{}: expected {expected} labels, found {}", path.display(), labels.len())));
    }
    Labels::from_labels(labels)
}

fn encode_opt(x: Option<usize>) -> i64 {
    x.map_or(-1, |v| v as i64)
}

fn decode_opt(x: i64) -> Option<usize> {
    (x >= 0).then_some(x as usize)
}

fn write_facts(path: &Path, facts: &[IntervalFact]) -> Result<()> {
    let mut buf = Vec::with_capacity(24 + facts.len() * FIELDS * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CACHE_FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(facts.len() as u64).to_le_bytes());
    for f in facts {
        let tag = match f.tag {
            None => -1i64,
            Some(TimeTag::Since) => 0,
            Some(TimeTag::Until) => 1,
        };
        for v in [f.s as i64, f.p as i64, f.o as i64, encode_opt(f.begin), encode_opt(f.end), tag] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn read_facts(path: &Path) -> Result<Vec<IntervalFact>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |msg: &str| Error::Dataset(format!("{}: {msg}", path.display()));
    if bytes.len() < 24 || &bytes[..8] != MAGIC {
        return Err(corrupt("not a fact array"));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
    let version = word(8);
    if version != CACHE_FORMAT_VERSION {
        return Err(corrupt(&format!("unsupported format version {version}")));
    }
    let count = word(16) as usize;
    let body = &bytes[24..];
    if body.len() != count * FIELDS * 8 {
        return Err(corrupt(&format!("expected {count} records, file has {} bytes of data", body.len())));
    }
    body.chunks_exact(FIELDS * 8)
        .map(|rec| {
            let v: Vec<i64> =
                rec.chunks_exact(8).map(|b| i64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
            if v[..3].iter().any(|&x| x < 0) {
                return Err(corrupt("negative index"));
            }
            let tag = match v[5] {
                -1 => None,
                0 => Some(TimeTag::Since),
                1 => Some(TimeTag::Until),
                other => return Err(corrupt(&format!("invalid tag {other}"))),
            };
            Ok(IntervalFact {
                s: v[0] as usize,
                p: v[1] as usize,
                o: v[2] as usize,
                begin: decode_opt(v[3]),
                end: decode_opt(v[4]),
                tag,
            })
        })
        .collect()
}

/// Writes `bundle` into `dir`, creating it if needed. Output is deterministic.
pub fn write_bundle(bundle: &DatasetBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = Meta {
        format_version: CACHE_FORMAT_VERSION,
        augmented: bundle.augmented,
        yago_unfolded: bundle.yago_unfolded,
        entities: bundle.num_entities(),
        predicates: bundle.num_base_predicates(),
        timestamps: bundle.num_timestamps(),
        train: bundle.train.len(),
        valid: bundle.valid.len(),
        test: bundle.test.len(),
    };
    let meta_path = dir.join("meta.json");
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)? + "\n").map_err(|e| Error::io(&meta_path, e))?;
    write_labels(&dir.join("entities.txt"), &bundle.vocab.entities)?;
    write_labels(&dir.join("predicates.txt"), &bundle.vocab.predicates)?;
    write_labels(&dir.join("timestamps.txt"), &bundle.vocab.timestamps)?;
    for split in Split::ALL {
        write_facts(&dir.join(format!("{}.bin", split.name())), bundle.split(split))?;
    }
    Ok(())
}

pub fn read_bundle(dir: &Path) -> Result<DatasetBundle> {
    let meta_path = dir.join("meta.json");
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: Meta = serde_json::from_str(&text)?;
    if meta.format_version != CACHE_FORMAT_VERSION {
        return Err(Error::Dataset(format!("unsupported cache format version {}", meta.format_version)));
    }
    let vocab = Vocabulary {
        entities: read_labels(&dir.join("entities.txt"), meta.entities)?,
        predicates: read_labels(&dir.join("predicates.txt"), meta.predicates)?,
        timestamps: read_labels(&dir.join("timestamps.txt"), meta.timestamps)?,
    };
    let bundle = DatasetBundle {
        vocab,
        train: read_facts(&dir.join("train.bin"))?,
        valid: read_facts(&dir.join("valid.bin"))?,
        test: read_facts(&dir.join("test.bin"))?,
        augmented: meta.augmented,
        yago_unfolded: meta.yago_unfolded,
    };
    if (bundle.train.len(), bundle.valid.len(), bundle.test.len()) != (meta.train, meta.valid, meta.test) {
        return Err(Error::Dataset("split sizes disagree with meta.json".into()));
    }
    bundle.validate()?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_fact(ne: usize, np: usize, nt: usize) -> impl Strategy<Value = IntervalFact> {
        (0..ne, 0..np, 0..ne, proptest::option::of(0..nt), proptest::option::of(0..nt), 0..3u8).prop_map(
            |(s, p, o, a, b, tag)| {
                let (begin, end) = match (a, b) {
                    (Some(x), Some(y)) => (Some(x.min(y)), Some(x.max(y))),
                    other => other,
                };
                let tag = [None, Some(TimeTag::Since), Some(TimeTag::Until)][tag as usize];
                IntervalFact { s, p, o, begin, end, tag }
            },
        )
    }

    fn bundle_strategy() -> impl Strategy<Value = DatasetBundle> {
        let facts = || proptest::collection::vec(arb_fact(5, 3, 4), 0..20);
        (facts(), facts(), facts(), any::<bool>()).prop_map(|(train, valid, test, yago)| DatasetBundle {
            vocab: Vocabulary {
                entities: Labels::from_labels((0..5).map(|i| format!("entity {i}")).collect()).unwrap(),
                predicates: Labels::from_labels((0..3).map(|i| format!("P{i}")).collect()).unwrap(),
                timestamps: Labels::from_labels((2000..2004).map(|y: i32| y.to_string()).collect()).unwrap(),
            },
            train,
            valid,
            test,
            augmented: false,
            yago_unfolded: yago,
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn cache_roundtrip_is_identity(bundle in bundle_strategy()) {
            let dir = tempfile::tempdir().unwrap();
            write_bundle(&bundle, dir.path()).unwrap();
            prop_assert_eq!(read_bundle(dir.path()).unwrap(), bundle);
        }
    }

    #[test]
    fn truncated_array_detected() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = DatasetBundle::default();
        b.vocab.entities = Labels::from_labels(vec!["a".into(), "b".into()]).unwrap();
        b.vocab.predicates = Labels::from_labels(vec!["p".into()]).unwrap();
        b.vocab.timestamps = Labels::from_labels(vec!["1".into()]).unwrap();
        b.train = vec![IntervalFact::point(0, 0, 1, 0)];
        write_bundle(&b, dir.path()).unwrap();
        let path = dir.path().join("train.bin");
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_bundle(dir.path()), Err(Error::Dataset(_))));
    }
}

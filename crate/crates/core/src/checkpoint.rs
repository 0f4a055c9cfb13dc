//! Checkpoint files.
//!
//! A checkpoint is one line of JSON followed by raw little-endian `f64`
//! arrays. The header names the model kind, rank, the row count of every
//! table and whether optimizer state follows; it determines the exact byte
//! length of the body, so truncated or padded files are rejected.
//!
//! Tables are written in the order U, V, Vt (TNTComplEx), T (temporal
//! models), each row as `re0, im0, re1, im1, ...`. When optimizer state is
//! present, the Adagrad accumulators follow in the same order and layout.

use std::fs;
use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EmbeddingTable, ModelKind, ModelParams};
use crate::training::AdagradState;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub kind: ModelKind,
    pub rank: usize,
    pub entities: usize,
    pub predicates: usize,
    /// Zero for ComplEx.
    pub timestamps: usize,
    /// Completed training epochs.
    pub epoch: usize,
    pub seed: u64,
    pub has_optimizer_state: bool,
}

impl CheckpointHeader {
    fn table_rows(&self) -> Vec<usize> {
        let mut rows = vec![self.entities, self.predicates];
        if self.kind.has_temporal_predicates() {
            rows.push(self.predicates);
        }
        if self.kind.is_temporal() {
            rows.push(self.timestamps);
        }
        rows
    }

    /// Number of `f64` values in the body.
    pub fn body_len(&self) -> usize {
        let per_copy: usize = self.table_rows().iter().map(|r| r * self.rank * 2).sum();
        if self.has_optimizer_state { 2 * per_copy } else { per_copy }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: ModelParams<f64>,
    pub optimizer: Option<AdagradState<f64>>,
}

impl Checkpoint {
    pub fn new(params: ModelParams<f64>, optimizer: Option<AdagradState<f64>>, epoch: usize, seed: u64) -> Self {
        let shape = params.shape();
        let header = CheckpointHeader {
            format_version: CHECKPOINT_FORMAT_VERSION,
            kind: params.kind(),
            rank: shape.rank,
            entities: shape.entities,
            predicates: shape.predicates,
            timestamps: shape.timestamps,
            epoch,
            seed,
            has_optimizer_state: optimizer.is_some(),
        };
        Self { header, params, optimizer }
    }
}

fn push_table(buf: &mut Vec<u8>, table: &EmbeddingTable<f64>) {
    for z in table.as_slice() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
}

pub fn to_bytes(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    if let Some(state) = &ckpt.optimizer {
        if !state.matches(&ckpt.params) {
            return Err(Error::Checkpoint("optimizer state does not match parameter shapes".into()));
        }
    }
    let mut buf = serde_json::to_vec(&ckpt.header)?;
    buf.push(b'\n');
    buf.reserve(ckpt.header.body_len() * 8);
    for table in ckpt.params.tables() {
        push_table(&mut buf, table);
    }
    if let Some(state) = &ckpt.optimizer {
        for table in state.tables() {
            push_table(&mut buf, table);
        }
    }
    Ok(buf)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| Error::Checkpoint(format!("unreadable header: {e}")))?;
    if header.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {}", header.format_version)));
    }
    let body = &bytes[newline + 1..];
    let expected = header.body_len() * 8;
    if body.len() != expected {
        return Err(Error::Checkpoint(format!(
            "body is {} bytes, header requires {expected} (truncated or corrupt file)",
            body.len()
        )));
    }
    let mut values = body.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")));
    let mut read_tables = || -> Result<Vec<EmbeddingTable<f64>>> {
        header
            .table_rows()
            .into_iter()
            .map(|rows| {
                let data = (0..rows * header.rank)
                    .map(|_| {
                        let re = values.next().expect("length checked");
                        let im = values.next().expect("length checked");
                        Complex::new(re, im)
                    })
                    .collect();
                EmbeddingTable::from_data(rows, header.rank, data)
            })
            .collect()
    };
    let mut tables = read_tables()?.into_iter();
    let entities = tables.next().expect("U");
    let predicates = tables.next().expect("V");
    let temporal_predicates = if header.kind.has_temporal_predicates() { tables.next() } else { None };
    let timestamps = if header.kind.is_temporal() { tables.next() } else { None };
    let params = ModelParams::from_tables(header.kind, entities, predicates, temporal_predicates, timestamps)?;
    let optimizer = if header.has_optimizer_state { Some(AdagradState::from_tables(read_tables()?)) } else { None };
    Ok(Checkpoint { header, params, optimizer })
}

pub fn save(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let bytes = to_bytes(ckpt)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes).map_err(|e| match e {
        Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
        other => other,
    })
}

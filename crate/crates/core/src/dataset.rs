//! Corpus ingestion, the stratified 8:2 split, and batch preprocessing.
//!
//! Corpora are JSON Lines, one labeled contract per line. The split is
//! stratified per label with a largest-remainder allocation of test seats,
//! so both the overall 8:2 ratio (train size = round of 80%) and per-class
//! proportions hold as tightly as integer counts allow. Preprocessing runs
//! records in parallel but reports results in input order; records that
//! cannot become graphs land in a skip report instead of disappearing.

use crate::disasm::{parse_hex, split_sections, DisasmError, Origin};
use crate::cfg::build_cfg;
use crate::encode::{encode, EncodedGraph};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;
use thiserror::Error;

/// One labeled contract from a corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    #[serde(rename = "bytecode")]
    pub bytecode_hex: String,
    pub label: u8,
    #[serde(default)]
    pub origin: Origin,
}

/// Train/test membership by record id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
    pub ratio: (u8, u8),
}

/// A record successfully turned into a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessedGraph {
    pub id: String,
    pub graph: EncodedGraph,
}

/// A record that could not be preprocessed, and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("dataset is empty")]
    EmptyDataset,
}

/// Load a JSONL corpus, validating labels, hex, and id uniqueness.
/// Blank lines are ignored; anything else malformed reports its line number.
pub fn load_corpus(path: &Path) -> Result<Vec<DatasetRecord>, DatasetError> {
    let text = fs::read_to_string(path)?;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| DatasetError::MalformedRecord {
            line: line_no,
            reason,
        };
        let record: DatasetRecord =
            serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        if record.label > 1 {
            return Err(malformed(format!("label {} is not 0 or 1", record.label)));
        }
        match parse_hex(&record.bytecode_hex, record.origin) {
            Ok(_) | Err(DisasmError::Empty) => {}
            Err(e) => return Err(malformed(format!("bad bytecode hex: {e}"))),
        }
        if !seen.insert(record.id.clone()) {
            return Err(malformed(format!("duplicate id {:?}", record.id)));
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    Ok(records)
}

/// Stratified 8:2 split. The train size is 80% of the corpus rounded to
/// the nearest record; test seats are dealt to classes by largest
/// remainder so each class stays within one record of its own 8:2 split.
/// Deterministic per seed.
pub fn split(records: &[DatasetRecord], seed: u64) -> Result<SplitDataset, DatasetError> {
    if records.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let n = records.len();
    let train_total = (8 * n + 5) / 10;
    let test_total = n - train_total;

    let mut by_label: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_label.entry(r.label).or_default().push(i);
    }

    // Integer largest-remainder quota of test seats per class.
    let mut quotas: Vec<(u8, usize, usize)> = by_label
        .iter()
        .map(|(&label, members)| {
            let scaled = test_total * members.len();
            (label, scaled / n, scaled % n)
        })
        .collect();
    let mut leftover = test_total - quotas.iter().map(|q| q.1).sum::<usize>();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].2.cmp(&quotas[a].2).then(quotas[a].0.cmp(&quotas[b].0)));
    for &k in &order {
        if leftover == 0 {
            break;
        }
        quotas[k].1 += 1;
        leftover -= 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_indices = HashSet::new();
    for ((label, quota, _), members) in quotas.iter().zip(by_label.values()) {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        test_indices.extend(shuffled.into_iter().take(*quota));
        if test_total > 0 && *quota == 0 {
            log::warn!("label {label} has no test representatives ({} records)", members.len());
        }
        if *quota == members.len() && !members.is_empty() {
            log::warn!("label {label} has no train representatives ({} records)", members.len());
        }
    }

    let mut train = Vec::with_capacity(train_total);
    let mut test = Vec::with_capacity(test_total);
    for (i, r) in records.iter().enumerate() {
        if test_indices.contains(&i) {
            test.push(r.id.clone());
        } else {
            train.push(r.id.clone());
        }
    }
    Ok(SplitDataset {
        train,
        test,
        seed,
        ratio: (8, 2),
    })
}

/// Run every record through parse → section split → CFG → encoding, in
/// parallel, keeping input order. Failures become skip entries; exactly
/// one graph or one skip exists per record.
pub fn preprocess(
    records: &[DatasetRecord],
    max_nodes: usize,
) -> (Vec<PreprocessedGraph>, Vec<SkipEntry>) {
    let outcomes: Vec<Result<PreprocessedGraph, SkipEntry>> = records
        .par_iter()
        .map(|record| {
            let skip = |reason: String| SkipEntry {
                id: record.id.clone(),
                reason,
            };
            let code = parse_hex(&record.bytecode_hex, record.origin)
                .map_err(|e| skip(e.to_string()))?;
            let sections = split_sections(&code).map_err(|e| skip(e.to_string()))?;
            let cfg = build_cfg(&sections.runtime);
            let graph = encode(&cfg, max_nodes, Some(record.label), false)
                .map_err(|e| skip(e.to_string()))?;
            Ok(PreprocessedGraph {
                id: record.id.clone(),
                graph,
            })
        })
        .collect();

    let mut graphs = Vec::new();
    let mut skips = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(g) => graphs.push(g),
            Err(s) => skips.push(s),
        }
    }
    (graphs, skips)
}

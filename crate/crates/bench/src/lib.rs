//! Deterministic fixtures shared by the pipeline benchmarks.

use evmcfg_core::{generate_corpus, parse_hex, preprocess, split_sections, EncodedGraph};

/// Encoded graphs from a synthetic corpus, every record kept.
pub fn corpus_graphs(count: usize, max_nodes: usize) -> Vec<EncodedGraph> {
    let records = generate_corpus(count, 7);
    let (graphs, skips) = preprocess(&records, max_nodes);
    assert!(skips.is_empty(), "bench fixtures must all preprocess");
    graphs.into_iter().map(|g| g.graph).collect()
}

/// A long instruction stream built by concatenating synthetic runtimes
/// until `target_len` bytes are reached.
pub fn long_runtime(target_len: usize) -> Vec<u8> {
    let records = generate_corpus(64, 11);
    let mut code = Vec::new();
    while code.len() < target_len {
        for record in &records {
            let bytes = parse_hex(&record.bytecode_hex, record.origin).unwrap();
            let sections = split_sections(&bytes).unwrap();
            code.extend_from_slice(&sections.runtime);
            if code.len() >= target_len {
                break;
            }
        }
    }
    code.truncate(target_len);
    code
}

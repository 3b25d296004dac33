//! Control-flow graph recovery and GCN-based vulnerability classification
//! for EVM smart-contract bytecode.
//!
//! The pipeline runs disassembly ([`disasm`]), basic-block and edge
//! construction ([`cfg`]), adjacency normalization and feature encoding
//! ([`encode`]), a from-scratch graph convolutional network ([`gcn`]),
//! and confusion-matrix evaluation ([`metrics`]). [`dataset`] handles
//! corpus ingestion, the stratified 8:2 split, and batch preprocessing;
//! [`synth`] generates labeled test corpora with exact ground truth.

pub mod cfg;
pub mod dataset;
pub mod disasm;
pub mod encode;
pub mod gcn;
pub mod matrix;
pub mod metrics;
pub mod opcode;
pub mod synth;

pub use cfg::{
    add_sequential_edges, build_cfg, partition_blocks, reachable_blocks, resolve_jump_targets,
    to_dot, BasicBlock, Cfg, CfgEdge, EdgeKind, Terminator, UnresolvedJump, UnresolvedReason,
};
pub use dataset::{
    load_corpus, preprocess, split, DatasetError, DatasetRecord, PreprocessedGraph, SkipEntry,
    SplitDataset,
};
pub use disasm::{
    disassemble, format_instruction, hex_string, parse_hex, reassemble, split_sections, Bytecode,
    ContractSections, DisasmError, Instruction, Origin,
};
pub use encode::{adjacency_from_cfg, encode, normalize, AdjacencyMatrix, EncodeError, EncodedGraph};
pub use gcn::{
    backward, bce_from_logit, forward, predict, train, AdamState, ForwardTrace, GcnError,
    GcnModel, Gradients, ModelConfig, TrainConfig,
};
pub use matrix::Matrix;
pub use metrics::{confusion, metrics, ConfusionCounts, EvalReport, MetricFlag, MetricsReport};
pub use opcode::{opcode_info, Category, Opcode, OpcodeInfo};
pub use synth::{generate_corpus, has_reachable_timestamp};

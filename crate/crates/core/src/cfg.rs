//! Basic-block partitioning and control-flow graph construction.
//!
//! Blocks follow the usual leader/terminator rules: a leader is the first
//! instruction, any JUMPDEST, or the instruction after a jump/branch/halt;
//! a block runs from its leader up to and including the next terminator.
//! Edges come in two kinds. JumpTaken edges are resolved only for the
//! direct pattern where a PUSH constant immediately precedes the JUMP or
//! JUMPI in the same block; anything needing stack emulation is recorded as
//! unresolved rather than guessed at. FallThrough edges connect a block
//! whose end can reach the next instruction (JUMPI or a plain boundary) to
//! its address-order successor.

use crate::disasm::{disassemble, Instruction};
use crate::opcode::Opcode;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

/// How a basic block ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminator {
    /// Unconditional JUMP.
    Jump,
    /// JUMPI: taken edge plus fall-through.
    CondJump,
    /// Execution stops: STOP, RETURN, REVERT, SELFDESTRUCT, INVALID, or an
    /// undefined byte.
    Halt,
    /// The next instruction is a leader (or the stream ended); control falls
    /// through.
    FallThrough,
}

/// A maximal straight-line run of instructions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlock {
    pub id: usize,
    pub start_offset: usize,
    pub instructions: Vec<Instruction>,
    pub terminator: Terminator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    JumpTaken,
    FallThrough,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CfgEdge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
}

/// Why a jump's target could not be resolved statically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnresolvedReason {
    /// No PUSH constant immediately precedes the jump in its block.
    NoPrecedingPush,
    /// The constant lands in code but not on a block starting with JUMPDEST.
    TargetNotJumpdest,
    /// The constant points past the end of the code.
    TargetOutOfRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnresolvedJump {
    pub block: usize,
    pub reason: UnresolvedReason,
}

/// The control-flow graph: blocks in address order plus typed edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Cfg {
    pub blocks: Vec<BasicBlock>,
    pub edges: Vec<CfgEdge>,
    pub unresolved_jumps: Vec<UnresolvedJump>,
}

/// Terminator kind implied by an opcode, if it ends a block.
fn terminator_for(op: Opcode) -> Option<Terminator> {
    match op {
        Opcode::Jump => Some(Terminator::Jump),
        Opcode::Jumpi => Some(Terminator::CondJump),
        Opcode::Stop
        | Opcode::Return
        | Opcode::Revert
        | Opcode::Selfdestruct
        | Opcode::Invalid
        | Opcode::Unknown(_) => Some(Terminator::Halt),
        _ => None,
    }
}

/// Split an instruction stream into basic blocks with dense address-order ids.
pub fn partition_blocks(instrs: &[Instruction]) -> Vec<BasicBlock> {
    let leaders: BTreeSet<usize> = {
        let mut set = BTreeSet::new();
        let mut after_terminator = true;
        for instr in instrs {
            if after_terminator || instr.opcode == Opcode::Jumpdest {
                set.insert(instr.offset);
            }
            after_terminator = terminator_for(instr.opcode).is_some();
        }
        set
    };

    let mut blocks: Vec<BasicBlock> = Vec::new();
    let mut current: Vec<Instruction> = Vec::new();
    let flush = |current: &mut Vec<Instruction>, terminator, blocks: &mut Vec<BasicBlock>| {
        if current.is_empty() {
            return;
        }
        blocks.push(BasicBlock {
            id: blocks.len(),
            start_offset: current[0].offset,
            instructions: std::mem::take(current),
            terminator,
        });
    };

    for instr in instrs {
        if !current.is_empty() && leaders.contains(&instr.offset) {
            flush(&mut current, Terminator::FallThrough, &mut blocks);
        }
        let terminator = terminator_for(instr.opcode);
        current.push(instr.clone());
        if let Some(t) = terminator {
            flush(&mut current, t, &mut blocks);
        }
    }
    flush(&mut current, Terminator::FallThrough, &mut blocks);
    blocks
}

/// Target constant of a PUSH, if it is intact and fits an address.
fn push_target(instr: &Instruction) -> Result<usize, UnresolvedReason> {
    let imm = instr
        .immediate
        .as_deref()
        .filter(|_| !instr.is_truncated())
        .ok_or(UnresolvedReason::NoPrecedingPush)?;
    let significant = imm.iter().skip_while(|&&b| b == 0).count();
    if significant > std::mem::size_of::<usize>() {
        return Err(UnresolvedReason::TargetOutOfRange);
    }
    Ok(imm.iter().fold(0usize, |acc, &b| acc << 8 | b as usize))
}

/// Resolve direct jump targets into JumpTaken edges; everything else lands
/// in the unresolved list with a reason. No speculative edges.
pub fn resolve_jump_targets(blocks: &[BasicBlock]) -> (Vec<CfgEdge>, Vec<UnresolvedJump>) {
    let code_end = blocks.last().map_or(0, |b| {
        b.start_offset
            + b.instructions
                .iter()
                .map(Instruction::encoded_len)
                .sum::<usize>()
    });

    let mut edges = Vec::new();
    let mut unresolved = Vec::new();
    for block in blocks {
        if !matches!(block.terminator, Terminator::Jump | Terminator::CondJump) {
            continue;
        }
        let n = block.instructions.len();
        let resolution = if n < 2 || !block.instructions[n - 2].opcode.is_push() {
            Err(UnresolvedReason::NoPrecedingPush)
        } else {
            push_target(&block.instructions[n - 2]).and_then(|target| {
                if target >= code_end {
                    return Err(UnresolvedReason::TargetOutOfRange);
                }
                blocks
                    .iter()
                    .find(|b| b.start_offset == target)
                    .filter(|b| b.instructions[0].opcode == Opcode::Jumpdest)
                    .map(|b| b.id)
                    .ok_or(UnresolvedReason::TargetNotJumpdest)
            })
        };
        match resolution {
            Ok(dst) => edges.push(CfgEdge {
                src: block.id,
                dst,
                kind: EdgeKind::JumpTaken,
            }),
            Err(reason) => unresolved.push(UnresolvedJump {
                block: block.id,
                reason,
            }),
        }
    }
    (edges, unresolved)
}

/// Add FallThrough edges from every block whose end can reach the next
/// instruction (JUMPI or plain boundary) to its address-order successor.
pub fn add_sequential_edges(blocks: &[BasicBlock], mut edges: Vec<CfgEdge>) -> Vec<CfgEdge> {
    for pair in blocks.windows(2) {
        if matches!(
            pair[0].terminator,
            Terminator::CondJump | Terminator::FallThrough
        ) {
            edges.push(CfgEdge {
                src: pair[0].id,
                dst: pair[1].id,
                kind: EdgeKind::FallThrough,
            });
        }
    }
    edges
}

/// Build the full CFG for a runtime code body.
pub fn build_cfg(runtime: &[u8]) -> Cfg {
    let instrs = disassemble(runtime);
    let blocks = partition_blocks(&instrs);
    let (edges, unresolved_jumps) = resolve_jump_targets(&blocks);
    let edges = add_sequential_edges(&blocks, edges);
    Cfg {
        blocks,
        edges,
        unresolved_jumps,
    }
}

/// Which blocks are reachable from block 0 along edges (block 0 included).
pub fn reachable_blocks(cfg: &Cfg) -> Vec<bool> {
    let mut seen = vec![false; cfg.blocks.len()];
    if cfg.blocks.is_empty() {
        return seen;
    }
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(node) = queue.pop_front() {
        for edge in cfg.edges.iter().filter(|e| e.src == node) {
            if !seen[edge.dst] {
                seen[edge.dst] = true;
                queue.push_back(edge.dst);
            }
        }
    }
    seen
}

/// Render the graph in DOT: solid edges for JumpTaken, dashed for
/// FallThrough, one comment line per unresolved jump.
pub fn to_dot(cfg: &Cfg) -> String {
    let mut out = String::from("digraph cfg {\n  node [shape=box, fontname=\"monospace\"];\n");
    for u in &cfg.unresolved_jumps {
        let _ = writeln!(out, "  // unresolved: B{} {:?}", u.block, u.reason);
    }
    for block in &cfg.blocks {
        let mut label = format!("B{}@{:04x}", block.id, block.start_offset);
        for instr in &block.instructions {
            label.push_str("\\l");
            label.push_str(&instr.to_string());
        }
        label.push_str("\\l");
        let _ = writeln!(out, "  b{} [label=\"{}\"];", block.id, label);
    }
    for edge in &cfg.edges {
        let style = match edge.kind {
            EdgeKind::JumpTaken => "solid",
            EdgeKind::FallThrough => "dashed",
        };
        let _ = writeln!(out, "  b{} -> b{} [style={}];", edge.src, edge.dst, style);
    }
    out.push_str("}\n");
    out
}

#[derive(Serialize, Deserialize)]
struct BlockRepr {
    id: usize,
    start: usize,
    instructions: Vec<Instruction>,
}

#[derive(Serialize, Deserialize)]
struct CfgRepr {
    blocks: Vec<BlockRepr>,
    edges: Vec<CfgEdge>,
    unresolved: Vec<UnresolvedJump>,
}

impl Serialize for Cfg {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        CfgRepr {
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockRepr {
                    id: b.id,
                    start: b.start_offset,
                    instructions: b.instructions.clone(),
                })
                .collect(),
            edges: self.edges.clone(),
            unresolved: self.unresolved_jumps.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Cfg {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Cfg, D::Error> {
        let repr = CfgRepr::deserialize(deserializer)?;
        let block_count = repr.blocks.len();
        let mut blocks = Vec::with_capacity(block_count);
        for b in repr.blocks {
            let last = b
                .instructions
                .last()
                .ok_or_else(|| D::Error::custom(format!("block {} has no instructions", b.id)))?;
            blocks.push(BasicBlock {
                id: b.id,
                start_offset: b.start,
                terminator: terminator_for(last.opcode).unwrap_or(Terminator::FallThrough),
                instructions: b.instructions,
            });
        }
        for edge in &repr.edges {
            if edge.src >= block_count || edge.dst >= block_count {
                return Err(D::Error::custom(format!(
                    "edge {}->{} references a missing block",
                    edge.src, edge.dst
                )));
            }
        }
        Ok(Cfg {
            blocks,
            edges: repr.edges,
            unresolved_jumps: repr.unresolved,
        })
    }
}

//! Synthetic labeled contracts for end-to-end testing.
//!
//! A contract is vulnerable (label 1) exactly when a reachable basic block
//! executes TIMESTAMP. Vulnerable programs are chains interrupted by one to
//! three timestamp-guard motifs: TIMESTAMP, a comparison against a pushed
//! constant, and a JUMPI whose taken branch rejoins the chain at a merge
//! point. Benign programs are plain chains (jump-linked or falling
//! through) with no branching. Both classes carry structural noise: dead
//! blocks behind a halt (in benign contracts these may contain TIMESTAMP,
//! which must not flip the label), PUSH immediates that happen to equal
//! the TIMESTAMP byte, an optional metadata trailer, and an optional
//! deployment-code wrapper. The generator re-derives every label from the
//! finished bytes and asserts it matches the intent, so the corpus is its
//! own oracle.

use crate::cfg::{build_cfg, reachable_blocks};
use crate::dataset::DatasetRecord;
use crate::disasm::{split_sections, Bytecode, Origin};
use crate::opcode::Opcode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Assembly item for the two-pass mini assembler.
enum Item {
    /// A raw opcode byte with no immediate.
    Op(u8),
    Push1(u8),
    /// PUSH2 of a label's address, resolved in the second pass.
    Push2Label(usize),
    /// Label definition; emits the JUMPDEST it names.
    Label(usize),
}

fn item_len(item: &Item) -> usize {
    match item {
        Item::Op(_) | Item::Label(_) => 1,
        Item::Push1(_) => 2,
        Item::Push2Label(_) => 3,
    }
}

fn assemble(items: &[Item], label_count: usize) -> Vec<u8> {
    let mut addresses = vec![0usize; label_count];
    let mut pc = 0;
    for item in items {
        if let Item::Label(l) = item {
            addresses[*l] = pc;
        }
        pc += item_len(item);
    }
    let mut bytes = Vec::with_capacity(pc);
    for item in items {
        match item {
            Item::Op(b) => bytes.push(*b),
            Item::Push1(v) => bytes.extend([0x60, *v]),
            Item::Push2Label(l) => {
                let addr = addresses[*l];
                assert!(addr <= 0xFFFF, "label address {addr} exceeds PUSH2 range");
                bytes.extend([0x61, (addr >> 8) as u8, addr as u8]);
            }
            Item::Label(_) => bytes.push(0x5B),
        }
    }
    bytes
}

/// A few harmless straight-line instructions. Push immediates stay below
/// 0x80 except for the deliberate 0x42 decoy, so no generated byte can be
/// mistaken for a metadata trailer.
fn filler(rng: &mut ChaCha8Rng, items: &mut Vec<Item>) {
    for _ in 0..rng.random_range(0..=3) {
        items.push(match rng.random_range(0..6) {
            0 => Item::Op(0x01),                              // ADD
            1 => Item::Op(0x02),                              // MUL
            2 => Item::Op(0x80),                              // DUP1
            3 => Item::Op(0x90),                              // SWAP1
            4 => Item::Push1(0x42),                           // decoy immediate
            _ => Item::Push1(rng.random_range(0x00..0x80)),
        });
    }
}

/// Dead code behind the final halt: unreachable blocks, optionally hiding
/// a TIMESTAMP that a reachability-blind detector would trip over.
fn dead_blocks(rng: &mut ChaCha8Rng, items: &mut Vec<Item>, with_timestamp: bool) {
    for _ in 0..rng.random_range(0..=2) {
        if with_timestamp && rng.random_bool(0.7) {
            items.push(Item::Op(0x42)); // TIMESTAMP, unreachable
        }
        filler(rng, items);
        items.push(Item::Op(0x00)); // STOP
    }
}

/// A chain of blocks linked by explicit jumps or fall-throughs, no
/// branching anywhere.
fn benign_runtime(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let segments = rng.random_range(2..=8);
    let mut items = Vec::new();
    filler(rng, &mut items);
    for label in 0..segments - 1 {
        if rng.random_bool(0.5) {
            items.push(Item::Push2Label(label));
            items.push(Item::Op(0x56)); // JUMP
        }
        items.push(Item::Label(label));
        filler(rng, &mut items);
    }
    items.push(Item::Op(0x00)); // STOP
    dead_blocks(rng, &mut items, true);
    assemble(&items, segments - 1)
}

/// A chain interrupted by timestamp-guard motifs: each guard block ends in
/// TIMESTAMP / compare / JUMPI, the taken branch lives out of line and
/// jumps back to the merge point, and the fall-through continues the chain.
fn vulnerable_runtime(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let diamonds = rng.random_range(1..=3);
    // Labels: taken block of guard i is 2i, merge point of guard i is 2i+1.
    let mut items = Vec::new();
    filler(rng, &mut items);
    for i in 0..diamonds {
        items.push(Item::Op(0x42)); // TIMESTAMP, reachable
        items.push(Item::Push1(rng.random_range(0x00..0x80)));
        items.push(Item::Op([0x10, 0x11, 0x14][rng.random_range(0..3)])); // LT/GT/EQ
        items.push(Item::Push2Label(2 * i));
        items.push(Item::Op(0x57)); // JUMPI
        filler(rng, &mut items); // fall-through block (possibly empty)
        items.push(Item::Label(2 * i + 1)); // merge point
        filler(rng, &mut items);
    }
    items.push(Item::Op(0x00)); // STOP
    for i in 0..diamonds {
        items.push(Item::Label(2 * i)); // taken block
        filler(rng, &mut items);
        items.push(Item::Push2Label(2 * i + 1));
        items.push(Item::Op(0x56)); // JUMP back to the merge point
    }
    dead_blocks(rng, &mut items, false);
    assemble(&items, 2 * diamonds)
}

/// The classic fixed-size metadata trailer with a random hash payload.
fn metadata_trailer(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut t = vec![0xa1, 0x65, 0x62, 0x7a, 0x7a, 0x72, 0x30, 0x58, 0x20];
    t.extend((0..32).map(|_| rng.random::<u8>()));
    t.extend([0x00, 0x29]);
    t
}

/// Wrap a body in a constructor that copies it out and returns it.
fn wrap_in_deployment(body: &[u8]) -> Vec<u8> {
    let len = body.len();
    let src = 14usize;
    assert!(len <= 0xFFFF);
    let mut code = vec![
        0x61, (len >> 8) as u8, len as u8, // PUSH2 length
        0x80, // DUP1
        0x61, (src >> 8) as u8, src as u8, // PUSH2 offset
        0x60, 0x00, // PUSH1 0
        0x39, // CODECOPY
        0x60, 0x00, // PUSH1 0
        0xf3, // RETURN
        0xfe, // INVALID padding
    ];
    assert_eq!(code.len(), src);
    code.extend_from_slice(body);
    code
}

/// True when a reachable block contains a TIMESTAMP instruction: the
/// ground-truth labeling rule.
pub fn has_reachable_timestamp(runtime: &[u8]) -> bool {
    let cfg = build_cfg(runtime);
    let reachable = reachable_blocks(&cfg);
    cfg.blocks.iter().any(|b| {
        reachable[b.id]
            && b.instructions
                .iter()
                .any(|instr| instr.opcode == Opcode::Timestamp)
    })
}

fn hex_encode(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(2 + bytes.len() * 2);
    s.push_str("0x");
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Generate a balanced labeled corpus, deterministic per seed. Every
/// record's label is re-derived from its finished bytes and checked, and
/// sectioning is verified to recover the intended runtime exactly.
pub fn generate_corpus(count: usize, seed: u64) -> Vec<DatasetRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        let vulnerable = i % 2 == 0;
        let runtime = if vulnerable {
            vulnerable_runtime(&mut rng)
        } else {
            benign_runtime(&mut rng)
        };
        assert_eq!(
            has_reachable_timestamp(&runtime),
            vulnerable,
            "generated program contradicts its intended label"
        );

        let mut body = runtime.clone();
        if rng.random_bool(0.5) {
            body.extend(metadata_trailer(&mut rng));
        }
        let (bytes, origin) = if rng.random_bool(0.25) {
            (wrap_in_deployment(&body), Origin::CreationWithDeploy)
        } else {
            (body, Origin::RuntimeOnly)
        };

        let sections = split_sections(&Bytecode {
            bytes: bytes.clone(),
            origin,
        })
        .expect("generated contract must section cleanly");
        assert_eq!(sections.runtime, runtime, "sectioning must recover the runtime");

        records.push(DatasetRecord {
            id: format!("synth-{i:04}"),
            bytecode_hex: hex_encode(&bytes),
            label: u8::from(vulnerable),
            origin,
        });
    }
    records
}

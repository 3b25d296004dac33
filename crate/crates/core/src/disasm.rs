//! Hex parsing, contract sectioning, and linear-sweep disassembly.
//!
//! Compiled contract code concatenates three sections: deployment code (the
//! constructor, present only in creation transactions), runtime code (what
//! executes after deployment), and auxdata (trailing compiler metadata that
//! is data, not code). Only the runtime section is worth disassembling;
//! auxdata left in place shows up as garbage instructions and phantom
//! blocks, so [`split_sections`] peels both wrappers off first.

use crate::opcode::Opcode;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use thiserror::Error;

/// Where a blob of contract code came from, declared by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    /// Post-deployment code as fetched from chain state.
    #[serde(rename = "runtime")]
    RuntimeOnly,
    /// Creation-transaction payload: deployment code wrapping the runtime.
    #[serde(rename = "creation")]
    CreationWithDeploy,
}

impl Default for Origin {
    fn default() -> Origin {
        Origin::RuntimeOnly
    }
}

/// Raw contract bytes plus their declared origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bytecode {
    pub bytes: Vec<u8>,
    pub origin: Origin,
}

/// The three sections of a contract, concatenating back to the input exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractSections {
    pub deployment: Vec<u8>,
    pub runtime: Vec<u8>,
    pub auxdata: Vec<u8>,
}

/// One decoded instruction at a byte address within runtime code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub offset: usize,
    pub opcode: Opcode,
    /// Present iff the opcode is PUSH1..PUSH32; shorter than the push width
    /// only when the code ends mid-immediate.
    pub immediate: Option<Vec<u8>>,
}

impl Instruction {
    /// Bytes this instruction occupies in the code.
    pub fn encoded_len(&self) -> usize {
        1 + self.immediate.as_deref().map_or(0, <[u8]>::len)
    }

    /// True when a trailing PUSH ran past the end of the code and its
    /// immediate was cut short.
    pub fn is_truncated(&self) -> bool {
        self.immediate.as_deref().map_or(0, <[u8]>::len) < self.opcode.immediate_width()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DisasmError {
    #[error("empty bytecode")]
    Empty,
    #[error("odd number of hex digits ({digits})")]
    OddLength { digits: usize },
    #[error("non-hex character {found:?} at digit position {position}")]
    NonHexCharacter { found: char, position: usize },
    #[error("sectioning would leave no runtime code")]
    EmptyRuntime,
}

/// Decode a hex string into bytecode. A leading `0x` and any whitespace are
/// ignored; `position` in errors indexes the remaining hex digits.
pub fn parse_hex(text: &str, origin: Origin) -> Result<Bytecode, DisasmError> {
    let trimmed = text.trim();
    let stripped = trimmed
        .strip_prefix("0x")
        .or_else(|| trimmed.strip_prefix("0X"))
        .unwrap_or(trimmed);

    let mut bytes = Vec::with_capacity(stripped.len() / 2);
    let mut pending: Option<u8> = None;
    let mut digits = 0usize;
    for ch in stripped.chars() {
        if ch.is_whitespace() {
            continue;
        }
        let nibble = ch.to_digit(16).ok_or(DisasmError::NonHexCharacter {
            found: ch,
            position: digits,
        })? as u8;
        digits += 1;
        pending = match pending {
            None => Some(nibble),
            Some(high) => {
                bytes.push(high << 4 | nibble);
                None
            }
        };
    }
    if pending.is_some() {
        return Err(DisasmError::OddLength { digits });
    }
    if bytes.is_empty() {
        return Err(DisasmError::Empty);
    }
    Ok(Bytecode { bytes, origin })
}

/// Split contract code into deployment, runtime, and auxdata.
///
/// For creation code the deployment prefix ends where the constructor's
/// CODECOPY/RETURN epilogue says the runtime starts; when that pattern does
/// not resolve statically the whole input is treated as runtime (with a
/// warning). Auxdata is recognized by the trailing CBOR-metadata convention
/// (the final two bytes give the metadata length), falling back to the
/// classic fixed 43-byte trailer when the tail is clearly not code.
pub fn split_sections(code: &Bytecode) -> Result<ContractSections, DisasmError> {
    if code.bytes.is_empty() {
        return Err(DisasmError::Empty);
    }

    let runtime_start = match code.origin {
        Origin::RuntimeOnly => 0,
        Origin::CreationWithDeploy => match find_runtime_start(&code.bytes) {
            Some(start) => start,
            None => {
                log::warn!("no CODECOPY/RETURN deployment epilogue found; treating whole input as runtime");
                0
            }
        },
    };

    let body = &code.bytes[runtime_start..];
    let aux_len = auxdata_length(body);
    if aux_len >= body.len() {
        return Err(DisasmError::EmptyRuntime);
    }

    Ok(ContractSections {
        deployment: code.bytes[..runtime_start].to_vec(),
        runtime: body[..body.len() - aux_len].to_vec(),
        auxdata: body[body.len() - aux_len..].to_vec(),
    })
}

/// Locate the runtime offset a constructor copies out, by finding the first
/// CODECOPY whose three preceding PUSH constants (dest, src, len) describe a
/// sane in-bounds region and which a RETURN follows shortly after.
fn find_runtime_start(creation: &[u8]) -> Option<usize> {
    let instrs = disassemble(creation);
    for (idx, instr) in instrs.iter().enumerate() {
        if instr.opcode != Opcode::Codecopy {
            continue;
        }
        // Walk back over the epilogue's stack shuffling, taking the last
        // three pushed constants. In push order they are len, src, dest.
        let mut constants = Vec::with_capacity(3);
        for prev in instrs[..idx].iter().rev().take(6) {
            match prev.opcode.category() {
                crate::opcode::Category::Push => {
                    if let Some(value) = push_constant(prev) {
                        constants.push(value);
                        if constants.len() == 3 {
                            break;
                        }
                    } else {
                        break;
                    }
                }
                crate::opcode::Category::Dup | crate::opcode::Category::Swap => continue,
                _ => break,
            }
        }
        if constants.len() < 3 {
            continue;
        }
        let (dest, src, len) = (constants[0], constants[1], constants[2]);
        let returns_soon = instrs[idx + 1..]
            .iter()
            .take(4)
            .any(|i| i.opcode == Opcode::Return);
        if dest == 0
            && src > 0
            && len > 0
            && src.checked_add(len).is_some_and(|end| end <= creation.len())
            && returns_soon
        {
            return Some(src);
        }
    }
    None
}

/// Immediate of a PUSH as usize, if it fits.
fn push_constant(instr: &Instruction) -> Option<usize> {
    let imm = instr.immediate.as_deref()?;
    if instr.is_truncated() || imm.len() > std::mem::size_of::<usize>() {
        return None;
    }
    Some(imm.iter().fold(0usize, |acc, &b| acc << 8 | b as usize))
}

/// Byte length of the trailing auxdata section (0 if none recognized).
fn auxdata_length(body: &[u8]) -> usize {
    // CBOR trailer: last two bytes are a big-endian payload length, and the
    // payload itself starts with a CBOR map (major type 5).
    if body.len() >= 3 {
        let n = body.len();
        let payload_len = u16::from_be_bytes([body[n - 2], body[n - 1]]) as usize;
        if payload_len >= 1 && payload_len + 2 <= n {
            let payload_start = n - 2 - payload_len;
            if body[payload_start] >> 5 == 5 {
                return payload_len + 2;
            }
        }
    }
    // Fixed-length trailer used by older compilers: exactly 43 bytes, taken
    // only when the tail cannot be instructions anyway.
    if body.len() > 43 && !tail_is_code(body, 43) {
        return 43;
    }
    0
}

/// Whether the last `tail_len` bytes look like code. The body is decoded
/// from offset 0 (cutting at an arbitrary tail boundary would split a PUSH
/// immediate and misread valid code); the tail is code when every
/// instruction overlapping it is defined and untruncated.
fn tail_is_code(body: &[u8], tail_len: usize) -> bool {
    let cut = body.len() - tail_len;
    disassemble(body)
        .iter()
        .filter(|i| i.offset + i.encoded_len() > cut)
        .all(|i| i.opcode.is_defined() && !i.is_truncated())
}

/// Linear-sweep disassembly. Total: undefined bytes become UNKNOWN
/// instructions and a PUSH running past the end keeps whatever immediate
/// bytes remain. The output tiles the input exactly.
pub fn disassemble(code: &[u8]) -> Vec<Instruction> {
    let mut instrs = Vec::new();
    let mut offset = 0;
    while offset < code.len() {
        let opcode = Opcode::from_byte(code[offset]);
        let width = opcode.immediate_width();
        let immediate = if width > 0 {
            let end = (offset + 1 + width).min(code.len());
            Some(code[offset + 1..end].to_vec())
        } else {
            None
        };
        let len = 1 + immediate.as_deref().map_or(0, <[u8]>::len);
        instrs.push(Instruction {
            offset,
            opcode,
            immediate,
        });
        offset += len;
    }
    instrs
}

/// Re-encode an instruction list back to bytes (inverse of [`disassemble`]).
pub fn reassemble(instrs: &[Instruction]) -> Vec<u8> {
    let mut bytes = Vec::new();
    for instr in instrs {
        bytes.push(instr.opcode.byte());
        if let Some(imm) = &instr.immediate {
            bytes.extend_from_slice(imm);
        }
    }
    bytes
}

/// One line of textual disassembly: `<offset-hex>: <MNEMONIC>[ 0x<immediate-hex>]`.
pub fn format_instruction(instr: &Instruction) -> String {
    let mut line = format!("{:04x}: {}", instr.offset, instr.opcode);
    if let Some(imm) = &instr.immediate {
        line.push_str(" 0x");
        for byte in imm {
            line.push_str(&format!("{byte:02x}"));
        }
    }
    if instr.is_truncated() {
        line.push_str(" (truncated)");
    }
    line
}

/// Lowercase hex with a 0x prefix, the inverse of [`parse_hex`].
pub fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(2 + bytes.len() * 2);
    s.push_str("0x");
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[derive(Serialize, Deserialize)]
struct InstructionRepr {
    offset: usize,
    opcode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    immediate: Option<String>,
}

impl Serialize for Instruction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        InstructionRepr {
            offset: self.offset,
            opcode: self.opcode.to_string(),
            immediate: self.immediate.as_deref().map(hex_string),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Instruction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Instruction, D::Error> {
        let repr = InstructionRepr::deserialize(deserializer)?;
        let opcode = opcode_from_mnemonic(&repr.opcode)
            .ok_or_else(|| D::Error::custom(format!("unknown mnemonic {:?}", repr.opcode)))?;
        let immediate = match repr.immediate {
            Some(text) => Some(
                parse_hex(&text, Origin::RuntimeOnly)
                    .map(|b| b.bytes)
                    .map_err(|e| D::Error::custom(format!("bad immediate: {e}")))?,
            ),
            None => None,
        };
        Ok(Instruction {
            offset: repr.offset,
            opcode,
            immediate,
        })
    }
}

/// Inverse of the display rendering, covering `UNKNOWN(0xXX)` forms.
fn opcode_from_mnemonic(name: &str) -> Option<Opcode> {
    if let Some(inner) = name
        .strip_prefix("UNKNOWN(0x")
        .and_then(|s| s.strip_suffix(')'))
    {
        return u8::from_str_radix(inner, 16).ok().map(Opcode::Unknown);
    }
    (0u8..=0xFF)
        .map(Opcode::from_byte)
        .find(|op| op.is_defined() && op.to_string() == name)
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_instruction(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn runtime(bytes: &[u8]) -> Bytecode {
        Bytecode {
            bytes: bytes.to_vec(),
            origin: Origin::RuntimeOnly,
        }
    }

    /// The classic fixed-size metadata trailer: a one-pair CBOR map whose
    /// value is a 32-byte hash, 43 bytes in all including the length suffix.
    fn classic_trailer() -> Vec<u8> {
        let mut t = vec![0xa1, 0x65, 0x62, 0x7a, 0x7a, 0x72, 0x30, 0x58, 0x20];
        t.extend(std::iter::repeat_n(0xAB, 32));
        t.extend([0x00, 0x29]);
        assert_eq!(t.len(), 43);
        t
    }

    #[test]
    fn parse_single_byte() {
        assert_eq!(parse_hex("0x00", Origin::RuntimeOnly).unwrap().bytes, [0x00]);
    }

    #[test]
    fn parse_plain_hex() {
        let b = parse_hex("6001600201", Origin::RuntimeOnly).unwrap();
        assert_eq!(b.bytes, [0x60, 0x01, 0x60, 0x02, 0x01]);
    }

    #[test]
    fn parse_rejects_odd_digit_count() {
        assert_eq!(
            parse_hex("0x6", Origin::RuntimeOnly).unwrap_err(),
            DisasmError::OddLength { digits: 1 }
        );
    }

    #[test]
    fn parse_reports_bad_character_position() {
        assert_eq!(
            parse_hex("60g1", Origin::RuntimeOnly).unwrap_err(),
            DisasmError::NonHexCharacter {
                found: 'g',
                position: 2
            }
        );
    }

    #[test]
    fn parse_ignores_whitespace_and_rejects_empty() {
        let b = parse_hex(" 0x60 01\n60 02 01 ", Origin::RuntimeOnly).unwrap();
        assert_eq!(b.bytes, [0x60, 0x01, 0x60, 0x02, 0x01]);
        assert_eq!(
            parse_hex("  0x ", Origin::RuntimeOnly).unwrap_err(),
            DisasmError::Empty
        );
    }

    #[test]
    fn short_runtime_code_has_no_trailer() {
        let code = runtime(&[0x60, 0x01, 0x60, 0x02, 0x01, 0x00, 0x00, 0x00, 0x00, 0x00]);
        let s = split_sections(&code).unwrap();
        assert!(s.deployment.is_empty());
        assert!(s.auxdata.is_empty());
        assert_eq!(s.runtime, code.bytes);
    }

    #[test]
    fn cbor_trailer_length_suffix_arithmetic() {
        let mut code = vec![0x60, 0x01, 0x60, 0x02, 0x01, 0x00];
        let mut payload = vec![0xa2];
        payload.extend(std::iter::repeat_n(0x11, 50));
        assert_eq!(payload.len(), 51);
        code.extend(&payload);
        code.extend([0x00, 0x33]);

        let s = split_sections(&runtime(&code)).unwrap();
        assert_eq!(s.auxdata.len(), 53);
        assert_eq!(s.runtime, [0x60, 0x01, 0x60, 0x02, 0x01, 0x00]);
        assert_eq!(
            [s.deployment.clone(), s.runtime.clone(), s.auxdata.clone()].concat(),
            code
        );
    }

    #[test]
    fn classic_43_byte_trailer_recognized() {
        let mut code = vec![0x60, 0x01, 0x56, 0x5B, 0x00];
        code.resize(157, 0x00);
        code.extend(classic_trailer());
        assert_eq!(code.len(), 200);

        let s = split_sections(&runtime(&code)).unwrap();
        assert_eq!(s.auxdata.len(), 43);
        assert_eq!(s.runtime.len(), 157);
    }

    #[test]
    fn fixed_43_byte_fallback_when_tail_is_not_code() {
        // Tail of undefined bytes: no CBOR map start, not instruction space.
        let mut code = vec![0x60, 0x01, 0x56, 0x5B, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00];
        code.extend(std::iter::repeat_n(0x0C, 43));

        let s = split_sections(&runtime(&code)).unwrap();
        assert_eq!(s.auxdata.len(), 43);
        assert_eq!(s.runtime.len(), 10);
    }

    #[test]
    fn trailer_only_input_leaves_no_runtime() {
        let code = runtime(&classic_trailer());
        assert_eq!(split_sections(&code).unwrap_err(), DisasmError::EmptyRuntime);
    }

    #[test]
    fn creation_code_splits_at_codecopy_epilogue() {
        // PUSH1 len; DUP1; PUSH1 src; PUSH1 0; CODECOPY; PUSH1 0; RETURN; STOP
        let deploy = [
            0x60, 0x06, 0x80, 0x60, 0x0c, 0x60, 0x00, 0x39, 0x60, 0x00, 0xf3, 0x00,
        ];
        let rt = [0x60, 0x01, 0x60, 0x02, 0x01, 0x00];
        let mut code = deploy.to_vec();
        code.extend(rt);

        let s = split_sections(&Bytecode {
            bytes: code.clone(),
            origin: Origin::CreationWithDeploy,
        })
        .unwrap();
        assert_eq!(s.deployment, deploy);
        assert_eq!(s.runtime, rt);
        assert!(s.auxdata.is_empty());
    }

    #[test]
    fn creation_code_without_epilogue_falls_back_to_runtime() {
        let code = Bytecode {
            bytes: vec![0x60, 0x01, 0x60, 0x02, 0x01, 0x00],
            origin: Origin::CreationWithDeploy,
        };
        let s = split_sections(&code).unwrap();
        assert!(s.deployment.is_empty());
        assert_eq!(s.runtime, code.bytes);
    }

    #[test]
    fn disassemble_push_add_program() {
        let instrs = disassemble(&[0x60, 0x01, 0x60, 0x02, 0x01]);
        assert_eq!(instrs.len(), 3);
        assert_eq!(
            (instrs[0].offset, instrs[0].opcode, instrs[0].immediate.as_deref()),
            (0, Opcode::Push1, Some(&[0x01][..]))
        );
        assert_eq!(
            (instrs[1].offset, instrs[1].opcode, instrs[1].immediate.as_deref()),
            (2, Opcode::Push1, Some(&[0x02][..]))
        );
        assert_eq!((instrs[2].offset, instrs[2].opcode), (4, Opcode::Add));
    }

    #[test]
    fn disassemble_single_and_unknown() {
        let stop = disassemble(&[0x00]);
        assert_eq!((stop[0].offset, stop[0].opcode), (0, Opcode::Stop));

        let unknown = disassemble(&[0x0C]);
        assert_eq!(unknown[0].opcode, Opcode::Unknown(0x0C));
        assert!(unknown[0].opcode.to_string().contains("0x0C"));
    }

    #[test]
    fn truncated_push_keeps_remaining_bytes() {
        let instrs = disassemble(&[0x61, 0x01]);
        assert_eq!(instrs.len(), 1);
        assert_eq!(instrs[0].opcode, Opcode::Push2);
        assert_eq!(instrs[0].immediate.as_deref(), Some(&[0x01][..]));
        assert!(instrs[0].is_truncated());
        assert!(format_instruction(&instrs[0]).ends_with("(truncated)"));
    }

    #[test]
    fn round_trip_reassembles_exactly() {
        let code = [0x60, 0x01, 0x0C, 0x61, 0xAA, 0xBB, 0x00, 0x7F, 0x01];
        assert_eq!(reassemble(&disassemble(&code)), code);
    }

    #[test]
    fn text_format_matches_convention() {
        let instrs = disassemble(&[0x60, 0x01, 0x42, 0x00]);
        let lines: Vec<String> = instrs.iter().map(format_instruction).collect();
        assert_eq!(lines, ["0000: PUSH1 0x01", "0002: TIMESTAMP", "0003: STOP"]);
    }

    #[test]
    fn instruction_json_round_trip() {
        for instr in disassemble(&[0x60, 0x01, 0x42, 0x0C, 0x7F, 0x09]) {
            let json = serde_json::to_string(&instr).unwrap();
            let back: Instruction = serde_json::from_str(&json).unwrap();
            assert_eq!(back, instr);
        }
    }
}

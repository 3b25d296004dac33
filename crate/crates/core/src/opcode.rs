//! The EVM instruction inventory.
//!
//! The byte-to-opcode mapping is total: every value in `0x00..=0xFF` decodes,
//! with bytes outside the defined set mapping to [`Opcode::Unknown`]. The
//! defined set is pinned to the pre-Shanghai revision (SHL/SHR/SAR, CREATE2,
//! CHAINID, SELFBALANCE and BASEFEE included; no PUSH0), so decoding is
//! stable across contract vintages.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Functional grouping of the instruction set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    Arithmetic,
    Comparison,
    Encryption,
    Environment,
    Block,
    StorageExec,
    Push,
    Dup,
    Swap,
    Log,
    System,
    /// Bytes outside the defined inventory.
    Unknown,
}

macro_rules! define_opcodes {
    ($($byte:literal $variant:ident $name:literal $cat:ident $width:literal;)*) => {
        /// A decoded one-byte EVM opcode.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum Opcode {
            $($variant,)*
            /// A byte with no assigned mnemonic in the pinned revision.
            Unknown(u8),
        }

        impl Opcode {
            /// Decode a byte. Total: undefined bytes yield `Unknown`.
            pub fn from_byte(byte: u8) -> Opcode {
                match byte {
                    $($byte => Opcode::$variant,)*
                    other => Opcode::Unknown(other),
                }
            }

            /// The encoded byte value.
            pub fn byte(self) -> u8 {
                match self {
                    $(Opcode::$variant => $byte,)*
                    Opcode::Unknown(b) => b,
                }
            }

            /// Functional category, `Category::Unknown` for undefined bytes.
            pub fn category(self) -> Category {
                match self {
                    $(Opcode::$variant => Category::$cat,)*
                    Opcode::Unknown(_) => Category::Unknown,
                }
            }

            /// Number of immediate bytes following the opcode (nonzero only
            /// for PUSH1..PUSH32).
            pub fn immediate_width(self) -> usize {
                match self {
                    $(Opcode::$variant => $width,)*
                    Opcode::Unknown(_) => 0,
                }
            }

            fn base_mnemonic(self) -> &'static str {
                match self {
                    $(Opcode::$variant => $name,)*
                    Opcode::Unknown(_) => "UNKNOWN",
                }
            }
        }
    };
}

define_opcodes! {
    0x00 Stop "STOP" Arithmetic 0;
    0x01 Add "ADD" Arithmetic 0;
    0x02 Mul "MUL" Arithmetic 0;
    0x03 Sub "SUB" Arithmetic 0;
    0x04 Div "DIV" Arithmetic 0;
    0x05 Sdiv "SDIV" Arithmetic 0;
    0x06 Mod "MOD" Arithmetic 0;
    0x07 Smod "SMOD" Arithmetic 0;
    0x08 Addmod "ADDMOD" Arithmetic 0;
    0x09 Mulmod "MULMOD" Arithmetic 0;
    0x0A Exp "EXP" Arithmetic 0;
    0x0B Signextend "SIGNEXTEND" Arithmetic 0;
    0x10 Lt "LT" Comparison 0;
    0x11 Gt "GT" Comparison 0;
    0x12 Slt "SLT" Comparison 0;
    0x13 Sgt "SGT" Comparison 0;
    0x14 Eq "EQ" Comparison 0;
    0x15 Iszero "ISZERO" Comparison 0;
    0x16 And "AND" Comparison 0;
    0x17 Or "OR" Comparison 0;
    0x18 Xor "XOR" Comparison 0;
    0x19 Not "NOT" Comparison 0;
    0x1A Byte "BYTE" Comparison 0;
    0x1B Shl "SHL" Comparison 0;
    0x1C Shr "SHR" Comparison 0;
    0x1D Sar "SAR" Comparison 0;
    0x20 Sha3 "SHA3" Encryption 0;
    0x30 Address "ADDRESS" Environment 0;
    0x31 Balance "BALANCE" Environment 0;
    0x32 Origin "ORIGIN" Environment 0;
    0x33 Caller "CALLER" Environment 0;
    0x34 Callvalue "CALLVALUE" Environment 0;
    0x35 Calldataload "CALLDATALOAD" Environment 0;
    0x36 Calldatasize "CALLDATASIZE" Environment 0;
    0x37 Calldatacopy "CALLDATACOPY" Environment 0;
    0x38 Codesize "CODESIZE" Environment 0;
    0x39 Codecopy "CODECOPY" Environment 0;
    0x3A Gasprice "GASPRICE" Environment 0;
    0x3B Extcodesize "EXTCODESIZE" Environment 0;
    0x3C Extcodecopy "EXTCODECOPY" Environment 0;
    0x3D Returndatasize "RETURNDATASIZE" Environment 0;
    0x3E Returndatacopy "RETURNDATACOPY" Environment 0;
    0x3F Extcodehash "EXTCODEHASH" Environment 0;
    0x40 Blockhash "BLOCKHASH" Block 0;
    0x41 Coinbase "COINBASE" Block 0;
    0x42 Timestamp "TIMESTAMP" Block 0;
    0x43 Number "NUMBER" Block 0;
    0x44 Difficulty "DIFFICULTY" Block 0;
    0x45 Gaslimit "GASLIMIT" Block 0;
    0x46 Chainid "CHAINID" Block 0;
    0x47 Selfbalance "SELFBALANCE" Block 0;
    0x48 Basefee "BASEFEE" Block 0;
    0x50 Pop "POP" StorageExec 0;
    0x51 Mload "MLOAD" StorageExec 0;
    0x52 Mstore "MSTORE" StorageExec 0;
    0x53 Mstore8 "MSTORE8" StorageExec 0;
    0x54 Sload "SLOAD" StorageExec 0;
    0x55 Sstore "SSTORE" StorageExec 0;
    0x56 Jump "JUMP" StorageExec 0;
    0x57 Jumpi "JUMPI" StorageExec 0;
    0x58 Pc "PC" StorageExec 0;
    0x59 Msize "MSIZE" StorageExec 0;
    0x5A Gas "GAS" StorageExec 0;
    0x5B Jumpdest "JUMPDEST" StorageExec 0;
    0x60 Push1 "PUSH1" Push 1;
    0x61 Push2 "PUSH2" Push 2;
    0x62 Push3 "PUSH3" Push 3;
    0x63 Push4 "PUSH4" Push 4;
    0x64 Push5 "PUSH5" Push 5;
    0x65 Push6 "PUSH6" Push 6;
    0x66 Push7 "PUSH7" Push 7;
    0x67 Push8 "PUSH8" Push 8;
    0x68 Push9 "PUSH9" Push 9;
    0x69 Push10 "PUSH10" Push 10;
    0x6A Push11 "PUSH11" Push 11;
    0x6B Push12 "PUSH12" Push 12;
    0x6C Push13 "PUSH13" Push 13;
    0x6D Push14 "PUSH14" Push 14;
    0x6E Push15 "PUSH15" Push 15;
    0x6F Push16 "PUSH16" Push 16;
    0x70 Push17 "PUSH17" Push 17;
    0x71 Push18 "PUSH18" Push 18;
    0x72 Push19 "PUSH19" Push 19;
    0x73 Push20 "PUSH20" Push 20;
    0x74 Push21 "PUSH21" Push 21;
    0x75 Push22 "PUSH22" Push 22;
    0x76 Push23 "PUSH23" Push 23;
    0x77 Push24 "PUSH24" Push 24;
    0x78 Push25 "PUSH25" Push 25;
    0x79 Push26 "PUSH26" Push 26;
    0x7A Push27 "PUSH27" Push 27;
    0x7B Push28 "PUSH28" Push 28;
    0x7C Push29 "PUSH29" Push 29;
    0x7D Push30 "PUSH30" Push 30;
    0x7E Push31 "PUSH31" Push 31;
    0x7F Push32 "PUSH32" Push 32;
    0x80 Dup1 "DUP1" Dup 0;
    0x81 Dup2 "DUP2" Dup 0;
    0x82 Dup3 "DUP3" Dup 0;
    0x83 Dup4 "DUP4" Dup 0;
    0x84 Dup5 "DUP5" Dup 0;
    0x85 Dup6 "DUP6" Dup 0;
    0x86 Dup7 "DUP7" Dup 0;
    0x87 Dup8 "DUP8" Dup 0;
    0x88 Dup9 "DUP9" Dup 0;
    0x89 Dup10 "DUP10" Dup 0;
    0x8A Dup11 "DUP11" Dup 0;
    0x8B Dup12 "DUP12" Dup 0;
    0x8C Dup13 "DUP13" Dup 0;
    0x8D Dup14 "DUP14" Dup 0;
    0x8E Dup15 "DUP15" Dup 0;
    0x8F Dup16 "DUP16" Dup 0;
    0x90 Swap1 "SWAP1" Swap 0;
    0x91 Swap2 "SWAP2" Swap 0;
    0x92 Swap3 "SWAP3" Swap 0;
    0x93 Swap4 "SWAP4" Swap 0;
    0x94 Swap5 "SWAP5" Swap 0;
    0x95 Swap6 "SWAP6" Swap 0;
    0x96 Swap7 "SWAP7" Swap 0;
    0x97 Swap8 "SWAP8" Swap 0;
    0x98 Swap9 "SWAP9" Swap 0;
    0x99 Swap10 "SWAP10" Swap 0;
    0x9A Swap11 "SWAP11" Swap 0;
    0x9B Swap12 "SWAP12" Swap 0;
    0x9C Swap13 "SWAP13" Swap 0;
    0x9D Swap14 "SWAP14" Swap 0;
    0x9E Swap15 "SWAP15" Swap 0;
    0x9F Swap16 "SWAP16" Swap 0;
    0xA0 Log0 "LOG0" Log 0;
    0xA1 Log1 "LOG1" Log 0;
    0xA2 Log2 "LOG2" Log 0;
    0xA3 Log3 "LOG3" Log 0;
    0xA4 Log4 "LOG4" Log 0;
    0xF0 Create "CREATE" System 0;
    0xF1 Call "CALL" System 0;
    0xF2 Callcode "CALLCODE" System 0;
    0xF3 Return "RETURN" System 0;
    0xF4 Delegatecall "DELEGATECALL" System 0;
    0xF5 Create2 "CREATE2" System 0;
    0xFA Staticcall "STATICCALL" System 0;
    0xFD Revert "REVERT" System 0;
    0xFE Invalid "INVALID" System 0;
    0xFF Selfdestruct "SELFDESTRUCT" System 0;
}

impl Opcode {
    /// True for PUSH1..PUSH32.
    pub fn is_push(self) -> bool {
        self.category() == Category::Push
    }

    /// True for bytes with an assigned mnemonic.
    pub fn is_defined(self) -> bool {
        !matches!(self, Opcode::Unknown(_))
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Opcode::Unknown(b) => write!(f, "UNKNOWN(0x{b:02X})"),
            other => f.write_str(other.base_mnemonic()),
        }
    }
}

/// Inventory entry for one byte value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpcodeInfo {
    pub mnemonic: &'static str,
    pub byte: u8,
    pub category: Category,
    pub immediate_width: usize,
}

/// Look up the inventory entry for a byte. Total over `0x00..=0xFF`.
pub fn opcode_info(byte: u8) -> OpcodeInfo {
    let op = Opcode::from_byte(byte);
    OpcodeInfo {
        mnemonic: op.base_mnemonic(),
        byte,
        category: op.category(),
        immediate_width: op.immediate_width(),
    }
}

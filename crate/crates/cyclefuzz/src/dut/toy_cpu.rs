//! A small accumulator CPU with instruction-level coverage.
//!
//! Input is 16 bits per cycle: an opcode byte (low 4 bits decoded) and one
//! operand byte. Easy coverpoints track decode, flags, and the 16-slot
//! scratch memory. A 10-stage token sequence guards the deep state: each
//! `seq` instruction with the next token in either operand nibble advances
//! the chain, and after the full chain a store to slot 15 trips the planted
//! check failure.

use super::{CheckResult, Dut, DutDescriptor};
use crate::coverage::CoverageVector;
use crate::grammar::{GrammarMode, TemplateTable, TransactionTemplate};
use crate::Result;

pub const WIDTH_BITS: u32 = 16;
pub const COVERPOINTS: usize = 99;

const OP_NOP: u8 = 0;
const OP_LDI: u8 = 1;
const OP_ADD: u8 = 2;
const OP_SUB: u8 = 3;
const OP_AND: u8 = 4;
const OP_OR: u8 = 5;
const OP_XOR: u8 = 6;
const OP_SHL: u8 = 7;
const OP_LOAD: u8 = 8;
const OP_STORE: u8 = 9;
const OP_SWAP: u8 = 10;
const OP_SKZ: u8 = 11;
const OP_SKC: u8 = 12;
const OP_CMP: u8 = 13;
const OP_DIV: u8 = 14;
const OP_SEQ: u8 = 15;

const OP_NAMES: [&str; 16] = [
    "nop", "ldi", "add", "sub", "and", "or", "xor", "shl", "load", "store", "swap", "skz", "skc",
    "cmp", "div", "seq",
];

const CP_EXEC: usize = 0; // +op, 16 points
const CP_SKIPPED: usize = 16; // +op, 16 points
const CP_SKIP_TAKEN_Z: usize = 32;
const CP_SKIP_TAKEN_C: usize = 33;
const CP_FLAG_Z_SET: usize = 34;
const CP_FLAG_Z_CLEAR: usize = 35;
const CP_FLAG_C_SET: usize = 36;
const CP_FLAG_C_CLEAR: usize = 37;
const CP_ACC_ZERO: usize = 38;
const CP_ACC_FF: usize = 39;
const CP_MEM_READ: usize = 40; // +addr, 16 points
const CP_MEM_WRITE: usize = 56; // +addr, 16 points
const CP_DIV_TRAP: usize = 72;
const CP_SHL_CARRY: usize = 73;
const CP_CMP_LT: usize = 74;
const CP_CMP_EQ: usize = 75;
const CP_CMP_GT: usize = 76;
const CP_CHAIN_ATTEMPT: usize = 77; // +stage, 10 points
const CP_CHAIN_ADVANCE: usize = 87; // +stage, 10 points
const CP_CHAIN_COMPLETE: usize = 97;
const CP_STORE_AFTER_COMPLETE: usize = 98;

const CHAIN_LEN: usize = 10;
/// Token expected in either nibble of the `seq` operand, per chain stage.
/// All tokens are nonzero so a zero operand can never advance.
const CHAIN_TOKENS: [u8; CHAIN_LEN] = [0x3, 0x7, 0x1, 0xC, 0x9, 0x5, 0xE, 0x2, 0xB, 0x6];

pub struct ToyCpu {
    descriptor: DutDescriptor,
    counters: Vec<u32>,
    acc: u8,
    x: u8,
    mem: [u8; 16],
    z: bool,
    c: bool,
    skip: bool,
    chain_stage: usize,
    failure: Option<String>,
}

/// One instruction per cycle: opcode byte plus operand byte.
pub fn builtin_templates() -> TemplateTable {
    let templates = OP_NAMES
        .iter()
        .map(|&name| TransactionTemplate {
            name: name.to_string(),
            payload_bytes: 1,
            cycles: 1,
        })
        .collect();
    TemplateTable::new(templates).expect("builtin table is valid")
}

impl ToyCpu {
    pub fn new() -> Self {
        let descriptor = DutDescriptor {
            name: "toy-cpu".to_string(),
            input_width_bits: WIDTH_BITS,
            coverpoint_count: COVERPOINTS,
            grammar: GrammarMode::Transaction(builtin_templates()),
        };
        ToyCpu {
            descriptor,
            counters: vec![0; COVERPOINTS],
            acc: 0,
            x: 0,
            mem: [0; 16],
            z: false,
            c: false,
            skip: false,
            chain_stage: 0,
            failure: None,
        }
    }

    fn hit(&mut self, point: usize) {
        self.counters[point] = self.counters[point].saturating_add(1);
    }

    fn set_z(&mut self, value: bool) {
        self.z = value;
        self.hit(if value {
            CP_FLAG_Z_SET
        } else {
            CP_FLAG_Z_CLEAR
        });
    }

    fn set_c(&mut self, value: bool) {
        self.c = value;
        self.hit(if value {
            CP_FLAG_C_SET
        } else {
            CP_FLAG_C_CLEAR
        });
    }

    fn note_acc(&mut self) {
        if self.acc == 0x00 {
            self.hit(CP_ACC_ZERO);
        }
        if self.acc == 0xFF {
            self.hit(CP_ACC_FF);
        }
    }

    #[cfg(test)]
    fn acc(&self) -> u8 {
        self.acc
    }

    fn execute(&mut self, op: u8, operand: u8) {
        match op {
            OP_NOP => {}
            OP_LDI => {
                self.acc = operand;
                self.set_z(self.acc == 0);
                self.note_acc();
            }
            OP_ADD => {
                let (r, carry) = self.acc.overflowing_add(operand);
                self.acc = r;
                self.set_z(r == 0);
                self.set_c(carry);
                self.note_acc();
            }
            OP_SUB => {
                let (r, borrow) = self.acc.overflowing_sub(operand);
                self.acc = r;
                self.set_z(r == 0);
                self.set_c(borrow);
                self.note_acc();
            }
            OP_AND => {
                self.acc &= operand;
                self.set_z(self.acc == 0);
                self.note_acc();
            }
            OP_OR => {
                self.acc |= operand;
                self.set_z(self.acc == 0);
                self.note_acc();
            }
            OP_XOR => {
                self.acc ^= operand;
                self.set_z(self.acc == 0);
                self.note_acc();
            }
            OP_SHL => {
                let shift = u32::from(operand & 7);
                let carry = shift > 0 && (u16::from(self.acc) << shift) > 0xFF;
                if carry {
                    self.hit(CP_SHL_CARRY);
                }
                self.acc = self.acc.wrapping_shl(shift);
                self.set_z(self.acc == 0);
                self.set_c(carry);
                self.note_acc();
            }
            OP_LOAD => {
                let addr = usize::from(operand & 15);
                self.acc = self.mem[addr];
                self.hit(CP_MEM_READ + addr);
                self.set_z(self.acc == 0);
                self.note_acc();
            }
            OP_STORE => {
                let addr = usize::from(operand & 15);
                self.mem[addr] = self.acc;
                self.hit(CP_MEM_WRITE + addr);
                if self.chain_stage == CHAIN_LEN {
                    self.hit(CP_STORE_AFTER_COMPLETE);
                    if addr == 15 && self.failure.is_none() {
                        self.failure =
                            Some("store to slot 15 after the sequence chain completed".to_string());
                    }
                }
            }
            OP_SWAP => {
                std::mem::swap(&mut self.acc, &mut self.x);
                self.note_acc();
            }
            OP_SKZ => {
                if self.z {
                    self.skip = true;
                    self.hit(CP_SKIP_TAKEN_Z);
                }
            }
            OP_SKC => {
                if self.c {
                    self.skip = true;
                    self.hit(CP_SKIP_TAKEN_C);
                }
            }
            OP_CMP => {
                match self.acc.cmp(&operand) {
                    std::cmp::Ordering::Less => self.hit(CP_CMP_LT),
                    std::cmp::Ordering::Equal => self.hit(CP_CMP_EQ),
                    std::cmp::Ordering::Greater => self.hit(CP_CMP_GT),
                }
                self.set_z(self.acc == operand);
                self.set_c(self.acc < operand);
            }
            OP_DIV => match self.acc.checked_div(operand) {
                None => self.hit(CP_DIV_TRAP),
                Some(q) => {
                    self.acc = q;
                    self.set_z(self.acc == 0);
                    self.note_acc();
                }
            },
            OP_SEQ => {
                if self.chain_stage < CHAIN_LEN {
                    self.hit(CP_CHAIN_ATTEMPT + self.chain_stage);
                    let token = CHAIN_TOKENS[self.chain_stage];
                    if operand >> 4 == token || operand & 0xF == token {
                        self.hit(CP_CHAIN_ADVANCE + self.chain_stage);
                        self.chain_stage += 1;
                        if self.chain_stage == CHAIN_LEN {
                            self.hit(CP_CHAIN_COMPLETE);
                        }
                    }
                }
            }
            _ => unreachable!("opcode already reduced mod 16"),
        }
    }
}

impl Default for ToyCpu {
    fn default() -> Self {
        Self::new()
    }
}

impl Dut for ToyCpu {
    fn descriptor(&self) -> &DutDescriptor {
        &self.descriptor
    }

    fn reset(&mut self) -> Result<()> {
        self.counters.iter_mut().for_each(|c| *c = 0);
        self.acc = 0;
        self.x = 0;
        self.mem = [0; 16];
        self.z = false;
        self.c = false;
        self.skip = false;
        self.chain_stage = 0;
        self.failure = None;
        Ok(())
    }

    fn step(&mut self, cycle: &[u8]) -> Result<()> {
        let op = cycle.first().copied().unwrap_or(0) % 16;
        let operand = cycle.get(1).copied().unwrap_or(0);
        if self.skip {
            self.skip = false;
            self.hit(CP_SKIPPED + usize::from(op));
            return Ok(());
        }
        self.hit(CP_EXEC + usize::from(op));
        self.execute(op, operand);
        Ok(())
    }

    fn read_coverage(&mut self) -> Result<CoverageVector> {
        Ok(CoverageVector::new(self.counters.clone()))
    }

    fn check(&mut self) -> Result<CheckResult> {
        Ok(match &self.failure {
            Some(reason) => CheckResult::Fail(reason.clone()),
            None => CheckResult::Pass,
        })
    }
}

fn emit(program: &mut Vec<u8>, op: u8, operand: u8) {
    program.push(op);
    program.push(operand);
}

/// One program that hits all 99 coverpoints and ends by tripping the
/// planted check failure.
pub fn witness_corpus() -> Vec<Vec<u8>> {
    let mut p = Vec::new();
    // Flags, accumulator extremes, ALU decode.
    emit(&mut p, OP_LDI, 0x00);
    emit(&mut p, OP_LDI, 0xFF);
    emit(&mut p, OP_ADD, 0x01); // wraps to 0: carry set, zero set
    emit(&mut p, OP_ADD, 0x05); // carry clear
    emit(&mut p, OP_SUB, 0x03);
    emit(&mut p, OP_SUB, 0x09); // borrow
    emit(&mut p, OP_AND, 0x0F);
    emit(&mut p, OP_OR, 0x30);
    emit(&mut p, OP_XOR, 0x33);
    emit(&mut p, OP_LDI, 0x80);
    emit(&mut p, OP_SHL, 0x01); // carry out
    emit(&mut p, OP_LDI, 0x01);
    emit(&mut p, OP_SHL, 0x00); // no carry
    emit(&mut p, OP_NOP, 0x00);
    emit(&mut p, OP_SWAP, 0x00);
    // Walk the scratch memory. Slot 15 is safe while the chain is open.
    for addr in 0..16u8 {
        emit(&mut p, OP_LDI, addr.wrapping_mul(17));
        emit(&mut p, OP_STORE, addr);
        emit(&mut p, OP_LOAD, addr);
    }
    // Comparisons and division.
    emit(&mut p, OP_LDI, 0x05);
    emit(&mut p, OP_CMP, 0x05);
    emit(&mut p, OP_CMP, 0x09);
    emit(&mut p, OP_CMP, 0x02);
    emit(&mut p, OP_DIV, 0x00); // trap
    emit(&mut p, OP_DIV, 0x02);
    // Skip every opcode once via a taken skz.
    for op in 0..16u8 {
        emit(&mut p, OP_LDI, 0x00);
        emit(&mut p, OP_SKZ, 0x00);
        emit(&mut p, op, 0x01);
    }
    // A taken skc as well.
    emit(&mut p, OP_LDI, 0xFF);
    emit(&mut p, OP_ADD, 0x10);
    emit(&mut p, OP_SKC, 0x00);
    emit(&mut p, OP_NOP, 0x00);
    // The full token chain, then the guarded store.
    for token in CHAIN_TOKENS {
        emit(&mut p, OP_SEQ, token << 4);
    }
    emit(&mut p, OP_STORE, 0x00);
    emit(&mut p, OP_STORE, 0x0F);
    vec![p]
}

/// Plain seeds over the easy instructions. Each carries `seq` instructions
/// whose operands never match a token (high nibble 0), so the chain never
/// opens and the guarded slot stays safe.
pub fn starter_corpus() -> Vec<Vec<u8>> {
    let mut a = Vec::new();
    emit(&mut a, OP_LDI, 0x05);
    emit(&mut a, OP_ADD, 0x03);
    emit(&mut a, OP_SEQ, 0x00);
    emit(&mut a, OP_STORE, 0x02);
    emit(&mut a, OP_LOAD, 0x02);
    emit(&mut a, OP_SEQ, 0x00);
    emit(&mut a, OP_ADD, 0x01);
    emit(&mut a, OP_STORE, 0x03);
    emit(&mut a, OP_SEQ, 0x00);
    emit(&mut a, OP_CMP, 0x09);
    emit(&mut a, OP_CMP, 0x02);
    emit(&mut a, OP_SEQ, 0x00);
    emit(&mut a, OP_LDI, 0x00);
    emit(&mut a, OP_LDI, 0xFF);
    emit(&mut a, OP_ADD, 0x01);
    emit(&mut a, OP_SEQ, 0x00);
    emit(&mut a, OP_SUB, 0x09);
    emit(&mut a, OP_AND, 0x0F);
    emit(&mut a, OP_SEQ, 0x00);
    emit(&mut a, OP_OR, 0x30);
    emit(&mut a, OP_XOR, 0x33);
    emit(&mut a, OP_SEQ, 0x00);
    emit(&mut a, OP_LDI, 0x80);
    emit(&mut a, OP_SHL, 0x01);
    emit(&mut a, OP_SEQ, 0x00);
    emit(&mut a, OP_NOP, 0x00);

    let mut b = Vec::new();
    for addr in 0..8u8 {
        emit(&mut b, OP_LDI, addr.wrapping_mul(17));
        emit(&mut b, OP_STORE, addr);
        emit(&mut b, OP_SEQ, 0x00);
    }

    let mut c = Vec::new();
    emit(&mut c, OP_LDI, 0x00);
    emit(&mut c, OP_SKZ, 0x00);
    emit(&mut c, OP_ADD, 0x07);
    emit(&mut c, OP_SEQ, 0x00);
    emit(&mut c, OP_LDI, 0xFF);
    emit(&mut c, OP_ADD, 0x10);
    emit(&mut c, OP_SKC, 0x00);
    emit(&mut c, OP_NOP, 0x00);
    emit(&mut c, OP_SEQ, 0x00);
    emit(&mut c, OP_DIV, 0x00);
    emit(&mut c, OP_DIV, 0x03);
    emit(&mut c, OP_SEQ, 0x00);
    emit(&mut c, OP_CMP, 0x09);
    emit(&mut c, OP_LOAD, 0x01);
    emit(&mut c, OP_SEQ, 0x00);
    emit(&mut c, OP_SWAP, 0x00);
    emit(&mut c, OP_SUB, 0x01);
    emit(&mut c, OP_SEQ, 0x00);

    // Two seq-dense scaffolds: plenty of slots for mutation to rewrite.
    // The first is all-neutral; the second pre-places the odd-stage tokens
    // in stage order, leaving the even stages for the mutator. The stage
    // zero token appears in neither, so the chain never starts on its own.
    let mut d = Vec::new();
    for block in 0..8u8 {
        for _ in 0..5 {
            emit(&mut d, OP_SEQ, 0x00);
        }
        emit(&mut d, OP_STORE, 1 << (block % 4));
    }

    let odd_tokens = [0x77, 0xCC, 0x55, 0x22, 0x66];
    let mut e = Vec::new();
    for block in 0..8u8 {
        for slot in 0..5usize {
            emit(&mut e, OP_SEQ, odd_tokens[slot]);
        }
        emit(&mut e, OP_STORE, 1 << ((block + 1) % 4));
    }

    vec![a, b, c, d, e]
}

//! A register-file peripheral with a transaction engine and a keyed unlock
//! ladder.
//!
//! Input is 64 bits per cycle, decoded as byte fields: command, selector,
//! 32-bit little-endian data, and two auxiliary bytes. Registers 0..=6 are
//! always writable; register 7 opens only after eight `unlock-step` commands
//! carrying the right key in either selector nibble. The planted failure is
//! a write of control byte 0xA5 into register 7 once unlocked; the control
//! decoder reports near misses on landed writes (either nibble right, top
//! six bits right) as their own coverpoints.

use super::{CheckResult, Dut, DutDescriptor};
use crate::coverage::CoverageVector;
use crate::grammar::GrammarMode;
use crate::Result;

pub const WIDTH_BITS: u32 = 64;
pub const COVERPOINTS: usize = 82;

const CMD_NOP: u8 = 0;
const CMD_WRITE_REG: u8 = 1;
const CMD_READ_REG: u8 = 2;
const CMD_BEGIN_TXN: u8 = 3;
const CMD_TXN_DATA: u8 = 4;
const CMD_COMMIT: u8 = 5;
const CMD_ABORT: u8 = 6;
const CMD_UNLOCK_STEP: u8 = 7;

const CP_CMD_SEEN: usize = 0; // +cmd, 8 points
const CP_REG_WRITE: usize = 8; // +reg, 8 points
const CP_REG_READ: usize = 16; // +reg, 8 points
const CP_TXN_BEGIN: usize = 24;
const CP_TXN_REENTRY: usize = 25;
const CP_TXN_DATA: usize = 26;
const CP_TXN_COMMIT: usize = 27;
const CP_COMMIT_LEN: usize = 28; // +bucket, 5 points: 0, 1, 2-3, 4-7, 8+
const CP_COMMIT_NOOP: usize = 33;
const CP_TXN_ABORT: usize = 34;
const CP_ABORT_NOOP: usize = 35;
const CP_WRITE_IN_TXN: usize = 36;
const CP_WRITE_REG7_LOCKED: usize = 37;
const CP_UNLOCK_ATTEMPT: usize = 38; // +stage, 8 points
const CP_UNLOCK_ADVANCE: usize = 46; // +stage, 8 points
const CP_UNLOCKED: usize = 54;
const CP_UNLOCK_EXTRA: usize = 55;
const CP_WRITE_REG7_UNLOCKED: usize = 56;
const CP_CTRL_HI_QUAD: usize = 57;
const CP_CTRL_HI_NIBBLE: usize = 58;
const CP_CTRL_LO_NIBBLE: usize = 59;
const CP_CTRL_CLOSE: usize = 60;
const CP_CTRL_MAGIC: usize = 61;
const CP_AUX_QUADRANT: usize = 62; // +quadrant, 4 points
const CP_DATA_MSB: usize = 66; // +reg, 8 points
const CP_READ_AFTER_WRITE: usize = 74; // +reg, 8 points

const UNLOCK_LEN: usize = 8;
/// Key expected in either nibble of the selector byte, per unlock stage.
/// All keys are nonzero so a zero selector can never advance.
const KEY_NIBBLES: [u8; UNLOCK_LEN] = [0xD, 0x4, 0xA, 0x1, 0xF, 0x7, 0x8, 0x2];

pub struct PeriphFsm {
    descriptor: DutDescriptor,
    counters: Vec<u32>,
    regs: [u32; 8],
    written: [bool; 8],
    txn_active: bool,
    txn_len: u32,
    unlock_stage: usize,
    failure: Option<String>,
}

impl PeriphFsm {
    pub fn new() -> Self {
        let descriptor = DutDescriptor {
            name: "periph-fsm".to_string(),
            input_width_bits: WIDTH_BITS,
            coverpoint_count: COVERPOINTS,
            grammar: GrammarMode::RawBits,
        };
        PeriphFsm {
            descriptor,
            counters: vec![0; COVERPOINTS],
            regs: [0; 8],
            written: [false; 8],
            txn_active: false,
            txn_len: 0,
            unlock_stage: 0,
            failure: None,
        }
    }

    fn hit(&mut self, point: usize) {
        self.counters[point] = self.counters[point].saturating_add(1);
    }

    fn unlocked(&self) -> bool {
        self.unlock_stage == UNLOCK_LEN
    }

    #[cfg(test)]
    fn reg(&self, reg: usize) -> u32 {
        self.regs[reg]
    }

    fn write_reg(&mut self, reg: usize, data: u32) {
        if reg == 7 && !self.unlocked() {
            self.hit(CP_WRITE_REG7_LOCKED);
            return;
        }
        self.regs[reg] = data;
        self.written[reg] = true;
        self.hit(CP_REG_WRITE + reg);
        if data & 0x8000_0000 != 0 {
            self.hit(CP_DATA_MSB + reg);
        }
        if self.txn_active {
            self.hit(CP_WRITE_IN_TXN);
        }
        if reg == 7 {
            self.hit(CP_WRITE_REG7_UNLOCKED);
            if data & 0xC0 == 0x80 {
                self.hit(CP_CTRL_HI_QUAD);
            }
            if data & 0xF0 == 0xA0 {
                self.hit(CP_CTRL_HI_NIBBLE);
            }
            if data & 0x0F == 0x05 {
                self.hit(CP_CTRL_LO_NIBBLE);
            }
            if data & 0xFC == 0xA4 {
                self.hit(CP_CTRL_CLOSE);
            }
            if data & 0xFF == 0xA5 {
                self.hit(CP_CTRL_MAGIC);
                if self.failure.is_none() {
                    self.failure =
                        Some("register 7 accepted the 0xA5 control byte after unlock".to_string());
                }
            }
        }
    }
}

impl Default for PeriphFsm {
    fn default() -> Self {
        Self::new()
    }
}

impl Dut for PeriphFsm {
    fn descriptor(&self) -> &DutDescriptor {
        &self.descriptor
    }

    fn reset(&mut self) -> Result<()> {
        self.counters.iter_mut().for_each(|c| *c = 0);
        self.regs = [0; 8];
        self.written = [false; 8];
        self.txn_active = false;
        self.txn_len = 0;
        self.unlock_stage = 0;
        self.failure = None;
        Ok(())
    }

    fn step(&mut self, cycle: &[u8]) -> Result<()> {
        let byte = |i: usize| cycle.get(i).copied().unwrap_or(0);
        let cmd = byte(0) % 8;
        let sel = byte(1);
        let data = u32::from_le_bytes([byte(2), byte(3), byte(4), byte(5)]);
        let aux = byte(6);
        self.hit(CP_CMD_SEEN + usize::from(cmd));
        self.hit(CP_AUX_QUADRANT + usize::from(aux >> 6));
        match cmd {
            CMD_NOP => {}
            CMD_WRITE_REG => self.write_reg(usize::from(sel % 8), data),
            CMD_READ_REG => {
                let reg = usize::from(sel % 8);
                self.hit(CP_REG_READ + reg);
                if self.written[reg] {
                    self.hit(CP_READ_AFTER_WRITE + reg);
                }
            }
            CMD_BEGIN_TXN => {
                if self.txn_active {
                    self.hit(CP_TXN_REENTRY);
                } else {
                    self.txn_active = true;
                    self.txn_len = 0;
                    self.hit(CP_TXN_BEGIN);
                }
            }
            CMD_TXN_DATA => {
                if self.txn_active {
                    self.txn_len += 1;
                    self.hit(CP_TXN_DATA);
                }
            }
            CMD_COMMIT => {
                if self.txn_active {
                    self.hit(CP_TXN_COMMIT);
                    let bucket = match self.txn_len {
                        0 => 0,
                        1 => 1,
                        2..=3 => 2,
                        4..=7 => 3,
                        _ => 4,
                    };
                    self.hit(CP_COMMIT_LEN + bucket);
                    self.txn_active = false;
                } else {
                    self.hit(CP_COMMIT_NOOP);
                }
            }
            CMD_ABORT => {
                if self.txn_active {
                    self.txn_active = false;
                    self.hit(CP_TXN_ABORT);
                } else {
                    self.hit(CP_ABORT_NOOP);
                }
            }
            CMD_UNLOCK_STEP => {
                if self.unlock_stage < UNLOCK_LEN {
                    self.hit(CP_UNLOCK_ATTEMPT + self.unlock_stage);
                    let key = KEY_NIBBLES[self.unlock_stage];
                    if sel >> 4 == key || sel & 0xF == key {
                        self.hit(CP_UNLOCK_ADVANCE + self.unlock_stage);
                        self.unlock_stage += 1;
                        if self.unlocked() {
                            self.hit(CP_UNLOCKED);
                        }
                    }
                } else {
                    self.hit(CP_UNLOCK_EXTRA);
                }
            }
            _ => unreachable!("command already reduced mod 8"),
        }
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

fn cyc(cmd: u8, sel: u8, data: u32, aux: u8) -> [u8; 8] {
    let d = data.to_le_bytes();
    [cmd, sel, d[0], d[1], d[2], d[3], aux, 0]
}

/// One input that covers every coverpoint and ends with the guarded write.
pub fn witness_corpus() -> Vec<Vec<u8>> {
    let mut cycles: Vec<[u8; 8]> = Vec::new();
    // Registers 0..=6: write with the MSB set, then read back. Auxiliary
    // bytes sweep the four quadrants along the way.
    for reg in 0..7u8 {
        cycles.push(cyc(
            CMD_WRITE_REG,
            reg,
            0x8000_0000 | u32::from(reg),
            reg << 5,
        ));
        cycles.push(cyc(CMD_READ_REG, reg, 0, reg.wrapping_mul(37)));
    }
    // Register 7 is still locked: blocked write, bare read.
    cycles.push(cyc(CMD_WRITE_REG, 7, 0x1234_5678, 0xFF));
    cycles.push(cyc(CMD_READ_REG, 7, 0, 0x40));
    // Transactions: every commit-length bucket, a reentry, a write inside a
    // transaction, an abort, and both no-op forms.
    for len in [0usize, 1, 2, 4, 8] {
        cycles.push(cyc(CMD_BEGIN_TXN, 0, 0, 0x00));
        for _ in 0..len {
            cycles.push(cyc(CMD_TXN_DATA, 0, 0, 0x55));
        }
        cycles.push(cyc(CMD_COMMIT, 0, 0, 0xAA));
    }
    cycles.push(cyc(CMD_BEGIN_TXN, 0, 0, 0));
    cycles.push(cyc(CMD_BEGIN_TXN, 0, 0, 0)); // reentry
    cycles.push(cyc(CMD_WRITE_REG, 3, 0x0000_00FF, 0)); // write inside txn
    cycles.push(cyc(CMD_ABORT, 0, 0, 0));
    cycles.push(cyc(CMD_ABORT, 0, 0, 0)); // no-op abort
    cycles.push(cyc(CMD_COMMIT, 0, 0, 0)); // no-op commit
    cycles.push(cyc(CMD_NOP, 0, 0, 0xC0));
    // The unlock ladder, one extra step, then register 7 traffic.
    for key in KEY_NIBBLES {
        cycles.push(cyc(CMD_UNLOCK_STEP, key << 4 | 0x3, 0, 0x80));
    }
    cycles.push(cyc(CMD_UNLOCK_STEP, 0x00, 0, 0));
    cycles.push(cyc(CMD_WRITE_REG, 7, 0x8000_0011, 0));
    cycles.push(cyc(CMD_READ_REG, 7, 0, 0));
    cycles.push(cyc(CMD_WRITE_REG, 7, 0x0000_00A5, 0));
    vec![cycles.concat()]
}

/// Plain seeds: register and transaction traffic plus two unlock scaffolds.
/// Neither scaffold carries the stage-zero key in any selector nibble, so
/// the ladder never opens on its own; the first holds the even-stage keys,
/// the second every later-stage key in ladder order.
pub fn starter_corpus() -> Vec<Vec<u8>> {
    let a: Vec<[u8; 8]> = vec![
        cyc(CMD_WRITE_REG, 0, 0x11, 0x00),
        cyc(CMD_WRITE_REG, 1, 0x22, 0x10),
        cyc(CMD_READ_REG, 0, 0, 0x20),
        cyc(CMD_READ_REG, 2, 0, 0x30),
        cyc(CMD_NOP, 0, 0, 0x00),
    ];
    let b: Vec<[u8; 8]> = vec![
        cyc(CMD_BEGIN_TXN, 0, 0, 0),
        cyc(CMD_TXN_DATA, 0, 0x77, 0),
        cyc(CMD_TXN_DATA, 0, 0x78, 0),
        cyc(CMD_COMMIT, 0, 0, 0),
        cyc(CMD_ABORT, 0, 0, 0),
    ];
    let c: Vec<[u8; 8]> = vec![
        cyc(CMD_WRITE_REG, 2, 0x0404_0404, 0x90),
        cyc(CMD_READ_REG, 2, 0, 0x90),
        cyc(CMD_UNLOCK_STEP, 0x01, 0, 0x00),
        cyc(CMD_WRITE_REG, 3, 0x0005_0005, 0xD0),
    ];
    let mut d: Vec<[u8; 8]> = Vec::new();
    for i in 0..16usize {
        let sel = [0xAA, 0xFF, 0x88, 0x33][i % 4];
        d.push(cyc(CMD_UNLOCK_STEP, sel, 0, (i as u8) << 4));
    }
    // Register 7 control traffic; all of it bounces off the lock. The
    // control bytes stay out of the 0x80..=0xBF quadrant and off the 0xA
    // and 0x5 nibbles.
    for ctrl in [0x00u32, 0x11, 0x22, 0x33, 0x44, 0x66, 0x77, 0xCC] {
        d.push(cyc(CMD_WRITE_REG, 7, 0x0100_0000 | ctrl, 0x55));
    }
    d.push(cyc(CMD_READ_REG, 7, 0, 0x20));
    let mut e: Vec<[u8; 8]> = Vec::new();
    for i in 0..24usize {
        let sel = [0x44, 0xAA, 0x11, 0xFF, 0x77, 0x88, 0x22, 0x33][i % 8];
        e.push(cyc(CMD_UNLOCK_STEP, sel, 0, (i as u8) << 2));
    }
    for ctrl in [
        0xDDu32, 0xEE, 0xFF, 0x00, 0x11, 0x22, 0x33, 0x44, 0xCC, 0xC1, 0xD2, 0xE3,
    ] {
        e.push(cyc(CMD_WRITE_REG, 7, 0x0200_0000 | ctrl, 0x00));
    }
    e.push(cyc(CMD_READ_REG, 7, 0, 0x00));
    vec![a.concat(), b.concat(), c.concat(), d.concat(), e.concat()]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(cycles: &[[u8; 8]]) -> PeriphFsm {
        let mut dut = PeriphFsm::new();
        dut.reset().unwrap();
        for c in cycles {
            dut.step(c).unwrap();
        }
        dut
    }

    fn hits(dut: &mut PeriphFsm, point: usize) -> u32 {
        dut.read_coverage().unwrap().hits()[point]
    }

    #[test]
    fn register_seven_is_locked_until_the_full_ladder() {
        let mut dut = run(&[cyc(CMD_WRITE_REG, 7, 0xDEAD, 0)]);
        assert_eq!(dut.reg(7), 0);
        assert_eq!(hits(&mut dut, CP_WRITE_REG7_LOCKED), 1);
        assert_eq!(hits(&mut dut, CP_REG_WRITE + 7), 0);

        let mut cycles: Vec<[u8; 8]> = KEY_NIBBLES
            .iter()
            .map(|&k| cyc(CMD_UNLOCK_STEP, k << 4, 0, 0))
            .collect();
        cycles.push(cyc(CMD_WRITE_REG, 7, 0xBEEF, 0));
        let mut dut = run(&cycles);
        assert_eq!(dut.reg(7), 0xBEEF);
        assert_eq!(hits(&mut dut, CP_UNLOCKED), 1);
        assert_eq!(hits(&mut dut, CP_WRITE_REG7_UNLOCKED), 1);
        assert_eq!(dut.check().unwrap(), CheckResult::Pass);
    }

    #[test]
    fn wrong_key_does_not_advance_the_ladder() {
        let mut dut = run(&[
            cyc(CMD_UNLOCK_STEP, KEY_NIBBLES[0] << 4, 0, 0),
            cyc(CMD_UNLOCK_STEP, 0x00, 0, 0),
            cyc(CMD_UNLOCK_STEP, 0x00, 0, 0),
        ]);
        assert_eq!(hits(&mut dut, CP_UNLOCK_ADVANCE), 1);
        assert_eq!(hits(&mut dut, CP_UNLOCK_ATTEMPT + 1), 2);
        assert_eq!(hits(&mut dut, CP_UNLOCK_ADVANCE + 1), 0);
    }

    #[test]
    fn planted_failure_needs_unlock_and_the_magic_byte() {
        let mut unlocked: Vec<[u8; 8]> = KEY_NIBBLES
            .iter()
            .map(|&k| cyc(CMD_UNLOCK_STEP, k << 4, 0, 0))
            .collect();
        unlocked.push(cyc(CMD_WRITE_REG, 7, 0x0000_00A4, 0));
        let mut dut = run(&unlocked);
        assert_eq!(dut.check().unwrap(), CheckResult::Pass);
        assert_eq!(hits(&mut dut, CP_CTRL_HI_QUAD), 1);
        assert_eq!(hits(&mut dut, CP_CTRL_HI_NIBBLE), 1);
        assert_eq!(hits(&mut dut, CP_CTRL_LO_NIBBLE), 0);
        assert_eq!(hits(&mut dut, CP_CTRL_CLOSE), 1);

        unlocked.push(cyc(CMD_WRITE_REG, 7, 0x9900_A5A5, 0));
        let mut dut = run(&unlocked);
        assert!(dut.check().unwrap().failed());
        assert_eq!(hits(&mut dut, CP_CTRL_LO_NIBBLE), 1);
    }

    #[test]
    fn blocked_writes_reach_neither_decoder_nor_failure() {
        let mut cycles: Vec<[u8; 8]> = KEY_NIBBLES[..UNLOCK_LEN / 2]
            .iter()
            .map(|&k| cyc(CMD_UNLOCK_STEP, k << 4, 0, 0))
            .collect();
        cycles.push(cyc(CMD_WRITE_REG, 7, 0x0000_00A5, 0));
        let mut dut = run(&cycles);
        assert_eq!(dut.check().unwrap(), CheckResult::Pass);
        assert_eq!(hits(&mut dut, CP_WRITE_REG7_LOCKED), 1);
        assert_eq!(hits(&mut dut, CP_CTRL_MAGIC), 0);
        assert_eq!(hits(&mut dut, CP_CTRL_HI_NIBBLE), 0);
        assert_eq!(hits(&mut dut, CP_CTRL_LO_NIBBLE), 0);
    }

    #[test]
    fn either_selector_nibble_can_carry_the_key() {
        let mut dut = run(&[
            cyc(CMD_UNLOCK_STEP, KEY_NIBBLES[0], 0, 0), // low nibble
            cyc(CMD_UNLOCK_STEP, KEY_NIBBLES[1] << 4, 0, 0), // high nibble
        ]);
        assert_eq!(hits(&mut dut, CP_UNLOCK_ADVANCE), 1);
        assert_eq!(hits(&mut dut, CP_UNLOCK_ADVANCE + 1), 1);
    }

    #[test]
    fn commit_length_buckets_split_as_documented() {
        let mut cycles = vec![cyc(CMD_BEGIN_TXN, 0, 0, 0)];
        cycles.extend(std::iter::repeat(cyc(CMD_TXN_DATA, 0, 0, 0)).take(5));
        cycles.push(cyc(CMD_COMMIT, 0, 0, 0));
        let mut dut = run(&cycles);
        assert_eq!(hits(&mut dut, CP_COMMIT_LEN + 3), 1);
        assert_eq!(hits(&mut dut, CP_TXN_DATA), 5);
    }

    #[test]
    fn command_byte_is_decoded_modulo_eight() {
        let mut dut = run(&[cyc(9, 2, 0x31, 0)]); // 9 % 8 == 1: write reg 2
        assert_eq!(dut.reg(2), 0x31);
        assert_eq!(hits(&mut dut, CP_CMD_SEEN + 1), 1);
    }
}

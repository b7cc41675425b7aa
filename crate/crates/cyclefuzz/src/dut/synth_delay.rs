//! A synthetic DUT with a configurable per-cycle delay.
//!
//! It models a slow simulator backend: every stepped cycle busy-waits for
//! the configured delay, so campaign throughput is compute-bound the way it
//! is with real RTL simulators. Coverage is a histogram over the first
//! input byte plus a two-cycle arm/fire pattern, whose fire step is the
//! planted check failure.

use std::time::Instant;

use super::{CheckResult, Dut, DutDescriptor, SynthOptions};
use crate::coverage::CoverageVector;
use crate::grammar::GrammarMode;
use crate::{Error, Result};

pub const WIDTH_BITS: u32 = 64;

/// Histogram buckets occupy the front; the last three points track the
/// arm/fire pattern.
const PATTERN_POINTS: usize = 3;

const ARM_NIBBLE: u8 = 0x5;
const FIRE_NIBBLE: u8 = 0xA;

pub struct SynthDelay {
    descriptor: DutDescriptor,
    options: SynthOptions,
    counters: Vec<u32>,
    armed: bool,
    failure: Option<String>,
}

impl SynthDelay {
    pub fn new(options: SynthOptions) -> Result<Self> {
        if options.coverpoints < PATTERN_POINTS + 1 {
            return Err(Error::Config(format!(
                "synth-delay needs at least {} coverpoints, got {}",
                PATTERN_POINTS + 1,
                options.coverpoints
            )));
        }
        if options.coverpoints > 65_536 {
            return Err(Error::Config(format!(
                "synth-delay caps at 65536 coverpoints, got {}",
                options.coverpoints
            )));
        }
        let descriptor = DutDescriptor {
            name: "synth-delay".to_string(),
            input_width_bits: WIDTH_BITS,
            coverpoint_count: options.coverpoints,
            grammar: GrammarMode::RawBits,
        };
        Ok(SynthDelay {
            descriptor,
            options,
            counters: vec![0; options.coverpoints],
            armed: false,
            failure: None,
        })
    }

    fn buckets(&self) -> usize {
        self.options.coverpoints - PATTERN_POINTS
    }

    fn cp_armed(&self) -> usize {
        self.options.coverpoints - 3
    }

    fn cp_arm_broken(&self) -> usize {
        self.options.coverpoints - 2
    }

    fn cp_fired(&self) -> usize {
        self.options.coverpoints - 1
    }

    fn hit(&mut self, point: usize) {
        self.counters[point] = self.counters[point].saturating_add(1);
    }
}

impl Dut for SynthDelay {
    fn descriptor(&self) -> &DutDescriptor {
        &self.descriptor
    }

    fn reset(&mut self) -> Result<()> {
        self.counters.iter_mut().for_each(|c| *c = 0);
        self.armed = false;
        self.failure = None;
        Ok(())
    }

    fn step(&mut self, cycle: &[u8]) -> Result<()> {
        if !self.options.delay.is_zero() {
            let deadline = Instant::now() + self.options.delay;
            while Instant::now() < deadline {
                std::hint::spin_loop();
            }
        }
        let b0 = cycle.first().copied().unwrap_or(0);
        let bucket = usize::from(b0) * self.buckets() / 256;
        self.hit(bucket);
        let was_armed = self.armed;
        self.armed = b0 >> 4 == ARM_NIBBLE;
        if self.armed {
            self.hit(self.cp_armed());
        }
        if was_armed {
            if b0 >> 4 == FIRE_NIBBLE {
                self.hit(self.cp_fired());
                if self.failure.is_none() {
                    self.failure =
                        Some("fire pattern followed an armed cycle on byte 0".to_string());
                }
            } else {
                self.hit(self.cp_arm_broken());
            }
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

fn cycles_from_leads(leads: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(leads.len() * 8);
    for (i, &b0) in leads.iter().enumerate() {
        out.extend_from_slice(&[b0, i as u8, 0, 0, 0, 0, 0, 0]);
    }
    out
}

/// Inputs covering every histogram bucket and both pattern outcomes for the
/// default 64-point shape; ends with the arm/fire failure.
pub fn witness_corpus() -> Vec<Vec<u8>> {
    let sweep: Vec<u8> = (0..=255u8).collect();
    let pattern = [0x51u8, 0x07, 0x5F, 0xA3];
    vec![cycles_from_leads(&sweep), cycles_from_leads(&pattern)]
}

/// Plain seeds: a few low-value leads, never the arm nibble.
pub fn starter_corpus() -> Vec<Vec<u8>> {
    vec![
        cycles_from_leads(&[0x00, 0x08, 0x21, 0x33]),
        cycles_from_leads(&[0x47, 0x62, 0x70, 0x1F, 0x0A]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::{Duration, Instant};

    fn dut() -> SynthDelay {
        SynthDelay::new(SynthOptions::default()).unwrap()
    }

    #[test]
    fn histogram_buckets_cover_the_byte_range() {
        let mut d = dut();
        d.reset().unwrap();
        for b0 in 0..=255u8 {
            d.step(&[b0, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        }
        let cov = d.read_coverage().unwrap();
        let buckets = d.buckets();
        assert!(cov.hits()[..buckets].iter().all(|&h| h > 0));
        let total: u32 = cov.hits()[..buckets].iter().sum();
        assert_eq!(total, 256);
    }

    #[test]
    fn fire_needs_an_armed_previous_cycle() {
        let mut d = dut();
        d.reset().unwrap();
        d.step(&[0xA1, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        assert_eq!(d.check().unwrap(), CheckResult::Pass);
        d.step(&[0x5C, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        d.step(&[0xA9, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        assert!(d.check().unwrap().failed());
        let cov = d.read_coverage().unwrap();
        assert_eq!(cov.hits()[d.cp_fired()], 1);
    }

    #[test]
    fn broken_arm_is_its_own_point() {
        let mut d = dut();
        d.reset().unwrap();
        d.step(&[0x50, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        d.step(&[0x11, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        let cov = d.read_coverage().unwrap();
        assert_eq!(cov.hits()[d.cp_armed()], 1);
        assert_eq!(cov.hits()[d.cp_arm_broken()], 1);
        assert_eq!(cov.hits()[d.cp_fired()], 0);
    }

    #[test]
    fn too_few_coverpoints_is_rejected() {
        let opts = SynthOptions {
            coverpoints: 3,
            ..SynthOptions::default()
        };
        assert!(SynthDelay::new(opts).is_err());
    }

    #[test]
    fn delay_blocks_each_cycle() {
        let opts = SynthOptions {
            coverpoints: 8,
            delay: Duration::from_millis(2),
        };
        let mut d = SynthDelay::new(opts).unwrap();
        d.reset().unwrap();
        let start = Instant::now();
        for _ in 0..3 {
            d.step(&[0; 8]).unwrap();
        }
        assert!(start.elapsed() >= Duration::from_millis(6));
    }
}

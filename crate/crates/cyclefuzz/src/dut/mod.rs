//! Device-under-test abstraction, bundled models, and coverage readback.
//!
//! A DUT is a cycle-accurate model: `reset` returns it to the power-on state
//! and clears coverage counters, `step` applies one input bit-vector for one
//! clock, `read_coverage` returns the per-coverpoint hit counts accumulated
//! since reset, and `check` reports whether an invariant was violated during
//! the run. Runs are deterministic functions of the stimulus.

pub mod periph_fsm;
pub mod subprocess;
pub mod synth_delay;
pub mod toy_cpu;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::coverage::CoverageVector;
use crate::grammar::{GrammarMode, Stimulus};
use crate::{Error, Result};

/// Static facts a DUT reports about itself.
#[derive(Clone, Debug)]
pub struct DutDescriptor {
    pub name: String,
    pub input_width_bits: u32,
    pub coverpoint_count: usize,
    /// The grammar the DUT's inputs are meant to be generated with; a
    /// campaign may override it.
    pub grammar: GrammarMode,
}

impl DutDescriptor {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Config("DUT name must not be empty".into()));
        }
        if self.input_width_bits == 0 {
            return Err(Error::Config(format!(
                "DUT '{}' declares a zero-bit input",
                self.name
            )));
        }
        if self.coverpoint_count == 0 {
            return Err(Error::ZeroCoverpoints);
        }
        Ok(())
    }
}

/// Outcome of a DUT's end-of-run invariant check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckResult {
    Pass,
    Fail(String),
}

impl CheckResult {
    pub fn failed(&self) -> bool {
        matches!(self, CheckResult::Fail(_))
    }
}

/// A cycle-accurate device model.
pub trait Dut: Send {
    fn descriptor(&self) -> &DutDescriptor;

    /// Power-on state; also zeroes the coverage counters.
    fn reset(&mut self) -> Result<()>;

    /// Applies one cycle's input bit-vector (packed little-endian).
    fn step(&mut self, cycle: &[u8]) -> Result<()>;

    /// Applies a whole stimulus payload. Adapters that talk to an external
    /// process override this to batch the cycles into one exchange.
    fn step_cycles(&mut self, data: &[u8], bytes_per_cycle: usize) -> Result<()> {
        debug_assert_eq!(data.len() % bytes_per_cycle, 0);
        for cycle in data.chunks_exact(bytes_per_cycle) {
            self.step(cycle)?;
        }
        Ok(())
    }

    /// Hit counts per coverpoint since the last reset. This is a plain
    /// counter copy; no report files are involved.
    fn read_coverage(&mut self) -> Result<CoverageVector>;

    /// End-of-run invariant verdict for the run since the last reset.
    fn check(&mut self) -> Result<CheckResult>;
}

/// Everything one stimulus run produces.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub coverage: CoverageVector,
    pub check: CheckResult,
    pub cycles: u64,
}

/// Resets the DUT, applies the stimulus, and reads back coverage and the
/// check verdict. A failing check is a finding, not an error; errors are
/// reserved for broken harnesses (width mismatch, dead subprocess).
pub fn run_stimulus(dut: &mut dyn Dut, stimulus: &Stimulus) -> Result<RunOutcome> {
    let width = dut.descriptor().input_width_bits;
    if stimulus.width_bits() != width {
        return Err(Error::WidthMismatch {
            stimulus: stimulus.width_bits(),
            dut: width,
        });
    }
    dut.reset()?;
    dut.step_cycles(stimulus.data(), stimulus.bytes_per_cycle())?;
    let coverage = dut.read_coverage()?;
    let check = dut.check()?;
    Ok(RunOutcome {
        coverage,
        check,
        cycles: stimulus.cycle_count(),
    })
}

/// How coverage leaves the DUT after each run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CoverageReadback {
    /// Flat hit-count vector read straight from the counters.
    #[default]
    Direct,
    /// Baseline path: serialize a textual coverage report to a scratch file
    /// and parse it back, the way report-scraping harnesses collect coverage.
    TextReport,
}

/// Scratch file for the text-report readback path; one per worker.
#[derive(Debug)]
pub struct ReportScratch {
    path: PathBuf,
}

impl ReportScratch {
    pub fn in_temp_dir(tag: &str) -> Self {
        let path =
            std::env::temp_dir().join(format!("cyclefuzz-cov-{}-{}.txt", std::process::id(), tag));
        ReportScratch { path }
    }

    pub fn at(path: PathBuf) -> Self {
        ReportScratch { path }
    }
}

impl Drop for ReportScratch {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Reads coverage via the chosen path. The text path writes the same counts
/// as a simulator-style report and parses them back, so both paths return
/// identical vectors; only the cost differs.
pub fn collect_coverage(
    dut: &mut dyn Dut,
    readback: CoverageReadback,
    scratch: &ReportScratch,
) -> Result<CoverageVector> {
    let direct = dut.read_coverage()?;
    match readback {
        CoverageReadback::Direct => Ok(direct),
        CoverageReadback::TextReport => {
            let name = dut.descriptor().name.clone();
            let text = format_text_report(&name, &direct);
            fs::write(&scratch.path, &text)?;
            let body = fs::read_to_string(&scratch.path)?;
            parse_text_report(&body, direct.len())
        }
    }
}

/// Simulator-style coverage dump: one annotated line per coverpoint.
pub fn format_text_report(dut_name: &str, coverage: &CoverageVector) -> String {
    let mut out = String::with_capacity(coverage.len() * 48);
    out.push_str("# coverage report\n");
    for (i, &hits) in coverage.hits().iter().enumerate() {
        out.push_str(&format!(
            "C 'ft=cover page={dut_name} name=cp_{i} lineno={}' {hits}\n",
            i * 3 + 7
        ));
    }
    out.push_str(&format!("# total coverpoints: {}\n", coverage.len()));
    out
}

/// Recovers the hit-count vector from a text report.
pub fn parse_text_report(text: &str, expected_len: usize) -> Result<CoverageVector> {
    let mut hits = vec![0u32; expected_len];
    let mut seen = 0usize;
    for line in text.lines() {
        let Some(rest) = line.strip_prefix("C '") else {
            continue;
        };
        let (attrs, tail) = rest
            .split_once('\'')
            .ok_or_else(|| Error::Protocol("unterminated attribute quote in report".into()))?;
        let index = attrs
            .split_whitespace()
            .find_map(|field| field.strip_prefix("name=cp_"))
            .and_then(|digits| digits.parse::<usize>().ok())
            .ok_or_else(|| {
                Error::Protocol(format!("report line without coverpoint name: {line}"))
            })?;
        if index >= expected_len {
            return Err(Error::Protocol(format!(
                "report names coverpoint {index}, DUT has {expected_len}"
            )));
        }
        let count = tail
            .trim()
            .parse::<u32>()
            .map_err(|_| Error::Protocol(format!("bad hit count in report line: {line}")))?;
        hits[index] = count;
        seen += 1;
    }
    if seen != expected_len {
        return Err(Error::Protocol(format!(
            "report covers {seen} of {expected_len} coverpoints"
        )));
    }
    Ok(CoverageVector::new(hits))
}

/// Options for the synthetic-delay DUT, which is shaped by configuration
/// rather than fixed like the other bundled models.
#[derive(Clone, Copy, Debug)]
pub struct SynthOptions {
    pub coverpoints: usize,
    pub delay: Duration,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            coverpoints: 64,
            delay: Duration::ZERO,
        }
    }
}

pub const BUNDLED: [&str; 3] = ["toy-cpu", "periph-fsm", "synth-delay"];

/// Instantiates a bundled DUT by name.
pub fn build_bundled(name: &str, synth: &SynthOptions) -> Result<Box<dyn Dut>> {
    match name {
        "toy-cpu" => Ok(Box::new(toy_cpu::ToyCpu::new())),
        "periph-fsm" => Ok(Box::new(periph_fsm::PeriphFsm::new())),
        "synth-delay" => Ok(Box::new(synth_delay::SynthDelay::new(*synth)?)),
        other => Err(Error::UnknownDut(other.to_string())),
    }
}

/// Chromosomes that together hit every coverpoint of the named bundled DUT,
/// planted bug included. Used as a coverage yardstick and in tests.
pub fn witness_corpus(name: &str) -> Result<Vec<Vec<u8>>> {
    match name {
        "toy-cpu" => Ok(toy_cpu::witness_corpus()),
        "periph-fsm" => Ok(periph_fsm::witness_corpus()),
        "synth-delay" => Ok(synth_delay::witness_corpus()),
        other => Err(Error::UnknownDut(other.to_string())),
    }
}

/// Plain starting seeds for the named bundled DUT: enough to exercise the
/// easy behavior, nowhere near the guarded states.
pub fn starter_corpus(name: &str) -> Result<Vec<Vec<u8>>> {
    match name {
        "toy-cpu" => Ok(toy_cpu::starter_corpus()),
        "periph-fsm" => Ok(periph_fsm::starter_corpus()),
        "synth-delay" => Ok(synth_delay::starter_corpus()),
        other => Err(Error::UnknownDut(other.to_string())),
    }
}

/// True when something under `path` (or the campaign default) can serve as a
/// seeds directory for the named DUT; used by `corpus init`.
pub fn write_starter_corpus(name: &str, dir: &Path) -> Result<usize> {
    let seeds = starter_corpus(name)?;
    let chromosomes: Vec<crate::corpus::Chromosome> = seeds
        .into_iter()
        .enumerate()
        .map(|(i, bytes)| crate::corpus::Chromosome::initial(i as u64, bytes))
        .collect();
    crate::corpus::save_chromosomes(dir, chromosomes.iter())
}

//! Campaign executors: serial reference, lockstep batch pool, and the
//! pipelined pool that overlaps corpus work with simulation.
//!
//! All three run the same loop: generate a batch of inputs, run each input
//! on a DUT instance, fold coverage back into the corpus, repeat until a
//! stop condition. Input generation draws from per-`(iteration, slot)`
//! random streams, and results are merged in slot order, so for one master
//! seed the serial and batch executors produce bit-identical campaigns at
//! any worker count. The pipelined executor trades one iteration of corpus
//! freshness for overlap: while workers simulate iteration `k`, the
//! coordinator merges `k-1` and generates `k+1`.

pub mod bench;
pub mod pingpong;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crate::corpus::{load_corpus, Chromosome, ChromosomeOrigin, CorpusState, FitnessParams};
use crate::coverage::CoverageVector;
use crate::dut::{
    build_bundled, collect_coverage, subprocess::SubprocessDut, CheckResult, CoverageReadback, Dut,
    ReportScratch, SynthOptions,
};
use crate::grammar::{translate, GrammarMode};
use crate::mutation::{get_inputs, MutationParams};
use crate::stats::{Stage, StageShares, StageTimer};
use crate::{Error, Result};

use pingpong::PingPong;

/// Campaign scheduling strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecMode {
    Serial,
    Batch,
    Pipelined,
}

impl ExecMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExecMode::Serial => "serial",
            ExecMode::Batch => "batch",
            ExecMode::Pipelined => "pipelined",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "serial" => Ok(ExecMode::Serial),
            "batch" => Ok(ExecMode::Batch),
            "pipelined" => Ok(ExecMode::Pipelined),
            other => Err(Error::Config(format!(
                "unknown mode '{other}' (expected serial, batch, or pipelined)"
            ))),
        }
    }
}

/// Which device the campaign drives.
#[derive(Clone, Debug)]
pub enum DutSelection {
    Bundled(String),
    Command(Vec<String>),
}

/// Where the initial seeds come from.
#[derive(Clone, Debug)]
pub enum SeedSource {
    Dir(PathBuf),
    Inline(Vec<Vec<u8>>),
}

/// Full campaign configuration.
#[derive(Clone, Debug)]
pub struct FuzzConfig {
    pub dut: DutSelection,
    pub seeds: SeedSource,
    /// Campaign artifacts (report, corpus, findings) land here when set.
    pub output_dir: Option<PathBuf>,
    /// Replaces the DUT's native grammar when set.
    pub grammar_override: Option<GrammarMode>,
    pub mutation: MutationParams,
    pub fitness: FitnessParams,
    pub master_seed: u64,
    pub mode: ExecMode,
    pub threads: usize,
    /// Inputs per iteration; defaults to `threads`.
    pub batch_size: Option<usize>,
    /// Stop after this many mutation iterations (seed-pass iterations are
    /// not counted).
    pub max_iterations: u64,
    /// Stop after this many consecutive iterations without new coverage.
    pub stagnation_window: u64,
    pub max_wall: Option<Duration>,
    pub readback: CoverageReadback,
    pub synth: SynthOptions,
    pub subprocess_timeout: Duration,
    pub max_corpus_seeds: usize,
    /// When false the corpus is frozen after the seed pass; mutated inputs
    /// still run but are never retained. Diagnostic switch.
    pub retain_new_coverage: bool,
    /// Record every generated input and every retention event.
    pub trace_lineage: bool,
}

impl FuzzConfig {
    pub fn new(dut: DutSelection, seeds: SeedSource) -> Self {
        FuzzConfig {
            dut,
            seeds,
            output_dir: None,
            grammar_override: None,
            mutation: MutationParams::default(),
            fitness: FitnessParams::default(),
            master_seed: 1,
            mode: ExecMode::Batch,
            threads: 1,
            batch_size: None,
            max_iterations: u64::MAX,
            stagnation_window: 10_000,
            max_wall: None,
            readback: CoverageReadback::Direct,
            synth: SynthOptions::default(),
            subprocess_timeout: crate::dut::subprocess::DEFAULT_TIMEOUT,
            max_corpus_seeds: 100_000,
            retain_new_coverage: true,
            trace_lineage: false,
        }
    }

    pub fn effective_batch_size(&self) -> usize {
        self.batch_size.unwrap_or(self.threads)
    }

    pub fn validate(&self) -> Result<()> {
        self.mutation.validate()?;
        self.fitness.validate()?;
        if self.threads == 0 {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        if self.mode == ExecMode::Serial && self.threads != 1 {
            return Err(Error::Config(format!(
                "serial mode runs on exactly one thread, got {}",
                self.threads
            )));
        }
        if self.effective_batch_size() == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if self.max_corpus_seeds == 0 {
            return Err(Error::Config("max corpus seeds must be >= 1".into()));
        }
        Ok(())
    }
}

/// Why a campaign stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TerminationReason {
    MaxIterations,
    Stagnation,
    WallClock,
}

impl TerminationReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminationReason::MaxIterations => "max-iterations",
            TerminationReason::Stagnation => "stagnation",
            TerminationReason::WallClock => "wall-clock",
        }
    }
}

/// A run whose end-of-run check failed.
#[derive(Clone, Debug)]
pub struct FindingRecord {
    pub iteration: u64,
    pub chromosome: Chromosome,
    pub reason: String,
}

/// One input generation event, kept when lineage tracing is on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TracedInput {
    pub iteration: u64,
    pub slot: usize,
    pub id: u64,
    pub origin: ChromosomeOrigin,
    pub parents: Option<(u64, Option<u64>)>,
    pub bytes: Vec<u8>,
}

/// Generation and retention history of a campaign.
#[derive(Clone, Debug, Default)]
pub struct LineageTrace {
    pub inputs: Vec<TracedInput>,
    /// `(seed id, iteration retained)` in retention order.
    pub retained: Vec<(u64, u64)>,
}

/// Cumulative coverage growth event: after merging `iteration`, the
/// campaign had `covered` points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrajectoryPoint {
    pub iteration: u64,
    pub covered: usize,
}

/// Everything a campaign reports when it ends.
#[derive(Clone, Debug)]
pub struct CampaignReport {
    pub dut_name: String,
    pub mode: ExecMode,
    pub threads: usize,
    pub batch_size: usize,
    pub master_seed: u64,
    pub grammar_label: String,
    pub coverpoints: usize,
    pub covered: usize,
    pub iterations: u64,
    pub initial_runs: u64,
    pub seeds_retained: usize,
    pub findings: u64,
    pub total_cycles: u64,
    pub stagnation: u64,
    pub termination: TerminationReason,
    pub wall: Duration,
    pub timer: StageTimer,
    pub trajectory: Vec<TrajectoryPoint>,
}

impl CampaignReport {
    pub fn coverage_rate(&self) -> f64 {
        if self.coverpoints == 0 {
            return 0.0;
        }
        self.covered as f64 / self.coverpoints as f64
    }

    pub fn throughput(&self) -> Result<f64> {
        crate::stats::throughput(self.total_cycles, self.wall)
    }

    pub fn shares(&self) -> StageShares {
        self.timer.shares()
    }

    /// Flat `key = value` document. Keys under `time.` and `throughput.`
    /// vary run to run; everything else is deterministic for a fixed
    /// configuration and master seed.
    pub fn to_kv(&self) -> String {
        let shares = self.shares();
        let throughput = self.throughput().unwrap_or(0.0);
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("dut", self.dut_name.clone());
        kv("mode", self.mode.as_str().to_string());
        kv("threads", self.threads.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("master_seed", self.master_seed.to_string());
        kv("grammar", self.grammar_label.clone());
        kv("coverpoints", self.coverpoints.to_string());
        kv("covered", self.covered.to_string());
        kv("coverage_rate", format!("{:.6}", self.coverage_rate()));
        kv("iterations", self.iterations.to_string());
        kv("initial_runs", self.initial_runs.to_string());
        kv("seeds_retained", self.seeds_retained.to_string());
        kv("findings", self.findings.to_string());
        kv("total_cycles", self.total_cycles.to_string());
        kv("stagnation", self.stagnation.to_string());
        kv("termination", self.termination.as_str().to_string());
        kv("time.wall_secs", format!("{:.6}", self.wall.as_secs_f64()));
        kv(
            "time.mutation_secs",
            format!("{:.6}", self.timer.stage(Stage::Mutation).as_secs_f64()),
        );
        kv(
            "time.simulation_secs",
            format!("{:.6}", self.timer.stage(Stage::Simulation).as_secs_f64()),
        );
        kv(
            "time.coverage_collect_secs",
            format!(
                "{:.6}",
                self.timer.stage(Stage::CoverageCollect).as_secs_f64()
            ),
        );
        kv(
            "time.corpus_update_secs",
            format!("{:.6}", self.timer.stage(Stage::CorpusUpdate).as_secs_f64()),
        );
        kv("time.share_mutation", format!("{:.6}", shares.mutation));
        kv("time.share_simulation", format!("{:.6}", shares.simulation));
        kv("time.share_coverage", format!("{:.6}", shares.coverage));
        kv("throughput.cycles_per_sec", format!("{throughput:.3}"));
        out
    }

    /// Human-readable summary of the same facts.
    pub fn human_summary(&self) -> String {
        let shares = self.shares();
        let mut out = String::new();
        out.push_str(&format!("campaign on {}\n", self.dut_name));
        out.push_str(&format!(
            "  mode {} with {} thread(s), batch size {}, master seed {}\n",
            self.mode.as_str(),
            self.threads,
            self.batch_size,
            self.master_seed
        ));
        out.push_str(&format!("  grammar {}\n", self.grammar_label));
        out.push_str(&format!(
            "  coverage {}/{} points ({:.1}%)\n",
            self.covered,
            self.coverpoints,
            self.coverage_rate() * 100.0
        ));
        out.push_str(&format!(
            "  {} mutation iterations after {} seed runs, {} seeds retained\n",
            self.iterations, self.initial_runs, self.seeds_retained
        ));
        out.push_str(&format!("  findings {}\n", self.findings));
        out.push_str(&format!(
            "  stopped by {} after {:.2}s\n",
            self.termination.as_str(),
            self.wall.as_secs_f64()
        ));
        out.push_str(&format!(
            "  stage shares: mutation {:.1}%, simulation {:.1}%, coverage+corpus {:.1}%\n",
            shares.mutation * 100.0,
            shares.simulation * 100.0,
            shares.coverage * 100.0
        ));
        if let Ok(t) = self.throughput() {
            out.push_str(&format!("  throughput {t:.0} cycles/sec\n"));
        }
        out
    }
}

/// Scalar fields of a report, read back from its `key = value` document.
#[derive(Clone, Debug, Default)]
pub struct ReportDigest {
    pub fields: Vec<(String, String)>,
}

impl ReportDigest {
    pub fn parse(text: &str, file: &Path) -> Result<Self> {
        let mut fields = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) => fields.push((k.trim().to_string(), v.trim().to_string())),
                None => {
                    return Err(Error::Report {
                        file: file.to_path_buf(),
                        reason: format!("line {}: expected 'key = value'", lineno + 1),
                    })
                }
            }
        }
        if fields.is_empty() {
            return Err(Error::Report {
                file: file.to_path_buf(),
                reason: "no key = value lines".to_string(),
            });
        }
        Ok(ReportDigest { fields })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

/// A finished campaign: the report plus the artifacts tests and tools poke
/// at directly.
pub struct CampaignOutput {
    pub report: CampaignReport,
    pub corpus: CorpusState,
    pub findings: Vec<FindingRecord>,
    pub lineage: Option<LineageTrace>,
    pub seed_warnings: Vec<String>,
}

struct Batch {
    iteration: u64,
    inputs: Vec<Chromosome>,
}

struct RunDone {
    chromosome: Chromosome,
    coverage: CoverageVector,
    check: CheckResult,
    cycles: u64,
    translate: Duration,
    simulate: Duration,
    collect: Duration,
}

struct Job {
    slot: usize,
    chromosome: Chromosome,
}

struct WorkerReply {
    slot: usize,
    outcome: std::result::Result<RunDone, String>,
}

/// Resets, steps, and reads back one stimulus with per-stage timing.
fn run_timed(
    dut: &mut dyn Dut,
    stimulus: &crate::grammar::Stimulus,
    readback: CoverageReadback,
    scratch: &ReportScratch,
) -> Result<(CoverageVector, CheckResult, Duration, Duration)> {
    let width = dut.descriptor().input_width_bits;
    if stimulus.width_bits() != width {
        return Err(Error::WidthMismatch {
            stimulus: stimulus.width_bits(),
            dut: width,
        });
    }
    let t = Instant::now();
    dut.reset()?;
    dut.step_cycles(stimulus.data(), stimulus.bytes_per_cycle())?;
    let simulate = t.elapsed();
    let t = Instant::now();
    let coverage = collect_coverage(dut, readback, scratch)?;
    let check = dut.check()?;
    let collect = t.elapsed();
    Ok((coverage, check, simulate, collect))
}

fn worker_loop(
    mut dut: Box<dyn Dut>,
    grammar: GrammarMode,
    readback: CoverageReadback,
    index: usize,
    jobs: mpsc::Receiver<Job>,
    replies: mpsc::Sender<WorkerReply>,
) {
    let scratch = ReportScratch::in_temp_dir(&format!("worker{index}"));
    let width = dut.descriptor().input_width_bits;
    for job in jobs {
        let t = Instant::now();
        let stimulus = translate(&job.chromosome, width, &grammar);
        let translate_d = t.elapsed();
        let outcome = match run_timed(dut.as_mut(), &stimulus, readback, &scratch) {
            Ok((coverage, check, simulate, collect)) => Ok(RunDone {
                chromosome: job.chromosome,
                coverage,
                check,
                cycles: stimulus.cycle_count(),
                translate: translate_d,
                simulate,
                collect,
            }),
            Err(e) => Err(e.to_string()),
        };
        if replies
            .send(WorkerReply {
                slot: job.slot,
                outcome,
            })
            .is_err()
        {
            return;
        }
    }
}

struct Pool {
    job_txs: Vec<mpsc::Sender<Job>>,
    replies: mpsc::Receiver<WorkerReply>,
    handles: Vec<JoinHandle<()>>,
}

impl Pool {
    fn spawn(duts: Vec<Box<dyn Dut>>, grammar: &GrammarMode, readback: CoverageReadback) -> Pool {
        let (reply_tx, replies) = mpsc::channel();
        let mut job_txs = Vec::with_capacity(duts.len());
        let mut handles = Vec::with_capacity(duts.len());
        for (index, dut) in duts.into_iter().enumerate() {
            let (tx, rx) = mpsc::channel();
            job_txs.push(tx);
            let grammar = grammar.clone();
            let reply_tx = reply_tx.clone();
            handles.push(std::thread::spawn(move || {
                worker_loop(dut, grammar, readback, index, rx, reply_tx)
            }));
        }
        Pool {
            job_txs,
            replies,
            handles,
        }
    }

    fn dispatch(&self, inputs: Vec<Chromosome>) -> Result<usize> {
        let workers = self.job_txs.len();
        let n = inputs.len();
        for (slot, chromosome) in inputs.into_iter().enumerate() {
            self.job_txs[slot % workers]
                .send(Job { slot, chromosome })
                .map_err(|_| Error::Worker {
                    slot,
                    cause: "worker exited before accepting work".to_string(),
                })?;
        }
        Ok(n)
    }

    /// Waits for `n` replies and returns them in slot order. On a worker
    /// failure the remaining replies are drained first so the pool stays
    /// usable for shutdown.
    fn collect(&self, n: usize) -> Result<Vec<RunDone>> {
        let mut out: Vec<Option<RunDone>> = (0..n).map(|_| None).collect();
        let mut first_err: Option<Error> = None;
        for _ in 0..n {
            match self.replies.recv() {
                Ok(reply) => match reply.outcome {
                    Ok(done) => out[reply.slot] = Some(done),
                    Err(cause) => {
                        if first_err.is_none() {
                            first_err = Some(Error::Worker {
                                slot: reply.slot,
                                cause,
                            });
                        }
                    }
                },
                Err(_) => {
                    if first_err.is_none() {
                        first_err = Some(Error::Worker {
                            slot: 0,
                            cause: "worker exited unexpectedly".to_string(),
                        });
                    }
                    break;
                }
            }
        }
        if let Some(e) = first_err {
            return Err(e);
        }
        Ok(out
            .into_iter()
            .map(|d| d.expect("collected every slot"))
            .collect())
    }

    fn shutdown(self) {
        drop(self.job_txs);
        drop(self.replies);
        for handle in self.handles {
            let _ = handle.join();
        }
    }
}

/// Mutable campaign state shared by the three executors.
struct Campaign<'a> {
    cfg: &'a FuzzConfig,
    grammar: GrammarMode,
    corpus: CorpusState,
    timer: StageTimer,
    wall_start: Instant,
    findings: Vec<FindingRecord>,
    trajectory: Vec<TrajectoryPoint>,
    lineage: Option<LineageTrace>,
    global_iter: u64,
    /// Ordinal of generation events that actually produced inputs. Bubbles
    /// are skipped, so under a frozen corpus the pipelined executor draws
    /// the same random streams as the batch executor. In bubble-free runs
    /// this equals the iteration index.
    stream_ordinal: u64,
    mutation_iters: u64,
    initial_runs: u64,
}

impl<'a> Campaign<'a> {
    fn should_stop(&self) -> Option<TerminationReason> {
        if let Some(limit) = self.cfg.max_wall {
            if self.wall_start.elapsed() >= limit {
                return Some(TerminationReason::WallClock);
            }
        }
        if self.corpus.stagnation() >= self.cfg.stagnation_window {
            return Some(TerminationReason::Stagnation);
        }
        if !self.corpus.has_pending_initial() && self.mutation_iters >= self.cfg.max_iterations {
            return Some(TerminationReason::MaxIterations);
        }
        None
    }

    fn generate(&mut self, count: usize) -> Result<Batch> {
        let iteration = self.global_iter;
        self.global_iter += 1;
        if !self.corpus.has_pending_initial() && self.corpus.seeds().is_empty() {
            // Pipeline bubble: every initial seed is still in flight, so
            // there is nothing to select from yet. The iteration number is
            // consumed; no inputs run.
            return Ok(Batch {
                iteration,
                inputs: Vec::new(),
            });
        }
        let pure_mutation = !self.corpus.has_pending_initial();
        if pure_mutation {
            self.mutation_iters += 1;
        }
        let ordinal = self.stream_ordinal;
        self.stream_ordinal += 1;
        let t = Instant::now();
        let inputs = get_inputs(
            &mut self.corpus,
            count,
            &self.cfg.mutation,
            self.cfg.master_seed,
            ordinal,
        )?;
        self.timer.record(Stage::Mutation, t.elapsed());
        if let Some(trace) = &mut self.lineage {
            for (slot, c) in inputs.iter().enumerate() {
                trace.inputs.push(TracedInput {
                    iteration,
                    slot,
                    id: c.id,
                    origin: c.origin,
                    parents: c.parents,
                    bytes: c.bytes.clone(),
                });
            }
        }
        Ok(Batch { iteration, inputs })
    }

    fn merge(&mut self, iteration: u64, runs: Vec<RunDone>) -> Result<()> {
        if runs.is_empty() {
            return Ok(());
        }
        let mut pairs = Vec::with_capacity(runs.len());
        for run in runs {
            self.timer.record(Stage::Mutation, run.translate);
            self.timer.record(Stage::Simulation, run.simulate);
            self.timer.record(Stage::CoverageCollect, run.collect);
            self.timer.cycles += run.cycles;
            if run.chromosome.origin == ChromosomeOrigin::InitialSeed {
                self.initial_runs += 1;
            }
            if let CheckResult::Fail(reason) = run.check {
                self.findings.push(FindingRecord {
                    iteration,
                    chromosome: run.chromosome.clone(),
                    reason,
                });
            }
            pairs.push((run.chromosome, run.coverage));
        }
        let before = self.corpus.seeds().len();
        let t = Instant::now();
        let summary = self.corpus.update_seed_corpus(iteration, pairs)?;
        self.timer.record(Stage::CorpusUpdate, t.elapsed());
        self.timer.iterations += 1;
        if summary.new_points > 0 {
            self.trajectory.push(TrajectoryPoint {
                iteration,
                covered: self.corpus.cumulative().covered_count(),
            });
        }
        if let Some(trace) = &mut self.lineage {
            for seed in &self.corpus.seeds()[before..] {
                trace.retained.push((seed.chromosome.id, iteration));
            }
        }
        Ok(())
    }

    /// Generate, run, merge in strict alternation until a stop condition.
    fn run_lockstep<F>(&mut self, mut run_batch: F) -> Result<TerminationReason>
    where
        F: FnMut(&mut Self, Vec<Chromosome>) -> Result<Vec<RunDone>>,
    {
        loop {
            if let Some(term) = self.should_stop() {
                return Ok(term);
            }
            let batch = self.generate(self.cfg.effective_batch_size())?;
            let runs = run_batch(self, batch.inputs)?;
            self.merge(batch.iteration, runs)?;
        }
    }

    /// Overlapped pipeline, uniform from iteration 0: each step dispatches
    /// iteration `k`, merges `k-1`, generates `k+1`, then collects `k`.
    /// Inputs for `k+1` are drawn from state merged through `k-1`, so a
    /// seed retained at iteration `j` can first parent a mutation at `j+2`.
    /// Stop decisions also look only at the merged state. The epilogue
    /// merges the in-flight iteration before returning.
    fn run_pipelined(&mut self, pool: &Pool) -> Result<TerminationReason> {
        if let Some(term) = self.should_stop() {
            return Ok(term);
        }
        let mut staged: PingPong<Batch> = PingPong::new();
        let mut collected: PingPong<Vec<RunDone>> = PingPong::new();
        let first = self.generate(self.cfg.effective_batch_size())?;
        let mut phase = first.iteration;
        staged.put(phase, first);
        let mut pending_merge: Option<u64> = None;

        loop {
            let batch = staged.take(phase);
            let dispatched = pool.dispatch(batch.inputs)?;
            if let Some(prev) = pending_merge.take() {
                let runs = collected.take(prev);
                self.merge(prev, runs)?;
            }
            let next = match self.should_stop() {
                Some(term) => Err(term),
                None => Ok(self.generate(self.cfg.effective_batch_size())?),
            };
            let runs = pool.collect(dispatched)?;
            match next {
                Ok(next_batch) => {
                    collected.put(phase, runs);
                    pending_merge = Some(phase);
                    phase = next_batch.iteration;
                    staged.put(phase, next_batch);
                }
                Err(term) => {
                    self.merge(phase, runs)?;
                    return Ok(term);
                }
            }
        }
    }
}

fn build_duts(cfg: &FuzzConfig, count: usize) -> Result<Vec<Box<dyn Dut>>> {
    (0..count)
        .map(|_| match &cfg.dut {
            DutSelection::Bundled(name) => build_bundled(name, &cfg.synth),
            DutSelection::Command(argv) => {
                Ok(Box::new(SubprocessDut::spawn(argv, cfg.subprocess_timeout)?) as Box<dyn Dut>)
            }
        })
        .collect()
}

fn load_seeds(cfg: &FuzzConfig) -> Result<(Vec<Chromosome>, Vec<String>)> {
    match &cfg.seeds {
        SeedSource::Dir(dir) => {
            let loaded = load_corpus(dir, cfg.mutation.max_chromosome_bytes)?;
            Ok((loaded.chromosomes, loaded.warnings))
        }
        SeedSource::Inline(seeds) => {
            let chromosomes = seeds
                .iter()
                .enumerate()
                .map(|(i, bytes)| Chromosome::initial(i as u64, bytes.clone()))
                .collect::<Vec<_>>();
            Ok((chromosomes, Vec::new()))
        }
    }
}

/// Runs a whole campaign and, when an output directory is configured,
/// writes the report, coverage snapshot, corpus, and findings into it. The
/// corpus is flushed even when the campaign fails partway.
pub fn run_campaign(cfg: &FuzzConfig) -> Result<CampaignOutput> {
    cfg.validate()?;
    let worker_count = match cfg.mode {
        ExecMode::Serial => 1,
        _ => cfg.threads,
    };
    let mut duts = build_duts(cfg, worker_count)?;
    let descriptor = duts[0].descriptor().clone();
    descriptor.validate()?;
    let grammar = cfg
        .grammar_override
        .clone()
        .unwrap_or_else(|| descriptor.grammar.clone());
    let (chromosomes, seed_warnings) = load_seeds(cfg)?;
    let mut corpus = CorpusState::new(
        descriptor.coverpoint_count,
        chromosomes,
        cfg.fitness,
        cfg.max_corpus_seeds,
    )?;
    corpus.set_retain_new_coverage(cfg.retain_new_coverage);

    let mut campaign = Campaign {
        cfg,
        grammar: grammar.clone(),
        corpus,
        timer: StageTimer::default(),
        wall_start: Instant::now(),
        findings: Vec::new(),
        trajectory: Vec::new(),
        lineage: cfg.trace_lineage.then(LineageTrace::default),
        global_iter: 0,
        stream_ordinal: 0,
        mutation_iters: 0,
        initial_runs: 0,
    };

    let outcome = match cfg.mode {
        ExecMode::Serial => {
            let mut dut = duts.pop().expect("one DUT was built");
            let scratch = ReportScratch::in_temp_dir("serial");
            let readback = cfg.readback;
            let grammar = campaign.grammar.clone();
            let width = dut.descriptor().input_width_bits;
            campaign.run_lockstep(move |_c, inputs| {
                let mut runs = Vec::with_capacity(inputs.len());
                for chromosome in inputs {
                    let t = Instant::now();
                    let stimulus = translate(&chromosome, width, &grammar);
                    let translate_d = t.elapsed();
                    let (coverage, check, simulate, collect) =
                        run_timed(dut.as_mut(), &stimulus, readback, &scratch)?;
                    runs.push(RunDone {
                        chromosome,
                        coverage,
                        check,
                        cycles: stimulus.cycle_count(),
                        translate: translate_d,
                        simulate,
                        collect,
                    });
                }
                Ok(runs)
            })
        }
        ExecMode::Batch => {
            let pool = Pool::spawn(duts, &campaign.grammar, cfg.readback);
            let result = campaign.run_lockstep(|_c, inputs| {
                let n = pool.dispatch(inputs)?;
                pool.collect(n)
            });
            pool.shutdown();
            result
        }
        ExecMode::Pipelined => {
            let pool = Pool::spawn(duts, &campaign.grammar, cfg.readback);
            let result = campaign.run_pipelined(&pool);
            pool.shutdown();
            result
        }
    };

    let wall = campaign.wall_start.elapsed();
    let termination = match outcome {
        Ok(term) => term,
        Err(e) => {
            // Keep what the campaign learned: flush the corpus and findings
            // before surfacing the error.
            if let Some(dir) = &cfg.output_dir {
                let _ = fs::create_dir_all(dir);
                let _ = campaign.corpus.save(&dir.join("corpus"));
                let _ = write_findings(&dir.join("findings"), &campaign.findings);
            }
            return Err(e);
        }
    };

    let report = CampaignReport {
        dut_name: descriptor.name.clone(),
        mode: cfg.mode,
        threads: cfg.threads,
        batch_size: cfg.effective_batch_size(),
        master_seed: cfg.master_seed,
        grammar_label: grammar.label().to_string(),
        coverpoints: campaign.corpus.cumulative().coverpoints(),
        covered: campaign.corpus.cumulative().covered_count(),
        iterations: campaign.mutation_iters,
        initial_runs: campaign.initial_runs,
        seeds_retained: campaign.corpus.seeds().len(),
        findings: campaign.findings.len() as u64,
        total_cycles: campaign.timer.cycles,
        stagnation: campaign.corpus.stagnation(),
        termination,
        wall,
        timer: campaign.timer,
        trajectory: campaign.trajectory.clone(),
    };

    if let Some(dir) = &cfg.output_dir {
        write_outputs(dir, &report, &campaign.corpus, &campaign.findings)?;
    }

    Ok(CampaignOutput {
        report,
        corpus: campaign.corpus,
        findings: campaign.findings,
        lineage: campaign.lineage,
        seed_warnings,
    })
}

pub const REPORT_KV_FILE: &str = "report.kv";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const COVERAGE_FILE: &str = "coverage.tsv";
pub const TRAJECTORY_FILE: &str = "trajectory.tsv";
pub const CORPUS_DIR: &str = "corpus";
pub const FINDINGS_DIR: &str = "findings";

fn write_findings(dir: &Path, findings: &[FindingRecord]) -> Result<()> {
    if findings.is_empty() {
        return Ok(());
    }
    fs::create_dir_all(dir)?;
    let mut log = String::new();
    for (k, f) in findings.iter().enumerate() {
        fs::write(dir.join(format!("finding-{k}.bin")), &f.chromosome.bytes)?;
        log.push_str(&format!(
            "{k}\t{}\t{}\t{}\n",
            f.iteration, f.chromosome.id, f.reason
        ));
    }
    fs::write(dir.join("findings.txt"), log)?;
    Ok(())
}

fn write_outputs(
    dir: &Path,
    report: &CampaignReport,
    corpus: &CorpusState,
    findings: &[FindingRecord],
) -> Result<()> {
    fs::create_dir_all(dir)?;
    corpus.save(&dir.join(CORPUS_DIR))?;
    write_findings(&dir.join(FINDINGS_DIR), findings)?;
    let mut snapshot = Vec::new();
    corpus.cumulative().write_snapshot(&mut snapshot)?;
    fs::write(dir.join(COVERAGE_FILE), snapshot)?;
    let mut trajectory = String::from("iteration\tcovered\n");
    for p in &report.trajectory {
        trajectory.push_str(&format!("{}\t{}\n", p.iteration, p.covered));
    }
    fs::write(dir.join(TRAJECTORY_FILE), trajectory)?;
    fs::write(dir.join(REPORT_KV_FILE), report.to_kv())?;
    fs::write(dir.join(REPORT_TEXT_FILE), report.human_summary())?;
    Ok(())
}

//! Command-line front end.
//!
//! Subcommands: `run` (one campaign), `bench` (mode x thread throughput
//! sweep), `report` (summarize a report file), `corpus` (inspect, generate,
//! or re-execute seed corpora), `list-duts`, and the hidden `dut-serve`
//! (expose a bundled DUT over the wire protocol, used to exercise the
//! subprocess adapter against this same binary).
//!
//! Every flag has a config-file equivalent (`--config`, flat `key = value`
//! lines, `#` comments); explicit flags win over the file. Exit codes:
//! 0 success, 1 campaign or file error, 2 usage error, 3 campaign completed
//! with check findings recorded.

use std::fmt::Display;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::{ArgAction, Args, Parser, Subcommand};

use crate::config::ConfigFile;
use crate::corpus::{load_corpus, FitnessParams};
use crate::coverage::{parse_snapshot, CumulativeCoverage};
use crate::dut::{
    build_bundled, run_stimulus, starter_corpus, subprocess::serve, write_starter_corpus,
    CoverageReadback, SynthOptions, BUNDLED,
};
use crate::executor::{
    bench, run_campaign, DutSelection, ExecMode, FuzzConfig, ReportDigest, SeedSource,
    COVERAGE_FILE, REPORT_KV_FILE,
};
use crate::grammar::{decode_report, translate, GrammarMode, TemplateTable};
use crate::mutation::{HavocParams, MutationParams};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FINDINGS: i32 = 3;

/// Config keys the schema accepts; anything else is a typo and an error.
const KNOWN_KEYS: &[&str] = &[
    "dut",
    "dut_cmd",
    "seeds",
    "output",
    "mode",
    "threads",
    "batch_size",
    "max_iters",
    "stagnation",
    "master_seed",
    "max_wall_secs",
    "grammar",
    "readback",
    "p_splice",
    "max_stack_exp",
    "max_chromosome_bytes",
    "favor",
    "epsilon_fitness",
    "max_corpus_seeds",
    "retain_new_coverage",
    "synth_coverpoints",
    "synth_delay_micros",
    "dut_timeout_secs",
    "bench_threads",
    "bench_modes",
    "bench_budget_secs",
    "bench_csv",
];

#[derive(Parser, Debug)]
#[command(
    name = "cyclefuzz",
    version,
    about = "Coverage-guided mutational fuzzer for cycle-stepping hardware models"
)]
pub struct Cli {
    /// Config file with `key = value` defaults for any flag.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Print extra detail (repeatable).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    /// Directory for campaign artifacts (report, corpus, findings).
    #[arg(long, global = true, value_name = "DIR")]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one fuzzing campaign.
    Run(RunArgs),
    /// Sweep executor modes and worker counts, report throughput.
    Bench(BenchArgs),
    /// Summarize a campaign report file.
    Report(ReportArgs),
    /// Inspect, generate, or re-execute a seed corpus.
    Corpus(CorpusArgs),
    /// List the bundled DUTs.
    ListDuts,
    /// Serve a bundled DUT over the stdio wire protocol.
    #[command(hide = true)]
    DutServe(DutServeArgs),
}

/// Flags shared by `run` and `bench`.
#[derive(Args, Debug, Clone, Default)]
pub struct EngineArgs {
    /// Bundled DUT name (see list-duts).
    #[arg(long, value_name = "NAME")]
    pub dut: Option<String>,

    /// External DUT command speaking the wire protocol on stdio.
    #[arg(long, value_name = "ARGV", num_args = 1.., conflicts_with = "dut",
          allow_hyphen_values = true)]
    pub dut_cmd: Option<Vec<String>>,

    /// Directory of seed-<id>.bin files (optional manifest.txt).
    #[arg(long, value_name = "DIR")]
    pub seeds: Option<PathBuf>,

    /// Input grammar: `raw` or `templates:<file>`. Default: the DUT's own.
    #[arg(long, value_name = "SPEC")]
    pub grammar: Option<String>,

    /// Coverage readout: `direct` or `text-report`.
    #[arg(long, value_name = "KIND")]
    pub readback: Option<String>,

    /// Probability a generated input is a splice of two parents.
    #[arg(long, value_name = "P")]
    pub p_splice: Option<f64>,

    /// Havoc stacks `2^k` edits, `k` uniform in `0..=max-stack-exp`.
    #[arg(long, value_name = "K")]
    pub max_stack_exp: Option<u32>,

    /// Chromosome length cap in bytes.
    #[arg(long, value_name = "BYTES")]
    pub max_chromosome_bytes: Option<usize>,

    /// Fitness multiplier for seeds that uniquely cover a point.
    #[arg(long, value_name = "X")]
    pub favor: Option<f64>,

    /// Fitness floor for zero-coverage seeds.
    #[arg(long, value_name = "EPS")]
    pub epsilon_fitness: Option<f64>,

    /// Abort if the corpus would exceed this many seeds.
    #[arg(long, value_name = "N")]
    pub max_corpus_seeds: Option<usize>,

    /// Root seed for every random stream in the campaign.
    #[arg(long, value_name = "SEED")]
    pub master_seed: Option<u64>,

    /// synth-delay: coverpoint count.
    #[arg(long, value_name = "N")]
    pub synth_coverpoints: Option<usize>,

    /// synth-delay: busy-wait per cycle, microseconds.
    #[arg(long, value_name = "US")]
    pub synth_delay_micros: Option<u64>,

    /// Reply timeout for subprocess DUTs, seconds.
    #[arg(long, value_name = "SECS")]
    pub dut_timeout_secs: Option<f64>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub engine: EngineArgs,

    /// Executor: serial, batch, or pipelined.
    #[arg(long, value_name = "MODE")]
    pub mode: Option<String>,

    /// Worker count.
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,

    /// Inputs per iteration (default: threads).
    #[arg(long, value_name = "N")]
    pub batch_size: Option<usize>,

    /// Mutation-iteration budget.
    #[arg(long, value_name = "N")]
    pub max_iters: Option<u64>,

    /// Stop after this many iterations without new coverage.
    #[arg(long, value_name = "N")]
    pub stagnation: Option<u64>,

    /// Wall-clock budget, seconds.
    #[arg(long, value_name = "SECS")]
    pub max_wall_secs: Option<f64>,

    /// Freeze the corpus after the seed pass (diagnostic).
    #[arg(long, action = ArgAction::SetTrue)]
    pub no_retain: bool,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub engine: EngineArgs,

    /// Comma-separated worker counts, e.g. 1,2,4.
    #[arg(long, value_name = "LIST")]
    pub threads: Option<String>,

    /// Comma-separated executor modes.
    #[arg(long, value_name = "LIST")]
    pub modes: Option<String>,

    /// Wall-clock budget per sweep point, seconds.
    #[arg(long, value_name = "SECS")]
    pub budget_secs: Option<f64>,

    /// Also write the table as CSV.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Campaign output directory or report.kv file.
    pub path: PathBuf,
}

#[derive(Args, Debug)]
pub struct CorpusArgs {
    /// Corpus directory (or a campaign output directory).
    pub path: PathBuf,

    /// Write the named DUT's starter corpus into the directory.
    #[arg(long, action = ArgAction::SetTrue)]
    pub init: bool,

    /// Re-execute every seed and compare against recorded coverage.
    #[arg(long, action = ArgAction::SetTrue)]
    pub recompute: bool,

    /// Print each seed's decoded stimulus.
    #[arg(long, action = ArgAction::SetTrue)]
    pub decode: bool,

    /// Bundled DUT (required for --init, --recompute, --decode).
    #[arg(long, value_name = "NAME")]
    pub dut: Option<String>,

    /// Grammar override: `raw` or `templates:<file>`.
    #[arg(long, value_name = "SPEC")]
    pub grammar: Option<String>,
}

#[derive(Args, Debug)]
pub struct DutServeArgs {
    /// Bundled DUT name.
    #[arg(long, value_name = "NAME")]
    pub dut: String,

    #[arg(long, value_name = "N")]
    pub synth_coverpoints: Option<usize>,

    #[arg(long, value_name = "US")]
    pub synth_delay_micros: Option<u64>,
}

#[derive(Debug)]
enum CmdError {
    Usage(String),
    Failure(String),
}

type CmdResult<T> = std::result::Result<T, CmdError>;

fn usage(msg: impl Into<String>) -> CmdError {
    CmdError::Usage(msg.into())
}

fn failure(err: impl Display) -> CmdError {
    CmdError::Failure(err.to_string())
}

/// Entry point: parses argv, runs the command, maps errors to exit codes.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(CmdError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run with --help for usage");
            EXIT_USAGE
        }
        Err(CmdError::Failure(msg)) => {
            eprintln!("error: {msg}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> CmdResult<i32> {
    let file = match &cli.config {
        Some(path) => {
            let file = ConfigFile::load(path).map_err(failure_is_usage)?;
            file.require_known(KNOWN_KEYS).map_err(failure_is_usage)?;
            Some(file)
        }
        None => None,
    };
    let resolver = Resolver {
        file: file.as_ref(),
    };
    match &cli.command {
        Command::Run(args) => cmd_run(&cli, args, &resolver),
        Command::Bench(args) => cmd_bench(&cli, args, &resolver),
        Command::Report(args) => cmd_report(args),
        Command::Corpus(args) => cmd_corpus(args),
        Command::ListDuts => cmd_list_duts(),
        Command::DutServe(args) => cmd_dut_serve(args),
    }
}

fn failure_is_usage(err: Error) -> CmdError {
    usage(err.to_string())
}

struct Resolver<'a> {
    file: Option<&'a ConfigFile>,
}

impl<'a> Resolver<'a> {
    /// CLI value if given, else the config file's, else None.
    fn value<T>(&self, cli: Option<T>, key: &str) -> CmdResult<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if cli.is_some() {
            return Ok(cli);
        }
        match self.file {
            Some(f) => f.get_parse(key).map_err(failure_is_usage),
            None => Ok(None),
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.file.and_then(|f| f.get(key))
    }

    fn bool_value(&self, key: &str) -> CmdResult<Option<bool>> {
        match self.file {
            Some(f) => f.get_bool(key).map_err(failure_is_usage),
            None => Ok(None),
        }
    }
}

fn parse_grammar_spec(spec: &str) -> CmdResult<GrammarMode> {
    if spec == "raw" {
        return Ok(GrammarMode::RawBits);
    }
    if let Some(path) = spec.strip_prefix("templates:") {
        let table = TemplateTable::from_file(Path::new(path)).map_err(failure_is_usage)?;
        return Ok(GrammarMode::Transaction(table));
    }
    Err(usage(format!(
        "bad grammar '{spec}' (expected 'raw' or 'templates:<file>')"
    )))
}

fn parse_readback(kind: &str) -> CmdResult<CoverageReadback> {
    match kind {
        "direct" => Ok(CoverageReadback::Direct),
        "text-report" => Ok(CoverageReadback::TextReport),
        other => Err(usage(format!(
            "bad readback '{other}' (expected 'direct' or 'text-report')"
        ))),
    }
}

fn parse_secs(value: f64, what: &str) -> CmdResult<Duration> {
    if !value.is_finite() || value < 0.0 {
        return Err(usage(format!("{what} must be a non-negative number")));
    }
    Ok(Duration::from_secs_f64(value))
}

fn resolve_dut(engine: &EngineArgs, resolver: &Resolver) -> CmdResult<DutSelection> {
    if let Some(argv) = &engine.dut_cmd {
        return Ok(DutSelection::Command(argv.clone()));
    }
    if let Some(name) = &engine.dut {
        return resolve_bundled_name(name);
    }
    if let Some(cmd) = resolver.raw("dut_cmd") {
        let argv: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
        if argv.is_empty() {
            return Err(usage("config key 'dut_cmd' is empty"));
        }
        return Ok(DutSelection::Command(argv));
    }
    if let Some(name) = resolver.raw("dut") {
        return resolve_bundled_name(name);
    }
    Err(usage(
        "no DUT selected: pass --dut <name> or --dut-cmd <command>",
    ))
}

fn resolve_bundled_name(name: &str) -> CmdResult<DutSelection> {
    if !BUNDLED.contains(&name) {
        return Err(usage(format!(
            "unknown DUT '{name}' (bundled: {})",
            BUNDLED.join(", ")
        )));
    }
    Ok(DutSelection::Bundled(name.to_string()))
}

/// Builds the campaign configuration shared by `run` and `bench` from
/// flags, config file, and defaults, in that precedence order.
fn resolve_engine(
    cli: &Cli,
    engine: &EngineArgs,
    resolver: &Resolver,
    seeds_required: bool,
) -> CmdResult<FuzzConfig> {
    let dut = resolve_dut(engine, resolver)?;

    let seeds_dir = resolver.value(engine.seeds.clone(), "seeds")?;
    let seeds = match seeds_dir {
        Some(dir) => {
            if !dir.is_dir() {
                return Err(usage(format!(
                    "seeds directory {} does not exist",
                    dir.display()
                )));
            }
            SeedSource::Dir(dir)
        }
        None if seeds_required => {
            return Err(usage("no seeds directory: pass --seeds <dir>"));
        }
        None => match &dut {
            DutSelection::Bundled(name) => {
                SeedSource::Inline(starter_corpus(name).map_err(failure)?)
            }
            DutSelection::Command(_) => {
                return Err(usage("an external DUT needs --seeds <dir>"));
            }
        },
    };

    let mut cfg = FuzzConfig::new(dut, seeds);

    if let Some(spec) = resolver.value(engine.grammar.clone(), "grammar")? {
        cfg.grammar_override = Some(parse_grammar_spec(&spec)?);
    }
    if let Some(kind) = resolver.value(engine.readback.clone(), "readback")? {
        cfg.readback = parse_readback(&kind)?;
    }

    let havoc = HavocParams {
        max_stack_exp: resolver
            .value(engine.max_stack_exp, "max_stack_exp")?
            .unwrap_or(HavocParams::default().max_stack_exp),
        ..HavocParams::default()
    };
    cfg.mutation = MutationParams {
        havoc,
        p_splice: resolver
            .value(engine.p_splice, "p_splice")?
            .unwrap_or(MutationParams::default().p_splice),
        max_chromosome_bytes: resolver
            .value(engine.max_chromosome_bytes, "max_chromosome_bytes")?
            .unwrap_or(MutationParams::default().max_chromosome_bytes),
    };
    cfg.fitness = FitnessParams {
        favor: resolver
            .value(engine.favor, "favor")?
            .unwrap_or(FitnessParams::default().favor),
        epsilon_fitness: resolver
            .value(engine.epsilon_fitness, "epsilon_fitness")?
            .unwrap_or(FitnessParams::default().epsilon_fitness),
    };
    if let Some(n) = resolver.value(engine.max_corpus_seeds, "max_corpus_seeds")? {
        cfg.max_corpus_seeds = n;
    }
    if let Some(seed) = resolver.value(engine.master_seed, "master_seed")? {
        cfg.master_seed = seed;
    }
    cfg.synth = SynthOptions {
        coverpoints: resolver
            .value(engine.synth_coverpoints, "synth_coverpoints")?
            .unwrap_or(SynthOptions::default().coverpoints),
        delay: Duration::from_micros(
            resolver
                .value(engine.synth_delay_micros, "synth_delay_micros")?
                .unwrap_or(0),
        ),
    };
    if let Some(secs) = resolver.value(engine.dut_timeout_secs, "dut_timeout_secs")? {
        let timeout = parse_secs(secs, "dut timeout")?;
        if timeout.is_zero() {
            return Err(usage("dut timeout must be positive"));
        }
        cfg.subprocess_timeout = timeout;
    }
    cfg.output_dir = resolver.value(cli.output.clone(), "output")?;
    Ok(cfg)
}

fn cmd_run(cli: &Cli, args: &RunArgs, resolver: &Resolver) -> CmdResult<i32> {
    let mut cfg = resolve_engine(cli, &args.engine, resolver, true)?;
    if let Some(mode) = resolver.value(args.mode.clone(), "mode")? {
        cfg.mode = ExecMode::parse(&mode).map_err(failure_is_usage)?;
    }
    if let Some(threads) = resolver.value(args.threads, "threads")? {
        cfg.threads = threads;
    }
    if cfg.mode == ExecMode::Serial && args.threads.is_none() {
        cfg.threads = 1;
    }
    cfg.batch_size = resolver.value(args.batch_size, "batch_size")?;
    if let Some(n) = resolver.value(args.max_iters, "max_iters")? {
        cfg.max_iterations = n;
    }
    if let Some(n) = resolver.value(args.stagnation, "stagnation")? {
        cfg.stagnation_window = n;
    }
    if let Some(secs) = resolver.value(args.max_wall_secs, "max_wall_secs")? {
        cfg.max_wall = Some(parse_secs(secs, "wall-clock budget")?);
    }
    if args.no_retain {
        cfg.retain_new_coverage = false;
    } else if let Some(retain) = resolver.bool_value("retain_new_coverage")? {
        cfg.retain_new_coverage = retain;
    }
    if cfg.output_dir.is_none() {
        cfg.output_dir = Some(PathBuf::from("fuzz-out"));
    }
    cfg.validate().map_err(failure_is_usage)?;

    let out = run_campaign(&cfg).map_err(failure)?;
    for warning in &out.seed_warnings {
        eprintln!("warning: {warning}");
    }
    print!("{}", out.report.human_summary());
    if let Some(dir) = &cfg.output_dir {
        println!("artifacts written to {}", dir.display());
    }
    if cli.verbose > 0 {
        print!("{}", out.report.to_kv());
    }
    if out.report.findings > 0 {
        println!(
            "{} check finding(s) recorded; see the findings directory",
            out.report.findings
        );
        Ok(EXIT_FINDINGS)
    } else {
        Ok(EXIT_OK)
    }
}

fn parse_thread_list(list: &str) -> CmdResult<Vec<usize>> {
    let mut out = Vec::new();
    for part in list.split(',') {
        let t: usize = part
            .trim()
            .parse()
            .map_err(|_| usage(format!("bad thread count '{part}'")))?;
        if t == 0 {
            return Err(usage("thread counts must be >= 1"));
        }
        out.push(t);
    }
    Ok(out)
}

fn parse_mode_list(list: &str) -> CmdResult<Vec<ExecMode>> {
    list.split(',')
        .map(|part| ExecMode::parse(part.trim()).map_err(failure_is_usage))
        .collect()
}

fn cmd_bench(cli: &Cli, args: &BenchArgs, resolver: &Resolver) -> CmdResult<i32> {
    let mut engine = args.engine.clone();
    if engine.dut.is_none()
        && engine.dut_cmd.is_none()
        && resolver.raw("dut").is_none()
        && resolver.raw("dut_cmd").is_none()
    {
        engine.dut = Some("synth-delay".to_string());
    }
    if engine.synth_delay_micros.is_none() && resolver.raw("synth_delay_micros").is_none() {
        // Default to a visibly simulation-bound synthetic DUT.
        engine.synth_delay_micros = Some(1_000);
    }
    let base = resolve_engine(cli, &engine, resolver, false)?;

    let threads = match resolver.value(args.threads.clone(), "bench_threads")? {
        Some(list) => parse_thread_list(&list)?,
        None => vec![1, 2, 4],
    };
    let modes = match resolver.value(args.modes.clone(), "bench_modes")? {
        Some(list) => parse_mode_list(&list)?,
        None => vec![ExecMode::Serial, ExecMode::Batch, ExecMode::Pipelined],
    };
    let budget = parse_secs(
        resolver
            .value(args.budget_secs, "bench_budget_secs")?
            .unwrap_or(5.0),
        "bench budget",
    )?;

    if let Ok(cores) = std::thread::available_parallelism() {
        let max = threads.iter().copied().max().unwrap_or(1);
        if max > cores.get() {
            eprintln!(
                "warning: sweeping up to {max} threads on {} hardware thread(s)",
                cores.get()
            );
        }
    }

    let points = bench::run_sweep(&base, &modes, &threads, budget).map_err(failure)?;

    println!(
        "{:<10} {:>7} {:>18} {:>9}",
        "mode", "threads", "cycles/sec", "speedup"
    );
    for p in &points {
        println!(
            "{:<10} {:>7} {:>18.3} {:>9.4}",
            p.mode.as_str(),
            p.threads,
            p.throughput,
            p.speedup
        );
    }
    let csv_path = match &args.csv {
        Some(p) => Some(p.clone()),
        None => resolver.raw("bench_csv").map(PathBuf::from),
    };
    if let Some(path) = csv_path {
        fs::write(&path, bench::to_csv(&points))
            .map_err(|e| failure(format!("cannot write {}: {e}", path.display())))?;
        println!("csv written to {}", path.display());
    }
    Ok(EXIT_OK)
}

fn cmd_report(args: &ReportArgs) -> CmdResult<i32> {
    let file = if args.path.is_dir() {
        args.path.join(REPORT_KV_FILE)
    } else {
        args.path.clone()
    };
    let text = fs::read_to_string(&file)
        .map_err(|e| failure(format!("cannot read {}: {e}", file.display())))?;
    let digest = ReportDigest::parse(&text, &file).map_err(failure)?;
    let get = |key: &str| -> CmdResult<&str> {
        digest
            .get(key)
            .ok_or_else(|| failure(format!("{}: missing key '{key}'", file.display())))
    };
    println!(
        "{} campaign, mode {} ({} thread(s))",
        get("dut")?,
        get("mode")?,
        get("threads")?
    );
    println!(
        "coverage_rate {} ({}/{} points)",
        get("coverage_rate")?,
        get("covered")?,
        get("coverpoints")?
    );
    println!(
        "iterations {} (termination: {})",
        get("iterations")?,
        get("termination")?
    );
    println!("findings {}", get("findings")?);
    let share = |key: &str| -> CmdResult<f64> {
        get(key)?
            .parse::<f64>()
            .map_err(|e| failure(format!("{}: bad value for '{key}': {e}", file.display())))
    };
    println!(
        "stage shares: mutation {:.1}%, simulation {:.1}%, coverage+corpus {:.1}%",
        share("time.share_mutation")? * 100.0,
        share("time.share_simulation")? * 100.0,
        share("time.share_coverage")? * 100.0
    );
    println!(
        "throughput {} cycles/sec",
        get("throughput.cycles_per_sec")?
    );
    Ok(EXIT_OK)
}

/// Accepts either a corpus directory or a campaign output directory;
/// returns `(corpus_dir, campaign_dir_if_known)`.
fn locate_corpus(path: &Path) -> CmdResult<(PathBuf, Option<PathBuf>)> {
    if path.join("manifest.txt").is_file() {
        return Ok((path.to_path_buf(), path.parent().map(Path::to_path_buf)));
    }
    let nested = path.join("corpus");
    if nested.join("manifest.txt").is_file() {
        return Ok((nested, Some(path.to_path_buf())));
    }
    Err(failure(format!(
        "no corpus found at {} (no manifest.txt)",
        path.display()
    )))
}

fn corpus_grammar(args: &CorpusArgs, descriptor_grammar: &GrammarMode) -> CmdResult<GrammarMode> {
    match &args.grammar {
        Some(spec) => parse_grammar_spec(spec),
        None => Ok(descriptor_grammar.clone()),
    }
}

fn cmd_corpus(args: &CorpusArgs) -> CmdResult<i32> {
    if args.init {
        let name = args
            .dut
            .as_deref()
            .ok_or_else(|| usage("--init needs --dut <name>"))?;
        if !BUNDLED.contains(&name) {
            return Err(usage(format!("unknown DUT '{name}'")));
        }
        let count = write_starter_corpus(name, &args.path).map_err(failure)?;
        println!("wrote {count} starter seeds to {}", args.path.display());
        return Ok(EXIT_OK);
    }

    let (corpus_dir, campaign_dir) = locate_corpus(&args.path)?;
    let loaded = load_corpus(&corpus_dir, usize::MAX).map_err(failure)?;
    for warning in &loaded.warnings {
        eprintln!("warning: {warning}");
    }
    for c in &loaded.chromosomes {
        println!("{}\t{}", c.id, c.bytes.len());
    }
    println!("{} seeds", loaded.chromosomes.len());

    if !(args.recompute || args.decode) {
        return Ok(EXIT_OK);
    }
    let name = args
        .dut
        .as_deref()
        .ok_or_else(|| usage("--recompute/--decode need --dut <name>"))?;
    if !BUNDLED.contains(&name) {
        return Err(usage(format!("unknown DUT '{name}'")));
    }
    let mut dut = build_bundled(name, &SynthOptions::default()).map_err(failure)?;
    let descriptor = dut.descriptor().clone();
    let grammar = corpus_grammar(args, &descriptor.grammar)?;

    if args.decode {
        for c in &loaded.chromosomes {
            let stimulus = translate(c, descriptor.input_width_bits, &grammar);
            println!("seed {} ({} bytes)", c.id, c.bytes.len());
            print!("{}", decode_report(&stimulus, &grammar));
        }
    }

    if args.recompute {
        let mut cumulative =
            CumulativeCoverage::new(descriptor.coverpoint_count).map_err(failure)?;
        let mut covering = vec![0u32; descriptor.coverpoint_count];
        let mut findings = 0u64;
        for c in &loaded.chromosomes {
            let stimulus = translate(c, descriptor.input_width_bits, &grammar);
            let outcome = run_stimulus(dut.as_mut(), &stimulus).map_err(failure)?;
            cumulative.observe(&outcome.coverage).map_err(failure)?;
            for point in outcome.coverage.covered_points() {
                covering[point] += 1;
            }
            if outcome.check.failed() {
                findings += 1;
            }
            println!(
                "seed {} covers {} points",
                c.id,
                outcome.coverage.covered_points().count()
            );
        }
        println!(
            "recomputed coverage: {}/{} points, {} seeds trip the check",
            cumulative.covered_count(),
            descriptor.coverpoint_count,
            findings
        );
        if let Some(dir) = campaign_dir {
            let snapshot_file = dir.join(COVERAGE_FILE);
            if snapshot_file.is_file() {
                let text = fs::read_to_string(&snapshot_file).map_err(|e| {
                    failure(format!("cannot read {}: {e}", snapshot_file.display()))
                })?;
                let snapshot = parse_snapshot(&text, &snapshot_file).map_err(failure)?;
                if snapshot.covering_seed_counts == covering {
                    println!("matches recorded covering-seed counts");
                } else {
                    return Err(failure(format!(
                        "re-executed covering-seed counts disagree with {}",
                        snapshot_file.display()
                    )));
                }
            }
        }
    }
    Ok(EXIT_OK)
}

fn cmd_list_duts() -> CmdResult<i32> {
    println!(
        "{:<12} {:>11} {:>12}  grammar",
        "name", "width bits", "coverpoints"
    );
    for name in BUNDLED {
        let dut = build_bundled(name, &SynthOptions::default()).map_err(failure)?;
        let d = dut.descriptor();
        println!(
            "{:<12} {:>11} {:>12}  {}",
            d.name,
            d.input_width_bits,
            d.coverpoint_count,
            d.grammar.label()
        );
    }
    Ok(EXIT_OK)
}

fn cmd_dut_serve(args: &DutServeArgs) -> CmdResult<i32> {
    if !BUNDLED.contains(&args.dut.as_str()) {
        return Err(usage(format!("unknown DUT '{}'", args.dut)));
    }
    let synth = SynthOptions {
        coverpoints: args
            .synth_coverpoints
            .unwrap_or(SynthOptions::default().coverpoints),
        delay: Duration::from_micros(args.synth_delay_micros.unwrap_or(0)),
    };
    let mut dut = build_bundled(&args.dut, &synth).map_err(failure)?;
    let stdin = io::stdin();
    let stdout = io::stdout();
    serve(dut.as_mut(), stdin.lock(), stdout.lock()).map_err(failure)?;
    Ok(EXIT_OK)
}

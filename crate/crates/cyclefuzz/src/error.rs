use std::path::PathBuf;

/// Errors surfaced by the fuzzing library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(
        "coverage length mismatch: cumulative tracks {expected} coverpoints, run reported {actual}"
    )]
    CoverageLength { expected: usize, actual: usize },

    #[error("DUT declares zero coverpoints; coverage feedback needs at least one")]
    ZeroCoverpoints,

    #[error("seed corpus is empty: at least one initial seed is required")]
    EmptyCorpus,

    #[error("corpus grew past the configured limit of {limit} seeds")]
    CorpusFull { limit: usize },

    #[error("no seeds found in {}", dir.display())]
    NoSeeds { dir: PathBuf },

    #[error("corpus file {}: {reason}", file.display())]
    CorpusFile { file: PathBuf, reason: String },

    #[error("stimulus width {stimulus} bits does not match DUT input width {dut} bits")]
    WidthMismatch { stimulus: u32, dut: u32 },

    #[error("unknown DUT '{0}'")]
    UnknownDut(String),

    #[error("template table {}: {reason}", file.display())]
    TemplateTable { file: PathBuf, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("config file {}: {reason}", file.display())]
    ConfigFile { file: PathBuf, reason: String },

    #[error("worker {slot}: {cause}")]
    Worker { slot: usize, cause: String },

    #[error("DUT subprocess: {0}")]
    Protocol(String),

    #[error("cannot compute throughput over zero elapsed time")]
    ZeroElapsed,

    #[error("report file {}: {reason}", file.display())]
    Report { file: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

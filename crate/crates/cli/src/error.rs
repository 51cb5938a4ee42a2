use thiserror::Error;
use txgraph::build::BuildError;
use txgraph::ingest::IngestError;
use txgraph::pipeline::PipelineError;
use txgraph::profile::ProfileError;
use txgraph::sampler::SampleError;
use txgraph::tsv::{TsvError, WriteError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SEQUENCING: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Tsv(#[from] TsvError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Ingest(e) => CliError::Ingest(e),
            PipelineError::Build(e) => CliError::Build(e),
        }
    }
}

impl From<WriteError<PipelineError>> for CliError {
    fn from(e: WriteError<PipelineError>) -> Self {
        match e {
            WriteError::Source(e) => e.into(),
            WriteError::Tsv(e) => e.into(),
        }
    }
}

pub fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

fn tsv_code(e: &TsvError) -> i32 {
    match e {
        TsvError::Sequencing { .. } => EXIT_SEQUENCING,
        TsvError::Corruption { .. } => EXIT_INVARIANT,
        _ => EXIT_INPUT,
    }
}

impl CliError {
    /// 2 transport or parse, 3 sequencing, 4 data invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Ingest(_) | CliError::Io { .. } => EXIT_INPUT,
            CliError::Build(_) => EXIT_INVARIANT,
            CliError::Tsv(e) => tsv_code(e),
            CliError::Profile(e) => match e {
                ProfileError::Sequencing { .. } => EXIT_SEQUENCING,
                ProfileError::Overclaim { .. } | ProfileError::Build(_) | ProfileError::EmptyInput => EXIT_INVARIANT,
                ProfileError::Tsv(t) => tsv_code(t),
                _ => EXIT_INPUT,
            },
            CliError::Sample(e) => match e {
                SampleError::Config(_) => EXIT_INPUT,
                _ => EXIT_INVARIANT,
            },
        }
    }
}

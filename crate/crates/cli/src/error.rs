use gspcanet::eval::EvalError;
use gspcanet::imagio::ImagioError;
use gspcanet::network::NetError;
use gspcanet::pipeline::PipelineError;
use thiserror::Error;

/// Command failure, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("model: {0}")]
    Model(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Data(_) => 3,
            Self::Io(_) => 4,
            Self::Model(_) => 5,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Data(m) | Self::Io(m) | Self::Model(m) => m,
        }
    }
}

impl From<ImagioError> for CliError {
    fn from(e: ImagioError) -> Self {
        if e.is_io() {
            Self::Io(e.to_string())
        } else {
            Self::Data(e.to_string())
        }
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::Io { .. } => Self::Io(e.to_string()),
            NetError::Config(_) => Self::Usage(e.to_string()),
            NetError::BadMagic
            | NetError::UnsupportedVersion { .. }
            | NetError::Truncated { .. }
            | NetError::Checksum { .. }
            | NetError::Corrupt(_)
            | NetError::ChannelMismatch { .. }
            | NetError::Geometry(_)
            | NetError::Untrained => Self::Model(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io(_) => Self::Io(e.to_string()),
            EvalError::InvalidArgument(_) => Self::Usage(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Imagio(e) => e.into(),
            PipelineError::Network(e) => e.into(),
            PipelineError::Eval(e) => e.into(),
            e => Self::Data(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            Self::Io(e.to_string())
        } else {
            Self::Data(e.to_string())
        }
    }
}

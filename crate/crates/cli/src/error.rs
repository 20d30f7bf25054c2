use std::path::PathBuf;

use flow_eval::metrics::MetricError;
use flow_eval::DatasetError;
use thiserror::Error;

/// Process exit codes. Every failure maps to exactly one of these.
pub mod exit {
    pub const OK: i32 = 0;
    /// A `verify` check failed.
    pub const VERIFY_FAILED: i32 = 1;
    /// Bad command line (also used by the argument parser itself).
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    /// Malformed archive, config, split or report file.
    pub const PARSE: i32 = 4;
    /// Well-formed input that breaks an invariant (shapes, ids, values).
    pub const VALIDATION: i32 = 5;
    /// Geometry or metric region problem (degenerate mask, empty band, ...).
    pub const METRIC: i32 = 6;
    pub const SPLIT: i32 = 7;
    pub const CONFLICTING_METADATA: i32 = 8;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse {what}: {message}")]
    Parse { what: String, message: String },

    #[error("{0}")]
    Validation(String),

    #[error(transparent)]
    Dataset(#[from] DatasetError),

    #[error(transparent)]
    Metric(#[from] MetricError),

    #[error("split: {0}")]
    Split(DatasetError),

    #[error("conflicting metadata: {0}")]
    ConflictingMetadata(String),

    #[error("{failed} of {total} checks failed")]
    VerifyFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn parse(what: impl Into<String>, message: impl ToString) -> Self {
        CliError::Parse { what: what.into(), message: message.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io { .. } => exit::IO,
            CliError::Parse { .. } => exit::PARSE,
            CliError::Validation(_) => exit::VALIDATION,
            CliError::Dataset(e) => match e {
                DatasetError::Io { .. } => exit::IO,
                DatasetError::Parse { .. } => exit::PARSE,
                _ => exit::VALIDATION,
            },
            CliError::Metric(e) => match e {
                MetricError::Sample { source, .. } => metric_code(source),
                other => metric_code(other),
            },
            CliError::Split(e) => match e {
                DatasetError::Io { .. } => exit::IO,
                DatasetError::Parse { .. } => exit::PARSE,
                _ => exit::SPLIT,
            },
            CliError::ConflictingMetadata(_) => exit::CONFLICTING_METADATA,
            CliError::VerifyFailed { .. } => exit::VERIFY_FAILED,
        }
    }

    /// The error and its sources on one line.
    pub fn diagnostic(&self) -> String {
        let mut line = self.to_string();
        let mut source = std::error::Error::source(self);
        while let Some(s) = source {
            let text = s.to_string();
            if !line.contains(&text) {
                line.push_str(": ");
                line.push_str(&text);
            }
            source = s.source();
        }
        line.replace('\n', " ")
    }
}

fn metric_code(e: &MetricError) -> i32 {
    match e {
        MetricError::LengthMismatch { .. } | MetricError::GridMismatch | MetricError::Core(_) => exit::VALIDATION,
        _ => exit::METRIC,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_distinct_per_class() {
        let io = CliError::Dataset(DatasetError::Io { path: "x".into(), source: std::io::Error::other("boom") });
        let parse = CliError::Dataset(DatasetError::Parse { entry: "a".into(), message: "b".into() });
        let split = CliError::Split(DatasetError::SubsetTooLarge { requested: 2, available: 1 });
        let metric = CliError::Metric(MetricError::EmptyRegion);
        let codes = [io.exit_code(), parse.exit_code(), split.exit_code(), metric.exit_code()];
        assert_eq!(codes, [exit::IO, exit::PARSE, exit::SPLIT, exit::METRIC]);
    }

    #[test]
    fn diagnostic_is_one_line() {
        let e = CliError::parse("config", "line 1\nline 2");
        assert!(!e.diagnostic().contains('\n'));
    }
}

use std::path::Path;

use cail_core::cluster::ClusterError;
use cail_core::diff::DiffError;
use cail_core::kuramoto::DataError;
use cail_core::metrics::MetricError;
use cail_core::training::TrainError;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed input: {0}")]
    Format(String),
    #[error("invalid arguments: {0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] DiffError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.display().to_string(), source }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Format(_) | Error::Json(_) | Error::Csv(_) => "format",
            Error::Usage(_) => "usage",
            Error::Data(_) => "data",
            Error::Model(_) => "model",
            Error::Cluster(_) | Error::Train(_) => "train",
            Error::Metric(_) => "metric",
        }
    }

    /// `{"error": {"kind": ..., "message": ...}}` on one line.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            message: String,
        }
        #[derive(Serialize)]
        struct Wrapper<'a> {
            error: Body<'a>,
        }
        let w = Wrapper { error: Body { kind: self.kind(), message: self.to_string() } };
        serde_json::to_string(&w).unwrap_or_else(|_| String::from(r#"{"error":{"kind":"internal","message":""}}"#))
    }
}

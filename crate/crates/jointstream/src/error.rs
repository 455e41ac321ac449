use std::path::{Path, PathBuf};

use jointstream_core::attention::AttentionError;
use jointstream_core::features::FeatureError;
use jointstream_core::frequency::FrequencyError;
use jointstream_core::imaging::ImageError;
use jointstream_core::metrics::MetricError;
use jointstream_core::training::TrainError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Png { path: PathBuf, source: image::ImageError },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("config {}: {message}", path.display())]
    Config { path: PathBuf, message: String },
    #[error("manifest {}, row {row}: {message}", path.display())]
    Manifest { path: PathBuf, row: usize, message: String },
    #[error("{wsi_id}: {message}")]
    Record { wsi_id: String, message: String },
    #[error("{} record(s) failed: {}", ids.len(), ids.join(", "))]
    Partial { ids: Vec<String> },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Frequency(#[from] FrequencyError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Attention(#[from] AttentionError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

pub(crate) fn format(path: &Path, message: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), message: message.into() }
}

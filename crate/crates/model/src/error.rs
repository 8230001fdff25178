use std::path::PathBuf;

use d3net_core::CoreError;
use d3net_neural::NeuralError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error(transparent)]
    Neural(#[from] NeuralError),

    #[error("contract violation: {0}")]
    Contract(String),

    /// A failure inside one stage of the restoration pipeline.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<ModelError>,
    },

    #[error("{path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ModelError {
    pub(crate) fn in_stage(stage: &'static str) -> impl FnOnce(ModelError) -> ModelError {
        move |e| ModelError::Stage {
            stage,
            source: Box::new(e),
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err($crate::error::ModelError::Contract(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;

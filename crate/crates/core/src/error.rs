// Copyright 2026 The qthermo Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised by the simulator, the networks and the training driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("spectrum is degenerate (min eigenvalue gap {0:e})")]
    DegenerateSpectrum(f64),

    #[error("outcome probabilities sum to {0}, not 1")]
    InvalidProbabilities(f64),

    #[error("relative entropy diverges: weight {0:e} outside the support of the reference state")]
    SupportViolation(f64),

    #[error("time {t} lies outside [0, {tau}]")]
    TimeOutOfRange { t: f64, tau: f64 },

    #[error("imaginary residue {0:e} in an expectation value that must be real")]
    ImaginaryResidue(f64),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("forward cache was produced by parameter version {cache}, network is at {network}")]
    StaleCache { cache: u64, network: u64 },

    #[error("state variant does not match approach {0}")]
    StateMismatch(&'static str),

    #[error("config error at {key}{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config {
        key: String,
        line: Option<usize>,
        message: String,
    },

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error("epoch {epoch}: {source}")]
    Epoch {
        epoch: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Experiment runners, configuration and artifact writers.

mod config;
mod experiments;
mod output;
mod svg;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::estimator::EstimateError;
use crate::freq::FreqError;
use crate::spectral::SpectralError;
use crate::synth::SynthError;

pub use config::{
    reference_experiment, AssociationKnobs, CombConfig, EstimatorKind, Experiment,
    ExperimentConfig, GridConfig, MethodKind, NoiseConfig, PeakParams, ToneConfig,
};
pub use experiments::{
    clean_block, estimate_block, predict, run_delta_sweep, run_full_chain, run_full_chain_with,
    run_monte_carlo, run_trials, trial_seed, ChainResult, MonteCarloSummary, SweepResult, SweepRow,
    ToneOutcome, ToneStats, TrialResult,
};
pub use output::{
    emit_chain, emit_sweep, write_json, write_montecarlo_json, write_spectrum_csv, write_sweep_csv,
    write_zones_json, OutputFormat,
};
pub use svg::{deviation_chart, spectrum_chart, sweep_chart};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("estimation failure: {0}")]
    Estimation(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl HarnessError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Estimation(_) => 3,
            HarnessError::Io { .. } => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<FreqError> for HarnessError {
    fn from(e: FreqError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

impl From<SynthError> for HarnessError {
    fn from(e: SynthError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

impl From<SpectralError> for HarnessError {
    fn from(e: SpectralError) -> Self {
        HarnessError::Config(e.to_string())
    }
}

impl From<EstimateError> for HarnessError {
    fn from(e: EstimateError) -> Self {
        match e {
            EstimateError::InvalidInput(_) | EstimateError::Freq(_) => {
                HarnessError::Config(e.to_string())
            }
            _ => HarnessError::Estimation(e.to_string()),
        }
    }
}

//! Frequency estimation for photonic-sampling receivers with multi-order
//! deviation averaging.
//!
//! `freq` holds grid arithmetic and the closed-form deviation model,
//! `synth` builds ADC sample blocks, `spectral` finds and refines peaks,
//! `estimator` associates orders and averages, and `harness` runs the
//! numerical experiments.

pub mod estimator;
pub(crate) mod fft;
pub mod freq;
pub mod harness;
pub mod spectral;
pub mod synth;

pub use estimator::{
    associate_orders, associate_orders_with, mda_estimate, mda_quad_estimate, predict_deviation,
    Association, AssociationParams, EstimateError, MdaEstimate, ToneCluster, ZoneMeasurement,
};
pub use freq::{CombSpec, FreqError, FrequencyGrid, FrequencyIndex};
pub use spectral::{find_peaks, magnitude_spectrum, Peak, QuadVariant, Spectrum};
pub use synth::{NoiseSpec, PresampleMethod, PulseShape, SampleBlock, ToneSpec};

//! Declarative experiment description.
//!
//! Physical parameters carry no defaults and must appear in the document.
//! Peak-finder, association and method knobs may be omitted.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::estimator::{AssociationParams, DEFAULT_CLUSTER_TOLERANCE_BINS};
use crate::freq::{CombSpec, FrequencyGrid};
use crate::spectral::QuadVariant;
use crate::synth::{NoiseSpec, PresampleMethod, PulseShape, ToneSpec, DEFAULT_OVERSAMPLE_FACTOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub sample_rate_hz: f64,
    pub fft_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombConfig {
    pub rep_rate_hz: f64,
    pub timing_offset_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneConfig {
    pub freq_hz: f64,
    pub amplitude: f64,
    pub phase_rad: f64,
    /// Coarse knowledge of the tone's zone used to pick among the
    /// self-similar comb chains. Defaults to `freq_hz`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zone_prior_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// `null` disables noise.
    #[serde(deserialize_with = "Option::deserialize")]
    pub spectral_snr_db: Option<f64>,
    pub seed: u64,
    /// Tone amplitude the SNR is referred to.
    pub reference_amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Mda,
    MdaQuad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    #[default]
    Analytic,
    Oversampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeakParams {
    pub rel_threshold_db: f64,
    pub min_separation_bins: usize,
}

impl Default for PeakParams {
    fn default() -> Self {
        Self {
            rel_threshold_db: -40.0,
            min_separation_bins: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssociationKnobs {
    pub cluster_tolerance_bins: f64,
    /// `None` means half the repetition rate.
    pub prior_tolerance_hz: Option<f64>,
}

impl Default for AssociationKnobs {
    fn default() -> Self {
        Self {
            cluster_tolerance_bins: DEFAULT_CLUSTER_TOLERANCE_BINS,
            prior_tolerance_hz: None,
        }
    }
}

fn default_oversample_factor() -> usize {
    DEFAULT_OVERSAMPLE_FACTOR
}

/// The JSON document accepted by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub comb: CombConfig,
    pub tones: Vec<ToneConfig>,
    pub noise: NoiseConfig,
    pub pulse: PulseShape,
    pub order_count: usize,
    pub estimator: EstimatorKind,
    #[serde(default)]
    pub quad_variant: QuadVariant,
    #[serde(default)]
    pub peaks: PeakParams,
    #[serde(default)]
    pub method: MethodKind,
    #[serde(default = "default_oversample_factor")]
    pub oversample_factor: usize,
    #[serde(default)]
    pub association: AssociationKnobs,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Validates every field and builds the typed experiment.
    pub fn resolve(&self) -> Result<Experiment, HarnessError> {
        let grid = FrequencyGrid::new(self.grid.sample_rate_hz, self.grid.fft_size)?;
        let comb = CombSpec::on_grid(self.comb.rep_rate_hz, &grid)?
            .with_timing_offset(self.comb.timing_offset_s)?;
        if self.tones.is_empty() {
            return Err(HarnessError::Config("at least one tone is required".into()));
        }
        let tones = self
            .tones
            .iter()
            .map(|t| {
                let tone = ToneSpec::new(t.freq_hz, t.amplitude, t.phase_rad)?;
                tone.check_band(&grid)?;
                Ok(tone)
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        let priors_hz: Vec<f64> = self
            .tones
            .iter()
            .map(|t| t.zone_prior_hz.unwrap_or(t.freq_hz))
            .collect();
        if let Some(bad) = priors_hz.iter().find(|p| !p.is_finite()) {
            return Err(HarnessError::Config(format!(
                "zone prior must be finite, got {bad}"
            )));
        }
        let noise = match self.noise.spectral_snr_db {
            Some(snr) if snr.is_finite() => NoiseSpec::new(snr, self.noise.seed)?,
            Some(snr) => {
                return Err(HarnessError::Config(format!(
                    "spectral SNR must be finite or null, got {snr}"
                )))
            }
            None => NoiseSpec::disabled(),
        };
        let reference_amplitude = self.noise.reference_amplitude;
        if !(reference_amplitude.is_finite() && reference_amplitude > 0.0) {
            return Err(HarnessError::Config(format!(
                "reference amplitude must be positive, got {reference_amplitude}"
            )));
        }
        self.pulse.validate(grid.nyquist_hz())?;
        if self.order_count == 0 {
            return Err(HarnessError::Config(
                "order_count must be at least 1".into(),
            ));
        }
        let p = &self.peaks;
        if p.rel_threshold_db.is_nan() || p.rel_threshold_db > 0.0 || p.min_separation_bins == 0 {
            return Err(HarnessError::Config(format!(
                "peak threshold must be <= 0 dB and separation >= 1 bin, got {} dB and {}",
                p.rel_threshold_db, p.min_separation_bins
            )));
        }
        let method = match self.method {
            MethodKind::Analytic => PresampleMethod::Analytic,
            MethodKind::Oversampled if self.oversample_factor >= 2 => {
                PresampleMethod::Oversampled {
                    factor: self.oversample_factor,
                }
            }
            MethodKind::Oversampled => {
                return Err(HarnessError::Config(format!(
                    "oversample_factor must be at least 2, got {}",
                    self.oversample_factor
                )))
            }
        };
        let a = &self.association;
        if !(a.cluster_tolerance_bins.is_finite() && a.cluster_tolerance_bins > 0.0) {
            return Err(HarnessError::Config(format!(
                "cluster tolerance must be positive, got {} bins",
                a.cluster_tolerance_bins
            )));
        }
        if let Some(t) = a.prior_tolerance_hz {
            if !(t.is_finite() && t > 0.0) {
                return Err(HarnessError::Config(format!(
                    "prior tolerance must be positive, got {t} Hz"
                )));
            }
        }
        let association = AssociationParams {
            order_count: self.order_count,
            cluster_tolerance_bins: a.cluster_tolerance_bins,
            priors_hz,
            prior_tolerance_hz: a.prior_tolerance_hz,
        };
        Ok(Experiment {
            grid,
            comb,
            tones,
            noise,
            reference_amplitude,
            pulse: self.pulse,
            order_count: self.order_count,
            estimator: self.estimator,
            quad_variant: self.quad_variant,
            peaks: self.peaks.clone(),
            method,
            association,
        })
    }
}

/// A validated configuration in library types.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub grid: FrequencyGrid,
    pub comb: CombSpec,
    pub tones: Vec<ToneSpec>,
    pub noise: NoiseSpec,
    pub reference_amplitude: f64,
    pub pulse: PulseShape,
    pub order_count: usize,
    pub estimator: EstimatorKind,
    pub quad_variant: QuadVariant,
    pub peaks: PeakParams,
    pub method: PresampleMethod,
    pub association: AssociationParams,
}

/// Two tones at 1.321 and 3.774 GHz, 100.02 MHz comb, 20 GSa/s, 1e5-point
/// transform, 77 dB spectral SNR, ten orders.
pub fn reference_experiment() -> ExperimentConfig {
    ExperimentConfig {
        grid: GridConfig {
            sample_rate_hz: 20e9,
            fft_size: 100_000,
        },
        comb: CombConfig {
            rep_rate_hz: 100.02e6,
            timing_offset_s: 0.0,
        },
        tones: vec![
            ToneConfig {
                freq_hz: 1.321e9,
                amplitude: 1.0,
                phase_rad: 0.3,
                zone_prior_hz: None,
            },
            ToneConfig {
                freq_hz: 3.774e9,
                amplitude: 1.0,
                phase_rad: 1.1,
                zone_prior_hz: None,
            },
        ],
        noise: NoiseConfig {
            spectral_snr_db: Some(77.0),
            seed: 1,
            reference_amplitude: 1.0,
        },
        pulse: PulseShape::IdealComb,
        order_count: 10,
        estimator: EstimatorKind::Mda,
        quad_variant: QuadVariant::default(),
        peaks: PeakParams::default(),
        method: MethodKind::Analytic,
        oversample_factor: DEFAULT_OVERSAMPLE_FACTOR,
        association: AssociationKnobs::default(),
    }
}

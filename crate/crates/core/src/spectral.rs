//! One-sided spectra, peak picking and three-point peak refinement.
//!
//! No window is applied: the transform is the plain rectangular-window DFT
//! of the acquisition.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft;
use crate::freq::FrequencyGrid;
use crate::synth::SampleBlock;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("magnitude at bin {bin} is {value}; magnitudes must be finite and non-negative")]
    BadMagnitude { bin: usize, value: f64 },
    #[error("bin {bin} is not an interior bin of a {len}-bin spectrum")]
    NotInterior { bin: usize, len: usize },
    #[error("invalid peak search parameter: {0}")]
    InvalidParameter(String),
}

/// One-sided DFT of an acquisition, bins `0..=N/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    bins: Vec<Complex64>,
    magnitudes: Vec<f64>,
    grid: FrequencyGrid,
}

impl Spectrum {
    /// Builds a magnitude-only spectrum; complex bins are taken as real.
    pub fn from_magnitudes(
        magnitudes: Vec<f64>,
        grid: FrequencyGrid,
    ) -> Result<Self, SpectralError> {
        if magnitudes.len() != grid.one_sided_len() {
            return Err(SpectralError::LengthMismatch {
                got: magnitudes.len(),
                expected: grid.one_sided_len(),
            });
        }
        if let Some((bin, &value)) = magnitudes
            .iter()
            .enumerate()
            .find(|(_, m)| !(m.is_finite() && **m >= 0.0))
        {
            return Err(SpectralError::BadMagnitude { bin, value });
        }
        Ok(Self {
            bins: magnitudes.iter().map(|&m| Complex64::new(m, 0.0)).collect(),
            magnitudes,
            grid,
        })
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitudes.is_empty()
    }

    pub fn is_interior(&self, bin: usize) -> bool {
        bin > 0 && bin + 1 < self.len()
    }

    /// Interior local maximum under the lower-bin tie rule: strictly above
    /// the left neighbor, not below the right one.
    pub fn is_local_max(&self, bin: usize) -> bool {
        let m = &self.magnitudes;
        self.is_interior(bin) && m[bin] > m[bin - 1] && m[bin] >= m[bin + 1]
    }
}

/// Rectangular-window DFT magnitudes of a block of any length.
pub fn magnitude_spectrum(block: &SampleBlock) -> Result<Spectrum, SpectralError> {
    let grid = *block.grid();
    if block.samples().len() != grid.fft_size() {
        return Err(SpectralError::LengthMismatch {
            got: block.samples().len(),
            expected: grid.fft_size(),
        });
    }
    let mut buf: Vec<Complex64> = block
        .samples()
        .iter()
        .map(|&s| Complex64::new(s, 0.0))
        .collect();
    fft::forward(&mut buf);
    buf.truncate(grid.one_sided_len());
    let magnitudes = buf.iter().map(|z| z.norm()).collect();
    Ok(Spectrum {
        bins: buf,
        magnitudes,
        grid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub bin: usize,
    pub magnitude: f64,
    pub refined_offset_bins: Option<f64>,
}

/// Interior local maxima within `|rel_threshold_db|` dB of the spectrum's
/// global maximum, thinned greedily (largest first) so that no two are
/// closer than `min_separation_bins`. Sorted by bin.
///
/// Equal neighbors resolve to the lower bin.
pub fn find_peaks(
    spec: &Spectrum,
    rel_threshold_db: f64,
    min_separation_bins: usize,
) -> Result<Vec<Peak>, SpectralError> {
    if rel_threshold_db.is_nan() || rel_threshold_db > 0.0 {
        return Err(SpectralError::InvalidParameter(format!(
            "relative threshold must be <= 0 dB, got {rel_threshold_db}"
        )));
    }
    if min_separation_bins == 0 {
        return Err(SpectralError::InvalidParameter(
            "minimum separation must be at least 1 bin".into(),
        ));
    }
    let mags = spec.magnitudes();
    let global = mags.iter().copied().fold(0.0, f64::max);
    if global <= 0.0 {
        return Ok(Vec::new());
    }
    let floor = global * 10f64.powf(rel_threshold_db / 20.0);

    let mut candidates: Vec<usize> = (1..mags.len().saturating_sub(1))
        .filter(|&k| spec.is_local_max(k) && mags[k] >= floor)
        .collect();
    candidates.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]).then(a.cmp(&b)));

    let mut kept: Vec<usize> = Vec::with_capacity(candidates.len());
    for k in candidates {
        if kept.iter().all(|&j| j.abs_diff(k) >= min_separation_bins) {
            kept.push(k);
        }
    }
    kept.sort_unstable();
    Ok(kept
        .into_iter()
        .map(|bin| Peak {
            bin,
            magnitude: mags[bin],
            refined_offset_bins: None,
        })
        .collect())
}

/// Result of a three-point vertex fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadFit {
    /// Vertex position relative to the peak bin, in `[-0.5, 0.5]`.
    pub offset_bins: f64,
    /// The three points were collinear; `offset_bins` is 0.
    pub degenerate: bool,
}

impl QuadFit {
    fn from_ratio(num: f64, den: f64) -> Self {
        if den == 0.0 || !den.is_finite() {
            return Self {
                offset_bins: 0.0,
                degenerate: true,
            };
        }
        Self {
            offset_bins: (num / den).clamp(-0.5, 0.5),
            degenerate: false,
        }
    }
}

/// Which three-point fit refines a peak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadVariant {
    /// Parabola through the three linear magnitudes.
    Magnitude,
    /// Parabola through the three complex bins, real part of the vertex.
    #[default]
    Complex,
}

fn check_interior(spec: &Spectrum, bin: usize) -> Result<(), SpectralError> {
    if !spec.is_interior(bin) {
        return Err(SpectralError::NotInterior {
            bin,
            len: spec.len(),
        });
    }
    Ok(())
}

/// Vertex of the parabola through `|X_{k-1}|, |X_k|, |X_{k+1}|`.
pub fn quad_interp(spec: &Spectrum, bin: usize) -> Result<QuadFit, SpectralError> {
    check_interior(spec, bin)?;
    let m = spec.magnitudes();
    let (a, b, c) = (m[bin - 1], m[bin], m[bin + 1]);
    Ok(QuadFit::from_ratio(0.5 * (a - c), a - 2.0 * b + c))
}

/// Three-point fit on the complex bins: `Re[(X_{k-1} - X_{k+1}) / (2X_k - X_{k-1} - X_{k+1})]`.
///
/// Exact for an isolated tone under the rectangular window, and blind to
/// any contribution that is constant across the three bins, such as the
/// far-off leakage of other lines.
pub fn quad_interp_complex(spec: &Spectrum, bin: usize) -> Result<QuadFit, SpectralError> {
    check_interior(spec, bin)?;
    let x = spec.bins();
    let (a, b, c) = (x[bin - 1], x[bin], x[bin + 1]);
    let den = 2.0 * b - a - c;
    if den.norm() == 0.0 {
        return Ok(QuadFit::from_ratio(0.0, 0.0));
    }
    let ratio = (a - c) / den;
    Ok(QuadFit::from_ratio(ratio.re, 1.0))
}

pub fn refine(spec: &Spectrum, bin: usize, variant: QuadVariant) -> Result<QuadFit, SpectralError> {
    match variant {
        QuadVariant::Magnitude => quad_interp(spec, bin),
        QuadVariant::Complex => quad_interp_complex(spec, bin),
    }
}

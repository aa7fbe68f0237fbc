//! Simulated acquisition: input tones, pulse-comb mixing and ADC noise.
//!
//! Mixing a tone `A cos(2π f t + φ)` with a pulse train whose Fourier series
//! is `1 + 2 Σ c_n cos(2π n f_c (t - t0))` yields one line per comb harmonic
//! on each side of the tone, `|f ± n f_c|`, each with amplitude `A c_n`. The
//! anti-aliasing filter ahead of the ADC is an ideal brick wall at `f_s/2`,
//! so only lines inside `(0, f_s/2)` reach the samples.

use std::f64::consts::{LN_10, PI, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft;
use crate::freq::{frac_mod1, CombSpec, FrequencyGrid};

/// Phasor recurrences are re-seeded from an exact phase this often.
const RESYNC_SAMPLES: usize = 1024;

/// Largest harmonic envelope droop a gaussian pulse may show across the band.
pub const MAX_ENVELOPE_DROOP_DB: f64 = 3.0;

/// Fewest oversampled points across a gaussian pulse's FWHM.
pub const MIN_SAMPLES_PER_FWHM: f64 = 4.0;

pub const DEFAULT_OVERSAMPLE_FACTOR: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("tone at {freq_hz} Hz is outside (0, {nyquist_hz}) Hz")]
    OutsideNyquist { freq_hz: f64, nyquist_hz: f64 },
    #[error("invalid tone: {0}")]
    InvalidTone(String),
    #[error("invalid pulse shape: {0}")]
    InvalidPulse(String),
    #[error("invalid noise spec: {0}")]
    InvalidNoise(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("block has {got} samples, grid expects {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneSpec {
    pub freq_hz: f64,
    pub amplitude: f64,
    pub phase_rad: f64,
}

impl ToneSpec {
    pub fn new(freq_hz: f64, amplitude: f64, phase_rad: f64) -> Result<Self, SynthError> {
        if !(freq_hz.is_finite() && freq_hz > 0.0) {
            return Err(SynthError::InvalidTone(format!(
                "frequency must be positive, got {freq_hz} Hz"
            )));
        }
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(SynthError::InvalidTone(format!(
                "amplitude must be positive, got {amplitude}"
            )));
        }
        if !phase_rad.is_finite() {
            return Err(SynthError::InvalidTone(format!(
                "phase must be finite, got {phase_rad}"
            )));
        }
        Ok(Self {
            freq_hz,
            amplitude,
            phase_rad,
        })
    }

    /// Rejects tones outside `(0, f_s/2)`.
    pub fn check_band(&self, grid: &FrequencyGrid) -> Result<(), SynthError> {
        if self.freq_hz <= 0.0 || self.freq_hz >= grid.nyquist_hz() {
            return Err(SynthError::OutsideNyquist {
                freq_hz: self.freq_hz,
                nyquist_hz: grid.nyquist_hz(),
            });
        }
        Ok(())
    }
}

/// Shape of a single presampling pulse.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PulseShape {
    /// Dirac pulses: every harmonic has unit weight.
    #[default]
    IdealComb,
    Gaussian {
        rms_width_s: f64,
    },
}

impl PulseShape {
    /// Gaussian pulse whose harmonic envelope droops by less than
    /// [`MAX_ENVELOPE_DROOP_DB`] up to `band_hz`.
    pub fn gaussian(rms_width_s: f64, band_hz: f64) -> Result<Self, SynthError> {
        let shape = PulseShape::Gaussian { rms_width_s };
        shape.validate(band_hz)?;
        Ok(shape)
    }

    pub fn validate(&self, band_hz: f64) -> Result<(), SynthError> {
        match *self {
            PulseShape::IdealComb => Ok(()),
            PulseShape::Gaussian { rms_width_s } => {
                if !(rms_width_s.is_finite() && rms_width_s > 0.0) {
                    return Err(SynthError::InvalidPulse(format!(
                        "rms width must be positive, got {rms_width_s} s"
                    )));
                }
                let droop = self.envelope_droop_db(band_hz);
                if droop >= MAX_ENVELOPE_DROOP_DB {
                    return Err(SynthError::InvalidPulse(format!(
                        "rms width {rms_width_s} s droops {droop:.2} dB at {band_hz} Hz \
                         (limit {MAX_ENVELOPE_DROOP_DB} dB)"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Relative weight of a harmonic at `freq_hz`.
    pub fn envelope(&self, freq_hz: f64) -> f64 {
        match *self {
            PulseShape::IdealComb => 1.0,
            PulseShape::Gaussian { rms_width_s } => {
                let x = PI * freq_hz * rms_width_s;
                (-2.0 * x * x).exp()
            }
        }
    }

    /// Harmonic weight `c_n` for comb order `n`.
    pub fn coefficient(&self, comb: &CombSpec, n: usize) -> f64 {
        self.envelope(comb.harmonic_hz(n))
    }

    pub fn envelope_droop_db(&self, freq_hz: f64) -> f64 {
        match *self {
            PulseShape::IdealComb => 0.0,
            PulseShape::Gaussian { rms_width_s } => {
                let x = PI * freq_hz * rms_width_s;
                20.0 * 2.0 * x * x / LN_10
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Tone peak-bin power over mean noise-bin power. `+∞` disables noise.
    pub spectral_snr_db: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(spectral_snr_db: f64, seed: u64) -> Result<Self, SynthError> {
        if spectral_snr_db.is_nan() || spectral_snr_db == f64::NEG_INFINITY {
            return Err(SynthError::InvalidNoise(format!(
                "spectral SNR must be finite or +inf, got {spectral_snr_db} dB"
            )));
        }
        Ok(Self {
            spectral_snr_db,
            seed,
        })
    }

    pub fn disabled() -> Self {
        Self {
            spectral_snr_db: f64::INFINITY,
            seed: 0,
        }
    }

    pub fn is_disabled(&self) -> bool {
        self.spectral_snr_db == f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlock {
    samples: Vec<f64>,
    grid: FrequencyGrid,
}

impl SampleBlock {
    pub fn new(samples: Vec<f64>, grid: FrequencyGrid) -> Result<Self, SynthError> {
        if samples.len() != grid.fft_size() {
            return Err(SynthError::LengthMismatch {
                got: samples.len(),
                expected: grid.fft_size(),
            });
        }
        Ok(Self { samples, grid })
    }

    pub fn zeros(grid: FrequencyGrid) -> Self {
        Self {
            samples: vec![0.0; grid.fft_size()],
            grid,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * factor).collect(),
            grid: self.grid,
        }
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Adds `amplitude cos(2π freq k / sample_rate + phase)` to every sample.
fn accumulate_cosine(
    out: &mut [f64],
    freq_hz: f64,
    sample_rate_hz: f64,
    amplitude: f64,
    phase: f64,
) {
    let step = Complex64::from_polar(1.0, TAU * (freq_hz / sample_rate_hz));
    for (c, chunk) in out.chunks_mut(RESYNC_SAMPLES).enumerate() {
        let k0 = (c * RESYNC_SAMPLES) as f64;
        let start = TAU * frac_mod1(freq_hz * k0 / sample_rate_hz) + phase;
        let mut z = Complex64::from_polar(amplitude, start);
        for s in chunk {
            *s += z.re;
            z *= step;
        }
    }
}

/// Sum of cosines sampled on the grid. Deterministic.
pub fn synth_tones(tones: &[ToneSpec], grid: &FrequencyGrid) -> Result<SampleBlock, SynthError> {
    let mut samples = vec![0.0; grid.fft_size()];
    for tone in tones {
        tone.check_band(grid)?;
        accumulate_cosine(
            &mut samples,
            tone.freq_hz,
            grid.sample_rate_hz(),
            tone.amplitude,
            tone.phase_rad,
        );
    }
    SampleBlock::new(samples, *grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineSign {
    Sum,
    Difference,
}

/// One spectral line at the mixer output, with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixedLine {
    pub freq_hz: f64,
    pub amplitude: f64,
    pub phase_rad: f64,
    pub tone: usize,
    pub sign: LineSign,
    pub order: usize,
    /// Difference line whose signed frequency `f - n f_c` is negative.
    pub folded: bool,
    /// Another line from a different provenance sits at the same frequency.
    pub coincident: bool,
}

/// Every mixer output line inside `(0, f_s/2)`, listed per tone, then per
/// order, difference before sum. Order 0 appears once, as a difference line.
pub fn mixed_line_table(
    tones: &[ToneSpec],
    comb: &CombSpec,
    pulse: &PulseShape,
    grid: &FrequencyGrid,
) -> Vec<MixedLine> {
    let nyquist = grid.nyquist_hz();
    let f_c = comb.rep_rate_hz();
    let mut lines = Vec::new();
    for (j, tone) in tones.iter().enumerate() {
        let max_order = ((tone.freq_hz + nyquist) / f_c).ceil() as usize;
        for n in 0..=max_order {
            // Harmonic n of the delayed comb carries phase -2π n f_c t0.
            let theta = TAU * frac_mod1(comb.harmonic_hz(n) * comb.timing_offset_s());
            let amplitude = tone.amplitude * pulse.coefficient(comb, n);
            let diff = tone.freq_hz - comb.harmonic_hz(n);
            let diff_phase = tone.phase_rad + theta;
            let (freq_hz, phase_rad, folded) = if diff >= 0.0 {
                (diff, diff_phase, false)
            } else {
                (-diff, -diff_phase, true)
            };
            if freq_hz > 0.0 && freq_hz < nyquist {
                lines.push(MixedLine {
                    freq_hz,
                    amplitude,
                    phase_rad,
                    tone: j,
                    sign: LineSign::Difference,
                    order: n,
                    folded,
                    coincident: false,
                });
            }
            let sum = tone.freq_hz + comb.harmonic_hz(n);
            if n > 0 && sum < nyquist {
                lines.push(MixedLine {
                    freq_hz: sum,
                    amplitude,
                    phase_rad: tone.phase_rad - theta,
                    tone: j,
                    sign: LineSign::Sum,
                    order: n,
                    folded: false,
                    coincident: false,
                });
            }
        }
    }
    flag_coincidences(&mut lines, grid.resolution_hz() * 1e-9);
    lines
}

fn flag_coincidences(lines: &mut [MixedLine], tolerance_hz: f64) {
    let mut order: Vec<usize> = (0..lines.len()).collect();
    order.sort_by(|&a, &b| lines[a].freq_hz.total_cmp(&lines[b].freq_hz));
    for w in order.windows(2) {
        if (lines[w[1]].freq_hz - lines[w[0]].freq_hz).abs() <= tolerance_hz {
            lines[w[0]].coincident = true;
            lines[w[1]].coincident = true;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PresampleMethod {
    /// Band-limited line sum evaluated directly on the ADC grid.
    #[default]
    Analytic,
    /// Pointwise product on a grid `factor` times denser, brick-wall
    /// low-passed at `f_s/2` in the transform domain, then decimated.
    Oversampled { factor: usize },
}

impl PresampleMethod {
    pub fn oversampled() -> Self {
        PresampleMethod::Oversampled {
            factor: DEFAULT_OVERSAMPLE_FACTOR,
        }
    }
}

/// Samples the mixer output as the ADC sees it.
pub fn presample(
    tones: &[ToneSpec],
    comb: &CombSpec,
    pulse: &PulseShape,
    grid: &FrequencyGrid,
    method: PresampleMethod,
) -> Result<SampleBlock, SynthError> {
    for tone in tones {
        tone.check_band(grid)?;
    }
    pulse.validate(grid.nyquist_hz())?;
    match method {
        PresampleMethod::Analytic => Ok(presample_analytic(tones, comb, pulse, grid)),
        PresampleMethod::Oversampled { factor } => {
            presample_oversampled(tones, comb, pulse, grid, factor)
        }
    }
}

fn presample_analytic(
    tones: &[ToneSpec],
    comb: &CombSpec,
    pulse: &PulseShape,
    grid: &FrequencyGrid,
) -> SampleBlock {
    let mut samples = vec![0.0; grid.fft_size()];
    for line in mixed_line_table(tones, comb, pulse, grid) {
        accumulate_cosine(
            &mut samples,
            line.freq_hz,
            grid.sample_rate_hz(),
            line.amplitude,
            line.phase_rad,
        );
    }
    SampleBlock {
        samples,
        grid: *grid,
    }
}

fn presample_oversampled(
    tones: &[ToneSpec],
    comb: &CombSpec,
    pulse: &PulseShape,
    grid: &FrequencyGrid,
    factor: usize,
) -> Result<SampleBlock, SynthError> {
    if factor < 2 {
        return Err(SynthError::Config(format!(
            "oversampling factor must be at least 2, got {factor}"
        )));
    }
    let n = grid.fft_size();
    let dense_n = n * factor;
    let dense_rate = grid.sample_rate_hz() * factor as f64;

    let mut signal = vec![0.0; dense_n];
    for tone in tones {
        accumulate_cosine(
            &mut signal,
            tone.freq_hz,
            dense_rate,
            tone.amplitude,
            tone.phase_rad,
        );
    }
    let train = render_pulse_train(tones, comb, pulse, dense_n, dense_rate)?;

    let mut dense: Vec<Complex64> = signal
        .iter()
        .zip(&train)
        .map(|(s, p)| Complex64::new(s * p, 0.0))
        .collect();
    fft::forward(&mut dense);

    // Keep |k| < N/2, fold onto the coarse grid and invert.
    let half = n / 2;
    let mut coarse = vec![Complex64::new(0.0, 0.0); n];
    let limit = if n.is_multiple_of(2) { half } else { half + 1 };
    for k in 0..limit {
        coarse[k] = dense[k];
        if k > 0 {
            coarse[n - k] = dense[dense_n - k];
        }
    }
    fft::inverse(&mut coarse);
    let scale = 1.0 / dense_n as f64;
    let samples = coarse.iter().map(|z| z.re * scale).collect();
    Ok(SampleBlock {
        samples,
        grid: *grid,
    })
}

/// Pulse train normalized to unit DC weight, sampled at `rate_hz`.
fn render_pulse_train(
    tones: &[ToneSpec],
    comb: &CombSpec,
    pulse: &PulseShape,
    len: usize,
    rate_hz: f64,
) -> Result<Vec<f64>, SynthError> {
    let f_c = comb.rep_rate_hz();
    let t0 = comb.timing_offset_s();
    match *pulse {
        PulseShape::IdealComb => {
            // Band-limit the comb so no product line aliases on the dense grid.
            let max_tone = tones.iter().map(|t| t.freq_hz).fold(0.0, f64::max);
            let harmonics = ((rate_hz / 2.0 - max_tone) / f_c).floor();
            if harmonics < 1.0 {
                return Err(SynthError::Config(format!(
                    "oversampled rate {rate_hz} Hz leaves no room for comb harmonics"
                )));
            }
            let order = harmonics + 0.5;
            Ok((0..len)
                .map(|k| {
                    let x = TAU * frac_mod1(f_c * k as f64 / rate_hz - f_c * t0);
                    let den = (0.5 * x).sin();
                    if den.abs() < 1e-12 {
                        2.0 * harmonics + 1.0
                    } else {
                        (order * x).sin() / den
                    }
                })
                .collect())
        }
        PulseShape::Gaussian { rms_width_s } => {
            let fwhm = 2.0 * (2.0 * 2f64.ln()).sqrt() * rms_width_s;
            let per_fwhm = fwhm * rate_hz;
            if per_fwhm < MIN_SAMPLES_PER_FWHM {
                return Err(SynthError::Config(format!(
                    "gaussian pulse FWHM {fwhm:e} s spans {per_fwhm:.2} samples at {rate_hz} Hz \
                     (need {MIN_SAMPLES_PER_FWHM})"
                )));
            }
            let norm = 1.0 / (f_c * rms_width_s * TAU.sqrt());
            let reach = 10.0 * rms_width_s * f_c;
            Ok((0..len)
                .map(|k| {
                    // Position in pulse periods since the first pulse.
                    let u = f_c * k as f64 / rate_hz - f_c * t0;
                    let lo = (u - reach).floor() as i64;
                    let hi = (u + reach).ceil() as i64;
                    (lo..=hi)
                        .map(|j| {
                            let dt = (u - j as f64) / f_c;
                            (-0.5 * (dt / rms_width_s).powi(2)).exp()
                        })
                        .sum::<f64>()
                        * norm
                })
                .collect())
        }
    }
}

/// Noise standard deviation giving the requested peak-bin to noise-bin ratio
/// for a tone of `reference_amplitude` under an unwindowed `fft_size`-point
/// transform: `(A N / 2)^2 / (N σ^2) = 10^(snr/10)`.
pub fn noise_sigma(fft_size: usize, spectral_snr_db: f64, reference_amplitude: f64) -> f64 {
    reference_amplitude * (fft_size as f64 / (4.0 * 10f64.powf(spectral_snr_db / 10.0))).sqrt()
}

/// Adds seeded white gaussian noise calibrated to a spectral-domain SNR.
pub fn add_noise(
    block: &SampleBlock,
    noise: &NoiseSpec,
    reference_amplitude: f64,
) -> Result<SampleBlock, SynthError> {
    if !(reference_amplitude.is_finite() && reference_amplitude > 0.0) {
        return Err(SynthError::InvalidNoise(format!(
            "reference amplitude must be positive, got {reference_amplitude}"
        )));
    }
    if noise.is_disabled() {
        return Ok(block.clone());
    }
    let sigma = noise_sigma(
        block.samples.len(),
        noise.spectral_snr_db,
        reference_amplitude,
    );
    let normal = Normal::new(0.0, sigma).map_err(|e| SynthError::InvalidNoise(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let samples = block
        .samples
        .iter()
        .map(|s| s + normal.sample(&mut rng))
        .collect();
    Ok(SampleBlock {
        samples,
        grid: block.grid,
    })
}

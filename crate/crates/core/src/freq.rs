//! Bin-grid arithmetic for comb presampling.
//!
//! A tone at `f` sits at fractional bin `m + δ` of an FFT grid with
//! resolution `f_res = f_s / N`. After mixing with a pulse comb of
//! repetition rate `f_c = (α + ε) f_res`, the copy of the tone in order `n`
//! lands at `f - n f_c`, whose bin fraction is `δ - nε (mod 1)`. Peak
//! picking quantizes that fraction to the nearest bin, so the per-order
//! error depends only on `δ`, `ε` and `n`. Averaging the reconstructed
//! estimates over orders `0..N` spreads the quantization points evenly over
//! a bin when `εN = 1`, shrinking the worst-case error by a factor of `N`.
//!
//! Everything here is closed-form; the signal chain in the other modules is
//! validated against these functions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Distance from an integer bin below which an index is snapped onto it.
pub const INDEX_SNAP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FreqError {
    #[error("frequency must be non-negative and finite, got {0} Hz")]
    NegativeFrequency(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid comb: {0}")]
    InvalidComb(String),
    #[error(
        "order {order} folds through DC: {freq_hz} Hz - {order} x {rep_rate_hz} Hz = {copy_hz} Hz"
    )]
    Fold {
        freq_hz: f64,
        order: usize,
        rep_rate_hz: f64,
        copy_hz: f64,
    },
}

/// Sampling rate, transform length and the bin spacing they imply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyGrid {
    sample_rate_hz: f64,
    fft_size: usize,
    resolution_hz: f64,
}

impl FrequencyGrid {
    pub fn new(sample_rate_hz: f64, fft_size: usize) -> Result<Self, FreqError> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(FreqError::InvalidGrid(format!(
                "sample rate must be positive, got {sample_rate_hz} Hz"
            )));
        }
        if fft_size < 2 {
            return Err(FreqError::InvalidGrid(format!(
                "fft size must be at least 2, got {fft_size}"
            )));
        }
        Ok(Self {
            sample_rate_hz,
            fft_size,
            resolution_hz: sample_rate_hz / fft_size as f64,
        })
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn resolution_hz(&self) -> f64 {
        self.resolution_hz
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.sample_rate_hz / 2.0
    }

    /// Number of one-sided spectrum bins, `N/2 + 1`.
    pub fn one_sided_len(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn bin_to_hz(&self, bin: f64) -> f64 {
        bin * self.resolution_hz
    }
}

/// Position of a frequency on a grid as integer bin plus fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyIndex {
    pub integer_part: u64,
    pub fractional_part: f64,
}

impl FrequencyIndex {
    pub fn bins(&self) -> f64 {
        self.integer_part as f64 + self.fractional_part
    }
}

/// Decomposes `freq_hz` into `(m, δ)` with `freq_hz = (m + δ) f_res`.
///
/// The fraction comes from an exact floating-point remainder, so values
/// that are representable multiples of the resolution decompose without
/// drift. Fractions within [`INDEX_SNAP`] of an integer are snapped.
pub fn index_of(freq_hz: f64, grid: &FrequencyGrid) -> Result<FrequencyIndex, FreqError> {
    if !(freq_hz.is_finite() && freq_hz >= 0.0) {
        return Err(FreqError::NegativeFrequency(freq_hz));
    }
    let res = grid.resolution_hz();
    let rem = freq_hz % res;
    let mut integer_part = ((freq_hz - rem) / res).round() as u64;
    let mut fractional_part = rem / res;
    if fractional_part >= 1.0 - INDEX_SNAP {
        integer_part += 1;
        fractional_part = 0.0;
    } else if fractional_part < INDEX_SNAP {
        fractional_part = 0.0;
    }
    Ok(FrequencyIndex {
        integer_part,
        fractional_part,
    })
}

/// Fractional part with the floor convention: always in `[0, 1)`.
pub fn frac_mod1(x: f64) -> f64 {
    let r = x - x.floor();
    // Tiny negative inputs round up to exactly 1.0.
    if r >= 1.0 {
        1.0 - f64::EPSILON / 2.0
    } else {
        r
    }
}

/// Nearest integer, exact halves toward +∞.
pub fn round_half_up(x: f64) -> i64 {
    let f = x.floor();
    if x - f >= 0.5 {
        f as i64 + 1
    } else {
        f as i64
    }
}

/// Single-order quantization error `[δ] - δ`, in bins.
pub fn delta_single(delta: f64) -> f64 {
    round_half_up(delta) as f64 - delta
}

/// Quantization error of order `n`, in bins: `[rmod(δ - nε)] - rmod(δ - nε)`.
pub fn delta_order(delta: f64, epsilon: f64, n: usize) -> f64 {
    let x = frac_mod1(delta - n as f64 * epsilon);
    round_half_up(x) as f64 - x
}

/// Mean of [`delta_order`] over orders `0..order_count`, in bins.
pub fn delta_mda(delta: f64, epsilon: f64, order_count: usize) -> f64 {
    assert!(order_count >= 1, "order_count must be at least 1");
    let sum: f64 = (0..order_count)
        .map(|n| delta_order(delta, epsilon, n))
        .sum();
    sum / order_count as f64
}

/// Pulse comb decomposed on a grid: `rep_rate_hz = (alpha + epsilon) f_res`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CombSpec {
    rep_rate_hz: f64,
    alpha: u64,
    epsilon: f64,
    /// Time of the first pulse relative to the first ADC sample.
    timing_offset_s: f64,
}

impl CombSpec {
    pub fn on_grid(rep_rate_hz: f64, grid: &FrequencyGrid) -> Result<Self, FreqError> {
        if !(rep_rate_hz.is_finite() && rep_rate_hz > 0.0) {
            return Err(FreqError::InvalidComb(format!(
                "repetition rate must be positive, got {rep_rate_hz} Hz"
            )));
        }
        let idx = index_of(rep_rate_hz, grid)?;
        Ok(Self {
            rep_rate_hz,
            alpha: idx.integer_part,
            epsilon: idx.fractional_part,
            timing_offset_s: 0.0,
        })
    }

    pub fn with_timing_offset(mut self, timing_offset_s: f64) -> Result<Self, FreqError> {
        if !timing_offset_s.is_finite() {
            return Err(FreqError::InvalidComb(format!(
                "timing offset must be finite, got {timing_offset_s} s"
            )));
        }
        self.timing_offset_s = timing_offset_s;
        Ok(self)
    }

    pub fn rep_rate_hz(&self) -> f64 {
        self.rep_rate_hz
    }

    pub fn alpha(&self) -> u64 {
        self.alpha
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn timing_offset_s(&self) -> f64 {
        self.timing_offset_s
    }

    /// Frequency of comb harmonic `n`.
    pub fn harmonic_hz(&self, n: usize) -> f64 {
        n as f64 * self.rep_rate_hz
    }
}

/// Per-order deviation in bins and in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationRecord {
    pub order: usize,
    pub deviation_bins: f64,
    pub deviation_hz: f64,
}

impl DeviationRecord {
    pub fn new(order: usize, deviation_bins: f64, grid: &FrequencyGrid) -> Self {
        Self {
            order,
            deviation_bins,
            deviation_hz: deviation_bins * grid.resolution_hz(),
        }
    }
}

/// Frequency of the order-`n` difference copy, `f_in - n f_c`.
pub fn copy_frequency(f_in_hz: f64, comb: &CombSpec, n: usize) -> Result<f64, FreqError> {
    let copy_hz = f_in_hz - comb.harmonic_hz(n);
    if copy_hz <= 0.0 {
        return Err(FreqError::Fold {
            freq_hz: f_in_hz,
            order: n,
            rep_rate_hz: comb.rep_rate_hz(),
            copy_hz,
        });
    }
    Ok(copy_hz)
}

/// Fundamental implied by a copy measured in order `n`.
pub fn reconstruct(f_meas_zone_hz: f64, comb: &CombSpec, n: usize) -> f64 {
    f_meas_zone_hz + comb.harmonic_hz(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_grid() -> FrequencyGrid {
        FrequencyGrid::new(20e9, 100_000).unwrap()
    }

    fn reference_comb() -> CombSpec {
        CombSpec::on_grid(100.02e6, &reference_grid()).unwrap()
    }

    /// Evaluates one order's deviation with integer arithmetic: `delta` and
    /// `epsilon` are given in units of `1/scale`.
    fn order_units(delta_units: i64, epsilon_units: i64, n: i64, scale: i64) -> i64 {
        let x = (delta_units - n * epsilon_units).rem_euclid(scale);
        let rounded = if 2 * x >= scale { scale } else { 0 };
        rounded - x
    }

    fn order_oracle(delta_units: i64, epsilon_units: i64, n: i64, scale: i64) -> f64 {
        order_units(delta_units, epsilon_units, n, scale) as f64 / scale as f64
    }

    fn mda_oracle(delta_units: i64, epsilon_units: i64, order_count: i64, scale: i64) -> f64 {
        let sum: i64 = (0..order_count)
            .map(|n| order_units(delta_units, epsilon_units, n, scale))
            .sum();
        sum as f64 / (order_count * scale) as f64
    }

    #[test]
    fn grid_resolution() {
        let g = reference_grid();
        assert_eq!(g.resolution_hz(), 200e3);
        assert_eq!(g.resolution_hz() * g.fft_size() as f64, g.sample_rate_hz());
        assert_eq!(g.one_sided_len(), 50_001);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(FrequencyGrid::new(0.0, 16).is_err());
        assert!(FrequencyGrid::new(-1.0, 16).is_err());
        assert!(FrequencyGrid::new(f64::NAN, 16).is_err());
        assert!(FrequencyGrid::new(1.0, 1).is_err());
    }

    #[test]
    fn index_of_examples() {
        let g = reference_grid();
        let i = index_of(1.321e9, &g).unwrap();
        assert_eq!((i.integer_part, i.fractional_part), (6605, 0.0));
        let i = index_of(0.0, &g).unwrap();
        assert_eq!((i.integer_part, i.fractional_part), (0, 0.0));
        let i = index_of(100.02e6, &g).unwrap();
        assert_eq!(i.integer_part, 500);
        assert_eq!(i.fractional_part, 0.1);
        assert!(matches!(
            index_of(-1.0, &g),
            Err(FreqError::NegativeFrequency(_))
        ));
    }

    #[test]
    fn index_of_snaps_near_integers() {
        let g = reference_grid();
        let i = index_of(200e3 * 7.0 - 1e-3, &g).unwrap();
        assert_eq!((i.integer_part, i.fractional_part), (7, 0.0));
        let i = index_of(200e3 * 7.0 + 1e-3, &g).unwrap();
        assert_eq!((i.integer_part, i.fractional_part), (7, 0.0));
    }

    #[test]
    fn frac_mod1_examples() {
        assert_eq!(frac_mod1(0.3), 0.3);
        assert!((frac_mod1(-0.3) - 0.7).abs() < 1e-15);
        assert_eq!(frac_mod1(2.0), 0.0);
        assert!(frac_mod1(-1e-20) < 1.0);
    }

    #[test]
    fn round_half_up_examples() {
        assert_eq!(round_half_up(0.49), 0);
        assert_eq!(round_half_up(0.5), 1);
        assert_eq!(round_half_up(-0.5), 0);
        assert_eq!(round_half_up(0.49999999999999994), 0);
        assert_eq!(round_half_up(-1.5), -1);
    }

    #[test]
    fn delta_single_examples() {
        assert_eq!(delta_single(0.0), 0.0);
        assert_eq!(delta_single(0.3), -0.3);
        assert_eq!(delta_single(0.5), 0.5);
    }

    #[test]
    fn delta_order_examples() {
        assert_eq!(delta_order(0.0, 0.1, 5), 0.5);
        assert_eq!(delta_order(0.0, 0.1, 5) * 200e3, 100e3);
        let expected = order_oracle(25, 10, 2, 100);
        assert_eq!(expected, -0.05);
        assert!((delta_order(0.25, 0.1, 2) - expected).abs() < 1e-12);
        assert!((delta_order(0.7, 0.0, 3) - delta_single(0.7)).abs() < 1e-15);
        assert!((delta_order(0.7, 0.0, 3) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn delta_mda_examples() {
        assert_eq!(mda_oracle(0, 10, 10, 100), 0.05);
        assert!((delta_mda(0.0, 0.1, 10) - 0.05).abs() < 1e-15);
        assert!((delta_mda(0.0, 0.1, 10) * 200e3 - 10e3).abs() < 1e-9);

        let oracle = mda_oracle(37, 10, 10, 100);
        assert!((oracle + 0.02).abs() < 1e-15);
        assert!((delta_mda(0.37, 0.1, 10) - oracle).abs() < 1e-12);

        for d in [0.0, 0.2, 0.5, 0.77] {
            assert_eq!(delta_mda(d, 0.0, 1), delta_single(d));
        }
    }

    #[test]
    fn comb_decomposition() {
        let comb = reference_comb();
        assert_eq!(comb.alpha(), 500);
        assert_eq!(comb.epsilon(), 0.1);
        let g = reference_grid();
        let back = (comb.alpha() as f64 + comb.epsilon()) * g.resolution_hz();
        assert!((back - comb.rep_rate_hz()).abs() <= comb.rep_rate_hz() * f64::EPSILON);
        assert!(CombSpec::on_grid(0.0, &g).is_err());
        assert!(reference_comb().with_timing_offset(f64::NAN).is_err());
    }

    #[test]
    fn copy_frequency_examples() {
        let comb = reference_comb();
        assert_eq!(copy_frequency(1.321e9, &comb, 5).unwrap(), 820.9e6);
        assert_eq!(copy_frequency(1.321e9, &comb, 0).unwrap(), 1.321e9);
        assert!(matches!(
            copy_frequency(1.321e9, &comb, 14),
            Err(FreqError::Fold { order: 14, .. })
        ));
    }

    #[test]
    fn reconstruct_examples() {
        let comb = reference_comb();
        let r = reconstruct(820.8e6, &comb, 5);
        assert_eq!(r, 1.3209e9);
        assert_eq!(r - 1.321e9, -100e3);
        assert_eq!(reconstruct(123.0, &comb, 0), 123.0);
        assert_eq!(reconstruct(820.9e6, &comb, 5), 1.321e9);
    }

    #[test]
    fn deviation_record_scales_by_resolution() {
        let r = DeviationRecord::new(3, -0.25, &reference_grid());
        assert_eq!(r.deviation_hz, -50e3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        const SCALE: f64 = (1u64 << 20) as f64;

        proptest! {
            #[test]
            fn round_trip_on_grid(m in 1u64..2_000_000, n in 0usize..13) {
                let g = reference_grid();
                let comb = reference_comb();
                let f = m as f64 * g.resolution_hz() + 13.0 * comb.rep_rate_hz();
                let copy = copy_frequency(f, &comb, n).unwrap();
                prop_assert_eq!(reconstruct(copy, &comb, n), f);
            }

            #[test]
            fn order_bound(d in 0.0f64..1.0, e in 0.0f64..1.0, n in 0usize..1000) {
                prop_assert!(delta_order(d, e, n).abs() <= 0.5);
            }

            #[test]
            fn order_zero_is_single(d in 0.0f64..1.0, e in 0.0f64..1.0) {
                prop_assert_eq!(delta_order(d, e, 0), delta_single(d));
            }

            #[test]
            fn periodic_in_both_arguments(a in 0u32..(1 << 20), b in 0u32..(1 << 20), n in 0usize..64) {
                let d = a as f64 / SCALE;
                let e = b as f64 / SCALE;
                let base = delta_order(d, e, n);
                prop_assert_eq!(delta_order(d + 1.0, e, n), base);
                prop_assert_eq!(delta_order(d, e + 1.0, n), base);
            }

            #[test]
            fn frac_plus_floor(x in -1e6f64..1e6) {
                prop_assert_eq!(frac_mod1(x) + x.floor(), x);
                let f = frac_mod1(x);
                prop_assert!((0.0..1.0).contains(&f));
            }

            #[test]
            fn mda_bound_when_epsilon_n_is_one(d in 0.0f64..1.0, order_count in 1usize..40) {
                let e = 1.0 / order_count as f64;
                let bound = 0.5 / order_count as f64;
                prop_assert!(delta_mda(d, e, order_count).abs() <= bound + 1e-12);
            }
        }
    }
}

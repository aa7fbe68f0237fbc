//! Multi-order deviation averaging (MDA).
//!
//! Every detected line is a candidate copy of some fundamental in every
//! order `n`, reconstructing to `bin * f_res + n * f_c`. Candidates from
//! the true copies of one tone land within a bin of each other, so the
//! estimator links candidates that agree within a small tolerance and keeps
//! the groups holding exactly one copy per order `0..N`. The estimate is the
//! mean of the reconstructions.
//!
//! A comb spectrum is self-similar: a tone at `f` and one at `f + k f_c`
//! (or at `k f_c - f`) produce the same set of lines, so several complete
//! groups exist per tone. The caller resolves that by supplying a coarse
//! prior for each tone (its known Nyquist zone); without priors, overlapping
//! groups are reported as ambiguous.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freq::{
    copy_frequency, delta_mda, delta_order, index_of, reconstruct, CombSpec, DeviationRecord,
    FreqError, FrequencyGrid,
};
use crate::spectral::{refine, Peak, QuadVariant, SpectralError, Spectrum};

pub const DEFAULT_CLUSTER_TOLERANCE_BINS: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("estimation failed: {0}")]
    Failure(String),
    #[error("ambiguous association at bins {bins:?}: {reason}")]
    Ambiguous { bins: Vec<usize>, reason: String },
    #[error("invalid zones: {0}")]
    InvalidZones(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Freq(#[from] FreqError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// One copy of a tone measured in comb order `order`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneMeasurement {
    pub order: usize,
    pub measured_bin: usize,
    pub refined_offset_bins: Option<f64>,
    pub zone_freq_hz: f64,
    pub reconstructed_hz: f64,
    pub deviation_hz: Option<f64>,
    /// The refinement fit was degenerate and fell back to the bin center.
    #[serde(default)]
    pub degenerate_fit: bool,
}

impl ZoneMeasurement {
    pub fn new(
        order: usize,
        measured_bin: usize,
        refined_offset_bins: Option<f64>,
        grid: &FrequencyGrid,
        comb: &CombSpec,
    ) -> Self {
        let position = measured_bin as f64 + refined_offset_bins.unwrap_or(0.0);
        let zone_freq_hz = grid.bin_to_hz(position);
        Self {
            order,
            measured_bin,
            refined_offset_bins,
            zone_freq_hz,
            reconstructed_hz: reconstruct(zone_freq_hz, comb, order),
            deviation_hz: None,
            degenerate_fit: false,
        }
    }
}

/// Averaged estimate for one tone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdaEstimate {
    pub zones: Vec<ZoneMeasurement>,
    pub estimate_hz: f64,
    pub avg_deviation_hz: Option<f64>,
    pub order_count: usize,
}

impl MdaEstimate {
    /// Fills per-zone and averaged deviations against a known frequency.
    pub fn with_truth(mut self, truth_hz: f64) -> Self {
        for z in &mut self.zones {
            z.deviation_hz = Some(z.reconstructed_hz - truth_hz);
        }
        self.avg_deviation_hz = Some(self.estimate_hz - truth_hz);
        self
    }

    pub fn max_abs_zone_deviation_hz(&self) -> Option<f64> {
        self.zones
            .iter()
            .map(|z| z.deviation_hz.map(f64::abs))
            .try_fold(0.0, |acc: f64, d| d.map(|d| acc.max(d)))
    }
}

/// One tone's complete set of copies, one per order, sorted by order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToneCluster {
    pub id: usize,
    pub center_hz: f64,
    pub zones: Vec<ZoneMeasurement>,
    /// Index into the caller's prior list, when priors were used.
    pub prior: Option<usize>,
}

impl ToneCluster {
    pub fn bins(&self) -> Vec<usize> {
        self.zones.iter().map(|z| z.measured_bin).collect()
    }
}

/// A linked group of candidates missing some orders.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedCluster {
    pub center_hz: f64,
    pub orders_found: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorFailure {
    pub prior: usize,
    pub prior_hz: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Association {
    pub clusters: Vec<ToneCluster>,
    pub dropped: Vec<DroppedCluster>,
    pub prior_failures: Vec<PriorFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationParams {
    pub order_count: usize,
    /// Candidates closer than this many bins are linked into one group.
    pub cluster_tolerance_bins: f64,
    /// Approximate fundamentals, one per tone to recover.
    pub priors_hz: Vec<f64>,
    /// How far a group may sit from its prior; `None` means half the
    /// repetition rate.
    pub prior_tolerance_hz: Option<f64>,
}

impl AssociationParams {
    pub fn new(order_count: usize) -> Self {
        Self {
            order_count,
            cluster_tolerance_bins: DEFAULT_CLUSTER_TOLERANCE_BINS,
            priors_hz: Vec::new(),
            prior_tolerance_hz: None,
        }
    }

    pub fn with_priors(mut self, priors_hz: Vec<f64>) -> Self {
        self.priors_hz = priors_hz;
        self
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    peak: usize,
    order: usize,
    freq_hz: f64,
}

enum Group {
    Complete {
        center_hz: f64,
        members: Vec<Candidate>,
    },
    Partial {
        center_hz: f64,
        orders_found: usize,
    },
    DuplicateOrder {
        center_hz: f64,
        bins: Vec<usize>,
    },
}

fn group_candidates(
    peaks: &[Peak],
    comb: &CombSpec,
    grid: &FrequencyGrid,
    order_count: usize,
    tolerance_hz: f64,
) -> Vec<Group> {
    let mut candidates: Vec<Candidate> = peaks
        .iter()
        .enumerate()
        .flat_map(|(i, p)| {
            let f = grid.bin_to_hz(p.bin as f64);
            (0..order_count).map(move |n| Candidate {
                peak: i,
                order: n,
                freq_hz: reconstruct(f, comb, n),
            })
        })
        .collect();
    candidates.sort_by(|a, b| {
        a.freq_hz
            .total_cmp(&b.freq_hz)
            .then(a.peak.cmp(&b.peak))
            .then(a.order.cmp(&b.order))
    });

    let mut groups = Vec::new();
    let mut start = 0;
    for end in 1..=candidates.len() {
        let split = end == candidates.len()
            || candidates[end].freq_hz - candidates[end - 1].freq_hz > tolerance_hz;
        if !split {
            continue;
        }
        let members = &candidates[start..end];
        start = end;
        let center_hz = members.iter().map(|c| c.freq_hz).sum::<f64>() / members.len() as f64;
        let mut by_order: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for c in members {
            by_order.entry(c.order).or_default().push(peaks[c.peak].bin);
        }
        if let Some(bins) = by_order.values().find(|b| b.len() > 1) {
            groups.push(Group::DuplicateOrder {
                center_hz,
                bins: bins.clone(),
            });
        } else if by_order.len() == order_count {
            let mut members = members.to_vec();
            members.sort_by_key(|c| c.order);
            groups.push(Group::Complete { center_hz, members });
        } else {
            groups.push(Group::Partial {
                center_hz,
                orders_found: by_order.len(),
            });
        }
    }
    groups
}

fn cluster_from(
    id: usize,
    center_hz: f64,
    members: &[Candidate],
    peaks: &[Peak],
    grid: &FrequencyGrid,
    comb: &CombSpec,
    prior: Option<usize>,
) -> ToneCluster {
    ToneCluster {
        id,
        center_hz,
        zones: members
            .iter()
            .map(|c| ZoneMeasurement::new(c.order, peaks[c.peak].bin, None, grid, comb))
            .collect(),
        prior,
    }
}

fn check_partition(clusters: &[ToneCluster]) -> Result<(), EstimateError> {
    let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
    for c in clusters {
        for bin in c.bins() {
            if let Some(&other) = owner.get(&bin) {
                return Err(EstimateError::Ambiguous {
                    bins: vec![bin],
                    reason: format!(
                        "peak is consistent with clusters {other} ({:.1} Hz) and {} ({:.1} Hz)",
                        clusters[other].center_hz, c.id, c.center_hz
                    ),
                });
            }
            owner.insert(bin, c.id);
        }
    }
    Ok(())
}

/// Groups peaks into tones with one copy per order, without priors.
pub fn associate_orders(
    peaks: &[Peak],
    comb: &CombSpec,
    grid: &FrequencyGrid,
    order_count: usize,
) -> Result<Association, EstimateError> {
    associate_orders_with(peaks, comb, grid, &AssociationParams::new(order_count))
}

/// Groups peaks into tones. With priors, each prior claims the nearest
/// complete group within its tolerance; a prior with no such group, or with
/// two equally near, is reported in `prior_failures`.
pub fn associate_orders_with(
    peaks: &[Peak],
    comb: &CombSpec,
    grid: &FrequencyGrid,
    params: &AssociationParams,
) -> Result<Association, EstimateError> {
    let order_count = params.order_count;
    if order_count == 0 {
        return Err(EstimateError::InvalidInput(
            "order_count must be at least 1".into(),
        ));
    }
    if !(params.cluster_tolerance_bins.is_finite() && params.cluster_tolerance_bins > 0.0) {
        return Err(EstimateError::InvalidInput(format!(
            "cluster tolerance must be positive, got {} bins",
            params.cluster_tolerance_bins
        )));
    }
    if peaks.is_empty() {
        return Err(EstimateError::Failure("no peaks to associate".into()));
    }
    let tolerance_hz = params.cluster_tolerance_bins * grid.resolution_hz();
    let groups = group_candidates(peaks, comb, grid, order_count, tolerance_hz);

    let dropped: Vec<DroppedCluster> = groups
        .iter()
        .filter_map(|g| match g {
            Group::Partial {
                center_hz,
                orders_found,
            } => Some(DroppedCluster {
                center_hz: *center_hz,
                orders_found: *orders_found,
            }),
            _ => None,
        })
        .collect();
    log::debug!(
        "{} candidate groups, {} dropped as incomplete",
        groups.len(),
        dropped.len()
    );

    if params.priors_hz.is_empty() {
        let mut clusters = Vec::new();
        for g in &groups {
            match g {
                Group::Complete { center_hz, members } => {
                    let id = clusters.len();
                    clusters.push(cluster_from(
                        id, *center_hz, members, peaks, grid, comb, None,
                    ));
                }
                Group::DuplicateOrder { center_hz, bins } => {
                    return Err(EstimateError::Ambiguous {
                        bins: bins.clone(),
                        reason: format!("several peaks claim one order near {center_hz:.1} Hz"),
                    });
                }
                Group::Partial { .. } => {}
            }
        }
        if clusters.is_empty() {
            return Err(EstimateError::Failure(format!(
                "no group reaches {order_count} consistent orders"
            )));
        }
        check_partition(&clusters)?;
        return Ok(Association {
            clusters,
            dropped,
            prior_failures: Vec::new(),
        });
    }

    let window = params
        .prior_tolerance_hz
        .unwrap_or(comb.rep_rate_hz() / 2.0);
    let mut clusters = Vec::new();
    let mut prior_failures = Vec::new();
    for (p, &prior_hz) in params.priors_hz.iter().enumerate() {
        let near = |center: f64| (center - prior_hz).abs() <= window;
        let mut complete: Vec<(f64, &Group)> = groups
            .iter()
            .filter_map(|g| match g {
                Group::Complete { center_hz, .. } | Group::DuplicateOrder { center_hz, .. }
                    if near(*center_hz) =>
                {
                    Some(((center_hz - prior_hz).abs(), g))
                }
                _ => None,
            })
            .collect();
        complete.sort_by(|a, b| a.0.total_cmp(&b.0));
        let fail = |reason: String| PriorFailure {
            prior: p,
            prior_hz,
            reason,
        };
        match complete.as_slice() {
            [] => {
                let best = groups
                    .iter()
                    .filter_map(|g| match g {
                        Group::Partial {
                            center_hz,
                            orders_found,
                        } if near(*center_hz) => Some(*orders_found),
                        _ => None,
                    })
                    .max()
                    .unwrap_or(0);
                prior_failures.push(fail(format!(
                    "no group within {window:.1} Hz reaches {order_count} orders \
                     (best has {best})"
                )));
            }
            [(d0, _), (d1, _), ..] if d1 - d0 <= tolerance_hz => {
                prior_failures.push(fail(format!(
                    "two groups are equally near ({d0:.1} Hz and {d1:.1} Hz)"
                )));
            }
            [(_, Group::DuplicateOrder { bins, .. }), ..] => {
                prior_failures.push(fail(format!(
                    "several peaks claim one order: bins {bins:?}"
                )));
            }
            [(_, Group::Complete { center_hz, members }), ..] => {
                let id = clusters.len();
                clusters.push(cluster_from(
                    id,
                    *center_hz,
                    members,
                    peaks,
                    grid,
                    comb,
                    Some(p),
                ));
            }
            _ => unreachable!("only complete or duplicate groups are collected"),
        }
    }
    check_partition(&clusters)?;
    if clusters.is_empty() {
        let reasons: Vec<String> = prior_failures.iter().map(|f| f.reason.clone()).collect();
        return Err(EstimateError::Failure(reasons.join("; ")));
    }
    Ok(Association {
        clusters,
        dropped,
        prior_failures,
    })
}

fn check_orders(zones: &[ZoneMeasurement]) -> Result<(), EstimateError> {
    if zones.is_empty() {
        return Err(EstimateError::InvalidZones("no zones".into()));
    }
    let mut seen = vec![false; zones.len()];
    for z in zones {
        match seen.get_mut(z.order) {
            Some(s) if !*s => *s = true,
            Some(_) => {
                return Err(EstimateError::InvalidZones(format!(
                    "order {} repeated",
                    z.order
                )))
            }
            None => {
                return Err(EstimateError::InvalidZones(format!(
                    "order {} out of range for {} zones",
                    z.order,
                    zones.len()
                )))
            }
        }
    }
    Ok(())
}

/// Mean of the per-order reconstructions.
pub fn mda_estimate(
    zones: &[ZoneMeasurement],
    comb: &CombSpec,
) -> Result<MdaEstimate, EstimateError> {
    check_orders(zones)?;
    let mut zones = zones.to_vec();
    zones.sort_by_key(|z| z.order);
    for z in &mut zones {
        z.reconstructed_hz = reconstruct(z.zone_freq_hz, comb, z.order);
    }
    let estimate_hz = zones.iter().map(|z| z.reconstructed_hz).sum::<f64>() / zones.len() as f64;
    Ok(MdaEstimate {
        order_count: zones.len(),
        zones,
        estimate_hz,
        avg_deviation_hz: None,
    })
}

/// Refines every zone with a three-point fit, then averages.
pub fn mda_quad_estimate(
    spec: &Spectrum,
    zones: &[ZoneMeasurement],
    comb: &CombSpec,
    variant: QuadVariant,
) -> Result<MdaEstimate, EstimateError> {
    check_orders(zones)?;
    let grid = spec.grid();
    let refined = zones
        .iter()
        .map(|z| {
            if !spec.is_local_max(z.measured_bin) {
                return Err(EstimateError::InvalidZones(format!(
                    "bin {} (order {}) is not a local maximum",
                    z.measured_bin, z.order
                )));
            }
            let fit = refine(spec, z.measured_bin, variant)?;
            let mut out =
                ZoneMeasurement::new(z.order, z.measured_bin, Some(fit.offset_bins), grid, comb);
            out.degenerate_fit = fit.degenerate;
            Ok(out)
        })
        .collect::<Result<Vec<_>, EstimateError>>()?;
    mda_estimate(&refined, comb)
}

/// Closed-form per-order and averaged deviations for a tone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationPrediction {
    pub freq_hz: f64,
    pub integer_bin: u64,
    pub fractional_bin: f64,
    pub epsilon: f64,
    pub per_order: Vec<DeviationRecord>,
    pub average_bins: f64,
    pub average_hz: f64,
}

pub fn predict_deviation(
    f_in_hz: f64,
    comb: &CombSpec,
    grid: &FrequencyGrid,
    order_count: usize,
) -> Result<DeviationPrediction, EstimateError> {
    if order_count == 0 {
        return Err(EstimateError::InvalidInput(
            "order_count must be at least 1".into(),
        ));
    }
    let idx = index_of(f_in_hz, grid)?;
    let eps = comb.epsilon();
    let per_order = (0..order_count)
        .map(|n| {
            copy_frequency(f_in_hz, comb, n)?;
            Ok(DeviationRecord::new(
                n,
                delta_order(idx.fractional_part, eps, n),
                grid,
            ))
        })
        .collect::<Result<Vec<_>, FreqError>>()?;
    let average_bins = delta_mda(idx.fractional_part, eps, order_count);
    Ok(DeviationPrediction {
        freq_hz: f_in_hz,
        integer_bin: idx.integer_part,
        fractional_bin: idx.fractional_part,
        epsilon: eps,
        per_order,
        average_bins,
        average_hz: average_bins * grid.resolution_hz(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{mixed_line_table, LineSign, PulseShape, ToneSpec};

    fn reference_grid() -> FrequencyGrid {
        FrequencyGrid::new(20e9, 100_000).unwrap()
    }

    fn reference_comb() -> CombSpec {
        CombSpec::on_grid(100.02e6, &reference_grid()).unwrap()
    }

    fn peak(bin: usize) -> Peak {
        Peak {
            bin,
            magnitude: 1.0,
            refined_offset_bins: None,
        }
    }

    /// Peaks at the rounded bins of the difference lines of one tone.
    fn difference_peaks(freq_hz: f64, orders: usize) -> Vec<Peak> {
        let grid = reference_grid();
        let tone = ToneSpec::new(freq_hz, 1.0, 0.0).unwrap();
        let mut bins: Vec<usize> =
            mixed_line_table(&[tone], &reference_comb(), &PulseShape::IdealComb, &grid)
                .into_iter()
                .filter(|l| l.sign == LineSign::Difference && !l.folded && l.order < orders)
                .map(|l| crate::freq::round_half_up(l.freq_hz / grid.resolution_hz()) as usize)
                .collect();
        bins.sort_unstable();
        bins.into_iter().map(peak).collect()
    }

    #[test]
    fn single_tone_difference_lines_form_one_cluster() {
        let peaks = difference_peaks(1.321e9, 10);
        assert_eq!(peaks.len(), 10);
        let assoc = associate_orders(&peaks, &reference_comb(), &reference_grid(), 10).unwrap();
        assert_eq!(assoc.clusters.len(), 1);
        let c = &assoc.clusters[0];
        assert_eq!(c.zones.len(), 10);
        assert_eq!(c.zones[0].measured_bin, 6605);
        assert_eq!(c.zones[1].measured_bin, 6105);
        assert!((c.center_hz - 1.321e9).abs() < 200e3);
        assert!(!assoc.dropped.is_empty());
    }

    #[test]
    fn order_count_one_makes_every_peak_a_cluster() {
        let peaks = vec![peak(100), peak(900), peak(5000)];
        let assoc = associate_orders(&peaks, &reference_comb(), &reference_grid(), 1).unwrap();
        assert_eq!(assoc.clusters.len(), 3);
        for (c, p) in assoc.clusters.iter().zip(&peaks) {
            assert_eq!(c.zones.len(), 1);
            assert_eq!(c.zones[0].order, 0);
            assert_eq!(c.zones[0].measured_bin, p.bin);
        }
    }

    #[test]
    fn two_tones_two_clusters() {
        let mut peaks = difference_peaks(1.321e9, 10);
        peaks.extend(difference_peaks(3.774e9, 10));
        peaks.sort_by_key(|p| p.bin);
        let assoc = associate_orders(&peaks, &reference_comb(), &reference_grid(), 10).unwrap();
        assert_eq!(assoc.clusters.len(), 2);
        let mut centers: Vec<f64> = assoc.clusters.iter().map(|c| c.center_hz).collect();
        centers.sort_by(f64::total_cmp);
        assert!((centers[0] - 1.321e9).abs() < 200e3);
        assert!((centers[1] - 3.774e9).abs() < 200e3);
    }

    #[test]
    fn shifted_chain_is_ambiguous_without_priors() {
        // Eleven copies admit two complete ten-order chains sharing nine peaks.
        let peaks = difference_peaks(1.321e9, 11);
        let err = associate_orders(&peaks, &reference_comb(), &reference_grid(), 10).unwrap_err();
        assert!(matches!(err, EstimateError::Ambiguous { .. }), "{err}");
    }

    #[test]
    fn priors_pick_the_intended_chain() {
        let peaks = difference_peaks(1.321e9, 11);
        let params = AssociationParams::new(10).with_priors(vec![1.32e9]);
        let assoc =
            associate_orders_with(&peaks, &reference_comb(), &reference_grid(), &params).unwrap();
        assert_eq!(assoc.clusters.len(), 1);
        assert_eq!(assoc.clusters[0].prior, Some(0));
        assert_eq!(assoc.clusters[0].zones[0].measured_bin, 6605);

        let params = AssociationParams::new(10).with_priors(vec![1.32e9, 2.0e9]);
        let assoc =
            associate_orders_with(&peaks, &reference_comb(), &reference_grid(), &params).unwrap();
        assert_eq!(assoc.clusters.len(), 1);
        assert_eq!(assoc.prior_failures.len(), 1);
        assert_eq!(assoc.prior_failures[0].prior, 1);
    }

    #[test]
    fn missing_order_is_a_failure() {
        let mut peaks = difference_peaks(1.321e9, 10);
        peaks.remove(3);
        let err = associate_orders(&peaks, &reference_comb(), &reference_grid(), 10).unwrap_err();
        assert!(matches!(err, EstimateError::Failure(_)));
        assert!(matches!(
            associate_orders(&[], &reference_comb(), &reference_grid(), 10),
            Err(EstimateError::Failure(_))
        ));
        assert!(matches!(
            associate_orders(&peaks, &reference_comb(), &reference_grid(), 0),
            Err(EstimateError::InvalidInput(_))
        ));
    }

    fn zones_at(bins: &[(usize, usize)]) -> Vec<ZoneMeasurement> {
        bins.iter()
            .map(|&(n, b)| ZoneMeasurement::new(n, b, None, &reference_grid(), &reference_comb()))
            .collect()
    }

    #[test]
    fn mda_of_reference_tone_is_ten_khz() {
        let pred = predict_deviation(1.321e9, &reference_comb(), &reference_grid(), 10).unwrap();
        let zones: Vec<ZoneMeasurement> = pred
            .per_order
            .iter()
            .map(|r| {
                let copy =
                    copy_frequency(1.321e9, &reference_comb(), r.order).unwrap() + r.deviation_hz;
                let bin = (copy / reference_grid().resolution_hz()).round() as usize;
                ZoneMeasurement::new(r.order, bin, None, &reference_grid(), &reference_comb())
            })
            .collect();
        let est = mda_estimate(&zones, &reference_comb())
            .unwrap()
            .with_truth(1.321e9);
        assert!((est.avg_deviation_hz.unwrap().abs() - 10e3).abs() < 1e-3);
        assert!((est.max_abs_zone_deviation_hz().unwrap() - 100e3).abs() < 1e-3);
    }

    #[test]
    fn mda_single_zone_and_constants() {
        let est = mda_estimate(&zones_at(&[(0, 6605)]), &reference_comb()).unwrap();
        assert_eq!(est.estimate_hz, 6605.0 * 200e3);

        let comb = reference_comb();
        let grid = reference_grid();
        let f = 1.5e9;
        let zones: Vec<ZoneMeasurement> = (0..4)
            .map(|n| {
                let mut z = ZoneMeasurement::new(n, 0, None, &grid, &comb);
                z.zone_freq_hz = f - comb.harmonic_hz(n);
                z
            })
            .collect();
        let est = mda_estimate(&zones, &comb).unwrap();
        assert!((est.estimate_hz - f).abs() < 1e-6);
    }

    #[test]
    fn mda_rejects_bad_orders() {
        assert!(mda_estimate(&[], &reference_comb()).is_err());
        assert!(mda_estimate(&zones_at(&[(0, 10), (0, 20)]), &reference_comb()).is_err());
        assert!(mda_estimate(&zones_at(&[(0, 10), (2, 20)]), &reference_comb()).is_err());
    }

    #[test]
    fn mean_consistency() {
        let zones = zones_at(&[(0, 6605), (1, 6105), (2, 5605)]);
        let est = mda_estimate(&zones, &reference_comb())
            .unwrap()
            .with_truth(1.3209e9);
        let mean_dev: f64 = est
            .zones
            .iter()
            .map(|z| z.deviation_hz.unwrap())
            .sum::<f64>()
            / est.zones.len() as f64;
        assert!((est.avg_deviation_hz.unwrap() - mean_dev).abs() < 1e-6);
    }

    #[test]
    fn predict_examples() {
        let comb = reference_comb();
        let grid = reference_grid();
        let pred = predict_deviation(1.321e9, &comb, &grid, 10).unwrap();
        assert!((pred.average_hz - 10e3).abs() < 1e-9);
        let (argmax, max) = pred
            .per_order
            .iter()
            .map(|r| (r.order, r.deviation_hz.abs()))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        assert_eq!((argmax, max), (5, 100e3));

        let pred = predict_deviation(1.3213e9, &comb, &grid, 1).unwrap();
        assert_eq!(pred.per_order[0].deviation_bins, pred.average_bins);
        assert!((pred.average_bins + 0.5).abs() < 1e-9 || (pred.average_bins - 0.5).abs() < 1e-9);

        let flat = CombSpec::on_grid(100e6, &grid).unwrap();
        let pred = predict_deviation(1.4e9, &flat, &grid, 10).unwrap();
        assert!(pred.per_order.iter().all(|r| r.deviation_hz == 0.0));
        assert_eq!(pred.average_hz, 0.0);

        assert!(matches!(
            predict_deviation(1.321e9, &comb, &grid, 15),
            Err(EstimateError::Freq(FreqError::Fold { order: 14, .. }))
        ));
    }
}

//! CSV, JSON and SVG artifacts.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::experiments::{ChainResult, MonteCarloSummary, SweepResult};
use super::svg::{deviation_chart, spectrum_chart, sweep_chart};
use super::HarnessError;
use crate::estimator::ZoneMeasurement;
use crate::spectral::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, HarnessError> {
    let file = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::io(path, e.into())
}

/// `delta,dev1_bins,devavg_bins`, one row per sweep point.
pub fn write_sweep_csv(path: &Path, sweep: &SweepResult) -> Result<(), HarnessError> {
    let mut w = csv_writer(path)?;
    w.write_record(["delta", "dev1_bins", "devavg_bins"])
        .map_err(|e| csv_err(path, e))?;
    for r in &sweep.rows {
        w.write_record([
            r.delta.to_string(),
            r.dev1_bins.to_string(),
            r.devavg_bins.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// `bin,freq_hz,magnitude` over the one-sided spectrum.
pub fn write_spectrum_csv(path: &Path, spec: &Spectrum) -> Result<(), HarnessError> {
    let mut w = csv_writer(path)?;
    w.write_record(["bin", "freq_hz", "magnitude"])
        .map_err(|e| csv_err(path, e))?;
    let grid = spec.grid();
    for (k, m) in spec.magnitudes().iter().enumerate() {
        w.write_record([
            k.to_string(),
            grid.bin_to_hz(k as f64).to_string(),
            m.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| HarnessError::io(path, std::io::Error::other(e)))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

#[derive(Serialize)]
struct ZonesEntry<'a> {
    truth_hz: f64,
    estimate_hz: Option<f64>,
    avg_deviation_hz: Option<f64>,
    failure: Option<&'a str>,
    zones: &'a [ZoneMeasurement],
}

/// Per tone: truth, estimate, averaged deviation and the zone list.
pub fn write_zones_json(path: &Path, chain: &ChainResult) -> Result<(), HarnessError> {
    let entries: Vec<ZonesEntry> = chain
        .tones
        .iter()
        .map(|t| ZonesEntry {
            truth_hz: t.truth_hz,
            estimate_hz: t.estimate.as_ref().map(|e| e.estimate_hz),
            avg_deviation_hz: t.avg_deviation_hz(),
            failure: t.failure.as_deref(),
            zones: t.estimate.as_ref().map_or(&[], |e| e.zones.as_slice()),
        })
        .collect();
    write_json(path, &entries)
}

pub fn write_montecarlo_json(path: &Path, summary: &MonteCarloSummary) -> Result<(), HarnessError> {
    write_json(path, summary)
}

fn ensure_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Writes `sweep.csv`, `sweep.json` and `sweep.svg` as requested.
pub fn emit_sweep(
    sweep: &SweepResult,
    out_dir: &Path,
    formats: &BTreeSet<OutputFormat>,
) -> Result<Vec<PathBuf>, HarnessError> {
    ensure_dir(out_dir)?;
    let mut written = Vec::new();
    for f in formats {
        let path = match f {
            OutputFormat::Csv => {
                let p = out_dir.join("sweep.csv");
                write_sweep_csv(&p, sweep)?;
                p
            }
            OutputFormat::Json => {
                let p = out_dir.join("sweep.json");
                write_json(&p, sweep)?;
                p
            }
            OutputFormat::Svg => {
                let p = out_dir.join("sweep.svg");
                write_text(&p, &sweep_chart(sweep))?;
                p
            }
        };
        written.push(path);
    }
    Ok(written)
}

/// Writes `spectrum.csv`, `zones.json`, `spectrum.svg` and
/// `deviations.svg` as requested.
pub fn emit_chain(
    chain: &ChainResult,
    out_dir: &Path,
    formats: &BTreeSet<OutputFormat>,
) -> Result<Vec<PathBuf>, HarnessError> {
    ensure_dir(out_dir)?;
    let mut written = Vec::new();
    for f in formats {
        match f {
            OutputFormat::Csv => {
                let p = out_dir.join("spectrum.csv");
                write_spectrum_csv(&p, &chain.spectrum)?;
                written.push(p);
            }
            OutputFormat::Json => {
                let p = out_dir.join("zones.json");
                write_zones_json(&p, chain)?;
                written.push(p);
            }
            OutputFormat::Svg => {
                let p = out_dir.join("spectrum.svg");
                write_text(&p, &spectrum_chart(&chain.spectrum))?;
                written.push(p);
                let p = out_dir.join("deviations.svg");
                write_text(&p, &deviation_chart(chain))?;
                written.push(p);
            }
        }
    }
    Ok(written)
}

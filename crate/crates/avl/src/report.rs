//! Run reports: per-epoch rows, aggregates recomputed from rows, and the
//! files written for a run.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use avl_core::lane::LaneNetwork;
use serde::{Deserialize, Serialize};

use crate::network_file::{to_json, NetworkDocument, Track};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpochStatus {
    /// Window still filling.
    Warmup,
    Matched,
    /// Window full but no lane within the candidate radius.
    NoCandidates,
    SolveFailed,
    UplinkLost,
}

impl EpochStatus {
    pub fn is_unmatched(self) -> bool {
        matches!(self, Self::NoCandidates | Self::SolveFailed | Self::UplinkLost)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: u64,
    pub t_s: f64,
    pub status: EpochStatus,
    pub truth_x_km: f64,
    pub truth_y_km: f64,
    pub truth_z_km: f64,
    pub truth_lane: Option<u32>,
    pub fix_x_km: Option<f64>,
    pub fix_y_km: Option<f64>,
    pub fix_z_km: Option<f64>,
    pub clock_bias_s: Option<f64>,
    pub satellites: u32,
    pub corrected: bool,
    pub correction_age_s: Option<f64>,
    /// Channel delay of the correction message applied.
    pub correction_delay_s: Option<f64>,
    /// Horizontal error of the uncorrected fix.
    pub raw_error_m: Option<f64>,
    /// Horizontal error of the fix passed on for matching.
    pub error_m: Option<f64>,
    pub raw_lane: Option<u32>,
    pub matched_lane: Option<u32>,
    pub correct: bool,
    /// Runner-up minus winner curve distance, km^2.
    pub margin_km2: Option<f64>,
    /// Measurement time to matching at the base.
    pub latency_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregates {
    pub epochs: u64,
    pub warmup: u64,
    pub matched: u64,
    pub unmatched: u64,
    pub correct: u64,
    /// Correct over matched rows, percent; 0 with no matched rows.
    pub lane_accuracy_pct: f64,
    /// Horizontal RMS of the fixes used, metres.
    pub rms_error_m: Option<f64>,
    /// Over corrected epochs only.
    pub rms_corrected_m: Option<f64>,
    /// Of the uncorrected fix at every solved epoch.
    pub rms_uncorrected_m: Option<f64>,
    pub corrected_epochs: u64,
    pub mean_latency_s: Option<f64>,
    pub mean_correction_delay_s: Option<f64>,
}

fn rms(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, sum) = values.fold((0u64, 0.0), |(n, s), v| (n + 1, s + v * v));
    (n > 0).then(|| (sum / n as f64).sqrt())
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, sum) = values.fold((0u64, 0.0), |(n, s), v| (n + 1, s + v));
    (n > 0).then(|| sum / n as f64)
}

impl Aggregates {
    pub fn from_rows(rows: &[EpochRow]) -> Self {
        let count = |f: &dyn Fn(&EpochRow) -> bool| rows.iter().filter(|r| f(r)).count() as u64;
        let matched = count(&|r| r.status == EpochStatus::Matched);
        let correct = count(&|r| r.correct);
        Self {
            epochs: rows.len() as u64,
            warmup: count(&|r| r.status == EpochStatus::Warmup),
            matched,
            unmatched: count(&|r| r.status.is_unmatched()),
            correct,
            lane_accuracy_pct: if matched > 0 {
                100.0 * correct as f64 / matched as f64
            } else {
                0.0
            },
            rms_error_m: rms(rows.iter().filter_map(|r| r.error_m)),
            rms_corrected_m: rms(rows.iter().filter(|r| r.corrected).filter_map(|r| r.error_m)),
            rms_uncorrected_m: rms(rows.iter().filter_map(|r| r.raw_error_m)),
            corrected_epochs: count(&|r| r.corrected),
            mean_latency_s: mean(rows.iter().filter_map(|r| r.latency_s)),
            mean_correction_delay_s: mean(rows.iter().filter_map(|r| r.correction_delay_s)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LinkStats {
    pub corrections_sent: u64,
    pub corrections_lost: u64,
    pub fixes_sent: u64,
    pub fixes_lost: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub fix_rate_hz: f64,
    pub dgps: bool,
    /// Times at which the truth lane switches.
    pub lane_change_times_s: Vec<f64>,
    pub aggregates: Aggregates,
    pub links: LinkStats,
    #[serde(skip)]
    pub rows: Vec<EpochRow>,
}

impl RunReport {
    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }

    pub fn csv_bytes(&self) -> Vec<u8> {
        write_csv(&self.rows)
    }

    pub fn geometry(&self, network: &LaneNetwork) -> NetworkDocument {
        let mut doc = NetworkDocument::from_network(network);
        doc.tracks = vec![
            Track {
                name: "truth".into(),
                points: self.rows.iter().map(|r| [r.truth_x_km, r.truth_y_km]).collect(),
            },
            Track {
                name: "estimate".into(),
                points: self
                    .rows
                    .iter()
                    .filter_map(|r| Some([r.fix_x_km?, r.fix_y_km?]))
                    .collect(),
            },
        ];
        doc
    }
}

pub const CSV_HEADER: &str = "epoch,t_s,status,truth_x_km,truth_y_km,truth_z_km,truth_lane,fix_x_km,fix_y_km,fix_z_km,clock_bias_s,satellites,corrected,correction_age_s,correction_delay_s,raw_error_m,error_m,raw_lane,matched_lane,correct,margin_km2,latency_s";

pub fn write_csv(rows: &[EpochRow]) -> Vec<u8> {
    if rows.is_empty() {
        return format!("{CSV_HEADER}\n").into_bytes();
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("rows always serialize");
    }
    w.into_inner().expect("in-memory writer")
}

pub fn read_csv(bytes: &[u8]) -> Result<Vec<EpochRow>, csv::Error> {
    csv::Reader::from_reader(bytes).deserialize().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub epochs_csv: PathBuf,
    pub summary_json: PathBuf,
    pub geometry_json: PathBuf,
}

/// Writes `epochs.csv`, `summary.json` and `geometry.json` into `dir`.
pub fn emit_outputs(report: &RunReport, network: &LaneNetwork, dir: &Path) -> io::Result<OutputPaths> {
    fs::create_dir_all(dir)?;
    let out = OutputPaths {
        epochs_csv: dir.join("epochs.csv"),
        summary_json: dir.join("summary.json"),
        geometry_json: dir.join("geometry.json"),
    };
    fs::write(&out.epochs_csv, report.csv_bytes())?;
    fs::write(&out.summary_json, report.summary_json())?;
    fs::write(&out.geometry_json, to_json(&report.geometry(network)))?;
    Ok(out)
}

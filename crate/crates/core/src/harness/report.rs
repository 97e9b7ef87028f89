//! CSV / JSON emitters. Column layouts are documented in docs/formats.md.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::process::DetectionRow;
use crate::harness::sweep::{LocCdfTable, ResultTable};
use crate::mission::{EstimateOut, MissionReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Other(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| Error::Other(format!("csv: {e}")))
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v).map_err(|e| Error::Other(format!("json: {e}")))?;
    b.push(b'\n');
    Ok(b)
}

/// One compact JSON object per line.
pub fn jsonl_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut b = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut b, r).map_err(|e| Error::Other(format!("json: {e}")))?;
        b.push(b'\n');
    }
    Ok(b)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Header: time,band,antenna,iteration,f_hat,gamma_db,shift_hat,verdict
pub fn detections_csv(rows: &[DetectionRow]) -> Result<Vec<u8>> {
    if rows.is_empty() {
        return Ok(b"time,band,antenna,iteration,f_hat,gamma_db,shift_hat,verdict\n".to_vec());
    }
    csv_bytes(rows)
}

#[derive(Serialize)]
struct GridRow {
    ub: usize,
    bandwidth: &'static str,
    delay_spread_us: f64,
    power_spread_db: f64,
    trials: u64,
    misid_k: u64,
    misid_p: f64,
    misid_ci_lo: f64,
    misid_ci_hi: f64,
    missed_k: u64,
    missed_p: f64,
    missed_ci_lo: f64,
    missed_ci_hi: f64,
}

pub fn grid_csv(t: &ResultTable) -> Result<Vec<u8>> {
    let rows: Vec<GridRow> = t
        .cells
        .iter()
        .map(|c| GridRow {
            ub: t.ub,
            bandwidth: t.bandwidth.label(),
            delay_spread_us: c.delay_spread_s * 1e6,
            power_spread_db: c.power_spread_db,
            trials: c.trials,
            misid_k: c.misid.k,
            misid_p: c.misid.p,
            misid_ci_lo: c.misid.ci_lo,
            misid_ci_hi: c.misid.ci_hi,
            missed_k: c.missed.k,
            missed_p: c.missed.p,
            missed_ci_lo: c.missed.ci_lo,
            missed_ci_hi: c.missed.ci_hi,
        })
        .collect();
    csv_bytes(&rows)
}

#[derive(Serialize)]
struct CdfRow<'a> {
    scenario: &'a str,
    stage: &'static str,
    le_m: f64,
    p: f64,
}

pub fn cdf_csv(t: &LocCdfTable) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    for (stage, pts) in [("initial", &t.cdf_initial), ("refined", &t.cdf_refined)] {
        rows.extend(pts.iter().map(|p| CdfRow { scenario: &t.scenario, stage, le_m: p.x, p: p.p }));
    }
    csv_bytes(&rows)
}

#[derive(Serialize)]
struct AleRow {
    seed: u64,
    ale_initial_m: Option<f64>,
    ale_refined_m: Option<f64>,
}

pub fn seed_ale_csv(t: &LocCdfTable) -> Result<Vec<u8>> {
    let rows: Vec<AleRow> =
        t.seeds.iter().map(|s| AleRow { seed: s.seed, ale_initial_m: s.ale_initial_m, ale_refined_m: s.ale_refined_m }).collect();
    csv_bytes(&rows)
}

#[derive(Serialize)]
struct LeRow<'a> {
    ue_id: &'a str,
    band: usize,
    shift: u8,
    los: bool,
    true_x: f64,
    true_y: f64,
    initial_x: Option<f64>,
    initial_y: Option<f64>,
    initial_le_m: Option<f64>,
    initial_time_min: Option<f64>,
    refined_x: Option<f64>,
    refined_y: Option<f64>,
    refined_le_m: Option<f64>,
    refined_time_min: Option<f64>,
}

/// Per-UE localization error table of a mission.
pub fn le_table_csv(r: &MissionReport) -> Result<Vec<u8>> {
    let rows: Vec<LeRow> = r
        .estimates
        .iter()
        .map(|e| {
            let i = e.initial.as_ref();
            let f = e.refined.as_ref();
            LeRow {
                ue_id: &e.ue_id,
                band: e.band,
                shift: e.shift,
                los: e.los,
                true_x: e.true_xy[0],
                true_y: e.true_xy[1],
                initial_x: i.map(|v| v.m_hat_xy[0]),
                initial_y: i.map(|v| v.m_hat_xy[1]),
                initial_le_m: i.map(|v| v.le_m),
                initial_time_min: i.map(|v| v.time_min),
                refined_x: f.map(|v| v.m_hat_xy[0]),
                refined_y: f.map(|v| v.m_hat_xy[1]),
                refined_le_m: f.map(|v| v.le_m),
                refined_time_min: f.map(|v| v.time_min),
            }
        })
        .collect();
    csv_bytes(&rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct EstimateRecord {
    pub ue_id: String,
    pub stage: String,
    pub x_m: f64,
    pub y_m: f64,
    pub le_m: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n_valid: usize,
    pub time_min: f64,
}

pub fn estimate_records(r: &MissionReport) -> Vec<EstimateRecord> {
    let mut out = Vec::new();
    for e in &r.estimates {
        for (stage, est) in [("initial", &e.initial), ("refined", &e.refined)] {
            if let Some(EstimateOut { m_hat_xy, le_m, iterations, converged, n_valid, time_min }) = est {
                out.push(EstimateRecord {
                    ue_id: e.ue_id.clone(),
                    stage: stage.into(),
                    x_m: m_hat_xy[0],
                    y_m: m_hat_xy[1],
                    le_m: *le_m,
                    iterations: *iterations,
                    converged: *converged,
                    n_valid: *n_valid,
                    time_min: *time_min,
                });
            }
        }
    }
    out.sort_by(|a, b| a.time_min.total_cmp(&b.time_min).then_with(|| a.ue_id.cmp(&b.ue_id)));
    out
}

//! Per-step trace export.
//!
//! CSV columns, one row per state (steps + 1 rows):
//!
//! | column | meaning |
//! |---|---|
//! | `step` | state index, 0 is the start |
//! | `t` | time (s) |
//! | `q_0 … q_{n-1}` | joint positions (rad) |
//! | `qdot_0 … qdot_{n-1}` | output joint velocity applied from this state (rad/s), zero on the last row |
//! | `status` | solver status of the step taken from this state, `end` on the last row |
//! | `wall_time_us` | control step wall time (µs) |
//! | `n_contacts` | number of contacts |
//! | `min_psi` | smallest ψ over the contacts (m), empty without contacts |
//! | `min_predicted` | smallest predicted distance (m), empty without contacts |
//! | `contacts` | `link:obstacle:psi:lambda:predicted` entries joined by `;` |
//!
//! The JSON form carries the same rows plus the raw solver velocity and each contact's
//! `Nᵀ J_c` row, so predicted distances can be recomputed from the log.

use std::path::Path;
use std::str::FromStr;

use fliqc_core::{Outcome, Trajectory};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Csv,
    Json,
}

impl FromStr for TraceFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown trace format {other}; expected csv or json")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceContact {
    pub link: usize,
    pub obstacle_id: String,
    pub psi: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub predicted: f64,
    pub normal: [f64; 3],
    pub witness: [f64; 3],
    /// `Nᵀ J_c`, one entry per joint.
    pub nj: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub t: f64,
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub qdot_raw: Vec<f64>,
    pub status: String,
    pub wall_time_us: f64,
    pub contacts: Vec<TraceContact>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub h: f64,
    pub outcome: Outcome,
    pub rows: Vec<TraceRow>,
}

pub fn trace_rows(traj: &Trajectory<f64>) -> Vec<TraceRow> {
    let n = traj.states.first().map_or(0, |s| s.q.len());
    traj.states
        .iter()
        .enumerate()
        .map(|(k, state)| {
            let v = |d: &nalgebra::DVector<f64>| d.iter().copied().collect::<Vec<_>>();
            match traj.steps.get(k) {
                Some(s) => TraceRow {
                    step: k,
                    t: state.t,
                    q: v(&state.q),
                    qdot: v(&s.qdot),
                    qdot_raw: v(&s.qdot_raw),
                    status: format!("{:?}", s.solver.status),
                    wall_time_us: s.wall_time.as_secs_f64() * 1e6,
                    contacts: s
                        .contacts
                        .iter()
                        .enumerate()
                        .map(|(i, c)| TraceContact {
                            link: c.link_index,
                            obstacle_id: c.obstacle_id.clone(),
                            psi: c.psi,
                            epsilon: c.epsilon,
                            lambda: s.lambdas[i],
                            predicted: s.predicted_distances[i],
                            normal: [c.normal.x, c.normal.y, c.normal.z],
                            witness: [c.witness_point.x, c.witness_point.y, c.witness_point.z],
                            nj: v(&c.normal_jacobian()),
                        })
                        .collect(),
                },
                None => TraceRow {
                    step: k,
                    t: state.t,
                    q: v(&state.q),
                    qdot: vec![0.0; n],
                    qdot_raw: vec![0.0; n],
                    status: "end".into(),
                    wall_time_us: 0.0,
                    contacts: Vec::new(),
                },
            }
        })
        .collect()
}

fn write_csv(rows: &[TraceRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let n = rows.first().map_or(0, |r| r.q.len());
    let mut header = vec!["step".to_string(), "t".to_string()];
    header.extend((0..n).map(|j| format!("q_{j}")));
    header.extend((0..n).map(|j| format!("qdot_{j}")));
    header.extend(
        ["status", "wall_time_us", "n_contacts", "min_psi", "min_predicted", "contacts"].map(String::from),
    );
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.step.to_string(), r.t.to_string()];
        rec.extend(r.q.iter().map(f64::to_string));
        rec.extend(r.qdot.iter().map(f64::to_string));
        let min = |f: fn(&TraceContact) -> f64| {
            r.contacts.iter().map(f).min_by(f64::total_cmp).map_or(String::new(), |v| v.to_string())
        };
        let contacts = r
            .contacts
            .iter()
            .map(|c| format!("{}:{}:{}:{}:{}", c.link, c.obstacle_id, c.psi, c.lambda, c.predicted))
            .collect::<Vec<_>>()
            .join(";");
        rec.extend([
            r.status.clone(),
            r.wall_time_us.to_string(),
            r.contacts.len().to_string(),
            min(|c| c.psi),
            min(|c| c.predicted),
            contacts,
        ]);
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

pub fn export_trace(traj: &Trajectory<f64>, path: impl AsRef<Path>, format: TraceFormat) -> Result<()> {
    let path = path.as_ref();
    let rows = trace_rows(traj);
    match format {
        TraceFormat::Csv => write_csv(&rows, path),
        TraceFormat::Json => {
            let file = TraceFile {
                h: traj.h,
                outcome: traj.outcome,
                rows,
            };
            let text = serde_json::to_string(&file)?;
            std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
        }
    }
}

pub fn read_trace_json(path: impl AsRef<Path>) -> Result<TraceFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Largest gap between a logged predicted distance and `ψ + h·(Nᵀ J_c)·q̇_raw` recomputed
/// from the logged row.
pub fn predicted_distance_gap(trace: &TraceFile) -> f64 {
    trace
        .rows
        .iter()
        .flat_map(|r| {
            r.contacts.iter().map(move |c| {
                let rate: f64 = c.nj.iter().zip(&r.qdot_raw).map(|(a, b)| a * b).sum();
                (c.psi + rate * trace.h - c.predicted).abs()
            })
        })
        .fold(0.0, f64::max)
}

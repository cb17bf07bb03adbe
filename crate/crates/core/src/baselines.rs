//! Comparison VOI metrics: fixed value, size, duration, travel distance,
//! spatial/temporal entropy, a per-point pricing value and reconstruction
//! correctness.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::degrade::DegradationSpec;
use crate::error::{Result, VoiError};
use crate::format::sig9;
use crate::infogain::{reconstruct, GpConfig, PriorKnowledge};
use crate::model::Trajectory;

pub const BASELINE_CSV_HEADER: &str =
    "trajectory_id,size,duration_s,distance_m,h_spatial_bits,h_temporal_bits,spp,correctness_err_m";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EntropyGridConfig {
    /// Spatial cell edge, meters.
    pub cell_size: f64,
    /// Temporal bin length, seconds.
    pub bin_length: f64,
}

impl Default for EntropyGridConfig {
    fn default() -> Self {
        Self {
            cell_size: 10.0,
            bin_length: 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SppConfig {
    /// Value of one noise-free measurement.
    pub v0: f64,
    /// Noise level at which a measurement's value drops by a factor e, meters.
    pub sigma_ref: f64,
}

impl Default for SppConfig {
    fn default() -> Self {
        Self {
            v0: 1.0,
            sigma_ref: 100.0,
        }
    }
}

/// Every trajectory is worth the same.
pub fn fixed_value(_traj: &Trajectory) -> f64 {
    1.0
}

pub fn size(traj: &Trajectory) -> usize {
    traj.len()
}

pub fn duration(traj: &Trajectory) -> f64 {
    traj.last().t - traj.first().t
}

pub fn travel_distance(traj: &Trajectory) -> f64 {
    traj.points()
        .windows(2)
        .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
        .sum()
}

/// Shannon entropy (bits) of a histogram given as counts.
pub fn shannon_entropy<I: IntoIterator<Item = usize>>(counts: I) -> f64 {
    let counts: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0)
}

/// Entropy of the occupancy histogram over square cells anchored at the
/// projection origin.
pub fn spatial_entropy(traj: &Trajectory, grid: &EntropyGridConfig) -> f64 {
    let mut cells: HashMap<(i64, i64), usize> = HashMap::new();
    for p in traj.points() {
        let key = (
            (p.x / grid.cell_size).floor() as i64,
            (p.y / grid.cell_size).floor() as i64,
        );
        *cells.entry(key).or_default() += 1;
    }
    let mut counts: Vec<usize> = cells.into_values().collect();
    counts.sort_unstable();
    shannon_entropy(counts)
}

/// Entropy of the histogram over time bins starting at the first timestamp.
pub fn temporal_entropy(traj: &Trajectory, grid: &EntropyGridConfig) -> f64 {
    let t0 = traj.first().t;
    let mut bins: HashMap<i64, usize> = HashMap::new();
    for p in traj.points() {
        *bins.entry(((p.t - t0) / grid.bin_length).floor() as i64).or_default() += 1;
    }
    let mut counts: Vec<usize> = bins.into_values().collect();
    counts.sort_unstable();
    shannon_entropy(counts)
}

/// Sum of per-measurement values `v0 · exp(-σ / σ_ref)`.
pub fn spp_value(traj: &Trajectory, cfg: &SppConfig) -> f64 {
    traj.points()
        .iter()
        .map(|p| cfg.v0 * (-p.sigma / cfg.sigma_ref).exp())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correctness {
    /// Mean expected distance between raw points and the reconstruction, meters.
    pub expected_error: f64,
    /// `1 / (1 + expected_error)`.
    pub value: f64,
    /// The reconstruction used every raw point, so the error is only
    /// measurement-noise residual.
    pub degenerate: bool,
}

/// Reconstruction correctness of `z` (with `prior`) against `raw`.
///
/// Each raw point contributes `sqrt(|mean - x|² + var_x + var_y)`.
pub fn correctness_value(
    z: &Trajectory,
    z_spec: &DegradationSpec,
    raw: &Trajectory,
    prior: &PriorKnowledge,
    gp: &GpConfig,
) -> Result<Correctness> {
    let rec = reconstruct(z, z_spec, prior, gp)?;
    let n = raw.len() as f64;
    let total: f64 = raw
        .points()
        .iter()
        .map(|p| {
            let q = rec.posterior.query(p.t);
            ((q.mean_x - p.x).powi(2) + (q.mean_y - p.y).powi(2) + q.var_x + q.var_y).sqrt()
        })
        .sum();
    let expected_error = total / n;
    if !expected_error.is_finite() {
        return Err(VoiError::Numerical {
            trajectory: z.trajectory_id.clone(),
            reason: "non-finite correctness error".into(),
        });
    }
    Ok(Correctness {
        expected_error,
        value: 1.0 / (1.0 + expected_error),
        degenerate: z.points() == raw.points(),
    })
}

/// All baseline metrics for one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub trajectory_id: String,
    pub size: usize,
    pub duration_s: f64,
    pub distance_m: f64,
    pub h_spatial_bits: f64,
    pub h_temporal_bits: f64,
    pub spp: f64,
    /// `None` when the reconstruction failed.
    pub correctness_err_m: Option<f64>,
}

pub fn baseline_row(
    traj: &Trajectory,
    grid: &EntropyGridConfig,
    spp: &SppConfig,
    prior: &PriorKnowledge,
    gp: &GpConfig,
) -> BaselineRow {
    let correctness = correctness_value(traj, &DegradationSpec::Identity, traj, prior, gp)
        .map_err(|e| log::warn!("correctness for {}: {e}", traj.trajectory_id))
        .ok();
    BaselineRow {
        trajectory_id: traj.trajectory_id.clone(),
        size: size(traj),
        duration_s: duration(traj),
        distance_m: travel_distance(traj),
        h_spatial_bits: spatial_entropy(traj, grid),
        h_temporal_bits: temporal_entropy(traj, grid),
        spp: spp_value(traj, spp),
        correctness_err_m: correctness.map(|c| c.expected_error),
    }
}

pub fn write_baselines_csv<W: Write>(mut w: W, rows: &[BaselineRow]) -> std::io::Result<()> {
    writeln!(w, "{BASELINE_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.trajectory_id,
            r.size,
            sig9(r.duration_s),
            sig9(r.distance_m),
            sig9(r.h_spatial_bits),
            sig9(r.h_temporal_bits),
            sig9(r.spp),
            r.correctness_err_m.map(sig9).unwrap_or_default()
        )?;
    }
    Ok(())
}

pub fn read_baselines_csv(text: &str) -> Result<Vec<BaselineRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(BASELINE_CSV_HEADER) {
        return Err(VoiError::invalid(format!("baseline CSV must start with `{BASELINE_CSV_HEADER}`")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let f: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
            if f.len() != 8 {
                return Err(VoiError::invalid(format!("baseline line {}: expected 8 fields", i + 2)));
            }
            let num = |k: usize| -> Result<f64> {
                f[k].parse()
                    .map_err(|_| VoiError::invalid(format!("baseline line {}: bad number `{}`", i + 2, f[k])))
            };
            Ok(BaselineRow {
                trajectory_id: f[0].to_string(),
                size: f[1]
                    .parse()
                    .map_err(|_| VoiError::invalid(format!("baseline line {}: bad size", i + 2)))?,
                duration_s: num(2)?,
                distance_m: num(3)?,
                h_spatial_bits: num(4)?,
                h_temporal_bits: num(5)?,
                spp: num(6)?,
                correctness_err_m: if f[7].is_empty() { None } else { Some(num(7)?) },
            })
        })
        .collect()
}

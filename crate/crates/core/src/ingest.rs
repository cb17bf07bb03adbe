//! Raw GPS log ingestion: Geolife PLT parsing, region filtering, projection
//! and time-gap segmentation, plus the trajectory CSV format.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VoiError};
use crate::format::sig9;
use crate::model::{project, Measurement, ProjectionConfig, Region, Trajectory};
use crate::par::{map_ordered, Execution};

/// Number of header lines preceding data in a PLT file.
pub const PLT_HEADER_LINES: usize = 6;

pub const TRAJECTORY_CSV_HEADER: &str = "trajectory_id,owner_id,t,x,y,sigma";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationConfig {
    /// Largest allowed gap inside one trajectory, seconds.
    pub max_gap: f64,
    /// Uncertainty assigned to every raw measurement, meters.
    pub default_sigma: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            max_gap: 300.0,
            default_sigma: 3.0,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_gap > 0.0) || !(self.default_sigma >= 0.0) {
            return Err(VoiError::invalid(format!("bad segmentation config {self:?}")));
        }
        Ok(())
    }
}

/// A raw fix before projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawRecord {
    pub lon: f64,
    pub lat: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedPlt {
    pub records: Vec<RawRecord>,
    pub skipped_lines: usize,
}

/// Parses a Geolife PLT file. Malformed data lines are skipped and counted.
pub fn parse_plt(bytes: &[u8]) -> Result<ParsedPlt> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| VoiError::invalid(format!("PLT is not valid UTF-8: {e}")))?;
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() < PLT_HEADER_LINES {
        return Err(VoiError::EmptyFile(format!(
            "PLT has {} lines, header needs {PLT_HEADER_LINES}",
            lines.len()
        )));
    }
    let mut out = ParsedPlt::default();
    for line in &lines[PLT_HEADER_LINES..] {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match parse_plt_line(line) {
            Some(r) => out.records.push(r),
            None => out.skipped_lines += 1,
        }
    }
    Ok(out)
}

fn parse_plt_line(line: &str) -> Option<RawRecord> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() < 7 {
        return None;
    }
    let lat: f64 = fields[0].parse().ok()?;
    let lon: f64 = fields[1].parse().ok()?;
    if !(lat.is_finite() && lon.is_finite()) {
        return None;
    }
    let date = NaiveDate::parse_from_str(fields[5], "%Y-%m-%d").ok()?;
    let time = NaiveTime::parse_from_str(fields[6], "%H:%M:%S%.f").ok()?;
    let t = NaiveDateTime::new(date, time).and_utc();
    let t = t.timestamp() as f64 + f64::from(t.timestamp_subsec_nanos()) * 1e-9;
    Some(RawRecord { lon, lat, t })
}

/// Keeps records inside `region`, preserving order.
pub fn filter_region(records: &[RawRecord], region: &Region) -> Vec<RawRecord> {
    records
        .iter()
        .copied()
        .filter(|r| region.contains(r.lon, r.lat))
        .collect()
}

/// Splits time-sorted records into trajectories wherever consecutive
/// timestamps differ by strictly more than `cfg.max_gap`.
pub fn segment(
    records: &[RawRecord],
    cfg: &SegmentationConfig,
    projection: &ProjectionConfig,
    owner_id: &str,
) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    if records.windows(2).any(|w| w[1].t < w[0].t) {
        return Err(VoiError::invalid(format!(
            "records for owner {owner_id} are not sorted by time"
        )));
    }
    let mut out = Vec::new();
    let mut current: Vec<Measurement> = Vec::new();
    let mut prev_t = f64::NEG_INFINITY;
    for r in records {
        if !current.is_empty() && r.t - prev_t > cfg.max_gap {
            let id = format!("{owner_id}_{:05}", out.len());
            out.push(Trajectory::new(owner_id, id, std::mem::take(&mut current))?);
        }
        let (x, y) = project(r.lon, r.lat, projection)?;
        current.push(Measurement::new(x, y, r.t, cfg.default_sigma)?);
        prev_t = r.t;
    }
    if !current.is_empty() {
        let id = format!("{owner_id}_{:05}", out.len());
        out.push(Trajectory::new(owner_id, id, current)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestManifest {
    pub files_read: usize,
    pub lines_skipped: usize,
    pub records_parsed: usize,
    pub measurements_retained: usize,
    pub trajectories_produced: usize,
}

/// Finds `*.plt` files below `root`, sorted by path, paired with their owner
/// id. Geolife lays files out as `<owner>/Trajectory/<file>.plt`.
pub fn find_plt_files(root: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            VoiError::io(
                format!("walking {}", root.display()),
                e.into_io_error()
                    .unwrap_or_else(|| std::io::Error::other("walkdir loop")),
            )
        })?;
        let path = entry.path();
        let is_plt = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("plt"));
        if !entry.file_type().is_file() || !is_plt {
            continue;
        }
        files.push((owner_of(path, root), path.to_path_buf()));
    }
    Ok(files)
}

fn owner_of(path: &Path, root: &Path) -> String {
    let parent = path.parent();
    let dir = match parent.and_then(|p| p.file_name()).and_then(|n| n.to_str()) {
        Some(name) if name.eq_ignore_ascii_case("trajectory") => parent.and_then(Path::parent),
        _ => parent,
    };
    dir.filter(|d| *d != root)
        .and_then(|d| d.file_name())
        .and_then(|n| n.to_str())
        .unwrap_or("unknown")
        .to_string()
}

/// Parses every PLT file below `root`, filters, projects and segments per
/// owner. Trajectories come out sorted by owner, then by time.
pub fn ingest_plt_dir(
    root: &Path,
    region: &Region,
    projection: &ProjectionConfig,
    seg: &SegmentationConfig,
    exec: Execution,
) -> Result<(Vec<Trajectory>, IngestManifest)> {
    let files = find_plt_files(root)?;
    let parsed = map_ordered(&files, exec, |(_, path)| {
        let bytes = fs::read(path).map_err(|e| VoiError::io(format!("reading {}", path.display()), e))?;
        parse_plt(&bytes).map_err(|e| match e {
            VoiError::EmptyFile(m) => VoiError::EmptyFile(format!("{}: {m}", path.display())),
            other => other,
        })
    });

    let mut manifest = IngestManifest {
        files_read: files.len(),
        ..Default::default()
    };
    let mut by_owner: Vec<(String, Vec<RawRecord>)> = Vec::new();
    let mut owner_index: HashMap<String, usize> = HashMap::new();
    for ((owner, path), result) in files.iter().zip(parsed) {
        let plt = match result {
            Ok(p) => p,
            Err(VoiError::EmptyFile(msg)) => {
                log::warn!("skipping {msg}");
                continue;
            }
            Err(e) => {
                return Err(VoiError::InvalidInput(format!("{}: {e}", path.display())));
            }
        };
        manifest.lines_skipped += plt.skipped_lines;
        manifest.records_parsed += plt.records.len();
        let kept = filter_region(&plt.records, region);
        let idx = *owner_index.entry(owner.clone()).or_insert_with(|| {
            by_owner.push((owner.clone(), Vec::new()));
            by_owner.len() - 1
        });
        by_owner[idx].1.extend(kept);
    }
    by_owner.sort_by(|a, b| a.0.cmp(&b.0));

    let mut trajectories = Vec::new();
    for (owner, mut records) in by_owner {
        records.sort_by(|a, b| a.t.total_cmp(&b.t));
        manifest.measurements_retained += records.len();
        trajectories.extend(segment(&records, seg, projection, &owner)?);
    }
    manifest.trajectories_produced = trajectories.len();
    Ok((trajectories, manifest))
}

/// Serializes trajectories in the generic CSV format.
pub fn write_trajectories_csv<W: Write>(mut w: W, trajectories: &[Trajectory]) -> std::io::Result<()> {
    writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
    for traj in trajectories {
        for p in traj.points() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                traj.trajectory_id,
                traj.owner_id,
                p.t,
                sig9(p.x),
                sig9(p.y),
                sig9(p.sigma)
            )?;
        }
    }
    Ok(())
}

pub fn save_trajectories_csv(path: &Path, trajectories: &[Trajectory]) -> Result<()> {
    let mut buf = Vec::new();
    write_trajectories_csv(&mut buf, trajectories).map_err(|e| VoiError::io("formatting CSV", e))?;
    fs::write(path, buf).map_err(|e| VoiError::io(format!("writing {}", path.display()), e))
}

/// Parses the generic trajectory CSV. Rows are grouped by `trajectory_id` in
/// order of first appearance.
pub fn read_trajectories_csv(text: &str) -> Result<Vec<Trajectory>> {
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some(TRAJECTORY_CSV_HEADER) => {}
        other => {
            return Err(VoiError::invalid(format!(
                "expected header `{TRAJECTORY_CSV_HEADER}`, found {other:?}"
            )))
        }
    }
    let mut groups: Vec<(String, String, Vec<Measurement>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(VoiError::invalid(format!(
                "line {}: expected 6 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .trim()
                .parse()
                .map_err(|_| VoiError::invalid(format!("line {}: bad number `{}`", lineno + 2, fields[i])))
        };
        let m = Measurement::new(num(3)?, num(4)?, num(2)?, num(5)?)?;
        let idx = *index.entry(fields[0].to_string()).or_insert_with(|| {
            groups.push((fields[0].to_string(), fields[1].to_string(), Vec::new()));
            groups.len() - 1
        });
        groups[idx].2.push(m);
    }
    groups
        .into_iter()
        .map(|(id, owner, points)| Trajectory::new(owner, id, points))
        .collect()
}

pub fn load_trajectories_csv(path: &Path) -> Result<Vec<Trajectory>> {
    let text = fs::read_to_string(path).map_err(|e| VoiError::io(format!("reading {}", path.display()), e))?;
    read_trajectories_csv(&text)
}

//! Batch driver: run configuration, the (trajectory × degradation × prior)
//! evaluation matrix and deterministic result files.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{box_stats, correlation_study, write_box_stats_csv, write_histogram_csv, CorrelationStudy};
use crate::baselines::{baseline_row, read_baselines_csv, write_baselines_csv, BaselineRow, EntropyGridConfig, SppConfig};
use crate::degrade::{ordered_bits, DegradationKind, DegradationSpec};
use crate::equivalence::{curves_from_results, equivalence_curve, equivalent_parameter, Equivalence, IgCurve};
use crate::error::{Result, VoiError};
use crate::format::sig9;
use crate::infogain::{ig_over_period, GpConfig, IntegrationConfig, PriorKnowledge, VoiReport, DEFAULT_SIGMA0};
use crate::ingest::{ingest_plt_dir, load_trajectories_csv, save_trajectories_csv, IngestManifest, SegmentationConfig};
use crate::model::{ProjectionConfig, Region, Trajectory};
use crate::par::{map_ordered, Execution};

pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const MANIFEST_FILE: &str = "ingest_manifest.json";
pub const VOI_JSONL_FILE: &str = "voi.jsonl";
pub const VOI_CSV_FILE: &str = "voi.csv";
pub const VOI_TIMING_FILE: &str = "voi_timing.csv";
pub const BASELINES_FILE: &str = "baselines.csv";
pub const ANALYSIS_FILE: &str = "analysis.json";
pub const VOI_CSV_HEADER: &str = "trajectory_id,prior,kind,param,ig_bit_seconds,length_scale_x,length_scale_y";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Root of a Geolife-style tree of PLT files.
    pub plt_root: Option<PathBuf>,
    /// Trajectory CSV consumed by `voi`, `baselines`, `degrade` and
    /// `equivalence`; defaults to `<output_dir>/trajectories.csv`.
    pub trajectories_csv: Option<PathBuf>,
}

/// Degradations to evaluate. Every seed is crossed with every noise level
/// and ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradationMatrix {
    pub include_identity: bool,
    /// Total noise levels, meters.
    pub noise_levels: Vec<f64>,
    pub truncation_ratios: Vec<f64>,
    pub subsampling_ratios: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for DegradationMatrix {
    fn default() -> Self {
        Self {
            include_identity: true,
            noise_levels: vec![3.0, 10.0, 100.0, 200.0, 300.0, 400.0],
            truncation_ratios: vec![0.8, 0.6, 0.4, 0.2, 0.05],
            subsampling_ratios: vec![0.8, 0.6, 0.4, 0.2, 0.05],
            seeds: vec![7],
        }
    }
}

impl DegradationMatrix {
    /// Expanded, validated and deduplicated specs in a stable order.
    pub fn specs(&self) -> Result<Vec<DegradationSpec>> {
        let mut specs = Vec::new();
        if self.include_identity {
            specs.push(DegradationSpec::Identity);
        }
        for &seed in &self.seeds {
            specs.extend(self.noise_levels.iter().map(|&total_noise_m| DegradationSpec::Perturbation { total_noise_m, seed }));
            specs.extend(self.truncation_ratios.iter().map(|&ratio| DegradationSpec::Truncation { ratio }));
            specs.extend(self.subsampling_ratios.iter().map(|&ratio| DegradationSpec::Subsampling { ratio, seed }));
        }
        for s in &specs {
            s.validate()?;
        }
        Ok(dedup_specs(specs))
    }
}

fn spec_identity(s: &DegradationSpec) -> (DegradationKind, u64, u64) {
    let seed = match *s {
        DegradationSpec::Perturbation { seed, .. } | DegradationSpec::Subsampling { seed, .. } => seed,
        _ => 0,
    };
    (s.kind(), s.param().map_or(0, ordered_bits), seed)
}

fn dedup_specs(specs: Vec<DegradationSpec>) -> Vec<DegradationSpec> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(specs.len());
    for s in specs {
        if seen.insert(spec_identity(&s)) {
            out.push(s);
        } else {
            log::warn!("duplicate degradation {s} in matrix; evaluating once");
        }
    }
    out
}

/// Prior scenarios. Released priors apply to degradations of their own
/// family; identity is evaluated under all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorScenarios {
    pub gaussian: bool,
    pub sigma0: f64,
    /// Previously released perturbations, total noise in meters.
    pub noise_priors: Vec<f64>,
    /// Previously released truncations/subsamplings, ratio.
    pub ratio_priors: Vec<f64>,
}

impl Default for PriorScenarios {
    fn default() -> Self {
        Self {
            gaussian: true,
            sigma0: DEFAULT_SIGMA0,
            noise_priors: vec![400.0, 300.0],
            ratio_priors: vec![0.05, 0.2],
        }
    }
}

impl PriorScenarios {
    /// Released specs to pair with `spec`; `None` stands for the Gaussian prior.
    pub fn for_spec(&self, spec: &DegradationSpec) -> Vec<Option<DegradationSpec>> {
        let mut out = Vec::new();
        if self.gaussian {
            out.push(None);
        }
        let noise = |seed| self.noise_priors.iter().map(move |&total_noise_m| Some(DegradationSpec::Perturbation { total_noise_m, seed }));
        match *spec {
            DegradationSpec::Identity => {
                out.extend(noise(0));
                out.extend(self.ratio_priors.iter().map(|&ratio| Some(DegradationSpec::Truncation { ratio })));
                out.extend(self.ratio_priors.iter().map(|&ratio| Some(DegradationSpec::Subsampling { ratio, seed: 0 })));
            }
            DegradationSpec::Perturbation { seed, .. } => out.extend(noise(seed)),
            DegradationSpec::Truncation { .. } => {
                out.extend(self.ratio_priors.iter().map(|&ratio| Some(DegradationSpec::Truncation { ratio })));
            }
            DegradationSpec::Subsampling { seed, .. } => {
                out.extend(self.ratio_priors.iter().map(|&ratio| Some(DegradationSpec::Subsampling { ratio, seed })));
            }
        }
        out
    }
}

/// Full run configuration. Every default reproduces the reference protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    /// Worker threads; 0 picks the machine default, 1 runs sequentially.
    pub jobs: usize,
    /// Evaluate only the first N trajectories.
    pub limit: Option<usize>,
    pub dataset: DatasetConfig,
    pub region: Region,
    pub projection: ProjectionConfig,
    pub segmentation: SegmentationConfig,
    pub degradation: DegradationMatrix,
    pub priors: PriorScenarios,
    pub integration: IntegrationConfig,
    pub gp: GpConfig,
    pub entropy: EntropyGridConfig,
    pub spp: SppConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            jobs: 0,
            limit: None,
            dataset: DatasetConfig::default(),
            region: Region::beijing(),
            projection: ProjectionConfig::beijing(),
            segmentation: SegmentationConfig::default(),
            degradation: DegradationMatrix::default(),
            priors: PriorScenarios::default(),
            integration: IntegrationConfig::default(),
            gp: GpConfig::default(),
            entropy: EntropyGridConfig::default(),
            spp: SppConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| VoiError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| VoiError::io(format!("reading config {}", path.display()), e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: VoiError| VoiError::Config(e.to_string());
        self.region.validate().map_err(cfg_err)?;
        self.projection.validate().map_err(cfg_err)?;
        self.segmentation.validate().map_err(cfg_err)?;
        self.integration.validate().map_err(cfg_err)?;
        self.gp.validate().map_err(cfg_err)?;
        self.degradation.specs().map_err(cfg_err)?;
        if !(self.priors.sigma0 > 0.0) {
            return Err(VoiError::Config("priors.sigma0 must be > 0".into()));
        }
        if !(self.entropy.cell_size > 0.0 && self.entropy.bin_length > 0.0) {
            return Err(VoiError::Config("entropy grid sizes must be > 0".into()));
        }
        if !(self.spp.v0 > 0.0 && self.spp.sigma_ref > 0.0) {
            return Err(VoiError::Config("spp.v0 and spp.sigma_ref must be > 0".into()));
        }
        Ok(())
    }

    pub fn execution(&self) -> Execution {
        Execution::from_jobs(self.jobs)
    }

    pub fn trajectories_path(&self) -> PathBuf {
        self.dataset
            .trajectories_csv
            .clone()
            .unwrap_or_else(|| self.output_dir.join(TRAJECTORIES_FILE))
    }

    /// SHA-256 of the canonical JSON form, for provenance.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn ensure_output_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.output_dir)
            .map_err(|e| VoiError::io(format!("creating {}", self.output_dir.display()), e))
    }

    /// Loads the input trajectories, honouring `limit`.
    pub fn load_trajectories(&self) -> Result<Vec<Trajectory>> {
        let path = self.trajectories_path();
        if !path.exists() {
            return Err(VoiError::Config(format!("trajectory file {} does not exist", path.display())));
        }
        let mut trajs = load_trajectories_csv(&path)?;
        if let Some(n) = self.limit {
            trajs.truncate(n);
        }
        Ok(trajs)
    }
}

/// One unit of batch work.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub trajectory: usize,
    pub spec: DegradationSpec,
    pub prior: Option<DegradationSpec>,
}

/// Every (trajectory, degradation, prior) combination.
pub fn build_cells(n_trajectories: usize, specs: &[DegradationSpec], priors: &PriorScenarios) -> Vec<Cell> {
    let mut cells = Vec::new();
    for trajectory in 0..n_trajectories {
        for spec in specs {
            for prior in priors.for_spec(spec) {
                cells.push(Cell {
                    trajectory,
                    spec: *spec,
                    prior,
                });
            }
        }
    }
    cells
}

/// A failed cell. Failures never affect other cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub trajectory_id: String,
    pub prior: String,
    pub degradation: DegradationSpec,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellOutcome {
    Report(VoiReport),
    Error(CellError),
}

impl CellOutcome {
    fn key(&self) -> (&str, &str, DegradationKind, u64) {
        let (id, prior, spec) = match self {
            CellOutcome::Report(r) => (&r.trajectory_id, &r.prior, &r.degradation),
            CellOutcome::Error(e) => (&e.trajectory_id, &e.prior, &e.degradation),
        };
        (id.as_str(), prior.as_str(), spec.kind(), spec.sort_key().1)
    }
}

/// Settings shared by every cell.
#[derive(Debug, Clone, Copy)]
pub struct EvalSettings<'a> {
    pub sigma0: f64,
    pub integration: &'a IntegrationConfig,
    pub gp: &'a GpConfig,
}

pub fn evaluate_cell(traj: &Trajectory, cell: &Cell, settings: EvalSettings<'_>) -> CellOutcome {
    let prior_label = cell.prior.map_or_else(|| "gaussian".to_string(), |p| p.to_string());
    let run = || -> Result<VoiReport> {
        let z = cell.spec.apply(traj)?;
        let prior = match cell.prior {
            None => PriorKnowledge::uninformative(settings.sigma0),
            Some(spec) => PriorKnowledge::released(settings.sigma0, spec.apply(traj)?, spec),
        };
        ig_over_period(&z, &cell.spec, &prior, settings.integration, settings.gp)
    };
    match run() {
        Ok(r) => CellOutcome::Report(r),
        Err(e) => CellOutcome::Error(CellError {
            trajectory_id: traj.trajectory_id.clone(),
            prior: prior_label,
            degradation: cell.spec,
            error: e.to_string(),
        }),
    }
}

/// Timing of one cell, seconds of wall time.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTiming {
    pub trajectory_id: String,
    pub points: usize,
    pub seconds: f64,
}

/// Evaluates all cells and returns outcomes sorted by
/// (trajectory_id, prior, kind, param), independent of `exec`.
pub fn evaluate_cells(
    trajectories: &[Trajectory],
    cells: &[Cell],
    settings: EvalSettings<'_>,
    exec: Execution,
) -> (Vec<CellOutcome>, Vec<CellTiming>) {
    let results = map_ordered(cells, exec, |cell| {
        let traj = &trajectories[cell.trajectory];
        let start = Instant::now();
        let outcome = evaluate_cell(traj, cell, settings);
        let timing = CellTiming {
            trajectory_id: traj.trajectory_id.clone(),
            points: traj.len(),
            seconds: start.elapsed().as_secs_f64(),
        };
        (outcome, timing)
    });
    let (mut outcomes, timings): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    outcomes.sort_by(|a, b| a.key().cmp(&b.key()));
    (outcomes, timings)
}

pub fn write_voi_jsonl<W: Write>(mut w: W, outcomes: &[CellOutcome]) -> Result<()> {
    for o in outcomes {
        serde_json::to_writer(&mut w, o)?;
        w.write_all(b"\n").map_err(|e| VoiError::io("writing JSONL", e))?;
    }
    Ok(())
}

pub fn write_voi_csv<W: Write>(mut w: W, outcomes: &[CellOutcome]) -> std::io::Result<()> {
    writeln!(w, "{VOI_CSV_HEADER}")?;
    for o in outcomes {
        if let CellOutcome::Report(r) = o {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.trajectory_id,
                r.prior,
                r.degradation.kind().name(),
                r.degradation.param().map(sig9).unwrap_or_default(),
                sig9(r.ig_bit_seconds),
                sig9(r.length_scale_x),
                sig9(r.length_scale_y)
            )?;
        }
    }
    Ok(())
}

pub fn read_voi_jsonl(text: &str) -> Result<Vec<CellOutcome>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(VoiError::from))
        .collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| VoiError::io(format!("writing {}", path.display()), e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| VoiError::io(format!("reading {}", path.display()), e))
}

/// `ingest`: PLT tree -> trajectory CSV + manifest.
pub fn run_ingest(cfg: &RunConfig) -> Result<IngestManifest> {
    let root = cfg
        .dataset
        .plt_root
        .as_ref()
        .ok_or_else(|| VoiError::Config("dataset.plt_root is required for ingest".into()))?;
    if !root.is_dir() {
        return Err(VoiError::Config(format!("dataset.plt_root {} is not a directory", root.display())));
    }
    let (mut trajs, mut manifest) = ingest_plt_dir(root, &cfg.region, &cfg.projection, &cfg.segmentation, cfg.execution())?;
    if let Some(n) = cfg.limit {
        trajs.truncate(n);
        manifest.trajectories_produced = trajs.len();
        manifest.measurements_retained = trajs.iter().map(Trajectory::len).sum();
    }
    cfg.ensure_output_dir()?;
    save_trajectories_csv(&cfg.output_dir.join(TRAJECTORIES_FILE), &trajs)?;
    let json = serde_json::to_string_pretty(&manifest)?;
    write_file(&cfg.output_dir.join(MANIFEST_FILE), json.as_bytes())?;
    Ok(manifest)
}

fn spec_file_name(spec: &DegradationSpec) -> String {
    match *spec {
        DegradationSpec::Identity => "identity.csv".into(),
        DegradationSpec::Perturbation { total_noise_m, seed } => format!("perturbation_{}m_seed{seed}.csv", sig9(total_noise_m)),
        DegradationSpec::Truncation { ratio } => format!("truncation_{}.csv", sig9(ratio)),
        DegradationSpec::Subsampling { ratio, seed } => format!("subsampling_{}_seed{seed}.csv", sig9(ratio)),
    }
}

/// `degrade`: one trajectory CSV per degradation under `<output_dir>/degraded`.
/// Returns the files written; trajectories a spec cannot apply to are
/// skipped with a warning.
pub fn run_degrade(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let trajs = cfg.load_trajectories()?;
    let specs = cfg.degradation.specs()?;
    let dir = cfg.output_dir.join("degraded");
    fs::create_dir_all(&dir).map_err(|e| VoiError::io(format!("creating {}", dir.display()), e))?;
    let mut written = Vec::new();
    for spec in &specs {
        let degraded: Vec<Trajectory> = map_ordered(&trajs, cfg.execution(), |t| spec.apply(t))
            .into_iter()
            .zip(&trajs)
            .filter_map(|(r, t)| r.map_err(|e| log::warn!("{spec} on {}: {e}", t.trajectory_id)).ok())
            .collect();
        let path = dir.join(spec_file_name(spec));
        save_trajectories_csv(&path, &degraded)?;
        written.push(path);
    }
    Ok(written)
}

/// Summary of a `voi` run.
#[derive(Debug, Clone, PartialEq)]
pub struct VoiRun {
    pub outcomes: Vec<CellOutcome>,
    pub failures: usize,
}

/// Evaluates the configured matrix over `trajectories` and writes
/// `voi.jsonl`, `voi.csv` and `voi_timing.csv` under `output_dir`.
pub fn run_voi_on(cfg: &RunConfig, trajectories: &[Trajectory]) -> Result<VoiRun> {
    let specs = cfg.degradation.specs()?;
    if specs.is_empty() {
        return Err(VoiError::Config("degradation matrix is empty".into()));
    }
    let cells = build_cells(trajectories.len(), &specs, &cfg.priors);
    log::info!("evaluating {} cells over {} trajectories", cells.len(), trajectories.len());
    let settings = EvalSettings {
        sigma0: cfg.priors.sigma0,
        integration: &cfg.integration,
        gp: &cfg.gp,
    };
    let (outcomes, timings) = evaluate_cells(trajectories, &cells, settings, cfg.execution());
    let failures = outcomes.iter().filter(|o| matches!(o, CellOutcome::Error(_))).count();

    cfg.ensure_output_dir()?;
    let mut jsonl = Vec::new();
    write_voi_jsonl(&mut jsonl, &outcomes)?;
    write_file(&cfg.output_dir.join(VOI_JSONL_FILE), &jsonl)?;
    let mut csv = Vec::new();
    write_voi_csv(&mut csv, &outcomes).map_err(|e| VoiError::io("formatting CSV", e))?;
    write_file(&cfg.output_dir.join(VOI_CSV_FILE), &csv)?;

    let mut timing = String::from("trajectory_id,points,seconds\n");
    for t in &timings {
        timing.push_str(&format!("{},{},{:.4}\n", t.trajectory_id, t.points, t.seconds));
    }
    write_file(&cfg.output_dir.join(VOI_TIMING_FILE), timing.as_bytes())?;
    Ok(VoiRun { outcomes, failures })
}

pub fn run_voi(cfg: &RunConfig) -> Result<VoiRun> {
    let trajs = cfg.load_trajectories()?;
    run_voi_on(cfg, &trajs)
}

pub fn compute_baselines(cfg: &RunConfig, trajectories: &[Trajectory]) -> Vec<BaselineRow> {
    let prior = PriorKnowledge::uninformative(cfg.priors.sigma0);
    map_ordered(trajectories, cfg.execution(), |t| {
        baseline_row(t, &cfg.entropy, &cfg.spp, &prior, &cfg.gp)
    })
}

/// `baselines`: one row per trajectory in input order.
pub fn run_baselines(cfg: &RunConfig) -> Result<Vec<BaselineRow>> {
    let trajs = cfg.load_trajectories()?;
    let rows = compute_baselines(cfg, &trajs);
    cfg.ensure_output_dir()?;
    let mut buf = Vec::new();
    write_baselines_csv(&mut buf, &rows).map_err(|e| VoiError::io("formatting CSV", e))?;
    write_file(&cfg.output_dir.join(BASELINES_FILE), &buf)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub config_hash: String,
    pub study: CorrelationStudy,
}

/// `analyze`: correlation table plus plot data under `<output_dir>/plots`.
pub fn run_analyze(cfg: &RunConfig) -> Result<AnalysisReport> {
    let voi_path = cfg.output_dir.join(VOI_JSONL_FILE);
    let base_path = cfg.output_dir.join(BASELINES_FILE);
    for p in [&voi_path, &base_path] {
        if !p.exists() {
            return Err(VoiError::Config(format!("{} not found; run the producing command first", p.display())));
        }
    }
    let reports: Vec<VoiReport> = read_voi_jsonl(&read_file(&voi_path)?)?
        .into_iter()
        .filter_map(|o| match o {
            CellOutcome::Report(r) => Some(r),
            CellOutcome::Error(_) => None,
        })
        .collect();
    let baselines = read_baselines_csv(&read_file(&base_path)?)?;
    let study = correlation_study(&reports, &baselines)?;

    let plots = cfg.output_dir.join("plots");
    fs::create_dir_all(&plots).map_err(|e| VoiError::io(format!("creating {}", plots.display()), e))?;
    for panel in &study.panels {
        let mut buf = Vec::new();
        write_histogram_csv(&mut buf, &panel.histogram).map_err(|e| VoiError::io("formatting CSV", e))?;
        write_file(&plots.join(format!("ig_vs_{}.csv", panel.characteristic)), &buf)?;
    }
    let mut lines = String::from("characteristic,rho,n,huber_slope,huber_intercept\n");
    for panel in &study.panels {
        let (s, i) = panel.huber.map_or((String::new(), String::new()), |h| (sig9(h.slope), sig9(h.intercept)));
        lines.push_str(&format!(
            "{},{},{},{s},{i}\n",
            panel.characteristic,
            sig9(panel.correlation.rho),
            panel.correlation.n
        ));
    }
    write_file(&plots.join("regression_lines.csv"), lines.as_bytes())?;
    let mut buf = Vec::new();
    write_box_stats_csv(&mut buf, &box_stats(&reports)).map_err(|e| VoiError::io("formatting CSV", e))?;
    write_file(&plots.join("ig_boxes.csv"), &buf)?;

    let report = AnalysisReport {
        config_hash: cfg.hash(),
        study,
    };
    write_file(&cfg.output_dir.join(ANALYSIS_FILE), serde_json::to_string_pretty(&report)?.as_bytes())?;
    Ok(report)
}

/// Request for `equivalence`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceQuery {
    pub trajectory_id: String,
    pub source: DegradationKind,
    pub source_param: f64,
    pub target: DegradationKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub trajectory_id: String,
    pub prior: String,
    pub curves: Vec<IgCurve>,
    pub equivalence: Equivalence,
}

/// `equivalence`: IG curves of one trajectory under the Gaussian prior and
/// the target-family parameter matching the source IG.
pub fn run_equivalence(cfg: &RunConfig, query: &EquivalenceQuery) -> Result<EquivalenceReport> {
    let trajs = load_trajectories_csv(&cfg.trajectories_path())?;
    let traj = trajs
        .iter()
        .find(|t| t.trajectory_id == query.trajectory_id)
        .ok_or_else(|| VoiError::Config(format!("trajectory {} not found", query.trajectory_id)))?;
    let specs: Vec<DegradationSpec> = cfg
        .degradation
        .specs()?
        .into_iter()
        .filter(|s| matches!(s.kind(), DegradationKind::Identity) || s.kind() == query.source || s.kind() == query.target)
        .collect();
    let prior = PriorKnowledge::uninformative(cfg.priors.sigma0);
    let results = equivalence_curve(traj, &specs, &prior, &cfg.integration, &cfg.gp)?;
    let curves = curves_from_results(&results, traj.max_sigma())?;
    let find = |k: DegradationKind| {
        curves
            .iter()
            .find(|c| c.family == k)
            .ok_or_else(|| VoiError::Config(format!("no {} degradations configured", k.name())))
    };
    let equivalence = equivalent_parameter(find(query.source)?, query.source_param, find(query.target)?);
    let report = EquivalenceReport {
        trajectory_id: traj.trajectory_id.clone(),
        prior: prior.label(),
        curves,
        equivalence,
    };
    cfg.ensure_output_dir()?;
    write_file(
        &cfg.output_dir.join(format!("equivalence_{}.json", traj.trajectory_id)),
        serde_json::to_string_pretty(&report)?.as_bytes(),
    )?;
    Ok(report)
}

//! Rank correlation, robust line fits and the aggregation used to compare IG
//! with the baseline metrics.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineRow;
use crate::degrade::DegradationKind;
use crate::error::{Result, VoiError};
use crate::format::sig9;
use crate::infogain::VoiReport;

pub const DEFAULT_HUBER_DELTA: f64 = 1.35;
const HUBER_MAX_ITER: usize = 100;
const HUBER_TOL: f64 = 1e-8;
/// Consistency factor turning a median absolute deviation into a standard
/// deviation under normality.
const MAD_SCALE: f64 = 1.482_602_218_505_602;

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation: Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(VoiError::UndefinedCorrelation(format!(
            "need two equal-length samples of size >= 2, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| v.is_nan()) {
        return Err(VoiError::UndefinedCorrelation("NaN in input".into()));
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
        .ok_or_else(|| VoiError::UndefinedCorrelation("constant input".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn weighted_line(xs: &[f64], ys: &[f64], w: &[f64]) -> (f64, f64) {
    let sw: f64 = w.iter().sum();
    let mx = xs.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = ys.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for ((x, y), w) in xs.iter().zip(ys).zip(w) {
        sxy += w * (x - mx) * (y - my);
        sxx += w * (x - mx) * (x - mx);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

pub fn ols_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    weighted_line(xs, ys, &vec![1.0; xs.len()])
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Huber-loss line fit by iteratively reweighted least squares.
///
/// Residuals are standardized by the MAD scale of the current fit; points
/// with standardized residual above `delta` get weight `delta / |r|`.
pub fn huber_fit(xs: &[f64], ys: &[f64], delta: f64) -> Result<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(VoiError::invalid("Huber fit needs two equal-length samples of size >= 2"));
    }
    if xs.iter().all(|&x| x == xs[0]) {
        return Err(VoiError::invalid("Huber fit needs non-constant x"));
    }
    let (mut slope, mut intercept) = ols_fit(xs, ys);
    for it in 1..=HUBER_MAX_ITER {
        let resid: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| y - (intercept + slope * x)).collect();
        let scale = MAD_SCALE * median(&mut resid.iter().map(|r| r.abs()).collect::<Vec<_>>());
        if !(scale > 1e-12 * (1.0 + intercept.abs() + slope.abs())) {
            return Ok(LineFit {
                slope,
                intercept,
                iterations: it,
                converged: true,
            });
        }
        let w: Vec<f64> = resid
            .iter()
            .map(|r| {
                let u = (r / scale).abs();
                if u <= delta {
                    1.0
                } else {
                    delta / u
                }
            })
            .collect();
        let (s, i) = weighted_line(xs, ys, &w);
        let change = (s - slope).abs().max((i - intercept).abs());
        let size = 1.0 + s.abs().max(i.abs());
        slope = s;
        intercept = i;
        if change <= HUBER_TOL * size {
            return Ok(LineFit {
                slope,
                intercept,
                iterations: it,
                converged: true,
            });
        }
    }
    log::warn!("Huber fit did not converge in {HUBER_MAX_ITER} iterations");
    Ok(LineFit {
        slope,
        intercept,
        iterations: HUBER_MAX_ITER,
        converged: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub x: String,
    pub y: String,
    pub rho: f64,
    pub n: usize,
}

impl CorrelationResult {
    /// `strong` for |ρ| ≥ 0.7, `moderate` for |ρ| ≥ 0.4, else `weak`.
    pub fn strength(&self) -> &'static str {
        strength_class(self.rho)
    }
}

pub fn strength_class(rho: f64) -> &'static str {
    match rho.abs() {
        r if r >= 0.7 => "strong",
        r if r >= 0.4 => "moderate",
        _ => "weak",
    }
}

/// Log-binned 2-D histogram of two columns, for redrawing scatter density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram2d {
    pub x_edges: Vec<f64>,
    pub y_edges: Vec<f64>,
    /// Row-major `[x_bin][y_bin]`.
    pub counts: Vec<Vec<usize>>,
}

pub fn histogram2d(xs: &[f64], ys: &[f64], bins: usize) -> Histogram2d {
    let edges = |v: &[f64]| -> Vec<f64> {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let hi = if hi > lo { hi } else { lo + 1.0 };
        (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect()
    };
    let (xe, ye) = (edges(xs), edges(ys));
    let mut counts = vec![vec![0usize; bins]; bins];
    let locate = |e: &[f64], v: f64| -> usize {
        let w = e[1] - e[0];
        (((v - e[0]) / w).floor() as usize).min(bins - 1)
    };
    for (x, y) in xs.iter().zip(ys) {
        counts[locate(&xe, *x)][locate(&ye, *y)] += 1;
    }
    Histogram2d {
        x_edges: xe,
        y_edges: ye,
        counts,
    }
}

/// IG against one characteristic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelData {
    pub characteristic: String,
    pub correlation: CorrelationResult,
    pub huber: Option<LineFit>,
    pub histogram: Histogram2d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationStudy {
    pub n: usize,
    /// IG against size, duration, temporal and spatial entropy.
    pub ig: Vec<CorrelationResult>,
    /// Baseline-versus-baseline correlations.
    pub baseline: Vec<CorrelationResult>,
    pub panels: Vec<PanelData>,
    /// Pairs whose correlation was undefined.
    pub undefined: Vec<String>,
}

/// Joins IG (identity degradation, uninformative prior) with baseline rows on
/// `trajectory_id` and computes the correlation table.
pub fn correlation_study(reports: &[VoiReport], baselines: &[BaselineRow]) -> Result<CorrelationStudy> {
    let ig_by_id: HashMap<&str, f64> = reports
        .iter()
        .filter(|r| r.degradation.kind() == DegradationKind::Identity && r.prior == "gaussian")
        .map(|r| (r.trajectory_id.as_str(), r.ig_bit_seconds))
        .collect();
    let missing: Vec<&str> = baselines
        .iter()
        .map(|b| b.trajectory_id.as_str())
        .filter(|id| !ig_by_id.contains_key(id))
        .collect();
    if !missing.is_empty() {
        log::warn!("{} baseline rows have no raw-trajectory IG", missing.len());
    }
    let joined: Vec<(&BaselineRow, f64)> = baselines
        .iter()
        .filter_map(|b| ig_by_id.get(b.trajectory_id.as_str()).map(|ig| (b, *ig)))
        .collect();
    if joined.is_empty() {
        return Err(VoiError::invalid(format!(
            "no trajectory ids shared between IG reports and baselines (baseline ids without IG: {})",
            missing.iter().take(20).copied().collect::<Vec<_>>().join(", ")
        )));
    }
    let ig: Vec<f64> = joined.iter().map(|j| j.1).collect();
    let column = |f: fn(&BaselineRow) -> f64| -> Vec<f64> { joined.iter().map(|j| f(j.0)).collect() };
    let size = column(|b| b.size as f64);
    let duration = column(|b| b.duration_s);
    let distance = column(|b| b.distance_m);
    let h_s = column(|b| b.h_spatial_bits);
    let h_t = column(|b| b.h_temporal_bits);

    let mut undefined = Vec::new();
    let mut corr = |xn: &str, x: &[f64], yn: &str, y: &[f64]| -> Option<CorrelationResult> {
        match spearman(x, y) {
            Ok(rho) => Some(CorrelationResult {
                x: xn.to_string(),
                y: yn.to_string(),
                rho,
                n: x.len(),
            }),
            Err(e) => {
                undefined.push(format!("{xn}~{yn}: {e}"));
                None
            }
        }
    };
    let characteristics: [(&str, &[f64]); 4] = [
        ("size", &size),
        ("duration", &duration),
        ("temporal_entropy", &h_t),
        ("spatial_entropy", &h_s),
    ];
    let mut ig_corr = Vec::new();
    let mut panels = Vec::new();
    for (name, col) in characteristics {
        if let Some(c) = corr("ig", &ig, name, col) {
            panels.push(PanelData {
                characteristic: name.to_string(),
                huber: huber_fit(col, &ig, DEFAULT_HUBER_DELTA).ok(),
                histogram: histogram2d(col, &ig, 20),
                correlation: c.clone(),
            });
            ig_corr.push(c);
        }
    }
    let baseline: Vec<CorrelationResult> = [
        corr("size", &size, "duration", &duration),
        corr("distance", &distance, "spatial_entropy", &h_s),
        corr("distance", &distance, "temporal_entropy", &h_t),
        corr("temporal_entropy", &h_t, "size", &size),
        corr("temporal_entropy", &h_t, "duration", &duration),
    ]
    .into_iter()
    .flatten()
    .collect();
    Ok(CorrelationStudy {
        n: joined.len(),
        ig: ig_corr,
        baseline,
        panels,
        undefined,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub kind: String,
    pub param: Option<f64>,
    pub prior: String,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Box-plot statistics of IG per (kind, parameter, prior) group.
pub fn box_stats(reports: &[VoiReport]) -> Vec<BoxStats> {
    let mut groups: BTreeMap<(DegradationKind, u64, String), (Option<f64>, Vec<f64>)> = BTreeMap::new();
    for r in reports {
        let key = (r.degradation.kind(), r.degradation.sort_key().1, r.prior.clone());
        groups
            .entry(key)
            .or_insert_with(|| (r.degradation.param(), Vec::new()))
            .1
            .push(r.ig_bit_seconds);
    }
    groups
        .into_iter()
        .map(|((kind, _, prior), (param, mut v))| {
            v.sort_by(f64::total_cmp);
            BoxStats {
                kind: kind.name().to_string(),
                param,
                prior,
                n: v.len(),
                min: v[0],
                q1: quantile_sorted(&v, 0.25),
                median: quantile_sorted(&v, 0.5),
                q3: quantile_sorted(&v, 0.75),
                max: v[v.len() - 1],
            }
        })
        .collect()
}

pub fn write_box_stats_csv<W: Write>(mut w: W, stats: &[BoxStats]) -> std::io::Result<()> {
    writeln!(w, "kind,param,prior,n,min,q1,median,q3,max")?;
    for s in stats {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            s.kind,
            s.param.map(sig9).unwrap_or_default(),
            s.prior,
            s.n,
            sig9(s.min),
            sig9(s.q1),
            sig9(s.median),
            sig9(s.q3),
            sig9(s.max)
        )?;
    }
    Ok(())
}

pub fn write_histogram_csv<W: Write>(mut w: W, h: &Histogram2d) -> std::io::Result<()> {
    writeln!(w, "x_lo,x_hi,y_lo,y_hi,count")?;
    for (i, row) in h.counts.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{c}",
                sig9(h.x_edges[i]),
                sig9(h.x_edges[i + 1]),
                sig9(h.y_edges[j]),
                sig9(h.y_edges[j + 1])
            )?;
        }
    }
    Ok(())
}

/// Values outside the `[lo, hi]` percentile band, for display-only clipping.
/// Statistics are always computed on the full data.
pub fn percentile_clip(values: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.is_empty() {
        return sorted;
    }
    let (a, b) = (quantile_sorted(&sorted, lo), quantile_sorted(&sorted, hi));
    values.iter().copied().filter(|v| (a..=b).contains(v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrade::DegradationSpec;
    use proptest::prelude::*;

    /// Classic `1 - 6 Σd² / (n(n² - 1))` for tie-free data.
    fn rank_difference_formula(xs: &[f64], ys: &[f64]) -> f64 {
        let (rx, ry) = (average_ranks(xs), average_ranks(ys));
        let n = xs.len() as f64;
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    }

    #[test]
    fn spearman_fixtures() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        assert!((spearman(&xs, &sq).unwrap() - 1.0).abs() < 1e-12);
        let rev = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert!((spearman(&xs, &rev).unwrap() + 1.0).abs() < 1e-12);
        let ys = [2.0, 1.0, 4.0, 3.0, 5.0];
        assert!((rank_difference_formula(&xs, &ys) - 0.8).abs() < 1e-12);
        assert!((spearman(&xs, &ys).unwrap() - 0.8).abs() < 1e-12);
        assert!(spearman(&xs, &[1.0; 5]).is_err());
        assert!(spearman(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn ties_get_average_ranks() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn huber_fixtures() {
        let xs: Vec<f64> = (0..20).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 2.0).collect();
        let fit = huber_fit(&xs, &ys, DEFAULT_HUBER_DELTA).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-8 && (fit.intercept + 2.0).abs() < 1e-8);

        let flat = huber_fit(&xs, &vec![4.0; 20], DEFAULT_HUBER_DELTA).unwrap();
        assert!(flat.slope.abs() < 1e-12);

        // Mild alternating noise plus one gross outlier at the end.
        let mut noisy: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| 2.0 * x + 1.0 + if i % 2 == 0 { 0.5 } else { -0.5 })
            .collect();
        noisy[19] += 200.0;
        let (ols_slope, _) = ols_fit(&xs, &noisy);
        let robust = huber_fit(&xs, &noisy, DEFAULT_HUBER_DELTA).unwrap();
        assert!(robust.converged);
        assert!((robust.slope - 2.0).abs() < (ols_slope - 2.0).abs());
        assert!(huber_fit(&[1.0, 1.0], &[0.0, 1.0], 1.35).is_err());
    }

    #[test]
    fn huber_with_huge_delta_is_ols() {
        let xs: Vec<f64> = (0..30).map(|i| f64::from(i) * 0.7).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x * 1.3).sin() * 5.0 + 0.5 * x).collect();
        let (s, i) = ols_fit(&xs, &ys);
        let fit = huber_fit(&xs, &ys, 1e12).unwrap();
        assert!((fit.slope - s).abs() < 1e-6 && (fit.intercept - i).abs() < 1e-6);
    }

    fn report(id: &str, ig: f64) -> VoiReport {
        VoiReport {
            trajectory_id: id.into(),
            owner_id: "o".into(),
            prior: "gaussian".into(),
            degradation: DegradationSpec::Identity,
            points: 1,
            ig_bit_seconds: ig,
            ig_bit_hours: ig / 3600.0,
            day_start: 0.0,
            day_end: 86_400.0,
            length_scale_x: 1.0,
            length_scale_y: 1.0,
            trace: None,
        }
    }

    fn row(id: &str, size: usize, dur: f64) -> BaselineRow {
        BaselineRow {
            trajectory_id: id.into(),
            size,
            duration_s: dur,
            distance_m: dur * 3.0,
            h_spatial_bits: (size as f64).ln(),
            h_temporal_bits: (dur + 1.0).ln(),
            spp: size as f64,
            correctness_err_m: None,
        }
    }

    #[test]
    fn study_with_duplicated_column() {
        let rows: Vec<BaselineRow> = (0..10).map(|i| row(&format!("t{i}"), 5 + i * 3, (i * i) as f64 * 10.0)).collect();
        // IG copied from duration.
        let reports: Vec<VoiReport> = rows.iter().map(|r| report(&r.trajectory_id, r.duration_s)).collect();
        let study = correlation_study(&reports, &rows).unwrap();
        let dur = study.ig.iter().find(|c| c.y == "duration").unwrap();
        assert!((dur.rho - 1.0).abs() < 1e-12);
        assert_eq!(study.n, 10);
        assert_eq!(study.baseline.len(), 5);
        assert_eq!(study.panels.len(), 4);
    }

    #[test]
    fn study_requires_a_join() {
        let rows = vec![row("a", 1, 0.0), row("b", 2, 1.0)];
        let reports = vec![report("x", 1.0)];
        let err = correlation_study(&reports, &rows).unwrap_err().to_string();
        assert!(err.contains("a, b"), "{err}");
    }

    #[test]
    fn box_stats_quartiles() {
        let reports: Vec<VoiReport> = (1..=5).map(|i| report(&format!("t{i}"), f64::from(i))).collect();
        let stats = box_stats(&reports);
        assert_eq!(stats.len(), 1);
        let s = &stats[0];
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (1.0, 2.0, 3.0, 4.0, 5.0));
    }

    #[test]
    fn clip_is_display_only() {
        let v: Vec<f64> = (0..101).map(f64::from).collect();
        let clipped = percentile_clip(&v, 0.05, 0.95);
        assert_eq!(clipped.first(), Some(&5.0));
        assert_eq!(clipped.last(), Some(&95.0));
    }

    proptest! {
        #[test]
        fn spearman_invariant_under_monotone_maps(
            xs in proptest::collection::vec(-100.0f64..100.0, 3..40),
            ys_seed in proptest::collection::vec(-100.0f64..100.0, 40),
            a in 0.1f64..5.0,
            b in -10.0f64..10.0,
        ) {
            let ys: Vec<f64> = ys_seed[..xs.len()].to_vec();
            let base = spearman(&xs, &ys);
            prop_assume!(base.is_ok());
            let mapped: Vec<f64> = xs.iter().map(|x| x.powi(3) + a * x.atan() + b).collect();
            let rho = spearman(&mapped, &ys).unwrap();
            prop_assert!((rho - base.unwrap()).abs() < 1e-9);
            prop_assert!(rho.abs() <= 1.0);
        }

        #[test]
        fn self_correlation_is_one(xs in proptest::collection::vec(-1e3f64..1e3, 2..50)) {
            prop_assume!(xs.iter().any(|&v| v != xs[0]));
            prop_assert!((spearman(&xs, &xs).unwrap() - 1.0).abs() < 1e-12);
            let neg: Vec<f64> = xs.iter().map(|v| -v).collect();
            prop_assert!((spearman(&xs, &neg).unwrap() + 1.0).abs() < 1e-12);
        }
    }
}

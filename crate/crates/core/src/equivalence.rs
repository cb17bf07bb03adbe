//! Degradation equivalence: which parameter of one degradation family yields
//! the same information gain as a given parameter of another.

use serde::{Deserialize, Serialize};

use crate::degrade::{DegradationKind, DegradationSpec};
use crate::error::{Result, VoiError};
use crate::infogain::{ig_over_period, GpConfig, IntegrationConfig, PriorKnowledge};
use crate::model::Trajectory;

/// IG sampled along one family's scalar parameter, sorted by parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgCurve {
    pub family: DegradationKind,
    pub points: Vec<(f64, f64)>,
}

/// Where a piecewise-linear curve attains a level.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    /// Isolated parameters, ascending.
    pub params: Vec<f64>,
    /// Parameter intervals on which the curve equals the level throughout.
    pub overlaps: Vec<(f64, f64)>,
    /// The level holds on the whole domain.
    pub full_overlap: bool,
}

impl Crossing {
    pub fn is_empty(&self) -> bool {
        self.params.is_empty() && self.overlaps.is_empty()
    }
}

impl IgCurve {
    pub fn new(family: DegradationKind, mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() || points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(VoiError::invalid("IG curve needs finite points"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(VoiError::invalid("IG curve has repeated parameters"));
        }
        Ok(Self { family, points })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    /// Linear interpolation; `None` outside the sampled domain.
    pub fn interpolate(&self, param: f64) -> Option<f64> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&param) {
            return None;
        }
        let i = self.points.partition_point(|p| p.0 < param);
        if self.points[i].0 == param {
            return Some(self.points[i].1);
        }
        let (p0, v0) = self.points[i - 1];
        let (p1, v1) = self.points[i];
        Some(v0 + (v1 - v0) * (param - p0) / (p1 - p0))
    }

    /// Parameters at which the interpolated IG equals `level`.
    pub fn solve(&self, level: f64) -> Crossing {
        level_crossings(&self.points, level)
    }
}

fn level_crossings(points: &[(f64, f64)], level: f64) -> Crossing {
    let mut out = Crossing::default();
    if points.len() == 1 {
        if points[0].1 == level {
            out.params.push(points[0].0);
            out.full_overlap = true;
        }
        return out;
    }
    let push_param = |p: f64, out: &mut Crossing| {
        let covered = out.overlaps.iter().any(|&(a, b)| (a..=b).contains(&p));
        if !covered && out.params.last() != Some(&p) {
            out.params.push(p);
        }
    };
    for w in points.windows(2) {
        let ((p0, v0), (p1, v1)) = (w[0], w[1]);
        if v0 == level && v1 == level {
            match out.overlaps.last_mut() {
                Some(last) if last.1 == p0 => last.1 = p1,
                _ => out.overlaps.push((p0, p1)),
            }
            out.params.retain(|&p| p != p0);
            continue;
        }
        if v0 == level {
            push_param(p0, &mut out);
        }
        if (v0 - level) * (v1 - level) < 0.0 {
            push_param(p0 + (level - v0) * (p1 - p0) / (v1 - v0), &mut out);
        }
        if v1 == level {
            push_param(p1, &mut out);
        }
    }
    let (lo, hi) = (points[0].0, points[points.len() - 1].0);
    out.full_overlap = out.overlaps.len() == 1 && out.overlaps[0] == (lo, hi);
    out
}

/// Parameters where two curves on the same parameter axis agree.
pub fn intersect(a: &IgCurve, b: &IgCurve) -> Crossing {
    let lo = a.domain().0.max(b.domain().0);
    let hi = a.domain().1.min(b.domain().1);
    if lo > hi {
        return Crossing::default();
    }
    let mut knots: Vec<f64> = a
        .points
        .iter()
        .chain(&b.points)
        .map(|p| p.0)
        .filter(|p| (lo..=hi).contains(p))
        .collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let diff: Vec<(f64, f64)> = knots
        .iter()
        .map(|&p| (p, a.interpolate(p).unwrap() - b.interpolate(p).unwrap()))
        .collect();
    level_crossings(&diff, 0.0)
}

/// Answer to "which parameter of `target` matches `source` at a parameter".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equivalence {
    pub source_family: DegradationKind,
    pub source_param: f64,
    pub target_family: DegradationKind,
    /// Interpolated IG of the source; `None` if the parameter is off-curve.
    pub ig_bit_seconds: Option<f64>,
    pub crossing: Crossing,
}

pub fn equivalent_parameter(source: &IgCurve, source_param: f64, target: &IgCurve) -> Equivalence {
    let ig = source.interpolate(source_param);
    Equivalence {
        source_family: source.family,
        source_param,
        target_family: target.family,
        ig_bit_seconds: ig,
        crossing: ig.map(|v| target.solve(v)).unwrap_or_default(),
    }
}

/// IG of `traj` under each degradation, in input order.
pub fn equivalence_curve(
    traj: &Trajectory,
    specs: &[DegradationSpec],
    prior: &PriorKnowledge,
    integ: &IntegrationConfig,
    gp: &GpConfig,
) -> Result<Vec<(DegradationSpec, f64)>> {
    specs
        .iter()
        .map(|spec| {
            let z = spec.apply(traj)?;
            let report = ig_over_period(&z, spec, prior, integ, gp)?;
            Ok((*spec, report.ig_bit_seconds))
        })
        .collect()
}

/// Parameter of `spec` on `family`'s axis. Identity sits at ratio 1 on
/// ratio families and at the raw noise level on the perturbation axis.
pub fn family_param(spec: &DegradationSpec, family: DegradationKind, raw_sigma: f64) -> Option<f64> {
    match (spec, family) {
        (DegradationSpec::Identity, DegradationKind::Perturbation) => Some(raw_sigma),
        (DegradationSpec::Identity, DegradationKind::Truncation | DegradationKind::Subsampling) => Some(1.0),
        (s, f) if s.kind() == f => s.param(),
        _ => None,
    }
}

/// Groups evaluated specs into one curve per family. Identity results join
/// every family curve.
pub fn curves_from_results(results: &[(DegradationSpec, f64)], raw_sigma: f64) -> Result<Vec<IgCurve>> {
    let families = [
        DegradationKind::Perturbation,
        DegradationKind::Truncation,
        DegradationKind::Subsampling,
    ];
    let mut curves = Vec::new();
    for family in families {
        if !results.iter().any(|(s, _)| s.kind() == family) {
            continue;
        }
        let mut pts: Vec<(f64, f64)> = results
            .iter()
            .filter_map(|(s, ig)| family_param(s, family, raw_sigma).map(|p| (p, *ig)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| a.0 == b.0);
        curves.push(IgCurve::new(family, pts)?);
    }
    Ok(curves)
}

//! Information gain of a (degraded) trajectory relative to prior knowledge.
//!
//! `IG_t` is the drop in summed per-coordinate differential entropy between
//! the prior and posterior reconstructions at time `t`; `IG_T` integrates it
//! over the covering day with the trapezoid rule. Entropies are in bits.

use serde::{Deserialize, Serialize};

use crate::degrade::DegradationSpec;
use crate::error::{Result, VoiError};
use crate::gp::{
    fit_linear_mean, train_length_scale, GaussianTrack, KernelParams, MeanFunction, TrackPoint,
    LENGTH_SCALE_BOUNDS, SECONDS_PER_HOUR,
};
use crate::model::{Measurement, Trajectory};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Default prior standard deviation, meters.
pub const DEFAULT_SIGMA0: f64 = 7500.0;

/// `½ log₂(2πe σ²)`.
pub fn gaussian_entropy(variance: f64) -> Result<f64> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(VoiError::invalid(format!("entropy needs variance > 0, got {variance}")));
    }
    Ok(0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * variance).log2())
}

/// Summed x/y entropy of a reconstructed location.
pub fn location_entropy(p: &TrackPoint) -> Result<f64> {
    Ok(gaussian_entropy(p.var_x)? + gaussian_entropy(p.var_y)?)
}

/// `IG_t` from prior and posterior marginals at the same time. Not clamped.
pub fn ig_between(prior: &TrackPoint, posterior: &TrackPoint) -> Result<f64> {
    Ok(location_entropy(prior)? - location_entropy(posterior)?)
}

pub fn ig_at(t: f64, prior: &GaussianTrack, posterior: &GaussianTrack) -> Result<f64> {
    ig_between(&prior.query(t), &posterior.query(t))
}

/// Trapezoid rule over sorted abscissae.
pub fn trapezoid(ts: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(ts.len(), values.len());
    ts.windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// UTC midnight-to-midnight day containing `t`.
pub fn covering_day(t: f64) -> (f64, f64) {
    let start = (t / SECONDS_PER_DAY).floor() * SECONDS_PER_DAY;
    (start, start + SECONDS_PER_DAY)
}

/// A degraded version of the trajectory that the recipient already holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Released {
    pub trajectory: Trajectory,
    pub spec: DegradationSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorKnowledge {
    /// Prior standard deviation per coordinate; also the Matérn amplitude.
    pub sigma0: f64,
    pub released: Option<Released>,
}

impl PriorKnowledge {
    pub fn uninformative(sigma0: f64) -> Self {
        Self {
            sigma0,
            released: None,
        }
    }

    pub fn released(sigma0: f64, trajectory: Trajectory, spec: DegradationSpec) -> Self {
        Self {
            sigma0,
            released: Some(Released { trajectory, spec }),
        }
    }

    /// Short label such as `gaussian` or `perturbation:400`.
    pub fn label(&self) -> String {
        match &self.released {
            None => "gaussian".to_string(),
            Some(r) => r.spec.to_string(),
        }
    }

    fn validate(&self, z: &Trajectory) -> Result<()> {
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(VoiError::invalid(format!("sigma0 must be > 0, got {}", self.sigma0)));
        }
        if let Some(r) = &self.released {
            if r.trajectory.trajectory_id != z.trajectory_id || r.trajectory.owner_id != z.owner_id {
                return Err(VoiError::invalid(format!(
                    "released prior {} does not belong to trajectory {}",
                    r.trajectory.trajectory_id, z.trajectory_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegrationConfig {
    /// Uniform grid step, seconds.
    pub step: f64,
    pub include_measurement_times: bool,
    /// Keep the per-grid-point IG trace in the report.
    pub keep_trace: bool,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            step: 60.0,
            include_measurement_times: true,
            keep_trace: false,
        }
    }
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(VoiError::invalid(format!("integration step must be > 0, got {}", self.step)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    pub length_scale_min: f64,
    pub length_scale_max: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            length_scale_min: LENGTH_SCALE_BOUNDS.0,
            length_scale_max: LENGTH_SCALE_BOUNDS.1,
        }
    }
}

impl GpConfig {
    pub fn bounds(&self) -> (f64, f64) {
        (self.length_scale_min, self.length_scale_max)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = LENGTH_SCALE_BOUNDS;
        if !(lo <= self.length_scale_min && self.length_scale_min < self.length_scale_max && self.length_scale_max <= hi) {
            return Err(VoiError::invalid(format!("length-scale bounds must lie in [{lo}, {hi}]")));
        }
        Ok(())
    }
}

/// Result of one IG evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiReport {
    pub trajectory_id: String,
    pub owner_id: String,
    pub prior: String,
    pub degradation: DegradationSpec,
    pub points: usize,
    pub ig_bit_seconds: f64,
    pub ig_bit_hours: f64,
    pub day_start: f64,
    pub day_end: f64,
    pub length_scale_x: f64,
    pub length_scale_y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<(f64, f64)>>,
}

/// Data handed to the posterior GP.
///
/// * no released prior: `Z` alone;
/// * `Z` and the release are the same data: `Z` alone;
/// * both are raw subsets (truncation, subsampling, identity): their union,
///   which is `Z` whenever `Z` is the superset;
/// * otherwise measurements sharing a timestamp are fused by inverse-variance
///   weighting and unmatched ones are kept.
pub fn combine(z: &Trajectory, z_spec: &DegradationSpec, prior: &PriorKnowledge) -> Vec<Measurement> {
    let Some(released) = &prior.released else {
        return z.points().to_vec();
    };
    let omega = released.trajectory.points();
    if omega == z.points() {
        return z.points().to_vec();
    }
    let subset_pair = z_spec.kind().is_subset() && released.spec.kind().is_subset();
    merge_by_time(z.points(), omega, |a, b| {
        if subset_pair {
            (a == b).then_some(*a)
        } else {
            Some(inverse_variance(a, b))
        }
    })
}

/// Two-pointer merge of time-sorted sequences. Equal timestamps are paired
/// in order; `fuse` returns the merged measurement or `None` to keep both.
fn merge_by_time(
    a: &[Measurement],
    b: &[Measurement],
    fuse: impl Fn(&Measurement, &Measurement) -> Option<Measurement>,
) -> Vec<Measurement> {
    let mut out = Vec::with_capacity(a.len().max(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i].t == b[j].t {
            match fuse(&a[i], &b[j]) {
                Some(m) => out.push(m),
                None => {
                    out.push(a[i]);
                    out.push(b[j]);
                }
            }
            i += 1;
            j += 1;
        } else if a[i].t < b[j].t {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Precision-weighted fusion of two measurements of the same instant.
pub fn inverse_variance(a: &Measurement, b: &Measurement) -> Measurement {
    match (a.sigma == 0.0, b.sigma == 0.0) {
        (true, true) => Measurement {
            x: 0.5 * (a.x + b.x),
            y: 0.5 * (a.y + b.y),
            ..*a
        },
        (true, false) => *a,
        (false, true) => *b,
        (false, false) => {
            let wa = 1.0 / (a.sigma * a.sigma);
            let wb = 1.0 / (b.sigma * b.sigma);
            let w = wa + wb;
            Measurement {
                x: (wa * a.x + wb * b.x) / w,
                y: (wa * a.y + wb * b.y) / w,
                t: a.t,
                sigma: w.sqrt().recip(),
            }
        }
    }
}

/// Prior and posterior reconstructions for one evaluation.
pub struct Reconstruction {
    pub prior: GaussianTrack,
    pub posterior: GaussianTrack,
    pub day: (f64, f64),
    /// Times of all data points that entered either track.
    pub data_times: Vec<f64>,
}

/// Builds the prior and posterior tracks for `Z` under `prior`.
///
/// Under the uninformative prior the posterior has zero mean and its length
/// scale is trained on `Z`. With a released prior, the linear mean functions
/// and the length scale are fitted on the release, and the same kernel
/// serves both the prior track (conditioned on the release) and the
/// posterior track (conditioned on the combined data).
pub fn reconstruct(
    z: &Trajectory,
    z_spec: &DegradationSpec,
    prior: &PriorKnowledge,
    gp: &GpConfig,
) -> Result<Reconstruction> {
    prior.validate(z)?;
    gp.validate()?;
    let day = covering_day(z.first().t);
    let origin = day.0;
    let label = &z.trajectory_id;
    let combined = combine(z, z_spec, prior);
    let mut data_times: Vec<f64> = combined.iter().map(|p| p.t).collect();

    let (prior_track, means, length_scale) = match &prior.released {
        None => {
            let means = [MeanFunction::default(); 2];
            let l = train_length_scale(&combined, origin, means, prior.sigma0, gp.bounds(), label)?;
            (GaussianTrack::stationary(origin, [0.0, 0.0], prior.sigma0)?, means, l)
        }
        Some(r) => {
            let omega = r.trajectory.points();
            data_times.extend(omega.iter().map(|p| p.t));
            let mean_of = |axis: usize| {
                let data: Vec<(f64, f64)> = omega.iter().map(|p| (p.t - origin, p.coord(axis))).collect();
                fit_linear_mean(&data)
            };
            let means = [mean_of(0)?, mean_of(1)?];
            let l = train_length_scale(omega, origin, means, prior.sigma0, gp.bounds(), label)?;
            let params = KernelParams::new(prior.sigma0, l)?;
            (GaussianTrack::fit(omega, origin, means, params, label)?, means, l)
        }
    };
    let params = KernelParams::new(prior.sigma0, length_scale)?;
    let posterior = GaussianTrack::fit(&combined, origin, means, params, label)?;
    Ok(Reconstruction {
        prior: prior_track,
        posterior,
        day,
        data_times,
    })
}

/// Evaluation times: a uniform grid over the day plus data timestamps that
/// fall inside it, sorted and deduplicated.
pub fn integration_grid(day: (f64, f64), data_times: &[f64], integ: &IntegrationConfig) -> Vec<f64> {
    let steps = ((day.1 - day.0) / integ.step).floor() as usize;
    let mut ts: Vec<f64> = (0..=steps).map(|i| day.0 + i as f64 * integ.step).collect();
    if ts.last().is_some_and(|&t| t < day.1) {
        ts.push(day.1);
    }
    if integ.include_measurement_times {
        ts.extend(data_times.iter().copied().filter(|t| (day.0..=day.1).contains(t)));
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

/// `IG_T(Z, Ω)` over the covering day of `Z`, in bit·seconds.
pub fn ig_over_period(
    z: &Trajectory,
    z_spec: &DegradationSpec,
    prior: &PriorKnowledge,
    integ: &IntegrationConfig,
    gp: &GpConfig,
) -> Result<VoiReport> {
    integ.validate()?;
    let rec = reconstruct(z, z_spec, prior, gp)?;
    let ts = integration_grid(rec.day, &rec.data_times, integ);
    let igs = ts
        .iter()
        .map(|&t| ig_at(t, &rec.prior, &rec.posterior))
        .collect::<Result<Vec<f64>>>()?;
    let total = trapezoid(&ts, &igs);
    if !total.is_finite() {
        return Err(VoiError::Numerical {
            trajectory: z.trajectory_id.clone(),
            reason: "non-finite information gain".into(),
        });
    }
    let l = rec.posterior.params().length_scale;
    Ok(VoiReport {
        trajectory_id: z.trajectory_id.clone(),
        owner_id: z.owner_id.clone(),
        prior: prior.label(),
        degradation: *z_spec,
        points: z.len(),
        ig_bit_seconds: total,
        ig_bit_hours: total / SECONDS_PER_HOUR,
        day_start: rec.day.0,
        day_end: rec.day.1,
        length_scale_x: l,
        length_scale_y: l,
        trace: integ.keep_trace.then(|| ts.into_iter().zip(igs).collect()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrade::{perturb, subsample, truncate};

    const DAY0: f64 = 1_224_806_400.0; // 2008-10-24T00:00:00Z

    fn traj(points: &[(f64, f64, f64)], sigma: f64) -> Trajectory {
        let pts = points
            .iter()
            .map(|&(t, x, y)| Measurement::new(x, y, DAY0 + t, sigma).unwrap())
            .collect();
        Trajectory::new("owner", "tr", pts).unwrap()
    }

    fn walk(n: usize) -> Trajectory {
        let pts: Vec<(f64, f64, f64)> = (0..n)
            .map(|i| {
                let f = i as f64;
                (36_000.0 + 30.0 * f, 100.0 + 8.0 * f + (f * 0.7).sin() * 20.0, -50.0 + 3.0 * f)
            })
            .collect();
        traj(&pts, 3.0)
    }

    fn uninformative_ig(z: &Trajectory) -> f64 {
        ig_over_period(
            z,
            &DegradationSpec::Identity,
            &PriorKnowledge::uninformative(DEFAULT_SIGMA0),
            &IntegrationConfig::default(),
            &GpConfig::default(),
        )
        .unwrap()
        .ig_bit_seconds
    }

    /// Numerical `-∫ p log₂ p` for N(0, σ²) by composite Simpson on ±12σ.
    fn entropy_by_quadrature(sigma: f64) -> f64 {
        let n = 20_000;
        let (a, b) = (-12.0 * sigma, 12.0 * sigma);
        let h = (b - a) / n as f64;
        let f = |x: f64| {
            let p = (-(x * x) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
            if p > 0.0 {
                -p * p.log2()
            } else {
                0.0
            }
        };
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn entropy_values() {
        let h1 = gaussian_entropy(1.0).unwrap();
        assert!((h1 - entropy_by_quadrature(1.0)).abs() < 1e-6);
        assert!((h1 - 2.047_095_585).abs() < 1e-8);
        assert!((gaussian_entropy(4.0).unwrap() - h1 - 1.0).abs() < 1e-12);
        assert!((gaussian_entropy(7500.0 * 7500.0).unwrap() - 14.919_770_465).abs() < 1e-8);
        assert!(gaussian_entropy(0.0).is_err());
        assert!(gaussian_entropy(-1.0).is_err());
        assert!(gaussian_entropy(1e-6).unwrap() < 0.0);
    }

    #[test]
    fn pointwise_ig() {
        let p = |v: f64| TrackPoint {
            mean_x: 0.0,
            var_x: v,
            mean_y: 0.0,
            var_y: v,
        };
        assert_eq!(ig_between(&p(9.0), &p(9.0)).unwrap(), 0.0);
        let ig = ig_between(&p(7500.0 * 7500.0), &p(9.0)).unwrap();
        assert!((ig - 22.575_424_759).abs() < 1e-8);
        let halved = ig_between(&p(7500.0 * 7500.0), &p(9.0 / 4.0)).unwrap();
        assert!((halved - ig - 2.0).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_of_constant_over_day() {
        let ts: Vec<f64> = (0..=1440).map(|i| i as f64 * 60.0).collect();
        let vs = vec![3.5; ts.len()];
        assert!((trapezoid(&ts, &vs) - 86_400.0 * 3.5).abs() < 1e-9);
    }

    #[test]
    fn grid_covers_day_and_measurements() {
        let g = integration_grid((0.0, 86_400.0), &[30.0, 30.0, 90_000.0], &IntegrationConfig::default());
        assert_eq!(g.first(), Some(&0.0));
        assert_eq!(g.last(), Some(&86_400.0));
        assert_eq!(g.len(), 1442);
        assert!(g.contains(&30.0));
    }

    #[test]
    fn release_equal_to_z_gives_no_gain() {
        let s = walk(40);
        let base = uninformative_ig(&s);
        for spec in [
            DegradationSpec::Identity,
            DegradationSpec::Truncation { ratio: 0.6 },
            DegradationSpec::Perturbation {
                total_noise_m: 100.0,
                seed: 3,
            },
        ] {
            let z = spec.apply(&s).unwrap();
            let prior = PriorKnowledge::released(DEFAULT_SIGMA0, z.clone(), spec);
            let r = ig_over_period(&z, &spec, &prior, &IntegrationConfig::default(), &GpConfig::default()).unwrap();
            assert!(r.ig_bit_seconds.abs() < 1e-6 * base, "{spec}: {}", r.ig_bit_seconds);
        }
    }

    #[test]
    fn second_measurement_adds_information() {
        let one = traj(&[(36_000.0, 10.0, 20.0)], 3.0);
        let two = traj(&[(36_000.0, 10.0, 20.0), (39_600.0, 400.0, -80.0)], 3.0);
        let a = uninformative_ig(&one);
        let b = uninformative_ig(&two);
        assert!(a > 0.0 && a < b, "{a} {b}");
    }

    #[test]
    fn uninformative_upper_bound() {
        let s = walk(60);
        let rec = reconstruct(
            &s,
            &DegradationSpec::Identity,
            &PriorKnowledge::uninformative(DEFAULT_SIGMA0),
            &GpConfig::default(),
        )
        .unwrap();
        let min_var = s
            .points()
            .iter()
            .map(|p| rec.posterior.query(p.t).var_x)
            .fold(f64::INFINITY, f64::min);
        let bound = SECONDS_PER_DAY
            * 2.0
            * (gaussian_entropy(DEFAULT_SIGMA0 * DEFAULT_SIGMA0).unwrap() - gaussian_entropy(min_var).unwrap());
        assert!(uninformative_ig(&s) <= bound);
    }

    #[test]
    fn halving_step_barely_moves_result() {
        let s = walk(50);
        let spec = DegradationSpec::Identity;
        let prior = PriorKnowledge::uninformative(DEFAULT_SIGMA0);
        let at = |step: f64| {
            let integ = IntegrationConfig {
                step,
                ..Default::default()
            };
            ig_over_period(&s, &spec, &prior, &integ, &GpConfig::default()).unwrap().ig_bit_seconds
        };
        let (a, b) = (at(60.0), at(30.0));
        assert!(((a - b) / b).abs() < 0.005, "{a} {b}");
    }

    #[test]
    fn combine_rules() {
        let s = walk(20);
        let unin = PriorKnowledge::uninformative(DEFAULT_SIGMA0);
        assert_eq!(combine(&s, &DegradationSpec::Identity, &unin), s.points());

        // Superset Z swallows the release.
        let z = truncate(&s, 0.8).unwrap();
        let omega = truncate(&s, 0.2).unwrap();
        let prior = PriorKnowledge::released(DEFAULT_SIGMA0, omega.clone(), DegradationSpec::Truncation { ratio: 0.2 });
        assert_eq!(combine(&z, &DegradationSpec::Truncation { ratio: 0.8 }, &prior), z.points());
        // And a subset Z yields the release.
        let prior = PriorKnowledge::released(DEFAULT_SIGMA0, z.clone(), DegradationSpec::Truncation { ratio: 0.8 });
        assert_eq!(combine(&omega, &DegradationSpec::Truncation { ratio: 0.2 }, &prior), z.points());

        let sub = subsample(&s, 0.4, 1).unwrap();
        let prior = PriorKnowledge::released(DEFAULT_SIGMA0, sub.clone(), DegradationSpec::Subsampling { ratio: 0.4, seed: 1 });
        assert_eq!(combine(&s, &DegradationSpec::Identity, &prior), s.points());

        // Perturbations fuse per timestamp.
        let z = perturb(&s, 100.0, 1).unwrap();
        let w = perturb(&s, 400.0, 2).unwrap();
        let spec_z = DegradationSpec::Perturbation { total_noise_m: 100.0, seed: 1 };
        let prior = PriorKnowledge::released(DEFAULT_SIGMA0, w.clone(), DegradationSpec::Perturbation { total_noise_m: 400.0, seed: 2 });
        let c = combine(&z, &spec_z, &prior);
        assert_eq!(c.len(), s.len());
        let expected_sigma = (1.0f64 / 100.0f64.powi(2) + 1.0 / 400.0f64.powi(2)).powf(-0.5);
        for ((m, a), b) in c.iter().zip(z.points()).zip(w.points()) {
            assert!((m.sigma - expected_sigma).abs() < 1e-9);
            let wx = (a.x / 1e4 + b.x / 16e4) / (1.0 / 1e4 + 1.0 / 16e4);
            assert!((m.x - wx).abs() < 1e-9);
        }
    }

    #[test]
    fn inverse_variance_handles_exact_measurements() {
        let a = Measurement::new(1.0, 2.0, 0.0, 0.0).unwrap();
        let b = Measurement::new(5.0, 6.0, 0.0, 10.0).unwrap();
        assert_eq!(inverse_variance(&a, &b), a);
        assert_eq!(inverse_variance(&b, &a), a);
    }

    #[test]
    fn informative_prior_reduces_gain() {
        let s = walk(60);
        let z = perturb(&s, 10.0, 9).unwrap();
        let spec = DegradationSpec::Perturbation { total_noise_m: 10.0, seed: 9 };
        let w_spec = DegradationSpec::Perturbation { total_noise_m: 400.0, seed: 4 };
        let w = w_spec.apply(&s).unwrap();
        let integ = IntegrationConfig::default();
        let gp = GpConfig::default();
        let unin = ig_over_period(&z, &spec, &PriorKnowledge::uninformative(DEFAULT_SIGMA0), &integ, &gp).unwrap();
        let inf = ig_over_period(&z, &spec, &PriorKnowledge::released(DEFAULT_SIGMA0, w, w_spec), &integ, &gp).unwrap();
        assert!(inf.ig_bit_seconds < unin.ig_bit_seconds);
        assert!(inf.ig_bit_seconds > 0.0);
        assert_eq!(inf.prior, "perturbation:400");
    }

    #[test]
    fn mismatched_release_is_rejected() {
        let s = walk(5);
        let mut other = walk(5);
        other.trajectory_id = "other".into();
        let prior = PriorKnowledge::released(DEFAULT_SIGMA0, other, DegradationSpec::Identity);
        assert!(reconstruct(&s, &DegradationSpec::Identity, &prior, &GpConfig::default()).is_err());
    }

    #[test]
    fn report_carries_trace_and_units() {
        let s = walk(10);
        let integ = IntegrationConfig {
            keep_trace: true,
            ..Default::default()
        };
        let r = ig_over_period(
            &s,
            &DegradationSpec::Identity,
            &PriorKnowledge::uninformative(DEFAULT_SIGMA0),
            &integ,
            &GpConfig::default(),
        )
        .unwrap();
        assert_eq!(r.day_end - r.day_start, SECONDS_PER_DAY);
        assert_eq!(r.day_start, DAY0);
        assert!((r.ig_bit_hours * 3600.0 - r.ig_bit_seconds).abs() < 1e-6);
        let trace = r.trace.unwrap();
        assert!(trace.len() >= 1441);
    }
}

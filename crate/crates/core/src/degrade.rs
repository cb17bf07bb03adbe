//! Degradation operators: perturbation, truncation and nested subsampling.
//!
//! Randomness comes from ChaCha8 streams keyed by FNV-1a over
//! `(seed, trajectory_id, stream tag)`, so results are reproducible and
//! independent of evaluation order.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VoiError};
use crate::model::{Measurement, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradationKind {
    Identity,
    Perturbation,
    Truncation,
    Subsampling,
}

impl DegradationKind {
    pub fn name(self) -> &'static str {
        match self {
            DegradationKind::Identity => "identity",
            DegradationKind::Perturbation => "perturbation",
            DegradationKind::Truncation => "truncation",
            DegradationKind::Subsampling => "subsampling",
        }
    }

    /// True for kinds whose output is a raw subset of the input.
    pub fn is_subset(self) -> bool {
        !matches!(self, DegradationKind::Perturbation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DegradationSpec {
    Identity,
    Perturbation { total_noise_m: f64, seed: u64 },
    Truncation { ratio: f64 },
    Subsampling { ratio: f64, seed: u64 },
}

impl DegradationSpec {
    pub fn kind(&self) -> DegradationKind {
        match self {
            DegradationSpec::Identity => DegradationKind::Identity,
            DegradationSpec::Perturbation { .. } => DegradationKind::Perturbation,
            DegradationSpec::Truncation { .. } => DegradationKind::Truncation,
            DegradationSpec::Subsampling { .. } => DegradationKind::Subsampling,
        }
    }

    /// Total noise in meters or retained ratio; `None` for identity.
    pub fn param(&self) -> Option<f64> {
        match *self {
            DegradationSpec::Identity => None,
            DegradationSpec::Perturbation { total_noise_m, .. } => Some(total_noise_m),
            DegradationSpec::Truncation { ratio } | DegradationSpec::Subsampling { ratio, .. } => {
                Some(ratio)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DegradationSpec::Identity => Ok(()),
            DegradationSpec::Perturbation { total_noise_m, .. } => {
                if total_noise_m.is_finite() && total_noise_m >= 0.0 {
                    Ok(())
                } else {
                    Err(VoiError::InvalidSpec(format!("total noise {total_noise_m}")))
                }
            }
            DegradationSpec::Truncation { ratio } | DegradationSpec::Subsampling { ratio, .. } => {
                check_ratio(ratio)
            }
        }
    }

    /// Applies this degradation to `traj`.
    pub fn apply(&self, traj: &Trajectory) -> Result<Trajectory> {
        match *self {
            DegradationSpec::Identity => Ok(traj.clone()),
            DegradationSpec::Perturbation { total_noise_m, seed } => perturb(traj, total_noise_m, seed),
            DegradationSpec::Truncation { ratio } => truncate(traj, ratio),
            DegradationSpec::Subsampling { ratio, seed } => subsample(traj, ratio, seed),
        }
    }

    /// Stable ordering key: kind, then parameter.
    pub fn sort_key(&self) -> (DegradationKind, u64) {
        (self.kind(), self.param().map_or(0, ordered_bits))
    }
}

impl fmt::Display for DegradationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.param() {
            Some(p) => write!(f, "{}:{p}", self.kind().name()),
            None => f.write_str(self.kind().name()),
        }
    }
}

/// Maps an f64 to a u64 whose unsigned order matches the float order.
pub(crate) fn ordered_bits(v: f64) -> u64 {
    let b = v.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

fn check_ratio(ratio: f64) -> Result<()> {
    if ratio > 0.0 && ratio <= 1.0 {
        Ok(())
    } else {
        Err(VoiError::InvalidSpec(format!("ratio {ratio} outside (0, 1]")))
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(state: u64, bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(state, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

/// Seed of the random stream for one (seed, trajectory, purpose) triple.
pub fn stream_seed(seed: u64, trajectory_id: &str, tag: &str) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &seed.to_le_bytes());
    h = fnv1a(h, trajectory_id.as_bytes());
    h = fnv1a(h, &[0xff]);
    fnv1a(h, tag.as_bytes())
}

pub fn stream_rng(seed: u64, trajectory_id: &str, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, trajectory_id, tag))
}

/// Adds Gaussian noise so every output measurement has standard deviation
/// `total_noise`.
pub fn perturb(traj: &Trajectory, total_noise: f64, seed: u64) -> Result<Trajectory> {
    DegradationSpec::Perturbation {
        total_noise_m: total_noise,
        seed,
    }
    .validate()?;
    if let Some(p) = traj.points().iter().find(|p| p.sigma > total_noise) {
        return Err(VoiError::InvalidSpec(format!(
            "total noise {total_noise} m below existing sigma {} m in {}",
            p.sigma, traj.trajectory_id
        )));
    }
    let tag = format!("perturb:{:016x}", total_noise.to_bits());
    let mut rng = stream_rng(seed, &traj.trajectory_id, &tag);
    let points = traj
        .points()
        .iter()
        .map(|p| {
            let sigma_z = (total_noise * total_noise - p.sigma * p.sigma).max(0.0).sqrt();
            let n1: f64 = rng.sample(StandardNormal);
            let n2: f64 = rng.sample(StandardNormal);
            Measurement {
                x: p.x + sigma_z * n1,
                y: p.y + sigma_z * n2,
                t: p.t,
                sigma: total_noise,
            }
        })
        .collect();
    traj.with_points(points)
}

/// Number of leading measurements kept by truncation.
pub fn truncation_count(len: usize, ratio: f64) -> usize {
    ((ratio * len as f64).floor() as usize).clamp(1, len.max(1))
}

/// Keeps the temporally first `floor(ratio * |S|)` measurements, at least one.
pub fn truncate(traj: &Trajectory, ratio: f64) -> Result<Trajectory> {
    check_ratio(ratio)?;
    let n = truncation_count(traj.len(), ratio);
    traj.with_points(traj.points()[..n].to_vec())
}

/// Keeps each measurement independently with probability `ratio`.
///
/// One uniform draw per measurement is shared by all ratios for a given
/// `(trajectory, seed)`, so a smaller ratio always yields a subset of a larger
/// one. If nothing passes, the measurement with the smallest draw is kept.
pub fn subsample(traj: &Trajectory, ratio: f64, seed: u64) -> Result<Trajectory> {
    check_ratio(ratio)?;
    let mut rng = stream_rng(seed, &traj.trajectory_id, "subsample");
    let draws: Vec<f64> = (0..traj.len()).map(|_| rng.random::<f64>()).collect();
    let mut kept: Vec<Measurement> = traj
        .points()
        .iter()
        .zip(&draws)
        .filter(|(_, u)| **u < ratio)
        .map(|(p, _)| *p)
        .collect();
    if kept.is_empty() {
        let (i, _) = draws
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("trajectory is non-empty");
        kept.push(traj.points()[i]);
    }
    traj.with_points(kept)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, sigma: f64) -> Trajectory {
        let pts = (0..n)
            .map(|i| Measurement::new(i as f64 * 10.0, -(i as f64), i as f64 * 5.0, sigma).unwrap())
            .collect();
        Trajectory::new("o", "traj-a", pts).unwrap()
    }

    #[test]
    fn zero_extra_noise_is_identity() {
        let s = line(20, 3.0);
        let z = perturb(&s, 3.0, 7).unwrap();
        assert_eq!(z.points(), s.points());
    }

    #[test]
    fn total_noise_follows_pythagoras() {
        let s = line(5, 3.0);
        let z = perturb(&s, 5.0, 1).unwrap();
        assert!(z.points().iter().all(|p| p.sigma == 5.0));
        assert!(z.points().iter().zip(s.points()).all(|(a, b)| a.t == b.t));
        assert!(perturb(&s, 2.0, 1).is_err());
    }

    #[test]
    fn perturbation_noise_has_requested_spread() {
        let pt = Measurement::new(0.0, 0.0, 0.0, 0.0).unwrap();
        let s = Trajectory::new("o", "many", vec![pt; 10_000]).unwrap();
        let z = perturb(&s, 100.0, 11).unwrap();
        let n = z.len() as f64;
        let mean = z.points().iter().map(|p| p.x).sum::<f64>() / n;
        let var = z.points().iter().map(|p| (p.x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        assert!((97.0..=103.0).contains(&sd), "{sd}");
    }

    #[test]
    fn truncation_counts() {
        let s = line(100, 3.0);
        let z = truncate(&s, 0.2).unwrap();
        assert_eq!(z.points(), &s.points()[..20]);
        assert_eq!(truncate(&line(3, 3.0), 0.05).unwrap().len(), 1);
        assert_eq!(truncate(&s, 1.0).unwrap(), s);
        assert!(truncate(&s, 0.0).is_err());
        assert!(truncate(&s, 1.5).is_err());
    }

    #[test]
    fn subsampling_full_ratio_and_concentration() {
        let s = line(50, 3.0);
        assert_eq!(subsample(&s, 1.0, 3).unwrap(), s);
        let big = line(10_000, 3.0);
        let k = subsample(&big, 0.4, 99).unwrap().len();
        assert!((3800..=4200).contains(&k), "{k}");
        assert_eq!(subsample(&line(1, 3.0), 0.05, 3).unwrap().len(), 1);
    }

    #[test]
    fn subsampling_nests_across_ratios() {
        let s = line(200, 3.0);
        let ratios = [0.05, 0.2, 0.4, 0.6, 0.8];
        for seed in 0..100 {
            let subs: Vec<Vec<f64>> = ratios
                .iter()
                .map(|r| subsample(&s, *r, seed).unwrap().points().iter().map(|p| p.t).collect())
                .collect();
            for w in subs.windows(2) {
                assert!(w[0].iter().all(|t| w[1].contains(t)), "seed {seed}");
            }
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let s = line(30, 3.0);
        let spec = DegradationSpec::Perturbation {
            total_noise_m: 100.0,
            seed: 5,
        };
        assert_eq!(spec.apply(&s).unwrap(), spec.apply(&s).unwrap());
        let other = DegradationSpec::Perturbation {
            total_noise_m: 100.0,
            seed: 6,
        };
        assert_ne!(spec.apply(&s).unwrap(), other.apply(&s).unwrap());
    }

    #[test]
    fn spec_serde_shape() {
        let spec: DegradationSpec =
            serde_json::from_str(r#"{"kind":"perturbation","total_noise_m":100,"seed":7}"#).unwrap();
        assert_eq!(
            spec,
            DegradationSpec::Perturbation {
                total_noise_m: 100.0,
                seed: 7
            }
        );
        assert_eq!(spec.to_string(), "perturbation:100");
    }

    #[test]
    fn ordered_bits_is_monotone() {
        let vals = [-3.0, -0.5, 0.0, 0.05, 0.2, 3.0, 400.0];
        for w in vals.windows(2) {
            assert!(ordered_bits(w[0]) < ordered_bits(w[1]));
        }
    }
}

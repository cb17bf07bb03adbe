//! Continuous-time Gaussian-process reconstruction of a trajectory.
//!
//! Each planar coordinate is an independent scalar GP over time with a
//! Matérn 3/2 kernel plus a per-measurement white-noise term and a linear
//! mean function. Kernel time is measured in hours; mean functions take
//! seconds relative to the track origin.
//!
//! Both coordinates of a track share the training times, noise levels and
//! length scale, so they share one Cholesky factor.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VoiError};
use crate::model::Measurement;

pub const SECONDS_PER_HOUR: f64 = 3600.0;

/// Admissible length-scale range, hours.
pub const LENGTH_SCALE_BOUNDS: (f64, f64) = (0.01, 10.0);

const GRID_POINTS: usize = 32;
const GOLDEN_REL_TOL: f64 = 1e-3;
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

/// Matérn 3/2 covariance at lag `dt_hours`.
#[inline]
pub fn matern32(dt_hours: f64, sigma_f: f64, length_scale: f64) -> f64 {
    let r = 3f64.sqrt() * dt_hours.abs() / length_scale;
    sigma_f * sigma_f * (1.0 + r) * (-r).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Prior amplitude, meters.
    pub sigma_f: f64,
    /// Hours.
    pub length_scale: f64,
}

impl KernelParams {
    pub fn new(sigma_f: f64, length_scale: f64) -> Result<Self> {
        let p = Self {
            sigma_f,
            length_scale,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = LENGTH_SCALE_BOUNDS;
        if !(self.sigma_f > 0.0 && self.sigma_f.is_finite()) {
            return Err(VoiError::invalid(format!("sigma_f must be > 0, got {}", self.sigma_f)));
        }
        if !(lo..=hi).contains(&self.length_scale) {
            return Err(VoiError::invalid(format!(
                "length scale {} outside [{lo}, {hi}]",
                self.length_scale
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn cov(&self, t1_hours: f64, t2_hours: f64) -> f64 {
        matern32(t1_hours - t2_hours, self.sigma_f, self.length_scale)
    }
}

/// `m(t) = intercept + slope * t`, with `t` in seconds from the track origin.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanFunction {
    pub slope: f64,
    pub intercept: f64,
}

impl MeanFunction {
    pub fn constant(c: f64) -> Self {
        Self {
            slope: 0.0,
            intercept: c,
        }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.intercept + self.slope * t
    }
}

/// Ordinary least squares line through `(t, value)` pairs.
pub fn fit_linear_mean(data: &[(f64, f64)]) -> Result<MeanFunction> {
    if data.is_empty() {
        return Err(VoiError::invalid("linear mean needs at least one point"));
    }
    let n = data.len() as f64;
    let t_mean = data.iter().map(|d| d.0).sum::<f64>() / n;
    let v_mean = data.iter().map(|d| d.1).sum::<f64>() / n;
    let sxx: f64 = data.iter().map(|d| (d.0 - t_mean).powi(2)).sum();
    if sxx == 0.0 {
        return Ok(MeanFunction::constant(v_mean));
    }
    let sxy: f64 = data.iter().map(|d| (d.0 - t_mean) * (d.1 - v_mean)).sum();
    let slope = sxy / sxx;
    Ok(MeanFunction {
        slope,
        intercept: v_mean - slope * t_mean,
    })
}

/// In-place lower Cholesky of a row-major `n x n` matrix. Only the lower
/// triangle is read or written.
fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let row_j = j * n;
        let mut d = a[row_j + j];
        for k in 0..j {
            d -= a[row_j + k] * a[row_j + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[row_j + j] = d;
        for i in (j + 1)..n {
            let row_i = i * n;
            let mut s = a[row_i + j];
            for k in 0..j {
                s -= a[row_i + k] * a[row_j + k];
            }
            a[row_i + j] = s / d;
        }
    }
    true
}

/// Kernel matrix of a training set, factorized.
#[derive(Debug, Clone)]
pub struct GpCore {
    params: KernelParams,
    times_h: Vec<f64>,
    /// Row-major lower Cholesky factor of K + diag(noise) + jitter.
    chol: Vec<f64>,
    jitter: f64,
}

impl GpCore {
    /// Factorizes the training covariance, escalating the diagonal jitter
    /// tenfold from `1e-10 sigma_f^2` up to `1e-4 sigma_f^2` on failure.
    pub fn new(times_h: &[f64], noise_var: &[f64], params: KernelParams, label: &str) -> Result<Self> {
        assert_eq!(times_h.len(), noise_var.len());
        let n = times_h.len();
        let sf2 = params.sigma_f * params.sigma_f;
        let mut base = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                base[i * n + j] = params.cov(times_h[i], times_h[j]);
            }
            base[i * n + i] += noise_var[i];
        }
        let mut rel = JITTER_START;
        loop {
            let jitter = rel * sf2;
            let mut a = base.clone();
            for i in 0..n {
                a[i * n + i] += jitter;
            }
            if cholesky_in_place(&mut a, n) {
                return Ok(Self {
                    params,
                    times_h: times_h.to_vec(),
                    chol: a,
                    jitter,
                });
            }
            rel *= 10.0;
            if rel > JITTER_MAX * (1.0 + 1e-9) {
                return Err(VoiError::Numerical {
                    trajectory: label.to_string(),
                    reason: format!(
                        "Cholesky failed with jitter up to {JITTER_MAX} sigma_f^2 (n = {n}, l = {})",
                        params.length_scale
                    ),
                });
            }
        }
    }

    pub fn len(&self) -> usize {
        self.times_h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_h.is_empty()
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    /// Diagonal jitter that was needed for the factorization, meters².
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    fn forward(&self, b: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let row = &self.chol[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(l, x)| l * x).sum();
            b[i] = (b[i] - s) / self.chol[i * n + i];
        }
    }

    fn backward(&self, b: &mut [f64]) {
        let n = self.len();
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.chol[k * n + i] * b[k];
            }
            b[i] = s / self.chol[i * n + i];
        }
    }

    /// Returns `(K + noise)^-1 rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.forward(&mut x);
        self.backward(&mut x);
        x
    }

    pub fn log_det(&self) -> f64 {
        let n = self.len();
        2.0 * (0..n).map(|i| self.chol[i * n + i].ln()).sum::<f64>()
    }

    /// Log marginal likelihood of zero-mean `residuals`.
    pub fn log_marginal_likelihood(&self, residuals: &[f64]) -> f64 {
        let mut z = residuals.to_vec();
        self.forward(&mut z);
        let quad: f64 = z.iter().map(|v| v * v).sum();
        let n = self.len() as f64;
        -0.5 * quad - 0.5 * self.log_det() - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    fn cross_cov(&self, t_h: f64) -> Vec<f64> {
        self.times_h.iter().map(|&ti| self.params.cov(t_h, ti)).collect()
    }

    /// Latent posterior variance at `t_h` together with the cross-covariance
    /// vector used for the mean.
    fn predict_var(&self, t_h: f64) -> (f64, Vec<f64>) {
        let kstar = self.cross_cov(t_h);
        let mut v = kstar.clone();
        self.forward(&mut v);
        let prior = self.params.sigma_f * self.params.sigma_f;
        let var = prior - v.iter().map(|x| x * x).sum::<f64>();
        (var.max(self.jitter), kstar)
    }
}

/// Training observation for one coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// Seconds from the track origin.
    pub t: f64,
    pub value: f64,
    /// Measurement standard deviation (white-kernel level), meters.
    pub sigma: f64,
}

/// Posterior of one coordinate.
#[derive(Debug, Clone)]
pub struct ScalarGp {
    core: Arc<GpCore>,
    mean: MeanFunction,
    /// `(K + noise)^-1 (y - m)`.
    alpha: Vec<f64>,
}

impl ScalarGp {
    /// Exact GP regression of one coordinate.
    pub fn fit(train: &[Observation], mean: MeanFunction, params: KernelParams) -> Result<Self> {
        params.validate()?;
        let times_h: Vec<f64> = train.iter().map(|o| o.t / SECONDS_PER_HOUR).collect();
        let noise: Vec<f64> = train.iter().map(|o| o.sigma * o.sigma).collect();
        let core = Arc::new(GpCore::new(&times_h, &noise, params, "scalar")?);
        let resid: Vec<f64> = train.iter().map(|o| o.value - mean.eval(o.t)).collect();
        Ok(Self::from_core(core, mean, &resid))
    }

    fn from_core(core: Arc<GpCore>, mean: MeanFunction, residuals: &[f64]) -> Self {
        let alpha = core.solve(residuals);
        Self { core, mean, alpha }
    }

    /// `(mean, variance)` of the latent coordinate at `t` seconds from the
    /// origin.
    pub fn predict(&self, t: f64) -> (f64, f64) {
        let (var, kstar) = self.core.predict_var(t / SECONDS_PER_HOUR);
        (self.mean_with(t, &kstar), var)
    }

    fn mean_with(&self, t: f64, kstar: &[f64]) -> f64 {
        self.mean.eval(t) + kstar.iter().zip(&self.alpha).map(|(k, a)| k * a).sum::<f64>()
    }

    pub fn core(&self) -> &GpCore {
        &self.core
    }

    pub fn mean_function(&self) -> MeanFunction {
        self.mean
    }
}

/// Gaussian marginals of a reconstructed location at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub mean_x: f64,
    pub var_x: f64,
    pub mean_y: f64,
    pub var_y: f64,
}

/// Continuous-time reconstruction of a trajectory: independent Gaussians
/// for x and y at any query time.
#[derive(Debug, Clone)]
pub struct GaussianTrack {
    origin: f64,
    x: ScalarGp,
    y: ScalarGp,
}

impl GaussianTrack {
    /// Fits both coordinates on `points`. Absolute timestamps are shifted by
    /// `origin` seconds; the mean functions take shifted seconds.
    pub fn fit(
        points: &[Measurement],
        origin: f64,
        means: [MeanFunction; 2],
        params: KernelParams,
        label: &str,
    ) -> Result<Self> {
        params.validate()?;
        let (times_h, noise) = kernel_inputs(points, origin);
        let core = Arc::new(GpCore::new(&times_h, &noise, params, label)?);
        let resid = |axis: usize| -> Vec<f64> {
            points
                .iter()
                .map(|p| p.coord(axis) - means[axis].eval(p.t - origin))
                .collect()
        };
        let x = ScalarGp::from_core(Arc::clone(&core), means[0], &resid(0));
        let y = ScalarGp::from_core(core, means[1], &resid(1));
        Ok(Self { origin, x, y })
    }

    /// Stationary prior `N(mean, sigma^2)` per coordinate.
    pub fn stationary(origin: f64, mean: [f64; 2], sigma: f64) -> Result<Self> {
        let params = KernelParams::new(sigma, LENGTH_SCALE_BOUNDS.1)?;
        Self::fit(
            &[],
            origin,
            [MeanFunction::constant(mean[0]), MeanFunction::constant(mean[1])],
            params,
            "prior",
        )
    }

    pub fn query(&self, t: f64) -> TrackPoint {
        let s = t - self.origin;
        let (var, kstar) = self.x.core.predict_var(s / SECONDS_PER_HOUR);
        TrackPoint {
            mean_x: self.x.mean_with(s, &kstar),
            var_x: var,
            mean_y: self.y.mean_with(s, &kstar),
            var_y: var,
        }
    }

    pub fn query_many(&self, ts: &[f64]) -> Vec<TrackPoint> {
        ts.iter().map(|&t| self.query(t)).collect()
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn training_size(&self) -> usize {
        self.x.core.len()
    }

    pub fn params(&self) -> KernelParams {
        self.x.core.params
    }

    pub fn channel(&self, axis: usize) -> &ScalarGp {
        if axis == 0 {
            &self.x
        } else {
            &self.y
        }
    }

    /// Samples the track on a uniform grid for inspection.
    pub fn dump(&self, start: f64, end: f64, step: f64) -> TrackDump {
        let mut samples = Vec::new();
        let mut t = start;
        while t <= end {
            let p = self.query(t);
            samples.push(TrackSample { t, point: p });
            t += step;
        }
        TrackDump {
            params: self.params(),
            training_size: self.training_size(),
            mean_x: self.x.mean,
            mean_y: self.y.mean,
            samples,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackSample {
    pub t: f64,
    #[serde(flatten)]
    pub point: TrackPoint,
}

/// JSON-friendly snapshot of a fitted track.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackDump {
    pub params: KernelParams,
    pub training_size: usize,
    pub mean_x: MeanFunction,
    pub mean_y: MeanFunction,
    pub samples: Vec<TrackSample>,
}

fn kernel_inputs(points: &[Measurement], origin: f64) -> (Vec<f64>, Vec<f64>) {
    points
        .iter()
        .map(|p| ((p.t - origin) / SECONDS_PER_HOUR, p.sigma * p.sigma))
        .unzip()
}

/// Log-spaced candidate grid over `bounds`, endpoints included.
pub fn length_scale_grid(bounds: (f64, f64)) -> Vec<f64> {
    let (lo, hi) = (bounds.0.ln(), bounds.1.ln());
    (0..GRID_POINTS)
        .map(|i| {
            if i == GRID_POINTS - 1 {
                bounds.1
            } else {
                (lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64).exp()
            }
        })
        .collect()
}

/// Joint log marginal likelihood of several residual channels that share
/// times and noise, or `None` if the factorization fails.
pub fn joint_log_likelihood(
    times_h: &[f64],
    noise_var: &[f64],
    channels: &[Vec<f64>],
    params: KernelParams,
) -> Option<f64> {
    let core = GpCore::new(times_h, noise_var, params, "").ok()?;
    let v: f64 = channels.iter().map(|c| core.log_marginal_likelihood(c)).sum();
    v.is_finite().then_some(v)
}

/// Length scale maximizing the joint marginal likelihood: a log-spaced grid
/// scan, then golden-section refinement around the best grid point.
///
/// With fewer than two training points the geometric midpoint of `bounds`
/// is returned.
pub fn train_length_scale_channels(
    times_h: &[f64],
    noise_var: &[f64],
    channels: &[Vec<f64>],
    sigma_f: f64,
    bounds: (f64, f64),
    label: &str,
) -> Result<f64> {
    if times_h.len() < 2 {
        return Ok((bounds.0 * bounds.1).sqrt());
    }
    let objective = |l: f64| {
        joint_log_likelihood(
            times_h,
            noise_var,
            channels,
            KernelParams {
                sigma_f,
                length_scale: l,
            },
        )
    };
    let grid = length_scale_grid(bounds);
    let scores: Vec<Option<f64>> = grid.iter().map(|&l| objective(l)).collect();
    let Some((best_i, best_v)) = scores
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|v| (i, v)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
    else {
        return Err(VoiError::Numerical {
            trajectory: label.to_string(),
            reason: "every length-scale candidate failed to factorize".into(),
        });
    };

    let lo = grid[best_i.saturating_sub(1)].ln();
    let hi = grid[(best_i + 1).min(GRID_POINTS - 1)].ln();
    let f = |u: f64| objective(u.exp()).unwrap_or(f64::NEG_INFINITY);
    let refined = golden_section_max(f, lo, hi, GOLDEN_REL_TOL.ln_1p());
    let (best_l, _) = [(grid[best_i], best_v), (refined.0.exp(), refined.1)]
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("two candidates");
    Ok(best_l.clamp(bounds.0, bounds.1))
}

/// Trains one length scale for both coordinates of `points`.
pub fn train_length_scale(
    points: &[Measurement],
    origin: f64,
    means: [MeanFunction; 2],
    sigma_f: f64,
    bounds: (f64, f64),
    label: &str,
) -> Result<f64> {
    let (times_h, noise) = kernel_inputs(points, origin);
    let channels: Vec<Vec<f64>> = (0..2)
        .map(|axis| {
            points
                .iter()
                .map(|p| p.coord(axis) - means[axis].eval(p.t - origin))
                .collect()
        })
        .collect();
    train_length_scale_channels(&times_h, &noise, &channels, sigma_f, bounds, label)
}

/// Maximizes a unimodal `f` on `[a, b]` until the bracket is narrower than
/// `tol`. Returns the argmax and its value.
fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn matern_values() {
        assert_eq!(matern32(0.0, 3.0, 0.5), 9.0);
        // (1 + sqrt 3) e^{-sqrt 3}
        assert!((matern32(1.0, 1.0, 1.0) - 0.483_357_724_6).abs() < 1e-9);
        assert!(matern32(100.0, 1.0, 1.0) < 1e-60);
        assert_eq!(matern32(-0.7, 2.0, 0.3), matern32(0.7, 2.0, 0.3));
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let k = matern32(i as f64 * 0.05, 1.0, 0.4);
            assert!(k <= prev);
            prev = k;
        }
    }

    #[test]
    fn linear_mean_fits() {
        let m = fit_linear_mean(&[(0.0, 0.0), (1.0, 2.0)]).unwrap();
        assert!((m.slope - 2.0).abs() < 1e-12 && m.intercept.abs() < 1e-12);
        let m = fit_linear_mean(&[(0.0, 5.0), (3.0, 5.0), (9.0, 5.0)]).unwrap();
        assert!(m.slope.abs() < 1e-12 && (m.intercept - 5.0).abs() < 1e-12);
        let m = fit_linear_mean(&[(0.0, 0.0), (1.0, 1.0), (2.0, 4.0)]).unwrap();
        assert!((m.slope - 2.0).abs() < 1e-12 && (m.intercept + 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(fit_linear_mean(&[(4.0, 7.0), (4.0, 9.0)]).unwrap(), MeanFunction::constant(8.0));
        assert!(fit_linear_mean(&[]).is_err());
    }

    #[test]
    fn empty_training_set_is_the_prior() {
        let mean = MeanFunction {
            slope: 0.5,
            intercept: 10.0,
        };
        let gp = ScalarGp::fit(&[], mean, KernelParams::new(7500.0, 1.0).unwrap()).unwrap();
        for t in [0.0, 3600.0, 80_000.0] {
            let (m, v) = gp.predict(t);
            assert_eq!(m, mean.eval(t));
            assert_eq!(v, 7500.0 * 7500.0);
        }
    }

    #[test]
    fn single_point_shrinks_toward_observation() {
        let params = KernelParams::new(7500.0, 1.0).unwrap();
        let obs = [Observation {
            t: 0.0,
            value: 100.0,
            sigma: 3.0,
        }];
        let gp = ScalarGp::fit(&obs, MeanFunction::default(), params).unwrap();
        let (m, v) = gp.predict(0.0);
        assert!((97.0..=103.0).contains(&m), "{m}");
        assert!(v < 3.1 * 3.1 + gp.core().jitter(), "{v}");
        // 50 length scales away the data is irrelevant.
        let (_, far) = gp.predict(50.0 * SECONDS_PER_HOUR);
        assert!((far / (7500.0 * 7500.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn duplicate_times_factorize() {
        let params = KernelParams::new(7500.0, 10.0).unwrap();
        let obs: Vec<Observation> = (0..50)
            .map(|i| Observation {
                t: (i / 10) as f64,
                value: i as f64,
                sigma: 0.0,
            })
            .collect();
        assert!(ScalarGp::fit(&obs, MeanFunction::default(), params).is_ok());
    }

    #[test]
    fn grid_spans_bounds() {
        let g = length_scale_grid(LENGTH_SCALE_BOUNDS);
        assert_eq!(g.len(), 32);
        assert!((g[0] - 0.01).abs() < 1e-15);
        assert_eq!(g[31], 10.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn singleton_training_uses_geometric_midpoint() {
        let p = [Measurement::new(1.0, 2.0, 100.0, 3.0).unwrap()];
        let l = train_length_scale(&p, 0.0, [MeanFunction::default(); 2], 7500.0, LENGTH_SCALE_BOUNDS, "t")
            .unwrap();
        assert!((l - 0.1f64.sqrt()).abs() < 1e-12);
    }

    /// Draws `n` samples of a zero-mean Matérn 3/2 process at `times_h` by
    /// factorizing its covariance.
    fn sample_gp(times_h: &[f64], sigma_f: f64, l: f64, noise_sd: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let params = KernelParams::new(sigma_f, l).unwrap();
        let core = GpCore::new(times_h, &vec![0.0; times_h.len()], params, "sample").unwrap();
        let n = times_h.len();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        (0..n)
            .map(|i| {
                let s: f64 = (0..=i).map(|k| core.chol[i * n + k] * z[k]).sum();
                s + noise_sd * rng.sample::<f64, _>(StandardNormal)
            })
            .collect()
    }

    #[test]
    fn recovers_simulated_length_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 200;
        let times_h: Vec<f64> = (0..n).map(|i| i as f64 * 0.05).collect();
        let channels: Vec<Vec<f64>> = (0..2).map(|_| sample_gp(&times_h, 100.0, 1.0, 1.0, &mut rng)).collect();
        let noise = vec![1.0; n];
        let l = train_length_scale_channels(&times_h, &noise, &channels, 100.0, LENGTH_SCALE_BOUNDS, "sim")
            .unwrap();
        assert!((0.5..=2.0).contains(&l), "{l}");

        // Returned optimum dominates every grid candidate.
        let at = |l: f64| {
            joint_log_likelihood(&times_h, &noise, &channels, KernelParams::new(100.0, l).unwrap()).unwrap()
        };
        let best = at(l);
        for g in length_scale_grid(LENGTH_SCALE_BOUNDS) {
            assert!(best >= at(g) - 1e-9);
        }
    }

    #[test]
    fn white_noise_pins_length_scale_to_lower_bound() {
        // Independent draws with the full prior variance: only a kernel that
        // decorrelates between samples explains them.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 120;
        let times_h: Vec<f64> = (0..n).map(|i| i as f64 * 0.1).collect();
        let sd = (50.0f64 * 50.0 + 1.0).sqrt();
        let channels: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let noise = vec![1.0; n];
        let l = train_length_scale_channels(&times_h, &noise, &channels, 50.0, LENGTH_SCALE_BOUNDS, "wn")
            .unwrap();
        let grid = length_scale_grid(LENGTH_SCALE_BOUNDS);
        let at = |l: f64| {
            joint_log_likelihood(&times_h, &noise, &channels, KernelParams::new(50.0, l).unwrap()).unwrap()
        };
        let interior_best = grid[1..31].iter().map(|&g| at(g)).fold(f64::NEG_INFINITY, f64::max);
        assert!(at(grid[0]) >= interior_best - 1e-6, "l = {l}");
        assert!(l < 0.02, "{l}");
    }

    #[test]
    fn time_reversal_mirrors_predictions() {
        let params = KernelParams::new(500.0, 0.3).unwrap();
        let obs: Vec<Observation> = [(0.0, 10.0, 3.0), (900.0, -40.0, 5.0), (4000.0, 70.0, 3.0)]
            .iter()
            .map(|&(t, value, sigma)| Observation { t, value, sigma })
            .collect();
        let rev: Vec<Observation> = obs.iter().map(|o| Observation { t: -o.t, ..*o }).collect();
        let a = ScalarGp::fit(&obs, MeanFunction::default(), params).unwrap();
        let b = ScalarGp::fit(&rev, MeanFunction::default(), params).unwrap();
        for t in [-100.0, 450.0, 2000.0, 7000.0] {
            let (ma, va) = a.predict(t);
            let (mb, vb) = b.predict(-t);
            assert!((ma - mb).abs() < 1e-8 * (1.0 + ma.abs()));
            assert!((va - vb).abs() < 1e-8 * va);
        }
    }

    #[test]
    fn swapping_channels_swaps_outputs() {
        let pts: Vec<Measurement> = (0..8)
            .map(|i| Measurement::new(i as f64 * 13.0, 200.0 - i as f64 * 4.0, i as f64 * 60.0, 3.0).unwrap())
            .collect();
        let swapped: Vec<Measurement> = pts.iter().map(|p| Measurement { x: p.y, y: p.x, ..*p }).collect();
        let params = KernelParams::new(7500.0, 0.5).unwrap();
        let m = [MeanFunction::constant(1.0), MeanFunction::constant(-2.0)];
        let a = GaussianTrack::fit(&pts, 0.0, m, params, "a").unwrap();
        let b = GaussianTrack::fit(&swapped, 0.0, [m[1], m[0]], params, "b").unwrap();
        for t in [-30.0, 100.0, 333.0, 1000.0] {
            let (p, q) = (a.query(t), b.query(t));
            assert_eq!((p.mean_x, p.var_x), (q.mean_y, q.var_y));
            assert_eq!((p.mean_y, p.var_y), (q.mean_x, q.var_x));
        }
    }

    proptest::proptest! {
        #[test]
        fn posterior_variance_never_exceeds_prior(
            times in proptest::collection::vec(0.0f64..20_000.0, 0..12),
            sigma in 0.0f64..50.0,
            l in 0.01f64..10.0,
            q in -5_000.0f64..30_000.0,
        ) {
            let pts: Vec<Measurement> = {
                let mut ts = times.clone();
                ts.sort_by(f64::total_cmp);
                ts.iter().map(|&t| Measurement::new(t * 0.01, -t * 0.02, t, sigma).unwrap()).collect()
            };
            let params = KernelParams::new(7500.0, l).unwrap();
            let track = GaussianTrack::fit(&pts, 0.0, [MeanFunction::default(); 2], params, "p").unwrap();
            let v = track.query(q).var_x;
            proptest::prop_assert!(v > 0.0);
            proptest::prop_assert!(v <= 7500.0 * 7500.0 * (1.0 + 1e-6));
        }
    }
}

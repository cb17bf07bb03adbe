//! Shared domain types and the local equirectangular projection.
//!
//! Coordinates are stored in meters east/north of a reference origin after
//! projection; timestamps are continuous seconds since the Unix epoch.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VoiError};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Maximum absolute latitude accepted by [`project`].
pub const MAX_PROJECTION_LAT: f64 = 89.0;

/// One timestamped planar location with isotropic Gaussian uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub sigma: f64,
}

impl Measurement {
    pub fn new(x: f64, y: f64, t: f64, sigma: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && t.is_finite()) {
            return Err(VoiError::invalid(format!(
                "non-finite measurement ({x}, {y}, {t})"
            )));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(VoiError::invalid(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        Ok(Self { x, y, t, sigma })
    }

    /// Returns the coordinate selected by `axis` (0 = x, 1 = y).
    #[inline]
    pub fn coord(&self, axis: usize) -> f64 {
        if axis == 0 {
            self.x
        } else {
            self.y
        }
    }
}

/// A non-empty, time-ordered sequence of measurements belonging to one owner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub owner_id: String,
    pub trajectory_id: String,
    points: Vec<Measurement>,
}

impl Trajectory {
    pub fn new(
        owner_id: impl Into<String>,
        trajectory_id: impl Into<String>,
        points: Vec<Measurement>,
    ) -> Result<Self> {
        let trajectory_id = trajectory_id.into();
        if points.is_empty() {
            return Err(VoiError::invalid(format!(
                "trajectory {trajectory_id} has no measurements"
            )));
        }
        if points.windows(2).any(|w| w[1].t < w[0].t) {
            return Err(VoiError::invalid(format!(
                "trajectory {trajectory_id} has decreasing timestamps"
            )));
        }
        Ok(Self {
            owner_id: owner_id.into(),
            trajectory_id,
            points,
        })
    }

    /// Same identity, different points. Used by the degradation operators.
    pub fn with_points(&self, points: Vec<Measurement>) -> Result<Self> {
        Self::new(self.owner_id.clone(), self.trajectory_id.clone(), points)
    }

    pub fn points(&self) -> &[Measurement] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; a trajectory holds at least one measurement.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> &Measurement {
        &self.points[0]
    }

    pub fn last(&self) -> &Measurement {
        &self.points[self.points.len() - 1]
    }

    pub fn max_sigma(&self) -> f64 {
        self.points.iter().map(|p| p.sigma).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    pub lon0: f64,
    pub lat0: f64,
    pub name: String,
}

impl ProjectionConfig {
    pub fn new(lon0: f64, lat0: f64, name: impl Into<String>) -> Result<Self> {
        let cfg = Self {
            lon0,
            lat0,
            name: name.into(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Projection centered on the Beijing study area.
    pub fn beijing() -> Self {
        Region::beijing().center_projection("beijing")
    }

    pub fn validate(&self) -> Result<()> {
        if !(-180.0..=180.0).contains(&self.lon0) || !(-90.0..=90.0).contains(&self.lat0) {
            return Err(VoiError::invalid(format!(
                "projection origin ({}, {}) out of range",
                self.lon0, self.lat0
            )));
        }
        Ok(())
    }
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self::beijing()
    }
}

/// Axis-aligned lon/lat bounding box in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min_lon: f64,
    pub max_lon: f64,
    pub min_lat: f64,
    pub max_lat: f64,
}

impl Region {
    pub fn new(min_lon: f64, max_lon: f64, min_lat: f64, max_lat: f64) -> Result<Self> {
        let r = Self {
            min_lon,
            max_lon,
            min_lat,
            max_lat,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn beijing() -> Self {
        Self {
            min_lon: 116.20,
            max_lon: 116.55,
            min_lat: 39.80,
            max_lat: 40.06,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_lon < self.max_lon && self.min_lat < self.max_lat) {
            return Err(VoiError::invalid(format!("degenerate region {self:?}")));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        (self.min_lon..=self.max_lon).contains(&lon) && (self.min_lat..=self.max_lat).contains(&lat)
    }

    pub fn center_projection(&self, name: &str) -> ProjectionConfig {
        ProjectionConfig {
            lon0: 0.5 * (self.min_lon + self.max_lon),
            lat0: 0.5 * (self.min_lat + self.max_lat),
            name: name.to_string(),
        }
    }
}

impl Default for Region {
    fn default() -> Self {
        Self::beijing()
    }
}

/// Equirectangular projection about `(lon0, lat0)`, in meters.
pub fn project(lon: f64, lat: f64, cfg: &ProjectionConfig) -> Result<(f64, f64)> {
    if !(lon.is_finite() && lat.is_finite()) {
        return Err(VoiError::invalid("non-finite lon/lat"));
    }
    if lat.abs() >= MAX_PROJECTION_LAT {
        return Err(VoiError::invalid(format!(
            "latitude {lat} outside projection validity (|lat| < {MAX_PROJECTION_LAT})"
        )));
    }
    let k = EARTH_RADIUS_M * cfg.lat0.to_radians().cos();
    let x = k * (lon - cfg.lon0).to_radians();
    let y = EARTH_RADIUS_M * (lat - cfg.lat0).to_radians();
    Ok((x, y))
}

pub fn unproject(x: f64, y: f64, cfg: &ProjectionConfig) -> Result<(f64, f64)> {
    if !(x.is_finite() && y.is_finite()) {
        return Err(VoiError::invalid("non-finite x/y"));
    }
    let k = EARTH_RADIUS_M * cfg.lat0.to_radians().cos();
    let lon = cfg.lon0 + (x / k).to_degrees();
    let lat = cfg.lat0 + (y / EARTH_RADIUS_M).to_degrees();
    Ok((lon, lat))
}

//! Value of information of GPS trajectories measured as information gain.
//!
//! A trajectory (or a degraded release of it) is turned into a
//! continuous-time Gaussian reconstruction; its value is the reduction in
//! differential entropy of the owner's location, relative to what a
//! recipient already knows, integrated over the day the trajectory covers.
//!
//! Modules:
//! * [`model`]: measurements, trajectories, projection
//! * [`ingest`]: PLT/CSV input and segmentation
//! * [`degrade`]: perturbation, truncation, subsampling
//! * [`gp`]: Gaussian-process reconstruction
//! * [`infogain`] and [`equivalence`]: information gain and degradation equivalence
//! * [`baselines`]: comparison metrics
//! * [`analysis`]: rank correlation and robust regression
//! * [`pipeline`]: batch driver used by the CLI

pub mod analysis;
pub mod baselines;
pub mod degrade;
pub mod equivalence;
pub mod error;
pub mod format;
pub mod gp;
pub mod infogain;
pub mod ingest;
pub mod model;
pub mod par;
pub mod pipeline;

pub use error::{Result, VoiError};
pub use model::{Measurement, ProjectionConfig, Region, Trajectory};

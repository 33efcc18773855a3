//! Implicit obstacle detection from trajectories.
//!
//! Reference and query trajectories are cut into fixed-width windows and
//! indexed in navigable graphs under normalized DTW. A reference window is
//! a candidate obstacle location when trajectories in the query corpus that
//! resemble it stop continuing the way reference trajectories do, as judged
//! by kernel densities over nearest neighbors and a one-sided z-test.

pub mod cli;
pub mod density;
pub mod detector;
pub mod error;
pub mod geo;
pub mod geometry;
pub mod index;
pub mod model;
pub mod similarity;

pub use density::{DensityParams, DensityProfile, NormalizationMode};
pub use detector::{detect, DetectParams, DetectionResult, Obstacle, Optimizations, ZMode};
pub use error::{Error, Result};
pub use index::{CorpusIndex, CorpusKind, DistinctPrecompute, IndexParams, Neighbor, Probe};
pub use model::{GeoPoint, PartitionParams, SubTrajectoryStore, Trajectory, WindowId};

//! Evaluation of predicted steady incompressible flow fields around
//! immersed 2D geometries.
//!
//! Three metrics are computed per sample and mapped onto a common
//! logarithmic 0..100 score:
//!
//! * **M1**, mean squared error over the fluid region (`sdf > 0`);
//! * **M2**, mean squared error over a near-wall band of the signed
//!   distance field;
//! * **M3**, the mean squared steady Navier–Stokes momentum residual of the
//!   prediction itself.
//!
//! The [`datasets`] module reads sample archives, builds reproducible
//! train/test splits and generates analytic samples with known metric values.

pub mod calculus;
pub mod config;
pub mod datasets;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod grid;
pub mod metrics;
pub mod report;

pub use config::{Aggregation, EvalConfig};
pub use datasets::{Dataset, DatasetError};
pub use error::CoreError;
pub use flow::{Category, Channel, FlowField, GeometryMask, Sample, SignedDistanceField};
pub use grid::{Grid, ScalarField};
pub use metrics::{evaluate_dataset, evaluate_sample, score, GeometrySource, MetricError, ScoreScale};
pub use report::{ChannelMse, MetricReport};

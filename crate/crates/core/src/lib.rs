//! Rigid-deflection estimation from node displacement fields and 6x6
//! compliance identification from multiple load experiments.
//!
//! The usual flow: build or load a [`DisplacementField`] per experiment,
//! estimate its [`RigidDeflection`], pool the experiments into a
//! [`ComplianceMatrix`] with [`pipeline::identify_fields`], then prune,
//! symmetrise and invert.

pub mod beam;
pub mod compliance;
pub mod error;
pub mod estimators;
pub mod field;
pub mod fieldgen;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod statistics;
pub mod study;

pub use beam::{BeamBenchmark, BeamSpec};
pub use compliance::{ComplianceMatrix, Experiment, LoadCase, Stiffness};
pub use error::{Error, ErrorClass, Result};
pub use estimators::{Estimator, EstimatorOutput, SvdVariant};
pub use field::{DisplacementField, Node};
pub use fieldgen::{Axis, GridKind, GridSpec, NoisePreset, NoiseSpec};
pub use geometry::{Matrix3, Matrix6, RigidDeflection, RotationModel, Vector3, Vector6};
pub use pipeline::{Identification, PipelineConfig};
pub use statistics::{DeflectionCovariance, SignificanceConfig};
pub use study::{StudyConfig, StudyKind, StudyReport};

//! Supervised geometry-aware linear mapping for labeled high-dimensional data.
//!
//! The crate learns an orthonormal projection `U` (n×m, `UᵀU = I`) that pulls
//! same-class nearest neighbors together and pushes nearby samples of other
//! classes apart, by minimizing a signed-affinity graph cost with Riemannian
//! conjugate gradient. Around that core sit the pieces needed to evaluate it:
//! dataset ingestion and seeded splitting, four baseline dimensionality
//! reduction methods, a classifier suite, accuracy metrics and an experiment
//! harness that writes CSV reports.
//!
//! Samples are stored column-wise throughout: a feature matrix is `n × p`
//! with one column per sample, so the mapping is the plain product `UᵀX`.

pub mod affinity;
pub mod classifiers;
pub mod data;
pub mod dr;
pub mod error;
pub mod experiments;
pub mod gam;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod stiefel;

pub use error::{Error, ErrorKind, Result};

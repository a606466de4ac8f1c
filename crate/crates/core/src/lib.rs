//! Numerical toolkit for surfaces of prescribed mean curvature in
//! three-dimensional metric Lie groups.

pub mod error;
pub mod fixtures;
pub mod gaussfield;
pub mod io;
pub mod liegroup;
pub mod modelsphere;
pub mod potential;
pub mod qdiff;
pub mod weierstrass;

pub use error::{Error, Result};
pub use gaussfield::{Grid, PrescribedH, TwoChartComplexField};
pub use liegroup::{ConnectionTable, GroupSpec, SemidirectPoint};
pub use modelsphere::{ModelSphere, RotationalProfile};
pub use potential::{Chart, ChartPoint, PotentialEval};
pub use qdiff::{QDiffField, ZeroRecord};
pub use weierstrass::{Backend, SurfaceMesh};

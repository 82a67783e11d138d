//! Mixed virtual elements of order 0, 1 and 2 for `-div(κ∇u) = f` on
//! polygonal meshes, with a residual a posteriori estimator and an
//! adaptive refinement loop.

pub mod adapt;
pub mod basis;
pub mod cases;
pub mod error;
pub mod estimator;
pub mod format;
pub mod geometry;
mod linalg;
pub mod mesh;
pub mod problem;
pub mod solve;
pub mod vem_local;

pub use adapt::{
    mark, rate, run_on_meshes, run_study, AdaptConfig, RefinementMode, Study, StudyRow,
};
pub use cases::{CaseId, MeshKind, TestCase};
pub use error::{Error, Result};
pub use estimator::{compute_indicators, CellIndicators, IndicatorReport};
pub use geometry::Polygon;
pub use mesh::{BoundaryLabel, MarkSet, PolyMesh};
pub use problem::{Dirichlet, Kappa, ProblemData, TangentialDerivative};
pub use solve::{dof_count, error_norms, solve, MixedSolution};

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Mat2 = nalgebra::Matrix2<f64>;

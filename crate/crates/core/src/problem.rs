//! Coefficients, sources and boundary data for `-div(κ∇u) = f`, written in
//! mixed form as `κ⁻¹σ = ∇u`, `div σ = -f`, `u = g` on the Dirichlet part
//! and `σ·ν = 0` on the Neumann part.

use std::sync::Arc;

use crate::{Mat2, Vec2};

pub type ScalarField = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;
pub type TensorField = Arc<dyn Fn(Vec2) -> Mat2 + Send + Sync>;
/// Function of a boundary point and the unit tangent there.
pub type TangentialField = Arc<dyn Fn(Vec2, Vec2) -> f64 + Send + Sync>;

/// Diffusion tensor.
#[derive(Clone)]
pub enum Kappa {
    Constant(Mat2),
    Field(TensorField),
}

impl Kappa {
    pub fn identity() -> Self {
        Kappa::Constant(Mat2::identity())
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Kappa::Constant(_))
    }

    pub fn at(&self, x: Vec2) -> Mat2 {
        match self {
            Kappa::Constant(m) => *m,
            Kappa::Field(f) => f(x),
        }
    }

    pub fn inverse_at(&self, x: Vec2) -> Mat2 {
        self.at(x)
            .try_inverse()
            .unwrap_or_else(|| Mat2::from_element(f64::NAN))
    }
}

impl std::fmt::Debug for Kappa {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Kappa::Constant(m) => write!(f, "Kappa::Constant({:?})", m.as_slice()),
            Kappa::Field(_) => f.write_str("Kappa::Field(..)"),
        }
    }
}

/// How the tangential derivative of the Dirichlet datum is obtained.
#[derive(Clone)]
pub enum TangentialDerivative {
    Exact(TangentialField),
    /// Five-point central differences of `g` along the edge with step
    /// `1e-4·h_e`.
    FiniteDifference,
}

#[derive(Clone)]
pub enum Dirichlet {
    /// `g ≡ 0`.
    Homogeneous,
    Data {
        g: ScalarField,
        dg_ds: Option<TangentialDerivative>,
    },
}

impl Dirichlet {
    pub fn is_homogeneous(&self) -> bool {
        matches!(self, Dirichlet::Homogeneous)
    }

    pub fn value(&self, x: Vec2) -> f64 {
        match self {
            Dirichlet::Homogeneous => 0.0,
            Dirichlet::Data { g, .. } => g(x),
        }
    }
}

/// Analytic fields used for error measurement.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: ScalarField,
    pub grad_u: VectorField,
    pub sigma: VectorField,
    pub div_sigma: ScalarField,
}

#[derive(Clone)]
pub struct ProblemData {
    pub kappa: Kappa,
    pub f: ScalarField,
    pub dirichlet: Dirichlet,
    pub exact: Option<ExactSolution>,
}

impl ProblemData {
    /// Same problem with `f`, `g` and the exact fields multiplied by `c`.
    pub fn scaled(&self, c: f64) -> ProblemData {
        let f = self.f.clone();
        let dirichlet = match &self.dirichlet {
            Dirichlet::Homogeneous => Dirichlet::Homogeneous,
            Dirichlet::Data { g, dg_ds } => {
                let g = g.clone();
                let dg_ds = dg_ds.as_ref().map(|d| match d {
                    TangentialDerivative::Exact(t) => {
                        let t = t.clone();
                        TangentialDerivative::Exact(Arc::new(move |x, s| c * t(x, s)))
                    }
                    TangentialDerivative::FiniteDifference => {
                        TangentialDerivative::FiniteDifference
                    }
                });
                Dirichlet::Data {
                    g: Arc::new(move |x| c * g(x)),
                    dg_ds,
                }
            }
        };
        let exact = self.exact.as_ref().map(|e| {
            let (u, gu, s, d) = (
                e.u.clone(),
                e.grad_u.clone(),
                e.sigma.clone(),
                e.div_sigma.clone(),
            );
            ExactSolution {
                u: Arc::new(move |x| c * u(x)),
                grad_u: Arc::new(move |x| c * gu(x)),
                sigma: Arc::new(move |x| c * s(x)),
                div_sigma: Arc::new(move |x| c * d(x)),
            }
        });
        ProblemData {
            kappa: self.kappa.clone(),
            f: Arc::new(move |x| c * f(x)),
            dirichlet,
            exact,
        }
    }
}

impl std::fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemData")
            .field("kappa", &self.kappa)
            .field("homogeneous_dirichlet", &self.dirichlet.is_homogeneous())
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

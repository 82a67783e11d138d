//! Manufactured problems used by the studies and the patch tests.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::{
    generate_distorted_quad_mesh, generate_hex_mesh, generate_jittered_quad_mesh,
    generate_lshape_mesh, BoundaryLabel, PolyMesh,
};
use crate::problem::{Dirichlet, ExactSolution, Kappa, ProblemData, TangentialDerivative};
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseId {
    Test1,
    Test2,
    Test3,
    /// Polynomial solution of degree `k + 1`.
    Patch(usize),
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseId::Test1 => f.write_str("test1"),
            CaseId::Test2 => f.write_str("test2"),
            CaseId::Test3 => f.write_str("test3"),
            CaseId::Patch(k) => write!(f, "patch-{k}"),
        }
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "test1" => Ok(CaseId::Test1),
            "test2" => Ok(CaseId::Test2),
            "test3" => Ok(CaseId::Test3),
            "patch-0" => Ok(CaseId::Patch(0)),
            "patch-1" => Ok(CaseId::Patch(1)),
            "patch-2" => Ok(CaseId::Patch(2)),
            other => Err(Error::InvalidConfig(format!(
                "unknown case '{other}' (expected test1, test2, test3, patch-0, patch-1 or patch-2)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    UnitSquare,
    /// `(-1,1)² ∖ [0,1]²`.
    LShape,
}

impl Domain {
    pub fn contains(self, x: Vec2) -> bool {
        match self {
            Domain::UnitSquare => x.x > 0.0 && x.x < 1.0 && x.y > 0.0 && x.y < 1.0,
            Domain::LShape => {
                x.x > -1.0 && x.x < 1.0 && x.y > -1.0 && x.y < 1.0 && !(x.x >= 0.0 && x.y >= 0.0)
            }
        }
    }

    pub fn area(self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::LShape => 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshKind {
    Hex,
    DistortedQuad,
    LShape,
}

impl FromStr for MeshKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hex" => Ok(MeshKind::Hex),
            "dquad" => Ok(MeshKind::DistortedQuad),
            "lshape" => Ok(MeshKind::LShape),
            other => Err(Error::InvalidConfig(format!(
                "unknown mesh '{other}' (expected hex, dquad or lshape)"
            ))),
        }
    }
}

impl fmt::Display for MeshKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeshKind::Hex => "hex",
            MeshKind::DistortedQuad => "dquad",
            MeshKind::LShape => "lshape",
        })
    }
}

/// Scalar field with gradient and Laplacian.
struct Manufactured {
    u: fn(Vec2) -> f64,
    grad: fn(Vec2) -> Vec2,
    laplacian: fn(Vec2) -> f64,
}

fn test1() -> Manufactured {
    Manufactured {
        u: |x| (PI * x.x).cos() * (PI * x.y).cos(),
        grad: |x| {
            Vec2::new(
                -PI * (PI * x.x).sin() * (PI * x.y).cos(),
                -PI * (PI * x.x).cos() * (PI * x.y).sin(),
            )
        },
        laplacian: |x| -2.0 * PI * PI * (PI * x.x).cos() * (PI * x.y).cos(),
    }
}

fn test2() -> Manufactured {
    fn parts(x: Vec2) -> (f64, f64, f64, f64, f64) {
        let a = (x.x - 1.0).powi(2);
        let b = (x.y - 1.0).powi(2);
        let p = 1.0 / (x.x + 0.1);
        let q = 1.0 / (1.0 + x.y);
        (a, b, p, q, p + q)
    }
    Manufactured {
        u: |x| {
            let (a, b, _, _, c) = parts(x);
            a * b * c
        },
        grad: |x| {
            let (a, b, p, q, c) = parts(x);
            Vec2::new(
                2.0 * (x.x - 1.0) * b * c - a * b * p * p,
                2.0 * (x.y - 1.0) * a * c - a * b * q * q,
            )
        },
        laplacian: |x| {
            let (a, b, p, q, c) = parts(x);
            let uxx = 2.0 * b * c - 4.0 * (x.x - 1.0) * b * p * p + 2.0 * a * b * p.powi(3);
            let uyy = 2.0 * a * c - 4.0 * (x.y - 1.0) * a * q * q + 2.0 * a * b * q.powi(3);
            uxx + uyy
        },
    }
}

fn test3() -> Manufactured {
    const C: f64 = 0.1;
    Manufactured {
        u: |x| (x.x + 1.0).powi(2) * (x.y + 1.0).powi(2) / (x - Vec2::new(C, C)).norm(),
        grad: |x| {
            let d = x - Vec2::new(C, C);
            let r = d.norm();
            let f = (x.x + 1.0).powi(2) * (x.y + 1.0).powi(2);
            let gf = Vec2::new(
                2.0 * (x.x + 1.0) * (x.y + 1.0).powi(2),
                2.0 * (x.x + 1.0).powi(2) * (x.y + 1.0),
            );
            gf / r - d * (f / r.powi(3))
        },
        laplacian: |x| {
            let d = x - Vec2::new(C, C);
            let r = d.norm();
            let f = (x.x + 1.0).powi(2) * (x.y + 1.0).powi(2);
            let gf = Vec2::new(
                2.0 * (x.x + 1.0) * (x.y + 1.0).powi(2),
                2.0 * (x.x + 1.0).powi(2) * (x.y + 1.0),
            );
            let lf = 2.0 * (x.y + 1.0).powi(2) + 2.0 * (x.x + 1.0).powi(2);
            // Δ(1/r) = 1/r³ in two dimensions
            lf / r - 2.0 * gf.dot(&d) / r.powi(3) + f / r.powi(3)
        },
    }
}

fn patch(k: usize) -> Manufactured {
    match k {
        0 => Manufactured {
            u: |x| x.y,
            grad: |_| Vec2::new(0.0, 1.0),
            laplacian: |_| 0.0,
        },
        1 => Manufactured {
            u: |x| x.x * (2.0 - x.x) + x.y,
            grad: |x| Vec2::new(2.0 - 2.0 * x.x, 1.0),
            laplacian: |_| -2.0,
        },
        _ => Manufactured {
            u: |x| 3.0 * x.x * x.x - 2.0 * x.x.powi(3) + x.y.powi(3) + x.y * (x.x - 1.0).powi(2),
            grad: |x| {
                Vec2::new(
                    6.0 * x.x - 6.0 * x.x * x.x + 2.0 * x.y * (x.x - 1.0),
                    3.0 * x.y * x.y + (x.x - 1.0).powi(2),
                )
            },
            laplacian: |x| 6.0 - 12.0 * x.x + 2.0 * x.y + 6.0 * x.y,
        },
    }
}

fn square_labels(a: Vec2, b: Vec2) -> BoundaryLabel {
    let m = (a + b) * 0.5;
    if m.y.abs() < 1e-12 || m.x.abs() < 1e-12 {
        BoundaryLabel::Dirichlet
    } else {
        BoundaryLabel::Neumann
    }
}

fn lshape_labels(a: Vec2, b: Vec2) -> BoundaryLabel {
    let m = (a + b) * 0.5;
    if (m.x + 1.0).abs() < 1e-12 || (m.y + 1.0).abs() < 1e-12 {
        BoundaryLabel::Neumann
    } else {
        BoundaryLabel::Dirichlet
    }
}

fn patch_labels(a: Vec2, b: Vec2) -> BoundaryLabel {
    if ((a.x + b.x) * 0.5 - 1.0).abs() < 1e-12 {
        BoundaryLabel::Neumann
    } else {
        BoundaryLabel::Dirichlet
    }
}

/// A manufactured problem: data, exact fields, domain and boundary labels.
#[derive(Clone)]
pub struct TestCase {
    pub id: CaseId,
    pub domain: Domain,
    pub data: ProblemData,
    pub labels: fn(Vec2, Vec2) -> BoundaryLabel,
}

impl fmt::Debug for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestCase")
            .field("id", &self.id)
            .field("domain", &self.domain)
            .finish()
    }
}

impl TestCase {
    pub fn new(id: CaseId) -> Self {
        let (m, domain, labels): (Manufactured, Domain, fn(Vec2, Vec2) -> BoundaryLabel) = match id
        {
            CaseId::Test1 => (test1(), Domain::UnitSquare, square_labels),
            CaseId::Test2 => (test2(), Domain::UnitSquare, square_labels),
            CaseId::Test3 => (test3(), Domain::LShape, lshape_labels),
            CaseId::Patch(k) => (patch(k), Domain::UnitSquare, patch_labels),
        };
        let Manufactured { u, grad, laplacian } = m;
        let exact = ExactSolution {
            u: Arc::new(u),
            grad_u: Arc::new(grad),
            sigma: Arc::new(grad),
            div_sigma: Arc::new(laplacian),
        };
        let data = ProblemData {
            kappa: Kappa::identity(),
            f: Arc::new(move |x| -laplacian(x)),
            dirichlet: Dirichlet::Data {
                g: Arc::new(u),
                dg_ds: Some(TangentialDerivative::Exact(Arc::new(move |x, s| {
                    grad(x).dot(&s)
                }))),
            },
            exact: Some(exact),
        };
        TestCase {
            id,
            domain,
            data,
            labels,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(Self::new(s.parse()?))
    }

    pub fn exact(&self) -> &ExactSolution {
        self.data
            .exact
            .as_ref()
            .expect("manufactured cases carry exact fields")
    }

    /// Default generator for this case.
    pub fn default_mesh(&self) -> MeshKind {
        match self.domain {
            Domain::UnitSquare => MeshKind::Hex,
            Domain::LShape => MeshKind::LShape,
        }
    }

    /// Initial mesh with this case's boundary labels. A seed perturbs the
    /// interior vertices of the quadrilateral generator at random.
    pub fn mesh(&self, kind: MeshKind, n: usize, seed: Option<u64>) -> Result<PolyMesh> {
        let mesh = match (kind, self.domain) {
            (MeshKind::Hex, Domain::UnitSquare) => generate_hex_mesh(n),
            (MeshKind::DistortedQuad, Domain::UnitSquare) => match seed {
                Some(s) => generate_jittered_quad_mesh(n, s),
                None => generate_distorted_quad_mesh(n),
            },
            (MeshKind::LShape, Domain::LShape) => generate_lshape_mesh(n + n % 2),
            (kind, _) => {
                return Err(Error::InvalidConfig(format!(
                    "mesh '{kind}' does not cover the domain of {}",
                    self.id
                )))
            }
        };
        Ok(mesh.relabeled(self.labels))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedReport {
    pub interior_points: usize,
    pub neumann_points: usize,
    pub max_pde_defect: f64,
    pub max_flux_defect: f64,
    pub max_neumann_flux: f64,
}

const FD_TOLERANCE: f64 = 1e-5;
const NEUMANN_TOLERANCE: f64 = 1e-10;

/// Checks `-div(κ∇u) = f` and `σ = κ∇u` by central differences at 1000
/// interior points and `σ·ν = 0` at 100 Neumann points.
pub fn verify_manufactured(case: &TestCase) -> Result<ManufacturedReport> {
    let exact = case.exact();
    let kappa = &case.data.kappa;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (lo, hi) = match case.domain {
        Domain::UnitSquare => (0.0, 1.0),
        Domain::LShape => (-1.0, 1.0),
    };
    let flux = |x: Vec2| kappa.at(x) * (exact.grad_u)(x);
    let h = 1e-5;
    let ex = Vec2::new(h, 0.0);
    let ey = Vec2::new(0.0, h);
    let mut report = ManufacturedReport {
        interior_points: 0,
        neumann_points: 0,
        max_pde_defect: 0.0,
        max_flux_defect: 0.0,
        max_neumann_flux: 0.0,
    };
    while report.interior_points < 1000 {
        let x = Vec2::new(rng.random_range(lo..hi), rng.random_range(lo..hi));
        if !case.domain.contains(x)
            || !case.domain.contains(x + ex + ey)
            || !case.domain.contains(x - ex - ey)
        {
            continue;
        }
        report.interior_points += 1;
        let div = (flux(x + ex).x - flux(x - ex).x + flux(x + ey).y - flux(x - ey).y) / (2.0 * h);
        let f = (case.data.f)(x);
        let pde = (-div - f).abs() / f.abs().max(1.0);
        let du = Vec2::new(
            ((exact.u)(x + ex) - (exact.u)(x - ex)) / (2.0 * h),
            ((exact.u)(x + ey) - (exact.u)(x - ey)) / (2.0 * h),
        );
        let sigma = (exact.sigma)(x);
        let fl = (kappa.at(x) * du - sigma).norm() / sigma.norm().max(1.0);
        let dv = ((exact.div_sigma)(x) + f).abs() / f.abs().max(1.0);
        report.max_pde_defect = report.max_pde_defect.max(pde).max(dv);
        report.max_flux_defect = report.max_flux_defect.max(fl);
        if pde > FD_TOLERANCE || dv > FD_TOLERANCE {
            return Err(Error::ManufacturedMismatch(format!(
                "-div(κ∇u) = f fails at ({}, {}): relative defect {:e}",
                x.x,
                x.y,
                pde.max(dv)
            )));
        }
        if fl > FD_TOLERANCE {
            return Err(Error::ManufacturedMismatch(format!(
                "σ = κ∇u fails at ({}, {}): relative defect {fl:e}",
                x.x, x.y
            )));
        }
    }
    // Neumann sides with their outward normals
    let sides: Vec<(Vec2, Vec2, Vec2)> = match case.id {
        CaseId::Test1 | CaseId::Test2 => vec![
            (
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(1.0, 0.0),
            ),
            (
                Vec2::new(0.0, 1.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(0.0, 1.0),
            ),
        ],
        CaseId::Test3 => vec![
            (
                Vec2::new(-1.0, -1.0),
                Vec2::new(-1.0, 1.0),
                Vec2::new(-1.0, 0.0),
            ),
            (
                Vec2::new(-1.0, -1.0),
                Vec2::new(1.0, -1.0),
                Vec2::new(0.0, -1.0),
            ),
        ],
        CaseId::Patch(_) => vec![(
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
        )],
    };
    let per_side = 100 / sides.len();
    for (a, b, n) in &sides {
        for i in 0..per_side {
            let t = (i as f64 + 0.5) / per_side as f64;
            let x = a + (b - a) * t;
            let v = (exact.sigma)(x).dot(n).abs();
            report.neumann_points += 1;
            report.max_neumann_flux = report.max_neumann_flux.max(v);
            if v > NEUMANN_TOLERANCE {
                return Err(Error::ManufacturedMismatch(format!(
                    "σ·ν = 0 fails on the Neumann boundary at ({}, {}): {v:e}",
                    x.x, x.y
                )));
            }
        }
    }
    Ok(report)
}

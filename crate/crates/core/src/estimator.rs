//! Residual a posteriori indicators built from `σ_h`, `σ̂_h`, `σ*_h` and
//! `u_h`.

use std::fmt::Write as _;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::basis::{l2_project_with, EdgeBasis, ScaledMonomials};
use crate::error::{Error, Result};
use crate::format::sci;
use crate::geometry::{edge_quadrature, polygon_quadrature};
use crate::linalg::SpdFactor;
use crate::mesh::{BoundaryLabel, PolyMesh};
use crate::problem::{Dirichlet, Kappa, ProblemData, TangentialDerivative};
use crate::solve::{error_quadrature_degree, MixedSolution};
use crate::{Mat2, Vec2};

/// Piecewise `P_k` approximation of `κ⁻¹`.
#[derive(Debug, Clone)]
pub enum KappaH {
    /// Exact inverse of a constant tensor.
    Constant(Mat2),
    /// Per cell, coefficients of the entries `(0,0), (0,1), (1,0), (1,1)`.
    PerCell {
        bases: Vec<ScaledMonomials>,
        coeffs: Vec<[Vec<f64>; 4]>,
    },
}

impl KappaH {
    pub fn at(&self, c: usize, x: Vec2) -> Mat2 {
        match self {
            KappaH::Constant(m) => *m,
            KappaH::PerCell { bases, coeffs } => {
                let v = bases[c].eval(x);
                let e = |i: usize| coeffs[c][i].iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
                Mat2::new(e(0), e(1), e(2), e(3))
            }
        }
    }

    /// Gradients of the four entries, same order as the coefficients.
    fn entry_gradients(&self, c: usize, x: Vec2) -> [Vec2; 4] {
        match self {
            KappaH::Constant(_) => [Vec2::zeros(); 4],
            KappaH::PerCell { bases, coeffs } => {
                std::array::from_fn(|i| bases[c].gradient(&coeffs[c][i], x))
            }
        }
    }
}

/// Extra quadrature degree for projecting non-polynomial `κ⁻¹`.
const KAPPA_QUADRATURE_EXTRA: usize = 8;

/// Component-wise L² projection of `κ⁻¹` onto `P_k` on every cell.
pub fn build_kappa_h(mesh: &PolyMesh, k: usize, kappa: &Kappa) -> Result<KappaH> {
    match kappa {
        Kappa::Constant(m) => {
            Ok(KappaH::Constant(m.try_inverse().ok_or_else(|| {
                Error::InvalidConfig("κ is singular".into())
            })?))
        }
        Kappa::Field(_) => {
            let per_cell: Vec<(ScaledMonomials, [Vec<f64>; 4])> = (0..mesh.n_cells())
                .into_par_iter()
                .map(|c| {
                    let poly = mesh.polygon(c);
                    let basis = ScaledMonomials::on(poly, k);
                    let quad = polygon_quadrature(
                        poly,
                        KAPPA_QUADRATURE_EXTRA + error_quadrature_degree(k),
                    )?;
                    let mut out: [Vec<f64>; 4] = Default::default();
                    for (i, slot) in out.iter_mut().enumerate() {
                        *slot = l2_project_with(&basis, &quad, |x| {
                            kappa.inverse_at(x)[(i / 2, i % 2)]
                        })?;
                    }
                    Ok((basis, out))
                })
                .collect::<Result<_>>()?;
            let (bases, coeffs) = per_cell.into_iter().unzip();
            Ok(KappaH::PerCell { bases, coeffs })
        }
    }
}

/// Tangential jump of a field across an edge, as a polynomial in the edge
/// coordinate running from `a` to `b`.
#[derive(Debug, Clone)]
pub struct EdgeJump {
    pub basis: EdgeBasis,
    pub coeffs: Vec<f64>,
    /// `L²(e)` norm of the jump.
    pub norm: f64,
}

/// `[[ζ·s]] = (ζ_left − ζ_right)·s` on the segment `a`–`b` with
/// `s = (b − a)/|b − a|`, projected onto polynomials of `degree`.
pub fn tangential_jump(
    a: Vec2,
    b: Vec2,
    left: impl Fn(Vec2) -> Vec2,
    right: impl Fn(Vec2) -> Vec2,
    degree: usize,
) -> Result<EdgeJump> {
    let basis = EdgeBasis::new(a, b, degree);
    let s = basis.tangent;
    let quad = edge_quadrature(a, b, 2 * degree + 1);
    let n = basis.len();
    let mut mass = nalgebra::DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for (&x, &w) in quad.points.iter().zip(&quad.weights) {
        let q = basis.eval(x);
        let j = (left(x) - right(x)).dot(&s);
        for i in 0..n {
            rhs[i] += w * j * q[i];
            for l in 0..n {
                mass[(i, l)] += w * q[i] * q[l];
            }
        }
    }
    let coeffs = SpdFactor::new(&mass, "edge mass matrix")?.solve_vec(&rhs);
    let norm = (coeffs.transpose() * &mass * &coeffs)[0].max(0.0).sqrt();
    Ok(EdgeJump {
        basis,
        coeffs: coeffs.iter().copied().collect(),
        norm,
    })
}

/// Local indicator terms of one cell.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CellIndicators {
    pub phi: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub upsilon: f64,
    pub psi1: f64,
    pub psi2: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl CellIndicators {
    pub const NAMES: [&'static str; 11] = [
        "Phi", "Lambda1", "Lambda2", "Upsilon", "Psi1", "Psi2", "eta1", "eta2", "theta1", "theta2",
        "theta3",
    ];

    pub fn terms(&self) -> [f64; 11] {
        [
            self.phi,
            self.lambda1,
            self.lambda2,
            self.upsilon,
            self.psi1,
            self.psi2,
            self.eta1,
            self.eta2,
            self.theta1,
            self.theta2,
            self.theta3,
        ]
    }

    /// `Θ_K`.
    pub fn total(&self) -> f64 {
        self.terms().iter().map(|t| t * t).sum::<f64>().sqrt()
    }
}

/// Global aggregates of the indicator groups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermTotals {
    pub phi: f64,
    pub eta: f64,
    pub theta: f64,
    pub psi: f64,
    pub lambda: f64,
    pub upsilon: f64,
}

impl TermTotals {
    pub const NAMES: [&'static str; 6] = ["Phi", "eta", "theta", "Psi", "Lambda", "Upsilon"];

    pub fn values(&self) -> [f64; 6] {
        [
            self.phi,
            self.eta,
            self.theta,
            self.psi,
            self.lambda,
            self.upsilon,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct IndicatorReport {
    pub cells: Vec<CellIndicators>,
    pub barycenters: Vec<Vec2>,
    /// `Θ = (Σ_K Θ_K²)^{1/2}`.
    pub theta: f64,
    /// Set when `dg/ds` was approximated by finite differences.
    pub tangential_by_differences: bool,
}

impl IndicatorReport {
    pub fn theta_k(&self) -> Vec<f64> {
        self.cells.iter().map(CellIndicators::total).collect()
    }

    pub fn totals(&self) -> TermTotals {
        let sum = |f: &dyn Fn(&CellIndicators) -> f64| {
            self.cells.iter().map(|c| f(c).powi(2)).sum::<f64>().sqrt()
        };
        TermTotals {
            phi: sum(&|c| c.phi),
            eta: sum(&|c| c.eta1.hypot(c.eta2)),
            theta: sum(&|c| (c.theta1.powi(2) + c.theta2.powi(2) + c.theta3.powi(2)).sqrt()),
            psi: sum(&|c| c.psi1.hypot(c.psi2)),
            lambda: sum(&|c| c.lambda1.hypot(c.lambda2)),
            upsilon: sum(&|c| c.upsilon),
        }
    }

    /// One row per cell: index, barycentre, every term, then `Θ_K`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell,cx,cy");
        for n in CellIndicators::NAMES {
            out.push(',');
            out.push_str(n);
        }
        out.push_str(",ThetaK\n");
        for (c, (ind, b)) in self.cells.iter().zip(&self.barycenters).enumerate() {
            write!(out, "{c},{},{}", sci(b.x), sci(b.y)).unwrap();
            for t in ind.terms() {
                write!(out, ",{}", sci(t)).unwrap();
            }
            writeln!(out, ",{}", sci(ind.total())).unwrap();
        }
        out
    }
}

/// Rotation of `A σ` with `A` the cell's `κ_h` and `σ = σ*_h`.
fn rot_kappa_sigma(kh: &KappaH, sol: &MixedSolution, c: usize, x: Vec2) -> f64 {
    let up = sol.elements[c].scalar.with_degree(sol.k + 1);
    let s = &sol.cells[c].sigma_star;
    let n = up.len();
    let v = up.eval(x);
    let g = up.eval_grad(x);
    let (mut s1, mut s2) = (0.0, 0.0);
    let (mut d1, mut d2) = (Vec2::zeros(), Vec2::zeros());
    for a in 0..n {
        s1 += s[a] * v[a];
        s2 += s[n + a] * v[a];
        d1 += g[a] * s[a];
        d2 += g[a] * s[n + a];
    }
    let m = kh.at(c, x);
    let dm = kh.entry_gradients(c, x);
    // (Aσ)_1 = a00 σ1 + a01 σ2, (Aσ)_2 = a10 σ1 + a11 σ2
    let dx_second = dm[2].x * s1 + m[(1, 0)] * d1.x + dm[3].x * s2 + m[(1, 1)] * d2.x;
    let dy_first = dm[0].y * s1 + m[(0, 0)] * d1.y + dm[1].y * s2 + m[(0, 1)] * d2.y;
    dx_second - dy_first
}

fn tangential_derivative(
    d: &TangentialDerivative,
    g: &(dyn Fn(Vec2) -> f64 + Send + Sync),
    x: Vec2,
    s: Vec2,
    h_e: f64,
) -> f64 {
    match d {
        TangentialDerivative::Exact(f) => f(x, s),
        TangentialDerivative::FiniteDifference => {
            let h = 1e-4 * h_e;
            (-g(x + s * (2.0 * h)) + 8.0 * g(x + s * h) - 8.0 * g(x - s * h) + g(x - s * (2.0 * h)))
                / (12.0 * h)
        }
    }
}

/// Per-edge contribution: first cell, squared jump or θ₃ term, squared η₂
/// term, and the second cell of an interior edge.
type EdgeTerms = (usize, f64, f64, Option<usize>);

/// All indicator terms on every cell.
pub fn compute_indicators(
    mesh: &PolyMesh,
    sol: &MixedSolution,
    data: &ProblemData,
) -> Result<IndicatorReport> {
    let k = sol.k;
    let has_dirichlet = mesh.count_label(BoundaryLabel::Dirichlet) > 0;
    let tangential = match &data.dirichlet {
        Dirichlet::Data { dg_ds: None, .. } if has_dirichlet => {
            return Err(Error::MissingTangentialData)
        }
        Dirichlet::Data { dg_ds, .. } => dg_ds.clone(),
        Dirichlet::Homogeneous => None,
    };
    let kh = build_kappa_h(mesh, k, &data.kappa)?;
    let kappa_sigma = |c: usize, x: Vec2| kh.at(c, x) * sol.sigma_star_at(c, x);

    let mut cells: Vec<CellIndicators> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let el = &sol.elements[c];
            let cs = &sol.cells[c];
            let quad = polygon_quadrature(&el.polygon, error_quadrature_degree(k))?;
            let h = el.polygon.diameter();
            let mut ind = CellIndicators::default();
            let mut acc = [0.0f64; 6];
            for (&x, &w) in quad.points.iter().zip(&quad.weights) {
                let div_h = el.scalar.value(&cs.div, x);
                let star = sol.sigma_star_at(c, x);
                acc[0] += w * ((data.f)(x) + div_h).powi(2);
                acc[1] += w * (sol.sigma_hat_at(c, x) - star).norm_squared();
                acc[2] += w * (div_h - sol.div_star_at(c, x)).powi(2);
                if !data.kappa.is_constant() {
                    acc[3] += w * ((data.kappa.inverse_at(x) - kh.at(c, x)) * star).norm_squared();
                }
                acc[4] += w * (kh.at(c, x) * star - el.scalar.gradient(&cs.u, x)).norm_squared();
                acc[5] += w * rot_kappa_sigma(&kh, sol, c, x).powi(2);
            }
            ind.phi = acc[0].sqrt();
            ind.lambda1 = acc[1].sqrt();
            ind.lambda2 = acc[2].sqrt();
            ind.upsilon = acc[3].sqrt();
            ind.eta1 = h * acc[4].sqrt();
            ind.theta1 = h * acc[5].sqrt();

            let ops = &sol.operators[c];
            let r = ops.dof_residual(&cs.flux_dofs);
            ind.psi1 = (r.transpose() * &ops.stabilization * &r)[0].max(0.0).sqrt();
            if !data.kappa.is_constant() {
                let v = |x: Vec2| data.kappa.inverse_at(x) * sol.sigma_hat_at(c, x);
                let px = l2_project_with(&el.scalar, &quad, |x| v(x).x)?;
                let py = l2_project_with(&el.scalar, &quad, |x| v(x).y)?;
                let e = quad.integrate(|x| {
                    (v(x) - Vec2::new(el.scalar.value(&px, x), el.scalar.value(&py, x)))
                        .norm_squared()
                });
                ind.psi2 = e.max(0.0).sqrt();
            }
            Ok(ind)
        })
        .collect::<Result<_>>()?;

    // edge terms: computed once per edge, scattered in edge order
    let jump_degree = 2 * k + 1;
    let edge_terms: Vec<Option<EdgeTerms>> = mesh
        .edges()
        .par_iter()
        .map(|edge| -> Result<_> {
            let [i, j] = edge.vertices;
            let (a, b) = (mesh.vertices()[i], mesh.vertices()[j]);
            let h_e = (b - a).norm();
            match (edge.sides.as_slice(), edge.label) {
                ([l, r], _) => {
                    let jump = tangential_jump(
                        a,
                        b,
                        |x| kappa_sigma(l.cell, x),
                        |x| kappa_sigma(r.cell, x),
                        jump_degree,
                    )?;
                    Ok(Some((l.cell, h_e * jump.norm.powi(2), 0.0, Some(r.cell))))
                }
                ([side], Some(BoundaryLabel::Dirichlet)) => {
                    let c = side.cell;
                    let el = &sol.elements[c];
                    let le = &el.edges[side.local];
                    let s = le.tangent();
                    let quad = edge_quadrature(le.start, le.end, 2 * jump_degree + 1);
                    let (mut t3, mut e2) = (0.0, 0.0);
                    for (&x, &w) in quad.points.iter().zip(&quad.weights) {
                        let (gv, dg) = match (&data.dirichlet, &tangential) {
                            (Dirichlet::Data { g, .. }, Some(d)) => {
                                (g(x), tangential_derivative(d, &**g, x, s, h_e))
                            }
                            _ => (0.0, 0.0),
                        };
                        t3 += w * (kappa_sigma(c, x).dot(&s) - dg).powi(2);
                        e2 += w * (sol.u_at(c, x) - gv).powi(2);
                    }
                    let e2 = if data.dirichlet.is_homogeneous() {
                        0.0
                    } else {
                        h_e * e2
                    };
                    Ok(Some((c, h_e * t3, e2, None)))
                }
                _ => Ok(None),
            }
        })
        .collect::<Result<_>>()?;
    let mut t2 = vec![0.0; mesh.n_cells()];
    let mut t3 = vec![0.0; mesh.n_cells()];
    let mut e2 = vec![0.0; mesh.n_cells()];
    for (c, a, b, other) in edge_terms.into_iter().flatten() {
        match other {
            Some(r) => {
                t2[c] += a;
                t2[r] += a;
            }
            None => {
                t3[c] += a;
                e2[c] += b;
            }
        }
    }
    for (c, ind) in cells.iter_mut().enumerate() {
        ind.theta2 = t2[c].sqrt();
        ind.theta3 = t3[c].sqrt();
        ind.eta2 = e2[c].sqrt();
    }
    let theta = cells.iter().map(|c| c.total().powi(2)).sum::<f64>().sqrt();
    Ok(IndicatorReport {
        barycenters: mesh.polygons().iter().map(|p| p.centroid()).collect(),
        cells,
        theta,
        tangential_by_differences: matches!(
            tangential,
            Some(TangentialDerivative::FiniteDifference)
        ),
    })
}

//! Element-level mixed VEM operators.
//!
//! Local degrees of freedom of `τ` on a cell `K` with `n` edges, in order:
//! - `∫_e q_j τ·ν` for each edge and `j = 0..=k` (outward normal),
//! - `∫_K τ·∇m_α` for `m_α ∈ B_k(K)` without the constant,
//! - `∫_K τ·η` for each member of the G⊥ basis.
//!
//! Everything else (divergence, Π⁰_k, the stabilized form) is computed from
//! these numbers alone.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::basis::{
    cell_quadrature_degree, edge_quadrature_degree, gradient_columns, poly_dim, EdgeBasis,
    GPerpBasis, ScaledMonomials, VectorPolyBasis,
};
use crate::error::{Error, Result};
use crate::geometry::{edge_quadrature, polygon_quadrature, Polygon, QuadratureRule};
use crate::linalg::{symmetrize, SpdFactor};
use crate::problem::Kappa;
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofLayout {
    pub n_edges: usize,
    pub k: usize,
}

impl DofLayout {
    pub fn new(n_edges: usize, k: usize) -> Self {
        DofLayout { n_edges, k }
    }

    pub fn per_edge(&self) -> usize {
        self.k + 1
    }

    pub fn n_grad(&self) -> usize {
        poly_dim(self.k) - 1
    }

    pub fn n_gperp(&self) -> usize {
        self.k * (self.k + 1) / 2
    }

    pub fn n_interior(&self) -> usize {
        self.n_grad() + self.n_gperp()
    }

    pub fn edge_range(&self, i: usize) -> Range<usize> {
        i * self.per_edge()..(i + 1) * self.per_edge()
    }

    pub fn grad_range(&self) -> Range<usize> {
        let s = self.n_edges * self.per_edge();
        s..s + self.n_grad()
    }

    pub fn gperp_range(&self) -> Range<usize> {
        let s = self.grad_range().end;
        s..s + self.n_gperp()
    }

    pub fn len(&self) -> usize {
        self.n_edges * self.per_edge() + self.n_interior()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One edge of a cell, in counter-clockwise order.
#[derive(Debug, Clone)]
pub struct LocalEdge {
    pub start: Vec2,
    pub end: Vec2,
    pub normal: Vec2,
    pub length: f64,
    /// Moment basis; may be parametrized against the traversal direction.
    pub basis: EdgeBasis,
    pub quad: QuadratureRule,
}

impl LocalEdge {
    /// Unit tangent with the cell on the left.
    pub fn tangent(&self) -> Vec2 {
        (self.end - self.start) / self.length
    }
}

/// A cell together with its bases and quadrature rules.
#[derive(Debug, Clone)]
pub struct LocalElement {
    pub k: usize,
    pub polygon: Polygon,
    /// `B_k(K)`; higher degrees reuse centre and scale.
    pub scalar: ScaledMonomials,
    pub quad: QuadratureRule,
    pub edges: Vec<LocalEdge>,
    pub gperp: GPerpBasis,
}

impl LocalElement {
    pub fn new(polygon: Polygon, k: usize) -> Result<Self> {
        let reversed = vec![false; polygon.len()];
        Self::with_orientation(polygon, k, &reversed)
    }

    /// `reversed[i]` parametrizes the moments of edge `i` from its end
    /// vertex towards its start vertex.
    pub fn with_orientation(polygon: Polygon, k: usize, reversed: &[bool]) -> Result<Self> {
        Self::with_quadrature(
            polygon,
            k,
            reversed,
            cell_quadrature_degree(k),
            edge_quadrature_degree(k),
        )
    }

    /// Explicit quadrature exactness on the cell and on its edges. Degrees
    /// below the defaults make the polynomial identities inexact.
    pub fn with_quadrature(
        polygon: Polygon,
        k: usize,
        reversed: &[bool],
        cell_degree: usize,
        edge_degree: usize,
    ) -> Result<Self> {
        let scalar = ScaledMonomials::on(&polygon, k);
        let quad = polygon_quadrature(&polygon, cell_degree)?;
        let edges = (0..polygon.len())
            .map(|i| {
                let (a, b) = polygon.edge(i);
                let basis = if reversed[i] {
                    EdgeBasis::new(b, a, k)
                } else {
                    EdgeBasis::new(a, b, k)
                };
                LocalEdge {
                    start: a,
                    end: b,
                    normal: polygon.outward_normal(i),
                    length: (b - a).norm(),
                    basis,
                    quad: edge_quadrature(a, b, edge_degree),
                }
            })
            .collect();
        let gperp = GPerpBasis::build(&scalar, &quad)?;
        Ok(LocalElement {
            k,
            polygon,
            scalar,
            quad,
            edges,
            gperp,
        })
    }

    pub fn layout(&self) -> DofLayout {
        DofLayout::new(self.edges.len(), self.k)
    }

    pub fn vector_basis(&self) -> VectorPolyBasis {
        VectorPolyBasis::new(self.scalar.clone())
    }

    /// Value of the `j`-th G⊥ member at `x`.
    pub fn gperp_value(&self, j: usize, x: Vec2) -> Vec2 {
        self.vector_basis().value(&self.gperp.members[j], x)
    }
}

/// Interpolation DOFs of an analytic vector field.
pub fn dofs_of_field(el: &LocalElement, tau: impl Fn(Vec2) -> Vec2) -> DVector<f64> {
    let layout = el.layout();
    let mut out = DVector::zeros(layout.len());
    for (i, e) in el.edges.iter().enumerate() {
        let r = layout.edge_range(i);
        for (&x, &w) in e.quad.points.iter().zip(&e.quad.weights) {
            let tn = tau(x).dot(&e.normal);
            for (j, q) in e.basis.eval(x).into_iter().enumerate() {
                out[r.start + j] += w * q * tn;
            }
        }
    }
    let gr = layout.grad_range();
    let gp = layout.gperp_range();
    let nk = el.scalar.len();
    let mut grads = vec![Vec2::zeros(); nk];
    let mut vals = vec![0.0; nk];
    // ∫ τ·(m_a e_x) and ∫ τ·(m_a e_y), contracted with G⊥ members below
    let mut moments = vec![0.0; 2 * nk];
    for (&x, &w) in el.quad.points.iter().zip(&el.quad.weights) {
        let t = tau(x) * w;
        el.scalar.eval_grad_into(x, &mut grads);
        for l in 1..nk {
            out[gr.start + l - 1] += t.dot(&grads[l]);
        }
        if !el.gperp.is_empty() {
            el.scalar.eval_into(x, &mut vals);
            for (a, v) in vals.iter().enumerate() {
                moments[a] += t.x * v;
                moments[nk + a] += t.y * v;
            }
        }
    }
    for (j, eta) in el.gperp.members.iter().enumerate() {
        out[gp.start + j] = eta.iter().zip(&moments).map(|(c, m)| c * m).sum();
    }
    out
}

/// Matrices that depend on the cell only.
#[derive(Debug, Clone)]
pub struct Projectors {
    /// `P_k` mass matrix.
    pub scalar_mass: DMatrix<f64>,
    /// `[P_k]²` mass matrix.
    pub vector_mass: DMatrix<f64>,
    /// Rows `∫_K m_α div τ`.
    pub div_pairing: DMatrix<f64>,
    /// DOFs → `P_k` coefficients of `div τ`.
    pub div: DMatrix<f64>,
    /// DOFs → `[P_k]²` coefficients of `Π⁰_k τ`.
    pub pi0: DMatrix<f64>,
    /// `[P_k]²` coefficients → DOFs.
    pub dofs_of_poly: DMatrix<f64>,
}

fn weighted_product(a: &DMatrix<f64>, w: &[f64], b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut wb = b.clone();
    for (i, wi) in w.iter().enumerate() {
        wb.row_mut(i).scale_mut(*wi);
    }
    a.transpose() * wb
}

impl Projectors {
    pub fn new(el: &LocalElement) -> Result<Self> {
        let k = el.k;
        let layout = el.layout();
        let ndof = layout.len();
        let nk = poly_dim(k);
        let up = el.scalar.with_degree(k + 1);
        let nk1 = up.len();
        let w = &el.quad.weights;

        let v1 = up.eval_table(&el.quad.points);
        let vk = v1.columns(0, nk).into_owned();
        let (gx, gy) = el.scalar.eval_grad_table(&el.quad.points);
        let scalar_mass = weighted_product(&vk, w, &vk);
        let cross_mass = weighted_product(&v1, w, &vk);
        let vector_mass = el.vector_basis().mass_matrix(&el.quad);
        let mass_fac = SpdFactor::new(&scalar_mass, "scalar mass matrix")?;
        let vmass_fac = SpdFactor::new(&vector_mass, "vector mass matrix")?;

        // trace maps: ∫_e m_α τ·ν = Σ_j T[α, j] · dof_j
        let mut traces = Vec::with_capacity(el.edges.len());
        for e in &el.edges {
            let q = DMatrix::from_fn(e.quad.len(), k + 1, |r, j| {
                e.basis.eval(e.quad.points[r])[j]
            });
            let m1 = up.eval_table(&e.quad.points);
            let me = weighted_product(&q, &e.quad.weights, &q);
            let cross = weighted_product(&m1, &e.quad.weights, &q);
            let fac = SpdFactor::new(&me, "edge mass matrix")?;
            traces.push(fac.solve(&cross.transpose()).transpose());
        }

        let mut div_pairing = DMatrix::zeros(nk, ndof);
        for (i, t) in traces.iter().enumerate() {
            let r = layout.edge_range(i);
            div_pairing
                .view_mut((0, r.start), (nk, k + 1))
                .copy_from(&t.rows(0, nk));
        }
        for a in 1..nk {
            div_pairing[(a, layout.grad_range().start + a - 1)] -= 1.0;
        }
        let div = mass_fac.solve(&div_pairing);

        // functionals ∫ τ·∇m_l (l = 1..nk1) and ∫ τ·η_j
        let np = layout.n_gperp();
        let mut func = DMatrix::zeros(nk1 - 1 + np, ndof);
        for l in 1..nk1 {
            if l < nk {
                func[(l - 1, layout.grad_range().start + l - 1)] = 1.0;
            } else {
                let row = -(cross_mass.row(l) * &div);
                func.row_mut(l - 1).copy_from(&row);
                for (i, t) in traces.iter().enumerate() {
                    let r = layout.edge_range(i);
                    for j in 0..=k {
                        func[(l - 1, r.start + j)] += t[(l, j)];
                    }
                }
            }
        }
        for j in 0..np {
            func[(nk1 - 1 + j, layout.gperp_range().start + j)] = 1.0;
        }

        // split each vector monomial into gradient and G⊥ parts
        let mut split = gradient_columns(&el.scalar);
        let ng = split.ncols();
        split = split.insert_columns(ng, np, 0.0);
        for (j, eta) in el.gperp.members.iter().enumerate() {
            split.column_mut(ng + j).copy_from_slice(eta);
        }
        let inv = split.clone().try_inverse().ok_or(Error::IllConditioned {
            what: "gradient/G⊥ splitting",
            condition: f64::INFINITY,
        })?;
        let moments = inv.transpose() * func;
        let pi0 = vmass_fac.solve(&moments);

        // DOFs of the vector monomials
        let mut dofs_of_poly = DMatrix::zeros(ndof, 2 * nk);
        for (i, e) in el.edges.iter().enumerate() {
            let q = DMatrix::from_fn(e.quad.len(), k + 1, |r, j| {
                e.basis.eval(e.quad.points[r])[j]
            });
            let mk = el.scalar.eval_table(&e.quad.points);
            let cross = weighted_product(&q, &e.quad.weights, &mk);
            for j in 0..=k {
                let row = layout.edge_range(i).start + j;
                for a in 0..nk {
                    dofs_of_poly[(row, a)] = cross[(j, a)] * e.normal.x;
                    dofs_of_poly[(row, nk + a)] = cross[(j, a)] * e.normal.y;
                }
            }
        }
        let ax = weighted_product(&vk, w, &gx);
        let ay = weighted_product(&vk, w, &gy);
        for l in 1..nk {
            let row = layout.grad_range().start + l - 1;
            for a in 0..nk {
                dofs_of_poly[(row, a)] = ax[(a, l)];
                dofs_of_poly[(row, nk + a)] = ay[(a, l)];
            }
        }
        for (j, eta) in el.gperp.members.iter().enumerate() {
            let me = &vector_mass * DVector::from_column_slice(eta);
            dofs_of_poly
                .row_mut(layout.gperp_range().start + j)
                .copy_from(&me.transpose());
        }

        Ok(Projectors {
            scalar_mass,
            vector_mass,
            div_pairing,
            div,
            pi0,
            dofs_of_poly,
        })
    }
}

/// `P_k` coefficients of the divergence of the field with these DOFs.
pub fn div_from_dofs(el: &LocalElement, dofs: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(Projectors::new(el)?.div * dofs)
}

/// `[P_k]²` coefficients of `Π⁰_k` of the field with these DOFs.
pub fn pi0_from_dofs(el: &LocalElement, dofs: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(Projectors::new(el)?.pi0 * dofs)
}

/// `[P_k]²` mass matrix weighted by `κ⁻¹`.
pub fn kappa_mass(el: &LocalElement, kappa: &Kappa) -> DMatrix<f64> {
    let nk = el.scalar.len();
    let v = el.scalar.eval_table(&el.quad.points);
    let mut out = DMatrix::zeros(2 * nk, 2 * nk);
    match kappa {
        Kappa::Constant(m) => {
            let inv = m
                .try_inverse()
                .unwrap_or_else(|| crate::Mat2::from_element(f64::NAN));
            let mass = weighted_product(&v, &el.quad.weights, &v);
            for r in 0..2 {
                for c in 0..2 {
                    out.view_mut((r * nk, c * nk), (nk, nk))
                        .copy_from(&(&mass * inv[(r, c)]));
                }
            }
        }
        Kappa::Field(_) => {
            for r in 0..2 {
                for c in 0..2 {
                    let w: Vec<f64> = el
                        .quad
                        .points
                        .iter()
                        .zip(&el.quad.weights)
                        .map(|(&x, &w)| w * kappa.inverse_at(x)[(r, c)])
                        .collect();
                    out.view_mut((r * nk, c * nk), (nk, nk))
                        .copy_from(&weighted_product(&v, &w, &v));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct LocalOperators {
    pub projectors: Projectors,
    /// `Pᵀ M_κ P`.
    pub consistency: DMatrix<f64>,
    pub stabilization: DMatrix<f64>,
    pub stabilization_scale: f64,
    /// DOFs → DOFs of their own `Π⁰_k` polynomial.
    pub pi_dof: DMatrix<f64>,
    pub a_h: DMatrix<f64>,
}

impl LocalOperators {
    pub fn b(&self) -> &DMatrix<f64> {
        &self.projectors.div_pairing
    }

    /// `(I − Π_dof) ζ`.
    pub fn dof_residual(&self, dofs: &DVector<f64>) -> DVector<f64> {
        dofs - &self.pi_dof * dofs
    }
}

pub fn local_matrices(el: &LocalElement, kappa: &Kappa) -> Result<LocalOperators> {
    let projectors = Projectors::new(el)?;
    let p = &projectors.pi0;
    let mut consistency = p.transpose() * kappa_mass(el, kappa) * p;
    symmetrize(&mut consistency);
    let n = consistency.nrows();
    let dmax = consistency.diagonal().amax();
    let nonzero: Vec<f64> = consistency
        .diagonal()
        .iter()
        .copied()
        .filter(|d| d.abs() > 1e-14 * dmax)
        .collect();
    let stabilization_scale = nonzero.iter().sum::<f64>() / nonzero.len().max(1) as f64;
    let pi_dof = &projectors.dofs_of_poly * p;
    let res = DMatrix::identity(n, n) - &pi_dof;
    let mut stabilization = res.transpose() * &res * stabilization_scale;
    symmetrize(&mut stabilization);
    let a_h = &consistency + &stabilization;
    Ok(LocalOperators {
        projectors,
        consistency,
        stabilization,
        stabilization_scale,
        pi_dof,
        a_h,
    })
}

/// Solves `(σ*, τ)_{div,K} = (σ̂, τ)_K + (div σ_h, div τ)_K` for all
/// `τ ∈ [P_{k+1}(K)]²`; returns the `[P_{k+1}]²` coefficients of `σ*`.
pub fn postprocess_local(
    el: &LocalElement,
    sigma_hat: &[f64],
    div_sigma: &[f64],
) -> Result<DVector<f64>> {
    let k = el.k;
    let nk = poly_dim(k);
    let up = el.scalar.with_degree(k + 1);
    let nk1 = up.len();
    let w = &el.quad.weights;
    let v1 = up.eval_table(&el.quad.points);
    let vk = v1.columns(0, nk).into_owned();
    let (gx, gy) = up.eval_grad_table(&el.quad.points);

    let mass = weighted_product(&v1, w, &v1);
    let mut gram = DMatrix::zeros(2 * nk1, 2 * nk1);
    gram.view_mut((0, 0), (nk1, nk1))
        .copy_from(&(&mass + weighted_product(&gx, w, &gx)));
    gram.view_mut((nk1, nk1), (nk1, nk1))
        .copy_from(&(&mass + weighted_product(&gy, w, &gy)));
    let xy = weighted_product(&gx, w, &gy);
    gram.view_mut((0, nk1), (nk1, nk1)).copy_from(&xy);
    gram.view_mut((nk1, 0), (nk1, nk1))
        .copy_from(&xy.transpose());
    symmetrize(&mut gram);

    let cross = weighted_product(&v1, w, &vk);
    let sx = DVector::from_column_slice(&sigma_hat[..nk]);
    let sy = DVector::from_column_slice(&sigma_hat[nk..2 * nk]);
    let d_vals = &vk * DVector::from_column_slice(&div_sigma[..nk]);
    let dw = DVector::from_iterator(d_vals.len(), d_vals.iter().zip(w).map(|(d, w)| d * w));
    let mut rhs = DVector::zeros(2 * nk1);
    rhs.rows_mut(0, nk1)
        .copy_from(&(&cross * sx + gx.transpose() * &dw));
    rhs.rows_mut(nk1, nk1)
        .copy_from(&(&cross * sy + gy.transpose() * &dw));
    // The div-div block scales like h⁻² against the mass block, so the
    // spectral condition of the Gram matrix grows on small cells even when
    // the cell is well shaped. Geometry is checked through the mass block.
    SpdFactor::new(&mass, "P_{k+1} mass matrix")?;
    Ok(SpdFactor::with_limit(&gram, "H(div) Gram matrix", f64::INFINITY)?.solve_vec(&rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poly(v: &[(f64, f64)]) -> Polygon {
        Polygon::new(v.iter().map(|&(x, y)| Vec2::new(x, y)).collect()).unwrap()
    }

    fn square() -> Polygon {
        poly(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])
    }

    fn shapes() -> Vec<Polygon> {
        vec![
            square(),
            poly(&[(0.1, 0.0), (1.2, 0.2), (1.4, 0.9), (0.6, 1.5), (-0.2, 0.8)]),
            poly(&[(0.0, 0.0), (0.5, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]),
            poly(&[
                (0.0, 0.0),
                (1.0, 0.0),
                (1.0, 0.5),
                (0.5, 0.5),
                (0.5, 1.0),
                (0.0, 1.0),
            ]),
            poly(&[(0.0, 0.0), (0.02, -0.01), (0.05, 0.03), (0.01, 0.04)]),
        ]
    }

    fn random_poly_field(rng: &mut ChaCha8Rng, vb: &VectorPolyBasis) -> Vec<f64> {
        (0..vb.len()).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn layout_sizes() {
        let l = DofLayout::new(4, 1);
        assert_eq!(l.len(), 8 + 2 + 1);
        assert_eq!(l.grad_range(), 8..10);
        assert_eq!(l.gperp_range(), 10..11);
        assert_eq!(DofLayout::new(5, 2).len(), 15 + 5 + 3);
        assert_eq!(DofLayout::new(3, 0).len(), 3);
    }

    #[test]
    fn constant_field_fluxes() {
        let el = LocalElement::new(square(), 0).unwrap();
        let d = dofs_of_field(&el, |_| Vec2::new(0.0, 1.0));
        let expect = [-1.0, 0.0, 1.0, 0.0];
        for (a, b) in d.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn gperp_member_moments() {
        for p in shapes() {
            let el = LocalElement::new(p, 1).unwrap();
            let d = dofs_of_field(&el, |x| el.gperp_value(0, x));
            let l = el.layout();
            for i in l.grad_range() {
                assert!(d[i].abs() < 1e-12);
            }
            assert!(d[l.gperp_range().start] > 0.0);
        }
    }

    #[test]
    fn polynomials_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in 0..=2 {
            for p in shapes() {
                let el = LocalElement::new(p, k).unwrap();
                let pr = Projectors::new(&el).unwrap();
                let vb = el.vector_basis();
                for _ in 0..3 {
                    let c = random_poly_field(&mut rng, &vb);
                    let d = dofs_of_field(&el, |x| vb.value(&c, x));
                    let back = &pr.pi0 * &d;
                    for (a, b) in back.iter().zip(&c) {
                        assert!((a - b).abs() < 1e-10, "k={k}");
                    }
                    let direct = &pr.dofs_of_poly * DVector::from_column_slice(&c);
                    assert!((direct - &d).amax() < 1e-11 * d.amax().max(1.0));
                }
            }
        }
    }

    #[test]
    fn divergence_of_position() {
        for k in 0..=2 {
            for p in shapes() {
                let el = LocalElement::new(p, k).unwrap();
                let d = div_from_dofs(&el, &dofs_of_field(&el, |x| x)).unwrap();
                assert!((d[0] - 2.0).abs() < 1e-10);
                assert!(d.rows(1, d.len() - 1).amax() < 1e-10);
                let c = div_from_dofs(&el, &dofs_of_field(&el, |_| Vec2::new(3.0, -1.0))).unwrap();
                assert!(c.amax() < 1e-10);
                let ops = local_matrices(&el, &Kappa::identity()).unwrap();
                let b0 = (ops.b() * dofs_of_field(&el, |x| x))[0];
                assert_relative_eq!(b0, 2.0 * el.polygon.area(), max_relative = 1e-10);
            }
        }
    }

    /// Random smooth field and its divergence.
    fn smooth_field(rng: &mut ChaCha8Rng) -> (impl Fn(Vec2) -> Vec2, impl Fn(Vec2) -> f64) {
        let a: [f64; 6] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let tau = move |x: Vec2| {
            Vec2::new(
                (a[0] * x.x + a[1] * x.y).sin() + a[2] * x.x * x.y,
                a[3] * (a[4] * x.x - a[5] * x.y).cos(),
            )
        };
        let div = move |x: Vec2| {
            a[0] * (a[0] * x.x + a[1] * x.y).cos()
                + a[2] * x.y
                + a[3] * a[5] * (a[4] * x.x - a[5] * x.y).sin()
        };
        (tau, div)
    }

    fn accurate(p: Polygon, k: usize) -> LocalElement {
        let rev = vec![false; p.len()];
        LocalElement::with_quadrature(p, k, &rev, 24, 24).unwrap()
    }

    #[test]
    fn commuting_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..=2 {
            for p in shapes() {
                let el = accurate(p.clone(), k);
                let pr = Projectors::new(&el).unwrap();
                for _ in 0..5 {
                    let (tau, div) = smooth_field(&mut rng);
                    let lhs = &pr.div * dofs_of_field(&el, &tau);
                    let rhs = crate::basis::l2_project_with(&el.scalar, &el.quad, div).unwrap();
                    for (a, b) in lhs.iter().zip(&rhs) {
                        assert!((a - b).abs() < 1e-9, "k={k}: {a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn consistency_and_stability() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 0..=2 {
            for p in shapes() {
                let el = LocalElement::new(p, k).unwrap();
                let ops = local_matrices(&el, &Kappa::identity()).unwrap();
                assert!(crate::linalg::asymmetry(&ops.a_h) < 1e-13);
                let vb = el.vector_basis();
                let mass = vb.mass_matrix(&el.quad);
                let c1 = DVector::from_vec(random_poly_field(&mut rng, &vb));
                let c2 = DVector::from_vec(random_poly_field(&mut rng, &vb));
                let d1 = &ops.projectors.dofs_of_poly * &c1;
                let d2 = &ops.projectors.dofs_of_poly * &c2;
                let lhs = (d1.transpose() * &ops.a_h * &d2)[0];
                let rhs = (c1.transpose() * &mass * &c2)[0];
                assert!((lhs - rhs).abs() < 1e-9 * rhs.abs().max(mass.amax()));
                assert!((ops.dof_residual(&d1)).amax() < 1e-10 * d1.amax());
                for _ in 0..10 {
                    let z = DVector::from_fn(el.layout().len(), |_, _| rng.random_range(-1.0..1.0));
                    assert!((z.transpose() * &ops.a_h * &z)[0] > 0.0);
                }
            }
        }
    }

    #[test]
    fn postprocess_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for k in 0..=2 {
            let el = LocalElement::new(shapes()[1].clone(), k).unwrap();
            let vb = el.vector_basis();
            let c = random_poly_field(&mut rng, &vb);
            let div = crate::basis::div_coeffs(&el.scalar, &c);
            let mut div_k = vec![0.0; el.scalar.len()];
            div_k[..div.len()].copy_from_slice(&div);
            let s = postprocess_local(&el, &c, &div_k).unwrap();
            let n1 = poly_dim(k + 1);
            let nk = poly_dim(k);
            for i in 0..n1 {
                let (ex, ey) = if i < nk {
                    (c[i], c[nk + i])
                } else {
                    (0.0, 0.0)
                };
                assert!((s[i] - ex).abs() < 1e-10 && (s[n1 + i] - ey).abs() < 1e-10);
            }
            let z = postprocess_local(&el, &vec![0.0; 2 * nk], &vec![0.0; nk]).unwrap();
            assert_eq!(z.amax(), 0.0);
        }
    }

    #[test]
    fn postprocess_residual_orthogonality() {
        let el = LocalElement::new(square(), 0).unwrap();
        // constant datum (0.5, 0) standing in for (y, 0) averaged on the cell
        let s = postprocess_local(&el, &[0.5, 0.0], &[0.0]).unwrap();
        let up = el.scalar.with_degree(1);
        let vb = VectorPolyBasis::new(up.clone());
        for i in 0..vb.len() {
            let mut e = vec![0.0; vb.len()];
            e[i] = 1.0;
            let div_of = |c: &[f64], x: Vec2| {
                let g = up.eval_grad(x);
                let n = up.len();
                (0..n)
                    .map(|a| c[a] * g[a].x + c[n + a] * g[a].y)
                    .sum::<f64>()
            };
            let lhs = el.quad.integrate(|x| {
                vb.value(s.as_slice(), x).dot(&vb.value(&e, x))
                    + div_of(s.as_slice(), x) * div_of(&e, x)
            });
            let rhs = el
                .quad
                .integrate(|x| Vec2::new(0.5, 0.0).dot(&vb.value(&e, x)));
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn projector_matches_direct_projection() {
        let el = accurate(square(), 1);
        let pr = Projectors::new(&el).unwrap();
        let c = &pr.pi0 * dofs_of_field(&el, |x| Vec2::new(x.y.sin(), 0.0));
        let direct = crate::basis::l2_project_with(&el.scalar, &el.quad, |x| x.y.sin()).unwrap();
        for i in 0..3 {
            assert!((c[i] - direct[i]).abs() < 1e-9);
            assert!(c[3 + i].abs() < 1e-9);
        }
    }

    #[test]
    fn reversed_edges_flip_nothing_but_moments() {
        let p = shapes()[1].clone();
        let a = LocalElement::new(p.clone(), 2).unwrap();
        let b = LocalElement::with_orientation(p, 2, &[true, false, true, false, false]).unwrap();
        let f = |x: Vec2| Vec2::new(x.x * x.x, x.y - x.x);
        let da = dofs_of_field(&a, f);
        let db = dofs_of_field(&b, f);
        let pa = Projectors::new(&a).unwrap();
        let pb = Projectors::new(&b).unwrap();
        assert!((&pa.pi0 * da - &pb.pi0 * db).amax() < 1e-12);
    }
}

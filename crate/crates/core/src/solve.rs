//! Global numbering, saddle-point assembly and solution of the mixed scheme.
//!
//! Unknowns are ordered as edge fluxes, cell-interior fluxes, then the
//! piecewise `P_k` scalar. Each edge carries a global orientation: its
//! tangent runs from the lower to the higher vertex index and its normal is
//! the tangent turned clockwise. Neumann edge fluxes vanish and are removed
//! from the linear system.

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::DVector;
use rayon::prelude::*;

use crate::basis::{poly_dim, VectorPolyBasis};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryLabel, PolyMesh};
use crate::problem::{Dirichlet, ExactSolution, ProblemData};
use crate::vem_local::{
    local_matrices, postprocess_local, DofLayout, LocalElement, LocalOperators,
};
use crate::Vec2;

/// Total number of flux and scalar unknowns before boundary elimination.
pub fn dof_count(mesh: &PolyMesh, k: usize) -> usize {
    (k + 1) * mesh.n_edges() + (k + 2) * (3 * k + 1) / 2 * mesh.n_cells()
}

#[derive(Debug, Clone)]
pub struct GlobalDofMap {
    pub k: usize,
    /// Full flux index → position in the reduced system, `None` on Neumann
    /// edges.
    pub reduced: Vec<Option<usize>>,
    /// First full flux index of each cell's interior block.
    pub interior_offset: Vec<usize>,
    /// First scalar index of each cell, counted after the reduced fluxes.
    pub scalar_offset: Vec<usize>,
    pub n_flux: usize,
    pub n_flux_reduced: usize,
    pub n_scalar: usize,
}

impl GlobalDofMap {
    pub fn new(mesh: &PolyMesh, k: usize) -> Self {
        let per_edge = k + 1;
        let n_interior = DofLayout::new(0, k).n_interior();
        let n_edge_dofs = per_edge * mesh.n_edges();
        let interior_offset: Vec<usize> = (0..mesh.n_cells())
            .map(|c| n_edge_dofs + c * n_interior)
            .collect();
        let n_flux = n_edge_dofs + mesh.n_cells() * n_interior;
        let mut reduced = vec![None; n_flux];
        let mut next = 0;
        for (e, edge) in mesh.edges().iter().enumerate() {
            if edge.label != Some(BoundaryLabel::Neumann) {
                for j in 0..per_edge {
                    reduced[e * per_edge + j] = Some(next);
                    next += 1;
                }
            }
        }
        for slot in reduced.iter_mut().skip(n_edge_dofs) {
            *slot = Some(next);
            next += 1;
        }
        let nk = poly_dim(k);
        let scalar_offset = (0..mesh.n_cells()).map(|c| next + c * nk).collect();
        GlobalDofMap {
            k,
            reduced,
            interior_offset,
            scalar_offset,
            n_flux,
            n_flux_reduced: next,
            n_scalar: mesh.n_cells() * nk,
        }
    }

    pub fn total(&self) -> usize {
        self.n_flux + self.n_scalar
    }

    pub fn system_size(&self) -> usize {
        self.n_flux_reduced + self.n_scalar
    }

    pub fn n_eliminated(&self) -> usize {
        self.n_flux - self.n_flux_reduced
    }

    /// Full flux index and sign for every local DOF of cell `c`.
    pub fn local_to_global(&self, mesh: &PolyMesh, c: usize) -> Vec<(usize, f64)> {
        let per_edge = self.k + 1;
        let mut out = Vec::new();
        for (i, &e) in mesh.cell_edges(c).iter().enumerate() {
            let sign = if mesh.edge_agrees_with_cell(c, i) {
                1.0
            } else {
                -1.0
            };
            out.extend((0..per_edge).map(|j| (e * per_edge + j, sign)));
        }
        let n_interior = DofLayout::new(0, self.k).n_interior();
        out.extend((0..n_interior).map(|j| (self.interior_offset[c] + j, 1.0)));
        out
    }
}

/// Cell element whose edge moments follow the global edge orientation.
pub fn global_element(mesh: &PolyMesh, c: usize, k: usize) -> Result<LocalElement> {
    let reversed: Vec<bool> = (0..mesh.cells()[c].len())
        .map(|i| !mesh.edge_agrees_with_cell(c, i))
        .collect();
    LocalElement::with_orientation(mesh.polygon(c).clone(), k, &reversed)
}

/// Assembled saddle-point system together with the element data it was
/// built from.
pub struct LinearSystem {
    pub k: usize,
    pub map: GlobalDofMap,
    pub size: usize,
    /// Merged, column-sorted entries.
    pub entries: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
    /// Full flux index and sign of every local DOF, per cell.
    pub cell_maps: Vec<Vec<(usize, f64)>>,
    pub elements: Vec<LocalElement>,
    pub operators: Vec<LocalOperators>,
}

impl LinearSystem {
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.size];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    /// Largest relative asymmetry of the stored matrix.
    pub fn asymmetry(&self) -> f64 {
        let map: std::collections::HashMap<(usize, usize), f64> =
            self.entries.iter().map(|&(r, c, v)| ((r, c), v)).collect();
        let scale = self.entries.iter().fold(0.0f64, |m, e| m.max(e.2.abs()));
        self.entries
            .iter()
            .map(|&(r, c, v)| (v - map.get(&(c, r)).copied().unwrap_or(0.0)).abs())
            .fold(0.0, f64::max)
            / scale
    }
}

struct CellContribution {
    element: LocalElement,
    operators: LocalOperators,
    flux_rhs: DVector<f64>,
    scalar_rhs: Vec<f64>,
}

fn cell_contribution(
    mesh: &PolyMesh,
    c: usize,
    k: usize,
    data: &ProblemData,
) -> Result<CellContribution> {
    let element = global_element(mesh, c, k)?;
    let operators = local_matrices(&element, &data.kappa)?;
    let layout = element.layout();
    let mut flux_rhs = DVector::zeros(layout.len());
    if let Dirichlet::Data { g, .. } = &data.dirichlet {
        for (i, &e) in mesh.cell_edges(c).iter().enumerate() {
            if mesh.edge(e).label != Some(BoundaryLabel::Dirichlet) {
                continue;
            }
            let le = &element.edges[i];
            let n = k + 1;
            let mut mass = nalgebra::DMatrix::zeros(n, n);
            let mut moments = DVector::zeros(n);
            for (&x, &w) in le.quad.points.iter().zip(&le.quad.weights) {
                let q = le.basis.eval(x);
                let gv = g(x);
                for a in 0..n {
                    moments[a] += w * gv * q[a];
                    for b in 0..n {
                        mass[(a, b)] += w * q[a] * q[b];
                    }
                }
            }
            let fac = crate::linalg::SpdFactor::new(&mass, "edge mass matrix")?;
            flux_rhs
                .rows_mut(layout.edge_range(i).start, n)
                .copy_from(&fac.solve_vec(&moments));
        }
    }
    let mut scalar_rhs = vec![0.0; element.scalar.len()];
    let mut vals = vec![0.0; element.scalar.len()];
    for (&x, &w) in element.quad.points.iter().zip(&element.quad.weights) {
        element.scalar.eval_into(x, &mut vals);
        let fv = (data.f)(x);
        for (r, v) in scalar_rhs.iter_mut().zip(&vals) {
            *r -= w * fv * v;
        }
    }
    Ok(CellContribution {
        element,
        operators,
        flux_rhs,
        scalar_rhs,
    })
}

fn merge(mut t: Vec<(usize, usize, f64)>) -> Vec<(usize, usize, f64)> {
    t.sort_by_key(|&(r, c, _)| (c, r));
    let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(t.len());
    for (r, c, v) in t {
        match out.last_mut() {
            Some(last) if last.0 == r && last.1 == c => last.2 += v,
            _ => out.push((r, c, v)),
        }
    }
    out
}

/// Builds `[A_h Bᵀ; B 0]` with the Dirichlet datum and the source on the
/// right-hand side.
pub fn assemble(mesh: &PolyMesh, k: usize, data: &ProblemData) -> Result<LinearSystem> {
    if k > 2 {
        return Err(Error::InvalidConfig(format!(
            "k must be 0, 1, or 2 (got {k})"
        )));
    }
    let map = GlobalDofMap::new(mesh, k);
    let parts: Vec<CellContribution> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            cell_contribution(mesh, c, k, data).map_err(|e| Error::Assembly {
                cell: c,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let size = map.system_size();
    let cell_maps: Vec<Vec<(usize, f64)>> = (0..mesh.n_cells())
        .map(|c| map.local_to_global(mesh, c))
        .collect();
    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; size];
    for (c, part) in parts.iter().enumerate() {
        let l2g: Vec<(Option<usize>, f64)> = cell_maps[c]
            .iter()
            .map(|&(g, s)| (map.reduced[g], s))
            .collect();
        let a = &part.operators.a_h;
        let b = part.operators.b();
        for (i, &(gi, si)) in l2g.iter().enumerate() {
            let Some(gi) = gi else { continue };
            rhs[gi] += si * part.flux_rhs[i];
            for (j, &(gj, sj)) in l2g.iter().enumerate() {
                if let Some(gj) = gj {
                    triplets.push((gi, gj, si * sj * a[(i, j)]));
                }
            }
            for a_row in 0..b.nrows() {
                let s = map.scalar_offset[c] + a_row;
                let v = si * b[(a_row, i)];
                triplets.push((s, gi, v));
                triplets.push((gi, s, v));
            }
        }
        for (a_row, v) in part.scalar_rhs.iter().enumerate() {
            rhs[map.scalar_offset[c] + a_row] += v;
        }
    }
    let (elements, operators) = parts.into_iter().map(|p| (p.element, p.operators)).unzip();
    Ok(LinearSystem {
        k,
        map,
        size,
        entries: merge(triplets),
        rhs,
        cell_maps,
        elements,
        operators,
    })
}

/// Per-cell pieces of the discrete solution.
#[derive(Debug, Clone)]
pub struct CellSolution {
    /// Local flux DOFs with outward normals.
    pub flux_dofs: DVector<f64>,
    /// `u_h` in `B_k(K)`.
    pub u: Vec<f64>,
    /// `div σ_h` in `B_k(K)`.
    pub div: Vec<f64>,
    /// `σ̂_h = Π⁰_k σ_h` in `[P_k]²`.
    pub sigma_hat: Vec<f64>,
    /// `σ*_h` in `[P_{k+1}]²` on the same centre and scale.
    pub sigma_star: Vec<f64>,
}

pub struct MixedSolution {
    pub k: usize,
    /// Global flux vector in full numbering (Neumann entries are zero).
    pub flux: Vec<f64>,
    pub cells: Vec<CellSolution>,
    pub elements: Vec<LocalElement>,
    pub operators: Vec<LocalOperators>,
    pub relative_residual: f64,
    pub map: GlobalDofMap,
}

impl MixedSolution {
    pub fn u_at(&self, c: usize, x: Vec2) -> f64 {
        self.elements[c].scalar.value(&self.cells[c].u, x)
    }

    pub fn sigma_star_basis(&self, c: usize) -> VectorPolyBasis {
        VectorPolyBasis::new(self.elements[c].scalar.with_degree(self.k + 1))
    }

    pub fn sigma_star_at(&self, c: usize, x: Vec2) -> Vec2 {
        self.sigma_star_basis(c).value(&self.cells[c].sigma_star, x)
    }

    pub fn sigma_hat_at(&self, c: usize, x: Vec2) -> Vec2 {
        self.elements[c]
            .vector_basis()
            .value(&self.cells[c].sigma_hat, x)
    }

    pub fn div_star_at(&self, c: usize, x: Vec2) -> f64 {
        let b = self.elements[c].scalar.with_degree(self.k + 1);
        let s = &self.cells[c].sigma_star;
        let n = b.len();
        b.eval_grad(x)
            .iter()
            .enumerate()
            .map(|(a, g)| s[a] * g.x + s[n + a] * g.y)
            .sum()
    }
}

const RESIDUAL_TOLERANCE: f64 = 1e-10;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Direct sparse LU solve followed by the per-cell reconstructions.
pub fn solve_system(system: LinearSystem) -> Result<MixedSolution> {
    let n = system.size;
    let trip: Vec<Triplet<usize, usize, f64>> = system
        .entries
        .iter()
        .map(|&(r, c, v)| Triplet::new(r, c, v))
        .collect();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| Error::SingularSystem(format!("matrix construction failed: {e:?}")))?;
    let lu = a
        .sp_lu()
        .map_err(|e| Error::SingularSystem(format!("factorization failed: {e:?}")))?;
    let solve = |b: &[f64]| -> Vec<f64> {
        let col = faer::Col::<f64>::from_fn(n, |i| b[i]);
        let x = lu.solve(&col);
        (0..n).map(|i| x[i]).collect()
    };
    let bnorm = norm(&system.rhs);
    let mut x = solve(&system.rhs);
    let mut rel = f64::INFINITY;
    for _ in 0..3 {
        let ax = system.matvec(&x);
        let r: Vec<f64> = system.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        rel = if bnorm > 0.0 {
            norm(&r) / bnorm
        } else {
            norm(&r)
        };
        if !rel.is_finite() || rel <= RESIDUAL_TOLERANCE {
            break;
        }
        let dx = solve(&r);
        x.iter_mut().zip(dx).for_each(|(xi, d)| *xi += d);
    }
    if rel.is_nan() || rel > RESIDUAL_TOLERANCE || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem(format!(
            "relative residual {rel:e} after refinement"
        )));
    }

    let map = system.map.clone();
    let mut flux = vec![0.0; map.n_flux];
    for (g, r) in map.reduced.iter().enumerate() {
        if let Some(r) = r {
            flux[g] = x[*r];
        }
    }
    let k = system.k;
    let nk = poly_dim(k);
    let cells: Vec<CellSolution> = system
        .elements
        .par_iter()
        .zip(system.operators.par_iter())
        .enumerate()
        .map(|(c, (el, ops))| {
            let dofs = DVector::from_iterator(
                el.layout().len(),
                system.cell_maps[c].iter().map(|&(g, s)| s * flux[g]),
            );
            let u = x[map.scalar_offset[c]..map.scalar_offset[c] + nk].to_vec();
            let div: Vec<f64> = (&ops.projectors.div * &dofs).iter().copied().collect();
            let sigma_hat: Vec<f64> = (&ops.projectors.pi0 * &dofs).iter().copied().collect();
            let sigma_star = postprocess_local(el, &sigma_hat, &div)
                .map_err(|e| Error::Assembly {
                    cell: c,
                    source: Box::new(e),
                })?
                .iter()
                .copied()
                .collect();
            Ok(CellSolution {
                flux_dofs: dofs,
                u,
                div,
                sigma_hat,
                sigma_star,
            })
        })
        .collect::<Result<_>>()?;
    Ok(MixedSolution {
        k,
        flux,
        cells,
        elements: system.elements,
        operators: system.operators,
        relative_residual: rel,
        map,
    })
}

/// Assembles and solves in one step.
pub fn solve(mesh: &PolyMesh, k: usize, data: &ProblemData) -> Result<MixedSolution> {
    solve_system(assemble(mesh, k, data)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub e_sigma: f64,
    pub e_u: f64,
    pub e_total: f64,
}

/// Quadrature exactness used for error integrals.
pub const fn error_quadrature_degree(k: usize) -> usize {
    2 * k + 6
}

/// Broken `H(div)` error of `σ*_h` and `L²` error of `u_h`.
pub fn error_norms(sol: &MixedSolution, exact: &ExactSolution) -> Result<ErrorNorms> {
    let per_cell: Vec<(f64, f64)> = (0..sol.cells.len())
        .into_par_iter()
        .map(|c| {
            let quad = crate::geometry::polygon_quadrature(
                &sol.elements[c].polygon,
                error_quadrature_degree(sol.k),
            )?;
            let es = quad.integrate(|x| {
                let d = (exact.sigma)(x) - sol.sigma_star_at(c, x);
                let dd = (exact.div_sigma)(x) - sol.div_star_at(c, x);
                d.norm_squared() + dd * dd
            });
            let eu = quad.integrate(|x| ((exact.u)(x) - sol.u_at(c, x)).powi(2));
            Ok((es, eu))
        })
        .collect::<Result<_>>()?;
    let (es, eu) = per_cell
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    Ok(ErrorNorms {
        e_sigma: es.sqrt(),
        e_u: eu.sqrt(),
        e_total: (es + eu).sqrt(),
    })
}

/// `‖u_h − Π⁰_k u‖_0`, computed from coefficients on every cell.
pub fn scalar_projection_error(sol: &MixedSolution, u: impl Fn(Vec2) -> f64 + Sync) -> Result<f64> {
    let per_cell: Vec<f64> = (0..sol.cells.len())
        .into_par_iter()
        .map(|c| {
            let el = &sol.elements[c];
            let p = crate::basis::l2_project_with(&el.scalar, &el.quad, &u)?;
            let d =
                DVector::from_iterator(p.len(), p.iter().zip(&sol.cells[c].u).map(|(a, b)| a - b));
            let m = el.scalar.mass_matrix(&el.quad);
            Ok((d.transpose() * m * &d)[0].max(0.0))
        })
        .collect::<Result<_>>()?;
    Ok(per_cell.iter().sum::<f64>().sqrt())
}

/// Largest `|∫_K (div σ_h + f) m_α|` over cells and basis functions.
pub fn mass_balance_defect(sol: &MixedSolution, data: &ProblemData) -> f64 {
    (0..sol.cells.len())
        .map(|c| {
            let el = &sol.elements[c];
            let d = &sol.cells[c].div;
            (0..el.scalar.len())
                .map(|a| {
                    el.quad
                        .integrate(|x| (el.scalar.value(d, x) + (data.f)(x)) * el.scalar.eval(x)[a])
                        .abs()
                })
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

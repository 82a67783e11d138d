//! Scaled monomial bases on cells and edges, vector polynomial spaces and
//! the L² projection onto them.
//!
//! All coefficient vectors use graded lexicographic order: degree by
//! degree, and inside degree `d` the exponents `(d,0), (d-1,1), ..., (0,d)`.
//! A basis of degree `l` is therefore a prefix of every basis of higher
//! degree with the same centre and scale.
//!
//! Vector polynomials in `[P_l]²` store the first component's coefficients
//! followed by the second component's.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::geometry::{polygon_quadrature, Polygon, QuadratureRule};
use crate::linalg::SpdFactor;
use crate::Vec2;

/// Dimension of `P_l` in two variables.
pub const fn poly_dim(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Position of the exponent `(a, b)` in graded lexicographic order.
pub const fn mono_index(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

pub fn exponents(degree: usize) -> Vec<(usize, usize)> {
    (0..=degree)
        .flat_map(|d| (0..=d).map(move |b| (d - b, b)))
        .collect()
}

/// `m_α(x) = ((x - x_K) / h_K)^α` for `|α| <= degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledMonomials {
    pub center: Vec2,
    pub scale: f64,
    pub degree: usize,
}

impl ScaledMonomials {
    pub fn new(center: Vec2, scale: f64, degree: usize) -> Self {
        ScaledMonomials {
            center,
            scale,
            degree,
        }
    }

    /// Basis on a polygon: area centroid and diameter.
    pub fn on(poly: &Polygon, degree: usize) -> Self {
        Self::new(poly.centroid(), poly.diameter(), degree)
    }

    pub fn with_degree(&self, degree: usize) -> Self {
        Self::new(self.center, self.scale, degree)
    }

    pub fn len(&self) -> usize {
        poly_dim(self.degree)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn powers(&self, x: Vec2) -> (Vec<f64>, Vec<f64>) {
        let s = (x - self.center) / self.scale;
        let mut px = vec![1.0; self.degree + 1];
        let mut py = vec![1.0; self.degree + 1];
        for i in 1..=self.degree {
            px[i] = px[i - 1] * s.x;
            py[i] = py[i - 1] * s.y;
        }
        (px, py)
    }

    pub fn eval_into(&self, x: Vec2, out: &mut [f64]) {
        let (px, py) = self.powers(x);
        let mut i = 0;
        for d in 0..=self.degree {
            for b in 0..=d {
                out[i] = px[d - b] * py[b];
                i += 1;
            }
        }
    }

    pub fn eval(&self, x: Vec2) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, &mut out);
        out
    }

    pub fn eval_grad_into(&self, x: Vec2, out: &mut [Vec2]) {
        let (px, py) = self.powers(x);
        let h = self.scale;
        let mut i = 0;
        for d in 0..=self.degree {
            for b in 0..=d {
                let a = d - b;
                let gx = if a > 0 {
                    a as f64 * px[a - 1] * py[b] / h
                } else {
                    0.0
                };
                let gy = if b > 0 {
                    b as f64 * px[a] * py[b - 1] / h
                } else {
                    0.0
                };
                out[i] = Vec2::new(gx, gy);
                i += 1;
            }
        }
    }

    pub fn eval_grad(&self, x: Vec2) -> Vec<Vec2> {
        let mut out = vec![Vec2::zeros(); self.len()];
        self.eval_grad_into(x, &mut out);
        out
    }

    /// Value table, one row per point.
    pub fn eval_table(&self, pts: &[Vec2]) -> DMatrix<f64> {
        let mut t = DMatrix::zeros(pts.len(), self.len());
        let mut row = vec![0.0; self.len()];
        for (i, &p) in pts.iter().enumerate() {
            self.eval_into(p, &mut row);
            for (j, v) in row.iter().enumerate() {
                t[(i, j)] = *v;
            }
        }
        t
    }

    /// Gradient tables `(∂x, ∂y)`, one row per point.
    pub fn eval_grad_table(&self, pts: &[Vec2]) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut gx = DMatrix::zeros(pts.len(), self.len());
        let mut gy = DMatrix::zeros(pts.len(), self.len());
        let mut row = vec![Vec2::zeros(); self.len()];
        for (i, &p) in pts.iter().enumerate() {
            self.eval_grad_into(p, &mut row);
            for (j, g) in row.iter().enumerate() {
                gx[(i, j)] = g.x;
                gy[(i, j)] = g.y;
            }
        }
        (gx, gy)
    }

    /// Value of the polynomial with the given coefficients (a prefix of the
    /// basis may be used).
    pub fn value(&self, coeffs: &[f64], x: Vec2) -> f64 {
        let vals = self.eval(x);
        coeffs.iter().zip(&vals).map(|(c, v)| c * v).sum()
    }

    pub fn gradient(&self, coeffs: &[f64], x: Vec2) -> Vec2 {
        let g = self.eval_grad(x);
        coeffs
            .iter()
            .zip(&g)
            .fold(Vec2::zeros(), |s, (c, v)| s + v * *c)
    }

    pub fn mass_matrix(&self, quad: &QuadratureRule) -> DMatrix<f64> {
        let t = self.eval_table(&quad.points);
        let w = DMatrix::from_diagonal(&DVector::from_column_slice(&quad.weights));
        t.transpose() * w * &t
    }
}

/// Normalized monomials `((x - x_e)·t / h_e)^j` on a straight edge, with
/// `t` the parametrization direction.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeBasis {
    pub midpoint: Vec2,
    pub length: f64,
    pub tangent: Vec2,
    pub degree: usize,
}

impl EdgeBasis {
    /// Basis on the segment `from`–`to`, parametrized from `from` to `to`.
    pub fn new(from: Vec2, to: Vec2, degree: usize) -> Self {
        let length = (to - from).norm();
        EdgeBasis {
            midpoint: (from + to) * 0.5,
            length,
            tangent: (to - from) / length,
            degree,
        }
    }

    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coordinate(&self, x: Vec2) -> f64 {
        (x - self.midpoint).dot(&self.tangent) / self.length
    }

    pub fn eval(&self, x: Vec2) -> Vec<f64> {
        let t = self.coordinate(x);
        let mut out = vec![1.0; self.len()];
        for j in 1..out.len() {
            out[j] = out[j - 1] * t;
        }
        out
    }
}

/// `[P_l]²` built on a scalar basis.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorPolyBasis {
    pub scalar: ScaledMonomials,
}

impl VectorPolyBasis {
    pub fn new(scalar: ScaledMonomials) -> Self {
        VectorPolyBasis { scalar }
    }

    pub fn len(&self) -> usize {
        2 * self.scalar.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, coeffs: &[f64], x: Vec2) -> Vec2 {
        let n = self.scalar.len();
        Vec2::new(
            self.scalar.value(&coeffs[..n], x),
            self.scalar.value(&coeffs[n..], x),
        )
    }

    /// Block-diagonal mass matrix of the vector basis.
    pub fn mass_matrix(&self, quad: &QuadratureRule) -> DMatrix<f64> {
        let m = self.scalar.mass_matrix(quad);
        let n = m.nrows();
        let mut out = DMatrix::zeros(2 * n, 2 * n);
        out.view_mut((0, 0), (n, n)).copy_from(&m);
        out.view_mut((n, n), (n, n)).copy_from(&m);
        out
    }
}

/// Divergence of a vector polynomial of degree `b.degree`, returned in the
/// scalar basis of degree `b.degree - 1` (or a single zero for degree 0).
pub fn div_coeffs(b: &ScaledMonomials, v: &[f64]) -> Vec<f64> {
    let n = b.len();
    let (vx, vy) = v.split_at(n);
    let out_deg = b.degree.saturating_sub(1);
    let mut out = vec![0.0; poly_dim(out_deg)];
    for (i, (a, c)) in exponents(b.degree).into_iter().enumerate() {
        if a > 0 {
            out[mono_index(a - 1, c)] += a as f64 * vx[i] / b.scale;
        }
        if c > 0 {
            out[mono_index(a, c - 1)] += c as f64 * vy[i] / b.scale;
        }
    }
    out
}

/// Scalar rotation `∂x v2 - ∂y v1`, same conventions as [`div_coeffs`].
pub fn rot_coeffs(b: &ScaledMonomials, v: &[f64]) -> Vec<f64> {
    let n = b.len();
    let (vx, vy) = v.split_at(n);
    let out_deg = b.degree.saturating_sub(1);
    let mut out = vec![0.0; poly_dim(out_deg)];
    for (i, (a, c)) in exponents(b.degree).into_iter().enumerate() {
        if a > 0 {
            out[mono_index(a - 1, c)] += a as f64 * vy[i] / b.scale;
        }
        if c > 0 {
            out[mono_index(a, c - 1)] -= c as f64 * vx[i] / b.scale;
        }
    }
    out
}

/// Gradient of a scalar polynomial of degree `b.degree` as a vector
/// polynomial of degree `b.degree - 1` (component-major, zero-padded for
/// degree 0).
pub fn grad_coeffs(b: &ScaledMonomials, q: &[f64]) -> Vec<f64> {
    let out_deg = b.degree.saturating_sub(1);
    let m = poly_dim(out_deg);
    let mut out = vec![0.0; 2 * m];
    for (i, (a, c)) in exponents(b.degree).into_iter().enumerate() {
        if a > 0 {
            out[mono_index(a - 1, c)] += a as f64 * q[i] / b.scale;
        }
        if c > 0 {
            out[m + mono_index(a, c - 1)] += c as f64 * q[i] / b.scale;
        }
    }
    out
}

/// `x⊥ m_β` as a vector polynomial in `[P_degree]²`, where
/// `x⊥ = (-(y - y_K), x - x_K) / h_K` and `β = (b1, b2)`.
pub fn x_perp_monomial(beta: (usize, usize), degree: usize) -> Vec<f64> {
    let m = poly_dim(degree);
    let mut out = vec![0.0; 2 * m];
    out[mono_index(beta.0, beta.1 + 1)] = -1.0;
    out[m + mono_index(beta.0 + 1, beta.1)] = 1.0;
    out
}

/// L² projection onto the span of `basis` using `quad`; returns the
/// coefficients.
pub fn l2_project_with(
    basis: &ScaledMonomials,
    quad: &QuadratureRule,
    f: impl Fn(Vec2) -> f64,
) -> Result<Vec<f64>> {
    let mass = basis.mass_matrix(quad);
    let fac = SpdFactor::new(&mass, "monomial mass matrix")?;
    let mut rhs = DVector::zeros(basis.len());
    let mut row = vec![0.0; basis.len()];
    for (&p, &w) in quad.points.iter().zip(&quad.weights) {
        basis.eval_into(p, &mut row);
        let fv = f(p);
        for (r, v) in rhs.iter_mut().zip(&row) {
            *r += w * fv * v;
        }
    }
    Ok(fac.solve_vec(&rhs).iter().copied().collect())
}

/// Default cell quadrature degree for polynomial order `k`.
pub const fn cell_quadrature_degree(k: usize) -> usize {
    2 * k + 4
}

/// Default edge quadrature degree for polynomial order `k`.
pub const fn edge_quadrature_degree(k: usize) -> usize {
    2 * k + 3
}

/// L² projection of `f` onto `P_degree(K)` in the scaled monomial basis of
/// `poly`.
pub fn l2_project(f: impl Fn(Vec2) -> f64, poly: &Polygon, degree: usize) -> Result<Vec<f64>> {
    let basis = ScaledMonomials::on(poly, degree);
    let quad = polygon_quadrature(poly, cell_quadrature_degree(degree))?;
    l2_project_with(&basis, &quad, f)
}

/// Basis of the L²-orthogonal complement of `∇P_{k+1}` in `[P_k]²`.
///
/// Members start from `x⊥ m_β`, `|β| <= k - 1`, have their L² projection on
/// `∇P_{k+1}(K)` removed and are rescaled to an RMS value of `1/h_K`, so the
/// associated moments scale like the gradient moments.
#[derive(Debug, Clone)]
pub struct GPerpBasis {
    pub k: usize,
    /// Coefficients of each member in `[P_k]²`.
    pub members: Vec<Vec<f64>>,
}

impl GPerpBasis {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn build(basis_k: &ScaledMonomials, quad: &QuadratureRule) -> Result<Self> {
        let k = basis_k.degree;
        if k == 0 {
            return Ok(GPerpBasis {
                k,
                members: Vec::new(),
            });
        }
        let vb = VectorPolyBasis::new(basis_k.clone());
        let mass = vb.mass_matrix(quad);
        let grads = gradient_columns(basis_k);
        // project seeds onto span(grads) and subtract
        let gram = grads.transpose() * &mass * &grads;
        let fac = SpdFactor::new(&gram, "gradient Gram matrix")?;
        let members = exponents(k - 1)
            .into_iter()
            .map(|beta| {
                let seed = DVector::from_vec(x_perp_monomial(beta, k));
                let coef = fac.solve_vec(&(grads.transpose() * (&mass * &seed)));
                let eta = &seed - &grads * coef;
                let norm = (eta.transpose() * &mass * &eta)[0].sqrt();
                let eta = eta * (quad.measure().sqrt() / (norm * basis_k.scale));
                eta.iter().copied().collect()
            })
            .collect();
        Ok(GPerpBasis { k, members })
    }
}

/// Columns are `∇m` for `m` in the degree-(k+1) basis without the constant,
/// expressed in `[P_k]²`.
pub fn gradient_columns(basis_k: &ScaledMonomials) -> DMatrix<f64> {
    let up = basis_k.with_degree(basis_k.degree + 1);
    let n = up.len();
    let rows = 2 * basis_k.len();
    let mut g = DMatrix::zeros(rows, n - 1);
    for l in 1..n {
        let mut e = vec![0.0; n];
        e[l] = 1.0;
        let c = grad_coeffs(&up, &e);
        for (r, v) in c.iter().enumerate() {
            g[(r, l - 1)] = *v;
        }
    }
    g
}

pub fn gperp_basis(poly: &Polygon, k: usize) -> Result<GPerpBasis> {
    let basis = ScaledMonomials::on(poly, k);
    let quad = polygon_quadrature(poly, cell_quadrature_degree(k))?;
    GPerpBasis::build(&basis, &quad)
}

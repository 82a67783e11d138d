//! Polygon primitives, star-point sub-triangulation and quadrature on
//! polygons and straight edges.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::Vec2;

/// A simple polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Vec2>,
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

fn triangle_area(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    0.5 * cross(b - a, c - a)
}

fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2, tol: f64) -> bool {
    let d1 = cross(p2 - p1, q1 - p1);
    let d2 = cross(p2 - p1, q2 - p1);
    let d3 = cross(q2 - q1, p1 - q1);
    let d4 = cross(q2 - q1, p2 - q1);
    ((d1 > tol && d2 < -tol) || (d1 < -tol && d2 > tol))
        && ((d3 > tol && d4 < -tol) || (d3 < -tol && d4 > tol))
}

impl Polygon {
    /// Builds a polygon, checking the vertex count, orientation, distinct
    /// consecutive vertices and simplicity.
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::InvalidPolygon(format!(
                "{n} vertices, need at least 3"
            )));
        }
        if vertices
            .iter()
            .any(|v| !v.x.is_finite() || !v.y.is_finite())
        {
            return Err(Error::InvalidPolygon("non-finite vertex".into()));
        }
        let poly = Polygon { vertices };
        let diam = poly.diameter();
        for i in 0..n {
            let (a, b) = poly.edge(i);
            if (b - a).norm() <= 1e-14 * diam {
                return Err(Error::InvalidPolygon(format!(
                    "vertices {i} and {} coincide",
                    (i + 1) % n
                )));
            }
        }
        let area = poly.signed_area();
        if area.is_nan() || area <= 1e-14 * diam * diam {
            return Err(Error::InvalidPolygon(format!(
                "signed area {area:e} is not positive"
            )));
        }
        let tol = 1e-14 * diam * diam;
        for i in 0..n {
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (a, b) = poly.edge(i);
                let (c, d) = poly.edge(j);
                if segments_intersect(a, b, c, d, tol) {
                    return Err(Error::InvalidPolygon(format!("edges {i} and {j} cross")));
                }
            }
        }
        Ok(poly)
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edge `i` runs from vertex `i` to vertex `i + 1` (cyclically).
    pub fn edge(&self, i: usize) -> (Vec2, Vec2) {
        let n = self.vertices.len();
        (self.vertices[i % n], self.vertices[(i + 1) % n])
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n)
            .map(|i| cross(self.vertices[i], self.vertices[(i + 1) % n]))
            .sum::<f64>()
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Largest distance between two vertices.
    pub fn diameter(&self) -> f64 {
        let v = &self.vertices;
        let mut d2: f64 = 0.0;
        for i in 0..v.len() {
            for j in (i + 1)..v.len() {
                d2 = d2.max((v[i] - v[j]).norm_squared());
            }
        }
        d2.sqrt()
    }

    /// Area centroid.
    pub fn centroid(&self) -> Vec2 {
        let n = self.vertices.len();
        // shift to the first vertex for round-off
        let o = self.vertices[0];
        let mut c = Vec2::zeros();
        let mut a = 0.0;
        for i in 0..n {
            let p = self.vertices[i] - o;
            let q = self.vertices[(i + 1) % n] - o;
            let w = cross(p, q);
            a += w;
            c += (p + q) * w;
        }
        o + c / (3.0 * a)
    }

    pub fn vertex_centroid(&self) -> Vec2 {
        self.vertices.iter().fold(Vec2::zeros(), |s, v| s + v) / self.vertices.len() as f64
    }

    /// Outward unit normal of edge `i`.
    pub fn outward_normal(&self, i: usize) -> Vec2 {
        let (a, b) = self.edge(i);
        let t = (b - a).normalize();
        Vec2::new(t.y, -t.x)
    }

    pub fn longest_edge(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                let (a, b) = self.edge(i);
                (b - a).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn shortest_edge(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                let (a, b) = self.edge(i);
                (b - a).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn fan_is_positive(&self, star: Vec2) -> bool {
        let tol = 1e-13 * self.area();
        (0..self.len()).all(|i| {
            let (a, b) = self.edge(i);
            triangle_area(a, b, star) > tol
        })
    }
}

/// Fan of triangles around an interior star point.
#[derive(Debug, Clone)]
pub struct SubTriangulation {
    pub star_point: Vec2,
    pub triangles: Vec<[Vec2; 3]>,
}

impl SubTriangulation {
    pub fn total_area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| triangle_area(t[0], t[1], t[2]))
            .sum()
    }
}

/// Joins every vertex of `p` to a star point. The vertex centroid is tried
/// first, then the area centroid, then the centre of the visibility kernel.
pub fn sub_triangulate(p: &Polygon) -> Result<SubTriangulation> {
    let fan = |star: Vec2| SubTriangulation {
        star_point: star,
        triangles: (0..p.len())
            .map(|i| {
                let (a, b) = p.edge(i);
                [a, b, star]
            })
            .collect(),
    };
    let vc = p.vertex_centroid();
    if p.fan_is_positive(vc) {
        return Ok(fan(vc));
    }
    let ac = p.centroid();
    if p.fan_is_positive(ac) {
        return Ok(fan(ac));
    }
    kernel_center(p)
        .filter(|&c| p.fan_is_positive(c))
        .map(fan)
        .ok_or(Error::StarPointNotInterior)
}

/// Vertex average of the visibility kernel, obtained by clipping the
/// polygon against the inner half-plane of each of its edges.
fn kernel_center(p: &Polygon) -> Option<Vec2> {
    let mut kernel = p.vertices().to_vec();
    for i in 0..p.len() {
        let (a, b) = p.edge(i);
        let side = |x: Vec2| cross(b - a, x - a);
        let mut next = Vec::with_capacity(kernel.len() + 1);
        for j in 0..kernel.len() {
            let (c, d) = (kernel[j], kernel[(j + 1) % kernel.len()]);
            let (sc, sd) = (side(c), side(d));
            if sc >= 0.0 {
                next.push(c);
            }
            if (sc >= 0.0) != (sd >= 0.0) {
                next.push(c + (d - c) * (sc / (sc - sd)));
            }
        }
        if next.len() < 3 {
            return None;
        }
        kernel = next;
    }
    let area: f64 = (0..kernel.len())
        .map(|j| cross(kernel[j], kernel[(j + 1) % kernel.len()]))
        .sum::<f64>()
        * 0.5;
    if area <= 1e-12 * p.area() {
        return None;
    }
    Some(kernel.iter().sum::<Vec2>() / kernel.len() as f64)
}

/// Points and weights of a quadrature rule.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Vec2) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] with `n` points.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Collapsed (Duffy) Gauss rule on the reference triangle (0,0),(1,0),(0,1),
/// exact for total degree `degree`. Points are barycentric-free (ξ, η).
fn reference_triangle_rule(degree: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    let n = (degree + 2).div_ceil(2).max(1);
    let (x, w) = gauss_legendre(n);
    let mut pts = Vec::with_capacity(n * n);
    let mut wts = Vec::with_capacity(n * n);
    for i in 0..n {
        let u = 0.5 * (x[i] + 1.0);
        for j in 0..n {
            let v = 0.5 * (x[j] + 1.0);
            pts.push([u, v * (1.0 - u)]);
            wts.push(0.25 * w[i] * w[j] * (1.0 - u));
        }
    }
    (pts, wts)
}

/// Quadrature on `p` exact for bivariate polynomials of total degree
/// `degree`, obtained by mapping a reference-triangle rule to every
/// triangle of the star-point fan.
pub fn polygon_quadrature(p: &Polygon, degree: usize) -> Result<QuadratureRule> {
    let tri = sub_triangulate(p)?;
    Ok(triangulation_quadrature(&tri, degree))
}

pub fn triangulation_quadrature(tri: &SubTriangulation, degree: usize) -> QuadratureRule {
    let (rp, rw) = reference_triangle_rule(degree);
    let mut points = Vec::with_capacity(rp.len() * tri.triangles.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for t in &tri.triangles {
        let (a, b, c) = (t[0], t[1], t[2]);
        let jac = 2.0 * triangle_area(a, b, c);
        for (r, w) in rp.iter().zip(&rw) {
            points.push(a + (b - a) * r[0] + (c - a) * r[1]);
            weights.push(w * jac);
        }
    }
    QuadratureRule {
        points,
        weights,
        exactness_degree: degree,
    }
}

/// Gauss rule on the segment `a`–`b` with exactness at least `degree`.
pub fn edge_quadrature(a: Vec2, b: Vec2, degree: usize) -> QuadratureRule {
    let n = (degree + 2) / 2;
    let (x, w) = gauss_legendre(n.max(1));
    let len = (b - a).norm();
    QuadratureRule {
        points: x.iter().map(|&t| a + (b - a) * (0.5 * (t + 1.0))).collect(),
        weights: w.iter().map(|&wi| 0.5 * len * wi).collect(),
        exactness_degree: 2 * n.max(1) - 1,
    }
}

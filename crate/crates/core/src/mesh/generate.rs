use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BoundaryLabel, PolyMesh};
use crate::Vec2;

/// Distortion amplitude relative to the cell size.
pub const DISTORTION_AMPLITUDE: f64 = 0.08;

/// Labels of the unit-square tests: Dirichlet on `y = 0` and `x = 0`,
/// Neumann on the remaining two sides.
pub fn unit_square_labels(a: Vec2, b: Vec2) -> BoundaryLabel {
    let tol = 1e-12;
    if (a.y.abs() < tol && b.y.abs() < tol) || (a.x.abs() < tol && b.x.abs() < tol) {
        BoundaryLabel::Dirichlet
    } else {
        BoundaryLabel::Neumann
    }
}

fn lshape_labels(a: Vec2, b: Vec2) -> BoundaryLabel {
    let tol = 1e-12;
    if ((a.x + 1.0).abs() < tol && (b.x + 1.0).abs() < tol)
        || ((a.y + 1.0).abs() < tol && (b.y + 1.0).abs() < tol)
    {
        BoundaryLabel::Neumann
    } else {
        BoundaryLabel::Dirichlet
    }
}

/// Merges points that agree to 1e-10 after rounding.
#[derive(Default)]
struct VertexPool {
    points: Vec<Vec2>,
    index: HashMap<(i64, i64), usize>,
}

impl VertexPool {
    fn insert(&mut self, p: Vec2) -> usize {
        let key = ((p.x * 1e10).round() as i64, (p.y * 1e10).round() as i64);
        *self.index.entry(key).or_insert_with(|| {
            self.points.push(p);
            self.points.len() - 1
        })
    }
}

/// Clips a convex polygon against the half plane `sign * (p[axis] - value) >= 0`.
fn clip(poly: &[Vec2], axis: usize, value: f64, sign: f64) -> Vec<Vec2> {
    let inside = |p: &Vec2| sign * (p[axis] - value) >= -1e-14;
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let cur = poly[i];
        let next = poly[(i + 1) % poly.len()];
        let (ci, ni) = (inside(&cur), inside(&next));
        if ci {
            out.push(cur);
        }
        if ci != ni {
            let t = (value - cur[axis]) / (next[axis] - cur[axis]);
            let mut p = cur + (next - cur) * t;
            p[axis] = value;
            out.push(p);
        }
    }
    out
}

fn shoelace(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| poly[i].x * poly[(i + 1) % n].y - poly[(i + 1) % n].x * poly[i].y)
        .sum::<f64>()
}

/// Clipped honeycomb on the unit square with about `n` cells across.
///
/// Pointy-top hexagons are centred on rows `y = r / m`; the sides `x = 0`,
/// `x = 1`, `y = 0` and `y = 1` pass through hexagon centres or along
/// hexagon sides, so boundary cells are quadrilaterals or pentagons and no
/// slivers appear. Labels follow [`unit_square_labels`].
pub fn generate_hex_mesh(n: usize) -> PolyMesh {
    assert!(n >= 2, "hex mesh needs n >= 2");
    let w = 0.5 / n as f64;
    let rows = ((2.0 * n as f64) / 3f64.sqrt()).round().max(1.0) as usize;
    let dy = 1.0 / rows as f64;
    let shape = [
        Vec2::new(0.0, 2.0 * dy / 3.0),
        Vec2::new(-w, dy / 3.0),
        Vec2::new(-w, -dy / 3.0),
        Vec2::new(0.0, -2.0 * dy / 3.0),
        Vec2::new(w, -dy / 3.0),
        Vec2::new(w, dy / 3.0),
    ];
    let min_area = 1e-6 * w * dy;
    let mut pool = VertexPool::default();
    let mut cells = Vec::new();
    for r in 0..=rows {
        let y = r as f64 * dy;
        let (first, offset) = if r % 2 == 0 { (0i64, 0.0) } else { (-1i64, w) };
        for j in first..=(n as i64) {
            let x = offset + 2.0 * w * j as f64;
            let mut poly: Vec<Vec2> = shape.iter().map(|s| Vec2::new(x, y) + s).collect();
            poly = clip(&poly, 0, 0.0, 1.0);
            poly = clip(&poly, 0, 1.0, -1.0);
            poly = clip(&poly, 1, 0.0, 1.0);
            poly = clip(&poly, 1, 1.0, -1.0);
            if poly.len() < 3 || shoelace(&poly) < min_area {
                continue;
            }
            let mut ids: Vec<usize> = poly.iter().map(|&p| pool.insert(p)).collect();
            ids.dedup();
            while ids.len() > 1 && ids.first() == ids.last() {
                ids.pop();
            }
            cells.push(ids);
        }
    }
    PolyMesh::with_labels(pool.points, cells, unit_square_labels)
        .expect("hex generator produced an invalid mesh")
}

/// Tensor grid of `n x n` squares on the unit square.
pub fn generate_quad_mesh(n: usize) -> PolyMesh {
    grid_mesh(n, |p| p, |_| 0.0)
}

/// `n x n` grid on the unit square mapped by
/// `(x, y) -> (x, y) + 0.08 s sin(2 pi x) sin(2 pi y) (1, 1)`.
pub fn generate_distorted_quad_mesh(n: usize) -> PolyMesh {
    grid_mesh(
        n,
        |p| p,
        |p| (2.0 * PI * p.x).sin() * (2.0 * PI * p.y).sin(),
    )
}

/// Distorted grid with an extra random shift of interior vertices of at
/// most `0.1 s` per coordinate, drawn from a seeded generator.
pub fn generate_jittered_quad_mesh(n: usize, seed: u64) -> PolyMesh {
    let base = generate_distorted_quad_mesh(n);
    let s = 1.0 / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let on_boundary = base.boundary_vertices();
    let vertices: Vec<Vec2> = base
        .vertices()
        .iter()
        .zip(on_boundary)
        .map(|(&v, b)| {
            let jx: f64 = rng.random_range(-0.1..0.1);
            let jy: f64 = rng.random_range(-0.1..0.1);
            if b {
                v
            } else {
                v + Vec2::new(jx, jy) * s
            }
        })
        .collect();
    PolyMesh::with_labels(vertices, base.cells().to_vec(), unit_square_labels)
        .expect("jittered grid produced an invalid mesh")
}

fn grid_mesh(n: usize, map: impl Fn(Vec2) -> Vec2, bump: impl Fn(Vec2) -> f64) -> PolyMesh {
    assert!(n >= 1);
    let s = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let p = map(Vec2::new(i as f64 * s, j as f64 * s));
            let d = DISTORTION_AMPLITUDE * s * bump(p);
            vertices.push(p + Vec2::new(d, d));
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let cells = (0..n)
        .flat_map(|j| {
            (0..n).map(move |i| vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)])
        })
        .collect();
    PolyMesh::with_labels(vertices, cells, unit_square_labels)
        .expect("grid generator produced an invalid mesh")
}

/// Distorted quadrilaterals on `(-1, 1)^2 \ [0, 1]^2`, `n x n` grid spacing
/// before removing the upper-right quadrant. Neumann on `x = -1` and
/// `y = -1`, Dirichlet elsewhere.
pub fn generate_lshape_mesh(n: usize) -> PolyMesh {
    assert!(
        n >= 2 && n.is_multiple_of(2),
        "L-shape mesh needs an even n >= 2"
    );
    let s = 2.0 / n as f64;
    let half = n / 2;
    let mut index = vec![usize::MAX; (n + 1) * (n + 1)];
    let mut vertices = Vec::new();
    let mut cells = Vec::new();
    let mut vid = |i: usize, j: usize, vertices: &mut Vec<Vec2>| {
        let k = j * (n + 1) + i;
        if index[k] == usize::MAX {
            let x = -1.0 + i as f64 * s;
            let y = -1.0 + j as f64 * s;
            let d = DISTORTION_AMPLITUDE * s * (PI * (x + 1.0)).sin() * (PI * (y + 1.0)).sin();
            vertices.push(Vec2::new(x + d, y + d));
            index[k] = vertices.len() - 1;
        }
        index[k]
    };
    for j in 0..n {
        for i in 0..n {
            if i >= half && j >= half {
                continue;
            }
            let c = vec![
                vid(i, j, &mut vertices),
                vid(i + 1, j, &mut vertices),
                vid(i + 1, j + 1, &mut vertices),
                vid(i, j + 1, &mut vertices),
            ];
            cells.push(c);
        }
    }
    PolyMesh::with_labels(vertices, cells, lshape_labels)
        .expect("L-shape generator produced an invalid mesh")
}

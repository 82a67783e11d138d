use std::collections::HashMap;

use super::{MarkSet, PolyMesh};
use crate::error::{Error, Result};
use crate::geometry::Polygon;

/// Splits every marked cell into quadrilaterals joining its edge midpoints
/// to its barycentre. Unmarked neighbours pick up the new midpoints as
/// extra vertices of their cycles. Child boundary edges keep the label of
/// the edge they came from.
pub fn refine(mesh: &PolyMesh, marked: &MarkSet) -> Result<PolyMesh> {
    if let Some(&bad) = marked.cells().iter().find(|&&c| c >= mesh.n_cells()) {
        return Err(Error::InvalidConfig(format!(
            "marked cell {bad} out of range"
        )));
    }
    let mut vertices = mesh.vertices().to_vec();
    // midpoint vertex per split edge
    let mut midpoint: HashMap<usize, usize> = HashMap::new();
    for &c in marked.cells() {
        for &e in mesh.cell_edges(c) {
            midpoint.entry(e).or_insert_with(|| {
                let [a, b] = mesh.edge(e).vertices;
                vertices.push((mesh.vertices()[a] + mesh.vertices()[b]) * 0.5);
                vertices.len() - 1
            });
        }
    }

    let mut cells = Vec::with_capacity(mesh.n_cells() + 3 * marked.len());
    for (c, cyc) in mesh.cells().iter().enumerate() {
        let n = cyc.len();
        let edges = mesh.cell_edges(c);
        if marked.contains(c) {
            vertices.push(mesh.polygon(c).centroid());
            let center = vertices.len() - 1;
            for i in 0..n {
                let prev = midpoint[&edges[(i + n - 1) % n]];
                let next = midpoint[&edges[i]];
                let child = vec![prev, cyc[i], next, center];
                Polygon::new(child.iter().map(|&v| vertices[v]).collect()).map_err(|e| {
                    Error::RefinementGeometry {
                        cell: c,
                        message: e.to_string(),
                    }
                })?;
                cells.push(child);
            }
        } else {
            let mut cycle = Vec::with_capacity(n);
            for i in 0..n {
                cycle.push(cyc[i]);
                if let Some(&m) = midpoint.get(&edges[i]) {
                    cycle.push(m);
                }
            }
            cells.push(cycle);
        }
    }

    // children of a labelled edge carry the parent's label
    let mut labels = HashMap::new();
    for (e, edge) in mesh.edges().iter().enumerate() {
        if let Some(label) = edge.label {
            let [a, b] = edge.vertices;
            match midpoint.get(&e) {
                Some(&m) => {
                    labels.insert((a, m), label);
                    labels.insert((m, b), label);
                }
                None => {
                    labels.insert((a, b), label);
                }
            }
        }
    }
    PolyMesh::new(vertices, cells, &labels).map_err(|e| Error::RefinementGeometry {
        cell: usize::MAX,
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{
        generate_distorted_quad_mesh, generate_hex_mesh, generate_quad_mesh, BoundaryLabel,
    };
    use crate::Vec2;

    #[test]
    fn one_marked_square_creates_hanging_node() {
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(2.0, 1.0),
        ];
        let m = PolyMesh::with_labels(v, vec![vec![0, 1, 4, 3], vec![1, 2, 5, 4]], |_, _| {
            BoundaryLabel::Dirichlet
        })
        .unwrap();
        let r = refine(&m, &MarkSet::new(vec![0])).unwrap();
        assert_eq!(r.n_cells(), 5);
        assert_eq!(r.polygon(4).len(), 5);
        assert!((r.total_area() - 2.0).abs() < 1e-14);
        assert!(r
            .edges()
            .iter()
            .all(|e| e.sides.len() == 1 || e.sides.len() == 2));
        assert_eq!(r.count_label(BoundaryLabel::Dirichlet), 9);
    }

    #[test]
    fn uniform_refinement_of_grid() {
        let n = 3;
        let m = generate_quad_mesh(n);
        let r = refine(&m, &MarkSet::all(m.n_cells())).unwrap();
        assert_eq!(r.n_cells(), 4 * n * n);
        assert!(r.polygons().iter().all(|p| p.len() == 4));
        assert!((r.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn area_conserved_and_h_shrinks() {
        let mut m = generate_hex_mesh(4);
        let mut h = m.h_max();
        for _ in 0..3 {
            m = refine(&m, &MarkSet::all(m.n_cells())).unwrap();
            assert!((m.total_area() - 1.0).abs() < 1e-12);
            let h2 = m.h_max();
            assert!(h2 <= 0.75 * h, "{h2} vs {h}");
            h = h2;
        }
        let mut m = generate_distorted_quad_mesh(4);
        let mut h = m.h_max();
        for _ in 0..3 {
            m = refine(&m, &MarkSet::all(m.n_cells())).unwrap();
            let h2 = m.h_max();
            assert!(h2 <= 0.75 * h);
            h = h2;
        }
    }

    #[test]
    fn repeated_local_refinement_keeps_invariants() {
        let mut m = generate_hex_mesh(3);
        for step in 0..5 {
            // refine the cell nearest to the origin
            let c = (0..m.n_cells())
                .min_by(|&a, &b| {
                    m.polygon(a)
                        .centroid()
                        .norm()
                        .partial_cmp(&m.polygon(b).centroid().norm())
                        .unwrap()
                })
                .unwrap();
            let parent_area = m.polygon(c).area();
            let before = m.total_area();
            let r = refine(&m, &MarkSet::new(vec![c])).unwrap();
            assert!((r.total_area() - before).abs() < 1e-12, "step {step}");
            let children: f64 = (c..c + m.polygon(c).len())
                .map(|k| r.polygon(k).area())
                .sum();
            assert!((children - parent_area).abs() < 1e-12 * parent_area.max(1.0));
            m = r;
        }
    }
}

//! Polygonal meshes: connectivity, boundary labels, generators,
//! midpoint/barycenter refinement and a plain-text file format.
//!
//! Hanging nodes are not a separate entity. A vertex sitting in the middle
//! of a neighbour's side is simply an extra (collinear) vertex of that
//! neighbour's cycle, so every edge of the mesh is shared by at most two
//! cells.

mod generate;
mod io;
mod refine;

use std::collections::HashMap;
use std::fmt;

pub use generate::{
    generate_distorted_quad_mesh, generate_hex_mesh, generate_jittered_quad_mesh,
    generate_lshape_mesh, generate_quad_mesh, unit_square_labels,
};
pub use io::{read_mesh, write_mesh};
pub use refine::refine;

use crate::error::{Error, Result};
use crate::geometry::Polygon;
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryLabel {
    Dirichlet,
    Neumann,
}

impl BoundaryLabel {
    pub fn code(self) -> char {
        match self {
            BoundaryLabel::Dirichlet => 'D',
            BoundaryLabel::Neumann => 'N',
        }
    }
}

impl fmt::Display for BoundaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// One side of an edge: the cell and the position of the edge in the
/// cell's cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeSide {
    pub cell: usize,
    pub local: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshEdge {
    /// Endpoints with `vertices[0] < vertices[1]`; the global tangent runs
    /// from the first to the second.
    pub vertices: [usize; 2],
    /// One side for boundary edges, two for interior edges.
    pub sides: Vec<EdgeSide>,
    pub label: Option<BoundaryLabel>,
}

impl MeshEdge {
    pub fn is_boundary(&self) -> bool {
        self.sides.len() == 1
    }
}

/// Cells flagged for refinement; sorted, no duplicates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MarkSet(Vec<usize>);

impl MarkSet {
    pub fn new(mut cells: Vec<usize>) -> Self {
        cells.sort_unstable();
        cells.dedup();
        MarkSet(cells)
    }

    pub fn all(n_cells: usize) -> Self {
        MarkSet((0..n_cells).collect())
    }

    pub fn cells(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, c: usize) -> bool {
        self.0.binary_search(&c).is_ok()
    }
}

/// Immutable polygonal mesh.
#[derive(Debug, Clone)]
pub struct PolyMesh {
    vertices: Vec<Vec2>,
    cells: Vec<Vec<usize>>,
    polygons: Vec<Polygon>,
    edges: Vec<MeshEdge>,
    cell_edges: Vec<Vec<usize>>,
    edge_index: HashMap<(usize, usize), usize>,
}

impl PartialEq for PolyMesh {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.cells == other.cells && self.edges == other.edges
    }
}

impl PolyMesh {
    /// Builds a mesh from vertices, CCW cell cycles and labels for every
    /// boundary edge (keyed by unordered vertex pair).
    pub fn new(
        vertices: Vec<Vec2>,
        cells: Vec<Vec<usize>>,
        labels: &HashMap<(usize, usize), BoundaryLabel>,
    ) -> Result<Self> {
        let mut mesh = Self::unlabeled(vertices, cells)?;
        for (&(a, b), &label) in labels {
            let key = (a.min(b), a.max(b));
            let e = mesh
                .find_edge(key.0, key.1)
                .ok_or_else(|| Error::InvalidMesh(format!("label on unknown edge ({a}, {b})")))?;
            if !mesh.edges[e].is_boundary() {
                return Err(Error::InvalidMesh(format!(
                    "label on interior edge ({a}, {b})"
                )));
            }
            mesh.edges[e].label = Some(label);
        }
        if let Some(e) = mesh
            .edges
            .iter()
            .find(|e| e.is_boundary() && e.label.is_none())
        {
            return Err(Error::InvalidMesh(format!(
                "boundary edge ({}, {}) has no label",
                e.vertices[0], e.vertices[1]
            )));
        }
        Ok(mesh)
    }

    /// Builds a mesh and labels its boundary edges from their endpoints.
    pub fn with_labels(
        vertices: Vec<Vec2>,
        cells: Vec<Vec<usize>>,
        label: impl Fn(Vec2, Vec2) -> BoundaryLabel,
    ) -> Result<Self> {
        let mut mesh = Self::unlabeled(vertices, cells)?;
        mesh.relabel_boundary(label);
        Ok(mesh)
    }

    fn unlabeled(vertices: Vec<Vec2>, cells: Vec<Vec<usize>>) -> Result<Self> {
        let mut polygons = Vec::with_capacity(cells.len());
        for (c, cyc) in cells.iter().enumerate() {
            if let Some(&bad) = cyc.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!(
                    "cell {c} references vertex {bad}"
                )));
            }
            let poly = Polygon::new(cyc.iter().map(|&v| vertices[v]).collect())
                .map_err(|e| Error::InvalidMesh(format!("cell {c}: {e}")))?;
            polygons.push(poly);
        }
        let mut edges: Vec<MeshEdge> = Vec::new();
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (c, cyc) in cells.iter().enumerate() {
            let n = cyc.len();
            let mut ce = Vec::with_capacity(n);
            for i in 0..n {
                let (a, b) = (cyc[i], cyc[(i + 1) % n]);
                let key = (a.min(b), a.max(b));
                let id = *index.entry(key).or_insert_with(|| {
                    edges.push(MeshEdge {
                        vertices: [key.0, key.1],
                        sides: Vec::new(),
                        label: None,
                    });
                    edges.len() - 1
                });
                let edge = &mut edges[id];
                if edge.sides.len() == 2 {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({}, {}) has more than two cells",
                        key.0, key.1
                    )));
                }
                if let Some(other) = edge.sides.first() {
                    let ocyc = &cells[other.cell];
                    let oa = ocyc[other.local];
                    if oa == a {
                        return Err(Error::InvalidMesh(format!(
                            "cells {} and {c} traverse edge ({a}, {b}) in the same direction",
                            other.cell
                        )));
                    }
                }
                edge.sides.push(EdgeSide { cell: c, local: i });
                ce.push(id);
            }
            cell_edges.push(ce);
        }
        Ok(PolyMesh {
            vertices,
            cells,
            polygons,
            edges,
            cell_edges,
            edge_index: index,
        })
    }

    /// Re-assigns every boundary label from the edge endpoints.
    pub fn relabel_boundary(&mut self, label: impl Fn(Vec2, Vec2) -> BoundaryLabel) {
        for e in &mut self.edges {
            if e.is_boundary() {
                e.label = Some(label(
                    self.vertices[e.vertices[0]],
                    self.vertices[e.vertices[1]],
                ));
            }
        }
    }

    pub fn relabeled(mut self, label: impl Fn(Vec2, Vec2) -> BoundaryLabel) -> Self {
        self.relabel_boundary(label);
        self
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[MeshEdge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &MeshEdge {
        &self.edges[e]
    }

    /// Global edge ids of a cell, in cycle order.
    pub fn cell_edges(&self, c: usize) -> &[usize] {
        &self.cell_edges[c]
    }

    pub fn polygon(&self, c: usize) -> &Polygon {
        &self.polygons[c]
    }

    pub fn polygons(&self) -> &[Polygon] {
        &self.polygons
    }

    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&(a.min(b), a.max(b))).copied()
    }

    /// Whether the global tangent of local edge `local` of cell `c` agrees
    /// with the counter-clockwise traversal of the cell.
    pub fn edge_agrees_with_cell(&self, c: usize, local: usize) -> bool {
        let cyc = &self.cells[c];
        cyc[local] < cyc[(local + 1) % cyc.len()]
    }

    pub fn boundary_labels(&self) -> Vec<((usize, usize), BoundaryLabel)> {
        self.edges
            .iter()
            .filter_map(|e| e.label.map(|l| ((e.vertices[0], e.vertices[1]), l)))
            .collect()
    }

    pub fn count_label(&self, label: BoundaryLabel) -> usize {
        self.edges.iter().filter(|e| e.label == Some(label)).count()
    }

    pub fn total_area(&self) -> f64 {
        self.polygons.iter().map(Polygon::area).sum()
    }

    /// Largest cell diameter.
    pub fn h_max(&self) -> f64 {
        self.polygons
            .iter()
            .map(Polygon::diameter)
            .fold(0.0, f64::max)
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices;
        (self.vertices[b] - self.vertices[a]).norm()
    }

    /// Number of cells incident to each vertex.
    pub fn vertex_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertices.len()];
        for e in &self.edges {
            deg[e.vertices[0]] += 1;
            deg[e.vertices[1]] += 1;
        }
        deg
    }

    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut on = vec![false; self.vertices.len()];
        for e in self.edges.iter().filter(|e| e.is_boundary()) {
            on[e.vertices[0]] = true;
            on[e.vertices[1]] = true;
        }
        on
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_squares() -> PolyMesh {
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(2.0, 1.0),
        ];
        PolyMesh::with_labels(v, vec![vec![0, 1, 4, 3], vec![1, 2, 5, 4]], |_, _| {
            BoundaryLabel::Dirichlet
        })
        .unwrap()
    }

    #[test]
    fn connectivity() {
        let m = two_squares();
        assert_eq!(m.n_edges(), 7);
        let interior: Vec<_> = m.edges().iter().filter(|e| !e.is_boundary()).collect();
        assert_eq!(interior.len(), 1);
        assert_eq!(interior[0].vertices, [1, 4]);
        assert_eq!(m.count_label(BoundaryLabel::Dirichlet), 6);
        assert!(m.edge_agrees_with_cell(0, 1));
        assert!(!m.edge_agrees_with_cell(1, 3));
    }

    #[test]
    fn third_cell_on_edge_rejected() {
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.5, 1.0),
            Vec2::new(0.5, -1.0),
            Vec2::new(0.5, 2.0),
        ];
        let r = PolyMesh::with_labels(
            v,
            vec![vec![0, 1, 2], vec![1, 0, 3], vec![0, 1, 4]],
            |_, _| BoundaryLabel::Dirichlet,
        );
        assert!(r.is_err());
    }

    #[test]
    fn missing_label_rejected() {
        let v = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ];
        let mut labels = HashMap::new();
        labels.insert((0, 1), BoundaryLabel::Dirichlet);
        assert!(PolyMesh::new(v, vec![vec![0, 1, 2]], &labels).is_err());
    }

    #[test]
    fn markset_sorted_unique() {
        let m = MarkSet::new(vec![3, 1, 3, 0]);
        assert_eq!(m.cells(), &[0, 1, 3]);
        assert!(m.contains(3) && !m.contains(2));
    }
}

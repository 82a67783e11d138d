//! Fixtures shared by the benchmarks.

use mvem_core::cases::{CaseId, MeshKind, TestCase};
use mvem_core::geometry::Polygon;
use mvem_core::mesh::PolyMesh;
use mvem_core::Vec2;

/// Regular hexagon of circumradius `r` centred at the origin.
pub fn hexagon(r: f64) -> Polygon {
    let v = (0..6)
        .map(|i| {
            let t = i as f64 * std::f64::consts::FRAC_PI_3;
            Vec2::new(r * t.cos(), r * t.sin())
        })
        .collect();
    Polygon::new(v).expect("hexagon is a valid polygon")
}

pub fn smooth_case() -> TestCase {
    TestCase::new(CaseId::Test1)
}

pub fn hex_mesh(case: &TestCase, n: usize) -> PolyMesh {
    case.mesh(MeshKind::Hex, n, None)
        .expect("hex mesh covers the unit square")
}

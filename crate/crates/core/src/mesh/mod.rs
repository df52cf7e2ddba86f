//! Polygonal meshes with globally oriented edges.
//!
//! Every edge is stored once with its endpoints in ascending vertex order.
//! Its tangent points from the lower to the higher vertex id and its normal is
//! the tangent rotated clockwise, `n = (t_y, -t_x)`. A counterclockwise cell
//! that walks the edge from the lower to the higher id has the edge normal as
//! outward normal and gets sign `+1` (it is the *left* cell of the edge); the
//! other incident cell gets `-1`.

mod generate;
mod io;
mod quality;

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::quadrature::{cross, polygon_rule};
use crate::Point2;

pub use generate::{cook_domain, generate_mesh, voronoi_cells, Domain, MeshKind, LLOYD_ITERATIONS};
pub use io::{read_mesh, write_mesh};
pub use quality::{check_assumptions, CellQuality, QualityReport};

/// Geometric quantities of a polygon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub area: f64,
    pub centroid: Point2,
    pub diameter: f64,
    /// `∫_E (x - x_C)²`, `∫_E (y - y_C)²`, `∫_E (x - x_C)(y - y_C)`
    pub second_moments: [f64; 3],
}

impl CellGeometry {
    /// `m_E = ∫_E |x - x_C|²`
    pub fn polar_moment(&self) -> f64 {
        self.second_moments[0] + self.second_moments[1]
    }
}

/// Area, centroid, diameter and second moments of a counterclockwise polygon.
///
/// Area and centroid come from the shoelace formulas; the second moments are
/// integrated exactly with a degree-2 rule on the centroid fan.
pub fn polygon_metrics(vertices: &[Point2]) -> Result<CellGeometry> {
    let n = vertices.len();
    if n < 3 {
        return Err(Error::TooFewVertices { cell: usize::MAX, count: n });
    }
    // shift to the first vertex to limit cancellation
    let o = vertices[0];
    let mut area2 = 0.0;
    let mut cx = Point2::zeros();
    for i in 0..n {
        let a = vertices[i] - o;
        let b = vertices[(i + 1) % n] - o;
        let w = cross(a, b);
        area2 += w;
        cx += (a + b) * w;
    }
    let area = 0.5 * area2;
    if !(area > 0.0) {
        return Err(Error::DegeneratePolygon { cell: usize::MAX, area });
    }
    let centroid = o + cx / (3.0 * area2);
    let mut diameter: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            diameter = diameter.max((vertices[i] - vertices[j]).norm());
        }
    }
    let rule = polygon_rule(vertices, centroid, 2);
    let mut m = [0.0; 3];
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let d = p - centroid;
        m[0] += w * d.x * d.x;
        m[1] += w * d.y * d.y;
        m[2] += w * d.x * d.y;
    }
    Ok(CellGeometry { area, centroid, diameter, second_moments: m })
}

/// Signed shoelace area.
pub fn signed_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    let o = vertices[0];
    0.5 * (0..n).map(|i| cross(vertices[i] - o, vertices[(i + 1) % n] - o)).sum::<f64>()
}

/// A mesh cell: counterclockwise vertex loop and the matching edge loop.
///
/// `edges[k]` joins `vertices[k]` and `vertices[k + 1]`.
#[derive(Debug, Clone)]
pub struct Cell {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
    pub signs: Vec<f64>,
    pub geometry: CellGeometry,
}

impl Cell {
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }
}

#[derive(Debug, Clone)]
pub struct Edge {
    /// `(p, q)` with `p < q`
    pub vertices: [usize; 2],
    pub tangent: Point2,
    pub normal: Point2,
    pub length: f64,
    pub midpoint: Point2,
    /// Cell for which `normal` is outward (sign `+1`).
    pub left_cell: Option<usize>,
    /// Cell for which `normal` is inward (sign `-1`).
    pub right_cell: Option<usize>,
}

impl Edge {
    /// Point at arc coordinate `s ∈ [-1/2, 1/2]`.
    pub fn point_at(&self, s: f64) -> Point2 {
        self.midpoint + self.tangent * (s * self.length)
    }

    pub fn is_boundary(&self) -> bool {
        self.left_cell.is_none() || self.right_cell.is_none()
    }

    /// The only incident cell of a boundary edge, with its sign.
    pub fn boundary_cell(&self) -> Option<(usize, f64)> {
        match (self.left_cell, self.right_cell) {
            (Some(c), None) => Some((c, 1.0)),
            (None, Some(c)) => Some((c, -1.0)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeshMetadata {
    pub kind: Option<MeshKind>,
    pub resolution: usize,
    pub seed: Option<u64>,
    /// Only set for Lloyd-relaxed meshes.
    pub lloyd_converged: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct PolyMesh {
    pub vertices: Vec<Point2>,
    pub cells: Vec<Cell>,
    pub edges: Vec<Edge>,
    pub metadata: MeshMetadata,
}

impl PolyMesh {
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn cell_coords(&self, cell: usize) -> Vec<Point2> {
        self.cells[cell].vertices.iter().map(|&v| self.vertices[v]).collect()
    }

    /// `h̄_e`, the mean edge length.
    pub fn mean_edge_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum::<f64>() / self.edges.len() as f64
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.geometry.area).sum()
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().enumerate().filter(|(_, e)| e.is_boundary()).map(|(i, _)| i)
    }

    /// SHA-256 of the serialized mesh, hex encoded.
    pub fn checksum(&self) -> String {
        let digest = Sha256::digest(write_mesh(self).as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Builds edges, signs and cell metrics from counterclockwise vertex loops.
pub fn build_topology(vertices: Vec<Point2>, loops: Vec<Vec<usize>>) -> Result<PolyMesh> {
    let nv = vertices.len();
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut cells = Vec::with_capacity(loops.len());

    for (ci, lp) in loops.into_iter().enumerate() {
        if lp.len() < 3 {
            return Err(Error::TooFewVertices { cell: ci, count: lp.len() });
        }
        if let Some(&v) = lp.iter().find(|&&v| v >= nv) {
            return Err(Error::VertexOutOfRange { cell: ci, vertex: v, n_vertices: nv });
        }
        let coords: Vec<Point2> = lp.iter().map(|&v| vertices[v]).collect();
        let area = signed_area(&coords);
        if area < 0.0 {
            return Err(Error::NotCounterClockwise { cell: ci });
        }
        let geometry = polygon_metrics(&coords).map_err(|e| match e {
            Error::DegeneratePolygon { area, .. } => Error::DegeneratePolygon { cell: ci, area },
            other => other,
        })?;

        let n = lp.len();
        let mut cell_edges = Vec::with_capacity(n);
        let mut signs = Vec::with_capacity(n);
        for k in 0..n {
            let a = lp[k];
            let b = lp[(k + 1) % n];
            let (p, q) = if a < b { (a, b) } else { (b, a) };
            let forward = a < b;
            let ei = match index.get(&(p, q)) {
                Some(&ei) => {
                    let e = &mut edges[ei];
                    let slot = if forward { &mut e.left_cell } else { &mut e.right_cell };
                    if slot.is_some() {
                        let count = 1 + e.left_cell.is_some() as usize + e.right_cell.is_some() as usize;
                        return Err(if count >= 3 {
                            Error::NonManifoldEdge(p, q, count)
                        } else {
                            Error::InconsistentOrientation(p, q)
                        });
                    }
                    *slot = Some(ci);
                    ei
                }
                None => {
                    let d = vertices[q] - vertices[p];
                    let length = d.norm();
                    if !(length > 0.0) {
                        return Err(Error::DegenerateEdge(p, q));
                    }
                    let tangent = d / length;
                    let ei = edges.len();
                    edges.push(Edge {
                        vertices: [p, q],
                        tangent,
                        normal: Point2::new(tangent.y, -tangent.x),
                        length,
                        midpoint: (vertices[p] + vertices[q]) * 0.5,
                        left_cell: forward.then_some(ci),
                        right_cell: (!forward).then_some(ci),
                    });
                    index.insert((p, q), ei);
                    ei
                }
            };
            cell_edges.push(ei);
            signs.push(if forward { 1.0 } else { -1.0 });
        }
        cells.push(Cell { vertices: lp, edges: cell_edges, signs, geometry });
    }

    Ok(PolyMesh { vertices, cells, edges, metadata: MeshMetadata::default() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn unit_square() -> PolyMesh {
        build_topology(vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)], vec![vec![0, 1, 2, 3]]).unwrap()
    }

    #[test]
    fn single_square() {
        let m = unit_square();
        assert_eq!(m.n_edges(), 4);
        assert_eq!(m.n_cells(), 1);
        assert_eq!(m.boundary_edges().count(), 4);
        // loop 0→1→2→3→0: the closing edge is walked from 3 to 0
        assert_eq!(m.cells[0].signs, vec![1.0, 1.0, 1.0, -1.0]);
        let g = m.cells[0].geometry;
        assert_relative_eq!(g.area, 1.0);
        assert_relative_eq!(g.centroid, p(0.5, 0.5));
        assert_relative_eq!(g.diameter, 2f64.sqrt());
        assert_relative_eq!(g.polar_moment(), 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn right_triangle_metrics() {
        let g = polygon_metrics(&[p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)]).unwrap();
        assert_relative_eq!(g.area, 0.5);
        assert_relative_eq!(g.centroid, p(1.0 / 3.0, 1.0 / 3.0), epsilon = 1e-15);
        // ∫(x - 1/3)² over the triangle = 1/36
        assert_relative_eq!(g.second_moments[0], 1.0 / 36.0, epsilon = 1e-15);
        assert_relative_eq!(g.second_moments[2], -1.0 / 72.0, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_polygon_is_rejected() {
        assert!(matches!(
            polygon_metrics(&[p(0.0, 0.0), p(1.0, 0.0), p(2.0, 0.0)]),
            Err(Error::DegeneratePolygon { .. })
        ));
    }

    #[test]
    fn two_by_one_grid() {
        let v = vec![p(0.0, 0.0), p(1.0, 0.0), p(2.0, 0.0), p(0.0, 1.0), p(1.0, 1.0), p(2.0, 1.0)];
        let m = build_topology(v, vec![vec![0, 1, 4, 3], vec![1, 2, 5, 4]]).unwrap();
        assert_eq!(m.n_edges(), 7);
        let interior: Vec<usize> = (0..m.n_edges()).filter(|&i| !m.edges[i].is_boundary()).collect();
        assert_eq!(interior.len(), 1);
        let ei = interior[0];
        assert_eq!(m.edges[ei].vertices, [1, 4]);
        let sign_in = |c: usize| {
            let cell = &m.cells[c];
            cell.signs[cell.edges.iter().position(|&x| x == ei).unwrap()]
        };
        assert_eq!(sign_in(0) * sign_in(1), -1.0);
    }

    #[test]
    fn triangles_sharing_an_edge() {
        let v = vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)];
        let m = build_topology(v, vec![vec![0, 1, 2], vec![0, 2, 3]]).unwrap();
        assert_eq!(m.n_edges(), 5);
        let diag = m.edges.iter().find(|e| e.vertices == [0, 2]).unwrap();
        assert!(diag.left_cell.is_some() && diag.right_cell.is_some());
        assert_ne!(diag.left_cell, diag.right_cell);
    }

    #[test]
    fn topology_errors() {
        let v = vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0), p(0.5, -1.0)];
        // clockwise loop
        assert!(matches!(
            build_topology(v.clone(), vec![vec![0, 3, 2, 1]]),
            Err(Error::NotCounterClockwise { .. })
        ));
        // overlapping cells walking edge (0,1) the same way
        assert!(matches!(
            build_topology(v.clone(), vec![vec![0, 1, 2], vec![0, 1, 3]]),
            Err(Error::InconsistentOrientation(0, 1))
        ));
        // three cells on edge (0,2)
        assert!(matches!(
            build_topology(v.clone(), vec![vec![0, 1, 2], vec![0, 2, 3], vec![4, 2, 0]]),
            Err(Error::NonManifoldEdge(0, 2, 3))
        ));
        // zero-length edge
        let dup = vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)];
        assert!(matches!(build_topology(dup, vec![vec![0, 1, 2, 3]]), Err(Error::DegenerateEdge(1, 2))));
        assert!(matches!(build_topology(v.clone(), vec![vec![0, 1]]), Err(Error::TooFewVertices { .. })));
        assert!(matches!(build_topology(v, vec![vec![0, 1, 9]]), Err(Error::VertexOutOfRange { .. })));
    }

    #[test]
    fn edge_frames_are_orthonormal() {
        let m = generate_mesh(MeshKind::PolyVoronoiRandom, 5, Domain::UnitSquare, 3).unwrap();
        for e in &m.edges {
            assert_relative_eq!(e.tangent.norm(), 1.0, epsilon = 1e-14);
            assert_relative_eq!(e.normal.norm(), 1.0, epsilon = 1e-14);
            assert!(e.tangent.dot(&e.normal).abs() < 1e-15);
            assert!(e.vertices[0] < e.vertices[1]);
            assert_relative_eq!(e.point_at(0.5), m.vertices[e.vertices[1]], epsilon = 1e-14);
        }
    }

    #[test]
    fn mean_edge_length_of_square() {
        assert_relative_eq!(unit_square().mean_edge_length(), 1.0);
    }
}

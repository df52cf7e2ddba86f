use nalgebra::{Matrix3, Vector3};

use super::PolyMesh;
use crate::Point2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellQuality {
    /// Smallest distance between two vertices, over `h_E`.
    pub vertex_distance_ratio: f64,
    /// Radius of the largest disk inside the kernel, over `h_E`.
    pub star_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct QualityReport {
    pub cells: Vec<CellQuality>,
    pub min_vertex_distance_ratio: f64,
    pub min_star_ratio: f64,
    /// Cells below either threshold.
    pub flagged: Vec<usize>,
}

impl QualityReport {
    pub fn passes(&self) -> bool {
        self.flagged.is_empty()
    }
}

/// Measures shape regularity: star-shapedness with respect to a disk of
/// radius `≥ γ h_E` and vertex separation `≥ c h_E`.
pub fn check_assumptions(mesh: &PolyMesh, gamma_min: f64, c_min: f64) -> QualityReport {
    let cells: Vec<CellQuality> = (0..mesh.n_cells())
        .map(|c| {
            let verts = mesh.cell_coords(c);
            let h = mesh.cells[c].geometry.diameter;
            CellQuality {
                vertex_distance_ratio: min_vertex_distance(&verts) / h,
                star_ratio: kernel_inradius(&verts) / h,
            }
        })
        .collect();
    let flagged = cells
        .iter()
        .enumerate()
        .filter(|(_, q)| q.star_ratio < gamma_min || q.vertex_distance_ratio < c_min)
        .map(|(i, _)| i)
        .collect();
    QualityReport {
        min_vertex_distance_ratio: cells.iter().map(|q| q.vertex_distance_ratio).fold(f64::INFINITY, f64::min),
        min_star_ratio: cells.iter().map(|q| q.star_ratio).fold(f64::INFINITY, f64::min),
        cells,
        flagged,
    }
}

fn min_vertex_distance(verts: &[Point2]) -> f64 {
    let mut d = f64::INFINITY;
    for i in 0..verts.len() {
        for j in i + 1..verts.len() {
            d = d.min((verts[i] - verts[j]).norm());
        }
    }
    d
}

/// Chebyshev radius of the kernel of a counterclockwise polygon.
///
/// The kernel is the intersection of the inner half-planes of all edges, so
/// the largest inscribed disk solves the LP `max r` subject to
/// `n_k · c + r ≤ n_k · a_k`. Its optimum sits on a vertex of the feasible
/// set, where three constraints are active; polygons are small enough to
/// enumerate all triples. Returns 0 when the kernel is empty.
pub(crate) fn kernel_inradius(verts: &[Point2]) -> f64 {
    let n = verts.len();
    let planes: Vec<(Point2, f64)> = (0..n)
        .map(|k| {
            let t = verts[(k + 1) % n] - verts[k];
            let out = Point2::new(t.y, -t.x) / t.norm();
            (out, out.dot(&verts[k]))
        })
        .collect();
    let scale: f64 = verts.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let feasible = |c: Point2, r: f64| planes.iter().all(|(nk, bk)| nk.dot(&c) + r <= bk + 1e-12 * scale);
    let mut best: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let m = Matrix3::new(
                    planes[i].0.x, planes[i].0.y, 1.0,
                    planes[j].0.x, planes[j].0.y, 1.0,
                    planes[k].0.x, planes[k].0.y, 1.0,
                );
                let Some(inv) = m.try_inverse() else { continue };
                let x = inv * Vector3::new(planes[i].1, planes[j].1, planes[k].1);
                let (c, r) = (Point2::new(x[0], x[1]), x[2]);
                if r > best && feasible(c, r) {
                    best = r;
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_topology, generate_mesh, Domain, MeshKind};
    use approx::assert_relative_eq;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn unit_square_ratios() {
        let m = build_topology(vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)], vec![vec![0, 1, 2, 3]])
            .unwrap();
        let r = check_assumptions(&m, 0.1, 0.1);
        assert_relative_eq!(r.cells[0].vertex_distance_ratio, 1.0 / 2f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(r.cells[0].star_ratio, 0.5 / 2f64.sqrt(), epsilon = 1e-12);
        assert!(r.passes());
    }

    #[test]
    fn regular_hexagon_star_ratio() {
        let verts: Vec<Point2> = (0..6)
            .map(|k| {
                let t = std::f64::consts::PI / 3.0 * k as f64;
                p(t.cos(), t.sin())
            })
            .collect();
        assert_relative_eq!(kernel_inradius(&verts) / 2.0, (3f64.sqrt() / 2.0) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn nonconvex_kernel_is_smaller_than_the_cell() {
        // an L-shape: kernel is the unit square at the corner
        let l = [p(0.0, 0.0), p(2.0, 0.0), p(2.0, 1.0), p(1.0, 1.0), p(1.0, 2.0), p(0.0, 2.0)];
        assert_relative_eq!(kernel_inradius(&l), 0.5, epsilon = 1e-12);
        // two notches from opposite sides leave no point that sees everything
        let s = [p(0.0, 0.0), p(3.0, 0.0), p(3.0, 1.0), p(1.0, 1.0), p(1.0, 2.0), p(4.0, 2.0), p(4.0, 3.0), p(0.0, 3.0),
                 p(0.0, 2.5), p(-1.0, 2.5), p(-1.0, 0.5), p(0.0, 0.5)];
        assert!(crate::mesh::signed_area(&s) > 0.0);
        assert_eq!(kernel_inradius(&s), 0.0);
    }

    #[test]
    fn generated_convex_meshes_have_positive_ratios() {
        for kind in MeshKind::ALL {
            let m = generate_mesh(kind, 6, Domain::UnitSquare, 4).unwrap();
            let r = check_assumptions(&m, 0.0, 0.0);
            assert!(r.min_star_ratio > 0.0 && r.min_star_ratio <= 1.0, "{kind}");
            assert!(r.min_vertex_distance_ratio > 0.0 && r.min_vertex_distance_ratio <= 1.0, "{kind}");
        }
    }

    #[test]
    fn thresholds_flag_cells() {
        let m = generate_mesh(MeshKind::QuadStructured, 2, Domain::UnitSquare, 0).unwrap();
        let r = check_assumptions(&m, 0.4, 0.1);
        assert_eq!(r.flagged, vec![0, 1, 2, 3]);
        assert!(!r.passes());
    }
}

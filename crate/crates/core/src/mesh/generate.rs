//! Mesh generators for the unit square and the Cook membrane.
//!
//! Structured and jittered grids are built in the parameter square and mapped
//! bilinearly onto the (convex quadrilateral) domain. Polygonal meshes are
//! Voronoi diagrams of seed sets, clipped to the domain and welded into a
//! conforming mesh. The honeycomb mesh is the Voronoi diagram of a staggered
//! lattice whose odd rows carry seeds on the left and right sides, so the
//! boundary layer consists of quads and pentagons around interior hexagons.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{build_topology, MeshMetadata, PolyMesh};
use crate::error::{Error, Result};
use crate::quadrature::cross;
use crate::Point2;

/// Number of Lloyd sweeps for centroidal Voronoi meshes.
pub const LLOYD_ITERATIONS: usize = 50;

/// Jitter amplitude of the unstructured grids, relative to the grid spacing.
const JITTER: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    UnitSquare,
    Cook,
}

/// Corners of the Cook membrane, counterclockwise from the clamped bottom-left.
pub fn cook_domain() -> [Point2; 4] {
    [Point2::new(0.0, 0.0), Point2::new(48.0, 44.0), Point2::new(48.0, 60.0), Point2::new(0.0, 44.0)]
}

impl Domain {
    pub fn corners(&self) -> [Point2; 4] {
        match self {
            Domain::UnitSquare => {
                [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(1.0, 1.0), Point2::new(0.0, 1.0)]
            }
            Domain::Cook => cook_domain(),
        }
    }

    /// Bilinear map from the parameter square.
    pub fn map(&self, xi: f64, eta: f64) -> Point2 {
        let [a, b, c, d] = self.corners();
        a * ((1.0 - xi) * (1.0 - eta)) + b * (xi * (1.0 - eta)) + c * (xi * eta) + d * ((1.0 - xi) * eta)
    }

    pub fn area(&self) -> f64 {
        super::signed_area(&self.corners())
    }

    pub fn diameter(&self) -> f64 {
        let c = self.corners();
        let mut d: f64 = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                d = d.max((c[i] - c[j]).norm());
            }
        }
        d
    }

    /// Index `k` of the side from corner `k` to corner `k + 1` containing `p`.
    pub fn side_of(&self, p: Point2, tol: f64) -> Option<usize> {
        let c = self.corners();
        (0..4).find(|&k| {
            let a = c[k];
            let b = c[(k + 1) % 4];
            let t = b - a;
            let len = t.norm();
            let dist = cross(t, p - a).abs() / len;
            let along = (p - a).dot(&t) / len;
            dist <= tol && along >= -tol && along <= len + tol
        })
    }
}

impl FromStr for Domain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit-square" | "unit_square" | "square" => Ok(Domain::UnitSquare),
            "cook" => Ok(Domain::Cook),
            _ => Err(Error::Config(format!("unknown domain '{s}'"))),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::UnitSquare => "unit-square",
            Domain::Cook => "cook",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeshKind {
    TriStructured,
    QuadStructured,
    HexStructured,
    TriUnstructured,
    QuadUnstructured,
    PolyVoronoiRandom,
    PolyVoronoiCvt,
}

impl MeshKind {
    pub const ALL: [MeshKind; 7] = [
        MeshKind::TriStructured,
        MeshKind::QuadStructured,
        MeshKind::HexStructured,
        MeshKind::TriUnstructured,
        MeshKind::QuadUnstructured,
        MeshKind::PolyVoronoiRandom,
        MeshKind::PolyVoronoiCvt,
    ];

    /// The six unit-square families of the convergence study.
    pub const CONVERGENCE_FAMILIES: [MeshKind; 6] = [
        MeshKind::TriStructured,
        MeshKind::QuadStructured,
        MeshKind::HexStructured,
        MeshKind::TriUnstructured,
        MeshKind::QuadUnstructured,
        MeshKind::PolyVoronoiRandom,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MeshKind::TriStructured => "tri_structured",
            MeshKind::QuadStructured => "quad_structured",
            MeshKind::HexStructured => "hex_structured",
            MeshKind::TriUnstructured => "tri_unstructured",
            MeshKind::QuadUnstructured => "quad_unstructured",
            MeshKind::PolyVoronoiRandom => "poly_voronoi_random",
            MeshKind::PolyVoronoiCvt => "poly_voronoi_cvt",
        }
    }
}

impl FromStr for MeshKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let kind = match s {
            "tri_structured" | "tri" => MeshKind::TriStructured,
            "quad_structured" | "quad" => MeshKind::QuadStructured,
            "hex_structured" | "hex" => MeshKind::HexStructured,
            "tri_unstructured" => MeshKind::TriUnstructured,
            "quad_unstructured" => MeshKind::QuadUnstructured,
            "poly_voronoi_random" | "rvor" => MeshKind::PolyVoronoiRandom,
            "poly_voronoi_cvt" | "cvor" => MeshKind::PolyVoronoiCvt,
            _ => return Err(Error::Config(format!("unknown mesh kind '{s}'"))),
        };
        Ok(kind)
    }
}

impl fmt::Display for MeshKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Generates a mesh with resolution `n` per direction (`n²` seeds for the
/// Voronoi kinds). Random kinds are deterministic given `seed`.
pub fn generate_mesh(kind: MeshKind, n: usize, domain: Domain, seed: u64) -> Result<PolyMesh> {
    if n == 0 {
        return Err(Error::Config("mesh resolution must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lloyd_converged = None;
    let mut mesh = match kind {
        MeshKind::QuadStructured => quad_grid(n, domain, None)?,
        MeshKind::QuadUnstructured => quad_grid(n, domain, Some(&mut rng))?,
        MeshKind::TriStructured => tri_grid(n, domain, None)?,
        MeshKind::TriUnstructured => tri_grid(n, domain, Some(&mut rng))?,
        MeshKind::HexStructured => {
            let seeds = honeycomb_seeds(n, domain);
            voronoi_mesh(&seeds, domain)?
        }
        MeshKind::PolyVoronoiRandom => {
            let seeds = random_seeds(n * n, domain, &mut rng);
            voronoi_mesh(&seeds, domain)?
        }
        MeshKind::PolyVoronoiCvt => {
            let seeds = random_seeds(n * n, domain, &mut rng);
            let (seeds, converged) = lloyd(seeds, domain, LLOYD_ITERATIONS);
            lloyd_converged = Some(converged);
            voronoi_mesh(&seeds, domain)?
        }
    };
    let random = !matches!(kind, MeshKind::QuadStructured | MeshKind::TriStructured | MeshKind::HexStructured);
    mesh.metadata = MeshMetadata { kind: Some(kind), resolution: n, seed: random.then_some(seed), lloyd_converged };
    Ok(mesh)
}

/// Grid vertices in parameter space, optionally jittered. Boundary vertices
/// only move along their side; corners stay fixed.
fn grid_vertices(n: usize, domain: Domain, rng: Option<&mut ChaCha8Rng>) -> Vec<Point2> {
    let h = 1.0 / n as f64;
    let mut params = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            params.push((i as f64 * h, j as f64 * h));
        }
    }
    if let Some(rng) = rng {
        for j in 0..=n {
            for i in 0..=n {
                let dx = JITTER * h * rng.random_range(-1.0..1.0);
                let dy = JITTER * h * rng.random_range(-1.0..1.0);
                let p = &mut params[j * (n + 1) + i];
                if i != 0 && i != n {
                    p.0 += dx;
                }
                if j != 0 && j != n {
                    p.1 += dy;
                }
            }
        }
    }
    params.into_iter().map(|(xi, eta)| domain.map(xi, eta)).collect()
}

fn quad_grid(n: usize, domain: Domain, rng: Option<&mut ChaCha8Rng>) -> Result<PolyMesh> {
    let vertices = grid_vertices(n, domain, rng);
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut loops = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            loops.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    build_topology(vertices, loops)
}

fn tri_grid(n: usize, domain: Domain, mut rng: Option<&mut ChaCha8Rng>) -> Result<PolyMesh> {
    let vertices = grid_vertices(n, domain, rng.as_deref_mut());
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut loops = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            let flip = match rng.as_deref_mut() {
                Some(r) => r.random_bool(0.5),
                None => false,
            };
            if flip {
                loops.push(vec![a, b, d]);
                loops.push(vec![b, c, d]);
            } else {
                loops.push(vec![a, b, c]);
                loops.push(vec![a, c, d]);
            }
        }
    }
    build_topology(vertices, loops)
}

fn honeycomb_seeds(n: usize, domain: Domain) -> Vec<Point2> {
    let rows = ((n as f64) * 2.0 / 3f64.sqrt()).round().max(1.0) as usize;
    let dx = 1.0 / n as f64;
    let dy = 1.0 / rows as f64;
    let mut seeds = Vec::new();
    for j in 0..rows {
        let eta = (j as f64 + 0.5) * dy;
        if j % 2 == 0 {
            for i in 0..n {
                seeds.push(domain.map((i as f64 + 0.5) * dx, eta));
            }
        } else {
            for i in 0..=n {
                seeds.push(domain.map(i as f64 * dx, eta));
            }
        }
    }
    seeds
}

fn random_seeds(count: usize, domain: Domain, rng: &mut ChaCha8Rng) -> Vec<Point2> {
    let corners = domain.corners();
    let (lo, hi) = bounding_box(&corners);
    let mut seeds = Vec::with_capacity(count);
    while seeds.len() < count {
        let p = Point2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        if strictly_inside_convex(&corners, p) {
            seeds.push(p);
        }
    }
    seeds
}

/// Lloyd relaxation. Returns the last iterate (the CVT energy decreases
/// monotonically) and whether the final sweep moved every seed by less than
/// `1e-3` of the mean seed spacing.
fn lloyd(mut seeds: Vec<Point2>, domain: Domain, iterations: usize) -> (Vec<Point2>, bool) {
    let spacing = (domain.area() / seeds.len() as f64).sqrt();
    let mut last_move = f64::INFINITY;
    for _ in 0..iterations {
        let cells = voronoi_cells(&seeds, &domain.corners());
        let moved: Vec<(Point2, f64)> = cells
            .par_iter()
            .zip(seeds.par_iter())
            .map(|(poly, &s)| match super::polygon_metrics(poly) {
                Ok(g) => (g.centroid, (g.centroid - s).norm()),
                Err(_) => (s, 0.0),
            })
            .collect();
        last_move = moved.iter().map(|m| m.1).fold(0.0, f64::max);
        seeds = moved.into_iter().map(|m| m.0).collect();
    }
    (seeds, last_move < 1e-3 * spacing)
}

fn bounding_box(points: &[Point2]) -> (Point2, Point2) {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = -lo;
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

fn strictly_inside_convex(poly: &[Point2], p: Point2) -> bool {
    let n = poly.len();
    (0..n).all(|i| cross(poly[(i + 1) % n] - poly[i], p - poly[i]) > 0.0)
}

/// Keeps the part of a convex polygon with `(x - a) · normal ≤ 0`.
fn clip_half_plane(poly: &[Point2], a: Point2, normal: Point2) -> Vec<Point2> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let dp = (p - a).dot(&normal);
        let dq = (q - a).dot(&normal);
        if dp <= 0.0 {
            out.push(p);
        }
        if (dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0) {
            let t = dp / (dp - dq);
            out.push(p + (q - p) * t);
        }
    }
    out
}

/// Voronoi cells of `seeds` clipped to the convex counterclockwise polygon
/// `domain`, one counterclockwise polygon per seed.
pub fn voronoi_cells(seeds: &[Point2], domain: &[Point2]) -> Vec<Vec<Point2>> {
    let (lo, hi) = bounding_box(domain);
    let extent = hi - lo;
    let per_side = ((seeds.len() as f64).sqrt().ceil() as usize).max(1);
    let size = (extent.x.max(extent.y) / per_side as f64).max(f64::MIN_POSITIVE);
    let nx = ((extent.x / size).ceil() as usize).max(1);
    let ny = ((extent.y / size).ceil() as usize).max(1);
    let bucket_of = |p: Point2| {
        let i = (((p.x - lo.x) / size) as usize).min(nx - 1);
        let j = (((p.y - lo.y) / size) as usize).min(ny - 1);
        (i, j)
    };
    let mut buckets = vec![Vec::new(); nx * ny];
    for (k, &s) in seeds.iter().enumerate() {
        let (i, j) = bucket_of(s);
        buckets[j * nx + i].push(k);
    }

    (0..seeds.len())
        .into_par_iter()
        .map(|k| {
            let s = seeds[k];
            let (bi, bj) = bucket_of(s);
            let mut poly = domain.to_vec();
            let max_ring = nx.max(ny);
            for ring in 0..=max_ring {
                let (i0, i1) = (bi as isize - ring as isize, bi as isize + ring as isize);
                let (j0, j1) = (bj as isize - ring as isize, bj as isize + ring as isize);
                for j in j0..=j1 {
                    for i in i0..=i1 {
                        let on_ring = i == i0 || i == i1 || j == j0 || j == j1;
                        if !on_ring || i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
                            continue;
                        }
                        for &other in &buckets[j as usize * nx + i as usize] {
                            if other == k {
                                continue;
                            }
                            let o = seeds[other];
                            poly = clip_half_plane(&poly, (s + o) * 0.5, o - s);
                        }
                    }
                }
                // seeds beyond this ring are at least `ring * size` away
                let reach = poly.iter().map(|v| (v - s).norm()).fold(0.0, f64::max);
                if ring as f64 * size >= 2.0 * reach {
                    break;
                }
            }
            poly
        })
        .collect()
}

/// Welds a polygon soup into shared vertices and builds the mesh.
fn voronoi_mesh(seeds: &[Point2], domain: Domain) -> Result<PolyMesh> {
    let cells = voronoi_cells(seeds, &domain.corners());
    let tol = 1e-10 * domain.diameter();
    let mut vertices: Vec<Point2> = Vec::new();
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut loops = Vec::with_capacity(cells.len());
    for (k, poly) in cells.iter().enumerate() {
        let mut lp: Vec<usize> = Vec::with_capacity(poly.len());
        for &p in poly {
            let key = ((p.x / tol).floor() as i64, (p.y / tol).floor() as i64);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(ids) = grid.get(&(key.0 + dx, key.1 + dy)) {
                        for &id in ids {
                            if (vertices[id] - p).norm() <= tol {
                                found = Some(id);
                                break 'search;
                            }
                        }
                    }
                }
            }
            let id = found.unwrap_or_else(|| {
                vertices.push(p);
                grid.entry(key).or_default().push(vertices.len() - 1);
                vertices.len() - 1
            });
            if lp.last() != Some(&id) {
                lp.push(id);
            }
        }
        while lp.len() > 1 && lp.first() == lp.last() {
            lp.pop();
        }
        if lp.len() < 3 {
            return Err(Error::DegenerateVoronoiCell { seed: k });
        }
        loops.push(lp);
    }
    build_topology(vertices, loops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn boundary_length(m: &PolyMesh) -> f64 {
        m.boundary_edges().map(|e| m.edges[e].length).sum()
    }

    fn perimeter(domain: Domain) -> f64 {
        let c = domain.corners();
        (0..4).map(|k| (c[(k + 1) % 4] - c[k]).norm()).sum()
    }

    #[test]
    fn structured_counts() {
        let q = generate_mesh(MeshKind::QuadStructured, 2, Domain::UnitSquare, 0).unwrap();
        assert_eq!((q.n_cells(), q.n_edges(), q.vertices.len()), (4, 12, 9));
        let t = generate_mesh(MeshKind::TriStructured, 1, Domain::UnitSquare, 0).unwrap();
        assert_eq!((t.n_cells(), t.n_edges()), (2, 5));
    }

    #[test]
    fn cook_corners() {
        let c = cook_domain();
        assert_relative_eq!((c[3] - c[0]).norm(), 44.0);
        assert_relative_eq!((c[2] - c[1]).norm(), 16.0);
        assert!(Domain::Cook.area() > 0.0);
        assert_relative_eq!(Domain::Cook.area(), 1440.0, epsilon = 1e-12);
    }

    #[test]
    fn cvt_with_64_seeds_partitions_the_square() {
        let m = generate_mesh(MeshKind::PolyVoronoiCvt, 8, Domain::UnitSquare, 11).unwrap();
        assert_eq!(m.n_cells(), 64);
        assert!((m.total_area() - 1.0).abs() < 1e-12);
        assert!(m.metadata.lloyd_converged.is_some());
        assert_eq!(m.metadata.seed, Some(11));
    }

    #[test]
    fn every_generator_covers_its_domain() {
        for domain in [Domain::UnitSquare, Domain::Cook] {
            for kind in MeshKind::ALL {
                for n in [1, 3, 8] {
                    let m = generate_mesh(kind, n, domain, 5).unwrap();
                    let a = domain.area();
                    assert!((m.total_area() - a).abs() <= 1e-10 * a, "{kind} {domain} {n}");
                    // a hanging node would leave an interior edge with one cell
                    let bl = boundary_length(&m);
                    assert!((bl - perimeter(domain)).abs() <= 1e-9 * bl, "{kind} {domain} {n}: {bl}");
                    for e in m.boundary_edges() {
                        let tol = 1e-9 * domain.diameter();
                        assert!(domain.side_of(m.edges[e].midpoint, tol).is_some());
                    }
                }
            }
        }
    }

    #[test]
    fn honeycomb_has_quads_pentagons_and_hexagons() {
        let m = generate_mesh(MeshKind::HexStructured, 6, Domain::UnitSquare, 0).unwrap();
        let mut sizes: Vec<usize> = m.cells.iter().map(|c| c.n_edges()).collect();
        sizes.sort();
        sizes.dedup();
        assert!(sizes.contains(&4) && sizes.contains(&5) && sizes.contains(&6), "{sizes:?}");
        assert!(sizes.iter().all(|&s| (4..=6).contains(&s)));
    }

    #[test]
    fn generators_are_deterministic() {
        for kind in MeshKind::ALL {
            let a = generate_mesh(kind, 4, Domain::UnitSquare, 9).unwrap();
            let b = generate_mesh(kind, 4, Domain::UnitSquare, 9).unwrap();
            assert_eq!(a.checksum(), b.checksum());
        }
        let a = generate_mesh(MeshKind::PolyVoronoiRandom, 4, Domain::UnitSquare, 1).unwrap();
        let b = generate_mesh(MeshKind::PolyVoronoiRandom, 4, Domain::UnitSquare, 2).unwrap();
        assert_ne!(a.checksum(), b.checksum());
    }

    #[test]
    fn constant_field_closes_on_every_cell() {
        for kind in MeshKind::ALL {
            let m = generate_mesh(kind, 5, Domain::Cook, 2).unwrap();
            for c in &m.cells {
                let mut acc = Point2::zeros();
                let mut scale = 0.0;
                for (&e, &s) in c.edges.iter().zip(&c.signs) {
                    acc += m.edges[e].normal * (s * m.edges[e].length);
                    scale += m.edges[e].length;
                }
                assert!(acc.norm() < 1e-12 * scale, "{kind}: {acc:?}");
            }
        }
    }

    #[test]
    fn zero_resolution_is_rejected() {
        assert!(generate_mesh(MeshKind::QuadStructured, 0, Domain::UnitSquare, 0).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in MeshKind::ALL {
            assert_eq!(kind.name().parse::<MeshKind>().unwrap(), kind);
        }
        assert_eq!("cvor".parse::<MeshKind>().unwrap(), MeshKind::PolyVoronoiCvt);
        assert!("pentagon".parse::<MeshKind>().is_err());
    }
}

//! Per-cell quantities of the low-order stress element.
//!
//! On each edge the traction of a discrete stress is `φ_e(s) = c_e + d_e s n_e`
//! in the global edge frame. A cell sees the outward traction
//! `sign_{E,e} φ_e(s)`, so both neighbours of an interior edge read the same
//! three unknowns and normal tractions are continuous by construction.
//!
//! Local unknowns are ordered edge by edge along the counterclockwise boundary,
//! `(c_x, c_y, d)` per edge. All quantities below are computed from these
//! unknowns only: the divergence (a rigid motion) from the boundary moments,
//! the cell mean of the stress from the identity
//!
//! ```text
//! ∫_E τ_ij = ∫_∂E (τn)_i (x - x_C)_j - ∫_E (div τ)_i (x - x_C)_j
//! ```
//!
//! and the stabilized energy from the boundary residual `(τ - Π_E τ) n`.
//! Every edge integrand is at most quadratic in `s`, so the integrals are
//! evaluated in closed form.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::material::{IsotropicMaterial, SymTensor2};
use crate::mesh::{Edge, PolyMesh};
use crate::quadrature::{edge_rule, polygon_rule};
use crate::{perp, Point2};

/// Edge traction `φ(s) = c + d s n_e` in the global edge frame.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EdgeTractionDof {
    pub c: Point2,
    pub d: f64,
}

impl EdgeTractionDof {
    pub fn new(c: Point2, d: f64) -> Self {
        Self { c, d }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self { c: Point2::new(v[0], v[1]), d: v[2] }
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.c.x, self.c.y, self.d]
    }

    /// Traction at arc coordinate `s` on an edge with global normal `normal`.
    pub fn eval(&self, s: f64, normal: Point2) -> Point2 {
        self.c + normal * (self.d * s)
    }
}

/// `a + b (x - x_C)^⊥`, anchored at a cell centroid.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RigidMotion {
    pub a: Point2,
    pub b: f64,
}

impl RigidMotion {
    pub fn new(a: Point2, b: f64) -> Self {
        Self { a, b }
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self { a: Point2::new(v[0], v[1]), b: v[2] }
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.a.x, self.a.y, self.b)
    }

    pub fn eval(&self, x: Point2, centroid: Point2) -> Point2 {
        self.a + perp(x - centroid) * self.b
    }
}

/// The basis `(1,0;0)`, `(0,1;0)`, `(0,0;1)` of rigid motions. Anchored at the
/// centroid it is L²-orthogonal, with squared norms `|E|`, `|E|` and `m_E`.
pub fn rm_basis() -> [RigidMotion; 3] {
    [
        RigidMotion::new(Point2::new(1.0, 0.0), 0.0),
        RigidMotion::new(Point2::new(0.0, 1.0), 0.0),
        RigidMotion::new(Point2::zeros(), 1.0),
    ]
}

#[derive(Debug, Clone)]
pub struct LocalEdge {
    pub global: usize,
    pub sign: f64,
    pub length: f64,
    pub tangent: Point2,
    pub normal: Point2,
    /// Edge midpoint relative to the cell centroid.
    pub offset: Point2,
}

impl LocalEdge {
    /// Outward traction of local unknown `comp` (0, 1: `c_x`, `c_y`; 2: `d`)
    /// as `u + s v`.
    fn basis(&self, comp: usize) -> (Point2, Point2) {
        match comp {
            0 => (Point2::new(self.sign, 0.0), Point2::zeros()),
            1 => (Point2::new(0.0, self.sign), Point2::zeros()),
            _ => (Point2::zeros(), self.normal * self.sign),
        }
    }

    fn outward_normal(&self) -> Point2 {
        self.normal * self.sign
    }
}

/// Geometry of one cell as seen by the local computations.
#[derive(Debug, Clone)]
pub struct ElementFrame {
    pub cell: usize,
    pub area: f64,
    pub centroid: Point2,
    pub diameter: f64,
    /// `[I_xx, I_yy, I_xy]` about the centroid
    pub second_moments: [f64; 3],
    pub vertices: Vec<Point2>,
    pub edges: Vec<LocalEdge>,
}

impl ElementFrame {
    pub fn new(mesh: &PolyMesh, cell: usize) -> Self {
        let c = &mesh.cells[cell];
        let g = c.geometry;
        let edges = c
            .edges
            .iter()
            .zip(&c.signs)
            .map(|(&e, &sign)| {
                let edge = &mesh.edges[e];
                LocalEdge {
                    global: e,
                    sign,
                    length: edge.length,
                    tangent: edge.tangent,
                    normal: edge.normal,
                    offset: edge.midpoint - g.centroid,
                }
            })
            .collect();
        Self {
            cell,
            area: g.area,
            centroid: g.centroid,
            diameter: g.diameter,
            second_moments: g.second_moments,
            vertices: mesh.cell_coords(cell),
            edges,
        }
    }

    pub fn n_dofs(&self) -> usize {
        3 * self.edges.len()
    }

    pub fn polar_moment(&self) -> f64 {
        self.second_moments[0] + self.second_moments[1]
    }

    /// Gathers the local unknowns from per-edge global values.
    pub fn gather(&self, global: &[EdgeTractionDof]) -> Vec<f64> {
        self.edges.iter().flat_map(|e| global[e.global].to_array()).collect()
    }

    /// Column `j` of the identity, as a local unknown vector.
    fn unit(&self, j: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.n_dofs()];
        v[j] = 1.0;
        v
    }
}

/// `div τ = α + β (x - x_C)^⊥`, from the boundary moments of the tractions:
/// `α = (1/|E|) ∫_∂E φ`, `β = (1/m_E) ∫_∂E φ · (x - x_C)^⊥`.
pub fn div_reconstruction(frame: &ElementFrame, dofs: &[f64]) -> RigidMotion {
    let mut alpha = Point2::zeros();
    let mut beta = 0.0;
    for (k, e) in frame.edges.iter().enumerate() {
        let (u, v) = outward_traction(e, &dofs[3 * k..3 * k + 3]);
        // ∫ (u + s v) ds = u; ∫ (u + s v)·(r^⊥ + s L t^⊥) ds = u·r^⊥ + L v·t^⊥/12
        alpha += u * e.length;
        beta += e.length * (u.dot(&perp(e.offset)) + e.length * v.dot(&perp(e.tangent)) / 12.0);
    }
    RigidMotion::new(alpha / frame.area, beta / frame.polar_moment())
}

/// Cell mean of the stress, which is its projection onto constant symmetric
/// tensors for a cellwise constant compliance.
pub fn mean_stress(frame: &ElementFrame, dofs: &[f64], div: &RigidMotion) -> SymTensor2 {
    let mut m = [[0.0; 2]; 2];
    for (k, e) in frame.edges.iter().enumerate() {
        let (u, v) = outward_traction(e, &dofs[3 * k..3 * k + 3]);
        // ∫ (u + s v)_i (r + s L t)_j ds = u_i r_j + L v_i t_j / 12
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] += e.length * (u[i] * e.offset[j] + e.length * v[i] * e.tangent[j] / 12.0);
            }
        }
    }
    // ∫_E (div τ)_i (x - x_C)_j: only the rotational part has a nonzero moment
    let [ixx, iyy, ixy] = frame.second_moments;
    let b = div.b;
    m[0][0] -= b * ixy;
    m[0][1] -= b * iyy;
    m[1][0] += b * ixx;
    m[1][1] += b * ixy;
    let s = 1.0 / frame.area;
    SymTensor2::new(s * m[0][0], s * m[1][1], 0.5 * s * (m[0][1] + m[1][0]))
}

fn outward_traction(e: &LocalEdge, dof: &[f64]) -> (Point2, Point2) {
    (Point2::new(dof[0], dof[1]) * e.sign, e.normal * (dof[2] * e.sign))
}

/// 3 × 3n_E matrix mapping local unknowns to `(α_x, α_y, β)`.
pub fn divergence_matrix(frame: &ElementFrame) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(3, frame.n_dofs());
    for j in 0..frame.n_dofs() {
        m.set_column(j, &div_reconstruction(frame, &frame.unit(j)).to_vector());
    }
    m
}

/// 3 × 3n_E matrix mapping local unknowns to the triple of `Π_E τ`.
pub fn projection_matrix(frame: &ElementFrame) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(3, frame.n_dofs());
    for j in 0..frame.n_dofs() {
        let unit = frame.unit(j);
        let div = div_reconstruction(frame, &unit);
        p.set_column(j, &mean_stress(frame, &unit, &div).triple());
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StabilizationVariant {
    /// `κ_E h_E ∫_∂E σn · τn`
    #[default]
    Diameter,
    /// `κ_E Σ_e h_e ∫_e σn · τn`
    EdgeLength,
}

impl std::str::FromStr for StabilizationVariant {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "stab1" => Ok(Self::Diameter),
            "stab1bis" => Ok(Self::EdgeLength),
            _ => Err(crate::Error::Config(format!("unknown stabilization '{s}'"))),
        }
    }
}

impl std::fmt::Display for StabilizationVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Diameter => "stab1",
            Self::EdgeLength => "stab1bis",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stabilization {
    pub variant: StabilizationVariant,
    /// Multiplies `κ_E = ½ tr(D)`.
    pub kappa_scale: f64,
}

impl Default for Stabilization {
    fn default() -> Self {
        Self { variant: StabilizationVariant::Diameter, kappa_scale: 1.0 }
    }
}

/// Stabilized local energy matrix
/// `|E| (D Π χ_i : Π χ_j) + κ_E Σ_e w_e ∫_e (χ_i - Π χ_i)n · (χ_j - Π χ_j)n`.
pub fn local_a_h(frame: &ElementFrame, material: &IsotropicMaterial, stab: &Stabilization) -> DMatrix<f64> {
    let n = frame.n_dofs();
    let p = projection_matrix(frame);
    let energy = material.compliance_energy_matrix();
    let mut a = (p.transpose() * DMatrix::from_column_slice(3, 3, energy.as_slice()) * &p) * frame.area;

    let kappa = stab.kappa_scale * material.kappa();
    for (k, e) in frame.edges.iter().enumerate() {
        let w = match stab.variant {
            StabilizationVariant::Diameter => frame.diameter,
            StabilizationVariant::EdgeLength => e.length,
        };
        let no = e.outward_normal();
        // (Π χ) n as a 2×3 map on triples
        let nmat = DMatrix::from_row_slice(2, 3, &[no.x, 0.0, no.y, 0.0, no.y, no.x]);
        let mut residual = -(nmat * &p);
        let mut linear = DMatrix::zeros(2, n);
        for comp in 0..3 {
            let (u, v) = e.basis(comp);
            let j = 3 * k + comp;
            residual[(0, j)] += u.x;
            residual[(1, j)] += u.y;
            linear[(0, j)] = v.x;
            linear[(1, j)] = v.y;
        }
        let scale = kappa * w * e.length;
        a += (residual.transpose() * &residual + linear.transpose() * &linear / 12.0) * scale;
    }
    // exact symmetry
    let at = a.transpose();
    (a + at) * 0.5
}

/// `B_E[r][k] = ∫_E div χ_k · rm_r = ∫_∂E χ_k n · rm_r`.
pub fn local_b(frame: &ElementFrame) -> DMatrix<f64> {
    let mut b = divergence_matrix(frame);
    let scale = [frame.area, frame.area, frame.polar_moment()];
    for (r, s) in scale.iter().enumerate() {
        b.row_mut(r).scale_mut(*s);
    }
    b
}

/// `∫_E f · rm_r` for the three rigid-motion basis functions.
pub fn local_load<F: Fn(Point2) -> Point2>(frame: &ElementFrame, f: F, degree: usize) -> Vector3<f64> {
    let rule = polygon_rule(&frame.vertices, frame.centroid, degree);
    let mut out = Vector3::zeros();
    for (x, w) in rule.points.iter().zip(&rule.weights) {
        let fx = f(*x);
        out += Vector3::new(fx.x, fx.y, fx.dot(&perp(x - frame.centroid))) * *w;
    }
    out
}

/// `L²(E)` projection of `v` onto rigid motions.
pub fn rm_projection<F: Fn(Point2) -> Point2>(frame: &ElementFrame, v: F, degree: usize) -> RigidMotion {
    let m = local_load(frame, v, degree);
    RigidMotion::new(Point2::new(m[0], m[1]) / frame.area, m[2] / frame.polar_moment())
}

/// `∫_e g · φ_k` for the three edge basis tractions `e_x`, `e_y`, `s n_e` in
/// the global edge frame. Multiply by the cell sign for the outward version.
pub fn dirichlet_boundary_term<G: Fn(Point2) -> Point2>(edge: &Edge, g: G, degree: usize) -> [f64; 3] {
    let rule = edge_rule(degree);
    let mut out = [0.0; 3];
    for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
        let gx = g(edge.point_at(s));
        let wl = w * edge.length;
        out[0] += wl * gx.x;
        out[1] += wl * gx.y;
        out[2] += wl * s * gx.dot(&edge.normal);
    }
    out
}

/// Projects a traction `t(s)` (global edge frame) onto the edge space by its
/// mean and first moment: `c = ∫ t ds`, `d = 12 ∫ (t · n_e) s ds`.
pub fn edge_moments<T: Fn(f64) -> Point2>(edge: &Edge, t: T, degree: usize) -> EdgeTractionDof {
    let rule = edge_rule(degree);
    let mut c = Point2::zeros();
    let mut d = 0.0;
    for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
        let ts = t(s);
        c += ts * w;
        d += 12.0 * w * s * ts.dot(&edge.normal);
    }
    EdgeTractionDof { c, d }
}

/// Interpolant of a smooth stress field on one edge.
pub fn interpolate_edge<S: Fn(Point2) -> SymTensor2>(edge: &Edge, tau: S, degree: usize) -> EdgeTractionDof {
    edge_moments(edge, |s| tau(edge.point_at(s)).apply(edge.normal), degree)
}

/// Interpolant on the edges of one cell, in local order.
///
/// The zeroth and first boundary moments of `τ n` against
/// `γ_e + δ_e (x - x_C)^⊥` are matched edge by edge; the first-moment
/// coefficient is `|e|² / 12`, which never vanishes on a straight edge.
pub fn interpolate_local<S: Fn(Point2) -> SymTensor2>(
    mesh: &PolyMesh,
    cell: usize,
    tau: S,
    degree: usize,
) -> Vec<EdgeTractionDof> {
    mesh.cells[cell].edges.iter().map(|&e| interpolate_edge(&mesh.edges[e], &tau, degree)).collect()
}

/// Global interpolant, one entry per mesh edge.
pub fn interpolate<S: Fn(Point2) -> SymTensor2 + Sync>(mesh: &PolyMesh, tau: S, degree: usize) -> Vec<EdgeTractionDof> {
    mesh.edges.iter().map(|e| interpolate_edge(e, &tau, degree)).collect()
}

/// Local unknowns of a constant stress.
pub fn constant_stress_dofs(frame: &ElementFrame, sigma: &SymTensor2) -> Vec<f64> {
    frame
        .edges
        .iter()
        .flat_map(|e| {
            let c = sigma.apply(e.normal);
            [c.x, c.y, 0.0]
        })
        .collect()
}

/// Local element matrices and vectors.
#[derive(Debug, Clone)]
pub struct LocalMatrices {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub f: Vector3<f64>,
    /// Boundary-data contributions `∫_{∂E ∩ ∂Ω} g · χ_k n`.
    pub g: DVector<f64>,
}

impl LocalMatrices {
    pub fn is_finite(&self) -> bool {
        self.a.iter().chain(self.b.iter()).chain(self.f.iter()).chain(self.g.iter()).all(|x| x.is_finite())
    }
}

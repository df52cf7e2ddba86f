//! Global numbering, assembly and direct solution of the saddle-point system
//!
//! ```text
//! [ A  Bᵀ ] [σ]   [ G ]
//! [ B  0  ] [u] = [-F ]
//! ```
//!
//! with `A` the stabilized compliance form on the traction unknowns, `B` the
//! divergence tested with cellwise rigid motions, `G` the natural displacement
//! data and `F` the body load moments.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::element::{
    dirichlet_boundary_term, edge_moments, local_a_h, local_b, local_load, EdgeTractionDof, ElementFrame,
    LocalMatrices, RigidMotion, Stabilization,
};
use crate::error::{Error, Result};
use crate::material::IsotropicMaterial;
use crate::mesh::{Domain, PolyMesh};
use crate::quadrature::DEFAULT_DEGREE;
use crate::{Point2, VectorField};

/// Contiguous numbering: edge `e` owns `3e..3e+3` (`c_x, c_y, d`), cell `c`
/// owns `3N_e + 3c..` (`a_x, a_y, b`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofMap {
    pub n_edges: usize,
    pub n_cells: usize,
}

impl DofMap {
    pub fn new(mesh: &PolyMesh) -> Self {
        Self { n_edges: mesh.n_edges(), n_cells: mesh.n_cells() }
    }

    pub fn edge(&self, e: usize) -> usize {
        3 * e
    }

    pub fn cell(&self, c: usize) -> usize {
        3 * self.n_edges + 3 * c
    }

    pub fn n_stress(&self) -> usize {
        3 * self.n_edges
    }

    pub fn n_displacement(&self) -> usize {
        3 * self.n_cells
    }

    pub fn len(&self) -> usize {
        self.n_stress() + self.n_displacement()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Condition on one boundary edge.
#[derive(Clone)]
pub enum BoundaryKind {
    /// Natural condition `u = g`, entering the right-hand side.
    Displacement(VectorField),
    /// Essential condition `σn = t` with `n` the outward normal; fixes the
    /// three unknowns of the edge.
    Traction(VectorField),
}

impl std::fmt::Debug for BoundaryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Displacement(_) => "Displacement",
            Self::Traction(_) => "Traction",
        })
    }
}

#[derive(Debug, Clone)]
pub enum BoundarySpec {
    /// The same condition on the whole boundary.
    Uniform(BoundaryKind),
    /// One condition per side of a quadrilateral domain; side `k` joins
    /// corners `k` and `k + 1`.
    Sides { domain: Domain, kinds: [BoundaryKind; 4] },
}

impl BoundarySpec {
    /// The condition of every edge, `None` on interior edges.
    pub fn classify<'a>(&'a self, mesh: &PolyMesh) -> Result<Vec<Option<&'a BoundaryKind>>> {
        let tol = match self {
            Self::Uniform(_) => 0.0,
            Self::Sides { domain, .. } => 1e-9 * domain.diameter(),
        };
        mesh.edges
            .iter()
            .enumerate()
            .map(|(i, e)| {
                if !e.is_boundary() {
                    return Ok(None);
                }
                match self {
                    Self::Uniform(k) => Ok(Some(k)),
                    Self::Sides { domain, kinds } => {
                        let side = domain.side_of(e.midpoint, tol).ok_or(Error::BoundaryCoverage { edge: i })?;
                        // both endpoints must sit on the same side
                        for &v in &e.vertices {
                            let p = mesh.vertices[v];
                            let c = domain.corners();
                            let (a, b) = (c[side], c[(side + 1) % 4]);
                            let t = (b - a).normalize();
                            if crate::quadrature::cross(t, p - a).abs() > tol {
                                return Err(Error::BoundaryCoverage { edge: i });
                            }
                        }
                        Ok(Some(&kinds[side]))
                    }
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    pub stabilization: Stabilization,
    /// Degree of the rules for loads and boundary data.
    pub quadrature_degree: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self { stabilization: Stabilization::default(), quadrature_degree: DEFAULT_DEGREE }
    }
}

/// Assembled system in triplet form, with essential constraints kept aside
/// until the solve.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub dofs: DofMap,
    /// `(row, col, value)`; duplicates are summed.
    pub triplets: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
    /// `(dof, value)` pairs fixed by essential conditions.
    pub constraints: Vec<(usize, f64)>,
}

impl GlobalSystem {
    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    /// Dense matrix without constraints, for inspection of small systems.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.len(), self.len());
        for &(i, j, v) in &self.triplets {
            m[(i, j)] += v;
        }
        m
    }
}

/// Local matrices of every cell, computed in parallel and returned in cell
/// order.
pub fn local_matrices(
    mesh: &PolyMesh,
    material: &IsotropicMaterial,
    body_force: &(dyn Fn(Point2) -> Point2 + Sync),
    boundary: &[Option<&BoundaryKind>],
    options: &AssemblyOptions,
) -> Vec<LocalMatrices> {
    (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let frame = ElementFrame::new(mesh, c);
            let mut g = DVector::zeros(frame.n_dofs());
            for (k, le) in frame.edges.iter().enumerate() {
                if let Some(BoundaryKind::Displacement(data)) = boundary[le.global] {
                    let t = dirichlet_boundary_term(&mesh.edges[le.global], |x| data(x), options.quadrature_degree);
                    for i in 0..3 {
                        g[3 * k + i] = le.sign * t[i];
                    }
                }
            }
            LocalMatrices {
                a: local_a_h(&frame, material, &options.stabilization),
                b: local_b(&frame),
                f: local_load(&frame, body_force, options.quadrature_degree),
                g,
            }
        })
        .collect()
}

/// Assembles the global system and registers the essential conditions.
pub fn assemble(
    mesh: &PolyMesh,
    material: &IsotropicMaterial,
    body_force: &(dyn Fn(Point2) -> Point2 + Sync),
    boundary: &BoundarySpec,
    options: &AssemblyOptions,
) -> Result<GlobalSystem> {
    let kinds = boundary.classify(mesh)?;
    let locals = local_matrices(mesh, material, body_force, &kinds, options);
    let dofs = DofMap::new(mesh);
    let mut system = GlobalSystem { dofs, triplets: Vec::new(), rhs: vec![0.0; dofs.len()], constraints: Vec::new() };

    // the edge unknowns are already in the global frame (signs live in the
    // local matrices), so scattering is a plain index map
    for (c, local) in locals.iter().enumerate() {
        if !local.is_finite() {
            return Err(Error::NotFinite(format!("local matrices of cell {c}")));
        }
        let idx: Vec<usize> =
            mesh.cells[c].edges.iter().flat_map(|&e| (0..3).map(move |i| dofs.edge(e) + i)).collect();
        for (jl, &j) in idx.iter().enumerate() {
            for (il, &i) in idx.iter().enumerate() {
                let v = local.a[(il, jl)];
                if v != 0.0 {
                    system.triplets.push((i, j, v));
                }
            }
            for r in 0..3 {
                let v = local.b[(r, jl)];
                if v != 0.0 {
                    system.triplets.push((dofs.cell(c) + r, j, v));
                    system.triplets.push((j, dofs.cell(c) + r, v));
                }
            }
            system.rhs[j] += local.g[jl];
        }
        for r in 0..3 {
            system.rhs[dofs.cell(c) + r] = -local.f[r];
        }
    }

    for (e, kind) in kinds.iter().enumerate() {
        if let Some(BoundaryKind::Traction(t)) = kind {
            apply_essential_traction(&mut system, mesh, e, |x| t(x), options.quadrature_degree)?;
        }
    }
    Ok(system)
}

/// Fixes the unknowns of boundary edge `edge` to the moments of the outward
/// traction `t`.
pub fn apply_essential_traction<T: Fn(Point2) -> Point2>(
    system: &mut GlobalSystem,
    mesh: &PolyMesh,
    edge: usize,
    t: T,
    degree: usize,
) -> Result<EdgeTractionDof> {
    let e = &mesh.edges[edge];
    let (_, sign) = e.boundary_cell().ok_or(Error::EssentialOnInteriorEdge { edge })?;
    // outward traction is sign·φ_e
    let dof = edge_moments(e, |s| t(e.point_at(s)) * sign, degree);
    let base = system.dofs.edge(edge);
    system.constraints.retain(|&(i, _)| i < base || i >= base + 3);
    for (i, v) in dof.to_array().into_iter().enumerate() {
        system.constraints.push((base + i, v));
    }
    Ok(dof)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub n_dofs: usize,
    pub n_constrained: usize,
    pub nnz: usize,
    /// `‖Mx - b‖ / ‖b‖` of the constrained system.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub stress: Vec<EdgeTractionDof>,
    pub displacement: Vec<RigidMotion>,
    pub report: SolveReport,
}

pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Maximum number of iterative refinement steps after the direct solve.
pub const REFINEMENT_STEPS: usize = 3;

/// Eliminates the constraints symmetrically (known columns moved to the
/// right-hand side, identity rows) and solves with a sparse LU.
pub fn solve(system: &GlobalSystem) -> Result<Solution> {
    solve_with_tolerance(system, RESIDUAL_TOLERANCE)
}

pub fn solve_with_tolerance(system: &GlobalSystem, tolerance: f64) -> Result<Solution> {
    use faer::prelude::*;
    use faer::sparse::{SparseColMat, Triplet};

    let n = system.len();
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    for &(i, v) in &system.constraints {
        fixed[i] = Some(v);
    }
    let mut rhs = system.rhs.clone();
    let mut entries: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(system.triplets.len() + n);
    let mut row_used = vec![false; n];
    for &(i, j, v) in &system.triplets {
        match (fixed[i], fixed[j]) {
            (None, None) => {
                entries.push(Triplet::new(i, j, v));
                row_used[i] = true;
            }
            (None, Some(x)) => rhs[i] -= v * x,
            _ => {}
        }
    }
    for (i, f) in fixed.iter().enumerate() {
        if let Some(x) = f {
            entries.push(Triplet::new(i, i, 1.0));
            rhs[i] = *x;
            row_used[i] = true;
        }
    }
    // an empty row is a zero pivot whatever the ordering
    if let Some(index) = row_used.iter().position(|u| !u) {
        return Err(Error::Singular { index });
    }

    faer::set_global_parallelism(faer::Par::Seq);
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &entries)
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let lu = mat.sp_lu().map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let residual_of = |x: &[f64]| {
        let mut r = rhs.clone();
        for t in &entries {
            r[t.row] -= t.val * x[t.col];
        }
        r
    };
    let bnorm = norm(&rhs);
    let relative = |r: &[f64]| if bnorm > 0.0 { norm(r) / bnorm } else { norm(r) };

    let mut rm = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
    lu.solve_in_place(rm.as_mut());
    let mut x: Vec<f64> = (0..n).map(|i| rm[(i, 0)]).collect();
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::Singular { index });
    }
    // iterative refinement: a few corrections with the same factors remove
    // most of the rounding error amplified by the conditioning
    let mut r = residual_of(&x);
    let mut residual = relative(&r);
    for _ in 0..REFINEMENT_STEPS {
        let mut dm = Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
        lu.solve_in_place(dm.as_mut());
        let candidate: Vec<f64> = x.iter().enumerate().map(|(i, v)| v + dm[(i, 0)]).collect();
        let rc = residual_of(&candidate);
        let res_c = relative(&rc);
        if !(res_c < residual) {
            break;
        }
        x = candidate;
        r = rc;
        residual = res_c;
    }
    if !(residual < tolerance) {
        return Err(Error::Residual { residual, tolerance });
    }

    let d = system.dofs;
    Ok(Solution {
        stress: (0..d.n_edges).map(|e| EdgeTractionDof::from_slice(&x[d.edge(e)..d.edge(e) + 3])).collect(),
        displacement: (0..d.n_cells)
            .map(|c| RigidMotion::new(Point2::new(x[d.cell(c)], x[d.cell(c) + 1]), x[d.cell(c) + 2]))
            .collect(),
        report: SolveReport { n_dofs: n, n_constrained: system.constraints.len(), nnz: mat.compute_nnz(), residual },
    })
}

pub const SOLUTION_HEADER: &str = "vemhr-solution v1";

/// Text serialization: per-edge `(c_x, c_y, d)`, per-cell `(a_x, a_y, b)`,
/// the mesh checksum and the solve report.
pub fn write_solution(mesh: &PolyMesh, solution: &Solution) -> String {
    let mut out = String::new();
    let r = &solution.report;
    let _ = writeln!(out, "{SOLUTION_HEADER}");
    let _ = writeln!(out, "mesh_sha256 {}", mesh.checksum());
    let _ = writeln!(out, "n_dofs {} n_constrained {} nnz {}", r.n_dofs, r.n_constrained, r.nnz);
    let _ = writeln!(out, "residual {:.6e}", r.residual);
    let _ = writeln!(out, "edges {}", solution.stress.len());
    for s in &solution.stress {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", s.c.x, s.c.y, s.d);
    }
    let _ = writeln!(out, "cells {}", solution.displacement.len());
    for u in &solution.displacement {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", u.a.x, u.a.y, u.b);
    }
    out
}

/// Parses a solution file; returns the solution and the recorded mesh checksum.
pub fn read_solution(text: &str) -> Result<(Solution, String)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let err = |line: usize, msg: &str| Error::SolutionFormat { line, msg: msg.to_string() };
    let mut next = |what: &str| lines.next().ok_or_else(|| err(0, &format!("missing {what}")));

    let (n, l) = next("header")?;
    if l != SOLUTION_HEADER {
        return Err(err(n, "expected header 'vemhr-solution v1'"));
    }
    let keyed = |(n, l): (usize, &str), key: &str| -> Result<Vec<String>> {
        let mut it = l.split_whitespace();
        if it.next() != Some(key) {
            return Err(err(n, &format!("expected '{key}'")));
        }
        Ok(it.map(str::to_string).collect())
    };
    let num = |n: usize, s: &str| -> Result<f64> { s.parse::<f64>().map_err(|_| err(n, "bad number")) };
    let int = |n: usize, s: &str| -> Result<usize> { s.parse::<usize>().map_err(|_| err(n, "bad integer")) };

    let line = next("checksum")?;
    let checksum = keyed(line, "mesh_sha256")?.first().cloned().ok_or_else(|| err(line.0, "missing checksum"))?;
    let line = next("counts")?;
    let counts = keyed(line, "n_dofs")?;
    if counts.len() != 5 {
        return Err(err(line.0, "bad counts line"));
    }
    let n_dofs = int(line.0, &counts[0])?;
    let n_constrained = int(line.0, &counts[2])?;
    let nnz = int(line.0, &counts[4])?;
    let line = next("residual")?;
    let residual = num(line.0, keyed(line, "residual")?.first().map(String::as_str).unwrap_or(""))?;

    let mut triples = |key: &str| -> Result<Vec<[f64; 3]>> {
        let line = next(key)?;
        let count = int(line.0, keyed(line, key)?.first().map(String::as_str).unwrap_or(""))?;
        (0..count)
            .map(|_| {
                let (n, l) = next("row")?;
                let v: Vec<f64> = l.split_whitespace().map(|t| num(n, t)).collect::<Result<_>>()?;
                <[f64; 3]>::try_from(v).map_err(|_| err(n, "expected three numbers"))
            })
            .collect()
    };
    let stress = triples("edges")?.iter().map(|t| EdgeTractionDof::from_slice(t)).collect();
    let displacement = triples("cells")?.iter().map(|t| RigidMotion::new(Point2::new(t[0], t[1]), t[2])).collect();
    if let Some((n, _)) = lines.next() {
        return Err(err(n, "trailing content"));
    }
    Ok((Solution { stress, displacement, report: SolveReport { n_dofs, n_constrained, nnz, residual } }, checksum))
}

/// Discrete inf-sup constant
/// `min_v max_τ (div τ, v) / (‖τ‖_Σ ‖v‖)` with `‖τ‖²_Σ = a_h(τ, τ) + ‖div τ‖²`,
/// over all traction unknowns (no essential conditions). Dense; meant for
/// small meshes.
pub fn inf_sup_estimate(mesh: &PolyMesh, material: &IsotropicMaterial, options: &AssemblyOptions) -> Result<f64> {
    let zero = |_: Point2| Point2::zeros();
    let kinds = vec![None; mesh.n_edges()];
    let locals = local_matrices(mesh, material, &zero, &kinds, options);
    let dofs = DofMap::new(mesh);
    let (ns, nd) = (dofs.n_stress(), dofs.n_displacement());
    let mut a = DMatrix::<f64>::zeros(ns, ns);
    let mut b = DMatrix::<f64>::zeros(nd, ns);
    let mut mass = DVector::<f64>::zeros(nd);
    for (c, local) in locals.iter().enumerate() {
        let idx: Vec<usize> = mesh.cells[c].edges.iter().flat_map(|&e| (0..3).map(move |i| 3 * e + i)).collect();
        for (jl, &j) in idx.iter().enumerate() {
            for (il, &i) in idx.iter().enumerate() {
                a[(i, j)] += local.a[(il, jl)];
            }
            for r in 0..3 {
                b[(3 * c + r, j)] += local.b[(r, jl)];
            }
        }
        let g = &mesh.cells[c].geometry;
        mass[3 * c] = g.area;
        mass[3 * c + 1] = g.area;
        mass[3 * c + 2] = g.polar_moment();
    }
    // M^{-1/2} B
    let mut bs = b;
    for r in 0..nd {
        bs.row_mut(r).scale_mut(1.0 / mass[r].sqrt());
    }
    let sigma_norm = a + bs.transpose() * &bs;
    let chol = sigma_norm.cholesky().ok_or_else(|| Error::Factorization("Σ-norm matrix is not definite".into()))?;
    let x = chol.solve(&bs.transpose());
    let k: DMatrix<f64> = &bs * x;
    let k = (&k + k.transpose()) * 0.5;
    let min = k.symmetric_eigenvalues().min();
    Ok(min.max(0.0).sqrt())
}

//! Error measures, convergence rates, point probes and export.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::assembly::Solution;
use crate::element::{div_reconstruction, mean_stress, rm_projection, ElementFrame};
use crate::error::{Error, Result};
use crate::material::{IsotropicMaterial, SymTensor2};
use crate::mesh::PolyMesh;
use crate::quadrature::{edge_rule, polygon_rule};
use crate::Point2;

/// `(Σ_e κ |e| ∫_e |(σ - σ_h) n|²)^{1/2}`, an edge-based measure scaling like
/// the elastic energy.
pub fn error_sigma<S: Fn(Point2) -> SymTensor2 + Sync>(
    mesh: &PolyMesh,
    solution: &Solution,
    material: &IsotropicMaterial,
    sigma: S,
    degree: usize,
) -> f64 {
    error_sigma_with_kappa(mesh, solution, material.kappa(), sigma, degree)
}

pub fn error_sigma_with_kappa<S: Fn(Point2) -> SymTensor2 + Sync>(
    mesh: &PolyMesh,
    solution: &Solution,
    kappa: f64,
    sigma: S,
    degree: usize,
) -> f64 {
    let rule = edge_rule(degree);
    let per_edge: Vec<f64> = mesh
        .edges
        .par_iter()
        .zip(&solution.stress)
        .map(|(e, dof)| {
            let l = e.length;
            kappa * l * l * rule.integrate(|s| (sigma(e.point_at(s)).apply(e.normal) - dof.eval(s, e.normal)).norm_squared())
        })
        .collect();
    per_edge.iter().sum::<f64>().sqrt()
}

/// Divergence of the discrete stress of every cell.
pub fn divergence_field(mesh: &PolyMesh, solution: &Solution) -> Vec<crate::element::RigidMotion> {
    (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let frame = ElementFrame::new(mesh, c);
            div_reconstruction(&frame, &frame.gather(&solution.stress))
        })
        .collect()
}

/// `(Σ_E ∫_E |div σ - div σ_h|²)^{1/2}`.
pub fn error_div<D: Fn(Point2) -> Point2 + Sync>(mesh: &PolyMesh, solution: &Solution, div_sigma: D, degree: usize) -> f64 {
    let div_h = divergence_field(mesh, solution);
    cell_sum(mesh, |c, x| (div_sigma(x) - div_h[c].eval(x, mesh.cells[c].geometry.centroid)).norm_squared(), degree)
        .sqrt()
}

/// `(Σ_E ∫_E |u - u_h|²)^{1/2}`.
pub fn error_u<U: Fn(Point2) -> Point2 + Sync>(mesh: &PolyMesh, solution: &Solution, u: U, degree: usize) -> f64 {
    cell_sum(
        mesh,
        |c, x| (u(x) - solution.displacement[c].eval(x, mesh.cells[c].geometry.centroid)).norm_squared(),
        degree,
    )
    .sqrt()
}

/// `Σ_E ∫_E g(E, x)`, summed in cell order.
fn cell_sum<G: Fn(usize, Point2) -> f64 + Sync>(mesh: &PolyMesh, g: G, degree: usize) -> f64 {
    let parts: Vec<f64> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let cell = &mesh.cells[c];
            let rule = polygon_rule(&mesh.cell_coords(c), cell.geometry.centroid, degree);
            rule.integrate(|x| g(c, x))
        })
        .collect();
    parts.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorReport {
    pub e_sigma: f64,
    pub e_sigma_div: f64,
    pub e_u: f64,
    pub h_bar: f64,
    pub n_dof: usize,
}

/// Per-cell equilibrium defect `‖div σ_h + Π_RM f‖_{L²(E)}`.
#[derive(Debug, Clone)]
pub struct EquilibriumReport {
    pub per_cell: Vec<f64>,
    pub max_defect: f64,
    /// `‖f‖_{L²(Ω)}`
    pub load_norm: f64,
}

pub fn equilibrium_defect<F: Fn(Point2) -> Point2 + Sync>(
    mesh: &PolyMesh,
    solution: &Solution,
    f: F,
    degree: usize,
) -> EquilibriumReport {
    let div_h = divergence_field(mesh, solution);
    let per_cell: Vec<f64> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let frame = ElementFrame::new(mesh, c);
            let pf = rm_projection(&frame, &f, degree);
            let a = div_h[c].a + pf.a;
            let b = div_h[c].b + pf.b;
            // the rigid-motion basis is orthogonal about the centroid
            (frame.area * a.norm_squared() + frame.polar_moment() * b * b).sqrt()
        })
        .collect();
    EquilibriumReport {
        max_defect: per_cell.iter().copied().fold(0.0, f64::max),
        per_cell,
        load_norm: cell_sum(mesh, |_, x| f(x).norm_squared(), degree).sqrt(),
    }
}

/// Least-squares slope of `log e` against `log h`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: Option<f64>,
    /// Indices of the levels used.
    pub used: Vec<usize>,
    /// Levels in the window left out because their error is zero or not finite.
    pub excluded: Vec<usize>,
}

/// Fits over the last `last_k` levels.
pub fn fit_rate(h: &[f64], e: &[f64], last_k: usize) -> RateFit {
    let start = h.len().saturating_sub(last_k);
    let (used, excluded): (Vec<usize>, Vec<usize>) =
        (start..h.len()).partition(|&i| e[i] > 0.0 && e[i].is_finite() && h[i] > 0.0 && h[i].is_finite());
    let slope = if used.len() >= 2 {
        let x: Vec<f64> = used.iter().map(|&i| h[i].ln()).collect();
        let y: Vec<f64> = used.iter().map(|&i| e[i].ln()).collect();
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    } else {
        None
    };
    RateFit { slope, used, excluded }
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub level: usize,
    pub errors: Option<ErrorReport>,
    /// Why the level has no errors.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub levels: Vec<LevelResult>,
    /// Rates of `E_σ`, `E_{σ,div}`, `E_u`.
    pub fits: [RateFit; 3],
}

pub const DEFAULT_RATE_WINDOW: usize = 3;

pub fn convergence_rates(levels: Vec<LevelResult>, last_k: usize) -> RateTable {
    let ok: Vec<&ErrorReport> = levels.iter().filter_map(|l| l.errors.as_ref()).collect();
    let h: Vec<f64> = ok.iter().map(|e| e.h_bar).collect();
    let fit = |get: fn(&ErrorReport) -> f64| fit_rate(&h, &ok.iter().map(|e| get(e)).collect::<Vec<_>>(), last_k);
    let fits = [fit(|e| e.e_sigma), fit(|e| e.e_sigma_div), fit(|e| e.e_u)];
    RateTable { levels, fits }
}

pub const CSV_HEADER: &str = "level,h_bar,n_dof,E_sigma,E_sigma_div,E_u,rate_sigma,rate_div,rate_u";

/// Convergence table; each row's rates are taken against the previous
/// successful level.
pub fn write_convergence_csv(levels: &[LevelResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let mut prev: Option<&ErrorReport> = None;
    for l in levels {
        match &l.errors {
            Some(e) => {
                let rate = |a: f64, b: f64| match prev {
                    Some(p) => {
                        let r = (a / b).ln() / (e.h_bar / p.h_bar).ln();
                        if r.is_finite() { format!("{r:.6}") } else { String::new() }
                    }
                    None => String::new(),
                };
                let (rs, rd, ru) = match prev {
                    Some(p) => (rate(e.e_sigma, p.e_sigma), rate(e.e_sigma_div, p.e_sigma_div), rate(e.e_u, p.e_u)),
                    None => (String::new(), String::new(), String::new()),
                };
                let _ = writeln!(
                    out,
                    "{},{:.10e},{},{:.10e},{:.10e},{:.10e},{rs},{rd},{ru}",
                    l.level, e.h_bar, e.n_dof, e.e_sigma, e.e_sigma_div, e.e_u
                );
                prev = Some(e);
            }
            None => {
                let _ = writeln!(out, "{},nan,0,nan,nan,nan,,,", l.level);
            }
        }
    }
    out
}

/// Displacement of the cell whose centroid is nearest to `point`, evaluated
/// at that centroid.
pub fn probe_displacement(mesh: &PolyMesh, solution: &Solution, point: Point2) -> Result<Point2> {
    let (cell, _) = mesh
        .cells
        .iter()
        .enumerate()
        .map(|(i, c)| (i, (c.geometry.centroid - point).norm_squared()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::EmptyMesh)?;
    let u = solution.displacement[cell];
    Ok(u.eval(mesh.cells[cell].geometry.centroid, mesh.cells[cell].geometry.centroid))
}

/// `Π_E σ_h` of every cell.
pub fn mean_stress_field(mesh: &PolyMesh, solution: &Solution) -> Vec<SymTensor2> {
    (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let frame = ElementFrame::new(mesh, c);
            let dofs = frame.gather(&solution.stress);
            let div = div_reconstruction(&frame, &dofs);
            mean_stress(&frame, &dofs, &div)
        })
        .collect()
}

/// Plane-strain von Mises stress of `Π_E σ_h`, per cell.
pub fn von_mises_field(mesh: &PolyMesh, solution: &Solution, material: &IsotropicMaterial) -> Vec<f64> {
    mean_stress_field(mesh, solution).iter().map(|s| material.von_mises(s)).collect()
}

/// Legacy VTK polydata with cell data: centroid displacement, von Mises
/// stress and the components of `Π_E σ_h`.
pub fn write_vtk(mesh: &PolyMesh, solution: &Solution, material: &IsotropicMaterial) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "vemhr solution");
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET POLYDATA");
    let _ = writeln!(out, "POINTS {} double", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(out, "{:.10e} {:.10e} 0", v.x, v.y);
    }
    let size: usize = mesh.cells.iter().map(|c| c.vertices.len() + 1).sum();
    let _ = writeln!(out, "POLYGONS {} {size}", mesh.n_cells());
    for c in &mesh.cells {
        let _ = write!(out, "{}", c.vertices.len());
        for v in &c.vertices {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    let n = mesh.n_cells();
    let _ = writeln!(out, "CELL_DATA {n}");
    let _ = writeln!(out, "VECTORS displacement double");
    for (c, u) in solution.displacement.iter().enumerate() {
        let x = mesh.cells[c].geometry.centroid;
        let v = u.eval(x, x);
        let _ = writeln!(out, "{:.10e} {:.10e} 0", v.x, v.y);
    }
    let stresses = mean_stress_field(mesh, solution);
    let mut scalar = |name: &str, values: &mut dyn Iterator<Item = f64>| {
        let _ = writeln!(out, "SCALARS {name} double 1");
        let _ = writeln!(out, "LOOKUP_TABLE default");
        for v in values {
            let _ = writeln!(out, "{v:.10e}");
        }
    };
    scalar("von_mises", &mut stresses.iter().map(|s| material.von_mises(s)));
    scalar("sigma_xx", &mut stresses.iter().map(|s| s.t11));
    scalar("sigma_yy", &mut stresses.iter().map(|s| s.t22));
    scalar("sigma_xy", &mut stresses.iter().map(|s| s.t12));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, solve, BoundaryKind, BoundarySpec, SolveReport};
    use crate::element::{interpolate, EdgeTractionDof, RigidMotion};
    use crate::mesh::{build_topology, generate_mesh, Domain, MeshKind};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn unit_square() -> PolyMesh {
        build_topology(vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)], vec![vec![0, 1, 2, 3]]).unwrap()
    }

    fn solution(stress: Vec<EdgeTractionDof>, displacement: Vec<RigidMotion>) -> Solution {
        Solution { stress, displacement, report: SolveReport { n_dofs: 0, n_constrained: 0, nnz: 0, residual: 0.0 } }
    }

    #[test]
    fn constant_stress_has_zero_error() {
        let m = generate_mesh(MeshKind::PolyVoronoiCvt, 4, Domain::UnitSquare, 1).unwrap();
        let s0 = SymTensor2::new(2.0, -1.0, 0.5);
        let sol = solution(interpolate(&m, |_| s0, 2), vec![RigidMotion::default(); m.n_cells()]);
        let mat = IsotropicMaterial::from_lame(1.0, 1.0).unwrap();
        assert!(error_sigma(&m, &sol, &mat, |_| s0, 6) < 1e-12);
        assert!(error_div(&m, &sol, |_| Point2::zeros(), 6) < 1e-12);
        for s in mean_stress_field(&m, &sol) {
            assert!((s - s0).norm() < 1e-12);
        }
    }

    #[test]
    fn single_edge_contribution() {
        // one unit edge with (σ - σ_h) n = n and κ = 1 contributes |e| · 1
        let tri = build_topology(vec![p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)], vec![vec![0, 1, 2]]).unwrap();
        let e0 = &tri.edges[0];
        assert_relative_eq!(e0.length, 1.0);
        let stress: Vec<EdgeTractionDof> = tri
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| if i == 0 { EdgeTractionDof::new(-e.normal, 0.0) } else { EdgeTractionDof::default() })
            .collect();
        let sol = solution(stress, vec![RigidMotion::default()]);
        assert_relative_eq!(error_sigma_with_kappa(&tri, &sol, 1.0, |_| SymTensor2::default(), 6), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn displacement_projection_remainder() {
        let m = unit_square();
        let sol = solution(vec![EdgeTractionDof::default(); 4], vec![RigidMotion::new(p(0.5, 0.0), 0.0)]);
        assert_relative_eq!(error_u(&m, &sol, |x| p(x.x, 0.0), 6).powi(2), 1.0 / 12.0, epsilon = 1e-14);
        assert_relative_eq!(probe_displacement(&m, &sol, p(0.5, 0.5)).unwrap(), p(0.5, 0.0));
        let empty = PolyMesh { vertices: vec![], cells: vec![], edges: vec![], metadata: Default::default() };
        assert!(matches!(probe_displacement(&empty, &sol, p(0.0, 0.0)), Err(Error::EmptyMesh)));
    }

    #[test]
    fn probe_picks_the_nearest_centroid() {
        let m = generate_mesh(MeshKind::QuadStructured, 4, Domain::UnitSquare, 0).unwrap();
        let rigid = RigidMotion::new(p(0.3, -0.2), 0.7);
        let x0 = p(0.5, 0.5);
        // a global rigid motion, written per cell about its centroid
        let disp: Vec<RigidMotion> = m
            .cells
            .iter()
            .map(|c| RigidMotion::new(rigid.eval(c.geometry.centroid, x0), rigid.b))
            .collect();
        let sol = solution(vec![EdgeTractionDof::default(); m.n_edges()], disp);
        let probe = p(0.9, 0.95);
        let expected = rigid.eval(p(0.875, 0.875), x0);
        assert_relative_eq!(probe_displacement(&m, &sol, probe).unwrap(), expected, epsilon = 1e-15);
        assert!(error_u(&m, &sol, |x| rigid.eval(x, x0), 6) < 1e-14);
    }

    #[test]
    fn von_mises_values() {
        let m = generate_mesh(MeshKind::HexStructured, 3, Domain::UnitSquare, 0).unwrap();
        let mat = IsotropicMaterial::from_lame(1.0, 1.0).unwrap();
        let zero = solution(vec![EdgeTractionDof::default(); m.n_edges()], vec![RigidMotion::default(); m.n_cells()]);
        assert!(von_mises_field(&m, &zero, &mat).iter().all(|&v| v == 0.0));
        let tau = 0.8;
        let shear = SymTensor2::new(0.0, 0.0, tau);
        let sol = solution(interpolate(&m, |_| shear, 2), vec![RigidMotion::default(); m.n_cells()]);
        for v in von_mises_field(&m, &sol, &mat) {
            assert_relative_eq!(v, 3f64.sqrt() * tau, epsilon = 1e-12);
        }
    }

    #[test]
    fn rates_on_synthetic_data() {
        let h = [0.5, 0.25, 0.125, 0.0625];
        let lin: Vec<f64> = h.iter().map(|x| 3.0 * x).collect();
        let quad: Vec<f64> = h.iter().map(|x| x * x).collect();
        assert_relative_eq!(fit_rate(&h, &lin, 3).slope.unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(fit_rate(&h, &quad, 3).slope.unwrap(), 2.0, epsilon = 1e-12);
        let with_zero = [0.1, 0.05, 0.0, 0.0125];
        let fit = fit_rate(&h, &with_zero, 3);
        assert_eq!(fit.excluded, vec![2]);
        assert_eq!(fit.used, vec![1, 3]);
        assert_relative_eq!(fit.slope.unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(fit_rate(&h, &[0.0; 4], 3).slope, None);
    }

    proptest! {
        #[test]
        fn rate_fit_recovers_power_laws(
            c in 0.01f64..100.0,
            rate in 0.2f64..4.0,
            h0 in 0.05f64..1.0,
            ratio in 1.3f64..3.0,
            k in 2usize..6,
        ) {
            let h: Vec<f64> = (0..6).map(|i| h0 / ratio.powi(i)).collect();
            let e: Vec<f64> = h.iter().map(|x| c * x.powf(rate)).collect();
            let s = fit_rate(&h, &e, k).slope.unwrap();
            prop_assert!((s - rate).abs() < 1e-12 * rate.max(1.0) * 10.0);
        }
    }

    #[test]
    fn csv_layout() {
        let level = |n: usize, h: f64| LevelResult {
            level: n,
            errors: Some(ErrorReport { e_sigma: h, e_sigma_div: h * h, e_u: h, h_bar: h, n_dof: n * 10 }),
            failure: None,
        };
        let failed = LevelResult { level: 32, errors: None, failure: Some("singular".into()) };
        let csv = write_convergence_csv(&[level(8, 0.125), level(16, 0.0625), failed, level(64, 0.015625)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].ends_with(",,,"));
        let row: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(row.len(), 9);
        assert_eq!(row[6], "1.000000");
        assert_eq!(row[7], "2.000000");
        assert!(lines[3].starts_with("32,nan"));
        // the rate skips the failed level
        assert_eq!(lines[4].split(',').nth(6), Some("1.000000"));
        let table = convergence_rates(vec![level(8, 0.125), level(16, 0.0625), level(64, 0.015625)], 3);
        assert_relative_eq!(table.fits[1].slope.unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn equilibrium_and_vtk_for_a_solved_problem() {
        let m = generate_mesh(MeshKind::PolyVoronoiRandom, 4, Domain::UnitSquare, 5).unwrap();
        let mat = IsotropicMaterial::from_lame(1.0, 1.0).unwrap();
        let f = |x: Point2| p((3.0 * x.y).sin(), x.x * x.x + 1.0);
        let spec = BoundarySpec::Uniform(BoundaryKind::Displacement(Arc::new(|_| Point2::zeros())));
        let sol = solve(&assemble(&m, &mat, &f, &spec, &Default::default()).unwrap()).unwrap();
        let eq = equilibrium_defect(&m, &sol, f, 6);
        assert!(eq.max_defect <= 1e-10 * eq.load_norm, "{} {}", eq.max_defect, eq.load_norm);

        let vtk = write_vtk(&m, &sol, &mat);
        assert!(vtk.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(vtk.contains(&format!("CELL_DATA {}", m.n_cells())));
        assert_eq!(vtk.matches("LOOKUP_TABLE default").count(), 4);
        assert_eq!(vtk.lines().count(), 5 + m.vertices.len() + 1 + m.n_cells() + 1 + 1 + m.n_cells() + 4 * (2 + m.n_cells()));
    }
}

//! Run configuration and the benchmark drivers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::assembly::{assemble, solve_with_tolerance, AssemblyOptions, Solution};
use crate::element::{Stabilization, StabilizationVariant};
use crate::error::{Error, Result};
use crate::mesh::{generate_mesh, Domain, MeshKind, PolyMesh};
use crate::postproc::{
    convergence_rates, equilibrium_defect, error_div, error_sigma, error_u, probe_displacement, write_vtk,
    ErrorReport, LevelResult, RateTable, DEFAULT_RATE_WINDOW,
};
use crate::problems::{check_exact_solution, cook, problem, test_incompressible, ProblemId, ProblemSpec, COOK_POINT_A};
use crate::quadrature::DEFAULT_DEGREE;

/// Everything a run depends on. Serialized as flat `key = value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemId,
    /// Poisson ratio for Cook's membrane.
    pub nu: f64,
    /// Lamé constants overriding the nearly incompressible defaults.
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub kinds: Vec<MeshKind>,
    /// Resolution of a single generated mesh.
    pub n: usize,
    pub domain: Domain,
    pub levels: Vec<usize>,
    pub stabilization: StabilizationVariant,
    pub kappa_scale: f64,
    pub quadrature_degree: usize,
    pub solver_tolerance: f64,
    pub seed: u64,
    pub rate_window: usize,
    /// Cook only: resolution of the quadrilateral overkill reference.
    pub reference_level: usize,
    /// Cook only: Poisson ratios to run.
    pub nus: Vec<f64>,
    pub mesh: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub vtk: Option<PathBuf>,
}

pub const COOK_NUS: [f64; 2] = [1.0 / 3.0, 0.499995];

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemId::TestB,
            nu: 1.0 / 3.0,
            lambda: None,
            mu: None,
            kinds: vec![MeshKind::QuadStructured],
            n: 8,
            domain: Domain::UnitSquare,
            levels: vec![8, 16, 32, 64],
            stabilization: StabilizationVariant::Diameter,
            kappa_scale: 1.0,
            quadrature_degree: DEFAULT_DEGREE,
            solver_tolerance: crate::assembly::RESIDUAL_TOLERANCE,
            seed: 1,
            rate_window: DEFAULT_RATE_WINDOW,
            reference_level: 128,
            nus: COOK_NUS.to_vec(),
            mesh: None,
            out: None,
            csv: None,
            vtk: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("invalid value '{v}' for '{key}'")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse(key, s)).collect()
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub const KEYS: [&'static str; 21] = [
        "problem", "nu", "lambda", "mu", "kinds", "n", "domain", "levels", "stab", "kappa_scale", "quad_degree", "solver_tol",
        "seed", "rate_window", "reference_level", "nus", "mesh", "out", "csv", "vtk", "kind",
    ];

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "problem" => self.problem = v.parse()?,
            "nu" => self.nu = parse(key, v)?,
            "lambda" => self.lambda = Some(parse(key, v)?),
            "mu" => self.mu = Some(parse(key, v)?),
            "kinds" | "kind" => {
                self.kinds = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect::<Result<_>>()?
            }
            "n" => self.n = parse(key, v)?,
            "domain" => self.domain = v.parse()?,
            "levels" => self.levels = parse_list(key, v)?,
            "stab" => self.stabilization = v.parse()?,
            "kappa_scale" => self.kappa_scale = parse(key, v)?,
            "quad_degree" => self.quadrature_degree = parse(key, v)?,
            "solver_tol" => self.solver_tolerance = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "rate_window" => self.rate_window = parse(key, v)?,
            "reference_level" => self.reference_level = parse(key, v)?,
            "nus" => self.nus = parse_list(key, v)?,
            "mesh" => self.mesh = Some(v.into()),
            "out" => self.out = Some(v.into()),
            "csv" => self.csv = Some(v.into()),
            "vtk" => self.vtk = Some(v.into()),
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_entries(text: &str) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (k, v) in Self::parse_entries(text)? {
            c.set(&k, &v)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.kinds.is_empty() {
            return bad("no mesh kind".into());
        }
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.levels.is_empty() || self.levels.contains(&0) {
            return bad("levels must be positive".into());
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return bad("levels must be strictly increasing".into());
        }
        if !(self.nu > -1.0 && self.nu < 0.5) || self.nus.iter().any(|n| !(*n > -1.0 && *n < 0.5)) {
            return bad("Poisson ratio must lie in (-1, 0.5)".into());
        }
        if !(self.kappa_scale > 0.0 && self.kappa_scale.is_finite()) {
            return bad("kappa_scale must be positive".into());
        }
        if !(1..=20).contains(&self.quadrature_degree) {
            return bad("quad_degree must lie in 1..=20".into());
        }
        if !(self.solver_tolerance > 0.0 && self.solver_tolerance < 1.0) {
            return bad("solver_tol must lie in (0, 1)".into());
        }
        if self.rate_window < 2 {
            return bad("rate_window must be at least 2".into());
        }
        if self.reference_level == 0 {
            return bad("reference_level must be positive".into());
        }
        if self.lambda.is_some() != self.mu.is_some() {
            return bad("lambda and mu must be given together".into());
        }
        if let (Some(l), Some(m)) = (self.lambda, self.mu) {
            crate::material::IsotropicMaterial::from_lame(l, m)?;
        }
        Ok(())
    }

    /// Canonical `key = value` form, one field per line, sorted by key.
    pub fn to_text(&self) -> String {
        let mut m: BTreeMap<&str, String> = BTreeMap::new();
        m.insert("problem", self.problem.to_string());
        m.insert("nu", format!("{:?}", self.nu));
        if let (Some(l), Some(mu)) = (self.lambda, self.mu) {
            m.insert("lambda", format!("{l:?}"));
            m.insert("mu", format!("{mu:?}"));
        }
        m.insert("kinds", join(&self.kinds));
        m.insert("n", self.n.to_string());
        m.insert("domain", self.domain.to_string());
        m.insert("levels", join(&self.levels));
        m.insert("stab", self.stabilization.to_string());
        m.insert("kappa_scale", format!("{:?}", self.kappa_scale));
        m.insert("quad_degree", self.quadrature_degree.to_string());
        m.insert("solver_tol", format!("{:?}", self.solver_tolerance));
        m.insert("seed", self.seed.to_string());
        m.insert("rate_window", self.rate_window.to_string());
        m.insert("reference_level", self.reference_level.to_string());
        m.insert("nus", self.nus.iter().map(|n| format!("{n:?}")).collect::<Vec<_>>().join(","));
        for (k, v) in [("mesh", &self.mesh), ("out", &self.out), ("csv", &self.csv), ("vtk", &self.vtk)] {
            if let Some(p) = v {
                m.insert(k, p.display().to_string());
            }
        }
        m.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn assembly_options(&self) -> AssemblyOptions {
        AssemblyOptions {
            stabilization: Stabilization { variant: self.stabilization, kappa_scale: self.kappa_scale },
            quadrature_degree: self.quadrature_degree,
        }
    }

    /// The problem described by this configuration.
    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        match (self.problem, self.lambda, self.mu) {
            (ProblemId::TestIncompressible, Some(l), Some(m)) => test_incompressible(l, m),
            (id, _, _) => problem(id, self.nu),
        }
    }
}

/// Assembles and solves one problem on one mesh.
pub fn solve_problem(mesh: &PolyMesh, spec: &ProblemSpec, config: &RunConfig) -> Result<Solution> {
    let system = assemble(mesh, &spec.material, spec.body_force.as_ref(), &spec.boundary, &config.assembly_options())?;
    solve_with_tolerance(&system, config.solver_tolerance)
}

/// The three error measures of a solution against the exact bundle.
pub fn evaluate_errors(mesh: &PolyMesh, spec: &ProblemSpec, solution: &Solution, degree: usize) -> Result<ErrorReport> {
    let exact = spec.exact.as_ref().ok_or_else(|| Error::Config(format!("{} has no exact solution", spec.id)))?;
    Ok(ErrorReport {
        e_sigma: error_sigma(mesh, solution, &spec.material, exact.sigma.as_ref(), degree),
        e_sigma_div: error_div(mesh, solution, exact.div_sigma.as_ref(), degree),
        e_u: error_u(mesh, solution, exact.u.as_ref(), degree),
        h_bar: mesh.mean_edge_length(),
        n_dof: solution.report.n_dofs,
    })
}

/// One solved level of a convergence study with its equilibrium defect.
#[derive(Debug, Clone)]
pub struct LevelRun {
    pub result: LevelResult,
    /// Largest per-cell `‖div σ_h + Π_RM f‖`.
    pub max_equilibrium_defect: f64,
    pub load_norm: f64,
}

fn run_level(spec: &ProblemSpec, kind: MeshKind, n: usize, config: &RunConfig) -> Result<LevelRun> {
    let mesh = generate_mesh(kind, n, spec.domain, config.seed)?;
    let solution = solve_problem(&mesh, spec, config)?;
    let errors = evaluate_errors(&mesh, spec, &solution, config.quadrature_degree)?;
    let eq = equilibrium_defect(&mesh, &solution, spec.body_force.as_ref(), config.quadrature_degree);
    Ok(LevelRun {
        result: LevelResult { level: n, errors: Some(errors), failure: None },
        max_equilibrium_defect: eq.max_defect,
        load_norm: eq.load_norm,
    })
}

#[derive(Debug, Clone)]
pub struct ConvergenceRun {
    pub kind: MeshKind,
    pub table: RateTable,
    pub levels: Vec<LevelRun>,
}

impl ConvergenceRun {
    pub fn csv(&self) -> String {
        crate::postproc::write_convergence_csv(&self.table.levels)
    }
}

/// Refinement study of a problem with an exact solution on one mesh family.
/// A failing level is recorded and the study continues.
pub fn run_convergence(config: &RunConfig, kind: MeshKind) -> Result<ConvergenceRun> {
    config.validate()?;
    let spec = config.problem_spec()?;
    if spec.exact.is_none() {
        return Err(Error::Config(format!("{} has no exact solution", spec.id)));
    }
    if let Some(r) = check_exact_solution(&spec, 20, config.seed) {
        if !r.passes(1e-8) {
            return Err(Error::Config(format!("exact solution of {} is inconsistent: {r:?}", spec.id)));
        }
    }
    let levels: Vec<LevelRun> = config
        .levels
        .iter()
        .map(|&n| {
            run_level(&spec, kind, n, config).unwrap_or_else(|e| LevelRun {
                result: LevelResult { level: n, errors: None, failure: Some(e.to_string()) },
                max_equilibrium_defect: f64::NAN,
                load_norm: f64::NAN,
            })
        })
        .collect();
    let table = convergence_rates(levels.iter().map(|l| l.result.clone()).collect(), config.rate_window);
    Ok(ConvergenceRun { kind, table, levels })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CookPoint {
    pub level: usize,
    pub n_dof: usize,
    pub v_a: f64,
    /// Largest per-cell `‖div σ_h‖`; the membrane carries no body load.
    pub max_equilibrium_defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CookCurve {
    pub kind: MeshKind,
    pub nu: f64,
    pub points: Vec<CookPoint>,
    /// Why levels were skipped.
    pub failures: Vec<(usize, String)>,
}

#[derive(Debug, Clone)]
pub struct CookRun {
    pub curves: Vec<CookCurve>,
    /// `(ν, v_A)` of the overkill quadrilateral runs.
    pub references: Vec<(f64, f64)>,
    /// Plane-strain von Mises field of the finest mesh of the first curve.
    pub vtk: Option<String>,
    pub min_von_mises: f64,
}

impl CookRun {
    pub fn reference(&self, nu: f64) -> Option<f64> {
        self.references.iter().find(|r| r.0 == nu).map(|r| r.1)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("kind,nu,level,n_dof,v_A,v_A_reference\n");
        for c in &self.curves {
            let r = self.reference(c.nu).unwrap_or(f64::NAN);
            for p in &c.points {
                let _ = writeln!(out, "{},{:?},{},{},{:.10e},{:.10e}", c.kind, c.nu, p.level, p.n_dof, p.v_a, r);
            }
        }
        out
    }
}

/// Vertical displacement at the tip probe and the von Mises range of one
/// Cook solve.
pub fn cook_tip(mesh: &PolyMesh, spec: &ProblemSpec, config: &RunConfig) -> Result<(f64, Solution)> {
    let solution = solve_problem(mesh, spec, config)?;
    Ok((probe_displacement(mesh, &solution, COOK_POINT_A)?.y, solution))
}

/// Tip displacement sequences for every mesh kind and Poisson ratio, plus
/// the overkill references.
pub fn run_cook(config: &RunConfig) -> Result<CookRun> {
    config.validate()?;
    let mut curves = Vec::new();
    let mut references = Vec::new();
    let mut vtk = None;
    let mut min_von_mises = f64::INFINITY;
    for &nu in &config.nus {
        let spec = cook(nu)?;
        let reference_mesh = generate_mesh(MeshKind::QuadStructured, config.reference_level, spec.domain, config.seed)?;
        let (v_ref, _) = cook_tip(&reference_mesh, &spec, config)?;
        references.push((nu, v_ref));
        for &kind in &config.kinds {
            let mut curve = CookCurve { kind, nu, points: Vec::new(), failures: Vec::new() };
            let mut finest: Option<(PolyMesh, Solution)> = None;
            for &n in &config.levels {
                let run = generate_mesh(kind, n, spec.domain, config.seed)
                    .and_then(|mesh| cook_tip(&mesh, &spec, config).map(|r| (mesh, r)));
                match run {
                    Ok((mesh, (v_a, sol))) => {
                        let eq = equilibrium_defect(&mesh, &sol, spec.body_force.as_ref(), config.quadrature_degree);
                        curve.points.push(CookPoint {
                            level: n,
                            n_dof: sol.report.n_dofs,
                            v_a,
                            max_equilibrium_defect: eq.max_defect,
                        });
                        finest = Some((mesh, sol));
                    }
                    Err(e) => curve.failures.push((n, e.to_string())),
                }
            }
            if let Some((mesh, sol)) = finest {
                let vm = crate::postproc::von_mises_field(&mesh, &sol, &spec.material);
                min_von_mises = vm.iter().copied().fold(min_von_mises, f64::min);
                if vtk.is_none() {
                    vtk = Some(write_vtk(&mesh, &sol, &spec.material));
                }
            }
            curves.push(curve);
        }
    }
    Ok(CookRun { curves, references, vtk, min_von_mises })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        let mut c = RunConfig::default();
        c.set("problem", "test-inc").unwrap();
        c.set("kinds", "quad,rvor").unwrap();
        c.set("levels", "4, 8,16").unwrap();
        c.set("lambda", "1").unwrap();
        c.set("mu", "0.5").unwrap();
        c.set("csv", "out/rates.csv").unwrap();
        c.set("domain", "cook").unwrap();
        c.set("n", "5").unwrap();
        c.validate().unwrap();
        let text = c.to_text();
        assert_eq!(RunConfig::from_text(&text).unwrap(), c);
        assert!(text.contains("kinds = quad_structured,poly_voronoi_random\n"));
    }

    #[test]
    fn config_errors() {
        let mut c = RunConfig::default();
        assert!(c.set("colour", "blue").is_err());
        assert!(c.set("levels", "8,x").is_err());
        assert!(c.set("problem", "test-z").is_err());
        c.set("levels", "16,8").unwrap();
        assert!(c.validate().is_err());
        assert!(RunConfig::from_text("levels 8").is_err());
        assert!(RunConfig::from_text("lambda = 3").is_err());
        assert!(RunConfig::from_text("nu = 0.5").is_err());
        let c = RunConfig::from_text("# comment\n\nseed = 7 # trailing\n").unwrap();
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn small_convergence_run() {
        let mut c = RunConfig::default();
        c.levels = vec![2, 4, 8];
        let run = run_convergence(&c, MeshKind::QuadStructured).unwrap();
        assert_eq!(run.table.levels.len(), 3);
        assert!(run.table.levels.iter().all(|l| l.errors.is_some()));
        assert!(run.table.fits[0].slope.unwrap() > 0.5);
        let csv = run.csv();
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(run_convergence(&c, MeshKind::QuadStructured).unwrap().csv(), csv);
    }

    #[test]
    fn cook_requires_no_exact_solution_for_its_driver() {
        let mut c = RunConfig { problem: ProblemId::Cook, ..Default::default() };
        c.levels = vec![2, 4];
        c.reference_level = 4;
        c.nus = vec![1.0 / 3.0];
        assert!(run_convergence(&c, MeshKind::QuadStructured).is_err());
        let run = run_cook(&c).unwrap();
        assert_eq!(run.curves[0].points.len(), 2);
        let v = run.curves[0].points[1].v_a;
        assert_eq!(v, run.reference(1.0 / 3.0).unwrap());
        assert!(v > 0.0);
        assert!(run.min_von_mises >= 0.0);
        assert!(run.csv().starts_with("kind,nu,level,n_dof,v_A,v_A_reference\n"));
    }
}

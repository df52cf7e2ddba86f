//! `vemhr`: mesh generation, single solves and the benchmark studies.
//!
//! Every flag has a config-file key of the same name (with `-` replaced by
//! `_`); `--config` is read first and flags given on the command line win.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use vemhr_core::assembly::write_solution;
use vemhr_core::bench::{evaluate_errors, run_convergence, run_cook, solve_problem, RunConfig};
use vemhr_core::mesh::{generate_mesh, read_mesh, write_mesh};
use vemhr_core::problems::ProblemId;
use vemhr_core::Error;

#[derive(Parser, Debug)]
#[command(name = "vemhr", version, about = "Mixed virtual elements for 2D elasticity")]
struct Cli {
    /// Flat `key = value` file; command-line flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mesh utilities.
    Mesh {
        #[command(subcommand)]
        command: MeshCommand,
    },
    /// Solve one problem on a mesh file.
    Solve(SolveArgs),
    /// Refinement study against an exact solution.
    Convergence(ConvergenceArgs),
    /// Tip displacement study of Cook's membrane.
    Cook(CookArgs),
}

#[derive(Subcommand, Debug)]
enum MeshCommand {
    /// Generate a mesh and write it in the plain-text mesh format.
    Gen(GenArgs),
}

/// Options shared by every command that assembles a system.
#[derive(Args, Debug, Default)]
struct MethodArgs {
    /// Stabilization variant: stab1 (cell diameter) or stab1bis (edge length).
    #[arg(long)]
    stab: Option<String>,
    #[arg(long)]
    kappa_scale: Option<String>,
    #[arg(long)]
    quad_degree: Option<String>,
    #[arg(long)]
    solver_tol: Option<String>,
    #[arg(long)]
    seed: Option<String>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    n: Option<String>,
    /// unit-square or cook
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// test-a, test-b, test-inc or cook
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    nu: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    mesh: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    method: MethodArgs,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    #[arg(long)]
    problem: Option<String>,
    /// One or more mesh kinds, comma separated.
    #[arg(long, alias = "kinds")]
    kind: Option<String>,
    /// Resolutions per direction, e.g. 8,16,32,64.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    rate_window: Option<String>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    method: MethodArgs,
}

#[derive(Args, Debug)]
struct CookArgs {
    #[arg(long, alias = "kind")]
    kinds: Option<String>,
    #[arg(long)]
    levels: Option<String>,
    /// Poisson ratios, comma separated.
    #[arg(long)]
    nus: Option<String>,
    #[arg(long)]
    reference_level: Option<String>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    vtk: Option<PathBuf>,
    #[command(flatten)]
    method: MethodArgs,
}

/// Failure classes, mapped to exit codes 2 and 3.
#[derive(Debug)]
enum Failure {
    Validation(anyhow::Error),
    Solver(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_solver_failure() {
            Failure::Solver(e.into())
        } else {
            Failure::Validation(e.into())
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(inner) if inner.is_solver_failure() => Failure::Solver(e),
            _ => Failure::Validation(e),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

struct Overrides(Vec<(&'static str, String)>);

impl Overrides {
    fn new() -> Self {
        Self(Vec::new())
    }

    fn add(&mut self, key: &'static str, value: &Option<String>) -> &mut Self {
        if let Some(v) = value {
            self.0.push((key, v.clone()));
        }
        self
    }

    fn path(&mut self, key: &'static str, value: &Option<PathBuf>) -> &mut Self {
        if let Some(v) = value {
            self.0.push((key, v.display().to_string()));
        }
        self
    }

    fn method(&mut self, m: &MethodArgs) -> &mut Self {
        self.add("stab", &m.stab)
            .add("kappa_scale", &m.kappa_scale)
            .add("quad_degree", &m.quad_degree)
            .add("solver_tol", &m.solver_tol)
            .add("seed", &m.seed)
    }
}

/// Config file entries first, then the command-line flags.
fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig, Failure> {
    let mut config = RunConfig::default();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(Failure::Validation)?;
        for (k, v) in RunConfig::parse_entries(&text)? {
            config.set(&k, &v)?;
        }
    }
    for (k, v) in &overrides.0 {
        config.set(k, v)?;
    }
    config.validate()?;
    Ok(config)
}

/// Writes through a temporary sibling so readers never see a partial file.
fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", path.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// The output itself plus the configuration that produced it.
fn write_output(path: &Path, contents: &str, config: &RunConfig) -> Outcome {
    write_atomic(path, contents).map_err(Failure::Validation)?;
    let mut cfg = path.as_os_str().to_owned();
    cfg.push(".config");
    write_atomic(Path::new(&cfg), &config.to_text()).map_err(Failure::Validation)?;
    Ok(())
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, Failure> {
    value.as_deref().ok_or_else(|| Failure::Validation(anyhow::anyhow!("missing --{flag} (or '{flag}' in the config file)")))
}

fn mesh_gen(config: &RunConfig) -> Outcome {
    let out = required(&config.out, "out")?;
    let &[kind] = config.kinds.as_slice() else {
        return Err(Failure::Validation(anyhow::anyhow!("mesh gen takes exactly one kind")));
    };
    let mesh = generate_mesh(kind, config.n, config.domain, config.seed)?;
    write_atomic(out, &write_mesh(&mesh)).map_err(Failure::Validation)?;
    println!("{kind}: {} cells, {} edges, {} vertices", mesh.n_cells(), mesh.n_edges(), mesh.vertices.len());
    Ok(())
}

fn solve(config: &RunConfig) -> Outcome {
    let mesh_path = required(&config.mesh, "mesh")?;
    let out = required(&config.out, "out")?;
    let text = std::fs::read_to_string(mesh_path)
        .with_context(|| format!("reading mesh {}", mesh_path.display()))
        .map_err(Failure::Validation)?;
    let mesh = read_mesh(&text)?;
    let spec = config.problem_spec()?;
    let solution = solve_problem(&mesh, &spec, config)?;
    write_output(out, &write_solution(&mesh, &solution), config)?;
    let r = &solution.report;
    println!("dofs {} constrained {} nnz {} residual {:.3e}", r.n_dofs, r.n_constrained, r.nnz, r.residual);
    if spec.exact.is_some() {
        let e = evaluate_errors(&mesh, &spec, &solution, config.quadrature_degree)?;
        println!("E_sigma {:.6e} E_sigma_div {:.6e} E_u {:.6e}", e.e_sigma, e.e_sigma_div, e.e_u);
    }
    Ok(())
}

/// `rates.csv` becomes `rates.quad_structured.csv` when several kinds run.
fn per_kind_path(path: &Path, kind: &str, several: bool) -> PathBuf {
    if !several {
        return path.to_path_buf();
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{kind}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{kind}"),
    };
    path.with_file_name(name)
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into())
}

fn convergence(config: &RunConfig) -> Outcome {
    let several = config.kinds.len() > 1;
    let mut failed_levels = 0;
    for &kind in &config.kinds {
        let run = run_convergence(config, kind)?;
        let csv = run.csv();
        match &config.csv {
            Some(path) => write_output(&per_kind_path(path, kind.name(), several), &csv, config)?,
            None => print!("{csv}"),
        }
        let [s, d, u] = &run.table.fits;
        println!(
            "{kind}: rate E_sigma {} E_sigma_div {} E_u {}",
            fmt_rate(s.slope),
            fmt_rate(d.slope),
            fmt_rate(u.slope)
        );
        for l in &run.table.levels {
            if let Some(reason) = &l.failure {
                eprintln!("{kind} level {}: {reason}", l.level);
                failed_levels += 1;
            }
        }
    }
    if failed_levels > 0 {
        return Err(Failure::Solver(anyhow::anyhow!("{failed_levels} level(s) failed")));
    }
    Ok(())
}

fn cook(config: &RunConfig) -> Outcome {
    let run = run_cook(config)?;
    let csv = run.csv();
    match &config.csv {
        Some(path) => write_output(path, &csv, config)?,
        None => print!("{csv}"),
    }
    if let (Some(path), Some(vtk)) = (&config.vtk, &run.vtk) {
        write_atomic(path, vtk).map_err(Failure::Validation)?;
    }
    for (nu, v) in &run.references {
        println!("nu {nu}: reference v_A {v:.6}");
    }
    let failures: usize = run.curves.iter().map(|c| c.failures.len()).sum();
    for c in &run.curves {
        for (level, reason) in &c.failures {
            eprintln!("{} nu {} level {level}: {reason}", c.kind, c.nu);
        }
    }
    if failures > 0 {
        return Err(Failure::Solver(anyhow::anyhow!("{failures} level(s) failed")));
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    let config_path = cli.config.as_deref();
    let mut o = Overrides::new();
    match cli.command {
        Command::Mesh { command: MeshCommand::Gen(a) } => {
            o.add("kind", &a.kind).add("n", &a.n).add("domain", &a.domain).add("seed", &a.seed).path("out", &a.out);
            mesh_gen(&load_config(config_path, &o)?)
        }
        Command::Solve(a) => {
            o.add("problem", &a.problem)
                .add("nu", &a.nu)
                .add("lambda", &a.lambda)
                .add("mu", &a.mu)
                .path("mesh", &a.mesh)
                .path("out", &a.out)
                .method(&a.method);
            solve(&load_config(config_path, &o)?)
        }
        Command::Convergence(a) => {
            o.add("problem", &a.problem)
                .add("kinds", &a.kind)
                .add("levels", &a.levels)
                .add("lambda", &a.lambda)
                .add("mu", &a.mu)
                .add("rate_window", &a.rate_window)
                .path("csv", &a.csv)
                .method(&a.method);
            convergence(&load_config(config_path, &o)?)
        }
        Command::Cook(a) => {
            o.add("kinds", &a.kinds)
                .add("levels", &a.levels)
                .add("nus", &a.nus)
                .add("reference_level", &a.reference_level)
                .path("csv", &a.csv)
                .path("vtk", &a.vtk)
                .method(&a.method);
            let mut config = load_config(config_path, &o)?;
            config.problem = ProblemId::Cook;
            cook(&config)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("solver failure: {e:#}");
            ExitCode::from(3)
        }
    }
}

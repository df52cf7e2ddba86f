//! Benchmark problems: manufactured solutions on the unit square and Cook's
//! membrane.
//!
//! Exact stresses and loads are hand-coded closed forms. They are checked
//! against the displacement by central finite differences in
//! [`check_exact_solution`] before being trusted.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{BoundaryKind, BoundarySpec};
use crate::error::{Error, Result};
use crate::material::{IsotropicMaterial, SymTensor2};
use crate::mesh::Domain;
use crate::{Point2, TensorField, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemId {
    TestA,
    TestB,
    TestIncompressible,
    Cook,
}

impl ProblemId {
    pub fn name(&self) -> &'static str {
        match self {
            Self::TestA => "test-a",
            Self::TestB => "test-b",
            Self::TestIncompressible => "test-inc",
            Self::Cook => "cook",
        }
    }
}

impl std::str::FromStr for ProblemId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "test-a" => Ok(Self::TestA),
            "test-b" => Ok(Self::TestB),
            "test-inc" => Ok(Self::TestIncompressible),
            "cook" => Ok(Self::Cook),
            _ => Err(Error::Config(format!("unknown problem '{s}' (test-a, test-b, test-inc, cook)"))),
        }
    }
}

impl std::fmt::Display for ProblemId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Analytic solution used for error measurement.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: VectorField,
    pub sigma: TensorField,
    /// `div σ`, which equals `-f`.
    pub div_sigma: VectorField,
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub id: ProblemId,
    pub domain: Domain,
    pub material: IsotropicMaterial,
    pub body_force: VectorField,
    pub boundary: BoundarySpec,
    pub exact: Option<ExactSolution>,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("id", &self.id)
            .field("domain", &self.domain)
            .field("material", &self.material)
            .field("boundary", &self.boundary)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

fn p(x: f64, y: f64) -> Point2 {
    Point2::new(x, y)
}

fn manufactured(
    id: ProblemId,
    material: IsotropicMaterial,
    u: VectorField,
    sigma: TensorField,
    body_force: VectorField,
    dirichlet: VectorField,
) -> ProblemSpec {
    let f = body_force.clone();
    ProblemSpec {
        id,
        domain: Domain::UnitSquare,
        material,
        body_force,
        boundary: BoundarySpec::Uniform(BoundaryKind::Displacement(dirichlet)),
        exact: Some(ExactSolution { u, sigma, div_sigma: Arc::new(move |x| -f(x)) }),
    }
}

/// `u = (x³ - 3xy², y³ - 3x²y)`, `f = 0`, `λ = μ = 1`, Dirichlet data `g = u`.
pub fn test_a() -> ProblemSpec {
    let u: VectorField = Arc::new(|x: Point2| p(x.x.powi(3) - 3.0 * x.x * x.y * x.y, x.y.powi(3) - 3.0 * x.x * x.x * x.y));
    let strain = |x: Point2| {
        let d = 3.0 * x.x * x.x - 3.0 * x.y * x.y;
        SymTensor2::new(d, -d, -6.0 * x.x * x.y)
    };
    let material = IsotropicMaterial::from_lame(1.0, 1.0).expect("valid constants");
    let sigma: TensorField = Arc::new(move |x| material.stress(&strain(x)));
    manufactured(ProblemId::TestA, material, u.clone(), sigma, Arc::new(|_| Point2::zeros()), u)
}

/// `u_1 = u_2 = sin(πx) sin(πy)`, homogeneous Dirichlet data, `λ = μ = 1`.
pub fn test_b() -> ProblemSpec {
    let (lambda, mu) = (1.0, 1.0);
    let u: VectorField = Arc::new(|x: Point2| {
        let s = (PI * x.x).sin() * (PI * x.y).sin();
        p(s, s)
    });
    let strain = |x: Point2| {
        let (sx, cx, sy, cy) = ((PI * x.x).sin(), (PI * x.x).cos(), (PI * x.y).sin(), (PI * x.y).cos());
        SymTensor2::new(PI * cx * sy, PI * sx * cy, 0.5 * PI * (sx * cy + cx * sy))
    };
    let f: VectorField = Arc::new(move |x: Point2| {
        let s = (PI * x.x).sin() * (PI * x.y).sin();
        let c = (PI * x.x).cos() * (PI * x.y).cos();
        let v = -PI * PI * (-(3.0 * mu + lambda) * s + (mu + lambda) * c);
        p(v, v)
    });
    let material = IsotropicMaterial::from_lame(lambda, mu).expect("valid constants");
    let sigma: TensorField = Arc::new(move |x| material.stress(&strain(x)));
    manufactured(ProblemId::TestB, material, u, sigma, f, Arc::new(|_| Point2::zeros()))
}

/// Divergence-free `u_1 = ½ sin²(2πx) sin(2πy) cos(2πy)`,
/// `u_2 = -½ sin²(2πy) sin(2πx) cos(2πx)`, homogeneous Dirichlet data.
///
/// Since `div u = 0` the stress `2μ ε(u)` and the load do not depend on `λ`,
/// so the same solution serves the compressible comparison run.
pub fn test_incompressible(lambda: f64, mu: f64) -> Result<ProblemSpec> {
    let material = IsotropicMaterial::from_lame(lambda, mu)?;
    let u: VectorField = Arc::new(|x: Point2| {
        let s2x = (2.0 * PI * x.x).sin().powi(2);
        let s2y = (2.0 * PI * x.y).sin().powi(2);
        p(0.25 * s2x * (4.0 * PI * x.y).sin(), -0.25 * s2y * (4.0 * PI * x.x).sin())
    });
    // σ = 2μ ε + λ tr(ε) I with tr ε = 0; written without the λ terms, whose
    // cancellation would otherwise leave an O(ε_mach λ) error
    let sigma: TensorField = Arc::new(move |x| incompressible_strain(x) * (2.0 * mu));
    let f: VectorField = Arc::new(move |x: Point2| {
        let s2x = (2.0 * PI * x.x).sin().powi(2);
        let s2y = (2.0 * PI * x.y).sin().powi(2);
        let k = 2.0 * mu * PI * PI;
        p(-k * (4.0 * PI * x.y).sin() * (1.0 - 4.0 * s2x), k * (4.0 * PI * x.x).sin() * (1.0 - 4.0 * s2y))
    });
    Ok(manufactured(ProblemId::TestIncompressible, material, u, sigma, f, Arc::new(|_| Point2::zeros())))
}

/// `∇u` of the divergence-free field, as `[[∂x u1, ∂y u1], [∂x u2, ∂y u2]]`.
pub fn incompressible_gradient(x: Point2) -> [[f64; 2]; 2] {
    let (a, b) = (4.0 * PI * x.x, 4.0 * PI * x.y);
    let s2x = (2.0 * PI * x.x).sin().powi(2);
    let s2y = (2.0 * PI * x.y).sin().powi(2);
    let d = 0.5 * PI * a.sin() * b.sin();
    [[d, PI * s2x * b.cos()], [-PI * s2y * a.cos(), -d]]
}

fn incompressible_strain(x: Point2) -> SymTensor2 {
    let g = incompressible_gradient(x);
    SymTensor2::new(g[0][0], g[1][1], 0.5 * (g[0][1] + g[1][0]))
}

/// The λ and μ of the nearly incompressible benchmark.
pub const INCOMPRESSIBLE_LAME: (f64, f64) = (1e5, 0.5);

pub const COOK_YOUNG: f64 = 70.0;
/// Vertical traction on the loaded side.
pub const COOK_LOAD: f64 = 6.25;
pub const COOK_POINT_A: Point2 = Point2::new(48.0, 60.0);

/// Cook's membrane: clamped left side, traction-free top and bottom, uniform
/// vertical traction `q = 6.25` on the right side, `E = 70`.
pub fn cook(nu: f64) -> Result<ProblemSpec> {
    let material = IsotropicMaterial::from_young_poisson_plane_strain(COOK_YOUNG, nu)?;
    let free = || BoundaryKind::Traction(Arc::new(|_| Point2::zeros()));
    let kinds = [
        free(),
        BoundaryKind::Traction(Arc::new(|_| p(0.0, COOK_LOAD))),
        free(),
        BoundaryKind::Displacement(Arc::new(|_| Point2::zeros())),
    ];
    Ok(ProblemSpec {
        id: ProblemId::Cook,
        domain: Domain::Cook,
        material,
        body_force: Arc::new(|_| Point2::zeros()),
        boundary: BoundarySpec::Sides { domain: Domain::Cook, kinds },
        exact: None,
    })
}

/// Builds a problem from its id; `nu` is only used by Cook's membrane.
pub fn problem(id: ProblemId, nu: f64) -> Result<ProblemSpec> {
    match id {
        ProblemId::TestA => Ok(test_a()),
        ProblemId::TestB => Ok(test_b()),
        ProblemId::TestIncompressible => test_incompressible(INCOMPRESSIBLE_LAME.0, INCOMPRESSIBLE_LAME.1),
        ProblemId::Cook => cook(nu),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyReport {
    /// Max of `|D σ - ε_h(u)|` over samples, relative to the largest `|ε_h(u)|`.
    pub strain_mismatch: f64,
    /// Max of `|div_h σ + f|` over samples, relative to the largest `|f|` (or 1).
    pub load_mismatch: f64,
    /// Max of `|div_h σ - div σ|`, same scaling.
    pub divergence_mismatch: f64,
}

impl ConsistencyReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.strain_mismatch <= tol && self.load_mismatch <= tol && self.divergence_mismatch <= tol
    }
}

pub const FD_STEP: f64 = 1e-5;

/// Five-point central difference `g'(0)` with step `h`.
fn central<V, G>(g: G, h: f64) -> V
where
    V: std::ops::Sub<Output = V> + std::ops::Add<Output = V> + std::ops::Mul<f64, Output = V>,
    G: Fn(f64) -> V,
{
    (g(-2.0 * h) - g(2.0 * h) + (g(h) - g(-h)) * 8.0) * (1.0 / (12.0 * h))
}

/// Finite-difference check of an exact bundle at `samples` random points
/// of the unit square: `ε(u)` against `D σ`, and `div σ` against `-f`.
///
/// Strains are compared in compliance form so that nearly incompressible
/// materials do not amplify the differencing error by `λ`.
pub fn check_exact_solution(spec: &ProblemSpec, samples: usize, seed: u64) -> Option<ConsistencyReport> {
    let exact = spec.exact.as_ref()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = FD_STEP;
    let ex = p(1.0, 0.0);
    let ey = p(0.0, 1.0);
    let (mut de, mut se, mut df, mut sf, mut dd) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..samples {
        let x = spec.domain.map(rng.random_range(0.05..0.95), rng.random_range(0.05..0.95));
        let dux = central(|t| exact.u.as_ref()(x + ex * t), h);
        let duy = central(|t| exact.u.as_ref()(x + ey * t), h);
        let eps = SymTensor2::new(dux.x, duy.y, 0.5 * (duy.x + dux.y));
        let sigma = exact.sigma.as_ref()(x);
        de = de.max((spec.material.strain(&sigma) - eps).norm());
        se = se.max(eps.norm());

        let sx = central(|t| exact.sigma.as_ref()(x + ex * t).triple(), h);
        let sy = central(|t| exact.sigma.as_ref()(x + ey * t).triple(), h);
        let div = p(sx[0] + sy[2], sx[2] + sy[1]);
        let f = spec.body_force.as_ref()(x);
        df = df.max((div + f).norm());
        sf = sf.max(f.norm());
        dd = dd.max((div - exact.div_sigma.as_ref()(x)).norm());
    }
    let sf = sf.max(1.0);
    Some(ConsistencyReport { strain_mismatch: de / se.max(1e-300), load_mismatch: df / sf, divergence_mismatch: dd / sf })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn field(f: &VectorField, x: Point2) -> Point2 {
        f.as_ref()(x)
    }

    #[test]
    fn test_a_values() {
        let a = test_a();
        let ex = a.exact.as_ref().unwrap();
        assert_eq!(field(&a.body_force, p(0.3, 0.8)), Point2::zeros());
        assert_relative_eq!(field(&ex.u, p(1.0, 0.0)), p(1.0, 0.0));
        assert_eq!(field(&ex.div_sigma, p(0.2, 0.1)).norm(), 0.0);
        // tr ε = 0 so σ = 2με
        let s = ex.sigma.as_ref()(p(0.5, 0.25));
        assert_relative_eq!(s.t11, 2.0 * (0.75 - 0.1875));
        assert_relative_eq!(s.t12, 2.0 * -0.75);
    }

    #[test]
    fn test_b_values() {
        let b = test_b();
        let ex = b.exact.as_ref().unwrap();
        let f = field(&b.body_force, p(0.5, 0.5));
        assert_relative_eq!(f, p(4.0 * PI * PI, 4.0 * PI * PI), epsilon = 1e-12);
        for t in [0.0, 0.3, 1.0] {
            for x in [p(t, 0.0), p(t, 1.0), p(0.0, t), p(1.0, t)] {
                assert!(field(&ex.u, x).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn incompressible_values() {
        let (l, m) = INCOMPRESSIBLE_LAME;
        assert_relative_eq!(l / m, 2e5);
        let spec = test_incompressible(l, m).unwrap();
        let ex = spec.exact.as_ref().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let x = p(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            let g = incompressible_gradient(x);
            assert!((g[0][0] + g[1][1]).abs() < 1e-10);
            // the printed form: ½ sin²(2πx) sin(2πy) cos(2πy)
            let printed = 0.5 * (2.0 * PI * x.x).sin().powi(2) * (2.0 * PI * x.y).sin() * (2.0 * PI * x.y).cos();
            assert_relative_eq!(field(&ex.u, x).x, printed, epsilon = 1e-14);
        }
        for t in [0.0, 0.4, 1.0] {
            for x in [p(t, 0.0), p(t, 1.0), p(0.0, t), p(1.0, t)] {
                assert!(field(&ex.u, x).norm() < 1e-15);
            }
        }
        // the stress does not see λ
        let other = test_incompressible(1.0, m).unwrap();
        let x = p(0.31, 0.77);
        let a = ex.sigma.as_ref()(x);
        let b = other.exact.as_ref().unwrap().sigma.as_ref()(x);
        assert!((a - b).norm() < 1e-9 * a.norm());
    }

    #[test]
    fn exact_bundles_are_self_consistent() {
        let specs = [test_a(), test_b(), test_incompressible(1e5, 0.5).unwrap(), test_incompressible(1.0, 0.5).unwrap()];
        for spec in &specs {
            let r = check_exact_solution(spec, 20, 1).unwrap();
            assert!(r.passes(1e-8), "{:?} {r:?}", spec.id);
        }
    }

    #[test]
    fn consistency_check_catches_a_wrong_load() {
        let mut spec = test_b();
        spec.body_force = Arc::new(|x: Point2| p(x.x, 0.0) * 10.0);
        assert!(!check_exact_solution(&spec, 20, 1).unwrap().passes(1e-8));
        let mut spec = test_b();
        spec.material = IsotropicMaterial::from_lame(2.0, 1.0).unwrap();
        assert!(!check_exact_solution(&spec, 20, 1).unwrap().passes(1e-8));
    }

    #[test]
    fn cook_values() {
        let c = cook(1.0 / 3.0).unwrap();
        assert_relative_eq!(c.material.young(), 70.0, epsilon = 1e-12);
        assert!(check_exact_solution(&c, 20, 0).is_none());
        // load resultant: q times the length of the right side
        let corners = Domain::Cook.corners();
        assert_relative_eq!(COOK_LOAD * (corners[2] - corners[1]).norm(), 100.0);
        let nearly = cook(0.499995).unwrap();
        assert!(nearly.material.lambda / nearly.material.mu > 1e4);
    }

    #[test]
    fn problem_ids() {
        for id in [ProblemId::TestA, ProblemId::TestB, ProblemId::TestIncompressible, ProblemId::Cook] {
            assert_eq!(id.name().parse::<ProblemId>().unwrap(), id);
            assert_eq!(problem(id, 0.3).unwrap().id, id);
        }
        assert!("test-c".parse::<ProblemId>().is_err());
    }
}

use std::sync::Arc;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vemhr_core::assembly::{assemble, inf_sup_estimate, solve, BoundaryKind, BoundarySpec};
use vemhr_core::bench::{evaluate_errors, solve_problem, RunConfig};
use vemhr_core::element::{interpolate, rm_projection, ElementFrame};
use vemhr_core::material::{IsotropicMaterial, SymTensor2};
use vemhr_core::mesh::{build_topology, generate_mesh, Domain, MeshKind, PolyMesh};
use vemhr_core::postproc::equilibrium_defect;
use vemhr_core::problems::test_b;
use vemhr_core::Point2;

fn kind() -> impl Strategy<Value = MeshKind> {
    proptest::sample::select(MeshKind::ALL.to_vec())
}

fn domain() -> impl Strategy<Value = Domain> {
    prop_oneof![Just(Domain::UnitSquare), Just(Domain::Cook)]
}

/// The same mesh with shuffled vertex ids, cell order and loop start points.
fn relabel(mesh: &PolyMesh, seed: u64) -> PolyMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..mesh.vertices.len()).collect();
    perm.shuffle(&mut rng);
    let mut vertices = vec![Point2::zeros(); perm.len()];
    for (old, &new) in perm.iter().enumerate() {
        vertices[new] = mesh.vertices[old];
    }
    let mut loops: Vec<Vec<usize>> = mesh
        .cells
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut l: Vec<usize> = c.vertices.iter().map(|&v| perm[v]).collect();
            let k = i % l.len();
            l.rotate_left(k);
            l
        })
        .collect();
    loops.shuffle(&mut rng);
    build_topology(vertices, loops).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_meshes_are_valid(kind in kind(), n in 1usize..10, seed in 0u64..1000, domain in domain()) {
        let mesh = generate_mesh(kind, n, domain, seed).unwrap();
        let area = domain.area();
        prop_assert!((mesh.total_area() - area).abs() <= 1e-10 * area);
        for (c, cell) in mesh.cells.iter().enumerate() {
            // discrete divergence theorem for constants
            let mut closure = Point2::zeros();
            for (&e, &s) in cell.edges.iter().zip(&cell.signs) {
                closure += mesh.edges[e].normal * (s * mesh.edges[e].length);
            }
            prop_assert!(closure.norm() <= 1e-12 * cell.geometry.diameter, "cell {c}: {closure:?}");
        }
        // interior edges are seen with opposite signs by their two cells
        let mut seen = vec![Vec::new(); mesh.n_edges()];
        for cell in &mesh.cells {
            for (&e, &s) in cell.edges.iter().zip(&cell.signs) {
                seen[e].push(s);
            }
        }
        for (e, signs) in seen.iter().enumerate() {
            match signs.as_slice() {
                [s] => prop_assert!(mesh.edges[e].is_boundary() && s.abs() == 1.0),
                [a, b] => prop_assert_eq!(a + b, 0.0),
                other => prop_assert!(false, "edge {e} seen {} times", other.len()),
            }
        }
    }

    #[test]
    fn global_matrix_is_exactly_symmetric(kind in kind(), n in 1usize..5, seed in 0u64..100) {
        let mesh = generate_mesh(kind, n, Domain::UnitSquare, seed).unwrap();
        let mat = IsotropicMaterial::from_lame(2.0, 0.7).unwrap();
        let bc = BoundarySpec::Uniform(BoundaryKind::Displacement(Arc::new(|x: Point2| x)));
        let system = assemble(&mesh, &mat, &|x: Point2| x, &bc, &Default::default()).unwrap();
        let m = system.to_dense();
        prop_assert_eq!(&m, &m.transpose());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn patch_test_is_exact(kind in kind(), n in 1usize..6, seed in 0u64..100, lambda in 0.1f64..1e4, mu in 0.1f64..10.0) {
        let mesh = generate_mesh(kind, n, Domain::UnitSquare, seed).unwrap();
        let mat = IsotropicMaterial::from_lame(lambda, mu).unwrap();
        let u = |x: Point2| Point2::new(x.x, 0.0);
        let bc = BoundarySpec::Uniform(BoundaryKind::Displacement(Arc::new(u)));
        let sol = solve(&assemble(&mesh, &mat, &|_| Point2::zeros(), &bc, &Default::default()).unwrap()).unwrap();
        let sigma = mat.stress(&SymTensor2::new(1.0, 0.0, 0.0));
        let scale = sigma.norm();
        for (dof, exact) in sol.stress.iter().zip(interpolate(&mesh, |_| sigma, 2)) {
            prop_assert!((dof.c - exact.c).norm() + (dof.d - exact.d).abs() <= 1e-9 * scale);
        }
        for c in 0..mesh.n_cells() {
            let frame = ElementFrame::new(&mesh, c);
            let pu = rm_projection(&frame, u, 4);
            let uh = sol.displacement[c];
            prop_assert!((uh.a - pu.a).norm() + (uh.b - pu.b).abs() * frame.diameter <= 1e-9);
        }
    }

    #[test]
    fn discrete_equilibrium_holds_cellwise(
        kind in kind(),
        n in 1usize..6,
        seed in 0u64..100,
        coef in proptest::array::uniform6(-5.0f64..5.0),
    ) {
        let mesh = generate_mesh(kind, n, Domain::UnitSquare, seed).unwrap();
        let mat = IsotropicMaterial::from_lame(1.0, 1.0).unwrap();
        let f = move |x: Point2| {
            Point2::new(coef[0] + coef[1] * x.x * x.y + coef[2] * (3.0 * x.y).sin(), coef[3] + coef[4] * x.x * x.x + coef[5] * x.y)
        };
        let bc = BoundarySpec::Uniform(BoundaryKind::Displacement(Arc::new(|_| Point2::zeros())));
        let sol = solve(&assemble(&mesh, &mat, &f, &bc, &Default::default()).unwrap()).unwrap();
        let eq = equilibrium_defect(&mesh, &sol, f, 6);
        prop_assert!(eq.max_defect <= 1e-9 * eq.load_norm.max(1e-300), "{} vs {}", eq.max_defect, eq.load_norm);
    }

    #[test]
    fn errors_do_not_depend_on_labels(kind in kind(), n in 2usize..6, seed in 0u64..100, shuffle in 0u64..1000) {
        let mesh = generate_mesh(kind, n, Domain::UnitSquare, seed).unwrap();
        let other = relabel(&mesh, shuffle);
        let spec = test_b();
        let config = RunConfig::default();
        let a = evaluate_errors(&mesh, &spec, &solve_problem(&mesh, &spec, &config).unwrap(), 6).unwrap();
        let b = evaluate_errors(&other, &spec, &solve_problem(&other, &spec, &config).unwrap(), 6).unwrap();
        for (x, y) in [(a.e_sigma, b.e_sigma), (a.e_sigma_div, b.e_sigma_div), (a.e_u, b.e_u)] {
            prop_assert!((x - y).abs() <= 1e-10 * x, "{x} vs {y}");
        }
    }
}

/// The discrete inf-sup estimate must not drop by more than 1e-3 relative
/// from one refinement level to the next.
#[test]
fn inf_sup_estimate_is_stable_under_refinement() {
    let materials = [IsotropicMaterial::from_lame(1.0, 1.0).unwrap(), IsotropicMaterial::from_lame(1e5, 0.5).unwrap()];
    for kind in MeshKind::ALL {
        for mat in &materials {
            let values: Vec<f64> = [2, 4, 8, 16]
                .iter()
                .map(|&n| {
                    let mesh = generate_mesh(kind, n, Domain::UnitSquare, 1).unwrap();
                    inf_sup_estimate(&mesh, mat, &Default::default()).unwrap()
                })
                .collect();
            assert!(values.iter().all(|&v| v > 0.1), "{kind}: {values:?}");
            for w in values.windows(2) {
                assert!((w[0] - w[1]) / w[0] <= 1e-3, "{kind} λ={}: {values:?}", mat.lambda);
            }
        }
    }
}

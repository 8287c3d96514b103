use std::f64::consts::PI;

use homoglab::eigensolve::*;
use homoglab::fem::*;
use homoglab::geometry::*;

fn dirichlet_square(h: f64) -> (SymmetricSparseMatrix, SymmetricSparseMatrix) {
    let mesh = build_domain_mesh(Rect::unit(), h).unwrap();
    let s = assemble_stiffness(&mesh).unwrap();
    let m = assemble_mass(&mesh).unwrap();
    let outer = mesh.nodes_on_edges(|_| true);
    let cmap = ConstraintMap::dirichlet(mesh.num_nodes(), (0..mesh.num_nodes()).filter(|&i| outer[i]));
    let red = apply_constraints(&s, &m, None, &cmap).unwrap();
    (red.stiffness, red.mass)
}

fn check_orthonormal(spec: &Spectrum, b: &SymmetricSparseMatrix) {
    for i in 0..spec.len() {
        for j in 0..spec.len() {
            let g = b.bilinear(&spec.eigenvectors[i], &spec.eigenvectors[j]).unwrap();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g - want).abs() < 1e-9, "<u{i}, u{j}>_B = {g}");
        }
    }
}

#[test]
fn unit_square_dirichlet_eigenvalues() {
    let (a, b) = dirichlet_square(1.0 / 32.0);
    let spec = solve_gevp(&a, &b, 4, 1e-9).unwrap();
    let l = &spec.eigenvalues;
    assert!((l[0] / (2.0 * PI * PI) - 1.0).abs() < 0.02);
    assert!((l[1] / (5.0 * PI * PI) - 1.0).abs() < 0.03);
    // the diagonal mesh splits the continuous double eigenvalue slightly
    assert!((l[2] / (5.0 * PI * PI) - 1.0).abs() < 0.03);
    assert!(l.windows(2).all(|w| w[0] <= w[1]));
    assert!(spec.residuals.iter().all(|&r| r <= 1e-9));
    check_orthonormal(&spec, &b);
}

#[test]
fn iterative_and_dense_paths_agree() {
    let (a, b) = dirichlet_square(1.0 / 16.0);
    let dense = solve_gevp_dense(&a, &b).unwrap();
    let opts = SolverOptions {
        dense_limit: 0,
        ..SolverOptions::default()
    };
    let it = solve_gevp_with(&a, &b, 3, &opts).unwrap();
    for j in 0..3 {
        assert!((dense.eigenvalues[j] - it.eigenvalues[j]).abs() < 1e-9 * dense.eigenvalues[j]);
    }
    // the simple first mode is fixed up to sign, which the convention removes
    let d: f64 = dense.eigenvectors[0]
        .iter()
        .zip(&it.eigenvectors[0])
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(d < 1e-7);
}

#[test]
fn shift_moves_every_eigenvalue() {
    let (a, b) = dirichlet_square(1.0 / 16.0);
    let sigma = 7.5;
    let shifted = a.lin_comb(1.0, &b, sigma).unwrap();
    let opts = SolverOptions {
        dense_limit: 0,
        ..SolverOptions::default()
    };
    let s0 = solve_gevp_with(&a, &b, 4, &opts).unwrap();
    let s1 = solve_gevp_with(&shifted, &b, 4, &opts).unwrap();
    for j in 0..4 {
        assert!((s1.eigenvalues[j] - s0.eigenvalues[j] - sigma).abs() < 1e-8 * s1.eigenvalues[j]);
    }
    let argmax = |v: &[f64]| (0..v.len()).max_by(|&i, &j| v[i].abs().total_cmp(&v[j].abs())).unwrap();
    assert_eq!(argmax(&s0.eigenvectors[0]), argmax(&s1.eigenvectors[0]));
}

#[test]
fn solver_is_deterministic() {
    let (a, b) = dirichlet_square(1.0 / 16.0);
    let opts = SolverOptions {
        dense_limit: 0,
        ..SolverOptions::default()
    };
    let s0 = solve_gevp_with(&a, &b, 3, &opts).unwrap();
    let s1 = solve_gevp_with(&a, &b, 3, &opts).unwrap();
    assert_eq!(s0, s1);
}

#[test]
fn source_round_trip() {
    let (a, _) = dirichlet_square(1.0 / 32.0);
    let u: Vec<f64> = (0..a.dim()).map(|i| ((i * 7919) % 113) as f64 / 113.0 - 0.5).collect();
    let rhs = a.mul_vec(&u).unwrap();
    let v = solve_source(&a, &rhs).unwrap();
    let err = u.iter().zip(&v).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(err <= 1e-10 * norm);
}

#[test]
fn singular_source_system_is_an_error() {
    let mesh = build_domain_mesh(Rect::unit(), 0.25).unwrap();
    let s = assemble_stiffness(&mesh).unwrap();
    assert!(matches!(
        solve_source(&s, &vec![1.0; s.dim()]),
        Err(homoglab::Error::Solver(_))
    ));
}

#[test]
fn perforated_problem_at_the_finest_sweep_scale() {
    let cell = build_cell_mesh(0.25, 32, 1.0 / 8.0).unwrap();
    let k = Rect::new(0.25, 0.25, 0.75, 0.75);
    let cfg = DomainConfig::new(1.0 / 16.0, 0.25, 32, 1.0 / 8.0, k).unwrap();
    let mesh = build_perforated_mesh(&cfg, &cell).unwrap();
    let s = assemble_stiffness(&mesh).unwrap();
    let m = assemble_mass(&mesh).unwrap();
    let r = assemble_robin_mass(&mesh, k).unwrap();
    let outer = mesh.nodes_on_edges(|t| *t == EdgeTag::Outer);
    let active = mesh.active_nodes();
    let cmap = ConstraintMap::dirichlet(
        mesh.num_nodes(),
        (0..mesh.num_nodes()).filter(|&i| outer[i] || !active[i]),
    );
    let red = apply_constraints(&s, &m, Some(&r), &cmap).unwrap();
    let a = red.stiffness.add(red.robin.as_ref().unwrap()).unwrap();
    let t = std::time::Instant::now();
    let spec = solve_gevp(&a, &red.mass, 4, 1e-9).unwrap();
    eprintln!(
        "dim {} eigenvalues {:?} in {:?}",
        a.dim(),
        spec.eigenvalues,
        t.elapsed()
    );
    assert!(spec.eigenvalues[0] > 0.0);
    check_orthonormal(&spec, &red.mass);
}

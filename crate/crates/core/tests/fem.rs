use homoglab::fem::*;
use homoglab::geometry::*;
use proptest::prelude::*;

fn k_center() -> Rect {
    Rect::new(0.25, 0.25, 0.75, 0.75)
}

fn perforated(eps: f64, h: f64) -> (Mesh, CellMesh) {
    let cell = build_cell_mesh(0.25, 32, h).unwrap();
    let cfg = DomainConfig::new(eps, 0.25, 32, h, k_center()).unwrap();
    (build_perforated_mesh(&cfg, &cell).unwrap(), cell)
}

fn interpolate(mesh: &Mesh, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    mesh.nodes.iter().map(|&p| f(p)).collect()
}

#[test]
fn stiffness_has_constants_in_kernel() {
    let (mesh, _) = perforated(0.25, 1.0 / 8.0);
    let s = assemble_stiffness(&mesh).unwrap();
    let row_sums = s.mul_vec(&vec![1.0; s.dim()]).unwrap();
    assert!(row_sums.iter().all(|v| v.abs() < 1e-11));
}

#[test]
fn linear_field_energy_is_exact_on_unit_square() {
    let mesh = build_domain_mesh(Rect::unit(), 1.0).unwrap();
    assert_eq!(mesh.triangles.len(), 2);
    let s = assemble_stiffness(&mesh).unwrap();
    let m = assemble_mass(&mesh).unwrap();
    let u = interpolate(&mesh, |p| p[0]);
    assert!((s.quad_form(&u).unwrap() - 1.0).abs() < 1e-15);
    assert!((m.quad_form(&[1.0; 4]).unwrap() - 1.0).abs() < 1e-15);
    let n = norms(&s, &m, &SymmetricSparseMatrix::zeros(4), &u).unwrap();
    assert!((n.h1_semi - 1.0).abs() < 1e-15);
    // int_0^1 int_0^1 x^2 = 1/3, reproduced exactly by the consistent mass for P1 data
    assert!((n.l2 - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn zero_field_has_zero_norms() {
    let (mesh, _) = perforated(0.25, 1.0 / 8.0);
    let s = assemble_stiffness(&mesh).unwrap();
    let m = assemble_mass(&mesh).unwrap();
    let r = assemble_robin_mass(&mesh, k_center()).unwrap();
    let n = norms(&s, &m, &r, &vec![0.0; mesh.num_nodes()]).unwrap();
    assert_eq!((n.l2, n.h1_semi, n.eps_norm_sq), (0.0, 0.0, 0.0));
    assert!(norms(&s, &m, &r, &[1.0]).is_err());
}

#[test]
fn mass_of_perforated_mesh_is_fluid_area() {
    let (mesh, cell) = perforated(0.25, 1.0 / 8.0);
    let m = assemble_mass(&mesh).unwrap();
    let total = m.quad_form(&vec![1.0; m.dim()]).unwrap();
    assert!((total - cell.cell_area()).abs() < 1e-12);
    assert!((total - 0.804910).abs() < 1e-6);
}

#[test]
fn robin_support_is_the_twelve_outer_holes() {
    let eps = 0.25;
    let (mesh, cell) = perforated(eps, 1.0 / 8.0);
    let r = assemble_robin_mass(&mesh, k_center()).unwrap();
    // oracle: classify each lattice cell by whether its hole disk meets K
    let k = k_center();
    let rad = eps * 0.25;
    let mut contributing = 0;
    for iy in 0..4u32 {
        for ix in 0..4u32 {
            let c = [(ix as f64 + 0.5) * eps, (iy as f64 + 0.5) * eps];
            let inside = k.contains([c[0] - rad, c[1] - rad]) && k.contains([c[0] + rad, c[1] + rad]);
            let disjoint = c[0] + rad < k.x0 || c[0] - rad > k.x1 || c[1] + rad < k.y0 || c[1] - rad > k.y1;
            assert!(inside || disjoint);
            let ind = mesh.nodes_on_edges(|t| *t == EdgeTag::HoleBoundary([ix, iy]));
            let u: Vec<f64> = ind.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            let q = r.quad_form(&u).unwrap();
            if inside {
                assert_eq!(q, 0.0);
            } else {
                contributing += 1;
                assert!((q - eps * cell.hole_perimeter).abs() < 1e-13);
            }
        }
    }
    assert_eq!(contributing, 12);
}

#[test]
fn robin_vanishes_when_k_covers_all_holes() {
    let (mesh, _) = perforated(0.25, 1.0 / 8.0);
    let r = assemble_robin_mass(&mesh, Rect::new(0.01, 0.01, 0.99, 0.99)).unwrap();
    assert!(r.triplets().all(|(_, _, v)| v == 0.0) || r.nnz() == 0);
}

#[test]
fn robin_support_lies_on_unmasked_hole_edges() {
    let (mesh, _) = perforated(0.25, 1.0 / 8.0);
    let r = assemble_robin_mass(&mesh, k_center()).unwrap();
    let k = k_center();
    let mut allowed = vec![false; mesh.num_nodes()];
    for e in &mesh.boundary_edges {
        if matches!(e.tag, EdgeTag::HoleBoundary(_)) && !k.contains(edge_midpoint(&mesh, e)) {
            allowed[e.nodes[0]] = true;
            allowed[e.nodes[1]] = true;
        }
    }
    for (i, j, v) in r.triplets() {
        assert!(v == 0.0 || (allowed[i] && allowed[j]));
    }
}

#[test]
fn periodic_reduction_keeps_constants_in_kernel() {
    let cell = build_cell_mesh(0.25, 32, 1.0 / 8.0).unwrap();
    let s = assemble_stiffness(&cell.mesh).unwrap();
    let m = assemble_mass(&cell.mesh).unwrap();
    let inactive: Vec<usize> = cell
        .mesh
        .active_nodes()
        .iter()
        .enumerate()
        .filter(|(_, &a)| !a)
        .map(|(i, _)| i)
        .collect();
    let cmap = ConstraintMap::periodic(cell.mesh.num_nodes(), cell.periodic_pairs().unwrap()).with_fixed(inactive);
    let red = apply_constraints(&s, &m, None, &cmap).unwrap();
    let ones = vec![1.0; red.reduction.dim()];
    let k = red.stiffness.mul_vec(&ones).unwrap();
    assert!(k.iter().all(|v| v.abs() < 1e-12));
    assert!(red.stiffness.is_symmetric() && red.mass.is_symmetric());
    assert!((red.mass.quad_form(&ones).unwrap() - cell.cell_area()).abs() < 1e-13);
}

#[test]
fn dirichlet_on_every_node_is_degenerate() {
    let mesh = build_domain_mesh(Rect::unit(), 0.5).unwrap();
    let s = assemble_stiffness(&mesh).unwrap();
    let cmap = ConstraintMap::dirichlet(mesh.num_nodes(), 0..mesh.num_nodes());
    assert!(matches!(
        apply_constraints(&s, &s, None, &cmap),
        Err(homoglab::Error::Constraint(_))
    ));
}

#[test]
fn assembled_forms_are_bitwise_symmetric_and_mass_is_spd() {
    let (mesh, _) = perforated(0.25, 1.0 / 8.0);
    let s = assemble_stiffness(&mesh).unwrap();
    let m = assemble_mass(&mesh).unwrap();
    let r = assemble_robin_mass(&mesh, k_center()).unwrap();
    assert!(s.is_symmetric() && m.is_symmetric() && r.is_symmetric());
    let fixed: Vec<usize> = mesh
        .active_nodes()
        .iter()
        .enumerate()
        .filter(|(_, &a)| !a)
        .map(|(i, _)| i)
        .collect();
    let red = ConstraintMap::dirichlet(mesh.num_nodes(), fixed).reduction().unwrap();
    let md = red.reduce_matrix(&m).unwrap().to_dense();
    assert!(md.cholesky().is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn forms_are_semidefinite(seed in proptest::collection::vec(-1.0f64..1.0, 145)) {
        let cell = build_cell_mesh(0.25, 32, 1.0 / 8.0).unwrap();
        prop_assume!(cell.mesh.num_nodes() == seed.len());
        let s = assemble_stiffness(&cell.mesh).unwrap();
        let m = assemble_mass(&cell.mesh).unwrap();
        let r = assemble_hole_boundary_mass(&cell.mesh).unwrap();
        prop_assert!(s.quad_form(&seed).unwrap() >= -1e-14);
        prop_assert!(m.quad_form(&seed).unwrap() >= 0.0);
        prop_assert!(r.quad_form(&seed).unwrap() >= 0.0);
        let n = norms(&s, &m, &r, &seed).unwrap();
        prop_assert!(n.eps_norm_sq >= n.h1_semi);
    }

    #[test]
    fn linear_fields_are_integrated_exactly(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -1.0f64..1.0) {
        let mesh = build_domain_mesh(Rect::new(0.25, 0.25, 0.75, 0.75), 1.0 / 8.0).unwrap();
        let s = assemble_stiffness(&mesh).unwrap();
        let u = interpolate(&mesh, |p| a * p[0] + b * p[1] + c);
        let e = s.quad_form(&u).unwrap();
        prop_assert!((e - (a * a + b * b) * 0.25).abs() < 1e-12 * (1.0 + a * a + b * b));
    }
}

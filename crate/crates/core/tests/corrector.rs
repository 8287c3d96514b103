use homoglab::cell::{solve_cell_problem, CellSolution};
use homoglab::corrector::*;
use homoglab::geometry::*;
use homoglab::spectral::*;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn k_center() -> Rect {
    Rect::new(0.25, 0.25, 0.75, 0.75)
}

struct Fixture {
    cell: CellMesh,
    sol: CellSolution,
    a_mesh: Mesh,
    u_hom: Vec<f64>,
}

fn fixture(radius: f64) -> Fixture {
    let cell = build_cell_mesh(radius, 32, 0.125).unwrap();
    let sol = solve_cell_problem(&cell).unwrap();
    let a_mesh = build_domain_mesh(k_center(), 1.0 / 32.0).unwrap();
    let spec = solve_homogenized_evp(&a_mesh, &sol.a_hom, sol.cell_area, 1).unwrap();
    Fixture {
        u_hom: spec.eigenvectors[0].clone(),
        cell,
        sol,
        a_mesh,
    }
}

fn setup(f: &Fixture) -> CorrectorSetup<'_> {
    CorrectorSetup {
        a_mesh: &f.a_mesh,
        a_rect: k_center(),
        cell: &f.cell,
        sol: &f.sol,
    }
}

fn perforated(f: &Fixture, eps: f64) -> DiscreteOperatorBundle {
    let cfg = DomainConfig::new(eps, f.cell.radius, 32, 0.125, k_center()).unwrap();
    perforated_bundle(&cfg, &f.cell, true).unwrap()
}

fn rotation(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// `out_l = sum_k m_lk f_k`
fn mix(f: &[Vec<f64>], m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|l| {
            let mut out = vec![0.0; f[0].len()];
            for (k, v) in f.iter().enumerate() {
                out.iter_mut().zip(v).for_each(|(o, x)| *o += m[(l, k)] * x);
            }
            out
        })
        .collect()
}

#[test]
fn without_holes_the_corrector_is_the_zero_extended_interpolant() {
    let f = fixture(0.0);
    assert!(f.sol.chi.iter().flatten().all(|c| c.abs() < 1e-10));
    let b = perforated(&f, 0.25);
    let u = build_corrector(&setup(&f), &f.u_hom, 0, 0.25, &b.mesh, true).unwrap();
    let plain = interpolate_zero_extended(&f.u_hom, &f.a_mesh, k_center(), &b.mesh).unwrap();
    for (a, p) in u.values.iter().zip(&plain) {
        assert!((a - p).abs() < 1e-10);
    }
}

struct Differences {
    l2: f64,
    energy: f64,
    cutoff_l2: f64,
}

/// Norms of `U - u` with the cutoff off, and of the cutoff-on minus cutoff-off corrector.
fn differences(f: &Fixture, eps: f64) -> Differences {
    let b = perforated(f, eps);
    let on = build_corrector(&setup(f), &f.u_hom, 0, eps, &b.mesh, true).unwrap();
    let off = build_corrector(&setup(f), &f.u_hom, 0, eps, &b.mesh, false).unwrap();
    let plain = b
        .project(&interpolate_zero_extended(&f.u_hom, &f.a_mesh, k_center(), &b.mesh).unwrap())
        .unwrap();
    let d: Vec<f64> = off.values.iter().zip(&plain).map(|(a, p)| a - p).collect();
    let c: Vec<f64> = on.values.iter().zip(&off.values).map(|(a, p)| a - p).collect();
    Differences {
        l2: b.mass.quad_form(&d).unwrap().sqrt(),
        energy: b.eps_norm(&d).unwrap(),
        cutoff_l2: b.mass.quad_form(&c).unwrap().sqrt(),
    }
}

#[test]
fn corrector_consistency_across_eps() {
    let f = fixture(0.25);
    let sweep: Vec<(f64, Differences)> = [0.25, 0.125, 0.0625].iter().map(|&e| (e, differences(&f, e))).collect();
    for w in sweep.windows(2) {
        // the added term is eps times a bounded field
        assert!(w[0].1.l2 >= w[1].1.l2 - 1e-12);
        let ratio = w[0].1.l2 / w[1].1.l2;
        assert!((1.5..=2.5).contains(&ratio), "L2 halving ratio {ratio}");
        // grad of eps chi(x/eps) is O(1), so the energy difference does not shrink
        assert!(w[1].1.energy > 0.5 * w[0].1.energy);
    }
    let scaled: Vec<f64> = sweep.iter().map(|(e, d)| d.cutoff_l2 / e.powf(1.5)).collect();
    let spread = scaled.iter().cloned().fold(0.0, f64::max) / scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread <= 4.0, "cutoff proximity spread {spread}: {scaled:?}");
}

#[test]
fn cutoff_only_acts_in_the_boundary_layer() {
    let f = fixture(0.25);
    let eps = 0.0625;
    let b = perforated(&f, eps);
    let on = build_corrector(&setup(&f), &f.u_hom, 0, eps, &b.mesh, true).unwrap();
    let off = build_corrector(&setup(&f), &f.u_hom, 0, eps, &b.mesh, false).unwrap();
    assert!(on.cutoff_applied && !off.cutoff_applied);
    let mut differ = 0;
    for (i, &x) in b.mesh.nodes.iter().enumerate() {
        let d = k_center().inner_distance(x);
        if k_center().contains_open(x) && d > 2.0 * eps {
            assert_eq!(on.values[i], off.values[i]);
        } else if on.values[i] != off.values[i] {
            differ += 1;
            assert!(d <= 2.0 * eps);
        }
    }
    assert!(differ > 0);
    for (i, &x) in b.mesh.nodes.iter().enumerate() {
        if !k_center().contains_open(x) {
            assert_eq!(on.values[i], 0.0);
        }
    }
}

#[test]
fn cutoff_profile() {
    let a = k_center();
    assert_eq!(cutoff(a, [0.1, 0.5], 0.1), 0.0);
    assert_eq!(cutoff(a, [0.25, 0.5], 0.1), 0.0);
    assert!((cutoff(a, [0.35, 0.5], 0.1) - 0.5).abs() < 1e-12);
    assert_eq!(cutoff(a, [0.5, 0.5], 0.1), 1.0);
}

#[test]
fn procrustes_recovers_known_rotations() {
    let f = fixture(0.25);
    let b = perforated(&f, 0.25);
    let spec = b.eigenpairs(3, 1e-10).unwrap();
    let pair = vec![spec.eigenvectors[1].clone(), spec.eigenvectors[2].clone()];
    for m in [
        DMatrix::identity(2, 2),
        -DMatrix::<f64>::identity(2, 2),
        rotation(0.7),
        rotation(-2.1),
    ] {
        let targets = mix(&pair, &m);
        let res = align_eigenspaces(&pair, &targets, &b).unwrap();
        assert!((&res.rotation - &m).abs().max() < 1e-10);
        assert!(res.heps_errors.iter().chain(&res.l2_errors).all(|e| *e < 1e-8));
        assert!(res.gap < 1e-7);
    }
}

#[test]
fn procrustes_beats_the_identity_matching() {
    let f = fixture(0.25);
    let b = perforated(&f, 0.25);
    let spec = b.eigenpairs(3, 1e-10).unwrap();
    let pair = vec![spec.eigenvectors[1].clone(), spec.eigenvectors[2].clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut targets = mix(&pair, &rotation(1.1));
    for t in &mut targets {
        for v in t.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += 0.05 * z;
        }
    }
    let targets: Vec<Vec<f64>> = targets.iter().map(|t| b.project(t).unwrap()).collect();
    let res = align_eigenspaces(&pair, &targets, &b).unwrap();
    let aligned: f64 = res.l2_errors.iter().map(|e| e * e).sum();
    let naive: f64 = targets
        .iter()
        .zip(&pair)
        .map(|(t, u)| {
            let d: Vec<f64> = t.iter().zip(u).map(|(a, b)| a - b).collect();
            b.mass.quad_form(&d).unwrap()
        })
        .sum();
    assert!(aligned <= naive);
    let det = res.rotation.determinant();
    assert!((det.abs() - 1.0).abs() < 1e-10);
    let orth = res.rotation.transpose() * &res.rotation - DMatrix::identity(2, 2);
    assert!(orth.abs().max() < 1e-10);
    assert!(res.heps_errors.iter().chain(&res.l2_errors).all(|e| *e >= 0.0));
    assert!((0.0..=1.0).contains(&res.gap));
}

#[test]
fn alignment_rejects_orthogonal_families() {
    let f = fixture(0.25);
    let b = perforated(&f, 0.25);
    let spec = b.eigenpairs(2, 1e-10).unwrap();
    let res = align_eigenspaces(&spec.eigenvectors[..1], &spec.eigenvectors[1..2], &b);
    assert!(matches!(res, Err(homoglab::Error::Alignment(_))));
}

#[test]
fn gap_of_spans() {
    let f = fixture(0.25);
    let b = perforated(&f, 0.25);
    let spec = b.eigenpairs(4, 1e-10).unwrap();
    let e = &spec.eigenvectors;
    let m = &b.mass;
    assert!(eigenspace_gap(&e[..2], &e[..2], m).unwrap() < 1e-7);
    assert!((eigenspace_gap(&e[..2], &e[2..4], m).unwrap() - 1.0).abs() < 1e-7);
    let rebased = mix(&e[..2], &DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -0.5, 3.0]));
    assert!(eigenspace_gap(&e[..2], &rebased, m).unwrap() < 1e-7);
    let tilted = vec![
        e[0].clone(),
        e[1].iter().zip(&e[2]).map(|(a, c): (&f64, &f64)| a + 0.3 * c).collect(),
    ];
    let g1 = eigenspace_gap(&e[..2], &tilted, m).unwrap();
    let g2 = eigenspace_gap(&tilted, &e[..2], m).unwrap();
    assert!((g1 - g2).abs() < 1e-12);
    // one tilted direction of angle atan(0.3)
    assert!((g1 - 0.3f64.atan().sin()).abs() < 1e-7);
}

#[test]
fn visik_on_an_eigenfunction_is_sharp() {
    let f = fixture(0.25);
    let b = perforated(&f, 0.25);
    let spec = b.eigenpairs(3, 1e-10).unwrap();
    let res = visik_check(&b, &spec.eigenvectors[0], 1.0 / spec.eigenvalues[0], &spec).unwrap();
    assert!(res.alpha < 1e-7, "alpha {}", res.alpha);
    assert_eq!(res.nearest, 0);
    assert!(res.certificate);
}

#[test]
fn visik_certificate_holds_for_random_fields() {
    let f = fixture(0.25);
    let b = perforated(&f, 0.5);
    let all = b.full_spectrum().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for mu in [0.0, 0.01, 0.05] {
        let u: Vec<f64> = (0..b.num_nodes()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let res = visik_check(&b, &u, mu, &all).unwrap();
        assert!(
            res.certificate,
            "mu {mu}: distance {} alpha {}",
            res.distance, res.alpha
        );
    }
}

#[test]
fn visik_for_the_homogenized_corrector() {
    let f = fixture(0.25);
    let eps = 0.125;
    let b = perforated(&f, eps);
    let spec = b.eigenpairs(6, 1e-9).unwrap();
    let lambda = solve_homogenized_evp(&f.a_mesh, &f.sol.a_hom, f.sol.cell_area, 1)
        .unwrap()
        .eigenvalues[0];
    let u = build_corrector(&setup(&f), &f.u_hom, 0, eps, &b.mesh, true).unwrap();
    let res = visik_check(&b, &u.values, 1.0 / lambda, &spec).unwrap();
    assert!(res.alpha.is_finite() && res.alpha > 0.0);
    assert!(res.certificate);
}

#[test]
fn visik_needs_a_perforated_bundle() {
    let f = fixture(0.25);
    let d = dirichlet_bundle(&f.a_mesh).unwrap();
    let spec = solve_dirichlet_laplacian(&f.a_mesh, 1).unwrap();
    assert!(visik_check(&d, &spec.eigenvectors[0], 1.0, &spec).is_err());
}

#[test]
fn visik_misses_outside_a_truncated_spectrum_are_inconclusive() {
    let f = fixture(0.25);
    let b = perforated(&f, 0.5);
    let all = b.full_spectrum().unwrap();
    let m = all.len() - 1;
    let (u, mu) = (&all.eigenvectors[m], 1.0 / all.eigenvalues[m]);
    let full = visik_check(&b, u, mu, &all).unwrap();
    assert!(full.certificate && full.conclusive && full.nearest == m);
    let mut head = all.clone();
    head.eigenvalues.truncate(3);
    head.eigenvectors.truncate(3);
    head.residuals.truncate(3);
    let cut = visik_check(&b, u, mu, &head).unwrap();
    assert!(!cut.certificate && !cut.conclusive);
}

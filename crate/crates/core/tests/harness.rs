use homoglab::harness::*;
use proptest::prelude::*;

fn small() -> StudyConfig {
    StudyConfig {
        eps_list: vec![0.25, 0.125],
        k: 2,
        h_macro: 1.0 / 32.0,
        lab_samples: 5,
        ..StudyConfig::default()
    }
}

#[test]
fn study_shape_and_ordering() {
    let cfg = small();
    let r = run_study(&cfg).unwrap();
    assert!(r.complete, "{:?}", r.error);
    assert_eq!(r.rows.len(), cfg.eps_list.len() * cfg.k);
    for w in r.rows.windows(2) {
        assert!(w[0].eps > w[1].eps || (w[0].eps == w[1].eps && w[0].j < w[1].j));
    }
    assert!(r
        .rows
        .iter()
        .all(|row| row.heps_err.is_some() && row.gap.is_some() && row.visik_alpha.is_some()));
    assert!(r.fits.len() >= 3);
    assert!(r.fits.iter().all(|f| f.fit.points == 2 && f.fit.r2.is_finite()));
    assert_eq!(r.sweep.len(), 2);
    assert_eq!(r.lambda_hom.len(), 2);
    let cell = r.cell.as_ref().unwrap();
    assert!((cell.c_star - cell.hole_perimeter / cell.cell_area).abs() < 1e-12);
    // trace, volsup per eps; oscillation per eps; three strips; one bound row
    assert_eq!(r.lab.rows.len(), 2 * 2 + 2 + 3 + 1);
    // the first eigenvalue error shrinks over the sweep
    let e = r.series(Series::AbsErr, 1);
    assert!(e.last().unwrap().1 <= e[0].1);
}

#[test]
fn study_body_is_reproducible_across_runs_and_threads() {
    let cfg = small();
    let a = json_body(&run_study_with_threads(&cfg, 1).unwrap()).unwrap();
    let b = json_body(&run_study_with_threads(&cfg, 1).unwrap()).unwrap();
    let c = json_body(&run_study_with_threads(&cfg, 2).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn eigenvalue_only_studies_skip_the_other_series() {
    let cfg = StudyConfig {
        modes: vec![Mode::Eigenvalues],
        ..small()
    };
    let r = run_study(&cfg).unwrap();
    assert!(r.complete);
    assert!(r
        .rows
        .iter()
        .all(|row| row.heps_err.is_none() && row.gap.is_none() && row.visik_alpha.is_none()));
    assert!(r.lab.rows.is_empty());
    assert!(r.fits.iter().all(|f| f.series == Series::AbsErr));
}

#[test]
fn emitted_files_round_trip() {
    let r = run_study(&small()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit(&r, dir.path(), true, true).unwrap();
    assert_eq!(files.len(), 4);

    let text = std::fs::read_to_string(dir.path().join("study.json")).unwrap();
    assert!(text.lines().next().unwrap().contains("generated_unix"));
    let back = parse_report(&text).unwrap();
    assert_eq!(back, r);
    for (x, y) in back.rows.iter().zip(&r.rows) {
        assert_eq!(x.lambda_eps.to_bits(), y.lambda_eps.to_bits());
        assert_eq!(x.heps_err.unwrap().to_bits(), y.heps_err.unwrap().to_bits());
    }
    assert_eq!(parse_report(&json_body(&r).unwrap()).unwrap(), r);

    let csv = std::fs::read_to_string(dir.path().join("study.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), r.rows.len() + 1);
    assert_eq!(
        lines[0],
        "eps,j,lambda_eps,lambda_hom,abs_err,heps_err,l2_err,gap,visik_alpha"
    );
    let lab = std::fs::read_to_string(dir.path().join("lab.csv")).unwrap();
    assert_eq!(lab.lines().count(), r.lab.rows.len() + 1);
    assert!(lab.starts_with("check,eps,ratio,samples,skipped,seed,pass"));

    let svg = std::fs::read_to_string(dir.path().join("study.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), r.fits.len());
    assert_eq!(svg.matches("stroke-dasharray").count(), r.fits.len());
}

#[test]
fn unwritable_output_is_an_error() {
    let r = run_study(&StudyConfig {
        modes: vec![Mode::Eigenvalues],
        ..small()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    assert!(emit(&r, &blocker.join("sub"), false, false).is_err());
}

#[test]
fn pipeline_failures_flag_the_report() {
    // a macro mesh this coarse has no interior node on A
    let cfg = StudyConfig {
        h_macro: 0.45,
        ..small()
    };
    let r = run_study(&cfg).unwrap();
    assert!(!r.complete);
    assert!(r.error.is_some());
    assert!(r.rows.is_empty());
}

#[test]
fn invalid_configs_fail_up_front() {
    let cfg = StudyConfig {
        eps_list: vec![0.25],
        ..small()
    };
    assert!(matches!(run_study(&cfg), Err(homoglab::Error::Config(_))));
}

#[test]
fn config_files_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("study.toml");
    std::fs::write(&path, "eps_list = [0.5, 0.25]\nk = 1\nseed = 9\nsvg = true\n").unwrap();
    let cfg = StudyConfig::from_file(&path).unwrap();
    assert_eq!((cfg.k, cfg.seed, cfg.svg), (1, 9, true));
    assert!(StudyConfig::from_file(&dir.path().join("missing.toml")).is_err());
}

proptest! {
    #[test]
    fn fits_recover_power_laws(p in -1.0f64..3.0, c in 0.01f64..100.0, n in 2usize..6) {
        let pts: Vec<(f64, f64)> = (1..=n).map(|i| {
            let e = 0.5f64.powi(i as i32);
            (e, c * e.powf(p))
        }).collect();
        let f = fit_rate(&pts).unwrap();
        prop_assert!((f.slope - p).abs() < 1e-9);
        prop_assert!((f.intercept - c.ln()).abs() < 1e-9);
    }

    #[test]
    fn fits_ignore_point_order(errs in proptest::collection::vec(1e-6f64..1e3, 2..6), rot in 0usize..6) {
        let pts: Vec<(f64, f64)> = errs.iter().enumerate().map(|(i, &v)| (1.0 / (2 + i) as f64, v)).collect();
        let mut rev = pts.clone();
        rev.reverse();
        let r = rot % pts.len();
        let mut rotated = pts.clone();
        rotated.rotate_left(r);
        let f = fit_rate(&pts).unwrap();
        prop_assert_eq!(f, fit_rate(&rev).unwrap());
        prop_assert_eq!(f, fit_rate(&rotated).unwrap());
    }

    #[test]
    fn scaling_errors_leaves_the_slope(errs in proptest::collection::vec(1e-6f64..1e3, 3..6), s in 0.1f64..10.0) {
        let pts: Vec<(f64, f64)> = errs.iter().enumerate().map(|(i, &v)| (1.0 / (2 + i) as f64, v)).collect();
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(e, v)| (e, s * v)).collect();
        let (a, b) = (fit_rate(&pts).unwrap(), fit_rate(&scaled).unwrap());
        prop_assert!((a.slope - b.slope).abs() < 1e-9);
        prop_assert!((a.r2 - b.r2).abs() < 1e-9);
    }
}

#[test]
fn micro_mesh_refinement_is_subordinate() {
    let base = StudyConfig {
        k: 1,
        modes: vec![Mode::Eigenvalues, Mode::Corrector],
        ..small()
    };
    let fine = StudyConfig {
        h_ref: base.h_ref / 2.0,
        ..base.clone()
    };
    let (a, b) = (run_study(&base).unwrap(), run_study(&fine).unwrap());
    for s in [Series::AbsErr, Series::HepsErr, Series::L2Err] {
        let (sa, sb) = (a.fit(s, 1).unwrap().slope, b.fit(s, 1).unwrap().slope);
        assert!((sa - sb).abs() < 0.1, "{s:?}: {sa} vs {sb}");
    }
}

#[test]
fn assessment_reads_the_report() {
    let mut r = run_study(&small()).unwrap();
    let ids: Vec<u8> = assess(&r).iter().map(|v| v.criterion).collect();
    assert_eq!(ids, vec![3, 4, 5, 6, 7, 8, 9]);
    assert!(upper_bound(&r).pass);
    assert!(spectrum_structure(&r).pass);

    // synthetic eps^(1/2) errors satisfy the rate criteria
    for row in &mut r.rows {
        let e = row.eps.sqrt();
        row.abs_err = e;
        row.heps_err = Some(e);
        row.l2_err = Some(e);
        row.gap = Some(0.1 * e);
        row.visik_alpha = Some(e);
    }
    r.fits.clear();
    for j in 1..=r.config.k {
        for s in Series::ALL {
            r.fits.push(SeriesFit {
                series: s,
                j,
                fit: fit_rate(&r.series(s, j)).unwrap(),
            });
        }
    }
    assert!(eigenvalue_convergence(&r).pass);
    assert!(corrector_rate(&r).pass);
    assert!(eigenspace_gap(&r).pass);
    r.rows[0].gap = Some(0.0);
    assert!(!eigenspace_gap(&r).pass);
    r.rows[0].visik_certificate = Some(false);
    assert!(!visik_certificate(&r).pass);
    assert!(assess(&r).iter().any(|v| v.to_string().starts_with("[FAIL]")));
}

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::config::{thread_count, Mode, StudyConfig};
use super::fit::{fit_rate, RateFit};
use crate::cell::{solve_cell_problem, CellSolution};
use crate::corrector::{
    align_eigenspaces, build_corrector, eigenspace_gap, interpolate_zero_extended, visik_check, CorrectorSetup,
};
use crate::eigensolve::{Spectrum, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::fem::assemble_mass_on;
use crate::geometry::{build_cell_mesh, build_domain_mesh, CellMesh, Mesh, Point};
use crate::lab::{
    check_eigen_bounds, check_periodic_osc, check_strip_poincare, check_trace, check_volsup, derive_seed, LabReport,
    LabRow,
};
use crate::spectral::{extend_teps, perforated_bundle, solve_dirichlet_laplacian, solve_homogenized_evp};

/// Strip widths of the strip Poincare check.
pub const STRIP_DELTAS: [f64; 3] = [0.2, 0.1, 0.05];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellBlock {
    pub cell_area: f64,
    pub hole_perimeter: f64,
    pub c_star: f64,
    pub c_star_full_boundary: f64,
    pub a_hom: [[f64; 2]; 2],
}

impl CellBlock {
    fn new(sol: &CellSolution) -> Self {
        let a = &sol.a_hom;
        Self {
            cell_area: sol.cell_area,
            hole_perimeter: sol.hole_perimeter,
            c_star: sol.c_star,
            c_star_full_boundary: sol.c_star_full_boundary,
            a_hom: [[a[(0, 0)], a[(0, 1)]], [a[(1, 0)], a[(1, 1)]]],
        }
    }
}

/// Spectrum facts of one perforated solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsSummary {
    pub eps: f64,
    pub nodes: usize,
    pub dofs: usize,
    pub eigenvalues: Vec<f64>,
    /// `lambda^2 - lambda^1`.
    pub first_gap: f64,
    /// `min u^1 * max u^1 / max |u^1|^2`; non-negative when `u^1` has one sign.
    pub sign_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub eps: f64,
    /// 1-based mode index.
    pub j: usize,
    pub lambda_eps: f64,
    pub lambda_hom: f64,
    pub abs_err: f64,
    pub heps_err: Option<f64>,
    pub l2_err: Option<f64>,
    pub gap: Option<f64>,
    pub visik_alpha: Option<f64>,
    pub visik_distance: Option<f64>,
    pub visik_certificate: Option<bool>,
    pub visik_conclusive: Option<bool>,
}

/// Error series a rate is fitted to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Series {
    AbsErr,
    HepsErr,
    L2Err,
    Gap,
    VisikAlpha,
}

impl Series {
    pub const ALL: [Series; 5] = [
        Series::AbsErr,
        Series::HepsErr,
        Series::L2Err,
        Series::Gap,
        Series::VisikAlpha,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Series::AbsErr => "abs_err",
            Series::HepsErr => "heps_err",
            Series::L2Err => "l2_err",
            Series::Gap => "gap",
            Series::VisikAlpha => "visik_alpha",
        }
    }

    pub fn value(self, row: &StudyRow) -> Option<f64> {
        match self {
            Series::AbsErr => Some(row.abs_err),
            Series::HepsErr => row.heps_err,
            Series::L2Err => row.l2_err,
            Series::Gap => row.gap,
            Series::VisikAlpha => row.visik_alpha,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesFit {
    pub series: Series,
    pub j: usize,
    pub fit: RateFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: StudyConfig,
    pub complete: bool,
    pub error: Option<String>,
    pub cell: Option<CellBlock>,
    pub lambda_hom: Vec<f64>,
    pub alpha: Vec<f64>,
    pub sweep: Vec<EpsSummary>,
    pub rows: Vec<StudyRow>,
    pub fits: Vec<SeriesFit>,
    pub lab: LabReport,
    pub warnings: Vec<String>,
}

impl ConvergenceReport {
    fn empty(config: &StudyConfig) -> Self {
        Self {
            config: config.clone(),
            complete: false,
            error: None,
            cell: None,
            lambda_hom: Vec::new(),
            alpha: Vec::new(),
            sweep: Vec::new(),
            rows: Vec::new(),
            fits: Vec::new(),
            lab: LabReport::default(),
            warnings: Vec::new(),
        }
    }

    pub fn fit(&self, series: Series, j: usize) -> Option<&RateFit> {
        self.fits
            .iter()
            .find(|f| f.series == series && f.j == j)
            .map(|f| &f.fit)
    }

    /// `(eps, value)` of one series, in row order.
    pub fn series(&self, series: Series, j: usize) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.j == j)
            .filter_map(|r| series.value(r).map(|v| (r.eps, v)))
            .collect()
    }
}

/// Groups consecutive modes whose eigenvalues agree to `tol` relative.
pub fn clusters(eigenvalues: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (j, &l) in eigenvalues.iter().enumerate() {
        match out.last_mut() {
            Some(c) if (l - eigenvalues[*c.last().unwrap()]).abs() <= tol * l.abs() => c.push(j),
            _ => out.push(vec![j]),
        }
    }
    out
}

/// Inputs shared by every eps of a study.
struct Shared<'a> {
    cfg: &'a StudyConfig,
    cell: &'a CellMesh,
    sol: &'a CellSolution,
    a_mesh: &'a Mesh,
    hom: &'a Spectrum,
    clusters: &'a [Vec<usize>],
}

struct EpsResult {
    summary: EpsSummary,
    spectrum: Spectrum,
    rows: Vec<StudyRow>,
    lab: Vec<LabRow>,
}

fn run_eps(sh: &Shared, eps: f64) -> Result<EpsResult> {
    let cfg = sh.cfg;
    let k = cfg.k;
    let domain = cfg.domain(eps)?;
    let bundle = perforated_bundle(&domain, sh.cell, true)?;
    let k_eps = (k + cfg.extra_modes).min(bundle.reduction.dim() - 1);
    if k_eps < k {
        return Err(Error::Precondition(format!(
            "eps = {eps} leaves only {} unknowns",
            bundle.reduction.dim()
        )));
    }
    let spectrum = bundle.eigenpairs(k_eps, DEFAULT_TOL)?;
    let u1 = &spectrum.eigenvectors[0];
    let umax = u1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (lo, hi) = u1.iter().fold((0.0f64, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let summary = EpsSummary {
        eps,
        nodes: bundle.num_nodes(),
        dofs: bundle.reduction.dim(),
        eigenvalues: spectrum.eigenvalues.clone(),
        first_gap: spectrum
            .eigenvalues
            .get(1)
            .map_or(f64::INFINITY, |l| l - spectrum.eigenvalues[0]),
        sign_ratio: if umax > 0.0 { lo * hi / (umax * umax) } else { 0.0 },
    };
    let mut rows: Vec<StudyRow> = (0..k)
        .map(|j| StudyRow {
            eps,
            j: j + 1,
            lambda_eps: spectrum.eigenvalues[j],
            lambda_hom: sh.hom.eigenvalues[j],
            abs_err: (spectrum.eigenvalues[j] - sh.hom.eigenvalues[j]).abs(),
            heps_err: None,
            l2_err: None,
            gap: None,
            visik_alpha: None,
            visik_distance: None,
            visik_certificate: None,
            visik_conclusive: None,
        })
        .collect();

    let setup = CorrectorSetup {
        a_mesh: sh.a_mesh,
        a_rect: cfg.k_rect(),
        cell: sh.cell,
        sol: sh.sol,
    };
    if cfg.has(Mode::Corrector) || cfg.has(Mode::Visik) {
        let correctors = (0..k)
            .map(|j| {
                let u = build_corrector(&setup, &sh.hom.eigenvectors[j], j, eps, &bundle.mesh, true)?;
                bundle.project(&u.values)
            })
            .collect::<Result<Vec<_>>>()?;
        if cfg.has(Mode::Corrector) {
            for c in sh.clusters {
                let u_eps: Vec<Vec<f64>> = c.iter().map(|&j| spectrum.eigenvectors[j].clone()).collect();
                let us: Vec<Vec<f64>> = c.iter().map(|&j| correctors[j].clone()).collect();
                let res = align_eigenspaces(&u_eps, &us, &bundle)?;
                for (i, &j) in c.iter().enumerate() {
                    rows[j].heps_err = Some(res.heps_errors[i]);
                    rows[j].l2_err = Some(res.l2_errors[i]);
                }
            }
        }
        if cfg.has(Mode::Visik) {
            for (j, u) in correctors.iter().enumerate() {
                let v = visik_check(&bundle, u, 1.0 / sh.hom.eigenvalues[j], &spectrum)?;
                rows[j].visik_alpha = Some(v.alpha);
                rows[j].visik_distance = Some(v.distance);
                rows[j].visik_certificate = Some(v.certificate);
                rows[j].visik_conclusive = Some(v.conclusive);
            }
        }
    }

    if cfg.has(Mode::Eigenspace) {
        let full = bundle
            .full_mesh
            .as_ref()
            .ok_or_else(|| Error::Precondition("perforated bundle without its full mesh".into()))?;
        let m_full = assemble_mass_on(full, |_| true)?;
        for c in sh.clusters {
            let ext = c
                .iter()
                .map(|&j| extend_teps(&bundle, &spectrum.eigenvectors[j]))
                .collect::<Result<Vec<_>>>()?;
            let hom = c
                .iter()
                .map(|&j| interpolate_zero_extended(&sh.hom.eigenvectors[j], sh.a_mesh, cfg.k_rect(), full))
                .collect::<Result<Vec<_>>>()?;
            let gap = eigenspace_gap(&ext, &hom, &m_full)?;
            for &j in c {
                rows[j].gap = Some(gap);
            }
        }
    }

    let mut lab = Vec::new();
    if cfg.has(Mode::Lab) {
        lab.push(check_trace(
            &bundle,
            cfg.lab_samples,
            derive_seed(cfg.seed, "trace", eps),
        )?);
        lab.push(check_volsup(
            &bundle,
            sh.sol,
            cfg.k_rect(),
            cfg.lab_samples,
            derive_seed(cfg.seed, "volsup", eps),
        )?);
    }
    Ok(EpsResult {
        summary,
        spectrum,
        rows,
        lab,
    })
}

/// Runs `f` over `items` on up to `threads` workers, keeping the input order.
fn ordered_map<T: Sync, R: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if threads <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                s.spawn(move || part.iter().map(f).collect::<Vec<R>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("study worker panicked"))
            .collect()
    })
}

pub type ScalarField = fn(Point) -> f64;

/// Smooth fields of the oscillation check. Mirror-symmetric pairs make the
/// integral vanish identically, so the second field breaks the symmetry.
pub fn oscillation_pair() -> (ScalarField, ScalarField) {
    fn u(p: Point) -> f64 {
        (PI * p[0]).sin() * (PI * p[1]).sin()
    }
    fn v(p: Point) -> f64 {
        p[0] * u(p) + p[1] * (2.0 * PI * p[0]).sin() * (PI * p[1]).sin()
    }
    (u, v)
}

/// Runs a full study. Invalid configurations are errors; a failure inside the
/// pipeline returns the partial report with `complete = false`.
pub fn run_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    run_study_with_threads(cfg, thread_count())
}

/// [`run_study`] with an explicit worker count instead of `HOMOGLAB_THREADS`.
pub fn run_study_with_threads(cfg: &StudyConfig, threads: usize) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let mut report = ConvergenceReport::empty(cfg);
    if let Err(e) = fill(cfg, &mut report, threads) {
        report.error = Some(e.to_string());
        return Ok(report);
    }
    report.complete = true;
    Ok(report)
}

fn fill(cfg: &StudyConfig, report: &mut ConvergenceReport, threads: usize) -> Result<()> {
    let cell = build_cell_mesh(cfg.radius, cfg.n_poly, cfg.h_ref)?;
    let sol = solve_cell_problem(&cell)?;
    report.cell = Some(CellBlock::new(&sol));
    let a_mesh = build_domain_mesh(cfg.k_rect(), cfg.h_macro)?;
    let hom = solve_homogenized_evp(&a_mesh, &sol.a_hom, sol.cell_area, cfg.k)?;
    let dirichlet = solve_dirichlet_laplacian(&a_mesh, cfg.k)?;
    report.lambda_hom = hom.eigenvalues.clone();
    report.alpha = dirichlet.eigenvalues.clone();
    let groups = clusters(&hom.eigenvalues, cfg.cluster_tol);
    let shared = Shared {
        cfg,
        cell: &cell,
        sol: &sol,
        a_mesh: &a_mesh,
        hom: &hom,
        clusters: &groups,
    };

    let results = ordered_map(&cfg.eps_list, threads, |&eps| run_eps(&shared, eps));
    let mut spectra = Vec::new();
    let mut lab_rows = Vec::new();
    for r in results {
        let r = r?;
        spectra.push((r.summary.eps, r.spectrum));
        report.sweep.push(r.summary);
        report.rows.extend(r.rows);
        lab_rows.extend(r.lab);
    }
    report.rows.sort_by(|a, b| b.eps.total_cmp(&a.eps).then(a.j.cmp(&b.j)));

    if cfg.has(Mode::Lab) {
        let (u, v) = oscillation_pair();
        lab_rows.extend(check_periodic_osc(&sol, &cell, &cfg.eps_list, &u, &v)?);
        lab_rows.extend(check_strip_poincare(
            &a_mesh,
            cfg.k_rect(),
            &hom.eigenvectors[0],
            &STRIP_DELTAS,
        )?);
        lab_rows.push(check_eigen_bounds(&spectra, &dirichlet)?);
        report.lab.extend(lab_rows);
    }

    for j in 1..=cfg.k {
        for series in Series::ALL {
            let pts = report.series(series, j);
            if pts.is_empty() {
                continue;
            }
            match fit_rate(&pts) {
                Ok(fit) => {
                    if fit.excluded > 0 {
                        report.warnings.push(format!(
                            "{} j={j}: {} nonpositive errors excluded from the fit",
                            series.name(),
                            fit.excluded
                        ));
                    }
                    report.fits.push(SeriesFit { series, j, fit });
                }
                Err(e) => report.warnings.push(format!("{} j={j}: {e}", series.name())),
            }
        }
    }
    Ok(())
}

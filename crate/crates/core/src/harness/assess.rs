use serde::{Deserialize, Serialize};

use super::study::{ConvergenceReport, Series};

/// Largest `max/min` ratio spread the lab accepts across a sweep.
pub const MAX_SPREAD: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: u8,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:>2} {}: {}", self.criterion, self.name, self.detail)
    }
}

fn verdict(criterion: u8, name: &str, pass: bool, detail: String) -> Verdict {
    Verdict {
        criterion,
        name: name.into(),
        pass,
        detail,
    }
}

fn strictly_decreasing(v: &[(f64, f64)]) -> bool {
    v.windows(2).all(|w| w[1].1 < w[0].1)
}

fn fmt_series(v: &[(f64, f64)]) -> String {
    let parts: Vec<String> = v.iter().map(|(_, e)| format!("{e:.4}")).collect();
    parts.join(" > ")
}

fn slope_check(r: &ConvergenceReport, s: Series, min_slope: f64, min_r2: Option<f64>) -> (bool, String) {
    match r.fit(s, 1) {
        Some(f) => {
            let ok = f.slope >= min_slope && min_r2.is_none_or(|m| f.r2 >= m);
            (
                ok,
                format!("{} slope {:.3} (R2 {:.3}, {} pts)", s.name(), f.slope, f.r2, f.points),
            )
        }
        None => (false, format!("{} not fitted", s.name())),
    }
}

/// Eigenvalue convergence: strictly decreasing errors for `j = 1, 2` and a
/// first-mode slope of at least 0.45.
pub fn eigenvalue_convergence(r: &ConvergenceReport) -> Verdict {
    let modes = r.config.k.min(2);
    let mut pass = modes >= 1;
    let mut parts = Vec::new();
    for j in 1..=modes {
        let e = r.series(Series::AbsErr, j);
        pass &= e.len() >= 2 && strictly_decreasing(&e);
        parts.push(format!("j={j}: {}", fmt_series(&e)));
    }
    let (ok, d) = slope_check(r, Series::AbsErr, 0.45, None);
    parts.push(d);
    verdict(3, "eigenvalue convergence", pass && ok, parts.join("; "))
}

pub fn corrector_rate(r: &ConvergenceReport) -> Verdict {
    let (a, da) = slope_check(r, Series::HepsErr, 0.4, Some(0.9));
    let (b, db) = slope_check(r, Series::L2Err, 0.4, None);
    verdict(4, "corrector rate", a && b, format!("{da}; {db}"))
}

pub fn visik_certificate(r: &ConvergenceReport) -> Verdict {
    let rows: Vec<_> = r.rows.iter().filter(|row| row.j == 1).collect();
    let certs = !rows.is_empty() && rows.iter().all(|row| row.visik_certificate == Some(true));
    let listed: Vec<String> = rows
        .iter()
        .map(|row| {
            format!(
                "eps={}: dist {:.2e} <= alpha {:.2e} {}",
                row.eps,
                row.visik_distance.unwrap_or(f64::NAN),
                row.visik_alpha.unwrap_or(f64::NAN),
                row.visik_certificate.unwrap_or(false)
            )
        })
        .collect();
    let (ok, d) = slope_check(r, Series::VisikAlpha, 0.4, None);
    verdict(
        5,
        "Visik certificate",
        certs && ok,
        format!("{}; {d}", listed.join(", ")),
    )
}

pub fn spectrum_structure(r: &ConvergenceReport) -> Verdict {
    let pass = !r.sweep.is_empty() && r.sweep.iter().all(|s| s.first_gap > 1e-8 && s.sign_ratio >= -1e-6);
    let listed: Vec<String> = r
        .sweep
        .iter()
        .map(|s| format!("eps={}: gap {:.3e}, sign {:.1e}", s.eps, s.first_gap, s.sign_ratio))
        .collect();
    verdict(6, "simple first eigenvalue", pass, listed.join(", "))
}

pub fn upper_bound(r: &ConvergenceReport) -> Verdict {
    let Some(&alpha1) = r.alpha.first() else {
        return verdict(7, "upper bound", false, "no Dirichlet eigenvalue".into());
    };
    let mut sweep: Vec<_> = r.sweep.iter().collect();
    sweep.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    let two = &sweep[..sweep.len().min(2)];
    let pass = two.len() == 2 && two.iter().all(|s| s.eigenvalues[0] <= 1.05 * alpha1);
    let listed: Vec<String> = two
        .iter()
        .map(|s| format!("eps={}: {:.4}", s.eps, s.eigenvalues[0]))
        .collect();
    verdict(
        7,
        "upper bound",
        pass,
        format!("{} <= 1.05 * {alpha1:.4}", listed.join(", ")),
    )
}

pub fn eigenspace_gap(r: &ConvergenceReport) -> Verdict {
    let g = r.series(Series::Gap, 1);
    let last = g.last().map_or(f64::INFINITY, |p| p.1);
    let pass = g.len() >= 2 && strictly_decreasing(&g) && last < 0.2;
    verdict(8, "eigenspace gap", pass, format!("{} (last < 0.2)", fmt_series(&g)))
}

pub fn lab_uniformity(r: &ConvergenceReport) -> Verdict {
    let mut pass = r.lab.rows.iter().all(|row| row.pass);
    let mut parts = Vec::new();
    for check in ["trace", "volsup", "periodic_osc"] {
        match r.lab.spread(check) {
            Some(s) => {
                pass &= s <= MAX_SPREAD;
                parts.push(format!("{check} spread {s:.3}"));
            }
            None => {
                pass = false;
                parts.push(format!("{check} missing"));
            }
        }
    }
    verdict(9, "lab uniformity", pass, parts.join(", "))
}

/// Every report-level criterion, in order.
pub fn assess(r: &ConvergenceReport) -> Vec<Verdict> {
    vec![
        eigenvalue_convergence(r),
        corrector_rate(r),
        visik_certificate(r),
        spectrum_structure(r),
        upper_bound(r),
        eigenspace_gap(r),
        lab_uniformity(r),
    ]
}

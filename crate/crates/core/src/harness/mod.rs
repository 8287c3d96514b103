//! Sweeps over `eps`, rate fits and report emission.

mod assess;
mod config;
mod emit;
mod fit;
mod study;

pub use assess::{
    assess, corrector_rate, eigenspace_gap, eigenvalue_convergence, lab_uniformity, spectrum_structure, upper_bound,
    visik_certificate, Verdict, MAX_SPREAD,
};
pub use config::{thread_count, Mode, StudyConfig};
pub use emit::{emit, json_body, parse_report, render_svg, write_csv, write_json, write_lab_csv};
pub use fit::{fit_rate, RateFit};
pub use study::{
    clusters, oscillation_pair, run_study, run_study_with_threads, CellBlock, ConvergenceReport, EpsSummary,
    ScalarField, Series, SeriesFit, StudyRow, STRIP_DELTAS,
};

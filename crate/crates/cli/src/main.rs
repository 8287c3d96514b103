use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use homoglab::cell::solve_cell_problem;
use homoglab::eigensolve::DEFAULT_TOL;
use homoglab::geometry::{build_cell_mesh, build_perforated_mesh, write_mesh, DomainConfig, Rect};
use homoglab::harness::{self, Mode, StudyConfig};
use homoglab::spectral::perforated_bundle;

/// Homogenization lab for Robin eigenproblems on perforated domains.
#[derive(Parser)]
#[command(name = "homoglab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the cell problem and print |Y|, |Sigma0|, C* and a_hom as JSON.
    Cell(HoleArgs),
    /// Write the perforated mesh (or the cell template with --template).
    Mesh {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long)]
        template: bool,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the first perforated eigenvalues as JSON.
    Spectrum {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, default_value_t = 4)]
        k: usize,
    },
    /// Run an eps sweep, write the report and assess it.
    Study(StudyArgs),
    /// Run the inequality lab over the sweep.
    Check(StudyArgs),
    /// Dump an assembled matrix as COO triplets.
    Dump {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, value_enum)]
        matrix: MatrixKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct HoleArgs {
    #[arg(long, default_value_t = 0.25)]
    radius: f64,
    #[arg(long, default_value_t = 32)]
    npoly: usize,
    #[arg(long, default_value_t = 0.125)]
    href: f64,
}

#[derive(Args)]
struct DomainArgs {
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    #[command(flatten)]
    hole: HoleArgs,
    /// K as x0,y0,x1,y1.
    #[arg(long, default_value = "0.25,0.25,0.75,0.75", value_parser = parse_rect)]
    krect: Rect,
}

impl DomainArgs {
    fn config(&self) -> Result<DomainConfig> {
        Ok(DomainConfig::new(
            self.eps,
            self.hole.radius,
            self.hole.npoly,
            self.hole.href,
            self.krect,
        )?)
    }
}

#[derive(Args)]
struct StudyArgs {
    /// TOML file mirroring the study configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the report files.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: bool,
    #[arg(long)]
    svg: bool,
    #[arg(long)]
    seed: Option<u64>,
}

impl StudyArgs {
    fn config(&self) -> Result<StudyConfig> {
        let mut cfg = match &self.config {
            Some(p) => StudyConfig::from_file(p).with_context(|| format!("loading {}", p.display()))?,
            None => StudyConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = Some(out.clone());
        }
        cfg.csv |= self.csv;
        cfg.svg |= self.svg;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MatrixKind {
    Stiffness,
    Mass,
    Robin,
    /// Reduced `S + R` after eliminating the Dirichlet nodes.
    System,
}

fn parse_rect(s: &str) -> std::result::Result<Rect, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [x0, y0, x1, y1] => Ok(Rect::new(x0, y0, x1, y1)),
        _ => Err(format!("expected x0,y0,x1,y1, got {s:?}")),
    }
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// `Ok(true)` when every assessed criterion passed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Cell(h) => {
            let cell = build_cell_mesh(h.radius, h.npoly, h.href)?;
            let sol = solve_cell_problem(&cell)?;
            let a = sol.a_hom;
            let out = serde_json::json!({
                "cell_area": sol.cell_area,
                "hole_perimeter": sol.hole_perimeter,
                "c_star": sol.c_star,
                "c_star_full_boundary": sol.c_star_full_boundary,
                "a_hom": [[a[(0, 0)], a[(0, 1)]], [a[(1, 0)], a[(1, 1)]]],
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Mesh { domain, template, out } => {
            let cell = build_cell_mesh(domain.hole.radius, domain.hole.npoly, domain.hole.href)?;
            let mut w = sink(&out)?;
            if template {
                write_mesh(&cell.mesh, &mut w)?;
            } else {
                write_mesh(&build_perforated_mesh(&domain.config()?, &cell)?, &mut w)?;
            }
            w.flush()?;
        }
        Command::Spectrum { domain, k } => {
            let cfg = domain.config()?;
            let cell = build_cell_mesh(cfg.radius, cfg.n_poly, cfg.h_ref)?;
            let bundle = perforated_bundle(&cfg, &cell, true)?;
            let spec = bundle.eigenpairs(k, DEFAULT_TOL)?;
            let out = serde_json::json!({
                "eps": cfg.eps(),
                "dofs": bundle.reduction.dim(),
                "eigenvalues": spec.eigenvalues,
                "residuals": spec.residuals,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Study(args) => {
            let cfg = args.config()?;
            let report = harness::run_study(&cfg)?;
            write_report(&report, &cfg)?;
            if let Some(e) = &report.error {
                bail!("study incomplete: {e}");
            }
            let verdicts = harness::assess(&report);
            for v in &verdicts {
                println!("{v}");
            }
            return Ok(verdicts.iter().all(|v| v.pass));
        }
        Command::Check(args) => {
            let mut cfg = args.config()?;
            cfg.modes = vec![Mode::Eigenvalues, Mode::Lab];
            let report = harness::run_study(&cfg)?;
            write_report(&report, &cfg)?;
            if let Some(e) = &report.error {
                bail!("check incomplete: {e}");
            }
            for r in &report.lab.rows {
                println!(
                    "{:<15} {:>8} ratio {:.6e} samples {:>3} skipped {:>3} {}",
                    r.check,
                    r.param,
                    r.ratio,
                    r.samples,
                    r.skipped,
                    if r.pass { "ok" } else { "FAIL" }
                );
            }
            let v = harness::lab_uniformity(&report);
            println!("{v}");
            return Ok(v.pass);
        }
        Command::Dump { domain, matrix, out } => {
            let cfg = domain.config()?;
            let cell = build_cell_mesh(cfg.radius, cfg.n_poly, cfg.h_ref)?;
            let b = perforated_bundle(&cfg, &cell, true)?;
            let m = match matrix {
                MatrixKind::Stiffness => &b.stiffness,
                MatrixKind::Mass => &b.mass,
                MatrixKind::Robin => b.robin.as_ref().context("bundle without Robin mass")?,
                MatrixKind::System => &b.system,
            };
            let mut w = sink(&out)?;
            m.write_coo(&mut w)?;
            w.flush()?;
        }
    }
    Ok(true)
}

fn write_report(report: &harness::ConvergenceReport, cfg: &StudyConfig) -> Result<()> {
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("homoglab-out"));
    for p in harness::emit(report, &dir, cfg.csv, cfg.svg)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        let io = c
            .downcast_ref::<io::Error>()
            .or_else(|| match c.downcast_ref::<homoglab::Error>() {
                Some(homoglab::Error::Io(e)) => Some(e),
                _ => None,
            });
        io.is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe)
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // exit code 2 is reserved for failed assessments
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

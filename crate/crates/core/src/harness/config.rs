use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cells_per_side, DomainConfig, Rect};

/// Stages of a study beyond the eigenvalue solves, which always run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Eigenvalues,
    Corrector,
    Eigenspace,
    Visik,
    Lab,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Eigenvalues,
        Mode::Corrector,
        Mode::Eigenspace,
        Mode::Visik,
        Mode::Lab,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub radius: f64,
    pub n_poly: usize,
    /// Template mesh size; the micro mesh size is `eps * h_ref`.
    pub h_ref: f64,
    /// `K` as `[x0, y0, x1, y1]`; the homogenized problem lives on its interior.
    pub k_rect: [f64; 4],
    pub eps_list: Vec<f64>,
    /// Number of modes followed through the sweep.
    pub k: usize,
    /// Mesh size of the homogenized and Dirichlet problems on `A`.
    pub h_macro: f64,
    pub modes: Vec<Mode>,
    pub seed: u64,
    pub lab_samples: usize,
    /// Relative eigenvalue gap below which homogenized modes form one cluster.
    pub cluster_tol: f64,
    /// Extra perforated modes beyond `k`, so the Visik bracket sees neighbours.
    pub extra_modes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub csv: bool,
    pub svg: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            radius: 0.25,
            n_poly: 32,
            h_ref: 0.125,
            k_rect: [0.25, 0.25, 0.75, 0.75],
            eps_list: vec![0.25, 0.125, 0.0625],
            k: 4,
            h_macro: 1.0 / 64.0,
            modes: Mode::ALL.to_vec(),
            seed: 0x5eed,
            lab_samples: 100,
            cluster_tol: 0.02,
            extra_modes: 4,
            out_dir: None,
            csv: true,
            svg: false,
        }
    }
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn k_rect(&self) -> Rect {
        let [x0, y0, x1, y1] = self.k_rect;
        Rect::new(x0, y0, x1, y1)
    }

    pub fn has(&self, mode: Mode) -> bool {
        self.modes.contains(&mode)
    }

    pub fn domain(&self, eps: f64) -> Result<DomainConfig> {
        DomainConfig::new(eps, self.radius, self.n_poly, self.h_ref, self.k_rect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_list.len() < 2 {
            return Err(Error::Config("eps_list needs at least two values to fit rates".into()));
        }
        for w in self.eps_list.windows(2) {
            if !(w[0] > w[1]) {
                return Err(Error::Config(format!(
                    "eps_list must be strictly descending, got {:?}",
                    self.eps_list
                )));
            }
        }
        for &eps in &self.eps_list {
            self.domain(eps)?;
        }
        if self.k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.h_macro > 0.0 && self.h_macro < 0.5) {
            return Err(Error::Config(format!(
                "h_macro must lie in (0, 0.5), got {}",
                self.h_macro
            )));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("modes must not be empty".into()));
        }
        if self.has(Mode::Lab) && self.lab_samples == 0 {
            return Err(Error::Config("lab_samples must be positive".into()));
        }
        if !(self.cluster_tol >= 0.0) {
            return Err(Error::Config("cluster_tol must be non-negative".into()));
        }
        // every eps must tile the unit square
        self.eps_list.iter().try_for_each(|&e| cells_per_side(e).map(|_| ()))
    }
}

/// Worker count from `HOMOGLAB_THREADS`, default 1.
pub fn thread_count() -> usize {
    std::env::var("HOMOGLAB_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = StudyConfig::default();
        cfg.validate().unwrap();
        let back = StudyConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_files_fill_in_defaults() {
        let cfg = StudyConfig::from_toml("k = 2\nmodes = [\"eigenvalues\", \"lab\"]\n").unwrap();
        assert_eq!(cfg.k, 2);
        assert!(cfg.has(Mode::Lab) && !cfg.has(Mode::Visik));
        assert_eq!(cfg.eps_list, vec![0.25, 0.125, 0.0625]);
    }

    #[test]
    fn bad_configs_are_rejected() {
        for text in [
            "eps_list = [0.25]",
            "eps_list = [0.125, 0.25]",
            "eps_list = [0.25, 0.3]",
            "k = 0",
            "modes = []",
            "k_rect = [0.0, 0.25, 0.75, 0.75]",
            "unknown = 1",
        ] {
            assert!(matches!(StudyConfig::from_toml(text), Err(Error::Config(_))), "{text}");
        }
    }
}

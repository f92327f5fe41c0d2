//! Flat JSON pipeline configuration.

use std::path::Path;

use fgembed_core::{AffinityParams, Error, SolverConfig, Stencil};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub sigma_b: f64,
    pub sigma_fg: f64,
    pub phi: f64,
    pub wedge_rescale: bool,
    pub m: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Eigenpairs used by `globalize`; only the leading one is read.
    pub globalize_m: usize,
    pub lambda_floor: f64,
    /// Watershed cut level on the boundary map normalized to `[0, 1]`.
    pub cut_level: f64,
    pub radii: Vec<u32>,
    /// Color scale of the baseline boundary predictor.
    pub sigma_color: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let a = AffinityParams::default();
        let s = SolverConfig::default();
        Self {
            sigma_b: a.sigma_b,
            sigma_fg: a.sigma_fg,
            phi: a.phi,
            wedge_rescale: a.wedge_rescale,
            m: s.m,
            tol: s.tol,
            max_iter: s.max_iter,
            seed: s.seed,
            globalize_m: 1,
            lambda_floor: fgembed_core::decoder::LAMBDA_FLOOR,
            cut_level: 0.5,
            radii: vec![1, 4, 16],
            sigma_color: 0.1,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn affinity(&self) -> AffinityParams {
        AffinityParams {
            sigma_b: self.sigma_b,
            sigma_fg: self.sigma_fg,
            phi: self.phi,
            wedge_rescale: self.wedge_rescale,
        }
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig { m: self.m, tol: self.tol, max_iter: self.max_iter, seed: self.seed }
    }

    pub fn globalize_solver(&self) -> SolverConfig {
        SolverConfig { m: self.globalize_m, ..self.solver() }
    }

    pub fn stencil(&self) -> Result<Stencil, Error> {
        Stencil::with_radii(&self.radii)
    }

    /// Checks every component's invariants.
    pub fn validate(&self) -> Result<(), Error> {
        self.affinity().validate()?;
        if self.m == 0 || self.globalize_m == 0 {
            return Err(Error::Config("m and globalize_m must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.lambda_floor > 0.0) {
            return Err(Error::Config(format!("lambda_floor must be positive, got {}", self.lambda_floor)));
        }
        if !self.cut_level.is_finite() {
            return Err(Error::Config("cut_level must be finite".into()));
        }
        if !(self.sigma_color > 0.0) {
            return Err(Error::Config(format!("sigma_color must be positive, got {}", self.sigma_color)));
        }
        if !self.radii.contains(&1) {
            return Err(Error::Config("radii must include 1 (the boundary probability ring)".into()));
        }
        self.stencil()?;
        Ok(())
    }
}

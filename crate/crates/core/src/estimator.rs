//! Alternating estimation of paths and array errors.
//!
//! Each outer iteration updates, in order: per-frame paths (OMP while on the
//! grid, one refinement sweep afterwards), the coupling matrices of both
//! sides, the complex gains of both sides, and the spacing errors.

use crate::channel::{Link, PathSet};
use crate::coupling::{update_coupling, CouplingModel, CouplingRadii, Side};
use crate::element::{solve_gains, update_spacing};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::measurement::MeasurementSet;
use crate::model::{global_objective, reconstruct_channel, Calibration, FrameKernel, Problem};
use crate::offgrid::{refine_frame, LineSearchConfig};
use crate::ongrid::{build_grids, ongrid_frame, Dictionary, GridSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Path-estimation stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    OnGrid,
    OffGrid,
}

/// Coupling model in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingMode {
    ToeplitzOnly,
    Approx,
}

/// Which array errors are re-estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationMask {
    pub coupling: bool,
    pub gains: bool,
    pub spacing: bool,
}

impl CalibrationMask {
    pub fn all() -> Self {
        Self { coupling: true, gains: true, spacing: true }
    }

    pub fn none() -> Self {
        Self { coupling: false, gains: false, spacing: false }
    }
}

/// Algorithm settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoConfig {
    pub max_iters: usize,
    pub n_paths: usize,
    /// Relative objective change below which the on-grid stage hands over to
    /// refinement. `f64::INFINITY` hands over after the first iteration.
    pub switch_threshold: f64,
    /// Relative objective change below which the approximate coupling model
    /// replaces the Toeplitz-only model.
    pub approx_threshold: f64,
    pub radii_bs: CouplingRadii,
    pub radii_ue: CouplingRadii,
    pub lambda_bs: f64,
    pub lambda_ue: f64,
    /// Grid counts; `None` uses the oversampled default.
    pub grid: Option<GridSpec>,
    pub line_search: LineSearchConfig,
    pub calibrate: CalibrationMask,
    /// Stop once refinement with the final coupling model changes the
    /// objective by less than this.
    pub early_exit: Option<f64>,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        Self {
            max_iters: 250,
            n_paths: 12,
            switch_threshold: 1e-3,
            approx_threshold: 1e-3,
            radii_bs: CouplingRadii::new(2, 0),
            radii_ue: CouplingRadii::new(2, 0),
            lambda_bs: 0.0,
            lambda_ue: 0.0,
            grid: None,
            line_search: LineSearchConfig::default(),
            calibrate: CalibrationMask::all(),
            early_exit: Some(1e-8),
        }
    }
}

/// Estimator state after any number of iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub calibration: Calibration,
    pub frames: Vec<PathSet>,
    pub objective_history: Vec<f64>,
    pub phase: Phase,
    pub coupling_mode: CouplingMode,
    pub iterations: usize,
}

/// Relative change of the last two objective values; `∞` with fewer than
/// two values and `0` when the previous value is `0`.
pub fn delta_f(history: &[f64]) -> f64 {
    match history {
        [.., prev, last] => {
            if *prev == 0.0 {
                0.0
            } else {
                (last - prev).abs() / prev
            }
        }
        _ => f64::INFINITY,
    }
}

fn models(link: &Link, cfg: &AlgoConfig, mode: CouplingMode) -> Result<(CouplingModel, CouplingModel)> {
    let (rb, ru) = match mode {
        CouplingMode::ToeplitzOnly => (CouplingRadii::toeplitz(), CouplingRadii::toeplitz()),
        CouplingMode::Approx => (cfg.radii_bs, cfg.radii_ue),
    };
    Ok((CouplingModel::new(&link.bs, rb)?, CouplingModel::new(&link.ue, ru)?))
}

/// Estimated channel of the last frame on every subcarrier, plus the state.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub state: EstimatorState,
    pub channel: Vec<CMat>,
}

/// Alternating estimator bound to one problem instance.
pub struct Estimator<'a> {
    pub problem: Problem<'a>,
    pub config: AlgoConfig,
    pub state: EstimatorState,
    grid: GridSpec,
}

impl<'a> Estimator<'a> {
    pub fn new(link: &'a Link, meas: &'a MeasurementSet, config: AlgoConfig, initial: Calibration) -> Result<Self> {
        if meas.frames.is_empty() {
            return Err(Error::Config("no frames to estimate from".into()));
        }
        if config.n_paths == 0 {
            return Err(Error::Config("number of estimated paths must be positive".into()));
        }
        let grid = config.grid.unwrap_or_else(|| GridSpec::oversampled(link));
        if config.n_paths > grid.n_atoms() {
            return Err(Error::Config("more paths than grid points".into()));
        }
        models(link, &config, CouplingMode::Approx)?;
        let mode = if config.radii_bs == CouplingRadii::toeplitz() && config.radii_ue == CouplingRadii::toeplitz() {
            CouplingMode::Approx
        } else {
            CouplingMode::ToeplitzOnly
        };
        Ok(Self {
            problem: Problem::new(link, meas),
            state: EstimatorState {
                calibration: initial,
                frames: vec![],
                objective_history: vec![],
                phase: Phase::OnGrid,
                coupling_mode: mode,
                iterations: 0,
            },
            config,
            grid,
        })
    }

    fn ongrid_frames(&self) -> Result<Vec<PathSet>> {
        let pb = &self.problem;
        let grids = build_grids(&self.grid, pb.link.max_delay());
        let dict = Dictionary::build(pb, &self.state.calibration, grids);
        pb.meas.frames.par_iter().map(|y| ongrid_frame(&dict, y, self.config.n_paths)).collect()
    }

    fn refine_frames(&self) -> Vec<PathSet> {
        let pb = &self.problem;
        let cal = &self.state.calibration;
        pb.meas
            .frames
            .par_iter()
            .zip(&self.state.frames)
            .map(|(y, f)| refine_frame(pb, cal, y, f, &self.config.line_search).paths)
            .collect()
    }

    /// Coupling updates for both sides under the current coupling mode.
    pub fn step_coupling(&mut self) -> Result<()> {
        let (mb, mu) = models(self.problem.link, &self.config, self.state.coupling_mode)?;
        let pb = self.problem;
        let (c, _) = update_coupling(&pb, &self.state.calibration, &self.state.frames, Side::Bs, &mb, self.config.lambda_bs);
        self.state.calibration.bs.coupling = c;
        let (c, _) = update_coupling(&pb, &self.state.calibration, &self.state.frames, Side::Ue, &mu, self.config.lambda_ue);
        self.state.calibration.ue.coupling = c;
        Ok(())
    }

    /// Gain/phase updates for both sides.
    pub fn step_gains(&mut self) {
        let pb = self.problem;
        let (g, _) = solve_gains(&pb, &self.state.calibration, &self.state.frames, Side::Bs);
        self.state.calibration.bs.gains = g;
        let (g, _) = solve_gains(&pb, &self.state.calibration, &self.state.frames, Side::Ue);
        self.state.calibration.ue.gains = g;
    }

    /// Spacing-error steps for both sides.
    pub fn step_spacing(&mut self) {
        let pb = self.problem;
        let ls = self.config.line_search;
        for side in [Side::Bs, Side::Ue] {
            let f0 = global_objective(&pb, &self.state.calibration, &self.state.frames);
            update_spacing(&pb, &mut self.state.calibration, &self.state.frames, side, f0, &ls);
        }
    }

    /// Path update for every frame according to the current phase.
    pub fn step_paths(&mut self) -> Result<()> {
        self.state.frames = match (self.state.phase, self.state.frames.is_empty()) {
            (Phase::OnGrid, _) | (_, true) => self.ongrid_frames()?,
            (Phase::OffGrid, false) => self.refine_frames(),
        };
        Ok(())
    }

    /// One full outer iteration. Returns `true` when the early-exit criterion fired.
    pub fn iterate(&mut self) -> Result<bool> {
        self.step_paths()?;
        let mask = self.config.calibrate;
        if mask.coupling {
            self.step_coupling()?;
        }
        if mask.gains {
            self.step_gains();
        }
        if mask.spacing {
            self.step_spacing();
        }
        let f = global_objective(&self.problem, &self.state.calibration, &self.state.frames);
        if !f.is_finite() {
            return Err(Error::Diverged(format!("objective {f} at iteration {}", self.state.iterations)));
        }
        self.state.objective_history.push(f);
        self.state.iterations += 1;
        let df = delta_f(&self.state.objective_history);
        match self.state.phase {
            Phase::OnGrid => {
                if df <= self.config.switch_threshold {
                    self.state.phase = Phase::OffGrid;
                }
            }
            Phase::OffGrid => {
                if self.state.coupling_mode == CouplingMode::ToeplitzOnly {
                    if df <= self.config.approx_threshold {
                        self.state.coupling_mode = CouplingMode::Approx;
                    }
                } else if let Some(tol) = self.config.early_exit {
                    return Ok(df < tol);
                }
            }
        }
        Ok(false)
    }

    /// Runs up to `max_iters` iterations. With zero iterations the result is
    /// the on-grid estimate under the initial calibration.
    pub fn run(mut self) -> Result<Estimate> {
        if self.config.max_iters == 0 {
            self.step_paths()?;
            let f = global_objective(&self.problem, &self.state.calibration, &self.state.frames);
            self.state.objective_history.push(f);
        }
        for _ in 0..self.config.max_iters {
            if self.iterate()? {
                break;
            }
        }
        let last = self.state.frames.last().expect("frames estimated");
        let channel = reconstruct_channel(self.problem.link, &self.state.calibration, last);
        Ok(Estimate { channel, state: self.state })
    }
}

/// Runs the estimator from an ideal initial calibration.
pub fn run_estimation(link: &Link, meas: &MeasurementSet, config: &AlgoConfig) -> Result<Estimate> {
    Estimator::new(link, meas, config.clone(), Calibration::ideal(link))?.run()
}

/// Least-squares gains with true paths and true array errors, for the last
/// frame; reconstructs the channel on every subcarrier.
pub fn genie_ls_baseline(link: &Link, meas: &MeasurementSet, truth: &Calibration, paths: &PathSet) -> Vec<CMat> {
    let pb = Problem::new(link, meas);
    let kernel = FrameKernel::new(&pb, truth, paths);
    let mut est = paths.clone();
    est.gains = kernel.solve_gains(meas.frames.last().expect("at least one frame"));
    reconstruct_channel(link, truth, &est)
}

//! Scenario configuration and presets.
//!
//! Config files are TOML. Every key is optional; omitted keys come from the
//! preset named by the top-level `preset` key (default `desk`):
//!
//! ```toml
//! preset = "desk"
//! seed = 7
//! trials = 20
//! snr_db = [0.0, 10.0, 20.0]
//! n_pilots = [24]
//! methods = ["proposed-approx", "omp-uncalibrated"]
//!
//! [system]
//! bs_x = 16
//! n_frames = 3
//!
//! [algorithm]
//! max_iters = 60
//! radii_bs = { q_x = 2, q_y = 0 }
//!
//! [impairments]
//! phase_std = 0.349
//! ```

use crate::array::{ArrayGeometry, FrequencyGrid, ImpairmentConfig};
use crate::channel::Link;
use crate::coupling::CouplingRadii;
use crate::error::{Error, Result};
use crate::estimator::AlgoConfig;
use crate::measurement::{PilotAllocation, TrainingConfig};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Link, OFDM and training dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub n_subcarriers: usize,
    pub n_cp: usize,
    pub n_pilot_subcarriers: usize,
    pub pilot_allocation: PilotAllocation,
    pub bs_x: usize,
    pub bs_y: usize,
    pub ue_x: usize,
    pub ue_y: usize,
    pub n_rf_bs: usize,
    pub n_rf_ue: usize,
    /// Pilot symbols per frame (overridden per sweep point).
    pub n_pilots: usize,
    pub n_frames: usize,
    pub n_true_paths: usize,
    pub pilot_power: f64,
}

impl SystemConfig {
    pub fn link(&self) -> Result<Link> {
        let freq = FrequencyGrid::new(self.carrier_hz, self.bandwidth_hz, self.n_subcarriers)?;
        if self.bs_x * self.bs_y == 0 || self.ue_x * self.ue_y == 0 {
            return Err(Error::Config("arrays need at least one element".into()));
        }
        Ok(Link {
            freq,
            bs: ArrayGeometry::half_wavelength(self.bs_x, self.bs_y, &freq),
            ue: ArrayGeometry::half_wavelength(self.ue_x, self.ue_y, &freq),
            n_cp: self.n_cp,
        })
    }

    pub fn training(&self, n_pilots: usize) -> TrainingConfig {
        TrainingConfig { n_rf_bs: self.n_rf_bs, n_rf_ue: self.n_rf_ue, n_pilots, pilot_power: self.pilot_power }
    }
}

/// Compared estimation methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Least-squares gains with true paths and true array errors.
    GenieLs,
    /// Full path estimation with array errors fixed to the truth.
    PerfectCalibration,
    /// Calibration with the approximate coupling model.
    ProposedApprox,
    /// Calibration with the Toeplitz-only coupling model.
    ProposedSwitch,
    /// Toeplitz-only calibration, refinement from the first iteration on.
    ProposedNoSwitch,
    /// On-grid OMP with no calibration.
    OmpUncalibrated,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::GenieLs,
        Method::PerfectCalibration,
        Method::ProposedApprox,
        Method::ProposedSwitch,
        Method::ProposedNoSwitch,
        Method::OmpUncalibrated,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::GenieLs => "genie-ls",
            Method::PerfectCalibration => "perfect-calibration",
            Method::ProposedApprox => "proposed-approx",
            Method::ProposedSwitch => "proposed-switch",
            Method::ProposedNoSwitch => "proposed-no-switch",
            Method::OmpUncalibrated => "omp-uncalibrated",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .find(|m| m.as_str() == s)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown method {s}")))
    }
}

/// Array layout family, used only as a label in result tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Ula,
    Upa,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::Ula => "ula",
            Scenario::Upa => "upa",
        }
    }
}

/// A full Monte Carlo experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub preset: String,
    pub scenario: Scenario,
    pub seed: u64,
    pub trials: usize,
    pub snr_db: Vec<f64>,
    pub n_pilots: Vec<usize>,
    pub methods: Vec<Method>,
    /// Coupling penalty is `lambda_scale / SNR` (linear SNR).
    pub lambda_scale: f64,
    /// Record wall-clock seconds in result tables (breaks byte-identical output).
    pub timing: bool,
    pub system: SystemConfig,
    pub algorithm: AlgoConfig,
    pub impairments: ImpairmentConfig,
}

/// Names accepted by [`ScenarioConfig::preset`].
pub const PRESETS: [&str; 3] = ["desk", "paper-ula", "paper-upa"];

impl ScenarioConfig {
    /// Small linear-array setting that runs in minutes on a laptop.
    pub fn desk() -> Self {
        Self {
            preset: "desk".into(),
            scenario: Scenario::Ula,
            seed: 1,
            trials: 50,
            snr_db: vec![20.0],
            n_pilots: vec![24],
            methods: Method::ALL.to_vec(),
            lambda_scale: 100.0,
            timing: false,
            system: SystemConfig {
                carrier_hz: 50e9,
                bandwidth_hz: 2.5e9,
                n_subcarriers: 32,
                n_cp: 8,
                n_pilot_subcarriers: 8,
                pilot_allocation: PilotAllocation::Uniform,
                bs_x: 16,
                bs_y: 1,
                ue_x: 4,
                ue_y: 1,
                n_rf_bs: 2,
                n_rf_ue: 2,
                n_pilots: 24,
                n_frames: 3,
                n_true_paths: 4,
                pilot_power: 1.0,
            },
            algorithm: AlgoConfig {
                max_iters: 60,
                n_paths: 8,
                radii_bs: CouplingRadii::new(2, 0),
                radii_ue: CouplingRadii::new(2, 0),
                ..AlgoConfig::default()
            },
            impairments: ImpairmentConfig::default(),
        }
    }

    /// Full-size linear-array setting.
    pub fn paper_ula() -> Self {
        let mut s = Self::desk();
        s.preset = "paper-ula".into();
        s.trials = 200;
        s.snr_db = vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0];
        s.n_pilots = vec![50];
        s.system.n_subcarriers = 64;
        s.system.n_cp = 16;
        s.system.n_pilot_subcarriers = 16;
        s.system.bs_x = 32;
        s.system.ue_x = 8;
        s.system.n_pilots = 50;
        s.system.n_frames = 5;
        s.system.n_true_paths = 6;
        s.algorithm.max_iters = 250;
        s.algorithm.n_paths = 12;
        s
    }

    /// Full-size planar-array setting.
    pub fn paper_upa() -> Self {
        let mut s = Self::paper_ula();
        s.preset = "paper-upa".into();
        s.scenario = Scenario::Upa;
        s.system.bs_x = 8;
        s.system.bs_y = 4;
        s.algorithm.max_iters = 1000;
        s.algorithm.radii_bs = CouplingRadii::new(1, 1);
        s
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper-ula" => Ok(Self::paper_ula()),
            "paper-upa" => Ok(Self::paper_upa()),
            _ => Err(Error::Config(format!("unknown preset {name}; expected one of {PRESETS:?}"))),
        }
    }

    /// Parses TOML text, filling omitted keys from the named preset.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let user: toml::Table = toml::from_str(text)?;
        let name = user.get("preset").and_then(|v| v.as_str()).unwrap_or("desk");
        let base = Self::preset(name)?;
        let mut merged = toml::Table::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut merged, user);
        let cfg: Self = toml::Value::Table(merged).try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks dimensions and sweep values.
    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        let link = s.link()?;
        if s.n_pilot_subcarriers == 0 || s.n_pilot_subcarriers > s.n_subcarriers {
            return Err(Error::Config("need 1 <= pilot subcarriers <= subcarriers".into()));
        }
        if s.n_frames == 0 || s.n_true_paths == 0 || s.n_cp == 0 {
            return Err(Error::Config("frames, paths and cyclic prefix must be positive".into()));
        }
        if self.trials == 0 || self.snr_db.is_empty() || self.n_pilots.is_empty() || self.methods.is_empty() {
            return Err(Error::Config("empty sweep".into()));
        }
        if self.n_pilots.contains(&0) {
            return Err(Error::Config("pilot counts must be positive".into()));
        }
        if s.n_rf_bs > link.bs.n_elements() || s.n_rf_ue > link.ue.n_elements() {
            return Err(Error::Config("more RF chains than antennas".into()));
        }
        crate::coupling::CouplingModel::new(&link.bs, self.algorithm.radii_bs)?;
        crate::coupling::CouplingModel::new(&link.ue, self.algorithm.radii_ue)?;
        if !(self.algorithm.line_search.shrink > 0.0 && self.algorithm.line_search.shrink < 1.0) {
            return Err(Error::Config("line-search shrink must be in (0, 1)".into()));
        }
        Ok(())
    }

    /// Algorithm settings for one SNR point and method.
    pub fn algo_for(&self, method: Method, snr_db: f64) -> AlgoConfig {
        let mut a = self.algorithm.clone();
        let lambda = self.lambda_scale / 10f64.powf(snr_db / 10.0);
        a.lambda_bs = lambda;
        a.lambda_ue = lambda;
        match method {
            Method::ProposedApprox | Method::GenieLs => {}
            Method::ProposedSwitch => {
                a.radii_bs = CouplingRadii::toeplitz();
                a.radii_ue = CouplingRadii::toeplitz();
            }
            Method::ProposedNoSwitch => {
                a.radii_bs = CouplingRadii::toeplitz();
                a.radii_ue = CouplingRadii::toeplitz();
                a.switch_threshold = f64::INFINITY;
            }
            Method::PerfectCalibration => {
                a.calibrate = crate::estimator::CalibrationMask::none();
            }
            Method::OmpUncalibrated => {
                a.max_iters = 0;
                a.calibrate = crate::estimator::CalibrationMask::none();
            }
        }
        a
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Thread count from the `SQUINTCAL_THREADS` environment variable, if set.
pub const THREADS_ENV: &str = "SQUINTCAL_THREADS";

//! JSON persistence for measurement sets and estimator checkpoints.
//!
//! Complex numbers are written as `[re, im]`; matrices as arrays of rows.

use crate::array::{ArrayErrors, SpacingErrors};
use crate::channel::PathSet;
use crate::error::{Error, Result};
use crate::estimator::{CouplingMode, EstimatorState, Phase};
use crate::linalg::{CMat, CVec, C64};
use crate::measurement::{MeasurementSet, PilotSchedule, WhitenedBeams};
use crate::model::Calibration;
use serde::{Deserialize, Serialize};
use std::path::Path;

fn rows(m: &CMat) -> Vec<Vec<C64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(r: &[Vec<C64>]) -> Result<CMat> {
    let n = r.len();
    let m = r.first().map_or(0, |x| x.len());
    if r.iter().any(|x| x.len() != m) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(CMat::from_fn(n, m, |i, j| r[i][j]))
}

/// Serializable measurement set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasurementDump {
    pub format: String,
    pub sigma2: f64,
    pub schedule: PilotSchedule,
    pub whitening: Vec<Vec<Vec<C64>>>,
    pub combiners: Vec<Vec<Vec<C64>>>,
    pub transmit: Vec<Vec<C64>>,
    /// `y[m][slot][pilot]`, each of length `N_rRF`.
    pub y: Vec<Vec<Vec<Vec<C64>>>>,
}

impl MeasurementDump {
    pub const FORMAT: &'static str = "squintcal.measurements.v1";

    pub fn from_set(ms: &MeasurementSet) -> Self {
        let np = ms.schedule.n_pilots;
        let nq = ms.schedule.subcarriers.len();
        let y = (0..ms.frames.len())
            .map(|m| (0..nq).map(|q| (0..np).map(|p| ms.block(m, q, p).to_vec()).collect()).collect())
            .collect();
        Self {
            format: Self::FORMAT.into(),
            sigma2: ms.sigma2,
            schedule: ms.schedule.clone(),
            whitening: ms.beams.whitening.iter().map(rows).collect(),
            combiners: ms.beams.combiners.iter().map(rows).collect(),
            transmit: ms.beams.transmit.iter().map(|v| v.iter().copied().collect()).collect(),
            y,
        }
    }

    pub fn into_set(self) -> Result<MeasurementSet> {
        if self.format != Self::FORMAT {
            return Err(Error::Config(format!("unknown measurement format {}", self.format)));
        }
        let beams = WhitenedBeams {
            whitening: self.whitening.iter().map(|m| from_rows(m)).collect::<Result<_>>()?,
            combiners: self.combiners.iter().map(|m| from_rows(m)).collect::<Result<_>>()?,
            transmit: self.transmit.iter().map(|v| CVec::from_vec(v.clone())).collect(),
        };
        let frames = self
            .y
            .iter()
            .map(|f| CVec::from_vec(f.iter().flat_map(|q| q.iter().flat_map(|p| p.iter().copied())).collect()))
            .collect();
        Ok(MeasurementSet { frames, beams, schedule: self.schedule, sigma2: self.sigma2 })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrayErrorsDump {
    pub coupling: Vec<Vec<C64>>,
    pub gains: Vec<C64>,
    pub spacing: SpacingErrors,
}

impl ArrayErrorsDump {
    pub fn from_errors(e: &ArrayErrors) -> Self {
        Self { coupling: rows(&e.coupling), gains: e.gains.iter().copied().collect(), spacing: e.spacing.clone() }
    }

    pub fn into_errors(self) -> Result<ArrayErrors> {
        Ok(ArrayErrors { coupling: from_rows(&self.coupling)?, gains: CVec::from_vec(self.gains), spacing: self.spacing })
    }
}

/// Serializable estimator checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateDump {
    pub format: String,
    pub errors_bs: ArrayErrorsDump,
    pub errors_ue: ArrayErrorsDump,
    pub frames: Vec<PathSet>,
    pub objective_history: Vec<f64>,
    pub phase: Phase,
    pub coupling_mode: CouplingMode,
    pub iterations: usize,
}

impl StateDump {
    pub const FORMAT: &'static str = "squintcal.state.v1";

    pub fn from_state(s: &EstimatorState) -> Self {
        Self {
            format: Self::FORMAT.into(),
            errors_bs: ArrayErrorsDump::from_errors(&s.calibration.bs),
            errors_ue: ArrayErrorsDump::from_errors(&s.calibration.ue),
            frames: s.frames.clone(),
            objective_history: s.objective_history.clone(),
            phase: s.phase,
            coupling_mode: s.coupling_mode,
            iterations: s.iterations,
        }
    }

    pub fn into_state(self) -> Result<EstimatorState> {
        if self.format != Self::FORMAT {
            return Err(Error::Config(format!("unknown state format {}", self.format)));
        }
        Ok(EstimatorState {
            calibration: Calibration { bs: self.errors_bs.into_errors()?, ue: self.errors_ue.into_errors()? },
            frames: self.frames,
            objective_history: self.objective_history,
            phase: self.phase,
            coupling_mode: self.coupling_mode,
            iterations: self.iterations,
        })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(f, value)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    Ok(serde_json::from_reader(f)?)
}

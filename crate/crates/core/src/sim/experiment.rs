//! Trial generation and the parallel sweep driver.

use super::config::{Method, ScenarioConfig};
use super::metrics::{nmse_channel, nmse_coupling, to_db};
use crate::array::ArrayErrors;
use crate::channel::{channel_all, Link, PathSet};
use crate::error::{Error, Result};
use crate::estimator::{genie_ls_baseline, Estimator};
use crate::linalg::CMat;
use crate::measurement::{allocate_with, design_training_beams, simulate_measurements, whiten, MeasurementSet, PilotSchedule};
use crate::model::Calibration;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::time::Instant;

/// One synthetic problem instance: ground truth plus observations.
#[derive(Debug, Clone)]
pub struct Trial {
    pub link: Link,
    pub truth: Calibration,
    /// Paths of every frame; the last frame is the one being estimated.
    pub paths: Vec<PathSet>,
    /// True channel of the last frame on every subcarrier.
    pub channel: Vec<CMat>,
    pub measurements: MeasurementSet,
}

/// Stream tag separating ground-truth draws from training/noise draws.
const TRAINING_STREAM: u64 = 1 << 40;

/// Draws a trial. Array errors and paths depend only on `(seed, trial)`, so
/// every SNR and pilot-count point of a sweep shares them.
pub fn generate_trial(cfg: &ScenarioConfig, trial: usize, snr_db: f64, n_pilots: usize, point: usize) -> Result<Trial> {
    let sys = &cfg.system;
    let link = sys.link()?;
    let lambda = link.freq.wavelength();

    let mut truth_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    truth_rng.set_stream(trial as u64);
    let truth = Calibration {
        bs: ArrayErrors::sample(&link.bs, &cfg.impairments, lambda, &mut truth_rng),
        ue: ArrayErrors::sample(&link.ue, &cfg.impairments, lambda, &mut truth_rng),
    };
    let paths: Vec<PathSet> = (0..sys.n_frames)
        .map(|_| PathSet::sample(sys.n_true_paths, link.max_delay(), &mut truth_rng))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(TRAINING_STREAM + ((point as u64) << 20) + trial as u64);
    let raw = design_training_beams(&link, &sys.training(n_pilots), &mut rng)?;
    let sigma2 = sys.pilot_power / 10f64.powf(snr_db / 10.0);
    let beams = whiten(&raw, sigma2.sqrt())?;
    let schedule = PilotSchedule {
        subcarriers: allocate_with(sys.pilot_allocation, sys.n_subcarriers, sys.n_pilot_subcarriers, &mut rng)?,
        n_pilots,
        n_frames: sys.n_frames,
    };
    let channels: Vec<Vec<CMat>> = paths.iter().map(|p| channel_all(&link, &truth.bs, &truth.ue, p)).collect();
    let measurements = simulate_measurements(&channels, &raw, &beams, &schedule, sigma2, &mut rng)?;
    let channel = channels.last().expect("at least one frame").clone();
    Ok(Trial { link, truth, paths, channel, measurements })
}

/// One row of the result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub method: Method,
    pub scenario: String,
    pub snr_db: f64,
    pub n_pilots: usize,
    pub trial: usize,
    pub nmse_h_db: f64,
    /// BS coupling error; `NaN` for methods that do not estimate coupling.
    pub nmse_cr_db: f64,
    pub iters: usize,
    pub seconds: f64,
}

/// Runs one method on a trial.
pub fn run_method(cfg: &ScenarioConfig, trial: &Trial, method: Method, snr_db: f64) -> Result<(Vec<CMat>, Option<CMat>, usize)> {
    let link = &trial.link;
    let ms = &trial.measurements;
    match method {
        Method::GenieLs => {
            let last = trial.paths.last().expect("at least one frame");
            Ok((genie_ls_baseline(link, ms, &trial.truth, last), None, 0))
        }
        _ => {
            let algo = cfg.algo_for(method, snr_db);
            let init = match method {
                Method::PerfectCalibration => trial.truth.clone(),
                _ => Calibration::ideal(link),
            };
            let est = Estimator::new(link, ms, algo, init)?.run()?;
            let coupling = match method {
                Method::PerfectCalibration => None,
                _ => Some(est.state.calibration.bs.coupling.clone()),
            };
            Ok((est.channel, coupling, est.state.iterations))
        }
    }
}

/// Runs every configured method on one trial.
pub fn run_trial(cfg: &ScenarioConfig, trial_idx: usize, snr_db: f64, n_pilots: usize, point: usize) -> Result<Vec<TrialResult>> {
    let trial = generate_trial(cfg, trial_idx, snr_db, n_pilots, point)?;
    cfg.methods
        .iter()
        .map(|&m| {
            let t0 = Instant::now();
            let (h, c, iters) = run_method(cfg, &trial, m, snr_db)?;
            let seconds = t0.elapsed().as_secs_f64();
            Ok(TrialResult {
                method: m,
                scenario: cfg.scenario.as_str().into(),
                snr_db,
                n_pilots,
                trial: trial_idx,
                nmse_h_db: to_db(nmse_channel(&trial.channel, &h)),
                nmse_cr_db: c.map_or(f64::NAN, |c| to_db(nmse_coupling(&trial.truth.bs.coupling, &c))),
                iters,
                seconds: if cfg.timing { seconds } else { 0.0 },
            })
        })
        .collect()
}

/// Runs the whole sweep on `threads` worker threads (0 = rayon default).
/// Results are ordered by (SNR, pilot count, trial, method) regardless of
/// the thread count.
pub fn run_experiment(cfg: &ScenarioConfig, threads: usize) -> Result<Vec<TrialResult>> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for (si, &snr) in cfg.snr_db.iter().enumerate() {
        for (pi, &np) in cfg.n_pilots.iter().enumerate() {
            let point = si * cfg.n_pilots.len() + pi;
            for t in 0..cfg.trials {
                jobs.push((snr, np, point, t));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let nested: Vec<Result<Vec<TrialResult>>> = pool.install(|| {
        jobs.par_iter().map(|&(snr, np, point, t)| run_trial(cfg, t, snr, np, point)).collect()
    });
    let mut out = Vec::new();
    for r in nested {
        out.extend(r?);
    }
    Ok(out)
}

/// CSV header of result tables.
pub const CSV_HEADER: &str = "method,scenario,snr_db,n_pilots,trial,nmse_h_db,nmse_cr_db,iters,seconds";

/// Writes results as CSV with fixed float formatting.
pub fn write_csv<W: Write>(mut w: W, rows: &[TrialResult]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:.3},{},{},{:.6},{:.6},{},{:.6}",
            r.method, r.scenario, r.snr_db, r.n_pilots, r.trial, r.nmse_h_db, r.nmse_cr_db, r.iters, r.seconds
        )?;
    }
    Ok(())
}

/// Reads a result CSV written by [`write_csv`].
pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<TrialResult>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

//! Instance builders shared by the integration tests.
#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use squintcal::array::{ArrayErrors, ArrayGeometry, FrequencyGrid, ImpairmentConfig};
use squintcal::channel::{channel_all, Link, PathSet};
use squintcal::measurement::{allocate_pilot_subcarriers, design_training_beams, simulate_measurements, whiten, MeasurementSet, PilotSchedule, TrainingConfig};
use squintcal::model::Calibration;
use squintcal::CMat;

pub struct Instance {
    pub link: Link,
    pub truth: Calibration,
    pub frames: Vec<PathSet>,
    pub meas: MeasurementSet,
}

pub fn link(bs: (usize, usize), ue: (usize, usize), k: usize) -> Link {
    let freq = FrequencyGrid::new(50e9, 2.5e9, k).unwrap();
    Link { freq, bs: ArrayGeometry::half_wavelength(bs.0, bs.1, &freq), ue: ArrayGeometry::half_wavelength(ue.0, ue.1, &freq), n_cp: 4 }
}

pub fn random_errors(link: &Link, rng: &mut ChaCha8Rng) -> Calibration {
    let imp = ImpairmentConfig { spacing_max_wavelengths: 0.02, ..Default::default() };
    let lambda = link.freq.wavelength();
    Calibration { bs: ArrayErrors::sample(&link.bs, &imp, lambda, rng), ue: ArrayErrors::sample(&link.ue, &imp, lambda, rng) }
}

/// Small instance with `n_frames` frames of `l` paths each.
pub fn instance(seed: u64, link: Link, truth: Option<Calibration>, l: usize, n_frames: usize, n_pilots: usize, sigma2: f64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = truth.unwrap_or_else(|| random_errors(&link, &mut rng));
    let frames: Vec<PathSet> = (0..n_frames).map(|_| PathSet::sample(l, link.max_delay(), &mut rng)).collect();
    let tc = TrainingConfig { n_rf_bs: 2, n_rf_ue: 2, n_pilots, pilot_power: 1.0 };
    let raw = design_training_beams(&link, &tc, &mut rng).unwrap();
    let beams = whiten(&raw, sigma2.sqrt()).unwrap();
    let schedule = PilotSchedule { subcarriers: allocate_pilot_subcarriers(link.freq.n_subcarriers, 4).unwrap(), n_pilots, n_frames };
    let h: Vec<Vec<CMat>> = frames.iter().map(|p| channel_all(&link, &truth.bs, &truth.ue, p)).collect();
    let meas = simulate_measurements(&h, &raw, &beams, &schedule, sigma2, &mut rng).unwrap();
    Instance { link, truth, frames, meas }
}

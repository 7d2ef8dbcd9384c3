//! Training beams, pilot schedule, noisy observations and noise whitening.

use crate::channel::Link;
use crate::error::{Error, Result};
use crate::linalg::{cis, inv_sqrt_hermitian, CMat, CVec, C64};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// RF-chain and pilot dimensions of the training phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub n_rf_bs: usize,
    pub n_rf_ue: usize,
    pub n_pilots: usize,
    /// Transmit power per pilot symbol.
    pub pilot_power: f64,
}

/// Raw analog beams and pilot symbols, one entry per pilot index.
#[derive(Debug, Clone)]
pub struct TrainingBeams {
    /// `N_t × N_tRF` analog precoders.
    pub precoders: Vec<CMat>,
    /// `N_rRF × N_r` analog combiners before whitening.
    pub combiners: Vec<CMat>,
    /// `N_tRF` pilot symbols.
    pub symbols: Vec<CVec>,
}

/// Random-phase analog beams with QPSK pilots.
pub fn design_training_beams<R: Rng + ?Sized>(
    link: &Link,
    cfg: &TrainingConfig,
    rng: &mut R,
) -> Result<TrainingBeams> {
    if cfg.n_rf_bs == 0 || cfg.n_rf_ue == 0 || cfg.n_pilots == 0 {
        return Err(Error::Config("RF chains and pilots must be positive".into()));
    }
    if cfg.n_rf_bs > link.bs.n_elements() || cfg.n_rf_ue > link.ue.n_elements() {
        return Err(Error::Config("more RF chains than antennas".into()));
    }
    let nr = link.bs.n_elements();
    let nt = link.ue.n_elements();
    let phase = |rng: &mut R, scale: f64| cis(rng.gen::<f64>() * 2.0 * PI) * scale;
    let mut out = TrainingBeams { precoders: vec![], combiners: vec![], symbols: vec![] };
    let amp = (cfg.pilot_power / 2.0).sqrt();
    for _ in 0..cfg.n_pilots {
        let sf = 1.0 / (nt as f64).sqrt();
        let f = CMat::from_fn(nt, cfg.n_rf_ue, |_, _| phase(rng, sf));
        let sw = 1.0 / (nr as f64).sqrt();
        let w = CMat::from_fn(cfg.n_rf_bs, nr, |_, _| phase(rng, sw));
        let q = CVec::from_fn(cfg.n_rf_ue, |_, _| {
            let re = if rng.gen::<bool>() { amp } else { -amp };
            let im = if rng.gen::<bool>() { amp } else { -amp };
            C64::new(re, im)
        });
        out.precoders.push(f);
        out.combiners.push(w);
        out.symbols.push(q);
    }
    Ok(out)
}

/// Beams after noise whitening.
#[derive(Debug, Clone)]
pub struct WhitenedBeams {
    /// `D_p = (W̄_p W̄_p^H)^{-1/2}`.
    pub whitening: Vec<CMat>,
    /// Whitened combiners `W_p = D_p W̄_p`.
    pub combiners: Vec<CMat>,
    /// Transmitted vectors `F_p q_p`.
    pub transmit: Vec<CVec>,
}

impl WhitenedBeams {
    pub fn n_pilots(&self) -> usize {
        self.combiners.len()
    }

    pub fn n_rf_bs(&self) -> usize {
        self.combiners.first().map_or(0, |w| w.nrows())
    }

    /// Vectorized sensing matrix `(F_p q_p)^T ⊗ W_p`, mapping `vec(H)` to the
    /// noiseless whitened observation.
    pub fn sensing_matrix(&self, p: usize) -> CMat {
        let s = &self.transmit[p];
        let st = CMat::from_row_slice(1, s.len(), s.as_slice());
        crate::linalg::kron(&st, &self.combiners[p])
    }
}

/// Whitens the combiners so that the effective noise is white with variance `σ²`.
///
/// With noise covariance `σ² W̄ W̄^H`, the whitening matrix `σ C^{-1/2}` does
/// not depend on `σ`; the argument is kept so that `σ = 0` is rejected the same
/// way as other invalid inputs.
pub fn whiten(beams: &TrainingBeams, sigma: f64) -> Result<WhitenedBeams> {
    if !(sigma >= 0.0) {
        return Err(Error::Config("noise std must be non-negative".into()));
    }
    let mut out = WhitenedBeams { whitening: vec![], combiners: vec![], transmit: vec![] };
    for ((w, f), q) in beams.combiners.iter().zip(&beams.precoders).zip(&beams.symbols) {
        let gram = w * w.adjoint();
        let d = inv_sqrt_hermitian(&gram).map_err(|ratio| Error::IllConditionedBeams { ratio })?;
        out.combiners.push(&d * w);
        out.whitening.push(d);
        out.transmit.push(f * q);
    }
    Ok(out)
}

/// How pilot subcarriers are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PilotAllocation {
    #[default]
    Uniform,
    Random,
}

/// Pilot subcarrier set and frame layout. Subcarrier indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotSchedule {
    pub subcarriers: Vec<usize>,
    pub n_pilots: usize,
    pub n_frames: usize,
}

impl PilotSchedule {
    pub fn n_pilot_subcarriers(&self) -> usize {
        self.subcarriers.len()
    }
}

/// Uniform-stride pilot subcarriers, 0-based: `floor(i K / Q)` for `i < Q`,
/// or the centre subcarrier when `Q = 1`.
pub fn allocate_pilot_subcarriers(k_total: usize, q: usize) -> Result<Vec<usize>> {
    if q == 0 || q > k_total {
        return Err(Error::Config(format!("need 1 <= Q <= K, got Q={q}, K={k_total}")));
    }
    if q == 1 {
        return Ok(vec![k_total.div_ceil(2) - 1]);
    }
    Ok((0..q).map(|i| i * k_total / q).collect())
}

/// Pilot subcarriers under an allocation strategy; `Random` draws a sorted
/// subset without replacement.
pub fn allocate_with<R: Rng + ?Sized>(
    strategy: PilotAllocation,
    k_total: usize,
    q: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    match strategy {
        PilotAllocation::Uniform => allocate_pilot_subcarriers(k_total, q),
        PilotAllocation::Random => {
            if q == 0 || q > k_total {
                return Err(Error::Config(format!("need 1 <= Q <= K, got Q={q}, K={k_total}")));
            }
            let mut v = sample(rng, k_total, q).into_vec();
            v.sort_unstable();
            Ok(v)
        }
    }
}

/// Whitened observations for all frames.
///
/// Frame `m` is stored as one stacked vector ordered by (pilot subcarrier,
/// pilot, RF chain), RF chain fastest.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    pub frames: Vec<CVec>,
    pub beams: WhitenedBeams,
    pub schedule: PilotSchedule,
    pub sigma2: f64,
}

impl MeasurementSet {
    pub fn block_len(&self) -> usize {
        self.beams.n_rf_bs()
    }

    /// Offset of the `(q, p)` block inside a stacked frame vector.
    pub fn offset(&self, q: usize, p: usize) -> usize {
        (q * self.schedule.n_pilots + p) * self.block_len()
    }

    /// Observation for frame `m`, pilot subcarrier slot `q` and pilot `p`.
    pub fn block(&self, m: usize, q: usize, p: usize) -> &[C64] {
        let o = self.offset(q, p);
        &self.frames[m].as_slice()[o..o + self.block_len()]
    }
}

/// Circularly-symmetric complex Gaussian vector with per-entry variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(n: usize, var: f64, rng: &mut R) -> CVec {
    let s = (var / 2.0).sqrt();
    CVec::from_fn(n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * s, im * s)
    })
}

/// Generates whitened observations `W_p H_k F_p q_p + D_p W̄_p n` for every
/// frame, pilot subcarrier and pilot, with `n ~ CN(0, σ² I)` at the antennas.
pub fn simulate_measurements<R: Rng + ?Sized>(
    channels: &[Vec<CMat>],
    raw: &TrainingBeams,
    beams: &WhitenedBeams,
    schedule: &PilotSchedule,
    sigma2: f64,
    rng: &mut R,
) -> Result<MeasurementSet> {
    if channels.len() != schedule.n_frames {
        return Err(Error::Dimension(format!(
            "{} channel frames for {} scheduled",
            channels.len(),
            schedule.n_frames
        )));
    }
    let nrf = beams.n_rf_bs();
    let np = schedule.n_pilots;
    let mut frames = Vec::with_capacity(channels.len());
    for h in channels {
        let mut y = CVec::zeros(schedule.subcarriers.len() * np * nrf);
        for (qi, &k) in schedule.subcarriers.iter().enumerate() {
            let hk = h.get(k).ok_or(Error::OutOfRange { index: k, len: h.len() })?;
            for p in 0..np {
                let mut blk = &beams.combiners[p] * (hk * &beams.transmit[p]);
                if sigma2 > 0.0 {
                    let n = complex_gaussian(hk.nrows(), sigma2, rng);
                    blk += &beams.whitening[p] * (&raw.combiners[p] * n);
                }
                let o = (qi * np + p) * nrf;
                y.rows_mut(o, nrf).copy_from(&blk);
            }
        }
        frames.push(y);
    }
    Ok(MeasurementSet { frames, beams: beams.clone(), schedule: schedule.clone(), sigma2 })
}

/// Stacked sensing operator of one frame, mapping the per-pilot-subcarrier
/// vectorized channels to the stacked observation (block diagonal).
pub fn stacked_sensing(beams: &WhitenedBeams) -> CMat {
    let np = beams.n_pilots();
    let blocks: Vec<CMat> = (0..np).map(|p| beams.sensing_matrix(p)).collect();
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks[0].ncols();
    let mut out = CMat::zeros(rows, cols);
    let mut r = 0;
    for b in &blocks {
        out.view_mut((r, 0), b.shape()).copy_from(b);
        r += b.nrows();
    }
    out
}

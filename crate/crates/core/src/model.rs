//! Forward model shared by every estimation stage.
//!
//! For one frame and pilot slot `q` (subcarrier `k_q`) the whitened
//! observation of pilot `p` is
//! `W_p · (C_r Γ_r A_r) · (z_q ⊙ t_{q,p})` with `t_{q,p} = (C_t Γ_t A_t)^H F_p q_p`.

use crate::array::{steering_matrix, ArrayErrors};
use crate::channel::{Link, PathSet};
use crate::linalg::{lstsq, norm2, CMat, CVec, C64};
use crate::measurement::MeasurementSet;

/// Array-error estimates for both link ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub bs: ArrayErrors,
    pub ue: ArrayErrors,
}

impl Calibration {
    pub fn ideal(link: &Link) -> Self {
        Self { bs: ArrayErrors::ideal(&link.bs), ue: ArrayErrors::ideal(&link.ue) }
    }
}

/// Immutable estimation inputs: link numerology and observations.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub link: &'a Link,
    pub meas: &'a MeasurementSet,
}

impl<'a> Problem<'a> {
    pub fn new(link: &'a Link, meas: &'a MeasurementSet) -> Self {
        Self { link, meas }
    }

    pub fn n_slots(&self) -> usize {
        self.meas.schedule.subcarriers.len()
    }

    pub fn n_pilots(&self) -> usize {
        self.meas.schedule.n_pilots
    }

    pub fn n_frames(&self) -> usize {
        self.meas.frames.len()
    }

    pub fn rf(&self) -> usize {
        self.meas.block_len()
    }
}

/// Per-slot cached quantities.
#[derive(Debug, Clone)]
pub struct SlotKernel {
    pub subcarrier: usize,
    pub wavenumber: f64,
    /// Raw steering matrices (spacing errors only).
    pub steer_bs: CMat,
    pub steer_ue: CMat,
    /// Impaired responses `C Γ A`.
    pub resp_bs: CMat,
    pub resp_ue: CMat,
    /// `t_{q,p}` stored as columns, `L × N_p`.
    pub tx_proj: CMat,
    /// `W_p C_r Γ_r A_r` per pilot.
    pub rx_proj: Vec<CMat>,
    /// Delay phasors `b_q`.
    pub phasor: CVec,
}

/// Forward model of one frame for a fixed set of paths and calibration.
#[derive(Debug, Clone)]
pub struct FrameKernel {
    pub slots: Vec<SlotKernel>,
    pub n_paths: usize,
    pub rf: usize,
}

impl FrameKernel {
    pub fn new(pb: &Problem, cal: &Calibration, paths: &PathSet) -> Self {
        let link = pb.link;
        let beams = &pb.meas.beams;
        let dist_bs = cal.bs.distortion();
        let dist_ue = cal.ue.distortion();
        let slots = pb
            .meas
            .schedule
            .subcarriers
            .iter()
            .map(|&k| {
                let kappa = link.freq.wavenumber(k);
                let steer_bs = steering_matrix(&link.bs, &cal.bs.spacing, &paths.bs, kappa);
                let steer_ue = steering_matrix(&link.ue, &cal.ue.spacing, &paths.ue, kappa);
                let resp_bs = &dist_bs * &steer_bs;
                let resp_ue = &dist_ue * &steer_ue;
                let mut tx_proj = CMat::zeros(paths.len(), beams.n_pilots());
                for (p, s) in beams.transmit.iter().enumerate() {
                    tx_proj.set_column(p, &(resp_ue.adjoint() * s));
                }
                let rx_proj = beams.combiners.iter().map(|w| w * &resp_bs).collect();
                let phasor = CVec::from_iterator(
                    paths.len(),
                    paths.delays.iter().map(|&t| link.freq.delay_phasor(k, t)),
                );
                SlotKernel { subcarrier: k, wavenumber: kappa, steer_bs, steer_ue, resp_bs, resp_ue, tx_proj, rx_proj, phasor }
            })
            .collect();
        Self { slots, n_paths: paths.len(), rf: beams.n_rf_bs() }
    }

    pub fn n_pilots(&self) -> usize {
        self.slots.first().map_or(0, |s| s.rx_proj.len())
    }

    pub fn n_rows(&self) -> usize {
        self.slots.len() * self.n_pilots() * self.rf
    }

    /// `z_q = α ⊙ b_q`.
    pub fn slot_gains(&self, q: usize, alpha: &[C64]) -> CVec {
        let s = &self.slots[q];
        CVec::from_iterator(self.n_paths, alpha.iter().zip(s.phasor.iter()).map(|(a, b)| a * b))
    }

    /// Stacked noiseless prediction for gains `α`.
    pub fn predict(&self, alpha: &[C64]) -> CVec {
        let np = self.n_pilots();
        let mut out = CVec::zeros(self.n_rows());
        for (q, s) in self.slots.iter().enumerate() {
            let z = self.slot_gains(q, alpha);
            for p in 0..np {
                let w = z.component_mul(&s.tx_proj.column(p));
                let o = (q * np + p) * self.rf;
                out.rows_mut(o, self.rf).copy_from(&(&s.rx_proj[p] * w));
            }
        }
        out
    }

    /// Matrix mapping `α` to the stacked prediction.
    pub fn gain_matrix(&self) -> CMat {
        let np = self.n_pilots();
        let mut out = CMat::zeros(self.n_rows(), self.n_paths);
        for (q, s) in self.slots.iter().enumerate() {
            for p in 0..np {
                let o = (q * np + p) * self.rf;
                for l in 0..self.n_paths {
                    let c = s.phasor[l] * s.tx_proj[(l, p)];
                    for r in 0..self.rf {
                        out[(o + r, l)] = s.rx_proj[p][(r, l)] * c;
                    }
                }
            }
        }
        out
    }

    /// Least-squares path gains for observation `y`.
    pub fn solve_gains(&self, y: &CVec) -> Vec<C64> {
        if self.n_paths == 0 {
            return vec![];
        }
        lstsq(&self.gain_matrix(), y).x.iter().copied().collect()
    }
}

/// `‖y − prediction(α)‖²` for one frame at fixed gains.
pub fn frame_residual_energy(kernel: &FrameKernel, y: &CVec, alpha: &[C64]) -> f64 {
    norm2(&(y - kernel.predict(alpha)))
}

/// Objective summed over all frames at the frames' current gains.
pub fn global_objective(pb: &Problem, cal: &Calibration, frames: &[PathSet]) -> f64 {
    use rayon::prelude::*;
    let parts: Vec<f64> = frames
        .par_iter()
        .enumerate()
        .map(|(m, f)| frame_residual_energy(&FrameKernel::new(pb, cal, f), &pb.meas.frames[m], &f.gains))
        .collect();
    parts.iter().sum()
}

/// Impaired channel reconstruction for every subcarrier.
pub fn reconstruct_channel(link: &Link, cal: &Calibration, paths: &PathSet) -> Vec<CMat> {
    crate::channel::channel_all(link, &cal.bs, &cal.ue, paths)
}

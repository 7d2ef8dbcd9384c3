//! Mutual-coupling parameterization and closed-form coupling updates.
//!
//! The coupling matrix is symmetric with unit diagonal. Entries within the
//! radii `(q_x, q_y)` of the diagonal are free parameters (the non-Toeplitz
//! part, with symmetric blocks); entries outside share one value per
//! (block offset, in-block offset) pair (the Toeplitz part). Every parameter
//! owns a list of matrix positions, which gives the linear identity
//! `C b = b + Q_TP(b) u_TP + Q_NTP(b) u_NTP`.

use crate::array::ArrayGeometry;
use crate::error::{Error, Result};
use crate::linalg::{solve_hermitian, CMat, CVec, C64};
use crate::model::{Calibration, FrameKernel, Problem};
use crate::channel::PathSet;
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Exact-model radii along x and y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CouplingRadii {
    pub q_x: usize,
    pub q_y: usize,
}

impl CouplingRadii {
    pub fn new(q_x: usize, q_y: usize) -> Self {
        Self { q_x, q_y }
    }

    /// Toeplitz-only model.
    pub fn toeplitz() -> Self {
        Self { q_x: 0, q_y: 0 }
    }
}

/// Toeplitz parameter count.
pub fn toeplitz_param_count(n_x: usize, n_y: usize, r: CouplingRadii) -> usize {
    n_x * (n_y - r.q_y - 1) + (r.q_y + 1) * (n_x - r.q_x - 1)
}

/// Parameters in one off-diagonal symmetric block with in-block radius `q_x`.
pub fn block_param_count(n_x: usize, q_x: usize) -> usize {
    n_x + q_x * (n_x - 1) - q_x * q_x.saturating_sub(1) / 2
}

/// Non-Toeplitz parameter count.
pub fn non_toeplitz_param_count(n_x: usize, n_y: usize, r: CouplingRadii) -> usize {
    let qx = block_param_count(n_x, r.q_x);
    n_y * (qx - n_x) + qx * r.q_y * (n_y - r.q_y) + qx * r.q_y * r.q_y.saturating_sub(1) / 2
}

type Positions = Vec<(usize, usize)>;

/// Parameter-to-position map for one array and radii.
#[derive(Debug, Clone)]
pub struct CouplingModel {
    pub n_x: usize,
    pub n_y: usize,
    pub radii: CouplingRadii,
    tp: Vec<Positions>,
    ntp: Vec<Positions>,
    /// Ranges of `u_NTP` holding diagonal block `j`.
    diag_blocks: Vec<Range<usize>>,
    /// Ranges of `u_NTP` holding off-diagonal block `(j, j + d)`, keyed by `(j, d)`.
    off_blocks: Vec<((usize, usize), Range<usize>)>,
}

impl CouplingModel {
    pub fn new(geom: &ArrayGeometry, radii: CouplingRadii) -> Result<Self> {
        let (nx, ny) = (geom.n_x, geom.n_y);
        if nx == 0 || ny == 0 {
            return Err(Error::Config("empty array".into()));
        }
        if radii.q_x > nx - 1 || radii.q_y > ny - 1 {
            return Err(Error::Config(format!(
                "radii ({}, {}) exceed array ({nx}, {ny})",
                radii.q_x, radii.q_y
            )));
        }
        let idx = |i: usize, j: usize| j * nx + i;
        let (qx, qy) = (radii.q_x, radii.q_y);

        let mut tp = Vec::new();
        for d in 0..ny {
            let deltas = if d <= qy { qx + 1..nx } else { 0..nx };
            for delta in deltas {
                let mut pos = Vec::new();
                for j in 0..ny - d {
                    let jj = j + d;
                    for i in 0..nx {
                        for ii in 0..nx {
                            if i.abs_diff(ii) != delta {
                                continue;
                            }
                            if d == 0 && ii <= i {
                                continue;
                            }
                            pos.push((idx(i, j), idx(ii, jj)));
                            pos.push((idx(ii, jj), idx(i, j)));
                        }
                    }
                }
                tp.push(pos);
            }
        }

        let mut ntp: Vec<Positions> = Vec::new();
        let mut diag_blocks = Vec::new();
        for j in 0..ny {
            let start = ntp.len();
            for r in 0..nx.saturating_sub(1) {
                for c in r + 1..=(r + qx).min(nx - 1) {
                    ntp.push(vec![(idx(r, j), idx(c, j)), (idx(c, j), idx(r, j))]);
                }
            }
            diag_blocks.push(start..ntp.len());
        }
        let mut off_blocks = Vec::new();
        for j in 0..ny {
            for d in 1..=qy {
                let jj = j + d;
                if jj >= ny {
                    break;
                }
                let start = ntp.len();
                for i in 0..nx {
                    ntp.push(vec![(idx(i, j), idx(i, jj)), (idx(i, jj), idx(i, j))]);
                }
                for r in 0..nx.saturating_sub(1) {
                    for c in r + 1..=(r + qx).min(nx - 1) {
                        ntp.push(vec![
                            (idx(r, j), idx(c, jj)),
                            (idx(c, jj), idx(r, j)),
                            (idx(c, j), idx(r, jj)),
                            (idx(r, jj), idx(c, j)),
                        ]);
                    }
                }
                off_blocks.push(((j, d), start..ntp.len()));
            }
        }
        Ok(Self { n_x: nx, n_y: ny, radii, tp, ntp, diag_blocks, off_blocks })
    }

    pub fn n_elements(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn n_toeplitz(&self) -> usize {
        self.tp.len()
    }

    pub fn n_non_toeplitz(&self) -> usize {
        self.ntp.len()
    }

    pub fn n_params(&self) -> usize {
        self.tp.len() + self.ntp.len()
    }

    fn positions(&self, q: usize) -> &Positions {
        if q < self.tp.len() {
            &self.tp[q]
        } else {
            &self.ntp[q - self.tp.len()]
        }
    }

    /// Coupling matrix for stacked parameters `[u_TP; u_NTP]`.
    pub fn reconstruct(&self, u: &CVec) -> CMat {
        let n = self.n_elements();
        let mut c = CMat::identity(n, n);
        for q in 0..self.n_params() {
            for &(r, col) in self.positions(q) {
                c[(r, col)] = u[q];
            }
        }
        c
    }

    /// Least-squares projection of an arbitrary matrix onto the model
    /// (average over each parameter's positions).
    pub fn params_from_matrix(&self, c: &CMat) -> CVec {
        CVec::from_iterator(
            self.n_params(),
            (0..self.n_params()).map(|q| {
                let pos = self.positions(q);
                pos.iter().map(|&(r, col)| c[(r, col)]).sum::<C64>() / pos.len() as f64
            }),
        )
    }

    fn q_columns(&self, b: &[C64], range: Range<usize>) -> CMat {
        let mut m = CMat::zeros(self.n_elements(), range.len());
        for (col, q) in range.enumerate() {
            for &(r, c) in self.positions(q) {
                m[(r, col)] += b[c];
            }
        }
        m
    }

    /// `Q_TP(b)`, `N × Q_TP`.
    pub fn q_toeplitz(&self, b: &CVec) -> CMat {
        self.q_columns(b.as_slice(), 0..self.tp.len())
    }

    /// `Q_NTP(b)`, `N × Q_NTP`.
    pub fn q_non_toeplitz(&self, b: &CVec) -> CMat {
        self.q_columns(b.as_slice(), self.tp.len()..self.n_params())
    }

    /// `[Q_TP(b), Q_NTP(b)]`.
    pub fn q_full(&self, b: &CVec) -> CMat {
        self.q_columns(b.as_slice(), 0..self.n_params())
    }

    /// `W Q(b)` computed without forming `Q(b)`.
    pub fn q_full_left(&self, w: &CMat, b: &CVec) -> CMat {
        let mut m = CMat::zeros(w.nrows(), self.n_params());
        for q in 0..self.n_params() {
            for &(r, c) in self.positions(q) {
                let s = b[c];
                for i in 0..w.nrows() {
                    m[(i, q)] += w[(i, r)] * s;
                }
            }
        }
        m
    }

    /// Smoothness penalty matrix `S` (`Q × Q`, entries in `{-1, 0, 1}`):
    /// differences between adjacent diagonal blocks and between
    /// off-diagonal blocks with the same block offset in adjacent rows.
    pub fn regularizer(&self) -> CMat {
        let nq = self.n_params();
        let off = self.tp.len();
        let mut rows: Vec<(usize, usize)> = Vec::new();
        for w in self.diag_blocks.windows(2) {
            for (a, b) in w[0].clone().zip(w[1].clone()) {
                rows.push((off + a, off + b));
            }
        }
        for ((j, d), ra) in &self.off_blocks {
            if let Some((_, rb)) = self.off_blocks.iter().find(|((jj, dd), _)| *jj == j + 1 && dd == d) {
                for (a, b) in ra.clone().zip(rb.clone()) {
                    rows.push((off + a, off + b));
                }
            }
        }
        let mut s = CMat::zeros(nq.max(rows.len()), nq);
        for (i, (a, b)) in rows.into_iter().enumerate() {
            s[(i, a)] = C64::new(1.0, 0.0);
            s[(i, b)] = C64::new(-1.0, 0.0);
        }
        s
    }
}

/// Which end of the link is being calibrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bs,
    Ue,
}

/// Normal equations of a regularized coupling least-squares problem.
#[derive(Debug, Clone)]
pub struct CouplingSystem {
    pub gram: CMat,
    pub rhs: CVec,
    /// `Σ ‖d‖²`, so the objective can be evaluated without the data.
    pub energy: f64,
    pub penalty: CMat,
}

impl CouplingSystem {
    /// Regularized objective `Σ‖d − M x‖² + λ‖S x‖²` at `x`.
    pub fn objective(&self, x: &CVec, lambda: f64) -> f64 {
        let quad = (x.adjoint() * &self.gram * x)[(0, 0)].re;
        let lin = (x.adjoint() * &self.rhs)[(0, 0)].re;
        let reg = (&self.penalty * x).norm_squared();
        (self.energy - 2.0 * lin + quad).max(0.0) + lambda * reg
    }

    pub fn solve(&self, lambda: f64) -> (CVec, bool) {
        let sts = self.penalty.adjoint() * &self.penalty;
        let a = &self.gram + sts * C64::new(lambda, 0.0);
        let s = solve_hermitian(&a, &self.rhs);
        (s.x, s.floored)
    }
}

/// Accumulates the coupling normal equations for one side over all frames,
/// slots and pilots. For the UE side the unknown is the conjugate parameter
/// vector, because the UE coupling enters through `C_t^H`.
pub fn coupling_system(
    pb: &Problem,
    cal: &Calibration,
    frames: &[PathSet],
    side: Side,
    model: &CouplingModel,
) -> CouplingSystem {
    use rayon::prelude::*;
    let nq = model.n_params();
    let parts: Vec<(CMat, CVec, f64)> = frames
        .par_iter()
        .enumerate()
        .map(|(m, f)| {
            let kernel = FrameKernel::new(pb, cal, f);
            let y = &pb.meas.frames[m];
            let mut gram = CMat::zeros(nq, nq);
            let mut rhs = CVec::zeros(nq);
            let mut energy = 0.0;
            let np = kernel.n_pilots();
            for (q, s) in kernel.slots.iter().enumerate() {
                let z = kernel.slot_gains(q, &f.gains);
                for p in 0..np {
                    let wp = &pb.meas.beams.combiners[p];
                    let o = (q * np + p) * kernel.rf;
                    let yb = y.rows(o, kernel.rf);
                    let (mq, base) = match side {
                        Side::Bs => {
                            let w = z.component_mul(&s.tx_proj.column(p));
                            let mut x = &s.steer_bs * w;
                            for (xi, g) in x.iter_mut().zip(cal.bs.gains.iter()) {
                                *xi *= g;
                            }
                            (model.q_full_left(wp, &x), wp * &x)
                        }
                        Side::Ue => {
                            let mut r = s.rx_proj[p].clone();
                            crate::linalg::scale_columns(&mut r, z.as_slice());
                            let mut ga = s.steer_ue.clone();
                            for (mut row, g) in ga.row_iter_mut().zip(cal.ue.gains.iter()) {
                                row *= *g;
                            }
                            let r = r * ga.adjoint();
                            let sp = &pb.meas.beams.transmit[p];
                            (model.q_full_left(&r, sp), &r * sp)
                        }
                    };
                    let d = yb - base;
                    gram += mq.adjoint() * &mq;
                    rhs += mq.adjoint() * &d;
                    energy += d.norm_squared();
                }
            }
            (gram, rhs, energy)
        })
        .collect();
    let mut gram = CMat::zeros(nq, nq);
    let mut rhs = CVec::zeros(nq);
    let mut energy = 0.0;
    for (g, r, e) in parts {
        gram += g;
        rhs += r;
        energy += e;
    }
    CouplingSystem { gram, rhs, energy, penalty: model.regularizer() }
}

/// Closed-form coupling update for one side; returns the new matrix and
/// whether the solver had to floor a singular direction.
pub fn update_coupling(
    pb: &Problem,
    cal: &Calibration,
    frames: &[PathSet],
    side: Side,
    model: &CouplingModel,
    lambda: f64,
) -> (CMat, bool) {
    let sys = coupling_system(pb, cal, frames, side, model);
    let (x, floored) = sys.solve(lambda);
    let u = match side {
        Side::Bs => x,
        Side::Ue => x.map(|c| c.conj()),
    };
    (model.reconstruct(&u), floored)
}

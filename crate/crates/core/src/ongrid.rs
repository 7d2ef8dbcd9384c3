//! Angle-delay grids, squint-aware dictionaries and orthogonal matching pursuit.

use crate::array::{steering_matrix, Direction};
use crate::channel::PathSet;
use crate::error::{Error, Result};
use crate::linalg::{inverse_condition, lstsq, norm2, CMat, CVec, C64};
use crate::model::{Calibration, Problem};
use serde::{Deserialize, Serialize};

/// Grid point counts per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bs_x: usize,
    pub bs_y: usize,
    pub ue_x: usize,
    pub ue_y: usize,
    pub delay: usize,
}

impl GridSpec {
    /// Twice the antenna count per axis and twice the cyclic prefix in delay.
    pub fn oversampled(link: &crate::channel::Link) -> Self {
        let two = |n: usize| if n > 1 { 2 * n } else { 1 };
        Self {
            bs_x: two(link.bs.n_x),
            bs_y: two(link.bs.n_y),
            ue_x: two(link.ue.n_x),
            ue_y: two(link.ue.n_y),
            delay: 2 * link.n_cp,
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.bs_x * self.bs_y * self.ue_x * self.ue_y * self.delay
    }
}

/// Evenly spaced spatial frequencies on `[-1, 1)`.
pub fn angle_grid(n: usize) -> Vec<f64> {
    (0..n).map(|g| -1.0 + 2.0 * g as f64 / n as f64).collect()
}

/// Evenly spaced delays on `[0, max]`, endpoints included.
pub fn delay_grid(n: usize, max: f64) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n).map(|g| max * g as f64 / (n - 1) as f64).collect(),
    }
}

/// Materialized grid values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grids {
    /// BS directions, x index fastest.
    pub bs: Vec<Direction>,
    pub ue: Vec<Direction>,
    pub delays: Vec<f64>,
}

fn planar(nx: usize, ny: usize) -> Vec<Direction> {
    let gx = angle_grid(nx);
    let gy = if ny > 1 { angle_grid(ny) } else { vec![0.0] };
    gy.iter().flat_map(|&y| gx.iter().map(move |&x| Direction { x, y })).collect()
}

pub fn build_grids(spec: &GridSpec, max_delay: f64) -> Grids {
    Grids {
        bs: planar(spec.bs_x, spec.bs_y),
        ue: planar(spec.ue_x, spec.ue_y),
        delays: delay_grid(spec.delay, max_delay),
    }
}

/// A collection of candidate atoms for greedy sparse recovery.
pub trait AtomSet {
    fn n_rows(&self) -> usize;
    fn n_atoms(&self) -> usize;
    fn atom(&self, j: usize) -> CVec;
    /// `A^H r`.
    fn correlate(&self, r: &CVec) -> Vec<C64>;
    fn atom_norms(&self) -> Vec<f64>;
}

impl AtomSet for CMat {
    fn n_rows(&self) -> usize {
        self.nrows()
    }
    fn n_atoms(&self) -> usize {
        self.ncols()
    }
    fn atom(&self, j: usize) -> CVec {
        self.column(j).into_owned()
    }
    fn correlate(&self, r: &CVec) -> Vec<C64> {
        (self.adjoint() * r).iter().copied().collect()
    }
    fn atom_norms(&self) -> Vec<f64> {
        self.column_iter().map(|c| c.norm()).collect()
    }
}

struct DictSlot {
    /// `W_p Ǎ_r` per pilot, `N_rRF × G_r`.
    rx: Vec<CMat>,
    /// `Ǎ_t^H F_p q_p` as columns, `G_t × N_p`.
    tx: CMat,
    /// Delay phasors per delay grid point.
    phasor: Vec<C64>,
}

/// Implicit dictionary over the (BS angle, UE angle, delay) grid.
///
/// Column `j = (g_τ · G_t + g_t) · G_r + g_r`; rows follow the stacked
/// measurement order.
pub struct Dictionary {
    pub grids: Grids,
    slots: Vec<DictSlot>,
    rf: usize,
    n_pilots: usize,
    norms: Vec<f64>,
}

impl Dictionary {
    pub fn build(pb: &Problem, cal: &Calibration, grids: Grids) -> Self {
        let link = pb.link;
        let beams = &pb.meas.beams;
        let dist_bs = cal.bs.distortion();
        let dist_ue = cal.ue.distortion();
        let slots: Vec<DictSlot> = pb
            .meas
            .schedule
            .subcarriers
            .iter()
            .map(|&k| {
                let kappa = link.freq.wavenumber(k);
                let ar = &dist_bs * steering_matrix(&link.bs, &cal.bs.spacing, &grids.bs, kappa);
                let at = &dist_ue * steering_matrix(&link.ue, &cal.ue.spacing, &grids.ue, kappa);
                let rx = beams.combiners.iter().map(|w| w * &ar).collect();
                let mut tx = CMat::zeros(grids.ue.len(), beams.n_pilots());
                for (p, s) in beams.transmit.iter().enumerate() {
                    tx.set_column(p, &(at.adjoint() * s));
                }
                let phasor = grids.delays.iter().map(|&t| link.freq.delay_phasor(k, t)).collect();
                DictSlot { rx, tx, phasor }
            })
            .collect();
        let (gr, gt) = (grids.bs.len(), grids.ue.len());
        let mut sq = vec![0.0; gr * gt];
        for s in &slots {
            for (p, rx) in s.rx.iter().enumerate() {
                let cn: Vec<f64> = rx.column_iter().map(|c| c.norm_squared()).collect();
                for t in 0..gt {
                    let a = s.tx[(t, p)].norm_sqr();
                    for r in 0..gr {
                        sq[t * gr + r] += a * cn[r];
                    }
                }
            }
        }
        let mut norms = Vec::with_capacity(gr * gt * grids.delays.len());
        for _ in 0..grids.delays.len() {
            norms.extend(sq.iter().map(|v| v.sqrt()));
        }
        Self { grids, slots, rf: beams.n_rf_bs(), n_pilots: beams.n_pilots(), norms }
    }

    /// Grid indices `(g_r, g_t, g_τ)` of column `j`.
    pub fn triple(&self, j: usize) -> (usize, usize, usize) {
        let gr = self.grids.bs.len();
        let gt = self.grids.ue.len();
        (j % gr, (j / gr) % gt, j / (gr * gt))
    }

    /// Dense sensing matrix, refused above `budget` entries.
    pub fn materialize(&self, budget: usize) -> Result<CMat> {
        let entries = self.n_rows() * self.n_atoms();
        if entries > budget {
            return Err(Error::DictionaryTooLarge { entries, budget });
        }
        let mut m = CMat::zeros(self.n_rows(), self.n_atoms());
        for j in 0..self.n_atoms() {
            m.set_column(j, &self.atom(j));
        }
        Ok(m)
    }

    /// Paths for a set of columns and gains.
    pub fn paths(&self, support: &[usize], gains: &[C64]) -> PathSet {
        let mut p = PathSet::default();
        for (&j, &g) in support.iter().zip(gains) {
            let (r, t, d) = self.triple(j);
            p.bs.push(self.grids.bs[r]);
            p.ue.push(self.grids.ue[t]);
            p.delays.push(self.grids.delays[d]);
            p.gains.push(g);
        }
        p
    }
}

impl AtomSet for Dictionary {
    fn n_rows(&self) -> usize {
        self.slots.len() * self.n_pilots * self.rf
    }

    fn n_atoms(&self) -> usize {
        self.grids.bs.len() * self.grids.ue.len() * self.grids.delays.len()
    }

    fn atom(&self, j: usize) -> CVec {
        let (r, t, d) = self.triple(j);
        let mut out = CVec::zeros(self.n_rows());
        for (q, s) in self.slots.iter().enumerate() {
            for p in 0..self.n_pilots {
                let c = s.phasor[d] * s.tx[(t, p)];
                let o = (q * self.n_pilots + p) * self.rf;
                for i in 0..self.rf {
                    out[o + i] = s.rx[p][(i, r)] * c;
                }
            }
        }
        out
    }

    fn correlate(&self, res: &CVec) -> Vec<C64> {
        let gr = self.grids.bs.len();
        let gt = self.grids.ue.len();
        let gd = self.grids.delays.len();
        let mut out = vec![C64::new(0.0, 0.0); gr * gt * gd];
        let mut y = CMat::zeros(gr, gt);
        for (q, s) in self.slots.iter().enumerate() {
            y.fill(C64::new(0.0, 0.0));
            for p in 0..self.n_pilots {
                let o = (q * self.n_pilots + p) * self.rf;
                let x = s.rx[p].adjoint() * res.rows(o, self.rf);
                for t in 0..gt {
                    let v = s.tx[(t, p)].conj();
                    for r in 0..gr {
                        y[(r, t)] += v * x[r];
                    }
                }
            }
            for d in 0..gd {
                let b = s.phasor[d].conj();
                let base = d * gr * gt;
                for (i, v) in y.iter().enumerate() {
                    out[base + i] += b * v;
                }
            }
        }
        out
    }

    fn atom_norms(&self) -> Vec<f64> {
        self.norms.clone()
    }
}

/// Result of orthogonal matching pursuit.
#[derive(Debug, Clone, PartialEq)]
pub struct OmpResult {
    /// Selected column indices in selection order.
    pub support: Vec<usize>,
    /// Least-squares gains on the unnormalized selected columns.
    pub gains: Vec<C64>,
    /// Residual norm before the first and after every selection.
    pub residual_norms: Vec<f64>,
    /// Candidates rejected because they made the support rank deficient.
    pub dropped: Vec<usize>,
}

/// Inverse-condition threshold below which a candidate support is rejected.
pub const SUPPORT_RCOND: f64 = 1e-10;

/// Selects exactly `n_select` atoms (fewer only if candidates run out),
/// refitting gains by least squares after each selection.
pub fn omp<A: AtomSet + ?Sized>(atoms: &A, y: &CVec, n_select: usize) -> Result<OmpResult> {
    if y.len() != atoms.n_rows() {
        return Err(Error::Dimension(format!("y has {} rows, dictionary {}", y.len(), atoms.n_rows())));
    }
    if n_select == 0 || n_select > atoms.n_atoms() {
        return Err(Error::Config(format!("cannot select {n_select} of {} atoms", atoms.n_atoms())));
    }
    let norms = atoms.atom_norms();
    let mut excluded = vec![false; atoms.n_atoms()];
    let mut support = Vec::new();
    let mut cols: Vec<CVec> = Vec::new();
    let mut gains = Vec::new();
    let mut dropped = Vec::new();
    let mut r = y.clone();
    let mut residual_norms = vec![r.norm()];
    while support.len() < n_select {
        let corr = atoms.correlate(&r);
        let mut order: Vec<(usize, f64)> = corr
            .iter()
            .enumerate()
            .filter(|(j, _)| !excluded[*j] && norms[*j] > 0.0)
            .map(|(j, c)| (j, c.norm() / norms[j]))
            .collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut chosen = None;
        for (j, _) in order {
            let col = atoms.atom(j);
            let mut trial = cols.clone();
            trial.push(col);
            let m = CMat::from_columns(&trial);
            if inverse_condition(&m) <= SUPPORT_RCOND {
                log::debug!("omp: dropping atom {j} (rank deficient support)");
                excluded[j] = true;
                dropped.push(j);
                continue;
            }
            chosen = Some((j, trial, m));
            break;
        }
        let Some((j, trial, m)) = chosen else { break };
        excluded[j] = true;
        support.push(j);
        cols = trial;
        let x = lstsq(&m, y).x;
        r = y - &m * &x;
        gains = x.iter().copied().collect();
        residual_norms.push(norm2(&r).sqrt());
    }
    Ok(OmpResult { support, gains, residual_norms, dropped })
}

/// On-grid path estimate for one frame.
pub fn ongrid_frame(dict: &Dictionary, y: &CVec, n_paths: usize) -> Result<PathSet> {
    let res = omp(dict, y, n_paths)?;
    Ok(dict.paths(&res.support, &res.gains))
}

//! Continuous refinement of path angles, delays and gains.

use crate::array::{steering_d_direction, wrap_unit, Axis, Direction};
use crate::channel::PathSet;
use crate::linalg::{CVec, C64};
use crate::model::{frame_residual_energy, Calibration, FrameKernel, Problem};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Backtracking line-search settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearchConfig {
    /// Largest per-path move of a spatial frequency in one step.
    pub angle_step: f64,
    /// Largest per-path delay move, as a fraction of the maximum delay.
    pub delay_step_fraction: f64,
    /// Largest per-element spacing move, in wavelengths.
    pub spacing_step_wavelengths: f64,
    pub shrink: f64,
    pub max_steps: usize,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self {
            angle_step: 1e-2,
            delay_step_fraction: 1e-2,
            spacing_step_wavelengths: 1e-2,
            shrink: 0.5,
            max_steps: 6,
        }
    }
}

/// Backtracking along the normalized steepest-descent direction.
///
/// The direction is `-g / max|g|`, so `step` bounds the move of every
/// coordinate. Returns the first candidate whose objective is strictly below
/// `f0`, or `None` when all `max_steps` trials fail or the gradient vanishes.
pub fn backtrack<P, F>(
    x0: &[f64],
    grad: &[f64],
    f0: f64,
    step: f64,
    cfg: &LineSearchConfig,
    project: P,
    mut eval: F,
) -> Option<(Vec<f64>, f64)>
where
    P: Fn(usize, f64) -> f64,
    F: FnMut(&[f64]) -> f64,
{
    let gmax = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
    if !(gmax > 0.0) || !gmax.is_finite() {
        return None;
    }
    let mut s = step;
    for _ in 0..cfg.max_steps {
        let x: Vec<f64> = x0
            .iter()
            .zip(grad)
            .enumerate()
            .map(|(i, (x, g))| project(i, x - s * g / gmax))
            .collect();
        let f = eval(&x);
        if f < f0 {
            return Some((x, f));
        }
        s *= cfg.shrink;
    }
    None
}

/// Projected frame objective `min_α ‖y − T(α)‖²` and its minimizer.
pub fn objective_frame(pb: &Problem, cal: &Calibration, y: &CVec, paths: &PathSet) -> (f64, Vec<C64>) {
    let k = FrameKernel::new(pb, cal, paths);
    let alpha = k.solve_gains(y);
    (frame_residual_energy(&k, y, &alpha), alpha)
}

/// Gradients of the fixed-gain residual energy with respect to path parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathGradient {
    pub bs_x: Vec<f64>,
    pub bs_y: Vec<f64>,
    pub ue_x: Vec<f64>,
    pub ue_y: Vec<f64>,
    pub delay: Vec<f64>,
}

/// Residual back-projected through each whitened combiner, `W_p^H (y − ŷ)`,
/// indexed `[slot][pilot]`.
pub(crate) fn backprojected_residual(kernel: &FrameKernel, pb: &Problem, y: &CVec, alpha: &[C64]) -> Vec<Vec<CVec>> {
    let r = y - kernel.predict(alpha);
    let np = kernel.n_pilots();
    (0..kernel.slots.len())
        .map(|q| {
            (0..np)
                .map(|p| {
                    let o = (q * np + p) * kernel.rf;
                    pb.meas.beams.combiners[p].adjoint() * r.rows(o, kernel.rf)
                })
                .collect()
        })
        .collect()
}

/// `h^H v`.
fn dot_h(h: &CVec, v: &CVec) -> C64 {
    h.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// Analytic gradients of `‖y − T(α) ‖²` with `α` held fixed.
pub fn path_gradient(pb: &Problem, cal: &Calibration, y: &CVec, paths: &PathSet) -> PathGradient {
    let kernel = FrameKernel::new(pb, cal, paths);
    let alpha = &paths.gains;
    let h = backprojected_residual(&kernel, pb, y, alpha);
    let l_n = paths.len();
    let np = kernel.n_pilots();
    let link = pb.link;
    let dist_bs = cal.bs.distortion();
    let dist_ue = cal.ue.distortion();
    let mut acc = [vec![C64::new(0.0, 0.0); l_n], vec![C64::new(0.0, 0.0); l_n], vec![C64::new(0.0, 0.0); l_n], vec![C64::new(0.0, 0.0); l_n], vec![C64::new(0.0, 0.0); l_n]];
    for (q, s) in kernel.slots.iter().enumerate() {
        let z = kernel.slot_gains(q, alpha);
        let df = link.freq.offset(s.subcarrier);
        for l in 0..l_n {
            let d_bs: Vec<CVec> = [Axis::X, Axis::Y]
                .iter()
                .map(|&ax| &dist_bs * steering_d_direction(&link.bs, &cal.bs.spacing, paths.bs[l], s.wavenumber, ax))
                .collect();
            let d_ue: Vec<CVec> = [Axis::X, Axis::Y]
                .iter()
                .map(|&ax| &dist_ue * steering_d_direction(&link.ue, &cal.ue.spacing, paths.ue[l], s.wavenumber, ax))
                .collect();
            let b_l = s.resp_bs.column(l).into_owned();
            for p in 0..np {
                let hp = &h[q][p];
                let t = s.tx_proj[(l, p)];
                let w = z[l] * t;
                let hb = dot_h(hp, &b_l);
                acc[0][l] += w * dot_h(hp, &d_bs[0]);
                acc[1][l] += w * dot_h(hp, &d_bs[1]);
                let sp = &pb.meas.beams.transmit[p];
                let dt_x: C64 = d_ue[0].iter().zip(sp.iter()).map(|(a, b)| a.conj() * b).sum();
                let dt_y: C64 = d_ue[1].iter().zip(sp.iter()).map(|(a, b)| a.conj() * b).sum();
                acc[2][l] += z[l] * dt_x * hb;
                acc[3][l] += z[l] * dt_y * hb;
                acc[4][l] += w * C64::new(0.0, -2.0 * PI * df) * hb;
            }
        }
    }
    let fin = |v: &Vec<C64>| v.iter().map(|c| -2.0 * c.re).collect::<Vec<f64>>();
    PathGradient { bs_x: fin(&acc[0]), bs_y: fin(&acc[1]), ue_x: fin(&acc[2]), ue_y: fin(&acc[3]), delay: fin(&acc[4]) }
}

fn pack_angles(p: &PathSet) -> Vec<f64> {
    let mut v = Vec::with_capacity(4 * p.len());
    v.extend(p.bs.iter().map(|d| d.x));
    v.extend(p.bs.iter().map(|d| d.y));
    v.extend(p.ue.iter().map(|d| d.x));
    v.extend(p.ue.iter().map(|d| d.y));
    v
}

fn unpack_angles(p: &PathSet, v: &[f64]) -> PathSet {
    let l = p.len();
    let mut out = p.clone();
    for i in 0..l {
        out.bs[i] = Direction { x: v[i], y: v[l + i] };
        out.ue[i] = Direction { x: v[2 * l + i], y: v[3 * l + i] };
    }
    out
}

/// Outcome of one refinement sweep.
#[derive(Debug, Clone)]
pub struct Refined {
    pub paths: PathSet,
    pub objective: f64,
    pub angle_accepted: bool,
    pub delay_accepted: bool,
}

/// One sweep: angles, then delays, then closed-form gains.
///
/// Gains are first refreshed to their least-squares value so that the
/// fixed-gain gradient coincides with the gradient of the projected objective.
pub fn refine_frame(pb: &Problem, cal: &Calibration, y: &CVec, frame: &PathSet, ls: &LineSearchConfig) -> Refined {
    // The truncated LS gains can be marginally worse than the incoming ones
    // when the path responses are nearly collinear; keep the better of both.
    let (f_ls, alpha_ls) = objective_frame(pb, cal, y, frame);
    let f_in = frame_residual_energy(&FrameKernel::new(pb, cal, frame), y, &frame.gains);
    let mut cur = frame.clone();
    let mut f = f_in;
    if f_ls <= f_in {
        cur.gains = alpha_ls;
        f = f_ls;
    }

    let g = path_gradient(pb, cal, y, &cur);
    let l = cur.len();
    let mut ga = Vec::with_capacity(4 * l);
    ga.extend(&g.bs_x);
    ga.extend(&g.bs_y);
    ga.extend(&g.ue_x);
    ga.extend(&g.ue_y);
    let x0 = pack_angles(&cur);
    let mut angle_accepted = false;
    if let Some((x, fa)) = backtrack(&x0, &ga, f, ls.angle_step, ls, |_, v| wrap_unit(v), |x| {
        objective_frame(pb, cal, y, &unpack_angles(&cur, x)).0
    }) {
        cur = unpack_angles(&cur, &x);
        cur.gains = FrameKernel::new(pb, cal, &cur).solve_gains(y);
        f = fa;
        angle_accepted = true;
    }

    let tmax = pb.link.max_delay();
    let gd = path_gradient(pb, cal, y, &cur).delay;
    let mut delay_accepted = false;
    if let Some((x, fd)) = backtrack(&cur.delays, &gd, f, ls.delay_step_fraction * tmax, ls, |_, v| v.clamp(0.0, tmax), |x| {
        let mut c = cur.clone();
        c.delays = x.to_vec();
        objective_frame(pb, cal, y, &c).0
    }) {
        cur.delays = x;
        f = fd;
        delay_accepted = true;
    }
    let (fg, alpha) = objective_frame(pb, cal, y, &cur);
    if fg <= f {
        cur.gains = alpha;
        f = fg;
    }
    Refined { paths: cur, objective: f, angle_accepted, delay_accepted }
}

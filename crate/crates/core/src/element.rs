//! Per-element gain/phase and spacing-error estimation.

use crate::array::{ArrayErrors, SpacingErrors};
use crate::channel::PathSet;
use crate::coupling::Side;
use crate::linalg::{solve_hermitian, CMat, CVec, C64};
use crate::model::{global_objective, Calibration, FrameKernel, Problem};
use crate::offgrid::{backprojected_residual, backtrack, LineSearchConfig};
use rayon::prelude::*;

/// Closed-form least-squares gain/phase update for one side.
///
/// For the UE side the unknown is `conj(γ_t)`, since gains enter through
/// `Γ_t^H`; the returned vector is `γ_t` itself.
pub fn solve_gains(pb: &Problem, cal: &Calibration, frames: &[PathSet], side: Side) -> (CVec, bool) {
    let n = match side {
        Side::Bs => pb.link.bs.n_elements(),
        Side::Ue => pb.link.ue.n_elements(),
    };
    let parts: Vec<(CMat, CVec)> = frames
        .par_iter()
        .enumerate()
        .map(|(m, f)| {
            let kernel = FrameKernel::new(pb, cal, f);
            let y = &pb.meas.frames[m];
            let np = kernel.n_pilots();
            let mut gram = CMat::zeros(n, n);
            let mut rhs = CVec::zeros(n);
            for (q, s) in kernel.slots.iter().enumerate() {
                let z = kernel.slot_gains(q, &f.gains);
                for p in 0..np {
                    let wp = &pb.meas.beams.combiners[p];
                    let o = (q * np + p) * kernel.rf;
                    let mq = match side {
                        Side::Bs => {
                            let w = z.component_mul(&s.tx_proj.column(p));
                            let x = &s.steer_bs * w;
                            let mut m = wp * &cal.bs.coupling;
                            crate::linalg::scale_columns(&mut m, x.as_slice());
                            m
                        }
                        Side::Ue => {
                            let mut r = s.rx_proj[p].clone();
                            crate::linalg::scale_columns(&mut r, z.as_slice());
                            let mut r = r * s.steer_ue.adjoint();
                            let st = cal.ue.coupling.adjoint() * &pb.meas.beams.transmit[p];
                            crate::linalg::scale_columns(&mut r, st.as_slice());
                            r
                        }
                    };
                    gram += mq.adjoint() * &mq;
                    rhs += mq.adjoint() * y.rows(o, kernel.rf);
                }
            }
            (gram, rhs)
        })
        .collect();
    let mut gram = CMat::zeros(n, n);
    let mut rhs = CVec::zeros(n);
    for (g, r) in parts {
        gram += g;
        rhs += r;
    }
    let s = solve_hermitian(&gram, &rhs);
    let g = match side {
        Side::Bs => s.x,
        Side::Ue => s.x.map(|c| c.conj()),
    };
    (g, s.floored)
}

/// Gradient of the global objective with respect to one side's spacing
/// errors, as `(x-axis, y-axis)`. Element 0 of each axis gets zero.
pub fn spacing_gradient(pb: &Problem, cal: &Calibration, frames: &[PathSet], side: Side) -> (Vec<f64>, Vec<f64>) {
    let geom = match side {
        Side::Bs => pb.link.bs,
        Side::Ue => pb.link.ue,
    };
    let (nx, ny) = (geom.n_x, geom.n_y);
    let parts: Vec<(Vec<C64>, Vec<C64>)> = frames
        .par_iter()
        .enumerate()
        .map(|(m, f)| {
            let kernel = FrameKernel::new(pb, cal, f);
            let h = backprojected_residual(&kernel, pb, &pb.meas.frames[m], &f.gains);
            let mut ax = vec![C64::new(0.0, 0.0); nx];
            let mut ay = vec![C64::new(0.0, 0.0); ny];
            let np = kernel.n_pilots();
            let dist_bs_h = cal.bs.distortion().adjoint();
            let dist_ue_h = cal.ue.distortion().adjoint();
            for (q, s) in kernel.slots.iter().enumerate() {
                let z = kernel.slot_gains(q, &f.gains);
                let jk = C64::new(0.0, s.wavenumber);
                for p in 0..np {
                    match side {
                        Side::Bs => {
                            let ht = &dist_bs_h * &h[q][p];
                            for l in 0..f.len() {
                                let w = z[l] * s.tx_proj[(l, p)];
                                for j in 0..ny {
                                    for i in 0..nx {
                                        let e = j * nx + i;
                                        let t = w * jk * ht[e].conj() * s.steer_bs[(e, l)];
                                        ax[i] += t * (i as f64) * f.bs[l].x;
                                        ay[j] += t * (j as f64) * f.bs[l].y;
                                    }
                                }
                            }
                        }
                        Side::Ue => {
                            let st = &dist_ue_h * &pb.meas.beams.transmit[p];
                            let hp = &h[q][p];
                            for l in 0..f.len() {
                                let hb: C64 = hp.iter().zip(s.resp_bs.column(l).iter()).map(|(a, b)| a.conj() * b).sum();
                                let c = z[l] * hb;
                                for j in 0..ny {
                                    for i in 0..nx {
                                        let e = j * nx + i;
                                        let t = c * (jk * s.steer_ue[(e, l)]).conj() * st[e];
                                        ax[i] += t * (i as f64) * f.ue[l].x;
                                        ay[j] += t * (j as f64) * f.ue[l].y;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            (ax, ay)
        })
        .collect();
    let mut gx = vec![0.0; nx];
    let mut gy = vec![0.0; ny];
    for (ax, ay) in parts {
        for (g, a) in gx.iter_mut().zip(&ax) {
            *g -= 2.0 * a.re;
        }
        for (g, a) in gy.iter_mut().zip(&ay) {
            *g -= 2.0 * a.re;
        }
    }
    (gx, gy)
}

fn side_errors(cal: &mut Calibration, side: Side) -> &mut ArrayErrors {
    match side {
        Side::Bs => &mut cal.bs,
        Side::Ue => &mut cal.ue,
    }
}

/// One backtracking step on the spacing errors of one side. Returns the
/// accepted objective, or `None` if no step decreased it.
pub fn update_spacing(
    pb: &Problem,
    cal: &mut Calibration,
    frames: &[PathSet],
    side: Side,
    f0: f64,
    ls: &LineSearchConfig,
) -> Option<f64> {
    let geom = match side {
        Side::Bs => pb.link.bs,
        Side::Ue => pb.link.ue,
    };
    let (gx, gy) = spacing_gradient(pb, cal, frames, side);
    let grad: Vec<f64> = gx.into_iter().chain(gy).collect();
    let x0 = side_errors(cal, side).spacing.to_flat();
    let bound_x = 0.25 * geom.spacing_x * (1.0 - 1e-9);
    let bound_y = 0.25 * geom.spacing_y * (1.0 - 1e-9);
    let step = ls.spacing_step_wavelengths * pb.link.freq.wavelength();
    let mut trial = cal.clone();
    let res = backtrack(
        &x0,
        &grad,
        f0,
        step,
        ls,
        |i, v| if i < geom.n_x { v.clamp(-bound_x, bound_x) } else { v.clamp(-bound_y, bound_y) },
        |x| {
            side_errors(&mut trial, side).spacing = SpacingErrors::from_flat(x, &geom);
            global_objective(pb, &trial, frames)
        },
    );
    res.map(|(x, f)| {
        side_errors(cal, side).spacing = SpacingErrors::from_flat(&x, &geom);
        f
    })
}

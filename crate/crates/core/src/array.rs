//! Array response under beam squint with coupling, gain/phase and
//! element-spacing impairments.
//!
//! Elements of a planar array are indexed `i + n_x * j` (x fastest), so the
//! steering vector is `a_y ⊗ a_x`. A linear array is the `n_y = 1` case.

use crate::error::{Error, Result};
use crate::linalg::{cis, CMat, CVec, C64};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Speed of light in m/s.
pub const LIGHT_SPEED: f64 = 299_792_458.0;

/// OFDM subcarrier layout around a carrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub n_subcarriers: usize,
}

impl FrequencyGrid {
    pub fn new(carrier_hz: f64, bandwidth_hz: f64, n_subcarriers: usize) -> Result<Self> {
        if !(carrier_hz > 0.0) || !(bandwidth_hz > 0.0) || n_subcarriers == 0 {
            return Err(Error::Config("frequency grid needs positive f_c, B and K".into()));
        }
        Ok(Self { carrier_hz, bandwidth_hz, n_subcarriers })
    }

    /// Offset of subcarrier `k` (0-based) from the carrier: `-B/2 + k B / K`.
    pub fn offset(&self, k: usize) -> f64 {
        -self.bandwidth_hz / 2.0 + k as f64 * self.bandwidth_hz / self.n_subcarriers as f64
    }

    pub fn offsets(&self) -> Vec<f64> {
        (0..self.n_subcarriers).map(|k| self.offset(k)).collect()
    }

    pub fn wavelength(&self) -> f64 {
        LIGHT_SPEED / self.carrier_hz
    }

    /// Spatial wavenumber at subcarrier `k`, `2π/λ_c · (1 + Δf_k / f_c)`.
    pub fn wavenumber(&self, k: usize) -> f64 {
        2.0 * PI / self.wavelength() * (1.0 + self.offset(k) / self.carrier_hz)
    }

    /// Largest resolvable delay for a cyclic prefix of `n_cp` samples.
    pub fn max_delay(&self, n_cp: usize) -> f64 {
        (n_cp.max(1) - 1) as f64 / self.bandwidth_hz
    }

    /// Per-subcarrier delay phasor `exp(-j 2π Δf_k τ)`.
    pub fn delay_phasor(&self, k: usize, tau: f64) -> C64 {
        cis(-2.0 * PI * self.offset(k) * tau)
    }
}

/// Uniform planar array with nominal spacings in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub n_x: usize,
    pub n_y: usize,
    pub spacing_x: f64,
    pub spacing_y: f64,
}

impl ArrayGeometry {
    /// Half-wavelength array at the given carrier.
    pub fn half_wavelength(n_x: usize, n_y: usize, freq: &FrequencyGrid) -> Self {
        let d = freq.wavelength() / 2.0;
        Self { n_x, n_y, spacing_x: d, spacing_y: d }
    }

    pub fn n_elements(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn is_linear(&self) -> bool {
        self.n_y == 1
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n_x + i
    }
}

/// Spatial frequencies of a path at one end of the link, each in `[-1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Direction {
    pub x: f64,
    pub y: f64,
}

impl Direction {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(-1.0..1.0).contains(&x) || !(-1.0..1.0).contains(&y) {
            return Err(Error::Config(format!("spatial frequency ({x}, {y}) outside [-1, 1)")));
        }
        Ok(Self { x, y })
    }

    /// Spatial frequencies from azimuth and zenith angles in radians.
    pub fn from_angles(azimuth: f64, zenith: f64) -> Self {
        Self {
            x: wrap_unit(azimuth.sin() * zenith.cos()),
            y: wrap_unit(azimuth.sin() * zenith.sin()),
        }
    }

    pub fn wrapped(self) -> Self {
        Self { x: wrap_unit(self.x), y: wrap_unit(self.y) }
    }
}

/// Wraps a spatial frequency into `[-1, 1)`.
pub fn wrap_unit(v: f64) -> f64 {
    let w = (v + 1.0).rem_euclid(2.0) - 1.0;
    if w >= 1.0 {
        -1.0
    } else {
        w
    }
}

/// Per-element spacing errors along each axis, in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacingErrors {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl SpacingErrors {
    pub fn zeros(geom: &ArrayGeometry) -> Self {
        Self { x: vec![0.0; geom.n_x], y: vec![0.0; geom.n_y] }
    }

    /// Flattened `[x..., y...]` view used by the spacing optimizer.
    pub fn to_flat(&self) -> Vec<f64> {
        self.x.iter().chain(&self.y).copied().collect()
    }

    pub fn from_flat(flat: &[f64], geom: &ArrayGeometry) -> Self {
        Self { x: flat[..geom.n_x].to_vec(), y: flat[geom.n_x..geom.n_x + geom.n_y].to_vec() }
    }
}

/// Impairments of one array: mutual coupling, complex gains and spacing errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayErrors {
    pub coupling: CMat,
    pub gains: CVec,
    pub spacing: SpacingErrors,
}

impl ArrayErrors {
    /// Ideal array: identity coupling, unit gains, exact spacing.
    pub fn ideal(geom: &ArrayGeometry) -> Self {
        let n = geom.n_elements();
        Self {
            coupling: CMat::identity(n, n),
            gains: CVec::from_element(n, C64::new(1.0, 0.0)),
            spacing: SpacingErrors::zeros(geom),
        }
    }

    /// `C · diag(γ)`.
    pub fn distortion(&self) -> CMat {
        let mut m = self.coupling.clone();
        crate::linalg::scale_columns(&mut m, self.gains.as_slice());
        m
    }
}

/// Element positions along one axis under the steering model, `i (d + ε_i)`.
pub fn axis_positions(spacing: f64, errors: &[f64]) -> Vec<f64> {
    errors.iter().enumerate().map(|(i, e)| i as f64 * (spacing + e)).collect()
}

/// One-axis steering vector.
pub fn axis_steering(spacing: f64, errors: &[f64], v: f64, wavenumber: f64) -> CVec {
    CVec::from_iterator(
        errors.len(),
        axis_positions(spacing, errors).into_iter().map(|p| cis(wavenumber * p * v)),
    )
}

/// Squinted steering vector `a_y ⊗ a_x` at wavenumber `κ_k`, without impairments
/// other than spacing errors.
pub fn steering(geom: &ArrayGeometry, spacing: &SpacingErrors, dir: Direction, wavenumber: f64) -> CVec {
    let ax = axis_steering(geom.spacing_x, &spacing.x, dir.x, wavenumber);
    let ay = axis_steering(geom.spacing_y, &spacing.y, dir.y, wavenumber);
    crate::linalg::kron_vec(&ay, &ax)
}

/// Steering matrix with one column per direction.
pub fn steering_matrix(
    geom: &ArrayGeometry,
    spacing: &SpacingErrors,
    dirs: &[Direction],
    wavenumber: f64,
) -> CMat {
    let mut m = CMat::zeros(geom.n_elements(), dirs.len());
    for (l, d) in dirs.iter().enumerate() {
        m.set_column(l, &steering(geom, spacing, *d, wavenumber));
    }
    m
}

/// Impaired response `C diag(γ) A(v, ε)` for a set of directions.
pub fn response_matrix(
    geom: &ArrayGeometry,
    errors: &ArrayErrors,
    dirs: &[Direction],
    wavenumber: f64,
) -> CMat {
    errors.distortion() * steering_matrix(geom, &errors.spacing, dirs, wavenumber)
}

/// Axis selector for derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Derivative of the steering vector with respect to one spatial frequency.
pub fn steering_d_direction(
    geom: &ArrayGeometry,
    spacing: &SpacingErrors,
    dir: Direction,
    wavenumber: f64,
    axis: Axis,
) -> CVec {
    let ax = axis_steering(geom.spacing_x, &spacing.x, dir.x, wavenumber);
    let ay = axis_steering(geom.spacing_y, &spacing.y, dir.y, wavenumber);
    let j = C64::new(0.0, wavenumber);
    match axis {
        Axis::X => {
            let px = axis_positions(geom.spacing_x, &spacing.x);
            let dx = CVec::from_iterator(ax.len(), ax.iter().zip(&px).map(|(a, p)| j * *p * a));
            crate::linalg::kron_vec(&ay, &dx)
        }
        Axis::Y => {
            let py = axis_positions(geom.spacing_y, &spacing.y);
            let dy = CVec::from_iterator(ay.len(), ay.iter().zip(&py).map(|(a, p)| j * *p * a));
            crate::linalg::kron_vec(&dy, &ax)
        }
    }
}

/// Derivative of the steering vector with respect to the spacing error of
/// element `n` along `axis`. Element 0 sits at the origin, so its derivative
/// is identically zero.
pub fn steering_d_spacing(
    geom: &ArrayGeometry,
    spacing: &SpacingErrors,
    dir: Direction,
    wavenumber: f64,
    axis: Axis,
    n: usize,
) -> CVec {
    let mut ax = axis_steering(geom.spacing_x, &spacing.x, dir.x, wavenumber);
    let mut ay = axis_steering(geom.spacing_y, &spacing.y, dir.y, wavenumber);
    let j = C64::new(0.0, wavenumber);
    let (target, v) = match axis {
        Axis::X => (&mut ax, dir.x),
        Axis::Y => (&mut ay, dir.y),
    };
    for (i, z) in target.iter_mut().enumerate() {
        *z = if i == n { j * (i as f64) * v * *z } else { C64::new(0.0, 0.0) };
    }
    crate::linalg::kron_vec(&ay, &ax)
}

/// Distribution parameters for random array impairments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpairmentConfig {
    /// Standard deviation of the amplitude around 1.
    pub gain_std: f64,
    /// Standard deviation of the phase in radians.
    pub phase_std: f64,
    /// Spacing errors are uniform in `(-max, max)`, in wavelengths.
    pub spacing_max_wavelengths: f64,
    /// Coupling magnitude at unit normalized distance.
    pub coupling_magnitude: f64,
    /// Coupling phase at unit normalized distance, radians.
    pub coupling_phase: f64,
    /// Use perturbed element positions for coupling distances.
    pub coupling_uses_perturbed_positions: bool,
    pub enable_coupling: bool,
    pub enable_gains: bool,
    pub enable_spacing: bool,
}

impl Default for ImpairmentConfig {
    fn default() -> Self {
        Self {
            gain_std: 0.05,
            phase_std: 20.0_f64.to_radians(),
            spacing_max_wavelengths: 0.1,
            coupling_magnitude: 0.2,
            coupling_phase: PI / 3.0,
            coupling_uses_perturbed_positions: true,
            enable_coupling: true,
            enable_gains: true,
            enable_spacing: true,
        }
    }
}

/// Coupling coefficient between two elements whose distance, normalized by
/// half a wavelength, is `r`.
pub fn coupling_coefficient(cfg: &ImpairmentConfig, r: f64) -> C64 {
    C64::from_polar(cfg.coupling_magnitude, cfg.coupling_phase) / r * cis(-(r - 1.0) * PI / 8.0)
}

/// Symmetric unit-diagonal coupling matrix from element distances.
///
/// Physical positions are `i d + ε_i` per axis.
pub fn coupling_from_geometry(
    geom: &ArrayGeometry,
    spacing: &SpacingErrors,
    cfg: &ImpairmentConfig,
    wavelength: f64,
) -> CMat {
    let n = geom.n_elements();
    let half = wavelength / 2.0;
    let pos = |i: usize, j: usize| -> (f64, f64) {
        let (ex, ey) = if cfg.coupling_uses_perturbed_positions {
            (spacing.x[i], spacing.y[j])
        } else {
            (0.0, 0.0)
        };
        (i as f64 * geom.spacing_x + ex, j as f64 * geom.spacing_y + ey)
    };
    let mut c = CMat::identity(n, n);
    for j in 0..geom.n_y {
        for i in 0..geom.n_x {
            let a = geom.index(i, j);
            let (xa, ya) = pos(i, j);
            for jj in 0..geom.n_y {
                for ii in 0..geom.n_x {
                    let b = geom.index(ii, jj);
                    if b <= a {
                        continue;
                    }
                    let (xb, yb) = pos(ii, jj);
                    let r = ((xa - xb).powi(2) + (ya - yb).powi(2)).sqrt() / half;
                    let v = coupling_coefficient(cfg, r);
                    c[(a, b)] = v;
                    c[(b, a)] = v;
                }
            }
        }
    }
    c
}

impl ArrayErrors {
    /// Draws random impairments for one array.
    pub fn sample<R: Rng + ?Sized>(
        geom: &ArrayGeometry,
        cfg: &ImpairmentConfig,
        wavelength: f64,
        rng: &mut R,
    ) -> Self {
        let mut out = Self::ideal(geom);
        if cfg.enable_gains {
            let amp = Normal::new(1.0, cfg.gain_std).expect("finite gain std");
            let ph = Normal::new(0.0, cfg.phase_std).expect("finite phase std");
            for g in out.gains.iter_mut() {
                *g = C64::from_polar(amp.sample(rng), ph.sample(rng));
            }
        }
        if cfg.enable_spacing && cfg.spacing_max_wavelengths > 0.0 {
            let m = cfg.spacing_max_wavelengths * wavelength;
            let u = Uniform::new(-m, m);
            let mut draw = |d: f64| loop {
                let e = u.sample(rng);
                if e.abs() < 0.25 * d {
                    break e;
                }
            };
            out.spacing.x = (0..geom.n_x).map(|_| draw(geom.spacing_x)).collect();
            out.spacing.y = (0..geom.n_y).map(|_| draw(geom.spacing_y)).collect();
        }
        if cfg.enable_coupling {
            out.coupling = coupling_from_geometry(geom, &out.spacing, cfg, wavelength);
        }
        out
    }
}

//! Geometric multipath channel with frequency-dependent array responses.

use crate::array::{response_matrix, ArrayErrors, ArrayGeometry, Direction, FrequencyGrid};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Both ends of a link plus the OFDM numerology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub freq: FrequencyGrid,
    /// Receiving array (base station).
    pub bs: ArrayGeometry,
    /// Transmitting array (user equipment).
    pub ue: ArrayGeometry,
    /// Cyclic prefix length in samples; bounds the delay spread.
    pub n_cp: usize,
}

impl Link {
    pub fn max_delay(&self) -> f64 {
        self.freq.max_delay(self.n_cp)
    }
}

/// Parameters of `L` propagation paths.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PathSet {
    /// Arrival directions at the base station.
    pub bs: Vec<Direction>,
    /// Departure directions at the user equipment.
    pub ue: Vec<Direction>,
    pub delays: Vec<f64>,
    pub gains: Vec<C64>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn check(&self) -> Result<()> {
        let l = self.gains.len();
        if self.bs.len() != l || self.ue.len() != l || self.delays.len() != l {
            return Err(Error::Dimension("path parameter lengths differ".into()));
        }
        Ok(())
    }

    /// Per-path frequency-domain gains `α_l exp(-j2πΔf_k τ_l)` at subcarrier `k`.
    pub fn subcarrier_gains(&self, freq: &FrequencyGrid, k: usize) -> CVec {
        CVec::from_iterator(
            self.len(),
            self.gains.iter().zip(&self.delays).map(|(a, t)| a * freq.delay_phasor(k, *t)),
        )
    }

    /// Draws `l` paths: CN(0, 1/l) gains, uniform angles and delays.
    pub fn sample<R: Rng + ?Sized>(l: usize, max_delay: f64, rng: &mut R) -> Self {
        let ang = Uniform::new(-PI, PI);
        let draw_dir = |rng: &mut R| Direction::from_angles(ang.sample(rng), ang.sample(rng));
        let mut out = PathSet::default();
        let s = (0.5 / l.max(1) as f64).sqrt();
        for _ in 0..l {
            out.bs.push(draw_dir(rng));
            out.ue.push(draw_dir(rng));
            out.delays.push(rng.gen::<f64>() * max_delay);
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            out.gains.push(C64::new(re * s, im * s));
        }
        out
    }
}

/// Channel matrix at subcarrier `k`, `R_k diag(z_k) T_k^H` with impaired
/// responses `R_k` (BS) and `T_k` (UE).
pub fn channel_at(
    link: &Link,
    bs_errors: &ArrayErrors,
    ue_errors: &ArrayErrors,
    paths: &PathSet,
    k: usize,
) -> CMat {
    let kappa = link.freq.wavenumber(k);
    let mut r = response_matrix(&link.bs, bs_errors, &paths.bs, kappa);
    let t = response_matrix(&link.ue, ue_errors, &paths.ue, kappa);
    let z = paths.subcarrier_gains(&link.freq, k);
    crate::linalg::scale_columns(&mut r, z.as_slice());
    r * t.adjoint()
}

/// Channel matrices for every subcarrier.
pub fn channel_all(
    link: &Link,
    bs_errors: &ArrayErrors,
    ue_errors: &ArrayErrors,
    paths: &PathSet,
) -> Vec<CMat> {
    (0..link.freq.n_subcarriers)
        .map(|k| channel_at(link, bs_errors, ue_errors, paths, k))
        .collect()
}

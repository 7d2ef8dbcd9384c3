use crate::linalg::{fro2, CMat};

/// `Σ_k ‖H_k − Ĥ_k‖² / Σ_k ‖H_k‖²` (linear).
pub fn nmse_channel(truth: &[CMat], estimate: &[CMat]) -> f64 {
    let num: f64 = truth.iter().zip(estimate).map(|(h, e)| fro2(&(h - e))).sum();
    let den: f64 = truth.iter().map(fro2).sum();
    num / den
}

/// `‖C − Ĉ‖² / ‖C‖²` (linear).
pub fn nmse_coupling(truth: &CMat, estimate: &CMat) -> f64 {
    fro2(&(truth - estimate)) / fro2(truth)
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Observations per unknown channel coefficient, `N_rRF N_p / (N_r N_t)`.
pub fn compression_ratio(sys: &super::SystemConfig) -> f64 {
    (sys.n_rf_bs * sys.n_pilots) as f64 / ((sys.bs_x * sys.bs_y) * (sys.ue_x * sys.ue_y)) as f64
}

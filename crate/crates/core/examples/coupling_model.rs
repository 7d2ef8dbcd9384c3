//! The banded-plus-Toeplitz coupling model: parameter counts, and the
//! linear rewrite `C b = Q(b) u + b` that turns the coupling update into a
//! least-squares problem.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use squintcal::array::{coupling_from_geometry, ArrayGeometry, FrequencyGrid, ImpairmentConfig, SpacingErrors};
use squintcal::coupling::{CouplingModel, CouplingRadii};
use squintcal::linalg::fro2;
use squintcal::measurement::complex_gaussian;

fn main() -> squintcal::Result<()> {
    let freq = FrequencyGrid::new(50e9, 2.5e9, 8)?;
    let geom = ArrayGeometry::half_wavelength(4, 3, &freq);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // Perturbed element positions break the Toeplitz structure.
    let mut eps = SpacingErrors::zeros(&geom);
    for e in eps.x.iter_mut().skip(1).chain(eps.y.iter_mut().skip(1)) {
        *e = rng.gen_range(-0.05..0.05) * freq.wavelength();
    }
    let truth = coupling_from_geometry(&geom, &eps, &ImpairmentConfig::default(), freq.wavelength());

    println!("radii   toeplitz  banded  fit_error_dB");
    for (qx, qy) in [(0, 0), (1, 0), (1, 1), (2, 1), (3, 2)] {
        let model = CouplingModel::new(&geom, CouplingRadii::new(qx, qy))?;
        let fit = model.reconstruct(&model.params_from_matrix(&truth));
        let off = fro2(&(&truth - squintcal::CMat::identity(12, 12)));
        println!(
            "({qx},{qy})   {:>8}  {:>6}  {:>12.1}",
            model.n_toeplitz(),
            model.n_non_toeplitz(),
            10.0 * (fro2(&(&truth - fit)) / off).log10()
        );
    }

    let model = CouplingModel::new(&geom, CouplingRadii::new(1, 1))?;
    let u = complex_gaussian(model.n_params(), 1.0, &mut rng);
    let b = complex_gaussian(12, 1.0, &mut rng);
    let lhs = model.reconstruct(&u) * &b;
    let rhs = model.q_full(&b) * &u + &b;
    println!("|C b - (Q(b) u + b)| = {:.2e}", (lhs - rhs).norm());
    Ok(())
}

//! Training observations with hybrid beams, and a check that the whitened
//! noise is white.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use squintcal::io::{write_json, MeasurementDump};
use squintcal::linalg::{CMat, C64};
use squintcal::measurement::complex_gaussian;
use squintcal::sim::{generate_trial, ScenarioConfig};

fn main() -> squintcal::Result<()> {
    let cfg = ScenarioConfig::desk();
    let trial = generate_trial(&cfg, 0, 20.0, 24, 0)?;
    let ms = &trial.measurements;
    println!(
        "frames {}, pilot subcarriers {:?}, pilots {}, rows per frame {}",
        ms.frames.len(),
        ms.schedule.subcarriers,
        ms.schedule.n_pilots,
        ms.frames[0].len()
    );

    // Antenna noise reaches the whitened output through D W̄ = W.
    let op = &ms.beams.combiners[0];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 5000;
    let mut cov = CMat::zeros(op.nrows(), op.nrows());
    for _ in 0..n {
        let v = op * complex_gaussian(op.ncols(), ms.sigma2, &mut rng);
        cov += &v * v.adjoint();
    }
    cov /= C64::new(n as f64 * ms.sigma2, 0.0);
    println!("normalized noise covariance after whitening (should be ~I):\n{cov:.3}");

    let path = std::env::temp_dir().join("squintcal_measurements.json");
    write_json(&path, &MeasurementDump::from_set(ms))?;
    println!("wrote {}", path.display());
    Ok(())
}

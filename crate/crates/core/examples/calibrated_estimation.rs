//! Full estimator on one desk trial, compared with the uncalibrated OMP
//! estimate. The final state is written as a JSON checkpoint.

use squintcal::estimator::Estimator;
use squintcal::io::{write_json, StateDump};
use squintcal::model::{reconstruct_channel, Calibration};
use squintcal::sim::{generate_trial, nmse_channel, nmse_coupling, to_db, Method, ScenarioConfig};

fn main() -> squintcal::Result<()> {
    let cfg = ScenarioConfig::desk();
    let snr = 20.0;
    let trial = generate_trial(&cfg, 0, snr, 24, 0)?;
    let link = &trial.link;

    let uncal = Estimator::new(link, &trial.measurements, cfg.algo_for(Method::OmpUncalibrated, snr), Calibration::ideal(link))?.run()?;
    println!("uncalibrated OMP: NMSE {:.2} dB", to_db(nmse_channel(&trial.channel, &uncal.channel)));

    let mut est = Estimator::new(link, &trial.measurements, cfg.algo_for(Method::ProposedApprox, snr), Calibration::ideal(link))?;
    println!("iter  phase     coupling      objective  NMSE_dB");
    for it in 0..cfg.algorithm.max_iters {
        let stop = est.iterate()?;
        if it % 10 == 9 || stop {
            let s = &est.state;
            let h = reconstruct_channel(link, &s.calibration, s.frames.last().expect("frames"));
            println!(
                "{:>4}  {:<8}  {:<12}  {:>9.3e}  {:>7.2}",
                it + 1,
                format!("{:?}", s.phase),
                format!("{:?}", s.coupling_mode),
                s.objective_history.last().copied().unwrap_or(f64::NAN),
                to_db(nmse_channel(&trial.channel, &h))
            );
        }
        if stop {
            break;
        }
    }
    let s = &est.state;
    println!("BS coupling NMSE: {:.2} dB", to_db(nmse_coupling(&trial.truth.bs.coupling, &s.calibration.bs.coupling)));

    let path = std::env::temp_dir().join("squintcal_state.json");
    write_json(&path, &StateDump::from_state(s))?;
    println!("checkpoint: {}", path.display());
    Ok(())
}

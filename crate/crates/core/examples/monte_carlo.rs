//! A small sweep over SNR, printed as mean NMSE per method. Use
//! `--release`; pass a trial count as the first argument (default 4).

use squintcal::sim::{aggregate, run_experiment, ScenarioConfig};

fn main() -> squintcal::Result<()> {
    let trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let mut cfg = ScenarioConfig::desk();
    cfg.trials = trials;
    cfg.snr_db = vec![0.0, 10.0, 20.0];
    let rows = run_experiment(&cfg, 0)?;
    println!("{:<22} {:>6} {:>10} {:>10}", "method", "snr_db", "nmse_h_db", "nmse_cr_db");
    for p in aggregate(&rows) {
        println!("{:<22} {:>6.1} {:>10.2} {:>10.2}", p.method.as_str(), p.snr_db, p.nmse_h_db, p.nmse_cr_db);
    }
    Ok(())
}

//! Gradient refinement of off-grid paths starting from the on-grid estimate,
//! with array errors known. Each sweep is a backtracking step on angles and
//! delays followed by a least-squares gain update.

use squintcal::model::{reconstruct_channel, Problem};
use squintcal::offgrid::{objective_frame, refine_frame, LineSearchConfig};
use squintcal::ongrid::{build_grids, ongrid_frame, Dictionary, GridSpec};
use squintcal::sim::{generate_trial, nmse_channel, to_db, ScenarioConfig};

fn main() -> squintcal::Result<()> {
    let cfg = ScenarioConfig::desk();
    let trial = generate_trial(&cfg, 2, 30.0, 24, 0)?;
    let link = &trial.link;
    let pb = Problem::new(link, &trial.measurements);
    let cal = &trial.truth;
    let y = trial.measurements.frames.last().expect("frames");

    let grids = build_grids(&GridSpec::oversampled(link), link.max_delay());
    let dict = Dictionary::build(&pb, cal, grids);
    let mut paths = ongrid_frame(&dict, y, 8)?;
    let ls = LineSearchConfig::default();

    println!("sweep  objective     NMSE_dB");
    for sweep in 0..=120 {
        if sweep % 20 == 0 {
            let (f, _) = objective_frame(&pb, cal, y, &paths);
            let h = reconstruct_channel(link, cal, &paths);
            println!("{sweep:>5}  {f:>10.4e}  {:>8.2}", to_db(nmse_channel(&trial.channel, &h)));
        }
        paths = refine_frame(&pb, cal, y, &paths, &ls).paths;
    }
    Ok(())
}

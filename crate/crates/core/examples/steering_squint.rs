//! Beam squint: a fixed spatial frequency points the array response in
//! slightly different directions at the band edges.

use squintcal::array::{steering, ArrayGeometry, Direction, FrequencyGrid, SpacingErrors};

fn main() -> squintcal::Result<()> {
    let freq = FrequencyGrid::new(50e9, 2.5e9, 32)?;
    let geom = ArrayGeometry::half_wavelength(32, 1, &freq);
    let none = SpacingErrors::zeros(&geom);
    let target = Direction::new(0.5, 0.0)?;

    // Beamformer matched at the carrier.
    let carrier = 2.0 * std::f64::consts::PI / freq.wavelength();
    let w = steering(&geom, &none, target, carrier);
    let n = geom.n_elements() as f64;

    println!("subcarrier  offset_MHz  gain_dB");
    for k in [0, 8, 16, 24, 31] {
        let a = steering(&geom, &none, target, freq.wavenumber(k));
        let g = (w.dotc(&a).norm() / n).powi(2);
        println!("{k:>10}  {:>10.1}  {:>7.2}", freq.offset(k) / 1e6, 10.0 * g.log10());
    }
    Ok(())
}

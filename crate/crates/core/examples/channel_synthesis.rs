use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use squintcal::array::{ArrayErrors, ArrayGeometry, FrequencyGrid, ImpairmentConfig};
use squintcal::channel::{channel_all, Link, PathSet};
use squintcal::linalg::fro2;

/// Draws impaired arrays and a four-path channel, then compares it with the
/// channel seen through ideal arrays.
fn main() -> squintcal::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let freq = FrequencyGrid::new(50e9, 2.5e9, 32)?;
    let link = Link {
        freq,
        bs: ArrayGeometry::half_wavelength(16, 1, &freq),
        ue: ArrayGeometry::half_wavelength(4, 1, &freq),
        n_cp: 8,
    };
    let imp = ImpairmentConfig::default();
    let lambda = freq.wavelength();
    let bs = ArrayErrors::sample(&link.bs, &imp, lambda, &mut rng);
    let ue = ArrayErrors::sample(&link.ue, &imp, lambda, &mut rng);
    let paths = PathSet::sample(4, link.max_delay(), &mut rng);

    let impaired = channel_all(&link, &bs, &ue, &paths);
    let ideal = channel_all(&link, &ArrayErrors::ideal(&link.bs), &ArrayErrors::ideal(&link.ue), &paths);

    let (num, den) = impaired
        .iter()
        .zip(&ideal)
        .fold((0.0, 0.0), |(n, d), (a, b)| (n + fro2(&(a - b)), d + fro2(a)));
    println!("paths: {}", paths.len());
    for (l, (b, t)) in paths.bs.iter().zip(&paths.delays).enumerate() {
        println!("  path {l}: bs v_x {:+.3}, delay {:.2} ns, |gain| {:.3}", b.x, t * 1e9, paths.gains[l].norm());
    }
    println!("average channel power per subcarrier: {:.2}", den / impaired.len() as f64);
    println!("mismatch of ideal-array model: {:.1} dB", 10.0 * (num / den).log10());
    Ok(())
}

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use squintcal::array::SpacingErrors;
use squintcal::coupling::Side;
use squintcal::element::{solve_gains, spacing_gradient, update_spacing};
use squintcal::estimator::{delta_f, genie_ls_baseline, AlgoConfig, CalibrationMask, Estimator, Phase};
use squintcal::measurement::complex_gaussian;
use squintcal::model::{global_objective, reconstruct_channel, Calibration, FrameKernel, Problem};
use squintcal::offgrid::{objective_frame, path_gradient, refine_frame, LineSearchConfig};
use squintcal::ongrid::{build_grids, omp, ongrid_frame, AtomSet, Dictionary, GridSpec};
use squintcal::sim::nmse_channel;
use squintcal::{CMat, CVec, C64};

#[test]
fn omp_recovers_single_scaled_atom() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = CMat::from_column_slice(20, 30, complex_gaussian(600, 1.0, &mut rng).as_slice());
    let y = a.column(17) * C64::new(3.0, 0.0);
    let r = omp(&a, &y, 1).unwrap();
    assert_eq!(r.support, vec![17]);
    assert!((r.gains[0] - C64::new(3.0, 0.0)).norm() < 1e-8);
}

#[test]
fn omp_on_zero_observation_returns_zero_gains() {
    let a = CMat::identity(4, 4);
    let r = omp(&a, &CVec::zeros(4), 2).unwrap();
    assert!(r.gains.iter().all(|g| g.norm() == 0.0));
}

#[test]
fn omp_orders_orthogonal_atoms_by_magnitude() {
    let a = CMat::identity(5, 5);
    let mut y = CVec::zeros(5);
    y[3] = C64::new(1.0, 0.0);
    y[1] = C64::new(0.0, 2.0);
    let r = omp(&a, &y, 2).unwrap();
    assert_eq!(r.support, vec![1, 3]);
    assert!(r.residual_norms.last().unwrap() < &1e-12);
}

#[test]
fn omp_drops_duplicate_atoms() {
    let mut a = CMat::identity(4, 3);
    a.set_column(2, &a.column(0).into_owned());
    let y = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.5, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
    let r = omp(&a, &y, 3).unwrap();
    assert_eq!(r.support.len(), 2);
    assert_eq!(r.dropped, vec![2]);
}

#[test]
fn implicit_dictionary_matches_materialized_columns() {
    let link = common::link((4, 1), (2, 1), 16);
    let inst = common::instance(2, link, None, 2, 1, 6, 0.0);
    let pb = Problem::new(&inst.link, &inst.meas);
    let grids = build_grids(&GridSpec { bs_x: 4, bs_y: 1, ue_x: 2, ue_y: 1, delay: 3 }, inst.link.max_delay());
    let dict = Dictionary::build(&pb, &inst.truth, grids);
    assert_eq!(dict.n_atoms(), 24);
    let m = dict.materialize(1 << 20).unwrap();
    let y = &inst.meas.frames[0];
    let fast = dict.correlate(y);
    let slow = m.adjoint() * y;
    for (a, b) in fast.iter().zip(slow.iter()) {
        assert!((a - b).norm() < 1e-10 * (1.0 + b.norm()));
    }
    for (j, n) in dict.atom_norms().iter().enumerate() {
        assert!((n - m.column(j).norm()).abs() < 1e-10);
    }
    assert!(dict.materialize(10).is_err());
}

#[test]
fn on_grid_single_path_is_fitted_exactly() {
    let link = common::link((4, 1), (2, 1), 16);
    let grid = GridSpec::oversampled(&link);
    let grids = build_grids(&grid, link.max_delay());
    let paths = squintcal::channel::PathSet {
        bs: vec![grids.bs[3]],
        ue: vec![grids.ue[1]],
        delays: vec![grids.delays[5]],
        gains: vec![C64::new(0.6, -0.8)],
    };
    let mut inst = common::instance(3, link, Some(Calibration::ideal(&link)), 1, 1, 6, 0.0);
    let h = squintcal::channel::channel_all(&link, &inst.truth.bs, &inst.truth.ue, &paths);
    // Re-simulate the single frame with the on-grid path.
    let mut y = CVec::zeros(inst.meas.frames[0].len());
    let np = inst.meas.schedule.n_pilots;
    for (qi, &k) in inst.meas.schedule.subcarriers.iter().enumerate() {
        for p in 0..np {
            let blk = &inst.meas.beams.combiners[p] * (&h[k] * &inst.meas.beams.transmit[p]);
            y.rows_mut((qi * np + p) * 2, 2).copy_from(&blk);
        }
    }
    inst.meas.frames[0] = y;
    let pb = Problem::new(&link, &inst.meas);
    let dict = Dictionary::build(&pb, &Calibration::ideal(&link), grids);
    let est = ongrid_frame(&dict, &inst.meas.frames[0], 1).unwrap();
    let (f, _) = objective_frame(&pb, &Calibration::ideal(&link), &inst.meas.frames[0], &est);
    assert!(f <= 1e-16 * inst.meas.frames[0].norm_squared());
    assert!((est.gains[0] - paths.gains[0]).norm() < 1e-8);
}

#[test]
fn global_objective_oracles() {
    let link = common::link((4, 1), (2, 1), 16);
    let inst = common::instance(4, link, None, 2, 2, 8, 0.0);
    let pb = Problem::new(&inst.link, &inst.meas);
    let energy: f64 = inst.meas.frames.iter().map(|y| y.norm_squared()).sum();
    assert!(global_objective(&pb, &inst.truth, &inst.frames) <= 1e-10 * energy);
    let mut zero = inst.frames.clone();
    for f in &mut zero {
        f.gains.fill(C64::new(0.0, 0.0));
    }
    assert!((global_objective(&pb, &inst.truth, &zero) - energy).abs() < 1e-9 * energy);
}

#[test]
fn global_objective_matches_dense_channel_oracle() {
    let link = common::link((4, 1), (2, 1), 16);
    let inst = common::instance(5, link, None, 2, 2, 8, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cal = common::random_errors(&inst.link, &mut rng);
    let pb = Problem::new(&inst.link, &inst.meas);
    let mut oracle = 0.0;
    for (m, paths) in inst.frames.iter().enumerate() {
        let h = reconstruct_channel(&inst.link, &cal, paths);
        for (qi, &k) in inst.meas.schedule.subcarriers.iter().enumerate() {
            for p in 0..inst.meas.schedule.n_pilots {
                let pred = &inst.meas.beams.combiners[p] * (&h[k] * &inst.meas.beams.transmit[p]);
                let y = inst.meas.block(m, qi, p);
                oracle += y.iter().zip(pred.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
            }
        }
    }
    let f = global_objective(&pb, &cal, &inst.frames);
    assert!((f - oracle).abs() < 1e-9 * oracle);
}

#[test]
fn gradients_vanish_at_noiseless_truth() {
    let link = common::link((4, 2), (2, 2), 16);
    let inst = common::instance(6, link, None, 2, 2, 8, 0.0);
    let pb = Problem::new(&inst.link, &inst.meas);
    let g = path_gradient(&pb, &inst.truth, &inst.meas.frames[0], &inst.frames[0]);
    for v in [&g.bs_x, &g.bs_y, &g.ue_x, &g.ue_y] {
        assert!(v.iter().all(|x| x.abs() < 1e-6));
    }
    // Delay gradients scale with the bandwidth; compare in units of 1/τ_max.
    assert!(g.delay.iter().all(|x| (x * inst.link.max_delay()).abs() < 1e-6));
    for side in [Side::Bs, Side::Ue] {
        let (gx, gy) = spacing_gradient(&pb, &inst.truth, &inst.frames, side);
        let lambda = inst.link.freq.wavelength();
        assert!(gx.iter().chain(&gy).all(|x| (x * lambda).abs() < 1e-6));
    }
}

#[test]
fn reference_element_has_zero_spacing_gradient() {
    let link = common::link((4, 2), (2, 2), 16);
    let inst = common::instance(7, link, None, 2, 2, 8, 0.1);
    let pb = Problem::new(&inst.link, &inst.meas);
    let cal = Calibration::ideal(&inst.link);
    for side in [Side::Bs, Side::Ue] {
        let (gx, gy) = spacing_gradient(&pb, &cal, &inst.frames, side);
        assert_eq!(gx[0], 0.0);
        assert_eq!(gy[0], 0.0);
        assert!(gx[1..].iter().any(|x| *x != 0.0));
    }
}

#[test]
fn linear_array_has_zero_y_gradients() {
    let link = common::link((4, 1), (2, 1), 16);
    let inst = common::instance(8, link, None, 2, 1, 8, 0.1);
    let pb = Problem::new(&inst.link, &inst.meas);
    let g = path_gradient(&pb, &Calibration::ideal(&inst.link), &inst.meas.frames[0], &inst.frames[0]);
    assert!(g.bs_y.iter().chain(&g.ue_y).all(|x| *x == 0.0));
}

#[test]
fn unit_gains_are_recovered_when_everything_else_is_exact() {
    let link = common::link((4, 1), (2, 1), 16);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut truth = common::random_errors(&link, &mut rng);
    truth.bs.gains.fill(C64::new(1.0, 0.0));
    truth.ue.gains.fill(C64::new(1.0, 0.0));
    let inst = common::instance(9, link, Some(truth), 3, 2, 8, 0.0);
    let pb = Problem::new(&inst.link, &inst.meas);
    for side in [Side::Bs, Side::Ue] {
        let (g, _) = solve_gains(&pb, &inst.truth, &inst.frames, side);
        assert!(g.iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-6), "{side:?}");
    }
}

#[test]
fn random_gains_are_recovered_on_one_side() {
    let link = common::link((4, 1), (2, 1), 16);
    let inst = common::instance(10, link, None, 3, 2, 8, 0.0);
    let pb = Problem::new(&inst.link, &inst.meas);
    let mut start = inst.truth.clone();
    start.bs.gains.fill(C64::new(1.0, 0.0));
    let (g, _) = solve_gains(&pb, &start, &inst.frames, Side::Bs);
    assert!((g - &inst.truth.bs.gains).norm() < 1e-6);
    let mut start = inst.truth.clone();
    start.ue.gains.fill(C64::new(1.0, 0.0));
    let (g, _) = solve_gains(&pb, &start, &inst.frames, Side::Ue);
    assert!((g - &inst.truth.ue.gains).norm() < 1e-6);
}

#[test]
fn spacing_step_decreases_objective_off_truth() {
    let link = common::link((4, 1), (2, 1), 16);
    let inst = common::instance(11, link, None, 3, 2, 8, 0.0);
    let pb = Problem::new(&inst.link, &inst.meas);
    let mut cal = inst.truth.clone();
    cal.bs.spacing = SpacingErrors::zeros(&inst.link.bs);
    let ls = LineSearchConfig::default();
    let mut f = global_objective(&pb, &cal, &inst.frames);
    let f_start = f;
    for _ in 0..10 {
        if let Some(next) = update_spacing(&pb, &mut cal, &inst.frames, Side::Bs, f, &ls) {
            assert!(next < f);
            f = next;
        }
        assert!((global_objective(&pb, &cal, &inst.frames) - f).abs() <= 1e-12 * f_start);
    }
    assert!(f < f_start);
}

#[test]
fn refinement_improves_slightly_off_grid_path() {
    let link = common::link((4, 1), (2, 1), 16);
    let inst = common::instance(12, link, Some(Calibration::ideal(&link)), 1, 1, 8, 0.0);
    let pb = Problem::new(&inst.link, &inst.meas);
    let cal = Calibration::ideal(&inst.link);
    let mut guess = inst.frames[0].clone();
    guess.bs[0].x += 0.03;
    guess.ue[0].x -= 0.02;
    guess.delays[0] = (guess.delays[0] * 0.9).max(0.0);
    let y = &inst.meas.frames[0];
    let ls = LineSearchConfig::default();
    let (mut f, _) = objective_frame(&pb, &cal, y, &guess);
    let first = refine_frame(&pb, &cal, y, &guess, &ls);
    assert!(first.objective < f);
    let mut cur = first.paths;
    f = first.objective;
    for _ in 0..10 {
        let r = refine_frame(&pb, &cal, y, &cur, &ls);
        assert!(r.objective <= f);
        f = r.objective;
        cur = r.paths;
    }
}

#[test]
fn delta_f_examples() {
    assert!((delta_f(&[10.0, 9.0]) - 0.1).abs() < 1e-15);
    assert_eq!(delta_f(&[3.0, 3.0]), 0.0);
    assert!((delta_f(&[4.0, 5.0]) - 0.25).abs() < 1e-15);
    assert_eq!(delta_f(&[0.0, 0.0]), 0.0);
    assert!(delta_f(&[1.0]).is_infinite());
}

#[test]
fn genie_is_exact_without_noise() {
    let link = common::link((4, 1), (2, 1), 16);
    let inst = common::instance(13, link, None, 3, 2, 8, 0.0);
    let h = genie_ls_baseline(&inst.link, &inst.meas, &inst.truth, inst.frames.last().unwrap());
    let truth = reconstruct_channel(&inst.link, &inst.truth, inst.frames.last().unwrap());
    assert!(nmse_channel(&truth, &h) < 1e-16);
}

#[test]
fn genie_error_drops_ten_db_per_ten_db_snr() {
    let link = common::link((4, 1), (2, 1), 16);
    let nmse_at = |sigma2: f64| {
        let inst = common::instance(14, link, None, 3, 1, 8, sigma2);
        let h = genie_ls_baseline(&inst.link, &inst.meas, &inst.truth, &inst.frames[0]);
        nmse_channel(&reconstruct_channel(&inst.link, &inst.truth, &inst.frames[0]), &h)
    };
    // Same seed: identical beams and noise shape, noise scaled by sqrt(10).
    let ratio = nmse_at(0.1) / nmse_at(0.01);
    assert!((ratio - 10.0).abs() < 1e-6, "ratio {ratio}");
}

#[test]
fn zero_iterations_equals_plain_omp() {
    let link = common::link((8, 1), (4, 1), 16);
    let inst = common::instance(15, link, None, 2, 2, 8, 0.01);
    let cfg = AlgoConfig { max_iters: 0, n_paths: 3, ..AlgoConfig::default() };
    let est = Estimator::new(&inst.link, &inst.meas, cfg, Calibration::ideal(&inst.link)).unwrap().run().unwrap();
    let pb = Problem::new(&inst.link, &inst.meas);
    let dict = Dictionary::build(&pb, &Calibration::ideal(&inst.link), build_grids(&GridSpec::oversampled(&inst.link), inst.link.max_delay()));
    let direct = ongrid_frame(&dict, inst.meas.frames.last().unwrap(), 3).unwrap();
    assert_eq!(est.state.frames.last().unwrap(), &direct);
    assert_eq!(est.state.phase, Phase::OnGrid);
    assert_eq!(est.state.calibration, Calibration::ideal(&inst.link));
}

#[test]
fn phases_switch_one_way_and_objective_settles() {
    let link = common::link((8, 1), (4, 1), 16);
    let inst = common::instance(16, link, None, 2, 2, 8, 0.01);
    let cfg = AlgoConfig { max_iters: 25, n_paths: 3, early_exit: None, switch_threshold: f64::INFINITY, ..AlgoConfig::default() };
    let mut est = Estimator::new(&inst.link, &inst.meas, cfg, Calibration::ideal(&inst.link)).unwrap();
    let mut seen_off = false;
    for _ in 0..25 {
        est.iterate().unwrap();
        if seen_off {
            assert_eq!(est.state.phase, Phase::OffGrid);
        }
        seen_off |= est.state.phase == Phase::OffGrid;
    }
    assert!(seen_off);
    assert_eq!(est.state.objective_history.len(), 25);
}

#[test]
fn perfect_calibration_keeps_errors_fixed() {
    let link = common::link((8, 1), (4, 1), 16);
    let inst = common::instance(17, link, None, 2, 2, 8, 0.01);
    let cfg = AlgoConfig { max_iters: 5, n_paths: 3, calibrate: CalibrationMask::none(), ..AlgoConfig::default() };
    let est = Estimator::new(&inst.link, &inst.meas, cfg, inst.truth.clone()).unwrap().run().unwrap();
    assert_eq!(est.state.calibration, inst.truth);
}

#[test]
fn gain_matrix_reproduces_prediction() {
    let link = common::link((4, 1), (2, 1), 16);
    let inst = common::instance(18, link, None, 3, 1, 8, 0.0);
    let pb = Problem::new(&inst.link, &inst.meas);
    let k = FrameKernel::new(&pb, &inst.truth, &inst.frames[0]);
    let a = CVec::from_vec(inst.frames[0].gains.clone());
    assert!((k.gain_matrix() * &a - k.predict(&inst.frames[0].gains)).norm() < 1e-12 * a.norm());
    let solved = k.solve_gains(&inst.meas.frames[0]);
    assert!((CVec::from_vec(solved) - a).norm() < 1e-8);
}

use decay_entropy::collision::{
    compare_covariances, simulate_collisions, simulate_collisions_observed, simulate_windowed,
    windowed_transform_bins, CollisionConfig,
};
use decay_entropy::dynamics::{
    cross_kernel_output_resonator, initial_covariance, noise_kernel, resonator_covariance,
    signal_kernel, InitialState, ModelKind, RateParams, SmoothKernel,
};
use decay_entropy::gaussian::{extract_subsystem, williamson_spectrum, CovarianceMatrix, Mat2};
use decay_entropy::modes::{
    assemble_covariance, Selection, SubsystemSpec, TimeWindow, WindowBasis,
};
use decay_entropy::Error;

fn unit() -> RateParams {
    RateParams::new(1.0).unwrap()
}

fn squeezed(r: f64, n_th: f64) -> CovarianceMatrix {
    initial_covariance(&InitialState::new(r, n_th).unwrap())
}

fn relative(a: &Mat2, b: &Mat2) -> f64 {
    let scale = a.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            worst = worst.max((a[i][j] - b[i][j]).abs());
        }
    }
    worst / scale
}

fn max_abs_diff(a: &CovarianceMatrix, b: &CovarianceMatrix) -> f64 {
    compare_covariances(a, b, 1.0).unwrap().max_deviation
}

#[test]
fn vacuum_is_a_fixed_point() {
    let config = CollisionConfig::new(0.01, 200, &unit()).unwrap();
    let mut worst = 0.0f64;
    simulate_collisions_observed(ModelKind::Decay, &CovarianceMatrix::identity(1), &config, |_, m| {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let expected = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((m[(i, j)] - expected).abs());
            }
        }
    })
    .unwrap();
    assert!(worst < 1e-15, "{worst}");
}

#[test]
fn resonator_block_follows_closed_form() {
    let p = unit();
    let cases = [
        (ModelKind::Decay, squeezed(5.0, 0.0), 3.0),
        (ModelKind::Amplifier, CovarianceMatrix::identity(1), 1.0),
        (ModelKind::Amplifier, squeezed(0.0, 1.0), 6.0),
    ];
    for (model, sigma0, t) in cases {
        let config = CollisionConfig::covering(1e-3, t, &p).unwrap();
        let oracle = simulate_windowed(model, &sigma0, &config, &[]).unwrap();
        let analytic = resonator_covariance(model, &sigma0, &p, t).unwrap();
        let report = compare_covariances(&analytic, &oracle, analytic.max_abs()).unwrap();
        assert!(report.max_deviation < 2e-2, "{model}: {report:?}");
    }
    // (2e − 1)·I for the amplifier from vacuum
    let config = CollisionConfig::covering(1e-3, 1.0, &p).unwrap();
    let a = simulate_windowed(ModelKind::Amplifier, &CovarianceMatrix::identity(1), &config, &[])
        .unwrap();
    let expected = 2.0 * std::f64::consts::E - 1.0;
    assert!((a.get(0, 0) - expected).abs() < 2e-2 * expected);
    assert!(a.get(0, 1).abs() < 1e-12);
}

#[test]
fn kernels_match_joint_simulation() {
    let p = unit();
    let dt = 2e-3;
    let config = CollisionConfig::covering(dt, 2.0, &p).unwrap();
    let i_s = 500; // bin centred at s = 0.999
    let i_u = 800; // bin centred at 1.599
    let (s, u) = (config.sample_time(i_s), config.sample_time(i_u));
    for (model, sigma0) in [
        (ModelKind::Decay, squeezed(5.0, 0.0)),
        (ModelKind::Decay, CovarianceMatrix::identity(1)),
        (ModelKind::Amplifier, CovarianceMatrix::identity(1)),
        (ModelKind::Amplifier, squeezed(0.8, 0.5)),
    ] {
        let joint = simulate_collisions(model, &sigma0, &config).unwrap();
        let cross_block = |bin: usize| {
            let b = joint.block(bin, 0);
            [[b[0][0] / dt.sqrt(), b[0][1] / dt.sqrt()], [b[1][0] / dt.sqrt(), b[1][1] / dt.sqrt()]]
        };
        let analytic = cross_kernel_output_resonator(model, &sigma0, &p, s, 2.0).unwrap();
        let oracle = cross_block(i_s);
        if analytic.iter().flatten().all(|v| *v == 0.0) {
            assert!(oracle.iter().flatten().all(|v| v.abs() < 1e-12), "{model}");
        } else {
            assert!(relative(&analytic, &oracle) < 2e-2, "{model} cross: {analytic:?} {oracle:?}");
        }

        let signal = signal_kernel(model, &sigma0, &p).unwrap().eval(s, u);
        let noise = noise_kernel(model, &p).eval(s, u);
        let mut smooth = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                smooth[a][b] = signal[a][b] + noise[a][b];
            }
        }
        let bb = joint.block(i_s, i_u);
        let oracle = [[bb[0][0] / dt, bb[0][1] / dt], [bb[1][0] / dt, bb[1][1] / dt]];
        if smooth.iter().flatten().all(|v| *v == 0.0) {
            assert!(oracle.iter().flatten().all(|v| v.abs() < 1e-12), "{model}");
        } else {
            assert!(relative(&smooth, &oracle) < 2e-2, "{model} output: {smooth:?} {oracle:?}");
        }
    }
    // vacuum input alone still correlates the amplifier output with the resonator
    let joint = simulate_collisions(ModelKind::Amplifier, &CovarianceMatrix::identity(1), &config)
        .unwrap();
    let b = joint.block(i_s, 0);
    let expected = (0.5 * (s + 2.0)).exp() * 2.0;
    assert!((b[0][0] / dt.sqrt() - expected).abs() < 2e-2 * expected);
    assert!((b[1][1] / dt.sqrt() + expected).abs() < 2e-2 * expected);
}

#[test]
fn decay_conserves_trace() {
    let p = unit();
    let config = CollisionConfig::new(0.01, 300, &p).unwrap();
    let sigma0 = squeezed(1.3, 0.4);
    let mut traces = Vec::new();
    simulate_collisions_observed(ModelKind::Decay, &sigma0, &config, |_, m| {
        let tr: f64 = (0..m.nrows()).map(|i| m[(i, i)] - 1.0).sum();
        traces.push(tr);
    })
    .unwrap();
    let initial = sigma0.get(0, 0) + sigma0.get(1, 1) - 2.0;
    let mut last = initial;
    for tr in traces {
        assert!((tr - last).abs() < 1e-8);
        last = tr;
    }
}

#[test]
fn joint_states_stay_physical() {
    let p = unit();
    for (model, sigma0, dt) in [
        (ModelKind::Decay, squeezed(2.0, 0.0), 0.05),
        (ModelKind::Decay, squeezed(0.5, 2.0), 0.2),
        (ModelKind::Amplifier, squeezed(0.0, 1.0), 0.05),
        (ModelKind::Amplifier, squeezed(1.0, 0.0), 0.08),
    ] {
        let config = CollisionConfig::new(dt, 40, &p).unwrap();
        let joint = simulate_collisions(model, &sigma0, &config).unwrap();
        let spectrum = williamson_spectrum(&joint).unwrap();
        assert!(spectrum.min() >= 1.0 - 1e-9, "{model}: {}", spectrum.min());
    }
}

#[test]
fn one_collision_builds_two_mode_squeezing() {
    let config = CollisionConfig::new(0.25, 1, &unit()).unwrap();
    let joint =
        simulate_collisions(ModelKind::Amplifier, &CovarianceMatrix::identity(1), &config).unwrap();
    let a = extract_subsystem(&joint, &[0]).unwrap();
    let b = a.block(0, 0);
    assert!((b[0][0] - b[1][1]).abs() < 1e-14 && b[0][1].abs() < 1e-14);
    let s = williamson_spectrum(&a).unwrap().values()[0];
    assert!((s - (2.0 * 0.5f64.sinh().powi(2) + 1.0)).abs() < 1e-12);
    assert!(s > 1.0);
}

#[test]
fn detuning_drops_out_in_the_rotating_frame() {
    let p = unit();
    let windows = [
        WindowBasis::new(TimeWindow::new(0.0, 0.6).unwrap(), 5),
        WindowBasis::new(TimeWindow::new(0.6, 1.5).unwrap(), 7),
    ];
    for (model, sigma0) in [
        (ModelKind::Decay, squeezed(1.5, 0.2)),
        (ModelKind::Amplifier, squeezed(0.7, 0.3)),
    ] {
        let plain = CollisionConfig::covering(0.01, 1.5, &p).unwrap();
        let detuned = plain.clone().with_detuning(37.0);
        let a = simulate_collisions(model, &sigma0, &plain).unwrap();
        let b = simulate_collisions(model, &sigma0, &detuned).unwrap();
        assert!(max_abs_diff(&a, &b) < 1e-10 * a.max_abs(), "{model}");
        let a = simulate_windowed(model, &sigma0, &plain, &windows).unwrap();
        let b = simulate_windowed(model, &sigma0, &detuned, &windows).unwrap();
        assert!(max_abs_diff(&a, &b) < 1e-10 * a.max_abs(), "{model}");
    }
}

#[test]
fn online_accumulation_matches_full_storage() {
    let p = unit();
    let windows = [
        WindowBasis::new(TimeWindow::new(0.0, 1.2).unwrap(), 9),
        WindowBasis::new(TimeWindow::new(1.2, 3.0).unwrap(), 12),
    ];
    for (model, sigma0) in [
        (ModelKind::Decay, squeezed(3.0, 0.0)),
        (ModelKind::Amplifier, squeezed(0.2, 1.0)),
    ] {
        // A is read at 3.5, after both windows have closed
        let config = CollisionConfig::covering(5e-3, 3.5, &p).unwrap();
        let joint = simulate_collisions(model, &sigma0, &config).unwrap();
        let full = windowed_transform_bins(&joint, config.dt(), &windows).unwrap();
        let online = simulate_windowed(model, &sigma0, &config, &windows).unwrap();
        assert_eq!(full.dim(), 2 * (10 + 13 + 1));
        assert!(max_abs_diff(&full, &online) < 1e-11 * full.max_abs(), "{model}");
    }
}

#[test]
fn transform_of_vacuum_is_vacuum() {
    let p = unit();
    let config = CollisionConfig::covering(0.01, 2.0, &p).unwrap();
    let joint = simulate_collisions(ModelKind::Decay, &CovarianceMatrix::identity(1), &config)
        .unwrap();
    let windows = [
        WindowBasis::new(TimeWindow::new(0.0, 0.8).unwrap(), 20),
        WindowBasis::new(TimeWindow::new(0.8, 2.0).unwrap(), 30),
    ];
    let out = windowed_transform_bins(&joint, 0.01, &windows).unwrap();
    assert!(max_abs_diff(&out, &CovarianceMatrix::identity(out.n_modes())) < 1e-12);
    let spectrum = williamson_spectrum(&out).unwrap();
    assert!((spectrum.max() - 1.0).abs() < 1e-10 && (spectrum.min() - 1.0).abs() < 1e-10);
}

#[test]
fn misaligned_windows_are_rejected() {
    let p = unit();
    let config = CollisionConfig::covering(0.01, 1.0, &p).unwrap();
    let joint = simulate_collisions(ModelKind::Decay, &CovarianceMatrix::identity(1), &config)
        .unwrap();
    let bad = [WindowBasis::new(TimeWindow::new(0.0, 0.505).unwrap(), 3)];
    assert!(matches!(
        windowed_transform_bins(&joint, 0.01, &bad),
        Err(Error::Alignment { .. })
    ));
    assert!(matches!(
        simulate_windowed(ModelKind::Decay, &CovarianceMatrix::identity(1), &config, &bad),
        Err(Error::Alignment { .. })
    ));
    let late = [WindowBasis::new(TimeWindow::new(0.5, 1.5).unwrap(), 3)];
    assert!(simulate_windowed(ModelKind::Decay, &CovarianceMatrix::identity(1), &config, &late)
        .is_err());
}

fn windowed_deviation(model: ModelKind, sigma0: &CovarianceMatrix, dt: f64) -> f64 {
    let p = unit();
    let (t0, t, k_max) = (1.5, 4.0, 12);
    let spec = SubsystemSpec::new(Selection::B1B2A, t0, t).unwrap();
    let analytic = assemble_covariance(model, sigma0, &p, &spec, k_max).unwrap();
    let windows: Vec<WindowBasis> = spec
        .windows()
        .into_iter()
        .map(|w| WindowBasis::new(w, k_max))
        .collect();
    let config = CollisionConfig::covering(dt, t, &p).unwrap();
    let oracle = simulate_windowed(model, sigma0, &config, &windows).unwrap();
    compare_covariances(&analytic, &oracle, analytic.max_abs())
        .unwrap()
        .max_deviation
}

#[test]
fn windowed_blocks_converge_at_first_order() {
    for (model, sigma0) in [
        (ModelKind::Decay, squeezed(5.0, 0.0)),
        (ModelKind::Amplifier, squeezed(0.0, 1.0)),
    ] {
        let devs: Vec<f64> = [4e-3, 2e-3, 1e-3]
            .iter()
            .map(|&dt| windowed_deviation(model, &sigma0, dt))
            .collect();
        assert!(devs[2] < 2e-2, "{model}: {devs:?}");
        for pair in devs.windows(2) {
            let ratio = pair[1] / pair[0];
            assert!((0.3..=0.7).contains(&ratio), "{model}: {devs:?}");
        }
    }
}

#[test]
fn disjoint_windows_share_nothing_in_vacuum() {
    let p = unit();
    let windows = [
        WindowBasis::new(TimeWindow::new(0.0, 1.0).unwrap(), 6),
        WindowBasis::new(TimeWindow::new(1.0, 2.5).unwrap(), 6),
    ];
    let config = CollisionConfig::covering(1e-3, 2.5, &p).unwrap();
    let out = simulate_windowed(ModelKind::Decay, &CovarianceMatrix::identity(1), &config, &windows)
        .unwrap();
    for m in 0..7 {
        for n in 7..14 {
            let b = out.block(m, n);
            assert!(b.iter().flatten().all(|v| v.abs() < 1e-12));
        }
    }
}

#[test]
fn single_window_matches_multimode_closed_form() {
    let p = unit();
    let sigma0 = squeezed(2.0, 0.0);
    let window = TimeWindow::new(0.0, 3.0).unwrap();
    let basis = WindowBasis::new(window, 15);
    let config = CollisionConfig::covering(1e-3, 3.0, &p).unwrap();
    let oracle = simulate_windowed(ModelKind::Decay, &sigma0, &config, &[basis]).unwrap();
    // one window (0, t) compared entrywise against δ + (σ0 − I) f_j f_k
    // built from the overlap closed form
    let f: Vec<f64> = (0..16)
        .map(|k| decay_entropy::modes::overlap_fk(&window, k, &p))
        .collect();
    let s0 = sigma0.block(0, 0);
    let mut worst = 0.0f64;
    for j in 0..16 {
        for k in 0..16 {
            let b = oracle.block(j, k);
            for a in 0..2 {
                for c in 0..2 {
                    let delta = if a == c { 1.0 } else { 0.0 };
                    let expected =
                        (s0[a][c] - delta) * f[j] * f[k] + if j == k { delta } else { 0.0 };
                    worst = worst.max((b[a][c] - expected).abs());
                }
            }
        }
    }
    assert!(worst < 2e-2 * s0[0][0], "{worst}");
}

use largen_core::on_model::*;
use num_complex::Complex64;

fn params(n: f64, g: f64, y0: f64) -> LargeNParams {
    LargeNParams::new(n, g, y0).unwrap()
}

fn packet<F: Fn(f64) -> f64>(grid: RadialGrid, f: F) -> RadialWavefunction {
    let amps = grid.coords().map(|y| Complex64::new(f(y), 0.0)).collect();
    RadialWavefunction::from_amplitudes(grid, amps).unwrap()
}

fn spread(state: &RadialWavefunction) -> f64 {
    let h = state.grid.spacing();
    let d = state.density();
    let mean: f64 = state.grid.coords().zip(&d).map(|(y, d)| y * d * h).sum();
    state
        .grid
        .coords()
        .zip(&d)
        .map(|(y, d)| (y - mean).powi(2) * d * h)
        .sum()
}

#[test]
fn parameter_validation() {
    assert!(LargeNParams::new(0.5, 1.0, 1.0).is_err());
    assert!(LargeNParams::new(3.0, 0.0, 1.0).is_err());
    assert!(LargeNParams::new(3.0, -1.0, 1.0).is_err());
    assert!(LargeNParams::new(3.0, 1.0, -0.1).is_err());
    assert!(RadialGrid::new(5.0, 15).is_err());
    assert!(RadialGrid::new(-1.0, 100).is_err());
}

#[test]
fn potential_examples() {
    assert_eq!(rescaled_potential(&params(3.0, 8.0, 1.0), 1.0), 0.0);
    assert_eq!(rescaled_potential(&params(1.0, 8.0, 0.0), 1.0), 1.0);
    assert!((rescaled_potential(&params(5.0, 8.0, 0.0), 1.0) - 1.04).abs() < 1e-15);
    let grid = RadialGrid::new(2.0, 21).unwrap();
    let u = effective_radial_potential(&params(5.0, 8.0, 0.0), &grid);
    assert_eq!(u[0], f64::INFINITY);
    assert!((u[10] - 1.04).abs() < 1e-15);
}

#[test]
fn unscaled_potential_is_n_times_rescaled() {
    let p = params(7.0, 1.3, 0.8);
    for y in [0.3, 1.0, 2.2] {
        let ratio = unscaled_potential(&p, p.n.sqrt() * y) / rescaled_potential(&p, y);
        assert!((ratio - p.n).abs() < 1e-12);
    }
}

#[test]
fn initial_packet_shape() {
    let grid = RadialGrid::new(6.0, 6001).unwrap();
    let st = quantum_roll_initial_state(&params(9.0, 1.0, 1.0), &grid, 1.0).unwrap();
    let d = st.density();
    let peak = d
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    assert!((grid.coord(peak) - (8.0f64 / 9.0).sqrt()).abs() <= grid.spacing());
    assert_eq!(st.amplitudes[0], Complex64::new(0.0, 0.0));
    assert_eq!(*st.amplitudes.last().unwrap(), Complex64::new(0.0, 0.0));
    assert!((st.norm() - 1.0).abs() < 1e-12);

    let half = quantum_roll_initial_state(&params(1.0, 1.0, 1.0), &grid, 1.0).unwrap();
    let d = half.density();
    assert!(d[1] > d[2] && d[2] > d[100]);
}

#[test]
fn narrow_packet_is_under_resolved() {
    let grid = RadialGrid::new(5.0, 501).unwrap();
    for n in [1.0, 2.0, 9.0] {
        let err = quantum_roll_initial_state(&params(n, 1.0, 1.0), &grid, 1e-6).unwrap_err();
        assert!(matches!(err, RollError::UnderResolved(_)), "{err:?}");
    }
    assert!(quantum_roll_initial_state(&params(2.0, 1.0, 1.0), &grid, 0.0).is_err());
}

#[test]
fn packet_second_moment_is_width_squared() {
    // y^(N-1) exp(-N y^2 / (2 w^2)) has <y^2> = w^2 for any N
    let grid = RadialGrid::new(8.0, 4001).unwrap();
    let p = params(2.0, 8.0, 1.0);
    let w = 0.7;
    let st = quantum_roll_initial_state(&p, &grid, w).unwrap();
    assert!((moment_y2(&st) - w * w).abs() < 1e-6);
    let series = evolve_quantum_roll(&st, &p, 0.01, 3).unwrap();
    assert_eq!(series.samples[0].y2, moment_y2(&st));
}

#[test]
fn moment_examples() {
    let grid = RadialGrid::new(10.0, 4001).unwrap();
    // built directly: the wall pin in from_amplitudes would zero the y = 0 sample
    let half = RadialWavefunction {
        grid,
        amplitudes: grid
            .coords()
            .map(|y| Complex64::new((-0.5 * y * y).exp(), 0.0))
            .collect(),
        time: 0.0,
    };
    assert!((moment_y2(&half) - 0.5).abs() < 1e-9);

    let mut scaled = half.clone();
    let c = Complex64::new(-2.5, 7.0);
    scaled.amplitudes.iter_mut().for_each(|a| *a *= c);
    assert!((moment_y2(&scaled) - moment_y2(&half)).abs() < 1e-14);

    let mut last = f64::INFINITY;
    for w in [0.1, 0.03, 0.01] {
        let narrow = packet(grid, |y| (-(y - 2.0) * (y - 2.0) / (4.0 * w * w)).exp());
        let err = (moment_y2(&narrow) - 4.0).abs();
        assert!(err < last);
        last = err;
    }
    assert!(last < 1e-3);
}

#[test]
fn invalid_step() {
    let p = params(3.0, 1.0, 1.0);
    let grid = RadialGrid::new(6.0, 201).unwrap();
    let st = quantum_roll_initial_state(&p, &grid, 0.5).unwrap();
    assert!(matches!(
        evolve_quantum_roll(&st, &p, 0.0, 10),
        Err(RollError::InvalidStep)
    ));
    assert!(matches!(
        evolve_quantum_roll(&st, &p, -0.1, 10),
        Err(RollError::InvalidStep)
    ));
}

#[test]
fn overflowing_step_loses_unitarity() {
    let p = params(3.0, 1.0, 1.0);
    let grid = RadialGrid::new(6.0, 201).unwrap();
    let st = quantum_roll_initial_state(&p, &grid, 0.5).unwrap();
    let err = evolve_quantum_roll(&st, &p, 1e300, 10).unwrap_err();
    assert!(matches!(err, RollError::UnitarityLost { .. }), "{err:?}");
}

#[test]
fn unitarity_and_energy_over_ten_thousand_steps() {
    let p = params(3.0, 1.0, 1.0);
    let grid = RadialGrid::new(6.0, 401).unwrap();
    let st = quantum_roll_initial_state(&p, &grid, 0.5).unwrap();
    let series = evolve_quantum_roll(&st, &p, 0.005, 10_000).unwrap();
    assert_eq!(series.samples.len(), 10_001);
    assert!(
        series.norm_drift() <= 1e-8,
        "norm drift {}",
        series.norm_drift()
    );
    assert!(
        series.energy_drift() <= 1e-6,
        "energy drift {}",
        series.energy_drift()
    );
    assert!(series.wall_clear());
    assert!(series.samples.windows(2).all(|w| w[1].t > w[0].t));
}

#[test]
fn harmonic_ground_state_is_stationary() {
    // the continuum eigenstate y exp(-y^2/2) is stationary on the grid up to O(h^2)
    let grid = RadialGrid::new(10.0, 16001).unwrap();
    let st = packet(grid, |y| y * (-0.5 * y * y).exp());
    let ham =
        RadialHamiltonian::rescaled(&params(1.0, 1.0, 0.0), &grid).with_potential(|y| 0.5 * y * y);
    let series = evolve_with(&st, ham, 0.01, 700).unwrap();
    let y2 = series.samples[0].y2;
    assert!((y2 - 1.5).abs() < 1e-6);
    for s in &series.samples {
        assert!((s.y2 - y2).abs() < 1e-6, "t = {}: {}", s.t, s.y2);
    }
}

#[test]
fn free_packet_spreads() {
    // rescaled kinetic 1/(2N^2): mass N^2
    let n = 2.0;
    let grid = RadialGrid::new(20.0, 8001).unwrap();
    let (yc, s0) = (10.0, 0.5);
    let st = packet(grid, |y| (-(y - yc) * (y - yc) / (4.0 * s0 * s0)).exp());
    let ham = RadialHamiltonian::rescaled(&params(n, 1.0, 0.0), &grid).with_potential(|_| 0.0);
    let (dt, steps) = (0.004, 1000);
    let series = evolve_with(&st, ham, dt, steps).unwrap();
    let t = dt * steps as f64;
    let exact = s0 * s0 * (1.0 + (t / (2.0 * n * n * s0 * s0)).powi(2));
    let rel = (spread(&series.final_state) - exact).abs() / exact;
    assert!(rel < 1e-5, "relative error {rel}");
}

#[test]
fn second_order_in_grid_spacing() {
    let p = params(3.0, 1.0, 1.0);
    let y2 = |points: usize| {
        let grid = RadialGrid::new(6.0, points).unwrap();
        let st = quantum_roll_initial_state(&p, &grid, 0.5).unwrap();
        evolve_quantum_roll(&st, &p, 0.01, 500)
            .unwrap()
            .samples
            .last()
            .unwrap()
            .y2
    };
    let v: Vec<f64> = [201, 401, 801, 1601].into_iter().map(y2).collect();
    for w in v.windows(3) {
        let ratio = (w[1] - w[0]).abs() / (w[2] - w[1]).abs();
        assert!(ratio >= 4.0, "ratio {ratio}");
    }
}

#[test]
fn scaled_and_unscaled_evolutions_agree() {
    let p = params(4.0, 1.0, 1.0);
    let ygrid = RadialGrid::new(5.0, 801).unwrap();
    let st_y = quantum_roll_initial_state(&p, &ygrid, 0.5).unwrap();
    let rgrid = RadialGrid::new(p.n.sqrt() * ygrid.y_max, ygrid.points).unwrap();
    let st_r = RadialWavefunction::from_amplitudes(rgrid, st_y.amplitudes.clone()).unwrap();

    let dt_tilde = 0.01;
    let ys = evolve_quantum_roll(&st_y, &p, dt_tilde, 400).unwrap();
    let rs = evolve_with(
        &st_r,
        RadialHamiltonian::unscaled(&p, &ygrid),
        dt_tilde / p.n,
        400,
    )
    .unwrap();
    for (a, b) in ys.samples.iter().zip(&rs.samples) {
        let rel = (b.y2 - p.n * a.y2).abs() / (p.n * a.y2);
        assert!(rel < 1e-6, "t~ = {}: {rel}", a.t);
    }
}

#[test]
fn roll_leaves_the_hump() {
    let p = params(2.0, 8.0, 1.0);
    let grid = RadialGrid::new(8.0, 1601).unwrap();
    let st = quantum_roll_initial_state(&p, &grid, 0.3).unwrap();
    let series = evolve_quantum_roll(&st, &p, 0.01, 300).unwrap();
    let first = series.samples[0].y2;
    let peak = series.samples.iter().map(|s| s.y2).fold(0.0, f64::max);
    assert!(peak > first);
    assert!(series.wall_clear());
}

use std::f64::consts::TAU;

use largen_core::numerics::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn harmonic(omega: f64) -> impl FnMut(f64, &[f64], &mut [f64]) {
    move |_, y, dy| {
        dy[0] = y[1];
        dy[1] = -omega * omega * y[0];
    }
}

#[test]
fn exponential_decay() {
    let traj = integrate_ode(
        |_, y, dy| dy[0] = -y[0],
        &[1.0],
        0.0,
        1.0,
        ToleranceSpec::default(),
    )
    .unwrap();
    assert!((traj.last_state()[0] - (-1f64).exp()).abs() < 1e-9);
    assert_eq!(traj.times[0], 0.0);
    assert_eq!(*traj.times.last().unwrap(), 1.0);
    assert_eq!(traj.times.len(), traj.states.len());
    assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn harmonic_period() {
    let tol = ToleranceSpec::default();
    let traj = integrate_ode(
        harmonic(1.0),
        &[1.0, 0.0],
        0.0,
        2.0 * std::f64::consts::PI,
        tol,
    )
    .unwrap();
    let y = traj.last_state();
    assert!((y[0] - 1.0).abs() <= 10.0 * tol.rel_tol);
    assert!(y[1].abs() <= 10.0 * tol.rel_tol);
}

#[test]
fn blow_up_is_divergent() {
    let err = integrate_ode(
        |_, y, dy| dy[0] = y[0] * y[0],
        &[1.0],
        0.0,
        2.0,
        ToleranceSpec::default(),
    )
    .unwrap_err();
    assert!(
        matches!(err, NumericsError::DivergentDynamics(_)),
        "{err:?}"
    );
}

#[test]
fn step_budget() {
    let tol = ToleranceSpec::new(1e-10, 1e-10, 5).unwrap();
    let err = integrate_ode(harmonic(1.0), &[1.0, 0.0], 0.0, 100.0, tol).unwrap_err();
    assert!(matches!(err, NumericsError::BudgetExceeded(5)));
}

#[test]
fn tolerance_validation() {
    assert!(ToleranceSpec::new(0.0, 1e-10, 10).is_err());
    assert!(ToleranceSpec::new(1e-10, -1.0, 10).is_err());
    assert!(ToleranceSpec::new(1e-10, 1e-10, 0).is_err());
    assert!(integrate_ode(
        harmonic(1.0),
        &[1.0, 0.0],
        1.0,
        1.0,
        ToleranceSpec::default()
    )
    .is_err());
}

#[test]
fn root_examples() {
    let tol = ToleranceSpec::new(1e-14, 1e-14, 200).unwrap();
    let r = find_root(|x| x * x - 2.0, 1.0, 2.0, tol).unwrap();
    assert!((r - 2f64.sqrt()).abs() < 1e-12);
    assert!(find_root(|x| x, -1.0, 1.0, tol).unwrap().abs() < 1e-14);
    assert!(matches!(
        find_root(|x| x * x + 1.0, 0.0, 1.0, tol),
        Err(NumericsError::BracketInvalid { .. })
    ));
}

#[test]
fn tridiagonal_examples() {
    let one = Complex64::new(1.0, 0.0);
    let z = Complex64::new(0.0, 0.0);
    let rhs: Vec<_> = [1.0, 2.0, 3.0]
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .collect();
    let x = solve_tridiagonal(&[z, z], &[one; 3], &[z, z], &rhs).unwrap();
    assert_eq!(x, rhs);
    let two = Complex64::new(2.0, 0.0);
    let three = Complex64::new(3.0, 0.0);
    let x = solve_tridiagonal(&[one], &[two, two], &[one], &[three, three]).unwrap();
    assert!((x[0] - one).norm() < 1e-15 && (x[1] - one).norm() < 1e-15);
    assert!(matches!(
        solve_tridiagonal(&[z], &[one, z], &[z], &[one, one]),
        Err(NumericsError::SingularTridiagonal(_))
    ));
}

#[test]
fn quadrature_examples() {
    let xs: Vec<f64> = (0..5).map(|i| (i as f64 * 0.25).powi(3)).collect();
    assert!((quadrature(&xs, 0.25).unwrap() - 0.25).abs() < 1e-15);
    for n in 2..12 {
        let h = 2.0 / (n - 1) as f64;
        assert!(
            (quadrature(&vec![1.0; n], h).unwrap() - 2.0).abs() < 1e-14,
            "n = {n}"
        );
    }
    assert!(matches!(
        quadrature(&[1.0], 0.1),
        Err(NumericsError::InsufficientSamples(1))
    ));
}

#[test]
fn quadrature_fourth_order() {
    let exact = 1.0 - 1f64.cos();
    let err = |n: usize| {
        let h = 1.0 / (n - 1) as f64;
        let s: Vec<f64> = (0..n).map(|i| (i as f64 * h).sin()).collect();
        (quadrature(&s, h).unwrap() - exact).abs()
    };
    for n in [9, 10] {
        let (e1, e2) = (err(n), err(2 * n - 1));
        let order = (e1 / e2).log2();
        assert!(order >= 3.9, "n = {n}: order {order}");
    }
}

#[test]
fn stepper_reverses() {
    let tol = ToleranceSpec::default();
    let mut rhs = harmonic(1.3);
    let mut dp = DormandPrince::new(0.0, &[0.4, -0.2], tol).unwrap();
    dp.advance(&mut rhs, 12.0).unwrap();
    dp.advance(&mut rhs, 0.0).unwrap();
    assert!((dp.state()[0] - 0.4).abs() < 100.0 * tol.rel_tol);
    assert!((dp.state()[1] + 0.2).abs() < 100.0 * tol.rel_tol);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn harmonic_energy_over_ten_periods(omega in 0.2f64..5.0, amp in 1.0f64..4.0, phase in 0.0..TAU) {
        // unit-scale amplitudes, so the relative tolerance is the binding one
        let (x0, v0) = (amp * phase.cos(), amp * omega * phase.sin());
        let tol = ToleranceSpec::default();
        let t1 = 10.0 * 2.0 * std::f64::consts::PI / omega;
        let traj = integrate_ode(harmonic(omega), &[x0, v0], 0.0, t1, tol).unwrap();
        let energy = |y: &[f64]| 0.5 * (y[1] * y[1] + omega * omega * y[0] * y[0]);
        let e0 = energy(&[x0, v0]);
        let worst = traj.states.iter().map(|y| (energy(y) - e0).abs() / e0).fold(0.0, f64::max);
        prop_assert!(worst <= 100.0 * tol.rel_tol, "drift {}", worst);
    }

    #[test]
    fn root_stays_in_bracket(a in -5.0f64..5.0, c in -3.0f64..3.0, lo in -10.0f64..0.0, hi in 0.0f64..10.0) {
        let f = |x: f64| (x - a).powi(3) + c * (x - a);
        prop_assume!(f(lo) * f(hi) <= 0.0);
        let tol = ToleranceSpec::new(1e-12, 1e-12, 500).unwrap();
        let mut inside = true;
        let r = find_root(|x| { inside &= (lo..=hi).contains(&x); f(x) }, lo, hi, tol).unwrap();
        prop_assert!(inside);
        prop_assert!((lo..=hi).contains(&r));
    }

    #[test]
    fn tridiagonal_residual(n in 1usize..=512, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let lower: Vec<_> = (1..n).map(|_| c()).collect();
        let upper: Vec<_> = (1..n).map(|_| c()).collect();
        let diag: Vec<_> = (0..n).map(|_| c() + Complex64::new(4.0, 0.0)).collect();
        let rhs: Vec<_> = (0..n).map(|_| c()).collect();
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        let mut worst: f64 = 0.0;
        let scale = rhs.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for i in 0..n {
            let mut ax = diag[i] * x[i];
            if i > 0 { ax += lower[i - 1] * x[i - 1]; }
            if i + 1 < n { ax += upper[i] * x[i + 1]; }
            worst = worst.max((ax - rhs[i]).norm());
        }
        prop_assert!(worst <= 1e-12 * scale, "residual {}", worst);
    }

    #[test]
    fn quadrature_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, n in 2usize..40) {
        let h = 0.1;
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * h).cos()).collect();
        let g: Vec<f64> = (0..n).map(|i| (i as f64 * h).powi(2)).collect();
        let mix: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
        let lhs = quadrature(&mix, h).unwrap();
        let rhs = a * quadrature(&f, h).unwrap() + b * quadrature(&g, h).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }
}

use dbo_core::diagnostics::{lyapunov_residual, max_l2_increase};
use dbo_core::pde::{cross_validate, pde_evolve, pde_rhs, sample_potential};
use dbo_core::types::{l2_norm_sq, one_gap_potential, random_potential, InitialData, RunConfig};
use dbo_core::FourierFunction;
use num_complex::Complex64;

fn config(alpha: f64, t_end: f64, grid: usize) -> RunConfig {
    let mut c = RunConfig::new(alpha, 16, t_end, InitialData::OneGap { r: 0.5 });
    c.grid = grid;
    c
}

#[test]
fn undamped_energy_is_conserved() {
    let u0 = one_gap_potential(256, 0.5).unwrap();
    let traj = pde_evolve(&u0, &config(0.0, 5.0, 256)).unwrap();
    let l2 = traj.channel("l2_norm_sq").unwrap();
    let drift = l2.iter().map(|v| (v - l2[0]).abs()).fold(0.0, f64::max);
    assert!(drift < 1e-8, "drift {drift}");
    assert!((l2[0] - l2_norm_sq(&u0)).abs() < 1e-12);
}

#[test]
fn fourth_order_in_time() {
    let u0 = random_potential(64, 4, 0.3, 0.5).unwrap();
    let run = |dt: f64| {
        let mut c = config(0.5, 1.0, 64);
        c.sample_dt = 1.0;
        c.pde_dt = Some(dt);
        pde_evolve(&u0, &c).unwrap().values.last().unwrap().clone()
    };
    let (a, b, c) = (run(8e-3), run(4e-3), run(2e-3));
    let d = |x: &[Complex64], y: &[Complex64]| x.iter().zip(y).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
    let order = (d(&a, &b) / d(&b, &c)).log2();
    assert!((order - 4.0).abs() < 0.5, "observed {order}");
}

#[test]
fn damped_energy_follows_mode_one_loss() {
    let u0 = one_gap_potential(256, 0.5).unwrap();
    let mut c = config(0.5, 5.0, 256);
    c.sample_dt = 0.01;
    let traj = pde_evolve(&u0, &c).unwrap();
    let r = lyapunov_residual(&traj, 0.5).unwrap();
    let worst = r.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "residual {worst}");
    assert!(max_l2_increase(&traj).unwrap() <= 1e-9);
}

#[test]
fn damping_touches_only_the_first_mode() {
    let u = random_potential(64, 8, 0.4, 0.6).unwrap();
    let free = pde_rhs(&u, 0.0).unwrap();
    let damped = pde_rhs(&u, 0.8).unwrap();
    for n in 0..=32i64 {
        let diff = damped.mode(n) - free.mode(n);
        let expect = if n.abs() == 1 { -0.4 * u.mode(n) } else { Complex64::new(0.0, 0.0) };
        assert!((diff - expect).norm() < 1e-15, "mode {n}");
    }
}

#[test]
fn dealiased_band_stays_empty() {
    let u0 = random_potential(64, 2, 0.5, 0.4).unwrap();
    let traj = pde_evolve(&u0, &config(0.2, 1.0, 64)).unwrap();
    assert_eq!(traj.values[0].len(), 21);
    let u = sample_potential(&traj, traj.len() - 1, 64).unwrap();
    let top: f64 = (22..=32).map(|n| u.mode(n).norm_sqr()).sum();
    assert!(top < 1e-10);
}

#[test]
fn zero_data_stays_zero() {
    let u0 = FourierFunction::zeros(64).unwrap();
    let mut c = config(0.5, 1.0, 64);
    c.n_modes = 8;
    let run = cross_validate(&u0, &c).unwrap();
    assert_eq!(run.report.max_action_error, 0.0);
    assert_eq!(run.report.max_zeta_error, 0.0);
}

#[test]
fn undamped_solvers_agree() {
    let u0 = one_gap_potential(128, 0.4).unwrap();
    let mut c = config(0.0, 2.0, 128);
    c.m_cut = Some(128);
    c.sample_dt = 0.5;
    let run = cross_validate(&u0, &c).unwrap();
    assert!(run.report.max_action_error < 1e-5, "{:?}", run.report);
    assert!(run.report.max_l2_mismatch < 1e-8);
}

#[test]
fn blow_up_is_reported() {
    let mut modes = vec![Complex64::new(0.0, 0.0); 33];
    modes[1] = Complex64::new(1e7, 0.0);
    let u0 = FourierFunction::from_modes(64, &modes).unwrap();
    let mut c = config(0.0, 1.0, 64);
    c.pde_dt = Some(1e-3);
    assert!(pde_evolve(&u0, &c).is_err());
}

use dbo_core::field::{frequencies, FieldWorkspace};
use dbo_core::integrator::{evolve, sample_times, step};
use dbo_core::types::{InitialData, RunConfig};
use dbo_core::{BirkhoffState, Error};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};

fn random_state(seed: u64, n: usize, norm: f64) -> BirkhoffState {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * 0.5f64.powi(k as i32))
        .collect();
    let s = (z.iter().enumerate().map(|(k, v)| (k + 1) as f64 * v.norm_sqr()).sum::<f64>()).sqrt();
    BirkhoffState::new(0.0, z.iter().map(|v| v * (norm / s)).collect()).unwrap()
}

fn config(alpha: f64, n: usize, t_end: f64, tol: f64) -> RunConfig {
    let mut c = RunConfig::new(alpha, n, t_end, InitialData::OneGap { r: 0.0 });
    c.tol = tol;
    c
}

fn max_dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn undamped_flow_rotates_each_coordinate() {
    let st = random_state(5, 12, 0.8);
    let traj = evolve(&st, &config(0.0, 12, 10.0, 1e-10)).unwrap();
    let omega = frequencies(&st.actions());
    let (mut drift, mut phase) = (0.0f64, 0.0f64);
    for (i, &t) in traj.times.iter().enumerate() {
        for k in 0..12 {
            let z = traj.values[i][k];
            drift = drift.max((z.norm_sqr() - st.zeta[k].norm_sqr()).abs());
            let exact = Complex64::from_polar(1.0, omega[k] * t) * st.zeta[k];
            if st.zeta[k].norm() > 1e-3 {
                phase = phase.max((z / exact).arg().abs());
            }
        }
    }
    assert!(drift < 1e-8, "action drift {drift}");
    assert!(phase < 1e-6 * 10.0, "phase error {phase}");
}

#[test]
fn error_shrinks_with_tolerance() {
    let st = random_state(9, 8, 0.9);
    let reference = evolve(&st, &config(0.5, 8, 2.0, 1e-13)).unwrap();
    let last = |tol: f64| {
        let t = evolve(&st, &config(0.5, 8, 2.0, tol)).unwrap();
        max_dist(t.values.last().unwrap(), reference.values.last().unwrap())
    };
    let (coarse, fine) = (last(1e-6), last(1e-9));
    assert!(coarse < 1e-4 && fine < 1e-7, "{coarse} {fine}");
    assert!(fine < coarse / 30.0, "{coarse} {fine}");
}

#[test]
fn runs_are_bit_identical() {
    let st = random_state(3, 10, 1.0);
    let cfg = config(0.7, 10, 3.0, 1e-9);
    let a = evolve(&st, &cfg).unwrap();
    let b = evolve(&st, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn single_step_is_fifth_order_locally() {
    let st = random_state(11, 6, 0.7);
    // local error of one step of size h against two of size h/2 falls like h⁵
    let defect = |h: f64| {
        let (full, _) = step(&st, h, 0.5).unwrap();
        let (mid, _) = step(&st, h / 2.0, 0.5).unwrap();
        let (two, _) = step(&mid, h / 2.0, 0.5).unwrap();
        max_dist(&full.zeta, &two.zeta)
    };
    let (d1, d2) = (defect(0.04), defect(0.02));
    let order = (d1 / d2).log2();
    assert!(order > 4.5 && order < 7.0, "observed {order}");
}

#[test]
fn step_is_consistent_with_the_field() {
    let st = random_state(13, 6, 0.7);
    let h = 1e-4;
    let (next, _) = step(&st, h, 0.5).unwrap();
    let f = dbo_core::vector_field(&st, 0.5).unwrap();
    for k in 0..6 {
        let fd = (next.zeta[k] - st.zeta[k]) / h;
        assert!((fd - f[k]).norm() < 1e-2 * (1.0 + f[k].norm()));
    }
}

#[test]
fn one_gap_action_rate_from_short_integration() {
    let alpha = 0.5;
    for r in [0.25, 0.5, 0.75] {
        let st = BirkhoffState::one_gap(8, r).unwrap();
        let g = st.zeta[0].norm_sqr();
        let expect = -alpha * g / (1.0 + g);
        let ws = FieldWorkspace::new(&st).unwrap();
        assert!((ws.dgamma_dt(alpha)[0] - expect).abs() < 1e-12);
        let diff = |h: f64| {
            let mut cfg = config(alpha, 8, h, 1e-13);
            cfg.sample_dt = h;
            let t = evolve(&st, &cfg).unwrap();
            (t.values.last().unwrap()[0].norm_sqr() - g) / h
        };
        // Richardson on forward differences
        let h = 1e-3;
        let fd = 2.0 * diff(h / 2.0) - diff(h);
        assert!((fd - expect).abs() < 1e-6, "r = {r}: {fd} vs {expect}");
    }
}

#[test]
fn sample_grid_ends_at_t_end() {
    let t = sample_times(0.0, 1.0, 0.3);
    assert_eq!(t.first(), Some(&0.0));
    assert_eq!(t.last(), Some(&1.0));
    assert!(t.windows(2).all(|w| w[1] > w[0]));
    let traj = evolve(&BirkhoffState::zeros(4), &config(0.5, 4, 1.0, 1e-10)).unwrap();
    assert_eq!(traj.times.len(), sample_times(0.0, 1.0, 0.05).len());
    assert!(traj.values.iter().flatten().all(|z| z.norm() == 0.0));
}

#[test]
fn mismatched_sizes_are_rejected() {
    let st = random_state(1, 5, 0.5);
    assert!(matches!(evolve(&st, &config(0.5, 6, 1.0, 1e-10)), Err(Error::InvalidInput(_))));
    let mut bad = config(0.5, 5, 1.0, 1e-10);
    bad.tol = -1.0;
    assert!(matches!(evolve(&st, &bad), Err(Error::InvalidConfig(_))));
}

#[test]
fn damping_decreases_norm_monotonically() {
    let st = random_state(21, 10, 1.2);
    let traj = evolve(&st, &config(1.0, 10, 5.0, 1e-10)).unwrap();
    let l2 = traj.channel("l2_norm_sq").unwrap();
    assert!(l2.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(l2.last().unwrap() < &l2[0]);
}

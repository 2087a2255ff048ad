use dbo_core::birkhoff::{birkhoff_forward, build_lax_matrix};
use dbo_core::diagnostics::{
    diagnose, gap_product_integral, generating_function, generating_function_of, lasalle_check, limiting_actions,
    ps_functional, ps_rate, ps_rate_double_sum, ps_weights,
};
use dbo_core::field::FieldWorkspace;
use dbo_core::integrator::evolve;
use dbo_core::pde::pde_evolve;
use dbo_core::types::{one_gap_potential, random_potential, sobolev_norm_sq, InitialData, RunConfig};
use dbo_core::{BirkhoffState, Error};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn random_state(seed: u64, n: usize, norm: f64) -> BirkhoffState {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * 0.7f64.powi(k as i32))
        .collect();
    let s = (z.iter().enumerate().map(|(k, v)| (k + 1) as f64 * v.norm_sqr()).sum::<f64>()).sqrt();
    BirkhoffState::new(0.0, z.iter().map(|v| v * (norm / s)).collect()).unwrap()
}

/// ⟨(L + μ)⁻¹1|1⟩ by a direct linear solve on the Galerkin matrix.
fn resolvent(a: &DMatrix<Complex64>, mu: f64) -> f64 {
    let n = a.nrows();
    let shifted = a + DMatrix::<Complex64>::identity(n, n) * Complex64::new(mu, 0.0);
    let mut e0 = DVector::<Complex64>::zeros(n);
    e0[0] = Complex64::new(1.0, 0.0);
    shifted.lu().solve(&e0).unwrap()[0].re
}

#[test]
fn generating_function_is_the_resolvent() {
    for seed in [1, 2, 3] {
        let u = random_potential(256, seed, 0.4, 0.5).unwrap();
        let (_, spec) = birkhoff_forward(&u, 16, 128).unwrap();
        let a = build_lax_matrix(&u, 128);
        for mu in [0.5 - spec.lambda[0].min(0.0), 3.0, 40.0] {
            let h = generating_function_of(&spec, mu).unwrap();
            let r = resolvent(&a, mu);
            assert!((h - r).abs() < 1e-8 * r.abs(), "seed {seed}, mu {mu}: {h} vs {r}");
        }
    }
}

#[test]
fn generating_function_large_parameter_asymptotics() {
    // μH_μ = 1 + ∥u∥²/(2μ²) + O(μ⁻³); the μ⁻² coefficient is recovered by Richardson
    let u = one_gap_potential(256, 0.5).unwrap();
    let (_, spec) = birkhoff_forward(&u, 16, 256).unwrap();
    let half_norm = 0.5 * dbo_core::types::l2_norm_sq(&u);
    let coef = |mu: f64| (mu * generating_function_of(&spec, mu).unwrap() - 1.0) * mu * mu;
    let mut prev = f64::NAN;
    for mu in [1e2, 1e3, 1e4] {
        let c = coef(mu);
        assert!((c - half_norm).abs() < 5e-2 * half_norm, "mu {mu}: {c} vs {half_norm}");
        prev = c;
    }
    let rich = (10.0 * coef(1e3) - coef(1e2)) / 9.0;
    assert!((rich - half_norm).abs() < (prev - half_norm).abs().max(1e-6) * 10.0);
}

#[test]
fn generating_function_rejects_the_pole() {
    let r = generating_function(&[0.1], &[1.0, 1.0], &[-0.1, 1.0], 0.1);
    assert!(matches!(r, Err(Error::Pole { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ps_rate_forms_agree(seed in 0u64..10_000, n in 2usize..20, s in 0.0f64..2.0, alpha in 0.0f64..2.0) {
        let st = random_state(seed, n, 1.0);
        let ws = FieldWorkspace::new(&st).unwrap();
        let fast = ps_rate(&ws, s, alpha);
        let slow = ps_rate_double_sum(&st, &ws, s, alpha);
        // Σ wₙ dγₙ/dt from the action rates
        let chain: f64 = ps_weights(s, n).iter().zip(ws.dgamma_dt(alpha)).map(|(w, d)| w * d).sum();
        let scale = fast.abs().max(1e-14);
        prop_assert!((fast - slow).abs() < 1e-10 * scale + 1e-16);
        prop_assert!((fast - chain).abs() < 1e-10 * scale + 1e-16);
    }

    #[test]
    fn ps_is_monotone_in_order_and_equivalent_to_sobolev(seed in 0u64..10_000, n in 2usize..30, s in 0.0f64..2.0) {
        let st = random_state(seed, n, 1.0);
        let (lo, hi) = (ps_functional(&st, s * 0.5), ps_functional(&st, s));
        prop_assert!(lo <= hi * (1.0 + 1e-12));
        // (n−1)^{2s+1}/(2s+1) ≤ wₙ ≤ n^{2s+1}/(2s+1)
        let d = 2.0 * s + 1.0;
        let tail = BirkhoffState::new(0.0, st.zeta.iter().enumerate().map(|(k, z)| if k == 0 { Complex64::new(0.0, 0.0) } else { *z }).collect()).unwrap();
        prop_assert!(hi <= sobolev_norm_sq(&st, s) / d * (1.0 + 1e-12));
        prop_assert!(hi * (1.0 + 1e-12) >= sobolev_norm_sq(&tail, s) / (d * 2f64.powf(d)));
    }
}

fn run(alpha: f64, t_end: f64, st: &BirkhoffState) -> dbo_core::Trajectory {
    let mut c = RunConfig::new(alpha, st.n(), t_end, InitialData::OneGap { r: 0.0 });
    c.sample_dt = 0.1;
    evolve(st, &c).unwrap()
}

#[test]
fn undamped_actions_have_no_spread() {
    let st = random_state(7, 10, 0.9);
    let la = limiting_actions(&run(0.0, 20.0, &st), 0.2).unwrap();
    for k in 0..10 {
        assert!(la.spread[k] < 1e-9);
        assert!((la.mean[k] - st.zeta[k].norm_sqr()).abs() < 1e-9);
    }
    assert!(limiting_actions(&run(0.0, 0.5, &st), 0.2).is_err());
}

#[test]
fn gap_integral_separates_damped_from_undamped() {
    let st = random_state(8, 12, 0.9);
    let free = gap_product_integral(&run(0.0, 40.0, &st)).unwrap();
    let damped = gap_product_integral(&run(0.5, 40.0, &st)).unwrap();
    // a constant integrand puts 20% in the final fifth
    assert!((free.tail_fraction - 0.2).abs() < 0.01, "{free:?}");
    assert!(damped.tail_fraction < 0.05, "{damped:?}");
}

#[test]
fn lasalle_indicator_decays() {
    let st = random_state(12, 12, 0.9);
    let traj = run(0.5, 40.0, &st);
    let first = lasalle_check(&traj.state(0), 1e-3);
    let last = lasalle_check(&traj.last_state().unwrap(), 1e-3);
    assert!(!first.holds);
    assert!(last.max_product < 0.1 * first.max_product);
    let one = lasalle_check(&BirkhoffState::new(0.0, vec![Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.0)]).unwrap(), 1e-3);
    assert!(one.holds && one.max_product == 0.0);
}

#[test]
fn reports_pass_on_consistent_runs() {
    let st = random_state(4, 8, 0.8);
    for alpha in [0.0, 0.5] {
        let rep = diagnose(&run(alpha, 5.0, &st)).unwrap();
        assert!(rep.passed(), "{}", rep.summary());
    }
    let u0 = one_gap_potential(64, 0.4).unwrap();
    let mut c = RunConfig::new(0.5, 8, 2.0, InitialData::OneGap { r: 0.4 });
    c.grid = 64;
    c.sample_dt = 0.01;
    let rep = diagnose(&pde_evolve(&u0, &c).unwrap()).unwrap();
    assert!(rep.passed(), "{}", rep.summary());
}

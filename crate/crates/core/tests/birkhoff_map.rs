use dbo_core::birkhoff::{birkhoff_forward, build_lax_matrix};
use dbo_core::diagnostics::trace_sums;
use dbo_core::field::mode_one_projection;
use dbo_core::spectral::SpectralParams;
use dbo_core::types::{l2_norm_sq, one_gap_potential, random_potential, sobolev_norm_sq};
use dbo_core::FourierFunction;
use num_complex::Complex64;

fn smooth(seed: u64) -> FourierFunction {
    random_potential(256, seed, 0.4, 0.5).unwrap()
}

#[test]
fn one_gap_family_has_a_single_gap() {
    for r in [0.25, 0.5, 0.75] {
        let (st, spec) = birkhoff_forward(&one_gap_potential(256, r).unwrap(), 16, 128).unwrap();
        // Parseval: ∥u∥² = 2Σnγₙ, and only γ₁ survives
        let g1 = r * r / (1.0 - r * r);
        assert!((spec.gamma.gamma[0] - g1).abs() < 1e-9, "r = {r}");
        assert!(spec.gamma.gamma[1..16].iter().all(|g| *g <= 1e-9));
        assert!((st.zeta[0].norm_sqr() - g1).abs() < 1e-9);
    }
}

#[test]
fn parseval_matches_actions() {
    for seed in 0..4 {
        let u = smooth(seed);
        let (st, _) = birkhoff_forward(&u, 32, 256).unwrap();
        let lhs = 2.0 * sobolev_norm_sq(&st, 0.0);
        assert!((lhs - l2_norm_sq(&u)).abs() < 1e-9, "seed {seed}: {lhs} vs {}", l2_norm_sq(&u));
    }
}

#[test]
fn spectrum_invariants() {
    let (st, spec) = birkhoff_forward(&smooth(7), 16, 128).unwrap();
    assert!(spec.orthonormality_defect(40) < 1e-10);
    assert!(spec.eigvecs[(0, 0)].re > 0.0 && spec.eigvecs[(0, 0)].im.abs() < 1e-14);
    for n in 1..=17 {
        let s = spec.shift_overlap(n);
        assert!(s.re > 0.0 && s.im.abs() < 1e-12 * s.re.max(1.0));
    }
    for w in spec.lambda[..=64].windows(2) {
        assert!(w[1] - w[0] >= 1.0 - 1e-6);
    }
    // |ζₙ|² from the eigenvector equals the eigenvalue gap
    for n in 0..16 {
        assert!((st.zeta[n].norm_sqr() - spec.gamma.gamma[n]).abs() < 1e-8);
    }
}

#[test]
fn mode_one_is_reproduced_from_coordinates() {
    for seed in 10..14 {
        let u = smooth(seed);
        let (st, _) = birkhoff_forward(&u, 32, 256).unwrap();
        let p = SpectralParams::from_state(&st).unwrap();
        let got = mode_one_projection(&st, &p);
        assert!((got - u.mode(1)).norm() < 1e-6, "seed {seed}: {got} vs {}", u.mode(1));
    }
}

#[test]
fn trace_identities() {
    for seed in 20..24 {
        let u = smooth(seed);
        let (_, spec) = birkhoff_forward(&u, 16, 256).unwrap();
        let [s0, s1, s2] = trace_sums(&spec);
        assert!((s0 - 1.0).abs() < 1e-6);
        assert!(s1.abs() < 1e-6);
        assert!((s2 - 0.5 * l2_norm_sq(&u)).abs() < 1e-5);
    }
}

#[test]
fn galerkin_size_converges() {
    let u = smooth(3);
    let (a, _) = birkhoff_forward(&u, 16, 128).unwrap();
    let (b, _) = birkhoff_forward(&u, 16, 256).unwrap();
    for (x, y) in a.zeta.iter().zip(&b.zeta) {
        assert!((x - y).norm() < 1e-8);
    }
}

#[test]
fn translation_rotates_coordinates() {
    // u(· − s) has û(n)e^{−ins}; the coordinates pick up e^{−ins} as well
    let u = smooth(5);
    let s = 0.7;
    let modes: Vec<Complex64> = u
        .modes()
        .iter()
        .enumerate()
        .map(|(n, c)| c * Complex64::from_polar(1.0, -(n as f64) * s))
        .collect();
    let shifted = FourierFunction::from_modes(256, &modes).unwrap();
    let (a, _) = birkhoff_forward(&u, 12, 128).unwrap();
    let (b, _) = birkhoff_forward(&shifted, 12, 128).unwrap();
    for (n, (x, y)) in a.zeta.iter().zip(&b.zeta).enumerate() {
        let expect = x * Complex64::from_polar(1.0, -((n + 1) as f64) * s);
        assert!((expect - y).norm() < 1e-10, "n = {}", n + 1);
    }
}

#[test]
fn lax_matrix_is_hermitian_for_real_potentials() {
    let a = build_lax_matrix(&smooth(9), 100);
    assert_eq!(a.adjoint(), a);
}

#[test]
fn spectrum_dump_shape() {
    let (_, spec) = birkhoff_forward(&one_gap_potential(128, 0.5).unwrap(), 4, 32).unwrap();
    let json = serde_json::to_value(spec.dump()).unwrap();
    assert_eq!(json["zeta"].as_array().unwrap().len(), 4);
    assert_eq!(json["zeta"][0].as_array().unwrap().len(), 2);
    assert_eq!(json["gamma"].as_array().unwrap().len(), 4);
    assert_eq!(json["kappa"].as_array().unwrap().len(), 5);
}

//! Direct Birkhoff map: spectrum of the truncated Lax operator D − T_u on the
//! Hardy space and extraction of phase-normalized coordinates ζₙ.
//!
//! The Lax matrix acts on Fourier coefficients h(0..=M_cut):
//! (L h)(n) = n h(n) − Σₘ û(n−m) h(m). Modes of `u` outside the stored band
//! (and the Nyquist mode) are treated as zero, so M_cut may exceed M/2.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{gamma_from_lambda, SpectralParams};
use crate::types::{Actions, BirkhoffState, FourierFunction, RunConfig};

/// Below this magnitude ⟨fₙ|S fₙ₋₁⟩ cannot fix the phase of fₙ.
const PHASE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LaxSpectrum {
    /// All M_cut+1 eigenvalues, ascending.
    pub lambda: Vec<f64>,
    /// Column n holds the Fourier coefficients f̂ₙ(0..=M_cut).
    pub eigvecs: DMatrix<Complex64>,
    /// γ₁..γ_K over the resolved part of the spectrum, K ≥ N.
    pub gamma: Actions,
    /// κ₀..κ_{K+1} from the product formula.
    pub kappa: Vec<f64>,
    pub zeta: Vec<Complex64>,
    pub m_cut: usize,
}

impl LaxSpectrum {
    /// ⟨1|fₙ⟩ = conj(f̂ₙ(0)).
    pub fn constant_projection(&self, n: usize) -> Complex64 {
        self.eigvecs[(0, n)].conj()
    }

    /// ⟨fₙ|S fₙ₋₁⟩ with S the shift h(j) ↦ h(j−1).
    pub fn shift_overlap(&self, n: usize) -> Complex64 {
        shift_overlap(&self.eigvecs, n)
    }

    /// Largest deviation of the leading `cols` eigenvectors from orthonormality.
    pub fn orthonormality_defect(&self, cols: usize) -> f64 {
        let v = self.eigvecs.columns(0, cols.min(self.eigvecs.ncols()));
        let gram = v.adjoint() * v;
        let mut worst: f64 = 0.0;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).norm());
            }
        }
        worst
    }

    pub fn dump(&self) -> SpectrumDump {
        let n = self.zeta.len();
        SpectrumDump {
            m_cut: self.m_cut,
            lambda: self.lambda[..=n + 1].to_vec(),
            gamma: self.gamma.gamma[..n].to_vec(),
            kappa: self.kappa[..=n].to_vec(),
            zeta: self.zeta.iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

/// Serializable summary of a forward map: the first N+2 eigenvalues, γ₁..γ_N,
/// κ₀..κ_N and ζ₁..ζ_N as [re, im] pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumDump {
    pub m_cut: usize,
    pub lambda: Vec<f64>,
    pub gamma: Vec<f64>,
    pub kappa: Vec<f64>,
    pub zeta: Vec<[f64; 2]>,
}

/// A[n][m] = n δ_{nm} − û(n−m), 0 ≤ n, m ≤ M_cut.
pub fn build_lax_matrix(u: &FourierFunction, m_cut: usize) -> DMatrix<Complex64> {
    let band = u.max_mode() as i64;
    let coeff = |k: i64| {
        if k.abs() >= band {
            Complex64::new(0.0, 0.0)
        } else {
            u.mode(k)
        }
    };
    DMatrix::from_fn(m_cut + 1, m_cut + 1, |i, j| {
        let diag = if i == j { i as f64 } else { 0.0 };
        Complex64::new(diag, 0.0) - coeff(i as i64 - j as i64)
    })
}

fn shift_overlap(v: &DMatrix<Complex64>, n: usize) -> Complex64 {
    let rows = v.nrows();
    (1..rows).map(|j| v[(j, n)] * v[(j - 1, n - 1)].conj()).sum()
}

fn rotate_column(v: &mut DMatrix<Complex64>, n: usize, phase: Complex64) {
    for x in v.column_mut(n).iter_mut() {
        *x *= phase;
    }
}

/// Makes ⟨1|f₀⟩ > 0 and ⟨fₙ|S fₙ₋₁⟩ > 0 for n ≥ 1, recursively.
fn normalize_phases(v: &mut DMatrix<Complex64>) {
    for n in 0..v.ncols() {
        let anchor = if n == 0 { v[(0, 0)] } else { shift_overlap(v, n) };
        let phase = if anchor.norm() >= PHASE_FLOOR {
            anchor.conj() / anchor.norm()
        } else {
            log::warn!("eigenvector {n}: phase anchor {:.3e} below floor, using largest entry", anchor.norm());
            let big = v
                .column(n)
                .iter()
                .copied()
                .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                .unwrap_or(Complex64::new(1.0, 0.0));
            big.conj() / big.norm()
        };
        rotate_column(v, n, phase);
    }
}

/// Φ(u) truncated to ζ₁..ζ_N, using the Galerkin size `m_cut` ≥ 4N.
pub fn birkhoff_forward(u: &FourierFunction, n: usize, m_cut: usize) -> Result<(BirkhoffState, LaxSpectrum)> {
    if n == 0 {
        return Err(Error::InvalidInput("N must be >= 1".into()));
    }
    if m_cut < 4 * n {
        return Err(Error::InvalidInput(format!("M_cut = {m_cut} is below 4N = {}", 4 * n)));
    }
    let a = build_lax_matrix(u, m_cut);
    let eig = nalgebra::linalg::SymmetricEigen::try_new(a, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen(format!("no convergence at M_cut = {m_cut}")))?;

    let mut order: Vec<usize> = (0..=m_cut).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lambda: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigvecs = DMatrix::from_fn(m_cut + 1, m_cut + 1, |r, c| eig.eigenvectors[(r, order[c])]);
    normalize_phases(&mut eigvecs);

    // The upper half of a Galerkin spectrum feels the cutoff; only the lower
    // half is treated as resolved.
    let resolved = (m_cut / 2).max(n);
    let gamma = gamma_from_lambda(&lambda[..=resolved])?;
    let kappa = SpectralParams::new(&gamma)?.kappa;

    let zeta: Vec<Complex64> = (1..=n).map(|k| eigvecs[(0, k)].conj() / kappa[k].sqrt()).collect();
    for (k, z) in zeta.iter().enumerate() {
        let g = gamma.gamma[k];
        let dev = (z.norm_sqr() - g).abs();
        if dev > 1e-8 * (1.0 + g) {
            log::warn!("|zeta_{}|^2 = {:.3e} vs gap {:.3e}", k + 1, z.norm_sqr(), g);
        }
    }
    let state = BirkhoffState::new(0.0, zeta.clone())?;
    Ok((
        state,
        LaxSpectrum {
            lambda,
            eigvecs,
            gamma,
            kappa,
            zeta,
            m_cut,
        },
    ))
}

/// Initial potential on the configured grid and its Birkhoff coordinates.
pub fn initial_state(config: &RunConfig) -> Result<(BirkhoffState, FourierFunction)> {
    let u = config.initial_data.potential(config.grid)?;
    let (state, _) = birkhoff_forward(&u, config.n_modes, config.m_cut())?;
    Ok((state, u))
}

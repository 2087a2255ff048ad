//! Action-only spectral quantities λₙ, κₙ, μₙ, aₙ and the shift-matrix
//! entries M_{n,p} = ⟨f_p|S f_n⟩.
//!
//! Arrays are stored up to index N+1 so that formulas reaching one step past
//! the truncation need no special cases: λ_{N+1} = N+1 and μ_{N+1} = 1 exactly.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::types::{Actions, BirkhoffState};

/// Above this truncation order the products are accumulated as sums of logs.
const LOG_SPACE_THRESHOLD: usize = 256;
/// Product factors below this value trigger a conditioning warning.
const SMALL_FACTOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralParams {
    n: usize,
    gamma: Vec<f64>,
    /// λ₀..λ_{N+1}
    pub lambda: Vec<f64>,
    /// κ₀..κ_{N+1}
    pub kappa: Vec<f64>,
    /// μ₀..μ_{N+1}; μ₀ is unused and stored as 1.
    pub mu: Vec<f64>,
    /// a₀..a_N
    pub projection_weights: Vec<f64>,
}

impl SpectralParams {
    pub fn new(actions: &Actions) -> Result<Self> {
        let n = actions.n();
        let gamma: Vec<f64> = (0..=n + 1).map(|k| actions.gamma(k)).collect();
        let lambda = lambda_from_gamma(actions);
        let kappa = kappa_impl(&gamma, &lambda, n)?;
        let mu = mu_impl(&gamma, &lambda, n)?;
        let projection_weights = (0..=n).map(|k| (mu[k + 1] * kappa[k] / kappa[k + 1]).sqrt()).collect();
        Ok(Self {
            n,
            gamma,
            lambda,
            kappa,
            mu,
            projection_weights,
        })
    }

    pub fn from_state(state: &BirkhoffState) -> Result<Self> {
        Self::new(&state.actions())
    }

    /// Truncation order N.
    pub fn n(&self) -> usize {
        self.n
    }

    /// γₖ with γ₀ = 1 and zero past the truncation.
    pub fn gamma(&self, k: usize) -> f64 {
        if k <= self.n + 1 {
            self.gamma[k]
        } else {
            0.0
        }
    }

    /// λₖ for any k; equals k past the truncation.
    pub fn lambda(&self, k: usize) -> f64 {
        if k <= self.n + 1 {
            self.lambda[k]
        } else {
            k as f64
        }
    }
}

/// λₙ = n − Σ_{k>n} γₖ for n = 0..=N+1, by one backward pass.
pub fn lambda_from_gamma(actions: &Actions) -> Vec<f64> {
    let n = actions.n();
    let mut lambda = vec![0.0; n + 2];
    let mut tail = 0.0;
    for k in (0..=n + 1).rev() {
        lambda[k] = k as f64 - tail;
        if k >= 1 {
            tail += actions.gamma(k);
        }
    }
    lambda
}

/// γₙ = λₙ − λₙ₋₁ − 1 for n = 1..len−1, clamped at zero.
///
/// Spacings below 1 − 1e−6 mean the input is not a Lax spectrum at this
/// resolution and are reported as a truncation error.
pub fn gamma_from_lambda(lambda: &[f64]) -> Result<Actions> {
    if lambda.len() < 2 {
        return Err(Error::InvalidInput("need at least two eigenvalues".into()));
    }
    let mut gamma = Vec::with_capacity(lambda.len() - 1);
    for k in 1..lambda.len() {
        let spacing = lambda[k] - lambda[k - 1];
        if spacing < 1.0 - 1e-6 {
            return Err(Error::Truncation {
                index: k,
                spacing,
                m_cut: lambda.len() - 1,
            });
        }
        let g = spacing - 1.0;
        if g < -1e-10 {
            log::warn!("gamma_{k} = {g:.3e} clamped to zero");
        }
        gamma.push(g.max(0.0));
    }
    Actions::new(gamma)
}

pub fn kappa_from_gamma(actions: &Actions) -> Result<Vec<f64>> {
    Ok(SpectralParams::new(actions)?.kappa)
}

pub fn mu_from_gamma(actions: &Actions) -> Result<Vec<f64>> {
    Ok(SpectralParams::new(actions)?.mu)
}

pub fn projection_weights_from_params(params: &SpectralParams) -> &[f64] {
    &params.projection_weights
}

/// Accumulates a product of positive factors, in log space for large N.
struct Product {
    log_space: bool,
    value: f64,
}

impl Product {
    fn new(n: usize) -> Self {
        let log_space = n > LOG_SPACE_THRESHOLD;
        Self {
            log_space,
            value: if log_space { 0.0 } else { 1.0 },
        }
    }

    fn mul(&mut self, factor: f64, what: &str, k: usize, p: usize) -> Result<()> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::Consistency(format!("{what}_{k}: factor {p} is {factor}")));
        }
        if factor < SMALL_FACTOR {
            log::warn!("{what}_{k}: factor {p} = {factor:.3e} is ill-conditioned");
        }
        if self.log_space {
            self.value += factor.ln();
        } else {
            self.value *= factor;
        }
        Ok(())
    }

    fn finish(self) -> f64 {
        if self.log_space {
            self.value.exp()
        } else {
            self.value
        }
    }
}

fn kappa_impl(gamma: &[f64], lambda: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut kappa = vec![0.0; n + 2];
    for k in 0..=n + 1 {
        let mut prod = Product::new(n);
        for p in (1..=n).filter(|&p| p != k) {
            prod.mul(1.0 - gamma[p] / (lambda[p] - lambda[k]), "kappa", k, p)?;
        }
        kappa[k] = if k == 0 {
            prod.finish()
        } else {
            prod.finish() / (lambda[k] - lambda[0])
        };
    }
    Ok(kappa)
}

fn mu_impl(gamma: &[f64], lambda: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut mu = vec![1.0; n + 2];
    for k in 1..=n + 1 {
        let mut prod = Product::new(n);
        prod.mul(1.0 - gamma[k] / (lambda[k] - lambda[0]), "mu", k, k)?;
        for p in (1..=n).filter(|&p| p != k) {
            prod.mul(1.0 - gamma[p] / (lambda[p] - lambda[k]), "mu", k, p)?;
            prod.mul(1.0 / (1.0 - gamma[p] / (lambda[p] - lambda[k - 1] - 1.0)), "mu", k, p)?;
        }
        mu[k] = prod.finish();
    }
    Ok(mu)
}

/// M_{n,p} = ⟨f_p|S f_n⟩ for 0 ≤ n, p.
pub fn m_entry(n: usize, p: usize, state: &BirkhoffState, params: &SpectralParams) -> Complex64 {
    let sqrt_mu = params.mu.get(n + 1).copied().unwrap_or(1.0).sqrt();
    if p == n + 1 {
        return Complex64::new(sqrt_mu, 0.0);
    }
    let z_next = state.zeta(n + 1);
    if z_next == Complex64::new(0.0, 0.0) {
        return Complex64::new(0.0, 0.0);
    }
    let kappa = |k: usize| params.kappa[k.min(params.n + 1)];
    let ratio = (kappa(p) / kappa(n + 1)).sqrt();
    sqrt_mu * ratio * state.zeta(p).conj() * z_next / (params.lambda(p) - params.lambda(n) - 1.0)
}

//! The damped flow written in Birkhoff coordinates.
//!
//! Notation: Xₖ = conj(ζₖ)ζₖ₊₁ and Yₖ = conj(Xₖ), with ζ₀ = 1 and ζₖ = 0 past
//! N, so Xₖ = 0 for k ≥ N. aₖ = √(μₖ₊₁κₖ/κₖ₊₁), mₖ = −aₖXₖ and P = Σmₖ is
//! the first Fourier coefficient ⟨u|e^{ix}⟩.
//!
//! The derivative of ζₙ = ⟨1|fₙ⟩/√κₙ splits into
//! * the logarithmic derivative of κₙ, packed as δκₙ = d ln κₙ.cos − i d ln κₙ.sin,
//! * the part of d fₙ along fₙ, whose imaginary part is carried by c±ₙ,
//! * the part orthogonal to fₙ, carried by b±ₙ.
//!
//! Every piece is a real coefficient table contracted with Xₖ or Yₖ. Tables
//! with a sum over a second index are precomputed so a full evaluation costs
//! O(N²).

use num_complex::Complex64;

use crate::error::Result;
use crate::spectral::SpectralParams;
use crate::types::{Actions, BirkhoffState};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Per-state cache of spectral parameters and all coefficient tables.
#[derive(Debug, Clone)]
pub struct FieldWorkspace {
    pub params: SpectralParams,
    /// ζ₀..ζ_{N+1}
    zeta: Vec<Complex64>,
    /// X₀..X_N
    x: Vec<Complex64>,
    /// m₀..m_N
    pub m: Vec<Complex64>,
    /// P = Σ mₖ
    pub sum_m: Complex64,
    /// Row n (0..=N) holds the coefficients of δκₙ against X₀..X_{N−1}.
    a_rows: Vec<Vec<f64>>,
    /// Coefficient of X₀ in c⁺ₙ, common to all n.
    c_plus_ground: f64,
    /// Coefficient of Yⱼ (j ≥ 1) in c⁻ₙ, common to all n.
    c_minus_weights: Vec<f64>,
    /// c⁺ band coefficients, index k = 1..=N.
    c_plus_band: Vec<f64>,
    /// c⁻ band coefficients, index k = 1..=N.
    c_minus_band: Vec<f64>,
    /// S⁺ₗ and S⁻ₗ, l = 1..=N.
    s_plus: Vec<Complex64>,
    s_minus: Vec<Complex64>,
    /// Coefficients of ζₙ₋₁ in b⁻ₙ and of ζₙ₊₁ in b⁺ₙ, n = 1..=N.
    b_minus_lower: Vec<f64>,
    b_plus_upper: Vec<f64>,
}

/// Real coefficient tables, exported for inspection and bounds checks.
#[derive(Debug, Clone)]
pub struct CoefficientTables {
    /// δκₙ = Σₖ A[n][k] Xₖ, n = 0..=N, k = 0..N.
    pub a_kappa: Vec<Vec<f64>>,
    /// Coefficients of ζₙ₋₁ in b⁻ₙ and of ζₙ₊₁ in b⁺ₙ, at index n−1.
    pub b_minus_lower: Vec<f64>,
    pub b_plus_upper: Vec<f64>,
    /// B[n−1][k] for n = 1..=N, k = 0..N; zero for k ∈ {n−1, n}.
    pub b_minus_tail: Vec<Vec<f64>>,
    pub c_plus_ground: f64,
    pub c_minus_weights: Vec<f64>,
    pub c_plus_band: Vec<f64>,
    pub c_minus_band: Vec<f64>,
}

impl FieldWorkspace {
    pub fn new(state: &BirkhoffState) -> Result<Self> {
        let params = SpectralParams::from_state(state)?;
        Ok(Self::with_params(state, params))
    }

    pub fn with_params(state: &BirkhoffState, params: SpectralParams) -> Self {
        let n = state.n();
        let zeta: Vec<Complex64> = (0..=n + 1).map(|k| state.zeta(k)).collect();
        let x: Vec<Complex64> = (0..=n).map(|k| zeta[k].conj() * zeta[k + 1]).collect();
        let m: Vec<Complex64> = (0..=n).map(|k| -params.projection_weights[k] * x[k]).collect();
        let sum_m = m.iter().sum();
        let mut ws = Self {
            params,
            zeta,
            x,
            m,
            sum_m,
            a_rows: Vec::new(),
            c_plus_ground: 0.0,
            c_minus_weights: Vec::new(),
            c_plus_band: Vec::new(),
            c_minus_band: Vec::new(),
            s_plus: Vec::new(),
            s_minus: Vec::new(),
            b_minus_lower: Vec::new(),
            b_plus_upper: Vec::new(),
        };
        ws.a_rows = (0..=n).map(|row| ws.kappa_row(row)).collect();
        ws.build_parallel_tables();
        ws.build_perp_tables();
        ws
    }

    /// Truncation order N.
    pub fn n(&self) -> usize {
        self.zeta.len() - 2
    }

    fn lam(&self, k: usize) -> f64 {
        self.params.lambda(k)
    }

    fn gam(&self, k: usize) -> f64 {
        self.params.gamma(k)
    }

    fn kap(&self, k: usize) -> f64 {
        self.params.kappa[k]
    }

    fn mu(&self, k: usize) -> f64 {
        self.params.mu[k]
    }

    fn a(&self, k: usize) -> f64 {
        self.params.projection_weights[k]
    }

    fn y(&self, k: usize) -> Complex64 {
        self.x[k].conj()
    }

    /// Coefficients of δκ_row against X₀..X_{N−1}.
    ///
    /// With Δₚ = λₚ − λ_row and wₚ = 1/(1 − γₚ/Δₚ), the differential of ln κ
    /// contributes through mₚ₋₁ − mₚ (the derivative of γₚ) and through
    /// the shifts of λ; collecting the coefficient of each mₖ gives the three
    /// cases k = 0, k = row and generic k.
    fn kappa_row(&self, row: usize) -> Vec<f64> {
        let n = self.n();
        let delta = |p: usize| self.lam(p) - self.lam(row);
        let w = |p: usize| 1.0 / (1.0 - self.gam(p) / delta(p));
        let mut out = vec![0.0; n];
        let curvature: f64 = (1..=n)
            .filter(|&p| p != row)
            .map(|p| w(p) * self.gam(p) / (delta(p) * delta(p)))
            .sum();
        let to_ground = self.lam(row) - self.lam(0);
        for (k, slot) in out.iter_mut().enumerate() {
            let a = self.a(k);
            *slot = if row == 0 {
                if k == 0 {
                    -a * curvature + a * w(1) / delta(1)
                } else {
                    let dk = delta(k);
                    a * self.gam(k) * w(k) / (dk * dk) - a * w(k) / dk + a * w(k + 1) / delta(k + 1)
                }
            } else if k == 0 {
                let edge = if row != 1 { a * w(1) / delta(1) } else { 0.0 };
                a / to_ground + edge
            } else if k == row {
                -a / to_ground - a * curvature + a * w(row + 1) / delta(row + 1)
            } else {
                let dk = delta(k);
                let next = if k + 1 != row { a * w(k + 1) / delta(k + 1) } else { 0.0 };
                a * self.gam(k) * w(k) / (dk * dk) - a * w(k) / dk + next
            };
        }
        out
    }

    fn build_parallel_tables(&mut self) {
        let n = self.n();

        // Coefficient of X₀ in every c⁺ₙ.
        let tail: f64 = (2..=n)
            .map(|p| {
                let d = self.lam(p) - self.lam(0);
                self.kap(p) * self.gam(p) / (d * (d - 1.0))
            })
            .sum();
        self.c_plus_ground = (self.mu(1) * self.kap(1) / self.kap(0)).sqrt() / (1.0 + self.gam(1))
            + (self.mu(1) / (self.kap(0) * self.kap(1))).sqrt() * tail;

        // Coefficient of Yⱼ, j ≥ 1, in every c⁻ₙ.
        self.c_minus_weights = (0..n)
            .map(|j| {
                if j == 0 {
                    return 0.0;
                }
                let d = self.lam(j) - self.lam(0);
                self.a(j) / (d * (-d - 1.0))
            })
            .collect();

        // Band coefficients multiplying X_{k−1} in c⁺ and Yₖ in c⁻.
        self.c_plus_band = (1..=n).map(|k| self.t_coeff(k)).collect();
        self.c_minus_band = (1..=n).map(|k| self.u_coeff(k)).collect();

        // Bulk sums S±ₗ.
        self.s_plus = (1..=n)
            .map(|l| {
                (0..n)
                    .filter(|&j| j + 1 != l && j != l)
                    .map(|j| {
                        let g = self.a(j)
                            / ((self.lam(j) - self.lam(l))
                                * (self.lam(j) - self.lam(l - 1) - 1.0)
                                * (self.lam(l) - self.lam(j) - 1.0));
                        g * self.x[j]
                    })
                    .sum()
            })
            .collect();
        self.s_minus = (1..=n)
            .map(|l| {
                (0..n)
                    .filter(|&j| j + 1 != l && j != l)
                    .map(|j| {
                        let g = self.a(j)
                            / ((self.lam(j) - self.lam(l - 1))
                                * (self.lam(l) - self.lam(j) - 1.0)
                                * (self.lam(j) - self.lam(l - 1) - 1.0));
                        g * self.y(j)
                    })
                    .sum()
            })
            .collect();
    }

    /// Tₖ/√μₖ: coefficient of −X_{k−1} in c⁺ₙ for k ≤ n.
    fn t_coeff(&self, k: usize) -> f64 {
        let n = self.n();
        let (gk, gk1) = (self.gam(k), self.gam(k - 1));
        let mut t = self.mu(k) / (1.0 + gk) * (self.kap(k - 1) / self.kap(k)).sqrt();
        if k >= 2 {
            t += self.mu(k - 1) / ((1.0 + gk1) * (1.0 + gk + gk1)) * (self.kap(k) / self.kap(k - 1)).sqrt();
        }
        let root = (self.kap(k) * self.kap(k - 1)).sqrt();
        let bulk: f64 = (0..n)
            .filter(|&p| p + 2 != k && p + 1 != k)
            .map(|p| {
                self.mu(p + 1) * root * self.gam(p + 1)
                    / (self.kap(p + 1)
                        * (self.lam(p) - self.lam(k - 1))
                        * (self.lam(k) - self.lam(p) - 1.0)
                        * (self.lam(k - 1) - self.lam(p) - 1.0))
            })
            .sum();
        (t - bulk) / self.mu(k).sqrt()
    }

    /// Uₖ/√μₖ: coefficient of −Yₖ in c⁻ₙ for k ≤ n.
    fn u_coeff(&self, k: usize) -> f64 {
        let n = self.n();
        let (gk, gk1) = (self.gam(k), self.gam(k + 1));
        let ratio = (self.kap(k + 1) / self.kap(k)).sqrt();
        let mut inner = ratio / ((1.0 + gk1 + gk) * (1.0 + gk1)) + 1.0 / (ratio * (1.0 + gk));
        let root = (self.kap(k) * self.kap(k + 1)).sqrt();
        inner += (0..=n)
            .filter(|&p| p != k && p != k + 1)
            .map(|p| {
                self.kap(p) * self.gam(p)
                    / (root
                        * (self.lam(p) - self.lam(k))
                        * (self.lam(p) - self.lam(k - 1) - 1.0)
                        * (self.lam(p) - self.lam(k) - 1.0))
            })
            .sum::<f64>();
        (self.mu(k) * self.mu(k + 1)).sqrt() * inner / self.mu(k).sqrt()
    }

    fn build_perp_tables(&mut self) {
        let n = self.n();
        self.b_minus_lower = (1..=n)
            .map(|k| -(self.mu(k) * self.kap(k - 1) / self.kap(k)).sqrt() / (1.0 + self.gam(k)))
            .collect();
        self.b_plus_upper = (1..=n)
            .map(|k| {
                let tail: f64 = (0..=n)
                    .filter(|&p| p != k && p != k + 1)
                    .map(|p| {
                        let d = self.lam(p) - self.lam(k);
                        self.kap(p) * self.gam(p) / (d * (d - 1.0))
                    })
                    .sum();
                let sk1 = self.kap(k + 1).sqrt();
                (self.mu(k + 1).sqrt() / self.kap(k).sqrt()) * (sk1 / (1.0 + self.gam(k + 1)) + tail / sk1)
            })
            .collect();
    }

    /// Tail coefficient B_{n,k} of b⁻ₙ; zero for k ∈ {n−1, n}.
    fn b_coeff(&self, n: usize, k: usize) -> f64 {
        if k + 1 == n || k == n {
            return 0.0;
        }
        self.a(k) / ((self.lam(k) - self.lam(n)) * (self.lam(n) - self.lam(k) - 1.0))
    }

    /// ⟨u|e^{ix}⟩ = −Σ aₖ conj(ζₖ)ζₖ₊₁.
    pub fn mode_one_projection(&self) -> Complex64 {
        self.sum_m
    }

    /// δκₙ for n = 0..=N.
    pub fn delta_kappa(&self) -> Vec<Complex64> {
        self.a_rows
            .iter()
            .map(|row| row.iter().zip(&self.x).map(|(a, x)| a * x).sum())
            .collect()
    }

    /// (c⁺ₙ, c⁻ₙ) for n = 0..=N.
    pub fn c_plus_minus_all(&self) -> Vec<(Complex64, Complex64)> {
        let n = self.n();
        let base_plus = self.c_plus_ground * self.x[0];
        let base_minus: Complex64 = (1..n).map(|j| self.c_minus_weights[j] * self.y(j)).sum();
        let mut out = Vec::with_capacity(n + 1);
        let (mut band_plus, mut band_minus) = (ZERO, ZERO);
        let (mut bulk_plus, mut bulk_minus) = (ZERO, ZERO);
        out.push((base_plus, base_minus));
        for k in 1..=n {
            band_plus += self.c_plus_band[k - 1] * self.x[k - 1];
            band_minus += self.c_minus_band[k - 1] * self.y(k);
            bulk_plus += self.gam(k) * self.s_plus[k - 1];
            bulk_minus += self.gam(k) * self.s_minus[k - 1];
            out.push((base_plus - band_plus - bulk_plus, base_minus - band_minus + bulk_minus));
        }
        out
    }

    pub fn c_plus_minus(&self, n: usize) -> (Complex64, Complex64) {
        self.c_plus_minus_all()[n]
    }

    /// (b⁺ₙ/√κₙ, b⁻ₙ/√κₙ) for 1 ≤ n ≤ N.
    pub fn b_perp(&self, n: usize) -> (Complex64, Complex64) {
        let plus = self.b_plus_upper[n - 1] * self.zeta[n + 1];
        let bulk: Complex64 = (0..self.n()).map(|k| self.b_coeff(n, k) * self.y(k)).sum();
        let minus = self.b_minus_lower[n - 1] * self.zeta[n - 1] + self.zeta[n] * bulk;
        (plus, minus)
    }

    /// dζₙ[u].cos and dζₙ[u].sin for n = 1..=N.
    pub fn dzeta_cos_sin(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.n();
        let dk = self.delta_kappa();
        let c = self.c_plus_minus_all();
        let mut dcos = Vec::with_capacity(n);
        let mut dsin = Vec::with_capacity(n);
        for k in 1..=n {
            let (cp, cm) = c[k];
            let (bp, bm) = self.b_perp(k);
            let z = self.zeta[k];
            let par_cos = ((cp + cm) * 0.5).im;
            let par_sin = ((cp - cm) * I * 0.5).im;
            dcos.push(z * (-I * par_cos - dk[k].re * 0.5) + (bp + bm) * 0.5);
            // the orthogonal part enters the sine direction with a minus sign;
            // the zero-state limit dζ₁.sin = i/2 pins it
            dsin.push(z * (-I * par_sin + dk[k].im * 0.5) - (bp - bm) / (2.0 * I));
        }
        (dcos, dsin)
    }

    pub fn dzeta_cos(&self) -> Vec<Complex64> {
        self.dzeta_cos_sin().0
    }

    pub fn dzeta_sin(&self) -> Vec<Complex64> {
        self.dzeta_cos_sin().1
    }

    /// Damping direction Zₙ = ⟨u|cos⟩dζₙ.cos + ⟨u|sin⟩dζₙ.sin.
    pub fn damping(&self) -> Vec<Complex64> {
        let p = self.sum_m;
        if p == ZERO {
            return vec![ZERO; self.n()];
        }
        let (dcos, dsin) = self.dzeta_cos_sin();
        dcos.iter().zip(&dsin).map(|(c, s)| p.re * c - p.im * s).collect()
    }

    /// dγₙ/dt = −α Re((mₙ₋₁ − mₙ) conj P), n = 1..=N.
    pub fn dgamma_dt(&self, alpha: f64) -> Vec<f64> {
        let p = self.sum_m.conj();
        (1..=self.n()).map(|k| -alpha * ((self.m[k - 1] - self.m[k]) * p).re).collect()
    }

    pub fn coefficient_tables(&self) -> CoefficientTables {
        let n = self.n();
        CoefficientTables {
            a_kappa: self.a_rows.clone(),
            b_minus_lower: self.b_minus_lower.clone(),
            b_plus_upper: self.b_plus_upper.clone(),
            b_minus_tail: (1..=n).map(|r| (0..n).map(|k| self.b_coeff(r, k)).collect()).collect(),
            c_plus_ground: self.c_plus_ground,
            c_minus_weights: self.c_minus_weights.clone(),
            c_plus_band: self.c_plus_band.clone(),
            c_minus_band: self.c_minus_band.clone(),
        }
    }
}

/// ωₙ = n² − 2Σₖ min(k, n)γₖ for n = 1..=N, in O(N).
pub fn frequencies(actions: &Actions) -> Vec<f64> {
    let n = actions.n();
    let total: f64 = actions.gamma.iter().sum();
    let mut weighted = 0.0; // Σ_{k≤n} kγₖ
    let mut head = 0.0; // Σ_{k≤n} γₖ
    (1..=n)
        .map(|k| {
            let g = actions.gamma(k);
            weighted += k as f64 * g;
            head += g;
            let kf = k as f64;
            kf * kf - 2.0 * (weighted + kf * (total - head))
        })
        .collect()
}

/// ⟨u|e^{ix}⟩ as a function of the Birkhoff coordinates.
pub fn mode_one_projection(state: &BirkhoffState, params: &SpectralParams) -> Complex64 {
    -(0..state.n())
        .map(|k| params.projection_weights[k] * state.zeta(k).conj() * state.zeta(k + 1))
        .sum::<Complex64>()
}

/// dζ/dt = iωζ − αZ(ζ).
pub fn vector_field(state: &BirkhoffState, alpha: f64) -> Result<Vec<Complex64>> {
    let omega = frequencies(&state.actions());
    let mut out: Vec<Complex64> = state.zeta.iter().zip(&omega).map(|(z, w)| I * w * z).collect();
    if alpha != 0.0 {
        let ws = FieldWorkspace::new(state)?;
        for (o, d) in out.iter_mut().zip(ws.damping()) {
            *o -= alpha * d;
        }
    }
    Ok(out)
}

/// Rotation e^{in²t} taking gauge variables zₙ to ζₙ.
pub fn gauge_phase(n: usize, t: f64) -> Complex64 {
    let nn = (n * n) as f64;
    Complex64::from_polar(1.0, nn * t)
}

/// Field on zₙ = e^{−in²t}ζₙ: Fₙ = iω̃ₙzₙ − α e^{−in²t} Zₙ(ζ), ω̃ₙ = ωₙ − n².
pub fn vector_field_gauge(t: f64, z: &[Complex64], alpha: f64) -> Result<Vec<Complex64>> {
    let actions = Actions {
        gamma: z.iter().map(|v| v.norm_sqr()).collect(),
    };
    let omega = frequencies(&actions);
    let mut out: Vec<Complex64> = z
        .iter()
        .zip(&omega)
        .enumerate()
        .map(|(i, (v, w))| {
            let k = (i + 1) as f64;
            I * (w - k * k) * v
        })
        .collect();
    if alpha != 0.0 {
        let zeta: Vec<Complex64> = z.iter().enumerate().map(|(i, v)| gauge_phase(i + 1, t) * v).collect();
        let state = BirkhoffState { t, zeta };
        let ws = FieldWorkspace::new(&state)?;
        for (i, (o, d)) in out.iter_mut().zip(ws.damping()).enumerate() {
            *o -= alpha * gauge_phase(i + 1, t).conj() * d;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_state() {
        let ws = FieldWorkspace::new(&BirkhoffState::zeros(4)).unwrap();
        assert_eq!(ws.mode_one_projection(), ZERO);
        assert!(ws.delta_kappa().iter().all(|d| d.norm() == 0.0));
        assert!(ws.c_plus_minus_all().iter().all(|(a, b)| a.norm() == 0.0 && b.norm() == 0.0));
        let (dcos, dsin) = ws.dzeta_cos_sin();
        assert!((dcos[0] - c(-0.5, 0.0)).norm() < 1e-15);
        assert!((dsin[0] - c(0.0, 0.5)).norm() < 1e-15);
        assert!(dcos[1..].iter().chain(&dsin[1..]).all(|d| d.norm() == 0.0));
        assert!((ws.b_minus_lower[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn frequency_examples() {
        assert_eq!(frequencies(&Actions::zeros(3)), vec![1.0, 4.0, 9.0]);
        let w = frequencies(&Actions::new(vec![0.25, 0.0, 0.0]).unwrap());
        assert_eq!(w, vec![0.5, 3.5, 8.5]);
    }

    #[test]
    fn one_gap_projection_and_decay() {
        let g: f64 = 1.0 / 3.0;
        let st = BirkhoffState::new(0.0, vec![c(-g.sqrt(), 0.0), ZERO, ZERO]).unwrap();
        let ws = FieldWorkspace::new(&st).unwrap();
        // û(1) = r for r = 1/2
        assert!((ws.mode_one_projection() - c(0.5, 0.0)).norm() < 1e-14);
        let dg = ws.dgamma_dt(0.5);
        assert!((dg[0] + 0.5 * g / (1.0 + g)).abs() < 1e-14);
        let undamped = vector_field(&st, 0.0).unwrap();
        assert!((undamped[0] - I * (1.0 - 2.0 * g) * st.zeta[0]).norm() < 1e-15);
    }

    #[test]
    fn gauge_field_vanishes_at_zero() {
        let f = vector_field_gauge(1.3, &[ZERO; 5], 0.7).unwrap();
        assert!(f.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn b_star_band_is_zero() {
        let st = BirkhoffState::new(0.0, vec![c(0.2, 0.1), c(-0.1, 0.05), c(0.03, -0.02), c(0.01, 0.0)]).unwrap();
        let t = FieldWorkspace::new(&st).unwrap().coefficient_tables();
        for n in 1..=4 {
            for k in 0..4 {
                if k + 1 == n || k == n {
                    assert_eq!(t.b_minus_tail[n - 1][k], 0.0);
                }
            }
        }
    }
}

//! Shared data model: Birkhoff states, actions, Fourier representations of
//! real zero-mean potentials, and run configuration.
//!
//! Inner products follow ⟨f|g⟩ = (1/2π)∫ f ḡ dx, so the Fourier coefficient of
//! `u` at mode `n` is û(n) = ⟨u|e^{inx}⟩ and Parseval reads ∥u∥² = Σ|û(n)|².

use std::f64::consts::PI;
use std::path::PathBuf;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncated Birkhoff coordinates ζ₁..ζ_N at time `t`.
///
/// `zeta[0]` holds ζ₁. The convention ζ₀ = 1 is implicit; ζₙ = 0 for n > N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffState {
    pub t: f64,
    pub zeta: Vec<Complex64>,
}

impl BirkhoffState {
    pub fn new(t: f64, zeta: Vec<Complex64>) -> Result<Self> {
        if zeta.is_empty() {
            return Err(Error::InvalidInput("truncation order N must be >= 1".into()));
        }
        if !t.is_finite() || zeta.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite Birkhoff coordinate".into()));
        }
        Ok(Self { t, zeta })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            t: 0.0,
            zeta: vec![Complex64::new(0.0, 0.0); n.max(1)],
        }
    }

    /// Exact Birkhoff coordinates of the one-gap potential
    /// (1−r²)/(1−2r cos x+r²) − 1: ζ₁ = −r/√(1−r²), all others zero.
    pub fn one_gap(n: usize, r: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::InvalidInput(format!("one-gap radius r = {r} not in [0, 1)")));
        }
        let mut state = Self::zeros(n);
        state.zeta[0] = Complex64::new(-r / (1.0 - r * r).sqrt(), 0.0);
        Ok(state)
    }

    /// Truncation order N.
    pub fn n(&self) -> usize {
        self.zeta.len()
    }

    /// ζₙ with ζ₀ = 1 and ζₙ = 0 beyond the truncation.
    pub fn zeta(&self, n: usize) -> Complex64 {
        match n {
            0 => Complex64::new(1.0, 0.0),
            k if k <= self.zeta.len() => self.zeta[k - 1],
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn actions(&self) -> Actions {
        Actions {
            gamma: self.zeta.iter().map(|z| z.norm_sqr()).collect(),
        }
    }

    /// Σ n|ζₙ|², the squared h^{1/2} norm. Equals ½∥u∥².
    pub fn h_half_norm_sq(&self) -> f64 {
        sobolev_norm_sq(self, 0.0)
    }
}

/// Actions γₙ = |ζₙ|², n = 1..N, with the accessor convention γ₀ = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Actions {
    pub gamma: Vec<f64>,
}

impl Actions {
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if gamma.is_empty() {
            return Err(Error::InvalidInput("empty action sequence".into()));
        }
        if let Some((i, g)) = gamma.iter().enumerate().find(|(_, g)| !(**g >= 0.0) || !g.is_finite()) {
            return Err(Error::InvalidInput(format!("gamma_{} = {g} is not a nonnegative number", i + 1)));
        }
        Ok(Self { gamma })
    }

    pub fn zeros(n: usize) -> Self {
        Self { gamma: vec![0.0; n.max(1)] }
    }

    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    /// γₙ with γ₀ = 1 and γₙ = 0 beyond the truncation.
    pub fn gamma(&self, n: usize) -> f64 {
        match n {
            0 => 1.0,
            k if k <= self.gamma.len() => self.gamma[k - 1],
            _ => 0.0,
        }
    }

    pub fn l1_norm(&self) -> f64 {
        self.gamma.iter().sum()
    }
}

/// Real, zero-mean periodic function on a grid of `m` points, stored by its
/// nonnegative Fourier modes û(0..=m/2). Negative modes follow from
/// û(−n) = conj(û(n)); the Nyquist entry is the (real) DFT value at m/2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierFunction {
    m: usize,
    coeff: Vec<Complex64>,
}

impl FourierFunction {
    pub fn zeros(m: usize) -> Result<Self> {
        check_grid(m)?;
        Ok(Self {
            m,
            coeff: vec![Complex64::new(0.0, 0.0); m / 2 + 1],
        })
    }

    /// Builds from nonnegative modes. Entry 0 is discarded (zero mean) and the
    /// Nyquist entry is projected onto the reals.
    pub fn from_modes(m: usize, modes: &[Complex64]) -> Result<Self> {
        let mut f = Self::zeros(m)?;
        if modes.len() > m / 2 + 1 {
            return Err(Error::InvalidInput(format!(
                "{} modes do not fit a grid of {m} points",
                modes.len()
            )));
        }
        if modes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite Fourier coefficient".into()));
        }
        f.coeff[..modes.len()].copy_from_slice(modes);
        f.normalize();
        Ok(f)
    }

    pub fn grid_size(&self) -> usize {
        self.m
    }

    /// Largest stored mode index, m/2.
    pub fn max_mode(&self) -> usize {
        self.m / 2
    }

    /// û(n) for any integer n; zero outside |n| ≤ m/2.
    pub fn mode(&self, n: i64) -> Complex64 {
        let k = n.unsigned_abs() as usize;
        if k > self.m / 2 {
            return Complex64::new(0.0, 0.0);
        }
        if n >= 0 {
            self.coeff[k]
        } else {
            self.coeff[k].conj()
        }
    }

    /// Nonnegative modes û(0..=m/2).
    pub fn modes(&self) -> &[Complex64] {
        &self.coeff
    }

    /// Re-imposes zero mean and a real Nyquist coefficient.
    pub(crate) fn normalize(&mut self) {
        self.coeff[0] = Complex64::new(0.0, 0.0);
        let ny = self.m / 2;
        self.coeff[ny] = Complex64::new(self.coeff[ny].re, 0.0);
    }

    /// Same function on a grid of `m` points (zero padding or truncation).
    pub fn resampled(&self, m: usize) -> Result<Self> {
        let keep = (m / 2).min(self.m / 2);
        let mut modes = self.coeff[..=keep].to_vec();
        if keep == m / 2 && keep < self.m / 2 {
            // the old mode m/2 becomes the new Nyquist, which absorbs both ±m/2
            modes[keep] = Complex64::new(2.0 * modes[keep].re, 0.0);
        }
        Self::from_modes(m, &modes)
    }
}

fn check_grid(m: usize) -> Result<()> {
    if m < 4 || !m.is_power_of_two() {
        return Err(Error::InvalidInput(format!("grid size {m} is not a power of two >= 4")));
    }
    Ok(())
}

/// Discrete Fourier analysis û(n) = (1/M) Σⱼ u(xⱼ) e^{−inxⱼ}, xⱼ = 2πj/M, with
/// the mean removed.
pub fn fourier_from_samples(samples: &[f64]) -> Result<FourierFunction> {
    let m = samples.len();
    check_grid(m)?;
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("non-finite sample".into()));
    }
    let mut buf: Vec<Complex64> = samples.iter().map(|&s| Complex64::new(s, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let scale = 1.0 / m as f64;
    let mut f = FourierFunction::zeros(m)?;
    for (c, b) in f.coeff.iter_mut().zip(&buf) {
        *c = b * scale;
    }
    f.normalize();
    Ok(f)
}

/// Grid values u(xⱼ), xⱼ = 2πj/M.
pub fn samples_from_fourier(u: &FourierFunction) -> Vec<f64> {
    let m = u.m;
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for n in 0..=m / 2 {
        buf[n] = u.coeff[n];
    }
    for n in 1..m / 2 {
        buf[m - n] = u.coeff[n].conj();
    }
    FftPlanner::new().plan_fft_inverse(m).process(&mut buf);
    buf.iter().map(|z| z.re).collect()
}

/// ∥u∥² = (1/2π)∫u² = Σₙ|û(n)|², the Nyquist mode counted once.
pub fn l2_norm_sq(u: &FourierFunction) -> f64 {
    let ny = u.m / 2;
    let interior: f64 = u.coeff[1..ny].iter().map(|z| z.norm_sqr()).sum();
    2.0 * interior + u.coeff[ny].norm_sqr()
}

/// Σ n^{1+2s} γₙ over the truncation.
pub fn sobolev_norm_sq(state: &BirkhoffState, s: f64) -> f64 {
    state
        .zeta
        .iter()
        .enumerate()
        .map(|(i, z)| ((i + 1) as f64).powf(1.0 + 2.0 * s) * z.norm_sqr())
        .sum()
}

/// Grid samples of the one-gap potential (1−r²)/(1−2r cos x+r²) − 1.
pub fn one_gap_samples(m: usize, r: f64) -> Vec<f64> {
    (0..m)
        .map(|j| {
            let x = 2.0 * PI * j as f64 / m as f64;
            (1.0 - r * r) / (1.0 - 2.0 * r * x.cos() + r * r) - 1.0
        })
        .collect()
}

/// One-gap potential from its exact coefficients û(n) = r^{|n|}, n ≠ 0.
pub fn one_gap_potential(m: usize, r: f64) -> Result<FourierFunction> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::InvalidInput(format!("one-gap radius r = {r} not in [0, 1)")));
    }
    let modes: Vec<Complex64> = (0..=m / 2)
        .map(|n| if n == 0 { Complex64::new(0.0, 0.0) } else { Complex64::new(r.powi(n as i32), 0.0) })
        .collect();
    FourierFunction::from_modes(m, &modes)
}

/// Smooth random potential: û(n) = amplitude·decayⁿ·(g₁ + i g₂)/√2 with
/// standard normal gᵢ, for 1 ≤ n < m/3.
pub fn random_potential(m: usize, seed: u64, amplitude: f64, decay: f64) -> Result<FourierFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cutoff = m / 3;
    let mut modes = vec![Complex64::new(0.0, 0.0); m / 2 + 1];
    for (n, c) in modes.iter_mut().enumerate().take(cutoff).skip(1) {
        let w = amplitude * decay.powi(n as i32) / 2f64.sqrt();
        *c = Complex64::new(w * normal(&mut rng), w * normal(&mut rng));
    }
    FourierFunction::from_modes(m, &modes)
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// One (n, Re û(n), Im û(n)) entry of an explicit coefficient list, n ≥ 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub n: usize,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialData {
    OneGap { r: f64 },
    Fourier { coefficients: Vec<FourierMode> },
    /// Text file with one real sample per line on a uniform grid of
    /// power-of-two length.
    File { path: PathBuf },
    Random {
        seed: u64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_decay")]
        decay: f64,
    },
}

fn default_amplitude() -> f64 {
    0.3
}

fn default_decay() -> f64 {
    0.5
}

impl InitialData {
    pub fn potential(&self, m: usize) -> Result<FourierFunction> {
        match self {
            InitialData::OneGap { r } => one_gap_potential(m, *r),
            InitialData::Fourier { coefficients } => {
                let mut modes = vec![Complex64::new(0.0, 0.0); m / 2 + 1];
                for c in coefficients {
                    if c.n == 0 || c.n >= m / 2 {
                        return Err(Error::InvalidInput(format!(
                            "coefficient index {} outside 1..{}",
                            c.n,
                            m / 2
                        )));
                    }
                    modes[c.n] = Complex64::new(c.re, c.im);
                }
                FourierFunction::from_modes(m, &modes)
            }
            InitialData::File { path } => {
                let text = std::fs::read_to_string(path)?;
                let samples = text
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<f64>()
                            .map_err(|e| Error::InvalidInput(format!("{}: {s:?}: {e}", path.display())))
                    })
                    .collect::<Result<Vec<_>>>()?;
                fourier_from_samples(&samples)?.resampled(m)
            }
            InitialData::Random { seed, amplitude, decay } => random_potential(m, *seed, *amplitude, *decay),
        }
    }
}

/// Run parameters shared by the Birkhoff integrator, the PDE oracle and the
/// command-line harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub alpha: f64,
    /// Birkhoff truncation N.
    #[serde(rename = "n")]
    pub n_modes: usize,
    /// PDE grid size M.
    #[serde(rename = "m")]
    pub grid: usize,
    /// Galerkin size of the Lax matrix; defaults to 4N.
    #[serde(default)]
    pub m_cut: Option<usize>,
    pub t_end: f64,
    pub sample_dt: f64,
    pub tol: f64,
    pub initial_data: InitialData,
    /// Upper bound for the fixed PDE time step.
    #[serde(default)]
    pub pde_dt: Option<f64>,
    /// Exponents s of the P_s channels recorded along Birkhoff trajectories.
    #[serde(default = "default_ps_orders")]
    pub ps_orders: Vec<f64>,
}

fn default_ps_orders() -> Vec<f64> {
    vec![0.0, 1.0]
}

impl RunConfig {
    pub fn new(alpha: f64, n_modes: usize, t_end: f64, initial_data: InitialData) -> Self {
        Self {
            alpha,
            n_modes,
            grid: 256,
            m_cut: None,
            t_end,
            sample_dt: 0.05,
            tol: 1e-10,
            initial_data,
            pde_dt: None,
            ps_orders: default_ps_orders(),
        }
    }

    pub fn m_cut(&self) -> usize {
        self.m_cut.unwrap_or(4 * self.n_modes)
    }

    /// Checks every field and reports all offending ones at once.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            bad.push(format!("alpha = {} must be finite and >= 0", self.alpha));
        }
        if self.n_modes == 0 {
            bad.push("n must be >= 1".to_string());
        }
        if self.grid < 4 || !self.grid.is_power_of_two() {
            bad.push(format!("m = {} must be a power of two >= 4", self.grid));
        }
        if self.m_cut() < 4 * self.n_modes {
            bad.push(format!("m_cut = {} must be >= 4n = {}", self.m_cut(), 4 * self.n_modes));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            bad.push(format!("t_end = {} must be > 0", self.t_end));
        }
        if !(self.sample_dt > 0.0) || self.sample_dt > self.t_end {
            bad.push(format!("sample_dt = {} must be in (0, t_end]", self.sample_dt));
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            bad.push(format!("tol = {} must be > 0", self.tol));
        }
        if let Some(dt) = self.pde_dt {
            if !(dt > 0.0) {
                bad.push(format!("pde_dt = {dt} must be > 0"));
            }
        }
        if let Some(s) = self.ps_orders.iter().find(|s| !(**s >= 0.0)) {
            bad.push(format!("ps_orders entry {s} must be >= 0"));
        }
        match &self.initial_data {
            InitialData::OneGap { r } if !(0.0..1.0).contains(r) => {
                bad.push(format!("initial_data.r = {r} must be in [0, 1)"));
            }
            InitialData::Random { decay, amplitude, .. } if !(*decay > 0.0 && *decay < 1.0) || !amplitude.is_finite() => {
                bad.push("initial_data random: decay must be in (0, 1), amplitude finite".to_string());
            }
            _ => {}
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad))
        }
    }
}

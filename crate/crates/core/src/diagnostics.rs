//! Identities and long-time indicators evaluated on trajectories.
//!
//! Integrals over sample intervals come in two flavours: trapezoid on the
//! sample grid, and differences of the integral channels accumulated inside
//! the integrator. The latter are exact up to the integrator tolerance.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::birkhoff::LaxSpectrum;
use crate::error::{Error, Result};
use crate::field::FieldWorkspace;
use crate::integrator::{
    ps_channel, ps_rate_channel, Coordinates, Trajectory, CH_GAP_PRODUCTS, CH_INT_MODE_ONE, CH_L2, CH_MODE_ONE,
};
use crate::types::BirkhoffState;

/// wₙ = Σ_{k=1}^{n−1} k^{2s} for n = 1..=N.
pub fn ps_weights(s: f64, n: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n);
    let mut acc = 0.0;
    for k in 1..=n {
        w.push(acc);
        acc += (k as f64).powf(2.0 * s);
    }
    w
}

/// P_s = Σ wₙγₙ.
pub fn ps_functional(state: &BirkhoffState, s: f64) -> f64 {
    ps_weights(s, state.n())
        .iter()
        .zip(&state.zeta)
        .map(|(w, z)| w * z.norm_sqr())
        .sum()
}

fn c_weight(s: f64, p: usize) -> f64 {
    if p == 0 {
        0.0
    } else {
        (p as f64).powf(2.0 * s)
    }
}

/// dP_s/dt = −α Re(Σₚ cₚ mₚ conj P), cₚ = p^{2s}, c₀ = 0. O(N).
pub fn ps_rate(ws: &FieldWorkspace, s: f64, alpha: f64) -> f64 {
    let p = ws.mode_one_projection().conj();
    let sum: Complex64 = ws.m.iter().enumerate().map(|(k, m)| c_weight(s, k) * m).sum();
    -alpha * (sum * p).re
}

/// The same rate as a diagonal plus symmetrized double sum over
/// ηₙₚ = conj(ζₙ)ζₙ₊₁ζₚconj(ζₚ₊₁). O(N²).
pub fn ps_rate_double_sum(state: &BirkhoffState, ws: &FieldWorkspace, s: f64, alpha: f64) -> f64 {
    let n = state.n();
    let a = &ws.params.projection_weights;
    let gamma = |k: usize| state.zeta(k).norm_sqr();
    let x = |k: usize| state.zeta(k).conj() * state.zeta(k + 1);
    let diag: f64 = (0..n).map(|k| c_weight(s, k) * a[k] * a[k] * gamma(k) * gamma(k + 1)).sum();
    let mut off = 0.0;
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let eta = x(i) * x(j).conj();
            off += (c_weight(s, i) + c_weight(s, j)) * a[i] * a[j] * eta.re;
        }
    }
    -alpha * diag - 0.5 * alpha * off
}

fn trapezoid(times: &[f64], values: &[f64], i: usize) -> f64 {
    0.5 * (times[i + 1] - times[i]) * (values[i] + values[i + 1])
}

fn require<'a>(traj: &'a Trajectory, name: &str) -> Result<&'a [f64]> {
    traj.channel(name)
        .ok_or_else(|| Error::InvalidInput(format!("trajectory has no channel {name}")))
}

fn require_samples(traj: &Trajectory, k: usize) -> Result<()> {
    if traj.len() < k {
        return Err(Error::InvalidInput(format!("need at least {k} samples, have {}", traj.len())));
    }
    Ok(())
}

/// rᵢ = Δᵢ∥u∥² + 2α ∫|⟨u|e^{ix}⟩|² per sample interval, integral by trapezoid.
pub fn lyapunov_residual(traj: &Trajectory, alpha: f64) -> Result<Vec<f64>> {
    require_samples(traj, 2)?;
    let l2 = require(traj, CH_L2)?;
    let p2 = require(traj, CH_MODE_ONE)?;
    Ok((0..traj.len() - 1)
        .map(|i| l2[i + 1] - l2[i] + 2.0 * alpha * trapezoid(&traj.times, p2, i))
        .collect())
}

/// As [`lyapunov_residual`], with the integral taken from the in-loop channel.
pub fn lyapunov_residual_accumulated(traj: &Trajectory, alpha: f64) -> Result<Vec<f64>> {
    require_samples(traj, 2)?;
    let l2 = require(traj, CH_L2)?;
    let ip = require(traj, CH_INT_MODE_ONE)?;
    Ok((0..traj.len() - 1)
        .map(|i| l2[i + 1] - l2[i] + 2.0 * alpha * (ip[i + 1] - ip[i]))
        .collect())
}

/// Largest increase of ∥u∥² between consecutive samples (≤ 0 when monotone).
pub fn max_l2_increase(traj: &Trajectory) -> Result<f64> {
    require_samples(traj, 2)?;
    let l2 = require(traj, CH_L2)?;
    Ok(l2.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max))
}

/// ΔP_s − ∫ dP_s/dt per interval, with the closed-form rate integrated in loop.
pub fn ps_derivative_residual(traj: &Trajectory, s: f64) -> Result<Vec<f64>> {
    require_samples(traj, 2)?;
    let ps = require(traj, &ps_channel(s))?;
    let ir = require(traj, &ps_rate_channel(s))?;
    Ok((0..traj.len() - 1)
        .map(|i| (ps[i + 1] - ps[i]) - (ir[i + 1] - ir[i]))
        .collect())
}

/// ΔP_s − trapezoid(dP_s/dt) per interval, rates evaluated on the samples.
pub fn ps_derivative_residual_trapezoid(traj: &Trajectory, s: f64, alpha: f64) -> Result<Vec<f64>> {
    require_samples(traj, 2)?;
    let mut ps = Vec::with_capacity(traj.len());
    let mut rate = Vec::with_capacity(traj.len());
    for i in 0..traj.len() {
        let st = traj.state(i);
        ps.push(ps_functional(&st, s));
        rate.push(ps_rate(&FieldWorkspace::new(&st)?, s, alpha));
    }
    Ok((0..traj.len() - 1)
        .map(|i| ps[i + 1] - ps[i] - trapezoid(&traj.times, &rate, i))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapIntegral {
    /// ∫₀^T Σ_{n≥0} γₙγₙ₊₁ dt by trapezoid.
    pub total: f64,
    /// Share of the total contributed by the last 20% of the window.
    pub tail_fraction: f64,
}

pub fn gap_product_integral(traj: &Trajectory) -> Result<GapIntegral> {
    require_samples(traj, 2)?;
    let g = require(traj, CH_GAP_PRODUCTS)?;
    let t = &traj.times;
    let cut = t[0] + 0.8 * (t[t.len() - 1] - t[0]);
    let (mut total, mut tail) = (0.0, 0.0);
    for i in 0..t.len() - 1 {
        let piece = trapezoid(t, g, i);
        total += piece;
        if t[i] >= cut {
            tail += piece;
        }
    }
    let tail_fraction = if total > 0.0 { tail / total } else { 0.0 };
    Ok(GapIntegral { total, tail_fraction })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaSalle {
    pub holds: bool,
    /// Index n maximizing |ζₙ||ζₙ₊₁| (with ζ₀ = 1).
    pub witness: usize,
    pub max_product: f64,
}

/// Whether no two consecutive coordinates are simultaneously nonzero:
/// maxₙ |ζₙ||ζₙ₊₁| ≤ eps.
pub fn lasalle_check(state: &BirkhoffState, eps: f64) -> LaSalle {
    let (witness, max_product) = (0..state.n())
        .map(|k| (k, state.zeta(k).norm() * state.zeta(k + 1).norm()))
        .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    LaSalle {
        holds: max_product <= eps,
        witness,
        max_product,
    }
}

/// H_μ = Σ_{n≥0} κₙγₙ/(λₙ + μ) with γ₀ = 1.
pub fn generating_function(gamma: &[f64], kappa: &[f64], lambda: &[f64], mu: f64) -> Result<f64> {
    if mu <= -lambda[0] {
        return Err(Error::Pole { mu, bound: -lambda[0] });
    }
    Ok((0..=gamma.len())
        .map(|k| {
            let g = if k == 0 { 1.0 } else { gamma[k - 1] };
            kappa[k] * g / (lambda[k] + mu)
        })
        .sum())
}

pub fn generating_function_of(spec: &LaxSpectrum, mu: f64) -> Result<f64> {
    generating_function(&spec.gamma.gamma, &spec.kappa, &spec.lambda, mu)
}

/// (Σκₙγₙ, Σλₙκₙγₙ, Σλₙ²κₙγₙ) over the resolved spectrum, γ₀ = 1.
pub fn trace_sums(spec: &LaxSpectrum) -> [f64; 3] {
    let mut out = [0.0; 3];
    for k in 0..=spec.gamma.n() {
        let g = spec.gamma.gamma(k);
        let l = spec.lambda[k];
        let w = spec.kappa[k] * g;
        out[0] += w;
        out[1] += l * w;
        out[2] += l * l * w;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitingActions {
    pub mean: Vec<f64>,
    pub spread: Vec<f64>,
    pub samples: usize,
}

/// Per-n mean and max − min of γₙ over the final `window` fraction of samples.
pub fn limiting_actions(traj: &Trajectory, window: f64) -> Result<LimitingActions> {
    let start = ((1.0 - window.clamp(0.0, 1.0)) * traj.len() as f64).floor() as usize;
    let count = traj.len().saturating_sub(start);
    if count < 10 {
        return Err(Error::InvalidInput(format!("final window has {count} samples, need 10")));
    }
    let n = traj.values[0].len();
    let mut mean = vec![0.0; n];
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for row in &traj.values[start..] {
        for (k, z) in row.iter().enumerate() {
            let g = z.norm_sqr();
            mean[k] += g / count as f64;
            lo[k] = lo[k].min(g);
            hi[k] = hi[k].max(g);
        }
    }
    let spread = hi.iter().zip(&lo).map(|(h, l)| h - l).collect();
    Ok(LimitingActions {
        mean,
        spread,
        samples: count,
    })
}

/// One judged quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Informational entries are reported but do not affect [`DiagnosticReport::passed`].
    pub informational: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub coordinates: Coordinates,
    pub samples: usize,
    pub t_end: f64,
    pub checks: Vec<Check>,
    pub limiting_actions: Option<LimitingActions>,
    pub lasalle: Option<LaSalle>,
}

impl DiagnosticReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().filter(|c| !c.informational).all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &str, value: f64, tolerance: f64) {
        self.checks.push(Check {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
            informational: false,
        });
    }

    fn info(&mut self, name: &str, value: f64, tolerance: f64) {
        self.checks.push(Check {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
            informational: true,
        });
    }

    /// Plain-text table, one check per line.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let verdict = match (c.informational, c.pass) {
                (true, _) => "info",
                (false, true) => "pass",
                (false, false) => "FAIL",
            };
            out.push_str(&format!("{verdict:4}  {:<32} {:>12.4e}  (tol {:.1e})\n", c.name, c.value, c.tolerance));
        }
        out
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Standard checks for a trajectory, with tolerances scaled from its tolerance.
pub fn diagnose(traj: &Trajectory) -> Result<DiagnosticReport> {
    require_samples(traj, 2)?;
    let cfg = &traj.config;
    let alpha = cfg.alpha;
    let tol = cfg.tol;
    let mut report = DiagnosticReport {
        coordinates: traj.coordinates,
        samples: traj.len(),
        t_end: traj.times[traj.len() - 1],
        checks: Vec::new(),
        limiting_actions: None,
        lasalle: None,
    };
    match traj.coordinates {
        Coordinates::Birkhoff => {
            if alpha == 0.0 {
                let g0 = traj.actions(0);
                let drift = (1..traj.len())
                    .map(|i| {
                        let gi = traj.actions(i);
                        (1..=gi.n()).map(|k| (gi.gamma(k) - g0.gamma(k)).abs()).fold(0.0f64, f64::max)
                    })
                    .fold(0.0f64, f64::max);
                report.push("actions conserved", drift, 100.0 * tol);
            }
            report.push("lyapunov residual", max_abs(&lyapunov_residual_accumulated(traj, alpha)?), 100.0 * tol);
            report.info("lyapunov residual (trapezoid)", max_abs(&lyapunov_residual(traj, alpha)?), 100.0 * tol);
            report.push("l2 monotone (max increase)", max_l2_increase(traj)?.max(0.0), 10.0 * tol);
            for &s in &cfg.ps_orders {
                if traj.channel(&ps_rate_channel(s)).is_some() {
                    let r = max_abs(&ps_derivative_residual(traj, s)?);
                    report.push(&format!("p_s identity s={s}"), r, 100.0 * tol);
                }
            }
            let gi = gap_product_integral(traj)?;
            report.info("gap integral", gi.total, f64::INFINITY);
            report.info("gap integral tail fraction", gi.tail_fraction, 0.05);
            if let Some(last) = traj.last_state() {
                report.lasalle = Some(lasalle_check(&last, 1e-3));
            }
            report.limiting_actions = limiting_actions(traj, 0.2).ok();
        }
        Coordinates::Fourier => {
            let resid = lyapunov_residual(traj, alpha)?;
            report.push("l2 identity residual (trapezoid)", max_abs(&resid), 1e-6);
            report.push("l2 monotone (max increase)", max_l2_increase(traj)?.max(0.0), 1e-9);
        }
    }
    Ok(report)
}

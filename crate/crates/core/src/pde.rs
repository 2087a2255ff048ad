//! Pseudospectral solver for the damped equation in physical space,
//! ∂ₜu + α(⟨u|cos⟩cos + ⟨u|sin⟩sin) = H∂ₓₓu − ∂ₓ(u²),
//! used as an independent reference for the Birkhoff-coordinate evolution.
//!
//! In Fourier variables dû(n)/dt = L(n)û(n) − in(u²)^(n) with
//! L(n) = i sgn(n)n² − (α/2)·1_{|n|=1}. Only modes |n| ≤ M/3 are carried
//! (two-thirds rule), so the quadratic term is alias-free.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::birkhoff::birkhoff_forward;
use crate::error::{Error, Result};
use crate::integrator::{evolve, sample_times, Coordinates, StepStats, Trajectory, CH_L2, CH_MODE_ONE};
use crate::types::{l2_norm_sq, FourierFunction, RunConfig};

const DEFAULT_DT: f64 = 1e-3;
const BLOW_UP: f64 = 1e6;

/// Transform plans and scratch space for one grid size.
struct Spectral {
    m: usize,
    kmax: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
}

impl Spectral {
    fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            m,
            kmax: m / 3,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
            buf: vec![Complex64::new(0.0, 0.0); m],
        }
    }

    /// −in(u²)^(n) for 0 ≤ n ≤ kmax, given û(0..=kmax).
    fn nonlinear(&mut self, u: &[Complex64], out: &mut [Complex64]) -> f64 {
        let m = self.m;
        self.buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for n in 1..=self.kmax {
            self.buf[n] = u[n];
            self.buf[m - n] = u[n].conj();
        }
        self.inverse.process(&mut self.buf);
        let mut peak: f64 = 0.0;
        for b in self.buf.iter_mut() {
            peak = peak.max(b.re.abs());
            *b = Complex64::new(b.re * b.re, 0.0);
        }
        self.forward.process(&mut self.buf);
        let scale = 1.0 / m as f64;
        out[0] = Complex64::new(0.0, 0.0);
        for n in 1..=self.kmax {
            out[n] = Complex64::new(0.0, -(n as f64)) * self.buf[n] * scale;
        }
        peak
    }
}

fn linear_symbol(n: usize, alpha: f64) -> Complex64 {
    let damping = if n == 1 { -0.5 * alpha } else { 0.0 };
    Complex64::new(damping, (n * n) as f64)
}

/// Time derivative of û in the dealiased band, as a function on the same grid.
pub fn pde_rhs(u: &FourierFunction, alpha: f64) -> Result<FourierFunction> {
    let mut sp = Spectral::new(u.grid_size());
    let kmax = sp.kmax;
    let modes: Vec<Complex64> = (0..=kmax).map(|n| u.mode(n as i64)).collect();
    let mut out = vec![Complex64::new(0.0, 0.0); kmax + 1];
    sp.nonlinear(&modes, &mut out);
    for n in 1..=kmax {
        out[n] += linear_symbol(n, alpha) * modes[n];
    }
    FourierFunction::from_modes(u.grid_size(), &out)
}

/// Integrating-factor RK4 state on one grid.
struct Stepper {
    sp: Spectral,
    alpha: f64,
}

impl Stepper {
    /// Advances û by `dt`. Returns max|u| seen at the first stage.
    fn step(&mut self, u: &mut [Complex64], dt: f64) -> f64 {
        let k = u.len();
        let half: Vec<Complex64> = (0..k).map(|n| (linear_symbol(n, self.alpha) * (0.5 * dt)).exp()).collect();
        let mut a = vec![Complex64::new(0.0, 0.0); k];
        let mut b = a.clone();
        let mut c = a.clone();
        let mut d = a.clone();
        let mut tmp = a.clone();
        let peak = self.sp.nonlinear(u, &mut a);
        for n in 0..k {
            tmp[n] = half[n] * (u[n] + 0.5 * dt * a[n]);
        }
        self.sp.nonlinear(&tmp, &mut b);
        for n in 0..k {
            tmp[n] = half[n] * u[n] + 0.5 * dt * b[n];
        }
        self.sp.nonlinear(&tmp, &mut c);
        for n in 0..k {
            tmp[n] = half[n] * half[n] * u[n] + dt * half[n] * c[n];
        }
        self.sp.nonlinear(&tmp, &mut d);
        for n in 0..k {
            let e2 = half[n] * half[n];
            u[n] = e2 * u[n] + dt / 6.0 * (e2 * a[n] + 2.0 * half[n] * (b[n] + c[n]) + d[n]);
        }
        u[0] = Complex64::new(0.0, 0.0);
        peak
    }
}

fn max_abs_on_grid(sp: &mut Spectral, u: &[Complex64]) -> f64 {
    let mut scratch = vec![Complex64::new(0.0, 0.0); u.len()];
    sp.nonlinear(u, &mut scratch)
}

/// Integrates from `u0` to `config.t_end`; samples hold û(1..=M/3).
pub fn pde_evolve(u0: &FourierFunction, config: &RunConfig) -> Result<Trajectory> {
    config.validate()?;
    let m = u0.grid_size();
    let mut stepper = Stepper {
        sp: Spectral::new(m),
        alpha: config.alpha,
    };
    let kmax = stepper.sp.kmax;
    let mut u: Vec<Complex64> = (0..=kmax).map(|n| u0.mode(n as i64)).collect();
    u[0] = Complex64::new(0.0, 0.0);

    let peak = max_abs_on_grid(&mut stepper.sp, &u);
    let cfl = if peak > 0.0 { 0.5 / (kmax as f64 * peak) } else { f64::INFINITY };
    let dt_max = config.pde_dt.unwrap_or(DEFAULT_DT).min(cfl);

    let times = sample_times(0.0, config.t_end, config.sample_dt);
    let mut values = Vec::with_capacity(times.len());
    let mut l2 = Vec::with_capacity(times.len());
    let mut p1 = Vec::with_capacity(times.len());
    let mut stats = StepStats::default();
    let mut record = |u: &[Complex64]| {
        values.push(u[1..].to_vec());
        l2.push(2.0 * u[1..].iter().map(|z| z.norm_sqr()).sum::<f64>());
        p1.push(u[1].norm_sqr());
    };
    record(&u);
    for w in times.windows(2) {
        let span = w[1] - w[0];
        let steps = (span / dt_max).ceil().max(1.0) as usize;
        let dt = span / steps as f64;
        for j in 0..steps {
            let peak = stepper.step(&mut u, dt);
            stats.accepted += 1;
            stats.evaluations += 4;
            if !(peak < BLOW_UP) || u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Divergence {
                    t: w[0] + j as f64 * dt,
                    reason: format!("max |u| = {peak:.3e}"),
                });
            }
        }
        record(&u);
    }
    Ok(Trajectory {
        coordinates: Coordinates::Fourier,
        times,
        values,
        channels: vec![(CH_L2.to_string(), l2), (CH_MODE_ONE.to_string(), p1)],
        config: config.clone(),
        stats,
    })
}

/// Potential at sample `i` of a Fourier trajectory on grid `m`.
pub fn sample_potential(traj: &Trajectory, i: usize, m: usize) -> Result<FourierFunction> {
    let mut modes = vec![Complex64::new(0.0, 0.0); m / 2 + 1];
    for (n, z) in traj.values[i].iter().enumerate() {
        if n + 1 < m / 2 {
            modes[n + 1] = *z;
        }
    }
    FourierFunction::from_modes(m, &modes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    /// Modes compared: n ≤ N/2.
    pub compared_modes: usize,
    pub max_action_error: f64,
    pub max_zeta_error: f64,
    /// (t, max action error, max ζ error) per sample.
    pub per_sample: Vec<(f64, f64, f64)>,
    pub worst_time: f64,
    pub worst_mode: usize,
    /// ∥u∥² drift between the PDE trajectory and 2Σnγₙ on the Birkhoff side.
    pub max_l2_mismatch: f64,
}

pub struct CrossValidationRun {
    pub report: CrossValidation,
    pub pde: Trajectory,
    pub birkhoff: Trajectory,
}

/// Runs both solvers from `u0` and compares actions and coordinates sample by
/// sample after mapping the PDE solution through Φ.
pub fn cross_validate(u0: &FourierFunction, config: &RunConfig) -> Result<CrossValidationRun> {
    let n = config.n_modes;
    let m_cut = config.m_cut();
    let pde = pde_evolve(u0, config)?;
    let (z0, _) = birkhoff_forward(u0, n, m_cut)?;
    let bk = evolve(&z0, config)?;
    if bk.len() != pde.len() {
        return Err(Error::Consistency(format!(
            "sample counts differ: {} vs {}",
            bk.len(),
            pde.len()
        )));
    }
    let compared = (n / 2).max(1);
    let mut report = CrossValidation {
        compared_modes: compared,
        max_action_error: 0.0,
        max_zeta_error: 0.0,
        per_sample: Vec::with_capacity(pde.len()),
        worst_time: 0.0,
        worst_mode: 1,
        max_l2_mismatch: 0.0,
    };
    let m = u0.grid_size();
    let bk_l2 = bk.channel(CH_L2).unwrap_or_default();
    for i in 0..pde.len() {
        let u = sample_potential(&pde, i, m)?;
        let (zp, _) = birkhoff_forward(&u, n, m_cut)?;
        let (mut da, mut dz) = (0.0f64, 0.0f64);
        for k in 0..compared {
            let e = (zp.zeta[k].norm_sqr() - bk.values[i][k].norm_sqr()).abs();
            if e > report.max_action_error {
                report.max_action_error = e;
                report.worst_time = pde.times[i];
                report.worst_mode = k + 1;
            }
            da = da.max(e);
            dz = dz.max((zp.zeta[k] - bk.values[i][k]).norm());
        }
        report.max_zeta_error = report.max_zeta_error.max(dz);
        if let Some(l) = bk_l2.get(i) {
            report.max_l2_mismatch = report.max_l2_mismatch.max((l2_norm_sq(&u) - l).abs());
        }
        report.per_sample.push((pde.times[i], da, dz));
    }
    Ok(CrossValidationRun {
        report,
        pde,
        birkhoff: bk,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos2(m: usize) -> FourierFunction {
        let mut modes = vec![Complex64::new(0.0, 0.0); m / 2 + 1];
        modes[1] = Complex64::new(1.0, 0.0);
        FourierFunction::from_modes(m, &modes).unwrap()
    }

    #[test]
    fn rhs_of_zero_is_zero() {
        let r = pde_rhs(&FourierFunction::zeros(32).unwrap(), 0.5).unwrap();
        assert!(r.modes().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn rhs_of_two_cos() {
        // (2cos x)² = 2 + 2cos 2x, so (u²)^(2) = 1
        let r = pde_rhs(&cos2(32), 0.0).unwrap();
        assert!((r.mode(1) - Complex64::new(0.0, 1.0)).norm() < 1e-14);
        assert!((r.mode(2) - Complex64::new(0.0, -2.0)).norm() < 1e-14);
        assert!(r.mode(3).norm() < 1e-14);
        let damped = pde_rhs(&cos2(32), 0.6).unwrap();
        assert!((damped.mode(1) - Complex64::new(-0.3, 1.0)).norm() < 1e-14);
        assert!((damped.mode(2) - r.mode(2)).norm() < 1e-14);
    }
}

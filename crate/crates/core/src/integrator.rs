//! Adaptive Dormand–Prince 5(4) integration of the gauge system z' = F(t, z)
//! with continuous output for exact-time sampling.
//!
//! The Birkhoff state vector is augmented with running integrals of
//! |⟨u|e^{ix}⟩|², Σγₙγₙ₊₁ and the closed-form rates dP_s/dt, so that time
//! integrals in the diagnostics are accurate to the integrator tolerance
//! rather than to a quadrature rule on the sample grid.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::birkhoff::initial_state;
use crate::diagnostics::{ps_functional, ps_rate};
use crate::error::{Error, Result};
use crate::field::{frequencies, gauge_phase, FieldWorkspace};
use crate::types::{Actions, BirkhoffState, RunConfig};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [&[f64]; 7] = [
    &[],
    &[0.2],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights; equal to the last row of A (first same as last).
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
/// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Weights of the fourth-order continuous extension.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;
pub const MIN_STEP: f64 = 1e-12;

#[derive(Debug)]
pub enum SolveError {
    Underflow { t: f64, h: f64, y: Vec<f64> },
    NonFinite { t: f64 },
    Rhs(Error),
}

impl From<Error> for SolveError {
    fn from(e: Error) -> Self {
        SolveError::Rhs(e)
    }
}

/// One accepted or rejected trial step.
#[derive(Debug, Clone)]
pub struct Step {
    pub y: Vec<f64>,
    /// f(t + h, y), reusable as the first stage of the next step.
    pub f_end: Vec<f64>,
    /// Embedded error estimate h Σ Eⱼkⱼ.
    pub err: Vec<f64>,
    pub dense: DenseOutput,
}

/// Continuous extension on [t, t + h].
#[derive(Debug, Clone)]
pub struct DenseOutput {
    pub t: f64,
    pub h: f64,
    cont: [Vec<f64>; 5],
}

impl DenseOutput {
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let s = (t - self.t) / self.h;
        let s1 = 1.0 - s;
        let [c0, c1, c2, c3, c4] = &self.cont;
        for i in 0..out.len() {
            out[i] = c0[i] + s * (c1[i] + s1 * (c2[i] + s * (c3[i] + s1 * c4[i])));
        }
    }
}

/// Single Dormand–Prince step from (t, y) with first stage `f0` = f(t, y).
pub fn dopri_step<F>(rhs: &mut F, t: f64, y: &[f64], f0: &[f64], h: f64) -> std::result::Result<Step, SolveError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let dim = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(f0.to_vec());
    let mut tmp = vec![0.0; dim];
    for stage in 1..7 {
        for i in 0..dim {
            let incr: f64 = A[stage].iter().zip(&k).map(|(a, kj)| a * kj[i]).sum();
            tmp[i] = y[i] + h * incr;
        }
        if tmp.iter().any(|v| !v.is_finite()) {
            return Err(SolveError::NonFinite { t: t + C[stage] * h });
        }
        let mut ks = vec![0.0; dim];
        rhs(t + C[stage] * h, &tmp, &mut ks)?;
        k.push(ks);
    }
    // stage 6 was evaluated at the fifth-order solution
    let y_new = tmp;
    let combine = |w: &[f64; 7], i: usize| -> f64 { h * w.iter().zip(&k).map(|(c, kj)| c * kj[i]).sum::<f64>() };
    let err: Vec<f64> = (0..dim).map(|i| combine(&E, i)).collect();
    let ydiff: Vec<f64> = (0..dim).map(|i| y_new[i] - y[i]).collect();
    let bspl: Vec<f64> = (0..dim).map(|i| h * k[0][i] - ydiff[i]).collect();
    let c3: Vec<f64> = (0..dim).map(|i| ydiff[i] - h * k[6][i] - bspl[i]).collect();
    let c4: Vec<f64> = (0..dim).map(|i| combine(&D, i)).collect();
    debug_assert!((0..dim).all(|i| (combine(&B, i) - ydiff[i]).abs() <= 1e-12 * (1.0 + ydiff[i].abs())));
    Ok(Step {
        f_end: k.pop().unwrap_or_default(),
        dense: DenseOutput {
            t,
            h,
            cont: [y.to_vec(), ydiff, bspl, c3, c4],
        },
        y: y_new,
        err,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub h_init: f64,
    pub h_max: f64,
}

/// Integrates from (t0, y0) through the ascending `sample_times` (all ≥ t0),
/// calling `emit` at each one. `err_norm` maps an error vector to a scaled
/// norm; steps with norm ≤ 1 are accepted.
pub fn integrate<F, N, S>(
    mut rhs: F,
    err_norm: N,
    t0: f64,
    y0: &[f64],
    sample_times: &[f64],
    opts: SolverOptions,
    mut emit: S,
) -> std::result::Result<StepStats, SolveError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    N: Fn(&[f64]) -> f64,
    S: FnMut(f64, &[f64]) -> Result<()>,
{
    let mut stats = StepStats::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut f0 = vec![0.0; y.len()];
    rhs(t, &y, &mut f0)?;
    stats.evaluations += 1;
    let mut pending = sample_times.iter().copied().peekable();
    while let Some(&ts) = pending.peek() {
        if ts > t {
            break;
        }
        emit(ts, &y)?;
        pending.next();
    }
    let t_end = match sample_times.last() {
        Some(&te) if te > t => te,
        _ => return Ok(stats),
    };
    let mut h = opts.h_init.min(opts.h_max).min(t_end - t);
    let mut buf = vec![0.0; y.len()];
    let mut last_rejected = false;
    while t < t_end {
        let last = t + h >= t_end;
        let h_try = if last { t_end - t } else { h };
        if h_try < MIN_STEP {
            return Err(SolveError::Underflow { t, h: h_try, y });
        }
        let step = dopri_step(&mut rhs, t, &y, &f0, h_try)?;
        stats.evaluations += 6;
        let err = err_norm(&step.err);
        if !err.is_finite() {
            return Err(SolveError::NonFinite { t });
        }
        let fac = if err == 0.0 { FAC_MAX } else { (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX) };
        if err <= 1.0 {
            stats.accepted += 1;
            let t_new = if last { t_end } else { t + h_try };
            while let Some(&ts) = pending.peek() {
                if ts > t_new {
                    break;
                }
                if ts == t_new {
                    emit(ts, &step.y)?;
                } else {
                    step.dense.eval(ts, &mut buf);
                    emit(ts, &buf)?;
                }
                pending.next();
            }
            t = t_new;
            y = step.y;
            f0 = step.f_end;
            let grow = if last_rejected { fac.min(1.0) } else { fac };
            h = (h_try * grow).min(opts.h_max);
            last_rejected = false;
        } else {
            stats.rejected += 1;
            h = h_try * fac.min(1.0);
            last_rejected = true;
        }
    }
    Ok(stats)
}

/// Sampled trajectory in Birkhoff coordinates (ζₙ) or Fourier modes (û(n), n ≥ 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub coordinates: Coordinates,
    pub times: Vec<f64>,
    /// values[i][n−1] is ζₙ or û(n) at times[i].
    pub values: Vec<Vec<Complex64>>,
    /// Named diagnostic channels, one value per sample.
    pub channels: Vec<(String, Vec<f64>)>,
    pub config: RunConfig,
    pub stats: StepStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coordinates {
    Birkhoff,
    Fourier,
}

pub const CH_L2: &str = "l2_norm_sq";
pub const CH_MODE_ONE: &str = "mode_one_sq";
pub const CH_GAP_PRODUCTS: &str = "gap_products";
pub const CH_INT_MODE_ONE: &str = "int_mode_one_sq";
pub const CH_INT_GAP_PRODUCTS: &str = "int_gap_products";

pub fn ps_channel(s: f64) -> String {
    format!("p_s={s}")
}

pub fn ps_rate_channel(s: f64) -> String {
    format!("int_dps_dt_s={s}")
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Birkhoff state at sample `i`.
    pub fn state(&self, i: usize) -> BirkhoffState {
        BirkhoffState {
            t: self.times[i],
            zeta: self.values[i].clone(),
        }
    }

    pub fn actions(&self, i: usize) -> Actions {
        Actions {
            gamma: self.values[i].iter().map(|z| z.norm_sqr()).collect(),
        }
    }

    pub fn last_state(&self) -> Option<BirkhoffState> {
        (!self.is_empty()).then(|| self.state(self.len() - 1))
    }
}

/// Sample grid 0, dt, 2dt, … up to t_end, with t_end appended if it is not on
/// the grid.
pub fn sample_times(t0: f64, t_end: f64, dt: f64) -> Vec<f64> {
    let count = ((t_end - t0) / dt + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=count).map(|k| t0 + k as f64 * dt).collect();
    if let Some(&last) = times.last() {
        if t_end - last > 1e-9 * dt {
            times.push(t_end);
        } else {
            *times.last_mut().unwrap() = t_end.max(last);
        }
    }
    times
}

/// Layout of the augmented real state vector.
struct Layout {
    n: usize,
    ps: Vec<f64>,
}

impl Layout {
    fn dim(&self) -> usize {
        2 * self.n + 2 + self.ps.len()
    }

    fn gauge(&self, y: &[f64]) -> Vec<Complex64> {
        (0..self.n).map(|i| Complex64::new(y[2 * i], y[2 * i + 1])).collect()
    }

    /// Squared h^{1/2} norm of the coordinate part, max-norm of the integrals.
    fn err_norm(&self, e: &[f64], tol: f64) -> f64 {
        let z: f64 = (0..self.n)
            .map(|i| (i + 1) as f64 * (e[2 * i] * e[2 * i] + e[2 * i + 1] * e[2 * i + 1]))
            .sum();
        let aux = e[2 * self.n..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        z.sqrt().max(aux) / tol
    }
}

fn augmented_rhs(layout: &Layout, alpha: f64, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
    let n = layout.n;
    let z = layout.gauge(y);
    let zeta: Vec<Complex64> = z.iter().enumerate().map(|(i, v)| gauge_phase(i + 1, t) * v).collect();
    let state = BirkhoffState { t, zeta };
    let actions = state.actions();
    let omega = frequencies(&actions);
    let ws = FieldWorkspace::new(&state)?;
    let damping = if alpha != 0.0 { ws.damping() } else { vec![Complex64::new(0.0, 0.0); n] };
    for i in 0..n {
        let k = (i + 1) as f64;
        let f = Complex64::new(0.0, omega[i] - k * k) * z[i] - alpha * gauge_phase(i + 1, t).conj() * damping[i];
        dy[2 * i] = f.re;
        dy[2 * i + 1] = f.im;
    }
    dy[2 * n] = ws.mode_one_projection().norm_sqr();
    dy[2 * n + 1] = gap_product_sum(&actions);
    for (j, &s) in layout.ps.iter().enumerate() {
        dy[2 * n + 2 + j] = ps_rate(&ws, s, alpha);
    }
    Ok(())
}

/// Σ_{n≥0} γₙγₙ₊₁ with γ₀ = 1.
pub fn gap_product_sum(actions: &Actions) -> f64 {
    (0..actions.n()).map(|k| actions.gamma(k) * actions.gamma(k + 1)).sum()
}

/// One DOPRI step of the undamped-plus-damped gauge system from `state`,
/// returning the advanced state and the h^{1/2} norm of the error estimate.
pub fn step(state: &BirkhoffState, dt: f64, alpha: f64) -> Result<(BirkhoffState, f64)> {
    let layout = Layout { n: state.n(), ps: Vec::new() };
    let mut y = vec![0.0; layout.dim()];
    for (i, z) in state.zeta.iter().enumerate() {
        let g = gauge_phase(i + 1, state.t).conj() * z;
        y[2 * i] = g.re;
        y[2 * i + 1] = g.im;
    }
    let mut rhs = |t: f64, y: &[f64], dy: &mut [f64]| augmented_rhs(&layout, alpha, t, y, dy);
    let mut f0 = vec![0.0; y.len()];
    rhs(state.t, &y, &mut f0)?;
    let s = dopri_step(&mut rhs, state.t, &y, &f0, dt).map_err(|e| map_solve_error(e, &layout))?;
    let t = state.t + dt;
    let zeta = layout.gauge(&s.y).iter().enumerate().map(|(i, v)| gauge_phase(i + 1, t) * v).collect();
    let err = layout.err_norm(&s.err[..2 * layout.n], 1.0);
    Ok((BirkhoffState { t, zeta }, err))
}

fn map_solve_error(e: SolveError, layout: &Layout) -> Error {
    match e {
        SolveError::Underflow { t, h, y } => {
            let zeta = layout.gauge(&y).iter().enumerate().map(|(i, v)| gauge_phase(i + 1, t) * v).collect();
            Error::StepUnderflow {
                t,
                dt: h,
                last: Box::new(BirkhoffState { t, zeta }),
            }
        }
        SolveError::NonFinite { t } => Error::Divergence {
            t,
            reason: "non-finite state".into(),
        },
        SolveError::Rhs(e) => e,
    }
}

/// Integrates the Birkhoff system from `initial` to `config.t_end`.
pub fn evolve(initial: &BirkhoffState, config: &RunConfig) -> Result<Trajectory> {
    config.validate()?;
    if initial.n() != config.n_modes {
        return Err(Error::InvalidInput(format!(
            "initial state has {} modes, config asks for {}",
            initial.n(),
            config.n_modes
        )));
    }
    if initial.h_half_norm_sq() > 100.0 {
        return Err(Error::InvalidInput("initial h^1/2 norm exceeds 10".into()));
    }
    let layout = Layout {
        n: initial.n(),
        ps: config.ps_orders.clone(),
    };
    let n = layout.n;
    let mut y0 = vec![0.0; layout.dim()];
    for (i, z) in initial.zeta.iter().enumerate() {
        let g = gauge_phase(i + 1, initial.t).conj() * z;
        y0[2 * i] = g.re;
        y0[2 * i + 1] = g.im;
    }
    let times = sample_times(initial.t, config.t_end, config.sample_dt);

    let mut values = Vec::with_capacity(times.len());
    let mut out_times = Vec::with_capacity(times.len());
    let n_ps = layout.ps.len();
    let mut l2 = Vec::new();
    let mut mode_one = Vec::new();
    let mut gaps = Vec::new();
    let mut int_mode_one = Vec::new();
    let mut int_gaps = Vec::new();
    let mut ps_vals = vec![Vec::new(); n_ps];
    let mut ps_ints = vec![Vec::new(); n_ps];

    let emit = |t: f64, y: &[f64]| -> Result<()> {
        let zeta: Vec<Complex64> = layout.gauge(y).iter().enumerate().map(|(i, v)| gauge_phase(i + 1, t) * v).collect();
        let state = BirkhoffState { t, zeta };
        let ws = FieldWorkspace::new(&state)?;
        let actions = state.actions();
        l2.push(2.0 * state.h_half_norm_sq());
        mode_one.push(ws.mode_one_projection().norm_sqr());
        gaps.push(gap_product_sum(&actions));
        int_mode_one.push(y[2 * n]);
        int_gaps.push(y[2 * n + 1]);
        for (j, &s) in layout.ps.iter().enumerate() {
            ps_vals[j].push(ps_functional(&state, s));
            ps_ints[j].push(y[2 * n + 2 + j]);
        }
        out_times.push(t);
        values.push(state.zeta);
        Ok(())
    };
    let opts = SolverOptions {
        h_init: 1e-3,
        h_max: (10.0 * config.sample_dt).max(1e-3),
    };
    let tol = config.tol;
    let stats = integrate(
        |t, y, dy| augmented_rhs(&layout, config.alpha, t, y, dy),
        |e| layout.err_norm(e, tol),
        initial.t,
        &y0,
        &times,
        opts,
        emit,
    )
    .map_err(|e| map_solve_error(e, &layout))?;

    let mut channels = vec![
        (CH_L2.to_string(), l2),
        (CH_MODE_ONE.to_string(), mode_one),
        (CH_GAP_PRODUCTS.to_string(), gaps),
    ];
    for (j, &s) in layout.ps.iter().enumerate() {
        channels.push((ps_channel(s), std::mem::take(&mut ps_vals[j])));
    }
    channels.push((CH_INT_MODE_ONE.to_string(), int_mode_one));
    channels.push((CH_INT_GAP_PRODUCTS.to_string(), int_gaps));
    for (j, &s) in layout.ps.iter().enumerate() {
        channels.push((ps_rate_channel(s), std::mem::take(&mut ps_ints[j])));
    }
    Ok(Trajectory {
        coordinates: Coordinates::Birkhoff,
        times: out_times,
        values,
        channels,
        config: config.clone(),
        stats,
    })
}

/// Maps the configured initial data through Φ and integrates.
pub fn evolve_config(config: &RunConfig) -> Result<Trajectory> {
    config.validate()?;
    let (state, _) = initial_state(config)?;
    evolve(&state, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tableau_consistency() {
        for (row, c) in A.iter().zip(C) {
            let s: f64 = row.iter().sum();
            assert!((s - c).abs() < 1e-15);
        }
        assert!((B.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(E.iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn exponential_decay_is_fifth_order() {
        // y' = −y, exact solution e^{−h}; the local error scales as h⁶
        let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = -y[0];
            Ok(())
        };
        let errs: Vec<f64> = [0.2, 0.1]
            .iter()
            .map(|&h| {
                let s = dopri_step(&mut f, 0.0, &[1.0], &[-1.0], h).unwrap();
                (s.y[0] - (-h as f64).exp()).abs()
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 5.5, "observed local order {order}");
    }

    #[test]
    fn dense_output_matches_endpoints() {
        let mut f = |t: f64, _y: &[f64], dy: &mut [f64]| {
            dy[0] = t.cos();
            Ok(())
        };
        let mut mid_err = |h: f64| {
            let s = dopri_step(&mut f, 0.0, &[0.0], &[1.0], h).unwrap();
            let mut out = [0.0];
            s.dense.eval(h, &mut out);
            assert!((out[0] - s.y[0]).abs() < 1e-15);
            s.dense.eval(h / 2.0, &mut out);
            (out[0] - (h / 2.0).sin()).abs()
        };
        // fourth-order interpolant: local error O(h⁵)
        let order = (mid_err(0.2) / mid_err(0.1)).log2();
        assert!(order > 4.5, "observed interpolation order {order}");
        assert!(mid_err(0.05) < 1e-10);
    }

    #[test]
    fn sample_grid() {
        assert_eq!(sample_times(0.0, 1.0, 0.25), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(sample_times(0.0, 1.1, 0.5), vec![0.0, 0.5, 1.0, 1.1]);
    }

    #[test]
    fn zero_state_step_is_trivial() {
        let (s, err) = step(&BirkhoffState::zeros(4), 0.1, 0.5).unwrap();
        assert!(s.zeta.iter().all(|z| z.norm() == 0.0));
        assert_eq!(err, 0.0);
    }
}

//! Coupled time stepping of the underdamped system and its small-mass limit.
//!
//! Both processes consume the same Brownian increment ΔB on every grid step. The
//! underdamped step freezes (F, γ, σ) at the current position and advances the
//! velocity with the exact Ornstein–Uhlenbeck solution of the frozen system,
//!
//! ```text
//! v ← E v + γ⁻¹(I − E) F + ξ,    E = exp(−γ dt / m),
//! Cov ξ = m⁻² ∫₀^dt e^{−γs/m} σσᵀ e^{−γᵀs/m} ds = (J − E J Eᵀ) / m,
//! x ← x + v dt,
//! ```
//!
//! with J the Lyapunov solution γJ + Jγᵀ = σσᵀ and ξ = Σ^{1/2} (σσᵀ)^{+1/2} σ ΔB / √dt.
//! The limit is advanced by Euler–Maruyama. A process that leaves X at a grid point
//! is sent to the cemetery state and stays there.

use std::io::{self, Write};

use nalgebra::SMatrix;
use thiserror::Error;

use crate::error::Error;
use crate::linalg::{self, Matrix, Vector};
use crate::lyapunov;
use crate::models::{limiting_coefficients, Model};
use crate::noise::NoiseStream;

/// A position–velocity pair inside X, or the absorbing cemetery point Δ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedState<const N: usize> {
    InDomain { x: Vector<N>, v: Option<Vector<N>> },
    Cemetery,
}

impl<const N: usize> ExtendedState<N> {
    pub fn position(&self) -> Option<&Vector<N>> {
        match self {
            Self::InDomain { x, .. } => Some(x),
            Self::Cemetery => None,
        }
    }

    pub fn velocity(&self) -> Option<&Vector<N>> {
        match self {
            Self::InDomain { v, .. } => v.as_ref(),
            Self::Cemetery => None,
        }
    }

    pub fn is_cemetery(&self) -> bool {
        matches!(self, Self::Cemetery)
    }
}

/// |p − q| for two in-domain points, +∞ if either (or both) is Δ.
pub fn d_infinity<const N: usize>(p: &ExtendedState<N>, q: &ExtendedState<N>) -> f64 {
    match (p.position(), q.position()) {
        (Some(a), Some(b)) => (a - b).norm(),
        _ => f64::INFINITY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Process {
    Underdamped,
    Limit,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepFailure {
    #[error("non-finite state produced")]
    NonFinite,
    #[error("coefficient evaluation failed: {0}")]
    Coefficients(#[from] Error),
}

/// Why a path was aborted.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{process:?} integration failed at step {step} (t = {time}): {failure}")]
pub struct PathFailure {
    pub process: Process,
    pub step: usize,
    pub time: f64,
    pub failure: StepFailure,
}

fn all_finite<const N: usize>(v: &Vector<N>) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// One frozen-coefficient splitting step of `m dv = (F − γv) dt + σ dB`, `dx = v dt`.
pub fn step_underdamped<const N: usize, const K: usize>(
    model: &Model<N, K>,
    state: &ExtendedState<N>,
    mass: f64,
    dt: f64,
    dw: &Vector<K>,
) -> Result<ExtendedState<N>, StepFailure> {
    let (x, v) = match state {
        ExtendedState::Cemetery => return Ok(ExtendedState::Cemetery),
        ExtendedState::InDomain { x, v } => (x, v.unwrap_or_else(Vector::<N>::zeros)),
    };
    let gamma = model.friction(x)?;
    let sigma = model.diffusion(x)?;
    let force = model.force(x);
    let q = sigma.sigma_sq();
    let j = lyapunov::solve_lyapunov(&gamma, &q)?.j;
    let g = gamma.as_matrix();
    let inv = lyapunov::friction_inverse(&gamma)?;

    let (decay, one_minus_decay, cov) = if linalg::is_diagonal(g) {
        // exact entrywise forms; expm1 avoids cancellation when γ dt / m is small
        let rate = Vector::<N>::from_fn(|i, _| g[(i, i)] * dt / mass);
        let decay = Matrix::<N>::from_fn(|i, c| if i == c { (-rate[i]).exp() } else { 0.0 });
        let one_minus = Matrix::<N>::from_fn(|i, c| if i == c { -(-rate[i]).exp_m1() } else { 0.0 });
        let cov = Matrix::<N>::from_fn(|r, c| -j[(r, c)] * (-(rate[r] + rate[c])).exp_m1() / mass);
        (decay, one_minus, cov)
    } else {
        let decay = linalg::expm(&(-g * (dt / mass)));
        let cov = (j - decay * j * decay.transpose()) / mass;
        (decay, Matrix::<N>::identity() - decay, cov)
    };

    let factor: SMatrix<f64, N, K> =
        linalg::psd_sqrt(&cov) * linalg::psd_pinv_sqrt(&q) * sigma.as_matrix() / dt.sqrt();
    let v_new = decay * v + inv * one_minus_decay * force + factor * dw;
    let x_new = x + v_new * dt;
    if !all_finite(&v_new) || !all_finite(&x_new) {
        return Err(StepFailure::NonFinite);
    }
    if model.domain().contains(x_new.as_slice()) {
        Ok(ExtendedState::InDomain {
            x: x_new,
            v: Some(v_new),
        })
    } else {
        Ok(ExtendedState::Cemetery)
    }
}

/// One Euler–Maruyama step of `dx = (γ⁻¹F + S) dt + γ⁻¹σ dB` (Itô).
pub fn step_overdamped<const N: usize, const K: usize>(
    model: &Model<N, K>,
    state: &ExtendedState<N>,
    dt: f64,
    dw: &Vector<K>,
) -> Result<ExtendedState<N>, StepFailure> {
    let x = match state {
        ExtendedState::Cemetery => return Ok(ExtendedState::Cemetery),
        ExtendedState::InDomain { x, .. } => x,
    };
    let c = limiting_coefficients(model, x)?;
    let x_new = x + c.drift * dt + c.diffusion * dw;
    if !all_finite(&x_new) {
        return Err(StepFailure::NonFinite);
    }
    if model.domain().contains(x_new.as_slice()) {
        Ok(ExtendedState::InDomain { x: x_new, v: None })
    } else {
        Ok(ExtendedState::Cemetery)
    }
}

/// Initial data and grid for one coupled path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledSpec<const N: usize> {
    pub x0: Vector<N>,
    pub v0: Vector<N>,
    pub mass: f64,
    pub horizon: f64,
    pub dt: f64,
    pub master_seed: u64,
    pub path_index: u64,
}

impl<const N: usize> CoupledSpec<N> {
    /// Zero initial velocity.
    pub fn new(x0: Vector<N>, mass: f64, horizon: f64, dt: f64, master_seed: u64, path_index: u64) -> Self {
        Self {
            x0,
            v0: Vector::<N>::zeros(),
            mass,
            horizon,
            dt,
            master_seed,
            path_index,
        }
    }

    /// Number of grid steps; the last one is shortened if dt does not divide T.
    pub fn steps(&self) -> usize {
        if self.horizon <= 0.0 {
            return 0;
        }
        let ratio = self.horizon / self.dt;
        let n = ratio.round();
        if (n - ratio).abs() <= 1e-9 * ratio.max(1.0) {
            n as usize
        } else {
            ratio.ceil() as usize
        }
    }

    fn time_at(&self, step: usize, steps: usize) -> f64 {
        if step == steps {
            self.horizon
        } else {
            step as f64 * self.dt
        }
    }
}

/// Summary of one coupled path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    /// sup over grid times of d∞(xᵐ(t), x(t)); +∞ once either process is Δ.
    pub sup_distance: f64,
    pub exit_time_m: Option<f64>,
    pub exit_time_limit: Option<f64>,
    pub failure: Option<PathFailure>,
}

/// Time grid and coupled samples of xᵐ and x.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPair<const N: usize> {
    pub times: Vec<f64>,
    pub underdamped: Vec<ExtendedState<N>>,
    pub limit: Vec<ExtendedState<N>>,
    pub outcome: PathOutcome,
}

impl<const N: usize> TrajectoryPair<N> {
    pub fn sup_distance(&self) -> f64 {
        self.outcome.sup_distance
    }

    /// CSV with header `t,x_1..x_n,v_1..v_n,x_lim_1..x_lim_n,exited_m,exited_lim`;
    /// Δ is written as empty fields.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((1..=N).map(|i| format!("x_{i}")));
        header.extend((1..=N).map(|i| format!("v_{i}")));
        header.extend((1..=N).map(|i| format!("x_lim_{i}")));
        header.push("exited_m".into());
        header.push("exited_lim".into());
        writeln!(out, "{}", header.join(","))?;
        for ((t, um), lim) in self.times.iter().zip(&self.underdamped).zip(&self.limit) {
            let mut row = vec![t.to_string()];
            match um {
                ExtendedState::InDomain { x, v } => {
                    row.extend(x.iter().map(|c| c.to_string()));
                    let v = v.unwrap_or_else(Vector::<N>::zeros);
                    row.extend(v.iter().map(|c| c.to_string()));
                }
                ExtendedState::Cemetery => row.extend(std::iter::repeat_n(String::new(), 2 * N)),
            }
            match lim.position() {
                Some(x) => row.extend(x.iter().map(|c| c.to_string())),
                None => row.extend(std::iter::repeat_n(String::new(), N)),
            }
            row.push(u8::from(um.is_cemetery()).to_string());
            row.push(u8::from(lim.is_cemetery()).to_string());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn run_coupled<const N: usize, const K: usize>(
    model: &Model<N, K>,
    spec: &CoupledSpec<N>,
    mut observe: Option<&mut dyn FnMut(f64, &ExtendedState<N>, &ExtendedState<N>)>,
) -> PathOutcome {
    let start_inside = model.domain().contains(spec.x0.as_slice());
    let (mut um, mut lim) = if start_inside {
        (
            ExtendedState::InDomain {
                x: spec.x0,
                v: Some(spec.v0),
            },
            ExtendedState::InDomain { x: spec.x0, v: None },
        )
    } else {
        (ExtendedState::Cemetery, ExtendedState::Cemetery)
    };
    let mut outcome = PathOutcome {
        sup_distance: d_infinity(&um, &lim),
        exit_time_m: (!start_inside).then_some(0.0),
        exit_time_limit: (!start_inside).then_some(0.0),
        failure: None,
    };
    if let Some(f) = observe.as_deref_mut() {
        f(0.0, &um, &lim);
    }
    let steps = spec.steps();
    let mut noise = NoiseStream::<K>::new(spec.master_seed, spec.path_index, spec.dt);
    let mut t_prev = 0.0;
    for step in 1..=steps {
        let t = spec.time_at(step, steps);
        let h = t - t_prev;
        let dw = if step == steps && h != spec.dt {
            noise.next_increment_over(h)
        } else {
            noise.next_increment()
        };
        t_prev = t;
        if um.is_cemetery() && lim.is_cemetery() && observe.is_none() {
            break;
        }
        let fail = |process, failure| PathFailure {
            process,
            step,
            time: t,
            failure,
        };
        if !um.is_cemetery() {
            match step_underdamped(model, &um, spec.mass, h, &dw) {
                Ok(next) => {
                    if next.is_cemetery() {
                        outcome.exit_time_m = Some(t);
                    }
                    um = next;
                }
                Err(e) => {
                    outcome.failure = Some(fail(Process::Underdamped, e));
                    break;
                }
            }
        }
        if !lim.is_cemetery() {
            match step_overdamped(model, &lim, h, &dw) {
                Ok(next) => {
                    if next.is_cemetery() {
                        outcome.exit_time_limit = Some(t);
                    }
                    lim = next;
                }
                Err(e) => {
                    outcome.failure = Some(fail(Process::Limit, e));
                    break;
                }
            }
        }
        outcome.sup_distance = outcome.sup_distance.max(d_infinity(&um, &lim));
        if let Some(f) = observe.as_deref_mut() {
            f(t, &um, &lim);
        }
    }
    outcome
}

/// Integrates both systems from the same x0 under one shared noise stream and
/// records every grid sample.
pub fn simulate_coupled<const N: usize, const K: usize>(
    model: &Model<N, K>,
    spec: &CoupledSpec<N>,
) -> TrajectoryPair<N> {
    simulate_coupled_every(model, spec, 1)
}

/// As [`simulate_coupled`], keeping every `stride`-th grid sample (plus t = 0).
/// The sup-distance and exit times still use every grid point.
pub fn simulate_coupled_every<const N: usize, const K: usize>(
    model: &Model<N, K>,
    spec: &CoupledSpec<N>,
    stride: usize,
) -> TrajectoryPair<N> {
    let stride = stride.max(1);
    let mut times = Vec::new();
    let mut underdamped = Vec::new();
    let mut limit = Vec::new();
    let mut counter = 0usize;
    let mut record = |t: f64, a: &ExtendedState<N>, b: &ExtendedState<N>| {
        if counter.is_multiple_of(stride) {
            times.push(t);
            underdamped.push(*a);
            limit.push(*b);
        }
        counter += 1;
    };
    let outcome = run_coupled(model, spec, Some(&mut record));
    TrajectoryPair {
        times,
        underdamped,
        limit,
        outcome,
    }
}

/// Sup-distance and exit times only; stops early once both processes are Δ.
pub fn coupled_outcome<const N: usize, const K: usize>(
    model: &Model<N, K>,
    spec: &CoupledSpec<N>,
) -> PathOutcome {
    run_coupled(model, spec, None)
}

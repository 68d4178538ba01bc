//! Prescribed population path, coherence magnitude and steady states.
//!
//! The ground population is pinned to `f(t) = [1 − g(t)]a_i + g(t)a_f` with a
//! logistic `g(t) = 1/(1 + e^{−αt})`, and the coherence is constrained to a
//! fixed phase, `ρ̃_ge = h(t)e^{iφ₀}`. Eliminating the drive from the
//! rotating-wave equations leaves a Bernoulli equation for the magnitude,
//!
//! ```text
//! ḣ = (2f − 1)/(2h) · [2Γ(1 + n̄ − (2n̄+1)f) − ḟ] − Γ̃h,
//! ```
//!
//! which, like every Bernoulli equation, becomes linear after the substitution
//! `u = h²` (multiply through by `2h`):
//!
//! ```text
//! u̇ = −2Γ̃u + s(t),   s(t) = (2f − 1)[2Γ(1 + n̄ − (2n̄+1)f) − ḟ].
//! ```
//!
//! Working in `u` removes the `1/h` singularity at `h = 0`, and a physical
//! coherence exists exactly where `u ≥ 0`.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use thiserror::Error;

use crate::grid::{Interval, TimeGrid};
use crate::model::{NoiseParams, ParamError, SystemParams};
use crate::ode::rk4_step;

/// Default bound on `g(t0)`: the transition must have barely started at `t0`.
pub const DEFAULT_TAIL_TOL: f64 = 1e-3;
/// `u ≥ −U_TOL` counts as feasible.
pub const U_TOL: f64 = 1e-12;
/// Default start of the window in units of `1/α` before the transition midpoint.
pub const DEFAULT_START_SPAN: f64 = 8.0;

/// Constrained trajectory: initial and target ground populations, transition
/// rate, start time and coherence phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlTarget {
    a_i: f64,
    a_f: f64,
    alpha: f64,
    t0: f64,
    phi0: f64,
}

impl ControlTarget {
    /// `t0 = −8/α`, `φ₀ = 0`.
    pub fn new(a_i: f64, a_f: f64, alpha: f64) -> Result<Self, ParamError> {
        for (name, v) in [("a_i", a_i), ("a_f", a_f)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ParamError::PopulationOutOfRange { name, value: v });
            }
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(ParamError::NonPositive { name: "alpha", value: alpha });
        }
        Ok(Self { a_i, a_f, alpha, t0: -DEFAULT_START_SPAN / alpha, phi0: 0.0 })
    }

    /// Start time; requires `g(t0) ≤` [`DEFAULT_TAIL_TOL`].
    pub fn with_t0(self, t0: f64) -> Result<Self, ParamError> {
        self.with_t0_tolerance(t0, DEFAULT_TAIL_TOL)
    }

    pub fn with_t0_tolerance(self, t0: f64, tail_tol: f64) -> Result<Self, ParamError> {
        if !t0.is_finite() {
            return Err(ParamError::NonFinite("t0"));
        }
        let g_t0 = g_sigmoid(t0, self.alpha);
        if t0 >= 0.0 || g_t0 > tail_tol {
            return Err(ParamError::TransitionTail { t0, g_t0, tol: tail_tol });
        }
        Ok(Self { t0, ..self })
    }

    pub fn with_phi0(self, phi0: f64) -> Result<Self, ParamError> {
        if !phi0.is_finite() {
            return Err(ParamError::NonFinite("phi0"));
        }
        Ok(Self { phi0, ..self })
    }

    pub fn with_a_f(self, a_f: f64) -> Result<Self, ParamError> {
        let t = Self::new(self.a_i, a_f, self.alpha)?;
        Ok(Self { t0: self.t0, phi0: self.phi0, ..t })
    }

    pub fn a_i(&self) -> f64 {
        self.a_i
    }

    pub fn a_f(&self) -> f64 {
        self.a_f
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn phi0(&self) -> f64 {
        self.phi0
    }
}

/// Logistic `1/(1 + e^{−αt})`, evaluated on the branch that never overflows.
pub fn g_sigmoid(t: f64, alpha: f64) -> f64 {
    let x = alpha * t;
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Prescribed ground population `f(t)`.
pub fn f_profile(t: f64, target: &ControlTarget) -> f64 {
    let g = g_sigmoid(t, target.alpha);
    (1.0 - g) * target.a_i + g * target.a_f
}

/// `ḟ = α(a_f − a_i)g(1 − g)`, using `ġ = αg(1 − g)`.
pub fn f_dot(t: f64, target: &ControlTarget) -> f64 {
    let g = g_sigmoid(t, target.alpha);
    target.alpha * (target.a_f - target.a_i) * g * (1.0 - g)
}

/// Source of the linear coherence equation, `s = (2f − 1)[2Γ(1+n̄−(2n̄+1)f) − ḟ]`.
///
/// With `u(t0) = 0` the coherence can only start if `s(t0) ≥ 0`.
pub fn source_term(t: f64, target: &ControlTarget, noise: &NoiseParams) -> f64 {
    let f = f_profile(t, target);
    (2.0 * f - 1.0) * (noise.thermal_drift(f) - f_dot(t, target))
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ProfileError {
    #[error("coherence cannot start: source term s(t0) = {s0} < 0 with u(t0) = 0")]
    InfeasibleAtOnset { s0: f64 },
    #[error("grid starts at {grid_start} but the target starts at t0 = {t0}")]
    GridStart { grid_start: f64, t0: f64 },
    #[error("coherence seed u(t0) = {0} must be finite and non-negative")]
    BadSeed(f64),
    #[error("seed |rho_ge|^2 = {u_seed} exceeds f(t0)(1-f(t0)) = {limit}")]
    SeedNotPositive { u_seed: f64, limit: f64 },
}

/// `u(t) = h(t)²` on a uniform grid, with feasibility annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceProfile {
    target: ControlTarget,
    noise: NoiseParams,
    grid: TimeGrid,
    u_seed: f64,
    u: Vec<f64>,
    u_dot: Vec<f64>,
    feasible: Vec<bool>,
    first_violation_time: Option<f64>,
}

impl CoherenceProfile {
    /// Integrates the coherence ODE with RK4 on `grid` (which must start at
    /// `target.t0()`). Fails if the coherence would turn negative immediately.
    pub fn solve(
        target: &ControlTarget,
        noise: &NoiseParams,
        grid: &TimeGrid,
        u_seed: f64,
    ) -> Result<Self, ProfileError> {
        if u_seed == 0.0 {
            let s0 = source_term(target.t0, target, noise);
            if s0 < 0.0 {
                return Err(ProfileError::InfeasibleAtOnset { s0 });
            }
        }
        Self::solve_unchecked(target, noise, grid, u_seed)
    }

    /// As [`solve`](Self::solve), but an onset-infeasible profile is returned
    /// (with `first_violation_time = t0`) instead of rejected.
    pub fn solve_unchecked(
        target: &ControlTarget,
        noise: &NoiseParams,
        grid: &TimeGrid,
        u_seed: f64,
    ) -> Result<Self, ProfileError> {
        check_seed(target, grid, u_seed)?;
        let rate = 2.0 * noise.gamma_total();
        let rhs = |t: f64, u: f64| -> Result<f64, core::convert::Infallible> {
            Ok(-rate * u + source_term(t, target, noise))
        };
        let n = grid.len();
        let mut u = Vec::with_capacity(n);
        u.push(u_seed);
        for k in 1..n {
            let next = match rk4_step(grid.time(k - 1), u[k - 1], grid.step(), rhs) {
                Ok(v) => v,
                Err(never) => match never {},
            };
            u.push(next);
        }
        let u_dot: Vec<f64> =
            u.iter().enumerate().map(|(k, &uk)| -rate * uk + source_term(grid.time(k), target, noise)).collect();
        let feasible: Vec<bool> = u.iter().map(|&v| v >= -U_TOL).collect();
        let mut profile = Self {
            target: *target,
            noise: *noise,
            grid: *grid,
            u_seed,
            u,
            u_dot,
            feasible,
            first_violation_time: None,
        };
        let onset_blocked = u_seed == 0.0 && profile.source_at(grid.start()) < 0.0;
        profile.first_violation_time = if onset_blocked { Some(grid.start()) } else { profile.locate_violation() };
        Ok(profile)
    }

    fn locate_violation(&self) -> Option<f64> {
        let k = self.feasible.iter().position(|&ok| !ok)?;
        if k == 0 {
            return Some(self.grid.start());
        }
        let (mut lo, mut hi) = (self.grid.time(k - 1), self.grid.time(k));
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.hermite(mid) >= -U_TOL {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    }

    pub fn target(&self) -> &ControlTarget {
        &self.target
    }

    pub fn noise(&self) -> &NoiseParams {
        &self.noise
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn u_seed(&self) -> f64 {
        self.u_seed
    }

    /// `u = h²` at the grid samples.
    pub fn u(&self) -> &[f64] {
        &self.u
    }

    /// `u̇` at the grid samples, from the ODE right-hand side.
    pub fn u_dot(&self) -> &[f64] {
        &self.u_dot
    }

    pub fn feasible(&self) -> &[bool] {
        &self.feasible
    }

    /// Earliest time at which `u` drops below `−U_TOL`.
    /// `t0` itself when a zero seed meets a negative source.
    pub fn first_violation_time(&self) -> Option<f64> {
        self.first_violation_time
    }

    pub fn is_fully_feasible(&self) -> bool {
        self.first_violation_time().is_none()
    }

    pub fn min_u(&self) -> f64 {
        self.u.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `h = √u` at sample `k`, `None` where `u < −U_TOL`.
    pub fn h(&self, k: usize) -> Option<f64> {
        let u = self.u[k];
        (u >= -U_TOL).then(|| u.max(0.0).sqrt())
    }

    pub fn source_at(&self, t: f64) -> f64 {
        source_term(t, &self.target, &self.noise)
    }

    /// `u(t)` anywhere on the grid span by cubic Hermite interpolation with the
    /// ODE slopes; `None` outside `[start, end]`.
    pub fn u_at(&self, t: f64) -> Option<f64> {
        if t < self.grid.start() || t > self.grid.end() {
            return None;
        }
        Some(self.hermite(t))
    }

    /// `u̇(t) = −2Γ̃u(t) + s(t)` with `u(t)` from [`u_at`](Self::u_at).
    pub fn u_dot_at(&self, t: f64) -> Option<f64> {
        let u = self.u_at(t)?;
        Some(-2.0 * self.noise.gamma_total() * u + self.source_at(t))
    }

    fn hermite(&self, t: f64) -> f64 {
        let k = self.grid.locate(t);
        let dt = self.grid.step();
        let x = (t - self.grid.time(k)) / dt;
        let x2 = x * x;
        let x3 = x2 * x;
        let h00 = 2.0 * x3 - 3.0 * x2 + 1.0;
        let h10 = x3 - 2.0 * x2 + x;
        let h01 = -2.0 * x3 + 3.0 * x2;
        let h11 = x3 - x2;
        h00 * self.u[k] + h10 * dt * self.u_dot[k] + h01 * self.u[k + 1] + h11 * dt * self.u_dot[k + 1]
    }
}

fn check_seed(target: &ControlTarget, grid: &TimeGrid, u_seed: f64) -> Result<(), ProfileError> {
    let tol = 1e-9 * grid.step().max(target.t0.abs());
    if (grid.start() - target.t0).abs() > tol {
        return Err(ProfileError::GridStart { grid_start: grid.start(), t0: target.t0 });
    }
    if !(u_seed >= 0.0) || !u_seed.is_finite() {
        return Err(ProfileError::BadSeed(u_seed));
    }
    let f0 = f_profile(target.t0, target);
    let limit = f0 * (1.0 - f0);
    if u_seed > limit + crate::model::POSITIVITY_TOL {
        return Err(ProfileError::SeedNotPositive { u_seed, limit });
    }
    Ok(())
}

/// Independent evaluation of the coherence by variation of constants,
///
/// ```text
/// u(t) = e^{−2Γ̃(t−t0)}u(t0) + ∫_{t0}^{t} e^{−2Γ̃(t−τ)} s(τ) dτ,
/// ```
///
/// accumulated interval by interval with 5-point Gauss–Legendre panels no
/// longer than one time unit.
pub fn coherence_quadrature(target: &ControlTarget, noise: &NoiseParams, grid: &TimeGrid, u_seed: f64) -> Vec<f64> {
    let rate = 2.0 * noise.gamma_total();
    let (nodes, weights) = gauss_legendre_5();
    let dt = grid.step();
    let panels = dt.ceil().max(1.0) as usize;
    let width = dt / panels as f64;
    let decay_step = (-rate * dt).exp();
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = u_seed;
    out.push(acc);
    for k in 1..grid.len() {
        let (a, b) = (grid.time(k - 1), grid.time(k));
        let mut integral = 0.0;
        for p in 0..panels {
            let lo = a + p as f64 * width;
            let mid = lo + 0.5 * width;
            for (x, w) in nodes.iter().zip(weights.iter()) {
                let tau = mid + 0.5 * width * x;
                integral += 0.5 * width * w * (-rate * (b - tau)).exp() * source_term(tau, target, noise);
            }
        }
        acc = decay_step * acc + integral;
        out.push(acc);
    }
    out
}

fn gauss_legendre_5() -> ([f64; 5], [f64; 5]) {
    let r = (10.0f64 / 7.0).sqrt();
    let x1 = (5.0 - 2.0 * r).sqrt() / 3.0;
    let x2 = (5.0 + 2.0 * r).sqrt() / 3.0;
    let s70 = 70.0f64.sqrt();
    let w1 = (322.0 + 13.0 * s70) / 900.0;
    let w2 = (322.0 - 13.0 * s70) / 900.0;
    ([-x2, -x1, 0.0, x1, x2], [w2, w1, 128.0 / 225.0, w1, w2])
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SteadyStateError {
    #[error("no steady coherence: (2a_f-1)[1+nbar-(2nbar+1)a_f] = {radicand} < 0")]
    NegativeRadicand { radicand: f64 },
    #[error("steady coherence undefined without dephasing or dissipation (0/0)")]
    DegenerateNoiseless,
}

/// `(2a − 1)[1 + n̄ − (2n̄+1)a]`
fn steady_quadratic(a: f64, noise: &NoiseParams) -> f64 {
    (2.0 * a - 1.0) * (1.0 + noise.nbar() - (2.0 * noise.nbar() + 1.0) * a)
}

/// Asymptotic coherence `h∞ = √(Γ(2a_f−1)[1+n̄−(2n̄+1)a_f]/Γ̃)` sustained by the
/// field once the population has settled at `a_f`.
pub fn steady_state_coherence(a_f: f64, noise: &NoiseParams) -> Result<f64, SteadyStateError> {
    let q = steady_quadratic(a_f, noise);
    if noise.relaxation() == 0.0 {
        return if noise.dephasing() == 0.0 { Err(SteadyStateError::DegenerateNoiseless) } else { Ok(0.0) };
    }
    if q < 0.0 {
        return Err(SteadyStateError::NegativeRadicand { radicand: q });
    }
    Ok((q * noise.relaxation() / noise.gamma_total()).sqrt())
}

/// Targets admitting a steady state, `0 ≤ q(a_f) ≤ Γ̃/(4Γ)` with
/// `q(a) = (2a − 1)[1 + n̄ − (2n̄+1)a]`. `None` when `Γ = 0` (every target
/// settles with zero coherence).
///
/// `q` factorizes, so `q ≥ 0` is the closed interval between its roots
/// `1/2` and `(1+n̄)/(2n̄+1)`. The upper condition never binds: the vertex
/// value is `1/(8(2n̄+1)) < (2n̄+1)/4 ≤ Γ̃/(4Γ)`.
pub fn steady_band(noise: &NoiseParams) -> Option<Interval> {
    if noise.relaxation() == 0.0 {
        return None;
    }
    let k = 2.0 * noise.nbar() + 1.0;
    let hi = (1.0 + noise.nbar()) / k;
    debug_assert!(1.0 / (8.0 * k) <= noise.gamma_total() / (4.0 * noise.relaxation()));
    Some(Interval::new(0.5, hi))
}

/// Steady-state summary for a single target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateReport {
    pub a_f: f64,
    /// `None` when the radicand is negative or the system is noiseless.
    pub h_inf: Option<f64>,
    pub feasible: bool,
    /// Admissible targets; `None` in the degenerate `Γ = 0` case.
    pub band: Option<Interval>,
    /// Long-time field amplitude `2Γ[1+n̄−(2n̄+1)a_f]/(μh∞)`; `None` where it
    /// diverges (`h∞ = 0` with a non-zero numerator, e.g. `a_f = 1/2`).
    pub steady_field_amplitude: Option<f64>,
    /// `Γ = 0`: steady coherence vanishes identically.
    pub degenerate: bool,
}

pub fn steady_state_feasibility(a_f: f64, noise: &NoiseParams, sys: &SystemParams) -> SteadyStateReport {
    let band = steady_band(noise);
    let h_inf = steady_state_coherence(a_f, noise).ok();
    let numerator = noise.thermal_drift(a_f);
    let steady_field_amplitude = match h_inf {
        Some(h) if h > 0.0 => Some(numerator / (sys.mu() * h)),
        Some(_) | None if numerator == 0.0 => Some(0.0),
        _ => None,
    };
    SteadyStateReport {
        a_f,
        h_inf,
        feasible: band.is_none_or(|b| b.contains(a_f)),
        band,
        steady_field_amplitude,
        degenerate: noise.relaxation() == 0.0,
    }
}

//! Accessibility maps and scalar bounds from the sign of `u = h²`.
//!
//! A target is accessible when the prescribed coherence stays real
//! (`u ≥ −U_TOL`) up to the horizon. Only the linear `u` equation is solved
//! per column; no field synthesis or forward simulation is involved.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use thiserror::Error;

use crate::grid::{Interval, TimeGrid};
use crate::model::{NoiseParams, ParamError};
use crate::profile::{f_profile, CoherenceProfile, ControlTarget, ProfileError, U_TOL};

/// Span of the finite transient window in units of `1/α`.
pub const TRANSIENT_SPAN: f64 = 16.0;
pub const DEFAULT_NBAR_TOL: f64 = 1e-3;
pub const NBAR_CAP: f64 = 64.0;
pub const BAND_EDGE_TOL: f64 = 1e-4;
pub const MIN_BAND_RESOLUTION: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SweepError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("target is infeasible already at nbar = 0")]
    NoFeasibleBaseline,
    #[error("feasibility is not monotone in nbar on [{lo}, {hi}]")]
    NonMonotoneBracket { lo: f64, hi: f64 },
    #[error("invalid axis: {0}")]
    InvalidAxis(&'static str),
    #[error("band resolution must be at least {min}, got {got}")]
    Resolution { got: usize, min: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Target ground population `a_f`.
    TargetPopulation,
    /// Thermal occupation `n̄`.
    ThermalOccupation,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::TargetPopulation => "af",
            SweepParam::ThermalOccupation => "nbar",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    pub param: SweepParam,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl AxisSpec {
    pub fn new(param: SweepParam, min: f64, max: f64, steps: usize) -> Result<Self, SweepError> {
        if steps < 2 {
            return Err(SweepError::InvalidAxis("steps must be at least 2"));
        }
        if !(min.is_finite() && max.is_finite() && min <= max) {
            return Err(SweepError::InvalidAxis("need finite min <= max"));
        }
        let ok = match param {
            SweepParam::TargetPopulation => min >= 0.0 && max <= 1.0,
            SweepParam::ThermalOccupation => min >= 0.0,
        };
        if !ok {
            return Err(SweepError::InvalidAxis("range outside the parameter's domain"));
        }
        Ok(Self { param, min, max, steps })
    }

    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.steps {
            self.max
        } else {
            self.min + (self.max - self.min) * i as f64 / (self.steps - 1) as f64
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.steps).map(move |i| self.value(i))
    }
}

/// How far ahead feasibility is required.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    /// Up to the given absolute time.
    Finite(f64),
    /// Over the transient window `t0 + 16/α` and in the `t → ∞` limit.
    Infinite,
}

impl Horizon {
    /// Default finite horizon `t0 + 16/α`.
    pub fn default_for(target: &ControlTarget) -> Self {
        Horizon::Finite(target.t0() + TRANSIENT_SPAN / target.alpha())
    }

    /// End of the time grid that is integrated.
    pub fn window_end(&self, target: &ControlTarget) -> f64 {
        match *self {
            Horizon::Finite(t) => t,
            Horizon::Infinite => target.t0() + TRANSIENT_SPAN / target.alpha(),
        }
    }
}

/// Fixed parameters of a sweep; the swept one is overwritten per column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSetup {
    pub target: ControlTarget,
    pub noise: NoiseParams,
    pub dt: f64,
    pub u_seed: f64,
}

impl SweepSetup {
    pub fn new(target: ControlTarget, noise: NoiseParams) -> Self {
        Self { target, noise, dt: 1.0, u_seed: 0.0 }
    }

    fn with_value(&self, param: SweepParam, value: f64) -> Result<(ControlTarget, NoiseParams), SweepError> {
        Ok(match param {
            SweepParam::TargetPopulation => (self.target.with_a_f(value)?, self.noise),
            SweepParam::ThermalOccupation => (self.target, self.noise.with_nbar(value)?),
        })
    }

    pub fn grid(&self, horizon: Horizon) -> Result<TimeGrid, SweepError> {
        Ok(TimeGrid::covering(self.target.t0(), horizon.window_end(&self.target), self.dt)?)
    }
}

/// One swept value.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub value: f64,
    pub u: Vec<f64>,
    pub accessible: bool,
    pub first_violation_time: Option<f64>,
    /// `lim u(t)` as `t → ∞`; only computed for [`Horizon::Infinite`].
    pub asymptotic_u: Option<f64>,
}

/// `lim u(t)` for `t → ∞`, continuing from `u_end` at the window end.
///
/// With `Γ̃ > 0` the limit is `s_∞/(2Γ̃)`; without any noise `4u + (2f−1)²`
/// is conserved.
fn asymptotic_u(target: &ControlTarget, noise: &NoiseParams, t_end: f64, u_end: f64) -> f64 {
    let a_f = target.a_f();
    let gt = noise.gamma_total();
    if gt > 0.0 {
        let s_inf = (2.0 * a_f - 1.0) * noise.thermal_drift(a_f);
        s_inf / (2.0 * gt)
    } else {
        let w_end = 2.0 * f_profile(t_end, target) - 1.0;
        let w_inf = 2.0 * a_f - 1.0;
        u_end + 0.25 * (w_end * w_end - w_inf * w_inf)
    }
}

/// Solves the coherence equation for one swept value.
pub fn evaluate_column(
    setup: &SweepSetup,
    param: SweepParam,
    value: f64,
    horizon: Horizon,
) -> Result<Column, SweepError> {
    let (target, noise) = setup.with_value(param, value)?;
    let grid = setup.grid(horizon)?;
    let profile = CoherenceProfile::solve_unchecked(&target, &noise, &grid, setup.u_seed)?;
    let mut accessible = profile.is_fully_feasible();
    let asymptotic = match horizon {
        Horizon::Finite(_) => None,
        Horizon::Infinite => {
            let u_end = profile.u()[grid.len() - 1];
            let lim = asymptotic_u(&target, &noise, grid.end(), u_end);
            accessible &= lim >= -U_TOL;
            Some(lim)
        }
    };
    Ok(Column {
        value,
        first_violation_time: profile.first_violation_time(),
        u: profile.u().to_vec(),
        accessible,
        asymptotic_u: asymptotic,
    })
}

/// `u(t)` over (swept value × time).
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityGrid {
    axis: AxisSpec,
    time: TimeGrid,
    horizon: Horizon,
    setup: SweepSetup,
    columns: Vec<Column>,
}

impl FeasibilityGrid {
    /// Assembles columns computed elsewhere (for instance in parallel); they
    /// must be in axis order.
    pub fn from_columns(
        axis: AxisSpec,
        setup: SweepSetup,
        horizon: Horizon,
        columns: Vec<Column>,
    ) -> Result<Self, SweepError> {
        let time = setup.grid(horizon)?;
        let consistent = columns.len() == axis.steps
            && columns
                .iter()
                .enumerate()
                .all(|(i, c)| c.value.to_bits() == axis.value(i).to_bits() && c.u.len() == time.len());
        if !consistent {
            return Err(SweepError::InvalidAxis("columns do not match the axis"));
        }
        Ok(Self { axis, time, horizon, setup, columns })
    }

    pub fn axis(&self) -> &AxisSpec {
        &self.axis
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn setup(&self) -> &SweepSetup {
        &self.setup
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn u(&self, i: usize, k: usize) -> f64 {
        self.columns[i].u[k]
    }

    /// The "imaginary part of h": `−√|u|` where `u < 0`, else 0.
    pub fn imag_h(&self, i: usize, k: usize) -> f64 {
        let u = self.u(i, k);
        if u < 0.0 {
            -(-u).sqrt()
        } else {
            0.0
        }
    }

    pub fn accessible(&self) -> impl Iterator<Item = bool> + '_ {
        self.columns.iter().map(|c| c.accessible)
    }

    /// Maximal runs of accessible axis values, as `[first, last]` values.
    pub fn accessible_runs(&self) -> Vec<Interval> {
        runs(&self.accessible().collect::<Vec<_>>())
            .into_iter()
            .map(|(a, b)| Interval::new(self.axis.value(a), self.axis.value(b)))
            .collect()
    }
}

fn runs(flags: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &f) in flags.iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, flags.len() - 1));
    }
    out
}

/// Sequential map; see [`FeasibilityGrid::from_columns`] for parallel assembly.
pub fn feasibility_map(axis: &AxisSpec, setup: &SweepSetup, horizon: Horizon) -> Result<FeasibilityGrid, SweepError> {
    let columns =
        axis.values().map(|v| evaluate_column(setup, axis.param, v, horizon)).collect::<Result<Vec<_>, _>>()?;
    FeasibilityGrid::from_columns(*axis, *setup, horizon, columns)
}

fn accessible_at(setup: &SweepSetup, param: SweepParam, value: f64, horizon: Horizon) -> Result<bool, SweepError> {
    Ok(evaluate_column(setup, param, value, horizon)?.accessible)
}

/// Bisects between an accessible and an inaccessible value; returns the
/// accessible end.
fn refine_edge<F>(mut good: f64, mut bad: f64, tol: f64, mut ok: F) -> Result<f64, SweepError>
where
    F: FnMut(f64) -> Result<bool, SweepError>,
{
    while (bad - good).abs() > tol {
        let mid = 0.5 * (good + bad);
        if ok(mid)? {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(good)
}

/// Largest `n̄` for which the target stays accessible.
///
/// The upper bracket doubles from 0.125 until infeasible; past
/// [`NBAR_CAP`] the bound is reported as `+∞`. Without thermal coupling
/// (`Γ = 0`) `n̄` has no effect and the bound is `+∞` outright.
pub fn max_feasible_nbar(setup: &SweepSetup, horizon: Horizon, tol: f64) -> Result<f64, SweepError> {
    if !(tol > 0.0) {
        return Err(ParamError::NonPositive { name: "tol", value: tol }.into());
    }
    let param = SweepParam::ThermalOccupation;
    let ok = |n: f64| accessible_at(setup, param, n, horizon);
    if !ok(0.0)? {
        return Err(SweepError::NoFeasibleBaseline);
    }
    if setup.noise.relaxation() == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mut lo = 0.0;
    let mut hi = 0.125;
    while ok(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > NBAR_CAP {
            return Ok(f64::INFINITY);
        }
    }
    // feasible values must form a prefix of the bracket
    let mut seen_bad = false;
    for j in 0..=8 {
        let n = lo + (hi - lo) * j as f64 / 8.0;
        let f = ok(n)?;
        if f && seen_bad {
            return Err(SweepError::NonMonotoneBracket { lo, hi });
        }
        seen_bad |= !f;
    }
    refine_edge(lo, hi, tol, ok)
}

/// Scans `a_f ∈ [0, 1]` at `resolution` intervals and returns the maximal
/// accessible intervals, with each interior edge refined by bisection to 1e-4.
pub fn accessible_band(setup: &SweepSetup, horizon: Horizon, resolution: usize) -> Result<Vec<Interval>, SweepError> {
    if resolution < MIN_BAND_RESOLUTION {
        return Err(SweepError::Resolution { got: resolution, min: MIN_BAND_RESOLUTION });
    }
    let param = SweepParam::TargetPopulation;
    let at = |k: usize| k as f64 / resolution as f64;
    let flags = (0..=resolution).map(|k| accessible_at(setup, param, at(k), horizon)).collect::<Result<Vec<_>, _>>()?;
    let ok = |v: f64| accessible_at(setup, param, v, horizon);
    runs(&flags)
        .into_iter()
        .map(|(a, b)| {
            let lo = if a > 0 { refine_edge(at(a), at(a - 1), BAND_EDGE_TOL, ok)? } else { 0.0 };
            let hi = if b < resolution { refine_edge(at(b), at(b + 1), BAND_EDGE_TOL, ok)? } else { 1.0 };
            Ok(Interval::new(lo, hi))
        })
        .collect()
}

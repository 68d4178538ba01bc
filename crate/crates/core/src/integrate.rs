//! Fixed-step RK4 propagation of the density matrix and tracking reports.
//!
//! Runs use either the full lab-frame equations or the rotating-wave
//! equations in the interaction picture. States are stored in the picture
//! they were integrated in; `|ρ_ge|` and `ρ_gg` are the same in both.
//!
//! A pulse synthesized from a zero coherence seed behaves like `1/√(t − t0)`
//! at the start. The first [`IntegrateOptions::onset_steps`] intervals are
//! then stepped in `τ = √(t − t0)`, where the right-hand side is smooth:
//! `dρ/dτ = 2τ·(free part) + (drive part with 2τE)`.

use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use thiserror::Error;

use crate::grid::TimeGrid;
use crate::model::{
    lab_frame_drive, lab_frame_free, rwa_drive, rwa_free, NoiseParams, ParamError, StateDerivative, SystemParams,
    TwoLevelState,
};
use crate::ode::rk4_step;
use crate::profile::{f_profile, CoherenceProfile};
use crate::pulse::{PulseError, SynthesizedPulse};

/// Positivity margin below which a run is aborted.
pub const POSITIVITY_ABORT: f64 = 1e-7;
/// Richardson local-error bound for the start-up self-check.
pub const SELF_CHECK_TOL: f64 = 1e-8;
pub const SELF_CHECK_STEPS: usize = 100;
pub const DEFAULT_ONSET_STEPS: usize = 64;
/// RK4 substeps per `√dt` of `τ` in the onset intervals.
pub const ONSET_SUBSTEPS: usize = 16;
/// Lab-frame runs need at least this many steps per carrier period.
pub const MIN_STEPS_PER_PERIOD: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// Full equations, no rotating-wave approximation.
    Lab,
    /// Rotating-wave equations in the interaction picture.
    Rwa,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum IntegrateError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("dt = {dt} does not resolve the carrier (lab-frame runs need dt <= {max})")]
    CarrierUnderResolved { dt: f64, max: f64 },
    #[error("step too large: local error estimate {estimate:.3e} at t = {t}")]
    StepTooLarge { t: f64, estimate: f64 },
    #[error("positivity violated at t = {t}: margin {margin:.3e}")]
    PositivityViolation { t: f64, margin: f64 },
    #[error("drive failed: {0}")]
    Drive(#[from] PulseError),
    #[error("trajectory and profile grids differ")]
    GridMismatch,
}

/// Counters reported by a drive; summed over every evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DriveCounters {
    pub clip_events: usize,
    pub off_window_evaluations: usize,
}

/// Source of the external field for [`integrate`].
pub trait Drive {
    /// Real lab-frame field `E(t)`.
    fn field(&self, t: f64) -> Result<f64, PulseError>;

    /// Envelope `ε(t)` with `E = ε e^{−iω_p t} + c.c.`.
    fn envelope(&self, _t: f64) -> Result<Complex64, PulseError> {
        Err(PulseError::NoEnvelope)
    }

    /// Start time of a `1/√(t − t0)` singularity, if any.
    fn singular_onset(&self) -> Option<f64> {
        None
    }

    /// `2τ·E(t0 + τ²)` for the graded onset steps.
    fn field_graded(&self, t0: f64, tau: f64) -> Result<f64, PulseError> {
        Ok(2.0 * tau * self.field(t0 + tau * tau)?)
    }

    /// `2τ·ε(t0 + τ²)`.
    fn envelope_graded(&self, t0: f64, tau: f64) -> Result<Complex64, PulseError> {
        Ok(self.envelope(t0 + tau * tau)? * (2.0 * tau))
    }

    /// Field recorded in the trajectory at a grid sample; `None` where undefined.
    fn sample_field(&self, t: f64) -> Option<f64> {
        self.field(t).ok()
    }

    /// Prescribed `(f, h)` at `t`, if the drive tracks a profile.
    fn reference(&self, _t: f64) -> Option<(f64, f64)> {
        None
    }

    fn counters(&self) -> DriveCounters {
        DriveCounters::default()
    }
}

/// `E ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoDrive;

impl Drive for NoDrive {
    fn field(&self, _t: f64) -> Result<f64, PulseError> {
        Ok(0.0)
    }

    fn envelope(&self, _t: f64) -> Result<Complex64, PulseError> {
        Ok(Complex64::new(0.0, 0.0))
    }
}

/// Arbitrary lab-frame field given as a closure. Has no envelope.
pub struct FieldDrive<F>(pub F);

impl<F: Fn(f64) -> f64> Drive for FieldDrive<F> {
    fn field(&self, t: f64) -> Result<f64, PulseError> {
        Ok((self.0)(t))
    }
}

/// Drive backed by a synthesized pulse. Past the validity window the pulse is
/// switched off (`E = 0`) and the evaluation is counted.
#[derive(Debug)]
pub struct PulseDrive<'a> {
    pulse: &'a SynthesizedPulse,
    clip_events: AtomicUsize,
    off_window: AtomicUsize,
}

impl<'a> PulseDrive<'a> {
    pub fn new(pulse: &'a SynthesizedPulse) -> Self {
        Self { pulse, clip_events: AtomicUsize::new(0), off_window: AtomicUsize::new(0) }
    }

    pub fn pulse(&self) -> &SynthesizedPulse {
        self.pulse
    }

    fn off<T: Default>(&self, r: Result<T, PulseError>) -> Result<T, PulseError> {
        match r {
            Err(PulseError::OutsideValidity { .. }) => {
                self.off_window.fetch_add(1, Ordering::Relaxed);
                Ok(T::default())
            }
            other => other,
        }
    }

    fn count_envelope_clip(&self, eps: Complex64, scale: f64) {
        if let Some(a) = self.pulse.options().a_max {
            if eps.norm() >= 0.5 * a * scale * (1.0 - 1e-12) && scale > 0.0 {
                self.clip_events.fetch_add(1, Ordering::Relaxed);
            }
        }
    }
}

impl Drive for PulseDrive<'_> {
    fn field(&self, t: f64) -> Result<f64, PulseError> {
        let s = self.off(self.pulse.field_sample(t).map(Some))?;
        Ok(match s {
            Some(s) => {
                if s.clipped {
                    self.clip_events.fetch_add(1, Ordering::Relaxed);
                }
                s.value
            }
            None => 0.0,
        })
    }

    fn envelope(&self, t: f64) -> Result<Complex64, PulseError> {
        let eps = self.off(self.pulse.envelope_at(t))?;
        self.count_envelope_clip(eps, 1.0);
        Ok(eps)
    }

    fn singular_onset(&self) -> Option<f64> {
        self.pulse.singular_onset().then(|| self.pulse.t0())
    }

    fn field_graded(&self, t0: f64, tau: f64) -> Result<f64, PulseError> {
        if t0 != self.pulse.t0() {
            return Ok(2.0 * tau * self.field(t0 + tau * tau)?);
        }
        let v = self.off(self.pulse.field_graded(tau))?;
        if let Some(a) = self.pulse.options().a_max {
            if v.abs() >= 2.0 * tau * a * (1.0 - 1e-12) && v != 0.0 {
                self.clip_events.fetch_add(1, Ordering::Relaxed);
            }
        }
        Ok(v)
    }

    fn envelope_graded(&self, t0: f64, tau: f64) -> Result<Complex64, PulseError> {
        if t0 != self.pulse.t0() {
            return Ok(self.envelope(t0 + tau * tau)? * (2.0 * tau));
        }
        let eps = self.off(self.pulse.envelope_graded(tau))?;
        self.count_envelope_clip(eps, 2.0 * tau);
        Ok(eps)
    }

    fn sample_field(&self, t: f64) -> Option<f64> {
        match self.pulse.field_at(t) {
            Ok(e) => Some(e),
            Err(PulseError::OutsideValidity { .. }) if t > self.pulse.valid_end() => Some(0.0),
            Err(_) => None,
        }
    }

    fn reference(&self, t: f64) -> Option<(f64, f64)> {
        let h = self.pulse.h_at(t)?;
        Some((f_profile(t, self.pulse.target()), h))
    }

    fn counters(&self) -> DriveCounters {
        DriveCounters {
            clip_events: self.clip_events.load(Ordering::Relaxed),
            off_window_evaluations: self.off_window.load(Ordering::Relaxed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub frame: Frame,
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    /// Intervals stepped in `τ = √(t − t0)` when the drive has a singular onset.
    pub onset_steps: usize,
    pub self_check: bool,
}

impl IntegrateOptions {
    pub fn new(frame: Frame, t0: f64, t1: f64, dt: f64) -> Self {
        Self { frame, t0, t1, dt, onset_steps: DEFAULT_ONSET_STEPS, self_check: true }
    }

    /// As [`new`](Self::new) with the default step.
    pub fn with_default_dt(frame: Frame, t0: f64, t1: f64, sys: &SystemParams, noise: &NoiseParams) -> Self {
        Self::new(frame, t0, t1, default_dt(sys, noise))
    }

    pub fn grid(&self) -> Result<TimeGrid, ParamError> {
        TimeGrid::covering(self.t0, self.t1, self.dt)
    }
}

/// `min(T/64, 1/(50Γ̃))` with `T = 2π/ω`.
pub fn default_dt(sys: &SystemParams, noise: &NoiseParams) -> f64 {
    let carrier = sys.carrier_period() / 64.0;
    let gt = noise.gamma_total();
    if gt > 0.0 {
        carrier.min(1.0 / (50.0 * gt))
    } else {
        carrier
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMeta {
    pub frame: Frame,
    pub dt: f64,
    pub sys: SystemParams,
    pub noise: NoiseParams,
    /// Number of leading intervals stepped in `τ`.
    pub graded_steps: usize,
    pub counters: DriveCounters,
}

/// Output of [`integrate`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    grid: TimeGrid,
    states: Vec<TwoLevelState>,
    field: Vec<Option<f64>>,
    reference: Vec<Option<(f64, f64)>>,
    meta: RunMeta,
}

impl Trajectory {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.grid.time(k)
    }

    /// States in the picture of [`RunMeta::frame`].
    pub fn states(&self) -> &[TwoLevelState] {
        &self.states
    }

    /// State `k` in the lab frame.
    pub fn lab_state(&self, k: usize) -> TwoLevelState {
        match self.meta.frame {
            Frame::Lab => self.states[k],
            Frame::Rwa => self.states[k].to_lab(self.time(k), self.grid.start(), self.meta.sys.omega()),
        }
    }

    /// Lab-frame field at each sample; `None` where it is singular.
    pub fn field(&self) -> &[Option<f64>] {
        &self.field
    }

    /// Prescribed `(f, h)` at each sample.
    pub fn reference(&self) -> &[Option<(f64, f64)>] {
        &self.reference
    }

    pub fn meta(&self) -> &RunMeta {
        &self.meta
    }

    pub fn last(&self) -> &TwoLevelState {
        &self.states[self.states.len() - 1]
    }
}

struct Stepper<'a, D: ?Sized> {
    drive: &'a D,
    sys: &'a SystemParams,
    noise: &'a NoiseParams,
    frame: Frame,
    t0: f64,
}

impl<D: Drive + ?Sized> Stepper<'_, D> {
    fn rhs(&self, t: f64, y: TwoLevelState) -> Result<StateDerivative, PulseError> {
        Ok(match self.frame {
            Frame::Lab => {
                lab_frame_free(&y, self.sys, self.noise) + lab_frame_drive(&y, self.drive.field(t)?, self.sys)
            }
            Frame::Rwa => {
                let eps = self.drive.envelope(t)?;
                rwa_free(&y, self.noise) + rwa_drive(&y, eps, self.sys, t, self.t0)
            }
        })
    }

    fn rhs_graded(&self, tau: f64, y: TwoLevelState) -> Result<StateDerivative, PulseError> {
        let t = self.t0 + tau * tau;
        Ok(match self.frame {
            Frame::Lab => {
                let e = self.drive.field_graded(self.t0, tau)?;
                lab_frame_free(&y, self.sys, self.noise) * (2.0 * tau) + lab_frame_drive(&y, e, self.sys)
            }
            Frame::Rwa => {
                let eps = self.drive.envelope_graded(self.t0, tau)?;
                rwa_free(&y, self.noise) * (2.0 * tau) + rwa_drive(&y, eps, self.sys, t, self.t0)
            }
        })
    }

    /// `m` equal RK4 steps from `a` to `b`, in `t` or in `τ`.
    fn step(&self, mut y: TwoLevelState, a: f64, b: f64, m: usize, graded: bool) -> Result<TwoLevelState, PulseError> {
        let h = (b - a) / m as f64;
        for j in 0..m {
            let x = a + j as f64 * h;
            y = if graded {
                rk4_step(x, y, h, |x, y| self.rhs_graded(x, y))?
            } else {
                rk4_step(x, y, h, |x, y| self.rhs(x, y))?
            };
        }
        Ok(y)
    }
}

fn distance(a: &TwoLevelState, b: &TwoLevelState) -> f64 {
    (a.rho_gg() - b.rho_gg()).abs().max((a.rho_ge() - b.rho_ge()).norm())
}

/// Fixed-step RK4 from `initial` at `opts.t0` to the first grid point at or
/// beyond `opts.t1`. The drive is evaluated at the RK4 stage times.
///
/// For [`Frame::Rwa`], `initial` is the interaction-picture state, which
/// coincides with the lab state at `t0`.
pub fn integrate<D: Drive + ?Sized>(
    initial: TwoLevelState,
    drive: &D,
    sys: &SystemParams,
    noise: &NoiseParams,
    opts: &IntegrateOptions,
) -> Result<Trajectory, IntegrateError> {
    let grid = opts.grid()?;
    if opts.frame == Frame::Lab {
        let max = sys.carrier_period() / MIN_STEPS_PER_PERIOD;
        if opts.dt > max {
            return Err(IntegrateError::CarrierUnderResolved { dt: opts.dt, max });
        }
    }
    let before = drive.counters();
    let stepper = Stepper { drive, sys, noise, frame: opts.frame, t0: opts.t0 };
    let graded_steps = match drive.singular_onset() {
        Some(ts) if ts == opts.t0 => opts.onset_steps.min(grid.len() - 1),
        _ => 0,
    };

    let n = grid.len();
    let mut states = Vec::with_capacity(n);
    states.push(initial);
    let mut y = initial;
    for k in 0..n - 1 {
        let graded = k < graded_steps;
        let (a, b, m) = if graded {
            let (a, b) = ((k as f64 * opts.dt).sqrt(), ((k + 1) as f64 * opts.dt).sqrt());
            // a whole interval is up to √dt long in τ, which costs two and a
            // half orders of dt
            let m = ((b - a) / opts.dt.sqrt() * ONSET_SUBSTEPS as f64).ceil().max(1.0) as usize;
            (a, b, m)
        } else {
            (grid.time(k), grid.time(k + 1), 1)
        };
        let next = stepper.step(y, a, b, m, graded)?;
        if opts.self_check && k < SELF_CHECK_STEPS {
            let halves = stepper.step(y, a, b, 2 * m, graded)?;
            let estimate = distance(&next, &halves) / 15.0;
            if estimate > SELF_CHECK_TOL {
                return Err(IntegrateError::StepTooLarge { t: grid.time(k), estimate });
            }
        }
        let margin = next.positivity_margin();
        if margin < -POSITIVITY_ABORT || !margin.is_finite() {
            return Err(IntegrateError::PositivityViolation { t: grid.time(k + 1), margin });
        }
        y = next;
        states.push(y);
    }

    let field = grid.times().map(|t| drive.sample_field(t)).collect();
    let reference = grid.times().map(|t| drive.reference(t)).collect();
    let after = drive.counters();
    Ok(Trajectory {
        grid,
        states,
        field,
        reference,
        meta: RunMeta {
            frame: opts.frame,
            dt: opts.dt,
            sys: *sys,
            noise: *noise,
            graded_steps,
            counters: DriveCounters {
                clip_events: after.clip_events - before.clip_events,
                off_window_evaluations: after.off_window_evaluations - before.off_window_evaluations,
            },
        },
    })
}

/// Realized dynamics against the prescribed profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingReport {
    /// Samples with `t ≤ valid_end` are compared against the profile.
    pub valid_end: f64,
    pub max_population_deviation: f64,
    pub time_of_max_population_deviation: f64,
    pub max_coherence_deviation: f64,
    pub time_of_max_coherence_deviation: f64,
    /// Largest `|ρ_gg − f|` after `valid_end`, if the run continues past it.
    pub post_loss_drift: Option<f64>,
    pub final_population_deviation: f64,
    /// Zero by construction: the trace is not a free variable.
    pub trace_drift: f64,
    /// Largest `−(ρ_gg ρ_ee − |ρ_ge|²)` over the run, floored at 0.
    pub max_positivity_violation: f64,
    /// Largest `|Tr ρ²(t) − Tr ρ²(t0)|`; only for runs without noise.
    pub purity_drift: Option<f64>,
}

pub fn verify_tracking(traj: &Trajectory, profile: &CoherenceProfile) -> Result<TrackingReport, IntegrateError> {
    if !traj.grid().matches(profile.grid()) {
        return Err(IntegrateError::GridMismatch);
    }
    let valid_end = profile.first_violation_time().unwrap_or(profile.grid().end());
    let target = profile.target();
    let mut rep = TrackingReport {
        valid_end,
        max_population_deviation: 0.0,
        time_of_max_population_deviation: traj.time(0),
        max_coherence_deviation: 0.0,
        time_of_max_coherence_deviation: traj.time(0),
        post_loss_drift: None,
        final_population_deviation: 0.0,
        trace_drift: 0.0,
        max_positivity_violation: 0.0,
        purity_drift: None,
    };
    let noise = traj.meta().noise;
    let closed = noise.dephasing() == 0.0 && noise.relaxation() == 0.0;
    let p0 = traj.states()[0].purity();
    let mut purity_drift = 0.0f64;
    for (k, s) in traj.states().iter().enumerate() {
        let t = traj.time(k);
        let dp = (s.rho_gg() - f_profile(t, target)).abs();
        if t <= valid_end {
            if dp > rep.max_population_deviation {
                rep.max_population_deviation = dp;
                rep.time_of_max_population_deviation = t;
            }
            if let Some(h) = profile.h(k) {
                let dc = (s.coherence() - h).abs();
                if dc > rep.max_coherence_deviation {
                    rep.max_coherence_deviation = dc;
                    rep.time_of_max_coherence_deviation = t;
                }
            }
        } else {
            rep.post_loss_drift = Some(rep.post_loss_drift.unwrap_or(0.0).max(dp));
        }
        rep.max_positivity_violation = rep.max_positivity_violation.max(-s.positivity_margin());
        purity_drift = purity_drift.max((s.purity() - p0).abs());
    }
    let last = traj.len() - 1;
    rep.final_population_deviation = (traj.states()[last].rho_gg() - f_profile(traj.time(last), target)).abs();
    if closed {
        rep.purity_drift = Some(purity_drift);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ControlTarget;
    use crate::pulse::PulseOptions;

    fn sys() -> SystemParams {
        SystemParams::default()
    }

    #[test]
    fn free_diagonal_state_is_stationary() {
        let s0 = TwoLevelState::diagonal(0.8).unwrap();
        let opts = IntegrateOptions::with_default_dt(Frame::Lab, -800.0, 800.0, &sys(), &NoiseParams::none());
        let traj = integrate(s0, &NoDrive, &sys(), &NoiseParams::none(), &opts).unwrap();
        for s in traj.states() {
            assert!((s.rho_gg() - 0.8).abs() < 1e-12);
            assert_eq!(s.coherence(), 0.0);
        }
    }

    #[test]
    fn excited_state_decays() {
        let noise = NoiseParams::new(0.0, 1e-4, 0.0).unwrap();
        let opts = IntegrateOptions::new(Frame::Lab, 0.0, 5000.0, 2.0);
        let traj = integrate(TwoLevelState::excited(), &NoDrive, &sys(), &noise, &opts).unwrap();
        for (k, s) in traj.states().iter().enumerate() {
            let exact = (-2e-4 * traj.time(k)).exp();
            assert!((s.rho_ee() - exact).abs() <= 1e-8 * exact, "k={k}");
        }
    }

    #[test]
    fn thermal_fixed_point_reached() {
        for nbar in [0.0, 0.3, 1.5] {
            let noise = NoiseParams::new(0.0, 1e-3, nbar).unwrap();
            let settle = 10.0 / (2.0 * noise.gamma_total());
            let target = (nbar + 1.0) / (2.0 * nbar + 1.0);
            let opts = IntegrateOptions::new(Frame::Rwa, 0.0, 1.5 * settle, 1.0);
            // deviation decays as e^{−2Γ̃t}, so e^{−10} of the initial offset
            let near = TwoLevelState::diagonal(target - 0.02).unwrap();
            for (start, bound) in [(TwoLevelState::excited(), target * (-10.0f64).exp()), (near, 1e-6)] {
                let traj = integrate(start, &NoDrive, &sys(), &noise, &opts).unwrap();
                for (k, s) in traj.states().iter().enumerate() {
                    if traj.time(k) >= settle {
                        assert!((s.rho_gg() - target).abs() <= bound * (1.0 + 1e-6), "nbar={nbar}");
                    }
                }
            }
        }
    }

    #[test]
    fn carrier_resolution_enforced() {
        let opts = IntegrateOptions::new(Frame::Lab, 0.0, 100.0, 10.0);
        let err = integrate(TwoLevelState::ground(), &NoDrive, &sys(), &NoiseParams::none(), &opts).unwrap_err();
        assert!(matches!(err, IntegrateError::CarrierUnderResolved { .. }));
        let rwa = IntegrateOptions::new(Frame::Rwa, 0.0, 100.0, 10.0);
        assert!(integrate(TwoLevelState::ground(), &NoDrive, &sys(), &NoiseParams::none(), &rwa).is_ok());
    }

    #[test]
    fn self_check_rejects_coarse_steps() {
        // strong resonant drive, Rabi period ~ 10 a.u., dt = 2
        let s = sys();
        let drive = FieldDrive(move |t: f64| 0.2 * (s.omega() * t).cos());
        let opts = IntegrateOptions::new(Frame::Lab, 0.0, 300.0, 2.0);
        let err = integrate(TwoLevelState::ground(), &drive, &s, &NoiseParams::none(), &opts).unwrap_err();
        assert!(matches!(err, IntegrateError::StepTooLarge { .. }), "{err:?}");
    }

    #[test]
    fn rwa_without_envelope_fails() {
        let drive = FieldDrive(|_t: f64| 0.0);
        let opts = IntegrateOptions::new(Frame::Rwa, 0.0, 10.0, 1.0);
        let err = integrate(TwoLevelState::ground(), &drive, &sys(), &NoiseParams::none(), &opts).unwrap_err();
        assert_eq!(err, IntegrateError::Drive(PulseError::NoEnvelope));
    }

    #[test]
    fn rwa_run_tracks_profile() {
        let noise = NoiseParams::new(1e-3, 1e-4, 0.2).unwrap();
        let target = ControlTarget::new(0.8, 0.6, 1e-2).unwrap();
        let opts = IntegrateOptions::new(Frame::Rwa, target.t0(), 800.0, 1.0);
        let grid = opts.grid().unwrap();
        let pulse = SynthesizedPulse::synthesize(&target, &noise, &sys(), &grid, 0.0, PulseOptions::default()).unwrap();
        let drive = PulseDrive::new(&pulse);
        let traj = integrate(pulse.initial_state(), &drive, &sys(), &noise, &opts).unwrap();
        assert_eq!(traj.meta().graded_steps, DEFAULT_ONSET_STEPS);
        let rep = verify_tracking(&traj, pulse.profile()).unwrap();
        assert!(rep.max_population_deviation < 1e-6, "{rep:?}");
        assert!(rep.max_coherence_deviation < 1e-6, "{rep:?}");
        assert_eq!(rep.post_loss_drift, None);
        assert_eq!(traj.meta().counters, DriveCounters::default());
    }

    #[test]
    fn grid_mismatch_detected() {
        let noise = NoiseParams::new(1e-3, 0.0, 0.0).unwrap();
        let target = ControlTarget::new(0.8, 0.6, 1e-2).unwrap();
        let grid = TimeGrid::covering(target.t0(), 800.0, 2.0).unwrap();
        let profile = CoherenceProfile::solve(&target, &noise, &grid, 0.0).unwrap();
        let opts = IntegrateOptions::new(Frame::Rwa, target.t0(), 800.0, 1.0);
        let traj = integrate(TwoLevelState::diagonal(0.8).unwrap(), &NoDrive, &sys(), &noise, &opts).unwrap();
        assert_eq!(verify_tracking(&traj, &profile).unwrap_err(), IntegrateError::GridMismatch);
    }

    #[test]
    fn deterministic() {
        let noise = NoiseParams::new(1e-3, 0.0, 0.0).unwrap();
        let target = ControlTarget::new(0.8, 0.3, 1e-2).unwrap();
        let opts = IntegrateOptions::with_default_dt(Frame::Lab, target.t0(), 0.0, &sys(), &noise);
        let grid = opts.grid().unwrap();
        let pulse = SynthesizedPulse::synthesize(&target, &noise, &sys(), &grid, 0.0, PulseOptions::default()).unwrap();
        let run = || integrate(pulse.initial_state(), &PulseDrive::new(&pulse), &sys(), &noise, &opts).unwrap();
        let (a, b) = (run(), run());
        for (x, y) in a.states().iter().zip(b.states()) {
            assert_eq!(x.rho_gg().to_bits(), y.rho_gg().to_bits());
            assert_eq!(x.rho_ge().re.to_bits(), y.rho_ge().re.to_bits());
            assert_eq!(x.rho_ge().im.to_bits(), y.rho_ge().im.to_bits());
        }
    }

    #[test]
    fn default_dt_resolves_carrier_and_decay() {
        let s = sys();
        assert!((default_dt(&s, &NoiseParams::none()) - s.carrier_period() / 64.0).abs() < 1e-12);
        let fast = NoiseParams::new(0.1, 0.0, 0.0).unwrap();
        assert!((default_dt(&s, &fast) - 0.2).abs() < 1e-12);
    }
}

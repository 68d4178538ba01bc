//! Physical parameters, the two-level density matrix and the equations of
//! motion.
//!
//! Conventions: `σ_z|g⟩ = +|g⟩`, so `H = −(ω/2)σ_z − μE(t)σ_x` puts the ground
//! state at `−ω/2`; `σ₊ = |e⟩⟨g|`. The interaction picture removes the free
//! rotation, `ρ̃_ge = ρ_ge·e^{−iω(t−t₀)}`, which makes `ρ̃_eg` obey the familiar
//! driven Bloch equation with `ε(t)e^{−i(Δt+ωt₀)}` as its drive.
//!
//! Dissipators are the same in both pictures. The `σ_z` rotation commutes with
//! the dephasing superoperator `σ_zρσ_z − ρ`, and in each thermal term
//! `σ_±ρσ_∓` the phases picked up by `σ_+` and `σ_−` cancel while the
//! anticommutators only involve the diagonal projectors `σ_∓σ_±`.

use num_complex::Complex64;
use thiserror::Error;

/// Slack on `ρ_gg ρ_ee − |ρ_ge|² ≥ 0` accepted by [`TwoLevelState::new`].
pub const POSITIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ParamError {
    #[error("{0} must be finite")]
    NonFinite(&'static str),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("dipole projection mu must be non-zero")]
    ZeroDipole,
    #[error("{name} must lie in [0, 1], got {value}")]
    PopulationOutOfRange { name: &'static str, value: f64 },
    #[error("state violates positivity: rho_gg*rho_ee - |rho_ge|^2 = {margin}")]
    NotPositive { margin: f64 },
    #[error("t0 = {t0} leaves g(t0) = {g_t0} above the tail tolerance {tol}")]
    TransitionTail { t0: f64, g_t0: f64, tol: f64 },
    #[error("time window [{start}, {end}] is empty")]
    EmptyWindow { start: f64, end: f64 },
    #[error("a time grid needs at least two samples, got {0}")]
    GridTooShort(usize),
}

fn finite(name: &'static str, x: f64) -> Result<f64, ParamError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(ParamError::NonFinite(name))
    }
}

/// Transition frequency `ω`, dipole projection `μ` and carrier `ω_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    omega: f64,
    mu: f64,
    omega_p: f64,
}

impl SystemParams {
    /// Resonant drive (`ω_p = ω`).
    pub fn new(omega: f64, mu: f64) -> Result<Self, ParamError> {
        let omega = finite("omega", omega)?;
        let mu = finite("mu", mu)?;
        if omega <= 0.0 {
            return Err(ParamError::NonPositive { name: "omega", value: omega });
        }
        if mu == 0.0 {
            return Err(ParamError::ZeroDipole);
        }
        Ok(Self { omega, mu, omega_p: omega })
    }

    /// Detuned carrier. Only the rotating-wave equations use `Δ = ω_p − ω`;
    /// the synthesized field is derived at resonance.
    pub fn with_carrier(self, omega_p: f64) -> Result<Self, ParamError> {
        let omega_p = finite("omega_p", omega_p)?;
        if omega_p <= 0.0 {
            return Err(ParamError::NonPositive { name: "omega_p", value: omega_p });
        }
        Ok(Self { omega_p, ..self })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn omega_p(&self) -> f64 {
        self.omega_p
    }

    pub fn delta(&self) -> f64 {
        self.omega_p - self.omega
    }

    pub fn carrier_period(&self) -> f64 {
        2.0 * core::f64::consts::PI / self.omega
    }
}

impl Default for SystemParams {
    /// `ω = 2·10⁻² a.u.`, `μ = 6 a.u.`.
    fn default() -> Self {
        Self { omega: 2e-2, mu: 6.0, omega_p: 2e-2 }
    }
}

/// Dephasing rate `γ`, thermal relaxation rate `Γ` and mean bath occupation `n̄`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseParams {
    dephasing: f64,
    relaxation: f64,
    nbar: f64,
}

impl NoiseParams {
    pub fn new(dephasing: f64, relaxation: f64, nbar: f64) -> Result<Self, ParamError> {
        for (name, v) in [("gamma", dephasing), ("Gamma", relaxation), ("nbar", nbar)] {
            finite(name, v)?;
            if v < 0.0 {
                return Err(ParamError::Negative { name, value: v });
            }
        }
        Ok(Self { dephasing, relaxation, nbar })
    }

    /// Noiseless (closed) system.
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with_nbar(self, nbar: f64) -> Result<Self, ParamError> {
        Self::new(self.dephasing, self.relaxation, nbar)
    }

    pub fn with_dephasing(self, dephasing: f64) -> Result<Self, ParamError> {
        Self::new(dephasing, self.relaxation, self.nbar)
    }

    pub fn with_relaxation(self, relaxation: f64) -> Result<Self, ParamError> {
        Self::new(self.dephasing, relaxation, self.nbar)
    }

    /// `γ`
    pub fn dephasing(&self) -> f64 {
        self.dephasing
    }

    /// `Γ`
    pub fn relaxation(&self) -> f64 {
        self.relaxation
    }

    /// `n̄`
    pub fn nbar(&self) -> f64 {
        self.nbar
    }

    /// Total decoherence rate `Γ̃ = γ + (2n̄+1)Γ`.
    pub fn gamma_total(&self) -> f64 {
        self.dephasing + (2.0 * self.nbar + 1.0) * self.relaxation
    }

    /// Thermal fixed point of the ground population, `(n̄+1)/(2n̄+1)`.
    pub fn thermal_ground_population(&self) -> f64 {
        (self.nbar + 1.0) / (2.0 * self.nbar + 1.0)
    }

    /// `2Γ[(n̄+1)(1−p) − n̄p]`, the thermal drift of the ground population `p`.
    pub fn thermal_drift(&self, p: f64) -> f64 {
        2.0 * self.relaxation * (1.0 + self.nbar - (2.0 * self.nbar + 1.0) * p)
    }
}

/// Density matrix stored as `(ρ_gg, ρ_ge)`; `ρ_ee = 1 − ρ_gg` and
/// `ρ_eg = ρ_ge*`, so trace and hermiticity hold by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelState {
    rho_gg: f64,
    rho_ge: Complex64,
}

impl TwoLevelState {
    pub fn new(rho_gg: f64, rho_ge: Complex64) -> Result<Self, ParamError> {
        if !rho_gg.is_finite() || !rho_ge.re.is_finite() || !rho_ge.im.is_finite() {
            return Err(ParamError::NonFinite("state"));
        }
        if !(-POSITIVITY_TOL..=1.0 + POSITIVITY_TOL).contains(&rho_gg) {
            return Err(ParamError::PopulationOutOfRange { name: "rho_gg", value: rho_gg });
        }
        let s = Self { rho_gg, rho_ge };
        let margin = s.positivity_margin();
        if margin < -POSITIVITY_TOL {
            return Err(ParamError::NotPositive { margin });
        }
        Ok(s)
    }

    /// `p|g⟩⟨g| + (1−p)|e⟩⟨e|`
    pub fn diagonal(p: f64) -> Result<Self, ParamError> {
        Self::new(p, Complex64::new(0.0, 0.0))
    }

    pub fn ground() -> Self {
        Self { rho_gg: 1.0, rho_ge: Complex64::new(0.0, 0.0) }
    }

    pub fn excited() -> Self {
        Self { rho_gg: 0.0, rho_ge: Complex64::new(0.0, 0.0) }
    }

    pub(crate) fn raw(rho_gg: f64, rho_ge: Complex64) -> Self {
        Self { rho_gg, rho_ge }
    }

    pub fn rho_gg(&self) -> f64 {
        self.rho_gg
    }

    pub fn rho_ee(&self) -> f64 {
        1.0 - self.rho_gg
    }

    pub fn rho_ge(&self) -> Complex64 {
        self.rho_ge
    }

    pub fn rho_eg(&self) -> Complex64 {
        self.rho_ge.conj()
    }

    pub fn coherence(&self) -> f64 {
        self.rho_ge.norm()
    }

    /// `det ρ = ρ_gg ρ_ee − |ρ_ge|²`; non-negative for physical states.
    pub fn positivity_margin(&self) -> f64 {
        self.rho_gg * self.rho_ee() - self.rho_ge.norm_sqr()
    }

    /// `Tr ρ²`
    pub fn purity(&self) -> f64 {
        self.rho_gg * self.rho_gg + self.rho_ee() * self.rho_ee() + 2.0 * self.rho_ge.norm_sqr()
    }

    /// Lab frame → interaction picture with reference time `t0`.
    pub fn to_interaction(&self, t: f64, t0: f64, omega: f64) -> Self {
        Self { rho_gg: self.rho_gg, rho_ge: self.rho_ge * Complex64::cis(-omega * (t - t0)) }
    }

    /// Interaction picture → lab frame.
    pub fn to_lab(&self, t: f64, t0: f64, omega: f64) -> Self {
        Self { rho_gg: self.rho_gg, rho_ge: self.rho_ge * Complex64::cis(omega * (t - t0)) }
    }
}

impl crate::ode::OdeState for TwoLevelState {
    type Deriv = StateDerivative;

    fn advance(&self, d: StateDerivative, h: f64) -> Self {
        Self { rho_gg: self.rho_gg + h * d.d_rho_gg, rho_ge: self.rho_ge + d.d_rho_ge * h }
    }
}

/// Time derivative of a [`TwoLevelState`]. `d(ρ_ee)/dt = −d(ρ_gg)/dt` is
/// implied by the representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub d_rho_gg: f64,
    pub d_rho_ge: Complex64,
}

impl StateDerivative {
    pub fn zero() -> Self {
        Self { d_rho_gg: 0.0, d_rho_ge: Complex64::new(0.0, 0.0) }
    }
}

impl core::ops::Add for StateDerivative {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self { d_rho_gg: self.d_rho_gg + rhs.d_rho_gg, d_rho_ge: self.d_rho_ge + rhs.d_rho_ge }
    }
}

impl core::ops::Mul<f64> for StateDerivative {
    type Output = Self;

    fn mul(self, k: f64) -> Self {
        Self { d_rho_gg: self.d_rho_gg * k, d_rho_ge: self.d_rho_ge * k }
    }
}

/// Full lab-frame master equation, no rotating-wave approximation:
///
/// ```text
/// dρ_gg/dt = 2μE·Im ρ_ge + 2Γ[(n̄+1)ρ_ee − n̄ρ_gg]
/// dρ_ge/dt = iωρ_ge − iμE(2ρ_gg − 1) − Γ̃ρ_ge
/// ```
pub fn lab_frame_rhs(state: &TwoLevelState, field: f64, sys: &SystemParams, noise: &NoiseParams) -> StateDerivative {
    lab_frame_free(state, sys, noise) + lab_frame_drive(state, field, sys)
}

/// Field-independent part of [`lab_frame_rhs`].
pub(crate) fn lab_frame_free(state: &TwoLevelState, sys: &SystemParams, noise: &NoiseParams) -> StateDerivative {
    let i = Complex64::i();
    StateDerivative {
        d_rho_gg: noise.thermal_drift(state.rho_gg),
        d_rho_ge: state.rho_ge * (i * sys.omega - noise.gamma_total()),
    }
}

/// Part of [`lab_frame_rhs`] linear in the field.
pub(crate) fn lab_frame_drive(state: &TwoLevelState, field: f64, sys: &SystemParams) -> StateDerivative {
    let mu_e = sys.mu * field;
    StateDerivative {
        d_rho_gg: 2.0 * mu_e * state.rho_ge.im,
        d_rho_ge: Complex64::new(0.0, -mu_e * (2.0 * state.rho_gg - 1.0)),
    }
}

/// Rotating-wave equations in the interaction picture:
///
/// ```text
/// dρ_gg/dt = 2μ Im[ρ_ge ε e^{−i(Δt+ωt₀)}] + 2Γ[(n̄+1)ρ_ee − n̄ρ_gg]
/// dρ_eg/dt = −Γ̃ρ_eg + iμ(2ρ_gg − 1) ε e^{−i(Δt+ωt₀)}
/// ```
///
/// `state` holds `ρ̃_ge`; the returned coherence derivative is for `ρ̃_ge`
/// (the conjugate of the second line).
pub fn rwa_rhs(
    state: &TwoLevelState,
    envelope: Complex64,
    sys: &SystemParams,
    noise: &NoiseParams,
    t: f64,
    t0: f64,
) -> StateDerivative {
    rwa_free(state, noise) + rwa_drive(state, envelope, sys, t, t0)
}

pub(crate) fn rwa_free(state: &TwoLevelState, noise: &NoiseParams) -> StateDerivative {
    StateDerivative { d_rho_gg: noise.thermal_drift(state.rho_gg), d_rho_ge: state.rho_ge * -noise.gamma_total() }
}

/// Real-linear in `envelope`.
pub(crate) fn rwa_drive(
    state: &TwoLevelState,
    envelope: Complex64,
    sys: &SystemParams,
    t: f64,
    t0: f64,
) -> StateDerivative {
    let drive = envelope * Complex64::cis(-(sys.delta() * t + sys.omega * t0));
    let pop = 2.0 * state.rho_gg - 1.0;
    let d_rho_eg = Complex64::i() * sys.mu * pop * drive;
    StateDerivative { d_rho_gg: 2.0 * sys.mu * (state.rho_ge * drive).im, d_rho_ge: d_rho_eg.conj() }
}

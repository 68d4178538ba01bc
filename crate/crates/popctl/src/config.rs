//! Command-line flags, the optional `key=value` config file and the resolved
//! run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use popctl_core::sweep::{Horizon, SweepParam, TRANSIENT_SPAN};
use popctl_core::{AxisSpec, ControlTarget, NoiseParams, PulseOptions, SystemParams};

use crate::error::CliError;
use crate::output::num;

#[derive(Debug, Parser)]
#[command(
    name = "popctl",
    version,
    about = "Reverse-engineered population-control pulses for an open two-level system"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Synthesize the control field and write it as CSV.
    Synth,
    /// Synthesize, then integrate the master equation with that field.
    Simulate,
    /// Accessibility map over target population or thermal occupation.
    Map,
    /// Steady-state coherence and admissible target band.
    Steady,
    /// Largest thermal occupation for which the target stays accessible.
    NbarBound,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Simulate => "simulate",
            Command::Map => "map",
            Command::Steady => "steady",
            Command::NbarBound => "nbar-bound",
        }
    }
}

/// Every flag is optional so that unset flags fall back to the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// key=value file; flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Transition frequency ω.
    #[arg(long, global = true)]
    pub omega: Option<f64>,
    /// Dipole projection μ.
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    /// Carrier frequency (defaults to ω).
    #[arg(long = "omega-p", global = true)]
    pub omega_p: Option<f64>,
    /// Dephasing rate γ.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Thermal dissipation rate Γ.
    #[arg(long = "big-gamma", global = true)]
    pub big_gamma: Option<f64>,
    /// Mean thermal occupation n̄.
    #[arg(long, global = true)]
    pub nbar: Option<f64>,
    /// Initial ground population.
    #[arg(long, global = true)]
    pub ai: Option<f64>,
    /// Target ground population.
    #[arg(long, global = true)]
    pub af: Option<f64>,
    /// Transition rate α.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Start time (default −8/α).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub t0: Option<f64>,
    /// End time (default +8/α).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub t1: Option<f64>,
    /// Time step (default min(2π/ω/64, 1/(50Γ̃))).
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Coherence phase φ₀.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub phi0: Option<f64>,
    /// Feasibility horizon: an absolute time or `inf` (default t0 + 16/α).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub horizon: Option<String>,
    /// Coherence floor below which the field counts as divergent.
    #[arg(long = "h-floor", global = true)]
    pub h_floor: Option<f64>,
    /// Field amplitude cap; clipped pulses are flagged approximate.
    #[arg(long = "a-max", global = true)]
    pub a_max: Option<f64>,
    /// Initial coherence |ρ_ge(t0)|².
    #[arg(long = "u-seed", global = true)]
    pub u_seed: Option<f64>,
    /// Output CSV (default stdout).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Swept parameter for `map`: af or nbar.
    #[arg(long, global = true)]
    pub axis: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub min: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub max: Option<f64>,
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Integrate the rotating-wave equations instead of the full ones.
    #[arg(long, global = true)]
    pub rwa: bool,
    /// Re-read the synthesized CSV and check it against the inverse map.
    #[arg(long, global = true)]
    pub verify: bool,
    /// SVG contour of the map.
    #[arg(long, global = true, value_name = "PATH")]
    pub svg: Option<PathBuf>,
    /// Compact matrix file of the map with a JSON header line.
    #[arg(long, global = true, value_name = "PATH")]
    pub matrix: Option<PathBuf>,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.trim().parse().map_err(|_| CliError::Usage(format!("config: cannot parse {key}={value}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(CliError::Usage(format!("config: cannot parse {key}={value}"))),
    }
}

impl Flags {
    /// Reads a config file: one `key = value` per line, `#` comments, keys
    /// spelled like the long flags (`big-gamma` or `big_gamma`).
    pub fn from_config_text(text: &str) -> Result<Flags, CliError> {
        let mut f = Flags::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!("config line {}: expected key=value", lineno + 1)));
            };
            let key = key.trim().replace('_', "-");
            let v = value.trim();
            match key.as_str() {
                "omega" => f.omega = Some(parse(&key, v)?),
                "mu" => f.mu = Some(parse(&key, v)?),
                "omega-p" => f.omega_p = Some(parse(&key, v)?),
                "gamma" => f.gamma = Some(parse(&key, v)?),
                "big-gamma" => f.big_gamma = Some(parse(&key, v)?),
                "nbar" => f.nbar = Some(parse(&key, v)?),
                "ai" => f.ai = Some(parse(&key, v)?),
                "af" => f.af = Some(parse(&key, v)?),
                "alpha" => f.alpha = Some(parse(&key, v)?),
                "t0" => f.t0 = Some(parse(&key, v)?),
                "t1" => f.t1 = Some(parse(&key, v)?),
                "dt" => f.dt = Some(parse(&key, v)?),
                "phi0" => f.phi0 = Some(parse(&key, v)?),
                "horizon" => f.horizon = Some(v.to_string()),
                "h-floor" => f.h_floor = Some(parse(&key, v)?),
                "a-max" => f.a_max = Some(parse(&key, v)?),
                "u-seed" => f.u_seed = Some(parse(&key, v)?),
                "out" => f.out = Some(PathBuf::from(v)),
                "axis" => f.axis = Some(v.to_string()),
                "min" => f.min = Some(parse(&key, v)?),
                "max" => f.max = Some(parse(&key, v)?),
                "steps" => f.steps = Some(parse(&key, v)?),
                "rwa" => f.rwa = parse_bool(&key, v)?,
                "verify" => f.verify = parse_bool(&key, v)?,
                "svg" => f.svg = Some(PathBuf::from(v)),
                "matrix" => f.matrix = Some(PathBuf::from(v)),
                _ => return Err(CliError::Usage(format!("config line {}: unknown key {key}", lineno + 1))),
            }
        }
        Ok(f)
    }

    pub fn from_config_file(path: &Path) -> Result<Flags, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_config_text(&text)
    }

    /// `self` wins wherever it is set.
    pub fn over(self, base: Flags) -> Flags {
        Flags {
            config: self.config.or(base.config),
            omega: self.omega.or(base.omega),
            mu: self.mu.or(base.mu),
            omega_p: self.omega_p.or(base.omega_p),
            gamma: self.gamma.or(base.gamma),
            big_gamma: self.big_gamma.or(base.big_gamma),
            nbar: self.nbar.or(base.nbar),
            ai: self.ai.or(base.ai),
            af: self.af.or(base.af),
            alpha: self.alpha.or(base.alpha),
            t0: self.t0.or(base.t0),
            t1: self.t1.or(base.t1),
            dt: self.dt.or(base.dt),
            phi0: self.phi0.or(base.phi0),
            horizon: self.horizon.or(base.horizon),
            h_floor: self.h_floor.or(base.h_floor),
            a_max: self.a_max.or(base.a_max),
            u_seed: self.u_seed.or(base.u_seed),
            out: self.out.or(base.out),
            axis: self.axis.or(base.axis),
            min: self.min.or(base.min),
            max: self.max.or(base.max),
            steps: self.steps.or(base.steps),
            rwa: self.rwa || base.rwa,
            verify: self.verify || base.verify,
            svg: self.svg.or(base.svg),
            matrix: self.matrix.or(base.matrix),
        }
    }
}

pub const DEFAULT_OMEGA: f64 = 2e-2;
pub const DEFAULT_MU: f64 = 6.0;
pub const DEFAULT_ALPHA: f64 = 1e-2;
pub const DEFAULT_AI: f64 = 0.8;
pub const DEFAULT_AF: f64 = 0.3;

/// Fully resolved and validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub sys: SystemParams,
    pub noise: NoiseParams,
    pub target: ControlTarget,
    pub t1: f64,
    pub dt: f64,
    pub horizon: Horizon,
    pub pulse: PulseOptions,
    pub u_seed: f64,
    pub axis: AxisSpec,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
    pub rwa: bool,
    pub verify: bool,
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

impl RunConfig {
    pub fn resolve(command: Command, cli: Flags) -> Result<RunConfig, CliError> {
        let file = match &cli.config {
            Some(p) => Flags::from_config_file(p)?,
            None => Flags::default(),
        };
        let f = cli.over(file);

        let mut sys = SystemParams::new(f.omega.unwrap_or(DEFAULT_OMEGA), f.mu.unwrap_or(DEFAULT_MU)).map_err(usage)?;
        if let Some(wp) = f.omega_p {
            sys = sys.with_carrier(wp).map_err(usage)?;
        }
        let noise = NoiseParams::new(f.gamma.unwrap_or(0.0), f.big_gamma.unwrap_or(0.0), f.nbar.unwrap_or(0.0))
            .map_err(usage)?;
        let alpha = f.alpha.unwrap_or(DEFAULT_ALPHA);
        let mut target =
            ControlTarget::new(f.ai.unwrap_or(DEFAULT_AI), f.af.unwrap_or(DEFAULT_AF), alpha).map_err(usage)?;
        if let Some(t0) = f.t0 {
            target = target.with_t0(t0).map_err(usage)?;
        }
        target = target.with_phi0(f.phi0.unwrap_or(0.0)).map_err(usage)?;

        let t1 = f.t1.unwrap_or(8.0 / alpha);
        if !(t1 > target.t0()) || !t1.is_finite() {
            return Err(CliError::Usage(format!("t1 = {t1} must lie after t0 = {}", target.t0())));
        }
        let dt = f.dt.unwrap_or_else(|| popctl_core::integrate::default_dt(&sys, &noise));
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(CliError::Usage(format!("dt must be positive, got {dt}")));
        }
        let horizon = match f.horizon.as_deref() {
            None => Horizon::Finite(target.t0() + TRANSIENT_SPAN / alpha),
            Some(s) if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinite") => Horizon::Infinite,
            Some(s) => {
                let t: f64 = s.parse().map_err(|_| CliError::Usage(format!("cannot parse --horizon {s}")))?;
                if !(t > target.t0()) || !t.is_finite() {
                    return Err(CliError::Usage(format!("horizon {t} must lie after t0 = {}", target.t0())));
                }
                Horizon::Finite(t)
            }
        };
        let h_floor = f.h_floor.unwrap_or(popctl_core::pulse::DEFAULT_H_FLOOR);
        if !(h_floor > 0.0) {
            return Err(CliError::Usage(format!("h-floor must be positive, got {h_floor}")));
        }
        if let Some(a) = f.a_max {
            if !(a > 0.0) {
                return Err(CliError::Usage(format!("a-max must be positive, got {a}")));
            }
        }
        let u_seed = f.u_seed.unwrap_or(0.0);
        if !(u_seed >= 0.0) || !u_seed.is_finite() {
            return Err(CliError::Usage(format!("u-seed must be non-negative, got {u_seed}")));
        }

        let param = match f.axis.as_deref().unwrap_or("af") {
            "af" | "a_f" | "a-f" => SweepParam::TargetPopulation,
            "nbar" => SweepParam::ThermalOccupation,
            other => return Err(CliError::Usage(format!("unknown axis {other} (expected af or nbar)"))),
        };
        let steps_default = match param {
            SweepParam::TargetPopulation => 201,
            SweepParam::ThermalOccupation => 101,
        };
        let axis = AxisSpec::new(param, f.min.unwrap_or(0.0), f.max.unwrap_or(1.0), f.steps.unwrap_or(steps_default))
            .map_err(usage)?;

        Ok(RunConfig {
            command,
            sys,
            noise,
            target,
            t1,
            dt,
            horizon,
            pulse: PulseOptions { h_floor, a_max: f.a_max },
            u_seed,
            axis,
            out: f.out,
            svg: f.svg,
            matrix: f.matrix,
            rwa: f.rwa,
            verify: f.verify,
        })
    }

    /// `# key=value` lines describing every resolved parameter.
    pub fn header(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "# {k}={v}");
        };
        kv("command", self.command.name().to_string());
        kv("omega", num(self.sys.omega()));
        kv("mu", num(self.sys.mu()));
        kv("omega_p", num(self.sys.omega_p()));
        kv("gamma", num(self.noise.dephasing()));
        kv("big_gamma", num(self.noise.relaxation()));
        kv("nbar", num(self.noise.nbar()));
        kv("ai", num(self.target.a_i()));
        kv("af", num(self.target.a_f()));
        kv("alpha", num(self.target.alpha()));
        kv("t0", num(self.target.t0()));
        kv("t1", num(self.t1));
        kv("dt", num(self.dt));
        kv("phi0", num(self.target.phi0()));
        kv("horizon", horizon_text(self.horizon));
        kv("h_floor", num(self.pulse.h_floor));
        kv("a_max", self.pulse.a_max.map_or("none".to_string(), num));
        kv("u_seed", num(self.u_seed));
        if self.command == Command::Map {
            kv("axis", self.axis.param.name().to_string());
            kv("min", num(self.axis.min));
            kv("max", num(self.axis.max));
            kv("steps", self.axis.steps.to_string());
        }
        if self.command == Command::Simulate {
            kv("frame", if self.rwa { "rwa" } else { "lab" }.to_string());
        }
        s
    }
}

pub fn horizon_text(h: Horizon) -> String {
    match h {
        Horizon::Finite(t) => num(t),
        Horizon::Infinite => "inf".to_string(),
    }
}

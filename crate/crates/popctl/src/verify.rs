//! Re-derives the field of a `synth` CSV through the general inverse map.

use num_complex::Complex64;
use popctl_core::pulse::P_FLOOR;
use popctl_core::{field_from_trajectory, CoherenceSample, PulseError};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::read_csv;

pub const VERIFY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyReport {
    pub compared: usize,
    /// Rows at the population node, below the coherence floor, or clipped.
    pub singular: usize,
    pub max_error: f64,
}

fn column(columns: &[String], name: &str) -> Result<usize, CliError> {
    columns.iter().position(|c| c == name).ok_or_else(|| CliError::Numerical(format!("verify: column {name} missing")))
}

/// Rebuilds `ρ_gg = f`, `ρ̃_ge = h e^{iφ₀}` and `dρ̃_ge/dt = ḣ e^{iφ₀}` (with
/// `ḣ = (−2Γ̃u + s)/(2h)`) from each row and compares the recovered field with
/// the written one.
pub fn check_synth_csv(text: &str, cfg: &RunConfig) -> Result<VerifyReport, CliError> {
    let (columns, rows, _) = read_csv(text);
    let col = |name| column(&columns, name);
    let (it, ie, if_, ifd, iu, ih) = (col("t")?, col("E")?, col("f")?, col("fdot")?, col("u")?, col("h")?);

    let noise = cfg.noise;
    let gt = noise.gamma_total();
    let phase = Complex64::cis(cfg.target.phi0());
    let mut written = Vec::new();
    let mut samples = Vec::new();
    let mut singular = 0;
    for row in &rows {
        let get = |i: usize| -> Result<f64, CliError> {
            row.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| CliError::Numerical(format!("verify: bad row {}", row.join(","))))
        };
        let (t, e, f, fdot, u, h) = (get(it)?, get(ie)?, get(if_)?, get(ifd)?, get(iu)?, get(ih)?);
        let clipped = cfg.pulse.a_max.is_some_and(|a| e.abs() >= a);
        if !(h >= cfg.pulse.h_floor) || (2.0 * f - 1.0).abs() <= P_FLOOR || clipped {
            singular += 1;
            continue;
        }
        let s = (2.0 * f - 1.0) * (noise.thermal_drift(f) - fdot);
        let h_dot = (-2.0 * gt * u + s) / (2.0 * h);
        samples.push(CoherenceSample { t, rho_gg: f, rho_ge: phase * h, d_rho_ge: phase * h_dot });
        written.push(e);
    }
    let mut max_error = 0.0f64;
    for (r, e) in field_from_trajectory(&samples, &cfg.sys, &noise, cfg.target.t0()).into_iter().zip(written) {
        match r {
            Ok(v) => max_error = max_error.max((v - e).abs()),
            Err(PulseError::SingularSample { .. }) => singular += 1,
            Err(other) => return Err(CliError::Numerical(other.to_string())),
        }
    }
    Ok(VerifyReport { compared: samples.len(), singular, max_error })
}

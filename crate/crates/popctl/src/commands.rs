use popctl_core::integrate::{Frame, IntegrateError, IntegrateOptions, PulseDrive};
use popctl_core::profile::{f_dot, f_profile};
use popctl_core::sweep::{max_feasible_nbar, SweepError, SweepParam, SweepSetup, DEFAULT_NBAR_TOL};
use popctl_core::{
    integrate, steady_state_feasibility, verify_tracking, CoherenceProfile, ProfileError, PulseError, SynthesizedPulse,
    TimeGrid, Trajectory,
};

use crate::config::{horizon_text, Command, RunConfig};
use crate::error::CliError;
use crate::output::{flag, map_csv, map_matrix, num, opt_num, write_text, Csv};
use crate::parallel::feasibility_map_par;
use crate::{svg, verify};

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    match cfg.command {
        Command::Synth => synth(cfg),
        Command::Simulate => simulate(cfg),
        Command::Map => map(cfg),
        Command::Steady => steady(cfg),
        Command::NbarBound => nbar_bound(cfg),
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

/// Solves the profile; an onset-infeasible target writes the trailer to
/// `csv` and comes back as `Err`.
fn solve_pulse(cfg: &RunConfig, grid: &TimeGrid, csv: &mut Csv) -> Result<SynthesizedPulse, CliError> {
    match CoherenceProfile::solve(&cfg.target, &cfg.noise, grid, cfg.u_seed) {
        Ok(profile) => SynthesizedPulse::new(cfg.sys, profile, cfg.pulse).map_err(usage),
        Err(ProfileError::InfeasibleAtOnset { s0 }) => {
            csv.comment("first_violation_time", num(cfg.target.t0()));
            csv.emit(cfg.out.as_deref())?;
            Err(CliError::Infeasible(format!("coherence turns negative at onset (source term {s0:.3e} < 0)")))
        }
        Err(e) => Err(usage(e)),
    }
}

fn pulse_trailer(csv: &mut Csv, pulse: &SynthesizedPulse, clip_events: usize) {
    csv.comment("peak_amplitude", num(pulse.peak_amplitude()));
    csv.comment("clip_events", clip_events.to_string());
    csv.comment("approximate", pulse.is_approximate().to_string());
    csv.comment("valid_end", num(pulse.valid_end()));
    if let Some(tv) = pulse.divergence_time() {
        csv.comment("first_violation_time", num(tv));
    }
}

fn infeasible_after(pulse: &SynthesizedPulse) -> Result<(), CliError> {
    match pulse.divergence_time() {
        Some(tv) => Err(CliError::Infeasible(format!(
            "prescribed coherence reaches zero at t = {tv}; field diverges, output stops there"
        ))),
        None => Ok(()),
    }
}

fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let grid = TimeGrid::covering(cfg.target.t0(), cfg.t1, cfg.dt).map_err(usage)?;
    let mut csv = Csv::new(cfg, &["t", "E", "f", "fdot", "u", "h", "feasible"]);
    let pulse = solve_pulse(cfg, &grid, &mut csv)?;
    let profile = pulse.profile();
    let mut clips = 0;
    let mut skipped = 0;
    for k in 0..grid.len() {
        let t = grid.time(k);
        if t > pulse.valid_end() {
            break;
        }
        let e = match pulse.field_sample(t) {
            Ok(s) => {
                clips += usize::from(s.clipped);
                s.value
            }
            Err(PulseError::DivergentField { .. }) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(CliError::Numerical(e.to_string())),
        };
        csv.row([
            num(t),
            num(e),
            num(f_profile(t, &cfg.target)),
            num(f_dot(t, &cfg.target)),
            num(profile.u()[k]),
            opt_num(profile.h(k)),
            flag(profile.feasible()[k]).to_string(),
        ]);
    }
    pulse_trailer(&mut csv, &pulse, clips);
    csv.comment("singular_rows_skipped", skipped.to_string());
    csv.emit(cfg.out.as_deref())?;
    eprintln!(
        "synth: {} rows, peak |E| = {:.4e}, valid until t = {}",
        grid.len(),
        pulse.peak_amplitude(),
        pulse.valid_end()
    );
    if pulse.is_approximate() {
        eprintln!("synth: amplitude cap applied {clips} times; the pulse is approximate");
    }
    if cfg.verify {
        let text = match &cfg.out {
            Some(p) => std::fs::read_to_string(p)?,
            None => csv.text().to_string(),
        };
        let rep = verify::check_synth_csv(&text, cfg)?;
        eprintln!(
            "verify: {} rows compared, max |ΔE| = {:.3e}, {} singular",
            rep.compared, rep.max_error, rep.singular
        );
        if rep.max_error > verify::VERIFY_TOL {
            return Err(CliError::Numerical(format!(
                "inverse map disagrees with the synthesized field by {:.3e}",
                rep.max_error
            )));
        }
    }
    infeasible_after(&pulse)
}

fn integrate_error(e: IntegrateError) -> CliError {
    match e {
        IntegrateError::Param(_) | IntegrateError::CarrierUnderResolved { .. } => usage(e),
        _ => CliError::Numerical(e.to_string()),
    }
}

/// Mean `|ρ_ge|` and peak `|E|` over the last 5% of the run, but at least two
/// carrier periods.
fn tail_stats(traj: &Trajectory, period: f64) -> (f64, f64) {
    let n = traj.len();
    let span = (0.05 * (traj.time(n - 1) - traj.time(0))).max(2.0 * period);
    let from = traj.time(n - 1) - span;
    let (mut sum, mut count, mut peak) = (0.0, 0usize, 0.0f64);
    for k in (0..n).rev() {
        if traj.time(k) < from {
            break;
        }
        sum += traj.states()[k].coherence();
        count += 1;
        if let Some(e) = traj.field()[k] {
            peak = peak.max(e.abs());
        }
    }
    (sum / count as f64, peak)
}

fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let frame = if cfg.rwa { Frame::Rwa } else { Frame::Lab };
    let opts = IntegrateOptions::new(frame, cfg.target.t0(), cfg.t1, cfg.dt);
    let grid = opts.grid().map_err(usage)?;
    let mut csv = Csv::new(cfg, &["t", "E", "rho_gg", "rho_ee", "re_rho_ge", "im_rho_ge", "abs_rho_ge", "f", "h"]);
    let pulse = solve_pulse(cfg, &grid, &mut csv)?;
    let drive = PulseDrive::new(&pulse);
    let traj = integrate(pulse.initial_state(), &drive, &cfg.sys, &cfg.noise, &opts).map_err(integrate_error)?;
    let rep = verify_tracking(&traj, pulse.profile()).map_err(integrate_error)?;
    for k in 0..traj.len() {
        let t = traj.time(k);
        let s = traj.lab_state(k);
        csv.row([
            num(t),
            opt_num(traj.field()[k]),
            num(s.rho_gg()),
            num(s.rho_ee()),
            num(s.rho_ge().re),
            num(s.rho_ge().im),
            num(s.coherence()),
            num(f_profile(t, &cfg.target)),
            opt_num(pulse.h_at(t)),
        ]);
    }
    let (tail_coherence, tail_field) = tail_stats(&traj, cfg.sys.carrier_period());
    let counters = traj.meta().counters;
    csv.comment("max_population_deviation", num(rep.max_population_deviation));
    csv.comment("time_of_max_population_deviation", num(rep.time_of_max_population_deviation));
    csv.comment("max_coherence_deviation", num(rep.max_coherence_deviation));
    csv.comment("time_of_max_coherence_deviation", num(rep.time_of_max_coherence_deviation));
    csv.comment("final_population_deviation", num(rep.final_population_deviation));
    csv.comment("post_loss_drift", opt_num(rep.post_loss_drift));
    csv.comment("trace_drift", num(rep.trace_drift));
    csv.comment("max_positivity_violation", num(rep.max_positivity_violation));
    csv.comment("purity_drift", opt_num(rep.purity_drift));
    csv.comment("tail_coherence", num(tail_coherence));
    csv.comment("tail_field_amplitude", num(tail_field));
    csv.comment("off_window_evaluations", counters.off_window_evaluations.to_string());
    csv.comment("divergence_time", opt_num(pulse.divergence_time()));
    pulse_trailer(&mut csv, &pulse, counters.clip_events);
    csv.emit(cfg.out.as_deref())?;

    let frame_name = if cfg.rwa { "rotating-wave" } else { "full (no RWA)" };
    eprintln!("simulate: {frame_name} equations, {} steps of {}", traj.len() - 1, cfg.dt);
    eprintln!(
        "  max |rho_gg - f| = {:.3e} at t = {}",
        rep.max_population_deviation, rep.time_of_max_population_deviation
    );
    eprintln!("  max ||rho_ge| - h| = {:.3e}", rep.max_coherence_deviation);
    eprintln!(
        "  final rho_gg = {:.6}, |rho_gg - f| = {:.3e}",
        traj.lab_state(traj.len() - 1).rho_gg(),
        rep.final_population_deviation
    );
    eprintln!("  tail |rho_ge| = {tail_coherence:.6}, tail peak |E| = {tail_field:.4e}");
    if let Some(d) = rep.post_loss_drift {
        eprintln!("  after the coherence is lost the population drifts by up to {d:.3e}");
    }
    if counters.clip_events > 0 {
        eprintln!("  amplitude cap applied {} times; the pulse is approximate", counters.clip_events);
    }
    infeasible_after(&pulse)
}

fn sweep_setup(cfg: &RunConfig) -> SweepSetup {
    SweepSetup { target: cfg.target, noise: cfg.noise, dt: cfg.dt, u_seed: cfg.u_seed }
}

fn sweep_error(e: SweepError) -> CliError {
    match e {
        SweepError::NoFeasibleBaseline => CliError::Infeasible(e.to_string()),
        SweepError::NonMonotoneBracket { .. } => CliError::Numerical(e.to_string()),
        _ => usage(e),
    }
}

fn map(cfg: &RunConfig) -> Result<(), CliError> {
    let setup = sweep_setup(cfg);
    let grid = feasibility_map_par(&cfg.axis, &setup, cfg.horizon).map_err(sweep_error)?;
    let mut csv = map_csv(cfg, &grid);
    let runs = grid.accessible_runs();
    let runs_text = runs.iter().map(|r| format!("[{},{}]", num(r.lo), num(r.hi))).collect::<Vec<_>>().join(";");
    csv.comment("accessible", if runs.is_empty() { "none".to_string() } else { runs_text });
    let bound = match cfg.axis.param {
        SweepParam::ThermalOccupation => match max_feasible_nbar(&setup, cfg.horizon, DEFAULT_NBAR_TOL) {
            Ok(b) => Some(b),
            Err(SweepError::NoFeasibleBaseline) => None,
            Err(e) => return Err(sweep_error(e)),
        },
        SweepParam::TargetPopulation => None,
    };
    if let Some(b) = bound {
        csv.comment("max_feasible_nbar", num(b));
    }
    csv.emit(cfg.out.as_deref())?;
    if let Some(p) = &cfg.matrix {
        write_text(Some(p), &map_matrix(cfg, &grid))?;
    }
    if let Some(p) = &cfg.svg {
        write_text(Some(p), &svg::render(&grid))?;
    }
    let name = cfg.axis.param.name();
    if runs.is_empty() {
        eprintln!(
            "map: no accessible {name} in [{}, {}] up to horizon {}",
            cfg.axis.min,
            cfg.axis.max,
            horizon_text(cfg.horizon)
        );
    }
    for r in &runs {
        eprintln!("map: accessible {name} in [{}, {}] (grid resolution)", r.lo, r.hi);
    }
    match bound {
        Some(b) => eprintln!("map: max feasible nbar = {b:.4} (horizon {})", horizon_text(cfg.horizon)),
        None if cfg.axis.param == SweepParam::ThermalOccupation => {
            eprintln!("map: target infeasible already at nbar = 0")
        }
        None => {}
    }
    Ok(())
}

fn steady(cfg: &RunConfig) -> Result<(), CliError> {
    let a_f = cfg.target.a_f();
    let rep = steady_state_feasibility(a_f, &cfg.noise, &cfg.sys);
    let mut csv = Csv::new(cfg, &["a_f", "h_inf", "feasible", "band_lo", "band_hi", "steady_field_amplitude"]);
    csv.row([
        num(a_f),
        opt_num(rep.h_inf),
        flag(rep.feasible).to_string(),
        opt_num(rep.band.map(|b| b.lo)),
        opt_num(rep.band.map(|b| b.hi)),
        opt_num(rep.steady_field_amplitude),
    ]);
    csv.emit(cfg.out.as_deref())?;
    if rep.degenerate {
        eprintln!("degenerate: steady coherence 0 (no thermal dissipation, every target settles without coherence)");
        return Ok(());
    }
    if let Some(b) = rep.band {
        eprintln!("band={},{}", b.lo, b.hi);
    }
    match rep.h_inf {
        Some(h) => eprintln!("h_inf={h:.6} for a_f={a_f}"),
        None => eprintln!("no steady coherence for a_f={a_f}"),
    }
    if let Some(a) = rep.steady_field_amplitude {
        eprintln!("steady field amplitude={a:.4e}");
    }
    if rep.feasible {
        Ok(())
    } else {
        Err(CliError::Infeasible(format!("a_f = {a_f} lies outside the steady-state band")))
    }
}

fn nbar_bound(cfg: &RunConfig) -> Result<(), CliError> {
    let setup = sweep_setup(cfg);
    let mut csv = Csv::new(cfg, &["a_f", "horizon", "max_feasible_nbar"]);
    let result = max_feasible_nbar(&setup, cfg.horizon, DEFAULT_NBAR_TOL);
    let bound = match result {
        Ok(b) => b,
        Err(SweepError::NoFeasibleBaseline) => {
            csv.comment("max_feasible_nbar", "none");
            csv.emit(cfg.out.as_deref())?;
            return Err(sweep_error(SweepError::NoFeasibleBaseline));
        }
        Err(e) => return Err(sweep_error(e)),
    };
    csv.row([num(cfg.target.a_f()), horizon_text(cfg.horizon), num(bound)]);
    csv.emit(cfg.out.as_deref())?;
    eprintln!("max feasible nbar = {bound:.4} (a_f = {}, horizon {})", cfg.target.a_f(), horizon_text(cfg.horizon));
    Ok(())
}

//! End-to-end acceptance checks. Prints one line per criterion and exits
//! non-zero if any fails.

use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use popctl_core::integrate::{FieldDrive, Frame, IntegrateOptions};
use popctl_core::sweep::DEFAULT_NBAR_TOL;
use popctl_core::{
    accessible_band, coherence_quadrature, integrate, max_feasible_nbar, steady_band, verify_tracking,
    CoherenceProfile, ControlTarget, Horizon, Interval, NoDrive, NoiseParams, PulseDrive, PulseOptions, SweepSetup,
    SynthesizedPulse, SystemParams, TimeGrid, TrackingReport, Trajectory, TwoLevelState,
};

const TRACK_TOL: f64 = 0.02;
const RWA_TOL: f64 = 1e-6;
const POSITIVITY_TOL: f64 = 1e-9;
const PURITY_TOL: f64 = 1e-9;
const PURITY_DT: f64 = 0.5;
const QUADRATURE_TOL: f64 = 1e-8;
const BAND_TOL: f64 = 1e-3;
const STEADY_REL_TOL: f64 = 0.05;
const H_INF: f64 = 0.076564;
const STEADY_AMPLITUDE: f64 = 1.480e-4;
const NBAR_TARGET: f64 = 0.35;
const NBAR_TOL: f64 = 0.05;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Runs collected for the conservation criterion.
#[derive(Default)]
struct Ledger {
    runs: Vec<(&'static str, TrackingReport)>,
}

struct Run {
    traj: Trajectory,
    report: TrackingReport,
    pulse: SynthesizedPulse,
}

fn run(target: ControlTarget, noise: NoiseParams, frame: Frame, t1: f64, dt: Option<f64>) -> Run {
    let sys = SystemParams::default();
    let opts = match dt {
        Some(dt) => IntegrateOptions::new(frame, target.t0(), t1, dt),
        None => IntegrateOptions::with_default_dt(frame, target.t0(), t1, &sys, &noise),
    };
    let grid = opts.grid().expect("grid");
    let pulse =
        SynthesizedPulse::synthesize(&target, &noise, &sys, &grid, 0.0, PulseOptions::default()).expect("pulse");
    let traj = integrate(pulse.initial_state(), &PulseDrive::new(&pulse), &sys, &noise, &opts).expect("integrate");
    let report = verify_tracking(&traj, pulse.profile()).expect("report");
    Run { traj, report, pulse }
}

fn target(a_i: f64, a_f: f64) -> ControlTarget {
    ControlTarget::new(a_i, a_f, 1e-2).unwrap()
}

fn dephasing_case() -> (ControlTarget, NoiseParams) {
    (target(0.8, 0.3), NoiseParams::new(1e-3, 0.0, 0.0).unwrap())
}

fn rwa_oracle(ledger: &mut Ledger) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut accepted, mut drawn) = (0, 0);
    let (mut worst_p, mut worst_h) = (0.0f64, 0.0f64);
    while accepted < 50 {
        drawn += 1;
        let t = ControlTarget::new(rng.gen_range(0.02..0.98), rng.gen_range(0.02..0.98), rng.gen_range(5e-3..2e-2))
            .unwrap()
            .with_phi0(rng.gen_range(-3.1..3.1))
            .unwrap();
        let noise =
            NoiseParams::new(rng.gen_range(0.0..1e-2), rng.gen_range(0.0..5e-4), rng.gen_range(0.0..0.5)).unwrap();
        let t1 = -t.t0();
        let grid = TimeGrid::covering(t.t0(), t1, 1.0).unwrap();
        match CoherenceProfile::solve(&t, &noise, &grid, 0.0) {
            Ok(p) if p.is_fully_feasible() => {}
            _ => continue,
        }
        let r = run(t, noise, Frame::Rwa, t1, Some(1.0));
        worst_p = worst_p.max(r.report.max_population_deviation);
        worst_h = worst_h.max(r.report.max_coherence_deviation);
        ledger.runs.push(("rwa oracle", r.report));
        accepted += 1;
    }
    outcome(
        worst_p <= RWA_TOL && worst_h <= RWA_TOL,
        format!("50 feasible configs ({drawn} drawn): max|rho_gg-f| = {worst_p:.2e}, max||rho_ge|-h| = {worst_h:.2e} (tol {RWA_TOL:.0e})"),
    )
}

fn dephasing_tracking(ledger: &mut Ledger) -> Outcome {
    let (t, noise) = dephasing_case();
    let start = Instant::now();
    let lab = run(t, noise, Frame::Lab, 800.0, None);
    let elapsed = start.elapsed().as_secs_f64();
    let rwa = run(t, noise, Frame::Rwa, 800.0, None);
    ledger.runs.push(("dephasing lab", lab.report));
    ledger.runs.push(("dephasing rwa", rwa.report));
    let final_dev = (lab.traj.last().rho_gg() - 0.3).abs();
    let max_dev = lab.report.max_population_deviation;
    outcome(
        final_dev <= TRACK_TOL && max_dev <= TRACK_TOL && elapsed < 10.0,
        format!(
            "no-RWA |rho_gg(t1)-0.3| = {final_dev:.2e}, max|rho_gg-f| = {max_dev:.4} at t = {:.1} (tol {TRACK_TOL}), {elapsed:.3} s; RWA frame max = {:.1e}",
            lab.report.time_of_max_population_deviation, rwa.report.max_population_deviation
        ),
    )
}

fn relaxation_loss(ledger: &mut Ledger) -> Outcome {
    let t = target(0.8, 0.3);
    let noise = NoiseParams::new(0.0, 1e-4, 0.0).unwrap();
    let t1 = 2400.0;
    let grid = TimeGrid::covering(t.t0(), t1, 1.0).unwrap();
    let tv = CoherenceProfile::solve(&t, &noise, &grid, 0.0).ok().and_then(|p| p.first_violation_time());
    let violation_ok = tv.is_some_and(|v| v.is_finite() && v > 0.0);

    let status = Command::new(env!("CARGO_BIN_EXE_popctl"))
        .args(["synth", "--big-gamma", "1e-4", "--t1", "2400"])
        .output()
        .expect("popctl runs");
    let synth_code = status.status.code();

    let lab = run(t, noise, Frame::Lab, t1, None);
    ledger.runs.push(("relaxation lab", lab.report));
    let before = lab.report.max_population_deviation;
    let after = lab.report.post_loss_drift.unwrap_or(0.0);
    let rwa = run(t, noise, Frame::Rwa, t1, None);
    outcome(
        violation_ok && synth_code == Some(2) && before <= TRACK_TOL && after > TRACK_TOL,
        format!(
            "first_violation_time = {:?}, synth exit {:?}, max|rho_gg-f| before = {before:.4} (tol {TRACK_TOL}), drift after = {after:.3}; RWA frame before = {:.1e}",
            tv,
            synth_code,
            rwa.report.max_population_deviation
        ),
    )
}

fn steady_band_check() -> Outcome {
    let noise = NoiseParams::new(1e-3, 1e-4, 0.3).unwrap();
    let analytic = steady_band(&noise).unwrap();
    let exact = analytic.lo == 0.5 && (analytic.hi - 0.8125).abs() <= 1e-15;
    let t = target(0.8, 0.6);
    let setup = SweepSetup { u_seed: 0.1, ..SweepSetup::new(t, noise) };
    let numeric = accessible_band(&setup, Horizon::Infinite, 2000).unwrap();
    let agrees = numeric.len() == 1
        && (numeric[0].lo - analytic.lo).abs() <= BAND_TOL
        && (numeric[0].hi - analytic.hi).abs() <= BAND_TOL;
    outcome(
        exact && agrees,
        format!(
            "analytic [{}, {}], numeric scan {:?} (tol {BAND_TOL:.0e})",
            analytic.lo,
            analytic.hi,
            intervals(&numeric)
        ),
    )
}

fn intervals(v: &[Interval]) -> Vec<(f64, f64)> {
    v.iter().map(|i| (i.lo, i.hi)).collect()
}

fn thermal_steady_state(ledger: &mut Ledger) -> Outcome {
    let t = target(0.8, 0.6);
    let noise = NoiseParams::new(1e-3, 1e-4, 0.3).unwrap();
    let lab = run(t, noise, Frame::Lab, 3200.0, None);
    ledger.runs.push(("thermal lab", lab.report));
    let traj = &lab.traj;
    let n = traj.len();
    let span = (0.05 * (traj.time(n - 1) - traj.time(0))).max(2.0 * lab.pulse.sys().carrier_period());
    let from = traj.time(n - 1) - span;
    let tail: Vec<usize> = (0..n).filter(|&k| traj.time(k) >= from).collect();
    let coherence = tail.iter().map(|&k| traj.states()[k].coherence()).sum::<f64>() / tail.len() as f64;
    let amplitude = tail.iter().filter_map(|&k| traj.field()[k]).fold(0.0f64, |m, e| m.max(e.abs()));
    let c_rel = (coherence - H_INF).abs() / H_INF;
    let a_rel = (amplitude - STEADY_AMPLITUDE).abs() / STEADY_AMPLITUDE;
    outcome(
        c_rel <= STEADY_REL_TOL && a_rel <= STEADY_REL_TOL,
        format!(
            "tail |rho_ge| = {coherence:.5} ({:.2}% off), tail |E| = {amplitude:.4e} ({:.2}% off)",
            100.0 * c_rel,
            100.0 * a_rel
        ),
    )
}

fn nbar_bound() -> Outcome {
    let t = target(0.8, 0.4);
    let noise = NoiseParams::new(0.0, 1e-4, 0.0).unwrap();
    let setup = SweepSetup::new(t, noise);
    let bounds: Vec<f64> = [16.0, 24.0, 32.0]
        .iter()
        .map(|k| max_feasible_nbar(&setup, Horizon::Finite(t.t0() + k / t.alpha()), DEFAULT_NBAR_TOL).unwrap())
        .collect();
    let near = (bounds[0] - NBAR_TARGET).abs() <= NBAR_TOL;
    let monotone = bounds.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        near && monotone,
        format!("bounds at t0+{{16,24,32}}/alpha = {bounds:.4?} (target {NBAR_TARGET} +- {NBAR_TOL}, non-increasing)"),
    )
}

fn conservation(ledger: &mut Ledger) -> Outcome {
    // closed-system runs for the purity criterion; RK4 is not unitary, so
    // the drift depends on the step (about dt^5)
    let sys = SystemParams::default();
    let closed = NoiseParams::none();
    let (t, _) = dephasing_case();
    let purity_runs = [
        ("closed pulse lab", run(t, closed, Frame::Lab, 800.0, Some(PURITY_DT)).report),
        ("closed pulse rwa", run(t, closed, Frame::Rwa, 800.0, Some(PURITY_DT)).report),
    ];
    let default_step = run(t, closed, Frame::Lab, 800.0, None).report.purity_drift.unwrap_or(f64::NAN);
    let opts = IntegrateOptions::new(Frame::Lab, 0.0, 1000.0, PURITY_DT);
    let free = integrate(TwoLevelState::new(0.7, 0.3.into()).unwrap(), &NoDrive, &sys, &closed, &opts).unwrap();
    let driven = integrate(TwoLevelState::ground(), &FieldDrive(smooth_field), &sys, &closed, &opts).unwrap();
    let purity_of = |traj: &Trajectory| {
        let p0 = traj.states()[0].purity();
        traj.states().iter().map(|s| (s.purity() - p0).abs()).fold(0.0, f64::max)
    };
    let mut purity = purity_of(&free).max(purity_of(&driven));
    for (name, r) in purity_runs {
        purity = purity.max(r.purity_drift.unwrap_or(f64::INFINITY));
        ledger.runs.push((name, r));
    }

    let trace_exact = ledger.runs.iter().all(|(_, r)| r.trace_drift == 0.0)
        && [&free, &driven].iter().all(|tr| tr.states().iter().all(|s| s.rho_gg() + s.rho_ee() == 1.0));
    let (worst_run, positivity) = ledger
        .runs
        .iter()
        .map(|(n, r)| (*n, r.max_positivity_violation))
        .fold(("", 0.0f64), |a, b| if b.1 > a.1 { b } else { a });

    let mut quad = 0.0f64;
    for (a_i, a_f, noise) in [
        (0.8, 0.3, NoiseParams::new(1e-3, 0.0, 0.0).unwrap()),
        (0.8, 0.6, NoiseParams::new(1e-3, 1e-4, 0.3).unwrap()),
        (0.8, 0.3, NoiseParams::new(0.0, 1e-4, 0.0).unwrap()),
        (0.3, 0.9, NoiseParams::new(5e-3, 3e-4, 1.0).unwrap()),
    ] {
        let t = target(a_i, a_f);
        let grid = TimeGrid::covering(t.t0(), 2400.0, 1.0).unwrap();
        let ode = CoherenceProfile::solve_unchecked(&t, &noise, &grid, 0.0).unwrap();
        let q = coherence_quadrature(&t, &noise, &grid, 0.0);
        quad = ode.u().iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(quad, f64::max);
    }
    outcome(
        trace_exact && positivity <= POSITIVITY_TOL && purity <= PURITY_TOL && quad <= QUADRATURE_TOL,
        format!(
            "trace exact: {trace_exact}, worst positivity violation {positivity:.1e}{} over {} runs, closed purity drift {purity:.1e} at dt = {PURITY_DT} ({default_step:.1e} at the default lab step), u-ODE vs quadrature {quad:.1e}",
            if worst_run.is_empty() { String::new() } else { format!(" ({worst_run})") },
            ledger.runs.len()
        ),
    )
}

fn closed_band() -> Outcome {
    let t = target(0.8, 0.3);
    let setup = SweepSetup::new(t, NoiseParams::none());
    let band = accessible_band(&setup, Horizon::default_for(&t), 1000).unwrap();
    let ok = band.len() == 1 && (band[0].lo - 0.2).abs() <= BAND_TOL && (band[0].hi - 0.8).abs() <= BAND_TOL;
    outcome(ok, format!("band {:?} (expected [0.2, 0.8] +- {BAND_TOL:.0e})", intervals(&band)))
}

fn band_of(noise: NoiseParams) -> Option<Interval> {
    let t = target(0.8, 0.3);
    let setup = SweepSetup::new(t, noise);
    let band = accessible_band(&setup, Horizon::default_for(&t), 400).unwrap();
    match band.as_slice() {
        [b] => Some(*b),
        _ => None,
    }
}

fn shrinkage() -> Outcome {
    let gammas: Vec<Option<Interval>> =
        [1e-4, 1e-3, 1e-2].iter().map(|&g| band_of(NoiseParams::new(g, 0.0, 0.0).unwrap())).collect();
    let nested =
        gammas.iter().all(Option::is_some) && gammas.windows(2).all(|w| w[1].unwrap().is_within(&w[0].unwrap(), 1e-12));
    let weak = band_of(NoiseParams::new(0.0, 1e-4, 0.0).unwrap());
    let strong = band_of(NoiseParams::new(0.0, 1e-3, 0.0).unwrap());
    let displaced = match (weak, strong) {
        (Some(w), Some(s)) => s.width() < w.width() && s.midpoint() > w.midpoint(),
        _ => false,
    };
    let show = |b: &Option<Interval>| b.map_or("none".to_string(), |b| format!("[{:.4}, {:.4}]", b.lo, b.hi));
    outcome(
        nested && displaced,
        format!(
            "gamma ladder {} ; Gamma 1e-4 {} -> 1e-3 {}",
            gammas.iter().map(show).collect::<Vec<_>>().join(" ⊇ "),
            show(&weak),
            show(&strong)
        ),
    )
}

fn smooth_field(t: f64) -> f64 {
    3e-3 * (0.02 * t).sin() * (-((t - 300.0) / 150.0).powi(2)).exp()
}

fn integrator_order() -> Outcome {
    let sys = SystemParams::default();
    let drive = FieldDrive(smooth_field);
    let end = |dt: f64| {
        let opts = IntegrateOptions::new(Frame::Lab, 0.0, 600.0, dt);
        *integrate(TwoLevelState::ground(), &drive, &sys, &NoiseParams::none(), &opts).unwrap().last()
    };
    let (a, b, c) = (end(2.0), end(1.0), end(0.5));
    let dist =
        |x: &TwoLevelState, y: &TwoLevelState| (x.rho_gg() - y.rho_gg()).abs().max((x.rho_ge() - y.rho_ge()).norm());
    let ratio = dist(&a, &b) / dist(&b, &c);
    outcome((12.0..=20.0).contains(&ratio), format!("error ratio on halving dt = {ratio:.2} (expected 12..20)"))
}

fn main() {
    let mut ledger = Ledger::default();
    let results = [
        ("AC1 rotating-wave exactness", rwa_oracle(&mut ledger)),
        ("AC2 full-equation tracking, dephasing only", dephasing_tracking(&mut ledger)),
        ("AC3 loss of coherence under relaxation", relaxation_loss(&mut ledger)),
        ("AC4 steady-state band", steady_band_check()),
        ("AC5 thermal steady state", thermal_steady_state(&mut ledger)),
        ("AC6 thermal occupation bound", nbar_bound()),
        ("AC7 conservation", conservation(&mut ledger)),
        ("AC8 closed-system band", closed_band()),
        ("AC9 monotone shrinkage", shrinkage()),
        ("AC10 integrator order", integrator_order()),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

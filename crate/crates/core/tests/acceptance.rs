//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::f64::consts::{FRAC_PI_2, PI};
use std::process::ExitCode;
use std::time::Instant;

use common::{annulus, circle_intersections, clearance, elbows, links, rk4_time_to_quarter, static_threshold};
use cutaneous_core::device::arbitration::{arbitrate_collision, ArbitrationParams};
use cutaneous_core::harness::{
    build_trial_schedule, condition_seed, read_results_csv, run_scripted_protocol, write_results_csv, Condition,
    Operator, OperatorParams, ProtocolParams, ScriptedOperator, TrialResult, TrialRunner, TRIALS_PER_CONDITION,
};
use cutaneous_core::patterns::{classify_pattern, PatternError, PatternKind, PatternSpec, TactorPair};
use cutaneous_core::pivot::{pivot_step, ContactMode, FixtureParams, ObjectSpec, PhysicsParams, PivotState};
use cutaneous_core::protocol::{Command, CommandMessage, StartTrial, TrialStatus};
use cutaneous_core::session::{replay, CommandLog, Session, SimConfig};
use cutaneous_core::station::{Finger, Mechanism, Station};
use cutaneous_core::workspace::compute_workspace;
use cutaneous_core::{JointAngles, Point2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.failures += (!pass) as usize;
    }
}

fn stations() -> [Station; 2] {
    Finger::ALL.map(Station::default_for)
}

fn kinematics_closure(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut assembled = 0;
    for s in stations() {
        for m in [Mechanism::Lower, Mechanism::Upper] {
            let g = s.mechanism(m);
            for _ in 0..10_000 {
                let q = JointAngles::new(rng.random_range(-PI..PI), rng.random_range(-PI..PI));
                if let Ok(p) = g.forward_kinematics(q) {
                    let (a1, a2) = elbows(g, q);
                    worst = worst
                        .max((p.distance(a1) - g.l3).abs())
                        .max((p.distance(a2) - g.l4).abs());
                    assembled += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    r.check(
        "kinematics closure",
        worst <= 1e-9 && elapsed < 1.0,
        format!("{assembled} assembled configurations, worst residual {worst:.2e} mm (tol 1e-9), {elapsed:.3} s (limit 1 s)"),
    );
}

fn round_trip(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    let mut total = 0;
    for s in stations() {
        for m in [Mechanism::Lower, Mechanism::Upper] {
            let g = s.mechanism(m);
            let (c, reach) = (g.base_midpoint(), g.max_reach());
            let mut n = 0;
            while n < 10_000 {
                let p = c + Point2::new(rng.random_range(-reach..reach), rng.random_range(-reach..reach));
                if !(g.is_reachable(p) && g.side_of_base(p) > 0.0) {
                    continue;
                }
                n += 1;
                match g.inverse_kinematics(p).and_then(|q| g.forward_kinematics(q)) {
                    Ok(back) => {
                        let e = back.distance(p);
                        worst = worst.max(e);
                        failures += (e > 1e-6) as usize;
                    }
                    Err(_) => failures += 1,
                }
            }
            total += n;
        }
    }
    r.check(
        "round trip",
        failures == 0,
        format!("{}/{total} within 1e-6 mm, worst {worst:.2e} mm", total - failures),
    );
}

fn worked_example(r: &mut Report) {
    let g = *stations()[0].mechanism(Mechanism::Lower);
    let q = JointAngles::from_degrees(90.0, 90.0);
    let (a1, a2) = elbows(&g, q);
    let oracle = circle_intersections(a1, g.l3, a2, g.l4).map(|(p, q)| if p.y > q.y { p } else { q });
    let p = g.forward_kinematics(q).ok();
    let pass = match (p, oracle) {
        (Some(p), Some(o)) => p.distance(o) <= 1e-3 && (p.x - 6.250).abs() <= 1e-3 && (p.y - 22.636).abs() <= 1e-3,
        _ => false,
    };
    r.check(
        "worked example",
        pass,
        format!("P = {p:?}, oracle {oracle:?}, expected (6.250, 22.636) ± 1e-3 mm"),
    );
}

fn workspace(r: &mut Report) {
    let mut outside = 0;
    let mut disagreements = 0;
    let mut target_cells = 0;
    for s in stations() {
        let grid = compute_workspace(&s.lower, &s.upper, s.target, 0.1).expect("resolution is fine enough");
        let summary = grid.summary();
        outside += summary.target_cells_outside_intersection;
        target_cells += summary.target_cells;
        for cell in grid.cells() {
            disagreements += (cell.lower != annulus(&s.lower, cell.center)) as usize;
            disagreements += (cell.upper != annulus(&s.upper, cell.center)) as usize;
        }
        for k in 0..3600 {
            let p = s.target.boundary_point(k as f64 * std::f64::consts::TAU / 3600.0);
            outside += !(annulus(&s.lower, p) && annulus(&s.upper, p)) as usize;
        }
    }
    r.check(
        "workspace",
        outside == 0 && disagreements == 0,
        format!(
            "{target_cells} target cells, {outside} outside lower∩upper (incl. boundary samples), {disagreements} raster/annulus disagreements"
        ),
    );
}

fn arbitration(r: &mut Report) {
    let params = ArbitrationParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut ok, mut total, mut min_clear) = (0, 0, f64::INFINITY);
    for s in stations() {
        let mut n = 0;
        while n < 1_000 {
            let mut sample = || loop {
                let p = s.target.center
                    + Point2::new(
                        rng.random_range(-s.target.semi_x..s.target.semi_x),
                        rng.random_range(-s.target.semi_y..s.target.semi_y),
                    );
                if s.target.contains(p) {
                    break p;
                }
            };
            let (up, lo) = (sample(), sample());
            let (Ok(qu), Ok(ql)) = (s.upper.inverse_kinematics(up), s.lower.inverse_kinematics(lo)) else {
                continue;
            };
            if clearance(&links(&s.upper, qu, up), &links(&s.lower, ql, lo)) >= params.clearance_min {
                continue;
            }
            n += 1;
            if let Ok(out) = arbitrate_collision(up, lo, &s.upper, &s.lower, &params) {
                let c = clearance(
                    &links(&s.upper, out.upper_angles, out.upper),
                    &links(&s.lower, out.lower_angles, out.lower),
                );
                min_clear = min_clear.min(c);
                ok += (out.upper == up && c >= params.clearance_min - 1e-9) as usize;
            }
        }
        total += n;
    }
    r.check(
        "collision arbitration",
        ok == total,
        format!("{ok}/{total} conflicting pairs cleared with upper unchanged, min clearance {min_clear:.3} mm (≥ 1.5)"),
    );
}

fn patterns(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut clean_ok = 0;
    for n in 0..300 {
        let kind = PatternKind::ALL[n % 3];
        let s = stations()[(n / 3) % 2];
        let spec = loop {
            let mut spec = PatternSpec::default_for(kind, &s);
            spec.center = s.target.center
                + Point2::new(
                    rng.random_range(-0.5 * s.target.semi_x..0.5 * s.target.semi_x),
                    rng.random_range(-0.5 * s.target.semi_y..0.5 * s.target.semi_y),
                );
            spec.amplitude = rng.random_range(0.5..6.0);
            spec.duration = rng.random_range(0.2..5.0);
            let sweep = rng.random_range(PI / 6.0..PI);
            spec.twist_sweep = if rng.random_bool(0.5) { sweep } else { -sweep };
            if !matches!(spec.sample(100.0), Err(PatternError::WorkspaceExceeded { .. })) {
                break spec;
            }
        };
        clean_ok += (classify_pattern(&spec.sample(100.0).unwrap()) == Ok(kind)) as usize;
    }

    let noise = Normal::new(0.0, 0.2).unwrap();
    let clean = PatternSpec::default_for(PatternKind::Slipping, &stations()[0])
        .sample(100.0)
        .unwrap();
    let mut noisy_ok = 0;
    for _ in 0..1000 {
        let traj: Vec<TactorPair> = clean
            .iter()
            .map(|p| TactorPair {
                upper: p.upper + Point2::new(noise.sample(&mut rng), noise.sample(&mut rng)),
                lower: p.lower + Point2::new(noise.sample(&mut rng), noise.sample(&mut rng)),
                t: p.t,
            })
            .collect();
        noisy_ok += (classify_pattern(&traj) == Ok(PatternKind::Slipping)) as usize;
    }
    r.check(
        "pattern pipeline",
        clean_ok == 300 && noisy_ok >= 950,
        format!("clean {clean_ok}/300 (need 300), slipping with 0.2 mm noise {noisy_ok}/1000 (need ≥ 950)"),
    );
}

fn pivot_statics(r: &mut Report) {
    let spec = ObjectSpec::with_mass(0.01);
    let params = PhysicsParams::default();
    let holds = |fn_: f64| {
        let mut s = PivotState::at_rest(spec.diameter, fn_);
        for _ in 0..1000 {
            s = pivot_step(&s, &spec, fn_, &params, params.substep).0;
        }
        s.mode == ContactMode::Stick && s.theta == 0.0
    };
    let (mut lo, mut hi) = (0.0f64, 10.0f64);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let oracle = static_threshold(0.01, 9.81, 0.04, 0.6, 0.002);
    let rel = (hi - 1.635).abs() / 1.635;
    r.check(
        "pivot statics",
        rel <= 0.02 && (oracle - 1.635).abs() < 5e-4,
        format!(
            "bisected threshold {hi:.4} N vs 1.635 N (analytic {oracle:.4} N), deviation {:.3}% (tol 2%)",
            100.0 * rel
        ),
    );
}

fn free_fall_deviation() -> f64 {
    let params = PhysicsParams {
        viscous: 0.0,
        ..PhysicsParams::default()
    };
    let mut worst: f64 = 0.0;
    for mass in [0.005, 0.01, 0.02] {
        let spec = ObjectSpec::with_mass(mass);
        let (l, rad, d) = (spec.length, spec.diameter / 2.0, spec.grasp_offset);
        let oracle = rk4_time_to_quarter(params.gravity * d / (l * l / 12.0 + rad * rad / 4.0 + d * d));
        let mut s = PivotState::at_rest(0.02, 0.0);
        let mut t = 0.0;
        let dt = params.substep;
        let sim = loop {
            let (next, _) = pivot_step(&s, &spec, 0.0, &params, dt);
            if next.theta >= FRAC_PI_2 {
                break t + dt * (FRAC_PI_2 - s.theta) / (next.theta - s.theta);
            }
            s = next;
            t += dt;
        };
        worst = worst.max((sim - oracle).abs() / oracle);
    }
    worst
}

/// Runs the full scripted protocol keeping every trial's tick history.
fn logged_protocol(seed: u64) -> (Vec<TrialResult>, usize, usize) {
    let (protocol, physics, fixture) = (
        ProtocolParams::default(),
        PhysicsParams::default(),
        FixtureParams::default(),
    );
    let mut results = Vec::new();
    let (mut ticks, mut negative) = (0, 0);
    for condition in Condition::ALL {
        for cfg in build_trial_schedule(condition, condition_seed(seed, condition)) {
            let mut op = ScriptedOperator::new(OperatorParams::default(), &cfg, &protocol, &physics);
            let mut runner = TrialRunner::new(cfg, protocol, physics, fixture);
            while !runner.is_finished() {
                let cmd = op.command(&runner.observe());
                runner.step(cmd);
            }
            ticks += runner.history().len();
            negative += runner.history().iter().filter(|s| s.min_friction_work < 0.0).count();
            results.push(runner.result());
        }
    }
    (results, ticks, negative)
}

fn headless(r: &mut Report, seed: u64) -> Vec<TrialResult> {
    let start = Instant::now();
    let (results, ticks, negative) = logged_protocol(seed);
    let elapsed = start.elapsed().as_secs_f64();

    let deviation = free_fall_deviation();
    r.check(
        "pivot dynamics",
        deviation <= 0.01 && negative == 0,
        format!(
            "free-fall time to 90° within {:.3}% of RK4 (tol 1%), {negative} of {ticks} logged ticks with negative friction work",
            100.0 * deviation
        ),
    );

    let again = run_scripted_protocol(
        &Condition::ALL,
        seed,
        OperatorParams::default(),
        ProtocolParams::default(),
        PhysicsParams::default(),
        FixtureParams::default(),
    );
    let full: Vec<_> = results.iter().filter(|t| t.condition == Condition::VF_GF_TF).collect();
    let ratio = 100.0 * full.iter().filter(|t| t.success).count() as f64 / full.len() as f64;
    let per_condition: Vec<String> = Condition::ALL
        .iter()
        .map(|c| {
            let rs: Vec<_> = results.iter().filter(|t| t.condition == *c).collect();
            format!(
                "{c} {:.1}%",
                100.0 * rs.iter().filter(|t| t.success).count() as f64 / rs.len() as f64
            )
        })
        .collect();
    r.check(
        "headless end-to-end",
        results.len() == 180 && elapsed < 60.0 && again == results && ratio >= 80.0,
        format!(
            "{} trials in {elapsed:.2} s (limit 60 s), deterministic: {}, success {} (VF+GF+TF needs ≥ 80%)",
            results.len(),
            again == results,
            per_condition.join(", ")
        ),
    );
    results
}

fn protocol_shape(r: &mut Report, results: &[TrialResult]) {
    let mut bad_schedules = 0;
    for condition in Condition::ALL {
        for seed in 0..50 {
            let schedule = build_trial_schedule(condition, seed);
            let mut counts = std::collections::BTreeMap::new();
            for t in &schedule {
                *counts
                    .entry((t.mass.to_bits(), t.target_angle_deg.to_bits()))
                    .or_insert(0) += 1;
            }
            let ok = schedule.len() == 45
                && TRIALS_PER_CONDITION == 45
                && counts.len() == 9
                && counts.values().all(|&n| n == 5);
            bad_schedules += (!ok) as usize;
        }
    }
    let mut csv = Vec::new();
    write_results_csv(&mut csv, results).unwrap();
    let rows = read_results_csv(csv.as_slice()).unwrap();
    let mismatches = rows
        .iter()
        .filter(|t| ((t.final_deg - t.target_deg).abs() < 10.0 && !t.timeout) != t.success)
        .count();
    r.check(
        "protocol shape",
        bad_schedules == 0 && mismatches == 0 && rows.len() == results.len(),
        format!(
            "200 schedules checked, {bad_schedules} not 9 cases × 5; {mismatches} success-flag mismatches over {} logged trials",
            rows.len()
        ),
    );
}

fn replay_determinism(r: &mut Report) {
    let mut session = Session::new(SimConfig::default(), 2024, Condition::VF_GF_TF);
    let config = *session.config();
    let mut clock = 0.0;
    let trials = 5;
    for n in 0..trials {
        if n == 2 {
            let cmd = Command::SetCondition {
                condition: Condition::VF_TF,
            };
            session.handle_command(CommandMessage::new(cmd, clock)).unwrap();
            session.tick();
        }
        let start = Command::StartTrial(StartTrial::default());
        session.handle_command(CommandMessage::new(start, clock)).unwrap();
        session.tick();
        let cfg = *session.runner().config();
        let mut op = ScriptedOperator::new(OperatorParams::default(), &cfg, &config.protocol, &config.physics);
        while session.status() == TrialStatus::Running {
            let aperture_m = op.command(&session.runner().observe());
            clock += 0.01;
            session
                .handle_command(CommandMessage::new(Command::Aperture { aperture_m }, clock))
                .unwrap();
            session.tick();
        }
        for _ in 0..13 {
            session.tick();
        }
    }
    let mut text = Vec::new();
    session.command_log().write_jsonl(&mut text).unwrap();
    let log = CommandLog::read_jsonl(text.as_slice()).unwrap();
    let replayed = replay(&log, SimConfig::default());
    let (live, again) = (session.results_csv(), replayed.results_csv());
    r.check(
        "replay determinism",
        live == again && session.results().len() == trials,
        format!(
            "{} commands over {} trials, results CSV {} bytes, byte-identical: {}",
            log.entries.len(),
            session.results().len(),
            live.len(),
            live == again
        ),
    );
}

fn main() -> ExitCode {
    let mut r = Report { failures: 0 };
    kinematics_closure(&mut r);
    round_trip(&mut r);
    worked_example(&mut r);
    workspace(&mut r);
    arbitration(&mut r);
    patterns(&mut r);
    pivot_statics(&mut r);
    let results = headless(&mut r, 1);
    protocol_shape(&mut r, &results);
    replay_determinism(&mut r);
    if r.failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", r.failures);
        ExitCode::FAILURE
    }
}

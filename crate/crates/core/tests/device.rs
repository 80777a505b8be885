mod common;

use std::f64::consts::{PI, TAU};

use common::{clearance, links};
use cutaneous_core::device::arbitration::{arbitrate_collision, ArbitrationParams};
use cutaneous_core::device::motor::{MotorParams, MotorPlant};
use cutaneous_core::device::pid::{PidController, PidGains};
use cutaneous_core::device::{Device, CONTROL_PERIOD_S};
use cutaneous_core::patterns::{generate_pattern, PatternKind, PatternSpec, TactorPair};
use cutaneous_core::station::{Finger, Station};
use cutaneous_core::Point2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn clearance_at(s: &Station, upper: Point2, lower: Point2) -> Option<f64> {
    let qu = s.upper.inverse_kinematics(upper).ok()?;
    let ql = s.lower.inverse_kinematics(lower).ok()?;
    Some(clearance(&links(&s.upper, qu, upper), &links(&s.lower, ql, lower)))
}

fn random_in_target(s: &Station, rng: &mut impl Rng) -> Point2 {
    loop {
        let p = s.target.center
            + Point2::new(
                rng.random_range(-s.target.semi_x..s.target.semi_x),
                rng.random_range(-s.target.semi_y..s.target.semi_y),
            );
        if s.target.contains(p) {
            return p;
        }
    }
}

#[test]
fn pid_step_settles_within_half_a_degree_in_fifty_ms() {
    let motor = MotorParams::default();
    let dt = 0.001;
    for step_deg in [2.0f64, 5.0, 10.0, 20.0, -15.0] {
        let mut plant = MotorPlant::at_rest(0.0, motor);
        let mut pid = PidController::new(PidGains::default(), dt);
        let target = step_deg.to_radians();
        let mut reading = plant.reading();
        let mut last_outside = 0.0;
        for k in 1..=500 {
            let v = pid.step(target, reading);
            reading = plant.step(v, dt);
            if (plant.angle - target).abs() > 0.5f64.to_radians() {
                last_outside = k as f64 * dt;
            }
        }
        assert!(
            last_outside <= 0.05,
            "{step_deg}° step still outside the band at {last_outside} s"
        );
    }
}

#[test]
fn three_mm_step_converges_within_a_tenth_of_a_mm_in_two_hundred_ms() {
    for finger in Finger::ALL {
        let mut device = Device::with_defaults();
        let slot = finger as usize;
        let mut targets = device.tactors();
        let target = targets[slot].upper + Point2::new(3.0, 0.0);
        targets[slot].upper = target;
        let mut converged_at = None;
        for _ in 0..100 {
            let state = device.tick(&targets);
            let err = state.stations[slot].upper.distance(target);
            match (err <= 0.1, converged_at) {
                (true, None) => converged_at = Some(state.t),
                (false, _) => converged_at = None,
                _ => {}
            }
        }
        let t = converged_at.unwrap_or(f64::INFINITY);
        assert!(t <= 0.2 + 1e-12, "{finger}: converged at {t} s");
    }
}

#[test]
fn ten_seconds_of_twisting_tracks_within_point_three_mm_rms() {
    let mut device = Device::with_defaults();
    let specs = Finger::ALL.map(|f| PatternSpec::default_for(PatternKind::Twisting, device.station(f)));
    let n = (10.0 / CONTROL_PERIOD_S) as usize;
    let mut sum_sq = 0.0;
    let mut count = 0;
    for k in 1..=n {
        let t = k as f64 * CONTROL_PERIOD_S;
        let targets: [TactorPair; 2] = std::array::from_fn(|i| {
            let local = t % specs[i].duration;
            generate_pattern(&specs[i], local).unwrap()
        });
        let state = device.tick(&targets);
        for (s, want) in state.stations.iter().zip(&targets) {
            sum_sq += s.upper.distance(want.upper).powi(2) + s.lower.distance(want.lower).powi(2);
            count += 2;
        }
    }
    let rms = (sum_sq / count as f64).sqrt();
    assert!(rms <= 0.3, "twist tracking RMS {rms} mm");
}

#[test]
fn arbitration_restores_clearance_on_a_thousand_conflicting_pairs() {
    let params = ArbitrationParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA4B);
    for finger in Finger::ALL {
        let s = Station::default_for(finger);
        let mut tried = 0;
        while tried < 1_000 {
            let upper = random_in_target(&s, &mut rng);
            let lower = random_in_target(&s, &mut rng);
            match clearance_at(&s, upper, lower) {
                Some(c) if c < params.clearance_min => {}
                _ => continue,
            }
            tried += 1;
            let out = arbitrate_collision(upper, lower, &s.upper, &s.lower, &params)
                .unwrap_or_else(|e| panic!("{finger}: {upper:?} / {lower:?}: {e}"));
            assert_eq!(out.upper, upper);
            assert!(out.active);
            let c = clearance(
                &links(&s.upper, out.upper_angles, out.upper),
                &links(&s.lower, out.lower_angles, out.lower),
            );
            assert!(
                c >= params.clearance_min - 1e-9,
                "{finger}: clearance {c} after arbitration"
            );
        }
    }
}

#[test]
fn coincident_targets_move_the_lower_one_a_minimal_distance() {
    let params = ArbitrationParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for finger in Finger::ALL {
        let s = Station::default_for(finger);
        for _ in 0..10 {
            let p = random_in_target(&s, &mut rng);
            let out = arbitrate_collision(p, p, &s.upper, &s.lower, &params).unwrap();
            let moved = out.lower.distance(p);

            // Dense radial search for the smallest displacement that works.
            let mut best = f64::INFINITY;
            'rings: for ring in 1..=3000 {
                let r = ring as f64 * 0.01;
                for k in 0..720 {
                    let candidate = p + Point2::from_angle(TAU * k as f64 / 720.0) * r;
                    if clearance_at(&s, p, candidate).is_some_and(|c| c >= params.clearance_min) {
                        best = r;
                        break 'rings;
                    }
                }
            }
            assert!(moved <= best + 0.1, "{finger} at {p:?}: moved {moved}, oracle {best}");
        }
    }
}

#[test]
fn upper_target_is_tracked_while_lower_is_arbitrated() {
    let mut device = Device::with_defaults();
    let s = *device.station(Finger::Index);
    let c = s.center();
    let targets = [
        TactorPair {
            upper: c,
            lower: c,
            t: 0.0,
        },
        device.tactors()[1],
    ];
    let mut state = device.state();
    for _ in 0..50 {
        state = device.tick(&targets);
    }
    let index = state.station(Finger::Index);
    assert!(index.arbitration_active);
    assert!(index.upper.distance(c) < 0.05);
    assert!(index.clearance >= 1.5 - 0.05, "clearance {}", index.clearance);
}

proptest! {
    #[test]
    fn motor_reading_error_is_within_one_count(v in -6.0..6.0f64, steps in 1usize..400) {
        let params = MotorParams::default();
        let mut plant = MotorPlant::at_rest(0.3, params);
        for _ in 0..steps {
            let reading = plant.step(v, 0.001);
            let lsb = params.sensor_range / 2f64.powi(params.sensor_bits as i32);
            let lo = plant.sensor_min;
            let hi = lo + params.sensor_range;
            if (lo..=hi).contains(&plant.angle) {
                prop_assert!((reading - plant.angle).abs() <= lsb / 2.0 + 1e-12);
            } else {
                prop_assert!(reading == lo || (reading - hi).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pid_integral_stays_bounded(errors in proptest::collection::vec(-PI..PI, 1..300)) {
        let gains = PidGains::default();
        let mut pid = PidController::new(gains, 0.001);
        for e in errors {
            let v = pid.step(e, 0.0);
            prop_assert!(pid.integral().abs() <= gains.integral_limit + 1e-12);
            prop_assert!(v.abs() <= gains.output_limit + 1e-12);
        }
    }
}

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use cutaneous_core::patterns::{
    classify_pattern, generate_pattern, object_sync_targets, ClassifyError, PatternError, PatternKind, PatternSpec,
    SyncMapping, TactorPair,
};
use cutaneous_core::station::{Finger, Station};
use cutaneous_core::Point2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn station(finger: Finger) -> Station {
    Station::default_for(finger)
}

/// Random spec whose trajectory fits inside the station's target region.
fn random_spec(kind: PatternKind, s: &Station, rng: &mut impl Rng) -> PatternSpec {
    loop {
        let mut spec = PatternSpec::default_for(kind, s);
        spec.center = s.target.center
            + Point2::new(
                rng.random_range(-0.5 * s.target.semi_x..0.5 * s.target.semi_x),
                rng.random_range(-0.5 * s.target.semi_y..0.5 * s.target.semi_y),
            );
        spec.amplitude = rng.random_range(0.5..6.0);
        spec.duration = rng.random_range(0.2..5.0);
        let sweep = rng.random_range(PI / 6.0..PI);
        spec.twist_sweep = if rng.random_bool(0.5) { sweep } else { -sweep };
        match spec.sample(100.0) {
            Ok(_) => return spec,
            Err(PatternError::WorkspaceExceeded { .. }) => continue,
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn classifier_recovers_three_hundred_clean_random_specs() {
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    let mut correct = 0;
    for n in 0..300 {
        let kind = PatternKind::ALL[n % 3];
        let finger = Finger::ALL[(n / 3) % 2];
        let spec = random_spec(kind, &station(finger), &mut rng);
        let traj = spec.sample(100.0).unwrap();
        match classify_pattern(&traj) {
            Ok(k) if k == kind => correct += 1,
            other => panic!("{spec:?} classified as {other:?}"),
        }
    }
    assert_eq!(correct, 300);
}

fn noisy(traj: &[TactorPair], std: f64, rng: &mut impl Rng) -> Vec<TactorPair> {
    let noise = Normal::new(0.0, std).unwrap();
    let mut jitter = |p: Point2| p + Point2::new(noise.sample(rng), noise.sample(rng));
    traj.iter()
        .map(|p| TactorPair {
            upper: jitter(p.upper),
            lower: jitter(p.lower),
            t: p.t,
        })
        .collect()
}

#[test]
fn noisy_slipping_is_recognised_in_at_least_95_percent_of_runs() {
    let spec = PatternSpec::default_for(PatternKind::Slipping, &station(Finger::Index));
    let clean = spec.sample(100.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let hits = (0..1000)
        .filter(|_| classify_pattern(&noisy(&clean, 0.2, &mut rng)) == Ok(PatternKind::Slipping))
        .count();
    assert!(hits >= 950, "{hits}/1000");
}

#[test]
fn noisy_default_patterns_are_recognised_for_every_kind() {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    for finger in Finger::ALL {
        for kind in PatternKind::ALL {
            let clean = PatternSpec::default_for(kind, &station(finger)).sample(100.0).unwrap();
            let hits = (0..1000)
                .filter(|_| classify_pattern(&noisy(&clean, 0.2, &mut rng)) == Ok(kind))
                .count();
            assert!(hits >= 950, "{finger} {kind}: {hits}/1000");
        }
    }
}

#[test]
fn stationary_trajectory_is_ambiguous() {
    let c = station(Finger::Index).center();
    let traj: Vec<_> = (0..50)
        .map(|k| TactorPair {
            upper: c,
            lower: c,
            t: k as f64 * 0.01,
        })
        .collect();
    assert!(matches!(classify_pattern(&traj), Err(ClassifyError::Ambiguous(_))));
    assert!(matches!(
        classify_pattern(&traj[..5]),
        Err(ClassifyError::InsufficientData { samples: 5 })
    ));
}

#[test]
fn out_of_range_times_are_rejected() {
    let spec = PatternSpec::default_for(PatternKind::Twisting, &station(Finger::Thumb));
    for t in [-0.01, spec.duration + 0.01] {
        assert!(matches!(
            generate_pattern(&spec, t),
            Err(PatternError::OutOfRange { .. })
        ));
    }
}

#[test]
fn oversized_pattern_leaves_the_target_region() {
    let mut spec = PatternSpec::default_for(PatternKind::Stretching, &station(Finger::Index));
    spec.amplitude = 9.0;
    assert!(matches!(
        spec.sample(100.0),
        Err(PatternError::WorkspaceExceeded { .. })
    ));
}

#[test]
fn sync_targets_worked_examples() {
    let s = station(Finger::Index);
    let c = s.center();
    let map = SyncMapping::default();
    let zero = object_sync_targets(0.0, &map, c, &s.target);
    assert!(!zero.clamped);
    assert!(zero.pair.upper.distance(c + Point2::new(0.0, 3.0)) < 1e-12);
    assert!(zero.pair.lower.distance(c - Point2::new(0.0, 3.0)) < 1e-12);
    let quarter = object_sync_targets(FRAC_PI_2, &map, c, &s.target);
    assert!(quarter.pair.upper.distance(c + Point2::new(-3.0, 0.0)) < 1e-12);
    assert!(quarter.pair.lower.distance(c + Point2::new(3.0, 0.0)) < 1e-12);
}

#[test]
fn sync_targets_clamp_instead_of_failing() {
    let s = station(Finger::Index);
    let map = SyncMapping {
        radius: 10.0,
        ..SyncMapping::default()
    };
    let out = object_sync_targets(0.0, &map, s.center(), &s.target);
    assert!(out.clamped);
    assert!(s.target.level(out.pair.upper) <= 1.0 + 1e-12);
    assert!(s.target.level(out.pair.lower) <= 1.0 + 1e-12);
}

fn kind_strategy() -> impl Strategy<Value = PatternKind> {
    prop_oneof![
        Just(PatternKind::Stretching),
        Just(PatternKind::Slipping),
        Just(PatternKind::Twisting)
    ]
}

fn finger_strategy() -> impl Strategy<Value = Finger> {
    prop_oneof![Just(Finger::Index), Just(Finger::Thumb)]
}

proptest! {
    #[test]
    fn generated_samples_are_reachable(kind in kind_strategy(), finger in finger_strategy(), seed in any::<u64>()) {
        let s = station(finger);
        let spec = random_spec(kind, &s, &mut ChaCha8Rng::seed_from_u64(seed));
        for pair in spec.sample(50.0).unwrap() {
            prop_assert!(s.upper.is_reachable(pair.upper));
            prop_assert!(s.lower.is_reachable(pair.lower));
        }
    }

    #[test]
    fn each_pattern_preserves_its_invariant(kind in kind_strategy(), finger in finger_strategy(), seed in any::<u64>()) {
        let s = station(finger);
        let spec = random_spec(kind, &s, &mut ChaCha8Rng::seed_from_u64(seed));
        let traj = spec.sample(50.0).unwrap();
        let first = traj[0];
        for pair in &traj {
            match kind {
                PatternKind::Twisting => prop_assert!(
                    (pair.upper.distance(pair.lower) - 2.0 * spec.amplitude).abs() < 1e-9
                ),
                PatternKind::Stretching => {
                    let mid = pair.upper.lerp(pair.lower, 0.5);
                    prop_assert!(mid.distance(spec.center) < 1e-9);
                }
                PatternKind::Slipping => {
                    let v = pair.upper - pair.lower;
                    let v0 = first.upper - first.lower;
                    prop_assert!((v - v0).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn classifier_inverts_generator(kind in kind_strategy(), finger in finger_strategy(), seed in any::<u64>()) {
        let spec = random_spec(kind, &station(finger), &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(classify_pattern(&spec.sample(100.0).unwrap()), Ok(kind));
    }

    #[test]
    fn sync_targets_are_periodic_and_antipodal(theta in -10.0..10.0f64, gain in prop_oneof![Just(1.0), Just(2.0), Just(-0.5)]) {
        let s = station(Finger::Index);
        let map = SyncMapping { gain, ..SyncMapping::default() };
        let a = object_sync_targets(theta, &map, s.center(), &s.target);
        let b = object_sync_targets(theta + TAU / gain, &map, s.center(), &s.target);
        prop_assert!(a.pair.upper.distance(b.pair.upper) < 1e-9);
        prop_assert!(a.pair.lower.distance(b.pair.lower) < 1e-9);
        prop_assert!((a.pair.upper.distance(a.pair.lower) - 2.0 * map.radius).abs() < 1e-9);
    }
}

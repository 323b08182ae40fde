use ifs_lab::stochastic::*;
use ifs_lab::*;

fn two_rotations() -> IfsSystem {
    IfsSystem::uniform(
        Space::Circle,
        vec![MapDescriptor::rotation(GOLDEN_ANGLE).unwrap(), MapDescriptor::rotation(1.0).unwrap()],
    )
    .unwrap()
}

#[test]
fn density_is_monotone() {
    let sys = two_rotations();
    let x = SpacePoint::circle(0.0);
    let freq = |eps, h| verify_chaos_game_density(&sys, &x, eps, h, 40, 17).unwrap().frequency;
    let epsilons = [0.2, 0.1, 0.05, 0.02];
    let horizons = [50, 200, 800, 3200];
    for &eps in &epsilons {
        for w in horizons.windows(2) {
            assert!(freq(eps, w[0]) <= freq(eps, w[1]), "ε={eps} H={:?}", w);
        }
    }
    for &h in &horizons {
        for w in epsilons.windows(2) {
            assert!(freq(w[0], h) >= freq(w[1], h), "H={h} ε={:?}", w);
        }
    }
}

#[test]
fn reports_are_reproducible() {
    let sys = build_theorem_c_scenario(&Space::Circle, 0.5, GOLDEN_ANGLE).unwrap();
    let x = SpacePoint::circle(0.7);
    let y = SpacePoint::circle(3.0);
    let a = verify_proximality(&sys, &x, &y, 1e-3, 5000, 30, 99).unwrap();
    let b = verify_proximality(&sys, &x, &y, 1e-3, 5000, 30, 99).unwrap();
    assert_eq!(a, b);
    // Pairs collapse onto each other exactly in floating point, so compare
    // seeds on a statistic that keeps varying.
    let d = |seed| verify_chaos_game_density(&two_rotations(), &x, 0.05, 30, 30, seed).unwrap().per_trial;
    assert_eq!(d(1), d(1));
    assert_ne!(d(1), d(2));
}

#[test]
fn tail_bound_with_fixed_window() {
    let sys = build_theorem_c_scenario(&Space::Circle, 0.5, GOLDEN_ANGLE).unwrap();
    let p = theorem_c_attractor(&Space::Circle).unwrap();
    let ball = Ball::new(p, 0.1).unwrap();
    let horizons: Vec<usize> = (1..=10).map(|i| 40 * i).collect();
    let r = tail_bound_report(
        &sys,
        &SpacePoint::circle(2.0),
        &TargetSet::Ball(ball),
        &RelationSpec::exact(),
        &RelationSpec::InBall { ball },
        40,
        &horizons,
        2000,
        3,
    )
    .unwrap();
    assert_eq!(r.p_lower, 0.5f64.powi(40));
    assert!(r.all_within());
    assert_eq!(r.hypothesis_violations, 0);
    for w in r.rows.windows(2) {
        assert!(w[0].bound > w[1].bound);
        assert!(w[0].miss_rate >= w[1].miss_rate);
    }
}

#[test]
fn window_helper_matches_exhaustive_search() {
    // From t on the interval under {t/2, t/2 + 1/2}, reaching [0, 0.1) with
    // the final image also inside needs the all-halving word.
    let sys = IfsSystem::uniform(
        Space::Interval,
        vec![MapDescriptor::affine(0.5, 0.0).unwrap(), MapDescriptor::affine(0.5, 0.5).unwrap()],
    )
    .unwrap();
    let ball = Ball::new(SpacePoint::Interval(0.0), 0.1).unwrap();
    let target = TargetSet::Ball(ball);
    let tilde = RelationSpec::InBall { ball };
    // 1 → 1/2 → … → 1/16 = 0.0625 after 4 halvings, then one more letter.
    let need = shortest_connection(&sys, &SpacePoint::Interval(1.0), &target, &tilde, 10).unwrap();
    assert_eq!(need, Some(5));
    let need = shortest_connection(&sys, &SpacePoint::Interval(0.05), &target, &tilde, 10).unwrap();
    assert_eq!(need, Some(1));
    let samples = [SpacePoint::Interval(0.05), SpacePoint::Interval(1.0), SpacePoint::Interval(0.3)];
    assert_eq!(smallest_window(&sys, &samples, &target, &tilde, 10).unwrap(), Some(5));
    assert_eq!(smallest_window(&sys, &samples, &target, &tilde, 4).unwrap(), None);
}

#[test]
fn circle_scenario_is_backward_minimal() {
    let sys = build_theorem_c_scenario(&Space::Circle, 0.5, GOLDEN_ANGLE).unwrap();
    let probe = backward_minimality_probe(&sys, 20, 0.05, 10_000, 8).unwrap();
    assert!(probe.passed(), "{:?}", probe.coverage);
}

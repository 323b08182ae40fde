use std::f64::consts::{PI, TAU};

use ifs_lab::chains::{verify_chain, ChainCertificate, Orientation};
use ifs_lab::spaces::NET_CAP;
use ifs_lab::symbolic::{sample_word, universal_word};
use ifs_lab::*;
use proptest::prelude::*;

fn circle_map() -> impl Strategy<Value = MapDescriptor> {
    prop_oneof![
        (-PI..PI).prop_map(|a| MapDescriptor::rotation(a).unwrap()),
        (0.0..TAU, 0.05..0.95f64)
            .prop_map(|(p, l)| make_north_south(&Space::Circle, SpacePoint::circle(p), l).unwrap()),
    ]
}

fn unit_vector() -> impl Strategy<Value = [f64; 3]> {
    (-1.0..1.0f64, 0.0..TAU).prop_map(|(z, phi)| {
        let r = (1.0 - z * z).sqrt();
        [r * phi.cos(), r * phi.sin(), z]
    })
}

fn sphere_map() -> impl Strategy<Value = MapDescriptor> {
    prop_oneof![
        (unit_vector(), -PI..PI).prop_map(|(a, t)| MapDescriptor::sphere_rotation(a, t).unwrap()),
        (unit_vector(), 0.05..0.95f64).prop_map(|(p, l)| {
            make_north_south(&Space::Sphere2, SpacePoint::sphere(p).unwrap(), l).unwrap()
        }),
    ]
}

fn system(space: Space, maps: impl Strategy<Value = MapDescriptor>) -> impl Strategy<Value = IfsSystem> {
    prop::collection::vec(maps, 1..4).prop_map(move |m| IfsSystem::uniform(space, m).unwrap())
}

fn grid_system() -> impl Strategy<Value = (usize, IfsSystem)> {
    (2usize..40).prop_flat_map(|n| {
        let perm = Just((0..n).collect::<Vec<_>>()).prop_shuffle();
        prop::collection::vec(perm, 1..4).prop_map(move |ps| {
            let g = Space::FiniteGrid(n);
            let maps = ps.into_iter().map(|p| MapDescriptor::permutation(p).unwrap()).collect();
            (n, IfsSystem::uniform(g, maps).unwrap())
        })
    })
}

fn circle_point() -> impl Strategy<Value = SpacePoint> {
    (0.0..TAU).prop_map(SpacePoint::circle)
}

fn sphere_point() -> impl Strategy<Value = SpacePoint> {
    unit_vector().prop_map(|v| SpacePoint::sphere(v).unwrap())
}

fn random_word(k: usize, len: usize, seed: u64) -> FiniteWord {
    sample_word(&ProbabilityVector::uniform(k).unwrap(), len, seed)
}

fn close(space: &Space, a: &SpacePoint, b: &SpacePoint, tol: f64) -> bool {
    space.distance(a, b).unwrap() <= tol
}

fn check_cocycle(sys: &IfsSystem, x: &SpacePoint, m: usize, n: usize, seed: u64, tol: f64) -> bool {
    let w = random_word(sys.k(), m + n, seed);
    let whole = sys.endpoint(w.iter(), x, m + n).unwrap();
    let mid = sys.endpoint(w.iter(), x, m).unwrap();
    let rest = sys.endpoint(w.shift(m).unwrap().iter(), &mid, n).unwrap();
    close(sys.space(), &whole, &rest, tol)
}

proptest! {
    #[test]
    fn shift_composes(len in 0usize..40, a in 0usize..20, b in 0usize..20, seed: u64) {
        let w = random_word(3, len, seed);
        if a + b <= len {
            prop_assert_eq!(w.shift(a).unwrap().shift(b).unwrap(), w.shift(a + b).unwrap());
        } else {
            prop_assert!(w.shift(a).and_then(|v| v.shift(b)).is_err());
        }
    }

    #[test]
    fn word_text_round_trip(len in 0usize..30, k in 1usize..14, seed: u64) {
        let w = random_word(k, len, seed);
        prop_assert_eq!(FiniteWord::parse(&w.format(k), k).unwrap(), w);
    }

    #[test]
    fn cocycle_on_circle(sys in system(Space::Circle, circle_map()), x in circle_point(), m in 0usize..30, n in 0usize..30, seed: u64) {
        prop_assert!(check_cocycle(&sys, &x, m, n, seed, 1e-9));
    }

    #[test]
    fn cocycle_on_sphere(sys in system(Space::Sphere2, sphere_map()), x in sphere_point(), m in 0usize..20, n in 0usize..20, seed: u64) {
        prop_assert!(check_cocycle(&sys, &x, m, n, seed, 1e-9));
    }

    #[test]
    fn cocycle_on_grid((size, sys) in grid_system(), start in 0usize..40, m in 0usize..30, n in 0usize..30, seed: u64) {
        let x = SpacePoint::Grid(start % size);
        prop_assert!(check_cocycle(&sys, &x, m, n, seed, 0.0));
    }

    #[test]
    fn inverses_round_trip_on_circle(sys in system(Space::Circle, circle_map()), x in circle_point(), letter in 0u32..3) {
        let s = Symbol::new(letter % sys.k() as u32 + 1, sys.k()).unwrap();
        let y = sys.apply(s, &x).unwrap();
        prop_assert!(close(&Space::Circle, &sys.apply_inverse(s, &y).unwrap(), &x, 1e-9));
        let z = sys.apply_inverse(s, &x).unwrap();
        prop_assert!(close(&Space::Circle, &sys.apply(s, &z).unwrap(), &x, 1e-9));
    }

    #[test]
    fn rotation_words_unwind(alphas in prop::collection::vec(-PI..PI, 1..4), x in circle_point(), seed: u64) {
        let maps = alphas.into_iter().map(|a| MapDescriptor::rotation(a).unwrap()).collect();
        let sys = IfsSystem::uniform(Space::Circle, maps).unwrap();
        let w = random_word(sys.k(), 40, seed);
        let seg = sys.iterate_forward(w.iter(), &x, 40).unwrap();
        let home = sys.iterate_backward(&w.reversed(), seg.end(), 40).unwrap();
        prop_assert!(close(&Space::Circle, home.end(), &x, 1e-9));
    }

    #[test]
    fn inverses_round_trip_on_sphere(sys in system(Space::Sphere2, sphere_map()), x in sphere_point(), letter in 0u32..3) {
        let s = Symbol::new(letter % sys.k() as u32 + 1, sys.k()).unwrap();
        let y = sys.apply(s, &x).unwrap();
        prop_assert!(close(&Space::Sphere2, &sys.apply_inverse(s, &y).unwrap(), &x, 1e-9));
        let z = sys.apply_inverse(s, &x).unwrap();
        prop_assert!(close(&Space::Sphere2, &sys.apply(s, &z).unwrap(), &x, 1e-9));
    }

    #[test]
    fn inverses_exact_on_grid((size, sys) in grid_system(), start in 0usize..40) {
        let x = SpacePoint::Grid(start % size);
        for s in sys.letters() {
            prop_assert_eq!(sys.apply_inverse(s, &sys.apply(s, &x).unwrap()).unwrap(), x);
        }
    }

    #[test]
    fn rotations_are_isometries(alpha in -PI..PI, x in circle_point(), y in circle_point()) {
        let f = MapDescriptor::rotation(alpha).unwrap();
        let before = Space::Circle.distance(&x, &y).unwrap();
        let after = Space::Circle.distance(&f.apply(&x).unwrap(), &f.apply(&y).unwrap()).unwrap();
        prop_assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn sphere_rotations_are_isometries(axis in unit_vector(), t in -PI..PI, x in sphere_point(), y in sphere_point()) {
        let f = MapDescriptor::sphere_rotation(axis, t).unwrap();
        let before = Space::Sphere2.distance(&x, &y).unwrap();
        let after = Space::Sphere2.distance(&f.apply(&x).unwrap(), &f.apply(&y).unwrap()).unwrap();
        prop_assert!((before - after).abs() < 1e-9);
    }

    #[test]
    fn triangle_inequality_circle(x in circle_point(), y in circle_point(), z in circle_point()) {
        let d = |a: &SpacePoint, b: &SpacePoint| Space::Circle.distance(a, b).unwrap();
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-12);
        prop_assert!(d(&x, &y) <= PI + 1e-12);
    }

    #[test]
    fn triangle_inequality_sphere(x in sphere_point(), y in sphere_point(), z in sphere_point()) {
        let d = |a: &SpacePoint, b: &SpacePoint| Space::Sphere2.distance(a, b).unwrap();
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-12);
    }

    #[test]
    fn nets_cover(eps in 0.01..0.5f64, x in circle_point(), v in sphere_point(), t in 0.0..=1.0f64) {
        for (space, p) in [(Space::Circle, x), (Space::Sphere2, v), (Space::Interval, SpacePoint::Interval(t))] {
            let net = space.epsilon_net(eps).unwrap();
            let j = net.nearest(&p);
            prop_assert!(space.distance(&p, &net.point(j)).unwrap() <= eps + 1e-12);
        }
    }

    #[test]
    fn basis_refines(level_index in 1u64..5000, x in circle_point()) {
        // Every point lies in a level-m ball for every m: the level-m centres form a 2^-(m+1) net.
        let ball = Space::Circle.basis_ball(level_index).unwrap();
        let m = ball.level;
        let mut found = false;
        let mut i = 1;
        while let Ok(b) = Space::Circle.basis_ball(i) {
            if b.level > m { break; }
            if b.level == m && b.ball.contains(&Space::Circle, &x).unwrap() { found = true; break; }
            i += 1;
        }
        prop_assert!(found);
    }

    #[test]
    fn exact_orbit_is_a_chain(sys in system(Space::Circle, circle_map()), x in circle_point(), seed: u64, delta in 1e-6..1.0f64) {
        let w = random_word(sys.k(), 8, seed);
        let seg = sys.iterate_forward(w.iter(), &x, 8).unwrap();
        let cert = ChainCertificate {
            direction: w,
            points: seg.points.iter().copied().map(ChainPoint::Single).collect(),
            relation: RelationSpec::DeltaImage { delta },
            tilde_relation: RelationSpec::exact(),
            target: TargetSet::WholeSpace,
            orientation: Orientation::Forward,
        };
        prop_assert!(verify_chain(&sys, &cert).unwrap());
    }

    #[test]
    fn reachability_monotone_in_delta(sys in system(Space::Circle, circle_map()), x in circle_point(), y in circle_point(), d1 in 0.11..0.4f64, extra in 0.0..0.4f64) {
        let small = chains::delta_chain_reachable(&sys, &x, &y, d1, 0.1, 6).unwrap();
        let large = chains::delta_chain_reachable(&sys, &x, &y, d1 + extra, 0.1, 6).unwrap();
        prop_assert!(!small.reachable || large.reachable);
    }
}

#[test]
fn universal_words_contain_every_cylinder() {
    let w = universal_word(3, 4).unwrap();
    for len in 1..=4u32 {
        for code in 0..3usize.pow(len) {
            let values: Vec<u32> = (0..len).map(|j| (code / 3usize.pow(j) % 3) as u32 + 1).collect();
            let c = Cylinder::new(FiniteWord::from_values(&values, 3).unwrap(), 0).unwrap();
            let n = symbolic::find_cylinder_occurrence(&w, &c, w.len()).unwrap();
            assert_eq!(&w.letters()[n..n + values.len()], c.prefix().letters());
        }
    }
}

#[test]
fn net_cap_is_enforced() {
    assert!(matches!(Space::Sphere2.epsilon_net(1e-4), Err(Error::TooFine { cap: NET_CAP, .. })));
}

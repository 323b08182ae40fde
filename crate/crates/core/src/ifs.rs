//! Map families, fiber-wise orbits and their backward counterparts.
//!
//! Letters index maps 1-based: `ω_j = i` applies `maps[i - 1]`. Forward words
//! are read `ω_1, ω_2, …`; backward windows are read `ω_{-1}, ω_{-2}, …` and
//! apply inverses in that order, so `f^{-n}_ω = f^{-1}_{ω_{-n}} ∘ … ∘ f^{-1}_{ω_{-1}}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spaces::{self, Space, SpaceKind, SpacePoint};
use crate::symbolic::{FiniteWord, ProbabilityVector, Symbol};

/// Slack allowed when an affine inverse is evaluated at a point that rounding
/// has pushed just outside the image interval.
const AFFINE_IMAGE_SLACK: f64 = 1e-12;

/// A homeomorphism (onto its image, for affine interval maps) with a
/// closed-form inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MapDescriptor {
    /// `θ ↦ θ + α (mod 2π)`.
    CircleRotation { alpha: f64 },
    /// `t ↦ a·t + b` with `a > 0`, `b ≥ 0`, `a + b ≤ 1`.
    IntervalAffine { a: f64, b: f64 },
    /// North-south map with attracting fixed point `attractor`, repelling fixed
    /// point at its antipode, and derivative `lambda` at the attractor.
    ///
    /// Along the great circle through the attractor, with `ψ` the angle from
    /// it, the map is `tan(ψ'/2) = λ·tan(ψ/2)`: on the circle this is
    /// `θ ↦ 2·atan(λ·tan(θ/2))` in the chart centred at the attractor, and on the
    /// sphere it is `v ↦ λ·v` in stereographic coordinates from the antipode.
    NorthSouth { attractor: SpacePoint, lambda: f64 },
    /// Rotation of `S²` by `alpha` about the unit `axis` (right-hand rule).
    SphereRotation { axis: [f64; 3], alpha: f64 },
    /// Node `i ↦ perm[i]`.
    GridPermutation { perm: Vec<usize> },
}

impl MapDescriptor {
    pub fn rotation(alpha: f64) -> Result<Self> {
        finite("alpha", alpha)?;
        Ok(MapDescriptor::CircleRotation { alpha })
    }

    pub fn affine(a: f64, b: f64) -> Result<Self> {
        finite("a", a)?;
        finite("b", b)?;
        if !(a > 0.0) || b < 0.0 || a + b > 1.0 + AFFINE_IMAGE_SLACK {
            return Err(Error::InvalidParameter(format!(
                "affine map {a}·t + {b} must satisfy a > 0, b ≥ 0, a + b ≤ 1"
            )));
        }
        Ok(MapDescriptor::IntervalAffine { a, b })
    }

    pub fn sphere_rotation(axis: [f64; 3], alpha: f64) -> Result<Self> {
        finite("alpha", alpha)?;
        let axis = match SpacePoint::sphere_direction(axis)? {
            SpacePoint::Sphere2(v) => v,
            _ => unreachable!(),
        };
        Ok(MapDescriptor::SphereRotation { axis, alpha })
    }

    pub fn permutation(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &j in &perm {
            if j >= perm.len() || std::mem::replace(&mut seen[j], true) {
                return Err(Error::InvalidParameter(format!("{perm:?} is not a permutation")));
            }
        }
        Ok(MapDescriptor::GridPermutation { perm })
    }

    /// A permutation of `n` nodes given by disjoint cycles.
    pub fn permutation_from_cycles(n: usize, cycles: &[Vec<usize>]) -> Result<Self> {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut used = vec![false; n];
        for cycle in cycles {
            for (pos, &node) in cycle.iter().enumerate() {
                if node >= n || std::mem::replace(&mut used[node], true) {
                    return Err(Error::InvalidParameter(format!(
                        "cycles {cycles:?} are not disjoint cycles on 0..{n}"
                    )));
                }
                perm[node] = cycle[(pos + 1) % cycle.len()];
            }
        }
        Self::permutation(perm)
    }

    pub fn identity(space: &Space) -> Self {
        match *space {
            Space::Circle => MapDescriptor::CircleRotation { alpha: 0.0 },
            Space::Sphere2 => MapDescriptor::SphereRotation { axis: [0.0, 0.0, 1.0], alpha: 0.0 },
            Space::Interval => MapDescriptor::IntervalAffine { a: 1.0, b: 0.0 },
            Space::FiniteGrid(n) => MapDescriptor::GridPermutation { perm: (0..n).collect() },
        }
    }

    pub fn space_kind(&self) -> SpaceKind {
        match self {
            MapDescriptor::CircleRotation { .. } => SpaceKind::Circle,
            MapDescriptor::IntervalAffine { .. } => SpaceKind::Interval,
            MapDescriptor::NorthSouth { attractor, .. } => attractor.kind(),
            MapDescriptor::SphereRotation { .. } => SpaceKind::Sphere2,
            MapDescriptor::GridPermutation { .. } => SpaceKind::FiniteGrid,
        }
    }

    /// Whether the map is a bijection of its whole space.
    pub fn is_surjective(&self) -> bool {
        match *self {
            MapDescriptor::IntervalAffine { a, b } => a == 1.0 && b == 0.0,
            _ => true,
        }
    }

    pub fn check_space(&self, space: &Space) -> Result<()> {
        if self.space_kind() != space.kind() {
            return Err(Error::SpaceMismatch { expected: space.kind(), found: self.space_kind() });
        }
        match (self, space) {
            (MapDescriptor::GridPermutation { perm }, Space::FiniteGrid(n)) if perm.len() != *n => {
                Err(Error::InvalidParameter(format!(
                    "permutation on {} nodes used on a {n}-node grid",
                    perm.len()
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn apply(&self, x: &SpacePoint) -> Result<SpacePoint> {
        self.apply_with(x, false)
    }

    pub fn apply_inverse(&self, x: &SpacePoint) -> Result<SpacePoint> {
        self.apply_with(x, true)
    }

    /// The inverse map as a descriptor. Non-surjective affine maps have none.
    pub fn inverse(&self) -> Result<MapDescriptor> {
        Ok(match self {
            MapDescriptor::CircleRotation { alpha } => MapDescriptor::CircleRotation { alpha: -alpha },
            MapDescriptor::IntervalAffine { .. } if self.is_surjective() => self.clone(),
            MapDescriptor::IntervalAffine { a, b } => {
                return Err(Error::NotInvertible(format!("affine map {a}·t + {b}")))
            }
            MapDescriptor::NorthSouth { attractor, lambda } => {
                MapDescriptor::NorthSouth { attractor: antipode(attractor), lambda: *lambda }
            }
            MapDescriptor::SphereRotation { axis, alpha } => {
                MapDescriptor::SphereRotation { axis: *axis, alpha: -alpha }
            }
            MapDescriptor::GridPermutation { perm } => {
                let mut inv = vec![0; perm.len()];
                for (i, &j) in perm.iter().enumerate() {
                    inv[j] = i;
                }
                MapDescriptor::GridPermutation { perm: inv }
            }
        })
    }

    fn apply_with(&self, x: &SpacePoint, inverse: bool) -> Result<SpacePoint> {
        if x.kind() != self.space_kind() {
            return Err(Error::SpaceMismatch { expected: self.space_kind(), found: x.kind() });
        }
        let sign = if inverse { -1.0 } else { 1.0 };
        Ok(match (self, *x) {
            (MapDescriptor::CircleRotation { alpha }, SpacePoint::Circle(t)) => {
                SpacePoint::circle(t + sign * alpha)
            }
            (MapDescriptor::IntervalAffine { a, b }, SpacePoint::Interval(t)) => {
                if inverse {
                    if t < b - AFFINE_IMAGE_SLACK || t > a + b + AFFINE_IMAGE_SLACK {
                        return Err(Error::NotInvertible(x.to_string()));
                    }
                    SpacePoint::Interval(((t - b) / a).clamp(0.0, 1.0))
                } else {
                    SpacePoint::Interval((a * t + b).clamp(0.0, 1.0))
                }
            }
            (MapDescriptor::NorthSouth { attractor, lambda }, _) => {
                // The inverse is the same contraction toward the antipode.
                let (pole, lambda) =
                    if inverse { (antipode(attractor), *lambda) } else { (*attractor, *lambda) };
                north_south_step(&pole, lambda, x)
            }
            (MapDescriptor::SphereRotation { axis, alpha }, SpacePoint::Sphere2(v)) => {
                SpacePoint::Sphere2(renormalize(rotate(v, *axis, sign * alpha)))
            }
            (MapDescriptor::GridPermutation { perm }, SpacePoint::Grid(i)) => {
                if i >= perm.len() {
                    return Err(Error::InvalidParameter(format!("grid node {i} outside 0..{}", perm.len())));
                }
                if inverse {
                    SpacePoint::Grid(perm.iter().position(|&j| j == i).expect("permutation"))
                } else {
                    SpacePoint::Grid(perm[i])
                }
            }
            _ => unreachable!("kind checked above"),
        })
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} is not finite")))
    }
}

pub(crate) fn antipode(p: &SpacePoint) -> SpacePoint {
    match *p {
        SpacePoint::Circle(t) => SpacePoint::circle(t + PI),
        SpacePoint::Sphere2(v) => SpacePoint::Sphere2(spaces::scale(v, -1.0)),
        other => other,
    }
}

fn renormalize(v: [f64; 3]) -> [f64; 3] {
    spaces::scale(v, 1.0 / spaces::norm(v))
}

fn rotate(v: [f64; 3], axis: [f64; 3], alpha: f64) -> [f64; 3] {
    let (s, c) = alpha.sin_cos();
    let kv = spaces::dot(axis, v);
    let kxv = spaces::cross(axis, v);
    spaces::add(
        spaces::add(spaces::scale(v, c), spaces::scale(kxv, s)),
        spaces::scale(axis, kv * (1.0 - c)),
    )
}

/// Angle map `ψ ↦ 2·atan(λ·tan(ψ/2))`, written with `atan2` so that `ψ = π`
/// stays fixed without a division by zero.
fn contract_angle(psi: f64, lambda: f64) -> f64 {
    let half = 0.5 * psi;
    2.0 * (lambda * half.sin()).atan2(half.cos())
}

fn north_south_step(pole: &SpacePoint, lambda: f64, x: &SpacePoint) -> SpacePoint {
    match (*pole, *x) {
        (SpacePoint::Circle(p), SpacePoint::Circle(t)) => {
            let mut phi = spaces::reduce_angle(t - p);
            if phi > PI {
                phi -= 2.0 * PI;
            }
            SpacePoint::circle(p + contract_angle(phi, lambda))
        }
        (SpacePoint::Sphere2(p), SpacePoint::Sphere2(u)) => {
            let c = spaces::dot(u, p);
            let w = spaces::sub(u, spaces::scale(p, c));
            let s = spaces::norm(w);
            if s == 0.0 {
                return *x;
            }
            let psi = s.atan2(c);
            let psi_next = contract_angle(psi, lambda);
            let e = spaces::scale(w, 1.0 / s);
            SpacePoint::Sphere2(renormalize(spaces::add(
                spaces::scale(p, psi_next.cos()),
                spaces::scale(e, psi_next.sin()),
            )))
        }
        _ => unreachable!("north-south maps live on the circle or the sphere"),
    }
}

/// North-south map on the circle or the sphere attracting to `p` with
/// derivative `lambda ∈ (0, 1)` there; the repeller is the antipode of `p`.
pub fn make_north_south(space: &Space, p: SpacePoint, lambda: f64) -> Result<MapDescriptor> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter(format!("north-south multiplier {lambda} not in (0, 1)")));
    }
    match space {
        Space::Circle | Space::Sphere2 => {
            space.check(&p)?;
            Ok(MapDescriptor::NorthSouth { attractor: p, lambda })
        }
        other => Err(Error::Unsupported(format!("north-south maps on {:?}", other.kind()))),
    }
}

/// A random iterated function system `(X; f_1, …, f_k; p_1, …, p_k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IfsSystem {
    space: Space,
    maps: Vec<MapDescriptor>,
    weights: ProbabilityVector,
}

impl IfsSystem {
    pub fn new(space: Space, maps: Vec<MapDescriptor>, weights: ProbabilityVector) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::InvalidParameter("a system needs at least one map".into()));
        }
        if weights.k() != maps.len() {
            return Err(Error::InvalidParameter(format!(
                "{} weights for {} maps",
                weights.k(),
                maps.len()
            )));
        }
        for m in &maps {
            m.check_space(&space)?;
        }
        if let Space::FiniteGrid(n) = space {
            Space::grid(n)?;
        }
        Ok(IfsSystem { space, maps, weights })
    }

    /// Uniform weights over `maps`.
    pub fn uniform(space: Space, maps: Vec<MapDescriptor>) -> Result<Self> {
        let k = maps.len();
        Self::new(space, maps, ProbabilityVector::uniform(k.max(1))?)
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn maps(&self) -> &[MapDescriptor] {
        &self.maps
    }

    pub fn weights(&self) -> &ProbabilityVector {
        &self.weights
    }

    pub fn k(&self) -> usize {
        self.maps.len()
    }

    /// All `k` letters in ascending order.
    pub fn letters(&self) -> impl Iterator<Item = Symbol> {
        (0..self.maps.len()).map(Symbol::from_index)
    }

    fn map(&self, letter: Symbol) -> Result<&MapDescriptor> {
        self.maps
            .get(letter.index())
            .ok_or(Error::InvalidSymbol { symbol: letter.value(), k: self.maps.len() })
    }

    /// `f_letter(x)`.
    pub fn apply(&self, letter: Symbol, x: &SpacePoint) -> Result<SpacePoint> {
        self.map(letter)?.apply(x)
    }

    /// `f_letter^{-1}(x)`.
    pub fn apply_inverse(&self, letter: Symbol, x: &SpacePoint) -> Result<SpacePoint> {
        self.map(letter)?.apply_inverse(x)
    }

    /// Every map is a bijection of the whole space.
    pub fn is_invertible(&self) -> bool {
        self.maps.iter().all(MapDescriptor::is_surjective)
    }

    /// The system of inverse maps with the same weights.
    pub fn inverse_system(&self) -> Result<IfsSystem> {
        let maps = self.maps.iter().map(MapDescriptor::inverse).collect::<Result<Vec<_>>>()?;
        IfsSystem::new(self.space, maps, self.weights.clone())
    }

    /// `(f^0_ω(x), …, f^n_ω(x))` with `f^j_ω = f_{ω_j} ∘ f^{j-1}_ω`.
    pub fn iterate_forward<I>(&self, word: I, x: &SpacePoint, n: usize) -> Result<OrbitSegment>
    where
        I: IntoIterator<Item = Symbol>,
    {
        self.space.check(x)?;
        let mut letters = word.into_iter();
        let mut direction = FiniteWord::empty();
        let mut points = Vec::with_capacity(n + 1);
        let mut current = *x;
        points.push(current);
        for j in 0..n {
            let letter = letters.next().ok_or(Error::OutOfRange { index: n, len: j })?;
            current = self.apply(letter, &current)?;
            direction.push(letter);
            points.push(current);
        }
        Ok(OrbitSegment { direction, points })
    }

    /// `f^n_ω(x)` without keeping the intermediate points.
    pub fn endpoint<I>(&self, word: I, x: &SpacePoint, n: usize) -> Result<SpacePoint>
    where
        I: IntoIterator<Item = Symbol>,
    {
        self.space.check(x)?;
        let mut letters = word.into_iter();
        let mut current = *x;
        for j in 0..n {
            let letter = letters.next().ok_or(Error::OutOfRange { index: n, len: j })?;
            current = self.apply(letter, &current)?;
        }
        Ok(current)
    }

    /// `(x, f^{-1}_ω(x), …, f^{-n}_ω(x))` reading `window` as `ω_{-1}, ω_{-2}, …`.
    pub fn iterate_backward(
        &self,
        window: &FiniteWord,
        x: &SpacePoint,
        n: usize,
    ) -> Result<OrbitSegment> {
        self.space.check(x)?;
        if n > window.len() {
            return Err(Error::OutOfRange { index: n, len: window.len() });
        }
        let mut points = Vec::with_capacity(n + 1);
        let mut current = *x;
        points.push(current);
        for letter in window.iter().take(n) {
            current = self.apply_inverse(letter, &current)?;
            points.push(current);
        }
        Ok(OrbitSegment { direction: window.prefix(n)?, points })
    }
}

/// A stretch of a fiber-wise orbit: `points[j] = f^j_ω(x)` for forward
/// segments, `f^{-j}_ω(x)` for backward ones.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitSegment {
    pub direction: FiniteWord,
    pub points: Vec<SpacePoint>,
}

impl OrbitSegment {
    pub fn start(&self) -> &SpacePoint {
        &self.points[0]
    }

    pub fn end(&self) -> &SpacePoint {
        self.points.last().expect("segments hold at least the base point")
    }

    pub fn len(&self) -> usize {
        self.direction.len()
    }

    pub fn is_empty(&self) -> bool {
        self.direction.is_empty()
    }
}

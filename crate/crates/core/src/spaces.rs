//! The four compact metric spaces the crate works on, their ε-nets, and an
//! enumerated countable basis of open balls.

use std::f64::consts::{PI, TAU};
use std::fmt;

use rand_chacha::rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Default cap on ε-net size.
pub const NET_CAP: usize = 1_000_000;

/// Fibonacci-lattice density on the sphere: `⌈SPHERE_NET_DENSITY / ε²⌉` points.
/// At this density the measured covering radius stays well below `ε`.
pub const SPHERE_NET_DENSITY: f64 = 10.0;

/// Unit-norm drift accepted (and corrected) when building sphere points.
pub const SPHERE_RENORMALIZE_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceKind {
    Circle,
    Sphere2,
    Interval,
    FiniteGrid,
}

/// A concrete compact metric space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Space {
    /// `S¹` with arc-length metric; points are angles in `[0, 2π)`.
    Circle,
    /// `S²` with the geodesic (great-circle angle) metric.
    Sphere2,
    /// `[0, 1]` with `|x - y|`.
    Interval,
    /// `n` nodes with the discrete 0/1 metric.
    FiniteGrid(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpacePoint {
    Circle(f64),
    Sphere2([f64; 3]),
    Interval(f64),
    Grid(usize),
}

impl SpacePoint {
    /// An angle, reduced into `[0, 2π)`.
    pub fn circle(theta: f64) -> Self {
        SpacePoint::Circle(reduce_angle(theta))
    }

    /// A point of `S²`; vectors off the unit sphere by less than
    /// [`SPHERE_RENORMALIZE_LIMIT`] are renormalized, larger drift is rejected.
    pub fn sphere(v: [f64; 3]) -> Result<Self> {
        let n = norm(v);
        if !n.is_finite() || (n - 1.0).abs() > SPHERE_RENORMALIZE_LIMIT {
            return Err(Error::InvalidParameter(format!(
                "sphere point {v:?} has norm {n}, not 1"
            )));
        }
        Ok(SpacePoint::Sphere2(scale(v, 1.0 / n)))
    }

    /// Normalizes any nonzero vector onto the sphere.
    pub fn sphere_direction(v: [f64; 3]) -> Result<Self> {
        let n = norm(v);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidParameter(format!("cannot normalize {v:?}")));
        }
        Ok(SpacePoint::Sphere2(scale(v, 1.0 / n)))
    }

    pub fn interval(t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!("interval point {t} outside [0, 1]")));
        }
        Ok(SpacePoint::Interval(t))
    }

    pub fn kind(&self) -> SpaceKind {
        match self {
            SpacePoint::Circle(_) => SpaceKind::Circle,
            SpacePoint::Sphere2(_) => SpaceKind::Sphere2,
            SpacePoint::Interval(_) => SpaceKind::Interval,
            SpacePoint::Grid(_) => SpaceKind::FiniteGrid,
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            SpacePoint::Circle(t) => Some(t),
            _ => None,
        }
    }

    pub fn vector(&self) -> Option<[f64; 3]> {
        match *self {
            SpacePoint::Sphere2(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for SpacePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpacePoint::Circle(t) => write!(f, "θ={t}"),
            SpacePoint::Sphere2([x, y, z]) => write!(f, "{x},{y},{z}"),
            SpacePoint::Interval(t) => write!(f, "t={t}"),
            SpacePoint::Grid(i) => write!(f, "#{i}"),
        }
    }
}

pub(crate) fn reduce_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

pub(crate) fn norm(v: [f64; 3]) -> f64 {
    dot(v, v).sqrt()
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn scale(v: [f64; 3], s: f64) -> [f64; 3] {
    [v[0] * s, v[1] * s, v[2] * s]
}

pub(crate) fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Great-circle angle between unit vectors; `atan2` keeps precision at both ends.
pub(crate) fn sphere_angle(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm(cross(a, b)).atan2(dot(a, b))
}

/// An open ball `{y : d(center, y) < radius}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: SpacePoint,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: SpacePoint, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("ball radius {radius} must be positive")));
        }
        Ok(Ball { center, radius })
    }

    pub fn contains(&self, space: &Space, x: &SpacePoint) -> Result<bool> {
        Ok(space.distance(&self.center, x)? < self.radius)
    }
}

/// The `index`-th member of the countable basis produced by [`Space::basis_ball`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisBall {
    pub index: u64,
    pub level: u32,
    pub ball: Ball,
}

impl Space {
    pub fn kind(&self) -> SpaceKind {
        match self {
            Space::Circle => SpaceKind::Circle,
            Space::Sphere2 => SpaceKind::Sphere2,
            Space::Interval => SpaceKind::Interval,
            Space::FiniteGrid(_) => SpaceKind::FiniteGrid,
        }
    }

    pub fn grid(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("finite grid needs at least one node".into()));
        }
        Ok(Space::FiniteGrid(n))
    }

    /// Checks that `x` is a valid point of this space.
    pub fn check(&self, x: &SpacePoint) -> Result<()> {
        if x.kind() != self.kind() {
            return Err(Error::SpaceMismatch { expected: self.kind(), found: x.kind() });
        }
        match (*self, *x) {
            (Space::FiniteGrid(n), SpacePoint::Grid(i)) if i >= n => {
                Err(Error::InvalidParameter(format!("grid node {i} outside 0..{n}")))
            }
            (_, SpacePoint::Interval(t)) if !(0.0..=1.0).contains(&t) => {
                Err(Error::InvalidParameter(format!("interval point {t} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }

    pub fn distance(&self, x: &SpacePoint, y: &SpacePoint) -> Result<f64> {
        match (x, y) {
            (SpacePoint::Circle(a), SpacePoint::Circle(b)) if self.kind() == SpaceKind::Circle => {
                let d = (a - b).abs().rem_euclid(TAU);
                Ok(d.min(TAU - d))
            }
            (SpacePoint::Sphere2(a), SpacePoint::Sphere2(b)) if self.kind() == SpaceKind::Sphere2 => {
                Ok(sphere_angle(*a, *b))
            }
            (SpacePoint::Interval(a), SpacePoint::Interval(b))
                if self.kind() == SpaceKind::Interval =>
            {
                Ok((a - b).abs())
            }
            (SpacePoint::Grid(a), SpacePoint::Grid(b)) if self.kind() == SpaceKind::FiniteGrid => {
                Ok(if a == b { 0.0 } else { 1.0 })
            }
            _ => {
                let found = if x.kind() != self.kind() { x.kind() } else { y.kind() };
                Err(Error::SpaceMismatch { expected: self.kind(), found })
            }
        }
    }

    /// Largest distance between two points of the space.
    pub fn diameter(&self) -> f64 {
        match self {
            Space::Circle | Space::Sphere2 => PI,
            Space::Interval => 1.0,
            Space::FiniteGrid(n) => {
                if *n > 1 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// A finite `ε`-net: every point of the space lies within `ε` of a node.
    pub fn epsilon_net(&self, epsilon: f64) -> Result<EpsilonNet> {
        self.epsilon_net_with_cap(epsilon, NET_CAP)
    }

    pub fn epsilon_net_with_cap(&self, epsilon: f64, cap: usize) -> Result<EpsilonNet> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("net resolution {epsilon} must be positive")));
        }
        let required = net_size(self, epsilon);
        if required > cap as u128 {
            return Err(Error::TooFine { epsilon, required, cap });
        }
        Ok(EpsilonNet { space: *self, epsilon, len: required as usize })
    }

    /// The `i`-th basis ball, `i ≥ 1`.
    ///
    /// Level `m ≥ 1` consists of balls of radius `2^-m` centred at the nodes of
    /// the `2^-(m+1)`-net, in node order; levels are listed one after another.
    /// Every level is finite, so the listing is total.
    pub fn basis_ball(&self, i: u64) -> Result<BasisBall> {
        if i == 0 {
            return Err(Error::InvalidParameter("basis index starts at 1".into()));
        }
        let mut rest = i - 1;
        let mut level = 1u32;
        loop {
            let net = self.level_net(level);
            let count = net.len() as u64;
            if rest < count {
                let center = net.point(rest as usize);
                let radius = 0.5f64.powi(level as i32);
                return Ok(BasisBall { index: i, level, ball: Ball { center, radius } });
            }
            rest -= count;
            level += 1;
        }
    }

    /// An index bound `I(r)` such that for every `x` some ball `B_i` with
    /// `i ≤ I(r)` contains `x` and has radius `< r`.
    pub fn basis_index_bound(&self, r: f64) -> Result<u64> {
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!("radius {r} must be positive")));
        }
        let mut total = 0u64;
        let mut level = 1u32;
        loop {
            total += self.level_net(level).len() as u64;
            if 0.5f64.powi(level as i32) < r {
                return Ok(total);
            }
            level += 1;
        }
    }

    fn level_net(&self, level: u32) -> EpsilonNet {
        let epsilon = 0.5f64.powi(level as i32 + 1);
        EpsilonNet { space: *self, epsilon, len: net_size(self, epsilon) as usize }
    }

    /// A uniformly distributed point.
    pub fn sample_point(&self, rng: &mut impl RngCore) -> SpacePoint {
        match *self {
            Space::Circle => SpacePoint::circle(rng::uniform_in(rng, 0.0, TAU)),
            Space::Sphere2 => loop {
                let v = [rng::gaussian(rng), rng::gaussian(rng), rng::gaussian(rng)];
                if norm(v) > 1e-9 {
                    break SpacePoint::sphere_direction(v).expect("nonzero vector");
                }
            },
            Space::Interval => SpacePoint::Interval(rng::uniform(rng)),
            Space::FiniteGrid(n) => SpacePoint::Grid(rng::below(rng, n as u64) as usize),
        }
    }

    /// A point of the open ball `B(center, r)`.
    pub fn sample_in_ball(
        &self,
        rng: &mut impl RngCore,
        center: &SpacePoint,
        r: f64,
    ) -> Result<SpacePoint> {
        self.check(center)?;
        if !(r > 0.0) {
            return Err(Error::InvalidParameter(format!("radius {r} must be positive")));
        }
        let candidate = match (*self, *center) {
            (Space::Circle, SpacePoint::Circle(t)) => {
                let offset = rng::uniform(rng) * r.min(PI);
                let sign = if rng.next_u64() & 1 == 0 { 1.0 } else { -1.0 };
                SpacePoint::circle(t + sign * offset)
            }
            (Space::Interval, SpacePoint::Interval(t)) => {
                let lo = (t - r).max(0.0);
                let hi = (t + r).min(1.0);
                SpacePoint::Interval(rng::uniform_in(rng, lo, hi).clamp(0.0, 1.0))
            }
            (Space::Sphere2, SpacePoint::Sphere2(c)) => {
                let angle = rng::uniform(rng) * r.min(PI);
                let dir = random_tangent(rng, c);
                SpacePoint::sphere_direction(add(scale(c, angle.cos()), scale(dir, angle.sin())))?
            }
            (Space::FiniteGrid(n), SpacePoint::Grid(i)) => {
                if r > 1.0 {
                    SpacePoint::Grid(rng::below(rng, n as u64) as usize)
                } else {
                    SpacePoint::Grid(i)
                }
            }
            _ => unreachable!("checked above"),
        };
        // Rounding can land a hair outside; fall back to the centre in that case.
        if self.distance(center, &candidate)? < r {
            Ok(candidate)
        } else {
            Ok(*center)
        }
    }

    /// Parses the point syntax used in reports and configs:
    /// `θ=<rad>` (or `theta=`, or a bare number) on the circle, `x,y,z` on the
    /// sphere, `t=<v>` (or a bare number) on the interval, `#i` (or `i`) on a grid.
    pub fn parse_point(&self, text: &str) -> Result<SpacePoint> {
        let text = text.trim();
        let bad = || Error::InvalidParameter(format!("cannot parse {text:?} as a {:?} point", self.kind()));
        let number = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        let point = match self {
            Space::Circle => {
                let body = text
                    .strip_prefix("θ=")
                    .or_else(|| text.strip_prefix("theta="))
                    .unwrap_or(text);
                SpacePoint::circle(number(body)?)
            }
            Space::Sphere2 => {
                let parts: Vec<f64> = text.split(',').map(number).collect::<Result<_>>()?;
                if parts.len() != 3 {
                    return Err(bad());
                }
                SpacePoint::sphere([parts[0], parts[1], parts[2]])?
            }
            Space::Interval => SpacePoint::interval(number(text.strip_prefix("t=").unwrap_or(text))?)?,
            Space::FiniteGrid(_) => {
                let body = text.strip_prefix('#').unwrap_or(text);
                SpacePoint::Grid(body.trim().parse::<usize>().map_err(|_| bad())?)
            }
        };
        self.check(&point)?;
        Ok(point)
    }
}

fn random_tangent(rng: &mut impl RngCore, c: [f64; 3]) -> [f64; 3] {
    loop {
        let g = [rng::gaussian(rng), rng::gaussian(rng), rng::gaussian(rng)];
        let t = sub(g, scale(c, dot(g, c)));
        let n = norm(t);
        if n > 1e-9 {
            return scale(t, 1.0 / n);
        }
    }
}

fn net_size(space: &Space, epsilon: f64) -> u128 {
    let ceil = |x: f64| if x.is_finite() { x.ceil().max(0.0) as u128 } else { u128::MAX };
    match space {
        Space::Interval => ceil(1.0 / epsilon).max(1) + 1,
        Space::Circle => ceil(TAU / epsilon).max(1),
        Space::Sphere2 => ceil(SPHERE_NET_DENSITY / (epsilon * epsilon)).max(2),
        Space::FiniteGrid(n) => *n as u128,
    }
}

/// A deterministic finite ε-net whose nodes are computed on demand.
///
/// * Interval: `m + 1` equally spaced points `j/m`, `m = ⌈1/ε⌉`.
/// * Circle: `⌈2π/ε⌉` equally spaced angles starting at 0.
/// * Sphere: Fibonacci lattice of `⌈10/ε²⌉` points ordered by decreasing `z`.
/// * Finite grid: every node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonNet {
    space: Space,
    epsilon: f64,
    len: usize,
}

impl EpsilonNet {
    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn point(&self, j: usize) -> SpacePoint {
        debug_assert!(j < self.len);
        match self.space {
            Space::Interval => SpacePoint::Interval(j as f64 / (self.len - 1) as f64),
            Space::Circle => SpacePoint::Circle(j as f64 * TAU / self.len as f64),
            Space::Sphere2 => {
                let n = self.len as f64;
                let z = 1.0 - (2.0 * j as f64 + 1.0) / n;
                let rho = (1.0 - z * z).max(0.0).sqrt();
                let phi = j as f64 * golden_angle();
                SpacePoint::Sphere2([rho * phi.cos(), rho * phi.sin(), z])
            }
            Space::FiniteGrid(_) => SpacePoint::Grid(j),
        }
    }

    pub fn points(&self) -> Vec<SpacePoint> {
        (0..self.len).map(|j| self.point(j)).collect()
    }

    /// Node indices that may lie within `r` of `x`, in increasing order.
    /// Every node at distance `≤ r` is included; callers filter by distance.
    pub fn candidates(&self, x: &SpacePoint, r: f64) -> Vec<usize> {
        match (self.space, *x) {
            (Space::Interval, SpacePoint::Interval(t)) => {
                let m = (self.len - 1) as f64;
                let lo = ((t - r) * m).floor() - 1.0;
                let hi = ((t + r) * m).ceil() + 1.0;
                let lo = lo.max(0.0) as usize;
                let hi = (hi.max(0.0) as usize).min(self.len - 1);
                (lo..=hi).collect()
            }
            (Space::Circle, SpacePoint::Circle(t)) => {
                let n = self.len as i64;
                let step = TAU / self.len as f64;
                let reach = (r / step).ceil() as i64 + 1;
                if 2 * reach + 1 >= n {
                    return (0..self.len).collect();
                }
                let mid = (t / step).round() as i64;
                let mut v: Vec<usize> =
                    (mid - reach..=mid + reach).map(|j| j.rem_euclid(n) as usize).collect();
                v.sort_unstable();
                v.dedup();
                v
            }
            (Space::Sphere2, SpacePoint::Sphere2(v)) => {
                let polar = v[2].clamp(-1.0, 1.0).acos();
                let z_hi = (polar - r).max(0.0).cos();
                let z_lo = (polar + r).min(PI).cos();
                let n = self.len as f64;
                // z_j = 1 - (2j + 1)/n  ⇒  j = (n(1 - z) - 1)/2
                let j_of = |z: f64| (n * (1.0 - z) - 1.0) / 2.0;
                let lo = (j_of(z_hi).floor() - 1.0).max(0.0) as usize;
                let hi = ((j_of(z_lo).ceil() + 1.0).max(0.0) as usize).min(self.len - 1);
                (lo..=hi).collect()
            }
            (Space::FiniteGrid(_), SpacePoint::Grid(i)) => {
                if r >= 1.0 {
                    (0..self.len).collect()
                } else if i < self.len {
                    vec![i]
                } else {
                    Vec::new()
                }
            }
            _ => Vec::new(),
        }
    }

    /// Nodes with `d(x, node) < r`, in increasing order.
    pub fn within(&self, x: &SpacePoint, r: f64) -> Vec<usize> {
        self.candidates(x, r)
            .into_iter()
            .filter(|&j| self.space.distance(x, &self.point(j)).map_or(false, |d| d < r))
            .collect()
    }

    /// The node nearest to `x` (lowest index on ties).
    pub fn nearest(&self, x: &SpacePoint) -> usize {
        let mut radius = self.epsilon;
        loop {
            let best = self
                .candidates(x, radius)
                .into_iter()
                .map(|j| (j, self.space.distance(x, &self.point(j)).unwrap_or(f64::INFINITY)))
                .fold(None, |best: Option<(usize, f64)>, (j, d)| match best {
                    Some((_, bd)) if bd <= d => best,
                    _ => Some((j, d)),
                });
            match best {
                Some((j, d)) if d <= radius => return j,
                _ if radius > 2.0 * PI => return best.map_or(0, |(j, _)| j),
                _ => radius *= 2.0,
            }
        }
    }
}

fn golden_angle() -> f64 {
    PI * (3.0 - 5f64.sqrt())
}

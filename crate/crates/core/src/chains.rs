//! Relation chains along a direction word, chain connections, δ-chains on an
//! ε-net, and chain recurrence.
//!
//! A chain in direction `ω` from `x_0` is a sequence `x_0, x_1, …` with
//! `f_{ω_{i+1}}(x_i) 𝓔 x_{i+1}`. Relations here are step relations: they are
//! given the step letter and the point *before* the map is applied, and decide
//! whether `y` is an acceptable successor of `x`:
//!
//! | relation          | holds iff                                        |
//! |-------------------|--------------------------------------------------|
//! | `ExactImage(τ)`   | `d(f_i(x), y) ≤ τ`                               |
//! | `DeltaImage(δ)`   | `d(f_i(x), y) < δ`                               |
//! | `InBall(B)`       | `x ∈ B` and `y ∈ B` (letter ignored)             |
//! | `PairExactImage`  | both coordinates satisfy `ExactImage(τ)`         |
//! | `PairInBall(B)`   | `PairExactImage(τ)` and both coordinates of `y ∈ B` |
//!
//! A chain connection of length `n` to a target uses `n` steps of `𝓔` and one
//! final step `f_{ω_{n+1}}(x_n) 𝓔̃ x_{n+1}` with `x_{n+1}` in the target, so it
//! consumes `n + 1` letters.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::IfsSystem;
use crate::rng;
use crate::spaces::{Ball, EpsilonNet, Space, SpacePoint};
use crate::symbolic::{FiniteWord, Symbol};

/// Default tolerance realizing `y = f_i(x)` in floating point.
pub const DEFAULT_EXACT_TOLERANCE: f64 = 1e-9;

/// A point of `X` or of `X × X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ChainPoint {
    Single(SpacePoint),
    Pair(SpacePoint, SpacePoint),
}

impl ChainPoint {
    pub fn single(&self) -> Option<&SpacePoint> {
        match self {
            ChainPoint::Single(x) => Some(x),
            ChainPoint::Pair(..) => None,
        }
    }

    fn coords(&self) -> (&SpacePoint, Option<&SpacePoint>) {
        match self {
            ChainPoint::Single(x) => (x, None),
            ChainPoint::Pair(x, y) => (x, Some(y)),
        }
    }

    fn is_pair(&self) -> bool {
        matches!(self, ChainPoint::Pair(..))
    }
}

impl From<SpacePoint> for ChainPoint {
    fn from(x: SpacePoint) -> Self {
        ChainPoint::Single(x)
    }
}

impl std::fmt::Display for ChainPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ChainPoint::Single(x) => write!(f, "{x}"),
            ChainPoint::Pair(x, y) => write!(f, "({x}; {y})"),
        }
    }
}

/// Whether steps apply the maps or their inverses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Orientation {
    #[default]
    Forward,
    /// Letters are read as `ω_{-1}, ω_{-2}, …` and steps use `f^{-1}`.
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RelationSpec {
    ExactImage { tol: f64 },
    DeltaImage { delta: f64 },
    InBall { ball: Ball },
    PairExactImage { tol: f64 },
    PairInBall { ball: Ball, tol: f64 },
}

impl RelationSpec {
    pub fn exact() -> Self {
        RelationSpec::ExactImage { tol: DEFAULT_EXACT_TOLERANCE }
    }

    pub fn pair_exact() -> Self {
        RelationSpec::PairExactImage { tol: DEFAULT_EXACT_TOLERANCE }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RelationSpec::ExactImage { tol } | RelationSpec::PairExactImage { tol } => tol >= 0.0,
            RelationSpec::DeltaImage { delta } => delta > 0.0,
            RelationSpec::InBall { ball } => ball.radius > 0.0,
            RelationSpec::PairInBall { ball, tol } => ball.radius > 0.0 && tol >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid relation {self:?}")))
        }
    }

    fn is_pair(&self) -> bool {
        matches!(self, RelationSpec::PairExactImage { .. } | RelationSpec::PairInBall { .. })
    }
}

/// The set `𝒬` a chain connection must end in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TargetSet {
    Ball(Ball),
    WholeSpace,
    /// Points within `radius` (inclusive) of one of `points`.
    PointSet { points: Vec<SpacePoint>, radius: f64 },
}

impl TargetSet {
    pub fn point_set(points: Vec<SpacePoint>, radius: f64) -> Result<Self> {
        if points.is_empty() || !(radius >= 0.0) {
            return Err(Error::InvalidParameter("point-set target needs points and radius ≥ 0".into()));
        }
        Ok(TargetSet::PointSet { points, radius })
    }

    pub fn contains_point(&self, space: &Space, x: &SpacePoint) -> Result<bool> {
        match self {
            TargetSet::Ball(b) => b.contains(space, x),
            TargetSet::WholeSpace => space.check(x).map(|_| true),
            TargetSet::PointSet { points, radius } => {
                for p in points {
                    if space.distance(p, x)? <= *radius {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }

    /// Pairs belong to the target when both coordinates do.
    pub fn contains(&self, space: &Space, x: &ChainPoint) -> Result<bool> {
        let (a, b) = x.coords();
        Ok(self.contains_point(space, a)? && b.map_or(Ok(true), |b| self.contains_point(space, b))?)
    }

    fn anchor_points(&self) -> Vec<SpacePoint> {
        match self {
            TargetSet::Ball(b) => vec![b.center],
            TargetSet::WholeSpace => Vec::new(),
            TargetSet::PointSet { points, .. } => points.clone(),
        }
    }
}

/// A witnessed chain connection `x_0 𝓔^n_ω 𝓔̃_{σ^n ω} x_{n+1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainCertificate {
    /// `ω_1 … ω_{n+1}`.
    pub direction: FiniteWord,
    /// `x_0, …, x_{n+1}`.
    pub points: Vec<ChainPoint>,
    pub relation: RelationSpec,
    pub tilde_relation: RelationSpec,
    pub target: TargetSet,
    pub orientation: Orientation,
}

impl ChainCertificate {
    /// Number of `𝓔` steps, `n`.
    pub fn steps(&self) -> usize {
        self.direction.len().saturating_sub(1)
    }

    pub fn start(&self) -> &ChainPoint {
        &self.points[0]
    }

    pub fn end(&self) -> &ChainPoint {
        self.points.last().expect("certificate has points")
    }

    /// `(step, letter, point, d(f(x_step), x_{step+1}))` per step, with the
    /// error taken as the larger coordinate error for pairs.
    pub fn step_errors(&self, sys: &IfsSystem) -> Result<Vec<(usize, Symbol, ChainPoint, f64)>> {
        let mut rows = Vec::with_capacity(self.direction.len());
        for (i, letter) in self.direction.iter().enumerate() {
            let image = image_of(sys, self.orientation, letter, &self.points[i])?;
            let err = chain_distance(sys.space(), &image, &self.points[i + 1])?;
            rows.push((i, letter, self.points[i], err));
        }
        Ok(rows)
    }
}

fn chain_distance(space: &Space, a: &ChainPoint, b: &ChainPoint) -> Result<f64> {
    match (a, b) {
        (ChainPoint::Single(x), ChainPoint::Single(y)) => space.distance(x, y),
        (ChainPoint::Pair(x, y), ChainPoint::Pair(u, v)) => {
            Ok(space.distance(x, u)?.max(space.distance(y, v)?))
        }
        _ => Err(Error::InvalidParameter("cannot compare a point with a pair".into())),
    }
}

fn image_of(
    sys: &IfsSystem,
    orientation: Orientation,
    letter: Symbol,
    x: &ChainPoint,
) -> Result<ChainPoint> {
    let f = |p: &SpacePoint| match orientation {
        Orientation::Forward => sys.apply(letter, p),
        Orientation::Backward => sys.apply_inverse(letter, p),
    };
    Ok(match x {
        ChainPoint::Single(p) => ChainPoint::Single(f(p)?),
        ChainPoint::Pair(p, q) => ChainPoint::Pair(f(p)?, f(q)?),
    })
}

/// Evaluates `rel` for the step `x → y` with letter `letter`.
pub fn relation_holds(
    sys: &IfsSystem,
    rel: &RelationSpec,
    letter: Symbol,
    x: &ChainPoint,
    y: &ChainPoint,
) -> Result<bool> {
    relation_holds_oriented(sys, rel, Orientation::Forward, letter, x, y)
}

fn relation_holds_oriented(
    sys: &IfsSystem,
    rel: &RelationSpec,
    orientation: Orientation,
    letter: Symbol,
    x: &ChainPoint,
    y: &ChainPoint,
) -> Result<bool> {
    let space = sys.space();
    if rel.is_pair() != x.is_pair() || x.is_pair() != y.is_pair() {
        return Err(Error::InvalidParameter(format!(
            "relation {rel:?} applied to {x} and {y}"
        )));
    }
    for p in [x.coords(), y.coords()] {
        space.check(p.0)?;
        if let Some(q) = p.1 {
            space.check(q)?;
        }
    }
    Ok(match rel {
        RelationSpec::ExactImage { tol } | RelationSpec::PairExactImage { tol } => {
            chain_distance(space, &image_of(sys, orientation, letter, x)?, y)? <= *tol
        }
        RelationSpec::DeltaImage { delta } => {
            chain_distance(space, &image_of(sys, orientation, letter, x)?, y)? < *delta
        }
        RelationSpec::InBall { ball } => {
            let (a, _) = x.coords();
            let (b, _) = y.coords();
            ball.contains(space, a)? && ball.contains(space, b)?
        }
        RelationSpec::PairInBall { ball, tol } => {
            let (u, v) = y.coords();
            chain_distance(space, &image_of(sys, orientation, letter, x)?, y)? <= *tol
                && ball.contains(space, u)?
                && ball.contains(space, v.expect("pair"))?
        }
    })
}

/// Checks every step relation, the final `𝓔̃` step and target membership.
pub fn verify_chain(sys: &IfsSystem, cert: &ChainCertificate) -> Result<bool> {
    let n_letters = cert.direction.len();
    if n_letters == 0 || cert.points.len() != n_letters + 1 {
        return Ok(false);
    }
    cert.direction.check_alphabet(sys.k())?;
    let n = n_letters - 1;
    for (i, letter) in cert.direction.iter().enumerate() {
        let rel = if i < n { &cert.relation } else { &cert.tilde_relation };
        if !relation_holds_oriented(sys, rel, cert.orientation, letter, &cert.points[i], &cert.points[i + 1])? {
            return Ok(false);
        }
    }
    cert.target.contains(sys.space(), cert.end())
}

/// Resolution of the ε-net used for δ-image chain searches when the caller
/// does not pick one: `δ / 2`.
pub fn default_net_resolution(delta: f64) -> f64 {
    0.5 * delta
}

/// Searches for a chain connection from `start` to `target` in the direction
/// given by `word`, using at most `horizon` steps of `rel`.
///
/// For exact-image relations the chain is the fiber-wise orbit itself and the
/// search stops at the first `n ≤ horizon` whose final step lands in the
/// target. For `DeltaImage(δ)` it runs a layered breadth-first search over
/// the nodes of an ε-net (`ε = δ/2`), layer `i` being advanced by `ω_{i+1}`.
pub fn find_chain_connection<I>(
    sys: &IfsSystem,
    start: &ChainPoint,
    target: &TargetSet,
    rel: &RelationSpec,
    tilde: &RelationSpec,
    word: I,
    horizon: usize,
) -> Result<Option<ChainCertificate>>
where
    I: IntoIterator<Item = Symbol>,
{
    let net_eps = match rel {
        RelationSpec::DeltaImage { delta } => default_net_resolution(*delta),
        _ => 0.0,
    };
    find_chain_connection_oriented(sys, start, target, rel, tilde, word, horizon, net_eps, Orientation::Forward)
}

/// [`find_chain_connection`] for `DeltaImage` with an explicit net resolution.
#[allow(clippy::too_many_arguments)]
pub fn find_chain_connection_on_net<I>(
    sys: &IfsSystem,
    start: &ChainPoint,
    target: &TargetSet,
    delta: f64,
    tilde: &RelationSpec,
    word: I,
    horizon: usize,
    net_eps: f64,
) -> Result<Option<ChainCertificate>>
where
    I: IntoIterator<Item = Symbol>,
{
    let rel = RelationSpec::DeltaImage { delta };
    find_chain_connection_oriented(sys, start, target, &rel, tilde, word, horizon, net_eps, Orientation::Forward)
}

/// Backward chain connection: letters of `window` are `ω_{-1}, ω_{-2}, …` and
/// each step applies an inverse map. Exact-image relations only.
pub fn find_backward_chain_connection(
    sys: &IfsSystem,
    start: &ChainPoint,
    target: &TargetSet,
    rel: &RelationSpec,
    tilde: &RelationSpec,
    window: &FiniteWord,
    horizon: usize,
) -> Result<Option<ChainCertificate>> {
    if !sys.is_invertible() {
        return Err(Error::Unsupported("backward chains need maps that are bijections of X".into()));
    }
    if matches!(rel, RelationSpec::DeltaImage { .. }) {
        return Err(Error::Unsupported("backward δ-chains".into()));
    }
    let horizon = horizon.min(window.len().saturating_sub(1));
    find_chain_connection_oriented(sys, start, target, rel, tilde, window.iter(), horizon, 0.0, Orientation::Backward)
}

#[allow(clippy::too_many_arguments)]
fn find_chain_connection_oriented<I>(
    sys: &IfsSystem,
    start: &ChainPoint,
    target: &TargetSet,
    rel: &RelationSpec,
    tilde: &RelationSpec,
    word: I,
    horizon: usize,
    net_eps: f64,
    orientation: Orientation,
) -> Result<Option<ChainCertificate>>
where
    I: IntoIterator<Item = Symbol>,
{
    rel.validate()?;
    tilde.validate()?;
    if rel.is_pair() != start.is_pair() {
        return Err(Error::InvalidParameter(format!("relation {rel:?} does not match start {start}")));
    }
    match rel {
        RelationSpec::ExactImage { .. } | RelationSpec::PairExactImage { .. } => {
            exact_walk(sys, start, target, rel, tilde, word, horizon, orientation)
        }
        RelationSpec::DeltaImage { delta } => {
            let net = sys.space().epsilon_net(net_eps)?;
            delta_layers(sys, start, target, *delta, tilde, word, horizon, &net)
        }
        _ => Err(Error::Unsupported(format!("{rel:?} as the chain relation"))),
    }
}

/// Candidate endpoints `q` for the final `𝓔̃` step from a point whose image is
/// `image`: the image itself, then target and relation anchors.
fn final_candidates(image: &ChainPoint, target: &TargetSet, tilde: &RelationSpec) -> Vec<ChainPoint> {
    let mut anchors = target.anchor_points();
    match tilde {
        RelationSpec::InBall { ball } | RelationSpec::PairInBall { ball, .. } => anchors.push(ball.center),
        _ => {}
    }
    let mut out = vec![*image];
    for a in anchors {
        out.push(match image {
            ChainPoint::Single(_) => ChainPoint::Single(a),
            ChainPoint::Pair(..) => ChainPoint::Pair(a, a),
        });
    }
    out
}

fn close_chain(
    sys: &IfsSystem,
    orientation: Orientation,
    letter: Symbol,
    x: &ChainPoint,
    image: &ChainPoint,
    target: &TargetSet,
    tilde: &RelationSpec,
    extra: &[ChainPoint],
) -> Result<Option<ChainPoint>> {
    for q in final_candidates(image, target, tilde).iter().chain(extra) {
        if target.contains(sys.space(), q)?
            && relation_holds_oriented(sys, tilde, orientation, letter, x, q)?
        {
            return Ok(Some(*q));
        }
    }
    Ok(None)
}

#[allow(clippy::too_many_arguments)]
fn exact_walk<I>(
    sys: &IfsSystem,
    start: &ChainPoint,
    target: &TargetSet,
    rel: &RelationSpec,
    tilde: &RelationSpec,
    word: I,
    horizon: usize,
    orientation: Orientation,
) -> Result<Option<ChainCertificate>>
where
    I: IntoIterator<Item = Symbol>,
{
    let mut letters = word.into_iter();
    let mut points = vec![*start];
    let mut direction = FiniteWord::empty();
    let mut current = *start;
    for n in 0..=horizon {
        let Some(letter) = letters.next() else { break };
        direction.push(letter);
        let image = image_of(sys, orientation, letter, &current)?;
        if let Some(q) = close_chain(sys, orientation, letter, &current, &image, target, tilde, &[])? {
            points.push(q);
            return Ok(Some(ChainCertificate {
                direction,
                points,
                relation: *rel,
                tilde_relation: *tilde,
                target: target.clone(),
                orientation,
            }));
        }
        if n < horizon {
            points.push(image);
            current = image;
        }
    }
    Ok(None)
}

#[allow(clippy::too_many_arguments)]
fn delta_layers<I>(
    sys: &IfsSystem,
    start: &ChainPoint,
    target: &TargetSet,
    delta: f64,
    tilde: &RelationSpec,
    word: I,
    horizon: usize,
    net: &EpsilonNet,
) -> Result<Option<ChainCertificate>>
where
    I: IntoIterator<Item = Symbol>,
{
    let ChainPoint::Single(x) = start else {
        return Err(Error::Unsupported("δ-image chains on pairs".into()));
    };
    // layers[i] holds (point, parent position in layers[i - 1]).
    let mut layers: Vec<Vec<(SpacePoint, usize)>> = vec![vec![(*x, usize::MAX)]];
    let mut direction = FiniteWord::empty();
    let mut letters = word.into_iter();
    let mut stamp = vec![usize::MAX; net.len()];
    for n in 0..=horizon {
        let Some(letter) = letters.next() else { break };
        direction.push(letter);
        let layer = &layers[n];
        let mut next: Vec<(SpacePoint, usize)> = Vec::new();
        for (pos, (u, _)) in layer.iter().enumerate() {
            let image = sys.apply(letter, u)?;
            let near: Vec<ChainPoint> = if matches!(tilde, RelationSpec::DeltaImage { .. }) {
                net.within(&image, delta).into_iter().map(|j| ChainPoint::Single(net.point(j))).collect()
            } else {
                Vec::new()
            };
            let here = ChainPoint::Single(*u);
            if let Some(q) = close_chain(
                sys,
                Orientation::Forward,
                letter,
                &here,
                &ChainPoint::Single(image),
                target,
                tilde,
                &near,
            )? {
                let mut points = vec![q];
                let mut level = n;
                let mut p = pos;
                loop {
                    let (pt, parent) = layers[level][p];
                    points.push(ChainPoint::Single(pt));
                    if level == 0 {
                        break;
                    }
                    level -= 1;
                    p = parent;
                }
                points.reverse();
                return Ok(Some(ChainCertificate {
                    direction,
                    points,
                    relation: RelationSpec::DeltaImage { delta },
                    tilde_relation: *tilde,
                    target: target.clone(),
                    orientation: Orientation::Forward,
                }));
            }
            if n < horizon {
                for j in net.within(&image, delta) {
                    if stamp[j] != n {
                        stamp[j] = n;
                        next.push((net.point(j), pos));
                    }
                }
            }
        }
        if n == horizon || next.is_empty() {
            break;
        }
        layers.push(next);
    }
    Ok(None)
}

/// Outcome of [`check_stable_connection`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub stable: bool,
    pub radius: f64,
    pub samples: usize,
    pub failures: usize,
}

/// Re-verifies `cert`'s direction word from `samples` points drawn from the
/// open ball of radius `radius` around its start (each coordinate, for pairs).
///
/// Exact-image chains are recomputed along the orbit of each sample; δ-chains
/// keep the certificate's interior points.
pub fn check_stable_connection(
    sys: &IfsSystem,
    cert: &ChainCertificate,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<StabilityVerdict> {
    if !(radius > 0.0) || samples == 0 {
        return Err(Error::InvalidParameter("stability check needs r > 0 and m ≥ 1".into()));
    }
    let space = sys.space();
    let mut rng = rng::stream(seed, 0);
    let mut failures = 0;
    for _ in 0..samples {
        let u = match cert.start() {
            ChainPoint::Single(x) => ChainPoint::Single(space.sample_in_ball(&mut rng, x, radius)?),
            ChainPoint::Pair(x, y) => ChainPoint::Pair(
                space.sample_in_ball(&mut rng, x, radius)?,
                space.sample_in_ball(&mut rng, y, radius)?,
            ),
        };
        if !replay_from(sys, cert, &u)? {
            failures += 1;
        }
    }
    Ok(StabilityVerdict { stable: failures == 0, radius, samples, failures })
}

fn replay_from(sys: &IfsSystem, cert: &ChainCertificate, u: &ChainPoint) -> Result<bool> {
    let n = cert.steps();
    let mut points = vec![*u];
    match cert.relation {
        RelationSpec::ExactImage { .. } | RelationSpec::PairExactImage { .. } => {
            let mut current = *u;
            for letter in cert.direction.iter().take(n) {
                current = image_of(sys, cert.orientation, letter, &current)?;
                points.push(current);
            }
        }
        _ => points.extend_from_slice(&cert.points[1..=n]),
    }
    let last_letter = cert.direction.letter(n + 1).expect("nonempty direction");
    let image = image_of(sys, cert.orientation, last_letter, &points[n])?;
    let q = close_chain(
        sys,
        cert.orientation,
        last_letter,
        &points[n],
        &image,
        &cert.target,
        &cert.tilde_relation,
        std::slice::from_ref(cert.end()),
    )?;
    let Some(q) = q else { return Ok(false) };
    points.push(q);
    let replayed = ChainCertificate { points, ..cert.clone() };
    verify_chain(sys, &replayed)
}

/// Indices `n ≤ horizon` at which a chain connection closes along the orbit of
/// `start` in direction `word` (exact-image relations).
pub fn connection_hits<I>(
    sys: &IfsSystem,
    start: &ChainPoint,
    target: &TargetSet,
    tilde: &RelationSpec,
    word: I,
    horizon: usize,
) -> Result<HitSet>
where
    I: IntoIterator<Item = Symbol>,
{
    let mut letters = word.into_iter();
    let mut current = *start;
    let mut hits = Vec::new();
    for n in 0..=horizon {
        let Some(letter) = letters.next() else { break };
        let image = image_of(sys, Orientation::Forward, letter, &current)?;
        if close_chain(sys, Orientation::Forward, letter, &current, &image, target, tilde, &[])?.is_some() {
            hits.push(n);
        }
        current = image;
    }
    HitSet::new(hits, horizon)
}

/// Times in `[0, horizon]` at which something happened.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HitSet {
    indices: Vec<usize>,
    horizon: usize,
}

impl HitSet {
    pub fn new(mut indices: Vec<usize>, horizon: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.last().is_some_and(|&i| i > horizon) {
            return Err(Error::InvalidParameter(format!("hit index beyond horizon {horizon}")));
        }
        Ok(HitSet { indices, horizon })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

/// Largest gap in `0, h_1, …, h_m, N + 1`, where the `h_i` are the hits and
/// `N` the horizon. An empty hit set has gap `N + 1`; a set is `G`-syndetic
/// on `[0, N]` when this is at most `G`.
pub fn syndetic_max_gap(hits: &HitSet) -> usize {
    let mut prev = 0;
    let mut gap = 0;
    for &h in hits.indices.iter().chain(std::iter::once(&(hits.horizon + 1))) {
        gap = gap.max(h - prev);
        prev = h;
    }
    gap
}

/// The labeled δ-graph on an ε-net: `u →_i v` iff `d(f_i(u), v) < δ`.
#[derive(Debug, Clone)]
pub struct ChainGraph {
    sys: IfsSystem,
    net: EpsilonNet,
    delta: f64,
    /// `images[u][i] = f_{i+1}(node u)`.
    images: Vec<Vec<SpacePoint>>,
    /// Edges of `u` sorted by letter, then by target node.
    edges: Vec<Vec<(Symbol, usize)>>,
}

impl ChainGraph {
    /// Builds the graph; rejects `δ ≤ ε`.
    pub fn build(sys: &IfsSystem, delta: f64, epsilon: f64) -> Result<Self> {
        if !(delta > epsilon) {
            return Err(Error::InvalidParameter(format!(
                "δ = {delta} must exceed the net resolution ε = {epsilon}"
            )));
        }
        let net = sys.space().epsilon_net(epsilon)?;
        let rows: Vec<(Vec<SpacePoint>, Vec<(Symbol, usize)>)> = (0..net.len())
            .into_par_iter()
            .map(|u| {
                let node = net.point(u);
                let mut images = Vec::with_capacity(sys.k());
                let mut edges = Vec::new();
                for letter in sys.letters() {
                    let image = sys.apply(letter, &node)?;
                    edges.extend(net.within(&image, delta).into_iter().map(|v| (letter, v)));
                    images.push(image);
                }
                Ok((images, edges))
            })
            .collect::<Result<_>>()?;
        let (images, edges) = rows.into_iter().unzip();
        Ok(ChainGraph { sys: sys.clone(), net, delta, images, edges })
    }

    pub fn net(&self) -> &EpsilonNet {
        &self.net
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn node_count(&self) -> usize {
        self.net.len()
    }

    pub fn edges(&self, u: usize) -> &[(Symbol, usize)] {
        &self.edges[u]
    }

    /// Unlabeled successor lists (duplicates across letters removed).
    pub fn successors(&self) -> Vec<Vec<usize>> {
        self.edges
            .iter()
            .map(|e| {
                let mut s: Vec<usize> = e.iter().map(|&(_, v)| v).collect();
                s.sort_unstable();
                s.dedup();
                s
            })
            .collect()
    }

    /// Strongly connected components (iterative Tarjan), as node lists.
    pub fn components(&self) -> Vec<Vec<usize>> {
        tarjan_scc(&self.successors())
    }

    /// Nodes lying on a cycle: members of components with at least two nodes,
    /// or nodes with a self-edge. Sorted.
    pub fn recurrent_nodes(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .components()
            .into_iter()
            .filter(|c| c.len() >= 2 || self.edges[c[0]].iter().any(|&(_, v)| v == c[0]))
            .flatten()
            .collect();
        out.sort_unstable();
        out
    }

    /// Every ordered pair of nodes (including `u, u`) is joined by a path of length ≥ 1.
    pub fn is_strongly_connected(&self) -> bool {
        let comps = self.components();
        comps.len() == 1
            && (self.node_count() >= 2 || self.edges[0].iter().any(|&(_, v)| v == 0))
    }

    /// Breadth-first search for a δ-chain from `x` to `y` of length in
    /// `[1, max_len]`. The first step leaves from `x` itself, the last step
    /// lands on `y` itself, and interior points are net nodes, so the returned
    /// chain is an honest δ-chain of the system.
    pub fn reach(&self, x: &SpacePoint, y: &SpacePoint, max_len: usize) -> Result<Reachability> {
        let space = self.sys.space();
        space.check(x)?;
        space.check(y)?;
        if max_len == 0 {
            return Err(Error::InvalidParameter("max_len must be at least 1".into()));
        }
        let letters: Vec<Symbol> = self.sys.letters().collect();
        // parent[v] = (previous node or usize::MAX for x, letter)
        let mut parent: Vec<Option<(usize, Symbol)>> = vec![None; self.net.len()];
        let mut depth = vec![usize::MAX; self.net.len()];
        let mut queue = VecDeque::new();

        let finish = |last: Option<usize>, letter: Symbol, parent: &[Option<(usize, Symbol)>]| {
            let mut word = vec![letter];
            let mut nodes = Vec::new();
            let mut cur = last;
            while let Some(u) = cur {
                nodes.push(u);
                let (p, l) = parent[u].expect("visited node has a parent");
                word.push(l);
                cur = if p == usize::MAX { None } else { Some(p) };
            }
            word.reverse();
            nodes.reverse();
            let mut points = vec![ChainPoint::Single(*x)];
            points.extend(nodes.iter().map(|&u| ChainPoint::Single(self.net.point(u))));
            points.push(ChainPoint::Single(*y));
            let direction = FiniteWord::new(word);
            Reachability {
                reachable: true,
                witness: Some(direction.clone()),
                certificate: Some(ChainCertificate {
                    direction,
                    points,
                    relation: RelationSpec::DeltaImage { delta: self.delta },
                    tilde_relation: RelationSpec::DeltaImage { delta: self.delta },
                    target: TargetSet::PointSet { points: vec![*y], radius: 0.0 },
                    orientation: Orientation::Forward,
                }),
            }
        };

        for &letter in &letters {
            let image = self.sys.apply(letter, x)?;
            if space.distance(&image, y)? < self.delta {
                return Ok(finish(None, letter, &parent));
            }
        }
        if max_len >= 2 {
            for &letter in &letters {
                let image = self.sys.apply(letter, x)?;
                for v in self.net.within(&image, self.delta) {
                    if depth[v] == usize::MAX {
                        depth[v] = 1;
                        parent[v] = Some((usize::MAX, letter));
                        queue.push_back(v);
                    }
                }
            }
        }
        while let Some(u) = queue.pop_front() {
            for (i, &letter) in letters.iter().enumerate() {
                if space.distance(&self.images[u][i], y)? < self.delta {
                    return Ok(finish(Some(u), letter, &parent));
                }
            }
            if depth[u] + 2 > max_len {
                continue;
            }
            for &(letter, v) in &self.edges[u] {
                if depth[v] == usize::MAX {
                    depth[v] = depth[u] + 1;
                    parent[v] = Some((u, letter));
                    queue.push_back(v);
                }
            }
        }
        Ok(Reachability { reachable: false, witness: None, certificate: None })
    }
}

/// Result of a δ-chain reachability query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reachability {
    pub reachable: bool,
    pub witness: Option<FiniteWord>,
    pub certificate: Option<ChainCertificate>,
}

/// Tarjan's algorithm without recursion. Components are returned in the
/// order they complete (reverse topological order of the condensation).
pub fn tarjan_scc(succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = succ.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next_index = 0;
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        call.push((root, 0));
        while let Some(&mut (v, ref mut child)) = call.last_mut() {
            if *child == 0 {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = succ[v].get(*child) {
                *child += 1;
                if index[w] == usize::MAX {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                comps.push(comp);
            }
        }
    }
    comps
}

/// `x ⊣_δ y` on the ε-net graph, with a witness word when it holds.
pub fn delta_chain_reachable(
    sys: &IfsSystem,
    x: &SpacePoint,
    y: &SpacePoint,
    delta: f64,
    epsilon: f64,
    max_len: usize,
) -> Result<Reachability> {
    ChainGraph::build(sys, delta, epsilon)?.reach(x, y, max_len)
}

/// Net nodes that are δ-chain recurrent (lie on a cycle of the δ-graph).
pub fn chain_recurrent_set(sys: &IfsSystem, delta: f64, epsilon: f64) -> Result<Vec<SpacePoint>> {
    let graph = ChainGraph::build(sys, delta, epsilon)?;
    Ok(graph.recurrent_nodes().into_iter().map(|u| graph.net.point(u)).collect())
}

pub fn is_chain_transitive(sys: &IfsSystem, delta: f64, epsilon: f64) -> Result<bool> {
    Ok(ChainGraph::build(sys, delta, epsilon)?.is_strongly_connected())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::MapDescriptor;
    use crate::symbolic::ProbabilityVector;
    use std::f64::consts::PI;

    fn word(values: &[u32], k: usize) -> FiniteWord {
        FiniteWord::from_values(values, k).unwrap()
    }

    fn two_rotations() -> IfsSystem {
        IfsSystem::uniform(
            Space::Circle,
            vec![MapDescriptor::rotation(0.3).unwrap(), MapDescriptor::rotation(1.0).unwrap()],
        )
        .unwrap()
    }

    fn s(x: SpacePoint) -> ChainPoint {
        ChainPoint::Single(x)
    }

    #[test]
    fn relation_predicates() {
        let sys = two_rotations();
        let x = s(SpacePoint::circle(0.5));
        let one = Symbol::new(1, 2).unwrap();
        let y = s(sys.apply(one, x.single().unwrap()).unwrap());
        assert!(relation_holds(&sys, &RelationSpec::ExactImage { tol: 1e-9 }, one, &x, &y).unwrap());
        for delta in [1e-12, 1e-3, 1.0] {
            assert!(relation_holds(&sys, &RelationSpec::DeltaImage { delta }, one, &x, &y).unwrap());
        }
        let ball = Ball::new(SpacePoint::circle(0.5), 0.1).unwrap();
        let far = s(SpacePoint::circle(2.0));
        assert!(!relation_holds(&sys, &RelationSpec::InBall { ball }, one, &x, &far).unwrap());
        assert!(relation_holds(&sys, &RelationSpec::InBall { ball }, one, &x, &x).unwrap());
        assert!(relation_holds(&sys, &RelationSpec::pair_exact(), one, &x, &y).is_err());
        let wrong = s(SpacePoint::Interval(0.2));
        assert!(matches!(
            relation_holds(&sys, &RelationSpec::exact(), one, &x, &wrong),
            Err(Error::SpaceMismatch { .. })
        ));
    }

    #[test]
    fn single_step_certificate() {
        let sys = two_rotations();
        let x = SpacePoint::circle(0.0);
        let target = TargetSet::Ball(Ball::new(SpacePoint::circle(1.0), 0.05).unwrap());
        let cert = ChainCertificate {
            direction: word(&[2], 2),
            points: vec![s(x), s(SpacePoint::circle(1.01))],
            relation: RelationSpec::exact(),
            tilde_relation: RelationSpec::DeltaImage { delta: 0.02 },
            target,
            orientation: Orientation::Forward,
        };
        assert!(verify_chain(&sys, &cert).unwrap());
        let mut bad = cert.clone();
        bad.points.pop();
        assert!(!verify_chain(&sys, &bad).unwrap());
    }

    #[test]
    fn orbit_certificates_and_perturbation() {
        let sys = two_rotations();
        let x = SpacePoint::circle(0.2);
        let w = word(&[1, 2, 2, 1, 2, 1], 2);
        let seg = sys.iterate_forward(&w, &x, 6).unwrap();
        let cert = ChainCertificate {
            direction: w.clone(),
            points: seg.points.iter().copied().map(s).collect(),
            relation: RelationSpec::exact(),
            tilde_relation: RelationSpec::exact(),
            target: TargetSet::WholeSpace,
            orientation: Orientation::Forward,
        };
        assert!(verify_chain(&sys, &cert).unwrap());

        let delta = 0.01;
        let mut dcert = cert.clone();
        dcert.relation = RelationSpec::DeltaImage { delta };
        dcert.tilde_relation = RelationSpec::DeltaImage { delta };
        assert!(verify_chain(&sys, &dcert).unwrap());
        let moved = seg.points[3].angle().unwrap() + 10.0 * delta;
        dcert.points[3] = s(SpacePoint::circle(moved));
        assert!(!verify_chain(&sys, &dcert).unwrap());
    }

    #[test]
    fn whole_space_connects_immediately() {
        let sys = two_rotations();
        let x = s(SpacePoint::circle(1.0));
        let cert = find_chain_connection(
            &sys,
            &x,
            &TargetSet::WholeSpace,
            &RelationSpec::DeltaImage { delta: 0.1 },
            &RelationSpec::DeltaImage { delta: 0.1 },
            word(&[2, 1, 1], 2).iter(),
            2,
        )
        .unwrap()
        .unwrap();
        assert_eq!(cert.steps(), 0);
        assert!(verify_chain(&sys, &cert).unwrap());
        let exact = find_chain_connection(
            &sys,
            &x,
            &TargetSet::WholeSpace,
            &RelationSpec::exact(),
            &RelationSpec::exact(),
            word(&[2], 2).iter(),
            1,
        )
        .unwrap()
        .unwrap();
        assert_eq!(exact.steps(), 0);
    }

    #[test]
    fn constant_orbit_never_reaches_other_node() {
        let sys = IfsSystem::uniform(Space::FiniteGrid(4), vec![MapDescriptor::identity(&Space::FiniteGrid(4))]).unwrap();
        let target = TargetSet::Ball(Ball::new(SpacePoint::Grid(2), 0.5).unwrap());
        let found = find_chain_connection(
            &sys,
            &s(SpacePoint::Grid(0)),
            &target,
            &RelationSpec::DeltaImage { delta: 0.9 },
            &RelationSpec::DeltaImage { delta: 0.9 },
            std::iter::repeat(Symbol::new(1, 1).unwrap()),
            50,
        )
        .unwrap();
        assert!(found.is_none());
    }

    #[test]
    fn delta_search_finds_certified_chain() {
        // Contraction toward 0 with a target near 1: δ-slack lets the chain climb.
        let sys = IfsSystem::uniform(Space::Interval, vec![MapDescriptor::affine(0.9, 0.0).unwrap()]).unwrap();
        let target = TargetSet::Ball(Ball::new(SpacePoint::Interval(0.9), 0.02).unwrap());
        let one = Symbol::new(1, 1).unwrap();
        let cert = find_chain_connection(
            &sys,
            &s(SpacePoint::Interval(0.5)),
            &target,
            &RelationSpec::DeltaImage { delta: 0.2 },
            &RelationSpec::DeltaImage { delta: 0.2 },
            std::iter::repeat(one),
            100,
        )
        .unwrap()
        .expect("slack 0.2 beats contraction 0.9 near 1");
        assert!(verify_chain(&sys, &cert).unwrap());
        assert!(cert.steps() > 0);
        // Without slack the orbit only moves down.
        let none = find_chain_connection(
            &sys,
            &s(SpacePoint::Interval(0.5)),
            &target,
            &RelationSpec::exact(),
            &RelationSpec::exact(),
            std::iter::repeat(one),
            100,
        )
        .unwrap();
        assert!(none.is_none());
    }

    #[test]
    fn pair_connection_into_attractor_ball() {
        let p = SpacePoint::circle(0.0);
        let sys = IfsSystem::uniform(
            Space::Circle,
            vec![make_ns(p, 0.5)],
        )
        .unwrap();
        let ball = Ball::new(p, 0.01).unwrap();
        let start = ChainPoint::Pair(SpacePoint::circle(1.0), SpacePoint::circle(-2.0));
        let cert = find_chain_connection(
            &sys,
            &start,
            &TargetSet::Ball(ball),
            &RelationSpec::pair_exact(),
            &RelationSpec::PairInBall { ball, tol: 1e-9 },
            std::iter::repeat(Symbol::new(1, 1).unwrap()),
            200,
        )
        .unwrap()
        .unwrap();
        assert!(verify_chain(&sys, &cert).unwrap());
        let ChainPoint::Pair(a, b) = cert.end() else { panic!() };
        assert!(Space::Circle.distance(a, b).unwrap() < 0.02);
    }

    fn make_ns(p: SpacePoint, lambda: f64) -> MapDescriptor {
        crate::ifs::make_north_south(&Space::Circle, p, lambda).unwrap()
    }

    #[test]
    fn backward_connection_uses_inverses() {
        let sys = two_rotations();
        let target = TargetSet::Ball(Ball::new(SpacePoint::circle(-1.3), 1e-6).unwrap());
        let window = word(&[1, 2, 2], 2);
        let cert = find_backward_chain_connection(
            &sys,
            &s(SpacePoint::circle(0.0)),
            &target,
            &RelationSpec::exact(),
            &RelationSpec::exact(),
            &window,
            5,
        )
        .unwrap()
        .unwrap();
        assert_eq!(cert.steps(), 1);
        assert!(verify_chain(&sys, &cert).unwrap());
        let contraction = IfsSystem::uniform(Space::Interval, vec![MapDescriptor::affine(0.5, 0.0).unwrap()]).unwrap();
        assert!(find_backward_chain_connection(
            &contraction,
            &s(SpacePoint::Interval(0.1)),
            &TargetSet::WholeSpace,
            &RelationSpec::exact(),
            &RelationSpec::exact(),
            &word(&[1], 1),
            1
        )
        .is_err());
    }

    #[test]
    fn stability_checks() {
        let sys = two_rotations();
        let x = SpacePoint::circle(0.0);
        let cert = find_chain_connection(
            &sys,
            &s(x),
            &TargetSet::WholeSpace,
            &RelationSpec::exact(),
            &RelationSpec::exact(),
            word(&[1, 2], 2).iter(),
            1,
        )
        .unwrap()
        .unwrap();
        for r in [0.01, 1.0, 3.0] {
            assert!(check_stable_connection(&sys, &cert, r, 50, 1).unwrap().stable);
        }

        // Orbit lands in an open ball: small perturbations stay inside.
        let target = TargetSet::Ball(Ball::new(SpacePoint::circle(1.6), 0.05).unwrap());
        let w = word(&[1, 1, 2], 2);
        let cert = find_chain_connection(&sys, &s(x), &target, &RelationSpec::exact(), &RelationSpec::exact(), w.iter(), 2)
            .unwrap()
            .unwrap();
        let mut r = 0.5;
        while !check_stable_connection(&sys, &cert, r, 200, 2).unwrap().stable {
            r /= 2.0;
            assert!(r > 1e-6);
        }

        // Endpoint a hair inside the boundary: a large neighbourhood fails.
        let edge = TargetSet::Ball(Ball::new(SpacePoint::circle(1.3 + 0.05 - 1e-7), 0.05).unwrap());
        let cert = find_chain_connection(&sys, &s(x), &edge, &RelationSpec::exact(), &RelationSpec::exact(), word(&[1, 2], 2).iter(), 1)
            .unwrap()
            .unwrap();
        let verdict = check_stable_connection(&sys, &cert, 0.5, 100, 3).unwrap();
        assert!(!verdict.stable && verdict.failures > 0);
    }

    #[test]
    fn syndetic_gaps() {
        let n = 100;
        assert_eq!(syndetic_max_gap(&HitSet::new((0..=n).collect(), n).unwrap()), 1);
        assert_eq!(syndetic_max_gap(&HitSet::new((0..=n).step_by(2).collect(), n).unwrap()), 2);
        assert_eq!(syndetic_max_gap(&HitSet::new((0..=n - 1).step_by(2).collect(), n - 1).unwrap()), 2);
        assert_eq!(syndetic_max_gap(&HitSet::new(vec![0], n).unwrap()), 101);
        assert_eq!(syndetic_max_gap(&HitSet::new(vec![], n).unwrap()), 101);
        assert!(HitSet::new(vec![5], 4).is_err());
    }

    #[test]
    fn reachability_basics() {
        let sys = two_rotations();
        let x = SpacePoint::circle(0.4);
        let y = sys.apply(Symbol::new(1, 2).unwrap(), &x).unwrap();
        let r = delta_chain_reachable(&sys, &x, &y, 0.05, 0.02, 3).unwrap();
        assert_eq!(r.witness, Some(word(&[1], 2)));
        assert!(verify_chain(&sys, r.certificate.as_ref().unwrap()).unwrap());

        let grid = Space::FiniteGrid(2);
        let id = IfsSystem::uniform(grid, vec![MapDescriptor::identity(&grid)]).unwrap();
        let r = delta_chain_reachable(&id, &SpacePoint::Grid(0), &SpacePoint::Grid(1), 0.4, 0.1, 10).unwrap();
        assert!(!r.reachable);
        assert!(matches!(delta_chain_reachable(&sys, &x, &y, 0.01, 0.02, 3), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn long_witness_is_a_delta_chain() {
        let sys = two_rotations();
        let x = SpacePoint::circle(0.0);
        let y = SpacePoint::circle(PI);
        let r = delta_chain_reachable(&sys, &x, &y, 0.05, 0.02, 40).unwrap();
        let cert = r.certificate.unwrap();
        assert!(cert.direction.len() > 1);
        assert!(verify_chain(&sys, &cert).unwrap());
    }

    #[test]
    fn recurrence_with_identity_everywhere() {
        let sys = IfsSystem::new(
            Space::Circle,
            vec![MapDescriptor::rotation(0.0).unwrap(), MapDescriptor::rotation(2.0).unwrap()],
            ProbabilityVector::uniform(2).unwrap(),
        )
        .unwrap();
        let graph = ChainGraph::build(&sys, 0.1, 0.05).unwrap();
        assert_eq!(graph.recurrent_nodes().len(), graph.node_count());
    }

    #[test]
    fn contraction_recurrence_stays_near_fixed_point() {
        let sys = IfsSystem::uniform(Space::Interval, vec![MapDescriptor::affine(0.5, 0.0).unwrap()]).unwrap();
        let set = chain_recurrent_set(&sys, 0.01, 0.004).unwrap();
        assert!(!set.is_empty());
        for p in set {
            let SpacePoint::Interval(t) = p else { panic!() };
            assert!(t <= 0.02 + 1e-12, "{t}");
        }
    }

    #[test]
    fn transitivity_on_grids() {
        let g = Space::FiniteGrid(2);
        let id = IfsSystem::uniform(g, vec![MapDescriptor::identity(&g)]).unwrap();
        assert!(!is_chain_transitive(&id, 0.5, 0.1).unwrap());
        let g = Space::FiniteGrid(6);
        let cycle = IfsSystem::uniform(g, vec![MapDescriptor::permutation(vec![1, 2, 3, 4, 5, 0]).unwrap()]).unwrap();
        assert!(is_chain_transitive(&cycle, 0.5, 0.1).unwrap());
        let one = Space::FiniteGrid(1);
        let single = IfsSystem::uniform(one, vec![MapDescriptor::identity(&one)]).unwrap();
        assert!(is_chain_transitive(&single, 0.5, 0.1).unwrap());
    }

    #[test]
    fn tarjan_small_graph() {
        let succ = vec![vec![1], vec![2], vec![0, 3], vec![], vec![4]];
        let mut comps = tarjan_scc(&succ);
        comps.sort();
        assert_eq!(comps, vec![vec![0, 1, 2], vec![3], vec![4]]);
    }
}

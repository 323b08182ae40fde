//! Monte Carlo estimation over random branches.
//!
//! Trial `t` of an experiment with base seed `s` reads its word from
//! [`WordStream::for_trial`]`(weights, s, t)` and owns every other random draw
//! it makes through stream `t` of the same seed. Trials run on the rayon pool
//! and are collected in trial order, so results do not depend on the number of
//! threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::chains::{self, ChainPoint, HitSet, RelationSpec, TargetSet};
use crate::error::{Error, Result};
use crate::ifs::{make_north_south, IfsSystem, MapDescriptor};
use crate::rng;
use crate::spaces::{Space, SpacePoint};
use crate::symbolic::{ProbabilityVector, Symbol, WordStream};

/// `π(3 − √5)`, the rotation angle of the strong-proximality scenarios.
pub const GOLDEN_ANGLE: f64 = 2.399963229728653;

/// Rotation axis of the sphere scenario: generic, not through the poles.
pub const SPHERE_SCENARIO_AXIS: [f64; 3] = [0.0, 0.6, 0.8];

/// Largest word tree (`k^ℓ` leaves) searched for connection windows.
pub const WINDOW_SEARCH_CAP: u128 = 1 << 22;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum BranchProperty {
    /// A chain connection along the branch closes within `horizon` steps.
    ReachesTarget { target: TargetSet, rel: RelationSpec, tilde: RelationSpec, horizon: usize },
    /// The orbit `x_0 … x_H` comes within `ε` of every node of the `ε`-net.
    EpsDense { epsilon: f64, horizon: usize },
    /// `min_{i ≤ H} d(x_i, y_i) < tol` for the orbits of `x` and `y`.
    ProximalPair { y: SpacePoint, tol: f64, horizon: usize },
    FirstLetterIs(Symbol),
}

impl BranchProperty {
    fn label(&self) -> &'static str {
        match self {
            BranchProperty::ReachesTarget { .. } => "reaches-target",
            BranchProperty::EpsDense { .. } => "eps-dense",
            BranchProperty::ProximalPair { .. } => "proximal-pair",
            BranchProperty::FirstLetterIs(_) => "first-letter",
        }
    }

    fn parameters(&self) -> Vec<(String, String)> {
        let p = |k: &str, v: String| (k.to_string(), v);
        match self {
            BranchProperty::ReachesTarget { horizon, .. } => vec![p("horizon", horizon.to_string())],
            BranchProperty::EpsDense { epsilon, horizon } => {
                vec![p("epsilon", epsilon.to_string()), p("horizon", horizon.to_string())]
            }
            BranchProperty::ProximalPair { y, tol, horizon } => vec![
                p("y", y.to_string()),
                p("tol", tol.to_string()),
                p("horizon", horizon.to_string()),
            ],
            BranchProperty::FirstLetterIs(s) => vec![p("symbol", s.to_string())],
        }
    }
}

/// Frequency of a branch property over independent trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationReport {
    pub property: String,
    pub trials: usize,
    pub successes: usize,
    pub frequency: f64,
    pub standard_error: f64,
    pub base_seed: u64,
    pub parameters: Vec<(String, String)>,
    pub per_trial_success: Vec<bool>,
    /// Per-trial statistic (coverage fraction, minimal pair distance, hit step).
    pub per_trial: Vec<f64>,
    pub median: Option<f64>,
}

impl EstimationReport {
    fn from_trials(
        property: &str,
        base_seed: u64,
        parameters: Vec<(String, String)>,
        outcomes: Vec<(bool, f64)>,
    ) -> Self {
        let trials = outcomes.len();
        let successes = outcomes.iter().filter(|o| o.0).count();
        let frequency = successes as f64 / trials as f64;
        let (per_trial_success, per_trial): (Vec<bool>, Vec<f64>) = outcomes.into_iter().unzip();
        EstimationReport {
            property: property.to_string(),
            trials,
            successes,
            frequency,
            standard_error: (frequency * (1.0 - frequency) / trials as f64).sqrt(),
            base_seed,
            parameters,
            median: median(&per_trial),
            per_trial_success,
            per_trial,
        }
    }

    /// The frequency is within three standard errors of 0 or of 1.
    pub fn looks_zero_one(&self) -> bool {
        let band = 3.0 * self.standard_error;
        self.frequency <= band || self.frequency >= 1.0 - band
    }
}

fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

fn run_trials<F>(trials: usize, f: F) -> Result<Vec<(bool, f64)>>
where
    F: Fn(u64) -> Result<(bool, f64)> + Send + Sync,
{
    (0..trials as u64).into_par_iter().map(f).collect()
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    Ok(())
}

/// Estimates `ℙ⁺` of the branches from `x` that satisfy `prop`.
pub fn estimate_branch_probability(
    sys: &IfsSystem,
    x: &SpacePoint,
    prop: &BranchProperty,
    trials: usize,
    base_seed: u64,
) -> Result<EstimationReport> {
    check_trials(trials)?;
    sys.space().check(x)?;
    let weights = sys.weights().clone();
    let stream = |t: u64| WordStream::for_trial(weights.clone(), base_seed, t);
    let outcomes = match prop {
        BranchProperty::ReachesTarget { target, rel, tilde, horizon } => run_trials(trials, |t| {
            let cert =
                chains::find_chain_connection(sys, &ChainPoint::Single(*x), target, rel, tilde, stream(t), *horizon)?;
            Ok(match cert {
                Some(c) => (true, c.steps() as f64),
                None => (false, f64::NAN),
            })
        })?,
        BranchProperty::EpsDense { epsilon, horizon } => {
            let net = sys.space().epsilon_net(*epsilon)?;
            run_trials(trials, |t| {
                let cov = orbit_coverage(sys, x, stream(t), *horizon, &net)?;
                Ok((cov >= 1.0, cov))
            })?
        }
        BranchProperty::ProximalPair { y, tol, horizon } => {
            sys.space().check(y)?;
            run_trials(trials, |t| {
                let m = pair_min_distance(sys, x, y, stream(t), *horizon)?;
                Ok((m < *tol, m))
            })?
        }
        BranchProperty::FirstLetterIs(s) => {
            if s.index() >= sys.k() {
                return Err(Error::InvalidSymbol { symbol: s.value(), k: sys.k() });
            }
            run_trials(trials, |t| {
                let first = stream(t).next_symbol();
                Ok((first == *s, first.value() as f64))
            })?
        }
    };
    Ok(EstimationReport::from_trials(prop.label(), base_seed, prop.parameters(), outcomes))
}

/// Fraction of `net` nodes within `ε` (inclusive) of `x_0, …, x_H`.
fn orbit_coverage<I>(
    sys: &IfsSystem,
    x: &SpacePoint,
    word: I,
    horizon: usize,
    net: &crate::spaces::EpsilonNet,
) -> Result<f64>
where
    I: IntoIterator<Item = Symbol>,
{
    let space = sys.space();
    let eps = net.epsilon();
    let mut covered = vec![false; net.len()];
    let mut remaining = net.len();
    let mark = |p: &SpacePoint, covered: &mut [bool]| -> Result<usize> {
        let mut fresh = 0;
        for j in net.candidates(p, eps) {
            if !covered[j] && space.distance(p, &net.point(j))? <= eps {
                covered[j] = true;
                fresh += 1;
            }
        }
        Ok(fresh)
    };
    let mut cur = *x;
    remaining -= mark(&cur, &mut covered)?;
    for letter in word.into_iter().take(horizon) {
        if remaining == 0 {
            break;
        }
        cur = sys.apply(letter, &cur)?;
        remaining -= mark(&cur, &mut covered)?;
    }
    Ok(covered.iter().filter(|&&c| c).count() as f64 / net.len() as f64)
}

/// `min_{0 ≤ i ≤ H} d(f^i_ω x, f^i_ω y)`.
fn pair_min_distance<I>(sys: &IfsSystem, x: &SpacePoint, y: &SpacePoint, word: I, horizon: usize) -> Result<f64>
where
    I: IntoIterator<Item = Symbol>,
{
    let space = sys.space();
    let (mut a, mut b) = (*x, *y);
    let mut best = space.distance(&a, &b)?;
    for letter in word.into_iter().take(horizon) {
        if best == 0.0 {
            break;
        }
        a = sys.apply(letter, &a)?;
        b = sys.apply(letter, &b)?;
        best = best.min(space.distance(&a, &b)?);
    }
    Ok(best)
}

/// Frequency of branches whose orbit of length `H` is `ε`-dense. The per-trial
/// column holds the covered fraction of the `ε`-net.
pub fn verify_chaos_game_density(
    sys: &IfsSystem,
    x: &SpacePoint,
    epsilon: f64,
    horizon: usize,
    trials: usize,
    base_seed: u64,
) -> Result<EstimationReport> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    estimate_branch_probability(sys, x, &BranchProperty::EpsDense { epsilon, horizon }, trials, base_seed)
}

/// Frequency of branches along which `x` and `y` come closer than `tol`
/// within `H` steps. The per-trial column holds the minimal distance.
pub fn verify_proximality(
    sys: &IfsSystem,
    x: &SpacePoint,
    y: &SpacePoint,
    tol: f64,
    horizon: usize,
    trials: usize,
    base_seed: u64,
) -> Result<EstimationReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    estimate_branch_probability(sys, x, &BranchProperty::ProximalPair { y: *y, tol, horizon }, trials, base_seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailBoundRow {
    pub n: usize,
    pub miss_rate: f64,
    pub bound: f64,
    /// `bound + 3·√(bound(1 − bound)/N)`.
    pub tolerance: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailBoundReport {
    pub window: usize,
    pub p_lower: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub rows: Vec<TailBoundRow>,
    /// Sampled points from which no word of `window` letters connects.
    pub hypothesis_violations: usize,
    pub hypothesis_samples: usize,
}

impl TailBoundReport {
    pub fn all_within(&self) -> bool {
        self.rows.iter().all(|r| r.within)
    }
}

/// `(1 − p)^{1 + ⌊n/ℓ⌋}`.
pub fn tail_bound(p_lower: f64, window: usize, n: usize) -> f64 {
    (1.0 - p_lower).powi((1 + n / window) as i32)
}

/// Number of sampled points used to probe the window hypothesis.
pub const HYPOTHESIS_SAMPLES: usize = 64;

/// Empirical miss rates against the geometric tail bound.
///
/// A trial misses at `n` when its branch has no chain connection using at
/// most `n + ℓ` letters: `1 + ⌊n/ℓ⌋` disjoint windows of `ℓ` letters fit in
/// that many, and each window fails with probability at most `1 − p_lower`.
#[allow(clippy::too_many_arguments)]
pub fn tail_bound_report(
    sys: &IfsSystem,
    x: &SpacePoint,
    target: &TargetSet,
    rel: &RelationSpec,
    tilde: &RelationSpec,
    window: usize,
    horizons: &[usize],
    trials: usize,
    base_seed: u64,
) -> Result<TailBoundReport> {
    check_trials(trials)?;
    if window == 0 {
        return Err(Error::InvalidParameter("window ℓ must be at least 1".into()));
    }
    let p_lower = sys.weights().min().powi(window as i32);
    let longest = horizons.iter().copied().max().unwrap_or(0) + window;
    let weights = sys.weights().clone();
    // Connection step (letters used minus one), or None.
    let firsts: Vec<Option<usize>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let w = WordStream::for_trial(weights.clone(), base_seed, t);
            let cert = chains::find_chain_connection(sys, &ChainPoint::Single(*x), target, rel, tilde, w, longest - 1)?;
            Ok(cert.map(|c| c.steps()))
        })
        .collect::<Result<_>>()?;

    let mut samples = vec![*x];
    let mut rng = rng::stream(base_seed, u64::MAX);
    samples.extend((1..HYPOTHESIS_SAMPLES).map(|_| sys.space().sample_point(&mut rng)));
    let mut violations = 0;
    for z in &samples {
        match shortest_connection(sys, z, target, tilde, window) {
            Ok(Some(_)) => {}
            Ok(None) => violations += 1,
            Err(Error::TooLarge { .. }) => {}
            Err(e) => return Err(e),
        }
    }

    let rows = horizons
        .iter()
        .map(|&n| {
            let misses = firsts.iter().filter(|f| f.map_or(true, |s| s + 1 > n + window)).count();
            let miss_rate = misses as f64 / trials as f64;
            let bound = tail_bound(p_lower, window, n);
            let tolerance = bound + 3.0 * (bound * (1.0 - bound) / trials as f64).sqrt();
            TailBoundRow { n, miss_rate, bound, tolerance, within: miss_rate <= tolerance }
        })
        .collect();
    Ok(TailBoundReport {
        window,
        p_lower,
        trials,
        base_seed,
        rows,
        hypothesis_violations: violations,
        hypothesis_samples: samples.len(),
    })
}

/// Fewest letters of any word that closes an exact-image chain connection
/// from `z` into `target`, searching words of at most `max_letters` letters.
pub fn shortest_connection(
    sys: &IfsSystem,
    z: &SpacePoint,
    target: &TargetSet,
    tilde: &RelationSpec,
    max_letters: usize,
) -> Result<Option<usize>> {
    let k = sys.k() as u128;
    let leaves = k.checked_pow(max_letters.saturating_sub(1) as u32).unwrap_or(u128::MAX);
    if leaves > WINDOW_SEARCH_CAP {
        return Err(Error::TooLarge { required: leaves, cap: WINDOW_SEARCH_CAP as usize });
    }
    let mut level = vec![*z];
    for letters in 1..=max_letters {
        for p in &level {
            if closes_from(sys, p, target, tilde)? {
                return Ok(Some(letters));
            }
        }
        if letters < max_letters {
            level = expand(sys, &level)?;
        }
    }
    Ok(None)
}

fn expand(sys: &IfsSystem, level: &[SpacePoint]) -> Result<Vec<SpacePoint>> {
    let mut next = Vec::with_capacity(level.len() * sys.k());
    for p in level {
        for letter in sys.letters() {
            next.push(sys.apply(letter, p)?);
        }
    }
    Ok(next)
}

/// Some final letter closes a connection from `p` (no further `𝓔` steps).
fn closes_from(sys: &IfsSystem, p: &SpacePoint, target: &TargetSet, tilde: &RelationSpec) -> Result<bool> {
    for letter in sys.letters() {
        let here = ChainPoint::Single(*p);
        let image = ChainPoint::Single(sys.apply(letter, p)?);
        if target.contains(sys.space(), &image)? && chains::relation_holds(sys, tilde, letter, &here, &image)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Smallest `ℓ ≤ max_window` such that from every sample point some word of at
/// most `ℓ` letters closes a connection into `target`; `None` if some sample
/// needs more.
pub fn smallest_window(
    sys: &IfsSystem,
    samples: &[SpacePoint],
    target: &TargetSet,
    tilde: &RelationSpec,
    max_window: usize,
) -> Result<Option<usize>> {
    let needs: Vec<Option<usize>> = samples
        .par_iter()
        .map(|z| shortest_connection(sys, z, target, tilde, max_window))
        .collect::<Result<_>>()?;
    Ok(needs.into_iter().try_fold(1, |acc, n| n.map(|n| acc.max(n))))
}

/// Hit set of a branch in the sense of syndetic chain connections: `i` is a
/// hit when some word agreeing with the branch on its first `i − j` letters,
/// `0 ≤ j < ℓ`, closes a connection at step `i`. The free tail of at most `ℓ`
/// letters is searched exhaustively.
pub fn branch_hit_set<I>(
    sys: &IfsSystem,
    x: &SpacePoint,
    target: &TargetSet,
    tilde: &RelationSpec,
    word: I,
    horizon: usize,
    window: usize,
) -> Result<HitSet>
where
    I: IntoIterator<Item = Symbol>,
{
    if window == 0 {
        return Err(Error::InvalidParameter("window ℓ must be at least 1".into()));
    }
    let mut hit = vec![false; horizon + 1];
    let mut letters = word.into_iter();
    let mut cur = *x;
    for m in 0..=horizon {
        let last = (m + window - 1).min(horizon);
        let mut level = vec![cur];
        for i in m..=last {
            if hit[i..=last].iter().all(|&h| h) {
                break;
            }
            if !hit[i] {
                for p in &level {
                    if closes_from(sys, p, target, tilde)? {
                        hit[i] = true;
                        break;
                    }
                }
            }
            if i < last {
                level = expand(sys, &level)?;
            }
        }
        match letters.next() {
            Some(letter) => cur = sys.apply(letter, &cur)?,
            None => break,
        }
    }
    HitSet::new(hit.iter().enumerate().filter(|(_, h)| **h).map(|(i, _)| i).collect(), horizon)
}

/// Two-map system `{rotation(α), north-south toward p with rate λ}` with
/// uniform weights. On the circle `p = 0`; on the sphere `p` is the north pole
/// and the rotation is about [`SPHERE_SCENARIO_AXIS`].
pub fn build_theorem_c_scenario(space: &Space, lambda: f64, alpha: f64) -> Result<IfsSystem> {
    if !alpha.is_finite() {
        return Err(Error::InvalidParameter("rotation angle must be finite".into()));
    }
    let (rotation, p) = match space {
        Space::Circle => (MapDescriptor::rotation(alpha)?, SpacePoint::circle(0.0)),
        Space::Sphere2 => (
            MapDescriptor::sphere_rotation(SPHERE_SCENARIO_AXIS, alpha)?,
            SpacePoint::sphere([0.0, 0.0, 1.0])?,
        ),
        _ => return Err(Error::InvalidParameter("the scenario lives on the circle or the sphere".into())),
    };
    IfsSystem::new(*space, vec![rotation, make_north_south(space, p, lambda)?], ProbabilityVector::uniform(2)?)
}

/// The attracting fixed point of the scenario's north-south map.
pub fn theorem_c_attractor(space: &Space) -> Result<SpacePoint> {
    match space {
        Space::Circle => Ok(SpacePoint::circle(0.0)),
        Space::Sphere2 => SpacePoint::sphere([0.0, 0.0, 1.0]),
        _ => Err(Error::InvalidParameter("the scenario lives on the circle or the sphere".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimalityProbe {
    pub points: usize,
    pub epsilon: f64,
    pub steps: usize,
    pub dense: usize,
    /// Covered fraction of the net, per starting point.
    pub coverage: Vec<f64>,
}

impl MinimalityProbe {
    pub fn passed(&self) -> bool {
        self.dense == self.points
    }
}

/// Runs backward orbits (random inverse words) from `points` random starts and
/// checks that each is `ε`-dense within `steps` steps.
pub fn backward_minimality_probe(
    sys: &IfsSystem,
    points: usize,
    epsilon: f64,
    steps: usize,
    seed: u64,
) -> Result<MinimalityProbe> {
    let inverse = sys.inverse_system()?;
    let net = sys.space().epsilon_net(epsilon)?;
    let mut rng = rng::stream(seed, u64::MAX);
    let starts: Vec<SpacePoint> = (0..points).map(|_| sys.space().sample_point(&mut rng)).collect();
    let coverage: Vec<f64> = starts
        .par_iter()
        .enumerate()
        .map(|(t, z)| {
            let w = WordStream::for_trial(inverse.weights().clone(), seed, t as u64);
            orbit_coverage(&inverse, z, w, steps, &net)
        })
        .collect::<Result<_>>()?;
    Ok(MinimalityProbe {
        points,
        epsilon,
        steps,
        dense: coverage.iter().filter(|&&c| c >= 1.0).count(),
        coverage,
    })
}

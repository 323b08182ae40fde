//! The run configuration file.
//!
//! A config is plain text made of `[section]` headers and `key = value`
//! lines. Blank lines and lines whose first non-blank character is `#` are
//! ignored; there are no trailing comments, since `#` also starts grid points.
//! Keys may repeat only where noted (`map`, `pair`). See the README for the
//! keys of each section.

use std::fmt::Write as _;

use ifs_lab::{
    make_north_south, Ball, IfsSystem, MapDescriptor, ProbabilityVector, RelationSpec, Space, SpacePoint,
    Symbol, TargetSet,
};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

/// The config as written, kept for echoing into reports.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawConfig {
    sections: Vec<Section>,
}

const SECTIONS: [&str; 4] = ["system", "scenario", "render", "output"];

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: Vec<Section> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::parse(line, "section header must end with ']'"))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(CliError::parse(line, format!("unknown section [{name}]")));
                }
                if sections.iter().any(|sec| sec.name == name) {
                    return Err(CliError::parse(line, format!("section [{name}] appears twice")));
                }
                sections.push(Section { name: name.to_string(), line, entries: Vec::new() });
                continue;
            }
            let (key, value) = s
                .split_once('=')
                .ok_or_else(|| CliError::parse(line, format!("expected `key = value`, found {s:?}")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(CliError::parse(line, "empty key"));
            }
            let section = sections
                .last_mut()
                .ok_or_else(|| CliError::parse(line, "key outside of any section"))?;
            section.entries.push(Entry { key: key.to_string(), value: value.trim().to_string(), line });
        }
        Ok(RawConfig { sections })
    }

    /// Sets (or adds) a single-valued key.
    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        let idx = match self.sections.iter().position(|s| s.name == section) {
            Some(i) => i,
            None => {
                self.sections.push(Section { name: section.to_string(), line: 0, entries: Vec::new() });
                self.sections.len() - 1
            }
        };
        let sec = &mut self.sections[idx];
        match sec.entries.iter_mut().find(|e| e.key == key) {
            Some(e) => e.value = value.to_string(),
            None => sec.entries.push(Entry { key: key.to_string(), value: value.to_string(), line: 0 }),
        }
    }

    /// Canonical text: sections and keys in their original order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, sec) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "[{}]", sec.name);
            for e in &sec.entries {
                let _ = writeln!(out, "{} = {}", e.key, e.value);
            }
        }
        out
    }

    fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }
}

/// Key lookup inside one section; rejects keys nobody asked for.
struct Fields<'a> {
    section: &'a str,
    header_line: usize,
    entries: &'a [Entry],
    used: Vec<bool>,
}

impl<'a> Fields<'a> {
    fn new(raw: &'a RawConfig, section: &'a str) -> Self {
        let (entries, header_line) = match raw.section(section) {
            Some(s) => (s.entries.as_slice(), s.line),
            None => (&[][..], 0),
        };
        Fields { section, header_line, entries, used: vec![false; entries.len()] }
    }

    fn all(&mut self, key: &str) -> Vec<&'a Entry> {
        let mut out = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            if e.key == key {
                self.used[i] = true;
                out.push(e);
            }
        }
        out
    }

    fn get(&mut self, key: &str) -> Result<Option<&'a Entry>> {
        let found = self.all(key);
        match found.as_slice() {
            [] => Ok(None),
            [e] => Ok(Some(*e)),
            [_, e, ..] => Err(CliError::parse(e.line, format!("`{key}` given more than once"))),
        }
    }

    fn require(&mut self, key: &str) -> Result<&'a Entry> {
        self.get(key)?.ok_or_else(|| {
            CliError::parse(self.header_line, format!("[{}] is missing `{key}`", self.section))
        })
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.get(key)? {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|_| CliError::parse(e.line, format!("cannot read `{key}` from {:?}", e.value))),
        }
    }

    fn parse_or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn require_parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        self.require(key)?;
        Ok(self.parse(key)?.expect("present"))
    }

    fn point(&mut self, space: &Space, key: &str) -> Result<Option<SpacePoint>> {
        match self.get(key)? {
            None => Ok(None),
            Some(e) => space.parse_point(&e.value).map(Some).map_err(|err| at(e.line, err)),
        }
    }

    fn finish(self) -> Result<()> {
        for (e, used) in self.entries.iter().zip(&self.used) {
            if !used {
                return Err(CliError::parse(e.line, format!("unknown key `{}` in [{}]", e.key, self.section)));
            }
        }
        Ok(())
    }
}

fn at(line: usize, err: ifs_lab::Error) -> CliError {
    CliError::parse(line, err.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    ChaosGame,
    Chains,
    Recurrent,
    Proximal,
    Estimate,
    TheoremB,
    Render,
    TailBound,
}

impl ScenarioKind {
    fn parse(text: &str) -> Option<Self> {
        Some(match text {
            "chaos-game" => ScenarioKind::ChaosGame,
            "chains" => ScenarioKind::Chains,
            "recurrent" => ScenarioKind::Recurrent,
            "proximal" => ScenarioKind::Proximal,
            "estimate" => ScenarioKind::Estimate,
            "theorem-b" => ScenarioKind::TheoremB,
            "render" => ScenarioKind::Render,
            "tail-bound" => ScenarioKind::TailBound,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::ChaosGame => "chaos-game",
            ScenarioKind::Chains => "chains",
            ScenarioKind::Recurrent => "recurrent",
            ScenarioKind::Proximal => "proximal",
            ScenarioKind::Estimate => "estimate",
            ScenarioKind::TheoremB => "theorem-b",
            ScenarioKind::Render => "render",
            ScenarioKind::TailBound => "tail-bound",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Property {
    FirstLetter(Symbol),
    ReachesTarget { target: TargetSet, rel: RelationSpec, tilde: RelationSpec, horizon: usize },
    EpsDense { epsilon: f64, horizon: usize },
    ProximalPair { y: SpacePoint, tol: f64, horizon: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Window {
    Fixed(usize),
    /// Smallest window found on sampled points, searching up to `max`.
    Auto { max: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub points: usize,
    pub epsilon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    ChaosGame { start: SpacePoint, epsilon: f64, horizon: usize },
    Estimate { start: SpacePoint, property: Property },
    Proximal {
        pairs: Vec<(SpacePoint, SpacePoint)>,
        random_pairs: usize,
        tol: f64,
        horizon: usize,
        probe: Option<Probe>,
    },
    TailBound {
        start: SpacePoint,
        target: Ball,
        window: Window,
        /// Explicit horizons; when empty, `ℓ, 2ℓ, …, 10ℓ`.
        horizons: Vec<usize>,
        syndetic_branches: usize,
        syndetic_horizon: usize,
    },
    Chains { from: SpacePoint, to: SpacePoint, delta: f64, epsilon: f64, max_len: usize },
    Recurrent { delta: f64, epsilon: f64 },
    TheoremB { alphabet: usize, length: usize },
    Render,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderSpec {
    pub start: Option<SpacePoint>,
    pub steps: usize,
    pub burn_in: usize,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: Option<String>,
    /// Record wall-clock time in the summary (breaks byte-identical reruns).
    pub timing: bool,
}

/// A fully validated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    raw: RawConfig,
    pub kind: ScenarioKind,
    pub system: Option<IfsSystem>,
    pub scenario: Scenario,
    pub seed: u64,
    pub trials: usize,
    pub render: RenderSpec,
    pub output: OutputSpec,
}

pub const DEFAULT_TRIALS: usize = 100;
pub const MAX_RENDER_SIDE: usize = 8192;

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_raw(RawConfig::parse(text)?)
    }

    /// Re-validates with `--seed` / `--trials` written into the config, so the
    /// echo reproduces the run.
    pub fn with_overrides(self, seed: Option<u64>, trials: Option<usize>) -> Result<Self> {
        if seed.is_none() && trials.is_none() {
            return Ok(self);
        }
        let mut raw = self.raw;
        if let Some(s) = seed {
            raw.set("scenario", "seed", &s.to_string());
        }
        if let Some(t) = trials {
            raw.set("scenario", "trials", &t.to_string());
        }
        Self::from_raw(raw)
    }

    pub fn echo(&self) -> String {
        self.raw.to_text()
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        let parsed_system = raw.section("system").map(|_| parse_system(&raw)).transpose()?;
        let mut sc = Fields::new(&raw, "scenario");
        if raw.section("scenario").is_none() {
            return Err(CliError::Invalid("missing [scenario] section".into()));
        }
        let kind_entry = sc.require("kind")?;
        let kind = ScenarioKind::parse(&kind_entry.value)
            .ok_or_else(|| CliError::parse(kind_entry.line, format!("unknown scenario kind {:?}", kind_entry.value)))?;
        let seed = sc.parse_or("seed", 0u64)?;
        let trials = sc.parse_or("trials", DEFAULT_TRIALS)?;
        if trials == 0 {
            return Err(CliError::Invalid("trials must be at least 1".into()));
        }

        let system = match (kind, parsed_system) {
            (ScenarioKind::TheoremB, None) => None,
            (_, None) => return Err(CliError::Invalid("missing [system] section".into())),
            (_, Some(sys)) => Some(sys),
        };

        let scenario = match &system {
            Some(sys) => parse_scenario(kind, &mut sc, sys)?,
            None => parse_scenario_without_system(kind, &mut sc)?,
        };
        sc.finish()?;

        let mut rf = Fields::new(&raw, "render");
        let render = RenderSpec {
            start: match &system {
                Some(sys) => rf.point(sys.space(), "start")?,
                None => None,
            },
            steps: rf.parse_or("steps", 100_000)?,
            burn_in: rf.parse_or("burn_in", 100)?,
            width: rf.parse_or("width", 256)?,
            height: rf.parse_or("height", 256)?,
        };
        rf.finish()?;
        if render.width == 0 || render.height == 0 || render.width > MAX_RENDER_SIDE || render.height > MAX_RENDER_SIDE {
            return Err(CliError::Invalid(format!("image size must be between 1 and {MAX_RENDER_SIDE}")));
        }

        let mut of = Fields::new(&raw, "output");
        let output = OutputSpec {
            dir: of.get("dir")?.map(|e| e.value.clone()),
            timing: of.parse_or("timing", false)?,
        };
        of.finish()?;

        Ok(RunConfig { raw, kind, system, scenario, seed, trials, render, output })
    }
}

fn parse_system(raw: &RawConfig) -> Result<IfsSystem> {
    let mut f = Fields::new(raw, "system");
    let space_entry = f.require("space")?;
    let space = parse_space(&space_entry.value).map_err(|m| CliError::parse(space_entry.line, m))?;
    let maps_entries = f.all("map");
    if maps_entries.is_empty() {
        return Err(CliError::parse(f.header_line, "[system] needs at least one `map`"));
    }
    let maps = maps_entries
        .iter()
        .map(|e| parse_map(&space, &e.value).map_err(|m| CliError::parse(e.line, m)))
        .collect::<Result<Vec<_>>>()?;
    let weights = match f.get("weights")? {
        Some(e) => {
            let w = parse_list::<f64>(&e.value).map_err(|m| CliError::parse(e.line, m))?;
            if w.len() != maps.len() {
                return Err(CliError::parse(
                    e.line,
                    format!("{} weights for {} maps", w.len(), maps.len()),
                ));
            }
            ProbabilityVector::new(w).map_err(|err| at(e.line, err))?
        }
        None => ProbabilityVector::uniform(maps.len())?,
    };
    f.finish()?;
    Ok(IfsSystem::new(space, maps, weights)?)
}

fn parse_space(text: &str) -> std::result::Result<Space, String> {
    let mut parts = text.split_whitespace();
    let space = match (parts.next(), parts.next()) {
        (Some("circle"), None) => Space::Circle,
        (Some("sphere"), None) => Space::Sphere2,
        (Some("interval"), None) => Space::Interval,
        (Some("grid"), Some(n)) => {
            let n: usize = n.parse().map_err(|_| format!("grid size {n:?} is not a number"))?;
            Space::grid(n).map_err(|e| e.to_string())?
        }
        _ => return Err(format!("unknown space {text:?} (circle, sphere, interval, grid <n>)")),
    };
    if parts.next().is_some() {
        return Err(format!("unknown space {text:?}"));
    }
    Ok(space)
}

fn parse_list<T: std::str::FromStr>(text: &str) -> std::result::Result<Vec<T>, String> {
    text.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| format!("cannot read {:?} in list {text:?}", s.trim())))
        .collect()
}

/// `name{key = value; key = value}`.
fn parse_map(space: &Space, text: &str) -> std::result::Result<MapDescriptor, String> {
    let (name, rest) = text.split_once('{').ok_or_else(|| format!("map {text:?} must look like name{{key = value; …}}"))?;
    let body = rest.trim_end().strip_suffix('}').ok_or_else(|| format!("map {text:?} is missing '}}'"))?;
    let name = name.trim();
    let mut params: Vec<(&str, &str)> = Vec::new();
    for part in body.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("map parameter {part:?} needs `key = value`"))?;
        params.push((k.trim(), v.trim()));
    }
    let allowed: &[&str] = match name {
        "rotation" => &["alpha"],
        "affine" => &["a", "b"],
        "north_south" => &["p", "lambda"],
        "sphere_rotation" => &["axis", "alpha"],
        "permutation" => &["cycles"],
        _ => return Err(format!("unknown map {name:?}")),
    };
    for (k, _) in &params {
        if !allowed.contains(k) {
            return Err(format!("{name} has no parameter `{k}` (expects {})", allowed.join(", ")));
        }
    }
    let get = |k: &str| params.iter().rev().find(|(key, _)| *key == k).map(|(_, v)| *v);
    let need = |k: &str| get(k).ok_or_else(|| format!("{name} is missing `{k}`"));
    let num = |k: &str| -> std::result::Result<f64, String> {
        let v = need(k)?;
        v.parse().map_err(|_| format!("{name}: cannot read `{k}` from {v:?}"))
    };
    let map = match name {
        "rotation" => MapDescriptor::rotation(num("alpha")?),
        "affine" => MapDescriptor::affine(num("a")?, num("b")?),
        "north_south" => {
            let p = space.parse_point(need("p")?).map_err(|e| e.to_string())?;
            make_north_south(space, p, num("lambda")?)
        }
        "sphere_rotation" => {
            let axis = parse_list::<f64>(need("axis")?)?;
            let axis: [f64; 3] = axis.try_into().map_err(|_| "axis needs three components".to_string())?;
            MapDescriptor::sphere_rotation(axis, num("alpha")?)
        }
        "permutation" => {
            let Space::FiniteGrid(n) = space else {
                return Err("permutation maps need a grid space".into());
            };
            let cycles = parse_cycles(get("cycles").unwrap_or(""))?;
            MapDescriptor::permutation_from_cycles(*n, &cycles)
        }
        _ => unreachable!(),
    }
    .map_err(|e| e.to_string())?;
    map.check_space(space).map_err(|e| e.to_string())?;
    Ok(map)
}

/// `(0 1 2)(3 4)`; the empty string is the identity.
fn parse_cycles(text: &str) -> std::result::Result<Vec<Vec<usize>>, String> {
    let mut cycles = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let inner = rest.strip_prefix('(').ok_or_else(|| format!("cycles {text:?} must look like (0 1 2)(3 4)"))?;
        let (body, tail) = inner.split_once(')').ok_or_else(|| format!("unclosed cycle in {text:?}"))?;
        let cycle = body
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|_| format!("cannot read node {s:?} in {text:?}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if !cycle.is_empty() {
            cycles.push(cycle);
        }
        rest = tail.trim_start();
    }
    Ok(cycles)
}

fn default_start(space: &Space) -> SpacePoint {
    match space {
        Space::Circle => SpacePoint::Circle(0.0),
        Space::Sphere2 => SpacePoint::Sphere2([0.0, 0.0, 1.0]),
        Space::Interval => SpacePoint::Interval(0.0),
        Space::FiniteGrid(_) => SpacePoint::Grid(0),
    }
}

fn positive(f: &mut Fields, key: &str) -> Result<f64> {
    let e = f.require(key)?;
    let v: f64 = f.require_parse(key)?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(CliError::parse(e.line, format!("`{key}` must be positive")));
    }
    Ok(v)
}

fn parse_relation(f: &mut Fields, key: &str, default: &str, target: Option<Ball>) -> Result<RelationSpec> {
    let (text, line) = match f.get(key)? {
        Some(e) => (e.value.as_str(), e.line),
        None => (default, f.header_line),
    };
    match text {
        "exact" => Ok(RelationSpec::exact()),
        "delta" => Ok(RelationSpec::DeltaImage { delta: positive(f, "delta")? }),
        "in-ball" => match target {
            Some(ball) => Ok(RelationSpec::InBall { ball }),
            None => Err(CliError::parse(line, "`in-ball` needs target_center and target_radius")),
        },
        other => Err(CliError::parse(line, format!("unknown relation {other:?} (exact, delta, in-ball)"))),
    }
}

fn parse_target(f: &mut Fields, space: &Space) -> Result<Option<Ball>> {
    let center = f.point(space, "target_center")?;
    let radius: Option<f64> = f.parse("target_radius")?;
    match (center, radius) {
        (Some(c), Some(r)) => Ok(Some(Ball::new(c, r).map_err(|e| CliError::Invalid(e.to_string()))?)),
        (None, None) => Ok(None),
        _ => Err(CliError::Invalid("target_center and target_radius go together".into())),
    }
}

fn parse_scenario(kind: ScenarioKind, f: &mut Fields, sys: &IfsSystem) -> Result<Scenario> {
    let space = *sys.space();
    let start = f.point(&space, "start")?.unwrap_or_else(|| default_start(&space));
    Ok(match kind {
        ScenarioKind::ChaosGame => Scenario::ChaosGame {
            start,
            epsilon: positive(f, "epsilon")?,
            horizon: f.require_parse("horizon")?,
        },
        ScenarioKind::Estimate => {
            let e = f.require("property")?;
            let property = match e.value.as_str() {
                "first-letter" => {
                    let v: u32 = f.require_parse("symbol")?;
                    Property::FirstLetter(Symbol::new(v, sys.k()).map_err(|err| CliError::Invalid(err.to_string()))?)
                }
                "reaches-target" => {
                    let ball = parse_target(f, &space)?;
                    let target = ball.map_or(TargetSet::WholeSpace, TargetSet::Ball);
                    Property::ReachesTarget {
                        rel: parse_relation(f, "relation", "exact", ball)?,
                        tilde: parse_relation(f, "tilde", "exact", ball)?,
                        target,
                        horizon: f.require_parse("horizon")?,
                    }
                }
                "eps-dense" => Property::EpsDense { epsilon: positive(f, "epsilon")?, horizon: f.require_parse("horizon")? },
                "proximal-pair" => {
                    f.require("partner")?;
                    Property::ProximalPair {
                        y: f.point(&space, "partner")?.expect("required"),
                        tol: positive(f, "tol")?,
                        horizon: f.require_parse("horizon")?,
                    }
                }
                other => {
                    return Err(CliError::parse(
                        e.line,
                        format!("unknown property {other:?} (first-letter, reaches-target, eps-dense, proximal-pair)"),
                    ))
                }
            };
            if let Property::ReachesTarget { rel: RelationSpec::DeltaImage { delta }, .. } = &property {
                // The δ search runs on a δ/2 net.
                space.epsilon_net(chains_net(*delta))?;
            }
            Scenario::Estimate { start, property }
        }
        ScenarioKind::Proximal => {
            let mut pairs = Vec::new();
            for e in f.all("pair") {
                let (a, b) = e
                    .value
                    .split_once(';')
                    .ok_or_else(|| CliError::parse(e.line, "pair must look like `x ; y`"))?;
                let a = space.parse_point(a).map_err(|err| at(e.line, err))?;
                let b = space.parse_point(b).map_err(|err| at(e.line, err))?;
                pairs.push((a, b));
            }
            let random_pairs = f.parse_or("random_pairs", 0usize)?;
            if pairs.is_empty() && random_pairs == 0 {
                return Err(CliError::Invalid("proximal scenario needs `pair` lines or `random_pairs`".into()));
            }
            let probe = if f.parse_or("probe", false)? {
                let p = Probe {
                    points: f.parse_or("probe_points", 20)?,
                    epsilon: f.parse_or("probe_epsilon", 0.05)?,
                    steps: f.parse_or("probe_steps", 10_000)?,
                };
                if !sys.is_invertible() {
                    return Err(CliError::Invalid("the backward probe needs invertible maps".into()));
                }
                space.epsilon_net(p.epsilon)?;
                Some(p)
            } else {
                None
            };
            Scenario::Proximal { pairs, random_pairs, tol: positive(f, "tol")?, horizon: f.require_parse("horizon")?, probe }
        }
        ScenarioKind::TailBound => {
            let target = parse_target(f, &space)?
                .ok_or_else(|| CliError::Invalid("tail-bound needs target_center and target_radius".into()))?;
            let window = match f.get("window")? {
                None => Window::Auto { max: f.parse_or("window_max", 20)? },
                Some(e) if e.value == "auto" => Window::Auto { max: f.parse_or("window_max", 20)? },
                Some(e) => Window::Fixed(
                    e.value.parse().ok().filter(|&l: &usize| l > 0).ok_or_else(|| {
                        CliError::parse(e.line, format!("window must be a positive integer or `auto`, found {:?}", e.value))
                    })?,
                ),
            };
            let horizons = match f.get("horizons")? {
                Some(e) => parse_list::<usize>(&e.value).map_err(|m| CliError::parse(e.line, m))?,
                None => Vec::new(),
            };
            Scenario::TailBound {
                start,
                target,
                window,
                horizons,
                syndetic_branches: f.parse_or("syndetic_branches", 0)?,
                syndetic_horizon: f.parse_or("syndetic_horizon", 2000)?,
            }
        }
        ScenarioKind::Chains | ScenarioKind::Recurrent => {
            let delta = positive(f, "delta")?;
            let epsilon = positive(f, "epsilon")?;
            if delta <= epsilon {
                return Err(CliError::Invalid(format!("δ = {delta} must exceed ε = {epsilon}")));
            }
            space.epsilon_net(epsilon)?;
            if kind == ScenarioKind::Recurrent {
                Scenario::Recurrent { delta, epsilon }
            } else {
                f.require("to")?;
                Scenario::Chains {
                    from: f.point(&space, "from")?.unwrap_or(start),
                    to: f.point(&space, "to")?.expect("required"),
                    delta,
                    epsilon,
                    max_len: f.parse_or("max_len", 100)?,
                }
            }
        }
        ScenarioKind::TheoremB => parse_scenario_without_system(kind, f)?,
        ScenarioKind::Render => Scenario::Render,
    })
}

fn chains_net(delta: f64) -> f64 {
    ifs_lab::chains::default_net_resolution(delta)
}

fn parse_scenario_without_system(kind: ScenarioKind, f: &mut Fields) -> Result<Scenario> {
    match kind {
        ScenarioKind::TheoremB => {
            let alphabet: usize = f.require_parse("alphabet")?;
            let length: usize = f.require_parse("length")?;
            if alphabet == 0 || length == 0 {
                return Err(CliError::Invalid("alphabet and length must be at least 1".into()));
            }
            let letters = (alphabet as u128).checked_pow(length as u32).and_then(|n| n.checked_mul(length as u128));
            if letters.map_or(true, |n| n > ifs_lab::symbolic::UNIVERSAL_WORD_CAP as u128) {
                return Err(ifs_lab::Error::TooLarge {
                    required: letters.unwrap_or(u128::MAX),
                    cap: ifs_lab::symbolic::UNIVERSAL_WORD_CAP,
                }
                .into());
            }
            Ok(Scenario::TheoremB { alphabet, length })
        }
        _ => Err(CliError::Invalid(format!("scenario {} needs a [system] section", kind.name()))),
    }
}

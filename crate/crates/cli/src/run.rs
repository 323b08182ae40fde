use std::path::{Path, PathBuf};
use std::time::Instant;

use ifs_lab::chains::{self, ChainGraph};
use ifs_lab::stochastic::{self, BranchProperty, EstimationReport};
use ifs_lab::symbolic::{find_cylinder_occurrence, universal_word};
use ifs_lab::{ChainPoint, Cylinder, FiniteWord, IfsSystem, RelationSpec, Space, SpacePoint, TargetSet, WordStream};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Property, RunConfig, Scenario, Window};
use crate::error::{CliError, Result};
use crate::render::render_attractor;
use crate::report::{write_report, ReportBundle, RunInfo, Table};

/// Random points used by the window helper besides the start point.
pub const WINDOW_SAMPLES: usize = 512;

fn f(x: f64) -> String {
    x.to_string()
}

fn sys_of(cfg: &RunConfig) -> &IfsSystem {
    cfg.system.as_ref().expect("validated: scenario has a system")
}

/// Runs the scenario of a validated config.
pub fn run_config(cfg: &RunConfig) -> Result<ReportBundle> {
    match &cfg.scenario {
        Scenario::ChaosGame { start, epsilon, horizon } => {
            let r = stochastic::verify_chaos_game_density(sys_of(cfg), start, *epsilon, *horizon, cfg.trials, cfg.seed)?;
            Ok(estimation_bundle(&r, "coverage", &[("epsilon", f(*epsilon)), ("horizon", horizon.to_string())]))
        }
        Scenario::Estimate { start, property } => {
            let prop = match property {
                Property::FirstLetter(s) => BranchProperty::FirstLetterIs(*s),
                Property::ReachesTarget { target, rel, tilde, horizon } => BranchProperty::ReachesTarget {
                    target: target.clone(),
                    rel: *rel,
                    tilde: *tilde,
                    horizon: *horizon,
                },
                Property::EpsDense { epsilon, horizon } => BranchProperty::EpsDense { epsilon: *epsilon, horizon: *horizon },
                Property::ProximalPair { y, tol, horizon } => {
                    BranchProperty::ProximalPair { y: *y, tol: *tol, horizon: *horizon }
                }
            };
            let r = stochastic::estimate_branch_probability(sys_of(cfg), start, &prop, cfg.trials, cfg.seed)?;
            Ok(estimation_bundle(&r, "value", &[]))
        }
        Scenario::Proximal { pairs, random_pairs, tol, horizon, probe } => {
            run_proximal(cfg, pairs, *random_pairs, *tol, *horizon, probe.as_ref())
        }
        Scenario::TailBound { start, target, window, horizons, syndetic_branches, syndetic_horizon } => {
            run_tail_bound(cfg, start, target, window, horizons, *syndetic_branches, *syndetic_horizon)
        }
        Scenario::Chains { from, to, delta, epsilon, max_len } => run_chains(cfg, from, to, *delta, *epsilon, *max_len),
        Scenario::Recurrent { delta, epsilon } => run_recurrent(cfg, *delta, *epsilon),
        Scenario::TheoremB { alphabet, length } => run_theorem_b(*alphabet, *length),
        Scenario::Render => render_bundle(cfg),
    }
}

/// Renders the system's chaos game with the `[render]` settings.
pub fn render_bundle(cfg: &RunConfig) -> Result<ReportBundle> {
    let sys = cfg
        .system
        .as_ref()
        .ok_or_else(|| CliError::Invalid("rendering needs a [system] section".into()))?;
    let r = &cfg.render;
    let start = r.start.unwrap_or_else(|| match cfg.scenario {
        Scenario::ChaosGame { start, .. } | Scenario::Estimate { start, .. } | Scenario::TailBound { start, .. } => start,
        _ => default_point(sys.space()),
    });
    let img = render_attractor(sys, &start, cfg.seed, r.steps, r.burn_in, r.width, r.height)?;
    let lit = img.pixels.iter().filter(|p| **p != [0, 0, 0]).count();
    Ok(ReportBundle {
        results: json!({
            "start": start.to_string(),
            "steps": r.steps,
            "burn_in": r.burn_in,
            "width": r.width,
            "height": r.height,
            "pixels_lit": lit,
        }),
        image: Some(img),
        ..Default::default()
    })
}

fn default_point(space: &Space) -> SpacePoint {
    match space {
        Space::Circle => SpacePoint::Circle(0.0),
        Space::Sphere2 => SpacePoint::Sphere2([0.0, 0.0, 1.0]),
        Space::Interval => SpacePoint::Interval(0.0),
        Space::FiniteGrid(_) => SpacePoint::Grid(0),
    }
}

fn estimation_json(r: &EstimationReport) -> Value {
    json!({
        "property": r.property,
        "trials": r.trials,
        "successes": r.successes,
        "frequency": r.frequency,
        "standard_error": r.standard_error,
        "base_seed": r.base_seed,
        "median": r.median,
        "zero_one": r.looks_zero_one(),
        "parameters": r.parameters.iter().map(|(k, v)| (k.clone(), json!(v))).collect::<serde_json::Map<_, _>>(),
    })
}

fn estimation_bundle(r: &EstimationReport, value_name: &str, extra: &[(&str, String)]) -> ReportBundle {
    let mut t = Table::new("trials", &["trial", "success", value_name]);
    for (i, (ok, v)) in r.per_trial_success.iter().zip(&r.per_trial).enumerate() {
        t.push(vec![i.to_string(), ok.to_string(), f(*v)]);
    }
    let mut results = estimation_json(r);
    for (k, v) in extra {
        results["parameters"][*k] = json!(v);
    }
    ReportBundle { tables: vec![t], results, ..Default::default() }
}

fn run_proximal(
    cfg: &RunConfig,
    pairs: &[(SpacePoint, SpacePoint)],
    random_pairs: usize,
    tol: f64,
    horizon: usize,
    probe: Option<&crate::config::Probe>,
) -> Result<ReportBundle> {
    let sys = sys_of(cfg);
    let mut all = pairs.to_vec();
    let mut rng = ifs_lab::rng::stream(cfg.seed, u64::MAX - 1);
    for _ in 0..random_pairs {
        let a = sys.space().sample_point(&mut rng);
        let b = sys.space().sample_point(&mut rng);
        all.push((a, b));
    }
    let mut t = Table::new(
        "pairs",
        &["pair", "x", "y", "distance", "trials", "successes", "frequency", "standard_error", "median_min_distance", "zero_one"],
    );
    let mut per_pair = Vec::new();
    for (i, (x, y)) in all.iter().enumerate() {
        // Pair i reads its branches from seed + i.
        let seed = cfg.seed.wrapping_add(i as u64);
        let r = stochastic::verify_proximality(sys, x, y, tol, horizon, cfg.trials, seed)?;
        t.push(vec![
            i.to_string(),
            x.to_string(),
            y.to_string(),
            f(sys.space().distance(x, y)?),
            r.trials.to_string(),
            r.successes.to_string(),
            f(r.frequency),
            f(r.standard_error),
            r.median.map_or(String::new(), f),
            r.looks_zero_one().to_string(),
        ]);
        per_pair.push(r.frequency);
    }
    let mut tables = vec![t];
    let mut results = json!({
        "tol": tol,
        "horizon": horizon,
        "pairs": all.len(),
        "min_frequency": per_pair.iter().copied().fold(f64::INFINITY, f64::min),
        "frequencies": per_pair,
    });
    if let Some(p) = probe {
        let m = stochastic::backward_minimality_probe(sys, p.points, p.epsilon, p.steps, cfg.seed)?;
        let mut pt = Table::new("backward_probe", &["start", "coverage"]);
        for (i, c) in m.coverage.iter().enumerate() {
            pt.push(vec![i.to_string(), f(*c)]);
        }
        tables.push(pt);
        results["backward_probe"] = json!({
            "points": m.points,
            "epsilon": m.epsilon,
            "steps": m.steps,
            "dense": m.dense,
            "passed": m.passed(),
        });
    }
    Ok(ReportBundle { tables, results, ..Default::default() })
}

fn run_tail_bound(
    cfg: &RunConfig,
    start: &SpacePoint,
    ball: &ifs_lab::Ball,
    window: &Window,
    horizons: &[usize],
    syndetic_branches: usize,
    syndetic_horizon: usize,
) -> Result<ReportBundle> {
    let sys = sys_of(cfg);
    let target = TargetSet::Ball(*ball);
    let tilde = RelationSpec::InBall { ball: *ball };
    let window = match window {
        Window::Fixed(l) => *l,
        Window::Auto { max } => {
            let mut rng = ifs_lab::rng::stream(cfg.seed, u64::MAX - 2);
            let mut samples = vec![*start];
            samples.extend((0..WINDOW_SAMPLES).map(|_| sys.space().sample_point(&mut rng)));
            stochastic::smallest_window(sys, &samples, &target, &tilde, *max)?
                .ok_or_else(|| CliError::NotFound(format!("no window of at most {max} letters connects every sample")))?
        }
    };
    let horizons: Vec<usize> = if horizons.is_empty() { (1..=10).map(|i| i * window).collect() } else { horizons.to_vec() };
    let r = stochastic::tail_bound_report(
        sys,
        start,
        &target,
        &RelationSpec::exact(),
        &tilde,
        window,
        &horizons,
        cfg.trials,
        cfg.seed,
    )?;
    let mut t = Table::new("tail_bound", &["n", "miss_rate", "bound", "tolerance", "within"]);
    for row in &r.rows {
        t.push(vec![row.n.to_string(), f(row.miss_rate), f(row.bound), f(row.tolerance), row.within.to_string()]);
    }
    let mut results = json!({
        "window": r.window,
        "p_lower": r.p_lower,
        "trials": r.trials,
        "base_seed": r.base_seed,
        "all_within": r.all_within(),
        "hypothesis_violations": r.hypothesis_violations,
        "hypothesis_samples": r.hypothesis_samples,
    });
    let mut tables = vec![t];
    if syndetic_branches > 0 {
        let rows: Vec<(usize, usize)> = (0..syndetic_branches as u64)
            .into_par_iter()
            .map(|b| {
                let w = WordStream::for_trial(sys.weights().clone(), cfg.seed, b);
                let hits = stochastic::branch_hit_set(sys, start, &target, &tilde, w.clone(), syndetic_horizon, window)?;
                let strict = chains::connection_hits(sys, &ChainPoint::Single(*start), &target, &tilde, w, syndetic_horizon)?;
                Ok((chains::syndetic_max_gap(&hits), chains::syndetic_max_gap(&strict)))
            })
            .collect::<ifs_lab::Result<_>>()?;
        let mut st = Table::new("syndetic", &["branch", "max_gap", "within_2l", "orbit_only_max_gap"]);
        let mut within = 0;
        for (b, (gap, strict)) in rows.iter().enumerate() {
            let ok = *gap <= 2 * window;
            within += ok as usize;
            st.push(vec![b.to_string(), gap.to_string(), ok.to_string(), strict.to_string()]);
        }
        tables.push(st);
        results["syndetic"] = json!({
            "branches": syndetic_branches,
            "horizon": syndetic_horizon,
            "within_2l": within,
            "fraction_within_2l": within as f64 / syndetic_branches as f64,
        });
    }
    Ok(ReportBundle { tables, results, ..Default::default() })
}

fn run_chains(cfg: &RunConfig, from: &SpacePoint, to: &SpacePoint, delta: f64, epsilon: f64, max_len: usize) -> Result<ReportBundle> {
    let sys = sys_of(cfg);
    let r = chains::delta_chain_reachable(sys, from, to, delta, epsilon, max_len)?;
    let mut results = json!({
        "from": from.to_string(),
        "to": to.to_string(),
        "delta": delta,
        "epsilon": epsilon,
        "max_len": max_len,
        "reachable": r.reachable,
    });
    let mut bundle = ReportBundle::default();
    match &r.certificate {
        Some(cert) => {
            let k = sys.k();
            results["witness"] = json!(cert.direction.format(k));
            results["verified"] = json!(chains::verify_chain(sys, cert)?);
            let mut t = Table::new("witness", &["step", "letter", "point", "next_point", "step_error"]);
            for (step, letter, point, err) in cert.step_errors(sys)? {
                t.push(vec![
                    step.to_string(),
                    letter.to_string(),
                    point.to_string(),
                    cert.points[step + 1].to_string(),
                    f(err),
                ]);
            }
            bundle.tables.push(t);
        }
        None => bundle.not_found = Some(format!("no δ-chain from {from} to {to} within {max_len} steps")),
    }
    bundle.results = results;
    Ok(bundle)
}

fn run_recurrent(cfg: &RunConfig, delta: f64, epsilon: f64) -> Result<ReportBundle> {
    let sys = sys_of(cfg);
    let graph = ChainGraph::build(sys, delta, epsilon)?;
    let nodes = graph.recurrent_nodes();
    let mut t = Table::new("recurrent", &["node", "point"]);
    for &u in &nodes {
        t.push(vec![u.to_string(), graph.net().point(u).to_string()]);
    }
    let results = json!({
        "delta": delta,
        "epsilon": epsilon,
        "net_nodes": graph.node_count(),
        "recurrent_nodes": nodes.len(),
        "components": graph.components().len(),
        "chain_transitive": graph.is_strongly_connected(),
    });
    Ok(ReportBundle { tables: vec![t], results, ..Default::default() })
}

fn run_theorem_b(k: usize, len: usize) -> Result<ReportBundle> {
    let w = universal_word(k, len)?;
    let mut t = Table::new("cylinders", &["cylinder", "occurrence", "confirmed"]);
    let mut missing = 0usize;
    let mut checked = 0usize;
    for l in 1..=len {
        for code in 0..k.pow(l as u32) {
            let values: Vec<u32> = (0..l).rev().map(|j| (code / k.pow(j as u32) % k) as u32 + 1).collect();
            let word = FiniteWord::from_values(&values, k)?;
            let c = Cylinder::new(word.clone(), 0)?;
            checked += 1;
            match find_cylinder_occurrence(&w, &c, w.len()) {
                Some(n) => {
                    let confirmed = w.letters()[n..n + l] == *word.letters();
                    missing += !confirmed as usize;
                    t.push(vec![word.format(k), n.to_string(), confirmed.to_string()]);
                }
                None => {
                    missing += 1;
                    t.push(vec![word.format(k), String::new(), "false".into()]);
                }
            }
        }
    }
    Ok(ReportBundle {
        tables: vec![t],
        results: json!({
            "alphabet": k,
            "length": len,
            "universal_word_length": w.len(),
            "cylinders": checked,
            "missing": missing,
        }),
        not_found: (missing > 0).then(|| format!("{missing} cylinders without a confirmed occurrence")),
        ..Default::default()
    })
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub strict: bool,
}

/// What the `run` and `render` subcommands do, minus process exit.
pub fn execute(config_path: &Path, opts: &Options, render_only: bool) -> Result<(ReportBundle, Vec<PathBuf>)> {
    let cfg = load(config_path, opts)?;
    let started = Instant::now();
    let bundle = if render_only { render_bundle(&cfg)? } else { run_config(&cfg)? };
    let out_dir = output_dir(config_path, &cfg, opts);
    let info = RunInfo {
        scenario: if render_only { "render".into() } else { cfg.kind.name().into() },
        config: cfg.echo(),
        seed: cfg.seed,
        trials: cfg.trials,
        wall_clock_seconds: cfg.output.timing.then(|| started.elapsed().as_secs_f64()),
    };
    let files = write_report(&bundle, &info, &out_dir)?;
    if opts.strict {
        if let Some(msg) = &bundle.not_found {
            return Err(CliError::NotFound(msg.clone()));
        }
    }
    Ok((bundle, files))
}

pub fn load(config_path: &Path, opts: &Options) -> Result<RunConfig> {
    let text = std::fs::read_to_string(config_path).map_err(|e| CliError::io(config_path, e))?;
    RunConfig::parse(&text)?.with_overrides(opts.seed, opts.trials)
}

/// `--out`, else `[output] dir` (relative to the config file), else
/// `ifs-lab-out/<config name>` in the working directory.
pub fn output_dir(config_path: &Path, cfg: &RunConfig, opts: &Options) -> PathBuf {
    if let Some(o) = &opts.out {
        return o.clone();
    }
    if let Some(d) = &cfg.output.dir {
        let d = Path::new(d);
        if d.is_absolute() {
            return d.to_path_buf();
        }
        return config_path.parent().unwrap_or(Path::new(".")).join(d);
    }
    let stem = config_path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
    Path::new("ifs-lab-out").join(stem)
}

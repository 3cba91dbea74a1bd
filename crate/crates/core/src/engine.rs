//! Verification engines.
//!
//! The explicit engine enumerates a regular grid over the search box. The
//! reduced engine runs interval branch-and-bound: a box is pruned when
//! bound propagation proves the property on all of it, its center is tried
//! as a witness, and otherwise it is bisected along its widest dimension
//! (relative to the search box) until every side is at most epsilon.

use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tracing::debug;

use crate::analysis::CeDatabase;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::network::{InputBox, Network};
use crate::property::{Counterexample, Property, RobustnessProperty};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Explicit,
    #[default]
    Reduced,
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit" => Ok(Engine::Explicit),
            "reduced" => Ok(Engine::Reduced),
            other => Err(Error::Config(format!("unknown engine `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridStep {
    /// Each non-degenerate node is split into this many intervals.
    Divisions(u64),
    Scalar(f64),
    PerNode(Vec<f64>),
}

impl GridStep {
    pub fn resolve(&self, region: &InputBox) -> Result<Vec<f64>> {
        let n = region.dim();
        match self {
            GridStep::Divisions(0) => Err(Error::Config("grid divisions must be positive".into())),
            GridStep::Divisions(d) => Ok((0..n).map(|i| region.width(i) / *d as f64).collect()),
            GridStep::Scalar(s) => Ok(vec![*s; n]),
            GridStep::PerNode(v) if v.len() != n => Err(Error::dim("grid step", n, v.len())),
            GridStep::PerNode(v) => Ok(v.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Epsilon {
    /// Fraction of each node's search-box width.
    Relative(f64),
    /// Same width on every node, in input units.
    Absolute(f64),
}

impl Epsilon {
    pub fn resolve(&self, region: &InputBox) -> Result<Vec<f64>> {
        let (v, rel) = match self {
            Epsilon::Relative(v) => (*v, true),
            Epsilon::Absolute(v) => (*v, false),
        };
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Config(format!("epsilon must be positive and finite, got {v}")));
        }
        Ok((0..region.dim())
            .map(|i| if rel { v * region.width(i) } else { v })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// A zero timeout is accepted and yields TIMEOUT before any work.
    #[serde(with = "millis")]
    pub timeout: Duration,
    pub grid_step: GridStep,
    pub epsilon: Epsilon,
    pub max_counterexamples: usize,
    pub rng_seed: u64,
    /// Work budget: grid points (explicit) or box pops (reduced). Running
    /// out reports TIMEOUT.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_work: Option<u64>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            timeout: Duration::from_secs(60),
            grid_step: GridStep::Divisions(20),
            epsilon: Epsilon::Relative(1e-4),
            max_counterexamples: usize::MAX,
            rng_seed: 0,
            max_work: None,
        }
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis().min(u64::MAX as u128) as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerdictKind {
    Sat,
    Unsat,
    NoneFound,
    Timeout,
}

impl VerdictKind {
    pub fn exit_code(self) -> i32 {
        match self {
            VerdictKind::Unsat | VerdictKind::NoneFound => 0,
            VerdictKind::Sat => 1,
            VerdictKind::Timeout => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VerdictKind::Sat => "SAT",
            VerdictKind::Unsat => "UNSAT",
            VerdictKind::NoneFound => "NONE_FOUND",
            VerdictKind::Timeout => "TIMEOUT",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub points: u64,
    pub boxes_explored: u64,
    pub boxes_split: u64,
    pub wall_ms: f64,
    /// Fraction of the search box volume left undecided (reduced engine).
    pub undecided_volume: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subproblems: Option<u64>,
}

impl Stats {
    fn absorb(&mut self, other: &Stats) {
        self.points += other.points;
        self.boxes_explored += other.boxes_explored;
        self.boxes_split += other.boxes_split;
    }

    pub(crate) fn add(&mut self, other: &Stats) {
        self.absorb(other);
        self.undecided_volume = self.undecided_volume.max(other.undecided_volume);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub witness: Option<Counterexample>,
    pub stats: Stats,
}

#[derive(Serialize)]
struct VerdictJson<'a> {
    kind: VerdictKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<&'a [f64]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    counterexample: Option<&'a Counterexample>,
    stats: &'a Stats,
}

impl Serialize for Verdict {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        VerdictJson {
            kind: self.kind,
            witness: self.witness.as_ref().map(|c| c.input.as_slice()),
            counterexample: self.witness.as_ref(),
            stats: &self.stats,
        }
        .serialize(s)
    }
}

impl Verdict {
    fn new(kind: VerdictKind, witness: Option<Counterexample>, mut stats: Stats, start: Instant) -> Self {
        stats.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        Verdict { kind, witness, stats }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("verdict serializes")
    }
}

/// Deadline, cooperative stop flag and work budget shared by one run.
#[derive(Clone, Copy)]
pub(crate) struct Control<'a> {
    deadline: Option<Instant>,
    stop: Option<&'a AtomicBool>,
    max_work: Option<u64>,
}

impl<'a> Control<'a> {
    pub(crate) fn new(cfg: &EngineConfig, start: Instant) -> Self {
        Control {
            deadline: start.checked_add(cfg.timeout),
            stop: None,
            max_work: cfg.max_work,
        }
    }

    pub(crate) fn with_stop(mut self, stop: &'a AtomicBool) -> Self {
        self.stop = Some(stop);
        self
    }

    pub(crate) fn with_deadline(mut self, deadline: Option<Instant>) -> Self {
        self.deadline = match (self.deadline, deadline) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self
    }

    pub(crate) fn stopped(&self) -> bool {
        self.stop.is_some_and(|s| s.load(Ordering::Relaxed))
    }

    fn expired(&self, work: u64) -> bool {
        self.max_work.is_some_and(|m| work >= m)
            || self.deadline.is_some_and(|d| Instant::now() >= d)
            || self.stopped()
    }
}

fn bounded_region(prop: &Property) -> Result<InputBox> {
    let region = prop.search_box()?;
    if !region.is_bounded() {
        return Err(Error::Config("search box must be bounded".into()));
    }
    Ok(region)
}

fn witness(net: &Network, prop: &Property, x: &[f64], obs: crate::property::Observation) -> Result<Counterexample> {
    let ce = prop.make_counterexample(x, obs);
    prop.revalidate(net, &ce)?;
    Ok(ce)
}

fn bits(x: &[f64]) -> Vec<u64> {
    // -0.0 and 0.0 are the same input.
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

/// Outcome of a grid scan: `Ok(Some)` on a violation, `Ok(None)` when the
/// scan completed, and `Err(())` when the control expired first.
pub(crate) fn scan_grid(
    net: &Network,
    prop: &Property,
    grid: &Grid,
    ctl: &Control,
    stats: &mut Stats,
) -> Result<std::result::Result<Option<Counterexample>, ()>> {
    let excluded: HashSet<Vec<u64>> = prop.excluded().iter().map(|x| bits(x)).collect();
    let mut cursor = grid.cursor();
    let mut work = 0u64;
    loop {
        if ctl.expired(work) {
            return Ok(Err(()));
        }
        let Some(x) = cursor.next_point() else {
            return Ok(Ok(None));
        };
        work += 1;
        if !excluded.is_empty() && excluded.contains(&bits(x)) {
            continue;
        }
        stats.points += 1;
        if let Some(obs) = prop.check_point(net, x)? {
            return Ok(Ok(Some(witness(net, prop, x, obs)?)));
        }
    }
}

pub fn verify_explicit(net: &Network, prop: &Property, cfg: &EngineConfig) -> Result<Verdict> {
    let start = Instant::now();
    verify_explicit_with(net, prop, cfg, &Control::new(cfg, start), start)
}

pub(crate) fn verify_explicit_with(
    net: &Network,
    prop: &Property,
    cfg: &EngineConfig,
    ctl: &Control,
    start: Instant,
) -> Result<Verdict> {
    prop.validate_for(net)?;
    let region = bounded_region(prop)?;
    let grid = Grid::new(&region, &cfg.grid_step.resolve(&region)?)?;
    debug!(points = grid.len(), "explicit scan");
    let mut stats = Stats::default();
    Ok(match scan_grid(net, prop, &grid, ctl, &mut stats)? {
        Ok(Some(ce)) => Verdict::new(VerdictKind::Sat, Some(ce), stats, start),
        Ok(None) => Verdict::new(VerdictKind::Unsat, None, stats, start),
        Err(()) => Verdict::new(VerdictKind::Timeout, None, stats, start),
    })
}

pub fn verify_reduced(net: &Network, prop: &Property, cfg: &EngineConfig) -> Result<Verdict> {
    let start = Instant::now();
    verify_reduced_with(net, prop, cfg, &Control::new(cfg, start), start)
}

pub(crate) fn verify_reduced_with(
    net: &Network,
    prop: &Property,
    cfg: &EngineConfig,
    ctl: &Control,
    start: Instant,
) -> Result<Verdict> {
    prop.validate_for(net)?;
    let root = bounded_region(prop)?;
    let eps = cfg.epsilon.resolve(&root)?;
    let n = root.dim();
    let balls: Vec<InputBox> = prop
        .excluded()
        .iter()
        .map(|c| InputBox {
            lower: (0..n).map(|i| c[i] - eps[i]).collect(),
            upper: (0..n).map(|i| c[i] + eps[i]).collect(),
        })
        .collect();
    let fraction = |b: &InputBox| -> f64 {
        (0..n)
            .filter(|&i| !root.is_degenerate(i))
            .map(|i| b.width(i) / root.width(i))
            .product()
    };

    let mut stats = Stats::default();
    let mut stack = vec![root.clone()];
    while let Some(b) = stack.pop() {
        if ctl.expired(stats.boxes_explored) {
            stats.undecided_volume += fraction(&b) + stack.iter().map(fraction).sum::<f64>();
            return Ok(Verdict::new(VerdictKind::Timeout, None, stats, start));
        }
        stats.boxes_explored += 1;
        if balls.iter().any(|ball| b.is_subset_of(ball)) {
            continue;
        }
        if prop.proven_on(net, &b)? {
            continue;
        }
        let c = b.center();
        if !balls.iter().any(|ball| ball.contains(&c)) {
            stats.points += 1;
            if let Some(obs) = prop.check_point(net, &c)? {
                let ce = witness(net, prop, &c, obs)?;
                return Ok(Verdict::new(VerdictKind::Sat, Some(ce), stats, start));
            }
        }
        // Widest dimension relative to the search box, among those still
        // wider than epsilon; lowest index on ties.
        let mut split: Option<(usize, f64)> = None;
        for i in 0..n {
            let w = b.width(i);
            if w > eps[i] {
                let rel = w / root.width(i);
                if split.is_none_or(|(_, best)| rel > best) {
                    split = Some((i, rel));
                }
            }
        }
        let halves = split.map(|(i, _)| b.bisect(i)).filter(|(l, r)| l != &b && r != &b);
        match halves {
            Some((left, right)) => {
                stats.boxes_split += 1;
                stack.push(right);
                stack.push(left);
            }
            None => stats.undecided_volume += fraction(&b),
        }
    }
    let kind = if stats.undecided_volume > 0.0 {
        VerdictKind::NoneFound
    } else {
        VerdictKind::Unsat
    };
    Ok(Verdict::new(kind, None, stats, start))
}

pub fn verify(net: &Network, prop: &Property, engine: Engine, cfg: &EngineConfig) -> Result<Verdict> {
    match engine {
        Engine::Explicit => verify_explicit(net, prop, cfg),
        Engine::Reduced => verify_reduced(net, prop, cfg),
    }
}

pub(crate) fn verify_with(
    net: &Network,
    prop: &Property,
    engine: Engine,
    cfg: &EngineConfig,
    ctl: &Control,
) -> Result<Verdict> {
    let start = Instant::now();
    match engine {
        Engine::Explicit => verify_explicit_with(net, prop, cfg, ctl, start),
        Engine::Reduced => verify_reduced_with(net, prop, cfg, ctl, start),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelResult {
    pub percent: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToleranceReport {
    /// Largest scheduled level that verified UNSAT; `None` when every level
    /// failed, i.e. the tolerance is below the smallest level.
    pub tolerance_percent: Option<f64>,
    pub below_percent: Option<f64>,
    pub levels: Vec<LevelResult>,
}

/// Walk `schedule` from the largest level down and stop at the first
/// level that verifies UNSAT.
pub fn noise_tolerance(
    net: &Network,
    base: &RobustnessProperty,
    schedule: &[f64],
    engine: Engine,
    cfg: &EngineConfig,
) -> Result<ToleranceReport> {
    if schedule.is_empty() {
        return Err(Error::Config("noise schedule is empty".into()));
    }
    if schedule.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::Config("noise schedule must be strictly decreasing".into()));
    }
    let mut levels = Vec::new();
    for &percent in schedule {
        let prop = Property::Robustness(base.with_percent(percent)?);
        let verdict = verify(net, &prop, engine, cfg)?;
        debug!(percent, kind = verdict.kind.as_str(), "tolerance level");
        let done = verdict.kind == VerdictKind::Unsat;
        levels.push(LevelResult { percent, verdict });
        if done {
            return Ok(ToleranceReport {
                tolerance_percent: Some(percent),
                below_percent: None,
                levels,
            });
        }
    }
    Ok(ToleranceReport {
        tolerance_percent: None,
        below_percent: schedule.last().copied(),
        levels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CollectStop {
    /// The engine found no further violation (UNSAT or NONE_FOUND).
    Exhausted,
    MaxReached,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Collection {
    pub counterexamples: Vec<Counterexample>,
    pub stop: CollectStop,
    pub last_kind: Option<VerdictKind>,
}

/// Repeatedly verify, excluding each counterexample found, until no more
/// are found, `max_counterexamples` is reached, or the timeout expires.
pub fn collect(net: &Network, prop: &RobustnessProperty, engine: Engine, cfg: &EngineConfig) -> Result<Collection> {
    let start = Instant::now();
    let deadline = start.checked_add(cfg.timeout);
    let mut current = prop.clone();
    let mut ces = Vec::new();
    let mut last_kind = None;
    loop {
        if ces.len() >= cfg.max_counterexamples {
            return Ok(Collection { counterexamples: ces, stop: CollectStop::MaxReached, last_kind });
        }
        let wrapped = Property::Robustness(current.clone());
        let ctl = Control::new(cfg, Instant::now()).with_deadline(deadline);
        let v = verify_with(net, &wrapped, engine, cfg, &ctl)?;
        last_kind = Some(v.kind);
        match v.kind {
            VerdictKind::Sat => {
                let ce = v.witness.expect("SAT carries a witness");
                current = crate::property::exclude(&current, std::slice::from_ref(&ce))?;
                ces.push(ce);
            }
            VerdictKind::Timeout => {
                return Ok(Collection { counterexamples: ces, stop: CollectStop::Timeout, last_kind });
            }
            VerdictKind::Unsat | VerdictKind::NoneFound => {
                return Ok(Collection { counterexamples: ces, stop: CollectStop::Exhausted, last_kind });
            }
        }
    }
}

/// Collect counterexamples for one seed into a database.
pub fn collect_counterexamples(
    net: &Network,
    prop: &RobustnessProperty,
    engine: Engine,
    cfg: &EngineConfig,
) -> Result<CeDatabase> {
    let mut db = CeDatabase::new(net, &Property::Robustness(prop.clone()), cfg);
    let c = collect(net, prop, engine, cfg)?;
    db.add_collection(net, prop, &c.counterexamples)?;
    Ok(db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tests::random_net;
    use crate::network::{Layer, NetworkParts, OutputConvention};
    use crate::property::{NoiseSpec, Observation, SafetyProperty, Constraint};

    // ARGMIN over (x0 + x1, 2.6): class 1 exactly where x0 + x1 > 2.6.
    fn corner_net() -> Network {
        let layers = vec![Layer::new(2, 2, vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 2.6]).unwrap()];
        Network::new(NetworkParts::plain(layers, OutputConvention::Argmin)).unwrap()
    }

    fn constant_net() -> Network {
        let layers = vec![Layer::new(2, 2, vec![0.0; 4], vec![1.0, 0.0]).unwrap()];
        Network::new(NetworkParts::plain(layers, OutputConvention::Argmax)).unwrap()
    }

    fn cfg() -> EngineConfig {
        EngineConfig {
            timeout: Duration::from_secs(30),
            ..EngineConfig::default()
        }
    }

    fn robust(net: &Network, seed: Vec<f64>, pct: f64) -> Property {
        RobustnessProperty::new(net, "r", seed.clone(), NoiseSpec::uniform(pct, seed.len()).unwrap())
            .unwrap()
            .into()
    }

    #[test]
    fn constant_net_is_unsat_after_every_point() {
        let net = constant_net();
        let prop = robust(&net, vec![1.0, 2.0], 10.0);
        let v = verify_explicit(&net, &prop, &cfg()).unwrap();
        assert_eq!(v.kind, VerdictKind::Unsat);
        assert_eq!(v.stats.points, 21 * 21);
        let v = verify_reduced(&net, &prop, &cfg()).unwrap();
        assert_eq!(v.kind, VerdictKind::Unsat);
        assert_eq!(v.stats.boxes_explored, 1);
    }

    #[test]
    fn violation_only_at_grid_corner() {
        // On the [0.5, 1.5]^2 grid with step 0.5 only the (1.5, 1.5) corner
        // crosses the boundary.
        let net = corner_net();
        let prop: Property = RobustnessProperty {
            id: "corner".into(),
            seed: vec![1.0, 1.0],
            expected_class: 0,
            noise: NoiseSpec::uniform(50.0, 2).unwrap(),
            excluded: vec![],
        }
        .into();
        assert_eq!(net.classify(&[1.0, 1.0]).unwrap(), 0);
        let c = EngineConfig { grid_step: GridStep::Scalar(0.5), ..cfg() };
        let v = verify_explicit(&net, &prop, &c).unwrap();
        assert_eq!(v.kind, VerdictKind::Sat);
        assert_eq!(v.witness.as_ref().unwrap().input, vec![1.5, 1.5]);
        assert_eq!(v.witness.unwrap().observed, Observation::Class(1));

        let v = verify_reduced(&net, &prop, &cfg()).unwrap();
        assert_eq!(v.kind, VerdictKind::Sat);
        let w = v.witness.unwrap();
        assert!(w.input[0] + w.input[1] > 2.6);
        prop.revalidate(&net, &w).unwrap();
    }

    #[test]
    fn zero_timeout_explores_nothing() {
        let net = constant_net();
        let prop = robust(&net, vec![1.0, 2.0], 10.0);
        let c = EngineConfig { timeout: Duration::ZERO, ..cfg() };
        for engine in [Engine::Explicit, Engine::Reduced] {
            let v = verify(&net, &prop, engine, &c).unwrap();
            assert_eq!(v.kind, VerdictKind::Timeout);
            assert_eq!(v.stats.points, 0);
            assert_eq!(v.stats.boxes_explored, 0);
        }
    }

    #[test]
    fn degenerate_box_at_robust_seed_is_one_step() {
        let net = random_net(&[2, 3, 2], 11);
        let prop = robust(&net, vec![0.3, -0.2], 0.0);
        let v = verify_reduced(&net, &prop, &cfg()).unwrap();
        assert_eq!(v.kind, VerdictKind::Unsat);
        assert_eq!(v.stats.boxes_explored, 1);
    }

    #[test]
    fn exclusion_skips_previous_witness() {
        let net = corner_net();
        let base = RobustnessProperty {
            id: "corner".into(),
            seed: vec![1.0, 1.0],
            expected_class: 0,
            noise: NoiseSpec::uniform(50.0, 2).unwrap(),
            excluded: vec![],
        };
        let c = EngineConfig { grid_step: GridStep::Scalar(0.125), ..cfg() };
        let first = verify_explicit(&net, &base.clone().into(), &c).unwrap().witness.unwrap();
        let refined = crate::property::exclude(&base, std::slice::from_ref(&first)).unwrap();
        let second = verify_explicit(&net, &refined.clone().into(), &c).unwrap().witness.unwrap();
        assert_ne!(first.input, second.input);

        // Exclude every grid point: nothing left to find.
        let grid = Grid::new(&base.search_box().unwrap(), &[0.125, 0.125]).unwrap();
        let all = RobustnessProperty { excluded: grid.iter().collect(), ..base };
        assert_eq!(verify_explicit(&net, &all.into(), &c).unwrap().kind, VerdictKind::Unsat);
    }

    #[test]
    fn collect_finds_every_grid_violation() {
        let net = corner_net();
        let base = RobustnessProperty {
            id: "corner".into(),
            seed: vec![1.0, 1.0],
            expected_class: 0,
            noise: NoiseSpec::uniform(50.0, 2).unwrap(),
            excluded: vec![],
        };
        let c = EngineConfig { grid_step: GridStep::Scalar(0.0625), ..cfg() };
        let grid = Grid::new(&base.search_box().unwrap(), &[0.0625, 0.0625]).unwrap();
        let expected: Vec<Vec<f64>> = grid.iter().filter(|x| net.classify(x).unwrap() != 0).collect();
        assert!(expected.len() > 3);
        let got = collect(&net, &base, Engine::Explicit, &c).unwrap();
        assert_eq!(got.stop, CollectStop::Exhausted);
        assert_eq!(got.last_kind, Some(VerdictKind::Unsat));
        let inputs: Vec<Vec<f64>> = got.counterexamples.iter().map(|c| c.input.clone()).collect();
        assert_eq!(inputs, expected);

        let capped = collect(&net, &base, Engine::Explicit, &EngineConfig { max_counterexamples: 2, ..c }).unwrap();
        assert_eq!(capped.stop, CollectStop::MaxReached);
        let capped_inputs: Vec<&Vec<f64>> = capped.counterexamples.iter().map(|c| &c.input).collect();
        assert_eq!(capped_inputs, vec![&inputs[0], &inputs[1]]);
    }

    #[test]
    fn robust_net_collects_nothing() {
        let net = constant_net();
        let RobustnessProperty { .. } = match robust(&net, vec![1.0, 2.0], 10.0) {
            Property::Robustness(r) => {
                let got = collect(&net, &r, Engine::Reduced, &cfg()).unwrap();
                assert!(got.counterexamples.is_empty());
                assert_eq!(got.stop, CollectStop::Exhausted);
                r
            }
            _ => unreachable!(),
        };
    }

    #[test]
    fn tolerance_schedule_validation() {
        let net = constant_net();
        let Property::Robustness(r) = robust(&net, vec![1.0, 2.0], 10.0) else { unreachable!() };
        assert!(noise_tolerance(&net, &r, &[], Engine::Reduced, &cfg()).is_err());
        assert!(noise_tolerance(&net, &r, &[10.0, 10.0], Engine::Reduced, &cfg()).is_err());
        let rep = noise_tolerance(&net, &r, &[40.0, 30.0], Engine::Reduced, &cfg()).unwrap();
        assert_eq!(rep.tolerance_percent, Some(40.0));
        assert_eq!(rep.levels.len(), 1);
    }

    #[test]
    fn tolerance_below_smallest_level() {
        // Decision flips at any perturbation of the second input: (x1, 1).
        let layers = vec![Layer::new(2, 2, vec![0.0, 1.0, 0.0, 0.0], vec![0.0, 1.0]).unwrap()];
        let net = Network::new(NetworkParts::plain(layers, OutputConvention::Argmax)).unwrap();
        let r = RobustnessProperty::new(&net, "r", vec![1.0, 1.0], NoiseSpec::uniform(1.0, 2).unwrap()).unwrap();
        let rep = noise_tolerance(&net, &r, &[20.0, 11.0, 1.0], Engine::Reduced, &cfg()).unwrap();
        assert_eq!(rep.tolerance_percent, None);
        assert_eq!(rep.below_percent, Some(1.0));
        assert!(rep.levels.iter().all(|l| l.verdict.kind == VerdictKind::Sat));
    }

    #[test]
    fn safety_with_reduced_engine() {
        let net = random_net(&[2, 3, 2], 3);
        let prop: Property = SafetyProperty {
            id: "s".into(),
            input_box: InputBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap(),
            constraint: Constraint::Le { index: 0, value: 1e6 },
            output_space: Default::default(),
        }
        .into();
        assert_eq!(verify_reduced(&net, &prop, &cfg()).unwrap().kind, VerdictKind::Unsat);
    }

    #[test]
    fn verdict_json_shape() {
        let net = corner_net();
        let prop = robust(&net, vec![1.0, 1.0], 50.0);
        let v = verify_explicit(&net, &prop, &EngineConfig { grid_step: GridStep::Scalar(0.5), ..cfg() }).unwrap();
        let j: serde_json::Value = serde_json::from_str(&v.to_json()).unwrap();
        assert_eq!(j["kind"], "SAT");
        assert_eq!(j["witness"], serde_json::json!([1.5, 1.5]));
        assert!(j["stats"]["points"].as_u64().unwrap() > 0);
        let unsat = verify_explicit(&constant_net(), &robust(&constant_net(), vec![1.0, 2.0], 1.0), &cfg()).unwrap();
        let j: serde_json::Value = serde_json::from_str(&unsat.to_json()).unwrap();
        assert_eq!(j["kind"], "UNSAT");
        assert!(j.get("witness").is_none());
    }
}

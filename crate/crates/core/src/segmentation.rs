//! Coarse-grain sampling and random input segmentation for safety
//! properties over large input domains.
//!
//! Segmentation splits the input nodes into a variable set, which keeps its
//! full range, and a fixed set, where each node is pinned to one random value
//! inside one of its bins. Every combination of fixed-node bins becomes an
//! independent sub-problem. Neither driver ever reports UNSAT: both search
//! only part of the domain.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tracing::debug;

use crate::engine::{self, Control, Engine, EngineConfig, Stats, Verdict, VerdictKind};
use crate::error::{from_json_str, Error, Result};
use crate::grid::Grid;
use crate::network::{InputBox, Network};
use crate::property::{Property, SafetyProperty};

/// Equal-width bins `(lower, upper)` per node; the last bin ends exactly at
/// the node's upper bound.
pub fn make_bins(region: &InputBox, counts: &[u32]) -> Result<Vec<Vec<(f64, f64)>>> {
    region.validate()?;
    if counts.len() != region.dim() {
        return Err(Error::dim("bin counts", region.dim(), counts.len()));
    }
    let mut out = Vec::with_capacity(counts.len());
    for (i, &x) in counts.iter().enumerate() {
        let (l, u) = (region.lower[i], region.upper[i]);
        if x == 0 {
            return Err(Error::Config(format!("node {i} needs at least one bin")));
        }
        if x > 1 && l == u {
            return Err(Error::Config(format!("node {i} is pinned and cannot be split into {x} bins")));
        }
        if x > 1 && !(u - l).is_finite() {
            return Err(Error::Config(format!("node {i} is unbounded")));
        }
        let w = (u - l) / x as f64;
        let bins = (1..=x)
            .map(|j| {
                let lo = w * (j - 1) as f64 + l;
                let hi = if j == x { u } else { w * j as f64 + l };
                (lo, hi)
            })
            .collect();
        out.push(bins);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VariableStrategy {
    /// One variable node at a time, in node order.
    #[default]
    EachSingle,
    /// Explicit variable sets, tried in order.
    Sets(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationPlan {
    pub domain: InputBox,
    pub bins: Vec<u32>,
    pub variables: VariableStrategy,
    pub rng_seed: u64,
    /// Repeats of the whole bin sweep, each with its own seed.
    pub samples_per_bin: u32,
}

/// Plan file contents; the domain comes from the property.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub bins: Vec<u32>,
    #[serde(default)]
    pub variables: VariableStrategy,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub samples_per_bin: u32,
}

fn one() -> u32 {
    1
}

impl PlanFile {
    pub fn parse(text: &str) -> Result<Self> {
        from_json_str(text)
    }

    pub fn into_plan(self, domain: InputBox) -> Result<SegmentationPlan> {
        SegmentationPlan::new(domain, self.bins, self.variables, self.seed, self.samples_per_bin)
    }
}

impl SegmentationPlan {
    pub fn new(
        domain: InputBox,
        bins: Vec<u32>,
        variables: VariableStrategy,
        rng_seed: u64,
        samples_per_bin: u32,
    ) -> Result<Self> {
        let plan = SegmentationPlan {
            domain,
            bins,
            variables,
            rng_seed,
            samples_per_bin,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        make_bins(&self.domain, &self.bins)?;
        if self.samples_per_bin == 0 {
            return Err(Error::Config("samples_per_bin must be at least 1".into()));
        }
        for set in self.variable_sets() {
            if set.is_empty() {
                return Err(Error::Config("variable sets must not be empty".into()));
            }
            let mut seen = vec![false; self.domain.dim()];
            for &i in &set {
                if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Config(format!("invalid variable set {set:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn variable_sets(&self) -> Vec<Vec<usize>> {
        match &self.variables {
            VariableStrategy::EachSingle => (0..self.domain.dim()).map(|i| vec![i]).collect(),
            VariableStrategy::Sets(s) => s.clone(),
        }
    }

    /// Number of sub-problems the plan emits.
    pub fn subproblem_count(&self) -> u64 {
        let per_sweep: u64 = self
            .variable_sets()
            .iter()
            .map(|set| {
                (0..self.domain.dim())
                    .filter(|i| !set.contains(i))
                    .map(|i| self.bins[i] as u64)
                    .product::<u64>()
            })
            .sum();
        per_sweep * self.samples_per_bin as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Subproblem {
    pub variables: Vec<usize>,
    /// Chosen bin per node; `None` for variable nodes.
    pub bins: Vec<Option<usize>>,
    pub region: InputBox,
}

/// Sub-domains in emission order. Pins are drawn sequentially from a
/// ChaCha8 stream seeded per sample sweep.
pub fn ris_subproblems(plan: &SegmentationPlan) -> Result<Vec<Subproblem>> {
    plan.validate()?;
    let bins = make_bins(&plan.domain, &plan.bins)?;
    let n = plan.domain.dim();
    let mut out = Vec::new();
    for set in plan.variable_sets() {
        let fixed: Vec<usize> = (0..n).filter(|i| !set.contains(i)).collect();
        for sweep in 0..plan.samples_per_bin {
            let mut rng = ChaCha8Rng::seed_from_u64(plan.rng_seed.wrapping_add(sweep as u64));
            // Odometer over fixed-node bins, first fixed node slowest.
            let mut idx = vec![0usize; fixed.len()];
            loop {
                let mut region = plan.domain.clone();
                let mut chosen = vec![None; n];
                for (k, &node) in fixed.iter().enumerate() {
                    let (lo, hi) = bins[node][idx[k]];
                    let v = if lo < hi { rng.gen_range(lo..hi) } else { lo };
                    region.lower[node] = v;
                    region.upper[node] = v;
                    chosen[node] = Some(idx[k]);
                }
                out.push(Subproblem {
                    variables: set.clone(),
                    bins: chosen,
                    region,
                });
                let mut d = fixed.len();
                loop {
                    if d == 0 {
                        break;
                    }
                    d -= 1;
                    idx[d] += 1;
                    if idx[d] < bins[fixed[d]].len() {
                        break;
                    }
                    idx[d] = 0;
                }
                if idx.iter().all(|&v| v == 0) {
                    break;
                }
            }
        }
    }
    Ok(out)
}

struct Outcome {
    index: usize,
    verdict: Verdict,
}

/// Verify every sub-problem with `engine`, using up to `workers` threads.
/// The first SAT (lowest sub-problem index) cancels every sub-problem after
/// it; sub-problems before it always finish, so the reported witness does
/// not depend on scheduling. Precedence: SAT, then TIMEOUT, then NONE_FOUND.
pub fn ris_verify(
    net: &Network,
    prop: &SafetyProperty,
    plan: &SegmentationPlan,
    engine: Engine,
    cfg: &EngineConfig,
    workers: usize,
) -> Result<Verdict> {
    let start = Instant::now();
    prop.validate_for(net)?;
    if !plan.domain.is_subset_of(&prop.input_box) {
        return Err(Error::Config("segmentation domain must lie inside the property's input box".into()));
    }
    let subs = ris_subproblems(plan)?;
    debug!(count = subs.len(), "segmentation sub-problems");
    let stops: Vec<AtomicBool> = subs.iter().map(|_| AtomicBool::new(false)).collect();
    let next = AtomicUsize::new(0);
    let first_sat = AtomicUsize::new(usize::MAX);
    let outcomes: Mutex<Vec<Outcome>> = Mutex::new(Vec::new());
    let error: Mutex<Option<Error>> = Mutex::new(None);

    let work = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        if i >= subs.len() || i > first_sat.load(Ordering::SeqCst) || error.lock().unwrap().is_some() {
            return;
        }
        let sub_prop = Property::Safety(SafetyProperty {
            input_box: subs[i].region.clone(),
            ..prop.clone()
        });
        let ctl = Control::new(cfg, Instant::now()).with_stop(&stops[i]);
        match engine::verify_with(net, &sub_prop, engine, cfg, &ctl) {
            Ok(v) => {
                if stops[i].load(Ordering::SeqCst) {
                    // Cancelled by an earlier SAT; the result is irrelevant.
                    continue;
                }
                if v.kind == VerdictKind::Sat {
                    first_sat.fetch_min(i, Ordering::SeqCst);
                    for s in &stops[i + 1..] {
                        s.store(true, Ordering::SeqCst);
                    }
                }
                outcomes.lock().unwrap().push(Outcome { index: i, verdict: v });
            }
            Err(e) => {
                *error.lock().unwrap() = Some(e);
                return;
            }
        }
    };
    let workers = workers.max(1).min(subs.len().max(1));
    if workers == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(work);
            }
        });
    }
    if let Some(e) = error.into_inner().unwrap() {
        return Err(e);
    }

    let mut outcomes = outcomes.into_inner().unwrap();
    outcomes.sort_by_key(|o| o.index);
    let mut stats = Stats::default();
    for o in &outcomes {
        stats.add(&o.verdict.stats);
    }
    stats.subproblems = Some(outcomes.len() as u64);
    let sat = outcomes.iter().find(|o| o.verdict.kind == VerdictKind::Sat);
    let (kind, witness) = if let Some(o) = sat {
        let ce = o.verdict.witness.clone().expect("SAT carries a witness");
        Property::Safety(prop.clone()).revalidate(net, &ce)?;
        (VerdictKind::Sat, Some(ce))
    } else if outcomes.iter().any(|o| o.verdict.kind == VerdictKind::Timeout) {
        (VerdictKind::Timeout, None)
    } else {
        (VerdictKind::NoneFound, None)
    };
    stats.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(Verdict { kind, witness, stats })
}

/// Evaluate the network on a regular grid over the property's box. A step
/// wider than a node's range samples only that node's lower bound.
pub fn coarse_grid_verify(net: &Network, prop: &SafetyProperty, steps: &[f64], cfg: &EngineConfig) -> Result<Verdict> {
    let start = Instant::now();
    prop.validate_for(net)?;
    let grid = Grid::new(&prop.input_box, steps)?;
    debug!(points = grid.len(), "coarse grid");
    let wrapped = Property::Safety(prop.clone());
    let mut stats = Stats::default();
    let (kind, witness) = match engine::scan_grid(net, &wrapped, &grid, &Control::new(cfg, start), &mut stats)? {
        Ok(Some(ce)) => (VerdictKind::Sat, Some(ce)),
        Ok(None) => (VerdictKind::NoneFound, None),
        Err(()) => (VerdictKind::Timeout, None),
    };
    stats.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(Verdict { kind, witness, stats })
}

/// Segmentation pays off iff `I^n > M^n * I! / (M! M'!)`, evaluated exactly.
pub fn ris_optimality(i: u64, m: u64, mp: u64, n: u32) -> Result<bool> {
    if m.checked_add(mp) != Some(i) {
        return Err(Error::Config(format!("I = {i} must equal M + M' = {m} + {mp}")));
    }
    if i == 0 || m == 0 || n == 0 {
        return Err(Error::Config("I, M and n must be positive".into()));
    }
    let fact = |k: u64| -> BigUint { (1..=k).map(BigUint::from).product() };
    // I^n * M! * M'! > M^n * I!
    let lhs = BigUint::from(i).pow(n) * fact(m) * fact(mp);
    let rhs = BigUint::from(m).pow(n) * fact(i);
    Ok(lhs > rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Layer, NetworkParts, OutputConvention};
    use crate::property::{acas_default_domain, acas_properties, Constraint};

    fn unit_box(n: usize, hi: f64) -> InputBox {
        InputBox::new(vec![0.0; n], vec![hi; n]).unwrap()
    }

    #[test]
    fn bins_follow_formula() {
        let b = make_bins(&InputBox::new(vec![0.0], vec![10.0]).unwrap(), &[5]).unwrap();
        assert_eq!(b[0], vec![(0.0, 2.0), (2.0, 4.0), (4.0, 6.0), (6.0, 8.0), (8.0, 10.0)]);
        let b = make_bins(&InputBox::new(vec![-3.0], vec![7.5]).unwrap(), &[1]).unwrap();
        assert_eq!(b[0], vec![(-3.0, 7.5)]);
        let pinned = InputBox::new(vec![1.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(make_bins(&pinned, &[2, 1]).is_err());
        assert!(make_bins(&pinned, &[1, 0]).is_err());
        assert!(make_bins(&pinned, &[1, 3]).is_ok());
    }

    #[test]
    fn two_node_plan_by_hand() {
        let plan = SegmentationPlan::new(unit_box(2, 1.0), vec![2, 2], VariableStrategy::Sets(vec![vec![0]]), 9, 1).unwrap();
        let subs = ris_subproblems(&plan).unwrap();
        assert_eq!(subs.len(), 2);
        for (k, s) in subs.iter().enumerate() {
            assert_eq!((s.region.lower[0], s.region.upper[0]), (0.0, 1.0));
            assert!(s.region.is_degenerate(1));
            let v = s.region.lower[1];
            assert!(v >= 0.5 * k as f64 && v < 0.5 * (k + 1) as f64);
            assert_eq!(s.bins, vec![None, Some(k)]);
        }
    }

    #[test]
    fn subproblem_counts() {
        let domain = acas_default_domain();
        let p = SegmentationPlan::new(domain.clone(), vec![3, 4, 4, 2, 2], VariableStrategy::Sets(vec![vec![0]]), 1, 1).unwrap();
        assert_eq!(ris_subproblems(&p).unwrap().len(), 64);
        let p = SegmentationPlan::new(domain.clone(), vec![3, 4, 4, 2, 2], VariableStrategy::EachSingle, 1, 1).unwrap();
        assert_eq!(p.subproblem_count(), 352);
        assert_eq!(ris_subproblems(&p).unwrap().len(), 352);
        let all = SegmentationPlan::new(domain.clone(), vec![3, 4, 4, 2, 2], VariableStrategy::Sets(vec![(0..5).collect()]), 1, 1)
            .unwrap();
        let subs = ris_subproblems(&all).unwrap();
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].region, domain);
        let twice = SegmentationPlan { samples_per_bin: 2, ..p };
        assert_eq!(ris_subproblems(&twice).unwrap().len(), 704);
    }

    #[test]
    fn subproblems_are_sound_and_reproducible() {
        let domain = acas_default_domain();
        let plan = SegmentationPlan::new(domain.clone(), vec![2, 3, 1, 4, 4], VariableStrategy::EachSingle, 42, 1).unwrap();
        let a = ris_subproblems(&plan).unwrap();
        let b = ris_subproblems(&plan).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|s| s.region.is_subset_of(&domain)));
        let other = ris_subproblems(&SegmentationPlan { rng_seed: 43, ..plan }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn bad_plans_rejected() {
        let d = unit_box(2, 1.0);
        assert!(SegmentationPlan::new(d.clone(), vec![2], VariableStrategy::EachSingle, 0, 1).is_err());
        assert!(SegmentationPlan::new(d.clone(), vec![2, 2], VariableStrategy::Sets(vec![vec![]]), 0, 1).is_err());
        assert!(SegmentationPlan::new(d.clone(), vec![2, 2], VariableStrategy::Sets(vec![vec![0, 0]]), 0, 1).is_err());
        assert!(SegmentationPlan::new(d.clone(), vec![2, 2], VariableStrategy::Sets(vec![vec![2]]), 0, 1).is_err());
        assert!(SegmentationPlan::new(d, vec![2, 2], VariableStrategy::EachSingle, 0, 0).is_err());
        let f = PlanFile::parse(r#"{"bins":[2,3],"variables":{"sets":[[1]]},"seed":5}"#).unwrap();
        assert_eq!(f.samples_per_bin, 1);
        assert!(PlanFile::parse(r#"{"bins":[2,3],"extra":1}"#).is_err());
    }

    // o = x0 + x1 (RAW), safe iff o <= 1.5 over [0, 1]^2: violated on the
    // upper-right half-space x0 + x1 > 1.5.
    fn sum_net() -> Network {
        let layers = vec![Layer::new(2, 1, vec![1.0, 1.0], vec![0.0]).unwrap()];
        Network::new(NetworkParts::plain(layers, OutputConvention::Raw)).unwrap()
    }

    fn sum_prop(limit: f64) -> SafetyProperty {
        SafetyProperty {
            id: "sum".into(),
            input_box: unit_box(2, 1.0),
            constraint: Constraint::Le { index: 0, value: limit },
            output_space: Default::default(),
        }
    }

    #[test]
    fn coarse_grid_finds_half_space_violation_quickly() {
        let net = sum_net();
        let v = coarse_grid_verify(&net, &sum_prop(0.5), &[0.25, 0.25], &EngineConfig::default()).unwrap();
        assert_eq!(v.kind, VerdictKind::Sat);
        assert!(v.stats.points <= 4);
        let v = coarse_grid_verify(&net, &sum_prop(5.0), &[0.25, 0.25], &EngineConfig::default()).unwrap();
        assert_eq!(v.kind, VerdictKind::NoneFound);
        assert_eq!(v.stats.points, 25);
    }

    #[test]
    fn coarse_grid_pinned_node_is_one_sample() {
        let net = sum_net();
        let mut p = sum_prop(5.0);
        p.input_box = InputBox::new(vec![0.0, 0.3], vec![1.0, 0.3]).unwrap();
        let v = coarse_grid_verify(&net, &p, &[0.5, 0.5], &EngineConfig::default()).unwrap();
        assert_eq!(v.stats.points, 3);
    }

    #[test]
    fn coarse_grid_on_acas_p1_shape() {
        let p1 = acas_properties(&acas_default_domain()).unwrap().remove(0);
        let steps = [10000.0, 1.0, 1.0, 500.0, 500.0];
        let grid = Grid::new(&p1.input_box, &steps).unwrap();
        let expected: u64 = (0..5)
            .map(|i| ((p1.input_box.upper[i] - p1.input_box.lower[i]) / steps[i]).floor() as u64 + 1)
            .product();
        assert_eq!(grid.len(), expected);
        // Constant-output net that satisfies P1 everywhere.
        let layers = vec![Layer::new(5, 5, vec![0.0; 25], vec![0.0; 5]).unwrap()];
        let net = Network::new(NetworkParts::plain(layers, OutputConvention::Argmin)).unwrap();
        let v = coarse_grid_verify(&net, &p1, &steps, &EngineConfig::default()).unwrap();
        assert_eq!(v.kind, VerdictKind::NoneFound);
        assert_eq!(v.stats.points, expected);
    }

    #[test]
    fn ris_all_pass_is_none_found() {
        let net = sum_net();
        let plan = SegmentationPlan::new(unit_box(2, 1.0), vec![2, 2], VariableStrategy::EachSingle, 3, 1).unwrap();
        for workers in [1, 3] {
            let v = ris_verify(&net, &sum_prop(2.5), &plan, Engine::Reduced, &EngineConfig::default(), workers).unwrap();
            assert_eq!(v.kind, VerdictKind::NoneFound);
            assert_eq!(v.stats.subproblems, Some(4));
        }
    }

    #[test]
    fn ris_violation_is_found_and_revalidated() {
        let net = sum_net();
        let plan = SegmentationPlan::new(unit_box(2, 1.0), vec![4, 4], VariableStrategy::EachSingle, 3, 1).unwrap();
        let prop = sum_prop(1.75);
        let seq = ris_verify(&net, &prop, &plan, Engine::Reduced, &EngineConfig::default(), 1).unwrap();
        assert_eq!(seq.kind, VerdictKind::Sat);
        let w = seq.witness.as_ref().unwrap();
        assert!(prop.input_box.contains(&w.input));
        assert!(w.input[0] + w.input[1] > 1.75);
        assert!(seq.stats.subproblems.unwrap() < plan.subproblem_count());
        let par = ris_verify(&net, &prop, &plan, Engine::Reduced, &EngineConfig::default(), 4).unwrap();
        assert_eq!(par.witness.unwrap().input, w.input);
    }

    #[test]
    fn optimality_examples() {
        assert!(ris_optimality(5, 1, 4, 2).unwrap());
        assert!(!ris_optimality(2, 1, 1, 1).unwrap());
        assert!(!ris_optimality(4, 4, 0, 3).unwrap());
        assert!(ris_optimality(5, 1, 3, 2).is_err());
        assert!(ris_optimality(0, 0, 0, 1).is_err());
    }
}

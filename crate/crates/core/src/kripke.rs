//! Kripke structures for a network under noise, used for size accounting
//! and for validating state merging.
//!
//! Topology of the models built here: a single initial state `s0` labeled
//! `init` with an edge to every class state, and complete connectivity
//! (self-loops included) among the class states. With `k` class states that
//! gives `1 + k` states and `k + k^2 = k(k+1)` transitions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};

pub const INIT_PROP: &str = "init";

#[derive(Debug, Clone, PartialEq)]
pub struct KripkeStructure {
    props: Vec<String>,
    /// Sorted proposition ids per state.
    labels: Vec<Vec<u32>>,
    initial: Vec<usize>,
    succ: Vec<FixedBitSet>,
}

impl KripkeStructure {
    pub fn new(props: Vec<String>, labels: Vec<Vec<u32>>, initial: Vec<usize>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = labels.len();
        if initial.is_empty() {
            return Err(Error::Config("a Kripke structure needs an initial state".into()));
        }
        if let Some(&s) = initial.iter().find(|&&s| s >= n) {
            return Err(Error::Config(format!("initial state {s} does not exist")));
        }
        let mut labels = labels;
        for (s, l) in labels.iter_mut().enumerate() {
            if l.is_empty() {
                return Err(Error::Config(format!("state {s} is unlabeled")));
            }
            if l.iter().any(|&p| p as usize >= props.len()) {
                return Err(Error::Config(format!("state {s} uses an unknown proposition")));
            }
            l.sort_unstable();
            l.dedup();
        }
        let mut succ = vec![FixedBitSet::with_capacity(n); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Config(format!("transition ({a}, {b}) leaves the state set")));
            }
            succ[a].insert(b);
        }
        let mut initial = initial;
        initial.sort_unstable();
        initial.dedup();
        Ok(KripkeStructure {
            props,
            labels,
            initial,
            succ,
        })
    }

    pub fn state_count(&self) -> usize {
        self.labels.len()
    }

    pub fn transition_count(&self) -> usize {
        self.succ.iter().map(|row| row.count_ones(..)).sum()
    }

    pub fn initial_states(&self) -> &[usize] {
        &self.initial
    }

    pub fn label(&self, state: usize) -> Vec<&str> {
        self.labels[state].iter().map(|&p| self.props[p as usize].as_str()).collect()
    }

    pub fn successors(&self, state: usize) -> impl Iterator<Item = usize> + '_ {
        self.succ[state].ones()
    }

    pub fn has_transition(&self, a: usize, b: usize) -> bool {
        self.succ[a].contains(b)
    }

    /// Label sequences along every path of 1..=`depth` states starting in
    /// an initial state.
    pub fn label_traces(&self, depth: usize) -> BTreeSet<Vec<Vec<String>>> {
        let names = |s: usize| -> Vec<String> { self.label(s).into_iter().map(String::from).collect() };
        let mut out = BTreeSet::new();
        let mut frontier: Vec<(usize, Vec<Vec<String>>)> =
            self.initial.iter().map(|&s| (s, vec![names(s)])).collect();
        for level in 1..=depth {
            let mut next = Vec::new();
            for (s, trace) in frontier {
                if level < depth {
                    for t in self.successors(s) {
                        let mut longer = trace.clone();
                        longer.push(names(t));
                        next.push((t, longer));
                    }
                }
                out.insert(trace);
            }
            frontier = next;
        }
        out
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph kripke {\n");
        for s in 0..self.state_count() {
            let shape = if self.initial.binary_search(&s).is_ok() { "doublecircle" } else { "circle" };
            let _ = writeln!(
                out,
                "  s{s} [shape={shape}, label=\"s{s}\\n{{{}}}\"];",
                self.label(s).join(",")
            );
        }
        for s in 0..self.state_count() {
            for t in self.successors(s) {
                let _ = writeln!(out, "  s{s} -> s{t};");
            }
        }
        out.push_str("}\n");
        out
    }

    // Quotient by a representative map; representatives keep their labels.
    fn quotient(&self, rep: &[usize]) -> KripkeStructure {
        let mut id = vec![usize::MAX; rep.len()];
        let mut labels = Vec::new();
        for s in 0..rep.len() {
            let r = rep[s];
            if id[r] == usize::MAX {
                id[r] = labels.len();
                labels.push(self.labels[r].clone());
            }
            id[s] = id[r];
        }
        let n = labels.len();
        let mut succ = vec![FixedBitSet::with_capacity(n); n];
        for s in 0..rep.len() {
            for t in self.succ[s].ones() {
                succ[id[s]].insert(id[t]);
            }
        }
        let mut initial: Vec<usize> = self.initial.iter().map(|&s| id[s]).collect();
        initial.sort_unstable();
        initial.dedup();
        KripkeStructure {
            props: self.props.clone(),
            labels,
            initial,
            succ,
        }
    }
}

fn class_props(classes: usize) -> Vec<String> {
    std::iter::once(INIT_PROP.to_string())
        .chain((0..classes).map(|c| format!("class_{c}")))
        .collect()
}

fn complete_model(classes: usize, per_class: usize) -> KripkeStructure {
    let k = classes * per_class;
    let n = 1 + k;
    let mut labels = Vec::with_capacity(n);
    labels.push(vec![0]);
    // State 1 + p*C + c: noise option p, class c.
    for _ in 0..per_class {
        for c in 0..classes {
            labels.push(vec![1 + c as u32]);
        }
    }
    let mut succ = vec![FixedBitSet::with_capacity(n); n];
    succ[0].insert_range(1..n);
    for row in succ.iter_mut().skip(1) {
        row.insert_range(1..n);
    }
    KripkeStructure {
        props: class_props(classes),
        labels,
        initial: vec![0],
        succ,
    }
}

/// Model with one state per (noise option, class) pair: `1 + nC` states and
/// `nC(nC+1)` transitions.
pub fn build_explicit_model(n: usize, classes: usize) -> Result<KripkeStructure> {
    if n == 0 || classes == 0 {
        return Err(Error::Config("noise option count and class count must be positive".into()));
    }
    Ok(complete_model(classes, n))
}

/// Model with the noise symbolic: `1 + C` states and `C(C+1)` transitions.
pub fn build_reduced_model(classes: usize) -> Result<KripkeStructure> {
    if classes == 0 {
        return Err(Error::Config("class count must be positive".into()));
    }
    Ok(complete_model(classes, 1))
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) -> bool {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra == rb {
        return false;
    }
    let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
    parent[hi] = lo;
    true
}

/// One round of merging. Siblings (common predecessor) with equal labels and
/// equal sets of successor labels are merged, and so are the two ends of a
/// transition whose states carry equal labels (a jump transition).
fn merge_round(m: &KripkeStructure) -> Option<KripkeStructure> {
    let n = m.state_count();
    let out_labels: Vec<BTreeSet<&[u32]>> = (0..n)
        .map(|s| m.successors(s).map(|t| m.labels[t].as_slice()).collect())
        .collect();
    let mut parent: Vec<usize> = (0..n).collect();
    let mut changed = false;
    for p in 0..n {
        let mut groups: BTreeMap<(&[u32], &BTreeSet<&[u32]>), usize> = BTreeMap::new();
        for s in m.successors(p) {
            match groups.entry((m.labels[s].as_slice(), &out_labels[s])) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(s);
                }
                std::collections::btree_map::Entry::Occupied(e) => changed |= union(&mut parent, *e.get(), s),
            }
        }
        for s in m.successors(p) {
            if s != p && m.labels[s] == m.labels[p] {
                changed |= union(&mut parent, p, s);
            }
        }
    }
    if !changed {
        return None;
    }
    let rep: Vec<usize> = (0..n).map(|s| find(&mut parent, s)).collect();
    Some(m.quotient(&rep))
}

/// Merge equally labeled states until nothing changes. Idempotent.
pub fn merge_equilabeled(m: &KripkeStructure) -> KripkeStructure {
    let mut cur = m.clone();
    while let Some(next) = merge_round(&cur) {
        cur = next;
    }
    cur
}

//! Observation maps and the shared silent-closure subset construction.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::lattice::{valid_ident, Level};
use crate::model::FssmNet;
use crate::statespace::ReachabilityGraph;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObsError {
    #[error("transition `{0}` has no observation")]
    UnmappedTransition(String),
    #[error("observation map names unknown transition `{0}`")]
    UnknownTransition(String),
    #[error("invalid observation symbol `{0}`")]
    InvalidSymbol(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Explicit,
    DerivedFrom(String),
}

/// Assignment of an observable symbol (or silence) to each transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObsMap {
    assignment: BTreeMap<String, Option<String>>,
    provenance: Provenance,
}

impl ObsMap {
    /// An explicit map; must be total over the net's transitions.
    pub fn explicit(net: &FssmNet, assignment: BTreeMap<String, Option<String>>) -> Result<Self, ObsError> {
        for (t, sym) in &assignment {
            if net.transition_index(t).is_none() {
                return Err(ObsError::UnknownTransition(t.clone()));
            }
            if let Some(s) = sym {
                if !valid_ident(s) {
                    return Err(ObsError::InvalidSymbol(s.clone()));
                }
            }
        }
        if let Some(t) = net.transitions().iter().find(|t| !assignment.contains_key(&t.id)) {
            return Err(ObsError::UnmappedTransition(t.id.clone()));
        }
        Ok(ObsMap { assignment, provenance: Provenance::Explicit })
    }

    /// Builds a map without checking it against a net. Graph operations
    /// still fail on transitions it does not cover.
    pub fn from_assignment(assignment: BTreeMap<String, Option<String>>) -> Self {
        ObsMap { assignment, provenance: Provenance::Explicit }
    }

    /// Transitions whose clearance is at most `observer` are observed under
    /// their own id; all others are silent.
    pub fn derived(net: &FssmNet, observer: Level) -> Self {
        let lat = net.lattice();
        let assignment = net
            .transitions()
            .iter()
            .map(|t| (t.id.clone(), lat.leq(t.clearance, observer).then(|| t.id.clone())))
            .collect();
        ObsMap { assignment, provenance: Provenance::DerivedFrom(lat.name(observer).to_string()) }
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn assignment(&self) -> &BTreeMap<String, Option<String>> {
        &self.assignment
    }

    pub fn symbol(&self, transition: &str) -> Option<Option<&str>> {
        self.assignment.get(transition).map(|s| s.as_deref())
    }

    /// Applies `f` to every assignment, e.g. to merge or silence symbols.
    pub fn map_symbols(&self, f: impl Fn(&str, Option<&str>) -> Option<String>) -> ObsMap {
        ObsMap {
            assignment: self
                .assignment
                .iter()
                .map(|(t, s)| (t.clone(), f(t, s.as_deref())))
                .collect(),
            provenance: Provenance::Explicit,
        }
    }

    /// Per-label symbol indices into the sorted alphabet used by `names`.
    pub(crate) fn labelling(&self, names: &[String]) -> Result<Labelling, ObsError> {
        let mut syms = Vec::with_capacity(names.len());
        for n in names {
            let s = self
                .assignment
                .get(n)
                .ok_or_else(|| ObsError::UnmappedTransition(n.clone()))?;
            syms.push(s.clone());
        }
        let alphabet: Vec<String> = syms
            .iter()
            .flatten()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let label_sym = syms
            .iter()
            .map(|s| s.as_ref().map(|s| alphabet.binary_search(s).unwrap() as u32))
            .collect();
        Ok(Labelling { alphabet, label_sym })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Labelling {
    pub alphabet: Vec<String>,
    pub label_sym: Vec<Option<u32>>,
}

/// A plain labelled transition system with initial state 0. Labels index
/// into `labels` (transition ids).
#[derive(Debug, Clone)]
pub(crate) struct Lts {
    pub succ: Vec<Vec<(u32, u32)>>,
    pub labels: Vec<String>,
}

impl Lts {
    pub fn from_graph(g: &ReachabilityGraph) -> Self {
        let succ = (0..g.states().len())
            .map(|s| {
                g.out_edges(s)
                    .iter()
                    .map(|e| (e.transition() as u32, e.dst as u32))
                    .collect()
            })
            .collect();
        Lts { succ, labels: g.transition_names().to_vec() }
    }

    pub fn len(&self) -> usize {
        self.succ.len()
    }
}

/// Result of determinizing an LTS under a labelling.
#[derive(Debug, Clone)]
pub(crate) struct Determinized {
    pub alphabet: Vec<String>,
    pub macros: Vec<Vec<u32>>,
    /// Per macro-state, `(symbol, target)` sorted by symbol.
    pub edges: Vec<Vec<(u32, u32)>>,
}

struct Closure {
    stamp: Vec<u32>,
    generation: u32,
    stack: Vec<u32>,
}

impl Closure {
    fn new(n: usize) -> Self {
        Closure { stamp: vec![0; n], generation: 0, stack: Vec::new() }
    }

    fn run(&mut self, lts: &Lts, lab: &Labelling, seeds: impl IntoIterator<Item = u32>) -> Vec<u32> {
        self.generation += 1;
        let gen = self.generation;
        let mut out = Vec::new();
        for s in seeds {
            if self.stamp[s as usize] != gen {
                self.stamp[s as usize] = gen;
                self.stack.push(s);
            }
        }
        while let Some(s) = self.stack.pop() {
            out.push(s);
            for &(l, d) in &lts.succ[s as usize] {
                if lab.label_sym[l as usize].is_none() && self.stamp[d as usize] != gen {
                    self.stamp[d as usize] = gen;
                    self.stack.push(d);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Subset construction with silent closure. Macro-states are numbered
/// breadth-first, successors taken in symbol order.
pub(crate) fn determinize(lts: &Lts, lab: &Labelling) -> Determinized {
    let mut closure = Closure::new(lts.len());
    let init = closure.run(lts, lab, [0u32]);
    let mut index: HashMap<Vec<u32>, u32> = HashMap::new();
    index.insert(init.clone(), 0);
    let mut macros = vec![init];
    let mut edges: Vec<Vec<(u32, u32)>> = Vec::new();
    let mut i = 0;
    while i < macros.len() {
        let mut buckets: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for &s in &macros[i] {
            for &(l, d) in &lts.succ[s as usize] {
                if let Some(sym) = lab.label_sym[l as usize] {
                    buckets.entry(sym).or_default().push(d);
                }
            }
        }
        let mut out = Vec::with_capacity(buckets.len());
        for (sym, targets) in buckets {
            let c = closure.run(lts, lab, targets);
            let id = match index.get(&c) {
                Some(&id) => id,
                None => {
                    let id = macros.len() as u32;
                    index.insert(c.clone(), id);
                    macros.push(c);
                    id
                }
            };
            out.push((sym, id));
        }
        edges.push(out);
        i += 1;
    }
    Determinized { alphabet: lab.alphabet.clone(), macros, edges }
}

/// Breadth-first search over a determinized automaton for the shortlex-least
/// observation reaching a macro-state satisfying `goal`.
pub(crate) fn shortest_to(d: &Determinized, goal: impl Fn(usize) -> bool) -> Option<(Vec<u32>, usize)> {
    let n = d.macros.len();
    let mut prev: Vec<Option<(u32, u32)>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(m) = queue.pop_front() {
        if goal(m) {
            let mut word = Vec::new();
            let mut cur = m;
            while let Some((p, sym)) = prev[cur] {
                word.push(sym);
                cur = p as usize;
            }
            word.reverse();
            return Some((word, m));
        }
        for &(sym, t) in &d.edges[m] {
            if !seen[t as usize] {
                seen[t as usize] = true;
                prev[t as usize] = Some((m as u32, sym));
                queue.push_back(t as usize);
            }
        }
    }
    None
}

/// Shortest run of `lts` whose observation is `word` and which ends in a
/// state accepted by `target`; returns its label sequence.
pub(crate) fn run_with_observation(
    lts: &Lts,
    lab: &Labelling,
    word: &[u32],
    target: impl Fn(usize) -> bool,
) -> Option<Vec<u32>> {
    let width = word.len() + 1;
    let key = |s: usize, pos: usize| s * width + pos;
    let mut prev: HashMap<usize, (usize, u32)> = HashMap::new();
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    let mut seen = std::collections::HashSet::from([key(0, 0)]);
    while let Some((s, pos)) = queue.pop_front() {
        if pos == word.len() && target(s) {
            let mut labels = Vec::new();
            let mut cur = key(s, pos);
            while let Some(&(p, l)) = prev.get(&cur) {
                labels.push(l);
                cur = p;
            }
            labels.reverse();
            return Some(labels);
        }
        for &(l, d) in &lts.succ[s] {
            let next_pos = match lab.label_sym[l as usize] {
                None => pos,
                Some(sym) if pos < word.len() && word[pos] == sym => pos + 1,
                Some(_) => continue,
            };
            let k = key(d as usize, next_pos);
            if seen.insert(k) {
                prev.insert(k, (key(s, pos), l));
                queue.push_back((d as usize, next_pos));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;

    #[test]
    fn derived_map_silences_high() {
        let net = net3();
        let public = net.lattice().level("Public").unwrap();
        let obs = ObsMap::derived(&net, public);
        assert_eq!(obs.symbol("t_up"), Some(None));
        assert_eq!(obs.symbol("t_pub"), Some(Some("t_pub")));
        assert_eq!(obs.provenance(), &Provenance::DerivedFrom("Public".into()));
    }

    #[test]
    fn explicit_map_must_be_total() {
        let net = net1();
        assert_eq!(
            ObsMap::explicit(&net, BTreeMap::new()),
            Err(ObsError::UnmappedTransition("t_up".into()))
        );
        let extra = BTreeMap::from([("t_up".to_string(), None), ("zz".to_string(), None)]);
        assert_eq!(ObsMap::explicit(&net, extra), Err(ObsError::UnknownTransition("zz".into())));
    }
}

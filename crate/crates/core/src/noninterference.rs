//! Strong nondeterministic non-interference (SNNI): the low-observable trace
//! language must not change when every high transition is deleted.

use std::collections::{HashSet, VecDeque};

use thiserror::Error;

use crate::model::FssmNet;
use crate::observe::{determinize, Lts, ObsError, ObsMap};
use crate::statespace::{explore, ExploreError, ExploreOptions, ReachabilityGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NiError {
    #[error("unknown observer level `{0}`")]
    UnknownLevel(String),
    #[error(transparent)]
    Obs(#[from] ObsError),
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error("purged language is not included in the full language (trace {0:?})")]
    InclusionViolated(Vec<String>),
}

/// Deterministic automaton over observation symbols. Every state accepts,
/// so the language is prefix-closed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteAutomaton {
    alphabet: Vec<String>,
    /// Per state, `(symbol index, target)` sorted by symbol.
    delta: Vec<Vec<(u32, u32)>>,
}

impl FiniteAutomaton {
    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn step(&self, state: usize, symbol: &str) -> Option<usize> {
        let sym = self.alphabet.binary_search_by(|s| s.as_str().cmp(symbol)).ok()? as u32;
        self.delta[state]
            .binary_search_by_key(&sym, |&(s, _)| s)
            .ok()
            .map(|i| self.delta[state][i].1 as usize)
    }

    pub fn accepts<S: AsRef<str>>(&self, word: &[S]) -> bool {
        let mut q = 0;
        for s in word {
            match self.step(q, s.as_ref()) {
                Some(n) => q = n,
                None => return false,
            }
        }
        true
    }

    /// Outgoing `(symbol, target)` pairs of `state`, in symbol order.
    pub fn edges(&self, state: usize) -> impl Iterator<Item = (&str, usize)> + '_ {
        self.delta[state]
            .iter()
            .map(|&(s, t)| (self.alphabet[s as usize].as_str(), t as usize))
    }

    /// Shortlex-least word in `L(self) \ L(other)`, if any.
    pub fn difference_witness(&self, other: &FiniteAutomaton) -> Option<Vec<String>> {
        let mut seen: HashSet<(usize, usize)> = HashSet::from([(0, 0)]);
        let mut queue: VecDeque<(usize, usize, Vec<String>)> = VecDeque::from([(0, 0, Vec::new())]);
        while let Some((a, b, word)) = queue.pop_front() {
            for (sym, a2) in self.edges(a) {
                let mut w = word.clone();
                w.push(sym.to_string());
                match other.step(b, sym) {
                    None => return Some(w),
                    Some(b2) => {
                        if seen.insert((a2, b2)) {
                            queue.push_back((a2, b2, w));
                        }
                    }
                }
            }
        }
        None
    }
}

/// Determinizes the observable behaviour of `g`: silent edges are erased,
/// the rest are read as their symbols.
pub fn project(g: &ReachabilityGraph, obs: &ObsMap) -> Result<FiniteAutomaton, ObsError> {
    let lts = Lts::from_graph(g);
    let lab = obs.labelling(&lts.labels)?;
    let d = determinize(&lts, &lab);
    Ok(FiniteAutomaton { alphabet: d.alphabet, delta: d.edges })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NIVerdict {
    pub holds: bool,
    /// Shortlex-least observation possible with high activity but not
    /// without it.
    pub witness: Option<Vec<String>>,
    /// Transitions treated as high (deleted in the purged system).
    pub high: Vec<String>,
    /// Either exploration hit a limit; the verdict is bounded.
    pub truncated: bool,
}

/// Checks SNNI for an observer at `observer_level` (a level name).
pub fn check_snni(net: &FssmNet, observer_level: &str, opts: &ExploreOptions) -> Result<NIVerdict, NiError> {
    check_snni_named(net, observer_level, None, opts)
}

/// Like [`check_snni`], but low transitions that `names` maps to a symbol
/// are observed under that symbol instead of their id. High transitions
/// stay silent whatever `names` says.
pub fn check_snni_named(
    net: &FssmNet,
    observer_level: &str,
    names: Option<&ObsMap>,
    opts: &ExploreOptions,
) -> Result<NIVerdict, NiError> {
    let lat = net.lattice();
    let observer = lat
        .level(observer_level)
        .map_err(|_| NiError::UnknownLevel(observer_level.to_string()))?;
    let mut obs = ObsMap::derived(net, observer);
    if let Some(names) = names {
        obs = obs.map_symbols(|t, s| {
            s.map(|own| names.symbol(t).flatten().unwrap_or(own).to_string())
        });
    }
    let high: Vec<String> = net
        .transitions()
        .iter()
        .filter(|t| !lat.leq(t.clearance, observer))
        .map(|t| t.id.clone())
        .collect();
    let purged = net.retain_transitions(|t| lat.leq(t.clearance, observer));

    let full_graph = explore(net, opts)?;
    let purged_graph = explore(&purged, opts)?;
    let full = project(&full_graph, &obs)?;
    let low = project(&purged_graph, &obs)?;

    if let Some(w) = low.difference_witness(&full) {
        return Err(NiError::InclusionViolated(w));
    }
    let witness = full.difference_witness(&low);
    Ok(NIVerdict {
        holds: witness.is_none(),
        witness,
        high,
        truncated: full_graph.truncated() || purged_graph.truncated(),
    })
}

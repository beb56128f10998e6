//! Opacity of secrets against an observer.
//!
//! A secret is opaque when no observation lets the observer conclude that it
//! definitely holds. The check builds the observer's state estimator (subset
//! construction with silent closure) and searches it for a macro-state made
//! only of secret states. Run secrets are handled by first taking the product
//! of the graph with a deterministic monitor over transition ids.
//!
//! [`brute_force_opacity`] decides the same question by run enumeration and
//! serves as an exact oracle on acyclic graphs.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::FssmNet;
use crate::observe::{determinize, run_with_observation, shortest_to, Determinized, Lts, ObsError, ObsMap};
use crate::policy::{Predicate, PredicateExpr};
use crate::statespace::ReachabilityGraph;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OpacityError {
    #[error(transparent)]
    Obs(#[from] ObsError),
    #[error("graph has a cycle; brute-force enumeration needs an acyclic graph")]
    CyclicGraph,
    #[error("depth {depth} is below the longest path length {longest}")]
    DepthTooSmall { depth: usize, longest: usize },
    #[error("monitor: {0}")]
    Monitor(String),
}

/// Deterministic monitor over transition ids. Transitions with no explicit
/// edge leave the monitor state unchanged. A run is secret iff the monitor
/// ends in an accepting state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunMonitor {
    states: Vec<String>,
    initial: usize,
    accepting: Vec<bool>,
    delta: HashMap<(usize, String), usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorDecl {
    pub states: Vec<String>,
    pub initial: String,
    pub accepting: Vec<String>,
    pub edges: Vec<(String, String, String)>,
}

impl RunMonitor {
    pub fn new(decl: &MonitorDecl, net: &FssmNet) -> Result<Self, OpacityError> {
        let mut index = HashMap::new();
        for (i, s) in decl.states.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(OpacityError::Monitor(format!("duplicate state `{s}`")));
            }
        }
        let state = |s: &str| {
            index
                .get(s)
                .copied()
                .ok_or_else(|| OpacityError::Monitor(format!("unknown state `{s}`")))
        };
        let initial = state(&decl.initial)?;
        let mut accepting = vec![false; decl.states.len()];
        for a in &decl.accepting {
            accepting[state(a)?] = true;
        }
        let mut delta = HashMap::new();
        for (src, t, dst) in &decl.edges {
            if net.transition_index(t).is_none() {
                return Err(OpacityError::Monitor(format!("unknown transition `{t}`")));
            }
            let key = (state(src)?, t.clone());
            if delta.insert(key, state(dst)?).is_some() {
                return Err(OpacityError::Monitor(format!(
                    "nondeterministic edges from `{src}` on `{t}`"
                )));
            }
        }
        Ok(RunMonitor { states: decl.states.clone(), initial, accepting, delta })
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn step(&self, state: usize, transition: &str) -> usize {
        self.delta
            .get(&(state, transition.to_string()))
            .copied()
            .unwrap_or(state)
    }

    pub fn is_accepting(&self, state: usize) -> bool {
        self.accepting[state]
    }

    pub fn state_name(&self, state: usize) -> &str {
        &self.states[state]
    }

    pub fn accepts<S: AsRef<str>>(&self, run: &[S]) -> bool {
        let end = run.iter().fold(self.initial, |q, t| self.step(q, t.as_ref()));
        self.accepting[end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SecretSpec {
    State(PredicateExpr),
    Run(MonitorDecl),
}

/// A secret resolved against a net.
#[derive(Debug, Clone)]
pub enum Secret {
    State(Predicate),
    Run(RunMonitor),
}

impl Secret {
    pub fn resolve(spec: &SecretSpec, net: &FssmNet) -> Result<Self, String> {
        match spec {
            SecretSpec::State(p) => Predicate::resolve(p, net).map(Secret::State).map_err(|e| e.to_string()),
            SecretSpec::Run(m) => RunMonitor::new(m, net).map(Secret::Run).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObserverAutomaton {
    alphabet: Vec<String>,
    macro_states: Vec<Vec<usize>>,
    edges: Vec<Vec<(u32, u32)>>,
}

impl ObserverAutomaton {
    fn from_determinized(d: Determinized) -> Self {
        ObserverAutomaton {
            alphabet: d.alphabet,
            macro_states: d.macros.into_iter().map(|m| m.into_iter().map(|s| s as usize).collect()).collect(),
            edges: d.edges,
        }
    }

    /// Macro-states in discovery order; index 0 is the initial estimate.
    pub fn macro_states(&self) -> &[Vec<usize>] {
        &self.macro_states
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn edges(&self, m: usize) -> impl Iterator<Item = (&str, usize)> + '_ {
        self.edges[m]
            .iter()
            .map(|&(s, t)| (self.alphabet[s as usize].as_str(), t as usize))
    }

    pub fn num_edges(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// The estimate after observing `word`, if that observation is possible.
    pub fn estimate<S: AsRef<str>>(&self, word: &[S]) -> Option<&[usize]> {
        let mut m = 0;
        for sym in word {
            m = self.edges(m).find(|(s, _)| *s == sym.as_ref())?.1;
        }
        Some(&self.macro_states[m])
    }
}

/// Builds the state estimator of `g` under `obs`.
pub fn build_observer(g: &ReachabilityGraph, obs: &ObsMap) -> Result<ObserverAutomaton, ObsError> {
    let lts = Lts::from_graph(g);
    let lab = obs.labelling(&lts.labels)?;
    Ok(ObserverAutomaton::from_determinized(determinize(&lts, &lab)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExposedState {
    pub state: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monitor: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpacityVerdict {
    pub opaque: bool,
    pub witness: Option<Vec<String>>,
    /// Estimate after the witness; every member is secret.
    pub exposed: Option<Vec<ExposedState>>,
    /// A secret run whose observation is the witness.
    pub example_secret_run: Option<Vec<String>>,
    pub truncated: bool,
}

impl OpacityVerdict {
    fn opaque(truncated: bool) -> Self {
        OpacityVerdict { opaque: true, witness: None, exposed: None, example_secret_run: None, truncated }
    }
}

fn opacity_on_lts(
    lts: &Lts,
    obs: &ObsMap,
    secret: &[bool],
    describe: impl Fn(usize) -> ExposedState,
    truncated: bool,
) -> Result<OpacityVerdict, ObsError> {
    let lab = obs.labelling(&lts.labels)?;
    let d = determinize(lts, &lab);
    let found = shortest_to(&d, |m| d.macros[m].iter().all(|&s| secret[s as usize]));
    let Some((word, m)) = found else {
        return Ok(OpacityVerdict::opaque(truncated));
    };
    let members: HashSet<usize> = d.macros[m].iter().map(|&s| s as usize).collect();
    let run = run_with_observation(lts, &lab, &word, |s| members.contains(&s))
        .expect("estimator members are reachable under their observation");
    let mut exposed: Vec<ExposedState> = d.macros[m].iter().map(|&s| describe(s as usize)).collect();
    exposed.sort_by(|a, b| (a.state, &a.monitor).cmp(&(b.state, &b.monitor)));
    exposed.dedup();
    Ok(OpacityVerdict {
        opaque: false,
        witness: Some(word.iter().map(|&s| d.alphabet[s as usize].clone()).collect()),
        exposed: Some(exposed),
        example_secret_run: Some(run.iter().map(|&l| lts.labels[l as usize].clone()).collect()),
        truncated,
    })
}

/// Current-state opacity of a marking predicate.
pub fn check_current_state_opacity(
    g: &ReachabilityGraph,
    net: &FssmNet,
    obs: &ObsMap,
    secret: &Predicate,
) -> Result<OpacityVerdict, ObsError> {
    let lts = Lts::from_graph(g);
    let flags: Vec<bool> = g.states().iter().map(|m| secret.eval(net, m)).collect();
    opacity_on_lts(&lts, obs, &flags, |s| ExposedState { state: s, monitor: None }, g.truncated())
}

/// Synchronous product of `g` with the monitor; returns the product LTS and
/// the (graph state, monitor state) of each product state.
fn monitor_product(g: &ReachabilityGraph, monitor: &RunMonitor) -> (Lts, Vec<(usize, usize)>) {
    let names = g.transition_names();
    let mut pairs = vec![(0usize, monitor.initial())];
    let mut index: HashMap<(usize, usize), u32> = HashMap::from([((0, monitor.initial()), 0)]);
    let mut succ: Vec<Vec<(u32, u32)>> = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(p) = queue.pop_front() {
        let (s, q) = pairs[p];
        let mut out = Vec::new();
        for e in g.out_edges(s) {
            let next = (e.dst, monitor.step(q, &names[e.transition()]));
            let id = *index.entry(next).or_insert_with(|| {
                pairs.push(next);
                queue.push_back(pairs.len() - 1);
                (pairs.len() - 1) as u32
            });
            out.push((e.transition() as u32, id));
        }
        if succ.len() <= p {
            succ.resize(p + 1, Vec::new());
        }
        succ[p] = out;
    }
    succ.resize(pairs.len(), Vec::new());
    (Lts { succ, labels: names.to_vec() }, pairs)
}

/// Opacity of a run secret given by a monitor.
pub fn check_run_opacity(
    g: &ReachabilityGraph,
    _net: &FssmNet,
    obs: &ObsMap,
    monitor: &RunMonitor,
) -> Result<OpacityVerdict, ObsError> {
    let (lts, pairs) = monitor_product(g, monitor);
    let flags: Vec<bool> = pairs.iter().map(|&(_, q)| monitor.is_accepting(q)).collect();
    opacity_on_lts(
        &lts,
        obs,
        &flags,
        |p| ExposedState { state: pairs[p].0, monitor: Some(monitor.state_name(pairs[p].1).to_string()) },
        g.truncated(),
    )
}

pub fn check_opacity(
    g: &ReachabilityGraph,
    net: &FssmNet,
    obs: &ObsMap,
    secret: &Secret,
) -> Result<OpacityVerdict, ObsError> {
    match secret {
        Secret::State(p) => check_current_state_opacity(g, net, obs, p),
        Secret::Run(m) => check_run_opacity(g, net, obs, m),
    }
}

#[derive(Default)]
struct Group {
    secret_ends: Vec<ExposedState>,
    first_secret_run: Option<Vec<String>>,
    has_public: bool,
}

/// Decides opacity by enumerating every run of length at most `depth`
/// (including the empty run) and grouping runs by observation.
pub fn brute_force_opacity(
    g: &ReachabilityGraph,
    net: &FssmNet,
    obs: &ObsMap,
    secret: &Secret,
    depth: usize,
) -> Result<OpacityVerdict, OpacityError> {
    let longest = g.longest_path().ok_or(OpacityError::CyclicGraph)?;
    if depth < longest {
        return Err(OpacityError::DepthTooSmall { depth, longest });
    }
    let names = g.transition_names();
    let mut symbols = Vec::with_capacity(names.len());
    for n in names {
        symbols.push(obs.symbol(n).ok_or_else(|| ObsError::UnmappedTransition(n.clone()))?);
    }

    let mut groups: BTreeMap<(usize, Vec<String>), Group> = BTreeMap::new();
    let mut run: Vec<String> = Vec::new();
    let mut observed: Vec<String> = Vec::new();

    struct Ctx<'a> {
        g: &'a ReachabilityGraph,
        net: &'a FssmNet,
        secret: &'a Secret,
        symbols: &'a [Option<&'a str>],
        names: &'a [String],
        depth: usize,
    }

    fn visit(
        cx: &Ctx<'_>,
        s: usize,
        run: &mut Vec<String>,
        observed: &mut Vec<String>,
        groups: &mut BTreeMap<(usize, Vec<String>), Group>,
    ) {
        let (is_secret, end) = match cx.secret {
            Secret::State(p) => (p.eval(cx.net, &cx.g.states()[s]), ExposedState { state: s, monitor: None }),
            Secret::Run(m) => {
                let q = run.iter().fold(m.initial(), |q, t| m.step(q, t));
                (m.is_accepting(q), ExposedState { state: s, monitor: Some(m.state_name(q).to_string()) })
            }
        };
        let group = groups.entry((observed.len(), observed.clone())).or_default();
        if is_secret {
            group.secret_ends.push(end);
            if group.first_secret_run.is_none() {
                group.first_secret_run = Some(run.clone());
            }
        } else {
            group.has_public = true;
        }
        if run.len() == cx.depth {
            return;
        }
        for e in cx.g.out_edges(s) {
            let t = e.transition();
            run.push(cx.names[t].clone());
            let sym = cx.symbols[t];
            if let Some(sym) = sym {
                observed.push(sym.to_string());
            }
            visit(cx, e.dst, run, observed, groups);
            if sym.is_some() {
                observed.pop();
            }
            run.pop();
        }
    }

    let cx = Ctx { g, net, secret, symbols: &symbols, names, depth };
    visit(&cx, 0, &mut run, &mut observed, &mut groups);

    // Keys order groups by (length, lexicographic word).
    for ((_, word), group) in groups {
        if !group.has_public && !group.secret_ends.is_empty() {
            let mut exposed = group.secret_ends;
            exposed.sort_by(|a, b| (a.state, &a.monitor).cmp(&(b.state, &b.monitor)));
            exposed.dedup();
            return Ok(OpacityVerdict {
                opaque: false,
                witness: Some(word),
                exposed: Some(exposed),
                example_secret_run: group.first_secret_run,
                truncated: g.truncated(),
            });
        }
    }
    Ok(OpacityVerdict::opaque(g.truncated()))
}

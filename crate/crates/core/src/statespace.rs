//! Operational semantics: bindings, flow-sensitive firing, breadth-first
//! reachability and DOT export.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ArcMode, FssmNet, Marking, Token};
use crate::par::Workers;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FireError {
    #[error("transition `{0}` is not enabled under the given binding")]
    NotEnabled(String),
    #[error("firing `{transition}` exceeds the capacity of place `{place}`")]
    CapacityExceeded { transition: String, place: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExploreError {
    #[error("max_states must be at least 1")]
    ZeroMaxStates,
    #[error("initial marking index {0} out of range ({1} available)")]
    InitialOutOfRange(usize, usize),
    #[error("exploration limit exceeded after {states} states")]
    LimitExceeded { states: usize },
}

/// A transition together with the token chosen for each of its input arcs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Binding {
    pub transition: usize,
    pub choices: Vec<Token>,
}

/// What one firing consumed, read and produced, with place indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowRecord {
    pub transition: usize,
    pub consumed: Vec<(usize, Token)>,
    pub read: Vec<(usize, Token)>,
    pub produced: Vec<(usize, Token)>,
}

impl FlowRecord {
    pub fn inputs(&self) -> impl Iterator<Item = &(usize, Token)> {
        self.consumed.iter().chain(self.read.iter())
    }
}

/// Stable text of a binding's choices: `place:class@Level` per input arc.
pub fn binding_digest(net: &FssmNet, b: &Binding) -> String {
    let t = &net.transitions()[b.transition];
    t.inputs
        .iter()
        .zip(&b.choices)
        .map(|(a, tok)| format!("{}:{}", net.places()[a.place].id, net.token_text(*tok)))
        .collect::<Vec<_>>()
        .join(",")
}

/// Finds the binding of `transition` whose digest is `digest`, if enabled.
pub fn binding_by_digest(net: &FssmNet, m: &Marking, transition: usize, digest: &str) -> Option<Binding> {
    enabled_for(net, m, transition)
        .into_iter()
        .find(|b| binding_digest(net, b) == digest)
}

// Per (place, token) usage while building a binding.
struct Usage {
    place: usize,
    token: Token,
    takes: u32,
    read: bool,
}

fn usage_ok(m: &Marking, u: &Usage) -> bool {
    let need = u.takes + u32::from(u.read);
    m.count(u.place, u.token) >= need
}

fn choose(
    net: &FssmNet,
    m: &Marking,
    t: usize,
    arc: usize,
    chosen: &mut Vec<Token>,
    usage: &mut Vec<Usage>,
    out: &mut Vec<Binding>,
) {
    let tr = &net.transitions()[t];
    if arc == tr.inputs.len() {
        out.push(Binding { transition: t, choices: chosen.clone() });
        return;
    }
    let a = &tr.inputs[arc];
    for (tok, _) in m.tokens_in(a.place) {
        if a.pattern.is_some_and(|c| c != tok.class) {
            continue;
        }
        let pos = usage.iter().position(|u| u.place == a.place && u.token == tok);
        let idx = match pos {
            Some(i) => i,
            None => {
                usage.push(Usage { place: a.place, token: tok, takes: 0, read: false });
                usage.len() - 1
            }
        };
        let saved = (usage[idx].takes, usage[idx].read);
        match a.mode {
            ArcMode::Take => usage[idx].takes += 1,
            ArcMode::Read => usage[idx].read = true,
        }
        if usage_ok(m, &usage[idx]) {
            chosen.push(tok);
            choose(net, m, t, arc + 1, chosen, usage, out);
            chosen.pop();
        }
        usage[idx].takes = saved.0;
        usage[idx].read = saved.1;
        if pos.is_none() {
            usage.pop();
        }
    }
}

fn enabled_for(net: &FssmNet, m: &Marking, t: usize) -> Vec<Binding> {
    let mut out = Vec::new();
    choose(net, m, t, 0, &mut Vec::new(), &mut Vec::new(), &mut out);
    out
}

/// All enabled bindings in canonical (transition id, choices) order.
/// Indistinguishable tokens yield a single choice.
pub fn enabled_bindings(net: &FssmNet, m: &Marking) -> Vec<Binding> {
    (0..net.transitions().len())
        .flat_map(|t| enabled_for(net, m, t))
        .collect()
}

fn is_enabled(net: &FssmNet, m: &Marking, b: &Binding) -> bool {
    let Some(tr) = net.transitions().get(b.transition) else {
        return false;
    };
    if tr.inputs.len() != b.choices.len() {
        return false;
    }
    let mut usage: Vec<Usage> = Vec::new();
    for (a, &tok) in tr.inputs.iter().zip(&b.choices) {
        if a.pattern.is_some_and(|c| c != tok.class) {
            return false;
        }
        let idx = match usage.iter().position(|u| u.place == a.place && u.token == tok) {
            Some(i) => i,
            None => {
                usage.push(Usage { place: a.place, token: tok, takes: 0, read: false });
                usage.len() - 1
            }
        };
        match a.mode {
            ArcMode::Take => usage[idx].takes += 1,
            ArcMode::Read => usage[idx].read = true,
        }
    }
    usage.iter().all(|u| usage_ok(m, u))
}

/// Level of every token the binding produces: join of the input levels and
/// the transition floor.
pub fn output_level(net: &FssmNet, b: &Binding) -> crate::lattice::Level {
    let lat = net.lattice();
    let floor = net.transitions()[b.transition].floor;
    lat.join(lat.join_all(b.choices.iter().map(|t| t.level)), floor)
}

fn successor(net: &FssmNet, m: &Marking, b: &Binding) -> Result<Marking, FireError> {
    let tr = &net.transitions()[b.transition];
    let mut next = m.clone();
    for (a, &tok) in tr.inputs.iter().zip(&b.choices) {
        if a.mode == ArcMode::Take {
            next.remove(a.place, tok, 1);
        }
    }
    let level = output_level(net, b);
    for a in &tr.outputs {
        next.add(a.place, Token { class: a.class, level }, 1);
    }
    for a in &tr.outputs {
        if let Some(cap) = net.places()[a.place].capacity {
            if next.total_in(a.place) > cap as u64 {
                return Err(FireError::CapacityExceeded {
                    transition: tr.id.clone(),
                    place: net.places()[a.place].id.clone(),
                });
            }
        }
    }
    Ok(next)
}

/// Fires `b` at `m`: taken tokens are removed, read tokens stay, and every
/// output arc emits one token at `join(input levels) ∨ floor`.
pub fn fire(net: &FssmNet, m: &Marking, b: &Binding) -> Result<(Marking, FlowRecord), FireError> {
    if !is_enabled(net, m, b) {
        let id = net
            .transitions()
            .get(b.transition)
            .map(|t| t.id.clone())
            .unwrap_or_else(|| format!("#{}", b.transition));
        return Err(FireError::NotEnabled(id));
    }
    let next = successor(net, m, b)?;
    Ok((next, flow_record(net, b)))
}

/// The flow record of a binding, without touching any marking.
pub fn flow_record(net: &FssmNet, b: &Binding) -> FlowRecord {
    let tr = &net.transitions()[b.transition];
    let mut consumed = Vec::new();
    let mut read = Vec::new();
    for (a, &tok) in tr.inputs.iter().zip(&b.choices) {
        match a.mode {
            ArcMode::Take => consumed.push((a.place, tok)),
            ArcMode::Read => read.push((a.place, tok)),
        }
    }
    let level = output_level(net, b);
    let produced = tr
        .outputs
        .iter()
        .map(|a| (a.place, Token { class: a.class, level }))
        .collect();
    FlowRecord { transition: b.transition, consumed, read, produced }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExploreOptions {
    pub max_states: usize,
    pub max_depth: Option<usize>,
    pub initial: usize,
    /// Fail with `LimitExceeded` instead of flagging truncation.
    pub strict: bool,
    /// Worker threads; 1 is sequential, 0 uses every core.
    pub jobs: usize,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions { max_states: 1_000_000, max_depth: None, initial: 0, strict: false, jobs: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub binding: Binding,
}

impl Edge {
    pub fn transition(&self) -> usize {
        self.binding.transition
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub states: usize,
    pub edges: usize,
    pub depth: usize,
}

/// The explored labelled transition system. State 0 is the initial marking;
/// numbering is breadth-first with successors in canonical binding order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachabilityGraph {
    states: Vec<Marking>,
    depth: Vec<u32>,
    edges: Vec<Edge>,
    out_start: Vec<usize>,
    parent: Vec<Option<usize>>,
    transitions: Vec<String>,
    truncated: bool,
}

const NO_PARENT: Option<usize> = None;

impl ReachabilityGraph {
    pub fn states(&self) -> &[Marking] {
        &self.states
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    /// Transition ids by index, as in the explored net.
    pub fn transition_names(&self) -> &[String] {
        &self.transitions
    }

    pub fn depth_of(&self, s: usize) -> usize {
        self.depth[s] as usize
    }

    pub fn out_edges(&self, s: usize) -> &[Edge] {
        &self.edges[self.out_start[s]..self.out_start[s + 1]]
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            states: self.states.len(),
            edges: self.edges.len(),
            depth: self.depth.iter().copied().max().unwrap_or(0) as usize,
        }
    }

    /// Edge indices of the breadth-first tree path from state 0 to `s`;
    /// a shortest path.
    pub fn path_to(&self, s: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut cur = s;
        while let Some(e) = self.parent[cur] {
            path.push(e);
            cur = self.edges[e].src;
        }
        path.reverse();
        path
    }

    pub fn is_acyclic(&self) -> bool {
        // Kahn's algorithm over the explored edges.
        let n = self.states.len();
        let mut indeg = vec![0usize; n];
        for e in &self.edges {
            indeg[e.dst] += 1;
        }
        let mut stack: Vec<usize> = (0..n).filter(|&s| indeg[s] == 0).collect();
        let mut seen = 0;
        while let Some(s) = stack.pop() {
            seen += 1;
            for e in self.out_edges(s) {
                indeg[e.dst] -= 1;
                if indeg[e.dst] == 0 {
                    stack.push(e.dst);
                }
            }
        }
        seen == n
    }

    /// Length of the longest path from state 0 (acyclic graphs only).
    pub fn longest_path(&self) -> Option<usize> {
        if !self.is_acyclic() {
            return None;
        }
        fn go(g: &ReachabilityGraph, s: usize, memo: &mut Vec<Option<usize>>) -> usize {
            if let Some(v) = memo[s] {
                return v;
            }
            let v = g.out_edges(s).iter().map(|e| 1 + go(g, e.dst, memo)).max().unwrap_or(0);
            memo[s] = Some(v);
            v
        }
        let mut memo = vec![None; self.states.len()];
        Some(go(self, 0, &mut memo))
    }
}

/// Breadth-first closure under `fire` from the chosen initial marking.
///
/// Bindings whose firing would overflow a place capacity are skipped. States
/// at `max_depth` are not expanded. Reaching either limit with unexplored
/// successors left sets `truncated` (or fails in strict mode).
pub fn explore(net: &FssmNet, opts: &ExploreOptions) -> Result<ReachabilityGraph, ExploreError> {
    if opts.max_states == 0 {
        return Err(ExploreError::ZeroMaxStates);
    }
    let initial = net
        .initials()
        .get(opts.initial)
        .ok_or(ExploreError::InitialOutOfRange(opts.initial, net.initials().len()))?
        .clone();
    let workers = Workers::new(opts.jobs);

    let mut states = vec![initial.clone()];
    let mut index: HashMap<Marking, usize> = HashMap::new();
    index.insert(initial, 0);
    let mut depth = vec![0u32];
    let mut parent = vec![NO_PARENT];
    let mut edges: Vec<Edge> = Vec::new();
    let mut out_start = vec![0usize];
    let mut truncated = false;

    let mut frontier: Vec<usize> = vec![0];
    let mut level = 0usize;
    while !frontier.is_empty() {
        if opts.max_depth.is_some_and(|d| level >= d) {
            let pending = frontier
                .iter()
                .any(|&s| successors(net, &states[s]).next().is_some());
            if pending {
                if opts.strict {
                    return Err(ExploreError::LimitExceeded { states: states.len() });
                }
                truncated = true;
            }
            for _ in &frontier {
                out_start.push(edges.len());
            }
            break;
        }
        let expanded: Vec<Vec<(Binding, Marking)>> = {
            let states = &states;
            workers.map(&frontier, |&s| successors(net, &states[s]).collect())
        };
        let mut next = Vec::new();
        for (&src, succs) in frontier.iter().zip(expanded) {
            for (binding, m) in succs {
                let dst = match index.get(&m) {
                    Some(&d) => d,
                    None => {
                        if states.len() >= opts.max_states {
                            if opts.strict {
                                return Err(ExploreError::LimitExceeded { states: states.len() });
                            }
                            truncated = true;
                            continue;
                        }
                        let d = states.len();
                        index.insert(m.clone(), d);
                        states.push(m);
                        depth.push(level as u32 + 1);
                        parent.push(Some(edges.len()));
                        next.push(d);
                        d
                    }
                };
                edges.push(Edge { src, dst, binding });
            }
            out_start.push(edges.len());
        }
        frontier = next;
        level += 1;
    }
    // States never expanded (none when the loop drains) get empty ranges.
    while out_start.len() < states.len() + 1 {
        out_start.push(edges.len());
    }

    Ok(ReachabilityGraph {
        states,
        depth,
        edges,
        out_start,
        parent,
        transitions: net.transitions().iter().map(|t| t.id.clone()).collect(),
        truncated,
    })
}

fn successors<'a>(net: &'a FssmNet, m: &'a Marking) -> impl Iterator<Item = (Binding, Marking)> + 'a {
    enabled_bindings(net, m)
        .into_iter()
        .filter_map(move |b| successor(net, m, &b).ok().map(|next| (b, next)))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DotOptions {
    pub show_markings: bool,
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Renders the graph as a DOT digraph. Output is byte-deterministic.
pub fn to_dot(net: &FssmNet, g: &ReachabilityGraph, opts: DotOptions) -> String {
    let mut out = String::from("digraph reachability {\n");
    for (i, m) in g.states().iter().enumerate() {
        if opts.show_markings {
            let label = format!("s{i}\\n{}", dot_escape(&net.canonical_key(m)));
            let _ = writeln!(out, "  s{i} [label=\"{label}\"];");
        } else {
            let _ = writeln!(out, "  s{i} [label=\"s{i}\"];");
        }
    }
    for e in g.edges() {
        let _ = writeln!(
            out,
            "  s{} -> s{} [label=\"{}\"];",
            e.src,
            e.dst,
            dot_escape(&g.transition_names()[e.transition()])
        );
    }
    out.push_str("}\n");
    out
}

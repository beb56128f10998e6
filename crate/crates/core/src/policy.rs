//! Bell-LaPadula checking over declarations and explored flows, plus
//! user-specified marking invariants, with shortest counterexample paths.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::Level;
use crate::model::{ClassId, FssmNet, Marking};
use crate::par::Workers;
use crate::statespace::{
    binding_by_digest, binding_digest, explore, fire, flow_record, ExploreError, ExploreOptions,
    FlowRecord, GraphStats, ReachabilityGraph,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("unresolved {kind} `{id}` in predicate")]
    UnresolvedReference { kind: &'static str, id: String },
    #[error("at least one BLP rule must be enabled")]
    NoRulesEnabled,
    #[error(transparent)]
    Explore(#[from] ExploreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    ReadUp,
    WriteDown,
    Containment,
    Invariant,
}

impl RuleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleKind::ReadUp => "read_up",
            RuleKind::WriteDown => "write_down",
            RuleKind::Containment => "containment",
            RuleKind::Invariant => "invariant",
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlpConfig {
    pub no_read_up: bool,
    pub no_write_down: bool,
    pub containment: bool,
}

impl Default for BlpConfig {
    fn default() -> Self {
        BlpConfig { no_read_up: true, no_write_down: true, containment: true }
    }
}

impl BlpConfig {
    pub fn only(rules: &[RuleKind]) -> Self {
        BlpConfig {
            no_read_up: rules.contains(&RuleKind::ReadUp),
            no_write_down: rules.contains(&RuleKind::WriteDown),
            containment: rules.contains(&RuleKind::Containment),
        }
    }

    fn validate(&self) -> Result<(), PolicyError> {
        if self.no_read_up || self.no_write_down || self.containment {
            Ok(())
        } else {
            Err(PolicyError::NoRulesEnabled)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

impl CmpOp {
    fn apply(self, lhs: u64, rhs: u64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
        }
    }
}

/// A marking predicate, by name. Serialized as a one-key JSON object per
/// node, e.g. `{"not": {"contains": {"place": "p2", "class": "d"}}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PredicateExpr {
    Const(bool),
    Contains {
        place: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        class: Option<String>,
    },
    ExistsGeq { cloud: String, level: String },
    Count { place: String, op: CmpOp, n: u64 },
    Not(Box<PredicateExpr>),
    And(Vec<PredicateExpr>),
    Or(Vec<PredicateExpr>),
}

impl PredicateExpr {
    pub fn contains(place: &str, class: Option<&str>) -> Self {
        PredicateExpr::Contains { place: place.into(), class: class.map(Into::into) }
    }

    pub fn count(place: &str, op: CmpOp, n: u64) -> Self {
        PredicateExpr::Count { place: place.into(), op, n }
    }

    pub fn negate(p: PredicateExpr) -> Self {
        PredicateExpr::Not(Box::new(p))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Node {
    Const(bool),
    /// `Some(None)` pattern: a class that never occurs in the net.
    Contains { place: usize, class: Option<Option<ClassId>> },
    ExistsGeq { places: Vec<usize>, level: Level },
    Count { place: usize, op: CmpOp, n: u64 },
    Not(Box<Node>),
    And(Vec<Node>),
    Or(Vec<Node>),
}

/// A predicate resolved against one net.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    root: Node,
    expr: PredicateExpr,
}

impl Predicate {
    pub fn resolve(expr: &PredicateExpr, net: &FssmNet) -> Result<Self, PolicyError> {
        Ok(Predicate { root: resolve(expr, net)?, expr: expr.clone() })
    }

    pub fn expr(&self) -> &PredicateExpr {
        &self.expr
    }

    pub fn eval(&self, net: &FssmNet, m: &Marking) -> bool {
        eval(&self.root, net, m)
    }
}

fn resolve(e: &PredicateExpr, net: &FssmNet) -> Result<Node, PolicyError> {
    let place = |id: &str| {
        net.place_index(id)
            .ok_or_else(|| PolicyError::UnresolvedReference { kind: "place", id: id.to_string() })
    };
    Ok(match e {
        PredicateExpr::Const(b) => Node::Const(*b),
        PredicateExpr::Contains { place: p, class } => Node::Contains {
            place: place(p)?,
            class: class.as_deref().map(|c| net.class(c)),
        },
        PredicateExpr::ExistsGeq { cloud, level } => {
            let c = net.cloud_index(cloud).ok_or_else(|| PolicyError::UnresolvedReference {
                kind: "cloud",
                id: cloud.clone(),
            })?;
            let level = net.lattice().level(level).map_err(|_| PolicyError::UnresolvedReference {
                kind: "level",
                id: level.clone(),
            })?;
            let places = net
                .places()
                .iter()
                .enumerate()
                .filter(|(_, p)| p.cloud == c)
                .map(|(i, _)| i)
                .collect();
            Node::ExistsGeq { places, level }
        }
        PredicateExpr::Count { place: p, op, n } => Node::Count { place: place(p)?, op: *op, n: *n },
        PredicateExpr::Not(inner) => Node::Not(Box::new(resolve(inner, net)?)),
        PredicateExpr::And(xs) => Node::And(xs.iter().map(|x| resolve(x, net)).collect::<Result<_, _>>()?),
        PredicateExpr::Or(xs) => Node::Or(xs.iter().map(|x| resolve(x, net)).collect::<Result<_, _>>()?),
    })
}

fn eval(n: &Node, net: &FssmNet, m: &Marking) -> bool {
    match n {
        Node::Const(b) => *b,
        Node::Contains { place, class } => match class {
            None => m.total_in(*place) > 0,
            Some(None) => false,
            Some(Some(c)) => m.tokens_in(*place).any(|(t, _)| t.class == *c),
        },
        Node::ExistsGeq { places, level } => places
            .iter()
            .any(|&p| m.tokens_in(p).any(|(t, _)| net.lattice().leq(*level, t.level))),
        Node::Count { place, op, n } => op.apply(m.total_in(*place), *n),
        Node::Not(x) => !eval(x, net, m),
        Node::And(xs) => xs.iter().all(|x| eval(x, net, m)),
        Node::Or(xs) => xs.iter().any(|x| eval(x, net, m)),
    }
}

/// Resolves and evaluates in one step.
pub fn eval_predicate(p: &PredicateExpr, net: &FssmNet, m: &Marking) -> Result<bool, PolicyError> {
    Ok(Predicate::resolve(p, net)?.eval(net, m))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: RuleKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transition: Option<String>,
    /// State the violating firing starts from (invariants: the offending
    /// state). Absent for static warnings.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<usize>,
    /// Shortest path of transition ids from the initial marking.
    pub witness: Vec<String>,
    /// Binding digest of each witness step.
    pub witness_bindings: Vec<String>,
    pub detail: String,
    /// How many edges (or states) exhibit this violation.
    pub occurrences: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    HoldsUpToBound,
    Violated,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "holds",
            Verdict::HoldsUpToBound => "holds up to bound",
            Verdict::Violated => "violated",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyReport {
    pub verdict: Verdict,
    pub violations: Vec<Violation>,
    pub explored: Option<GraphStats>,
    pub truncated: bool,
}

impl PolicyReport {
    fn new(violations: Vec<Violation>, explored: Option<GraphStats>, truncated: bool) -> Self {
        let verdict = if !violations.is_empty() {
            Verdict::Violated
        } else if truncated {
            Verdict::HoldsUpToBound
        } else {
            Verdict::Holds
        };
        PolicyReport { verdict, violations, explored, truncated }
    }

    pub fn has(&self, transition: &str, kind: RuleKind) -> bool {
        self.violations
            .iter()
            .any(|v| v.kind == kind && v.transition.as_deref() == Some(transition))
    }
}

/// Rule violations of a single firing, with human detail text.
pub fn flow_violations(net: &FssmNet, cfg: &BlpConfig, flow: &FlowRecord) -> Vec<(RuleKind, String)> {
    let lat = net.lattice();
    let t = &net.transitions()[flow.transition];
    let lv = |l: Level| lat.name(l);
    let mut out = Vec::new();
    if cfg.no_read_up {
        if let Some((p, tok)) = flow.inputs().find(|(_, tok)| !lat.leq(tok.level, t.clearance)) {
            out.push((
                RuleKind::ReadUp,
                format!(
                    "reads {} from {} above clearance {}",
                    net.token_text(*tok),
                    net.places()[*p].id,
                    lv(t.clearance)
                ),
            ));
        }
    }
    if cfg.no_write_down {
        if let Some((p, _)) = flow
            .produced
            .iter()
            .find(|(p, _)| !lat.leq(t.clearance, net.place_level(*p)))
        {
            out.push((
                RuleKind::WriteDown,
                format!(
                    "clearance {} writes to {} at level {}",
                    lv(t.clearance),
                    net.places()[*p].id,
                    lv(net.place_level(*p))
                ),
            ));
        }
    }
    if cfg.containment {
        if let Some((p, tok)) = flow
            .produced
            .iter()
            .find(|(p, tok)| !lat.leq(tok.level, net.place_level(*p)))
        {
            out.push((
                RuleKind::Containment,
                format!(
                    "produces {} into {} hosted at clearance {}",
                    net.token_text(*tok),
                    net.places()[*p].id,
                    lv(net.place_level(*p))
                ),
            ));
        }
    }
    out
}

fn sort_violations(v: &mut [Violation]) {
    v.sort_by(|a, b| (&a.transition, a.kind).cmp(&(&b.transition, b.kind)));
}

/// Conservative warnings from declarations alone.
pub fn static_blp_check(net: &FssmNet, cfg: &BlpConfig) -> Result<PolicyReport, PolicyError> {
    cfg.validate()?;
    let lat = net.lattice();
    let mut out = Vec::new();
    for t in net.transitions() {
        let mut warn = |kind, detail: String| {
            out.push(Violation {
                kind,
                transition: Some(t.id.clone()),
                state: None,
                witness: Vec::new(),
                witness_bindings: Vec::new(),
                detail,
                occurrences: 1,
            })
        };
        if cfg.no_read_up {
            if let Some(a) = t.inputs.iter().find(|a| !lat.leq(net.place_level(a.place), t.clearance)) {
                warn(
                    RuleKind::ReadUp,
                    format!(
                        "may read from {} at level {} above clearance {}",
                        net.places()[a.place].id,
                        lat.name(net.place_level(a.place)),
                        lat.name(t.clearance)
                    ),
                );
            }
        }
        if cfg.no_write_down {
            if let Some(a) = t.outputs.iter().find(|a| !lat.leq(t.clearance, net.place_level(a.place))) {
                warn(
                    RuleKind::WriteDown,
                    format!(
                        "clearance {} may write to {} at level {}",
                        lat.name(t.clearance),
                        net.places()[a.place].id,
                        lat.name(net.place_level(a.place))
                    ),
                );
            }
        }
        if cfg.containment {
            let bound = lat.join(lat.join_all(t.inputs.iter().map(|a| net.place_level(a.place))), t.floor);
            if let Some(a) = t.outputs.iter().find(|a| !lat.leq(bound, net.place_level(a.place))) {
                warn(
                    RuleKind::Containment,
                    format!(
                        "may produce data up to {} into {} at level {}",
                        lat.name(bound),
                        net.places()[a.place].id,
                        lat.name(net.place_level(a.place))
                    ),
                );
            }
        }
    }
    sort_violations(&mut out);
    Ok(PolicyReport::new(out, None, false))
}

fn witness_of(net: &FssmNet, g: &ReachabilityGraph, path: &[usize]) -> (Vec<String>, Vec<String>) {
    path.iter()
        .map(|&e| {
            let edge = &g.edges()[e];
            (g.transition_names()[edge.transition()].clone(), binding_digest(net, &edge.binding))
        })
        .unzip()
}

/// Evaluates the BLP rules on every explored edge of an existing graph.
pub fn blp_on_graph(
    net: &FssmNet,
    cfg: &BlpConfig,
    g: &ReachabilityGraph,
    jobs: usize,
) -> Result<PolicyReport, PolicyError> {
    cfg.validate()?;
    let workers = Workers::new(jobs);
    let per_edge = workers.map(g.edges(), |e| flow_violations(net, cfg, &flow_record(net, &e.binding)));
    let mut found: BTreeMap<(usize, RuleKind), Violation> = BTreeMap::new();
    for (ei, vs) in per_edge.into_iter().enumerate() {
        let edge = &g.edges()[ei];
        for (kind, detail) in vs {
            found
                .entry((edge.transition(), kind))
                .and_modify(|v| v.occurrences += 1)
                .or_insert_with(|| {
                    let mut path = g.path_to(edge.src);
                    path.push(ei);
                    let (witness, witness_bindings) = witness_of(net, g, &path);
                    Violation {
                        kind,
                        transition: Some(g.transition_names()[edge.transition()].clone()),
                        state: Some(edge.src),
                        witness,
                        witness_bindings,
                        detail,
                        occurrences: 1,
                    }
                });
        }
    }
    let mut out: Vec<Violation> = found.into_values().collect();
    sort_violations(&mut out);
    Ok(PolicyReport::new(out, Some(g.stats()), g.truncated()))
}

/// Explores the net and checks every firing against the BLP rules.
pub fn dynamic_blp_check(
    net: &FssmNet,
    cfg: &BlpConfig,
    opts: &ExploreOptions,
) -> Result<PolicyReport, PolicyError> {
    cfg.validate()?;
    let g = explore(net, opts)?;
    blp_on_graph(net, cfg, &g, opts.jobs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvariantMode {
    Always,
    Never,
}

pub fn check_invariant(
    g: &ReachabilityGraph,
    net: &FssmNet,
    p: &Predicate,
    mode: InvariantMode,
) -> PolicyReport {
    let offends = |m: &Marking| match mode {
        InvariantMode::Always => !p.eval(net, m),
        InvariantMode::Never => p.eval(net, m),
    };
    let bad: Vec<usize> = (0..g.states().len()).filter(|&s| offends(&g.states()[s])).collect();
    let violations = match bad.first() {
        None => Vec::new(),
        Some(&s) => {
            let (witness, witness_bindings) = witness_of(net, g, &g.path_to(s));
            vec![Violation {
                kind: RuleKind::Invariant,
                transition: None,
                state: Some(s),
                witness,
                witness_bindings,
                detail: format!(
                    "state s{s} ({}) {}",
                    net.canonical_key(&g.states()[s]),
                    match mode {
                        InvariantMode::Always => "falsifies the predicate",
                        InvariantMode::Never => "satisfies the predicate",
                    }
                ),
                occurrences: bad.len(),
            }]
        }
    };
    PolicyReport::new(violations, Some(g.stats()), g.truncated())
}

/// Fires the witness path from `initial` and returns the marking reached
/// before the last step, together with the last step's flow record.
fn replay_path(
    net: &FssmNet,
    initial: &Marking,
    v: &Violation,
) -> Option<(Marking, Option<FlowRecord>)> {
    let mut m = initial.clone();
    let mut last = None;
    for (tid, digest) in v.witness.iter().zip(&v.witness_bindings) {
        let t = net.transition_index(tid)?;
        let b = binding_by_digest(net, &m, t, digest)?;
        let (next, flow) = fire(net, &m, &b).ok()?;
        m = next;
        last = Some(flow);
    }
    Some((m, last))
}

/// Re-fires a BLP violation's witness and checks the violation recurs at
/// the final step.
pub fn replay_blp_violation(net: &FssmNet, cfg: &BlpConfig, initial: &Marking, v: &Violation) -> bool {
    if v.witness.is_empty() || v.witness.len() != v.witness_bindings.len() {
        return false;
    }
    match replay_path(net, initial, v) {
        Some((_, Some(flow))) => {
            v.transition.as_deref() == Some(&net.transitions()[flow.transition].id)
                && flow_violations(net, cfg, &flow).iter().any(|(k, _)| *k == v.kind)
        }
        _ => false,
    }
}

/// Re-fires an invariant violation's witness and checks the reached state
/// offends the invariant.
pub fn replay_invariant_violation(
    net: &FssmNet,
    initial: &Marking,
    p: &Predicate,
    mode: InvariantMode,
    v: &Violation,
) -> bool {
    match replay_path(net, initial, v) {
        Some((m, _)) => match mode {
            InvariantMode::Always => !p.eval(net, &m),
            InvariantMode::Never => p.eval(net, &m),
        },
        None => false,
    }
}

//! Shared test support: fixtures, CLI runner, random generators and
//! independent oracles.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::{Path, PathBuf};
use std::process::Command;

use fssm::allocation::{CloudSpec, Cost, EdgeDecl, TaskDecl, Workflow};
use fssm::io::{parse_model, ModelBundle};
use fssm::lattice::{Level, SecurityLattice};
use fssm::model::{
    ArcInDecl, ArcMode, ArcOutDecl, CloudDecl, FssmNet, MarkingDecl, PlaceDecl, TokenDecl, TransitionDecl,
};
use fssm::observe::ObsMap;
use fssm::opacity::MonitorDecl;
use fssm::policy::{CmpOp, PredicateExpr};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    rand::SeedableRng::seed_from_u64(seed)
}

// ---- fixtures and CLI ----

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn load_fixture(name: &str) -> ModelBundle {
    let text = std::fs::read_to_string(fixtures_dir().join(name)).unwrap();
    parse_model(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub struct CliRun {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the `fssm` binary from the fixtures directory.
pub fn run_cli(args: &[&str]) -> CliRun {
    let out = Command::new(env!("CARGO_BIN_EXE_fssm"))
        .args(args)
        .current_dir(fixtures_dir())
        .output()
        .expect("binary runs");
    CliRun {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

/// A CLI invocation with its golden stdout and expected exit code.
pub struct GoldenCase {
    pub name: &'static str,
    pub args: &'static [&'static str],
    pub exit: i32,
}

pub const GOLDEN_CASES: &[GoldenCase] = &[
    GoldenCase { name: "validate_net1", args: &["validate", "net1.json"], exit: 0 },
    GoldenCase { name: "validate_net1_canonical", args: &["validate", "net1.json", "--canonical"], exit: 0 },
    GoldenCase { name: "validate_wf1_json", args: &["validate", "wf1.json", "--format", "json"], exit: 0 },
    GoldenCase { name: "explore_net1", args: &["explore", "net1.json"], exit: 0 },
    GoldenCase { name: "explore_net3_json", args: &["explore", "net3.json", "--format", "json"], exit: 0 },
    GoldenCase {
        name: "explore_net3_truncated",
        args: &["explore", "net3.json", "--max-states", "1"],
        exit: 0,
    },
    GoldenCase { name: "blp_net1", args: &["check", "blp", "net1.json"], exit: 0 },
    GoldenCase { name: "blp_net3", args: &["check", "blp", "net3.json"], exit: 1 },
    GoldenCase { name: "blp_net3_json", args: &["check", "blp", "net3.json", "--format", "json"], exit: 1 },
    GoldenCase { name: "blp_net3_static", args: &["check", "blp", "net3.json", "--static"], exit: 1 },
    GoldenCase { name: "blp_leak", args: &["check", "blp", "net1_leak.json"], exit: 1 },
    GoldenCase {
        name: "blp_leak_containment_only",
        args: &["check", "blp", "net1_leak.json", "--rules", "containment", "--format", "json"],
        exit: 1,
    },
    GoldenCase {
        name: "invariant_never",
        args: &["check", "invariant", "net1.json", "--pred", "p2_has_d", "--mode", "never"],
        exit: 1,
    },
    GoldenCase {
        name: "invariant_always",
        args: &["check", "invariant", "net1.json", "--pred", "p1_at_most_one", "--mode", "always"],
        exit: 0,
    },
    GoldenCase { name: "ni_net2", args: &["check", "ni", "net2.json", "--observer", "low"], exit: 0 },
    GoldenCase {
        name: "ni_net3_json",
        args: &["check", "ni", "net3.json", "--observer", "Public", "--obs", "names", "--format", "json"],
        exit: 1,
    },
    GoldenCase {
        name: "opacity_loud",
        args: &["check", "opacity", "net1.json", "--secret", "in_p2", "--obs", "loud"],
        exit: 1,
    },
    GoldenCase {
        name: "opacity_silent",
        args: &["check", "opacity", "net1.json", "--secret", "in_p2", "--obs", "silent"],
        exit: 0,
    },
    GoldenCase {
        name: "opacity_run_json",
        args: &["check", "opacity", "net1.json", "--secret", "ran_up", "--obs", "loud", "--kind", "run", "--format", "json"],
        exit: 1,
    },
    GoldenCase { name: "allocate_wf1", args: &["allocate", "wf1.json"], exit: 0 },
    GoldenCase {
        name: "allocate_wf1_enumerate",
        args: &["allocate", "wf1.json", "--enumerate", "--format", "json"],
        exit: 0,
    },
];

/// Compares against a golden file; `FSSM_UPDATE_GOLDEN=1` rewrites it.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = golden_dir().join(name);
    if std::env::var_os("FSSM_UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        Err(format!("{name}: output differs from golden\n--- expected\n{expected}\n--- actual\n{actual}"))
    }
}

/// Runs one golden case; returns a description of any mismatch.
pub fn run_golden_case(case: &GoldenCase) -> Result<(), String> {
    let r = run_cli(case.args);
    if r.code != case.exit {
        return Err(format!("{}: exit {} (expected {}), stderr: {}", case.name, r.code, case.exit, r.stderr));
    }
    check_golden(&format!("{}.txt", case.name), &r.stdout)
}

// ---- random lattices ----

/// A lattice of subsets of {0..4} closed under intersection (with the full
/// set), so meet is intersection and join is the least member above the
/// union. `sets[i]` is the subset behind level name `names[i]`.
pub struct SetLattice {
    pub lattice: SecurityLattice,
    pub names: Vec<String>,
    pub sets: Vec<u8>,
}

impl SetLattice {
    pub fn set_of(&self, l: Level) -> u8 {
        let name = self.lattice.name(l);
        self.sets[self.names.iter().position(|n| n == name).unwrap()]
    }

    pub fn level_of(&self, set: u8) -> Level {
        let i = self.sets.iter().position(|&s| s == set).unwrap();
        self.lattice.level(&self.names[i]).unwrap()
    }

    /// Least member containing both; independent of the lattice code.
    pub fn brute_join(&self, a: u8, b: u8) -> u8 {
        let u = a | b;
        *self
            .sets
            .iter()
            .filter(|&&s| s & u == u)
            .min_by_key(|&&s| s.count_ones())
            .unwrap()
    }

    pub fn brute_meet(&self, a: u8, b: u8) -> u8 {
        let i = a & b;
        *self
            .sets
            .iter()
            .filter(|&&s| s & i == s)
            .max_by_key(|&&s| s.count_ones())
            .unwrap()
    }
}

pub fn random_lattice(rng: &mut TestRng, max_levels: usize) -> SetLattice {
    loop {
        let mut family: BTreeSet<u8> = BTreeSet::from([0b1111]);
        let extra = rng.gen_range(0..=max_levels);
        for _ in 0..extra {
            family.insert(rng.gen_range(0..16u8));
        }
        // Close under intersection.
        loop {
            let xs: Vec<u8> = family.iter().copied().collect();
            let before = family.len();
            for &a in &xs {
                for &b in &xs {
                    family.insert(a & b);
                }
            }
            if family.len() == before {
                break;
            }
        }
        if family.len() > max_levels {
            continue;
        }
        let mut sets: Vec<u8> = family.into_iter().collect();
        sets.shuffle(rng);
        let names: Vec<String> = (0..sets.len()).map(|i| format!("L{i}")).collect();
        // Covering pairs of the inclusion order.
        let sub = |a: u8, b: u8| a != b && a & b == a;
        let mut covers = Vec::new();
        for i in 0..sets.len() {
            for j in 0..sets.len() {
                if sub(sets[i], sets[j]) && !(0..sets.len()).any(|k| sub(sets[i], sets[k]) && sub(sets[k], sets[j])) {
                    covers.push((names[i].clone(), names[j].clone()));
                }
            }
        }
        covers.shuffle(rng);
        let lattice = SecurityLattice::build(&names, &covers).expect("closure systems are lattices");
        return SetLattice { lattice, names, sets };
    }
}

// ---- random nets ----

pub fn lat2() -> SecurityLattice {
    SecurityLattice::build(&["Public", "Secret"], &[("Public", "Secret")]).unwrap()
}

pub fn latd() -> SecurityLattice {
    SecurityLattice::build(&["L", "A", "B", "H"], &[("L", "A"), ("L", "B"), ("A", "H"), ("B", "H")]).unwrap()
}

fn pick<'a, T>(rng: &mut TestRng, xs: &'a [T]) -> &'a T {
    &xs[rng.gen_range(0..xs.len())]
}

/// Declarations of a random net whose firings always move token mass to
/// higher-numbered places: every transition takes from some place and
/// writes only to places above every place it takes from.
#[derive(Debug, Clone)]
pub struct NetDecls {
    pub lattice: SecurityLattice,
    pub clouds: Vec<CloudDecl>,
    pub places: Vec<PlaceDecl>,
    pub transitions: Vec<TransitionDecl>,
    pub initials: Vec<MarkingDecl>,
}

impl NetDecls {
    pub fn build(&self) -> FssmNet {
        FssmNet::build(self.lattice.clone(), &self.clouds, &self.places, &self.transitions, &self.initials)
            .expect("generated nets are valid")
    }
}

pub fn random_net_decls(rng: &mut TestRng) -> NetDecls {
    let lattice = if rng.gen_bool(0.5) { lat2() } else { latd() };
    let levels: Vec<String> = lattice.levels().map(|l| lattice.name(l).to_string()).collect();
    let classes = ["a", "b"];
    let n_clouds = rng.gen_range(1..=3);
    let clouds: Vec<CloudDecl> = (0..n_clouds)
        .map(|i| CloudDecl { id: format!("c{i}"), clearance: pick(rng, &levels).clone() })
        .collect();
    let n_places = rng.gen_range(2..=6);
    let places: Vec<PlaceDecl> = (0..n_places)
        .map(|i| PlaceDecl { id: format!("p{i}"), cloud: pick(rng, &clouds).id.clone(), capacity: None })
        .collect();
    let n_trans = rng.gen_range(1..=5);
    let mut transitions = Vec::new();
    for i in 0..n_trans {
        let src = rng.gen_range(0..n_places - 1);
        let mut inputs = vec![ArcInDecl {
            place: format!("p{src}"),
            mode: ArcMode::Take,
            class: rng.gen_bool(0.7).then(|| pick(rng, &classes).to_string()),
        }];
        if rng.gen_bool(0.3) {
            inputs.push(ArcInDecl {
                place: format!("p{}", rng.gen_range(0..n_places)),
                mode: ArcMode::Read,
                class: rng.gen_bool(0.5).then(|| pick(rng, &classes).to_string()),
            });
        }
        if rng.gen_bool(0.15) && src > 0 {
            inputs.push(ArcInDecl {
                place: format!("p{}", rng.gen_range(0..=src)),
                mode: ArcMode::Take,
                class: None,
            });
        }
        let n_out = rng.gen_range(0..=2);
        let outputs = (0..n_out)
            .map(|_| ArcOutDecl {
                place: format!("p{}", rng.gen_range(src + 1..n_places)),
                class: pick(rng, &classes).to_string(),
            })
            .collect();
        transitions.push(TransitionDecl {
            id: format!("t{i}"),
            cloud: pick(rng, &clouds).id.clone(),
            clearance: pick(rng, &levels).clone(),
            floor: rng.gen_bool(0.5).then(|| pick(rng, &levels).clone()),
            inputs,
            outputs,
        });
    }
    // Initial tokens respect containment: level at most the cloud clearance.
    let mut initial = MarkingDecl::new();
    let n_tokens = rng.gen_range(1..=3);
    for _ in 0..n_tokens {
        let p = rng.gen_range(0..n_places);
        let cloud = places[p].cloud.clone();
        let clr = clouds.iter().find(|c| c.id == cloud).unwrap().clearance.clone();
        let allowed: Vec<String> = levels
            .iter()
            .filter(|l| lattice.leq_by_name(l, &clr).unwrap())
            .cloned()
            .collect();
        initial.entry(format!("p{p}")).or_default().push(TokenDecl {
            class: pick(rng, &classes).to_string(),
            level: pick(rng, &allowed).clone(),
            count: rng.gen_range(1..=2),
        });
    }
    NetDecls { lattice, clouds, places, transitions, initials: vec![initial] }
}

/// A random acyclic net with at most `max_states` reachable markings.
pub fn random_small_net(rng: &mut TestRng, max_states: usize) -> (NetDecls, FssmNet) {
    loop {
        let d = random_net_decls(rng);
        let net = d.build();
        let states = naive_reachable(&net).states.len();
        if states <= max_states && states >= 2 {
            return (d, net);
        }
    }
}

pub fn random_obs(rng: &mut TestRng, net: &FssmNet) -> ObsMap {
    let syms = ["a", "b", "c"];
    let assignment = net
        .transitions()
        .iter()
        .map(|t| {
            let s = if rng.gen_bool(0.3) { None } else { Some(pick(rng, &syms).to_string()) };
            (t.id.clone(), s)
        })
        .collect();
    ObsMap::explicit(net, assignment).unwrap()
}

/// Coarsens `obs` by a random symbol map that may merge or silence symbols.
pub fn coarsen(rng: &mut TestRng, obs: &ObsMap) -> ObsMap {
    let syms: BTreeSet<String> = obs.assignment().values().flatten().cloned().collect();
    let targets = ["x", "y"];
    let g: BTreeMap<String, Option<String>> = syms
        .into_iter()
        .map(|s| {
            let t = match rng.gen_range(0..3) {
                0 => None,
                1 => Some(s.clone()),
                _ => Some(pick(rng, &targets).to_string()),
            };
            (s, t)
        })
        .collect();
    obs.map_symbols(|_, s| s.and_then(|s| g[s].clone()))
}

pub fn random_predicate(rng: &mut TestRng, net: &FssmNet, depth: u32) -> PredicateExpr {
    let places: Vec<String> = net.places().iter().map(|p| p.id.clone()).collect();
    let choice = if depth == 0 { rng.gen_range(0..2) } else { rng.gen_range(0..5) };
    match choice {
        0 => PredicateExpr::contains(pick(rng, &places), rng.gen_bool(0.5).then_some(if rng.gen_bool(0.5) { "a" } else { "b" })),
        1 => {
            let ops = [CmpOp::Lt, CmpOp::Le, CmpOp::Eq, CmpOp::Ge, CmpOp::Gt];
            PredicateExpr::count(pick(rng, &places), *pick(rng, &ops), rng.gen_range(0..3))
        }
        2 => PredicateExpr::negate(random_predicate(rng, net, depth - 1)),
        3 => PredicateExpr::And(vec![random_predicate(rng, net, depth - 1), random_predicate(rng, net, depth - 1)]),
        _ => PredicateExpr::Or(vec![random_predicate(rng, net, depth - 1), random_predicate(rng, net, depth - 1)]),
    }
}

pub fn random_monitor(rng: &mut TestRng, net: &FssmNet) -> MonitorDecl {
    let n = rng.gen_range(2..=3);
    let states: Vec<String> = (0..n).map(|i| format!("q{i}")).collect();
    let mut edges = Vec::new();
    for s in &states {
        for t in net.transitions() {
            if rng.gen_bool(0.5) {
                edges.push((s.clone(), t.id.clone(), pick(rng, &states).clone()));
            }
        }
    }
    let mut accepting: Vec<String> = states.iter().filter(|_| rng.gen_bool(0.4)).cloned().collect();
    if accepting.is_empty() {
        accepting.push(states[n - 1].clone());
    }
    MonitorDecl { states: states.clone(), initial: states[0].clone(), accepting, edges }
}

// ---- naive interpreter ----

/// `(place, class, level)` multiset with names only.
pub type NaiveMarking = BTreeMap<(String, String, String), u32>;

pub fn naive_marking(decl: &MarkingDecl) -> NaiveMarking {
    let mut m = NaiveMarking::new();
    for (p, toks) in decl {
        for t in toks {
            if t.count > 0 {
                *m.entry((p.clone(), t.class.clone(), t.level.clone())).or_default() += t.count;
            }
        }
    }
    m
}

pub fn naive_of(net: &FssmNet, m: &fssm::model::Marking) -> NaiveMarking {
    naive_marking(&net.marking_decl(m))
}

/// Every enabled binding of every transition, by transition id and chosen
/// `(class, level)` per input arc. Enumerates the full product of token
/// types per arc, then filters by multiplicity.
pub fn naive_bindings(net: &FssmNet, m: &NaiveMarking) -> Vec<(String, Vec<(String, String)>)> {
    let mut out = Vec::new();
    for t in net.transitions() {
        let arcs: Vec<(String, ArcMode, Option<String>)> = t
            .inputs
            .iter()
            .map(|a| {
                (
                    net.places()[a.place].id.clone(),
                    a.mode,
                    a.pattern.map(|c| net.class_name(c).to_string()),
                )
            })
            .collect();
        let mut combos: Vec<Vec<(String, String)>> = vec![vec![]];
        for (place, _, pat) in &arcs {
            let cands: Vec<(String, String)> = m
                .keys()
                .filter(|(p, c, _)| p == place && pat.as_ref().is_none_or(|x| x == c))
                .map(|(_, c, l)| (c.clone(), l.clone()))
                .collect();
            combos = combos
                .into_iter()
                .flat_map(|pre| {
                    cands.iter().map(move |c| {
                        let mut v = pre.clone();
                        v.push(c.clone());
                        v
                    })
                })
                .collect();
        }
        for combo in combos {
            let mut takes: BTreeMap<(String, String, String), u32> = BTreeMap::new();
            let mut reads: BTreeSet<(String, String, String)> = BTreeSet::new();
            for ((place, mode, _), (c, l)) in arcs.iter().zip(&combo) {
                let key = (place.clone(), c.clone(), l.clone());
                match mode {
                    ArcMode::Take => *takes.entry(key).or_default() += 1,
                    ArcMode::Read => {
                        reads.insert(key);
                    }
                }
            }
            let keys: BTreeSet<_> = takes.keys().chain(reads.iter()).cloned().collect();
            let ok = keys.iter().all(|k| {
                let need = takes.get(k).copied().unwrap_or(0) + u32::from(reads.contains(k));
                m.get(k).copied().unwrap_or(0) >= need
            });
            if ok {
                out.push((t.id.clone(), combo));
            }
        }
    }
    out
}

pub fn naive_fire(net: &FssmNet, m: &NaiveMarking, t: &str, combo: &[(String, String)]) -> NaiveMarking {
    let lat = net.lattice();
    let tr = net.transitions().iter().find(|x| x.id == t).unwrap();
    let mut next = m.clone();
    let mut level = lat.name(tr.floor).to_string();
    for (a, (c, l)) in tr.inputs.iter().zip(combo) {
        level = lat.join_by_name(&level, l).unwrap().to_string();
        if a.mode == ArcMode::Take {
            let key = (net.places()[a.place].id.clone(), c.clone(), l.clone());
            let n = next.get_mut(&key).unwrap();
            *n -= 1;
            if *n == 0 {
                next.remove(&key);
            }
        }
    }
    for a in &tr.outputs {
        let key = (net.places()[a.place].id.clone(), net.class_name(a.class).to_string(), level.clone());
        *next.entry(key).or_default() += 1;
    }
    next
}

pub struct NaiveGraph {
    pub states: Vec<NaiveMarking>,
    /// `(src, transition id, dst)` per binding.
    pub edges: Vec<(usize, String, usize)>,
}

/// Reachable markings without capacities (the generated nets have none).
pub fn naive_reachable(net: &FssmNet) -> NaiveGraph {
    let init = naive_marking(&net.marking_decl(&net.initials()[0]));
    let mut index: BTreeMap<NaiveMarking, usize> = BTreeMap::from([(init.clone(), 0)]);
    let mut states = vec![init];
    let mut edges = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(s) = queue.pop_front() {
        let m = states[s].clone();
        for (t, combo) in naive_bindings(net, &m) {
            let next = naive_fire(net, &m, &t, &combo);
            let d = match index.get(&next) {
                Some(&d) => d,
                None => {
                    let d = states.len();
                    index.insert(next.clone(), d);
                    states.push(next);
                    queue.push_back(d);
                    d
                }
            };
            edges.push((s, t, d));
        }
        assert!(states.len() < 10_000, "generated net is unexpectedly large");
    }
    NaiveGraph { states, edges }
}

/// All runs from the initial marking (the graph must be acyclic), as
/// transition-id sequences paired with their final state.
pub fn all_runs(g: &NaiveGraph) -> Vec<(Vec<String>, usize)> {
    let mut out = Vec::new();
    let mut stack = vec![(Vec::<String>::new(), 0usize)];
    while let Some((run, s)) = stack.pop() {
        for (src, t, d) in &g.edges {
            if *src == s {
                let mut r = run.clone();
                r.push(t.clone());
                stack.push((r, *d));
            }
        }
        out.push((run, s));
        assert!(out.len() < 200_000, "too many runs");
    }
    out
}

/// Observable traces of every run under `sym`.
pub fn trace_set(g: &NaiveGraph, sym: impl Fn(&str) -> Option<String>) -> BTreeSet<Vec<String>> {
    all_runs(g)
        .into_iter()
        .map(|(run, _)| run.iter().filter_map(|t| sym(t)).collect())
        .collect()
}

/// Shortlex-least element of `a \ b`.
pub fn shortlex_least_difference(a: &BTreeSet<Vec<String>>, b: &BTreeSet<Vec<String>>) -> Option<Vec<String>> {
    a.difference(b).min_by(|x, y| (x.len(), *x).cmp(&(y.len(), *y))).cloned()
}

// ---- random workflows ----

pub struct WorkflowCase {
    pub lattice: SecurityLattice,
    pub tasks: Vec<TaskDecl>,
    pub edges: Vec<EdgeDecl>,
    pub workflow: Workflow,
    pub clouds: Vec<CloudSpec>,
    pub transfer: Cost,
}

pub fn random_workflow(rng: &mut TestRng) -> WorkflowCase {
    loop {
        let lattice = if rng.gen_bool(0.5) { lat2() } else { latd() };
        let levels: Vec<String> = lattice.levels().map(|l| lattice.name(l).to_string()).collect();
        let n_tasks = rng.gen_range(1..=4);
        let mut tasks: Vec<TaskDecl> = (0..n_tasks)
            .map(|i| TaskDecl {
                id: format!("w{i}"),
                touches: (0..rng.gen_range(1..=2))
                    .map(|_| (pick(rng, &["x", "y"]).to_string(), pick(rng, &levels).clone()))
                    .collect(),
            })
            .collect();
        let mut edges = Vec::new();
        for j in 1..n_tasks {
            for i in 0..j {
                if rng.gen_bool(0.4) {
                    let (c, l) = pick(rng, &tasks[i].touches).clone();
                    tasks[j].touches.push((c.clone(), l.clone()));
                    edges.push(EdgeDecl { producer: tasks[i].id.clone(), consumer: tasks[j].id.clone(), class: c, level: l });
                }
            }
        }
        let Ok(workflow) = Workflow::new(&lattice, &tasks, &edges) else {
            continue;
        };
        let n_clouds = rng.gen_range(1..=3);
        let clouds = (0..n_clouds)
            .map(|i| {
                let clr = lattice.level(pick(rng, &levels)).unwrap();
                let mut c = CloudSpec::new(&format!("k{i}"), clr, Cost::new(rng.gen_range(0..6), rng.gen_range(1..3)));
                if rng.gen_bool(0.3) {
                    c.overrides.insert(tasks[0].id.clone(), Cost::from_integer(rng.gen_range(0..4)));
                }
                c
            })
            .collect();
        let transfer = Cost::new(rng.gen_range(0..4), rng.gen_range(1..3));
        return WorkflowCase { lattice, tasks, edges, workflow, clouds, transfer };
    }
}

/// Every total assignment of tasks to clouds, as `task -> cloud` maps.
pub fn all_assignments(tasks: &[String], clouds: &[String]) -> Vec<BTreeMap<String, String>> {
    let mut out = vec![BTreeMap::new()];
    for t in tasks {
        out = out
            .into_iter()
            .flat_map(|m| {
                clouds.iter().map(move |c| {
                    let mut m = m.clone();
                    m.insert(t.clone(), c.clone());
                    m
                })
            })
            .collect();
    }
    out
}

/// A task's level straight from its declared touches.
pub fn brute_task_level(case: &WorkflowCase, task: &str) -> Level {
    let lat = &case.lattice;
    let t = case.tasks.iter().find(|t| t.id == task).unwrap();
    let mut touch_levels: Vec<String> = t.touches.iter().map(|(_, l)| l.clone()).collect();
    touch_levels.sort();
    // Least level above every touch, by scanning all levels.
    lat.levels()
        .filter(|&u| touch_levels.iter().all(|l| lat.leq(lat.level(l).unwrap(), u)))
        .find(|&u| {
            lat.levels()
                .filter(|&v| touch_levels.iter().all(|l| lat.leq(lat.level(l).unwrap(), v)))
                .all(|v| lat.leq(u, v))
        })
        .unwrap()
}

pub fn brute_cost(case: &WorkflowCase, a: &BTreeMap<String, String>) -> Cost {
    let mut total = Cost::from_integer(0);
    for (t, c) in a {
        let cloud = case.clouds.iter().find(|k| &k.id == c).unwrap();
        total += cloud.overrides.get(t).copied().unwrap_or(cloud.exec_cost);
    }
    for e in &case.edges {
        if a[&e.producer] != a[&e.consumer] {
            total += case.transfer;
        }
    }
    total
}

// ---- desk-scale generator ----

/// A seed place read by `k` generators, each feeding its own place of
/// capacity `cap`; reachable markings number `(cap + 1)^k`.
pub fn generator_net(k: usize, cap: u32) -> FssmNet {
    let lattice = lat2();
    let clouds = vec![CloudDecl { id: "c".into(), clearance: "Secret".into() }];
    let mut places = vec![PlaceDecl { id: "seed".into(), cloud: "c".into(), capacity: None }];
    let mut transitions = Vec::new();
    for i in 0..k {
        places.push(PlaceDecl { id: format!("q{i}"), cloud: "c".into(), capacity: Some(cap) });
        transitions.push(TransitionDecl {
            id: format!("g{i}"),
            cloud: "c".into(),
            clearance: if i == 0 { "Secret".into() } else { "Public".into() },
            floor: None,
            inputs: vec![ArcInDecl { place: "seed".into(), mode: ArcMode::Read, class: Some("s".into()) }],
            outputs: vec![ArcOutDecl { place: format!("q{i}"), class: "d".into() }],
        });
    }
    let mut initial = MarkingDecl::new();
    initial.insert("seed".into(), vec![TokenDecl { class: "s".into(), level: "Public".into(), count: 1 }]);
    FssmNet::build(lattice, &clouds, &places, &transitions, &[initial]).unwrap()
}

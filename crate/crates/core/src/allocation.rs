//! Workflow partitioning over clouds under clearance constraints.
//!
//! A task may run on a cloud iff the join of the levels it touches is below
//! the cloud's clearance. Valid allocations can be enumerated, optimized for
//! cost, and turned back into an [`FssmNet`] for re-verification.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_rational::Ratio;
use thiserror::Error;

use crate::lattice::{Level, SecurityLattice};
use crate::model::{
    ArcInDecl, ArcMode, ArcOutDecl, CloudDecl, FssmNet, MarkingDecl, NetError, PlaceDecl,
    TokenDecl, TransitionDecl,
};

/// Exact non-negative cost.
pub type Cost = Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AllocError {
    #[error("duplicate task `{0}`")]
    DuplicateTask(String),
    #[error("duplicate cloud `{0}`")]
    DuplicateCloud(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("unknown cloud `{0}`")]
    UnknownCloud(String),
    #[error("unknown level `{0}`")]
    UnknownLevel(String),
    #[error("edge {producer}->{consumer} carries {class}@{level}, which `{task}` does not touch")]
    EdgeNotTouched { producer: String, consumer: String, class: String, level: String, task: String },
    #[error("workflow has a cycle through `{0}`")]
    Cycle(String),
    #[error("edge {producer}->{consumer} would declassify: producer level is not below consumer level")]
    Downgrade { producer: String, consumer: String },
    #[error("negative cost for `{0}`")]
    NegativeCost(String),
    #[error("{count} valid allocations exceed the limit of {limit}")]
    TooManyAllocations { count: u128, limit: usize },
    #[error("no valid allocation exists")]
    NoFeasibleAllocation,
    #[error("allocation is not total: task `{0}` unassigned")]
    Unassigned(String),
    #[error("task `{task}` may not run on cloud `{cloud}`")]
    InvalidAllocation { task: String, cloud: String },
    #[error("synthesized net rejected: {0}")]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskDecl {
    pub id: String,
    pub touches: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct EdgeDecl {
    pub producer: String,
    pub consumer: String,
    pub class: String,
    pub level: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub id: String,
    /// Sorted, duplicate-free `(class, level)` pairs.
    pub touches: Vec<(String, Level)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkflowEdge {
    pub producer: usize,
    pub consumer: usize,
    pub class: String,
    pub level: Level,
}

/// A task DAG; tasks sorted by id, edges sorted by (producer, consumer,
/// class, level) names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workflow {
    tasks: Vec<Task>,
    edges: Vec<WorkflowEdge>,
    levels: Vec<Level>,
}

impl Workflow {
    /// Validates and builds a workflow. Besides structural checks, a
    /// consumer's level (join of its touches) must dominate each producer's:
    /// the flow-sensitive model has no declassification.
    pub fn new(lat: &SecurityLattice, tasks: &[TaskDecl], edges: &[EdgeDecl]) -> Result<Self, AllocError> {
        let level = |n: &str| lat.level(n).map_err(|_| AllocError::UnknownLevel(n.to_string()));
        let mut built: Vec<Task> = Vec::with_capacity(tasks.len());
        for t in tasks {
            let mut touches = BTreeSet::new();
            for (c, l) in &t.touches {
                touches.insert((c.clone(), level(l)?));
            }
            built.push(Task { id: t.id.clone(), touches: touches.into_iter().collect() });
        }
        built.sort_by(|a, b| a.id.cmp(&b.id));
        for w in built.windows(2) {
            if w[0].id == w[1].id {
                return Err(AllocError::DuplicateTask(w[0].id.clone()));
            }
        }
        let idx: HashMap<&str, usize> = built.iter().enumerate().map(|(i, t)| (t.id.as_str(), i)).collect();
        let find = |id: &str| idx.get(id).copied().ok_or_else(|| AllocError::UnknownTask(id.to_string()));

        let mut sorted_edges = edges.to_vec();
        sorted_edges.sort();
        let mut built_edges = Vec::with_capacity(edges.len());
        for e in &sorted_edges {
            let (p, c) = (find(&e.producer)?, find(&e.consumer)?);
            let lv = level(&e.level)?;
            for &t in &[p, c] {
                if built[t].touches.binary_search(&(e.class.clone(), lv)).is_err() {
                    return Err(AllocError::EdgeNotTouched {
                        producer: e.producer.clone(),
                        consumer: e.consumer.clone(),
                        class: e.class.clone(),
                        level: e.level.clone(),
                        task: built[t].id.clone(),
                    });
                }
            }
            built_edges.push(WorkflowEdge { producer: p, consumer: c, class: e.class.clone(), level: lv });
        }
        let levels: Vec<Level> = built
            .iter()
            .map(|t| lat.join_all(t.touches.iter().map(|x| x.1)))
            .collect();
        let wf = Workflow { tasks: built, edges: built_edges, levels };
        wf.check_acyclic()?;
        for e in &wf.edges {
            if !lat.leq(wf.levels[e.producer], wf.levels[e.consumer]) {
                return Err(AllocError::Downgrade {
                    producer: wf.tasks[e.producer].id.clone(),
                    consumer: wf.tasks[e.consumer].id.clone(),
                });
            }
        }
        Ok(wf)
    }

    fn check_acyclic(&self) -> Result<(), AllocError> {
        let n = self.tasks.len();
        let mut indeg = vec![0usize; n];
        for e in &self.edges {
            indeg[e.consumer] += 1;
        }
        let mut ready: Vec<usize> = (0..n).filter(|&t| indeg[t] == 0).collect();
        let mut done = 0;
        while let Some(t) = ready.pop() {
            done += 1;
            for e in self.edges.iter().filter(|e| e.producer == t) {
                indeg[e.consumer] -= 1;
                if indeg[e.consumer] == 0 {
                    ready.push(e.consumer);
                }
            }
        }
        match (0..n).find(|&t| indeg[t] > 0) {
            Some(t) if done < n => Err(AllocError::Cycle(self.tasks[t].id.clone())),
            _ => Ok(()),
        }
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn edges(&self) -> &[WorkflowEdge] {
        &self.edges
    }

    /// Join of the levels a task touches.
    pub fn task_level(&self, task: usize) -> Level {
        self.levels[task]
    }

    pub fn task_index(&self, id: &str) -> Option<usize> {
        self.tasks.binary_search_by(|t| t.id.as_str().cmp(id)).ok()
    }

    pub fn task_decls(&self, lat: &SecurityLattice) -> Vec<TaskDecl> {
        self.tasks
            .iter()
            .map(|t| TaskDecl {
                id: t.id.clone(),
                touches: t.touches.iter().map(|(c, l)| (c.clone(), lat.name(*l).to_string())).collect(),
            })
            .collect()
    }

    pub fn edge_decls(&self, lat: &SecurityLattice) -> Vec<EdgeDecl> {
        self.edges
            .iter()
            .map(|e| EdgeDecl {
                producer: self.tasks[e.producer].id.clone(),
                consumer: self.tasks[e.consumer].id.clone(),
                class: e.class.clone(),
                level: lat.name(e.level).to_string(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CloudSpec {
    pub id: String,
    pub clearance: Level,
    pub exec_cost: Cost,
    pub overrides: BTreeMap<String, Cost>,
}

impl CloudSpec {
    pub fn new(id: &str, clearance: Level, exec_cost: Cost) -> Self {
        CloudSpec { id: id.to_string(), clearance, exec_cost, overrides: BTreeMap::new() }
    }

    pub fn exec_cost_of(&self, task: &str) -> Cost {
        self.overrides.get(task).copied().unwrap_or(self.exec_cost)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostModel {
    /// Charged once per workflow edge whose endpoints sit on different clouds.
    pub transfer_cost: Cost,
}

/// Total mapping task id to cloud id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Allocation {
    pub assignment: BTreeMap<String, String>,
}

impl Allocation {
    pub fn from_pairs(pairs: &[(&str, &str)]) -> Self {
        Allocation {
            assignment: pairs.iter().map(|(t, c)| (t.to_string(), c.to_string())).collect(),
        }
    }
}

/// Clouds sorted by id, checked for duplicates and negative costs.
fn sorted_clouds(clouds: &[CloudSpec]) -> Result<Vec<&CloudSpec>, AllocError> {
    let mut out: Vec<&CloudSpec> = clouds.iter().collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    for w in out.windows(2) {
        if w[0].id == w[1].id {
            return Err(AllocError::DuplicateCloud(w[0].id.clone()));
        }
    }
    for c in &out {
        if c.exec_cost < Cost::from_integer(0) || c.overrides.values().any(|v| *v < Cost::from_integer(0)) {
            return Err(AllocError::NegativeCost(c.id.clone()));
        }
    }
    Ok(out)
}

fn valid_for(wf: &Workflow, task: usize, clouds: &[&CloudSpec], lat: &SecurityLattice) -> Vec<usize> {
    (0..clouds.len())
        .filter(|&c| lat.leq(wf.task_level(task), clouds[c].clearance))
        .collect()
}

/// Ids of the clouds `task` may run on, sorted.
pub fn valid_clouds(
    wf: &Workflow,
    task: &str,
    clouds: &[CloudSpec],
    lat: &SecurityLattice,
) -> Result<Vec<String>, AllocError> {
    let t = wf.task_index(task).ok_or_else(|| AllocError::UnknownTask(task.to_string()))?;
    let cs = sorted_clouds(clouds)?;
    Ok(valid_for(wf, t, &cs, lat).into_iter().map(|c| cs[c].id.clone()).collect())
}

/// Every valid allocation, in lexicographic order over (sorted tasks,
/// sorted clouds). Fails if there are more than `limit`.
pub fn enumerate_valid(
    wf: &Workflow,
    clouds: &[CloudSpec],
    lat: &SecurityLattice,
    limit: usize,
) -> Result<Vec<Allocation>, AllocError> {
    let cs = sorted_clouds(clouds)?;
    let options: Vec<Vec<usize>> = (0..wf.tasks.len()).map(|t| valid_for(wf, t, &cs, lat)).collect();
    let count = options
        .iter()
        .fold(1u128, |acc, o| acc.saturating_mul(o.len() as u128));
    if count > limit as u128 {
        return Err(AllocError::TooManyAllocations { count, limit });
    }
    let mut out = Vec::with_capacity(count as usize);
    if count == 0 {
        return Ok(out);
    }
    let mut pick = vec![0usize; options.len()];
    loop {
        out.push(Allocation {
            assignment: pick
                .iter()
                .enumerate()
                .map(|(t, &i)| (wf.tasks[t].id.clone(), cs[options[t][i]].id.clone()))
                .collect(),
        });
        // Odometer with the last task varying fastest.
        let mut t = options.len();
        loop {
            if t == 0 {
                return Ok(out);
            }
            t -= 1;
            pick[t] += 1;
            if pick[t] < options[t].len() {
                break;
            }
            pick[t] = 0;
        }
    }
}

fn resolve_allocation(
    wf: &Workflow,
    clouds: &[&CloudSpec],
    a: &Allocation,
) -> Result<Vec<usize>, AllocError> {
    let mut out = Vec::with_capacity(wf.tasks.len());
    for t in &wf.tasks {
        let c = a.assignment.get(&t.id).ok_or_else(|| AllocError::Unassigned(t.id.clone()))?;
        let ci = clouds
            .binary_search_by(|x| x.id.as_str().cmp(c))
            .map_err(|_| AllocError::UnknownCloud(c.clone()))?;
        out.push(ci);
    }
    Ok(out)
}

/// Sum of exec costs plus transfer cost for every cross-cloud edge.
pub fn allocation_cost(
    wf: &Workflow,
    clouds: &[CloudSpec],
    cost: &CostModel,
    a: &Allocation,
) -> Result<Cost, AllocError> {
    let cs = sorted_clouds(clouds)?;
    let assign = resolve_allocation(wf, &cs, a)?;
    let exec: Cost = wf
        .tasks
        .iter()
        .enumerate()
        .map(|(t, task)| cs[assign[t]].exec_cost_of(&task.id))
        .sum();
    let transfers = wf
        .edges
        .iter()
        .filter(|e| assign[e.producer] != assign[e.consumer])
        .count() as i64;
    Ok(exec + cost.transfer_cost * transfers)
}

pub fn is_valid_allocation(
    wf: &Workflow,
    clouds: &[CloudSpec],
    lat: &SecurityLattice,
    a: &Allocation,
) -> Result<bool, AllocError> {
    let cs = sorted_clouds(clouds)?;
    let assign = resolve_allocation(wf, &cs, a)?;
    Ok((0..wf.tasks.len()).all(|t| lat.leq(wf.task_level(t), cs[assign[t]].clearance)))
}

/// Cheapest valid allocation by depth-first branch and bound over tasks in
/// id order; ties go to the lexicographically first allocation.
pub fn min_cost_allocation(
    wf: &Workflow,
    clouds: &[CloudSpec],
    lat: &SecurityLattice,
    cost: &CostModel,
) -> Result<(Allocation, Cost), AllocError> {
    let cs = sorted_clouds(clouds)?;
    let n = wf.tasks.len();
    let options: Vec<Vec<usize>> = (0..n).map(|t| valid_for(wf, t, &cs, lat)).collect();
    if options.iter().any(Vec::is_empty) {
        return Err(AllocError::NoFeasibleAllocation);
    }
    let exec = |t: usize, c: usize| cs[c].exec_cost_of(&wf.tasks[t].id);
    let cheapest: Vec<Cost> = (0..n)
        .map(|t| options[t].iter().map(|&c| exec(t, c)).min().unwrap())
        .collect();
    // rest[t] = sum of cheapest exec costs of tasks t.. (admissible bound).
    let mut rest = vec![Cost::from_integer(0); n + 1];
    for t in (0..n).rev() {
        rest[t] = rest[t + 1] + cheapest[t];
    }
    // Edges charged when their later endpoint (in id order) is assigned.
    let mut edges_at: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in &wf.edges {
        let (a, b) = (e.producer.min(e.consumer), e.producer.max(e.consumer));
        edges_at[b].push(a);
    }

    struct Search<'a> {
        options: &'a [Vec<usize>],
        rest: &'a [Cost],
        edges_at: &'a [Vec<usize>],
        transfer: Cost,
        exec: &'a dyn Fn(usize, usize) -> Cost,
        assign: Vec<usize>,
        best: Option<(Vec<usize>, Cost)>,
    }

    fn dfs(s: &mut Search<'_>, t: usize, acc: Cost) {
        if let Some((_, best)) = &s.best {
            if acc + s.rest[t] >= *best {
                return;
            }
        }
        if t == s.options.len() {
            s.best = Some((s.assign.clone(), acc));
            return;
        }
        for i in 0..s.options[t].len() {
            let c = s.options[t][i];
            let transfers = s.edges_at[t].iter().filter(|&&o| s.assign[o] != c).count() as i64;
            let step = (s.exec)(t, c) + s.transfer * transfers;
            s.assign.push(c);
            dfs(s, t + 1, acc + step);
            s.assign.pop();
        }
    }

    let mut search = Search {
        options: &options,
        rest: &rest,
        edges_at: &edges_at,
        transfer: cost.transfer_cost,
        exec: &exec,
        assign: Vec::with_capacity(n),
        best: None,
    };
    dfs(&mut search, 0, Cost::from_integer(0));
    let (assign, total) = search.best.ok_or(AllocError::NoFeasibleAllocation)?;
    let allocation = Allocation {
        assignment: assign
            .iter()
            .enumerate()
            .map(|(t, &c)| (wf.tasks[t].id.clone(), cs[c].id.clone()))
            .collect(),
    };
    Ok((allocation, total))
}

/// Place id for the `k`-th edge (canonical edge order).
pub fn edge_place_id(wf: &Workflow, k: usize) -> String {
    let e = &wf.edges[k];
    format!("e{k}_{}_{}", wf.tasks[e.producer].id, wf.tasks[e.consumer].id)
}

/// Builds an FssmNet realizing the allocation.
///
/// Each task becomes a transition on its cloud with clearance and floor equal
/// to the join of its touches. Each edge becomes a place on the consumer's
/// cloud; the producer writes it and the consumer takes from it. Source
/// tasks take a `start_<id>` token at bottom from a private place, and every
/// task writes a `done_<id>` token into a private place on its own cloud, so
/// a task placed above its cloud's clearance shows up as a containment
/// violation. With `bypass` the validity check is skipped.
pub fn synthesize_net(
    wf: &Workflow,
    a: &Allocation,
    lat: &SecurityLattice,
    clouds: &[CloudSpec],
    bypass: bool,
) -> Result<FssmNet, AllocError> {
    let cs = sorted_clouds(clouds)?;
    let assign = resolve_allocation(wf, &cs, a)?;
    if !bypass {
        if let Some(t) = (0..wf.tasks.len()).find(|&t| !lat.leq(wf.task_level(t), cs[assign[t]].clearance)) {
            return Err(AllocError::InvalidAllocation {
                task: wf.tasks[t].id.clone(),
                cloud: cs[assign[t]].id.clone(),
            });
        }
    }
    let cloud_decls: Vec<CloudDecl> = cs
        .iter()
        .map(|c| CloudDecl { id: c.id.clone(), clearance: lat.name(c.clearance).to_string() })
        .collect();
    let mut places = Vec::new();
    let mut transitions = Vec::new();
    let mut initial = MarkingDecl::new();
    let bottom = lat.name(lat.bottom()).to_string();

    for k in 0..wf.edges.len() {
        places.push(PlaceDecl {
            id: edge_place_id(wf, k),
            cloud: cs[assign[wf.edges[k].consumer]].id.clone(),
            capacity: None,
        });
    }
    for (t, task) in wf.tasks.iter().enumerate() {
        let cloud = cs[assign[t]].id.clone();
        let level = lat.name(wf.task_level(t)).to_string();
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for (k, e) in wf.edges.iter().enumerate() {
            if e.consumer == t {
                inputs.push(ArcInDecl { place: edge_place_id(wf, k), mode: ArcMode::Take, class: Some(e.class.clone()) });
            }
            if e.producer == t {
                outputs.push(ArcOutDecl { place: edge_place_id(wf, k), class: e.class.clone() });
            }
        }
        if inputs.is_empty() {
            let start = format!("start_{}", task.id);
            places.push(PlaceDecl { id: start.clone(), cloud: cloud.clone(), capacity: None });
            inputs.push(ArcInDecl { place: start.clone(), mode: ArcMode::Take, class: Some(start.clone()) });
            initial.insert(start.clone(), vec![TokenDecl { class: start, level: bottom.clone(), count: 1 }]);
        }
        let done = format!("done_{}", task.id);
        places.push(PlaceDecl { id: done.clone(), cloud: cloud.clone(), capacity: None });
        outputs.push(ArcOutDecl { place: done.clone(), class: done });
        transitions.push(TransitionDecl {
            id: task.id.clone(),
            cloud,
            clearance: level.clone(),
            floor: Some(level),
            inputs,
            outputs,
        });
    }
    Ok(FssmNet::build(lat.clone(), &cloud_decls, &places, &transitions, &[initial])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{dynamic_blp_check, BlpConfig, RuleKind, Verdict};
    use crate::statespace::ExploreOptions;

    fn lat2() -> SecurityLattice {
        SecurityLattice::build(&["Public", "Secret"], &[("Public", "Secret")]).unwrap()
    }

    fn wf1(lat: &SecurityLattice) -> Workflow {
        Workflow::new(
            lat,
            &[
                TaskDecl { id: "t1".into(), touches: vec![("d".into(), "Public".into())] },
                TaskDecl {
                    id: "t2".into(),
                    touches: vec![("d".into(), "Public".into()), ("s".into(), "Secret".into())],
                },
            ],
            &[EdgeDecl { producer: "t1".into(), consumer: "t2".into(), class: "d".into(), level: "Public".into() }],
        )
        .unwrap()
    }

    fn clouds(lat: &SecurityLattice) -> Vec<CloudSpec> {
        vec![
            CloudSpec::new("Cpub", lat.level("Public").unwrap(), Cost::from_integer(1)),
            CloudSpec::new("Cpriv", lat.level("Secret").unwrap(), Cost::from_integer(3)),
        ]
    }

    #[test]
    fn wf1_valid_clouds() {
        let lat = lat2();
        let wf = wf1(&lat);
        assert_eq!(valid_clouds(&wf, "t2", &clouds(&lat), &lat).unwrap(), vec!["Cpriv"]);
        assert_eq!(valid_clouds(&wf, "t1", &clouds(&lat), &lat).unwrap(), vec!["Cpriv", "Cpub"]);
        assert_eq!(
            valid_clouds(&wf, "t9", &clouds(&lat), &lat),
            Err(AllocError::UnknownTask("t9".into()))
        );
        let bare = Workflow::new(&lat, &[TaskDecl { id: "x".into(), touches: vec![] }], &[]).unwrap();
        assert_eq!(valid_clouds(&bare, "x", &clouds(&lat), &lat).unwrap().len(), 2);
    }

    #[test]
    fn wf1_enumeration() {
        let lat = lat2();
        let wf = wf1(&lat);
        let all = enumerate_valid(&wf, &clouds(&lat), &lat, 10).unwrap();
        let mut expected = vec![
            Allocation::from_pairs(&[("t1", "Cpub"), ("t2", "Cpriv")]),
            Allocation::from_pairs(&[("t1", "Cpriv"), ("t2", "Cpriv")]),
        ];
        expected.sort();
        assert_eq!(all, expected);
        assert_eq!(
            enumerate_valid(&wf, &clouds(&lat), &lat, 1),
            Err(AllocError::TooManyAllocations { count: 2, limit: 1 })
        );
        let public_only = vec![clouds(&lat)[0].clone()];
        assert!(enumerate_valid(&wf, &public_only, &lat, 10).unwrap().is_empty());
    }

    #[test]
    fn wf1_min_cost() {
        let lat = lat2();
        let wf = wf1(&lat);
        let cost = CostModel { transfer_cost: Cost::from_integer(1) };
        let (a, c) = min_cost_allocation(&wf, &clouds(&lat), &lat, &cost).unwrap();
        assert_eq!(a, Allocation::from_pairs(&[("t1", "Cpub"), ("t2", "Cpriv")]));
        assert_eq!(c, Cost::from_integer(5));
        let public_only = vec![clouds(&lat)[0].clone()];
        assert_eq!(
            min_cost_allocation(&wf, &public_only, &lat, &cost),
            Err(AllocError::NoFeasibleAllocation)
        );
        let top_only = vec![clouds(&lat)[1].clone()];
        let (_, c) = min_cost_allocation(&wf, &top_only, &lat, &cost).unwrap();
        assert_eq!(c, Cost::from_integer(6));
    }

    #[test]
    fn workflow_validation() {
        let lat = lat2();
        let t = |id: &str, touches: &[(&str, &str)]| TaskDecl {
            id: id.into(),
            touches: touches.iter().map(|(c, l)| (c.to_string(), l.to_string())).collect(),
        };
        let e = |p: &str, c: &str, class: &str, l: &str| EdgeDecl {
            producer: p.into(),
            consumer: c.into(),
            class: class.into(),
            level: l.into(),
        };
        assert!(matches!(
            Workflow::new(&lat, &[t("a", &[]), t("a", &[])], &[]),
            Err(AllocError::DuplicateTask(_))
        ));
        assert!(matches!(
            Workflow::new(&lat, &[t("a", &[("d", "Public")])], &[e("a", "b", "d", "Public")]),
            Err(AllocError::UnknownTask(_))
        ));
        assert!(matches!(
            Workflow::new(&lat, &[t("a", &[("d", "Public")]), t("b", &[])], &[e("a", "b", "d", "Public")]),
            Err(AllocError::EdgeNotTouched { .. })
        ));
        let both = [("d", "Public")];
        assert!(matches!(
            Workflow::new(
                &lat,
                &[t("a", &both), t("b", &both)],
                &[e("a", "b", "d", "Public"), e("b", "a", "d", "Public")]
            ),
            Err(AllocError::Cycle(_))
        ));
        assert!(matches!(
            Workflow::new(
                &lat,
                &[t("a", &[("d", "Public"), ("s", "Secret")]), t("b", &both)],
                &[e("a", "b", "d", "Public")]
            ),
            Err(AllocError::Downgrade { .. })
        ));
    }

    #[test]
    fn synthesis_bridge_on_wf1() {
        let lat = lat2();
        let wf = wf1(&lat);
        let cs = clouds(&lat);
        let good = Allocation::from_pairs(&[("t1", "Cpub"), ("t2", "Cpriv")]);
        let net = synthesize_net(&wf, &good, &lat, &cs, false).unwrap();
        let r = dynamic_blp_check(&net, &BlpConfig::default(), &ExploreOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);

        let bad = Allocation::from_pairs(&[("t1", "Cpub"), ("t2", "Cpub")]);
        assert_eq!(
            synthesize_net(&wf, &bad, &lat, &cs, false).unwrap_err(),
            AllocError::InvalidAllocation { task: "t2".into(), cloud: "Cpub".into() }
        );
        let net = synthesize_net(&wf, &bad, &lat, &cs, true).unwrap();
        let r = dynamic_blp_check(&net, &BlpConfig::only(&[RuleKind::Containment]), &ExploreOptions::default())
            .unwrap();
        assert!(r.has("t2", RuleKind::Containment));
    }

    #[test]
    fn empty_workflow_synthesizes_empty_net() {
        let lat = lat2();
        let wf = Workflow::new(&lat, &[], &[]).unwrap();
        let net = synthesize_net(&wf, &Allocation::default_empty(), &lat, &clouds(&lat), false).unwrap();
        assert!(net.transitions().is_empty());
        assert!(net.places().is_empty());
    }

    impl Allocation {
        fn default_empty() -> Self {
            Allocation { assignment: BTreeMap::new() }
        }
    }
}

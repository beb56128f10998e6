//! The flow-sensitive security model: clouds, places, level-labelled tokens
//! and task transitions.
//!
//! All entity collections are stored sorted by id, so handles are dense
//! indices whose order matches the textual order of ids.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::lattice::{valid_ident, Level, SecurityLattice};

/// Where in the declarations an error was found (declaration indices).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Site {
    Cloud(usize),
    Place(usize),
    Transition(usize),
    Initial(usize, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("dangling reference to {kind} `{id}`")]
    DanglingReference { kind: &'static str, id: String, site: Site },
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String, site: Site },
    #[error("invalid identifier `{id}`")]
    InvalidIdentifier { id: String, site: Site },
    #[error("unknown level `{level}`")]
    UnknownLevel { level: String, site: Site },
    #[error(
        "initial token {class}@{level} in place `{place}` exceeds cloud clearance {clearance}"
    )]
    InitialContainmentViolation {
        place: String,
        class: String,
        level: String,
        clearance: String,
        site: Site,
    },
    #[error("initial marking puts {count} tokens into place `{place}` of capacity {capacity}")]
    InitialCapacityExceeded {
        place: String,
        count: u64,
        capacity: u32,
        site: Site,
    },
    #[error("place `{0}` has capacity 0")]
    ZeroCapacity(String, Site),
    #[error("transition `{id}` has neither inputs nor outputs")]
    EmptyTransition { id: String, site: Site },
    #[error("a net needs at least one initial marking")]
    NoInitialMarking,
}

impl NetError {
    pub fn site(&self) -> Option<&Site> {
        match self {
            NetError::DanglingReference { site, .. }
            | NetError::DuplicateId { site, .. }
            | NetError::InvalidIdentifier { site, .. }
            | NetError::UnknownLevel { site, .. }
            | NetError::InitialContainmentViolation { site, .. }
            | NetError::InitialCapacityExceeded { site, .. }
            | NetError::ZeroCapacity(_, site)
            | NetError::EmptyTransition { site, .. } => Some(site),
            NetError::NoInitialMarking => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub(crate) u32);

/// A classified data item. Tokens with equal class and level are
/// indistinguishable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Token {
    pub class: ClassId,
    pub level: Level,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArcMode {
    Take,
    Read,
}

impl ArcMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ArcMode::Take => "take",
            ArcMode::Read => "read",
        }
    }
}

impl fmt::Display for ArcMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cloud {
    pub id: String,
    pub clearance: Level,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Place {
    pub id: String,
    pub cloud: usize,
    pub capacity: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArcIn {
    pub place: usize,
    pub mode: ArcMode,
    /// `None` matches any class.
    pub pattern: Option<ClassId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArcOut {
    pub place: usize,
    pub class: ClassId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskTransition {
    pub id: String,
    pub cloud: usize,
    pub clearance: Level,
    pub floor: Level,
    pub inputs: Vec<ArcIn>,
    pub outputs: Vec<ArcOut>,
}

// Declarations, by name, as accepted by `FssmNet::build`.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CloudDecl {
    pub id: String,
    pub clearance: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaceDecl {
    pub id: String,
    pub cloud: String,
    pub capacity: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArcInDecl {
    pub place: String,
    pub mode: ArcMode,
    pub class: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArcOutDecl {
    pub place: String,
    pub class: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionDecl {
    pub id: String,
    pub cloud: String,
    pub clearance: String,
    pub floor: Option<String>,
    pub inputs: Vec<ArcInDecl>,
    pub outputs: Vec<ArcOutDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenDecl {
    pub class: String,
    pub level: String,
    pub count: u32,
}

/// Initial marking by name: place id to tokens.
pub type MarkingDecl = BTreeMap<String, Vec<TokenDecl>>;

/// A multiset of tokens per place, kept as a flat list sorted by
/// (place, class, level) with positive multiplicities. Equal contents have
/// equal representations, so `Eq`/`Hash` are canonical.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Marking {
    entries: Vec<(u32, Token, u32)>,
}

impl Marking {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, Token, u32)> + '_ {
        self.entries.iter().map(|&(p, t, c)| (p as usize, t, c))
    }

    fn range(&self, place: usize) -> std::ops::Range<usize> {
        let p = place as u32;
        let lo = self.entries.partition_point(|e| e.0 < p);
        let hi = self.entries.partition_point(|e| e.0 <= p);
        lo..hi
    }

    /// Distinct tokens in `place` with their multiplicities, in token order.
    pub fn tokens_in(&self, place: usize) -> impl Iterator<Item = (Token, u32)> + '_ {
        self.entries[self.range(place)].iter().map(|e| (e.1, e.2))
    }

    pub fn total_in(&self, place: usize) -> u64 {
        self.tokens_in(place).map(|(_, c)| c as u64).sum()
    }

    pub fn count(&self, place: usize, token: Token) -> u32 {
        let key = (place as u32, token);
        match self.entries.binary_search_by(|e| (e.0, e.1).cmp(&key)) {
            Ok(i) => self.entries[i].2,
            Err(_) => 0,
        }
    }

    pub fn add(&mut self, place: usize, token: Token, n: u32) {
        if n == 0 {
            return;
        }
        let key = (place as u32, token);
        match self.entries.binary_search_by(|e| (e.0, e.1).cmp(&key)) {
            Ok(i) => self.entries[i].2 += n,
            Err(i) => self.entries.insert(i, (place as u32, token, n)),
        }
    }

    /// Removes `n` occurrences; returns false (and leaves the marking
    /// unchanged) if fewer are present.
    pub fn remove(&mut self, place: usize, token: Token, n: u32) -> bool {
        let key = (place as u32, token);
        match self.entries.binary_search_by(|e| (e.0, e.1).cmp(&key)) {
            Ok(i) if self.entries[i].2 >= n => {
                self.entries[i].2 -= n;
                if self.entries[i].2 == 0 {
                    self.entries.remove(i);
                }
                true
            }
            _ => n == 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FssmNet {
    lattice: SecurityLattice,
    clouds: Vec<Cloud>,
    places: Vec<Place>,
    transitions: Vec<TaskTransition>,
    classes: Vec<String>,
    initials: Vec<Marking>,
}

fn check_unique<'a>(
    kind: &'static str,
    ids: impl Iterator<Item = &'a str>,
    site: impl Fn(usize) -> Site,
) -> Result<HashMap<String, usize>, NetError> {
    let mut seen = HashMap::new();
    for (i, id) in ids.enumerate() {
        if !valid_ident(id) {
            return Err(NetError::InvalidIdentifier { id: id.to_string(), site: site(i) });
        }
        if seen.insert(id.to_string(), i).is_some() {
            return Err(NetError::DuplicateId { kind, id: id.to_string(), site: site(i) });
        }
    }
    Ok(seen)
}

/// Maps declaration index to sorted index.
fn sorted_positions<'a>(ids: impl Iterator<Item = &'a str>) -> (Vec<usize>, HashMap<String, usize>) {
    let ids: Vec<&str> = ids.collect();
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by_key(|&i| ids[i]);
    let mut pos = vec![0; ids.len()];
    let mut by_name = HashMap::new();
    for (sorted, &decl) in order.iter().enumerate() {
        pos[decl] = sorted;
        by_name.insert(ids[decl].to_string(), sorted);
    }
    (order, by_name)
}

impl FssmNet {
    /// Validates declarations and builds the net. Declaration order does not
    /// affect the result.
    pub fn build(
        lattice: SecurityLattice,
        clouds: &[CloudDecl],
        places: &[PlaceDecl],
        transitions: &[TransitionDecl],
        initials: &[MarkingDecl],
    ) -> Result<Self, NetError> {
        check_unique("cloud", clouds.iter().map(|c| c.id.as_str()), Site::Cloud)?;
        check_unique("place", places.iter().map(|p| p.id.as_str()), Site::Place)?;
        check_unique(
            "transition",
            transitions.iter().map(|t| t.id.as_str()),
            Site::Transition,
        )?;
        if initials.is_empty() {
            return Err(NetError::NoInitialMarking);
        }

        let (cloud_order, cloud_idx) = sorted_positions(clouds.iter().map(|c| c.id.as_str()));
        let (place_order, place_idx) = sorted_positions(places.iter().map(|p| p.id.as_str()));
        let (trans_order, _) = sorted_positions(transitions.iter().map(|t| t.id.as_str()));

        let level = |name: &str, site: Site| {
            lattice.level(name).map_err(|_| NetError::UnknownLevel { level: name.to_string(), site })
        };

        // Class names from every place they may appear.
        let mut class_names = BTreeSet::new();
        let mut check_class = |name: &str, site: Site| {
            if !valid_ident(name) {
                return Err(NetError::InvalidIdentifier { id: name.to_string(), site });
            }
            class_names.insert(name.to_string());
            Ok(())
        };
        for (i, t) in transitions.iter().enumerate() {
            for a in &t.inputs {
                if let Some(c) = &a.class {
                    check_class(c, Site::Transition(i))?;
                }
            }
            for a in &t.outputs {
                check_class(&a.class, Site::Transition(i))?;
            }
        }
        for (i, m) in initials.iter().enumerate() {
            for (p, toks) in m {
                for tok in toks {
                    check_class(&tok.class, Site::Initial(i, p.clone()))?;
                }
            }
        }
        let classes: Vec<String> = class_names.into_iter().collect();
        let class_idx: HashMap<&str, ClassId> = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), ClassId(i as u32)))
            .collect();

        let mut built_clouds = Vec::with_capacity(clouds.len());
        for &i in &cloud_order {
            let c = &clouds[i];
            built_clouds.push(Cloud { id: c.id.clone(), clearance: level(&c.clearance, Site::Cloud(i))? });
        }

        let mut built_places = Vec::with_capacity(places.len());
        for &i in &place_order {
            let p = &places[i];
            let cloud = *cloud_idx.get(&p.cloud).ok_or_else(|| NetError::DanglingReference {
                kind: "cloud",
                id: p.cloud.clone(),
                site: Site::Place(i),
            })?;
            if p.capacity == Some(0) {
                return Err(NetError::ZeroCapacity(p.id.clone(), Site::Place(i)));
            }
            built_places.push(Place { id: p.id.clone(), cloud, capacity: p.capacity });
        }

        let mut built_transitions = Vec::with_capacity(transitions.len());
        for &i in &trans_order {
            let t = &transitions[i];
            let site = || Site::Transition(i);
            let place = |id: &str| {
                place_idx.get(id).copied().ok_or_else(|| NetError::DanglingReference {
                    kind: "place",
                    id: id.to_string(),
                    site: site(),
                })
            };
            let cloud = *cloud_idx.get(&t.cloud).ok_or_else(|| NetError::DanglingReference {
                kind: "cloud",
                id: t.cloud.clone(),
                site: site(),
            })?;
            let clearance = level(&t.clearance, site())?;
            let floor = match &t.floor {
                Some(f) => level(f, site())?,
                None => lattice.bottom(),
            };
            let mut inputs = Vec::with_capacity(t.inputs.len());
            for a in &t.inputs {
                inputs.push(ArcIn {
                    place: place(&a.place)?,
                    mode: a.mode,
                    pattern: a.class.as_deref().map(|c| class_idx[c]),
                });
            }
            let mut outputs = Vec::with_capacity(t.outputs.len());
            for a in &t.outputs {
                outputs.push(ArcOut { place: place(&a.place)?, class: class_idx[a.class.as_str()] });
            }
            if inputs.is_empty() && outputs.is_empty() {
                return Err(NetError::EmptyTransition { id: t.id.clone(), site: site() });
            }
            built_transitions.push(TaskTransition {
                id: t.id.clone(),
                cloud,
                clearance,
                floor,
                inputs,
                outputs,
            });
        }

        let mut built_initials = Vec::with_capacity(initials.len());
        for (i, m) in initials.iter().enumerate() {
            let mut marking = Marking::new();
            for (pid, toks) in m {
                let site = || Site::Initial(i, pid.clone());
                let p = *place_idx.get(pid).ok_or_else(|| NetError::DanglingReference {
                    kind: "place",
                    id: pid.clone(),
                    site: site(),
                })?;
                let cloud = &built_clouds[built_places[p].cloud];
                for tok in toks {
                    let lv = level(&tok.level, site())?;
                    if !lattice.leq(lv, cloud.clearance) {
                        return Err(NetError::InitialContainmentViolation {
                            place: pid.clone(),
                            class: tok.class.clone(),
                            level: tok.level.clone(),
                            clearance: lattice.name(cloud.clearance).to_string(),
                            site: site(),
                        });
                    }
                    marking.add(p, Token { class: class_idx[tok.class.as_str()], level: lv }, tok.count);
                }
                if let Some(cap) = built_places[p].capacity {
                    let total = marking.total_in(p);
                    if total > cap as u64 {
                        return Err(NetError::InitialCapacityExceeded {
                            place: pid.clone(),
                            count: total,
                            capacity: cap,
                            site: site(),
                        });
                    }
                }
            }
            built_initials.push(marking);
        }

        Ok(FssmNet {
            lattice,
            clouds: built_clouds,
            places: built_places,
            transitions: built_transitions,
            classes,
            initials: built_initials,
        })
    }

    pub fn lattice(&self) -> &SecurityLattice {
        &self.lattice
    }

    pub fn clouds(&self) -> &[Cloud] {
        &self.clouds
    }

    pub fn places(&self) -> &[Place] {
        &self.places
    }

    pub fn transitions(&self) -> &[TaskTransition] {
        &self.transitions
    }

    pub fn initials(&self) -> &[Marking] {
        &self.initials
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_name(&self, c: ClassId) -> &str {
        &self.classes[c.0 as usize]
    }

    pub fn class(&self, name: &str) -> Option<ClassId> {
        self.classes
            .binary_search_by(|c| c.as_str().cmp(name))
            .ok()
            .map(|i| ClassId(i as u32))
    }

    pub fn cloud_index(&self, id: &str) -> Option<usize> {
        self.clouds.binary_search_by(|c| c.id.as_str().cmp(id)).ok()
    }

    pub fn place_index(&self, id: &str) -> Option<usize> {
        self.places.binary_search_by(|p| p.id.as_str().cmp(id)).ok()
    }

    pub fn transition_index(&self, id: &str) -> Option<usize> {
        self.transitions.binary_search_by(|t| t.id.as_str().cmp(id)).ok()
    }

    /// Clearance of the cloud hosting `place`: the object level of the place.
    pub fn place_level(&self, place: usize) -> Level {
        self.clouds[self.places[place].cloud].clearance
    }

    pub fn token_text(&self, t: Token) -> String {
        format!("{}@{}", self.class_name(t.class), self.lattice.name(t.level))
    }

    /// Canonical text of a marking: `pid:class@Level*count` entries sorted by
    /// (place, class, level) joined with `;`, or `∅` when empty.
    pub fn canonical_key(&self, m: &Marking) -> String {
        if m.is_empty() {
            return "∅".to_string();
        }
        let mut out = String::new();
        for (i, (p, t, c)) in m.entries().enumerate() {
            if i > 0 {
                out.push(';');
            }
            out.push_str(&self.places[p].id);
            out.push(':');
            out.push_str(&self.token_text(t));
            out.push('*');
            out.push_str(&c.to_string());
        }
        out
    }

    /// Builds a marking from `(place, class, level, count)` names.
    pub fn marking_from<S: AsRef<str>>(&self, items: &[(S, S, S, u32)]) -> Option<Marking> {
        let mut m = Marking::new();
        for (p, c, l, n) in items {
            let p = self.place_index(p.as_ref())?;
            let class = self.class(c.as_ref())?;
            let level = self.lattice.level(l.as_ref()).ok()?;
            m.add(p, Token { class, level }, *n);
        }
        Some(m)
    }

    pub fn cloud_decls(&self) -> Vec<CloudDecl> {
        self.clouds
            .iter()
            .map(|c| CloudDecl { id: c.id.clone(), clearance: self.lattice.name(c.clearance).to_string() })
            .collect()
    }

    pub fn place_decls(&self) -> Vec<PlaceDecl> {
        self.places
            .iter()
            .map(|p| PlaceDecl {
                id: p.id.clone(),
                cloud: self.clouds[p.cloud].id.clone(),
                capacity: p.capacity,
            })
            .collect()
    }

    pub fn transition_decls(&self) -> Vec<TransitionDecl> {
        self.transitions.iter().map(|t| self.transition_decl(t)).collect()
    }

    fn transition_decl(&self, t: &TaskTransition) -> TransitionDecl {
        TransitionDecl {
            id: t.id.clone(),
            cloud: self.clouds[t.cloud].id.clone(),
            clearance: self.lattice.name(t.clearance).to_string(),
            floor: Some(self.lattice.name(t.floor).to_string()),
            inputs: t
                .inputs
                .iter()
                .map(|a| ArcInDecl {
                    place: self.places[a.place].id.clone(),
                    mode: a.mode,
                    class: a.pattern.map(|c| self.class_name(c).to_string()),
                })
                .collect(),
            outputs: t
                .outputs
                .iter()
                .map(|a| ArcOutDecl {
                    place: self.places[a.place].id.clone(),
                    class: self.class_name(a.class).to_string(),
                })
                .collect(),
        }
    }

    pub fn marking_decl(&self, m: &Marking) -> MarkingDecl {
        let mut out: MarkingDecl = BTreeMap::new();
        for (p, t, c) in m.entries() {
            out.entry(self.places[p].id.clone()).or_default().push(TokenDecl {
                class: self.class_name(t.class).to_string(),
                level: self.lattice.name(t.level).to_string(),
                count: c,
            });
        }
        out
    }

    pub fn initial_decls(&self) -> Vec<MarkingDecl> {
        self.initials.iter().map(|m| self.marking_decl(m)).collect()
    }

    /// A copy of this net with only the transitions satisfying `keep`.
    pub fn retain_transitions(&self, keep: impl Fn(&TaskTransition) -> bool) -> FssmNet {
        let mut net = self.clone();
        net.transitions.retain(|t| keep(t));
        net
    }

    /// A copy with an explicit initial marking list (markings must be valid
    /// for this net).
    pub fn with_initial(&self, m: Marking) -> FssmNet {
        let mut net = self.clone();
        net.initials = vec![m];
        net
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn lat2() -> SecurityLattice {
        SecurityLattice::build(&["Public", "Secret"], &[("Public", "Secret")]).unwrap()
    }

    pub fn latd() -> SecurityLattice {
        SecurityLattice::build(
            &["L", "A", "B", "H"],
            &[("L", "A"), ("L", "B"), ("A", "H"), ("B", "H")],
        )
        .unwrap()
    }

    pub fn cloud(id: &str, lv: &str) -> CloudDecl {
        CloudDecl { id: id.into(), clearance: lv.into() }
    }

    pub fn place(id: &str, cloud: &str) -> PlaceDecl {
        PlaceDecl { id: id.into(), cloud: cloud.into(), capacity: None }
    }

    pub fn take(p: &str, c: &str) -> ArcInDecl {
        ArcInDecl { place: p.into(), mode: ArcMode::Take, class: Some(c.into()) }
    }

    pub fn read(p: &str, c: &str) -> ArcInDecl {
        ArcInDecl { place: p.into(), mode: ArcMode::Read, class: Some(c.into()) }
    }

    pub fn out(p: &str, c: &str) -> ArcOutDecl {
        ArcOutDecl { place: p.into(), class: c.into() }
    }

    pub fn trans(
        id: &str,
        cloud: &str,
        clr: &str,
        floor: Option<&str>,
        inputs: Vec<ArcInDecl>,
        outputs: Vec<ArcOutDecl>,
    ) -> TransitionDecl {
        TransitionDecl {
            id: id.into(),
            cloud: cloud.into(),
            clearance: clr.into(),
            floor: floor.map(Into::into),
            inputs,
            outputs,
        }
    }

    pub fn marking(items: &[(&str, &str, &str, u32)]) -> MarkingDecl {
        let mut m = MarkingDecl::new();
        for (p, c, l, n) in items {
            m.entry(p.to_string()).or_default().push(TokenDecl {
                class: c.to_string(),
                level: l.to_string(),
                count: *n,
            });
        }
        m
    }

    pub fn net1_transitions() -> Vec<TransitionDecl> {
        vec![trans("t_up", "Cpriv", "Secret", Some("Secret"), vec![take("p1", "d")], vec![out("p2", "d")])]
    }

    pub fn net_with(extra: Vec<TransitionDecl>) -> FssmNet {
        let mut ts = net1_transitions();
        ts.extend(extra);
        FssmNet::build(
            lat2(),
            &[cloud("Cpub", "Public"), cloud("Cpriv", "Secret")],
            &[place("p1", "Cpub"), place("p2", "Cpriv")],
            &ts,
            &[marking(&[("p1", "d", "Public", 1)])],
        )
        .unwrap()
    }

    pub fn net1() -> FssmNet {
        net_with(vec![])
    }

    pub fn t_pub() -> TransitionDecl {
        trans("t_pub", "Cpub", "Public", None, vec![read("p1", "d")], vec![])
    }

    pub fn t_sig() -> TransitionDecl {
        trans("t_sig", "Cpub", "Public", None, vec![read("p2", "d")], vec![])
    }

    pub fn net2() -> FssmNet {
        net_with(vec![t_pub()])
    }

    pub fn net3() -> FssmNet {
        net_with(vec![t_pub(), t_sig()])
    }
}

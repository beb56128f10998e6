//! Model files: JSON parsing with located errors, and canonical
//! serialization.

use std::collections::BTreeMap;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::allocation::{CloudSpec, Cost, CostModel, EdgeDecl, TaskDecl, Workflow};
use crate::lattice::SecurityLattice;
use crate::model::{
    ArcInDecl, ArcMode, ArcOutDecl, CloudDecl, FssmNet, MarkingDecl, PlaceDecl, Site, TokenDecl,
    TransitionDecl,
};
use crate::observe::ObsMap;
use crate::opacity::{MonitorDecl, RunMonitor, SecretSpec};
use crate::policy::{Predicate, PredicateExpr};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("invalid model at {path}: {message}")]
    Semantic { path: String, message: String },
}

impl ModelError {
    pub fn path(&self) -> Option<&str> {
        match self {
            ModelError::Syntax { .. } => None,
            ModelError::Schema { path, .. } | ModelError::Semantic { path, .. } => Some(path),
        }
    }
}

fn schema(path: &str, message: impl Into<String>) -> ModelError {
    ModelError::Schema { path: if path.is_empty() { "/".into() } else { path.into() }, message: message.into() }
}

fn semantic(path: &str, message: impl ToString) -> ModelError {
    ModelError::Semantic { path: if path.is_empty() { "/".into() } else { path.into() }, message: message.to_string() }
}

/// JSON-pointer escaping for a single key.
fn key_path(base: &str, key: &str) -> String {
    format!("{base}/{}", key.replace('~', "~0").replace('/', "~1"))
}

/// Transition observations as written in the file: explicit entries plus an
/// optional `by_clearance:<level>` default for everything else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObsSpec {
    pub entries: BTreeMap<String, Option<String>>,
    pub default_level: Option<String>,
}

impl ObsSpec {
    pub fn resolve(&self, net: &FssmNet) -> Result<ObsMap, String> {
        let default = match &self.default_level {
            Some(l) => Some(net.lattice().level(l).map_err(|e| e.to_string())?),
            None => None,
        };
        let mut assignment = self.entries.clone();
        for t in net.transitions() {
            if assignment.contains_key(&t.id) {
                continue;
            }
            if let Some(l) = default {
                let visible = net.lattice().leq(t.clearance, l);
                assignment.insert(t.id.clone(), visible.then(|| t.id.clone()));
            }
        }
        ObsMap::explicit(net, assignment).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecRate {
    Flat(Cost),
    PerTask { default: Option<Cost>, tasks: BTreeMap<String, Cost> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostsSpec {
    pub exec: BTreeMap<String, ExecRate>,
    pub transfer: Cost,
}

/// Everything a model file declares, validated and cross-resolved.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub net: FssmNet,
    pub observations: BTreeMap<String, ObsSpec>,
    pub obs_maps: BTreeMap<String, ObsMap>,
    pub secrets: BTreeMap<String, SecretSpec>,
    pub predicates: BTreeMap<String, PredicateExpr>,
    pub observers: BTreeMap<String, String>,
    pub workflow: Option<Workflow>,
    pub costs: Option<CostsSpec>,
}

impl ModelBundle {
    pub fn from_net(net: FssmNet) -> Self {
        ModelBundle {
            net,
            observations: BTreeMap::new(),
            obs_maps: BTreeMap::new(),
            secrets: BTreeMap::new(),
            predicates: BTreeMap::new(),
            observers: BTreeMap::new(),
            workflow: None,
            costs: None,
        }
    }

    /// Clouds of the net with their execution rates (0 when not given).
    pub fn cloud_specs(&self) -> Vec<CloudSpec> {
        self.net
            .clouds()
            .iter()
            .map(|c| {
                let mut spec = CloudSpec::new(&c.id, c.clearance, Cost::from_integer(0));
                match self.costs.as_ref().and_then(|k| k.exec.get(&c.id)) {
                    Some(ExecRate::Flat(r)) => spec.exec_cost = *r,
                    Some(ExecRate::PerTask { default, tasks }) => {
                        spec.exec_cost = default.unwrap_or_else(|| Cost::from_integer(0));
                        spec.overrides = tasks.clone();
                    }
                    None => {}
                }
                spec
            })
            .collect()
    }

    pub fn cost_model(&self) -> CostModel {
        CostModel {
            transfer_cost: self.costs.as_ref().map(|c| c.transfer).unwrap_or_else(|| Cost::from_integer(0)),
        }
    }

    /// Resolves an observer argument: an alias from "observers" or a level.
    pub fn observer_level(&self, name: &str) -> String {
        self.observers.get(name).cloned().unwrap_or_else(|| name.to_string())
    }

    /// A named predicate, from "predicates" or a state secret.
    pub fn predicate(&self, name: &str) -> Option<&PredicateExpr> {
        self.predicates.get(name).or(match self.secrets.get(name) {
            Some(SecretSpec::State(p)) => Some(p),
            _ => None,
        })
    }
}

// ---- decoding helpers ----

struct Obj<'a> {
    map: &'a Map<String, Value>,
    path: String,
}

impl<'a> Obj<'a> {
    fn new(v: &'a Value, path: &str) -> Result<Self, ModelError> {
        match v {
            Value::Object(map) => Ok(Obj { map, path: path.to_string() }),
            _ => Err(schema(path, "expected an object")),
        }
    }

    fn allow(&self, keys: &[&str]) -> Result<(), ModelError> {
        for k in self.map.keys() {
            if !keys.contains(&k.as_str()) {
                return Err(schema(&key_path(&self.path, k), "unknown key"));
            }
        }
        Ok(())
    }

    fn req(&self, key: &str) -> Result<(&'a Value, String), ModelError> {
        let p = key_path(&self.path, key);
        match self.map.get(key) {
            Some(v) => Ok((v, p)),
            None => Err(schema(&p, "missing required key")),
        }
    }

    fn opt(&self, key: &str) -> Option<(&'a Value, String)> {
        self.map.get(key).map(|v| (v, key_path(&self.path, key)))
    }
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str, ModelError> {
    v.as_str().ok_or_else(|| schema(path, "expected a string"))
}

fn as_arr<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, ModelError> {
    v.as_array().ok_or_else(|| schema(path, "expected an array"))
}

fn as_u32(v: &Value, path: &str) -> Result<u32, ModelError> {
    v.as_u64()
        .and_then(|n| u32::try_from(n).ok())
        .ok_or_else(|| schema(path, "expected a non-negative integer"))
}

fn str_list(v: &Value, path: &str) -> Result<Vec<String>, ModelError> {
    as_arr(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| as_str(x, &format!("{path}/{i}")).map(str::to_string))
        .collect()
}

fn str_tuple(v: &Value, path: &str, n: usize) -> Result<Vec<String>, ModelError> {
    let xs = str_list(v, path)?;
    if xs.len() != n {
        return Err(schema(path, format!("expected an array of {n} strings")));
    }
    Ok(xs)
}

/// Parses a decimal or `p/q` rate exactly.
fn parse_rate(v: &Value, path: &str) -> Result<Cost, ModelError> {
    let text = match v {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        _ => return Err(schema(path, "expected a rate (number or \"p/q\")")),
    };
    let bad = || schema(path, format!("invalid rate `{text}`"));
    let r = if let Some((p, q)) = text.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| bad())?;
        let q: i64 = q.trim().parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(bad());
        }
        Cost::new(p, q)
    } else if let Some((int, frac)) = text.split_once('.') {
        if frac.is_empty() || frac.len() > 15 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = int.starts_with('-');
        let int: i64 = int.parse().map_err(|_| bad())?;
        let frac_v: i64 = frac.parse().map_err(|_| bad())?;
        let scale = 10i64.pow(frac.len() as u32);
        let mag = int.abs() * scale + frac_v;
        Cost::new(if neg { -mag } else { mag }, scale)
    } else {
        Cost::from_integer(text.parse().map_err(|_| bad())?)
    };
    if r < Cost::from_integer(0) {
        return Err(schema(path, "rates must be non-negative"));
    }
    Ok(r)
}

fn rate_value(r: &Cost) -> Value {
    if r.is_integer() {
        Value::from(*r.numer())
    } else {
        Value::from(format!("{}/{}", r.numer(), r.denom()))
    }
}

fn net_error_path(site: Option<&Site>) -> String {
    match site {
        Some(Site::Cloud(i)) => format!("/clouds/{i}"),
        Some(Site::Place(i)) => format!("/places/{i}"),
        Some(Site::Transition(i)) => format!("/transitions/{i}"),
        Some(Site::Initial(i, p)) => key_path(&format!("/initial_markings/{i}"), p),
        None => "/initial_markings".into(),
    }
}

/// Parses and validates a model file.
pub fn parse_model(text: &str) -> Result<ModelBundle, ModelError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| ModelError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let top = Obj::new(&doc, "")?;
    top.allow(&[
        "lattice",
        "clouds",
        "places",
        "transitions",
        "initial_markings",
        "observations",
        "secrets",
        "predicates",
        "observers",
        "workflow",
        "costs",
    ])?;

    // lattice
    let (lv, lpath) = top.req("lattice")?;
    let lobj = Obj::new(lv, &lpath)?;
    lobj.allow(&["levels", "covers"])?;
    let (levels_v, levels_p) = lobj.req("levels")?;
    let levels = str_list(levels_v, &levels_p)?;
    let mut covers = Vec::new();
    if let Some((cv, cp)) = lobj.opt("covers") {
        for (i, pair) in as_arr(cv, &cp)?.iter().enumerate() {
            let xs = str_tuple(pair, &format!("{cp}/{i}"), 2)?;
            covers.push((xs[0].clone(), xs[1].clone()));
        }
    }
    let lattice = SecurityLattice::build(&levels, &covers).map_err(|e| semantic(&lpath, e))?;

    // clouds
    let (cv, cp) = top.req("clouds")?;
    let mut clouds = Vec::new();
    for (i, c) in as_arr(cv, &cp)?.iter().enumerate() {
        let o = Obj::new(c, &format!("{cp}/{i}"))?;
        o.allow(&["id", "clearance"])?;
        let (id, idp) = o.req("id")?;
        let (cl, clp) = o.req("clearance")?;
        clouds.push(CloudDecl { id: as_str(id, &idp)?.into(), clearance: as_str(cl, &clp)?.into() });
    }

    // places
    let (pv, pp) = top.req("places")?;
    let mut places = Vec::new();
    for (i, p) in as_arr(pv, &pp)?.iter().enumerate() {
        let o = Obj::new(p, &format!("{pp}/{i}"))?;
        o.allow(&["id", "cloud", "capacity"])?;
        let (id, idp) = o.req("id")?;
        let (cl, clp) = o.req("cloud")?;
        let capacity = match o.opt("capacity") {
            Some((Value::Null, _)) | None => None,
            Some((v, vp)) => Some(as_u32(v, &vp)?),
        };
        places.push(PlaceDecl { id: as_str(id, &idp)?.into(), cloud: as_str(cl, &clp)?.into(), capacity });
    }

    // transitions
    let mut transitions = Vec::new();
    if let Some((tv, tp)) = top.opt("transitions") {
        for (i, t) in as_arr(tv, &tp)?.iter().enumerate() {
            let base = format!("{tp}/{i}");
            let o = Obj::new(t, &base)?;
            o.allow(&["id", "cloud", "clearance", "floor", "inputs", "outputs"])?;
            let (id, idp) = o.req("id")?;
            let (cl, clp) = o.req("cloud")?;
            let (clr, clrp) = o.req("clearance")?;
            let floor = match o.opt("floor") {
                Some((Value::Null, _)) | None => None,
                Some((v, vp)) => Some(as_str(v, &vp)?.to_string()),
            };
            let mut inputs = Vec::new();
            if let Some((iv, ip)) = o.opt("inputs") {
                for (j, a) in as_arr(iv, &ip)?.iter().enumerate() {
                    let ao = Obj::new(a, &format!("{ip}/{j}"))?;
                    ao.allow(&["place", "mode", "class"])?;
                    let (pl, plp) = ao.req("place")?;
                    let mode = match ao.opt("mode") {
                        None => ArcMode::Take,
                        Some((m, mp)) => match as_str(m, &mp)? {
                            "take" => ArcMode::Take,
                            "read" => ArcMode::Read,
                            _ => return Err(schema(&mp, "mode must be \"take\" or \"read\"")),
                        },
                    };
                    let class = match ao.opt("class") {
                        Some((Value::Null, _)) | None => None,
                        Some((c, cp)) => Some(as_str(c, &cp)?.to_string()),
                    };
                    inputs.push(ArcInDecl { place: as_str(pl, &plp)?.into(), mode, class });
                }
            }
            let mut outputs = Vec::new();
            if let Some((ov, op)) = o.opt("outputs") {
                for (j, a) in as_arr(ov, &op)?.iter().enumerate() {
                    let ao = Obj::new(a, &format!("{op}/{j}"))?;
                    ao.allow(&["place", "class"])?;
                    let (pl, plp) = ao.req("place")?;
                    let (c, cp) = ao.req("class")?;
                    outputs.push(ArcOutDecl { place: as_str(pl, &plp)?.into(), class: as_str(c, &cp)?.into() });
                }
            }
            transitions.push(TransitionDecl {
                id: as_str(id, &idp)?.into(),
                cloud: as_str(cl, &clp)?.into(),
                clearance: as_str(clr, &clrp)?.into(),
                floor,
                inputs,
                outputs,
            });
        }
    }

    // initial markings
    let (mv, mp) = top.req("initial_markings")?;
    let mut initials = Vec::new();
    for (i, m) in as_arr(mv, &mp)?.iter().enumerate() {
        let o = Obj::new(m, &format!("{mp}/{i}"))?;
        let mut marking = MarkingDecl::new();
        for (place, toks) in o.map {
            let tpath = key_path(&o.path, place);
            let mut list = Vec::new();
            for (j, tok) in as_arr(toks, &tpath)?.iter().enumerate() {
                let to = Obj::new(tok, &format!("{tpath}/{j}"))?;
                to.allow(&["class", "level", "count"])?;
                let (c, cp) = to.req("class")?;
                let (l, lp) = to.req("level")?;
                let count = match to.opt("count") {
                    None => 1,
                    Some((n, np)) => as_u32(n, &np)?,
                };
                list.push(TokenDecl { class: as_str(c, &cp)?.into(), level: as_str(l, &lp)?.into(), count });
            }
            marking.insert(place.clone(), list);
        }
        initials.push(marking);
    }

    let net = FssmNet::build(lattice, &clouds, &places, &transitions, &initials)
        .map_err(|e| semantic(&net_error_path(e.site()), e))?;
    let mut bundle = ModelBundle::from_net(net);

    // observations
    if let Some((ov, op)) = top.opt("observations") {
        let o = Obj::new(ov, &op)?;
        for (name, spec) in o.map {
            let sp = key_path(&op, name);
            let so = Obj::new(spec, &sp)?;
            let mut entries = BTreeMap::new();
            let mut default_level = None;
            for (t, sym) in so.map {
                let tp = key_path(&sp, t);
                if t == "default" {
                    let d = as_str(sym, &tp)?;
                    let level = d
                        .strip_prefix("by_clearance:")
                        .ok_or_else(|| schema(&tp, "default must be \"by_clearance:<level>\""))?;
                    default_level = Some(level.to_string());
                } else {
                    let s = match sym {
                        Value::Null => None,
                        other => Some(as_str(other, &tp)?.to_string()),
                    };
                    entries.insert(t.clone(), s);
                }
            }
            let spec = ObsSpec { entries, default_level };
            let resolved = spec.resolve(&bundle.net).map_err(|e| semantic(&sp, e))?;
            bundle.obs_maps.insert(name.clone(), resolved);
            bundle.observations.insert(name.clone(), spec);
        }
    }

    // secrets
    if let Some((sv, sp)) = top.opt("secrets") {
        let o = Obj::new(sv, &sp)?;
        for (name, spec) in o.map {
            let np = key_path(&sp, name);
            let so = Obj::new(spec, &np)?;
            so.allow(&["state", "monitor"])?;
            let secret = match (so.opt("state"), so.opt("monitor")) {
                (Some((e, ep)), None) => {
                    let expr = parse_predicate(e, &ep)?;
                    Predicate::resolve(&expr, &bundle.net).map_err(|e| semantic(&ep, e))?;
                    SecretSpec::State(expr)
                }
                (None, Some((m, mpath))) => {
                    let decl: MonitorDecl = serde_json::from_value(m.clone())
                        .map_err(|e| schema(&mpath, e.to_string()))?;
                    RunMonitor::new(&decl, &bundle.net).map_err(|e| semantic(&mpath, e))?;
                    SecretSpec::Run(decl)
                }
                _ => return Err(schema(&np, "expected exactly one of \"state\" or \"monitor\"")),
            };
            bundle.secrets.insert(name.clone(), secret);
        }
    }

    if let Some((pv, pp)) = top.opt("predicates") {
        let o = Obj::new(pv, &pp)?;
        for (name, e) in o.map {
            let ep = key_path(&pp, name);
            let expr = parse_predicate(e, &ep)?;
            Predicate::resolve(&expr, &bundle.net).map_err(|e| semantic(&ep, e))?;
            bundle.predicates.insert(name.clone(), expr);
        }
    }

    if let Some((ov, op)) = top.opt("observers") {
        let o = Obj::new(ov, &op)?;
        for (name, l) in o.map {
            let lp = key_path(&op, name);
            let level = as_str(l, &lp)?;
            bundle.net.lattice().level(level).map_err(|e| semantic(&lp, e))?;
            bundle.observers.insert(name.clone(), level.to_string());
        }
    }

    if let Some((wv, wp)) = top.opt("workflow") {
        let o = Obj::new(wv, &wp)?;
        o.allow(&["tasks", "edges"])?;
        let (tv, tp) = o.req("tasks")?;
        let mut tasks = Vec::new();
        for (i, t) in as_arr(tv, &tp)?.iter().enumerate() {
            let to = Obj::new(t, &format!("{tp}/{i}"))?;
            to.allow(&["id", "touches"])?;
            let (id, idp) = to.req("id")?;
            let mut touches = Vec::new();
            if let Some((xv, xp)) = to.opt("touches") {
                for (j, x) in as_arr(xv, &xp)?.iter().enumerate() {
                    let pair = str_tuple(x, &format!("{xp}/{j}"), 2)?;
                    touches.push((pair[0].clone(), pair[1].clone()));
                }
            }
            tasks.push(TaskDecl { id: as_str(id, &idp)?.into(), touches });
        }
        let mut edges = Vec::new();
        if let Some((ev, ep)) = o.opt("edges") {
            for (i, e) in as_arr(ev, &ep)?.iter().enumerate() {
                let xs = str_tuple(e, &format!("{ep}/{i}"), 4)?;
                edges.push(EdgeDecl {
                    producer: xs[0].clone(),
                    consumer: xs[1].clone(),
                    class: xs[2].clone(),
                    level: xs[3].clone(),
                });
            }
        }
        bundle.workflow = Some(Workflow::new(bundle.net.lattice(), &tasks, &edges).map_err(|e| semantic(&wp, e))?);
    }

    if let Some((cv, cp)) = top.opt("costs") {
        let o = Obj::new(cv, &cp)?;
        o.allow(&["exec", "transfer"])?;
        let transfer = match o.opt("transfer") {
            Some((t, tp)) => parse_rate(t, &tp)?,
            None => Cost::from_integer(0),
        };
        let mut exec = BTreeMap::new();
        if let Some((ev, ep)) = o.opt("exec") {
            let eo = Obj::new(ev, &ep)?;
            for (cloud, rate) in eo.map {
                let rp = key_path(&ep, cloud);
                if bundle.net.cloud_index(cloud).is_none() {
                    return Err(semantic(&rp, format!("unknown cloud `{cloud}`")));
                }
                let r = match rate {
                    Value::Object(m) => {
                        let mut default = None;
                        let mut tasks = BTreeMap::new();
                        for (task, v) in m {
                            let vp = key_path(&rp, task);
                            let r = parse_rate(v, &vp)?;
                            if task == "default" {
                                default = Some(r);
                            } else {
                                tasks.insert(task.clone(), r);
                            }
                        }
                        ExecRate::PerTask { default, tasks }
                    }
                    other => ExecRate::Flat(parse_rate(other, &rp)?),
                };
                exec.insert(cloud.clone(), r);
            }
        }
        bundle.costs = Some(CostsSpec { exec, transfer });
    }

    Ok(bundle)
}

fn parse_predicate(v: &Value, path: &str) -> Result<PredicateExpr, ModelError> {
    serde_json::from_value(v.clone()).map_err(|e| schema(path, format!("invalid predicate: {e}")))
}

// ---- serialization ----

/// Rebuilds every object with keys in sorted order.
fn canonicalize(v: Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut entries: Vec<(String, Value)> = m.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, canonicalize(v))).collect())
        }
        Value::Array(xs) => Value::Array(xs.into_iter().map(canonicalize).collect()),
        other => other,
    }
}

fn obj(pairs: Vec<(&str, Value)>) -> Value {
    Value::Object(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

/// Serializes a net (with its lattice) into model-file JSON.
pub fn net_value(net: &FssmNet) -> Value {
    let lat = net.lattice();
    let levels: Vec<Value> = lat.levels().map(|l| Value::from(lat.name(l))).collect();
    let covers: Vec<Value> = lat
        .covers()
        .into_iter()
        .map(|(a, b)| Value::from(vec![lat.name(a), lat.name(b)]))
        .collect();
    let clouds: Vec<Value> = net
        .cloud_decls()
        .into_iter()
        .map(|c| obj(vec![("id", c.id.into()), ("clearance", c.clearance.into())]))
        .collect();
    let places: Vec<Value> = net
        .place_decls()
        .into_iter()
        .map(|p| {
            let mut o = vec![("id", p.id.into()), ("cloud", p.cloud.into())];
            if let Some(c) = p.capacity {
                o.push(("capacity", c.into()));
            }
            obj(o)
        })
        .collect();
    let transitions: Vec<Value> = net
        .transition_decls()
        .into_iter()
        .map(|t| {
            let inputs: Vec<Value> = t
                .inputs
                .into_iter()
                .map(|a| {
                    let mut o = vec![("place", a.place.into()), ("mode", a.mode.as_str().into())];
                    if let Some(c) = a.class {
                        o.push(("class", c.into()));
                    }
                    obj(o)
                })
                .collect();
            let outputs: Vec<Value> = t
                .outputs
                .into_iter()
                .map(|a| obj(vec![("place", a.place.into()), ("class", a.class.into())]))
                .collect();
            obj(vec![
                ("id", t.id.into()),
                ("cloud", t.cloud.into()),
                ("clearance", t.clearance.into()),
                ("floor", t.floor.unwrap_or_default().into()),
                ("inputs", inputs.into()),
                ("outputs", outputs.into()),
            ])
        })
        .collect();
    let initials: Vec<Value> = net
        .initial_decls()
        .into_iter()
        .map(|m| {
            Value::Object(
                m.into_iter()
                    .map(|(p, toks)| {
                        let toks: Vec<Value> = toks
                            .into_iter()
                            .map(|t| {
                                obj(vec![
                                    ("class", t.class.into()),
                                    ("level", t.level.into()),
                                    ("count", t.count.into()),
                                ])
                            })
                            .collect();
                        (p, Value::from(toks))
                    })
                    .collect(),
            )
        })
        .collect();
    obj(vec![
        ("lattice", obj(vec![("levels", levels.into()), ("covers", covers.into())])),
        ("clouds", clouds.into()),
        ("places", places.into()),
        ("transitions", transitions.into()),
        ("initial_markings", initials.into()),
    ])
}

/// Canonical JSON text of a bundle: sorted keys, entities in id order,
/// two-space indentation, trailing newline.
pub fn serialize_model(b: &ModelBundle) -> String {
    let mut doc = net_value(&b.net);
    let Value::Object(top) = &mut doc else { unreachable!() };
    let lat = b.net.lattice();

    if !b.observations.is_empty() {
        let mut m = Map::new();
        for (name, spec) in &b.observations {
            let mut o = Map::new();
            for (t, s) in &spec.entries {
                o.insert(t.clone(), s.clone().map(Value::from).unwrap_or(Value::Null));
            }
            if let Some(l) = &spec.default_level {
                o.insert("default".into(), format!("by_clearance:{l}").into());
            }
            m.insert(name.clone(), Value::Object(o));
        }
        top.insert("observations".into(), Value::Object(m));
    }
    if !b.secrets.is_empty() {
        let mut m = Map::new();
        for (name, s) in &b.secrets {
            let v = match s {
                SecretSpec::State(p) => obj(vec![("state", serde_json::to_value(p).unwrap())]),
                SecretSpec::Run(d) => {
                    let mut d = d.clone();
                    d.accepting.sort();
                    d.edges.sort();
                    obj(vec![("monitor", serde_json::to_value(&d).unwrap())])
                }
            };
            m.insert(name.clone(), v);
        }
        top.insert("secrets".into(), Value::Object(m));
    }
    if !b.predicates.is_empty() {
        let m = b
            .predicates
            .iter()
            .map(|(k, p)| (k.clone(), serde_json::to_value(p).unwrap()))
            .collect();
        top.insert("predicates".into(), Value::Object(m));
    }
    if !b.observers.is_empty() {
        let m = b.observers.iter().map(|(k, v)| (k.clone(), Value::from(v.clone()))).collect();
        top.insert("observers".into(), Value::Object(m));
    }
    if let Some(wf) = &b.workflow {
        let tasks: Vec<Value> = wf
            .task_decls(lat)
            .into_iter()
            .map(|t| {
                let touches: Vec<Value> =
                    t.touches.into_iter().map(|(c, l)| Value::from(vec![c, l])).collect();
                obj(vec![("id", t.id.into()), ("touches", touches.into())])
            })
            .collect();
        let edges: Vec<Value> = wf
            .edge_decls(lat)
            .into_iter()
            .map(|e| Value::from(vec![e.producer, e.consumer, e.class, e.level]))
            .collect();
        top.insert("workflow".into(), obj(vec![("tasks", tasks.into()), ("edges", edges.into())]));
    }
    if let Some(c) = &b.costs {
        let exec: Map<String, Value> = c
            .exec
            .iter()
            .map(|(cloud, r)| {
                let v = match r {
                    ExecRate::Flat(r) => rate_value(r),
                    ExecRate::PerTask { default, tasks } => {
                        let mut m: Map<String, Value> =
                            tasks.iter().map(|(t, r)| (t.clone(), rate_value(r))).collect();
                        if let Some(d) = default {
                            m.insert("default".into(), rate_value(d));
                        }
                        Value::Object(m)
                    }
                };
                (cloud.clone(), v)
            })
            .collect();
        top.insert(
            "costs".into(),
            obj(vec![("exec", Value::Object(exec)), ("transfer", rate_value(&c.transfer))]),
        );
    }
    let mut text = serde_json::to_string_pretty(&canonicalize(doc)).expect("model values serialize");
    text.push('\n');
    text
}

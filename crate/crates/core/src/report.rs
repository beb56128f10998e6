//! Structured command results and their human rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::allocation::Cost;
use crate::opacity::ExposedState;
use crate::policy::{InvariantMode, RuleKind, Violation};
use crate::statespace::GraphStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Holds,
    HoldsUpToBound,
    Violated,
    Infeasible,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok | Status::Holds | Status::HoldsUpToBound => 0,
            Status::Violated | Status::Infeasible => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Holds => "holds",
            Status::HoldsUpToBound => "holds up to bound",
            Status::Violated => "violated",
            Status::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationEntry {
    pub assignment: BTreeMap<String, String>,
    pub cost: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Validate {
        levels: usize,
        clouds: usize,
        places: usize,
        transitions: usize,
        initial_markings: usize,
        observations: Vec<String>,
        secrets: Vec<String>,
        has_workflow: bool,
    },
    Explore {
        #[serde(skip_serializing_if = "Option::is_none", default)]
        dot: Option<String>,
    },
    Blp {
        mode: String,
        rules: Vec<RuleKind>,
        violations: Vec<Violation>,
    },
    Invariant {
        predicate: String,
        mode: InvariantMode,
        violations: Vec<Violation>,
    },
    Ni {
        observer: String,
        high: Vec<String>,
        witness: Option<Vec<String>>,
    },
    Opacity {
        secret: String,
        observation: String,
        kind: String,
        witness: Option<Vec<String>>,
        exposed: Option<Vec<ExposedState>>,
        example_secret_run: Option<Vec<String>>,
    },
    Allocate {
        mode: String,
        allocations: Vec<AllocationEntry>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        emitted_net: Option<String>,
    },
}

/// One command's result. Field order is fixed; nothing time-dependent is
/// included unless timestamps were requested.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub model: String,
    pub status: Status,
    pub truncated: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub explored: Option<GraphStats>,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub generated_at_unix: Option<u64>,
}

pub const TRUNCATION_WARNING: &str =
    "exploration stopped at a limit; the result covers only the explored states";

impl Report {
    pub fn new(command: String, model: String, status: Status, outcome: Outcome) -> Self {
        Report {
            tool: "fssm".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            model,
            status,
            truncated: false,
            warning: None,
            explored: None,
            outcome,
            generated_at_unix: None,
        }
    }

    pub fn with_exploration(mut self, stats: Option<GraphStats>, truncated: bool) -> Self {
        self.explored = stats;
        self.truncated = truncated;
        if truncated {
            self.warning = Some(TRUNCATION_WARNING.into());
        }
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn to_human(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "fssm {}: {} ({})", self.version, self.command, self.model);
        let _ = writeln!(out, "status: {}", self.status.as_str());
        if let Some(w) = &self.warning {
            let _ = writeln!(out, "warning: {w}");
        }
        if let Some(s) = &self.explored {
            let _ = writeln!(out, "explored: {} states, {} edges, depth {}", s.states, s.edges, s.depth);
        }
        match &self.outcome {
            Outcome::Validate { levels, clouds, places, transitions, initial_markings, observations, secrets, has_workflow } => {
                let _ = writeln!(
                    out,
                    "model: {levels} levels, {clouds} clouds, {places} places, {transitions} transitions, {initial_markings} initial markings"
                );
                if !observations.is_empty() {
                    let _ = writeln!(out, "observations: {}", observations.join(", "));
                }
                if !secrets.is_empty() {
                    let _ = writeln!(out, "secrets: {}", secrets.join(", "));
                }
                if *has_workflow {
                    let _ = writeln!(out, "workflow: present");
                }
            }
            Outcome::Explore { dot } => {
                if let Some(p) = dot {
                    let _ = writeln!(out, "dot written to {p}");
                }
            }
            Outcome::Blp { mode, rules, violations } => {
                let rules: Vec<&str> = rules.iter().map(|r| r.as_str()).collect();
                let _ = writeln!(out, "mode: {mode}; rules: {}", rules.join(", "));
                render_violations(&mut out, violations);
            }
            Outcome::Invariant { predicate, mode, violations } => {
                let mode = match mode {
                    InvariantMode::Always => "always",
                    InvariantMode::Never => "never",
                };
                let _ = writeln!(out, "invariant: {mode} {predicate}");
                render_violations(&mut out, violations);
            }
            Outcome::Ni { observer, high, witness } => {
                let _ = writeln!(out, "observer: {observer}");
                let _ = writeln!(out, "high transitions: {}", list_or_none(high));
                if let Some(w) = witness {
                    let _ = writeln!(out, "distinguishing observation: {}", word(w));
                }
            }
            Outcome::Opacity { secret, observation, kind, witness, exposed, example_secret_run } => {
                let _ = writeln!(out, "secret: {secret} ({kind}); observation: {observation}");
                if let Some(w) = witness {
                    let _ = writeln!(out, "revealing observation: {}", word(w));
                }
                if let Some(xs) = exposed {
                    let xs: Vec<String> = xs
                        .iter()
                        .map(|x| match &x.monitor {
                            Some(m) => format!("s{}/{m}", x.state),
                            None => format!("s{}", x.state),
                        })
                        .collect();
                    let _ = writeln!(out, "estimate: {{{}}}", xs.join(", "));
                }
                if let Some(r) = example_secret_run {
                    let _ = writeln!(out, "secret run: {}", word(r));
                }
            }
            Outcome::Allocate { mode, allocations, emitted_net } => {
                let _ = writeln!(out, "mode: {mode}; {} allocation(s)", allocations.len());
                for a in allocations {
                    let pairs: Vec<String> = a.assignment.iter().map(|(t, c)| format!("{t}->{c}")).collect();
                    let _ = writeln!(out, "  {{{}}} cost {}", pairs.join(", "), a.cost);
                }
                if let Some(p) = emitted_net {
                    let _ = writeln!(out, "net written to {p}");
                }
            }
        }
        out
    }
}

fn word(w: &[String]) -> String {
    if w.is_empty() {
        "ε".into()
    } else {
        w.join(" ")
    }
}

fn list_or_none(xs: &[String]) -> String {
    if xs.is_empty() {
        "none".into()
    } else {
        xs.join(", ")
    }
}

fn render_violations(out: &mut String, vs: &[Violation]) {
    for v in vs {
        let at = match (&v.transition, v.state) {
            (Some(t), Some(s)) => format!(" at {t} from s{s}"),
            (Some(t), None) => format!(" at {t}"),
            (None, Some(s)) => format!(" in s{s}"),
            (None, None) => String::new(),
        };
        let _ = writeln!(out, "violation {}{at}: {}", v.kind.as_str(), v.detail);
        if v.state.is_some() {
            let _ = writeln!(out, "  witness: {}", word(&v.witness));
        }
        if v.occurrences > 1 {
            let _ = writeln!(out, "  occurrences: {}", v.occurrences);
        }
    }
}

/// Costs as integers or `p/q`.
pub fn cost_text(c: &Cost) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trips_and_exit_codes() {
        let r = Report::new(
            "check ni --observer Public".into(),
            "net3.json".into(),
            Status::Violated,
            Outcome::Ni { observer: "Public".into(), high: vec!["t_up".into()], witness: Some(vec!["w".into()]) },
        )
        .with_exploration(Some(GraphStats { states: 3, edges: 4, depth: 1 }), true);
        let back: Report = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert_eq!(r.status.exit_code(), 1);
        assert!(r.to_human().contains("distinguishing observation: w"));
        assert!(r.to_human().contains("warning:"));
        assert_eq!(cost_text(&Cost::new(7, 2)), "7/2");
    }
}

//! Command-line front end. `run` is what the `fssm` binary calls; it is
//! public so tests can drive the CLI in-process.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::allocation::{enumerate_valid, min_cost_allocation, synthesize_net, AllocError};
use crate::io::{parse_model, serialize_model, ModelBundle};
use crate::noninterference::check_snni_named;
use crate::observe::ObsMap;
use crate::opacity::{check_opacity, Secret, SecretSpec};
use crate::policy::{
    check_invariant, dynamic_blp_check, static_blp_check, BlpConfig, InvariantMode, Predicate,
    PredicateExpr, RuleKind, Verdict,
};
use crate::report::{cost_text, AllocationEntry, Outcome, Report, Status};
use crate::statespace::{explore, to_dot, DotOptions, ExploreOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RuleArg {
    ReadUp,
    WriteDown,
    Containment,
}

impl From<RuleArg> for RuleKind {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::ReadUp => RuleKind::ReadUp,
            RuleArg::WriteDown => RuleKind::WriteDown,
            RuleArg::Containment => RuleKind::Containment,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    State,
    Run,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Always,
    Never,
}

#[derive(Debug, Parser)]
#[command(name = "fssm", version, about = "Flow-sensitive security models for federated clouds")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    format: Format,
    /// Worker threads for exploration (0 = all cores, 1 = sequential).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Fail instead of reporting a bounded result when a limit is hit.
    #[arg(long, global = true)]
    strict_limits: bool,
    /// Add a generation timestamp to reports.
    #[arg(long, global = true)]
    timestamps: bool,
    #[command(flatten)]
    limits: Limits,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Limits {
    /// Index of the initial marking to start from.
    #[arg(long, global = true, default_value_t = 0)]
    initial: usize,
    #[arg(long, global = true, default_value_t = 1_000_000)]
    max_states: usize,
    #[arg(long, global = true)]
    max_depth: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate a model file.
    Validate {
        model: PathBuf,
        /// Print the canonical form of the model instead of a report.
        #[arg(long)]
        canonical: bool,
    },
    /// Explore the reachable state space.
    Explore {
        model: PathBuf,
        /// Write the reachability graph as DOT.
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Label DOT nodes with their markings.
        #[arg(long)]
        show_markings: bool,
    },
    /// Run a security check.
    Check {
        #[command(subcommand)]
        check: CheckCommand,
    },
    /// Allocate workflow tasks to clouds.
    Allocate {
        model: PathBuf,
        /// List every valid allocation.
        #[arg(long, conflicts_with_all = ["min_cost", "emit_net"])]
        enumerate: bool,
        /// Find the cheapest valid allocation (default).
        #[arg(long)]
        min_cost: bool,
        /// Refuse to enumerate more than this many allocations.
        #[arg(long, default_value_t = 10_000)]
        limit: usize,
        /// Write the cheapest allocation as a model file.
        #[arg(long)]
        emit_net: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum CheckCommand {
    /// Bell-LaPadula rules over explored firings, or declarations only.
    Blp {
        model: PathBuf,
        /// Check declarations without exploring.
        #[arg(long = "static")]
        static_only: bool,
        /// Rules to check (default: all).
        #[arg(long, value_enum, value_delimiter = ',')]
        rules: Vec<RuleArg>,
    },
    /// A marking predicate that must always (or never) hold.
    Invariant {
        model: PathBuf,
        /// Predicate name, or an inline JSON predicate.
        #[arg(long)]
        pred: String,
        #[arg(long, value_enum, default_value_t = ModeArg::Always)]
        mode: ModeArg,
    },
    /// Strong nondeterministic non-interference for one observer.
    Ni {
        model: PathBuf,
        /// Observer level, or an alias from "observers".
        #[arg(long)]
        observer: String,
        /// Observation map naming the low transitions' symbols.
        #[arg(long)]
        obs: Option<String>,
    },
    /// Opacity of a named secret under an observation.
    Opacity {
        model: PathBuf,
        #[arg(long)]
        secret: String,
        /// Observation map name, or `by_clearance:<level>`.
        #[arg(long)]
        obs: String,
        /// Expected secret kind; rejected if the secret is of the other kind.
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
    },
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type CmdResult = Result<Output, Failure>;

#[allow(clippy::large_enum_variant)]
enum Output {
    Report(Report),
    Text(String),
}

/// Runs the CLI and returns the process exit code: 0 when the property
/// holds, 1 on a violation or infeasible allocation, 2 on usage or input
/// errors.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(Output::Text(t)) => {
            let _ = out.write_all(t.as_bytes());
            0
        }
        Ok(Output::Report(mut r)) => {
            if cli.timestamps {
                r.generated_at_unix = std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .ok()
                    .map(|d| d.as_secs());
            }
            let text = match cli.format {
                Format::Human => r.to_human(),
                Format::Json => r.to_json(),
            };
            let _ = out.write_all(text.as_bytes());
            r.status.exit_code()
        }
        Err(Failure(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
    }
}

fn load(path: &Path) -> Result<ModelBundle, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    parse_model(&text).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

impl Cli {
    fn explore_options(&self) -> ExploreOptions {
        ExploreOptions {
            max_states: self.limits.max_states,
            max_depth: self.limits.max_depth,
            initial: self.limits.initial,
            strict: self.strict_limits,
            jobs: self.jobs,
        }
    }

    /// Result-affecting limit flags, echoed into reports.
    fn limit_args(&self) -> String {
        let mut s = format!(" --max-states {}", self.limits.max_states);
        if let Some(d) = self.limits.max_depth {
            s += &format!(" --max-depth {d}");
        }
        if self.limits.initial != 0 {
            s += &format!(" --initial {}", self.limits.initial);
        }
        s
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn dispatch(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Validate { model, canonical } => {
            let b = load(model)?;
            if *canonical {
                return Ok(Output::Text(serialize_model(&b)));
            }
            let outcome = Outcome::Validate {
                levels: b.net.lattice().len(),
                clouds: b.net.clouds().len(),
                places: b.net.places().len(),
                transitions: b.net.transitions().len(),
                initial_markings: b.net.initials().len(),
                observations: b.observations.keys().cloned().collect(),
                secrets: b.secrets.keys().cloned().collect(),
                has_workflow: b.workflow.is_some(),
            };
            Ok(Output::Report(Report::new("validate".into(), display(model), Status::Ok, outcome)))
        }
        Command::Explore { model, dot, show_markings } => {
            let b = load(model)?;
            let g = explore(&b.net, &cli.explore_options())?;
            if let Some(path) = dot {
                write_file(path, &to_dot(&b.net, &g, DotOptions { show_markings: *show_markings }))?;
            }
            let status = Status::Ok;
            let outcome = Outcome::Explore { dot: dot.as_deref().map(display) };
            let command = format!("explore{}", cli.limit_args());
            Ok(Output::Report(
                Report::new(command, display(model), status, outcome).with_exploration(Some(g.stats()), g.truncated()),
            ))
        }
        Command::Check { check } => dispatch_check(cli, check),
        Command::Allocate { model, enumerate, min_cost: _, limit, emit_net } => {
            let b = load(model)?;
            let wf = b.workflow.as_ref().ok_or_else(|| Failure(format!("{}: no workflow declared", display(model))))?;
            let lat = b.net.lattice();
            let clouds = b.cloud_specs();
            let cost = b.cost_model();
            let entry = |a: &crate::allocation::Allocation| -> Result<AllocationEntry, Failure> {
                let c = crate::allocation::allocation_cost(wf, &clouds, &cost, a)?;
                Ok(AllocationEntry { assignment: a.assignment.clone(), cost: cost_text(&c) })
            };
            if *enumerate {
                let all = enumerate_valid(wf, &clouds, lat, *limit)?;
                let allocations = all.iter().map(entry).collect::<Result<Vec<_>, _>>()?;
                let status = if allocations.is_empty() { Status::Infeasible } else { Status::Ok };
                let outcome = Outcome::Allocate { mode: "enumerate".into(), allocations, emitted_net: None };
                let command = format!("allocate --enumerate --limit {limit}");
                return Ok(Output::Report(Report::new(command, display(model), status, outcome)));
            }
            let command = "allocate --min-cost".to_string();
            match min_cost_allocation(wf, &clouds, lat, &cost) {
                Ok((a, c)) => {
                    if let Some(path) = emit_net {
                        let net = synthesize_net(wf, &a, lat, &clouds, false)?;
                        write_file(path, &serialize_model(&ModelBundle::from_net(net)))?;
                    }
                    let allocations = vec![AllocationEntry { assignment: a.assignment, cost: cost_text(&c) }];
                    let outcome = Outcome::Allocate {
                        mode: "min_cost".into(),
                        allocations,
                        emitted_net: emit_net.as_deref().map(display),
                    };
                    Ok(Output::Report(Report::new(command, display(model), Status::Ok, outcome)))
                }
                Err(AllocError::NoFeasibleAllocation) => {
                    let outcome = Outcome::Allocate { mode: "min_cost".into(), allocations: vec![], emitted_net: None };
                    Ok(Output::Report(Report::new(command, display(model), Status::Infeasible, outcome)))
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn status_of(v: Verdict) -> Status {
    match v {
        Verdict::Holds => Status::Holds,
        Verdict::HoldsUpToBound => Status::HoldsUpToBound,
        Verdict::Violated => Status::Violated,
    }
}

fn bounded(holds: bool, truncated: bool) -> Status {
    match (holds, truncated) {
        (false, _) => Status::Violated,
        (true, true) => Status::HoldsUpToBound,
        (true, false) => Status::Holds,
    }
}

fn observation(b: &ModelBundle, name: &str) -> Result<ObsMap, Failure> {
    if let Some(m) = b.obs_maps.get(name) {
        return Ok(m.clone());
    }
    if let Some(level) = name.strip_prefix("by_clearance:") {
        let level = b.observer_level(level);
        let l = b.net.lattice().level(&level)?;
        return Ok(ObsMap::derived(&b.net, l));
    }
    Err(Failure(format!("unknown observation map `{name}`")))
}

fn dispatch_check(cli: &Cli, check: &CheckCommand) -> CmdResult {
    let opts = cli.explore_options();
    match check {
        CheckCommand::Blp { model, static_only, rules } => {
            let b = load(model)?;
            let mut kinds: Vec<RuleKind> = rules.iter().map(|&r| r.into()).collect();
            if kinds.is_empty() {
                kinds = vec![RuleKind::ReadUp, RuleKind::WriteDown, RuleKind::Containment];
            }
            kinds.sort();
            kinds.dedup();
            let cfg = BlpConfig::only(&kinds);
            let (report, mode) = if *static_only {
                (static_blp_check(&b.net, &cfg)?, "static")
            } else {
                (dynamic_blp_check(&b.net, &cfg, &opts)?, "dynamic")
            };
            let names: Vec<&str> = kinds.iter().map(|k| k.as_str()).collect();
            let mut command = format!("check blp --rules {}", names.join(","));
            if *static_only {
                command = format!("check blp --static --rules {}", names.join(","));
            } else {
                command += &cli.limit_args();
            }
            let outcome = Outcome::Blp { mode: mode.into(), rules: kinds, violations: report.violations };
            Ok(Output::Report(
                Report::new(command, display(model), status_of(report.verdict), outcome)
                    .with_exploration(report.explored, report.truncated),
            ))
        }
        CheckCommand::Invariant { model, pred, mode } => {
            let b = load(model)?;
            let expr: PredicateExpr = if pred.trim_start().starts_with('{') {
                serde_json::from_str(pred).map_err(|e| Failure(format!("invalid predicate: {e}")))?
            } else {
                b.predicate(pred)
                    .cloned()
                    .ok_or_else(|| Failure(format!("unknown predicate `{pred}`")))?
            };
            let p = Predicate::resolve(&expr, &b.net)?;
            let mode = match mode {
                ModeArg::Always => InvariantMode::Always,
                ModeArg::Never => InvariantMode::Never,
            };
            let g = explore(&b.net, &opts)?;
            let report = check_invariant(&g, &b.net, &p, mode);
            let mode_name = if mode == InvariantMode::Always { "always" } else { "never" };
            let command = format!("check invariant --pred {pred} --mode {mode_name}{}", cli.limit_args());
            let outcome = Outcome::Invariant { predicate: pred.clone(), mode, violations: report.violations };
            Ok(Output::Report(
                Report::new(command, display(model), status_of(report.verdict), outcome)
                    .with_exploration(report.explored, report.truncated),
            ))
        }
        CheckCommand::Ni { model, observer, obs } => {
            let b = load(model)?;
            let level = b.observer_level(observer);
            let names = match obs {
                Some(n) => Some(observation(&b, n)?),
                None => None,
            };
            let v = check_snni_named(&b.net, &level, names.as_ref(), &opts)?;
            let mut command = format!("check ni --observer {observer}");
            if let Some(n) = obs {
                command += &format!(" --obs {n}");
            }
            command += &cli.limit_args();
            let status = bounded(v.holds, v.truncated);
            let outcome = Outcome::Ni { observer: level, high: v.high, witness: v.witness };
            Ok(Output::Report(Report::new(command, display(model), status, outcome).with_exploration(None, v.truncated)))
        }
        CheckCommand::Opacity { model, secret, obs, kind: expected } => {
            let b = load(model)?;
            let spec = b
                .secrets
                .get(secret)
                .ok_or_else(|| Failure(format!("unknown secret `{secret}`")))?;
            let kind = match spec {
                SecretSpec::State(_) => "state",
                SecretSpec::Run(_) => "run",
            };
            let wanted = expected.map(|k| if k == KindArg::State { "state" } else { "run" });
            if wanted.is_some_and(|w| w != kind) {
                return Err(Failure(format!("secret `{secret}` is a {kind} secret")));
            }
            let resolved = Secret::resolve(spec, &b.net).map_err(Failure)?;
            let map = observation(&b, obs)?;
            let g = explore(&b.net, &opts)?;
            let v = check_opacity(&g, &b.net, &map, &resolved)?;
            let mut command = format!("check opacity --secret {secret} --obs {obs}");
            if let Some(w) = wanted {
                command += &format!(" --kind {w}");
            }
            command += &cli.limit_args();
            let status = bounded(v.opaque, v.truncated);
            let outcome = Outcome::Opacity {
                secret: secret.clone(),
                observation: obs.clone(),
                kind: kind.into(),
                witness: v.witness,
                exposed: v.exposed,
                example_secret_run: v.example_secret_run,
            };
            Ok(Output::Report(
                Report::new(command, display(model), status, outcome).with_exploration(Some(g.stats()), v.truncated),
            ))
        }
    }
}

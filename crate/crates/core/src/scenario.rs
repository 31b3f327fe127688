//! Scripted scenarios: a topology, an optional config, and steps run in order
//! against an embedded engine with a virtual clock.
//!
//! ```yaml
//! topology: reference_topology.yaml   # path relative to the script, or inline
//! steps:
//!   - submit: {id: r1, component: face_detection}
//!   - advance: 10                     # seconds
//!   - link_down: wan
//!   - assert_placement: {component: face_detection, node: cloud}
//!   - assert_metric: {selector: link.wan.offered_mbps, op: "==", value: 4.0}
//!   - report
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ConfigDoc, EngineConfig};
use crate::engine::{Engine, EngineError, RequestState};
use crate::flowsim::MetricsReport;
use crate::model::{secs_to_millis, LinkId, RequestDoc, RequestId, DEFAULT_TENANT};
use crate::topology::{LinkStatus, Topology, TopologyDoc};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DocRef<T> {
    Path(String),
    Inline(T),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(default)]
    pub name: Option<String>,
    pub topology: DocRef<TopologyDoc>,
    #[serde(default)]
    pub config: Option<DocRef<ConfigDoc>>,
    #[serde(with = "serde_yaml::with::singleton_map_recursive")]
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Submit(RequestDoc),
    /// Seconds of simulated time.
    Advance(f64),
    LinkDown(String),
    LinkUp(String),
    AssertPlacement(PlacementAssertion),
    AssertMetric(MetricAssertion),
    AssertOutcome(OutcomeAssertion),
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementAssertion {
    pub component: String,
    pub node: String,
    #[serde(default)]
    pub tenant: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricAssertion {
    pub selector: String,
    pub op: Comparator,
    pub value: f64,
    #[serde(default)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeAssertion {
    pub request: String,
    pub state: RequestState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl Comparator {
    pub fn holds(self, actual: f64, expected: f64, tolerance: f64) -> bool {
        let close = (actual - expected).abs() <= tolerance;
        match self {
            Comparator::Eq => close,
            Comparator::Ne => !close,
            Comparator::Lt => actual < expected,
            Comparator::Le => actual <= expected || close,
            Comparator::Gt => actual > expected,
            Comparator::Ge => actual >= expected || close,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparator::Eq => "==",
            Comparator::Ne => "!=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("{0}")]
    Parse(String),
    #[error("step {step}: {message}")]
    Engine { step: usize, message: String },
    #[error("step {step}: assertion failed: {message}")]
    Assertion { step: usize, message: String },
}

impl ScenarioError {
    /// Process exit status: 1 engine error, 2 parse or usage error, 3 failed
    /// assertion.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Engine { .. } => 1,
            ScenarioError::Parse(_) => 2,
            ScenarioError::Assertion { .. } => 3,
        }
    }
}

impl From<EngineError> for ScenarioError {
    fn from(e: EngineError) -> Self {
        ScenarioError::Engine {
            step: 0,
            message: e.to_string(),
        }
    }
}

/// A parsed script with its topology and config resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub topology: Topology,
    pub config: EngineConfig,
    pub steps: Vec<Step>,
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::Parse(format!("cannot read {}: {e}", path.display())))
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = read(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut s = Scenario::from_yaml(&text, &base)?;
        if s.name.is_empty() {
            s.name = path
                .file_stem()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        Ok(s)
    }

    /// Parses a script; relative document paths resolve against `base`.
    pub fn from_yaml(text: &str, base: &Path) -> Result<Scenario, ScenarioError> {
        let doc: ScenarioDoc = serde_yaml::from_str(text)
            .map_err(|e| ScenarioError::Parse(format!("scenario: {e}")))?;
        Scenario::from_doc(doc, base)
    }

    pub fn from_doc(doc: ScenarioDoc, base: &Path) -> Result<Scenario, ScenarioError> {
        let resolve = |p: &str| -> PathBuf { base.join(p) };
        let topology = match &doc.topology {
            DocRef::Path(p) => Topology::load_file(&resolve(p)),
            DocRef::Inline(d) => Topology::from_doc(d),
        }
        .map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let config = match &doc.config {
            None => Ok(EngineConfig::default()),
            Some(DocRef::Path(p)) => EngineConfig::load_file(&resolve(p)),
            Some(DocRef::Inline(d)) => EngineConfig::from_doc(d),
        }
        .map_err(|e| ScenarioError::Parse(e.to_string()))?;
        Ok(Scenario {
            name: doc.name.unwrap_or_default(),
            topology,
            config,
            steps: doc.steps,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSample {
    pub t_s: f64,
    pub link: LinkId,
    pub offered_mbps: f64,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub t_s: f64,
    pub flow: String,
    pub bytes_sourced: f64,
    pub bytes_delivered: f64,
    pub bytes_cached: f64,
    pub bytes_lost: f64,
}

/// Runner state that survives persist/restore.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Progress {
    cursor: usize,
    log: Vec<String>,
    links: Vec<LinkSample>,
    flows: Vec<FlowSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// One line per step, in order.
    pub log: Vec<String>,
    pub report: MetricsReport,
}

pub struct ScenarioRunner {
    steps: Vec<Step>,
    engine: Engine,
    progress: Progress,
}

impl ScenarioRunner {
    pub fn new(scenario: Scenario) -> ScenarioRunner {
        ScenarioRunner {
            engine: Engine::new(scenario.topology, scenario.config),
            steps: scenario.steps,
            progress: Progress::default(),
        }
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn engine_mut(&mut self) -> &mut Engine {
        &mut self.engine
    }

    pub fn cursor(&self) -> usize {
        self.progress.cursor
    }

    pub fn is_done(&self) -> bool {
        self.progress.cursor >= self.steps.len()
    }

    pub fn log(&self) -> &[String] {
        &self.progress.log
    }

    /// Samples taken after every `advance` step.
    pub fn timeseries(&self) -> (&[LinkSample], &[FlowSample]) {
        (&self.progress.links, &self.progress.flows)
    }

    /// Runs the next step. Returns `Ok(false)` when there is none.
    pub fn step(&mut self) -> Result<bool, ScenarioError> {
        let Some(step) = self.steps.get(self.progress.cursor).cloned() else {
            return Ok(false);
        };
        let n = self.progress.cursor + 1;
        let line = self.execute(n, &step)?;
        self.progress.log.push(format!("[{n}] {line}"));
        self.progress.cursor += 1;
        Ok(true)
    }

    /// Runs the remaining steps and returns the log with the final report.
    pub fn run(&mut self) -> Result<RunSummary, ScenarioError> {
        while self.step()? {}
        Ok(self.summary())
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            log: self.progress.log.clone(),
            report: self.engine.report(),
        }
    }

    fn engine_err(step: usize, e: impl fmt::Display) -> ScenarioError {
        ScenarioError::Engine {
            step,
            message: e.to_string(),
        }
    }

    fn execute(&mut self, n: usize, step: &Step) -> Result<String, ScenarioError> {
        match step {
            Step::Submit(doc) => {
                let id = self
                    .engine
                    .submit(doc)
                    .map_err(|e| Self::engine_err(n, format!("submit rejected: {e}")))?;
                self.engine.process_queue();
                let rec = self.engine.status(&id).expect("submitted");
                let detail = match (&rec.state, &rec.placement) {
                    (RequestState::Placed, Some(p)) => format!("Placed on {}", p.node_id),
                    (RequestState::Rejected, _) => format!(
                        "Rejected ({})",
                        rec.reasons
                            .iter()
                            .map(|r| format!("{}: {}", r.node, r.requirement))
                            .collect::<Vec<_>>()
                            .join(", ")
                    ),
                    (state, _) => format!("{state:?}"),
                };
                Ok(format!(
                    "submit {id} ({}) -> {detail}",
                    rec.request.component.name
                ))
            }
            Step::Advance(secs) => {
                let ms = secs_to_millis(*secs)
                    .ok_or_else(|| Self::engine_err(n, format!("invalid advance {secs}")))?;
                self.engine.advance(ms);
                self.sample();
                Ok(format!(
                    "advance {secs}s -> t={}s",
                    self.engine.now().as_secs_f64()
                ))
            }
            Step::LinkDown(l) | Step::LinkUp(l) => {
                let (status, verb) = match step {
                    Step::LinkDown(_) => (LinkStatus::Down, "link_down"),
                    _ => (LinkStatus::Up, "link_up"),
                };
                let changed = self
                    .engine
                    .set_link_state(&LinkId::new(l.as_str()), status)
                    .map_err(|e| Self::engine_err(n, e))?;
                Ok(format!(
                    "{verb} {l}{}",
                    if changed { "" } else { " (no change)" }
                ))
            }
            Step::AssertPlacement(a) => {
                let tenant = a.tenant.as_deref().unwrap_or(DEFAULT_TENANT);
                let actual = self
                    .engine
                    .snapshot()
                    .running_placements()
                    .find(|p| p.tenant.as_str() == tenant && p.component.name == a.component)
                    .map(|p| p.node_id.to_string());
                match actual {
                    Some(node) if node == a.node => Ok(format!(
                        "assert_placement {} on {}: ok",
                        a.component, a.node
                    )),
                    other => Err(ScenarioError::Assertion {
                        step: n,
                        message: format!(
                            "{} expected on {}, found {}",
                            a.component,
                            a.node,
                            other.as_deref().unwrap_or("no placement")
                        ),
                    }),
                }
            }
            Step::AssertMetric(a) => {
                let actual = self
                    .metric(&a.selector)
                    .map_err(|e| ScenarioError::Assertion {
                        step: n,
                        message: e,
                    })?;
                if a.op.holds(actual, a.value, a.tolerance) {
                    Ok(format!(
                        "assert_metric {} = {actual} {} {}: ok",
                        a.selector, a.op, a.value
                    ))
                } else {
                    Err(ScenarioError::Assertion {
                        step: n,
                        message: format!(
                            "{} = {actual}, expected {} {}",
                            a.selector, a.op, a.value
                        ),
                    })
                }
            }
            Step::AssertOutcome(a) => {
                let state = self
                    .engine
                    .status(&RequestId::new(a.request.as_str()))
                    .map(|r| r.state);
                if state == Some(a.state) {
                    Ok(format!("assert_outcome {} {:?}: ok", a.request, a.state))
                } else {
                    Err(ScenarioError::Assertion {
                        step: n,
                        message: format!(
                            "request {} expected {:?}, found {state:?}",
                            a.request, a.state
                        ),
                    })
                }
            }
            Step::Report => {
                let text = serde_json::to_string(&self.engine.report())
                    .map_err(|e| Self::engine_err(n, e))?;
                Ok(format!("report {text}"))
            }
        }
    }

    fn sample(&mut self) {
        let r = self.engine.report();
        for (id, l) in &r.links {
            self.progress.links.push(LinkSample {
                t_s: r.time_s,
                link: id.clone(),
                offered_mbps: l.offered_mbps,
                utilization: l.utilization,
            });
        }
        for (id, f) in &r.flows {
            self.progress.flows.push(FlowSample {
                t_s: r.time_s,
                flow: id.to_string(),
                bytes_sourced: f.bytes_sourced,
                bytes_delivered: f.bytes_delivered,
                bytes_cached: f.bytes_cached,
                bytes_lost: f.bytes_lost,
            });
        }
    }

    /// Resolves `kind.id.field` against the current report and inventory.
    pub fn metric(&self, selector: &str) -> Result<f64, String> {
        resolve_metric(&self.engine, selector)
    }

    /// Persists the engine together with the runner's position.
    pub fn persist(&self, path: &Path) -> Result<(), ScenarioError> {
        let extra = serde_json::to_value(&self.progress)
            .map_err(|e| ScenarioError::Parse(e.to_string()))?;
        self.engine
            .persist(path, extra)
            .map_err(|e| Self::engine_err(self.progress.cursor, e))
    }

    /// Resumes `scenario` from a state file written by [`ScenarioRunner::persist`].
    pub fn resume(scenario: Scenario, path: &Path) -> Result<ScenarioRunner, ScenarioError> {
        let (engine, extra) = Engine::restore(path)?;
        let progress: Progress = serde_json::from_value(extra)
            .map_err(|e| ScenarioError::Parse(format!("runner state: {e}")))?;
        Ok(ScenarioRunner {
            steps: scenario.steps,
            engine,
            progress,
        })
    }
}

/// Metric selectors: `link.<id>.{offered_mbps,reserved_mbps,utilization,capacity_mbps}`,
/// `flow.<id>.{bytes_sourced,bytes_delivered,bytes_cached,bytes_lost,bytes_cached_peak,rate_mbps,drain_mbps}`,
/// `cache.<node>.{occupied_mib,capacity_mib}` and
/// `node.<id>.{allocated_vcpus,allocated_ram_mib,allocated_disk_gib,placements}`.
pub fn resolve_metric(engine: &Engine, selector: &str) -> Result<f64, String> {
    let (kind, rest) = selector
        .split_once('.')
        .ok_or_else(|| format!("bad selector `{selector}`"))?;
    let (id, field) = rest
        .rsplit_once('.')
        .ok_or_else(|| format!("bad selector `{selector}`"))?;
    let report = engine.report();
    let unknown_field = || format!("unknown field `{field}` in `{selector}`");
    match kind {
        "link" => {
            let l = report
                .links
                .get(id)
                .ok_or_else(|| format!("unknown link `{id}`"))?;
            match field {
                "offered_mbps" => Ok(l.offered_mbps),
                "reserved_mbps" => Ok(l.reserved_mbps),
                "utilization" => Ok(l.utilization),
                "capacity_mbps" => Ok(l.capacity_mbps),
                _ => Err(unknown_field()),
            }
        }
        "flow" => {
            let f = report
                .flows
                .get(id)
                .ok_or_else(|| format!("unknown flow `{id}`"))?;
            match field {
                "bytes_sourced" => Ok(f.bytes_sourced),
                "bytes_delivered" => Ok(f.bytes_delivered),
                "bytes_cached" => Ok(f.bytes_cached),
                "bytes_lost" => Ok(f.bytes_lost),
                "bytes_cached_peak" => Ok(f.bytes_cached_peak),
                "rate_mbps" => Ok(f.rate_mbps),
                "drain_mbps" => Ok(f.drain_mbps),
                _ => Err(unknown_field()),
            }
        }
        "cache" => {
            let c = report
                .caches
                .get(id)
                .ok_or_else(|| format!("no cache on `{id}`"))?;
            match field {
                "occupied_mib" => Ok(c.occupied_mib),
                "capacity_mib" => Ok(c.capacity_mib),
                _ => Err(unknown_field()),
            }
        }
        "node" => {
            let view = engine.snapshot();
            let n = view
                .node(&id.into())
                .ok_or_else(|| format!("unknown node `{id}`"))?;
            match field {
                "allocated_vcpus" => Ok(n.allocated.vcpus()),
                "allocated_ram_mib" => Ok(n.allocated.ram_mib as f64),
                "allocated_disk_gib" => Ok(n.allocated.disk_gib as f64),
                "placements" => Ok(view
                    .running_placements()
                    .filter(|p| p.node_id.as_str() == id)
                    .count() as f64),
                _ => Err(unknown_field()),
            }
        }
        _ => Err(format!("unknown selector kind `{kind}`")),
    }
}

use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use foglet_core::engine::SubmitError;
use foglet_core::model::{RequestDoc, RequestId};
use foglet_core::negotiator::DecisionTrace;
use foglet_core::scenario::ScenarioError;
use foglet_core::{Engine, EngineConfig, RequestState, Scenario, ScenarioRunner, Topology};

use crate::http::{self, AppState};

pub const EXIT_ENGINE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ASSERTION: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "foglet",
    version,
    about = "Fog orchestrator over a simulated edge/cloud infrastructure"
)]
pub struct Cli {
    /// Engine configuration file.
    #[arg(long, env = "FOGLET_CONFIG", global = true)]
    pub config: Option<PathBuf>,
    /// Topology file for `serve` and `load`.
    #[arg(long, global = true)]
    pub topology: Option<PathBuf>,
    #[arg(long, global = true, default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    #[arg(long, global = true, value_enum, default_value_t = LogFormat::Text)]
    pub log_format: LogFormat,
    /// Engine state file shared by the offline subcommands.
    #[arg(long, global = true, default_value = "foglet.state")]
    pub state: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogFormat {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve the HTTP API. Starts from `--topology` if given, else from the state file.
    Serve,
    /// Create a fresh state file from a topology.
    Load { topology: Option<PathBuf> },
    /// Submit a request document and decide it.
    Submit { request: PathBuf },
    /// Show one request, or all of them.
    Status { id: Option<String> },
    /// Show the filter verdicts and scores behind a decision.
    Explain { id: String },
    /// Run a scenario script against an in-memory engine.
    Run {
        scenario: PathBuf,
        /// Write `<prefix>links.csv` and `<prefix>flows.csv`.
        #[arg(long)]
        timeseries: Option<String>,
    },
    /// Print the metrics report for the state file.
    Report,
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn engine(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_ENGINE,
            message: message.into(),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Failure {
        Failure {
            code: e.exit_code(),
            message: e.to_string(),
        }
    }
}

pub fn init_logging(format: LogFormat, default: &str) {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let builder = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr);
    let _ = match format {
        LogFormat::Text => builder.try_init(),
        LogFormat::Json => builder.json().try_init(),
    };
}

/// Executes a parsed command line, printing to stdout. Returns the text to
/// print on success.
pub fn execute(cli: &Cli) -> Result<String, Failure> {
    match &cli.command {
        Command::Serve => serve(cli).map(|()| String::new()),
        Command::Load { topology } => {
            let path = topology
                .as_ref()
                .or(cli.topology.as_ref())
                .ok_or_else(|| Failure::usage("no topology given"))?;
            let engine = fresh_engine(cli, path)?;
            save(&engine, &cli.state)?;
            let t = engine.topology();
            Ok(format!(
                "loaded {} nodes, {} links, {} endpoints into {}\n",
                t.node_count(),
                t.link_count(),
                t.endpoints().count(),
                cli.state.display()
            ))
        }
        Command::Submit { request } => {
            let text = std::fs::read_to_string(request)
                .map_err(|e| Failure::usage(format!("cannot read {}: {e}", request.display())))?;
            let doc = RequestDoc::from_yaml(&text).map_err(|e| Failure::usage(e.to_string()))?;
            let mut engine = open(&cli.state)?;
            let id = engine.submit(&doc).map_err(|e| match e {
                SubmitError::Invalid(v) => Failure::usage(v.to_string()),
                SubmitError::Conflict(m) => Failure::engine(m),
            })?;
            engine.process_queue();
            save(&engine, &cli.state)?;
            Ok(status_line(&engine, &id))
        }
        Command::Status { id } => {
            let engine = open(&cli.state)?;
            match id {
                Some(id) => {
                    let id = RequestId::new(id.as_str());
                    if engine.status(&id).is_none() {
                        return Err(Failure::usage(format!("unknown request `{id}`")));
                    }
                    Ok(status_line(&engine, &id))
                }
                None => Ok(engine
                    .requests()
                    .map(|r| status_line(&engine, &r.request.id))
                    .collect()),
            }
        }
        Command::Explain { id } => {
            let engine = open(&cli.state)?;
            let trace = engine
                .explain(&RequestId::new(id.as_str()))
                .ok_or_else(|| Failure::usage(format!("no decision recorded for `{id}`")))?;
            Ok(render_trace(trace))
        }
        Command::Run {
            scenario,
            timeseries,
        } => run_scenario(cli, scenario, timeseries.as_deref()),
        Command::Report => {
            let engine = open(&cli.state)?;
            to_json(&engine.report())
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Failure::engine(e.to_string()))
}

fn config(cli: &Cli) -> Result<Option<EngineConfig>, Failure> {
    cli.config
        .as_deref()
        .map(|p| EngineConfig::load_file(p).map_err(|e| Failure::usage(e.to_string())))
        .transpose()
}

fn fresh_engine(cli: &Cli, topology: &Path) -> Result<Engine, Failure> {
    let topo = Topology::load_file(topology).map_err(|e| Failure::usage(e.to_string()))?;
    Ok(Engine::new(topo, config(cli)?.unwrap_or_default()))
}

fn open(state: &Path) -> Result<Engine, Failure> {
    if !state.exists() {
        return Err(Failure::usage(format!(
            "no state file at {}; run `foglet load <topology>` first",
            state.display()
        )));
    }
    Engine::restore(state)
        .map(|(e, _)| e)
        .map_err(|e| Failure::engine(format!("{}: {e}", state.display())))
}

fn save(engine: &Engine, state: &Path) -> Result<(), Failure> {
    engine
        .persist(state, serde_json::Value::Null)
        .map_err(|e| Failure::engine(format!("{}: {e}", state.display())))
}

fn status_line(engine: &Engine, id: &RequestId) -> String {
    let r = engine.status(id).expect("known request");
    let detail = match r.state {
        RequestState::Placed => r
            .placement
            .as_ref()
            .map(|p| format!(" on {}", p.node_id))
            .unwrap_or_default(),
        RequestState::Rejected => format!(
            " ({})",
            r.reasons
                .iter()
                .map(|x| format!("{}: {} {}", x.node, x.requirement, x.detail))
                .collect::<Vec<_>>()
                .join(" | ")
        ),
        _ => String::new(),
    };
    format!(
        "{id}\t{}\t{:?}{detail}\n",
        r.request.component.name, r.state
    )
}

pub fn render_trace(trace: &DecisionTrace) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "request {} decided at t={}", trace.request, trace.at);
    for v in &trace.verdicts {
        let _ = writeln!(
            out,
            "node {}: {}",
            v.node,
            if v.passed { "pass" } else { "FAIL" }
        );
        for c in &v.checks {
            let mark = if c.passed { "ok  " } else { "fail" };
            let _ = write!(
                out,
                "  {mark} {} {} (measured {})",
                c.kind, c.requirement, c.measured
            );
            if !c.detail.is_empty() {
                let _ = write!(out, ": {}", c.detail);
            }
            out.push('\n');
        }
    }
    for s in &trace.scores {
        let _ = writeln!(
            out,
            "score {} = {:.4} (capacity_fit {:.4}, network_slack {:.4}, tier {:.4})",
            s.node,
            s.score,
            s.subscores.capacity_fit,
            s.subscores.network_slack,
            s.subscores.tier_preference
        );
    }
    let _ = writeln!(
        out,
        "chosen: {}",
        trace.chosen.as_ref().map(|n| n.as_str()).unwrap_or("none")
    );
    out
}

fn run_scenario(cli: &Cli, path: &Path, timeseries: Option<&str>) -> Result<String, Failure> {
    let mut scenario = Scenario::load(path)?;
    if let Some(cfg) = config(cli)? {
        scenario.config = cfg;
    }
    let mut runner = ScenarioRunner::new(scenario);
    let result = runner.run();
    if let Some(prefix) = timeseries {
        write_timeseries(&runner, prefix)?;
    }
    match result {
        Ok(summary) => {
            let mut out: String = summary.log.iter().map(|l| format!("{l}\n")).collect();
            out.push_str(&to_json(&summary.report)?);
            Ok(out)
        }
        Err(e) => {
            for l in runner.log() {
                println!("{l}");
            }
            Err(e.into())
        }
    }
}

fn write_timeseries(runner: &ScenarioRunner, prefix: &str) -> Result<(), Failure> {
    let (links, flows) = runner.timeseries();
    let io = |e: csv::Error| Failure::engine(format!("writing time series: {e}"));
    let mut w = csv::Writer::from_path(format!("{prefix}links.csv")).map_err(io)?;
    for s in links {
        w.serialize(s).map_err(io)?;
    }
    w.flush().map_err(|e| io(e.into()))?;
    let mut w = csv::Writer::from_path(format!("{prefix}flows.csv")).map_err(io)?;
    for s in flows {
        w.serialize(s).map_err(io)?;
    }
    w.flush().map_err(|e| io(e.into()))?;
    Ok(())
}

fn serve(cli: &Cli) -> Result<(), Failure> {
    let engine = match &cli.topology {
        Some(t) => fresh_engine(cli, t)?,
        None => open(&cli.state)?,
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::engine(e.to_string()))?;
    runtime.block_on(async {
        let state = AppState::new(engine);
        let worker = state.spawn_worker();
        let listener = tokio::net::TcpListener::bind(cli.listen)
            .await
            .map_err(|e| Failure::usage(format!("cannot listen on {}: {e}", cli.listen)))?;
        tracing::info!(addr = %cli.listen, "serving");
        axum::serve(listener, http::router(state.clone()))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Failure::engine(e.to_string()))?;
        worker.abort();
        state.drain();
        let engine = state.engine();
        save(&engine, &cli.state)?;
        tracing::info!(state = %cli.state.display(), "state saved");
        Ok(())
    })
}

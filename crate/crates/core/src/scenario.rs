//! Scenario runner: load topology, workload and control plan, run to a
//! horizon, write `stats.csv`, `events.log` and `summary.txt`.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::control::{self, parse_control, ControlError, ControlPlan};
use crate::emulation::{Engine, EngineConfig};
use crate::stats::{summary_rows, write_atomic, Metric, Sample, StatsError, StatsStore};
use crate::topology::{
    build_network, parse_topology, NetworkModel, TopologyError, ValidationError,
};
use crate::traffic::{activate, parse_workload, TrafficError, Workload};

pub const STATS_FILE: &str = "stats.csv";
pub const EVENTS_FILE: &str = "events.log";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub topology_path: PathBuf,
    pub workload_path: PathBuf,
    pub control_path: Option<PathBuf>,
    pub until: f64,
    /// recorded in the summary; the engine itself draws no random numbers
    pub seed: u64,
    pub sample_interval: f64,
    pub out_dir: PathBuf,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Topology {
        path: String,
        #[source]
        source: TopologyError,
    },
    #[error("{path}: {}", join_errors(errors))]
    Validation {
        path: String,
        errors: Vec<ValidationError>,
    },
    #[error("{path}: {source}")]
    Workload {
        path: String,
        #[source]
        source: TrafficError,
    },
    #[error("{path}: {source}")]
    Control {
        path: String,
        #[source]
        source: ControlError,
    },
    #[error("{0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Output(#[from] StatsError),
}

fn join_errors(errors: &[ValidationError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl ScenarioError {
    /// 1 for bad inputs, 2 for failures while running or writing results.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Output(_) => 2,
            _ => 1,
        }
    }
}

/// Validated inputs of one run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: NetworkModel,
    pub workload: Workload,
    pub plan: ControlPlan,
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Read {
        path: path.display().to_string(),
        source,
    })
}

/// Builds and validates a network from topology text; warnings are kept on
/// the model.
pub fn load_model(text: &str, path: &str) -> Result<NetworkModel, ScenarioError> {
    let topology = parse_topology(text).map_err(|source| ScenarioError::Topology {
        path: path.to_string(),
        source,
    })?;
    build_network(&topology).map_err(|errors| ScenarioError::Validation {
        path: path.to_string(),
        errors,
    })
}

impl Scenario {
    pub fn from_texts(
        topology: &str,
        workload: &str,
        control: Option<&str>,
    ) -> Result<Self, ScenarioError> {
        Self::parse(
            topology, "topology", workload, "workload", control, "control",
        )
    }

    fn parse(
        topology: &str,
        topology_path: &str,
        workload: &str,
        workload_path: &str,
        control: Option<&str>,
        control_path: &str,
    ) -> Result<Self, ScenarioError> {
        let model = load_model(topology, topology_path)?;
        let workload = parse_workload(workload).map_err(|source| ScenarioError::Workload {
            path: workload_path.to_string(),
            source,
        })?;
        let plan = match control {
            Some(text) => parse_control(text).map_err(|source| ScenarioError::Control {
                path: control_path.to_string(),
                source,
            })?,
            None => ControlPlan::default(),
        };
        Ok(Self {
            model,
            workload,
            plan,
        })
    }

    pub fn load(spec: &ScenarioSpec) -> Result<Self, ScenarioError> {
        let topology = read(&spec.topology_path)?;
        let workload = read(&spec.workload_path)?;
        let control = spec.control_path.as_deref().map(read).transpose()?;
        let control_path = spec
            .control_path
            .as_deref()
            .map(|p| p.display().to_string())
            .unwrap_or_default();
        Self::parse(
            &topology,
            &spec.topology_path.display().to_string(),
            &workload,
            &spec.workload_path.display().to_string(),
            control.as_deref(),
            &control_path,
        )
    }

    /// An engine with the workload activated and the plan scheduled. Unknown
    /// workload endpoints and control targets are reported here, before any
    /// event runs.
    pub fn engine(&self, config: EngineConfig) -> Result<Engine, ScenarioError> {
        let mut engine = Engine::new(self.model.clone(), config);
        activate(&self.workload, &mut engine).map_err(|source| ScenarioError::Workload {
            path: "workload".into(),
            source,
        })?;
        control::bind(&self.plan, &engine).map_err(|source| ScenarioError::Control {
            path: "control".into(),
            source,
        })?;
        for action in self.plan.actions() {
            engine
                .schedule_control(action.clone())
                .map_err(|e| ScenarioError::InvalidSpec(e.to_string()))?;
        }
        Ok(engine)
    }

    pub fn simulate(&self, until: f64, sample_interval: f64) -> Result<Engine, ScenarioError> {
        check_horizon(until, sample_interval)?;
        let mut engine = self.engine(EngineConfig {
            sample_interval: Some(sample_interval),
            ..EngineConfig::default()
        })?;
        engine.run(until);
        Ok(engine)
    }
}

fn check_horizon(until: f64, sample_interval: f64) -> Result<(), ScenarioError> {
    if !(until > 0.0) || !until.is_finite() {
        return Err(ScenarioError::InvalidSpec(format!(
            "--until must be > 0, got {until}"
        )));
    }
    if !(sample_interval > 0.0) || !sample_interval.is_finite() {
        return Err(ScenarioError::InvalidSpec(format!(
            "--interval must be > 0, got {sample_interval}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservationViolation {
    pub time: f64,
    pub injected: f64,
    pub delivered: f64,
    pub dropped: f64,
    pub in_flight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservationCheck {
    /// sample instants examined
    pub instants: usize,
    pub violation: Option<ConservationViolation>,
}

impl ConservationCheck {
    pub fn passed(&self) -> bool {
        self.instants > 0 && self.violation.is_none()
    }
}

impl std::fmt::Display for ConservationCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (&self.violation, self.instants) {
            (None, 0) => write!(f, "conservation: FAIL (no samples)"),
            (None, n) => write!(
                f,
                "conservation: PASS injected = delivered + dropped + in_flight at {n} sample instants"
            ),
            (Some(v), _) => write!(
                f,
                "conservation: FAIL at t={:.6}: injected {} != delivered {} + dropped {} + in_flight {}",
                v.time, v.injected, v.delivered, v.dropped, v.in_flight
            ),
        }
    }
}

/// Checks `injected = delivered + dropped + in_flight` at every sample
/// instant. Injected, delivered and in-flight counts come from the `net`
/// object; drops are summed over `link:` and `device:` objects, which record
/// every drop exactly once (the `queue:` rows break link drops down by class).
pub fn check_conservation(samples: &[Sample]) -> ConservationCheck {
    let mut instants = 0;
    let mut i = 0;
    while i < samples.len() {
        let time = samples[i].time;
        let mut j = i;
        let (mut injected, mut delivered, mut in_flight, mut dropped) = (None, 0.0, 0.0, 0.0);
        while j < samples.len() && samples[j].time == time {
            let s = &samples[j];
            if s.object == "net" {
                match s.metric {
                    Metric::PacketsInjected => injected = Some(s.value),
                    Metric::PacketsDelivered => delivered = s.value,
                    Metric::InFlight => in_flight = s.value,
                    _ => {}
                }
            } else if s.metric.is_drop()
                && (s.object.starts_with("link:") || s.object.starts_with("device:"))
            {
                dropped += s.value;
            }
            j += 1;
        }
        if let Some(injected) = injected {
            instants += 1;
            if injected != delivered + dropped + in_flight {
                return ConservationCheck {
                    instants,
                    violation: Some(ConservationViolation {
                        time,
                        injected,
                        delivered,
                        dropped,
                        in_flight,
                    }),
                };
            }
        }
        i = j;
    }
    ConservationCheck {
        instants,
        violation: None,
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub stats: StatsStore,
    pub conservation: ConservationCheck,
    pub flows_completed: usize,
    pub flows_failed: usize,
    pub summary: String,
}

/// Summary text: run parameters, flow totals, one row per (object, metric),
/// and the conservation verdict as the last line.
pub fn render_summary(
    spec_line: &str,
    engine: &Engine,
    conservation: &ConservationCheck,
) -> (String, usize, usize) {
    let flows = engine.flows();
    let completed = flows
        .iter()
        .filter(|f| matches!(f.status, crate::emulation::FlowStatus::Completed { .. }))
        .count();
    let failed = flows
        .iter()
        .filter(|f| matches!(f.status, crate::emulation::FlowStatus::Failed { .. }))
        .count();
    let mut out = String::new();
    writeln!(out, "{spec_line}").unwrap();
    writeln!(
        out,
        "metric catalog v{}; packets injected={} delivered={} dropped={} in_flight={}",
        crate::stats::CATALOG_VERSION,
        engine.packets_injected(),
        engine.packets_delivered(),
        engine.packets_dropped(),
        engine.in_flight()
    )
    .unwrap();
    writeln!(
        out,
        "flows total={} completed={completed} failed={failed}",
        flows.len()
    )
    .unwrap();
    for row in summary_rows(engine.stats()) {
        writeln!(out, "{row}").unwrap();
    }
    writeln!(out, "{conservation}").unwrap();
    (out, completed, failed)
}

pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioReport, ScenarioError> {
    check_horizon(spec.until, spec.sample_interval)?;
    let scenario = Scenario::load(spec)?;
    let engine = scenario.simulate(spec.until, spec.sample_interval)?;
    let conservation = check_conservation(engine.stats().samples());
    let spec_line = format!(
        "until={} seed={} sample_interval={} flows={} control_actions={}",
        spec.until,
        spec.seed,
        spec.sample_interval,
        scenario.workload.len(),
        scenario.plan.len()
    );
    let (summary, flows_completed, flows_failed) =
        render_summary(&spec_line, &engine, &conservation);

    std::fs::create_dir_all(&spec.out_dir).map_err(|source| StatsError::Io {
        path: spec.out_dir.display().to_string(),
        source,
    })?;
    let stats = engine.into_stats();
    stats.export_csv(&spec.out_dir.join(STATS_FILE))?;
    stats.export_events(&spec.out_dir.join(EVENTS_FILE))?;
    write_atomic(&spec.out_dir.join(SUMMARY_FILE), summary.as_bytes())?;
    Ok(ScenarioReport {
        stats,
        conservation,
        flows_completed,
        flows_failed,
        summary,
    })
}

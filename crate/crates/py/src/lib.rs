//! Python bindings for the test bench simulator.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use labbench_core::emulation::{self, EngineConfig, FlowStatus};
use labbench_core::scenario::{self, ScenarioError, ScenarioSpec};
use labbench_core::stats::{self, DEFAULT_SAMPLE_INTERVAL};
use labbench_core::topology;
use labbench_core::traffic::{self, ArrivalModel, Destination, RequestKind, SizeDistribution};

/// (name, address/len, dot1q vlan)
type InterfaceRow = (String, Option<String>, Option<u16>);
/// (id, status, latency, failure reason, delivered bytes)
type FlowRow = (u64, &'static str, Option<f64>, Option<&'static str>, u64);
type SampleRow = (f64, String, &'static str, f64);

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn scenario_err(e: ScenarioError) -> PyErr {
    match e {
        ScenarioError::Output(_) => PyOSError::new_err(e.to_string()),
        _ => value_err(e),
    }
}

/// A parsed topology document.
#[pyclass(module = "labbench", frozen)]
struct Topology {
    inner: topology::Topology,
}

#[pymethods]
impl Topology {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        topology::parse_topology(text)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    fn emit(&self) -> String {
        topology::emit_topology(&self.inner)
    }

    #[getter]
    fn devices(&self) -> Vec<(String, String)> {
        self.inner
            .devices
            .iter()
            .map(|d| (d.name.clone(), d.kind.as_str().to_string()))
            .collect()
    }

    /// Interfaces of a device as (name, address/len or None, vlan or None).
    fn interfaces(&self, device: &str) -> PyResult<Vec<InterfaceRow>> {
        let d = self
            .inner
            .device(device)
            .ok_or_else(|| value_err(format!("no device `{device}`")))?;
        Ok(d.interfaces
            .iter()
            .map(|i| {
                (
                    i.name.clone(),
                    i.ip.map(|ip| format!("{}/{}", ip.address, ip.prefix_len)),
                    i.encapsulation.map(|e| e.vlan),
                )
            })
            .collect())
    }

    /// Validates the model and returns (warnings, routing tables as text).
    #[allow(clippy::type_complexity)]
    fn validate(&self) -> PyResult<(Vec<String>, Vec<(String, String)>)> {
        let model = topology::build_network(&self.inner).map_err(|errors| {
            value_err(
                errors
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("; "),
            )
        })?;
        let routes = topology::compute_routes(&model)
            .into_iter()
            .map(|(device, table)| (device, table.to_string()))
            .collect();
        Ok((
            model.warnings.iter().map(ToString::to_string).collect(),
            routes,
        ))
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Topology(devices={}, links={}, vms={})",
            self.inner.devices.len(),
            self.inner.links.len(),
            self.inner.vms.len()
        )
    }
}

/// A request schedule.
#[pyclass(module = "labbench", frozen)]
struct Workload {
    inner: traffic::Workload,
}

#[pymethods]
impl Workload {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        traffic::parse_workload(text)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    /// Draws `count` requests. `sizes` is an int (fixed size), a list of
    /// observed sizes (empirical fit) or a (mu, sigma) tuple (lognormal).
    /// Exactly one of `interval` and `rate` must be given.
    #[staticmethod]
    #[pyo3(signature = (sizes, count, *, interval=None, rate=None, seed=0, src="PC1", dst="VM1_file:files", kind="file", priority=0))]
    #[allow(clippy::too_many_arguments)]
    fn generate(
        sizes: &Bound<'_, PyAny>,
        count: usize,
        interval: Option<f64>,
        rate: Option<f64>,
        seed: u64,
        src: &str,
        dst: &str,
        kind: &str,
        priority: u8,
    ) -> PyResult<Self> {
        let dist = if let Ok(n) = sizes.extract::<u64>() {
            SizeDistribution::fixed(n)
        } else if let Ok((mu, sigma)) = sizes.extract::<(f64, f64)>() {
            SizeDistribution::lognormal(mu, sigma)
        } else {
            let samples: Vec<u64> = sizes.extract()?;
            traffic::fit_empirical(&samples)
        }
        .map_err(value_err)?;
        let arrivals = match (interval, rate) {
            (Some(s), None) => ArrivalModel::fixed_interval(s),
            (None, Some(r)) => ArrivalModel::poisson(r),
            _ => return Err(value_err("give exactly one of interval and rate")),
        }
        .map_err(value_err)?;
        let dst = Destination::parse(dst).map_err(value_err)?;
        let kind: RequestKind = kind.parse().map_err(value_err)?;
        traffic::generate_workload(&dist, arrivals, count, src, &dst, kind, priority, seed)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    fn emit(&self) -> String {
        traffic::emit_workload(&self.inner)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    /// Entries as (t, src, dst, kind, request_size, response_size, priority).
    #[getter]
    fn entries(&self) -> Vec<(f64, String, String, String, u64, u64, u8)> {
        self.inner
            .entries()
            .iter()
            .map(|e| {
                (
                    e.t,
                    e.src.clone(),
                    e.dst.to_string(),
                    e.kind.as_str().to_string(),
                    e.request_size,
                    e.response_size,
                    e.priority,
                )
            })
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner.entries() == other.inner.entries() && self.inner.seed == other.inner.seed
    }
}

/// A simulation in progress. Build one with `Scenario.engine()`.
#[pyclass(module = "labbench", unsendable)]
struct Engine {
    inner: emulation::Engine,
}

#[pymethods]
impl Engine {
    /// Runs until the clock reaches `until`; returns the clock.
    fn run(&mut self, until: f64) -> f64 {
        self.inner.run(until)
    }

    #[getter]
    fn now(&self) -> f64 {
        self.inner.now()
    }

    /// Packet counters: injected, delivered, dropped, in_flight.
    fn counters<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        d.set_item("injected", self.inner.packets_injected())?;
        d.set_item("delivered", self.inner.packets_delivered())?;
        d.set_item("dropped", self.inner.packets_dropped())?;
        d.set_item("in_flight", self.inner.in_flight())?;
        Ok(d)
    }

    /// Flows as (id, status, latency or None, failure reason or None,
    /// delivered bytes).
    fn flows(&self) -> Vec<FlowRow> {
        self.inner
            .flows()
            .into_iter()
            .map(|f| {
                let (status, latency, reason) = match f.status {
                    FlowStatus::Pending => ("pending", None, None),
                    FlowStatus::Requesting => ("requesting", None, None),
                    FlowStatus::Serving => ("serving", None, None),
                    FlowStatus::Responding => ("responding", None, None),
                    FlowStatus::Completed { latency } => ("completed", Some(latency), None),
                    FlowStatus::Failed { reason } => ("failed", None, Some(reason)),
                };
                (f.id, status, latency, reason, f.delivered_bytes)
            })
            .collect()
    }

    /// Samples as (time, object, metric, value).
    fn samples(&self) -> Vec<SampleRow> {
        self.inner
            .stats()
            .samples()
            .iter()
            .map(|s| (s.time, s.object.clone(), s.metric.name(), s.value))
            .collect()
    }

    fn stats_csv(&self) -> PyResult<String> {
        let mut out = Vec::new();
        self.inner
            .stats()
            .write_csv(&mut out)
            .map_err(|e| PyOSError::new_err(e.to_string()))?;
        Ok(String::from_utf8_lossy(&out).into_owned())
    }

    fn events_log(&self) -> PyResult<String> {
        let mut out = Vec::new();
        self.inner
            .stats()
            .write_events(&mut out)
            .map_err(|e| PyOSError::new_err(e.to_string()))?;
        Ok(String::from_utf8_lossy(&out).into_owned())
    }

    /// (passed, verdict line) for the samples recorded so far.
    fn conservation(&self) -> (bool, String) {
        let check = scenario::check_conservation(self.inner.stats().samples());
        (check.passed(), check.to_string())
    }

    /// Trace lines; empty unless the engine was built with `trace=True`.
    fn trace(&self) -> Vec<String> {
        self.inner.trace().iter().map(ToString::to_string).collect()
    }
}

/// Topology, workload and optional control plan, validated together.
#[pyclass(module = "labbench", frozen)]
struct Scenario {
    inner: scenario::Scenario,
}

#[pymethods]
impl Scenario {
    #[new]
    #[pyo3(signature = (topology, workload, control=None))]
    fn new(topology: &str, workload: &str, control: Option<&str>) -> PyResult<Self> {
        scenario::Scenario::from_texts(topology, workload, control)
            .map(|inner| Self { inner })
            .map_err(scenario_err)
    }

    /// An engine with the workload and control plan loaded, not yet run.
    #[pyo3(signature = (*, interval=DEFAULT_SAMPLE_INTERVAL, mtu=emulation::DEFAULT_MTU, trace=false))]
    fn engine(&self, interval: Option<f64>, mtu: u64, trace: bool) -> PyResult<Engine> {
        if mtu == 0 {
            return Err(value_err("mtu must be positive"));
        }
        self.inner
            .engine(EngineConfig {
                mtu,
                sample_interval: interval,
                trace,
                ..EngineConfig::default()
            })
            .map(|inner| Engine { inner })
            .map_err(scenario_err)
    }

    #[pyo3(signature = (until, interval=DEFAULT_SAMPLE_INTERVAL))]
    fn simulate(&self, until: f64, interval: f64) -> PyResult<Engine> {
        self.inner
            .simulate(until, interval)
            .map(|inner| Engine { inner })
            .map_err(scenario_err)
    }
}

/// Runs a scenario from files and writes stats.csv, events.log and
/// summary.txt under `out`. Returns the summary text.
#[pyfunction]
#[pyo3(signature = (topology, workload, out, until, *, control=None, seed=0, interval=DEFAULT_SAMPLE_INTERVAL))]
fn run_scenario(
    topology: PathBuf,
    workload: PathBuf,
    out: PathBuf,
    until: f64,
    control: Option<PathBuf>,
    seed: u64,
    interval: f64,
) -> PyResult<String> {
    scenario::run_scenario(&ScenarioSpec {
        topology_path: topology,
        workload_path: workload,
        control_path: control,
        until,
        seed,
        sample_interval: interval,
        out_dir: out,
    })
    .map(|report| report.summary)
    .map_err(scenario_err)
}

/// Reads stats.csv text back as (time, object, metric, value) rows.
#[pyfunction]
fn read_stats(text: &str) -> PyResult<Vec<SampleRow>> {
    Ok(stats::read_csv(text)
        .map_err(value_err)?
        .into_iter()
        .map(|s| (s.time, s.object, s.metric.name(), s.value))
        .collect())
}

#[pymodule]
fn labbench(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Topology>()?;
    m.add_class::<Workload>()?;
    m.add_class::<Scenario>()?;
    m.add_class::<Engine>()?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(read_stats, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

//! Statistics gathering and storage: an append-only series of samples over a
//! closed metric catalog, an event log, CSV export and summaries.

mod summary;

use std::fmt;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

pub use summary::{summarize, summary_rows, SummaryRow};

/// Bumped whenever a metric is added or renamed.
pub const CATALOG_VERSION: u32 = 2;

pub const DEFAULT_SAMPLE_INTERVAL: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Utilization,
    QueueLen,
    DropsQueueFull,
    DropsNoRoute,
    DropsTtl,
    DropsLinkDown,
    BytesTx,
    CpuUsed,
    CpuAlloc,
    RamUsed,
    RamAlloc,
    ActiveRequests,
    RejectsRam,
    FlowsCompleted,
    FlowsFailed,
    FlowLatency,
    // packet accounting, catalog v2
    PacketsInjected,
    PacketsDelivered,
    InFlight,
}

impl Metric {
    pub const ALL: [Metric; 19] = [
        Metric::Utilization,
        Metric::QueueLen,
        Metric::DropsQueueFull,
        Metric::DropsNoRoute,
        Metric::DropsTtl,
        Metric::DropsLinkDown,
        Metric::BytesTx,
        Metric::CpuUsed,
        Metric::CpuAlloc,
        Metric::RamUsed,
        Metric::RamAlloc,
        Metric::ActiveRequests,
        Metric::RejectsRam,
        Metric::FlowsCompleted,
        Metric::FlowsFailed,
        Metric::FlowLatency,
        Metric::PacketsInjected,
        Metric::PacketsDelivered,
        Metric::InFlight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Utilization => "utilization",
            Metric::QueueLen => "queue_len",
            Metric::DropsQueueFull => "drops_queue_full",
            Metric::DropsNoRoute => "drops_no_route",
            Metric::DropsTtl => "drops_ttl",
            Metric::DropsLinkDown => "drops_link_down",
            Metric::BytesTx => "bytes_tx",
            Metric::CpuUsed => "cpu_used",
            Metric::CpuAlloc => "cpu_alloc",
            Metric::RamUsed => "ram_used",
            Metric::RamAlloc => "ram_alloc",
            Metric::ActiveRequests => "active_requests",
            Metric::RejectsRam => "rejects_ram",
            Metric::FlowsCompleted => "flows_completed",
            Metric::FlowsFailed => "flows_failed",
            Metric::FlowLatency => "flow_latency",
            Metric::PacketsInjected => "packets_injected",
            Metric::PacketsDelivered => "packets_delivered",
            Metric::InFlight => "in_flight",
        }
    }

    /// Counters that only ever grow over a run.
    pub fn is_cumulative(self) -> bool {
        matches!(
            self,
            Metric::DropsQueueFull
                | Metric::DropsNoRoute
                | Metric::DropsTtl
                | Metric::DropsLinkDown
                | Metric::BytesTx
                | Metric::RejectsRam
                | Metric::FlowsCompleted
                | Metric::FlowsFailed
                | Metric::PacketsInjected
                | Metric::PacketsDelivered
        )
    }

    pub fn is_drop(self) -> bool {
        matches!(
            self,
            Metric::DropsQueueFull
                | Metric::DropsNoRoute
                | Metric::DropsTtl
                | Metric::DropsLinkDown
        )
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| StatsError::UnknownMetric(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("no samples match the selection")]
    NoData,
    #[error("stats csv line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub object: String,
    pub metric: Metric,
    pub value: f64,
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq)]
pub enum LogEvent {
    Drop {
        time: f64,
        reason: &'static str,
        at: String,
        packet: u64,
        flow: u64,
    },
    FlowComplete {
        time: f64,
        flow: u64,
        latency: f64,
        bytes: u64,
    },
    FlowFailed {
        time: f64,
        flow: u64,
        reason: &'static str,
        delivered: u64,
    },
    Control {
        time: f64,
        kind: &'static str,
        target: String,
        value: Option<f64>,
    },
    ControlError {
        time: f64,
        kind: &'static str,
        target: String,
        reason: String,
    },
}

impl LogEvent {
    pub fn time(&self) -> f64 {
        match self {
            LogEvent::Drop { time, .. }
            | LogEvent::FlowComplete { time, .. }
            | LogEvent::FlowFailed { time, .. }
            | LogEvent::Control { time, .. }
            | LogEvent::ControlError { time, .. } => *time,
        }
    }
}

impl fmt::Display for LogEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogEvent::Drop {
                time,
                reason,
                at,
                packet,
                flow,
            } => write!(
                f,
                "{time:.6} drop reason={reason} at={at} packet={packet} flow={flow}"
            ),
            LogEvent::FlowComplete {
                time,
                flow,
                latency,
                bytes,
            } => write!(
                f,
                "{time:.6} flow_complete flow={flow} latency={latency:.6} bytes={bytes}"
            ),
            LogEvent::FlowFailed {
                time,
                flow,
                reason,
                delivered,
            } => write!(
                f,
                "{time:.6} flow_failed flow={flow} reason={reason} delivered={delivered}"
            ),
            LogEvent::Control {
                time,
                kind,
                target,
                value,
            } => {
                write!(f, "{time:.6} control_apply {kind} target={target}")?;
                if let Some(v) = value {
                    write!(f, " value={v:.6}")?;
                }
                Ok(())
            }
            LogEvent::ControlError {
                time,
                kind,
                target,
                reason,
            } => write!(
                f,
                "{time:.6} control_error {kind} target={target} reason={reason}"
            ),
        }
    }
}

/// Append-only statistics store.
#[derive(Debug, Clone)]
pub struct StatsStore {
    samples: Vec<Sample>,
    events: Vec<LogEvent>,
    sample_interval: f64,
}

impl Default for StatsStore {
    fn default() -> Self {
        Self::new(DEFAULT_SAMPLE_INTERVAL)
    }
}

impl StatsStore {
    pub fn new(sample_interval: f64) -> Self {
        Self {
            samples: Vec::new(),
            events: Vec::new(),
            sample_interval,
        }
    }

    pub fn sample_interval(&self) -> f64 {
        self.sample_interval
    }

    /// Appends one sample; the metric name must be in the catalog.
    pub fn record(
        &mut self,
        time: f64,
        object: impl Into<String>,
        metric: &str,
        value: f64,
    ) -> Result<(), StatsError> {
        let metric = metric.parse()?;
        self.push(time, object, metric, value);
        Ok(())
    }

    pub fn push(&mut self, time: f64, object: impl Into<String>, metric: Metric, value: f64) {
        self.samples.push(Sample {
            time,
            object: object.into(),
            metric,
            value,
        });
    }

    pub fn log(&mut self, event: LogEvent) {
        self.events.push(event);
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn events(&self) -> &[LogEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `time,object,metric,value` with six fractional digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "time,object,metric,value")?;
        for s in &self.samples {
            writeln!(
                out,
                "{:.6},{},{},{:.6}",
                s.time, s.object, s.metric, s.value
            )?;
        }
        out.flush()
    }

    pub fn write_events<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.events {
            writeln!(out, "{e}")?;
        }
        out.flush()
    }

    pub fn export_csv(&self, path: &Path) -> Result<(), StatsError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        write_atomic(path, &buf)
    }

    pub fn export_events(&self, path: &Path) -> Result<(), StatsError> {
        let mut buf = Vec::new();
        self.write_events(&mut buf).expect("writing to memory");
        write_atomic(path, &buf)
    }
}

/// Reads samples back from the CSV written by [`StatsStore::write_csv`].
pub fn read_csv(text: &str) -> Result<Vec<Sample>, StatsError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if line == 1 && raw == "time,object,metric,value" || raw.is_empty() {
            continue;
        }
        let err = |reason: &str| StatsError::Parse {
            line,
            reason: reason.to_string(),
        };
        // objects may contain commas only in theory; split from both ends
        let (time, rest) = raw
            .split_once(',')
            .ok_or_else(|| err("expected 4 fields"))?;
        let (rest, value) = rest
            .rsplit_once(',')
            .ok_or_else(|| err("expected 4 fields"))?;
        let (object, metric) = rest
            .rsplit_once(',')
            .ok_or_else(|| err("expected 4 fields"))?;
        out.push(Sample {
            time: time.parse().map_err(|_| err("bad time"))?,
            object: object.to_string(),
            metric: metric.parse()?,
            value: value.parse().map_err(|_| err("bad value"))?,
        });
    }
    Ok(out)
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never see a truncated file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), StatsError> {
    let io_err = |source: io::Error| StatsError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

use std::fmt::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{ArrivalModel, SizeDistribution, TrafficError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequestKind {
    File,
    Query,
}

impl RequestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RequestKind::File => "file",
            RequestKind::Query => "query",
        }
    }
}

impl std::str::FromStr for RequestKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "file" => Ok(RequestKind::File),
            "query" => Ok(RequestKind::Query),
            other => Err(format!("unknown kind `{other}`")),
        }
    }
}

/// Where a request goes: a service on a VM, or a bare host acting as a sink.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Destination {
    Service { vm: String, service: String },
    Host(String),
}

impl Destination {
    pub fn parse(token: &str) -> Result<Self, String> {
        match token.split_once(':') {
            Some((vm, service)) if !vm.is_empty() && !service.is_empty() => {
                Ok(Destination::Service {
                    vm: vm.to_string(),
                    service: service.to_string(),
                })
            }
            None if !token.is_empty() => Ok(Destination::Host(token.to_string())),
            _ => Err(format!("`{token}` is not `<vm>:<service>` or a host name")),
        }
    }
}

impl fmt::Display for Destination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Destination::Service { vm, service } => write!(f, "{vm}:{service}"),
            Destination::Host(h) => f.write_str(h),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadEntry {
    pub t: f64,
    pub src: String,
    pub dst: Destination,
    pub kind: RequestKind,
    pub request_size: u64,
    pub response_size: u64,
    pub priority: u8,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Workload {
    entries: Vec<WorkloadEntry>,
    pub seed: u64,
}

impl Workload {
    /// Entries are stably sorted by start time.
    pub fn new(mut entries: Vec<WorkloadEntry>, seed: u64) -> Self {
        entries.sort_by(|a, b| a.t.total_cmp(&b.t));
        Self { entries, seed }
    }

    pub fn entries(&self) -> &[WorkloadEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The generator: `count` requests with sizes drawn from `dist` and start
/// times from `arrivals`. Gaps and sizes come from one ChaCha8 stream seeded
/// with `seed`, so the result is identical across runs and platforms.
#[allow(clippy::too_many_arguments)]
pub fn generate_workload(
    dist: &SizeDistribution,
    arrivals: ArrivalModel,
    count: usize,
    src: &str,
    dst: &Destination,
    kind: RequestKind,
    priority: u8,
    seed: u64,
) -> Result<Workload, TrafficError> {
    if priority > 7 {
        return Err(TrafficError::InvalidParameter(format!(
            "priority {priority} outside 0-7"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaps = match arrivals {
        ArrivalModel::Poisson(rate) => {
            Some(Exp::new(rate).map_err(|e| TrafficError::InvalidParameter(e.to_string()))?)
        }
        ArrivalModel::FixedInterval(_) => None,
    };
    let mut t = 0.0;
    let mut entries = Vec::with_capacity(count);
    for i in 0..count {
        t = match (arrivals, &gaps) {
            (ArrivalModel::FixedInterval(interval), _) => i as f64 * interval,
            (_, Some(exp)) => t + exp.sample(&mut rng),
            _ => unreachable!(),
        };
        let size = dist.sample(&mut rng);
        entries.push(WorkloadEntry {
            t,
            src: src.to_string(),
            dst: dst.clone(),
            kind,
            request_size: size,
            response_size: size,
            priority,
        });
    }
    Ok(Workload { entries, seed })
}

/// Parses the `key=value` line format. A `# seed=<n>` comment restores the
/// generator seed; other comments are ignored.
pub fn parse_workload(text: &str) -> Result<Workload, TrafficError> {
    let mut entries = Vec::new();
    let mut seed = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |reason: String| TrafficError::Syntax { line, reason };
        if let Some(comment) = raw.trim_start().strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("seed=") {
                seed = v
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("bad seed `{v}`")))?;
            }
            continue;
        }
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let mut fields: [Option<&str>; 7] = [None; 7];
        const KEYS: [&str; 7] = ["t", "src", "dst", "kind", "size", "resp", "prio"];
        for token in content.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| err(format!("`{token}` is not key=value")))?;
            let slot = KEYS
                .iter()
                .position(|k| *k == key)
                .ok_or_else(|| err(format!("unknown key `{key}`")))?;
            if fields[slot].replace(value).is_some() {
                return Err(err(format!("`{key}` given twice")));
            }
        }
        let get = |i: usize| fields[i].ok_or_else(|| err(format!("missing `{}`", KEYS[i])));
        let t: f64 = get(0)?
            .parse()
            .map_err(|_| err("t is not a number".into()))?;
        if !t.is_finite() || t < 0.0 {
            return Err(err("t must be finite and >= 0".into()));
        }
        let size = |i: usize| -> Result<u64, TrafficError> {
            match get(i)?.parse::<u64>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(err(format!("{} must be a positive integer", KEYS[i]))),
            }
        };
        let priority = match get(6)?.parse::<u8>() {
            Ok(p) if p <= 7 => p,
            _ => return Err(err("prio must be 0-7".into())),
        };
        entries.push(WorkloadEntry {
            t,
            src: get(1)?.to_string(),
            dst: Destination::parse(get(2)?).map_err(err)?,
            kind: get(3)?.parse().map_err(err)?,
            request_size: size(4)?,
            response_size: size(5)?,
            priority,
        });
    }
    Ok(Workload::new(entries, seed))
}

pub fn emit_workload(workload: &Workload) -> String {
    let mut out = String::new();
    if workload.seed != 0 {
        writeln!(out, "# seed={}", workload.seed).unwrap();
    }
    for e in &workload.entries {
        writeln!(
            out,
            "t={} src={} dst={} kind={} size={} resp={} prio={}",
            e.t,
            e.src,
            e.dst,
            e.kind.as_str(),
            e.request_size,
            e.response_size,
            e.priority
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn service(vm: &str, svc: &str) -> Destination {
        Destination::Service {
            vm: vm.into(),
            service: svc.into(),
        }
    }

    #[test]
    fn fixed_interval_generation() {
        let w = generate_workload(
            &SizeDistribution::fixed(1000).unwrap(),
            ArrivalModel::fixed_interval(1.0).unwrap(),
            3,
            "PC1",
            &service("VM1_file", "files"),
            RequestKind::File,
            0,
            7,
        )
        .unwrap();
        let times: Vec<f64> = w.entries().iter().map(|e| e.t).collect();
        assert_eq!(times, [0.0, 1.0, 2.0]);
        assert!(w.entries().iter().all(|e| e.request_size == 1000));
    }

    #[test]
    fn zero_count() {
        let w = generate_workload(
            &SizeDistribution::fixed(1).unwrap(),
            ArrivalModel::poisson(2.0).unwrap(),
            0,
            "a",
            &Destination::Host("b".into()),
            RequestKind::Query,
            0,
            1,
        )
        .unwrap();
        assert!(w.is_empty());
    }

    #[test]
    fn parse_single_line() {
        let w =
            parse_workload("t=0.0 src=PC1 dst=VM1_db:db kind=query size=2048 resp=65536 prio=0\n")
                .unwrap();
        assert_eq!(
            w.entries(),
            &[WorkloadEntry {
                t: 0.0,
                src: "PC1".into(),
                dst: service("VM1_db", "db"),
                kind: RequestKind::Query,
                request_size: 2048,
                response_size: 65536,
                priority: 0,
            }]
        );
    }

    #[test]
    fn parse_empty_and_sorts() {
        assert!(parse_workload("").unwrap().is_empty());
        let w = parse_workload(
            "t=2 src=a dst=b kind=file size=1 resp=1 prio=0\n\
             # comment\n\
             t=1 src=a dst=c kind=file size=1 resp=1 prio=0\n\
             t=2 src=a dst=d kind=file size=1 resp=1 prio=0\n",
        )
        .unwrap();
        let dsts: Vec<String> = w.entries().iter().map(|e| e.dst.to_string()).collect();
        assert_eq!(dsts, ["c", "b", "d"]);
    }

    #[test]
    fn parse_errors_carry_line() {
        for bad in [
            "t=x src=a dst=b kind=file size=1 resp=1 prio=0",
            "t=1 src=a dst=b kind=file size=0 resp=1 prio=0",
            "t=1 src=a dst=b kind=mail size=1 resp=1 prio=0",
            "t=1 src=a dst=b kind=file size=1 resp=1 prio=8",
            "t=1 src=a dst=b kind=file size=1 resp=1",
            "t=1 src=a dst=b kind=file size=1 resp=1 prio=0 extra=1",
            "t=-1 src=a dst=b kind=file size=1 resp=1 prio=0",
        ] {
            let text = format!("# header\n{bad}\n");
            match parse_workload(&text) {
                Err(TrafficError::Syntax { line, .. }) => assert_eq!(line, 2, "{bad}"),
                other => panic!("{bad}: {other:?}"),
            }
        }
    }

    #[test]
    fn seed_survives_round_trip() {
        let w = generate_workload(
            &SizeDistribution::lognormal(8.0, 1.0).unwrap(),
            ArrivalModel::poisson(3.0).unwrap(),
            20,
            "PC1",
            &service("VM", "db"),
            RequestKind::Query,
            5,
            99,
        )
        .unwrap();
        assert_eq!(parse_workload(&emit_workload(&w)).unwrap(), w);
    }
}

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::net::Ipv4Addr;
use std::sync::Arc;

use thiserror::Error;

use super::event::{EventHandle, EventQueue, PastEventError};
use super::queue::{ClassCounters, Enqueued, PortQueue};
use super::{packetize, serialization_time, Packet, DEFAULT_MTU, DEFAULT_TTL, PRIORITY_CLASSES};
use crate::cloud::{Admission, CloudError, VmState};
use crate::control::{self, ControlAction, ControlError, Target};
use crate::stats::{LogEvent, Metric, StatsStore, DEFAULT_SAMPLE_INTERVAL};
use crate::topology::{
    compute_routes, resolve_next_hop, DeviceKind, LinkDir, NetworkModel, RouteLookup, RoutingTable,
};
use crate::traffic::{Destination, TrafficError, WorkloadEntry};

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub mtu: u64,
    pub ttl: u8,
    /// `None` disables periodic sampling
    pub sample_interval: Option<f64>,
    /// keep a record of every executed event
    pub trace: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            mtu: DEFAULT_MTU,
            ttl: DEFAULT_TTL,
            sample_interval: Some(DEFAULT_SAMPLE_INTERVAL),
            trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DropReason {
    QueueFull,
    NoRoute,
    TtlExpired,
    LinkDown,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::QueueFull => "queue_full",
            DropReason::NoRoute => "no_route",
            DropReason::TtlExpired => "ttl_expired",
            DropReason::LinkDown => "link_down",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("link {link} is down")]
pub struct LinkDownError {
    pub link: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowStatus {
    Pending,
    Requesting,
    Serving,
    Responding,
    Completed { latency: f64 },
    Failed { reason: &'static str },
}

impl FlowStatus {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            FlowStatus::Completed { .. } | FlowStatus::Failed { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowOutcome {
    pub id: u64,
    pub entry: WorkloadEntry,
    pub status: FlowStatus,
    pub delivered_bytes: u64,
}

/// One executed event.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time: f64,
    pub seq: u64,
    pub kind: &'static str,
    pub detail: String,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} {} {} {}",
            self.time, self.seq, self.kind, self.detail
        )
    }
}

#[derive(Debug, Clone)]
struct Transit {
    packet: Packet,
    path: Arc<[LinkDir]>,
    hop: usize,
}

enum Event {
    Inject(u64),
    TxComplete { dir: LinkDir, bytes: u64 },
    Arrive { dir: LinkDir, transit: Box<Transit> },
    Control(Box<ControlAction>),
    Sample(u64),
    ServiceComplete { vm: usize, generation: u64 },
}

enum Site {
    Link(LinkDir),
    Device(usize),
}

#[derive(Debug, Clone)]
struct Flow {
    entry: WorkloadEntry,
    src_ip: Ipv4Addr,
    dst_ip: Ipv4Addr,
    src_device: usize,
    dst_device: usize,
    vm: Option<usize>,
    request_packets: usize,
    request_delivered: usize,
    response_packets: usize,
    response_delivered: usize,
    delivered_bytes: u64,
    status: FlowStatus,
}

/// The simulation engine. Single-threaded: one event loop owns all state.
pub struct Engine {
    model: NetworkModel,
    routes: BTreeMap<String, RoutingTable>,
    config: EngineConfig,
    events: EventQueue<Event>,
    ports: Vec<PortQueue<Transit>>,
    port_labels: Vec<String>,
    device_names: Vec<String>,
    device_kinds: Vec<DeviceKind>,
    device_index: HashMap<String, usize>,
    device_drops: Vec<[u64; 2]>,
    path_cache: HashMap<(usize, Ipv4Addr), Option<Arc<[LinkDir]>>>,
    vms: Vec<VmState>,
    vm_index: HashMap<String, usize>,
    vm_generation: Vec<u64>,
    flows: Vec<Flow>,
    flow_priority: HashMap<u64, u8>,
    traffic_priority: Vec<(Option<String>, Option<String>, u8)>,
    stats: StatsStore,
    next_packet_id: u64,
    packets_injected: u64,
    packets_delivered: u64,
    packets_dropped: u64,
    flows_completed: u64,
    flows_failed: u64,
    last_sample: f64,
    last_busy: Vec<f64>,
    trace: Vec<TraceRecord>,
}

impl Engine {
    pub fn new(model: NetworkModel, config: EngineConfig) -> Self {
        let topology = model.topology();
        let mut ports = Vec::new();
        let mut port_labels = Vec::new();
        for (i, link) in topology.links.iter().enumerate() {
            for reverse in [false, true] {
                ports.push(PortQueue::new(link.queue_capacity));
                port_labels.push(model.link_dir_label(LinkDir { link: i, reverse }));
            }
        }
        let device_names: Vec<String> = topology.devices.iter().map(|d| d.name.clone()).collect();
        let device_kinds = topology.devices.iter().map(|d| d.kind).collect();
        let device_index = device_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let vms: Vec<VmState> = topology
            .vms
            .iter()
            .map(|vm| {
                let disk_rate = topology
                    .device(&vm.host)
                    .and_then(|d| d.resources)
                    .map_or(f64::INFINITY, |r| r.disk_rate);
                VmState::new(vm.clone(), disk_rate)
            })
            .collect();
        let vm_index = vms
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name().to_string(), i))
            .collect();
        let routes = compute_routes(&model);
        let sample_interval = config.sample_interval.unwrap_or(DEFAULT_SAMPLE_INTERVAL);
        let mut engine = Self {
            routes,
            events: EventQueue::default(),
            last_busy: vec![0.0; ports.len()],
            ports,
            port_labels,
            device_drops: vec![[0; 2]; device_names.len()],
            device_names,
            device_kinds,
            device_index,
            path_cache: HashMap::new(),
            vm_generation: vec![0; vms.len()],
            vms,
            vm_index,
            flows: Vec::new(),
            flow_priority: HashMap::new(),
            traffic_priority: Vec::new(),
            stats: StatsStore::new(sample_interval),
            next_packet_id: 0,
            packets_injected: 0,
            packets_delivered: 0,
            packets_dropped: 0,
            flows_completed: 0,
            flows_failed: 0,
            last_sample: 0.0,
            trace: Vec::new(),
            model,
            config,
        };
        if let Some(interval) = engine.config.sample_interval {
            assert!(interval > 0.0, "sample interval must be positive");
            engine
                .events
                .schedule(0.0, Event::Sample(0))
                .expect("clock starts at zero");
        }
        engine
    }

    pub fn now(&self) -> f64 {
        self.events.now()
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn model(&self) -> &NetworkModel {
        &self.model
    }

    pub fn routes(&self) -> &BTreeMap<String, RoutingTable> {
        &self.routes
    }

    pub fn stats(&self) -> &StatsStore {
        &self.stats
    }

    pub fn into_stats(self) -> StatsStore {
        self.stats
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn vm(&self, name: &str) -> Option<&VmState> {
        self.vm_index.get(name).map(|&i| &self.vms[i])
    }

    pub fn find_link(&self, device: &str, interface: &str) -> Option<usize> {
        self.model.find_link(device, interface)
    }

    pub fn packets_injected(&self) -> u64 {
        self.packets_injected
    }

    pub fn packets_delivered(&self) -> u64 {
        self.packets_delivered
    }

    pub fn packets_dropped(&self) -> u64 {
        self.packets_dropped
    }

    /// Packets queued, serializing or propagating on any link.
    pub fn in_flight(&self) -> u64 {
        self.ports.iter().map(|p| p.in_flight as u64).sum()
    }

    pub fn queue_len(&self, dir: LinkDir) -> usize {
        self.ports[dir.index()].len()
    }

    pub fn bytes_tx(&self, dir: LinkDir) -> u64 {
        self.ports[dir.index()].bytes_tx
    }

    pub fn class_counters(&self, dir: LinkDir) -> [ClassCounters; PRIORITY_CLASSES] {
        self.ports[dir.index()].classes
    }

    /// Time integral, up to now, of the packets queued or serializing on `dir`.
    pub fn occupancy_area(&self, dir: LinkDir) -> f64 {
        self.ports[dir.index()].occupancy_area(self.now())
    }

    pub fn flow(&self, id: u64) -> Option<FlowOutcome> {
        let f = self.flows.get(id as usize)?;
        Some(FlowOutcome {
            id,
            entry: f.entry.clone(),
            status: f.status,
            delivered_bytes: f.delivered_bytes,
        })
    }

    pub fn flows(&self) -> Vec<FlowOutcome> {
        (0..self.flows.len() as u64)
            .filter_map(|i| self.flow(i))
            .collect()
    }

    fn schedule(&mut self, time: f64, event: Event) -> Result<EventHandle, PastEventError> {
        self.events.schedule(time, event)
    }

    /// Resolves a workload entry's names without touching any state.
    pub fn check_endpoints(&self, entry: &WorkloadEntry) -> Result<(), TrafficError> {
        self.resolve_endpoints(entry).map(|_| ())
    }

    #[allow(clippy::type_complexity)]
    fn resolve_endpoints(
        &self,
        entry: &WorkloadEntry,
    ) -> Result<(usize, Ipv4Addr, usize, Ipv4Addr, Option<usize>), TrafficError> {
        let topology = self.model.topology();
        let host = |name: &str| {
            topology
                .device(name)
                .filter(|d| d.kind != DeviceKind::Switch)
                .and_then(|d| d.primary_address())
                .map(|ip| (self.device_index[name], ip))
                .ok_or_else(|| TrafficError::UnknownEndpoint(name.to_string()))
        };
        let (src_device, src_ip) = host(&entry.src)?;
        let (dst_device, dst_ip, vm) = match &entry.dst {
            Destination::Host(name) => {
                let (d, ip) = host(name)?;
                (d, ip, None)
            }
            Destination::Service { vm, service } => {
                let index = *self
                    .vm_index
                    .get(vm)
                    .filter(|&&i| self.vms[i].spec().service(service).is_some())
                    .ok_or_else(|| TrafficError::UnknownEndpoint(entry.dst.to_string()))?;
                let spec = self.vms[index].spec();
                (self.device_index[&spec.host], spec.address, Some(index))
            }
        };
        Ok((src_device, src_ip, dst_device, dst_ip, vm))
    }

    /// Registers a request flow and schedules its injection at `entry.t`.
    /// Flow ids count from 0 in registration order.
    pub fn add_flow(&mut self, entry: WorkloadEntry) -> Result<u64, TrafficError> {
        let (src_device, src_ip, dst_device, dst_ip, vm) = self.resolve_endpoints(&entry)?;
        let id = self.flows.len() as u64;
        self.schedule(entry.t, Event::Inject(id))
            .map_err(|e| TrafficError::InvalidParameter(e.to_string()))?;
        self.flows.push(Flow {
            entry,
            src_ip,
            dst_ip,
            src_device,
            dst_device,
            vm,
            request_packets: 0,
            request_delivered: 0,
            response_packets: 0,
            response_delivered: 0,
            delivered_bytes: 0,
            status: FlowStatus::Pending,
        });
        Ok(id)
    }

    pub fn schedule_control(
        &mut self,
        action: ControlAction,
    ) -> Result<EventHandle, PastEventError> {
        self.schedule(action.t, Event::Control(Box::new(action)))
    }

    /// Offers a packet directly to a link direction. It is delivered at the
    /// far end or forwarded on from there like any other packet.
    pub fn enqueue_packet(
        &mut self,
        dir: LinkDir,
        packet: Packet,
    ) -> Result<Enqueued, LinkDownError> {
        self.packets_injected += 1;
        self.next_packet_id = self.next_packet_id.max(packet.id + 1);
        let transit = Transit {
            packet,
            path: Arc::from([dir]),
            hop: 0,
        };
        if !self.model.is_link_up(dir.link) {
            self.enqueue(dir, transit);
            return Err(LinkDownError {
                link: self.port_labels[dir.index()].clone(),
            });
        }
        Ok(self.enqueue(dir, transit))
    }

    /// Executes every event due by `until` and leaves the clock at `until`.
    pub fn run(&mut self, until: f64) -> f64 {
        while let Some((handle, event)) = self.events.pop_until(until) {
            if self.config.trace {
                let (kind, detail) = self.describe(&event);
                self.trace.push(TraceRecord {
                    time: handle.time,
                    seq: handle.seq,
                    kind,
                    detail,
                });
            }
            self.dispatch(event);
        }
        self.events.advance_to(until);
        self.now()
    }

    fn describe(&self, event: &Event) -> (&'static str, String) {
        match event {
            Event::Inject(id) => ("inject", format!("flow={id}")),
            Event::TxComplete { dir, bytes } => (
                "tx_complete",
                format!("{} bytes={bytes}", self.port_labels[dir.index()]),
            ),
            Event::Arrive { dir, transit } => (
                "arrive",
                format!(
                    "{} packet={} flow={}",
                    self.port_labels[dir.index()],
                    transit.packet.id,
                    transit.packet.flow_id
                ),
            ),
            Event::Control(a) => ("control_apply", format!("{} {}", a.kind.as_str(), a.target)),
            Event::Sample(k) => ("sample", format!("k={k}")),
            Event::ServiceComplete { vm, generation } => (
                "service_complete",
                format!("vm={} generation={generation}", self.vms[*vm].name()),
            ),
        }
    }

    fn dispatch(&mut self, event: Event) {
        let now = self.now();
        match event {
            Event::Inject(id) => self.inject_flow(id),
            Event::TxComplete { dir, bytes } => {
                let port = &mut self.ports[dir.index()];
                port.finish_transmission(now, bytes);
                if let Some(next) = port.dequeue(now) {
                    self.begin_transmission(dir, next);
                }
            }
            Event::Arrive { dir, mut transit } => {
                self.ports[dir.index()].arrived();
                transit.hop += 1;
                if let Some(&next) = transit.path.get(transit.hop) {
                    self.enqueue(next, *transit);
                } else {
                    let device = &self.model.link_dir_target(dir).device;
                    let index = self.device_index[device.as_str()];
                    self.forward(index, *transit, false);
                }
            }
            Event::Control(action) => {
                let kind = action.kind.as_str();
                let target = action.target.to_string();
                match control::apply_action(self, &action) {
                    Ok(()) => self.stats.log(LogEvent::Control {
                        time: now,
                        kind,
                        target,
                        value: action.value,
                    }),
                    Err(e) => self.stats.log(LogEvent::ControlError {
                        time: now,
                        kind,
                        target,
                        reason: e.to_string(),
                    }),
                }
            }
            Event::Sample(k) => {
                self.take_sample(now);
                if let Some(interval) = self.config.sample_interval {
                    let next = (k + 1) as f64 * interval;
                    self.schedule(next, Event::Sample(k + 1))
                        .expect("sample times increase");
                }
            }
            Event::ServiceComplete { vm, generation } => {
                if self.vm_generation[vm] != generation {
                    return;
                }
                for done in self.vms[vm].complete_due(now) {
                    self.start_response(done.flow_id, done.response_size);
                }
                self.reschedule_vm(vm);
            }
        }
    }

    fn priority_for(&self, flow: &Flow, id: u64) -> u8 {
        if let Some(&p) = self.flow_priority.get(&id) {
            return p;
        }
        let dst = flow.entry.dst.to_string();
        self.traffic_priority
            .iter()
            .rev()
            .find(|(src, d, _)| {
                src.as_ref().is_none_or(|s| *s == flow.entry.src)
                    && d.as_ref().is_none_or(|d| *d == dst)
            })
            .map_or(flow.entry.priority, |rule| rule.2)
    }

    fn emit(&mut self, id: u64, from: usize, src: Ipv4Addr, dst: Ipv4Addr, sizes: &[u64]) {
        let priority = self.priority_for(&self.flows[id as usize], id);
        let now = self.now();
        for &size in sizes {
            let packet = Packet {
                id: self.next_packet_id,
                flow_id: id,
                src,
                dst,
                size,
                priority,
                ttl: self.config.ttl,
                created_at: now,
            };
            self.next_packet_id += 1;
            self.packets_injected += 1;
            let transit = Transit {
                packet,
                path: Arc::from([]),
                hop: 0,
            };
            self.forward(from, transit, true);
        }
    }

    fn inject_flow(&mut self, id: u64) {
        let flow = &mut self.flows[id as usize];
        let sizes = packetize(flow.entry.request_size, self.config.mtu);
        flow.status = FlowStatus::Requesting;
        flow.request_packets = sizes.len();
        let (from, src, dst) = (flow.src_device, flow.src_ip, flow.dst_ip);
        self.emit(id, from, src, dst, &sizes);
    }

    fn start_response(&mut self, id: u64, size: u64) {
        let flow = &mut self.flows[id as usize];
        if flow.status.is_terminal() {
            return;
        }
        let sizes = packetize(size, self.config.mtu);
        flow.status = FlowStatus::Responding;
        flow.response_packets = sizes.len();
        if sizes.is_empty() {
            self.complete_flow(id);
            return;
        }
        let (from, src, dst) = (flow.dst_device, flow.dst_ip, flow.src_ip);
        self.emit(id, from, src, dst, &sizes);
    }

    fn complete_flow(&mut self, id: u64) {
        let now = self.now();
        let flow = &mut self.flows[id as usize];
        let latency = now - flow.entry.t;
        flow.status = FlowStatus::Completed { latency };
        self.flows_completed += 1;
        self.stats.log(LogEvent::FlowComplete {
            time: now,
            flow: id,
            latency,
            bytes: flow.delivered_bytes,
        });
        self.stats
            .push(now, format!("flow:{id}"), Metric::FlowLatency, latency);
    }

    fn fail_flow(&mut self, id: u64, reason: &'static str) {
        let now = self.now();
        let Some(flow) = self.flows.get_mut(id as usize) else {
            return;
        };
        if flow.status.is_terminal() {
            return;
        }
        flow.status = FlowStatus::Failed { reason };
        self.flows_failed += 1;
        self.stats.log(LogEvent::FlowFailed {
            time: now,
            flow: id,
            reason,
            delivered: flow.delivered_bytes,
        });
    }

    fn drop_packet(&mut self, transit: Transit, reason: DropReason, site: Site) {
        let at = match site {
            Site::Link(dir) => self.port_labels[dir.index()].clone(),
            Site::Device(d) => format!("device:{}", self.device_names[d]),
        };
        self.packets_dropped += 1;
        self.stats.log(LogEvent::Drop {
            time: self.now(),
            reason: reason.as_str(),
            at,
            packet: transit.packet.id,
            flow: transit.packet.flow_id,
        });
        self.fail_flow(transit.packet.flow_id, reason.as_str());
    }

    fn enqueue(&mut self, dir: LinkDir, transit: Transit) -> Enqueued {
        let now = self.now();
        if !self.model.is_link_up(dir.link) {
            self.ports[dir.index()].drops_link_down += 1;
            self.drop_packet(transit, DropReason::LinkDown, Site::Link(dir));
            return Enqueued::Dropped;
        }
        let class = usize::from(transit.packet.priority).min(PRIORITY_CLASSES - 1);
        match self.ports[dir.index()].offer(now, class, transit) {
            (Enqueued::Transmitting, Some(t)) => {
                self.begin_transmission(dir, t);
                Enqueued::Transmitting
            }
            (Enqueued::Dropped, Some(t)) => {
                self.drop_packet(t, DropReason::QueueFull, Site::Link(dir));
                Enqueued::Dropped
            }
            (outcome, _) => outcome,
        }
    }

    fn begin_transmission(&mut self, dir: LinkDir, transit: Transit) {
        let now = self.now();
        let link = &self.model.topology().links[dir.link];
        let done = now + serialization_time(transit.packet.size, link.bandwidth_bps);
        let arrive = done + link.prop_delay;
        let bytes = transit.packet.size;
        self.ports[dir.index()].start_transmission(now);
        self.schedule(done, Event::TxComplete { dir, bytes })
            .expect("transmission ends in the future");
        self.schedule(
            arrive,
            Event::Arrive {
                dir,
                transit: Box::new(transit),
            },
        )
        .expect("arrival is in the future");
    }

    fn path_to(&mut self, device: usize, dst: Ipv4Addr) -> Option<Arc<[LinkDir]>> {
        if let Some(cached) = self.path_cache.get(&(device, dst)) {
            return cached.clone();
        }
        let path = self.compute_path(device, dst);
        self.path_cache.insert((device, dst), path.clone());
        path
    }

    fn compute_path(&self, device: usize, dst: Ipv4Addr) -> Option<Arc<[LinkDir]>> {
        let name = &self.device_names[device];
        let table = self.routes.get(name)?;
        let RouteLookup::Via { egress, next_hop } = resolve_next_hop(table, dst) else {
            return None;
        };
        let from = self.model.attach_id(name, egress)?;
        let to = self.model.owner_of(next_hop.unwrap_or(dst))?;
        if self.model.segment_of(from) != self.model.segment_of(to) {
            return None;
        }
        let path = self.model.l2_path(from, to)?;
        (!path.is_empty()).then(|| Arc::from(path))
    }

    fn forward(&mut self, device: usize, mut transit: Transit, origin: bool) {
        let dst = transit.packet.dst;
        let local = self
            .model
            .owner_of(dst)
            .is_some_and(|a| self.model.attach(a).device == self.device_names[device]);
        if local {
            self.deliver(transit);
            return;
        }
        if !origin {
            if self.device_kinds[device] != DeviceKind::Router {
                self.device_drops[device][0] += 1;
                self.drop_packet(transit, DropReason::NoRoute, Site::Device(device));
                return;
            }
            transit.packet.ttl = transit.packet.ttl.saturating_sub(1);
            if transit.packet.ttl == 0 {
                self.device_drops[device][1] += 1;
                self.drop_packet(transit, DropReason::TtlExpired, Site::Device(device));
                return;
            }
        }
        match self.path_to(device, dst) {
            Some(path) => {
                let first = path[0];
                transit.path = path;
                transit.hop = 0;
                self.enqueue(first, transit);
            }
            None => {
                self.device_drops[device][0] += 1;
                self.drop_packet(transit, DropReason::NoRoute, Site::Device(device));
            }
        }
    }

    fn deliver(&mut self, transit: Transit) {
        self.packets_delivered += 1;
        let id = transit.packet.flow_id;
        let Some(flow) = self.flows.get_mut(id as usize) else {
            return;
        };
        if flow.status.is_terminal() {
            return;
        }
        flow.delivered_bytes += transit.packet.size;
        match flow.status {
            FlowStatus::Requesting => {
                flow.request_delivered += 1;
                if flow.request_delivered < flow.request_packets {
                    return;
                }
                match flow.vm {
                    None => self.complete_flow(id),
                    Some(vm) => self.admit(id, vm),
                }
            }
            FlowStatus::Responding => {
                flow.response_delivered += 1;
                if flow.response_delivered == flow.response_packets {
                    self.complete_flow(id);
                }
            }
            _ => {}
        }
    }

    fn admit(&mut self, id: u64, vm: usize) {
        let now = self.now();
        let flow = &mut self.flows[id as usize];
        let Destination::Service { service, .. } = &flow.entry.dst else {
            unreachable!("flows with a vm target a service");
        };
        let admission = self.vms[vm]
            .admit_request(now, id, service, flow.entry.request_size)
            .expect("service checked when the flow was added");
        match admission {
            Admission::Accepted => {
                flow.status = FlowStatus::Serving;
                self.reschedule_vm(vm);
            }
            Admission::Rejected => self.fail_flow(id, "ram_exhausted"),
        }
    }

    fn reschedule_vm(&mut self, vm: usize) {
        let now = self.now();
        self.vm_generation[vm] += 1;
        let generation = self.vm_generation[vm];
        if let Some(t) = self.vms[vm].service_progress(now) {
            self.schedule(t.max(now), Event::ServiceComplete { vm, generation })
                .expect("completion is not in the past");
        }
    }

    fn recompute_routes(&mut self) {
        self.routes = compute_routes(&self.model);
        self.path_cache.clear();
    }

    /// Brings a link down or up. Going down drops everything queued on it;
    /// packets already serializing or propagating finish normally.
    pub fn set_link_up(&mut self, link: usize, up: bool) {
        if self.model.is_link_up(link) == up {
            return;
        }
        self.model.set_link_up(link, up);
        if !up {
            let now = self.now();
            for reverse in [false, true] {
                let dir = LinkDir { link, reverse };
                let flushed = self.ports[dir.index()].flush(now);
                self.ports[dir.index()].drops_link_down += flushed.len() as u64;
                for t in flushed {
                    self.drop_packet(t, DropReason::LinkDown, Site::Link(dir));
                }
            }
        }
        self.recompute_routes();
    }

    /// Applies from the next dequeue; the route metric follows.
    pub fn set_bandwidth(&mut self, link: usize, bps: f64) {
        self.model.set_bandwidth(link, bps);
        self.recompute_routes();
    }

    pub fn set_delay(&mut self, link: usize, seconds: f64) {
        self.model.set_delay(link, seconds);
    }

    /// Packets beyond the new per-class capacity are tail-dropped.
    pub fn set_queue_capacity(&mut self, link: usize, packets: usize) {
        self.model.set_queue_capacity(link, packets);
        let now = self.now();
        for reverse in [false, true] {
            let dir = LinkDir { link, reverse };
            for (_, t) in self.ports[dir.index()].set_capacity(now, packets) {
                self.drop_packet(t, DropReason::QueueFull, Site::Link(dir));
            }
        }
    }

    /// Priority for packets created from now on.
    pub fn set_priority(&mut self, target: &Target, priority: u8) -> Result<(), ControlError> {
        match target {
            Target::Flow(id) => {
                self.flow_priority.insert(*id, priority);
            }
            Target::Traffic { src, dst } => {
                self.traffic_priority
                    .push((src.clone(), dst.clone(), priority));
            }
            other => return Err(ControlError::UnknownTarget(other.to_string())),
        }
        Ok(())
    }

    pub fn set_vm_cores(&mut self, vm: &str, cores: u32) -> Result<(), CloudError> {
        let i = self.vm_slot(vm)?;
        let now = self.now();
        self.vms[i].set_cores(now, cores)?;
        self.reschedule_vm(i);
        Ok(())
    }

    pub fn set_vm_ram(&mut self, vm: &str, bytes: u64) -> Result<(), CloudError> {
        let i = self.vm_slot(vm)?;
        self.vms[i].set_ram(bytes)
    }

    fn vm_slot(&self, vm: &str) -> Result<usize, CloudError> {
        self.vm_index
            .get(vm)
            .copied()
            .ok_or_else(|| CloudError::InvalidResource {
                vm: vm.to_string(),
                reason: "no such vm".into(),
            })
    }

    fn take_sample(&mut self, now: f64) {
        let window = now - self.last_sample;
        for (i, port) in self.ports.iter().enumerate() {
            let label = &self.port_labels[i];
            let busy = port.busy_time(now);
            let utilization = if window > 0.0 {
                (busy - self.last_busy[i]) / window
            } else {
                0.0
            };
            self.last_busy[i] = busy;
            let dropped: u64 = port.classes.iter().map(|c| c.dropped).sum();
            let s = &mut self.stats;
            s.push(now, label.as_str(), Metric::Utilization, utilization);
            s.push(now, label.as_str(), Metric::BytesTx, port.bytes_tx as f64);
            s.push(now, label.as_str(), Metric::QueueLen, port.len() as f64);
            s.push(now, label.as_str(), Metric::InFlight, port.in_flight as f64);
            s.push(now, label.as_str(), Metric::DropsQueueFull, dropped as f64);
            s.push(
                now,
                label.as_str(),
                Metric::DropsLinkDown,
                port.drops_link_down as f64,
            );
            let queue = format!("queue:{}", &label["link:".len()..]);
            for class in 0..PRIORITY_CLASSES {
                let object = format!("{queue}:p{class}");
                s.push(
                    now,
                    object.as_str(),
                    Metric::QueueLen,
                    port.class_len(class) as f64,
                );
                s.push(
                    now,
                    object,
                    Metric::DropsQueueFull,
                    port.classes[class].dropped as f64,
                );
            }
        }
        for (d, name) in self.device_names.iter().enumerate() {
            if self.device_kinds[d] == DeviceKind::Switch {
                continue;
            }
            let object = format!("device:{name}");
            let [no_route, ttl] = self.device_drops[d];
            self.stats
                .push(now, object.as_str(), Metric::DropsNoRoute, no_route as f64);
            self.stats.push(now, object, Metric::DropsTtl, ttl as f64);
        }
        for vm in &mut self.vms {
            vm.service_progress(now);
            let m = vm.metrics();
            let object = format!("vm:{}", vm.name());
            let s = &mut self.stats;
            s.push(now, object.as_str(), Metric::CpuUsed, m.cpu_used);
            s.push(now, object.as_str(), Metric::CpuAlloc, m.cpu_alloc);
            s.push(now, object.as_str(), Metric::RamUsed, m.ram_used as f64);
            s.push(now, object.as_str(), Metric::RamAlloc, m.ram_alloc as f64);
            s.push(
                now,
                object.as_str(),
                Metric::ActiveRequests,
                m.active_requests as f64,
            );
            s.push(now, object, Metric::RejectsRam, m.rejects_ram as f64);
        }
        let in_flight = self.in_flight() as f64;
        let s = &mut self.stats;
        s.push(
            now,
            "net",
            Metric::PacketsInjected,
            self.packets_injected as f64,
        );
        s.push(
            now,
            "net",
            Metric::PacketsDelivered,
            self.packets_delivered as f64,
        );
        s.push(now, "net", Metric::InFlight, in_flight);
        s.push(
            now,
            "net",
            Metric::FlowsCompleted,
            self.flows_completed as f64,
        );
        s.push(now, "net", Metric::FlowsFailed, self.flows_failed as f64);
        self.last_sample = now;
    }
}

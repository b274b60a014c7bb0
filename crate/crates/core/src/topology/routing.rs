use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::fmt;
use std::net::Ipv4Addr;

use super::{DeviceKind, NetworkModel};

/// An IPv4 network prefix with host bits cleared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Prefix {
    network: u32,
    len: u8,
}

impl Prefix {
    pub fn new(address: Ipv4Addr, len: u8) -> Self {
        let len = len.min(32);
        Self {
            network: u32::from(address) & Self::mask_bits(len),
            len,
        }
    }

    fn mask_bits(len: u8) -> u32 {
        if len == 0 {
            0
        } else {
            u32::MAX << (32 - u32::from(len))
        }
    }

    pub fn mask_of(len: u8) -> Ipv4Addr {
        Ipv4Addr::from(Self::mask_bits(len.min(32)))
    }

    /// Prefix length of a dotted netmask, or `None` if the mask is not contiguous.
    pub fn mask_len(mask: Ipv4Addr) -> Option<u8> {
        let bits = u32::from(mask);
        let len = bits.leading_ones();
        (bits.checked_shl(len).unwrap_or(0) == 0).then_some(len as u8)
    }

    pub fn network(&self) -> Ipv4Addr {
        Ipv4Addr::from(self.network)
    }

    pub fn prefix_len(&self) -> u8 {
        self.len
    }

    pub fn contains(&self, address: Ipv4Addr) -> bool {
        u32::from(address) & Self::mask_bits(self.len) == self.network
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.network(), self.len)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub prefix: Prefix,
    /// `None` for connected routes.
    pub next_hop: Option<Ipv4Addr>,
    pub egress: String,
    pub metric: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoutingTable {
    pub routes: Vec<Route>,
}

impl RoutingTable {
    pub fn new(routes: Vec<Route>) -> Self {
        Self { routes }
    }

    pub fn connected(&self) -> impl Iterator<Item = &Route> {
        self.routes.iter().filter(|r| r.next_hop.is_none())
    }

    pub fn learned(&self) -> impl Iterator<Item = &Route> {
        self.routes.iter().filter(|r| r.next_hop.is_some())
    }
}

impl fmt::Display for RoutingTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.routes {
            match r.next_hop {
                None => writeln!(f, "C  {:<18} is directly connected, {}", r.prefix, r.egress)?,
                Some(nh) => writeln!(
                    f,
                    "S  {:<18} [{}] via {}, {}",
                    r.prefix, r.metric, nh, r.egress
                )?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RouteLookup<'a> {
    Via {
        egress: &'a str,
        next_hop: Option<Ipv4Addr>,
    },
    Unreachable,
}

/// Longest-prefix match; ties go to the lowest metric, then the lowest
/// next hop (connected before any next hop).
pub fn resolve_next_hop(table: &RoutingTable, dst: Ipv4Addr) -> RouteLookup<'_> {
    table
        .routes
        .iter()
        .filter(|r| r.prefix.contains(dst))
        .min_by(|x, y| {
            y.prefix
                .prefix_len()
                .cmp(&x.prefix.prefix_len())
                .then(x.metric.cmp(&y.metric))
                .then(x.next_hop.cmp(&y.next_hop))
        })
        .map_or(RouteLookup::Unreachable, |r| RouteLookup::Via {
            egress: &r.egress,
            next_hop: r.next_hop,
        })
}

/// IOS-like interface cost: 10^8 / bandwidth, rounded, at least 1.
pub fn link_metric(bandwidth_bps: f64) -> u32 {
    let cost = (1e8 / bandwidth_bps).round();
    if cost < 1.0 {
        1
    } else if cost >= f64::from(u32::MAX) {
        u32::MAX
    } else {
        cost as u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct FirstHop {
    neighbor: String,
    next_hop: Ipv4Addr,
    egress: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Label {
    cost: u64,
    first: Option<FirstHop>,
}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .cmp(&other.cost)
            .then_with(|| self.first.cmp(&other.first))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Adjacency {
    neighbor: usize,
    egress: String,
    next_hop: Ipv4Addr,
    cost: u64,
}

/// Link-state route computation over the L3 adjacency graph.
///
/// Two L3 interfaces are adjacent when they share a broadcast segment and an
/// IP prefix. Only routers carry transit traffic; hosts and servers appear
/// as path endpoints. The cost of an adjacency is the [`link_metric`] of the
/// link on the sending interface's physical port. Equal-cost paths resolve to
/// the lowest neighbor device name.
pub fn compute_routes(model: &NetworkModel) -> BTreeMap<String, RoutingTable> {
    let devices = &model.topology().devices;
    let index: HashMap<&str, usize> = devices
        .iter()
        .enumerate()
        .map(|(i, d)| (d.name.as_str(), i))
        .collect();

    let names: Vec<&str> = devices.iter().map(|d| d.name.as_str()).collect();
    let mut adjacency: Vec<Vec<Adjacency>> = (0..devices.len()).map(|_| Vec::new()).collect();
    for segment in model.segments() {
        for &x in &segment.attaches {
            let ax = model.attach(x);
            let Some(ipx) = ax.ip else { continue };
            let Some(link) = model.link_of(&ax.device, &ax.physical) else {
                continue;
            };
            if !model.is_link_up(link) {
                continue;
            }
            let cost = u64::from(link_metric(model.topology().links[link].bandwidth_bps));
            for &y in &segment.attaches {
                let ay = model.attach(y);
                let Some(ipy) = ay.ip else { continue };
                if ax.device == ay.device || ipx.prefix() != ipy.prefix() {
                    continue;
                }
                adjacency[index[ax.device.as_str()]].push(Adjacency {
                    neighbor: index[ay.device.as_str()],
                    egress: ax.interface.clone(),
                    next_hop: ipy.address,
                    cost,
                });
            }
        }
    }

    let mut tables = BTreeMap::new();
    for (src, device) in devices.iter().enumerate() {
        if !device.kind.is_l3() {
            continue;
        }
        let own: Vec<_> = model
            .attaches_of(&device.name)
            .filter_map(|a| {
                model
                    .attach(a)
                    .ip
                    .map(|ip| (ip, model.attach(a).interface.clone()))
            })
            .collect();
        if own.is_empty() {
            continue;
        }
        let labels = shortest_paths(src, &adjacency, &names, |d| {
            devices[d].kind == DeviceKind::Router
        });

        let mut best: BTreeMap<super::Prefix, Route> = BTreeMap::new();
        for (ip, egress) in &own {
            best.entry(ip.prefix()).or_insert(Route {
                prefix: ip.prefix(),
                next_hop: None,
                egress: egress.clone(),
                metric: 0,
            });
        }
        let mut learned: BTreeMap<super::Prefix, Label> = BTreeMap::new();
        for (dst, label) in labels.iter().enumerate() {
            let Some(label) = label else { continue };
            if dst == src {
                continue;
            }
            for a in model.attaches_of(&devices[dst].name) {
                let Some(ip) = model.attach(a).ip else {
                    continue;
                };
                let prefix = ip.prefix();
                if best.contains_key(&prefix) {
                    continue;
                }
                match learned.get(&prefix) {
                    Some(current) if current <= label => {}
                    _ => {
                        learned.insert(prefix, label.clone());
                    }
                }
            }
        }
        for (prefix, label) in learned {
            let first = label.first.expect("learned routes have a first hop");
            best.insert(
                prefix,
                Route {
                    prefix,
                    next_hop: Some(first.next_hop),
                    egress: first.egress,
                    metric: u32::try_from(label.cost).unwrap_or(u32::MAX),
                },
            );
        }
        tables.insert(
            device.name.clone(),
            RoutingTable::new(best.into_values().collect()),
        );
    }
    tables
}

fn shortest_paths(
    src: usize,
    adjacency: &[Vec<Adjacency>],
    names: &[&str],
    is_transit: impl Fn(usize) -> bool,
) -> Vec<Option<Label>> {
    let n = adjacency.len();
    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    labels[src] = Some(Label {
        cost: 0,
        first: None,
    });
    heap.push(Reverse((labels[src].clone().unwrap(), src)));
    while let Some(Reverse((label, u))) = heap.pop() {
        if done[u] || labels[u].as_ref() != Some(&label) {
            continue;
        }
        done[u] = true;
        if u != src && !is_transit(u) {
            continue;
        }
        for adj in &adjacency[u] {
            let v = adj.neighbor;
            if done[v] {
                continue;
            }
            let first = label.first.clone().or_else(|| {
                Some(FirstHop {
                    neighbor: names[v].to_string(),
                    next_hop: adj.next_hop,
                    egress: adj.egress.clone(),
                })
            });
            let candidate = Label {
                cost: label.cost + adj.cost,
                first,
            };
            if labels[v].as_ref().is_none_or(|cur| candidate < *cur) {
                labels[v] = Some(candidate.clone());
                heap.push(Reverse((candidate, v)));
            }
        }
    }
    labels
}

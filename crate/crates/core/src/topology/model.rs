use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::net::Ipv4Addr;

use super::{DeviceKind, Endpoint, InterfaceConfig, IpConfig, PortMode, Prefix, Topology};

/// Index of an L3 termination point (a routed interface or subinterface).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AttachId(pub usize);

/// One direction of a link: `reverse == false` is endpoint a -> endpoint b.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkDir {
    pub link: usize,
    pub reverse: bool,
}

impl LinkDir {
    pub fn index(self) -> usize {
        self.link * 2 + usize::from(self.reverse)
    }

    pub fn from_index(index: usize) -> Self {
        Self {
            link: index / 2,
            reverse: index % 2 == 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Attach {
    pub device: String,
    pub kind: DeviceKind,
    pub interface: String,
    pub physical: String,
    pub ip: Option<IpConfig>,
}

impl Attach {
    pub fn endpoint(&self) -> Endpoint {
        Endpoint::new(&self.device, &self.interface)
    }
}

/// A broadcast domain: L3 terminations that reach each other at layer 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub attaches: Vec<AttachId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationError {
    DuplicateIp {
        address: Ipv4Addr,
        first: String,
        second: String,
    },
    InvalidHostAddress {
        endpoint: Endpoint,
        address: Ipv4Addr,
    },
    NativeVlanConflict {
        link: String,
        reason: String,
    },
    VlanNotCarried {
        endpoint: Endpoint,
        vlan: u16,
        peer: Endpoint,
    },
    UnlinkedInterface {
        endpoint: Endpoint,
    },
    ServerOvercommit {
        server: String,
        resource: &'static str,
        allocated: u64,
        capacity: u64,
    },
    ServerWithoutResources {
        server: String,
        vm: String,
    },
    VmAddressOutsideHost {
        vm: String,
        address: Ipv4Addr,
    },
}

impl ValidationError {
    /// Warnings are reported but do not fail validation.
    pub fn is_warning(&self) -> bool {
        matches!(self, ValidationError::UnlinkedInterface { .. })
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationError::DuplicateIp {
                address,
                first,
                second,
            } => write!(f, "duplicate IP {address} on {first} and {second}"),
            ValidationError::InvalidHostAddress { endpoint, address } => {
                write!(f, "{endpoint}: {address} is a network or broadcast address")
            }
            ValidationError::NativeVlanConflict { link, reason } => {
                write!(f, "native vlan conflict on link {link}: {reason}")
            }
            ValidationError::VlanNotCarried {
                endpoint,
                vlan,
                peer,
            } => write!(f, "{endpoint}: vlan {vlan} is not carried by peer {peer}"),
            ValidationError::UnlinkedInterface { endpoint } => {
                write!(f, "{endpoint} is in no link")
            }
            ValidationError::ServerOvercommit {
                server,
                resource,
                allocated,
                capacity,
            } => write!(
                f,
                "server {server}: vms allocate {allocated} {resource}, capacity is {capacity}"
            ),
            ValidationError::ServerWithoutResources { server, vm } => {
                write!(
                    f,
                    "vm {vm} is placed on {server}, which declares no cores/ram/disk"
                )
            }
            ValidationError::VmAddressOutsideHost { vm, address } => write!(
                f,
                "vm {vm}: {address} is not inside a subnet of its host's interfaces"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Channel {
    Untagged,
    Tagged(u16),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Node {
    Attach(AttachId),
    SwitchVlan(usize, u16),
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    to: usize,
    dir: LinkDir,
}

/// A validated network: devices, links with their runtime parameters, the
/// L2 broadcast structure and the address plan.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    topology: Topology,
    pub vlan_domains: BTreeMap<u16, BTreeSet<Endpoint>>,
    pub subnets: BTreeMap<Prefix, BTreeSet<(Endpoint, Ipv4Addr)>>,
    pub warnings: Vec<ValidationError>,
    link_up: Vec<bool>,
    attaches: Vec<Attach>,
    attach_index: HashMap<(String, String), AttachId>,
    owners: HashMap<Ipv4Addr, AttachId>,
    link_index: HashMap<(String, String), usize>,
    nodes: Vec<Node>,
    node_index: HashMap<Node, usize>,
    adjacency: Vec<Vec<Edge>>,
    segment_of: Vec<usize>,
    segments: Vec<Segment>,
}

/// Builds and validates the network model.
///
/// Broadcast domains come from a flood fill over access ports, trunks (within
/// their allowed lists) and dot1q subinterfaces whose ids match. A native
/// subinterface also terminates untagged frames.
pub fn build_network(topology: &Topology) -> Result<NetworkModel, Vec<ValidationError>> {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();

    let mut attaches = Vec::new();
    let mut attach_index = HashMap::new();
    for dev in &topology.devices {
        if !dev.kind.is_l3() {
            continue;
        }
        for iface in &dev.interfaces {
            let terminates = iface.is_subinterface() || iface.ip.is_some();
            if !terminates {
                continue;
            }
            let id = AttachId(attaches.len());
            attach_index.insert((dev.name.clone(), iface.name.clone()), id);
            attaches.push(Attach {
                device: dev.name.clone(),
                kind: dev.kind,
                interface: iface.name.clone(),
                physical: iface.parent_name().to_string(),
                ip: iface.ip,
            });
        }
    }

    let mut link_index = HashMap::new();
    for (i, link) in topology.links.iter().enumerate() {
        for ep in [&link.a, &link.b] {
            link_index.insert((ep.device.clone(), ep.interface.clone()), i);
        }
    }

    // address plan
    let mut subnets: BTreeMap<Prefix, BTreeSet<(Endpoint, Ipv4Addr)>> = BTreeMap::new();
    let mut seen: BTreeMap<Ipv4Addr, String> = BTreeMap::new();
    let mut owners = HashMap::new();
    for dev in &topology.devices {
        for iface in &dev.interfaces {
            let Some(ip) = iface.ip else { continue };
            let ep = Endpoint::new(&dev.name, &iface.name);
            if ip.prefix_len <= 30
                && (ip.address == ip.prefix().network() || ip.address == broadcast(ip))
            {
                errors.push(ValidationError::InvalidHostAddress {
                    endpoint: ep.clone(),
                    address: ip.address,
                });
            }
            if let Some(first) = seen.get(&ip.address) {
                errors.push(ValidationError::DuplicateIp {
                    address: ip.address,
                    first: first.clone(),
                    second: ep.to_string(),
                });
            } else {
                seen.insert(ip.address, ep.to_string());
            }
            if let Some(&id) = attach_index.get(&(dev.name.clone(), iface.name.clone())) {
                owners.entry(ip.address).or_insert(id);
            }
            subnets
                .entry(ip.prefix())
                .or_default()
                .insert((ep, ip.address));
        }
    }

    // vm placement
    let mut committed: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for vm in &topology.vms {
        let Some(host) = topology.device(&vm.host) else {
            continue;
        };
        if host.resources.is_none() {
            errors.push(ValidationError::ServerWithoutResources {
                server: host.name.clone(),
                vm: vm.name.clone(),
            });
            continue;
        }
        let entry = committed.entry(host.name.as_str()).or_default();
        entry.0 += u64::from(vm.alloc_cores);
        entry.1 += vm.alloc_ram;
        let label = format!("vm:{}", vm.name);
        if let Some(first) = seen.get(&vm.address) {
            errors.push(ValidationError::DuplicateIp {
                address: vm.address,
                first: first.clone(),
                second: label,
            });
            continue;
        }
        seen.insert(vm.address, label);
        let home = attaches.iter().position(|a: &Attach| {
            a.device == vm.host && a.ip.is_some_and(|ip| ip.prefix().contains(vm.address))
        });
        match home {
            Some(idx) => {
                owners.insert(vm.address, AttachId(idx));
            }
            None => errors.push(ValidationError::VmAddressOutsideHost {
                vm: vm.name.clone(),
                address: vm.address,
            }),
        }
    }
    for (server, (cores, ram)) in committed {
        let res = topology
            .device(server)
            .and_then(|d| d.resources)
            .expect("checked above");
        if cores > u64::from(res.cores) {
            errors.push(ValidationError::ServerOvercommit {
                server: server.to_string(),
                resource: "cores",
                allocated: cores,
                capacity: u64::from(res.cores),
            });
        }
        if ram > res.ram {
            errors.push(ValidationError::ServerOvercommit {
                server: server.to_string(),
                resource: "bytes of ram",
                allocated: ram,
                capacity: res.ram,
            });
        }
    }

    // layer 2 structure and per-link checks
    for dev in &topology.devices {
        for iface in &dev.interfaces {
            if iface.is_subinterface() || (dev.kind == DeviceKind::Switch && iface.is_management())
            {
                continue;
            }
            if !link_index.contains_key(&(dev.name.clone(), iface.name.clone())) {
                warnings.push(ValidationError::UnlinkedInterface {
                    endpoint: Endpoint::new(&dev.name, &iface.name),
                });
            }
        }
    }

    let mut model = NetworkModel {
        topology: topology.clone(),
        vlan_domains: BTreeMap::new(),
        subnets,
        warnings: Vec::new(),
        link_up: vec![true; topology.links.len()],
        attaches,
        attach_index,
        owners,
        link_index,
        nodes: Vec::new(),
        node_index: HashMap::new(),
        adjacency: Vec::new(),
        segment_of: Vec::new(),
        segments: Vec::new(),
    };

    for link in &topology.links {
        let ca = model.channels(&link.a);
        let cb = model.channels(&link.b);
        let label = format!("{} {}", link.a, link.b);
        let native = |chans: &[(Channel, Node)], ep: &Endpoint| -> Vec<String> {
            chans
                .iter()
                .filter(|(c, n)| *c == Channel::Untagged && matches!(n, Node::Attach(_)))
                .map(|(_, n)| match n {
                    Node::Attach(id) => model.attaches[id.0].interface.clone(),
                    Node::SwitchVlan(..) => unreachable!(),
                })
                .map(|name| format!("{}:{}", ep.device, name))
                .collect()
        };
        for (chans, ep) in [(&ca, &link.a), (&cb, &link.b)] {
            let untagged = native(chans, ep);
            if untagged.len() > 1 {
                errors.push(ValidationError::NativeVlanConflict {
                    link: label.clone(),
                    reason: format!("{} all claim untagged frames", untagged.join(", ")),
                });
            }
        }
        let native_vlan = |ep: &Endpoint| {
            iface_family(topology, ep)
                .find_map(|i| i.encapsulation.filter(|e| e.native).map(|e| e.vlan))
        };
        if let (Some(va), Some(vb)) = (native_vlan(&link.a), native_vlan(&link.b)) {
            if va != vb {
                errors.push(ValidationError::NativeVlanConflict {
                    link: label.clone(),
                    reason: format!("native vlan {va} on {} but {vb} on {}", link.a, link.b),
                });
            }
        }
        // every dot1q subinterface must find its vlan on the far side
        for (near, far, far_chans) in [(&link.a, &link.b, &cb), (&link.b, &link.a, &ca)] {
            for iface in iface_family(topology, near) {
                let Some(enc) = iface.encapsulation else {
                    continue;
                };
                let carried = far_chans.iter().any(|(c, _)| {
                    *c == Channel::Tagged(enc.vlan) || (enc.native && *c == Channel::Untagged)
                });
                if !carried {
                    errors.push(ValidationError::VlanNotCarried {
                        endpoint: Endpoint::new(&near.device, &iface.name),
                        vlan: enc.vlan,
                        peer: far.clone(),
                    });
                }
            }
        }
    }

    model.vlan_domains = vlan_domains(topology, &model.link_index);
    model.rebuild_l2();

    errors.sort_by_key(|e| e.to_string());
    errors.dedup();
    if errors.is_empty() {
        model.warnings = warnings;
        Ok(model)
    } else {
        errors.extend(warnings);
        Err(errors)
    }
}

fn broadcast(ip: IpConfig) -> Ipv4Addr {
    let mask = u32::from(ip.mask());
    Ipv4Addr::from(u32::from(ip.prefix().network()) | !mask)
}

/// The physical interface named by `ep` and its subinterfaces.
fn iface_family<'a>(
    topology: &'a Topology,
    ep: &'a Endpoint,
) -> impl Iterator<Item = &'a InterfaceConfig> + 'a {
    topology
        .device(&ep.device)
        .into_iter()
        .flat_map(|d| d.interfaces.iter())
        .filter(move |i| i.parent_name() == ep.interface)
}

fn vlan_domains(
    topology: &Topology,
    link_index: &HashMap<(String, String), usize>,
) -> BTreeMap<u16, BTreeSet<Endpoint>> {
    let mut out: BTreeMap<u16, BTreeSet<Endpoint>> = BTreeMap::new();
    for dev in &topology.devices {
        for iface in &dev.interfaces {
            let ep = Endpoint::new(&dev.name, &iface.name);
            if let Some(enc) = iface.encapsulation {
                out.entry(enc.vlan).or_default().insert(ep);
                continue;
            }
            if dev.kind != DeviceKind::Switch || iface.is_management() {
                continue;
            }
            match iface.mode {
                PortMode::Trunk => {
                    for &v in &iface.allowed_vlans {
                        out.entry(v).or_default().insert(ep.clone());
                    }
                }
                PortMode::Access => {
                    let linked = link_index.contains_key(&(dev.name.clone(), iface.name.clone()));
                    if iface.access_vlan.is_some() || linked {
                        out.entry(iface.access_vlan.unwrap_or(1))
                            .or_default()
                            .insert(ep);
                    }
                }
                PortMode::Routed => {}
            }
        }
    }
    out
}

impl NetworkModel {
    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn attach(&self, id: AttachId) -> &Attach {
        &self.attaches[id.0]
    }

    pub fn attach_count(&self) -> usize {
        self.attaches.len()
    }

    pub fn attach_id(&self, device: &str, interface: &str) -> Option<AttachId> {
        self.attach_index
            .get(&(device.to_string(), interface.to_string()))
            .copied()
    }

    pub fn attaches_of<'a>(&'a self, device: &'a str) -> impl Iterator<Item = AttachId> + 'a {
        self.attaches
            .iter()
            .enumerate()
            .filter(move |(_, a)| a.device == device)
            .map(|(i, _)| AttachId(i))
    }

    /// The L3 termination that answers for `address` (VM addresses resolve to
    /// their host's interface).
    pub fn owner_of(&self, address: Ipv4Addr) -> Option<AttachId> {
        self.owners.get(&address).copied()
    }

    /// Link attached to a physical `device:interface`.
    pub fn link_of(&self, device: &str, interface: &str) -> Option<usize> {
        self.link_index
            .get(&(device.to_string(), interface.to_string()))
            .copied()
    }

    /// Resolves a `device:iface` target (IOS short names accepted) to a link.
    pub fn find_link(&self, device: &str, interface: &str) -> Option<usize> {
        self.topology
            .links
            .iter()
            .position(|l| l.a.matches(device, interface) || l.b.matches(device, interface))
    }

    pub fn is_link_up(&self, link: usize) -> bool {
        self.link_up[link]
    }

    /// Brings a link up or down and recomputes the broadcast structure.
    pub fn set_link_up(&mut self, link: usize, up: bool) {
        if self.link_up[link] != up {
            self.link_up[link] = up;
            self.rebuild_l2();
        }
    }

    pub fn set_bandwidth(&mut self, link: usize, bps: f64) {
        self.topology.links[link].bandwidth_bps = bps;
    }

    pub fn set_delay(&mut self, link: usize, seconds: f64) {
        self.topology.links[link].prop_delay = seconds;
    }

    pub fn set_queue_capacity(&mut self, link: usize, packets: usize) {
        self.topology.links[link].queue_capacity = packets;
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment_of(&self, id: AttachId) -> usize {
        self.segment_of[self.node_index[&Node::Attach(id)]]
    }

    /// Name of the device at the receiving end of a link direction.
    pub fn link_dir_target(&self, dir: LinkDir) -> &Endpoint {
        let link = &self.topology.links[dir.link];
        if dir.reverse {
            &link.a
        } else {
            &link.b
        }
    }

    pub fn link_dir_source(&self, dir: LinkDir) -> &Endpoint {
        let link = &self.topology.links[dir.link];
        if dir.reverse {
            &link.b
        } else {
            &link.a
        }
    }

    /// `link:R1:Fa0/1->SW1:Fa0/1`
    pub fn link_dir_label(&self, dir: LinkDir) -> String {
        format!(
            "link:{}->{}",
            self.link_dir_source(dir).label(),
            self.link_dir_target(dir).label()
        )
    }

    /// Shortest layer-2 path between two terminations through switches only,
    /// over links that are up. `Some(vec![])` when `from == to`.
    pub fn l2_path(&self, from: AttachId, to: AttachId) -> Option<Vec<LinkDir>> {
        let start = self.node_index[&Node::Attach(from)];
        let goal = self.node_index[&Node::Attach(to)];
        if start == goal {
            return Some(Vec::new());
        }
        let mut prev: Vec<Option<(usize, LinkDir)>> = vec![None; self.nodes.len()];
        let mut visited = vec![false; self.nodes.len()];
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for edge in &self.adjacency[u] {
                let v = edge.to;
                if visited[v] {
                    continue;
                }
                // other L3 terminations do not bridge
                if matches!(self.nodes[v], Node::Attach(_)) && v != goal {
                    continue;
                }
                visited[v] = true;
                prev[v] = Some((u, edge.dir));
                if v == goal {
                    let mut path = Vec::new();
                    let mut at = goal;
                    while let Some((p, dir)) = prev[at] {
                        path.push(dir);
                        at = p;
                    }
                    path.reverse();
                    return Some(path);
                }
                queue.push_back(v);
            }
        }
        None
    }

    fn channels(&self, ep: &Endpoint) -> Vec<(Channel, Node)> {
        let Some(dev_idx) = self
            .topology
            .devices
            .iter()
            .position(|d| d.name == ep.device)
        else {
            return Vec::new();
        };
        let dev = &self.topology.devices[dev_idx];
        let mut out = Vec::new();
        if dev.kind == DeviceKind::Switch {
            let Some(iface) = dev.interfaces.iter().find(|i| i.name == ep.interface) else {
                return out;
            };
            match iface.mode {
                PortMode::Access => out.push((
                    Channel::Untagged,
                    Node::SwitchVlan(dev_idx, iface.access_vlan.unwrap_or(1)),
                )),
                PortMode::Trunk => {
                    for &v in &iface.allowed_vlans {
                        out.push((Channel::Tagged(v), Node::SwitchVlan(dev_idx, v)));
                    }
                    if iface.allowed_vlans.contains(&1) {
                        out.push((Channel::Untagged, Node::SwitchVlan(dev_idx, 1)));
                    }
                }
                PortMode::Routed => {}
            }
            return out;
        }
        for iface in dev
            .interfaces
            .iter()
            .filter(|i| i.parent_name() == ep.interface)
        {
            let Some(id) = self.attach_id(&dev.name, &iface.name) else {
                continue;
            };
            match iface.encapsulation {
                Some(enc) => {
                    out.push((Channel::Tagged(enc.vlan), Node::Attach(id)));
                    if enc.native {
                        out.push((Channel::Untagged, Node::Attach(id)));
                    }
                }
                None => out.push((Channel::Untagged, Node::Attach(id))),
            }
        }
        out
    }

    fn rebuild_l2(&mut self) {
        let mut nodes = Vec::new();
        let mut node_index = HashMap::new();
        let mut intern = |n: Node, nodes: &mut Vec<Node>| -> usize {
            *node_index.entry(n).or_insert_with(|| {
                nodes.push(n);
                nodes.len() - 1
            })
        };
        for i in 0..self.attaches.len() {
            intern(Node::Attach(AttachId(i)), &mut nodes);
        }
        let mut edges = Vec::new();
        for (i, link) in self.topology.links.iter().enumerate() {
            let ca = self.channels(&link.a);
            let cb = self.channels(&link.b);
            for &(_, n) in &ca {
                intern(n, &mut nodes);
            }
            for &(_, n) in &cb {
                intern(n, &mut nodes);
            }
            if !self.link_up[i] {
                continue;
            }
            for &(chan_a, node_a) in &ca {
                for &(chan_b, node_b) in &cb {
                    if chan_a == chan_b {
                        edges.push((node_a, node_b, i));
                    }
                }
            }
        }
        let mut adjacency: Vec<Vec<Edge>> = vec![Vec::new(); nodes.len()];
        let mut parent: Vec<usize> = (0..nodes.len()).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut root = x;
            while parent[root] != root {
                root = parent[root];
            }
            let mut at = x;
            while parent[at] != root {
                let next = parent[at];
                parent[at] = root;
                at = next;
            }
            root
        }
        for (a, b, link) in edges {
            let (ia, ib) = (node_index[&a], node_index[&b]);
            let fwd = LinkDir {
                link,
                reverse: false,
            };
            let rev = LinkDir {
                link,
                reverse: true,
            };
            if !adjacency[ia].iter().any(|e| e.to == ib && e.dir == fwd) {
                adjacency[ia].push(Edge { to: ib, dir: fwd });
                adjacency[ib].push(Edge { to: ia, dir: rev });
            }
            let (ra, rb) = (find(&mut parent, ia), find(&mut parent, ib));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut segment_ids: HashMap<usize, usize> = HashMap::new();
        let mut segments: Vec<Segment> = Vec::new();
        let mut segment_of = vec![0; nodes.len()];
        for i in 0..nodes.len() {
            let root = find(&mut parent, i);
            let next = segment_ids.len();
            let seg = *segment_ids.entry(root).or_insert(next);
            if seg == segments.len() {
                segments.push(Segment {
                    attaches: Vec::new(),
                });
            }
            segment_of[i] = seg;
            if let Node::Attach(id) = nodes[i] {
                segments[seg].attaches.push(id);
            }
        }
        self.nodes = nodes;
        self.node_index = node_index;
        self.adjacency = adjacency;
        self.segment_of = segment_of;
        self.segments = segments;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::parse_topology;

    const ROUTER_ON_A_STICK: &str = "\
device R1 router
 interface FastEthernet0/1.100
  encapsulation dot1q 100 native
  ip address 192.168.100.1 255.255.255.0
 interface FastEthernet0/1.101
  encapsulation dot1q 101
  ip address 192.168.101.1 255.255.255.0
 interface FastEthernet0/1.102
  encapsulation dot1q 102
  ip address 192.168.102.1 255.255.255.0
device SW1 switch
 interface FastEthernet0/1
  switchport trunk allowed vlan 100-102
  switchport mode trunk
link R1:FastEthernet0/1 SW1:FastEthernet0/1 bandwidth 100mbps delay 0ms queue 64
";

    #[test]
    fn vlan_domains_and_subnets() {
        let model = build_network(&parse_topology(ROUTER_ON_A_STICK).unwrap()).unwrap();
        assert_eq!(
            model.vlan_domains.keys().copied().collect::<Vec<_>>(),
            [100, 101, 102]
        );
        for v in [100u16, 101, 102] {
            let members = &model.vlan_domains[&v];
            assert!(members.contains(&Endpoint::new("SW1", "FastEthernet0/1")));
            assert!(members.contains(&Endpoint::new("R1", format!("FastEthernet0/1.{v}"))));
        }
        let subnets: Vec<String> = model.subnets.keys().map(|p| p.to_string()).collect();
        assert_eq!(
            subnets,
            ["192.168.100.0/24", "192.168.101.0/24", "192.168.102.0/24"]
        );
    }

    #[test]
    fn single_host_no_links() {
        let t =
            parse_topology("device PC host\n interface e0\n  ip address 10.0.0.5 255.255.255.0\n")
                .unwrap();
        let model = build_network(&t).unwrap();
        assert_eq!(model.subnets.len(), 1);
        assert!(model.vlan_domains.is_empty());
        assert!(matches!(
            model.warnings[..],
            [ValidationError::UnlinkedInterface { .. }]
        ));
    }

    #[test]
    fn duplicate_ip_names_both_interfaces() {
        let text = format!(
            "{ROUTER_ON_A_STICK}device PC host\n interface e0\n  ip address 192.168.100.1 255.255.255.0\n"
        );
        let errors = build_network(&parse_topology(&text).unwrap()).unwrap_err();
        let dup = errors
            .iter()
            .find(|e| matches!(e, ValidationError::DuplicateIp { .. }))
            .expect("duplicate reported");
        let msg = dup.to_string();
        assert!(
            msg.contains("R1:FastEthernet0/1.100") && msg.contains("PC:e0"),
            "{msg}"
        );
    }

    #[test]
    fn vlan_not_allowed_on_trunk() {
        let text = ROUTER_ON_A_STICK.replace("100-102", "100,101");
        let errors = build_network(&parse_topology(&text).unwrap()).unwrap_err();
        assert!(errors
            .iter()
            .any(|e| matches!(e, ValidationError::VlanNotCarried { vlan: 102, .. })));
    }

    #[test]
    fn native_conflict_between_routers() {
        let text = "\
device A router
 interface e0.10
  encapsulation dot1q 10 native
  ip address 10.0.10.1 255.255.255.0
 interface e0.20
  encapsulation dot1q 20
  ip address 10.0.20.1 255.255.255.0
device B router
 interface e0.10
  encapsulation dot1q 10
  ip address 10.0.10.2 255.255.255.0
 interface e0.20
  encapsulation dot1q 20 native
  ip address 10.0.20.2 255.255.255.0
link A:e0 B:e0 bandwidth 1mbps delay 0s queue 4
";
        let errors = build_network(&parse_topology(text).unwrap()).unwrap_err();
        assert!(errors
            .iter()
            .any(|e| matches!(e, ValidationError::NativeVlanConflict { .. })));
    }

    #[test]
    fn vm_overcommit_rejected() {
        let text = "\
device S server
 cores 2
 ram 4GiB
 disk 1000000
 interface eth0
  ip address 10.0.0.2 255.255.255.0
vm A host S cores 2 ram 2GiB ip 10.0.0.10
vm B host S cores 1 ram 1GiB ip 10.0.0.11
";
        let errors = build_network(&parse_topology(text).unwrap()).unwrap_err();
        assert!(errors.iter().any(|e| matches!(
            e,
            ValidationError::ServerOvercommit {
                resource: "cores",
                ..
            }
        )));
    }

    #[test]
    fn l2_path_through_switch() {
        let text = format!(
            "{ROUTER_ON_A_STICK}\
device PC host
 interface e0
  ip address 192.168.100.10 255.255.255.0
link PC:e0 SW1:FastEthernet0/2 bandwidth 100mbps delay 0ms queue 64
"
        )
        .replace(
            "  switchport mode trunk\n",
            "  switchport mode trunk\n interface FastEthernet0/2\n  switchport access vlan 100\n",
        );
        let model = build_network(&parse_topology(&text).unwrap()).unwrap();
        let pc = model.attach_id("PC", "e0").unwrap();
        let r1 = model.attach_id("R1", "FastEthernet0/1.100").unwrap();
        let r1b = model.attach_id("R1", "FastEthernet0/1.101").unwrap();
        let path = model.l2_path(pc, r1).unwrap();
        assert_eq!(path.len(), 2);
        assert_eq!(model.link_dir_label(path[0]), "link:PC:e0->SW1:Fa0/2");
        assert_eq!(model.link_dir_label(path[1]), "link:SW1:Fa0/1->R1:Fa0/1");
        assert!(model.l2_path(pc, r1b).is_none());
        assert_eq!(model.segment_of(pc), model.segment_of(r1));
        assert_ne!(model.segment_of(pc), model.segment_of(r1b));
    }
}

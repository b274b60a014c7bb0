//! Network description: the IOS-like configuration dialect, the validated
//! L2/L3 model built from it, and link-state route computation.

mod emit;
mod model;
mod parse;
mod routing;

use std::collections::BTreeSet;
use std::fmt;
use std::net::Ipv4Addr;

use thiserror::Error;

pub use emit::emit_topology;
pub use model::{build_network, Attach, AttachId, LinkDir, NetworkModel, Segment, ValidationError};
pub use parse::parse_topology;
pub use routing::{
    compute_routes, link_metric, resolve_next_hop, Prefix, Route, RouteLookup, RoutingTable,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DeviceKind {
    Router,
    Switch,
    Server,
    Host,
}

impl DeviceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DeviceKind::Router => "router",
            DeviceKind::Switch => "switch",
            DeviceKind::Server => "server",
            DeviceKind::Host => "host",
        }
    }

    /// Devices that own IP endpoints and take part in route computation.
    pub fn is_l3(self) -> bool {
        !matches!(self, DeviceKind::Switch)
    }
}

impl fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PortMode {
    Routed,
    Access,
    Trunk,
}

/// `encapsulation dot1q <id> [native]`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dot1q {
    pub vlan: u16,
    pub native: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IpConfig {
    pub address: Ipv4Addr,
    pub prefix_len: u8,
}

impl IpConfig {
    pub fn prefix(&self) -> Prefix {
        Prefix::new(self.address, self.prefix_len)
    }

    pub fn mask(&self) -> Ipv4Addr {
        Prefix::mask_of(self.prefix_len)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterfaceConfig {
    pub name: String,
    pub mode: PortMode,
    pub encapsulation: Option<Dot1q>,
    pub ip: Option<IpConfig>,
    pub allowed_vlans: BTreeSet<u16>,
    pub access_vlan: Option<u16>,
}

impl InterfaceConfig {
    pub fn new(name: impl Into<String>, mode: PortMode) -> Self {
        Self {
            name: name.into(),
            mode,
            encapsulation: None,
            ip: None,
            allowed_vlans: BTreeSet::new(),
            access_vlan: None,
        }
    }

    pub fn is_subinterface(&self) -> bool {
        self.name.contains('.')
    }

    /// Name of the physical interface; the interface itself when not a subinterface.
    pub fn parent_name(&self) -> &str {
        self.name.split('.').next().unwrap_or(&self.name)
    }

    /// An IP address on a switch's `Vlan<n>` interface: management only.
    pub fn is_management(&self) -> bool {
        self.name.to_ascii_lowercase().starts_with("vlan")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServerResources {
    pub cores: u32,
    pub ram: u64,
    /// bytes per second
    pub disk_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceConfig {
    pub name: String,
    pub kind: DeviceKind,
    pub interfaces: Vec<InterfaceConfig>,
    pub resources: Option<ServerResources>,
}

impl DeviceConfig {
    pub fn new(name: impl Into<String>, kind: DeviceKind) -> Self {
        Self {
            name: name.into(),
            kind,
            interfaces: Vec::new(),
            resources: None,
        }
    }

    pub fn interface(&self, name: &str) -> Option<&InterfaceConfig> {
        self.interfaces.iter().find(|i| i.name == name).or_else(|| {
            let short = short_interface_name(name);
            self.interfaces
                .iter()
                .find(|i| short_interface_name(&i.name) == short)
        })
    }

    /// First configured address in declaration order; the device's identity
    /// as a traffic source.
    pub fn primary_address(&self) -> Option<Ipv4Addr> {
        self.interfaces
            .iter()
            .filter(|i| !i.is_management() || self.kind != DeviceKind::Switch)
            .find_map(|i| i.ip.map(|ip| ip.address))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Endpoint {
    pub device: String,
    pub interface: String,
}

impl Endpoint {
    pub fn new(device: impl Into<String>, interface: impl Into<String>) -> Self {
        Self {
            device: device.into(),
            interface: interface.into(),
        }
    }

    /// `R1:Fa0/1` style label used in object ids.
    pub fn label(&self) -> String {
        format!("{}:{}", self.device, short_interface_name(&self.interface))
    }

    /// True when `device:iface` names this endpoint, accepting IOS short names.
    pub fn matches(&self, device: &str, interface: &str) -> bool {
        self.device == device
            && (self.interface == interface
                || short_interface_name(&self.interface) == short_interface_name(interface))
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.device, self.interface)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub a: Endpoint,
    pub b: Endpoint,
    pub bandwidth_bps: f64,
    pub prop_delay: f64,
    /// packets, per direction and per priority class
    pub queue_capacity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServiceKind {
    Db,
    File,
}

impl ServiceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ServiceKind::Db => "db",
            ServiceKind::File => "file",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResponseRule {
    Fixed(u64),
    Multiplier(f64),
}

impl ResponseRule {
    pub fn response_size(&self, request_size: u64) -> u64 {
        match *self {
            ResponseRule::Fixed(bytes) => bytes,
            ResponseRule::Multiplier(x) => (x * request_size as f64).round().max(0.0) as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceSpec {
    pub name: String,
    pub kind: ServiceKind,
    /// core-seconds per request
    pub cpu_fixed: f64,
    /// core-seconds per response byte
    pub cpu_per_byte: f64,
    /// bytes held per in-flight request
    pub ram_footprint: u64,
    pub response: ResponseRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VmSpec {
    pub name: String,
    pub host: String,
    pub alloc_cores: u32,
    pub alloc_ram: u64,
    pub address: Ipv4Addr,
    pub services: Vec<ServiceSpec>,
}

impl VmSpec {
    pub fn service(&self, name: &str) -> Option<&ServiceSpec> {
        self.services.iter().find(|s| s.name == name)
    }
}

/// Everything a topology file declares.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Topology {
    pub devices: Vec<DeviceConfig>,
    pub links: Vec<LinkSpec>,
    pub vms: Vec<VmSpec>,
}

impl Topology {
    pub fn is_empty(&self) -> bool {
        self.devices.is_empty() && self.links.is_empty() && self.vms.is_empty()
    }

    pub fn device(&self, name: &str) -> Option<&DeviceConfig> {
        self.devices.iter().find(|d| d.name == name)
    }

    pub fn vm(&self, name: &str) -> Option<&VmSpec> {
        self.vms.iter().find(|v| v.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: duplicate device `{name}`")]
    DuplicateDevice { line: usize, name: String },
    #[error("line {line}: link endpoint `{endpoint}` does not name a configured interface")]
    DanglingLinkEndpoint { line: usize, endpoint: String },
}

impl TopologyError {
    pub fn line(&self) -> usize {
        match self {
            TopologyError::Syntax { line, .. }
            | TopologyError::DuplicateDevice { line, .. }
            | TopologyError::DanglingLinkEndpoint { line, .. } => *line,
        }
    }
}

const SHORT_NAMES: &[(&str, &str)] = &[
    ("tengigabitethernet", "Te"),
    ("gigabitethernet", "Gi"),
    ("fastethernet", "Fa"),
    ("ethernet", "Et"),
    ("serial", "Se"),
    ("port-channel", "Po"),
    ("loopback", "Lo"),
    ("vlan", "Vl"),
];

/// IOS-style abbreviation: `FastEthernet0/1.100` -> `Fa0/1.100`. Names
/// without a known prefix are returned unchanged.
pub fn short_interface_name(name: &str) -> String {
    let lower = name.to_ascii_lowercase();
    for (long, short) in SHORT_NAMES {
        if lower.starts_with(long) {
            return format!("{short}{}", &name[long.len()..]);
        }
        if lower.len() > short.len()
            && lower.starts_with(&short.to_ascii_lowercase())
            && lower[short.len()..].starts_with(|c: char| c.is_ascii_digit())
        {
            return format!("{short}{}", &name[short.len()..]);
        }
    }
    name.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_names() {
        assert_eq!(short_interface_name("FastEthernet0/1"), "Fa0/1");
        assert_eq!(short_interface_name("fa0/1.100"), "Fa0/1.100");
        assert_eq!(short_interface_name("GigabitEthernet1/0/2"), "Gi1/0/2");
        assert_eq!(short_interface_name("eth0"), "eth0");
        assert_eq!(short_interface_name("Vlan1"), "Vl1");
    }

    #[test]
    fn endpoint_matching_accepts_abbreviations() {
        let ep = Endpoint::new("R1", "FastEthernet0/1");
        assert!(ep.matches("R1", "Fa0/1"));
        assert!(ep.matches("R1", "FastEthernet0/1"));
        assert!(!ep.matches("R1", "Fa0/2"));
        assert_eq!(ep.label(), "R1:Fa0/1");
    }

    #[test]
    fn response_rules() {
        assert_eq!(ResponseRule::Fixed(65536).response_size(10), 65536);
        assert_eq!(ResponseRule::Multiplier(1.0).response_size(4000), 4000);
        assert_eq!(ResponseRule::Multiplier(0.5).response_size(3), 2);
    }
}

use std::collections::{BTreeSet, HashMap, HashSet};
use std::net::Ipv4Addr;

use super::{
    DeviceConfig, DeviceKind, Dot1q, Endpoint, InterfaceConfig, IpConfig, LinkSpec, PortMode,
    Prefix, ResponseRule, ServerResources, ServiceKind, ServiceSpec, Topology, TopologyError,
    VmSpec,
};
use crate::units;

/// Parses a topology document.
///
/// The dialect is a strict subset of IOS plus `device`, `link`, `vm` and
/// `service` stanzas. Unknown keywords are errors that carry the 1-based
/// line number.
pub fn parse_topology(text: &str) -> Result<Topology, TopologyError> {
    let mut parser = Parser::default();
    let mut pending: Option<(usize, Vec<&str>)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let mut at = line;
        if let Some((first, mut head)) = pending.take() {
            // a wrapped command takes the next line as its argument
            head.append(&mut tokens);
            tokens = head;
            at = first;
        }
        if matches!(
            tokens[..],
            ["ip", "address"] | ["switchport", "trunk", "allowed", "vlan"]
        ) {
            pending = Some((line, tokens));
            continue;
        }
        parser.line(at, &tokens)?;
    }
    if let Some((line, tokens)) = pending {
        return Err(syntax(
            line,
            format!("`{}` needs an argument", tokens.join(" ")),
        ));
    }
    parser.finish()
}

fn syntax(line: usize, reason: impl Into<String>) -> TopologyError {
    TopologyError::Syntax {
        line,
        reason: reason.into(),
    }
}

struct PendingDevice {
    config: DeviceConfig,
    line: usize,
    // per interface: declaration line, and whether `switchport mode` was given
    iface_lines: Vec<usize>,
    explicit_mode: Vec<Option<PortMode>>,
    // parents created on behalf of a subinterface, not yet declared
    implicit: HashSet<usize>,
    cores: Option<u32>,
    ram: Option<u64>,
    disk: Option<f64>,
}

#[derive(Default)]
struct Parser {
    topology: Topology,
    device_names: HashSet<String>,
    current: Option<PendingDevice>,
    current_iface: Option<usize>,
    link_lines: Vec<usize>,
    vm_lines: HashMap<String, usize>,
}

impl Parser {
    fn line(&mut self, line: usize, tokens: &[&str]) -> Result<(), TopologyError> {
        match tokens[0] {
            "device" => {
                self.close_device()?;
                self.open_device(line, tokens)
            }
            "link" => {
                self.close_device()?;
                self.link(line, tokens)
            }
            "vm" => {
                self.close_device()?;
                self.vm(line, tokens)
            }
            "service" => {
                self.close_device()?;
                self.service(line, tokens)
            }
            "interface" => self.interface(line, tokens),
            "encapsulation" | "ip" | "switchport" => self.interface_command(line, tokens),
            "cores" | "ram" | "disk" => self.resource(line, tokens),
            other => Err(syntax(line, format!("unknown keyword `{other}`"))),
        }
    }

    fn open_device(&mut self, line: usize, tokens: &[&str]) -> Result<(), TopologyError> {
        if tokens.len() != 3 {
            return Err(syntax(
                line,
                "expected `device <name> <router|switch|server|host>`",
            ));
        }
        let kind = match tokens[2] {
            "router" => DeviceKind::Router,
            "switch" => DeviceKind::Switch,
            "server" => DeviceKind::Server,
            "host" => DeviceKind::Host,
            other => return Err(syntax(line, format!("unknown device kind `{other}`"))),
        };
        let name = tokens[1];
        if name.contains(':') {
            return Err(syntax(line, "device names may not contain `:`"));
        }
        if !self.device_names.insert(name.to_string()) {
            return Err(TopologyError::DuplicateDevice {
                line,
                name: name.to_string(),
            });
        }
        self.current = Some(PendingDevice {
            config: DeviceConfig::new(name, kind),
            line,
            iface_lines: Vec::new(),
            explicit_mode: Vec::new(),
            implicit: HashSet::new(),
            cores: None,
            ram: None,
            disk: None,
        });
        self.current_iface = None;
        Ok(())
    }

    fn device_mut(&mut self, line: usize, what: &str) -> Result<&mut PendingDevice, TopologyError> {
        self.current
            .as_mut()
            .ok_or_else(|| syntax(line, format!("`{what}` outside a device block")))
    }

    fn interface(&mut self, line: usize, tokens: &[&str]) -> Result<(), TopologyError> {
        if tokens.len() != 2 {
            return Err(syntax(line, "expected `interface <name>`"));
        }
        let name = tokens[1];
        let dev = self.device_mut(line, "interface")?;
        let kind = dev.config.kind;
        if let Some(idx) = dev.config.interfaces.iter().position(|i| i.name == name) {
            if !dev.implicit.remove(&idx) {
                return Err(syntax(line, format!("interface `{name}` declared twice")));
            }
            dev.iface_lines[idx] = line;
            self.current_iface = Some(idx);
            return Ok(());
        }
        if name.split('.').count() > 2 || name.starts_with('.') || name.ends_with('.') {
            return Err(syntax(line, format!("malformed interface name `{name}`")));
        }
        let is_sub = name.contains('.');
        if is_sub && kind == DeviceKind::Switch {
            return Err(syntax(line, "subinterfaces are not supported on switches"));
        }
        let mode = if kind == DeviceKind::Switch && !name.to_ascii_lowercase().starts_with("vlan") {
            PortMode::Access
        } else {
            PortMode::Routed
        };
        if is_sub {
            // the physical parent always exists on real gear; materialize it
            let parent = name.split('.').next().unwrap_or_default();
            if !dev.config.interfaces.iter().any(|i| i.name == parent) {
                dev.implicit.insert(dev.config.interfaces.len());
                dev.config
                    .interfaces
                    .push(InterfaceConfig::new(parent, mode));
                dev.iface_lines.push(line);
                dev.explicit_mode.push(None);
            }
        }
        dev.config.interfaces.push(InterfaceConfig::new(name, mode));
        dev.iface_lines.push(line);
        dev.explicit_mode.push(None);
        self.current_iface = Some(dev.config.interfaces.len() - 1);
        Ok(())
    }

    fn interface_command(&mut self, line: usize, tokens: &[&str]) -> Result<(), TopologyError> {
        let idx = self
            .current_iface
            .ok_or_else(|| syntax(line, format!("`{}` outside an interface block", tokens[0])))?;
        let dev = self.device_mut(line, tokens[0])?;
        let kind = dev.config.kind;
        let iface = &mut dev.config.interfaces[idx];
        match tokens {
            ["encapsulation", "dot1q", id, rest @ ..] => {
                let native = match rest {
                    [] => false,
                    ["native"] => true,
                    _ => return Err(syntax(line, "expected `encapsulation dot1q <id> [native]`")),
                };
                if !iface.is_subinterface() {
                    return Err(syntax(
                        line,
                        "encapsulation is only valid on a subinterface",
                    ));
                }
                let vlan = parse_vlan(line, id)?;
                iface.encapsulation = Some(Dot1q { vlan, native });
            }
            ["encapsulation", ..] => {
                return Err(syntax(line, "expected `encapsulation dot1q <id> [native]`"))
            }
            ["ip", "address", rest @ ..] => {
                let (address, mask) = match rest {
                    [addr, mask] => (parse_ipv4(line, addr)?, parse_ipv4(line, mask)?),
                    // address and mask run together as a.b.c.d.m.m.m.m
                    [joined] => split_joined_address(line, joined)?,
                    _ => return Err(syntax(line, "expected `ip address <a.b.c.d> <mask>`")),
                };
                let prefix_len = Prefix::mask_len(mask)
                    .ok_or_else(|| syntax(line, format!("non-contiguous netmask {mask}")))?;
                if kind == DeviceKind::Switch && !iface.is_management() {
                    return Err(syntax(
                        line,
                        "switches take an address only on a Vlan management interface",
                    ));
                }
                if iface.ip.is_some() {
                    return Err(syntax(line, "interface already has an address"));
                }
                iface.ip = Some(IpConfig {
                    address,
                    prefix_len,
                });
            }
            ["switchport", ..] if kind != DeviceKind::Switch => {
                return Err(syntax(line, "switchport commands apply only to switches"));
            }
            ["switchport", ..] if iface.is_management() => {
                return Err(syntax(line, "switchport on a Vlan interface"));
            }
            ["switchport", "mode", mode] => {
                let mode = match *mode {
                    "trunk" => PortMode::Trunk,
                    "access" => PortMode::Access,
                    other => {
                        return Err(syntax(line, format!("unknown switchport mode `{other}`")))
                    }
                };
                if dev.explicit_mode[idx].is_some() {
                    return Err(syntax(line, "switchport mode given twice"));
                }
                dev.explicit_mode[idx] = Some(mode);
                dev.config.interfaces[idx].mode = mode;
            }
            ["switchport", "trunk", "allowed", "vlan", list] => {
                iface.allowed_vlans = parse_vlan_list(line, list)?;
            }
            ["switchport", "access", "vlan", id] => {
                iface.access_vlan = Some(parse_vlan(line, id)?);
            }
            _ => {
                return Err(syntax(
                    line,
                    format!("unrecognized interface command `{}`", tokens.join(" ")),
                ))
            }
        }
        Ok(())
    }

    fn resource(&mut self, line: usize, tokens: &[&str]) -> Result<(), TopologyError> {
        let dev = self.device_mut(line, tokens[0])?;
        if dev.config.kind != DeviceKind::Server {
            return Err(syntax(
                line,
                format!("`{}` is only valid for servers", tokens[0]),
            ));
        }
        let [keyword, value] = tokens else {
            return Err(syntax(line, format!("expected `{} <value>`", tokens[0])));
        };
        match *keyword {
            "cores" => {
                let n: u32 = value
                    .parse()
                    .ok()
                    .filter(|n| *n > 0)
                    .ok_or_else(|| syntax(line, "cores must be a positive integer"))?;
                set_once(&mut dev.cores, n, line, "cores")?;
            }
            "ram" => {
                let n = units::parse_bytes(value).map_err(|e| syntax(line, e))?;
                if n == 0 {
                    return Err(syntax(line, "ram must be positive"));
                }
                set_once(&mut dev.ram, n, line, "ram")?;
            }
            _ => {
                let rate = units::parse_number(value, value).map_err(|e| syntax(line, e))?;
                if rate <= 0.0 {
                    return Err(syntax(line, "disk rate must be positive"));
                }
                set_once(&mut dev.disk, rate, line, "disk")?;
            }
        }
        Ok(())
    }

    fn close_device(&mut self) -> Result<(), TopologyError> {
        self.current_iface = None;
        let Some(dev) = self.current.take() else {
            return Ok(());
        };
        let PendingDevice {
            mut config,
            line,
            iface_lines,
            cores,
            ram,
            disk,
            ..
        } = dev;
        for (idx, iface) in config.interfaces.iter().enumerate() {
            let at = iface_lines[idx];
            if iface.is_subinterface() && iface.encapsulation.is_none() {
                return Err(syntax(
                    at,
                    format!("subinterface `{}` has no encapsulation", iface.name),
                ));
            }
            match iface.mode {
                PortMode::Trunk if iface.allowed_vlans.is_empty() => {
                    return Err(syntax(
                        at,
                        format!("trunk `{}` has no allowed vlan list", iface.name),
                    ))
                }
                PortMode::Trunk if iface.access_vlan.is_some() => {
                    return Err(syntax(
                        at,
                        format!("trunk `{}` also has an access vlan", iface.name),
                    ))
                }
                PortMode::Access | PortMode::Routed if !iface.allowed_vlans.is_empty() => {
                    return Err(syntax(
                        at,
                        format!("`{}` lists allowed vlans but is not a trunk", iface.name),
                    ))
                }
                _ => {}
            }
        }
        let mut natives: HashMap<&str, usize> = HashMap::new();
        for (idx, iface) in config.interfaces.iter().enumerate() {
            if matches!(iface.encapsulation, Some(Dot1q { native: true, .. }))
                && natives.insert(iface.parent_name(), idx).is_some()
            {
                return Err(syntax(
                    iface_lines[idx],
                    format!("second native subinterface on `{}`", iface.parent_name()),
                ));
            }
        }
        config.resources = match (cores, ram, disk) {
            (None, None, None) => None,
            (Some(cores), Some(ram), Some(disk_rate)) => Some(ServerResources {
                cores,
                ram,
                disk_rate,
            }),
            _ => {
                return Err(syntax(
                    line,
                    format!("server `{}` needs all of cores, ram and disk", config.name),
                ))
            }
        };
        self.topology.devices.push(config);
        Ok(())
    }

    fn link(&mut self, line: usize, tokens: &[&str]) -> Result<(), TopologyError> {
        if tokens.len() < 3 {
            return Err(syntax(
                line,
                "expected `link <dev>:<iface> <dev>:<iface> bandwidth <bw> delay <d> queue <n>`",
            ));
        }
        let a = parse_endpoint(line, tokens[1])?;
        let b = parse_endpoint(line, tokens[2])?;
        let kv = keyword_values(line, &tokens[3..], &["bandwidth", "delay", "queue"])?;
        let bandwidth_bps = units::parse_bandwidth(kv["bandwidth"]).map_err(|e| syntax(line, e))?;
        let prop_delay = units::parse_delay(kv["delay"]).map_err(|e| syntax(line, e))?;
        let queue_capacity: usize = kv["queue"]
            .parse()
            .map_err(|_| syntax(line, "queue must be a non-negative integer"))?;
        if a == b {
            return Err(syntax(line, "link endpoints are identical"));
        }
        self.topology.links.push(LinkSpec {
            a,
            b,
            bandwidth_bps,
            prop_delay,
            queue_capacity,
        });
        self.link_lines.push(line);
        Ok(())
    }

    fn vm(&mut self, line: usize, tokens: &[&str]) -> Result<(), TopologyError> {
        if tokens.len() < 2 {
            return Err(syntax(
                line,
                "expected `vm <name> host <server> cores <n> ram <bytes> ip <addr>`",
            ));
        }
        let name = tokens[1];
        let kv = keyword_values(line, &tokens[2..], &["host", "cores", "ram", "ip"])?;
        let alloc_cores: u32 = kv["cores"]
            .parse()
            .ok()
            .filter(|n| *n >= 1)
            .ok_or_else(|| syntax(line, "vm cores must be an integer >= 1"))?;
        let alloc_ram = units::parse_bytes(kv["ram"]).map_err(|e| syntax(line, e))?;
        let address = parse_ipv4(line, kv["ip"])?;
        if self.vm_lines.insert(name.to_string(), line).is_some() {
            return Err(syntax(line, format!("vm `{name}` declared twice")));
        }
        self.topology.vms.push(VmSpec {
            name: name.to_string(),
            host: kv["host"].to_string(),
            alloc_cores,
            alloc_ram,
            address,
            services: Vec::new(),
        });
        Ok(())
    }

    fn service(&mut self, line: usize, tokens: &[&str]) -> Result<(), TopologyError> {
        if tokens.len() < 4 {
            return Err(syntax(line, "expected `service <vm> <name> <db|file> ...`"));
        }
        let kind = match tokens[3] {
            "db" => ServiceKind::Db,
            "file" => ServiceKind::File,
            other => return Err(syntax(line, format!("unknown service kind `{other}`"))),
        };
        let kv = keyword_values(
            line,
            &tokens[4..],
            &["cpu_fixed", "cpu_per_byte", "footprint", "resp"],
        )?;
        let non_negative = |key: &str| -> Result<f64, TopologyError> {
            let v = units::parse_number(kv[key], kv[key]).map_err(|e| syntax(line, e))?;
            if v < 0.0 {
                return Err(syntax(line, format!("{key} must be non-negative")));
            }
            Ok(v)
        };
        let cpu_fixed = non_negative("cpu_fixed")?;
        let cpu_per_byte = non_negative("cpu_per_byte")?;
        let ram_footprint = units::parse_bytes(kv["footprint"]).map_err(|e| syntax(line, e))?;
        let response = match kv["resp"].split_once(':') {
            Some(("fixed", bytes)) => {
                ResponseRule::Fixed(units::parse_bytes(bytes).map_err(|e| syntax(line, e))?)
            }
            Some(("mult", x)) => {
                let x = units::parse_number(x, kv["resp"]).map_err(|e| syntax(line, e))?;
                if x < 0.0 {
                    return Err(syntax(line, "response multiplier must be non-negative"));
                }
                ResponseRule::Multiplier(x)
            }
            _ => return Err(syntax(line, "resp must be `fixed:<bytes>` or `mult:<x>`")),
        };
        if kind == ServiceKind::Db && cpu_fixed == 0.0 && cpu_per_byte == 0.0 {
            return Err(syntax(
                line,
                "a db service needs cpu_fixed or cpu_per_byte > 0",
            ));
        }
        let (vm_name, name) = (tokens[1], tokens[2]);
        let vm = self
            .topology
            .vms
            .iter_mut()
            .find(|v| v.name == vm_name)
            .ok_or_else(|| syntax(line, format!("service names undeclared vm `{vm_name}`")))?;
        if vm.service(name).is_some() {
            return Err(syntax(
                line,
                format!("service `{name}` declared twice on `{vm_name}`"),
            ));
        }
        vm.services.push(ServiceSpec {
            name: name.to_string(),
            kind,
            cpu_fixed,
            cpu_per_byte,
            ram_footprint,
            response,
        });
        Ok(())
    }

    fn finish(mut self) -> Result<Topology, TopologyError> {
        self.close_device()?;
        let mut linked: HashMap<(String, String), usize> = HashMap::new();
        for (link, &line) in self.topology.links.iter().zip(&self.link_lines) {
            for ep in [&link.a, &link.b] {
                let iface = self
                    .topology
                    .device(&ep.device)
                    .and_then(|d| d.interfaces.iter().find(|i| i.name == ep.interface));
                let Some(iface) = iface else {
                    return Err(TopologyError::DanglingLinkEndpoint {
                        line,
                        endpoint: ep.to_string(),
                    });
                };
                if iface.is_subinterface() {
                    return Err(syntax(
                        line,
                        format!("link endpoint `{ep}` must be a physical interface"),
                    ));
                }
                if let Some(prev) = linked.insert((ep.device.clone(), ep.interface.clone()), line) {
                    return Err(syntax(
                        line,
                        format!("interface `{ep}` is already linked on line {prev}"),
                    ));
                }
            }
        }
        for vm in &self.topology.vms {
            let line = self.vm_lines[&vm.name];
            match self.topology.device(&vm.host) {
                Some(d) if d.kind == DeviceKind::Server => {}
                Some(_) => {
                    return Err(syntax(
                        line,
                        format!("vm host `{}` is not a server", vm.host),
                    ))
                }
                None => {
                    return Err(syntax(
                        line,
                        format!("vm host `{}` is not declared", vm.host),
                    ))
                }
            }
        }
        Ok(self.topology)
    }
}

fn set_once<T>(
    slot: &mut Option<T>,
    value: T,
    line: usize,
    what: &str,
) -> Result<(), TopologyError> {
    if slot.is_some() {
        return Err(syntax(line, format!("`{what}` given twice")));
    }
    *slot = Some(value);
    Ok(())
}

/// `key value key value ...` where every key in `keys` must appear exactly once.
fn keyword_values<'a>(
    line: usize,
    tokens: &[&'a str],
    keys: &[&str],
) -> Result<HashMap<String, &'a str>, TopologyError> {
    if !tokens.len().is_multiple_of(2) {
        return Err(syntax(line, "expected keyword/value pairs"));
    }
    let mut out = HashMap::new();
    for pair in tokens.chunks(2) {
        let key = pair[0];
        if !keys.contains(&key) {
            return Err(syntax(line, format!("unknown keyword `{key}`")));
        }
        if out.insert(key.to_string(), pair[1]).is_some() {
            return Err(syntax(line, format!("`{key}` given twice")));
        }
    }
    for key in keys {
        if !out.contains_key(*key) {
            return Err(syntax(line, format!("missing `{key}`")));
        }
    }
    Ok(out)
}

fn parse_endpoint(line: usize, token: &str) -> Result<Endpoint, TopologyError> {
    match token.split_once(':') {
        Some((dev, iface)) if !dev.is_empty() && !iface.is_empty() => Ok(Endpoint::new(dev, iface)),
        _ => Err(syntax(
            line,
            format!("endpoint `{token}` is not `<device>:<interface>`"),
        )),
    }
}

fn parse_ipv4(line: usize, token: &str) -> Result<Ipv4Addr, TopologyError> {
    token
        .parse()
        .map_err(|_| syntax(line, format!("`{token}` is not an IPv4 address")))
}

fn split_joined_address(line: usize, token: &str) -> Result<(Ipv4Addr, Ipv4Addr), TopologyError> {
    let octets: Vec<&str> = token.split('.').collect();
    if octets.len() != 8 {
        return Err(syntax(line, "expected `ip address <a.b.c.d> <mask>`"));
    }
    let address = parse_ipv4(line, &octets[..4].join("."))?;
    let mask = parse_ipv4(line, &octets[4..].join("."))?;
    Ok((address, mask))
}

fn parse_vlan(line: usize, token: &str) -> Result<u16, TopologyError> {
    match token.parse::<u16>() {
        Ok(v) if (1..=4094).contains(&v) => Ok(v),
        _ => Err(syntax(
            line,
            format!("`{token}` is not a vlan id in 1-4094"),
        )),
    }
}

/// `100-102`, `100,102` or a mix such as `10,20-22`.
fn parse_vlan_list(line: usize, token: &str) -> Result<BTreeSet<u16>, TopologyError> {
    let mut out = BTreeSet::new();
    for part in token.split(',') {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let (lo, hi) = (parse_vlan(line, lo)?, parse_vlan(line, hi)?);
                if lo > hi {
                    return Err(syntax(line, format!("descending vlan range `{part}`")));
                }
                out.extend(lo..=hi);
            }
            None => {
                out.insert(parse_vlan(line, part)?);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document() {
        let t = parse_topology("").unwrap();
        assert!(t.is_empty());
        let t = parse_topology("# only a comment\n\n   \n").unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn malformed_dot1q_names_line() {
        let text = "device R1 router\n interface Fa0/1.100\n  encapsulation dot1q abc\n";
        match parse_topology(text) {
            Err(TopologyError::Syntax { line, reason }) => {
                assert_eq!(line, 3);
                assert!(reason.contains("abc"), "{reason}");
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keyword_is_error() {
        let err = parse_topology("device R1 router\n hostname R1\n").unwrap_err();
        assert_eq!(err.line(), 2);
    }

    #[test]
    fn duplicate_device() {
        let err = parse_topology("device R1 router\ndevice R1 switch\n").unwrap_err();
        assert_eq!(
            err,
            TopologyError::DuplicateDevice {
                line: 2,
                name: "R1".into()
            }
        );
    }

    #[test]
    fn dangling_link_endpoint() {
        let text = "device R1 router\n interface Fa0/0\nlink R1:Fa0/0 R2:Fa0/0 bandwidth 10mbps delay 0ms queue 8\n";
        let err = parse_topology(text).unwrap_err();
        assert!(
            matches!(err, TopologyError::DanglingLinkEndpoint { line: 3, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn vlan_lists() {
        assert_eq!(
            parse_vlan_list(1, "100-102").unwrap(),
            BTreeSet::from([100, 101, 102])
        );
        assert_eq!(
            parse_vlan_list(1, "100,102").unwrap(),
            BTreeSet::from([100, 102])
        );
        assert_eq!(
            parse_vlan_list(1, "10,20-21").unwrap(),
            BTreeSet::from([10, 20, 21])
        );
        assert!(parse_vlan_list(1, "0").is_err());
        assert!(parse_vlan_list(1, "4095").is_err());
        assert!(parse_vlan_list(1, "5-3").is_err());
    }

    #[test]
    fn non_contiguous_mask_rejected() {
        let text = "device R1 router\n interface Fa0/0\n  ip address 10.0.0.1 255.0.255.0\n";
        let err = parse_topology(text).unwrap_err();
        assert_eq!(err.line(), 3);
    }

    #[test]
    fn joined_address_and_mask() {
        let text = "device R1 router\n interface Fa0/0\n  ip address 192.168.100.1.255.255.255.0\n";
        let t = parse_topology(text).unwrap();
        let ip = t.devices[0].interfaces[0].ip.unwrap();
        assert_eq!(ip.address, Ipv4Addr::new(192, 168, 100, 1));
        assert_eq!(ip.prefix_len, 24);
    }

    #[test]
    fn subinterface_invariants() {
        // encapsulation on a physical interface
        let err = parse_topology("device R1 router\n interface Fa0/0\n  encapsulation dot1q 5\n");
        assert_eq!(err.unwrap_err().line(), 3);
        // subinterface without encapsulation
        let err = parse_topology("device R1 router\n interface Fa0/0.5\n");
        assert_eq!(err.unwrap_err().line(), 2);
        // two native subinterfaces on one parent
        let text = "device R1 router\n interface Fa0/0.5\n  encapsulation dot1q 5 native\n interface Fa0/0.6\n  encapsulation dot1q 6 native\n";
        assert_eq!(parse_topology(text).unwrap_err().line(), 4);
        // the parent is materialized
        let t = parse_topology("device R1 router\n interface Fa0/0.5\n  encapsulation dot1q 5\n")
            .unwrap();
        let names: Vec<_> = t.devices[0]
            .interfaces
            .iter()
            .map(|i| i.name.as_str())
            .collect();
        assert_eq!(names, ["Fa0/0", "Fa0/0.5"]);
        // declaring the parent after its subinterface is fine, once
        let text =
            "device R1 router\n interface Fa0/0.5\n  encapsulation dot1q 5\n interface Fa0/0\n";
        assert_eq!(parse_topology(text).unwrap(), t);
        assert!(parse_topology(&format!("{text} interface Fa0/0\n")).is_err());
    }

    #[test]
    fn trunk_requires_allowed_list() {
        let err = parse_topology("device SW switch\n interface Fa0/1\n  switchport mode trunk\n");
        assert_eq!(err.unwrap_err().line(), 2);
        let err = parse_topology(
            "device SW switch\n interface Fa0/1\n  switchport trunk allowed vlan 10\n",
        );
        assert!(err.is_err());
    }

    #[test]
    fn switchport_only_on_switches() {
        let err = parse_topology("device R1 router\n interface Fa0/1\n  switchport mode trunk\n");
        assert_eq!(err.unwrap_err().line(), 3);
        let err =
            parse_topology("device SW switch\n interface Fa0/1\n  ip address 10.0.0.1 255.0.0.0\n");
        assert_eq!(err.unwrap_err().line(), 3);
        parse_topology("device SW switch\n interface Vlan1\n  ip address 10.0.0.2 255.0.0.0\n")
            .unwrap();
    }

    #[test]
    fn wrapped_arguments() {
        let t = parse_topology(
            "device R1 router\n interface Fa0/1.100\n  encapsulation dot1q 100 native\n  ip address\n  192.168.100.1.255.255.255.0\n\
             device SW1 switch\n interface Fa0/1\n  switchport trunk allowed vlan\n  100-102\n  switchport mode trunk\n",
        )
        .unwrap();
        let ip = t.devices[0].interfaces[1].ip.unwrap();
        assert_eq!(
            (ip.address, ip.prefix_len),
            (Ipv4Addr::new(192, 168, 100, 1), 24)
        );
        assert_eq!(t.devices[1].interfaces[0].allowed_vlans.len(), 3);
        let err = parse_topology("device R1 router\n interface Fa0/1\n  ip address\n").unwrap_err();
        assert_eq!(err.line(), 3);
    }

    #[test]
    fn cloud_stanzas() {
        let text = "\
device SunFire server
 cores 4
 ram 8GiB
 disk 100000000
 interface eth0
  ip address 192.168.101.10 255.255.255.0
vm VM1_db host SunFire cores 2 ram 2GiB ip 192.168.101.20
service VM1_db db db cpu_fixed 0.01 cpu_per_byte 0 footprint 1MiB resp fixed:65536
";
        let t = parse_topology(text).unwrap();
        let res = t.devices[0].resources.unwrap();
        assert_eq!(res.cores, 4);
        assert_eq!(res.ram, 8 << 30);
        let vm = &t.vms[0];
        assert_eq!((vm.alloc_cores, vm.alloc_ram), (2, 2 << 30));
        assert_eq!(vm.services[0].response, ResponseRule::Fixed(65536));
        // vm on an undeclared host
        let err = parse_topology("vm V host Nope cores 1 ram 1 ip 10.0.0.1\n").unwrap_err();
        assert_eq!(err.line(), 1);
        // service on an undeclared vm
        let err =
            parse_topology("service V s file cpu_fixed 0 cpu_per_byte 0 footprint 0 resp mult:1\n")
                .unwrap_err();
        assert_eq!(err.line(), 1);
    }

    #[test]
    fn link_interface_used_twice() {
        let text = "\
device A host
 interface e0
device B host
 interface e0
device C host
 interface e0
link A:e0 B:e0 bandwidth 1mbps delay 0s queue 1
link A:e0 C:e0 bandwidth 1mbps delay 0s queue 1
";
        assert_eq!(parse_topology(text).unwrap_err().line(), 8);
    }
}

use std::collections::BTreeSet;
use std::fmt::Write;

use super::{PortMode, ResponseRule, Topology};
use crate::units::{format_bandwidth, format_delay};

/// Canonical text for a topology. Re-parsing the output yields a structurally
/// equal [`Topology`].
pub fn emit_topology(topology: &Topology) -> String {
    let mut out = String::new();
    for dev in &topology.devices {
        writeln!(out, "device {} {}", dev.name, dev.kind).unwrap();
        if let Some(res) = dev.resources {
            writeln!(out, " cores {}", res.cores).unwrap();
            writeln!(out, " ram {}", res.ram).unwrap();
            writeln!(out, " disk {}", res.disk_rate).unwrap();
        }
        for iface in &dev.interfaces {
            writeln!(out, " interface {}", iface.name).unwrap();
            if let Some(enc) = iface.encapsulation {
                let native = if enc.native { " native" } else { "" };
                writeln!(out, "  encapsulation dot1q {}{native}", enc.vlan).unwrap();
            }
            if let Some(ip) = iface.ip {
                writeln!(out, "  ip address {} {}", ip.address, ip.mask()).unwrap();
            }
            match iface.mode {
                PortMode::Trunk => {
                    writeln!(out, "  switchport mode trunk").unwrap();
                    writeln!(
                        out,
                        "  switchport trunk allowed vlan {}",
                        vlan_list(&iface.allowed_vlans)
                    )
                    .unwrap();
                }
                PortMode::Access => {
                    if let Some(v) = iface.access_vlan {
                        writeln!(out, "  switchport mode access").unwrap();
                        writeln!(out, "  switchport access vlan {v}").unwrap();
                    }
                }
                PortMode::Routed => {}
            }
        }
    }
    for link in &topology.links {
        writeln!(
            out,
            "link {} {} bandwidth {} delay {} queue {}",
            link.a,
            link.b,
            format_bandwidth(link.bandwidth_bps),
            format_delay(link.prop_delay),
            link.queue_capacity
        )
        .unwrap();
    }
    for vm in &topology.vms {
        writeln!(
            out,
            "vm {} host {} cores {} ram {} ip {}",
            vm.name, vm.host, vm.alloc_cores, vm.alloc_ram, vm.address
        )
        .unwrap();
        for svc in &vm.services {
            let resp = match svc.response {
                ResponseRule::Fixed(bytes) => format!("fixed:{bytes}"),
                ResponseRule::Multiplier(x) => format!("mult:{x}"),
            };
            writeln!(
                out,
                "service {} {} {} cpu_fixed {} cpu_per_byte {} footprint {} resp {resp}",
                vm.name,
                svc.name,
                svc.kind.as_str(),
                svc.cpu_fixed,
                svc.cpu_per_byte,
                svc.ram_footprint
            )
            .unwrap();
        }
    }
    out
}

/// `{100, 101, 102, 200}` -> `100-102,200`
fn vlan_list(vlans: &BTreeSet<u16>) -> String {
    let mut parts = Vec::new();
    let mut iter = vlans.iter().copied().peekable();
    while let Some(start) = iter.next() {
        let mut end = start;
        while iter.peek() == Some(&(end + 1)) {
            end = iter.next().unwrap();
        }
        parts.push(if start == end {
            start.to_string()
        } else {
            format!("{start}-{end}")
        });
    }
    parts.join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::parse_topology;

    #[test]
    fn empty_topology_emits_empty_document() {
        assert_eq!(emit_topology(&Topology::default()), "");
    }

    #[test]
    fn vlan_list_compression() {
        assert_eq!(vlan_list(&BTreeSet::from([100, 101, 102])), "100-102");
        assert_eq!(vlan_list(&BTreeSet::from([100, 102])), "100,102");
        assert_eq!(vlan_list(&BTreeSet::from([1, 2, 5, 7, 8])), "1-2,5,7-8");
    }

    #[test]
    fn native_subinterface_text() {
        let t = parse_topology(
            "device R1 router\n interface Fa0/1.100\n  encapsulation dot1q 100 native\n  ip address 192.168.100.1 255.255.255.0\n",
        )
        .unwrap();
        let text = emit_topology(&t);
        assert!(text.contains("encapsulation dot1q 100 native"), "{text}");
        assert!(text.contains("ip address 192.168.100.1 255.255.255.0"));
        assert_eq!(parse_topology(&text).unwrap(), t);
    }
}

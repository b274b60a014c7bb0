use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::net::Ipv4Addr;
use std::path::Path;

use proptest::prelude::*;

use labbench_core::emulation::{Engine, EngineConfig};
use labbench_core::topology::{
    build_network, compute_routes, emit_topology, parse_topology, resolve_next_hop, NetworkModel,
    RouteLookup, RoutingTable,
};

fn model(text: &str) -> NetworkModel {
    build_network(&parse_topology(text).unwrap()).unwrap()
}

fn corpus() -> Vec<(String, String)> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut files: Vec<_> = glob::glob(&format!("{}/**/*.cfg", root.display()))
        .unwrap()
        .map(Result::unwrap)
        .collect();
    files.sort();
    assert!(files.len() >= 3, "corpus went missing: {files:?}");
    files
        .into_iter()
        .map(|p| {
            (
                p.display().to_string(),
                std::fs::read_to_string(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn corpus_round_trips() {
    for (path, text) in corpus() {
        let first = parse_topology(&text).unwrap_or_else(|e| panic!("{path}: {e}"));
        let again = parse_topology(&emit_topology(&first)).unwrap();
        assert_eq!(first, again, "{path}");
    }
}

#[test]
fn two_routers_learn_each_others_lans() {
    let m = model(
        "\
device A host
 interface eth0
  ip address 10.0.1.10 255.255.255.0
device R1 router
 interface Fa0/0
  ip address 10.0.1.1 255.255.255.0
 interface Fa0/1
  ip address 10.9.0.1 255.255.255.252
device R2 router
 interface Fa0/0
  ip address 10.0.2.1 255.255.255.0
 interface Fa0/1
  ip address 10.9.0.2 255.255.255.252
device B host
 interface eth0
  ip address 10.0.2.10 255.255.255.0
link A:eth0 R1:Fa0/0 bandwidth 100mbps delay 0ms queue 64
link R1:Fa0/1 R2:Fa0/1 bandwidth 10mbps delay 1ms queue 64
link R2:Fa0/0 B:eth0 bandwidth 100mbps delay 0ms queue 64
",
    );
    let routes = compute_routes(&m);
    let r1 = &routes["R1"];
    assert_eq!(
        resolve_next_hop(r1, "10.0.2.10".parse().unwrap()),
        RouteLookup::Via {
            egress: "Fa0/1",
            next_hop: Some("10.9.0.2".parse().unwrap())
        }
    );
    assert_eq!(
        resolve_next_hop(r1, "10.0.1.10".parse().unwrap()),
        RouteLookup::Via {
            egress: "Fa0/0",
            next_hop: None
        }
    );
    assert_eq!(
        resolve_next_hop(&routes["R2"], "10.0.1.10".parse().unwrap()),
        RouteLookup::Via {
            egress: "Fa0/1",
            next_hop: Some("10.9.0.1".parse().unwrap())
        }
    );
    assert_eq!(
        resolve_next_hop(r1, "172.16.0.1".parse().unwrap()),
        RouteLookup::Unreachable
    );
}

#[test]
fn hub_router_learns_three_lans() {
    let mut text = String::from("device R0 router\n");
    for i in 1..=3 {
        writeln!(
            text,
            " interface Fa0/{i}\n  ip address 10.0.{i}.1 255.255.255.252"
        )
        .unwrap();
    }
    for i in 1..=3 {
        writeln!(
            text,
            "device R{i} router\n interface Fa0/0\n  ip address 10.0.{i}.2 255.255.255.252\n \
             interface Fa0/1\n  ip address 192.168.{i}.1 255.255.255.0"
        )
        .unwrap();
    }
    for i in 1..=3 {
        writeln!(
            text,
            "link R0:Fa0/{i} R{i}:Fa0/0 bandwidth 100mbps delay 0ms queue 64"
        )
        .unwrap();
    }
    let routes = compute_routes(&model(&text));
    let learned: Vec<String> = routes["R0"]
        .learned()
        .map(|r| format!("{:?} via {:?}", r.prefix, r.next_hop.unwrap()))
        .collect();
    assert_eq!(learned.len(), 3, "{learned:?}");
    for i in 1..=3u8 {
        let dst = Ipv4Addr::new(192, 168, i, 77);
        assert_eq!(
            resolve_next_hop(&routes["R0"], dst),
            RouteLookup::Via {
                egress: &format!("Fa0/{i}"),
                next_hop: Some(Ipv4Addr::new(10, 0, i, 2))
            }
        );
    }
}

const TRIANGLE: &str = "\
device R0 router
 interface Fa0/0
  ip address 10.0.1.1 255.255.255.0
 interface Fa0/1
  ip address 10.0.2.1 255.255.255.0
device R1 router
 interface Fa0/0
  ip address 10.0.1.2 255.255.255.0
 interface Fa0/1
  ip address 10.0.3.1 255.255.255.0
device R2 router
 interface Fa0/0
  ip address 10.0.2.2 255.255.255.0
 interface Fa0/1
  ip address 10.0.3.2 255.255.255.0
 interface Fa0/2
  ip address 172.16.0.1 255.255.255.0
device H host
 interface eth0
  ip address 172.16.0.10 255.255.255.0
link R0:Fa0/0 R1:Fa0/0 bandwidth 100mbps delay 0ms queue 64
link R0:Fa0/1 R2:Fa0/0 bandwidth 100mbps delay 0ms queue 64
link R1:Fa0/1 R2:Fa0/1 bandwidth 100mbps delay 0ms queue 64
link R2:Fa0/2 H:eth0 bandwidth 100mbps delay 0ms queue 64
";

#[test]
fn routes_restored_after_link_down_and_up() {
    let mut e = Engine::new(model(TRIANGLE), EngineConfig::default());
    let lan: Ipv4Addr = "172.16.0.10".parse().unwrap();
    let direct = RouteLookup::Via {
        egress: "Fa0/1",
        next_hop: Some("10.0.2.2".parse().unwrap()),
    };
    let before = e.routes().clone();
    assert_eq!(resolve_next_hop(&before["R0"], lan), direct);

    let link = e.find_link("R0", "Fa0/1").unwrap();
    e.set_link_up(link, false);
    assert_eq!(
        resolve_next_hop(&e.routes()["R0"], lan),
        RouteLookup::Via {
            egress: "Fa0/0",
            next_hop: Some("10.0.1.2".parse().unwrap())
        }
    );
    e.set_link_up(link, true);
    assert_eq!(e.routes(), &before);
}

/// Device owning an address, if any.
fn owner(m: &NetworkModel, address: Ipv4Addr) -> Option<String> {
    m.owner_of(address).map(|id| m.attach(id).device.clone())
}

/// Follows next hops from `from` toward `dst`; returns the number of routed
/// hops taken, or None when the walk dead-ends or revisits a device.
fn walk(
    m: &NetworkModel,
    routes: &BTreeMap<String, RoutingTable>,
    from: &str,
    dst: Ipv4Addr,
) -> Option<usize> {
    let target = owner(m, dst)?;
    let mut at = from.to_string();
    let mut seen = vec![at.clone()];
    loop {
        if at == target {
            return Some(seen.len() - 1);
        }
        match resolve_next_hop(routes.get(&at)?, dst) {
            RouteLookup::Via { next_hop: None, .. } => return Some(seen.len()),
            RouteLookup::Via {
                next_hop: Some(hop),
                ..
            } => {
                at = owner(m, hop)?;
                if seen.contains(&at) {
                    return None;
                }
                seen.push(at.clone());
            }
            RouteLookup::Unreachable => return None,
        }
    }
}

/// A connected router graph: a random spanning tree plus extra edges, every
/// link on its own /30, every router with a /24 LAN.
fn router_graph() -> impl Strategy<Value = String> {
    (2usize..8)
        .prop_flat_map(|n| {
            let parents: Vec<_> = (1..n).map(|i| 0..i).collect();
            let extra = proptest::collection::vec((0..n, 0..n), 0..n);
            let speeds =
                proptest::collection::vec(prop_oneof![Just(10u32), Just(100), Just(1000)], 2 * n);
            (Just(n), parents, extra, speeds)
        })
        .prop_map(|(n, parents, extra, speeds)| {
            let mut edges: Vec<(usize, usize)> = parents
                .into_iter()
                .enumerate()
                .map(|(i, p)| (p, i + 1))
                .collect();
            for (a, b) in extra {
                let (a, b) = (a.min(b), a.max(b));
                if a != b && !edges.contains(&(a, b)) && !edges.contains(&(b, a)) {
                    edges.push((a, b));
                }
            }
            let mut ifaces: Vec<Vec<String>> = (0..n)
                .map(|r| {
                    vec![format!(
                        " interface lan0\n  ip address 192.168.{r}.1 255.255.255.0"
                    )]
                })
                .collect();
            let mut links = String::new();
            for (k, &(a, b)) in edges.iter().enumerate() {
                let base = 4 * k as u32;
                let (x, y) = (base >> 8, base & 0xff);
                ifaces[a].push(format!(
                    " interface e{k}\n  ip address 10.{x}.{y}.1 255.255.255.252",
                    y = y
                ));
                ifaces[b].push(format!(
                    " interface e{k}\n  ip address 10.{x}.{}.2 255.255.255.252",
                    y
                ));
                let mbps = speeds[k % speeds.len()];
                writeln!(
                    links,
                    "link R{a}:e{k} R{b}:e{k} bandwidth {mbps}mbps delay 0ms queue 64"
                )
                .unwrap();
            }
            let mut text = String::new();
            for (r, list) in ifaces.iter().enumerate() {
                writeln!(text, "device R{r} router").unwrap();
                for i in list {
                    writeln!(text, "{i}").unwrap();
                }
                writeln!(
                    text,
                    "device H{r} host\n interface eth0\n  ip address 192.168.{r}.10 255.255.255.0"
                )
                .unwrap();
                writeln!(
                    links,
                    "link R{r}:lan0 H{r}:eth0 bandwidth 100mbps delay 0ms queue 64"
                )
                .unwrap();
            }
            text + &links
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_topologies_round_trip(text in router_graph()) {
        let first = parse_topology(&text).unwrap();
        let again = parse_topology(&emit_topology(&first)).unwrap();
        prop_assert_eq!(first, again);
    }

    #[test]
    fn routing_is_deterministic(text in router_graph()) {
        let m = model(&text);
        prop_assert_eq!(compute_routes(&m), compute_routes(&m));
    }

    #[test]
    fn next_hops_reach_every_lan_without_loops(text in router_graph()) {
        let m = model(&text);
        let routes = compute_routes(&m);
        let routers = m.topology().devices.iter().filter(|d| d.name.starts_with('R')).count();
        let l3 = m.topology().devices.len();
        for from in 0..routers {
            for to in 0..routers {
                let dst = Ipv4Addr::new(192, 168, to as u8, 10);
                let hops = walk(&m, &routes, &format!("R{from}"), dst);
                prop_assert!(hops.is_some(), "R{} cannot reach {}", from, dst);
                prop_assert!(hops.unwrap() <= l3, "R{} -> {} took {:?} hops", from, dst, hops);
            }
        }
    }
}

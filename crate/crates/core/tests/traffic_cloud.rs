use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use labbench_core::cloud::{Admission, VmState};
use labbench_core::topology::parse_topology;
use labbench_core::traffic::{
    emit_workload, fit_empirical, generate_workload, parse_workload, ArrivalModel, Destination,
    RequestKind, SizeDistribution,
};

fn dst() -> Destination {
    Destination::parse("VM1_file:files").unwrap()
}

#[test]
fn empirical_mean_converges() {
    let observed = [
        512u64, 512, 4096, 4096, 4096, 65536, 1_048_576, 200, 200, 200, 200, 9000,
    ];
    let dist = fit_empirical(&observed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 100_000;
    let mean = (0..n).map(|_| dist.sample(&mut rng) as f64).sum::<f64>() / n as f64;
    let expected = observed.iter().sum::<u64>() as f64 / observed.len() as f64;
    assert!((dist.mean() - expected).abs() < 1e-9 * expected);
    assert!(
        (mean - expected).abs() / expected <= 0.02,
        "sample mean {mean} vs {expected}"
    );
}

proptest! {
    #[test]
    fn generation_is_a_pure_function_of_its_arguments(
        seed in any::<u64>(),
        rate in 0.1..50.0f64,
        count in 0usize..200,
    ) {
        let dist = SizeDistribution::lognormal(8.0, 1.5).unwrap();
        let make = || generate_workload(
            &dist, ArrivalModel::poisson(rate).unwrap(), count, "PC1", &dst(), RequestKind::File, 3, seed,
        ).unwrap();
        let (a, b) = (make(), make());
        prop_assert_eq!(a.entries(), b.entries());
        prop_assert_eq!(a.len(), count);
        prop_assert!(a.entries().windows(2).all(|w| w[0].t <= w[1].t));
        prop_assert!(a.entries().iter().all(|e| e.request_size > 0 && e.t >= 0.0));
    }

    #[test]
    fn workload_text_round_trips(seed in any::<u64>(), count in 0usize..50) {
        let dist = SizeDistribution::empirical(&[(100, 1.0), (1500, 2.0), (70000, 0.5)]).unwrap();
        let w = generate_workload(
            &dist, ArrivalModel::poisson(3.0).unwrap(), count, "PC1", &dst(), RequestKind::Query, 0, seed,
        ).unwrap();
        let again = parse_workload(&emit_workload(&w)).unwrap();
        prop_assert_eq!(again.entries(), w.entries());
        prop_assert_eq!(again.seed, w.seed);
    }

    #[test]
    fn empirical_weights_are_frequencies(samples in proptest::collection::vec(1u64..20, 1..100)) {
        let dist = fit_empirical(&samples).unwrap();
        let SizeDistribution::Empirical(e) = &dist else { panic!("{dist:?}") };
        let total: f64 = e.atoms().iter().map(|a| a.1).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        for &(size, w) in e.atoms() {
            let count = samples.iter().filter(|&&s| s == size).count();
            prop_assert!((w - count as f64 / samples.len() as f64).abs() < 1e-12);
        }
    }
}

fn vm(cores: u32, ram: &str, cpu_fixed: f64, per_byte: f64, footprint: u64, kind: &str) -> VmState {
    let text = format!(
        "device S server\n cores 8\n ram 16GiB\n disk 1000000\n interface eth0\n  ip address 10.0.0.2 255.255.255.0\n\
         vm V host S cores {cores} ram {ram} ip 10.0.0.3\n\
         service V s {kind} cpu_fixed {cpu_fixed} cpu_per_byte {per_byte} footprint {footprint} resp mult:1\n"
    );
    let topo = parse_topology(&text).unwrap();
    VmState::new(topo.vm("V").unwrap().clone(), 1e6)
}

/// Admits requests at their arrival times and runs the VM dry. Returns
/// (flow, completion time, consumed core-seconds) and the largest RAM use
/// seen against the allocation.
fn drive(vm: &mut VmState, arrivals: &[(f64, u64)]) -> (Vec<(u64, f64, f64)>, u64, u64) {
    let mut done = Vec::new();
    let (mut now, mut next, mut peak) = (0.0, 0, 0);
    loop {
        let due = vm.service_progress(now);
        let arrival = arrivals.get(next).map(|a| a.0);
        now = match (due, arrival) {
            (Some(d), Some(a)) => d.min(a),
            (d, a) => match d.or(a) {
                Some(t) => t,
                None => break,
            },
        };
        for c in vm.complete_due(now) {
            done.push((c.flow_id, now, c.consumed));
        }
        while next < arrivals.len() && arrivals[next].0 <= now {
            let _ = vm
                .admit_request(now, next as u64, "s", arrivals[next].1)
                .unwrap();
            next += 1;
            peak = peak.max(vm.metrics().ram_used);
        }
    }
    (done, peak, vm.metrics().ram_alloc)
}

fn arrivals() -> impl Strategy<Value = Vec<(f64, u64)>> {
    proptest::collection::vec((0u32..3000, 1u64..200_000), 1..25).prop_map(|mut v| {
        v.sort();
        v.into_iter()
            .map(|(ms, size)| (f64::from(ms) / 1000.0, size))
            .collect()
    })
}

proptest! {
    #[test]
    fn processor_sharing_redistributes_time_not_work(
        arrivals in arrivals(),
        cores in 1u32..4,
        cpu_fixed in 0.001..0.5f64,
        per_byte in 0.0..0.000001f64,
    ) {
        let mut v = vm(cores, "4GiB", cpu_fixed, per_byte, 0, "db");
        let (done, _, _) = drive(&mut v, &arrivals);
        prop_assert_eq!(done.len(), arrivals.len());
        for &(flow, at, consumed) in &done {
            let (t0, size) = arrivals[flow as usize];
            let work = cpu_fixed + per_byte * size as f64;
            prop_assert!((consumed - work).abs() <= 1e-9 * work.max(1.0), "flow {} consumed {} of {}", flow, consumed, work);
            // never faster than a dedicated core
            prop_assert!(at - t0 >= work - 1e-9);
        }
    }

    #[test]
    fn file_service_waits_for_cpu_and_disk(arrivals in arrivals(), cpu_fixed in 0.0..0.2f64) {
        let mut v = vm(1, "4GiB", cpu_fixed, 0.0, 0, "file");
        let (done, _, _) = drive(&mut v, &arrivals);
        prop_assert_eq!(done.len(), arrivals.len());
        for &(flow, at, _) in &done {
            let (t0, size) = arrivals[flow as usize];
            prop_assert!(at - t0 >= cpu_fixed.max(size as f64 / 1e6) - 1e-9);
        }
    }

    #[test]
    fn ram_in_use_never_exceeds_allocation(arrivals in arrivals(), footprint in 1u64..600) {
        let mut v = vm(2, "1000", 0.05, 0.0, footprint, "db");
        let (done, peak, alloc) = drive(&mut v, &arrivals);
        prop_assert!(peak <= alloc);
        prop_assert_eq!(done.len() as u64 + v.metrics().rejects_ram, arrivals.len() as u64);
    }
}

#[test]
fn one_gigabyte_vm_rejects_second_600_megabyte_request() {
    let mut v = vm(1, "1000000000", 0.5, 0.0, 600_000_000, "db");
    assert_eq!(
        v.admit_request(0.0, 0, "s", 10).unwrap(),
        Admission::Accepted
    );
    assert_eq!(
        v.admit_request(0.0, 1, "s", 10).unwrap(),
        Admission::Rejected
    );
    assert_eq!(v.metrics().rejects_ram, 1);
    assert!(v.admit_request(0.0, 2, "nope", 10).is_err());
}

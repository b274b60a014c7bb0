//! Virtual machines serving file and database requests.
//!
//! CPU is shared by egalitarian processor sharing with a per-request cap of
//! one core: with `k` requests in their CPU phase on a VM of `c` cores, each
//! progresses at `min(c, k) / k` core-seconds per second. RAM is reserved per
//! request on admission; a request that does not fit is rejected, not queued.
//! File requests additionally cannot finish before `response / disk_rate`
//! seconds after admission (CPU and disk overlap).

use thiserror::Error;

use crate::topology::{ServiceKind, VmSpec};

/// Remaining work at or below this is treated as finished.
const WORK_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CloudError {
    #[error("vm `{vm}` has no service `{service}`")]
    UnknownService { vm: String, service: String },
    #[error("vm `{vm}`: {reason}")]
    InvalidResource { vm: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveRequest {
    pub flow_id: u64,
    pub arrived: f64,
    pub work: f64,
    pub remaining_work: f64,
    pub consumed: f64,
    pub ram_held: u64,
    pub response_size: u64,
    /// earliest completion allowed by the disk; `arrived` for db requests
    pub disk_ready_at: f64,
}

impl ActiveRequest {
    fn in_cpu_phase(&self) -> bool {
        self.remaining_work > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletedRequest {
    pub flow_id: u64,
    pub arrived: f64,
    pub response_size: u64,
    /// core-seconds actually delivered to the request
    pub consumed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VmMetrics {
    pub cpu_alloc: f64,
    pub cpu_used: f64,
    pub ram_alloc: u64,
    pub ram_used: u64,
    pub active_requests: usize,
    pub rejects_ram: u64,
}

impl VmMetrics {
    /// Allocated but idle cores.
    pub fn cpu_reserved(&self) -> f64 {
        self.cpu_alloc - self.cpu_used
    }

    pub fn ram_reserved(&self) -> u64 {
        self.ram_alloc - self.ram_used.min(self.ram_alloc)
    }
}

#[derive(Debug, Clone)]
pub struct VmState {
    spec: VmSpec,
    disk_rate: f64,
    active: Vec<ActiveRequest>,
    ram_in_use: u64,
    rejects: u64,
    last_update: f64,
}

impl VmState {
    pub fn new(spec: VmSpec, disk_rate: f64) -> Self {
        Self {
            spec,
            disk_rate,
            active: Vec::new(),
            ram_in_use: 0,
            rejects: 0,
            last_update: 0.0,
        }
    }

    pub fn spec(&self) -> &VmSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn active(&self) -> &[ActiveRequest] {
        &self.active
    }

    /// Admits a request if its RAM footprint fits in the unreserved allocation.
    pub fn admit_request(
        &mut self,
        now: f64,
        flow_id: u64,
        service: &str,
        request_size: u64,
    ) -> Result<Admission, CloudError> {
        let svc = self
            .spec
            .service(service)
            .ok_or_else(|| CloudError::UnknownService {
                vm: self.spec.name.clone(),
                service: service.to_string(),
            })?
            .clone();
        self.advance(now);
        if self.ram_in_use + svc.ram_footprint > self.spec.alloc_ram {
            self.rejects += 1;
            return Ok(Admission::Rejected);
        }
        let response_size = svc.response.response_size(request_size);
        let work = svc.cpu_fixed + svc.cpu_per_byte * response_size as f64;
        let disk_ready_at = match svc.kind {
            ServiceKind::File => now + response_size as f64 / self.disk_rate,
            ServiceKind::Db => now,
        };
        self.ram_in_use += svc.ram_footprint;
        self.active.push(ActiveRequest {
            flow_id,
            arrived: now,
            work,
            remaining_work: if work > WORK_EPSILON { work } else { 0.0 },
            consumed: if work > WORK_EPSILON { 0.0 } else { work },
            ram_held: svc.ram_footprint,
            response_size,
            disk_ready_at,
        });
        Ok(Admission::Accepted)
    }

    fn cpu_rate(&self) -> Option<f64> {
        let k = self.active.iter().filter(|r| r.in_cpu_phase()).count();
        (k > 0).then(|| f64::from(self.spec.alloc_cores).min(k as f64) / k as f64)
    }

    fn advance(&mut self, now: f64) {
        let dt = now - self.last_update;
        if dt > 0.0 {
            if let Some(rate) = self.cpu_rate() {
                for r in self.active.iter_mut().filter(|r| r.in_cpu_phase()) {
                    let served = rate * dt;
                    r.remaining_work -= served;
                    r.consumed += served;
                    if r.remaining_work <= WORK_EPSILON * r.work.max(1.0) {
                        r.remaining_work = 0.0;
                        r.consumed = r.work;
                    }
                }
            }
        }
        self.last_update = self.last_update.max(now);
    }

    /// Brings every request's remaining work up to `now` and returns the time
    /// of the next completion, if any request is active.
    pub fn service_progress(&mut self, now: f64) -> Option<f64> {
        self.advance(now);
        let cpu_next = self.cpu_rate().and_then(|rate| {
            self.active
                .iter()
                .filter(|r| r.in_cpu_phase())
                .map(|r| now + r.remaining_work / rate)
                .min_by(f64::total_cmp)
        });
        let disk_next = self
            .active
            .iter()
            .filter(|r| !r.in_cpu_phase())
            .map(|r| r.disk_ready_at.max(now))
            .min_by(f64::total_cmp);
        match (cpu_next, disk_next) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Removes the requests finished by `now`, releasing their RAM.
    pub fn complete_due(&mut self, now: f64) -> Vec<CompletedRequest> {
        self.advance(now);
        // work too small to move the clock any further counts as done
        if let Some(rate) = self.cpu_rate() {
            for r in self.active.iter_mut().filter(|r| r.in_cpu_phase()) {
                if now + r.remaining_work / rate <= now {
                    r.remaining_work = 0.0;
                    r.consumed = r.work;
                }
            }
        }
        let mut done = Vec::new();
        let mut i = 0;
        while i < self.active.len() {
            let r = &self.active[i];
            if !r.in_cpu_phase() && r.disk_ready_at <= now {
                let r = self.active.remove(i);
                self.ram_in_use -= r.ram_held;
                done.push(CompletedRequest {
                    flow_id: r.flow_id,
                    arrived: r.arrived,
                    response_size: r.response_size,
                    consumed: r.consumed,
                });
            } else {
                i += 1;
            }
        }
        done
    }

    /// Changes the core allocation from `now` onward.
    pub fn set_cores(&mut self, now: f64, cores: u32) -> Result<(), CloudError> {
        if cores == 0 {
            return Err(CloudError::InvalidResource {
                vm: self.spec.name.clone(),
                reason: "cores must be at least 1".into(),
            });
        }
        self.advance(now);
        self.spec.alloc_cores = cores;
        Ok(())
    }

    /// Changes the RAM allocation; it may not drop below what is in use.
    pub fn set_ram(&mut self, ram: u64) -> Result<(), CloudError> {
        if ram < self.ram_in_use {
            return Err(CloudError::InvalidResource {
                vm: self.spec.name.clone(),
                reason: format!("{ram} bytes is below the {} in use", self.ram_in_use),
            });
        }
        self.spec.alloc_ram = ram;
        Ok(())
    }

    pub fn metrics(&self) -> VmMetrics {
        let cpu_active = self.active.iter().filter(|r| r.in_cpu_phase()).count();
        VmMetrics {
            cpu_alloc: f64::from(self.spec.alloc_cores),
            cpu_used: f64::from(self.spec.alloc_cores).min(cpu_active as f64),
            ram_alloc: self.spec.alloc_ram,
            ram_used: self.ram_in_use,
            active_requests: self.active.len(),
            rejects_ram: self.rejects,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{ResponseRule, ServiceSpec};

    const GIB: u64 = 1 << 30;
    const MIB: u64 = 1 << 20;

    fn vm(cores: u32, ram: u64, services: Vec<ServiceSpec>) -> VmState {
        VmState::new(
            VmSpec {
                name: "vm".into(),
                host: "srv".into(),
                alloc_cores: cores,
                alloc_ram: ram,
                address: "10.0.0.10".parse().unwrap(),
                services,
            },
            1e8,
        )
    }

    fn db(cpu_fixed: f64, footprint: u64) -> ServiceSpec {
        ServiceSpec {
            name: "db".into(),
            kind: ServiceKind::Db,
            cpu_fixed,
            cpu_per_byte: 0.0,
            ram_footprint: footprint,
            response: ResponseRule::Fixed(1000),
        }
    }

    /// Drives a VM through arrivals, returning (flow, completion time).
    fn run_ps(state: &mut VmState, arrivals: &[(f64, u64)]) -> Vec<(u64, f64)> {
        let mut pending: Vec<(f64, u64)> = arrivals.to_vec();
        pending.reverse();
        let mut now = 0.0;
        let mut out = Vec::new();
        loop {
            let next_done = state.service_progress(now);
            let next_arrival = pending.last().map(|a| a.0);
            match (next_done, next_arrival) {
                (None, None) => break,
                (Some(d), a) if a.is_none_or(|a| d < a) => {
                    now = d;
                    for c in state.complete_due(now) {
                        out.push((c.flow_id, now));
                    }
                }
                (_, Some(a)) => {
                    now = a;
                    let (_, flow) = pending.pop().unwrap();
                    state.admit_request(now, flow, "db", 100).unwrap();
                }
                (Some(_), None) => unreachable!(),
            }
        }
        out
    }

    #[test]
    fn two_requests_share_one_core() {
        let mut state = vm(1, GIB, vec![db(1.0, 0)]);
        let done = run_ps(&mut state, &[(0.0, 1), (0.0, 2)]);
        assert_eq!(done, vec![(1, 2.0), (2, 2.0)]);
    }

    #[test]
    fn single_request_capped_at_one_core() {
        let mut state = vm(2, GIB, vec![db(1.0, 0)]);
        let done = run_ps(&mut state, &[(0.0, 1)]);
        assert_eq!(done, vec![(1, 1.0)]);
    }

    #[test]
    fn idle_vm_schedules_nothing() {
        let mut state = vm(2, GIB, vec![db(1.0, 0)]);
        assert_eq!(state.service_progress(5.0), None);
        let m = state.metrics();
        assert_eq!((m.cpu_used, m.ram_used, m.active_requests), (0.0, 0, 0));
    }

    #[test]
    fn ram_admission() {
        let mut state = vm(1, GIB, vec![db(1.0, 600 * MIB)]);
        assert_eq!(
            state.admit_request(0.0, 1, "db", 10).unwrap(),
            Admission::Accepted
        );
        assert_eq!(
            state.admit_request(0.0, 2, "db", 10).unwrap(),
            Admission::Rejected
        );
        assert_eq!(state.metrics().rejects_ram, 1);
        assert_eq!(state.metrics().ram_used, 600 * MIB);
    }

    #[test]
    fn zero_footprint_always_admitted() {
        let mut state = vm(1, 1, vec![db(1.0, 0)]);
        for flow in 0..100 {
            assert_eq!(
                state.admit_request(0.0, flow, "db", 10).unwrap(),
                Admission::Accepted
            );
        }
    }

    #[test]
    fn unknown_service() {
        let mut state = vm(1, GIB, vec![db(1.0, 0)]);
        assert!(matches!(
            state.admit_request(0.0, 1, "search", 10),
            Err(CloudError::UnknownService { .. })
        ));
    }

    #[test]
    fn cpu_used_follows_min_rule() {
        let mut state = vm(2, GIB, vec![db(1.0, 0)]);
        for flow in 0..3 {
            state.admit_request(0.0, flow, "db", 10).unwrap();
        }
        let m = state.metrics();
        assert_eq!((m.cpu_alloc, m.cpu_used, m.active_requests), (2.0, 2.0, 3));
        assert_eq!(m.cpu_reserved(), 0.0);
    }

    #[test]
    fn file_requests_wait_for_disk() {
        let file = ServiceSpec {
            name: "db".into(),
            kind: ServiceKind::File,
            cpu_fixed: 0.001,
            cpu_per_byte: 0.0,
            ram_footprint: 0,
            response: ResponseRule::Fixed(50_000_000),
        };
        // 5e7 bytes at 1e8 B/s: disk bound 0.5 s dominates 1 ms of CPU
        let mut state = vm(1, GIB, vec![file]);
        let done = run_ps(&mut state, &[(1.0, 7)]);
        assert_eq!(done, vec![(7, 1.5)]);
    }

    #[test]
    fn core_change_takes_effect_immediately() {
        let mut state = vm(2, GIB, vec![db(2.0, 0)]);
        state.admit_request(0.0, 1, "db", 1).unwrap();
        state.admit_request(0.0, 2, "db", 1).unwrap();
        // one core each until t=1, then half a core each: 1.0 left takes 2 s
        assert_eq!(state.service_progress(0.0), Some(2.0));
        state.set_cores(1.0, 1).unwrap();
        assert_eq!(state.service_progress(1.0), Some(3.0));
        assert!(state.set_cores(1.0, 0).is_err());
    }

    #[test]
    fn ram_shrink_below_usage_rejected() {
        let mut state = vm(1, GIB, vec![db(1.0, 600 * MIB)]);
        state.admit_request(0.0, 1, "db", 1).unwrap();
        assert!(state.set_ram(500 * MIB).is_err());
        state.set_ram(700 * MIB).unwrap();
        assert_eq!(state.metrics().ram_alloc, 700 * MIB);
    }
}

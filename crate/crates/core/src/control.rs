//! Scheduled control plane: a plan of timed actions on links, VMs and flow
//! priorities, applied inside the engine loop.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::emulation::Engine;
use crate::units::{parse_bandwidth, parse_bytes, parse_delay};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionKind {
    SetBandwidth,
    SetDelay,
    SetQueueCapacity,
    SetPriority,
    LinkDown,
    LinkUp,
    SetVmCores,
    SetVmRam,
}

impl ActionKind {
    pub const ALL: [ActionKind; 8] = [
        ActionKind::SetBandwidth,
        ActionKind::SetDelay,
        ActionKind::SetQueueCapacity,
        ActionKind::SetPriority,
        ActionKind::LinkDown,
        ActionKind::LinkUp,
        ActionKind::SetVmCores,
        ActionKind::SetVmRam,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::SetBandwidth => "set_bandwidth",
            ActionKind::SetDelay => "set_delay",
            ActionKind::SetQueueCapacity => "set_queue_capacity",
            ActionKind::SetPriority => "set_priority",
            ActionKind::LinkDown => "link_down",
            ActionKind::LinkUp => "link_up",
            ActionKind::SetVmCores => "set_vm_cores",
            ActionKind::SetVmRam => "set_vm_ram",
        }
    }

    fn takes_value(self) -> bool {
        !matches!(self, ActionKind::LinkDown | ActionKind::LinkUp)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    /// `device:iface`, naming the link attached to that interface
    Link {
        device: String,
        interface: String,
    },
    Vm(String),
    Flow(u64),
    /// workload `src` and/or `dst` as written in the workload file
    Traffic {
        src: Option<String>,
        dst: Option<String>,
    },
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Link { device, interface } => write!(f, "link={device}:{interface}"),
            Target::Vm(name) => write!(f, "vm={name}"),
            Target::Flow(id) => write!(f, "flow={id}"),
            Target::Traffic { src, dst } => {
                let parts: Vec<String> = [("src", src), ("dst", dst)]
                    .into_iter()
                    .filter_map(|(k, v)| v.as_ref().map(|v| format!("{k}={v}")))
                    .collect();
                f.write_str(&parts.join(" "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlAction {
    pub t: f64,
    pub kind: ActionKind,
    pub target: Target,
    /// bps, seconds, packets, priority, cores or bytes depending on `kind`
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ControlPlan {
    actions: Vec<ControlAction>,
}

impl ControlPlan {
    pub fn actions(&self) -> &[ControlAction] {
        &self.actions
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown target `{0}`")]
    UnknownTarget(String),
    #[error("{0}")]
    Rejected(String),
}

fn parse_value(kind: ActionKind, token: &str) -> Result<f64, String> {
    let integer = |token: &str| {
        token
            .parse::<u64>()
            .map(|n| n as f64)
            .map_err(|_| format!("`{token}` is not a non-negative integer"))
    };
    match kind {
        ActionKind::SetBandwidth => {
            let bps = parse_bandwidth(token)?;
            if bps > 0.0 {
                Ok(bps)
            } else {
                Err("bandwidth must be positive".into())
            }
        }
        ActionKind::SetDelay => parse_delay(token),
        ActionKind::SetQueueCapacity => integer(token),
        ActionKind::SetPriority => match integer(token)? {
            p if p <= 7.0 => Ok(p),
            _ => Err("priority must be 0-7".into()),
        },
        ActionKind::SetVmCores => match integer(token)? {
            c if c >= 1.0 && c <= f64::from(u32::MAX) => Ok(c),
            _ => Err("cores must be at least 1".into()),
        },
        ActionKind::SetVmRam => parse_bytes(token).map(|b| b as f64),
        ActionKind::LinkDown | ActionKind::LinkUp => Err("takes no value".into()),
    }
}

/// Parses a plan: `t=<s> <kind> <target-key>=<id> [value=<n><unit>]` per
/// line. Target keys are `link` (`device:iface`), `vm`, and for
/// `set_priority` either `flow` or `src`/`dst`.
pub fn parse_control(text: &str) -> Result<ControlPlan, ControlError> {
    let mut actions = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |reason: String| ControlError::Syntax { line, reason };
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        let Some(first) = tokens.next() else { continue };
        let t: f64 = first
            .strip_prefix("t=")
            .ok_or_else(|| err(format!("expected `t=<seconds>`, found `{first}`")))?
            .parse()
            .map_err(|_| err(format!("bad time in `{first}`")))?;
        if !t.is_finite() || t < 0.0 {
            return Err(err("t must be finite and >= 0".into()));
        }
        let kind_token = tokens
            .next()
            .ok_or_else(|| err("missing action kind".into()))?;
        let kind = ActionKind::ALL
            .into_iter()
            .find(|k| k.as_str() == kind_token)
            .ok_or_else(|| err(format!("unknown action `{kind_token}`")))?;

        let mut link = None;
        let mut vm = None;
        let mut flow = None;
        let mut src = None;
        let mut dst = None;
        let mut value = None;
        for token in tokens {
            let (key, v) = token
                .split_once('=')
                .ok_or_else(|| err(format!("`{token}` is not key=value")))?;
            let slot = match key {
                "link" => &mut link,
                "vm" => &mut vm,
                "flow" => &mut flow,
                "src" => &mut src,
                "dst" => &mut dst,
                "value" => &mut value,
                _ => return Err(err(format!("unknown key `{key}`"))),
            };
            if v.is_empty() || slot.replace(v.to_string()).is_some() {
                return Err(err(format!("`{key}` empty or given twice")));
            }
        }

        let target = match kind {
            ActionKind::SetVmCores | ActionKind::SetVmRam => {
                if link.is_some() || flow.is_some() || src.is_some() || dst.is_some() {
                    return Err(err(format!("{} takes only vm=", kind.as_str())));
                }
                Target::Vm(vm.ok_or_else(|| err("missing vm=".into()))?)
            }
            ActionKind::SetPriority => {
                if link.is_some() || vm.is_some() {
                    return Err(err("set_priority takes flow= or src=/dst=".into()));
                }
                match (flow, src, dst) {
                    (Some(f), None, None) => {
                        Target::Flow(f.parse().map_err(|_| err(format!("bad flow id `{f}`")))?)
                    }
                    (None, src, dst) if src.is_some() || dst.is_some() => {
                        Target::Traffic { src, dst }
                    }
                    _ => return Err(err("set_priority takes flow= or src=/dst=".into())),
                }
            }
            _ => {
                if vm.is_some() || flow.is_some() || src.is_some() || dst.is_some() {
                    return Err(err(format!("{} takes only link=", kind.as_str())));
                }
                let spec = link.ok_or_else(|| err("missing link=".into()))?;
                let (device, interface) = spec
                    .split_once(':')
                    .filter(|(d, i)| !d.is_empty() && !i.is_empty())
                    .ok_or_else(|| err(format!("`{spec}` is not device:iface")))?;
                Target::Link {
                    device: device.to_string(),
                    interface: interface.to_string(),
                }
            }
        };

        let value = match (kind.takes_value(), value) {
            (true, Some(v)) => Some(parse_value(kind, &v).map_err(err)?),
            (true, None) => return Err(err(format!("{} needs value=", kind.as_str()))),
            (false, Some(_)) => return Err(err(format!("{} takes no value", kind.as_str()))),
            (false, None) => None,
        };

        if !seen.insert((t.to_bits(), target.clone(), kind)) {
            return Err(err(format!(
                "duplicate {} on {target} at t={t}",
                kind.as_str()
            )));
        }
        actions.push(ControlAction {
            t,
            kind,
            target,
            value,
        });
    }
    actions.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(ControlPlan { actions })
}

/// Checks every target against the engine's network and VMs.
pub fn bind(plan: &ControlPlan, engine: &Engine) -> Result<(), ControlError> {
    for action in plan.actions() {
        let known = match &action.target {
            Target::Link { device, interface } => engine.find_link(device, interface).is_some(),
            Target::Vm(name) => engine.vm(name).is_some(),
            Target::Flow(_) | Target::Traffic { .. } => true,
        };
        if !known {
            return Err(ControlError::UnknownTarget(action.target.to_string()));
        }
    }
    Ok(())
}

/// Applies one action now. Link and VM targets must exist; parameter
/// changes that the running state cannot honor are rejected.
pub fn apply_action(engine: &mut Engine, action: &ControlAction) -> Result<(), ControlError> {
    let link = |engine: &Engine| match &action.target {
        Target::Link { device, interface } => engine
            .find_link(device, interface)
            .ok_or_else(|| ControlError::UnknownTarget(action.target.to_string())),
        _ => Err(ControlError::UnknownTarget(action.target.to_string())),
    };
    let vm = || match &action.target {
        Target::Vm(name) => Ok(name.clone()),
        _ => Err(ControlError::UnknownTarget(action.target.to_string())),
    };
    let value = action.value.unwrap_or(0.0);
    match action.kind {
        ActionKind::SetBandwidth => {
            let l = link(engine)?;
            engine.set_bandwidth(l, value);
        }
        ActionKind::SetDelay => {
            let l = link(engine)?;
            engine.set_delay(l, value);
        }
        ActionKind::SetQueueCapacity => {
            let l = link(engine)?;
            engine.set_queue_capacity(l, value as usize);
        }
        ActionKind::LinkDown => {
            let l = link(engine)?;
            engine.set_link_up(l, false);
        }
        ActionKind::LinkUp => {
            let l = link(engine)?;
            engine.set_link_up(l, true);
        }
        ActionKind::SetPriority => {
            engine.set_priority(&action.target, value as u8)?;
        }
        ActionKind::SetVmCores => {
            engine
                .set_vm_cores(&vm()?, value as u32)
                .map_err(|e| ControlError::Rejected(e.to_string()))?;
        }
        ActionKind::SetVmRam => {
            engine
                .set_vm_ram(&vm()?, value as u64)
                .map_err(|e| ControlError::Rejected(e.to_string()))?;
        }
    }
    Ok(())
}

use serde::Serialize;

use super::{DistError, DistributedCircuit};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MessageEvent {
    pub invocation: usize,
    pub step: u8,
    pub sender: String,
    pub receiver: String,
    pub bit: usize,
    pub value: u8,
}

/// Classical messages of one execution, in program order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct MessageTrace {
    pub events: Vec<MessageEvent>,
}

impl MessageTrace {
    /// Reads message payloads out of the classical bits of one run.
    pub fn from_bits(dc: &DistributedCircuit, bits: &[Option<bool>]) -> Result<Self, DistError> {
        let mut ordered: Vec<(usize, MessageEvent)> = Vec::new();
        for (n, inv) in dc.invocations.iter().enumerate() {
            for m in &inv.messages {
                let value = bits.get(m.bit).copied().flatten().ok_or(DistError::MissingMessage { bit: m.bit })?;
                ordered.push((
                    m.measure_gate,
                    MessageEvent {
                        invocation: n,
                        step: m.step,
                        sender: dc.partition.node_name(m.sender).to_string(),
                        receiver: dc.partition.node_name(m.receiver).to_string(),
                        bit: m.bit,
                        value: value as u8,
                    },
                ));
            }
        }
        ordered.sort_by_key(|(g, _)| *g);
        Ok(MessageTrace { events: ordered.into_iter().map(|(_, e)| e).collect() })
    }

    /// One JSON object per line.
    pub fn to_json_lines(&self) -> String {
        self.events.iter().map(|e| serde_json::to_string(e).expect("event serialization cannot fail") + "\n").collect()
    }

    pub fn count(&self, invocation: usize, step: u8) -> usize {
        self.events.iter().filter(|e| e.invocation == invocation && e.step == step).count()
    }
}

/// Checks every invocation for exactly one step-1 and one step-3 message
/// per remote control, the direction of each message, and the ordering
/// step-1 measurements < step-2 gate < step-3 measurements. Returns the
/// problems found; an empty list means the discipline holds.
pub fn check_discipline(dc: &DistributedCircuit, trace: Option<&MessageTrace>) -> Vec<String> {
    let mut problems = Vec::new();
    for (n, inv) in dc.invocations.iter().enumerate() {
        let remote = inv.remote_controls.len();
        for step in [1u8, 3] {
            let msgs: Vec<_> = inv.messages.iter().filter(|m| m.step == step).collect();
            if msgs.len() != remote {
                problems
                    .push(format!("invocation {n}: {} step-{step} messages for {remote} remote controls", msgs.len()));
            }
            for &c in &inv.remote_controls {
                if msgs.iter().filter(|m| m.control == c).count() != 1 {
                    problems.push(format!("invocation {n}: control {c} lacks a single step-{step} message"));
                }
            }
            for m in msgs {
                let home = dc.partition.owner(m.control);
                let (from, to) = if step == 1 { (home, inv.master) } else { (inv.master, home) };
                if m.sender != from || m.receiver != to {
                    problems.push(format!("invocation {n}: step-{step} message on bit {} flows the wrong way", m.bit));
                }
                let ordered = if step == 1 { m.measure_gate < inv.step2_gate } else { m.measure_gate > inv.step2_gate };
                if !ordered {
                    problems.push(format!("invocation {n}: step-{step} measurement out of order"));
                }
            }
        }
        if let Some(t) = trace {
            for step in [1u8, 3] {
                if t.count(n, step) != remote {
                    problems.push(format!("invocation {n}: trace has {} step-{step} events", t.count(n, step)));
                }
            }
        }
    }
    problems
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distnet::{build_distributed_mcu, DistOptions, TargetGate};

    #[test]
    fn trace_from_bits() {
        let dc = build_distributed_mcu(2, 0, TargetGate::Z, DistOptions::default()).unwrap();
        let bits = vec![Some(true), Some(false), Some(false), Some(true)];
        let t = MessageTrace::from_bits(&dc, &bits).unwrap();
        assert_eq!(t.events.len(), 4);
        assert_eq!(t.events[0].sender, "n1");
        assert_eq!(t.events[0].receiver, "master");
        assert_eq!(t.events[3].step, 3);
        assert_eq!(t.events[3].receiver, "n2");
        assert!(check_discipline(&dc, Some(&t)).is_empty());
        let line = t.to_json_lines().lines().next().unwrap().to_string();
        assert_eq!(line, r#"{"invocation":0,"step":1,"sender":"n1","receiver":"master","bit":0,"value":1}"#);
        assert!(matches!(MessageTrace::from_bits(&dc, &bits[..2]), Err(DistError::MissingMessage { .. })));
    }

    #[test]
    fn discipline_catches_tampering() {
        let mut dc = build_distributed_mcu(2, 0, TargetGate::X, DistOptions::default()).unwrap();
        dc.invocations[0].messages.pop();
        assert!(!check_discipline(&dc, None).is_empty());
    }
}

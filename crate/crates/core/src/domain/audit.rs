//! Audit trail with an injectable millisecond clock.

use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditEvent {
    Opinion,
    MatrixUpdate,
    Feedback,
    Consensus,
    Termination,
    RlStep,
}

/// One audit line. Field order here is the serialized key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub ts_ms: u64,
    pub case_id: String,
    pub round: u32,
    pub agent_id: String,
    pub event: AuditEvent,
    pub payload: Value,
}

pub const SYSTEM_AGENT: &str = "system";

pub trait Clock: Send {
    fn now_ms(&mut self) -> u64;
}

/// Deterministic clock: starts at `start_ms` and advances `step_ms` per read.
#[derive(Debug, Clone)]
pub struct FixedClock {
    next: u64,
    step: u64,
}

impl FixedClock {
    pub fn new(start_ms: u64, step_ms: u64) -> Self {
        Self {
            next: start_ms,
            step: step_ms,
        }
    }
}

impl Default for FixedClock {
    fn default() -> Self {
        // 2025-01-01T00:00:00Z
        Self::new(1_735_689_600_000, 1)
    }
}

impl Clock for FixedClock {
    fn now_ms(&mut self) -> u64 {
        let t = self.next;
        self.next += self.step;
        t
    }
}

/// Wall clock, clamped so successive reads never go backwards.
#[derive(Debug, Default, Clone)]
pub struct SystemClock {
    last: u64,
}

impl Clock for SystemClock {
    fn now_ms(&mut self) -> u64 {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        self.last = self.last.max(now);
        self.last
    }
}

pub trait AuditSink: Send {
    fn record(&mut self, record: AuditRecord);
}

/// Discards everything; used by training rollouts.
#[derive(Debug, Default)]
pub struct NullSink;

impl AuditSink for NullSink {
    fn record(&mut self, _record: AuditRecord) {}
}

#[derive(Debug, Default)]
pub struct MemorySink {
    pub records: Vec<AuditRecord>,
}

impl AuditSink for MemorySink {
    fn record(&mut self, record: AuditRecord) {
        self.records.push(record);
    }
}

impl MemorySink {
    /// Render as JSONL, one record per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = Vec::new();
        write_jsonl(&mut out, &self.records).expect("writing to a Vec cannot fail");
        String::from_utf8(out).expect("serde_json emits UTF-8")
    }
}

pub fn write_jsonl<W: Write>(mut w: W, records: &[AuditRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Clock + sink bundle threaded through a consultation.
pub struct AuditLog<'a> {
    clock: &'a mut dyn Clock,
    sink: &'a mut dyn AuditSink,
    case_id: String,
}

impl<'a> AuditLog<'a> {
    pub fn new(case_id: &str, clock: &'a mut dyn Clock, sink: &'a mut dyn AuditSink) -> Self {
        Self {
            clock,
            sink,
            case_id: case_id.to_string(),
        }
    }

    pub fn emit(&mut self, round: u32, agent_id: &str, event: AuditEvent, payload: Value) {
        let ts_ms = self.clock.now_ms();
        self.sink.record(AuditRecord {
            ts_ms,
            case_id: self.case_id.clone(),
            round,
            agent_id: agent_id.to_string(),
            event,
            payload,
        });
    }
}

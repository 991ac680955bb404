use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::protocol::{Block, MinerId};

/// What the invariant checks need from a finished run.
#[derive(Debug, Clone)]
pub struct Trace {
    pub delta: f64,
    pub interval: f64,
    pub zeta: u32,
    pub blocks: Vec<Block>,
    pub honest_miners: Vec<MinerId>,
    /// Per honest miner (same order), per block: validation time or +inf.
    pub validated_at: Vec<Vec<f64>>,
    /// Per honest miner: (time, height) at every head change.
    pub head_history: Vec<Vec<(f64, u64)>>,
    /// Time of the last mining event.
    pub end_time: f64,
}

impl Trace {
    pub fn is_honest(&self, m: MinerId) -> bool {
        self.honest_miners.contains(&m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Mined,
    Arrived,
    Executed,
    Validated,
    HeadChanged,
    Released,
}

/// One line of the exported event trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: f64,
    pub event: RecordKind,
    pub miner: u32,
    pub block: u32,
    pub height: u64,
    /// TOLs ahead of the block at this miner (arrivals only, else 0).
    pub queue: u32,
}

/// Writes records as JSON lines.
pub fn write_trace<W: Write>(mut out: W, records: &[TraceRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

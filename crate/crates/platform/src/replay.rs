use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use soo_core::model::Seq;
use soo_core::state::FoldError;
use soo_core::{Event, PlatformState};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("corrupt log at seq {seq}: {reason}")]
    CorruptLog { seq: Seq, reason: String },
    #[error("cannot read log: {0}")]
    Io(String),
}

/// Parses a JSONL log. A line that does not parse, or a seq that is not
/// the next one, is reported with the seq the line should have had.
pub fn read_log(path: &Path) -> Result<Vec<Event>, ReplayError> {
    let file = File::open(path).map_err(|e| ReplayError::Io(e.to_string()))?;
    parse_lines(BufReader::new(file).lines().map(|l| l.map_err(|e| e.to_string())))
}

pub fn parse_log(text: &str) -> Result<Vec<Event>, ReplayError> {
    parse_lines(text.lines().map(|l| Ok(l.to_string())))
}

fn parse_lines(lines: impl Iterator<Item = Result<String, String>>) -> Result<Vec<Event>, ReplayError> {
    let mut events: Vec<Event> = Vec::new();
    for line in lines {
        let expected = events.len() as Seq + 1;
        let line = line.map_err(|reason| ReplayError::CorruptLog {
            seq: expected,
            reason,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let event = Event::from_line(&line).map_err(|e| ReplayError::CorruptLog {
            seq: expected,
            reason: e.to_string(),
        })?;
        if event.seq != expected {
            return Err(ReplayError::CorruptLog {
                seq: expected,
                reason: format!("found seq {}", event.seq),
            });
        }
        events.push(event);
    }
    Ok(events)
}

/// Deterministic fold of a whole log.
pub fn replay(events: &[Event]) -> Result<PlatformState, ReplayError> {
    PlatformState::replay(events).map_err(|e| match e {
        FoldError::SeqGap { expected, .. } => ReplayError::CorruptLog {
            seq: expected,
            reason: e.to_string(),
        },
        FoldError::Inconsistent { seq, .. } => ReplayError::CorruptLog {
            seq,
            reason: e.to_string(),
        },
    })
}

pub fn replay_file(path: &Path) -> Result<PlatformState, ReplayError> {
    replay(&read_log(path)?)
}

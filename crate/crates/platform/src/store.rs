//! Append-only event storage: in memory, or as a line-delimited JSON file
//! that is synced before an append returns.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use soo_core::model::Seq;
use soo_core::Event;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("append out of order: expected seq {expected}, got {got}")]
    OutOfOrder { expected: Seq, got: Seq },
}

/// Durable, ordered event log.
pub trait EventStore: Send {
    /// Persists one event. Returns only once the event is durable.
    fn append(&mut self, event: &Event) -> Result<(), StoreError>;
    fn events(&self) -> Result<Vec<Event>, StoreError>;
    fn last_seq(&self) -> Seq;
}

#[derive(Debug, Default, Clone)]
pub struct MemoryStore {
    events: Vec<Event>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn as_slice(&self) -> &[Event] {
        &self.events
    }
}

fn check_order(last: Seq, event: &Event) -> Result<(), StoreError> {
    if event.seq != last + 1 {
        return Err(StoreError::OutOfOrder {
            expected: last + 1,
            got: event.seq,
        });
    }
    Ok(())
}

impl EventStore for MemoryStore {
    fn append(&mut self, event: &Event) -> Result<(), StoreError> {
        check_order(self.last_seq(), event)?;
        self.events.push(event.clone());
        Ok(())
    }

    fn events(&self) -> Result<Vec<Event>, StoreError> {
        Ok(self.events.clone())
    }

    fn last_seq(&self) -> Seq {
        self.events.last().map_or(0, |e| e.seq)
    }
}

/// JSONL file, one event per line.
#[derive(Debug)]
pub struct FileStore {
    path: PathBuf,
    file: File,
    last: Seq,
}

impl FileStore {
    /// Opens (or creates) a log, positioned after its last event. Existing
    /// content must replay cleanly.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<Event>), crate::replay::ReplayError> {
        let path = path.as_ref().to_path_buf();
        let events = if path.exists() {
            crate::replay::read_log(&path)?
        } else {
            Vec::new()
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| crate::replay::ReplayError::Io(e.to_string()))?;
        let last = events.last().map_or(0, |e| e.seq);
        Ok((FileStore { path, file, last }, events))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl EventStore for FileStore {
    fn append(&mut self, event: &Event) -> Result<(), StoreError> {
        check_order(self.last, event)?;
        let mut line = event.to_line();
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        self.last = event.seq;
        Ok(())
    }

    fn events(&self) -> Result<Vec<Event>, StoreError> {
        let reader = BufReader::new(File::open(&self.path)?);
        let mut out = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(Event::from_line(&line).map_err(std::io::Error::other)?);
        }
        Ok(out)
    }

    fn last_seq(&self) -> Seq {
        self.last
    }
}

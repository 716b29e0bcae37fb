//! Append-only JSON-lines event log.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Session {
        subject: String,
        at: u64,
    },
    Serve {
        subject: String,
        q: u64,
        at: u64,
    },
    /// `chose_a` is already in canonical orientation.
    Answer {
        subject: String,
        q: u64,
        chose_a: bool,
        served_at: u64,
        answered_at: u64,
    },
}

pub struct EventLog {
    file: Option<(File, PathBuf)>,
}

impl EventLog {
    /// A log that keeps nothing on disk.
    pub fn in_memory() -> Self {
        EventLog { file: None }
    }

    /// Opens (or creates) a log and returns the events already in it. A
    /// final line without its newline is a write interrupted by a crash and
    /// is cut off; any other unparsable line is an error.
    pub fn open(path: &Path) -> io::Result<(Self, Vec<Event>)> {
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        let mut text = String::new();
        file.read_to_string(&mut text)?;
        let complete = text.rfind('\n').map_or(0, |i| i + 1);
        if complete < text.len() {
            file.set_len(complete as u64)?;
            file.sync_data()?;
        }
        file.seek(SeekFrom::End(0))?;
        let mut events = Vec::new();
        for (n, line) in text[..complete].lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let event = serde_json::from_str(line).map_err(|e| {
                io::Error::new(io::ErrorKind::InvalidData, format!("{}:{}: {e}", path.display(), n + 1))
            })?;
            events.push(event);
        }
        Ok((
            EventLog {
                file: Some((file, path.to_path_buf())),
            },
            events,
        ))
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_ref().map(|(_, p)| p.as_path())
    }

    /// Writes one event and syncs it to disk before returning.
    pub fn append(&mut self, event: &Event) -> io::Result<()> {
        if let Some((file, _)) = &mut self.file {
            let mut line = serde_json::to_vec(event).expect("events serialize");
            line.push(b'\n');
            file.write_all(&line)?;
            file.sync_data()?;
        }
        Ok(())
    }
}

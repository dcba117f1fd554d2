//! Append-only JSON-lines event log and state snapshots.
//!
//! Each line is one [`Event`]. A batch appended atomically ends with an
//! event whose `commit` is true; events after the last commit belong to a
//! torn write and are treated as corruption.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::event::{Event, EventPayload, SCHEMA_VERSION};
use crate::state::{ApplyError, State};
use crate::time::Timestamp;

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("event log io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("event log corrupt at line {line} (byte {offset}): {reason}")]
    Corrupt {
        line: usize,
        offset: u64,
        reason: String,
    },
    #[error(transparent)]
    Apply(#[from] ApplyError),
    #[error("snapshot error: {0}")]
    Snapshot(String),
}

/// Result of scanning a log file.
#[derive(Debug)]
pub struct Scan {
    /// Events of fully committed batches.
    pub events: Vec<Event>,
    /// Byte length of the committed prefix.
    pub valid_len: u64,
    /// First problem found, as `(line, offset, reason)`.
    pub problem: Option<(usize, u64, String)>,
}

pub fn scan(bytes: &[u8]) -> Scan {
    let mut events = Vec::new();
    let mut pending: Vec<Event> = Vec::new();
    let mut valid_len = 0u64;
    let mut offset = 0usize;
    let mut line_no = 0usize;
    let mut problem = None;
    let mut last_id = 0u64;
    let mut pending_start = (1usize, 0u64);
    while offset < bytes.len() {
        line_no += 1;
        let rest = &bytes[offset..];
        let (line, advance) = match rest.iter().position(|&b| b == b'\n') {
            Some(i) => (&rest[..i], i + 1),
            None => {
                problem = Some((
                    line_no,
                    offset as u64,
                    "line not terminated (torn write)".to_string(),
                ));
                break;
            }
        };
        let parsed = std::str::from_utf8(line)
            .map_err(|e| e.to_string())
            .and_then(|s| serde_json::from_str::<Event>(s).map_err(|e| e.to_string()));
        let event = match parsed {
            Ok(e) => e,
            Err(reason) => {
                problem = Some((line_no, offset as u64, reason));
                break;
            }
        };
        if event.v != SCHEMA_VERSION {
            problem = Some((
                line_no,
                offset as u64,
                format!("unsupported schema version {}", event.v),
            ));
            break;
        }
        if event.id != last_id + 1 {
            problem = Some((
                line_no,
                offset as u64,
                format!("expected event id {}, found {}", last_id + 1, event.id),
            ));
            break;
        }
        if pending.is_empty() {
            pending_start = (line_no, offset as u64);
        }
        last_id = event.id;
        let commit = event.commit;
        pending.push(event);
        offset += advance;
        if commit {
            events.append(&mut pending);
            valid_len = offset as u64;
        }
    }
    if problem.is_none() && !pending.is_empty() {
        problem = Some((
            pending_start.0,
            pending_start.1,
            "incomplete transaction (no commit marker)".to_string(),
        ));
    }
    Scan {
        events,
        valid_len,
        problem,
    }
}

enum Backing {
    Memory(Vec<Event>),
    File { path: PathBuf, file: File },
}

pub struct EventLog {
    backing: Backing,
    last_id: u64,
}

impl EventLog {
    pub fn in_memory() -> Self {
        EventLog {
            backing: Backing::Memory(Vec::new()),
            last_id: 0,
        }
    }

    /// Opens (creating if needed) a log file. With `repair`, a corrupt tail
    /// is truncated to the last committed event; otherwise it is an error.
    pub fn open(path: impl Into<PathBuf>, repair: bool) -> Result<(Self, Vec<Event>), LogError> {
        let path = path.into();
        let bytes = if path.exists() {
            std::fs::read(&path)?
        } else {
            Vec::new()
        };
        let scan = scan(&bytes);
        if let Some((line, offset, reason)) = scan.problem {
            if !repair {
                return Err(LogError::Corrupt {
                    line,
                    offset,
                    reason,
                });
            }
            let f = OpenOptions::new().write(true).open(&path)?;
            f.set_len(scan.valid_len)?;
            f.sync_all()?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let last_id = scan.events.last().map_or(0, |e| e.id);
        Ok((
            EventLog {
                backing: Backing::File { path, file },
                last_id,
            },
            scan.events,
        ))
    }

    pub fn last_id(&self) -> u64 {
        self.last_id
    }

    pub fn path(&self) -> Option<&Path> {
        match &self.backing {
            Backing::Memory(_) => None,
            Backing::File { path, .. } => Some(path),
        }
    }

    /// Builds a batch of events without writing it.
    pub fn stage(&self, payloads: Vec<EventPayload>, at: Timestamp) -> Vec<Event> {
        let n = payloads.len();
        payloads
            .into_iter()
            .enumerate()
            .map(|(i, payload)| Event {
                v: SCHEMA_VERSION,
                id: self.last_id + 1 + i as u64,
                occurred_at: at,
                commit: i + 1 == n,
                payload,
            })
            .collect()
    }

    /// Durably appends a staged batch.
    pub fn write(&mut self, batch: &[Event]) -> Result<(), LogError> {
        let Some(last) = batch.last() else {
            return Ok(());
        };
        match &mut self.backing {
            Backing::Memory(v) => v.extend_from_slice(batch),
            Backing::File { file, .. } => {
                let mut buf = String::new();
                for e in batch {
                    buf.push_str(&e.to_line());
                    buf.push('\n');
                }
                let before = file.metadata()?.len();
                let written = file
                    .write_all(buf.as_bytes())
                    .and_then(|_| file.flush())
                    .and_then(|_| file.sync_data());
                if let Err(e) = written {
                    // Drop the partial batch so later appends stay readable.
                    let _ = file.set_len(before);
                    return Err(e.into());
                }
            }
        }
        self.last_id = last.id;
        Ok(())
    }

    /// Every committed event, from the backing store.
    pub fn events(&self) -> Result<Vec<Event>, LogError> {
        match &self.backing {
            Backing::Memory(v) => Ok(v.clone()),
            Backing::File { path, .. } => {
                let scan = scan(&std::fs::read(path)?);
                match scan.problem {
                    Some((line, offset, reason)) => Err(LogError::Corrupt {
                        line,
                        offset,
                        reason,
                    }),
                    None => Ok(scan.events),
                }
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    v: u32,
    last_event_id: u64,
    state: State,
}

pub fn write_snapshot(path: &Path, state: &State) -> Result<(), LogError> {
    let snap = Snapshot {
        v: SCHEMA_VERSION,
        last_event_id: state.last_event_id,
        state: state.clone(),
    };
    let tmp = path.with_extension("tmp");
    let body = serde_json::to_vec(&snap).map_err(|e| LogError::Snapshot(e.to_string()))?;
    std::fs::write(&tmp, body)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a snapshot; a missing or unreadable file yields `None`.
pub fn read_snapshot(path: &Path) -> Option<State> {
    let bytes = std::fs::read(path).ok()?;
    let snap: Snapshot = serde_json::from_slice(&bytes).ok()?;
    (snap.v == SCHEMA_VERSION && snap.state.last_event_id == snap.last_event_id)
        .then_some(snap.state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reporting::WeeklyReturn;
    use crate::time::parse_instant;

    fn payload(n: usize) -> EventPayload {
        EventPayload::WeeklyReturnGenerated {
            weekly_return: WeeklyReturn {
                moh_area: crate::gazetteer::MohRef {
                    district: "Jaffna".into(),
                    moh_area: "Jaffna".into(),
                },
                epi_week: "2014-W01".parse().unwrap(),
                disease: "dengue".into(),
                suspected_count: n,
                confirmed_count: 0,
                generated_at: parse_instant("2014-01-06T00:00:00Z").unwrap(),
            },
        }
    }

    #[test]
    fn batches_are_gapless_and_committed_at_the_end() {
        let mut log = EventLog::in_memory();
        let at = parse_instant("2014-01-06T00:00:00Z").unwrap();
        let b = log.stage(vec![payload(1), payload(2)], at);
        log.write(&b).unwrap();
        let b = log.stage(vec![payload(3)], at);
        log.write(&b).unwrap();
        let ev = log.events().unwrap();
        assert_eq!(
            ev.iter().map(|e| (e.id, e.commit)).collect::<Vec<_>>(),
            [(1, false), (2, true), (3, true)]
        );
    }

    #[test]
    fn corrupt_tail_is_reported_then_repaired() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let at = parse_instant("2014-01-06T00:00:00Z").unwrap();
        {
            let (mut log, ev) = EventLog::open(&path, false).unwrap();
            assert!(ev.is_empty());
            for i in 0..3 {
                let b = log.stage(vec![payload(i)], at);
                log.write(&b).unwrap();
            }
        }
        let good_len = std::fs::metadata(&path).unwrap().len();
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"v\":1,\"id\":4,\"occ").unwrap();
        drop(f);
        match EventLog::open(&path, false) {
            Err(LogError::Corrupt { line, offset, .. }) => {
                assert_eq!(line, 4);
                assert_eq!(offset, good_len);
            }
            other => panic!("expected corruption, got {:?}", other.map(|(_, e)| e.len())),
        }
        let (log, ev) = EventLog::open(&path, true).unwrap();
        assert_eq!(ev.len(), 3);
        assert_eq!(log.last_id(), 3);
        assert_eq!(std::fs::metadata(&path).unwrap().len(), good_len);
    }

    #[test]
    fn uncommitted_batch_tail_is_dropped_on_repair() {
        let at = parse_instant("2014-01-06T00:00:00Z").unwrap();
        let log = EventLog::in_memory();
        let batch = log.stage(vec![payload(1), payload(2)], at);
        let only_first = format!("{}\n", batch[0].to_line());
        let s = scan(only_first.as_bytes());
        assert!(s.events.is_empty());
        assert_eq!(s.valid_len, 0);
        assert_eq!(s.problem.unwrap().0, 1);
    }

    #[test]
    fn id_gap_is_corruption() {
        let at = parse_instant("2014-01-06T00:00:00Z").unwrap();
        let log = EventLog::in_memory();
        let mut e = log.stage(vec![payload(1)], at).remove(0);
        e.id = 2;
        let s = scan(format!("{}\n", e.to_line()).as_bytes());
        assert!(s.problem.unwrap().2.contains("expected event id 1"));
    }
}

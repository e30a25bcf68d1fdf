//! Event stream data model.
//!
//! A raw data stream is a timestamped sequence of tuples; the tuples of
//! interest are events. Extraction filters a raw stream down to an event
//! stream, and several event streams can be merged into a single one that
//! downstream pattern detection consumes. Values are immutable after
//! construction and safe to share across threads.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid cell identifier carried as an optional event payload.
pub type CellId = u64;

/// Event-type symbol, e.g. `e7` for a synthetic basic event or `CELL_ENTRY`
/// for a GPS fix mapped onto a grid.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventKind(String);

impl EventKind {
    pub fn new(name: impl Into<String>) -> Self {
        EventKind(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EventKind({})", self.0)
    }
}

impl From<&str> for EventKind {
    fn from(s: &str) -> Self {
        EventKind::new(s)
    }
}

/// One timestamped occurrence of interest extracted from a raw stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    /// Opaque source identifier (taxi id, sensor id, `synth`, ...).
    pub stream_id: String,
    /// Extraction index within the stream holding this event; strictly
    /// increasing, renumbered whenever a new stream is formed.
    pub seq_no: u64,
    /// Integer ticks. Real datasets map wall-clock to ticks at ingestion.
    pub timestamp: i64,
    pub kind: EventKind,
    /// Grid cell for GPS-derived events.
    pub payload: Option<CellId>,
}

impl Event {
    /// Identity of this occurrence within one detection run. Two pattern
    /// instances overlap iff they share an identity, not merely equal values.
    pub fn id(&self) -> EventId {
        EventId {
            stream_id: self.stream_id.clone(),
            seq_no: self.seq_no,
        }
    }
}

/// Identity of an event occurrence: source stream plus extraction index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventId {
    pub stream_id: String,
    pub seq_no: u64,
}

/// Ordered sequence of events with valid numbering and timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventStream {
    events: Vec<Event>,
}

impl EventStream {
    /// Build a stream from already-numbered events, checking the ordering
    /// invariants: seq_no strictly increasing, timestamps non-decreasing.
    pub fn new(events: Vec<Event>) -> Result<Self> {
        for pair in events.windows(2) {
            if pair[1].seq_no <= pair[0].seq_no {
                return Err(Error::InvalidStream(format!(
                    "seq_no not strictly increasing at #{}",
                    pair[1].seq_no
                )));
            }
            if pair[1].timestamp < pair[0].timestamp {
                return Err(Error::InvalidStream(format!(
                    "timestamp decreases at seq_no {}",
                    pair[1].seq_no
                )));
            }
        }
        Ok(EventStream { events })
    }

    /// Build a stream from time-ordered events, assigning seq_no 1..n.
    pub fn from_ordered(mut events: Vec<Event>) -> Result<Self> {
        for (i, e) in events.iter_mut().enumerate() {
            e.seq_no = i as u64 + 1;
        }
        EventStream::new(events)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Group events into tumbling windows of `window` ticks, aligned at
    /// multiples of the window length. Yields (window index, position range).
    pub fn tumbling_windows(&self, window: i64) -> Vec<(i64, std::ops::Range<usize>)> {
        assert!(window > 0, "window must be positive");
        let mut out = Vec::new();
        let mut start = 0;
        while start < self.events.len() {
            let widx = self.events[start].timestamp.div_euclid(window);
            let mut end = start + 1;
            while end < self.events.len() && self.events[end].timestamp.div_euclid(window) == widx
            {
                end += 1;
            }
            out.push((widx, start..end));
            start = end;
        }
        out
    }

    /// Keep only the events at positions where `mask` is true, preserving
    /// identities (no renumbering). Used to realize a perturbed view of the
    /// stream for re-detection.
    pub fn masked(&self, mask: &[bool]) -> EventStream {
        assert_eq!(mask.len(), self.events.len());
        let events = self
            .events
            .iter()
            .zip(mask)
            .filter(|(_, &keep)| keep)
            .map(|(e, _)| e.clone())
            .collect();
        // A subsequence of a valid stream is valid.
        EventStream { events }
    }
}

/// Filter a stream down to the events whose kind satisfies `predicate`,
/// renumbering seq_no from 1 in input order.
pub fn extract_events(raw: &EventStream, predicate: impl Fn(&EventKind) -> bool) -> EventStream {
    let events = raw
        .events()
        .iter()
        .filter(|e| predicate(&e.kind))
        .cloned()
        .collect();
    EventStream::from_ordered(events).expect("subsequence of a valid stream is time-ordered")
}

/// Merge event streams into one, sorted by timestamp. Ties are broken by
/// input stream index (stable), then by original order; seq_no is renumbered.
pub fn merge_streams(streams: &[EventStream]) -> EventStream {
    let mut events: Vec<Event> = streams
        .iter()
        .flat_map(|s| s.events().iter().cloned())
        .collect();
    events.sort_by_key(|e| e.timestamp);
    EventStream::from_ordered(events).expect("sorted events are time-ordered")
}

/// Wire form of an event. seq_no is positional and assigned on load.
#[derive(Serialize, Deserialize)]
struct EventRecord {
    stream_id: String,
    timestamp: i64,
    kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    payload: Option<CellId>,
}

/// Write a stream as JSONL: one object per line with fields
/// stream_id, timestamp, kind, payload (payload omitted when absent).
pub fn write_events_jsonl(stream: &EventStream, mut out: impl Write) -> Result<()> {
    for e in stream.events() {
        let rec = EventRecord {
            stream_id: e.stream_id.clone(),
            timestamp: e.timestamp,
            kind: e.kind.clone(),
            payload: e.payload,
        };
        let line = serde_json::to_string(&rec)?;
        out.write_all(line.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| Error::InvalidStream(format!("write failed: {e}")))?;
    }
    Ok(())
}

pub fn write_events_file(stream: &EventStream, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_events_jsonl(stream, std::io::BufWriter::new(file))
}

/// Read a JSONL event file, assigning seq_no in line order. Timestamps must
/// be non-decreasing; the writer always satisfies this.
pub fn read_events_jsonl(input: impl std::io::Read) -> Result<EventStream> {
    let reader = BufReader::new(input);
    let mut events = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Malformed(format!("line {}: {e}", lineno + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EventRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Malformed(format!("line {}: {e}", lineno + 1)))?;
        events.push(Event {
            stream_id: rec.stream_id,
            seq_no: 0,
            timestamp: rec.timestamp,
            kind: rec.kind,
            payload: rec.payload,
        });
    }
    EventStream::from_ordered(events)
}

pub fn read_events_file(path: impl AsRef<Path>) -> Result<EventStream> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_events_jsonl(file)
}

//! Pattern detection over event streams.
//!
//! A pattern query names an ordered list of element predicates, a window
//! length in ticks, and a match mode. Detection runs per tumbling window
//! (aligned at multiples of the window length) and reports at most one
//! instance per (query, window): SET mode requires all elements to be matched
//! by distinct events anywhere in the window, SEQUENCE mode requires the
//! elements in temporal order and reports the earliest match. Detection is a
//! pure function; identical inputs give identical pattern streams.

use std::collections::HashMap;
use std::io::Write;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{CellId, Event, EventId, EventKind, EventStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MatchMode {
    /// Elements must appear in temporal order within one window.
    Sequence,
    /// All elements within one window, any order.
    Set,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PrivacyRole {
    /// Declared sensitive by data subjects; instances must be protected.
    Private,
    /// Queried by data consumers; scored during evaluation.
    Target,
    #[default]
    None,
}

/// Predicate one pattern element applies to candidate events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ElementPredicate {
    /// Event kind equals the symbol.
    Kind(EventKind),
    /// Event payload is one of the given grid cells (GPS-derived queries).
    Cells { cells: Vec<CellId> },
}

impl ElementPredicate {
    pub fn kind(name: &str) -> Self {
        ElementPredicate::Kind(name.into())
    }

    pub fn cells(cells: impl IntoIterator<Item = CellId>) -> Self {
        let mut cells: Vec<CellId> = cells.into_iter().collect();
        cells.sort_unstable();
        cells.dedup();
        ElementPredicate::Cells { cells }
    }

    pub fn accepts(&self, event: &Event) -> bool {
        match self {
            ElementPredicate::Kind(k) => event.kind == *k,
            ElementPredicate::Cells { cells } => match event.payload {
                Some(cell) => cells.binary_search(&cell).is_ok(),
                None => false,
            },
        }
    }
}

impl std::fmt::Display for ElementPredicate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ElementPredicate::Kind(k) => write!(f, "{k}"),
            ElementPredicate::Cells { cells } => write!(f, "cells[{}]", cells.len()),
        }
    }
}

/// Declarative specification of one pattern type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternQuery {
    pub id: String,
    pub elements: Vec<ElementPredicate>,
    pub mode: MatchMode,
    /// Window length in ticks.
    pub window: i64,
    #[serde(default)]
    pub privacy_role: PrivacyRole,
}

impl PatternQuery {
    pub fn validate(&self) -> Result<()> {
        if self.elements.is_empty() {
            return Err(Error::InvalidQuery {
                id: self.id.clone(),
                reason: "a pattern needs at least one element".into(),
            });
        }
        if self.window <= 0 {
            return Err(Error::InvalidQuery {
                id: self.id.clone(),
                reason: format!("window must be positive, got {}", self.window),
            });
        }
        if let ElementPredicate::Cells { cells } = &self.elements[0] {
            let _ = cells;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// A matched occurrence of a pattern type.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternInstance {
    pub query_id: String,
    /// The matched events, element-wise: events[k] satisfies elements[k].
    pub events: Vec<Event>,
    /// Timestamp of the last (latest) matched event.
    pub detect_time: i64,
}

impl PatternInstance {
    pub fn new(query_id: impl Into<String>, events: Vec<Event>) -> Self {
        let detect_time = events.iter().map(|e| e.timestamp).max().unwrap_or(0);
        PatternInstance {
            query_id: query_id.into(),
            events,
            detect_time,
        }
    }

    /// Tumbling window index for a given window length.
    pub fn window_index(&self, window: i64) -> i64 {
        self.detect_time.div_euclid(window)
    }
}

/// True iff the two instances share at least one event occurrence.
pub fn overlapping(p: &PatternInstance, q: &PatternInstance) -> bool {
    p.events
        .iter()
        .any(|ep| q.events.iter().any(|eq| ep.id() == eq.id()))
}

/// Detected instances ordered by detect time, then query id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PatternStream {
    instances: Vec<PatternInstance>,
}

impl PatternStream {
    pub fn new(mut instances: Vec<PatternInstance>) -> Self {
        instances.sort_by(|a, b| {
            a.detect_time
                .cmp(&b.detect_time)
                .then_with(|| a.query_id.cmp(&b.query_id))
        });
        PatternStream { instances }
    }

    pub fn instances(&self) -> &[PatternInstance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Candidate event positions per element of one query within one window.
pub(crate) fn window_candidates(
    events: &[Event],
    range: Range<usize>,
    query: &PatternQuery,
) -> Vec<Vec<u32>> {
    let mut cands = vec![Vec::new(); query.elements.len()];
    for pos in range {
        for (k, pred) in query.elements.iter().enumerate() {
            if pred.accepts(&events[pos]) {
                cands[k].push(pos as u32);
            }
        }
    }
    cands
}

/// Find the lexicographically earliest assignment of elements to distinct
/// live events, given per-element candidate positions (ascending). SEQUENCE
/// additionally requires strictly increasing positions, which on a
/// time-ordered stream implies non-decreasing timestamps.
pub(crate) fn find_match(
    cands: &[Vec<u32>],
    mode: MatchMode,
    alive: &impl Fn(u32) -> bool,
) -> Option<Vec<u32>> {
    match mode {
        MatchMode::Sequence => {
            let mut picked = Vec::with_capacity(cands.len());
            let mut min_pos = 0u32;
            for c in cands {
                let pos = c
                    .iter()
                    .copied()
                    .find(|&p| (picked.is_empty() || p >= min_pos) && alive(p))?;
                min_pos = pos + 1;
                picked.push(pos);
            }
            Some(picked)
        }
        MatchMode::Set => {
            let mut picked: Vec<u32> = Vec::with_capacity(cands.len());
            if assign_set(cands, 0, &mut picked, alive) {
                Some(picked)
            } else {
                None
            }
        }
    }
}

/// Depth-first search for a SET assignment: element `k` takes the earliest
/// unused live candidate that still permits completing the assignment.
fn assign_set(cands: &[Vec<u32>], k: usize, picked: &mut Vec<u32>, alive: &impl Fn(u32) -> bool) -> bool {
    if k == cands.len() {
        return true;
    }
    for &pos in &cands[k] {
        if picked.contains(&pos) || !alive(pos) {
            continue;
        }
        picked.push(pos);
        if assign_set(cands, k + 1, picked, alive) {
            return true;
        }
        picked.pop();
    }
    false
}

/// Run pattern detection over a stream. Reports at most one instance per
/// (query, window); deterministic for fixed input.
pub fn detect(stream: &EventStream, queries: &[PatternQuery]) -> Result<PatternStream> {
    detect_masked(stream, queries, None)
}

/// Detection over a masked view of the stream: events at positions where the
/// mask is false are invisible. `None` means all events are visible.
pub fn detect_masked(
    stream: &EventStream,
    queries: &[PatternQuery],
    mask: Option<&[bool]>,
) -> Result<PatternStream> {
    for q in queries {
        q.validate()?;
    }
    if let Some(m) = mask {
        if m.len() != stream.len() {
            return Err(Error::InvalidStream(format!(
                "mask length {} does not match stream length {}",
                m.len(),
                stream.len()
            )));
        }
    }
    let alive = |pos: u32| mask.is_none_or(|m| m[pos as usize]);
    let events = stream.events();
    let mut instances = Vec::new();
    for query in queries {
        for (_, range) in stream.tumbling_windows(query.window) {
            let cands = window_candidates(events, range, query);
            if let Some(positions) = find_match(&cands, query.mode, &alive) {
                let matched = positions
                    .iter()
                    .map(|&p| events[p as usize].clone())
                    .collect();
                instances.push(PatternInstance::new(query.id.clone(), matched));
            }
        }
    }
    Ok(PatternStream::new(instances))
}

/// Which private instance and element position an event belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Membership {
    /// Index into [`PrivateEventIndex::instances`], in pattern-stream order.
    pub instance: usize,
    /// Element position within that instance (0-based).
    pub element: usize,
}

/// One private instance with its element events resolved to stream positions.
#[derive(Debug, Clone)]
pub struct IndexedInstance {
    pub query_id: String,
    /// Stream position of each element event.
    pub element_positions: Vec<u32>,
}

/// Index from event occurrences to the private pattern instances containing
/// them. Events in no private instance are absent from the index; the
/// privacy mechanism leaves them untouched.
#[derive(Debug, Clone, Default)]
pub struct PrivateEventIndex {
    instances: Vec<IndexedInstance>,
    by_event: HashMap<EventId, Vec<Membership>>,
}

impl PrivateEventIndex {
    /// Build the index from a detection run over `stream`. Instances of
    /// queries whose privacy role is [`PrivacyRole::Private`] are indexed in
    /// pattern-stream order.
    pub fn build(
        stream: &EventStream,
        patterns: &PatternStream,
        queries: &[PatternQuery],
    ) -> Result<Self> {
        let private: std::collections::HashSet<&str> = queries
            .iter()
            .filter(|q| q.privacy_role == PrivacyRole::Private)
            .map(|q| q.id.as_str())
            .collect();
        let mut pos_of: HashMap<EventId, u32> = HashMap::with_capacity(stream.len());
        for (pos, e) in stream.events().iter().enumerate() {
            pos_of.insert(e.id(), pos as u32);
        }
        let mut instances = Vec::new();
        let mut by_event: HashMap<EventId, Vec<Membership>> = HashMap::new();
        for inst in patterns.instances() {
            if !private.contains(inst.query_id.as_str()) {
                continue;
            }
            let idx = instances.len();
            let mut element_positions = Vec::with_capacity(inst.events.len());
            for (k, e) in inst.events.iter().enumerate() {
                let id = e.id();
                let pos = *pos_of.get(&id).ok_or_else(|| {
                    Error::Malformed(format!(
                        "instance event {}#{} not present in stream",
                        id.stream_id, id.seq_no
                    ))
                })?;
                element_positions.push(pos);
                by_event.entry(id).or_default().push(Membership {
                    instance: idx,
                    element: k,
                });
            }
            instances.push(IndexedInstance {
                query_id: inst.query_id.clone(),
                element_positions,
            });
        }
        Ok(PrivateEventIndex {
            instances,
            by_event,
        })
    }

    pub fn instances(&self) -> &[IndexedInstance] {
        &self.instances
    }

    /// All private-instance memberships of an event; empty if the event
    /// belongs to no private instance.
    pub fn memberships(&self, id: &EventId) -> &[Membership] {
        self.by_event.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Number of distinct events belonging to at least one private instance.
    pub fn indexed_event_count(&self) -> usize {
        self.by_event.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Read a query file: a JSON array of
/// `{id, elements:[kinds], mode, window, privacy_role}` objects.
pub fn read_queries_json(input: impl std::io::Read) -> Result<Vec<PatternQuery>> {
    let queries: Vec<PatternQuery> = serde_json::from_reader(input)?;
    for q in &queries {
        q.validate()?;
    }
    Ok(queries)
}

pub fn read_queries_file(path: impl AsRef<Path>) -> Result<Vec<PatternQuery>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_queries_json(std::io::BufReader::new(file))
}

pub fn write_queries_json(queries: &[PatternQuery], mut out: impl Write) -> Result<()> {
    let text = serde_json::to_string_pretty(queries)?;
    out.write_all(text.as_bytes())
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| Error::Malformed(format!("write failed: {e}")))
}

pub fn write_queries_file(queries: &[PatternQuery], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_queries_json(queries, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(seq_no: u64, timestamp: i64, kind: &str) -> Event {
        Event {
            stream_id: "s".into(),
            seq_no,
            timestamp,
            kind: kind.into(),
            payload: None,
        }
    }

    fn stream_of(kinds_and_ts: &[(&str, i64)]) -> EventStream {
        let events = kinds_and_ts
            .iter()
            .map(|&(k, t)| ev(0, t, k))
            .collect();
        EventStream::from_ordered(events).unwrap()
    }

    fn set_query(id: &str, kinds: &[&str], window: i64) -> PatternQuery {
        PatternQuery {
            id: id.into(),
            elements: kinds.iter().map(|k| ElementPredicate::kind(k)).collect(),
            mode: MatchMode::Set,
            window,
            privacy_role: PrivacyRole::None,
        }
    }

    /// Exhaustive oracle: does any assignment of elements to distinct events
    /// in the window satisfy the query? SEQUENCE restricts to strictly
    /// increasing positions.
    fn brute_force_window(events: &[Event], query: &PatternQuery) -> bool {
        fn rec(events: &[Event], query: &PatternQuery, k: usize, used: &mut Vec<usize>) -> bool {
            if k == query.elements.len() {
                return true;
            }
            for pos in 0..events.len() {
                if used.contains(&pos) {
                    continue;
                }
                if query.mode == MatchMode::Sequence {
                    if let Some(&last) = used.last() {
                        if pos <= last {
                            continue;
                        }
                    }
                }
                if !query.elements[k].accepts(&events[pos]) {
                    continue;
                }
                used.push(pos);
                if rec(events, query, k + 1, used) {
                    return true;
                }
                used.pop();
            }
            false
        }
        rec(events, query, 0, &mut Vec::new())
    }

    #[test]
    fn set_query_detects_when_all_elements_present() {
        let s = stream_of(&[("e1", 1), ("e2", 3), ("e3", 7)]);
        let q = set_query("P", &["e1", "e2", "e3"], 10);
        let out = detect(&s, &[q]).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.instances()[0].detect_time, 7);
    }

    #[test]
    fn set_query_missing_element_no_instance() {
        let s = stream_of(&[("e1", 1), ("e2", 3)]);
        let q = set_query("P", &["e1", "e2", "e3"], 10);
        assert!(detect(&s, &[q]).unwrap().is_empty());
    }

    #[test]
    fn sequence_query_earliest_match() {
        let s = stream_of(&[("b", 1), ("a", 2), ("b", 3)]);
        let q = PatternQuery {
            id: "S".into(),
            elements: vec![ElementPredicate::kind("a"), ElementPredicate::kind("b")],
            mode: MatchMode::Sequence,
            window: 10,
            privacy_role: PrivacyRole::None,
        };
        let out = detect(&s, &[q]).unwrap();
        assert_eq!(out.len(), 1);
        let inst = &out.instances()[0];
        assert_eq!(inst.events[0].timestamp, 2);
        assert_eq!(inst.events[1].timestamp, 3);
    }

    #[test]
    fn one_instance_per_window() {
        // Two full matches inside one window still report once.
        let s = stream_of(&[("a", 1), ("a", 2), ("b", 3), ("b", 4), ("a", 12), ("b", 13)]);
        let q = set_query("P", &["a", "b"], 10);
        let out = detect(&s, &[q]).unwrap();
        assert_eq!(out.len(), 2); // window 0 and window 1
    }

    #[test]
    fn duplicate_kind_elements_need_distinct_events() {
        let s = stream_of(&[("a", 1), ("b", 2)]);
        let q = set_query("P", &["a", "a"], 10);
        assert!(detect(&s, &[q]).unwrap().is_empty());
        let s2 = stream_of(&[("a", 1), ("a", 2)]);
        let q2 = set_query("P", &["a", "a"], 10);
        assert_eq!(detect(&s2, &[q2]).unwrap().len(), 1);
    }

    #[test]
    fn detection_matches_brute_force_on_random_windows() {
        use crate::rng::SeededRng;
        let mut rng = SeededRng::new(909);
        let kinds = ["a", "b", "c", "d"];
        for case in 0..300 {
            let n = 1 + rng.below(12);
            let mut events = Vec::new();
            for i in 0..n {
                events.push(ev(0, i as i64, kinds[rng.below(kinds.len())]));
            }
            let s = EventStream::from_ordered(events).unwrap();
            let m = 1 + rng.below(3);
            let elems: Vec<&str> = (0..m).map(|_| kinds[rng.below(kinds.len())]).collect();
            let mode = if case % 2 == 0 {
                MatchMode::Set
            } else {
                MatchMode::Sequence
            };
            let q = PatternQuery {
                id: "Q".into(),
                elements: elems.iter().map(|k| ElementPredicate::kind(k)).collect(),
                mode,
                window: 100,
                privacy_role: PrivacyRole::None,
            };
            let got = !detect(&s, &[q.clone()]).unwrap().is_empty();
            let want = brute_force_window(s.events(), &q);
            assert_eq!(got, want, "case {case}: query {elems:?} mode {mode:?}");
        }
    }

    #[test]
    fn detection_is_deterministic() {
        let s = stream_of(&[("a", 1), ("b", 2), ("a", 3), ("c", 5), ("b", 6)]);
        let qs = vec![set_query("P1", &["a", "b"], 10), set_query("P2", &["c"], 10)];
        let one = detect(&s, &qs).unwrap();
        let two = detect(&s, &qs).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn single_event_query_degenerates_to_filtering() {
        let s = stream_of(&[("a", 1), ("b", 12), ("a", 25), ("a", 26)]);
        let q = set_query("P", &["a"], 10);
        let out = detect(&s, &[q]).unwrap();
        // Windows 0 and 2 contain an `a`; one instance each.
        assert_eq!(out.len(), 2);
        assert_eq!(out.instances()[0].events[0].timestamp, 1);
        assert_eq!(out.instances()[1].events[0].timestamp, 25);
    }

    #[test]
    fn overlap_by_identity() {
        let shared = ev(5, 4, "a");
        let p = PatternInstance::new("P", vec![shared.clone(), ev(6, 5, "b")]);
        let q = PatternInstance::new("Q", vec![shared.clone(), ev(7, 6, "c")]);
        let r = PatternInstance::new("R", vec![ev(8, 7, "a")]);
        assert!(overlapping(&p, &q));
        assert!(!overlapping(&p, &r));
        assert!(overlapping(&p, &p));
    }

    #[test]
    fn cell_predicate_matches_payload() {
        let mut e = ev(1, 1, "CELL_ENTRY");
        e.payload = Some(7);
        let pred = ElementPredicate::cells([3, 7, 9]);
        assert!(pred.accepts(&e));
        e.payload = Some(8);
        assert!(!pred.accepts(&e));
        e.payload = None;
        assert!(!pred.accepts(&e));
    }

    #[test]
    fn private_index_counts_memberships() {
        let s = stream_of(&[("a", 1), ("b", 2), ("c", 3)]);
        let mut q1 = set_query("P1", &["a", "b", "c"], 10);
        q1.privacy_role = PrivacyRole::Private;
        let patterns = detect(&s, &[q1.clone()]).unwrap();
        let idx = PrivateEventIndex::build(&s, &patterns, &[q1]).unwrap();
        assert_eq!(idx.instances().len(), 1);
        assert_eq!(idx.indexed_event_count(), 3);
    }

    #[test]
    fn private_index_empty_without_private_instances() {
        let s = stream_of(&[("a", 1)]);
        let q = set_query("T", &["a"], 10); // role None
        let patterns = detect(&s, &[q.clone()]).unwrap();
        let idx = PrivateEventIndex::build(&s, &patterns, &[q]).unwrap();
        assert!(idx.is_empty());
        assert_eq!(idx.indexed_event_count(), 0);
    }

    #[test]
    fn shared_event_lists_both_memberships() {
        let s = stream_of(&[("a", 1), ("b", 2), ("c", 3)]);
        let mut q1 = set_query("P1", &["a", "b"], 10);
        q1.privacy_role = PrivacyRole::Private;
        let mut q2 = set_query("P2", &["a", "c"], 10);
        q2.privacy_role = PrivacyRole::Private;
        let queries = vec![q1, q2];
        let patterns = detect(&s, &queries).unwrap();
        let idx = PrivateEventIndex::build(&s, &patterns, &queries).unwrap();
        let shared = idx.memberships(&s.events()[0].id());
        assert_eq!(shared.len(), 2);
        // And the instances do overlap in the matcher's sense.
        let insts = patterns.instances();
        assert!(overlapping(&insts[0], &insts[1]));
    }

    #[test]
    fn query_json_round_trip() {
        let queries = vec![
            set_query("P1", &["e1", "e2"], 20),
            PatternQuery {
                id: "A1".into(),
                elements: vec![ElementPredicate::cells([1, 2, 3])],
                mode: MatchMode::Set,
                window: 3540,
                privacy_role: PrivacyRole::Target,
            },
        ];
        let mut buf = Vec::new();
        write_queries_json(&queries, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        for field in ["id", "elements", "mode", "window", "privacy_role"] {
            assert!(text.contains(field), "missing field {field}");
        }
        let back = read_queries_json(&buf[..]).unwrap();
        assert_eq!(back, queries);
    }

    #[test]
    fn invalid_queries_rejected() {
        let empty = PatternQuery {
            id: "E".into(),
            elements: vec![],
            mode: MatchMode::Set,
            window: 10,
            privacy_role: PrivacyRole::None,
        };
        assert!(empty.validate().is_err());
        let mut zero_window = set_query("Z", &["a"], 10);
        zero_window.window = 0;
        assert!(zero_window.validate().is_err());
    }
}

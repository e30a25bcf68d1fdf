//! Dataset generation and ingestion.
//!
//! Two evaluation workloads: a synthetic one (independent per-window
//! occurrence of 20 basic event kinds, 20 random 3-element SET patterns,
//! 3 private and 5 target) and a GPS one (taxi fixes mapped onto a metric
//! grid, with private/target areas drawn as cell subsets). A small random
//! walk generator can produce taxi-style input files when the real dataset
//! is unavailable.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::{ElementPredicate, MatchMode, PatternQuery, PrivacyRole};
use crate::rng::SeededRng;
use crate::stream::{
    merge_streams, read_events_file, write_events_file, CellId, Event, EventStream,
};

pub const EVENTS_FILE: &str = "events.jsonl";
pub const QUERIES_FILE: &str = "queries.json";
pub const AREAS_FILE: &str = "areas.json";

const DATETIME_FORMAT: &str = "%Y-%m-%d %H:%M:%S";
/// Kind assigned to every GPS fix; the grid cell rides in the payload.
pub const CELL_ENTRY: &str = "CELL_ENTRY";

/// Configuration of the synthetic workload generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_event_kinds: usize,
    pub n_windows: usize,
    pub n_patterns: usize,
    pub elements_per_pattern: usize,
    pub n_private: usize,
    pub n_target: usize,
    /// Window length in ticks; each kind occupies one tick offset.
    pub window_ticks: i64,
    /// Natural occurrence probability per kind; `None` draws them uniformly.
    #[serde(default)]
    pub occurrence: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_event_kinds: 20,
            n_windows: 1000,
            n_patterns: 20,
            elements_per_pattern: 3,
            n_private: 3,
            n_target: 5,
            window_ticks: 20,
            occurrence: None,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_event_kinds == 0 || self.n_windows == 0 || self.n_patterns == 0 {
            return Err(Error::InvalidConfig(
                "kinds, windows, and patterns must all be positive".into(),
            ));
        }
        if self.n_private + self.n_target > self.n_patterns {
            return Err(Error::InvalidConfig(format!(
                "{} private + {} target patterns exceed the {} available",
                self.n_private, self.n_target, self.n_patterns
            )));
        }
        if self.elements_per_pattern == 0 || self.elements_per_pattern > self.n_event_kinds {
            return Err(Error::InvalidConfig(
                "elements per pattern must be in 1..=kinds".into(),
            ));
        }
        if self.window_ticks < self.n_event_kinds as i64 {
            return Err(Error::InvalidConfig(
                "window must have at least one tick per kind".into(),
            ));
        }
        if let Some(probs) = &self.occurrence {
            if probs.len() != self.n_event_kinds {
                return Err(Error::InvalidConfig(format!(
                    "{} occurrence probabilities for {} kinds",
                    probs.len(),
                    self.n_event_kinds
                )));
            }
            if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidConfig(
                    "occurrence probabilities must be in [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Synthetic workload: stream, queries, and the occurrence probabilities
/// the windows were drawn from.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub stream: EventStream,
    pub queries: Vec<PatternQuery>,
    pub occurrence: Vec<f64>,
    pub window_ticks: i64,
}

pub fn kind_name(index: usize) -> String {
    format!("e{}", index + 1)
}

/// Generate the synthetic workload: each window independently contains kind
/// `n` with its occurrence probability; patterns are random element subsets
/// with disjoint private/target selections. Byte-reproducible per seed.
pub fn synthesize(cfg: &SynthConfig) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let master = SeededRng::new(cfg.seed);
    let occurrence: Vec<f64> = match &cfg.occurrence {
        Some(p) => p.clone(),
        None => {
            let mut rng = master.derive(&[0]);
            (0..cfg.n_event_kinds).map(|_| rng.uniform()).collect()
        }
    };

    let mut windows_rng = master.derive(&[1]);
    let mut events = Vec::new();
    for window in 0..cfg.n_windows {
        let base = window as i64 * cfg.window_ticks;
        for kind in 0..cfg.n_event_kinds {
            if windows_rng.uniform() < occurrence[kind] {
                events.push(Event {
                    stream_id: "synth".into(),
                    seq_no: 0,
                    timestamp: base + kind as i64,
                    kind: kind_name(kind).as_str().into(),
                    payload: None,
                });
            }
        }
    }
    let stream = EventStream::from_ordered(events)?;

    let mut patterns_rng = master.derive(&[2]);
    let mut queries = Vec::new();
    for p in 0..cfg.n_patterns {
        let mut kinds = patterns_rng.sample_indices(cfg.n_event_kinds, cfg.elements_per_pattern);
        kinds.sort_unstable();
        queries.push(PatternQuery {
            id: format!("P{}", p + 1),
            elements: kinds
                .into_iter()
                .map(|k| ElementPredicate::kind(&kind_name(k)))
                .collect(),
            mode: MatchMode::Set,
            window: cfg.window_ticks,
            privacy_role: PrivacyRole::None,
        });
    }
    let mut roles_rng = master.derive(&[3]);
    let picked = roles_rng.sample_indices(cfg.n_patterns, cfg.n_private + cfg.n_target);
    for (i, &q) in picked.iter().enumerate() {
        queries[q].privacy_role = if i < cfg.n_private {
            PrivacyRole::Private
        } else {
            PrivacyRole::Target
        };
    }
    Ok(SyntheticDataset {
        stream,
        queries,
        occurrence,
        window_ticks: cfg.window_ticks,
    })
}

/// Geographic grid: a bounding box cut into square cells of `cell_size_m`
/// meters, with the fractions used to draw private and target areas.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub cell_size_m: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
    pub private_fraction: f64,
    pub extra_target_fraction: f64,
    pub private_to_target_fraction: f64,
    pub seed: u64,
}

const METERS_PER_DEG_LAT: f64 = 110_574.0;
const METERS_PER_DEG_LON_EQUATOR: f64 = 111_320.0;

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            cell_size_m: 623.0,
            lon_min: 116.30,
            lon_max: 116.42,
            lat_min: 39.85,
            lat_max: 39.95,
            private_fraction: 0.20,
            extra_target_fraction: 0.40,
            private_to_target_fraction: 0.50,
            seed: 0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size_m > 0.0) {
            return Err(Error::InvalidConfig("cell size must be positive".into()));
        }
        if self.lon_min >= self.lon_max || self.lat_min >= self.lat_max {
            return Err(Error::InvalidConfig("empty bounding box".into()));
        }
        for f in [
            self.private_fraction,
            self.extra_target_fraction,
            self.private_to_target_fraction,
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidConfig(format!(
                    "fractions must be in [0, 1], got {f}"
                )));
            }
        }
        Ok(())
    }

    fn meters_per_deg_lon(&self) -> f64 {
        let mid = 0.5 * (self.lat_min + self.lat_max);
        METERS_PER_DEG_LON_EQUATOR * mid.to_radians().cos()
    }

    pub fn n_cols(&self) -> u64 {
        let width_m = (self.lon_max - self.lon_min) * self.meters_per_deg_lon();
        ((width_m / self.cell_size_m).ceil() as u64).max(1)
    }

    /// Cell id of a coordinate, row-major from the box origin; `None` when
    /// outside the bounding box.
    pub fn cell_of(&self, lon: f64, lat: f64) -> Option<CellId> {
        if !(self.lon_min..=self.lon_max).contains(&lon)
            || !(self.lat_min..=self.lat_max).contains(&lat)
        {
            return None;
        }
        let x = (lon - self.lon_min) * self.meters_per_deg_lon();
        let y = (lat - self.lat_min) * METERS_PER_DEG_LAT;
        let col = (x / self.cell_size_m).floor() as u64;
        let row = (y / self.cell_size_m).floor() as u64;
        Some(row * self.n_cols() + col)
    }
}

/// Ingestion counters for one input file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub parsed: usize,
    pub malformed: usize,
    pub out_of_bounds: usize,
}

fn parse_tdrive_line(line: &str) -> Option<(String, i64, f64, f64)> {
    let mut parts = line.split(',');
    let id = parts.next()?.trim();
    let datetime = parts.next()?.trim();
    let lon: f64 = parts.next()?.trim().parse().ok()?;
    let lat: f64 = parts.next()?.trim().parse().ok()?;
    if parts.next().is_some() || id.is_empty() {
        return None;
    }
    let ts = NaiveDateTime::parse_from_str(datetime, DATETIME_FORMAT)
        .ok()?
        .and_utc()
        .timestamp();
    Some((id.to_string(), ts, lon, lat))
}

/// Ingest one taxi trace file (`id,datetime,longitude,latitude` per line).
/// Each in-bounds fix becomes a CELL_ENTRY event with the grid cell as
/// payload and the timestamp in integer seconds. More than 10% malformed
/// lines fail the file.
pub fn ingest_tdrive_file(
    path: impl AsRef<Path>,
    grid: &GridSpec,
) -> Result<(EventStream, IngestStats)> {
    grid.validate()?;
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut stats = IngestStats::default();
    let mut fixes = Vec::new();
    let mut total = 0usize;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        match parse_tdrive_line(line) {
            Some((id, ts, lon, lat)) => match grid.cell_of(lon, lat) {
                Some(cell) => {
                    stats.parsed += 1;
                    fixes.push((id, ts, cell));
                }
                None => stats.out_of_bounds += 1,
            },
            None => stats.malformed += 1,
        }
    }
    if total > 0 && stats.malformed * 10 > total {
        return Err(Error::Malformed(format!(
            "{}: {} of {} lines malformed (more than 10%); wrong format?",
            path.display(),
            stats.malformed,
            total
        )));
    }
    fixes.sort_by_key(|&(_, ts, _)| ts);
    let events = fixes
        .into_iter()
        .map(|(id, ts, cell)| Event {
            stream_id: id,
            seq_no: 0,
            timestamp: ts,
            kind: CELL_ENTRY.into(),
            payload: Some(cell),
        })
        .collect();
    Ok((EventStream::from_ordered(events)?, stats))
}

/// Ingest every file of a directory (sorted by name) and merge the streams.
pub fn ingest_tdrive_dir(
    dir: impl AsRef<Path>,
    grid: &GridSpec,
) -> Result<(EventStream, Vec<(PathBuf, IngestStats)>)> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Malformed(format!(
            "no input files in {}",
            dir.display()
        )));
    }
    let mut streams = Vec::new();
    let mut stats = Vec::new();
    for path in paths {
        let (stream, s) = ingest_tdrive_file(&path, grid)?;
        streams.push(stream);
        stats.push((path, s));
    }
    Ok((merge_streams(&streams), stats))
}

/// All distinct cells visited by a stream.
pub fn visited_cells(stream: &EventStream) -> BTreeSet<CellId> {
    stream.events().iter().filter_map(|e| e.payload).collect()
}

/// Private and target cell sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AreaAssignment {
    pub private: BTreeSet<CellId>,
    pub target: BTreeSet<CellId>,
}

fn round_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64).round() as usize
}

/// Draw the private area (a fraction of all cells), then make the target
/// area from a fraction of the private cells plus a separate draw from the
/// non-private cells. With the default fractions, 100 cells yield 20
/// private, 50 target, 10 of them overlapping.
pub fn assign_areas(cells: &BTreeSet<CellId>, grid: &GridSpec) -> Result<AreaAssignment> {
    grid.validate()?;
    let n = cells.len();
    if n < 10 {
        return Err(Error::InvalidConfig(format!(
            "area fractions degenerate below 10 cells, got {n}"
        )));
    }
    let all: Vec<CellId> = cells.iter().copied().collect();
    let mut rng = SeededRng::new(grid.seed).derive(&[0xA2EA]);

    let n_private = round_count(grid.private_fraction, n);
    let private_idx = rng.sample_indices(n, n_private);
    let private: BTreeSet<CellId> = private_idx.iter().map(|&i| all[i]).collect();

    let n_overlap = round_count(grid.private_to_target_fraction, n_private);
    let private_sorted: Vec<CellId> = private.iter().copied().collect();
    let overlap: BTreeSet<CellId> = rng
        .sample_indices(private_sorted.len(), n_overlap)
        .into_iter()
        .map(|i| private_sorted[i])
        .collect();

    let non_private: Vec<CellId> = all.iter().copied().filter(|c| !private.contains(c)).collect();
    let n_extra = round_count(grid.extra_target_fraction, n);
    if n_extra > non_private.len() {
        return Err(Error::InvalidConfig(
            "target fraction exceeds the available non-private cells".into(),
        ));
    }
    let mut target = overlap;
    target.extend(
        rng.sample_indices(non_private.len(), n_extra)
            .into_iter()
            .map(|i| non_private[i]),
    );
    Ok(AreaAssignment { private, target })
}

/// Single-element presence queries for the assigned areas: one PRIVATE
/// query per private cell and one TARGET query per target cell.
pub fn area_queries(assignment: &AreaAssignment, window: i64) -> Vec<PatternQuery> {
    let mut queries = Vec::new();
    for &cell in &assignment.private {
        queries.push(PatternQuery {
            id: format!("priv:{cell}"),
            elements: vec![ElementPredicate::cells([cell])],
            mode: MatchMode::Set,
            window,
            privacy_role: PrivacyRole::Private,
        });
    }
    for &cell in &assignment.target {
        queries.push(PatternQuery {
            id: format!("tgt:{cell}"),
            elements: vec![ElementPredicate::cells([cell])],
            mode: MatchMode::Set,
            window,
            privacy_role: PrivacyRole::Target,
        });
    }
    queries
}

/// Random-walk generator for taxi-style trace files, used when the real
/// dataset is unavailable.
#[derive(Debug, Clone)]
pub struct TdriveSampleConfig {
    pub n_taxis: usize,
    pub fixes_per_taxi: usize,
    /// Native sampling interval in seconds.
    pub interval_s: i64,
    pub start_epoch_s: i64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
    /// Mean step length per interval, in meters.
    pub step_m: f64,
    pub seed: u64,
}

impl Default for TdriveSampleConfig {
    fn default() -> Self {
        let grid = GridSpec::default();
        TdriveSampleConfig {
            n_taxis: 100,
            fixes_per_taxi: 480,
            interval_s: 177,
            start_epoch_s: 1_201_930_200, // 2008-02-02 05:30:00
            lon_min: grid.lon_min,
            lon_max: grid.lon_max,
            lat_min: grid.lat_min,
            lat_max: grid.lat_max,
            step_m: 623.0,
            seed: 0,
        }
    }
}

fn standard_normal(rng: &mut SeededRng) -> f64 {
    let u1 = rng.uniform().max(f64::MIN_POSITIVE);
    let u2 = rng.uniform();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Render one taxi's random walk in the T-Drive text format.
fn render_taxi(cfg: &TdriveSampleConfig, taxi: usize, rng: &mut SeededRng) -> String {
    let lat_mid = 0.5 * (cfg.lat_min + cfg.lat_max);
    let m_per_deg_lon = METERS_PER_DEG_LON_EQUATOR * lat_mid.to_radians().cos();
    let lon_span = cfg.lon_max - cfg.lon_min;
    let lat_span = cfg.lat_max - cfg.lat_min;
    let mut lon = cfg.lon_min + (0.1 + 0.8 * rng.uniform()) * lon_span;
    let mut lat = cfg.lat_min + (0.1 + 0.8 * rng.uniform()) * lat_span;
    let mut heading = rng.uniform() * std::f64::consts::TAU;
    let mut out = String::new();
    for k in 0..cfg.fixes_per_taxi {
        let ts = cfg.start_epoch_s + k as i64 * cfg.interval_s;
        let datetime = chrono::DateTime::from_timestamp(ts, 0)
            .expect("timestamp in range")
            .naive_utc()
            .format(DATETIME_FORMAT);
        let _ = writeln!(out, "{},{},{:.5},{:.5}", taxi, datetime, lon, lat);
        heading += 0.6 * standard_normal(rng);
        let step = cfg.step_m * (0.4 + 1.2 * rng.uniform());
        lon += step * heading.sin() / m_per_deg_lon;
        lat += step * heading.cos() / METERS_PER_DEG_LAT;
        // Bounce off the box edges.
        if lon < cfg.lon_min || lon > cfg.lon_max {
            lon = lon.clamp(cfg.lon_min, cfg.lon_max);
            heading = -heading;
        }
        if lat < cfg.lat_min || lat > cfg.lat_max {
            lat = lat.clamp(cfg.lat_min, cfg.lat_max);
            heading = std::f64::consts::PI - heading;
        }
    }
    out
}

/// Write `n_taxis` trace files (`1.txt`, `2.txt`, ...) into a directory.
pub fn generate_tdrive_sample(dir: impl AsRef<Path>, cfg: &TdriveSampleConfig) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let master = SeededRng::new(cfg.seed);
    for taxi in 1..=cfg.n_taxis {
        let mut rng = master.derive(&[0x7A21, taxi as u64]);
        let contents = render_taxi(cfg, taxi, &mut rng);
        let path = dir.join(format!("{taxi}.txt"));
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Write a dataset directory: `events.jsonl` plus `queries.json`.
pub fn save_dataset(
    dir: impl AsRef<Path>,
    stream: &EventStream,
    queries: &[PatternQuery],
) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_events_file(stream, dir.join(EVENTS_FILE))?;
    crate::matcher::write_queries_file(queries, dir.join(QUERIES_FILE))
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<(EventStream, Vec<PatternQuery>)> {
    let dir = dir.as_ref();
    let stream = read_events_file(dir.join(EVENTS_FILE))?;
    let queries = crate::matcher::read_queries_file(dir.join(QUERIES_FILE))?;
    Ok((stream, queries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::detect;

    #[test]
    fn saturated_occurrence_fills_every_window() {
        let cfg = SynthConfig {
            n_windows: 50,
            occurrence: Some(vec![1.0; 20]),
            ..SynthConfig::default()
        };
        let ds = synthesize(&cfg).unwrap();
        assert_eq!(ds.stream.len(), 50 * 20);
        // Every pattern is detected in every window.
        let detected = detect(&ds.stream, &ds.queries).unwrap();
        assert_eq!(detected.len(), 50 * 20);
    }

    #[test]
    fn zero_occurrence_gives_empty_stream() {
        let cfg = SynthConfig {
            n_windows: 50,
            occurrence: Some(vec![0.0; 20]),
            ..SynthConfig::default()
        };
        let ds = synthesize(&cfg).unwrap();
        assert!(ds.stream.is_empty());
        assert!(detect(&ds.stream, &ds.queries).unwrap().is_empty());
    }

    #[test]
    fn synthesis_is_reproducible() {
        let cfg = SynthConfig {
            n_windows: 100,
            seed: 1234,
            ..SynthConfig::default()
        };
        let a = synthesize(&cfg).unwrap();
        let b = synthesize(&cfg).unwrap();
        assert_eq!(a.stream, b.stream);
        assert_eq!(a.queries, b.queries);
        assert_eq!(a.occurrence, b.occurrence);
    }

    #[test]
    fn role_counts_and_disjointness() {
        let ds = synthesize(&SynthConfig {
            n_windows: 10,
            seed: 5,
            ..SynthConfig::default()
        })
        .unwrap();
        let private = ds
            .queries
            .iter()
            .filter(|q| q.privacy_role == PrivacyRole::Private)
            .count();
        let target = ds
            .queries
            .iter()
            .filter(|q| q.privacy_role == PrivacyRole::Target)
            .count();
        assert_eq!((private, target), (3, 5));
        assert_eq!(ds.queries.len(), 20);
        for q in &ds.queries {
            assert_eq!(q.elements.len(), 3);
        }
    }

    #[test]
    fn per_kind_frequency_tracks_occurrence() {
        let probs = vec![0.37; 20];
        let cfg = SynthConfig {
            occurrence: Some(probs.clone()),
            seed: 99,
            ..SynthConfig::default()
        };
        let ds = synthesize(&cfg).unwrap();
        let n = cfg.n_windows as f64;
        for kind in 0..20 {
            let name = kind_name(kind);
            let count = ds
                .stream
                .events()
                .iter()
                .filter(|e| e.kind.as_str() == name)
                .count() as f64;
            let sigma = (0.37 * 0.63 / n).sqrt();
            assert!(
                (count / n - 0.37).abs() <= 3.0 * sigma + 0.5 / n,
                "kind {name}: frequency {}",
                count / n
            );
        }
    }

    #[test]
    fn grid_origin_is_cell_zero_and_623m_is_adjacent() {
        let grid = GridSpec::default();
        assert_eq!(grid.cell_of(grid.lon_min, grid.lat_min), Some(0));
        // ~623.1 m east of the origin lands in the neighboring column.
        let dlon = 623.1 / (METERS_PER_DEG_LON_EQUATOR
            * (0.5 * (grid.lat_min + grid.lat_max)).to_radians().cos());
        assert_eq!(grid.cell_of(grid.lon_min + dlon, grid.lat_min), Some(1));
        assert_eq!(grid.cell_of(0.0, 0.0), None);
    }

    #[test]
    fn area_assignment_cardinalities() {
        let grid = GridSpec {
            seed: 7,
            ..GridSpec::default()
        };
        let cells: BTreeSet<CellId> = (0..100).collect();
        let areas = assign_areas(&cells, &grid).unwrap();
        assert_eq!(areas.private.len(), 20);
        assert_eq!(areas.target.len(), 50);
        assert_eq!(areas.private.intersection(&areas.target).count(), 10);

        let ten: BTreeSet<CellId> = (0..10).collect();
        let areas = assign_areas(&ten, &grid).unwrap();
        assert_eq!(areas.private.len(), 2);
        assert_eq!(areas.target.len(), 5);
        assert_eq!(areas.private.intersection(&areas.target).count(), 1);

        let nine: BTreeSet<CellId> = (0..9).collect();
        assert!(assign_areas(&nine, &grid).is_err());
    }

    #[test]
    fn area_assignment_equations_over_random_sizes() {
        let mut rng = SeededRng::new(31);
        for _ in 0..60 {
            let n = 10 + rng.below(400);
            let cells: BTreeSet<CellId> = (0..n as u64).collect();
            let grid = GridSpec {
                seed: rng.below(1 << 30) as u64,
                ..GridSpec::default()
            };
            let areas = assign_areas(&cells, &grid).unwrap();
            let n_private = round_count(0.20, n);
            let n_overlap = round_count(0.50, n_private);
            let n_extra = round_count(0.40, n);
            assert_eq!(areas.private.len(), n_private);
            assert_eq!(areas.target.len(), n_overlap + n_extra);
            assert_eq!(
                areas.private.intersection(&areas.target).count(),
                n_overlap
            );
            assert!(areas.target.iter().all(|c| cells.contains(c)));
        }
    }

    #[test]
    fn tdrive_line_parsing() {
        let ok = parse_tdrive_line("1131,2008-02-02 13:30:44,116.32706,39.88349").unwrap();
        assert_eq!(ok.0, "1131");
        assert_eq!(ok.2, 116.32706);
        assert!(parse_tdrive_line("no commas here").is_none());
        assert!(parse_tdrive_line("1,2008-13-45 99:99:99,116.3,39.9").is_none());
        assert!(parse_tdrive_line("1,2008-02-02 13:30:44,not_a_number,39.9").is_none());
    }

    #[test]
    fn ingest_file_and_thresholds() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridSpec::default();

        let empty = dir.path().join("empty.txt");
        std::fs::write(&empty, "").unwrap();
        let (stream, stats) = ingest_tdrive_file(&empty, &grid).unwrap();
        assert!(stream.is_empty());
        assert_eq!(stats, IngestStats::default());

        let one = dir.path().join("one.txt");
        std::fs::write(&one, format!("7,2008-02-02 13:30:44,{},{}\n", grid.lon_min, grid.lat_min))
            .unwrap();
        let (stream, stats) = ingest_tdrive_file(&one, &grid).unwrap();
        assert_eq!(stream.len(), 1);
        assert_eq!(stats.parsed, 1);
        assert_eq!(stream.events()[0].payload, Some(0));
        assert_eq!(stream.events()[0].kind.as_str(), CELL_ENTRY);

        let bad = dir.path().join("bad.txt");
        std::fs::write(
            &bad,
            "garbage\nmore garbage\n7,2008-02-02 13:30:44,116.35,39.90\n",
        )
        .unwrap();
        assert!(matches!(
            ingest_tdrive_file(&bad, &grid),
            Err(Error::Malformed(_))
        ));
    }

    #[test]
    fn ingest_dir_requires_files() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridSpec::default();
        assert!(matches!(
            ingest_tdrive_dir(dir.path(), &grid),
            Err(Error::Malformed(_))
        ));
    }

    #[test]
    fn sample_generator_round_trips_through_ingestion() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = TdriveSampleConfig {
            n_taxis: 5,
            fixes_per_taxi: 40,
            seed: 3,
            ..TdriveSampleConfig::default()
        };
        generate_tdrive_sample(dir.path(), &cfg).unwrap();
        let (stream, stats) = ingest_tdrive_dir(dir.path(), &GridSpec::default()).unwrap();
        assert_eq!(stats.len(), 5);
        assert_eq!(stream.len(), 5 * 40);
        assert!(stats.iter().all(|(_, s)| s.malformed == 0));
        let cells = visited_cells(&stream);
        assert!(cells.len() >= 10, "only {} cells visited", cells.len());
    }

    #[test]
    fn dataset_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = synthesize(&SynthConfig {
            n_windows: 20,
            seed: 8,
            ..SynthConfig::default()
        })
        .unwrap();
        save_dataset(dir.path(), &ds.stream, &ds.queries).unwrap();
        let (stream, queries) = load_dataset(dir.path()).unwrap();
        assert_eq!(stream, ds.stream);
        assert_eq!(queries, ds.queries);
    }
}

//! Quality metrics and the privacy/utility experiment runner.
//!
//! Detection quality is scored per (target query, window) boolean cell:
//! a cell detected in both the ground truth and the perturbed view is a true
//! positive, reported-only cells are false positives, ground-only cells are
//! false negatives. Quality is `Q = alpha * Prec + (1 - alpha) * Rec` and
//! degradation is reported as relative loss `(Q_ord - Q_ppm) / Q_ord`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{optimize, OptimizerConfig};
use crate::baselines::{allocate_baseline, calibrate, event_epsilons, BaselineConfig, BaselineKind};
use crate::error::{Error, Result};
use crate::matcher::{
    detect, find_match, window_candidates, MatchMode, PatternQuery, PatternStream,
    PrivacyRole, PrivateEventIndex,
};
use crate::ppm::{epsilon_to_p, perturb_responses, randomize, BudgetAllocation};
use crate::rng::{derive_seed, SeededRng};
use crate::stream::EventStream;

/// Boolean confusion counts over (target query, window) cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    /// Ground-truth cell count.
    pub fn ground_total(&self) -> u64 {
        self.tp + self.fn_
    }

    /// Reported cell count.
    pub fn reported_total(&self) -> u64 {
        self.tp + self.fp
    }

    /// Precision; defined as 0 when nothing was reported so that quality
    /// stays total.
    pub fn precision(&self) -> f64 {
        if self.reported_total() == 0 {
            0.0
        } else {
            self.tp as f64 / self.reported_total() as f64
        }
    }

    pub fn recall(&self) -> f64 {
        self.tp as f64 / self.ground_total() as f64
    }
}

/// Compare ground-truth and reported detections of the target queries.
/// Both streams must come from the same windowing; instances referencing a
/// query not in `queries` are rejected.
pub fn confusion(
    ground: &PatternStream,
    reported: &PatternStream,
    queries: &[PatternQuery],
) -> Result<ConfusionCounts> {
    let windows: BTreeMap<&str, (i64, PrivacyRole)> = queries
        .iter()
        .map(|q| (q.id.as_str(), (q.window, q.privacy_role)))
        .collect();
    let cells = |patterns: &PatternStream| -> Result<BTreeSet<(String, i64)>> {
        let mut out = BTreeSet::new();
        for inst in patterns.instances() {
            let (window, role) = windows
                .get(inst.query_id.as_str())
                .ok_or_else(|| Error::UnknownQuery(inst.query_id.clone()))?;
            if *role == PrivacyRole::Target {
                out.insert((inst.query_id.clone(), inst.window_index(*window)));
            }
        }
        Ok(out)
    };
    let g = cells(ground)?;
    let r = cells(reported)?;
    Ok(ConfusionCounts {
        tp: g.intersection(&r).count() as u64,
        fp: r.difference(&g).count() as u64,
        fn_: g.difference(&r).count() as u64,
    })
}

/// Data quality `Q = alpha * Prec + (1 - alpha) * Rec`.
pub fn quality(c: &ConfusionCounts, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!(
            "alpha must be in [0, 1], got {alpha}"
        )));
    }
    if c.ground_total() == 0 {
        return Err(Error::NoGroundTruth);
    }
    Ok(alpha * c.precision() + (1.0 - alpha) * c.recall())
}

/// Relative quality loss `(q_ord - q_ppm) / q_ord`. Negative values are
/// permitted: noise can accidentally help.
pub fn mre(q_ord: f64, q_ppm: f64) -> Result<f64> {
    if q_ord <= 0.0 {
        return Err(Error::ZeroBaselineQuality);
    }
    Ok((q_ord - q_ppm) / q_ord)
}

/// Pre-computed scoring context for one dataset: ground-truth detection,
/// private-event index, and per-(target, window) candidate lists so that a
/// perturbed trial only needs to re-check matches against a survival mask.
pub struct Scorer {
    alpha: f64,
    stream_len: usize,
    index: PrivateEventIndex,
    /// Per target query: candidate positions of each element, for every
    /// window in which the ground truth detects the pattern.
    targets: Vec<TargetWindows>,
    ground_cells: u64,
    q_ord: f64,
}

struct TargetWindows {
    mode: MatchMode,
    detected: Vec<Vec<Vec<u32>>>,
}

impl Scorer {
    pub fn new(stream: &EventStream, queries: &[PatternQuery], alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be in [0, 1], got {alpha}"
            )));
        }
        for q in queries {
            q.validate()?;
        }
        let ground = detect(stream, queries)?;
        let index = PrivateEventIndex::build(stream, &ground, queries)?;
        let mut targets = Vec::new();
        let mut ground_cells = 0u64;
        for q in queries.iter().filter(|q| q.privacy_role == PrivacyRole::Target) {
            let mut detected = Vec::new();
            for (_, range) in stream.tumbling_windows(q.window) {
                let cands = window_candidates(stream.events(), range, q);
                if find_match(&cands, q.mode, &|_| true).is_some() {
                    detected.push(cands);
                }
            }
            ground_cells += detected.len() as u64;
            targets.push(TargetWindows {
                mode: q.mode,
                detected,
            });
        }
        if ground_cells == 0 {
            return Err(Error::NoGroundTruth);
        }
        let q_ord = quality(
            &ConfusionCounts {
                tp: ground_cells,
                fp: 0,
                fn_: 0,
            },
            alpha,
        )?;
        Ok(Scorer {
            alpha,
            stream_len: stream.len(),
            index,
            targets,
            ground_cells,
            q_ord,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Quality of the unperturbed detection; the reference for relative loss.
    pub fn q_ord(&self) -> f64 {
        self.q_ord
    }

    pub fn ground_cell_count(&self) -> u64 {
        self.ground_cells
    }

    pub fn private_index(&self) -> &PrivateEventIndex {
        &self.index
    }

    /// Score the (query, window) cells that survive a mask. Randomized
    /// responses only withhold existing events, so the reported cells are a
    /// subset of the ground-truth cells and no false positives can arise.
    fn score_mask(&self, mask: &[bool]) -> ConfusionCounts {
        let alive = |pos: u32| mask[pos as usize];
        let mut tp = 0u64;
        for target in &self.targets {
            for cands in &target.detected {
                if find_match(cands, target.mode, &alive).is_some() {
                    tp += 1;
                }
            }
        }
        ConfusionCounts {
            tp,
            fp: 0,
            fn_: self.ground_cells - tp,
        }
    }

    /// One trial of the pattern-level mechanism: perturb the private
    /// instances under `allocs`, then score target detection on survivors.
    pub fn trial_ppm(
        &self,
        allocs: &BTreeMap<String, BudgetAllocation>,
        seed: u64,
    ) -> Result<ConfusionCounts> {
        let mut mask = vec![true; self.stream_len];
        let rng = SeededRng::new(seed);
        perturb_responses(&self.index, allocs, &rng, |_, _, pos, out| {
            mask[pos as usize] &= out;
        })?;
        Ok(self.score_mask(&mask))
    }

    /// One trial of a stream-level baseline: every event is perturbed with
    /// its own flip probability, then target detection is scored.
    pub fn trial_event_probs(&self, probs: &[f64], seed: u64) -> Result<ConfusionCounts> {
        if probs.len() != self.stream_len {
            return Err(Error::InvalidStream(format!(
                "per-event probabilities: got {}, stream has {}",
                probs.len(),
                self.stream_len
            )));
        }
        let mut rng = SeededRng::new(seed);
        let mask: Vec<bool> = probs.iter().map(|&p| randomize(true, p, &mut rng)).collect();
        Ok(self.score_mask(&mask))
    }
}

/// Privacy mechanisms compared by the experiment runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Uniform,
    Adaptive,
    Bd,
    Ba,
    Landmark,
}

impl Mechanism {
    pub fn name(&self) -> &'static str {
        match self {
            Mechanism::Uniform => "uniform",
            Mechanism::Adaptive => "adaptive",
            Mechanism::Bd => "bd",
            Mechanism::Ba => "ba",
            Mechanism::Landmark => "landmark",
        }
    }

    /// Stable tag mixed into per-cell seeds; independent of plan order.
    fn seed_tag(&self) -> u64 {
        match self {
            Mechanism::Uniform => 1,
            Mechanism::Adaptive => 2,
            Mechanism::Bd => 3,
            Mechanism::Ba => 4,
            Mechanism::Landmark => 5,
        }
    }

    fn baseline_kind(&self) -> Option<BaselineKind> {
        match self {
            Mechanism::Bd => Some(BaselineKind::Bd),
            Mechanism::Ba => Some(BaselineKind::Ba),
            Mechanism::Landmark => Some(BaselineKind::Landmark),
            _ => None,
        }
    }
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn default_alpha() -> f64 {
    0.5
}

fn default_trials() -> u64 {
    100
}

/// Optimizer settings embedded in an experiment plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdaptiveSettings {
    #[serde(default = "default_adaptive_trials")]
    pub trials: u64,
    #[serde(default = "default_adaptive_iters")]
    pub max_iters: u64,
    #[serde(default)]
    pub delta_eps: Option<f64>,
}

fn default_adaptive_trials() -> u64 {
    100
}

fn default_adaptive_iters() -> u64 {
    25
}

impl Default for AdaptiveSettings {
    fn default() -> Self {
        AdaptiveSettings {
            trials: default_adaptive_trials(),
            max_iters: default_adaptive_iters(),
            delta_eps: None,
        }
    }
}

/// Declarative description of one privacy/utility sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentPlan {
    /// Dataset directory holding `events.jsonl` and `queries.json`.
    /// Relative paths are resolved against the plan file's directory.
    pub dataset: PathBuf,
    pub mechanisms: Vec<Mechanism>,
    /// Pattern-level budgets, ascending.
    pub eps_grid: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub seed: u64,
    /// Baseline window length in ticks; defaults to the largest query window.
    #[serde(default)]
    pub baseline_w: Option<i64>,
    #[serde(default)]
    pub adaptive: AdaptiveSettings,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.mechanisms.is_empty() {
            return Err(Error::InvalidPlan("no mechanisms listed".into()));
        }
        if self.eps_grid.is_empty() {
            return Err(Error::InvalidPlan("empty eps grid".into()));
        }
        if self.eps_grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidPlan("eps grid must be sorted ascending".into()));
        }
        if self.eps_grid.iter().any(|&e| !e.is_finite() || e < 0.0) {
            return Err(Error::InvalidPlan("eps grid entries must be >= 0".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidPlan("trials must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidPlan(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// One scored (mechanism, eps, trial) cell.
#[derive(Debug, Clone, Serialize)]
pub struct QualityReport {
    pub mechanism: String,
    pub eps: f64,
    pub trial: u64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub prec: f64,
    pub rec: f64,
    pub q: f64,
    pub alpha: f64,
    pub mre: f64,
    pub seed: u64,
}

/// A cell that could not be prepared (e.g. baseline calibration failure).
#[derive(Debug, Clone, Serialize)]
pub struct FailedCell {
    pub mechanism: String,
    pub eps: f64,
    pub error: String,
}

#[derive(Debug, Default)]
pub struct ExperimentOutcome {
    pub rows: Vec<QualityReport>,
    pub failures: Vec<FailedCell>,
}

enum Prepared {
    Ppm(BTreeMap<String, BudgetAllocation>),
    EventProbs(Vec<f64>),
}

fn prepare_cell(
    mechanism: Mechanism,
    eps: f64,
    eps_index: usize,
    stream: &EventStream,
    queries: &[PatternQuery],
    scorer: &Scorer,
    plan: &ExperimentPlan,
) -> Result<Prepared> {
    let private: Vec<&PatternQuery> = queries
        .iter()
        .filter(|q| q.privacy_role == PrivacyRole::Private)
        .collect();
    match mechanism {
        Mechanism::Uniform => {
            let mut allocs = BTreeMap::new();
            for q in private {
                allocs.insert(
                    q.id.clone(),
                    crate::ppm::uniform_allocate(q.id.clone(), eps, q.len())?,
                );
            }
            Ok(Prepared::Ppm(allocs))
        }
        Mechanism::Adaptive => {
            let mut allocs = BTreeMap::new();
            for (qi, q) in private.iter().enumerate() {
                let cfg = OptimizerConfig {
                    delta_eps: plan.adaptive.delta_eps,
                    alpha: plan.alpha,
                    trials: plan.adaptive.trials,
                    max_iters: plan.adaptive.max_iters,
                    seed: derive_seed(
                        plan.seed,
                        &[0xADA0, mechanism.seed_tag(), eps_index as u64, qi as u64],
                    ),
                    ..OptimizerConfig::default()
                };
                let outcome = optimize(stream, queries, &q.id, eps, &cfg)?;
                allocs.insert(q.id.clone(), outcome.allocation);
            }
            Ok(Prepared::Ppm(allocs))
        }
        Mechanism::Bd | Mechanism::Ba | Mechanism::Landmark => {
            let w = plan
                .baseline_w
                .or_else(|| queries.iter().map(|q| q.window).max())
                .unwrap_or(1);
            let landmark_ticks = if mechanism == Mechanism::Landmark {
                // Landmarks are the timestamps of private-pattern elements.
                let mut ticks = BTreeSet::new();
                for inst in scorer.private_index().instances() {
                    for &pos in &inst.element_positions {
                        ticks.insert(stream.events()[pos as usize].timestamp);
                    }
                }
                ticks
            } else {
                BTreeSet::new()
            };
            let mut cfg = BaselineConfig {
                kind: mechanism.baseline_kind().expect("baseline mechanism"),
                w,
                eps_native: eps,
                landmark_ticks,
                ..BaselineConfig::default()
            };
            if eps > 0.0 {
                let ground = detect(stream, queries)?;
                let private_instances: Vec<_> = ground
                    .instances()
                    .iter()
                    .filter(|i| private.iter().any(|q| q.id == i.query_id))
                    .cloned()
                    .collect();
                cfg = calibrate(&cfg, stream, &private_instances, eps)?;
            } else {
                cfg.eps_native = 0.0;
            }
            let map = allocate_baseline(stream, &cfg)?;
            let eps_per_event = event_epsilons(stream, &map);
            // f64 cannot represent flip probabilities below e^-700; capping
            // a per-event budget there only adds noise.
            let probs = eps_per_event
                .iter()
                .map(|&e| epsilon_to_p(e.min(700.0)))
                .collect::<Result<Vec<f64>>>()?;
            Ok(Prepared::EventProbs(probs))
        }
    }
}

/// Run the full sweep: for every (mechanism, eps, trial) cell, allocate or
/// calibrate, perturb, detect, and score. Deterministic given the plan seed;
/// cells that fail to prepare are recorded and the run continues.
pub fn run_experiment(
    stream: &EventStream,
    queries: &[PatternQuery],
    plan: &ExperimentPlan,
) -> Result<ExperimentOutcome> {
    plan.validate()?;
    let scorer = Scorer::new(stream, queries, plan.alpha)?;
    let q_ord = scorer.q_ord();
    let mut outcome = ExperimentOutcome::default();
    for &mechanism in &plan.mechanisms {
        for (ei, &eps) in plan.eps_grid.iter().enumerate() {
            let prepared =
                match prepare_cell(mechanism, eps, ei, stream, queries, &scorer, plan) {
                    Ok(p) => p,
                    Err(e) => {
                        outcome.failures.push(FailedCell {
                            mechanism: mechanism.name().into(),
                            eps,
                            error: e.to_string(),
                        });
                        continue;
                    }
                };
            let rows: Result<Vec<QualityReport>> = (0..plan.trials)
                .into_par_iter()
                .map(|trial| {
                    let seed = derive_seed(plan.seed, &[mechanism.seed_tag(), ei as u64, trial]);
                    let counts = match &prepared {
                        Prepared::Ppm(allocs) => scorer.trial_ppm(allocs, seed)?,
                        Prepared::EventProbs(probs) => scorer.trial_event_probs(probs, seed)?,
                    };
                    let q = quality(&counts, plan.alpha)?;
                    Ok(QualityReport {
                        mechanism: mechanism.name().into(),
                        eps,
                        trial,
                        tp: counts.tp,
                        fp: counts.fp,
                        fn_: counts.fn_,
                        prec: counts.precision(),
                        rec: counts.recall(),
                        q,
                        alpha: plan.alpha,
                        mre: mre(q_ord, q)?,
                        seed,
                    })
                })
                .collect();
            outcome.rows.extend(rows?);
        }
    }
    Ok(outcome)
}

/// Write result rows as CSV with the fixed header
/// `mechanism,eps,trial,tp,fp,fn,prec,rec,q,mre`.
pub fn write_reports_csv(rows: &[QualityReport], mut out: impl Write) -> Result<()> {
    let mut buf = String::from("mechanism,eps,trial,tp,fp,fn,prec,rec,q,mre\n");
    for r in rows {
        buf.push_str(&format!(
            "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6}\n",
            r.mechanism, r.eps, r.trial, r.tp, r.fp, r.fn_, r.prec, r.rec, r.q, r.mre
        ));
    }
    out.write_all(buf.as_bytes())
        .map_err(|e| Error::Malformed(format!("write failed: {e}")))
}

/// Mean and standard error of the mean over per-trial values.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::{ElementPredicate, PatternInstance};
    use crate::ppm::{apply_ppm, uniform_allocate};
    use crate::stream::Event;

    fn ev(seq_no: u64, timestamp: i64, kind: &str) -> Event {
        Event {
            stream_id: "s".into(),
            seq_no,
            timestamp,
            kind: kind.into(),
            payload: None,
        }
    }

    fn query(id: &str, kinds: &[&str], window: i64, role: PrivacyRole) -> PatternQuery {
        PatternQuery {
            id: id.into(),
            elements: kinds.iter().map(|k| ElementPredicate::kind(k)).collect(),
            mode: MatchMode::Set,
            window,
            privacy_role: role,
        }
    }

    #[test]
    fn confusion_identity() {
        let q = query("T", &["a"], 10, PrivacyRole::Target);
        let s = EventStream::from_ordered(vec![ev(0, 1, "a"), ev(0, 12, "a")]).unwrap();
        let ground = detect(&s, &[q.clone()]).unwrap();
        let c = confusion(&ground, &ground, &[q]).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_), (2, 0, 0));
        assert_eq!(c.precision(), 1.0);
        assert_eq!(c.recall(), 1.0);
    }

    #[test]
    fn confusion_empty_reported() {
        let q = query("T", &["a"], 10, PrivacyRole::Target);
        let s = EventStream::from_ordered(vec![ev(0, 1, "a")]).unwrap();
        let ground = detect(&s, &[q.clone()]).unwrap();
        let reported = PatternStream::default();
        let c = confusion(&ground, &reported, &[q]).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_), (0, 0, 1));
        assert_eq!(c.precision(), 0.0);
        assert_eq!(c.recall(), 0.0);
    }

    #[test]
    fn confusion_rejects_unknown_query() {
        let q = query("T", &["a"], 10, PrivacyRole::Target);
        let stray = PatternStream::new(vec![PatternInstance::new("X", vec![ev(1, 1, "a")])]);
        assert!(matches!(
            confusion(&stray, &PatternStream::default(), &[q]),
            Err(Error::UnknownQuery(_))
        ));
    }

    #[test]
    fn quality_arithmetic() {
        let c = ConfusionCounts { tp: 8, fp: 2, fn_: 2 };
        assert!((c.precision() - 0.8).abs() < 1e-12);
        assert!((c.recall() - 0.8).abs() < 1e-12);
        assert!((quality(&c, 0.5).unwrap() - 0.8).abs() < 1e-12);

        let c2 = ConfusionCounts { tp: 6, fp: 4, fn_: 0 };
        assert!((quality(&c2, 1.0).unwrap() - 0.6).abs() < 1e-12);
        assert!((quality(&c2, 0.0).unwrap() - 1.0).abs() < 1e-12);

        let c3 = ConfusionCounts { tp: 3, fp: 2, fn_: 0 };
        // Prec = 0.6, Rec = 1.0, alpha = 0.5 -> 0.8
        assert!((quality(&c3, 0.5).unwrap() - 0.8).abs() < 1e-12);

        let no_ground = ConfusionCounts { tp: 0, fp: 1, fn_: 0 };
        assert!(quality(&no_ground, 0.5).is_err());
    }

    #[test]
    fn mre_arithmetic() {
        assert_eq!(mre(0.9, 0.9).unwrap(), 0.0);
        assert!((mre(0.9, 0.72).unwrap() - 0.2).abs() < 1e-12);
        assert!(mre(0.9, 0.99).unwrap() < 0.0);
        assert!(mre(0.0, 0.5).is_err());
    }

    fn small_dataset() -> (EventStream, Vec<PatternQuery>) {
        // 40 windows of 10 ticks; kinds a, b in every window, c in every
        // second window. Private {a, b}; target {a, c} shares `a`.
        let mut events = Vec::new();
        for w in 0..40i64 {
            events.push(ev(0, w * 10, "a"));
            events.push(ev(0, w * 10 + 1, "b"));
            if w % 2 == 0 {
                events.push(ev(0, w * 10 + 2, "c"));
            }
        }
        let stream = EventStream::from_ordered(events).unwrap();
        let queries = vec![
            query("P", &["a", "b"], 10, PrivacyRole::Private),
            query("T", &["a", "c"], 10, PrivacyRole::Target),
        ];
        (stream, queries)
    }

    #[test]
    fn scorer_matches_full_detection_pipeline() {
        let (stream, queries) = small_dataset();
        let scorer = Scorer::new(&stream, &queries, 0.5).unwrap();
        let ground = detect(&stream, &queries).unwrap();
        let index = PrivateEventIndex::build(&stream, &ground, &queries).unwrap();
        let mut allocs = BTreeMap::new();
        allocs.insert("P".to_string(), uniform_allocate("P", 0.4, 2).unwrap());
        for seed in 0..200u64 {
            let fast = scorer.trial_ppm(&allocs, seed).unwrap();
            let table = apply_ppm(&stream, &index, &allocs, &SeededRng::new(seed)).unwrap();
            let survivors = table.surviving_stream(&stream);
            let reported = detect(&survivors, &queries).unwrap();
            let slow = confusion(&ground, &reported, &queries).unwrap();
            assert_eq!(fast, slow, "seed {seed}");
        }
    }

    #[test]
    fn scorer_requires_target_ground_truth() {
        let s = EventStream::from_ordered(vec![ev(0, 1, "a")]).unwrap();
        let queries = vec![query("T", &["zzz"], 10, PrivacyRole::Target)];
        assert!(matches!(
            Scorer::new(&s, &queries, 0.5),
            Err(Error::NoGroundTruth)
        ));
    }

    #[test]
    fn baselines_perturb_more_events_than_ppm() {
        let (stream, queries) = small_dataset();
        let scorer = Scorer::new(&stream, &queries, 0.5).unwrap();
        let indexed = scorer.private_index().indexed_event_count();
        assert!(indexed < stream.len());
    }

    fn plan(mechanisms: Vec<Mechanism>, eps_grid: Vec<f64>, trials: u64) -> ExperimentPlan {
        ExperimentPlan {
            dataset: PathBuf::from("unused"),
            mechanisms,
            eps_grid,
            trials,
            alpha: 0.5,
            seed: 77,
            baseline_w: None,
            adaptive: AdaptiveSettings {
                trials: 20,
                max_iters: 4,
                delta_eps: None,
            },
        }
    }

    #[test]
    fn experiment_row_count_and_determinism() {
        let (stream, queries) = small_dataset();
        let p = plan(vec![Mechanism::Uniform, Mechanism::Bd], vec![0.5, 1.0, 2.0], 5);
        let one = run_experiment(&stream, &queries, &p).unwrap();
        assert_eq!(one.rows.len(), 2 * 3 * 5);
        assert!(one.failures.is_empty());
        let two = run_experiment(&stream, &queries, &p).unwrap();
        let mut csv1 = Vec::new();
        let mut csv2 = Vec::new();
        write_reports_csv(&one.rows, &mut csv1).unwrap();
        write_reports_csv(&two.rows, &mut csv2).unwrap();
        assert_eq!(csv1, csv2);
    }

    #[test]
    fn uniform_mre_decreases_with_eps() {
        let (stream, queries) = small_dataset();
        let p = plan(vec![Mechanism::Uniform], vec![0.1, 1.0, 5.0], 60);
        let out = run_experiment(&stream, &queries, &p).unwrap();
        let mean_at = |eps: f64| {
            let vals: Vec<f64> = out
                .rows
                .iter()
                .filter(|r| r.eps == eps)
                .map(|r| r.mre)
                .collect();
            mean_stderr(&vals).0
        };
        assert!(mean_at(0.1) > mean_at(1.0));
        assert!(mean_at(1.0) > mean_at(5.0));
    }

    #[test]
    fn uniform_beats_bd_at_equal_pattern_level_budget() {
        let (stream, queries) = small_dataset();
        let p = plan(vec![Mechanism::Uniform, Mechanism::Bd], vec![1.0], 100);
        let out = run_experiment(&stream, &queries, &p).unwrap();
        let mean_of = |m: &str| {
            let vals: Vec<f64> = out
                .rows
                .iter()
                .filter(|r| r.mechanism == m)
                .map(|r| r.mre)
                .collect();
            mean_stderr(&vals).0
        };
        assert!(mean_of("uniform") <= mean_of("bd"));
    }

    #[test]
    fn csv_header_is_fixed() {
        let mut buf = Vec::new();
        write_reports_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "mechanism,eps,trial,tp,fp,fn,prec,rec,q,mre\n"
        );
    }

    #[test]
    fn plan_validation() {
        let mut p = plan(vec![Mechanism::Uniform], vec![1.0, 0.5], 5);
        assert!(p.validate().is_err()); // unsorted grid
        p.eps_grid = vec![0.5, 1.0];
        assert!(p.validate().is_ok());
        p.trials = 0;
        assert!(p.validate().is_err());
        p.trials = 1;
        p.mechanisms.clear();
        assert!(p.validate().is_err());
    }
}

//! Adaptive privacy budget distribution.
//!
//! Starting from the even split, the optimizer repeatedly probes, for every
//! element, the reallocation "add one step to this element, take the
//! compensation from the others", estimates the resulting data quality on
//! historical data by Monte Carlo, and commits the best probe while it keeps
//! improving. Probes are evaluated on copies, so they never accumulate, and
//! all probes of one iteration share the same evaluation seed (common random
//! numbers) to cut comparison variance.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{mean_stderr, quality, Scorer};
use crate::matcher::{PatternQuery, PrivacyRole};
use crate::ppm::BudgetAllocation;
use crate::rng::derive_seed;
use crate::stream::EventStream;

/// Compensation rule for the probe "add a step to element i".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConserveMode {
    /// Subtract step/(m-1) from every other element, keeping the total
    /// budget invariant. The default: comparisons at a fixed total stay fair.
    Conserving,
    /// Subtract step/m from every other element, reproducing the listing
    /// verbatim; the total drifts by step/m per committed move.
    PaperLiteral,
}

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    /// Budget increment per probe; `None` uses m * eps / 100.
    pub delta_eps: Option<f64>,
    /// Quality weight between precision and recall.
    pub alpha: f64,
    /// Monte-Carlo repetitions per quality evaluation.
    pub trials: u64,
    /// Outer-loop cap.
    pub max_iters: u64,
    /// Minimum improvement of the quality estimate to keep going; strict
    /// improvement avoids cycling on plateaus.
    pub improve_tol: f64,
    pub conserve_mode: ConserveMode,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            delta_eps: None,
            alpha: 0.5,
            trials: 200,
            max_iters: 40,
            improve_tol: 1e-4,
            conserve_mode: ConserveMode::Conserving,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(d) = self.delta_eps {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "step size must be positive, got {d}"
                )));
            }
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Monte-Carlo estimate of the quality metric under one allocation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QualityEstimate {
    pub q_mean: f64,
    pub q_stderr: f64,
    pub prec: f64,
    pub rec: f64,
}

/// Estimate data quality on historical data: perturb `trials` times with
/// independent sub-seeds, detect target patterns on the perturbed bits, and
/// average `Q = alpha * Prec + (1 - alpha) * Rec` against the unperturbed
/// ground truth.
pub fn estimate_quality(
    historical: &EventStream,
    queries: &[PatternQuery],
    allocs: &BTreeMap<String, BudgetAllocation>,
    cfg: &OptimizerConfig,
) -> Result<QualityEstimate> {
    cfg.validate()?;
    let scorer = Scorer::new(historical, queries, cfg.alpha)?;
    estimate_with_scorer(&scorer, allocs, cfg.trials, cfg.seed)
}

pub(crate) fn estimate_with_scorer(
    scorer: &Scorer,
    allocs: &BTreeMap<String, BudgetAllocation>,
    trials: u64,
    seed: u64,
) -> Result<QualityEstimate> {
    let alpha = scorer.alpha();
    let per_trial: Result<Vec<(f64, f64, f64)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let counts = scorer.trial_ppm(allocs, derive_seed(seed, &[t]))?;
            Ok((
                quality(&counts, alpha)?,
                counts.precision(),
                counts.recall(),
            ))
        })
        .collect();
    let per_trial = per_trial?;
    let qs: Vec<f64> = per_trial.iter().map(|x| x.0).collect();
    let (q_mean, q_stderr) = mean_stderr(&qs);
    let prec = per_trial.iter().map(|x| x.1).sum::<f64>() / per_trial.len() as f64;
    let rec = per_trial.iter().map(|x| x.2).sum::<f64>() / per_trial.len() as f64;
    Ok(QualityEstimate {
        q_mean,
        q_stderr,
        prec,
        rec,
    })
}

/// One line of the optimization trace.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord {
    pub iteration: u64,
    /// Probed element, absent for the initial evaluation.
    pub element: Option<usize>,
    pub q: f64,
    pub stderr: f64,
    pub committed: bool,
}

#[derive(Debug, Clone)]
pub struct OptimizationOutcome {
    pub allocation: BudgetAllocation,
    pub quality: QualityEstimate,
    pub trace: Vec<TraceRecord>,
}

/// The probe "add `delta` to element i, compensate the others"; `None` when
/// it would leave the feasible box (infeasible probes are skipped, never
/// clamped).
fn probe(
    eps: &[f64],
    i: usize,
    delta: f64,
    eps_total: f64,
    mode: ConserveMode,
) -> Option<Vec<f64>> {
    let m = eps.len();
    let compensation = match mode {
        ConserveMode::Conserving => delta / (m - 1) as f64,
        ConserveMode::PaperLiteral => delta / m as f64,
    };
    let mut out = eps.to_vec();
    out[i] += delta;
    if out[i] > eps_total + 1e-9 {
        return None;
    }
    for (j, v) in out.iter_mut().enumerate() {
        if j == i {
            continue;
        }
        *v -= compensation;
        if *v < -1e-9 {
            return None;
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Some(out)
}

/// Bidirectional stepwise budget distribution for one private pattern type.
/// Returns the final allocation together with its quality estimate and the
/// probe/commit trace.
pub fn optimize(
    historical: &EventStream,
    queries: &[PatternQuery],
    private_query_id: &str,
    eps_total: f64,
    cfg: &OptimizerConfig,
) -> Result<OptimizationOutcome> {
    cfg.validate()?;
    if !eps_total.is_finite() || eps_total < 0.0 {
        return Err(Error::InvalidBudget(format!(
            "total budget must be >= 0, got {eps_total}"
        )));
    }
    let query = queries
        .iter()
        .find(|q| q.id == private_query_id)
        .ok_or_else(|| Error::UnknownQuery(private_query_id.to_string()))?;
    if query.privacy_role != PrivacyRole::Private {
        return Err(Error::InvalidConfig(format!(
            "query `{private_query_id}` is not marked PRIVATE"
        )));
    }
    let m = query.len();
    // The subproblem sees one private pattern and the targets; other private
    // patterns get their own optimization runs.
    let relevant: Vec<PatternQuery> = queries
        .iter()
        .filter(|q| q.id == query.id || q.privacy_role == PrivacyRole::Target)
        .cloned()
        .collect();
    let scorer = Scorer::new(historical, &relevant, cfg.alpha)?;
    if scorer.private_index().is_empty() {
        return Err(Error::InvalidConfig(
            "historical data contains no private pattern instance".into(),
        ));
    }

    let mut eps = vec![eps_total / m as f64; m];
    let evaluate = |eps: &[f64], seed_tag: u64| -> Result<QualityEstimate> {
        let mut allocs = BTreeMap::new();
        allocs.insert(
            query.id.clone(),
            BudgetAllocation::from_epsilons(query.id.clone(), eps.to_vec())?,
        );
        estimate_with_scorer(&scorer, &allocs, cfg.trials, derive_seed(cfg.seed, &[seed_tag]))
    };

    let mut incumbent = evaluate(&eps, 0)?;
    let mut trace = vec![TraceRecord {
        iteration: 0,
        element: None,
        q: incumbent.q_mean,
        stderr: incumbent.q_stderr,
        committed: false,
    }];

    // With one element, or nothing to distribute, there is no reallocation.
    if m > 1 && eps_total > 0.0 {
        let delta = cfg.delta_eps.unwrap_or(m as f64 * eps_total / 100.0);
        for iteration in 1..=cfg.max_iters {
            let mut best: Option<(usize, Vec<f64>, QualityEstimate)> = None;
            for i in 0..m {
                let Some(candidate) = probe(&eps, i, delta, eps_total, cfg.conserve_mode) else {
                    continue;
                };
                let est = evaluate(&candidate, iteration)?;
                trace.push(TraceRecord {
                    iteration,
                    element: Some(i),
                    q: est.q_mean,
                    stderr: est.q_stderr,
                    committed: false,
                });
                if best.as_ref().is_none_or(|(_, _, b)| est.q_mean > b.q_mean) {
                    best = Some((i, candidate, est));
                }
            }
            let Some((i, candidate, est)) = best else {
                break; // every probe left the feasible box
            };
            if est.q_mean <= incumbent.q_mean + cfg.improve_tol {
                break;
            }
            eps = candidate;
            incumbent = est;
            trace.push(TraceRecord {
                iteration,
                element: Some(i),
                q: est.q_mean,
                stderr: est.q_stderr,
                committed: true,
            });
        }
    }

    Ok(OptimizationOutcome {
        allocation: BudgetAllocation::from_epsilons(query.id.clone(), eps)?,
        quality: incumbent,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::{ElementPredicate, MatchMode};
    use crate::ppm::uniform_allocate;
    use crate::stream::Event;

    fn ev(timestamp: i64, kind: &str) -> Event {
        Event {
            stream_id: "s".into(),
            seq_no: 0,
            timestamp,
            kind: kind.into(),
            payload: None,
        }
    }

    fn query(id: &str, kinds: &[&str], role: PrivacyRole) -> PatternQuery {
        PatternQuery {
            id: id.into(),
            elements: kinds.iter().map(|k| ElementPredicate::kind(k)).collect(),
            mode: MatchMode::Set,
            window: 10,
            privacy_role: role,
        }
    }

    /// Windows all contain private elements a and b; the target shares a.
    pub(crate) fn shared_element_scenario(windows: i64) -> (EventStream, Vec<PatternQuery>) {
        let mut events = Vec::new();
        for w in 0..windows {
            events.push(ev(w * 10, "a"));
            events.push(ev(w * 10 + 1, "b"));
        }
        let stream = EventStream::from_ordered(events).unwrap();
        let queries = vec![
            query("P", &["a", "b"], PrivacyRole::Private),
            query("T", &["a"], PrivacyRole::Target),
        ];
        (stream, queries)
    }

    fn cfg(trials: u64, seed: u64) -> OptimizerConfig {
        OptimizerConfig {
            trials,
            seed,
            ..OptimizerConfig::default()
        }
    }

    #[test]
    fn quality_closed_form_at_full_noise_single_element() {
        // Single-element private = target pattern, p = 1/2: each true event
        // survives with probability 1/2, so Rec is 1/2 and Prec is 1 where
        // anything is reported at all.
        let mut events = Vec::new();
        for w in 0..400 {
            events.push(ev(w * 10, "a"));
        }
        let stream = EventStream::from_ordered(events).unwrap();
        let queries = vec![
            query("P", &["a"], PrivacyRole::Private),
            query("T", &["a"], PrivacyRole::Target),
        ];
        let mut allocs = BTreeMap::new();
        allocs.insert("P".to_string(), uniform_allocate("P", 0.0, 1).unwrap());
        let est = estimate_quality(&stream, &queries, &allocs, &cfg(200, 9)).unwrap();
        assert!((est.rec - 0.5).abs() < 0.02, "rec {}", est.rec);
        assert!(est.prec > 0.99);
    }

    #[test]
    fn quality_is_perfect_without_noise() {
        let (stream, queries) = shared_element_scenario(50);
        let mut allocs = BTreeMap::new();
        allocs.insert("P".to_string(), uniform_allocate("P", 40.0, 2).unwrap());
        let est = estimate_quality(&stream, &queries, &allocs, &cfg(50, 1)).unwrap();
        assert!((est.q_mean - 1.0).abs() < 1e-9);
        assert_eq!(est.q_stderr, 0.0);
    }

    #[test]
    fn stderr_shrinks_with_sqrt_trials() {
        let (stream, queries) = shared_element_scenario(30);
        let mut allocs = BTreeMap::new();
        allocs.insert("P".to_string(), uniform_allocate("P", 1.0, 2).unwrap());
        let narrow = estimate_quality(&stream, &queries, &allocs, &cfg(2000, 5)).unwrap();
        let wide = estimate_quality(&stream, &queries, &allocs, &cfg(1000, 5)).unwrap();
        let ratio = narrow.q_stderr / wide.q_stderr;
        let expected = 1.0 / 2.0f64.sqrt();
        assert!(
            (ratio - expected).abs() < 0.2 * expected,
            "ratio {ratio}, expected about {expected}"
        );
    }

    #[test]
    fn estimate_requires_target_instances() {
        let mut events = Vec::new();
        for w in 0..5 {
            events.push(ev(w * 10, "a"));
        }
        let stream = EventStream::from_ordered(events).unwrap();
        let queries = vec![
            query("P", &["a"], PrivacyRole::Private),
            query("T", &["nope"], PrivacyRole::Target),
        ];
        let err = estimate_quality(&stream, &queries, &BTreeMap::new(), &cfg(5, 1));
        assert!(matches!(err, Err(Error::NoGroundTruth)));
    }

    #[test]
    fn single_element_returns_uniform_unchanged() {
        let mut events = Vec::new();
        for w in 0..30 {
            events.push(ev(w * 10, "a"));
        }
        let stream = EventStream::from_ordered(events).unwrap();
        let queries = vec![
            query("P", &["a"], PrivacyRole::Private),
            query("T", &["a"], PrivacyRole::Target),
        ];
        let out = optimize(&stream, &queries, "P", 1.0, &cfg(20, 3)).unwrap();
        assert_eq!(out.allocation.per_element(), [1.0]);
    }

    #[test]
    fn optimizer_moves_budget_to_shared_element() {
        let (stream, queries) = shared_element_scenario(300);
        let mut config = cfg(200, 11);
        config.max_iters = 60;
        let out = optimize(&stream, &queries, "P", 1.0, &config).unwrap();
        let eps = out.allocation.per_element();
        assert!(
            eps[0] > eps[1],
            "expected budget concentrated on the shared element, got {eps:?}"
        );
        // Conservation after every commit, checked at the end of the run.
        assert!((out.allocation.epsilon_total() - 1.0).abs() < 1e-9);
        // Committed estimates are non-decreasing.
        let commits: Vec<f64> = out
            .trace
            .iter()
            .filter(|r| r.committed)
            .map(|r| r.q)
            .collect();
        assert!(commits.windows(2).all(|w| w[1] > w[0]));
        // And the adaptive result is at least as good as uniform, within
        // statistical tolerance.
        let mut uni = BTreeMap::new();
        uni.insert("P".to_string(), uniform_allocate("P", 1.0, 2).unwrap());
        let q_uni = estimate_quality(&stream, &queries, &uni, &cfg(200, 123)).unwrap();
        assert!(out.quality.q_mean >= q_uni.q_mean - 2.0 * q_uni.q_stderr);
    }

    #[test]
    fn flat_objective_keeps_initial_allocation() {
        // The target shares nothing with the private pattern, so quality
        // does not depend on the allocation and no probe can improve it.
        let mut events = Vec::new();
        for w in 0..50 {
            events.push(ev(w * 10, "a"));
            events.push(ev(w * 10 + 1, "b"));
            events.push(ev(w * 10 + 2, "c"));
        }
        let stream = EventStream::from_ordered(events).unwrap();
        let queries = vec![
            query("P", &["a", "b"], PrivacyRole::Private),
            query("T", &["c"], PrivacyRole::Target),
        ];
        let out = optimize(&stream, &queries, "P", 1.0, &cfg(25, 2)).unwrap();
        assert_eq!(out.allocation.per_element(), [0.5, 0.5]);
        let commits = out.trace.iter().filter(|r| r.committed).count();
        assert_eq!(commits, 0);
    }

    #[test]
    fn paper_literal_mode_drifts_total() {
        let (stream, queries) = shared_element_scenario(200);
        let mut config = cfg(150, 17);
        config.conserve_mode = ConserveMode::PaperLiteral;
        config.max_iters = 10;
        let out = optimize(&stream, &queries, "P", 1.0, &config).unwrap();
        let commits = out.trace.iter().filter(|r| r.committed).count();
        if commits > 0 {
            let expected = 1.0 + commits as f64 * (1.0 * 2.0 / 100.0) / 2.0;
            assert!(
                (out.allocation.epsilon_total() - expected).abs() < 1e-9,
                "total {} after {commits} commits",
                out.allocation.epsilon_total()
            );
        }
    }

    #[test]
    fn probes_skip_out_of_box_moves() {
        let eps = vec![0.98, 0.02];
        // Raising element 0 by 0.04 would exceed the total budget 1.0.
        assert!(probe(&eps, 0, 0.04, 1.0, ConserveMode::Conserving).is_none());
        // Raising element 1 would push element 0 ... element 0 has room.
        let ok = probe(&eps, 1, 0.04, 1.0, ConserveMode::Conserving).unwrap();
        assert!((ok.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Compensation that would drive an element negative is infeasible.
        let tight = vec![0.99, 0.01];
        assert!(probe(&tight, 0, 0.04, 2.0, ConserveMode::Conserving).is_none());
    }

    #[test]
    fn zero_budget_short_circuits() {
        let (stream, queries) = shared_element_scenario(20);
        let out = optimize(&stream, &queries, "P", 0.0, &cfg(10, 1)).unwrap();
        assert_eq!(out.allocation.per_element(), [0.0, 0.0]);
        assert_eq!(out.allocation.probs(), [0.5, 0.5]);
    }

    #[test]
    fn optimizer_rejects_non_private_query() {
        let (stream, queries) = shared_element_scenario(20);
        assert!(optimize(&stream, &queries, "T", 1.0, &cfg(5, 1)).is_err());
        assert!(optimize(&stream, &queries, "missing", 1.0, &cfg(5, 1)).is_err());
    }
}

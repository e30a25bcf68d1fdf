//! Stream-level baselines adapted to binary randomized response.
//!
//! Budget division (BD) and budget absorption (BA) follow the w-event
//! scheme: any window of `w` consecutive timestamps spends at most the
//! native budget. The landmark baseline gives designated sensitive
//! timestamps a sub-budget and spreads the rest over ordinary ones. All
//! three allocate a budget to every event in the stream, not only to
//! private-pattern events; perturbation then uses the same randomized
//! response primitive as the pattern-level mechanisms, so utility
//! differences reflect budget allocation rather than mechanism family.
//!
//! For a fair comparison at a fixed pattern-level budget, a baseline's
//! native budget is calibrated so that the worst private instance
//! aggregates to the target: the per-instance sum governs the pattern-level
//! guarantee.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::PatternInstance;
use crate::stream::EventStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    /// Split the window budget evenly across the w timestamps.
    Bd,
    /// Fixed per-timestamp budget; empty timestamps are absorbed by the next
    /// publishing one, which then nullifies as many following timestamps.
    Ba,
    /// Landmark timestamps share a sub-budget, the rest goes to others.
    Landmark,
}

#[derive(Debug, Clone)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    /// Window length in timestamps.
    pub w: i64,
    /// The mechanism's native per-window budget.
    pub eps_native: f64,
    /// Timestamps designated as landmarks (landmark baseline only).
    pub landmark_ticks: BTreeSet<i64>,
    /// Fraction of the window budget reserved for landmark timestamps.
    pub landmark_share: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            kind: BaselineKind::Bd,
            w: 1,
            eps_native: 0.0,
            landmark_ticks: BTreeSet::new(),
            landmark_share: 0.5,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.w < 1 {
            return Err(Error::InvalidConfig(format!(
                "baseline window must be >= 1 timestamp, got {}",
                self.w
            )));
        }
        if !self.eps_native.is_finite() || self.eps_native < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "native budget must be >= 0, got {}",
                self.eps_native
            )));
        }
        if !(0.0..=1.0).contains(&self.landmark_share) {
            return Err(Error::InvalidConfig(format!(
                "landmark share must be in [0, 1], got {}",
                self.landmark_share
            )));
        }
        Ok(())
    }
}

/// Per-timestamp budget map: every event at timestamp `t` is perturbed with
/// the budget recorded for `t`. Ticks without events carry no entry.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpsilonMap(std::collections::BTreeMap<i64, f64>);

impl EpsilonMap {
    pub fn get(&self, tick: i64) -> f64 {
        self.0.get(&tick).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.0.iter().map(|(&t, &e)| (t, e))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// JSONL rows `{timestamp, eps}`.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        #[derive(Serialize)]
        struct Row {
            timestamp: i64,
            eps: f64,
        }
        for (timestamp, eps) in self.iter() {
            let line = serde_json::to_string(&Row { timestamp, eps })?;
            out.write_all(line.as_bytes())
                .and_then(|_| out.write_all(b"\n"))
                .map_err(|e| Error::Malformed(format!("write failed: {e}")))?;
        }
        Ok(())
    }
}

/// Allocate a per-timestamp budget to every event-bearing tick of the
/// stream. BD and BA keep every sliding window of `w` consecutive ticks at
/// or below the native budget.
pub fn allocate_baseline(stream: &EventStream, cfg: &BaselineConfig) -> Result<EpsilonMap> {
    cfg.validate()?;
    let mut ticks: Vec<i64> = stream.events().iter().map(|e| e.timestamp).collect();
    ticks.dedup();
    let per_slot = cfg.eps_native / cfg.w as f64;
    let mut map = std::collections::BTreeMap::new();
    match cfg.kind {
        BaselineKind::Bd => {
            for &t in &ticks {
                map.insert(t, per_slot);
            }
        }
        BaselineKind::Ba => {
            let first = match ticks.first() {
                Some(&t) => t,
                None => return Ok(EpsilonMap(map)),
            };
            let mut last_pub: Option<i64> = None;
            let mut nullified_until = i64::MIN;
            for (i, &t) in ticks.iter().enumerate() {
                if t < nullified_until {
                    map.insert(t, 0.0);
                    continue;
                }
                // Absorb budgets of empty, non-nullified ticks since the
                // last publication, at most w - 1 back.
                let start = [
                    last_pub.map(|p| p + 1).unwrap_or(first),
                    nullified_until,
                    t - (cfg.w - 1),
                ]
                .into_iter()
                .max()
                .unwrap();
                let absorbed = if start >= t {
                    0
                } else {
                    let span = (t - start) as usize;
                    let occupied = ticks[..i].iter().rev().take_while(|&&u| u >= start).count();
                    span - occupied
                };
                map.insert(t, (1 + absorbed) as f64 * per_slot);
                if absorbed > 0 {
                    nullified_until = t + 1 + absorbed as i64;
                }
                last_pub = Some(t);
            }
        }
        BaselineKind::Landmark => {
            // Tumbling blocks of w ticks; landmark slots share a fraction of
            // the window budget, the others share the rest. A block with no
            // slots of one class hands its full budget to the other, so an
            // all-landmark stream degenerates to the uniform per-slot split.
            let mut idx = 0usize;
            while idx < ticks.len() {
                let block = ticks[idx].div_euclid(cfg.w);
                let block_start = block * cfg.w;
                let mut end = idx + 1;
                while end < ticks.len() && ticks[end].div_euclid(cfg.w) == block {
                    end += 1;
                }
                let landmarks_in_block = cfg
                    .landmark_ticks
                    .range(block_start..block_start + cfg.w)
                    .count() as f64;
                let others_in_block = cfg.w as f64 - landmarks_in_block;
                let (landmark_eps, other_eps) = if landmarks_in_block == 0.0 {
                    (0.0, cfg.eps_native / others_in_block)
                } else if others_in_block == 0.0 {
                    (cfg.eps_native / landmarks_in_block, 0.0)
                } else {
                    (
                        cfg.landmark_share * cfg.eps_native / landmarks_in_block,
                        (1.0 - cfg.landmark_share) * cfg.eps_native / others_in_block,
                    )
                };
                for &t in &ticks[idx..end] {
                    let eps = if cfg.landmark_ticks.contains(&t) {
                        landmark_eps
                    } else {
                        other_eps
                    };
                    map.insert(t, eps);
                }
                idx = end;
            }
        }
    }
    Ok(EpsilonMap(map))
}

/// The budget each event of the stream receives under a per-timestamp map.
pub fn event_epsilons(stream: &EventStream, map: &EpsilonMap) -> Vec<f64> {
    stream
        .events()
        .iter()
        .map(|e| map.get(e.timestamp))
        .collect()
}

/// Pattern-level budget of a per-event allocation: the worst private
/// instance governs the guarantee, so take the maximum over instances of
/// the summed element budgets. No instances means nothing is spent on the
/// pattern: 0.
pub fn pattern_level_epsilon_of(map: &EpsilonMap, private_instances: &[PatternInstance]) -> f64 {
    private_instances
        .iter()
        .map(|inst| {
            inst.events
                .iter()
                .map(|e| map.get(e.timestamp))
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Scale a baseline's native budget so its pattern-level budget on this
/// stream equals `eps_target` within 1e-6 (bisection with a bracket check).
pub fn calibrate(
    cfg: &BaselineConfig,
    stream: &EventStream,
    private_instances: &[PatternInstance],
    eps_target: f64,
) -> Result<BaselineConfig> {
    if !(eps_target > 0.0) || !eps_target.is_finite() {
        return Err(Error::Calibration(format!(
            "target budget must be positive, got {eps_target}"
        )));
    }
    let aggregate = |native: f64| -> Result<f64> {
        let mut c = cfg.clone();
        c.eps_native = native;
        let map = allocate_baseline(stream, &c)?;
        Ok(pattern_level_epsilon_of(&map, private_instances))
    };
    let mut hi = eps_target.max(1.0);
    let mut f_hi = aggregate(hi)?;
    let mut grow = 0;
    while f_hi < eps_target {
        grow += 1;
        if grow > 80 {
            return Err(Error::Calibration(format!(
                "aggregated pattern-level budget stalls at {f_hi}, short of target {eps_target} \
                 (no private instances, or allocation does not scale)"
            )));
        }
        let next = hi * 2.0;
        let f_next = aggregate(next)?;
        if f_next < f_hi {
            return Err(Error::Calibration(
                "aggregated budget decreased while the native budget grew".into(),
            ));
        }
        hi = next;
        f_hi = f_next;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = aggregate(mid)?;
        if (f_mid - eps_target).abs() <= 1e-9 {
            lo = mid;
            hi = mid;
            break;
        }
        if f_mid < eps_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let native = 0.5 * (lo + hi);
    let achieved = aggregate(native)?;
    if (achieved - eps_target).abs() > 1e-6 {
        return Err(Error::Calibration(format!(
            "bisection converged to {achieved}, target {eps_target}"
        )));
    }
    let mut out = cfg.clone();
    out.eps_native = native;
    Ok(out)
}

//! Pattern-level privacy mechanism core.
//!
//! Existence bits of events that belong to detected private pattern
//! instances are perturbed by randomized response: a bit is flipped with
//! probability `p_i = 1/(1 + e^{eps_i})`, so the per-event budget is
//! `eps_i = ln((1 - p_i)/p_i)` and budgets add up across the elements of one
//! instance. Events outside every private instance pass through unperturbed.
//!
//! The module also houses an exact verification oracle that enumerates all
//! response vectors of one instance and bounds the log-probability ratio
//! across a pair of pattern-level neighbor streams.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcher::{PatternQuery, PatternStream, PrivateEventIndex};
use crate::rng::SeededRng;
use crate::stream::{EventId, EventStream};

/// Budgets above this cannot be represented by a flip probability in f64.
const MAX_ELEMENT_EPSILON: f64 = 700.0;

/// Convert a per-event budget to a flip probability in (0, 1/2].
pub fn epsilon_to_p(eps: f64) -> Result<f64> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::InvalidBudget(format!(
            "per-event budget must be a finite non-negative number, got {eps}"
        )));
    }
    if eps > MAX_ELEMENT_EPSILON {
        return Err(Error::InvalidBudget(format!(
            "per-event budget {eps} exceeds double-precision range"
        )));
    }
    Ok(1.0 / (1.0 + eps.exp()))
}

/// Per-event budget of a flip probability: `ln((1 - p)/p)`.
pub fn p_to_epsilon(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 0.5) {
        return Err(Error::InvalidBudget(format!(
            "flip probability must be in (0, 1/2], got {p}"
        )));
    }
    Ok(((1.0 - p) / p).ln())
}

/// Per-element privacy budgets and flip probabilities for one private
/// pattern type. The total is the sum of the element budgets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetAllocation {
    query_id: String,
    epsilon_total: f64,
    per_element: Vec<f64>,
    probs: Vec<f64>,
}

impl BudgetAllocation {
    /// Build an allocation from per-element budgets.
    pub fn from_epsilons(query_id: impl Into<String>, per_element: Vec<f64>) -> Result<Self> {
        if per_element.is_empty() {
            return Err(Error::InvalidBudget(
                "allocation needs at least one element".into(),
            ));
        }
        let probs = per_element
            .iter()
            .map(|&e| epsilon_to_p(e))
            .collect::<Result<Vec<f64>>>()?;
        Ok(BudgetAllocation {
            query_id: query_id.into(),
            epsilon_total: per_element.iter().sum(),
            per_element,
            probs,
        })
    }

    pub fn query_id(&self) -> &str {
        &self.query_id
    }

    pub fn epsilon_total(&self) -> f64 {
        self.epsilon_total
    }

    pub fn per_element(&self) -> &[f64] {
        &self.per_element
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.per_element.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_element.is_empty()
    }
}

/// Distribute a total budget evenly over `m` pattern elements.
pub fn uniform_allocate(
    query_id: impl Into<String>,
    eps_total: f64,
    m: usize,
) -> Result<BudgetAllocation> {
    if m == 0 {
        return Err(Error::InvalidBudget(
            "cannot allocate a budget over zero elements".into(),
        ));
    }
    if !eps_total.is_finite() || eps_total < 0.0 {
        return Err(Error::InvalidBudget(format!(
            "total budget must be a finite non-negative number, got {eps_total}"
        )));
    }
    BudgetAllocation::from_epsilons(query_id, vec![eps_total / m as f64; m])
}

/// Total budget guaranteed by an allocation: the sum over elements of
/// `ln((1 - p_j)/p_j)`.
pub fn composed_epsilon(alloc: &BudgetAllocation) -> f64 {
    alloc
        .probs()
        .iter()
        .map(|&p| ((1.0 - p) / p).ln())
        .sum()
}

/// One randomized response: keep the input bit with probability `1 - p`,
/// flip it with probability `p`. Consumes exactly one uniform draw.
pub fn randomize(input_bit: bool, p: f64, rng: &mut SeededRng) -> bool {
    assert!(p > 0.0 && p <= 0.5, "flip probability out of range: {p}");
    if rng.uniform() < p {
        !input_bit
    } else {
        input_bit
    }
}

/// One recorded randomized response for an element of a private instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryResponse {
    /// Index of the private instance (pattern-stream order).
    pub instance_id: usize,
    /// Element position within the instance (0-based).
    pub element_index: usize,
    pub event: EventId,
    pub input_bit: bool,
    pub output_bit: bool,
}

impl BinaryResponse {
    pub fn flipped(&self) -> bool {
        self.input_bit != self.output_bit
    }
}

#[derive(Serialize)]
struct ResponseRecord {
    instance_id: usize,
    element_index: usize,
    input_bit: u8,
    output_bit: u8,
}

/// Perturbed existence view of a stream: per-event reported bits plus the
/// per-(instance, element) response table behind them.
#[derive(Debug, Clone)]
pub struct PerturbedTable {
    reported: Vec<bool>,
    responses: Vec<BinaryResponse>,
}

impl PerturbedTable {
    /// Reported existence bit per stream position. Events in no private
    /// instance report their true existence; an event in k instances reports
    /// the AND of its k responses.
    pub fn reported(&self) -> &[bool] {
        &self.reported
    }

    pub fn responses(&self) -> &[BinaryResponse] {
        &self.responses
    }

    /// The stream as data consumers see it: events whose reported bit is
    /// false are withheld. Identities are preserved for overlap checks.
    pub fn surviving_stream(&self, stream: &EventStream) -> EventStream {
        stream.masked(&self.reported)
    }

    /// Serialize the response table as JSONL rows
    /// `{instance_id, element_index, input_bit, output_bit}`.
    pub fn write_responses_jsonl(&self, mut out: impl Write) -> Result<()> {
        for r in &self.responses {
            let rec = ResponseRecord {
                instance_id: r.instance_id,
                element_index: r.element_index,
                input_bit: r.input_bit as u8,
                output_bit: r.output_bit as u8,
            };
            let line = serde_json::to_string(&rec)?;
            out.write_all(line.as_bytes())
                .and_then(|_| out.write_all(b"\n"))
                .map_err(|e| Error::Malformed(format!("write failed: {e}")))?;
        }
        Ok(())
    }
}

/// Draw the randomized responses for every (instance, element) pair of the
/// index, in instance order then element order, and hand each to `sink`
/// together with the affected stream position. Instance `i` draws from the
/// sub-generator `rng.derive(&[i])`, so disjoint instances are independent
/// and any parallel schedule reproduces the same responses.
pub(crate) fn perturb_responses(
    index: &PrivateEventIndex,
    allocs: &BTreeMap<String, BudgetAllocation>,
    rng: &SeededRng,
    mut sink: impl FnMut(usize, usize, u32, bool),
) -> Result<()> {
    for (i, inst) in index.instances().iter().enumerate() {
        let alloc = allocs.get(&inst.query_id).ok_or_else(|| {
            Error::InvalidBudget(format!(
                "no allocation provided for private query `{}`",
                inst.query_id
            ))
        })?;
        if alloc.len() != inst.element_positions.len() {
            return Err(Error::AllocationLength {
                query: inst.query_id.clone(),
                got: alloc.len(),
                want: inst.element_positions.len(),
            });
        }
        let mut sub = rng.derive(&[i as u64]);
        for (k, &pos) in inst.element_positions.iter().enumerate() {
            let out = randomize(true, alloc.probs()[k], &mut sub);
            sink(i, k, pos, out);
        }
    }
    Ok(())
}

/// Apply the pattern-level privacy mechanism: each element event of each
/// private instance receives an independent randomized response with that
/// element's flip probability; all other events pass through unperturbed.
pub fn apply_ppm(
    stream: &EventStream,
    index: &PrivateEventIndex,
    allocs: &BTreeMap<String, BudgetAllocation>,
    rng: &SeededRng,
) -> Result<PerturbedTable> {
    let mut reported = vec![true; stream.len()];
    let mut responses = Vec::new();
    perturb_responses(index, allocs, rng, |instance_id, element_index, pos, out| {
        reported[pos as usize] &= out;
        responses.push(BinaryResponse {
            instance_id,
            element_index,
            event: stream.events()[pos as usize].id(),
            input_bit: true,
            output_bit: out,
        });
    })?;
    Ok(PerturbedTable {
        reported,
        responses,
    })
}

/// Locate the single differing (instance, element) pair of two pattern-level
/// neighbor streams, rejecting anything that violates the neighbor
/// definition with a diagnostic naming the violated clause.
fn neighbor_difference(
    query: &PatternQuery,
    left: &PatternStream,
    right: &PatternStream,
) -> Result<(usize, usize)> {
    if left.len() != right.len() {
        return Err(Error::NotNeighbors(format!(
            "streams have {} and {} instances; neighbors must agree everywhere but one instance",
            left.len(),
            right.len()
        )));
    }
    let diffs: Vec<usize> = left
        .instances()
        .iter()
        .zip(right.instances())
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(i, _)| i)
        .collect();
    match diffs.len() {
        0 => {
            return Err(Error::NotNeighbors(
                "streams are identical; exactly one instance must differ".into(),
            ))
        }
        1 => {}
        n => {
            return Err(Error::NotNeighbors(format!(
                "{n} instances differ; all instances but one must be equal"
            )))
        }
    }
    let i = diffs[0];
    let (a, b) = (&left.instances()[i], &right.instances()[i]);
    if a.query_id != b.query_id {
        return Err(Error::NotNeighbors(format!(
            "differing instances have types `{}` and `{}`; both must be instances of the protected type",
            a.query_id, b.query_id
        )));
    }
    if a.query_id != query.id {
        return Err(Error::NotNeighbors(format!(
            "differing instance has type `{}`, not the protected type `{}`",
            a.query_id, query.id
        )));
    }
    if a.events.len() != b.events.len() {
        return Err(Error::NotNeighbors(format!(
            "differing instances have lengths {} and {}; in-pattern neighbors must have equal length",
            a.events.len(),
            b.events.len()
        )));
    }
    let elem_diffs: Vec<usize> = (0..a.events.len())
        .filter(|&k| a.events[k] != b.events[k])
        .collect();
    if elem_diffs.len() != 1 {
        return Err(Error::NotNeighbors(format!(
            "instances differ in {} elements; in-pattern neighbors differ in exactly one",
            elem_diffs.len()
        )));
    }
    Ok((i, elem_diffs[0]))
}

/// Exact privacy verification for one private pattern type: enumerate all
/// 2^m response vectors of the differing instance and return the maximum
/// absolute log-ratio of their probabilities under the two neighbors.
///
/// The result never exceeds [`composed_epsilon`] of the allocation, and for
/// neighbors differing in element `i` it equals that element's budget
/// exactly: the terms of equal elements cancel and only the differing
/// element contributes `ln((1 - p_i)/p_i)`.
pub fn verify_pattern_level_dp(
    query: &PatternQuery,
    alloc: &BudgetAllocation,
    left: &PatternStream,
    right: &PatternStream,
) -> Result<f64> {
    let m = alloc.len();
    if m > 12 {
        return Err(Error::InvalidConfig(format!(
            "pattern length {m} exceeds the enumeration limit of 12"
        )));
    }
    let (inst, elem) = neighbor_difference(query, left, right)?;
    let inst_len = left.instances()[inst].events.len();
    if inst_len != m {
        return Err(Error::AllocationLength {
            query: query.id.clone(),
            got: m,
            want: inst_len,
        });
    }
    // Input bits for the element slots: under the left stream every element
    // event exists as queried (1); under the right stream the differing slot
    // answers about a different occurrence (0). Probabilities are
    // accumulated in log space.
    let log_keep: Vec<f64> = alloc.probs().iter().map(|&p| (1.0 - p).ln()).collect();
    let log_flip: Vec<f64> = alloc.probs().iter().map(|&p| p.ln()).collect();
    let mut max_abs = 0.0f64;
    for r in 0u32..(1 << m) {
        let mut log_left = 0.0;
        let mut log_right = 0.0;
        for k in 0..m {
            let bit = (r >> k) & 1 == 1;
            log_left += if bit { log_keep[k] } else { log_flip[k] };
            let right_input = k != elem;
            log_right += if bit == right_input {
                log_keep[k]
            } else {
                log_flip[k]
            };
        }
        max_abs = max_abs.max((log_left - log_right).abs());
    }
    debug_assert!(max_abs <= composed_epsilon(alloc) + 1e-9);
    Ok(max_abs)
}

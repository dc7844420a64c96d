//! Run traces: structured records of every oracle evaluation and every
//! solver iteration, serializable as JSON Lines.
//!
//! A trace file interleaves the two record kinds chronologically: the
//! evaluations charged to an iteration appear before that iteration's
//! summary record. Readers distinguish the kinds structurally (evaluation
//! records carry `eval_index`, iteration records carry `k`), so no type tag
//! is stored.

use serde::{Deserialize, Serialize};
use std::io::{self, BufRead, Write};

/// What an oracle evaluation was spent on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalEvent {
    /// Evaluation of the incumbent iterate.
    Center,
    /// Evaluation of an interpolation point introduced by geometry
    /// maintenance.
    Geometry,
    /// Evaluation of a trust-region trial point.
    Trial,
}

/// One oracle evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    /// 1-based position in the run's evaluation sequence.
    pub eval_index: usize,
    /// The evaluated point.
    pub point: Vec<f64>,
    /// The noisy value the oracle returned.
    pub noisy_value: f64,
    /// Noiseless objective value when the oracle can report one; omitted
    /// from serialized records otherwise.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub true_value: Option<f64>,
    /// The iteration the evaluation was charged to.
    pub iteration: usize,
    /// What the evaluation was spent on.
    pub event: EvalEvent,
}

/// Why an iteration ended without a ranked trial step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    /// The model was not certified valid and the proposed step was shorter
    /// than the small-step fraction of the trust radius; the trial was not
    /// evaluated.
    SmallStepNotValid,
    /// The predicted decrease was too small to rank the (evaluated) trial;
    /// the iteration counts as rejected.
    DegeneratePrediction,
    /// The evaluation budget ran out partway through the iteration.
    BudgetExhausted,
}

/// Summary of one solver iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Iteration counter, from 0.
    pub k: usize,
    /// Relaxed acceptance ratio; absent when no ratio was computed.
    pub rho: Option<f64>,
    /// Whether the trial step was accepted.
    pub accepted: bool,
    /// Trust radius entering the iteration.
    pub delta_before: f64,
    /// Trust radius leaving the iteration.
    pub delta_after: f64,
    /// Model gradient norm; absent when no model was built.
    pub gnorm: Option<f64>,
    /// Trial step norm; absent when no subproblem was solved.
    pub snorm: Option<f64>,
    /// Measured poisedness of the iteration's interpolation set.
    pub lambda: f64,
    /// Whether the geometry was certified within the poisedness threshold.
    pub validity: bool,
    /// Oracle evaluations charged to this iteration.
    pub eval_count: usize,
    /// Why the iteration ended without a ranked step, when it did.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub skip_reason: Option<SkipReason>,
    /// Sampling radius used for geometry this iteration.
    pub sampling_radius: f64,
    /// Noise estimate in force this iteration.
    pub noise_estimate: f64,
    /// Gradient-Lipschitz estimate in force this iteration.
    pub lipschitz_estimate: f64,
    /// Noisy value at the iteration's starting center.
    pub center_value: f64,
    /// Noisy value at the center left in place for the next iteration.
    pub next_center_value: f64,
    /// Lowest noisy value seen so far across all evaluations.
    pub best_value: f64,
}

/// Complete record of a solver run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    /// Every oracle evaluation, in evaluation order.
    pub evaluations: Vec<EvalRecord>,
    /// Every iteration summary, in iteration order.
    pub iterations: Vec<IterationRecord>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TraceLine {
    Eval(EvalRecord),
    Iteration(IterationRecord),
}

impl RunTrace {
    /// An empty trace.
    pub fn new() -> Self {
        Self::default()
    }

    /// Writes the trace as JSON Lines, interleaving records
    /// chronologically: each iteration's evaluations precede its summary.
    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> io::Result<()> {
        let mut next_eval = 0;
        for record in &self.iterations {
            while next_eval < self.evaluations.len()
                && self.evaluations[next_eval].iteration <= record.k
            {
                write_line(&mut writer, &self.evaluations[next_eval])?;
                next_eval += 1;
            }
            write_line(&mut writer, record)?;
        }
        for eval in &self.evaluations[next_eval..] {
            write_line(&mut writer, eval)?;
        }
        Ok(())
    }

    /// Reads a trace previously written by [`RunTrace::write_jsonl`].
    ///
    /// # Errors
    ///
    /// Returns an [`io::Error`] of kind `InvalidData` for lines that parse
    /// as neither record kind, or any underlying read error.
    pub fn read_jsonl<R: BufRead>(reader: R) -> io::Result<Self> {
        let mut trace = Self::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: TraceLine = serde_json::from_str(&line)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
            match parsed {
                TraceLine::Eval(record) => trace.evaluations.push(record),
                TraceLine::Iteration(record) => trace.iterations.push(record),
            }
        }
        Ok(trace)
    }
}

fn write_line<W: Write, T: Serialize>(writer: &mut W, record: &T) -> io::Result<()> {
    let json = serde_json::to_string(record).map_err(io::Error::other)?;
    writer.write_all(json.as_bytes())?;
    writer.write_all(b"\n")
}

//! Monte Carlo batches of independent trials.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{AnalysisInterval, RunConfig, ScenarioConfig};
use super::trial::{run_trial, TrialTrace};
use crate::behavior::{classify_ownership_profile, detect_occlusion_aware, OcclusionView, OwnershipCategory};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub index: usize,
    pub seed: u64,
    pub trace: Option<TrialTrace>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchAggregates {
    pub completed: usize,
    pub failed: usize,
    pub checkpoints: Vec<usize>,
    /// Category frequency (fraction of completed trials) per checkpoint.
    pub category_freq: Vec<BTreeMap<OwnershipCategory, f64>>,
    /// Mean FoV coverage per target per step, `[t][k]`.
    pub coverage_mean: Vec<Vec<f64>>,
}

impl BatchAggregates {
    /// Fraction of trials whose final checkpoint is the cooperative goal.
    pub fn final_goal_freq(&self) -> f64 {
        self.category_freq
            .last()
            .and_then(|m| m.get(&OwnershipCategory::Goal))
            .copied()
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub scenario: ScenarioConfig,
    pub run: RunConfig,
    pub outcomes: Vec<TrialOutcome>,
    pub aggregates: BatchAggregates,
}

impl BatchResult {
    pub fn traces(&self) -> Vec<&TrialTrace> {
        self.outcomes.iter().filter_map(|o| o.trace.as_ref()).collect()
    }
}

/// Sankey checkpoints `{0, L/4, L/2, 3L/4, L}`, each clamped to the last step with defined
/// m-ownership (`L - m`).
pub fn checkpoints(duration: usize, m: usize) -> Vec<usize> {
    let last = duration.saturating_sub(m);
    [0, duration / 4, duration / 2, 3 * duration / 4, duration]
        .iter()
        .map(|&k| k.min(last))
        .collect()
}

/// Ownership category of one trace at each checkpoint.
pub fn trace_categories(trace: &TrialTrace, scenario: &ScenarioConfig) -> Result<Vec<OwnershipCategory>> {
    let m = scenario.ownership.m;
    let own = trace.ownership(m)?;
    let profile = scenario.ownership_profile();
    Ok(checkpoints(scenario.duration, m)
        .into_iter()
        .map(|k| match own.get(k).and_then(Option::as_ref) {
            Some(state) => classify_ownership_profile(state, &profile),
            None => OwnershipCategory::Other,
        })
        .collect())
}

pub fn aggregate(traces: &[&TrialTrace], scenario: &ScenarioConfig, failed: usize) -> Result<BatchAggregates> {
    let cps = checkpoints(scenario.duration, scenario.ownership.m);
    let mut category_freq = vec![BTreeMap::new(); cps.len()];
    for trace in traces {
        for (c, cat) in trace_categories(trace, scenario)?.into_iter().enumerate() {
            *category_freq[c].entry(cat).or_insert(0.0) += 1.0;
        }
    }
    let n = traces.len().max(1) as f64;
    for col in &mut category_freq {
        col.values_mut().for_each(|v| *v /= n);
    }
    let steps = scenario.duration + 1;
    let coverage_mean = (0..scenario.targets.len())
        .map(|t| {
            let mut acc = vec![0.0; steps];
            for trace in traces {
                for (k, c) in trace.fov_coverage(t).into_iter().enumerate() {
                    acc[k] += c as f64;
                }
            }
            acc.into_iter().map(|v| v / n).collect()
        })
        .collect();
    Ok(BatchAggregates {
        completed: traces.len(),
        failed,
        checkpoints: cps,
        category_freq,
        coverage_mean,
    })
}

/// Run `run.trials` trials with seeds `base_seed + i`. Failed trials are recorded, not fatal.
pub fn run_batch(scenario: &ScenarioConfig, run: &RunConfig) -> Result<BatchResult> {
    scenario.validate()?;
    run.validate(scenario.agents.len())?;
    let outcomes: Vec<TrialOutcome> = (0..run.trials)
        .into_par_iter()
        .map(|index| {
            let seed = run.base_seed.wrapping_add(index as u64);
            match run_trial(scenario, run, seed) {
                Ok(trace) => TrialOutcome {
                    index,
                    seed,
                    trace: Some(trace),
                    error: None,
                },
                Err(e) => TrialOutcome {
                    index,
                    seed,
                    trace: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let traces: Vec<&TrialTrace> = outcomes.iter().filter_map(|o| o.trace.as_ref()).collect();
    let failed = outcomes.len() - traces.len();
    let aggregates = aggregate(&traces, scenario, failed)?;
    Ok(BatchResult {
        scenario: scenario.clone(),
        run: run.clone(),
        outcomes,
        aggregates,
    })
}

/// Concrete occlusion-aware window for one trace: the ground-truth occluded run of the target
/// that overlaps the designated window most, widened by the margin. Returns `(k0, l, h)`.
pub fn resolve_interval(view: &OcclusionView, iv: &AnalysisInterval) -> Option<(usize, usize, usize)> {
    let [lo, hi] = iv.window;
    let (start, end) = view
        .occluded_intervals(iv.target)
        .into_iter()
        .filter(|(s, e)| *s <= hi && *e >= lo)
        .max_by_key(|(s, e)| (e.min(&hi) + 1).saturating_sub(*s.max(&lo)))?;
    let h = iv.margin.min(start);
    Some((start - h, end - start + 2 * h, h))
}

/// Whether trace `trace` shows occlusion-aware behavior on interval `iv`; `None` if the target
/// never ends up occluded in that window or the window runs off the end of the trace.
pub fn occlusion_aware_on(trace: &TrialTrace, scenario: &ScenarioConfig, iv: &AnalysisInterval) -> Result<Option<bool>> {
    let view = trace.occlusion_view(scenario.ownership.m)?;
    let Some((k0, l, h)) = resolve_interval(&view, iv) else {
        return Ok(None);
    };
    if k0 + l >= view.steps() {
        return Ok(None);
    }
    detect_occlusion_aware(&view, iv.target, k0, l, h).map(Some)
}

/// Whether any agent observed an occluder strictly before step `before`.
pub fn detected_before(trace: &TrialTrace, before: usize) -> bool {
    trace.steps.iter().take(before).any(|s| !s.soo_detections.is_empty())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub index: usize,
    pub seed: u64,
    pub error: String,
}

/// Everything about a batch except the traces themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub scenario: ScenarioConfig,
    pub run: RunConfig,
    pub aggregates: BatchAggregates,
    pub failures: Vec<TrialFailure>,
}

impl BatchSummary {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let summary: BatchSummary = serde_json::from_str(text)?;
        summary.scenario.validate()?;
        Ok(summary)
    }
}

impl BatchResult {
    pub fn summary(&self) -> BatchSummary {
        BatchSummary {
            scenario: self.scenario.clone(),
            run: self.run.clone(),
            aggregates: self.aggregates.clone(),
            failures: self
                .outcomes
                .iter()
                .filter_map(|o| {
                    o.error.as_ref().map(|e| TrialFailure {
                        index: o.index,
                        seed: o.seed,
                        error: e.clone(),
                    })
                })
                .collect(),
        }
    }
}

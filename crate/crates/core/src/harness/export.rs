//! Flow, coverage and event exports of completed batches.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::batch::{checkpoints, occlusion_aware_on, resolve_interval, trace_categories};
use super::scenario::ScenarioConfig;
use super::trial::TrialTrace;
use crate::behavior::{detect_ownership_change, occlusion_detections, BehaviorEvent, OwnershipCategory};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SankeyNode {
    pub id: String,
    /// Column index into `SankeyFlow::checkpoints`.
    pub column: usize,
    pub category: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SankeyLink {
    pub source: String,
    pub target: String,
    pub value: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SankeyFlow {
    pub trials: usize,
    /// Time step of each column.
    pub checkpoints: Vec<usize>,
    pub nodes: Vec<SankeyNode>,
    pub links: Vec<SankeyLink>,
}

fn node_id(column: usize, cat: OwnershipCategory) -> String {
    format!("c{column}:{}", cat.name())
}

impl SankeyFlow {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("source,target,value\n");
        for l in &self.links {
            let _ = writeln!(out, "{},{},{}", l.source, l.target, l.value);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Number of trials in each column.
    pub fn column_mass(&self) -> Vec<usize> {
        (0..self.checkpoints.len())
            .map(|c| self.nodes.iter().filter(|n| n.column == c).map(|n| n.count).sum())
            .collect()
    }

    /// Count of `category` in column `column`.
    pub fn count(&self, column: usize, category: OwnershipCategory) -> usize {
        self.nodes
            .iter()
            .find(|n| n.column == column && n.category == category.name())
            .map_or(0, |n| n.count)
    }
}

/// Ownership-category flows between consecutive checkpoints.
pub fn export_sankey(traces: &[&TrialTrace], scenario: &ScenarioConfig) -> Result<SankeyFlow> {
    let cps = checkpoints(scenario.duration, scenario.ownership.m);
    let mut node_counts: Vec<BTreeMap<OwnershipCategory, usize>> = vec![BTreeMap::new(); cps.len()];
    let mut link_counts: Vec<BTreeMap<(OwnershipCategory, OwnershipCategory), usize>> =
        vec![BTreeMap::new(); cps.len().saturating_sub(1)];
    for trace in traces {
        let cats = trace_categories(trace, scenario)?;
        for (c, cat) in cats.iter().enumerate() {
            *node_counts[c].entry(*cat).or_insert(0) += 1;
            if let Some(next) = cats.get(c + 1) {
                *link_counts[c].entry((*cat, *next)).or_insert(0) += 1;
            }
        }
    }
    let nodes = node_counts
        .iter()
        .enumerate()
        .flat_map(|(c, counts)| {
            counts.iter().map(move |(cat, n)| SankeyNode {
                id: node_id(c, *cat),
                column: c,
                category: cat.name().to_string(),
                count: *n,
            })
        })
        .collect();
    let links = link_counts
        .iter()
        .enumerate()
        .flat_map(|(c, counts)| {
            counts.iter().map(move |((a, b), n)| SankeyLink {
                source: node_id(c, *a),
                target: node_id(c + 1, *b),
                value: *n,
            })
        })
        .collect();
    Ok(SankeyFlow {
        trials: traces.len(),
        checkpoints: cps,
        nodes,
        links,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSeries {
    pub target: usize,
    pub name: String,
    /// Mean number of agents whose FoV contains the target, per step.
    pub mean: Vec<f64>,
    /// Fraction of trials in which the target is occluded from every agent, per step.
    pub occluded_fraction: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageExport {
    pub trials: usize,
    pub dt: f64,
    pub series: Vec<CoverageSeries>,
}

impl CoverageExport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("target,k,time,mean_coverage,occluded_fraction\n");
        for s in &self.series {
            for (k, (m, o)) in s.mean.iter().zip(&s.occluded_fraction).enumerate() {
                let _ = writeln!(out, "{},{},{:.4},{:.6},{:.6}", s.name, k, k as f64 * self.dt, m, o);
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Per-target mean FoV coverage with occlusion annotations.
pub fn export_coverage(traces: &[&TrialTrace], scenario: &ScenarioConfig) -> Result<CoverageExport> {
    let steps = scenario.duration + 1;
    let n = traces.len().max(1) as f64;
    let mut series = Vec::with_capacity(scenario.targets.len());
    for (t, cfg) in scenario.targets.iter().enumerate() {
        let mut mean = vec![0.0; steps];
        let mut occluded = vec![0.0; steps];
        for trace in traces {
            let view = trace.occlusion_view(scenario.ownership.m)?;
            for (k, c) in trace.fov_coverage(t).into_iter().enumerate().take(steps) {
                mean[k] += c as f64;
                if view.occluded(t, k) {
                    occluded[k] += 1.0;
                }
            }
        }
        mean.iter_mut().chain(occluded.iter_mut()).for_each(|v| *v /= n);
        series.push(CoverageSeries {
            target: t,
            name: cfg.name.clone(),
            mean,
            occluded_fraction: occluded,
        });
    }
    Ok(CoverageExport {
        trials: traces.len(),
        dt: scenario.dt,
        series,
    })
}

/// Mean of `series` over the inclusive step range `[lo, hi]`.
pub fn interval_mean(series: &[f64], lo: usize, hi: usize) -> f64 {
    let hi = hi.min(series.len().saturating_sub(1));
    if lo > hi {
        return 0.0;
    }
    series[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
}

/// First step at which `a` is strictly below `b`.
pub fn first_drop_below(a: &[f64], b: &[f64]) -> Option<usize> {
    a.iter().zip(b).position(|(x, y)| x < y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEvents {
    pub trial: usize,
    pub seed: u64,
    pub events: Vec<BehaviorEvent>,
}

/// Behavior events of each trace: ownership changes over the whole run, occlusion-aware
/// behavior on the scenario's analysis intervals, and occluder detections.
pub fn export_events(traces: &[&TrialTrace], scenario: &ScenarioConfig) -> Result<Vec<TrialEvents>> {
    let m = scenario.ownership.m;
    let n_agents = scenario.agents.len();
    let n_targets = scenario.targets.len();
    let mut out = Vec::with_capacity(traces.len());
    for (trial, trace) in traces.iter().enumerate() {
        let ownership = trace.ownership(m)?;
        let last = scenario.duration.saturating_sub(m);
        let mut events = Vec::new();
        for t in 0..n_targets {
            for i in 0..n_agents {
                for j in (0..n_agents).filter(|&j| j != i) {
                    if detect_ownership_change(&ownership, i, j, t, 0, last) {
                        events.push(BehaviorEvent::OwnershipChange {
                            from: i,
                            to: j,
                            target: t,
                            k0: 0,
                            l: last,
                        });
                    }
                }
            }
        }
        let view = trace.occlusion_view(m)?;
        for iv in &scenario.intervals {
            if let (Some(true), Some((k0, l, h))) =
                (occlusion_aware_on(trace, scenario, iv)?, resolve_interval(&view, iv))
            {
                events.push(BehaviorEvent::OcclusionAware {
                    target: iv.target,
                    k0,
                    l,
                    h,
                });
            }
        }
        for d in occlusion_detections(&view) {
            events.push(BehaviorEvent::OcclusionDetection {
                occluder: d.occluder,
                agent: d.agent,
                k: d.k,
            });
        }
        out.push(TrialEvents {
            trial,
            seed: trace.seed,
            events,
        });
    }
    Ok(out)
}

pub fn events_to_json(events: &[TrialEvents]) -> Result<String> {
    Ok(serde_json::to_string_pretty(events)?)
}

/// One row per event; fields that do not apply to an event kind are left blank.
pub fn events_to_csv(events: &[TrialEvents]) -> String {
    let mut out = String::from("trial,seed,kind,from,to,occluder,agent,target,k0,l,h,k\n");
    for te in events {
        for e in &te.events {
            let row = match e {
                BehaviorEvent::OwnershipChange { from, to, target, k0, l } => {
                    format!("ownership_change,{from},{to},,,{target},{k0},{l},,")
                }
                BehaviorEvent::OcclusionAware { k0, target, l, h } => {
                    format!("occlusion_aware,,,,,{target},{k0},{l},{h},")
                }
                BehaviorEvent::OcclusionDetection { occluder, agent, k } => {
                    format!("occlusion_detection,,,{occluder},{agent},,,,,{k}")
                }
            };
            let _ = writeln!(out, "{},{},{}", te.trial, te.seed, row);
        }
    }
    out
}

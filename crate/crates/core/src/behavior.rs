//! Cooperative-behavior mining over recorded trials.
//!
//! Everything here is a pure function of a trace. Ownership follows the inclusive window: agent
//! `i` m-owns target `t` at step `k` when `t` is visible to `i` at every step `k..=k+m`.

use std::collections::BTreeSet;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensing::VisibilityMatrix;
use crate::world::{OcclusionObject, Region};

/// `M_{i,k}` for every agent at one step.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OwnershipState {
    pub owned: Vec<BTreeSet<usize>>,
}

impl OwnershipState {
    pub fn owns(&self, agent: usize, target: usize) -> bool {
        self.owned.get(agent).is_some_and(|s| s.contains(&target))
    }

    pub fn owned_by_anyone(&self, target: usize) -> bool {
        self.owned.iter().any(|s| s.contains(&target))
    }
}

/// Ownership per step; `None` where the window runs past the end of the trace.
pub fn compute_m_ownership(visibility: &[VisibilityMatrix], m: usize) -> Result<Vec<Option<OwnershipState>>> {
    if m < 1 {
        return Err(Error::InvalidArgument("ownership window m must be at least 1".into()));
    }
    let len = visibility.len();
    Ok((0..len)
        .map(|k| {
            if k + m >= len {
                return None;
            }
            let window = &visibility[k..=k + m];
            let agents = window[0].agents();
            let targets = window[0].targets();
            let owned = (0..agents)
                .map(|i| (0..targets).filter(|&t| window.iter().all(|v| v.get(i, t))).collect())
                .collect();
            Some(OwnershipState { owned })
        })
        .collect())
}

/// Ownership of `t` moves from agent `i` at `k0` to agent `j` at `k0 + l`.
pub fn detect_ownership_change(
    ownership: &[Option<OwnershipState>],
    i: usize,
    j: usize,
    t: usize,
    k0: usize,
    l: usize,
) -> bool {
    let (Some(Some(start)), Some(Some(end))) = (ownership.get(k0), ownership.get(k0 + l)) else {
        return false;
    };
    start.owns(i, t) && !start.owns(j, t) && end.owns(j, t) && !end.owns(i, t)
}

/// Ownership category used for flow aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OwnershipCategory {
    M0,
    #[serde(rename = "M*_L")]
    Goal,
    #[serde(rename = "Miss 1")]
    Miss1,
    #[serde(rename = "Miss >1")]
    MissGt1,
    #[serde(rename = "other")]
    Other,
}

impl OwnershipCategory {
    pub const ALL: [OwnershipCategory; 5] = [Self::M0, Self::Goal, Self::Miss1, Self::MissGt1, Self::Other];

    pub fn name(self) -> &'static str {
        match self {
            Self::M0 => "M0",
            Self::Goal => "M*_L",
            Self::Miss1 => "Miss 1",
            Self::MissGt1 => "Miss >1",
            Self::Other => "other",
        }
    }
}

/// Declared initial and cooperative ownership patterns for a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OwnershipProfile {
    /// Target ids per agent.
    pub m0: Vec<Vec<usize>>,
    pub goal: Vec<Vec<usize>>,
    /// Accept any assignment of the goal's target groups to agents.
    #[serde(default)]
    pub goal_any_agent: bool,
    /// Number of OOIs in the scenario.
    pub targets: usize,
}

fn matches(state: &OwnershipState, pattern: &[Vec<usize>], any_agent: bool) -> bool {
    if state.owned.len() != pattern.len() {
        return false;
    }
    let groups: Vec<BTreeSet<usize>> = pattern.iter().map(|g| g.iter().copied().collect()).collect();
    if !any_agent {
        return state.owned.iter().zip(&groups).all(|(a, b)| a == b);
    }
    let mut remaining = groups;
    for owned in &state.owned {
        match remaining.iter().position(|g| g == owned) {
            Some(p) => {
                remaining.swap_remove(p);
            }
            None => return false,
        }
    }
    true
}

pub fn classify_ownership_profile(state: &OwnershipState, profile: &OwnershipProfile) -> OwnershipCategory {
    if matches(state, &profile.goal, profile.goal_any_agent) {
        return OwnershipCategory::Goal;
    }
    if matches(state, &profile.m0, false) {
        return OwnershipCategory::M0;
    }
    let unowned = (0..profile.targets).filter(|&t| !state.owned_by_anyone(t)).count();
    match unowned {
        0 => OwnershipCategory::Other,
        1 => OwnershipCategory::Miss1,
        _ => OwnershipCategory::MissGt1,
    }
}

/// What the occlusion detectors need from a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionView {
    pub ownership: Vec<Option<OwnershipState>>,
    /// Ground-truth OOI positions, `[k][t]`.
    pub target_positions: Vec<Vec<Vector2<f64>>>,
    /// FoV rectangles, `[k][i]`.
    pub fovs: Vec<Vec<Region>>,
    pub occlusions: Vec<OcclusionObject>,
}

impl OcclusionView {
    pub fn steps(&self) -> usize {
        self.target_positions.len()
    }

    pub fn occluded(&self, t: usize, k: usize) -> bool {
        let p = self.target_positions[k][t];
        self.occlusions.iter().any(|w| w.contains(&p))
    }

    /// Maximal runs `[start, end]` during which `t` sits inside some occluder.
    pub fn occluded_intervals(&self, t: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = None;
        for k in 0..self.steps() {
            match (self.occluded(t, k), start) {
                (true, None) => start = Some(k),
                (false, Some(s)) => {
                    out.push((s, k - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((s, self.steps() - 1));
        }
        out
    }
}

/// Occlusion-aware behavior on target `t` for the occluded interval `[k0 + h, k0 + l - h]`.
///
/// Errors when `t` is not occluded throughout the interval or the interval leaves the trace.
pub fn detect_occlusion_aware(view: &OcclusionView, t: usize, k0: usize, l: usize, h: usize) -> Result<bool> {
    if 2 * h > l {
        return Err(Error::InvalidArgument(format!("margin h={h} too large for L={l}")));
    }
    let (a, b) = (k0 + h, k0 + l - h);
    if k0 + l >= view.steps() {
        return Err(Error::Precondition(format!(
            "interval ending at {} lies outside a trace of {} steps",
            k0 + l,
            view.steps()
        )));
    }
    if let Some(k) = (a..=b).find(|&k| !view.occluded(t, k)) {
        return Err(Error::Precondition(format!("target {t} is not occluded at step {k}")));
    }
    let owned_at = |k: usize| view.ownership.get(k).and_then(Option::as_ref);
    let before = owned_at(k0).is_some_and(|s| s.owned_by_anyone(t));
    let after = owned_at(k0 + l).is_some_and(|s| s.owned_by_anyone(t));
    let agents = view.fovs.first().map_or(0, Vec::len);
    let p = |k: usize| view.target_positions[k][t];
    let waiting = (0..agents).any(|i| {
        (a..=b).all(|k| {
            let empty = owned_at(k).is_none_or(|s| s.owned.get(i).is_none_or(BTreeSet::is_empty));
            empty && view.fovs[k][i].contains(&p(k))
        })
    });
    Ok(before && !waiting && after)
}

/// Occluder `w` inside agent `i`'s FoV at step `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcclusionDetection {
    pub occluder: usize,
    pub agent: usize,
    pub k: usize,
}

pub fn occlusion_detections(view: &OcclusionView) -> Vec<OcclusionDetection> {
    let mut out = Vec::new();
    for (k, fovs) in view.fovs.iter().enumerate() {
        for (i, fov) in fovs.iter().enumerate() {
            for (w, occ) in view.occlusions.iter().enumerate() {
                if fov.contains(&occ.center()) {
                    out.push(OcclusionDetection { occluder: w, agent: i, k });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BehaviorEvent {
    OwnershipChange {
        from: usize,
        to: usize,
        target: usize,
        k0: usize,
        l: usize,
    },
    OcclusionAware {
        k0: usize,
        target: usize,
        l: usize,
        h: usize,
    },
    OcclusionDetection {
        occluder: usize,
        agent: usize,
        k: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShareStats {
    /// P[OA | e]; absent when no trial saw a detection event.
    pub p_cond: Option<f64>,
    pub p_marginal: f64,
}

impl ShareStats {
    /// The occlusion-sharing claim: conditioning on a detection never lowers the OA rate.
    pub fn holds(&self) -> Option<bool> {
        self.p_cond.map(|c| c >= self.p_marginal)
    }
}

/// Per-trial `(had_detection_event, occlusion_aware)` pairs to conditional and marginal rates.
pub fn occlusion_share_stats(trials: &[(bool, bool)]) -> ShareStats {
    let n = trials.len();
    let with_e = trials.iter().filter(|(e, _)| *e).count();
    let oa_and_e = trials.iter().filter(|(e, oa)| *e && *oa).count();
    let oa = trials.iter().filter(|(_, oa)| *oa).count();
    ShareStats {
        p_cond: (with_e > 0).then(|| oa_and_e as f64 / with_e as f64),
        p_marginal: if n == 0 { 0.0 } else { oa as f64 / n as f64 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vis(rows: Vec<Vec<bool>>) -> VisibilityMatrix {
        VisibilityMatrix { rows }
    }

    #[test]
    fn always_visible_is_always_owned() {
        let seq = vec![vis(vec![vec![true]]); 12];
        let own = compute_m_ownership(&seq, 5).unwrap();
        for (k, o) in own.iter().enumerate() {
            if k + 5 < 12 {
                assert!(o.as_ref().unwrap().owns(0, 0));
            } else {
                assert!(o.is_none());
            }
        }
    }

    #[test]
    fn single_gap_removes_window() {
        let m = 3;
        let gap = 8;
        let seq: Vec<_> = (0..20).map(|k| vis(vec![vec![k != gap]])).collect();
        let own = compute_m_ownership(&seq, m).unwrap();
        for k in 0..(20 - m) {
            let expected = !(gap - m..=gap).contains(&k);
            assert_eq!(own[k].as_ref().unwrap().owns(0, 0), expected, "k={k}");
        }
    }

    #[test]
    fn zero_window_rejected() {
        assert!(compute_m_ownership(&[vis(vec![vec![true]])], 0).is_err());
    }

    #[test]
    fn share_stats_counting() {
        let s = occlusion_share_stats(&[(true, true), (true, true)]);
        assert_eq!((s.p_cond, s.p_marginal), (Some(1.0), 1.0));
        let s = occlusion_share_stats(&[(true, true), (false, false)]);
        assert_eq!((s.p_cond, s.p_marginal), (Some(1.0), 0.5));
        assert_eq!(s.holds(), Some(true));
        let s = occlusion_share_stats(&[(false, true)]);
        assert_eq!(s.p_cond, None);
        assert_eq!(s.holds(), None);
    }
}

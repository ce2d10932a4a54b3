//! Online estimate of stationary occluders, built from their own detections.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use super::jpda::Measurement;
use super::kalman::{kf_update, spd_inverse, SooTrack, Track};
use super::FilterState;
use crate::world::OcclusionObject;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicOcclusionMap {
    pub soo_tracks: Vec<SooTrack>,
    /// Radius each point estimate is inflated to when used as an occluder.
    pub fixed_radius: f64,
    pub max_tracks: usize,
}

impl DynamicOcclusionMap {
    pub fn new(fixed_radius: f64, max_tracks: usize) -> Self {
        Self {
            soo_tracks: Vec::new(),
            fixed_radius,
            max_tracks,
        }
    }

    pub fn len(&self) -> usize {
        self.soo_tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.soo_tracks.is_empty()
    }

    /// Occluder discs as seen by a planner.
    pub fn as_occluders(&self) -> Vec<OcclusionObject> {
        self.soo_tracks
            .iter()
            .map(|t| OcclusionObject {
                cx: t.mean[0],
                cy: t.mean[1],
                radius: self.fixed_radius,
                label: t.label.clone(),
            })
            .collect()
    }
}

/// Hands out birth ids that cannot collide between agents: `base + offset + stride * n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdAllocator {
    next: u32,
    stride: u32,
}

impl IdAllocator {
    pub fn new(base: u32, offset: u32, stride: u32) -> Self {
        Self {
            next: base + offset,
            stride: stride.max(1),
        }
    }

    pub fn allocate(&mut self) -> u32 {
        let id = self.next;
        self.next += self.stride;
        id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapUpdateConfig {
    /// Mahalanobis-squared threshold; a detection farther than this from every entry spawns a new one.
    pub new_track_threshold: f64,
    pub birth_cov: Matrix2<f64>,
}

fn mahalanobis2(track: &SooTrack, m: &Measurement) -> f64 {
    let nu = m.z - track.mean;
    match spd_inverse(&(track.cov + m.r), "occluder innovation") {
        Ok(s_inv) => (nu.transpose() * s_inv * nu)[(0, 0)],
        Err(_) => f64::INFINITY,
    }
}

/// Gated nearest-neighbour update of existing entries plus birth of unmatched detections.
pub fn update_occlusion_map(
    map: &DynamicOcclusionMap,
    label: &str,
    soo_observations: &[Measurement],
    config: &MapUpdateConfig,
    ids: &mut IdAllocator,
) -> DynamicOcclusionMap {
    let mut out = map.clone();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (t, track) in map.soo_tracks.iter().enumerate() {
        for (j, m) in soo_observations.iter().enumerate() {
            let d2 = mahalanobis2(track, m);
            if d2 <= config.new_track_threshold {
                pairs.push((d2, t, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut track_used = vec![false; map.soo_tracks.len()];
    let mut obs_used = vec![false; soo_observations.len()];
    for (_, t, j) in pairs {
        if track_used[t] || obs_used[j] {
            continue;
        }
        track_used[t] = true;
        obs_used[j] = true;
        let m = &soo_observations[j];
        if let Ok(updated) = kf_update(&out.soo_tracks[t], &m.z, &m.r) {
            out.soo_tracks[t] = updated;
        }
    }
    for (j, m) in soo_observations.iter().enumerate() {
        if obs_used[j] || out.soo_tracks.len() >= out.max_tracks {
            continue;
        }
        // detections that landed near an entry born this step are merged rather than duplicated
        if out.soo_tracks.iter().any(|t| mahalanobis2(t, m) <= config.new_track_threshold) {
            continue;
        }
        out.soo_tracks.push(Track {
            id: ids.allocate(),
            label: label.to_string(),
            mean: m.z,
            cov: config.birth_cov,
        });
    }
    out
}

/// Bring every agent's map onto a common id set before fusion.
///
/// Entries that gate against an already-known entry adopt its id; entries unknown to an agent
/// are copied in from the first agent that holds them.
pub fn align_maps(states: &mut [FilterState], gate: f64) {
    let mut union: Vec<SooTrack> = Vec::new();
    for state in states.iter_mut() {
        for track in state.occlusion_map.soo_tracks.iter_mut() {
            if union.iter().any(|u| u.id == track.id) {
                continue;
            }
            let m = Measurement {
                z: track.mean,
                r: track.cov,
            };
            if let Some(u) = union.iter().find(|u| mahalanobis2(u, &m) <= gate) {
                track.id = u.id;
            } else {
                union.push(track.clone());
            }
        }
        // two local entries may now share an id; keep the first
        let mut seen = Vec::new();
        state.occlusion_map.soo_tracks.retain(|t| {
            if seen.contains(&t.id) {
                false
            } else {
                seen.push(t.id);
                true
            }
        });
    }
    union.sort_by_key(|t| t.id);
    for state in states.iter_mut() {
        for u in &union {
            if !state.occlusion_map.soo_tracks.iter().any(|t| t.id == u.id) {
                state.occlusion_map.soo_tracks.push(u.clone());
            }
        }
        state.occlusion_map.soo_tracks.sort_by_key(|t| t.id);
    }
}

//! Per-agent estimation: Kalman filtering, JPDA, information consensus and the occlusion map.

pub mod fusion;
pub mod jpda;
pub mod kalman;
pub mod occlusion_map;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

pub use fusion::{ci_fuse, consensus, fuse_tracks};
pub use jpda::{associate, jpda_update, AssociationResult, Measurement, DEFAULT_GATE_CHI2};
pub use kalman::{info_update_trace, kf_predict, kf_update, Dynamics, OoiTrack, SooTrack, Track};
pub use occlusion_map::{align_maps, update_occlusion_map, DynamicOcclusionMap, IdAllocator, MapUpdateConfig};

use crate::error::Result;
use crate::sensing::{bearing_distance, measurement_covariance_with_floor, Observation};
use crate::world::{AgentSpec, AgentState, ObjectClass};

/// An agent's local trajectory estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    pub ooi_tracks: Vec<OoiTrack>,
    pub occlusion_map: DynamicOcclusionMap,
}

impl FilterState {
    pub fn total_trace(&self) -> f64 {
        self.ooi_tracks.iter().map(Track::trace).sum()
    }

    pub fn predict(&self, dt: f64, q: f64) -> Self {
        Self {
            ooi_tracks: self.ooi_tracks.iter().map(|t| t.predict(dt, q)).collect(),
            occlusion_map: DynamicOcclusionMap {
                soo_tracks: self.occlusion_map.soo_tracks.iter().map(|t| t.predict(dt, q)).collect(),
                ..self.occlusion_map.clone()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    /// Process-noise intensity of the NCV model used by the filter and planner.
    pub q: f64,
    pub gate_chi2: f64,
    pub detection_prob: f64,
    pub clutter_density: f64,
    pub d_min: f64,
    /// Isotropic variance of a newborn occlusion-map entry.
    pub soo_birth_var: f64,
    pub soo_radius: f64,
    pub soo_max_tracks: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            q: 0.5,
            gate_chi2: DEFAULT_GATE_CHI2,
            detection_prob: 0.95,
            clutter_density: 1e-4,
            d_min: crate::sensing::DEFAULT_D_MIN,
            soo_birth_var: 0.5,
            soo_radius: 1.0,
            soo_max_tracks: 32,
        }
    }
}

impl TrackerConfig {
    pub fn map_update(&self) -> MapUpdateConfig {
        MapUpdateConfig {
            new_track_threshold: self.gate_chi2,
            birth_cov: Matrix2::identity() * self.soo_birth_var,
        }
    }
}

/// Measurement with the range-bearing covariance the observing agent would assign to it.
pub fn to_measurement(obs: &Observation, agent: &AgentState, spec: &AgentSpec, d_min: f64) -> Measurement {
    let (d, rho) = bearing_distance(agent, &obs.z);
    Measurement {
        z: obs.z,
        r: measurement_covariance_with_floor(d, rho, spec.alpha, d_min),
    }
}

/// Incorporate one agent's own observations into its (already predicted) filter.
pub fn local_update(
    state: &FilterState,
    agent: &AgentState,
    spec: &AgentSpec,
    observations: &[Observation],
    config: &TrackerConfig,
    ids: &mut IdAllocator,
) -> Result<FilterState> {
    let mut out = state.clone();

    let mut labels: Vec<&str> = out.ooi_tracks.iter().map(|t| t.label.as_str()).collect();
    labels.sort_unstable();
    labels.dedup();
    let labels: Vec<String> = labels.into_iter().map(str::to_owned).collect();
    for label in &labels {
        let idx: Vec<usize> = (0..out.ooi_tracks.len())
            .filter(|&t| &out.ooi_tracks[t].label == label)
            .collect();
        let meas: Vec<Measurement> = observations
            .iter()
            .filter(|o| o.class == ObjectClass::Ooi && &o.label == label)
            .map(|o| to_measurement(o, agent, spec, config.d_min))
            .collect();
        if meas.is_empty() {
            continue;
        }
        let tracks: Vec<OoiTrack> = idx.iter().map(|&t| out.ooi_tracks[t].clone()).collect();
        let assoc = associate(&tracks, &meas, config.gate_chi2, config.detection_prob, config.clutter_density);
        for (row, &t) in idx.iter().enumerate() {
            out.ooi_tracks[t] = jpda_update(&tracks[row], &meas, &assoc.beta[row], assoc.miss[row])?;
        }
    }

    let mut soo_labels: Vec<&str> = observations
        .iter()
        .filter(|o| o.class == ObjectClass::Soo)
        .map(|o| o.label.as_str())
        .collect();
    soo_labels.sort_unstable();
    soo_labels.dedup();
    for label in soo_labels {
        let meas: Vec<Measurement> = observations
            .iter()
            .filter(|o| o.class == ObjectClass::Soo && o.label == label)
            .map(|o| to_measurement(o, agent, spec, config.d_min))
            .collect();
        out.occlusion_map = update_occlusion_map(&out.occlusion_map, label, &meas, &config.map_update(), ids);
    }
    Ok(out)
}

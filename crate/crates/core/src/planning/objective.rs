//! Nominal-belief cost of a joint plan over the look-ahead horizon.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensing::{bearing_distance, measurement_covariance_with_floor, point_visible};
use crate::tracking::kalman::position_selector;
use crate::tracking::{info_update_trace, FilterState, OoiTrack};
use crate::world::{fov_region, ncv_process_noise, ncv_transition, step_agent_unchecked, AgentSpec, AgentState, OcclusionObject};

/// Which occluder set the planner checks predicted visibility against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OcclusionMode {
    /// The true occluders.
    Apriori,
    /// The team's occlusion-map estimate.
    Dynamic,
    /// No occluders at all.
    None,
}

impl std::str::FromStr for OcclusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "apriori" => Ok(Self::Apriori),
            "dynamic" => Ok(Self::Dynamic),
            "none" => Ok(Self::None),
            other => Err(Error::InvalidArgument(format!("unknown occlusion mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for OcclusionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Apriori => "apriori",
            Self::Dynamic => "dynamic",
            Self::None => "none",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParams {
    pub horizon: usize,
    pub gamma: f64,
    pub dt: f64,
    /// Process-noise intensity used for covariance prediction.
    pub q: f64,
    pub d_min: f64,
    pub occlusion_mode: OcclusionMode,
}

impl ObjectiveParams {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidArgument(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidArgument("dt must be positive".into()));
        }
        Ok(())
    }
}

/// Occluders the planner should use under `mode`.
pub fn planning_occluders(mode: OcclusionMode, truth: &[OcclusionObject], belief: &FilterState) -> Vec<OcclusionObject> {
    match mode {
        OcclusionMode::Apriori => truth.to_vec(),
        OcclusionMode::Dynamic => belief.occlusion_map.as_occluders(),
        OcclusionMode::None => Vec::new(),
    }
}

/// Noise-free NCV positions of every OOI track for h = 1..=horizon, indexed `[h - 1][track]`.
pub fn nominal_prediction(filter: &FilterState, horizon: usize, dt: f64) -> Vec<Vec<Vector2<f64>>> {
    let f = ncv_transition(dt);
    let mut means: Vec<_> = filter.ooi_tracks.iter().map(|t| t.mean).collect();
    (0..horizon)
        .map(|_| {
            means.iter_mut().for_each(|m| *m = f * *m);
            means.iter().map(|m| Vector2::new(m[0], m[1])).collect()
        })
        .collect()
}

/// Accumulated discounted trace of the nominal posterior covariances.
///
/// `agents`, `specs` and `plans` line up index by index; only those agents sense. Step `h`
/// (1-based) is weighted by `gamma^(h-1)`.
pub fn evaluate_objective(
    tracks: &[OoiTrack],
    agents: &[AgentState],
    specs: &[AgentSpec],
    plans: &[&[Vector2<f64>]],
    occluders: &[OcclusionObject],
    params: &ObjectiveParams,
) -> Result<f64> {
    if plans.len() != agents.len() || specs.len() != agents.len() {
        return Err(Error::InvalidArgument(format!(
            "{} plans and {} specs for {} agents",
            plans.len(),
            specs.len(),
            agents.len()
        )));
    }
    if let Some(bad) = plans.iter().find(|p| p.len() != params.horizon) {
        return Err(Error::InvalidArgument(format!(
            "plan of length {} for horizon {}",
            bad.len(),
            params.horizon
        )));
    }
    let h_sel = position_selector::<4>();
    let mut states = agents.to_vec();
    let f = ncv_transition(params.dt);
    let ft = f.transpose();
    let q = ncv_process_noise(params.dt, params.q);
    let mut beliefs: Vec<(Vector4<f64>, Matrix4<f64>)> = tracks.iter().map(|t| (t.mean, t.cov)).collect();
    let mut observers: Vec<(nalgebra::SMatrix<f64, 2, 4>, Matrix2<f64>)> = Vec::with_capacity(agents.len());
    let mut cost = 0.0;
    let mut weight = 1.0;
    for h in 0..params.horizon {
        for (i, s) in states.iter_mut().enumerate() {
            *s = step_agent_unchecked(s, plans[i][h], params.dt, specs[i].v_max);
        }
        let fovs: Vec<_> = states.iter().zip(specs).map(|(s, sp)| fov_region(s, sp)).collect();
        for (mean, cov) in beliefs.iter_mut() {
            *mean = f * *mean;
            *cov = f * *cov * ft + q;
            let p = Vector2::new(mean[0], mean[1]);
            observers.clear();
            for (i, s) in states.iter().enumerate() {
                if point_visible(&fovs[i], &p, occluders) {
                    let (d, rho) = bearing_distance(s, &p);
                    observers.push((h_sel, measurement_covariance_with_floor(d, rho, specs[i].alpha, params.d_min)));
                }
            }
            let (post, tr) = info_update_trace(cov, &observers)?;
            *cov = post;
            cost += weight * tr;
        }
        weight *= params.gamma;
    }
    Ok(cost)
}

//! Scenario and run configuration files.

use std::path::Path;

use nalgebra::{Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::behavior::OwnershipProfile;
use crate::error::{Error, Result};
use crate::planning::{Algorithm, OcclusionMode, PsoParams};
use crate::sensing::SensorModel;
use crate::tracking::TrackerConfig;
use crate::world::{AgentSpec, AgentState, ObjectClass, OcclusionObject, TargetTruth};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub position: [f64; 2],
    pub spec: AgentSpec,
}

/// A scripted velocity switch applied to the ground truth at `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocityChange {
    pub step: usize,
    pub velocity: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub name: String,
    #[serde(default = "default_ooi_label")]
    pub label: String,
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    #[serde(default)]
    pub profile: Vec<VelocityChange>,
}

fn default_ooi_label() -> String {
    "human".to_string()
}

fn default_soo_label() -> String {
    "tree".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccluderConfig {
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default = "default_soo_label")]
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OwnershipConfig {
    pub m: usize,
    pub m0: Vec<Vec<usize>>,
    pub goal: Vec<Vec<usize>>,
    #[serde(default)]
    pub goal_any_agent: bool,
}

/// An approximate window in which `target` is expected to be occluded. The exact interval is
/// recovered from ground truth per trial; `margin` is the `h` of the occlusion-aware test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisInterval {
    pub target: usize,
    pub window: [usize; 2],
    pub margin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Number of steps L; a trace holds L + 1 records.
    pub duration: usize,
    pub dt: f64,
    /// Process-noise intensity of the ground-truth motion.
    #[serde(default)]
    pub truth_q: f64,
    pub agents: Vec<AgentConfig>,
    pub targets: Vec<TargetConfig>,
    #[serde(default)]
    pub occlusions: Vec<OccluderConfig>,
    /// Diagonal of the shared initial track covariance (px, py, vx, vy).
    pub initial_cov_diag: [f64; 4],
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub sensor: SensorModel,
    pub ownership: OwnershipConfig,
    #[serde(default)]
    pub intervals: Vec<AnalysisInterval>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() {
            return Err(Error::config("agents", "at least one agent is required"));
        }
        if self.targets.is_empty() {
            return Err(Error::config("targets", "at least one target is required"));
        }
        if self.duration == 0 {
            return Err(Error::config("duration", "must be at least 1 step"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt", "must be positive"));
        }
        if self.truth_q < 0.0 {
            return Err(Error::config("truth_q", "must be non-negative"));
        }
        for (i, a) in self.agents.iter().enumerate() {
            a.spec
                .validate()
                .map_err(|e| Error::config(format!("agents[{i}].spec"), e.to_string()))?;
            if !a.position.iter().all(|v| v.is_finite()) {
                return Err(Error::config(format!("agents[{i}].position"), "must be finite"));
            }
        }
        for (t, target) in self.targets.iter().enumerate() {
            if !target.position.iter().chain(&target.velocity).all(|v| v.is_finite()) {
                return Err(Error::config(format!("targets[{t}]"), "position and velocity must be finite"));
            }
        }
        for (j, w) in self.occlusions.iter().enumerate() {
            if !(w.radius > 0.0) {
                return Err(Error::config(format!("occlusions[{j}].radius"), "must be positive"));
            }
        }
        if self.initial_cov_diag.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::config("initial_cov_diag", "entries must be positive"));
        }
        let n = self.agents.len();
        let nt = self.targets.len();
        if self.ownership.m == 0 {
            return Err(Error::config("ownership.m", "must be at least 1"));
        }
        for (field, pattern) in [("m0", &self.ownership.m0), ("goal", &self.ownership.goal)] {
            if pattern.len() != n {
                return Err(Error::config(
                    format!("ownership.{field}"),
                    format!("needs one entry per agent ({n}), got {}", pattern.len()),
                ));
            }
            for (i, group) in pattern.iter().enumerate() {
                if let Some(bad) = group.iter().find(|t| **t >= nt) {
                    return Err(Error::config(
                        format!("ownership.{field}[{i}]"),
                        format!("target index {bad} does not exist"),
                    ));
                }
            }
        }
        for (k, iv) in self.intervals.iter().enumerate() {
            if iv.target >= nt {
                return Err(Error::config(format!("intervals[{k}].target"), "target index does not exist"));
            }
            if iv.window[0] > iv.window[1] || iv.window[1] > self.duration {
                return Err(Error::config(format!("intervals[{k}].window"), "must be ordered and within duration"));
            }
        }
        Ok(())
    }

    pub fn agent_states(&self) -> Vec<AgentState> {
        self.agents.iter().map(|a| AgentState::at(a.position[0], a.position[1])).collect()
    }

    pub fn agent_specs(&self) -> Vec<AgentSpec> {
        self.agents.iter().map(|a| a.spec).collect()
    }

    pub fn target_truths(&self) -> Vec<TargetTruth> {
        self.targets
            .iter()
            .enumerate()
            .map(|(id, t)| TargetTruth {
                id,
                label: t.label.clone(),
                class: ObjectClass::Ooi,
                px: t.position[0],
                py: t.position[1],
                vx: t.velocity[0],
                vy: t.velocity[1],
            })
            .collect()
    }

    pub fn occluders(&self) -> Vec<OcclusionObject> {
        self.occlusions
            .iter()
            .map(|w| OcclusionObject {
                cx: w.center[0],
                cy: w.center[1],
                radius: w.radius,
                label: w.label.clone(),
            })
            .collect()
    }

    pub fn initial_cov(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal(&Vector4::from(self.initial_cov_diag))
    }

    pub fn ownership_profile(&self) -> OwnershipProfile {
        OwnershipProfile {
            m0: self.ownership.m0.clone(),
            goal: self.ownership.goal.clone(),
            goal_any_agent: self.ownership.goal_any_agent,
            targets: self.targets.len(),
        }
    }

    /// Scripted velocity for target `t` taking effect at `step`, if any.
    pub fn scripted_velocity(&self, t: usize, step: usize) -> Option<Vector2<f64>> {
        self.targets[t]
            .profile
            .iter()
            .find(|c| c.step == step)
            .map(|c| Vector2::new(c.velocity[0], c.velocity[1]))
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    ScenarioConfig::from_json(&text)
}

/// The four scenarios that ship with the crate.
pub const CANONICAL: [&str; 4] = ["trajectory_handover", "resource_allocation", "joint_effect", "occlusion_sharing"];

pub fn canonical_scenario(name: &str) -> Result<ScenarioConfig> {
    let text = match name {
        "trajectory_handover" => include_str!("../../scenarios/trajectory_handover.json"),
        "resource_allocation" => include_str!("../../scenarios/resource_allocation.json"),
        "joint_effect" => include_str!("../../scenarios/joint_effect.json"),
        "occlusion_sharing" => include_str!("../../scenarios/occlusion_sharing.json"),
        other => return Err(Error::InvalidArgument(format!("unknown scenario `{other}`"))),
    };
    ScenarioConfig::from_json(text)
}

/// Experiment settings for a batch of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub alg: Algorithm,
    pub horizon: usize,
    pub occlusion_mode: OcclusionMode,
    pub trials: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub pso: PsoParams,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_rounds")]
    pub ci_rounds: usize,
    /// Consensus weights; uniform when absent.
    #[serde(default)]
    pub ci_weights: Option<Vec<f64>>,
    /// SMA agent order; `0..N` when absent.
    #[serde(default)]
    pub sma_order: Option<Vec<usize>>,
}

fn default_gamma() -> f64 {
    1.0
}

fn default_rounds() -> usize {
    1
}

impl RunConfig {
    pub fn new(alg: Algorithm, horizon: usize, occlusion_mode: OcclusionMode, trials: usize, base_seed: u64) -> Self {
        Self {
            alg,
            horizon,
            occlusion_mode,
            trials,
            base_seed,
            pso: PsoParams::default(),
            gamma: default_gamma(),
            ci_rounds: default_rounds(),
            ci_weights: None,
            sma_order: None,
        }
    }

    pub fn validate(&self, agents: usize) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config("gamma", "must lie in (0, 1]"));
        }
        if self.pso.swarm_size < 2 || self.pso.iterations == 0 {
            return Err(Error::config("pso", "needs swarm_size >= 2 and iterations >= 1"));
        }
        if let Some(w) = &self.ci_weights {
            if w.len() != agents {
                return Err(Error::config("ci_weights", "needs one weight per agent"));
            }
        }
        if let Some(order) = &self.sma_order {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != (0..agents).collect::<Vec<_>>() {
                return Err(Error::config("sma_order", "must be a permutation of the agent indices"));
            }
        }
        Ok(())
    }

    pub fn weights(&self, agents: usize) -> Vec<f64> {
        self.ci_weights
            .clone()
            .unwrap_or_else(|| vec![1.0 / agents as f64; agents])
    }

    pub fn order(&self, agents: usize) -> Vec<usize> {
        self.sma_order.clone().unwrap_or_else(|| (0..agents).collect())
    }
}

//! One seeded closed-loop trial: sense, track, fuse, plan, move.

use nalgebra::Vector2;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scenario::{RunConfig, ScenarioConfig};
use crate::behavior::{compute_m_ownership, OcclusionDetection, OcclusionView, OwnershipState};
use crate::error::{Error, Result};
use crate::planning::{
    plan_dec_pomdp, planning_occluders, sma_epoch, shift_intention, Algorithm, ImprovementCheck, Intention,
    ObjectiveParams, OcclusionMode, Plan, PlanningContext,
};
use crate::rng::{stream, Stream};
use crate::sensing::{generate_observations, visible_set, Observation, VisibilityMatrix};
use crate::tracking::{align_maps, consensus, local_update, DynamicOcclusionMap, FilterState, IdAllocator, Track};
use crate::world::{
    fov_region, step_agent, step_target_truth, AgentState, ObjectClass, OcclusionObject, Region, TargetTruth,
    WorldState,
};

/// First id handed to occlusion-map entries; OOI tracks use their target index.
pub const SOO_ID_BASE: u32 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSummary {
    pub id: u32,
    pub mean: [f64; 4],
    pub trace: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub trace: f64,
}

/// Everything recorded at one step. Beliefs and map are the post-fusion estimates used to plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub agents: Vec<AgentState>,
    pub targets: Vec<TargetTruth>,
    pub visibility: VisibilityMatrix,
    pub fovs: Vec<Region>,
    /// Per agent, per OOI track.
    pub beliefs: Vec<Vec<TrackSummary>>,
    /// Per agent occlusion-map entries.
    pub occlusion_maps: Vec<Vec<MapEntry>>,
    pub plans: Vec<Plan>,
    pub improvements: Vec<ImprovementCheck>,
    pub soo_detections: Vec<OcclusionDetection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTrace {
    pub scenario: String,
    pub alg: Algorithm,
    pub horizon: usize,
    pub occlusion_mode: OcclusionMode,
    pub seed: u64,
    pub dt: f64,
    pub occlusions: Vec<OcclusionObject>,
    pub steps: Vec<StepRecord>,
}

impl TrialTrace {
    pub fn visibility(&self) -> Vec<VisibilityMatrix> {
        self.steps.iter().map(|s| s.visibility.clone()).collect()
    }

    pub fn ownership(&self, m: usize) -> Result<Vec<Option<OwnershipState>>> {
        compute_m_ownership(&self.visibility(), m)
    }

    pub fn occlusion_view(&self, m: usize) -> Result<OcclusionView> {
        Ok(OcclusionView {
            ownership: self.ownership(m)?,
            target_positions: self
                .steps
                .iter()
                .map(|s| s.targets.iter().map(TargetTruth::position).collect())
                .collect(),
            fovs: self.steps.iter().map(|s| s.fovs.clone()).collect(),
            occlusions: self.occlusions.clone(),
        })
    }

    /// Number of agents whose FoV contains target `t`'s true position, per step.
    pub fn fov_coverage(&self, t: usize) -> Vec<usize> {
        self.steps
            .iter()
            .map(|s| {
                let p = s.targets[t].position();
                s.fovs.iter().filter(|f| f.contains(&p)).count()
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn summarize(state: &FilterState) -> (Vec<TrackSummary>, Vec<MapEntry>) {
    let tracks = state
        .ooi_tracks
        .iter()
        .map(|t| TrackSummary {
            id: t.id,
            mean: [t.mean[0], t.mean[1], t.mean[2], t.mean[3]],
            trace: t.trace(),
        })
        .collect();
    let map = state
        .occlusion_map
        .soo_tracks
        .iter()
        .map(|t| MapEntry {
            id: t.id,
            x: t.mean[0],
            y: t.mean[1],
            trace: t.trace(),
        })
        .collect();
    (tracks, map)
}

fn initial_filter(scenario: &ScenarioConfig) -> FilterState {
    let cov = scenario.initial_cov();
    FilterState {
        ooi_tracks: scenario
            .target_truths()
            .iter()
            .map(|t| Track {
                id: t.id as u32,
                label: t.label.clone(),
                mean: t.state(),
                cov,
            })
            .collect(),
        occlusion_map: DynamicOcclusionMap::new(scenario.tracker.soo_radius, scenario.tracker.soo_max_tracks),
    }
}

fn detections(observations: &[Observation], k: usize) -> Vec<OcclusionDetection> {
    observations
        .iter()
        .filter(|o| o.class == ObjectClass::Soo)
        .filter_map(|o| {
            o.truth_id.map(|w| OcclusionDetection {
                occluder: w,
                agent: o.source_agent,
                k,
            })
        })
        .collect()
}

/// Run one trial. The same `(scenario, run, seed)` always yields the same trace.
pub fn run_trial(scenario: &ScenarioConfig, run: &RunConfig, seed: u64) -> Result<TrialTrace> {
    scenario.validate()?;
    let n = scenario.agents.len();
    run.validate(n)?;
    let specs = scenario.agent_specs();
    let dt = scenario.dt;
    let tracker = scenario.tracker;
    let weights = run.weights(n);
    let order = run.order(n);
    let params = ObjectiveParams {
        horizon: run.horizon,
        gamma: run.gamma,
        dt,
        q: tracker.q,
        d_min: tracker.d_min,
        occlusion_mode: run.occlusion_mode,
    };

    let mut truth_rng = stream(seed, Stream::Truth);
    let mut sensing_rngs: Vec<ChaCha8Rng> = (0..n).map(|i| stream(seed, Stream::Sensing(i))).collect();
    let mut planner_rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|i| match run.alg {
            Algorithm::SmaNbo => stream(seed, Stream::Planner(i)),
            Algorithm::DecPomdp => stream(seed, Stream::TeamPlanner),
        })
        .collect();
    let mut ids: Vec<IdAllocator> = (0..n).map(|i| IdAllocator::new(SOO_ID_BASE, i as u32, n as u32)).collect();

    let mut world = WorldState {
        k: 0,
        agents: scenario.agent_states(),
        targets: scenario.target_truths(),
        occlusions: scenario.occluders(),
    };
    let mut filters = vec![initial_filter(scenario); n];
    let mut intentions: Vec<Intention> = (0..n).map(|i| Intention::idle(i, run.horizon)).collect();
    // each agent's own view of the team plan, kept for warm starts
    let mut team_intentions: Vec<Vec<Intention>> = vec![intentions.clone(); n];
    let mut steps = Vec::with_capacity(scenario.duration + 1);

    for k in 0..=scenario.duration {
        world.k = k;
        let observations = generate_observations(&world, &specs, &scenario.sensor, &mut sensing_rngs);
        let mut local = Vec::with_capacity(n);
        for i in 0..n {
            let mine: Vec<Observation> = observations.iter().filter(|o| o.source_agent == i).cloned().collect();
            local.push(local_update(&filters[i], &world.agents[i], &specs[i], &mine, &tracker, &mut ids[i])?);
        }
        align_maps(&mut local, tracker.gate_chi2);
        filters = consensus(&local, &weights, run.ci_rounds)?;

        let mut plans = Vec::new();
        let mut improvements = Vec::new();
        if k < scenario.duration {
            match run.alg {
                Algorithm::SmaNbo => {
                    // identical beliefs after a complete-graph round; agent 0's copy is the team belief
                    let occluders = planning_occluders(run.occlusion_mode, &world.occlusions, &filters[0]);
                    let ctx = PlanningContext {
                        tracks: &filters[0].ooi_tracks,
                        agents: &world.agents,
                        specs: &specs,
                        occluders: &occluders,
                        params: &params,
                        pso: &run.pso,
                    };
                    let (p, checks) = sma_epoch(&ctx, &intentions, &order, &mut planner_rngs)?;
                    plans = p;
                    improvements = checks;
                }
                Algorithm::DecPomdp => {
                    let mut next = Vec::with_capacity(n);
                    for i in 0..n {
                        let occluders = planning_occluders(run.occlusion_mode, &world.occlusions, &filters[i]);
                        let ctx = PlanningContext {
                            tracks: &filters[i].ooi_tracks,
                            agents: &world.agents,
                            specs: &specs,
                            occluders: &occluders,
                            params: &params,
                            pso: &run.pso,
                        };
                        let team = plan_dec_pomdp(i, &ctx, Some(&team_intentions[i]), &mut planner_rngs[i])?;
                        plans.push(team[i].clone());
                        next.push(team.iter().map(shift_intention).collect());
                    }
                    team_intentions = next;
                }
            }
        }

        let (beliefs, maps): (Vec<_>, Vec<_>) = filters.iter().map(summarize).unzip();
        steps.push(StepRecord {
            k,
            agents: world.agents.clone(),
            targets: world.targets.clone(),
            visibility: visible_set(&world, &specs),
            fovs: world.agents.iter().zip(&specs).map(|(a, s)| fov_region(a, s)).collect(),
            beliefs,
            occlusion_maps: maps,
            plans: plans.clone(),
            improvements,
            soo_detections: detections(&observations, k),
        });

        if k == scenario.duration {
            break;
        }
        for plan in &plans {
            let i = plan.agent;
            let action = plan.actions.first().copied().unwrap_or_else(Vector2::zeros);
            world.agents[i] = step_agent(&world.agents[i], action, dt, specs[i].v_max)?;
        }
        intentions = plans.iter().map(shift_intention).collect();
        for (t, target) in world.targets.iter_mut().enumerate() {
            *target = step_target_truth(target, dt, scenario.truth_q, &mut truth_rng);
            if let Some(v) = scenario.scripted_velocity(t, k + 1) {
                target.vx = v.x;
                target.vy = v.y;
            }
        }
        filters = filters.iter().map(|f| f.predict(dt, tracker.q)).collect();
        if filters.iter().flat_map(|f| &f.ooi_tracks).any(|t| !t.cov.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFinite("track covariance"));
        }
    }

    Ok(TrialTrace {
        scenario: scenario.name.clone(),
        alg: run.alg,
        horizon: run.horizon,
        occlusion_mode: run.occlusion_mode,
        seed,
        dt,
        occlusions: world.occlusions.clone(),
        steps,
    })
}

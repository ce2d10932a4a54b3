//! Receding-horizon planners built on the nominal-belief objective.

pub mod objective;
pub mod pso;

use nalgebra::Vector2;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use objective::{evaluate_objective, nominal_prediction, planning_occluders, ObjectiveParams, OcclusionMode};
pub use pso::{pso_minimize, pso_minimize_with, PsoParams};

use crate::error::{Error, Result};
use crate::tracking::OoiTrack;
use crate::world::{clip_norm, AgentSpec, AgentState, OcclusionObject};

/// An agent's H-step velocity sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub agent: usize,
    pub actions: Vec<Vector2<f64>>,
}

/// The residual of a previous plan, shared with teammates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intention {
    pub agent: usize,
    pub actions: Vec<Vector2<f64>>,
}

impl Intention {
    pub fn idle(agent: usize, horizon: usize) -> Self {
        Self {
            agent,
            actions: vec![Vector2::zeros(); horizon],
        }
    }
}

/// Drop the executed first action and repeat the last one: (a2, .., aH, aH).
pub fn shift_intention(plan: &Plan) -> Intention {
    let mut actions: Vec<_> = plan.actions.iter().skip(1).copied().collect();
    if let Some(last) = plan.actions.last() {
        actions.push(*last);
    }
    Intention {
        agent: plan.agent,
        actions,
    }
}

/// Which planner drives the team.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    SmaNbo,
    DecPomdp,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sma" | "sma_nbo" => Ok(Self::SmaNbo),
            "dec" | "dec_pomdp" => Ok(Self::DecPomdp),
            other => Err(Error::InvalidArgument(format!("unknown algorithm `{other}`"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::SmaNbo => "sma_nbo",
            Self::DecPomdp => "dec_pomdp",
        })
    }
}

/// Everything a planner needs to score candidate plans at one decision epoch.
#[derive(Debug, Clone, Copy)]
pub struct PlanningContext<'a> {
    pub tracks: &'a [OoiTrack],
    pub agents: &'a [AgentState],
    pub specs: &'a [AgentSpec],
    pub occluders: &'a [OcclusionObject],
    pub params: &'a ObjectiveParams,
    pub pso: &'a PsoParams,
}

/// Joint objective before and after one agent's improvement step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImprovementCheck {
    pub agent: usize,
    pub before: f64,
    pub after: f64,
}

fn decode(x: &[f64], v_max: f64) -> Vec<Vector2<f64>> {
    x.chunks_exact(2)
        .map(|c| clip_norm(Vector2::new(c[0], c[1]), v_max))
        .collect()
}

fn encode(actions: &[Vector2<f64>]) -> Vec<f64> {
    actions.iter().flat_map(|a| [a.x, a.y]).collect()
}

/// Velocity sequence that chases the nominal (constant-velocity) prediction of `track`.
pub fn pursuit_actions(agent: &AgentState, v_max: f64, track: &OoiTrack, horizon: usize, dt: f64) -> Vec<Vector2<f64>> {
    let mut p = agent.position();
    let target_v = Vector2::new(track.mean[2], track.mean[3]);
    (1..=horizon)
        .map(|h| {
            let goal = track.position() + target_v * (h as f64 * dt);
            let a = clip_norm((goal - p) / dt, v_max);
            p += a * dt;
            a
        })
        .collect()
}

/// Pursuit seeds for agent `i`, one per tracked target.
fn pursuit_seeds(i: usize, ctx: &PlanningContext<'_>) -> Vec<Vec<Vector2<f64>>> {
    ctx.tracks
        .iter()
        .map(|t| pursuit_actions(&ctx.agents[i], ctx.specs[i].v_max, t, ctx.params.horizon, ctx.params.dt))
        .collect()
}

/// Optimise agent `i`'s actions while every other listed agent follows `fixed[j]`.
///
/// Returns the plan and its joint cost. The swarm is seeded with zero, `warm`, and one pursuit
/// of each target.
fn improve<R: Rng + ?Sized>(
    i: usize,
    ctx: &PlanningContext<'_>,
    fixed: &[Vec<Vector2<f64>>],
    warm: Option<&[Vector2<f64>]>,
    rng: &mut R,
) -> Result<(Plan, f64)> {
    let h = ctx.params.horizon;
    let v_max = ctx.specs[i].v_max;
    let bounds = vec![(-v_max, v_max); 2 * h];
    let seeds: Vec<Vec<f64>> = warm
        .map(|w| encode(w))
        .into_iter()
        .chain(pursuit_seeds(i, ctx).iter().map(|a| encode(a)))
        .collect();
    let mut failure = None;
    let (best, cost) = {
        let mut joint: Vec<Vec<Vector2<f64>>> = fixed.to_vec();
        let mut f = |x: &[f64]| {
            joint[i] = decode(x, v_max);
            let refs: Vec<&[Vector2<f64>]> = joint.iter().map(Vec::as_slice).collect();
            match evaluate_objective(ctx.tracks, ctx.agents, ctx.specs, &refs, ctx.occluders, ctx.params) {
                Ok(c) => c,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::INFINITY
                }
            }
        };
        pso_minimize_with(&mut f, &bounds, ctx.pso, &seeds, rng)
    };
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((
        Plan {
            agent: i,
            actions: decode(&best, v_max),
        },
        cost,
    ))
}

fn check_context(ctx: &PlanningContext<'_>) -> Result<()> {
    ctx.params.validate()?;
    if ctx.agents.len() != ctx.specs.len() || ctx.agents.is_empty() {
        return Err(Error::InvalidArgument("agent states and specs must be non-empty and aligned".into()));
    }
    Ok(())
}

/// One sequential improvement for agent `i`.
///
/// `confirmed` holds this epoch's plans for agents `0..i`; `intentions` holds one intention per
/// agent. Returns the plan and the joint objective before and after the step.
pub fn plan_sma_nbo<R: Rng + ?Sized>(
    i: usize,
    ctx: &PlanningContext<'_>,
    confirmed: &[Plan],
    intentions: &[Intention],
    rng: &mut R,
) -> Result<(Plan, ImprovementCheck)> {
    check_context(ctx)?;
    let n = ctx.agents.len();
    let h = ctx.params.horizon;
    let mut fixed: Vec<Vec<Vector2<f64>>> = Vec::with_capacity(n);
    for j in 0..n {
        let actions = if let Some(p) = confirmed.iter().find(|p| p.agent == j) {
            p.actions.clone()
        } else {
            intentions
                .iter()
                .find(|it| it.agent == j)
                .map(|it| it.actions.clone())
                .ok_or_else(|| Error::InvalidArgument(format!("missing intention for agent {j}")))?
        };
        if actions.len() != h {
            return Err(Error::InvalidArgument(format!("agent {j} has {} actions, horizon {h}", actions.len())));
        }
        fixed.push(actions);
    }
    let refs: Vec<&[Vector2<f64>]> = fixed.iter().map(Vec::as_slice).collect();
    let before = evaluate_objective(ctx.tracks, ctx.agents, ctx.specs, &refs, ctx.occluders, ctx.params)?;
    let warm = fixed[i].clone();
    let (plan, after) = improve(i, ctx, &fixed, Some(&warm), rng)?;
    Ok((plan, ImprovementCheck { agent: i, before, after }))
}

/// Run one SMA epoch: agents improve in `order`, each seeing its predecessors' fresh plans.
pub fn sma_epoch<R: Rng>(
    ctx: &PlanningContext<'_>,
    intentions: &[Intention],
    order: &[usize],
    rngs: &mut [R],
) -> Result<(Vec<Plan>, Vec<ImprovementCheck>)> {
    let mut confirmed: Vec<Plan> = Vec::with_capacity(order.len());
    let mut checks = Vec::with_capacity(order.len());
    for &i in order {
        let (plan, check) = plan_sma_nbo(i, ctx, &confirmed, intentions, &mut rngs[i])?;
        confirmed.push(plan);
        checks.push(check);
    }
    confirmed.sort_by_key(|p| p.agent);
    Ok((confirmed, checks))
}

/// Plan the whole team's action sequences from agent `i`'s local belief.
///
/// Agent `i` executes only its own block of the returned joint plan. When every agent holds the
/// same belief and draws from identically seeded generators, all agents compute the same joint
/// plan, i.e. the centralized solution. The swarm is seeded with zero, `warm` (the previous joint
/// plan shifted by one step) and every assignment of agents to target pursuits.
pub fn plan_dec_pomdp<R: Rng + ?Sized>(
    i: usize,
    ctx: &PlanningContext<'_>,
    warm: Option<&[Intention]>,
    rng: &mut R,
) -> Result<Vec<Plan>> {
    check_context(ctx)?;
    let n = ctx.agents.len();
    if i >= n {
        return Err(Error::InvalidArgument(format!("agent {i} out of range for {n} agents")));
    }
    let h = ctx.params.horizon;
    let bounds: Vec<(f64, f64)> = ctx
        .specs
        .iter()
        .flat_map(|s| std::iter::repeat_n((-s.v_max, s.v_max), 2 * h))
        .collect();
    let mut seeds: Vec<Vec<f64>> = warm
        .filter(|w| w.len() == n && w.iter().all(|it| it.actions.len() == h))
        .map(|w| vec![w.iter().flat_map(|it| encode(&it.actions)).collect()])
        .unwrap_or_default();
    let pursuits: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|j| pursuit_seeds(j, ctx).iter().map(|a| encode(a)).collect())
        .collect();
    let combos: usize = pursuits.iter().map(Vec::len).product();
    for mut c in 0..combos.min(ctx.pso.swarm_size) {
        let mut x = Vec::with_capacity(2 * h * n);
        for options in &pursuits {
            x.extend_from_slice(&options[c % options.len()]);
            c /= options.len();
        }
        seeds.push(x);
    }
    let split = |x: &[f64]| -> Vec<Vec<Vector2<f64>>> {
        x.chunks_exact(2 * h)
            .zip(ctx.specs)
            .map(|(block, s)| decode(block, s.v_max))
            .collect()
    };
    let mut failure = None;
    let (best, _) = {
        let mut f = |x: &[f64]| {
            let joint = split(x);
            let refs: Vec<&[Vector2<f64>]> = joint.iter().map(Vec::as_slice).collect();
            match evaluate_objective(ctx.tracks, ctx.agents, ctx.specs, &refs, ctx.occluders, ctx.params) {
                Ok(c) => c,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::INFINITY
                }
            }
        };
        pso_minimize_with(&mut f, &bounds, ctx.pso, &seeds, rng)
    };
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(split(&best)
        .into_iter()
        .enumerate()
        .map(|(agent, actions)| Plan { agent, actions })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_examples() {
        let plan = Plan {
            agent: 0,
            actions: vec![Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0)],
        };
        let it = shift_intention(&plan);
        assert_eq!(it.actions, vec![Vector2::new(0.0, 1.0), Vector2::new(0.0, 1.0)]);
        let single = Plan {
            agent: 2,
            actions: vec![Vector2::new(1.0, 0.0)],
        };
        let it = shift_intention(&single);
        assert_eq!(it.actions, vec![Vector2::new(1.0, 0.0)]);
        assert_eq!(it.agent, 2);
    }

    #[test]
    fn parse_names() {
        assert_eq!("sma".parse::<Algorithm>().unwrap(), Algorithm::SmaNbo);
        assert_eq!("dec".parse::<Algorithm>().unwrap(), Algorithm::DecPomdp);
        assert!("pma".parse::<Algorithm>().is_err());
        assert_eq!("dynamic".parse::<OcclusionMode>().unwrap(), OcclusionMode::Dynamic);
    }
}

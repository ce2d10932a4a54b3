//! Visibility and range-bearing observation generation.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::world::{fov_region, AgentSpec, AgentState, ObjectClass, OcclusionObject, Region, WorldState};

/// Floor on the range used inside the noise model, metres.
pub const DEFAULT_D_MIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub class: ObjectClass,
    pub label: String,
    pub z: Vector2<f64>,
    pub source_agent: usize,
    /// Ground-truth index for evaluation. Trackers never read it.
    pub truth_id: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorModel {
    pub d_min: f64,
    pub detection_prob: f64,
    /// Expected false alarms per scan per agent, spread uniformly over the FoV.
    pub clutter_rate: f64,
    /// Multiplies every R; 0 gives exact measurements.
    pub noise_scale: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            d_min: DEFAULT_D_MIN,
            detection_prob: 1.0,
            clutter_rate: 0.0,
            noise_scale: 1.0,
        }
    }
}

/// N agents by T targets; entry (i, t) is whether target t is visible to agent i.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibilityMatrix {
    pub rows: Vec<Vec<bool>>,
}

impl VisibilityMatrix {
    pub fn agents(&self) -> usize {
        self.rows.len()
    }

    pub fn targets(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn get(&self, agent: usize, target: usize) -> bool {
        self.rows[agent][target]
    }

    /// Column-wise OR over agents.
    pub fn team(&self) -> Vec<bool> {
        (0..self.targets())
            .map(|t| self.rows.iter().any(|r| r[t]))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.rows.iter().flatten().filter(|v| **v).count()
    }
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Euclidean distance and yaw-relative bearing from the agent to `point`.
pub fn bearing_distance(agent: &AgentState, point: &Vector2<f64>) -> (f64, f64) {
    let dx = point.x - agent.px;
    let dy = point.y - agent.py;
    (dx.hypot(dy), wrap_angle(dy.atan2(dx) - agent.psi))
}

pub fn rotation(rho: f64) -> Matrix2<f64> {
    let (s, c) = rho.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Range-bearing noise covariance with the default range floor.
pub fn measurement_covariance(d: f64, rho: f64, alpha: f64) -> Matrix2<f64> {
    measurement_covariance_with_floor(d, rho, alpha, DEFAULT_D_MIN)
}

pub fn measurement_covariance_with_floor(d: f64, rho: f64, alpha: f64, d_min: f64) -> Matrix2<f64> {
    let d = d.max(d_min);
    let g = rotation(rho);
    let core = Matrix2::new(0.1 * d, 0.0, 0.0, 0.1 * PI * d);
    let r = g * core * g.transpose() * alpha;
    0.5 * (r + r.transpose())
}

/// Target `t` at `p` is visible from `fov` unless it falls inside any occluder.
pub fn point_visible(fov: &Region, p: &Vector2<f64>, occlusions: &[OcclusionObject]) -> bool {
    fov.contains(p) && !occlusions.iter().any(|w| w.contains(p))
}

pub fn visible_set(world: &WorldState, specs: &[AgentSpec]) -> VisibilityMatrix {
    let rows = world
        .agents
        .iter()
        .zip(specs)
        .map(|(agent, spec)| {
            let fov = fov_region(agent, spec);
            world
                .targets
                .iter()
                .map(|t| point_visible(&fov, &t.position(), &world.occlusions))
                .collect()
        })
        .collect();
    VisibilityMatrix { rows }
}

/// Which occluders each agent can see. An occluder never hides itself, only others.
pub fn visible_occluders(world: &WorldState, specs: &[AgentSpec]) -> VisibilityMatrix {
    let rows = world
        .agents
        .iter()
        .zip(specs)
        .map(|(agent, spec)| {
            let fov = fov_region(agent, spec);
            world
                .occlusions
                .iter()
                .enumerate()
                .map(|(j, w)| {
                    let c = w.center();
                    fov.contains(&c)
                        && !world
                            .occlusions
                            .iter()
                            .enumerate()
                            .any(|(l, other)| l != j && other.contains(&c))
                })
                .collect()
        })
        .collect();
    VisibilityMatrix { rows }
}

fn sample_gaussian<R: Rng + ?Sized>(cov: &Matrix2<f64>, rng: &mut R) -> Vector2<f64> {
    let n = Vector2::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
    match cov.cholesky() {
        Some(ch) => ch.l() * n,
        None => Vector2::zeros(),
    }
}

fn observe<R: Rng + ?Sized>(
    agent: &AgentState,
    spec: &AgentSpec,
    model: &SensorModel,
    truth: Vector2<f64>,
    rng: &mut R,
) -> Vector2<f64> {
    if model.noise_scale == 0.0 {
        return truth;
    }
    let (d, rho) = bearing_distance(agent, &truth);
    let r = measurement_covariance_with_floor(d, rho, spec.alpha, model.d_min) * model.noise_scale;
    truth + sample_gaussian(&r, rng)
}

/// One observation per visible (object, agent) pair, for both targets and occluders.
///
/// `rngs` holds one stream per agent so each agent's draws are independent of the others.
pub fn generate_observations<R: Rng>(
    world: &WorldState,
    specs: &[AgentSpec],
    model: &SensorModel,
    rngs: &mut [R],
) -> Vec<Observation> {
    let vis = visible_set(world, specs);
    let occ_vis = visible_occluders(world, specs);
    let mut out = Vec::new();
    for (i, ((agent, spec), rng)) in world.agents.iter().zip(specs).zip(rngs.iter_mut()).enumerate() {
        for (t, target) in world.targets.iter().enumerate() {
            if !vis.get(i, t) {
                continue;
            }
            if model.detection_prob < 1.0 && !rng.random_bool(model.detection_prob.clamp(0.0, 1.0)) {
                continue;
            }
            out.push(Observation {
                class: target.class,
                label: target.label.clone(),
                z: observe(agent, spec, model, target.position(), rng),
                source_agent: i,
                truth_id: Some(t),
            });
        }
        for (j, w) in world.occlusions.iter().enumerate() {
            if !occ_vis.get(i, j) {
                continue;
            }
            out.push(Observation {
                class: ObjectClass::Soo,
                label: w.label.clone(),
                z: observe(agent, spec, model, w.center(), rng),
                source_agent: i,
                truth_id: Some(j),
            });
        }
        if model.clutter_rate > 0.0 {
            let fov = fov_region(agent, spec);
            let count = Poisson::new(model.clutter_rate).map(|p| p.sample(rng) as usize).unwrap_or(0);
            let label = world.targets.first().map_or_else(|| "clutter".to_string(), |t| t.label.clone());
            for _ in 0..count {
                let z = Vector2::new(
                    rng.random_range(fov.min_x..fov.max_x),
                    rng.random_range(fov.min_y..fov.max_y),
                );
                out.push(Observation {
                    class: ObjectClass::Ooi,
                    label: label.clone(),
                    z,
                    source_agent: i,
                    truth_id: None,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::TargetTruth;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(h: f64) -> AgentSpec {
        AgentSpec {
            v_max: 1.0,
            fov_half_x: h,
            fov_half_y: h,
            alpha: 1.0,
        }
    }

    fn human(id: usize, px: f64, py: f64) -> TargetTruth {
        TargetTruth {
            id,
            label: "human".into(),
            class: ObjectClass::Ooi,
            px,
            py,
            vx: 0.0,
            vy: 0.0,
        }
    }

    fn tree(cx: f64, cy: f64, radius: f64) -> OcclusionObject {
        OcclusionObject {
            cx,
            cy,
            radius,
            label: "tree".into(),
        }
    }

    #[test]
    fn bearing_examples() {
        let (d, r) = bearing_distance(&AgentState::at(0.0, 0.0), &Vector2::new(1.0, 0.0));
        assert_eq!((d, r), (1.0, 0.0));
        let mut a = AgentState::at(0.0, 0.0);
        a.psi = PI / 2.0;
        let (d, r) = bearing_distance(&a, &Vector2::new(0.0, 2.0));
        assert_abs_diff_eq!(d, 2.0);
        assert_abs_diff_eq!(r, 0.0, epsilon = 1e-15);
        let (d, r) = bearing_distance(&AgentState::at(1.0, 1.0), &Vector2::new(4.0, 5.0));
        assert_abs_diff_eq!(d, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r, 4.0f64.atan2(3.0), epsilon = 1e-15);
    }

    #[test]
    fn wrap_range() {
        assert_abs_diff_eq!(wrap_angle(-PI), PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(PI), PI);
    }

    #[test]
    fn covariance_examples() {
        let r = measurement_covariance(1.0, 0.0, 1.0);
        assert_abs_diff_eq!(r, Matrix2::new(0.1, 0.0, 0.0, 0.1 * PI), epsilon = 1e-15);
        let r = measurement_covariance(1.0, PI / 2.0, 1.0);
        assert_abs_diff_eq!(r, Matrix2::new(0.1 * PI, 0.0, 0.0, 0.1), epsilon = 1e-15);
        let rho = 0.3;
        let r = measurement_covariance(0.0, rho, 1.0);
        let g = rotation(rho);
        let expected = g * Matrix2::new(0.1 * DEFAULT_D_MIN, 0.0, 0.0, 0.1 * PI * DEFAULT_D_MIN) * g.transpose();
        assert_abs_diff_eq!(r, expected, epsilon = 1e-15);
    }

    #[test]
    fn covariance_is_pi_periodic_in_bearing() {
        for &rho in &[0.0, 0.4, -1.3, 2.9] {
            let a = measurement_covariance(2.5, rho, 0.7);
            let b = measurement_covariance(2.5, rho + PI, 0.7);
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn occluder_hides_target_in_fov() {
        let world = WorldState {
            k: 0,
            agents: vec![AgentState::at(0.0, 0.0)],
            targets: vec![human(0, 0.5, 0.5), human(1, -0.5, -0.5)],
            occlusions: vec![tree(0.5, 0.5, 0.3)],
        };
        let v = visible_set(&world, &[spec(2.0)]);
        assert_eq!(v.rows, vec![vec![false, true]]);
        let empty = WorldState {
            occlusions: vec![],
            ..world.clone()
        };
        assert_eq!(visible_set(&empty, &[spec(2.0)]).rows, vec![vec![true, true]]);
    }

    #[test]
    fn occluders_see_each_other_but_not_themselves() {
        let world = WorldState {
            k: 0,
            agents: vec![AgentState::at(0.0, 0.0)],
            targets: vec![],
            occlusions: vec![tree(0.0, 0.0, 1.0), tree(0.5, 0.0, 0.2), tree(5.0, 0.0, 0.2)],
        };
        let v = visible_occluders(&world, &[spec(2.0)]);
        // second tree's center sits inside the first tree's disc
        assert_eq!(v.rows, vec![vec![true, false, false]]);
    }

    #[test]
    fn zero_noise_observations_are_exact_and_counted() {
        let world = WorldState {
            k: 0,
            agents: vec![AgentState::at(0.0, 0.0), AgentState::at(3.0, 0.0)],
            targets: vec![human(0, 0.2, 0.1), human(1, 2.0, 0.0), human(2, 9.0, 9.0)],
            occlusions: vec![],
        };
        let specs = [spec(1.5), spec(1.5)];
        let model = SensorModel {
            noise_scale: 0.0,
            ..SensorModel::default()
        };
        let mut rngs = [ChaCha8Rng::seed_from_u64(1), ChaCha8Rng::seed_from_u64(2)];
        let obs = generate_observations(&world, &specs, &model, &mut rngs);
        assert_eq!(obs.len(), visible_set(&world, &specs).count());
        for o in &obs {
            let truth = world.targets[o.truth_id.unwrap()].position();
            assert_eq!(o.z, truth);
        }
    }

    #[test]
    fn occluded_target_emits_nothing() {
        let world = WorldState {
            k: 0,
            agents: vec![AgentState::at(0.0, 0.0)],
            targets: vec![human(0, 0.0, 0.5)],
            occlusions: vec![tree(0.0, 0.5, 0.5)],
        };
        let mut rngs = [ChaCha8Rng::seed_from_u64(1)];
        let obs = generate_observations(&world, &[spec(2.0)], &SensorModel::default(), &mut rngs);
        assert!(obs.iter().all(|o| o.class == ObjectClass::Soo));
        assert_eq!(obs.len(), 1);
    }

    #[test]
    fn sample_covariance_matches_r() {
        let agent = AgentState {
            psi: 0.4,
            ..AgentState::at(0.0, 0.0)
        };
        let world = WorldState {
            k: 0,
            agents: vec![agent],
            targets: vec![human(0, 1.5, 1.0)],
            occlusions: vec![],
        };
        let sp = spec(3.0);
        let mut rngs = [ChaCha8Rng::seed_from_u64(99)];
        let n = 100_000;
        let truth = world.targets[0].position();
        let mut acc = Matrix2::zeros();
        for _ in 0..n {
            let o = &generate_observations(&world, &[sp], &SensorModel::default(), &mut rngs)[0];
            let e = o.z - truth;
            acc += e * e.transpose();
        }
        let est = acc / n as f64;
        let (d, rho) = bearing_distance(&agent, &truth);
        let r = measurement_covariance(d, rho, sp.alpha);
        assert!((est - r).norm() / r.norm() < 0.05);
    }

    proptest::proptest! {
        #[test]
        fn covariance_spd_with_exact_eigenvalues(d in 0.0f64..50.0, rho in -10.0f64..10.0, alpha in 0.001f64..10.0) {
            let r = measurement_covariance(d, rho, alpha);
            let dd = d.max(DEFAULT_D_MIN);
            let eig = r.symmetric_eigenvalues();
            let (lo, hi) = (eig.min(), eig.max());
            proptest::prop_assert!(lo > 0.0);
            let scale = 0.1 * PI * alpha * dd;
            proptest::prop_assert!((lo - 0.1 * alpha * dd).abs() <= 1e-12 * scale.max(1.0));
            proptest::prop_assert!((hi - scale).abs() <= 1e-12 * scale.max(1.0));
        }
    }
}

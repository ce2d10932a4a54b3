mod common;

use nalgebra::{Matrix4, Vector2, Vector4};
use proptest::prelude::*;
use rand::Rng;

use common::*;
use occtrack_core::planning::nominal_prediction;
use occtrack_core::rng::{stream, Stream};
use occtrack_core::sensing::{generate_observations, measurement_covariance, visible_set, SensorModel};
use occtrack_core::tracking::{DynamicOcclusionMap, FilterState};
use occtrack_core::world::{
    step_target_truth, AgentSpec, AgentState, ObjectClass, OcclusionObject, TargetTruth, WorldState,
};

fn target(id: usize, p: Vector2<f64>, v: Vector2<f64>) -> TargetTruth {
    TargetTruth {
        id,
        label: "human".into(),
        class: ObjectClass::Ooi,
        px: p.x,
        py: p.y,
        vx: v.x,
        vy: v.y,
    }
}

fn random_world(rng: &mut impl Rng) -> (WorldState, Vec<AgentSpec>) {
    let agents: Vec<AgentState> = (0..rng.random_range(1..=3))
        .map(|_| AgentState::at(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)))
        .collect();
    let specs = agents
        .iter()
        .map(|_| AgentSpec {
            v_max: 1.0,
            fov_half_x: rng.random_range(0.5..3.0),
            fov_half_y: rng.random_range(0.5..3.0),
            alpha: 0.1,
        })
        .collect();
    let targets = (0..rng.random_range(1..=5))
        .map(|id| {
            let p = Vector2::new(rng.random_range(-7.0..7.0), rng.random_range(-7.0..7.0));
            target(id, p, Vector2::zeros())
        })
        .collect();
    let occlusions = (0..rng.random_range(0..=3))
        .map(|_| OcclusionObject {
            cx: rng.random_range(-6.0..6.0),
            cy: rng.random_range(-6.0..6.0),
            radius: rng.random_range(0.2..2.5),
            label: "tree".into(),
        })
        .collect();
    (
        WorldState {
            k: 0,
            agents,
            targets,
            occlusions,
        },
        specs,
    )
}

#[test]
fn visibility_matches_geometric_oracle() {
    let mut rng = rng(2024);
    for _ in 0..10_000 {
        let (world, specs) = random_world(&mut rng);
        let vis = visible_set(&world, &specs);
        let discs: Vec<_> = world.occlusions.iter().map(|o| (o.center(), o.radius)).collect();
        for (i, (a, s)) in world.agents.iter().zip(&specs).enumerate() {
            for (t, tg) in world.targets.iter().enumerate() {
                let expected = visible_brute_force(a.position(), (s.fov_half_x, s.fov_half_y), tg.position(), &discs);
                assert_eq!(vis.get(i, t), expected);
            }
        }
    }
}

#[test]
fn rectangle_edges_are_half_open() {
    let world = WorldState {
        k: 0,
        agents: vec![AgentState::at(0.0, 0.0)],
        targets: vec![
            target(0, Vector2::new(-1.0, -1.0), Vector2::zeros()),
            target(1, Vector2::new(1.0, 0.0), Vector2::zeros()),
            target(2, Vector2::new(0.0, 1.0), Vector2::zeros()),
        ],
        occlusions: vec![],
    };
    let spec = AgentSpec {
        v_max: 1.0,
        fov_half_x: 1.0,
        fov_half_y: 1.0,
        alpha: 0.1,
    };
    assert_eq!(visible_set(&world, &[spec]).rows, vec![vec![true, false, false]]);
}

#[test]
fn one_observation_per_visible_pair() {
    let mut r = rng(77);
    for seed in 0..500 {
        let (world, specs) = random_world(&mut r);
        let vis = visible_set(&world, &specs);
        let mut rngs: Vec<_> = (0..specs.len()).map(|i| stream(seed, Stream::Sensing(i))).collect();
        let obs = generate_observations(&world, &specs, &SensorModel::default(), &mut rngs);
        let ooi = obs.iter().filter(|o| o.class == ObjectClass::Ooi).count();
        assert_eq!(ooi, vis.count());
    }
}

#[test]
fn sensor_covariance_eigenvalues_on_random_inputs() {
    let mut rng = rng(4);
    for _ in 0..10_000 {
        let d = rng.random_range(0.1..30.0);
        let rho = rng.random_range(-10.0..10.0);
        let alpha = rng.random_range(0.01..5.0);
        let mut ev: Vec<f64> = measurement_covariance(d, rho, alpha).symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let expected = [0.1 * alpha * d, 0.1 * std::f64::consts::PI * alpha * d];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a - b).abs() <= 1e-12 * b.max(1.0), "{a} vs {b}");
        }
    }
}

proptest! {
    #[test]
    fn nominal_prediction_follows_noiseless_truth(
        px in -10.0f64..10.0, py in -10.0f64..10.0, vx in -3.0f64..3.0, vy in -3.0f64..3.0,
        dt in 0.05f64..1.0, horizon in 1usize..8,
    ) {
        let belief = FilterState {
            ooi_tracks: vec![ooi(0, Vector4::new(px, py, vx, vy), Matrix4::identity())],
            occlusion_map: DynamicOcclusionMap::new(1.0, 1),
        };
        let pred = nominal_prediction(&belief, horizon, dt);
        let mut truth = target(0, Vector2::new(px, py), Vector2::new(vx, vy));
        let mut r = rng(0);
        for step in pred {
            truth = step_target_truth(&truth, dt, 0.0, &mut r);
            prop_assert!((step[0] - truth.position()).norm() < 1e-9);
        }
    }
}

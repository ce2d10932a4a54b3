//! Ground-truth containers and kinematics for agents, targets and occluders.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether an object is something to track or something that blocks the view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectClass {
    Ooi,
    Soo,
}

/// Planar robot state: position, yaw and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub px: f64,
    pub py: f64,
    pub psi: f64,
    pub vx: f64,
    pub vy: f64,
}

impl AgentState {
    pub fn at(px: f64, py: f64) -> Self {
        Self {
            px,
            py,
            psi: 0.0,
            vx: 0.0,
            vy: 0.0,
        }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.px, self.py)
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

/// Per-agent platform and sensor parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub v_max: f64,
    pub fov_half_x: f64,
    pub fov_half_y: f64,
    /// Sensor noise scale.
    pub alpha: f64,
}

impl AgentSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.v_max > 0.0 && self.fov_half_x > 0.0 && self.fov_half_y > 0.0 && self.alpha > 0.0;
        let finite = [self.v_max, self.fov_half_x, self.fov_half_y, self.alpha]
            .iter()
            .all(|v| v.is_finite());
        if ok && finite {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("agent spec must be positive and finite: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetTruth {
    pub id: usize,
    pub label: String,
    pub class: ObjectClass,
    pub px: f64,
    pub py: f64,
    pub vx: f64,
    pub vy: f64,
}

impl TargetTruth {
    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.px, self.py)
    }

    pub fn state(&self) -> Vector4<f64> {
        Vector4::new(self.px, self.py, self.vx, self.vy)
    }

    fn with_state(&self, s: Vector4<f64>) -> Self {
        Self {
            px: s[0],
            py: s[1],
            vx: s[2],
            vy: s[3],
            ..self.clone()
        }
    }
}

/// Circular stationary occluder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionObject {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub label: String,
}

impl OcclusionObject {
    pub fn center(&self) -> Vector2<f64> {
        Vector2::new(self.cx, self.cy)
    }

    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        disc_contains(self.cx, self.cy, self.radius, p)
    }
}

/// Closed disc membership. Shared by ground truth and estimated occluders.
pub fn disc_contains(cx: f64, cy: f64, radius: f64, p: &Vector2<f64>) -> bool {
    let dx = p.x - cx;
    let dy = p.y - cy;
    dx * dx + dy * dy <= radius * radius
}

/// Axis-aligned rectangle, closed on the min edges and open on the max edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Region {
    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        p.x >= self.min_x && p.x < self.max_x && p.y >= self.min_y && p.y < self.max_y
    }

    pub fn area(&self) -> f64 {
        (self.max_x - self.min_x) * (self.max_y - self.min_y)
    }

    pub fn center(&self) -> Vector2<f64> {
        Vector2::new(0.5 * (self.min_x + self.max_x), 0.5 * (self.min_y + self.max_y))
    }
}

pub fn region_contains(region: &Region, p: &Vector2<f64>) -> bool {
    region.contains(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub k: usize,
    pub agents: Vec<AgentState>,
    pub targets: Vec<TargetTruth>,
    pub occlusions: Vec<OcclusionObject>,
}

/// Clip `action` to `v_max`, set it as the new velocity and integrate position over `dt`.
pub fn step_agent(state: &AgentState, action: Vector2<f64>, dt: f64, v_max: f64) -> Result<AgentState> {
    if !action.x.is_finite() || !action.y.is_finite() {
        return Err(Error::NonFinite("agent action"));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    Ok(step_agent_unchecked(state, action, dt, v_max))
}

/// Same as [`step_agent`] without argument validation; used on the planner hot path.
#[inline]
pub(crate) fn step_agent_unchecked(state: &AgentState, action: Vector2<f64>, dt: f64, v_max: f64) -> AgentState {
    let v = clip_norm(action, v_max);
    let psi = if v.x != 0.0 || v.y != 0.0 { v.y.atan2(v.x) } else { state.psi };
    AgentState {
        px: state.px + v.x * dt,
        py: state.py + v.y * dt,
        psi,
        vx: v.x,
        vy: v.y,
    }
}

#[inline]
pub fn clip_norm(v: Vector2<f64>, max: f64) -> Vector2<f64> {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

/// Nadir footprint; independent of yaw.
pub fn fov_region(state: &AgentState, spec: &AgentSpec) -> Region {
    Region {
        min_x: state.px - spec.fov_half_x,
        min_y: state.py - spec.fov_half_y,
        max_x: state.px + spec.fov_half_x,
        max_y: state.py + spec.fov_half_y,
    }
}

/// Nearly-constant-velocity transition matrix over `dt`.
pub fn ncv_transition(dt: f64) -> Matrix4<f64> {
    Matrix4::new(
        1.0, 0.0, dt, 0.0, //
        0.0, 1.0, 0.0, dt, //
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    )
}

/// White-noise-acceleration process covariance, `q * [[dt^3/3, dt^2/2], [dt^2/2, dt]]` per axis.
pub fn ncv_process_noise(dt: f64, q: f64) -> Matrix4<f64> {
    let a = q * dt.powi(3) / 3.0;
    let b = q * dt.powi(2) / 2.0;
    let c = q * dt;
    Matrix4::new(
        a, 0.0, b, 0.0, //
        0.0, a, 0.0, b, //
        b, 0.0, c, 0.0, //
        0.0, b, 0.0, c,
    )
}

/// Propagate a ground-truth target one step. Stationary classes never move.
pub fn step_target_truth<R: Rng + ?Sized>(t: &TargetTruth, dt: f64, q: f64, rng: &mut R) -> TargetTruth {
    if t.class == ObjectClass::Soo {
        return t.clone();
    }
    let mut next = ncv_transition(dt) * t.state();
    if q > 0.0 {
        next += sample_ncv_noise(dt, q, rng);
    }
    t.with_state(next)
}

/// Draws from N(0, Q) using the closed-form per-axis Cholesky factor of Q.
fn sample_ncv_noise<R: Rng + ?Sized>(dt: f64, q: f64, rng: &mut R) -> Vector4<f64> {
    let block = Matrix2::new(dt.powi(3) / 3.0, dt.powi(2) / 2.0, dt.powi(2) / 2.0, dt) * q;
    // [[a, 0], [b, c]] with a = sqrt(q dt^3/3), b = block01 / a, c = sqrt(q dt - b^2)
    let a = block[(0, 0)].sqrt();
    let b = block[(0, 1)] / a;
    let c = (block[(1, 1)] - b * b).max(0.0).sqrt();
    let mut out = Vector4::zeros();
    for axis in 0..2 {
        let n0: f64 = rng.sample(StandardNormal);
        let n1: f64 = rng.sample(StandardNormal);
        out[axis] = a * n0;
        out[axis + 2] = b * n0 + c * n1;
    }
    out
}

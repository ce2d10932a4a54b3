//! Global-best particle swarm minimiser over a box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoParams {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub seed: u64,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            swarm_size: 40,
            iterations: 60,
            inertia: 0.729,
            cognitive: 1.49445,
            social: 1.49445,
            seed: 0,
        }
    }
}

/// Minimise `objective` with an RNG seeded from `params.seed`.
pub fn pso_minimize<F>(objective: F, bounds: &[(f64, f64)], params: &PsoParams) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    pso_minimize_with(objective, bounds, params, &[], &mut rng)
}

/// Minimise `objective` over `bounds`.
///
/// The swarm always contains the zero vector (clamped into the box) followed by `initial`
/// guesses; the remaining particles are uniform. The returned cost is therefore never worse
/// than the cost of any seeded particle. A new best must be strictly lower, so ties keep the
/// earliest discovery.
pub fn pso_minimize_with<F, R>(
    mut objective: F,
    bounds: &[(f64, f64)],
    params: &PsoParams,
    initial: &[Vec<f64>],
    rng: &mut R,
) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let dim = bounds.len();
    let n = params.swarm_size.max(2);
    let span: Vec<f64> = bounds.iter().map(|(lo, hi)| hi - lo).collect();
    let clamp = |x: f64, d: usize| x.clamp(bounds[d].0, bounds[d].1);

    let mut pos: Vec<Vec<f64>> = Vec::with_capacity(n);
    pos.push((0..dim).map(|d| clamp(0.0, d)).collect());
    for guess in initial.iter().filter(|g| g.len() == dim) {
        if pos.len() < n {
            pos.push(guess.iter().enumerate().map(|(d, x)| clamp(*x, d)).collect());
        }
    }
    while pos.len() < n {
        pos.push(
            bounds
                .iter()
                .map(|(lo, hi)| if hi > lo { rng.random_range(*lo..*hi) } else { *lo })
                .collect(),
        );
    }
    let mut vel: Vec<Vec<f64>> = (0..n)
        .map(|_| span.iter().map(|s| 0.2 * s * rng.random_range(-1.0..=1.0)).collect())
        .collect();

    let mut best_pos = pos.clone();
    let mut best_cost: Vec<f64> = Vec::with_capacity(n);
    let mut g_idx = 0;
    for (p, x) in pos.iter().enumerate() {
        let c = sanitize(objective(x));
        best_cost.push(c);
        if c < best_cost[g_idx] {
            g_idx = p;
        }
    }
    let mut g_pos = best_pos[g_idx].clone();
    let mut g_cost = best_cost[g_idx];

    for _ in 0..params.iterations {
        for p in 0..n {
            for d in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let v = params.inertia * vel[p][d]
                    + params.cognitive * r1 * (best_pos[p][d] - pos[p][d])
                    + params.social * r2 * (g_pos[d] - pos[p][d]);
                vel[p][d] = v.clamp(-span[d], span[d]);
                let x = pos[p][d] + vel[p][d];
                let cx = clamp(x, d);
                if cx != x {
                    vel[p][d] = 0.0;
                }
                pos[p][d] = cx;
            }
            let c = sanitize(objective(&pos[p]));
            if c < best_cost[p] {
                best_cost[p] = c;
                best_pos[p].clone_from(&pos[p]);
                if c < g_cost {
                    g_cost = c;
                    g_pos.clone_from(&pos[p]);
                }
            }
        }
    }
    (g_pos, g_cost)
}

fn sanitize(c: f64) -> f64 {
    if c.is_nan() {
        f64::INFINITY
    } else {
        c
    }
}

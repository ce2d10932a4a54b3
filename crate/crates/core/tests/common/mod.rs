//! Independent oracles and random instance generators shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2, Matrix4, SMatrix, Vector2, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use occtrack_core::tracking::{Measurement, OoiTrack, Track};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `A Aᵀ + εI` with entries of `A` uniform in [-1, 1].
pub fn random_spd<const D: usize>(rng: &mut impl Rng, eps: f64) -> SMatrix<f64, D, D> {
    let a = SMatrix::<f64, D, D>::from_fn(|_, _| rng.random_range(-1.0..1.0));
    a * a.transpose() + SMatrix::<f64, D, D>::identity() * eps
}

pub fn ooi(id: u32, mean: Vector4<f64>, cov: Matrix4<f64>) -> OoiTrack {
    Track {
        id,
        label: "human".into(),
        mean,
        cov,
    }
}

/// Dense `P - P Hᵀ (H P Hᵀ + R)⁻¹ H P` computed through dynamically sized matrices.
pub fn kalman_posterior_dense(p: &Matrix4<f64>, r: &Matrix2<f64>) -> DMatrix<f64> {
    let p = DMatrix::from_column_slice(4, 4, p.as_slice());
    let r = DMatrix::from_column_slice(2, 2, r.as_slice());
    let mut h = DMatrix::zeros(2, 4);
    h[(0, 0)] = 1.0;
    h[(1, 1)] = 1.0;
    let s = &h * &p * h.transpose() + r;
    let s_inv = s.try_inverse().expect("invertible innovation");
    &p - &p * h.transpose() * s_inv * &h * &p
}

/// Gaussian likelihood of a position measurement by explicit 2x2 algebra; `None` outside the gate.
pub fn likelihood_2x2(track: &OoiTrack, m: &Measurement, gate: f64) -> Option<f64> {
    let s11 = track.cov[(0, 0)] + m.r[(0, 0)];
    let s12 = track.cov[(0, 1)] + m.r[(0, 1)];
    let s22 = track.cov[(1, 1)] + m.r[(1, 1)];
    let det = s11 * s22 - s12 * s12;
    let dx = m.z.x - track.mean[0];
    let dy = m.z.y - track.mean[1];
    let d2 = (s22 * dx * dx - 2.0 * s12 * dx * dy + s11 * dy * dy) / det;
    (d2 <= gate).then(|| (-0.5 * d2).exp() / (2.0 * PI * det.sqrt()))
}

/// Marginal association weights by enumerating every measurement-to-origin map.
///
/// Each measurement is clutter or belongs to one track; no track takes two measurements; a
/// pairing must pass the gate. Measurements outside every gate are left out entirely.
/// Returns `(beta[t][j], miss[t])`.
pub fn jpda_brute_force(
    tracks: &[OoiTrack],
    obs: &[Measurement],
    gate: f64,
    p_d: f64,
    clutter: f64,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let g: Vec<Vec<Option<f64>>> = tracks
        .iter()
        .map(|t| obs.iter().map(|m| likelihood_2x2(t, m, gate)).collect())
        .collect();
    let relevant: Vec<usize> = (0..obs.len()).filter(|&j| g.iter().any(|row| row[j].is_some())).collect();
    let (nt, nr) = (tracks.len(), relevant.len());
    let mut beta = vec![vec![0.0; obs.len()]; nt];
    let mut miss = vec![0.0; nt];
    if nr == 0 {
        return (beta, vec![1.0; nt]);
    }
    let miss_factor = (1.0 - p_d).max(1e-12);
    let clutter = clutter.max(1e-12);
    let mut total = 0.0;
    let mut origin = vec![0usize; nr];
    let events = (nt + 1).pow(nr as u32);
    for mut code in 0..events {
        for o in origin.iter_mut() {
            *o = code % (nt + 1);
            code /= nt + 1;
        }
        let mut taken = vec![None; nt];
        let mut weight = 1.0;
        let mut feasible = true;
        for (r, &o) in origin.iter().enumerate() {
            let j = relevant[r];
            if o == 0 {
                weight *= clutter;
                continue;
            }
            let t = o - 1;
            match (taken[t], g[t][j]) {
                (None, Some(l)) => {
                    taken[t] = Some(j);
                    weight *= p_d * l;
                }
                _ => {
                    feasible = false;
                    break;
                }
            }
        }
        if !feasible {
            continue;
        }
        let misses = taken.iter().filter(|t| t.is_none()).count();
        let w = weight * miss_factor.powi(misses as i32);
        for (t, tk) in taken.iter().enumerate() {
            match tk {
                Some(j) => beta[t][*j] += w,
                None => miss[t] += w,
            }
        }
        total += w;
    }
    for row in beta.iter_mut() {
        row.iter_mut().for_each(|b| *b /= total);
    }
    miss.iter_mut().for_each(|m| *m /= total);
    (beta, miss)
}

/// Centralized information fusion: `(Σ wᵢ Pᵢ⁻¹)⁻¹` and the matching mean.
pub fn centralized_fusion(tracks: &[(Vector4<f64>, Matrix4<f64>)], weights: &[f64]) -> (Vector4<f64>, Matrix4<f64>) {
    let mut omega = Matrix4::zeros();
    let mut q = Vector4::zeros();
    for ((x, p), w) in tracks.iter().zip(weights) {
        let info = p.try_inverse().expect("SPD");
        omega += info * *w;
        q += info * x * *w;
    }
    let cov = omega.try_inverse().expect("SPD");
    (cov * q, cov)
}

/// Point inside an axis-aligned box centred at `c` (closed low edges, open high edges) and
/// outside every disc.
pub fn visible_brute_force(c: Vector2<f64>, half: (f64, f64), p: Vector2<f64>, discs: &[(Vector2<f64>, f64)]) -> bool {
    let in_box = p.x >= c.x - half.0 && p.x < c.x + half.0 && p.y >= c.y - half.1 && p.y < c.y + half.1;
    in_box && discs.iter().all(|(o, r)| (p - o).norm_squared() > r * r)
}

pub fn min_eigenvalue(m: &Matrix4<f64>) -> f64 {
    m.symmetric_eigenvalues().min()
}

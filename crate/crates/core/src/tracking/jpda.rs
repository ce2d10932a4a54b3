//! Joint probabilistic data association over gated single-scan hypotheses.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::kalman::{innovation, kf_update, spd_inverse, symmetrize, Cov, Track};
use crate::error::Result;

/// 99% chi-square quantile for two degrees of freedom.
pub const DEFAULT_GATE_CHI2: f64 = 9.21;

/// Lower bound applied to the miss factor `1 - P_D` and the clutter density so that
/// no feasible joint event is assigned exactly zero mass.
pub const MIN_EVENT_FACTOR: f64 = 1e-12;

/// A position measurement together with its noise covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub z: Vector2<f64>,
    pub r: Matrix2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationResult {
    /// `beta[t][j]`: probability that measurement j originated from track t.
    pub beta: Vec<Vec<f64>>,
    /// Probability that track t was not detected.
    pub miss: Vec<f64>,
}

impl AssociationResult {
    fn coasting(tracks: usize, obs: usize) -> Self {
        Self {
            beta: vec![vec![0.0; obs]; tracks],
            miss: vec![1.0; tracks],
        }
    }
}

/// Gate test and Gaussian likelihood for one track/measurement pair.
pub fn gated_likelihood<const D: usize>(track: &Track<D>, m: &Measurement, gate_chi2: f64) -> Option<f64> {
    let (nu, s) = innovation(track, &m.z, &m.r);
    let s_inv = spd_inverse(&s, "innovation").ok()?;
    let d2 = (nu.transpose() * s_inv * nu)[(0, 0)];
    if d2 > gate_chi2 {
        return None;
    }
    Some((-0.5 * d2).exp() / (2.0 * PI * s.determinant().sqrt()))
}

/// Effective miss factor and clutter density used in joint-event weights.
pub fn event_factors(p_d: f64, clutter_density: f64) -> (f64, f64) {
    ((1.0 - p_d).max(MIN_EVENT_FACTOR), clutter_density.max(MIN_EVENT_FACTOR))
}

struct Search<'a> {
    candidates: &'a [Vec<(usize, f64)>],
    gated_obs: usize,
    p_d: f64,
    miss: f64,
    clutter: f64,
    used: Vec<bool>,
    choice: Vec<Option<usize>>,
    beta: Vec<Vec<f64>>,
    miss_mass: Vec<f64>,
    total: f64,
}

impl Search<'_> {
    fn run(&mut self, t: usize, weight: f64, assigned: usize) {
        if t == self.candidates.len() {
            let w = weight * self.clutter.powi((self.gated_obs - assigned) as i32);
            self.total += w;
            for (tt, c) in self.choice.iter().enumerate() {
                match c {
                    Some(j) => self.beta[tt][*j] += w,
                    None => self.miss_mass[tt] += w,
                }
            }
            return;
        }
        self.choice[t] = None;
        self.run(t + 1, weight * self.miss, assigned);
        for k in 0..self.candidates[t].len() {
            let (j, g) = self.candidates[t][k];
            if self.used[j] {
                continue;
            }
            self.used[j] = true;
            self.choice[t] = Some(j);
            self.run(t + 1, weight * self.p_d * g, assigned + 1);
            self.used[j] = false;
        }
        self.choice[t] = None;
    }
}

/// JPDA marginal association weights.
///
/// Measurements outside every gate take no part in the joint events. A track with no gated
/// measurement coasts with `miss = 1`.
pub fn associate<const D: usize>(
    tracks: &[Track<D>],
    observations: &[Measurement],
    gate_chi2: f64,
    p_d: f64,
    clutter_density: f64,
) -> AssociationResult {
    let candidates: Vec<Vec<(usize, f64)>> = tracks
        .iter()
        .map(|t| {
            observations
                .iter()
                .enumerate()
                .filter_map(|(j, m)| gated_likelihood(t, m, gate_chi2).map(|g| (j, g)))
                .collect()
        })
        .collect();
    let mut in_gate = vec![false; observations.len()];
    for row in &candidates {
        for (j, _) in row {
            in_gate[*j] = true;
        }
    }
    let gated_obs = in_gate.iter().filter(|g| **g).count();
    if gated_obs == 0 {
        return AssociationResult::coasting(tracks.len(), observations.len());
    }
    let (miss, clutter) = event_factors(p_d, clutter_density);
    let mut search = Search {
        candidates: &candidates,
        gated_obs,
        p_d,
        miss,
        clutter,
        used: vec![false; observations.len()],
        choice: vec![None; tracks.len()],
        beta: vec![vec![0.0; observations.len()]; tracks.len()],
        miss_mass: vec![0.0; tracks.len()],
        total: 0.0,
    };
    search.run(0, 1.0, 0);
    let total = search.total;
    if !(total > 0.0) || !total.is_finite() {
        return AssociationResult::coasting(tracks.len(), observations.len());
    }
    let beta = search
        .beta
        .into_iter()
        .map(|row| row.into_iter().map(|b| b / total).collect())
        .collect();
    let miss = search.miss_mass.into_iter().map(|m| m / total).collect();
    AssociationResult { beta, miss }
}

/// Moment-matched posterior of the per-hypothesis Kalman updates.
pub fn jpda_update<const D: usize>(
    track: &Track<D>,
    observations: &[Measurement],
    beta: &[f64],
    miss: f64,
) -> Result<Track<D>> {
    if miss >= 1.0 {
        return Ok(track.clone());
    }
    let mut parts: Vec<(f64, Track<D>)> = vec![(miss, track.clone())];
    for (m, &b) in observations.iter().zip(beta) {
        if b > 0.0 {
            parts.push((b, kf_update(track, &m.z, &m.r)?));
        }
    }
    let norm: f64 = parts.iter().map(|(w, _)| w).sum();
    let mean = parts.iter().fold(nalgebra::SVector::<f64, D>::zeros(), |acc, (w, t)| acc + t.mean * (*w / norm));
    let cov = parts.iter().fold(Cov::<D>::zeros(), |acc, (w, t)| {
        let d = t.mean - mean;
        acc + (t.cov + d * d.transpose()) * (*w / norm)
    });
    Ok(Track {
        mean,
        cov: symmetrize(cov),
        ..track.clone()
    })
}

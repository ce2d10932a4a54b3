//! Consensus on information across agents' local filters.

use std::collections::BTreeMap;

use super::kalman::{spd_inverse, symmetrize, Cov, Track};
use super::FilterState;
use crate::error::{Error, Result};

/// Weighted information-space average of tracks that share one id.
pub fn fuse_tracks<const D: usize>(tracks: &[&Track<D>], weights: &[f64]) -> Result<Track<D>> {
    let first = tracks.first().ok_or_else(|| Error::InvalidArgument("no tracks to fuse".into()))?;
    let mut omega = Cov::<D>::zeros();
    let mut q = nalgebra::SVector::<f64, D>::zeros();
    for (t, &w) in tracks.iter().zip(weights) {
        if t.id != first.id {
            return Err(Error::IdMismatch(format!("{} vs {}", first.id, t.id)));
        }
        let info = spd_inverse(&t.cov, "local track covariance")?;
        omega += info * w;
        q += info * t.mean * w;
    }
    let cov = symmetrize(spd_inverse(&omega, "fused information")?);
    Ok(Track {
        mean: cov * q,
        cov,
        ..(*first).clone()
    })
}

fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::InvalidArgument(format!("{} weights for {} agents", weights.len(), n)));
    }
    if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(Error::InvalidArgument("fusion weights must be non-negative".into()));
    }
    let s: f64 = weights.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("fusion weights sum to {s}, expected 1")));
    }
    Ok(())
}

fn fuse_by_id<const D: usize>(sets: Vec<&[Track<D>]>, weights: &[f64]) -> Result<Vec<Track<D>>> {
    let mut grouped: BTreeMap<u32, Vec<&Track<D>>> = BTreeMap::new();
    for set in &sets {
        for t in set.iter() {
            grouped.entry(t.id).or_default().push(t);
        }
    }
    let n = sets.len();
    let order: Vec<u32> = sets.first().map(|s| s.iter().map(|t| t.id).collect()).unwrap_or_default();
    if grouped.len() != order.len() || grouped.values().any(|g| g.len() != n) {
        let ids: Vec<Vec<u32>> = sets.iter().map(|s| s.iter().map(|t| t.id).collect()).collect();
        return Err(Error::IdMismatch(format!("agents hold different track ids: {ids:?}")));
    }
    order.iter().map(|id| fuse_tracks(&grouped[id], weights)).collect()
}

/// Fuse every agent's OOI tracks and occlusion-map entries into a single filter state.
pub fn ci_fuse(local_states: &[FilterState], weights: &[f64]) -> Result<FilterState> {
    let first = local_states
        .first()
        .ok_or_else(|| Error::InvalidArgument("no filter states to fuse".into()))?;
    check_weights(weights, local_states.len())?;
    let ooi_tracks = fuse_by_id(local_states.iter().map(|s| s.ooi_tracks.as_slice()).collect(), weights)?;
    let soo_tracks = fuse_by_id(
        local_states.iter().map(|s| s.occlusion_map.soo_tracks.as_slice()).collect(),
        weights,
    )?;
    let mut out = first.clone();
    out.ooi_tracks = ooi_tracks;
    out.occlusion_map.soo_tracks = soo_tracks;
    Ok(out)
}

/// Run `rounds` synchronous rounds over a complete graph. Every agent applies the same weights.
pub fn consensus(local_states: &[FilterState], weights: &[f64], rounds: usize) -> Result<Vec<FilterState>> {
    let mut states = local_states.to_vec();
    for _ in 0..rounds {
        let fused = ci_fuse(&states, weights)?;
        states = vec![fused; states.len()];
    }
    Ok(states)
}

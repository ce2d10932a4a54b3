//! Linear Kalman filtering on generic-dimension Gaussian tracks.

use nalgebra::{Matrix2, SMatrix, SVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{ncv_process_noise, ncv_transition};

pub type Cov<const D: usize> = SMatrix<f64, D, D>;

/// Gaussian track estimate. `D = 4` holds (px, py, vx, vy); `D = 2` holds a static position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track<const D: usize> {
    pub id: u32,
    pub label: String,
    pub mean: SVector<f64, D>,
    pub cov: Cov<D>,
}

pub type OoiTrack = Track<4>;
pub type SooTrack = Track<2>;

impl<const D: usize> Track<D> {
    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.mean[0], self.mean[1])
    }

    pub fn position_cov(&self) -> Matrix2<f64> {
        self.cov.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn trace(&self) -> f64 {
        self.cov.trace()
    }
}

/// Motion hypothesis attached to a track dimension.
pub trait Dynamics: Sized {
    fn predict(&self, dt: f64, q: f64) -> Self;
}

impl Dynamics for OoiTrack {
    fn predict(&self, dt: f64, q: f64) -> Self {
        let f = ncv_transition(dt);
        Self {
            mean: f * self.mean,
            cov: symmetrize(f * self.cov * f.transpose() + ncv_process_noise(dt, q)),
            ..self.clone()
        }
    }
}

impl Dynamics for SooTrack {
    fn predict(&self, _dt: f64, _q: f64) -> Self {
        self.clone()
    }
}

pub fn kf_predict<T: Dynamics>(track: &T, dt: f64, q: f64) -> T {
    track.predict(dt, q)
}

/// Selects the position components of a D-dimensional state.
pub fn position_selector<const D: usize>() -> SMatrix<f64, 2, D> {
    let mut h = SMatrix::<f64, 2, D>::zeros();
    h[(0, 0)] = 1.0;
    h[(1, 1)] = 1.0;
    h
}

#[inline]
pub fn symmetrize<const D: usize>(m: Cov<D>) -> Cov<D> {
    (m + m.transpose()) * 0.5
}

pub fn spd_inverse<const D: usize>(m: &Cov<D>, what: &'static str) -> Result<Cov<D>> {
    m.cholesky().map(|c| c.inverse()).ok_or(Error::Singular(what))
}

/// Innovation and its covariance for a position measurement.
pub fn innovation<const D: usize>(track: &Track<D>, z: &Vector2<f64>, r: &Matrix2<f64>) -> (Vector2<f64>, Matrix2<f64>) {
    let h = position_selector::<D>();
    let nu = z - h * track.mean;
    let s = symmetrize(h * track.cov * h.transpose() + r);
    (nu, s)
}

/// Standard Kalman measurement update with Joseph-form covariance.
pub fn kf_update<const D: usize>(track: &Track<D>, z: &Vector2<f64>, r: &Matrix2<f64>) -> Result<Track<D>> {
    if !z.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("measurement"));
    }
    let h = position_selector::<D>();
    let (nu, s) = innovation(track, z, r);
    let s_inv = spd_inverse(&s, "innovation covariance")?;
    let k = track.cov * h.transpose() * s_inv;
    let ikh = Cov::<D>::identity() - k * h;
    let cov = symmetrize(ikh * track.cov * ikh.transpose() + k * r * k.transpose());
    Ok(Track {
        mean: track.mean + k * nu,
        cov,
        ..track.clone()
    })
}

/// Information-form posterior for a set of (H, R) observers, plus its trace.
pub fn info_update_trace<const D: usize>(
    p_pred: &Cov<D>,
    observers: &[(SMatrix<f64, 2, D>, Matrix2<f64>)],
) -> Result<(Cov<D>, f64)> {
    if observers.is_empty() {
        return Ok((*p_pred, p_pred.trace()));
    }
    let mut info = spd_inverse(p_pred, "predicted covariance")?;
    for (h, r) in observers {
        let r_inv = spd_inverse(r, "measurement covariance")?;
        info += h.transpose() * r_inv * h;
    }
    let post = symmetrize(spd_inverse(&info, "posterior information")?);
    let tr = post.trace();
    Ok((post, tr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{Matrix4, Vector4};

    fn ooi(mean: Vector4<f64>, cov: Matrix4<f64>) -> OoiTrack {
        Track {
            id: 0,
            label: "human".into(),
            mean,
            cov,
        }
    }

    #[test]
    fn deterministic_prediction() {
        let t = ooi(Vector4::new(0.0, 0.0, 1.0, 0.0), Matrix4::identity());
        let p = kf_predict(&t, 1.0, 0.0);
        assert_eq!(p.mean, Vector4::new(1.0, 0.0, 1.0, 0.0));
        let f = ncv_transition(1.0);
        assert_abs_diff_eq!(p.cov, f * f.transpose(), epsilon = 1e-15);
    }

    #[test]
    fn static_prediction_is_identity() {
        let t = SooTrack {
            id: 3,
            label: "tree".into(),
            mean: Vector2::new(1.0, 2.0),
            cov: Matrix2::new(0.3, 0.1, 0.1, 0.2),
        };
        assert_eq!(kf_predict(&t, 5.0, 10.0), t);
    }

    #[test]
    fn prediction_matches_hand_multiplication() {
        // fixed SPD matrix, product expanded element-wise
        let a = Matrix4::new(
            1.0, 0.2, 0.0, 0.1, 0.3, 1.5, 0.2, 0.0, 0.0, 0.1, 0.8, 0.3, 0.2, 0.0, 0.1, 1.2,
        );
        let p = a * a.transpose();
        let dt = 0.5;
        let q = 0.7;
        let f = [
            [1.0, 0.0, dt, 0.0],
            [0.0, 1.0, 0.0, dt],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        let mut expected = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let mut s = 0.0;
                for k in 0..4 {
                    for l in 0..4 {
                        s += f[i][k] * p[(k, l)] * f[j][l];
                    }
                }
                expected[i][j] = s;
            }
        }
        let qm = ncv_process_noise(dt, q);
        let got = kf_predict(&ooi(Vector4::zeros(), p), dt, q);
        for i in 0..4 {
            for j in 0..4 {
                assert!((got.cov[(i, j)] - expected[i][j] - qm[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uninformative_measurement_leaves_prior() {
        let t = ooi(Vector4::new(1.0, 2.0, 0.5, 0.0), Matrix4::identity());
        let post = kf_update(&t, &Vector2::new(5.0, -3.0), &(Matrix2::identity() * 1e12)).unwrap();
        assert!((post.mean - t.mean).abs().max() < 1e-6);
        assert!((post.cov - t.cov).abs().max() < 1e-6);
    }

    #[test]
    fn unit_update_halves_position_variance() {
        let t = ooi(Vector4::new(1.0, 2.0, 0.5, 0.0), Matrix4::identity());
        let post = kf_update(&t, &Vector2::new(1.0, 2.0), &Matrix2::identity()).unwrap();
        assert_abs_diff_eq!(post.mean, t.mean, epsilon = 1e-15);
        let expected = Matrix4::from_diagonal(&Vector4::new(0.5, 0.5, 1.0, 1.0));
        assert_abs_diff_eq!(post.cov, expected, epsilon = 1e-15);
    }

    #[test]
    fn singular_innovation_is_an_error() {
        let t = ooi(Vector4::zeros(), Matrix4::zeros());
        assert!(matches!(
            kf_update(&t, &Vector2::zeros(), &Matrix2::zeros()),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn empty_observer_list_is_prior() {
        let p = Matrix4::from_diagonal(&Vector4::new(1.0, 2.0, 3.0, 4.0));
        let (post, tr) = info_update_trace::<4>(&p, &[]).unwrap();
        assert_eq!(post, p);
        assert_eq!(tr, 10.0);
    }

    #[test]
    fn two_observers_beat_one() {
        let p = Matrix4::from_diagonal(&Vector4::new(1.0, 2.0, 3.0, 4.0));
        let obs = (position_selector::<4>(), Matrix2::new(0.5, 0.1, 0.1, 0.4));
        let (_, one) = info_update_trace(&p, &[obs]).unwrap();
        let (_, two) = info_update_trace(&p, &[obs, obs]).unwrap();
        assert!(two < one);
    }

    #[test]
    fn info_form_matches_kalman_form() {
        let a = Matrix4::new(
            1.0, 0.2, 0.0, 0.1, 0.3, 1.5, 0.2, 0.0, 0.0, 0.1, 0.8, 0.3, 0.2, 0.0, 0.1, 1.2,
        );
        let p = a * a.transpose();
        let r = Matrix2::new(0.3, 0.05, 0.05, 0.6);
        let kf = kf_update(&ooi(Vector4::zeros(), p), &Vector2::zeros(), &r).unwrap();
        let (info, _) = info_update_trace(&p, &[(position_selector::<4>(), r)]).unwrap();
        assert!((kf.cov - info).norm() < 1e-9);
    }

    #[test]
    fn non_invertible_prior_is_an_error() {
        let obs = (position_selector::<4>(), Matrix2::identity());
        assert!(info_update_trace(&Matrix4::zeros(), &[obs]).is_err());
    }
}

//! Recursive least squares estimation of the front and rear cornering
//! stiffness from axle lateral forces and slip angles.
//!
//! The regressor is diagonal (`F_f = c_f alpha_f`, `F_r = c_r alpha_r`), so the
//! estimator is a two-output RLS sharing one covariance matrix. Channels whose
//! slip falls inside the dead band are dropped from the update.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::lpv::StiffnessBounds;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct RlsConfig<T> {
    pub initial_estimate: [T; 2],
    /// Initial covariance is `initial_covariance * I`.
    pub initial_covariance: T,
    pub forgetting: T,
    /// Slip magnitude [rad] below which a channel carries no information.
    pub dead_band: T,
    pub bounds: StiffnessBounds<T>,
    /// Covariance trace above which the estimator resets.
    pub max_trace: T,
}

impl<T: Real> Default for RlsConfig<T> {
    fn default() -> Self {
        Self {
            initial_estimate: [T::of(80_000.0), T::of(80_000.0)],
            initial_covariance: T::of(1e6),
            forgetting: T::of(0.995),
            dead_band: T::of(1e-3),
            bounds: StiffnessBounds::default(),
            max_trace: T::of(1e12),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RlsOutcome<T> {
    /// Estimate moved. `error` is `z - phi^T theta` before the update, per
    /// channel (zero on a skipped channel).
    Updated { error: [T; 2] },
    /// Both slips inside the dead band.
    Skipped,
    /// Covariance blew up; state reinitialized.
    Reset,
}

#[derive(Debug, Clone)]
pub struct RlsEstimator<T: Real> {
    config: RlsConfig<T>,
    theta: Vector2<T>,
    covariance: Matrix2<T>,
    n_updates: usize,
}

impl<T: Real> RlsEstimator<T> {
    pub fn new(config: RlsConfig<T>) -> Result<Self> {
        if !(config.forgetting > T::zero() && config.forgetting <= T::one()) {
            return Err(Error::input(format!(
                "forgetting factor must lie in (0, 1], got {}",
                config.forgetting
            )));
        }
        if !(config.initial_covariance > T::zero()) {
            return Err(Error::input("initial covariance must be positive"));
        }
        if !(config.bounds.min > T::zero() && config.bounds.min < config.bounds.max) {
            return Err(Error::input("stiffness bounds must satisfy 0 < min < max"));
        }
        let mut est = Self {
            theta: Vector2::zeros(),
            covariance: Matrix2::zeros(),
            n_updates: 0,
            config,
        };
        est.reset();
        Ok(est)
    }

    pub fn reset(&mut self) {
        let [cf, cr] = self.config.initial_estimate;
        self.theta = Vector2::new(self.config.bounds.clamp(cf), self.config.bounds.clamp(cr));
        self.covariance = Matrix2::identity() * self.config.initial_covariance;
        self.n_updates = 0;
    }

    /// Current `[c_f, c_r]`.
    pub fn estimate(&self) -> [T; 2] {
        [self.theta[0], self.theta[1]]
    }

    pub fn covariance(&self) -> &Matrix2<T> {
        &self.covariance
    }

    pub fn n_updates(&self) -> usize {
        self.n_updates
    }

    pub fn config(&self) -> &RlsConfig<T> {
        &self.config
    }

    /// Folds one measurement `forces = [F_f, F_r]`, `slips = [alpha_f, alpha_r]`
    /// into the estimate.
    pub fn update(&mut self, forces: [T; 2], slips: [T; 2]) -> Result<RlsOutcome<T>> {
        if forces.iter().chain(slips.iter()).any(|v| !v.is_finite()) {
            return Err(Error::input("non-finite RLS measurement"));
        }
        let active: Vec<usize> = (0..2).filter(|&i| slips[i].abs() >= self.config.dead_band).collect();
        if active.is_empty() {
            return Ok(RlsOutcome::Skipped);
        }
        let k = active.len();
        let lambda = self.config.forgetting;

        // phi is 2 x k: column j carries the slip of channel active[j]
        let mut phi = DMatrix::<T>::zeros(2, k);
        let mut z = DVector::<T>::zeros(k);
        let mut error = [T::zero(); 2];
        for (j, &ch) in active.iter().enumerate() {
            phi[(ch, j)] = slips[ch];
            z[j] = forces[ch];
            error[ch] = forces[ch] - slips[ch] * self.theta[ch];
        }

        let p = DMatrix::<T>::from_fn(2, 2, |r, c| self.covariance[(r, c)]);
        let p_phi = &p * &phi;
        let mut s = phi.transpose() * &p_phi;
        for j in 0..k {
            s[(j, j)] += lambda;
        }
        let s_inv = invert_small(&s)?;
        let gain = &p_phi * s_inv;
        let theta = DVector::<T>::from_fn(2, |r, _| self.theta[r]);
        let innovation = &z - phi.transpose() * &theta;
        let theta_new = &theta + &gain * innovation;
        let p_new = (&p - &gain * phi.transpose() * &p) * (T::one() / lambda);

        let mut cov = Matrix2::new(p_new[(0, 0)], p_new[(0, 1)], p_new[(1, 0)], p_new[(1, 1)]);
        // keep exact symmetry against round-off drift
        let off = (cov[(0, 1)] + cov[(1, 0)]) / T::of(2.0);
        cov[(0, 1)] = off;
        cov[(1, 0)] = off;

        let trace = cov[(0, 0)] + cov[(1, 1)];
        if !trace.is_finite() || trace > self.config.max_trace || !is_positive_definite(&cov) {
            self.reset();
            return Ok(RlsOutcome::Reset);
        }

        self.covariance = cov;
        self.theta = Vector2::new(
            self.config.bounds.clamp(theta_new[0]),
            self.config.bounds.clamp(theta_new[1]),
        );
        self.n_updates += 1;
        Ok(RlsOutcome::Updated { error })
    }
}

/// Cholesky test for a symmetric 2x2 matrix.
pub fn is_positive_definite<T: Real>(m: &Matrix2<T>) -> bool {
    let l00 = m[(0, 0)];
    if !(l00 > T::zero()) {
        return false;
    }
    let l10 = m[(1, 0)] / l00.sqrt();
    m[(1, 1)] - l10 * l10 > T::zero()
}

fn invert_small<T: Real>(s: &DMatrix<T>) -> Result<DMatrix<T>> {
    match s.nrows() {
        1 => {
            if s[(0, 0)] == T::zero() {
                return Err(Error::NotPositiveDefinite);
            }
            Ok(DMatrix::from_element(1, 1, T::one() / s[(0, 0)]))
        }
        2 => {
            let det = s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(1, 0)];
            if det == T::zero() || !det.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            Ok(DMatrix::from_row_slice(
                2,
                2,
                &[s[(1, 1)] / det, -s[(0, 1)] / det, -s[(1, 0)] / det, s[(0, 0)] / det],
            ))
        }
        n => Err(Error::Dimension(format!("innovation covariance of size {n}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_forgetting() -> RlsConfig<f64> {
        RlsConfig {
            forgetting: 1.0,
            ..RlsConfig::default()
        }
    }

    #[test]
    fn zero_slip_skips() {
        let mut est = RlsEstimator::new(RlsConfig::<f64>::default()).unwrap();
        let before = est.estimate();
        assert_eq!(est.update([100.0, 200.0], [0.0, 0.0]).unwrap(), RlsOutcome::Skipped);
        assert_eq!(est.update([100.0, 200.0], [5e-4, -5e-4]).unwrap(), RlsOutcome::Skipped);
        assert_eq!(est.estimate(), before);
        assert_eq!(est.n_updates(), 0);
    }

    #[test]
    fn non_finite_rejected() {
        let mut est = RlsEstimator::new(RlsConfig::<f64>::default()).unwrap();
        assert!(est.update([f64::NAN, 0.0], [0.01, 0.01]).is_err());
        assert!(est.update([0.0, 0.0], [0.01, f64::INFINITY]).is_err());
    }

    #[test]
    fn bad_config_rejected() {
        assert!(RlsEstimator::new(RlsConfig::<f64> { forgetting: 0.0, ..RlsConfig::default() }).is_err());
        assert!(RlsEstimator::new(RlsConfig::<f64> { forgetting: 1.1, ..RlsConfig::default() }).is_err());
    }

    #[test]
    fn exact_data_converges() {
        let mut est = RlsEstimator::new(unit_forgetting()).unwrap();
        for k in 0..50 {
            let af = 0.02 * (0.7 * k as f64).sin() + 0.01;
            let ar = 0.015 * (0.3 * k as f64).cos();
            est.update([80_000.0 * af, 75_000.0 * ar], [af, ar]).unwrap();
            assert!(is_positive_definite(est.covariance()));
        }
        let [cf, cr] = est.estimate();
        assert!((cf - 80_000.0).abs() / 80_000.0 < 1e-3);
        assert!((cr - 75_000.0).abs() / 75_000.0 < 1e-3);
    }

    #[test]
    fn single_channel_update_leaves_other_estimate() {
        let mut est = RlsEstimator::new(RlsConfig::<f64>::default()).unwrap();
        let out = est.update([1_000.0, 3.0], [0.02, 1e-5]).unwrap();
        let RlsOutcome::Updated { error } = out else { panic!("expected update") };
        assert_eq!(error[1], 0.0);
        assert!((error[0] - (1_000.0 - 0.02 * 80_000.0)).abs() < 1e-9);
        assert_eq!(est.estimate()[1], 80_000.0);
        let gain = 0.02 * 1e6 / (0.995 + 0.02 * 0.02 * 1e6);
        assert!((est.estimate()[0] - (80_000.0 + gain * (1_000.0 - 1_600.0))).abs() < 1e-6);
    }

    #[test]
    fn estimates_respect_bounds() {
        let mut est = RlsEstimator::new(RlsConfig::<f64>::default()).unwrap();
        est.update([1e5, -1e5], [0.01, 0.01]).unwrap();
        let [cf, cr] = est.estimate();
        assert_eq!(cf, 200_000.0);
        assert_eq!(cr, 10_000.0);
    }

    #[test]
    fn covariance_blowup_resets() {
        let cfg = RlsConfig::<f64> {
            forgetting: 0.5,
            max_trace: 1e7,
            ..RlsConfig::default()
        };
        let mut est = RlsEstimator::new(cfg).unwrap();
        // only the front channel is excited: the rear variance inflates by 1/lambda
        let mut saw_reset = false;
        for _ in 0..10 {
            if est.update([800.0, 0.0], [0.01, 0.0]).unwrap() == RlsOutcome::Reset {
                saw_reset = true;
                break;
            }
        }
        assert!(saw_reset);
        assert_eq!(est.n_updates(), 0);
        assert_eq!(est.estimate(), [80_000.0, 80_000.0]);
    }
}

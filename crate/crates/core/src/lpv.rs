//! Affine LPV bicycle model used for MPC prediction.
//!
//! State ordering is `[lateral velocity, heading, yaw rate, lateral position]`
//! and the outputs are `[lateral position, heading]`. Matrices are rebuilt
//! from the scheduling vector every control cycle and discretized with a
//! forward-Euler step.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::VehicleParams;
use crate::scalar::{wrap_angle, Real};

pub type StateMatrix<T> = SMatrix<T, 4, 4>;
pub type InputMatrix<T> = SMatrix<T, 4, 1>;
pub type OutputMatrix<T> = SMatrix<T, 2, 4>;

pub const SPEED_FLOOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LateralState<T> {
    pub y_dot: T,
    pub psi: T,
    pub psi_dot: T,
    pub y: T,
}

impl<T: Real> LateralState<T> {
    pub fn new(y_dot: T, psi: T, psi_dot: T, y: T) -> Self {
        Self {
            y_dot,
            psi: wrap_angle(psi),
            psi_dot,
            y,
        }
    }

    pub fn to_vector(&self) -> SVector<T, 4> {
        SVector::<T, 4>::new(self.y_dot, self.psi, self.psi_dot, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.y_dot.is_finite() && self.psi.is_finite() && self.psi_dot.is_finite() && self.y.is_finite()
    }
}

/// Admissible cornering stiffness range [N/rad].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StiffnessBounds<T> {
    pub min: T,
    pub max: T,
}

impl<T: Real> Default for StiffnessBounds<T> {
    fn default() -> Self {
        Self {
            min: T::of(10_000.0),
            max: T::of(200_000.0),
        }
    }
}

impl<T: Real> StiffnessBounds<T> {
    pub fn clamp(&self, c: T) -> T {
        c.max(self.min).min(self.max)
    }
}

/// `rho = [v_x, c_f / v_x, c_r / v_x, c_f]`.
///
/// Fields are public so arbitrary points of the parameter space can be built
/// directly; [`SchedulingVector::new`] enforces the physical invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulingVector<T> {
    pub v_x: T,
    pub cf_over_vx: T,
    pub cr_over_vx: T,
    pub c_f: T,
}

impl<T: Real> SchedulingVector<T> {
    pub fn new(v_x: T, c_f: T, c_r: T, bounds: &StiffnessBounds<T>) -> Result<Self> {
        if !(v_x >= T::of(SPEED_FLOOR)) || !v_x.is_finite() {
            return Err(Error::Scheduling(format!("v_x = {v_x} is below the {SPEED_FLOOR} m/s floor")));
        }
        for (name, c) in [("c_f", c_f), ("c_r", c_r)] {
            if !(c >= bounds.min && c <= bounds.max) {
                return Err(Error::Scheduling(format!(
                    "{name} = {c} outside [{}, {}]",
                    bounds.min, bounds.max
                )));
            }
        }
        Ok(Self {
            v_x,
            cf_over_vx: c_f / v_x,
            cr_over_vx: c_r / v_x,
            c_f,
        })
    }

    pub fn c_r(&self) -> T {
        self.cr_over_vx * self.v_x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousModel<T: Real> {
    pub a: StateMatrix<T>,
    pub b: InputMatrix<T>,
    pub c: OutputMatrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LtiInstance<T: Real> {
    pub a_c: StateMatrix<T>,
    pub b_c: InputMatrix<T>,
    pub a_d: StateMatrix<T>,
    pub b_d: InputMatrix<T>,
    pub c: OutputMatrix<T>,
    pub ts: T,
    /// Scheduling point this instance was built for.
    pub rho: SchedulingVector<T>,
}

/// Selects `[y, psi]` from the state.
pub fn output_matrix<T: Real>() -> OutputMatrix<T> {
    let mut c = OutputMatrix::<T>::zeros();
    c[(0, 3)] = T::one();
    c[(1, 1)] = T::one();
    c
}

/// Continuous-time matrices at scheduling point `rho`.
///
/// Every entry is affine in the components of `rho`; the factor two accounts
/// for both tires of an axle.
pub fn build_continuous<T: Real>(rho: &SchedulingVector<T>, params: &VehicleParams<T>) -> Result<ContinuousModel<T>> {
    if !(rho.v_x >= T::of(SPEED_FLOOR)) {
        return Err(Error::Scheduling(format!("v_x = {} is below the {SPEED_FLOOR} m/s floor", rho.v_x)));
    }
    let two = T::of(2.0);
    let m = params.mass;
    let iz = params.yaw_inertia;
    let a = params.front_axle_to_cg;
    let b = params.rear_axle_to_cg;
    let (vx, cf_v, cr_v, cf) = (rho.v_x, rho.cf_over_vx, rho.cr_over_vx, rho.c_f);

    let mut am = StateMatrix::<T>::zeros();
    am[(0, 0)] = -two * (cf_v + cr_v) / m;
    am[(0, 2)] = -vx - two * (a * cf_v - b * cr_v) / m;
    am[(1, 2)] = T::one();
    am[(2, 0)] = -two * (a * cf_v - b * cr_v) / iz;
    am[(2, 2)] = -two * (a * a * cf_v + b * b * cr_v) / iz;
    am[(3, 0)] = T::one();
    am[(3, 1)] = vx;

    let mut bm = InputMatrix::<T>::zeros();
    bm[(0, 0)] = two * cf / m;
    bm[(2, 0)] = two * cf * a / iz;

    Ok(ContinuousModel {
        a: am,
        b: bm,
        c: output_matrix(),
    })
}

/// Forward-Euler discretization: `A_d = I + Ts A`, `B_d = Ts B`.
pub fn discretize<T: Real>(model: &ContinuousModel<T>, rho: SchedulingVector<T>, ts: T) -> Result<LtiInstance<T>> {
    if !(ts > T::zero()) {
        return Err(Error::input(format!("sampling period must be positive, got {ts}")));
    }
    Ok(LtiInstance {
        a_c: model.a,
        b_c: model.b,
        a_d: StateMatrix::<T>::identity() + model.a * ts,
        b_d: model.b * ts,
        c: model.c,
        ts,
        rho,
    })
}

/// Builds and discretizes in one go.
pub fn adapt<T: Real>(rho: SchedulingVector<T>, params: &VehicleParams<T>, ts: T) -> Result<LtiInstance<T>> {
    discretize(&build_continuous(&rho, params)?, rho, ts)
}

//! Lateral stability envelope: curvature speed limit for the speed planner and
//! the side-slip based bound on front steering.

use crate::error::{Error, Result};
use crate::plant::{VehicleParams, GRAVITY};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadPoint<T> {
    /// Station along the path [m].
    pub station: T,
    /// Signed curvature [1/m].
    pub curvature: T,
    /// Camber angle [rad].
    pub camber: T,
    /// Adhesion coefficient.
    pub mu: T,
}

/// Curvatures below this magnitude are treated as straight road.
const STRAIGHT_CURVATURE: f64 = 1e-9;

/// Highest speed a bend admits; `+inf` on straight road.
pub fn v_max<T: Real>(point: &RoadPoint<T>) -> Result<T> {
    if !(point.mu > T::zero()) {
        return Err(Error::Domain(format!("adhesion must be positive, got {}", point.mu)));
    }
    let denom = T::one() - point.camber * point.mu;
    if !(denom > T::zero()) {
        return Err(Error::Domain(format!(
            "1 - camber * mu = {denom} is not positive"
        )));
    }
    let num = point.camber + point.mu;
    if !(num > T::zero()) {
        return Err(Error::Domain(format!("camber + mu = {num} is not positive")));
    }
    let rho = point.curvature.abs();
    if rho <= T::of(STRAIGHT_CURVATURE) {
        return Ok(T::infinity());
    }
    Ok((T::of(GRAVITY) / rho * num / denom).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeConfig<T> {
    /// Lower bound on the side-slip angle bound [deg].
    pub min_slip_deg: T,
    /// Actuator amplitude limit [rad].
    pub u_max: T,
    /// Deceleration used by the planner's backward pass [m/s^2].
    pub max_decel: T,
}

impl<T: Real> Default for EnvelopeConfig<T> {
    fn default() -> Self {
        Self {
            min_slip_deg: T::of(1.5),
            u_max: T::PI() / T::of(6.0),
            max_decel: T::of(3.0),
        }
    }
}

/// Side-slip bound `10 - 7 v^2 / 40` in degrees, `v` in m/s.
pub fn slip_bound_deg<T: Real>(v_x: T) -> T {
    T::of(10.0) - T::of(7.0) * v_x * v_x / T::of(40.0)
}

fn steer_from_slip<T: Real>(slip_deg: T, params: &VehicleParams<T>) -> T {
    let slip = slip_deg.to_radians();
    (params.wheelbase() * slip.tan() / params.front_axle_to_cg).atan()
}

/// Steering bound straight from the slip criterion, zero once the slip bound
/// is no longer positive. No actuator clamp.
pub fn raw_steer_limit<T: Real>(v_x: T, params: &VehicleParams<T>) -> T {
    let slip = slip_bound_deg(v_x);
    if slip <= T::zero() {
        return T::zero();
    }
    steer_from_slip(slip, params)
}

/// Maximum steering magnitude at speed `v_x`: the slip bound floored at
/// `cfg.min_slip_deg`, mapped to steering and clamped to `cfg.u_max`.
pub fn steer_limit<T: Real>(v_x: T, params: &VehicleParams<T>, cfg: &EnvelopeConfig<T>) -> T {
    let slip = slip_bound_deg(v_x.max(T::zero())).max(cfg.min_slip_deg);
    steer_from_slip(slip, params).max(T::zero()).min(cfg.u_max)
}

/// Clamps a requested speed profile to the curvature limit, then sweeps
/// backward so the car can brake at `cfg.max_decel` ahead of each bend.
pub fn plan_speed<T: Real>(requested: &[T], road: &[RoadPoint<T>], cfg: &EnvelopeConfig<T>) -> Result<Vec<T>> {
    if requested.len() != road.len() {
        return Err(Error::Dimension(format!(
            "{} speeds for {} road points",
            requested.len(),
            road.len()
        )));
    }
    let mut out = Vec::with_capacity(requested.len());
    for (v, p) in requested.iter().zip(road) {
        out.push(v.min(v_max(p)?));
    }
    let two_a = T::of(2.0) * cfg.max_decel;
    for i in (0..out.len().saturating_sub(1)).rev() {
        let ds = (road[i + 1].station - road[i].station).abs();
        let reachable = (out[i + 1] * out[i + 1] + two_a * ds).sqrt();
        if out[i] > reachable {
            out[i] = reachable;
        }
    }
    Ok(out)
}

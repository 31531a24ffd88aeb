//! Reference paths written as graphs `y(x)` over the global x axis, plus an
//! arc-length table for station lookups.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceSpec {
    Straight,
    /// Lane change to `offset` and back, each transition a quintic blend
    /// over `transition` metres, separated by `hold` metres in the other lane.
    DoubleLaneChange {
        #[serde(default = "default_offset")]
        offset: f64,
        #[serde(default = "default_start")]
        start: f64,
        #[serde(default = "default_transition")]
        transition: f64,
        #[serde(default = "default_hold")]
        hold: f64,
    },
    /// Natural cubic spline through `[x, y]` points, x strictly increasing.
    Waypoints { points: Vec<[f64; 2]> },
}

fn default_offset() -> f64 {
    3.5
}
fn default_start() -> f64 {
    60.0
}
fn default_transition() -> f64 {
    50.0
}
fn default_hold() -> f64 {
    40.0
}

#[derive(Debug, Clone)]
enum Shape {
    Flat,
    Blended { knots: Vec<(f64, f64)> },
    Spline { x: Vec<f64>, y: Vec<f64>, m: Vec<f64> },
}

/// Spacing of the arc-length table [m].
const TABLE_STEP: f64 = 0.25;

#[derive(Debug, Clone)]
pub struct ReferencePath {
    shape: Shape,
    xs: Vec<f64>,
    stations: Vec<f64>,
}

impl ReferencePath {
    /// Builds the path and tabulates arc length over `[-50, extent + 200]`.
    pub fn new(spec: &ReferenceSpec, extent: f64) -> Result<Self> {
        let shape = match spec {
            ReferenceSpec::Straight => Shape::Flat,
            ReferenceSpec::DoubleLaneChange {
                offset,
                start,
                transition,
                hold,
            } => {
                if !(*transition > 0.0 && *hold >= 0.0 && offset.is_finite() && start.is_finite()) {
                    return Err(Error::Scenario(
                        "lane change needs a positive transition and non-negative hold".into(),
                    ));
                }
                let t1 = start + transition;
                let t2 = t1 + hold;
                let mut knots = vec![(*start, 0.0), (t1, *offset)];
                if *hold > 0.0 {
                    knots.push((t2, *offset));
                }
                knots.push((t2 + transition, 0.0));
                Shape::Blended { knots }
            }
            ReferenceSpec::Waypoints { points } => spline(points)?,
        };
        if !(extent > 0.0) {
            return Err(Error::Scenario(format!("path extent must be positive, got {extent}")));
        }
        let mut path = Self {
            shape,
            xs: Vec::new(),
            stations: Vec::new(),
        };
        let (lo, hi) = (-50.0, extent + 200.0);
        let n = ((hi - lo) / TABLE_STEP).ceil() as usize;
        let mut s = 0.0;
        let mut prev = lo;
        for i in 0..=n {
            let x = lo + i as f64 * TABLE_STEP;
            if i > 0 {
                // Simpson on the segment
                let mid = 0.5 * (prev + x);
                let ds = |x: f64| (1.0 + path.slope(x).powi(2)).sqrt();
                s += (x - prev) / 6.0 * (ds(prev) + 4.0 * ds(mid) + ds(x));
            }
            path.xs.push(x);
            path.stations.push(s);
            prev = x;
        }
        // stations measured from x = 0
        let s0 = path.station(0.0);
        for s in &mut path.stations {
            *s -= s0;
        }
        Ok(path)
    }

    pub fn y(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Flat => 0.0,
            Shape::Blended { knots } => blended(knots, x).0,
            Shape::Spline { x: kx, y, m } => spline_eval(kx, y, m, x).0,
        }
    }

    pub fn slope(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Flat => 0.0,
            Shape::Blended { knots } => blended(knots, x).1,
            Shape::Spline { x: kx, y, m } => spline_eval(kx, y, m, x).1,
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Flat => 0.0,
            Shape::Blended { knots } => blended(knots, x).2,
            Shape::Spline { x: kx, y, m } => spline_eval(kx, y, m, x).2,
        }
    }

    /// Tangent direction [rad].
    pub fn heading(&self, x: f64) -> f64 {
        self.slope(x).atan()
    }

    /// Signed curvature [1/m].
    pub fn curvature(&self, x: f64) -> f64 {
        self.second_derivative(x) / (1.0 + self.slope(x).powi(2)).powf(1.5)
    }

    /// Arc length from `x = 0`.
    pub fn station(&self, x: f64) -> f64 {
        interpolate(&self.xs, &self.stations, x)
    }

    pub fn x_at_station(&self, s: f64) -> f64 {
        interpolate(&self.stations, &self.xs, s)
    }
}

fn smoothstep(s: f64) -> (f64, f64, f64) {
    let s = s.clamp(0.0, 1.0);
    let s2 = s * s;
    let s3 = s2 * s;
    (
        s3 * (10.0 - 15.0 * s + 6.0 * s2),
        30.0 * s2 * (1.0 - 2.0 * s + s2),
        60.0 * s - 180.0 * s2 + 120.0 * s3,
    )
}

/// Value, slope and second derivative of the blended knot sequence.
fn blended(knots: &[(f64, f64)], x: f64) -> (f64, f64, f64) {
    if x <= knots[0].0 {
        return (knots[0].1, 0.0, 0.0);
    }
    for w in knots.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x <= x1 {
            let h = x1 - x0;
            let d = y1 - y0;
            let (v, dv, ddv) = smoothstep((x - x0) / h);
            return (y0 + d * v, d * dv / h, d * ddv / (h * h));
        }
    }
    (knots[knots.len() - 1].1, 0.0, 0.0)
}

fn spline(points: &[[f64; 2]]) -> Result<Shape> {
    if points.len() < 2 {
        return Err(Error::Scenario("waypoint path needs at least two points".into()));
    }
    if points.windows(2).any(|w| !(w[1][0] > w[0][0])) {
        return Err(Error::Scenario("waypoint x coordinates must strictly increase".into()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Scenario("non-finite waypoint".into()));
    }
    let x: Vec<f64> = points.iter().map(|p| p[0]).collect();
    let y: Vec<f64> = points.iter().map(|p| p[1]).collect();
    let n = x.len();
    // natural spline: second derivatives m with m_0 = m_{n-1} = 0, Thomas algorithm
    let mut m = vec![0.0; n];
    if n > 2 {
        let k = n - 2;
        let mut diag = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        let mut upper = vec![0.0; k];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            diag[i - 1] = 2.0 * (h0 + h1);
            upper[i - 1] = h1;
            rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        }
        for i in 1..k {
            let lower = x[i + 1] - x[i];
            let w = lower / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        m[k] = rhs[k - 1] / diag[k - 1];
        for i in (0..k - 1).rev() {
            m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
        }
    }
    Ok(Shape::Spline { x, y, m })
}

fn spline_eval(x: &[f64], y: &[f64], m: &[f64], at: f64) -> (f64, f64, f64) {
    let n = x.len();
    let seg = |i: usize, t: f64| -> (f64, f64, f64) {
        let h = x[i + 1] - x[i];
        let a = (x[i + 1] - t) / h;
        let b = (t - x[i]) / h;
        let v = a * y[i] + b * y[i + 1] + ((a.powi(3) - a) * m[i] + (b.powi(3) - b) * m[i + 1]) * h * h / 6.0;
        let dv = (y[i + 1] - y[i]) / h - (3.0 * a * a - 1.0) * h / 6.0 * m[i] + (3.0 * b * b - 1.0) * h / 6.0 * m[i + 1];
        let ddv = a * m[i] + b * m[i + 1];
        (v, dv, ddv)
    };
    // straight continuation past the ends
    if at <= x[0] {
        let (v, dv, _) = seg(0, x[0]);
        return (v + dv * (at - x[0]), dv, 0.0);
    }
    if at >= x[n - 1] {
        let (v, dv, _) = seg(n - 2, x[n - 1]);
        return (v + dv * (at - x[n - 1]), dv, 0.0);
    }
    let i = x.partition_point(|&k| k <= at).saturating_sub(1).min(n - 2);
    seg(i, at)
}

/// Piecewise-linear lookup in a strictly increasing table, extrapolated from
/// the end segments.
fn interpolate(keys: &[f64], values: &[f64], at: f64) -> f64 {
    let n = keys.len();
    let i = keys.partition_point(|&k| k <= at).clamp(1, n - 1) - 1;
    let (k0, k1) = (keys[i], keys[i + 1]);
    values[i] + (values[i + 1] - values[i]) * (at - k0) / (k1 - k0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dlc() -> ReferencePath {
        ReferencePath::new(
            &ReferenceSpec::DoubleLaneChange {
                offset: 3.5,
                start: 60.0,
                transition: 50.0,
                hold: 40.0,
            },
            400.0,
        )
        .unwrap()
    }

    #[test]
    fn lane_change_shape() {
        let p = dlc();
        assert_eq!(p.y(0.0), 0.0);
        assert_eq!(p.y(400.0), 0.0);
        assert_eq!(p.y(130.0), 3.5);
        let peak = (0..4000).map(|i| p.y(i as f64 * 0.1)).fold(f64::MIN, f64::max);
        assert_eq!(peak, 3.5);
        assert!((p.y(85.0) - 1.75).abs() < 1e-12);
    }

    #[test]
    fn heading_matches_finite_difference() {
        let p = dlc();
        for i in 0..300 {
            let x = 50.0 + i as f64 * 0.7;
            let h = 1e-5;
            let fd = (p.y(x + h) - p.y(x - h)) / (2.0 * h);
            assert!((p.heading(x) - fd.atan()).abs() < 1e-8);
            let fd2 = (p.slope(x + h) - p.slope(x - h)) / (2.0 * h);
            assert!((p.second_derivative(x) - fd2).abs() < 1e-6);
        }
    }

    #[test]
    fn straight_stations_are_x() {
        let p = ReferencePath::new(&ReferenceSpec::Straight, 100.0).unwrap();
        assert!((p.station(37.5) - 37.5).abs() < 1e-9);
        assert!((p.x_at_station(12.25) - 12.25).abs() < 1e-9);
        assert!((p.x_at_station(1000.0) - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn station_round_trip() {
        let p = dlc();
        for i in 0..100 {
            let x = i as f64 * 4.0;
            assert!((p.x_at_station(p.station(x)) - x).abs() < 1e-9);
        }
        assert!(p.station(400.0) > 400.0);
    }

    #[test]
    fn spline_interpolates_and_is_smooth() {
        let pts = vec![[0.0, 0.0], [80.0, 0.0], [160.0, 12.0], [240.0, 6.0], [320.0, 0.0]];
        let p = ReferencePath::new(&ReferenceSpec::Waypoints { points: pts.clone() }, 320.0).unwrap();
        for q in &pts {
            assert!((p.y(q[0]) - q[1]).abs() < 1e-9);
        }
        for q in &pts[1..pts.len() - 1] {
            let e = 1e-7;
            assert!((p.slope(q[0] - e) - p.slope(q[0] + e)).abs() < 1e-6);
            assert!((p.second_derivative(q[0] - e) - p.second_derivative(q[0] + e)).abs() < 1e-6);
        }
        assert!(p.second_derivative(0.0).abs() < 1e-12);
    }

    #[test]
    fn bad_waypoints() {
        let r = ReferencePath::new(&ReferenceSpec::Waypoints { points: vec![[0.0, 0.0], [0.0, 1.0]] }, 10.0);
        assert!(matches!(r, Err(Error::Scenario(_))));
    }
}

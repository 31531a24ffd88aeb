use vehctl::pid::{PidConfig, PidController, ThrottleBrakeSwitch};
use vehctl::plant::{DriveInput, Environment, Plant, PlantState, VehicleParams};
use vehctl::harness::sim::PLANT_STEP;

fn plant() -> Plant<f64> {
    Plant::new(VehicleParams::default(), Environment::default()).unwrap()
}

fn integrate(p: &Plant<f64>, input: &DriveInput<f64>, dt: f64, duration: f64) -> PlantState<f64> {
    let mut s = PlantState::cruising(15.0, &p.params);
    let n = (duration / dt).round() as usize;
    for _ in 0..n {
        s = p.step(&s, input, dt).unwrap();
    }
    s
}

fn distance(a: &PlantState<f64>, b: &PlantState<f64>) -> f64 {
    [a.v_x - b.v_x, a.v_y - b.v_y, a.psi - b.psi, a.psi_dot - b.psi_dot, a.x - b.x, a.y - b.y]
        .iter()
        .fold(0.0, |m, d| m.max(d.abs()))
}

#[test]
fn rk4_error_shrinks_at_fourth_order() {
    let p = plant();
    let input = DriveInput { throttle: 0.3, brake: 0.0, steer: 0.04 };
    let duration = 0.4;
    let reference = integrate(&p, &input, 0.02 / 256.0, duration);
    let errors: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| distance(&integrate(&p, &input, dt, duration), &reference))
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio > 12.0 && ratio < 20.0, "errors {errors:?}");
    }
}

#[test]
fn neutral_steer_yaw_rate() {
    let p = plant();
    let params = &p.params;
    // the default car is close to neutral steer
    let balance = params.front_axle_to_cg * params.cf_true() - params.rear_axle_to_cg * params.cr_true();
    assert!(balance.abs() < 1e-3 * params.front_axle_to_cg * params.cf_true());

    let steer = 0.01;
    let mut pid = PidController::new(PidConfig::with_gains(vehctl::harness::scenario::DEFAULT_GAINS));
    let mut switch = ThrottleBrakeSwitch::default();
    let mut s = PlantState::cruising(15.0, params);
    for _ in 0..1500 {
        let (throttle, brake) = switch.apply(pid.control(15.0, s.v_x, 0.01));
        let input = DriveInput { throttle, brake, steer };
        for _ in 0..10 {
            s = p.step(&s, &input, PLANT_STEP).unwrap();
        }
    }
    let expected = s.v_x * steer / params.wheelbase();
    assert!((s.psi_dot - expected).abs() < 0.02 * expected, "{} vs {expected}", s.psi_dot);
}

#[test]
fn straight_run_stays_on_the_axis() {
    let p = plant();
    let s = integrate(&p, &DriveInput { throttle: 0.2, brake: 0.0, steer: 0.0 }, 0.001, 2.0);
    assert_eq!((s.y, s.psi, s.v_y, s.psi_dot), (0.0, 0.0, 0.0, 0.0));
    assert!(s.x > 25.0);
}

#[test]
fn brake_slows_the_car() {
    let p = plant();
    let s = integrate(&p, &DriveInput { throttle: 0.0, brake: 0.5, steer: 0.0 }, 0.001, 1.0);
    assert!(s.v_x < 14.0 && s.v_x >= 0.0);
}

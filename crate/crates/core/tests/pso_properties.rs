use proptest::prelude::*;
use vehctl::pso::{acceleration_schedule, inertia_weight, optimize, PsoConfig};

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn history_monotone_and_best_inside_box(seed in any::<u64>(), dim in 1usize..5, lo in -20.0f64..0.0, width in 0.5f64..30.0) {
        let cfg = PsoConfig::new(vec![(lo, lo + width); dim], seed);
        let res = optimize(rosenbrock, &cfg).unwrap();
        prop_assert_eq!(res.history.len(), cfg.generations + 1);
        prop_assert_eq!(res.evaluations, cfg.n_particles * (cfg.generations + 1));
        for w in res.history.windows(2) {
            prop_assert!(w[1].best_fitness <= w[0].best_fitness);
        }
        for (x, &(a, b)) in res.best_position.iter().zip(&cfg.bounds) {
            prop_assert!(*x >= a && *x <= b);
        }
        prop_assert_eq!(res.best_fitness, rosenbrock(&res.best_position));
    }

    #[test]
    fn parallel_equals_serial(seed in any::<u64>()) {
        let mut cfg = PsoConfig::new(vec![(-5.0, 5.0); 3], seed);
        let par = optimize(rosenbrock, &cfg).unwrap();
        cfg.parallel = false;
        let ser = optimize(rosenbrock, &cfg).unwrap();
        prop_assert_eq!(par.best_position, ser.best_position);
        prop_assert_eq!(par.history, ser.history);
    }

    #[test]
    fn coefficients_stay_clamped(g in 0usize..200, generations in 1usize..100, c1 in 0.0f64..5.0, c2 in 0.0f64..5.0) {
        let (a, b) = acceleration_schedule(g, generations, c1, c2, (0.5, 4.0));
        prop_assert!((0.5..=4.0).contains(&a) && (0.5..=4.0).contains(&b));
    }
}

#[test]
fn inertia_decreases_over_a_run() {
    let cfg = PsoConfig::<f64>::new(vec![(0.0, 1.0)], 0);
    let w: Vec<f64> = (0..=cfg.generations).map(|g| inertia_weight(g, &cfg)).collect();
    assert!(w.windows(2).all(|p| p[1] < p[0]));
    assert!(w.iter().all(|&x| x > cfg.omega_min));
}

#[test]
fn same_seed_same_result() {
    let cfg = PsoConfig::new(vec![(-5.0, 5.0); 2], 42);
    let a = optimize(rosenbrock, &cfg).unwrap();
    let b = optimize(rosenbrock, &cfg).unwrap();
    assert_eq!(a.best_position, b.best_position);
    let other = optimize(rosenbrock, &PsoConfig { seed: 43, ..cfg }).unwrap();
    assert_ne!(a.best_position, other.best_position);
}

#[test]
fn non_finite_fitness_is_never_best() {
    let cfg = PsoConfig::new(vec![(-1.0, 1.0)], 3);
    let res = optimize(|x: &[f64]| if x[0] > 0.0 { f64::NAN } else { -x[0] }, &cfg).unwrap();
    assert!(res.best_fitness.is_finite());
    assert!(res.best_position[0] <= 0.0);
}

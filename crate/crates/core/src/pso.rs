//! Particle swarm optimizer with an exponentially decaying inertia weight and
//! piecewise-scheduled cognitive/social accelerations, plus the PID tuning
//! loop built on it.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pid::{PidGains, SpeedTrackingTask};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct PsoConfig<T> {
    pub n_particles: usize,
    /// Number of generations `G`.
    pub generations: usize,
    pub omega_max: T,
    pub omega_min: T,
    pub lambda1: T,
    pub lambda2: T,
    pub c1_init: T,
    pub c2_init: T,
    /// Acceleration coefficients are kept inside this range.
    pub accel_clamp: (T, T),
    /// Per-dimension velocity bound as a fraction of the box width.
    pub velocity_fraction: T,
    pub bounds: Vec<(T, T)>,
    pub seed: u64,
    /// Evaluate the particles of a generation on the rayon pool.
    pub parallel: bool,
}

impl<T: Real> PsoConfig<T> {
    pub fn new(bounds: Vec<(T, T)>, seed: u64) -> Self {
        Self {
            n_particles: 30,
            generations: 25,
            omega_max: T::one(),
            omega_min: T::of(0.1),
            lambda1: T::of(3.0),
            lambda2: T::of(30.0),
            c1_init: T::of(2.2),
            c2_init: T::of(2.2),
            accel_clamp: (T::of(0.5), T::of(4.0)),
            velocity_fraction: T::of(0.5),
            bounds,
            seed,
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 || self.generations == 0 {
            return Err(Error::input("PSO needs at least one particle and one generation"));
        }
        if !(self.omega_max > self.omega_min && self.omega_min > T::zero()) {
            return Err(Error::input("PSO inertia bounds must satisfy omega_max > omega_min > 0"));
        }
        if !(self.lambda2 != T::zero()) {
            return Err(Error::input("lambda2 must be non-zero"));
        }
        if self.bounds.is_empty() || self.bounds.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::input("PSO bounds need lo < hi on every dimension"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }
}

/// Inertia weight at generation `g` of `cfg.generations`.
pub fn inertia_weight<T: Real>(g: usize, cfg: &PsoConfig<T>) -> T {
    let ratio = T::from_usize(g).unwrap() / T::from_usize(cfg.generations).unwrap();
    cfg.omega_min + (cfg.omega_max - cfg.lambda1 * (cfg.omega_max + cfg.omega_min) * ratio).exp() / cfg.lambda2
}

/// Increments `(alpha, beta)` applied to `(c1, c2)` at generation `g`.
///
/// Phases by `g / G`: up to 30 %, up to 60 %, below 85 %, and the rest.
pub fn acceleration_increments<T: Real>(g: usize, generations: usize) -> (T, T) {
    let r = g as f64 / generations as f64;
    let (alpha, beta) = if r <= 0.30 {
        (0.085, -0.0425)
    } else if r <= 0.60 {
        (0.045, -0.09)
    } else if r < 0.85 {
        (-0.025, 0.05)
    } else {
        (-0.0025, 0.0025)
    };
    (T::of(alpha), T::of(beta))
}

/// Next `(c1, c2)` after generation `g`, clamped into `clamp`.
pub fn acceleration_schedule<T: Real>(g: usize, generations: usize, c1: T, c2: T, clamp: (T, T)) -> (T, T) {
    let (alpha, beta) = acceleration_increments::<T>(g, generations);
    let fit = |c: T| c.max(clamp.0).min(clamp.1);
    (fit(c1 + alpha), fit(c2 + beta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle<T> {
    pub position: Vec<T>,
    pub velocity: Vec<T>,
    pub fitness: T,
    pub best_position: Vec<T>,
    pub best_fitness: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Swarm<T> {
    pub particles: Vec<Particle<T>>,
    pub best_position: Vec<T>,
    pub best_fitness: T,
    pub generation: usize,
}

impl<T: Real> Swarm<T> {
    /// Swarm with the given initial positions and zero velocities; fitness is
    /// filled in when the optimizer first evaluates it.
    pub fn from_positions(positions: Vec<Vec<T>>) -> Self {
        let particles = positions
            .into_iter()
            .map(|p| Particle {
                velocity: vec![T::zero(); p.len()],
                best_position: p.clone(),
                position: p,
                fitness: T::infinity(),
                best_fitness: T::infinity(),
            })
            .collect();
        Self {
            particles,
            best_position: Vec::new(),
            best_fitness: T::infinity(),
            generation: 0,
        }
    }

    fn uniform(cfg: &PsoConfig<T>, rng: &mut ChaCha8Rng) -> Self {
        let positions = (0..cfg.n_particles)
            .map(|_| {
                cfg.bounds
                    .iter()
                    .map(|&(lo, hi)| lo + (hi - lo) * T::of(rng.random::<f64>()))
                    .collect()
            })
            .collect();
        Self::from_positions(positions)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationRecord<T> {
    pub generation: usize,
    pub best_fitness: T,
    pub omega: T,
    pub c1: T,
    pub c2: T,
}

#[derive(Debug, Clone)]
pub struct PsoResult<T> {
    pub best_position: Vec<T>,
    pub best_fitness: T,
    /// One record per generation; entry 0 is the initial swarm.
    pub history: Vec<GenerationRecord<T>>,
    pub evaluations: usize,
}

impl<T: Real> PsoResult<T> {
    /// Writes `generation,best_fitness,omega,c1,c2` rows.
    pub fn write_history_csv(&self, path: &Path) -> Result<()> {
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        writeln!(file, "generation,best_fitness,omega,c1,c2").map_err(io_err)?;
        for r in &self.history {
            writeln!(
                file,
                "{},{},{},{},{}",
                r.generation,
                r.best_fitness.as_f64(),
                r.omega.as_f64(),
                r.c1.as_f64(),
                r.c2.as_f64()
            )
            .map_err(io_err)?;
        }
        file.flush().map_err(io_err)
    }
}

/// Minimizes `fitness` over the box `cfg.bounds` from a uniformly random
/// swarm.
pub fn optimize<T, F>(fitness: F, cfg: &PsoConfig<T>) -> Result<PsoResult<T>>
where
    T: Real,
    F: Fn(&[T]) -> T + Sync,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let swarm = Swarm::uniform(cfg, &mut rng);
    run_swarm(fitness, cfg, swarm, rng)
}

/// Same as [`optimize`] but starting from a caller-supplied swarm.
pub fn optimize_from<T, F>(fitness: F, cfg: &PsoConfig<T>, swarm: Swarm<T>) -> Result<PsoResult<T>>
where
    T: Real,
    F: Fn(&[T]) -> T + Sync,
{
    cfg.validate()?;
    if swarm.particles.is_empty() || swarm.particles.iter().any(|p| p.position.len() != cfg.dim()) {
        return Err(Error::Dimension(format!("swarm particles must have dimension {}", cfg.dim())));
    }
    run_swarm(fitness, cfg, swarm, ChaCha8Rng::seed_from_u64(cfg.seed))
}

fn evaluate_all<T, F>(fitness: &F, positions: &[Vec<T>], parallel: bool) -> Vec<T>
where
    T: Real,
    F: Fn(&[T]) -> T + Sync,
{
    let score = |x: &Vec<T>| {
        let f = fitness(x);
        if f.is_finite() {
            f
        } else {
            T::infinity()
        }
    };
    if parallel {
        positions.par_iter().map(score).collect()
    } else {
        positions.iter().map(score).collect()
    }
}

fn run_swarm<T, F>(fitness: F, cfg: &PsoConfig<T>, mut swarm: Swarm<T>, mut rng: ChaCha8Rng) -> Result<PsoResult<T>>
where
    T: Real,
    F: Fn(&[T]) -> T + Sync,
{
    let dim = cfg.dim();
    let vmax: Vec<T> = cfg.bounds.iter().map(|&(lo, hi)| cfg.velocity_fraction * (hi - lo)).collect();
    let mut evaluations = 0;

    for p in &mut swarm.particles {
        clamp_into(&mut p.position, &mut p.velocity, &cfg.bounds);
    }
    let positions: Vec<Vec<T>> = swarm.particles.iter().map(|p| p.position.clone()).collect();
    let scores = evaluate_all(&fitness, &positions, cfg.parallel);
    evaluations += scores.len();
    for (p, f) in swarm.particles.iter_mut().zip(scores) {
        p.fitness = f;
        p.best_fitness = f;
        p.best_position = p.position.clone();
    }
    update_global(&mut swarm);

    let (mut c1, mut c2) = (cfg.c1_init, cfg.c2_init);
    let mut history = vec![GenerationRecord {
        generation: 0,
        best_fitness: swarm.best_fitness,
        omega: inertia_weight(0, cfg),
        c1,
        c2,
    }];

    for g in 1..=cfg.generations {
        let omega = inertia_weight(g, cfg);
        // draw every random number before dispatching evaluations so the
        // result does not depend on evaluation order
        let draws: Vec<Vec<(T, T)>> = (0..swarm.particles.len())
            .map(|_| (0..dim).map(|_| (T::of(rng.random::<f64>()), T::of(rng.random::<f64>()))).collect())
            .collect();
        let global = swarm.best_position.clone();
        for (p, r) in swarm.particles.iter_mut().zip(&draws) {
            for d in 0..dim {
                let (r1, r2) = r[d];
                let v = omega * p.velocity[d]
                    + c1 * r1 * (p.best_position[d] - p.position[d])
                    + c2 * r2 * (global[d] - p.position[d]);
                p.velocity[d] = v.max(-vmax[d]).min(vmax[d]);
                p.position[d] += p.velocity[d];
            }
            clamp_into(&mut p.position, &mut p.velocity, &cfg.bounds);
        }

        let positions: Vec<Vec<T>> = swarm.particles.iter().map(|p| p.position.clone()).collect();
        let scores = evaluate_all(&fitness, &positions, cfg.parallel);
        evaluations += scores.len();
        for (p, f) in swarm.particles.iter_mut().zip(scores) {
            p.fitness = f;
            if f < p.best_fitness {
                p.best_fitness = f;
                p.best_position = p.position.clone();
            }
        }
        update_global(&mut swarm);
        swarm.generation = g;

        history.push(GenerationRecord {
            generation: g,
            best_fitness: swarm.best_fitness,
            omega,
            c1,
            c2,
        });
        (c1, c2) = acceleration_schedule(g, cfg.generations, c1, c2, cfg.accel_clamp);
    }

    Ok(PsoResult {
        best_position: swarm.best_position,
        best_fitness: swarm.best_fitness,
        history,
        evaluations,
    })
}

fn update_global<T: Real>(swarm: &mut Swarm<T>) {
    for p in &swarm.particles {
        if swarm.best_position.is_empty() || p.best_fitness < swarm.best_fitness {
            swarm.best_fitness = p.best_fitness;
            swarm.best_position = p.best_position.clone();
        }
    }
}

/// Projects onto the box and zeroes the velocity components that hit a wall.
fn clamp_into<T: Real>(position: &mut [T], velocity: &mut [T], bounds: &[(T, T)]) {
    for ((x, v), &(lo, hi)) in position.iter_mut().zip(velocity.iter_mut()).zip(bounds) {
        if *x < lo {
            *x = lo;
            *v = T::zero();
        } else if *x > hi {
            *x = hi;
            *v = T::zero();
        }
    }
}

/// Default PID gain box: `K_p` in [0, 20], `K_i` and `K_d` in [0, 2].
pub fn default_gain_bounds<T: Real>() -> Vec<(T, T)> {
    vec![(T::zero(), T::of(20.0)), (T::zero(), T::of(2.0)), (T::zero(), T::of(2.0))]
}

#[derive(Debug, Clone)]
pub struct PidTuning<T> {
    pub gains: PidGains<T>,
    pub mse: T,
    pub result: PsoResult<T>,
}

/// Tunes `{K_p, K_i, K_d}` by minimizing the closed-loop speed MSE of `task`.
pub fn tune_pid<T: Real>(task: &SpeedTrackingTask<T>, cfg: &PsoConfig<T>) -> Result<PidTuning<T>> {
    if cfg.dim() != 3 {
        return Err(Error::Dimension(format!("PID tuning needs 3 bounds, got {}", cfg.dim())));
    }
    let result = optimize(|x: &[T]| task.mse(PidGains::new(x[0], x[1], x[2])), cfg)?;
    let b = &result.best_position;
    Ok(PidTuning {
        gains: PidGains::new(b[0], b[1], b[2]),
        mse: result.best_fitness,
        result,
    })
}

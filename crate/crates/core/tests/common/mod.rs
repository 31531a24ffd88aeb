//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vehctl::mpc::DiscreteModel;
use vehctl::qp::QpProblem;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Random strictly convex QP with `n` variables and `m` constraints. Every
/// third problem is built feasible around a random point; the rest may or
/// may not be feasible.
pub fn random_qp(rng: &mut ChaCha8Rng, n: usize, m: usize, always_feasible: bool) -> QpProblem<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| uniform(rng, -1.0, 1.0));
    let h = g.transpose() * &g + DMatrix::identity(n, n) * 0.1;
    let f = DVector::from_fn(n, |_, _| uniform(rng, -3.0, 3.0));
    let a = DMatrix::from_fn(m, n, |_, _| uniform(rng, -1.0, 1.0));
    let b = if always_feasible {
        let z = DVector::from_fn(n, |_, _| uniform(rng, -1.0, 1.0));
        &a * z + DVector::from_fn(m, |_, _| uniform(rng, 0.0, 0.5))
    } else {
        DVector::from_fn(m, |_, _| uniform(rng, -1.0, 1.0))
    };
    QpProblem::new(h, f, a, b).unwrap()
}

/// Minimizer by exhaustive search over active sets: solve the equality
/// constrained KKT system for every subset of at most `n` constraints and
/// keep the best primal-feasible point. `None` when nothing is feasible.
pub fn enumerate_qp(p: &QpProblem<f64>) -> Option<DVector<f64>> {
    let n = p.n_vars();
    let m = p.n_constraints();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << m) {
        let rows: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        if rows.len() > n {
            continue;
        }
        let k = rows.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&p.h);
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&(-&p.f));
        for (j, &r) in rows.iter().enumerate() {
            for c in 0..n {
                kkt[(n + j, c)] = p.a[(r, c)];
                kkt[(c, n + j)] = p.a[(r, c)];
            }
            rhs[n + j] = p.b[r];
        }
        let lu = kkt.lu();
        if lu.determinant().abs() < 1e-12 {
            continue;
        }
        let Some(sol) = lu.solve(&rhs) else { continue };
        let z = sol.rows(0, n).into_owned();
        if p.max_violation(&z) > 1e-9 {
            continue;
        }
        let obj = p.objective(&z);
        if best.as_ref().is_none_or(|(o, _)| obj < *o) {
            best = Some((obj, z));
        }
    }
    best.map(|(_, z)| z)
}

/// Random single-input model with spectral radius below one.
pub fn random_stable_model(rng: &mut ChaCha8Rng, nx: usize, ny: usize) -> DiscreteModel<f64> {
    let mut a = DMatrix::from_fn(nx, nx, |_, _| uniform(rng, -1.0, 1.0));
    // scale by an upper bound on the spectral radius
    let bound = a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    a /= bound / 0.95;
    let b = DVector::from_fn(nx, |_, _| uniform(rng, -1.0, 1.0));
    let c = DMatrix::from_fn(ny, nx, |_, _| uniform(rng, -1.0, 1.0));
    DiscreteModel::new(a, b, c).unwrap()
}

/// Outputs `[y_1; ..; y_Np]` of the incremental model simulated step by step:
/// `u_k = u_{k-1} + du_k`, `x_{k+1} = A x_k + B u_k`, `y = C x`.
pub fn simulate_incremental(model: &DiscreteModel<f64>, x0: &DVector<f64>, u_prev: f64, du: &[f64], n_p: usize) -> DVector<f64> {
    let ny = model.n_y();
    let mut x = x0.clone();
    let mut u = u_prev;
    let mut out = DVector::zeros(ny * n_p);
    for k in 0..n_p {
        u += du.get(k).copied().unwrap_or(0.0);
        x = &model.a * &x + &model.b * u;
        out.rows_mut(k * ny, ny).copy_from(&(&model.c * &x));
    }
    out
}

/// Least squares fit of `z = phi * c` for one channel.
pub fn batch_ls(phi: &[f64], z: &[f64]) -> f64 {
    let num: f64 = phi.iter().zip(z).map(|(p, z)| p * z).sum();
    let den: f64 = phi.iter().map(|p| p * p).sum();
    num / den
}

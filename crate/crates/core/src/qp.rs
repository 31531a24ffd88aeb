//! Dense strictly convex QP solver:
//!
//! ```text
//!     minimize    1/2 z' H z + f' z
//!     subject to  A z <= b
//! ```
//!
//! Dual active-set method in the style of Goldfarb and Idnani: start from the
//! unconstrained minimizer and repeatedly add a violated constraint, dropping
//! active constraints whose multiplier would turn negative. Every iterate is
//! dual feasible, so the objective of the successive equality-constrained
//! subproblems never decreases, and an empty step means the constraint set is
//! infeasible. A warm start lists the constraints to try first; the answer is
//! the same unique minimizer either way.
//!
//! Problem sizes here are tiny (about ten variables), so the active-set
//! quantities are recomputed from a cached `H^-1` on every change instead of
//! being updated.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem<T: Real> {
    pub h: DMatrix<T>,
    pub f: DVector<T>,
    pub a: DMatrix<T>,
    pub b: DVector<T>,
}

impl<T: Real> QpProblem<T> {
    pub fn new(h: DMatrix<T>, f: DVector<T>, a: DMatrix<T>, b: DVector<T>) -> Result<Self> {
        let p = Self { h, f, a, b };
        p.check_dims()?;
        Ok(p)
    }

    /// Problem without inequality constraints.
    pub fn unconstrained(h: DMatrix<T>, f: DVector<T>) -> Result<Self> {
        let n = f.len();
        Self::new(h, f, DMatrix::zeros(0, n), DVector::zeros(0))
    }

    pub fn n_vars(&self) -> usize {
        self.f.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.b.len()
    }

    pub fn objective(&self, z: &DVector<T>) -> T {
        (z.transpose() * &self.h * z)[(0, 0)] * T::of(0.5) + self.f.dot(z)
    }

    /// Largest constraint violation `max(0, A z - b)`.
    pub fn max_violation(&self, z: &DVector<T>) -> T {
        let s = &self.a * z - &self.b;
        s.iter().fold(T::zero(), |m, v| m.max(*v))
    }

    fn check_dims(&self) -> Result<()> {
        let n = self.f.len();
        if n == 0 {
            return Err(Error::Dimension("QP with no variables".into()));
        }
        if self.h.nrows() != n || self.h.ncols() != n {
            return Err(Error::Dimension(format!(
                "Hessian is {}x{}, expected {n}x{n}",
                self.h.nrows(),
                self.h.ncols()
            )));
        }
        if self.a.ncols() != n || self.a.nrows() != self.b.len() {
            return Err(Error::Dimension(format!(
                "constraints are {}x{} with {} bounds for {n} variables",
                self.a.nrows(),
                self.a.ncols(),
                self.b.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    /// Iteration cap reached, or the iteration broke down numerically.
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct QpSolution<T: Real> {
    pub z: DVector<T>,
    /// Multiplier per constraint (zero when inactive).
    pub duals: DVector<T>,
    pub status: QpStatus,
    pub kkt_residual: T,
    pub iterations: usize,
    pub active_set: Vec<usize>,
    pub objective: T,
    /// Subproblem objective after every primal step.
    pub objective_trace: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings<T> {
    pub max_iter: usize,
    /// Constraint `i` counts as violated when `a_i z - b_i > tol (1 + |b_i|)`.
    pub feasibility_tol: T,
}

impl<T: Real> Default for QpSettings<T> {
    fn default() -> Self {
        Self {
            max_iter: 500,
            feasibility_tol: T::epsilon() * T::of(1e4),
        }
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<T: Real>(m: &DMatrix<T>) -> Option<DMatrix<T>> {
    let n = m.nrows();
    let mut l = DMatrix::<T>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

/// Solves `L L' x = rhs` in place.
pub fn cholesky_solve<T: Real>(l: &DMatrix<T>, rhs: &mut DVector<T>) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[(i, k)] * rhs[k];
        }
        rhs[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * rhs[k];
        }
        rhs[i] = s / l[(i, i)];
    }
}

fn spd_inverse<T: Real>(m: &DMatrix<T>) -> Option<DMatrix<T>> {
    let l = cholesky(m)?;
    let n = m.nrows();
    let mut inv = DMatrix::<T>::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::<T>::zeros(n);
        e[j] = T::one();
        cholesky_solve(&l, &mut e);
        inv.set_column(j, &e);
    }
    Some(inv)
}

fn norm_inf<T: Real>(v: &DVector<T>) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

pub fn solve<T: Real>(problem: &QpProblem<T>, warm_start: Option<&[usize]>) -> Result<QpSolution<T>> {
    solve_with(problem, warm_start, &QpSettings::default())
}

pub fn solve_with<T: Real>(
    problem: &QpProblem<T>,
    warm_start: Option<&[usize]>,
    settings: &QpSettings<T>,
) -> Result<QpSolution<T>> {
    problem.check_dims()?;
    let n = problem.n_vars();
    let m = problem.n_constraints();
    let h = &problem.h;
    let sym_scale = norm_inf(&DVector::from_iterator(n * n, h.iter().cloned())).max(T::one());
    if (h - h.transpose()).iter().any(|v| v.abs() > T::epsilon() * T::of(1e3) * sym_scale) {
        return Err(Error::NotPositiveDefinite);
    }
    let h_inv = spd_inverse(h).ok_or(Error::NotPositiveDefinite)?;

    let mut prefer = vec![false; m];
    if let Some(ws) = warm_start {
        for &i in ws {
            if i < m {
                prefer[i] = true;
            }
        }
    }

    // constraint normals in ">=" form: n_i = -a_i, n_i' z >= -b_i
    let normal = |i: usize| -> DVector<T> { -problem.a.row(i).transpose() };
    let slack = |i: usize, z: &DVector<T>| -> T { problem.b[i] - problem.a.row(i).dot(&z.transpose()) };
    let tol = |i: usize| settings.feasibility_tol * (T::one() + problem.b[i].abs());

    let mut z = -(&h_inv * &problem.f);
    let mut active: Vec<usize> = Vec::new();
    let mut mult: Vec<T> = Vec::new();
    let mut trace = vec![problem.objective(&z)];
    let mut iterations = 0;
    let mut status = QpStatus::Optimal;

    'outer: loop {
        // pick the constraint to add: preferred ones first, lowest index first
        let violated = |i: usize, pass: bool| prefer[i] == pass && !active.contains(&i) && slack(i, &z) < -tol(i);
        let chosen = [true, false].into_iter().find_map(|pass| (0..m).find(|&i| violated(i, pass)));
        let Some(p) = chosen else { break };
        let np = normal(p);
        let mut u_p = T::zero();

        loop {
            iterations += 1;
            if iterations > settings.max_iter {
                status = QpStatus::MaxIter;
                break 'outer;
            }
            let hn = &h_inv * &np;
            let (step, r) = if active.is_empty() {
                (hn.clone(), DVector::<T>::zeros(0))
            } else {
                let nmat = active_normals(problem, &active);
                let hinv_n = &h_inv * &nmat;
                let gram = nmat.transpose() * &hinv_n;
                let Some(l) = cholesky(&gram) else {
                    // numerically dependent active set; cannot continue reliably
                    status = QpStatus::MaxIter;
                    break 'outer;
                };
                let mut r = nmat.transpose() * &hn;
                cholesky_solve(&l, &mut r);
                (&hn - &hinv_n * &r, r)
            };

            // dual step: largest t keeping active multipliers non-negative
            let mut t1 = T::infinity();
            let mut drop_k = None;
            for (k, (&idx, &rk)) in active.iter().zip(r.iter()).enumerate() {
                if rk > T::zero() {
                    let ratio = mult[k] / rk;
                    let better = match drop_k {
                        None => true,
                        Some(kk) => ratio < t1 || (ratio == t1 && idx < active[kk]),
                    };
                    if better {
                        t1 = ratio;
                        drop_k = Some(k);
                    }
                }
            }

            // primal step: full step satisfies constraint p with equality
            let curvature = step.dot(&np);
            // with n independent active normals the step is zero up to round-off
            let dependent = active.len() >= n
                || norm_inf(&step) <= T::epsilon() * T::of(1e3) * norm_inf(&hn).max(T::min_positive_value())
                || !(curvature > T::zero());
            let t2 = if dependent {
                T::infinity()
            } else {
                -slack(p, &z) / curvature
            };

            if t1.is_infinite() && t2.is_infinite() {
                status = QpStatus::Infeasible;
                break 'outer;
            }
            if t2.is_infinite() {
                // pure dual step, then drop the blocking constraint
                for (k, rk) in r.iter().enumerate() {
                    mult[k] -= t1 * *rk;
                }
                u_p += t1;
                let k = drop_k.expect("finite dual step has a blocking index");
                active.remove(k);
                mult.remove(k);
                continue;
            }

            let t = t1.min(t2);
            z += &step * t;
            for (k, rk) in r.iter().enumerate() {
                mult[k] -= t * *rk;
            }
            u_p += t;
            trace.push(problem.objective(&z));
            if t2 <= t1 {
                active.push(p);
                mult.push(u_p);
                continue 'outer;
            }
            let k = drop_k.expect("partial step has a blocking index");
            active.remove(k);
            mult.remove(k);
        }
    }

    if status == QpStatus::Optimal && !active.is_empty() {
        // re-solve the equality subproblem on the final active set
        let nmat = active_normals(problem, &active);
        let hinv_n = &h_inv * &nmat;
        let gram = nmat.transpose() * &hinv_n;
        if let Some(l) = cholesky(&gram) {
            let d = DVector::<T>::from_iterator(active.len(), active.iter().map(|&i| -problem.b[i]));
            let mut u = d + hinv_n.transpose() * &problem.f;
            cholesky_solve(&l, &mut u);
            let z_polished = &h_inv * (&nmat * &u - &problem.f);
            let excess = |z: &DVector<T>| (0..m).fold(T::zero(), |e, i| e.max(-slack(i, z) - tol(i)));
            let ok = u.iter().all(|v| *v >= -settings.feasibility_tol) && excess(&z_polished) <= excess(&z);
            if ok {
                z = z_polished;
                mult = u.iter().map(|v| v.max(T::zero())).collect();
            }
        }
    }

    let breakdown_tol = |i: usize| T::epsilon().sqrt() * (T::one() + problem.b[i].abs());
    if status == QpStatus::Optimal && (0..m).any(|i| slack(i, &z) < -breakdown_tol(i)) {
        // round-off broke the iteration; never report an infeasible point
        status = QpStatus::MaxIter;
    }

    let mut duals = DVector::<T>::zeros(m);
    for (&i, &u) in active.iter().zip(&mult) {
        duals[i] = u;
    }
    let kkt_residual = kkt_residual(problem, &z, &duals);
    let mut sorted = active.clone();
    sorted.sort_unstable();
    Ok(QpSolution {
        objective: problem.objective(&z),
        z,
        duals,
        status,
        kkt_residual,
        iterations,
        active_set: sorted,
        objective_trace: trace,
    })
}

fn active_normals<T: Real>(problem: &QpProblem<T>, active: &[usize]) -> DMatrix<T> {
    let n = problem.n_vars();
    let mut nm = DMatrix::<T>::zeros(n, active.len());
    for (c, &i) in active.iter().enumerate() {
        for r in 0..n {
            nm[(r, c)] = -problem.a[(i, r)];
        }
    }
    nm
}

/// Max of stationarity, primal infeasibility, complementarity and dual
/// negativity for the pair `(z, duals)`.
pub fn kkt_residual<T: Real>(problem: &QpProblem<T>, z: &DVector<T>, duals: &DVector<T>) -> T {
    let grad = &problem.h * z + &problem.f + problem.a.transpose() * duals;
    let stationarity = norm_inf(&grad);
    let slack = &problem.b - &problem.a * z;
    let primal = slack.iter().fold(T::zero(), |m, s| m.max(-*s));
    let comp = slack.iter().zip(duals.iter()).fold(T::zero(), |m, (s, l)| m.max((*s * *l).abs()));
    let dual = duals.iter().fold(T::zero(), |m, l| m.max(-*l));
    stationarity.max(primal).max(comp).max(dual)
}

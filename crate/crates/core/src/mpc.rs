//! LPV-MPC steering controller.
//!
//! The discrete model is written in incremental form by augmenting the state
//! with the previous input, `x_aug = [x; u_prev]`, so that the decision
//! variables are the steering increments `dU = [du_0 .. du_{Nc-1}]` and
//! amplitude limits stay linear in `dU`. Predictions over `Np` steps are
//! condensed into `Y = Psi x_aug + Theta dU`; increments beyond `Nc` are zero.
//!
//! Two cost modes share the constraint set. The standard cost weights every
//! stage equally and enforces all constraints hard. The enhanced cost scales
//! stage `j` by `beta^-j`, and relaxes state and stability rows by a single
//! slack variable penalized quadratically. Actuator limits are always hard.

use nalgebra::{DMatrix, DVector};

use crate::envelope::{steer_limit, EnvelopeConfig};
use crate::error::{Error, Result};
use crate::lpv::{LateralState, LtiInstance};
use crate::plant::VehicleParams;
use crate::qp::{self, cholesky, QpProblem, QpStatus};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostMode {
    Standard,
    Enhanced,
}

/// Symmetric box `|x[index]| <= bound` on a physical state over the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateLimit<T> {
    pub index: usize,
    pub bound: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig<T: Real> {
    pub n_p: usize,
    pub n_c: usize,
    /// Output-error weight, `ny x ny`.
    pub q: DMatrix<T>,
    /// Input-increment weight.
    pub r: T,
    pub beta: T,
    pub rho_slack: T,
    /// Multiplies the slack in every softened row.
    pub eps_scale: T,
    pub ts: T,
    /// Increment limit [rad/step].
    pub du_max: T,
    /// Amplitude limit [rad].
    pub u_max: T,
    pub state_limits: Vec<StateLimit<T>>,
    pub cost_mode: CostMode,
}

impl<T: Real> Default for MpcConfig<T> {
    fn default() -> Self {
        Self {
            n_p: 9,
            n_c: 9,
            q: DMatrix::from_diagonal(&DVector::from_vec(vec![T::of(35.0), T::of(3.25)])),
            r: T::of(1.25),
            beta: T::of(3.5),
            rho_slack: T::of(15.0),
            eps_scale: T::of(0.5),
            ts: T::of(0.1),
            du_max: T::PI() / T::of(12.0),
            u_max: T::PI() / T::of(6.0),
            // lateral velocity and yaw rate of the lateral model
            state_limits: vec![
                StateLimit { index: 0, bound: T::of(4.0) },
                StateLimit { index: 2, bound: T::one() },
            ],
            cost_mode: CostMode::Enhanced,
        }
    }
}

impl<T: Real> MpcConfig<T> {
    pub fn with_mode(mut self, mode: CostMode) -> Self {
        self.cost_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_c == 0 || self.n_c > self.n_p {
            return Err(Error::input(format!(
                "need 1 <= N_c <= N_p, got N_c = {}, N_p = {}",
                self.n_c, self.n_p
            )));
        }
        let ny = self.q.nrows();
        if ny == 0 || self.q.ncols() != ny {
            return Err(Error::Dimension("output weight must be square".into()));
        }
        if (&self.q - self.q.transpose()).iter().any(|v| v.abs() > T::epsilon()) {
            return Err(Error::input("output weight must be symmetric"));
        }
        // Q >= 0: Q + delta I must factor for every delta > 0
        let shift = T::epsilon().sqrt() * (T::one() + self.q.iter().fold(T::zero(), |m, v| m.max(v.abs())));
        if cholesky(&(&self.q + DMatrix::identity(ny, ny) * shift)).is_none() {
            return Err(Error::input("output weight must be positive semidefinite"));
        }
        if !(self.r > T::zero()) {
            return Err(Error::input("input weight R must be positive"));
        }
        if self.cost_mode == CostMode::Enhanced && !(self.beta > T::one()) {
            return Err(Error::input(format!("enhanced cost needs beta > 1, got {}", self.beta)));
        }
        if !(self.rho_slack > T::zero()) || !(self.eps_scale > T::zero()) {
            return Err(Error::input("slack weight and relaxation scale must be positive"));
        }
        if !(self.ts > T::zero()) || !(self.du_max > T::zero()) || !(self.u_max > T::zero()) {
            return Err(Error::input("T_s and input limits must be positive"));
        }
        if self.state_limits.iter().any(|l| !(l.bound >= T::zero())) {
            return Err(Error::input("state bounds must be non-negative"));
        }
        Ok(())
    }
}

/// Discrete model `x+ = A x + B u`, `y = C x` with one input.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel<T: Real> {
    pub a: DMatrix<T>,
    pub b: DVector<T>,
    pub c: DMatrix<T>,
}

impl<T: Real> DiscreteModel<T> {
    pub fn new(a: DMatrix<T>, b: DVector<T>, c: DMatrix<T>) -> Result<Self> {
        let nx = a.nrows();
        if nx == 0 || a.ncols() != nx || b.len() != nx || c.ncols() != nx || c.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "A {}x{}, B {}, C {}x{} do not form a model",
                a.nrows(),
                a.ncols(),
                b.len(),
                c.nrows(),
                c.ncols()
            )));
        }
        Ok(Self { a, b, c })
    }

    pub fn from_lti(lti: &LtiInstance<T>) -> Self {
        Self {
            a: DMatrix::from_iterator(4, 4, lti.a_d.iter().cloned()),
            b: DVector::from_iterator(4, lti.b_d.iter().cloned()),
            c: DMatrix::from_iterator(2, 4, lti.c.iter().cloned()),
        }
    }

    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_y(&self) -> usize {
        self.c.nrows()
    }

    /// `(A_aug, B_aug, C_aug)` of the incremental model.
    pub fn augmented(&self) -> (DMatrix<T>, DVector<T>, DMatrix<T>) {
        let nx = self.n_x();
        let mut a = DMatrix::<T>::zeros(nx + 1, nx + 1);
        a.view_mut((0, 0), (nx, nx)).copy_from(&self.a);
        a.view_mut((0, nx), (nx, 1)).copy_from(&self.b);
        a[(nx, nx)] = T::one();
        let mut b = DVector::<T>::zeros(nx + 1);
        b.rows_mut(0, nx).copy_from(&self.b);
        b[nx] = T::one();
        let mut c = DMatrix::<T>::zeros(self.n_y(), nx + 1);
        c.view_mut((0, 0), (self.n_y(), nx)).copy_from(&self.c);
        (a, b, c)
    }
}

/// `[x; u_prev]`.
pub fn augmented_state<T: Real>(x: &DVector<T>, u_prev: T) -> DVector<T> {
    let mut v = DVector::<T>::zeros(x.len() + 1);
    v.rows_mut(0, x.len()).copy_from(x);
    v[x.len()] = u_prev;
    v
}

/// Condensed predictions. Outputs are stacked by step, `[y_1; y_2; ..]`, and
/// so are augmented states.
#[derive(Debug, Clone)]
pub struct Prediction<T: Real> {
    pub psi: DMatrix<T>,
    pub theta: DMatrix<T>,
    pub state_psi: DMatrix<T>,
    pub state_theta: DMatrix<T>,
    pub x0: DVector<T>,
    pub n_p: usize,
    pub n_c: usize,
    pub n_y: usize,
    /// Augmented state dimension.
    pub n_xa: usize,
}

impl<T: Real> Prediction<T> {
    /// Output trajectory with all increments zero.
    pub fn free_response(&self) -> DVector<T> {
        &self.psi * &self.x0
    }

    pub fn outputs(&self, du: &DVector<T>) -> DVector<T> {
        self.free_response() + &self.theta * du
    }

    pub fn states(&self, du: &DVector<T>) -> DVector<T> {
        &self.state_psi * &self.x0 + &self.state_theta * du
    }

    pub fn u_prev(&self) -> T {
        self.x0[self.n_xa - 1]
    }
}

pub fn build_prediction<T: Real>(model: &DiscreteModel<T>, x0: &DVector<T>, n_p: usize, n_c: usize) -> Result<Prediction<T>> {
    let nxa = model.n_x() + 1;
    let ny = model.n_y();
    if x0.len() != nxa {
        return Err(Error::Dimension(format!(
            "augmented state has {} entries, expected {nxa}",
            x0.len()
        )));
    }
    if n_c == 0 || n_c > n_p {
        return Err(Error::Dimension(format!("N_c = {n_c}, N_p = {n_p}")));
    }
    let (a, b, c) = model.augmented();

    // a_pow[k] = A^k, a_pow_b[k] = A^k B
    let mut a_pow = vec![DMatrix::<T>::identity(nxa, nxa)];
    for k in 1..=n_p {
        let next = &a * &a_pow[k - 1];
        a_pow.push(next);
    }
    let a_pow_b: Vec<DVector<T>> = a_pow.iter().map(|ak| ak * &b).collect();

    let mut state_psi = DMatrix::<T>::zeros(nxa * n_p, nxa);
    let mut state_theta = DMatrix::<T>::zeros(nxa * n_p, n_c);
    for i in 1..=n_p {
        let r0 = (i - 1) * nxa;
        state_psi.view_mut((r0, 0), (nxa, nxa)).copy_from(&a_pow[i]);
        for j in 0..n_c.min(i) {
            state_theta.view_mut((r0, j), (nxa, 1)).copy_from(&a_pow_b[i - 1 - j]);
        }
    }
    let mut psi = DMatrix::<T>::zeros(ny * n_p, nxa);
    let mut theta = DMatrix::<T>::zeros(ny * n_p, n_c);
    for i in 0..n_p {
        let s_psi = state_psi.view((i * nxa, 0), (nxa, nxa));
        psi.view_mut((i * ny, 0), (ny, nxa)).copy_from(&(&c * s_psi));
        let s_theta = state_theta.view((i * nxa, 0), (nxa, n_c));
        theta.view_mut((i * ny, 0), (ny, n_c)).copy_from(&(&c * s_theta));
    }
    Ok(Prediction {
        psi,
        theta,
        state_psi,
        state_theta,
        x0: x0.clone(),
        n_p,
        n_c,
        n_y: ny,
        n_xa: nxa,
    })
}

/// A condensed MPC subproblem. The MPC cost equals
/// `problem.objective(z) + constant`.
#[derive(Debug, Clone)]
pub struct MpcQp<T: Real> {
    pub problem: QpProblem<T>,
    pub constant: T,
    pub n_c: usize,
    /// Index of the slack variable, enhanced mode only.
    pub slack_index: Option<usize>,
}

impl<T: Real> MpcQp<T> {
    pub fn cost(&self, z: &DVector<T>) -> T {
        self.problem.objective(z) + self.constant
    }
}

pub fn build_qp_standard<T: Real>(
    pred: &Prediction<T>,
    y_ref: &DVector<T>,
    cfg: &MpcConfig<T>,
    stability_limit: T,
) -> Result<MpcQp<T>> {
    let q_w = vec![T::one(); pred.n_p];
    let r_w = vec![T::one(); pred.n_c];
    assemble(pred, y_ref, cfg, stability_limit, &q_w, &r_w, false)
}

/// Discounted cost with slack. Accepts `beta >= 1`; `beta = 1` gives the
/// standard weights.
pub fn build_qp_enhanced<T: Real>(
    pred: &Prediction<T>,
    y_ref: &DVector<T>,
    cfg: &MpcConfig<T>,
    stability_limit: T,
) -> Result<MpcQp<T>> {
    if !(cfg.beta >= T::one()) {
        return Err(Error::input(format!("beta must be at least 1, got {}", cfg.beta)));
    }
    let q_w = stage_weights(cfg.beta, pred.n_p);
    let r_w = stage_weights(cfg.beta, pred.n_c);
    assemble(pred, y_ref, cfg, stability_limit, &q_w, &r_w, true)
}

/// `beta^-j` for `j = 1..=n`.
pub fn stage_weights<T: Real>(beta: T, n: usize) -> Vec<T> {
    (1..=n).map(|j| beta.powi(-(j as i32))).collect()
}

fn assemble<T: Real>(
    pred: &Prediction<T>,
    y_ref: &DVector<T>,
    cfg: &MpcConfig<T>,
    stability_limit: T,
    q_weights: &[T],
    r_weights: &[T],
    soft: bool,
) -> Result<MpcQp<T>> {
    let (np, nc, ny) = (pred.n_p, pred.n_c, pred.n_y);
    if y_ref.len() != ny * np {
        return Err(Error::Dimension(format!(
            "reference has {} entries, expected {}",
            y_ref.len(),
            ny * np
        )));
    }
    if cfg.q.nrows() != ny || cfg.q.ncols() != ny {
        return Err(Error::Dimension(format!("output weight is not {ny}x{ny}")));
    }
    let nx = pred.n_xa - 1;
    if let Some(l) = cfg.state_limits.iter().find(|l| l.index >= nx) {
        return Err(Error::Dimension(format!("state limit on index {} of a {nx}-state model", l.index)));
    }

    let mut q_bar = DMatrix::<T>::zeros(ny * np, ny * np);
    for (i, w) in q_weights.iter().enumerate() {
        q_bar.view_mut((i * ny, i * ny), (ny, ny)).copy_from(&(&cfg.q * *w));
    }
    let err = y_ref - pred.free_response();
    let qt = &q_bar * &pred.theta;
    let mut h_du = pred.theta.transpose() * &qt;
    for (i, w) in r_weights.iter().enumerate() {
        h_du[(i, i)] += cfg.r * *w;
    }
    let two = T::of(2.0);
    // 2 M, symmetrized against round-off
    let h_du = &h_du + h_du.transpose();
    let f_du = qt.transpose() * &err * (-two);
    let constant = err.dot(&(&q_bar * &err));

    let n = if soft { nc + 1 } else { nc };
    let mut h = DMatrix::<T>::zeros(n, n);
    h.view_mut((0, 0), (nc, nc)).copy_from(&h_du);
    let mut f = DVector::<T>::zeros(n);
    f.rows_mut(0, nc).copy_from(&f_du);
    if soft {
        h[(nc, nc)] = two * cfg.rho_slack;
    }

    let mut rows: Vec<(Vec<T>, T)> = Vec::new();
    let slack_coeff = if soft { -cfg.eps_scale } else { T::zero() };
    let row = |coeffs: &[T], sign: T, slack: bool| -> Vec<T> {
        let mut r: Vec<T> = coeffs.iter().map(|c| *c * sign).collect();
        if soft {
            r.push(if slack { slack_coeff } else { T::zero() });
        }
        r
    };
    let u_prev = pred.u_prev();

    // increment limits
    for i in 0..nc {
        let mut e = vec![T::zero(); nc];
        e[i] = T::one();
        rows.push((row(&e, T::one(), false), cfg.du_max));
        rows.push((row(&e, -T::one(), false), cfg.du_max));
    }
    // amplitude limits on u_i = u_prev + sum_{k<=i} du_k
    let cumulative = |i: usize| -> Vec<T> { (0..nc).map(|k| if k <= i { T::one() } else { T::zero() }).collect() };
    for i in 0..nc {
        let l = cumulative(i);
        rows.push((row(&l, T::one(), false), cfg.u_max - u_prev));
        rows.push((row(&l, -T::one(), false), cfg.u_max + u_prev));
    }
    // stability limit, softened in enhanced mode
    for i in 0..nc {
        let l = cumulative(i);
        rows.push((row(&l, T::one(), true), stability_limit - u_prev));
        rows.push((row(&l, -T::one(), true), stability_limit + u_prev));
    }
    // state box over the horizon
    let free_states = &pred.state_psi * &pred.x0;
    for lim in &cfg.state_limits {
        for j in 0..np {
            let r = j * pred.n_xa + lim.index;
            let coeffs: Vec<T> = pred.state_theta.row(r).iter().cloned().collect();
            rows.push((row(&coeffs, T::one(), true), lim.bound - free_states[r]));
            rows.push((row(&coeffs, -T::one(), true), lim.bound + free_states[r]));
        }
    }
    if soft {
        let mut r = vec![T::zero(); n];
        r[nc] = -T::one();
        rows.push((r, T::zero()));
    }

    let m = rows.len();
    let a = DMatrix::<T>::from_fn(m, n, |i, j| rows[i].0[j]);
    let b = DVector::<T>::from_iterator(m, rows.iter().map(|r| r.1));
    Ok(MpcQp {
        problem: QpProblem::new(h, f, a, b)?,
        constant,
        n_c: nc,
        slack_index: soft.then_some(nc),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcDiagnostics<T> {
    /// MPC cost at the solution (NaN after a fallback).
    pub cost: T,
    pub slack: T,
    pub active_set: Vec<usize>,
    pub iterations: usize,
    pub status: QpStatus,
    pub kkt_residual: T,
    /// The previous command was held because the QP did not solve.
    pub fallback: bool,
    /// The QP command had to be clipped to the issued limits.
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcStep<T> {
    pub command: T,
    /// Open-loop increment sequence from the QP (empty after a fallback).
    pub increments: Vec<T>,
    pub diagnostics: MpcDiagnostics<T>,
}

/// One receding-horizon step on an arbitrary single-input model. The issued
/// command is `u_prev + du_0`, held at `u_prev` when the QP fails, and always
/// clipped to `|u| <= min(u_max, stability_limit)`, `|du| <= du_max`.
pub fn solve_step<T: Real>(
    model: &DiscreteModel<T>,
    x0: &DVector<T>,
    u_prev: T,
    y_ref: &DVector<T>,
    cfg: &MpcConfig<T>,
    stability_limit: T,
    warm_start: Option<&[usize]>,
) -> Result<MpcStep<T>> {
    cfg.validate()?;
    if x0.len() != model.n_x() {
        return Err(Error::Dimension(format!("state has {} entries, model {}", x0.len(), model.n_x())));
    }
    let pred = build_prediction(model, &augmented_state(x0, u_prev), cfg.n_p, cfg.n_c)?;
    let mpc_qp = match cfg.cost_mode {
        CostMode::Standard => build_qp_standard(&pred, y_ref, cfg, stability_limit)?,
        CostMode::Enhanced => build_qp_enhanced(&pred, y_ref, cfg, stability_limit)?,
    };
    let sol = qp::solve(&mpc_qp.problem, warm_start)?;
    let limit = cfg.u_max.min(stability_limit).max(T::zero());
    let issue = |u: T| -> T {
        let rate_limited = u.max(u_prev - cfg.du_max).min(u_prev + cfg.du_max);
        rate_limited.max(-limit).min(limit)
    };

    let fallback = sol.status != QpStatus::Optimal;
    let (raw, increments, cost, slack) = if fallback {
        (u_prev, Vec::new(), T::nan(), T::zero())
    } else {
        let du: Vec<T> = sol.z.rows(0, cfg.n_c).iter().cloned().collect();
        let slack = mpc_qp.slack_index.map_or(T::zero(), |i| if sol.z[i] > T::zero() { sol.z[i] } else { T::zero() });
        (u_prev + du[0], du, mpc_qp.cost(&sol.z), slack)
    };
    let command = issue(raw);
    let tol = T::epsilon().sqrt();
    Ok(MpcStep {
        command,
        increments,
        diagnostics: MpcDiagnostics {
            cost,
            slack,
            active_set: sol.active_set,
            iterations: sol.iterations,
            status: sol.status,
            kkt_residual: sol.kkt_residual,
            fallback,
            clipped: !fallback && (command - raw).abs() > tol,
        },
    })
}

/// Lateral MPC bound to a vehicle: carries the previous command and the
/// warm-start active set between cycles.
#[derive(Debug, Clone)]
pub struct LateralMpc<T: Real> {
    config: MpcConfig<T>,
    params: VehicleParams<T>,
    envelope: EnvelopeConfig<T>,
    u_prev: T,
    warm: Vec<usize>,
}

impl<T: Real> LateralMpc<T> {
    pub fn new(config: MpcConfig<T>, params: VehicleParams<T>) -> Result<Self> {
        config.validate()?;
        let envelope = EnvelopeConfig {
            u_max: config.u_max,
            ..EnvelopeConfig::default()
        };
        Ok(Self {
            config,
            params,
            envelope,
            u_prev: T::zero(),
            warm: Vec::new(),
        })
    }

    pub fn config(&self) -> &MpcConfig<T> {
        &self.config
    }

    pub fn last_command(&self) -> T {
        self.u_prev
    }

    pub fn stability_limit(&self, v_x: T) -> T {
        steer_limit(v_x, &self.params, &self.envelope)
    }

    /// Solves one cycle on the model adapted for this cycle. `y_ref` stacks
    /// `[y, psi]` references for steps `1..=N_p`.
    pub fn step(&mut self, lti: &LtiInstance<T>, state: &LateralState<T>, y_ref: &DVector<T>, v_x: T) -> Result<MpcStep<T>> {
        if !state.is_finite() {
            return Err(Error::input("non-finite lateral state"));
        }
        let model = DiscreteModel::from_lti(lti);
        let x0 = DVector::from_iterator(4, state.to_vector().iter().cloned());
        let limit = self.stability_limit(v_x);
        let warm = (!self.warm.is_empty()).then_some(self.warm.as_slice());
        let out = solve_step(&model, &x0, self.u_prev, y_ref, &self.config, limit, warm)?;
        if !out.diagnostics.fallback {
            self.warm = out.diagnostics.active_set.clone();
        }
        self.u_prev = out.command;
        Ok(out)
    }
}

//! The control step: contacts, task velocity, complementarity QP, safe joint velocities.
//!
//! The decision vector is `y = [q̇; λ₁ … λ_nc]`. The kinematic rows
//!
//! ```text
//!     q̇ − Σ k_c J_ci† N_i λ_i = J† ẋ
//! ```
//!
//! hold with equality, `q̇` is boxed by the joint limits, `λ >= 0`, and every contact adds
//!
//! ```text
//!     0 <= λ_i  ⊥  ψ_i − ε_i + h N_iᵀ J_ci q̇ >= 0.
//! ```

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{collect_contacts_posed, ContactCandidate, ContactConfig, ContactKey, NormalCache, SphereObstacle};
use crate::kinematics::{damped_pinv, integrate, task_jacobian, ChainPoses, JointState, RobotModel};
use crate::lcqp::{qp::check_spd, solve_lcqp, LcqProblem, SolveResult, SolveStatus, SolverOptions};
use crate::scalar::Real;

/// Diagonal weight on the multiplier block of the Hessian (raised to `1e3·eps` for `f32`).
pub const LAMBDA_REGULARIZER: f64 = 1e-8;

/// Slack allowed by [`verify_safety`] (raised to `64·eps` for `f32`).
pub const SAFETY_TOL: f64 = 1e-8;

/// Joint-space cost `½ q̇ᵀ Q q̇ + cᵀ q̇`. `None` stands for the identity and the zero vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CostSpec<T: Real> {
    pub q: Option<DMatrix<T>>,
    pub c: Option<DVector<T>>,
}

impl<T: Real> CostSpec<T> {
    pub fn resolve(&self, n: usize) -> Result<(DMatrix<T>, DVector<T>)> {
        let q = match &self.q {
            Some(q) => {
                check_dim("cost Q rows", n, q.nrows())?;
                check_dim("cost Q cols", n, q.ncols())?;
                check_spd(q)?;
                q.clone()
            }
            None => DMatrix::identity(n, n),
        };
        let c = match &self.c {
            Some(c) => {
                check_dim("cost c", n, c.len())?;
                c.clone()
            }
            None => DVector::zeros(n),
        };
        Ok((q, c))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig<T: Real> {
    /// Integration step (s).
    pub h: T,
    /// Task speed (m/s).
    pub k_d: T,
    /// Factor applied to the solved joint velocity before output.
    pub k_q: T,
    /// Factor on each multiplier's contribution to the kinematic rows.
    pub k_c: T,
    /// Damping of every pseudo-inverse.
    pub mu: T,
    /// Goal distance at which planning stops (m).
    pub goal_tol: T,
    pub max_iters: usize,
    pub cost: CostSpec<T>,
}

impl<T: Real> Default for PlannerConfig<T> {
    fn default() -> Self {
        Self {
            h: T::lit(0.001),
            k_d: T::lit(0.2),
            k_q: T::lit(0.2),
            k_c: T::lit(0.05),
            mu: T::lit(0.001),
            goal_tol: T::lit(0.005),
            max_iters: 1500,
            cost: CostSpec::default(),
        }
    }
}

impl<T: Real> PlannerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.h > T::zero()) {
            return bad("h must be positive");
        }
        if !(self.k_d > T::zero() && self.k_q > T::zero()) {
            return bad("k_d and k_q must be positive");
        }
        if !(self.k_c >= T::zero()) {
            return bad("k_c must be non-negative");
        }
        if !(self.mu >= T::zero()) {
            return bad("mu must be non-negative");
        }
        if !(self.goal_tol > T::zero()) {
            return bad("goal_tol must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StepResult<T: Real> {
    /// Output joint velocity, already scaled by `k_q`.
    pub qdot: DVector<T>,
    /// Joint block of the solver output.
    pub qdot_raw: DVector<T>,
    pub lambdas: DVector<T>,
    pub contacts: Vec<ContactCandidate<T>>,
    pub solver: SolveResult<T>,
    /// Every predicted distance clears its threshold.
    pub safety_ok: bool,
    /// `ψ_i + h N_iᵀ J_ci q̇_raw` per contact.
    pub predicted_distances: DVector<T>,
    pub task_velocity: DVector<T>,
    /// Some contact normal came from the cache or the +z fallback.
    pub degenerate: bool,
    pub wall_time: Duration,
}

impl<T: Real> StepResult<T> {
    pub fn infeasible(&self) -> bool {
        self.solver.status == SolveStatus::InfeasibleLinear
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Outcome {
    ReachedGoal,
    IterBudget,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    pub states: Vec<JointState<T>>,
    pub ee_path: Vec<DVector<T>>,
    pub steps: Vec<StepResult<T>>,
    pub outcome: Outcome,
    pub h: T,
}

/// Proportional goal attraction with a unit direction; zero within `goal_tol`.
pub fn task_velocity<T: Real>(p_goal: &DVector<T>, p_current: &DVector<T>, k_d: T, goal_tol: T) -> DVector<T> {
    let diff = p_goal - p_current;
    let dist = diff.norm();
    if dist <= goal_tol || dist == T::zero() {
        DVector::zeros(diff.len())
    } else {
        diff * (k_d / dist)
    }
}

/// Column `J_ci† N_i` for one contact.
fn contact_column<T: Real>(c: &ContactCandidate<T>, mu: T) -> Result<DVector<T>> {
    Ok(damped_pinv(&c.jc, mu)? * c.normal)
}

fn assemble_posed<T: Real>(
    model: &RobotModel<T>,
    chain: &ChainPoses<T>,
    contacts: &[ContactCandidate<T>],
    xdot_task: &DVector<T>,
    cfg: &PlannerConfig<T>,
) -> Result<LcqProblem<T>> {
    let n = model.n();
    let nc = contacts.len();
    let ny = n + nc;
    let jac = task_jacobian(model, chain)?;
    check_dim("task velocity", jac.nrows(), xdot_task.len())?;
    let (cq, cc) = cfg.cost.resolve(n)?;

    let mut q = DMatrix::zeros(ny, ny);
    q.view_mut((0, 0), (n, n)).copy_from(&cq);
    for i in n..ny {
        q[(i, i)] = T::tol(LAMBDA_REGULARIZER, 1e3);
    }
    let mut g = DVector::zeros(ny);
    g.rows_mut(0, n).copy_from(&cc);

    let mut a = DMatrix::zeros(n, ny);
    a.view_mut((0, 0), (n, n)).fill_with_identity();
    for (i, c) in contacts.iter().enumerate() {
        check_dim("contact Jacobian columns", n, c.jc.ncols())?;
        let col = contact_column(c, cfg.mu)? * -cfg.k_c;
        a.column_mut(n + i).copy_from(&col);
    }
    let b = damped_pinv(&jac, cfg.mu)? * xdot_task;

    let mut l = DMatrix::zeros(nc, ny);
    let mut r = DMatrix::zeros(nc, ny);
    let mut r0 = DVector::zeros(nc);
    for (i, c) in contacts.iter().enumerate() {
        l[(i, n + i)] = T::one();
        let nj = c.normal_jacobian() * cfg.h;
        r.view_mut((i, 0), (1, n)).copy_from(&nj.transpose());
        r0[i] = c.psi - c.epsilon;
    }

    let mut lb = DVector::zeros(ny);
    let mut ub = DVector::from_element(ny, T::infinity());
    lb.rows_mut(0, n).copy_from(&model.qdot_min);
    ub.rows_mut(0, n).copy_from(&model.qdot_max);

    Ok(LcqProblem::new(q, g)
        .with_linear(a, b, (0..n).collect())
        .with_complementarity(l, r)
        .with_offsets(DVector::zeros(nc), r0)
        .with_bounds(Some(lb), Some(ub)))
}

/// Build the complementarity QP for one control step. `contacts` must come from
/// [`collect_contacts`](crate::geometry::collect_contacts) at `state`.
pub fn assemble_fliqc<T: Real>(
    model: &RobotModel<T>,
    state: &JointState<T>,
    contacts: &[ContactCandidate<T>],
    xdot_task: &DVector<T>,
    cfg: &PlannerConfig<T>,
) -> Result<LcqProblem<T>> {
    let chain = ChainPoses::compute(model, state)?;
    assemble_posed(model, &chain, contacts, xdot_task, cfg)
}

/// Recompute `ψ_i + h N_iᵀ J_ci q̇` for a raw joint velocity.
pub fn predicted_distances<T: Real>(contacts: &[ContactCandidate<T>], qdot_raw: &DVector<T>, h: T) -> DVector<T> {
    DVector::from_iterator(
        contacts.len(),
        contacts.iter().map(|c| c.psi + c.normal_jacobian().dot(qdot_raw) * h),
    )
}

/// Re-check the first-order distance constraint of every contact from the raw velocity.
pub fn verify_safety<T: Real>(result: &StepResult<T>, contacts: &[ContactCandidate<T>], h: T) -> bool {
    let pred = predicted_distances(contacts, &result.qdot_raw, h);
    contacts
        .iter()
        .zip(pred.iter())
        .all(|(c, p)| *p >= c.epsilon - T::tol(SAFETY_TOL, 64.0))
}

/// Mutable state carried between control steps: the previous solution for warm starting and
/// the previous contact normals.
#[derive(Debug, Clone, Default)]
pub struct WarmStart<T: Real> {
    qdot: Option<DVector<T>>,
    lambdas: Vec<(ContactKey, T)>,
    pub normals: NormalCache<T>,
}

impl<T: Real> WarmStart<T> {
    pub fn clear(&mut self) {
        *self = Self {
            qdot: None,
            lambdas: Vec::new(),
            normals: NormalCache::new(),
        };
    }

    fn guess(&self, contacts: &[ContactCandidate<T>]) -> Option<DVector<T>> {
        let qdot = self.qdot.as_ref()?;
        let n = qdot.len();
        let mut y = DVector::zeros(n + contacts.len());
        y.rows_mut(0, n).copy_from(qdot);
        for (i, c) in contacts.iter().enumerate() {
            let key = c.key();
            if let Some((_, v)) = self.lambdas.iter().find(|(k, _)| *k == key) {
                y[n + i] = *v;
            }
        }
        Some(y)
    }
}

/// Everything a control step needs besides the state and the obstacles.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepConfig<T: Real> {
    pub contact: ContactConfig<T>,
    pub planner: PlannerConfig<T>,
    pub solver: SolverOptions<T>,
}

impl<T: Real> StepConfig<T> {
    pub fn validate(&self, model: &RobotModel<T>) -> Result<()> {
        self.contact.validate(model.links())?;
        self.planner.validate()?;
        self.solver.validate()
    }
}

/// One control step. Never fails on solver non-optimality; an infeasible step yields zero
/// velocity.
pub fn step<T: Real>(
    model: &RobotModel<T>,
    state: &JointState<T>,
    obstacles: &[SphereObstacle<T>],
    goal: &DVector<T>,
    cfg: &StepConfig<T>,
    warm: &mut WarmStart<T>,
) -> Result<StepResult<T>> {
    let start = Instant::now();
    let n = model.n();
    check_dim("goal", model.task_dim(), goal.len())?;
    let chain = ChainPoses::compute(model, state)?;
    let set = collect_contacts_posed(model, &chain, obstacles, &cfg.contact, &warm.normals)?;
    let contacts = set.candidates;
    let ee = model.task_space.project(&chain.ee.translation.vector);
    let xdot = task_velocity(goal, &ee, cfg.planner.k_d, cfg.planner.goal_tol);
    let problem = assemble_posed(model, &chain, &contacts, &xdot, &cfg.planner)?;

    let mut opts = cfg.solver.clone();
    if opts.warm_start.is_none() {
        opts.warm_start = warm.guess(&contacts);
    }
    let solver = solve_lcqp(&problem, &opts)?;

    let nc = contacts.len();
    let (qdot_raw, lambdas) = if solver.status == SolveStatus::InfeasibleLinear {
        (DVector::zeros(n), DVector::zeros(nc))
    } else {
        (solver.y.rows(0, n).into_owned(), solver.y.rows(n, nc).into_owned())
    };
    let predicted = predicted_distances(&contacts, &qdot_raw, cfg.planner.h);
    let safety_ok = contacts
        .iter()
        .zip(predicted.iter())
        .all(|(c, p)| *p >= c.epsilon - T::tol(SAFETY_TOL, 64.0));

    if solver.status == SolveStatus::InfeasibleLinear {
        warm.qdot = None;
        warm.lambdas.clear();
    } else {
        warm.qdot = Some(qdot_raw.clone());
        warm.lambdas = contacts.iter().map(|c| c.key()).zip(lambdas.iter().copied()).collect();
    }
    warm.normals = set.normals;

    Ok(StepResult {
        qdot: &qdot_raw * cfg.planner.k_q,
        qdot_raw,
        lambdas,
        degenerate: contacts.iter().any(|c| c.degenerate),
        contacts,
        solver,
        safety_ok,
        predicted_distances: predicted,
        task_velocity: xdot,
        wall_time: start.elapsed(),
    })
}

/// A planning problem for [`plan`].
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T: Real> {
    pub model: RobotModel<T>,
    pub q_start: DVector<T>,
    /// Goal in task coordinates.
    pub goal: DVector<T>,
    pub obstacles: Vec<SphereObstacle<T>>,
    pub config: StepConfig<T>,
}

impl<T: Real> Scenario<T> {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        check_dim("q_start", self.model.n(), self.q_start.len())?;
        check_dim("goal", self.model.task_dim(), self.goal.len())?;
        self.config.validate(&self.model)
    }
}

/// Constant-velocity obstacle extrapolation.
pub fn advance_constant<T: Real>(obstacles: &mut [SphereObstacle<T>], h: T) {
    for o in obstacles {
        o.center += o.velocity * h;
    }
}

/// Closed loop with constant-velocity obstacles.
pub fn plan<T: Real>(scenario: &Scenario<T>) -> Result<Trajectory<T>> {
    plan_with(scenario, advance_constant)
}

/// Closed loop: step, integrate, move the obstacles with `advance`, until the goal is within
/// `goal_tol`, the step budget runs out, or a step is infeasible.
pub fn plan_with<T: Real, F>(scenario: &Scenario<T>, mut advance: F) -> Result<Trajectory<T>>
where
    F: FnMut(&mut [SphereObstacle<T>], T),
{
    scenario.validate()?;
    let model = &scenario.model;
    let pc = &scenario.config.planner;
    let mut state = JointState::new(scenario.q_start.clone());
    let mut obstacles = scenario.obstacles.clone();
    let mut warm = WarmStart::default();
    let ee_of = |s: &JointState<T>| crate::kinematics::ee_position(model, s);
    let mut traj = Trajectory {
        ee_path: vec![ee_of(&state)?],
        states: vec![state.clone()],
        steps: Vec::new(),
        outcome: Outcome::IterBudget,
        h: pc.h,
    };
    let reached = |ee: &DVector<T>| (&scenario.goal - ee).norm() <= pc.goal_tol;
    if reached(&traj.ee_path[0]) {
        traj.outcome = Outcome::ReachedGoal;
        return Ok(traj);
    }
    for _ in 0..pc.max_iters {
        let res = step(model, &state, &obstacles, &scenario.goal, &scenario.config, &mut warm)?;
        let infeasible = res.infeasible();
        state = integrate(&state, &res.qdot, pc.h);
        advance(&mut obstacles, pc.h);
        let ee = ee_of(&state)?;
        traj.steps.push(res);
        traj.states.push(state.clone());
        let done = reached(&ee);
        traj.ee_path.push(ee);
        if infeasible {
            traj.outcome = Outcome::Infeasible;
            return Ok(traj);
        }
        if done {
            traj.outcome = Outcome::ReachedGoal;
            return Ok(traj);
        }
    }
    Ok(traj)
}

//! Quadratic programs with linear complementarity constraints.
//!
//! ```text
//!     minimize    ½ yᵀ Q y + gᵀ y
//!     subject to  b <= A y                  (rows in eq_rows hold with equality)
//!                 lb <= y <= ub
//!                 0 <= L y + l0  ⊥  R y + r0 >= 0
//! ```
//!
//! [`solve_lcqp`] penalizes the orthogonality term `φ(y) = (Ly + l0)ᵀ(Ry + r0)` and follows a
//! homotopy in the penalty weight. Every subproblem is the convex QP over the relaxed feasible
//! set with `φ` linearized at the current iterate, so any iterate the solver returns is feasible
//! for everything except orthogonality.

mod io;
mod oracle;
pub mod qp;

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::scalar::Real;
use qp::{ConstraintSet, DenseQp, QpSolution, QpStatus, RowOrigin};

pub use io::LcqProblemFile;
pub use oracle::{enumerate_lcqp_oracle, lcp_feasible, OracleSolution};
pub use qp::{solve_qp, QpResult};

#[derive(Debug, Clone, PartialEq)]
pub struct LcqProblem<T: Real> {
    pub q: DMatrix<T>,
    pub g: DVector<T>,
    pub a: DMatrix<T>,
    pub b: DVector<T>,
    pub eq_rows: Vec<usize>,
    pub l: DMatrix<T>,
    pub r: DMatrix<T>,
    /// Constant offset of the left complementarity side.
    pub l0: DVector<T>,
    /// Constant offset of the right complementarity side.
    pub r0: DVector<T>,
    pub lb: Option<DVector<T>>,
    pub ub: Option<DVector<T>>,
}

impl<T: Real> LcqProblem<T> {
    /// Problem with objective only; add constraints with the builder methods.
    pub fn new(q: DMatrix<T>, g: DVector<T>) -> Self {
        let n = g.len();
        Self {
            q,
            g,
            a: DMatrix::zeros(0, n),
            b: DVector::zeros(0),
            eq_rows: Vec::new(),
            l: DMatrix::zeros(0, n),
            r: DMatrix::zeros(0, n),
            l0: DVector::zeros(0),
            r0: DVector::zeros(0),
            lb: None,
            ub: None,
        }
    }

    pub fn with_linear(mut self, a: DMatrix<T>, b: DVector<T>, eq_rows: Vec<usize>) -> Self {
        self.a = a;
        self.b = b;
        self.eq_rows = eq_rows;
        self
    }

    pub fn with_complementarity(mut self, l: DMatrix<T>, r: DMatrix<T>) -> Self {
        let nc = l.nrows();
        self.l = l;
        self.r = r;
        self.l0 = DVector::zeros(nc);
        self.r0 = DVector::zeros(nc);
        self
    }

    pub fn with_offsets(mut self, l0: DVector<T>, r0: DVector<T>) -> Self {
        self.l0 = l0;
        self.r0 = r0;
        self
    }

    pub fn with_bounds(mut self, lb: Option<DVector<T>>, ub: Option<DVector<T>>) -> Self {
        self.lb = lb;
        self.ub = ub;
        self
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn n_comp(&self) -> usize {
        self.l.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        check_dim("Q rows", n, self.q.nrows())?;
        check_dim("Q cols", n, self.q.ncols())?;
        check_dim("b", self.a.nrows(), self.b.len())?;
        if self.a.nrows() > 0 {
            check_dim("A cols", n, self.a.ncols())?;
        }
        let nc = self.n_comp();
        check_dim("R rows", nc, self.r.nrows())?;
        check_dim("l0", nc, self.l0.len())?;
        check_dim("r0", nc, self.r0.len())?;
        if nc > 0 {
            check_dim("L cols", n, self.l.ncols())?;
            check_dim("R cols", n, self.r.ncols())?;
        }
        if let Some(lb) = &self.lb {
            check_dim("lb", n, lb.len())?;
        }
        if let Some(ub) = &self.ub {
            check_dim("ub", n, ub.len())?;
        }
        if let Some(&bad) = self.eq_rows.iter().find(|&&i| i >= self.a.nrows()) {
            return Err(Error::InvalidProblem(format!("eq row {bad} out of range")));
        }
        qp::check_spd(&self.q)?;
        Ok(())
    }

    pub fn objective(&self, y: &DVector<T>) -> T {
        (&self.q * y).dot(y) * T::lit(0.5) + self.g.dot(y)
    }

    pub fn left(&self, y: &DVector<T>) -> DVector<T> {
        &self.l * y + &self.l0
    }

    pub fn right(&self, y: &DVector<T>) -> DVector<T> {
        &self.r * y + &self.r0
    }

    /// Orthogonality residual `(Ly + l0)ᵀ(Ry + r0)`.
    pub fn phi(&self, y: &DVector<T>) -> T {
        if self.n_comp() == 0 {
            return T::zero();
        }
        self.left(y).dot(&self.right(y))
    }

    /// Gradient of [`phi`](Self::phi): `Lᵀ(Ry + r0) + Rᵀ(Ly + l0)`.
    pub fn phi_gradient(&self, y: &DVector<T>) -> DVector<T> {
        if self.n_comp() == 0 {
            return DVector::zeros(self.n());
        }
        self.l.tr_mul(&self.right(y)) + self.r.tr_mul(&self.left(y))
    }

    /// Largest violation of the linear rows, the bounds, and the non-negativity of both
    /// complementarity sides.
    pub fn max_violation(&self, y: &DVector<T>) -> T {
        let mut worst = T::zero();
        let ay = &self.a * y;
        for i in 0..self.a.nrows() {
            let s = ay[i] - self.b[i];
            let v = if self.eq_rows.contains(&i) { s.abs() } else { -s };
            worst = worst.max(v);
        }
        if let Some(lb) = &self.lb {
            for (yi, li) in y.iter().zip(lb.iter()) {
                worst = worst.max(*li - *yi);
            }
        }
        if let Some(ub) = &self.ub {
            for (yi, ui) in y.iter().zip(ub.iter()) {
                worst = worst.max(*yi - *ui);
            }
        }
        for v in self.left(y).iter().chain(self.right(y).iter()) {
            worst = worst.max(-*v);
        }
        worst
    }

    /// Constraint rows of the relaxed problem (orthogonality dropped).
    ///
    /// A complementarity side that merely restates a simple bound (`e_j ᵀ y >= 0` with
    /// `lb_j >= 0`) is not duplicated.
    pub(crate) fn relaxed_constraints(&self) -> Result<ConstraintSet<T>> {
        let mut cons = ConstraintSet::new(self.n());
        cons.push_linear(&self.a, &self.b, &self.eq_rows, self.lb.as_ref(), self.ub.as_ref())?;
        for i in 0..self.n_comp() {
            for (k, (mat, off)) in [(&self.l, &self.l0), (&self.r, &self.r0)].into_iter().enumerate() {
                let row = mat.row(i).transpose();
                if self.implied_by_bound(&row, off[i]) {
                    continue;
                }
                cons.push(row, -off[i], false, RowOrigin::Extra(2 * i + k));
            }
        }
        Ok(cons)
    }

    fn implied_by_bound(&self, row: &DVector<T>, offset: T) -> bool {
        let Some(lb) = &self.lb else { return false };
        let mut nz = row.iter().enumerate().filter(|(_, v)| **v != T::zero());
        match (nz.next(), nz.next()) {
            (Some((j, &c)), None) if c > T::zero() => lb[j] * c + offset >= T::zero(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions<T: Real> {
    pub rho0: T,
    pub beta: T,
    pub comp_tol: T,
    pub stat_tol: T,
    /// Maximum number of penalty levels.
    pub max_outer: usize,
    /// Cap on active-set changes per convex QP, and on linearization steps per penalty level.
    pub max_inner: usize,
    pub time_budget: Option<Duration>,
    pub warm_start: Option<DVector<T>>,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            rho0: T::lit(0.01),
            beta: T::lit(2.0),
            comp_tol: T::tol(1e-8, 64.0),
            stat_tol: T::tol(1e-8, 64.0),
            max_outer: 40,
            max_inner: 1000,
            time_budget: None,
            warm_start: None,
        }
    }
}

impl<T: Real> SolverOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > T::zero()) {
            return Err(Error::InvalidConfig("rho0 must be positive".into()));
        }
        if !(self.beta > T::one()) {
            return Err(Error::InvalidConfig("beta must exceed 1".into()));
        }
        if !(self.comp_tol > T::zero() && self.stat_tol > T::zero()) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if self.max_inner == 0 {
            return Err(Error::InvalidConfig("max_inner must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    Optimal,
    MaxPenaltyReached,
    TimeBudget,
    InfeasibleLinear,
}

#[derive(Debug, Clone)]
pub struct SolveResult<T: Real> {
    pub y: DVector<T>,
    pub status: SolveStatus,
    pub phi: T,
    pub rho_final: T,
    /// Penalty value of every level visited, in order.
    pub rho_trace: Vec<T>,
    pub outer_iters: usize,
    /// Active-set changes summed over every convex QP.
    pub inner_iters: usize,
    /// Number of convex QPs solved.
    pub qp_solves: usize,
    pub wall_time: Duration,
}

impl<T: Real> SolveResult<T> {
    pub fn is_feasible(&self) -> bool {
        self.status != SolveStatus::InfeasibleLinear
    }
}

struct Homotopy<'a, T: Real> {
    problem: &'a LcqProblem<T>,
    qp: DenseQp<T>,
    inner_iters: usize,
    qp_solves: usize,
}

impl<T: Real> Homotopy<'_, T> {
    fn solve(&mut self, g: &DVector<T>, hint: Option<&[usize]>) -> QpSolution<T> {
        let sol = self.qp.solve(g, hint);
        self.inner_iters += sol.iterations;
        self.qp_solves += 1;
        sol
    }

    fn merit(&self, y: &DVector<T>, rho: T) -> T {
        self.problem.objective(y) + rho * self.problem.phi(y)
    }

    /// Candidate points obtained by pinning complementarity sides to zero and solving the
    /// resulting convex QP. Pairs whose sides are both positive are pinned on the smaller side
    /// first (ties to the left); up to four such pairs every other choice is tried as well,
    /// beyond that only single flips of the first choice. Each choice is tried once with the
    /// remaining pairs pinned on their currently smaller side and once with them left free.
    /// Every candidate feasible set lies inside the relaxed one, so every candidate is a safe
    /// iterate. Returns the candidate with the lowest merit at `rho`.
    fn branch_projection(&mut self, y: &DVector<T>, rho: T) -> Option<DVector<T>> {
        let pr = self.problem;
        let (left, right) = (pr.left(y), pr.right(y));
        let open: Vec<usize> = (0..pr.n_comp())
            .filter(|&i| left[i] > T::zero() && right[i] > T::zero())
            .collect();
        if open.is_empty() {
            return None;
        }
        let k = open.len();
        let first: u64 = open
            .iter()
            .enumerate()
            .filter(|(_, &i)| left[i] <= right[i])
            .fold(0, |m, (b, _)| m | 1 << b);
        let masks: Vec<u64> = if k <= 4 {
            std::iter::once(first)
                .chain((0..1u64 << k).filter(|&m| m != first))
                .collect()
        } else {
            std::iter::once(first).chain((0..k).map(|b| first ^ 1 << b)).collect()
        };
        let base = pr.relaxed_constraints().ok()?;
        let pin = |cons: &mut ConstraintSet<T>, i: usize, left_side: bool| {
            let (mat, off) = if left_side { (&pr.l, &pr.l0) } else { (&pr.r, &pr.r0) };
            cons.push(mat.row(i).transpose(), -off[i], true, RowOrigin::Extra(usize::MAX));
        };
        let mut best: Option<(T, DVector<T>)> = None;
        for pin_rest in [true, false] {
            if !pin_rest && k == pr.n_comp() {
                break;
            }
            for &mask in &masks {
                let mut cons = base.clone();
                for (b, &i) in open.iter().enumerate() {
                    pin(&mut cons, i, mask >> b & 1 == 1);
                }
                if pin_rest {
                    for i in (0..pr.n_comp()).filter(|i| !open.contains(i)) {
                        pin(&mut cons, i, left[i] <= right[i]);
                    }
                }
                let Ok(mut qp) = DenseQp::new(&pr.q, cons) else { continue };
                qp.max_iter = self.qp.max_iter;
                let sol = qp.solve(&pr.g, None);
                self.inner_iters += sol.iterations;
                self.qp_solves += 1;
                if sol.status != QpStatus::Optimal {
                    continue;
                }
                let m = self.merit(&sol.y, rho);
                if best.as_ref().is_none_or(|(bm, _)| m < *bm) {
                    best = Some((m, sol.y));
                }
            }
        }
        best.map(|(_, y)| y)
    }

    /// Pins the smaller side of every pair at `y` and re-solves, giving an exactly
    /// complementary point on the branch `y` sits near.
    fn pin_to_branch(&mut self, y: &DVector<T>) -> Option<DVector<T>> {
        let pr = self.problem;
        let (left, right) = (pr.left(y), pr.right(y));
        let mut cons = pr.relaxed_constraints().ok()?;
        for i in 0..pr.n_comp() {
            let (mat, off) = if left[i] <= right[i] { (&pr.l, &pr.l0) } else { (&pr.r, &pr.r0) };
            cons.push(mat.row(i).transpose(), -off[i], true, RowOrigin::Extra(usize::MAX));
        }
        let mut qp = DenseQp::new(&pr.q, cons).ok()?;
        qp.max_iter = self.qp.max_iter;
        let sol = qp.solve(&pr.g, None);
        self.inner_iters += sol.iterations;
        self.qp_solves += 1;
        let drift = T::tol(1e-9, 64.0) * (T::one() + sol.y.amax());
        (sol.status == QpStatus::Optimal && self.qp.constraints().max_violation(&sol.y) <= drift).then_some(sol.y)
    }

    /// Replaces a nearly complementary `y` by its pinned branch point unless that raises the
    /// objective by more than `sqrt(comp_tol)` (relative).
    fn polish(&mut self, y: DVector<T>, comp_tol: T) -> DVector<T> {
        if self.problem.phi(&y) == T::zero() {
            return y;
        }
        let f = self.problem.objective(&y);
        match self.pin_to_branch(&y) {
            Some(yp) if self.problem.objective(&yp) - f <= comp_tol.sqrt() * (T::one() + f.abs()) => yp,
            _ => y,
        }
    }

    /// Exact minimizer over `[0, 1]` of the penalized objective along `p`.
    fn step_length(&self, y: &DVector<T>, p: &DVector<T>, rho: T) -> T {
        let pr = self.problem;
        let grad = &pr.q * y + &pr.g + pr.phi_gradient(y) * rho;
        let slope = grad.dot(p);
        let curv = (&pr.q * p).dot(p) * T::lit(0.5)
            + if pr.n_comp() > 0 {
                (&pr.l * p).dot(&(&pr.r * p)) * rho
            } else {
                T::zero()
            };
        if curv > T::zero() {
            (-slope / (curv + curv)).clamp(T::zero(), T::one())
        } else {
            T::one()
        }
    }
}

/// Penalty-homotopy sequential convex programming for [`LcqProblem`].
pub fn solve_lcqp<T: Real>(problem: &LcqProblem<T>, opts: &SolverOptions<T>) -> Result<SolveResult<T>> {
    let start = Instant::now();
    problem.validate()?;
    opts.validate()?;
    let cons = problem.relaxed_constraints()?;
    let mut qp = DenseQp::new(&problem.q, cons)?;
    qp.max_iter = opts.max_inner;
    let hint = opts
        .warm_start
        .as_ref()
        .filter(|w| w.len() == problem.n())
        .map(|w| qp.constraints().active_at(w, T::tol(1e-9, 64.0)));
    let mut h = Homotopy {
        problem,
        qp,
        inner_iters: 0,
        qp_solves: 0,
    };
    let over_budget = |start: &Instant| opts.time_budget.is_some_and(|b| start.elapsed() >= b);

    // ρ = 0: the convex relaxation
    let first = h.solve(&problem.g, hint.as_deref());
    if first.status != QpStatus::Optimal {
        return Ok(SolveResult {
            y: DVector::zeros(problem.n()),
            status: SolveStatus::InfeasibleLinear,
            phi: T::zero(),
            rho_final: T::zero(),
            rho_trace: Vec::new(),
            outer_iters: 0,
            inner_iters: h.inner_iters,
            qp_solves: h.qp_solves,
            wall_time: start.elapsed(),
        });
    }
    let mut y = first.y;
    let mut active = first.active;
    let mut rho = opts.rho0;
    let mut rho_trace = Vec::new();
    let mut outer = 0usize;

    let finish = |y: DVector<T>, status, rho, rho_trace, outer, h: &Homotopy<T>| SolveResult {
        phi: problem.phi(&y),
        y,
        status,
        rho_final: rho,
        rho_trace,
        outer_iters: outer,
        inner_iters: h.inner_iters,
        qp_solves: h.qp_solves,
        wall_time: start.elapsed(),
    };

    // last resort: the best complementary branch point near the final feasible iterate
    let give_up = |y: DVector<T>, rho, rho_trace, outer, h: &mut Homotopy<T>| match h.branch_projection(&y, rho) {
        Some(yp) if problem.phi(&yp) <= opts.comp_tol => finish(yp, SolveStatus::Optimal, rho, rho_trace, outer, h),
        _ => finish(y, SolveStatus::MaxPenaltyReached, rho, rho_trace, outer, h),
    };

    if problem.phi(&y) <= opts.comp_tol {
        let y = h.polish(y, opts.comp_tol);
        return Ok(finish(y, SolveStatus::Optimal, T::zero(), rho_trace, 0, &h));
    }

    let mut projected_at_level = false;
    loop {
        if !projected_at_level {
            if outer >= opts.max_outer {
                return Ok(give_up(y, rho, rho_trace, outer, &mut h));
            }
            rho_trace.push(rho);
            outer += 1;
        }
        let mut stationary = false;
        for _ in 0..opts.max_inner {
            if over_budget(&start) {
                return Ok(finish(y, SolveStatus::TimeBudget, rho, rho_trace, outer, &h));
            }
            let g_lin = &problem.g + problem.phi_gradient(&y) * rho;
            let sol = h.solve(&g_lin, Some(&active));
            let drift = T::tol(1e-9, 64.0) * (T::one() + sol.y.amax());
            if sol.status != QpStatus::Optimal || h.qp.constraints().max_violation(&sol.y) > drift {
                // keep the last feasible iterate
                return Ok(give_up(y, rho, rho_trace, outer, &mut h));
            }
            let p = &sol.y - &y;
            active = sol.active;
            if p.amax() < opts.stat_tol {
                if h.merit(&sol.y, rho) <= h.merit(&y, rho) {
                    y = sol.y;
                }
                stationary = true;
                break;
            }
            let alpha = h.step_length(&y, &p, rho);
            if alpha == T::one() {
                y = sol.y;
            } else {
                y.axpy(alpha, &p, T::one());
            }
            if (p.amax() * alpha) < opts.stat_tol {
                stationary = true;
                break;
            }
        }
        if stationary && problem.phi(&y) <= opts.comp_tol {
            let y = h.polish(y, opts.comp_tol);
            return Ok(finish(y, SolveStatus::Optimal, rho, rho_trace, outer, &h));
        }
        if stationary && !projected_at_level {
            projected_at_level = true;
            if let Some(yp) = h.branch_projection(&y, rho) {
                if h.merit(&yp, rho) < h.merit(&y, rho) {
                    y = yp;
                    // re-run this penalty level from the projected point
                    continue;
                }
            }
        }
        projected_at_level = false;
        rho *= opts.beta;
    }
}

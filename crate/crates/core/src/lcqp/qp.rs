//! Dense strictly convex QP solver (Goldfarb–Idnani dual active-set method).
//!
//! ```text
//!     minimize    ½ yᵀ H y + gᵀ y
//!     subject to  A_i y  = b_i   (i in eq_rows)
//!                 A_i y >= b_i   (otherwise)
//!                 lb <= y <= ub
//! ```
//!
//! The factorization of `H` and the normalized constraint set are kept in [`DenseQp`] so a
//! sequence of problems that only differ in `g` reuses them.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct QpSolution<T: Real> {
    pub y: DVector<T>,
    pub status: QpStatus,
    /// Active-set changes (additions and removals).
    pub iterations: usize,
    /// Indices into the constraint list of [`DenseQp`] that are active at `y`.
    pub active: Vec<usize>,
    /// Multipliers of `active`, in the units of the original (unscaled) rows.
    pub multipliers: Vec<T>,
}

/// Where a normalized constraint row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOrigin {
    /// Row of the general constraint matrix.
    General(usize),
    Lower(usize),
    Upper(usize),
    /// Extra rows appended by the caller (complementarity sides, branch equalities).
    Extra(usize),
}

#[derive(Debug, Clone)]
struct Row<T: Real> {
    normal: DVector<T>,
    rhs: T,
    scale: T,
    equality: bool,
    origin: RowOrigin,
}

/// Constraint rows collected before factorization.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSet<T: Real> {
    rows: Vec<Row<T>>,
    n: usize,
    /// Rows that are identically zero but unsatisfiable.
    inconsistent: bool,
}

impl<T: Real> ConstraintSet<T> {
    pub fn new(n: usize) -> Self {
        Self {
            rows: Vec::new(),
            n,
            inconsistent: false,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn origin(&self, idx: usize) -> RowOrigin {
        self.rows[idx].origin
    }

    /// Add `cᵀ y >= d` (or `= d`). Rows are normalized to unit length.
    pub fn push(&mut self, c: DVector<T>, d: T, equality: bool, origin: RowOrigin) {
        debug_assert_eq!(c.len(), self.n);
        let scale = c.norm();
        if scale <= T::eps() {
            let ok = if equality {
                d.abs() <= T::lit(1e3) * T::eps()
            } else {
                d <= T::lit(1e3) * T::eps()
            };
            if !ok {
                self.inconsistent = true;
            }
            return;
        }
        self.rows.push(Row {
            normal: c / scale,
            rhs: d / scale,
            scale,
            equality,
            origin,
        });
    }

    /// Add the rows of `b <= A y` (equalities on `eq_rows`) and the simple bounds.
    pub fn push_linear(
        &mut self,
        a: &DMatrix<T>,
        b: &DVector<T>,
        eq_rows: &[usize],
        lb: Option<&DVector<T>>,
        ub: Option<&DVector<T>>,
    ) -> Result<()> {
        if a.nrows() > 0 {
            check_dim("A columns", self.n, a.ncols())?;
        }
        check_dim("b", a.nrows(), b.len())?;
        if let Some(&bad) = eq_rows.iter().find(|&&i| i >= a.nrows()) {
            return Err(Error::InvalidProblem(format!("eq row {bad} out of range")));
        }
        for i in 0..a.nrows() {
            let row = a.row(i).transpose();
            self.push(row, b[i], eq_rows.contains(&i), RowOrigin::General(i));
        }
        if let Some(lb) = lb {
            check_dim("lb", self.n, lb.len())?;
            for (j, &v) in lb.iter().enumerate() {
                if v.is_finite_val() {
                    self.push(unit(self.n, j, T::one()), v, false, RowOrigin::Lower(j));
                }
            }
        }
        if let Some(ub) = ub {
            check_dim("ub", self.n, ub.len())?;
            for (j, &v) in ub.iter().enumerate() {
                if v.is_finite_val() {
                    self.push(unit(self.n, j, -T::one()), -v, false, RowOrigin::Upper(j));
                }
            }
        }
        Ok(())
    }

    /// Largest violation of any row at `y`, in original units.
    pub fn max_violation(&self, y: &DVector<T>) -> T {
        let mut worst = T::zero();
        for row in &self.rows {
            let s = (row.normal.dot(y) - row.rhs) * row.scale;
            let v = if row.equality { s.abs() } else { -s };
            if v > worst {
                worst = v;
            }
        }
        if self.inconsistent {
            T::infinity()
        } else {
            worst
        }
    }

    /// Rows whose slack at `y` is within `tol` (original units).
    pub fn active_at(&self, y: &DVector<T>, tol: T) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, row)| ((row.normal.dot(y) - row.rhs) * row.scale).abs() <= tol)
            .map(|(i, _)| i)
            .collect()
    }
}

fn unit<T: Real>(n: usize, j: usize, v: T) -> DVector<T> {
    let mut e = DVector::zeros(n);
    e[j] = v;
    e
}

/// Factorized Hessian plus constraint set, ready to solve for any linear term.
#[derive(Debug, Clone)]
pub struct DenseQp<T: Real> {
    h: DMatrix<T>,
    /// `L⁻ᵀ`, where `H = L Lᵀ`.
    j0: DMatrix<T>,
    chol: nalgebra::linalg::Cholesky<T, nalgebra::Dyn>,
    cons: ConstraintSet<T>,
    eq: Vec<usize>,
    ineq: Vec<usize>,
    pub max_iter: usize,
}

/// Symmetric within `1e-10` (relative) and Cholesky-factorizable.
pub fn check_spd<T: Real>(h: &DMatrix<T>) -> Result<nalgebra::linalg::Cholesky<T, nalgebra::Dyn>> {
    if !h.is_square() {
        return Err(Error::NotPositiveDefinite);
    }
    let scale = h.amax().max(T::one());
    let tol = T::lit(1e-10) * scale;
    for i in 0..h.nrows() {
        for j in 0..i {
            if (h[(i, j)] - h[(j, i)]).abs() > tol {
                return Err(Error::NotPositiveDefinite);
            }
        }
    }
    let sym = (h + h.transpose()) * T::lit(0.5);
    sym.cholesky().ok_or(Error::NotPositiveDefinite)
}

impl<T: Real> DenseQp<T> {
    pub fn new(h: &DMatrix<T>, cons: ConstraintSet<T>) -> Result<Self> {
        let chol = check_spd(h)?;
        check_dim("constraint width", h.nrows(), cons.n)?;
        let n = h.nrows();
        let l = chol.l();
        let j0 = l
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or(Error::NotPositiveDefinite)?
            .transpose();
        let eq = (0..cons.rows.len()).filter(|&i| cons.rows[i].equality).collect();
        let ineq = (0..cons.rows.len()).filter(|&i| !cons.rows[i].equality).collect();
        Ok(Self {
            h: h.clone(),
            j0,
            chol,
            cons,
            eq,
            ineq,
            max_iter: 1000,
        })
    }

    pub fn n(&self) -> usize {
        self.h.nrows()
    }

    pub fn hessian(&self) -> &DMatrix<T> {
        &self.h
    }

    pub fn constraints(&self) -> &ConstraintSet<T> {
        &self.cons
    }

    pub fn objective(&self, g: &DVector<T>, y: &DVector<T>) -> T {
        (&self.h * y).dot(y) * T::lit(0.5) + g.dot(y)
    }

    /// Solve for the linear term `g`. `hint` lists constraint indices expected to be active;
    /// violated hinted rows are added before any others.
    pub fn solve(&self, g: &DVector<T>, hint: Option<&[usize]>) -> QpSolution<T> {
        let n = self.n();
        let infeasible = |iterations| QpSolution {
            y: DVector::zeros(n),
            status: QpStatus::Infeasible,
            iterations,
            active: Vec::new(),
            multipliers: Vec::new(),
        };
        if self.cons.inconsistent {
            return infeasible(0);
        }
        let rows = &self.cons.rows;
        let m = rows.len();
        let eps = T::eps();
        let dep_tol = T::tol(1e4 * f64::EPSILON, 10.0);
        let feas_tol = T::lit(1e2) * eps;

        let mut hinted = vec![false; m];
        if let Some(h) = hint {
            for &i in h {
                if i < m {
                    hinted[i] = true;
                }
            }
        }

        let mut jm = self.j0.clone();
        let mut rm = DMatrix::<T>::zeros(n, n);
        let mut r_norm = T::one();
        // active[k] = constraint index; u[k] its multiplier; one spare slot for the candidate
        let mut active: Vec<usize> = Vec::with_capacity(n + 1);
        let mut u: Vec<T> = Vec::with_capacity(n + 1);
        let mut iq = 0usize;
        let mut d = DVector::<T>::zeros(n);
        let mut z = DVector::<T>::zeros(n);
        let mut r = vec![T::zero(); n + 1];
        let mut iterations = 0usize;

        // unconstrained minimum
        let mut x = -self.chol.solve(g);

        let x_scale = |x: &DVector<T>| T::one() + x.amax();

        // equality constraints
        let mut n_eq_active = 0usize;
        for &ci in &self.eq {
            let np = &rows[ci].normal;
            compute_d(&jm, np, &mut d);
            update_z(&jm, &d, iq, &mut z);
            update_r(&rm, &d, iq, &mut r);
            let znp = z.dot(np);
            let dep = d.rows(iq, n - iq).norm() <= dep_tol * d.norm().max(T::eps());
            if dep || znp <= T::zero() {
                // row lies in the span of the equalities already active
                let resid = np.dot(&x) - rows[ci].rhs;
                if resid.abs() <= T::tol(1e-9, 64.0) * x_scale(&x) {
                    continue;
                }
                return infeasible(iterations);
            }
            let t = (rows[ci].rhs - np.dot(&x)) / znp;
            x.axpy(t, &z, T::one());
            for k in 0..iq {
                u[k] -= t * r[k];
            }
            u.push(t);
            active.push(ci);
            if !add_constraint(&mut rm, &mut jm, &mut d, &mut iq, &mut r_norm) {
                active.pop();
                u.pop();
                return infeasible(iterations);
            }
            n_eq_active += 1;
            iterations += 1;
        }
        let p = n_eq_active;

        let mut excluded = vec![false; m];
        let slack = |x: &DVector<T>, i: usize| rows[i].normal.dot(x) - rows[i].rhs;

        'outer: loop {
            if iterations >= self.max_iter {
                return QpSolution {
                    y: x,
                    status: QpStatus::IterationLimit,
                    iterations,
                    active,
                    multipliers: u,
                };
            }
            // pick a violated inequality: hinted rows first, then the most violated
            let tol = feas_tol * x_scale(&x);
            let mut pick: Option<(usize, T)> = None;
            let mut pick_hint: Option<(usize, T)> = None;
            for &i in &self.ineq {
                if excluded[i] || active[..iq].contains(&i) {
                    continue;
                }
                let s = slack(&x, i);
                if s < -tol {
                    if pick.is_none_or(|(_, v)| s < v) {
                        pick = Some((i, s));
                    }
                    if hinted[i] && pick_hint.is_none_or(|(_, v)| s < v) {
                        pick_hint = Some((i, s));
                    }
                }
            }
            let Some((ip, mut s_ip)) = pick_hint.or(pick) else {
                break 'outer;
            };
            let np = rows[ip].normal.clone();
            u.truncate(iq);
            u.push(T::zero());
            active.truncate(iq);
            active.push(ip);

            loop {
                iterations += 1;
                if iterations > self.max_iter {
                    active.truncate(iq);
                    u.truncate(iq);
                    return QpSolution {
                        y: x,
                        status: QpStatus::IterationLimit,
                        iterations,
                        active,
                        multipliers: u,
                    };
                }
                compute_d(&jm, &np, &mut d);
                update_z(&jm, &d, iq, &mut z);
                update_r(&rm, &d, iq, &mut r);

                // partial step length (dual feasibility)
                let mut t1 = T::infinity();
                let mut drop_k: Option<usize> = None;
                for k in p..iq {
                    if r[k] > T::zero() {
                        let ratio = u[k] / r[k];
                        if ratio < t1 {
                            t1 = ratio;
                            drop_k = Some(k);
                        }
                    }
                }
                // full step length (primal feasibility)
                let dep = d.rows(iq, n - iq).norm() <= dep_tol * d.norm().max(T::eps());
                let znp = z.dot(&np);
                let t2 = if !dep && znp > T::zero() {
                    -s_ip / znp
                } else {
                    T::infinity()
                };
                let t = if t1 < t2 { t1 } else { t2 };
                if !t.is_finite_val() {
                    return infeasible(iterations);
                }
                if !t2.is_finite_val() {
                    // dual step only
                    for k in 0..iq {
                        u[k] -= t * r[k];
                    }
                    u[iq] += t;
                    let k = drop_k.expect("finite partial step has a blocking row");
                    delete_constraint(&mut rm, &mut jm, &mut active, &mut u, n, &mut iq, k);
                    continue;
                }
                x.axpy(t, &z, T::one());
                for k in 0..iq {
                    u[k] -= t * r[k];
                }
                u[iq] += t;
                if t == t2 {
                    if !add_constraint(&mut rm, &mut jm, &mut d, &mut iq, &mut r_norm) {
                        // numerically dependent; give up on this row
                        excluded[ip] = true;
                        active.truncate(iq);
                        u.truncate(iq);
                    }
                    continue 'outer;
                }
                let k = drop_k.expect("partial step has a blocking row");
                delete_constraint(&mut rm, &mut jm, &mut active, &mut u, n, &mut iq, k);
                s_ip = slack(&x, ip);
            }
        }

        active.truncate(iq);
        u.truncate(iq);
        polish(rows, &active, &mut x);
        let multipliers = active
            .iter()
            .zip(&u)
            .map(|(&i, &ui)| ui / rows[i].scale)
            .collect();
        QpSolution {
            y: x,
            status: QpStatus::Optimal,
            iterations,
            active,
            multipliers,
        }
    }

    /// Stationarity residual `‖H y + g − Σ μ_i c_i‖∞` in original units.
    pub fn stationarity(&self, g: &DVector<T>, sol: &QpSolution<T>) -> T {
        let mut res = &self.h * &sol.y + g;
        for (&i, &mu) in sol.active.iter().zip(&sol.multipliers) {
            let row = &self.cons.rows[i];
            res.axpy(-mu * row.scale, &row.normal, T::one());
        }
        res.amax()
    }

    /// Smallest multiplier among active inequality rows (zero if none).
    pub fn min_inequality_multiplier(&self, sol: &QpSolution<T>) -> T {
        sol.active
            .iter()
            .zip(&sol.multipliers)
            .filter(|(&i, _)| !self.cons.rows[i].equality)
            .map(|(_, &mu)| mu)
            .fold(T::zero(), |a, b| a.min(b))
    }
}

/// Minimum-norm correction putting `x` back on its active rows. An ill-conditioned Hessian
/// leaves residuals far above machine precision on the active set; the active rows themselves
/// are unit length and usually well conditioned.
fn polish<T: Real>(rows: &[Row<T>], active: &[usize], x: &mut DVector<T>) {
    if active.is_empty() {
        return;
    }
    let n = x.len();
    let a = DMatrix::from_fn(active.len(), n, |k, j| rows[active[k]].normal[j]);
    for _ in 0..2 {
        let resid = DVector::from_fn(active.len(), |k, _| rows[active[k]].rhs - rows[active[k]].normal.dot(x));
        if resid.amax() <= T::eps() * (T::one() + x.amax()) {
            return;
        }
        let Some(chol) = (&a * a.transpose()).cholesky() else {
            return;
        };
        *x += a.tr_mul(&chol.solve(&resid));
    }
}

fn compute_d<T: Real>(j: &DMatrix<T>, np: &DVector<T>, d: &mut DVector<T>) {
    j.tr_mul_to(np, d);
}

fn update_z<T: Real>(j: &DMatrix<T>, d: &DVector<T>, iq: usize, z: &mut DVector<T>) {
    let n = j.nrows();
    z.fill(T::zero());
    for k in iq..n {
        let dk = d[k];
        if dk != T::zero() {
            z.axpy(dk, &j.column(k), T::one());
        }
    }
}

fn update_r<T: Real>(rm: &DMatrix<T>, d: &DVector<T>, iq: usize, r: &mut [T]) {
    for i in (0..iq).rev() {
        let mut sum = T::zero();
        for k in i + 1..iq {
            sum += rm[(i, k)] * r[k];
        }
        r[i] = (d[i] - sum) / rm[(i, i)];
    }
}

fn hypot<T: Real>(a: T, b: T) -> T {
    let (a, b) = (a.abs(), b.abs());
    if a > b {
        let t = b / a;
        a * (T::one() + t * t).sqrt()
    } else if b > T::zero() {
        let t = a / b;
        b * (T::one() + t * t).sqrt()
    } else {
        T::zero()
    }
}

fn add_constraint<T: Real>(
    rm: &mut DMatrix<T>,
    jm: &mut DMatrix<T>,
    d: &mut DVector<T>,
    iq: &mut usize,
    r_norm: &mut T,
) -> bool {
    let n = jm.nrows();
    // Givens rotations zeroing d[iq+1..n], applied to the columns of J
    let mut j = n - 1;
    while j > *iq {
        let mut cc = d[j - 1];
        let mut ss = d[j];
        let h = hypot(cc, ss);
        if h == T::zero() {
            j -= 1;
            continue;
        }
        d[j] = T::zero();
        ss /= h;
        cc /= h;
        if cc < T::zero() {
            cc = -cc;
            ss = -ss;
            d[j - 1] = -h;
        } else {
            d[j - 1] = h;
        }
        let xny = ss / (T::one() + cc);
        for k in 0..n {
            let t1 = jm[(k, j - 1)];
            let t2 = jm[(k, j)];
            let a = t1 * cc + t2 * ss;
            jm[(k, j - 1)] = a;
            jm[(k, j)] = xny * (t1 + a) - t2;
        }
        j -= 1;
    }
    *iq += 1;
    for i in 0..*iq {
        rm[(i, *iq - 1)] = d[i];
    }
    let diag = d[*iq - 1].abs();
    if diag <= T::eps() * *r_norm {
        // dependent; undo the column count so the caller can drop it
        *iq -= 1;
        return false;
    }
    if diag > *r_norm {
        *r_norm = diag;
    }
    true
}

fn delete_constraint<T: Real>(
    rm: &mut DMatrix<T>,
    jm: &mut DMatrix<T>,
    active: &mut Vec<usize>,
    u: &mut Vec<T>,
    n: usize,
    iq: &mut usize,
    qq: usize,
) {
    // remove slot qq, keeping the candidate slot at the end
    active.remove(qq);
    u.remove(qq);
    for i in qq..*iq - 1 {
        for k in 0..n {
            rm[(k, i)] = rm[(k, i + 1)];
        }
    }
    for k in 0..n {
        rm[(k, *iq - 1)] = T::zero();
    }
    *iq -= 1;
    if *iq == 0 {
        return;
    }
    for j in qq..*iq {
        let mut cc = rm[(j, j)];
        let mut ss = rm[(j + 1, j)];
        let h = hypot(cc, ss);
        if h == T::zero() {
            continue;
        }
        cc /= h;
        ss /= h;
        rm[(j + 1, j)] = T::zero();
        if cc < T::zero() {
            rm[(j, j)] = -h;
            cc = -cc;
            ss = -ss;
        } else {
            rm[(j, j)] = h;
        }
        let xny = ss / (T::one() + cc);
        for k in j + 1..*iq {
            let t1 = rm[(j, k)];
            let t2 = rm[(j + 1, k)];
            let a = t1 * cc + t2 * ss;
            rm[(j, k)] = a;
            rm[(j + 1, k)] = xny * (t1 + a) - t2;
        }
        for k in 0..n {
            let t1 = jm[(k, j)];
            let t2 = jm[(k, j + 1)];
            let a = t1 * cc + t2 * ss;
            jm[(k, j)] = a;
            jm[(k, j + 1)] = xny * (a + t1) - t2;
        }
    }
}

/// Outcome of [`solve_qp`].
#[derive(Debug, Clone)]
pub struct QpResult<T: Real> {
    pub y: DVector<T>,
    pub status: QpStatus,
    pub iterations: usize,
    pub stationarity: T,
    pub max_violation: T,
}

/// One-shot convex QP solve with the general constraint form.
#[allow(clippy::too_many_arguments)]
pub fn solve_qp<T: Real>(
    h: &DMatrix<T>,
    g: &DVector<T>,
    a: &DMatrix<T>,
    b: &DVector<T>,
    eq_rows: &[usize],
    lb: Option<&DVector<T>>,
    ub: Option<&DVector<T>>,
    warm_start: Option<&DVector<T>>,
) -> Result<QpResult<T>> {
    let n = h.nrows();
    check_dim("g", n, g.len())?;
    let mut cons = ConstraintSet::new(n);
    cons.push_linear(a, b, eq_rows, lb, ub)?;
    let qp = DenseQp::new(h, cons)?;
    let hint = warm_start.map(|w| qp.constraints().active_at(w, T::tol(1e-9, 64.0)));
    let sol = qp.solve(g, hint.as_deref());
    Ok(QpResult {
        stationarity: qp.stationarity(g, &sol),
        max_violation: qp.constraints().max_violation(&sol.y),
        y: sol.y,
        status: sol.status,
        iterations: sol.iterations,
    })
}

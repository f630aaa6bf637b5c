//! Exhaustive reference solvers for small complementarity problems.

use nalgebra::{DMatrix, DVector};

use super::qp::{ConstraintSet, DenseQp, QpStatus, RowOrigin};
use super::LcqProblem;
use crate::error::{check_dim, Error, Result};
use crate::scalar::Real;

/// Largest complementarity count the enumeration oracles accept.
pub const MAX_ENUMERATED: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution<T: Real> {
    pub y: DVector<T>,
    pub objective: T,
    /// Bit `i` set: the left side of pair `i` is held at zero.
    pub branch: u64,
}

/// Global minimum of an [`LcqProblem`] by enumerating every branch `L_i y + l0_i = 0` or
/// `R_i y + r0_i = 0` and solving each as a convex QP. `None` when no branch is feasible.
pub fn enumerate_lcqp_oracle<T: Real>(problem: &LcqProblem<T>) -> Result<Option<OracleSolution<T>>> {
    problem.validate()?;
    let nc = problem.n_comp();
    if nc > MAX_ENUMERATED {
        return Err(Error::InvalidProblem(format!(
            "{nc} complementarity pairs is too many to enumerate"
        )));
    }
    let mut best: Option<OracleSolution<T>> = None;
    for mask in 0u64..(1u64 << nc) {
        let mut cons = ConstraintSet::new(problem.n());
        cons.push_linear(
            &problem.a,
            &problem.b,
            &problem.eq_rows,
            problem.lb.as_ref(),
            problem.ub.as_ref(),
        )?;
        for i in 0..nc {
            let left_zero = mask >> i & 1 == 1;
            cons.push(problem.l.row(i).transpose(), -problem.l0[i], left_zero, RowOrigin::Extra(2 * i));
            cons.push(problem.r.row(i).transpose(), -problem.r0[i], !left_zero, RowOrigin::Extra(2 * i + 1));
        }
        let qp = DenseQp::new(&problem.q, cons)?;
        let sol = qp.solve(&problem.g, None);
        if sol.status != QpStatus::Optimal {
            continue;
        }
        let objective = problem.objective(&sol.y);
        if best.as_ref().is_none_or(|b| objective < b.objective) {
            best = Some(OracleSolution {
                y: sol.y,
                objective,
                branch: mask,
            });
        }
    }
    Ok(best)
}

/// A solution of the linear complementarity problem `λ >= 0, Gλ + u >= 0, λᵀ(Gλ + u) = 0`,
/// searching supports in order of increasing size. Within a support the minimum-norm `λ` is
/// returned. `None` when no support admits a solution.
pub fn lcp_feasible<T: Real>(u: &DVector<T>, g: &DMatrix<T>) -> Result<Option<DVector<T>>> {
    let n = u.len();
    check_dim("G rows", n, g.nrows())?;
    check_dim("G cols", n, g.ncols())?;
    if n > MAX_ENUMERATED {
        return Err(Error::InvalidProblem(format!("{n} variables is too many to enumerate")));
    }
    let mut masks: Vec<u64> = (0u64..(1u64 << n)).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    let eye = DMatrix::<T>::identity(n, n);
    let zeros = DVector::<T>::zeros(n);
    let tol = T::lit(1e-9);
    for mask in masks {
        let mut cons = ConstraintSet::new(n);
        for i in 0..n {
            let in_support = mask >> i & 1 == 1;
            let mut e = DVector::zeros(n);
            e[i] = T::one();
            cons.push(e, T::zero(), !in_support, RowOrigin::Extra(2 * i));
            cons.push(g.row(i).transpose(), -u[i], in_support, RowOrigin::Extra(2 * i + 1));
        }
        let qp = DenseQp::new(&eye, cons)?;
        let sol = qp.solve(&zeros, None);
        if sol.status != QpStatus::Optimal {
            continue;
        }
        let w = g * &sol.y + u;
        let ok = sol.y.iter().all(|v| *v >= -tol)
            && w.iter().all(|v| *v >= -tol)
            && sol.y.dot(&w).abs() <= T::lit(1e-10);
        if ok {
            return Ok(Some(sol.y));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn oracle_finds_vertex() {
        let pr = LcqProblem::new(DMatrix::identity(2, 2), DVector::from_column_slice(&[-1.0, -1.0]))
            .with_complementarity(
                DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
                DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            );
        let sol = enumerate_lcqp_oracle(&pr).unwrap().unwrap();
        assert_relative_eq!(sol.objective, -0.5, epsilon = 1e-12);
    }

    #[test]
    fn lcp_trivial_and_forced() {
        let g = DMatrix::<f64>::identity(2, 2);
        let lam = lcp_feasible(&DVector::from_column_slice(&[1.0, 2.0]), &g).unwrap().unwrap();
        assert_eq!(lam, DVector::zeros(2));
        let lam = lcp_feasible(&DVector::from_column_slice(&[-1.0, 2.0]), &g).unwrap().unwrap();
        assert_relative_eq!(lam[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(lam[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn lcp_without_solution() {
        // λ >= 0 and −λ − 1 >= 0 cannot both hold
        let g = -DMatrix::<f64>::identity(1, 1);
        let u = DVector::from_column_slice(&[-1.0]);
        assert!(lcp_feasible(&u, &g).unwrap().is_none());
    }
}

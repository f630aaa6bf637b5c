#![allow(dead_code)]

use fliqc_core::LcqProblem;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random LCQP built around a point that satisfies every constraint, so the feasible set is
/// never empty. Sizes: `n_y` in 2..=6, `n_c` in 1..=min(4, n_y).
pub fn random_lcqp(rng: &mut ChaCha8Rng) -> LcqProblem<f64> {
    let n = rng.random_range(2..=6usize);
    let nc = rng.random_range(1..=n.min(4));
    let u = |rng: &mut ChaCha8Rng| rng.random_range(-1.0..1.0);
    let m = DMatrix::from_fn(n, n, |_, _| u(rng));
    let q = m.transpose() * &m + DMatrix::identity(n, n) * 0.1;
    let g = DVector::from_fn(n, |_, _| u(rng));
    let yf = DVector::from_fn(n, |_, _| u(rng));

    let mut l = DMatrix::zeros(nc, n);
    let mut r = DMatrix::zeros(nc, n);
    let mut l0 = DVector::zeros(nc);
    let mut r0 = DVector::zeros(nc);
    for i in 0..nc {
        if rng.random_bool(0.5) {
            l[(i, i)] = 1.0;
        } else {
            for j in 0..n {
                l[(i, j)] = u(rng);
            }
        }
        for j in 0..n {
            r[(i, j)] = u(rng);
        }
        let lv = l.row(i).dot(&yf.transpose());
        let rv = r.row(i).dot(&yf.transpose());
        let gap = rng.random_range(0.0..1.0);
        if rng.random_bool(0.5) {
            l0[i] = -lv;
            r0[i] = gap - rv;
        } else {
            l0[i] = gap - lv;
            r0[i] = -rv;
        }
    }

    let na = rng.random_range(0..=2usize);
    let a = DMatrix::from_fn(na, n, |_, _| u(rng));
    let mut b = DVector::zeros(na);
    let mut eq_rows = Vec::new();
    for i in 0..na {
        let ay = a.row(i).dot(&yf.transpose());
        if rng.random_bool(0.3) {
            b[i] = ay;
            eq_rows.push(i);
        } else {
            b[i] = ay - rng.random_range(0.0..0.5);
        }
    }
    let lb = DVector::from_fn(n, |j, _| yf[j] - rng.random_range(0.5..2.0));
    let ub = DVector::from_fn(n, |j, _| yf[j] + rng.random_range(0.5..2.0));
    LcqProblem::new(q, g)
        .with_linear(a, b, eq_rows)
        .with_complementarity(l, r)
        .with_offsets(l0, r0)
        .with_bounds(Some(lb), Some(ub))
}

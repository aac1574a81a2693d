#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bounded QP `min ½xᵀPx + qᵀx, l ≤ Ax ≤ u` with positive definite `P`.
pub struct QpInstance {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

/// Random feasible instance: a random interior point is kept inside every
/// row's interval, a few rows are equalities and some are one-sided.
pub fn random_qp(seed: u64) -> QpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=8);
    let m = rng.random_range(1..=12);
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let p = &g * g.transpose() + DMatrix::identity(n, n) * 0.1;
    let q = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
    let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
    let ax = &a * &x0;
    let mut lower = DVector::zeros(m);
    let mut upper = DVector::zeros(m);
    let mut equalities = 0;
    for j in 0..m {
        let kind: f64 = rng.random();
        if kind < 0.1 && equalities + 1 < n {
            equalities += 1;
            lower[j] = ax[j];
            upper[j] = ax[j];
        } else if kind < 0.25 {
            lower[j] = f64::NEG_INFINITY;
            upper[j] = ax[j] + rng.random_range(0.0..0.5);
        } else if kind < 0.4 {
            lower[j] = ax[j] - rng.random_range(0.0..0.5);
            upper[j] = f64::INFINITY;
        } else {
            lower[j] = ax[j] - rng.random_range(0.0..0.5);
            upper[j] = ax[j] + rng.random_range(0.0..0.5);
        }
    }
    QpInstance { p, q, a, lower, upper }
}

/// Exhaustive active-set enumeration: every assignment of each row to
/// inactive, lower or upper (equality rows always active) with at most `n`
/// active rows is solved as an equality-constrained QP; the best feasible
/// candidate is optimal for a strictly convex objective.
pub fn enumerate_qp(inst: &QpInstance) -> (DVector<f64>, f64) {
    let n = inst.q.len();
    let m = inst.a.nrows();
    let objective = |x: &DVector<f64>| 0.5 * x.dot(&(&inst.p * x)) + inst.q.dot(x);
    let feasible = |x: &DVector<f64>| {
        let ax = &inst.a * x;
        (0..m).all(|j| ax[j] >= inst.lower[j] - 1e-9 && ax[j] <= inst.upper[j] + 1e-9)
    };
    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut choice = vec![0u8; m];
    loop {
        let active: Vec<(usize, f64)> = (0..m)
            .filter_map(|j| {
                if inst.lower[j] == inst.upper[j] {
                    return Some((j, inst.lower[j]));
                }
                match choice[j] {
                    1 if inst.lower[j].is_finite() => Some((j, inst.lower[j])),
                    2 if inst.upper[j].is_finite() => Some((j, inst.upper[j])),
                    _ => None,
                }
            })
            .collect();
        let redundant = (0..m).any(|j| {
            choice[j] != 0
                && (inst.lower[j] == inst.upper[j]
                    || (choice[j] == 1 && !inst.lower[j].is_finite())
                    || (choice[j] == 2 && !inst.upper[j].is_finite()))
        });
        if !redundant && active.len() <= n {
            let k = active.len();
            let mut kkt = DMatrix::zeros(n + k, n + k);
            let mut rhs = DVector::zeros(n + k);
            kkt.view_mut((0, 0), (n, n)).copy_from(&inst.p);
            for i in 0..n {
                rhs[i] = -inst.q[i];
            }
            for (c, &(j, b)) in active.iter().enumerate() {
                for i in 0..n {
                    kkt[(n + c, i)] = inst.a[(j, i)];
                    kkt[(i, n + c)] = inst.a[(j, i)];
                }
                rhs[n + c] = b;
            }
            if let Some(sol) = kkt.lu().solve(&rhs) {
                let x = sol.rows(0, n).into_owned();
                if x.iter().all(|v| v.is_finite()) && feasible(&x) {
                    let f = objective(&x);
                    if best.as_ref().is_none_or(|b| f < b.1) {
                        best = Some((x, f));
                    }
                }
            }
        }
        let mut j = 0;
        loop {
            if j == m {
                return best.expect("instance is feasible by construction");
            }
            choice[j] += 1;
            if choice[j] == 3 {
                choice[j] = 0;
                j += 1;
            } else {
                break;
            }
        }
    }
}

/// Bisection for the SNR (dB) at which a decreasing SER curve equals `target`.
pub fn invert_decreasing(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// SNR where a measured SER curve crosses `target`, interpolating
/// log10(SER) linearly between the bracketing points.
pub fn crossing_db(points: &[(f64, f64)], target: f64) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let ((s0, e0), (s1, e1)) = (w[0], w[1]);
        if e0 >= target && e1 < target && e1 > 0.0 {
            let (l0, l1, lt) = (e0.log10(), e1.log10(), target.log10());
            Some(s0 + (lt - l0) / (l1 - l0) * (s1 - s0))
        } else if e0 >= target && e1 == 0.0 {
            Some(s1)
        } else {
            None
        }
    })
}

//! Dense convex QP: minimize ½xᵀPx + qᵀx subject to lower ≤ Ax ≤ upper.
//!
//! Strictly convex problems go straight to a Goldfarb-Idnani dual active-set
//! iteration. Positive semidefinite but singular `P` is handled by a
//! proximal-point outer loop whose subproblems are strictly convex. The final
//! active set is polished by one dense KKT solve on the original problem.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug)]
pub struct QpSettings {
    /// Absolute bound on every KKT residual.
    pub tolerance: f64,
    /// Budget for active-set changes per strictly convex solve.
    pub max_iterations: usize,
    /// Budget for proximal rounds when `P` is singular.
    pub max_proximal_rounds: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: 20_000, max_proximal_rounds: 500 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KktResiduals {
    /// ‖Px + q − Aᵀλ‖∞
    pub stationarity: f64,
    /// Largest bound violation.
    pub primal: f64,
    /// Largest multiplier of the wrong sign.
    pub dual: f64,
    /// Largest |multiplier × slack|.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.dual).max(self.complementarity)
    }
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    /// Multipliers per row of `A`; positive at an active lower bound,
    /// negative at an active upper bound.
    pub multipliers: DVector<f64>,
    /// Rows of `A` with an active bound.
    pub active_rows: Vec<usize>,
    pub iterations: usize,
    pub kkt: KktResiduals,
}

pub fn solve_constrained_qp(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    a: &DMatrix<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> Result<QpSolution> {
    solve_constrained_qp_with(p, q, a, lower, upper, &QpSettings::default())
}

/// One-sided constraint nᵀx ≥ b with n = sign·A[row].
#[derive(Clone, Copy, Debug)]
struct Bound {
    row: usize,
    sign: f64,
    rhs: f64,
    equality: bool,
}

struct Problem<'a> {
    a: &'a DMatrix<f64>,
    bounds: Vec<Bound>,
}

impl Problem<'_> {
    fn normal(&self, i: usize) -> DVector<f64> {
        let b = self.bounds[i];
        self.a.row(b.row).transpose() * b.sign
    }

    fn slack(&self, i: usize, x: &DVector<f64>) -> f64 {
        let b = self.bounds[i];
        b.sign * self.a.row(b.row).dot(&x.transpose()) - b.rhs
    }
}

pub fn solve_constrained_qp_with(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    a: &DMatrix<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    settings: &QpSettings,
) -> Result<QpSolution> {
    let n = q.len();
    let m = a.nrows();
    if p.nrows() != n || p.ncols() != n {
        return Err(Error::LengthMismatch { expected: n, got: p.nrows() });
    }
    if m > 0 && a.ncols() != n {
        return Err(Error::LengthMismatch { expected: n, got: a.ncols() });
    }
    if lower.len() != m || upper.len() != m {
        return Err(Error::LengthMismatch { expected: m, got: lower.len().min(upper.len()) });
    }
    let scale = p.amax().max(1.0);
    if (p - p.transpose()).amax() > 1e-12 * scale {
        return Err(invalid("P must be symmetric"));
    }
    let mut bounds = Vec::new();
    for j in 0..m {
        let (l, u) = (lower[j], upper[j]);
        if l.is_nan() || u.is_nan() || l > u {
            return Err(invalid(format!("row {j}: bounds [{l}, {u}] are inconsistent")));
        }
        if l == u {
            bounds.push(Bound { row: j, sign: 1.0, rhs: l, equality: true });
            continue;
        }
        if l.is_finite() {
            bounds.push(Bound { row: j, sign: 1.0, rhs: l, equality: false });
        }
        if u.is_finite() {
            bounds.push(Bound { row: j, sign: -1.0, rhs: -u, equality: false });
        }
    }
    let problem = Problem { a, bounds };

    let eig = SymmetricEigen::new(p.clone());
    let lmin = eig.eigenvalues.min();
    let lmax = eig.eigenvalues.max().max(0.0);
    if lmin < -1e-10 * lmax.max(1.0) {
        return Err(Error::NotPositiveSemidefinite(lmin));
    }

    let (mut x, mut active, mut duals, iterations) = if lmin > 1e-12 * lmax.max(1e-300) && lmin > 0.0
    {
        let out = dual_active_set(p, q, &problem, settings)?;
        (out.x, out.active, out.duals, out.iterations)
    } else {
        proximal(p, q, &problem, lmax, settings)?
    };

    if let Some((px, pu)) = polish(p, q, &problem, &active) {
        let before = residuals(p, q, &problem, &x, &active, &duals).max();
        let after = residuals(p, q, &problem, &px, &active, &pu).max();
        if after <= before {
            x = px;
            duals = pu;
        }
    }
    // Drop zero multipliers so the reported active set is meaningful.
    let keep: Vec<usize> = (0..active.len()).filter(|&k| duals[k] != 0.0).collect();
    active = keep.iter().map(|&k| active[k]).collect();
    duals = keep.iter().map(|&k| duals[k]).collect();

    let kkt = residuals(p, q, &problem, &x, &active, &duals);
    if kkt.max() > settings.tolerance {
        return Err(Error::NotConverged {
            iterations,
            stationarity: kkt.stationarity,
            primal: kkt.primal,
            dual: kkt.dual,
        });
    }
    let mut multipliers = DVector::zeros(m);
    let mut active_rows = Vec::new();
    for (k, &i) in active.iter().enumerate() {
        let b = problem.bounds[i];
        multipliers[b.row] += b.sign * duals[k];
        active_rows.push(b.row);
    }
    active_rows.sort_unstable();
    active_rows.dedup();
    let objective = 0.5 * x.dot(&(p * &x)) + q.dot(&x);
    Ok(QpSolution { x, objective, multipliers, active_rows, iterations, kkt })
}

struct ActiveSetOutcome {
    x: DVector<f64>,
    active: Vec<usize>,
    duals: Vec<f64>,
    iterations: usize,
}

fn lower_inverse(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("Hessian is not positive definite".into()))?;
    let l = chol.l();
    let n = g.nrows();
    l.solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::Singular("Cholesky factor is singular".into()))
}

fn dual_active_set(
    g: &DMatrix<f64>,
    q: &DVector<f64>,
    problem: &Problem,
    settings: &QpSettings,
) -> Result<ActiveSetOutcome> {
    let n = q.len();
    let linv = lower_inverse(g)?;
    let mut x = -(linv.transpose() * (&linv * q));
    let mut active: Vec<usize> = Vec::new();
    let mut orient: Vec<f64> = Vec::new();
    let mut duals: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let total = problem.bounds.len();
    let norms: Vec<f64> = (0..total).map(|i| problem.normal(i).norm()).collect();

    loop {
        // Pick the next constraint: pending equalities first, then the most
        // violated inequality (violation measured in distance units).
        let mut pick: Option<(usize, f64)> = None;
        let mut worst = 0.0;
        for i in 0..total {
            if active.contains(&i) || norms[i] == 0.0 {
                continue;
            }
            let b = problem.bounds[i];
            let s = problem.slack(i, &x);
            let tol = 1e-12 * (1.0 + b.rhs.abs());
            if b.equality {
                if s.abs() > tol {
                    pick = Some((i, if s > 0.0 { -1.0 } else { 1.0 }));
                    break;
                }
            } else if s < -tol && s / norms[i] < worst {
                worst = s / norms[i];
                pick = Some((i, 1.0));
            }
        }
        let Some((p, sgn)) = pick else {
            return Ok(ActiveSetOutcome { x, active, duals, iterations });
        };
        let np = problem.normal(p) * sgn;
        let bp = problem.bounds[p].rhs * sgn;
        let v = &linv * &np;
        let mut u_plus = duals.clone();
        u_plus.push(0.0);

        loop {
            iterations += 1;
            if iterations > settings.max_iterations {
                return Err(Error::NotConverged {
                    iterations,
                    stationarity: f64::NAN,
                    primal: -(np.dot(&x) - bp),
                    dual: f64::NAN,
                });
            }
            let k = active.len();
            let (z, r) = if k == 0 {
                (linv.transpose() * &v, DVector::zeros(0))
            } else {
                let mut nmat = DMatrix::zeros(n, k);
                for (c, &i) in active.iter().enumerate() {
                    nmat.set_column(c, &(problem.normal(i) * orient[c]));
                }
                let y = &linv * nmat;
                let qr = y.qr();
                let q1 = qr.q();
                let rr = qr.r();
                let d1 = q1.transpose() * &v;
                let v2 = &v - &q1 * &d1;
                let r = rr
                    .solve_upper_triangular(&d1)
                    .ok_or_else(|| Error::Singular("active constraints are dependent".into()))?;
                (linv.transpose() * v2, r)
            };
            let slack = np.dot(&x) - bp;
            let znp = z.dot(&np);

            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for j in 0..k {
                if problem.bounds[active[j]].equality {
                    continue;
                }
                if r[j] > 1e-14 {
                    let ratio = u_plus[j] / r[j];
                    if ratio < t1 {
                        t1 = ratio;
                        drop = Some(j);
                    }
                }
            }
            let t2 = if znp > 1e-14 * v.norm_squared() { -slack / znp } else { f64::INFINITY };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Err(Error::Infeasible);
            }
            for j in 0..k {
                u_plus[j] -= t * r[j];
            }
            u_plus[k] += t;
            if t2.is_finite() {
                x += &z * t;
            }
            if t2 <= t1 {
                active.push(p);
                orient.push(sgn);
                duals = u_plus;
                break;
            }
            let j = drop.expect("partial step always has a blocking constraint");
            active.remove(j);
            orient.remove(j);
            u_plus.remove(j);
        }
        // Equalities may have entered with flipped orientation; fold the
        // sign into the multiplier so `duals` refer to the stored bounds.
        for c in 0..active.len() {
            if orient[c] < 0.0 {
                duals[c] = -duals[c];
                orient[c] = 1.0;
            }
        }
    }
}

fn proximal(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    problem: &Problem,
    lmax: f64,
    settings: &QpSettings,
) -> Result<(DVector<f64>, Vec<usize>, Vec<f64>, usize)> {
    let n = q.len();
    let rho = 1e-3 * lmax.max(1.0);
    let g = p + DMatrix::identity(n, n) * rho;
    let mut x = DVector::zeros(n);
    let mut total_iterations = 0;
    let mut last = None;
    for _ in 0..settings.max_proximal_rounds {
        let shifted = q - &x * rho;
        let out = dual_active_set(&g, &shifted, problem, settings)?;
        total_iterations += out.iterations;
        let step = (&out.x - &x).amax();
        x = out.x.clone();
        if let Some((px, pu)) = polish(p, q, problem, &out.active) {
            if residuals(p, q, problem, &px, &out.active, &pu).max() <= settings.tolerance {
                return Ok((px, out.active, pu, total_iterations));
            }
        }
        let done = step <= settings.tolerance * 1e-2;
        last = Some((out.x, out.active, out.duals));
        if done {
            break;
        }
    }
    let (x, active, duals) = last.ok_or_else(|| Error::Singular("no proximal rounds".into()))?;
    Ok((x, active, duals, total_iterations))
}

/// Solves the equality-constrained KKT system for a fixed active set.
fn polish(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    problem: &Problem,
    active: &[usize],
) -> Option<(DVector<f64>, Vec<f64>)> {
    let n = q.len();
    let k = active.len();
    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(p);
    let mut rhs = DVector::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(&(-q));
    for (c, &i) in active.iter().enumerate() {
        let ni = problem.normal(i);
        for r in 0..n {
            kkt[(r, n + c)] = -ni[r];
            kkt[(n + c, r)] = ni[r];
        }
        rhs[n + c] = problem.bounds[i].rhs;
    }
    let sol = kkt.lu().solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let x = sol.rows(0, n).into_owned();
    let u = sol.rows(n, k).iter().cloned().collect();
    Some((x, u))
}

fn residuals(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    problem: &Problem,
    x: &DVector<f64>,
    active: &[usize],
    duals: &[f64],
) -> KktResiduals {
    let mut grad = p * x + q;
    for (c, &i) in active.iter().enumerate() {
        grad -= problem.normal(i) * duals[c];
    }
    let mut primal: f64 = 0.0;
    for i in 0..problem.bounds.len() {
        let s = problem.slack(i, x);
        let viol = if problem.bounds[i].equality { s.abs() } else { (-s).max(0.0) };
        primal = primal.max(viol);
    }
    let mut dual: f64 = 0.0;
    let mut comp: f64 = 0.0;
    for (c, &i) in active.iter().enumerate() {
        if !problem.bounds[i].equality {
            dual = dual.max(-duals[c]);
            comp = comp.max((duals[c] * problem.slack(i, x)).abs());
        }
    }
    KktResiduals { stationarity: grad.amax(), primal, dual, complementarity: comp }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unbounded(m: usize) -> (DVector<f64>, DVector<f64>) {
        (DVector::from_element(m, f64::NEG_INFINITY), DVector::from_element(m, f64::INFINITY))
    }

    #[test]
    fn unconstrained_identity() {
        let p = DMatrix::identity(3, 3);
        let q = DVector::from_vec(vec![-2.0, 0.0, 0.0]);
        let a = DMatrix::zeros(0, 3);
        let (l, u) = unbounded(0);
        let s = solve_constrained_qp(&p, &q, &a, &l, &u).unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-12);
        // Minimizer of ½‖x‖² − 2x₀ is 2e₁; the e₁-with-unit-P example uses q = −e₁.
        let q1 = DVector::from_vec(vec![-1.0, 0.0, 0.0]);
        let s1 = solve_constrained_qp(&p, &q1, &a, &l, &u).unwrap();
        assert!((s1.x - DVector::from_vec(vec![1.0, 0.0, 0.0])).amax() < 1e-12);
    }

    #[test]
    fn one_d_clamp() {
        // (x − 2)² = x² − 4x + 4 → P = 2, q = −4, with x ≤ 1.
        let p = DMatrix::from_element(1, 1, 2.0);
        let q = DVector::from_element(1, -4.0);
        let a = DMatrix::from_element(1, 1, 1.0);
        let s = solve_constrained_qp(
            &p,
            &q,
            &a,
            &DVector::from_element(1, f64::NEG_INFINITY),
            &DVector::from_element(1, 1.0),
        )
        .unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12);
        assert_eq!(s.active_rows, vec![0]);
        assert!((s.multipliers[0] + 2.0).abs() < 1e-10);
    }

    #[test]
    fn equality_rows() {
        let p = DMatrix::identity(2, 2);
        let q = DVector::zeros(2);
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_element(1, 2.0);
        let s = solve_constrained_qp(&p, &q, &a, &b, &b).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
        let nb = DVector::from_element(1, -2.0);
        let s = solve_constrained_qp(&p, &q, &a, &nb, &nb).unwrap();
        assert!((s.x[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn detects_indefinite() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let q = DVector::zeros(2);
        let a = DMatrix::zeros(0, 2);
        let (l, u) = unbounded(0);
        assert!(matches!(
            solve_constrained_qp(&p, &q, &a, &l, &u),
            Err(Error::NotPositiveSemidefinite(_))
        ));
    }

    #[test]
    fn detects_infeasible() {
        let p = DMatrix::identity(1, 1);
        let q = DVector::zeros(1);
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let l = DVector::from_vec(vec![1.0, f64::NEG_INFINITY]);
        let u = DVector::from_vec(vec![f64::INFINITY, 0.0]);
        assert!(matches!(solve_constrained_qp(&p, &q, &a, &l, &u), Err(Error::Infeasible)));
    }

    #[test]
    fn singular_hessian_with_box() {
        // Linear objective over a box: minimum at a vertex.
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let q = DVector::from_vec(vec![-3.0, 1.0]);
        let a = DMatrix::identity(2, 2);
        let l = DVector::from_vec(vec![-1.0, -1.0]);
        let u = DVector::from_vec(vec![1.0, 1.0]);
        let s = solve_constrained_qp(&p, &q, &a, &l, &u).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-9 && (s.x[1] + 1.0).abs() < 1e-9, "{}", s.x);
        assert!(s.kkt.max() <= 1e-8);
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = DMatrix::from_fn(6, 6, |_, _| rng.random::<f64>() - 0.5);
        let p = b.transpose() * &b + DMatrix::identity(6, 6) * 0.1;
        let q = DVector::from_fn(6, |_, _| rng.random::<f64>() - 0.5);
        let a = DMatrix::from_fn(9, 6, |_, _| rng.random::<f64>() - 0.5);
        let l = DVector::from_element(9, -0.1);
        let u = DVector::from_element(9, 0.1);
        let s1 = solve_constrained_qp(&p, &q, &a, &l, &u).unwrap();
        let s2 = solve_constrained_qp(&p, &q, &a, &l, &u).unwrap();
        assert_eq!(s1.x, s2.x);
        assert!(s1.kkt.max() <= 1e-8);
    }
}

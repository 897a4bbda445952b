//! Least-distance programming on polyhedra.
//!
//! Everything here reduces to Lawson–Hanson: a nonnegative least-squares
//! solve on the dual gives the minimum-norm point of `{x | Gx ≥ h}` exactly
//! (up to roundoff), with a clean infeasibility signal. Projections onto
//! polyhedra and strictly convex QPs are thin wrappers around it.

use nalgebra::{DMatrix, DVector};

use crate::prelude::*;

/// `min ‖Ex − f‖` subject to `x ≥ 0`.
pub fn nnls(e: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    let (k, m) = e.shape();
    let mut x = DVector::zeros(m);
    let mut passive = vec![false; m];
    let scale = e.amax().max(1e-300) * f.amax().max(1.0);
    let tol = 1e-13 * scale * (k.max(m) as f64);
    let max_outer = 3 * m + 10;

    let mut w = e.tr_mul(&(f - e * &x));
    for _ in 0..max_outer {
        let cand = (0..m).filter(|&j| !passive[j] && w[j] > tol).max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(t) = cand else { break };
        passive[t] = true;
        let mut inner = 0;
        loop {
            inner += 1;
            let idx: Vec<usize> = (0..m).filter(|&j| passive[j]).collect();
            let z_p = least_squares_columns(e, &idx, f);
            if idx.iter().zip(z_p.iter()).all(|(_, &z)| z > 0.0) {
                x.fill(0.0);
                for (&j, &z) in idx.iter().zip(z_p.iter()) {
                    x[j] = z;
                }
                break;
            }
            if inner > m + 5 {
                // numerically stuck: keep the current feasible iterate
                break;
            }
            let mut alpha = f64::INFINITY;
            for (&j, &z) in idx.iter().zip(z_p.iter()) {
                if z <= 0.0 {
                    let denom = x[j] - z;
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            let mut z_full = DVector::zeros(m);
            for (&j, &z) in idx.iter().zip(z_p.iter()) {
                z_full[j] = z;
            }
            for j in 0..m {
                if passive[j] {
                    x[j] += alpha * (z_full[j] - x[j]);
                    if x[j] <= 1e-15 * (1.0 + z_full[j].abs()) {
                        x[j] = 0.0;
                        passive[j] = false;
                    }
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
        w = e.tr_mul(&(f - e * &x));
    }
    x
}

fn least_squares_columns(e: &DMatrix<f64>, cols: &[usize], f: &DVector<f64>) -> DVector<f64> {
    let k = e.nrows();
    let sub = DMatrix::from_fn(k, cols.len(), |i, j| e[(i, cols[j])]);
    let svd = sub.svd(true, true);
    let eps = 1e-13 * svd.singular_values.max().max(1e-300);
    svd.solve(f, eps).unwrap_or_else(|_| DVector::zeros(cols.len()))
}

/// Minimum-norm point of `{x | Gx ≥ h}`; `None` when the set is empty.
pub fn least_distance(g: &DMatrix<f64>, h: &DVector<f64>) -> Option<DVector<f64>> {
    let (m, n) = g.shape();
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let norm = g.row(i).norm();
        if norm <= 1e-300 {
            if h[i] > 0.0 {
                return None;
            }
            continue;
        }
        rows.push((i, 1.0 / norm));
    }
    if rows.is_empty() {
        return Some(DVector::zeros(n));
    }
    // E = [Gᵀ; hᵀ], f = e_{n+1}
    let mut e = DMatrix::zeros(n + 1, rows.len());
    for (c, &(i, s)) in rows.iter().enumerate() {
        for j in 0..n {
            e[(j, c)] = g[(i, j)] * s;
        }
        e[(n, c)] = h[i] * s;
    }
    let mut f = DVector::zeros(n + 1);
    f[n] = 1.0;
    let u = nnls(&e, &f);
    let r = &e * &u - &f;
    if r.norm() <= 1e-10 || r[n] >= -1e-12 {
        return None;
    }
    let x = DVector::from_fn(n, |j, _| -r[j] / r[n]);
    // verify: a tiny violation is roundoff, a large one means incompatible rows
    let worst = rows
        .iter()
        .map(|&(i, s)| (h[i] - g.row(i).transpose().dot(&x)) * s)
        .fold(f64::NEG_INFINITY, f64::max);
    if worst > 1e-7 * (1.0 + x.norm()) {
        return None;
    }
    Some(x)
}

/// Euclidean projection of `y` onto `{x | Ax ≤ b}`.
pub fn project_onto_polyhedron(a: &DMatrix<f64>, b: &DVector<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    // x = y + z, min ‖z‖ s.t. -A z ≥ -(b - A y)
    let g = -a;
    let h = -(b - a * y);
    least_distance(&g, &h).map(|z| y + z)
}

/// `min gᵀp + ½pᵀBp` subject to `Ep ≤ f`, with `B` positive definite.
///
/// Primal active set on the KKT system, started from a feasible point (the
/// origin when `f ≥ 0`, otherwise its projection). Working directly with `B`
/// keeps the step accurate when `B` is badly conditioned.
pub fn solve_qp(b: &DMatrix<f64>, g: &DVector<f64>, e: &DMatrix<f64>, f: &DVector<f64>) -> Option<DVector<f64>> {
    let n = b.nrows();
    let m = e.nrows();
    b.clone().cholesky()?;
    let mut p = if f.iter().all(|v| *v >= 0.0) {
        DVector::zeros(n)
    } else {
        project_onto_polyhedron(e, f, &DVector::zeros(n))?
    };
    let norms: Vec<f64> = (0..m).map(|i| e.row(i).norm()).collect();
    let mut work: Vec<usize> = Vec::new();
    for _ in 0..10 * (m + n + 1) {
        let k = work.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(b);
        for (c, &i) in work.iter().enumerate() {
            for j in 0..n {
                kkt[(n + c, j)] = e[(i, j)];
                kkt[(j, n + c)] = e[(i, j)];
            }
        }
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&(-(b * &p + g)));
        let sol = kkt.lu().solve(&rhs)?;
        let d = sol.rows(0, n).into_owned();
        if !d.iter().all(|v| v.is_finite()) {
            return None;
        }
        let at_minimizer = k == n || d.amax() <= 1e-12 * (1.0 + p.amax());
        let mut alpha = 1.0;
        let mut blocking = None;
        let dn = d.norm();
        for i in 0..m {
            if work.contains(&i) {
                continue;
            }
            let ed = (e.row(i) * &d)[0];
            if ed > 1e-13 * norms[i] * dn {
                let room = (f[i] - (e.row(i) * &p)[0]).max(0.0);
                let a = room / ed;
                if a < alpha {
                    alpha = a;
                    blocking = Some(i);
                }
            }
        }
        if at_minimizer {
            blocking = None;
        } else {
            p += &d * alpha;
        }
        if blocking.is_none() {
            // minimizer on the working set: drop a row with a negative
            // multiplier (lowest index first, which rules out cycling)
            let lam = sol.rows(n, k);
            // multipliers of normalized rows, against the gradient scale
            let floor = -1e-12 * (1.0 + g.amax() + (b * &p).amax());
            match (0..k).filter(|&c| lam[c] * norms[work[c]] < floor).min_by_key(|&c| work[c]) {
                Some(c) => {
                    work.remove(c);
                }
                None => return Some(p),
            }
        }
        if let Some(i) = blocking {
            if !independent(e, &work, i) {
                return None;
            }
            work.push(i);
        }
    }
    None
}

/// True when row `i` of `e` is not in the span of the rows in `work`.
fn independent(e: &DMatrix<f64>, work: &[usize], i: usize) -> bool {
    if work.is_empty() {
        return true;
    }
    let n = e.ncols();
    let a = DMatrix::from_fn(n, work.len(), |r, c| e[(work[c], r)]);
    let row = e.row(i).transpose();
    let coef = match a.clone().svd(true, true).solve(&row, 1e-12) {
        Ok(c) => c,
        Err(_) => return true,
    };
    (a * coef - &row).norm() > 1e-9 * row.norm()
}

//! Maximum-volume inscribed ellipsoids, Chebyshev centers, and metric
//! projections onto polytopes.

use nalgebra::{DMatrix, DVector};

use crate::geometry::{HPolyhedron, Hyperellipsoid};
use crate::lp::{LinearProgram, LpOutcome};
use crate::prelude::*;
use crate::qp::least_distance;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MvieOptions {
    /// Factor applied to the barrier weight between stages.
    pub reduction: f64,
    pub initial_weight: f64,
    /// Stop a stage once half the squared Newton decrement falls below this.
    pub newton_tol: f64,
    pub max_newton_steps: usize,
    /// Stop once the barrier duality measure `2·m·μ` falls below this.
    pub final_tol: f64,
}

impl Default for MvieOptions {
    fn default() -> Self {
        MvieOptions { reduction: 0.2, initial_weight: 1.0, newton_tol: 1e-9, max_newton_steps: 50, final_tol: 1e-8 }
    }
}

impl MvieOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.initial_weight, self.newton_tol, self.final_tol].iter().all(|v| *v > 0.0);
        if !positive || !(self.reduction > 0.0 && self.reduction < 1.0) || self.max_newton_steps == 0 {
            return Err(Error::InvalidOptions(format!("invalid ellipsoid solver options {self:?}")));
        }
        Ok(())
    }
}

/// Center and radius of the largest ball in `P`. A radius `≤ 0` means the
/// interior is empty (`−∞` when the rows are outright inconsistent).
pub fn chebyshev_center(p: &HPolyhedron) -> Result<(DVector<f64>, f64)> {
    let n = p.ambient_dim();
    let mut cost = vec![0.0; n + 1];
    cost[n] = 1.0;
    let mut lp = LinearProgram::maximize(cost);
    for i in 0..p.num_faces() {
        let a = p.a().row(i);
        let mut row: Vec<f64> = a.iter().copied().collect();
        row.push(a.norm());
        lp.add_leq(row, p.b()[i]);
    }
    match lp.solve()? {
        LpOutcome::Optimal { x, .. } => Ok((DVector::from_column_slice(&x[..n]), x[n])),
        LpOutcome::Unbounded => Err(Error::Unbounded),
        LpOutcome::Infeasible => Ok((DVector::zeros(n), f64::NEG_INFINITY)),
    }
}

/// Point of `Q` nearest to the center of `E` in the metric `CᵀC`, or `None`
/// when `Q` is empty.
pub fn closest_point_in_polytope_metric(e: &Hyperellipsoid, q: &HPolyhedron) -> Result<Option<DVector<f64>>> {
    crate::geometry::check_dim(e.dim(), q.ambient_dim())?;
    // x = d + C̃y turns the cost into ‖y‖²
    let ct = e.inverse_factor()?;
    let act = q.a() * &ct;
    let slack = q.b() - q.a() * e.center();
    Ok(least_distance(&(-act), &(-slack)).map(|y| e.center() + ct * y))
}

/// Lower-triangular factor plus center, flattened as `[L entries…, d…]`.
struct Layout {
    n: usize,
    /// `index[j][k]` for `j ≥ k`.
    index: Vec<Vec<usize>>,
    num_l: usize,
}

impl Layout {
    fn new(n: usize) -> Self {
        let mut index = vec![vec![usize::MAX; n]; n];
        let mut c = 0;
        for (j, row) in index.iter_mut().enumerate() {
            for slot in row.iter_mut().take(j + 1) {
                *slot = c;
                c += 1;
            }
        }
        Layout { n, index, num_l: c }
    }

    fn len(&self) -> usize {
        self.num_l + self.n
    }

    fn factor(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |j, k| if j >= k { theta[self.index[j][k]] } else { 0.0 })
    }

    fn center(&self, theta: &DVector<f64>) -> DVector<f64> {
        theta.rows(self.num_l, self.n).into_owned()
    }
}

struct Barrier<'a> {
    layout: Layout,
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
}

impl Barrier<'_> {
    /// `−log det L − μ Σ log(sᵢ² − ‖Lᵀaᵢ‖²)`, or `None` outside the domain.
    fn value(&self, theta: &DVector<f64>, mu: f64) -> Option<f64> {
        let n = self.layout.n;
        let l = self.layout.factor(theta);
        let d = self.layout.center(theta);
        let mut f = 0.0;
        for k in 0..n {
            if !(l[(k, k)] > 0.0) {
                return None;
            }
            f -= l[(k, k)].ln();
        }
        for i in 0..self.a.nrows() {
            let a = self.a.row(i).transpose();
            let s = self.b[i] - a.dot(&d);
            let phi = s * s - l.tr_mul(&a).norm_squared();
            if !(s > 0.0 && phi > 0.0) {
                return None;
            }
            f -= mu * phi.ln();
        }
        f.is_finite().then_some(f)
    }

    fn derivatives(&self, theta: &DVector<f64>, mu: f64) -> (DVector<f64>, DMatrix<f64>) {
        let lay = &self.layout;
        let (n, p) = (lay.n, lay.len());
        let l = lay.factor(theta);
        let d = lay.center(theta);
        let mut g = DVector::zeros(p);
        let mut h = DMatrix::zeros(p, p);
        for k in 0..n {
            let idx = lay.index[k][k];
            g[idx] -= 1.0 / l[(k, k)];
            h[(idx, idx)] += 1.0 / (l[(k, k)] * l[(k, k)]);
        }
        // rows of M: ∂s/∂θ then ∂u_k/∂θ, with u = Lᵀa
        let mut rows = vec![DVector::<f64>::zeros(p); n + 1];
        for i in 0..self.a.nrows() {
            let a = self.a.row(i).transpose();
            let s = self.b[i] - a.dot(&d);
            let u = l.tr_mul(&a);
            let phi = s * s - u.norm_squared();
            for r in rows.iter_mut() {
                r.fill(0.0);
            }
            for j in 0..n {
                rows[0][lay.num_l + j] = -a[j];
                for k in 0..=j {
                    rows[k + 1][lay.index[j][k]] = a[j];
                }
            }
            // w = Mᵀ J z
            let mut w = &rows[0] * s;
            for k in 0..n {
                w.axpy(-u[k], &rows[k + 1], 1.0);
            }
            g.axpy(-2.0 * mu / phi, &w, 1.0);
            h.ger(4.0 * mu / (phi * phi), &w, &w, 1.0);
            h.ger(-2.0 * mu / phi, &rows[0], &rows[0], 1.0);
            for r in rows.iter().skip(1) {
                h.ger(2.0 * mu / phi, r, r, 1.0);
            }
        }
        (g, h)
    }
}

fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> Option<DVector<f64>> {
    let scale = h.diagonal().amax().max(1e-300);
    let mut reg = 0.0;
    for _ in 0..8 {
        let mut hr = h.clone();
        for i in 0..hr.nrows() {
            hr[(i, i)] += reg;
        }
        if let Some(ch) = hr.cholesky() {
            let step = -ch.solve(g);
            if step.iter().all(|v| v.is_finite()) {
                return Some(step);
            }
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
    }
    None
}

/// Maximum-volume ellipsoid inscribed in a bounded polytope with nonempty
/// interior, by barrier Newton on a Cholesky-factor parameterization.
pub fn max_inscribed_ellipsoid(p: &HPolyhedron, opts: &MvieOptions) -> Result<Hyperellipsoid> {
    opts.validate()?;
    let n = p.ambient_dim();
    let (center, radius) = chebyshev_center(p)?;
    if !(radius > 1e-10) {
        return Err(Error::EmptyInterior { radius });
    }
    if !p.is_bounded()? {
        return Err(Error::Unbounded);
    }
    // normalized rows, zero rows dropped (they are implied by a positive radius)
    let keep: Vec<usize> = (0..p.num_faces()).filter(|&i| p.a().row(i).norm() > 1e-300).collect();
    let a = DMatrix::from_fn(keep.len(), n, |r, j| p.a()[(keep[r], j)] / p.a().row(keep[r]).norm());
    let b = DVector::from_fn(keep.len(), |r, _| p.b()[keep[r]] / p.a().row(keep[r]).norm());
    let m = keep.len();

    let layout = Layout::new(n);
    let mut theta = DVector::zeros(layout.len());
    for k in 0..n {
        theta[layout.index[k][k]] = 0.9 * radius;
    }
    theta.rows_mut(layout.num_l, n).copy_from(&center);
    let barrier = Barrier { layout, a: &a, b: &b };

    let mut mu = opts.initial_weight;
    loop {
        for _ in 0..opts.max_newton_steps {
            let Some(f0) = barrier.value(&theta, mu) else {
                return Err(Error::Numerical("ellipsoid iterate left the barrier domain".into()));
            };
            let (g, h) = barrier.derivatives(&theta, mu);
            let Some(step) = newton_direction(&g, &h) else { break };
            let decrement = -g.dot(&step);
            if !(decrement > 2.0 * opts.newton_tol) {
                break;
            }
            let mut t = 1.0;
            let mut moved = false;
            while t > 1e-12 {
                let cand = &theta + &step * t;
                if let Some(f1) = barrier.value(&cand, mu) {
                    if f1 <= f0 - 0.25 * t * decrement {
                        theta = cand;
                        moved = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if 2.0 * m as f64 * mu <= opts.final_tol {
            break;
        }
        mu *= opts.reduction;
    }

    let l = barrier.layout.factor(&theta);
    let d = barrier.layout.center(&theta);
    let eig = (&l * l.transpose()).symmetric_eigen();
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let c_tilde = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
    let c_tilde = (&c_tilde + c_tilde.transpose()) * 0.5;
    Hyperellipsoid::from_shape_factor(&c_tilde, d)
}

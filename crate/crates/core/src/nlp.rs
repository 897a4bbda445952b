//! Local solver for the counterexample programs.
//!
//! The problems have a convex quadratic cost, linear inequalities, variable
//! bounds, a few convex quadratic inequalities, and a small number of smooth
//! nonlinear equalities (the coincidence of two points) or inequalities.
//! Linear rows and bounds are kept explicit: every iterate satisfies them.
//! Everything else goes into an augmented Lagrangian whose inner problems are
//! solved by a projected quasi-Newton method.

use nalgebra::{DMatrix, DVector};

use crate::geometry::{membership_constraints, HPolyhedron, Hyperellipsoid, Membership};
use crate::kinematics::Scene;
use crate::prelude::*;
use crate::qp::{project_onto_polyhedron, solve_qp};
use crate::{Error, Result};

/// Vector-valued smooth map with its Jacobian.
pub trait SmoothFunction {
    fn len(&self) -> usize;

    fn evaluate(&self, x: &DVector<f64>, values: &mut DVector<f64>, jacobian: &mut DMatrix<f64>) -> Result<()>;
}

/// `‖Sx + s‖² ≤ r²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticConstraint {
    pub s: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub radius: f64,
}

impl QuadraticConstraint {
    /// `(‖Sx+s‖² − r²) / 2r`, which is close to the distance outside the ball.
    fn scaled(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let y = &self.s * x + &self.offset;
        let value = (y.norm_squared() - self.radius * self.radius) / (2.0 * self.radius);
        (value, self.s.tr_mul(&y) / self.radius)
    }
}

/// `minimize (x−c)ᵀH(x−c)` subject to `Gx ≤ h`, quadratic inequalities,
/// `r(x) = 0`, `c(x) ≤ 0`, and `lower ≤ x ≤ upper`.
pub struct NlpProblem<'a> {
    pub hessian: DMatrix<f64>,
    pub center: DVector<f64>,
    pub lin_a: DMatrix<f64>,
    pub lin_b: DVector<f64>,
    pub quadratic: Vec<QuadraticConstraint>,
    pub equalities: Option<Box<dyn SmoothFunction + 'a>>,
    pub inequalities: Option<Box<dyn SmoothFunction + 'a>>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl<'a> NlpProblem<'a> {
    /// Unconstrained problem with free variables.
    pub fn new(hessian: DMatrix<f64>, center: DVector<f64>) -> Self {
        let m = center.len();
        NlpProblem {
            hessian,
            center,
            lin_a: DMatrix::zeros(0, m),
            lin_b: DVector::zeros(0),
            quadratic: Vec::new(),
            equalities: None,
            inequalities: None,
            lower: DVector::from_element(m, f64::NEG_INFINITY),
            upper: DVector::from_element(m, f64::INFINITY),
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.dim();
        let dims = [
            (m, self.hessian.nrows()),
            (m, self.hessian.ncols()),
            (m, self.lin_a.ncols()),
            (self.lin_a.nrows(), self.lin_b.len()),
            (m, self.lower.len()),
            (m, self.upper.len()),
        ];
        for (e, f) in dims {
            crate::geometry::check_dim(e, f)?;
        }
        for q in &self.quadratic {
            crate::geometry::check_dim(m, q.s.ncols())?;
            crate::geometry::check_dim(q.s.nrows(), q.offset.len())?;
            if !(q.radius > 0.0) {
                return Err(Error::InvalidOptions(format!("quadratic constraint radius {} must be positive", q.radius)));
            }
        }
        let asym = (&self.hessian - self.hessian.transpose()).amax();
        if asym > 1e-12 {
            return Err(Error::InvalidOptions(format!("cost matrix not symmetric (defect {asym:e})")));
        }
        if (0..m).any(|i| self.lower[i] > self.upper[i]) {
            return Err(Error::InvalidOptions("variable bounds inverted".into()));
        }
        Ok(())
    }

    pub fn cost(&self, x: &DVector<f64>) -> f64 {
        let e = x - &self.center;
        e.dot(&(&self.hessian * &e))
    }

    /// Largest violation over all constraints at `x`; quadratic inequalities
    /// are measured as `‖Sx+s‖ − r`.
    pub fn max_violation(&self, x: &DVector<f64>) -> Result<f64> {
        let mut v: f64 = 0.0;
        for i in 0..self.dim() {
            v = v.max(self.lower[i] - x[i]).max(x[i] - self.upper[i]);
        }
        if self.lin_a.nrows() > 0 {
            v = v.max((&self.lin_a * x - &self.lin_b).max());
        }
        for q in &self.quadratic {
            v = v.max((&q.s * x + &q.offset).norm() - q.radius);
        }
        for (func, equality) in [(&self.equalities, true), (&self.inequalities, false)] {
            if let Some(func) = func {
                let mut vals = DVector::zeros(func.len());
                let mut jac = DMatrix::zeros(func.len(), self.dim());
                func.evaluate(x, &mut vals, &mut jac)?;
                for r in vals.iter() {
                    v = v.max(if equality { r.abs() } else { *r });
                }
            }
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    FeasibleOptimum,
    /// Feasible, but the optimality test was not passed.
    Feasible,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Final iterate (the optimum when `status` is `FeasibleOptimum`).
    pub x: DVector<f64>,
    /// Max-norm constraint violation at `x`.
    pub max_violation: f64,
    /// Outer iterations used.
    pub iterations: usize,
}

impl SolveOutcome {
    /// A point satisfying every constraint to `tol`, whatever the status.
    pub fn feasible_point(&self, tol: f64) -> Option<&DVector<f64>> {
        (self.status != SolveStatus::Infeasible && self.max_violation <= tol).then_some(&self.x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { feas_tol: 1e-6, opt_tol: 1e-6, max_outer: 50, max_inner: 100 }
    }
}

const RHO_INITIAL: f64 = 10.0;
const RHO_GROWTH: f64 = 10.0;
const RHO_MAX: f64 = 1e8;
const ARMIJO: f64 = 1e-4;

struct Eval {
    f: f64,
    grad_f: DVector<f64>,
    r: DVector<f64>,
    jr: DMatrix<f64>,
    c: DVector<f64>,
    jc: DMatrix<f64>,
}

impl Eval {
    fn violation(&self) -> f64 {
        let eq = self.r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        self.c.iter().fold(eq, |a, v| a.max(*v))
    }
}

struct Multipliers {
    lambda: DVector<f64>,
    mu: DVector<f64>,
    rho: f64,
}

/// The problem restricted to variables whose bounds are not pinned.
#[derive(Clone)]
struct Reduced<'p, 'a> {
    problem: &'p NlpProblem<'a>,
    free: Vec<usize>,
    base: DVector<f64>,
    e: DMatrix<f64>,
    f: DVector<f64>,
    /// Cost multiplier bringing the Hessian to unit scale, so the penalty
    /// schedule does not depend on how tight the metric is.
    cost_scale: f64,
}

impl<'p, 'a> Reduced<'p, 'a> {
    /// `None` when the linear rows are inconsistent with the pinned values.
    fn new(problem: &'p NlpProblem<'a>, x0: &DVector<f64>) -> Option<Self> {
        let m = problem.dim();
        let mut base = x0.clone();
        let mut free = Vec::new();
        for i in 0..m {
            base[i] = base[i].clamp(problem.lower[i], problem.upper[i]);
            if problem.lower[i] < problem.upper[i] {
                free.push(i);
            }
        }
        let nf = free.len();
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for k in 0..problem.lin_a.nrows() {
            let mut rhs = problem.lin_b[k];
            for i in 0..m {
                if problem.lower[i] == problem.upper[i] {
                    rhs -= problem.lin_a[(k, i)] * base[i];
                }
            }
            let row: Vec<f64> = free.iter().map(|&i| problem.lin_a[(k, i)]).collect();
            rows.push((row, rhs));
        }
        for (j, &i) in free.iter().enumerate() {
            if problem.upper[i].is_finite() {
                let mut row = vec![0.0; nf];
                row[j] = 1.0;
                rows.push((row, problem.upper[i]));
            }
            if problem.lower[i].is_finite() {
                let mut row = vec![0.0; nf];
                row[j] = -1.0;
                rows.push((row, -problem.lower[i]));
            }
        }
        let mut kept = Vec::new();
        for (row, rhs) in rows {
            if row.iter().all(|v| *v == 0.0) {
                if rhs < -1e-12 {
                    return None;
                }
            } else {
                kept.push((row, rhs));
            }
        }
        let e = DMatrix::from_fn(kept.len(), nf, |r, c| kept[r].0[c]);
        let f = DVector::from_fn(kept.len(), |r, _| kept[r].1);
        let h_max = problem.hessian.amax();
        let cost_scale = if h_max > 0.0 { 1.0 / h_max } else { 1.0 };
        Some(Reduced { problem, free, base, e, f, cost_scale })
    }

    fn expand(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut x = self.base.clone();
        for (j, &i) in self.free.iter().enumerate() {
            x[i] = z[j];
        }
        x
    }

    fn restrict(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.free.len(), |j, _| x[self.free[j]])
    }

    fn restrict_cols(&self, j: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(j.nrows(), self.free.len(), |r, c| j[(r, self.free[c])])
    }

    fn project(&self, y: &DVector<f64>) -> Option<DVector<f64>> {
        if self.e.nrows() == 0 {
            return Some(y.clone());
        }
        project_onto_polyhedron(&self.e, &self.f, y)
    }

    fn evaluate(&self, z: &DVector<f64>) -> Result<Eval> {
        let p = self.problem;
        let x = self.expand(z);
        let m = p.dim();
        let diff = &x - &p.center;
        let hd = &p.hessian * &diff * self.cost_scale;
        let f = diff.dot(&hd);
        let grad_f = self.restrict(&(hd * 2.0));

        let (r, jr) = match &p.equalities {
            Some(func) => {
                let mut vals = DVector::zeros(func.len());
                let mut jac = DMatrix::zeros(func.len(), m);
                func.evaluate(&x, &mut vals, &mut jac)?;
                (vals, self.restrict_cols(&jac))
            }
            None => (DVector::zeros(0), DMatrix::zeros(0, self.free.len())),
        };

        let n_nl = p.inequalities.as_ref().map_or(0, |g| g.len());
        let nc = p.quadratic.len() + n_nl;
        let mut c = DVector::zeros(nc);
        let mut jc_full = DMatrix::zeros(nc, m);
        for (k, q) in p.quadratic.iter().enumerate() {
            let (v, g) = q.scaled(&x);
            c[k] = v;
            jc_full.row_mut(k).copy_from(&g.transpose());
        }
        if let Some(func) = &p.inequalities {
            let mut vals = DVector::zeros(n_nl);
            let mut jac = DMatrix::zeros(n_nl, m);
            func.evaluate(&x, &mut vals, &mut jac)?;
            let k0 = p.quadratic.len();
            c.rows_mut(k0, n_nl).copy_from(&vals);
            jc_full.rows_mut(k0, n_nl).copy_from(&jac);
        }
        let jc = self.restrict_cols(&jc_full);

        let finite = f.is_finite()
            && grad_f.iter().chain(r.iter()).chain(jr.iter()).chain(c.iter()).chain(jc.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite(format!("constraint or cost evaluation at x = {:?}", x.as_slice())));
        }
        Ok(Eval { f, grad_f, r, jr, c, jc })
    }
}

fn merit(ev: &Eval, mult: &Multipliers) -> (f64, DVector<f64>) {
    let rho = mult.rho;
    let mut phi = ev.f + mult.lambda.dot(&ev.r) + 0.5 * rho * ev.r.norm_squared();
    let mut grad = ev.grad_f.clone();
    if ev.r.len() > 0 {
        grad += ev.jr.tr_mul(&(&mult.lambda + &ev.r * rho));
    }
    if ev.c.len() > 0 {
        let shifted = DVector::from_fn(ev.c.len(), |i, _| (mult.mu[i] + rho * ev.c[i]).max(0.0));
        for i in 0..ev.c.len() {
            phi += (shifted[i] * shifted[i] - mult.mu[i] * mult.mu[i]) / (2.0 * rho);
        }
        grad += ev.jc.tr_mul(&shifted);
    }
    (phi, grad)
}

fn initial_hessian(problem: &NlpProblem, red: &Reduced, ev: &Eval, mult: &Multipliers) -> DMatrix<f64> {
    let nf = red.free.len();
    let h = DMatrix::from_fn(nf, nf, |a, b| 2.0 * red.cost_scale * problem.hessian[(red.free[a], red.free[b])]);
    let mut b = h;
    if ev.r.len() > 0 {
        b += ev.jr.tr_mul(&ev.jr) * mult.rho;
    }
    for i in 0..ev.c.len() {
        if mult.mu[i] + mult.rho * ev.c[i] > 0.0 {
            let g = ev.jc.row(i).transpose();
            b.ger(mult.rho, &g, &g, 1.0);
        }
    }
    let sigma = 1e-6 * (1.0 + b.diagonal().amax());
    for i in 0..nf {
        b[(i, i)] += sigma;
    }
    b
}

/// Projected quasi-Newton on the augmented Lagrangian with the linear rows
/// explicit. Returns the final iterate and its evaluation.
fn minimize_inner(red: &Reduced, z0: DVector<f64>, mult: &Multipliers, max_inner: usize) -> Result<(DVector<f64>, Eval)> {
    let mut z = z0;
    let mut ev = red.evaluate(&z)?;
    let (mut phi, mut grad) = merit(&ev, mult);
    let mut b = initial_hessian(red.problem, red, &ev, mult);
    for _ in 0..max_inner {
        // iterates may sit a rounding error outside a row; keep p = 0 feasible
        let slack = (&red.f - &red.e * &z).map(|v| v.max(0.0));
        let step = if red.e.nrows() == 0 {
            b.clone().cholesky().map(|ch| -ch.solve(&grad))
        } else {
            solve_qp(&b, &grad, &red.e, &slack)
        };
        let Some(p) = step.filter(|p| p.iter().all(|v| v.is_finite())) else {
            b = initial_hessian(red.problem, red, &ev, mult);
            continue;
        };
        let slope = grad.dot(&p);
        let scale = 1.0 + z.amax();
        if p.amax() <= 1e-13 * scale || slope >= -1e-16 * (1.0 + phi.abs()) {
            break;
        }
        // guard against a step that leaves the rows by more than roundoff
        let ep = &red.e * &p;
        let mut t: f64 = 1.0;
        for i in 0..ep.len() {
            if ep[i] > slack[i] + 1e-12 * scale {
                t = t.min(slack[i] / ep[i]);
            }
        }
        let mut accepted = None;
        while t > 1e-12 {
            let cand = &z + &p * t;
            let ev_c = red.evaluate(&cand)?;
            let (phi_c, grad_c) = merit(&ev_c, mult);
            if phi_c <= phi + ARMIJO * t * slope {
                accepted = Some((cand, ev_c, phi_c, grad_c));
                break;
            }
            t *= 0.5;
        }
        let Some((z_new, ev_new, phi_new, grad_new)) = accepted else { break };
        let s = &z_new - &z;
        let y = &grad_new - &grad;
        damped_bfgs(&mut b, &s, &y);
        let small = s.amax() <= 1e-14 * scale;
        z = z_new;
        ev = ev_new;
        phi = phi_new;
        grad = grad_new;
        if small {
            break;
        }
    }
    Ok((z, ev))
}

fn damped_bfgs(b: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) {
    let bs = &*b * s;
    let sbs = s.dot(&bs);
    if !(sbs > 1e-300) {
        return;
    }
    let sy = s.dot(y);
    let y = if sy >= 0.2 * sbs {
        y.clone()
    } else {
        let theta = 0.8 * sbs / (sbs - sy);
        y * theta + &bs * (1.0 - theta)
    };
    let sy = s.dot(&y);
    if !(sy > 1e-300) {
        return;
    }
    b.ger(1.0 / sy, &y, &y, 1.0);
    b.ger(-1.0 / sbs, &bs, &bs, 1.0);
}

/// Augmented-Lagrangian local solve from `x0` (clamped into the bounds and
/// projected onto the linear rows first).
///
/// An infeasible start first goes through a feasibility phase that drops the
/// cost; the cost phase then starts from the point it found. If the cost
/// phase ends without certifying optimality, the lowest-cost feasible iterate
/// seen is returned with status [`SolveStatus::Feasible`].
pub fn solve_local(problem: &NlpProblem, x0: &DVector<f64>, opts: &SolverOptions) -> Result<SolveOutcome> {
    problem.validate()?;
    crate::geometry::check_dim(problem.dim(), x0.len())?;
    let Some(red) = Reduced::new(problem, x0) else {
        return Ok(SolveOutcome { status: SolveStatus::Infeasible, x: x0.clone(), max_violation: f64::INFINITY, iterations: 0 });
    };
    let Some(mut z) = red.project(&red.restrict(&red.base)) else {
        return Ok(SolveOutcome { status: SolveStatus::Infeasible, x: red.base.clone(), max_violation: f64::INFINITY, iterations: 0 });
    };
    let mut used = 0;
    if red.evaluate(&z)?.violation() > opts.feas_tol {
        let phase1 = Reduced { cost_scale: 0.0, ..red.clone() };
        let run = augmented_lagrangian(&phase1, z, opts, opts.max_outer)?;
        used = run.iterations;
        if run.violation > opts.feas_tol {
            return Ok(SolveOutcome { status: run.status, x: red.expand(&run.z), max_violation: run.violation, iterations: used });
        }
        z = run.z;
    }
    let run = augmented_lagrangian(&red, z, opts, opts.max_outer)?;
    let iterations = used + run.iterations;
    let outcome = match (run.status, run.best) {
        (SolveStatus::FeasibleOptimum, _) | (_, None) => {
            SolveOutcome { status: run.status, x: red.expand(&run.z), max_violation: run.violation, iterations }
        }
        (_, Some((zb, vb))) => SolveOutcome { status: SolveStatus::Feasible, x: red.expand(&zb), max_violation: vb, iterations },
    };
    Ok(outcome)
}

struct AlRun {
    status: SolveStatus,
    z: DVector<f64>,
    violation: f64,
    iterations: usize,
    /// Lowest-cost iterate within the feasibility tolerance, with its violation.
    best: Option<(DVector<f64>, f64)>,
}

fn augmented_lagrangian(red: &Reduced, mut z: DVector<f64>, opts: &SolverOptions, max_outer: usize) -> Result<AlRun> {
    let ev0 = red.evaluate(&z)?;
    let mut mult = Multipliers { lambda: DVector::zeros(ev0.r.len()), mu: DVector::zeros(ev0.c.len()), rho: RHO_INITIAL };
    let mut prev_violation = f64::INFINITY;
    let mut violation = ev0.violation();
    let mut best: Option<(DVector<f64>, f64, f64)> = (violation <= opts.feas_tol).then(|| (z.clone(), violation, ev0.f));
    let finish = |status, z, violation, iterations, best: Option<(DVector<f64>, f64, f64)>| {
        Ok(AlRun { status, z, violation, iterations, best: best.map(|(zb, vb, _)| (zb, vb)) })
    };
    for outer in 1..=max_outer {
        let (z_new, ev) = minimize_inner(red, z, &mult, opts.max_inner)?;
        z = z_new;
        violation = ev.violation();
        if violation <= opts.feas_tol && red.cost_scale == 0.0 {
            return finish(SolveStatus::FeasibleOptimum, z, violation, outer, best);
        }
        if violation <= opts.feas_tol {
            if best.as_ref().is_none_or(|b| ev.f < b.2) {
                best = Some((z.clone(), violation, ev.f));
            }
            let (_, grad) = merit(&ev, &mult);
            let stationarity = match red.project(&(&z - &grad)) {
                Some(pz) => (pz - &z).amax() / ev.grad_f.amax().max(1.0),
                None => f64::INFINITY,
            };
            if stationarity <= opts.opt_tol {
                return finish(SolveStatus::FeasibleOptimum, z, violation, outer, best);
            }
        }
        mult.lambda += &ev.r * mult.rho;
        for i in 0..ev.c.len() {
            mult.mu[i] = (mult.mu[i] + mult.rho * ev.c[i]).max(0.0);
        }
        if violation > opts.feas_tol && violation > 0.25 * prev_violation {
            if mult.rho >= RHO_MAX {
                return finish(SolveStatus::Infeasible, z, violation, outer, best);
            }
            mult.rho = (mult.rho * RHO_GROWTH).min(RHO_MAX);
        }
        prev_violation = violation;
    }
    finish(SolveStatus::IterationLimit, z, violation, max_outer, best)
}

/// Metric cost block `(q−d)ᵀCᵀC(q−d)` embedded in an `m`-dimensional problem.
fn metric_cost(e: &Hyperellipsoid, m: usize) -> (DMatrix<f64>, DVector<f64>) {
    let n = e.dim();
    let g = e.metric();
    let mut h = DMatrix::zeros(m, m);
    h.view_mut((0, 0), (n, n)).copy_from(&((&g + g.transpose()) * 0.5));
    let mut c = DVector::zeros(m);
    c.rows_mut(0, n).copy_from(e.center());
    (h, c)
}

struct Coincidence<'s> {
    scene: &'s Scene,
    gi: usize,
    gj: usize,
}

impl SmoothFunction for Coincidence<'_> {
    fn len(&self) -> usize {
        2
    }

    fn evaluate(&self, x: &DVector<f64>, values: &mut DVector<f64>, jacobian: &mut DMatrix<f64>) -> Result<()> {
        let n = self.scene.num_joints();
        let q = &x.as_slice()[..n];
        let poses = self.scene.body_poses(q)?;
        let mut ji = DMatrix::zeros(2, n);
        let mut jj = DMatrix::zeros(2, n);
        let wi = self.scene.fk_point_jacobian_into(&poses, self.gi, [x[n], x[n + 1]], &mut ji, 0)?;
        let wj = self.scene.fk_point_jacobian_into(&poses, self.gj, [x[n + 2], x[n + 3]], &mut jj, 0)?;
        values[0] = wi[0] - wj[0];
        values[1] = wi[1] - wj[1];
        jacobian.fill(0.0);
        jacobian.view_mut((0, 0), (2, n)).copy_from(&(ji - jj));
        for (g, col, sign) in [(self.gi, n, 1.0), (self.gj, n + 2, -1.0)] {
            let frame = self.scene.geometry_frame_from(&poses, g)?;
            let (c, s) = frame.rotation();
            jacobian[(0, col)] = sign * c;
            jacobian[(1, col)] = sign * s;
            jacobian[(0, col + 1)] = -sign * s;
            jacobian[(1, col + 1)] = sign * c;
        }
        Ok(())
    }
}

/// The collision counterexample program for one pair: find `q ∈ P` closest to
/// the ellipsoid center (in its metric) at which the two geometries share a
/// point. Decision vector `(q, pˣ, pʸ)` with the points in body-local frames.
pub fn build_counterexample_problem<'s>(
    scene: &'s Scene,
    pair: usize,
    e: &Hyperellipsoid,
    p: &HPolyhedron,
) -> Result<NlpProblem<'s>> {
    let n = scene.num_joints();
    crate::geometry::check_dim(n, e.dim())?;
    crate::geometry::check_dim(n, p.ambient_dim())?;
    let &(gi, gj) = scene.pairs().get(pair).ok_or(Error::IndexOutOfRange { index: pair, len: scene.pairs().len() })?;
    let m = n + 4;
    let (h, c) = metric_cost(e, m);
    let mut prob = NlpProblem::new(h, c);

    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for i in 0..p.num_faces() {
        let mut a = DVector::zeros(m);
        a.rows_mut(0, n).copy_from(&p.a().row(i).transpose());
        rows.push((a, p.b()[i]));
    }
    for (g, col) in [(gi, n), (gj, n + 2)] {
        match membership_constraints(&scene.geometries()[g].shape) {
            Membership::Fixed(pt) => {
                prob.lower[col] = pt[0];
                prob.upper[col] = pt[0];
                prob.lower[col + 1] = pt[1];
                prob.upper[col + 1] = pt[1];
            }
            Membership::Ball { center, radius } => {
                let mut s = DMatrix::zeros(2, m);
                s[(0, col)] = 1.0;
                s[(1, col + 1)] = 1.0;
                prob.quadratic.push(QuadraticConstraint { s, offset: DVector::from_vec(vec![-center[0], -center[1]]), radius });
            }
            Membership::HalfPlanes(planes) => {
                for (nrm, off) in planes {
                    let mut a = DVector::zeros(m);
                    a[col] = nrm[0];
                    a[col + 1] = nrm[1];
                    rows.push((a, off));
                }
            }
        }
    }
    prob.lin_a = DMatrix::from_fn(rows.len(), m, |r, k| rows[r].0[k]);
    prob.lin_b = DVector::from_fn(rows.len(), |r, _| rows[r].1);
    let chain = scene.chain();
    for k in 0..n {
        prob.lower[k] = chain.lower()[k];
        prob.upper[k] = chain.upper()[k];
    }
    prob.equalities = Some(Box::new(Coincidence { scene, gi, gj }));
    Ok(prob)
}

/// Default first guess for a pair: the ellipsoid center clamped into the
/// joint limits, and the shape centroids.
pub fn default_initial_guess(scene: &Scene, pair: usize, center: &DVector<f64>) -> Result<DVector<f64>> {
    let n = scene.num_joints();
    let &(gi, gj) = scene.pairs().get(pair).ok_or(Error::IndexOutOfRange { index: pair, len: scene.pairs().len() })?;
    let mut x = DVector::zeros(n + 4);
    x.rows_mut(0, n).copy_from(&configuration_guess(scene, center));
    let ci = scene.geometries()[gi].shape.centroid();
    let cj = scene.geometries()[gj].shape.centroid();
    x[n] = ci[0];
    x[n + 1] = ci[1];
    x[n + 2] = cj[0];
    x[n + 3] = cj[1];
    Ok(x)
}

fn configuration_guess(scene: &Scene, q: &DVector<f64>) -> DVector<f64> {
    let chain = scene.chain();
    DVector::from_fn(q.len(), |k, _| q[k].clamp(chain.lower()[k], chain.upper()[k]))
}

/// `c(q) = −g(q) ≤ 0`, i.e. the search looks for a violation `g(q) ≥ 0`.
struct ViolationOf<'c> {
    constraint: &'c dyn crate::constraints::ConfigConstraint,
}

impl SmoothFunction for ViolationOf<'_> {
    fn len(&self) -> usize {
        1
    }

    fn evaluate(&self, x: &DVector<f64>, values: &mut DVector<f64>, jacobian: &mut DMatrix<f64>) -> Result<()> {
        let (g, grad) = self.constraint.evaluate(x)?;
        values[0] = -g;
        for j in 0..x.len() {
            jacobian[(0, j)] = -grad[j];
        }
        Ok(())
    }
}

/// The counterexample program for an extra constraint `g(q) ≤ 0`: find
/// `q ∈ P` closest to the ellipsoid center with `g(q) ≥ 0`.
pub fn build_constraint_counterexample_problem<'c>(
    constraint: &'c dyn crate::constraints::ConfigConstraint,
    e: &Hyperellipsoid,
    p: &HPolyhedron,
) -> Result<NlpProblem<'c>> {
    let n = e.dim();
    crate::geometry::check_dim(n, p.ambient_dim())?;
    let (h, c) = metric_cost(e, n);
    let mut prob = NlpProblem::new(h, c);
    prob.lin_a = p.a().clone();
    prob.lin_b = p.b().clone();
    prob.inequalities = Some(Box::new(ViolationOf { constraint }));
    Ok(prob)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::AngleSumBound;
    use crate::geometry::ConvexShape2D;
    use crate::kinematics::{PairSpec, PlanarChain, RigidTransform2D};
    use core::f64::consts::PI;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    struct Linear {
        row: Vec<f64>,
        rhs: f64,
    }

    impl SmoothFunction for Linear {
        fn len(&self) -> usize {
            1
        }

        fn evaluate(&self, x: &DVector<f64>, values: &mut DVector<f64>, jacobian: &mut DMatrix<f64>) -> Result<()> {
            values[0] = self.row.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>() - self.rhs;
            for (j, a) in self.row.iter().enumerate() {
                jacobian[(0, j)] = *a;
            }
            Ok(())
        }
    }

    pub(crate) fn one_link_scene() -> Scene {
        let chain = PlanarChain::new(vec![1.0], vec![-PI], vec![PI], RigidTransform2D::identity()).unwrap();
        Scene::new(
            chain,
            vec![(1, RigidTransform2D::identity(), ConvexShape2D::point([0.0, 0.0]))],
            vec![(RigidTransform2D::identity(), ConvexShape2D::disk([0.0, 1.0], 0.1).unwrap())],
            PairSpec::Auto,
        )
        .unwrap()
    }

    #[test]
    fn unconstrained_center_is_optimal() {
        let mut p = NlpProblem::new(DMatrix::identity(2, 2), v(&[0.3, -0.2]));
        p.lower = v(&[-1.0, -1.0]);
        p.upper = v(&[1.0, 1.0]);
        let out = solve_local(&p, &v(&[0.9, 0.9]), &SolverOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::FeasibleOptimum);
        assert!((&out.x - v(&[0.3, -0.2])).amax() < 1e-6);
    }

    #[test]
    fn equality_projection() {
        let mut p = NlpProblem::new(DMatrix::identity(2, 2), v(&[0.0, 0.0]));
        p.lower = v(&[-2.0, -2.0]);
        p.upper = v(&[2.0, 2.0]);
        p.equalities = Some(Box::new(Linear { row: vec![1.0, 0.0], rhs: 1.0 }));
        let out = solve_local(&p, &v(&[0.0, 0.5]), &SolverOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::FeasibleOptimum);
        assert!((&out.x - v(&[1.0, 0.0])).amax() < 1e-5);
        assert!(p.max_violation(&out.x).unwrap() <= 1e-6);
    }

    #[test]
    fn one_link_counterexample() {
        let scene = one_link_scene();
        let e = Hyperellipsoid::ball(v(&[0.0]), 0.01).unwrap();
        let p = HPolyhedron::from_bounds(&[-PI], &[PI]).unwrap();
        let prob = build_counterexample_problem(&scene, 0, &e, &p).unwrap();
        let x0 = default_initial_guess(&scene, 0, e.center()).unwrap();
        let out = solve_local(&prob, &x0, &SolverOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::FeasibleOptimum);
        let expect = 0.995f64.asin();
        assert!((out.x[0] - expect).abs() < 1e-4, "{}", out.x[0]);
        // grid oracle: smallest |q| on a 1e-5 grid with the tip inside the disk
        let mut best = f64::INFINITY;
        let steps = (2.0 * PI / 1e-5) as i64;
        for k in 0..=steps {
            let q = -PI + k as f64 * 1e-5;
            if 2.0 - 2.0 * q.sin() <= 0.01 && q.abs() < best.abs() {
                best = q;
            }
        }
        assert!((out.x[0] - best).abs() < 1e-4);
    }

    #[test]
    fn point_pairs_pin_membership() {
        let chain = PlanarChain::new(vec![1.0], vec![-PI], vec![PI], RigidTransform2D::identity()).unwrap();
        let scene = Scene::new(
            chain,
            vec![(1, RigidTransform2D::identity(), ConvexShape2D::point([0.0, 0.0]))],
            vec![(RigidTransform2D::identity(), ConvexShape2D::point([0.0, 1.0]))],
            PairSpec::Auto,
        )
        .unwrap();
        let e = Hyperellipsoid::ball(v(&[0.0]), 0.01).unwrap();
        let p = HPolyhedron::from_bounds(&[-PI], &[PI]).unwrap();
        let prob = build_counterexample_problem(&scene, 0, &e, &p).unwrap();
        assert!(prob.quadratic.is_empty());
        assert!((1..5).all(|k| prob.lower[k] == prob.upper[k]));
        let out = solve_local(&prob, &default_initial_guess(&scene, 0, e.center()).unwrap(), &SolverOptions::default()).unwrap();
        assert!(out.feasible_point(1e-6).is_some());
        assert!((out.x[0] - PI / 2.0).abs() < 1e-4);
    }

    #[test]
    fn disk_pair_census_and_zero_residual() {
        let chain = PlanarChain::new(vec![1.0], vec![-PI], vec![PI], RigidTransform2D::identity()).unwrap();
        let scene = Scene::new(
            chain,
            vec![(1, RigidTransform2D::identity(), ConvexShape2D::disk([0.0, 0.0], 0.1).unwrap())],
            vec![(RigidTransform2D::identity(), ConvexShape2D::disk([0.0, 1.0], 0.1).unwrap())],
            PairSpec::Auto,
        )
        .unwrap();
        let e = Hyperellipsoid::ball(v(&[0.0]), 0.01).unwrap();
        let p = HPolyhedron::from_bounds(&[-PI], &[PI]).unwrap();
        let prob = build_counterexample_problem(&scene, 0, &e, &p).unwrap();
        assert_eq!(prob.quadratic.len(), 2);
        let eq = prob.equalities.as_ref().unwrap();
        assert_eq!(eq.len(), 2);
        // q = π/2: the tip sits on the disk center; both local points at the centers
        let x = v(&[PI / 2.0, 0.0, 0.0, 0.0, 1.0]);
        let mut r = DVector::zeros(2);
        let mut j = DMatrix::zeros(2, 5);
        eq.evaluate(&x, &mut r, &mut j).unwrap();
        assert!(r.amax() < 1e-15);
    }

    #[test]
    fn coincidence_jacobian_matches_finite_differences() {
        let chain = PlanarChain::new(vec![1.0, 0.8], vec![-PI; 2], vec![PI; 2], RigidTransform2D::new(0.3, [0.2, 0.1])).unwrap();
        let scene = Scene::new(
            chain,
            vec![(2, RigidTransform2D::new(0.4, [-0.2, 0.1]), ConvexShape2D::rectangle(-0.1, -0.1, 0.1, 0.1).unwrap())],
            vec![(RigidTransform2D::new(0.7, [1.0, 1.0]), ConvexShape2D::disk([0.0, 0.0], 0.2).unwrap())],
            PairSpec::Auto,
        )
        .unwrap();
        let f = Coincidence { scene: &scene, gi: 0, gj: 1 };
        let x = v(&[0.4, -0.9, 0.05, -0.02, 0.1, 0.03]);
        let mut r = DVector::zeros(2);
        let mut j = DMatrix::zeros(2, 6);
        f.evaluate(&x, &mut r, &mut j).unwrap();
        for k in 0..6 {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[k] += 1e-6;
            xm[k] -= 1e-6;
            let (mut rp, mut rm) = (DVector::zeros(2), DVector::zeros(2));
            let mut tmp = DMatrix::zeros(2, 6);
            f.evaluate(&xp, &mut rp, &mut tmp).unwrap();
            f.evaluate(&xm, &mut rm, &mut tmp).unwrap();
            let fd = (rp - rm) / 2e-6;
            assert!((fd - j.column(k)).amax() < 1e-6);
        }
    }

    #[derive(Debug)]
    struct Shifted(f64);

    impl crate::constraints::ConfigConstraint for Shifted {
        fn evaluate(&self, q: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
            let mut g = DVector::zeros(q.len());
            g[0] = 1.0;
            Ok((q[0] - self.0, g))
        }

        fn describe(&self) -> String {
            "shifted".into()
        }
    }

    #[test]
    fn constraint_counterexamples() {
        let e = Hyperellipsoid::ball(v(&[0.0, 0.0]), 0.01).unwrap();
        let p = HPolyhedron::from_bounds(&[-2.0, -2.0], &[2.0, 2.0]).unwrap();
        let g = Shifted(1.0);
        let prob = build_constraint_counterexample_problem(&g, &e, &p).unwrap();
        let out = solve_local(&prob, e.center(), &SolverOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::FeasibleOptimum);
        assert!((&out.x - v(&[1.0, 0.0])).amax() < 1e-5);

        let never = Shifted(2.5);
        let prob = build_constraint_counterexample_problem(&never, &e, &p).unwrap();
        let out = solve_local(&prob, e.center(), &SolverOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Infeasible);
    }

    #[test]
    fn angle_sum_counterexample_matches_grid() {
        let e = Hyperellipsoid::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.5, 1.0]), v(&[0.0, 0.0])).unwrap();
        let p = HPolyhedron::from_bounds(&[-2.0, -2.0], &[2.0, 2.0]).unwrap();
        let g = AngleSumBound { target: 0.0, bound: 0.15 };
        let prob = build_constraint_counterexample_problem(&g, &e, &p).unwrap();
        let out = solve_local(&prob, &v(&[0.05, 0.0]), &SolverOptions::default()).unwrap();
        assert_eq!(out.status, SolveStatus::FeasibleOptimum);
        assert!(((out.x[0] + out.x[1]).abs() - 0.15).abs() < 1e-5);
        // grid oracle over the line q₁ + q₂ = ±0.15
        let mut best = f64::INFINITY;
        for k in 0..=400_000 {
            let t = -2.0 + k as f64 * 1e-5;
            for s in [0.15, -0.15] {
                best = best.min(e.metric_distance_sq(&v(&[t, s - t])));
            }
        }
        assert!((e.metric_distance_sq(&out.x) - best).abs() < 1e-6 * best.max(1.0));
    }

    #[test]
    fn non_finite_callbacks_are_errors() {
        struct Bad;
        impl SmoothFunction for Bad {
            fn len(&self) -> usize {
                1
            }
            fn evaluate(&self, _: &DVector<f64>, values: &mut DVector<f64>, _: &mut DMatrix<f64>) -> Result<()> {
                values[0] = f64::NAN;
                Ok(())
            }
        }
        let mut p = NlpProblem::new(DMatrix::identity(1, 1), v(&[0.0]));
        p.equalities = Some(Box::new(Bad));
        assert!(matches!(solve_local(&p, &v(&[0.0]), &SolverOptions::default()), Err(Error::NonFinite(_))));
    }
}

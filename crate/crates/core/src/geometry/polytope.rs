use nalgebra::{DMatrix, DVector};

use super::check_dim;
use crate::lp::{LinearProgram, LpOutcome};
use crate::prelude::*;
use crate::{Error, Result};

/// Halfspace `{x | a·x ≤ b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    pub a: DVector<f64>,
    pub b: f64,
}

impl Hyperplane {
    pub fn new(a: DVector<f64>, b: f64) -> Self {
        Hyperplane { a, b }
    }

    /// Signed violation `a·x − b` (positive outside).
    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        self.a.dot(x) - self.b
    }

    pub fn normalized(&self) -> Option<Hyperplane> {
        let n = self.a.norm();
        (n > 0.0).then(|| Hyperplane { a: &self.a / n, b: self.b / n })
    }
}

/// `{x | Ax ≤ b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HPolyhedron {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl HPolyhedron {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        check_dim(a.nrows(), b.len())?;
        Ok(HPolyhedron { a, b })
    }

    /// The box `lower ≤ x ≤ upper` as `[I; −I] x ≤ [upper; −lower]`.
    pub fn from_bounds(lower: &[f64], upper: &[f64]) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        let n = lower.len();
        let mut a = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            a[(i, i)] = 1.0;
            b[i] = upper[i];
            a[(n + i, i)] = -1.0;
            b[n + i] = -lower[i];
        }
        Ok(HPolyhedron { a, b })
    }

    pub fn ambient_dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_faces(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn face(&self, i: usize) -> Hyperplane {
        Hyperplane { a: self.a.row(i).transpose(), b: self.b[i] }
    }

    pub fn faces(&self) -> impl Iterator<Item = Hyperplane> + '_ {
        (0..self.num_faces()).map(|i| self.face(i))
    }

    pub fn push(&mut self, plane: &Hyperplane) -> Result<()> {
        check_dim(self.ambient_dim(), plane.a.len())?;
        let m = self.num_faces();
        let n = self.ambient_dim();
        let a = core::mem::replace(&mut self.a, DMatrix::zeros(0, 0));
        self.a = a.resize_vertically(m + 1, 0.0);
        for j in 0..n {
            self.a[(m, j)] = plane.a[j];
        }
        let b = core::mem::replace(&mut self.b, DVector::zeros(0));
        self.b = b.resize_vertically(m + 1, plane.b);
        Ok(())
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn intersection(&self, other: &HPolyhedron) -> Result<HPolyhedron> {
        check_dim(self.ambient_dim(), other.ambient_dim())?;
        let (m1, m2, n) = (self.num_faces(), other.num_faces(), self.ambient_dim());
        let a = DMatrix::from_fn(m1 + m2, n, |i, j| if i < m1 { self.a[(i, j)] } else { other.a[(i - m1, j)] });
        let b = DVector::from_fn(m1 + m2, |i, _| if i < m1 { self.b[i] } else { other.b[i - m1] });
        Ok(HPolyhedron { a, b })
    }

    /// `Ax ≤ b + tol` elementwise.
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        check_dim(self.ambient_dim(), x.len())?;
        Ok(self.max_violation(x) <= tol)
    }

    /// `max_i (aᵢ·x − bᵢ)`, or `−∞` for a polytope without rows.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let r = &self.a * x - &self.b;
        r.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn lp_rows(&self, lp: &mut LinearProgram, extra_cols: usize, shift: f64) {
        for i in 0..self.num_faces() {
            let mut row: Vec<f64> = self.a.row(i).iter().copied().collect();
            row.extend(core::iter::repeat(0.0).take(extra_cols));
            lp.add_leq(row, self.b[i] - shift * self.a.row(i).norm());
        }
    }

    /// Axis-aligned bounding box from `2n` linear programs.
    pub fn bounding_box(&self) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = self.ambient_dim();
        let mut lo = DVector::zeros(n);
        let mut hi = DVector::zeros(n);
        for k in 0..n {
            for (sign, out) in [(1.0, &mut hi), (-1.0, &mut lo)] {
                let mut c = vec![0.0; n];
                c[k] = sign;
                let mut lp = LinearProgram::maximize(c);
                self.lp_rows(&mut lp, 0, 0.0);
                match lp.solve()? {
                    LpOutcome::Optimal { x, .. } => out[k] = x[k],
                    LpOutcome::Unbounded => return Err(Error::Unbounded),
                    LpOutcome::Infeasible => return Err(Error::EmptyInterior { radius: f64::NEG_INFINITY }),
                }
            }
        }
        Ok((lo, hi))
    }

    /// True iff the recession cone `{y | Ay ≤ 0}` is `{0}`: the rows span the
    /// space and some strictly positive combination of them vanishes.
    pub fn is_bounded(&self) -> Result<bool> {
        let (m, n) = (self.num_faces(), self.ambient_dim());
        if m <= n {
            return Ok(n == 0);
        }
        let rank = self.a.clone().svd(false, false).rank(1e-10 * self.a.amax().max(1e-300));
        if rank < n {
            return Ok(false);
        }
        // λ = 1 + μ, μ ≥ 0, Aᵀλ = 0
        let mut lp = LinearProgram::minimize(vec![0.0; m]);
        for i in 0..m {
            lp.set_nonnegative(i);
        }
        for j in 0..n {
            let row: Vec<f64> = (0..m).map(|i| self.a[(i, j)]).collect();
            let rhs = -row.iter().sum::<f64>();
            lp.add_eq(row, rhs);
        }
        Ok(matches!(lp.solve()?, LpOutcome::Optimal { .. }))
    }

    /// Whether `{x | A₁x ≤ b₁ − margin·‖a₁ᵢ‖, A₂x ≤ b₂ − margin·‖a₂ᵢ‖}` is
    /// nonempty, i.e. the two sets share a ball of radius `margin`.
    pub fn overlaps_with_margin(&self, other: &HPolyhedron, margin: f64) -> Result<bool> {
        check_dim(self.ambient_dim(), other.ambient_dim())?;
        let n = self.ambient_dim();
        let mut lp = LinearProgram::minimize(vec![0.0; n]);
        self.lp_rows(&mut lp, 0, margin);
        other.lp_rows(&mut lp, 0, margin);
        Ok(matches!(lp.solve()?, LpOutcome::Optimal { .. }))
    }

    pub fn chebyshev_center(&self) -> Result<(DVector<f64>, f64)> {
        crate::mvie::chebyshev_center(self)
    }
}

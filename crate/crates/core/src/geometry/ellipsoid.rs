use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{check_dim, HPolyhedron};
use crate::prelude::*;
use crate::{Error, Result};

/// `{x | (x−d)ᵀCᵀC(x−d) ≤ 1}`, the image of the unit ball under `x = d + C⁻¹u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperellipsoid {
    c: DMatrix<f64>,
    d: DVector<f64>,
}

impl Hyperellipsoid {
    pub fn new(c: DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        check_dim(c.nrows(), c.ncols())?;
        check_dim(c.nrows(), d.len())?;
        let e = Hyperellipsoid { c, d };
        e.inverse_factor()?;
        Ok(e)
    }

    /// Sphere of the given radius, `C = I / radius`.
    pub fn ball(center: DVector<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidOptions(format!("ball radius must be positive, got {radius}")));
        }
        let n = center.len();
        Hyperellipsoid::new(DMatrix::identity(n, n) / radius, center)
    }

    /// From the shape factor `C̃ = C⁻¹`, so the set is `{d + C̃u | ‖u‖ ≤ 1}`.
    pub fn from_shape_factor(c_tilde: &DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        let c = c_tilde.clone().try_inverse().ok_or(Error::SingularMatrix)?;
        Hyperellipsoid::new(c, d)
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.d
    }

    /// `CᵀC`.
    pub fn metric(&self) -> DMatrix<f64> {
        self.c.tr_mul(&self.c)
    }

    /// `C̃ = C⁻¹`.
    pub fn inverse_factor(&self) -> Result<DMatrix<f64>> {
        let det = self.c.determinant();
        if !det.is_finite() || det.abs() < 1e-300 {
            return Err(Error::SingularMatrix);
        }
        self.c.clone().try_inverse().ok_or(Error::SingularMatrix)
    }

    /// `log det C̃ = −log |det C|`.
    pub fn log_det_shape(&self) -> Result<f64> {
        let lu = self.c.clone().lu();
        let u = lu.u();
        let mut s = 0.0;
        for i in 0..self.dim() {
            let v = u[(i, i)].abs();
            if v == 0.0 {
                return Err(Error::SingularMatrix);
            }
            s += v.ln();
        }
        Ok(-s)
    }

    /// `V_n · |det C⁻¹|`.
    pub fn volume(&self) -> Result<f64> {
        Ok(unit_ball_volume(self.dim()) * self.log_det_shape()?.exp())
    }

    /// `(x−d)ᵀCᵀC(x−d)`.
    pub fn metric_distance_sq(&self, x: &DVector<f64>) -> f64 {
        (&self.c * (x - &self.d)).norm_squared()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.metric_distance_sq(x) <= 1.0
    }

    /// `‖C̃ᵀaᵢ‖ ≤ bᵢ − aᵢ·d + tol` for every row of `P`.
    pub fn is_inside(&self, p: &HPolyhedron, tol: f64) -> Result<bool> {
        check_dim(self.dim(), p.ambient_dim())?;
        let ct = self.inverse_factor()?;
        for i in 0..p.num_faces() {
            let a = p.a().row(i).transpose();
            let support = (ct.transpose() * &a).norm();
            if support > p.b()[i] - a.dot(&self.d) + tol {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Volume of the unit ball in `n` dimensions.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

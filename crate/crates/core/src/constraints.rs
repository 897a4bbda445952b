//! Extra configuration-space constraints `g(q) ≤ 0` with exact gradients.

use core::fmt::Debug;

use nalgebra::DVector;

use crate::kinematics::PlanarChain;
use crate::prelude::*;
use crate::Result;

/// A scalar constraint `g(q) ≤ 0` that a region must satisfy everywhere.
pub trait ConfigConstraint: Debug + Send + Sync {
    /// `(g(q), ∇g(q))`.
    fn evaluate(&self, q: &DVector<f64>) -> Result<(f64, DVector<f64>)>;

    fn describe(&self) -> String;
}

/// `|Σqᵢ − target| − bound ≤ 0`: the end-effector orientation stays within
/// `bound` of `target`. At `Σq = target` the gradient uses sign `+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSumBound {
    pub target: f64,
    pub bound: f64,
}

impl ConfigConstraint for AngleSumBound {
    fn evaluate(&self, q: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let e = q.sum() - self.target;
        let sign = if e >= 0.0 { 1.0 } else { -1.0 };
        Ok((e.abs() - self.bound, DVector::from_element(q.len(), sign)))
    }

    fn describe(&self) -> String {
        format!("angle-sum {} {}", self.target, self.bound)
    }
}

impl AngleSumBound {
    /// The two smooth halves `±(Σq − target) − bound ≤ 0`. Region growth should
    /// use these: the absolute value has no useful gradient at `Σq = target`,
    /// which is usually where the seed sits.
    pub fn sides(&self) -> [AngleSumSide; 2] {
        [1.0, -1.0].map(|sign| AngleSumSide { target: self.target, bound: self.bound, sign })
    }
}

/// `sign·(Σqᵢ − target) − bound ≤ 0`, one side of an [`AngleSumBound`].
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSumSide {
    pub target: f64,
    pub bound: f64,
    pub sign: f64,
}

impl ConfigConstraint for AngleSumSide {
    fn evaluate(&self, q: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let e = q.sum() - self.target;
        Ok((self.sign * e - self.bound, DVector::from_element(q.len(), self.sign)))
    }

    fn describe(&self) -> String {
        let op = if self.sign > 0.0 { "≤" } else { "≥" };
        let limit = self.target + self.sign * self.bound;
        format!("angle-sum {op} {limit}")
    }
}

/// `n·tip(q) − offset ≤ 0`: the chain tip stays on one side of a line.
#[derive(Debug, Clone, PartialEq)]
pub struct TipHalfplane {
    pub chain: PlanarChain,
    pub normal: [f64; 2],
    pub offset: f64,
}

impl ConfigConstraint for TipHalfplane {
    fn evaluate(&self, q: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let poses = self.chain.body_poses(q.as_slice())?;
        let tip = poses[q.len()].translation();
        let value = self.normal[0] * tip[0] + self.normal[1] * tip[1] - self.offset;
        let grad = DVector::from_fn(q.len(), |j, _| {
            let o = poses[j].translation();
            self.normal[0] * -(tip[1] - o[1]) + self.normal[1] * (tip[0] - o[0])
        });
        Ok((value, grad))
    }

    fn describe(&self) -> String {
        format!("tip-halfplane {} {} {}", self.normal[0], self.normal[1], self.offset)
    }
}

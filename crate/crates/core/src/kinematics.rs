//! Planar revolute chains, collision scenes, and the ground-truth collision
//! oracle.
//!
//! Body `0` is the static base. Body `k` sits at the tip of link `k`, and its
//! orientation is the base angle plus `q₁ + … + q_k`: joint `k` is located at
//! the origin of body `k − 1` and rotates link `k` and everything after it.

use nalgebra::DMatrix;

use crate::geometry::{shape_distance, shapes_intersect, ConvexShape2D, Vec2};
use crate::prelude::*;
use crate::{Error, Result};

/// Proper rigid motion of the plane, rotation stored as `(cos θ, sin θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform2D {
    cos: f64,
    sin: f64,
    t: Vec2,
}

impl RigidTransform2D {
    pub fn new(theta: f64, t: Vec2) -> Self {
        RigidTransform2D { cos: theta.cos(), sin: theta.sin(), t }
    }

    pub fn identity() -> Self {
        RigidTransform2D { cos: 1.0, sin: 0.0, t: [0.0, 0.0] }
    }

    pub fn angle(&self) -> f64 {
        self.sin.atan2(self.cos)
    }

    pub fn translation(&self) -> Vec2 {
        self.t
    }

    pub fn rotation(&self) -> (f64, f64) {
        (self.cos, self.sin)
    }

    pub fn rotate(&self, v: Vec2) -> Vec2 {
        [self.cos * v[0] - self.sin * v[1], self.sin * v[0] + self.cos * v[1]]
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        let r = self.rotate(p);
        [r[0] + self.t[0], r[1] + self.t[1]]
    }

    /// `self ∘ other`: first `other`, then `self`.
    pub fn compose(&self, other: &RigidTransform2D) -> RigidTransform2D {
        RigidTransform2D {
            cos: self.cos * other.cos - self.sin * other.sin,
            sin: self.sin * other.cos + self.cos * other.sin,
            t: self.apply(other.t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarChain {
    lengths: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    base: RigidTransform2D,
}

impl PlanarChain {
    pub fn new(lengths: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>, base: RigidTransform2D) -> Result<Self> {
        let n = lengths.len();
        if lower.len() != n || upper.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: lower.len().min(upper.len()) });
        }
        if let Some(l) = lengths.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidScene(format!("link length must be positive, got {l}")));
        }
        for i in 0..n {
            if !(lower[i] < upper[i]) {
                return Err(Error::InvalidScene(format!(
                    "joint {i} limits inverted: lower {} ≥ upper {}",
                    lower[i], upper[i]
                )));
            }
        }
        Ok(PlanarChain { lengths, lower, upper, base })
    }

    pub fn num_joints(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn base(&self) -> &RigidTransform2D {
        &self.base
    }

    /// World poses of bodies `0..=L`.
    pub fn body_poses(&self, q: &[f64]) -> Result<Vec<RigidTransform2D>> {
        crate::geometry::check_dim(self.num_joints(), q.len())?;
        let mut poses = Vec::with_capacity(q.len() + 1);
        let mut pose = self.base;
        poses.push(pose);
        for (qi, li) in q.iter().zip(&self.lengths) {
            pose = pose.compose(&RigidTransform2D::new(*qi, [0.0, 0.0])).compose(&RigidTransform2D::new(0.0, [*li, 0.0]));
            poses.push(pose);
        }
        Ok(poses)
    }

    pub fn fk_pose(&self, q: &[f64], body: usize) -> Result<RigidTransform2D> {
        if body > self.num_joints() {
            return Err(Error::IndexOutOfRange { index: body, len: self.num_joints() + 1 });
        }
        Ok(self.body_poses(q)?[body])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attachment {
    Body(usize),
    World,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionGeometry {
    pub attachment: Attachment,
    /// Pose of the shape frame relative to its body (or the world).
    pub pose: RigidTransform2D,
    pub shape: ConvexShape2D,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PairSpec {
    /// Every robot–world pair plus every robot–robot pair on bodies that are
    /// not kinematically adjacent.
    Auto,
    Explicit(Vec<(usize, usize)>),
}

/// A chain, its collision geometries, world obstacles, and the collision
/// pairs. Geometry indices run over robot geometries first (sorted by body),
/// then world obstacles.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    chain: PlanarChain,
    geometries: Vec<CollisionGeometry>,
    num_robot: usize,
    pairs: Vec<(usize, usize)>,
}

impl Scene {
    pub fn new(
        chain: PlanarChain,
        robot: Vec<(usize, RigidTransform2D, ConvexShape2D)>,
        world: Vec<(RigidTransform2D, ConvexShape2D)>,
        pairs: PairSpec,
    ) -> Result<Self> {
        let mut robot = robot;
        robot.sort_by_key(|(body, _, _)| *body);
        if let Some((body, _, _)) = robot.iter().find(|(b, _, _)| *b > chain.num_joints()) {
            return Err(Error::IndexOutOfRange { index: *body, len: chain.num_joints() + 1 });
        }
        let num_robot = robot.len();
        let mut geometries: Vec<CollisionGeometry> = robot
            .into_iter()
            .map(|(body, pose, shape)| CollisionGeometry { attachment: Attachment::Body(body), pose, shape })
            .collect();
        geometries.extend(world.into_iter().map(|(pose, shape)| CollisionGeometry { attachment: Attachment::World, pose, shape }));
        let mut scene = Scene { chain, geometries, num_robot, pairs: Vec::new() };
        scene.pairs = match pairs {
            PairSpec::Auto => scene.auto_pairs(),
            PairSpec::Explicit(p) => {
                for &(i, j) in &p {
                    scene.validate_pair(i, j)?;
                }
                p
            }
        };
        Ok(scene)
    }

    fn auto_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.geometries.len();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.validate_pair(i, j).is_ok() {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    fn validate_pair(&self, i: usize, j: usize) -> Result<()> {
        let n = self.geometries.len();
        for k in [i, j] {
            if k >= n {
                return Err(Error::IndexOutOfRange { index: k, len: n });
            }
        }
        if i == j {
            return Err(Error::InvalidScene(format!("pair ({i}, {j}) references one geometry twice")));
        }
        match (self.geometries[i].attachment, self.geometries[j].attachment) {
            (Attachment::World, Attachment::World) => {
                Err(Error::InvalidScene(format!("pair ({i}, {j}) joins two world obstacles")))
            }
            (Attachment::Body(a), Attachment::Body(b)) if a.abs_diff(b) < 2 => Err(Error::InvalidScene(format!(
                "pair ({i}, {j}) joins adjacent bodies {a} and {b}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn chain(&self) -> &PlanarChain {
        &self.chain
    }

    pub fn num_joints(&self) -> usize {
        self.chain.num_joints()
    }

    pub fn geometries(&self) -> &[CollisionGeometry] {
        &self.geometries
    }

    pub fn num_robot_geometries(&self) -> usize {
        self.num_robot
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Indices of pairs that touch any of the given geometries.
    pub fn pairs_involving(&self, geometries: &[usize]) -> Vec<usize> {
        (0..self.pairs.len())
            .filter(|&k| {
                let (i, j) = self.pairs[k];
                geometries.contains(&i) || geometries.contains(&j)
            })
            .collect()
    }

    fn geometry(&self, g: usize) -> Result<&CollisionGeometry> {
        self.geometries.get(g).ok_or(Error::IndexOutOfRange { index: g, len: self.geometries.len() })
    }

    pub(crate) fn geometry_frame_from(&self, poses: &[RigidTransform2D], g: usize) -> Result<RigidTransform2D> {
        let geom = self.geometry(g)?;
        Ok(match geom.attachment {
            Attachment::Body(b) => poses[b].compose(&geom.pose),
            Attachment::World => geom.pose,
        })
    }

    /// World pose of geometry `g`'s shape frame.
    pub fn geometry_frame(&self, q: &[f64], g: usize) -> Result<RigidTransform2D> {
        let poses = self.chain.body_poses(q)?;
        self.geometry_frame_from(&poses, g)
    }

    /// World coordinates of a point given in geometry `g`'s shape frame.
    pub fn fk_point(&self, q: &[f64], g: usize, p_local: Vec2) -> Result<Vec2> {
        Ok(self.geometry_frame(q, g)?.apply(p_local))
    }

    /// `∂ fk_point / ∂q`, a `2 × L` matrix.
    pub fn fk_point_jacobian(&self, q: &[f64], g: usize, p_local: Vec2) -> Result<DMatrix<f64>> {
        let poses = self.chain.body_poses(q)?;
        let mut jac = DMatrix::zeros(2, q.len());
        self.fk_point_jacobian_into(&poses, g, p_local, &mut jac, 0)?;
        Ok(jac)
    }

    /// Writes `∂w/∂q` into `out[.., col0..col0+L]` and returns the world point.
    pub(crate) fn fk_point_jacobian_into(
        &self,
        poses: &[RigidTransform2D],
        g: usize,
        p_local: Vec2,
        out: &mut DMatrix<f64>,
        row0: usize,
    ) -> Result<Vec2> {
        let frame = self.geometry_frame_from(poses, g)?;
        let w = frame.apply(p_local);
        if let Attachment::Body(k) = self.geometries[g].attachment {
            for j in 1..=k {
                let o = poses[j - 1].translation();
                out[(row0, j - 1)] = -(w[1] - o[1]);
                out[(row0 + 1, j - 1)] = w[0] - o[0];
            }
        }
        Ok(w)
    }

    pub(crate) fn frames(&self, q: &[f64]) -> Result<Vec<RigidTransform2D>> {
        let poses = self.chain.body_poses(q)?;
        (0..self.geometries.len()).map(|g| self.geometry_frame_from(&poses, g)).collect()
    }

    pub(crate) fn body_poses(&self, q: &[f64]) -> Result<Vec<RigidTransform2D>> {
        self.chain.body_poses(q)
    }

    /// Ground-truth collision test over all pairs.
    pub fn in_collision(&self, q: &[f64]) -> Result<bool> {
        let frames = self.frames(q)?;
        Ok(self.pairs.iter().any(|&(i, j)| {
            shapes_intersect(&self.geometries[i].shape, &frames[i], &self.geometries[j].shape, &frames[j])
        }))
    }

    /// True when some pair is within `tol` of touching.
    pub fn in_collision_within(&self, q: &[f64], tol: f64) -> Result<bool> {
        let frames = self.frames(q)?;
        Ok(self.pairs.iter().any(|&(i, j)| {
            shape_distance(&self.geometries[i].shape, &frames[i], &self.geometries[j].shape, &frames[j]) <= tol
        }))
    }

    /// Task-space distance between the two geometries of pair `pair` at `q`.
    pub fn pair_distance(&self, q: &[f64], pair: usize) -> Result<f64> {
        let &(i, j) = self.pairs.get(pair).ok_or(Error::IndexOutOfRange { index: pair, len: self.pairs.len() })?;
        let frames = self.frames(q)?;
        Ok(shape_distance(&self.geometries[i].shape, &frames[i], &self.geometries[j].shape, &frames[j]))
    }

    /// Adds a world obstacle and, for the new geometry only, every valid
    /// robot pair. Returns the new geometry index.
    pub fn add_world_obstacle(&mut self, pose: RigidTransform2D, shape: ConvexShape2D) -> usize {
        let g = self.geometries.len();
        self.geometries.push(CollisionGeometry { attachment: Attachment::World, pose, shape });
        for r in 0..self.num_robot {
            self.pairs.push((r, g));
        }
        g
    }
}

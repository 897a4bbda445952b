//! Convex sets in configuration space (polytopes, ellipsoids) and in the
//! task-space plane (points, disks, convex polygons).

mod ellipsoid;
mod polytope;
mod shapes;

pub use ellipsoid::{unit_ball_volume, Hyperellipsoid};
pub use polytope::{HPolyhedron, Hyperplane};
pub use shapes::{
    membership_constraints, shape_distance, shapes_intersect, ConvexShape2D, Membership, Vec2,
};

use crate::{Error, Result};

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

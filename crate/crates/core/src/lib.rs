//! Convex collision-free regions in the configuration space of planar serial
//! chains.
//!
//! Regions are grown around a seed configuration by alternating two steps:
//! a sweep of nonlinear counterexample searches that adds separating
//! hyperplanes for every collision pair (and for any extra configuration
//! constraint), and a maximum-volume inscribed ellipsoid that supplies the
//! metric for the next sweep. See [`iris::iris_np`].
//!
//! The crate is `no_std` + `alloc`. The default `std` feature only adds
//! wall-clock timing to the per-iteration statistics.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod constraints;
pub mod error;
pub mod geometry;
pub mod iris;
pub mod kinematics;
pub mod lp;
pub mod mvie;
pub mod nlp;
pub mod qp;
pub mod sampling;

pub use error::{Error, Result};
pub use geometry::{ConvexShape2D, HPolyhedron, Hyperellipsoid, Hyperplane};
pub use iris::{IrisOptions, RegionResult};
pub use kinematics::{PlanarChain, RigidTransform2D, Scene};

pub use nalgebra::{DMatrix, DVector};

pub(crate) mod prelude {
    pub(crate) use alloc::boxed::Box;
    pub(crate) use alloc::string::{String, ToString};
    pub(crate) use alloc::vec;
    pub(crate) use alloc::vec::Vec;
    pub(crate) use alloc::format;
    #[allow(unused_imports)]
    pub(crate) use num_traits::Float;
}

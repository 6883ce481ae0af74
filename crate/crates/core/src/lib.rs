//! Numerical laboratory for central hyperplane sections of origin-symmetric
//! star bodies.

// `!(x > 0.0)` is how NaN gets rejected along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bodies;
pub mod error;
pub mod john;
pub mod lab;
pub mod measures;
pub mod quad;
pub mod radon;
pub mod rng;
pub mod scalars;
pub mod sphere;

pub use bodies::{body_volume, intersection_body_of, BodySpec, Ellipsoid, HPolytope, StarBody};
pub use error::{Error, Result};
pub use measures::{BodyMeasure, Density, SectionSearch, SectionValue};
pub use sphere::{Direction, GridSpec, Scheme, SphereGrid};

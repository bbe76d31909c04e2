//! Antipodal distances, noncritical distance maps and fiber retractions on
//! metric graphs and Euclidean cones over them.

pub mod analysis;
pub mod cone;
pub mod error;
pub mod generators;
pub mod geodesy;
pub mod model;
pub mod pl;
pub mod regularity;
pub mod retraction;

pub use error::{Error, Result};

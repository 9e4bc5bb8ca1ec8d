//! Local rigidity analysis for convex polyhedra and planar point sets.

pub mod error;
pub mod generators;
pub mod geometry;
pub mod incidence;
pub mod io;
pub mod linalg;
pub mod measure;
pub mod polygon;
pub mod rigidity;
pub mod witness;

pub use error::{Error, Result};
pub use geometry::{fit_realization, Measurement3D, Realization};
pub use incidence::AbstractPolyhedron;
pub use rigidity::{is_sufficient, greedy_minimal_subset, flex_witness, Mode, Pool, SufficiencyReport};

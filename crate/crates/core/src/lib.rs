//! Six-vertex height functions, random-cluster measures with a boundary-cluster
//! weight, the couplings between them and with the Ashkin–Teller model, and an
//! exact enumeration oracle for small domains.

pub mod bkw_coupling;
pub mod cli_experiments;
pub mod error;
pub mod exact_oracle;
pub mod fk_ising_at;
pub mod lattice;
pub mod random_cluster;
pub mod representations;
pub mod samplers;
pub mod scalar;

pub use error::*;
pub use scalar::{Scalar, Surd};

use thiserror::Error;

use crate::lattice::{FaceCoord, VertexCoord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("domain has no faces")]
    Empty,
    #[error("faces are not edge-connected")]
    Disconnected,
    #[error("domain has a hole")]
    NotSimplyConnected,
    #[error("boundary is not a simple cycle (pinch at vertex {0:?})")]
    PinchVertex(VertexCoord),
    #[error("boundary cycle is not closed or self-intersects")]
    BadCycle,
    #[error("face {0:?} is not in the domain")]
    FaceOutside(FaceCoord),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RepresentationError {
    #[error("heights at adjacent faces {0:?} and {1:?} do not differ by one")]
    NotLipschitz(FaceCoord, FaceCoord),
    #[error("height at {0:?} has the wrong parity")]
    WrongParity(FaceCoord),
    #[error("ice rule violated at vertex {0:?}")]
    IceRule(VertexCoord),
    #[error("vertex {0:?} does not have four defined faces")]
    BoundaryVertex(VertexCoord),
    #[error("anchor value inconsistent with the configuration at {0:?}")]
    Anchor(FaceCoord),
    #[error("boundary c-weight mode needs an even or odd domain")]
    MixedDomain,
    #[error("configuration is outside the support (weight zero)")]
    ZeroWeight,
    #[error("c_b is infinite; use the boundary count directly")]
    InfiniteWeight,
    #[error("boundary values do not match the domain")]
    BoundaryMismatch,
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("parameters a={a}, b={b}, c={c} violate a+b<=c (complex coupling regime)")]
    UnsupportedRegime { a: f64, b: f64, c: f64 },
    #[error("parameter {name} = {value} out of range: {why}")]
    OutOfRange { name: &'static str, value: f64, why: &'static str },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("height function and edge configuration are not compatible")]
    Incompatible,
    #[error("cluster adjacency graph is not a tree ({nodes} clusters, {edges} adjacencies)")]
    NotATree { nodes: usize, edges: usize },
    #[error("spin field is not constant on a cluster")]
    NotConstantOnCluster,
    #[error(transparent)]
    Param(#[from] ParamError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("instance too large for enumeration: {what} = {size} exceeds cap {cap}")]
    TooLarge { what: &'static str, size: usize, cap: usize },
    #[error("measures live on different configuration spaces")]
    Mismatch,
    #[error("map is not total on the atoms")]
    PartialMap,
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Representation(#[from] RepresentationError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Param(#[from] ParamError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Invalid(String),
    #[error("config line {line}, column {column}: {msg}")]
    Json { line: usize, column: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Representation(#[from] RepresentationError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("observable {0} is not defined for this model")]
    UnknownObservable(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

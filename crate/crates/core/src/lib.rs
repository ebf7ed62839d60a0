//! 3D small-strain finite-element computational homogenisation for
//! fibre-reinforced composite RVEs.
//!
//! Units are fixed throughout: lengths in mm, forces in N, stresses and moduli
//! in MPa, fracture energies in N/mm. Strains are dimensionless. All 6-component
//! stress/strain vectors use the Voigt ordering `[11, 22, 33, 12, 23, 31]`,
//! with strain vectors carrying engineering (doubled) shears.

pub mod config;
pub mod cohesive;
pub mod driver;
pub mod homogenize;
pub mod layout;
pub mod mesh;
pub mod plasticity;
pub mod sparse;
pub mod tensor;
pub mod udmesh;
pub mod vtk;
pub mod yarn;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Params(String),
    #[error("basis is not orthonormal and right-handed")]
    Basis,
    #[error("mesh error: {0}")]
    Mesh(String),
    #[error("mesh parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },
    #[error("return map did not converge (residual {residual:.3e}); strain increment too large")]
    ReturnMap { residual: f64 },
    #[error("solver error: {0}")]
    Solve(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("generator error: {0}")]
    Generate(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

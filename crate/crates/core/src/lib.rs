//! Learned, factorized solution operators for linear PDEs with Dirichlet
//! boundary conditions on grid domains, together with the exact discrete
//! solver they approximate.
//!
//! The crate is organized around the discrete system `L u = M f` subject to
//! `S u = h`:
//!
//! - [`geometry`]: grid domains and the interior/boundary selection maps.
//! - [`assembly`]: the discrete operator `L` and the lumped mass `M`.
//! - [`dense`]: dense matrices, Cholesky, and a Jacobi symmetric eigensolver.
//! - [`oracle`]: exact constrained solves, the Green's matrix
//!   `G = (K L K^T)^{-1}`, and its eigendecomposition.
//! - [`problems`]: templated problem generation and dataset serialization.
//! - [`nncore`]: a minimal reverse-mode tape, ADAM, and checkpoint I/O.
//! - [`ngf`]: the factorized neural solution operator and a direct-regression
//!   baseline.
//! - [`harness`]: metrics, experiment protocols, and report emission.

pub mod assembly;
pub mod dense;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod ngf;
pub mod nncore;
pub mod oracle;
pub mod problems;

pub use error::{Error, Result};

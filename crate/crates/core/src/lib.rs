//! Numerical horizontal holonomy of K-contact sub-Riemannian manifolds.

pub mod ad;
pub mod error;
pub mod linalg;
pub mod manifold;
pub mod connection;
pub mod transport;
pub mod holonomy;
pub mod transverse;
pub mod spinor;
pub mod config;
pub mod cli;

pub use error::{Error, Result};

//! Numerical toolkit for Dirichlet eigenvalues of the Grushin Laplacian
//! `Delta_x + |x|^(2s) Delta_y` on 2D domains: finite-element discretization,
//! shape derivatives of eigenvalues and of their elementary symmetric
//! functions, eigenvalue-branch bifurcation slopes, criticality residuals
//! under volume/perimeter constraints, the anisotropic dilation scaling law,
//! and the Rellich-Pohozaev boundary identity.

pub mod assembly;
pub mod eigensolver;
pub mod error;
pub mod geometry;
pub mod identities;
pub mod linalg;
pub mod oracle1d;
pub mod perturbation;
pub mod quadrature;
pub mod report;
pub mod shape_derivative;
pub mod suite;

pub use error::{Error, Result};

//! Magnitude-only reconstruction and phase-retrievability certificates.
//!
//! * [`graph_model`], [`gram`], [`simplex_graph`], [`reconstruction`]: vector
//!   fields on graphs recovered up to an orthogonal matrix from vertex norms
//!   and edge relative norms.
//! * [`conjugate_certify`]: complex conjugate phase retrieval of the complex
//!   range space of a real matrix.
//! * [`spline_hat`]: conjugate phase retrieval in the complex shift-invariant
//!   space generated by the hat function, with constructive recovery.
//! * [`quaternion`]: quaternion conjugate phase retrieval through the
//!   equivalent four-dimensional real fields.
//! * [`affine`]: injectivity tests for affine phase retrieval.
//! * [`instance_gen`]: seeded synthetic instances.

pub mod affine;
pub mod conjugate_certify;
pub mod graph_model;
pub mod gram;
pub mod instance_gen;
pub mod json;
pub mod linalg;
pub mod quaternion;
pub mod reconstruction;
pub mod rng;
pub mod simplex_graph;
pub mod spline_hat;

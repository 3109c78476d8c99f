//! Matrix-free stochastic second-order optimization at desk scale.
//!
//! The crate is organized bottom-up:
//!
//! * [`numerics`] — dense row-major matrices, a portable seeded RNG
//!   (ChaCha20 + Box–Muller), thin QR, and a cyclic-Jacobi symmetric
//!   eigensolver. Everything downstream builds on these kernels, and the
//!   eigensolver doubles as the test oracle for the randomized methods.
//! * [`model`] — differentiable test problems (subsampled quadratics, saddle
//!   fixtures, a dense feedforward autoencoder with Pearlmutter
//!   Hessian-vector products) behind one trait, plus sweep-exact cost
//!   accounting: every loss/gradient/hvp call meters per-sample forward and
//!   backward passes.
//! * [`lowrank`] — double-pass randomized eigendecomposition of a
//!   matrix-free symmetric operator, absolute-value spectrum flips, and the
//!   Sherman–Morrison–Woodbury solve for `(U Λ Uᵀ + γ I) p = -g`.
//! * [`krylov`] — CG, MINRES, and GMRES with relative-residual forcing,
//!   negative-curvature detection, and per-solve telemetry.
//! * [`optimizer`] — outer drivers: low-rank saddle-free Newton, inexact
//!   Newton–Krylov, first-order baselines, nonmonotone backtracking line
//!   search, stationarity checks, iteration traces, and exact sweep-budget
//!   reports.
//!
//! Costs are counted in *sweeps*: one forward plus one backward pass over a
//! single sample. A loss-only evaluation is half a sweep per sample; a
//! gradient is one; a Hessian-vector product is two (its tangent-mode
//! forward and backward passes come on top of the primal ones).

pub mod constants;
pub mod error;
pub mod krylov;
pub mod lowrank;
pub mod model;
pub mod numerics;
pub mod optimizer;

pub use error::{CoreError, CoreResult};

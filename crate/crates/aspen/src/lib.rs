//! Adaptive spectral physics-informed solver for stiff 1-D evolution
//! equations. The crate contains:
//!
//! - [`autodiff`]: a reverse-mode tape whose nodes carry coordinate jets, so
//!   residuals built from u_t, u_xx, u_xxx differentiate w.r.t. parameters;
//! - [`model`]: the network (trainable Fourier-feature layer + tanh MLP) and
//!   its frozen-frequency / raw-coordinate reference variants;
//! - [`pde`]: residual definitions for CGLE, Allen-Cahn, Burgers, KdV, NLS;
//! - [`reference`]: classical split-step Fourier and Crank-Nicolson solvers
//!   generating the ground-truth field;
//! - [`training`]: collocation sampling, loss assembly, Adam, adaptive
//!   refinement, curriculum, forward and inverse training loops;
//! - [`diagnostics`]: error norms, residual statistics, wall tracking, free
//!   energy, spectra, frequency histograms;
//! - [`config`]: the experiment configuration file format.

pub mod autodiff;
pub mod config;
pub mod diagnostics;
pub mod model;
pub mod pde;
pub mod reference;
pub mod rng;
pub mod stats;
pub mod training;

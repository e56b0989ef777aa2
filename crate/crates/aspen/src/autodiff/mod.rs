//! Scalar-graph reverse-mode differentiation where every node carries a
//! coordinate jet, so PDE residuals built from u_t, u_xx, u_xxx are
//! themselves differentiable with respect to all network parameters.

mod jet;
mod tape;

pub use jet::{tanh_deriv4, tanh_derivs, Jet, Jet2, Jet3};
pub use tape::{NodeId, NonFinite, Slot, Tape, TapeError};

//! Explicit rate-optimal `(a, b, tau)` streaming erasure codes.
//!
//! A scalar `[n, k]` code over `F_{q^2}` (prime power `q >= tau`) is built
//! from an explicit parity-check matrix and embedded along the diagonals of
//! a packet stream. Every message packet is then recoverable within delay
//! `tau` on any sliding-window channel that, in each window of `tau + 1`
//! packets, drops either one burst of at most `b` packets or at most `a`
//! arbitrary packets.
//!
//! Modules, bottom up:
//!
//! * [`gf`]: `F_q` and its quadratic extension
//! * [`linalg`]: exact dense matrices
//! * [`construct`]: the parity-check construction and systematic encoder
//! * [`scalar`]: block encoding and deadline-aware erasure decoding
//! * [`stream`]: packet-level encoder/decoder via diagonal embedding
//! * [`channel`]: sliding-window erasure channel and trace generators
//! * [`verifier`]: exhaustive certification of the recovery properties
//! * [`formats`]: JSON file formats shared with the command-line tool

pub mod channel;
pub mod construct;
pub mod error;
pub mod formats;
pub mod gf;
pub mod linalg;
pub mod scalar;
pub mod stream;
pub mod verifier;

pub use construct::{build_parity_check, construct, CodeParams, ParityCheck};
pub use error::{Error, Result};
pub use gf::{make_field, Elem, Field, FieldCtx};
pub use linalg::Matrix;

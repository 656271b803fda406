//! Information reconciliation: GF(2^m) arithmetic, Reed-Solomon coding and
//! the fuzzy commitment built on it.

pub mod fuzzy;
pub mod gf;
pub mod rs;

pub use fuzzy::{
    challenge_response, commit, derive_key, open, read_commitments, reconcile, verify_keys, write_commitments, Commitment, Reconciliation, ReconcileFailure,
};
pub use rs::{DecodeFailure, ReedSolomon, RsParams};

//! Composite multiplex-network model of app adoption.
//!
//! Several candidate user networks (calls, messages, co-location, ...) are
//! combined into one weighted network whose weights are learned by maximum
//! likelihood from who installed what. The fitted composite network then
//! scores unseen apps, future adopters of partially observed apps, and users
//! that were never part of training.

pub mod cli;
pub mod eval;
pub mod harness;
pub mod model;
pub mod netdata;
pub mod predict;
pub mod solver;
pub mod synthgen;

use sha2::{Digest, Sha256};

/// Derives an independent seed for a named stream from a root seed.
pub fn derive_seed(root: u64, name: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

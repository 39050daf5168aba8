//! Networks, adoption logs and the descriptive statistics computed over them.
//!
//! Users and apps are dense 0-based ids. External names live in label maps
//! (`CandidateNetwork::name`, `AdoptionMatrix::app_labels`).

mod adoption;
mod network;
mod parse;
mod stats;

pub use adoption::{filter_min_users, popularity_counts, Adoption, AdoptionMatrix};
pub use network::{normalize_network, CandidateNetwork, NetworkKind, NetworkStack, Normalization, Symmetrize};
pub use parse::{
    load_adoptions, load_network_edge_list, parse_adoption_records, parse_edge_records, AdoptionRecord, EdgeRecord,
};
pub use stats::{dataset_stats, DatasetStats};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: u64, message: String },
    #[error("line {line}: user id {id} out of range (num_users = {num_users})")]
    UserOutOfRange { line: u64, id: usize, num_users: usize },
    #[error("line {line}: app id {id} out of range (num_apps = {num_apps})")]
    AppOutOfRange { line: u64, id: usize, num_apps: usize },
    #[error("line {line}: negative weight {weight}")]
    NegativeWeight { line: u64, weight: f64 },
    #[error("line {line}: non-finite weight")]
    NonFiniteWeight { line: u64 },
    #[error("line {line}: self-loop on user {user}")]
    SelfLoop { line: u64, user: usize },
    #[error("line {line}: binary network weight must be 0 or 1, got {weight}")]
    NonBinaryWeight { line: u64, weight: f64 },
    #[error("line {line}: asymmetric edge ({i},{j}): {forward} vs {backward}")]
    Asymmetric { line: u64, i: usize, j: usize, forward: f64, backward: f64 },
    #[error("line {line}: duplicate adoption (user {user}, app {app}) with conflicting timestamps")]
    ConflictingTimestamp { line: u64, user: usize, app: usize },
    #[error("adoption matrix has no installations")]
    EmptyData,
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("{0}")]
    Invalid(String),
}

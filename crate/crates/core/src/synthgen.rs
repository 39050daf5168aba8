//! Synthetic multiplex networks and adoption logs with known parameters.
//!
//! Users are split into a context group and a target group. Context users
//! adopt independently of the network; target users then adopt with exactly
//! the model's conditional probability given the context adopters, so the
//! likelihood restricted to target users is well specified and the planted
//! parameters are the population optimum.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::derive_seed;
use crate::model::{adoption_probability, composite_potential, potential_table, ModelParams};
use crate::netdata::{Adoption, AdoptionMatrix, CandidateNetwork, NetworkKind, NetworkStack, Symmetrize};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Invalid(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightDist {
    Uniform { w_max: f64 },
    Unit,
}

/// Which user pairs may be joined by an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// Every pair.
    #[default]
    Random,
    /// Only context-target pairs, so every user's neighbours lie in the other group.
    Bipartite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub num_users: usize,
    pub num_context_users: usize,
    pub num_apps: usize,
    /// One density per candidate network.
    pub edge_density: Vec<f64>,
    pub weights: WeightDist,
    #[serde(default)]
    pub topology: Topology,
    pub planted_alpha: Vec<f64>,
    pub planted_alpha_pop: f64,
    /// Rate of the exponential susceptibility distribution.
    pub s_rate: f64,
    /// Mean of the exponential base-popularity draw that drives context adoption.
    pub base_popularity: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_users: 400,
            num_context_users: 200,
            num_apps: 400,
            edge_density: vec![0.05, 0.05, 0.05, 0.05],
            weights: WeightDist::Uniform { w_max: 1.0 },
            topology: Topology::Random,
            planted_alpha: vec![0.4, 0.2, 0.1, 0.0],
            planted_alpha_pop: 0.004,
            s_rate: 20.0,
            base_popularity: 0.1,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn num_networks(&self) -> usize {
        self.edge_density.len()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.num_users == 0 || self.num_apps == 0 {
            return bad("num_users and num_apps must be positive".into());
        }
        if self.num_context_users > self.num_users {
            return bad(format!("num_context_users {} exceeds num_users {}", self.num_context_users, self.num_users));
        }
        if self.edge_density.is_empty() {
            return bad("at least one network is required".into());
        }
        if let Some(d) = self.edge_density.iter().find(|&&d| !(d > 0.0 && d <= 1.0)) {
            return bad(format!("edge density {d} outside (0, 1]"));
        }
        if self.planted_alpha.len() != self.edge_density.len() {
            return bad(format!(
                "planted_alpha has {} entries for {} networks",
                self.planted_alpha.len(),
                self.edge_density.len()
            ));
        }
        if let Some(a) = self.planted_alpha.iter().find(|&&a| !(a >= 0.0 && a.is_finite())) {
            return bad(format!("planted alpha {a} must be finite and >= 0"));
        }
        if !(self.planted_alpha_pop >= 0.0 && self.planted_alpha_pop.is_finite()) {
            return bad("planted_alpha_pop must be finite and >= 0".into());
        }
        if !(self.s_rate > 0.0 && self.s_rate.is_finite()) {
            return bad("s_rate must be positive".into());
        }
        if !(self.base_popularity >= 0.0 && self.base_popularity.is_finite()) {
            return bad("base_popularity must be finite and >= 0".into());
        }
        if let WeightDist::Uniform { w_max } = self.weights {
            if !(w_max > 0.0 && w_max.is_finite()) {
                return bad("w_max must be positive".into());
            }
        }
        Ok(())
    }
}

/// Independent Erdős–Rényi layers with weights from `spec.weights`.
pub fn gen_networks(spec: &SynthSpec) -> Result<NetworkStack, SynthError> {
    spec.validate()?;
    let n = spec.num_users;
    let context = context_partition(spec);
    let networks = spec
        .edge_density
        .iter()
        .enumerate()
        .map(|(m, &density)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &format!("network/{m}")));
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if spec.topology == Topology::Bipartite && context[i] == context[j] {
                        continue;
                    }
                    if rng.random_bool(density) {
                        let w = match spec.weights {
                            WeightDist::Unit => 1.0,
                            // open at zero so every sampled edge is present
                            WeightDist::Uniform { w_max } => w_max * (1.0 - rng.random::<f64>()),
                        };
                        edges.push((i, j, w));
                    }
                }
            }
            let kind = match spec.weights {
                WeightDist::Unit => NetworkKind::Binary,
                WeightDist::Uniform { .. } => NetworkKind::Weighted,
            };
            CandidateNetwork::from_edges(format!("g{}", m + 1), kind, n, edges, Symmetrize::Max)
                .map_err(|e| SynthError::Invalid(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    NetworkStack::new(networks).map_err(|e| SynthError::Invalid(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    /// Networks with the popularity channel set to per-app context adopter counts.
    pub stack: NetworkStack,
    pub adoptions: AdoptionMatrix,
    pub context: Vec<bool>,
    pub planted: ModelParams,
    pub base_popularity: Vec<f64>,
}

impl SynthData {
    pub fn target_users(&self) -> Vec<usize> {
        (0..self.context.len()).filter(|&u| !self.context[u]).collect()
    }

    pub fn sidecar(&self, spec: &SynthSpec) -> SynthSidecar {
        SynthSidecar {
            spec: spec.clone(),
            planted: self.planted.clone(),
            context_users: (0..self.context.len()).filter(|&u| self.context[u]).collect(),
            base_popularity: self.base_popularity.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSidecar {
    pub spec: SynthSpec,
    pub planted: ModelParams,
    pub context_users: Vec<usize>,
    pub base_popularity: Vec<f64>,
}

/// Seeded choice of `num_context_users` context users.
fn context_partition(spec: &SynthSpec) -> Vec<bool> {
    let mut order: Vec<usize> = (0..spec.num_users).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "partition")));
    let mut context = vec![false; spec.num_users];
    for &u in &order[..spec.num_context_users] {
        context[u] = true;
    }
    context
}

/// Samples susceptibilities and the context/target partition for `spec`.
pub fn planted_params(spec: &SynthSpec) -> Result<(ModelParams, Vec<bool>), SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "susceptibility"));
    let exp = Exp::new(spec.s_rate).map_err(|e| SynthError::Invalid(e.to_string()))?;
    let s: Vec<f64> = (0..spec.num_users).map(|_| exp.sample(&mut rng)).collect();
    let context = context_partition(spec);
    let planted =
        ModelParams { alpha: spec.planted_alpha.clone(), alpha_pop: spec.planted_alpha_pop, s, constrained: true };
    Ok((planted, context))
}

/// Full synthetic bundle: networks, partition, planted parameters and adoptions.
pub fn generate(spec: &SynthSpec) -> Result<SynthData, SynthError> {
    let stack = gen_networks(spec)?;
    let (planted, context) = planted_params(spec)?;
    sample_adoptions_teacher(&stack, &planted, &context, spec)
}

/// Two-stage teacher sampling. Timestamps are per-app ranks with every context
/// adopter before every target adopter.
pub fn sample_adoptions_teacher(
    stack: &NetworkStack,
    planted: &ModelParams,
    context: &[bool],
    spec: &SynthSpec,
) -> Result<SynthData, SynthError> {
    spec.validate()?;
    let n = spec.num_users;
    if stack.num_users() != Some(n) || planted.num_users() != n || context.len() != n {
        return Err(SynthError::DimensionMismatch("users in stack, planted params and partition must agree".into()));
    }
    if planted.num_networks() != stack.num_networks() {
        return Err(SynthError::DimensionMismatch("planted alpha length differs from network count".into()));
    }
    let base = Exp::new(1.0).map_err(|e| SynthError::Invalid(e.to_string()))?;
    let per_app: Vec<(f64, f64, Vec<Adoption>)> = (0..spec.num_apps)
        .into_par_iter()
        .map(|a| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &format!("app/{a}")));
            let c0 = spec.base_popularity * base.sample(&mut rng);
            let mut x = vec![false; n];
            for u in (0..n).filter(|&u| context[u]) {
                let p = adoption_probability(planted.s[u], planted.alpha_pop * c0);
                x[u] = rng.random_bool(p);
            }
            let count = x.iter().filter(|&&b| b).count() as f64;
            let table = potential_table(stack, &x, count).expect("shapes checked above");
            let potential = composite_potential(planted, &table).expect("shapes checked above");
            let mut targets = Vec::new();
            for u in (0..n).filter(|&u| !context[u]) {
                if rng.random_bool(adoption_probability(planted.s[u], potential[u])) {
                    targets.push(u);
                }
            }
            let mut first: Vec<usize> = (0..n).filter(|&u| x[u]).collect();
            first.shuffle(&mut rng);
            targets.shuffle(&mut rng);
            let entries = first
                .into_iter()
                .chain(targets)
                .enumerate()
                .map(|(rank, user)| Adoption { user, app: a, timestamp: Some(rank as i64 + 1) })
                .collect();
            (c0, count, entries)
        })
        .collect();
    let base_popularity = per_app.iter().map(|t| t.0).collect();
    let popularity = per_app.iter().map(|t| t.1).collect();
    let adoptions = AdoptionMatrix::from_entries(n, spec.num_apps, per_app.into_iter().flat_map(|t| t.2))
        .map_err(|e| SynthError::Invalid(e.to_string()))?;
    let stack = stack.clone().with_popularity(popularity).map_err(|e| SynthError::Invalid(e.to_string()))?;
    Ok(SynthData { stack, adoptions, context: context.to_vec(), planted: planted.clone(), base_popularity })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryError {
    pub rel_l2_alpha: f64,
    pub cosine_alpha: f64,
    pub s_rmse: f64,
}

/// Compares the `(alpha, alpha_pop)` blocks and the target users' susceptibilities.
pub fn recovery_error(
    planted: &ModelParams,
    recovered: &ModelParams,
    targets: &[usize],
) -> Result<RecoveryError, SynthError> {
    if planted.num_networks() != recovered.num_networks() || planted.num_users() != recovered.num_users() {
        return Err(SynthError::DimensionMismatch("planted and recovered parameters differ in shape".into()));
    }
    if let Some(&u) = targets.iter().find(|&&u| u >= planted.num_users()) {
        return Err(SynthError::DimensionMismatch(format!("target user {u} out of range")));
    }
    let block = |p: &ModelParams| -> Vec<f64> { p.alpha.iter().copied().chain([p.alpha_pop]).collect() };
    let (a, b) = (block(planted), block(recovered));
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| y - x).collect();
    let (na, nb) = (norm(&a), norm(&b));
    let rel_l2_alpha = if na > 0.0 { norm(&diff) / na } else { norm(&diff) };
    let cosine_alpha =
        if na > 0.0 && nb > 0.0 { a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / (na * nb) } else { 0.0 };
    let s_rmse = if targets.is_empty() {
        0.0
    } else {
        let sse: f64 = targets.iter().map(|&u| (planted.s[u] - recovered.s[u]).powi(2)).sum();
        (sse / targets.len() as f64).sqrt()
    };
    Ok(RecoveryError { rel_l2_alpha, cosine_alpha, s_rmse })
}

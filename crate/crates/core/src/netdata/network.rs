use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    Weighted,
    Binary,
}

/// How the two directions of an unordered pair are combined when loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetrize {
    Sum,
    Max,
    Strict,
}

impl Symmetrize {
    /// Default rule for a network kind: call-style counts accumulate, binary
    /// relations take the max.
    pub fn default_for(kind: NetworkKind) -> Self {
        match kind {
            NetworkKind::Weighted => Symmetrize::Sum,
            NetworkKind::Binary => Symmetrize::Max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    None,
    Max,
    Total,
}

/// One undirected, non-negative weighted graph over `num_users` users.
///
/// Stored as a symmetric CSR adjacency: both directions of every edge are
/// present and neighbour lists are sorted. Zero-weight pairs are not edges.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateNetwork {
    name: String,
    kind: NetworkKind,
    num_users: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
}

impl CandidateNetwork {
    /// Builds a network from `(src, dst, weight)` triplets. Line numbers in
    /// diagnostics are 1-based positions in the iterator.
    pub fn from_edges<I>(
        name: impl Into<String>,
        kind: NetworkKind,
        num_users: usize,
        edges: I,
        symmetrize: Symmetrize,
    ) -> Result<Self, DataError>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let records = edges.into_iter().enumerate().map(|(idx, (src, dst, weight))| super::EdgeRecord {
            line: idx as u64 + 1,
            src,
            dst,
            weight,
        });
        Self::from_records(name, kind, num_users, records, symmetrize)
    }

    pub(crate) fn from_records<I>(
        name: impl Into<String>,
        kind: NetworkKind,
        num_users: usize,
        records: I,
        symmetrize: Symmetrize,
    ) -> Result<Self, DataError>
    where
        I: IntoIterator<Item = super::EdgeRecord>,
    {
        if num_users == 0 {
            return Err(DataError::Invalid("network must have at least one user".into()));
        }
        // (lo, hi) -> (forward weight seen as lo->hi, backward weight seen as hi->lo)
        let mut pairs: BTreeMap<(usize, usize), (Option<f64>, Option<f64>)> = BTreeMap::new();
        for rec in records {
            let super::EdgeRecord { line, src, dst, weight } = rec;
            for id in [src, dst] {
                if id >= num_users {
                    return Err(DataError::UserOutOfRange { line, id, num_users });
                }
            }
            if !weight.is_finite() {
                return Err(DataError::NonFiniteWeight { line });
            }
            if weight < 0.0 {
                return Err(DataError::NegativeWeight { line, weight });
            }
            if src == dst {
                return Err(DataError::SelfLoop { line, user: src });
            }
            if kind == NetworkKind::Binary && weight != 0.0 && weight != 1.0 {
                return Err(DataError::NonBinaryWeight { line, weight });
            }
            let key = (src.min(dst), src.max(dst));
            let entry = pairs.entry(key).or_insert((None, None));
            let slot = if src < dst { &mut entry.0 } else { &mut entry.1 };
            *slot = Some(match (*slot, symmetrize) {
                (None, _) => weight,
                (Some(prev), Symmetrize::Sum) => prev + weight,
                (Some(prev), Symmetrize::Max) => prev.max(weight),
                (Some(prev), Symmetrize::Strict) => {
                    if prev != weight {
                        return Err(DataError::Asymmetric { line, i: src, j: dst, forward: prev, backward: weight });
                    }
                    prev
                }
            });
            if symmetrize == Symmetrize::Strict {
                if let (Some(f), Some(b)) = *entry {
                    if f != b {
                        return Err(DataError::Asymmetric { line, i: key.0, j: key.1, forward: f, backward: b });
                    }
                }
            }
        }
        let mut triplets = Vec::with_capacity(pairs.len());
        for ((i, j), (fwd, bwd)) in pairs {
            let w = match (fwd, bwd, symmetrize) {
                (Some(f), Some(b), Symmetrize::Sum) => f + b,
                (Some(f), Some(b), _) => f.max(b),
                (Some(w), None, _) | (None, Some(w), _) => w,
                (None, None, _) => continue,
            };
            if kind == NetworkKind::Binary && w > 1.0 {
                // summing both directions of a binary relation still means "connected"
                triplets.push((i, j, 1.0));
            } else if w > 0.0 {
                triplets.push((i, j, w));
            }
        }
        Ok(Self::from_upper_triplets(name.into(), kind, num_users, &triplets))
    }

    /// `triplets` must hold each unordered pair once with `i < j` and `w > 0`.
    fn from_upper_triplets(
        name: String,
        kind: NetworkKind,
        num_users: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Self {
        let mut degree = vec![0usize; num_users];
        for &(i, j, _) in triplets {
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut offsets = Vec::with_capacity(num_users + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let nnz = *offsets.last().unwrap();
        let mut neighbors = vec![0usize; nnz];
        let mut weights = vec![0.0; nnz];
        let mut cursor = offsets[..num_users].to_vec();
        for &(i, j, w) in triplets {
            neighbors[cursor[i]] = j;
            weights[cursor[i]] = w;
            cursor[i] += 1;
            neighbors[cursor[j]] = i;
            weights[cursor[j]] = w;
            cursor[j] += 1;
        }
        for u in 0..num_users {
            let range = offsets[u]..offsets[u + 1];
            let mut row: Vec<(usize, f64)> =
                neighbors[range.clone()].iter().copied().zip(weights[range.clone()].iter().copied()).collect();
            row.sort_by_key(|&(n, _)| n);
            for (k, (n, w)) in row.into_iter().enumerate() {
                neighbors[range.start + k] = n;
                weights[range.start + k] = w;
            }
        }
        Self { name, kind, num_users, offsets, neighbors, weights }
    }

    /// A network with no edges.
    pub fn empty(name: impl Into<String>, kind: NetworkKind, num_users: usize) -> Self {
        Self::from_upper_triplets(name.into(), kind, num_users, &[])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn neighbors(&self, user: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[user]..self.offsets[user + 1];
        self.neighbors[range.clone()].iter().copied().zip(self.weights[range].iter().copied())
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let range = self.offsets[i]..self.offsets[i + 1];
        match self.neighbors[range.clone()].binary_search(&j) {
            Ok(pos) => self.weights[range.start + pos],
            Err(_) => 0.0,
        }
    }

    /// Each unordered edge once, `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.num_users)
            .flat_map(move |i| self.neighbors(i).filter(move |&(j, _)| j > i).map(move |(j, w)| (i, j, w)))
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// Sum of weights over unordered edges.
    pub fn total_weight(&self) -> f64 {
        self.edges().map(|(_, _, w)| w).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.num_users]; self.num_users];
        for (i, j, w) in self.edges() {
            dense[i][j] = w;
            dense[j][i] = w;
        }
        dense
    }

    /// Multiplies every weight by `factor` (> 0). The result is a weighted network.
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0 && factor.is_finite(), "scale factor must be positive");
        let mut out = self.clone();
        out.weights.iter_mut().for_each(|w| *w *= factor);
        if factor != 1.0 {
            out.kind = NetworkKind::Weighted;
        }
        out
    }

    /// Canonical `src,dst,weight` text, one unordered edge per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (i, j, w) in self.edges() {
            let _ = writeln!(out, "{i},{j},{w}");
        }
        out
    }
}

/// Rescales a network. `Max` divides by the largest weight, `Total` by the sum of
/// edge weights; both leave an edgeless network unchanged.
pub fn normalize_network(g: &CandidateNetwork, mode: Normalization) -> CandidateNetwork {
    let denom = match mode {
        Normalization::None => return g.clone(),
        Normalization::Max => g.max_weight(),
        Normalization::Total => g.total_weight(),
    };
    if denom <= 0.0 || denom == 1.0 {
        return g.clone();
    }
    let mut out = g.clone();
    out.weights.iter_mut().for_each(|w| *w /= denom);
    out
}

/// Ordered candidate networks over one user population, plus the optional
/// per-app popularity channel.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkStack {
    networks: Vec<CandidateNetwork>,
    popularity: Option<Vec<f64>>,
}

impl NetworkStack {
    pub fn new(networks: Vec<CandidateNetwork>) -> Result<Self, DataError> {
        let Some(first) = networks.first() else {
            return Ok(Self { networks, popularity: None });
        };
        let num_users = first.num_users();
        for g in &networks {
            if g.num_users() != num_users {
                return Err(DataError::DimensionMismatch {
                    what: "network user count",
                    expected: num_users,
                    found: g.num_users(),
                });
            }
        }
        Ok(Self { networks, popularity: None })
    }

    pub fn with_popularity(mut self, popularity: Vec<f64>) -> Result<Self, DataError> {
        if let Some(bad) = popularity.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(DataError::Invalid(format!("popularity entries must be finite and non-negative, got {bad}")));
        }
        self.popularity = Some(popularity);
        Ok(self)
    }

    pub fn without_popularity(mut self) -> Self {
        self.popularity = None;
        self
    }

    pub fn networks(&self) -> &[CandidateNetwork] {
        &self.networks
    }

    pub fn popularity(&self) -> Option<&[f64]> {
        self.popularity.as_deref()
    }

    /// Popularity of one app; zero when the channel is absent.
    pub fn popularity_of(&self, app: usize) -> f64 {
        self.popularity.as_ref().map_or(0.0, |c| c[app])
    }

    pub fn num_networks(&self) -> usize {
        self.networks.len()
    }

    /// User count shared by the member networks, if any.
    pub fn num_users(&self) -> Option<usize> {
        self.networks.first().map(CandidateNetwork::num_users)
    }

    /// Keeps only the networks at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            networks: indices.iter().map(|&i| self.networks[i].clone()).collect(),
            popularity: self.popularity.clone(),
        }
    }

    pub fn map_networks(&self, f: impl Fn(&CandidateNetwork) -> CandidateNetwork) -> Self {
        Self { networks: self.networks.iter().map(f).collect(), popularity: self.popularity.clone() }
    }
}

//! Adoption model: network potentials, the conditional adoption probability
//! `1 - exp(-(s_u + p_a(u)))` and the training log-likelihood with its
//! analytic gradient and curvature.
//!
//! The popularity channel is a per-app scalar feature `C^a` with coefficient
//! `alpha_pop`. It is the same as a virtual node that adopted every app and is
//! linked to each user with weight `C^a`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netdata::{AdoptionMatrix, CandidateNetwork, NetworkStack};

/// Lower clamp on `z` inside `log(1 - exp(-z))`.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("non-finite parameter {0}")]
    NonFinite(String),
    #[error("constrained parameters must be non-negative: {0}")]
    Infeasible(String),
}

/// Composite vector, popularity weight and per-user susceptibilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub alpha: Vec<f64>,
    pub alpha_pop: f64,
    pub s: Vec<f64>,
    /// Whether non-negativity was enforced on every coordinate.
    pub constrained: bool,
}

impl ModelParams {
    pub fn zeros(num_networks: usize, num_users: usize) -> Self {
        Self { alpha: vec![0.0; num_networks], alpha_pop: 0.0, s: vec![0.0; num_users], constrained: true }
    }

    pub fn num_networks(&self) -> usize {
        self.alpha.len()
    }

    pub fn num_users(&self) -> usize {
        self.s.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in self.named_values() {
            if !v.is_finite() {
                return Err(ModelError::NonFinite(format!("{name} = {v}")));
            }
        }
        if self.constrained {
            if let Some((name, v)) = self.named_values().find(|(_, v)| *v < 0.0) {
                return Err(ModelError::Infeasible(format!("{name} = {v}")));
            }
        }
        Ok(())
    }

    fn named_values(&self) -> impl Iterator<Item = (String, f64)> + '_ {
        let alphas = self.alpha.iter().enumerate().map(|(m, &v)| (format!("alpha[{m}]"), v));
        let s = self.s.iter().enumerate().map(|(u, &v)| (format!("s[{u}]"), v));
        alphas.chain(std::iter::once(("alpha_pop".to_string(), self.alpha_pop))).chain(s)
    }

    /// Flattens to the solver layout `(s_1..s_U, alpha_1..alpha_M, alpha_pop)`.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = self.s.clone();
        v.extend_from_slice(&self.alpha);
        v.push(self.alpha_pop);
        v
    }

    pub fn from_vector(theta: &[f64], num_users: usize, num_networks: usize, constrained: bool) -> Self {
        assert_eq!(theta.len(), num_users + num_networks + 1);
        Self {
            s: theta[..num_users].to_vec(),
            alpha: theta[num_users..num_users + num_networks].to_vec(),
            alpha_pop: theta[num_users + num_networks],
            constrained,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Per-network potentials `p^m_a(u)` for one app, plus its popularity `C^a`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTable {
    pub per_network: Vec<Vec<f64>>,
    pub popularity: f64,
}

impl PotentialTable {
    pub fn num_users(&self) -> usize {
        self.per_network.first().map_or(0, Vec::len)
    }
}

/// `out[i] = sum_j w_ij x_j` over the neighbours of `i` (pairs with positive weight).
pub fn per_network_potentials(g: &CandidateNetwork, x_a: &[bool]) -> Result<Vec<f64>, ModelError> {
    if x_a.len() != g.num_users() {
        return Err(ModelError::DimensionMismatch {
            what: "adoption vector",
            expected: g.num_users(),
            found: x_a.len(),
        });
    }
    let mut out = vec![0.0; g.num_users()];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = g.neighbors(i).filter(|&(j, _)| x_a[j]).map(|(_, w)| w).sum();
    }
    Ok(out)
}

/// Potentials of every stack member for one app with evidence vector `x_a`.
pub fn potential_table(stack: &NetworkStack, x_a: &[bool], popularity: f64) -> Result<PotentialTable, ModelError> {
    let per_network = stack.networks().iter().map(|g| per_network_potentials(g, x_a)).collect::<Result<Vec<_>, _>>()?;
    Ok(PotentialTable { per_network, popularity })
}

/// `p_a(u) = sum_m alpha_m p^m_a(u) + alpha_pop C^a` for every user.
pub fn composite_potential(params: &ModelParams, table: &PotentialTable) -> Result<Vec<f64>, ModelError> {
    if table.per_network.len() != params.num_networks() {
        return Err(ModelError::DimensionMismatch {
            what: "network count",
            expected: params.num_networks(),
            found: table.per_network.len(),
        });
    }
    let n = table.num_users();
    let base = params.alpha_pop * table.popularity;
    Ok((0..n).map(|u| params.alpha.iter().zip(&table.per_network).map(|(a, p)| a * p[u]).sum::<f64>() + base).collect())
}

/// `1 - exp(-(s_u + p))`. A negative exponent (only reachable with negative
/// weights) is clamped to zero, giving probability 0.
pub fn adoption_probability(s_u: f64, p: f64) -> f64 {
    -(-(s_u + p).max(0.0)).exp_m1()
}

/// `log(1 - exp(-z))` for `z > 0`, accurate at both ends.
pub fn log1mexp(z: f64) -> f64 {
    if z < std::f64::consts::LN_2 {
        (-(-z).exp_m1()).ln()
    } else {
        (-(-z).exp()).ln_1p()
    }
}

/// `d/dz log(1 - exp(-z)) = 1 / (exp(z) - 1)`.
fn log1mexp_slope(z: f64) -> f64 {
    1.0 / z.exp_m1()
}

/// Which users' terms enter the likelihood (`rows`) and whose adoption bits
/// feed the potentials (`evidence`).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingView {
    pub rows: Vec<bool>,
    pub evidence: Vec<bool>,
}

impl TrainingView {
    pub fn all(num_users: usize) -> Self {
        Self { rows: vec![true; num_users], evidence: vec![true; num_users] }
    }
}

/// Log-likelihood, gradient and curvature evaluated at one point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub curvature: Option<Curvature>,
}

/// Negated Hessian `K = -H` in arrow form: diagonal over `s`, a dense `s x w`
/// coupling block and a dense block over the `w = M + 1` weights.
#[derive(Debug, Clone)]
pub struct Curvature {
    pub ss: Vec<f64>,
    /// Row-major `U x w`.
    pub sw: Vec<f64>,
    /// Row-major `w x w`.
    pub ww: Vec<f64>,
}

/// Training cells `(app, user)` with their features precomputed. Feature
/// layout per cell is `(p^1..p^M, C^a)`.
#[derive(Debug, Clone)]
pub struct LikelihoodDesign {
    num_users: usize,
    num_networks: usize,
    pos_users: Vec<usize>,
    pos_features: Vec<f64>,
    neg_users: Vec<usize>,
    neg_features: Vec<f64>,
    // aggregates over negative cells, used when every z is known to be >= 0
    neg_count: Vec<f64>,
    neg_feature_sum: Vec<f64>,
}

impl LikelihoodDesign {
    pub fn build(
        stack: &NetworkStack,
        adoptions: &AdoptionMatrix,
        train_apps: &[usize],
        view: &TrainingView,
    ) -> Result<Self, ModelError> {
        let num_users = adoptions.num_users();
        if let Some(u) = stack.num_users() {
            if u != num_users {
                return Err(ModelError::DimensionMismatch { what: "stack user count", expected: num_users, found: u });
            }
        }
        if let Some(c) = stack.popularity() {
            if c.len() != adoptions.num_apps() {
                return Err(ModelError::DimensionMismatch {
                    what: "popularity length",
                    expected: adoptions.num_apps(),
                    found: c.len(),
                });
            }
        }
        for (what, v) in [("row mask", &view.rows), ("evidence mask", &view.evidence)] {
            if v.len() != num_users {
                return Err(ModelError::DimensionMismatch { what, expected: num_users, found: v.len() });
            }
        }
        let m = stack.num_networks();
        let width = m + 1;
        let mut design = Self {
            num_users,
            num_networks: m,
            pos_users: Vec::new(),
            pos_features: Vec::new(),
            neg_users: Vec::new(),
            neg_features: Vec::new(),
            neg_count: vec![0.0; num_users],
            neg_feature_sum: vec![0.0; width],
        };
        for &a in train_apps {
            let x = adoptions.adopter_vector(a);
            let evidence: Vec<bool> = x.iter().zip(&view.evidence).map(|(&xi, &e)| xi && e).collect();
            let table = potential_table(stack, &evidence, stack.popularity_of(a))?;
            for u in (0..num_users).filter(|&u| view.rows[u]) {
                let (users, feats) = if x[u] {
                    (&mut design.pos_users, &mut design.pos_features)
                } else {
                    design.neg_count[u] += 1.0;
                    (&mut design.neg_users, &mut design.neg_features)
                };
                users.push(u);
                let start = feats.len();
                feats.extend(table.per_network.iter().map(|p| p[u]));
                feats.push(table.popularity);
                if !x[u] {
                    for (acc, f) in design.neg_feature_sum.iter_mut().zip(&feats[start..]) {
                        *acc += f;
                    }
                }
            }
        }
        Ok(design)
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_networks(&self) -> usize {
        self.num_networks
    }

    /// Length of the parameter vector, `U + M + 1`.
    pub fn dim(&self) -> usize {
        self.num_users + self.num_networks + 1
    }

    /// Weight coordinates (networks, then popularity) whose feature is zero in
    /// every cell. The likelihood does not depend on them.
    pub fn silent_weights(&self) -> Vec<bool> {
        let width = self.num_networks + 1;
        let mut silent = vec![true; width];
        for row in self.pos_features.chunks_exact(width).chain(self.neg_features.chunks_exact(width)) {
            for (flag, &f) in silent.iter_mut().zip(row) {
                *flag &= f == 0.0;
            }
        }
        silent
    }

    pub fn num_cells(&self) -> usize {
        self.pos_users.len() + self.neg_users.len()
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        self.evaluate_inner(theta, false, false).value
    }

    pub fn evaluate(&self, theta: &[f64], with_curvature: bool) -> Evaluation {
        self.evaluate_inner(theta, true, with_curvature)
    }

    fn evaluate_inner(&self, theta: &[f64], with_gradient: bool, with_curvature: bool) -> Evaluation {
        assert_eq!(theta.len(), self.dim(), "parameter vector length");
        let u_count = self.num_users;
        let width = self.num_networks + 1;
        let (s, weights) = theta.split_at(u_count);
        let mut value = 0.0;
        let mut gradient = if with_gradient { vec![0.0; theta.len()] } else { Vec::new() };
        let mut curvature = with_curvature.then(|| Curvature {
            ss: vec![0.0; u_count],
            sw: vec![0.0; u_count * width],
            ww: vec![0.0; width * width],
        });

        for (k, &u) in self.pos_users.iter().enumerate() {
            let f = &self.pos_features[k * width..(k + 1) * width];
            let z = s[u] + dot(weights, f);
            let zc = z.max(LOG_CLAMP);
            value += log1mexp(zc);
            if with_gradient {
                let h = log1mexp_slope(zc);
                gradient[u] += h;
                for (g, fk) in gradient[u_count..].iter_mut().zip(f) {
                    *g += h * fk;
                }
                if let Some(c) = curvature.as_mut() {
                    let k2 = h * (1.0 + h);
                    c.ss[u] += k2;
                    let row = &mut c.sw[u * width..(u + 1) * width];
                    for (r, fk) in row.iter_mut().zip(f) {
                        *r += k2 * fk;
                    }
                    for i in 0..width {
                        let scaled = k2 * f[i];
                        for j in 0..width {
                            c.ww[i * width + j] += scaled * f[j];
                        }
                    }
                }
            }
        }

        let all_nonnegative = theta.iter().all(|&t| t >= 0.0);
        if all_nonnegative {
            // every feature is non-negative, so z >= 0 on every cell
            value -= dot(s, &self.neg_count) + dot(weights, &self.neg_feature_sum);
            if with_gradient {
                for (g, n) in gradient[..u_count].iter_mut().zip(&self.neg_count) {
                    *g -= n;
                }
                for (g, fs) in gradient[u_count..].iter_mut().zip(&self.neg_feature_sum) {
                    *g -= fs;
                }
            }
        } else {
            for (k, &u) in self.neg_users.iter().enumerate() {
                let f = &self.neg_features[k * width..(k + 1) * width];
                let z = s[u] + dot(weights, f);
                if z >= 0.0 {
                    value -= z;
                    if with_gradient {
                        gradient[u] -= 1.0;
                        for (g, fk) in gradient[u_count..].iter_mut().zip(f) {
                            *g -= fk;
                        }
                    }
                }
            }
        }
        Evaluation { value, gradient, curvature }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_params(params: &ModelParams, stack: &NetworkStack, adoptions: &AdoptionMatrix) -> Result<(), ModelError> {
    if params.num_networks() != stack.num_networks() {
        return Err(ModelError::DimensionMismatch {
            what: "network count",
            expected: stack.num_networks(),
            found: params.num_networks(),
        });
    }
    if params.num_users() != adoptions.num_users() {
        return Err(ModelError::DimensionMismatch {
            what: "susceptibility count",
            expected: adoptions.num_users(),
            found: params.num_users(),
        });
    }
    params.validate()
}

/// Training objective summed over `train_apps` and all users. The popularity
/// channel is read from `stack` (absent means `C^a = 0`).
pub fn log_likelihood(
    params: &ModelParams,
    stack: &NetworkStack,
    adoptions: &AdoptionMatrix,
    train_apps: &[usize],
) -> Result<f64, ModelError> {
    check_params(params, stack, adoptions)?;
    let design = LikelihoodDesign::build(stack, adoptions, train_apps, &TrainingView::all(adoptions.num_users()))?;
    Ok(design.value(&params.to_vector()))
}

/// Gradient of [`log_likelihood`] in the layout `(s_1..s_U, alpha_1..alpha_M, alpha_pop)`.
pub fn log_likelihood_gradient(
    params: &ModelParams,
    stack: &NetworkStack,
    adoptions: &AdoptionMatrix,
    train_apps: &[usize],
) -> Result<Vec<f64>, ModelError> {
    check_params(params, stack, adoptions)?;
    let design = LikelihoodDesign::build(stack, adoptions, train_apps, &TrainingView::all(adoptions.num_users()))?;
    Ok(design.evaluate(&params.to_vector(), false).gradient)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netdata::{Adoption, NetworkKind, Symmetrize};

    fn line_graph(edges: &[(usize, usize, f64)], n: usize) -> CandidateNetwork {
        CandidateNetwork::from_edges("g", NetworkKind::Weighted, n, edges.iter().copied(), Symmetrize::Sum).unwrap()
    }

    #[test]
    fn potential_counts_adopter_neighbours_only() {
        // user 0 linked to 1 (w=2, adopter) and 2 (w=3, non-adopter)
        let g = line_graph(&[(0, 1, 2.0), (0, 2, 3.0)], 3);
        let p = per_network_potentials(&g, &[false, true, false]).unwrap();
        assert_eq!(p[0], 2.0);
        assert_eq!(per_network_potentials(&g, &[false; 3]).unwrap(), vec![0.0; 3]);
        assert!(per_network_potentials(&g, &[false; 2]).is_err());
    }

    #[test]
    fn composite_potential_examples() {
        let table = PotentialTable { per_network: vec![vec![4.0], vec![9.0]], popularity: 0.0 };
        let params = ModelParams { alpha: vec![1.0, 0.0], alpha_pop: 0.0, s: vec![0.0], constrained: true };
        assert_eq!(composite_potential(&params, &table).unwrap(), vec![4.0]);

        let table = PotentialTable { per_network: vec![vec![2.0], vec![4.0]], popularity: 10.0 };
        let params = ModelParams { alpha: vec![0.5, 0.5], alpha_pop: 0.1, s: vec![0.0], constrained: true };
        assert!((composite_potential(&params, &table).unwrap()[0] - 4.0).abs() < 1e-15);

        let zero = ModelParams::zeros(2, 1);
        assert_eq!(composite_potential(&zero, &table).unwrap(), vec![0.0]);
    }

    #[test]
    fn probability_examples() {
        assert_eq!(adoption_probability(0.0, 0.0), 0.0);
        assert!((adoption_probability(std::f64::consts::LN_2, 0.0) - 0.5).abs() < 1e-15);
        // independent evaluation: 1 - e^{-0.6}
        let expected = 1.0 - (-0.6f64).exp();
        assert!((adoption_probability(0.1, 0.5) - expected).abs() < 1e-15);
        assert!((expected - 0.451188).abs() < 1e-6);
        assert_eq!(adoption_probability(0.0, -3.0), 0.0);
    }

    #[test]
    fn log1mexp_matches_naive_form() {
        for z in [1e-6, 0.01, 0.3, 0.69, 0.7, 2.0, 30.0] {
            let naive = (1.0 - (-z as f64).exp()).ln();
            assert!((log1mexp(z) - naive).abs() <= 1e-9 * naive.abs().max(1.0), "z = {z}");
        }
        assert!(log1mexp(LOG_CLAMP).is_finite());
    }

    fn one_app_two_users() -> (NetworkStack, AdoptionMatrix) {
        let stack = NetworkStack::new(vec![CandidateNetwork::empty("g", NetworkKind::Weighted, 2)]).unwrap();
        let m = AdoptionMatrix::from_entries(2, 1, [Adoption { user: 0, app: 0, timestamp: None }]).unwrap();
        (stack, m)
    }

    #[test]
    fn likelihood_hand_evaluation() {
        let (stack, m) = one_app_two_users();
        let params =
            ModelParams { alpha: vec![0.0], alpha_pop: 0.0, s: vec![std::f64::consts::LN_2, 0.3], constrained: true };
        let f = log_likelihood(&params, &stack, &m, &[0]).unwrap();
        assert!((f - (0.5f64.ln() - 0.3)).abs() < 1e-12);
        assert!((f + 0.993147).abs() < 1e-6);
    }

    #[test]
    fn likelihood_boundary_cases() {
        let stack = NetworkStack::new(vec![CandidateNetwork::empty("g", NetworkKind::Weighted, 3)]).unwrap();
        let empty = AdoptionMatrix::new(3, 2);
        let zero = ModelParams::zeros(1, 3);
        assert_eq!(log_likelihood(&zero, &stack, &empty, &[0, 1]).unwrap(), 0.0);

        let (stack, m) = one_app_two_users();
        let f = log_likelihood(&ModelParams::zeros(1, 2), &stack, &m, &[0]).unwrap();
        assert!(f.is_finite());
        assert!((f - log1mexp(LOG_CLAMP)).abs() < 1e-9);
        assert!(f < -20.0);

        let bad = ModelParams { alpha: vec![f64::NAN], alpha_pop: 0.0, s: vec![0.0, 0.0], constrained: true };
        assert!(matches!(log_likelihood(&bad, &stack, &m, &[0]), Err(ModelError::NonFinite(_))));
    }

    #[test]
    fn gradient_trivial_cases() {
        let stack = NetworkStack::new(vec![CandidateNetwork::empty("g", NetworkKind::Weighted, 3)]).unwrap();
        let empty = AdoptionMatrix::new(3, 4);
        let params = ModelParams { alpha: vec![0.2], alpha_pop: 0.0, s: vec![0.1, 0.2, 0.3], constrained: true };
        let g = log_likelihood_gradient(&params, &stack, &empty, &[]).unwrap();
        assert_eq!(g, vec![0.0; 5]);
        let g = log_likelihood_gradient(&params, &stack, &empty, &[0, 1, 3]).unwrap();
        assert_eq!(&g[..3], &[-3.0, -3.0, -3.0]);
    }

    #[test]
    fn params_json_shape() {
        let p = ModelParams { alpha: vec![0.5, 0.25], alpha_pop: 0.125, s: vec![1.0], constrained: true };
        let v: serde_json::Value = serde_json::from_str(&p.to_json()).unwrap();
        assert_eq!(v, serde_json::json!({"alpha": [0.5, 0.25], "alpha_pop": 0.125, "s": [1.0], "constrained": true}));
        assert_eq!(ModelParams::from_json(&p.to_json()).unwrap(), p);
        assert!(ModelParams::from_json(r#"{"alpha":[],"alpha_pop":0,"s":[],"constrained":true,"x":1}"#).is_err());
    }
}

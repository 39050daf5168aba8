use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AdoptionMatrix, DataError};

/// Degree histograms of the adoption bipartite graph, stored as sorted
/// `[count, frequency]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub users_per_app: Vec<(usize, usize)>,
    pub apps_per_user: Vec<(usize, usize)>,
    /// Maximum-likelihood exponential rate for apps-per-user, `1 / mean`.
    pub exp_rate: f64,
}

impl DatasetStats {
    pub fn mean_apps_per_user(&self) -> f64 {
        let (mass, total) =
            self.apps_per_user.iter().fold((0usize, 0usize), |(m, t), &(count, freq)| (m + freq, t + count * freq));
        if mass == 0 {
            0.0
        } else {
            total as f64 / mass as f64
        }
    }
}

fn histogram(values: impl IntoIterator<Item = usize>) -> Vec<(usize, usize)> {
    let mut h = BTreeMap::new();
    for v in values {
        *h.entry(v).or_insert(0) += 1;
    }
    h.into_iter().collect()
}

pub fn dataset_stats(adoptions: &AdoptionMatrix) -> Result<DatasetStats, DataError> {
    if adoptions.num_entries() == 0 {
        return Err(DataError::EmptyData);
    }
    let apps_per_user = adoptions.apps_per_user();
    let mean = apps_per_user.iter().sum::<usize>() as f64 / apps_per_user.len() as f64;
    Ok(DatasetStats {
        users_per_app: histogram(adoptions.users_per_app()),
        apps_per_user: histogram(apps_per_user),
        exp_rate: 1.0 / mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netdata::Adoption;

    fn matrix(num_users: usize, num_apps: usize, pairs: &[(usize, usize)]) -> AdoptionMatrix {
        AdoptionMatrix::from_entries(
            num_users,
            num_apps,
            pairs.iter().map(|&(user, app)| Adoption { user, app, timestamp: None }),
        )
        .unwrap()
    }

    #[test]
    fn two_users_three_and_one() {
        let m = matrix(2, 3, &[(0, 0), (0, 1), (0, 2), (1, 0)]);
        let s = dataset_stats(&m).unwrap();
        assert_eq!(s.apps_per_user, vec![(1, 1), (3, 1)]);
        assert_eq!(s.exp_rate, 0.5);
        assert_eq!(s.users_per_app.iter().map(|&(_, f)| f).sum::<usize>(), 3);
    }

    #[test]
    fn single_app_four_adopters() {
        let m = matrix(4, 1, &[(0, 0), (1, 0), (2, 0), (3, 0)]);
        let s = dataset_stats(&m).unwrap();
        assert_eq!(s.users_per_app, vec![(4, 1)]);
    }

    #[test]
    fn empty_matrix_is_an_error() {
        assert_eq!(dataset_stats(&AdoptionMatrix::new(3, 2)), Err(DataError::EmptyData));
    }

    #[test]
    fn json_shape() {
        let m = matrix(2, 3, &[(0, 0), (0, 1), (0, 2), (1, 0)]);
        let v = serde_json::to_value(dataset_stats(&m).unwrap()).unwrap();
        assert_eq!(v["apps_per_user"], serde_json::json!([[1, 1], [3, 1]]));
        assert_eq!(v["exp_rate"], serde_json::json!(0.5));
    }
}

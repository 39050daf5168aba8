use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::HarnessError;
use crate::netdata::AdoptionMatrix;

fn shuffled(items: &[usize], seed: u64) -> Vec<usize> {
    let mut out = items.to_vec();
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// Seeded k-fold partition of `apps`. Entry `i` is `(train, test)` with fold
/// `i` held out; fold sizes differ by at most one. Both sides are ascending.
pub fn kfold_apps(apps: &[usize], k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>, HarnessError> {
    if k < 2 || k > apps.len() {
        return Err(HarnessError::Degenerate(format!("{k} folds over {} apps", apps.len())));
    }
    let order = shuffled(apps, seed);
    let (base, extra) = (apps.len() / k, apps.len() % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        folds.push(start..start + len);
        start += len;
    }
    Ok(folds
        .into_iter()
        .map(|range| {
            let test = sorted(order[range.clone()].to_vec());
            let train = sorted(order[..range.start].iter().chain(&order[range.end..]).copied().collect());
            (train, test)
        })
        .collect())
}

/// Seeded app-level split with `round(fraction * |apps|)` training apps.
pub fn fraction_split(apps: &[usize], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), HarnessError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(HarnessError::InvalidSpec(format!("train fraction {fraction} outside (0, 1)")));
    }
    let n_train = (fraction * apps.len() as f64).round() as usize;
    if n_train == 0 || n_train >= apps.len() {
        return Err(HarnessError::Degenerate(format!(
            "fraction {fraction} of {} apps leaves an empty side",
            apps.len()
        )));
    }
    let order = shuffled(apps, seed);
    Ok((sorted(order[..n_train].to_vec()), sorted(order[n_train..].to_vec())))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FutureSplit {
    pub app: usize,
    /// Earlier half of the adopters (rounded up), ascending by user id.
    pub g1: Vec<usize>,
    /// Later adopters, ascending by user id.
    pub g2: Vec<usize>,
}

/// Splits each app's adopters by adoption time; ties go to the lower user id.
pub fn future_split(adoptions: &AdoptionMatrix, apps: &[usize]) -> Result<Vec<FutureSplit>, HarnessError> {
    apps.iter()
        .map(|&app| {
            let mut timed = adoptions
                .adopters_with_time(app)
                .iter()
                .map(|&(user, t)| t.map(|t| (t, user)).ok_or(HarnessError::MissingTimestamps { app, user }))
                .collect::<Result<Vec<_>, _>>()?;
            timed.sort_unstable();
            let cut = timed.len().div_ceil(2);
            let g1 = sorted(timed[..cut].iter().map(|p| p.1).collect());
            let g2 = sorted(timed[cut..].iter().map(|p| p.1).collect());
            Ok(FutureSplit { app, g1, g2 })
        })
        .collect()
}

/// Seeded user partition; returns the observable mask with
/// `floor(fraction * U + 1/2)` observable users.
pub fn observable_user_split(num_users: usize, fraction: f64, seed: u64) -> Result<Vec<bool>, HarnessError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(HarnessError::InvalidSpec(format!("observable fraction {fraction} outside (0, 1)")));
    }
    let n_obs = (fraction * num_users as f64 + 0.5).floor() as usize;
    if n_obs == 0 || n_obs >= num_users {
        return Err(HarnessError::Degenerate(format!("fraction {fraction} of {num_users} users leaves an empty side")));
    }
    let users: Vec<usize> = (0..num_users).collect();
    let mut mask = vec![false; num_users];
    for &u in &shuffled(&users, seed)[..n_obs] {
        mask[u] = true;
    }
    Ok(mask)
}

/// The `floor(U/2)` users with the fewest installations, ties by user id.
pub fn low_activity_subset(adoptions: &AdoptionMatrix) -> Vec<usize> {
    let counts = adoptions.apps_per_user();
    let mut users: Vec<usize> = (0..counts.len()).collect();
    users.sort_by_key(|&u| (counts[u], u));
    users.truncate(counts.len() / 2);
    sorted(users)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netdata::Adoption;
    use proptest::prelude::*;

    #[test]
    fn kfold_partitions_apps() {
        let apps: Vec<usize> = (0..10).collect();
        let folds = kfold_apps(&apps, 5, 1).unwrap();
        assert_eq!(folds.len(), 5);
        let mut seen: Vec<usize> = folds.iter().flat_map(|f| f.1.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, apps);
        assert!(folds.iter().all(|(train, test)| test.len() == 2 && train.len() == 8));
        assert_eq!(folds, kfold_apps(&apps, 5, 1).unwrap());
        let loo = kfold_apps(&apps, 10, 2).unwrap();
        assert!(loo.iter().all(|f| f.1.len() == 1));
        assert!(kfold_apps(&apps, 11, 0).is_err());
    }

    #[test]
    fn fraction_rounding() {
        let apps: Vec<usize> = (0..10).collect();
        let (train, test) = fraction_split(&apps, 0.5, 3).unwrap();
        assert_eq!((train.len(), test.len()), (5, 5));
        let apps: Vec<usize> = (0..173).collect();
        let (train, test) = fraction_split(&apps, 0.2, 3).unwrap();
        assert_eq!((train.len(), test.len()), (35, 138));
        assert!(fraction_split(&apps, 1.0, 0).is_err());
        assert!(fraction_split(&[1, 2], 0.1, 0).is_err());
    }

    fn timed(times: &[(usize, i64)]) -> AdoptionMatrix {
        AdoptionMatrix::from_entries(
            10,
            1,
            times.iter().map(|&(user, t)| Adoption { user, app: 0, timestamp: Some(t) }),
        )
        .unwrap()
    }

    #[test]
    fn future_split_examples() {
        let m = timed(&[(3, 1), (1, 2), (7, 3), (0, 4)]);
        let s = &future_split(&m, &[0]).unwrap()[0];
        assert_eq!((s.g1.clone(), s.g2.clone()), (vec![1, 3], vec![0, 7]));
        let s = &future_split(&timed(&[(4, 9)]), &[0]).unwrap()[0];
        assert_eq!((s.g1.len(), s.g2.len()), (1, 0));
        let s = &future_split(&timed(&[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]), &[0]).unwrap()[0];
        assert_eq!((s.g1.len(), s.g2.len()), (3, 2));
        // equal timestamps fall back to user id
        let s = &future_split(&timed(&[(5, 1), (2, 1)]), &[0]).unwrap()[0];
        assert_eq!(s.g1, vec![2]);
        let untimed = AdoptionMatrix::from_entries(3, 1, [Adoption { user: 1, app: 0, timestamp: None }]).unwrap();
        assert_eq!(future_split(&untimed, &[0]), Err(HarnessError::MissingTimestamps { app: 0, user: 1 }));
    }

    #[test]
    fn observable_split_rounds_half_up() {
        let mask = observable_user_split(55, 0.5, 7).unwrap();
        assert_eq!(mask.iter().filter(|&&b| b).count(), 28);
        assert_eq!(mask, observable_user_split(55, 0.5, 7).unwrap());
        assert!(observable_user_split(1, 0.5, 0).is_err());
    }

    #[test]
    fn low_activity_examples() {
        let entries = |counts: &[usize]| {
            let mut v = Vec::new();
            for (user, &c) in counts.iter().enumerate() {
                v.extend((0..c).map(|app| Adoption { user, app, timestamp: None }));
            }
            AdoptionMatrix::from_entries(counts.len(), 12, v).unwrap()
        };
        assert_eq!(low_activity_subset(&entries(&[10, 2, 7, 1])), vec![1, 3]);
        assert_eq!(low_activity_subset(&entries(&[3, 3, 3, 3, 3])), vec![0, 1]);
        assert_eq!(low_activity_subset(&entries(&[5, 3])), vec![1]);
    }

    proptest! {
        #[test]
        fn fraction_split_partitions(n in 2usize..200, f in 0.05f64..0.95, seed in any::<u64>()) {
            let apps: Vec<usize> = (0..n).map(|a| a * 3).collect();
            if let Ok((train, test)) = fraction_split(&apps, f, seed) {
                let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, apps);
                prop_assert_eq!(train.len(), (f * n as f64).round() as usize);
            }
        }

        #[test]
        fn kfold_sizes_are_balanced(n in 2usize..100, k_seed in 0usize..100, seed in any::<u64>()) {
            let k = 2 + k_seed % (n - 1);
            let apps: Vec<usize> = (0..n).collect();
            let folds = kfold_apps(&apps, k, seed).unwrap();
            let sizes: Vec<usize> = folds.iter().map(|f| f.1.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for (train, test) in &folds {
                prop_assert!(train.iter().all(|a| !test.contains(a)));
                prop_assert_eq!(train.len() + test.len(), n);
            }
        }
    }
}

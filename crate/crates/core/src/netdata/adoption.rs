use std::fmt::Write as _;

use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Adoption {
    pub user: usize,
    pub app: usize,
    /// Installation time in epoch seconds, when known.
    pub timestamp: Option<i64>,
}

/// Binary user x app installation matrix, stored per app as a user-sorted
/// adopter list.
#[derive(Debug, Clone, PartialEq)]
pub struct AdoptionMatrix {
    num_users: usize,
    num_apps: usize,
    app_labels: Vec<String>,
    by_app: Vec<Vec<(usize, Option<i64>)>>,
}

impl AdoptionMatrix {
    /// An all-zero matrix.
    pub fn new(num_users: usize, num_apps: usize) -> Self {
        Self {
            num_users,
            num_apps,
            app_labels: (0..num_apps).map(|a| a.to_string()).collect(),
            by_app: vec![Vec::new(); num_apps],
        }
    }

    /// Collects entries, deduplicating identical `(user, app)` pairs. A pair
    /// repeated with a different timestamp is an error.
    pub fn from_entries<I>(num_users: usize, num_apps: usize, entries: I) -> Result<Self, DataError>
    where
        I: IntoIterator<Item = Adoption>,
    {
        let records = entries.into_iter().enumerate().map(|(i, e)| super::AdoptionRecord {
            line: i as u64 + 1,
            user: e.user,
            app: e.app,
            timestamp: e.timestamp,
        });
        Self::from_records(num_users, num_apps, records)
    }

    pub(crate) fn from_records<I>(num_users: usize, num_apps: usize, records: I) -> Result<Self, DataError>
    where
        I: IntoIterator<Item = super::AdoptionRecord>,
    {
        let mut m = Self::new(num_users, num_apps);
        for rec in records {
            if rec.user >= num_users {
                return Err(DataError::UserOutOfRange { line: rec.line, id: rec.user, num_users });
            }
            if rec.app >= num_apps {
                return Err(DataError::AppOutOfRange { line: rec.line, id: rec.app, num_apps });
            }
            let list = &mut m.by_app[rec.app];
            match list.binary_search_by_key(&rec.user, |&(u, _)| u) {
                Ok(pos) => {
                    if list[pos].1 != rec.timestamp {
                        return Err(DataError::ConflictingTimestamp { line: rec.line, user: rec.user, app: rec.app });
                    }
                }
                Err(pos) => list.insert(pos, (rec.user, rec.timestamp)),
            }
        }
        Ok(m)
    }

    pub fn with_app_labels(mut self, labels: Vec<String>) -> Result<Self, DataError> {
        if labels.len() != self.num_apps {
            return Err(DataError::DimensionMismatch {
                what: "app labels",
                expected: self.num_apps,
                found: labels.len(),
            });
        }
        self.app_labels = labels;
        Ok(self)
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_apps(&self) -> usize {
        self.num_apps
    }

    pub fn app_labels(&self) -> &[String] {
        &self.app_labels
    }

    pub fn num_entries(&self) -> usize {
        self.by_app.iter().map(Vec::len).sum()
    }

    pub fn is_adopted(&self, user: usize, app: usize) -> bool {
        self.by_app[app].binary_search_by_key(&user, |&(u, _)| u).is_ok()
    }

    pub fn timestamp(&self, user: usize, app: usize) -> Option<i64> {
        let list = &self.by_app[app];
        list.binary_search_by_key(&user, |&(u, _)| u).ok().and_then(|pos| list[pos].1)
    }

    /// Adopters of `app` in ascending user order.
    pub fn adopters(&self, app: usize) -> impl Iterator<Item = usize> + '_ {
        self.by_app[app].iter().map(|&(u, _)| u)
    }

    pub fn adopters_with_time(&self, app: usize) -> &[(usize, Option<i64>)] {
        &self.by_app[app]
    }

    pub fn num_adopters(&self, app: usize) -> usize {
        self.by_app[app].len()
    }

    /// Indicator vector x^a over all users.
    pub fn adopter_vector(&self, app: usize) -> Vec<bool> {
        let mut x = vec![false; self.num_users];
        for u in self.adopters(app) {
            x[u] = true;
        }
        x
    }

    /// All entries ordered by `(app, user)`.
    pub fn entries(&self) -> impl Iterator<Item = Adoption> + '_ {
        self.by_app
            .iter()
            .enumerate()
            .flat_map(|(app, list)| list.iter().map(move |&(user, timestamp)| Adoption { user, app, timestamp }))
    }

    pub fn apps_per_user(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_users];
        for list in &self.by_app {
            for &(u, _) in list {
                counts[u] += 1;
            }
        }
        counts
    }

    /// Per-user install counts restricted to the listed apps.
    pub fn apps_per_user_in(&self, apps: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.num_users];
        for &a in apps {
            for &(u, _) in &self.by_app[a] {
                counts[u] += 1;
            }
        }
        counts
    }

    pub fn users_per_app(&self) -> Vec<usize> {
        self.by_app.iter().map(Vec::len).collect()
    }

    /// Same shape, keeping only the entries of the listed apps.
    pub fn restrict_apps(&self, apps: &[usize]) -> Self {
        let mut out = Self { by_app: vec![Vec::new(); self.num_apps], ..self.clone() };
        for &a in apps {
            out.by_app[a] = self.by_app[a].clone();
        }
        out
    }

    /// Same shape, keeping only the entries of users with `keep[u]`.
    pub fn restrict_users(&self, keep: &[bool]) -> Self {
        let by_app = self.by_app.iter().map(|list| list.iter().copied().filter(|&(u, _)| keep[u]).collect()).collect();
        Self { by_app, ..self.clone() }
    }

    /// True when every adopter of every listed app carries a timestamp.
    pub fn has_timestamps(&self, apps: &[usize]) -> bool {
        apps.iter().all(|&a| self.by_app[a].iter().all(|(_, t)| t.is_some()))
    }

    /// Canonical `user,app[,timestamp]` text ordered by `(app, user)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for e in self.entries() {
            match e.timestamp {
                Some(t) => writeln!(out, "{},{},{}", e.user, e.app, t),
                None => writeln!(out, "{},{}", e.user, e.app),
            }
            .expect("writing to a String cannot fail");
        }
        out
    }
}

/// Keeps the apps with at least `min_users` adopters. Returns the re-indexed
/// matrix and, for each new app id, the original id.
pub fn filter_min_users(adoptions: &AdoptionMatrix, min_users: usize) -> (AdoptionMatrix, Vec<usize>) {
    let kept: Vec<usize> = (0..adoptions.num_apps).filter(|&a| adoptions.num_adopters(a) >= min_users).collect();
    let out = AdoptionMatrix {
        num_users: adoptions.num_users,
        num_apps: kept.len(),
        app_labels: kept.iter().map(|&a| adoptions.app_labels[a].clone()).collect(),
        by_app: kept.iter().map(|&a| adoptions.by_app[a].clone()).collect(),
    };
    (out, kept)
}

/// Install count of each app among `visible` users.
pub fn popularity_counts(adoptions: &AdoptionMatrix, visible: &[bool]) -> Vec<f64> {
    assert_eq!(visible.len(), adoptions.num_users, "visibility mask must cover every user");
    adoptions.by_app.iter().map(|list| list.iter().filter(|&&(u, _)| visible[u]).count() as f64).collect()
}

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ExperimentSpec, Protocol};
use crate::eval::MetricReport;
use crate::solver::{ConvergenceRecord, FitConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub repeat: usize,
    /// Seed that drove this repeat's split and baselines.
    pub seed: u64,
    pub train_apps: usize,
    pub test_apps: usize,
    /// Flat metric values (`rmse`, `mp@5`, `optimal_f1`, ...).
    pub values: BTreeMap<String, f64>,
    /// `None` when no test app had an evaluable positive.
    pub metrics: Option<MetricReport>,
    pub skipped_apps: usize,
    pub fit: Option<ConvergenceRecord>,
}

impl RepeatRecord {
    pub(crate) fn new(
        repeat: usize,
        seed: u64,
        train_apps: usize,
        test_apps: usize,
        metrics: Option<MetricReport>,
        fit: Option<ConvergenceRecord>,
    ) -> Self {
        let mut values = BTreeMap::new();
        let skipped_apps = match &metrics {
            Some(m) => {
                values.insert("rmse".to_string(), m.rmse);
                values.insert("optimal_f1".to_string(), m.optimal_f1);
                values.insert("optimal_f1_per_app".to_string(), m.optimal_f1_per_app);
                for (k, v) in &m.mp_at_k {
                    values.insert(format!("mp@{k}"), *v);
                }
                m.skipped_apps
            }
            None => test_apps,
        };
        Self { repeat, seed, train_apps, test_apps, values, metrics, skipped_apps, fit }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigReport {
    pub name: String,
    /// Fit configuration used, absent for baselines without one.
    pub fit_config: Option<FitConfig>,
    pub repeats: Vec<RepeatRecord>,
    /// Per metric, the arithmetic mean over the repeats that report it.
    pub mean: BTreeMap<String, f64>,
}

impl ConfigReport {
    pub(crate) fn new(name: String, fit_config: Option<FitConfig>, repeats: Vec<RepeatRecord>) -> Self {
        let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for r in &repeats {
            for (k, v) in &r.values {
                let e = sums.entry(k.clone()).or_insert((0.0, 0));
                e.0 += v;
                e.1 += 1;
            }
        }
        let mean = sums.into_iter().map(|(k, (sum, n))| (k, sum / n as f64)).collect();
        Self { name, fit_config, repeats, mean }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub data_hash: String,
    pub root_seed: u64,
    pub repeat_seeds: Vec<u64>,
    pub num_users: usize,
    pub num_apps: usize,
    /// Apps left after the minimum-adopter filter.
    pub num_apps_kept: usize,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub protocol: Protocol,
    pub spec: ExperimentSpec,
    pub provenance: Provenance,
    pub configs: Vec<ConfigReport>,
}

impl ExperimentReport {
    pub fn config(&self, name: &str) -> Option<&ConfigReport> {
        self.configs.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// `protocol,config,repeat,metric,value`, one row per repeat and metric.
    pub fn records_csv(&self) -> String {
        let mut out = String::from("protocol,config,repeat,metric,value\n");
        for c in &self.configs {
            for r in &c.repeats {
                for (metric, value) in &r.values {
                    let _ = writeln!(out, "{},{},{},{},{}", self.protocol, c.name, r.repeat, metric, value);
                }
            }
        }
        out
    }

    /// One row per configuration with the mean of every metric.
    pub fn summary_csv(&self) -> String {
        let metrics: BTreeSet<&String> = self.configs.iter().flat_map(|c| c.mean.keys()).collect();
        let mut out = String::from("config");
        for m in &metrics {
            let _ = write!(out, ",{m}");
        }
        out.push('\n');
        for c in &self.configs {
            out.push_str(&c.name);
            for m in &metrics {
                match c.mean.get(*m) {
                    Some(v) => {
                        let _ = write!(out, ",{v}");
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

use rayon::prelude::*;

use super::report::{ConfigReport, ExperimentReport, Provenance, RepeatRecord};
use super::split::{fraction_split, future_split, kfold_apps, low_activity_subset, observable_user_split};
use super::{ExperimentData, ExperimentSpec, HarnessError, Protocol, UserSubset};
use crate::derive_seed;
use crate::eval::{evaluate_sheets, EvalError, MetricReport};
use crate::model::{ModelParams, TrainingView};
use crate::netdata::{filter_min_users, popularity_counts, AdoptionMatrix, NetworkStack};
use crate::predict::{
    score_app, score_future, score_random, score_regression, score_transfer, PredictionSheet, SImpute,
};
use crate::solver::{fit_mle_view, fit_regression_view, ConvergenceRecord, FitConfig, RegressionParams};

/// Where a probe callback fired.
#[derive(Debug, Clone, Copy)]
pub struct ProbeContext<'a> {
    pub protocol: Protocol,
    pub config: &'a str,
    pub repeat: usize,
    pub train_apps: &'a [usize],
    pub test_apps: &'a [usize],
    /// Users visible during training, when the protocol hides some.
    pub observable: Option<&'a [bool]>,
}

/// Observer of every input handed to a fit or to a scoring call. Used to
/// audit that held-out information never reaches either.
pub trait Probe: Sync {
    fn fit_inputs(
        &self,
        _ctx: &ProbeContext<'_>,
        _adoptions: &AdoptionMatrix,
        _stack: &NetworkStack,
        _view: &TrainingView,
    ) {
    }
    fn score_inputs(&self, _ctx: &ProbeContext<'_>, _app: usize, _evidence: &[bool], _popularity: f64) {}
}

struct Prepared<'a> {
    spec: &'a ExperimentSpec,
    stack: NetworkStack,
    adoptions: AdoptionMatrix,
    apps: Vec<usize>,
    probe: Option<&'a dyn Probe>,
}

struct Split {
    repeat: usize,
    seed: u64,
    train: Vec<usize>,
    test: Vec<usize>,
}

impl Split {
    fn ctx<'a>(&'a self, protocol: Protocol, config: &'a str, observable: Option<&'a [bool]>) -> ProbeContext<'a> {
        ProbeContext {
            protocol,
            config,
            repeat: self.repeat,
            train_apps: &self.train,
            test_apps: &self.test,
            observable,
        }
    }
}

type Rows = Vec<(String, Option<FitConfig>, RepeatRecord)>;

pub fn run_experiment(data: &ExperimentData, spec: &ExperimentSpec) -> Result<ExperimentReport, HarnessError> {
    run_experiment_probed(data, spec, None)
}

pub fn run_ablation(data: &ExperimentData, spec: &ExperimentSpec) -> Result<ExperimentReport, HarnessError> {
    run_experiment(data, &ExperimentSpec { protocol: Protocol::Ablation, ..spec.clone() })
}

pub fn run_comparison(data: &ExperimentData, spec: &ExperimentSpec) -> Result<ExperimentReport, HarnessError> {
    run_experiment(data, &ExperimentSpec { protocol: Protocol::Comparison, ..spec.clone() })
}

pub fn run_future(data: &ExperimentData, spec: &ExperimentSpec) -> Result<ExperimentReport, HarnessError> {
    run_experiment(data, &ExperimentSpec { protocol: Protocol::Future, ..spec.clone() })
}

pub fn run_transfer(data: &ExperimentData, spec: &ExperimentSpec) -> Result<ExperimentReport, HarnessError> {
    run_experiment(data, &ExperimentSpec { protocol: Protocol::Transfer, ..spec.clone() })
}

/// Runs `spec.protocol`, reporting fit and scoring inputs to `probe`.
pub fn run_experiment_probed(
    data: &ExperimentData,
    spec: &ExperimentSpec,
    probe: Option<&dyn Probe>,
) -> Result<ExperimentReport, HarnessError> {
    spec.validate()?;
    let (adoptions, _) = filter_min_users(&data.adoptions, spec.min_users);
    if adoptions.num_apps() < 2 {
        return Err(HarnessError::Degenerate(format!(
            "{} apps have at least {} adopters; need two or more",
            adoptions.num_apps(),
            spec.min_users
        )));
    }
    let apps: Vec<usize> = (0..adoptions.num_apps()).collect();
    let prep = Prepared { spec, stack: data.stack.clone().without_popularity(), adoptions, apps, probe };

    let (rows, seeds) = match spec.protocol {
        Protocol::Ablation => run_repeats(&prep, "ablation", None, ablation_repeat)?,
        Protocol::Comparison => {
            let mut rows = Vec::new();
            let mut seeds = Vec::new();
            for &f in &spec.comparison_fractions {
                let (r, s) =
                    run_repeats(&prep, &format!("comparison/{f}"), Some(f), |p, s| comparison_repeat(p, s, f))?;
                rows.extend(r);
                seeds.extend(s);
            }
            (rows, seeds)
        }
        Protocol::Future => {
            if !prep.adoptions.has_timestamps(&prep.apps) {
                // report the first offending entry
                future_split(&prep.adoptions, &prep.apps)?;
            }
            run_repeats(&prep, "future", None, future_repeat)?
        }
        Protocol::Transfer => run_repeats(&prep, "transfer", None, transfer_repeat)?,
    };

    let mut configs: Vec<ConfigReport> = Vec::new();
    let mut order: Vec<(String, Option<FitConfig>, Vec<RepeatRecord>)> = Vec::new();
    for (name, cfg, record) in rows {
        match order.iter_mut().find(|e| e.0 == name) {
            Some(e) => e.2.push(record),
            None => order.push((name, cfg, vec![record])),
        }
    }
    for (name, cfg, records) in order {
        configs.push(ConfigReport::new(name, cfg, records));
    }
    Ok(ExperimentReport {
        protocol: spec.protocol,
        spec: spec.clone(),
        provenance: Provenance {
            data_hash: data.content_hash(),
            root_seed: spec.seed,
            repeat_seeds: seeds,
            num_users: data.adoptions.num_users(),
            num_apps: data.adoptions.num_apps(),
            num_apps_kept: prep.apps.len(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        configs,
    })
}

/// Builds the repeat splits for `stream` and runs `body` on each in parallel;
/// rows come back in repeat order.
fn run_repeats<F>(
    prep: &Prepared<'_>,
    stream: &str,
    fraction: Option<f64>,
    body: F,
) -> Result<(Rows, Vec<u64>), HarnessError>
where
    F: Fn(&Prepared<'_>, &Split) -> Result<Rows, HarnessError> + Sync,
{
    let spec = prep.spec;
    let mut splits = Vec::with_capacity(spec.repeats);
    for repeat in 0..spec.repeats {
        let seed = derive_seed(spec.seed, &format!("{stream}/repeat/{repeat}"));
        let (train, test) = match (fraction.or(spec.train_fraction), spec.folds) {
            (Some(f), _) => fraction_split(&prep.apps, f, derive_seed(seed, "split"))?,
            (None, Some(k)) => {
                // consecutive repeats walk the folds of one partition, then reshuffle
                let partition = derive_seed(spec.seed, &format!("{stream}/partition/{}", repeat / k));
                kfold_apps(&prep.apps, k, partition)?.swap_remove(repeat % k)
            }
            (None, None) => unreachable!("validated spec sets a split rule"),
        };
        splits.push(Split { repeat, seed, train, test });
    }
    let seeds = splits.iter().map(|s| s.seed).collect();
    let results: Vec<Result<Rows, HarnessError>> = splits.par_iter().map(|s| body(prep, s)).collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok((rows, seeds))
}

fn evaluated_users(prep: &Prepared<'_>, subset: UserSubset) -> Vec<usize> {
    match subset {
        UserSubset::All => (0..prep.adoptions.num_users()).collect(),
        UserSubset::LowActivity => low_activity_subset(&prep.adoptions),
    }
}

/// Popularity vector with every app outside `keep` zeroed.
fn masked(popularity: &[f64], keep: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; popularity.len()];
    for &a in keep {
        out[a] = popularity[a];
    }
    out
}

/// Stack and adoptions restricted to the information a fit may see.
fn fit_inputs(
    stack: &NetworkStack,
    adoptions: &AdoptionMatrix,
    train: &[usize],
    observable: Option<&[bool]>,
) -> Result<(NetworkStack, AdoptionMatrix), HarnessError> {
    let mut seen = adoptions.restrict_apps(train);
    if let Some(mask) = observable {
        seen = seen.restrict_users(mask);
    }
    let stack = match stack.popularity() {
        Some(c) => stack.clone().with_popularity(masked(c, train))?,
        None => stack.clone(),
    };
    Ok((stack, seen))
}

fn fit_model(
    prep: &Prepared<'_>,
    ctx: &ProbeContext<'_>,
    stack: &NetworkStack,
    view: &TrainingView,
    cfg: &FitConfig,
) -> Result<(ModelParams, ConvergenceRecord), HarnessError> {
    let (fit_stack, seen) = fit_inputs(stack, &prep.adoptions, ctx.train_apps, ctx.observable)?;
    if let Some(p) = prep.probe {
        p.fit_inputs(ctx, &seen, &fit_stack, view);
    }
    let fit = fit_mle_view(&fit_stack, &seen, ctx.train_apps, view, cfg, None)?;
    Ok((fit.params, fit.record))
}

fn fit_baseline(
    prep: &Prepared<'_>,
    ctx: &ProbeContext<'_>,
    stack: &NetworkStack,
    view: &TrainingView,
) -> Result<RegressionParams, HarnessError> {
    let (fit_stack, seen) = fit_inputs(stack, &prep.adoptions, ctx.train_apps, ctx.observable)?;
    if let Some(p) = prep.probe {
        p.fit_inputs(ctx, &seen, &fit_stack, view);
    }
    Ok(fit_regression_view(&fit_stack, &seen, ctx.train_apps, view, &prep.spec.fit)?)
}

fn probe_score(prep: &Prepared<'_>, ctx: &ProbeContext<'_>, app: usize, evidence: &[bool], popularity: f64) {
    if let Some(p) = prep.probe {
        p.score_inputs(ctx, app, evidence, popularity);
    }
}

fn evaluate(
    prep: &Prepared<'_>,
    split: &Split,
    sheets: &[PredictionSheet],
    ks: &[usize],
    fit: Option<ConvergenceRecord>,
) -> Result<RepeatRecord, HarnessError> {
    let metrics = match evaluate_sheets(sheets, &prep.adoptions, ks) {
        Ok(m) => Some(m),
        Err(EvalError::NoPositives) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(RepeatRecord::new(split.repeat, split.seed, split.train.len(), split.test.len(), metrics, fit))
}

fn with_evaluated(sheets: &[PredictionSheet], users: &[usize]) -> Vec<PredictionSheet> {
    sheets.iter().map(|s| PredictionSheet { evaluated_users: users.to_vec(), ..s.clone() }).collect()
}

/// Standard-regime sheets for the model fitted on `split.train`.
fn standard_model_sheets(
    prep: &Prepared<'_>,
    ctx: &ProbeContext<'_>,
    stack: &NetworkStack,
    cfg: &FitConfig,
) -> Result<(Vec<PredictionSheet>, ConvergenceRecord), HarnessError> {
    let (params, record) = fit_model(prep, ctx, stack, &TrainingView::all(prep.adoptions.num_users()), cfg)?;
    let sheets = ctx
        .test_apps
        .iter()
        .map(|&a| {
            let x = prep.adoptions.adopter_vector(a);
            let c = stack.popularity_of(a);
            probe_score(prep, ctx, a, &x, c);
            score_app(&params, stack, a, &x, c)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((sheets, record))
}

fn ablation_configs(base: &FitConfig) -> Vec<(&'static str, FitConfig, bool)> {
    vec![
        ("full", base.clone(), true),
        ("no_exogenous", base.clone(), false),
        ("individual_only", FitConfig { fix_alpha_to_zero: true, ..base.clone() }, false),
        ("network_only", FitConfig { fix_s_to_zero: true, ..base.clone() }, true),
        ("allow_negative", FitConfig { fix_s_to_zero: true, allow_negative_alpha: true, ..base.clone() }, true),
    ]
}

fn ablation_repeat(prep: &Prepared<'_>, split: &Split) -> Result<Rows, HarnessError> {
    let n = prep.adoptions.num_users();
    let popularity = popularity_counts(&prep.adoptions, &vec![true; n]);
    let evaluated = evaluated_users(prep, prep.spec.user_subset);
    let ks = prep.spec.ks();
    let mut rows = Vec::new();
    for (name, cfg, with_pop) in ablation_configs(&prep.spec.fit) {
        let stack = if with_pop { prep.stack.clone().with_popularity(popularity.clone())? } else { prep.stack.clone() };
        let ctx = split.ctx(Protocol::Ablation, name, None);
        let (sheets, record) = standard_model_sheets(prep, &ctx, &stack, &cfg)?;
        let rec = evaluate(prep, split, &with_evaluated(&sheets, &evaluated), &ks, Some(record))?;
        rows.push((name.to_string(), Some(cfg), rec));
    }
    Ok(rows)
}

fn comparison_repeat(prep: &Prepared<'_>, split: &Split, fraction: f64) -> Result<Rows, HarnessError> {
    let n = prep.adoptions.num_users();
    let popularity = popularity_counts(&prep.adoptions, &vec![true; n]);
    let stack = prep.stack.clone().with_popularity(popularity)?;
    let cfg = &prep.spec.fit;
    let ks = prep.spec.ks();
    let all_view = TrainingView::all(n);

    // method name, fit record, fit config, sheets over all users
    let mut methods: Vec<(String, Option<ConvergenceRecord>, Option<FitConfig>, Vec<PredictionSheet>)> = Vec::new();

    let ctx = split.ctx(Protocol::Comparison, "full", None);
    let (sheets, record) = standard_model_sheets(prep, &ctx, &stack, cfg)?;
    methods.push(("full".into(), Some(record), Some(cfg.clone()), sheets));

    let ctx = split.ctx(Protocol::Comparison, "regression", None);
    let reg = fit_baseline(prep, &ctx, &stack, &all_view)?;
    let sheets = split
        .test
        .iter()
        .map(|&a| {
            let x = prep.adoptions.adopter_vector(a);
            let c = stack.popularity_of(a);
            probe_score(prep, &ctx, a, &x, c);
            score_regression(&reg, &stack, a, &x, c, &reg.activity, (0..n).collect())
        })
        .collect::<Result<Vec<_>, _>>()?;
    methods.push(("regression".into(), None, None, sheets));

    let sheets = split
        .test
        .iter()
        .map(|&a| score_random(a, n, (0..n).collect(), derive_seed(split.seed, &format!("random/{a}"))))
        .collect();
    methods.push(("random".into(), None, None, sheets));

    for (m, g) in prep.stack.networks().iter().enumerate() {
        let single = prep.stack.select(&[m]);
        let name = format!("single:{}", g.name());
        let ctx = split.ctx(Protocol::Comparison, &name, None);
        let (sheets, record) = standard_model_sheets(prep, &ctx, &single, cfg)?;
        methods.push((name, Some(record), Some(cfg.clone()), sheets));
    }

    let mut rows = Vec::new();
    for subset in [UserSubset::All, UserSubset::LowActivity] {
        let users = evaluated_users(prep, subset);
        for (name, record, fit_cfg, sheets) in &methods {
            let rec = evaluate(prep, split, &with_evaluated(sheets, &users), &ks, record.clone())?;
            rows.push((format!("{name}/train={fraction}/{}", subset.name()), fit_cfg.clone(), rec));
        }
    }
    Ok(rows)
}

fn future_repeat(prep: &Prepared<'_>, split: &Split) -> Result<Rows, HarnessError> {
    let n = prep.adoptions.num_users();
    let popularity = popularity_counts(&prep.adoptions, &vec![true; n]);
    // training apps are fully observed; test apps only expose their early half
    let stack = prep.stack.clone().with_popularity(masked(&popularity, &split.train))?;
    let cfg = &prep.spec.fit;
    let ks = prep.spec.ks();
    let subset: Vec<bool> = {
        let mut mask = vec![false; n];
        for u in evaluated_users(prep, prep.spec.user_subset) {
            mask[u] = true;
        }
        mask
    };
    let halves = future_split(&prep.adoptions, &split.test)?;
    let evidence: Vec<Vec<bool>> = halves
        .iter()
        .map(|h| {
            let mut x = vec![false; n];
            for &u in &h.g1 {
                x[u] = true;
            }
            x
        })
        .collect();
    let restrict = |sheet: PredictionSheet| PredictionSheet {
        evaluated_users: sheet.evaluated_users.iter().copied().filter(|&u| subset[u]).collect(),
        ..sheet
    };

    let ctx = split.ctx(Protocol::Future, "full", None);
    let (params, record) = fit_model(prep, &ctx, &stack, &TrainingView::all(n), cfg)?;
    let mut full = Vec::new();
    for (h, x) in halves.iter().zip(&evidence) {
        let c = h.g1.len() as f64;
        probe_score(prep, &ctx, h.app, x, c);
        full.push(restrict(score_future(&params, &stack, h.app, x, c)?));
    }

    let ctx = split.ctx(Protocol::Future, "regression", None);
    let reg = fit_baseline(prep, &ctx, &stack, &TrainingView::all(n))?;
    let mut regression = Vec::new();
    for (h, x) in halves.iter().zip(&evidence) {
        let c = h.g1.len() as f64;
        probe_score(prep, &ctx, h.app, x, c);
        let evaluated = (0..n).filter(|&u| !x[u]).collect();
        regression.push(restrict(score_regression(&reg, &stack, h.app, x, c, &reg.activity, evaluated)?));
    }

    let random: Vec<PredictionSheet> = halves
        .iter()
        .zip(&evidence)
        .map(|(h, x)| {
            let evaluated = (0..n).filter(|&u| !x[u]).collect();
            restrict(score_random(h.app, n, evaluated, derive_seed(split.seed, &format!("random/{}", h.app))))
        })
        .collect();

    Ok(vec![
        ("full".into(), Some(cfg.clone()), evaluate(prep, split, &full, &ks, Some(record))?),
        ("regression".into(), None, evaluate(prep, split, &regression, &ks, None)?),
        ("random".into(), None, evaluate(prep, split, &random, &ks, None)?),
    ])
}

/// Rounded mean count of unobservable adopters over the apps that have any.
fn transfer_k(adoptions: &AdoptionMatrix, apps: &[usize], observable: &[bool]) -> Option<usize> {
    let counts: Vec<usize> =
        apps.iter().map(|&a| adoptions.adopters(a).filter(|&u| !observable[u]).count()).filter(|&c| c > 0).collect();
    if counts.is_empty() {
        return None;
    }
    let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    Some((mean.round() as usize).max(1))
}

fn transfer_repeat(prep: &Prepared<'_>, split: &Split) -> Result<Rows, HarnessError> {
    let n = prep.adoptions.num_users();
    let spec = prep.spec;
    let observable = observable_user_split(n, spec.observable_fraction, derive_seed(split.seed, "users"))?;
    let popularity = popularity_counts(&prep.adoptions, &observable);
    let stack = prep.stack.clone().with_popularity(popularity)?;
    let view = TrainingView { rows: observable.clone(), evidence: observable.clone() };
    let hidden: Vec<usize> = (0..n).filter(|&u| !observable[u]).collect();
    let k_rule = transfer_k(&prep.adoptions, &split.test, &observable);
    let mut ks = spec.ks();
    if let Some(k) = k_rule {
        if !ks.contains(&k) {
            ks.push(k);
        }
    }
    let evidence: Vec<Vec<bool>> = split
        .test
        .iter()
        .map(|&a| prep.adoptions.adopter_vector(a).iter().zip(&observable).map(|(&x, &o)| x && o).collect())
        .collect();
    let finish = |mut rec: RepeatRecord| {
        if let Some(k) = k_rule {
            rec.values.insert("k_rule".into(), k as f64);
            if let Some(v) = rec.metrics.as_ref().and_then(|m: &MetricReport| m.mp_at_k.get(&k)) {
                rec.values.insert("mp@rule".into(), *v);
            }
        }
        rec
    };

    let mut rows = Vec::new();
    let ctx = split.ctx(Protocol::Transfer, "full", Some(&observable));
    let (params, record) = fit_model(prep, &ctx, &stack, &view, &spec.fit)?;
    for mode in [SImpute::Zero, SImpute::Mean] {
        let name = match mode {
            SImpute::Zero => "full_zero",
            SImpute::Mean => "full_mean",
        };
        let ctx = split.ctx(Protocol::Transfer, name, Some(&observable));
        let mut sheets = Vec::new();
        for (&a, x) in split.test.iter().zip(&evidence) {
            let c = stack.popularity_of(a);
            probe_score(prep, &ctx, a, x, c);
            sheets.push(score_transfer(&params, &stack, a, x, &observable, c, mode)?);
        }
        rows.push((
            name.to_string(),
            Some(spec.fit.clone()),
            finish(evaluate(prep, split, &sheets, &ks, Some(record.clone()))?),
        ));
    }

    let ctx = split.ctx(Protocol::Transfer, "regression", Some(&observable));
    let reg = fit_baseline(prep, &ctx, &stack, &view)?;
    // hidden users' activity is unknown; use the observable mean
    let visible_activity: Vec<f64> = (0..n).filter(|&u| observable[u]).map(|u| reg.activity[u]).collect();
    let fill = visible_activity.iter().sum::<f64>() / visible_activity.len() as f64;
    let activity: Vec<f64> = (0..n).map(|u| if observable[u] { reg.activity[u] } else { fill }).collect();
    let mut sheets = Vec::new();
    for (&a, x) in split.test.iter().zip(&evidence) {
        let c = stack.popularity_of(a);
        probe_score(prep, &ctx, a, x, c);
        sheets.push(score_regression(&reg, &stack, a, x, c, &activity, hidden.clone())?);
    }
    rows.push(("regression".into(), None, finish(evaluate(prep, split, &sheets, &ks, None)?)));

    let sheets: Vec<PredictionSheet> = split
        .test
        .iter()
        .map(|&a| score_random(a, n, hidden.clone(), derive_seed(split.seed, &format!("random/{a}"))))
        .collect();
    rows.push(("random".into(), None, finish(evaluate(prep, split, &sheets, &ks, None)?)));
    Ok(rows)
}

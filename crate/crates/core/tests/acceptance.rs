//! Acceptance suite. Runs every criterion at its stated tolerance and prints one
//! PASS/FAIL line each; exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use appnet::eval::{mean_precision_at_k, optimal_f1, pr_curve};
use appnet::harness::{
    run_experiment, run_experiment_probed, ExperimentData, ExperimentReport, ExperimentSpec, Probe, ProbeContext,
    Protocol,
};
use appnet::model::{
    composite_potential, log_likelihood, log_likelihood_gradient, potential_table, ModelParams, TrainingView,
};
use appnet::netdata::{
    filter_min_users, popularity_counts, Adoption, AdoptionMatrix, CandidateNetwork, NetworkKind, NetworkStack,
    Symmetrize,
};
use appnet::predict::PredictionSheet;
use appnet::solver::{fit_mle, fit_mle_view, FitConfig};
use appnet::synthgen::{generate, recovery_error, RecoveryError, SynthSpec, Topology, WeightDist};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Random weighted multiplex instance with a popularity channel.
fn instance(rng: &mut ChaCha8Rng, u: usize, m: usize, a: usize) -> (NetworkStack, AdoptionMatrix) {
    let networks = (0..m)
        .map(|k| {
            let mut edges = Vec::new();
            for i in 0..u {
                for j in i + 1..u {
                    if rng.random_bool(0.25) {
                        edges.push((i, j, rng.random_range(0.1..1.0)));
                    }
                }
            }
            CandidateNetwork::from_edges(format!("g{k}"), NetworkKind::Weighted, u, edges, Symmetrize::Sum).unwrap()
        })
        .collect();
    let mut entries = Vec::new();
    for app in 0..a {
        let rate = rng.random_range(0.05..0.4);
        for user in 0..u {
            if rng.random_bool(rate) {
                entries.push(Adoption { user, app, timestamp: None });
            }
        }
    }
    let adoptions = AdoptionMatrix::from_entries(u, a, entries).unwrap();
    let pop = popularity_counts(&adoptions, &vec![true; u]);
    (NetworkStack::new(networks).unwrap().with_popularity(pop).unwrap(), adoptions)
}

fn random_params(rng: &mut ChaCha8Rng, u: usize, m: usize, s_min: f64) -> ModelParams {
    ModelParams {
        alpha: (0..m).map(|_| rng.random_range(0.0..1.5)).collect(),
        alpha_pop: rng.random_range(0.0..0.05),
        s: (0..u).map(|_| rng.random_range(s_min..1.0)).collect(),
        constrained: true,
    }
}

fn with_vector(p: &ModelParams, theta: &[f64]) -> ModelParams {
    ModelParams::from_vector(theta, p.num_users(), p.num_networks(), p.constrained)
}

fn gradient_correctness() -> Outcome {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (u, m, a) = (rng.random_range(5..=30), rng.random_range(1..=4), rng.random_range(5..=40));
        let (stack, adoptions) = instance(&mut rng, u, m, a);
        let apps: Vec<usize> = (0..a).collect();
        let params = random_params(&mut rng, u, m, 0.05);
        let grad = log_likelihood_gradient(&params, &stack, &adoptions, &apps).unwrap();
        let theta = params.to_vector();
        for (i, &g) in grad.iter().enumerate() {
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[i] += h;
            down[i] -= h;
            let fu = log_likelihood(&with_vector(&params, &up), &stack, &adoptions, &apps).unwrap();
            let fd = log_likelihood(&with_vector(&params, &down), &stack, &adoptions, &apps).unwrap();
            let numeric = (fu - fd) / (2.0 * h);
            worst = worst.max((g - numeric).abs() / g.abs().max(numeric.abs()).max(1.0));
        }
    }
    outcome(worst < 1e-6, format!("max relative error {worst:.2e} over 20 instances (< 1e-6)"))
}

fn concavity() -> Outcome {
    let mut worst = f64::INFINITY;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let (u, m, a) = (rng.random_range(5..=25), rng.random_range(1..=4), rng.random_range(5..=30));
        let (stack, adoptions) = instance(&mut rng, u, m, a);
        let apps: Vec<usize> = (0..a).collect();
        let p = random_params(&mut rng, u, m, 0.001);
        let q = random_params(&mut rng, u, m, 0.001);
        let mid: Vec<f64> = p.to_vector().iter().zip(q.to_vector()).map(|(x, y)| 0.5 * (x + y)).collect();
        let f = |x: &ModelParams| log_likelihood(x, &stack, &adoptions, &apps).unwrap();
        let gap = f(&with_vector(&p, &mid)) - 0.5 * (f(&p) + f(&q));
        worst = worst.min(gap);
    }
    outcome(worst >= -1e-9, format!("min midpoint minus chord {worst:.3e} over 50 segments (>= -1e-9)"))
}

fn solver_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (stack, adoptions) = instance(&mut rng, 25, 3, 30);
    let apps: Vec<usize> = (0..30).collect();
    let starts = [(0.1, None), (1.5, Some(0.01)), (0.01, Some(2.0)), (0.5, Some(0.3)), (3.0, Some(0.0))];
    let mut objectives = Vec::new();
    let mut min_iterate = f64::INFINITY;
    let mut all_converged = true;
    for (k, &(init_s, init_alpha)) in starts.iter().enumerate() {
        let cfg = FitConfig { init_s, init_alpha, init_jitter: 0.5, seed: k as u64, ..FitConfig::default() };
        let fit = fit_mle(&stack, &adoptions, &apps, &cfg).unwrap();
        all_converged &= fit.record.converged;
        min_iterate = min_iterate.min(fit.min_constrained);
        objectives.push(fit.record.final_objective);
    }
    let hi = objectives.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = objectives.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = (hi - lo) / hi.abs();
    outcome(
        spread < 1e-6 && min_iterate >= 0.0 && all_converged,
        format!("relative spread {spread:.2e} (< 1e-6), smallest constrained iterate {min_iterate:.3e} (>= 0), converged {all_converged}"),
    )
}

fn teacher_recovery(num_apps: usize) -> RecoveryError {
    let spec = SynthSpec { num_apps, seed: 2024, ..SynthSpec::default() };
    let data = generate(&spec).unwrap();
    let view = TrainingView { rows: data.context.iter().map(|c| !c).collect(), evidence: data.context.clone() };
    let apps: Vec<usize> = (0..num_apps).collect();
    let fit = fit_mle_view(&data.stack, &data.adoptions, &apps, &view, &FitConfig::default(), None).unwrap();
    recovery_error(&data.planted, &fit.params, &data.target_users()).unwrap()
}

fn planted_recovery() -> Outcome {
    let at_400 = teacher_recovery(400);
    let at_200 = teacher_recovery(200);
    let at_800 = teacher_recovery(800);
    let pass = at_400.rel_l2_alpha < 0.15 && at_400.cosine_alpha > 0.95 && at_800.rel_l2_alpha <= at_200.rel_l2_alpha;
    outcome(
        pass,
        format!(
            "A=400 rel_l2 {:.4} (< 0.15) cosine {:.4} (> 0.95); rel_l2 A=200 {:.4} >= A=800 {:.4}",
            at_400.rel_l2_alpha, at_400.cosine_alpha, at_200.rel_l2_alpha, at_800.rel_l2_alpha
        ),
    )
}

/// Brute-force top-k: the unique k-subset that beats every outsider, higher
/// score first and lower index on ties.
fn brute_precision(scores: &[f64], labels: &[bool], k: usize) -> f64 {
    let n = scores.len();
    let beats = |i: usize, j: usize| scores[i] > scores[j] || (scores[i] == scores[j] && i < j);
    let mut found = None;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let inside = |i: usize| mask >> i & 1 == 1;
        let ok = (0..n).filter(|&i| inside(i)).all(|i| (0..n).filter(|&j| !inside(j)).all(|j| beats(i, j)));
        if ok {
            assert!(found.is_none(), "two top-k sets");
            found = Some((0..n).filter(|&i| inside(i) && labels[i]).count() as f64 / k as f64);
        }
    }
    found.expect("a top-k set exists")
}

/// Brute-force optimal F1: every predicted set cut by a threshold, i.e. every
/// subset whose members all outscore every non-member.
fn brute_f1(pairs: &[(f64, bool)]) -> f64 {
    let n = pairs.len();
    let positives = pairs.iter().filter(|p| p.1).count();
    let mut best: f64 = 0.0;
    for mask in 1u32..(1 << n) {
        let inside = |i: usize| mask >> i & 1 == 1;
        let cut =
            (0..n).filter(|&i| inside(i)).all(|i| (0..n).filter(|&j| !inside(j)).all(|j| pairs[i].0 > pairs[j].0));
        if !cut {
            continue;
        }
        let tp = (0..n).filter(|&i| inside(i) && pairs[i].1).count();
        let precision = tp as f64 / mask.count_ones() as f64;
        let recall = tp as f64 / positives as f64;
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        best = best.max(f1);
    }
    best
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let num_apps = rng.random_range(1..=3);
        let num_users = 12;
        let budget: usize = rng.random_range(num_apps..=12);
        // split the pair budget over apps; each app ranks at least one user
        let mut sizes = vec![1usize; num_apps];
        for _ in num_apps..budget {
            sizes[rng.random_range(0..num_apps)] += 1;
        }
        let mut sheets = Vec::new();
        let mut entries = Vec::new();
        let mut pooled = Vec::new();
        let mut per_app = Vec::new();
        for (app, &size) in sizes.iter().enumerate() {
            // coarse scores so ties are common
            let scores: Vec<f64> = (0..num_users).map(|_| f64::from(rng.random_range(0..5u8)) / 4.0).collect();
            let mut users: Vec<usize> = (0..num_users).collect();
            for i in 0..size {
                let j = rng.random_range(i..num_users);
                users.swap(i, j);
            }
            let mut evaluated = users[..size].to_vec();
            evaluated.sort_unstable();
            for u in 0..num_users {
                if rng.random_bool(0.4) {
                    entries.push(Adoption { user: u, app, timestamp: None });
                }
            }
            sheets.push(PredictionSheet { app_id: app, scores, evaluated_users: evaluated, evidence_users: vec![] });
        }
        let truth = AdoptionMatrix::from_entries(num_users, num_apps, entries).unwrap();
        for sheet in &sheets {
            let s: Vec<f64> = sheet.evaluated_users.iter().map(|&u| sheet.scores[u]).collect();
            let l: Vec<bool> = sheet.evaluated_users.iter().map(|&u| truth.is_adopted(u, sheet.app_id)).collect();
            pooled.extend(s.iter().copied().zip(l.iter().copied()));
            per_app.push((s, l));
        }
        let k = rng.random_range(1..=6);
        let mp = mean_precision_at_k(&sheets, &truth, k).unwrap().value;
        let brute_sum: f64 = per_app.iter().map(|(s, l)| brute_precision(s, l, k.min(s.len()))).sum();
        if mp != brute_sum / num_apps as f64 {
            mismatches += 1;
        }
        if pooled.iter().any(|p| p.1) {
            let f1 = optimal_f1(&pr_curve(&pooled).unwrap());
            if f1 != brute_f1(&pooled) {
                mismatches += 1;
            }
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches against enumeration over 1000 cases (exact)"))
}

fn mean_f1(report: &ExperimentReport, config: &str) -> f64 {
    report.config(config).unwrap_or_else(|| panic!("missing config {config}")).mean["optimal_f1"]
}

fn mean_of(report: &ExperimentReport, config: &str, metric: &str) -> f64 {
    report.config(config).unwrap_or_else(|| panic!("missing config {config}")).mean[metric]
}

/// Random multiplex with individual variance, network effects and popularity.
fn ablation_fixture(seed: u64) -> SynthSpec {
    SynthSpec {
        num_users: 100,
        num_context_users: 50,
        num_apps: 150,
        edge_density: vec![0.12; 4],
        weights: WeightDist::Uniform { w_max: 2.0 },
        topology: Topology::Random,
        planted_alpha: vec![0.3, 0.12, 0.06, 0.0],
        planted_alpha_pop: 0.02,
        s_rate: 100.0,
        base_popularity: 10.0,
        seed,
    }
}

fn ablation_ordering() -> Outcome {
    let mut held = 0;
    let mut rows = Vec::new();
    for seed in 0..5u64 {
        let data = generate(&ablation_fixture(seed)).unwrap();
        let data = ExperimentData::new(data.stack, data.adoptions).unwrap();
        let report = run_experiment(&data, &ExperimentSpec { seed, ..ExperimentSpec::default() }).unwrap();
        let f = |c| mean_f1(&report, c);
        let (full, no_exo, ind, net, neg) =
            (f("full"), f("no_exogenous"), f("individual_only"), f("network_only"), f("allow_negative"));
        let ok = full >= no_exo && no_exo >= net && net >= neg && full >= ind;
        held += usize::from(ok);
        rows.push(format!("[{full:.3} {no_exo:.3} {net:.3} {neg:.3} | {ind:.3}]"));
    }
    outcome(
        held >= 4,
        format!("ordering held on {held}/5 seed sets (>= 4); full no_exo net neg | ind: {}", rows.join(" ")),
    )
}

/// Context-target bipartite multiplex with one dominant network.
fn baseline_fixture() -> SynthSpec {
    SynthSpec {
        num_users: 100,
        num_context_users: 50,
        num_apps: 150,
        edge_density: vec![0.03; 4],
        weights: WeightDist::Unit,
        topology: Topology::Bipartite,
        planted_alpha: vec![1.0, 0.4, 0.2, 0.0],
        planted_alpha_pop: 0.02,
        s_rate: 10.0,
        base_popularity: 5.0,
        seed: 0,
    }
}

fn baseline_margins() -> Outcome {
    let synth = generate(&baseline_fixture()).unwrap();
    let data = ExperimentData::new(synth.stack, synth.adoptions).unwrap();
    let standard =
        run_experiment(&data, &ExperimentSpec { protocol: Protocol::Comparison, ..ExperimentSpec::default() }).unwrap();
    let future =
        run_experiment(&data, &ExperimentSpec { protocol: Protocol::Future, ..ExperimentSpec::default() }).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for f in [0.2, 0.5] {
        let name = |m: &str| format!("{m}/train={f}/all");
        let ratio = mean_of(&standard, &name("full"), "mp@5") / mean_of(&standard, &name("random"), "mp@5");
        let (full, reg) = (mean_f1(&standard, &name("full")), mean_f1(&standard, &name("regression")));
        pass &= ratio >= 2.0 && full >= reg;
        parts.push(format!("standard train={f}: MP-5 {ratio:.2}x random, F1 {full:.3} vs regression {reg:.3}"));
    }
    let ratio = mean_of(&future, "full", "mp@5") / mean_of(&future, "random", "mp@5");
    let (full, reg) = (mean_f1(&future, "full"), mean_f1(&future, "regression"));
    pass &= ratio >= 2.0 && full >= reg;
    parts.push(format!("future: MP-5 {ratio:.2}x random, F1 {full:.3} vs regression {reg:.3}"));
    outcome(pass, parts.join("; "))
}

fn rescaling_invariance() -> Outcome {
    // planted data, so the network weights are identified and non-zero
    let spec = SynthSpec {
        num_users: 80,
        num_context_users: 40,
        num_apps: 60,
        base_popularity: 5.0,
        s_rate: 10.0,
        seed: 8,
        ..SynthSpec::default()
    };
    let synth = generate(&spec).unwrap();
    let (stack, adoptions) = (synth.stack, synth.adoptions);
    let apps: Vec<usize> = (0..60).collect();
    let c = 10.0;
    let scaled = stack.map_networks(|g| g.scaled(c));
    let cfg = FitConfig { grad_tol: 1e-10, obj_tol: 1e-15, ..FitConfig::default() };
    let base = fit_mle(&stack, &adoptions, &apps, &cfg).unwrap();
    let big = fit_mle(&scaled, &adoptions, &apps, &cfg).unwrap();
    let obj_rel = (base.record.final_objective - big.record.final_objective).abs() / base.record.final_objective.abs();
    let mut pot_rel: f64 = 0.0;
    for &a in &apps {
        let x = adoptions.adopter_vector(a);
        let p0 =
            composite_potential(&base.params, &potential_table(&stack, &x, stack.popularity_of(a)).unwrap()).unwrap();
        let p1 =
            composite_potential(&big.params, &potential_table(&scaled, &x, scaled.popularity_of(a)).unwrap()).unwrap();
        let scale = p0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = p0.iter().zip(&p1).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        if scale > 0.0 {
            pot_rel = pot_rel.max(diff / scale);
        }
    }
    let norm = base.params.alpha.iter().map(|v| v * v).sum::<f64>().sqrt();
    let alpha_rel =
        base.params.alpha.iter().zip(&big.params.alpha).map(|(a, b)| (a - c * b).powi(2)).sum::<f64>().sqrt() / norm;
    outcome(
        norm > 0.0 && obj_rel < 1e-6 && pot_rel < 1e-6 && alpha_rel < 1e-3,
        format!("objective rel {obj_rel:.2e} (< 1e-6), potentials rel {pot_rel:.2e} (< 1e-6), c*alpha rel {alpha_rel:.2e} (< 1e-3)"),
    )
}

fn appnet(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_appnet")).current_dir(dir).args(args).output().expect("binary runs")
}

fn single_run(outdir: &Path, prefix: &str) -> PathBuf {
    let hits: Vec<PathBuf> = fs::read_dir(outdir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with(prefix))
        .collect();
    assert_eq!(hits.len(), 1, "one {prefix} run in {}", outdir.display());
    hits[0].clone()
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let synth = appnet(
        dir,
        &[
            "synth",
            "--set",
            "outdir=data",
            "--set",
            "num_users=60",
            "--set",
            "num_context_users=30",
            "--set",
            "num_apps=60",
            "--set",
            "base_popularity=5",
            "--set",
            "s_rate=10",
        ],
    );
    assert!(synth.status.success(), "{}", String::from_utf8_lossy(&synth.stderr));
    let bundle = single_run(&dir.join("data"), "synth-");
    let b = bundle.display();
    let conf = format!(
        "adoptions = {b}/adoptions.csv\nnetwork.g1 = {b}/g1.csv\nnetwork.g2 = {b}/g2.csv\nnetwork.g3 = {b}/g3.csv\n\
         network.g4 = {b}/g4.csv\nrepeats = 3\nseed = 17\n"
    );
    fs::write(dir.join("run.conf"), conf).unwrap();
    let mut identical = 0;
    let protocols = ["ablation", "comparison", "future", "transfer"];
    for protocol in protocols {
        let mut reports = Vec::new();
        for (run, jobs) in [("a", "1"), ("b", "4"), ("c", "4")] {
            let outdir = format!("outdir=runs-{run}");
            let p = format!("protocol={protocol}");
            let out = appnet(dir, &["--jobs", jobs, "experiment", "-c", "run.conf", "--set", &outdir, "--set", &p]);
            assert!(out.status.success(), "{protocol}: {}", String::from_utf8_lossy(&out.stderr));
            let run_dir = single_run(&dir.join(format!("runs-{run}")), &format!("experiment-"));
            let report = fs::read(run_dir.join("report.json")).unwrap();
            fs::remove_dir_all(run_dir).unwrap();
            reports.push(report);
        }
        identical += usize::from(reports.windows(2).all(|w| w[0] == w[1]));
    }
    outcome(
        identical == protocols.len(),
        format!("{identical}/{} protocols byte-identical across three runs with 1 and 4 workers", protocols.len()),
    )
}

/// Checks every fit and scoring input against the full data it was derived from.
struct LeakAudit {
    adoptions: AdoptionMatrix,
    fits: AtomicUsize,
    scores: AtomicUsize,
    violations: Mutex<Vec<String>>,
}

impl LeakAudit {
    fn new(adoptions: AdoptionMatrix) -> Self {
        Self { adoptions, fits: AtomicUsize::new(0), scores: AtomicUsize::new(0), violations: Mutex::new(Vec::new()) }
    }

    fn flag(&self, ctx: &ProbeContext<'_>, what: String) {
        self.violations.lock().unwrap().push(format!("{} {} repeat {}: {what}", ctx.protocol, ctx.config, ctx.repeat));
    }

    /// Early half of an app's adopters by timestamp, ties by user id.
    fn early_half(&self, app: usize) -> Vec<usize> {
        let mut timed: Vec<(i64, usize)> = self
            .adoptions
            .adopters_with_time(app)
            .iter()
            .map(|&(u, t)| (t.expect("fixture is timestamped"), u))
            .collect();
        timed.sort_unstable();
        timed.truncate(timed.len().div_ceil(2));
        timed.into_iter().map(|p| p.1).collect()
    }
}

impl Probe for LeakAudit {
    fn fit_inputs(
        &self,
        ctx: &ProbeContext<'_>,
        adoptions: &AdoptionMatrix,
        stack: &NetworkStack,
        view: &TrainingView,
    ) {
        self.fits.fetch_add(1, Ordering::Relaxed);
        for &a in ctx.test_apps {
            if adoptions.num_adopters(a) != 0 {
                self.flag(ctx, format!("test app {a} has adoption bits in the fit"));
            }
            if stack.popularity_of(a) != 0.0 {
                self.flag(ctx, format!("test app {a} has popularity {} in the fit", stack.popularity_of(a)));
            }
        }
        if let Some(mask) = ctx.observable {
            if let Some(e) = adoptions.entries().find(|e| !mask[e.user]) {
                self.flag(ctx, format!("unobservable user {} has a bit in the fit", e.user));
            }
            if (0..mask.len()).any(|u| !mask[u] && (view.rows[u] || view.evidence[u])) {
                self.flag(ctx, "unobservable user in the training view".into());
            }
            for &a in ctx.train_apps {
                let visible = self.adoptions.adopters(a).filter(|&u| mask[u]).count() as f64;
                if stack.popularity_of(a) != visible {
                    self.flag(ctx, format!("train app {a} popularity counts hidden users"));
                }
            }
        }
    }

    fn score_inputs(&self, ctx: &ProbeContext<'_>, app: usize, evidence: &[bool], popularity: f64) {
        self.scores.fetch_add(1, Ordering::Relaxed);
        if !ctx.test_apps.contains(&app) {
            self.flag(ctx, format!("scored non-test app {app}"));
        }
        match ctx.protocol {
            Protocol::Future => {
                let g1 = self.early_half(app);
                if let Some(u) = (0..evidence.len()).find(|&u| evidence[u] && !g1.contains(&u)) {
                    self.flag(ctx, format!("app {app}: user {u} outside the early half used as evidence"));
                }
                if popularity != g1.len() as f64 {
                    self.flag(ctx, format!("app {app}: popularity {popularity} but |G1| = {}", g1.len()));
                }
            }
            Protocol::Transfer => {
                let mask = ctx.observable.expect("transfer exposes its mask");
                if let Some(u) = (0..evidence.len()).find(|&u| evidence[u] && !mask[u]) {
                    self.flag(ctx, format!("app {app}: unobservable user {u} used as evidence"));
                }
                let visible = self.adoptions.adopters(app).filter(|&u| mask[u]).count() as f64;
                if popularity != visible {
                    self.flag(ctx, format!("app {app}: popularity {popularity} counts hidden users"));
                }
            }
            Protocol::Ablation | Protocol::Comparison => {}
        }
    }
}

fn protocol_integrity() -> Outcome {
    let spec = SynthSpec {
        num_users: 80,
        num_context_users: 40,
        num_apps: 80,
        base_popularity: 5.0,
        s_rate: 10.0,
        seed: 31,
        ..SynthSpec::default()
    };
    let synth = generate(&spec).unwrap();
    let data = ExperimentData::new(synth.stack, synth.adoptions).unwrap();
    let mut counts = BTreeMap::new();
    let mut violations = Vec::new();
    for protocol in [Protocol::Future, Protocol::Transfer, Protocol::Ablation, Protocol::Comparison] {
        let exp = ExperimentSpec { protocol, repeats: 2, ..ExperimentSpec::default() };
        // the harness drops small apps first; audit against the same indexing
        let (kept, _) = filter_min_users(&data.adoptions, exp.min_users);
        let audit = LeakAudit::new(kept);
        run_experiment_probed(&data, &exp, Some(&audit)).unwrap();
        counts.insert(protocol.name(), (audit.fits.load(Ordering::Relaxed), audit.scores.load(Ordering::Relaxed)));
        violations.extend(audit.violations.into_inner().unwrap());
    }
    let exercised = counts.values().all(|&(f, _)| f > 0) && counts["future"].1 > 0 && counts["transfer"].1 > 0;
    let detail = format!(
        "{} violations; fit/score calls audited {:?}{}",
        violations.len(),
        counts,
        violations.first().map(|v| format!("; first: {v}")).unwrap_or_default()
    );
    outcome(violations.is_empty() && exercised, detail)
}

type Criterion = (u32, &'static str, Option<f64>, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "gradient correctness", Some(10.0), gradient_correctness),
        (2, "concavity", Some(10.0), concavity),
        (3, "solver optimality", Some(30.0), solver_optimality),
        (4, "planted recovery", Some(120.0), planted_recovery),
        (5, "metric oracles", Some(10.0), metric_oracles),
        (6, "ablation ordering", Some(300.0), ablation_ordering),
        (7, "baseline margins", Some(300.0), baseline_margins),
        (8, "rescaling invariance", None, rescaling_invariance),
        (9, "CLI determinism", None, cli_determinism),
        (10, "future/transfer protocol integrity", None, protocol_integrity),
    ];
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        let in_time = budget.is_none_or(|b| secs < b);
        let pass = result.pass && in_time;
        let limit = budget.map(|b| format!(" of {b:.0}s")).unwrap_or_default();
        println!(
            "{} criterion {id} ({name}): {} [{secs:.2}s{limit}]",
            if pass { "PASS" } else { "FAIL" },
            result.detail
        );
        failed += usize::from(!pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{ConfigError, Flag, NetworkEntry, RunConfig};
use super::{CliError, Command, RunArgs};
use crate::harness::{run_experiment, ExperimentData, ExperimentSpec, Protocol, UserSubset};
use crate::model::{ModelParams, TrainingView};
use crate::netdata::{
    dataset_stats, normalize_network, parse_adoption_records, parse_edge_records, popularity_counts, AdoptionMatrix,
    AdoptionRecord, CandidateNetwork, EdgeRecord, NetworkKind, NetworkStack, Normalization, Symmetrize,
};
use crate::predict::{score_app, SHEET_CSV_HEADER};
use crate::solver::{fit_mle_view, FitConfig, StepRule};
use crate::synthgen::{generate, SynthSidecar, SynthSpec, Topology, WeightDist};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const DEFAULT_OUTDIR: &str = "runs";

pub(super) fn dispatch(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Validate(args) => validate(&load_config(args)?),
        Command::Train(args) => train(&load_config(args)?),
        Command::Predict(args) => predict(&load_config(args)?),
        Command::Experiment(args) => experiment(&load_config(args)?),
        Command::Synth(args) => synth(&load_config(args)?),
        Command::Stats(args) => stats(&load_config(args)?),
    }
}

fn load_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path).map_err(CliError::Config)?,
        None => RunConfig::empty("."),
    };
    let mut errors = Vec::new();
    if args.no_normalize {
        // an explicit `normalize` key still wins
        if !cfg.contains("normalize") {
            cfg.set("normalize=none").expect("normalize is a known key");
        }
    }
    for s in &args.set {
        if let Err(e) = cfg.set(s) {
            errors.push(e);
        }
    }
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::Config(errors))
    }
}

/// Accumulates per-field problems so one run reports all of them.
#[derive(Default)]
struct Diag {
    errors: Vec<ConfigError>,
}

impl Diag {
    fn take<T>(&mut self, r: Result<T, ConfigError>, fallback: T) -> T {
        r.unwrap_or_else(|e| {
            self.errors.push(e);
            fallback
        })
    }

    fn finish(self) -> Result<(), CliError> {
        if self.errors.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(self.errors))
        }
    }
}

fn root_seed(cfg: &RunConfig, d: &mut Diag) -> u64 {
    d.take(cfg.value_or("seed", "a non-negative integer", 0), 0)
}

fn fit_config(cfg: &RunConfig, d: &mut Diag) -> FitConfig {
    let def = FitConfig::default();
    let flag = |d: &mut Diag, key: &str, default: bool| {
        d.take(cfg.value_or(key, "true or false", Flag(default)), Flag(default)).0
    };
    let step = match cfg.get("step") {
        None | Some("newton") => StepRule::Newton,
        Some("gradient") => StepRule::Gradient,
        Some(v) => {
            d.errors.push(ConfigError::InvalidValue {
                key: "step".into(),
                value: v.into(),
                expected: "newton or gradient".into(),
            });
            StepRule::Newton
        }
    };
    let fit = FitConfig {
        max_iters: d.take(cfg.value_or("max_iters", "a positive integer", def.max_iters), def.max_iters),
        grad_tol: d.take(cfg.value_or("grad_tol", "a positive number", def.grad_tol), def.grad_tol),
        obj_tol: d.take(cfg.value_or("obj_tol", "a positive number", def.obj_tol), def.obj_tol),
        init_alpha: d.take(cfg.parse_value("init_alpha", "a number"), None),
        init_s: d.take(cfg.value_or("init_s", "a non-negative number", def.init_s), def.init_s),
        init_jitter: d.take(cfg.value_or("init_jitter", "a number in [0, 1)", def.init_jitter), def.init_jitter),
        allow_negative_alpha: flag(d, "allow_negative_alpha", false),
        fix_s_to_zero: flag(d, "fix_s_to_zero", false),
        fix_alpha_to_zero: flag(d, "fix_alpha_to_zero", false),
        step,
        seed: root_seed(cfg, d),
    };
    if let Err(e) = fit.validate() {
        d.errors.push(ConfigError::Invalid(e.to_string()));
    }
    fit
}

fn experiment_spec(cfg: &RunConfig, d: &mut Diag) -> ExperimentSpec {
    let def = ExperimentSpec::default();
    let train_fraction = d.take(cfg.parse_value("train_fraction", "a number in (0, 1)"), None);
    let folds = match (train_fraction, cfg.contains("folds")) {
        (Some(_), false) => None,
        _ => d.take(cfg.parse_value("folds", "an integer of at least 2"), None).or(def.folds),
    };
    let spec = ExperimentSpec {
        protocol: d.take(cfg.choice::<Protocol>("protocol"), None).unwrap_or(def.protocol),
        train_fraction,
        folds,
        min_users: d.take(cfg.value_or("min_users", "a non-negative integer", def.min_users), def.min_users),
        repeats: d.take(cfg.value_or("repeats", "a positive integer", def.repeats), def.repeats),
        seed: root_seed(cfg, d),
        fit: fit_config(cfg, d),
        user_subset: d.take(cfg.choice::<UserSubset>("user_subset"), None).unwrap_or(def.user_subset),
        ks: d.take(cfg.list("ks", "comma-separated positive integers"), None),
        comparison_fractions: d
            .take(cfg.list("comparison_fractions", "comma-separated numbers in (0, 1)"), None)
            .unwrap_or(def.comparison_fractions),
        observable_fraction: d.take(
            cfg.value_or("observable_fraction", "a number in (0, 1)", def.observable_fraction),
            def.observable_fraction,
        ),
    };
    if d.errors.is_empty() {
        if let Err(e) = spec.validate() {
            d.errors.push(ConfigError::Invalid(e.to_string()));
        }
    }
    spec
}

fn synth_spec(cfg: &RunConfig, d: &mut Diag) -> SynthSpec {
    let def = SynthSpec::default();
    let w_max: Option<f64> = d.take(cfg.parse_value("w_max", "a positive number"), None);
    let weights = match (cfg.get("weights"), w_max) {
        (None, None) => def.weights,
        (None | Some("uniform"), Some(w_max)) => WeightDist::Uniform { w_max },
        (Some("uniform"), None) => WeightDist::Uniform { w_max: 1.0 },
        (Some("unit"), _) => WeightDist::Unit,
        (Some(v), _) => {
            d.errors.push(ConfigError::InvalidValue {
                key: "weights".into(),
                value: v.into(),
                expected: "unit or uniform".into(),
            });
            def.weights
        }
    };
    let topology = match cfg.get("topology") {
        None | Some("random") => Topology::Random,
        Some("bipartite") => Topology::Bipartite,
        Some(v) => {
            d.errors.push(ConfigError::InvalidValue {
                key: "topology".into(),
                value: v.into(),
                expected: "random or bipartite".into(),
            });
            Topology::Random
        }
    };
    let numbers = "comma-separated numbers";
    SynthSpec {
        num_users: d.take(cfg.value_or("num_users", "a positive integer", def.num_users), def.num_users),
        num_context_users: d.take(
            cfg.value_or("num_context_users", "a non-negative integer", def.num_context_users),
            def.num_context_users,
        ),
        num_apps: d.take(cfg.value_or("num_apps", "a positive integer", def.num_apps), def.num_apps),
        edge_density: d.take(cfg.list("edge_density", numbers), None).unwrap_or(def.edge_density),
        weights,
        topology,
        planted_alpha: d.take(cfg.list("alpha", numbers), None).unwrap_or(def.planted_alpha),
        planted_alpha_pop: d.take(cfg.value_or("alpha_pop", "a number", def.planted_alpha_pop), def.planted_alpha_pop),
        s_rate: d.take(cfg.value_or("s_rate", "a positive number", def.s_rate), def.s_rate),
        base_popularity: d.take(cfg.value_or("base_popularity", "a number", def.base_popularity), def.base_popularity),
        seed: root_seed(cfg, d),
    }
}

struct NetworkOptions {
    entry: NetworkEntry,
    kind: NetworkKind,
    symmetrize: Symmetrize,
    normalize: Normalization,
}

fn parse_normalization(key: &str, v: &str) -> Result<Normalization, ConfigError> {
    match v {
        "none" => Ok(Normalization::None),
        "max" => Ok(Normalization::Max),
        "total" => Ok(Normalization::Total),
        _ => Err(ConfigError::InvalidValue { key: key.into(), value: v.into(), expected: "none, max or total".into() }),
    }
}

fn network_options(cfg: &RunConfig, d: &mut Diag) -> Vec<NetworkOptions> {
    for key in cfg.orphan_network_options() {
        d.errors.push(ConfigError::Invalid(format!("{key} refers to a network without a path")));
    }
    let default_norm = match cfg.get("normalize") {
        None => Normalization::Max,
        Some(v) => d.take(parse_normalization("normalize", v), Normalization::Max),
    };
    cfg.networks()
        .into_iter()
        .map(|entry| {
            let key = |field: &str| format!("network.{}.{field}", entry.name);
            let kind = match cfg.get(&key("kind")) {
                None | Some("weighted") => NetworkKind::Weighted,
                Some("binary") => NetworkKind::Binary,
                Some(v) => {
                    d.errors.push(ConfigError::InvalidValue {
                        key: key("kind"),
                        value: v.into(),
                        expected: "weighted or binary".into(),
                    });
                    NetworkKind::Weighted
                }
            };
            let symmetrize = match cfg.get(&key("symmetrize")) {
                None => Symmetrize::default_for(kind),
                Some("sum") => Symmetrize::Sum,
                Some("max") => Symmetrize::Max,
                Some("strict") => Symmetrize::Strict,
                Some(v) => {
                    d.errors.push(ConfigError::InvalidValue {
                        key: key("symmetrize"),
                        value: v.into(),
                        expected: "sum, max or strict".into(),
                    });
                    Symmetrize::default_for(kind)
                }
            };
            let normalize = match cfg.get(&key("normalize")) {
                None => default_norm,
                Some(v) => d.take(parse_normalization(&key("normalize"), v), default_norm),
            };
            NetworkOptions { entry, kind, symmetrize, normalize }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
struct InputFile {
    key: String,
    path: String,
    sha256: String,
}

fn read_input(key: &str, path: &Path) -> Result<(Vec<u8>, InputFile), CliError> {
    let bytes =
        fs::read(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let file =
        InputFile { key: key.into(), path: path.display().to_string(), sha256: hex::encode(Sha256::digest(&bytes)) };
    Ok((bytes, file))
}

struct Loaded {
    stack: NetworkStack,
    adoptions: AdoptionMatrix,
    inputs: Vec<InputFile>,
    normalizations: Vec<Normalization>,
}

/// Reads the adoption log and every declared network. User and app counts come
/// from the config when given, otherwise from the largest id seen.
fn load_data(cfg: &RunConfig) -> Result<Loaded, CliError> {
    let mut d = Diag::default();
    let options = network_options(cfg, &mut d);
    let num_users: Option<usize> = d.take(cfg.parse_value("num_users", "a positive integer"), None);
    let num_apps: Option<usize> = d.take(cfg.parse_value("num_apps", "a positive integer"), None);
    let adoption_path = match cfg.existing_path("adoptions") {
        Ok(Some(p)) => Some(p),
        Ok(None) => {
            d.errors.push(ConfigError::Missing("adoptions".into()));
            None
        }
        Err(e) => {
            d.errors.push(e);
            None
        }
    };
    for o in &options {
        if !o.entry.path.is_file() {
            d.errors.push(ConfigError::MissingFile {
                key: format!("network.{}", o.entry.name),
                path: o.entry.path.display().to_string(),
            });
        }
    }
    d.finish()?;
    let adoption_path = adoption_path.expect("checked above");

    let mut inputs = Vec::new();
    let (bytes, file) = read_input("adoptions", &adoption_path)?;
    inputs.push(file);
    let context = adoption_path.display().to_string();
    let adoption_records: Vec<AdoptionRecord> =
        parse_adoption_records(bytes.as_slice()).map_err(|e| CliError::data(&context, e))?;
    let mut edge_records: Vec<Vec<EdgeRecord>> = Vec::new();
    for o in &options {
        let (bytes, file) = read_input(&format!("network.{}", o.entry.name), &o.entry.path)?;
        inputs.push(file);
        let records =
            parse_edge_records(bytes.as_slice()).map_err(|e| CliError::data(o.entry.path.display().to_string(), e))?;
        edge_records.push(records);
    }

    let seen_users = adoption_records
        .iter()
        .map(|r| r.user + 1)
        .chain(edge_records.iter().flatten().map(|r| r.src.max(r.dst) + 1))
        .max()
        .unwrap_or(0);
    let num_users = num_users.unwrap_or(seen_users);
    let num_apps = num_apps.unwrap_or_else(|| adoption_records.iter().map(|r| r.app + 1).max().unwrap_or(0));
    if num_users == 0 {
        return Err(ConfigError::Invalid("no users: set num_users or provide data".into()).into());
    }
    let adoptions =
        AdoptionMatrix::from_records(num_users, num_apps, adoption_records).map_err(|e| CliError::data(&context, e))?;
    let mut networks = Vec::new();
    for (o, records) in options.iter().zip(edge_records) {
        let g = CandidateNetwork::from_records(o.entry.name.clone(), o.kind, num_users, records, o.symmetrize)
            .map_err(|e| CliError::data(o.entry.path.display().to_string(), e))?;
        networks.push(normalize_network(&g, o.normalize));
    }
    let stack = NetworkStack::new(networks).map_err(|e| CliError::data("networks", e))?;
    Ok(Loaded { stack, adoptions, inputs, normalizations: options.iter().map(|o| o.normalize).collect() })
}

fn require_networks(loaded: &Loaded) -> Result<(), CliError> {
    if loaded.stack.num_networks() == 0 {
        return Err(ConfigError::Invalid("declare at least one network.<name> = <path>".into()).into());
    }
    Ok(())
}

fn use_popularity(cfg: &RunConfig) -> Result<bool, CliError> {
    Ok(cfg.value_or("use_popularity", "true or false", Flag(true))?.0)
}

#[derive(Serialize)]
struct OutputFile {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    run_id: &'a str,
    version: &'a str,
    config: BTreeMap<String, String>,
    inputs: &'a [InputFile],
    seeds: BTreeMap<String, u64>,
    outputs: Vec<OutputFile>,
}

/// Output folder of one run; files are recorded for the manifest as written.
struct RunDir {
    command: &'static str,
    run_id: String,
    path: PathBuf,
    config: BTreeMap<String, String>,
    inputs: Vec<InputFile>,
    outputs: Vec<OutputFile>,
}

impl RunDir {
    fn create(command: &'static str, cfg: &RunConfig, inputs: Vec<InputFile>) -> Result<Self, CliError> {
        let config = cfg.canonical();
        let mut hasher = Sha256::new();
        hasher.update(format!("{command}\n{VERSION}\n").as_bytes());
        for (k, v) in &config {
            hasher.update(format!("{k}={v}\n").as_bytes());
        }
        for f in &inputs {
            hasher.update(format!("{}:{}\n", f.key, f.sha256).as_bytes());
        }
        let run_id = format!("{command}-{}", &hex::encode(hasher.finalize())[..12]);
        let outdir = cfg.resolve(cfg.get("outdir").unwrap_or(DEFAULT_OUTDIR));
        let path = outdir.join(&run_id);
        fs::create_dir_all(&path).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))?;
        Ok(Self { command, run_id, path, config, inputs, outputs: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let target = self.path.join(name);
        fs::write(&target, contents)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", target.display())))?;
        self.outputs.push(OutputFile { file: name.into(), sha256: hex::encode(Sha256::digest(contents.as_bytes())) });
        Ok(())
    }

    fn finish(mut self, seeds: BTreeMap<String, u64>) -> Result<PathBuf, CliError> {
        let manifest = Manifest {
            command: self.command,
            run_id: &self.run_id,
            version: VERSION,
            config: std::mem::take(&mut self.config),
            inputs: &self.inputs,
            seeds,
            outputs: std::mem::take(&mut self.outputs),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        let target = self.path.join("manifest.json");
        fs::write(&target, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", target.display())))?;
        println!("wrote {}", self.path.display());
        Ok(self.path)
    }
}

fn root_seeds(seed: u64) -> BTreeMap<String, u64> {
    BTreeMap::from([("root".to_string(), seed)])
}

fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    let mut d = Diag::default();
    experiment_spec(cfg, &mut d);
    let synth = synth_spec(cfg, &mut d);
    network_options(cfg, &mut d);
    for key in ["params", "teacher"] {
        d.take(cfg.existing_path(key), None);
    }
    d.finish()?;
    if !cfg.contains("adoptions") && cfg.networks().is_empty() {
        synth.validate()?;
        println!(
            "config ok: synthetic spec with {} networks, {} users, {} apps",
            synth.num_networks(),
            synth.num_users,
            synth.num_apps
        );
        return Ok(());
    }
    let loaded = load_data(cfg)?;
    let a = &loaded.adoptions;
    let mut out = String::new();
    let _ = writeln!(out, "users: {}", a.num_users());
    let _ = writeln!(out, "apps: {}", a.num_apps());
    let _ = writeln!(out, "installations: {}", a.num_entries());
    for (g, norm) in loaded.stack.networks().iter().zip(&loaded.normalizations) {
        let _ =
            writeln!(out, "network {}: {} edges, {:?}, normalization {:?}", g.name(), g.num_edges(), g.kind(), norm);
    }
    match dataset_stats(a) {
        Ok(s) => {
            let _ = writeln!(out, "mean apps per user: {:.4}", s.mean_apps_per_user());
            let _ = writeln!(out, "exponential rate: {:.4}", s.exp_rate);
        }
        Err(_) => out.push_str("no installations\n"),
    }
    print!("{out}");
    Ok(())
}

fn stats(cfg: &RunConfig) -> Result<(), CliError> {
    let loaded = load_data(cfg)?;
    let s = dataset_stats(&loaded.adoptions).map_err(|e| CliError::data("adoptions", e))?;
    println!("{}", serde_json::to_string_pretty(&s).expect("stats serialize"));
    Ok(())
}

fn with_popularity(stack: NetworkStack, adoptions: &AdoptionMatrix, on: bool) -> Result<NetworkStack, CliError> {
    if !on {
        return Ok(stack.without_popularity());
    }
    let counts = popularity_counts(adoptions, &vec![true; adoptions.num_users()]);
    stack.with_popularity(counts).map_err(|e| CliError::data("popularity", e))
}

/// Context mask from a synthetic sidecar.
fn teacher_context(path: &Path, num_users: usize) -> Result<(Vec<bool>, InputFile), CliError> {
    let (bytes, file) = read_input("teacher", path)?;
    let sidecar: SynthSidecar = serde_json::from_slice(&bytes)
        .map_err(|e| ConfigError::Invalid(format!("{} is not a synthetic sidecar: {e}", path.display())))?;
    let mut context = vec![false; num_users];
    for &u in &sidecar.context_users {
        *context.get_mut(u).ok_or_else(|| {
            ConfigError::Invalid(format!("sidecar user {u} out of range (num_users = {num_users})"))
        })? = true;
    }
    Ok((context, file))
}

fn train(cfg: &RunConfig) -> Result<(), CliError> {
    let mut d = Diag::default();
    let fit = fit_config(cfg, &mut d);
    let teacher = d.take(cfg.existing_path("teacher"), None);
    d.finish()?;
    let mut loaded = load_data(cfg)?;
    require_networks(&loaded)?;
    let num_users = loaded.adoptions.num_users();
    let view = match teacher {
        None => TrainingView::all(num_users),
        Some(path) => {
            let (context, file) = teacher_context(&path, num_users)?;
            loaded.inputs.push(file);
            TrainingView { rows: context.iter().map(|c| !c).collect(), evidence: context }
        }
    };
    let stack = if use_popularity(cfg)? {
        let counts = popularity_counts(&loaded.adoptions, &view.evidence);
        loaded.stack.with_popularity(counts).map_err(|e| CliError::data("popularity", e))?
    } else {
        loaded.stack.without_popularity()
    };
    let apps: Vec<usize> = (0..loaded.adoptions.num_apps()).collect();
    let result = fit_mle_view(&stack, &loaded.adoptions, &apps, &view, &fit, None)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut run = RunDir::create("train", cfg, loaded.inputs)?;
    run.write("params.json", &(result.params.to_json() + "\n"))?;
    run.write("convergence.json", &(serde_json::to_string_pretty(&result.record).expect("record serializes") + "\n"))?;
    run.finish(root_seeds(fit.seed))?;
    Ok(())
}

fn predict(cfg: &RunConfig) -> Result<(), CliError> {
    let mut d = Diag::default();
    let seed = root_seed(cfg, &mut d);
    let params_path = d.take(cfg.existing_path("params"), None);
    if params_path.is_none() && !cfg.contains("params") {
        d.errors.push(ConfigError::Missing("params".into()));
    }
    d.finish()?;
    let params_path = params_path.expect("checked above");
    let loaded = load_data(cfg)?;
    require_networks(&loaded)?;
    let (bytes, params_file) = read_input("params", &params_path)?;
    let params = std::str::from_utf8(&bytes)
        .ok()
        .and_then(|t| ModelParams::from_json(t).ok())
        .ok_or_else(|| ConfigError::Invalid(format!("{} is not a parameter file", params_path.display())))?;
    params.validate().map_err(|e| ConfigError::Invalid(format!("{}: {e}", params_path.display())))?;
    let num_apps = loaded.adoptions.num_apps();
    let apps: Vec<usize> = match cfg.get("apps") {
        None | Some("all") => (0..num_apps).collect(),
        Some(_) => {
            let apps: Vec<usize> = cfg.list("apps", "comma-separated app ids or all")?.unwrap_or_default();
            if let Some(bad) = apps.iter().find(|&&a| a >= num_apps) {
                return Err(ConfigError::Invalid(format!("app {bad} out of range (num_apps = {num_apps})")).into());
            }
            apps
        }
    };
    let stack = with_popularity(loaded.stack, &loaded.adoptions, use_popularity(cfg)?)?;
    let mut csv = format!("{SHEET_CSV_HEADER}\n");
    for &app in &apps {
        let x = loaded.adoptions.adopter_vector(app);
        let sheet = score_app(&params, &stack, app, &x, stack.popularity_of(app))
            .map_err(|e| ConfigError::Invalid(format!("parameters do not match the data: {e}")))?;
        sheet.write_csv(&mut csv);
    }
    let mut inputs = loaded.inputs;
    inputs.push(params_file);
    let mut run = RunDir::create("predict", cfg, inputs)?;
    run.write("predictions.csv", &csv)?;
    run.finish(root_seeds(seed))?;
    Ok(())
}

fn experiment(cfg: &RunConfig) -> Result<(), CliError> {
    let mut d = Diag::default();
    let spec = experiment_spec(cfg, &mut d);
    d.finish()?;
    let loaded = load_data(cfg)?;
    require_networks(&loaded)?;
    let data = ExperimentData::new(loaded.stack, loaded.adoptions)?;
    let report = run_experiment(&data, &spec)?;
    let mut run = RunDir::create("experiment", cfg, loaded.inputs)?;
    run.write("report.json", &(report.to_json() + "\n"))?;
    run.write("records.csv", &report.records_csv())?;
    let summary = report.summary_csv();
    run.write("summary.csv", &summary)?;
    let mut seeds = root_seeds(spec.seed);
    for (r, s) in report.provenance.repeat_seeds.iter().enumerate() {
        seeds.insert(format!("repeat/{r}"), *s);
    }
    run.finish(seeds)?;
    print!("{summary}");
    Ok(())
}

fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let mut d = Diag::default();
    let spec = synth_spec(cfg, &mut d);
    d.finish()?;
    let data = generate(&spec)?;
    let mut run = RunDir::create("synth", cfg, Vec::new())?;
    for g in data.stack.networks() {
        run.write(&format!("{}.csv", g.name()), &format!("src,dst,weight\n{}", g.to_edge_list()))?;
    }
    run.write("adoptions.csv", &format!("user,app,timestamp\n{}", data.adoptions.to_csv()))?;
    let sidecar = serde_json::to_string_pretty(&data.sidecar(&spec)).expect("sidecar serializes") + "\n";
    run.write("planted.json", &sidecar)?;
    run.finish(root_seeds(spec.seed))?;
    Ok(())
}

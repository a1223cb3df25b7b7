use std::path::Path;
use std::time::Instant;

use bgcnn::attack::{self, Algorithm, AttackConfig, AttackReport};
use bgcnn::ensemble::{self, EnsembleConfig};
use bgcnn::gcnn::{self, GcnnConfig};
use bgcnn::graph::{load_dataset, make_split, normalize_adjacency, Dataset, LabelSet, LoadOptions, SplitMode};
use bgcnn::mmsbm::{self, MmsbmChain};
use bgcnn::rng::{derive_seed, tags};
use chrono::Utc;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Task};
use crate::record::{self, MethodSummary, RunMetrics, RunRecord, RunSeeds, Summary, VERSION};
use crate::{CliError, CliResult};

/// Everything a command wrote, also returned for programmatic use.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub records: Vec<RunRecord>,
    pub summary: Summary,
    pub attack: Option<AttackReport>,
}

pub fn load(cfg: &ExperimentConfig) -> CliResult<Dataset> {
    load_dataset(&cfg.dataset, LoadOptions::default()).map_err(CliError::invalid)
}

/// Validates, loads the container, runs the configured task and writes its outputs.
pub fn run(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    cfg.validate()?;
    if cfg.task == Task::Report {
        let out = crate::report::cmd_report(&cfg.runs, &cfg.output_dir)?;
        return Ok(Outcome { records: Vec::new(), summary: out, attack: None });
    }
    let ds = load(cfg)?;
    // split feasibility is a validation concern
    make_split(&ds.labels, cfg.split.per_class, cfg.split.mode, cfg.split.seed).map_err(CliError::invalid)?;
    std::fs::create_dir_all(cfg.output_dir.join("runs")).map_err(|e| CliError::Runtime(bgcnn::Error::Io { path: cfg.output_dir.clone(), source: e }))?;
    record::write_json(&cfg.output_dir.join("config.json"), cfg)?;
    let outcome = match cfg.task {
        Task::TrainGcnn | Task::TrainBayesian => cmd_train(cfg, &ds)?,
        Task::MmsbmFit => cmd_mmsbm_fit(cfg, &ds)?,
        Task::Attack => cmd_attack(cfg, &ds)?,
        Task::Report => unreachable!(),
    };
    for r in &outcome.records {
        let name = format!("{}-{:03}.json", r.method, r.repetition);
        record::write_json(&cfg.output_dir.join("runs").join(name), r)?;
    }
    record::write_json(&cfg.output_dir.join("summary.json"), &outcome.summary)?;
    Ok(outcome)
}

pub fn seeds(cfg: &ExperimentConfig, rep: usize, model: u64) -> RunSeeds {
    let repetition = derive_seed(cfg.seed, &[tags::REPETITION, rep as u64]);
    let split = match cfg.split.mode {
        SplitMode::Fixed => cfg.split.seed,
        SplitMode::Random => derive_seed(cfg.split.seed, &[rep as u64]),
    };
    RunSeeds { master: cfg.seed, repetition, split, model: derive_seed(repetition, &[model]) }
}

fn methods(cfg: &ExperimentConfig) -> Vec<Algorithm> {
    match cfg.task {
        Task::TrainGcnn => vec![Algorithm::Gcnn],
        Task::TrainBayesian if cfg.include_baseline => vec![Algorithm::Gcnn, Algorithm::Bayesian],
        _ => vec![Algorithm::Bayesian],
    }
}

fn split(cfg: &ExperimentConfig, ds: &Dataset, s: &RunSeeds) -> CliResult<LabelSet> {
    Ok(make_split(&ds.labels, cfg.split.per_class, cfg.split.mode, s.split)?)
}

/// Trains one method for one repetition and records its test accuracy.
pub fn train_once(cfg: &ExperimentConfig, ds: &Dataset, alg: Algorithm, rep: usize) -> CliResult<RunRecord> {
    let started = Utc::now();
    let clock = Instant::now();
    let s = seeds(cfg, rep, alg as u64 + 1);
    let labels = split(cfg, ds, &s)?;
    let z = match alg {
        Algorithm::Gcnn => {
            let a = normalize_adjacency::<f64>(&ds.graph);
            let gcfg = GcnnConfig { seed: s.model, ..cfg.gcnn.clone() };
            let w = gcnn::train(&a, &ds.features, &labels, &gcfg, None)?.weights;
            gcnn::predict(&w, gcfg.activation, &a, &ds.features)?
        }
        Algorithm::Bayesian => {
            let ecfg = EnsembleConfig { seed: s.model, gcnn: cfg.gcnn.clone(), ..cfg.ensemble.clone() };
            ensemble::run(&ds.graph, &ds.features, &labels, &ecfg)?.prediction.mean
        }
    };
    let acc = gcnn::accuracy(&z, &labels, labels.test());
    log::info!("{} rep {rep}: test accuracy {acc:.4}", alg.name());
    Ok(RunRecord {
        config_hash: cfg.hash(),
        version: VERSION.into(),
        task: cfg.task.name().into(),
        method: alg.name().into(),
        repetition: rep,
        seeds: s,
        metrics: RunMetrics {
            test_accuracy: Some(acc),
            log_joint: None,
            n_train: labels.train().len(),
            n_test: labels.test().len(),
        },
        started_at: started,
        finished_at: Utc::now(),
        wall_seconds: clock.elapsed().as_secs_f64(),
    })
}

fn summarize(cfg: &ExperimentConfig, ds: &Dataset, methods: Vec<MethodSummary>) -> Summary {
    Summary {
        config_hash: cfg.hash(),
        version: VERSION.into(),
        task: cfg.task.name().into(),
        dataset: ds.manifest.name.clone(),
        per_class: cfg.split.per_class,
        repetitions: cfg.repetitions,
        methods,
    }
}

/// Runs every method over `cfg.repetitions` repetitions in a worker pool.
pub fn cmd_train(cfg: &ExperimentConfig, ds: &Dataset) -> CliResult<Outcome> {
    let algs = methods(cfg);
    let cells: Vec<(usize, Algorithm)> = (0..cfg.repetitions).flat_map(|r| algs.iter().map(move |&a| (r, a))).collect();
    let records: Vec<RunRecord> = cells
        .par_iter()
        .map(|&(r, a)| train_once(cfg, ds, a, r))
        .collect::<CliResult<_>>()?;
    let methods = algs
        .iter()
        .map(|a| {
            let vals = records.iter().filter(|r| r.method == a.name()).filter_map(RunRecord::headline).collect();
            MethodSummary::new(a.name(), "test_accuracy", vals)
        })
        .collect();
    let summary = summarize(cfg, ds, methods);
    Ok(Outcome { records, summary, attack: None })
}

/// Reruns the repetition and method of `rec` under `cfg`.
pub fn replay(cfg: &ExperimentConfig, ds: &Dataset, rec: &RunRecord) -> CliResult<RunRecord> {
    if cfg.hash() != rec.config_hash {
        return Err(CliError::invalid("record was produced by a different config"));
    }
    let alg = match rec.method.as_str() {
        "gcnn" => Algorithm::Gcnn,
        "bayesian" => Algorithm::Bayesian,
        other => return Err(CliError::Validation(format!("cannot replay method {other:?}"))),
    };
    train_once(cfg, ds, alg, rec.repetition)
}

/// Base GCNN, softmax initialization, then one block-model chain per repetition.
pub fn cmd_mmsbm_fit(cfg: &ExperimentConfig, ds: &Dataset) -> CliResult<Outcome> {
    let records: Vec<RunRecord> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| -> CliResult<RunRecord> {
            let started = Utc::now();
            let clock = Instant::now();
            let s = seeds(cfg, rep, 3);
            let labels = split(cfg, ds, &s)?;
            let a = normalize_adjacency::<f64>(&ds.graph);
            let gcfg = GcnnConfig { seed: derive_seed(s.model, &[0]), ..cfg.gcnn.clone() };
            let w = gcnn::train(&a, &ds.features, &labels, &gcfg, None)?.weights;
            let z = gcnn::predict(&w, gcfg.activation, &a, &ds.features)?;
            let hyper = cfg.ensemble.mmsbm.clone();
            let init = mmsbm::init_from_softmax(z.view(), &ds.graph, &hyper)?;
            let mut chain = MmsbmChain::new(&ds.graph, init, hyper.clone(), derive_seed(s.model, &[1]))?.with_trace(cfg.trace_every);
            chain.run(&ds.graph, cfg.ensemble.n_mmsbm_iters)?;
            let lj = chain.log_joint_estimate(&ds.graph)?;
            let dir = cfg.output_dir.join("runs");
            chain.write_trace_csv(dir.join(format!("mmsbm-{rep:03}-trace.csv")))?;
            mmsbm::save_params(dir.join(format!("mmsbm-{rep:03}-params.json")), chain.params(), &hyper, chain.iteration())?;
            Ok(RunRecord {
                config_hash: cfg.hash(),
                version: VERSION.into(),
                task: cfg.task.name().into(),
                method: "mmsbm".into(),
                repetition: rep,
                seeds: s,
                metrics: RunMetrics { test_accuracy: None, log_joint: Some(lj), n_train: labels.train().len(), n_test: labels.test().len() },
                started_at: started,
                finished_at: Utc::now(),
                wall_seconds: clock.elapsed().as_secs_f64(),
            })
        })
        .collect::<CliResult<_>>()?;
    let vals = records.iter().filter_map(RunRecord::headline).collect();
    let summary = summarize(cfg, ds, vec![MethodSummary::new("mmsbm", "log_joint", vals)]);
    Ok(Outcome { records, summary, attack: None })
}

/// Random-attack experiment on the split of repetition 0.
pub fn cmd_attack(cfg: &ExperimentConfig, ds: &Dataset) -> CliResult<Outcome> {
    let started = Utc::now();
    let clock = Instant::now();
    let s = seeds(cfg, 0, 4);
    let labels = split(cfg, ds, &s)?;
    let acfg = AttackConfig {
        algorithms: vec![Algorithm::Gcnn, Algorithm::Bayesian],
        gcnn: cfg.gcnn.clone(),
        ensemble: EnsembleConfig { gcnn: cfg.gcnn.clone(), ..cfg.ensemble.clone() },
        selection_trials: cfg.attack.selection_trials,
        eval_trials: cfg.attack.eval_trials,
        sizes: cfg.attack.sizes,
        budget_override: cfg.attack.budget_override,
        seed: s.model,
    };
    let report = attack::run_attack_experiment(&ds.graph, &ds.features, &labels, &acfg)?;
    report.write_csv(cfg.output_dir.join("attack_rows.csv"))?;
    record::write_atomic(&cfg.output_dir.join("attack_summary.json"), &(report.summary_json()? + "\n"))?;

    let mut methods = Vec::new();
    let mut records = Vec::new();
    for alg in &acfg.algorithms {
        let per_trial = |post: bool| -> Vec<f64> {
            (0..acfg.eval_trials)
                .map(|t| {
                    let rows: Vec<_> = report.rows.iter().filter(|r| r.algorithm == *alg && r.trial == t).collect();
                    let hits = rows.iter().filter(|r| if post { r.post_correct } else { r.pre_correct }).count();
                    hits as f64 / rows.len().max(1) as f64
                })
                .collect()
        };
        let pre = MethodSummary::new(&format!("{}/no_attack", alg.name()), "target_accuracy", per_trial(false));
        let post = MethodSummary::new(&format!("{}/attack", alg.name()), "target_accuracy", per_trial(true));
        records.push(RunRecord {
            config_hash: cfg.hash(),
            version: VERSION.into(),
            task: cfg.task.name().into(),
            method: alg.name().into(),
            repetition: 0,
            seeds: s.clone(),
            metrics: RunMetrics { test_accuracy: Some(post.mean), log_joint: None, n_train: labels.train().len(), n_test: labels.test().len() },
            started_at: started,
            finished_at: Utc::now(),
            wall_seconds: clock.elapsed().as_secs_f64(),
        });
        methods.push(pre);
        methods.push(post);
    }
    let summary = summarize(cfg, ds, methods);
    Ok(Outcome { records, summary, attack: Some(report) })
}

/// Loads `path` as a config when it names a file, otherwise uses defaults.
pub fn config_from(path: Option<&Path>) -> CliResult<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

//! End-to-end pipelines behind the CLI subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use semexp_core::classifier::{
    evaluate_accuracy, generate_dataset, split_dataset, train_classifier, Accuracy, Dataset, QuestionScorer,
    RelevanceModel, TrainedClassifier,
};
use semexp_core::questions::QuestionCatalog;
use semexp_core::reward::Aggregate;
use semexp_core::rl::{train_with, LogRow, Method, PolicyValueNets, TrainOutcome};
use semexp_core::rng::Fingerprint;
use semexp_core::seeds::{subsystem_seed, Subsystem};

use crate::config::HarnessConfig;
use crate::error::{io_err, HarnessError, Result};
use crate::formats::{load_checkpoint, save_checkpoint, write_file, Checkpoint};
use crate::logs::{write_log, LOG_FILE};

pub const CONFIG_SNAPSHOT: &str = "config.cfg";
pub const CLASSIFIER_FILE: &str = "model.sqm";
pub const FINAL_CHECKPOINT: &str = "final.sqm";

pub fn generate(cfg: &HarnessConfig) -> Result<Dataset> {
    let catalog = cfg.catalog()?;
    Ok(generate_dataset(
        &cfg.arena,
        &catalog,
        cfg.dataset.size,
        subsystem_seed(cfg.dataset.seed, Subsystem::Dataset),
    )?)
}

/// Train and test halves under the configured fraction and split seed.
pub fn split(cfg: &HarnessConfig, dataset: &Dataset) -> Result<(Dataset, Dataset)> {
    Ok(split_dataset(
        dataset,
        cfg.dataset.train_fraction,
        subsystem_seed(cfg.dataset.seed, Subsystem::Split),
    )?)
}

/// Trains on the train split and scores the test split.
pub fn fit_classifier(cfg: &HarnessConfig, dataset: &Dataset) -> Result<(TrainedClassifier, Accuracy)> {
    let catalog = cfg.catalog()?;
    let (train, test) = split(cfg, dataset)?;
    let trained = train_classifier(
        &train,
        &catalog,
        &cfg.classifier.hyper,
        subsystem_seed(cfg.classifier.seed, Subsystem::Classifier),
    )?;
    let acc = evaluate_accuracy(&trained.model, &test, &catalog, cfg.classifier.threshold)?;
    Ok((trained, acc))
}

/// Digest of every setting that influences the classifier.
pub fn classifier_digest(cfg: &HarnessConfig) -> u64 {
    let mut fp = Fingerprint::new();
    for line in cfg.to_text().lines() {
        if ["arena.", "catalog.", "dataset.", "classifier."]
            .iter()
            .any(|p| line.starts_with(p))
            && !line.starts_with("classifier.checkpoint")
        {
            fp.bytes(line.as_bytes());
        }
    }
    fp.finish()
}

pub fn save_classifier(path: &Path, cfg: &HarnessConfig, model: &RelevanceModel) -> Result<()> {
    let mut ckpt = Checkpoint::new(model.tensors());
    ckpt.config_digest = Some(classifier_digest(cfg));
    save_checkpoint(path, &ckpt)
}

pub fn load_classifier(path: &Path, cfg: &HarnessConfig) -> Result<RelevanceModel> {
    let ckpt = load_checkpoint(path)?;
    let catalog = cfg.catalog()?;
    Ok(RelevanceModel::from_tensors(
        2 * cfg.arena.num_objects,
        &catalog,
        &cfg.classifier.hyper,
        &ckpt.tensors,
    )?)
}

pub fn write_loss_csv(path: &Path, history: &[f64]) -> Result<()> {
    let mut text = String::from("epoch,loss\n");
    for (e, l) in history.iter().enumerate() {
        text.push_str(&format!("{},{}\n", e + 1, l));
    }
    write_file(path, text.as_bytes())
}

/// Writes the model, its loss curve and test accuracy into `dir`.
pub fn write_classifier_artifacts(
    dir: &Path,
    cfg: &HarnessConfig,
    trained: &TrainedClassifier,
    acc: &Accuracy,
) -> Result<()> {
    save_classifier(&dir.join(CLASSIFIER_FILE), cfg, &trained.model)?;
    write_loss_csv(&dir.join("loss.csv"), &trained.loss_history)?;
    write_file(&dir.join("accuracy.txt"), accuracy_line(acc).as_bytes())
}

pub fn accuracy_line(acc: &Accuracy) -> String {
    format!(
        "elementwise_accuracy={} exact_match={}\n",
        acc.elementwise, acc.exact_match
    )
}

/// The configured classifier checkpoint, or one cached under
/// `<out>/classifier/`, trained when missing or stale.
pub fn obtain_classifier(cfg: &HarnessConfig, out: &Path) -> Result<RelevanceModel> {
    if !cfg.classifier.checkpoint.is_empty() {
        return load_classifier(Path::new(&cfg.classifier.checkpoint), cfg);
    }
    let path = out.join("classifier").join(CLASSIFIER_FILE);
    if path.exists() {
        let ckpt = load_checkpoint(&path)?;
        if ckpt.config_digest == Some(classifier_digest(cfg)) {
            return load_classifier(&path, cfg);
        }
    }
    let dataset = generate(cfg)?;
    let (trained, acc) = fit_classifier(cfg, &dataset)?;
    write_classifier_artifacts(&out.join("classifier"), cfg, &trained, &acc)?;
    Ok(trained.model)
}

pub fn run_dir(out: &Path, variant: &str, seed: u64) -> PathBuf {
    out.join(variant).join(format!("seed_{seed}"))
}

pub fn checkpoint_name(update: usize) -> String {
    format!("update_{update:05}.sqm")
}

fn policy_checkpoint(nets: &PolicyValueNets, update: usize, digest: u64) -> Checkpoint {
    Checkpoint {
        tensors: nets.tensors(),
        update: Some(update as u64),
        config_digest: Some(digest),
    }
}

/// One seed of one method: config snapshot, `log.csv`, periodic and final
/// checkpoints, all inside `dir`.
pub fn train_run(
    cfg: &HarnessConfig,
    method: Method,
    seed: u64,
    scorer: Option<&QuestionScorer>,
    dir: &Path,
) -> Result<TrainOutcome> {
    let mut snapshot = cfg.clone();
    snapshot.run.method = method;
    snapshot.run.seeds = vec![seed];
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_file(&dir.join(CONFIG_SNAPSHOT), snapshot.to_text().as_bytes())?;
    let digest = snapshot.digest();
    let catalog = cfg.catalog()?;
    let every = cfg.run.checkpoint_every;
    let mut save_err = None;
    let run = cfg.run_config(method, seed);
    let outcome = train_with(&run, &catalog, scorer, |row: &LogRow, nets| {
        if row.update % every == 0 {
            let path = dir.join("checkpoints").join(checkpoint_name(row.update));
            if let Err(e) = save_checkpoint(&path, &policy_checkpoint(nets, row.update, digest)) {
                save_err = Some(e);
                return Err(semexp_core::Error::Internal("checkpoint write failed".into()));
            }
        }
        Ok(())
    });
    let outcome = match (outcome, save_err) {
        (_, Some(e)) => return Err(e),
        (o, None) => o?,
    };
    write_log(&dir.join(LOG_FILE), &outcome.log)?;
    save_checkpoint(
        &dir.join(FINAL_CHECKPOINT),
        &policy_checkpoint(&outcome.nets, outcome.log.len(), digest),
    )?;
    Ok(outcome)
}

/// Loads policy/value networks saved by [`train_run`].
pub fn load_policy(path: &Path, cfg: &HarnessConfig, catalog: &QuestionCatalog) -> Result<PolicyValueNets> {
    let ckpt = load_checkpoint(path)?;
    Ok(PolicyValueNets::from_tensors(
        2 * cfg.arena.num_objects + catalog.len(),
        cfg.arena.num_actions(),
        cfg.ppo.hidden_width,
        &ckpt.tensors,
    )?)
}

/// Trains `method` for every seed under `<out>/<method>/seed_<s>/`.
pub fn train_seeds(
    cfg: &HarnessConfig,
    method: Method,
    seeds: &[u64],
    out: &Path,
    classifier: Option<&RelevanceModel>,
) -> Result<Vec<TrainOutcome>> {
    let scorer = scorer_for(cfg, method, classifier)?;
    seeds
        .iter()
        .map(|&s| train_run(cfg, method, s, scorer.as_ref(), &run_dir(out, method.name(), s)))
        .collect()
}

fn scorer_for(cfg: &HarnessConfig, method: Method, model: Option<&RelevanceModel>) -> Result<Option<QuestionScorer>> {
    if !method.needs_classifier() {
        return Ok(None);
    }
    let model = model.ok_or_else(|| HarnessError::Usage("method ours needs a classifier".into()))?;
    Ok(Some(QuestionScorer::new(model, &cfg.catalog()?)?))
}

/// One ablation setting of the classifier-guided method.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AblationVariant {
    pub n: usize,
    pub aggregate: Aggregate,
    pub period: usize,
}

impl AblationVariant {
    pub fn name(&self) -> String {
        format!("n{}_{}_k{}", self.n, self.aggregate.name(), self.period)
    }
}

/// `n ∈ {1, 2}` by aggregate by inquiry period `k ∈ {1, 3, 5, 10}`. With
/// one question the mean equals the sum, so `n = 1` only uses the sum.
pub fn ablation_grid() -> Vec<AblationVariant> {
    let mut out = Vec::new();
    for n in [1, 2] {
        let aggregates: &[Aggregate] = if n == 1 { &[Aggregate::Sum] } else { &[Aggregate::Sum, Aggregate::Mean] };
        for &aggregate in aggregates {
            for period in [1, 3, 5, 10] {
                out.push(AblationVariant { n, aggregate, period });
            }
        }
    }
    out
}

/// Runs every ablation variant for every seed under `<out>/<variant>/seed_<s>/`.
pub fn ablate(
    cfg: &HarnessConfig,
    seeds: &[u64],
    out: &Path,
    classifier: &RelevanceModel,
) -> Result<Vec<AblationVariant>> {
    let scorer = QuestionScorer::new(classifier, &cfg.catalog()?)?;
    let grid = ablation_grid();
    for v in &grid {
        let mut c = cfg.clone();
        c.query.n = v.n;
        c.query.aggregate = v.aggregate;
        c.query.period = v.period;
        for &s in seeds {
            train_run(&c, Method::Ours, s, Some(&scorer), &run_dir(out, &v.name(), s))?;
        }
    }
    Ok(grid)
}

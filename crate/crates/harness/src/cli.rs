//! The `semexp` command line.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use semexp_core::classifier::evaluate_accuracy;
use semexp_core::rl::{evaluate_policy, Method};
use semexp_core::seeds::{subsystem_seed, Subsystem};

use crate::config::{parse_config, HarnessConfig};
use crate::error::{io_err, HarnessError, Result};
use crate::formats::{load_dataset, save_dataset};
use crate::pipeline::{
    ablate, accuracy_line, fit_classifier, generate, load_classifier, load_policy, obtain_classifier, split,
    train_seeds, write_classifier_artifacts,
};
use crate::report::report;

#[derive(Debug, Parser)]
#[command(name = "semexp", version, about = "Question-guided curiosity experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the labeled classifier dataset (SQD1).
    GenData {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output file; defaults to `<out_dir>/data.sqd`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the relevance classifier; writes model.sqm, loss.csv and accuracy.txt.
    TrainClassifier {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Existing SQD1 dataset; generated from the config when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Output directory; defaults to `<out_dir>/classifier`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report test-split accuracy of a trained classifier.
    EvalClassifier {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Train one method for each seed, then merge the seeds.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// ours, ane, random or ppo; defaults to `run.method`.
        #[arg(long)]
        method: Option<String>,
        /// Comma-separated seeds; defaults to `run.seeds`.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy success rate of a saved policy checkpoint.
    Evaluate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to `ppo.eval_episodes`.
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sweep question count, aggregate and inquiry period for the guided method.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seeds: Option<String>,
        /// Defaults to `<out_dir>/ablation`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge every `seed_*/log.csv` below a directory into comparison CSVs.
    Report { dir: PathBuf },
}

pub fn load_config(path: Option<&Path>) -> Result<HarnessConfig> {
    match path {
        None => Ok(HarnessConfig::default()),
        Some(p) => parse_config(&std::fs::read_to_string(p).map_err(io_err(p))?),
    }
}

pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let seeds = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<u64>()
                .map_err(|_| HarnessError::Usage(format!("bad seed {p:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if seeds.is_empty() {
        return Err(HarnessError::Usage("no seeds given".into()));
    }
    Ok(seeds)
}

fn out_dir(cfg: &HarnessConfig, out: Option<PathBuf>, sub: &str) -> PathBuf {
    out.unwrap_or_else(|| {
        let base = PathBuf::from(&cfg.run.out_dir);
        if sub.is_empty() {
            base
        } else {
            base.join(sub)
        }
    })
}

fn say(w: &mut dyn Write, line: String) -> Result<()> {
    writeln!(w, "{line}").map_err(io_err("<stdout>"))
}

/// Executes one subcommand, writing progress lines to `w`.
pub fn run(cli: Cli, w: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::GenData { config, out } => {
            let cfg = load_config(config.as_deref())?;
            let path = out.unwrap_or_else(|| PathBuf::from(&cfg.run.out_dir).join("data.sqd"));
            let data = generate(&cfg)?;
            save_dataset(&path, &data)?;
            say(w, format!("wrote {} samples to {}", data.len(), path.display()))
        }
        Command::TrainClassifier { config, data, out } => {
            let cfg = load_config(config.as_deref())?;
            let dataset = match data {
                Some(p) => load_dataset(&p)?,
                None => generate(&cfg)?,
            };
            let dir = out_dir(&cfg, out, "classifier");
            let (trained, acc) = fit_classifier(&cfg, &dataset)?;
            write_classifier_artifacts(&dir, &cfg, &trained, &acc)?;
            say(w, format!("wrote {}", dir.display()))?;
            say(w, accuracy_line(&acc).trim_end().to_string())
        }
        Command::EvalClassifier { config, model, data } => {
            let cfg = load_config(config.as_deref())?;
            let dataset = match data {
                Some(p) => load_dataset(&p)?,
                None => generate(&cfg)?,
            };
            let (_, test) = split(&cfg, &dataset)?;
            let m = load_classifier(&model, &cfg)?;
            let acc = evaluate_accuracy(&m, &test, &cfg.catalog()?, cfg.classifier.threshold)?;
            say(w, accuracy_line(&acc).trim_end().to_string())
        }
        Command::Train {
            config,
            method,
            seeds,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let method = match method {
                Some(m) => Method::from_name(&m).ok_or_else(|| HarnessError::Usage(format!("unknown method {m:?}")))?,
                None => cfg.run.method,
            };
            let seeds = match seeds {
                Some(s) => parse_seeds(&s)?,
                None => cfg.run.seeds.clone(),
            };
            let out = out_dir(&cfg, out, "");
            let model = if method.needs_classifier() {
                Some(obtain_classifier(&cfg, &out)?)
            } else {
                None
            };
            let outcomes = train_seeds(&cfg, method, &seeds, &out, model.as_ref())?;
            for (s, o) in seeds.iter().zip(&outcomes) {
                say(w, format!("{} seed {s}: final success {:?}", method.name(), o.final_success()))?;
            }
            let rep = report(&out.join(method.name()))?;
            let (m, sd) = rep.variants[0].final_success_mean_std();
            say(w, format!("{}: final success {m:.3} +- {sd:.3}", method.name()))
        }
        Command::Evaluate {
            config,
            checkpoint,
            episodes,
            seed,
        } => {
            let cfg = load_config(config.as_deref())?;
            let catalog = cfg.catalog()?;
            let nets = load_policy(&checkpoint, &cfg, &catalog)?;
            let episodes = episodes.unwrap_or(cfg.ppo.eval_episodes);
            let rate = evaluate_policy(
                &nets,
                &cfg.arena,
                &catalog,
                episodes,
                subsystem_seed(seed, Subsystem::Evaluation),
            )?;
            say(w, format!("success_rate={rate}"))
        }
        Command::Ablate { config, seeds, out } => {
            let cfg = load_config(config.as_deref())?;
            let seeds = match seeds {
                Some(s) => parse_seeds(&s)?,
                None => cfg.run.seeds.clone(),
            };
            let model = obtain_classifier(&cfg, Path::new(&cfg.run.out_dir))?;
            let out = out_dir(&cfg, out, "ablation");
            let grid = ablate(&cfg, &seeds, &out, &model)?;
            say(w, format!("ran {} variants x {} seeds", grid.len(), seeds.len()))?;
            let rep = report(&out)?;
            for note in &rep.notes {
                say(w, note.clone())?;
            }
            Ok(())
        }
        Command::Report { dir } => {
            let rep = report(&dir)?;
            for v in &rep.variants {
                let (m, sd) = v.final_success_mean_std();
                say(w, format!("{}: {} seeds, final success {m:.3} +- {sd:.3}", v.name, v.seeds.len()))?;
            }
            for note in &rep.notes {
                say(w, note.clone())?;
            }
            Ok(())
        }
    }
}

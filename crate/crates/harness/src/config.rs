//! Line-oriented run configuration.
//!
//! Every line is `section.key = value`, blank, or a `#` comment. Omitted
//! keys keep their defaults; unknown keys are errors. [`HarnessConfig::to_text`]
//! writes every effective value and parses back to an equal config.

use std::collections::BTreeMap;

use semexp_core::classifier::ClassifierHyper;
use semexp_core::questions::{build_catalog, QuestionCatalog, Relation, DEFAULT_PALETTE};
use semexp_core::reward::{Aggregate, QueryConfig};
use semexp_core::rl::{Method, PpoConfig, RunConfig};
use semexp_core::rng::Fingerprint;
use semexp_core::world::ArenaConfig;

use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RunSection {
    pub name: String,
    pub out_dir: String,
    pub seeds: Vec<u64>,
    pub method: Method,
    /// Policy checkpoints are written every this many updates.
    pub checkpoint_every: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CatalogSection {
    pub colors: Vec<String>,
    pub relations: Vec<Relation>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSection {
    pub size: usize,
    pub seed: u64,
    pub train_fraction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierSection {
    pub hyper: ClassifierHyper,
    pub seed: u64,
    pub threshold: f64,
    /// Path of a trained model; empty means train one from this config.
    pub checkpoint: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HarnessConfig {
    pub run: RunSection,
    pub arena: ArenaConfig,
    pub catalog: CatalogSection,
    pub dataset: DatasetSection,
    pub classifier: ClassifierSection,
    pub query: QueryConfig,
    pub ppo: PpoConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            run: RunSection {
                name: "default".into(),
                out_dir: "runs".into(),
                seeds: vec![1, 2, 3],
                method: Method::Ours,
                checkpoint_every: 50,
            },
            arena: ArenaConfig::default(),
            catalog: CatalogSection {
                colors: DEFAULT_PALETTE.iter().map(|c| c.to_string()).collect(),
                relations: Relation::ALL.to_vec(),
            },
            dataset: DatasetSection {
                size: 10_000,
                seed: 1,
                train_fraction: 0.9,
            },
            classifier: ClassifierSection {
                hyper: ClassifierHyper::default(),
                seed: 1,
                threshold: 0.5,
                checkpoint: String::new(),
            },
            query: QueryConfig::default(),
            ppo: PpoConfig::default(),
        }
    }
}

/// A scalar or list that can appear on the right of `=`.
trait ConfigValue: Sized {
    fn render(&self) -> String;
    fn parse_value(s: &str) -> Result<Self, String>;
}

macro_rules! numeric_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn render(&self) -> String {
                format!("{self:?}")
            }
            fn parse_value(s: &str) -> Result<Self, String> {
                s.parse().map_err(|_| format!("cannot parse {s:?} as {}", stringify!($t)))
            }
        }
    )*};
}
numeric_value!(usize, u64, f64);

impl ConfigValue for String {
    fn render(&self) -> String {
        self.clone()
    }
    fn parse_value(s: &str) -> Result<Self, String> {
        Ok(s.to_string())
    }
}

impl ConfigValue for Relation {
    fn render(&self) -> String {
        self.word().into()
    }
    fn parse_value(s: &str) -> Result<Self, String> {
        Relation::from_word(s).ok_or_else(|| format!("unknown relation {s:?}"))
    }
}

impl ConfigValue for Method {
    fn render(&self) -> String {
        self.name().into()
    }
    fn parse_value(s: &str) -> Result<Self, String> {
        Method::from_name(s).ok_or_else(|| format!("unknown method {s:?}"))
    }
}

impl ConfigValue for Aggregate {
    fn render(&self) -> String {
        self.name().into()
    }
    fn parse_value(s: &str) -> Result<Self, String> {
        Aggregate::from_name(s).ok_or_else(|| format!("unknown aggregate {s:?}"))
    }
}

/// Comma-separated, surrounding spaces ignored.
impl<T: ConfigValue> ConfigValue for Vec<T> {
    fn render(&self) -> String {
        self.iter().map(T::render).collect::<Vec<_>>().join(",")
    }
    fn parse_value(s: &str) -> Result<Self, String> {
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(',').map(|part| T::parse_value(part.trim())).collect()
    }
}

struct Field {
    key: &'static str,
    get: fn(&HarnessConfig) -> String,
    set: fn(&mut HarnessConfig, &str) -> Result<(), String>,
}

macro_rules! field {
    ($key:literal => $($path:ident).+) => {
        Field {
            key: $key,
            get: |c| c.$($path).+.render(),
            set: |c, v| {
                c.$($path).+ = ConfigValue::parse_value(v)?;
                Ok(())
            },
        }
    };
}

/// Every key, in serialization order.
const FIELDS: &[Field] = &[
    field!("run.name" => run.name),
    field!("run.out_dir" => run.out_dir),
    field!("run.seeds" => run.seeds),
    field!("run.method" => run.method),
    field!("run.checkpoint_every" => run.checkpoint_every),
    field!("arena.half_extent" => arena.half_extent),
    field!("arena.object_radius" => arena.object_radius),
    field!("arena.push_distance" => arena.push_distance),
    field!("arena.num_objects" => arena.num_objects),
    field!("arena.max_episode_steps" => arena.max_episode_steps),
    field!("catalog.colors" => catalog.colors),
    field!("catalog.relations" => catalog.relations),
    field!("dataset.size" => dataset.size),
    field!("dataset.seed" => dataset.seed),
    field!("dataset.train_fraction" => dataset.train_fraction),
    field!("classifier.epochs" => classifier.hyper.epochs),
    field!("classifier.batch_size" => classifier.hyper.batch_size),
    field!("classifier.learning_rate" => classifier.hyper.learning_rate),
    field!("classifier.state_hidden" => classifier.hyper.state_hidden),
    field!("classifier.question_hidden" => classifier.hyper.question_hidden),
    field!("classifier.code_width" => classifier.hyper.code_width),
    field!("classifier.decoder_hidden" => classifier.hyper.decoder_hidden),
    field!("classifier.seed" => classifier.seed),
    field!("classifier.threshold" => classifier.threshold),
    field!("classifier.checkpoint" => classifier.checkpoint),
    field!("query.n" => query.n),
    field!("query.period" => query.period),
    field!("query.beta" => query.beta),
    field!("query.aggregate" => query.aggregate),
    field!("ppo.rollout_length" => ppo.rollout_length),
    field!("ppo.epochs_per_rollout" => ppo.epochs_per_rollout),
    field!("ppo.minibatch_size" => ppo.minibatch_size),
    field!("ppo.clip_ratio" => ppo.clip_ratio),
    field!("ppo.gamma" => ppo.gamma),
    field!("ppo.gae_lambda" => ppo.gae_lambda),
    field!("ppo.value_loss_coef" => ppo.value_loss_coef),
    field!("ppo.entropy_coef" => ppo.entropy_coef),
    field!("ppo.learning_rate" => ppo.learning_rate),
    field!("ppo.max_grad_norm" => ppo.max_grad_norm),
    field!("ppo.hidden_width" => ppo.hidden_width),
    field!("ppo.total_updates" => ppo.total_updates),
    field!("ppo.eval_every" => ppo.eval_every),
    field!("ppo.eval_episodes" => ppo.eval_episodes),
];

/// Parses config text; see the module docs for the grammar.
pub fn parse_config(text: &str) -> Result<HarnessConfig> {
    let mut cfg = HarnessConfig::default();
    let mut seen: BTreeMap<&'static str, usize> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(HarnessError::Config {
                line: line_no,
                key: line.to_string(),
                message: "expected `key = value`".into(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        let field = FIELDS.iter().find(|f| f.key == key).ok_or_else(|| HarnessError::Config {
            line: line_no,
            key: key.to_string(),
            message: "unknown key".into(),
        })?;
        if let Some(prev) = seen.insert(field.key, line_no) {
            return Err(HarnessError::Config {
                line: line_no,
                key: key.to_string(),
                message: format!("already set on line {prev}"),
            });
        }
        (field.set)(&mut cfg, value).map_err(|message| HarnessError::Config {
            line: line_no,
            key: key.to_string(),
            message,
        })?;
    }
    cfg.validate_at(&seen)?;
    Ok(cfg)
}

impl HarnessConfig {
    /// Every key with its effective value, one per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for f in FIELDS {
            out.push_str(f.key);
            out.push_str(" = ");
            out.push_str(&(f.get)(self));
            out.push('\n');
        }
        out
    }

    pub fn keys() -> impl Iterator<Item = &'static str> {
        FIELDS.iter().map(|f| f.key)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_at(&BTreeMap::new())
    }

    /// Reports a violated invariant against the key it concerns and the
    /// line that set it (0 when the value is a default).
    fn validate_at(&self, lines: &BTreeMap<&'static str, usize>) -> Result<()> {
        let fail = |key: &str, message: String| HarnessError::Config {
            line: lines.get(key).copied().unwrap_or(0),
            key: key.to_string(),
            message,
        };
        if self.run.seeds.is_empty() {
            return Err(fail("run.seeds", "at least one seed is required".into()));
        }
        if self.run.checkpoint_every == 0 {
            return Err(fail("run.checkpoint_every", "must be >= 1".into()));
        }
        if self.dataset.size == 0 {
            return Err(fail("dataset.size", "must be >= 1".into()));
        }
        let tf = self.dataset.train_fraction;
        if !(tf > 0.0 && tf < 1.0) {
            return Err(fail("dataset.train_fraction", "must lie in (0, 1)".into()));
        }
        let th = self.classifier.threshold;
        if !(th > 0.0 && th < 1.0) {
            return Err(fail("classifier.threshold", "must lie in (0, 1)".into()));
        }
        let catalog = self
            .catalog()
            .map_err(|e| fail("catalog.colors", e.to_string()))?;
        let checks = [
            self.arena.validate_with_catalog(&catalog),
            self.classifier.hyper.validate(),
            self.query.validate(),
            self.ppo.validate(),
        ];
        for check in checks {
            if let Err(e) = check {
                let message = e.to_string();
                let key = FIELDS
                    .iter()
                    .map(|f| f.key)
                    .find(|k| message.contains(k))
                    .unwrap_or("config");
                return Err(fail(key, message));
            }
        }
        if self.query.n > catalog.len() {
            return Err(fail("query.n", format!("exceeds the catalog size {}", catalog.len())));
        }
        Ok(())
    }

    pub fn catalog(&self) -> semexp_core::Result<QuestionCatalog> {
        build_catalog(&self.catalog.colors, &self.catalog.relations)
    }

    pub fn run_config(&self, method: Method, seed: u64) -> RunConfig {
        RunConfig {
            arena: self.arena.clone(),
            query: self.query.clone(),
            ppo: self.ppo.clone(),
            method,
            seed,
        }
    }

    /// Digest of the serialized config.
    pub fn digest(&self) -> u64 {
        Fingerprint::new().bytes(self.to_text().as_bytes()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_default() {
        assert_eq!(parse_config("").unwrap(), HarnessConfig::default());
        assert_eq!(parse_config("# only a comment\n\n").unwrap(), HarnessConfig::default());
    }

    #[test]
    fn sets_a_field() {
        let c = parse_config("ppo.rollout_length = 64 # shorter\nquery.aggregate = mean").unwrap();
        assert_eq!(c.ppo.rollout_length, 64);
        assert_eq!(c.query.aggregate, Aggregate::Mean);
    }

    #[test]
    fn malformed_value_names_line_and_key() {
        let err = parse_config("\nppo.clip_ratio = banana").unwrap_err();
        match err {
            HarnessError::Config { line, key, .. } => {
                assert_eq!(line, 2);
                assert_eq!(key, "ppo.clip_ratio");
            }
            other => panic!("{other:?}"),
        }
        assert!(err_line("ppo.clip_ration = 0.2") == 1);
        assert!(err_line("just words") == 1);
        assert!(err_line("query.n = 1\nquery.n = 2") == 2);
    }

    fn err_line(text: &str) -> usize {
        match parse_config(text).unwrap_err() {
            HarnessError::Config { line, .. } => line,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invariant_violation_names_key() {
        match parse_config("x = 1".replace("x = 1", "ppo.gamma = 1.5").as_str()).unwrap_err() {
            HarnessError::Config { line, key, .. } => assert_eq!((line, key.as_str()), (1, "ppo.gamma")),
            other => panic!("{other:?}"),
        }
        match parse_config("arena.num_objects = 9").unwrap_err() {
            HarnessError::Config { key, .. } => assert_eq!(key, "arena.num_objects"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let mut c = HarnessConfig::default();
        c.ppo.learning_rate = 1.0 / 3.0;
        c.run.seeds = vec![7, 8];
        c.catalog.relations = vec![Relation::Front, Relation::Left];
        c.classifier.checkpoint = "model.sqm".into();
        let text = c.to_text();
        assert_eq!(parse_config(&text).unwrap(), c);
        assert_eq!(text.lines().count(), FIELDS.len());
    }
}

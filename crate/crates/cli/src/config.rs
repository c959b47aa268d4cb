//! Run configuration: parsing, validation and the content hash that names a
//! run directory.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use viewsym::analysis::{PairMatchingConfig, SimilarityConfig, StimulusSpec, VerifySpec};
use viewsym::encoder::EncoderSpec;
use viewsym::learning::{BasisRule, LearningRate};
use viewsym::signature::SignatureSpec;
use viewsym::Execution;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Auc,
    Tuning,
    Simmatrix,
    Verify,
    All,
}

/// One learning rule to train per identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleConfig {
    pub rule: BasisRule,
    /// Units per identity. `None` means all views (view-based), all non-zero
    /// components (PCA), or 5 for the online rules.
    #[serde(default)]
    pub components: Option<usize>,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub learning_rate: LearningRate,
    #[serde(default = "default_trace_decay")]
    pub trace_decay: f64,
    #[serde(default = "default_true")]
    pub renormalize: bool,
    #[serde(default = "default_rank_tolerance")]
    pub rank_tolerance: f64,
}

fn default_epochs() -> usize {
    200
}
fn default_trace_decay() -> f64 {
    0.2
}
fn default_true() -> bool {
    true
}
fn default_rank_tolerance() -> f64 {
    1e-9
}

impl RuleConfig {
    pub fn new(rule: BasisRule) -> Self {
        RuleConfig {
            rule,
            components: None,
            epochs: default_epochs(),
            learning_rate: LearningRate::default(),
            trace_decay: default_trace_decay(),
            renormalize: true,
            rank_tolerance: default_rank_tolerance(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub rules: Vec<RuleConfig>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            rules: vec![RuleConfig::new(BasisRule::ViewBased), RuleConfig::new(BasisRule::Pca)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningConfig {
    /// Identity whose PCA units are plotted, and whose views probe them.
    pub identity: usize,
    pub units: usize,
    /// Identities (corpus indices from 0) in the ICA versus PCA contrast.
    pub ica_identities: usize,
    pub ica_components: usize,
    pub ica_epochs: usize,
}

impl Default for TuningConfig {
    fn default() -> Self {
        TuningConfig {
            identity: 0,
            units: 5,
            ica_identities: 5,
            ica_components: 39,
            ica_epochs: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub stimuli: StimulusSpec,
    pub encoder: EncoderSpec,
    pub training: TrainingConfig,
    pub signature: SignatureSpec,
    pub experiments: Vec<Experiment>,
    pub auc: PairMatchingConfig,
    pub similarity: SimilarityConfig,
    pub tuning: TuningConfig,
    pub verify: VerifySpec,
    pub output_dir: PathBuf,
    pub execution: Execution,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            master_seed: 0,
            stimuli: StimulusSpec::default(),
            encoder: EncoderSpec::c1(),
            training: TrainingConfig::default(),
            signature: SignatureSpec::default(),
            experiments: vec![Experiment::All],
            auc: PairMatchingConfig::default(),
            similarity: SimilarityConfig::default(),
            tuning: TuningConfig::default(),
            verify: VerifySpec::default(),
            output_dir: PathBuf::from("out"),
            execution: Execution::Parallel,
        }
    }
}

fn field(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

/// The published schema (`docs/config.schema.json`).
pub const SCHEMA: &str = include_str!("../../../docs/config.schema.json");

fn schema_validator() -> &'static jsonschema::Validator {
    static V: OnceLock<jsonschema::Validator> = OnceLock::new();
    V.get_or_init(|| {
        let schema: serde_json::Value = serde_json::from_str(SCHEMA).expect("schema is valid JSON");
        jsonschema::validator_for(&schema).expect("schema compiles")
    })
}

/// JSON pointer `/a/b/0` as `a.b[0]`.
fn dotted(pointer: &str) -> String {
    let mut out = String::new();
    for seg in pointer.split('/').skip(1) {
        if seg.parse::<usize>().is_ok() {
            out.push_str(&format!("[{seg}]"));
        } else {
            if !out.is_empty() {
                out.push('.');
            }
            out.push_str(seg);
        }
    }
    if out.is_empty() {
        ".".into()
    } else {
        out
    }
}

impl RunConfig {
    /// Parse, check against the schema, then apply the semantic checks.
    pub fn from_json(text: &str) -> Result<RunConfig, CliError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("not valid JSON: {e}")))?;
        if let Some(e) = schema_validator().iter_errors(&value).next() {
            return Err(field(&dotted(&e.instance_path().to_string()), &e));
        }
        let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            field(if path.is_empty() { "." } else { &path }, e.inner())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_json(&text)
    }

    /// Semantic checks beyond the schema; errors name the offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.stimuli;
        if s.render.width.is_multiple_of(2) {
            return Err(field("stimuli.render.width", format!("must be odd for exact reflection, got {}", s.render.width)));
        }
        s.render.validate().map_err(|e| field("stimuli.render", e))?;
        if s.n_identities == 0 {
            return Err(field("stimuli.n_identities", "must be >= 1"));
        }
        let angles = s.grid.angles().map_err(|e| field("stimuli.grid", e))?;
        viewsym::stimuli::generate_face(0, s.n_features, s.spread).map_err(|e| field("stimuli", e))?;
        viewsym::encoder::build_encoder(&self.encoder, s.render.height, s.render.width)
            .map_err(|e| field("encoder", e))?;
        if self.experiments.is_empty() {
            return Err(field("experiments", "select at least one experiment"));
        }
        for (i, r) in self.training.rules.iter().enumerate() {
            if r.components == Some(0) {
                return Err(field(&format!("training.rules[{i}].components"), "must be >= 1"));
            }
            if r.epochs == 0 {
                return Err(field(&format!("training.rules[{i}].epochs"), "must be >= 1"));
            }
            if self.training.rules[..i].iter().any(|o| o.rule == r.rule) {
                return Err(field(&format!("training.rules[{i}].rule"), format!("'{}' is listed twice", r.rule.name())));
            }
        }
        let wants = |e: Experiment| self.experiments.contains(&e) || self.experiments.contains(&Experiment::All);
        if wants(Experiment::Auc) || wants(Experiment::Simmatrix) {
            let need = self.auc.n_templates + self.auc.n_tests;
            if wants(Experiment::Auc) && need > s.n_identities {
                return Err(field("auc", format!("{need} identities needed, stimuli.n_identities is {}", s.n_identities)));
            }
            let need = self.similarity.n_templates + self.similarity.n_tests;
            if wants(Experiment::Simmatrix) && need > s.n_identities {
                return Err(field("similarity", format!("{need} identities needed, stimuli.n_identities is {}", s.n_identities)));
            }
            for (i, a) in self.similarity.angles.iter().enumerate() {
                if wants(Experiment::Simmatrix) && !angles.iter().any(|b| (a - b).abs() < 1e-9) {
                    return Err(field(&format!("similarity.angles[{i}]"), format!("{a} is not on the stimulus grid")));
                }
            }
        }
        if wants(Experiment::Tuning) || wants(Experiment::Auc) || wants(Experiment::Simmatrix) {
            for needed in [BasisRule::Pca, BasisRule::ViewBased] {
                if !self.training.rules.iter().any(|r| r.rule == needed) {
                    return Err(field("training.rules", format!("evaluation needs a '{}' entry", needed.name())));
                }
            }
        }
        if wants(Experiment::Tuning) {
            if self.tuning.identity >= s.n_identities {
                return Err(field("tuning.identity", format!("must be < {}", s.n_identities)));
            }
            if self.tuning.ica_identities > s.n_identities {
                return Err(field("tuning.ica_identities", format!("must be <= {}", s.n_identities)));
            }
        }
        Ok(())
    }

    /// Hash of everything that affects results (not the output location or
    /// the execution mode).
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.output_dir = PathBuf::new();
        canon.execution = Execution::Sequential;
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&canon).expect("config serializes"));
        hex::encode(&h.finalize()[..8])
    }

    pub fn wants(&self, e: Experiment) -> bool {
        self.experiments.contains(&e) || self.experiments.contains(&Experiment::All)
    }
}

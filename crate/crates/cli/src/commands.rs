//! The subcommands. Each one opens the run directory, writes its
//! artifacts and updates the manifest.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use viewsym::analysis::corpus::identity_seeds;
use viewsym::analysis::similarity::SimilarityStructure;
use viewsym::analysis::tuning::basis_tuning_curves;
use viewsym::analysis::{
    derive_seed, ica_contrast, pair_matching_experiment, similarity_experiment, symmetry_index, verify, AucTable,
    Corpus, Model, PairMatchingConfig, PropertyReport, RepresentationScorer, Severity, SimilarityConfig, Stage,
    StageMatrices, TemplateBank, TuningContrast, TuningCurve,
};
use viewsym::encoder::build_encoder;
use viewsym::export;
use viewsym::learning::{BasisRule, LearnedBasis, TrainOptions};
use viewsym::stimuli::{build_orbit, generate_face, FaceModel3D, OrbitSet};

use crate::config::{Experiment, RuleConfig, RunConfig};
use crate::run::{CheckSummary, RunDir};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Generate,
    Train,
    Evaluate,
    Verify,
    All,
}

impl Step {
    pub fn name(self) -> &'static str {
        match self {
            Step::Generate => "generate",
            Step::Train => "train",
            Step::Evaluate => "evaluate",
            Step::Verify => "verify",
            Step::All => "all",
        }
    }
}

const TAG_TRAIN: u64 = 0x7472_6169_6e00;
const TAG_AUC: u64 = 0x6175_6300;
const TAG_SIMILARITY: u64 = 0x7369_6d00;
const TAG_ICA: u64 = 0x6963_6100;

/// Online rules default to this many units per identity.
pub const DEFAULT_ONLINE_COMPONENTS: usize = 5;

pub fn stimulus_file(index: usize) -> String {
    format!("stimuli/orbit_{index:03}.json")
}

pub fn basis_file(rule: BasisRule, index: usize) -> String {
    format!("bases/{}/basis_{index:03}.json", rule.name())
}

#[derive(Serialize)]
struct StimulusOut<'a> {
    face: &'a FaceModel3D,
    orbit: &'a OrbitSet,
}

#[derive(Deserialize)]
struct StimulusIn {
    face: FaceModel3D,
    orbit: OrbitSet,
}

#[derive(Serialize)]
struct TuningOut<'a> {
    curves: &'a [TuningCurve],
    symmetry_indices: Vec<f64>,
}

#[derive(Serialize)]
struct SimilarityOut<'a> {
    matrices: &'a StageMatrices,
    structure: Vec<(&'static str, SimilarityStructure)>,
}

/// Run one subcommand (or the whole chain) and return the run directory.
pub fn run(cfg: &RunConfig, step: Step) -> Result<std::path::PathBuf, CliError> {
    let dir = RunDir::open(cfg)?;
    eprintln!("run directory {}", dir.root.display());
    match step {
        Step::Generate => timed(&dir, step, || generate(cfg, &dir))?,
        Step::Train => timed(&dir, step, || train(cfg, &dir))?,
        Step::Evaluate => timed(&dir, step, || evaluate(cfg, &dir))?,
        Step::Verify => verify_step(cfg, &dir)?,
        Step::All => {
            timed(&dir, Step::Generate, || generate(cfg, &dir))?;
            timed(&dir, Step::Train, || train(cfg, &dir))?;
            if [Experiment::Auc, Experiment::Tuning, Experiment::Simmatrix].iter().any(|e| cfg.wants(*e)) {
                timed(&dir, Step::Evaluate, || evaluate(cfg, &dir))?;
            }
            if cfg.wants(Experiment::Verify) {
                verify_step(cfg, &dir)?;
            }
        }
    }
    Ok(dir.root.clone())
}

fn timed(dir: &RunDir, step: Step, f: impl FnOnce() -> Result<(), CliError>) -> Result<(), CliError> {
    let t = Instant::now();
    f()?;
    let secs = t.elapsed().as_secs_f64();
    eprintln!("{}: done in {secs:.2} s", step.name());
    dir.update_manifest(step.name(), secs, None)
}

pub fn generate(cfg: &RunConfig, dir: &RunDir) -> Result<(), CliError> {
    let s = &cfg.stimuli;
    let exec = cfg.execution;
    let seeds = identity_seeds(cfg.master_seed, s.n_identities);
    let faces = exec.try_map(&seeds, |&seed| generate_face(seed, s.n_features, s.spread))?;
    let orbits = exec.try_map(&faces, |f| build_orbit(f, s.grid, &s.render))?;
    for (i, (face, orbit)) in faces.iter().zip(&orbits).enumerate() {
        dir.write_artifact(&stimulus_file(i), &StimulusOut { face, orbit })?;
    }
    eprintln!("generate: {} orbits x {} views", orbits.len(), orbits[0].views.len());
    Ok(())
}

/// Rebuild the encoded corpus from the stimulus files of this run.
pub fn load_corpus(cfg: &RunConfig, dir: &RunDir) -> Result<Corpus, CliError> {
    let mut faces = Vec::with_capacity(cfg.stimuli.n_identities);
    let mut orbits = Vec::with_capacity(cfg.stimuli.n_identities);
    for i in 0..cfg.stimuli.n_identities {
        let s: StimulusIn = dir.read_artifact(&stimulus_file(i))?;
        faces.push(s.face);
        orbits.push(s.orbit);
    }
    let encoder = build_encoder(&cfg.encoder, cfg.stimuli.render.height, cfg.stimuli.render.width)?;
    Ok(Corpus::from_orbits(faces, orbits, encoder, cfg.execution)?)
}

fn train_options(cfg: &RunConfig, rc: &RuleConfig) -> TrainOptions {
    TrainOptions {
        rule: rc.rule,
        components: rc.components.unwrap_or(DEFAULT_ONLINE_COMPONENTS),
        epochs: rc.epochs,
        seed: derive_seed(cfg.master_seed, TAG_TRAIN ^ rc.rule as u64),
        learning_rate: rc.learning_rate,
        trace_decay: rc.trace_decay,
        renormalize: rc.renormalize,
        rank_tolerance: rc.rank_tolerance,
    }
}

fn pca_model(cfg: &RunConfig) -> Model {
    let components = cfg
        .training
        .rules
        .iter()
        .find(|r| r.rule == BasisRule::Pca)
        .and_then(|r| r.components);
    Model::Pca { components }
}

pub fn train(cfg: &RunConfig, dir: &RunDir) -> Result<(), CliError> {
    let corpus = load_corpus(cfg, dir)?;
    let exec = cfg.execution;
    for rc in &cfg.training.rules {
        let bases = match rc.rule {
            BasisRule::ViewBased => TemplateBank::build(&corpus, Model::ViewBased, exec)?.bases,
            BasisRule::Pca => TemplateBank::build(&corpus, pca_model(cfg), exec)?.bases,
            _ => TemplateBank::train(&corpus, &train_options(cfg, rc), exec)?,
        };
        std::fs::create_dir_all(dir.path(&format!("bases/{}", rc.rule.name())))
            .map_err(|e| CliError::io(&dir.path("bases"), e))?;
        for (i, b) in bases.iter().enumerate() {
            dir.write_artifact(&basis_file(rc.rule, i), b)?;
        }
        eprintln!("train: {} x {} ({} units for identity 0)", rc.rule.name(), bases.len(), bases[0].len());
    }
    Ok(())
}

pub fn load_bank(cfg: &RunConfig, dir: &RunDir, corpus: &Corpus, rule: BasisRule) -> Result<TemplateBank, CliError> {
    let model = match rule {
        BasisRule::ViewBased => Model::ViewBased,
        BasisRule::Pca => pca_model(cfg),
        other => return Err(CliError::Config(format!("no evaluation model for rule '{}'", other.name()))),
    };
    let bases = (0..corpus.n_identities())
        .map(|i| {
            let rel = basis_file(rule, i);
            let b: LearnedBasis = dir.read_artifact(&rel)?;
            b.validate().map_err(|e| CliError::Artifact(format!("{rel}: {e}")))?;
            if b.identity_id != corpus.identity_id(i) {
                return Err(CliError::Artifact(format!("{rel}: belongs to identity {}", b.identity_id)));
            }
            Ok(b)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(TemplateBank { model, bases })
}

pub fn evaluate(cfg: &RunConfig, dir: &RunDir) -> Result<(), CliError> {
    let corpus = load_corpus(cfg, dir)?;
    let exec = cfg.execution;
    let view_based = load_bank(cfg, dir, &corpus, BasisRule::ViewBased)?;
    let pca = load_bank(cfg, dir, &corpus, BasisRule::Pca)?;

    if cfg.wants(Experiment::Auc) {
        let auc_cfg = PairMatchingConfig {
            seed: derive_seed(derive_seed(cfg.master_seed, TAG_AUC), cfg.auc.seed),
            ..cfg.auc.clone()
        };
        let raw = TemplateBank {
            model: Model::Raw,
            bases: Vec::new(),
        };
        let mut tables: Vec<AucTable> = Vec::new();
        for bank in [&raw, &view_based, &pca] {
            let scorer = RepresentationScorer {
                corpus: &corpus,
                bank,
                spec: cfg.signature,
                exec,
            };
            let t = pair_matching_experiment(corpus.n_identities(), &corpus.angles, &auc_cfg, &scorer, exec)?;
            eprintln!("evaluate: auc {} at {} deg = {:.3}", t.model, t.radii[t.radii.len() - 1], t.auc_mean[t.auc_mean.len() - 1]);
            tables.push(t);
        }
        dir.write_csv("results/auc.csv", |w, h| export::write_auc(w, Some(h), &tables))?;
        dir.write_artifact("results/auc.json", &tables)?;
    }

    if cfg.wants(Experiment::Tuning) {
        let t = &cfg.tuning;
        let probe: Vec<(f64, Vec<f64>)> = corpus
            .angles
            .iter()
            .copied()
            .zip(corpus.features[t.identity].iter().cloned())
            .collect();
        let mut curves = basis_tuning_curves(&pca.bases[t.identity], &probe, &cfg.signature)?;
        curves.truncate(t.units);
        let symmetry_indices = curves.iter().map(symmetry_index).collect::<Result<Vec<_>, _>>()?;
        dir.write_csv("results/tuning.csv", |w, h| export::write_tuning(w, Some(h), &curves))?;
        dir.write_artifact(
            "results/tuning.json",
            &TuningOut {
                curves: &curves,
                symmetry_indices,
            },
        )?;
        let mut ica = TrainOptions::new(BasisRule::Ica, t.ica_components);
        ica.epochs = t.ica_epochs;
        ica.seed = derive_seed(cfg.master_seed, TAG_ICA);
        let ids: Vec<usize> = (0..t.ica_identities).collect();
        let contrast: TuningContrast = ica_contrast(&corpus, &ids, &ica, &cfg.signature, exec)?;
        eprintln!(
            "evaluate: median symmetry index ica {:.3}, pca {:.3}",
            contrast.ica_median, contrast.pca_median
        );
        dir.write_artifact("results/ica_contrast.json", &contrast)?;
    }

    if cfg.wants(Experiment::Simmatrix) {
        let sim_cfg = SimilarityConfig {
            seed: derive_seed(derive_seed(cfg.master_seed, TAG_SIMILARITY), cfg.similarity.seed),
            ..cfg.similarity.clone()
        };
        let m = similarity_experiment(&corpus, &pca, &cfg.signature, &sim_cfg, exec)?;
        for stage in Stage::ALL {
            dir.write_csv(&format!("results/similarity_{}.csv", stage.name()), |w, h| {
                export::write_similarity(w, Some(h), m.get(stage))
            })?;
        }
        let structure = Stage::ALL.iter().map(|s| (s.name(), m.get(*s).structure())).collect();
        dir.write_artifact("results/similarity.json", &SimilarityOut { matrices: &m, structure })?;
    }
    Ok(())
}

pub fn summarize(report: &PropertyReport) -> CheckSummary {
    CheckSummary {
        total: report.checks.len(),
        passed: report.checks.iter().filter(|c| c.passed).count(),
        failed: report.failures().iter().map(|c| c.name.clone()).collect(),
        warnings: report
            .checks
            .iter()
            .filter(|c| c.severity == Severity::Warning)
            .map(|c| c.name.clone())
            .collect(),
    }
}

fn verify_step(cfg: &RunConfig, dir: &RunDir) -> Result<(), CliError> {
    let t = Instant::now();
    dir.check_hashes()?;
    let report = verify(
        &cfg.stimuli,
        &cfg.encoder,
        &cfg.signature,
        &cfg.verify,
        cfg.master_seed,
        cfg.execution,
    )?;
    dir.write_artifact("report/report.json", &report)?;
    dir.write_csv("report/report.csv", |w, h| export::write_report(w, Some(h), &report))?;
    dir.write_csv("report/parity.csv", |w, h| export::write_parity(w, Some(h), &report.parity))?;
    dir.write_csv("report/invariance.csv", |w, h| export::write_invariance(w, Some(h), &report.invariance))?;
    for c in &report.checks {
        let status = match (c.passed, c.severity) {
            (true, _) => "PASS",
            (false, Severity::Warning) => "WARN",
            (false, Severity::Error) => "FAIL",
        };
        println!("{status} {} value={:e} threshold={:e}", c.name, c.value, c.threshold);
    }
    let summary = summarize(&report);
    let secs = t.elapsed().as_secs_f64();
    eprintln!("verify: {}/{} checks passed in {secs:.2} s", summary.passed, summary.total);
    dir.update_manifest(Step::Verify.name(), secs, Some(summary.clone()))?;
    if summary.failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::VerifyFailed(summary.failed))
    }
}

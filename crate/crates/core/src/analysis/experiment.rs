//! Experiments over a corpus: same/different pair matching, population
//! similarity matrices, and the ICA tuning contrast.

use std::collections::HashMap;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::auc::{roc_auc, AucTable};
use super::corpus::{derive_seed, Corpus};
use super::similarity::{similarity_matrix, RowLabel, SimilarityMatrix, Stage};
use super::tuning::{basis_tuning_curves, symmetry_index};
use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::learning::{reflection_adapted_pca, train_basis, view_based_basis, BasisRule, LearnedBasis, PcaOptions, TrainOptions};
use crate::linalg::{dot, standardize};
use crate::signature::{signature, simple_responses, SignatureSpec};

/// Representation used to score image pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Model {
    /// The encoder output itself.
    Raw,
    ViewBased,
    /// `components: None` keeps every non-zero principal component.
    Pca { components: Option<usize> },
}

impl Model {
    pub fn label(&self) -> String {
        match self {
            Model::Raw => "raw".into(),
            Model::ViewBased => "view_based".into(),
            Model::Pca { components: None } => "pca_full".into(),
            Model::Pca { components: Some(k) } => format!("pca_{k}"),
        }
    }
}

/// Template bases for every identity of a corpus (empty for [`Model::Raw`]).
#[derive(Clone, Debug)]
pub struct TemplateBank {
    pub model: Model,
    pub bases: Vec<LearnedBasis>,
}

impl TemplateBank {
    /// Bases are learned from standardized views, matching the input
    /// normalization of the signature.
    pub fn build(corpus: &Corpus, model: Model, exec: Execution) -> Result<TemplateBank> {
        let ids: Vec<usize> = (0..corpus.n_identities()).collect();
        let bases = match model {
            Model::Raw => Vec::new(),
            Model::ViewBased => exec.try_map(&ids, |&i| {
                view_based_basis(corpus.identity_id(i), &corpus.unit_views(i))
            })?,
            Model::Pca { components } => {
                let sigma = corpus.encoder.feature_reflection();
                let opts = PcaOptions {
                    components,
                    ..PcaOptions::default()
                };
                exec.try_map(&ids, |&i| -> Result<LearnedBasis> {
                    Ok(reflection_adapted_pca(&corpus.unit_views(i), &sigma, &opts)?
                        .with_identity(corpus.identity_id(i)))
                })?
            }
        };
        Ok(TemplateBank { model, bases })
    }

    /// Train an online or batch rule for every identity.
    pub fn train(corpus: &Corpus, opts: &TrainOptions, exec: Execution) -> Result<Vec<LearnedBasis>> {
        let ids: Vec<usize> = (0..corpus.n_identities()).collect();
        exec.try_map(&ids, |&i| {
            let o = TrainOptions {
                seed: derive_seed(opts.seed, i as u64),
                ..opts.clone()
            };
            train_basis(corpus.identity_id(i), &corpus.unit_views(i), &o)
        })
    }

    /// Bases of the listed identities (empty for [`Model::Raw`]).
    pub fn select(&self, identities: &[usize]) -> Vec<LearnedBasis> {
        if self.bases.is_empty() {
            return Vec::new();
        }
        identities.iter().map(|&i| self.bases[i].clone()).collect()
    }
}

/// Template and test identities (corpus indices) for one repetition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub templates: Vec<usize>,
    pub tests: Vec<usize>,
}

impl Split {
    pub fn new(templates: Vec<usize>, tests: Vec<usize>, n_identities: usize) -> Result<Split> {
        if templates.is_empty() || tests.len() < 2 {
            return invalid("a split needs at least 1 template and 2 test identities");
        }
        if templates.iter().chain(&tests).any(|&i| i >= n_identities) {
            return invalid(format!("identity index out of range (corpus has {n_identities})"));
        }
        if let Some(i) = templates.iter().find(|i| tests.contains(i)) {
            return invalid(format!("identity {i} is both a template and a test identity"));
        }
        Ok(Split { templates, tests })
    }

    pub fn random(n_identities: usize, n_templates: usize, n_tests: usize, rng: &mut ChaCha8Rng) -> Result<Split> {
        if n_templates + n_tests > n_identities {
            return invalid(format!(
                "{n_templates} template + {n_tests} test identities need at least {} identities, corpus has {n_identities}",
                n_templates + n_tests
            ));
        }
        let mut ids: Vec<usize> = (0..n_identities).collect();
        ids.shuffle(rng);
        let tests = ids[n_templates..n_templates + n_tests].to_vec();
        ids.truncate(n_templates);
        Split::new(ids, tests, n_identities)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageRef {
    pub identity: usize,
    pub view: usize,
}

/// Scores a pair of test images; higher means "same identity".
pub trait PreparedScorer: Sync {
    fn score(&self, a: ImageRef, b: ImageRef) -> f64;
}

/// Builds a [`PreparedScorer`] for each repetition's split.
pub trait PairScorer: Sync {
    fn label(&self) -> String;

    fn prepare<'s>(&'s self, split: &Split) -> Result<Box<dyn PreparedScorer + 's>>;
}

/// Cosine similarity of standardized model representations.
pub struct RepresentationScorer<'a> {
    pub corpus: &'a Corpus,
    pub bank: &'a TemplateBank,
    pub spec: SignatureSpec,
    pub exec: Execution,
}

struct PreparedReps {
    /// Standardized representation per (test identity, view).
    reps: HashMap<usize, Vec<Vec<f64>>>,
}

impl PreparedScorer for PreparedReps {
    fn score(&self, a: ImageRef, b: ImageRef) -> f64 {
        let (x, y) = (&self.reps[&a.identity][a.view], &self.reps[&b.identity][b.view]);
        dot(x, y) / x.len() as f64
    }
}

impl RepresentationScorer<'_> {
    /// Representation of one encoded image under the bank's model.
    pub fn represent(&self, x: &[f64], templates: &[LearnedBasis]) -> Result<Vec<f64>> {
        match self.bank.model {
            Model::Raw => Ok(x.to_vec()),
            _ => Ok(signature(x, templates, &self.spec)?.values),
        }
    }
}

impl PairScorer for RepresentationScorer<'_> {
    fn label(&self) -> String {
        self.bank.model.label()
    }

    fn prepare<'s>(&'s self, split: &Split) -> Result<Box<dyn PreparedScorer + 's>> {
        let templates = self.bank.select(&split.templates);
        let per_identity = self.exec.try_map(&split.tests, |&t| {
            self.corpus.features[t]
                .iter()
                .map(|x| {
                    let r = self.represent(x, &templates)?;
                    Ok(standardize(&r).unwrap_or_else(|| vec![0.0; r.len()]))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        Ok(Box::new(PreparedReps {
            reps: split.tests.iter().copied().zip(per_identity).collect(),
        }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairMatchingConfig {
    pub n_templates: usize,
    pub n_tests: usize,
    pub repetitions: usize,
    /// Half-widths of the viewing range, degrees.
    pub radii: Vec<f64>,
    pub same_pairs: usize,
    pub different_pairs: usize,
    pub seed: u64,
}

impl Default for PairMatchingConfig {
    fn default() -> Self {
        PairMatchingConfig {
            n_templates: 20,
            n_tests: 20,
            repetitions: 5,
            radii: (1..=19).map(|i| 5.0 * i as f64).collect(),
            same_pairs: 300,
            different_pairs: 300,
            seed: 0,
        }
    }
}

/// `k` indices from `0..len`, without replacement until the pool is used
/// up, then starting over on a fresh permutation.
fn sample_cycling(rng: &mut ChaCha8Rng, len: usize, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let take = (k - out.len()).min(len);
        out.extend(index::sample(rng, len, take));
    }
    out
}

fn repetition_splits(n_identities: usize, cfg: &PairMatchingConfig) -> Result<Vec<Split>> {
    (0..cfg.repetitions)
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, rep as u64));
            Split::random(n_identities, cfg.n_templates, cfg.n_tests, &mut rng)
        })
        .collect()
}

/// Same/different verification AUC per viewing radius, averaged over
/// repetitions with random template/test splits.
pub fn pair_matching_experiment(
    n_identities: usize,
    angles: &[f64],
    cfg: &PairMatchingConfig,
    scorer: &dyn PairScorer,
    exec: Execution,
) -> Result<AucTable> {
    if cfg.repetitions == 0 {
        return invalid("at least one repetition is required");
    }
    let splits = repetition_splits(n_identities, cfg)?;
    pair_matching_with_splits(angles, &splits, cfg, scorer, exec)
}

/// As [`pair_matching_experiment`] with explicit splits (one per repetition).
pub fn pair_matching_with_splits(
    angles: &[f64],
    splits: &[Split],
    cfg: &PairMatchingConfig,
    scorer: &dyn PairScorer,
    exec: Execution,
) -> Result<AucTable> {
    if splits.is_empty() {
        return invalid("at least one split is required");
    }
    for s in splits {
        if let Some(i) = s.templates.iter().find(|i| s.tests.contains(i)) {
            return invalid(format!("identity {i} is both a template and a test identity"));
        }
        if s.tests.len() < 2 {
            return invalid("at least 2 test identities are required");
        }
    }
    if cfg.radii.is_empty() || cfg.radii.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("radii must be non-empty and strictly increasing");
    }
    if cfg.same_pairs == 0 || cfg.different_pairs == 0 {
        return invalid("pair counts must be positive");
    }
    let in_range: Vec<Vec<usize>> = cfg
        .radii
        .iter()
        .map(|r| (0..angles.len()).filter(|&i| angles[i].abs() <= r + 1e-9).collect())
        .collect();
    if let Some(j) = in_range.iter().position(|v| v.len() < 2) {
        return invalid(format!("radius {} holds fewer than 2 views", cfg.radii[j]));
    }
    let reps: Vec<usize> = (0..splits.len()).collect();
    let per_repetition = exec.try_map(&reps, |&rep| -> Result<Vec<f64>> {
        let split = &splits[rep];
        let prepared = scorer.prepare(split)?;
        let rep_seed = derive_seed(cfg.seed, rep as u64);
        in_range
            .iter()
            .enumerate()
            .map(|(j, views)| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rep_seed, j as u64 + 1));
                let (same, diff) = sample_pairs(&split.tests, views, cfg, &mut rng);
                let s: Vec<f64> = same.iter().map(|(a, b)| prepared.score(*a, *b)).collect();
                let d: Vec<f64> = diff.iter().map(|(a, b)| prepared.score(*a, *b)).collect();
                roc_auc(&s, &d)
            })
            .collect()
    })?;
    AucTable::from_repetitions(scorer.label(), cfg.radii.clone(), per_repetition)
}

type Pair = (ImageRef, ImageRef);

fn sample_pairs(tests: &[usize], views: &[usize], cfg: &PairMatchingConfig, rng: &mut ChaCha8Rng) -> (Vec<Pair>, Vec<Pair>) {
    let m = views.len();
    let mut same_pool = Vec::with_capacity(tests.len() * m * (m - 1) / 2);
    for &t in tests {
        for a in 0..m {
            for b in a + 1..m {
                same_pool.push((ImageRef { identity: t, view: views[a] }, ImageRef { identity: t, view: views[b] }));
            }
        }
    }
    let same = sample_cycling(rng, same_pool.len(), cfg.same_pairs)
        .into_iter()
        .map(|i| same_pool[i])
        .collect();
    let mut id_pairs = Vec::new();
    for (i, &a) in tests.iter().enumerate() {
        for &b in &tests[i + 1..] {
            id_pairs.push((a, b));
        }
    }
    // the different-identity pool is large; decode sampled indices instead of listing it
    let diff = sample_cycling(rng, id_pairs.len() * m * m, cfg.different_pairs)
        .into_iter()
        .map(|k| {
            let (a, b) = id_pairs[k / (m * m)];
            let rem = k % (m * m);
            (ImageRef { identity: a, view: views[rem / m] }, ImageRef { identity: b, view: views[rem % m] })
        })
        .collect();
    (same, diff)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimilarityConfig {
    /// Views included per test identity; must lie on the corpus grid.
    pub angles: Vec<f64>,
    pub n_templates: usize,
    pub n_tests: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            angles: vec![-90.0, -60.0, -30.0, 0.0, 30.0, 60.0, 90.0],
            n_templates: 20,
            n_tests: 20,
            repetitions: 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageMatrices {
    pub input: SimilarityMatrix,
    pub simple: SimilarityMatrix,
    pub pooled: SimilarityMatrix,
}

impl StageMatrices {
    pub fn get(&self, stage: Stage) -> &SimilarityMatrix {
        match stage {
            Stage::Input => &self.input,
            Stage::Simple => &self.simple,
            Stage::Pooled => &self.pooled,
        }
    }
}

/// Similarity matrices of the test population at the encoder, simple and
/// pooled stages, averaged over repetitions.
pub fn similarity_experiment(
    corpus: &Corpus,
    bank: &TemplateBank,
    spec: &SignatureSpec,
    cfg: &SimilarityConfig,
    exec: Execution,
) -> Result<StageMatrices> {
    if bank.model == Model::Raw {
        return invalid("similarity matrices need a template model, not raw");
    }
    if cfg.repetitions == 0 {
        return invalid("at least one repetition is required");
    }
    let views: Vec<usize> = cfg
        .angles
        .iter()
        .map(|a| {
            corpus
                .angles
                .iter()
                .position(|b| (a - b).abs() < 1e-9)
                .ok_or_else(|| crate::Error::InvalidArgument(format!("angle {a} is not on the corpus grid")))
        })
        .collect::<Result<_>>()?;
    let reps: Vec<usize> = (0..cfg.repetitions).collect();
    let per_rep = exec.try_map(&reps, |&rep| -> Result<[SimilarityMatrix; 3]> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, rep as u64));
        let split = Split::random(corpus.n_identities(), cfg.n_templates, cfg.n_tests, &mut rng)?;
        let templates = bank.select(&split.templates);
        let mut rows: [Vec<(RowLabel, Vec<f64>)>; 3] = Default::default();
        for &t in &split.tests {
            for &v in &views {
                let label = RowLabel {
                    identity: corpus.identity_id(t),
                    angle: corpus.angles[v],
                };
                let x = &corpus.features[t][v];
                let simple = simple_responses(x, &templates, spec)?;
                rows[0].push((label, x.clone()));
                rows[1].push((label, simple.flatten()));
                rows[2].push((label, signature(x, &templates, spec)?.values));
            }
        }
        Ok([
            similarity_matrix(Stage::Input, &rows[0])?,
            similarity_matrix(Stage::Simple, &rows[1])?,
            similarity_matrix(Stage::Pooled, &rows[2])?,
        ])
    })?;
    let stage = |k: usize| -> Result<SimilarityMatrix> {
        let mats: Vec<SimilarityMatrix> = per_rep.iter().map(|m| m[k].clone()).collect();
        SimilarityMatrix::average(&mats)
    };
    Ok(StageMatrices {
        input: stage(0)?,
        simple: stage(1)?,
        pooled: stage(2)?,
    })
}

/// Symmetry indices of ICA and PCA units trained on the same orbits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningContrast {
    pub ica_indices: Vec<f64>,
    pub pca_indices: Vec<f64>,
    pub ica_median: f64,
    pub pca_median: f64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// For each listed identity, learn ICA and PCA bases on its own orbit and
/// collect the symmetry index of every unit's tuning curve over that orbit.
pub fn ica_contrast(
    corpus: &Corpus,
    identities: &[usize],
    ica: &TrainOptions,
    spec: &SignatureSpec,
    exec: Execution,
) -> Result<TuningContrast> {
    if ica.rule != BasisRule::Ica {
        return invalid("ica_contrast needs ICA training options");
    }
    if identities.is_empty() {
        return invalid("no identities given");
    }
    let sigma = corpus.encoder.feature_reflection();
    let per = exec.try_map(identities, |&i| -> Result<(Vec<f64>, Vec<f64>)> {
        let data = corpus.unit_views(i);
        let probe: Vec<(f64, Vec<f64>)> = corpus
            .angles
            .iter()
            .copied()
            .zip(corpus.features[i].iter().cloned())
            .collect();
        let opts = TrainOptions {
            seed: derive_seed(ica.seed, i as u64),
            components: ica.components.min(data.len()),
            ..ica.clone()
        };
        let ica_basis = train_basis(corpus.identity_id(i), &data, &opts)?;
        let pca_basis = reflection_adapted_pca(&data, &sigma, &PcaOptions::default())?;
        let idx = |b: &LearnedBasis| -> Result<Vec<f64>> {
            basis_tuning_curves(b, &probe, spec)?
                .iter()
                .map(symmetry_index)
                .collect()
        };
        Ok((idx(&ica_basis)?, idx(&pca_basis)?))
    })?;
    let ica_indices: Vec<f64> = per.iter().flat_map(|p| p.0.clone()).collect();
    let pca_indices: Vec<f64> = per.iter().flat_map(|p| p.1.clone()).collect();
    Ok(TuningContrast {
        ica_median: median(&ica_indices),
        pca_median: median(&pca_indices),
        ica_indices,
        pca_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oracle;
    struct Perfect;
    impl PreparedScorer for Perfect {
        fn score(&self, a: ImageRef, b: ImageRef) -> f64 {
            if a.identity == b.identity { 1.0 } else { 0.0 }
        }
    }
    impl PairScorer for Oracle {
        fn label(&self) -> String {
            "oracle".into()
        }
        fn prepare<'s>(&'s self, _: &Split) -> Result<Box<dyn PreparedScorer + 's>> {
            Ok(Box::new(Perfect))
        }
    }

    struct Noise(u64);
    impl PreparedScorer for Noise {
        fn score(&self, a: ImageRef, b: ImageRef) -> f64 {
            let tag = ((a.identity * 1000 + a.view) * 1_000_000 + b.identity * 1000 + b.view) as u64;
            derive_seed(self.0, tag) as f64 / u64::MAX as f64
        }
    }
    struct RandomScorer(u64);
    impl PairScorer for RandomScorer {
        fn label(&self) -> String {
            "random".into()
        }
        fn prepare<'s>(&'s self, _: &Split) -> Result<Box<dyn PreparedScorer + 's>> {
            Ok(Box::new(Noise(self.0)))
        }
    }

    fn grid() -> Vec<f64> {
        (0..39).map(|i| -95.0 + 5.0 * i as f64).collect()
    }

    #[test]
    fn perfect_scorer_gives_unit_auc() {
        let t = pair_matching_experiment(40, &grid(), &PairMatchingConfig::default(), &Oracle, Execution::Parallel).unwrap();
        assert_eq!(t.radii.len(), 19);
        assert!(t.auc_mean.iter().all(|a| *a == 1.0));
        assert_eq!(t.repetitions, 5);
    }

    #[test]
    fn random_scorer_is_near_chance() {
        let t = pair_matching_experiment(40, &grid(), &PairMatchingConfig::default(), &RandomScorer(11), Execution::Parallel).unwrap();
        assert!(t.auc_mean.iter().all(|a| (a - 0.5).abs() <= 0.07));
    }

    #[test]
    fn modes_agree_and_runs_repeat() {
        let cfg = PairMatchingConfig { repetitions: 2, ..PairMatchingConfig::default() };
        let a = pair_matching_experiment(40, &grid(), &cfg, &RandomScorer(1), Execution::Sequential).unwrap();
        let b = pair_matching_experiment(40, &grid(), &cfg, &RandomScorer(1), Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_errors() {
        assert!(Split::new(vec![0, 1], vec![1, 2], 5).is_err());
        assert!(Split::new(vec![0], vec![1, 9], 5).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(Split::random(30, 20, 20, &mut rng).is_err());
        let s = Split::random(40, 20, 20, &mut rng).unwrap();
        assert!(s.templates.iter().all(|t| !s.tests.contains(t)));
        let overlapping = vec![Split { templates: vec![0, 1], tests: vec![1, 2] }];
        let err = pair_matching_with_splits(&grid(), &overlapping, &PairMatchingConfig::default(), &Oracle, Execution::Sequential);
        assert!(err.is_err());
    }

    #[test]
    fn cycling_sampler_covers_small_pools() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_cycling(&mut rng, 4, 10);
        assert_eq!(s.len(), 10);
        let mut first: Vec<usize> = s[..4].to_vec();
        first.sort();
        assert_eq!(first, vec![0, 1, 2, 3]);
    }

    #[test]
    fn median_values() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}

//! Train a per-identity basis from the encoded views of one orbit.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pca::{batch_pca, PcaOptions};
use super::rules::{LearningRate, Rule, RuleState};
use super::whitening::zca_whiten;
use super::{BasisRule, LearnedBasis};
use crate::error::{invalid, Error, Result};
use crate::linalg::{canonical_sign, dot, norm};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOptions {
    pub rule: BasisRule,
    /// Number of units `r` (ignored for view-based bases).
    pub components: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Base schedule; the initial rate is divided by the mean squared input
    /// norm so the same defaults work for any feature scale.
    #[serde(default)]
    pub learning_rate: LearningRate,
    #[serde(default = "default_trace_decay")]
    pub trace_decay: f64,
    /// Unit-norm rows after each Hebb/Foldiak step.
    #[serde(default = "default_true")]
    pub renormalize: bool,
    /// ICA whitening: drop directions with variance below this fraction of the largest.
    #[serde(default = "default_rank_tolerance")]
    pub rank_tolerance: f64,
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

/// Any row norm beyond this aborts training.
pub const DIVERGENCE_NORM: f64 = 1e6;

impl TrainOptions {
    pub fn new(rule: BasisRule, components: usize) -> Self {
        TrainOptions {
            rule,
            components,
            epochs: 200,
            seed: 0,
            learning_rate: LearningRate::default(),
            trace_decay: default_trace_decay(),
            renormalize: true,
            rank_tolerance: default_rank_tolerance(),
        }
    }

    pub fn epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Templates are the encoded views, verbatim.
pub fn view_based_basis<T: AsRef<[f64]>>(identity_id: u64, views: &[T]) -> Result<LearnedBasis> {
    if views.is_empty() {
        return invalid("view-based basis needs at least one view");
    }
    let basis = LearnedBasis {
        identity_id,
        rule: BasisRule::ViewBased,
        vectors: views.iter().map(|v| v.as_ref().to_vec()).collect(),
        eigenvalues: None,
        whitening: None,
    };
    basis.validate()?;
    Ok(basis)
}

fn mean_sq_norm(data: &[Vec<f64>]) -> f64 {
    data.iter().map(|x| dot(x, x)).sum::<f64>() / data.len() as f64
}

fn run_online(
    data: &[Vec<f64>],
    mut state: RuleState,
    opts: &TrainOptions,
    shuffle: bool,
) -> Result<RuleState> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x005e_ed0f_0a11);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..opts.epochs {
        if shuffle {
            order.shuffle(&mut rng);
        } else {
            state.reset_trace();
        }
        for &i in &order {
            state.step(&data[i])?;
            if let Some(r) = state.weights.iter().position(|w| !(norm(w) <= DIVERGENCE_NORM)) {
                return Err(Error::NumericOverflow {
                    step: state.step_count,
                    detail: format!("unit {r} norm exceeded {DIVERGENCE_NORM:e}"),
                });
            }
        }
    }
    Ok(state)
}

/// Train `opts.rule` on one orbit's features (in angular order).
///
/// Online rules see the data shuffled each epoch, except Foldiak, which is
/// fed in angular order with its trace reset at the start of every sweep.
/// `Oja` with more than one unit uses the Sanger deflation so that the units
/// settle on distinct eigenvectors.
pub fn train_basis<T: AsRef<[f64]>>(
    identity_id: u64,
    features: &[T],
    opts: &TrainOptions,
) -> Result<LearnedBasis> {
    if features.is_empty() {
        return invalid("training needs at least one sample");
    }
    let data: Vec<Vec<f64>> = features.iter().map(|f| f.as_ref().to_vec()).collect();
    let d = data[0].len();
    if d == 0 || data.iter().any(|x| x.len() != d) {
        return invalid("training samples must share a non-zero dimension");
    }
    let r = opts.components;
    if opts.rule != BasisRule::ViewBased && (r == 0 || r > d.min(data.len())) {
        return invalid(format!(
            "components must be in 1..={} (min of dimension {d} and sample count {}), got {r}",
            d.min(data.len()),
            data.len()
        ));
    }

    let basis = match opts.rule {
        BasisRule::ViewBased => return view_based_basis(identity_id, &data),
        BasisRule::Pca => {
            let pca_opts = PcaOptions {
                components: Some(r),
                ..PcaOptions::default()
            };
            batch_pca(&data, &pca_opts)?.0
        }
        BasisRule::Ica => train_ica(&data, opts)?,
        other => {
            let rule = other.online_rule().expect("online rule");
            let stepping = if rule == Rule::Oja && r > 1 { Rule::Sanger } else { rule };
            let scale = mean_sq_norm(&data);
            if !(scale > 0.0) {
                return Err(Error::DegenerateData("all training inputs are zero".into()));
            }
            let lr = LearningRate {
                initial: opts.learning_rate.initial / scale,
                tau: opts.learning_rate.tau,
            };
            let mut state = RuleState::random(stepping, r, d, opts.seed, lr)?
                .with_trace_decay(opts.trace_decay)?
                .with_renormalize(opts.renormalize);
            state = run_online(&data, state, opts, rule != Rule::Foldiak)?;
            let mut vectors = state.weights;
            if matches!(rule, Rule::Oja | Rule::Sanger) {
                vectors.iter_mut().for_each(|v| canonical_sign(v));
            }
            LearnedBasis {
                identity_id,
                rule: other,
                vectors,
                eigenvalues: None,
                whitening: None,
            }
        }
    };
    Ok(basis.with_identity(identity_id))
}

/// ZCA-whiten, run the deflated kurtosis rule in the retained eigen-coordinates,
/// and express the components in the whitened feature space.
fn train_ica(data: &[Vec<f64>], opts: &TrainOptions) -> Result<LearnedBasis> {
    let (white, _) = zca_whiten(data, opts.rank_tolerance)?;
    let reduced: Vec<Vec<f64>> = data.iter().map(|x| white.reduce(x)).collect();
    let k = white.rank();
    let r = opts.components.min(k);
    let scale = mean_sq_norm(&reduced);
    let lr = LearningRate {
        initial: opts.learning_rate.initial / scale,
        tau: opts.learning_rate.tau,
    };
    let mut state = RuleState::random(Rule::Ica, r, k, opts.seed, lr)?;
    // orthonormal start
    for i in 0..r {
        let (done, rest) = state.weights.split_at_mut(i);
        for p in done.iter() {
            let c = dot(&rest[0], p);
            crate::linalg::axpy(-c, p, &mut rest[0]);
        }
        crate::linalg::normalize(&mut rest[0]);
    }
    let state = run_online(&reduced, state, opts, true)?;
    let vectors = state.weights.iter().map(|w| white.lift(w)).collect();
    Ok(LearnedBasis {
        identity_id: 0,
        rule: BasisRule::Ica,
        vectors,
        eigenvalues: None,
        whitening: Some(white),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cosine;
    use rand::Rng;
    use rand_distr::{Distribution, Exp, StandardNormal};

    fn gaussian_cloud(seed: u64, n: usize, scales: &[f64]) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                scales
                    .iter()
                    .map(|s| s * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn oja_single_unit_finds_top_eigenvector() {
        let data = gaussian_cloud(1, 200, &[3.0, 1.0, 0.5, 0.2]);
        let (pca, _) = batch_pca(&data, &PcaOptions::default()).unwrap();
        let b = train_basis(0, &data, &TrainOptions::new(BasisRule::Oja, 1).epochs(100)).unwrap();
        assert!(cosine(&b.vectors[0], &pca.vectors[0]).abs() >= 0.99);
    }

    #[test]
    fn sanger_rows_align_with_batch_eigenvectors() {
        let data = gaussian_cloud(2, 300, &[2.0, 0.7]);
        let (pca, _) = batch_pca(&data, &PcaOptions::default()).unwrap();
        let b = train_basis(0, &data, &TrainOptions::new(BasisRule::Sanger, 2).epochs(200)).unwrap();
        for k in 0..2 {
            let c = cosine(&b.vectors[k], &pca.vectors[k]).abs();
            assert!(c >= 0.99, "unit {k}: |cos| = {c}");
        }
    }

    #[test]
    fn view_based_is_verbatim() {
        let data = gaussian_cloud(3, 39, &[1.0; 5]);
        let b = train_basis(7, &data, &TrainOptions::new(BasisRule::ViewBased, 0)).unwrap();
        assert_eq!(b.vectors, data);
        assert_eq!(b.identity_id, 7);
    }

    #[test]
    fn components_bounds() {
        let data = gaussian_cloud(4, 5, &[1.0; 3]);
        assert!(train_basis(0, &data, &TrainOptions::new(BasisRule::Oja, 4)).is_err());
        assert!(train_basis(0, &data, &TrainOptions::new(BasisRule::Oja, 0)).is_err());
    }

    #[test]
    fn unnormalized_hebb_reports_divergence_step() {
        let data = gaussian_cloud(5, 20, &[5.0, 5.0]);
        let mut opts = TrainOptions::new(BasisRule::Hebb, 1);
        opts.renormalize = false;
        opts.learning_rate = LearningRate::constant(1.0);
        match train_basis(0, &data, &opts) {
            Err(Error::NumericOverflow { step, .. }) => assert!(step > 0),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    /// Grid search over the unit circle for the direction of maximal
    /// fourth moment of whitened 2D data.
    fn kurtosis_oracle(z: &[Vec<f64>]) -> [f64; 2] {
        let mut best = (f64::NEG_INFINITY, [1.0, 0.0]);
        for k in 0..3600 {
            let t = k as f64 * std::f64::consts::PI / 3600.0;
            let w = [t.cos(), t.sin()];
            let m4 = z.iter().map(|x| (x[0] * w[0] + x[1] * w[1]).powi(4)).sum::<f64>();
            if m4 > best.0 {
                best = (m4, w);
            }
        }
        best.1
    }

    #[test]
    fn ica_recovers_kurtotic_source() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let exp = Exp::new(1.0).unwrap();
        let n = 2000;
        // Laplace source and a uniform source, linearly mixed
        let data: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let s1: f64 = sign * exp.sample(&mut rng);
                let s2: f64 = rng.random_range(-1.7..1.7);
                vec![0.8 * s1 + 0.6 * s2, -0.3 * s1 + 1.1 * s2]
            })
            .collect();
        let mut opts = TrainOptions::new(BasisRule::Ica, 1).epochs(30).seed(3);
        opts.learning_rate = LearningRate { initial: 0.02, tau: 2000.0 };
        let b = train_basis(0, &data, &opts).unwrap();
        let white = b.whitening.as_ref().unwrap();
        let z: Vec<Vec<f64>> = data.iter().map(|x| white.reduce(x)).collect();
        let oracle = kurtosis_oracle(&z);
        // compare in reduced coordinates
        let learned: Vec<f64> = white.basis.iter().map(|e| dot(e, &b.vectors[0])).collect();
        let c = cosine(&learned, &oracle).abs();
        assert!(c >= 0.95, "|cos| = {c}");
    }
}

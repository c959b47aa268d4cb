//! The property suite run by `verify`: exact symmetry identities, parity,
//! equivariance and convergence checks on a small self-generated corpus.

use serde::{Deserialize, Serialize};

use super::corpus::{Corpus, StimulusSpec};
use super::equivariance::{equivariance_residual, random_samples, OffsetField};
use super::invariance::invariance_profile;
use super::parity::{spectrum_parity, Parity};
use super::tuning::{basis_tuning_curves, mirror_asymmetry, symmetry_index};
use crate::encoder::{EncoderKind, EncoderSpec, FeatureReflection};
use crate::error::Result;
use crate::exec::Execution;
use crate::learning::{batch_pca, reflection_adapted_pca, train_basis, view_based_basis, BasisRule, LearnedBasis, PcaOptions, Rule, TrainOptions};
use crate::linalg::{dot, max_abs_diff, norm};
use crate::signature::{signature, Nonlinearity, SignatureSpec};
use crate::stimuli::{reflect_image, Projection};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    /// Reported but does not fail the run.
    Warning,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// Passes when `value <= threshold`.
    AtMost,
    /// Passes when `value > threshold`.
    Above,
    /// Passes when `value < threshold`.
    Below,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub comparison: Comparison,
    pub passed: bool,
    pub severity: Severity,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, threshold: f64, comparison: Comparison) -> Check {
        let passed = match comparison {
            Comparison::AtMost => value <= threshold,
            Comparison::Above => value > threshold,
            Comparison::Below => value < threshold,
        };
        Check {
            name: name.into(),
            value,
            threshold,
            comparison,
            passed,
            severity: Severity::Error,
            detail: String::new(),
        }
    }

    pub fn warning(mut self) -> Check {
        self.severity = Severity::Warning;
        self
    }

    pub fn detail(mut self, d: impl Into<String>) -> Check {
        self.detail = d.into();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityRow {
    pub encoder: String,
    pub identity: u64,
    pub component: usize,
    pub eigenvalue: f64,
    /// `None` when the eigenvalue is too close to a neighbour to label.
    pub parity: Option<Parity>,
    pub residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub model: String,
    pub identity: u64,
    pub center: f64,
    pub relative_range: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub checks: Vec<Check>,
    pub parity: Vec<ParityRow>,
    pub invariance: Vec<ProfileRow>,
}

impl PropertyReport {
    /// True when every error-severity check passed.
    pub fn all_passed(&self) -> bool {
        self.failures().is_empty()
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks
            .iter()
            .filter(|c| !c.passed && c.severity == Severity::Error)
            .collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    pub n_orbits: usize,
    pub equivariance_samples: usize,
    pub oja_max_steps: usize,
    /// Orbits whose top two eigenvalues are closer than this ratio are skipped.
    pub oja_eigengap_ratio: f64,
    pub trace_decay: f64,
    /// Half-width of the invariance-profile windows, degrees.
    pub invariance_window: f64,
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec {
            n_orbits: 5,
            equivariance_samples: 100,
            oja_max_steps: 200_000,
            oja_eigengap_ratio: 1.1,
            trace_decay: 0.2,
            invariance_window: 30.0,
        }
    }
}

pub const EIGENGAP_TOL: f64 = 1e-6;
pub const PARITY_TOL: f64 = 1e-6;
pub const COMMUTATOR_TOL: f64 = 1e-9;
pub const EXACT_TOL: f64 = 1e-10;
pub const TUNING_TOL: f64 = 1e-9;

fn encoder_name(spec: &EncoderSpec) -> &'static str {
    match spec.kind {
        EncoderKind::Raw => "raw",
        EncoderKind::C1 => "c1",
    }
}

/// Largest deviation of a rendered orbit from its own mirror image.
pub fn mirror_identity_residual(corpus: &Corpus) -> f64 {
    let Some(mirror) = corpus.mirror_view() else {
        return f64::INFINITY;
    };
    corpus
        .orbits
        .iter()
        .flat_map(|o| {
            mirror
                .iter()
                .enumerate()
                .map(move |(i, &j)| max_abs_diff(&o.views[i].pixels, &reflect_image(&o.views[j]).pixels))
        })
        .fold(0.0, f64::max)
}

/// Largest `|encode(reflect(img)) - sigma encode(img)|` over the corpus.
pub fn encoder_commutation_residual(corpus: &Corpus) -> Result<f64> {
    let sigma = corpus.encoder.feature_reflection();
    let mut worst = 0.0f64;
    for (o, feats) in corpus.orbits.iter().zip(&corpus.features) {
        for (v, x) in o.views.iter().zip(feats) {
            let r = corpus.encoder.encode(&reflect_image(v))?;
            worst = worst.max(max_abs_diff(&r.values, &sigma.apply(x)));
        }
    }
    Ok(worst)
}

/// Largest `|signature(sigma x) - signature(x)|` over every corpus image.
pub fn signature_reflection_residual(
    corpus: &Corpus,
    templates: &[LearnedBasis],
    spec: &SignatureSpec,
    exec: Execution,
) -> Result<f64> {
    let sigma = corpus.encoder.feature_reflection();
    let per = exec.try_map(&corpus.features, |feats| -> Result<f64> {
        let mut worst = 0.0f64;
        for x in feats {
            let a = signature(x, templates, spec)?;
            let b = signature(&sigma.apply(x), templates, spec)?;
            worst = worst.max(max_abs_diff(&a.values, &b.values));
        }
        Ok(worst)
    })?;
    Ok(per.into_iter().fold(0.0, f64::max))
}

/// Oja single-unit training against the batch top eigenvector on every orbit
/// with a clear leading eigenvalue. Returns `(worst 1 - |cos|, orbits tested)`.
pub fn oja_alignment(corpus: &Corpus, vs: &VerifySpec, seed: u64, exec: Execution) -> Result<(f64, usize)> {
    let ids: Vec<usize> = (0..corpus.n_identities()).collect();
    let per = exec.try_map(&ids, |&i| -> Result<Option<f64>> {
        let data = corpus.unit_views(i);
        let (pca, _) = batch_pca(&data, &PcaOptions::default())?;
        let ev = pca.eigenvalues.as_deref().unwrap_or(&[]);
        if ev.len() < 2 || ev[0] < vs.oja_eigengap_ratio * ev[1] {
            return Ok(None);
        }
        let epochs = (vs.oja_max_steps / data.len()).max(1);
        let opts = TrainOptions::new(BasisRule::Oja, 1)
            .epochs(epochs)
            .seed(super::corpus::derive_seed(seed, i as u64));
        let w = &train_basis(0, &data, &opts)?.vectors[0];
        let cos = dot(w, &pca.vectors[0]).abs() / (norm(w) * norm(&pca.vectors[0]));
        Ok(Some(1.0 - cos))
    })?;
    let tested: Vec<f64> = per.into_iter().flatten().collect();
    Ok((tested.iter().copied().fold(0.0, f64::max), tested.len()))
}

fn probe(corpus: &Corpus, i: usize) -> Vec<(f64, Vec<f64>)> {
    corpus.angles.iter().copied().zip(corpus.features[i].iter().cloned()).collect()
}

/// Symmetry indices of every PC unit of each orbit, probed on the same
/// orbit: `(worst |1 - index| and asymmetry with square, lowest index with identity)`.
pub fn pca_tuning_symmetry(corpus: &Corpus, spec: &SignatureSpec) -> Result<(f64, f64, f64)> {
    let (mut worst_index, mut worst_asym, mut lowest_linear) = (0.0f64, 0.0f64, 1.0f64);
    let square = SignatureSpec {
        nonlinearity: Nonlinearity::Square,
        ..*spec
    };
    let linear = SignatureSpec {
        nonlinearity: Nonlinearity::Identity,
        ..*spec
    };
    let sigma = corpus.encoder.feature_reflection();
    for i in 0..corpus.n_identities() {
        let basis = reflection_adapted_pca(&corpus.unit_views(i), &sigma, &PcaOptions::default())?;
        let p = probe(corpus, i);
        for c in basis_tuning_curves(&basis, &p, &square)? {
            worst_index = worst_index.max((1.0 - symmetry_index(&c)?).abs());
            worst_asym = worst_asym.max(mirror_asymmetry(&c)?);
        }
        for c in basis_tuning_curves(&basis, &p, &linear)? {
            lowest_linear = lowest_linear.min(symmetry_index(&c)?);
        }
    }
    Ok((worst_index, worst_asym, lowest_linear))
}

/// Run the full property suite on `vs.n_orbits` identities.
pub fn verify(
    stimuli: &StimulusSpec,
    encoder: &EncoderSpec,
    spec: &SignatureSpec,
    vs: &VerifySpec,
    seed: u64,
    exec: Execution,
) -> Result<PropertyReport> {
    let small = StimulusSpec {
        n_identities: vs.n_orbits.max(1),
        ..stimuli.clone()
    };
    let mut encoders = vec![EncoderSpec::raw()];
    if encoder.kind != EncoderKind::Raw {
        encoders.push(encoder.clone());
    }
    let mut report = PropertyReport::default();
    let perspective = matches!(small.render.projection, Projection::Perspective { .. });

    for (e, enc) in encoders.iter().enumerate() {
        let name = encoder_name(enc);
        let corpus = Corpus::build(&small, enc, seed, exec)?;
        let sigma = corpus.encoder.feature_reflection();

        if e == 0 {
            let c = Check::new("mirror_identity", mirror_identity_residual(&corpus), 1e-12, Comparison::AtMost);
            report.checks.push(if perspective {
                c.warning().detail("perspective projection: checked as approximate")
            } else {
                c
            });
        }
        report.checks.push(Check::new(
            format!("encoder_commutation/{name}"),
            encoder_commutation_residual(&corpus)?,
            EXACT_TOL,
            Comparison::AtMost,
        ));

        let (mut comm, mut resid, mut leak, mut gapped, mut labelled) = (0.0f64, 0.0f64, 0.0f64, 0, 0);
        for i in 0..corpus.n_identities() {
            let (basis, cov) = batch_pca(&corpus.features[i], &PcaOptions::default())?;
            let sp = spectrum_parity(&basis, &cov, &sigma, EIGENGAP_TOL, PARITY_TOL)?;
            comm = comm.max(sp.relative_commutator);
            resid = resid.max(sp.worst_gapped_residual);
            leak = leak.max(sp.worst_subspace_leak);
            gapped += sp.n_gapped;
            labelled += sp.n_even + sp.n_odd;
            let ev = basis.eigenvalues.clone().unwrap_or_default();
            for (k, label) in sp.labels.iter().enumerate() {
                report.parity.push(ParityRow {
                    encoder: name.into(),
                    identity: corpus.identity_id(i),
                    component: k,
                    eigenvalue: ev[k],
                    parity: label.map(|l| l.parity),
                    residual: label.map(|l| l.residual),
                });
            }
        }
        report.checks.push(Check::new(format!("covariance_commutator/{name}"), comm, COMMUTATOR_TOL, Comparison::AtMost));
        report.checks.push(
            Check::new(format!("eigenvector_parity/{name}"), resid, PARITY_TOL, Comparison::AtMost)
                .detail(format!("{labelled} of {gapped} gapped eigenvectors even or odd")),
        );
        report.checks.push(Check::new(
            format!("degenerate_subspace_invariance/{name}"),
            leak,
            PARITY_TOL,
            Comparison::AtMost,
        ));

        let (oja, tested) = oja_alignment(&corpus, vs, seed, exec)?;
        report.checks.push(
            Check::new(format!("oja_vs_batch/{name}"), oja, 0.01, Comparison::AtMost)
                .detail(format!("{tested} orbits with eigenvalue ratio >= {}", vs.oja_eigengap_ratio)),
        );

        let even = |nl: Nonlinearity| SignatureSpec { nonlinearity: nl, ..*spec };
        let view_bases = (0..corpus.n_identities())
            .map(|i| view_based_basis(corpus.identity_id(i), &corpus.unit_views(i)))
            .collect::<Result<Vec<_>>>()?;
        let pca_bases = (0..corpus.n_identities())
            .map(|i| reflection_adapted_pca(&corpus.unit_views(i), &sigma, &PcaOptions::default()))
            .collect::<Result<Vec<_>>>()?;
        for nl in [Nonlinearity::Square, Nonlinearity::Abs] {
            for (model, bases) in [("view_based", &view_bases), ("pca", &pca_bases)] {
                let r = signature_reflection_residual(&corpus, bases, &even(nl), exec)?;
                report.checks.push(Check::new(
                    format!("signature_reflection/{name}/{model}/{}", nl_name(nl)),
                    r,
                    EXACT_TOL,
                    Comparison::AtMost,
                ));
            }
        }

        let (idx, asym, lowest) = pca_tuning_symmetry(&corpus, spec)?;
        report.checks.push(Check::new(format!("tuning_symmetry_index/{name}"), idx, TUNING_TOL, Comparison::AtMost));
        report.checks.push(Check::new(format!("tuning_mirror_asymmetry/{name}"), asym, TUNING_TOL, Comparison::AtMost));
        report.checks.push(
            Check::new(format!("tuning_odd_linear_control/{name}"), 1.0 + lowest, 0.01, Comparison::AtMost)
                .detail("1 + lowest symmetry index with a linear response"),
        );

        if e + 1 == encoders.len() {
            equivariance_checks(&mut report, &sigma, vs);
            let ratio = invariance_rows(&mut report, &corpus, &pca_bases, spec, vs)?;
            report.checks.push(
                Check::new(format!("invariance_profile/{name}"), ratio, 1.0, Comparison::Below)
                    .detail(format!("largest PCA-signature to encoder range ratio in +-{} deg windows", vs.invariance_window)),
            );
        }
    }
    Ok(report)
}

fn nl_name(nl: Nonlinearity) -> &'static str {
    match nl {
        Nonlinearity::Square => "square",
        Nonlinearity::Abs => "abs",
        Nonlinearity::HalfWave => "half_wave",
        Nonlinearity::Identity => "identity",
    }
}

fn equivariance_checks(report: &mut PropertyReport, sigma: &FeatureReflection, vs: &VerifySpec) {
    let samples = random_samples(sigma.dim(), vs.equivariance_samples, vs.trace_decay, 0xe9);
    for rule in Rule::ALL {
        report.checks.push(Check::new(
            format!("equivariance/{}", rule.name()),
            equivariance_residual(&rule, sigma, &samples),
            EXACT_TOL,
            Comparison::AtMost,
        ));
    }
    let control = OffsetField::lopsided(sigma.dim(), (sigma.dim() as f64).sqrt());
    report.checks.push(
        Check::new("equivariance/offset_control", equivariance_residual(&control, sigma, &samples), 0.1, Comparison::Above)
            .detail("negative control: must exceed the threshold"),
    );
}

/// Encoder output against PCA signatures (other orbits as templates) in
/// sliding windows. Returns the largest signature / encoder range ratio.
fn invariance_rows(
    report: &mut PropertyReport,
    corpus: &Corpus,
    pca_bases: &[LearnedBasis],
    spec: &SignatureSpec,
    vs: &VerifySpec,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for i in 0..corpus.n_identities() {
        let templates: Vec<LearnedBasis> = pca_bases
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != i)
            .map(|(_, b)| b.clone())
            .collect();
        if templates.is_empty() {
            continue;
        }
        let raw = probe(corpus, i);
        let sig = raw
            .iter()
            .map(|(a, x)| Ok((*a, signature(x, &templates, spec)?.values)))
            .collect::<Result<Vec<_>>>()?;
        let base = invariance_profile(&raw, vs.invariance_window)?;
        let pooled = invariance_profile(&sig, vs.invariance_window)?;
        for (b, p) in base.iter().zip(&pooled) {
            worst = worst.max(p.relative_range / b.relative_range);
        }
        for (model, profile) in [("encoder", base), ("pca_signature", pooled)] {
            for w in profile {
                report.invariance.push(ProfileRow {
                    model: model.into(),
                    identity: corpus.identity_id(i),
                    center: w.center,
                    relative_range: w.relative_range,
                });
            }
        }
    }
    Ok(worst)
}

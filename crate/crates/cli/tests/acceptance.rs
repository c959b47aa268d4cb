//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on failure.
//!
//! Quantities are recomputed here from first principles where that is cheap
//! (symmetry indices, commutators, parities, cosines, correlation classes);
//! the library supplies corpora, bases and the experiment drivers.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use serde_json::Value;

use viewsym::analysis::equivariance::random_samples;
use viewsym::analysis::{
    ica_contrast, pair_matching_experiment, similarity_experiment, Corpus, Model, PairMatchingConfig,
    RepresentationScorer, SimilarityConfig, SimilarityMatrix, StimulusSpec, TemplateBank,
};
use viewsym::encoder::{EncoderSpec, FeatureReflection};
use viewsym::learning::{batch_pca, train_basis, vector_field, BasisRule, FieldAux, LearnedBasis, PcaOptions, Rule, TrainOptions};
use viewsym::signature::{signature, Nonlinearity, SignatureSpec};
use viewsym::Execution;

const EXEC: Execution = Execution::Parallel;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Index permutation of a reflection: `sigma(x)_i = x_{perm[i]}`.
fn permutation(sigma: &FeatureReflection) -> Vec<usize> {
    let idx: Vec<f64> = (0..sigma.dim()).map(|i| i as f64).collect();
    sigma.apply(&idx).into_iter().map(|v| v as usize).collect()
}

fn reflect(perm: &[usize], v: &[f64]) -> Vec<f64> {
    perm.iter().map(|&j| v[j]).collect()
}

fn zscore(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
    x.iter().map(|v| (v - m) / sd).collect()
}

/// Even-energy minus odd-energy fraction of a curve on a grid symmetric about 0.
fn symmetry_index(angles: &[f64], f: &[f64]) -> f64 {
    let (mut even, mut odd) = (0.0, 0.0);
    for (i, a) in angles.iter().enumerate() {
        let j = angles.iter().position(|b| (a + b).abs() < 1e-9).expect("symmetric grid");
        let e = 0.5 * (f[i] + f[j]);
        let o = 0.5 * (f[i] - f[j]);
        even += e * e;
        odd += o * o;
    }
    if even + odd == 0.0 {
        1.0
    } else {
        (even - odd) / (even + odd)
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn desk_spec(n: usize) -> StimulusSpec {
    StimulusSpec {
        n_identities: n,
        ..StimulusSpec::default()
    }
}

fn criterion_1() -> Outcome {
    let mut worst_comm = 0.0f64;
    let mut worst_res = 0.0f64;
    let (mut labelled, mut orbits) = (0usize, 0usize);
    for enc in [EncoderSpec::raw(), EncoderSpec::c1()] {
        let corpus = Corpus::build(&desk_spec(5), &enc, 0, EXEC).unwrap();
        let perm = permutation(&corpus.encoder.feature_reflection());
        for feats in &corpus.features {
            orbits += 1;
            let opts = PcaOptions {
                center: true,
                ..PcaOptions::default()
            };
            let (basis, cov) = batch_pca(feats, &opts).unwrap();
            let c = &cov.matrix;
            let d = c.nrows();
            let (mut diff, mut total) = (0.0, 0.0);
            for i in 0..d {
                for j in 0..d {
                    // (sigma C)_ij = C_{p(i) j}, (C sigma)_ij = C_{i p(j)}
                    let e = c[(perm[i], j)] - c[(i, perm[j])];
                    diff += e * e;
                    total += c[(i, j)] * c[(i, j)];
                }
            }
            worst_comm = worst_comm.max((diff / total).sqrt());
            let ev = basis.eigenvalues.as_ref().unwrap();
            let top = ev[0];
            for (k, v) in basis.vectors.iter().enumerate() {
                let below = if k + 1 < ev.len() { ev[k + 1] } else { 0.0 };
                let above = if k > 0 { ev[k - 1] } else { f64::INFINITY };
                let gap = (ev[k] - below).min(above - ev[k]) / top;
                if gap <= 1e-6 {
                    continue;
                }
                let s = reflect(&perm, v);
                let even: Vec<f64> = v.iter().zip(&s).map(|(a, b)| a - b).collect();
                let odd: Vec<f64> = v.iter().zip(&s).map(|(a, b)| a + b).collect();
                worst_res = worst_res.max(norm(&even).min(norm(&odd)) / norm(v));
                labelled += 1;
            }
        }
    }
    outcome(
        worst_comm <= 1e-9 && worst_res <= 1e-6 && labelled > 0,
        format!("{orbits} orbits, {labelled} gapped eigenvectors, worst parity residual {worst_res:.1e}, commutator {worst_comm:.1e}"),
    )
}

fn criterion_2(corpus: &Corpus, pca: &TemplateBank) -> Outcome {
    let (mut worst_asym, mut worst_index) = (0.0f64, 0.0f64);
    let mut lowest_linear = f64::INFINITY;
    let mut units = 0;
    for (i, basis) in pca.bases.iter().enumerate() {
        let z: Vec<Vec<f64>> = corpus.features[i].iter().map(|x| zscore(x)).collect();
        for w in &basis.vectors {
            let lin: Vec<f64> = z.iter().map(|x| dot(x, w)).collect();
            let sq: Vec<f64> = lin.iter().map(|v| v * v).collect();
            let peak = sq.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, fa) in corpus.angles.iter().zip(&sq) {
                let j = corpus.angles.iter().position(|b| (a + b).abs() < 1e-9).unwrap();
                worst_asym = worst_asym.max((fa - sq[j]).abs() / peak);
            }
            worst_index = worst_index.max((1.0 - symmetry_index(&corpus.angles, &sq)).abs());
            lowest_linear = lowest_linear.min(symmetry_index(&corpus.angles, &lin));
            units += 1;
        }
    }
    outcome(
        worst_asym <= 1e-9 && worst_index <= 1e-9 && lowest_linear <= -0.99,
        format!("{units} PC units: asymmetry {worst_asym:.1e}, |1 - index| {worst_index:.1e}; linear control min index {lowest_linear:.4}"),
    )
}

fn criterion_3() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 0..4u64 {
        let corpus = Corpus::build(&desk_spec(5), &EncoderSpec::c1(), seed, EXEC).unwrap();
        let mut opts = TrainOptions::new(BasisRule::Ica, 39);
        opts.seed = seed;
        let ids: Vec<usize> = (0..5).collect();
        let c = ica_contrast(&corpus, &ids, &opts, &SignatureSpec::default(), EXEC).unwrap();
        // medians recomputed from the per-unit indices
        let (ica, pca) = (median(&c.ica_indices), median(&c.pca_indices));
        ok &= ica < 0.9 && pca >= 0.999;
        lines.push(format!("seed {seed}: ica {ica:.3} pca {pca:.4}"));
    }
    outcome(ok, lines.join("; "))
}

type Field<'a> = dyn Fn(&[f64], &[f64], &FieldAux) -> Vec<f64> + 'a;

fn criterion_4() -> Outcome {
    let corpus = Corpus::build(&desk_spec(1), &EncoderSpec::c1(), 0, EXEC).unwrap();
    let perm = permutation(&corpus.encoder.feature_reflection());
    let samples = random_samples(perm.len(), 100, 0.2, 4);
    let residual = |f: &Field<'_>| -> f64 {
        samples
            .iter()
            .map(|s| {
                let sw = reflect(&perm, &s.w);
                let sx = reflect(&perm, &s.x);
                let mut aux_w = s.aux.clone();
                aux_w.preceding = s.aux.preceding.iter().map(|p| reflect(&perm, p)).collect();
                let mut aux_x = s.aux.clone();
                aux_x.history = s.aux.history.iter().map(|h| reflect(&perm, h)).collect();
                let lhs = f(&sw, &s.x, &aux_w);
                let inner = f(&s.w, &sx, &aux_x);
                let rhs = reflect(&perm, &inner);
                let d: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
                norm(&d) / (norm(&inner) + 1e-12)
            })
            .fold(0.0, f64::max)
    };
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for rule in Rule::ALL {
        let r = residual(&|w, x, aux| vector_field(rule, w, x, aux));
        worst = worst.max(r);
        parts.push(format!("{} {r:.1e}", rule.name()));
    }
    // negative control: adds a constant the reflection moves
    let mut offset = vec![0.0; perm.len()];
    offset[0] = (perm.len() as f64).sqrt();
    let control = residual(&|_w, x, _aux| x.iter().zip(&offset).map(|(a, c)| a + c).collect());
    outcome(
        worst <= 1e-10 && control > 0.1,
        format!("{}; control {control:.3}", parts.join(", ")),
    )
}

fn criterion_5(corpus: &Corpus) -> Outcome {
    let ids: Vec<usize> = (0..corpus.n_identities()).collect();
    let per = EXEC.map(&ids, |&i| {
        let data = corpus.unit_views(i);
        let (pca, _) = batch_pca(&data, &PcaOptions::default()).unwrap();
        let ev = pca.eigenvalues.as_ref().unwrap();
        if ev[0] < 1.1 * ev[1] {
            return None;
        }
        let opts = TrainOptions::new(BasisRule::Oja, 1).epochs(200_000 / data.len()).seed(i as u64);
        let w = &train_basis(0, &data, &opts).unwrap().vectors[0];
        Some(dot(w, &pca.vectors[0]).abs() / (norm(w) * norm(&pca.vectors[0])))
    });
    let cos: Vec<f64> = per.into_iter().flatten().collect();
    let worst = cos.iter().copied().fold(1.0, f64::min);
    outcome(
        !cos.is_empty() && worst >= 0.99,
        format!("{} of {} orbits with eigengap ratio >= 1.1, min |cos| {worst:.6}", cos.len(), ids.len()),
    )
}

fn criterion_6(corpus: &Corpus, vb: &TemplateBank, pca: &TemplateBank) -> Outcome {
    let cfg = PairMatchingConfig::default();
    let raw = TemplateBank {
        model: Model::Raw,
        bases: Vec::new(),
    };
    let tables: Vec<_> = [&raw, vb, pca]
        .iter()
        .map(|bank| {
            let scorer = RepresentationScorer {
                corpus,
                bank,
                spec: SignatureSpec::default(),
                exec: EXEC,
            };
            pair_matching_experiment(corpus.n_identities(), &corpus.angles, &cfg, &scorer, EXEC).unwrap()
        })
        .collect();
    let mut worst_rise = f64::NEG_INFINITY;
    for t in &tables {
        for w in t.auc_mean.windows(2) {
            worst_rise = worst_rise.max(w[1] - w[0]);
        }
    }
    let last = |k: usize| *tables[k].auc_mean.last().unwrap();
    let (r, v, p) = (last(0), last(1), last(2));
    let a = worst_rise <= 0.02;
    let b = v - r >= 0.05 && p - r >= 0.05;
    let c = p >= v - 0.03;
    outcome(
        a && b && c,
        format!(
            "(a) largest step increase {worst_rise:.4} [{}] (b) at 95 deg raw {r:.3}, view-based {v:.3}, pca {p:.3} [{}] (c) pca - view-based {:+.3} [{}]",
            if a { "ok" } else { "fail" },
            if b { "ok" } else { "fail" },
            p - v,
            if c { "ok" } else { "fail" }
        ),
    )
}

/// Class means recomputed from the matrix entries.
fn class_means(m: &SimilarityMatrix) -> (f64, f64, f64, f64) {
    let (mut mirror, mut other, mut within, mut between) = ((0.0, 0), (0.0, 0), (0.0, 0), (0.0, 0));
    let add = |acc: &mut (f64, usize), v: f64| {
        acc.0 += v;
        acc.1 += 1;
    };
    for (i, a) in m.labels.iter().enumerate() {
        for (j, b) in m.labels.iter().enumerate() {
            let Some(v) = m.entries[i][j] else { continue };
            if i == j {
                continue;
            }
            if a.identity == b.identity {
                add(&mut within, v);
                if a.angle != 0.0 && (a.angle + b.angle).abs() < 1e-9 {
                    add(&mut mirror, v);
                } else if (a.angle.abs() - b.angle.abs()).abs() > 1e-9 {
                    add(&mut other, v);
                }
            } else {
                add(&mut between, v);
            }
        }
    }
    let f = |(s, n): (f64, usize)| s / n as f64;
    (f(mirror), f(other), f(within), f(between))
}

fn criterion_7(corpus: &Corpus, pca: &TemplateBank) -> Outcome {
    let m = similarity_experiment(corpus, pca, &SignatureSpec::default(), &SimilarityConfig::default(), EXEC).unwrap();
    let (mirror, other, _, _) = class_means(&m.simple);
    let (_, _, within, between) = class_means(&m.pooled);
    outcome(
        mirror - other >= 0.1 && within - between >= 0.1,
        format!("simple: mirror {mirror:.3} vs other {other:.3}; pooled: within {within:.3} vs between {between:.3}"),
    )
}

fn criterion_8(corpus: &Corpus, vb: &TemplateBank, pca: &TemplateBank) -> Outcome {
    let perm = permutation(&corpus.encoder.feature_reflection());
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for bank in [vb, pca] {
        for nl in [Nonlinearity::Square, Nonlinearity::Abs] {
            let spec = SignatureSpec {
                nonlinearity: nl,
                ..SignatureSpec::default()
            };
            let templates: &[LearnedBasis] = &bank.bases;
            let per = EXEC.map(&corpus.features, |feats| {
                feats
                    .iter()
                    .map(|x| {
                        let a = signature(x, templates, &spec).unwrap().values;
                        let b = signature(&reflect(&perm, x), templates, &spec).unwrap().values;
                        a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
                    })
                    .fold(0.0, f64::max)
            });
            let r = per.into_iter().fold(0.0, f64::max);
            worst = worst.max(r);
            parts.push(format!("{}/{nl:?} {r:.1e}", bank.model.label()));
        }
    }
    let images = corpus.features.iter().map(Vec::len).sum::<usize>();
    outcome(worst <= 1e-10, format!("{images} images: {}", parts.join(", ")))
}

fn run_verify(out: &Path) -> (Option<i32>, std::path::PathBuf) {
    let cfg = out.join("config.json");
    fs::write(&cfg, serde_json::json!({ "output_dir": out }).to_string()).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_viewsym"))
        .args(["--config", cfg.to_str().unwrap(), "verify"])
        .output()
        .unwrap();
    let dir = String::from_utf8_lossy(&o.stdout).lines().last().unwrap_or_default().to_string();
    (o.status.code(), dir.into())
}

fn criterion_9() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (code_a, dir_a) = run_verify(a.path());
    let (code_b, dir_b) = run_verify(b.path());
    let mut identical = dir_a.file_name() == dir_b.file_name();
    for f in ["report/report.json", "report/report.csv", "report/parity.csv", "report/invariance.csv"] {
        identical &= fs::read(dir_a.join(f)).ok() == fs::read(dir_b.join(f)).ok();
    }
    let manifest = |d: &Path| -> Option<Value> {
        let mut v: Value = serde_json::from_str(&fs::read_to_string(d.join("manifest.json")).ok()?).ok()?;
        v.as_object_mut()?.remove("timings_seconds");
        Some(v)
    };
    identical &= manifest(&dir_a).is_some() && manifest(&dir_a) == manifest(&dir_b);
    outcome(
        identical && code_a == Some(0) && code_b == Some(0),
        format!("exit codes {code_a:?} {code_b:?}, reports and manifests identical: {identical}"),
    )
}

fn report(n: usize, title: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let o = f();
    let el = t.elapsed();
    let in_time = limit.is_none_or(|l| el <= l);
    let passed = o.passed && in_time;
    let budget = match limit {
        Some(l) => format!(" / limit {:.0} s{}", l.as_secs_f64(), if in_time { "" } else { " EXCEEDED" }),
        None => String::new(),
    };
    println!(
        "{} criterion {n} ({title}): {} [{:.2} s{budget}]",
        if passed { "PASS" } else { "FAIL" },
        o.detail,
        el.as_secs_f64()
    );
    passed
}

fn main() {
    let secs = Duration::from_secs;
    let mut all = true;
    all &= report(1, "eigenvector parity", Some(secs(10)), criterion_1);

    let t = Instant::now();
    let corpus = Corpus::build(&desk_spec(40), &EncoderSpec::c1(), 0, EXEC).unwrap();
    let vb = TemplateBank::build(&corpus, Model::ViewBased, EXEC).unwrap();
    let pca = TemplateBank::build(&corpus, Model::Pca { components: None }, EXEC).unwrap();
    println!("     desk corpus: 40 identities x {} views, C1 features, built in {:.2} s", corpus.angles.len(), t.elapsed().as_secs_f64());

    all &= report(2, "mirror-symmetric PC tuning", None, || criterion_2(&corpus, &pca));
    all &= report(3, "ICA asymmetry", None, criterion_3);
    all &= report(4, "equivariance", Some(secs(5)), criterion_4);
    all &= report(5, "Oja vs batch PCA", Some(secs(30)), || criterion_5(&corpus));
    all &= report(6, "pair-matching AUC", Some(secs(300)), || criterion_6(&corpus, &vb, &pca));
    all &= report(7, "similarity structure", None, || criterion_7(&corpus, &pca));
    all &= report(8, "signature reflection invariance", None, || criterion_8(&corpus, &vb, &pca));
    all &= report(9, "determinism of verify", None, criterion_9);
    if !all {
        std::process::exit(1);
    }
}

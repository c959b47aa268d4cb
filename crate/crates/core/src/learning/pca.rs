//! Batch covariance and principal components: the oracle the online rules
//! are checked against.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{BasisRule, LearnedBasis};
use crate::encoder::FeatureReflection;
use crate::error::{invalid, Result};
use crate::linalg::{canonical_sign, frobenius, mean, sym_eigen_sorted};

/// Second-moment matrix `C = X X^T / n` (optionally about the mean).
#[derive(Clone, Debug, PartialEq)]
pub struct CovariancePack {
    pub matrix: DMatrix<f64>,
    pub n_samples: usize,
    pub mean: Option<Vec<f64>>,
}

impl CovariancePack {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `||C sigma - sigma C||_F`, evaluated index-wise without forming sigma.
    pub fn commutator_norm(&self, sigma: &FeatureReflection) -> f64 {
        let c = &self.matrix;
        let p = &sigma.permutation;
        let d = self.dim();
        let mut acc = 0.0;
        for j in 0..d {
            for i in 0..d {
                // (C S)_{ij} = C_{i, p(j)},  (S C)_{ij} = C_{p(i), j}
                let diff = c[(i, p[j])] - c[(p[i], j)];
                acc += diff * diff;
            }
        }
        acc.sqrt()
    }

    pub fn frobenius(&self) -> f64 {
        frobenius(&self.matrix)
    }

    /// Largest asymmetry `|C_ij - C_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let c = &self.matrix;
        let mut m: f64 = 0.0;
        for i in 0..self.dim() {
            for j in 0..i {
                m = m.max((c[(i, j)] - c[(j, i)]).abs());
            }
        }
        m
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaRoute {
    /// Dual (Gram) route when samples are fewer than features and the
    /// dimension is large; primal otherwise.
    #[default]
    Auto,
    /// Eigendecompose the `d x d` covariance.
    Primal,
    /// Eigendecompose the `n x n` Gram matrix and map back.
    Dual,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcaOptions {
    pub center: bool,
    /// Keep at most this many leading components.
    pub components: Option<usize>,
    pub route: PcaRoute,
}

impl Default for PcaOptions {
    fn default() -> Self {
        PcaOptions {
            center: false,
            components: None,
            route: PcaRoute::Auto,
        }
    }
}

const DUAL_MIN_DIM: usize = 64;
/// Gram eigenvalues below this fraction of the largest are treated as zero.
const DUAL_RANK_TOL: f64 = 1e-11;

fn check_data<T: AsRef<[f64]>>(data: &[T]) -> Result<usize> {
    let Some(first) = data.first() else {
        return invalid("at least one sample is required");
    };
    let d = first.as_ref().len();
    if d == 0 {
        return invalid("samples must be non-empty");
    }
    for (i, x) in data.iter().enumerate() {
        let x = x.as_ref();
        if x.len() != d {
            return invalid(format!("sample {i} has dimension {}, expected {d}", x.len()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return invalid(format!("sample {i} contains non-finite values"));
        }
    }
    Ok(d)
}

/// `d x n` data matrix, columns are (optionally centred) samples.
fn data_matrix<T: AsRef<[f64]>>(data: &[T], center: bool) -> (DMatrix<f64>, Option<Vec<f64>>) {
    let d = data[0].as_ref().len();
    let n = data.len();
    let mu = center.then(|| {
        (0..d)
            .map(|k| mean(&data.iter().map(|x| x.as_ref()[k]).collect::<Vec<_>>()))
            .collect::<Vec<f64>>()
    });
    let x = DMatrix::from_fn(d, n, |k, i| {
        let v = data[i].as_ref()[k];
        match &mu {
            Some(m) => v - m[k],
            None => v,
        }
    });
    (x, mu)
}

pub fn covariance<T: AsRef<[f64]>>(data: &[T], center: bool) -> Result<CovariancePack> {
    check_data(data)?;
    let n = data.len();
    let (x, mean) = data_matrix(data, center);
    let mut c = &x * x.transpose() / n as f64;
    // symmetrize exactly against round-off in the product
    let d = c.nrows();
    for i in 0..d {
        for j in 0..i {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(CovariancePack {
        matrix: c,
        n_samples: n,
        mean,
    })
}

/// Eigenpairs of the sample covariance, sorted by non-increasing eigenvalue,
/// each eigenvector signed so its largest-magnitude entry is positive.
///
/// The primal route returns all `d` eigenpairs. The dual route returns only
/// the eigenpairs with numerically non-zero eigenvalue (at most `n`).
pub fn batch_pca<T: AsRef<[f64]>>(
    data: &[T],
    opts: &PcaOptions,
) -> Result<(LearnedBasis, CovariancePack)> {
    let d = check_data(data)?;
    let n = data.len();
    let cov = covariance(data, opts.center)?;
    let dual = match opts.route {
        PcaRoute::Primal => false,
        PcaRoute::Dual => true,
        PcaRoute::Auto => n < d && d > DUAL_MIN_DIM,
    };
    let (mut values, mut vectors) = if dual {
        let (x, _) = data_matrix(data, opts.center);
        let gram = x.transpose() * &x / n as f64;
        let (gvals, gvecs) = sym_eigen_sorted(gram);
        let top = gvals.first().copied().unwrap_or(0.0).max(0.0);
        let mut values = Vec::new();
        let mut vectors = Vec::new();
        for (lambda, u) in gvals.into_iter().zip(gvecs) {
            if !(lambda > DUAL_RANK_TOL * top) {
                break;
            }
            let u = nalgebra::DVector::from_vec(u);
            let mut v: Vec<f64> = (&x * u).iter().copied().collect();
            let scale = (n as f64 * lambda).sqrt();
            v.iter_mut().for_each(|e| *e /= scale);
            canonical_sign(&mut v);
            values.push(lambda);
            vectors.push(v);
        }
        (values, vectors)
    } else {
        sym_eigen_sorted(cov.matrix.clone())
    };
    // clamp tiny negative round-off so the non-negativity invariant holds
    values.iter_mut().for_each(|v| *v = v.max(0.0));
    if let Some(r) = opts.components {
        values.truncate(r);
        vectors.truncate(r);
    }
    if vectors.is_empty() {
        // all-zero data: no direction carries variance
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        vectors.push(e);
        values.push(0.0);
    }
    let basis = LearnedBasis {
        identity_id: 0,
        rule: BasisRule::Pca,
        vectors,
        eigenvalues: Some(values),
        whitening: None,
    };
    Ok((basis, cov))
}

/// PCA of the reflection-symmetrized dataset `data + sigma(data)`, solved
/// separately on the even parts `(x + sigma x) / 2` and odd parts
/// `(x - sigma x) / 2`. Every returned vector is exactly even or exactly odd.
/// For reflection-closed data the spectrum is that of [`batch_pca`].
///
/// Eigenpairs at or below `1e-11` of the largest eigenvalue are dropped.
pub fn reflection_adapted_pca<T: AsRef<[f64]>>(
    data: &[T],
    sigma: &FeatureReflection,
    opts: &PcaOptions,
) -> Result<LearnedBasis> {
    let d = check_data(data)?;
    if sigma.dim() != d {
        return invalid(format!("reflection acts on {} features, data has {d}", sigma.dim()));
    }
    let p = &sigma.permutation;
    let part = |x: &[f64], odd: bool| -> Vec<f64> {
        (0..d)
            .map(|i| if odd { 0.5 * (x[i] - x[p[i]]) } else { 0.5 * (x[i] + x[p[i]]) })
            .collect()
    };
    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::new();
    for odd in [false, true] {
        let parts: Vec<Vec<f64>> = data.iter().map(|x| part(x.as_ref(), odd)).collect();
        // odd parts of the symmetrized set average to zero already
        let block_opts = PcaOptions {
            center: opts.center && !odd,
            components: None,
            route: opts.route,
        };
        let (basis, _) = batch_pca(&parts, &block_opts)?;
        let values = basis.eigenvalues.expect("pca reports eigenvalues");
        for (lambda, v) in values.into_iter().zip(basis.vectors) {
            let mut v = part(&v, odd);
            let n = v.iter().map(|e| e * e).sum::<f64>().sqrt();
            if n > 0.0 {
                v.iter_mut().for_each(|e| *e /= n);
                canonical_sign(&mut v);
                pairs.push((lambda, v));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let top = pairs.first().map_or(0.0, |p| p.0);
    pairs.retain(|(l, _)| *l > DUAL_RANK_TOL * top);
    if let Some(r) = opts.components {
        pairs.truncate(r);
    }
    if pairs.is_empty() {
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        pairs.push((0.0, e));
    }
    let (values, vectors): (Vec<f64>, Vec<Vec<f64>>) = pairs.into_iter().unzip();
    Ok(LearnedBasis {
        identity_id: 0,
        rule: BasisRule::Pca,
        vectors,
        eigenvalues: Some(values),
        whitening: None,
    })
}

/// Relative gap of eigenvalue `k` to its nearest neighbour, `gap / max(lambda_1, tiny)`.
pub fn relative_eigengap(values: &[f64], k: usize) -> f64 {
    let top = values.first().copied().unwrap_or(0.0).abs().max(f64::MIN_POSITIVE);
    let left = (k > 0).then(|| (values[k - 1] - values[k]).abs());
    let right = values.get(k + 1).map(|v| (values[k] - v).abs());
    let gap = match (left, right) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => f64::INFINITY,
    };
    gap / top
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, max_abs_diff, rows_to_matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_by_two_by_hand() {
        let data = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let (basis, cov) = batch_pca(&data, &PcaOptions::default()).unwrap();
        // C = X X^T / n with n = 2
        let expect = DMatrix::from_row_slice(2, 2, &[2.5, 2.0, 2.0, 2.5]);
        assert!(frobenius(&(&cov.matrix - expect)) < 1e-15);
        let vals = basis.eigenvalues.clone().unwrap();
        assert!((vals[0] - 4.5).abs() < 1e-12 && (vals[1] - 0.5).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(max_abs_diff(&basis.vectors[0], &[s, s]) < 1e-12);
        assert!(max_abs_diff(&basis.vectors[1], &[s, -s]) < 1e-12);
        assert!(cov.commutator_norm(&FeatureReflection::swap2()) < 1e-15);
    }

    #[test]
    fn unnormalized_matches_hand_matrix() {
        // X X^T itself is [[5,4],[4,5]] with eigenvalues 9 and 1
        let data = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let cov = covariance(&data, false).unwrap();
        let scaled = &cov.matrix * cov.n_samples as f64;
        assert!(
            frobenius(&(scaled - DMatrix::from_row_slice(2, 2, &[5.0, 4.0, 4.0, 5.0]))) < 1e-14
        );
    }

    #[test]
    fn single_sample() {
        let x = vec![vec![3.0, 4.0]];
        let (basis, _) = batch_pca(&x, &PcaOptions::default()).unwrap();
        let vals = basis.eigenvalues.unwrap();
        assert!((vals[0] - 25.0).abs() < 1e-12);
        assert!(vals[1].abs() < 1e-12);
        assert!(max_abs_diff(&basis.vectors[0], &[0.6, 0.8]) < 1e-12);
    }

    fn random_data(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..d).map(|_| rng.random::<f64>() - 0.3).collect())
            .collect()
    }

    #[test]
    fn spectral_reconstruction() {
        let data = random_data(1, 30, 12);
        let (basis, cov) = batch_pca(&data, &PcaOptions::default()).unwrap();
        let vals = basis.eigenvalues.as_ref().unwrap();
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let v = rows_to_matrix(&basis.vectors);
        let recon = v.transpose() * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals.clone())) * v;
        assert!(frobenius(&(recon - &cov.matrix)) < 1e-10);
    }

    #[test]
    fn dual_route_matches_primal() {
        let data = random_data(2, 10, 80);
        for center in [false, true] {
            let p = batch_pca(&data, &PcaOptions { center, route: PcaRoute::Primal, components: None }).unwrap().0;
            let q = batch_pca(&data, &PcaOptions { center, route: PcaRoute::Dual, components: None }).unwrap().0;
            let pv = p.eigenvalues.unwrap();
            let qv = q.eigenvalues.unwrap();
            assert_eq!(qv.len(), if center { 9 } else { 10 });
            for k in 0..qv.len() {
                assert!((pv[k] - qv[k]).abs() < 1e-10 * pv[0]);
                assert!((dot(&p.vectors[k], &q.vectors[k]) - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let empty: Vec<Vec<f64>> = vec![];
        assert!(batch_pca(&empty, &PcaOptions::default()).is_err());
        assert!(batch_pca(&[vec![1.0, f64::NAN]], &PcaOptions::default()).is_err());
        assert!(batch_pca(&[vec![1.0, 2.0], vec![1.0]], &PcaOptions::default()).is_err());
    }

    fn closed_data(seed: u64, n: usize) -> (Vec<Vec<f64>>, FeatureReflection) {
        let sigma = FeatureReflection::new((0..7).rev().collect()).unwrap();
        let mut data = Vec::new();
        for x in random_data(seed, n, 7) {
            data.push(sigma.apply(&x));
            data.push(x);
        }
        (data, sigma)
    }

    #[test]
    fn adapted_pca_matches_generic_on_closed_data() {
        let (data, sigma) = closed_data(5, 6);
        let (generic, _) = batch_pca(&data, &PcaOptions::default()).unwrap();
        let adapted = reflection_adapted_pca(&data, &sigma, &PcaOptions::default()).unwrap();
        let gv = generic.eigenvalues.unwrap();
        let av = adapted.eigenvalues.unwrap();
        assert_eq!(av.len(), 7);
        for k in 0..7 {
            assert!((gv[k] - av[k]).abs() < 1e-12 * gv[0]);
            assert!((dot(&generic.vectors[k], &adapted.vectors[k]).abs() - 1.0).abs() < 1e-9);
            let v = &adapted.vectors[k];
            let s = sigma.apply(v);
            assert!(s == *v || s.iter().zip(v).all(|(a, b)| *a == -*b));
        }
    }

    #[test]
    fn adapted_pca_truncates_and_centres() {
        let (data, sigma) = closed_data(6, 2);
        let full = reflection_adapted_pca(&data, &sigma, &PcaOptions::default()).unwrap();
        assert_eq!(full.len(), 4);
        let two = reflection_adapted_pca(&data, &sigma, &PcaOptions { components: Some(2), ..PcaOptions::default() }).unwrap();
        assert_eq!(two.vectors[..], full.vectors[..2]);
        let centred = reflection_adapted_pca(&data, &sigma, &PcaOptions { center: true, ..PcaOptions::default() }).unwrap();
        let (generic, _) = batch_pca(&data, &PcaOptions { center: true, ..PcaOptions::default() }).unwrap();
        let gv = generic.eigenvalues.unwrap();
        for (k, l) in centred.eigenvalues.unwrap().iter().enumerate() {
            assert!((gv[k] - l).abs() < 1e-12 * gv[0]);
        }
        assert!(reflection_adapted_pca(&data, &FeatureReflection::swap2(), &PcaOptions::default()).is_err());
    }

    #[test]
    fn eigengap() {
        let v = [9.0, 1.0, 1.0, 0.5];
        assert!((relative_eigengap(&v, 0) - 8.0 / 9.0).abs() < 1e-15);
        assert_eq!(relative_eigengap(&v, 1), 0.0);
        assert!((relative_eigengap(&v, 3) - 0.5 / 9.0).abs() < 1e-15);
    }
}

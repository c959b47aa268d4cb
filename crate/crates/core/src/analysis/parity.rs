//! Even/odd classification of vectors under the feature reflection, and the
//! covariance-level checks built on it.

use serde::{Deserialize, Serialize};

use crate::encoder::FeatureReflection;
use crate::error::{invalid, Result};
use crate::learning::pca::relative_eigengap;
use crate::learning::{batch_pca, CovariancePack, LearnedBasis, PcaOptions};
use crate::linalg::{axpy, dot, norm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityResult {
    pub parity: Parity,
    /// Relative residual of the better of the two hypotheses.
    pub residual: f64,
}

pub fn parity_of_vector(v: &[f64], sigma: &FeatureReflection, tol: f64) -> Result<ParityResult> {
    if v.len() != sigma.dim() {
        return invalid(format!(
            "vector has dimension {}, reflection acts on {}",
            v.len(),
            sigma.dim()
        ));
    }
    let n = norm(v);
    if n == 0.0 {
        return invalid("parity of the zero vector is undefined");
    }
    let s = sigma.apply(v);
    let even = s.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / n;
    let odd = s.iter().zip(v).map(|(a, b)| (a + b) * (a + b)).sum::<f64>().sqrt() / n;
    let parity = if even <= tol {
        Parity::Even
    } else if odd <= tol {
        Parity::Odd
    } else {
        Parity::Mixed
    };
    Ok(ParityResult {
        parity,
        residual: even.min(odd),
    })
}

/// Outcome of checking one covariance spectrum against the reflection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumParity {
    /// `||C sigma - sigma C||_F / ||C||_F`.
    pub relative_commutator: f64,
    /// Parity of each eigenvector; `None` where the eigengap is too small to
    /// single the vector out.
    pub labels: Vec<Option<ParityResult>>,
    /// Largest residual among gapped eigenvectors.
    pub worst_gapped_residual: f64,
    /// Largest `||(I - P_S) sigma P_S||_F` over near-degenerate clusters of
    /// resolved eigenvalues (above `gap_tol` times the largest).
    pub worst_subspace_leak: f64,
    pub n_gapped: usize,
    pub n_even: usize,
    pub n_odd: usize,
}

/// `||(I - P_S) sigma V||_F` for orthonormal rows `V` spanning `S`.
pub fn subspace_leak(vectors: &[&Vec<f64>], sigma: &FeatureReflection) -> f64 {
    let mut total = 0.0;
    for v in vectors {
        let mut s = sigma.apply(v);
        for u in vectors {
            let c = dot(u, &s);
            axpy(-c, u, &mut s);
        }
        total += dot(&s, &s);
    }
    total.sqrt()
}

/// Run the parity checks on a PCA basis of a reflection-closed dataset.
pub fn spectrum_parity(
    basis: &LearnedBasis,
    cov: &CovariancePack,
    sigma: &FeatureReflection,
    gap_tol: f64,
    parity_tol: f64,
) -> Result<SpectrumParity> {
    let Some(values) = &basis.eigenvalues else {
        return invalid("spectrum parity needs eigenvalues");
    };
    let relative_commutator = {
        let f = cov.frobenius();
        if f == 0.0 {
            0.0
        } else {
            cov.commutator_norm(sigma) / f
        }
    };
    let mut labels = Vec::with_capacity(values.len());
    let (mut worst, mut n_gapped, mut n_even, mut n_odd) = (0.0f64, 0, 0, 0);
    for (k, v) in basis.vectors.iter().enumerate() {
        if relative_eigengap(values, k) > gap_tol {
            let p = parity_of_vector(v, sigma, parity_tol)?;
            worst = worst.max(p.residual);
            n_gapped += 1;
            match p.parity {
                Parity::Even => n_even += 1,
                Parity::Odd => n_odd += 1,
                Parity::Mixed => {}
            }
            labels.push(Some(p));
        } else {
            labels.push(None);
        }
    }
    // clusters of eigenvalues within gap_tol of each other, among the
    // eigenvalues large enough for their eigenvectors to be resolved
    let top = values.first().copied().unwrap_or(0.0).abs().max(f64::MIN_POSITIVE);
    let resolved = values.iter().take_while(|v| **v > gap_tol * top).count();
    let mut leak = 0.0f64;
    let mut start = 0;
    for k in 1..=resolved {
        if k == resolved || (values[k - 1] - values[k]).abs() / top > gap_tol {
            if k - start > 1 {
                let members: Vec<&Vec<f64>> = basis.vectors[start..k].iter().collect();
                leak = leak.max(subspace_leak(&members, sigma));
            }
            start = k;
        }
    }
    Ok(SpectrumParity {
        relative_commutator,
        labels,
        worst_gapped_residual: worst,
        worst_subspace_leak: leak,
        n_gapped,
        n_even,
        n_odd,
    })
}

/// Batch PCA of `data` followed by [`spectrum_parity`].
pub fn dataset_parity<T: AsRef<[f64]>>(
    data: &[T],
    sigma: &FeatureReflection,
    opts: &PcaOptions,
    gap_tol: f64,
    parity_tol: f64,
) -> Result<SpectrumParity> {
    let (basis, cov) = batch_pca(data, opts)?;
    spectrum_parity(&basis, &cov, sigma, gap_tol, parity_tol)
}

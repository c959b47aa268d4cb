//! ZCA whitening, kept in factored form.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::pca::{batch_pca, PcaOptions};
use crate::error::{invalid, Error, Result};
use crate::linalg::{axpy, dot, sub};

/// `x -> E diag(s) E^T (x - mean)` where the rows of `E` are the retained
/// covariance eigenvectors and `s = 1 / sqrt(lambda)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhiteningTransform {
    pub mean: Vec<f64>,
    /// Retained eigenvectors, one per row (`k x d`).
    pub basis: Vec<Vec<f64>>,
    pub scales: Vec<f64>,
}

impl WhiteningTransform {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Whitened coordinates in the retained eigenbasis (length `rank`).
    pub fn reduce(&self, x: &[f64]) -> Vec<f64> {
        let c = sub(x, &self.mean);
        self.basis
            .iter()
            .zip(&self.scales)
            .map(|(e, s)| s * dot(e, &c))
            .collect()
    }

    /// Map reduced coordinates back into feature space: `E^T z`.
    pub fn lift(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (e, zi) in self.basis.iter().zip(z) {
            axpy(*zi, e, &mut out);
        }
        out
    }

    /// The ZCA output in feature space.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.lift(&self.reduce(x))
    }

    /// Dense `d x d` whitening matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for (e, s) in self.basis.iter().zip(&self.scales) {
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] += s * e[i] * e[j];
                }
            }
        }
        m
    }
}

/// Fit a mean-centred ZCA transform. Directions whose variance falls below
/// `rank_tolerance * lambda_max` are dropped.
pub fn zca_whiten<T: AsRef<[f64]>>(
    data: &[T],
    rank_tolerance: f64,
) -> Result<(WhiteningTransform, Vec<Vec<f64>>)> {
    if data.len() < 2 {
        return invalid("whitening needs at least 2 samples");
    }
    if !(rank_tolerance > 0.0 && rank_tolerance < 1.0) {
        return invalid("rank_tolerance must be in (0, 1)");
    }
    let (pca, cov) = batch_pca(
        data,
        &PcaOptions {
            center: true,
            ..PcaOptions::default()
        },
    )?;
    let values = pca.eigenvalues.expect("pca always reports eigenvalues");
    let top = values[0];
    if !(top > 0.0) {
        return Err(Error::DegenerateData(
            "all samples are identical; covariance is zero".into(),
        ));
    }
    let (basis, scales): (Vec<_>, Vec<_>) = pca
        .vectors
        .into_iter()
        .zip(values)
        .take_while(|(_, l)| *l >= rank_tolerance * top)
        .map(|(v, l)| (v, 1.0 / l.sqrt()))
        .unzip();
    let transform = WhiteningTransform {
        mean: cov.mean.expect("centred covariance has a mean"),
        basis,
        scales,
    };
    let whitened = data.iter().map(|x| transform.apply(x.as_ref())).collect();
    Ok((transform, whitened))
}

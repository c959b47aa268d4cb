//! Small dense helpers on `&[f64]` plus a sorted symmetric eigensolver.

use nalgebra::{DMatrix, SymmetricEigen};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Normalize to unit length in place; returns the original norm.
pub fn normalize(a: &mut [f64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        a.iter_mut().for_each(|x| *x /= n);
    }
    n
}

pub fn mean(a: &[f64]) -> f64 {
    a.iter().sum::<f64>() / a.len() as f64
}

/// Zero-mean, unit-(population)-std copy. Returns `None` for constant input.
pub fn standardize(a: &[f64]) -> Option<Vec<f64>> {
    let m = mean(a);
    let var = a.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / a.len() as f64;
    if !(var > 0.0) || !var.is_finite() {
        return None;
    }
    let sd = var.sqrt();
    Some(a.iter().map(|x| (x - m) / sd).collect())
}

/// Cosine similarity; zero when either side is the zero vector.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d = norm(a) * norm(b);
    if d == 0.0 {
        0.0
    } else {
        dot(a, b) / d
    }
}

/// Flip the sign so the largest-magnitude entry is positive. Entries within a
/// relative 1e-9 of the maximum count as ties and the first one wins.
pub fn canonical_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|x| x.abs() >= max * (1.0 - 1e-9))
        .expect("max exists");
    if v[pivot] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Eigenpairs of a symmetric matrix sorted by non-increasing eigenvalue,
/// eigenvectors returned as rows with the canonical sign applied.
pub fn sym_eigen_sorted(m: DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            canonical_sign(&mut v);
            v
        })
        .collect();
    (values, vectors)
}

/// Dense matrix whose rows are the given vectors.
pub fn rows_to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(r, c, |i, j| rows[i][j])
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardize_constant_is_none() {
        assert!(standardize(&[2.0, 2.0, 2.0]).is_none());
        let s = standardize(&[1.0, 2.0, 3.0]).unwrap();
        assert!(mean(&s).abs() < 1e-15);
        assert!((dot(&s, &s) / 3.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn canonical_sign_ties_pick_first() {
        let mut v = vec![-0.5, 0.5];
        canonical_sign(&mut v);
        assert_eq!(v, vec![0.5, -0.5]);
        let mut w = vec![0.1, -0.9];
        canonical_sign(&mut w);
        assert_eq!(w, vec![-0.1, 0.9]);
    }

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(2, 2, &[5.0, 4.0, 4.0, 5.0]);
        let (vals, vecs) = sym_eigen_sorted(m);
        assert!((vals[0] - 9.0).abs() < 1e-12 && (vals[1] - 1.0).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(max_abs_diff(&vecs[0], &[s, s]) < 1e-12);
        assert!(max_abs_diff(&vecs[1], &[s, -s]) < 1e-12);
    }
}

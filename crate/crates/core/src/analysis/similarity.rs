//! Pearson similarity matrices over labelled population responses.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{cosine, standardize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Encoder output.
    Input,
    /// Per-template responses before pooling.
    Simple,
    /// Pooled signature.
    Pooled,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Input, Stage::Simple, Stage::Pooled];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Input => "input",
            Stage::Simple => "simple",
            Stage::Pooled => "pooled",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowLabel {
    pub identity: u64,
    pub angle: f64,
}

/// Correlation matrix; `None` marks entries involving a zero-variance row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub stage: Stage,
    pub labels: Vec<RowLabel>,
    pub entries: Vec<Vec<Option<f64>>>,
}

/// Pearson correlation; `None` if either vector is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let (sa, sb) = (standardize(a)?, standardize(b)?);
    Some(cosine(&sa, &sb).clamp(-1.0, 1.0))
}

pub fn similarity_matrix(stage: Stage, rows: &[(RowLabel, Vec<f64>)]) -> Result<SimilarityMatrix> {
    if rows.len() < 2 {
        return invalid("a similarity matrix needs at least 2 rows");
    }
    let d = rows[0].1.len();
    if rows.iter().any(|(_, v)| v.len() != d) {
        return invalid("all rows need the same dimension");
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&rows[i].0, &rows[j].0);
        a.identity.cmp(&b.identity).then(a.angle.total_cmp(&b.angle))
    });
    let std: Vec<Option<Vec<f64>>> = order.iter().map(|&i| standardize(&rows[i].1)).collect();
    let n = order.len();
    let mut entries = vec![vec![None; n]; n];
    for i in 0..n {
        let Some(a) = &std[i] else { continue };
        entries[i][i] = Some(1.0);
        for j in 0..i {
            if let Some(b) = &std[j] {
                let r = cosine(a, b).clamp(-1.0, 1.0);
                entries[i][j] = Some(r);
                entries[j][i] = Some(r);
            }
        }
    }
    Ok(SimilarityMatrix {
        stage,
        labels: order.iter().map(|&i| rows[i].0).collect(),
        entries,
    })
}

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries[i][j]
    }

    /// Rows whose vector had zero variance.
    pub fn flagged_rows(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.entries[i][i].is_none()).collect()
    }

    /// Largest `|M_ij - M_ji|` and `|M_ii - 1|` over defined entries.
    pub fn structure_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            if let Some(d) = self.entries[i][i] {
                worst = worst.max((d - 1.0).abs());
            }
            for j in 0..i {
                if let (Some(a), Some(b)) = (self.entries[i][j], self.entries[j][i]) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }

    /// Entry-wise mean of matrices built on the same row layout. Identities
    /// are relabelled by slot, since different splits hold different faces.
    pub fn average(mats: &[SimilarityMatrix]) -> Result<SimilarityMatrix> {
        let Some(first) = mats.first() else {
            return invalid("nothing to average");
        };
        let n = first.len();
        if mats.iter().any(|m| m.len() != n || m.stage != first.stage) {
            return invalid("matrices differ in size or stage");
        }
        let mut slot = Vec::with_capacity(n);
        let mut next = 0u64;
        for (i, l) in first.labels.iter().enumerate() {
            if i > 0 && first.labels[i - 1].identity != l.identity {
                next += 1;
            }
            slot.push(RowLabel { identity: next, angle: l.angle });
        }
        let mut entries = vec![vec![None; n]; n];
        for (i, row) in entries.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                let vals: Option<Vec<f64>> = mats.iter().map(|m| m.entries[i][j]).collect();
                *e = vals.map(|v| v.iter().sum::<f64>() / v.len() as f64);
            }
        }
        Ok(SimilarityMatrix {
            stage: first.stage,
            labels: slot,
            entries,
        })
    }

    /// Summary statistics of the block structure.
    pub fn structure(&self) -> SimilarityStructure {
        let mut acc = [(0.0, 0usize); 4];
        for i in 0..self.len() {
            for j in 0..i {
                let Some(r) = self.entries[i][j] else { continue };
                let (a, b) = (self.labels[i], self.labels[j]);
                if a.identity == b.identity {
                    acc[2].0 += r;
                    acc[2].1 += 1;
                    if (a.angle + b.angle).abs() < 1e-9 {
                        acc[0].0 += r;
                        acc[0].1 += 1;
                    } else if (a.angle.abs() - b.angle.abs()).abs() > 1e-9 {
                        acc[1].0 += r;
                        acc[1].1 += 1;
                    }
                } else {
                    acc[3].0 += r;
                    acc[3].1 += 1;
                }
            }
        }
        let m = |(s, n): (f64, usize)| if n == 0 { f64::NAN } else { s / n as f64 };
        SimilarityStructure {
            mirror_pair_mean: m(acc[0]),
            other_pair_mean: m(acc[1]),
            within_identity_mean: m(acc[2]),
            between_identity_mean: m(acc[3]),
        }
    }
}

/// Mean correlations over classes of off-diagonal entries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityStructure {
    /// Same identity, angles `theta` and `-theta`.
    pub mirror_pair_mean: f64,
    /// Same identity, `|theta| != |theta'|`.
    pub other_pair_mean: f64,
    pub within_identity_mean: f64,
    pub between_identity_mean: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(identity: u64, angle: f64) -> RowLabel {
        RowLabel { identity, angle }
    }

    #[test]
    fn pearson_examples() {
        let v = vec![1.0, 2.0, 3.0];
        assert!((pearson(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert!((pearson(&v, &neg).unwrap() + 1.0).abs() < 1e-15);
        // centred sums: cross 3, squares 2 and 42/9
        let r = pearson(&v, &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - 3.0 / (2.0f64 * 42.0 / 9.0).sqrt()).abs() < 1e-12);
        assert!((r - 0.981_98).abs() < 1e-5);
        assert!(pearson(&v, &[2.0, 2.0, 2.0]).is_none());
    }

    #[test]
    fn matrix_is_sorted_symmetric_and_flags_constant_rows() {
        let rows = vec![
            (l(1, 5.0), vec![1.0, 0.0, 2.0]),
            (l(0, 5.0), vec![3.0, 1.0, 2.0]),
            (l(0, -5.0), vec![3.0, 3.0, 3.0]),
        ];
        let m = similarity_matrix(Stage::Input, &rows).unwrap();
        assert_eq!(m.labels, vec![l(0, -5.0), l(0, 5.0), l(1, 5.0)]);
        assert_eq!(m.flagged_rows(), vec![0]);
        assert_eq!(m.get(0, 1), None);
        assert_eq!(m.get(1, 1), Some(1.0));
        assert!(m.structure_error() <= 1e-12);
        assert!(similarity_matrix(Stage::Input, &rows[..1]).is_err());
    }

    #[test]
    fn structure_classes() {
        let rows = vec![
            (l(0, -5.0), vec![1.0, 2.0, 3.0]),
            (l(0, 5.0), vec![1.0, 2.0, 3.0]),
            (l(0, 10.0), vec![3.0, 2.0, 1.0]),
            (l(1, 5.0), vec![1.0, 3.0, 2.0]),
        ];
        let s = similarity_matrix(Stage::Simple, &rows).unwrap().structure();
        assert!((s.mirror_pair_mean - 1.0).abs() < 1e-12);
        assert!((s.other_pair_mean + 1.0).abs() < 1e-12);
        assert!((s.within_identity_mean - (1.0 - 1.0 - 1.0) / 3.0).abs() < 1e-12);
        assert!((s.between_identity_mean - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn averaging_relabels_by_slot() {
        let a = similarity_matrix(Stage::Pooled, &[(l(3, 0.0), vec![1.0, 2.0]), (l(7, 0.0), vec![2.0, 1.0])]).unwrap();
        let b = similarity_matrix(Stage::Pooled, &[(l(4, 0.0), vec![1.0, 2.0]), (l(9, 0.0), vec![1.0, 2.0])]).unwrap();
        let m = SimilarityMatrix::average(&[a, b]).unwrap();
        assert_eq!(m.labels, vec![l(0, 0.0), l(1, 0.0)]);
        assert_eq!(m.get(0, 1), Some(0.0));
    }
}

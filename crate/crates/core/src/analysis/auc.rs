//! ROC area from the rank statistic, and the per-radius summary table.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Fraction of (same, different) pairs where the same-pair scores higher,
/// ties counted one half. Sorting makes this `O(n log n)`.
pub fn roc_auc(same: &[f64], diff: &[f64]) -> Result<f64> {
    if same.is_empty() || diff.is_empty() {
        return invalid("roc_auc needs non-empty score lists");
    }
    if same.iter().chain(diff).any(|s| !s.is_finite()) {
        return invalid("scores must be finite");
    }
    let mut d = diff.to_vec();
    d.sort_by(f64::total_cmp);
    // wins counted in half-units so the sum stays an exact integer
    let mut halves: u128 = 0;
    for &s in same {
        let below = d.partition_point(|v| *v < s);
        let not_above = d.partition_point(|v| *v <= s);
        halves += 2 * below as u128 + (not_above - below) as u128;
    }
    let total = 2 * same.len() as u128 * diff.len() as u128;
    Ok(halves as f64 / total as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucTable {
    pub model: String,
    /// Half-widths of the viewing range, degrees, strictly increasing.
    pub radii: Vec<f64>,
    pub auc_mean: Vec<f64>,
    /// Sample standard deviation over repetitions (0 for a single one).
    pub auc_std: Vec<f64>,
    pub repetitions: usize,
    /// `per_repetition[rep][radius]`.
    pub per_repetition: Vec<Vec<f64>>,
}

impl AucTable {
    pub fn from_repetitions(model: impl Into<String>, radii: Vec<f64>, per_repetition: Vec<Vec<f64>>) -> Result<Self> {
        if per_repetition.is_empty() {
            return invalid("at least one repetition is required");
        }
        if per_repetition.iter().any(|r| r.len() != radii.len()) {
            return invalid("every repetition needs one AUC per radius");
        }
        let n = per_repetition.len() as f64;
        let mut auc_mean = Vec::with_capacity(radii.len());
        let mut auc_std = Vec::with_capacity(radii.len());
        for j in 0..radii.len() {
            let m = per_repetition.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = if per_repetition.len() > 1 {
                per_repetition.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            auc_mean.push(m);
            auc_std.push(var.sqrt());
        }
        let table = AucTable {
            model: model.into(),
            radii,
            auc_mean,
            auc_std,
            repetitions: per_repetition.len(),
            per_repetition,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.radii.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("radii must be strictly increasing");
        }
        if self.auc_mean.len() != self.radii.len() || self.auc_std.len() != self.radii.len() {
            return invalid("AUC columns differ in length from radii");
        }
        if self.auc_mean.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return invalid("AUC entries must lie in [0, 1]");
        }
        Ok(())
    }

    /// Mean AUC at `radius`, if it is one of the table rows.
    pub fn mean_at(&self, radius: f64) -> Option<f64> {
        self.radii
            .iter()
            .position(|r| (r - radius).abs() < 1e-9)
            .map(|i| self.auc_mean[i])
    }

    /// Largest rise of the mean AUC from one radius to the next (0 if it never rises).
    pub fn worst_increase(&self) -> f64 {
        self.auc_mean
            .windows(2)
            .fold(0.0f64, |m, w| m.max(w[1] - w[0]))
    }
}

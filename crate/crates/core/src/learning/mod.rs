//! Online learning rules, batch PCA / whitening oracles, and per-identity
//! template bases.

pub mod pca;
pub mod rules;
pub mod train;
pub mod whitening;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::dot;

pub use pca::{batch_pca, covariance, reflection_adapted_pca, CovariancePack, PcaOptions, PcaRoute};
pub use rules::{vector_field, FieldAux, LearningRate, Rule, RuleState, VectorField};
pub use train::{train_basis, view_based_basis, TrainOptions};
pub use whitening::{zca_whiten, WhiteningTransform};

/// How a basis was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisRule {
    /// Stored encoded views.
    ViewBased,
    /// Batch eigendecomposition of the orbit covariance.
    Pca,
    Hebb,
    Oja,
    Sanger,
    Foldiak,
    Ica,
}

impl BasisRule {
    pub fn name(self) -> &'static str {
        match self {
            BasisRule::ViewBased => "view_based",
            BasisRule::Pca => "pca",
            BasisRule::Hebb => "hebb",
            BasisRule::Oja => "oja",
            BasisRule::Sanger => "sanger",
            BasisRule::Foldiak => "foldiak",
            BasisRule::Ica => "ica",
        }
    }

    pub fn online_rule(self) -> Option<Rule> {
        match self {
            BasisRule::Hebb => Some(Rule::Hebb),
            BasisRule::Oja => Some(Rule::Oja),
            BasisRule::Sanger => Some(Rule::Sanger),
            BasisRule::Foldiak => Some(Rule::Foldiak),
            BasisRule::Ica => Some(Rule::Ica),
            BasisRule::ViewBased | BasisRule::Pca => None,
        }
    }
}

/// Template vectors for one identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnedBasis {
    pub identity_id: u64,
    pub rule: BasisRule,
    /// One template per row (`r x d`).
    pub vectors: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
    /// Present for ICA: inputs are whitened before projection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub whitening: Option<WhiteningTransform>,
}

impl LearnedBasis {
    pub fn with_identity(mut self, identity_id: u64) -> Self {
        self.identity_id = identity_id;
        self
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    /// Inner products `<x, w_i>` for every template (after whitening, if any).
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        let expected = match &self.whitening {
            Some(t) => t.dim(),
            None => self.dim(),
        };
        if x.len() != expected {
            return invalid(format!(
                "input has dimension {}, basis expects {expected}",
                x.len()
            ));
        }
        Ok(match &self.whitening {
            Some(t) => {
                let z = t.apply(x);
                self.vectors.iter().map(|w| dot(&z, w)).collect()
            }
            None => self.vectors.iter().map(|w| dot(x, w)).collect(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.vectors.is_empty() {
            return invalid("basis must hold at least one vector");
        }
        let d = self.dim();
        if self.vectors.iter().any(|v| v.len() != d || v.iter().any(|x| !x.is_finite())) {
            return invalid("basis rows must be finite with a common dimension");
        }
        if let Some(ev) = &self.eigenvalues {
            if ev.len() != self.vectors.len() {
                return invalid("eigenvalue count differs from vector count");
            }
            if ev.iter().any(|v| !(*v >= 0.0)) || ev.windows(2).any(|w| w[0] < w[1]) {
                return invalid("eigenvalues must be non-negative and non-increasing");
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let b: LearnedBasis = serde_json::from_str(s)?;
        b.validate()?;
        Ok(b)
    }
}

impl AsRef<[f64]> for crate::encoder::FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

//! Pooled signatures: `mu_k(x) = pool_i eta(<x, w_i^k>)`.
//!
//! [`simple_responses`] exposes the pre-pooling stage, one row per template
//! identity; [`signature`] pools each row to a single number.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};
use crate::learning::LearnedBasis;
use crate::linalg::standardize;

pub use crate::learning::view_based_basis;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    Square,
    Abs,
    HalfWave,
    /// Linear response; only meaningful as a contrast to the even choices.
    Identity,
}

impl Nonlinearity {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Nonlinearity::Square => z * z,
            Nonlinearity::Abs => z.abs(),
            Nonlinearity::HalfWave => z.max(0.0),
            Nonlinearity::Identity => z,
        }
    }

    pub fn is_even(self) -> bool {
        matches!(self, Nonlinearity::Square | Nonlinearity::Abs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    Mean,
    Sum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignatureSpec {
    pub nonlinearity: Nonlinearity,
    pub pooling: Pooling,
    /// Standardize the input (zero mean, unit std) before the dot products.
    pub normalize_input: bool,
}

impl Default for SignatureSpec {
    fn default() -> Self {
        SignatureSpec {
            nonlinearity: Nonlinearity::Square,
            pooling: Pooling::Mean,
            normalize_input: true,
        }
    }
}

impl SignatureSpec {
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("spec serializes"));
        hex::encode(&h.finalize()[..8])
    }
}

/// `eta(<x, w_i^k>)` indexed `[k][i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageResponses {
    pub rows: Vec<Vec<f64>>,
}

impl StageResponses {
    /// All entries, row by row.
    pub fn flatten(&self) -> Vec<f64> {
        self.rows.iter().flatten().copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    pub values: Vec<f64>,
    pub spec_fingerprint: String,
}

fn prepare_input<'a>(x: &'a [f64], spec: &SignatureSpec) -> std::borrow::Cow<'a, [f64]> {
    if spec.normalize_input {
        // a constant input has no shape; leave it centred at zero
        match standardize(x) {
            Some(s) => std::borrow::Cow::Owned(s),
            None => std::borrow::Cow::Owned(vec![0.0; x.len()]),
        }
    } else {
        std::borrow::Cow::Borrowed(x)
    }
}

pub fn simple_responses(
    x: &[f64],
    bases: &[LearnedBasis],
    spec: &SignatureSpec,
) -> Result<StageResponses> {
    if bases.is_empty() {
        return invalid("at least one basis is required");
    }
    let input = prepare_input(x, spec);
    let rows = bases
        .iter()
        .map(|b| {
            Ok(b.project(&input)?
                .into_iter()
                .map(|z| spec.nonlinearity.apply(z))
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(StageResponses { rows })
}

pub fn pool(responses: &StageResponses, pooling: Pooling) -> Vec<f64> {
    responses
        .rows
        .iter()
        .map(|row| {
            let s: f64 = row.iter().sum();
            match pooling {
                Pooling::Sum => s,
                Pooling::Mean => s / row.len() as f64,
            }
        })
        .collect()
}

pub fn signature(x: &[f64], bases: &[LearnedBasis], spec: &SignatureSpec) -> Result<Signature> {
    let resp = simple_responses(x, bases, spec)?;
    Ok(Signature {
        values: pool(&resp, spec.pooling),
        spec_fingerprint: spec.fingerprint(),
    })
}

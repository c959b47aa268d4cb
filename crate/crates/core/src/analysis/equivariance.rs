//! Numerical check that a learning rule's vector field commutes with the
//! feature reflection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::encoder::FeatureReflection;
use crate::learning::{FieldAux, VectorField};
use crate::linalg::norm;

const EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct FieldSample {
    pub w: Vec<f64>,
    pub x: Vec<f64>,
    pub aux: FieldAux,
}

/// `max ||f(sigma w, x) - sigma f(w, sigma x)|| / (||f(w, sigma x)|| + eps)`.
///
/// Auxiliary weights move with `w`, auxiliary inputs move with `x`.
pub fn equivariance_residual(
    field: &dyn VectorField,
    sigma: &FeatureReflection,
    samples: &[FieldSample],
) -> f64 {
    samples
        .iter()
        .map(|s| {
            let lhs = field.field(&sigma.apply(&s.w), &s.x, &s.aux.act_on_weights(sigma));
            let inner = field.field(&s.w, &sigma.apply(&s.x), &s.aux.act_on_data(sigma));
            let rhs = sigma.apply(&inner);
            let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
            norm(&diff) / (norm(&inner) + EPS)
        })
        .fold(0.0, f64::max)
}

/// Gaussian `(w, x)` pairs with two preceding units and a three-step input
/// history, so every rule's auxiliary inputs are exercised.
pub fn random_samples(dim: usize, n: usize, trace_decay: f64, seed: u64) -> Vec<FieldSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..dim).map(|_| StandardNormal.sample(rng)).collect()
    };
    (0..n)
        .map(|_| {
            let w = v(&mut rng);
            let x = v(&mut rng);
            let preceding = vec![v(&mut rng), v(&mut rng)];
            let history = vec![v(&mut rng), v(&mut rng), v(&mut rng)];
            FieldSample {
                w,
                x,
                aux: FieldAux {
                    preceding,
                    history,
                    trace_decay,
                },
            }
        })
        .collect()
}

/// `f(w, x) = x + c`: equivariant only when `sigma c = c`. A negative control.
#[derive(Clone, Debug)]
pub struct OffsetField {
    pub offset: Vec<f64>,
}

impl OffsetField {
    /// Offset concentrated on the first coordinate, which any non-trivial
    /// reflection moves.
    pub fn lopsided(dim: usize, magnitude: f64) -> Self {
        let mut offset = vec![0.0; dim];
        offset[0] = magnitude;
        OffsetField { offset }
    }
}

impl VectorField for OffsetField {
    fn field(&self, _w: &[f64], x: &[f64], _aux: &FieldAux) -> Vec<f64> {
        x.iter().zip(&self.offset).map(|(a, c)| a + c).collect()
    }

    fn label(&self) -> String {
        "offset_control".into()
    }
}

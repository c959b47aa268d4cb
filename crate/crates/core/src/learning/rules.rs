//! Online Hebbian-family update rules and their raw vector fields.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::encoder::FeatureReflection;
use crate::error::{invalid, Error, Result};
use crate::linalg::{axpy, dot, normalize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Hebb,
    Oja,
    Sanger,
    Foldiak,
    Ica,
}

impl Rule {
    pub const ALL: [Rule; 5] = [Rule::Hebb, Rule::Oja, Rule::Sanger, Rule::Foldiak, Rule::Ica];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Hebb => "hebb",
            Rule::Oja => "oja",
            Rule::Sanger => "sanger",
            Rule::Foldiak => "foldiak",
            Rule::Ica => "ica",
        }
    }
}

/// `alpha_t = initial / (1 + t / tau)`; `tau = inf` gives a constant rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningRate {
    pub initial: f64,
    pub tau: f64,
}

impl Default for LearningRate {
    fn default() -> Self {
        LearningRate {
            initial: 0.05,
            tau: 1000.0,
        }
    }
}

impl LearningRate {
    pub fn constant(alpha: f64) -> Self {
        LearningRate {
            initial: alpha,
            tau: f64::INFINITY,
        }
    }

    pub fn at(&self, step: u64) -> f64 {
        self.initial / (1.0 + step as f64 / self.tau)
    }
}

/// Weights and bookkeeping for one online learner.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleState {
    pub rule: Rule,
    /// One row per unit.
    pub weights: Vec<Vec<f64>>,
    pub step_count: u64,
    pub learning_rate: LearningRate,
    /// Running response average, one per unit (Foldiak).
    pub trace: Vec<f64>,
    pub trace_decay: f64,
    /// Rescale rows to unit norm after each Hebb/Foldiak step.
    pub renormalize: bool,
}

impl RuleState {
    pub fn new(rule: Rule, weights: Vec<Vec<f64>>, learning_rate: LearningRate) -> Result<Self> {
        if weights.is_empty() {
            return invalid("rule state needs at least one unit");
        }
        let d = weights[0].len();
        if d == 0 || weights.iter().any(|w| w.len() != d) {
            return invalid("all weight rows must share a non-zero dimension");
        }
        if weights.iter().flatten().any(|v| !v.is_finite()) {
            return invalid("weights must be finite");
        }
        let r = weights.len();
        Ok(RuleState {
            rule,
            weights,
            step_count: 0,
            learning_rate,
            trace: vec![0.0; r],
            trace_decay: 0.2,
            renormalize: false,
        })
    }

    /// `r` random unit rows from a seeded Gaussian.
    pub fn random(
        rule: Rule,
        r: usize,
        d: usize,
        seed: u64,
        learning_rate: LearningRate,
    ) -> Result<Self> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..r)
            .map(|_| {
                let mut w: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                normalize(&mut w);
                w
            })
            .collect();
        Self::new(rule, weights, learning_rate)
    }

    pub fn with_trace_decay(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return invalid(format!("trace decay must be in (0, 1], got {delta}"));
        }
        self.trace_decay = delta;
        Ok(self)
    }

    pub fn with_renormalize(mut self, on: bool) -> Self {
        self.renormalize = on;
        self
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return invalid(format!(
                "input has dimension {}, weights have {}",
                x.len(),
                self.dim()
            ));
        }
        Ok(())
    }

    fn alpha(&self) -> f64 {
        self.learning_rate.at(self.step_count)
    }

    fn finish(&mut self) -> Result<()> {
        if self.weights.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NumericOverflow {
                step: self.step_count,
                detail: format!("{} update produced a non-finite weight", self.rule.name()),
            });
        }
        self.step_count += 1;
        Ok(())
    }

    fn maybe_renormalize(&mut self) {
        if self.renormalize {
            self.weights.iter_mut().for_each(|w| {
                normalize(w);
            });
        }
    }

    /// Apply the update of `self.rule`.
    pub fn step(&mut self, x: &[f64]) -> Result<()> {
        match self.rule {
            Rule::Hebb => self.hebb_step(x),
            Rule::Oja => self.oja_step(x),
            Rule::Sanger => self.sanger_step(x),
            Rule::Foldiak => self.foldiak_step(x),
            Rule::Ica => self.ica_step(x),
        }
    }

    /// `w += alpha <x, w> x` per row.
    pub fn hebb_step(&mut self, x: &[f64]) -> Result<()> {
        self.check_dim(x)?;
        let alpha = self.alpha();
        for w in &mut self.weights {
            let y = dot(x, w);
            axpy(alpha * y, x, w);
        }
        self.maybe_renormalize();
        self.finish()
    }

    /// `w += alpha (x y - y^2 w)` per row.
    pub fn oja_step(&mut self, x: &[f64]) -> Result<()> {
        self.check_dim(x)?;
        let alpha = self.alpha();
        for w in &mut self.weights {
            let y = dot(x, w);
            for (wi, xi) in w.iter_mut().zip(x) {
                *wi += alpha * (xi * y - y * y * *wi);
            }
        }
        self.finish()
    }

    /// Generalized Hebbian rule: `dw_i = alpha y_i (x - sum_{j<=i} y_j w_j)`.
    pub fn sanger_step(&mut self, x: &[f64]) -> Result<()> {
        self.check_dim(x)?;
        let alpha = self.alpha();
        let ys: Vec<f64> = self.weights.iter().map(|w| dot(x, w)).collect();
        let mut residual = x.to_vec();
        let mut deltas = Vec::with_capacity(self.weights.len());
        for (i, w) in self.weights.iter().enumerate() {
            axpy(-ys[i], w, &mut residual);
            deltas.push(residual.iter().map(|r| alpha * ys[i] * r).collect::<Vec<f64>>());
        }
        for (w, d) in self.weights.iter_mut().zip(&deltas) {
            axpy(1.0, d, w);
        }
        self.finish()
    }

    /// Trace rule: `ybar = (1 - delta) ybar + delta <w, x>`, then `w += alpha ybar x`.
    pub fn foldiak_step(&mut self, x: &[f64]) -> Result<()> {
        self.check_dim(x)?;
        let alpha = self.alpha();
        let delta = self.trace_decay;
        for (w, ybar) in self.weights.iter_mut().zip(self.trace.iter_mut()) {
            *ybar = (1.0 - delta) * *ybar + delta * dot(w, x);
            axpy(alpha * *ybar, x, w);
        }
        self.maybe_renormalize();
        self.finish()
    }

    /// Kurtosis ascent `w += alpha (<x, w>^3 x - w)`, then rows are
    /// orthogonalized against earlier rows (deflation) and set to unit norm.
    pub fn ica_step(&mut self, x: &[f64]) -> Result<()> {
        self.check_dim(x)?;
        let alpha = self.alpha();
        for i in 0..self.weights.len() {
            let (done, rest) = self.weights.split_at_mut(i);
            let w = &mut rest[0];
            let y = dot(x, w);
            let y3 = y * y * y;
            for (wi, xi) in w.iter_mut().zip(x) {
                *wi += alpha * (y3 * xi - *wi);
            }
            for prev in done.iter() {
                let p = dot(w, prev);
                axpy(-p, prev, w);
            }
            normalize(w);
        }
        self.finish()
    }

    pub fn reset_trace(&mut self) {
        self.trace.iter_mut().for_each(|t| *t = 0.0);
    }
}

/// Extra inputs some vector fields depend on.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FieldAux {
    /// Earlier units (Sanger deflation). Transforms like weights.
    pub preceding: Vec<Vec<f64>>,
    /// Inputs presented before `x`, oldest first (Foldiak trace). Transforms like data.
    pub history: Vec<Vec<f64>>,
    pub trace_decay: f64,
}

impl FieldAux {
    pub fn act_on_weights(&self, sigma: &FeatureReflection) -> FieldAux {
        FieldAux {
            preceding: self.preceding.iter().map(|p| sigma.apply(p)).collect(),
            ..self.clone()
        }
    }

    pub fn act_on_data(&self, sigma: &FeatureReflection) -> FieldAux {
        FieldAux {
            history: self.history.iter().map(|h| sigma.apply(h)).collect(),
            ..self.clone()
        }
    }
}

/// The instantaneous update direction `f(w, x)` of a learning rule.
pub trait VectorField: Sync {
    fn field(&self, w: &[f64], x: &[f64], aux: &FieldAux) -> Vec<f64>;

    fn label(&self) -> String;
}

impl VectorField for Rule {
    fn field(&self, w: &[f64], x: &[f64], aux: &FieldAux) -> Vec<f64> {
        vector_field(*self, w, x, aux)
    }

    fn label(&self) -> String {
        self.name().to_string()
    }
}

/// Raw field of `rule`: no step size, no renormalization.
pub fn vector_field(rule: Rule, w: &[f64], x: &[f64], aux: &FieldAux) -> Vec<f64> {
    let y = dot(x, w);
    match rule {
        Rule::Hebb => x.iter().map(|xi| y * xi).collect(),
        Rule::Oja => x.iter().zip(w).map(|(xi, wi)| y * (xi - y * wi)).collect(),
        Rule::Sanger => {
            let mut residual = x.to_vec();
            for p in &aux.preceding {
                axpy(-dot(p, x), p, &mut residual);
            }
            axpy(-y, w, &mut residual);
            residual.iter().map(|r| y * r).collect()
        }
        Rule::Foldiak => {
            let delta = if aux.trace_decay > 0.0 { aux.trace_decay } else { 1.0 };
            let mut ybar = 0.0;
            for h in &aux.history {
                ybar = (1.0 - delta) * ybar + delta * dot(w, h);
            }
            ybar = (1.0 - delta) * ybar + delta * y;
            x.iter().map(|xi| ybar * xi).collect()
        }
        Rule::Ica => {
            let y3 = y * y * y;
            x.iter().zip(w).map(|(xi, wi)| y3 * xi - wi).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn state(rule: Rule, w: Vec<f64>, alpha: f64) -> RuleState {
        RuleState::new(rule, vec![w], LearningRate::constant(alpha)).unwrap()
    }

    fn delta_of(rule: Rule, w: Vec<f64>, x: &[f64], alpha: f64) -> Vec<f64> {
        let mut s = state(rule, w.clone(), alpha);
        s.step(x).unwrap();
        crate::linalg::sub(&s.weights[0], &w)
    }

    #[test]
    fn hebb_examples() {
        let d = delta_of(Rule::Hebb, vec![1.0, 0.0], &[1.0, 1.0], 0.1);
        assert!(max_abs_diff(&d, &[0.1, 0.1]) < 1e-15);
        assert_eq!(delta_of(Rule::Hebb, vec![1.0, 0.0], &[0.0, 0.0], 0.1), vec![0.0, 0.0]);
        assert_eq!(delta_of(Rule::Hebb, vec![1.0, 0.0], &[0.0, 3.0], 0.1), vec![0.0, 0.0]);
    }

    #[test]
    fn oja_examples() {
        let d = delta_of(Rule::Oja, vec![1.0, 0.0], &[1.0, 1.0], 0.1);
        assert!(max_abs_diff(&d, &[0.0, 0.1]) < 1e-15);
        assert_eq!(delta_of(Rule::Oja, vec![0.6, 0.8], &[0.0, 0.0], 0.1), vec![0.0, 0.0]);
        let w = vec![0.6, 0.8];
        assert!(max_abs_diff(&delta_of(Rule::Oja, w.clone(), &w, 0.1), &[0.0, 0.0]) < 1e-15);
    }

    #[test]
    fn sanger_single_unit_is_oja() {
        let x = [0.3, -1.2, 0.7];
        let w = vec![0.5, 0.1, -0.2];
        assert_eq!(
            delta_of(Rule::Sanger, w.clone(), &x, 0.05),
            delta_of(Rule::Oja, w, &x, 0.05)
        );
        assert_eq!(delta_of(Rule::Sanger, vec![1.0, 2.0], &[0.0, 0.0], 0.1), vec![0.0, 0.0]);
    }

    #[test]
    fn foldiak_with_full_decay_is_hebb() {
        let x = [0.3, -1.2, 0.7];
        let w = vec![0.5, 0.1, -0.2];
        let mut f = state(Rule::Foldiak, w.clone(), 0.1).with_trace_decay(1.0).unwrap();
        let mut h = state(Rule::Hebb, w, 0.1);
        for _ in 0..3 {
            f.step(&x).unwrap();
            h.step(&x).unwrap();
        }
        assert!(max_abs_diff(&f.weights[0], &h.weights[0]) < 1e-14);
    }

    #[test]
    fn foldiak_zero_input_no_change() {
        let mut f = state(Rule::Foldiak, vec![1.0, 0.0], 0.1);
        f.trace[0] = 0.7;
        f.step(&[0.0, 0.0]).unwrap();
        assert_eq!(f.weights[0], vec![1.0, 0.0]);
    }

    #[test]
    fn ica_examples() {
        let aux = FieldAux::default();
        // orthogonal input: pure decay
        let f = vector_field(Rule::Ica, &[0.6, 0.8], &[0.8, -0.6], &aux);
        assert!(max_abs_diff(&f, &[-0.6, -0.8]) < 1e-15);
        assert_eq!(vector_field(Rule::Ica, &[1.0, 0.0], &[1.0, 0.0], &aux), vec![0.0, 0.0]);
        let mut s = state(Rule::Ica, vec![1.0, 0.0], 0.1);
        s.step(&[1.0, 0.0]).unwrap();
        assert_eq!(s.weights[0], vec![1.0, 0.0]);
    }

    #[test]
    fn field_examples() {
        let aux = FieldAux::default();
        assert_eq!(vector_field(Rule::Oja, &[1.0, 0.0], &[1.0, 1.0], &aux), vec![0.0, 1.0]);
        assert_eq!(vector_field(Rule::Hebb, &[1.0, 0.0], &[0.0, 2.0], &aux), vec![0.0, 0.0]);
    }

    #[test]
    fn hebb_diverges_without_renormalization() {
        let mut s = state(Rule::Hebb, vec![1.0, 0.0], 10.0);
        let x = [1e30, 1e30];
        let err = (0..10).map(|_| s.step(&x)).find(|r| r.is_err());
        assert!(matches!(err, Some(Err(Error::NumericOverflow { .. }))));
    }

    #[test]
    fn renormalized_hebb_stays_unit() {
        let mut s = state(Rule::Hebb, vec![1.0, 0.0], 0.5).with_renormalize(true);
        for _ in 0..50 {
            s.step(&[2.0, 1.0]).unwrap();
        }
        assert!((crate::linalg::norm(&s.weights[0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let mut s = state(Rule::Oja, vec![1.0, 0.0], 0.1);
        assert!(matches!(s.step(&[1.0]), Err(Error::InvalidArgument(_))));
        assert!(RuleState::new(Rule::Oja, vec![], LearningRate::default()).is_err());
        assert!(s.clone().with_trace_decay(0.0).is_err());
    }

    #[test]
    fn schedule_decays() {
        let lr = LearningRate::default();
        assert_eq!(lr.at(0), 0.05);
        assert!((lr.at(1000) - 0.025).abs() < 1e-15);
        assert_eq!(LearningRate::constant(0.3).at(1_000_000), 0.3);
    }
}

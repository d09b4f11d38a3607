//! The interface the trainer needs from a learnable model: a flat parameter
//! vector with a group layout, masked forward evaluation and reverse-mode
//! gradients of the scalar output.

use std::ops::Range;

use crate::symbolic::Expression;

/// Shape of a model's flat parameter vector, as seen by the regularizer.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamLayout {
    pub n_params: usize,
    /// Contiguous, non-overlapping parameter ranges pruned and penalized as a unit.
    pub groups: Vec<Range<usize>>,
    /// Weights that carry their own ℓ1 penalty and can be pruned one by one.
    pub prunable: Vec<bool>,
    /// Weights counted as graph connections (biases are not).
    pub connection: Vec<bool>,
}

impl ParamLayout {
    /// Group index of every parameter, `None` for ungrouped ones.
    pub fn group_of(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.n_params];
        for (g, r) in self.groups.iter().enumerate() {
            for slot in &mut out[r.clone()] {
                *slot = Some(g);
            }
        }
        out
    }
}

pub trait Model: Clone + Send + Sync {
    /// Per-sample cache filled by `eval` and consumed by `accumulate_gradient`.
    type Trace: Default + Send;

    fn n_inputs(&self) -> usize;
    fn layout(&self) -> ParamLayout;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, p: &[f64]);
    /// Effective per-parameter mask (weight bit and group bit combined).
    fn active(&self) -> Vec<bool>;
    fn group_active(&self) -> Vec<bool>;
    /// Intersects the current masks with `keep`/`keep_group`, removes paths
    /// that no longer reach the output, and zeroes every masked parameter.
    fn apply_masks(&mut self, keep: &[bool], keep_group: &[bool]);
    fn eval(&self, x: &[f64], trace: &mut Self::Trace) -> f64;
    /// Adds `scale · ∂ŷ/∂w` to `grad` for every active parameter; inactive
    /// positions are left untouched.
    fn accumulate_gradient(&self, trace: &Self::Trace, scale: f64, grad: &mut [f64]);
    /// Rewrites the parameters of a model trained on `x / input_scale`
    /// predicting `y / output_scale` so that it maps raw `x` to raw `y`.
    /// Returns the per-parameter multiplier that was applied.
    fn fold_scaling(&mut self, input_scale: &[f64], output_scale: f64) -> Vec<f64>;
    fn expression(&self) -> Expression;
    fn active_connections(&self) -> usize;
}

//! Equation discovery with MathONet super-graphs pruned by sparse group
//! Bayesian learning.
//!
//! A [`MathONet`] alternates PolyNets (affine maps over the inputs that
//! multiply the previous layer) with OperNets (masked sums of unary
//! functions). Training starts from the dense graph, runs a sparse group
//! Lasso cycle, then alternates reweighted training with evidence-based
//! pruning until a small sub-graph remains; [`symbolic`] turns that
//! sub-graph into a readable expression.

pub mod bayes;
pub mod benchmarks;
pub mod error;
pub mod grad;
pub mod hybrid;
pub mod io;
pub mod mathonet;
pub mod model;
pub mod par;
pub mod symbolic;
pub mod trainer;
pub mod validation;

pub use error::{Error, Result};
pub use mathonet::{MathONet, UnaryKind};
pub use model::{Model, ParamLayout};
pub use symbolic::Expression;

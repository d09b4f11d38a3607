//! Sparse group Bayesian learning bookkeeping: prior variances ν, posterior
//! variances ζ, reweighting factors α/β, the pruning masks, and the two
//! training losses.

use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::model::ParamLayout;

pub const BETA_MIN: f64 = 1e-6;
pub const BETA_MAX: f64 = 1e6;
pub const DEFAULT_KAPPA: f64 = 1e3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskDecision {
    pub mask: Vec<bool>,
    pub group_mask: Vec<bool>,
}

impl MaskDecision {
    pub fn all_on(n_params: usize, n_groups: usize) -> Self {
        Self {
            mask: vec![true; n_params],
            group_mask: vec![true; n_groups],
        }
    }
}

/// Per-weight and per-group hyper-parameters of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegState {
    pub nu: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub zeta: Vec<f64>,
    pub nu_g: Vec<f64>,
    pub alpha_g: Vec<f64>,
    pub beta_g: Vec<f64>,
    pub kappa: f64,
    pub kappa_g: f64,
    pub lambda: f64,
    pub lambda_g: f64,
    pub masks: MaskDecision,
    #[serde(skip)]
    pub groups: Vec<Range<usize>>,
    #[serde(skip)]
    pub prunable: Vec<bool>,
}

impl RegState {
    /// β = ν = 1 everywhere, ζ = ν, α = 0, every mask on.
    pub fn new(layout: &ParamLayout, kappa: f64, kappa_g: f64, lambda: f64, lambda_g: f64) -> Self {
        let n = layout.n_params;
        let m = layout.groups.len();
        Self {
            nu: vec![1.0; n],
            alpha: vec![0.0; n],
            beta: vec![1.0; n],
            zeta: vec![1.0; n],
            nu_g: vec![1.0; m],
            alpha_g: vec![0.0; m],
            beta_g: vec![1.0; m],
            kappa,
            kappa_g,
            lambda,
            lambda_g,
            masks: MaskDecision::all_on(n, m),
            groups: layout.groups.clone(),
            prunable: layout.prunable.clone(),
        }
    }

    /// One hyper-parameter update: ζ from (ν, H), then α/β, then ν from the
    /// current weights, then the pruning masks. `active`/`group_active` are
    /// the model's current masks; pruned entries get ν = ζ = 0.
    pub fn update(&mut self, w: &[f64], h: &[f64], active: &[bool], group_active: &[bool]) {
        for i in 0..w.len() {
            if !active[i] {
                self.kill(i);
                continue;
            }
            self.zeta[i] = update_zeta(self.nu[i], h[i]);
            let (a, b) = update_alpha_beta(self.nu[i], self.zeta[i]);
            self.alpha[i] = a;
            self.beta[i] = b;
        }
        for (g, range) in self.groups.iter().enumerate() {
            if !group_active[g] {
                self.alpha_g[g] = f64::INFINITY;
                self.beta_g[g] = BETA_MAX;
                self.nu_g[g] = 0.0;
                continue;
            }
            let members: Vec<f64> = range
                .clone()
                .filter(|&i| active[i])
                .map(|i| update_zeta(self.nu_g[g], h[i]))
                .collect();
            let (a, b) = update_group_alpha(self.nu_g[g], &members);
            self.alpha_g[g] = a;
            self.beta_g[g] = b;
        }
        let (nu, nu_g) = update_nu(w, &self.beta, &self.groups, &self.beta_g);
        for i in 0..w.len() {
            self.nu[i] = if active[i] { nu[i] } else { 0.0 };
        }
        for g in 0..self.groups.len() {
            self.nu_g[g] = if group_active[g] { nu_g[g] } else { 0.0 };
        }
        let prev = MaskDecision {
            mask: active.to_vec(),
            group_mask: group_active.to_vec(),
        };
        // Non-prunable weights are judged only through their group.
        let alpha: Vec<f64> = self
            .alpha
            .iter()
            .zip(&self.prunable)
            .map(|(&a, &p)| if p { a } else { 0.0 })
            .collect();
        self.masks = update_masks(&alpha, &self.alpha_g, self.kappa, self.kappa_g, &prev, &self.groups);
    }

    fn kill(&mut self, i: usize) {
        self.nu[i] = 0.0;
        self.zeta[i] = 0.0;
        self.alpha[i] = f64::INFINITY;
        self.beta[i] = BETA_MAX;
    }

    /// Penalty term of the reweighted loss and its subgradient, added to `grad`.
    pub fn penalty_and_grad(&self, w: &[f64], active: &[bool], group_active: &[bool], grad: &mut [f64]) -> f64 {
        penalty_grad(
            w,
            active,
            group_active,
            &self.groups,
            &self.prunable,
            |i| self.beta[i],
            |g| self.beta_g[g],
            self.lambda,
            self.lambda_g,
            grad,
        )
    }

    /// Same penalty with β ≡ 1: the sparse group Lasso of the first cycle.
    pub fn sgl_penalty_and_grad(&self, w: &[f64], active: &[bool], group_active: &[bool], grad: &mut [f64]) -> f64 {
        penalty_grad(
            w,
            active,
            group_active,
            &self.groups,
            &self.prunable,
            |_| 1.0,
            |_| 1.0,
            self.lambda,
            self.lambda_g,
            grad,
        )
    }
}

#[allow(clippy::too_many_arguments)]
fn penalty_grad(
    w: &[f64],
    active: &[bool],
    group_active: &[bool],
    groups: &[Range<usize>],
    prunable: &[bool],
    beta: impl Fn(usize) -> f64,
    beta_g: impl Fn(usize) -> f64,
    lambda: f64,
    lambda_g: f64,
    grad: &mut [f64],
) -> f64 {
    let mut pen = 0.0;
    if lambda > 0.0 {
        for i in 0..w.len() {
            if active[i] && prunable[i] {
                let c = lambda * beta(i);
                pen += c * w[i].abs();
                grad[i] += c * sign(w[i]);
            }
        }
    }
    if lambda_g > 0.0 {
        for (g, range) in groups.iter().enumerate() {
            if !group_active[g] {
                continue;
            }
            let norm = range
                .clone()
                .filter(|&i| active[i])
                .map(|i| w[i] * w[i])
                .sum::<f64>()
                .sqrt();
            let c = lambda_g * beta_g(g);
            pen += c * norm;
            if norm > 0.0 {
                for i in range.clone().filter(|&i| active[i]) {
                    grad[i] += c * w[i] / norm;
                }
            }
        }
    }
    pen
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `ζ = 1/(1/ν + H)`; a dead weight (`ν = 0`) returns 0.
pub fn update_zeta(nu: f64, h: f64) -> f64 {
    if nu <= 0.0 {
        return 0.0;
    }
    if h <= 0.0 {
        return nu;
    }
    (1.0 / (1.0 / nu + h)).min(nu)
}

/// `α = −ζ/ν² + 1/ν`, `β = √|α|` clipped to `[BETA_MIN, BETA_MAX]`.
/// A dead weight (`ν = 0`) gets `α = ∞`.
pub fn update_alpha_beta(nu: f64, zeta: f64) -> (f64, f64) {
    if nu <= 0.0 {
        return (f64::INFINITY, BETA_MAX);
    }
    let alpha = (nu - zeta) / (nu * nu);
    (alpha, clip_beta(alpha.abs().sqrt()))
}

/// `α_g = Σ_i (−ζ_gi/ν_g² + 1/ν_g)` with a single shared `β_g`.
pub fn update_group_alpha(nu_g: f64, zeta_g: &[f64]) -> (f64, f64) {
    if nu_g <= 0.0 {
        return (f64::INFINITY, BETA_MAX);
    }
    let alpha: f64 = zeta_g.iter().map(|z| (nu_g - z) / (nu_g * nu_g)).sum();
    (alpha, clip_beta(alpha.abs().sqrt()))
}

fn clip_beta(b: f64) -> f64 {
    if b.is_nan() {
        BETA_MAX
    } else {
        b.clamp(BETA_MIN, BETA_MAX)
    }
}

/// `ν_i = |W_i|/β_i`, `ν_g = ‖W_g‖₂/β_g`.
pub fn update_nu(w: &[f64], beta: &[f64], groups: &[Range<usize>], beta_g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let nu = w.iter().zip(beta).map(|(w, b)| w.abs() / b).collect();
    let nu_g = groups
        .iter()
        .zip(beta_g)
        .map(|(r, b)| w[r.clone()].iter().map(|v| v * v).sum::<f64>().sqrt() / b)
        .collect();
    (nu, nu_g)
}

/// Thresholds α against κ, intersects with `prev` and lets a removed group
/// switch off all of its members.
pub fn update_masks(
    alpha: &[f64],
    alpha_g: &[f64],
    kappa: f64,
    kappa_g: f64,
    prev: &MaskDecision,
    groups: &[Range<usize>],
) -> MaskDecision {
    let mut mask: Vec<bool> = alpha.iter().zip(&prev.mask).map(|(&a, &p)| p && !(a > kappa)).collect();
    let group_mask: Vec<bool> = alpha_g
        .iter()
        .zip(&prev.group_mask)
        .map(|(&a, &p)| p && !(a > kappa_g))
        .collect();
    for (g, range) in groups.iter().enumerate() {
        if !group_mask[g] {
            mask[range.clone()].iter_mut().for_each(|m| *m = false);
        }
    }
    MaskDecision { mask, group_mask }
}

/// `E + λ Σ|W| + λ_g Σ_g ‖W_g‖₂`.
pub fn loss_sgl(e: f64, w: &[f64], groups: &[Range<usize>], lambda: f64, lambda_g: f64) -> f64 {
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    let l2: f64 = groups
        .iter()
        .map(|r| w[r.clone()].iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum();
    e + lambda * l1 + lambda_g * l2
}

/// `E + λ Σ β_i C_i |W_i| + λ_g Σ_g β_g ‖C_g ⊙ W_g‖₂`.
#[allow(clippy::too_many_arguments)]
pub fn loss_bayes(
    e: f64,
    w: &[f64],
    c: &[bool],
    beta: &[f64],
    groups: &[Range<usize>],
    c_g: &[bool],
    beta_g: &[f64],
    lambda: f64,
    lambda_g: f64,
) -> f64 {
    let l1: f64 = w
        .iter()
        .zip(c)
        .zip(beta)
        .map(|((w, &c), b)| if c { (b * w).abs() } else { 0.0 })
        .sum();
    let l2: f64 = groups
        .iter()
        .enumerate()
        .map(|(g, r)| {
            if !c_g[g] {
                return 0.0;
            }
            beta_g[g] * w[r.clone()].iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .sum();
    e + lambda * l1 + lambda_g * l2
}

//! Reaction–diffusion hybrid: a learnable 3-point stencil scaled by an outer
//! coefficient, plus a MathONet reaction term in the local value `p_i`.
//!
//! ```text
//! ∂p_i/∂t ≈ w_c · (s₁ p_{i−1} + s₂ p_i + s₃ p_{i+1}) / Δx² + R(p_i)
//! ```
//!
//! Training rows are the windows `(p_{i−1}, p_i, p_{i+1})`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{Dataset, Grid};
use crate::error::{check_len, Error, Result};
use crate::mathonet::{bit, EvalTrace, MathONet, UnaryKind};
use crate::model::{Model, ParamLayout};
use crate::par::Exec;
use crate::trainer::{self, Discovery, TrainConfig};
use crate::symbolic::{self, Expression};

const N_HEAD: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StencilModel {
    pub kernel: [f64; 3],
    pub outer_coeff: f64,
    pub dx: f64,
    #[serde(with = "bit", default = "bit::one", skip_serializing_if = "bit::is_one")]
    pub kernel_mask: bool,
    #[serde(with = "bit", default = "bit::one", skip_serializing_if = "bit::is_one")]
    pub outer_mask: bool,
    #[serde(flatten)]
    pub reaction: MathONet,
}

#[derive(Clone, Debug, Default)]
pub struct StencilTrace {
    pub window: [f64; 3],
    /// Kernel applied to the window, already divided by Δx².
    pub lap: f64,
    pub reaction: EvalTrace,
}

/// `(s₁p_{i−1} + s₂p_i + s₃p_{i+1})/Δx²` for every interior point.
pub fn stencil_apply(kernel: &[f64; 3], p: &[f64], dx: f64) -> Result<Vec<f64>> {
    if p.len() < 3 {
        return Err(Error::Structure(format!("stencil needs at least 3 grid points, got {}", p.len())));
    }
    let inv = 1.0 / (dx * dx);
    Ok(p.windows(3)
        .map(|w| (kernel[0] * w[0] + kernel[1] * w[1] + kernel[2] * w[2]) * inv)
        .collect())
}

impl StencilModel {
    pub fn new(kernel: [f64; 3], outer_coeff: f64, dx: f64, reaction: MathONet) -> Result<Self> {
        let m = Self {
            kernel,
            outer_coeff,
            dx,
            kernel_mask: true,
            outer_mask: true,
            reaction,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn random<R: Rng + ?Sized>(
        dx: f64,
        hidden: &[usize],
        unary_set: &[UnaryKind],
        init_range: f64,
        rng: &mut R,
    ) -> Self {
        let kernel = [
            rng.random_range(-init_range..init_range),
            rng.random_range(-init_range..init_range),
            rng.random_range(-init_range..init_range),
        ];
        let outer_coeff = rng.random_range(-init_range..init_range);
        let reaction = MathONet::random(1, hidden, unary_set, init_range, rng);
        Self {
            kernel,
            outer_coeff,
            dx,
            kernel_mask: true,
            outer_mask: true,
            reaction,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0) {
            return Err(Error::Structure("grid spacing must be positive".into()));
        }
        check_len("reaction inputs", 1, self.reaction.n_inputs)?;
        self.reaction.validate()
    }

    fn stencil_on(&self) -> bool {
        self.kernel_mask && self.outer_mask
    }

    /// Predicted `∂p/∂t` at every interior point of the grid `p`.
    pub fn hybrid_forward(&self, p: &[f64]) -> Result<Vec<f64>> {
        if p.len() < 3 {
            return Err(Error::Structure(format!("stencil needs at least 3 grid points, got {}", p.len())));
        }
        let mut trace = StencilTrace::default();
        Ok(p.windows(3).map(|w| self.eval(w, &mut trace)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }
}

impl Model for StencilModel {
    type Trace = StencilTrace;

    fn n_inputs(&self) -> usize {
        3
    }

    fn layout(&self) -> ParamLayout {
        let inner = self.reaction.layout();
        let n = N_HEAD + inner.n_params;
        let mut groups = vec![0..3, 3..4];
        groups.extend(inner.groups.iter().map(|r| r.start + N_HEAD..r.end + N_HEAD));
        let mut prunable = vec![false, false, false, true];
        prunable.extend(inner.prunable);
        let mut connection = vec![true; N_HEAD];
        connection.extend(inner.connection);
        ParamLayout {
            n_params: n,
            groups,
            prunable,
            connection,
        }
    }

    fn params(&self) -> Vec<f64> {
        let mut p = self.kernel.to_vec();
        p.push(self.outer_coeff);
        p.extend(self.reaction.params());
        p
    }

    fn set_params(&mut self, p: &[f64]) {
        self.kernel.copy_from_slice(&p[..3]);
        self.outer_coeff = p[3];
        self.reaction.set_params(&p[N_HEAD..]);
    }

    fn active(&self) -> Vec<bool> {
        let on = self.stencil_on();
        let mut a = vec![on; N_HEAD];
        a.extend(self.reaction.active());
        a
    }

    fn group_active(&self) -> Vec<bool> {
        let on = self.stencil_on();
        let mut g = vec![on, on];
        g.extend(self.reaction.group_active());
        g
    }

    fn apply_masks(&mut self, keep: &[bool], keep_group: &[bool]) {
        self.kernel_mask &= keep_group[0];
        self.outer_mask &= keep_group[1] && keep[3];
        if !self.stencil_on() {
            self.kernel_mask = false;
            self.outer_mask = false;
            self.kernel = [0.0; 3];
            self.outer_coeff = 0.0;
        }
        self.reaction.apply_masks(&keep[N_HEAD..], &keep_group[2..]);
    }

    #[inline]
    fn eval(&self, x: &[f64], trace: &mut StencilTrace) -> f64 {
        trace.window = [x[0], x[1], x[2]];
        let inv = 1.0 / (self.dx * self.dx);
        trace.lap = (self.kernel[0] * x[0] + self.kernel[1] * x[1] + self.kernel[2] * x[2]) * inv;
        let r = self.reaction.eval_into(&x[1..2], &mut trace.reaction);
        if self.stencil_on() {
            self.outer_coeff * trace.lap + r
        } else {
            r
        }
    }

    fn accumulate_gradient(&self, trace: &StencilTrace, scale: f64, grad: &mut [f64]) {
        if self.stencil_on() {
            let inv = 1.0 / (self.dx * self.dx);
            for j in 0..3 {
                grad[j] += scale * self.outer_coeff * trace.window[j] * inv;
            }
            grad[3] += scale * trace.lap;
        }
        self.reaction
            .accumulate_gradient(&trace.reaction, scale, &mut grad[N_HEAD..]);
    }

    fn fold_scaling(&mut self, input_scale: &[f64], output_scale: f64) -> Vec<f64> {
        let mut factors = vec![
            1.0 / input_scale[0],
            1.0 / input_scale[1],
            1.0 / input_scale[2],
            output_scale,
        ];
        for j in 0..3 {
            self.kernel[j] *= factors[j];
        }
        self.outer_coeff *= output_scale;
        factors.extend(self.reaction.fold_scaling(&input_scale[1..2], output_scale));
        factors
    }

    fn expression(&self) -> Expression {
        let reaction = symbolic::extract_expression(&self.reaction).map_vars(&|_| 1);
        if !self.stencil_on() {
            return reaction;
        }
        let inv = 1.0 / (self.dx * self.dx);
        let mut terms: Vec<Expression> = (0..3)
            .map(|j| Expression::Mul(vec![Expression::Const(self.outer_coeff * self.kernel[j] * inv), Expression::Var(j)]))
            .collect();
        terms.push(reaction);
        Expression::Add(terms)
    }

    fn active_connections(&self) -> usize {
        let head = if self.stencil_on() { N_HEAD } else { 0 };
        head + self.reaction.count_active_connections()
    }
}

/// The learned stencil expressed against `[1, −2, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StencilRescale {
    /// `−s₂/2`.
    pub factor: f64,
    pub normalized_kernel: [f64; 3],
    /// `w_c · factor`: diffusion coefficient under the normalized kernel.
    pub d_equiv: f64,
    /// Largest elementwise gap between the normalized kernel and `[1, −2, 1]`.
    pub kernel_deviation: f64,
    /// `Σ s_i`; a non-zero sum acts like an extra linear reaction term.
    pub kernel_sum: f64,
    /// Reaction polynomial coefficients by monomial, stencil path excluded.
    pub reaction_coefficients: Vec<(String, f64)>,
    /// Growth rate seen by a uniform field: the reaction's linear
    /// coefficient plus `w_c · Σs / Δx²`.
    pub r_effective: f64,
    /// Minus the reaction's `p²` coefficient.
    pub r_quadratic: f64,
}

pub fn rescale_stencil(model: &StencilModel) -> Result<StencilRescale> {
    let s2 = model.kernel[1];
    if s2 == 0.0 {
        return Err(Error::DegenerateStencil);
    }
    let factor = -s2 / 2.0;
    let normalized_kernel = model.kernel.map(|s| s / factor);
    let reference = [1.0, -2.0, 1.0];
    let kernel_deviation = normalized_kernel
        .iter()
        .zip(&reference)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let kernel_sum: f64 = model.kernel.iter().sum();
    let expr = symbolic::extract_expression(&model.reaction);
    let reaction_coefficients = symbolic::coefficients(&expr, 0.0);
    let coeff = |name: &str| {
        reaction_coefficients
            .iter()
            .find(|(k, _)| k == name)
            .map_or(0.0, |(_, c)| *c)
    };
    let stencil_lin = if model.stencil_on() {
        model.outer_coeff * kernel_sum / (model.dx * model.dx)
    } else {
        0.0
    };
    Ok(StencilRescale {
        factor,
        normalized_kernel,
        d_equiv: model.outer_coeff * factor,
        kernel_deviation,
        kernel_sum,
        r_effective: coeff("x") + stencil_lin,
        r_quadratic: -coeff("x^2"),
        reaction_coefficients,
    })
}

/// Hybrid discovery on 3-point window rows. `dx` defaults to the grid
/// recorded in the dataset metadata.
pub fn discover_stencil(data: &Dataset, dx: Option<f64>, cfg: &TrainConfig, exec: &Exec) -> Result<Discovery<StencilModel>> {
    check_len("window width", 3, data.n_inputs())?;
    let dx = match dx.or_else(|| data.meta.as_ref()?.grid.as_ref().map(Grid::dx)) {
        Some(dx) if dx > 0.0 => dx,
        _ => return Err(Error::Data("grid spacing unknown: no grid metadata and no dx given".into())),
    };
    trainer::discover_model(data, 0, cfg, exec, |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        StencilModel::random(dx, &cfg.hidden, &cfg.unary_set, cfg.init_range, &mut rng)
    })
}

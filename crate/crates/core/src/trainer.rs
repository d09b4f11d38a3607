//! Cycle/epoch training loop with sparse group Bayesian pruning, the
//! multi-restart λ sweep and Occam model selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::bayes::{RegState, DEFAULT_KAPPA};
use crate::benchmarks::Dataset;
use crate::error::{Error, Result};
use crate::grad::gauss_newton_diag;
use crate::mathonet::{MathONet, UnaryKind};
use crate::model::Model;
use crate::par::Exec;
use crate::symbolic::{self, Expression};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sigma2Mode {
    Residual,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Neurons per hidden layer; its length is the depth.
    pub hidden: Vec<usize>,
    pub unary_set: Vec<UnaryKind>,
    /// Every grid value sets both λ and λ_g (scaled by `lambda_g_ratio`).
    pub lambda_grid: Vec<f64>,
    pub lambda_g_ratio: f64,
    pub decay_every: usize,
    pub decay_factor: f64,
    pub n_cycle: usize,
    pub n_epoch: usize,
    pub kappa: f64,
    pub kappa_g: f64,
    /// Evidence updates (ζ → α,β → ν) iterated per pruning step.
    pub cccp_iters: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Multiplies the learning rate after every cycle.
    pub lr_cycle_decay: f64,
    /// Within a cycle the learning rate follows a cosine from its cycle
    /// value down to this fraction of it; 1 disables the schedule.
    pub lr_floor: f64,
    pub batch_size: usize,
    pub restarts: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub sigma2: Sigma2Mode,
    pub init_range: f64,
    pub normalize_inputs: bool,
    pub normalize_output: bool,
    pub coeff_floor: f64,
    pub decimals: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![3],
            unary_set: UnaryKind::ALL.to_vec(),
            lambda_grid: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10],
            lambda_g_ratio: 1.0,
            decay_every: 200,
            decay_factor: 0.1,
            n_cycle: 12,
            n_epoch: 200,
            kappa: DEFAULT_KAPPA,
            kappa_g: DEFAULT_KAPPA,
            cccp_iters: 1,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            momentum: 0.9,
            lr_cycle_decay: 1.0,
            lr_floor: 1.0,
            batch_size: 32,
            restarts: 10,
            seed: 0,
            train_fraction: 0.9,
            sigma2: Sigma2Mode::Residual,
            init_range: 0.5,
            normalize_inputs: true,
            normalize_output: true,
            coeff_floor: symbolic::DEFAULT_COEFF_FLOOR,
            decimals: 3,
        }
    }
}

impl TrainConfig {
    /// Tuned on the noise-free Lorenz data: a short cosine schedule per
    /// cycle with a hot start, small initial weights and a softer prune.
    pub fn lorenz() -> Self {
        Self {
            lambda_grid: vec![1e-3, 1e-4, 1e-5, 1e-6],
            n_epoch: 600,
            decay_every: 600,
            decay_factor: 0.3,
            kappa: 1e2,
            kappa_g: 1e2,
            cccp_iters: 3,
            learning_rate: 2e-2,
            lr_floor: 0.1,
            init_range: 0.1,
            ..Self::default()
        }
    }

    pub fn lotka_volterra() -> Self {
        Self {
            hidden: vec![2],
            unary_set: vec![UnaryKind::Identity, UnaryKind::Sin, UnaryKind::Cos],
            n_epoch: 800,
            decay_every: 800,
            ..Self::lorenz()
        }
    }

    /// The stencil path is scaled by 1/Δx², so the reaction is a tiny part
    /// of the target. Raw output units keep its weights clear of the prune
    /// threshold, and the low lr floor lets each cycle converge far enough
    /// to resolve it.
    pub fn fisher_kpp() -> Self {
        Self {
            hidden: vec![3],
            unary_set: vec![UnaryKind::Identity, UnaryKind::Sin, UnaryKind::Cos],
            n_epoch: 4000,
            decay_every: 4000,
            lambda_grid: vec![1e-8, 1e-10, 1e-12, 1e-14, 1e-16],
            kappa: 10.0,
            kappa_g: 10.0,
            lr_floor: 1e-4,
            normalize_inputs: false,
            normalize_output: false,
            ..Self::lorenz()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layers must be non-empty with at least one neuron each");
        }
        if self.unary_set.is_empty() {
            return bad("unary_set must not be empty");
        }
        if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|l| !(*l >= 0.0)) {
            return bad("lambda_grid must hold non-negative values");
        }
        if self.n_cycle == 0 || self.n_epoch == 0 || self.decay_every == 0 || self.restarts == 0 || self.batch_size == 0 {
            return bad("n_cycle, n_epoch, decay_every, restarts and batch_size must be ≥ 1");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction must lie in (0, 1)");
        }
        if !(self.kappa > 0.0 && self.kappa_g > 0.0) {
            return bad("pruning thresholds must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if let Sigma2Mode::Fixed(v) = self.sigma2 {
            if !(v > 0.0) {
                return bad("fixed sigma2 must be positive");
            }
        }
        Ok(())
    }
}

/// Which penalty an epoch trains against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Penalty {
    /// `λ‖W‖₁ + λ_g Σ‖W_g‖₂`, the first cycle.
    SparseGroupLasso,
    /// β-reweighted, masked penalty of the later cycles.
    Bayes,
}

/// First/second-moment optimizer state.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    pub lr: f64,
    momentum: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, momentum: f64, n_params: usize) -> Self {
        Self {
            kind,
            lr,
            momentum,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn adam(lr: f64, n_params: usize) -> Self {
        Self::new(OptimizerKind::Adam, lr, 0.0, n_params)
    }

    pub fn sgd(lr: f64, momentum: f64, n_params: usize) -> Self {
        Self::new(OptimizerKind::Sgd, lr, momentum, n_params)
    }

    /// One update of the active entries of `w`.
    pub fn step(&mut self, w: &mut [f64], grad: &[f64], active: &[bool]) {
        self.t += 1;
        match self.kind {
            OptimizerKind::Adam => {
                const B1: f64 = 0.9;
                const B2: f64 = 0.999;
                const EPS: f64 = 1e-8;
                let c1 = 1.0 - B1.powi(self.t.min(i32::MAX as u64) as i32);
                let c2 = 1.0 - B2.powi(self.t.min(i32::MAX as u64) as i32);
                for i in 0..w.len() {
                    if !active[i] {
                        continue;
                    }
                    self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
                    self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
                    let mh = self.m[i] / c1;
                    let vh = self.v[i] / c2;
                    w[i] -= self.lr * mh / (vh.sqrt() + EPS);
                }
            }
            OptimizerKind::Sgd => {
                for i in 0..w.len() {
                    if !active[i] {
                        continue;
                    }
                    self.m[i] = self.momentum * self.m[i] + grad[i];
                    w[i] -= self.lr * self.m[i];
                }
            }
        }
    }
}

/// Rows `x` and scalar targets `y` in training units.
#[derive(Clone, Debug, Default)]
pub struct Samples {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Half the mean squared residual, `E = (1/2K) Σ (ŷ − Y)²`.
pub fn data_energy<M: Model>(model: &M, data: &Samples) -> f64 {
    mse(model, data) / 2.0
}

pub fn mse<M: Model>(model: &M, data: &Samples) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let mut trace = M::Trace::default();
    let sum: f64 = data
        .x
        .iter()
        .zip(&data.y)
        .map(|(x, y)| {
            let r = model.eval(x, &mut trace) - y;
            r * r
        })
        .sum();
    sum / data.len() as f64
}

/// One pass over `data` in the order given by `order`, in mini-batches of
/// `batch_size`, on `E + penalty`. Masked parameters are never touched.
/// Returns the mean batch loss, or an error if it became non-finite.
#[allow(clippy::too_many_arguments)]
pub fn train_epoch<M: Model>(
    model: &mut M,
    reg: &RegState,
    penalty: Penalty,
    data: &Samples,
    order: &[usize],
    batch_size: usize,
    opt: &mut Optimizer,
) -> Result<f64> {
    let active = model.active();
    let group_active = model.group_active();
    if !active.iter().any(|&a| a) {
        return Ok(data_energy(model, data));
    }
    let n = active.len();
    let mut w = model.params();
    let mut grad = vec![0.0; n];
    let mut trace = M::Trace::default();
    let mut total = 0.0;
    let mut batches = 0usize;
    for batch in order.chunks(batch_size.max(1)) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let scale = 1.0 / batch.len() as f64;
        let mut e = 0.0;
        for &k in batch {
            let r = model.eval(&data.x[k], &mut trace) - data.y[k];
            e += 0.5 * r * r * scale;
            model.accumulate_gradient(&trace, r * scale, &mut grad);
        }
        let pen = match penalty {
            Penalty::SparseGroupLasso => reg.sgl_penalty_and_grad(&w, &active, &group_active, &mut grad),
            Penalty::Bayes => reg.penalty_and_grad(&w, &active, &group_active, &mut grad),
        };
        let loss = e + pen;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("training loss"));
        }
        total += loss;
        batches += 1;
        opt.step(&mut w, &grad, &active);
        model.set_params(&w);
    }
    Ok(total / batches.max(1) as f64)
}

/// Residual MSE floored at 1e-8, or the fixed value.
pub fn estimate_sigma2<M: Model>(model: &M, data: &Samples, mode: Sigma2Mode) -> f64 {
    match mode {
        Sigma2Mode::Fixed(v) => v,
        Sigma2Mode::Residual => mse(model, data).max(1e-8),
    }
}

/// Snapshot of the model taken at the end of a cycle, before pruning.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub lambda: f64,
    pub train_mse: f64,
    pub val_mse: f64,
    pub active_connections: usize,
    pub term_count: usize,
    pub expression: String,
    pub elapsed_secs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reg: Option<RegState>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Diverged,
}

/// One (λ, seed) training run.
#[derive(Clone, Debug)]
pub struct RunOutcome<M> {
    pub lambda: f64,
    pub seed: u64,
    pub status: RunStatus,
    pub cycles: Vec<CycleRecord>,
    /// Model at the last record, mapped back to raw data units.
    pub model: M,
    /// Diagonal posterior variance of every parameter of `model`, raw units.
    pub zeta: Vec<f64>,
}

impl<M: Model> RunOutcome<M> {
    pub fn last(&self) -> Option<&CycleRecord> {
        self.cycles.last()
    }
}

/// Per-column RMS scales used to bring data to unit magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct Scaling {
    pub input: Vec<f64>,
    pub output: f64,
}

impl Scaling {
    pub fn identity(n: usize) -> Self {
        Self {
            input: vec![1.0; n],
            output: 1.0,
        }
    }

    pub fn fit(data: &Samples, inputs: bool, output: bool) -> Self {
        let n = data.x.first().map_or(0, Vec::len);
        let rms = |vals: &mut dyn Iterator<Item = f64>| -> f64 {
            let (mut s, mut k) = (0.0, 0usize);
            for v in vals {
                s += v * v;
                k += 1;
            }
            let r = if k == 0 { 1.0 } else { (s / k as f64).sqrt() };
            if r > 1e-12 && r.is_finite() {
                r
            } else {
                1.0
            }
        };
        let input = (0..n)
            .map(|j| if inputs { rms(&mut data.x.iter().map(|r| r[j])) } else { 1.0 })
            .collect();
        let output = if output { rms(&mut data.y.iter().copied()) } else { 1.0 };
        Self { input, output }
    }

    pub fn apply(&self, data: &Samples) -> Samples {
        Samples {
            x: data
                .x
                .iter()
                .map(|r| r.iter().zip(&self.input).map(|(v, s)| v / s).collect())
                .collect(),
            y: data.y.iter().map(|v| v / self.output).collect(),
        }
    }
}

/// Algorithm loop for a single initialization: `n_cycle` cycles of
/// `n_epoch` epochs, each followed by a record and one evidence/pruning step.
pub fn train_run<M: Model>(
    init: M,
    train_raw: &Samples,
    val_raw: &Samples,
    cfg: &TrainConfig,
    lambda: f64,
    seed: u64,
) -> RunOutcome<M> {
    let scaling = Scaling::fit(train_raw, cfg.normalize_inputs, cfg.normalize_output);
    let train = scaling.apply(train_raw);
    let mut model = init;
    let layout = model.layout();
    let mut reg = RegState::new(&layout, cfg.kappa, cfg.kappa_g, lambda, lambda * cfg.lambda_g_ratio);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, cfg.momentum, layout.n_params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let sigma2_mode = match cfg.sigma2 {
        Sigma2Mode::Fixed(v) => Sigma2Mode::Fixed(v / (scaling.output * scaling.output)),
        m => m,
    };
    let started = Instant::now();
    let mut cycles = Vec::with_capacity(cfg.n_cycle);
    let mut status = RunStatus::Ok;
    let mut epoch = 0usize;
    let mut snapshot: Option<(M, Vec<f64>)> = None;

    for cycle in 1..=cfg.n_cycle {
        let penalty = if cycle == 1 {
            Penalty::SparseGroupLasso
        } else {
            Penalty::Bayes
        };
        let mut diverged = false;
        let cycle_lr = opt.lr;
        for e in 0..cfg.n_epoch {
            let phase = e as f64 / cfg.n_epoch as f64;
            opt.lr = cycle_lr * (cfg.lr_floor + (1.0 - cfg.lr_floor) * 0.5 * (1.0 + (std::f64::consts::PI * phase).cos()));
            let decay = cfg.decay_factor.powi((epoch / cfg.decay_every) as i32);
            reg.lambda = lambda * decay;
            reg.lambda_g = lambda * cfg.lambda_g_ratio * decay;
            order.shuffle(&mut rng);
            if train_epoch(&mut model, &reg, penalty, &train, &order, cfg.batch_size, &mut opt).is_err() {
                diverged = true;
                break;
            }
            epoch += 1;
        }
        opt.lr = cycle_lr;
        if diverged {
            status = RunStatus::Diverged;
            break;
        }

        let mut raw = model.clone();
        let factors = raw.fold_scaling(&scaling.input, scaling.output);
        let expr = symbolic::simplify(&raw.expression(), cfg.coeff_floor);
        let record = CycleRecord {
            cycle,
            lambda: reg.lambda,
            train_mse: mse(&raw, train_raw),
            val_mse: mse(&raw, val_raw),
            active_connections: raw.active_connections(),
            term_count: symbolic::term_count(&expr),
            expression: symbolic::to_string(&expr, cfg.decimals),
            elapsed_secs: started.elapsed().as_secs_f64(),
            reg: Some(reg.clone()),
        };
        if !record.val_mse.is_finite() || !record.train_mse.is_finite() {
            status = RunStatus::Diverged;
            break;
        }
        cycles.push(record);

        // Evidence update and pruning.
        let sigma2 = estimate_sigma2(&model, &train, sigma2_mode);
        let h = gauss_newton_diag(&model, &train.x, sigma2, &Exec::sequential());
        let w = model.params();
        let active = model.active();
        let group_active = model.group_active();
        for _ in 0..cfg.cccp_iters.max(1) {
            reg.update(&w, &h, &active, &group_active);
        }
        let zeta_raw: Vec<f64> = reg.zeta.iter().zip(&factors).map(|(z, f)| z * f * f).collect();
        snapshot = Some((raw, zeta_raw));
        model.apply_masks(&reg.masks.mask, &reg.masks.group_mask);
        opt.lr *= cfg.lr_cycle_decay;
        if model.active_connections() == 0 {
            break;
        }
    }

    let (model, zeta) = match snapshot {
        Some(s) => s,
        None => {
            let mut raw = model.clone();
            raw.fold_scaling(&scaling.input, scaling.output);
            let n = layout.n_params;
            (raw, vec![0.0; n])
        }
    };
    RunOutcome {
        lambda,
        seed,
        status,
        cycles,
        model,
        zeta,
    }
}

/// A finished run as seen by model selection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub term_count: usize,
    pub val_mse: f64,
    pub seed: u64,
}

/// Among candidates within 10% of the best validation MSE, the fewest terms;
/// ties go to lower validation MSE, then lower seed. Returns an index.
pub fn select_model(candidates: &[Candidate]) -> Result<usize> {
    let finite: Vec<usize> = (0..candidates.len())
        .filter(|&i| candidates[i].val_mse.is_finite())
        .collect();
    let best = finite
        .iter()
        .map(|&i| candidates[i].val_mse)
        .fold(f64::INFINITY, f64::min);
    finite
        .into_iter()
        .filter(|&i| candidates[i].val_mse <= 1.1 * best)
        .min_by(|&a, &b| {
            let (ca, cb) = (&candidates[a], &candidates[b]);
            ca.term_count
                .cmp(&cb.term_count)
                .then(ca.val_mse.total_cmp(&cb.val_mse))
                .then(ca.seed.cmp(&cb.seed))
        })
        .ok_or_else(|| Error::NoCandidates("every run diverged".into()))
}

/// Deterministic 90:10 style split of row indices.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    idx.shuffle(&mut rng);
    let n_train = ((n as f64) * train_fraction).round() as usize;
    let n_train = n_train.clamp(1.min(n), n.saturating_sub(1).max(1.min(n)));
    let val = idx.split_off(n_train);
    (idx, val)
}

pub fn samples_for_target(data: &Dataset, target: usize, rows: &[usize]) -> Samples {
    Samples {
        x: rows.iter().map(|&k| data.x[k].clone()).collect(),
        y: rows.iter().map(|&k| data.y[k][target]).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Winner {
    pub expression: String,
    pub tree: Expression,
    pub coefficients: Vec<(String, f64)>,
    pub term_count: usize,
    pub val_mse: f64,
    pub lambda: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub lambda: f64,
    pub seed: u64,
    pub status: RunStatus,
    pub cycles: Vec<CycleRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryReport {
    pub target: usize,
    /// `"sparse_group_lasso"` when only the first cycle ran, `"bayesian"` otherwise.
    pub method: String,
    pub winner: Option<Winner>,
    pub winner_history: Vec<CycleRecord>,
    pub runs: Vec<RunSummary>,
}

/// Full sweep result including the winning model itself.
#[derive(Clone, Debug)]
pub struct Discovery<M> {
    pub report: DiscoveryReport,
    pub model: Option<M>,
    pub zeta: Option<Vec<f64>>,
}

/// Runs every (λ, restart) job through `train_run`, with models built by
/// `make(seed)`, and selects the winner.
pub fn discover_with<M, F>(train: &Samples, val: &Samples, cfg: &TrainConfig, target: usize, exec: &Exec, make: F) -> Result<Discovery<M>>
where
    M: Model,
    F: Fn(u64) -> M + Sync + Send,
{
    cfg.validate()?;
    let jobs: Vec<(f64, u64)> = cfg
        .lambda_grid
        .iter()
        .flat_map(|&l| (0..cfg.restarts as u64).map(move |r| (l, cfg.seed.wrapping_add(r))))
        .collect();
    let outcomes: Vec<RunOutcome<M>> = exec.install(|| {
        exec.map(jobs.len(), |j| {
            let (lambda, seed) = jobs[j];
            train_run(make(seed), train, val, cfg, lambda, seed)
        })
    });

    let usable: Vec<usize> = (0..outcomes.len())
        .filter(|&i| outcomes[i].status == RunStatus::Ok && outcomes[i].last().is_some())
        .collect();
    let candidates: Vec<Candidate> = usable
        .iter()
        .map(|&i| {
            let rec = outcomes[i].last().unwrap();
            Candidate {
                term_count: rec.term_count,
                val_mse: rec.val_mse,
                seed: outcomes[i].seed,
            }
        })
        .collect();
    let method = if cfg.n_cycle == 1 {
        "sparse_group_lasso"
    } else {
        "bayesian"
    };
    let runs = outcomes
        .iter()
        .map(|o| RunSummary {
            lambda: o.lambda,
            seed: o.seed,
            status: o.status,
            cycles: o.cycles.clone(),
        })
        .collect();
    let pick = select_model(&candidates).ok().map(|c| usable[c]);
    let (winner, history, model, zeta) = match pick {
        Some(i) => {
            let o = &outcomes[i];
            let rec = o.last().unwrap();
            let tree = symbolic::simplify(&o.model.expression(), cfg.coeff_floor);
            let winner = Winner {
                expression: symbolic::to_string(&tree, cfg.decimals),
                coefficients: symbolic::coefficients(&tree, 0.0),
                tree,
                term_count: rec.term_count,
                val_mse: rec.val_mse,
                lambda: o.lambda,
                seed: o.seed,
            };
            (Some(winner), o.cycles.clone(), Some(o.model.clone()), Some(o.zeta.clone()))
        }
        None => (None, Vec::new(), None, None),
    };
    Ok(Discovery {
        report: DiscoveryReport {
            target,
            method: method.into(),
            winner,
            winner_history: history,
            runs,
        },
        model,
        zeta,
    })
}

/// Discovers the equation for target column `target` of `data` with a
/// MathONet of the configured architecture.
/// Splits `data` by `cfg.seed`, then sweeps with models built by `make`.
pub fn discover_model<M, F>(data: &Dataset, target: usize, cfg: &TrainConfig, exec: &Exec, make: F) -> Result<Discovery<M>>
where
    M: Model,
    F: Fn(u64) -> M + Sync + Send,
{
    data.validate()?;
    if target >= data.n_outputs() {
        return Err(Error::Data(format!(
            "target {target} out of range for {} output columns",
            data.n_outputs()
        )));
    }
    if data.len() < 2 {
        return Err(Error::Data("need at least two samples to split".into()));
    }
    let (tr, va) = split_indices(data.len(), cfg.train_fraction, cfg.seed);
    let train = samples_for_target(data, target, &tr);
    let val = samples_for_target(data, target, &va);
    discover_with(&train, &val, cfg, target, exec, make)
}

/// Plain MathONet discovery of output column `target`.
pub fn discover(data: &Dataset, target: usize, cfg: &TrainConfig, exec: &Exec) -> Result<Discovery<MathONet>> {
    let n = data.n_inputs();
    discover_model(data, target, cfg, exec, |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MathONet::random(n, &cfg.hidden, &cfg.unary_set, cfg.init_range, &mut rng)
    })
}

//! Property bodies and their input strategies, shared by the per-module
//! suites and the acceptance run.

use std::ops::Range;

use mathonet::bayes::{
    loss_bayes, loss_sgl, update_alpha_beta, update_masks, update_zeta, MaskDecision, RegState, BETA_MAX, BETA_MIN,
};
use mathonet::benchmarks::{integrate, SystemSpec, LV_ALPHA, LV_BETA, LV_DELTA, LV_GAMMA};
use mathonet::grad::{backward, finite_diff_gradient};
use mathonet::par::Exec;
use mathonet::symbolic::extract_expression;
use mathonet::validation::mc_uncertainty;
use mathonet::{MathONet, Model, UnaryKind};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(), TestCaseError>;

/// Random net with random biases and roughly a `drop` fraction of weights masked.
pub fn random_net(seed: u64, n_inputs: usize, hidden: &[usize], unary: &[UnaryKind], init: f64, drop: f64) -> MathONet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = MathONet::random(n_inputs, hidden, unary, init, &mut rng);
    for layer in &mut net.layers {
        for neuron in &mut layer.neurons {
            neuron.bias = rng.random_range(-0.5..0.5);
        }
    }
    let layout = net.layout();
    let keep: Vec<bool> = (0..layout.n_params).map(|_| rng.random::<f64>() >= drop).collect();
    net.apply_masks(&keep, &vec![true; layout.groups.len()]);
    net
}

pub fn points(seed: u64, n: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
}

/// Elementwise relative error; entries smaller than `floor` are compared absolutely.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Smallest `|w_o·h|` fed to a log unit; central differences lose accuracy
/// near the log singularity.
pub fn min_log_argument(net: &MathONet, x: &[f64]) -> f64 {
    let (_, trace) = net.forward(x).unwrap();
    let n_ops = net.n_ops();
    let Some(log) = net.unary_set.iter().position(|&u| u == UnaryKind::Log) else {
        return f64::INFINITY;
    };
    trace
        .layers
        .iter()
        .flat_map(|l| l.pre.chunks(n_ops).map(|c| c[log].abs()))
        .fold(f64::INFINITY, f64::min)
}

pub fn energy_gradient<M: Model>(model: &M, x: &[f64], y: f64, sigma2: f64) -> Vec<f64> {
    let mut trace = M::Trace::default();
    let r = model.eval(x, &mut trace) - y;
    backward(model, &trace, r, sigma2)
}

pub type GradientCase = (u64, bool, f64, Vec<f64>, f64);

pub fn gradient_case() -> impl Strategy<Value = GradientCase> {
    (
        any::<u64>(),
        any::<bool>(),
        0.0..0.4f64,
        prop::collection::vec(-2.0..2.0f64, 3),
        -3.0..3.0f64,
    )
}

/// Backprop against central differences on a random shallow or deep net.
pub fn gradient_matches_fd((seed, deep, drop, x, y): GradientCase) -> Check {
    let hidden: &[usize] = if deep { &[2, 2] } else { &[3] };
    let net = random_net(seed, 3, hidden, &UnaryKind::ALL, 0.5, drop);
    prop_assume!(min_log_argument(&net, &x) > 0.05);
    let g = energy_gradient(&net, &x, y, 0.7);
    let fd = finite_diff_gradient(&net, &x, y, 0.7, 1e-6);
    let err = max_rel_err(&g, &fd, 1e-3);
    prop_assert!(err < 1e-5, "relative error {err}");
    Ok(())
}

/// Splits `0..n` into consecutive groups with the given sizes, leaving the tail ungrouped.
pub fn groups_from(sizes: &[usize], n: usize) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for &s in sizes {
        if start + s > n {
            break;
        }
        out.push(start..start + s);
        start += s;
    }
    out
}

pub type LossCase = (f64, Vec<f64>, Vec<usize>, f64, f64);

pub fn loss_case() -> impl Strategy<Value = LossCase> {
    (
        0.0..10.0f64,
        prop::collection::vec(-5.0..5.0f64, 1..40),
        prop::collection::vec(1usize..6, 0..10),
        0.0..1.0f64,
        0.0..1.0f64,
    )
}

/// With every β at 1 and nothing masked the Bayesian loss is the sparse group Lasso.
pub fn bayes_loss_is_sgl((e, w, sizes, lambda, lambda_g): LossCase) -> Check {
    let groups = groups_from(&sizes, w.len());
    let c = vec![true; w.len()];
    let beta = vec![1.0; w.len()];
    let c_g = vec![true; groups.len()];
    let beta_g = vec![1.0; groups.len()];
    let a = loss_sgl(e, &w, &groups, lambda, lambda_g);
    let b = loss_bayes(e, &w, &c, &beta, &groups, &c_g, &beta_g, lambda, lambda_g);
    prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * a.abs().max(1.0), "{a} vs {b}");
    Ok(())
}

pub fn zeta_case() -> impl Strategy<Value = (f64, f64)> {
    (1e-8..1e4f64, 0.0..1e6f64)
}

pub fn zeta_sandwich((nu, h): (f64, f64)) -> Check {
    let z = update_zeta(nu, h);
    prop_assert!(z > 0.0 && z <= nu);
    if h > 0.0 {
        prop_assert!(z <= 1.0 / h * (1.0 + 1e-12));
        prop_assert!(z >= 0.5 * nu.min(1.0 / h));
    }
    let (alpha, beta) = update_alpha_beta(nu, z);
    prop_assert!(alpha >= 0.0);
    prop_assert!((BETA_MIN..=BETA_MAX).contains(&beta));
    Ok(())
}

pub type MaskCase = (Vec<f64>, Vec<f64>, Vec<bool>, Vec<bool>);

pub fn mask_case() -> impl Strategy<Value = MaskCase> {
    (
        prop::collection::vec(0.0..2e3f64, 12),
        prop::collection::vec(0.0..2e3f64, 3),
        prop::collection::vec(any::<bool>(), 12),
        prop::collection::vec(any::<bool>(), 3),
    )
}

/// Masks never come back, α over κ screens a weight out, and a dead group
/// takes all its members with it.
pub fn masks_only_shrink((alpha, alpha_g, prev_bits, prev_g): MaskCase) -> Check {
    let groups = vec![0..4, 4..8, 8..12];
    let prev = MaskDecision { mask: prev_bits, group_mask: prev_g };
    let next = update_masks(&alpha, &alpha_g, 1e3, 1e3, &prev, &groups);
    for i in 0..12 {
        prop_assert!(!next.mask[i] || prev.mask[i]);
        if alpha[i] > 1e3 {
            prop_assert!(!next.mask[i]);
        }
    }
    for (g, r) in groups.iter().enumerate() {
        prop_assert!(!next.group_mask[g] || prev.group_mask[g]);
        if !next.group_mask[g] {
            prop_assert!(next.mask[r.clone()].iter().all(|&m| !m));
        }
    }
    Ok(())
}

pub fn update_case() -> impl Strategy<Value = (u64, f64)> {
    (any::<u64>(), 1e-2..1e4f64)
}

/// Repeated Gauss–Newton evidence updates on a real layout: α stays
/// non-negative, ζ stays inside (0, ν_prev], masks never come back.
pub fn repeated_updates_are_monotone((seed, h_scale): (u64, f64)) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = MathONet::random(3, &[3], &UnaryKind::ALL, 0.5, &mut rng);
    let layout = net.layout();
    let w = net.params();
    let h: Vec<f64> = (0..w.len()).map(|i| h_scale * (1 + i % 7) as f64).collect();
    let mut reg = RegState::new(&layout, 1e3, 1e3, 1e-3, 1e-3);
    let mut active = net.active();
    let mut group_active = net.group_active();
    for _ in 0..6 {
        let nu_prev = reg.nu.clone();
        reg.update(&w, &h, &active, &group_active);
        for i in 0..w.len() {
            prop_assert!(reg.alpha[i] >= 0.0);
            if active[i] {
                prop_assert!(reg.zeta[i] > 0.0 || nu_prev[i] == 0.0);
                prop_assert!(reg.zeta[i] <= nu_prev[i]);
            } else {
                prop_assert_eq!(reg.zeta[i], 0.0);
                prop_assert!(!reg.masks.mask[i]);
            }
        }
        for (next, prev) in reg.masks.mask.iter().zip(&active) {
            prop_assert!(!next || *prev);
        }
        active = reg.masks.mask.clone();
        group_active = reg.masks.group_mask.clone();
    }
    Ok(())
}

pub fn extraction_case() -> impl Strategy<Value = (u64, bool, f64)> {
    (any::<u64>(), any::<bool>(), 0.0..0.5f64)
}

/// The extracted expression evaluates to the forward pass within 1e-9.
pub fn extraction_is_faithful((seed, deep, drop): (u64, bool, f64)) -> Check {
    let hidden: &[usize] = if deep { &[2, 2] } else { &[3] };
    let net = random_net(seed, 3, hidden, &UnaryKind::ALL, 0.8, drop);
    let expr = extract_expression(&net);
    for x in points(seed, 20) {
        let a = net.predict(&x);
        let b = expr.eval(&x);
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }
    Ok(())
}

fn oscillator(s: &[f64]) -> Vec<f64> {
    vec![s[1], -s[0]]
}

fn rk4_error(steps: usize) -> f64 {
    let dt = 1.0 / steps as f64;
    let end = integrate(oscillator, &[1.0, 0.0], dt, steps).unwrap();
    let last = end.last().unwrap();
    ((last[0] - 1f64.cos()).powi(2) + (last[1] + 1f64.sin()).powi(2)).sqrt()
}

/// Observed convergence orders on the harmonic oscillator at 10, 20 and 40 steps.
pub fn rk4_orders() -> Vec<f64> {
    [10, 20, 40]
        .iter()
        .map(|&n| (rk4_error(n) / rk4_error(2 * n)).log2())
        .collect()
}

/// `V = δx − γ ln x + βy − α ln y` is a first integral.
pub fn lv_invariant(s: &[f64]) -> f64 {
    LV_DELTA * s[0] - LV_GAMMA * s[0].ln() + LV_BETA * s[1] - LV_ALPHA * s[1].ln()
}

/// Largest relative drift of the first integral along the generated trajectory.
pub fn lv_drift() -> f64 {
    let states = SystemSpec::lotka_volterra().trajectory().unwrap();
    let v0 = lv_invariant(&states[0]);
    states
        .iter()
        .map(|s| (lv_invariant(s) - v0).abs() / v0.abs())
        .fold(0.0, f64::max)
}

/// `ŷ = w·x` on one input: P const slot = w, output const = 1.
pub fn linear_net(w: f64) -> MathONet {
    let mut net = MathONet::zeros(1, &[1], &[UnaryKind::Identity]);
    net.layers[0].neurons[0].polys[0].w = vec![0.0, w];
    net.layers[0].neurons[0].oper.w = vec![1.0];
    net.output_polys[0].w = vec![0.0, 1.0];
    net
}

/// Monte Carlo variance of a linear model with ζ on its slope, relative to
/// `x²ζ`, worst over a few inputs at T = 10⁴.
pub fn mc_linear_variance_error() -> f64 {
    let net = linear_net(2.0);
    let mut zeta = vec![0.0; net.params().len()];
    zeta[1] = 0.01;
    let xs: Vec<Vec<f64>> = [0.5, 1.0, 3.0, -2.0].iter().map(|&x| vec![x]).collect();
    let band = mc_uncertainty(&net, &zeta, &xs, 10_000, 7, &Exec::sequential()).unwrap();
    xs.iter()
        .zip(&band.variance)
        .map(|(x, v)| {
            let want = x[0] * x[0] * 0.01;
            (v - want).abs() / want
        })
        .fold(0.0, f64::max)
}

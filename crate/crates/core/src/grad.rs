//! Reverse-mode gradients through a MathONet, the diagonal Gauss–Newton
//! curvature used by the Bayesian updates, and a central-difference oracle.
//!
//! The per-sample energy is `(1/2σ²)·r²` with residual `r = ŷ − Y`.

use crate::mathonet::{EvalTrace, MathONet};
use crate::model::Model;
use crate::par::Exec;

/// Adds `scale · ∂ŷ/∂w` for every active weight of `net`, in the flat order of
/// [`Model::params`]. `trace` must come from evaluating this net.
pub fn accumulate_output_gradient(net: &MathONet, trace: &EvalTrace, scale: f64, grad: &mut [f64]) {
    let n = net.n_inputs;
    let stride = n + 1;
    let n_ops = net.unary_set.len();
    let x = &trace.x;

    // Flat offset of the first parameter of each layer and of the output block.
    let mut layer_start = Vec::with_capacity(net.layers.len() + 1);
    let mut off = 0;
    let mut fan_in = n;
    for layer in &net.layers {
        layer_start.push(off);
        off += layer.neurons.len() * (fan_in * stride + 1 + n_ops);
        fan_in = layer.neurons.len();
    }
    let out_start = off;

    let last = trace.layers.last().expect("trace has a hidden layer");
    let mut da: Vec<f64> = Vec::with_capacity(last.a.len());
    for (k, poly) in net.output_polys.iter().enumerate() {
        let g = scale * last.a[k];
        poly_grad(poly, x, g, &mut grad[out_start + k * stride..out_start + (k + 1) * stride]);
        da.push(scale * trace.q[k]);
    }

    for l in (0..net.layers.len()).rev() {
        let layer = &net.layers[l];
        let lt = &trace.layers[l];
        let fan_in = if l == 0 { n } else { net.layers[l - 1].neurons.len() };
        let input: &[f64] = if l == 0 { x } else { &trace.layers[l - 1].a };
        let neuron_len = fan_in * stride + 1 + n_ops;
        let mut da_prev = vec![0.0; if l == 0 { 0 } else { fan_in }];
        for (k, neuron) in layer.neurons.iter().enumerate() {
            let dak = da[k];
            if dak == 0.0 {
                continue;
            }
            let base = layer_start[l] + k * neuron_len;
            let oper_off = base + fan_in * stride + 1;
            let h = lt.h[k];
            let mut dh = 0.0;
            for o in 0..n_ops {
                if !neuron.oper.is_on(o) {
                    continue;
                }
                let d = net.unary_set[o].deriv(lt.pre[k * n_ops + o]);
                grad[oper_off + o] += dak * d * h;
                dh += dak * d * neuron.oper.w[o];
            }
            if dh == 0.0 {
                continue;
            }
            if neuron.bias_mask {
                grad[base + fan_in * stride] += dh;
            }
            for (i, poly) in neuron.polys.iter().enumerate() {
                let dp = dh * input[i];
                let p_off = base + i * stride;
                poly_grad(poly, x, dp, &mut grad[p_off..p_off + stride]);
                if l > 0 {
                    da_prev[i] += dh * lt.poly[k * fan_in + i];
                }
            }
        }
        da = da_prev;
    }
}

#[inline]
fn poly_grad(poly: &crate::mathonet::PolyNet, x: &[f64], g: f64, out: &mut [f64]) {
    if !poly.group_mask || g == 0.0 {
        return;
    }
    let n = x.len();
    for j in 0..n {
        if poly.mask[j] {
            out[j] += g * x[j];
        }
    }
    if poly.mask[n] {
        out[n] += g;
    }
}

/// Energy gradient of one sample: `(residual/σ²) · ∂ŷ/∂w`, with
/// `residual = ŷ − Y`. Masked positions are 0.
pub fn backward<M: Model>(model: &M, trace: &M::Trace, residual: f64, sigma2: f64) -> Vec<f64> {
    let mut grad = vec![0.0; model.layout().n_params];
    model.accumulate_gradient(trace, residual / sigma2, &mut grad);
    grad
}

/// Gradient of `ŷ` itself with respect to every parameter at `x`.
pub fn output_gradient<M: Model>(model: &M, x: &[f64]) -> Vec<f64> {
    let mut trace = M::Trace::default();
    model.eval(x, &mut trace);
    let mut grad = vec![0.0; model.layout().n_params];
    model.accumulate_gradient(&trace, 1.0, &mut grad);
    grad
}

/// `H_ii = (1/σ²) Σ_k (∂ŷ_k/∂w_i)²` over the rows of `xs`; masked entries 0.
pub fn gauss_newton_diag<M: Model>(model: &M, xs: &[Vec<f64>], sigma2: f64, exec: &Exec) -> Vec<f64> {
    let n_params = model.layout().n_params;
    let partials = exec.map_chunks(xs.len(), |rows| {
        let mut trace = M::Trace::default();
        let mut g = vec![0.0; n_params];
        let mut acc = vec![0.0; n_params];
        for x in &xs[rows] {
            g.iter_mut().for_each(|v| *v = 0.0);
            model.eval(x, &mut trace);
            model.accumulate_gradient(&trace, 1.0, &mut g);
            for (a, v) in acc.iter_mut().zip(&g) {
                *a += v * v;
            }
        }
        acc
    });
    let mut h = vec![0.0; n_params];
    for part in partials {
        for (a, v) in h.iter_mut().zip(&part) {
            *a += v;
        }
    }
    let active = model.active();
    for (v, on) in h.iter_mut().zip(active) {
        *v = if on { *v / sigma2 } else { 0.0 };
    }
    h
}

/// Central-difference estimate of the single-sample energy gradient.
pub fn finite_diff_gradient<M: Model>(model: &M, x: &[f64], y: f64, sigma2: f64, step: f64) -> Vec<f64> {
    let base = model.params();
    let active = model.active();
    let mut probe = model.clone();
    let mut trace = M::Trace::default();
    let mut energy = |p: &[f64]| {
        probe.set_params(p);
        let r = probe.eval(x, &mut trace) - y;
        0.5 * r * r / sigma2
    };
    let mut out = vec![0.0; base.len()];
    let mut p = base.clone();
    for i in 0..base.len() {
        if !active[i] {
            continue;
        }
        p[i] = base[i] + step;
        let up = energy(&p);
        p[i] = base[i] - step;
        let down = energy(&p);
        p[i] = base[i];
        out[i] = (up - down) / (2.0 * step);
    }
    out
}

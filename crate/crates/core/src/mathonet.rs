//! The MathONet super-graph: PolyNets (binary layer), OperNets (unary layer)
//! and the output combiner, with per-weight and per-group masks.
//!
//! Forward semantics for a net with `L` hidden layers over inputs `x ∈ R^n`:
//!
//! ```text
//! p_ik   = w_const + Σ_j w_j x_j                 (PolyNet, masked)
//! h_k    = Σ_i p_ik · in_i + b_k                 (in = x for layer 1, a^{l-1} after)
//! a_k    = Σ_o [mask_o] f_o(w_o · h_k)           (OperNet)
//! ŷ      = Σ_k q_k(x) · a^L_k                    (one output PolyNet per last-layer neuron)
//! ```
//!
//! A weight whose mask bit is 0 is structurally absent: its value never
//! reaches the output. A pruned unary term contributes 0, not `f_o(0)`.

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use crate::error::{check_len, Error, Result};
use crate::model::{Model, ParamLayout};
use crate::symbolic::{self, Expression};

/// Offset added inside the safe logarithm: `ln(|z| + LOG_EPS)`.
pub const LOG_EPS: f64 = 1e-8;
/// Exp arguments are clamped to `[-EXP_CLAMP, EXP_CLAMP]`.
pub const EXP_CLAMP: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnaryKind {
    Identity,
    Sin,
    Cos,
    Log,
    Exp,
}

impl UnaryKind {
    pub const ALL: [UnaryKind; 5] = [
        UnaryKind::Identity,
        UnaryKind::Sin,
        UnaryKind::Cos,
        UnaryKind::Log,
        UnaryKind::Exp,
    ];

    #[inline]
    pub fn eval(self, z: f64) -> f64 {
        match self {
            UnaryKind::Identity => z,
            UnaryKind::Sin => z.sin(),
            UnaryKind::Cos => z.cos(),
            UnaryKind::Log => (z.abs() + LOG_EPS).ln(),
            UnaryKind::Exp => z.clamp(-EXP_CLAMP, EXP_CLAMP).exp(),
        }
    }

    /// First derivative. The log kink at 0 uses `sign(0) = 0`; the clamped
    /// exp has zero slope outside the clamp.
    #[inline]
    pub fn deriv(self, z: f64) -> f64 {
        match self {
            UnaryKind::Identity => 1.0,
            UnaryKind::Sin => z.cos(),
            UnaryKind::Cos => -z.sin(),
            UnaryKind::Log => {
                let s = if z > 0.0 {
                    1.0
                } else if z < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                s / (z.abs() + LOG_EPS)
            }
            UnaryKind::Exp => {
                if (-EXP_CLAMP..=EXP_CLAMP).contains(&z) {
                    z.exp()
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            UnaryKind::Identity => "identity",
            UnaryKind::Sin => "sin",
            UnaryKind::Cos => "cos",
            UnaryKind::Log => "log",
            UnaryKind::Exp => "exp",
        }
    }
}

impl fmt::Display for UnaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UnaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "identity" | "ident" | "id" => Ok(UnaryKind::Identity),
            "sin" => Ok(UnaryKind::Sin),
            "cos" => Ok(UnaryKind::Cos),
            "log" => Ok(UnaryKind::Log),
            "exp" => Ok(UnaryKind::Exp),
            other => Err(Error::Config(format!("unknown unary operation `{other}`"))),
        }
    }
}

/// Masks are stored as booleans and written to JSON as 0/1.
mod bits {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[bool], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|&b| b as u8))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        let raw = Vec::<u8>::deserialize(d)?;
        raw.into_iter()
            .map(|b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(serde::de::Error::custom(format!("mask bit must be 0 or 1, got {other}"))),
            })
            .collect()
    }
}

pub(crate) mod bit {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*v as u8)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!("mask bit must be 0 or 1, got {other}"))),
        }
    }

    pub fn one() -> bool {
        true
    }

    pub fn is_one(v: &bool) -> bool {
        *v
    }
}

/// Affine map over the system inputs plus a constant slot (last entry).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyNet {
    pub w: Vec<f64>,
    #[serde(with = "bits")]
    pub mask: Vec<bool>,
    #[serde(with = "bit")]
    pub group_mask: bool,
}

impl PolyNet {
    pub fn zeros(n_inputs: usize) -> Self {
        Self {
            w: vec![0.0; n_inputs + 1],
            mask: vec![true; n_inputs + 1],
            group_mask: true,
        }
    }

    pub fn from_weights(w: Vec<f64>) -> Self {
        let mask = vec![true; w.len()];
        Self {
            w,
            mask,
            group_mask: true,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.w.len() - 1
    }

    #[inline]
    pub fn is_on(&self, j: usize) -> bool {
        self.group_mask && self.mask[j]
    }

    pub fn is_active(&self) -> bool {
        self.group_mask && self.mask.iter().any(|&m| m)
    }

    /// Unchecked evaluation; `x.len()` must equal `n_inputs()`.
    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        if !self.group_mask {
            return 0.0;
        }
        let n = x.len();
        let mut acc = if self.mask[n] { self.w[n] } else { 0.0 };
        for j in 0..n {
            if self.mask[j] {
                acc += self.w[j] * x[j];
            }
        }
        acc
    }

    fn check(&self) -> Result<()> {
        check_len("PolyNet mask", self.w.len(), self.mask.len())?;
        if self.w.is_empty() {
            return Err(Error::Structure("PolyNet needs at least the constant slot".into()));
        }
        if !self.group_mask && self.mask.iter().any(|&m| m) {
            return Err(Error::Structure("PolyNet group is off but a weight mask is on".into()));
        }
        Ok(())
    }
}

/// Masked linear combination of unary operations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperNet {
    pub w: Vec<f64>,
    #[serde(with = "bits")]
    pub mask: Vec<bool>,
    #[serde(with = "bit")]
    pub group_mask: bool,
}

impl OperNet {
    pub fn zeros(n_ops: usize) -> Self {
        Self {
            w: vec![0.0; n_ops],
            mask: vec![true; n_ops],
            group_mask: true,
        }
    }

    pub fn from_weights(w: Vec<f64>) -> Self {
        let mask = vec![true; w.len()];
        Self {
            w,
            mask,
            group_mask: true,
        }
    }

    #[inline]
    pub fn is_on(&self, o: usize) -> bool {
        self.group_mask && self.mask[o]
    }

    pub fn is_active(&self) -> bool {
        self.group_mask && self.mask.iter().any(|&m| m)
    }

    #[inline]
    pub fn value(&self, h: f64, unary_set: &[UnaryKind]) -> f64 {
        let mut acc = 0.0;
        if !self.group_mask {
            return acc;
        }
        for (o, kind) in unary_set.iter().enumerate() {
            if self.mask[o] {
                acc += kind.eval(self.w[o] * h);
            }
        }
        acc
    }

    fn check(&self, n_ops: usize) -> Result<()> {
        check_len("OperNet weights", n_ops, self.w.len())?;
        check_len("OperNet mask", self.w.len(), self.mask.len())?;
        if !self.group_mask && self.mask.iter().any(|&m| m) {
            return Err(Error::Structure("OperNet group is off but a weight mask is on".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neuron {
    /// One PolyNet per incoming feature (inputs for layer 1, previous activations after).
    pub polys: Vec<PolyNet>,
    pub bias: f64,
    pub oper: OperNet,
    /// Extension of the model schema; omitted from JSON while the bias is live.
    #[serde(with = "bit", default = "bit::one", skip_serializing_if = "bit::is_one")]
    pub bias_mask: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub neurons: Vec<Neuron>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MathONet {
    pub n_inputs: usize,
    pub unary_set: Vec<UnaryKind>,
    pub layers: Vec<Layer>,
    pub output_polys: Vec<PolyNet>,
}

/// Per-layer cached intermediates of one forward pass.
#[derive(Clone, Debug, Default)]
pub struct LayerTrace {
    /// `p_ik`, flattened as `[neuron k][incoming i]`.
    pub poly: Vec<f64>,
    pub h: Vec<f64>,
    /// `w_o · h_k`, flattened as `[neuron k][unary o]`.
    pub pre: Vec<f64>,
    pub a: Vec<f64>,
}

/// Backprop cache for one sample.
#[derive(Clone, Debug, Default)]
pub struct EvalTrace {
    pub x: Vec<f64>,
    pub layers: Vec<LayerTrace>,
    /// Output PolyNet values `q_k(x)`.
    pub q: Vec<f64>,
    pub output: f64,
}

impl EvalTrace {
    /// Recomputes the output from the cached combiner inputs.
    pub fn replay(&self) -> f64 {
        let last = match self.layers.last() {
            Some(l) => l,
            None => return 0.0,
        };
        let mut y = 0.0;
        for (q, a) in self.q.iter().zip(&last.a) {
            y += q * a;
        }
        y
    }
}

impl MathONet {
    /// All weights zero, all masks on, biases zero.
    pub fn zeros(n_inputs: usize, hidden: &[usize], unary_set: &[UnaryKind]) -> Self {
        assert!(!hidden.is_empty(), "MathONet needs at least one hidden layer");
        let mut layers = Vec::with_capacity(hidden.len());
        let mut fan_in = n_inputs;
        for &width in hidden {
            let neurons = (0..width)
                .map(|_| Neuron {
                    polys: (0..fan_in).map(|_| PolyNet::zeros(n_inputs)).collect(),
                    bias: 0.0,
                    oper: OperNet::zeros(unary_set.len()),
                    bias_mask: true,
                })
                .collect();
            layers.push(Layer { neurons });
            fan_in = width;
        }
        let output_polys = (0..fan_in).map(|_| PolyNet::zeros(n_inputs)).collect();
        Self {
            n_inputs,
            unary_set: unary_set.to_vec(),
            layers,
            output_polys,
        }
    }

    /// Weights uniform in `(-init_range, init_range)`, biases zero.
    pub fn random<R: Rng + ?Sized>(
        n_inputs: usize,
        hidden: &[usize],
        unary_set: &[UnaryKind],
        init_range: f64,
        rng: &mut R,
    ) -> Self {
        let mut net = Self::zeros(n_inputs, hidden, unary_set);
        let mut draw = |w: &mut Vec<f64>| {
            for v in w.iter_mut() {
                *v = rng.random_range(-init_range..init_range);
            }
        };
        for layer in &mut net.layers {
            for neuron in &mut layer.neurons {
                for poly in &mut neuron.polys {
                    draw(&mut poly.w);
                }
                draw(&mut neuron.oper.w);
            }
        }
        for poly in &mut net.output_polys {
            draw(&mut poly.w);
        }
        net
    }

    pub fn n_ops(&self) -> usize {
        self.unary_set.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Structure("at least one hidden layer is required".into()));
        }
        let mut fan_in = self.n_inputs;
        for layer in &self.layers {
            if layer.neurons.is_empty() {
                return Err(Error::Structure("empty hidden layer".into()));
            }
            for neuron in &layer.neurons {
                check_len("neuron PolyNet count", fan_in, neuron.polys.len())?;
                for poly in &neuron.polys {
                    check_len("PolyNet weights", self.n_inputs + 1, poly.w.len())?;
                    poly.check()?;
                }
                neuron.oper.check(self.n_ops())?;
            }
            fan_in = layer.neurons.len();
        }
        check_len("output PolyNet count", fan_in, self.output_polys.len())?;
        for poly in &self.output_polys {
            check_len("output PolyNet weights", self.n_inputs + 1, poly.w.len())?;
            poly.check()?;
        }
        Ok(())
    }

    /// Hot-path forward pass; fills `trace` and returns `ŷ`. Input length is
    /// only debug-checked.
    pub fn eval_into(&self, x: &[f64], trace: &mut EvalTrace) -> f64 {
        debug_assert_eq!(x.len(), self.n_inputs);
        trace.x.clear();
        trace.x.extend_from_slice(x);
        trace.layers.resize_with(self.layers.len(), LayerTrace::default);
        let n_ops = self.n_ops();
        for (l, layer) in self.layers.iter().enumerate() {
            let (done, rest) = trace.layers.split_at_mut(l);
            let lt = &mut rest[0];
            let input: &[f64] = if l == 0 { x } else { &done[l - 1].a };
            lt.poly.clear();
            lt.h.clear();
            lt.pre.clear();
            lt.a.clear();
            for neuron in &layer.neurons {
                let mut h = 0.0;
                for (i, poly) in neuron.polys.iter().enumerate() {
                    let p = poly.value(x);
                    lt.poly.push(p);
                    h += p * input[i];
                }
                if neuron.bias_mask {
                    h += neuron.bias;
                }
                lt.h.push(h);
                let mut a = 0.0;
                for o in 0..n_ops {
                    let z = neuron.oper.w[o] * h;
                    lt.pre.push(z);
                    if neuron.oper.is_on(o) {
                        a += self.unary_set[o].eval(z);
                    }
                }
                lt.a.push(a);
            }
        }
        trace.q.clear();
        let last = trace.layers.last().expect("validated net has a hidden layer");
        let mut y = 0.0;
        for (k, poly) in self.output_polys.iter().enumerate() {
            let q = poly.value(x);
            trace.q.push(q);
            y += q * last.a[k];
        }
        trace.output = y;
        y
    }

    /// Checked forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<(f64, EvalTrace)> {
        check_len("forward input", self.n_inputs, x.len())?;
        let mut trace = EvalTrace::default();
        let y = self.eval_into(x, &mut trace);
        let finite = y.is_finite()
            && trace
                .layers
                .iter()
                .all(|l| l.h.iter().chain(&l.a).chain(&l.poly).all(|v| v.is_finite()));
        if !finite {
            return Err(Error::NonFinite("MathONet forward"));
        }
        Ok((y, trace))
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut trace = EvalTrace::default();
        self.eval_into(x, &mut trace)
    }

    pub fn count_active_connections(&self) -> usize {
        let bits = |m: &[bool], g: bool| if g { m.iter().filter(|&&b| b).count() } else { 0 };
        let mut n = 0;
        for layer in &self.layers {
            for neuron in &layer.neurons {
                for poly in &neuron.polys {
                    n += bits(&poly.mask, poly.group_mask);
                }
                n += bits(&neuron.oper.mask, neuron.oper.group_mask);
            }
        }
        for poly in &self.output_polys {
            n += bits(&poly.mask, poly.group_mask);
        }
        n
    }

    /// Removes blocks whose output can no longer reach `ŷ`: a neuron whose
    /// downstream PolyNets are all off, or whose OperNet is off, is cut
    /// together with everything feeding it. Runs to a fixpoint.
    pub fn prune_dead_paths(&mut self) {
        loop {
            let mut changed = false;
            let depth = self.layers.len();
            for l in (0..depth).rev() {
                for k in 0..self.layers[l].neurons.len() {
                    let consumed = if l + 1 == depth {
                        self.output_polys[k].is_active()
                    } else {
                        self.layers[l + 1]
                            .neurons
                            .iter()
                            .any(|n| n.polys[k].is_active() && n.oper.is_active())
                    };
                    let produces = self.layers[l].neurons[k].oper.is_active();
                    if consumed && produces {
                        continue;
                    }
                    let neuron = &mut self.layers[l].neurons[k];
                    changed |= switch_off_neuron(neuron);
                    if l + 1 == depth {
                        changed |= switch_off_poly(&mut self.output_polys[k]);
                    } else {
                        for next in &mut self.layers[l + 1].neurons {
                            changed |= switch_off_poly(&mut next.polys[k]);
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    /// Writes zero into every masked weight and bias.
    pub fn zero_masked(&mut self) {
        for layer in &mut self.layers {
            for neuron in &mut layer.neurons {
                for poly in &mut neuron.polys {
                    zero_poly(poly);
                }
                let oper = &mut neuron.oper;
                for o in 0..oper.w.len() {
                    if !oper.is_on(o) {
                        oper.w[o] = 0.0;
                    }
                }
                if !neuron.bias_mask {
                    neuron.bias = 0.0;
                }
            }
        }
        for poly in &mut self.output_polys {
            zero_poly(poly);
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let net: Self = serde_json::from_str(s)?;
        net.validate()?;
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Flat parameter ranges in traversal order: for each neuron its PolyNets,
    /// bias, OperNet; then the output PolyNets.
    fn visit_blocks(&self, mut f: impl FnMut(Block, Range<usize>)) {
        let mut off = 0;
        let stride = self.n_inputs + 1;
        for layer in &self.layers {
            for neuron in &layer.neurons {
                for _ in &neuron.polys {
                    f(Block::Poly, off..off + stride);
                    off += stride;
                }
                f(Block::Bias, off..off + 1);
                off += 1;
                let o = neuron.oper.w.len();
                f(Block::Oper, off..off + o);
                off += o;
            }
        }
        for _ in &self.output_polys {
            f(Block::Poly, off..off + stride);
            off += stride;
        }
    }

    fn n_params_raw(&self) -> usize {
        let mut n = 0;
        self.visit_blocks(|_, r| n = r.end);
        n
    }

    fn for_each_weight_mut(&mut self, mut f: impl FnMut(usize, &mut f64, &mut bool, &mut bool)) {
        // f(index, value, weight-mask, group-mask)
        let mut idx = 0;
        for layer in &mut self.layers {
            for neuron in &mut layer.neurons {
                for poly in &mut neuron.polys {
                    for j in 0..poly.w.len() {
                        f(idx, &mut poly.w[j], &mut poly.mask[j], &mut poly.group_mask);
                        idx += 1;
                    }
                }
                let mut always = true;
                f(idx, &mut neuron.bias, &mut neuron.bias_mask, &mut always);
                idx += 1;
                let oper = &mut neuron.oper;
                for o in 0..oper.w.len() {
                    f(idx, &mut oper.w[o], &mut oper.mask[o], &mut oper.group_mask);
                    idx += 1;
                }
            }
        }
        for poly in &mut self.output_polys {
            for j in 0..poly.w.len() {
                f(idx, &mut poly.w[j], &mut poly.mask[j], &mut poly.group_mask);
                idx += 1;
            }
        }
    }

    fn group_masks_mut(&mut self) -> Vec<&mut bool> {
        let mut out = Vec::new();
        let depth = self.layers.len();
        let (layers, outputs) = (&mut self.layers, &mut self.output_polys);
        for layer in layers.iter_mut().take(depth) {
            for neuron in &mut layer.neurons {
                for poly in &mut neuron.polys {
                    out.push(&mut poly.group_mask);
                }
                out.push(&mut neuron.oper.group_mask);
            }
        }
        for poly in outputs.iter_mut() {
            out.push(&mut poly.group_mask);
        }
        out
    }

    fn enforce_group_dominance(&mut self) {
        for layer in &mut self.layers {
            for neuron in &mut layer.neurons {
                for poly in &mut neuron.polys {
                    if !poly.group_mask {
                        poly.mask.iter_mut().for_each(|m| *m = false);
                    }
                }
                if !neuron.oper.group_mask {
                    neuron.oper.mask.iter_mut().for_each(|m| *m = false);
                }
            }
        }
        for poly in &mut self.output_polys {
            if !poly.group_mask {
                poly.mask.iter_mut().for_each(|m| *m = false);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Block {
    Poly,
    Bias,
    Oper,
}

fn zero_poly(poly: &mut PolyNet) {
    for j in 0..poly.w.len() {
        if !poly.is_on(j) {
            poly.w[j] = 0.0;
        }
    }
}

fn switch_off_poly(poly: &mut PolyNet) -> bool {
    let was = poly.group_mask || poly.mask.iter().any(|&m| m);
    poly.group_mask = false;
    poly.mask.iter_mut().for_each(|m| *m = false);
    was
}

fn switch_off_neuron(neuron: &mut Neuron) -> bool {
    let mut changed = false;
    for poly in &mut neuron.polys {
        changed |= switch_off_poly(poly);
    }
    let oper = &mut neuron.oper;
    if oper.group_mask || oper.mask.iter().any(|&m| m) {
        changed = true;
    }
    oper.group_mask = false;
    oper.mask.iter_mut().for_each(|m| *m = false);
    if neuron.bias_mask {
        changed = true;
        neuron.bias_mask = false;
    }
    changed
}

/// Evaluates a PolyNet at `x` with a dimension check.
pub fn poly_eval(poly: &PolyNet, x: &[f64]) -> Result<f64> {
    poly.check()?;
    check_len("poly_eval input", poly.n_inputs(), x.len())?;
    Ok(poly.value(x))
}

/// Evaluates an OperNet at pre-activation `h`.
pub fn oper_eval(oper: &OperNet, h: f64, unary_set: &[UnaryKind]) -> Result<f64> {
    oper.check(unary_set.len())?;
    Ok(oper.value(h, unary_set))
}

/// Number of distinct sub-graphs selectable from `n_connections` on/off bits.
pub fn expression_space_size(n_connections: usize) -> BigUint {
    BigUint::from(1u8) << n_connections
}

impl Model for MathONet {
    type Trace = EvalTrace;

    fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    fn layout(&self) -> ParamLayout {
        let n = self.n_params_raw();
        let mut groups = Vec::new();
        let mut connection = vec![true; n];
        self.visit_blocks(|block, range| match block {
            Block::Poly | Block::Oper => groups.push(range),
            Block::Bias => connection[range.start] = false,
        });
        ParamLayout {
            n_params: n,
            groups,
            prunable: vec![true; n],
            connection,
        }
    }

    fn params(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_params_raw()];
        let mut net = self.clone();
        net.for_each_weight_mut(|i, w, _, _| out[i] = *w);
        out
    }

    fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params_raw(), "parameter vector length");
        self.for_each_weight_mut(|i, w, _, _| *w = p[i]);
    }

    fn active(&self) -> Vec<bool> {
        let mut out = vec![false; self.n_params_raw()];
        let mut net = self.clone();
        net.for_each_weight_mut(|i, _, m, g| out[i] = *m && *g);
        out
    }

    fn group_active(&self) -> Vec<bool> {
        let mut net = self.clone();
        net.group_masks_mut().into_iter().map(|g| *g).collect()
    }

    fn apply_masks(&mut self, keep: &[bool], keep_group: &[bool]) {
        for (g, &k) in self.group_masks_mut().into_iter().zip(keep_group) {
            *g &= k;
        }
        self.for_each_weight_mut(|i, _, m, _| *m &= keep[i]);
        self.enforce_group_dominance();
        self.prune_dead_paths();
        self.zero_masked();
    }

    #[inline]
    fn eval(&self, x: &[f64], trace: &mut EvalTrace) -> f64 {
        self.eval_into(x, trace)
    }

    fn accumulate_gradient(&self, trace: &EvalTrace, scale: f64, grad: &mut [f64]) {
        crate::grad::accumulate_output_gradient(self, trace, scale, grad);
    }

    fn fold_scaling(&mut self, input_scale: &[f64], output_scale: f64) -> Vec<f64> {
        let n = self.n_inputs;
        assert_eq!(input_scale.len(), n);
        let stride = n + 1;
        let mut factors = vec![1.0; self.n_params_raw()];
        // Factors for one PolyNet: input weights pick up 1/s_j.
        let poly_factor = |j: usize| if j < n { 1.0 / input_scale[j] } else { 1.0 };
        let mut off = 0;
        for (l, layer) in self.layers.iter().enumerate() {
            for neuron in &layer.neurons {
                for i in 0..neuron.polys.len() {
                    // Layer-1 PolyNets multiply input x_i, which carries 1/s_i.
                    let carry = if l == 0 { 1.0 / input_scale[i] } else { 1.0 };
                    for j in 0..stride {
                        factors[off + j] = poly_factor(j) * carry;
                    }
                    off += stride;
                }
                off += 1 + neuron.oper.w.len();
            }
        }
        for _ in &self.output_polys {
            for j in 0..stride {
                factors[off + j] = poly_factor(j) * output_scale;
            }
            off += stride;
        }
        let scaled: Vec<f64> = self.params().iter().zip(&factors).map(|(w, f)| w * f).collect();
        self.set_params(&scaled);
        factors
    }

    fn expression(&self) -> Expression {
        symbolic::extract_expression(self)
    }

    fn active_connections(&self) -> usize {
        self.count_active_connections()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn lorenz_x_net() -> MathONet {
        // One neuron: h = (-10) * x + (10) * y, identity w = 1, q = 1.
        let mut net = MathONet::zeros(3, &[1], &[UnaryKind::Identity]);
        let n = &mut net.layers[0].neurons[0];
        n.polys[0].w = vec![0.0, 0.0, 0.0, -10.0];
        n.polys[1].w = vec![0.0, 0.0, 0.0, 10.0];
        n.oper.w = vec![1.0];
        net.output_polys[0].w = vec![0.0, 0.0, 0.0, 1.0];
        net
    }

    #[test]
    fn poly_eval_examples() {
        let mut poly = PolyNet::from_weights(vec![2.0, -1.0, 3.0]);
        assert_eq!(poly_eval(&poly, &[1.0, 1.0]).unwrap(), 4.0);
        poly.mask = vec![true, false, true];
        assert_eq!(poly_eval(&poly, &[1.0, 1.0]).unwrap(), 5.0);
        poly.mask = vec![false; 3];
        assert_eq!(poly_eval(&poly, &[1.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(poly_eval(&poly, &[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn oper_eval_examples() {
        let ident = OperNet::from_weights(vec![1.0]);
        assert_eq!(oper_eval(&ident, 7.0, &[UnaryKind::Identity]).unwrap(), 7.0);
        let both = OperNet::from_weights(vec![2.0, FRAC_PI_2]);
        let v = oper_eval(&both, 1.0, &[UnaryKind::Identity, UnaryKind::Sin]).unwrap();
        assert!((v - 3.0).abs() < 1e-15);
        let mut cos = OperNet::from_weights(vec![0.5]);
        cos.mask = vec![false];
        assert_eq!(oper_eval(&cos, 3.0, &[UnaryKind::Cos]).unwrap(), 0.0);
    }

    #[test]
    fn forward_hand_wired() {
        let net = lorenz_x_net();
        let (y, trace) = net.forward(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(y, -10.0);
        assert_eq!(trace.replay().to_bits(), y.to_bits());

        // xy - (8/3) z: P_x carries y, P_z carries the constant -8/3.
        let mut net = MathONet::zeros(3, &[1], &[UnaryKind::Identity]);
        let n = &mut net.layers[0].neurons[0];
        n.polys[0].w = vec![0.0, 1.0, 0.0, 0.0];
        n.polys[2].w = vec![0.0, 0.0, 0.0, -8.0 / 3.0];
        n.oper.w = vec![1.0];
        net.output_polys[0].w = vec![0.0, 0.0, 0.0, 1.0];
        let (y, _) = net.forward(&[2.0, 3.0, 3.0]).unwrap();
        assert!((y + 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_net_with_identity_is_zero() {
        let net = MathONet::zeros(2, &[2], &[UnaryKind::Identity]);
        assert_eq!(net.forward(&[3.0, -1.0]).unwrap().0, 0.0);
    }

    #[test]
    fn safe_ops_stay_finite() {
        assert!(UnaryKind::Log.eval(0.0).is_finite());
        assert!(UnaryKind::Exp.eval(1e6).is_finite());
        assert_eq!(UnaryKind::Exp.deriv(31.0), 0.0);
        assert_eq!(UnaryKind::Log.deriv(0.0), 0.0);
    }

    #[test]
    fn connection_counts() {
        let net = MathONet::zeros(3, &[3], &UnaryKind::ALL);
        // 3 neurons × (3 PolyNets × 4 + 5 unary) + 3 output PolyNets × 4
        assert_eq!(net.count_active_connections(), 3 * (12 + 5) + 12);
        let layout = net.layout();
        assert_eq!(layout.n_params, net.count_active_connections() + 3);
        let mut dead = net.clone();
        let n = dead.layout().n_params;
        let g = dead.layout().groups.len();
        dead.apply_masks(&vec![false; n], &vec![false; g]);
        assert_eq!(dead.count_active_connections(), 0);
    }

    #[test]
    fn expression_space() {
        assert_eq!(expression_space_size(9), BigUint::from(512u32));
        assert_eq!(expression_space_size(0), BigUint::from(1u32));
        assert_eq!(expression_space_size(20), BigUint::from(1_048_576u32));
    }

    #[test]
    fn group_off_with_live_mask_is_rejected() {
        let mut net = lorenz_x_net();
        net.output_polys[0].group_mask = false;
        assert!(net.validate().is_err());
    }

    #[test]
    fn dead_output_cuts_neuron() {
        let mut net = MathONet::zeros(2, &[2], &[UnaryKind::Identity, UnaryKind::Cos]);
        net.output_polys[1].group_mask = false;
        net.output_polys[1].mask = vec![false; 3];
        net.prune_dead_paths();
        let neuron = &net.layers[0].neurons[1];
        assert!(!neuron.oper.is_active());
        assert!(neuron.polys.iter().all(|p| !p.is_active()));
        assert!(!neuron.bias_mask);
        assert!(net.layers[0].neurons[0].oper.is_active());
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut net = MathONet::random(2, &[2, 2], &UnaryKind::ALL, 0.5, &mut rng);
        net.output_polys[0].mask[1] = false;
        net.layers[0].neurons[1].bias_mask = false;
        net.zero_masked();
        let a = net.to_json().unwrap();
        let back = MathONet::from_json(&a).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.to_json().unwrap(), a);
        assert!(a.contains("\"group_mask\": 1"));
    }

    use rand::SeedableRng;

    #[test]
    fn fold_scaling_preserves_function() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let net = MathONet::random(3, &[2, 2], &UnaryKind::ALL, 0.5, &mut rng);
        let s_in = [2.0, 0.5, 4.0];
        let s_out = 3.0;
        let mut folded = net.clone();
        folded.fold_scaling(&s_in, s_out);
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let xs: Vec<f64> = x.iter().zip(&s_in).map(|(v, s)| v / s).collect();
            let want = s_out * net.predict(&xs);
            let got = folded.predict(&x);
            assert!((want - got).abs() <= 1e-10 * (1.0 + want.abs()), "{want} vs {got}");
        }
    }
}

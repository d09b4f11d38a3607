//! Symbolic view of a trained model: exact extraction into an expression
//! tree, polynomial expansion along identity paths, term counting and a
//! canonical display string.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mathonet::{MathONet, PolyNet, UnaryKind};

/// Display/term-count floor used when callers do not pick one.
pub const DEFAULT_COEFF_FLOOR: f64 = 1e-4;

#[derive(Clone, Debug)]
pub enum Expression {
    Const(f64),
    Var(usize),
    Add(Vec<Expression>),
    Mul(Vec<Expression>),
    Unary(UnaryKind, Box<Expression>),
}

use Expression::*;

impl Expression {
    pub fn zero() -> Self {
        Const(0.0)
    }

    pub fn unary(kind: UnaryKind, child: Expression) -> Self {
        Unary(kind, Box::new(child))
    }

    /// `Add` that collapses to its only child or to `Const(0)` when empty.
    pub fn sum(mut children: Vec<Expression>) -> Self {
        match children.len() {
            0 => Const(0.0),
            1 => children.pop().unwrap(),
            _ => Add(children),
        }
    }

    /// `Mul` that collapses to its only child or to `Const(1)` when empty.
    pub fn product(mut children: Vec<Expression>) -> Self {
        match children.len() {
            0 => Const(1.0),
            1 => children.pop().unwrap(),
            _ => Mul(children),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Const(c) => *c,
            Var(i) => x[*i],
            Add(cs) => cs.iter().map(|c| c.eval(x)).sum(),
            Mul(cs) => cs.iter().map(|c| c.eval(x)).product(),
            Unary(k, c) => k.eval(c.eval(x)),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Const(c) if *c == 0.0)
    }

    /// Renames variables: `Var(i)` becomes `Var(f(i))`.
    pub fn map_vars(&self, f: &impl Fn(usize) -> usize) -> Expression {
        match self {
            Const(c) => Const(*c),
            Var(i) => Var(f(*i)),
            Add(cs) => Add(cs.iter().map(|c| c.map_vars(f)).collect()),
            Mul(cs) => Mul(cs.iter().map(|c| c.map_vars(f)).collect()),
            Unary(k, c) => Unary(*k, Box::new(c.map_vars(f))),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Const(_) => 0,
            Var(_) => 1,
            Mul(_) => 2,
            Add(_) => 3,
            Unary(..) => 4,
        }
    }

    pub fn to_prefix_json(&self) -> Value {
        match self {
            Const(c) => json!(["const", c]),
            Var(i) => json!(["var", i]),
            Add(cs) | Mul(cs) => {
                let head = if matches!(self, Add(_)) { "add" } else { "mul" };
                let mut v = vec![json!(head)];
                v.extend(cs.iter().map(|c| c.to_prefix_json()));
                Value::Array(v)
            }
            Unary(k, c) => json!([k.name(), c.to_prefix_json()]),
        }
    }

    pub fn from_prefix_json(v: &Value) -> Result<Self> {
        let bad = || Error::Data(format!("malformed expression node: {v}"));
        let arr = v.as_array().ok_or_else(bad)?;
        let head = arr.first().and_then(Value::as_str).ok_or_else(bad)?;
        let rest = &arr[1..];
        match head {
            "const" => {
                let c = rest.first().and_then(Value::as_f64).ok_or_else(bad)?;
                Ok(Const(c))
            }
            "var" => {
                let i = rest.first().and_then(Value::as_u64).ok_or_else(bad)?;
                Ok(Var(i as usize))
            }
            "add" | "mul" => {
                let cs = rest.iter().map(Self::from_prefix_json).collect::<Result<Vec<_>>>()?;
                Ok(if head == "add" { Add(cs) } else { Mul(cs) })
            }
            name => {
                let kind: UnaryKind = name.parse().map_err(|_| bad())?;
                let child = rest.first().ok_or_else(bad)?;
                Ok(Unary(kind, Box::new(Self::from_prefix_json(child)?)))
            }
        }
    }
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Expression {}

impl PartialOrd for Expression {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Expression {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Const(a), Const(b)) => a.total_cmp(b),
            (Var(a), Var(b)) => a.cmp(b),
            (Add(a), Add(b)) | (Mul(a), Mul(b)) => a.cmp(b),
            (Unary(ka, a), Unary(kb, b)) => ka.cmp(kb).then_with(|| a.cmp(b)),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl Serialize for Expression {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_prefix_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Expression {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        Self::from_prefix_json(&v).map_err(serde::de::Error::custom)
    }
}

fn poly_expression(poly: &PolyNet) -> Expression {
    if !poly.group_mask {
        return Const(0.0);
    }
    let n = poly.n_inputs();
    let mut terms = Vec::new();
    if poly.mask[n] {
        terms.push(Const(poly.w[n]));
    }
    for j in 0..n {
        if poly.mask[j] {
            terms.push(Mul(vec![Const(poly.w[j]), Var(j)]));
        }
    }
    Expression::sum(terms)
}

/// Exact symbolic mirror of `net`'s forward pass. Identity unaries are
/// written as plain products; masked blocks are left out.
pub fn extract_expression(net: &MathONet) -> Expression {
    let mut prev: Vec<Expression> = (0..net.n_inputs).map(Var).collect();
    for layer in &net.layers {
        let mut cur = Vec::with_capacity(layer.neurons.len());
        for neuron in &layer.neurons {
            if !neuron.oper.is_active() {
                cur.push(Const(0.0));
                continue;
            }
            let mut h_terms = Vec::new();
            for (i, poly) in neuron.polys.iter().enumerate() {
                if poly.is_active() && !prev[i].is_zero() {
                    h_terms.push(Mul(vec![poly_expression(poly), prev[i].clone()]));
                }
            }
            if neuron.bias_mask {
                h_terms.push(Const(neuron.bias));
            }
            let h = Expression::sum(h_terms);
            let mut a_terms = Vec::new();
            for (o, kind) in net.unary_set.iter().enumerate() {
                if !neuron.oper.is_on(o) {
                    continue;
                }
                let arg = Mul(vec![Const(neuron.oper.w[o]), h.clone()]);
                a_terms.push(match kind {
                    UnaryKind::Identity => arg,
                    k => Expression::unary(*k, arg),
                });
            }
            cur.push(Expression::sum(a_terms));
        }
        prev = cur;
    }
    let mut out = Vec::new();
    for (k, poly) in net.output_polys.iter().enumerate() {
        if poly.is_active() && !prev[k].is_zero() {
            out.push(Mul(vec![poly_expression(poly), prev[k].clone()]));
        }
    }
    Expression::sum(out)
}

/// Monomial exponents plus the sorted non-polynomial factors of a term.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct TermKey {
    powers: BTreeMap<usize, u32>,
    factors: Vec<(UnaryKind, Expression)>,
}

impl TermKey {
    fn one() -> Self {
        Self {
            powers: BTreeMap::new(),
            factors: Vec::new(),
        }
    }

    fn degree(&self) -> u32 {
        self.powers.values().sum::<u32>() + self.factors.len() as u32
    }

    fn times(&self, other: &TermKey) -> TermKey {
        let mut powers = self.powers.clone();
        for (v, p) in &other.powers {
            *powers.entry(*v).or_insert(0) += p;
        }
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        factors.sort();
        TermKey { powers, factors }
    }
}

type Poly = BTreeMap<TermKey, f64>;

fn poly_const(c: f64) -> Poly {
    let mut p = Poly::new();
    if c != 0.0 {
        p.insert(TermKey::one(), c);
    }
    p
}

fn poly_add_into(acc: &mut Poly, other: Poly) {
    for (k, c) in other {
        *acc.entry(k).or_insert(0.0) += c;
    }
    acc.retain(|_, c| *c != 0.0);
}

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ka, ca) in a {
        for (kb, cb) in b {
            *out.entry(ka.times(kb)).or_insert(0.0) += ca * cb;
        }
    }
    out.retain(|_, c| *c != 0.0);
    out
}

fn expand(expr: &Expression, floor: f64) -> Poly {
    match expr {
        Const(c) => poly_const(*c),
        Var(i) => {
            let mut key = TermKey::one();
            key.powers.insert(*i, 1);
            Poly::from([(key, 1.0)])
        }
        Add(cs) => {
            let mut acc = Poly::new();
            for c in cs {
                poly_add_into(&mut acc, expand(c, floor));
            }
            acc
        }
        Mul(cs) => {
            let mut acc = poly_const(1.0);
            for c in cs {
                if acc.is_empty() {
                    break;
                }
                acc = poly_mul(&acc, &expand(c, floor));
            }
            acc
        }
        Unary(UnaryKind::Identity, c) => expand(c, floor),
        Unary(k, c) => {
            let inner = fold_inner(c, floor);
            if let Const(v) = inner {
                return poly_const(k.eval(v));
            }
            let mut key = TermKey::one();
            key.factors.push((*k, inner));
            Poly::from([(key, 1.0)])
        }
    }
}

/// Canonical form of a unary argument: constants folded, nested sums and
/// products flattened, identity wrappers dropped, children sorted. Constants
/// and constant factors below `floor` count as zero. No distribution
/// happens here.
fn fold_inner(expr: &Expression, floor: f64) -> Expression {
    match expr {
        Const(c) if c.abs() < floor => Const(0.0),
        Const(c) => Const(*c),
        Var(i) => Var(*i),
        Unary(UnaryKind::Identity, c) => fold_inner(c, floor),
        Unary(k, c) => match fold_inner(c, floor) {
            Const(v) => Const(k.eval(v)),
            inner => Expression::unary(*k, inner),
        },
        Add(cs) => {
            let mut konst = 0.0;
            let mut rest = Vec::new();
            for c in cs {
                match fold_inner(c, floor) {
                    Const(v) => konst += v,
                    Add(grand) => {
                        for g in grand {
                            match g {
                                Const(v) => konst += v,
                                g => rest.push(g),
                            }
                        }
                    }
                    other => rest.push(other),
                }
            }
            rest.sort();
            if konst != 0.0 && konst.abs() >= floor {
                rest.insert(0, Const(konst));
            }
            Expression::sum(rest)
        }
        Mul(cs) => {
            let mut konst = 1.0;
            let mut rest = Vec::new();
            for c in cs {
                match fold_inner(c, floor) {
                    Const(v) => konst *= v,
                    Mul(grand) => {
                        for g in grand {
                            match g {
                                Const(v) => konst *= v,
                                g => rest.push(g),
                            }
                        }
                    }
                    other => rest.push(other),
                }
            }
            if konst == 0.0 || konst.abs() < floor {
                return Const(0.0);
            }
            rest.sort();
            if konst != 1.0 || rest.is_empty() {
                rest.insert(0, Const(konst));
            }
            Expression::product(rest)
        }
    }
}

fn term_expression(key: &TermKey, coeff: f64) -> Expression {
    let mut factors = Vec::new();
    if coeff != 1.0 || (key.powers.is_empty() && key.factors.is_empty()) {
        factors.push(Const(coeff));
    }
    for (&v, &p) in &key.powers {
        for _ in 0..p {
            factors.push(Var(v));
        }
    }
    for (k, inner) in &key.factors {
        factors.push(Expression::unary(*k, inner.clone()));
    }
    Expression::product(factors)
}

/// Canonical term order: descending degree, then by rendered monomial.
fn ordered_terms(poly: &Poly, names: &dyn Fn(usize) -> String, decimals: usize) -> Vec<(String, TermKey, f64)> {
    let mut terms: Vec<(String, TermKey, f64)> = poly
        .iter()
        .map(|(k, &c)| (render_body(k, names, decimals), k.clone(), c))
        .collect();
    terms.sort_by(|a, b| {
        b.1.degree()
            .cmp(&a.1.degree())
            .then_with(|| a.0.cmp(&b.0))
            .then_with(|| a.1.cmp(&b.1))
    });
    terms
}

/// Expands products along identity paths, merges like terms and drops terms
/// whose coefficient magnitude is below `coeff_floor`. Inside unary
/// arguments the floor only zeroes constants and constant factors, which
/// lets e.g. `cos(1e-6·h)` fold to 1.
pub fn simplify(expr: &Expression, coeff_floor: f64) -> Expression {
    let mut poly = expand(expr, coeff_floor);
    poly.retain(|_, c| c.abs() >= coeff_floor && *c != 0.0);
    let names = default_name;
    let terms = ordered_terms(&poly, &names, 12);
    Expression::sum(terms.iter().map(|(_, k, c)| term_expression(k, *c)).collect())
}

/// Number of top-level additive terms of a simplified expression.
pub fn term_count(expr: &Expression) -> usize {
    match expr {
        Add(cs) => cs.iter().filter(|c| !c.is_zero()).count(),
        e if e.is_zero() => 0,
        _ => 1,
    }
}

/// Coefficient of every term after expansion, keyed by the rendered monomial
/// (`"x·y"`, `"z"`, `""` for the constant).
pub fn coefficients(expr: &Expression, coeff_floor: f64) -> Vec<(String, f64)> {
    let mut poly = expand(expr, coeff_floor);
    poly.retain(|_, c| c.abs() >= coeff_floor && *c != 0.0);
    ordered_terms(&poly, &default_name, 12)
        .into_iter()
        .map(|(body, _, c)| (body, c))
        .collect()
}

/// `x`, `y`, `z`, then `x4`, `x5`, …
pub fn default_name(i: usize) -> String {
    match i {
        0 => "x".into(),
        1 => "y".into(),
        2 => "z".into(),
        _ => format!("x{}", i + 1),
    }
}

/// Canonical display string with `decimals` digits per coefficient.
pub fn to_string(expr: &Expression, decimals: usize) -> String {
    to_string_with(expr, decimals, &default_name)
}

pub fn to_string_with(expr: &Expression, decimals: usize, names: &dyn Fn(usize) -> String) -> String {
    let decimals = decimals.clamp(1, 12);
    let poly = expand(expr, 0.0);
    if poly.is_empty() {
        return "0".into();
    }
    let mut out = String::new();
    for (idx, (body, _, c)) in ordered_terms(&poly, names, decimals).iter().enumerate() {
        let mag = format!("{:.*}", decimals, c.abs());
        if idx == 0 {
            if *c < 0.0 {
                out.push('-');
            }
        } else {
            out.push_str(if *c < 0.0 { " - " } else { " + " });
        }
        out.push_str(&mag);
        if !body.is_empty() {
            out.push('·');
            out.push_str(body);
        }
    }
    out
}

fn render_body(key: &TermKey, names: &dyn Fn(usize) -> String, decimals: usize) -> String {
    let mut parts = Vec::new();
    for (&v, &p) in &key.powers {
        if p == 1 {
            parts.push(names(v));
        } else {
            parts.push(format!("{}^{}", names(v), p));
        }
    }
    for (k, inner) in &key.factors {
        parts.push(format!("{}({})", k.name(), render_inner(inner, names, decimals)));
    }
    parts.join("·")
}

fn render_inner(expr: &Expression, names: &dyn Fn(usize) -> String, decimals: usize) -> String {
    match expr {
        Const(c) => format!("{:.*}", decimals, c),
        Var(i) => names(*i),
        Mul(cs) => cs
            .iter()
            .map(|c| match c {
                Add(_) => format!("({})", render_inner(c, names, decimals)),
                _ => render_inner(c, names, decimals),
            })
            .collect::<Vec<_>>()
            .join("·"),
        Add(cs) => {
            let mut s = String::new();
            for (i, c) in cs.iter().enumerate() {
                let r = render_inner(c, names, decimals);
                if i == 0 {
                    s.push_str(&r);
                } else if let Some(stripped) = r.strip_prefix('-') {
                    let _ = write!(s, " - {stripped}");
                } else {
                    let _ = write!(s, " + {r}");
                }
            }
            s
        }
        Unary(k, c) => format!("{}({})", k.name(), render_inner(c, names, decimals)),
    }
}

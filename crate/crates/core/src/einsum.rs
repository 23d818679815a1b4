//! A small Einstein-summation language for isotropic contractions.
//!
//! An expression is a whitespace-separated product of factors `Name_labels`,
//! e.g. `A_ipq A_jpq`. Every label is a single lowercase letter and appears
//! once (free, an output slot) or twice (summed). Free labels sorted
//! alphabetically define the output slot order. Two builtin symbols exist:
//! `d` (Kronecker delta, two labels) and `e` (Levi-Civita, three labels, only
//! in dimension 3).
//!
//! Evaluation is a plain nested loop: output slots outermost, then the summed
//! labels in alphabetical order with the last one innermost. No contraction
//! planning is done; the fixed order makes results bit-reproducible.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{DenseTensor, SymTensor};

/// Maximum number of distinct labels in one expression.
pub const MAX_LABELS: usize = 12;

pub const DELTA: &str = "d";
pub const LEVI_CIVITA: &str = "e";

fn builtin_arity(symbol: &str) -> Option<usize> {
    match symbol {
        DELTA => Some(2),
        LEVI_CIVITA => Some(3),
        _ => None,
    }
}

pub fn is_builtin(symbol: &str) -> bool {
    builtin_arity(symbol).is_some()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    pub symbol: String,
    pub labels: Vec<char>,
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_", self.symbol)?;
        self.labels.iter().try_for_each(|c| write!(f, "{c}"))
    }
}

/// Parsed contraction with validated label multiplicities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractionExpr {
    factors: Vec<Factor>,
    free: Vec<char>,
    summed: Vec<char>,
}

impl ContractionExpr {
    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Output labels in slot order.
    pub fn free_labels(&self) -> &[char] {
        &self.free
    }

    pub fn summed_labels(&self) -> &[char] {
        &self.summed
    }

    pub fn is_scalar(&self) -> bool {
        self.free.is_empty()
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.factors.iter().map(|f| f.symbol.as_str())
    }
}

impl fmt::Display for ContractionExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, factor) in self.factors.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{factor}")?;
        }
        Ok(())
    }
}

fn parse_err(column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line: 1,
        column,
        message: message.into(),
    }
}

fn is_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric())
}

/// Splits `text` into whitespace-separated tokens with 1-based columns.
fn tokens(text: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push((s + 1, &text[s..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &text[s..]));
    }
    out
}

fn parse_factor(column: usize, token: &str) -> Result<Factor> {
    let (symbol, labels) = token
        .split_once('_')
        .ok_or_else(|| parse_err(column, format!("malformed factor {token:?}: expected Name_labels")))?;
    if !is_symbol(symbol) {
        return Err(parse_err(column, format!("malformed symbol {symbol:?} in {token:?}")));
    }
    if labels.is_empty() || !labels.chars().all(|c| c.is_ascii_lowercase()) {
        return Err(parse_err(
            column,
            format!("malformed labels {labels:?} in {token:?}: expected letters a-z"),
        ));
    }
    let labels: Vec<char> = labels.chars().collect();
    if let Some(arity) = builtin_arity(symbol) {
        if labels.len() != arity {
            return Err(parse_err(
                column,
                format!("builtin {symbol} takes {arity} labels, got {}", labels.len()),
            ));
        }
    }
    Ok(Factor {
        symbol: symbol.to_string(),
        labels,
    })
}

/// Parses an expression such as `"A_ipq A_jpq"`.
pub fn parse(text: &str) -> Result<ContractionExpr> {
    let toks = tokens(text);
    if toks.is_empty() {
        return Err(parse_err(1, "empty expression"));
    }
    let mut factors = Vec::with_capacity(toks.len());
    let mut counts: BTreeMap<char, usize> = BTreeMap::new();
    for (column, tok) in toks {
        let factor = parse_factor(column, tok)?;
        for &c in &factor.labels {
            let n = counts.entry(c).or_insert(0);
            *n += 1;
            if *n > 2 {
                return Err(parse_err(column, format!("label '{c}' used more than twice")));
            }
        }
        factors.push(factor);
    }
    if counts.len() > MAX_LABELS {
        return Err(parse_err(
            1,
            format!("{} distinct labels exceed the limit of {MAX_LABELS}", counts.len()),
        ));
    }
    let free = counts.iter().filter(|(_, &n)| n == 1).map(|(&c, _)| c).collect();
    let summed = counts.iter().filter(|(_, &n)| n == 2).map(|(&c, _)| c).collect();
    Ok(ContractionExpr {
        factors,
        free,
        summed,
    })
}

/// A named intermediate tensor, e.g. `B_ij = A_ipq A_jpq`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LetBinding {
    name: String,
    indices: Vec<char>,
    expr: ContractionExpr,
}

impl LetBinding {
    pub fn new(name: &str, indices: &[char], expr: ContractionExpr) -> Result<Self> {
        if !is_symbol(name) || is_builtin(name) {
            return Err(Error::Expr(format!("invalid let name {name:?}")));
        }
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Expr(format!("repeated index in let {name}")));
        }
        if sorted != expr.free {
            return Err(Error::Expr(format!(
                "let {name}: indices {:?} do not match the free labels {:?} of `{expr}`",
                indices, expr.free
            )));
        }
        if expr.symbols().any(|s| s == name) {
            return Err(Error::Expr(format!("let {name} refers to itself")));
        }
        Ok(Self {
            name: name.to_string(),
            indices: indices.to_vec(),
            expr,
        })
    }

    /// Parses `"B_ij = A_ipq A_jpq"`.
    pub fn parse(text: &str) -> Result<Self> {
        let (lhs, rhs) = text
            .split_once('=')
            .ok_or_else(|| parse_err(1, "let binding needs '='"))?;
        let lhs_trim = lhs.trim();
        let lhs_col = lhs.find(lhs_trim).unwrap_or(0) + 1;
        let head = parse_factor(lhs_col, lhs_trim)?;
        let rhs_offset = lhs.len() + 1;
        let expr = parse(rhs).map_err(|e| shift_columns(e, 0, rhs_offset))?;
        Self::new(&head.symbol, &head.labels, expr).map_err(|e| match e {
            Error::Expr(message) => parse_err(lhs_col, message),
            other => other,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn indices(&self) -> &[char] {
        &self.indices
    }

    pub fn arity(&self) -> usize {
        self.indices.len()
    }

    pub fn expr(&self) -> &ContractionExpr {
        &self.expr
    }
}

impl fmt::Display for LetBinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_", self.name)?;
        self.indices.iter().try_for_each(|c| write!(f, "{c}"))?;
        write!(f, " = {}", self.expr)
    }
}

/// Moves parse-error positions by the given line and column offsets.
pub(crate) fn shift_columns(e: Error, line_offset: usize, column_offset: usize) -> Error {
    match e {
        Error::Parse {
            line,
            column,
            message,
        } => Error::Parse {
            line: line + line_offset,
            column: column + column_offset,
            message,
        },
        other => other,
    }
}

/// Checks that let names are unique and only refer to earlier bindings.
pub fn validate_lets(lets: &[LetBinding]) -> Result<()> {
    for (i, l) in lets.iter().enumerate() {
        if lets[..i].iter().any(|p| p.name == l.name) {
            return Err(Error::Expr(format!("let {} bound twice", l.name)));
        }
        for sym in l.expr.symbols() {
            if let Some(j) = lets.iter().position(|p| p.name == sym) {
                if j >= i {
                    return Err(Error::Expr(format!(
                        "let {} refers to {sym}, which is not bound before it",
                        l.name
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Named input tensors sharing one ambient dimension.
#[derive(Debug, Clone)]
pub struct EvalContext<T> {
    dim: usize,
    tensors: HashMap<String, SymTensor<T>>,
}

impl<T: Real> EvalContext<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            tensors: HashMap::new(),
        }
    }

    pub fn with(mut self, name: &str, tensor: SymTensor<T>) -> Result<Self> {
        self.insert(name, tensor)?;
        Ok(self)
    }

    pub fn insert(&mut self, name: &str, tensor: SymTensor<T>) -> Result<()> {
        if !is_symbol(name) || is_builtin(name) {
            return Err(Error::Eval(format!("invalid tensor symbol {name:?}")));
        }
        if tensor.dim() != self.dim {
            return Err(Error::Eval(format!(
                "tensor {name} has dimension {}, context has {}",
                tensor.dim(),
                self.dim
            )));
        }
        self.tensors.insert(name.to_string(), tensor);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, name: &str) -> Option<&SymTensor<T>> {
        self.tensors.get(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Evaluate each let binding at most once per call.
    pub cache_lets: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { cache_lets: true }
    }
}

fn delta<T: Real>(n: usize) -> DenseTensor<T> {
    SymTensor::identity(n).to_dense()
}

fn levi_civita<T: Real>() -> DenseTensor<T> {
    let mut t = DenseTensor::zeros(3, 3);
    for (idx, s) in [
        ([0, 1, 2], 1.0),
        ([1, 2, 0], 1.0),
        ([2, 0, 1], 1.0),
        ([0, 2, 1], -1.0),
        ([2, 1, 0], -1.0),
        ([1, 0, 2], -1.0),
    ] {
        t.set(&idx, T::lit(s));
    }
    t
}

struct Evaluator<'a, T> {
    ctx: &'a EvalContext<T>,
    lets: &'a [LetBinding],
    opts: EvalOptions,
    cache: HashMap<String, DenseTensor<T>>,
}

impl<T: Real> Evaluator<'_, T> {
    fn operand(&mut self, factor: &Factor) -> Result<DenseTensor<T>> {
        let n = self.ctx.dim;
        let arity = factor.labels.len();
        let tensor = if let Some(t) = self.ctx.tensors.get(&factor.symbol) {
            t.to_dense()
        } else if factor.symbol == DELTA {
            delta(n)
        } else if factor.symbol == LEVI_CIVITA {
            if n != 3 {
                return Err(Error::Eval(format!(
                    "Levi-Civita symbol requires dimension 3, context has {n}"
                )));
            }
            levi_civita()
        } else if let Some(pos) = self.lets.iter().position(|l| l.name == factor.symbol) {
            if let Some(t) = self.cache.get(&factor.symbol) {
                t.clone()
            } else {
                let binding = &self.lets[pos];
                let value = self.contract(&binding.expr)?.symmetrize().to_dense();
                if self.opts.cache_lets {
                    self.cache.insert(factor.symbol.clone(), value.clone());
                }
                value
            }
        } else {
            return Err(Error::Eval(format!("unresolved symbol {}", factor.symbol)));
        };
        if tensor.order() != arity {
            return Err(Error::Eval(format!(
                "{} has order {}, used with {arity} labels in {factor}",
                factor.symbol,
                tensor.order()
            )));
        }
        Ok(tensor)
    }

    /// Raw nested-loop contraction; output slots follow the sorted free labels.
    fn contract(&mut self, expr: &ContractionExpr) -> Result<DenseTensor<T>> {
        let n = self.ctx.dim;
        // label ids: free labels first (slot order), then summed labels alphabetically
        let order: Vec<char> = expr.free.iter().chain(&expr.summed).copied().collect();
        let id = |c: char| order.iter().position(|&x| x == c).unwrap();
        let mut operands = Vec::with_capacity(expr.factors.len());
        for factor in &expr.factors {
            let t = self.operand(factor)?;
            let k = factor.labels.len();
            let strides: Vec<(usize, usize)> = factor
                .labels
                .iter()
                .enumerate()
                .map(|(s, &c)| (id(c), n.pow((k - 1 - s) as u32)))
                .collect();
            operands.push((t, strides));
        }
        let nfree = expr.free.len();
        let nsum = expr.summed.len();
        let mut out = DenseTensor::zeros(nfree, n);
        let mut vals = vec![0usize; order.len()];
        let inner_total = n.pow(nsum as u32);
        for out_flat in 0..out.data().len() {
            let mut rem = out_flat;
            for slot in (0..nfree).rev() {
                vals[slot] = rem % n;
                rem /= n;
            }
            let mut acc = T::zero();
            for _ in 0..inner_total {
                let mut prod = T::one();
                for (t, strides) in &operands {
                    let flat: usize = strides.iter().map(|&(l, s)| vals[l] * s).sum();
                    prod *= t.data()[flat];
                }
                acc += prod;
                // odometer over summed labels, last label fastest
                for slot in (nfree..nfree + nsum).rev() {
                    vals[slot] += 1;
                    if vals[slot] < n {
                        break;
                    }
                    vals[slot] = 0;
                }
            }
            out.data_mut()[out_flat] = acc;
        }
        Ok(out)
    }
}

/// Raw contraction result in `T(k, n)`, `k` = number of free labels.
pub fn evaluate_dense<T: Real>(
    expr: &ContractionExpr,
    ctx: &EvalContext<T>,
    lets: &[LetBinding],
    opts: EvalOptions,
) -> Result<DenseTensor<T>> {
    validate_lets(lets)?;
    let mut ev = Evaluator {
        ctx,
        lets,
        opts,
        cache: HashMap::new(),
    };
    ev.contract(expr)
}

/// Evaluates and symmetrizes the result (an order-0 tensor for scalar expressions).
pub fn evaluate<T: Real>(
    expr: &ContractionExpr,
    ctx: &EvalContext<T>,
    lets: &[LetBinding],
) -> Result<SymTensor<T>> {
    evaluate_with(expr, ctx, lets, EvalOptions::default())
}

pub fn evaluate_with<T: Real>(
    expr: &ContractionExpr,
    ctx: &EvalContext<T>,
    lets: &[LetBinding],
    opts: EvalOptions,
) -> Result<SymTensor<T>> {
    Ok(evaluate_dense(expr, ctx, lets, opts)?.symmetrize())
}

/// Value of a scalar expression.
pub fn evaluate_scalar<T: Real>(
    expr: &ContractionExpr,
    ctx: &EvalContext<T>,
    lets: &[LetBinding],
) -> Result<T> {
    if !expr.is_scalar() {
        return Err(Error::Eval(format!("`{expr}` has free labels {:?}", expr.free)));
    }
    Ok(evaluate_dense(expr, ctx, lets, EvalOptions::default())?.data()[0])
}

/// Values of several scalar expressions sharing one let cache.
pub fn evaluate_scalars<T: Real>(
    exprs: &[&ContractionExpr],
    ctx: &EvalContext<T>,
    lets: &[LetBinding],
) -> Result<Vec<T>> {
    validate_lets(lets)?;
    let mut ev = Evaluator {
        ctx,
        lets,
        opts: EvalOptions::default(),
        cache: HashMap::new(),
    };
    exprs
        .iter()
        .map(|e| {
            if !e.is_scalar() {
                return Err(Error::Eval(format!("`{e}` has free labels {:?}", e.free)));
            }
            Ok(ev.contract(e)?.data()[0])
        })
        .collect()
}

/// Number of occurrences of `symbol` after inlining lets.
pub fn polynomial_degree(expr: &ContractionExpr, lets: &[LetBinding], symbol: &str) -> usize {
    expr.factors
        .iter()
        .map(|f| {
            if f.symbol == symbol {
                1
            } else if let Some(l) = lets.iter().find(|l| l.name == f.symbol) {
                polynomial_degree(&l.expr, lets, symbol)
            } else {
                0
            }
        })
        .sum()
}

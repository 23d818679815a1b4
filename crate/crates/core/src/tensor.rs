//! Symmetric and traceless tensors with canonical symmetric storage.
//!
//! A [`SymTensor`] stores one value per symmetry class of multi-indices,
//! i.e. per non-decreasing index tuple, in lexicographic order. Reading any
//! permutation of a multi-index returns the value of its class, so total
//! symmetry holds by construction. Indices are 0-based in memory and 1-based
//! in the JSON file format.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Binomial coefficient `C(n, k)`, zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceKind {
    /// All real tensors `T(m, n)`.
    T,
    /// Symmetric tensors `S(m, n)`.
    S,
    /// Symmetric traceless tensors `St(m, n)`.
    St,
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpaceKind::T => "T",
            SpaceKind::S => "S",
            SpaceKind::St => "St",
        })
    }
}

impl FromStr for SpaceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "T" => Ok(SpaceKind::T),
            "S" => Ok(SpaceKind::S),
            "St" => Ok(SpaceKind::St),
            other => Err(Error::InvalidSpace(format!("unknown space kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TensorSpaceSpec {
    pub kind: SpaceKind,
    pub order: usize,
    pub dim: usize,
}

impl TensorSpaceSpec {
    /// Validated constructor: `order ≥ 1`, `dim ≥ 1`, and `order ≥ 2` for `St`.
    pub fn new(kind: SpaceKind, order: usize, dim: usize) -> Result<Self> {
        let spec = Self { kind, order, dim };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 1 || self.dim < 1 {
            return Err(Error::InvalidSpace(format!(
                "{self}: order and dimension must be at least 1"
            )));
        }
        if self.kind == SpaceKind::St && self.order < 2 {
            return Err(Error::InvalidSpace(format!(
                "{self}: traceless spaces need order at least 2"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for TensorSpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},{})", self.kind, self.order, self.dim)
    }
}

/// Linear dimension of a tensor space.
pub fn dim_space(spec: &TensorSpaceSpec) -> Result<usize> {
    spec.validate()?;
    let (m, n) = (spec.order, spec.dim);
    Ok(match spec.kind {
        SpaceKind::T => n.pow(m as u32),
        SpaceKind::S => binomial(n + m - 1, n - 1),
        SpaceKind::St => binomial(n + m - 1, n - 1) - binomial(n + m - 3, n - 1),
    })
}

/// A multi-index `(i_1, …, i_m)` with 0-based entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    /// Non-decreasing sort of the indices.
    pub fn canonical(&self) -> MultiIndex {
        let mut v = self.0.clone();
        v.sort_unstable();
        MultiIndex(v)
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }
}

/// Index bookkeeping shared by all symmetric tensors of one `(order, dim)`.
#[derive(Debug)]
pub struct SymLayout {
    order: usize,
    dim: usize,
    classes: Vec<Vec<usize>>,
    orbit_sizes: Vec<usize>,
    flat_to_class: Vec<usize>,
    class_lookup: HashMap<Vec<usize>, usize>,
}

impl SymLayout {
    /// Shared layout for the given shape.
    pub fn get(order: usize, dim: usize) -> Arc<SymLayout> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<SymLayout>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry((order, dim))
            .or_insert_with(|| Arc::new(SymLayout::build(order, dim)))
            .clone()
    }

    fn build(order: usize, dim: usize) -> Self {
        assert!(dim >= 1, "tensor dimension must be positive");
        let mut classes = Vec::new();
        let mut cur = vec![0usize; order];
        loop {
            classes.push(cur.clone());
            // next non-decreasing tuple in lexicographic order
            let mut pos = order;
            while pos > 0 && cur[pos - 1] == dim - 1 {
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
            let v = cur[pos - 1] + 1;
            for c in cur.iter_mut().skip(pos - 1) {
                *c = v;
            }
        }
        let class_lookup: HashMap<Vec<usize>, usize> = classes
            .iter()
            .enumerate()
            .map(|(k, c)| (c.clone(), k))
            .collect();
        let total = dim.pow(order as u32);
        let mut flat_to_class = Vec::with_capacity(total);
        let mut orbit_sizes = vec![0usize; classes.len()];
        for flat in 0..total {
            let mut idx = unflatten(flat, order, dim);
            idx.sort_unstable();
            let k = class_lookup[&idx];
            orbit_sizes[k] += 1;
            flat_to_class.push(k);
        }
        Self {
            order,
            dim,
            classes,
            orbit_sizes,
            flat_to_class,
            class_lookup,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Canonical (sorted) multi-index of each class, in storage order.
    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    /// Number of full index tuples in each class.
    pub fn orbit_sizes(&self) -> &[usize] {
        &self.orbit_sizes
    }

    /// Class of every row-major flat index of the dense `n^m` array.
    pub fn flat_to_class(&self) -> &[usize] {
        &self.flat_to_class
    }

    /// Storage offset of an arbitrary (unsorted) multi-index.
    pub fn class_of(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order);
        let flat = idx.iter().fold(0usize, |acc, &i| {
            debug_assert!(i < self.dim);
            acc * self.dim + i
        });
        self.flat_to_class[flat]
    }

    pub fn lookup_canonical(&self, sorted: &[usize]) -> Option<usize> {
        self.class_lookup.get(sorted).copied()
    }
}

fn unflatten(mut flat: usize, order: usize, dim: usize) -> Vec<usize> {
    let mut idx = vec![0usize; order];
    for slot in (0..order).rev() {
        idx[slot] = flat % dim;
        flat /= dim;
    }
    idx
}

/// Dense fully symmetric tensor stored by symmetry class.
#[derive(Clone)]
pub struct SymTensor<T> {
    layout: Arc<SymLayout>,
    values: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for SymTensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymTensor")
            .field("order", &self.layout.order)
            .field("dim", &self.layout.dim)
            .field("values", &self.values)
            .finish()
    }
}

impl<T: PartialEq> PartialEq for SymTensor<T> {
    fn eq(&self, other: &Self) -> bool {
        self.layout.order == other.layout.order
            && self.layout.dim == other.layout.dim
            && self.values == other.values
    }
}

impl<T: Real> SymTensor<T> {
    pub fn zeros(order: usize, dim: usize) -> Self {
        let layout = SymLayout::get(order, dim);
        let values = vec![T::zero(); layout.num_classes()];
        Self { layout, values }
    }

    /// Builds a tensor from per-class values in storage order.
    pub fn from_class_values(order: usize, dim: usize, values: Vec<T>) -> Result<Self> {
        let layout = SymLayout::get(order, dim);
        if values.len() != layout.num_classes() {
            return Err(Error::Shape(format!(
                "expected {} class values for order {order}, dim {dim}, got {}",
                layout.num_classes(),
                values.len()
            )));
        }
        Ok(Self { layout, values })
    }

    /// Order-0 tensor holding one number.
    pub fn scalar(dim: usize, value: T) -> Self {
        let mut t = Self::zeros(0, dim);
        t.values[0] = value;
        t
    }

    /// The `n × n` identity as an order-2 symmetric tensor.
    pub fn identity(dim: usize) -> Self {
        let mut t = Self::zeros(2, dim);
        for i in 0..dim {
            t.set(&[i, i], T::one());
        }
        t
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.layout.order
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    #[inline]
    pub fn layout(&self) -> &Arc<SymLayout> {
        &self.layout
    }

    /// Per-class values in storage order.
    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Value at any permutation of a multi-index.
    #[inline]
    pub fn get(&self, idx: &[usize]) -> T {
        self.values[self.layout.class_of(idx)]
    }

    /// Sets the value of the symmetry class containing `idx`.
    pub fn set(&mut self, idx: &[usize], value: T) {
        let k = self.layout.class_of(idx);
        self.values[k] = value;
    }

    /// The scalar value of an order-0 tensor.
    pub fn as_scalar(&self) -> Option<T> {
        (self.order() == 0).then(|| self.values[0])
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.order() == other.order() && self.dim() == other.dim()
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "order {}/dim {} vs order {}/dim {}",
                self.order(),
                self.dim(),
                other.order(),
                other.dim()
            )))
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            layout: self.layout.clone(),
            values: self.values.iter().map(|&v| v * s).collect(),
        }
    }

    /// `self + s · other`.
    pub fn axpy(&self, s: T, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(Self {
            layout: self.layout.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + s * b)
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(T::one(), other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-T::one(), other)
    }

    pub fn norm(&self) -> T {
        self.values
            .iter()
            .zip(self.layout.orbit_sizes())
            .map(|(&v, &w)| T::from_usize_lossy(w) * v * v)
            .sum::<T>()
            .sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// Expands to the full row-major `n^m` array.
    pub fn to_dense(&self) -> DenseTensor<T> {
        DenseTensor {
            order: self.order(),
            dim: self.dim(),
            data: self
                .layout
                .flat_to_class()
                .iter()
                .map(|&k| self.values[k])
                .collect(),
        }
    }

    /// Writes the tensor in the JSON file format (1-based indices, zero classes omitted).
    pub fn to_json_value(&self) -> serde_json::Value {
        let entries: Vec<serde_json::Value> = self
            .layout
            .classes()
            .iter()
            .zip(&self.values)
            .filter(|(_, v)| **v != T::zero())
            .map(|(idx, v)| {
                let one_based: Vec<usize> = idx.iter().map(|i| i + 1).collect();
                serde_json::json!([one_based, v])
            })
            .collect();
        serde_json::json!({
            "order": self.order(),
            "dim": self.dim(),
            "entries": entries,
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("tensor serializes")
    }

    /// Parses the JSON tensor file format. Unknown top-level keys are ignored.
    pub fn from_json_str(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct TensorFile {
            order: usize,
            dim: usize,
            entries: Vec<(Vec<usize>, f64)>,
        }
        let file: TensorFile = serde_json::from_str(text)?;
        if file.dim == 0 {
            return Err(Error::Format("dim must be at least 1".into()));
        }
        let mut t = Self::zeros(file.order, file.dim);
        let mut seen = vec![false; t.values.len()];
        for (idx, value) in file.entries {
            if idx.len() != file.order {
                return Err(Error::Format(format!(
                    "index {idx:?} has length {}, expected {}",
                    idx.len(),
                    file.order
                )));
            }
            if let Some(&bad) = idx.iter().find(|&&i| i == 0 || i > file.dim) {
                return Err(Error::Format(format!(
                    "index {idx:?} has entry {bad} outside 1..={}",
                    file.dim
                )));
            }
            let zero_based: Vec<usize> = idx.iter().map(|i| i - 1).collect();
            let k = t.layout.class_of(&zero_based);
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::Format(format!(
                    "duplicate entry for canonical index {:?}",
                    t.layout.classes()[k].iter().map(|i| i + 1).collect::<Vec<_>>()
                )));
            }
            t.values[k] = T::from_f64(value)
                .ok_or_else(|| Error::Format(format!("value {value} not representable")))?;
        }
        Ok(t)
    }
}

/// Raw row-major tensor in `T(m, n)`, not necessarily symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor<T> {
    order: usize,
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> DenseTensor<T> {
    pub fn new(order: usize, dim: usize, data: Vec<T>) -> Result<Self> {
        let expected = dim.pow(order as u32);
        if dim == 0 || data.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} entries for order {order}, dim {dim}, got {}",
                data.len()
            )));
        }
        Ok(Self { order, dim, data })
    }

    pub fn zeros(order: usize, dim: usize) -> Self {
        Self {
            order,
            dim,
            data: vec![T::zero(); dim.pow(order as u32)],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn get(&self, idx: &[usize]) -> T {
        let flat = idx.iter().fold(0usize, |acc, &i| acc * self.dim + i);
        self.data[flat]
    }

    pub fn set(&mut self, idx: &[usize], value: T) {
        let flat = idx.iter().fold(0usize, |acc, &i| acc * self.dim + i);
        self.data[flat] = value;
    }

    /// Average over all index permutations.
    pub fn symmetrize(&self) -> SymTensor<T> {
        let mut out = SymTensor::zeros(self.order, self.dim);
        let layout = out.layout.clone();
        for (&k, &v) in layout.flat_to_class().iter().zip(&self.data) {
            out.values[k] += v;
        }
        for (v, &w) in out.values.iter_mut().zip(layout.orbit_sizes()) {
            *v /= T::from_usize_lossy(w);
        }
        out
    }

    /// Reads the canonical entries, assuming the array is already symmetric.
    pub fn to_sym_unchecked(&self) -> SymTensor<T> {
        let mut out = SymTensor::zeros(self.order, self.dim);
        let layout = out.layout.clone();
        for (k, idx) in layout.classes().iter().enumerate() {
            out.values[k] = self.get(idx);
        }
        out
    }

    /// Contraction of slots `a` and `b` (0-based, `a ≠ b`).
    pub fn trace_slots(&self, a: usize, b: usize) -> Result<DenseTensor<T>> {
        if self.order < 2 || a == b || a >= self.order || b >= self.order {
            return Err(Error::Shape(format!(
                "cannot trace slots ({a}, {b}) of an order-{} tensor",
                self.order
            )));
        }
        let mut out = DenseTensor::zeros(self.order - 2, self.dim);
        let mut full = vec![0usize; self.order];
        for flat in 0..out.data.len() {
            let rest = unflatten(flat, self.order - 2, self.dim);
            let mut acc = T::zero();
            for i in 0..self.dim {
                let mut r = rest.iter();
                for (s, slot) in full.iter_mut().enumerate() {
                    *slot = if s == a || s == b { i } else { *r.next().unwrap() };
                }
                acc += self.get(&full);
            }
            out.data[flat] = acc;
        }
        Ok(out)
    }
}

/// Symmetrizes a raw row-major `n^m` array.
pub fn symmetrize<T: Real>(order: usize, dim: usize, data: Vec<T>) -> Result<SymTensor<T>> {
    Ok(DenseTensor::new(order, dim, data)?.symmetrize())
}

/// Frobenius inner product over all `n^m` entries.
pub fn frobenius_inner<T: Real>(a: &SymTensor<T>, b: &SymTensor<T>) -> Result<T> {
    a.check_shape(b)?;
    Ok(a.values
        .iter()
        .zip(&b.values)
        .zip(a.layout.orbit_sizes())
        .map(|((&x, &y), &w)| T::from_usize_lossy(w) * x * y)
        .sum())
}

/// Contraction of the first two slots: `Σ_i A(i, i, i_3, …, i_m)`.
pub fn trace_vector<T: Real>(a: &SymTensor<T>) -> Result<SymTensor<T>> {
    let m = a.order();
    if m < 2 {
        return Err(Error::Shape(format!("trace needs order at least 2, got {m}")));
    }
    let n = a.dim();
    let mut out = SymTensor::zeros(m - 2, n);
    let layout = out.layout.clone();
    let mut full = vec![0usize; m];
    for (k, rest) in layout.classes().iter().enumerate() {
        full[2..].copy_from_slice(rest);
        let mut acc = T::zero();
        for i in 0..n {
            full[0] = i;
            full[1] = i;
            acc += a.get(&full);
        }
        out.values[k] = acc;
    }
    Ok(out)
}

/// True iff the max-norm of the trace is at most `tol`. Order < 2 is never traceless.
pub fn is_traceless<T: Real>(a: &SymTensor<T>, tol: T) -> bool {
    trace_vector(a).map(|t| t.max_abs() <= tol).unwrap_or(false)
}

/// Orthogonal projection onto the traceless subspace (orders 2 and 3).
pub fn traceless_project<T: Real>(a: &SymTensor<T>) -> Result<SymTensor<T>> {
    let n = a.dim();
    let t = trace_vector(a)?;
    match a.order() {
        2 => {
            let shift = t.values[0] / T::from_usize_lossy(n);
            a.axpy(-shift, &SymTensor::identity(n))
        }
        3 => {
            let denom = T::from_usize_lossy(n + 2);
            let mut out = a.clone();
            let layout = out.layout.clone();
            for (k, idx) in layout.classes().iter().enumerate() {
                let (i, j, l) = (idx[0], idx[1], idx[2]);
                let mut corr = T::zero();
                if i == j {
                    corr += t.get(&[l]);
                }
                if j == l {
                    corr += t.get(&[i]);
                }
                if l == i {
                    corr += t.get(&[j]);
                }
                out.values[k] -= corr / denom;
            }
            Ok(out)
        }
        m => Err(Error::Unsupported(format!(
            "traceless projection is implemented for orders 2 and 3, got {m}"
        ))),
    }
}

/// Whether `a` lies in the space (symmetric by storage; traceless checked for `St`).
pub fn is_member<T: Real>(a: &SymTensor<T>, spec: &TensorSpaceSpec, tol: T) -> bool {
    if a.order() != spec.order || a.dim() != spec.dim {
        return false;
    }
    match spec.kind {
        SpaceKind::T | SpaceKind::S => true,
        SpaceKind::St => is_traceless(a, tol),
    }
}

/// Orthonormal basis of `S(m,n)` or `St(m,n)` under the Frobenius inner product.
#[derive(Debug, Clone)]
pub struct SubspaceBasis<T> {
    space: TensorSpaceSpec,
    elements: Vec<SymTensor<T>>,
}

impl<T: Real> SubspaceBasis<T> {
    pub fn space(&self) -> &TensorSpaceSpec {
        &self.space
    }

    pub fn elements(&self) -> &[SymTensor<T>] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    fn check_tensor(&self, a: &SymTensor<T>) -> Result<()> {
        if a.order() != self.space.order || a.dim() != self.space.dim {
            return Err(Error::Shape(format!(
                "tensor of order {}/dim {} does not belong to {}",
                a.order(),
                a.dim(),
                self.space
            )));
        }
        Ok(())
    }

    /// Coordinates of `a`, rejecting tensors whose residual exceeds `10 · membership_tol · max(1, ‖a‖)`.
    pub fn coords(&self, a: &SymTensor<T>) -> Result<Vec<T>> {
        let tol = T::lit(10.0) * T::membership_tol() * a.norm().max(T::one());
        self.coords_with_tol(a, tol)
    }

    pub fn coords_with_tol(&self, a: &SymTensor<T>, tol: T) -> Result<Vec<T>> {
        self.check_tensor(a)?;
        let x = self.coords_unchecked(a);
        let recon = self.from_coords(&x)?;
        let residual = a.sub(&recon)?.norm();
        if residual > tol {
            return Err(Error::OutsideSubspace {
                residual: residual.to_f64_lossy(),
                tol: tol.to_f64_lossy(),
            });
        }
        Ok(x)
    }

    /// Inner products with the basis elements, without a membership check.
    pub fn coords_unchecked(&self, a: &SymTensor<T>) -> Vec<T> {
        self.elements
            .iter()
            .map(|b| frobenius_inner(a, b).expect("basis shape checked"))
            .collect()
    }

    pub fn from_coords(&self, x: &[T]) -> Result<SymTensor<T>> {
        if x.len() != self.elements.len() {
            return Err(Error::Shape(format!(
                "expected {} coordinates, got {}",
                self.elements.len(),
                x.len()
            )));
        }
        let mut out = SymTensor::zeros(self.space.order, self.space.dim);
        for (&c, b) in x.iter().zip(&self.elements) {
            for (o, &v) in out.values.iter_mut().zip(&b.values) {
                *o += c * v;
            }
        }
        Ok(out)
    }
}

/// Element of `span(basis)` with independent standard-Gaussian coordinates.
pub fn gaussian_element<T: Real, R: Rng + ?Sized>(basis: &SubspaceBasis<T>, rng: &mut R) -> SymTensor<T> {
    let x: Vec<T> = (0..basis.len())
        .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    basis.from_coords(&x).expect("coordinate count matches basis")
}

/// Gaussian element rescaled to unit Frobenius norm (zero stays zero).
pub fn unit_gaussian_element<T: Real, R: Rng + ?Sized>(basis: &SubspaceBasis<T>, rng: &mut R) -> SymTensor<T> {
    let a = gaussian_element(basis, rng);
    let norm = a.norm();
    if norm > T::zero() {
        a.scaled(T::one() / norm)
    } else {
        a
    }
}

/// Deterministic orthonormal basis: symmetrized unit tensors in lexicographic
/// class order, projected for `St`, then Gram–Schmidt with a drop tolerance.
pub fn orthonormal_basis<T: Real>(spec: &TensorSpaceSpec) -> Result<SubspaceBasis<T>> {
    spec.validate()?;
    if spec.kind == SpaceKind::T {
        return Err(Error::Unsupported(
            "orthonormal bases are provided for S and St only".into(),
        ));
    }
    if spec.kind == SpaceKind::St && !(2..=3).contains(&spec.order) {
        return Err(Error::Unsupported(format!(
            "traceless bases need order 2 or 3, got {}",
            spec.order
        )));
    }
    let layout = SymLayout::get(spec.order, spec.dim);
    let drop_tol = T::membership_tol();
    let mut elements: Vec<SymTensor<T>> = Vec::new();
    for (k, &w) in layout.orbit_sizes().iter().enumerate() {
        let mut v = SymTensor::zeros(spec.order, spec.dim);
        v.values[k] = T::one() / T::from_usize_lossy(w);
        if spec.kind == SpaceKind::St {
            v = traceless_project(&v)?;
        }
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for e in &elements {
                let c = frobenius_inner(&v, e)?;
                v = v.axpy(-c, e)?;
            }
        }
        let norm = v.norm();
        if norm > drop_tol {
            elements.push(v.scaled(T::one() / norm));
        }
    }
    let expected = dim_space(spec)?;
    if elements.len() != expected {
        return Err(Error::Unsupported(format!(
            "basis construction produced {} elements for {spec}, expected {expected}",
            elements.len()
        )));
    }
    Ok(SubspaceBasis {
        space: *spec,
        elements,
    })
}

/// Nonzero classes as `(1-based canonical index, value)`, sorted.
pub fn nonzero_entries<T: Real>(a: &SymTensor<T>) -> BTreeMap<Vec<usize>, T> {
    a.layout
        .classes()
        .iter()
        .zip(&a.values)
        .filter(|(_, v)| **v != T::zero())
        .map(|(idx, &v)| (idx.iter().map(|i| i + 1).collect(), v))
        .collect()
}

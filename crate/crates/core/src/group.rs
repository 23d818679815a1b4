//! The orthogonal groups acting on tensors.
//!
//! `g · T` multiplies every slot of `T` by `g`; the infinitesimal action is
//! its derivative at the identity along a skew-symmetric generator, i.e. the
//! Leibniz sum of `ω` applied to each slot in turn.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Real;
use crate::tensor::{DenseTensor, SymTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupKind {
    O,
    SO,
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupKind::O => "O",
            GroupKind::SO => "SO",
        })
    }
}

impl FromStr for GroupKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "O" => Ok(GroupKind::O),
            "SO" => Ok(GroupKind::SO),
            other => Err(Error::InvalidSpace(format!("unknown group kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupSpec {
    pub kind: GroupKind,
    pub dim: usize,
}

impl GroupSpec {
    pub fn new(kind: GroupKind, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidSpace(format!(
                "{kind}({dim}): group dimension parameter must be at least 2"
            )));
        }
        Ok(Self { kind, dim })
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.kind, self.dim)
    }
}

/// Manifold dimension `n(n-1)/2`, the same for `O(n)` and `SO(n)`.
pub fn group_dim(spec: &GroupSpec) -> usize {
    spec.dim * (spec.dim - 1) / 2
}

/// An element of `O(n)` or `SO(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalMatrix<T> {
    matrix: Mat<T>,
    group: GroupSpec,
}

impl<T: Real> OrthogonalMatrix<T> {
    /// Validates `‖gᵀg − I‖_max ≤ tol`, `|det| = 1` and `det = +1` for `SO`.
    pub fn try_new(matrix: Mat<T>, group: GroupSpec, tol: T) -> Result<Self> {
        let n = group.dim;
        if matrix.rows() != n || matrix.cols() != n {
            return Err(Error::Shape(format!(
                "{}x{} matrix for group {group}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let gram_err = matrix.transpose().matmul(&matrix).sub(&Mat::identity(n)).max_abs();
        if gram_err > tol {
            return Err(Error::Shape(format!("matrix is not orthogonal (error {gram_err})")));
        }
        let det = matrix.det();
        let want = if group.kind == GroupKind::SO || det > T::zero() {
            T::one()
        } else {
            -T::one()
        };
        if (det - want).abs() > tol {
            return Err(Error::Shape(format!("determinant {det} not allowed in {group}")));
        }
        Ok(Self { matrix, group })
    }

    pub fn identity(group: GroupSpec) -> Self {
        Self {
            matrix: Mat::identity(group.dim),
            group,
        }
    }

    /// A fixed element of determinant −1: `−I` for odd `n`, `diag(−1, 1, …, 1)` otherwise.
    pub fn reflection(dim: usize) -> Self {
        let mut matrix = Mat::identity(dim);
        if dim % 2 == 1 {
            matrix = matrix.scaled(-T::one());
        } else {
            matrix[(0, 0)] = -T::one();
        }
        Self {
            matrix,
            group: GroupSpec {
                kind: GroupKind::O,
                dim,
            },
        }
    }

    pub(crate) fn from_parts_unchecked(matrix: Mat<T>, group: GroupSpec) -> Self {
        Self { matrix, group }
    }

    pub fn matrix(&self) -> &Mat<T> {
        &self.matrix
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn dim(&self) -> usize {
        self.group.dim
    }

    pub fn det(&self) -> T {
        self.matrix.det()
    }

    /// `self · other`; the result lives in `SO` only if both factors do.
    pub fn compose(&self, other: &Self) -> Self {
        let kind = if self.group.kind == GroupKind::SO && other.group.kind == GroupKind::SO {
            GroupKind::SO
        } else {
            GroupKind::O
        };
        Self {
            matrix: self.matrix.matmul(&other.matrix),
            group: GroupSpec {
                kind,
                dim: self.group.dim,
            },
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            matrix: self.matrix.transpose(),
            group: self.group,
        }
    }

    /// Row-major entries, as used in reports.
    pub fn to_row_major(&self) -> Vec<T> {
        self.matrix.as_slice().to_vec()
    }
}

/// A skew-symmetric matrix, an element of the Lie algebra `so(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewGenerator<T> {
    matrix: Mat<T>,
}

impl<T: Real> SkewGenerator<T> {
    /// `E_pq − E_qp` (0-based, `p ≠ q`).
    pub fn elementary(n: usize, p: usize, q: usize) -> Self {
        assert!(p != q && p < n && q < n, "invalid elementary generator");
        let mut matrix = Mat::zeros(n, n);
        matrix[(p, q)] = T::one();
        matrix[(q, p)] = -T::one();
        Self { matrix }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            matrix: Mat::zeros(n, n),
        }
    }

    /// `Σ_k c_k ω_k` over the elementary generators in lexicographic order.
    pub fn combination(n: usize, coefficients: &[T]) -> Self {
        let mut matrix = Mat::zeros(n, n);
        let mut k = 0;
        for p in 0..n {
            for q in p + 1..n {
                let c = coefficients[k];
                matrix[(p, q)] += c;
                matrix[(q, p)] -= c;
                k += 1;
            }
        }
        assert_eq!(k, coefficients.len(), "one coefficient per generator");
        Self { matrix }
    }

    pub fn matrix(&self) -> &Mat<T> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// `exp(t · ω)`, an element of `SO(n)`.
    pub fn exp(&self, t: T) -> OrthogonalMatrix<T> {
        let n = self.dim();
        OrthogonalMatrix {
            matrix: self.matrix.scaled(t).expm(),
            group: GroupSpec {
                kind: GroupKind::SO,
                dim: n,
            },
        }
    }
}

/// Basis `E_pq − E_qp`, `p < q`, of `so(n)` in lexicographic order.
pub fn so_generators<T: Real>(n: usize) -> Vec<SkewGenerator<T>> {
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for p in 0..n {
        for q in p + 1..n {
            out.push(SkewGenerator::elementary(n, p, q));
        }
    }
    out
}

/// Applies `m` to slot `slot` of a dense tensor: `out[..j..] = Σ_i m[j,i] · t[..i..]`.
fn mode_product<T: Real>(m: &Mat<T>, t: &[T], order: usize, dim: usize, slot: usize) -> Vec<T> {
    let stride = dim.pow((order - 1 - slot) as u32);
    let block = stride * dim;
    let mut out = vec![T::zero(); t.len()];
    for base in (0..t.len()).step_by(block) {
        for j in 0..dim {
            for i in 0..dim {
                let g = m[(j, i)];
                if g == T::zero() {
                    continue;
                }
                let src = &t[base + i * stride..base + (i + 1) * stride];
                let dst = &mut out[base + j * stride..base + (j + 1) * stride];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += g * s;
                }
            }
        }
    }
    out
}

/// `(M · T)` for any square matrix `M`, on a raw dense tensor in `T(m, n)`.
pub fn act_dense<T: Real>(m: &Mat<T>, t: &DenseTensor<T>) -> Result<DenseTensor<T>> {
    if m.rows() != t.dim() || m.cols() != t.dim() {
        return Err(Error::Shape(format!(
            "{}x{} matrix acting on dimension-{} tensor",
            m.rows(),
            m.cols(),
            t.dim()
        )));
    }
    let mut data = t.data().to_vec();
    for slot in 0..t.order() {
        data = mode_product(m, &data, t.order(), t.dim(), slot);
    }
    DenseTensor::new(t.order(), t.dim(), data)
}

/// `M · T` for a square matrix `M` and a symmetric tensor.
pub fn act_linear<T: Real>(m: &Mat<T>, t: &SymTensor<T>) -> Result<SymTensor<T>> {
    Ok(act_dense(m, &t.to_dense())?.to_sym_unchecked())
}

/// The group action `(g·T)_{j_1…j_m} = Σ g_{j_1 i_1} ⋯ g_{j_m i_m} T_{i_1…i_m}`.
pub fn act<T: Real>(g: &OrthogonalMatrix<T>, t: &SymTensor<T>) -> Result<SymTensor<T>> {
    act_linear(&g.matrix, t)
}

/// Derivative of `s ↦ exp(sω)·T` at `s = 0`.
pub fn infinitesimal_act<T: Real>(w: &SkewGenerator<T>, t: &SymTensor<T>) -> Result<SymTensor<T>> {
    if w.dim() != t.dim() {
        return Err(Error::Shape(format!(
            "generator of size {} acting on dimension-{} tensor",
            w.dim(),
            t.dim()
        )));
    }
    let dense = t.to_dense();
    let mut acc = vec![T::zero(); dense.data().len()];
    for slot in 0..t.order() {
        let part = mode_product(&w.matrix, dense.data(), t.order(), t.dim(), slot);
        for (a, p) in acc.iter_mut().zip(part) {
            *a += p;
        }
    }
    Ok(DenseTensor::new(t.order(), t.dim(), acc)?.to_sym_unchecked())
}

/// Haar-distributed sample: sign-corrected QR of a standard Gaussian matrix.
/// For `SO`, a determinant −1 draw has its first column negated.
pub fn haar_sample<T: Real, R: Rng + ?Sized>(spec: &GroupSpec, rng: &mut R) -> OrthogonalMatrix<T> {
    let n = spec.dim;
    let data: Vec<T> = (0..n * n)
        .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let (mut q, r) = Mat::from_row_major(n, n, data).qr();
    for j in 0..n {
        if r[(j, j)] < T::zero() {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    if spec.kind == GroupKind::SO && q.det() < T::zero() {
        for i in 0..n {
            q[(i, 0)] = -q[(i, 0)];
        }
    }
    OrthogonalMatrix {
        matrix: q,
        group: *spec,
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th child task: `splitmix64(parent ^ splitmix64(index))`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index))
}

/// The deterministic random source used throughout the toolkit.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{frobenius_inner, is_traceless, orthonormal_basis, SpaceKind, TensorSpaceSpec};

    fn o3() -> GroupSpec {
        GroupSpec::new(GroupKind::O, 3).unwrap()
    }

    fn random_st33(rng: &mut ChaCha8Rng) -> SymTensor<f64> {
        let basis = orthonormal_basis::<f64>(&TensorSpaceSpec::new(SpaceKind::St, 3, 3).unwrap()).unwrap();
        let x: Vec<f64> = (0..7).map(|_| rng.sample(StandardNormal)).collect();
        basis.from_coords(&x).unwrap()
    }

    #[test]
    fn group_dimensions() {
        assert_eq!(group_dim(&o3()), 3);
        assert_eq!(group_dim(&GroupSpec::new(GroupKind::SO, 2).unwrap()), 1);
        assert_eq!(group_dim(&GroupSpec::new(GroupKind::O, 4).unwrap()), 6);
        assert!(GroupSpec::new(GroupKind::O, 1).is_err());
    }

    #[test]
    fn generators_are_lexicographic() {
        let gens = so_generators::<f64>(3);
        assert_eq!(gens.len(), 3);
        assert_eq!(so_generators::<f64>(2).len(), 1);
        assert_eq!(gens[1].matrix()[(0, 2)], 1.0);
        assert_eq!(gens[1].matrix()[(2, 0)], -1.0);
        assert_eq!(gens[2].matrix()[(1, 2)], 1.0);
        for w in &gens {
            let g = w.exp(0.3);
            let e = g.matrix().transpose().matmul(g.matrix()).sub(&Mat::identity(3)).max_abs();
            assert!(e < 1e-10);
            assert!((g.det() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn identity_and_minus_identity() {
        let mut rng = rng_from_seed(1);
        let a = random_st33(&mut rng);
        assert_eq!(act(&OrthogonalMatrix::identity(o3()), &a).unwrap(), a);
        let minus = act(&OrthogonalMatrix::reflection(3), &a).unwrap();
        assert!(minus.add(&a).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn action_preserves_norm_and_tracelessness() {
        let mut rng = rng_from_seed(2);
        for _ in 0..100 {
            let a = random_st33(&mut rng);
            let g = haar_sample::<f64, _>(&o3(), &mut rng);
            let ga = act(&g, &a).unwrap();
            assert!((ga.norm() - a.norm()).abs() < 1e-10);
            assert!(is_traceless(&ga, 1e-10));
        }
    }

    #[test]
    fn haar_is_deterministic_and_orthogonal() {
        let spec = GroupSpec::new(GroupKind::SO, 3).unwrap();
        let g1 = haar_sample::<f64, _>(&spec, &mut rng_from_seed(42));
        let g2 = haar_sample::<f64, _>(&spec, &mut rng_from_seed(42));
        assert_eq!(g1, g2);
        assert!((g1.det() - 1.0).abs() < 1e-10);
        assert!(OrthogonalMatrix::try_new(g1.matrix().clone(), spec, 1e-12).is_ok());
    }

    #[test]
    fn try_new_rejects_bad_matrices() {
        let so3 = GroupSpec::new(GroupKind::SO, 3).unwrap();
        let refl = OrthogonalMatrix::<f64>::reflection(3);
        assert!(OrthogonalMatrix::try_new(refl.matrix().clone(), so3, 1e-10).is_err());
        assert!(OrthogonalMatrix::try_new(refl.matrix().clone(), o3(), 1e-10).is_ok());
        let scaled = Mat::<f64>::identity(3).scaled(1.1);
        assert!(OrthogonalMatrix::try_new(scaled, o3(), 1e-10).is_err());
    }

    #[test]
    fn infinitesimal_action_on_vectors_is_matvec() {
        let w = SkewGenerator::<f64>::combination(3, &[0.3, -1.2, 0.7]);
        let v = SymTensor::from_class_values(1, 3, vec![1.0, -2.0, 0.5]).unwrap();
        let got = infinitesimal_act(&w, &v).unwrap();
        let want = w.matrix().matvec(v.values());
        for (a, b) in got.values().iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
        let zero = infinitesimal_act(&SkewGenerator::zero(3), &v).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn infinitesimal_action_matches_forward_difference() {
        let mut rng = rng_from_seed(3);
        let a = random_st33(&mut rng);
        let h = 1e-6;
        for w in so_generators::<f64>(3) {
            let moved = act(&w.exp(h), &a).unwrap();
            let fd = moved.sub(&a).unwrap().scaled(1.0 / h);
            let exact = infinitesimal_act(&w, &a).unwrap();
            assert!(fd.sub(&exact).unwrap().max_abs() < 1e-5);
            // tangent stays inside St and is orthogonal to A (norm preservation)
            assert!(is_traceless(&exact, 1e-12));
            assert!(frobenius_inner(&exact, &a).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn dense_action_on_nonsymmetric_tensor() {
        let t = DenseTensor::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let g = Mat::from_row_major(2, 2, vec![0.0, -1.0, 1.0, 0.0]);
        // g t gᵀ
        let out = act_dense(&g, &t).unwrap();
        assert_eq!(out.data(), &[4.0, -3.0, -2.0, 1.0]);
    }

    #[test]
    fn seed_splitting_is_stable() {
        assert_eq!(derive_seed(7, 0), derive_seed(7, 0));
        assert_ne!(derive_seed(7, 0), derive_seed(7, 1));
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
    }
}

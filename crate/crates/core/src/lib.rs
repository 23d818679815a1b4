//! Polynomial invariants of symmetric tensor spaces under `O(n)` and `SO(n)`,
//! with numerical checks of the cardinality bound `dim V − dim G` for
//! function bases.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`). Sampling,
//! ranks and certificates run in `f64`; the aliases below name the common
//! instantiations.
//!
//! ```
//! use fbasis::{builtin_family, eval_family, orthonormal_basis, unit_gaussian_element, rng_from_seed};
//!
//! let f = builtin_family("ST33_DEFAULT").unwrap();
//! let basis = orthonormal_basis::<f64>(f.space()).unwrap();
//! let a = unit_gaussian_element(&basis, &mut rng_from_seed(7));
//! let values = eval_family(&f, &a).unwrap();
//! assert!((values[0] - 1.0).abs() < 1e-12);
//! ```

pub mod einsum;
pub mod error;
pub mod family;
pub mod group;
pub mod linalg;
pub mod orbit;
pub mod rank;
pub mod scalar;
pub mod tensor;

pub use einsum::{evaluate, evaluate_scalar, parse, ContractionExpr, EvalContext, LetBinding};
pub use error::{Error, Result};
pub use family::{
    builtin_family, check_invariance, eval_family, jacobian_fd, load_family, parse_family, resolve_family,
    save_family, InvarianceReport, InvariantFamily, Member, S23_CLASSICAL, ST33_DEFAULT,
};
pub use group::{
    act, derive_seed, group_dim, haar_sample, infinitesimal_act, rng_from_seed, so_generators, GroupKind,
    GroupSpec, OrthogonalMatrix, SkewGenerator,
};
pub use linalg::{numerical_rank, Mat};
pub use orbit::{
    orbit_distance, same_orbit, separability_probe, AlignmentResult, OrbitConfig, ProbeConfig, ProbeVerdict,
    SeparabilityProbeReport,
};
pub use rank::{
    certify, gate_family, generic_rank, lower_bound, orbit_dim, quotient_dim_estimate, BoundCertificate,
    CertifyConfig, Verdict,
};
pub use scalar::Real;
pub use tensor::{
    dim_space, gaussian_element, orthonormal_basis, traceless_project, unit_gaussian_element, DenseTensor,
    SpaceKind, SubspaceBasis, SymTensor, TensorSpaceSpec,
};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 0xC0FFEE;

pub type SymTensor64 = SymTensor<f64>;
pub type SymTensor32 = SymTensor<f32>;
pub type DenseTensor64 = DenseTensor<f64>;
pub type Mat64 = Mat<f64>;
pub type OrthogonalMatrix64 = OrthogonalMatrix<f64>;
pub type SkewGenerator64 = SkewGenerator<f64>;
pub type SubspaceBasis64 = SubspaceBasis<f64>;
pub type AlignmentResult64 = AlignmentResult<f64>;

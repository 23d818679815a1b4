//! Orbit dimensions, quotient-dimension estimates, Jacobian ranks and the
//! cardinality certificate.
//!
//! For a group `G` of dimension `d` acting on a space `V` of dimension `n > d`,
//! any polynomial function basis has at least `n − d` members. The numeric
//! side works pointwise:
//!
//! * the orbit through `A` has dimension equal to the rank of the tangent
//!   matrix whose columns are the infinitesimal actions of a basis of `so(n)`,
//!   so `dim V/G = dim V − (max orbit dimension) ≥ n − d`;
//! * a family of invariants is functionally independent when its Jacobian
//!   has full row rank at a generic point;
//! * a family of exactly `n − d` independent invariants meets the bound and
//!   so cannot lose a member and remain a function basis.
//!
//! Sampling can falsify separation but never prove it, which is why the
//! verdicts below are phrased as gated candidates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{check_invariance, jacobian_fd, InvariantFamily, Member};
use crate::group::{derive_seed, group_dim, infinitesimal_act, rng_from_seed, so_generators, GroupSpec};
use crate::linalg::{numerical_rank, Mat};
use crate::scalar::Real;
use crate::tensor::{
    dim_space, gaussian_element, orthonormal_basis, unit_gaussian_element, SubspaceBasis, SymTensor,
    TensorSpaceSpec,
};

/// Default relative singular-value cutoff.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitReport<T> {
    pub coords: Vec<T>,
    /// `dim(V) × dim(G)`; column `k` holds the coordinates of `ω_k · A`.
    pub tangent: Mat<T>,
    pub singular_values: Vec<T>,
    pub orbit_dim: usize,
    pub tolerance: T,
}

/// Tangent matrix of the orbit through `a`, in basis coordinates.
pub fn orbit_tangent<T: Real>(a: &SymTensor<T>, basis: &SubspaceBasis<T>, group: &GroupSpec) -> Result<Mat<T>> {
    if group.dim != a.dim() {
        return Err(Error::Shape(format!(
            "group {group} acting on a dimension-{} tensor",
            a.dim()
        )));
    }
    let columns = so_generators::<T>(group.dim)
        .iter()
        .map(|w| Ok(basis.coords_unchecked(&infinitesimal_act(w, a)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Mat::from_columns(basis.len(), &columns))
}

/// Orbit dimension at `a`: number of tangent singular values above `tol · σ_max`.
pub fn orbit_dim<T: Real>(
    a: &SymTensor<T>,
    basis: &SubspaceBasis<T>,
    group: &GroupSpec,
    tol: T,
) -> Result<OrbitReport<T>> {
    let coords = basis.coords(a)?;
    let tangent = orbit_tangent(a, basis, group)?;
    let singular_values = tangent.singular_values();
    let orbit_dim = numerical_rank(&singular_values, tol);
    Ok(OrbitReport {
        coords,
        tangent,
        singular_values,
        orbit_dim,
        tolerance: tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientDimEstimate {
    pub space: TensorSpaceSpec,
    pub group: GroupSpec,
    pub num_samples: usize,
    pub seed: u64,
    pub rank_tol: f64,
    pub max_orbit_dim: usize,
    /// `dim(V) − max_orbit_dim`.
    pub estimate: usize,
    pub per_sample_orbit_dims: Vec<usize>,
}

/// Estimates `dim(V/G)` from the largest orbit among Gaussian samples.
///
/// Sample `k` draws standard-Gaussian coordinates from the seed
/// `derive_seed(seed, k)`.
pub fn quotient_dim_estimate<T: Real>(
    space: &TensorSpaceSpec,
    group: &GroupSpec,
    num_samples: usize,
    seed: u64,
    tol: T,
) -> Result<QuotientDimEstimate> {
    if num_samples == 0 {
        return Err(Error::Hypothesis("quotient estimate needs at least one sample".into()));
    }
    let basis = orthonormal_basis::<T>(space)?;
    let dims = (0..num_samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(derive_seed(seed, k as u64));
            let a = gaussian_element(&basis, &mut rng);
            Ok(orbit_dim(&a, &basis, group, tol)?.orbit_dim)
        })
        .collect::<Result<Vec<usize>>>()?;
    let max_orbit_dim = dims.iter().copied().max().unwrap_or(0);
    Ok(QuotientDimEstimate {
        space: *space,
        group: *group,
        num_samples,
        seed,
        rank_tol: tol.to_f64_lossy(),
        max_orbit_dim,
        estimate: basis.len() - max_orbit_dim,
        per_sample_orbit_dims: dims,
    })
}

/// `dim(V) − dim(G)`, defined only when `dim(V) > dim(G)`.
pub fn lower_bound(space: &TensorSpaceSpec, group: &GroupSpec) -> Result<usize> {
    let n = dim_space(space)?;
    let d = group_dim(group);
    if n <= d {
        return Err(Error::Hypothesis(format!(
            "the cardinality bound needs dim V > dim G, but dim {space} = {n} and dim {group} = {d}"
        )));
    }
    Ok(n - d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianReport<T> {
    pub family: String,
    pub coords: Vec<T>,
    /// `r × dim(V)` central-difference Jacobian.
    pub jacobian: Mat<T>,
    pub singular_values: Vec<T>,
    pub rank: usize,
    pub tolerance: T,
}

pub fn jacobian_report<T: Real>(
    f: &InvariantFamily,
    a: &SymTensor<T>,
    basis: &SubspaceBasis<T>,
    tol: T,
) -> Result<JacobianReport<T>> {
    let coords = basis.coords(a)?;
    let jacobian = jacobian_fd(f, a, basis, None)?;
    let singular_values = jacobian.singular_values();
    let rank = numerical_rank(&singular_values, tol);
    Ok(JacobianReport {
        family: f.name().to_string(),
        coords,
        jacobian,
        singular_values,
        rank,
        tolerance: tol,
    })
}

/// `‖J · T‖_max`: how far the invariant gradients are from annihilating the orbit tangents.
pub fn tangent_annihilation<T: Real>(jacobian: &Mat<T>, tangent: &Mat<T>) -> T {
    jacobian.matmul(tangent).max_abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenericRank<T> {
    pub family: String,
    pub num_samples: usize,
    pub seed: u64,
    pub tolerance: T,
    /// Maximum Jacobian rank over the samples.
    pub rank: usize,
    /// Share of samples attaining `rank`.
    pub fraction_attaining: f64,
    pub per_sample_ranks: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub reports: Vec<JacobianReport<T>>,
}

/// Generic Jacobian rank of a family over `num_samples` random points.
///
/// Points have Gaussian coordinates rescaled to unit norm, which keeps the
/// rows of different degrees on comparable scales. Sample `k` uses the seed
/// `derive_seed(seed, k)`.
pub fn generic_rank<T: Real>(
    f: &InvariantFamily,
    num_samples: usize,
    seed: u64,
    tol: T,
    keep_reports: bool,
) -> Result<GenericRank<T>> {
    if num_samples == 0 {
        return Err(Error::Hypothesis("generic rank needs at least one sample".into()));
    }
    let basis = orthonormal_basis::<T>(f.space())?;
    let reports = (0..num_samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(derive_seed(seed, k as u64));
            let a = unit_gaussian_element(&basis, &mut rng);
            jacobian_report(f, &a, &basis, tol)
        })
        .collect::<Result<Vec<_>>>()?;
    let per_sample_ranks: Vec<usize> = reports.iter().map(|r| r.rank).collect();
    let rank = per_sample_ranks.iter().copied().max().unwrap_or(0);
    let attaining = per_sample_ranks.iter().filter(|&&r| r == rank).count();
    Ok(GenericRank {
        family: f.name().to_string(),
        num_samples,
        seed,
        tolerance: tol,
        rank,
        fraction_attaining: attaining as f64 / num_samples as f64,
        per_sample_ranks,
        reports: if keep_reports { reports } else { Vec::new() },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateAttempt {
    pub members: Vec<String>,
    pub degrees: Vec<usize>,
    pub rank: usize,
    pub fraction_attaining: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct GateOutcome {
    /// The first member set that passed, or the original family if none did.
    pub family: InvariantFamily,
    pub attempts: Vec<GateAttempt>,
    pub passed: bool,
}

/// Runs the functional-independence gate: full generic rank `r` attained on
/// at least `min_fraction` of the samples. On failure the family's fallback
/// members replace its last member, in order, until one set passes.
pub fn gate_family<T: Real>(
    f: &InvariantFamily,
    num_samples: usize,
    seed: u64,
    tol: T,
    min_fraction: f64,
) -> Result<GateOutcome> {
    let candidates: Vec<InvariantFamily> = std::iter::once(f.clone())
        .chain(f.fallbacks().iter().map(|m: &Member| f.with_last_member(m.clone())))
        .collect();
    let mut attempts = Vec::new();
    for candidate in candidates {
        let gr = generic_rank::<T>(&candidate, num_samples, seed, tol, false)?;
        let passed = gr.rank == candidate.len() && gr.fraction_attaining >= min_fraction;
        attempts.push(GateAttempt {
            members: candidate.member_names(),
            degrees: candidate.degrees(),
            rank: gr.rank,
            fraction_attaining: gr.fraction_attaining,
            passed,
        });
        if passed {
            return Ok(GateOutcome {
                family: candidate,
                attempts,
                passed: true,
            });
        }
    }
    Ok(GateOutcome {
        family: f.clone(),
        attempts,
        passed: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    /// The family is smaller than the bound, or no stronger claim applies.
    BoundOnly,
    /// More members than the bound, with generic rank equal to the quotient estimate.
    FunctionBasisCandidateGated,
    /// Exactly `n − d` functionally independent invariants.
    IrreducibleByCount,
    /// Dependent members or a failed invariance check.
    GateFailed,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::BoundOnly => "BOUND_ONLY",
            Verdict::FunctionBasisCandidateGated => "FUNCTION_BASIS_CANDIDATE_GATED",
            Verdict::IrreducibleByCount => "IRREDUCIBLE_BY_COUNT",
            Verdict::GateFailed => "GATE_FAILED",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    pub seed: u64,
    pub rank_tol: f64,
    pub inv_tol: f64,
    pub rank_samples: usize,
    pub inv_samples: usize,
    pub quotient_samples: usize,
    pub min_fraction: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            seed: crate::DEFAULT_SEED,
            rank_tol: DEFAULT_RANK_TOL,
            inv_tol: 1e-9,
            rank_samples: 100,
            inv_samples: 1000,
            quotient_samples: 100,
            min_fraction: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub tool_version: String,
    pub space: TensorSpaceSpec,
    pub group: GroupSpec,
    /// `dim(V)`.
    pub n: usize,
    /// `dim(G)`.
    pub d: usize,
    pub lower_bound: usize,
    pub family: String,
    pub r: usize,
    pub members: Vec<String>,
    pub degrees: Vec<usize>,
    pub reference_degrees: Option<Vec<usize>>,
    /// `Some(false)` flags a certified degree list that differs from the reference list.
    pub degrees_match_reference: Option<bool>,
    pub generic_rank: usize,
    pub rank_fraction: f64,
    pub gate_attempts: Vec<GateAttempt>,
    pub quotient_estimate: usize,
    pub invariance_max_deviation: f64,
    pub invariance_passed: bool,
    pub verdict: Verdict,
    pub conclusion: String,
    pub config: CertifyConfig,
}

/// Checks a family against the `n − d` cardinality bound.
///
/// Stages: the bound itself; the rank gate (with fallbacks); a Haar
/// invariance check of the gated member set at a random unit-norm point; the
/// quotient-dimension estimate. Sub-seeds are `derive_seed(config.seed, i)`
/// for stage `i = 0, 1, 2, 3`, so equal configs give identical certificates.
pub fn certify(
    f: &InvariantFamily,
    space: &TensorSpaceSpec,
    group: &GroupSpec,
    config: &CertifyConfig,
) -> Result<BoundCertificate> {
    if f.space() != space || f.group() != group {
        return Err(Error::Family(format!(
            "family {} is defined on {} under {}, not {space} under {group}",
            f.name(),
            f.space(),
            f.group()
        )));
    }
    let lb = lower_bound(space, group)?;
    let n = dim_space(space)?;
    let d = group_dim(group);

    let gate = gate_family::<f64>(
        f,
        config.rank_samples,
        derive_seed(config.seed, 1),
        config.rank_tol,
        config.min_fraction,
    )?;
    let chosen = &gate.family;
    let chosen_attempt = gate
        .attempts
        .iter()
        .find(|a| a.passed)
        .or(gate.attempts.first())
        .expect("gate records at least one attempt");

    let basis = orthonormal_basis::<f64>(space)?;
    let point = unit_gaussian_element(&basis, &mut rng_from_seed(derive_seed(config.seed, 0)));
    let inv = check_invariance(
        chosen,
        &point,
        config.inv_samples,
        config.inv_tol,
        derive_seed(config.seed, 2),
    )?;

    let quotient = quotient_dim_estimate::<f64>(
        space,
        group,
        config.quotient_samples,
        derive_seed(config.seed, 3),
        config.rank_tol,
    )?;

    let r = chosen.len();
    let rank = chosen_attempt.rank;
    let rank_ok = rank == r && chosen_attempt.fraction_attaining >= config.min_fraction;
    let verdict = if rank_ok && r == lb && inv.passed {
        Verdict::IrreducibleByCount
    } else if !rank_ok || !inv.passed {
        Verdict::GateFailed
    } else if r > lb && rank == quotient.estimate {
        Verdict::FunctionBasisCandidateGated
    } else {
        Verdict::BoundOnly
    };
    let conclusion = match verdict {
        Verdict::IrreducibleByCount => format!(
            "{r} functionally independent invariants; any polynomial function basis of {space} under {group} needs at least {lb}, so a function basis with these {r} members is irreducible"
        ),
        Verdict::GateFailed if !inv.passed => format!(
            "invariance check failed (max relative deviation {:e})",
            inv.max_deviation
        ),
        Verdict::GateFailed => format!(
            "generic Jacobian rank {rank} < {r}: the members are functionally dependent"
        ),
        Verdict::FunctionBasisCandidateGated => format!(
            "{r} invariants with generic rank {rank} equal to the quotient-dimension estimate; separation is not proven"
        ),
        Verdict::BoundOnly if r < lb => format!(
            "{r} < {lb}: this family cannot be a polynomial function basis"
        ),
        Verdict::BoundOnly => format!("lower bound {lb}; no stronger claim for {r} members"),
    };
    let reference = f.reference_degrees().map(<[usize]>::to_vec);
    let degrees = chosen.degrees();
    Ok(BoundCertificate {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        space: *space,
        group: *group,
        n,
        d,
        lower_bound: lb,
        family: f.name().to_string(),
        r,
        members: chosen.member_names(),
        degrees_match_reference: reference.as_ref().map(|rd| *rd == degrees),
        degrees,
        reference_degrees: reference,
        generic_rank: rank,
        rank_fraction: chosen_attempt.fraction_attaining,
        gate_attempts: gate.attempts.clone(),
        quotient_estimate: quotient.estimate,
        invariance_max_deviation: inv.max_deviation,
        invariance_passed: inv.passed,
        verdict,
        conclusion,
        config: *config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{builtin_family, S23_CLASSICAL, ST33_DEFAULT};
    use crate::group::GroupKind;
    use crate::tensor::SpaceKind;

    fn space(kind: SpaceKind, m: usize, n: usize) -> TensorSpaceSpec {
        TensorSpaceSpec::new(kind, m, n).unwrap()
    }

    fn o3() -> GroupSpec {
        GroupSpec::new(GroupKind::O, 3).unwrap()
    }

    #[test]
    fn bounds() {
        assert_eq!(lower_bound(&space(SpaceKind::St, 3, 3), &o3()).unwrap(), 4);
        assert_eq!(lower_bound(&space(SpaceKind::S, 3, 3), &o3()).unwrap(), 7);
        assert_eq!(lower_bound(&space(SpaceKind::St, 2, 3), &o3()).unwrap(), 2);
        // S(1,3) has dimension 3 = dim O(3)
        assert!(matches!(
            lower_bound(&space(SpaceKind::S, 1, 3), &o3()),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn fixed_points_have_zero_orbit_dimension() {
        let st = orthonormal_basis::<f64>(&space(SpaceKind::St, 3, 3)).unwrap();
        let rep = orbit_dim(&SymTensor::zeros(3, 3), &st, &o3(), 1e-8).unwrap();
        assert_eq!(rep.orbit_dim, 0);
        let s = orthonormal_basis::<f64>(&space(SpaceKind::S, 2, 3)).unwrap();
        let rep = orbit_dim(&SymTensor::identity(3), &s, &o3(), 1e-8).unwrap();
        assert_eq!(rep.orbit_dim, 0);
    }

    #[test]
    fn generic_orbits_are_three_dimensional() {
        let st = orthonormal_basis::<f64>(&space(SpaceKind::St, 3, 3)).unwrap();
        let mut rng = rng_from_seed(4);
        for _ in 0..10 {
            let a = gaussian_element(&st, &mut rng);
            let rep = orbit_dim(&a, &st, &o3(), 1e-8).unwrap();
            assert_eq!(rep.orbit_dim, 3);
            assert_eq!(rep.tangent.rows(), 7);
            assert_eq!(rep.tangent.cols(), 3);
        }
    }

    #[test]
    fn quotient_estimates() {
        let q = quotient_dim_estimate::<f64>(&space(SpaceKind::St, 3, 3), &o3(), 20, 1, 1e-8).unwrap();
        assert_eq!((q.max_orbit_dim, q.estimate), (3, 4));
        let q = quotient_dim_estimate::<f64>(&space(SpaceKind::S, 2, 3), &o3(), 20, 1, 1e-8).unwrap();
        assert_eq!(q.estimate, 3);
    }

    #[test]
    fn single_member_has_rank_one() {
        let f = builtin_family(ST33_DEFAULT).unwrap().restrict("J2", &["J2"]).unwrap();
        let gr = generic_rank::<f64>(&f, 10, 3, 1e-8, false).unwrap();
        assert_eq!(gr.rank, 1);
        assert_eq!(gr.fraction_attaining, 1.0);
    }

    #[test]
    fn classical_family_has_full_rank() {
        let f = builtin_family(S23_CLASSICAL).unwrap();
        let gr = generic_rank::<f64>(&f, 20, 3, 1e-8, true).unwrap();
        assert_eq!(gr.rank, 3);
        assert_eq!(gr.reports.len(), 20);
    }

    #[test]
    fn gate_switches_to_a_passing_fallback() {
        let f = builtin_family(ST33_DEFAULT).unwrap();
        let gate = gate_family::<f64>(&f, 20, 9, 1e-8, 0.95).unwrap();
        assert!(gate.passed);
        assert_eq!(gate.attempts.first().unwrap().rank, 3);
        assert_eq!(gate.family.len(), 4);
        assert_eq!(gate.attempts.last().unwrap().rank, 4);
    }

    #[test]
    fn certify_negative_control() {
        let f = builtin_family(ST33_DEFAULT).unwrap().restrict("J2J4", &["J2", "J4"]).unwrap();
        let cfg = CertifyConfig {
            rank_samples: 10,
            inv_samples: 20,
            quotient_samples: 10,
            ..CertifyConfig::default()
        };
        let cert = certify(&f, f.space(), f.group(), &cfg).unwrap();
        assert_eq!(cert.verdict, Verdict::BoundOnly);
        assert_eq!(cert.lower_bound, 4);
        assert_eq!(cert.r, 2);
        let wrong = space(SpaceKind::S, 3, 3);
        assert!(certify(&f, &wrong, f.group(), &cfg).is_err());
    }
}

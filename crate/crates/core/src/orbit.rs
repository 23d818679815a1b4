//! Orbit equivalence by direct optimization over the group, and a
//! falsification probe for orbit separation by a finite family.
//!
//! `orbit_distance` minimizes `f(R) = ‖R·A − B‖²` over `SO(n)` from several
//! starts. Each refinement step takes central-difference directional
//! derivatives of `f` along `exp(t·ω_k)·R`, moves along `R ← exp(−α·Σ g_k ω_k)·R`
//! with a halving Armijo line search, and re-orthonormalizes `R`. For `O(n)`
//! the second sheet is searched by starting from the reflected tensor.
//!
//! A small distance proves two tensors share an orbit (up to the optimizer's
//! accuracy); a large one may be a missed global minimum. The probe therefore
//! reports candidate counterexamples, never theorems.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{eval_family, InvariantFamily};
use crate::group::{
    act, act_dense, derive_seed, haar_sample, rng_from_seed, so_generators, GroupKind, GroupSpec,
    OrthogonalMatrix, SkewGenerator,
};
use crate::linalg::{symmetric_eigen, Mat};
use crate::scalar::{rel_scale, Real};
use crate::tensor::{orthonormal_basis, unit_gaussian_element, DenseTensor, SymTensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitConfig {
    pub num_starts: usize,
    pub max_iters: usize,
    /// Refinement stops once an accepted step is shorter than this.
    pub step_tol: f64,
    /// Central-difference step for the directional derivatives.
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self {
            num_starts: 32,
            max_iters: 200,
            step_tol: 1e-10,
            fd_step: 1e-6,
            seed: crate::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult<T> {
    /// Minimizer `g` of `‖g·A − B‖`.
    pub best_g: OrthogonalMatrix<T>,
    pub distance: T,
    pub starts_used: usize,
    /// Start that produced `best_g`; start 0 is the identity.
    pub best_start: usize,
    /// Whether `best_g` lies on the reflected sheet of `O(n)`.
    pub reflected: bool,
    pub refine_iterations: usize,
    pub converged: bool,
    /// `f` after each accepted step of the winning start, beginning with the start value.
    pub objective_trace: Vec<T>,
}

struct Objective<T> {
    a: DenseTensor<T>,
    b: Vec<T>,
}

impl<T: Real> Objective<T> {
    fn eval(&self, r: &Mat<T>) -> T {
        let ra = act_dense(r, &self.a).expect("shapes checked on construction");
        ra.data()
            .iter()
            .zip(&self.b)
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum()
    }
}

struct LocalRun<T> {
    r: Mat<T>,
    value: T,
    iterations: usize,
    converged: bool,
    trace: Vec<T>,
}

/// `Q` from the QR factorization with a positive diagonal in `R`.
fn reorthonormalize<T: Real>(m: &Mat<T>) -> Mat<T> {
    let (mut q, r) = m.qr();
    let n = m.rows();
    for j in 0..n {
        if r[(j, j)] < T::zero() {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| a * b).sum()
}

fn refine<T: Real>(obj: &Objective<T>, start: Mat<T>, shifts: &[(Mat<T>, Mat<T>)], config: &OrbitConfig) -> LocalRun<T> {
    let n = start.rows();
    let h = T::lit(config.fd_step);
    let step_tol = T::lit(config.step_tol);
    let armijo = T::lit(1e-4);
    let grad = |r: &Mat<T>| -> Vec<T> {
        shifts
            .iter()
            .map(|(plus, minus)| (obj.eval(&plus.matmul(r)) - obj.eval(&minus.matmul(r))) / (h + h))
            .collect()
    };

    let mut r = start;
    let mut value = obj.eval(&r);
    let mut trace = vec![value];
    let mut g = grad(&r);
    let mut alpha: Option<T> = None;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iters {
        let g2 = dot(&g, &g);
        let gnorm = g2.sqrt();
        if gnorm == T::zero() || value == T::zero() {
            converged = true;
            break;
        }
        // first trial: a rotation of about half a radian
        let mut a = alpha.unwrap_or_else(|| T::lit(0.5) / gnorm);
        let accepted = loop {
            if a * gnorm < step_tol {
                break None;
            }
            let coeffs: Vec<T> = g.iter().map(|&gk| -a * gk).collect();
            let cand = SkewGenerator::combination(n, &coeffs).matrix().expm().matmul(&r);
            let cand = reorthonormalize(&cand);
            let fv = obj.eval(&cand);
            if fv <= value - armijo * a * g2 {
                break Some((cand, fv, coeffs));
            }
            a = a * T::lit(0.5);
        };
        iterations += 1;
        let Some((cand, fv, step)) = accepted else {
            converged = true;
            break;
        };
        r = cand;
        value = fv;
        trace.push(value);
        let g_new = grad(&r);
        let snorm = dot(&step, &step).sqrt();
        if snorm < step_tol {
            converged = true;
            break;
        }
        // Barzilai-Borwein step from the last displacement, else double the accepted one
        let y: Vec<T> = g_new.iter().zip(&g).map(|(&p, &q)| p - q).collect();
        let sy = dot(&step, &y);
        alpha = Some(if sy > T::zero() {
            dot(&step, &step) / sy
        } else {
            a + a
        });
        g = g_new;
    }
    LocalRun {
        r,
        value,
        iterations,
        converged,
        trace,
    }
}

fn so_group(n: usize) -> GroupSpec {
    GroupSpec {
        kind: GroupKind::SO,
        dim: n,
    }
}

/// Eigenvectors of `X·Xᵀ`, where `X` is the `n × n^(m−1)` unfolding along the first slot.
/// Since `M(g·A) = g·M(A)·gᵀ`, these frames rotate with the tensor.
fn spectral_frame<T: Real>(t: &DenseTensor<T>) -> Mat<T> {
    let n = t.dim();
    let x = Mat::from_row_major(n, t.data().len() / n, t.data().to_vec());
    symmetric_eigen(&x.matmul(&x.transpose())).1
}

/// Start 0 is the identity. Then come the rotations `U_B·S·U_Aᵀ` aligning the
/// spectral frames of `A` and `B` over sign patterns `S` with `det = +1`,
/// which are exact when `B = g·A` and the frame is non-degenerate. The
/// remaining start `k` is a Haar sample from `derive_seed(config.seed, k)`.
fn start_points<T: Real>(a: &DenseTensor<T>, b: &DenseTensor<T>, config: &OrbitConfig) -> Vec<Mat<T>> {
    let n = a.dim();
    let mut starts = vec![Mat::identity(n)];
    if a.order() >= 1 {
        let (ua, ub) = (spectral_frame(a), spectral_frame(b));
        for mask in 0..1usize << n {
            let mut signed = ub.clone();
            for j in (0..n).filter(|j| mask >> j & 1 == 1) {
                for i in 0..n {
                    signed[(i, j)] = -signed[(i, j)];
                }
            }
            let r = signed.matmul(&ua.transpose());
            if r.det() > T::zero() {
                starts.push(reorthonormalize(&r));
            }
        }
    }
    starts.truncate(config.num_starts);
    for k in starts.len()..config.num_starts {
        let mut rng = rng_from_seed(derive_seed(config.seed, k as u64));
        starts.push(haar_sample::<T, _>(&so_group(n), &mut rng).matrix().clone());
    }
    starts
}

/// Multi-start minimization of `‖g·A − B‖` over `g` in `group`.
///
/// Starts are described at [`start_points`]; they run in parallel and the winner is the
/// smallest `(distance, start index, sheet)`, so the result does not depend
/// on scheduling.
pub fn orbit_distance<T: Real>(
    a: &SymTensor<T>,
    b: &SymTensor<T>,
    group: &GroupSpec,
    config: &OrbitConfig,
) -> Result<AlignmentResult<T>> {
    if !a.same_shape(b) {
        return Err(Error::Shape(format!(
            "orbit distance between order-{} dim-{} and order-{} dim-{} tensors",
            a.order(),
            a.dim(),
            b.order(),
            b.dim()
        )));
    }
    if group.dim != a.dim() {
        return Err(Error::Shape(format!("group {group} acting on a dimension-{} tensor", a.dim())));
    }
    if config.num_starts == 0 {
        return Err(Error::Hypothesis("orbit distance needs at least one start".into()));
    }
    let n = group.dim;
    let h = T::lit(config.fd_step);
    let shifts: Vec<(Mat<T>, Mat<T>)> = so_generators::<T>(n)
        .iter()
        .map(|w| (w.exp(h).matrix().clone(), w.exp(-h).matrix().clone()))
        .collect();

    let mut sheets = vec![(false, a.clone())];
    if group.kind == GroupKind::O {
        let reflection = OrthogonalMatrix::<T>::reflection(n);
        let flipped = act(&reflection, a)?;
        if flipped != *a {
            sheets.push((true, flipped));
        }
    }
    let b_dense = b.to_dense();
    let starts: Vec<Vec<Mat<T>>> = sheets
        .iter()
        .map(|(_, t)| start_points(&t.to_dense(), &b_dense, config))
        .collect();
    let objectives: Vec<Objective<T>> = sheets
        .iter()
        .map(|(_, t)| Objective {
            a: t.to_dense(),
            b: b_dense.data().to_vec(),
        })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..sheets.len())
        .flat_map(|s| (0..config.num_starts).map(move |k| (s, k)))
        .collect();
    let runs: Vec<(usize, usize, LocalRun<T>)> = jobs
        .par_iter()
        .map(|&(s, k)| (s, k, refine(&objectives[s], starts[s][k].clone(), &shifts, config)))
        .collect();
    let (s, k, best) = runs
        .into_iter()
        .min_by(|x, y| {
            x.2.value
                .partial_cmp(&y.2.value)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(x.1.cmp(&y.1))
                .then(x.0.cmp(&y.0))
        })
        .expect("at least one start");

    let reflected = sheets[s].0;
    let best_g = if reflected {
        let reflection = OrthogonalMatrix::<T>::reflection(n);
        OrthogonalMatrix::from_parts_unchecked(best.r.matmul(reflection.matrix()), *group)
    } else {
        OrthogonalMatrix::from_parts_unchecked(best.r, *group)
    };
    Ok(AlignmentResult {
        best_g,
        distance: best.value.max(T::zero()).sqrt(),
        starts_used: config.num_starts,
        best_start: k,
        reflected,
        refine_iterations: best.iterations,
        converged: best.converged,
        objective_trace: best.trace,
    })
}

/// Default same-orbit threshold `1e-6 · max(1, ‖A‖)`.
pub fn default_orbit_eps<T: Real>(a: &SymTensor<T>) -> T {
    T::lit(1e-6) * rel_scale(a.norm())
}

pub fn same_orbit<T: Real>(
    a: &SymTensor<T>,
    b: &SymTensor<T>,
    group: &GroupSpec,
    eps: Option<T>,
    config: &OrbitConfig,
) -> Result<bool> {
    let eps = eps.unwrap_or_else(|| default_orbit_eps(a));
    Ok(orbit_distance(a, b, group, config)?.distance <= eps)
}

/// Largest `|p_i(A) − p_i(B)| / max(1, |p_i(A)|)` over the members.
pub fn invariant_gap<T: Real>(f: &InvariantFamily, a: &SymTensor<T>, b: &SymTensor<T>) -> Result<T> {
    let pa = eval_family(f, a)?;
    let pb = eval_family(f, b)?;
    Ok(pa
        .iter()
        .zip(&pb)
        .map(|(&x, &y)| (x - y).abs() / rel_scale(x))
        .fold(T::zero(), T::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairPopulation {
    /// `(A, g·A)` for Haar `g`.
    SameOrbit,
    /// Independent unit-norm samples.
    Independent,
    /// `(A, A + 1e-3·δ)` with unit-norm `δ`.
    Near,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub population: PairPopulation,
    pub pair_index: usize,
    /// Tensors in the tensor file format.
    pub a: serde_json::Value,
    pub b: serde_json::Value,
    pub invariant_gap: f64,
    pub orbit_distance: f64,
    /// Whether every start of the optimizer stopped on its step tolerance.
    /// Even then the distance may be a missed global minimum.
    pub optimizer_converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProbeVerdict {
    NoViolations,
    CandidateCounterexamples,
    /// Population (i) pairs disagreed beyond `1e-9`: the family is not invariant.
    InvarianceRecheckFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSummary {
    pub population: PairPopulation,
    pub pairs: usize,
    pub max_gap: f64,
    pub min_gap: f64,
    pub max_distance: f64,
    pub min_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityProbeReport {
    pub family: String,
    pub pairs_tested: usize,
    pub seed: u64,
    pub eps_inv: f64,
    pub eps_orb: f64,
    pub populations: Vec<PopulationSummary>,
    pub violations: Vec<Violation>,
    pub verdict: ProbeVerdict,
    pub caveat: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub num_pairs: usize,
    pub seed: u64,
    pub eps_inv: f64,
    pub eps_orb: f64,
    pub orbit: OrbitConfig,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            num_pairs: 200,
            seed: crate::DEFAULT_SEED,
            eps_inv: 1e-8,
            eps_orb: 1e-2,
            orbit: OrbitConfig::default(),
        }
    }
}

const SAME_ORBIT_GAP_TOL: f64 = 1e-9;

struct PairOutcome {
    population: PairPopulation,
    index: usize,
    a: SymTensor<f64>,
    b: SymTensor<f64>,
    gap: f64,
    distance: f64,
    converged: bool,
}

/// Tests `num_pairs` pairs from each of the three populations.
///
/// Pair `k` of population `p` draws from `derive_seed(seed, p·num_pairs + k)`.
/// Orbit distances are computed for every pair.
pub fn separability_probe(f: &InvariantFamily, config: &ProbeConfig) -> Result<SeparabilityProbeReport> {
    let basis = orthonormal_basis::<f64>(f.space())?;
    let group = *f.group();
    let pops = [PairPopulation::SameOrbit, PairPopulation::Independent, PairPopulation::Near];
    let jobs: Vec<(usize, usize)> = (0..pops.len())
        .flat_map(|p| (0..config.num_pairs).map(move |k| (p, k)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(p, k)| {
            let pair_seed = derive_seed(config.seed, (p * config.num_pairs + k) as u64);
            let mut rng = rng_from_seed(pair_seed);
            let a = unit_gaussian_element(&basis, &mut rng);
            let b = match pops[p] {
                PairPopulation::SameOrbit => act(&haar_sample::<f64, _>(&group, &mut rng), &a)?,
                PairPopulation::Independent => unit_gaussian_element(&basis, &mut rng),
                PairPopulation::Near => a.axpy(1e-3, &unit_gaussian_element(&basis, &mut rng))?,
            };
            let gap = invariant_gap(f, &a, &b)?;
            let orbit_cfg = OrbitConfig {
                seed: derive_seed(pair_seed, u64::MAX),
                ..config.orbit
            };
            let al = orbit_distance(&a, &b, &group, &orbit_cfg)?;
            Ok(PairOutcome {
                population: pops[p],
                index: k,
                a,
                b,
                gap,
                distance: al.distance,
                converged: al.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let populations = pops
        .iter()
        .map(|&p| {
            let sel: Vec<&PairOutcome> = outcomes.iter().filter(|o| o.population == p).collect();
            let fold = |g: fn(&PairOutcome) -> f64, init: f64, op: fn(f64, f64) -> f64| {
                sel.iter().map(|o| g(o)).fold(init, op)
            };
            PopulationSummary {
                population: p,
                pairs: sel.len(),
                max_gap: fold(|o| o.gap, 0.0, f64::max),
                min_gap: fold(|o| o.gap, f64::INFINITY, f64::min),
                max_distance: fold(|o| o.distance, 0.0, f64::max),
                min_distance: fold(|o| o.distance, f64::INFINITY, f64::min),
            }
        })
        .collect::<Vec<_>>();
    let violations: Vec<Violation> = outcomes
        .iter()
        .filter(|o| o.gap <= config.eps_inv && o.distance >= config.eps_orb)
        .map(|o| Violation {
            population: o.population,
            pair_index: o.index,
            a: o.a.to_json_value(),
            b: o.b.to_json_value(),
            invariant_gap: o.gap,
            orbit_distance: o.distance,
            optimizer_converged: o.converged,
        })
        .collect();
    let recheck_failed = outcomes
        .iter()
        .any(|o| o.population == PairPopulation::SameOrbit && o.gap > SAME_ORBIT_GAP_TOL);
    let verdict = if recheck_failed {
        ProbeVerdict::InvarianceRecheckFailed
    } else if violations.is_empty() {
        ProbeVerdict::NoViolations
    } else {
        ProbeVerdict::CandidateCounterexamples
    };
    let caveat = match verdict {
        ProbeVerdict::NoViolations => {
            "no pair with equal invariants and distinct orbits was found; this does not prove separation".to_string()
        }
        ProbeVerdict::CandidateCounterexamples => format!(
            "{} pair(s) have invariant gap <= {:e} and orbit distance >= {:e}; the optimizer may have missed the global minimum, so inspect them offline",
            violations.len(),
            config.eps_inv,
            config.eps_orb
        ),
        ProbeVerdict::InvarianceRecheckFailed => format!(
            "same-orbit pairs differ by up to {:e} in the invariants",
            populations[0].max_gap
        ),
    };
    Ok(SeparabilityProbeReport {
        family: f.name().to_string(),
        pairs_tested: outcomes.len(),
        seed: config.seed,
        eps_inv: config.eps_inv,
        eps_orb: config.eps_orb,
        populations,
        violations,
        verdict,
        caveat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{builtin_family, ST33_DEFAULT};
    use crate::tensor::{SpaceKind, TensorSpaceSpec};

    fn st33() -> crate::tensor::SubspaceBasis<f64> {
        orthonormal_basis(&TensorSpaceSpec::new(SpaceKind::St, 3, 3).unwrap()).unwrap()
    }

    fn o3() -> GroupSpec {
        GroupSpec::new(GroupKind::O, 3).unwrap()
    }

    fn quick() -> OrbitConfig {
        OrbitConfig {
            num_starts: 8,
            ..OrbitConfig::default()
        }
    }

    #[test]
    fn self_distance_is_zero() {
        let mut rng = rng_from_seed(1);
        let a = unit_gaussian_element(&st33(), &mut rng);
        let al = orbit_distance(&a, &a, &o3(), &quick()).unwrap();
        assert!(al.distance <= 1e-9, "{}", al.distance);
        assert!(same_orbit(&SymTensor::<f64>::zeros(3, 3), &SymTensor::zeros(3, 3), &o3(), None, &quick()).unwrap());
    }

    #[test]
    fn planted_rotation_is_recovered() {
        let basis = st33();
        let mut rng = rng_from_seed(2);
        for _ in 0..5 {
            let a = unit_gaussian_element(&basis, &mut rng);
            let g = haar_sample::<f64, _>(&o3(), &mut rng);
            let b = act(&g, &a).unwrap();
            let al = orbit_distance(&a, &b, &o3(), &OrbitConfig::default()).unwrap();
            assert!(al.distance <= 1e-6, "{}", al.distance);
            let check = act(&al.best_g, &a).unwrap().sub(&b).unwrap().norm();
            assert!((check - al.distance).abs() <= 1e-9);
            assert!(al.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn scaled_tensor_is_far() {
        let mut rng = rng_from_seed(3);
        let a = unit_gaussian_element(&st33(), &mut rng);
        let al = orbit_distance(&a, &a.scaled(2.0), &o3(), &quick()).unwrap();
        assert!(al.distance >= a.norm() - 1e-9);
    }

    #[test]
    fn mismatched_shapes_fail() {
        let a = SymTensor::<f64>::zeros(3, 3);
        let b = SymTensor::<f64>::zeros(2, 3);
        assert!(orbit_distance(&a, &b, &o3(), &quick()).is_err());
    }

    #[test]
    fn norm_alone_does_not_separate() {
        let f = builtin_family(ST33_DEFAULT).unwrap().restrict("J2", &["J2"]).unwrap();
        let cfg = ProbeConfig {
            num_pairs: 4,
            orbit: quick(),
            ..ProbeConfig::default()
        };
        let rep = separability_probe(&f, &cfg).unwrap();
        assert_eq!(rep.pairs_tested, 12);
        assert_eq!(rep.verdict, ProbeVerdict::CandidateCounterexamples);
        assert!(rep.violations.iter().all(|v| v.population == PairPopulation::Independent));
        assert!(rep.populations[0].max_gap <= 1e-9);
    }
}

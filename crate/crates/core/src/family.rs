//! Named families of polynomial invariants and their evaluation map.
//!
//! A family is data: a tensor space, a group, let-bound intermediates and
//! a list of scalar contractions, each with a declared degree. Families can
//! also carry *fallback* members, alternative last members tried in order
//! when the family fails the functional-independence gate.
//!
//! Text format, one directive per line, `#` starts a comment:
//!
//! ```text
//! name ST33_DEFAULT
//! space St 3 3
//! group O 3
//! let B_ij = A_ipq A_jpq
//! inv J2 2 = A_ijk A_ijk
//! fallback J10 10 = V_i C_ij V_j
//! const U_i = 1 0 0
//! reference-degrees 2 4 6 8
//! ```

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::einsum::{
    self, evaluate_scalars, is_builtin, polynomial_degree, validate_lets, ContractionExpr,
    EvalContext, LetBinding,
};
use crate::error::{Error, Result};
use crate::group::{act, derive_seed, haar_sample, rng_from_seed, GroupKind, GroupSpec, OrthogonalMatrix};
use crate::linalg::Mat;
use crate::scalar::{rel_scale, Real};
use crate::tensor::{is_member, SpaceKind, SubspaceBasis, SymLayout, SymTensor, TensorSpaceSpec};

pub const ST33_DEFAULT: &str = "ST33_DEFAULT";
pub const S23_CLASSICAL: &str = "S23_CLASSICAL";

/// One scalar invariant of a family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Member {
    pub name: String,
    pub expr: ContractionExpr,
    pub degree: usize,
}

impl Member {
    pub fn new(name: &str, expr: &str, degree: usize) -> Result<Self> {
        Ok(Self {
            name: name.to_string(),
            expr: einsum::parse(expr)?,
            degree,
        })
    }
}

/// A fixed (non-transforming) tensor referenced by members, e.g. a coordinate axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstTensor {
    pub name: String,
    pub order: usize,
    /// Per-class values in canonical storage order.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantFamily {
    name: String,
    space: TensorSpaceSpec,
    group: GroupSpec,
    symbol: String,
    lets: Vec<LetBinding>,
    constants: Vec<ConstTensor>,
    members: Vec<Member>,
    fallbacks: Vec<Member>,
    reference_degrees: Option<Vec<usize>>,
}

impl InvariantFamily {
    /// Validated constructor. The tensor symbol is inferred as the single
    /// symbol that is neither a builtin, a let, nor a constant.
    pub fn new(
        name: &str,
        space: TensorSpaceSpec,
        group: GroupSpec,
        lets: Vec<LetBinding>,
        constants: Vec<ConstTensor>,
        members: Vec<Member>,
        fallbacks: Vec<Member>,
    ) -> Result<Self> {
        space.validate()?;
        if space.dim != group.dim {
            return Err(Error::Family(format!(
                "space {space} and group {group} disagree on the dimension"
            )));
        }
        if members.is_empty() {
            return Err(Error::Family(format!("family {name} has no members")));
        }
        validate_lets(&lets)?;
        for c in &constants {
            if lets.iter().any(|l| l.name() == c.name) || is_builtin(&c.name) {
                return Err(Error::Family(format!("constant {} clashes with another symbol", c.name)));
            }
            let expected = SymLayout::get(c.order, space.dim).num_classes();
            if c.values.len() != expected {
                return Err(Error::Family(format!(
                    "constant {} needs {expected} values, got {}",
                    c.name,
                    c.values.len()
                )));
            }
        }
        let is_aux = |s: &str| {
            is_builtin(s) || lets.iter().any(|l| l.name() == s) || constants.iter().any(|c| c.name == s)
        };
        let mut symbols: Vec<&str> = lets
            .iter()
            .flat_map(|l| l.expr().symbols())
            .chain(members.iter().chain(&fallbacks).flat_map(|m| m.expr.symbols()))
            .filter(|s| !is_aux(s))
            .collect();
        symbols.sort_unstable();
        symbols.dedup();
        let symbol = match symbols.as_slice() {
            [one] => one.to_string(),
            [] => return Err(Error::Family(format!("family {name} never references a tensor"))),
            many => {
                return Err(Error::Family(format!(
                    "family {name} references several unbound symbols: {}",
                    many.join(", ")
                )))
            }
        };
        for m in members.iter().chain(&fallbacks) {
            if !m.expr.is_scalar() {
                return Err(Error::Family(format!(
                    "member {} is not a scalar: free labels {:?}",
                    m.name,
                    m.expr.free_labels()
                )));
            }
            let computed = polynomial_degree(&m.expr, &lets, &symbol);
            if computed != m.degree {
                return Err(Error::Family(format!(
                    "member {} declares degree {} but `{}` has degree {computed}",
                    m.name, m.degree, m.expr
                )));
            }
        }
        Ok(Self {
            name: name.to_string(),
            space,
            group,
            symbol,
            lets,
            constants,
            members,
            fallbacks,
            reference_degrees: None,
        })
    }

    pub fn with_reference_degrees(mut self, degrees: Vec<usize>) -> Self {
        self.reference_degrees = Some(degrees);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &TensorSpaceSpec {
        &self.space
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    /// The symbol bound to the input tensor.
    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn lets(&self) -> &[LetBinding] {
        &self.lets
    }

    pub fn constants(&self) -> &[ConstTensor] {
        &self.constants
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn fallbacks(&self) -> &[Member] {
        &self.fallbacks
    }

    /// Degree list the family is expected to reproduce, if any.
    pub fn reference_degrees(&self) -> Option<&[usize]> {
        self.reference_degrees.as_deref()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.members.iter().map(|m| m.degree).collect()
    }

    pub fn member_names(&self) -> Vec<String> {
        self.members.iter().map(|m| m.name.clone()).collect()
    }

    /// The family with its last member replaced by `member`; fallbacks are dropped.
    pub fn with_last_member(&self, member: Member) -> Self {
        let mut out = self.clone();
        *out.members.last_mut().expect("families are non-empty") = member;
        out.fallbacks.clear();
        out
    }

    /// Sub-family keeping only the named members, in the given order.
    pub fn restrict(&self, name: &str, keep: &[&str]) -> Result<Self> {
        let members = keep
            .iter()
            .map(|k| {
                self.members
                    .iter()
                    .find(|m| m.name == *k)
                    .cloned()
                    .ok_or_else(|| Error::Family(format!("no member {k} in {}", self.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        InvariantFamily::new(
            name,
            self.space,
            self.group,
            self.lets.clone(),
            self.constants.clone(),
            members,
            Vec::new(),
        )
    }
}

/// Builtin families: `ST33_DEFAULT` and `S23_CLASSICAL`.
pub fn builtin_family(id: &str) -> Result<InvariantFamily> {
    let o3 = GroupSpec::new(GroupKind::O, 3)?;
    match id {
        ST33_DEFAULT => {
            let lets = [
                "B_ij = A_ipq A_jpq",
                "E_ij = A_ipq A_jrs A_kpr A_kqs",
                "V_i = A_ipq B_pq",
                "C_ij = B_ip B_pj",
            ]
            .iter()
            .map(|s| LetBinding::parse(s))
            .collect::<Result<Vec<_>>>()?;
            let members = vec![
                Member::new("J2", "A_ijk A_ijk", 2)?,
                Member::new("J4", "B_ij B_ij", 4)?,
                Member::new("J6", "B_ij B_jk B_ki", 6)?,
                Member::new("J8", "E_ij E_ij", 8)?,
            ];
            let fallbacks = vec![
                Member::new("J8b", "E_ij B_jk B_ki", 8)?,
                Member::new("J12", "E_ip B_pj E_iq B_qj", 12)?,
                Member::new("J10", "V_i C_ij V_j", 10)?,
            ];
            Ok(InvariantFamily::new(
                ST33_DEFAULT,
                TensorSpaceSpec::new(SpaceKind::St, 3, 3)?,
                o3,
                lets,
                Vec::new(),
                members,
                fallbacks,
            )?
            .with_reference_degrees(vec![2, 4, 6, 8]))
        }
        S23_CLASSICAL => InvariantFamily::new(
            S23_CLASSICAL,
            TensorSpaceSpec::new(SpaceKind::S, 2, 3)?,
            o3,
            Vec::new(),
            Vec::new(),
            vec![
                Member::new("I1", "T_ii", 1)?,
                Member::new("I2", "T_ij T_ij", 2)?,
                Member::new("I3", "T_ij T_jk T_ki", 3)?,
            ],
            Vec::new(),
        ),
        other => Err(Error::Family(format!("unknown builtin family {other:?}"))),
    }
}

/// The evaluation map at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyEvaluation<T> {
    pub family: String,
    pub coords: Vec<T>,
    pub values: Vec<T>,
}

fn context<T: Real>(f: &InvariantFamily, a: &SymTensor<T>) -> Result<EvalContext<T>> {
    let mut ctx = EvalContext::new(f.space.dim);
    ctx.insert(&f.symbol, a.clone())?;
    for c in &f.constants {
        let values = c.values.iter().map(|&v| T::lit(v)).collect();
        ctx.insert(&c.name, SymTensor::from_class_values(c.order, f.space.dim, values)?)?;
    }
    Ok(ctx)
}

/// `(p_1(A), …, p_r(A))` without the membership check.
pub fn eval_family_unchecked<T: Real>(f: &InvariantFamily, a: &SymTensor<T>) -> Result<Vec<T>> {
    let ctx = context(f, a)?;
    let exprs: Vec<&ContractionExpr> = f.members.iter().map(|m| &m.expr).collect();
    evaluate_scalars(&exprs, &ctx, &f.lets)
}

/// `(p_1(A), …, p_r(A))`; `A` must lie in the family's space (checked at `10 · membership_tol`).
pub fn eval_family<T: Real>(f: &InvariantFamily, a: &SymTensor<T>) -> Result<Vec<T>> {
    let tol = T::lit(10.0) * T::membership_tol() * a.norm().max(T::one());
    if !is_member(a, &f.space, tol) {
        return Err(Error::Family(format!(
            "tensor of order {}/dim {} is not in {}",
            a.order(),
            a.dim(),
            f.space
        )));
    }
    eval_family_unchecked(f, a)
}

/// Evaluation at basis coordinates.
pub fn eval_at_coords<T: Real>(
    f: &InvariantFamily,
    basis: &SubspaceBasis<T>,
    coords: &[T],
) -> Result<FamilyEvaluation<T>> {
    let a = basis.from_coords(coords)?;
    Ok(FamilyEvaluation {
        family: f.name.clone(),
        coords: coords.to_vec(),
        values: eval_family(f, &a)?,
    })
}

/// `eval_family(F, λA)`; component `i` equals `λ^{deg_i} · eval_family(F, A)_i`.
pub fn scale_behavior<T: Real>(f: &InvariantFamily, a: &SymTensor<T>, lambda: T) -> Result<Vec<T>> {
    if lambda == T::zero() {
        return Err(Error::Family("scale factor must be nonzero".into()));
    }
    eval_family(f, &a.scaled(lambda))
}

/// Default step `1e-6 · max(1, ‖A‖)`.
pub fn default_fd_step<T: Real>(a: &SymTensor<T>) -> T {
    T::lit(1e-6) * a.norm().max(T::one())
}

/// Central-difference Jacobian, `r × dim(V)`, along the basis directions.
pub fn jacobian_fd<T: Real>(
    f: &InvariantFamily,
    a: &SymTensor<T>,
    basis: &SubspaceBasis<T>,
    h: Option<T>,
) -> Result<Mat<T>> {
    let h = h.unwrap_or_else(|| default_fd_step(a));
    if h <= T::zero() {
        return Err(Error::Family("finite-difference step must be positive".into()));
    }
    let r = f.len();
    let mut jac = Mat::zeros(r, basis.len());
    let two_h = T::lit(2.0) * h;
    for (j, b) in basis.elements().iter().enumerate() {
        let plus = eval_family_unchecked(f, &a.axpy(h, b)?)?;
        let minus = eval_family_unchecked(f, &a.axpy(-h, b)?)?;
        for i in 0..r {
            jac[(i, j)] = (plus[i] - minus[i]) / two_h;
        }
    }
    Ok(jac)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport<T> {
    pub family: String,
    pub num_samples: usize,
    pub tolerance: T,
    pub seed: u64,
    /// Largest `|p_i(gA) − p_i(A)| / max(1, |p_i(A)|)` seen.
    pub max_deviation: T,
    pub worst_member: Option<String>,
    /// Row-major entries of the group element attaining the maximum.
    pub worst_g: Option<Vec<T>>,
    pub passed: bool,
}

/// Monte-Carlo invariance test over Haar samples of the family's group.
///
/// Sample `k` uses the seed `derive_seed(seed, k)`, and the maximum is
/// reduced with ties broken by sample index, so the report does not depend
/// on how rayon schedules the samples.
pub fn check_invariance<T: Real>(
    f: &InvariantFamily,
    a: &SymTensor<T>,
    num_samples: usize,
    tol: T,
    seed: u64,
) -> Result<InvarianceReport<T>> {
    if num_samples == 0 {
        return Err(Error::Family("invariance check needs at least one sample".into()));
    }
    let base = eval_family(f, a)?;
    let results = (0..num_samples)
        .into_par_iter()
        .map(|k| -> Result<(T, usize, usize, OrthogonalMatrix<T>)> {
            let mut rng = rng_from_seed(derive_seed(seed, k as u64));
            let g = haar_sample::<T, _>(&f.group, &mut rng);
            let moved = eval_family_unchecked(f, &act(&g, a)?)?;
            let (dev, member) = moved
                .iter()
                .zip(&base)
                .enumerate()
                .map(|(i, (&x, &y))| ((x - y).abs() / rel_scale(y), i))
                .fold((T::zero(), 0), |acc, cur| if cur.0 > acc.0 { cur } else { acc });
            Ok((dev, member, k, g))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = results
        .into_iter()
        .fold(None::<(T, usize, usize, OrthogonalMatrix<T>)>, |best, cur| match best {
            Some(b) if !(cur.0 > b.0) => Some(b),
            _ => Some(cur),
        })
        .expect("at least one sample");
    let (max_deviation, member, _, g) = worst;
    Ok(InvarianceReport {
        family: f.name.clone(),
        num_samples,
        tolerance: tol,
        seed,
        max_deviation,
        worst_member: (max_deviation > T::zero()).then(|| f.members[member].name.clone()),
        worst_g: (max_deviation > T::zero()).then(|| g.to_row_major()),
        passed: max_deviation <= tol,
    })
}

fn line_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Parses `"<name> <degree> = <expr>"` for `inv` and `fallback` lines.
fn parse_member(line_no: usize, body: &str, body_col: usize) -> Result<Member> {
    let (head, rhs) = body
        .split_once('=')
        .ok_or_else(|| line_err(line_no, body_col, "expected '<name> <degree> = <expression>'"))?;
    let parts: Vec<&str> = head.split_whitespace().collect();
    let [name, degree] = parts.as_slice() else {
        return Err(line_err(line_no, body_col, "expected '<name> <degree>' before '='"));
    };
    let degree: usize = degree
        .parse()
        .map_err(|_| line_err(line_no, body_col, format!("invalid degree {degree:?}")))?;
    let expr = einsum::parse(rhs)
        .map_err(|e| einsum::shift_columns(e, line_no - 1, body_col + head.len() + 1))?;
    Ok(Member {
        name: name.to_string(),
        expr,
        degree,
    })
}

/// Parses the family text format; `default_name` is used without a `name` line.
pub fn parse_family(text: &str, default_name: &str) -> Result<InvariantFamily> {
    let mut name = default_name.to_string();
    let mut space = None;
    let mut group = None;
    let mut lets = Vec::new();
    let mut constants = Vec::new();
    let mut members = Vec::new();
    let mut fallbacks = Vec::new();
    let mut reference = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("");
        let trimmed = line.trim_start();
        if trimmed.trim().is_empty() {
            continue;
        }
        let indent = line.len() - trimmed.len();
        let (keyword, body) = trimmed.split_once(char::is_whitespace).unwrap_or((trimmed, ""));
        let body_col = indent + keyword.len() + 2;
        let words: Vec<&str> = body.split_whitespace().collect();
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| line_err(line_no, body_col, format!("expected an integer, got {s:?}")))
        };
        match keyword {
            "name" => match words.as_slice() {
                [n] => name = n.to_string(),
                _ => return Err(line_err(line_no, body_col, "expected 'name <id>'")),
            },
            "space" => match words.as_slice() {
                [kind, m, n] => {
                    let kind: SpaceKind = kind
                        .parse()
                        .map_err(|e: Error| line_err(line_no, body_col, e.to_string()))?;
                    space = Some(
                        TensorSpaceSpec::new(kind, num(m)?, num(n)?)
                            .map_err(|e| line_err(line_no, body_col, e.to_string()))?,
                    );
                }
                _ => return Err(line_err(line_no, body_col, "expected 'space <T|S|St> <order> <dim>'")),
            },
            "group" => match words.as_slice() {
                [kind, n] => {
                    let kind: GroupKind = kind
                        .parse()
                        .map_err(|e: Error| line_err(line_no, body_col, e.to_string()))?;
                    group = Some(
                        GroupSpec::new(kind, num(n)?)
                            .map_err(|e| line_err(line_no, body_col, e.to_string()))?,
                    );
                }
                _ => return Err(line_err(line_no, body_col, "expected 'group <O|SO> <dim>'")),
            },
            "let" => {
                let binding = LetBinding::parse(body)
                    .map_err(|e| einsum::shift_columns(e, line_no - 1, body_col - 1))?;
                lets.push(binding);
            }
            "inv" => members.push(parse_member(line_no, body, body_col - 1)?),
            "fallback" => fallbacks.push(parse_member(line_no, body, body_col - 1)?),
            "const" => {
                let (head, rhs) = body
                    .split_once('=')
                    .ok_or_else(|| line_err(line_no, body_col, "expected 'const Name_labels = values'"))?;
                let (cname, labels) = head
                    .trim()
                    .split_once('_')
                    .ok_or_else(|| line_err(line_no, body_col, "expected 'Name_labels'"))?;
                let values = rhs
                    .split_whitespace()
                    .map(|v| {
                        v.parse::<f64>()
                            .map_err(|_| line_err(line_no, body_col, format!("invalid number {v:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                constants.push(ConstTensor {
                    name: cname.to_string(),
                    order: labels.len(),
                    values,
                });
            }
            "reference-degrees" => {
                reference = Some(words.iter().map(|w| num(w)).collect::<Result<Vec<_>>>()?);
            }
            other => {
                return Err(line_err(line_no, indent + 1, format!("unknown directive {other:?}")))
            }
        }
    }
    let last = text.lines().count().max(1);
    let space = space.ok_or_else(|| line_err(last, 1, "missing 'space' line"))?;
    let group = group.ok_or_else(|| line_err(last, 1, "missing 'group' line"))?;
    if members.is_empty() {
        return Err(line_err(last, 1, "family has no 'inv' lines"));
    }
    let family = InvariantFamily::new(&name, space, group, lets, constants, members, fallbacks)?;
    Ok(match reference {
        Some(r) => family.with_reference_degrees(r),
        None => family,
    })
}

/// Serializes a family in the text format.
pub fn format_family(f: &InvariantFamily) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "name {}", f.name);
    let _ = writeln!(out, "space {} {} {}", f.space.kind, f.space.order, f.space.dim);
    let _ = writeln!(out, "group {} {}", f.group.kind, f.group.dim);
    for c in &f.constants {
        let labels: String = ('i'..='z').take(c.order).collect();
        let values: Vec<String> = c.values.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "const {}_{} = {}", c.name, labels, values.join(" "));
    }
    for l in &f.lets {
        let _ = writeln!(out, "let {l}");
    }
    for m in &f.members {
        let _ = writeln!(out, "inv {} {} = {}", m.name, m.degree, m.expr);
    }
    for m in &f.fallbacks {
        let _ = writeln!(out, "fallback {} {} = {}", m.name, m.degree, m.expr);
    }
    if let Some(r) = &f.reference_degrees {
        let r: Vec<String> = r.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "reference-degrees {}", r.join(" "));
    }
    out
}

pub fn load_family(path: &Path) -> Result<InvariantFamily> {
    let text = std::fs::read_to_string(path)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("family");
    parse_family(&text, stem)
}

pub fn save_family(f: &InvariantFamily, path: &Path) -> Result<()> {
    std::fs::write(path, format_family(f))?;
    Ok(())
}

/// A builtin id or a path to a family file.
pub fn resolve_family(spec: &str) -> Result<InvariantFamily> {
    match spec {
        ST33_DEFAULT | S23_CLASSICAL => builtin_family(spec),
        path => load_family(Path::new(path)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{infinitesimal_act, so_generators};
    use crate::tensor::orthonormal_basis;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn st33() -> TensorSpaceSpec {
        TensorSpaceSpec::new(SpaceKind::St, 3, 3).unwrap()
    }

    fn random_point(basis: &SubspaceBasis<f64>, seed: u64) -> SymTensor<f64> {
        let mut rng = rng_from_seed(seed);
        let x: Vec<f64> = (0..basis.len()).map(|_| rng.sample(StandardNormal)).collect();
        basis.from_coords(&x).unwrap()
    }

    #[test]
    fn builtin_shapes() {
        let f = builtin_family(ST33_DEFAULT).unwrap();
        assert_eq!(f.len(), 4);
        assert_eq!(f.degrees(), vec![2, 4, 6, 8]);
        assert_eq!(f.reference_degrees(), Some(&[2, 4, 6, 8][..]));
        assert_eq!(f.symbol(), "A");
        assert_eq!(f.fallbacks().len(), 3);
        let s = builtin_family(S23_CLASSICAL).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.symbol(), "T");
        assert!(builtin_family("NOPE").is_err());
    }

    #[test]
    fn zero_tensor_gives_zero_values() {
        let f = builtin_family(ST33_DEFAULT).unwrap();
        let v = eval_family(&f, &SymTensor::<f64>::zeros(3, 3)).unwrap();
        assert_eq!(v, vec![0.0; 4]);
    }

    #[test]
    fn unit_basis_element_has_unit_j2() {
        let f = builtin_family(ST33_DEFAULT).unwrap();
        let basis = orthonormal_basis::<f64>(&st33()).unwrap();
        for b in basis.elements() {
            let v = eval_family(&f, b).unwrap();
            assert!((v[0] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn membership_is_enforced() {
        let f = builtin_family(ST33_DEFAULT).unwrap();
        let mut a = SymTensor::<f64>::zeros(3, 3);
        a.set(&[0, 0, 0], 1.0);
        assert!(eval_family(&f, &a).is_err());
        assert!(eval_family(&f, &SymTensor::<f64>::zeros(2, 3)).is_err());
    }

    #[test]
    fn values_are_invariant_under_haar_samples() {
        let f = builtin_family(ST33_DEFAULT).unwrap();
        let basis = orthonormal_basis::<f64>(&st33()).unwrap();
        let a = random_point(&basis, 17);
        let report = check_invariance(&f, &a, 200, 1e-9, 5).unwrap();
        assert!(report.passed, "{report:?}");
        let zero = check_invariance(&f, &SymTensor::zeros(3, 3), 10, 1e-9, 5).unwrap();
        assert_eq!(zero.max_deviation, 0.0);
        assert!(zero.passed);
    }

    #[test]
    fn invariance_report_is_reproducible() {
        let f = builtin_family(ST33_DEFAULT).unwrap();
        let basis = orthonormal_basis::<f64>(&st33()).unwrap();
        let a = random_point(&basis, 3);
        let r1 = check_invariance(&f, &a, 50, 1e-9, 99).unwrap();
        let r2 = check_invariance(&f, &a, 50, 1e-9, 99).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn coordinate_member_is_not_invariant() {
        let text = "space St 3 3\ngroup O 3\nconst U_i = 1 0 0\ninv A111 1 = A_ijk U_i U_j U_k\n";
        let f = parse_family(text, "broken").unwrap();
        let basis = orthonormal_basis::<f64>(&st33()).unwrap();
        let a = random_point(&basis, 21);
        let report = check_invariance(&f, &a, 100, 1e-9, 1).unwrap();
        assert!(!report.passed);
        assert!(report.max_deviation > 0.1);
        assert_eq!(report.worst_member.as_deref(), Some("A111"));
    }

    #[test]
    fn homogeneity() {
        let f = builtin_family(ST33_DEFAULT).unwrap();
        let basis = orthonormal_basis::<f64>(&st33()).unwrap();
        let a = random_point(&basis, 2);
        let base = eval_family(&f, &a).unwrap();
        assert_eq!(scale_behavior(&f, &a, 1.0).unwrap(), base);
        let minus = scale_behavior(&f, &a, -1.0).unwrap();
        for (x, y) in minus.iter().zip(&base) {
            assert!((x - y).abs() <= 1e-10 * y.abs().max(1.0));
        }
        let two = scale_behavior(&f, &a, 2.0).unwrap();
        assert!((two[0] - 4.0 * base[0]).abs() <= 1e-10 * base[0].abs());
        assert!(scale_behavior(&f, &a, 0.0).is_err());
    }

    #[test]
    fn j2_gradient_is_twice_the_coordinates() {
        let f = builtin_family(ST33_DEFAULT).unwrap();
        let basis = orthonormal_basis::<f64>(&st33()).unwrap();
        let a = random_point(&basis, 8);
        let x = basis.coords(&a).unwrap();
        let jac = jacobian_fd(&f, &a, &basis, None).unwrap();
        for (j, xj) in x.iter().enumerate() {
            assert!((jac[(0, j)] - 2.0 * xj).abs() < 1e-6);
        }
        let zero = jacobian_fd(&f, &SymTensor::zeros(3, 3), &basis, None).unwrap();
        assert!(zero.max_abs() < 1e-6);
    }

    #[test]
    fn gradients_annihilate_orbit_tangents() {
        let f = builtin_family(ST33_DEFAULT).unwrap();
        let basis = orthonormal_basis::<f64>(&st33()).unwrap();
        let a = random_point(&basis, 13);
        let a = a.scaled(1.0 / a.norm());
        let jac = jacobian_fd(&f, &a, &basis, None).unwrap();
        for w in so_generators::<f64>(3) {
            let t = basis.coords(&infinitesimal_act(&w, &a).unwrap()).unwrap();
            for v in jac.matvec(&t) {
                assert!(v.abs() < 1e-6, "{v}");
            }
        }
    }

    #[test]
    fn text_format_round_trip() {
        for id in [ST33_DEFAULT, S23_CLASSICAL] {
            let f = builtin_family(id).unwrap();
            let back = parse_family(&format_family(&f), "ignored").unwrap();
            assert_eq!(back, f);
        }
        let text = "space St 3 3\ngroup O 3\nconst U_i = 1 0 0\ninv A111 1 = A_ijk U_i U_j U_k\n";
        let f = parse_family(text, "broken").unwrap();
        assert_eq!(parse_family(&format_family(&f), "x").unwrap(), f);
    }

    #[test]
    fn file_validation() {
        let bad_degree = "space St 3 3\ngroup O 3\nlet B_ij = A_ipq A_jpq\ninv J6 4 = B_ij B_jk B_ki\n";
        assert!(matches!(parse_family(bad_degree, "x"), Err(Error::Family(_))));

        let triple = "space St 3 3\ngroup O 3\ninv X 3 = A_iij A_ikl\n";
        match parse_family(triple, "x") {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column, 17);
            }
            other => panic!("expected parse error, got {other:?}"),
        }

        let truncated = "space St 3 3\ngroup O";
        assert!(matches!(parse_family(truncated, "x"), Err(Error::Parse { line: 2, .. })));
        let no_members = "space St 3 3\ngroup O 3\n";
        assert!(parse_family(no_members, "x").is_err());
        let unknown = "space St 3 3\ngroup O 3\nfoo bar\n";
        assert!(matches!(parse_family(unknown, "x"), Err(Error::Parse { line: 3, column: 1, .. })));
        let comments = "# header\nspace S 2 3   # trailing\ngroup O 3\ninv I2 2 = T_ij T_ij\n";
        assert_eq!(parse_family(comments, "c").unwrap().len(), 1);
    }

    #[test]
    fn restrict_builds_subfamilies() {
        let f = builtin_family(ST33_DEFAULT).unwrap();
        let sub = f.restrict("J2J4", &["J2", "J4"]).unwrap();
        assert_eq!(sub.member_names(), vec!["J2", "J4"]);
        assert!(f.restrict("bad", &["J3"]).is_err());
    }
}

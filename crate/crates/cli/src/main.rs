//! `fbasis`: command-line front end.
//!
//! Exit codes: 0 success, 1 a check failed (verdict, invariance, rank), 2
//! usage or input errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use fbasis::family::eval_family;
use fbasis::orbit::ProbeVerdict;
use fbasis::{
    act, certify, dim_space, gaussian_element, generic_rank, haar_sample, lower_bound, orbit_distance,
    orthonormal_basis, quotient_dim_estimate, resolve_family, rng_from_seed, separability_probe,
    traceless_project, unit_gaussian_element, CertifyConfig, Error, GroupKind, GroupSpec, Mat, OrbitConfig,
    OrthogonalMatrix, ProbeConfig, SpaceKind, SymTensor, TensorSpaceSpec, Verdict, DEFAULT_SEED,
};

#[derive(Parser)]
#[command(name = "fbasis", version, about = "Tensor invariants and function-basis cardinality checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print linear dimensions of tensor spaces. Ranges: `2-6` or `2,3,5`.
    Dims {
        /// Space kind; all three when omitted.
        #[arg(long)]
        space: Option<SpaceKind>,
        #[arg(long)]
        order: String,
        #[arg(long)]
        dim: String,
        #[command(flatten)]
        out: OutArg,
    },
    /// Print `dim V`, `dim G` and the lower bound `dim V − dim G`.
    Bound {
        #[command(flatten)]
        space: SpaceArgs,
        #[command(flatten)]
        group: GroupArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run the cardinality certificate for a family and write it as JSON.
    Certify {
        #[command(flatten)]
        family: FamilyArg,
        #[command(flatten)]
        run: RunArgs,
        /// Haar samples for the invariance check.
        #[arg(long, default_value_t = 1000)]
        inv_samples: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Evaluate a family, or a single contraction, at a tensor.
    Eval {
        /// Builtin id or family file.
        #[arg(long, required_unless_present = "expr", conflicts_with = "expr")]
        family: Option<String>,
        /// Contraction such as `A_ijk A_ijk`; its one non-builtin symbol is bound to the tensor.
        #[arg(long)]
        expr: Option<String>,
        #[arg(long)]
        tensor: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Apply a group element (from a matrix file, or Haar-sampled from the seed).
    Act {
        #[arg(long)]
        tensor: PathBuf,
        /// JSON array of rows.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long, default_value = "O")]
        group: GroupKind,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Traceless projection of an order-2 or order-3 tensor.
    Project {
        #[arg(long)]
        tensor: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Random element with standard Gaussian coordinates in an orthonormal basis.
    Random {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Rescale to unit norm.
        #[arg(long)]
        unit: bool,
        #[command(flatten)]
        out: OutArg,
    },
    /// Minimize `‖g·A − B‖` over the group.
    OrbitDistance {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value = "O")]
        group: GroupKind,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        starts: usize,
        /// Same-orbit threshold; `1e-6 · max(1, ‖A‖)` by default.
        #[arg(long)]
        orbit_eps: Option<f64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Separability probe over three pair populations.
    Probe {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Pairs per population.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Invariant-gap threshold for a violation.
        #[arg(long, default_value_t = 1e-8)]
        inv_tol: f64,
        /// Orbit-distance threshold for a violation.
        #[arg(long, default_value_t = 1e-2)]
        orbit_eps: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Generic Jacobian rank of a family.
    Rank {
        #[command(flatten)]
        family: FamilyArg,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Quotient-dimension estimate from sampled orbit dimensions.
    QuotientDim {
        #[command(flatten)]
        space: SpaceArgs,
        #[command(flatten)]
        group: GroupArg,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Monte-Carlo invariance check at a tensor.
    Invariance {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long)]
        tensor: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 1e-9)]
        inv_tol: f64,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Args)]
struct SpaceArgs {
    #[arg(long)]
    space: SpaceKind,
    #[arg(long)]
    order: usize,
    #[arg(long)]
    dim: usize,
}

impl SpaceArgs {
    fn spec(&self) -> Result<TensorSpaceSpec, Error> {
        TensorSpaceSpec::new(self.space, self.order, self.dim)
    }
}

#[derive(Args)]
struct GroupArg {
    #[arg(long, default_value = "O")]
    group: GroupKind,
}

#[derive(Args)]
struct FamilyArg {
    /// Builtin id (ST33_DEFAULT, S23_CLASSICAL) or a family file.
    #[arg(long)]
    family: String,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 1e-8)]
    rank_tol: f64,
    #[arg(long, default_value_t = 1e-9)]
    inv_tol: f64,
}

#[derive(Args)]
struct OutArg {
    /// Write the primary output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Check,
    Input(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Input(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn emit(out: &OutArg, text: &str) -> Result<(), Error> {
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match &out.out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_json(out: &OutArg, value: &Value) -> Result<(), Error> {
    emit(out, &serde_json::to_string_pretty(value)?)
}

fn read_tensor(path: &Path) -> Result<SymTensor<f64>, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    SymTensor::from_json_str(&text)
}

fn group_for(kind: GroupKind, dim: usize) -> Result<GroupSpec, Error> {
    GroupSpec::new(kind, dim)
}

/// Parses `3`, `2-6` or `2,3,5`.
fn parse_range(text: &str) -> Result<Vec<usize>, Error> {
    let bad = || Error::InvalidSpace(format!("cannot read {text:?} as a number, range or list"));
    if let Some((lo, hi)) = text.split_once('-') {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn tensor_with_config(t: &SymTensor<f64>, config: Value) -> Value {
    let mut v = t.to_json_value();
    v["config"] = config;
    v
}

fn with_tool(mut config: Value, command: &str) -> Value {
    config["command"] = json!(command);
    config["tool_version"] = json!(env!("CARGO_PKG_VERSION"));
    config
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Dims { space, order, dim, out } => {
            let orders = parse_range(&order)?;
            let dims = parse_range(&dim)?;
            let kinds = match space {
                Some(k) => vec![k],
                None => vec![SpaceKind::T, SpaceKind::S, SpaceKind::St],
            };
            if kinds.len() == 1 && orders.len() == 1 && dims.len() == 1 {
                let spec = TensorSpaceSpec::new(kinds[0], orders[0], dims[0])?;
                emit(&out, &dim_space(&spec)?.to_string())?;
                return Ok(());
            }
            let mut lines = vec!["# space order dim dimension".to_string()];
            for &k in &kinds {
                for &m in &orders {
                    for &n in &dims {
                        let spec = TensorSpaceSpec::new(k, m, n)?;
                        lines.push(format!("{k} {m} {n} {}", dim_space(&spec)?));
                    }
                }
            }
            emit(&out, &lines.join("\n"))?;
        }
        Command::Bound { space, group, out } => {
            let spec = space.spec()?;
            let g = group_for(group.group, spec.dim)?;
            let lb = lower_bound(&spec, &g)?;
            emit(&out, &format!("{} {} {lb}", dim_space(&spec)?, fbasis::group_dim(&g)))?;
        }
        Command::Certify {
            family,
            run,
            inv_samples,
            out,
        } => {
            let f = resolve_family(&family.family)?;
            let config = CertifyConfig {
                seed: run.seed,
                rank_tol: run.rank_tol,
                inv_tol: run.inv_tol,
                rank_samples: run.samples,
                inv_samples,
                quotient_samples: run.samples,
                ..CertifyConfig::default()
            };
            let cert = certify(&f, f.space(), f.group(), &config)?;
            emit_json(&out, &serde_json::to_value(&cert)?)?;
            if cert.verdict != Verdict::IrreducibleByCount {
                return Err(Failure::Check);
            }
        }
        Command::Eval {
            family,
            expr,
            tensor,
            out,
        } => {
            let t = read_tensor(&tensor)?;
            if let Some(text) = expr {
                let e = fbasis::parse(&text)?;
                let symbols: Vec<&str> = e.symbols().filter(|s| !fbasis::einsum::is_builtin(s)).collect();
                let symbol = match symbols.as_slice() {
                    [first, rest @ ..] if rest.iter().all(|s| s == first) => *first,
                    _ => return Err(Error::Expr(format!("`{text}` must use exactly one tensor symbol")).into()),
                };
                let ctx = fbasis::EvalContext::new(t.dim()).with(symbol, t)?;
                let value = fbasis::evaluate(&e, &ctx, &[])?;
                let header = format!("# eval expr={text} tensor={}", tensor.display());
                let body = match value.as_scalar() {
                    Some(v) => v.to_string(),
                    None => serde_json::to_string_pretty(&value.to_json_value())?,
                };
                emit(&out, &format!("{header}\n{body}"))?;
                return Ok(());
            }
            let f = resolve_family(family.as_deref().expect("clap requires --family or --expr"))?;
            let values = eval_family(&f, &t)?;
            let header = format!(
                "# eval family={} members={} tensor={}",
                f.name(),
                f.member_names().join(","),
                tensor.display()
            );
            let body: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            emit(&out, &format!("{header}\n{}", body.join(" ")))?;
        }
        Command::Act {
            tensor,
            matrix,
            group,
            seed,
            out,
        } => {
            let t = read_tensor(&tensor)?;
            let gspec = group_for(group, t.dim())?;
            let g = match &matrix {
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                    let rows: Vec<Vec<f64>> = serde_json::from_str(&text)?;
                    if rows.iter().any(|r| r.len() != rows.len()) {
                        return Err(Error::Format("matrix must be square".into()).into());
                    }
                    OrthogonalMatrix::try_new(Mat::from_rows(&rows), gspec, 1e-10)?
                }
                None => haar_sample::<f64, _>(&gspec, &mut rng_from_seed(seed)),
            };
            let moved = act(&g, &t)?;
            let config = json!({
                "tensor": tensor.display().to_string(),
                "group": gspec.to_string(),
                "seed": if matrix.is_some() { Value::Null } else { json!(seed) },
                "g": g.to_row_major(),
            });
            emit_json(&out, &tensor_with_config(&moved, with_tool(config, "act")))?;
        }
        Command::Project { tensor, out } => {
            let t = read_tensor(&tensor)?;
            let p = traceless_project(&t)?;
            let config = json!({ "tensor": tensor.display().to_string() });
            emit_json(&out, &tensor_with_config(&p, with_tool(config, "project")))?;
        }
        Command::Random { space, seed, unit, out } => {
            let spec = space.spec()?;
            let basis = orthonormal_basis::<f64>(&spec)?;
            let mut rng = rng_from_seed(seed);
            let t = if unit {
                unit_gaussian_element(&basis, &mut rng)
            } else {
                gaussian_element(&basis, &mut rng)
            };
            let config = json!({ "space": spec.to_string(), "seed": seed, "unit": unit });
            emit_json(&out, &tensor_with_config(&t, with_tool(config, "random")))?;
        }
        Command::OrbitDistance {
            a,
            b,
            group,
            seed,
            starts,
            orbit_eps,
            out,
        } => {
            let ta = read_tensor(&a)?;
            let tb = read_tensor(&b)?;
            let gspec = group_for(group, ta.dim())?;
            let config = OrbitConfig {
                num_starts: starts,
                seed,
                ..OrbitConfig::default()
            };
            let al = orbit_distance(&ta, &tb, &gspec, &config)?;
            let eps = orbit_eps.unwrap_or_else(|| fbasis::orbit::default_orbit_eps(&ta));
            let header = format!(
                "# orbit-distance a={} b={} group={gspec} seed={seed} starts={starts} orbit_eps={eps:e}",
                a.display(),
                b.display()
            );
            emit(
                &out,
                &format!("{header}\n{}\nsame_orbit {}", al.distance, al.distance <= eps),
            )?;
        }
        Command::Probe {
            family,
            seed,
            samples,
            inv_tol,
            orbit_eps,
            out,
        } => {
            let f = resolve_family(&family.family)?;
            let config = ProbeConfig {
                num_pairs: samples,
                seed,
                eps_inv: inv_tol,
                eps_orb: orbit_eps,
                ..ProbeConfig::default()
            };
            let report = separability_probe(&f, &config)?;
            let mut v = serde_json::to_value(&report)?;
            v["config"] = with_tool(serde_json::to_value(config)?, "probe");
            emit_json(&out, &v)?;
            if report.verdict != ProbeVerdict::NoViolations {
                return Err(Failure::Check);
            }
        }
        Command::Rank { family, run, out } => {
            let f = resolve_family(&family.family)?;
            let gr = generic_rank::<f64>(&f, run.samples, run.seed, run.rank_tol, false)?;
            let mut v = serde_json::to_value(&gr)?;
            v["members"] = json!(f.member_names());
            v["config"] = with_tool(
                json!({ "family": family.family, "seed": run.seed, "samples": run.samples, "rank_tol": run.rank_tol }),
                "rank",
            );
            emit_json(&out, &v)?;
            if gr.rank < f.len() {
                return Err(Failure::Check);
            }
        }
        Command::QuotientDim { space, group, run, out } => {
            let spec = space.spec()?;
            let g = group_for(group.group, spec.dim)?;
            let q = quotient_dim_estimate::<f64>(&spec, &g, run.samples, run.seed, run.rank_tol)?;
            let header = format!(
                "# quotient-dim space={spec} group={g} samples={} seed={} rank_tol={:e}",
                run.samples, run.seed, run.rank_tol
            );
            emit(&out, &format!("{header}\n{} {}", q.estimate, q.max_orbit_dim))?;
        }
        Command::Invariance {
            family,
            tensor,
            seed,
            samples,
            inv_tol,
            out,
        } => {
            let f = resolve_family(&family.family)?;
            let t = read_tensor(&tensor)?;
            let rep = fbasis::check_invariance(&f, &t, samples, inv_tol, seed)?;
            emit_json(&out, &serde_json::to_value(&rep)?)?;
            if !rep.passed {
                return Err(Failure::Check);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

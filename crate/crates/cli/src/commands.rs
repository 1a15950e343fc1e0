use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde_json::{json, Value};

use slocc_core::classifier::{classify_report, critical_exists_value, polystable_limit, ClassReport, OrbitType};
use slocc_core::dsl::{parse_pencil_spec_with_notices, parse_state_json, render_pencil_spec};
use slocc_core::enumerate::{enumerate_classes, render_table, TableFormat};
use slocc_core::geometry::{balanced_eigenvalues, eigenvalue_to_vector, imbalance};
use slocc_core::normalform::{crosscheck_with, normal_form_with, NormalFormOptions};
use slocc_core::pencil::{
    compute_kcf_with, moebius_equivalent, pencil_from_state, representative_state, KcfOptions, KroneckerStructure,
};
use slocc_core::tensor::StateTensor;
use slocc_core::witness::{limit_structure, norm_ratio, witness_for, OperatorFamily, Target};
use slocc_core::{Error, Result};

pub struct Context {
    pub seed: u64,
    pub threads: usize,
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn read_state(path: &Path) -> Result<StateTensor> {
    parse_state_json(&read_file(path)?)
}

fn read_pencil(spec: &str) -> Result<KroneckerStructure> {
    let (ks, notices) = parse_pencil_spec_with_notices(spec)?;
    for notice in notices {
        eprintln!("note: repeated eigenvalue {} merged (offset {})", notice.eigenvalue, notice.offset);
    }
    Ok(ks)
}

fn pretty(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
    text.push('\n');
    text
}

fn type_name(t: OrbitType) -> String {
    serde_json::to_value(t).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Pencil in block notation, e.g. "L1+M2(0)+M1(inf)".
    #[arg(long, conflicts_with = "state", required_unless_present = "state")]
    pencil: Option<String>,
    /// State file in the sparse JSON format.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Relative singular-value threshold for rank decisions.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Emit JSON instead of text.
    #[arg(long)]
    json: bool,
}

pub fn classify(ctx: &Context, args: ClassifyArgs) -> Result<String> {
    let report = match (&args.pencil, &args.state) {
        (Some(spec), None) => classify_report(&read_pencil(spec)?)?,
        (None, Some(path)) => {
            let state = read_state(path)?;
            if !state.is_fully_entangled(args.tol) {
                return Err(Error::NotFullyEntangled("some single-party marginal is rank deficient".into()));
            }
            let opts = KcfOptions { rank_tol: args.tol, seed: ctx.seed, ..KcfOptions::default() };
            classify_report(&compute_kcf_with(&pencil_from_state(&state), &opts)?)?
        }
        _ => return Err(Error::Malformed("give exactly one of --pencil and --state".into())),
    };
    let limit = match report.orbit_type {
        OrbitType::StrictlySemistable => Some(render_pencil_spec(&polystable_limit(&report.kcf)?)),
        _ => None,
    };
    if args.json {
        return Ok(pretty(&classify_json(&report, limit, args.tol, ctx.seed)));
    }
    let mut out = String::new();
    let ks = &report.kcf;
    writeln!(out, "type: {}", report.orbit_type).unwrap();
    writeln!(out, "kcf: {}", render_pencil_spec(ks)).unwrap();
    writeln!(out, "dims: 2x{}x{}", ks.rows(), ks.cols()).unwrap();
    if let Some(d) = report.orbit_dim {
        writeln!(out, "orbit_dim: {d}").unwrap();
    }
    if let Some(d) = report.stabilizer_dim {
        writeln!(out, "stabilizer_dim: {d}").unwrap();
    }
    if let Some(limit) = limit {
        writeln!(out, "limit: {limit}").unwrap();
    }
    Ok(out)
}

fn classify_json(report: &ClassReport, limit: Option<String>, tol: f64, seed: u64) -> Value {
    let ks = &report.kcf;
    json!({
        "type": type_name(report.orbit_type),
        "kcf": render_pencil_spec(ks),
        "dims": [2, ks.rows(), ks.cols()],
        "orbit_dim": report.orbit_dim,
        "stabilizer_dim": report.stabilizer_dim,
        "limit": limit,
        "metadata": { "tol": tol, "seed": seed },
    })
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    m: usize,
    n: usize,
    /// md, csv or json.
    #[arg(long, default_value = "md")]
    format: String,
}

pub fn enumerate(args: EnumerateArgs) -> Result<String> {
    let format: TableFormat = args.format.parse()?;
    let families = enumerate_classes(args.m, args.n)?;
    let mut text = render_table(&families, format)?;
    if !text.ends_with('\n') {
        text.push('\n');
    }
    Ok(text)
}

#[derive(Debug, Args)]
pub struct WitnessArgs {
    /// Pencil in block notation.
    #[arg(long)]
    pencil: String,
    /// Parameter at which the family is evaluated.
    #[arg(long, default_value_t = 40.0)]
    alpha: f64,
    /// Emit the family and the check as JSON.
    #[arg(long)]
    emit_json: bool,
}

pub fn witness(args: WitnessArgs) -> Result<String> {
    let ks = read_pencil(&args.pencil)?;
    let family = witness_for(&ks)?;
    let psi = representative_state(&ks)?;
    let ratio = norm_ratio(&family, args.alpha, &psi)?;
    let (limit, matches) = match &family.target {
        Target::ZeroVector => (None, ratio < 1e-6),
        Target::CriticalClass(target) | Target::Reduct(target) => {
            let reached = limit_structure(&family, args.alpha, &psi, 1e-6)?;
            (Some(render_pencil_spec(&reached)), moebius_equivalent(&reached, target, 1e-6))
        }
    };
    if args.emit_json {
        let mut value = family.to_json();
        value["check"] = json!({
            "alpha": args.alpha,
            "norm_ratio": ratio,
            "determinant_drift": family.determinant_drift(),
            "limit": limit,
            "target_reached": matches,
        });
        return Ok(pretty(&value));
    }
    let mut out = describe_family(&family);
    writeln!(out, "alpha: {}", args.alpha).unwrap();
    writeln!(out, "norm_ratio: {ratio:.6e}").unwrap();
    if let Some(limit) = limit {
        writeln!(out, "limit: {limit}").unwrap();
    }
    writeln!(out, "target_reached: {matches}").unwrap();
    Ok(out)
}

fn describe_family(family: &OperatorFamily) -> String {
    let mut out = String::new();
    writeln!(out, "family: {}", family.kind.label()).unwrap();
    for (name, side) in [("A", &family.a), ("B", &family.b), ("C", &family.c)] {
        let exps: Vec<String> = side.exponents.iter().map(|k| k.to_string()).collect();
        let constant = if side.constant.is_some() { " * const" } else { "" };
        writeln!(out, "{name}: exp(alpha * diag[{}]){constant}", exps.join(", ")).unwrap();
    }
    let target = match &family.target {
        Target::ZeroVector => "zero vector".to_owned(),
        Target::CriticalClass(ks) => format!("critical class {}", render_pencil_spec(ks)),
        Target::Reduct(ks) => format!("diagonal reduct {}", render_pencil_spec(ks)),
    };
    writeln!(out, "target: {target}").unwrap();
    out
}

#[derive(Debug, Args)]
pub struct NormalFormArgs {
    /// State file in the sparse JSON format.
    #[arg(long)]
    state: PathBuf,
    /// Number of full A, B, C cycles.
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
    /// Marginal defect accepted as critical.
    #[arg(long, default_value_t = 1e-9)]
    eps_crit: f64,
    /// Norm ratio taken as reaching zero.
    #[arg(long, default_value_t = 1e-8)]
    eps_null: f64,
    /// Condition number above which a critical point is not accepted as reached.
    #[arg(long, default_value_t = 1e4)]
    cond_threshold: f64,
    /// Emit the full report, including the norm trace, as JSON.
    #[arg(long)]
    json: bool,
}

pub fn normalform(args: NormalFormArgs) -> Result<String> {
    let state = read_state(&args.state)?;
    let opts = NormalFormOptions {
        eps_crit: args.eps_crit,
        eps_null: args.eps_null,
        max_iter: args.max_iter,
        cond_threshold: args.cond_threshold,
    };
    let report = normal_form_with(&state, &opts)?;
    if args.json {
        let mut value = serde_json::to_value(&report).expect("report serializes");
        value["final_state"] = serde_json::to_value(report.final_state.to_json()).expect("state serializes");
        value["metadata"] = json!({
            "eps_crit": opts.eps_crit,
            "eps_null": opts.eps_null,
            "max_iter": opts.max_iter,
            "cond_threshold": opts.cond_threshold,
        });
        return Ok(pretty(&value));
    }
    let mut out = String::new();
    writeln!(out, "verdict: {:?}", report.verdict).unwrap();
    writeln!(out, "iterations: {}", report.iterations).unwrap();
    writeln!(out, "norm_ratio: {:.6e}", report.final_ratio()).unwrap();
    writeln!(out, "defect: {:.6e}", report.final_defect()).unwrap();
    let [a, b, c] = report.cond_numbers;
    writeln!(out, "condition_numbers: {a:.3e} {b:.3e} {c:.3e}").unwrap();
    Ok(out)
}

#[derive(Debug, Args)]
pub struct CrosscheckArgs {
    m: usize,
    n: usize,
    #[arg(long)]
    json: bool,
}

pub fn crosscheck(ctx: &Context, args: CrosscheckArgs) -> Result<String> {
    let families = enumerate_classes(args.m, args.n)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.threads)
        .build()
        .map_err(|e| Error::Io(format!("thread pool: {e}")))?;
    let opts = NormalFormOptions::default();
    let checks: Vec<_> = pool.install(|| {
        families
            .par_iter()
            .map(|family| {
                let ks = family.instantiate_default()?;
                crosscheck_with(&representative_state(&ks)?, &opts, 1e-9).map(|check| (render_pencil_spec(&ks), check))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let agreed = checks.iter().filter(|(_, c)| c.agrees).count();
    if args.json {
        let rows: Vec<Value> = checks
            .iter()
            .enumerate()
            .map(|(i, (pencil, c))| {
                json!({
                    "no": i + 1,
                    "pencil": pencil,
                    "type": type_name(c.symbolic),
                    "verdict": c.verdict,
                    "agrees": c.agrees,
                    "iterations": c.iterations,
                })
            })
            .collect();
        return Ok(pretty(&json!({ "rows": rows, "agreed": agreed, "total": checks.len() })));
    }
    let mut out = String::new();
    for (i, (pencil, c)) in checks.iter().enumerate() {
        let flag = if c.agrees { "ok" } else { "DISAGREE" };
        writeln!(out, "{:>3}  {pencil:<40} {:<20} {:<17} {flag}", i + 1, c.symbolic.to_string(), format!("{:?}", c.verdict))
            .unwrap();
    }
    writeln!(out, "agreement: {agreed}/{}", checks.len()).unwrap();
    Ok(out)
}

#[derive(Debug, Args)]
pub struct CritExistsArgs {
    /// Local dimensions.
    #[arg(required = true)]
    dims: Vec<usize>,
    #[arg(long)]
    json: bool,
}

pub fn crit_exists(args: CritExistsArgs) -> Result<String> {
    let value = critical_exists_value(&args.dims)?;
    let exists = value >= 0;
    if args.json {
        return Ok(pretty(&json!({ "dims": args.dims, "exists": exists, "value": value.to_string() })));
    }
    Ok(format!("{exists}\nvalue: {value}\n"))
}

#[derive(Debug, Args)]
pub struct BalanceArgs {
    /// Comma-separated eigenvalue multiplicities, e.g. "2,1,1".
    #[arg(long)]
    mults: String,
    /// Largest accepted norm of the weighted vector sum.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long)]
    json: bool,
}

pub fn balance(args: BalanceArgs) -> Result<String> {
    let mults = args
        .mults
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|_| Error::Malformed(format!("bad multiplicity {s:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let eigenvalues = balanced_eigenvalues(&mults)?;
    let vectors: Vec<_> =
        eigenvalues.iter().zip(&mults).map(|(x, &m)| eigenvalue_to_vector(x).with_mult(m)).collect();
    let residual = imbalance(&vectors, 0.0, 0.0, 0.0).sqrt();
    if residual > args.tol {
        return Err(Error::NoConvergence { best: residual });
    }
    if args.json {
        let list: Vec<String> = eigenvalues.iter().map(|x| x.to_string()).collect();
        return Ok(pretty(&json!({ "mults": mults, "eigenvalues": list, "residual": residual })));
    }
    let mut out = String::new();
    for (x, m) in eigenvalues.iter().zip(&mults) {
        writeln!(out, "{x}  (multiplicity {m})").unwrap();
    }
    writeln!(out, "residual: {residual:.3e}").unwrap();
    Ok(out)
}

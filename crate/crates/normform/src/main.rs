//! `normform`: normal forms of real hypersurfaces from the command line.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand as ClapSubcommand, ValueEnum};
use normform_core::fischer::{build_basis_family, fischer_decompose_for, model_divisor, FischerError};
use normform_core::hypersurface::DefiningSeries;
use normform_core::normalizer::{normalize, NormalFormResult, NormalizeError};
use normform_core::poly::Monomial;
use normform_core::report::{
    parse_document, parse_poly_field, parse_result_field, read_document, verify_result, InputError, RunConfig,
    Subcommand,
};
use normform_core::weight::{audit, validate_model_homogeneity, weight};
use normform_core::{ModelSpec, WeightPreset};
use serde_json::{json, Value};

const DEFAULT_KMAX: u32 = 5;

#[derive(Parser)]
#[command(name = "normform", version, about = "Exact normal forms for Im w = (Re w)^s P(z, z̄) + higher order terms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Normalize a defining series through the working order.
    Normalize(Args),
    /// Fischer decomposition of `f` by a divisor, or the basis family when no `f` is given.
    Fischer(Args),
    /// Weights of the model and tail monomials.
    Weights(Args),
    /// Check a normalization result, computing it first when the input has none.
    Verify(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Input JSON document.
    #[arg(long)]
    input: PathBuf,
    /// Working order; defaults to the document's order or 2 k0 + 2.
    #[arg(long)]
    order: Option<u32>,
    #[arg(long, value_enum, default_value = "block")]
    weights: Preset,
    /// JSON output path; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Per-class diagnostics with timings.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    #[value(alias = "block_minimal")]
    Block,
    Literal,
}

impl From<Preset> for WeightPreset {
    fn from(p: Preset) -> Self {
        match p {
            Preset::Block => WeightPreset::BlockMinimal,
            Preset::Literal => WeightPreset::Literal,
        }
    }
}

/// A failed run with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure { code: e.exit_code(), message: e.to_string() }
    }
}

impl From<NormalizeError> for Failure {
    fn from(e: NormalizeError) -> Self {
        let code = match e {
            NormalizeError::NonUniqueSolution { .. }
            | NormalizeError::Inconsistent { .. }
            | NormalizeError::Triangularity { .. } => 2,
            NormalizeError::OrderTooLow { .. } | NormalizeError::Hypersurface(_) => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<FischerError> for Failure {
    fn from(e: FischerError) -> Self {
        let code = match e {
            FischerError::NoPolynomialDecomposition { .. }
            | FischerError::SingularDecomposition { .. }
            | FischerError::DependentFamily { .. } => 2,
            FischerError::ZeroDivisor
            | FischerError::DivisorNotHomogeneous { .. }
            | FischerError::UnsupportedPreset
            | FischerError::BadKmax => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

/// JSON document and text summary of a finished run, with its exit code.
struct Output {
    json: Value,
    summary: String,
    code: u8,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (subcommand, args) = match cli.command {
        Command::Normalize(a) => (Subcommand::Normalize, a),
        Command::Fischer(a) => (Subcommand::Fischer, a),
        Command::Weights(a) => (Subcommand::Weights, a),
        Command::Verify(a) => (Subcommand::Verify, a),
    };
    match run(subcommand, args) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(subcommand: Subcommand, args: Args) -> Result<u8, Failure> {
    let doc = read_document(&args.input)?;
    let (model, series, mut config) = parse_document(&doc, &args.input)?;
    config.subcommand = subcommand;
    config.weight_preset = args.weights.into();
    config.output_path = args.output;
    config.diagnostics_path = args.diagnostics;
    if let Some(o) = args.order {
        config.order = o;
    }
    let out = match subcommand {
        Subcommand::Normalize => run_normalize(&series, &config)?,
        Subcommand::Fischer => run_fischer(&doc, &model, &config)?,
        Subcommand::Weights => run_weights(&model, &series, &config),
        Subcommand::Verify => run_verify(&doc, &series, &config)?,
    };
    emit(&config, &out)?;
    Ok(out.code)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure { code: 3, message: format!("cannot write {}: {e}", path.display()) })
}

fn emit(config: &RunConfig, out: &Output) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(&out.json).expect("JSON output serializes");
    match &config.output_path {
        Some(p) => {
            write(p, &(text + "\n"))?;
            let _ = write!(std::io::stdout(), "{}", out.summary);
        }
        None => {
            let _ = writeln!(std::io::stdout(), "{text}");
            let _ = write!(std::io::stderr(), "{}", out.summary);
        }
    }
    Ok(())
}

fn require_block(config: &RunConfig) -> Result<(), Failure> {
    match config.weight_preset {
        WeightPreset::BlockMinimal => Ok(()),
        WeightPreset::Literal => Err(Failure::validation("normalization needs the block weights; the literal preset is not additive")),
    }
}

fn compute(series: &DefiningSeries, config: &RunConfig) -> Result<NormalFormResult, Failure> {
    require_block(config)?;
    let res = normalize(series, config.order)?;
    if let Some(p) = &config.diagnostics_path {
        let text = serde_json::to_string_pretty(&res.timing_json()).expect("diagnostics serialize");
        write(p, &(text + "\n"))?;
    }
    Ok(res)
}

fn normalize_summary(res: &NormalFormResult) -> String {
    let mut s = String::new();
    for d in &res.diagnostics {
        s.push_str(&format!(
            "class {}: {} unknowns, {} equations, rank {}, normal space {}\n",
            d.class, d.unknowns, d.equations, d.rank, d.normal_space_dim
        ));
    }
    if res.normal_form.tail().is_empty() {
        s.push_str("normal form: the model\n");
    }
    for (c, p) in res.normal_form.tail() {
        s.push_str(&format!("phi_{c} = {p}\n"));
    }
    s
}

fn run_normalize(series: &DefiningSeries, config: &RunConfig) -> Result<Output, Failure> {
    let res = compute(series, config)?;
    Ok(Output { json: res.to_json(), summary: normalize_summary(&res), code: 0 })
}

fn run_fischer(doc: &Value, model: &ModelSpec, config: &RunConfig) -> Result<Output, Failure> {
    let n = model.n();
    match parse_poly_field(doc, "f", n)? {
        Some(f) => {
            let divisor = parse_poly_field(doc, "divisor", n)?.unwrap_or_else(|| model_divisor(model));
            let (a, b) = fischer_decompose_for(&f, &divisor, model, config.weight_preset)?;
            let summary = format!("f = D·A + B\nD = {divisor}\nA = {a}\nB = {b}\n");
            Ok(Output { json: json!({"divisor": divisor.to_json(), "A": a.to_json(), "B": b.to_json()}), summary, code: 0 })
        }
        None => {
            let kmax = match doc.get("kmax") {
                None => DEFAULT_KMAX,
                Some(v) => v
                    .as_u64()
                    .and_then(|k| u32::try_from(k).ok())
                    .ok_or_else(|| Failure::from(InputError::Parse("kmax must be a non-negative integer".into())))?,
            };
            let family = build_basis_family(model, kmax, config.weight_preset)?;
            let entries: Vec<Value> = family
                .entries
                .iter()
                .map(|e| json!({"label": e.label(), "k": e.k, "remainder": e.remainder.to_json()}))
                .collect();
            let summary = format!("basis family through k = {kmax}: {} entries, independent\n", family.len());
            Ok(Output { json: json!({"kmax": kmax, "independent": true, "entries": entries}), summary, code: 0 })
        }
    }
}

fn run_weights(model: &ModelSpec, series: &DefiningSeries, config: &RunConfig) -> Output {
    let preset = config.weight_preset;
    let n = model.n();
    let x = Monomial::new(&vec![0; n], &vec![0; n], 1);
    let mut monomials: Vec<Monomial> = std::iter::once(x).chain(model.leading().monomials().cloned()).collect();
    for p in series.tail().values() {
        monomials.extend(p.monomials().cloned());
    }
    let g = model.grading();
    let rows: Vec<Value> = monomials
        .iter()
        .map(|m| {
            let mut row = json!({"monomial": format!("{m:?}"), "class": m.weight(&g)});
            match weight(m, model, preset) {
                Ok(w) => row["weight"] = json!(w),
                Err(e) => row["error"] = json!(e.to_string()),
            }
            if preset == WeightPreset::Literal {
                row["audit"] = serde_json::to_value(audit(m, model)).expect("audit serializes");
            }
            row
        })
        .collect();
    let (homogeneity, summary, code) = match validate_model_homogeneity(model, preset) {
        Ok(k) => (json!({"ok": k}), format!("model is homogeneous of weight {k}\n"), 0),
        Err(e) => (json!({"error": e.to_string()}), format!("model is not homogeneous: {e}\n"), 1),
    };
    Output { json: json!({"preset": preset, "homogeneity": homogeneity, "monomials": rows}), summary, code }
}

fn run_verify(doc: &Value, series: &DefiningSeries, config: &RunConfig) -> Result<Output, Failure> {
    let res = match parse_result_field(doc)? {
        Some(r) => r,
        None => compute(series, config)?,
    };
    let report = verify_result(series, &res).map_err(|e| Failure::validation(e.to_string()))?;
    let code = if report.all_passed { 0 } else { 1 };
    Ok(Output { json: report.to_json(), summary: report.summary(), code })
}

//! Independent verification of a normalization result.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_traits::Zero;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::fischer::{build_basis_family, normalization_residual, KernelMode};
use crate::hypersurface::{
    graph_residual, jet_conditions_check, model_defining, pushforward, transform_defining, DefiningSeries, FormalMap,
};
use crate::normalizer::{catalog, Component, NormalFormResult, Part, RealSlice, Unknown};
use crate::hypersurface::HypersurfaceError;
use crate::poly::{HoloPoly, Poly, Var};
use crate::scalar::format_rational;
use crate::weight::{ModelSpec, WeightPreset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Subcommand {
    Normalize,
    Fischer,
    Weights,
    Verify,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub input_path: PathBuf,
    pub order: u32,
    pub weight_preset: WeightPreset,
    pub subcommand: Subcommand,
    pub output_path: Option<PathBuf>,
    pub diagnostics_path: Option<PathBuf>,
}

#[derive(Debug, Error, PartialEq)]
pub enum InputError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
}

impl InputError {
    pub fn exit_code(&self) -> u8 {
        match self {
            InputError::Validation(_) => 1,
            InputError::Io { .. } | InputError::Parse(_) => 3,
        }
    }
}

impl From<HypersurfaceError> for InputError {
    fn from(e: HypersurfaceError) -> Self {
        match e {
            HypersurfaceError::Json(m) => InputError::Parse(m),
            other => InputError::Validation(other.to_string()),
        }
    }
}

pub fn read_document(path: &Path) -> Result<Value, InputError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| InputError::Io { path: path.display().to_string(), message: e.to_string() })?;
    serde_json::from_str(&text).map_err(|e| InputError::Parse(e.to_string()))
}

fn parse_model(v: &Value) -> Result<ModelSpec, InputError> {
    #[derive(serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Repr {
        #[serde(rename = "N")]
        n: usize,
        s: u32,
        k0: u32,
        #[serde(rename = "P")]
        p: Value,
    }
    let r: Repr = serde_json::from_value(v.clone()).map_err(|e| InputError::Parse(format!("model: {e}")))?;
    let p = Poly::from_json(&r.p, r.n).map_err(|e| InputError::Parse(format!("model P: {e}")))?;
    ModelSpec::new(r.n, r.s, r.k0, p).map_err(|e| InputError::Validation(format!("model: {e}")))
}

/// Optional polynomial stored under `key`.
pub fn parse_poly_field(doc: &Value, key: &str, n: usize) -> Result<Option<Poly>, InputError> {
    doc.get(key)
        .map(|v| Poly::from_json(v, n).map_err(|e| InputError::Parse(format!("{key}: {e}"))))
        .transpose()
}

/// Optional normalization result stored under `result`.
pub fn parse_result_field(doc: &Value) -> Result<Option<NormalFormResult>, InputError> {
    doc.get("result").map(|v| NormalFormResult::from_json(v).map_err(InputError::from)).transpose()
}

/// Model, defining series and default configuration from a parsed document.
///
/// The document holds `model`, an optional `tail` and an optional `order` (default `2 k0 + 2`).
pub fn parse_document(doc: &Value, path: &Path) -> Result<(ModelSpec, DefiningSeries, RunConfig), InputError> {
    let obj = doc.as_object().ok_or_else(|| InputError::Parse("input must be a JSON object".into()))?;
    let model = parse_model(obj.get("model").ok_or_else(|| InputError::Parse("missing model".into()))?)?;
    let order = match obj.get("order") {
        None => 2 * model.k0() + 2,
        Some(v) => v.as_u64().and_then(|o| u32::try_from(o).ok()).ok_or_else(|| InputError::Parse("order must be a non-negative integer".into()))?,
    };
    let mut tail = BTreeMap::new();
    if let Some(t) = obj.get("tail") {
        let t = t.as_object().ok_or_else(|| InputError::Parse("tail must be an object".into()))?;
        for (k, p) in t {
            let class: u32 = k.parse().map_err(|_| InputError::Parse(format!("bad tail key {k:?}")))?;
            let p = Poly::from_json(p, model.n()).map_err(|e| InputError::Parse(format!("tail {k}: {e}")))?;
            tail.insert(class, p);
        }
    }
    let series = DefiningSeries::new(model.clone(), tail, order)?;
    let config = RunConfig {
        input_path: path.to_path_buf(),
        order,
        weight_preset: WeightPreset::BlockMinimal,
        subcommand: Subcommand::Normalize,
        output_path: None,
        diagnostics_path: None,
    };
    Ok((model, series, config))
}

pub fn parse_input(path: &Path) -> Result<(ModelSpec, DefiningSeries, RunConfig), InputError> {
    parse_document(&read_document(path)?, path)
}

#[derive(Debug, Error, PartialEq)]
pub enum VerifyError {
    #[error("result was computed for a different model")]
    ModelMismatch,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub witnesses: Vec<String>,
}

impl Check {
    fn new(name: &str, witnesses: Vec<String>) -> Self {
        Check { name: name.to_string(), passed: witnesses.is_empty(), witnesses }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    /// Reported but not part of the verdict.
    pub informational: Vec<Check>,
    pub all_passed: bool,
}

impl VerifyReport {
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("report serializes")
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in self.checks.iter().chain(&self.informational) {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("{tag} {}\n", c.name));
            for w in c.witnesses.iter().take(5) {
                out.push_str(&format!("     {w}\n"));
            }
        }
        out.push_str(if self.all_passed { "verdict: all checks passed\n" } else { "verdict: failures present\n" });
        out
    }
}

/// Lowest class of `Im G - (Re G)^s P(F, F̄)` on the model graph for `id + e`.
pub fn forward_image(model: &ModelSpec, u: &Unknown, order: u32) -> Poly {
    let n = model.n();
    let g = model.grading();
    let term = HoloPoly::term(n, u.monomial.clone(), u.scalar());
    let mut f: Vec<HoloPoly> = (0..n).map(|k| HoloPoly::z(n, k)).collect();
    let mut gg = HoloPoly::w(n);
    match u.component {
        Component::F(k) => f[k].add_assign(&term),
        Component::G => gg.add_assign(&term),
    }
    let map = FormalMap::new(f, gg, order).expect("catalog terms keep the linear part");
    let push = pushforward(&model_defining(model, order), &map, order).expect("model graph is a valid binding");
    let mut bindings = BTreeMap::new();
    for k in 0..n {
        bindings.insert(Var::Z(k), push.z[k].clone());
        bindings.insert(Var::Zb(k), push.z[k].conjugate());
    }
    bindings.insert(Var::X, push.x.clone());
    let lead = model.leading().substitute(&bindings, &g, order).expect("image is a valid binding");
    let e = push.y.sub(&lead);
    match e.min_weight(&g) {
        Some(c) => e.graded_part(&g, c),
        None => e,
    }
}

fn map_outside_catalog(map: &FormalMap, cat: &[Unknown]) -> Vec<String> {
    let (e, eg) = map.perturbation();
    let mut out = Vec::new();
    let comps = e.into_iter().enumerate().map(|(k, p)| (Component::F(k), p)).chain(std::iter::once((Component::G, eg)));
    for (comp, p) in comps {
        for (m, c) in p.terms() {
            let has = |part| cat.iter().any(|u| u.component == comp && &u.monomial == m && u.part == part);
            if (!c.re.is_zero() && !has(Part::Re)) || (!c.im.is_zero() && !has(Part::Im)) {
                let name = match comp {
                    Component::F(k) => format!("F{}", k + 1),
                    Component::G => "G".into(),
                };
                out.push(format!("{name}[{m:?}] = {c} is not an admissible coefficient"));
            }
        }
    }
    out
}

pub fn verify_result(input: &DefiningSeries, result: &NormalFormResult) -> Result<VerifyReport, VerifyError> {
    let model = input.model();
    if result.normal_form.model() != model {
        return Err(VerifyError::ModelMismatch);
    }
    let order = result.normal_form.order();
    let g = model.grading();
    let mut checks = Vec::new();

    let graph = match graph_residual(input, &result.map, &result.normal_form, order) {
        Ok(r) => r.graded_parts(&g).into_iter().map(|(c, p)| format!("class {c}: {p}")).collect(),
        Err(e) => vec![e.to_string()],
    };
    checks.push(Check::new("graph substitution oracle", graph));

    let transform = match transform_defining(input, &result.map, order) {
        Ok(t) if t == result.normal_form => vec![],
        Ok(t) => t
            .tail()
            .keys()
            .chain(result.normal_form.tail().keys())
            .filter(|c| t.class(**c) != result.normal_form.class(**c))
            .map(|c| format!("class {c} differs from the transformed input"))
            .collect(),
        Err(e) => vec![e.to_string()],
    };
    checks.push(Check::new("transform reproduces normal form", transform));

    let reality =
        result.normal_form.tail().iter().filter(|(_, p)| !p.is_real()).map(|(c, _)| format!("class {c}")).collect();
    checks.push(Check::new("reality", reality));

    let cat = catalog(model, order);
    let mut jets = Vec::new();
    if !jet_conditions_check(&result.map, model) {
        jets.push("jet conditions violated".to_string());
    }
    jets.extend(map_outside_catalog(&result.map, &cat));
    checks.push(Check::new("jet conditions and admissibility", jets));

    let mut normal = Vec::new();
    for class in model.k0() + 1..=order {
        let phi = result.normal_form.class(class);
        if phi.is_zero() {
            continue;
        }
        let slice = RealSlice::new(model.n(), &g, class);
        let v = slice.vector(&phi);
        for u in cat.iter().filter(|u| u.class == class) {
            let img = forward_image(model, u, order);
            let pairing = slice.pairing(&v, &slice.vector(&img));
            if !pairing.is_zero() {
                normal.push(format!("class {class}: pairing with {} is {}", u.label(), format_rational(&pairing)));
            }
        }
    }
    checks.push(Check::new("normal space membership", normal));

    let mut informational = Vec::new();
    let literal = match build_basis_family(model, (order / model.k0()).max(2), WeightPreset::BlockMinimal) {
        Ok(fam) => {
            let mut w = Vec::new();
            for (class, p) in result.normal_form.tail() {
                match normalization_residual(p, &fam, KernelMode::Symmetric) {
                    Ok(r) => w.extend(r.certificate.iter().map(|c| format!("class {class}: {}", c.condition))),
                    Err(e) => w.push(format!("class {class}: {e}")),
                }
            }
            w
        }
        Err(e) => vec![e.to_string()],
    };
    informational.push(Check::new("iterated division spaces", literal));

    let all_passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { checks, informational, all_passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalizer::normalize;
    use crate::scalar::ExactScalar;

    fn doc(text: &str) -> Result<(ModelSpec, DefiningSeries, RunConfig), InputError> {
        parse_document(&serde_json::from_str(text).unwrap(), Path::new("in.json"))
    }

    const SPHERE: &str = r#"{"N":1,"s":0,"k0":2,"P":[{"re":"1","im":"0","ez":[1],"ezb":[1],"ex":0}]}"#;

    #[test]
    fn parses_sphere_model() {
        let (model, series, config) = doc(&format!(r#"{{"model":{SPHERE}}}"#)).unwrap();
        assert_eq!(model, ModelSpec::hermitian(1, 0, 2).unwrap());
        assert_eq!(series, model_defining(&model, 6));
        assert_eq!(config.order, 6);
    }

    #[test]
    fn pure_monomial_is_a_validation_error() {
        let text = r#"{"model":{"N":1,"s":0,"k0":2,"P":[{"re":"1","im":"0","ez":[2],"ezb":[0],"ex":0}]}}"#;
        let err = doc(text).unwrap_err();
        assert!(matches!(err, InputError::Validation(_)), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn zero_denominator_is_a_parse_error() {
        let text = r#"{"model":{"N":1,"s":0,"k0":2,"P":[{"re":"1/0","im":"0","ez":[1],"ezb":[1],"ex":0}]}}"#;
        let err = doc(text).unwrap_err();
        assert!(matches!(err, InputError::Parse(_)), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn non_real_tail_is_a_validation_error() {
        let text = format!(r#"{{"model":{SPHERE},"tail":{{"4":[{{"re":"1","im":"0","ez":[2],"ezb":[0],"ex":1}}]}}}}"#);
        assert!(matches!(doc(&text), Err(InputError::Validation(_))));
    }

    #[test]
    fn emitted_documents_parse_back() {
        let model = ModelSpec::hermitian(2, 0, 2).unwrap();
        let m = model_defining(&model, 6);
        let res = normalize(&m, 6).unwrap();
        let mut v = m.to_json();
        v["result"] = res.to_json();
        let (_, series, _) = parse_document(&v, Path::new("x")).unwrap();
        assert_eq!(series, m);
        let mut back = parse_result_field(&v).unwrap().unwrap();
        for d in &mut back.diagnostics {
            d.seconds = 0.0;
        }
        let mut res = res;
        for d in &mut res.diagnostics {
            d.seconds = 0.0;
        }
        assert_eq!(back, res);
    }

    #[test]
    fn model_passes() {
        let model = ModelSpec::hermitian(1, 0, 2).unwrap();
        let m = model_defining(&model, 6);
        let report = verify_result(&m, &normalize(&m, 6).unwrap()).unwrap();
        assert!(report.all_passed, "{}", report.summary());
    }

    #[test]
    fn forward_images_match_catalog() {
        for (model, order) in [(ModelSpec::hermitian(2, 0, 2).unwrap(), 5), (ModelSpec::hermitian(1, 1, 3).unwrap(), 7)] {
            for u in catalog(&model, order) {
                assert_eq!(forward_image(&model, &u, order), u.image, "{}", u.label());
            }
        }
    }

    #[test]
    fn perturbed_tail_is_caught() {
        let model = ModelSpec::hermitian(1, 0, 2).unwrap();
        let zz = Poly::z(1, 0).mul(&Poly::zb(1, 0));
        let phi = zz.mul(&zz).mul(&Poly::x(1)).add(&Poly::mono(1, &[3], &[1], 0, ExactScalar::from_int(1)).add(&Poly::mono(1, &[1], &[3], 0, ExactScalar::from_int(1))));
        let m = DefiningSeries::from_poly(model.clone(), &phi, 6).unwrap();
        let mut res = normalize(&m, 6).unwrap();
        assert!(verify_result(&m, &res).unwrap().all_passed);
        let mut tail = res.normal_form.tail().clone();
        let bump = Poly::mono(1, &[1], &[1], 2, ExactScalar::from_int(1));
        tail.entry(6).or_insert_with(|| Poly::zero(1)).add_assign(&bump);
        res.normal_form = DefiningSeries::new(model, tail, 6).unwrap();
        let report = verify_result(&m, &res).unwrap();
        assert!(!report.all_passed);
        let failed: Vec<&Check> = report.checks.iter().filter(|c| !c.passed).collect();
        assert!(failed.iter().any(|c| c.witnesses.iter().any(|w| w.starts_with("class 6"))));
    }

    #[test]
    fn mismatched_model_rejected() {
        let a = ModelSpec::hermitian(1, 0, 2).unwrap();
        let b = ModelSpec::hermitian(1, 1, 3).unwrap();
        let res = normalize(&model_defining(&b, 5), 5).unwrap();
        assert_eq!(verify_result(&model_defining(&a, 5), &res), Err(VerifyError::ModelMismatch));
    }
}

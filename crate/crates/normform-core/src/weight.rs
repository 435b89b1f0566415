//! Model data and pseudo-weights.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::poly::{Grading, Monomial, Poly, Var};
use crate::scalar::ExactScalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("N must be positive")]
    ZeroDimension,
    #[error("k0 = {k0}, s = {s}: need k0 >= 2 and k0 - s >= 2")]
    BadOrders { k0: u32, s: u32 },
    #[error("P has {got} z variables, expected N = {n}")]
    DimensionMismatch { n: usize, got: usize },
    #[error("P must not depend on x (term {0})")]
    DependsOnX(String),
    #[error("P is not real-valued")]
    NotReal,
    #[error("P must be homogeneous of degree k0 - s = {expected} (term {term} has degree {got})")]
    WrongDegree { expected: u32, got: u32, term: String },
    #[error("monomial {0} of P violates a,b in N^*: both z- and z̄-degree must be positive")]
    PureMonomial(String),
    #[error("P is degenerate: some nonzero matrix a satisfies sum_kl P_{{z_k}} a_kl z_l = 0")]
    Degenerate,
    #[error("P is zero")]
    ZeroP,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WeightError {
    #[error("no feasible maximal beta' for {0} under the literal rule table")]
    InfeasibleWeight(String),
    #[error("{monomial} has weight {weight}, expected {expected}")]
    NotHomogeneous { monomial: String, weight: i64, expected: i64 },
}

/// The model `Im w = (Re w)^s P(z, z̄)`.
#[derive(Clone, PartialEq, Eq)]
pub struct ModelSpec {
    n: usize,
    s: u32,
    k0: u32,
    p: Poly,
}

impl ModelSpec {
    pub fn new(n: usize, s: u32, k0: u32, p: Poly) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::ZeroDimension);
        }
        if k0 < 2 || k0 < s + 2 {
            return Err(ModelError::BadOrders { k0, s });
        }
        if p.n() != n {
            return Err(ModelError::DimensionMismatch { n, got: p.n() });
        }
        if p.is_zero() {
            return Err(ModelError::ZeroP);
        }
        let expected = k0 - s;
        for m in p.monomials() {
            if m.ex() != 0 {
                return Err(ModelError::DependsOnX(format!("{m:?}")));
            }
            if m.degree() != expected {
                return Err(ModelError::WrongDegree { expected, got: m.degree(), term: format!("{m:?}") });
            }
            if m.z_degree() == 0 || m.zb_degree() == 0 {
                return Err(ModelError::PureMonomial(format!("{m:?}")));
            }
        }
        if !p.is_real() {
            return Err(ModelError::NotReal);
        }
        if !check_nondegeneracy(n, &p) {
            return Err(ModelError::Degenerate);
        }
        Ok(ModelSpec { n, s, k0, p })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    pub fn k0(&self) -> u32 {
        self.k0
    }

    pub fn p(&self) -> &Poly {
        &self.p
    }

    /// `x^s P`
    pub fn leading(&self) -> Poly {
        let mut r = self.p.clone();
        for _ in 0..self.s {
            r = r.mul(&Poly::x(self.n));
        }
        r
    }

    /// Additive grading used for classes of defining series and maps:
    /// `x` weighs `k0` when `s = 0` and `1` otherwise.
    pub fn grading(&self) -> Grading {
        if self.s == 0 {
            Grading::with_x(self.k0)
        } else {
            Grading::plain()
        }
    }

    /// `(|z|^2 + ... )` style sphere-type model helper: `P = Σ z_k z̄_k`.
    pub fn hermitian(n: usize, s: u32, k0: u32) -> Result<Self, ModelError> {
        let mut p = Poly::zero(n);
        for k in 0..n {
            p.add_assign(&Poly::z(n, k).mul(&Poly::zb(n, k)));
        }
        ModelSpec::new(n, s, k0, p)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({"N": self.n, "s": self.s, "k0": self.k0, "P": self.p.to_json()})
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, String> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Repr {
            #[serde(rename = "N")]
            n: usize,
            s: u32,
            k0: u32,
            #[serde(rename = "P")]
            p: serde_json::Value,
        }
        let r: Repr = serde_json::from_value(v.clone()).map_err(|e| format!("model: {e}"))?;
        let p = Poly::from_json(&r.p, r.n).map_err(|e| format!("model P: {e}"))?;
        ModelSpec::new(r.n, r.s, r.k0, p).map_err(|e| format!("model: {e}"))
    }
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ModelSpec(N={}, s={}, k0={}, P={:?})", self.n, self.s, self.k0, self.p)
    }
}

/// Injectivity of `a ↦ Σ_{k,l} (∂P/∂z_k) a_kl z_l`, as an exact rank test.
pub fn check_nondegeneracy(n: usize, p: &Poly) -> bool {
    let mut columns = Vec::with_capacity(n * n);
    for k in 0..n {
        let pk = p.derivative_var(Var::Z(k));
        for l in 0..n {
            columns.push(pk.mul(&Poly::z(n, l)));
        }
    }
    let mut rows: BTreeMap<Monomial, Vec<ExactScalar>> = BTreeMap::new();
    for (j, c) in columns.iter().enumerate() {
        for (m, v) in c.terms() {
            rows.entry(m.clone()).or_insert_with(|| vec![ExactScalar::default(); n * n])[j] = v.clone();
        }
    }
    let mat: Vec<Vec<ExactScalar>> = rows.into_values().collect();
    linalg::rank(&mat, n * n) == n * n
}

pub fn check_model_nondegeneracy(model: &ModelSpec) -> bool {
    check_nondegeneracy(model.n(), model.p())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightPreset {
    Literal,
    BlockMinimal,
}

/// One admissible evaluation recorded for audit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RuleEvaluation {
    pub rule: String,
    pub weight: i64,
    pub detail: String,
}

fn model_blocks(model: &ModelSpec) -> Vec<Vec<u32>> {
    model
        .p()
        .monomials()
        .map(|m| m.ez().iter().chain(m.ezb().iter()).map(|&a| a as u32).collect())
        .collect()
}

fn zexps(m: &Monomial) -> Vec<u32> {
    m.ez().iter().chain(m.ezb().iter()).map(|&a| a as u32).collect()
}

/// Pseudo-weight of `m`.
pub fn weight(m: &Monomial, model: &ModelSpec, preset: WeightPreset) -> Result<i64, WeightError> {
    match preset {
        WeightPreset::BlockMinimal => Ok(block_minimal(m, model)),
        WeightPreset::Literal => {
            let evals = literal_evaluations(m, model)?;
            Ok(evals.iter().map(|e| e.weight).min().unwrap_or_else(|| fallback(m, model)))
        }
    }
}

fn fallback(m: &Monomial, model: &ModelSpec) -> i64 {
    (m.z_degree() + m.zb_degree()) as i64 + (model.k0() * m.ex()) as i64
}

/// Feasible extraction counts `t`, ascending.
pub fn extraction_counts(m: &Monomial, model: &ModelSpec) -> Vec<u32> {
    let blocks = model_blocks(model);
    let target = zexps(m);
    let tmax = if model.s() == 0 { u32::MAX } else { m.ex() / model.s() };
    let mut found = std::collections::BTreeSet::new();
    let mut rem = target.clone();
    pack(&blocks, 0, &mut rem, 0, tmax, &mut found);
    found.into_iter().collect()
}

fn pack(blocks: &[Vec<u32>], i: usize, rem: &mut Vec<u32>, t: u32, tmax: u32, found: &mut std::collections::BTreeSet<u32>) {
    found.insert(t);
    if t == tmax {
        return;
    }
    for j in i..blocks.len() {
        let b = &blocks[j];
        if rem.iter().zip(b.iter()).all(|(r, x)| r >= x) {
            for (r, x) in rem.iter_mut().zip(b.iter()) {
                *r -= x;
            }
            pack(blocks, j, rem, t + 1, tmax, found);
            for (r, x) in rem.iter_mut().zip(b.iter()) {
                *r += x;
            }
        }
    }
}

fn block_value(m: &Monomial, model: &ModelSpec, t: u32) -> i64 {
    let (k0, s) = (model.k0() as i64, model.s() as i64);
    let t = t as i64;
    let resid = (m.z_degree() + m.zb_degree()) as i64 - t * (k0 - s);
    k0 * t + k0 * (m.ex() as i64 - s * t) + resid
}

fn block_minimal(m: &Monomial, model: &ModelSpec) -> i64 {
    extraction_counts(m, model).into_iter().map(|t| block_value(m, model, t)).min().expect("t = 0 is feasible")
}

/// Every rule of the literal table whose hypothesis matches `m`, in table order.
pub fn literal_evaluations(m: &Monomial, model: &ModelSpec) -> Result<Vec<RuleEvaluation>, WeightError> {
    let (k0, s) = (model.k0() as i64, model.s() as i64);
    let n = m.ex() as i64;
    let a = m.z_degree() as i64;
    let b = m.zb_degree() as i64;
    let mut out = Vec::new();
    let mut push = |rule: &str, weight: i64, detail: String| out.push(RuleEvaluation { rule: rule.into(), weight, detail });

    if a + b + n == 1 {
        let w = if n == 1 { k0 } else { 1 };
        push("single", w, "single variable".into());
    }
    if n == 0 && a + b > 0 {
        push("x-free", a + b, "x-free".into());
    }
    if a == 0 && b >= 1 {
        push("antiholomorphic", b + n, "z̄^α x^β".into());
    }
    if b == 0 && a >= 1 {
        push("holomorphic", a + n, "z^α x^β".into());
    }
    if (a >= 1 || b >= 1) && a + b < k0 - s {
        push("mixed", n + a + b, "α+β < k0-s".into());
    }
    if a >= 1 && b >= 1 && a + b == k0 - s {
        push("mixed", n - s + a + b, "α+β = k0-s".into());
    }

    let target = zexps(m);
    let nn = model.n();
    for blk in model_blocks(model) {
        let max_beta = (0..2 * nn).filter(|&i| blk[i] > 0).map(|i| target[i] / blk[i]).min().unwrap_or(0);
        for beta in 0..=max_beta as i64 {
            let base = (n - (s - 1) * beta) * k0;
            let rem: Vec<i64> = (0..2 * nn).map(|i| target[i] as i64 - beta * blk[i] as i64).collect();
            let zr: i64 = rem[..nn].iter().sum();
            let zbr: i64 = rem[nn..].iter().sum();
            if zr == 0 && zbr == 0 {
                if base >= 0 {
                    push("block", base, format!("block {blk:?}, beta = {beta}"));
                }
            } else if beta >= 1 && base >= 0 && ((zr > 0 && zbr == 0) || (zr == 0 && zbr > 0)) {
                push("remainder", base + zr + zbr, format!("block {blk:?}, beta = {beta}, c = {}", zr + zbr));
            }
        }
    }

    // Second remainder form, hypothesis a + b = k0.
    let g = target.iter().fold(0u32, |acc, &v| num_integer::gcd(acc, v));
    for beta in 1..=g as i64 {
        if g as i64 % beta != 0 {
            continue;
        }
        let za: i64 = target[..nn].iter().map(|&v| v as i64 / beta).sum();
        let zb: i64 = target[nn..].iter().map(|&v| v as i64 / beta).sum();
        if za == 0 || zb == 0 || za + zb != k0 {
            continue;
        }
        let base = (n - (s - 1) * beta) * k0;
        if base > 0 {
            continue;
        }
        let beta_p = (0..=beta).rev().find(|&bp| (n - (s - 1) * bp) * k0 >= 0);
        match beta_p {
            Some(bp) => {
                log::debug!("second remainder form fired for {m:?} with beta = {beta}, beta' = {bp}");
                push("remainder (a+b=k0)", base + (za + zb) * (beta - bp), format!("beta = {beta}, beta' = {bp}"));
            }
            None => return Err(WeightError::InfeasibleWeight(format!("{m:?}"))),
        }
    }
    Ok(out)
}

/// Audit record for one monomial under both presets.
#[derive(Clone, Debug, Serialize)]
pub struct WeightAudit {
    pub monomial: String,
    pub block_minimal: i64,
    pub extraction_counts: Vec<u32>,
    pub literal: Option<i64>,
    pub literal_error: Option<String>,
    pub literal_evaluations: Vec<RuleEvaluation>,
}

pub fn audit(m: &Monomial, model: &ModelSpec) -> WeightAudit {
    let (literal, literal_error, evals) = match literal_evaluations(m, model) {
        Ok(e) => {
            let w = e.iter().map(|r| r.weight).min().unwrap_or_else(|| fallback(m, model));
            (Some(w), None, e)
        }
        Err(e) => (None, Some(e.to_string()), Vec::new()),
    };
    WeightAudit {
        monomial: format!("{m:?}"),
        block_minimal: block_minimal(m, model),
        extraction_counts: extraction_counts(m, model),
        literal,
        literal_error,
        literal_evaluations: evals,
    }
}

/// Partition of `p` by pseudo-weight.
pub fn weighted_parts(p: &Poly, model: &ModelSpec, preset: WeightPreset) -> Result<BTreeMap<i64, Poly>, WeightError> {
    let mut out: BTreeMap<i64, Poly> = BTreeMap::new();
    for (m, c) in p.terms() {
        let w = weight(m, model, preset)?;
        out.entry(w).or_insert_with(|| Poly::zero(p.n())).add_term(m.clone(), c);
    }
    Ok(out)
}

/// Checks that `x` and every monomial of `x^s P` weigh `k0`.
pub fn validate_model_homogeneity(model: &ModelSpec, preset: WeightPreset) -> Result<u32, WeightError> {
    let k0 = model.k0() as i64;
    let x = Monomial::new(&vec![0; model.n()], &vec![0; model.n()], 1);
    let leading = model.leading();
    for m in std::iter::once(&x).chain(leading.monomials()) {
        let w = weight(m, model, preset)?;
        if w != k0 {
            return Err(WeightError::NotHomogeneous { monomial: format!("{m:?}"), weight: w, expected: k0 });
        }
    }
    Ok(model.k0())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn zz(n: usize) -> Poly {
        let mut p = Poly::zero(n);
        for k in 0..n {
            p.add_assign(&Poly::z(n, k).mul(&Poly::zb(n, k)));
        }
        p
    }

    fn mono(ez: u32, ezb: u32, ex: u32) -> Monomial {
        Monomial::new(&[ez], &[ezb], ex)
    }

    fn m13() -> ModelSpec {
        ModelSpec::new(1, 1, 3, zz(1)).unwrap()
    }

    #[test]
    fn nondegeneracy_examples() {
        assert!(check_nondegeneracy(1, &zz(1)));
        let degenerate = Poly::z(2, 0).mul(&Poly::zb(2, 0));
        assert!(!check_nondegeneracy(2, &degenerate));
        assert!(!check_nondegeneracy(1, &Poly::zero(1)));
        assert!(check_nondegeneracy(2, &zz(2)));
    }

    #[test]
    fn model_invariants() {
        assert!(matches!(ModelSpec::new(1, 0, 2, Poly::z(1, 0).mul(&Poly::z(1, 0))), Err(ModelError::PureMonomial(_))));
        assert!(matches!(ModelSpec::new(1, 0, 3, zz(1)), Err(ModelError::WrongDegree { .. })));
        assert!(matches!(ModelSpec::new(1, 1, 2, zz(1)), Err(ModelError::BadOrders { .. })));
        let not_real = Poly::z(1, 0).mul(&Poly::zb(1, 0)).scale(&ExactScalar::i());
        assert_eq!(ModelSpec::new(1, 0, 2, not_real), Err(ModelError::NotReal));
        assert_eq!(ModelSpec::new(2, 0, 2, Poly::z(2, 0).mul(&Poly::zb(2, 0))), Err(ModelError::Degenerate));
    }

    #[test]
    fn block_minimal_examples() {
        let m = m13();
        let bm = WeightPreset::BlockMinimal;
        assert_eq!(weight(&mono(0, 0, 1), &m, bm).unwrap(), 3);
        assert_eq!(weight(&mono(1, 0, 0), &m, bm).unwrap(), 1);
        assert_eq!(weight(&mono(0, 1, 0), &m, bm).unwrap(), 1);
        assert_eq!(weight(&mono(1, 1, 1), &m, bm).unwrap(), 3);
        assert_eq!(weight(&mono(2, 1, 0), &m, bm).unwrap(), 3);
        assert_eq!(weight(&mono(2, 1, 1), &m, bm).unwrap(), 4);
        assert_eq!(extraction_counts(&mono(2, 1, 1), &m), vec![0, 1]);
    }

    #[test]
    fn weighted_parts_examples() {
        let m = m13();
        let p = Poly::x(1).add(&Poly::z(1, 0));
        let parts = weighted_parts(&p, &m, WeightPreset::BlockMinimal).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[&3], Poly::x(1));
        assert_eq!(parts[&1], Poly::z(1, 0));
        assert!(weighted_parts(&Poly::zero(1), &m, WeightPreset::BlockMinimal).unwrap().is_empty());
        let q = Poly::mono(1, &[1], &[1], 1, ExactScalar::from_int(1)).add(&Poly::mono(1, &[3], &[0], 0, ExactScalar::from_int(1)));
        let parts = weighted_parts(&q, &m, WeightPreset::BlockMinimal).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[&3], q);
    }

    #[test]
    fn homogeneity() {
        assert_eq!(validate_model_homogeneity(&m13(), WeightPreset::BlockMinimal), Ok(3));
        let sphere = ModelSpec::new(1, 0, 2, zz(1)).unwrap();
        assert_eq!(validate_model_homogeneity(&sphere, WeightPreset::BlockMinimal), Ok(2));
        // Literal table: the mixed rule prices x z z̄ at 1 - 1 + 2 = 2, below the block rule's 3.
        assert_eq!(
            validate_model_homogeneity(&m13(), WeightPreset::Literal),
            Err(WeightError::NotHomogeneous { monomial: "z*zb*x".into(), weight: 2, expected: 3 })
        );
        assert_eq!(validate_model_homogeneity(&sphere, WeightPreset::Literal), Ok(2));
    }

    #[test]
    fn literal_table_evaluations() {
        let m = m13();
        let evals = literal_evaluations(&mono(1, 1, 1), &m).unwrap();
        let rules: Vec<(&str, i64)> = evals.iter().map(|e| (e.rule.as_str(), e.weight)).collect();
        assert_eq!(rules, vec![("mixed", 2), ("block", 3)]);
        assert_eq!(weight(&mono(0, 0, 1), &m, WeightPreset::Literal).unwrap(), 3);
        assert_eq!(weight(&mono(2, 0, 1), &m, WeightPreset::Literal).unwrap(), 3);
        // First remainder form: x z² z̄ = block z z̄ with beta = 1 plus c = 1.
        let evals = literal_evaluations(&mono(2, 1, 1), &m).unwrap();
        assert!(evals.iter().any(|e| e.rule == "remainder" && e.weight == 4));
    }

    #[test]
    fn second_remainder_form_fires_only_when_its_hypothesis_holds() {
        // s = 0, k0 = 2: z z̄ has a + b = 2 = k0 but the branch needs (n + beta) k0 <= 0.
        let sphere = ModelSpec::new(1, 0, 2, zz(1)).unwrap();
        let evals = literal_evaluations(&mono(1, 1, 0), &sphere).unwrap();
        assert!(evals.iter().all(|e| e.rule != "remainder (a+b=k0)"));
        // s = 2, k0 = 4, x^0 z² z̄²: a + b = 4 = k0 with beta = 1, base = (0 - 1)·4 < 0.
        let m = ModelSpec::new(1, 2, 4, zz(1)).unwrap();
        let evals = literal_evaluations(&mono(2, 2, 0), &m).unwrap();
        let fired: Vec<_> = evals.iter().filter(|e| e.rule == "remainder (a+b=k0)").collect();
        assert_eq!(fired.len(), 1);
        assert_eq!(fired[0].weight, -4 + 4);
    }

    proptest! {
        #[test]
        fn block_minimal_subadditive(a in (0u32..4, 0u32..4, 0u32..3), b in (0u32..4, 0u32..4, 0u32..3)) {
            for model in [m13(), ModelSpec::new(1, 0, 2, zz(1)).unwrap()] {
                let m1 = mono(a.0, a.1, a.2);
                let m2 = mono(b.0, b.1, b.2);
                let w = |m: &Monomial| weight(m, &model, WeightPreset::BlockMinimal).unwrap();
                prop_assert!(w(&m1.mul(&m2)) <= w(&m1) + w(&m2));
            }
        }

        #[test]
        fn x_free_weight_is_plain_degree(a in 0u32..5, b in 0u32..5, c in 0u32..4, d in 0u32..4) {
            let m = Monomial::new(&[a, c], &[b, d], 0);
            for model in [ModelSpec::hermitian(2, 1, 3).unwrap(), ModelSpec::hermitian(2, 0, 2).unwrap()] {
                prop_assert_eq!(weight(&m, &model, WeightPreset::BlockMinimal).unwrap(), (a + b + c + d) as i64);
            }
        }

        #[test]
        fn sphere_block_minimal_is_additive(a in 0u32..5, b in 0u32..5, e in 0u32..4) {
            let model = ModelSpec::new(1, 0, 2, zz(1)).unwrap();
            let m = mono(a, b, e);
            prop_assert_eq!(weight(&m, &model, WeightPreset::BlockMinimal).unwrap(), m.weight(&model.grading()) as i64);
        }
    }
}

//! Defining series, formal maps and the pushforward of a defining equation.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde_json::{json, Value};
use thiserror::Error;

use crate::poly::{Evaluator, Grading, HoloMonomial, HoloPoly, Monomial, Poly, PolyError, Var};
use crate::scalar::ExactScalar;
use crate::weight::{ModelError, ModelSpec};

#[derive(Debug, Error, PartialEq)]
pub enum HypersurfaceError {
    #[error("tail class {class} is not real-valued")]
    NotReal { class: u32 },
    #[error("tail class {class} contains {monomial} of weight {weight}")]
    NotHomogeneous { class: u32, monomial: String, weight: u32 },
    #[error("tail class {class} lies outside {min}..={max}")]
    ClassOutOfRange { class: u32, min: u32, max: u32 },
    #[error("expected {expected} complex variables, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("order {requested} exceeds available truncation {available}")]
    OrderOverflow { requested: u32, available: u32 },
    #[error("map does not preserve the model: class {class} of the image is {witness}")]
    NotModelPreserving { class: u32, witness: String },
    #[error("map is not of the form (z + O(2), w + O(2)): {0}")]
    NotIdentityLinear(String),
    #[error("map component {component} has a term {term} that does not raise the weight")]
    NotWeightIncreasing { component: String, term: String },
    #[error("series inversion did not stabilise within {0} steps")]
    InversionStalled(u32),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("malformed JSON: {0}")]
    Json(String),
}

/// `Im w = (Re w)^s P(z, z̄) + Σ_k φ_k(z, z̄, Re w)` through weight `order`.
#[derive(Clone, Debug, PartialEq)]
pub struct DefiningSeries {
    model: ModelSpec,
    tail: BTreeMap<u32, Poly>,
    order: u32,
}

impl DefiningSeries {
    pub fn new(model: ModelSpec, tail: BTreeMap<u32, Poly>, order: u32) -> Result<Self, HypersurfaceError> {
        let g = model.grading();
        let min = model.k0() + 1;
        let mut clean = BTreeMap::new();
        for (class, p) in tail {
            if p.n() != model.n() {
                return Err(HypersurfaceError::DimensionMismatch { expected: model.n(), found: p.n() });
            }
            if p.is_zero() {
                continue;
            }
            if class < min || class > order {
                return Err(HypersurfaceError::ClassOutOfRange { class, min, max: order });
            }
            if !p.is_real() {
                return Err(HypersurfaceError::NotReal { class });
            }
            if let Some(m) = p.monomials().find(|m| m.weight(&g) != class) {
                return Err(HypersurfaceError::NotHomogeneous {
                    class,
                    monomial: format!("{m:?}"),
                    weight: m.weight(&g),
                });
            }
            clean.insert(class, p);
        }
        Ok(DefiningSeries { model, tail: clean, order })
    }

    /// Splits a real polynomial into tail classes.
    pub fn from_poly(model: ModelSpec, phi: &Poly, order: u32) -> Result<Self, HypersurfaceError> {
        let tail = phi.graded_parts(&model.grading());
        DefiningSeries::new(model, tail, order)
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn tail(&self) -> &BTreeMap<u32, Poly> {
        &self.tail
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn grading(&self) -> Grading {
        self.model.grading()
    }

    pub fn class(&self, c: u32) -> Poly {
        self.tail.get(&c).cloned().unwrap_or_else(|| Poly::zero(self.model.n()))
    }

    pub fn tail_sum(&self) -> Poly {
        let mut acc = Poly::zero(self.model.n());
        for p in self.tail.values() {
            acc.add_assign(p);
        }
        acc
    }

    /// `x^s P + Σ φ_k`
    pub fn u(&self) -> Poly {
        self.model.leading().add(&self.tail_sum())
    }

    pub fn truncated(&self, order: u32) -> DefiningSeries {
        DefiningSeries {
            model: self.model.clone(),
            tail: self.tail.range(..=order).map(|(k, v)| (*k, v.clone())).collect(),
            order: order.min(self.order),
        }
    }

    pub fn to_json(&self) -> Value {
        let tail: serde_json::Map<String, Value> =
            self.tail.iter().map(|(k, p)| (k.to_string(), p.to_json())).collect();
        json!({ "model": self.model.to_json(), "tail": tail, "order": self.order })
    }

    pub fn from_json(v: &Value) -> Result<Self, HypersurfaceError> {
        let model = ModelSpec::from_json(v.get("model").ok_or_else(|| bad("missing model"))?).map_err(bad)?;
        let order = v
            .get("order")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("missing or non-integer order"))? as u32;
        let mut tail = BTreeMap::new();
        if let Some(t) = v.get("tail") {
            let t = t.as_object().ok_or_else(|| bad("tail must be an object"))?;
            for (k, p) in t {
                let class: u32 = k.parse().map_err(|_| bad(format!("bad tail key {k:?}")))?;
                tail.insert(class, Poly::from_json(p, model.n()).map_err(bad)?);
            }
        }
        DefiningSeries::new(model, tail, order)
    }
}

fn bad(e: impl ToString) -> HypersurfaceError {
    HypersurfaceError::Json(e.to_string())
}

/// The model itself, through weight `order`.
pub fn model_defining(model: &ModelSpec, order: u32) -> DefiningSeries {
    DefiningSeries { model: model.clone(), tail: BTreeMap::new(), order }
}

/// `(z, w) ↦ (F(z, w), G(z, w))` with identity linear part.
#[derive(Clone, Debug, PartialEq)]
pub struct FormalMap {
    f: Vec<HoloPoly>,
    g: HoloPoly,
    order: u32,
}

impl FormalMap {
    pub fn new(f: Vec<HoloPoly>, g: HoloPoly, order: u32) -> Result<Self, HypersurfaceError> {
        let n = f.len();
        if n == 0 {
            return Err(HypersurfaceError::DimensionMismatch { expected: 1, found: 0 });
        }
        for c in f.iter().chain(std::iter::once(&g)) {
            if c.n() != n {
                return Err(HypersurfaceError::DimensionMismatch { expected: n, found: c.n() });
            }
        }
        let one = ExactScalar::from_int(1);
        let zero_z = vec![0u32; n];
        for (l, fl) in f.iter().enumerate() {
            if !fl.constant_term().is_zero() {
                return Err(HypersurfaceError::NotIdentityLinear(format!("F_{} has a constant term", l + 1)));
            }
            for k in 0..n {
                let mut e = zero_z.clone();
                e[k] = 1;
                let want = if k == l { one.clone() } else { ExactScalar::from_int(0) };
                if fl.coeff(&HoloMonomial::new(&e, 0)) != want {
                    return Err(HypersurfaceError::NotIdentityLinear(format!(
                        "coefficient of z_{} in F_{} must be {}",
                        k + 1,
                        l + 1,
                        want
                    )));
                }
            }
        }
        if !g.constant_term().is_zero() {
            return Err(HypersurfaceError::NotIdentityLinear("G has a constant term".into()));
        }
        if g.coeff(&HoloMonomial::new(&zero_z, 1)) != one {
            return Err(HypersurfaceError::NotIdentityLinear("coefficient of w in G must be 1".into()));
        }
        if let Some(m) = g.monomials().find(|m| m.ew() == 0 && m.z_degree() == 1) {
            return Err(HypersurfaceError::NotIdentityLinear(format!("G has the linear term {m:?}")));
        }
        Ok(FormalMap { f, g, order })
    }

    pub fn identity(n: usize, order: u32) -> FormalMap {
        FormalMap { f: (0..n).map(|k| HoloPoly::z(n, k)).collect(), g: HoloPoly::w(n), order }
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn f(&self) -> &[HoloPoly] {
        &self.f
    }

    pub fn g(&self) -> &HoloPoly {
        &self.g
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn is_identity(&self) -> bool {
        let id = FormalMap::identity(self.n(), self.order);
        self.f == id.f && self.g == id.g
    }

    /// `F - z` and `G - w`.
    pub fn perturbation(&self) -> (Vec<HoloPoly>, HoloPoly) {
        let n = self.n();
        let e = self.f.iter().enumerate().map(|(k, fk)| fk.sub(&HoloPoly::z(n, k))).collect();
        (e, self.g.sub(&HoloPoly::w(n)))
    }

    /// Every perturbation term of `F` has weight at least 2 and of `G` at least `wt(w) + 1`.
    pub fn check_weight_increasing(&self, grading: &Grading) -> Result<(), HypersurfaceError> {
        let (e, eg) = self.perturbation();
        for (k, ek) in e.iter().enumerate() {
            if let Some(m) = ek.monomials().find(|m| m.weight(grading) < 2) {
                return Err(HypersurfaceError::NotWeightIncreasing {
                    component: format!("F_{}", k + 1),
                    term: format!("{m:?}"),
                });
            }
        }
        if let Some(m) = eg.monomials().find(|m| m.weight(grading) <= grading.x) {
            return Err(HypersurfaceError::NotWeightIncreasing { component: "G".into(), term: format!("{m:?}") });
        }
        Ok(())
    }

    pub fn truncated(&self, grading: &Grading, order: u32) -> FormalMap {
        FormalMap {
            f: self.f.iter().map(|p| p.truncate(grading, order)).collect(),
            g: self.g.truncate(grading, order),
            order: order.min(self.order),
        }
    }

    /// `self ∘ inner`, truncated at weight `max`.
    pub fn compose(&self, inner: &FormalMap, grading: &Grading, max: u32) -> Result<FormalMap, HypersurfaceError> {
        let mut bindings = inner.f.clone();
        bindings.push(inner.g.clone());
        let mut ev = Evaluator::new(bindings, *grading, max)?;
        let f = self.f.iter().map(|p| ev.eval(p)).collect();
        let g = ev.eval(&self.g);
        FormalMap::new(f, g, max.min(self.order).min(inner.order))
    }

    /// Compositional inverse through weight `max`.
    pub fn inverse(&self, grading: &Grading, max: u32) -> Result<FormalMap, HypersurfaceError> {
        self.check_weight_increasing(grading)?;
        let n = self.n();
        let (e, eg) = self.perturbation();
        let mut k = FormalMap::identity(n, max);
        let limit = max + 2;
        for _ in 0..limit {
            let mut bindings = k.f.clone();
            bindings.push(k.g.clone());
            let mut ev = Evaluator::new(bindings, *grading, max)?;
            let f: Vec<HoloPoly> = e.iter().enumerate().map(|(j, ej)| HoloPoly::z(n, j).sub(&ev.eval(ej))).collect();
            let g = HoloPoly::w(n).sub(&ev.eval(&eg));
            let next = FormalMap { f, g, order: max };
            if next == k {
                return FormalMap::new(next.f, next.g, max.min(self.order));
            }
            k = next;
        }
        Err(HypersurfaceError::InversionStalled(limit))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "F": self.f.iter().map(HoloPoly::to_json).collect::<Vec<_>>(),
            "G": self.g.to_json(),
            "order": self.order,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self, HypersurfaceError> {
        let fs = v.get("F").and_then(Value::as_array).ok_or_else(|| bad("F must be an array"))?;
        let n = fs.len();
        let f = fs.iter().map(|p| HoloPoly::from_json(p, n).map_err(bad)).collect::<Result<Vec<_>, _>>()?;
        let g = HoloPoly::from_json(v.get("G").ok_or_else(|| bad("missing G"))?, n).map_err(bad)?;
        let order = v
            .get("order")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("missing or non-integer order"))? as u32;
        FormalMap::new(f, g, order)
    }
}

/// `Re(k0! · [w^k0] G(0, w)) = 0` and `Im([w] F_l(0, w)) = 0` for every `l`.
pub fn jet_conditions_check(map: &FormalMap, model: &ModelSpec) -> bool {
    let k0 = model.k0();
    let fact: i64 = (1..=k0 as i64).product();
    let gk = map.g.w_axis_coeff(k0).scale(&crate::scalar::int(fact));
    gk.re == crate::scalar::int(0) && map.f.iter().all(|fl| fl.w_axis_coeff(1).is_real())
}

/// The graph `w = x + i u` of `series`, with its image under `map`.
pub struct Pushforward {
    /// `F_k(z, x + i u)`
    pub z: Vec<Poly>,
    /// `Re G(z, x + i u)`
    pub x: Poly,
    /// `Im G(z, x + i u)`
    pub y: Poly,
}

pub fn pushforward(series: &DefiningSeries, map: &FormalMap, order: u32) -> Result<Pushforward, HypersurfaceError> {
    let n = series.model().n();
    let g = series.grading();
    let w = Poly::x(n).add(&series.u().truncate(&g, order).scale(&ExactScalar::i()));
    let zs: Vec<Poly> = (0..n).map(|k| Poly::z(n, k)).collect();
    let mut ev = {
        let mut b = zs;
        b.push(w);
        Evaluator::new(b, g, order)?
    };
    let z: Vec<Poly> = map.f.iter().map(|fk| ev.eval(fk)).collect();
    let gv = ev.eval(&map.g);
    Ok(Pushforward { z, x: gv.re_part(), y: gv.im_part() })
}

/// Evaluator of `(z, z̄, x) ↦ (Z, Z̄, X)` truncated at `order`.
pub fn image_evaluator(push: &Pushforward, g: Grading, order: u32) -> Result<Evaluator<Monomial>, PolyError> {
    let mut b: Vec<Poly> = push.z.clone();
    b.extend(push.z.iter().map(Poly::conjugate));
    b.push(push.x.clone());
    Evaluator::new(b, g, order)
}

/// Defining series of the image of `series` under `map`, solved class by class.
pub fn transform_defining(series: &DefiningSeries, map: &FormalMap, order: u32) -> Result<DefiningSeries, HypersurfaceError> {
    let model = series.model();
    if map.n() != model.n() {
        return Err(HypersurfaceError::DimensionMismatch { expected: model.n(), found: map.n() });
    }
    let available = series.order().min(map.order());
    if order > available {
        return Err(HypersurfaceError::OrderOverflow { requested: order, available });
    }
    let g = model.grading();
    map.check_weight_increasing(&g)?;
    let push = pushforward(series, map, order)?;
    let mut ev = image_evaluator(&push, g, order)?;
    let mut rest = push.y.sub(&ev.eval(&model.leading()));
    let mut tail = BTreeMap::new();
    let parts = rest.graded_parts(&g);
    if let Some((class, p)) = parts.iter().find(|(c, p)| **c <= model.k0() && !p.is_zero()) {
        return Err(HypersurfaceError::NotModelPreserving { class: *class, witness: p.to_string() });
    }
    for class in model.k0() + 1..=order {
        let phi = rest.graded_part(&g, class);
        if phi.is_zero() {
            continue;
        }
        rest.sub_assign(&ev.eval(&phi));
        tail.insert(class, phi);
    }
    DefiningSeries::new(model.clone(), tail, order)
}

/// `Im G - (Re G)^s P(F, F̄) - Σ φ'(F, F̄, Re G)` on the graph of `source`, through `order`.
pub fn graph_residual(
    source: &DefiningSeries,
    map: &FormalMap,
    image: &DefiningSeries,
    order: u32,
) -> Result<Poly, HypersurfaceError> {
    let n = source.model().n();
    let g = source.grading();
    let push = pushforward(source, map, order)?;
    let mut bindings = BTreeMap::new();
    for k in 0..n {
        bindings.insert(Var::Z(k), push.z[k].clone());
        bindings.insert(Var::Zb(k), push.z[k].conjugate());
    }
    bindings.insert(Var::X, push.x.clone());
    let rhs = image.u().truncate(&g, order).substitute(&bindings, &g, order)?;
    Ok(push.y.sub(&rhs).truncate(&g, order))
}

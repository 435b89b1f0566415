//! Degree-by-degree normalization of a defining series.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use num_traits::Zero;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::hypersurface::{jet_conditions_check, transform_defining, DefiningSeries, FormalMap, HypersurfaceError};
use crate::linalg::{self, SolveError};
use crate::poly::{holo_monomials_of_weight, monomials_of_weight, Grading, HoloMonomial, HoloPoly, Monomial, Poly, Var};
use crate::scalar::{format_rational, int, ExactScalar, Rational};
use crate::weight::ModelSpec;

#[derive(Debug, Error, PartialEq)]
pub enum NormalizeError {
    #[error("class {class}: the system is rank deficient; kernel witness {kernel:?}")]
    NonUniqueSolution { class: u32, kernel: Vec<(String, String)> },
    #[error("class {class}: the system is inconsistent; cokernel witness {cokernel:?}")]
    Inconsistent { class: u32, cokernel: Vec<String> },
    #[error("order {order} is below the first tail class {min}")]
    OrderTooLow { order: u32, min: u32 },
    #[error("class {class} changed after it was fixed")]
    Triangularity { class: u32 },
    #[error(transparent)]
    Hypersurface(#[from] HypersurfaceError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Component {
    F(usize),
    G,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Part {
    Re,
    Im,
}

/// One real coefficient of the map: `Re` or `Im` of `[z^α w^n]` in a component.
#[derive(Clone, Debug, PartialEq)]
pub struct Unknown {
    pub component: Component,
    pub monomial: HoloMonomial,
    pub part: Part,
    /// Lowest weight class of the linearized image.
    pub class: u32,
    /// Linearized image restricted to `class`.
    pub image: Poly,
}

impl Unknown {
    pub fn scalar(&self) -> ExactScalar {
        match self.part {
            Part::Re => ExactScalar::from_int(1),
            Part::Im => ExactScalar::i(),
        }
    }

    pub fn label(&self) -> String {
        let comp = match self.component {
            Component::F(k) => format!("F{}", k + 1),
            Component::G => "G".to_string(),
        };
        format!("{:?} {}[{:?}]", self.part, comp, self.monomial)
    }
}

impl fmt::Display for Unknown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// `x + i x^s P`
pub fn model_w(model: &ModelSpec) -> Poly {
    Poly::x(model.n()).add(&model.leading().scale(&ExactScalar::i()))
}

fn holo_to_real(model: &ModelSpec, q: &HoloPoly, g: &Grading, order: u32) -> Poly {
    let n = model.n();
    let zs: Vec<Poly> = (0..n).map(|k| Poly::z(n, k)).collect();
    q.substitute_real(&zs, &model_w(model), g, order).expect("model graph is a valid binding")
}

/// Linearized image at the model of adding `c z^α w^n` to a component.
pub fn linear_image(model: &ModelSpec, component: Component, q: &HoloPoly, order: u32) -> Poly {
    let n = model.n();
    let g = model.grading();
    let s = model.s();
    let qr = holo_to_real(model, q, &g, order);
    match component {
        Component::G => {
            let mut out = qr.im_part();
            if s > 0 {
                let xs1 = Poly::mono(n, &vec![0; n], &vec![0; n], s - 1, ExactScalar::from_int(s as i64));
                out.sub_assign(&xs1.mul(model.p()).mul_trunc(&qr.re_part(), &g, order));
            }
            out.truncate(&g, order)
        }
        Component::F(k) => {
            let xs = Poly::mono(n, &vec![0; n], &vec![0; n], s, ExactScalar::from_int(2));
            let pz = model.p().derivative_var(Var::Z(k));
            xs.mul(&pz).mul_trunc(&qr, &g, order).re_part().neg()
        }
    }
}

/// Every admissible real unknown whose linearized image starts at a class in `k0+1..=order`.
pub fn catalog(model: &ModelSpec, order: u32) -> Vec<Unknown> {
    let n = model.n();
    let g = model.grading();
    let k0 = model.k0();
    let mut out = Vec::new();
    let mut push = |component: Component, m: HoloMonomial, part: Part| {
        let u = Unknown { component, monomial: m.clone(), part, class: 0, image: Poly::zero(n) };
        let q = HoloPoly::term(n, m, u.scalar());
        let full = linear_image(model, component, &q, order);
        let Some(class) = full.min_weight(&g) else { return };
        if class <= k0 || class > order {
            return;
        }
        out.push(Unknown { image: full.graded_part(&g, class), class, ..u });
    };
    for w in 0..=order {
        for m in holo_monomials_of_weight(n, &g, w) {
            if m.degree() < 2 {
                continue;
            }
            for part in [Part::Re, Part::Im] {
                if m.z_degree() == 0 && m.ew() == k0 && part == Part::Re {
                    continue;
                }
                push(Component::G, m.clone(), part);
            }
        }
    }
    for w in 0..=order.saturating_sub(k0 - 1) {
        for m in holo_monomials_of_weight(n, &g, w) {
            if m.degree() < 2 || (model.s() > 0 && m.z_degree() < 2) {
                continue;
            }
            for k in 0..n {
                for part in [Part::Re, Part::Im] {
                    push(Component::F(k), m.clone(), part);
                }
            }
        }
    }
    out.sort_by(|a, b| (a.class, a.component, &a.monomial, a.part).cmp(&(b.class, b.component, &b.monomial, b.part)));
    out
}

/// Real coordinates of the real polynomials of one weight class.
///
/// Self-conjugate monomials carry one coordinate, conjugate pairs carry `Re` and `Im`
/// of the smaller monomial. The Fischer pairing is the weighted dot product.
pub struct RealSlice {
    coords: Vec<(Monomial, Part)>,
    index: BTreeMap<(Monomial, Part), usize>,
    weights: Vec<Rational>,
}

impl RealSlice {
    pub fn new(n: usize, g: &Grading, class: u32) -> Self {
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for m in monomials_of_weight(n, g, class) {
            let mc = m.conj();
            if m == mc {
                weights.push(m.factorial_norm());
                coords.push((m, Part::Re));
            } else if m < mc {
                let w = m.factorial_norm() * int(2);
                weights.push(w.clone());
                weights.push(w);
                coords.push((m.clone(), Part::Re));
                coords.push((m, Part::Im));
            }
        }
        let index = coords.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
        RealSlice { coords, index, weights }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn vector(&self, p: &Poly) -> Vec<Rational> {
        let mut v = vec![Rational::zero(); self.dim()];
        for (m, c) in p.terms() {
            if let Some(&i) = self.index.get(&(m.clone(), Part::Re)) {
                v[i] = c.re.clone();
                if let Some(&j) = self.index.get(&(m.clone(), Part::Im)) {
                    v[j] = c.im.clone();
                }
            }
        }
        v
    }

    /// Inverse of [`RealSlice::vector`].
    pub fn poly(&self, n: usize, v: &[Rational]) -> Poly {
        let mut out = Poly::zero(n);
        for ((m, part), c) in self.coords.iter().zip(v) {
            if c.is_zero() {
                continue;
            }
            let mc = m.conj();
            let (a, b) = match part {
                Part::Re => (ExactScalar::real(c.clone()), ExactScalar::real(c.clone())),
                Part::Im => (ExactScalar::new(Rational::zero(), c.clone()), ExactScalar::new(Rational::zero(), -c.clone())),
            };
            out.add_term(m.clone(), &a);
            if mc != *m {
                out.add_term(mc, &b);
            }
        }
        out
    }

    pub fn pairing(&self, a: &[Rational], b: &[Rational]) -> Rational {
        a.iter().zip(b).zip(&self.weights).fold(Rational::zero(), |acc, ((x, y), w)| acc + x * y * w)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassDiagnostics {
    pub class: u32,
    pub unknowns: usize,
    pub equations: usize,
    pub rank: usize,
    pub normal_space_dim: usize,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct NormalizationState {
    pub model: ModelSpec,
    pub input: DefiningSeries,
    pub current_map: FormalMap,
    pub current_tail: DefiningSeries,
    /// Active weight class.
    pub t: u32,
    pub order: u32,
    pub diagnostics: Vec<ClassDiagnostics>,
    catalog: Vec<Unknown>,
}

impl NormalizationState {
    pub fn new(input: &DefiningSeries, order: u32) -> Result<Self, NormalizeError> {
        let model = input.model().clone();
        let min = model.k0() + 1;
        if order < min {
            return Err(NormalizeError::OrderTooLow { order, min });
        }
        if order > input.order() {
            return Err(HypersurfaceError::OrderOverflow { requested: order, available: input.order() }.into());
        }
        Ok(NormalizationState {
            current_map: FormalMap::identity(model.n(), order),
            current_tail: DefiningSeries::new(model.clone(), BTreeMap::new(), order)?,
            t: min,
            order,
            diagnostics: Vec::new(),
            catalog: catalog(&model, order),
            input: input.clone(),
            model,
        })
    }

    pub fn catalog(&self) -> &[Unknown] {
        &self.catalog
    }

    pub fn is_done(&self) -> bool {
        self.t > self.order
    }
}

/// Space `N_T` of normalized class-`T` tails: the Fischer-orthogonal complement of the
/// linearized images of the unknowns of natural class `T`.
pub struct ClassSystem<'a> {
    pub class: u32,
    pub slice: RealSlice,
    pub unknowns: Vec<&'a Unknown>,
    pub columns: Vec<Vec<Rational>>,
}

impl<'a> ClassSystem<'a> {
    pub fn new(model: &ModelSpec, catalog: &'a [Unknown], class: u32) -> Self {
        let slice = RealSlice::new(model.n(), &model.grading(), class);
        let unknowns: Vec<&Unknown> = catalog.iter().filter(|u| u.class == class).collect();
        let columns = unknowns.iter().map(|u| slice.vector(&u.image)).collect();
        ClassSystem { class, slice, unknowns, columns }
    }

    fn matrix(&self) -> Vec<Vec<Rational>> {
        (0..self.slice.dim()).map(|r| self.columns.iter().map(|c| c[r].clone()).collect()).collect()
    }

    pub fn rank(&self) -> usize {
        linalg::rank(&self.matrix(), self.columns.len())
    }

    pub fn kernel_witness(&self) -> Option<Vec<(String, String)>> {
        let k = linalg::nullspace(&self.matrix(), self.columns.len()).into_iter().next()?;
        Some(
            self.unknowns
                .iter()
                .zip(k)
                .filter(|(_, v)| !v.is_zero())
                .map(|(u, v)| (u.label(), format_rational(&v)))
                .collect(),
        )
    }

    /// Basis of `N_T`.
    pub fn normal_space(&self, n: usize) -> Vec<Poly> {
        let rows: Vec<Vec<Rational>> = self
            .columns
            .iter()
            .map(|c| c.iter().zip(&self.slice.weights).map(|(a, w)| a * w).collect())
            .collect();
        linalg::nullspace(&rows, self.slice.dim()).iter().map(|v| self.slice.poly(n, v)).collect()
    }

    /// Pairings of `p` with every column; zero iff `p ∈ N_T`.
    pub fn obstructions(&self, p: &Poly) -> Vec<Rational> {
        let v = self.slice.vector(p);
        self.columns.iter().map(|c| self.slice.pairing(&v, c)).collect()
    }

    /// `δ` with `r + Σ δ_i image_i ∈ N_T`.
    pub fn solve(&self, r: &Poly) -> Result<Vec<Rational>, NormalizeError> {
        let m = self.columns.len();
        let gram: Vec<Vec<Rational>> = (0..m)
            .map(|i| (0..m).map(|j| self.slice.pairing(&self.columns[i], &self.columns[j])).collect())
            .collect();
        let rhs: Vec<Rational> = self.obstructions(r).into_iter().map(|v| -v).collect();
        linalg::solve_unique(&gram, &rhs, m).map_err(|e| match e {
            SolveError::NonUnique { .. } => NormalizeError::NonUniqueSolution {
                class: self.class,
                kernel: self.kernel_witness().unwrap_or_default(),
            },
            SolveError::Inconsistent { cokernel } => NormalizeError::Inconsistent {
                class: self.class,
                cokernel: cokernel.iter().map(format_rational).collect(),
            },
        })
    }
}

fn add_unknown(map: &FormalMap, u: &Unknown, value: &Rational) -> Result<FormalMap, HypersurfaceError> {
    let n = map.n();
    let term = HoloPoly::term(n, u.monomial.clone(), u.scalar().scale(value));
    let mut f = map.f().to_vec();
    let mut g = map.g().clone();
    match u.component {
        Component::F(k) => f[k].add_assign(&term),
        Component::G => g.add_assign(&term),
    }
    FormalMap::new(f, g, map.order())
}

/// Fixes the map at the active class and the resulting tail class.
pub fn solve_degree(mut state: NormalizationState) -> Result<NormalizationState, NormalizeError> {
    let start = Instant::now();
    let t = state.t;
    let current = transform_defining(&state.input, &state.current_map, t)?;
    for (c, p) in current.tail().range(..t) {
        if *p != state.current_tail.class(*c) {
            return Err(NormalizeError::Triangularity { class: *c });
        }
    }
    let r = current.class(t);
    let system = ClassSystem::new(&state.model, &state.catalog, t);
    let rank = system.rank();
    if rank < system.unknowns.len() {
        return Err(NormalizeError::NonUniqueSolution { class: t, kernel: system.kernel_witness().unwrap_or_default() });
    }
    let delta = system.solve(&r)?;
    let mut phi = r;
    let mut map = state.current_map.clone();
    for (u, d) in system.unknowns.iter().zip(&delta) {
        if d.is_zero() {
            continue;
        }
        map = add_unknown(&map, u, d)?;
        phi.add_assign(&u.image.scale_rational(d));
    }
    let mut tail = state.current_tail.tail().clone();
    tail.insert(t, phi);
    state.current_tail = DefiningSeries::new(state.model.clone(), tail, state.order)?;
    state.current_map = map;
    state.diagnostics.push(ClassDiagnostics {
        class: t,
        unknowns: system.unknowns.len(),
        equations: system.slice.dim(),
        rank,
        normal_space_dim: system.slice.dim() - rank,
        seconds: start.elapsed().as_secs_f64(),
    });
    state.t += 1;
    Ok(state)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalFormResult {
    pub normal_form: DefiningSeries,
    pub map: FormalMap,
    pub diagnostics: Vec<ClassDiagnostics>,
}

impl NormalFormResult {
    pub fn to_json(&self) -> Value {
        json!({
            "normal_form": self.normal_form.to_json(),
            "map": self.map.to_json(),
            "diagnostics": serde_json::to_value(&self.diagnostics).expect("diagnostics serialize"),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self, HypersurfaceError> {
        let bad = |e: &str| HypersurfaceError::Json(e.to_string());
        let normal_form = DefiningSeries::from_json(v.get("normal_form").ok_or_else(|| bad("missing normal_form"))?)?;
        let map = FormalMap::from_json(v.get("map").ok_or_else(|| bad("missing map"))?)?;
        let mut diagnostics = Vec::new();
        if let Some(ds) = v.get("diagnostics").and_then(Value::as_array) {
            for d in ds {
                let get = |k: &str| d.get(k).and_then(Value::as_u64).ok_or_else(|| bad(k));
                diagnostics.push(ClassDiagnostics {
                    class: get("class")? as u32,
                    unknowns: get("unknowns")? as usize,
                    equations: get("equations")? as usize,
                    rank: get("rank")? as usize,
                    normal_space_dim: get("normal_space_dim")? as usize,
                    seconds: 0.0,
                });
            }
        }
        Ok(NormalFormResult { normal_form, map, diagnostics })
    }

    /// Diagnostics including wall-clock time per class.
    pub fn timing_json(&self) -> Value {
        Value::Array(
            self.diagnostics
                .iter()
                .map(|d| {
                    let mut v = serde_json::to_value(d).expect("diagnostics serialize");
                    v["seconds"] = json!(d.seconds);
                    v
                })
                .collect(),
        )
    }
}

/// Normal form through `order` and the unique normalizing map.
pub fn normalize(input: &DefiningSeries, order: u32) -> Result<NormalFormResult, NormalizeError> {
    let mut state = NormalizationState::new(input, order)?;
    while !state.is_done() {
        state = solve_degree(state)?;
        log::debug!("class {} fixed", state.t - 1);
    }
    let normal_form = transform_defining(input, &state.current_map, order)?;
    if normal_form != state.current_tail {
        let class = normal_form
            .tail()
            .keys()
            .chain(state.current_tail.tail().keys())
            .copied()
            .find(|c| normal_form.class(*c) != state.current_tail.class(*c))
            .unwrap_or(order);
        return Err(NormalizeError::Triangularity { class });
    }
    debug_assert!(jet_conditions_check(&state.current_map, input.model()));
    Ok(NormalFormResult { normal_form, map: state.current_map, diagnostics: state.diagnostics })
}

/// Comparison of one `F` unknown's mechanical image with the two closed reduced forms.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReducedFormRecord {
    pub unknown: String,
    pub mechanical_class: u32,
    /// `-W·(P(f, z) + conj)` with `W = x + i x^s P`.
    pub p_form_class: Option<u32>,
    pub p_form_agrees: bool,
    /// `-W·(⟨f, z⟩ + conj)`.
    pub bracket_form_class: Option<u32>,
    pub bracket_form_agrees: bool,
}

/// Lowest classes of the `F` contributions under the mechanical and the two closed readings.
pub fn reduced_form_discrepancy(model: &ModelSpec, order: u32) -> Vec<ReducedFormRecord> {
    let n = model.n();
    let g = model.grading();
    let w = model_w(model);
    let lowest = |p: &Poly| p.min_weight(&g).map(|c| (c, p.graded_part(&g, c)));
    let mut out = Vec::new();
    for u in catalog(model, order) {
        let Component::F(k) = u.component else { continue };
        let q = holo_to_real(model, &HoloPoly::term(n, u.monomial.clone(), u.scalar()), &g, order);
        let mut bindings = BTreeMap::new();
        for j in 0..n {
            bindings.insert(Var::Z(j), if j == k { q.clone() } else { Poly::zero(n) });
        }
        let pf = model.p().substitute(&bindings, &g, order).expect("holomorphic binding");
        let p_form = w.mul_trunc(&pf.add(&pf.conjugate()), &g, order).neg();
        let bracket = q.mul(&Poly::zb(n, k));
        let b_form = w.mul_trunc(&bracket.add(&bracket.conjugate()), &g, order).neg();
        let (pa, pb) = (lowest(&p_form), lowest(&b_form));
        let agrees = |l: &Option<(u32, Poly)>| l.as_ref().is_some_and(|(c, p)| *c == u.class && *p == u.image);
        out.push(ReducedFormRecord {
            unknown: u.label(),
            mechanical_class: u.class,
            p_form_agrees: agrees(&pa),
            p_form_class: pa.map(|x| x.0),
            bracket_form_agrees: agrees(&pb),
            bracket_form_class: pb.map(|x| x.0),
        });
    }
    out
}

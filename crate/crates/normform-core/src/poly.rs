//! Sparse polynomials over Gaussian rationals in two variable universes:
//! `(z, z̄, x)` for defining functions and `(z, w)` for holomorphic maps.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::Hash;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize, Serializer};
use smallvec::SmallVec;
use thiserror::Error;

use crate::scalar::{int, ExactScalar, Rational};

pub type Exps = SmallVec<[u16; 8]>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolyError {
    #[error("binding for {0} has a nonzero constant term")]
    NonNilpotentBinding(String),
    #[error("binding for {var} has weight {got} below the variable weight {need}")]
    BindingLowersWeight { var: String, got: u32, need: u32 },
    #[error("binding list has {got} entries, expected {expected}")]
    BindingArity { got: usize, expected: usize },
}

/// Additive grading: `z_k`, `z̄_k` weigh 1, `x` (and `w`) weigh `x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grading {
    pub x: u32,
}

impl Grading {
    pub fn plain() -> Self {
        Grading { x: 1 }
    }

    pub fn with_x(x: u32) -> Self {
        Grading { x }
    }

    fn weight(&self, e: &[u16]) -> u32 {
        let (last, rest) = e.split_last().expect("empty exponent vector");
        rest.iter().map(|&a| a as u32).sum::<u32>() + self.x * (*last as u32)
    }
}

/// Exponent vector layout shared by both universes; the last slot is `x` or `w`.
pub trait MonomialKey: Clone + Ord + Hash + fmt::Debug {
    fn exps(&self) -> &[u16];
    fn from_exps(e: Exps) -> Self;
    fn width(n: usize) -> usize;
    fn dim(&self) -> usize;
}

/// `z^ez z̄^ezb x^ex`, ordered lexicographically on `(ez, ezb, ex)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(Exps);

/// `z^ez w^ew`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HoloMonomial(Exps);

impl MonomialKey for Monomial {
    fn exps(&self) -> &[u16] {
        &self.0
    }
    fn from_exps(e: Exps) -> Self {
        Monomial(e)
    }
    fn width(n: usize) -> usize {
        2 * n + 1
    }
    fn dim(&self) -> usize {
        (self.0.len() - 1) / 2
    }
}

impl MonomialKey for HoloMonomial {
    fn exps(&self) -> &[u16] {
        &self.0
    }
    fn from_exps(e: Exps) -> Self {
        HoloMonomial(e)
    }
    fn width(n: usize) -> usize {
        n + 1
    }
    fn dim(&self) -> usize {
        self.0.len() - 1
    }
}

fn to_u16(v: u32) -> u16 {
    u16::try_from(v).expect("exponent overflow")
}

impl Monomial {
    pub fn new(ez: &[u32], ezb: &[u32], ex: u32) -> Self {
        assert_eq!(ez.len(), ezb.len(), "ez and ezb lengths differ");
        let mut e: Exps = ez.iter().map(|&a| to_u16(a)).collect();
        e.extend(ezb.iter().map(|&a| to_u16(a)));
        e.push(to_u16(ex));
        Monomial(e)
    }

    pub fn one(n: usize) -> Self {
        Monomial(smallvec::smallvec![0; 2 * n + 1])
    }

    pub fn ez(&self) -> &[u16] {
        let n = self.dim();
        &self.0[..n]
    }

    pub fn ezb(&self) -> &[u16] {
        let n = self.dim();
        &self.0[n..2 * n]
    }

    pub fn ex(&self) -> u32 {
        *self.0.last().unwrap() as u32
    }

    pub fn z_degree(&self) -> u32 {
        self.ez().iter().map(|&a| a as u32).sum()
    }

    pub fn zb_degree(&self) -> u32 {
        self.ezb().iter().map(|&a| a as u32).sum()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&a| a as u32).sum()
    }

    pub fn weight(&self, g: &Grading) -> u32 {
        g.weight(&self.0)
    }

    pub fn conj(&self) -> Self {
        let n = self.dim();
        let mut e = Exps::with_capacity(self.0.len());
        e.extend_from_slice(&self.0[n..2 * n]);
        e.extend_from_slice(&self.0[..n]);
        e.push(self.0[2 * n]);
        Monomial(e)
    }

    pub fn mul(&self, o: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(o.0.iter()).map(|(a, b)| a + b).collect())
    }

    /// `self / o` when `o` divides `self`.
    pub fn checked_div(&self, o: &Monomial) -> Option<Monomial> {
        let mut e = Exps::with_capacity(self.0.len());
        for (a, b) in self.0.iter().zip(o.0.iter()) {
            e.push(a.checked_sub(*b)?);
        }
        Some(Monomial(e))
    }

    /// `α! β! j!`
    pub fn factorial_norm(&self) -> Rational {
        let mut acc = Rational::one();
        for &a in self.0.iter() {
            for k in 2..=a as i64 {
                acc *= int(k);
            }
        }
        acc
    }
}

impl HoloMonomial {
    pub fn new(ez: &[u32], ew: u32) -> Self {
        let mut e: Exps = ez.iter().map(|&a| to_u16(a)).collect();
        e.push(to_u16(ew));
        HoloMonomial(e)
    }

    pub fn ez(&self) -> &[u16] {
        &self.0[..self.dim()]
    }

    pub fn ew(&self) -> u32 {
        *self.0.last().unwrap() as u32
    }

    pub fn z_degree(&self) -> u32 {
        self.ez().iter().map(|&a| a as u32).sum()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&a| a as u32).sum()
    }

    pub fn weight(&self, g: &Grading) -> u32 {
        g.weight(&self.0)
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.dim();
        let mut parts = Vec::new();
        for k in 0..n {
            push_power(&mut parts, &var_name("z", k, n), self.0[k]);
        }
        for k in 0..n {
            push_power(&mut parts, &var_name("zb", k, n), self.0[n + k]);
        }
        push_power(&mut parts, "x", self.0[2 * n]);
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

impl fmt::Debug for HoloMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.dim();
        let mut parts = Vec::new();
        for k in 0..n {
            push_power(&mut parts, &var_name("z", k, n), self.0[k]);
        }
        push_power(&mut parts, "w", self.0[n]);
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

fn var_name(base: &str, k: usize, n: usize) -> String {
    if n == 1 {
        base.to_string()
    } else {
        format!("{base}{}", k + 1)
    }
}

fn push_power(parts: &mut Vec<String>, name: &str, e: u16) {
    match e {
        0 => {}
        1 => parts.push(name.to_string()),
        _ => parts.push(format!("{name}^{e}")),
    }
}

/// Canonical sparse polynomial: no stored zero coefficients.
#[derive(Clone, PartialEq, Eq)]
pub struct Sparse<M: MonomialKey> {
    n: usize,
    terms: BTreeMap<M, ExactScalar>,
}

pub type Poly = Sparse<Monomial>;
pub type HoloPoly = Sparse<HoloMonomial>;

impl<M: MonomialKey> Sparse<M> {
    pub fn zero(n: usize) -> Self {
        Sparse { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: ExactScalar) -> Self {
        Self::term(n, M::from_exps(smallvec::smallvec![0; M::width(n)]), c)
    }

    pub fn one(n: usize) -> Self {
        Self::constant(n, ExactScalar::one())
    }

    pub fn term(n: usize, m: M, c: ExactScalar) -> Self {
        assert_eq!(m.exps().len(), M::width(n), "monomial width mismatch");
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Sparse { n, terms }
    }

    pub fn from_terms<I: IntoIterator<Item = (M, ExactScalar)>>(n: usize, it: I) -> Self {
        let mut p = Self::zero(n);
        for (m, c) in it {
            p.add_term(m, &c);
        }
        p
    }

    /// Number of `z` variables.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&M, &ExactScalar)> {
        self.terms.iter()
    }

    pub fn monomials(&self) -> impl Iterator<Item = &M> {
        self.terms.keys()
    }

    pub fn coeff(&self, m: &M) -> ExactScalar {
        self.terms.get(m).cloned().unwrap_or_default()
    }

    pub fn add_term(&mut self, m: M, c: &ExactScalar) {
        if c.is_zero() {
            return;
        }
        assert_eq!(m.exps().len(), M::width(self.n), "monomial width mismatch");
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c.clone());
            }
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        r.add_assign(o);
        r
    }

    pub fn add_assign(&mut self, o: &Self) {
        assert_eq!(self.n, o.n, "dimension mismatch");
        for (m, c) in &o.terms {
            self.add_term(m.clone(), c);
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut r = self.clone();
        r.sub_assign(o);
        r
    }

    pub fn sub_assign(&mut self, o: &Self) {
        assert_eq!(self.n, o.n, "dimension mismatch");
        for (m, c) in &o.terms {
            self.add_term(m.clone(), &-c);
        }
    }

    pub fn neg(&self) -> Self {
        Sparse { n: self.n, terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }

    pub fn scale(&self, c: &ExactScalar) -> Self {
        if c.is_zero() {
            return Self::zero(self.n);
        }
        Sparse { n: self.n, terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect() }
    }

    pub fn scale_rational(&self, q: &Rational) -> Self {
        self.scale(&ExactScalar::real(q.clone()))
    }

    pub fn mul_monomial(&self, m: &M, c: &ExactScalar) -> Self {
        let mut r = Self::zero(self.n);
        if c.is_zero() {
            return r;
        }
        for (k, v) in &self.terms {
            r.terms.insert(mul_keys(k, m), v * c);
        }
        r
    }

    /// Exact product.
    pub fn mul(&self, o: &Self) -> Self {
        self.mul_impl(o, None)
    }

    /// Product with terms of `g`-weight above `max` dropped.
    pub fn mul_trunc(&self, o: &Self, g: &Grading, max: u32) -> Self {
        self.mul_impl(o, Some((g, max)))
    }

    fn mul_impl(&self, o: &Self, trunc: Option<(&Grading, u32)>) -> Self {
        assert_eq!(self.n, o.n, "dimension mismatch");
        if self.is_zero() || o.is_zero() {
            return Self::zero(self.n);
        }
        let g = trunc.map(|t| *t.0).unwrap_or_else(Grading::plain);
        let mut rhs: Vec<(u32, &M, &ExactScalar)> =
            o.terms.iter().map(|(m, c)| (g.weight(m.exps()), m, c)).collect();
        rhs.sort_by_key(|t| t.0);
        let mut acc: HashMap<M, ExactScalar> = HashMap::new();
        for (m1, c1) in &self.terms {
            let w1 = g.weight(m1.exps());
            for &(w2, m2, c2) in &rhs {
                if let Some((_, max)) = trunc {
                    if w1 + w2 > max {
                        break;
                    }
                }
                let c = c1 * c2;
                acc.entry(mul_keys(m1, m2))
                    .and_modify(|v| *v += &c)
                    .or_insert(c);
            }
        }
        Sparse { n: self.n, terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect() }
    }

    pub fn pow_trunc(&self, e: u32, g: &Grading, max: u32) -> Self {
        let mut acc = Self::one(self.n).truncate(g, max);
        for _ in 0..e {
            acc = acc.mul_trunc(self, g, max);
        }
        acc
    }

    pub fn truncate(&self, g: &Grading, max: u32) -> Self {
        self.filter(|m| g.weight(m.exps()) <= max)
    }

    pub fn filter<F: Fn(&M) -> bool>(&self, keep: F) -> Self {
        Sparse {
            n: self.n,
            terms: self.terms.iter().filter(|(m, _)| keep(m)).map(|(m, c)| (m.clone(), c.clone())).collect(),
        }
    }

    /// Terms of `g`-weight exactly `d`.
    pub fn graded_part(&self, g: &Grading, d: u32) -> Self {
        self.filter(|m| g.weight(m.exps()) == d)
    }

    /// Partition by `g`-weight.
    pub fn graded_parts(&self, g: &Grading) -> BTreeMap<u32, Self> {
        let mut out: BTreeMap<u32, Self> = BTreeMap::new();
        for (m, c) in &self.terms {
            out.entry(g.weight(m.exps()))
                .or_insert_with(|| Self::zero(self.n))
                .terms
                .insert(m.clone(), c.clone());
        }
        out
    }

    pub fn plain_graded_part(&self, d: u32) -> Self {
        self.graded_part(&Grading::plain(), d)
    }

    pub fn min_weight(&self, g: &Grading) -> Option<u32> {
        self.terms.keys().map(|m| g.weight(m.exps())).min()
    }

    pub fn max_weight(&self, g: &Grading) -> Option<u32> {
        self.terms.keys().map(|m| g.weight(m.exps())).max()
    }

    pub fn is_homogeneous(&self, g: &Grading) -> bool {
        self.min_weight(g) == self.max_weight(g)
    }

    pub fn constant_term(&self) -> ExactScalar {
        self.coeff(&M::from_exps(smallvec::smallvec![0; M::width(self.n)]))
    }

    /// Partial derivative in exponent slot `slot`.
    pub fn derivative(&self, slot: usize) -> Self {
        let mut r = Self::zero(self.n);
        for (m, c) in &self.terms {
            let a = m.exps()[slot];
            if a == 0 {
                continue;
            }
            let mut e: Exps = m.exps().iter().copied().collect();
            e[slot] -= 1;
            r.add_term(M::from_exps(e), &c.scale(&int(a as i64)));
        }
        r
    }
}

fn mul_keys<M: MonomialKey>(a: &M, b: &M) -> M {
    M::from_exps(a.exps().iter().zip(b.exps().iter()).map(|(x, y)| x + y).collect())
}

/// All monomials in `(z, z̄, x)` of `g`-weight exactly `w`, in canonical order.
pub fn monomials_of_weight(n: usize, g: &Grading, w: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    for ex in 0..=w / g.x {
        let rest = w - g.x * ex;
        for e in compositions(rest, 2 * n) {
            let mut exps: Exps = e.into_iter().map(to_u16).collect();
            exps.push(to_u16(ex));
            out.push(Monomial(exps));
        }
    }
    out.sort();
    out
}

/// All holomorphic monomials `z^α w^j` of `g`-weight exactly `w`.
pub fn holo_monomials_of_weight(n: usize, g: &Grading, w: u32) -> Vec<HoloMonomial> {
    let mut out = Vec::new();
    for ew in 0..=w / g.x {
        for e in compositions(w - g.x * ew, n) {
            let mut exps: Exps = e.into_iter().map(to_u16).collect();
            exps.push(to_u16(ew));
            out.push(HoloMonomial(exps));
        }
    }
    out.sort();
    out
}

/// Exponent vectors of length `parts` summing to `total`.
pub fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut tail in compositions(total - first, parts - 1) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

/// A variable of the `(z, z̄, x)` universe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Z(usize),
    Zb(usize),
    X,
}

impl Var {
    fn slot(&self, n: usize) -> usize {
        match *self {
            Var::Z(k) => k,
            Var::Zb(k) => n + k,
            Var::X => 2 * n,
        }
    }
}

impl Poly {
    pub fn var(n: usize, v: Var) -> Poly {
        let mut e: Exps = smallvec::smallvec![0; 2 * n + 1];
        e[v.slot(n)] = 1;
        Poly::term(n, Monomial(e), ExactScalar::one())
    }

    pub fn z(n: usize, k: usize) -> Poly {
        Poly::var(n, Var::Z(k))
    }

    pub fn zb(n: usize, k: usize) -> Poly {
        Poly::var(n, Var::Zb(k))
    }

    pub fn x(n: usize) -> Poly {
        Poly::var(n, Var::X)
    }

    pub fn mono(n: usize, ez: &[u32], ezb: &[u32], ex: u32, c: ExactScalar) -> Poly {
        Poly::term(n, Monomial::new(ez, ezb, ex), c)
    }

    /// Swaps `z` and `z̄` exponents and conjugates coefficients.
    pub fn conjugate(&self) -> Poly {
        Sparse { n: self.n, terms: self.terms.iter().map(|(m, c)| (m.conj(), c.conj())).collect() }
    }

    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|(m, c)| {
            let mc = m.conj();
            if &mc == m {
                c.is_real()
            } else {
                self.terms.get(&mc).map(|d| d == &c.conj()).unwrap_or(false)
            }
        })
    }

    /// `(p + p̄)/2`
    pub fn re_part(&self) -> Poly {
        self.add(&self.conjugate()).scale_rational(&crate::scalar::rat(1, 2))
    }

    /// `(p - p̄)/(2i)`
    pub fn im_part(&self) -> Poly {
        self.sub(&self.conjugate()).scale(&ExactScalar::new(Rational::zero(), crate::scalar::rat(-1, 2)))
    }

    pub fn derivative_var(&self, v: Var) -> Poly {
        self.derivative(v.slot(self.n))
    }

    pub fn x_free(&self) -> bool {
        self.terms.keys().all(|m| m.ex() == 0)
    }

    /// Composition `p(b)` truncated by `g`-weight. Unbound variables stay fixed.
    pub fn substitute(&self, bindings: &BTreeMap<Var, Poly>, g: &Grading, max: u32) -> Result<Poly, PolyError> {
        let n = self.n;
        let mut full = Vec::with_capacity(2 * n + 1);
        for k in 0..n {
            full.push(bindings.get(&Var::Z(k)).cloned().unwrap_or_else(|| Poly::z(n, k)));
        }
        for k in 0..n {
            full.push(bindings.get(&Var::Zb(k)).cloned().unwrap_or_else(|| Poly::zb(n, k)));
        }
        full.push(bindings.get(&Var::X).cloned().unwrap_or_else(|| Poly::x(n)));
        let mut ev = Evaluator::new(full, *g, max)?;
        Ok(ev.eval(self))
    }
}

/// `p(b)` truncated at plain degree `max_degree`.
pub fn substitute(target: &Poly, bindings: &BTreeMap<Var, Poly>, max_degree: u32) -> Result<Poly, PolyError> {
    target.substitute(bindings, &Grading::plain(), max_degree)
}

/// `p * q`, optionally dropping terms of plain degree above `max_degree`.
pub fn poly_mul(p: &Poly, q: &Poly, max_degree: Option<u32>) -> Poly {
    match max_degree {
        Some(d) => p.mul_trunc(q, &Grading::plain(), d),
        None => p.mul(q),
    }
}

pub fn poly_add(p: &Poly, q: &Poly) -> Poly {
    p.add(q)
}

pub fn conjugate(p: &Poly) -> Poly {
    p.conjugate()
}

pub fn is_real(p: &Poly) -> bool {
    p.is_real()
}

pub fn plain_graded_part(p: &Poly, d: u32) -> Poly {
    p.plain_graded_part(d)
}

impl HoloPoly {
    pub fn z(n: usize, k: usize) -> HoloPoly {
        let mut e: Exps = smallvec::smallvec![0; n + 1];
        e[k] = 1;
        HoloPoly::term(n, HoloMonomial(e), ExactScalar::one())
    }

    pub fn w(n: usize) -> HoloPoly {
        let mut e: Exps = smallvec::smallvec![0; n + 1];
        e[n] = 1;
        HoloPoly::term(n, HoloMonomial(e), ExactScalar::one())
    }

    pub fn mono(n: usize, ez: &[u32], ew: u32, c: ExactScalar) -> HoloPoly {
        HoloPoly::term(n, HoloMonomial::new(ez, ew), c)
    }

    /// `h(z, w)` with `z_k ↦ zb[k]`, `w ↦ wb` in the `(z, z̄, x)` universe.
    pub fn substitute_real(&self, zb: &[Poly], wb: &Poly, g: &Grading, max: u32) -> Result<Poly, PolyError> {
        let mut full: Vec<Poly> = zb.to_vec();
        full.push(wb.clone());
        if full.len() != self.n + 1 {
            return Err(PolyError::BindingArity { got: full.len(), expected: self.n + 1 });
        }
        let mut ev = Evaluator::new(full, *g, max)?;
        Ok(ev.eval_keys(self.terms.iter().map(|(m, c)| (m.exps(), c)), wb.n))
    }

    /// Holomorphic composition `h(zb, wb)`.
    pub fn compose(&self, zb: &[HoloPoly], wb: &HoloPoly, g: &Grading, max: u32) -> Result<HoloPoly, PolyError> {
        let mut full: Vec<HoloPoly> = zb.to_vec();
        full.push(wb.clone());
        if full.len() != self.n + 1 {
            return Err(PolyError::BindingArity { got: full.len(), expected: self.n + 1 });
        }
        let mut ev = Evaluator::new(full, *g, max)?;
        Ok(ev.eval_keys(self.terms.iter().map(|(m, c)| (m.exps(), c)), wb.n))
    }

    /// Restriction to `z = 0` as coefficients of `w^j`.
    pub fn w_axis_coeff(&self, j: u32) -> ExactScalar {
        self.coeff(&HoloMonomial::new(&vec![0; self.n], j))
    }
}

/// Memoized evaluation of monomials at a fixed list of bindings.
pub struct Evaluator<M: MonomialKey> {
    bindings: Vec<Sparse<M>>,
    g: Grading,
    max: u32,
    memo: HashMap<Exps, Sparse<M>>,
}

impl<M: MonomialKey> Evaluator<M> {
    /// Bindings are listed in exponent-slot order of the target universe.
    pub fn new(bindings: Vec<Sparse<M>>, g: Grading, max: u32) -> Result<Self, PolyError> {
        let width = bindings.len();
        for (slot, b) in bindings.iter().enumerate() {
            if !b.constant_term().is_zero() {
                return Err(PolyError::NonNilpotentBinding(format!("slot {slot}")));
            }
            let need = if slot + 1 == width { g.x } else { 1 };
            if let Some(got) = b.min_weight(&g) {
                if got < need {
                    return Err(PolyError::BindingLowersWeight { var: format!("slot {slot}"), got, need });
                }
            }
        }
        Ok(Evaluator { bindings, g, max, memo: HashMap::new() })
    }

    fn n(&self) -> usize {
        self.bindings[0].n
    }

    fn ensure(&mut self, e: &Exps) {
        if self.memo.contains_key(e) {
            return;
        }
        let mut stack = vec![e.clone()];
        while let Some(top) = stack.last().cloned() {
            if self.memo.contains_key(&top) {
                stack.pop();
                continue;
            }
            match top.iter().rposition(|&a| a > 0) {
                None => {
                    let one = Sparse::<M>::one(self.n());
                    self.memo.insert(top, one);
                    stack.pop();
                }
                Some(slot) => {
                    let mut parent = top.clone();
                    parent[slot] -= 1;
                    if let Some(pv) = self.memo.get(&parent) {
                        let v = pv.mul_trunc(&self.bindings[slot], &self.g, self.max);
                        self.memo.insert(top, v);
                        stack.pop();
                    } else {
                        stack.push(parent);
                    }
                }
            }
        }
    }

    /// Value of the monomial with exponent vector `e`.
    pub fn monomial(&mut self, e: &[u16]) -> &Sparse<M> {
        let key: Exps = e.iter().copied().collect();
        self.ensure(&key);
        &self.memo[&key]
    }

    fn eval_keys<'a, I: Iterator<Item = (&'a [u16], &'a ExactScalar)>>(&mut self, it: I, n: usize) -> Sparse<M> {
        let mut acc = Sparse::<M>::zero(n);
        for (e, c) in it {
            let v = self.monomial(e).scale(c);
            acc.add_assign(&v);
        }
        acc
    }

    pub fn eval<K: MonomialKey>(&mut self, p: &Sparse<K>) -> Sparse<M> {
        let n = self.n();
        assert_eq!(K::width(p.n), self.bindings.len(), "binding arity mismatch");
        let terms: Vec<(Exps, ExactScalar)> =
            p.terms.iter().map(|(m, c)| (m.exps().iter().copied().collect(), c.clone())).collect();
        let mut acc = Sparse::<M>::zero(n);
        for (e, c) in &terms {
            let v = self.monomial(e).scale(c);
            acc.add_assign(&v);
        }
        acc
    }
}

impl<M: MonomialKey> fmt::Debug for Sparse<M> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|(m, c)| format!("{c}*{m:?}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl<M: MonomialKey> fmt::Display for Sparse<M> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Serialize, Deserialize)]
struct PolyTermRepr {
    re: String,
    im: String,
    ez: Vec<u32>,
    ezb: Vec<u32>,
    ex: u32,
}

#[derive(Serialize, Deserialize)]
struct HoloTermRepr {
    re: String,
    im: String,
    ez: Vec<u32>,
    ew: u32,
}

fn split_scalar(c: &ExactScalar) -> (String, String) {
    (crate::scalar::format_rational(&c.re), crate::scalar::format_rational(&c.im))
}

fn join_scalar(re: &str, im: &str) -> Result<ExactScalar, String> {
    Ok(ExactScalar::new(crate::scalar::parse_rational(re)?, crate::scalar::parse_rational(im)?))
}

impl Poly {
    pub fn to_json(&self) -> serde_json::Value {
        let v: Vec<PolyTermRepr> = self
            .terms
            .iter()
            .map(|(m, c)| {
                let (re, im) = split_scalar(c);
                PolyTermRepr {
                    re,
                    im,
                    ez: m.ez().iter().map(|&a| a as u32).collect(),
                    ezb: m.ezb().iter().map(|&a| a as u32).collect(),
                    ex: m.ex(),
                }
            })
            .collect();
        serde_json::to_value(v).expect("poly serializes")
    }

    /// Parses a term array; `n` fixes the dimension when the array is empty.
    pub fn from_json(v: &serde_json::Value, n: usize) -> Result<Poly, String> {
        let terms: Vec<PolyTermRepr> = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
        let mut p = Poly::zero(n);
        for t in terms {
            if t.ez.len() != n || t.ezb.len() != n {
                return Err(format!("term exponent length {} / {} does not match N = {n}", t.ez.len(), t.ezb.len()));
            }
            let c = join_scalar(&t.re, &t.im)?;
            p.add_term(Monomial::new(&t.ez, &t.ezb, t.ex), &c);
        }
        Ok(p)
    }
}

impl HoloPoly {
    pub fn to_json(&self) -> serde_json::Value {
        let v: Vec<HoloTermRepr> = self
            .terms
            .iter()
            .map(|(m, c)| {
                let (re, im) = split_scalar(c);
                HoloTermRepr { re, im, ez: m.ez().iter().map(|&a| a as u32).collect(), ew: m.ew() }
            })
            .collect();
        serde_json::to_value(v).expect("holo poly serializes")
    }

    pub fn from_json(v: &serde_json::Value, n: usize) -> Result<HoloPoly, String> {
        let terms: Vec<HoloTermRepr> = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
        let mut p = HoloPoly::zero(n);
        for t in terms {
            if t.ez.len() != n {
                return Err(format!("term exponent length {} does not match N = {n}", t.ez.len()));
            }
            let c = join_scalar(&t.re, &t.im)?;
            p.add_term(HoloMonomial::new(&t.ez, t.ew), &c);
        }
        Ok(p)
    }
}

impl Serialize for Poly {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl Serialize for HoloPoly {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

//! Fischer pairing, adjoint operators and Fischer decompositions.

use std::collections::{BTreeMap, HashMap};

use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, Matrix};
use crate::poly::{monomials_of_weight, Grading, Monomial, MonomialKey, Poly};
use crate::scalar::{int, ExactScalar, Rational};
use crate::weight::{weight, ModelSpec, WeightPreset};

#[derive(Debug, Error, PartialEq)]
pub enum FischerError {
    #[error("divisor is zero")]
    ZeroDivisor,
    #[error("divisor is not homogeneous under the {preset:?} weights")]
    DivisorNotHomogeneous { preset: WeightPreset },
    #[error("no polynomial decomposition: the best quotient leaves D*(B) = {adjoint_image}")]
    NoPolynomialDecomposition { adjoint_image: String },
    #[error("pairing system of class {class} is singular")]
    SingularDecomposition { class: u32 },
    #[error("family remainders are dependent: {witness:?}")]
    DependentFamily { witness: Vec<(String, ExactScalar)> },
    #[error("the literal preset is not an additive grading and cannot slice decompositions")]
    UnsupportedPreset,
    #[error("kmax must be at least 2")]
    BadKmax,
}

/// `⟨p, q⟩ = Σ p_m conj(q_m) m!`
pub fn fischer_pairing(p: &Poly, q: &Poly) -> ExactScalar {
    let mut acc = ExactScalar::zero();
    let (small, large, flip) = if p.len() <= q.len() { (p, q, false) } else { (q, p, true) };
    for (m, a) in small.terms() {
        let b = large.coeff(m);
        if b.is_zero() {
            continue;
        }
        let term = if flip { &b * &a.conj() } else { a * &b.conj() };
        acc += &term.scale(&m.factorial_norm());
    }
    acc
}

/// `q*(∂)`: the Fischer adjoint of multiplication by `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjointOperator {
    pub source: Poly,
}

impl AdjointOperator {
    pub fn new(source: Poly) -> Self {
        AdjointOperator { source }
    }
}

fn apply_derivative(mu: &Monomial, p: &Poly) -> Poly {
    let mut out = Poly::zero(p.n());
    for (m, c) in p.terms() {
        let Some(rest) = m.checked_div(mu) else { continue };
        let mut factor = int(1);
        for (&e, &k) in m.exps().iter().zip(mu.exps().iter()) {
            for j in 0..k {
                factor *= int((e - j) as i64);
            }
        }
        out.add_term(rest, &c.scale(&factor));
    }
    out
}

pub fn adjoint_apply(op: &AdjointOperator, p: &Poly) -> Poly {
    let mut out = Poly::zero(p.n());
    for (mu, c) in op.source.terms() {
        out.add_assign(&apply_derivative(mu, p).scale(&c.conj()));
    }
    out
}

/// Additive grading that slices decompositions for a preset.
pub fn slicing_grading(model: &ModelSpec, preset: WeightPreset) -> Result<Grading, FischerError> {
    match preset {
        WeightPreset::BlockMinimal => Ok(model.grading()),
        WeightPreset::Literal => Err(FischerError::UnsupportedPreset),
    }
}

struct Block {
    vars: Vec<usize>,
    inv: Matrix<ExactScalar>,
}

struct SliceSolver {
    basis: Vec<Monomial>,
    index: HashMap<Monomial, usize>,
    blocks: Vec<Block>,
}

/// Decomposes `f = D·A + B` with `D*(∂) B = 0`, caching one solver per slice.
///
/// Homogeneous divisors are solved class by class. Otherwise `A` is sought among
/// all monomials of weight at most `wt(f) - wt_min(D)` and the kernel condition
/// is checked exactly afterwards.
pub struct FischerDecomposer {
    divisor: Poly,
    adjoint: AdjointOperator,
    grading: Grading,
    d: u32,
    homogeneous: bool,
    slices: HashMap<u32, SliceSolver>,
}

impl FischerDecomposer {
    pub fn new(divisor: &Poly, grading: Grading) -> Result<Self, FischerError> {
        let d = divisor.min_weight(&grading).ok_or(FischerError::ZeroDivisor)?;
        Ok(FischerDecomposer {
            divisor: divisor.clone(),
            adjoint: AdjointOperator::new(divisor.clone()),
            grading,
            d,
            homogeneous: divisor.is_homogeneous(&grading),
            slices: HashMap::new(),
        })
    }

    pub fn divisor(&self) -> &Poly {
        &self.divisor
    }

    pub fn grading(&self) -> Grading {
        self.grading
    }

    pub fn is_homogeneous(&self) -> bool {
        self.homogeneous
    }

    fn slice(&mut self, w: u32) -> Result<&SliceSolver, FischerError> {
        if !self.slices.contains_key(&w) {
            let n = self.divisor.n();
            let basis = if self.homogeneous {
                monomials_of_weight(n, &self.grading, w)
            } else {
                (0..=w).flat_map(|v| monomials_of_weight(n, &self.grading, v)).collect()
            };
            let solver = self.build_solver(basis, w + self.d)?;
            self.slices.insert(w, solver);
        }
        Ok(&self.slices[&w])
    }

    fn build_solver(&self, basis: Vec<Monomial>, class: u32) -> Result<SliceSolver, FischerError> {
        let index: HashMap<Monomial, usize> = basis.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        let k = basis.len();
        let mut cols: Vec<Vec<(usize, ExactScalar)>> = Vec::with_capacity(k);
        let mut parent: Vec<usize> = (0..k).collect();
        for (j, m) in basis.iter().enumerate() {
            let dm = self.divisor.mul_monomial(m, &ExactScalar::from_int(1));
            let img = adjoint_apply(&self.adjoint, &dm);
            let mut col = Vec::new();
            for (r, c) in img.terms() {
                let Some(&i) = index.get(r) else { continue };
                col.push((i, c.clone()));
                union(&mut parent, i, j);
            }
            cols.push(col);
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..k {
            let root = find(&mut parent, i);
            groups.entry(root).or_default().push(i);
        }
        let mut blocks = Vec::new();
        for vars in groups.into_values() {
            let local: HashMap<usize, usize> = vars.iter().enumerate().map(|(a, &b)| (b, a)).collect();
            let size = vars.len();
            let mut aug = vec![vec![ExactScalar::zero(); 2 * size]; size];
            for (jl, &j) in vars.iter().enumerate() {
                for (i, c) in &cols[j] {
                    aug[local[i]][jl] = c.clone();
                }
                aug[jl][size + jl] = ExactScalar::from_int(1);
            }
            let pivots = linalg::rref(&mut aug, size);
            if pivots.len() < size || pivots.iter().any(|&p| p >= size) {
                return Err(FischerError::SingularDecomposition { class });
            }
            let inv = aug.into_iter().map(|row| row[size..].to_vec()).collect();
            blocks.push(Block { vars, inv });
        }
        Ok(SliceSolver { basis, index, blocks })
    }

    fn solve_quotient(&mut self, fc: &Poly, w: u32) -> Result<Poly, FischerError> {
        let n = fc.n();
        let rhs = adjoint_apply(&self.adjoint, fc);
        let solver = self.slice(w)?;
        let mut rv = vec![ExactScalar::zero(); solver.basis.len()];
        for (m, v) in rhs.terms() {
            if let Some(&i) = solver.index.get(m) {
                rv[i] = v.clone();
            }
        }
        let mut ac = Poly::zero(n);
        for blk in &solver.blocks {
            if blk.vars.iter().all(|&i| rv[i].is_zero()) {
                continue;
            }
            let local: Vec<ExactScalar> = blk.vars.iter().map(|&i| rv[i].clone()).collect();
            let sol = linalg::mat_vec(&blk.inv, &local);
            for (&i, v) in blk.vars.iter().zip(sol.iter()) {
                ac.add_term(solver.basis[i].clone(), v);
            }
        }
        Ok(ac)
    }

    /// `(A, B)` with `f = D·A + B` and `D*(∂) B = 0`.
    pub fn decompose(&mut self, f: &Poly) -> Result<(Poly, Poly), FischerError> {
        let n = f.n();
        if !self.homogeneous {
            let a = match f.max_weight(&self.grading) {
                Some(top) if top >= self.d => self.solve_quotient(f, top - self.d)?,
                _ => Poly::zero(n),
            };
            let b = f.sub(&self.divisor.mul(&a));
            let img = adjoint_apply(&self.adjoint, &b);
            if !img.is_zero() {
                return Err(FischerError::NoPolynomialDecomposition { adjoint_image: img.to_string() });
            }
            return Ok((a, b));
        }
        let mut a = Poly::zero(n);
        let mut b = Poly::zero(n);
        for (c, fc) in f.graded_parts(&self.grading) {
            if c < self.d {
                b.add_assign(&fc);
                continue;
            }
            let ac = self.solve_quotient(&fc, c - self.d)?;
            b.add_assign(&fc.sub(&self.divisor.mul(&ac)));
            a.add_assign(&ac);
        }
        Ok((a, b))
    }
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut c = i;
    while parent[c] != r {
        let next = parent[c];
        parent[c] = r;
        c = next;
    }
    r
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra.max(rb)] = ra.min(rb);
    }
}

pub fn fischer_decompose(f: &Poly, divisor: &Poly, grading: Grading) -> Result<(Poly, Poly), FischerError> {
    FischerDecomposer::new(divisor, grading)?.decompose(f)
}

/// Decomposition with the divisor validated under a weight preset of `model`.
pub fn fischer_decompose_for(
    f: &Poly,
    divisor: &Poly,
    model: &ModelSpec,
    preset: WeightPreset,
) -> Result<(Poly, Poly), FischerError> {
    let mut weights = divisor.monomials().map(|m| weight(m, model, preset));
    let first = weights.next().ok_or(FischerError::ZeroDivisor)?;
    let first = first.map_err(|_| FischerError::DivisorNotHomogeneous { preset })?;
    for w in weights {
        if w.ok() != Some(first) {
            return Err(FischerError::DivisorNotHomogeneous { preset });
        }
    }
    fischer_decompose(f, divisor, slicing_grading(model, preset)?)
}

/// `x + i x^s P`
pub fn model_divisor(model: &ModelSpec) -> Poly {
    Poly::x(model.n()).add(&model.leading().scale(&ExactScalar::i()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FamilyKind {
    /// From `z^I`.
    B,
    /// From `x z̄_l z^J`.
    BTilde,
}

/// Length convention for `J` at stage `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Default)]
pub enum JConvention {
    #[default]
    KMinusOne,
    KMinusTwo,
}

impl JConvention {
    fn len(&self, k: u32) -> Option<u32> {
        match self {
            JConvention::KMinusOne => k.checked_sub(1),
            JConvention::KMinusTwo => k.checked_sub(2),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyEntry {
    pub kind: FamilyKind,
    pub conjugate: bool,
    pub k: u32,
    pub index: Vec<u32>,
    pub l: Option<usize>,
    #[serde(skip)]
    pub remainder: Poly,
    #[serde(skip)]
    pub quotient: Poly,
}

impl FamilyEntry {
    pub fn label(&self) -> String {
        let base = match (self.kind, self.l) {
            (FamilyKind::B, _) => format!("B_{:?}", self.index),
            (FamilyKind::BTilde, Some(l)) => format!("B~_{:?},l={}", self.index, l + 1),
            (FamilyKind::BTilde, None) => format!("B~_{:?}", self.index),
        };
        if self.conjugate {
            format!("conj {base}")
        } else {
            base
        }
    }

    /// The polynomial decomposed for this entry.
    pub fn source(&self, n: usize) -> Poly {
        let z = Poly::mono(n, &self.index, &vec![0; n], 0, ExactScalar::from_int(1));
        let p = match (self.kind, self.l) {
            (FamilyKind::B, _) => z,
            (FamilyKind::BTilde, Some(l)) => z.mul(&Poly::zb(n, l)).mul(&Poly::x(n)),
            (FamilyKind::BTilde, None) => unreachable!("tilde entries carry l"),
        };
        if self.conjugate {
            p.conjugate()
        } else {
            p
        }
    }
}

#[derive(Clone, Debug)]
pub struct FischerBasisFamily {
    pub model: ModelSpec,
    pub kmax: u32,
    pub j_convention: JConvention,
    pub entries: Vec<FamilyEntry>,
}

impl FischerBasisFamily {
    pub fn entries_at(&self, k: u32) -> impl Iterator<Item = &FamilyEntry> {
        self.entries.iter().filter(move |e| e.k == k)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn build_basis_family(model: &ModelSpec, kmax: u32, preset: WeightPreset) -> Result<FischerBasisFamily, FischerError> {
    build_basis_family_with(model, kmax, preset, JConvention::default())
}

pub fn build_basis_family_with(
    model: &ModelSpec,
    kmax: u32,
    preset: WeightPreset,
    j_convention: JConvention,
) -> Result<FischerBasisFamily, FischerError> {
    if kmax < 2 {
        return Err(FischerError::BadKmax);
    }
    let n = model.n();
    let grading = slicing_grading(model, preset)?;
    let mut dec = FischerDecomposer::new(&model_divisor(model), grading)?;
    let mut entries = Vec::new();
    for k in 2..=kmax {
        for idx in crate::poly::compositions(k, n) {
            let e = FamilyEntry {
                kind: FamilyKind::B,
                conjugate: false,
                k,
                index: idx,
                l: None,
                remainder: Poly::zero(n),
                quotient: Poly::zero(n),
            };
            entries.push(e);
        }
        if let Some(jl) = j_convention.len(k) {
            for idx in crate::poly::compositions(jl, n) {
                for l in 0..n {
                    entries.push(FamilyEntry {
                        kind: FamilyKind::BTilde,
                        conjugate: false,
                        k,
                        index: idx.clone(),
                        l: Some(l),
                        remainder: Poly::zero(n),
                        quotient: Poly::zero(n),
                    });
                }
            }
        }
    }
    let mut all = Vec::with_capacity(2 * entries.len());
    for mut e in entries {
        let (a, b) = dec.decompose(&e.source(n))?;
        e.remainder = b;
        e.quotient = a;
        let mut c = e.clone();
        c.conjugate = true;
        c.remainder = e.remainder.conjugate();
        c.quotient = e.quotient.conjugate();
        all.push(e);
        all.push(c);
    }
    let family = FischerBasisFamily { model: model.clone(), kmax, j_convention, entries: all };
    check_independence(&family)?;
    Ok(family)
}

/// Exact rank test on the remainders.
pub fn check_independence(family: &FischerBasisFamily) -> Result<(), FischerError> {
    let cols: Vec<&Poly> = family.entries.iter().map(|e| &e.remainder).collect();
    let (mat, ncols) = coefficient_matrix(&cols);
    let kernel = linalg::nullspace(&mat, ncols);
    match kernel.into_iter().next() {
        None => Ok(()),
        Some(v) => Err(FischerError::DependentFamily {
            witness: family
                .entries
                .iter()
                .zip(v)
                .filter(|(_, c)| !c.is_zero())
                .map(|(e, c)| (e.label(), c))
                .collect(),
        }),
    }
}

fn coefficient_matrix(cols: &[&Poly]) -> (Matrix<ExactScalar>, usize) {
    let mut rows: BTreeMap<Monomial, Vec<ExactScalar>> = BTreeMap::new();
    for (j, p) in cols.iter().enumerate() {
        for (m, c) in p.terms() {
            rows.entry(m.clone()).or_insert_with(|| vec![ExactScalar::zero(); cols.len()])[j] = c.clone();
        }
    }
    (rows.into_values().collect(), cols.len())
}

/// Which adjoint kernels the iterated conditions intersect.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
pub enum KernelMode {
    /// `B~`, `B`, `conj B`, `conj B~`.
    #[default]
    Symmetric,
    /// `B~`, `conj B`, `conj B~` only.
    OmitB,
}

impl KernelMode {
    fn admits(&self, e: &FamilyEntry) -> bool {
        match self {
            KernelMode::Symmetric => true,
            KernelMode::OmitB => !(e.kind == FamilyKind::B && !e.conjugate),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailedCondition {
    pub class: u32,
    pub stage: u32,
    pub condition: String,
}

#[derive(Clone, Debug)]
pub struct NormalizationResidual {
    pub residual: Poly,
    pub certificate: Vec<FailedCondition>,
}

/// Iterated division by `x + i x^s P` with adjoint-kernel conditions on the
/// remainders and the `x^⋆` condition on the piece of index `wt/k0 - 1`.
pub struct IteratedDivisionSpace<'a> {
    family: &'a FischerBasisFamily,
    mode: KernelMode,
    dec: FischerDecomposer,
    grading: Grading,
}

impl<'a> IteratedDivisionSpace<'a> {
    pub fn new(family: &'a FischerBasisFamily, mode: KernelMode) -> Result<Self, FischerError> {
        let grading = family.model.grading();
        let dec = FischerDecomposer::new(&model_divisor(&family.model), grading)?;
        Ok(IteratedDivisionSpace { family, mode, dec, grading })
    }

    /// Outputs of every condition at class `class`, labelled.
    fn conditions(&mut self, p: &Poly, class: u32) -> Result<Vec<(u32, String, Poly)>, FischerError> {
        let k0 = self.family.model.k0();
        let mut out = Vec::new();
        let mut piece = p.clone();
        let stages = class / k0;
        for k in 0..=stages {
            if class.is_multiple_of(k0) && k + 1 == class / k0 {
                let img = adjoint_apply(&AdjointOperator::new(Poly::x(p.n())), &piece);
                out.push((k, format!("x* on P_{k}"), img));
            }
            let (q, r) = self.dec.decompose(&piece)?;
            if k >= 2 {
                for e in self.family.entries.iter() {
                    let matches = match e.kind {
                        FamilyKind::B => e.k == k,
                        FamilyKind::BTilde => e.k == k,
                    };
                    if matches && self.mode.admits(e) {
                        let img = adjoint_apply(&AdjointOperator::new(e.remainder.clone()), &r);
                        out.push((k, format!("ker ({})*", e.label()), img));
                    }
                }
            }
            piece = q;
        }
        Ok(out)
    }

    pub fn residual(&mut self, p: &Poly) -> Result<NormalizationResidual, FischerError> {
        let n = p.n();
        let mut residual = Poly::zero(n);
        let mut certificate = Vec::new();
        for (class, pc) in p.graded_parts(&self.grading) {
            for (stage, name, img) in self.conditions(&pc, class)? {
                if !img.is_zero() {
                    certificate.push(FailedCondition { class, stage, condition: name });
                }
            }
            if certificate.iter().all(|c| c.class != class) {
                continue;
            }
            residual.add_assign(&self.project_out(&pc, class)?);
        }
        Ok(NormalizationResidual { residual, certificate })
    }

    /// Component of the real polynomial `pc` Fischer-orthogonal to the real class space.
    fn project_out(&mut self, pc: &Poly, class: u32) -> Result<Poly, FischerError> {
        let n = pc.n();
        let one = ExactScalar::from_int(1);
        let mut real_basis = Vec::new();
        for m in monomials_of_weight(n, &self.grading, class) {
            let mc = m.conj();
            if m == mc {
                real_basis.push(Poly::term(n, m, one.clone()));
            } else if m < mc {
                let a = Poly::term(n, m.clone(), one.clone());
                let b = Poly::term(n, mc, one.clone());
                real_basis.push(a.add(&b));
                real_basis.push(a.sub(&b).scale(&ExactScalar::i()));
            }
        }
        let mut images: Vec<Vec<Poly>> = Vec::with_capacity(real_basis.len());
        for bp in &real_basis {
            images.push(self.conditions(bp, class)?.into_iter().map(|t| t.2).collect());
        }
        let mut row_index: BTreeMap<(usize, Monomial), usize> = BTreeMap::new();
        for imgs in &images {
            for (ci, img) in imgs.iter().enumerate() {
                for m in img.monomials() {
                    let next = row_index.len();
                    row_index.entry((ci, m.clone())).or_insert(next);
                }
            }
        }
        let cols = real_basis.len();
        let mut mat = vec![vec![Rational::zero(); cols]; 2 * row_index.len()];
        for (j, imgs) in images.iter().enumerate() {
            for (ci, img) in imgs.iter().enumerate() {
                for (m, c) in img.terms() {
                    let r = row_index[&(ci, m.clone())];
                    mat[2 * r][j] = c.re.clone();
                    mat[2 * r + 1][j] = c.im.clone();
                }
            }
        }
        let kernel = linalg::nullspace(&mat, cols);
        let kpolys: Vec<Poly> = kernel
            .iter()
            .map(|v| {
                let mut acc = Poly::zero(n);
                for (bp, c) in real_basis.iter().zip(v.iter()) {
                    if !c.is_zero() {
                        acc.add_assign(&bp.scale_rational(c));
                    }
                }
                acc
            })
            .collect();
        let r = kpolys.len();
        let gram: Matrix<Rational> =
            (0..r).map(|i| (0..r).map(|j| fischer_pairing(&kpolys[j], &kpolys[i]).re).collect()).collect();
        let rhs: Vec<Rational> = kpolys.iter().map(|k| fischer_pairing(pc, k).re).collect();
        let y = linalg::solve_unique(&gram, &rhs, r).map_err(|_| FischerError::SingularDecomposition { class })?;
        let mut proj = Poly::zero(n);
        for (k, c) in kpolys.iter().zip(y.iter()) {
            proj.add_assign(&k.scale_rational(c));
        }
        Ok(pc.sub(&proj))
    }
}

pub fn normalization_residual(
    p: &Poly,
    family: &FischerBasisFamily,
    mode: KernelMode,
) -> Result<NormalizationResidual, FischerError> {
    IteratedDivisionSpace::new(family, mode)?.residual(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;
    use proptest::prelude::*;

    fn z() -> Poly {
        Poly::z(1, 0)
    }
    fn zb() -> Poly {
        Poly::zb(1, 0)
    }
    fn c(re: i64, im: i64) -> ExactScalar {
        ExactScalar::from_ints(re, im)
    }

    #[test]
    fn pairing_examples() {
        assert_eq!(fischer_pairing(&z().mul(&z()), &z().mul(&z())), c(2, 0));
        assert_eq!(fischer_pairing(&z(), &zb()), c(0, 0));
        let zzx = z().mul(&zb()).mul(&Poly::x(1));
        assert_eq!(fischer_pairing(&zzx, &zzx), c(1, 0));
        assert_eq!(fischer_pairing(&z().scale(&c(0, 1)), &z()), c(0, 1));
        assert_eq!(fischer_pairing(&z(), &z().scale(&c(0, 1))), c(0, -1));
    }

    #[test]
    fn adjoint_examples() {
        let zz = z().mul(&zb());
        assert_eq!(adjoint_apply(&AdjointOperator::new(zz.clone()), &zz.mul(&zz)), zz.scale(&c(4, 0)));
        assert!(adjoint_apply(&AdjointOperator::new(Poly::x(1)), &z().mul(&z())).is_zero());
        assert_eq!(adjoint_apply(&AdjointOperator::new(z().scale(&c(0, 1))), &z()), Poly::constant(1, c(0, -1)));
    }

    #[test]
    fn decomposition_examples() {
        let zz = z().mul(&zb());
        let g = Grading::plain();
        let (a, b) = fischer_decompose(&z().mul(&z()), &zz, g).unwrap();
        assert!(a.is_zero());
        assert_eq!(b, z().mul(&z()));
        let (a, b) = fischer_decompose(&zz.mul(&zz), &zz, g).unwrap();
        assert_eq!(a, zz);
        assert!(b.is_zero());
    }

    #[test]
    fn sphere_divisor_weight_two_slice() {
        let model = ModelSpec::hermitian(1, 0, 2).unwrap();
        let d = model_divisor(&model);
        let zz = z().mul(&zb());
        let (a, b) = fischer_decompose(&zz, &d, model.grading()).unwrap();
        // Slice of weight 0 for A is spanned by 1: A = a·1 with ⟨zz̄ - aD, D⟩ = 0, ⟨D, D⟩ = 2.
        assert_eq!(a, Poly::constant(1, ExactScalar::new(rat(0, 1), rat(-1, 2))));
        assert_eq!(b, zz.sub(&d.mul(&a)));
        assert!(adjoint_apply(&AdjointOperator::new(d), &b).is_zero());
    }

    #[test]
    fn weighted_divisor_without_additive_grading() {
        let model = ModelSpec::hermitian(1, 1, 3).unwrap();
        let d = model_divisor(&model);
        let zz = z().mul(&zb());
        let (a, b) = fischer_decompose_for(&zz, &d, &model, WeightPreset::BlockMinimal).unwrap();
        assert!(a.is_zero());
        assert_eq!(b, zz);
        assert!(matches!(
            fischer_decompose_for(&Poly::x(1), &d, &model, WeightPreset::BlockMinimal),
            Err(FischerError::NoPolynomialDecomposition { .. })
        ));
        let skew = Poly::x(1).add(&zz);
        assert_eq!(
            fischer_decompose_for(&zz, &skew, &model, WeightPreset::BlockMinimal).unwrap_err(),
            FischerError::DivisorNotHomogeneous { preset: WeightPreset::BlockMinimal }
        );
    }

    #[test]
    fn family_for_sphere() {
        let model = ModelSpec::hermitian(1, 0, 2).unwrap();
        let fam = build_basis_family(&model, 2, WeightPreset::BlockMinimal).unwrap();
        let labels: Vec<String> = fam.entries.iter().map(|e| e.label()).collect();
        assert_eq!(labels, vec!["B_[2]", "conj B_[2]", "B~_[1],l=1", "conj B~_[1],l=1"]);
        let b2 = &fam.entries[0].remainder;
        let pure_z: Vec<_> = b2.monomials().filter(|m| m.zb_degree() == 0 && m.ex() == 0).collect();
        assert_eq!(pure_z, vec![&Monomial::new(&[2], &[0], 0)]);
        for e in &fam.entries {
            let src = e.source(1);
            let d = if e.conjugate { model_divisor(&model).conjugate() } else { model_divisor(&model) };
            assert_eq!(d.mul(&e.quotient).add(&e.remainder), src);
        }
    }

    #[test]
    fn family_for_two_variables_up_to_five() {
        let model = ModelSpec::hermitian(2, 0, 2).unwrap();
        let fam = build_basis_family(&model, 5, WeightPreset::BlockMinimal).unwrap();
        // |I| = k: k+1 entries, (J, l): 2k entries; doubled by conjugation.
        let expected: usize = (2..=5).map(|k| 2 * ((k + 1) + 2 * k)).sum();
        assert_eq!(fam.len(), expected);
    }

    #[test]
    fn residual_examples() {
        let model = ModelSpec::hermitian(1, 0, 2).unwrap();
        let fam = build_basis_family(&model, 4, WeightPreset::BlockMinimal).unwrap();
        let r = normalization_residual(&Poly::zero(1), &fam, KernelMode::Symmetric).unwrap();
        assert!(r.residual.is_zero());
        assert!(r.certificate.is_empty());

        let zz = z().mul(&zb());
        let p = zz.mul(&zz);
        let r = normalization_residual(&p, &fam, KernelMode::Symmetric).unwrap();
        // z²z̄² = D·(stuff) + remainder; the weight-4 class fails the x* condition.
        assert!(!r.certificate.is_empty());
        assert!(r.residual.is_real());
        let again = normalization_residual(&p.sub(&r.residual), &fam, KernelMode::Symmetric).unwrap();
        assert!(again.certificate.is_empty(), "{:?}", again.certificate);
    }

    fn small_poly(n: usize) -> impl Strategy<Value = Poly> {
        let term = (
            proptest::collection::vec(0u32..3, n),
            proptest::collection::vec(0u32..3, n),
            0u32..3,
            -3i64..=3,
            -3i64..=3,
        );
        proptest::collection::vec(term, 0..5).prop_map(move |ts| {
            Poly::from_terms(n, ts.into_iter().map(|(a, b, e, re, im)| (Monomial::new(&a, &b, e), c(re, im))))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn adjointness(p in small_poly(2), q in small_poly(2), a in small_poly(2)) {
            let lhs = fischer_pairing(&q.mul(&a), &p);
            let rhs = fischer_pairing(&a, &adjoint_apply(&AdjointOperator::new(q), &p));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn pairing_positive(p in small_poly(2)) {
            let v = fischer_pairing(&p, &p);
            prop_assert!(v.im.is_zero());
            prop_assert_eq!(p.is_zero(), v.re.is_zero());
            prop_assert!(v.re >= rat(0, 1));
        }

        #[test]
        fn decomposition_exact(f in small_poly(2)) {
            let model = ModelSpec::hermitian(2, 0, 2).unwrap();
            let d = model_divisor(&model);
            let (a, b) = fischer_decompose(&f, &d, model.grading()).unwrap();
            prop_assert_eq!(d.mul(&a).add(&b), f);
            prop_assert!(adjoint_apply(&AdjointOperator::new(d), &b).is_zero());
        }
    }
}

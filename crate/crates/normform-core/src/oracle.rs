//! Dense brute-force Fischer decomposition, built only on polynomial arithmetic.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use thiserror::Error;

use crate::poly::{Grading, Monomial, Poly};
use crate::scalar::{int, ExactScalar, Rational};
use crate::weight::{weight, ModelSpec, WeightPreset};

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("divisor is zero")]
    ZeroDivisor,
    #[error("divisor is not homogeneous under block-minimal weights")]
    DivisorNotHomogeneous,
    #[error("pairing matrix on a component of size {size} is singular")]
    Singular { size: usize },
    #[error("no polynomial decomposition: B is not orthogonal to D·{monomial}")]
    NoDecomposition { monomial: String },
}

fn factorial_weight(m: &Monomial) -> Rational {
    let mut acc = int(1);
    for &e in m.ez().iter().chain(m.ezb().iter()) {
        for j in 2..=e as i64 {
            acc *= int(j);
        }
    }
    for j in 2..=m.ex() as i64 {
        acc *= int(j);
    }
    acc
}

fn pair(p: &Poly, q: &Poly) -> ExactScalar {
    let mut acc = ExactScalar::zero();
    for (m, a) in p.terms() {
        let b = q.coeff(m);
        if !b.is_zero() {
            acc += &(a * &b.conj()).scale(&factorial_weight(m));
        }
    }
    acc
}

fn times(d: &Poly, m: &Monomial) -> Poly {
    d.mul(&Poly::term(d.n(), m.clone(), ExactScalar::from_int(1)))
}

fn gauss_jordan(mut a: Vec<Vec<ExactScalar>>, mut b: Vec<ExactScalar>) -> Option<Vec<ExactScalar>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, p);
        b.swap(col, p);
        let inv = ExactScalar::from_int(1) / a[col][col].clone();
        for v in a[col].iter_mut() {
            *v = &*v * &inv;
        }
        b[col] = &b[col] * &inv;
        let pivot = a[col].clone();
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for (v, q) in a[r].iter_mut().zip(&pivot) {
                *v -= &(&f * q);
            }
            let t = &f * &b[col];
            b[r] -= &t;
        }
    }
    Some(b)
}

/// Monomials `m` with `m · t = target` for some monomial `t` of `d`.
fn quotients(target: &Monomial, d: &Poly) -> Vec<Monomial> {
    d.monomials().filter_map(|t| target.checked_div(t)).collect()
}

/// `(A, B)` with `f = D·A + B` and `B` Fischer-orthogonal to `D·C[z, z̄, x]`.
pub fn brute_force_decompose(f: &Poly, divisor: &Poly, model: &ModelSpec) -> Result<(Poly, Poly), OracleError> {
    let mut ws = divisor.monomials().map(|m| weight(m, model, WeightPreset::BlockMinimal).ok());
    let w0 = ws.next().ok_or(OracleError::ZeroDivisor)?;
    if w0.is_none() || ws.any(|w| w != w0) {
        return Err(OracleError::DivisorNotHomogeneous);
    }
    let g: Grading = model.grading();
    let n = f.n();
    let dmin = divisor.min_weight(&g).ok_or(OracleError::ZeroDivisor)?;
    let Some(top) = f.max_weight(&g) else {
        return Ok((Poly::zero(n), Poly::zero(n)));
    };
    let mut a = Poly::zero(n);
    if top >= dmin {
        let bound = top - dmin;
        let admissible = |m: &Monomial| m.weight(&g) <= bound;
        let mut unseen: BTreeSet<Monomial> = BTreeSet::new();
        for fm in f.monomials() {
            unseen.extend(quotients(fm, divisor).into_iter().filter(admissible));
        }
        while let Some(seed) = unseen.pop_first() {
            let mut comp = vec![seed.clone()];
            let mut members: BTreeSet<Monomial> = [seed].into_iter().collect();
            let mut i = 0;
            while i < comp.len() {
                let dm = times(divisor, &comp[i]);
                for target in dm.monomials() {
                    for nb in quotients(target, divisor) {
                        if admissible(&nb) && members.insert(nb.clone()) {
                            unseen.remove(&nb);
                            comp.push(nb);
                        }
                    }
                }
                i += 1;
            }
            let images: Vec<Poly> = comp.iter().map(|m| times(divisor, m)).collect();
            let gram: Vec<Vec<ExactScalar>> =
                images.iter().map(|di| images.iter().map(|dj| pair(dj, di)).collect()).collect();
            let rhs: Vec<ExactScalar> = images.iter().map(|di| pair(f, di)).collect();
            if rhs.iter().all(Zero::is_zero) {
                continue;
            }
            let size = comp.len();
            let sol = gauss_jordan(gram, rhs).ok_or(OracleError::Singular { size })?;
            for (m, c) in comp.into_iter().zip(sol) {
                a.add_term(m, &c);
            }
        }
    }
    let b = f.sub(&divisor.mul(&a));
    let mut tested: BTreeMap<Monomial, ()> = BTreeMap::new();
    for bm in b.monomials() {
        for m in quotients(bm, divisor) {
            if tested.insert(m.clone(), ()).is_none() && !pair(&b, &times(divisor, &m)).is_zero() {
                return Err(OracleError::NoDecomposition { monomial: format!("{m:?}") });
            }
        }
    }
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fischer::{fischer_decompose, model_divisor};
    use crate::poly::monomials_of_weight;

    #[test]
    fn zero_input() {
        let model = ModelSpec::hermitian(1, 0, 2).unwrap();
        let (a, b) = brute_force_decompose(&Poly::zero(1), &model_divisor(&model), &model).unwrap();
        assert!(a.is_zero() && b.is_zero());
    }

    #[test]
    fn rejects_inhomogeneous_divisor() {
        let model = ModelSpec::hermitian(1, 0, 2).unwrap();
        let d = Poly::x(1).add(&Poly::z(1, 0));
        assert_eq!(brute_force_decompose(&Poly::x(1), &d, &model), Err(OracleError::DivisorNotHomogeneous));
    }

    #[test]
    fn agrees_on_sphere_slice() {
        let model = ModelSpec::hermitian(1, 0, 2).unwrap();
        let d = model_divisor(&model);
        for w in 0..=6 {
            for m in monomials_of_weight(1, &model.grading(), w) {
                let f = Poly::term(1, m, ExactScalar::from_int(1));
                assert_eq!(brute_force_decompose(&f, &d, &model).unwrap(), fischer_decompose(&f, &d, model.grading()).unwrap());
            }
        }
    }

    #[test]
    fn no_decomposition_for_x_with_s_one() {
        let model = ModelSpec::hermitian(1, 1, 3).unwrap();
        let d = model_divisor(&model);
        assert!(matches!(brute_force_decompose(&Poly::x(1), &d, &model), Err(OracleError::NoDecomposition { .. })));
        let zz = Poly::z(1, 0).mul(&Poly::zb(1, 0));
        assert_eq!(brute_force_decompose(&zz, &d, &model).unwrap(), (Poly::zero(1), zz));
    }
}

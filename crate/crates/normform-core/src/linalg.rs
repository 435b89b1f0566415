//! Exact dense elimination over `Q` and `Q(i)`.

use crate::scalar::FieldElem;

pub type Matrix<T> = Vec<Vec<T>>;

#[derive(Clone, Debug, PartialEq)]
pub enum SolveError<T> {
    /// No solution; carries a left null vector `y` with `y·A = 0`, `y·b ≠ 0`.
    Inconsistent { cokernel: Vec<T> },
    /// Solutions are not unique; carries a nonzero kernel vector.
    NonUnique { kernel: Vec<T> },
}

/// Reduced row echelon form in place; returns pivot columns.
pub fn rref<T: FieldElem>(m: &mut Matrix<T>, ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..ncols {
        if row == m.len() {
            break;
        }
        let Some(p) = (row..m.len()).find(|&r| !m[r][col].fis_zero()) else {
            continue;
        };
        m.swap(row, p);
        let inv = T::fone().fdiv(&m[row][col]);
        for v in m[row].iter_mut().skip(col) {
            *v = v.fmul(&inv);
        }
        let pivot_row = m[row].clone();
        for (r, other) in m.iter_mut().enumerate() {
            if r == row || other[col].fis_zero() {
                continue;
            }
            let f = other[col].clone();
            for (c, pv) in pivot_row.iter().enumerate().skip(col) {
                if !pv.fis_zero() {
                    other[c] = other[c].fsub(&f.fmul(pv));
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    pivots
}

pub fn rank<T: FieldElem>(m: &Matrix<T>, ncols: usize) -> usize {
    let mut a = m.clone();
    rref(&mut a, ncols).len()
}

/// Basis of `{v : A v = 0}`.
pub fn nullspace<T: FieldElem>(m: &Matrix<T>, ncols: usize) -> Vec<Vec<T>> {
    let mut a = m.clone();
    let pivots = rref(&mut a, ncols);
    let mut basis = Vec::new();
    for free in (0..ncols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![T::fzero(); ncols];
        v[free] = T::fone();
        for (r, &pc) in pivots.iter().enumerate() {
            v[pc] = a[r][free].fneg();
        }
        basis.push(v);
    }
    basis
}

pub fn transpose<T: FieldElem>(m: &Matrix<T>, ncols: usize) -> Matrix<T> {
    (0..ncols).map(|c| m.iter().map(|row| row[c].clone()).collect()).collect()
}

/// Unique solution of `A x = b`, or a witness for why there is none.
pub fn solve_unique<T: FieldElem>(a: &Matrix<T>, b: &[T], ncols: usize) -> Result<Vec<T>, SolveError<T>> {
    let kernel = nullspace(a, ncols);
    if let Some(k) = kernel.into_iter().next() {
        return Err(SolveError::NonUnique { kernel: k });
    }
    let mut aug: Matrix<T> = a
        .iter()
        .zip(b.iter())
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let pivots = rref(&mut aug, ncols + 1);
    if pivots.last() == Some(&ncols) {
        let at = transpose(a, ncols);
        let left = nullspace(&at, a.len());
        let witness = left
            .into_iter()
            .find(|y| !dot(y, b).fis_zero())
            .expect("inconsistent system has a separating left null vector");
        return Err(SolveError::Inconsistent { cokernel: witness });
    }
    let mut x = vec![T::fzero(); ncols];
    for (r, &pc) in pivots.iter().enumerate() {
        x[pc] = aug[r][ncols].clone();
    }
    Ok(x)
}

pub fn dot<T: FieldElem>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b.iter()).fold(T::fzero(), |acc, (x, y)| acc.fadd(&x.fmul(y)))
}

pub fn mat_vec<T: FieldElem>(a: &Matrix<T>, x: &[T]) -> Vec<T> {
    a.iter().map(|row| dot(row, x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat, ExactScalar, Rational};
    use proptest::prelude::*;

    fn q(rows: &[&[i64]]) -> Matrix<Rational> {
        rows.iter().map(|r| r.iter().map(|&v| int(v)).collect()).collect()
    }

    #[test]
    fn rank_and_kernel() {
        let a = q(&[&[1, 2, 3], &[2, 4, 6], &[1, 0, 1]]);
        assert_eq!(rank(&a, 3), 2);
        let k = nullspace(&a, 3);
        assert_eq!(k.len(), 1);
        assert!(mat_vec(&a, &k[0]).iter().all(|v| v.fis_zero()));
    }

    #[test]
    fn unique_solution() {
        let a = q(&[&[2, 1], &[1, 3], &[3, 4]]);
        let b = vec![int(3), int(5), int(8)];
        let x = solve_unique(&a, &b, 2).unwrap();
        assert_eq!(x, vec![rat(4, 5), rat(7, 5)]);
    }

    #[test]
    fn witnesses() {
        let a = q(&[&[1, 1], &[1, 1]]);
        match solve_unique(&a, &[int(1), int(2)], 2) {
            Err(SolveError::NonUnique { kernel }) => assert!(mat_vec(&a, &kernel).iter().all(|v| v.fis_zero())),
            other => panic!("unexpected {other:?}"),
        }
        let a = q(&[&[1, 0], &[0, 1], &[1, 1]]);
        let b = [int(1), int(1), int(3)];
        match solve_unique(&a, &b, 2) {
            Err(SolveError::Inconsistent { cokernel }) => {
                assert!(mat_vec(&transpose(&a, 2), &cokernel).iter().all(|v| v.fis_zero()));
                assert!(!dot(&cokernel, &b).fis_zero());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn complex_rank() {
        let i = ExactScalar::i();
        let one = ExactScalar::from_int(1);
        let a = vec![vec![one.clone(), i.clone()], vec![i.clone(), -&one]];
        assert_eq!(rank(&a, 2), 1);
    }

    proptest! {
        #[test]
        fn solve_recovers_planted_solution(entries in proptest::collection::vec(-5i64..=5, 12), x in proptest::collection::vec(-5i64..=5, 3)) {
            let a: Matrix<Rational> = entries.chunks(3).map(|r| r.iter().map(|&v| int(v)).collect()).collect();
            let x: Vec<Rational> = x.into_iter().map(int).collect();
            let b = mat_vec(&a, &x);
            match solve_unique(&a, &b, 3) {
                Ok(sol) => prop_assert_eq!(sol, x),
                Err(SolveError::NonUnique { kernel }) => prop_assert!(rank(&a, 3) < 3 && mat_vec(&a, &kernel).iter().all(|v| v.fis_zero())),
                Err(SolveError::Inconsistent { .. }) => prop_assert!(false, "planted system is consistent"),
            }
        }
    }
}

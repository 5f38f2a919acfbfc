//! Small dense determinant and adjugate kernels for Slater matrices.

use ndarray::{Array2, ArrayView2};

use crate::scalar::Scalar;

/// LU factorization with partial pivoting, in place. Returns the
/// determinant and the row permutation, or a zero determinant when a pivot
/// vanishes exactly.
fn lu_in_place<T: Scalar>(a: &mut Array2<T>) -> (T, Vec<usize>) {
    let n = a.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut det = T::one();
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&p, &q| a[[p, k]].abs().partial_cmp(&a[[q, k]].abs()).unwrap())
            .unwrap();
        if a[[pivot, k]] == T::zero() {
            return (T::zero(), perm);
        }
        if pivot != k {
            for c in 0..n {
                a.swap([pivot, c], [k, c]);
            }
            perm.swap(pivot, k);
            det = -det;
        }
        let d = a[[k, k]];
        det *= d;
        for r in k + 1..n {
            let f = a[[r, k]] / d;
            a[[r, k]] = f;
            for c in k + 1..n {
                let update = f * a[[k, c]];
                a[[r, c]] -= update;
            }
        }
    }
    (det, perm)
}

pub fn determinant<T: Scalar>(m: ArrayView2<T>) -> T {
    let mut a = m.to_owned();
    lu_in_place(&mut a).0
}

/// Inverse from a nonsingular LU factorization.
fn lu_inverse<T: Scalar>(lu: &Array2<T>, perm: &[usize]) -> Array2<T> {
    let n = lu.nrows();
    let mut inv = Array2::zeros((n, n));
    for col in 0..n {
        // Solve L U x = P e_col.
        let mut x: Vec<T> = perm.iter().map(|&p| if p == col { T::one() } else { T::zero() }).collect();
        for r in 0..n {
            for c in 0..r {
                let t = lu[[r, c]] * x[c];
                x[r] -= t;
            }
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                let t = lu[[r, c]] * x[c];
                x[r] -= t;
            }
            x[r] /= lu[[r, r]];
        }
        for r in 0..n {
            inv[[r, col]] = x[r];
        }
    }
    inv
}

/// Determinant and adjugate `adj(M)`, with `d det / d M_ab = adj(M)_ba`.
///
/// Uses `det * M^-1` unless `|det|` is below `sqrt(eps)` times the
/// Hadamard bound, in which case every cofactor is evaluated from its minor.
pub fn det_and_adjugate<T: Scalar>(m: ArrayView2<T>) -> (T, Array2<T>) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    match n {
        0 => return (T::one(), Array2::zeros((0, 0))),
        1 => return (m[[0, 0]], Array2::from_elem((1, 1), T::one())),
        _ => {}
    }
    let mut lu = m.to_owned();
    let (det, perm) = lu_in_place(&mut lu);
    let hadamard = m
        .columns()
        .into_iter()
        .map(|c| c.dot(&c).sqrt())
        .fold(T::one(), |acc, x| acc * x);
    if det.abs() > T::epsilon().sqrt() * hadamard {
        let inv = lu_inverse(&lu, &perm);
        return (det, inv * det);
    }
    (det, cofactor_adjugate(m))
}

fn cofactor_adjugate<T: Scalar>(m: ArrayView2<T>) -> Array2<T> {
    let n = m.nrows();
    let mut adj = Array2::zeros((n, n));
    let mut minor = Array2::zeros((n - 1, n - 1));
    for i in 0..n {
        for j in 0..n {
            for (r, src_r) in (0..n).filter(|&r| r != i).enumerate() {
                for (c, src_c) in (0..n).filter(|&c| c != j).enumerate() {
                    minor[[r, c]] = m[[src_r, src_c]];
                }
            }
            let cofactor = lu_in_place(&mut minor.clone()).0;
            adj[[j, i]] = if (i + j) % 2 == 0 { cofactor } else { -cofactor };
        }
    }
    adj
}

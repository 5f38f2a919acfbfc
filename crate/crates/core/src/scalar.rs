//! Floating-point abstraction shared by every numerical module.
//!
//! Dense symmetric eigenproblems are solved with `faer`, so only `f32` and
//! `f64` implement [`Scalar`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};
use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Real floating-point type usable throughout the crate.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + ScalarOperand
    + LinalgScalar
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lowest eigenpair of the symmetric `dim x dim` matrix stored column-major
    /// in `matrix`. Only the lower triangle is read.
    fn lowest_eigenpair(dim: usize, matrix: &[Self]) -> Result<(Self, Vec<Self>)>;

    /// All eigenpairs in ascending order. Eigenvectors are returned
    /// column-major: vector `k` occupies `vectors[k * dim..(k + 1) * dim]`.
    fn symmetric_eigen(dim: usize, matrix: &[Self]) -> Result<(Vec<Self>, Vec<Self>)>;

    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    /// Tolerance used for "is normalized" style contract checks.
    fn norm_tolerance() -> Self {
        Self::of(1e-10).max(Self::epsilon() * Self::of(1e3))
    }
}

fn check_buffer<T>(dim: usize, matrix: &[T]) -> Result<()> {
    if dim == 0 {
        return Err(Error::DegenerateInput("empty matrix".into()));
    }
    if matrix.len() != dim * dim {
        return Err(Error::ContractViolation(format!(
            "matrix buffer has {} entries, expected {}",
            matrix.len(),
            dim * dim
        )));
    }
    Ok(())
}

macro_rules! impl_scalar {
    ($ty:ty) => {
        impl Scalar for $ty {
            /// Eigenvalues only, then inverse iteration on the Cholesky factor
            /// of `H - (E0 - delta) I`. Falls back to the full decomposition if
            /// the shifted matrix is not numerically positive definite.
            fn lowest_eigenpair(dim: usize, matrix: &[Self]) -> Result<(Self, Vec<Self>)> {
                check_buffer(dim, matrix)?;
                let a = MatRef::from_column_major_slice(matrix, dim, dim);
                let values = a
                    .self_adjoint_eigenvalues(Side::Lower)
                    .map_err(|e| Error::Linalg(format!("symmetric eigensolver failed: {e:?}")))?;
                let e0 = values[0];
                let delta = Self::epsilon().sqrt() * e0.abs().max(1.0);
                let shifted = Mat::from_fn(dim, dim, |i, j| {
                    let x = a[(i.max(j), i.min(j))];
                    if i == j { x - (e0 - delta) } else { x }
                });
                let Ok(llt) = shifted.llt(Side::Lower) else {
                    let (values, mut vectors) = Self::symmetric_eigen(dim, matrix)?;
                    vectors.truncate(dim);
                    return Ok((values[0], vectors));
                };
                let mut v = Mat::<Self>::from_fn(dim, 1, |i, _| 1.0 + (i as Self * 0.618_034).fract() * 1e-3);
                for _ in 0..3 {
                    llt.solve_in_place(v.as_mut());
                    let norm = (0..dim).map(|i| v[(i, 0)] * v[(i, 0)]).sum::<Self>().sqrt();
                    for i in 0..dim {
                        v[(i, 0)] /= norm;
                    }
                }
                Ok((e0, (0..dim).map(|i| v[(i, 0)]).collect()))
            }

            fn symmetric_eigen(dim: usize, matrix: &[Self]) -> Result<(Vec<Self>, Vec<Self>)> {
                check_buffer(dim, matrix)?;
                let a = MatRef::from_column_major_slice(matrix, dim, dim);
                let eig = a
                    .self_adjoint_eigen(Side::Lower)
                    .map_err(|e| Error::Linalg(format!("symmetric eigensolver failed: {e:?}")))?;
                let values: Vec<Self> = (0..dim).map(|k| eig.S()[k]).collect();
                let u = eig.U();
                let mut vectors = Vec::with_capacity(dim * dim);
                for k in 0..dim {
                    vectors.extend((0..dim).map(|i| u[(i, k)]));
                }
                Ok((values, vectors))
            }
        }
    };
}

impl_scalar!(f64);
impl_scalar!(f32);

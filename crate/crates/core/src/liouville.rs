//! Liouville-space machinery: the vectorization convention and
//! superoperators acting on vectorized density matrices.
//!
//! The stacking order is row-major: |i⟩⟨j| occupies slot `i·d + j`. Under
//! this convention `vec(A X B) = (A ⊗ Bᵀ) vec(X)`, which fixes the matrix
//! representation of every superoperator in the crate.

use crate::error::{Error, Result};
use crate::expm::matrix_exponential;
use crate::scalar::{cnorm, cr, CMatrix, CVector, Real};

/// Stacks a square matrix row-major into a length-d² Liouville vector.
pub fn vectorize<T: Real>(a: &CMatrix<T>) -> Result<CVector<T>> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::NonSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let mut v = CVector::<T>::zeros(d * d);
    for i in 0..d {
        for j in 0..d {
            v[i * d + j] = a[(i, j)];
        }
    }
    Ok(v)
}

/// Inverse of [`vectorize`].
pub fn devectorize<T: Real>(v: &CVector<T>, dim: usize) -> Result<CMatrix<T>> {
    if v.len() != dim * dim {
        return Err(Error::DimensionMismatch {
            left: v.len(),
            right: dim * dim,
        });
    }
    let mut m = CMatrix::<T>::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            m[(i, j)] = v[i * dim + j];
        }
    }
    Ok(m)
}

/// A linear map on vectorized operators, stored dense as a d²×d² matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator<T: Real> {
    dim: usize,
    mat: CMatrix<T>,
}

impl<T: Real> Superoperator<T> {
    pub fn from_matrix(dim: usize, mat: CMatrix<T>) -> Result<Self> {
        if mat.nrows() != dim * dim || mat.ncols() != dim * dim {
            return Err(Error::DimensionMismatch {
                left: mat.nrows(),
                right: dim * dim,
            });
        }
        Ok(Self { dim, mat })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            mat: CMatrix::<T>::zeros(dim * dim, dim * dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            mat: CMatrix::<T>::identity(dim * dim, dim * dim),
        }
    }

    /// Hilbert-space dimension d (the matrix is d²×d²).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.mat
    }

    pub fn matrix_mut(&mut self) -> &mut CMatrix<T> {
        &mut self.mat
    }

    pub fn apply_vec(&self, v: &CVector<T>) -> CVector<T> {
        &self.mat * v
    }

    /// Applies the map to an operator (vectorize, multiply, devectorize).
    pub fn apply(&self, x: &CMatrix<T>) -> Result<CMatrix<T>> {
        let v = vectorize(x)?;
        devectorize(&self.apply_vec(&v), self.dim)
    }

    /// Composition: `self` after `other` (matrix product).
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(Self {
            dim: self.dim,
            mat: &self.mat * &other.mat,
        })
    }

    /// `exp(scale · self)`.
    pub fn exp(&self, scale: T) -> Result<Self> {
        Ok(Self {
            dim: self.dim,
            mat: matrix_exponential(&(self.mat.clone() * cr(scale)))?,
        })
    }

    /// Max entry magnitude, used for convergence and sanity checks.
    pub fn max_norm(&self) -> T {
        self.mat.iter().fold(T::zero(), |a, z| a.max(cnorm(*z)))
    }

    /// Norm of the left action on the vectorized identity, i.e. how far the
    /// map is from being trace-annihilating: `Σ_{α∈diag} M_{αβ}` over β.
    pub fn trace_action_norm(&self) -> T {
        let d = self.dim;
        let mut worst = T::zero();
        for beta in 0..d * d {
            let mut acc = num_complex::Complex::new(T::zero(), T::zero());
            for i in 0..d {
                acc += self.mat[(i * d + i, beta)];
            }
            worst = worst.max(cnorm(acc));
        }
        worst
    }
}

impl<T: Real> std::ops::Add for Superoperator<T> {
    type Output = Superoperator<T>;
    fn add(self, rhs: Self) -> Self {
        assert_eq!(self.dim, rhs.dim);
        Self {
            dim: self.dim,
            mat: self.mat + rhs.mat,
        }
    }
}

impl<T: Real> std::ops::Mul<T> for Superoperator<T> {
    type Output = Superoperator<T>;
    fn mul(self, rhs: T) -> Self {
        Self {
            dim: self.dim,
            mat: self.mat * cr(rhs),
        }
    }
}

/// Superoperator of left multiplication: X ↦ A X.
pub fn left_mult_superop<T: Real>(a: &CMatrix<T>) -> Superoperator<T> {
    let d = a.nrows();
    let id = CMatrix::<T>::identity(d, d);
    Superoperator {
        dim: d,
        mat: a.kronecker(&id),
    }
}

/// Superoperator of right multiplication: X ↦ X B.
pub fn right_mult_superop<T: Real>(b: &CMatrix<T>) -> Superoperator<T> {
    let d = b.nrows();
    let id = CMatrix::<T>::identity(d, d);
    Superoperator {
        dim: d,
        mat: id.kronecker(&b.transpose()),
    }
}

/// Commutator superoperator A^×: X ↦ A X − X A.
pub fn commutator_superop<T: Real>(a: &CMatrix<T>) -> Result<Superoperator<T>> {
    if a.nrows() != a.ncols() {
        return Err(Error::NonSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let d = a.nrows();
    let id = CMatrix::<T>::identity(d, d);
    Ok(Superoperator {
        dim: d,
        mat: a.kronecker(&id) - id.kronecker(&a.transpose()),
    })
}

/// Anticommutator superoperator A^∘: X ↦ A X + X A.
pub fn anticommutator_superop<T: Real>(a: &CMatrix<T>) -> Result<Superoperator<T>> {
    if a.nrows() != a.ncols() {
        return Err(Error::NonSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let d = a.nrows();
    let id = CMatrix::<T>::identity(d, d);
    Ok(Superoperator {
        dim: d,
        mat: a.kronecker(&id) + id.kronecker(&a.transpose()),
    })
}

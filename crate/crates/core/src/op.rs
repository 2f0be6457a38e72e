//! Operators on the system Hilbert space: Hermitian operators, density
//! matrices, the energy eigenbasis, and the trace distance.
//!
//! Hamiltonian entries are in rad/ps throughout; coupling operators are
//! dimensionless.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{cnorm, cr, CMatrix, Real, C};

/// Relative tolerance for accepting an operator as Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Max Hermiticity / trace deviation tolerated in a density matrix.
pub const DENSITY_TOL: f64 = 1e-10;

/// Eigenvalues of a density matrix may dip below zero by this much before
/// construction fails outright.
pub const POSITIVITY_HARD_TOL: f64 = 1e-3;

/// Below this (but above the hard bound) a state is flagged, not rejected.
pub const POSITIVITY_SOFT_TOL: f64 = 1e-9;

fn max_abs<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(cnorm(*z)))
}

/// Largest deviation of `m` from its conjugate transpose.
pub fn hermiticity_deviation<T: Real>(m: &CMatrix<T>) -> T {
    let d = m.nrows();
    let mut dev = T::zero();
    for i in 0..d {
        for j in i..d {
            dev = dev.max(cnorm(m[(i, j)] - m[(j, i)].conj()));
        }
    }
    dev
}

/// A validated Hermitian operator.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator<T: Real> {
    entries: CMatrix<T>,
}

impl<T: Real> HermitianOperator<T> {
    /// Validates squareness and Hermiticity (relative to the largest entry).
    pub fn new(entries: CMatrix<T>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::NonSquare {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        let scale = max_abs(&entries).max(T::one());
        let dev = hermiticity_deviation(&entries);
        if dev > T::of(HERMITICITY_TOL) * scale {
            return Err(Error::NotHermitian {
                max_dev: dev.as_f64(),
            });
        }
        Ok(Self { entries })
    }

    /// Builds from real entries without a tolerance check (symmetrized input).
    pub fn from_real_symmetric(entries: &[Vec<T>]) -> Result<Self> {
        let d = entries.len();
        let m = CMatrix::<T>::from_fn(d, d, |i, j| cr((entries[i][j] + entries[j][i]) / T::of(2.0)));
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.entries
    }
}

/// A validated density matrix (Hermitian, unit trace, positive up to noise).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real> {
    entries: CMatrix<T>,
    /// Set when eigenvalues dip below the soft positivity bound; perturbative
    /// propagation may transiently produce such states.
    positivity_flagged: bool,
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(entries: CMatrix<T>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::NonSquare {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        let dev = hermiticity_deviation(&entries);
        if dev > T::of(DENSITY_TOL) {
            return Err(Error::InvalidState(format!(
                "not Hermitian within {DENSITY_TOL}: deviation {}",
                dev.as_f64()
            )));
        }
        let tr: C<T> = entries.trace();
        if cnorm(tr - cr(T::one())) > T::of(DENSITY_TOL) {
            return Err(Error::InvalidState(format!(
                "trace {} not 1 within {DENSITY_TOL}",
                tr.re.as_f64()
            )));
        }
        let eigs = hermitian_eigenvalues(&entries);
        let min_eig = eigs.iter().fold(T::zero(), |a, &b| a.min(b));
        if min_eig < -T::of(POSITIVITY_HARD_TOL) {
            return Err(Error::InvalidState(format!(
                "eigenvalue {} below -{POSITIVITY_HARD_TOL}",
                min_eig.as_f64()
            )));
        }
        Ok(Self {
            positivity_flagged: min_eig < -T::of(POSITIVITY_SOFT_TOL),
            entries,
        })
    }

    /// Accepts a propagated state: Hermitian and unit-trace within `tol`,
    /// with negativity flagged but never rejected (perturbative generators
    /// can push states outside the positive cone, which is itself a
    /// diagnostic the caller may want to observe).
    pub fn from_propagation(entries: CMatrix<T>, tol: T) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::NonSquare {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        let dev = hermiticity_deviation(&entries);
        if dev > tol {
            return Err(Error::InvalidState(format!(
                "propagated state not Hermitian within {}: deviation {}",
                tol.as_f64(),
                dev.as_f64()
            )));
        }
        let tr: C<T> = entries.trace();
        if cnorm(tr - cr(T::one())) > tol {
            return Err(Error::InvalidState(format!(
                "propagated state trace {} not 1 within {}",
                tr.re.as_f64(),
                tol.as_f64()
            )));
        }
        let eigs = hermitian_eigenvalues(&entries);
        let min_eig = eigs.iter().fold(T::zero(), |a, &b| a.min(b));
        Ok(Self {
            positivity_flagged: min_eig < -T::of(POSITIVITY_SOFT_TOL),
            entries,
        })
    }

    /// The pure state |site⟩⟨site|.
    pub fn pure_site(dim: usize, site: usize) -> Result<Self> {
        if site >= dim {
            return Err(Error::InvalidParameter(format!(
                "site {site} out of range for dimension {dim}"
            )));
        }
        let mut m = CMatrix::<T>::zeros(dim, dim);
        m[(site, site)] = cr(T::one());
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.entries
    }

    pub fn positivity_flagged(&self) -> bool {
        self.positivity_flagged
    }
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues<T: Real>(m: &CMatrix<T>) -> Vec<T> {
    let eig = m.clone().symmetric_eigen();
    let mut vals: Vec<T> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

/// Energy eigenbasis of a system Hamiltonian: ascending eigenvalues ε_i
/// (rad/ps), unitary eigenvector matrix, and the transition frequency
/// matrix Δ_ij = ε_i − ε_j.
#[derive(Debug, Clone)]
pub struct EnergyBasis<T: Real> {
    eigenvalues: Vec<T>,
    vectors: CMatrix<T>,
}

impl<T: Real> EnergyBasis<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    /// Unitary matrix whose columns are the eigenvectors |i⟩.
    pub fn vectors(&self) -> &CMatrix<T> {
        &self.vectors
    }

    /// Transition frequency ε_i − ε_j.
    pub fn delta(&self, i: usize, j: usize) -> T {
        self.eigenvalues[i] - self.eigenvalues[j]
    }

    /// Transforms a site-basis operator into the eigenbasis: U† A U.
    pub fn to_eigenbasis(&self, a: &CMatrix<T>) -> CMatrix<T> {
        self.vectors.adjoint() * a * &self.vectors
    }

    /// Transforms an eigenbasis operator back to the site basis: U A U†.
    pub fn from_eigenbasis(&self, a: &CMatrix<T>) -> CMatrix<T> {
        &self.vectors * a * self.vectors.adjoint()
    }

    /// Smallest gap |ε_i − ε_j| over distinct pairs.
    pub fn min_gap(&self) -> T {
        let d = self.dim();
        let mut gap = T::of(f64::INFINITY);
        for i in 0..d {
            for j in (i + 1)..d {
                gap = gap.min((self.eigenvalues[i] - self.eigenvalues[j]).abs());
            }
        }
        gap
    }
}

/// Diagonalizes a Hermitian operator with ascending eigenvalues and a
/// deterministic phase convention: the largest-magnitude component of each
/// eigenvector is made real positive.
pub fn eigendecompose<T: Real>(h: &HermitianOperator<T>) -> EnergyBasis<T> {
    let d = h.dim();
    let eig = h.matrix().clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());

    let mut vectors = CMatrix::<T>::zeros(d, d);
    let mut eigenvalues = Vec::with_capacity(d);
    for (col, &src) in order.iter().enumerate() {
        eigenvalues.push(eig.eigenvalues[src]);
        let v = eig.eigenvectors.column(src);
        // phase fix on the largest-magnitude component
        let mut best = 0;
        let mut best_mag = T::zero();
        for (k, z) in v.iter().enumerate() {
            if cnorm(*z) > best_mag {
                best_mag = cnorm(*z);
                best = k;
            }
        }
        let phase = if best_mag > T::zero() {
            v[best].conj() / cr(best_mag)
        } else {
            cr(T::one())
        };
        for k in 0..d {
            vectors[(k, col)] = v[k] * phase;
        }
    }
    EnergyBasis {
        eigenvalues,
        vectors,
    }
}

/// Trace distance `(1/2) Σ_i |λ_i|` over the eigenvalues of ρ₁ − ρ₂.
pub fn trace_distance<T: Real>(rho1: &CMatrix<T>, rho2: &CMatrix<T>) -> Result<T> {
    if rho1.nrows() != rho2.nrows() || rho1.ncols() != rho2.ncols() {
        return Err(Error::DimensionMismatch {
            left: rho1.nrows(),
            right: rho2.nrows(),
        });
    }
    let diff = rho1 - rho2;
    // Symmetrize away roundoff before the Hermitian eigensolve.
    let herm = (&diff + diff.adjoint()) * cr(T::of(0.5));
    let vals = hermitian_eigenvalues(&herm);
    Ok(vals.iter().map(|v| v.abs()).sum::<T>() / T::of(2.0))
}

/// σ_x, σ_y, σ_z and the identity as 2×2 complex matrices (test helpers and
/// model builders).
pub fn pauli<T: Real>() -> [CMatrix<T>; 4] {
    let o = T::zero();
    let l = T::one();
    let id = CMatrix::<T>::from_row_slice(2, 2, &[cr(l), cr(o), cr(o), cr(l)]);
    let sx = CMatrix::<T>::from_row_slice(2, 2, &[cr(o), cr(l), cr(l), cr(o)]);
    let sy = CMatrix::<T>::from_row_slice(
        2,
        2,
        &[
            cr(o),
            Complex::new(o, -l),
            Complex::new(o, l),
            cr(o),
        ],
    );
    let sz = CMatrix::<T>::from_row_slice(2, 2, &[cr(l), cr(o), cr(o), cr(-l)]);
    [id, sx, sy, sz]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use nalgebra::DVector;

    fn random_hermitian(d: usize, seed: u64) -> CMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = CMatrix::<f64>::from_fn(d, d, |_, _| {
            Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        (&raw + raw.adjoint()) * Complex::new(0.5, 0.0)
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::<f64>::from_row_slice(
            2,
            2,
            &[
                Complex::new(1.0, 0.0),
                Complex::new(0.5, 0.0),
                Complex::new(0.2, 0.0),
                Complex::new(1.0, 0.0),
            ],
        );
        assert!(HermitianOperator::new(m).is_err());
    }

    #[test]
    fn sigma_z_eigenvalues() {
        let [_, _, _, sz] = pauli::<f64>();
        let h = HermitianOperator::new(sz).unwrap();
        let basis = eigendecompose(&h);
        assert!((basis.eigenvalues()[0] + 1.0).abs() < 1e-14);
        assert!((basis.eigenvalues()[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sigma_x_half_delta() {
        // (Δ/2)σ_x with Δ = π/2 has eigenvalues ∓π/4
        let [_, sx, _, _] = pauli::<f64>();
        let h = HermitianOperator::new(sx * Complex::new(std::f64::consts::FRAC_PI_4, 0.0)).unwrap();
        let basis = eigendecompose(&h);
        assert!((basis.eigenvalues()[0] + std::f64::consts::FRAC_PI_4).abs() < 1e-14);
        assert!((basis.eigenvalues()[1] - std::f64::consts::FRAC_PI_4).abs() < 1e-14);
    }

    #[test]
    fn reconstruction_on_random_7x7() {
        let m = random_hermitian(7, 7);
        let h = HermitianOperator::new(m.clone()).unwrap();
        let basis = eigendecompose(&h);
        let mut diag = CMatrix::<f64>::zeros(7, 7);
        for i in 0..7 {
            diag[(i, i)] = Complex::new(basis.eigenvalues()[i], 0.0);
        }
        let rebuilt = basis.vectors() * diag * basis.vectors().adjoint();
        assert!((&rebuilt - &m).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);
        // unitarity
        let gram = basis.vectors().adjoint() * basis.vectors();
        let id = CMatrix::<f64>::identity(7, 7);
        assert!((&gram - &id).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);
    }

    #[test]
    fn eigendecompose_is_deterministic() {
        let m = random_hermitian(5, 42);
        let h = HermitianOperator::new(m).unwrap();
        let a = eigendecompose(&h);
        let b = eigendecompose(&h);
        assert_eq!(a.vectors(), b.vectors());
        assert_eq!(a.eigenvalues(), b.eigenvalues());
    }

    #[test]
    fn trace_distance_examples() {
        let p0 = DensityMatrix::<f64>::pure_site(2, 0).unwrap();
        let p1 = DensityMatrix::<f64>::pure_site(2, 1).unwrap();
        assert!((trace_distance(p0.matrix(), p1.matrix()).unwrap() - 1.0).abs() < 1e-14);
        assert!(trace_distance(p0.matrix(), p0.matrix()).unwrap().abs() < 1e-14);

        let a = CMatrix::<f64>::from_diagonal(&DVector::from_vec(vec![
            Complex::new(0.5, 0.0),
            Complex::new(0.5, 0.0),
        ]));
        let b = CMatrix::<f64>::from_diagonal(&DVector::from_vec(vec![
            Complex::new(0.75, 0.0),
            Complex::new(0.25, 0.0),
        ]));
        assert!((trace_distance(&a, &b).unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn trace_distance_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let mk = |rng: &mut ChaCha8Rng| {
                let m = {
                    let raw = CMatrix::<f64>::from_fn(3, 3, |_, _| {
                        Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    });
                    &raw * raw.adjoint()
                };
                let tr = m.trace().re;
                m * Complex::new(1.0 / tr, 0.0)
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            let c = mk(&mut rng);
            let tab = trace_distance(&a, &b).unwrap();
            let tbc = trace_distance(&b, &c).unwrap();
            let tac = trace_distance(&a, &c).unwrap();
            assert!(tac <= tab + tbc + 1e-10);
        }
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::<f64>::pure_site(3, 3).is_err());
        let bad = CMatrix::<f64>::identity(2, 2); // trace 2
        assert!(DensityMatrix::new(bad).is_err());
    }

    #[test]
    fn f32_smoke() {
        let [_, _, _, sz] = pauli::<f32>();
        let h = HermitianOperator::new(sz).unwrap();
        let basis = eigendecompose(&h);
        assert!((basis.eigenvalues()[0] + 1.0).abs() < 1e-6);
    }
}

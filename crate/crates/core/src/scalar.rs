//! Scalar abstraction: everything downstream is generic over a real field
//! `T` (`f32` or `f64`), with complex arithmetic built on `Complex<T>`.

use nalgebra::{ComplexField, DMatrix, DVector, RealField};
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar type for all numerics in this crate.
pub trait Real:
    RealField + FromPrimitive + ToPrimitive + Copy + Default + std::iter::Sum<Self>
{
    /// Lossy conversion from an `f64` literal (tolerances, tableau entries).
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("scalar conversion from f64")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar conversion to f64")
    }
}

impl<T> Real for T where
    T: RealField + FromPrimitive + ToPrimitive + Copy + Default + std::iter::Sum<T>
{
}

pub type C<T> = Complex<T>;
pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

/// `x + 0i`.
pub fn cr<T: Real>(x: T) -> C<T> {
    Complex::new(x, T::zero())
}

/// `0 + x·i`.
pub fn ci<T: Real>(x: T) -> C<T> {
    Complex::new(T::zero(), x)
}

/// |z| for a generic scalar (routes through `ComplexField`).
pub fn cnorm<T: Real>(z: C<T>) -> T {
    ComplexField::modulus(z)
}

/// e^z for a generic scalar.
pub fn cexp<T: Real>(z: C<T>) -> C<T> {
    ComplexField::exp(z)
}

/// `∫₀^t e^{z s} ds`, stable for small `|z t|`.
pub fn phi1<T: Real>(z: C<T>, t: T) -> C<T> {
    let zt = z * cr(t);
    if cnorm(zt) < T::of(1e-4) {
        // t (1 + zt/2 + (zt)²/6 + (zt)³/24 + (zt)⁴/120)
        let mut acc = cr(T::one());
        let mut term = cr(T::one());
        for k in 2..=5 {
            term = term * zt / cr(T::of(k as f64));
            acc += term;
        }
        acc * cr(t)
    } else {
        (cexp(zt) - cr(T::one())) / z
    }
}

/// `∫₀^t s e^{z s} ds`, stable for small `|z t|`.
pub fn phi2<T: Real>(z: C<T>, t: T) -> C<T> {
    let zt = z * cr(t);
    if cnorm(zt) < T::of(1e-3) {
        // t²/2 (1 + 2zt/3 + (zt)²/4 + (zt)³/15 + ...)  from Σ (k+1)(zt)^k/(k+2)!
        let mut acc = C::<T>::new(T::zero(), T::zero());
        let mut pow = cr(T::one());
        let mut fact = T::of(2.0); // (k+2)! running
        for k in 0..6u32 {
            if k > 0 {
                pow *= zt;
                fact *= T::of((k + 2) as f64);
            }
            acc += pow * cr(T::of((k + 1) as f64) / fact);
        }
        acc * cr(t * t)
    } else {
        (cexp(zt) * (zt - cr(T::one())) + cr(T::one())) / (z * z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi1_matches_direct_form() {
        let z = Complex::new(-0.7_f64, 1.3);
        let t = 2.1;
        let direct = ((z * t).exp() - Complex::new(1.0, 0.0)) / z;
        assert!((phi1(z, t) - direct).norm() < 1e-14);
    }

    #[test]
    fn phi1_small_argument_series() {
        let z = Complex::new(1e-9_f64, -2e-9);
        let t = 1.5;
        // ∫₀^t e^{zs} ds ≈ t + z t²/2
        let approx = Complex::new(t, 0.0) + z * t * t / 2.0;
        assert!((phi1(z, t) - approx).norm() < 1e-15);
    }

    #[test]
    fn phi2_matches_quadrature() {
        let z = Complex::new(-0.4_f64, 0.9);
        let t = 1.7;
        // trapezoid with fine grid
        let n = 200_000;
        let h = t / n as f64;
        let mut acc = Complex::new(0.0, 0.0);
        for k in 0..n {
            let s0 = k as f64 * h;
            let s1 = s0 + h;
            acc += (Complex::new(s0, 0.0) * (z * s0).exp()
                + Complex::new(s1, 0.0) * (z * s1).exp())
                * (h / 2.0);
        }
        assert!((phi2(z, t) - acc).norm() < 1e-9);
    }

    #[test]
    fn phi2_small_argument_series() {
        let z = Complex::new(2e-7_f64, 1e-7);
        let t = 0.9;
        // ∫₀^t s e^{zs} ds ≈ t²/2 + z t³/3
        let approx = Complex::new(t * t / 2.0, 0.0) + z * t * t * t / 3.0;
        assert!((phi2(z, t) - approx).norm() < 1e-14);
    }
}

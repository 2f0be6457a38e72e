//! Dense matrix exponential by scaling-and-squaring with diagonal Padé
//! approximants (Higham 2005).
//!
//! Contract: relative error ≤ 1e-10 (in f64) for matrices of norm up to
//! ~10³, which covers the influence-functional exponentials Θ₂(t) at long
//! times.

use nalgebra::LU;

use crate::error::{Error, Result};
use crate::scalar::{cnorm, cr, CMatrix, Real};

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn one_norm<T: Real>(a: &CMatrix<T>) -> T {
    let mut worst = T::zero();
    for j in 0..a.ncols() {
        let col: T = a.column(j).iter().map(|z| cnorm(*z)).sum();
        worst = worst.max(col);
    }
    worst
}

/// Solves (−U + V) X = (U + V) for the Padé ratio.
fn pade_solve<T: Real>(u: CMatrix<T>, v: CMatrix<T>) -> Result<CMatrix<T>> {
    let p = &u + &v;
    let q = &v - &u;
    let lu = LU::new(q);
    lu.solve(&p)
        .ok_or_else(|| Error::MatrixExponential("singular Padé denominator".into()))
}

/// Evaluates the order-m diagonal Padé approximant of exp(A) given the
/// odd/even coefficient split; `powers` holds [A², A⁴, A⁶] as available.
fn pade_low<T: Real>(a: &CMatrix<T>, powers: &[CMatrix<T>], b: &[f64]) -> Result<CMatrix<T>> {
    let n = a.nrows();
    let id = CMatrix::<T>::identity(n, n);
    let mut u_inner = &id * cr(T::of(b[1]));
    let mut v = &id * cr(T::of(b[0]));
    for (k, p) in powers.iter().enumerate() {
        let odd = b.get(2 * k + 3);
        let even = b.get(2 * k + 2);
        if let Some(&c) = even {
            v += p * cr(T::of(c));
        }
        if let Some(&c) = odd {
            u_inner += p * cr(T::of(c));
        }
    }
    let u = a * u_inner;
    pade_solve(u, v)
}

fn pade13<T: Real>(a: &CMatrix<T>, a2: &CMatrix<T>, a4: &CMatrix<T>, a6: &CMatrix<T>) -> Result<CMatrix<T>> {
    let n = a.nrows();
    let id = CMatrix::<T>::identity(n, n);
    let b = &B13;
    let w1 = a6 * cr(T::of(b[13])) + a4 * cr(T::of(b[11])) + a2 * cr(T::of(b[9]));
    let w2 = a6 * cr(T::of(b[7]))
        + a4 * cr(T::of(b[5]))
        + a2 * cr(T::of(b[3]))
        + &id * cr(T::of(b[1]));
    let u = a * (a6 * w1 + w2);
    let z1 = a6 * cr(T::of(b[12])) + a4 * cr(T::of(b[10])) + a2 * cr(T::of(b[8]));
    let v = a6 * z1
        + a6 * cr(T::of(b[6]))
        + a4 * cr(T::of(b[4]))
        + a2 * cr(T::of(b[2]))
        + &id * cr(T::of(b[0]));
    pade_solve(u, v)
}

/// exp(A) for a square complex matrix.
pub fn matrix_exponential<T: Real>(a: &CMatrix<T>) -> Result<CMatrix<T>> {
    if a.nrows() != a.ncols() {
        return Err(Error::NonSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::MatrixExponential("non-finite entry".into()));
    }
    let norm = one_norm(a).as_f64();
    let a2 = a * a;
    if norm <= THETA_3 {
        return pade_low(a, &[a2], &B3);
    }
    let a4 = &a2 * &a2;
    if norm <= THETA_5 {
        return pade_low(a, &[a2, a4], &B5);
    }
    let a6 = &a2 * &a4;
    if norm <= THETA_7 {
        return pade_low(a, &[a2, a4, a6], &B7);
    }
    if norm <= THETA_9 {
        let a8 = &a4 * &a4;
        return pade_low(a, &[a2, a4, a6, a8], &B9);
    }
    // scaling and squaring with Padé-13
    let s = ((norm / THETA_13).log2().ceil().max(0.0)) as u32;
    let scale = cr(T::of(0.5_f64.powi(s as i32)));
    let a_s = a * scale;
    let a2s = &a_s * &a_s;
    let a4s = &a2s * &a2s;
    let a6s = &a2s * &a4s;
    let mut x = pade13(&a_s, &a2s, &a4s, &a6s)?;
    for _ in 0..s {
        x = &x * &x;
    }
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::MatrixExponential("overflow during squaring".into()));
    }
    Ok(x)
}

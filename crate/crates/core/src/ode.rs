//! Adaptive Dormand–Prince 5(4) integration for complex-valued ODE systems,
//! with output delivered exactly on a caller-supplied time grid.
//!
//! The stepper controls the local error against mixed absolute/relative
//! tolerances and shortens steps to land on grid points, so no interpolation
//! error is introduced at the reported times.

use crate::error::{Error, Result};
use crate::scalar::{cnorm, cr, CVector, Real};

/// Tolerances and step-size limits for the adaptive integrator.
#[derive(Debug, Clone, Copy)]
pub struct StepperConfig<T: Real> {
    pub rtol: T,
    pub atol: T,
    /// Starting step size; shrunk automatically if too optimistic.
    pub initial_step: T,
    /// Hard cap on the number of accepted+rejected steps.
    pub max_steps: usize,
}

impl<T: Real> Default for StepperConfig<T> {
    fn default() -> Self {
        Self {
            rtol: T::of(1e-8),
            atol: T::of(1e-8),
            initial_step: T::of(1e-3),
            max_steps: 50_000_000,
        }
    }
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
// 5th-order weights coincide with the last row of A (FSAL).
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// RMS of the componentwise error scaled by `atol + rtol·max(|y|,|y_new|)`.
fn error_norm<T: Real>(
    err: &CVector<T>,
    y: &CVector<T>,
    y_new: &CVector<T>,
    cfg: &StepperConfig<T>,
) -> T {
    let n = err.len();
    if n == 0 {
        return T::zero();
    }
    let mut acc = T::zero();
    for i in 0..n {
        let scale = cfg.atol + cfg.rtol * cnorm(y[i]).max(cnorm(y_new[i]));
        let r = cnorm(err[i]) / scale;
        acc += r * r;
    }
    (acc / T::of(n as f64)).sqrt()
}

/// Integrates `y' = f(t, y)` from `grid[0]`, returning the state at every
/// grid point (the first entry is `y0` itself). The grid must be strictly
/// increasing.
pub fn integrate_to_grid<T, F>(
    mut f: F,
    y0: CVector<T>,
    grid: &[T],
    cfg: &StepperConfig<T>,
) -> Result<Vec<CVector<T>>>
where
    T: Real,
    F: FnMut(T, &CVector<T>) -> CVector<T>,
{
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    for w in grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidParameter(
                "time grid must be strictly increasing".into(),
            ));
        }
    }
    let mut out = Vec::with_capacity(grid.len());
    out.push(y0.clone());

    let mut t = grid[0];
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = cfg.initial_step.min(T::of(f64::INFINITY));
    if h <= T::zero() {
        return Err(Error::InvalidParameter("initial step must be positive".into()));
    }
    let t_end = *grid.last().unwrap();
    let min_step = (t_end - grid[0]).max(T::one()) * T::of(1e-14);
    let mut steps = 0usize;
    let mut next_out = 1usize;

    let mut ks: [CVector<T>; 7] = [
        k1.clone(),
        k1.clone(),
        k1.clone(),
        k1.clone(),
        k1.clone(),
        k1.clone(),
        k1.clone(),
    ];

    while next_out < grid.len() {
        steps += 1;
        if steps > cfg.max_steps {
            return Err(Error::StepUnderflow { t: t.as_f64() });
        }
        // shorten to hit the next output time exactly
        let mut hit_output = false;
        let mut h_try = h;
        if t + h_try >= grid[next_out] {
            h_try = grid[next_out] - t;
            hit_output = true;
        }
        if h_try < min_step {
            return Err(Error::StepUnderflow { t: t.as_f64() });
        }

        ks[0] = k1.clone();
        for stage in 0..6 {
            let mut arg = y.clone();
            for (j, kj) in ks.iter().take(stage + 1).enumerate() {
                let a = A[stage][j];
                if a != 0.0 {
                    arg += kj * cr(h_try * T::of(a));
                }
            }
            ks[stage + 1] = f(t + h_try * T::of(C[stage]), &arg);
        }
        let mut y_new = y.clone();
        let mut err = CVector::<T>::zeros(y.len());
        for (j, kj) in ks.iter().enumerate() {
            if B5[j] != 0.0 {
                y_new += kj * cr(h_try * T::of(B5[j]));
            }
            let db = B5[j] - B4[j];
            if db != 0.0 {
                err += kj * cr(h_try * T::of(db));
            }
        }
        let e = error_norm(&err, &y, &y_new, cfg);
        if e <= T::one() {
            t += h_try;
            k1 = ks[6].clone(); // FSAL
            y = y_new;
            if hit_output {
                out.push(y.clone());
                next_out += 1;
            }
        }
        // PI-free classic controller with safety factor and growth clamps
        let factor = if e > T::zero() {
            (T::of(0.9) * e.powf(T::of(-0.2))).clamp(T::of(0.2), T::of(5.0))
        } else {
            T::of(5.0)
        };
        h = (h_try * factor).max(min_step);
    }
    Ok(out)
}

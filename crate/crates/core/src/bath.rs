//! Bath physics: spectral densities, thermal response functions D(t) and
//! D1(t), reorganization energies, the Drude–Lorentz exponential-plus-delta
//! approximation, and fitting of sampled responses to exponential sums.
//!
//! Units: frequencies/rates in rad/ps, times in ps, temperatures in K,
//! response values in rad²/ps² (ħ = 1).

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cexp, cnorm, cr, Real, C};

/// Boltzmann constant over ħ, rad·ps⁻¹·K⁻¹.
pub const K_B: f64 = 0.130920;

/// Relative tolerance for bath quadratures.
const QUAD_REL_TOL: f64 = 1e-7;

/// Frequency-resolved system–bath coupling weight J(ω) ≥ 0.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralDensity<T: Real> {
    /// J(ω) = ηλ (ω/ω_c) e^{−ω²/ω_c²}.
    OhmicGaussianCutoff { eta: T, lambda: T, omega_c: T },
    /// J(ω) = (2/π) λγω / (ω² + γ²).
    DrudeLorentz { lambda: T, gamma: T },
    /// Linear interpolation between (ω, J) samples; zero outside the grid.
    Tabulated { samples: Vec<(T, T)> },
}

impl<T: Real> SpectralDensity<T> {
    /// Validates positivity constraints on the parameters.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::OhmicGaussianCutoff { eta, lambda, omega_c } => {
                if *eta < T::zero() || *lambda <= T::zero() || *omega_c <= T::zero() {
                    return Err(Error::InvalidParameter(
                        "Ohmic bath needs η ≥ 0, λ > 0, ω_c > 0".into(),
                    ));
                }
            }
            Self::DrudeLorentz { lambda, gamma } => {
                if *lambda <= T::zero() || *gamma <= T::zero() {
                    return Err(Error::InvalidParameter(
                        "Drude-Lorentz bath needs λ > 0, γ > 0".into(),
                    ));
                }
            }
            Self::Tabulated { samples } => {
                if samples.len() < 2 {
                    return Err(Error::InvalidParameter(
                        "tabulated spectral density needs at least 2 samples".into(),
                    ));
                }
                for w in samples.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(Error::InvalidParameter(
                            "tabulated frequencies must be strictly increasing".into(),
                        ));
                    }
                }
                if samples.iter().any(|&(w, j)| w < T::zero() || j < T::zero()) {
                    return Err(Error::InvalidParameter(
                        "tabulated samples must satisfy ω ≥ 0, J ≥ 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// J(ω), defined for ω ≥ 0.
    pub fn evaluate(&self, omega: T) -> Result<T> {
        if omega < T::zero() {
            return Err(Error::InvalidParameter(
                "spectral density evaluated at negative frequency".into(),
            ));
        }
        Ok(match self {
            Self::OhmicGaussianCutoff { eta, lambda, omega_c } => {
                let x = omega / *omega_c;
                *eta * *lambda * x * (-x * x).exp()
            }
            Self::DrudeLorentz { lambda, gamma } => {
                T::of(2.0 / std::f64::consts::PI) * *lambda * *gamma * omega
                    / (omega * omega + *gamma * *gamma)
            }
            Self::Tabulated { samples } => {
                let n = samples.len();
                if omega <= samples[0].0 {
                    // interpolate from the origin through the first sample
                    if samples[0].0 > T::zero() {
                        samples[0].1 * omega / samples[0].0
                    } else {
                        samples[0].1
                    }
                } else if omega >= samples[n - 1].0 {
                    T::zero()
                } else {
                    let k = samples.partition_point(|&(w, _)| w < omega).max(1);
                    let (w0, j0) = samples[k - 1];
                    let (w1, j1) = samples[k];
                    j0 + (j1 - j0) * (omega - w0) / (w1 - w0)
                }
            }
        })
    }

    /// A frequency beyond which J is negligible (or, for the slowly decaying
    /// Drude–Lorentz tail, a fixed deterministic truncation).
    fn cutoff(&self) -> T {
        match self {
            Self::OhmicGaussianCutoff { omega_c, .. } => *omega_c * T::of(7.0),
            Self::DrudeLorentz { gamma, .. } => *gamma * T::of(400.0),
            Self::Tabulated { samples } => samples.last().unwrap().0,
        }
    }
}

/// Bath temperature and the derived inverse temperature β = 1/(k_B T).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalParams<T: Real> {
    temperature_k: T,
    beta: T,
}

impl<T: Real> ThermalParams<T> {
    pub fn new(temperature_k: T) -> Result<Self> {
        if temperature_k <= T::zero() {
            return Err(Error::InvalidParameter("temperature must be positive".into()));
        }
        Ok(Self {
            temperature_k,
            beta: T::one() / (T::of(K_B) * temperature_k),
        })
    }

    pub fn temperature_k(&self) -> T {
        self.temperature_k
    }

    /// β in (rad/ps)⁻¹.
    pub fn beta(&self) -> T {
        self.beta
    }
}

/// coth(x) with the small-argument limit handled by the caller's integrand
/// structure (never evaluated at exactly 0 by the quadrature nodes).
fn coth<T: Real>(x: T) -> T {
    if x.abs() < T::of(1e-4) {
        // 1/x + x/3 − x³/45
        T::one() / x + x / T::of(3.0)
    } else {
        T::one() / x.tanh()
    }
}

// ---------------------------------------------------------------------------
// Gauss–Kronrod quadrature
// ---------------------------------------------------------------------------

// 15-point Kronrod nodes/weights on [-1, 1] with the embedded 7-point Gauss rule.
const GK_NODES: [f64; 15] = [
    -0.991455371120813,
    -0.949107912342759,
    -0.864864423359769,
    -0.741531185599394,
    -0.586087235467691,
    -0.405845151377397,
    -0.207784955007898,
    0.0,
    0.207784955007898,
    0.405845151377397,
    0.586087235467691,
    0.741531185599394,
    0.864864423359769,
    0.949107912342759,
    0.991455371120813,
];
const GK_WEIGHTS: [f64; 15] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
    0.204432940075298,
    0.190350578064785,
    0.169004726639267,
    0.140653259715525,
    0.104790010322250,
    0.063092092629979,
    0.022935322010529,
];
const G_WEIGHTS: [f64; 7] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
    0.381830050505119,
    0.279705391489277,
    0.129484966168870,
];

/// One G7/K15 panel: returns (kronrod, |kronrod − gauss|).
fn gk15<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let half = (b - a) / T::of(2.0);
    let mid = (a + b) / T::of(2.0);
    let mut k = T::zero();
    let mut g = T::zero();
    for (i, (&x, &wk)) in GK_NODES.iter().zip(GK_WEIGHTS.iter()).enumerate() {
        let v = f(mid + half * T::of(x));
        k += T::of(wk) * v;
        if i % 2 == 1 {
            g += T::of(G_WEIGHTS[i / 2]) * v;
        }
    }
    (k * half, ((k - g) * half).abs())
}

/// Adaptive bisection on [a, b] to relative tolerance `rel` (with an absolute
/// floor), deterministic for fixed inputs.
fn adaptive_quadrature<T: Real, F: Fn(T) -> T>(
    f: &F,
    a: T,
    b: T,
    rel: T,
    abs_floor: T,
) -> Result<T> {
    struct Panel<T> {
        a: T,
        b: T,
        val: T,
        err: T,
    }
    let (val, err) = gk15(f, a, b);
    let mut panels = vec![Panel { a, b, val, err }];
    for _ in 0..2000 {
        let total: T = panels.iter().map(|p| p.val).sum();
        let total_err: T = panels.iter().map(|p| p.err).sum();
        let bound = (rel * total.abs()).max(abs_floor);
        if total_err <= bound {
            return Ok(total);
        }
        // split the worst panel
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, T::zero()), |(bi, be), (i, p)| {
                if p.err > be {
                    (i, p.err)
                } else {
                    (bi, be)
                }
            });
        let p = panels.swap_remove(worst);
        let m = (p.a + p.b) / T::of(2.0);
        let (v1, e1) = gk15(f, p.a, m);
        let (v2, e2) = gk15(f, m, p.b);
        panels.push(Panel { a: p.a, b: m, val: v1, err: e1 });
        panels.push(Panel { a: m, b: p.b, val: v2, err: e2 });
    }
    let total_err: T = panels.iter().map(|p| p.err).sum();
    Err(Error::QuadratureNonConvergent {
        achieved: total_err.as_f64(),
        requested: rel.as_f64(),
    })
}

/// Integrates an oscillatory tail Σ_k ∫_{z_k}^{z_{k+1}} f dω over half-period
/// cells of the trigonometric factor, accelerating the alternating series by
/// iterated averaging of partial sums.
fn oscillatory_tail<T: Real, F: Fn(T) -> T>(f: &F, start: T, half_period: T, scale: T) -> Result<T> {
    const MAX_TERMS: usize = 120;
    let mut sums = Vec::with_capacity(MAX_TERMS);
    let mut acc = T::zero();
    let mut prev_extrap = T::zero();
    for k in 0..MAX_TERMS {
        let a = start + half_period * T::of(k as f64);
        let b = a + half_period;
        let (v, _) = gk15(f, a, b);
        acc += v;
        sums.push(acc);
        if k >= 4 {
            // iterated averaging (Euler transform on the partial sums)
            let mut row = sums.clone();
            while row.len() > 1 {
                row = row
                    .windows(2)
                    .map(|w| (w[0] + w[1]) / T::of(2.0))
                    .collect();
            }
            let extrap = row[0];
            if k > 5 && (extrap - prev_extrap).abs() <= T::of(QUAD_REL_TOL) * scale {
                return Ok(extrap);
            }
            prev_extrap = extrap;
        }
    }
    Ok(prev_extrap)
}

// ---------------------------------------------------------------------------
// Response functions
// ---------------------------------------------------------------------------

/// Reorganization energy λ = ∫₀^∞ J(ω)/ω dω, rad/ps.
pub fn reorganization_energy<T: Real>(j: &SpectralDensity<T>) -> Result<T> {
    j.validate()?;
    match j {
        SpectralDensity::OhmicGaussianCutoff { eta, lambda, .. } => {
            // ∫ ηλ/ω_c e^{−(ω/ω_c)²} dω = ηλ √π/2
            Ok(*eta * *lambda * T::of(std::f64::consts::PI.sqrt() / 2.0))
        }
        SpectralDensity::DrudeLorentz { lambda, .. } => Ok(*lambda),
        SpectralDensity::Tabulated { .. } => {
            let hi = j.cutoff();
            let f = |w: T| j.evaluate(w).unwrap_or_default() / w;
            adaptive_quadrature(&f, T::of(1e-12), hi, T::of(1e-8), T::of(1e-14))
        }
    }
}

/// D(t) = ∫₀^∞ J(ω) coth(βω/2) cos(ωt) dω, rad²/ps².
///
/// For the Drude–Lorentz family the integrand decays only like 1/ω, so the
/// non-oscillatory head uses a fixed deterministic truncation and the t > 0
/// oscillatory tail is summed over half-period cells with series acceleration.
pub fn correlation_real<T: Real>(
    j: &SpectralDensity<T>,
    th: &ThermalParams<T>,
    t: T,
) -> Result<T> {
    if t < T::zero() {
        return Err(Error::InvalidParameter("response time must be ≥ 0".into()));
    }
    j.validate()?;
    let beta = th.beta();
    let f = |w: T| j.evaluate(w).unwrap_or_default() * coth(beta * w / T::of(2.0)) * (w * t).cos();
    let hi = j.cutoff();
    let scale_f = |w: T| j.evaluate(w).unwrap_or_default() * coth(beta * w / T::of(2.0));
    // magnitude scale for absolute floors: crude positive-part estimate
    let (scale, _) = gk15(&scale_f, T::zero(), hi);
    let scale = scale.abs().max(T::of(1e-30));

    let slow_tail = matches!(j, SpectralDensity::DrudeLorentz { .. });
    if !slow_tail {
        return adaptive_quadrature(&f, T::zero(), hi, T::of(QUAD_REL_TOL), T::of(1e-12) * scale);
    }
    let half_period = T::of(std::f64::consts::PI) / t.max(T::of(1e-30));
    if t <= T::zero() || half_period >= hi {
        // effectively non-oscillatory over the truncated range
        return adaptive_quadrature(&f, T::zero(), hi, T::of(QUAD_REL_TOL), T::of(1e-12) * scale);
    }
    // head: up to the first cos zero beyond the bath's own scales
    let bath_scale = match j {
        SpectralDensity::DrudeLorentz { gamma, .. } => {
            (*gamma).max(T::one() / beta) * T::of(10.0)
        }
        _ => unreachable!(),
    };
    // first zero of cos(ωt) at or beyond bath_scale: ω = (π/2 + kπ)/t
    let k = ((bath_scale * t / T::of(std::f64::consts::PI) - T::of(0.5)).ceil())
        .max(T::zero());
    let z0 = (T::of(0.5) + k) * T::of(std::f64::consts::PI) / t;
    let head = adaptive_quadrature(&f, T::zero(), z0, T::of(QUAD_REL_TOL), T::of(1e-12) * scale)?;
    let tail = oscillatory_tail(&f, z0, half_period, scale)?;
    Ok(head + tail)
}

/// D1(t) = −∫₀^∞ J(ω) sin(ωt) dω, rad²/ps² (temperature independent).
pub fn correlation_imag<T: Real>(j: &SpectralDensity<T>, t: T) -> Result<T> {
    if t < T::zero() {
        return Err(Error::InvalidParameter("response time must be ≥ 0".into()));
    }
    j.validate()?;
    match j {
        SpectralDensity::DrudeLorentz { lambda, gamma } => {
            // contour integral: −λγ e^{−γt}
            Ok(-*lambda * *gamma * (-*gamma * t).exp())
        }
        _ => {
            let f = |w: T| -(j.evaluate(w).unwrap_or_default() * (w * t).sin());
            let hi = j.cutoff();
            let scale_f = |w: T| j.evaluate(w).unwrap_or_default();
            let (scale, _) = gk15(&scale_f, T::zero(), hi);
            adaptive_quadrature(
                &f,
                T::zero(),
                hi,
                T::of(QUAD_REL_TOL),
                T::of(1e-12) * scale.abs().max(T::of(1e-30)),
            )
        }
    }
}

// ---------------------------------------------------------------------------
// Exponential-sum representation
// ---------------------------------------------------------------------------

/// One decaying-exponential term c·e^{−μt}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm<T: Real> {
    /// Coefficient, rad²/ps².
    pub c: C<T>,
    /// Decay rate (Re μ > 0), rad/ps.
    pub mu: C<T>,
}

/// Bath response as exponential sums: D(t) = Σ c_k^R e^{−μ_k^R t} (+ a
/// δ(t)-weight consumed only by the generators/hierarchy), D1(t) = Σ c_k^I e^{−μ_k^I t}.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialSumResponse<T: Real> {
    pub real_terms: Vec<ExpTerm<T>>,
    pub imag_terms: Vec<ExpTerm<T>>,
    /// Coefficient of δ(t) inside D(t), rad²/ps.
    pub delta_weight: T,
}

impl<T: Real> ExponentialSumResponse<T> {
    /// Validates decay (Re μ > 0), δ-weight sign, and realness of the
    /// evaluated response over a probe grid.
    pub fn validate(&self) -> Result<()> {
        for term in self.real_terms.iter().chain(self.imag_terms.iter()) {
            if term.mu.re <= T::zero() {
                return Err(Error::InvalidParameter(format!(
                    "response term rate Re μ = {} must be positive",
                    term.mu.re.as_f64()
                )));
            }
        }
        if self.delta_weight < T::zero() {
            return Err(Error::InvalidParameter("delta weight must be ≥ 0".into()));
        }
        let slowest = self
            .real_terms
            .iter()
            .chain(self.imag_terms.iter())
            .map(|t| t.mu.re.as_f64())
            .fold(f64::INFINITY, f64::min);
        let t_max = if slowest.is_finite() { 5.0 / slowest } else { 1.0 };
        let peak = self
            .real_terms
            .iter()
            .map(|t| cnorm(t.c))
            .fold(T::zero(), |a, b| a.max(b))
            .max(
                self.imag_terms
                    .iter()
                    .map(|t| cnorm(t.c))
                    .fold(T::zero(), |a, b| a.max(b)),
            )
            .max(T::of(1e-30));
        for k in 0..=32 {
            let t = T::of(t_max * k as f64 / 32.0);
            let d_im: T = self
                .real_terms
                .iter()
                .map(|term| (term.c * cexp(-term.mu * cr(t))).im)
                .sum();
            let d1_im: T = self
                .imag_terms
                .iter()
                .map(|term| (term.c * cexp(-term.mu * cr(t))).im)
                .sum();
            if d_im.abs() > T::of(1e-9) * peak || d1_im.abs() > T::of(1e-9) * peak {
                return Err(Error::InvalidParameter(
                    "response evaluates to a complex value; terms must pair into a real signal"
                        .into(),
                ));
            }
        }
        Ok(())
    }

    /// (D(t), D1(t)) as real numbers; the δ-weight is excluded (it is a
    /// distributional part consumed by the generators and the hierarchy).
    pub fn evaluate(&self, t: T) -> (T, T) {
        let d: T = self
            .real_terms
            .iter()
            .map(|term| (term.c * cexp(-term.mu * cr(t))).re)
            .sum();
        let d1: T = self
            .imag_terms
            .iter()
            .map(|term| (term.c * cexp(-term.mu * cr(t))).re)
            .sum();
        (d, d1)
    }

    /// Scales the response by a real factor (coupling strength η enters the
    /// spectral density, hence the response, linearly).
    pub fn scaled(&self, factor: T) -> Self {
        let scale = |terms: &[ExpTerm<T>]| {
            terms
                .iter()
                .map(|t| ExpTerm {
                    c: t.c * cr(factor),
                    mu: t.mu,
                })
                .collect()
        };
        Self {
            real_terms: scale(&self.real_terms),
            imag_terms: scale(&self.imag_terms),
            delta_weight: self.delta_weight * factor,
        }
    }

    /// Slowest decay rate min Re μ over all terms (∞ if empty).
    pub fn slowest_rate(&self) -> T {
        self.real_terms
            .iter()
            .chain(self.imag_terms.iter())
            .map(|t| t.mu.re)
            .fold(T::of(f64::INFINITY), |a, b| a.min(b))
    }
}

// JSON shape with explicit {re, im} complex fields, independent of T.
#[derive(Serialize, Deserialize)]
struct JsonComplex {
    re: f64,
    im: f64,
}
#[derive(Serialize, Deserialize)]
struct JsonTerm {
    c: JsonComplex,
    mu: JsonComplex,
}
#[derive(Serialize, Deserialize)]
struct JsonResponse {
    real_terms: Vec<JsonTerm>,
    imag_terms: Vec<JsonTerm>,
    delta_weight: f64,
}

impl<T: Real> Serialize for ExponentialSumResponse<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let conv = |terms: &[ExpTerm<T>]| {
            terms
                .iter()
                .map(|t| JsonTerm {
                    c: JsonComplex {
                        re: t.c.re.as_f64(),
                        im: t.c.im.as_f64(),
                    },
                    mu: JsonComplex {
                        re: t.mu.re.as_f64(),
                        im: t.mu.im.as_f64(),
                    },
                })
                .collect()
        };
        JsonResponse {
            real_terms: conv(&self.real_terms),
            imag_terms: conv(&self.imag_terms),
            delta_weight: self.delta_weight.as_f64(),
        }
        .serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for ExponentialSumResponse<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = JsonResponse::deserialize(d)?;
        let conv = |terms: Vec<JsonTerm>| {
            terms
                .into_iter()
                .map(|t| ExpTerm {
                    c: Complex::new(T::of(t.c.re), T::of(t.c.im)),
                    mu: Complex::new(T::of(t.mu.re), T::of(t.mu.im)),
                })
                .collect()
        };
        Ok(Self {
            real_terms: conv(raw.real_terms),
            imag_terms: conv(raw.imag_terms),
            delta_weight: T::of(raw.delta_weight),
        })
    }
}

/// Drude–Lorentz response in the single-exponent-plus-delta approximation:
/// D(t) ≈ 2λk_BT(1 − 2γ²/((2πk_BT)² − γ²)) e^{−γt} + [8λk_BTγ/((2πk_BT)² − γ²)] δ(t),
/// D1(t) = −λγ e^{−γt} (exact).
pub fn drude_lorentz_response<T: Real>(
    lambda: T,
    gamma: T,
    th: &ThermalParams<T>,
) -> Result<ExponentialSumResponse<T>> {
    if lambda <= T::zero() || gamma <= T::zero() {
        return Err(Error::InvalidParameter("λ and γ must be positive".into()));
    }
    let kbt = T::of(K_B) * th.temperature_k();
    let nu1 = T::of(2.0 * std::f64::consts::PI) * kbt; // first Matsubara frequency
    let denom = nu1 * nu1 - gamma * gamma;
    if denom.abs() < T::of(1e-9) * nu1 * nu1 {
        return Err(Error::InvalidParameter(
            "parameters at the 2πk_BT = γ pole of the approximation".into(),
        ));
    }
    let c_real = T::of(2.0) * lambda * kbt * (T::one() - T::of(2.0) * gamma * gamma / denom);
    let delta_weight = T::of(8.0) * lambda * kbt * gamma / denom;
    let resp = ExponentialSumResponse {
        real_terms: vec![ExpTerm {
            c: cr(c_real),
            mu: cr(gamma),
        }],
        imag_terms: vec![ExpTerm {
            c: cr(-lambda * gamma),
            mu: cr(gamma),
        }],
        delta_weight,
    };
    resp.validate()?;
    Ok(resp)
}

/// Drude–Lorentz response as an explicit Matsubara expansion:
/// D(t) = λγ cot(βγ/2) e^{−γt} + Σ_{n=1}^{N} (4λγ/β) ν_n/(ν_n² − γ²) e^{−ν_n t},
/// with ν_n = 2πn/β, plus the truncated tail folded into the delta weight.
/// D1(t) = −λγ e^{−γt} exactly. Accurate for rates and correlation integrals
/// to the truncation level; pair with large `n_terms` (≥ 40) for 1e-4 work.
pub fn drude_lorentz_matsubara_response<T: Real>(
    lambda: T,
    gamma: T,
    th: &ThermalParams<T>,
    n_terms: usize,
) -> Result<ExponentialSumResponse<T>> {
    if lambda <= T::zero() || gamma <= T::zero() {
        return Err(Error::InvalidParameter("λ and γ must be positive".into()));
    }
    let beta = th.beta();
    let x = beta * gamma / T::of(2.0);
    // cot has poles at multiples of π (γ = ν_n); reject nearby parameters
    let frac = (x / T::of(std::f64::consts::PI)).as_f64().fract().abs();
    if frac < 1e-6 || frac > 1.0 - 1e-6 {
        return Err(Error::InvalidParameter(
            "βγ/2 too close to a pole of cot".into(),
        ));
    }
    let cot = x.cos() / x.sin();
    let mut real_terms = vec![ExpTerm {
        c: cr(lambda * gamma * cot),
        mu: cr(gamma),
    }];
    for n in 1..=n_terms {
        let nu = T::of(2.0 * std::f64::consts::PI * n as f64) / beta;
        let c = T::of(4.0) * lambda * gamma / (beta * (nu * nu - gamma * gamma));
        real_terms.push(ExpTerm {
            c: cr(c * nu),
            mu: cr(nu),
        });
    }
    // tail Σ_{n>N} c_n e^{−ν_n t} ≈ δ(t) of weight 2 Σ c_n / ν_n; the sum is
    // finished with the integral remainder of the ~1/n² summand
    let nu_next = T::of(2.0 * std::f64::consts::PI * (n_terms + 1) as f64) / beta;
    if nu_next <= gamma {
        return Err(Error::InvalidParameter(
            "need enough explicit terms that the truncated tail lies above γ".into(),
        ));
    }
    let mut delta_weight = T::zero();
    let m_cap = n_terms + 20_000;
    for n in (n_terms + 1)..=m_cap {
        let nu = T::of(2.0 * std::f64::consts::PI * n as f64) / beta;
        delta_weight += T::of(8.0) * lambda * gamma / (beta * (nu * nu - gamma * gamma));
    }
    let scale = beta / T::of(2.0 * std::f64::consts::PI);
    delta_weight += T::of(8.0) * lambda * gamma / beta * scale * scale
        * (T::one() / T::of(m_cap as f64) + T::one() / T::of(2.0 * (m_cap as f64).powi(2)));
    let resp = ExponentialSumResponse {
        real_terms,
        imag_terms: vec![ExpTerm {
            c: cr(-lambda * gamma),
            mu: cr(gamma),
        }],
        delta_weight,
    };
    resp.validate()?;
    Ok(resp)
}

/// Precomputed exponential-sum representation of the Ohmic bath with Gaussian
/// cutoff at λ = 0.01485 rad/ps, ω_c = 2.2 rad/ps, T = 50 K and unit coupling
/// scale η = 1. The coefficients enter linearly in η, so other coupling
/// strengths are reached via [`ExponentialSumResponse::scaled`].
pub fn ohmic_reference_response<T: Real>() -> ExponentialSumResponse<T> {
    let c = |re: f64, im: f64| Complex::new(T::of(re), T::of(im));
    let term = |cre: f64, cim: f64, mre: f64, mim: f64| ExpTerm {
        c: c(cre, cim),
        mu: c(mre, mim),
    };
    ExponentialSumResponse {
        real_terms: vec![
            term(0.14534, 0.316206, 2.77201, 0.985685),
            term(0.14534, -0.316206, 2.77201, -0.985685),
            term(-0.0587924, -0.0207246, 2.67694, 3.11522),
            term(-0.0587924, 0.0207246, 2.67694, -3.11522),
        ],
        imag_terms: vec![
            term(-0.00683011, 0.0449112, 2.35315, -1.04322),
            term(0.00683011, 0.00938383, 2.33632, 3.21569),
            term(0.00683011, -0.00938383, 2.33632, -3.21569),
            term(-0.00683011, -0.0449112, 2.35315, 1.04322),
        ],
        delta_weight: T::zero(),
    }
}

// ---------------------------------------------------------------------------
// Exponential fitting
// ---------------------------------------------------------------------------

/// Fits one real signal on a uniform grid to `n_terms` decaying exponentials
/// via least-squares linear prediction (Prony) followed by a linear solve for
/// the coefficients. Returns terms and the RMS residual.
fn prony_fit(samples: &[f64], dt: f64, n_terms: usize) -> Result<(Vec<ExpTerm<f64>>, f64)> {
    use nalgebra::{DMatrix, DVector};
    let n = samples.len();
    let peak = samples.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    if peak == 0.0 || n_terms == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let p = n_terms.min((n - 1) / 2).max(1);
    // linear prediction: y_{k+p} = Σ_j a_j y_{k+p−1−j}
    let rows = n - p;
    let mut m = DMatrix::<f64>::zeros(rows, p);
    let mut rhs = DVector::<f64>::zeros(rows);
    for k in 0..rows {
        for j in 0..p {
            m[(k, j)] = samples[k + p - 1 - j];
        }
        rhs[k] = samples[k + p];
    }
    let svd = m.svd(true, true);
    let a = svd
        .solve(&rhs, 1e-12 * peak)
        .map_err(|e| Error::InvalidParameter(format!("linear prediction solve failed: {e}")))?;
    // roots of z^p − a_0 z^{p−1} − … − a_{p−1} via the companion matrix
    let mut comp = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        comp[(0, j)] = a[j];
    }
    for i in 1..p {
        comp[(i, i - 1)] = 1.0;
    }
    let roots = comp.complex_eigenvalues();
    // decaying modes only: z = e^{−μΔt} must lie strictly inside the unit circle
    let z_floor = (-(50.0_f64)).exp();
    let mut mus: Vec<Complex<f64>> = roots
        .iter()
        .map(|z| {
            let r = z.norm().clamp(z_floor, 1.0 - 1e-9);
            let mu = -Complex::new(r, 0.0).ln() / dt
                - Complex::new(0.0, z.arg()) / dt;
            mu
        })
        .collect();
    // deterministic ordering for reproducible output
    mus.sort_by(|x, y| {
        x.re.partial_cmp(&y.re)
            .unwrap()
            .then(x.im.partial_cmp(&y.im).unwrap())
    });
    // linear least squares for complex coefficients on the (real) samples
    let v = DMatrix::<Complex<f64>>::from_fn(n, mus.len(), |k, j| {
        (-mus[j] * (k as f64 * dt)).exp()
    });
    let yv = DVector::<Complex<f64>>::from_fn(n, |k, _| Complex::new(samples[k], 0.0));
    let svd_c = v.clone().svd(true, true);
    let coeffs = svd_c
        .solve(&yv, 1e-12 * peak)
        .map_err(|e| Error::InvalidParameter(format!("coefficient solve failed: {e}")))?;
    let fitted = &v * &coeffs;
    let rss: f64 = (0..n).map(|k| (fitted[k].re - samples[k]).powi(2)).sum();
    let rms = (rss / n as f64).sqrt();
    let terms = mus
        .iter()
        .zip(coeffs.iter())
        .map(|(&mu, &c)| ExpTerm { c, mu })
        .collect();
    Ok((terms, rms))
}

/// Symmetrizes fitted terms so the evaluated signal is exactly real: each
/// term c·e^{−μt} is replaced by (c e^{−μt} + c̄ e^{−μ̄t})/2 distributed over
/// the conjugate pair (self-pairing when μ is real).
fn realize_terms(terms: Vec<ExpTerm<f64>>) -> Vec<ExpTerm<f64>> {
    let mut out: Vec<ExpTerm<f64>> = Vec::with_capacity(terms.len());
    for t in terms {
        let (half_c, half_conj) = (t.c * 0.5, t.c.conj() * 0.5);
        // merge with an existing conjugate partner if present
        if let Some(p) = out
            .iter_mut()
            .find(|p| (p.mu - t.mu.conj()).norm() < 1e-9 * (1.0 + t.mu.norm()))
        {
            p.c += half_conj;
            out.push(ExpTerm { c: half_c, mu: t.mu });
        } else if t.mu.im.abs() < 1e-12 * (1.0 + t.mu.re.abs()) {
            out.push(ExpTerm {
                c: Complex::new(t.c.re, 0.0),
                mu: Complex::new(t.mu.re, 0.0),
            });
        } else {
            out.push(ExpTerm { c: half_c, mu: t.mu });
            out.push(ExpTerm {
                c: half_conj,
                mu: t.mu.conj(),
            });
        }
    }
    out.retain(|t| t.c.norm() > 0.0);
    out
}

/// Fits sampled D and D1 on a time grid to exponential sums with `n_r` and
/// `n_i` terms respectively. The grid must be uniform and cover the decay of
/// the response (|last| < 1% of the peak). The RMS residual of each channel
/// must come in under 2% of the peak |D| (or |D1|), else the fit is rejected.
pub fn fit_response_to_exponentials<T: Real>(
    times: &[T],
    d_samples: &[T],
    d1_samples: &[T],
    n_r: usize,
    n_i: usize,
) -> Result<ExponentialSumResponse<T>> {
    if times.len() < 8 || times.len() != d_samples.len() || times.len() != d1_samples.len() {
        return Err(Error::InvalidParameter(
            "need ≥ 8 samples with matching grid/value lengths".into(),
        ));
    }
    let t0 = times[0].as_f64();
    let dt = times[1].as_f64() - t0;
    for w in times.windows(2) {
        let h = w[1].as_f64() - w[0].as_f64();
        if (h - dt).abs() > 1e-9 * dt.abs().max(1e-12) {
            return Err(Error::InvalidParameter("time grid must be uniform".into()));
        }
    }
    if t0.abs() > 1e-12 {
        return Err(Error::InvalidParameter("time grid must start at 0".into()));
    }
    let d: Vec<f64> = d_samples.iter().map(|x| x.as_f64()).collect();
    let d1: Vec<f64> = d1_samples.iter().map(|x| x.as_f64()).collect();
    let check_decay = |y: &[f64], name: &str| -> Result<()> {
        let peak = y.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        if peak > 0.0 && y.last().unwrap().abs() > 0.01 * peak {
            return Err(Error::InvalidParameter(format!(
                "{name} samples do not cover the decay (last > 1% of peak)"
            )));
        }
        Ok(())
    };
    check_decay(&d, "D")?;
    check_decay(&d1, "D1")?;

    let fit_channel = |y: &[f64], n_terms: usize, name: &str| -> Result<Vec<ExpTerm<f64>>> {
        let peak = y.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        if peak == 0.0 {
            return Ok(Vec::new());
        }
        if n_terms == 0 {
            let peak_ = y.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
            let _ = name;
            return Err(Error::FitResidual {
                residual: peak_,
                bound: 0.0,
            });
        }
        let (terms, rms) = prony_fit(y, dt, n_terms)?;
        if rms > 0.02 * peak {
            let _ = name;
            return Err(Error::FitResidual {
                residual: rms,
                bound: 0.02 * peak,
            });
        }
        Ok(realize_terms(terms))
    };
    let real_terms = fit_channel(&d, n_r, "D")?;
    let imag_terms = fit_channel(&d1, n_i, "D1")?;
    let conv = |terms: Vec<ExpTerm<f64>>| {
        terms
            .into_iter()
            .map(|t| ExpTerm {
                c: Complex::new(T::of(t.c.re), T::of(t.c.im)),
                mu: Complex::new(T::of(t.mu.re), T::of(t.mu.im)),
            })
            .collect()
    };
    let resp = ExponentialSumResponse {
        real_terms: conv(real_terms),
        imag_terms: conv(imag_terms),
        delta_weight: T::zero(),
    };
    resp.validate()?;
    Ok(resp)
}

/// Samples D and D1 of a spectral density on a uniform grid and fits them.
pub fn fit_bath<T: Real>(
    j: &SpectralDensity<T>,
    th: &ThermalParams<T>,
    t_max: T,
    points: usize,
    n_r: usize,
    n_i: usize,
) -> Result<ExponentialSumResponse<T>> {
    let n = points.max(16);
    let mut times = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    let mut d1 = Vec::with_capacity(n);
    for k in 0..n {
        let t = t_max * T::of(k as f64) / T::of((n - 1) as f64);
        times.push(t);
        d.push(correlation_real(j, th, t)?);
        d1.push(correlation_imag(j, t)?);
    }
    fit_response_to_exponentials(&times, &d, &d1, n_r, n_i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ohmic_va() -> SpectralDensity<f64> {
        SpectralDensity::OhmicGaussianCutoff {
            eta: 1.0,
            lambda: 0.01485,
            omega_c: 2.2,
        }
    }

    fn fmo_dl() -> SpectralDensity<f64> {
        SpectralDensity::DrudeLorentz {
            lambda: 6.59,
            gamma: 20.0,
        }
    }

    /// Reference exponential-sum coefficients for the Ohmic bath at 50 K.
    pub fn published_ohmic_fit() -> ExponentialSumResponse<f64> {
        ohmic_reference_response()
    }

    #[test]
    fn spectral_density_spot_values() {
        assert_eq!(ohmic_va().evaluate(0.0).unwrap(), 0.0);
        // Ohmic at ω = ω_c → λ e⁻¹
        let v = ohmic_va().evaluate(2.2).unwrap();
        assert!((v - 0.01485 * (-1.0_f64).exp()).abs() < 1e-12);
        assert!((v - 0.005463).abs() < 1e-6);
        // Drude-Lorentz at ω = γ → λ/π
        let dl = fmo_dl().evaluate(20.0).unwrap();
        assert!((dl - 6.59 / std::f64::consts::PI).abs() < 1e-12);
        assert!(fmo_dl().evaluate(-1.0).is_err());
    }

    #[test]
    fn tabulated_interpolation() {
        let j = SpectralDensity::Tabulated {
            samples: vec![(1.0, 2.0), (3.0, 4.0)],
        };
        j.validate().unwrap();
        assert!((j.evaluate(2.0).unwrap() - 3.0_f64).abs() < 1e-14);
        assert!((j.evaluate(0.5).unwrap() - 1.0_f64).abs() < 1e-14); // through origin
        assert_eq!(j.evaluate(5.0).unwrap(), 0.0);
    }

    #[test]
    fn reorganization_energies() {
        // Drude-Lorentz: λ regardless of γ
        for gamma in [1.0, 6.02, 20.0, 100.0] {
            let j = SpectralDensity::DrudeLorentz { lambda: 6.59, gamma };
            assert!((reorganization_energy(&j).unwrap() - 6.59_f64).abs() < 1e-8 * 6.59);
        }
        // Ohmic: ηλ√π/2
        let want = 0.01485 * std::f64::consts::PI.sqrt() / 2.0;
        assert!((reorganization_energy(&ohmic_va()).unwrap() - want).abs() < 1e-10);
        assert!((want - 0.01316).abs() < 1e-5);
        // Tabulated sampling of the Ohmic curve agrees with the closed form
        let samples: Vec<(f64, f64)> = (0..=400)
            .map(|k| {
                let w = 15.0 * k as f64 / 400.0;
                (w, ohmic_va().evaluate(w).unwrap())
            })
            .collect();
        let tab = SpectralDensity::Tabulated { samples };
        let got = reorganization_energy(&tab).unwrap();
        assert!((got - want).abs() < 1e-3 * want);
    }

    #[test]
    fn correlation_real_monotone_in_temperature() {
        let th77 = ThermalParams::new(77.0).unwrap();
        let th300 = ThermalParams::new(300.0).unwrap();
        let d77 = correlation_real(&fmo_dl(), &th77, 0.0).unwrap();
        let d300 = correlation_real(&fmo_dl(), &th300, 0.0).unwrap();
        assert!(d300 > d77, "D(0): {d300} vs {d77}");
        assert!(d77 > 0.0);
    }

    #[test]
    fn correlation_imag_drude_lorentz_closed_form() {
        // quadrature route (via a tabulated clone) against −λγe^{−γt}
        let t = 0.2;
        let direct = correlation_imag(&fmo_dl(), t).unwrap();
        assert!((direct + 6.59 * 20.0 * (-20.0 * t as f64).exp()).abs() < 1e-9);
        assert_eq!(correlation_imag(&fmo_dl(), 0.0).unwrap(), -6.59 * 20.0);
        // Ohmic D1(0) = 0
        assert!(correlation_imag(&ohmic_va(), 0.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn ohmic_response_matches_published_fit() {
        let th = ThermalParams::new(50.0).unwrap();
        let fit = published_ohmic_fit();
        // D at t = 0 within the fit residual bound (2% of peak)
        let d0 = correlation_real(&ohmic_va(), &th, 0.0).unwrap();
        let (fit_d0, _) = fit.evaluate(0.0);
        assert!(
            (d0 - fit_d0).abs() < 0.02 * d0.abs().max(fit_d0.abs()),
            "D(0) {d0} vs fit {fit_d0}"
        );
        // D1 at t = 0.5 within 2% of the peak |D1|
        let d1 = correlation_imag(&ohmic_va(), 0.5).unwrap();
        let (_, fit_d1) = fit.evaluate(0.5);
        let peak = (0..100)
            .map(|k| correlation_imag(&ohmic_va(), 3.0 * k as f64 / 99.0).unwrap().abs())
            .fold(0.0_f64, f64::max);
        assert!(
            (d1 - fit_d1).abs() < 0.02 * peak,
            "D1(0.5) {d1} vs fit {fit_d1} (peak {peak})"
        );
    }

    #[test]
    fn drude_lorentz_exponent_plus_delta() {
        let th = ThermalParams::new(300.0).unwrap();
        let resp = drude_lorentz_response(6.59, 20.0, &th).unwrap();
        assert!(resp.delta_weight > 0.0);
        assert_eq!(resp.real_terms.len(), 1);
        assert_eq!(resp.imag_terms.len(), 1);
        assert!((resp.imag_terms[0].c.re + 6.59_f64 * 20.0).abs() < 1e-10);

        // independent oracle: high-order Matsubara sum, valid at t ≳ 1/ν₁
        let beta = 1.0 / (K_B * 300.0);
        let (lambda, gamma) = (6.59, 20.0);
        let matsubara = |t: f64| {
            let mut d = lambda * gamma * (beta * gamma / 2.0).tan().recip() * (-gamma * t).exp();
            for n in 1..=4000 {
                let nu = 2.0 * std::f64::consts::PI * n as f64 / beta;
                d += (4.0 * lambda * gamma / beta) * nu * (-nu * t).exp() / (nu * nu - gamma * gamma);
            }
            d
        };
        for t in [0.05, 0.1, 0.2] {
            let (d, _) = resp.evaluate(t);
            let oracle = matsubara(t);
            assert!(
                (d - oracle).abs() < 0.03 * oracle.abs(),
                "t={t}: {d} vs {oracle}"
            );
        }
        // decays to nothing at t ≫ 1/γ
        let (d_late, _) = resp.evaluate(5.0);
        let (d0, _) = resp.evaluate(0.0);
        assert!(d_late.abs() < 1e-10 * d0.abs());
    }

    #[test]
    fn drude_lorentz_delta_shrinks_at_high_temperature() {
        let th_hot = ThermalParams::new(3000.0).unwrap();
        let th_cold = ThermalParams::new(300.0).unwrap();
        let hot = drude_lorentz_response(6.59, 20.0, &th_hot).unwrap();
        let cold = drude_lorentz_response(6.59, 20.0, &th_cold).unwrap();
        let rel = |r: &ExponentialSumResponse<f64>| r.delta_weight / r.real_terms[0].c.re;
        assert!(rel(&hot) < rel(&cold));
    }

    #[test]
    fn drude_lorentz_pole_rejected() {
        // 2πk_BT = γ → T = γ/(2πk_B)
        let gamma = 20.0;
        let t_pole = gamma / (2.0 * std::f64::consts::PI * K_B);
        let th = ThermalParams::new(t_pole).unwrap();
        assert!(drude_lorentz_response(6.59, gamma, &th).is_err());
    }

    #[test]
    fn evaluate_response_basics() {
        let resp = ExponentialSumResponse::<f64> {
            real_terms: vec![ExpTerm {
                c: Complex::new(1.0, 0.0),
                mu: Complex::new(2.0, 0.0),
            }],
            imag_terms: vec![],
            delta_weight: 0.0,
        };
        resp.validate().unwrap();
        let (d, d1) = resp.evaluate(1.0);
        assert!((d - (-2.0_f64).exp()).abs() < 1e-15);
        assert_eq!(d1, 0.0);
        // conjugate pair evaluates exactly real
        let pair = published_ohmic_fit();
        pair.validate().unwrap();
        let (d, d1) = pair.evaluate(0.7);
        assert!(d.is_finite() && d1.is_finite());
    }

    #[test]
    fn response_validation_rejects_growth() {
        let bad = ExponentialSumResponse::<f64> {
            real_terms: vec![ExpTerm {
                c: Complex::new(1.0, 0.0),
                mu: Complex::new(-0.1, 0.0),
            }],
            imag_terms: vec![],
            delta_weight: 0.0,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn response_json_round_trip() {
        let resp = published_ohmic_fit();
        let s = serde_json::to_string(&resp).unwrap();
        assert!(s.contains("\"re\""));
        let back: ExponentialSumResponse<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(resp, back);
    }

    #[test]
    fn fit_round_trips_synthetic_two_term_sum() {
        let truth = ExponentialSumResponse::<f64> {
            real_terms: vec![
                ExpTerm {
                    c: Complex::new(0.8, 0.0),
                    mu: Complex::new(1.3, 0.0),
                },
                ExpTerm {
                    c: Complex::new(0.2, 0.0),
                    mu: Complex::new(4.0, 0.0),
                },
            ],
            imag_terms: vec![],
            delta_weight: 0.0,
        };
        let n = 200;
        let t_max = 6.0;
        let times: Vec<f64> = (0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect();
        let d: Vec<f64> = times.iter().map(|&t| truth.evaluate(t).0).collect();
        let zeros = vec![0.0; n];
        let fit = fit_response_to_exponentials(&times, &d, &zeros, 2, 0).unwrap();
        assert!(fit.imag_terms.is_empty());
        for &t in &times {
            let (got, _) = fit.evaluate(t);
            let (want, _) = truth.evaluate(t);
            assert!((got - want).abs() < 1e-6 * 0.8, "t={t}: {got} vs {want}");
        }
    }

    #[test]
    fn fit_zero_input_gives_empty_terms() {
        let times: Vec<f64> = (0..64).map(|k| k as f64 * 0.05).collect();
        let zeros = vec![0.0; 64];
        let fit = fit_response_to_exponentials(&times, &zeros, &zeros, 3, 3).unwrap();
        assert!(fit.real_terms.is_empty() && fit.imag_terms.is_empty());
    }

    #[test]
    fn fit_rejects_uncovered_decay() {
        // constant-one D never decays
        let times: Vec<f64> = (0..64).map(|k| k as f64 * 0.05).collect();
        let ones = vec![1.0; 64];
        let zeros = vec![0.0; 64];
        assert!(fit_response_to_exponentials(&times, &ones, &zeros, 3, 0).is_err());
    }

    #[test]
    fn fit_spin_boson_ohmic_matches_published_curves() {
        let th = ThermalParams::new(50.0).unwrap();
        let fit = fit_bath(&ohmic_va(), &th, 3.0, 240, 4, 4).unwrap();
        let published = published_ohmic_fit();
        let peak_d = (0..240)
            .map(|k| published.evaluate(3.0 * k as f64 / 239.0).0.abs())
            .fold(0.0_f64, f64::max);
        let peak_d1 = (0..240)
            .map(|k| published.evaluate(3.0 * k as f64 / 239.0).1.abs())
            .fold(0.0_f64, f64::max);
        for k in 0..=120 {
            let t = 3.0 * k as f64 / 120.0;
            let (d_fit, d1_fit) = fit.evaluate(t);
            let (d_pub, d1_pub) = published.evaluate(t);
            assert!(
                (d_fit - d_pub).abs() < 0.05 * peak_d,
                "D at t={t}: {d_fit} vs {d_pub}"
            );
            assert!(
                (d1_fit - d1_pub).abs() < 0.05 * peak_d1,
                "D1 at t={t}: {d1_fit} vs {d1_pub}"
            );
        }
    }

    #[test]
    fn quadrature_is_deterministic() {
        let th = ThermalParams::new(300.0).unwrap();
        let a = correlation_real(&fmo_dl(), &th, 0.13).unwrap();
        let b = correlation_real(&fmo_dl(), &th, 0.13).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn thermal_params_invariants() {
        let th = ThermalParams::new(77.0_f64).unwrap();
        assert!((th.beta() * K_B * 77.0 - 1.0).abs() < 1e-15);
        assert!(ThermalParams::<f64>::new(0.0).is_err());
        assert!(ThermalParams::<f64>::new(-1.0).is_err());
    }
}

//! A-priori weak-coupling criterion: given a system + bath model, predict
//! whether a second-order perturbative treatment is accurate *before* running
//! any dynamics.
//!
//! Two variants are evaluated. The full criterion compares the fourth-order
//! and second-order dephasing-rate contributions |⟨ii|K₄|ii⟩ / ⟨ii|K₂|ii⟩|
//! per energy eigenstate. The simplified criterion bounds that ratio by the
//! slippage weights Υ_ij = 2|V_ij|² ∫₀^t τ D(τ) cos(Δ_ij τ) dτ summed over
//! partner states. Both use only the real part D of the bath response; the
//! D1 contributions to the rates are deliberately omitted (they are small and
//! only shift the Lamb term).

use std::collections::HashMap;

use crate::bath::{SpectralDensity, ThermalParams, K_B};
use crate::error::{Error, Result};
use crate::generators::simplex_exp_integral;
use crate::models::ModelSpec;
use crate::op::eigendecompose;
use crate::scalar::{ci, cr, phi1, phi2, Real, C};

/// Minimum distinguishable eigenfrequency gap (rad/ps).
pub const DEGENERACY_TOL: f64 = 1e-9;

/// When every response decay satisfies Re μ · t above this bound, τ-weighted
/// integrals switch to their t → ∞ closed forms.
const INFINITE_HORIZON: f64 = 20.0;

/// Eigenbasis data shared by every criterion quantity.
struct Context<T: Real> {
    /// Eigenvalues ε_i, ascending.
    eps: Vec<T>,
    /// W_ik = Σ_ν |⟨i|V_ν|k⟩|².
    w: Vec<Vec<T>>,
    /// X_ik = Σ_ν V^ν_ii (V^ν_ii − V^ν_kk).
    x: Vec<Vec<T>>,
    /// Real-part response terms (c, μ): D(t) = Σ c e^{−μt} + δw·δ(t).
    terms: Vec<(C<T>, C<T>)>,
    delta_weight: T,
}

fn context<T: Real>(spec: &ModelSpec<T>) -> Context<T> {
    let basis = eigendecompose(spec.system.hamiltonian());
    let d = spec.dim();
    let mut v_eig = Vec::new();
    for v in spec.system.couplings() {
        v_eig.push(basis.to_eigenbasis(v.matrix()));
    }
    let mut w = vec![vec![T::zero(); d]; d];
    let mut x = vec![vec![T::zero(); d]; d];
    for i in 0..d {
        for k in 0..d {
            for v in &v_eig {
                let vik = v[(i, k)];
                w[i][k] += vik.re * vik.re + vik.im * vik.im;
                // diagonal elements of a Hermitian operator are real
                x[i][k] += v[(i, i)].re * (v[(i, i)].re - v[(k, k)].re);
            }
        }
    }
    let resp = spec.system.response();
    Context {
        eps: basis.eigenvalues().to_vec(),
        w,
        x,
        terms: resp.real_terms.iter().map(|t| (t.c, t.mu)).collect(),
        delta_weight: resp.delta_weight,
    }
}

/// Rejects plain spectral degeneracy: any pair with |Δ_ij| below tolerance.
fn check_nondegenerate<T: Real>(eps: &[T]) -> Result<()> {
    for i in 0..eps.len() {
        for j in (i + 1)..eps.len() {
            let gap = (eps[i] - eps[j]).abs();
            if gap < T::of(DEGENERACY_TOL) {
                return Err(Error::DegenerateSpectrum { gap: gap.as_f64() });
            }
        }
    }
    Ok(())
}

/// Rejects degeneracy in the broad sense: two-energy sums ε_a + ε_b must
/// coincide only for identical index multisets (this covers the second-level
/// resonances Δ_ik = Δ_pq that break the fourth-order endpoint analysis).
fn check_broadly_nondegenerate<T: Real>(eps: &[T]) -> Result<()> {
    check_nondegenerate(eps)?;
    let d = eps.len();
    let mut sums = Vec::new();
    for a in 0..d {
        for b in a..d {
            sums.push(((a, b), eps[a] + eps[b]));
        }
    }
    for p in 0..sums.len() {
        for q in (p + 1)..sums.len() {
            let gap = (sums[p].1 - sums[q].1).abs();
            if gap < T::of(DEGENERACY_TOL) {
                return Err(Error::DegenerateSpectrum { gap: gap.as_f64() });
            }
        }
    }
    Ok(())
}

/// ∫₀^t D(τ) cos(Δτ) dτ including the δ(t) part (which contributes δw/2).
fn int_cos<T: Real>(ctx: &Context<T>, delta: T, t: T) -> T {
    let mut acc = C::<T>::new(T::zero(), T::zero());
    for &(c, mu) in &ctx.terms {
        let half = cr(T::of(0.5));
        acc += c * half * (phi1(-mu + ci(delta), t) + phi1(-mu - ci(delta), t));
    }
    acc.re + ctx.delta_weight / T::of(2.0)
}

/// ∫₀^t τ D(τ) cos(Δτ) dτ; the δ(t) part is annihilated by the τ weight.
/// Far beyond every bath decay time the t → ∞ closed form 1/(μ∓iΔ)² is used.
fn int_tau_cos<T: Real>(ctx: &Context<T>, delta: T, t: T) -> T {
    let mut acc = C::<T>::new(T::zero(), T::zero());
    let half = cr(T::of(0.5));
    for &(c, mu) in &ctx.terms {
        let zp = -mu + ci(delta);
        let zm = -mu - ci(delta);
        let pair = if mu.re * t > T::of(INFINITE_HORIZON) {
            let one = C::<T>::new(T::one(), T::zero());
            one / (zp * zp) + one / (zm * zm)
        } else {
            phi2(zp, t) + phi2(zm, t)
        };
        acc += c * half * pair;
    }
    acc.re
}

/// Υ_ij(t): the slippage weight for one ordered eigenstate pair.
pub fn upsilon<T: Real>(spec: &ModelSpec<T>, i: usize, j: usize, t: T) -> Result<T> {
    let ctx = context(spec);
    check_nondegenerate(&ctx.eps)?;
    let d = ctx.eps.len();
    if i == j || i >= d || j >= d {
        return Err(Error::InvalidParameter(
            "upsilon needs two distinct eigenstate indices".into(),
        ));
    }
    if t <= T::zero() {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    Ok(upsilon_entry(&ctx, i, j, t))
}

fn upsilon_entry<T: Real>(ctx: &Context<T>, i: usize, j: usize, t: T) -> T {
    T::of(2.0) * ctx.w[i][j] * int_tau_cos(ctx, ctx.eps[i] - ctx.eps[j], t)
}

/// Per-eigenstate sums of the simplified criterion and their maximum.
#[derive(Debug, Clone)]
pub struct SimplifiedCriterion<T: Real> {
    pub per_eigenstate: Vec<T>,
    pub max: T,
}

/// Eq.-style simplified criterion: Σ_{j≠i} Υ_ij per eigenstate, max over i.
pub fn simplified_criterion<T: Real>(spec: &ModelSpec<T>, t: T) -> Result<SimplifiedCriterion<T>> {
    let ctx = context(spec);
    check_nondegenerate(&ctx.eps)?;
    if t <= T::zero() {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    let d = ctx.eps.len();
    let mut per = Vec::with_capacity(d);
    for i in 0..d {
        let mut s = T::zero();
        for j in 0..d {
            if j != i {
                s += upsilon_entry(&ctx, i, j, t);
            }
        }
        per.push(s);
    }
    let max = per.iter().fold(T::zero(), |a, &b| a.max(b));
    Ok(SimplifiedCriterion { per_eigenstate: per, max })
}

/// Finite-time golden-rule rate Γ_t(i,j) = Σ_ν |V_ij|² ∫₀^t D(τ)cos(Δ_ij τ)dτ.
pub fn gamma_t<T: Real>(spec: &ModelSpec<T>, i: usize, j: usize, t: T) -> Result<T> {
    let ctx = context(spec);
    let d = ctx.eps.len();
    if i >= d || j >= d {
        return Err(Error::InvalidParameter("eigenstate index out of range".into()));
    }
    Ok(ctx.w[i][j] * int_cos(&ctx, ctx.eps[i] - ctx.eps[j], t))
}

fn j_over_omega_limit<T: Real>(j: &SpectralDensity<T>) -> T {
    match j {
        SpectralDensity::OhmicGaussianCutoff { eta, lambda, omega_c } => *eta * *lambda / *omega_c,
        SpectralDensity::DrudeLorentz { lambda, gamma } => {
            T::of(2.0 / std::f64::consts::PI) * *lambda / *gamma
        }
        SpectralDensity::Tabulated { samples } => {
            let (w0, j0) = samples[0];
            if w0 > T::zero() {
                j0 / w0
            } else {
                let (w1, j1) = samples[1];
                (j1 - j0) / (w1 - w0)
            }
        }
    }
}

/// Markovian-limit rate Γ_∞(i,j) = Σ_ν |V_ij|² (π/2) J(|Δ_ij|) coth(β|Δ_ij|/2),
/// with the Δ → 0 continuation (π/β)·lim_{ω→0} J(ω)/ω.
pub fn markovian_rate<T: Real>(spec: &ModelSpec<T>, i: usize, j: usize) -> Result<T> {
    let ctx = context(spec);
    let d = ctx.eps.len();
    if i >= d || j >= d {
        return Err(Error::InvalidParameter("eigenstate index out of range".into()));
    }
    let delta = (ctx.eps[i] - ctx.eps[j]).abs();
    let beta = spec.thermal.beta();
    let rate = if delta < T::of(DEGENERACY_TOL) {
        T::of(std::f64::consts::PI) / beta * j_over_omega_limit(&spec.spectral_density)
    } else {
        let jv = spec.spectral_density.evaluate(delta)?;
        let arg = beta * delta / T::of(2.0);
        T::of(0.5 * std::f64::consts::PI) * jv / arg.tanh()
    };
    Ok(ctx.w[i][j] * rate)
}

/// Endpoint approximation of the second-order dephasing rate:
/// ⟨ii|K₂|ii⟩ ≈ −2 Σ_{k≠i} Γ_t(i,k).
pub fn k2_rate_ii<T: Real>(spec: &ModelSpec<T>, i: usize, t: T) -> Result<T> {
    let ctx = context(spec);
    check_nondegenerate(&ctx.eps)?;
    let d = ctx.eps.len();
    if i >= d {
        return Err(Error::InvalidParameter("eigenstate index out of range".into()));
    }
    Ok(k2_rate_entry(&ctx, i, t))
}

fn k2_rate_entry<T: Real>(ctx: &Context<T>, i: usize, t: T) -> T {
    let d = ctx.eps.len();
    let mut acc = T::zero();
    for k in 0..d {
        if k != i {
            acc += ctx.w[i][k] * int_cos(ctx, ctx.eps[i] - ctx.eps[k], t);
        }
    }
    -T::of(2.0) * acc
}

/// The two displayed contributions to the fourth-order dephasing rate.
#[derive(Debug, Clone, Copy)]
pub struct K4Rate<T: Real> {
    /// Double integral with the split [0, t−τ₁] / [t−τ₁, t] τ₂ weighting.
    pub first_term: T,
    /// (τ₁ − τ₂)-weighted ordered double integral.
    pub second_term: T,
}

impl<T: Real> K4Rate<T> {
    pub fn total(&self) -> T {
        self.first_term + self.second_term
    }
}

type Memo<T> = HashMap<[u64; 6], C<T>>;

/// ∫₀^t dτ₁ e^{z1τ₁}[∫₀^{t−τ₁} τ₂ e^{z2τ₂} dτ₂ + ∫_{t−τ₁}^t (t−τ₂) e^{z2τ₂} dτ₂].
fn split_weight_integral<T: Real>(z1: C<T>, z2: C<T>, t: T, memo: &mut Memo<T>) -> C<T> {
    let zero = C::<T>::new(T::zero(), T::zero());
    simplex_exp_integral(-z1, z2, zero, z1, t, memo)
        + simplex_exp_integral(z1, -z2, zero, z2, t, memo)
}

/// ∫₀^t dτ₁ e^{z1τ₁} ∫₀^{τ₁} (τ₁ − τ₂) e^{z2τ₂} dτ₂.
fn ordered_weight_integral<T: Real>(z1: C<T>, z2: C<T>, t: T, memo: &mut Memo<T>) -> C<T> {
    let zero = C::<T>::new(T::zero(), T::zero());
    simplex_exp_integral(z1, zero, z2, zero, t, memo)
}

/// ∬ D(τ₁)D(τ₂) cos(Δ₁τ₁ + Δ₂τ₂) under the split τ₂ weighting; includes the
/// δ(τ₁) boundary contribution (the τ₂ weight kills the δ(τ₂) one).
fn i_split<T: Real>(ctx: &Context<T>, d1: T, d2: T, t: T, memo: &mut Memo<T>) -> T {
    let mut acc = C::<T>::new(T::zero(), T::zero());
    for sign in [T::one(), -T::one()] {
        for &(ca, mua) in &ctx.terms {
            let z1 = -mua + ci(sign * d1);
            for &(cb, mub) in &ctx.terms {
                let z2 = -mub + ci(sign * d2);
                acc += ca * cb * split_weight_integral(z1, z2, t, memo);
            }
        }
    }
    acc.re / T::of(2.0) + ctx.delta_weight / T::of(2.0) * int_tau_cos(ctx, d2, t)
}

/// ∬_{τ₂≤τ₁} D(τ₁)D(τ₂)(τ₁−τ₂) cos(Δ₁τ₁ + Δ₂τ₂); includes the δ(τ₂)
/// boundary contribution (the τ₁−τ₂ weight kills the δ(τ₁) one).
fn i_ordered<T: Real>(ctx: &Context<T>, d1: T, d2: T, t: T, memo: &mut Memo<T>) -> T {
    let mut acc = C::<T>::new(T::zero(), T::zero());
    for sign in [T::one(), -T::one()] {
        for &(ca, mua) in &ctx.terms {
            let z1 = -mua + ci(sign * d1);
            for &(cb, mub) in &ctx.terms {
                let z2 = -mub + ci(sign * d2);
                acc += ca * cb * ordered_weight_integral(z1, z2, t, memo);
            }
        }
    }
    acc.re / T::of(2.0) + ctx.delta_weight / T::of(2.0) * int_tau_cos(ctx, d1, t)
}

/// Endpoint approximation of the fourth-order dephasing-rate correction.
pub fn k4_rate_ii<T: Real>(spec: &ModelSpec<T>, i: usize, t: T) -> Result<K4Rate<T>> {
    let ctx = context(spec);
    check_broadly_nondegenerate(&ctx.eps)?;
    let d = ctx.eps.len();
    if i >= d {
        return Err(Error::InvalidParameter("eigenstate index out of range".into()));
    }
    Ok(k4_rate_entry(&ctx, i, t))
}

fn k4_rate_entry<T: Real>(ctx: &Context<T>, i: usize, t: T) -> K4Rate<T> {
    let d = ctx.eps.len();
    let mut memo: Memo<T> = HashMap::new();
    let mut first = T::zero();
    let mut second = T::zero();
    for k in 0..d {
        if k == i {
            continue;
        }
        let d_ik = ctx.eps[i] - ctx.eps[k];
        for p in 0..d {
            if p == i {
                continue;
            }
            let d_ip = ctx.eps[i] - ctx.eps[p];
            let mult = if k == p { T::of(2.0) } else { T::one() };
            first -= T::of(2.0)
                * ctx.w[i][k]
                * ctx.w[i][p]
                * mult
                * i_split(ctx, d_ik, d_ip, t, &mut memo);
        }
        // pure-dephasing prefactor part of the ordered term
        second += T::of(2.0) * ctx.w[i][k] * ctx.x[i][k]
            * i_ordered(ctx, d_ik, T::zero(), t, &mut memo);
        for p in 0..d {
            if p == i || p == k {
                continue;
            }
            let d_kp = ctx.eps[k] - ctx.eps[p];
            second += T::of(2.0) * ctx.w[i][k] * ctx.w[k][p]
                * i_ordered(ctx, d_ik, d_kp, t, &mut memo);
        }
    }
    K4Rate {
        first_term: first,
        second_term: second,
    }
}

/// Per-eigenstate fourth-to-second-order rate ratios.
#[derive(Debug, Clone)]
pub struct FullCriterion<T: Real> {
    /// |K₄ii / K₂ii| with both fourth-order terms; `None` marks an
    /// indeterminate eigenstate (vanishing second-order rate).
    pub per_eigenstate: Vec<Option<T>>,
    /// Same ratio keeping only the first fourth-order term.
    pub per_eigenstate_first_term: Vec<Option<T>>,
    pub max: Option<T>,
}

/// Full criterion: |⟨ii|K₄|ii⟩ / ⟨ii|K₂|ii⟩| at horizon t for every i.
pub fn full_criterion<T: Real>(spec: &ModelSpec<T>, t: T) -> Result<FullCriterion<T>> {
    let ctx = context(spec);
    check_broadly_nondegenerate(&ctx.eps)?;
    if t <= T::zero() {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    let d = ctx.eps.len();
    let mut per = Vec::with_capacity(d);
    let mut per_first = Vec::with_capacity(d);
    for i in 0..d {
        let k2 = k2_rate_entry(&ctx, i, t);
        if k2.abs() < T::of(1e-30) {
            per.push(None);
            per_first.push(None);
            continue;
        }
        let k4 = k4_rate_entry(&ctx, i, t);
        per.push(Some((k4.total() / k2).abs()));
        per_first.push(Some((k4.first_term / k2).abs()));
    }
    let max = per
        .iter()
        .flatten()
        .copied()
        .fold(None, |a: Option<T>, b| Some(a.map_or(b, |x| x.max(b))));
    Ok(FullCriterion {
        per_eigenstate: per,
        per_eigenstate_first_term: per_first,
        max,
    })
}

/// Everything the criterion command reports, in one pass.
#[derive(Debug, Clone)]
pub struct CriterionReport<T: Real> {
    pub horizon: T,
    /// Δ_ij = ε_i − ε_j, rad/ps.
    pub delta: Vec<Vec<T>>,
    /// Υ_ij (zero on the diagonal).
    pub upsilon: Vec<Vec<T>>,
    pub simplified_sum: Vec<T>,
    pub max_simplified: T,
    pub full_ratio: Vec<Option<T>>,
    pub full_ratio_first_term: Vec<Option<T>>,
    pub max_full: Option<T>,
    /// Γ_∞(i,j).
    pub markovian_rates: Vec<Vec<T>>,
    pub weak_per_eigenstate: Vec<bool>,
    pub weak: bool,
}

/// Evaluates both criteria, the Υ/Δ matrices, and the Markovian rates.
pub fn evaluate_criterion<T: Real>(spec: &ModelSpec<T>, horizon: T) -> Result<CriterionReport<T>> {
    let ctx = context(spec);
    check_broadly_nondegenerate(&ctx.eps)?;
    if horizon <= T::zero() {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    let d = ctx.eps.len();
    let mut delta = vec![vec![T::zero(); d]; d];
    let mut ups = vec![vec![T::zero(); d]; d];
    let mut markov = vec![vec![T::zero(); d]; d];
    for i in 0..d {
        for j in 0..d {
            delta[i][j] = ctx.eps[i] - ctx.eps[j];
            if i != j {
                ups[i][j] = upsilon_entry(&ctx, i, j, horizon);
            }
            markov[i][j] = markovian_rate(spec, i, j)?;
        }
    }
    let simplified = simplified_criterion(spec, horizon)?;
    let full = full_criterion(spec, horizon)?;
    let weak_per: Vec<bool> = (0..d)
        .map(|i| {
            simplified.per_eigenstate[i] < T::one()
                && full.per_eigenstate[i].map_or(true, |r| r < T::one())
        })
        .collect();
    let weak = simplified.max < T::one() && full.max.map_or(true, |r| r < T::one());
    Ok(CriterionReport {
        horizon,
        delta,
        upsilon: ups,
        simplified_sum: simplified.per_eigenstate,
        max_simplified: simplified.max,
        full_ratio: full.per_eigenstate,
        full_ratio_first_term: full.per_eigenstate_first_term,
        max_full: full.max,
        markovian_rates: markov,
        weak_per_eigenstate: weak_per,
        weak,
    })
}

/// Data behind the criterion scatter plot: one (Δ_ij, Υ_ij) point per
/// unordered eigenstate pair plus the rescaled spectral-density curve πJ(ω)/ω
/// sampled on 512 points over [0, 1.5·max|Δ|].
#[derive(Debug, Clone)]
pub struct VisualizationData<T: Real> {
    pub pairs: Vec<(T, T)>,
    pub curve: Vec<(T, T)>,
}

pub fn export_visualization<T: Real>(
    spec: &ModelSpec<T>,
    t: T,
) -> Result<VisualizationData<T>> {
    let ctx = context(spec);
    check_nondegenerate(&ctx.eps)?;
    let d = ctx.eps.len();
    let mut pairs = Vec::new();
    let mut max_delta = T::zero();
    for i in 0..d {
        for j in (i + 1)..d {
            let delta = (ctx.eps[i] - ctx.eps[j]).abs();
            max_delta = max_delta.max(delta);
            pairs.push((delta, upsilon_entry(&ctx, i, j, t)));
        }
    }
    let n = 512usize;
    let w_max = T::of(1.5) * max_delta;
    let mut curve = Vec::with_capacity(n);
    for k in 0..n {
        let w = w_max * T::of(k as f64) / T::of((n - 1) as f64);
        let y = if w < T::of(1e-12) {
            T::of(std::f64::consts::PI) * j_over_omega_limit(&spec.spectral_density)
        } else {
            T::of(std::f64::consts::PI) * spec.spectral_density.evaluate(w)? / w
        };
        curve.push((w, y));
    }
    Ok(VisualizationData { pairs, curve })
}

// mark K_B and ThermalParams as part of this module's contract surface
#[allow(unused)]
fn _kb_touch<T: Real>(th: &ThermalParams<T>) -> T {
    T::of(K_B) * th.temperature_k()
}

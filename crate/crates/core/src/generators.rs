//! Perturbative reduced-dynamics machinery: the second- and fourth-order
//! time-local generators K₂(t) and K₄(t), the second-order influence
//! functional Θ₂(t), and the propagation routines built on them.
//!
//! Everything is constructed in the system energy eigenbasis with the bath
//! response expressed as exponential sums, so every time integral — including
//! the triple integral of K₄ over the ordered simplex — has a closed form.
//! Generators are built and integrated in the interaction picture and
//! trajectories rotated back to the Schrödinger picture (and the site basis)
//! at output times.

use std::collections::HashMap;

use num_complex::Complex;

use crate::bath::ExponentialSumResponse;
use crate::error::{Error, Result};
use crate::expm::matrix_exponential;
use crate::liouville::{
    anticommutator_superop, commutator_superop, devectorize, vectorize, Superoperator,
};
use crate::ode::{integrate_to_grid, StepperConfig};
use crate::op::{eigendecompose, DensityMatrix, EnergyBasis, HermitianOperator};
use crate::scalar::{cexp, ci, cnorm, cr, phi1, CMatrix, CVector, Real, C};

/// Trace/Hermiticity tolerance demanded of every propagated state.
pub const TRAJECTORY_TOL: f64 = 1e-7;

/// Which reduced-dynamics method produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Tcl2,
    Tcl4,
    Pmat,
    Heom,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Tcl2 => "tcl2",
            Method::Tcl4 => "tcl4",
            Method::Pmat => "pmat",
            Method::Heom => "heom",
        }
    }
}

/// A propagated reduced-state history on an ascending time grid.
#[derive(Debug, Clone)]
pub struct Trajectory<T: Real> {
    pub times: Vec<T>,
    pub states: Vec<DensityMatrix<T>>,
    pub method: Method,
}

/// System Hamiltonian plus its bath couplings and the shared bath response.
#[derive(Debug, Clone)]
pub struct SystemModel<T: Real> {
    h_s: HermitianOperator<T>,
    couplings: Vec<HermitianOperator<T>>,
    response: ExponentialSumResponse<T>,
}

impl<T: Real> SystemModel<T> {
    pub fn new(
        h_s: HermitianOperator<T>,
        couplings: Vec<HermitianOperator<T>>,
        response: ExponentialSumResponse<T>,
    ) -> Result<Self> {
        if couplings.is_empty() {
            return Err(Error::InvalidParameter("need at least one bath".into()));
        }
        let d = h_s.dim();
        for v in &couplings {
            if v.dim() != d {
                return Err(Error::DimensionMismatch {
                    left: v.dim(),
                    right: d,
                });
            }
        }
        response.validate()?;
        Ok(Self {
            h_s,
            couplings,
            response,
        })
    }

    pub fn dim(&self) -> usize {
        self.h_s.dim()
    }

    pub fn hamiltonian(&self) -> &HermitianOperator<T> {
        &self.h_s
    }

    pub fn couplings(&self) -> &[HermitianOperator<T>] {
        &self.couplings
    }

    pub fn response(&self) -> &ExponentialSumResponse<T> {
        &self.response
    }

    /// Same system with the response scaled by a real factor (coupling
    /// strength enters quadratically through the response).
    pub fn with_response_scale(&self, factor: T) -> Self {
        Self {
            h_s: self.h_s.clone(),
            couplings: self.couplings.clone(),
            response: self.response.scaled(factor),
        }
    }
}

/// One flattened response term as it enters the R superoperator:
/// R picks V^× with weight c^R for D-terms and V^∘ with weight i·c^I for
/// D1-terms; `coeff` carries that weight including the i.
#[derive(Debug, Clone, Copy)]
struct ResponseTerm<T: Real> {
    coeff: C<T>,
    mu: C<T>,
    anticommutator: bool,
}

/// Precomputed eigenbasis quantities for generator construction.
#[derive(Debug, Clone)]
pub struct EigenModel<T: Real> {
    model: SystemModel<T>,
    basis: EnergyBasis<T>,
    /// Liouville-slot frequencies ω_α = Δ_ij for slot α = i·d + j.
    omega: Vec<T>,
    /// Commutator superoperators of the eigenbasis couplings.
    vx: Vec<CMatrix<T>>,
    /// Anticommutator superoperators of the eigenbasis couplings.
    vo: Vec<CMatrix<T>>,
    /// (V^×)² per bath, for the δ-weight Markovian part.
    vxvx: Vec<CMatrix<T>>,
    terms: Vec<ResponseTerm<T>>,
}

impl<T: Real> EigenModel<T> {
    pub fn new(model: SystemModel<T>) -> Result<Self> {
        let basis = eigendecompose(model.hamiltonian());
        let d = model.dim();
        let mut omega = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                omega.push(basis.delta(i, j));
            }
        }
        let mut vx = Vec::new();
        let mut vo = Vec::new();
        let mut vxvx = Vec::new();
        for v in model.couplings() {
            let v_eig = basis.to_eigenbasis(v.matrix());
            let x = commutator_superop(&v_eig)?;
            let o = anticommutator_superop(&v_eig)?;
            vxvx.push(x.matrix() * x.matrix());
            vx.push(x.matrix().clone());
            vo.push(o.matrix().clone());
        }
        let mut terms = Vec::new();
        for term in &model.response().real_terms {
            terms.push(ResponseTerm {
                coeff: term.c,
                mu: term.mu,
                anticommutator: false,
            });
        }
        for term in &model.response().imag_terms {
            terms.push(ResponseTerm {
                coeff: ci(T::one()) * term.c,
                mu: term.mu,
                anticommutator: true,
            });
        }
        Ok(Self {
            model,
            basis,
            omega,
            vx,
            vo,
            vxvx,
            terms,
        })
    }

    pub fn model(&self) -> &SystemModel<T> {
        &self.model
    }

    pub fn basis(&self) -> &EnergyBasis<T> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    fn dim2(&self) -> usize {
        let d = self.dim();
        d * d
    }

    /// e^{±i ω_α t} as a Liouville-diagonal phase vector.
    fn phase_vector(&self, t: T, sign: T) -> Vec<C<T>> {
        self.omega
            .iter()
            .map(|&w| cexp(ci(sign * w * t)))
            .collect()
    }

    /// Interaction-picture K₂(t) as a raw d²×d² matrix (eigenbasis).
    pub fn k2_interaction_at(&self, t: T) -> CMatrix<T> {
        let d2 = self.dim2();
        let mut out = CMatrix::<T>::zeros(d2, d2);
        let phase = self.phase_vector(t, T::one());
        for (nu, vx) in self.vx.iter().enumerate() {
            // accumulated ∫₀^t [D(t−t₁)V^×(t₁) + iD₁(t−t₁)V^∘(t₁)] dt₁
            let mut w_sum = CMatrix::<T>::zeros(d2, d2);
            for term in &self.terms {
                let q = if term.anticommutator {
                    &self.vo[nu]
                } else {
                    vx
                };
                for gamma in 0..d2 {
                    for beta in 0..d2 {
                        let qv = q[(gamma, beta)];
                        if qv == Complex::new(T::zero(), T::zero()) {
                            continue;
                        }
                        let idelta = ci(self.omega[gamma] - self.omega[beta]);
                        w_sum[(gamma, beta)] +=
                            term.coeff * qv * damped_phi1(term.mu, idelta, t);
                    }
                }
            }
            // −V^×(t)·W: V^×(t) elements are V^×_{αγ} e^{i(ω_α−ω_γ)t}
            let mut vxt = vx.clone();
            for alpha in 0..d2 {
                for gamma in 0..d2 {
                    vxt[(alpha, gamma)] *= phase[alpha] * phase[gamma].conj();
                }
            }
            out -= vxt * w_sum;
            // δ-weight: −(δw/2)·(V^×V^×) in the interaction picture
            let dw = self.model.response().delta_weight;
            if dw > T::zero() {
                let half = cr(dw / T::of(2.0));
                for alpha in 0..d2 {
                    for beta in 0..d2 {
                        out[(alpha, beta)] -= half
                            * self.vxvx[nu][(alpha, beta)]
                            * phase[alpha]
                            * phase[beta].conj();
                    }
                }
            }
        }
        out
    }

    /// Θ₂(t) = ∫₀^t K₂(τ) dτ in the interaction picture, closed form.
    pub fn theta2_interaction_at(&self, t: T) -> CMatrix<T> {
        let d2 = self.dim2();
        let mut out = CMatrix::<T>::zeros(d2, d2);
        for (nu, vx) in self.vx.iter().enumerate() {
            for term in &self.terms {
                let q = if term.anticommutator {
                    &self.vo[nu]
                } else {
                    vx
                };
                for alpha in 0..d2 {
                    for beta in 0..d2 {
                        let mut acc = Complex::new(T::zero(), T::zero());
                        for gamma in 0..d2 {
                            let vv = vx[(alpha, gamma)];
                            let qv = q[(gamma, beta)];
                            if vv == Complex::new(T::zero(), T::zero())
                                || qv == Complex::new(T::zero(), T::zero())
                            {
                                continue;
                            }
                            // ∫₀^t e^{aτ} φ₁(z, τ) dτ = (φ₁(a+z,t) − φ₁(a,t))/z
                            let a = ci(self.omega[alpha] - self.omega[gamma]) - term.mu;
                            let z = term.mu + ci(self.omega[gamma] - self.omega[beta]);
                            acc += vv * qv * (phi1(a + z, t) - phi1(a, t)) / z;
                        }
                        out[(alpha, beta)] -= term.coeff * acc;
                    }
                }
            }
            let dw = self.model.response().delta_weight;
            if dw > T::zero() {
                let half = cr(dw / T::of(2.0));
                for alpha in 0..d2 {
                    for beta in 0..d2 {
                        out[(alpha, beta)] -= half
                            * self.vxvx[nu][(alpha, beta)]
                            * phi1(ci(self.omega[alpha] - self.omega[beta]), t);
                    }
                }
            }
        }
        out
    }

    /// Interaction-picture K₄(t) as a raw d²×d² matrix.
    ///
    /// The two bracketed structures of the fourth-order generator expand into
    /// four operator orderings; each chain of Liouville indices contributes a
    /// product of matrix elements times a simplex integral of an exponential,
    /// evaluated as a divided difference of e^{xt} (Opitz form, cached).
    pub fn k4_interaction_at(&self, t: T) -> CMatrix<T> {
        let d2 = self.dim2();
        let mut out = CMatrix::<T>::zeros(d2, d2);
        if t <= T::zero() {
            return out;
        }
        let zero = Complex::new(T::zero(), T::zero());
        let n_baths = self.vx.len();
        let mut memo: HashMap<[u64; 6], C<T>> = HashMap::new();
        for nu0 in 0..n_baths {
            for nu1 in 0..n_baths {
                let v0 = &self.vx[nu0];
                let v1 = &self.vx[nu1];
                for ta in &self.terms {
                    for tb in &self.terms {
                        let qa = if ta.anticommutator {
                            &self.vo[nu0]
                        } else {
                            v0
                        };
                        let qb = if tb.anticommutator {
                            &self.vo[nu1]
                        } else {
                            v1
                        };
                        let weight = ta.coeff * tb.coeff;
                        // kernel rates by time index (t, t1, t2, t3)
                        let kernel_a = [-ta.mu, -tb.mu, ta.mu, tb.mu];
                        let kernel_b = [-ta.mu, -tb.mu, tb.mu, ta.mu];
                        // (matrices in product order, their time indices, sign, kernel)
                        let structures: [([&CMatrix<T>; 4], [usize; 4], T, &[C<T>; 4]); 4] = [
                            ([v0, v1, qa, qb], [0, 1, 2, 3], T::one(), &kernel_a),
                            ([v0, qa, v1, qb], [0, 2, 1, 3], -T::one(), &kernel_a),
                            ([v0, v1, qb, qa], [0, 1, 2, 3], T::one(), &kernel_b),
                            ([v0, qa, v1, qb], [0, 3, 1, 2], -T::one(), &kernel_b),
                        ];
                        for (mats, times, sign, kernel) in &structures {
                            for s0 in 0..d2 {
                                for s1 in 0..d2 {
                                    let m1 = mats[0][(s0, s1)];
                                    if m1 == zero {
                                        continue;
                                    }
                                    for s2 in 0..d2 {
                                        let m2 = mats[1][(s1, s2)];
                                        if m2 == zero {
                                            continue;
                                        }
                                        for s3 in 0..d2 {
                                            let m3 = mats[2][(s2, s3)];
                                            if m3 == zero {
                                                continue;
                                            }
                                            for s4 in 0..d2 {
                                                let m4 = mats[3][(s3, s4)];
                                                if m4 == zero {
                                                    continue;
                                                }
                                                let slots = [s0, s1, s2, s3, s4];
                                                // exponent rate per time index
                                                let mut rate: [C<T>; 4] = **kernel;
                                                for (p, &ti) in times.iter().enumerate() {
                                                    rate[ti] += ci(self.omega[slots[p]]
                                                        - self.omega[slots[p + 1]]);
                                                }
                                                let s3val = simplex_exp_integral(
                                                    rate[1], rate[2], rate[3], rate[0], t,
                                                    &mut memo,
                                                );
                                                out[(s0, s4)] += cr(*sign)
                                                    * weight
                                                    * m1
                                                    * m2
                                                    * m3
                                                    * m4
                                                    * s3val;
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Schrödinger-picture generator −iH^× + rotated dissipator at time t
    /// (eigenbasis), with `order` selecting TCL2 or TCL4.
    pub fn schrodinger_generator(&self, order: u8, t: T) -> Result<Superoperator<T>> {
        let mut diss = self.k2_interaction_at(t);
        if order == 4 {
            diss += self.k4_interaction_at(t);
        } else if order != 2 {
            return Err(Error::InvalidParameter(format!(
                "generator order must be 2 or 4, got {order}"
            )));
        }
        let d2 = self.dim2();
        let phase = self.phase_vector(t, -T::one());
        let mut mat = CMatrix::<T>::zeros(d2, d2);
        for alpha in 0..d2 {
            for beta in 0..d2 {
                mat[(alpha, beta)] = phase[alpha] * diss[(alpha, beta)] * phase[beta].conj();
            }
            mat[(alpha, alpha)] -= ci(self.omega[alpha]);
        }
        Superoperator::from_matrix(self.dim(), mat)
    }
}

/// ∫₀^t e^{−μ(t−s)} e^{iδ s} ds written to avoid overflow for Re μ > 0:
/// (e^{iδt} − e^{−μt})/(μ + iδ).
fn damped_phi1<T: Real>(mu: C<T>, idelta: C<T>, t: T) -> C<T> {
    let z = mu + idelta;
    if cnorm(z) * t < T::of(1e-4) {
        cexp(-mu * cr(t)) * phi1(z, t)
    } else {
        (cexp(idelta * cr(t)) - cexp(-mu * cr(t))) / z
    }
}

/// ∫₀^t dt₁ e^{z₁t₁} ∫₀^{t₁} dt₂ e^{z₂t₂} ∫₀^{t₂} dt₃ e^{z₃t₃}, times the
/// prefactor e^{z₀ t}. Equal to the divided difference of e^{xt} at the
/// prefix-sum nodes {0, z₁, z₁+z₂, z₁+z₂+z₃}, computed as the (0,3) entry of
/// the exponential of the 4×4 upper-bidiagonal Opitz matrix. Nodes are
/// shifted so no intermediate quantity overflows (the shift is restored into
/// the prefactor, whose total real part is ≤ 0 for decaying kernels).
pub(crate) fn simplex_exp_integral<T: Real>(
    z1: C<T>,
    z2: C<T>,
    z3: C<T>,
    z0: C<T>,
    t: T,
    memo: &mut HashMap<[u64; 6], C<T>>,
) -> C<T> {
    let key = [
        z1.re.as_f64().to_bits(),
        z1.im.as_f64().to_bits(),
        z2.re.as_f64().to_bits(),
        z2.im.as_f64().to_bits(),
        z3.re.as_f64().to_bits(),
        z3.im.as_f64().to_bits(),
    ];
    let dd = if let Some(&v) = memo.get(&key) {
        v
    } else {
        let nodes = [
            Complex::new(T::zero(), T::zero()),
            z1,
            z1 + z2,
            z1 + z2 + z3,
        ];
        let shift = nodes
            .iter()
            .map(|n| n.re)
            .fold(T::zero(), |a, b| a.max(b));
        let mut j = CMatrix::<T>::zeros(4, 4);
        for (i, n) in nodes.iter().enumerate() {
            j[(i, i)] = (*n - cr(shift)) * cr(t);
            if i < 3 {
                j[(i, i + 1)] = cr(t);
            }
        }
        // 4×4 exponential of a bounded matrix cannot fail
        let e = matrix_exponential(&j).expect("Opitz matrix exponential");
        let v = e[(0, 3)] * cexp(cr(shift * t)); // fold the node shift back in
        memo.insert(key, v);
        v
    };
    dd * cexp(z0 * cr(t))
}

/// Propagation configuration shared by the TCL and P-matrix routes.
#[derive(Debug, Clone, Copy)]
pub struct PropagationConfig<T: Real> {
    pub stepper: StepperConfig<T>,
    /// Number of cache points for the K₄ interpolation table (TCL4 only).
    pub k4_cache_points: usize,
}

impl<T: Real> Default for PropagationConfig<T> {
    fn default() -> Self {
        Self {
            stepper: StepperConfig {
                rtol: T::of(1e-8),
                atol: T::of(1e-8),
                ..StepperConfig::default()
            },
            k4_cache_points: 513,
        }
    }
}

/// Uniform-grid cubic (Catmull-Rom) interpolation table for a matrix-valued
/// function of time.
struct MatrixTable<T: Real> {
    t_max: T,
    values: Vec<CMatrix<T>>,
}

impl<T: Real> MatrixTable<T> {
    fn build<F: FnMut(T) -> CMatrix<T>>(mut f: F, t_max: T, n: usize) -> Self {
        let n = n.max(4);
        let values = (0..n)
            .map(|k| f(t_max * T::of(k as f64) / T::of((n - 1) as f64)))
            .collect();
        Self { t_max, values }
    }

    fn eval(&self, t: T) -> CMatrix<T> {
        let n = self.values.len();
        let h = self.t_max / T::of((n - 1) as f64);
        let x = (t / h).max(T::zero()).min(T::of((n - 1) as f64));
        let k = (x.floor().as_f64() as usize).min(n - 2);
        let u = x - T::of(k as f64);
        // Outer stencil points; quadratic ghost extrapolation at the ends
        // keeps the interpolation cubic-accurate over the whole range.
        let ghost = |a: &CMatrix<T>, b: &CMatrix<T>, c: &CMatrix<T>| {
            a * cr(T::of(3.0)) - b * cr(T::of(3.0)) + c
        };
        let p0 = if k == 0 {
            ghost(&self.values[0], &self.values[1], &self.values[2])
        } else {
            self.values[k - 1].clone()
        };
        let p3 = if k + 2 > n - 1 {
            ghost(&self.values[n - 1], &self.values[n - 2], &self.values[n - 3])
        } else {
            self.values[k + 2].clone()
        };
        let (p1, p2) = (&self.values[k], &self.values[k + 1]);
        let u2 = u * u;
        let u3 = u2 * u;
        let w0 = cr(T::of(-0.5) * u3 + u2 - T::of(0.5) * u);
        let w1 = cr(T::of(1.5) * u3 - T::of(2.5) * u2 + T::one());
        let w2 = cr(T::of(-1.5) * u3 + T::of(2.0) * u2 + T::of(0.5) * u);
        let w3 = cr(T::of(0.5) * u3 - T::of(0.5) * u2);
        p0 * w0 + p1 * w1 + p2 * w2 + p3 * w3
    }
}

/// Integrates dρ/dt = K(t)ρ (TCL2 or TCL4) and reports states on the grid.
pub fn propagate_tcl<T: Real>(
    model: &SystemModel<T>,
    order: u8,
    rho0: &DensityMatrix<T>,
    grid: &[T],
    cfg: &PropagationConfig<T>,
) -> Result<Trajectory<T>> {
    if order != 2 && order != 4 {
        return Err(Error::InvalidParameter(format!(
            "TCL order must be 2 or 4, got {order}"
        )));
    }
    let eigen = EigenModel::new(model.clone())?;
    check_grid(grid)?;
    let rho0_eig = eigen.basis.to_eigenbasis(rho0.matrix());
    let y0 = vectorize(&rho0_eig)?;
    let t_end = *grid.last().unwrap();

    let k4_table = if order == 4 {
        Some(MatrixTable::build(
            |t| eigen.k4_interaction_at(t),
            t_end,
            cfg.k4_cache_points,
        ))
    } else {
        None
    };
    let rhs = |t: T, y: &CVector<T>| {
        let mut k = eigen.k2_interaction_at(t);
        if let Some(table) = &k4_table {
            k += table.eval(t);
        }
        &k * y
    };
    let raw = integrate_to_grid(rhs, y0, grid, &cfg.stepper)?;
    let method = if order == 2 { Method::Tcl2 } else { Method::Tcl4 };
    assemble_trajectory(&eigen, grid, raw, method)
}

/// ρ(t) = U(t) e^{Θ₂(t)} ρ(0): exact exponentiation of the second-order
/// influence functional at each output time.
pub fn propagate_pmat<T: Real>(
    model: &SystemModel<T>,
    rho0: &DensityMatrix<T>,
    grid: &[T],
) -> Result<Trajectory<T>> {
    let eigen = EigenModel::new(model.clone())?;
    check_grid(grid)?;
    let rho0_eig = eigen.basis.to_eigenbasis(rho0.matrix());
    let y0 = vectorize(&rho0_eig)?;
    let mut raw = Vec::with_capacity(grid.len());
    for &t in grid {
        let theta = eigen.theta2_interaction_at(t);
        let propagated = matrix_exponential(&theta)? * &y0;
        raw.push(propagated);
    }
    assemble_trajectory(&eigen, grid, raw, Method::Pmat)
}

fn check_grid<T: Real>(grid: &[T]) -> Result<()> {
    if grid.is_empty() || grid[0] != T::zero() {
        return Err(Error::InvalidParameter(
            "time grid must be nonempty and start at 0".into(),
        ));
    }
    Ok(())
}

/// Rotates interaction-picture Liouville vectors back to the Schrödinger
/// picture and the site basis, validating each state.
fn assemble_trajectory<T: Real>(
    eigen: &EigenModel<T>,
    grid: &[T],
    raw: Vec<CVector<T>>,
    method: Method,
) -> Result<Trajectory<T>> {
    let d = eigen.dim();
    let mut states = Vec::with_capacity(raw.len());
    for (&t, y) in grid.iter().zip(raw.iter()) {
        let phase = eigen.phase_vector(t, -T::one());
        let mut rotated = y.clone();
        for (slot, p) in phase.iter().enumerate() {
            rotated[slot] *= *p;
        }
        let rho_eig = devectorize(&rotated, d)?;
        let rho_site = eigen.basis.from_eigenbasis(&rho_eig);
        states.push(DensityMatrix::from_propagation(
            rho_site,
            T::of(TRAJECTORY_TOL),
        )?);
    }
    Ok(Trajectory {
        times: grid.to_vec(),
        states,
        method,
    })
}

/// Long-time spectrum diagnostics of the Schrödinger-picture generator.
#[derive(Debug, Clone)]
pub struct PhysicalityReport<T: Real> {
    /// Eigenvalues of the generator at the probe time, as the conjugate-
    /// symmetric spectrum of the real embedding (each value of the d²×d²
    /// complex generator appears alongside its conjugate).
    pub eigenvalues: Vec<C<T>>,
    /// Largest real part after excluding the steady-state pair.
    pub max_real_part: T,
    pub unphysical: bool,
}

/// Threshold on Re λ above which a generator eigenvalue is unphysical.
pub const PHYSICALITY_TOL: f64 = 1e-6;

/// Checks the generator spectrum at `t_probe` (defaults: 10 bath memory
/// times): one eigenvalue near zero (the steady state) is expected; any
/// other eigenvalue with positive real part flags the order as unphysical.
pub fn physicality_check<T: Real>(
    model: &SystemModel<T>,
    order: u8,
    t_probe: T,
) -> Result<PhysicalityReport<T>> {
    let eigen = EigenModel::new(model.clone())?;
    let k = eigen.schrodinger_generator(order, t_probe)?;
    let l = eigen.dim2();
    // real 2L×2L embedding of A + iB: [[A, −B], [B, A]]; its spectrum is
    // spec(K) ∪ conj(spec(K))
    let mut emb = nalgebra::DMatrix::<T>::zeros(2 * l, 2 * l);
    for i in 0..l {
        for j in 0..l {
            let z = k.matrix()[(i, j)];
            emb[(i, j)] = z.re;
            emb[(i + l, j + l)] = z.re;
            emb[(i, j + l)] = -z.im;
            emb[(i + l, j)] = z.im;
        }
    }
    let mut eigenvalues: Vec<C<T>> = emb.complex_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|a, b| {
        cnorm(*a)
            .partial_cmp(&cnorm(*b))
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    // drop the doubled steady-state eigenvalue (two entries closest to zero)
    let max_real_part = eigenvalues
        .iter()
        .skip(2)
        .map(|z| z.re)
        .fold(T::of(f64::NEG_INFINITY), |a, b| a.max(b));
    Ok(PhysicalityReport {
        unphysical: max_real_part > T::of(PHYSICALITY_TOL),
        max_real_part,
        eigenvalues,
    })
}

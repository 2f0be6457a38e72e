//! Hierarchical equations of motion: numerically converged benchmark dynamics
//! for baths whose response is a sum of decaying exponentials, with
//! renormalized inter-tier coupling and automated tier convergence.
//!
//! Each auxiliary density matrix carries a multi-index with one slot per
//! (bath, response part, exponential term). The hierarchy is truncated by the
//! total tier Σ n ≤ N_c by default; a per-slot cut (each n ≤ N_c
//! independently) is available behind a flag for cross-checking at small slot
//! counts. Auxiliaries beyond the cut are treated as zero.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generators::{Method, SystemModel, Trajectory, TRAJECTORY_TOL};
use crate::ode::{integrate_to_grid, StepperConfig};
use crate::op::DensityMatrix;
use crate::scalar::{ci, cnorm, cr, CMatrix, CVector, Real, C};

/// Environment variable overriding the default memory cap (in MB).
pub const MEM_CAP_ENV: &str = "OQSIM_MEM_CAP_MB";

/// Default memory cap for the hierarchy state (MB).
pub const DEFAULT_MEM_CAP_MB: usize = 4096;

/// Bytes-per-state multiplier covering the integrator's internal stage
/// buffers (7 Runge–Kutta stages + solution + error + scratch).
const STATE_BUFFER_FACTOR: usize = 12;

/// How the hierarchy multi-index is truncated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationRule {
    /// Keep indices with total tier Σ n_s ≤ N_c (standard cut-off tier).
    TotalTier,
    /// Keep indices with every slot n_s ≤ N_c independently. Combinatorially
    /// explosive; intended only for A/B validation at tiny slot counts.
    PerSlot,
}

/// Controls for a hierarchy propagation.
#[derive(Debug, Clone)]
pub struct HeomConfig<T: Real> {
    /// Cut-off tier of the hierarchy.
    pub n_c: usize,
    pub stepper: StepperConfig<T>,
    /// Trace-distance bound between successive tiers for `converge_heom`.
    pub convergence_tolerance: T,
    pub truncation: TruncationRule,
    /// Memory cap in MB; `None` reads `OQSIM_MEM_CAP_MB`, falling back to
    /// [`DEFAULT_MEM_CAP_MB`].
    pub mem_cap_mb: Option<usize>,
}

impl<T: Real> Default for HeomConfig<T> {
    fn default() -> Self {
        Self {
            n_c: 3,
            stepper: StepperConfig::default(),
            convergence_tolerance: T::of(1e-3),
            truncation: TruncationRule::TotalTier,
            mem_cap_mb: None,
        }
    }
}

impl<T: Real> HeomConfig<T> {
    fn effective_cap_mb(&self) -> usize {
        if let Some(cap) = self.mem_cap_mb {
            return cap;
        }
        std::env::var(MEM_CAP_ENV)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .unwrap_or(DEFAULT_MEM_CAP_MB)
    }
}

/// One exponential term's slot in the multi-index.
#[derive(Debug, Clone)]
struct Slot<T: Real> {
    /// Which coupling operator this term belongs to.
    bath: usize,
    /// Term coefficient c_k.
    c: C<T>,
    /// Term decay rate μ_k (Re μ > 0).
    mu: C<T>,
    /// Whether the term comes from the real part of the response
    /// (commutator coupling) or the imaginary part (anticommutator).
    is_real: bool,
}

/// The enumerated hierarchy: every kept multi-index plus precomputed
/// raise/lower neighbor links per slot.
#[derive(Debug, Clone)]
pub struct Hierarchy<T: Real> {
    slots: Vec<Slot<T>>,
    /// Multi-indices, position 0 is the all-zero (physical) index.
    indices: Vec<Vec<u32>>,
    /// `raised[node][slot]` = position of the index with that slot +1, if kept.
    raised: Vec<Vec<Option<usize>>>,
    /// `lowered[node][slot]` = position of the index with that slot −1, if ≥0.
    lowered: Vec<Vec<Option<usize>>>,
    dim: usize,
    n_c: usize,
}

impl<T: Real> Hierarchy<T> {
    /// Number of auxiliary matrices (including the physical one).
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Number of multi-index slots (baths × exponential terms).
    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn cutoff_tier(&self) -> usize {
        self.n_c
    }

    /// Estimated peak memory of a propagation using this hierarchy, in MB.
    pub fn memory_estimate_mb(&self) -> usize {
        let bytes = self.len() * self.dim * self.dim * 16 * STATE_BUFFER_FACTOR;
        bytes.div_ceil(1 << 20)
    }
}

/// Number of multi-indices with `slots` non-negative entries summing to at
/// most `n_c`: the binomial coefficient C(slots + n_c, n_c).
pub fn hierarchy_count(slots: usize, n_c: usize) -> usize {
    // Product form avoids factorial overflow for the sizes we meet.
    let mut acc: u128 = 1;
    for i in 1..=n_c {
        acc = acc * (slots + i) as u128 / i as u128;
    }
    acc as usize
}

fn enumerate_indices(slots: usize, n_c: usize, rule: TruncationRule) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; slots];
    fn rec(
        slot: usize,
        budget: usize,
        rule: TruncationRule,
        n_c: usize,
        cur: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
    ) {
        if slot == cur.len() {
            out.push(cur.clone());
            return;
        }
        let max_here = match rule {
            TruncationRule::TotalTier => budget,
            TruncationRule::PerSlot => n_c,
        };
        for n in 0..=max_here {
            cur[slot] = n as u32;
            let next_budget = match rule {
                TruncationRule::TotalTier => budget - n,
                TruncationRule::PerSlot => budget,
            };
            rec(slot + 1, next_budget, rule, n_c, cur, out);
        }
        cur[slot] = 0;
    }
    rec(0, n_c, rule, n_c, &mut cur, &mut out);
    // The all-zero index is first by construction (loops start at 0).
    out
}

/// Enumerates the hierarchy for `model`'s response at cut-off tier
/// `cfg.n_c`, precomputing the ± neighbor links for every slot.
///
/// Fails with [`Error::MemoryCap`] if the estimated propagation memory
/// exceeds the configured cap.
pub fn build_hierarchy<T: Real>(
    model: &SystemModel<T>,
    cfg: &HeomConfig<T>,
) -> Result<Hierarchy<T>> {
    let resp = model.response();
    resp.validate()?;
    let n_baths = model.couplings().len();
    let mut slots = Vec::new();
    for bath in 0..n_baths {
        for term in &resp.real_terms {
            slots.push(Slot {
                bath,
                c: term.c,
                mu: term.mu,
                is_real: true,
            });
        }
        for term in &resp.imag_terms {
            slots.push(Slot {
                bath,
                c: term.c,
                mu: term.mu,
                is_real: false,
            });
        }
    }

    let d = model.dim();
    let count = match cfg.truncation {
        TruncationRule::TotalTier => hierarchy_count(slots.len(), cfg.n_c),
        TruncationRule::PerSlot => (cfg.n_c + 1).pow(slots.len() as u32),
    };
    let estimate_mb = (count * d * d * 16 * STATE_BUFFER_FACTOR).div_ceil(1 << 20);
    let cap_mb = cfg.effective_cap_mb();
    if estimate_mb > cap_mb {
        return Err(Error::MemoryCap {
            count,
            estimate_mb,
            cap_mb,
        });
    }

    let indices = enumerate_indices(slots.len(), cfg.n_c, cfg.truncation);
    debug_assert_eq!(indices.len(), count);
    let positions: HashMap<&[u32], usize> = indices
        .iter()
        .enumerate()
        .map(|(pos, idx)| (idx.as_slice(), pos))
        .collect();

    let mut raised = Vec::with_capacity(indices.len());
    let mut lowered = Vec::with_capacity(indices.len());
    let mut scratch = vec![0u32; slots.len()];
    for idx in &indices {
        let mut up = Vec::with_capacity(slots.len());
        let mut down = Vec::with_capacity(slots.len());
        for s in 0..slots.len() {
            scratch.copy_from_slice(idx);
            scratch[s] += 1;
            up.push(positions.get(scratch.as_slice()).copied());
            if idx[s] == 0 {
                down.push(None);
            } else {
                scratch[s] -= 2;
                down.push(positions.get(scratch.as_slice()).copied());
            }
        }
        raised.push(up);
        lowered.push(down);
    }

    Ok(Hierarchy {
        slots,
        indices,
        raised,
        lowered,
        dim: d,
        n_c: cfg.n_c,
    })
}

/// Per-node constants of the linear hierarchy map, precomputed once per
/// propagation so the right-hand side is pure matrix arithmetic.
struct HeomOperator<T: Real> {
    hier: Hierarchy<T>,
    h: CMatrix<T>,
    couplings: Vec<CMatrix<T>>,
    /// Σ_s n_s μ_s for each node.
    decay: Vec<C<T>>,
    /// Lower-link prefactor per (node, slot): √(n_s/|c_s|)·c_s times −i
    /// (real part, commutator) or +1 (imaginary part, anticommutator).
    down_factor: Vec<Vec<C<T>>>,
    /// Raise-link prefactor per (node, slot): −i√((n_s+1)|c_s|).
    up_factor: Vec<Vec<C<T>>>,
    /// δ(t)-weight of the response's real part.
    delta_weight: T,
}

impl<T: Real> HeomOperator<T> {
    fn new(model: &SystemModel<T>, hier: Hierarchy<T>) -> Self {
        let mut decay = Vec::with_capacity(hier.len());
        let mut down_factor = Vec::with_capacity(hier.len());
        let mut up_factor = Vec::with_capacity(hier.len());
        for idx in &hier.indices {
            let mut mu_sum = C::new(T::zero(), T::zero());
            let mut down = Vec::with_capacity(hier.slots.len());
            let mut up = Vec::with_capacity(hier.slots.len());
            for (s, slot) in hier.slots.iter().enumerate() {
                let n = T::of(idx[s] as f64);
                mu_sum += slot.mu * cr(n);
                let c_abs = cnorm(slot.c);
                let renorm = if c_abs > T::zero() {
                    (n / c_abs).sqrt()
                } else {
                    T::zero()
                };
                let base = slot.c * cr(renorm);
                down.push(if slot.is_real {
                    base * ci(-T::one())
                } else {
                    base
                });
                up.push(ci(-T::one()) * cr(((n + T::one()) * c_abs).sqrt()));
            }
            decay.push(mu_sum);
            down_factor.push(down);
            up_factor.push(up);
        }
        Self {
            h: model.hamiltonian().matrix().clone(),
            couplings: model.couplings().iter().map(|v| v.matrix().clone()).collect(),
            decay,
            down_factor,
            up_factor,
            delta_weight: model.response().delta_weight,
            hier,
        }
    }

    fn block<'a>(&self, y: &'a CVector<T>, node: usize) -> CMatrix<T> {
        let d = self.hier.dim;
        let start = node * d * d;
        CMatrix::from_row_slice(d, d, &y.as_slice()[start..start + d * d])
    }

    /// Derivative of one auxiliary: local Liouvillian plus ± neighbor terms.
    fn node_derivative(&self, y: &CVector<T>, node: usize) -> CMatrix<T> {
        let rho = self.block(y, node);
        // −i[H, ρ] − (Σ n μ) ρ
        let mut drho = (&self.h * &rho - &rho * &self.h) * ci(-T::one()) - &rho * self.decay[node];
        // δ-correlated part of the real response: −(δw/2)[V,[V,ρ]] per bath.
        if self.delta_weight > T::zero() {
            let half_w = cr(self.delta_weight * T::of(0.5));
            for v in &self.couplings {
                let comm = v * &rho - &rho * v;
                drho -= (v * &comm - &comm * v) * half_w;
            }
        }
        for (s, slot) in self.hier.slots.iter().enumerate() {
            let v = &self.couplings[slot.bath];
            if let Some(lower) = self.hier.lowered[node][s] {
                let sib = self.block(y, lower);
                let hooked = if slot.is_real {
                    v * &sib - &sib * v
                } else {
                    v * &sib + &sib * v
                };
                drho += hooked * self.down_factor[node][s];
            }
            if let Some(upper) = self.hier.raised[node][s] {
                let sib = self.block(y, upper);
                drho += (v * &sib - &sib * v) * self.up_factor[node][s];
            }
        }
        drho
    }

    /// Full right-hand side over the flattened hierarchy state.
    fn rhs(&self, y: &CVector<T>) -> CVector<T>
    where
        T: Send + Sync,
    {
        let d = self.hier.dim;
        let blocks: Vec<CMatrix<T>> = (0..self.hier.len())
            .into_par_iter()
            .map(|node| self.node_derivative(y, node))
            .collect();
        let mut out = CVector::zeros(y.len());
        for (node, b) in blocks.iter().enumerate() {
            let start = node * d * d;
            for i in 0..d {
                for j in 0..d {
                    out[start + i * d + j] = b[(i, j)];
                }
            }
        }
        out
    }
}

/// Propagates the hierarchy from `rho0` (all auxiliaries start at zero) and
/// returns the physical (zero-index) matrix on the grid.
pub fn propagate_heom<T: Real + Send + Sync>(
    model: &SystemModel<T>,
    rho0: &DensityMatrix<T>,
    grid: &[T],
    cfg: &HeomConfig<T>,
) -> Result<Trajectory<T>> {
    let d = model.dim();
    if rho0.matrix().nrows() != d {
        return Err(Error::DimensionMismatch {
            left: rho0.matrix().nrows(),
            right: d,
        });
    }
    let hier = build_hierarchy(model, cfg)?;
    let op = HeomOperator::new(model, hier);
    let count = op.hier.len();

    let mut y0 = CVector::zeros(count * d * d);
    for i in 0..d {
        for j in 0..d {
            y0[i * d + j] = rho0.matrix()[(i, j)];
        }
    }

    let raw = integrate_to_grid(|_t, y| op.rhs(y), y0, grid, &cfg.stepper)?;

    let mut states = Vec::with_capacity(raw.len());
    for y in &raw {
        let entries = op.block(y, 0);
        states.push(DensityMatrix::from_propagation(
            entries,
            T::of(TRAJECTORY_TOL),
        )?);
    }
    Ok(Trajectory {
        times: grid.to_vec(),
        states,
        method: Method::Heom,
    })
}

/// Maximum trace distance between two trajectories on the same grid.
pub fn max_trace_distance<T: Real>(a: &Trajectory<T>, b: &Trajectory<T>) -> Result<T> {
    if a.states.len() != b.states.len() {
        return Err(Error::DimensionMismatch {
            left: a.states.len(),
            right: b.states.len(),
        });
    }
    let mut worst = T::zero();
    for (x, y) in a.states.iter().zip(b.states.iter()) {
        worst = worst.max(crate::op::trace_distance(x.matrix(), y.matrix())?);
    }
    Ok(worst)
}

/// Raises the cut-off tier from 1 until successive trajectories agree to
/// `cfg.convergence_tolerance` in max-over-grid trace distance, returning the
/// higher-tier trajectory and the tier it used.
pub fn converge_heom<T: Real + Send + Sync>(
    model: &SystemModel<T>,
    rho0: &DensityMatrix<T>,
    grid: &[T],
    cfg: &HeomConfig<T>,
    max_tier: usize,
) -> Result<(Trajectory<T>, usize)> {
    if cfg.convergence_tolerance <= T::zero() {
        return Err(Error::InvalidParameter(
            "convergence tolerance must be positive".into(),
        ));
    }
    let run = |n_c: usize| -> Result<Trajectory<T>> {
        let mut c = cfg.clone();
        c.n_c = n_c;
        propagate_heom(model, rho0, grid, &c)
    };
    let mut prev = run(0)?;
    let mut last_distance = T::of(f64::INFINITY);
    for n_c in 1..=max_tier {
        let cur = run(n_c)?;
        last_distance = max_trace_distance(&prev, &cur)?;
        if last_distance < cfg.convergence_tolerance {
            return Ok((cur, n_c));
        }
        prev = cur;
    }
    Err(Error::HeomNotConverged {
        max_tier,
        distance: last_distance.as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{ohmic_reference_response, ExpTerm, ExponentialSumResponse};
    use crate::generators::{propagate_tcl, PropagationConfig};
    use crate::models::spin_boson_default;
    use crate::op::{pauli, trace_distance, HermitianOperator};
    use num_complex::Complex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(t_max: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect()
    }

    fn plain_response(delta_weight: f64) -> ExponentialSumResponse<f64> {
        ExponentialSumResponse {
            real_terms: vec![],
            imag_terms: vec![],
            delta_weight,
        }
    }

    fn two_level_model(
        h: CMatrix<f64>,
        v: CMatrix<f64>,
        resp: ExponentialSumResponse<f64>,
    ) -> SystemModel<f64> {
        SystemModel::new(
            HermitianOperator::new(h).unwrap(),
            vec![HermitianOperator::new(v).unwrap()],
            resp,
        )
        .unwrap()
    }

    #[test]
    fn hierarchy_counts_match_enumeration() {
        // Two slots at tier 1: zero vector plus the two unit vectors.
        let [_, _, _, sz] = pauli::<f64>();
        let resp = ExponentialSumResponse {
            real_terms: vec![ExpTerm {
                c: Complex::new(1.0, 0.0),
                mu: Complex::new(2.0, 0.0),
            }],
            imag_terms: vec![ExpTerm {
                c: Complex::new(0.5, 0.0),
                mu: Complex::new(3.0, 0.0),
            }],
            delta_weight: 0.0,
        };
        let model = two_level_model(CMatrix::zeros(2, 2), sz.clone(), resp);
        let cfg = HeomConfig {
            n_c: 1,
            ..Default::default()
        };
        let hier = build_hierarchy(&model, &cfg).unwrap();
        assert_eq!(hier.len(), 3);
        assert_eq!(hier.len(), hierarchy_count(2, 1));

        // 8 slots (4 real + 4 imaginary terms) at tier 3.
        let model = two_level_model(CMatrix::zeros(2, 2), sz.clone(), ohmic_reference_response());
        let cfg = HeomConfig {
            n_c: 3,
            ..Default::default()
        };
        let hier = build_hierarchy(&model, &cfg).unwrap();
        assert_eq!(hier.len(), 165);
        assert_eq!(hierarchy_count(8, 3), 165);

        // 14 slots (7 baths × 2 terms) at tier 4.
        let resp = ExponentialSumResponse {
            real_terms: vec![ExpTerm {
                c: Complex::new(1.0, 0.0),
                mu: Complex::new(20.0, 0.0),
            }],
            imag_terms: vec![ExpTerm {
                c: Complex::new(0.2, 0.0),
                mu: Complex::new(20.0, 0.0),
            }],
            delta_weight: 0.0,
        };
        let couplings: Vec<_> = (0..7)
            .map(|s| {
                HermitianOperator::new(CMatrix::<f64>::from_fn(7, 7, |i, j| {
                    if i == s && j == s {
                        Complex::new(1.0, 0.0)
                    } else {
                        Complex::new(0.0, 0.0)
                    }
                }))
                .unwrap()
            })
            .collect();
        let model = SystemModel::new(
            HermitianOperator::new(CMatrix::zeros(7, 7)).unwrap(),
            couplings,
            resp,
        )
        .unwrap();
        let cfg = HeomConfig {
            n_c: 4,
            ..Default::default()
        };
        let hier = build_hierarchy(&model, &cfg).unwrap();
        assert_eq!(hier.len(), 3060);
        assert_eq!(hierarchy_count(14, 4), 3060);
        assert_eq!(hier.slot_count(), 14);
    }

    #[test]
    fn per_slot_truncation_counts_and_agreement() {
        let [_, _, _, sz] = pauli::<f64>();
        let resp = ExponentialSumResponse {
            real_terms: vec![ExpTerm {
                c: Complex::new(0.05, 0.0),
                mu: Complex::new(2.0, 0.0),
            }],
            imag_terms: vec![ExpTerm {
                c: Complex::new(0.02, 0.0),
                mu: Complex::new(3.0, 0.0),
            }],
            delta_weight: 0.0,
        };
        let [_, sx, _, _] = pauli::<f64>();
        let h = sx * Complex::new(std::f64::consts::FRAC_PI_4, 0.0);
        let model = two_level_model(h, sz, resp);

        let per_slot = HeomConfig {
            n_c: 2,
            truncation: TruncationRule::PerSlot,
            ..Default::default()
        };
        let hier = build_hierarchy(&model, &per_slot).unwrap();
        assert_eq!(hier.len(), 9); // (N_c+1)^slots = 3²

        // Once both cuts are deep enough, the two truncation rules give the
        // same physical trajectory.
        let g = grid(2.0, 41);
        let rho0 = DensityMatrix::pure_site(2, 0).unwrap();
        let deep_total = HeomConfig {
            n_c: 6,
            ..Default::default()
        };
        let deep_slot = HeomConfig {
            n_c: 6,
            truncation: TruncationRule::PerSlot,
            ..Default::default()
        };
        let a = propagate_heom(&model, &rho0, &g, &deep_total).unwrap();
        let b = propagate_heom(&model, &rho0, &g, &deep_slot).unwrap();
        assert!(max_trace_distance(&a, &b).unwrap() < 1e-7);
    }

    #[test]
    fn memory_cap_refuses_large_hierarchy() {
        let [_, _, _, sz] = pauli::<f64>();
        let model = two_level_model(
            CMatrix::zeros(2, 2),
            sz,
            ohmic_reference_response::<f64>(),
        );
        let cfg = HeomConfig {
            n_c: 30,
            mem_cap_mb: Some(1),
            ..Default::default()
        };
        match build_hierarchy(&model, &cfg) {
            Err(Error::MemoryCap { count, .. }) => {
                assert_eq!(count, hierarchy_count(8, 30));
            }
            other => panic!("expected memory cap refusal, got {other:?}"),
        }
    }

    #[test]
    fn no_terms_no_delta_gives_unitary_dynamics() {
        let [_, sx, _, sz] = pauli::<f64>();
        let h = sx * Complex::new(std::f64::consts::FRAC_PI_4, 0.0);
        let model = two_level_model(h.clone(), sz, plain_response(0.0));
        let g = grid(3.0, 31);
        let rho0 = DensityMatrix::pure_site(2, 0).unwrap();
        let cfg = HeomConfig {
            n_c: 0,
            ..Default::default()
        };
        let traj = propagate_heom(&model, &rho0, &g, &cfg).unwrap();
        for (&t, state) in g.iter().zip(traj.states.iter()) {
            let u = crate::expm::matrix_exponential(&(h.clone() * Complex::new(0.0, -t))).unwrap();
            let exact = &u * rho0.matrix() * u.adjoint();
            assert!(trace_distance(state.matrix(), &exact).unwrap() < 1e-7);
        }
    }

    #[test]
    fn zero_coupling_stays_unitary_at_any_tier() {
        let [_, sx, _, _] = pauli::<f64>();
        let h = sx * Complex::new(1.3, 0.0);
        let model = two_level_model(h.clone(), CMatrix::zeros(2, 2), ohmic_reference_response());
        let g = grid(2.0, 21);
        let rho0 = DensityMatrix::pure_site(2, 0).unwrap();
        let cfg = HeomConfig {
            n_c: 2,
            ..Default::default()
        };
        let traj = propagate_heom(&model, &rho0, &g, &cfg).unwrap();
        let t = *g.last().unwrap();
        let u = crate::expm::matrix_exponential(&(h * Complex::new(0.0, -t))).unwrap();
        let exact = &u * rho0.matrix() * u.adjoint();
        assert!(trace_distance(traj.states.last().unwrap().matrix(), &exact).unwrap() < 1e-7);
    }

    #[test]
    fn delta_weight_alone_is_pure_dephasing() {
        // V = σ_z with a δ-correlated bath: ρ01 decays at exactly 2·δw.
        let w = 0.35;
        let [_, _, _, sz] = pauli::<f64>();
        let model = two_level_model(CMatrix::zeros(2, 2), sz, plain_response(w));
        let g = grid(2.0, 21);
        let plus = CMatrix::<f64>::from_fn(2, 2, |_, _| Complex::new(0.5, 0.0));
        let rho0 = DensityMatrix::from_propagation(plus, 1e-12).unwrap();
        let cfg = HeomConfig {
            n_c: 0,
            ..Default::default()
        };
        let traj = propagate_heom(&model, &rho0, &g, &cfg).unwrap();
        for (&t, state) in g.iter().zip(traj.states.iter()) {
            let expected = 0.5 * (-2.0 * w * t).exp();
            assert!((state.matrix()[(0, 1)].re - expected).abs() < 1e-8);
            assert!(state.matrix()[(0, 1)].im.abs() < 1e-10);
        }
    }

    #[test]
    fn rhs_is_linear() {
        let [_, sx, _, sz] = pauli::<f64>();
        let h = sx * Complex::new(0.8, 0.0);
        let model = two_level_model(h, sz, ohmic_reference_response());
        let cfg = HeomConfig {
            n_c: 2,
            ..Default::default()
        };
        let hier = build_hierarchy(&model, &cfg).unwrap();
        let op = HeomOperator::new(&model, hier);
        let len = op.hier.len() * 4;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut rand_vec = || {
            CVector::<f64>::from_fn(len, |_, _| {
                Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
        };
        let s1 = rand_vec();
        let s2 = rand_vec();
        let a = Complex::new(0.37, -1.2);
        let b = Complex::new(-0.55, 0.41);
        let combined = op.rhs(&(&s1 * a + &s2 * b));
        let split = op.rhs(&s1) * a + op.rhs(&s2) * b;
        let dev = (combined - split).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(dev < 1e-12, "rhs nonlinearity {dev}");
    }

    #[test]
    fn spin_boson_converges_at_tier_three() {
        let spec = spin_boson_default::<f64>(1.0).unwrap();
        let g = grid(5.0, 51);
        let rho0 = spec.initial_state();
        let mut cfg = HeomConfig::default();
        cfg.n_c = 3;
        let t3 = propagate_heom(&spec.system, &rho0, &g, &cfg).unwrap();
        cfg.n_c = 4;
        let t4 = propagate_heom(&spec.system, &rho0, &g, &cfg).unwrap();
        assert!(max_trace_distance(&t3, &t4).unwrap() < 1e-3);

        let (_, used) = converge_heom(&spec.system, &rho0, &g, &HeomConfig::default(), 8).unwrap();
        assert!((3..=4).contains(&used), "converged at tier {used}");
    }

    #[test]
    fn successive_tier_distances_shrink() {
        let spec = spin_boson_default::<f64>(1.0).unwrap();
        let g = grid(5.0, 26);
        let rho0 = spec.initial_state();
        let mut prev: Option<Trajectory<f64>> = None;
        let mut dists = Vec::new();
        for n_c in 1..=4 {
            let cfg = HeomConfig {
                n_c,
                ..Default::default()
            };
            let cur = propagate_heom(&spec.system, &rho0, &g, &cfg).unwrap();
            if let Some(p) = &prev {
                dists.push(max_trace_distance(p, &cur).unwrap());
            }
            prev = Some(cur);
        }
        for w in dists.windows(2) {
            assert!(w[1] <= w[0] * 1.5, "tier distances not shrinking: {dists:?}");
        }
    }

    #[test]
    fn weak_coupling_matches_tcl2() {
        let spec = spin_boson_default::<f64>(1.0).unwrap();
        let g = grid(5.0, 51);
        let rho0 = spec.initial_state();
        let cfg = HeomConfig {
            n_c: 4,
            ..Default::default()
        };
        let heom = propagate_heom(&spec.system, &rho0, &g, &cfg).unwrap();
        let tcl2 =
            propagate_tcl(&spec.system, 2, &rho0, &g, &PropagationConfig::default()).unwrap();
        assert!(max_trace_distance(&heom, &tcl2).unwrap() < 0.05);
    }

    #[test]
    fn converge_heom_trivial_at_zero_coupling() {
        let [_, sx, _, _] = pauli::<f64>();
        let h = sx * Complex::new(1.0, 0.0);
        let model = two_level_model(h, CMatrix::zeros(2, 2), ohmic_reference_response());
        let g = grid(1.0, 11);
        let rho0 = DensityMatrix::pure_site(2, 0).unwrap();
        let (_, used) = converge_heom(&model, &rho0, &g, &HeomConfig::default(), 3).unwrap();
        assert_eq!(used, 1);
    }

    #[test]
    fn trace_and_hermiticity_preserved() {
        // from_propagation enforces both at the trajectory tolerance; this
        // re-checks the raw zero-index block at a tighter bound.
        let spec = spin_boson_default::<f64>(1.0).unwrap();
        let g = grid(5.0, 11);
        let rho0 = spec.initial_state();
        let cfg = HeomConfig {
            n_c: 3,
            ..Default::default()
        };
        let traj = propagate_heom(&spec.system, &rho0, &g, &cfg).unwrap();
        for state in &traj.states {
            let m = state.matrix();
            let tr: Complex<f64> = m.trace();
            assert!((tr.re - 1.0).abs() < 1e-7);
            assert!(tr.im.abs() < 1e-9);
            assert!((m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-7);
        }
    }
}

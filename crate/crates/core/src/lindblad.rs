//! Lindbladian generators, dissipative Hamiltonians, evolution, semigroup
//! axiom checks and the Dyson–Phillips expansion.
//!
//! The Lindbladian is `𝓛ρ = [H₀,ρ] − (i/2){ΣC*C, ρ} + iΣCρC*`, and the stored
//! generator `G` satisfies `stack((−i𝓛)ρ) = G·stack(ρ)`, so the propagator
//! `e^{−it𝓛}` is `exp(tG)`.

use crate::linalg::{
    self, apply_super, c, choi, frobenius, identity, kron, matmul, min_eig_hermitian, op_exp, stack, trace, trace_norm, unstack, CMat,
    CVec, LinalgError, GROWTH_CAP,
};
use crate::random;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

/// `Σ_j C_j* C_j`.
pub fn absorption(cs: &[CMat], d: usize) -> CMat {
    cs.iter().fold(CMat::zeros(d, d), |acc, cj| acc + matmul(&cj.adjoint(), cj))
}

fn check_dims(h: &CMat, cs: &[CMat]) -> Result<usize, LinalgError> {
    let d = h.nrows();
    if h.ncols() != d {
        return Err(LinalgError::Dimension("Hamiltonian is not square".into()));
    }
    for (j, cj) in cs.iter().enumerate() {
        if cj.nrows() != d || cj.ncols() != d {
            return Err(LinalgError::Dimension(format!("coupling {j} is {}x{}, expected {d}x{d}", cj.nrows(), cj.ncols())));
        }
    }
    Ok(d)
}

/// `H = H_sa − (i/2) Σ C_j* C_j`.
pub fn dissipative_hamiltonian(hsa: &CMat, cs: &[CMat]) -> Result<CMat, LinalgError> {
    let d = check_dims(hsa, cs)?;
    Ok(hsa - absorption(cs, d).map(|z| z * c(0.0, 0.5)))
}

/// Generator matrix `G` with `stack((−i𝓛)ρ) = G·stack(ρ)`.
pub fn build_lindbladian(h0: &CMat, cs: &[CMat]) -> Result<CMat, LinalgError> {
    let h = dissipative_hamiltonian(h0, cs)?;
    Ok(generator_from_parts(&h, cs, 1.0))
}

/// `−i(H⊗1) + i(1⊗H̄) + jump_sign·Σ C⊗C̄`; `jump_sign = −1` is the corrupted fixture.
pub fn generator_from_parts(h: &CMat, cs: &[CMat], jump_sign: f64) -> CMat {
    let d = h.nrows();
    let id = identity(d);
    let mut g = kron(h, &id).map(|z| z * c(0.0, -1.0)) + kron(&id, &h.map(|z| z.conj())).map(|z| z * c(0.0, 1.0));
    for cj in cs {
        g += kron(cj, &cj.map(|z| z.conj())).map(|z| z * jump_sign);
    }
    g
}

/// Generator whose dissipator has its jump term sign-flipped; not a Lindbladian.
pub fn corrupted_lindbladian(h0: &CMat, cs: &[CMat]) -> Result<CMat, LinalgError> {
    let h = dissipative_hamiltonian(h0, cs)?;
    Ok(generator_from_parts(&h, cs, -1.0))
}

/// Generator of the pure conjugation `ρ ↦ e^{−itH₀} ρ e^{itH₀}`.
pub fn free_generator(h0: &CMat) -> CMat {
    generator_from_parts(h0, &[], 1.0)
}

/// `𝓛ρ` itself (not the generator).
pub fn apply_lindbladian(h0: &CMat, cs: &[CMat], rho: &CMat) -> CMat {
    let d = h0.nrows();
    let k = absorption(cs, d);
    let mut out = (h0 * rho - rho * h0) - (&k * rho + rho * &k).map(|z| z * c(0.0, 0.5));
    for cj in cs {
        out += (cj * rho * cj.adjoint()).map(|z| z * c(0.0, 1.0));
    }
    out
}

/// `exp(tG)`; negative `t` is the inverse propagation used by scattering diagnostics.
pub fn propagator(g: &CMat, t: f64) -> Result<CMat, LinalgError> {
    if t == 0.0 {
        return Ok(identity(g.nrows()));
    }
    // op_exp computes e^{−isA}; with A = iG and s = t this is e^{tG}.
    linalg::op_exp(&g.map(|z| z * c(0.0, 1.0)), t)
}

/// Append-only cache of propagators keyed by time.
#[derive(Debug, Default)]
pub struct PropagatorCache {
    entries: Mutex<BTreeMap<u64, Arc<CMat>>>,
}

impl PropagatorCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, g: &CMat, t: f64) -> Result<Arc<CMat>, LinalgError> {
        let key = t.to_bits();
        if let Some(p) = self.entries.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(p));
        }
        let p = Arc::new(propagator(g, t)?);
        self.entries.lock().expect("cache lock").entry(key).or_insert_with(|| Arc::clone(&p));
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `ρ_t = unstack(exp(tG)·stack(ρ))`.
pub fn evolve_density(g: &CMat, rho: &CMat, t: f64) -> Result<CMat, LinalgError> {
    let p = propagator(g, t)?;
    Ok(apply_super(&p, rho))
}

/// `e^{−itH}u`.
pub fn evolve_vector(h: &CMat, u: &CVec, t: f64) -> Result<CVec, LinalgError> {
    Ok(op_exp(h, t)? * u)
}

/// Trapezoid value of `∫₀ᵗ Σ_j‖C_j e^{−isH}u‖² ds` (or with `e^{isH*}` when `adjoint`)
/// against the norm loss `‖u‖² − ‖e^{∓itH^{(*)}}u‖²`. Returns `(integral, norm_loss)`.
pub fn energy_balance(h: &CMat, cs: &[CMat], u: &CVec, t: f64, dt: f64, adjoint: bool) -> Result<(f64, f64), LinalgError> {
    let n = ((t / dt).round() as usize).max(1);
    let step = t / n as f64;
    // e^{isH*} = e^{−is(−H*)}.
    let gen = if adjoint { h.adjoint().map(|z| -z) } else { h.clone() };
    let u1 = op_exp(&gen, step)?;
    let mut v = u.clone();
    let mut integral = 0.0;
    for k in 0..=n {
        let f: f64 = cs.iter().map(|cj| (cj * &v).norm_squared()).sum();
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        integral += w * step * f;
        if k < n {
            v = &u1 * v;
        }
    }
    let loss = u.norm_squared() - v.norm_squared();
    Ok((integral, loss))
}

/// Tolerances for the semigroup axiom checks.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QdsTolerances {
    pub trace: f64,
    pub positivity: f64,
    pub contraction: f64,
    pub choi: f64,
    pub semigroup: f64,
    pub continuity: f64,
}

impl Default for QdsTolerances {
    fn default() -> Self {
        Self { trace: 1e-9, positivity: 1e-9, contraction: 1e-9, choi: 1e-8, semigroup: 1e-8, continuity: 1e-6 }
    }
}

/// Worst-case residuals of the semigroup axioms over sampled states and the time grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QdsReport {
    pub t_grid: Vec<f64>,
    pub samples: usize,
    /// max |tr ρ_t − tr ρ|.
    pub trace_residual: f64,
    /// min over states of λ_min(ρ_t).
    pub positivity_min_eig: f64,
    /// max of ‖ρ_t‖₁ − ‖ρ‖₁ over Hermitian ρ.
    pub contraction_excess: f64,
    /// min over t of λ_min(choi(exp(tG))).
    pub choi_min_eig: f64,
    /// max over grid pairs of ‖P(s)P(t) − P(s+t)‖_F / (1 + ‖P(s+t)‖_F).
    pub semigroup_residual: f64,
    /// max over states of ‖P(ε)ρ − ρ‖₁ at ε = 1e−8.
    pub continuity_residual: f64,
    /// max over general unit-trace-norm ρ of ‖ρ_t‖₁ (must stay ≤ 2).
    pub general_bound: f64,
}

impl QdsReport {
    pub fn failures(&self, tol: &QdsTolerances) -> Vec<String> {
        let mut f = Vec::new();
        if self.trace_residual > tol.trace {
            f.push(format!("trace residual {:.3e} > {:.1e}", self.trace_residual, tol.trace));
        }
        if self.positivity_min_eig < -tol.positivity {
            f.push(format!("positivity min eig {:.3e} < -{:.1e}", self.positivity_min_eig, tol.positivity));
        }
        if self.contraction_excess > tol.contraction {
            f.push(format!("contraction excess {:.3e} > {:.1e}", self.contraction_excess, tol.contraction));
        }
        if self.choi_min_eig < -tol.choi {
            f.push(format!("Choi min eig {:.3e} < -{:.1e}", self.choi_min_eig, tol.choi));
        }
        if self.semigroup_residual > tol.semigroup {
            f.push(format!("semigroup residual {:.3e} > {:.1e}", self.semigroup_residual, tol.semigroup));
        }
        if self.continuity_residual > tol.continuity {
            f.push(format!("continuity residual {:.3e} > {:.1e}", self.continuity_residual, tol.continuity));
        }
        if self.general_bound > 2.0 + tol.contraction {
            f.push(format!("general-state bound {:.6} > 2", self.general_bound));
        }
        f
    }

    pub fn passes(&self, tol: &QdsTolerances) -> bool {
        self.failures(tol).is_empty()
    }
}

/// Check the quantum-dynamical-semigroup axioms of `exp(tG)` on `samples` random
/// states drawn from `seed`.
pub fn qds_report(g: &CMat, samples: usize, seed: u64, t_grid: &[f64]) -> Result<QdsReport, LinalgError> {
    let d = linalg::super_dim(g);
    let mut rng = random::rng(seed);
    let states: Vec<CMat> = (0..samples).map(|k| random::density_matrix(d, 1 + k % d, &mut rng)).collect();
    let hermitians: Vec<CMat> = (0..samples).map(|_| random::hermitian_trace_class(d, &mut rng)).collect();
    let generals: Vec<CMat> = (0..samples).map(|_| random::trace_class(d, &mut rng)).collect();
    let props: Vec<CMat> = t_grid.iter().map(|&t| propagator(g, t)).collect::<Result<_, _>>()?;

    let mut rep = QdsReport {
        t_grid: t_grid.to_vec(),
        samples,
        trace_residual: 0.0,
        positivity_min_eig: f64::INFINITY,
        contraction_excess: f64::NEG_INFINITY,
        choi_min_eig: f64::INFINITY,
        semigroup_residual: 0.0,
        continuity_residual: 0.0,
        general_bound: 0.0,
    };
    for p in &props {
        for rho in &states {
            let out = apply_super(p, rho);
            rep.trace_residual = rep.trace_residual.max((trace(&out) - trace(rho)).norm());
            rep.positivity_min_eig = rep.positivity_min_eig.min(min_eig_hermitian(&out));
        }
        for x in &hermitians {
            let out = apply_super(p, x);
            rep.contraction_excess = rep.contraction_excess.max(trace_norm(&out) - trace_norm(x));
        }
        for x in &generals {
            rep.general_bound = rep.general_bound.max(trace_norm(&apply_super(p, x)) / trace_norm(x));
        }
        rep.choi_min_eig = rep.choi_min_eig.min(min_eig_hermitian(&choi(p)));
    }
    for (i, &s) in t_grid.iter().enumerate() {
        for (j, &t) in t_grid.iter().enumerate().skip(i) {
            let lhs = matmul(&props[i], &props[j]);
            let rhs = propagator(g, s + t)?;
            let r = frobenius(&(lhs - &rhs)) / (1.0 + frobenius(&rhs));
            rep.semigroup_residual = rep.semigroup_residual.max(r);
        }
    }
    let eps = 1e-8;
    let pe = propagator(g, eps)?;
    for rho in &states {
        rep.continuity_residual = rep.continuity_residual.max(trace_norm(&(apply_super(&pe, rho) - rho)));
    }
    Ok(rep)
}

/// One Dyson–Phillips term `𝒮ₙ(t)ρ`.
#[derive(Debug, Clone)]
pub struct DysonTermResult {
    pub order: usize,
    pub value: CMat,
    pub trace_norm: f64,
    pub quadrature_step: f64,
}

/// Memoized Dyson–Phillips terms on the uniform grid `t_m = m·dt`, `m = 0..=N`.
///
/// `𝒮₀(t)ρ = e^{−itH}ρe^{itH*}` and
/// `𝒮ₙ(t)ρ = ∫₀ᵗ e^{−i(t−s)H} Σ_j C_j(𝒮ₙ₋₁(s)ρ)C_j* e^{i(t−s)H*} ds` by composite trapezoid.
pub struct DysonSeries {
    cs: Vec<CMat>,
    steps: usize,
    dt: f64,
    /// `e^{−i m dt H}` for `m = 0..=N`.
    props: Vec<CMat>,
    /// `terms[n][m] = 𝒮ₙ(t_m)ρ`.
    terms: Vec<Vec<CMat>>,
}

impl DysonSeries {
    pub fn new(h: &CMat, cs: &[CMat], rho: &CMat, t: f64, dt: f64) -> Result<Self, LinalgError> {
        check_dims(h, cs)?;
        let steps = ((t / dt).round() as usize).max(1);
        let step = t / steps as f64;
        let u1 = op_exp(h, step)?;
        let mut props = Vec::with_capacity(steps + 1);
        props.push(identity(h.nrows()));
        for m in 0..steps {
            props.push(&u1 * &props[m]);
        }
        let zeroth = props.iter().map(|u| u * rho * u.adjoint()).collect();
        Ok(Self { cs: cs.to_vec(), steps, dt: step, props, terms: vec![zeroth] })
    }

    pub fn quadrature_step(&self) -> f64 {
        self.dt
    }

    fn extend_to(&mut self, n: usize) {
        while self.terms.len() <= n {
            let prev = self.terms.last().expect("zeroth term present");
            let jumped: Vec<CMat> = prev
                .iter()
                .map(|s| self.cs.iter().fold(CMat::zeros(s.nrows(), s.ncols()), |acc, cj| acc + cj * s * cj.adjoint()))
                .collect();
            let mut next = Vec::with_capacity(self.steps + 1);
            for m in 0..=self.steps {
                let mut acc = CMat::zeros(jumped[0].nrows(), jumped[0].ncols());
                if m > 0 {
                    for j in 0..=m {
                        let w = if j == 0 || j == m { 0.5 } else { 1.0 };
                        let u = &self.props[m - j];
                        acc += (u * &jumped[j] * u.adjoint()).map(|z| z * (w * self.dt));
                    }
                }
                next.push(acc);
            }
            self.terms.push(next);
        }
    }

    /// `𝒮ₙ(t)ρ` at the final grid time.
    pub fn term(&mut self, n: usize) -> DysonTermResult {
        self.extend_to(n);
        let value = self.terms[n][self.steps].clone();
        let tn = trace_norm(&value);
        DysonTermResult { order: n, value, trace_norm: tn, quadrature_step: self.dt }
    }

    /// `Σ_{n≤N} 𝒮ₙ(t)ρ`.
    pub fn partial_sum(&mut self, n_max: usize) -> CMat {
        self.extend_to(n_max);
        (0..=n_max).fold(CMat::zeros(self.props[0].nrows(), self.props[0].ncols()), |acc, n| acc + &self.terms[n][self.steps])
    }
}

/// Single-shot wrapper around [`DysonSeries`].
pub fn dyson_term(n: usize, t: f64, h: &CMat, cs: &[CMat], rho: &CMat, dt: f64) -> Result<DysonTermResult, LinalgError> {
    Ok(DysonSeries::new(h, cs, rho, t, dt)?.term(n))
}

pub fn dyson_partial_sum(n_max: usize, t: f64, h: &CMat, cs: &[CMat], rho: &CMat, dt: f64) -> Result<CMat, LinalgError> {
    Ok(DysonSeries::new(h, cs, rho, t, dt)?.partial_sum(n_max))
}

/// `‖e^{−it𝓛}‖` probed on states: `max_ρ ‖exp(tG)ρ‖₁` over the given states.
pub fn probed_trace_norm_growth(g: &CMat, t: f64, states: &[CMat]) -> Result<f64, LinalgError> {
    let p = linalg::op_exp_capped(&g.map(|z| z * c(0.0, 1.0)), t, GROWTH_CAP)?;
    Ok(states.iter().map(|r| trace_norm(&apply_super(&p, r)) / trace_norm(r)).fold(0.0, f64::max))
}

/// Classical fourth-order Runge–Kutta for `dρ/dt = −i𝓛ρ`, used as an independent oracle.
pub fn rk4_evolve(h0: &CMat, cs: &[CMat], rho: &CMat, t: f64, dt: f64) -> CMat {
    let n = ((t / dt).round() as usize).max(1);
    let step = t / n as f64;
    let f = |r: &CMat| apply_lindbladian(h0, cs, r).map(|z| z * c(0.0, -1.0));
    let mut r = rho.clone();
    for _ in 0..n {
        let k1 = f(&r);
        let k2 = f(&(&r + k1.map(|z| z * (0.5 * step))));
        let k3 = f(&(&r + k2.map(|z| z * (0.5 * step))));
        let k4 = f(&(&r + k3.map(|z| z * step)));
        r += (k1 + k2.map(|z| z * 2.0) + k3.map(|z| z * 2.0) + k4).map(|z| z * (step / 6.0));
    }
    r
}

/// `stack(ρ)` helper for callers that work with vectorized states.
pub fn stacked(rho: &CMat) -> CVec {
    stack(rho)
}

pub fn unstacked(v: &CVec, d: usize) -> CMat {
    unstack(v, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eig, ONE, ZERO};

    fn pauli_z() -> CMat {
        CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, c(-1.0, 0.0)])
    }

    #[test]
    fn free_generator_conjugates() {
        let mut rng = random::rng(1);
        let h0 = random::hermitian(3, 1.0, &mut rng);
        let g = build_lindbladian(&h0, &[]).unwrap();
        let rho = random::density_matrix(3, 2, &mut rng);
        let u = op_exp(&h0, 0.8).unwrap();
        let direct = &u * &rho * u.adjoint();
        assert!(frobenius(&(evolve_density(&g, &rho, 0.8).unwrap() - direct)) < 1e-12);
        let (a, _) = hermitian_eig(&rho);
        let (b, _) = hermitian_eig(&evolve_density(&g, &rho, 2.5).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn generator_matches_direct_lindbladian() {
        let mut rng = random::rng(2);
        let (h0, cs) = random::model(4, 2, 1.0, 0.7, &mut rng);
        let g = build_lindbladian(&h0, &cs).unwrap();
        let rho = random::density_matrix(4, 4, &mut rng);
        let via_g = apply_super(&g, &rho);
        let direct = apply_lindbladian(&h0, &cs, &rho).map(|z| z * c(0.0, -1.0));
        assert!(frobenius(&(via_g - direct)) < 1e-13);
        assert!(trace(&apply_lindbladian(&h0, &cs, &rho)).norm() < 1e-11);
    }

    #[test]
    fn qubit_dephasing_closed_form() {
        let gamma: f64 = 0.3;
        let cz = pauli_z().map(|z| z * gamma.sqrt());
        let g = build_lindbladian(&CMat::zeros(2, 2), &[cz]).unwrap();
        let rho = CMat::from_row_slice(2, 2, &[c(0.6, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(0.4, 0.0)]);
        for &t in &[0.0, 0.5, 2.0] {
            let out = evolve_density(&g, &rho, t).unwrap();
            // d/dt ρ01 = γ(σz ρ σz − ρ)_{01} = −2γ ρ01.
            assert!((out[(0, 1)] - rho[(0, 1)] * (-2.0 * gamma * t).exp()).norm() < 1e-13);
            assert!((out[(0, 0)] - rho[(0, 0)]).norm() < 1e-13);
        }
        let rep = qds_report(&g, 10, 4, &[1.0]).unwrap();
        assert!(rep.trace_residual <= 1e-11);
        assert!(rep.choi_min_eig >= -1e-10);
    }

    #[test]
    fn dissipative_hamiltonian_examples() {
        let mut rng = random::rng(3);
        let h = random::hermitian(3, 1.0, &mut rng);
        assert_eq!(dissipative_hamiltonian(&h, &[]).unwrap(), h);
        let hd = dissipative_hamiltonian(&CMat::zeros(2, 2), &[identity(2)]).unwrap();
        assert!(frobenius(&(hd.clone() - identity(2).map(|z| z * c(0.0, -0.5)))) < 1e-15);
        let e = op_exp(&hd, 1.3).unwrap();
        assert!(frobenius(&(e - identity(2).map(|z| z * (-0.65f64).exp()))) < 1e-14);
        let (h0, cs) = random::model(5, 3, 1.0, 1.0, &mut rng);
        let hh = dissipative_hamiltonian(&h0, &cs).unwrap();
        let mut worst = f64::INFINITY;
        for _ in 0..200 {
            let u = random::unit_vector(5, &mut rng);
            worst = worst.min(-(u.adjoint() * &hh * &u)[(0, 0)].im);
        }
        assert!(worst >= -1e-12);
    }

    #[test]
    fn evolve_vector_examples() {
        let mut rng = random::rng(4);
        let h = random::hermitian(4, 1.0, &mut rng);
        let u = random::unit_vector(4, &mut rng);
        for &t in &[-3.0, 0.4, 7.0] {
            assert!((evolve_vector(&h, &u, t).unwrap().norm() - 1.0).abs() < 1e-12);
        }
        let hd = identity(4).map(|z| z * c(0.0, -0.5));
        assert!((evolve_vector(&hd, &u, 2.0).unwrap().norm() - (-1.0f64).exp()).abs() < 1e-13);
        let (h0, cs) = random::model(4, 2, 1.0, 0.6, &mut rng);
        let hh = dissipative_hamiltonian(&h0, &cs).unwrap();
        let (integral, loss) = energy_balance(&hh, &cs, &u, 1.5, 1e-3, false).unwrap();
        assert!((integral - loss).abs() < 1e-6);
    }

    #[test]
    fn rk4_oracle_agrees_with_propagator() {
        // Amplitude damping plus a transverse field.
        let h0 = CMat::from_row_slice(2, 2, &[ZERO, c(0.4, 0.0), c(0.4, 0.0), c(1.0, 0.0)]);
        let lower = CMat::from_row_slice(2, 2, &[ZERO, c(0.5f64.sqrt(), 0.0), ZERO, ZERO]);
        let rho = CMat::from_row_slice(2, 2, &[c(0.2, 0.0), c(0.1, 0.3), c(0.1, -0.3), c(0.8, 0.0)]);
        let g = build_lindbladian(&h0, &[lower.clone()]).unwrap();
        let exact = evolve_density(&g, &rho, 1.7).unwrap();
        let oracle = rk4_evolve(&h0, &[lower], &rho, 1.7, 1e-3);
        assert!(trace_norm(&(exact - oracle)) < 1e-6);
    }

    #[test]
    fn qds_unitary_channel_is_clean() {
        let mut rng = random::rng(5);
        let h0 = random::hermitian(3, 1.0, &mut rng);
        let g = build_lindbladian(&h0, &[]).unwrap();
        let rep = qds_report(&g, 8, 9, &[0.1, 1.0]).unwrap();
        assert!(rep.trace_residual <= 1e-10);
        assert!(rep.choi_min_eig >= -1e-10);
        assert!(rep.semigroup_residual <= 1e-10);
        assert!(rep.contraction_excess <= 1e-10);
    }

    #[test]
    fn corrupted_dissipator_fails_choi() {
        let mut rng = random::rng(6);
        let (h0, cs) = random::model(3, 1, 1.0, 0.8, &mut rng);
        let g = corrupted_lindbladian(&h0, &cs).unwrap();
        let rep = qds_report(&g, 5, 1, &[0.1]).unwrap();
        assert!(rep.choi_min_eig < -1e-3);
        assert!(rep.failures(&QdsTolerances::default()).iter().any(|f| f.contains("Choi")));
    }

    #[test]
    fn dyson_examples() {
        let h0 = CMat::from_row_slice(2, 2, &[ZERO, c(0.5, 0.0), c(0.5, 0.0), c(0.3, 0.0)]);
        let cq = CMat::from_row_slice(2, 2, &[ZERO, c(0.6, 0.0), c(0.2, 0.0), ZERO]);
        let rho = CMat::from_row_slice(2, 2, &[c(0.7, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.3, 0.0)]);
        let h = dissipative_hamiltonian(&h0, &[cq.clone()]).unwrap();
        let mut ser = DysonSeries::new(&h, &[cq.clone()], &rho, 1.0, 1e-3).unwrap();
        let s0 = ser.term(0).value;
        let u = op_exp(&h, 1.0).unwrap();
        assert!(frobenius(&(s0 - &u * &rho * u.adjoint())) < 1e-12);
        let exact = evolve_density(&build_lindbladian(&h0, &[cq.clone()]).unwrap(), &rho, 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for n in 0..=6 {
            let err = trace_norm(&(ser.partial_sum(n) - &exact));
            assert!(err <= prev + 1e-12);
            prev = err;
        }
        assert!(prev <= 1e-4);
        let zero = CMat::zeros(2, 2);
        let r = dyson_term(2, 1.0, &h0, &[zero.clone()], &rho, 1e-2).unwrap();
        assert_eq!(r.trace_norm, 0.0);
        let exact0 = evolve_density(&build_lindbladian(&h0, &[]).unwrap(), &rho, 1.0).unwrap();
        assert!(frobenius(&(dyson_partial_sum(0, 1.0, &h0, &[], &rho, 1e-2).unwrap() - exact0)) < 1e-12);
    }

    #[test]
    fn propagator_cache_reuses_entries() {
        let g = build_lindbladian(&identity(2), &[]).unwrap();
        let cache = PropagatorCache::new();
        let a = cache.get(&g, 0.5).unwrap();
        let b = cache.get(&g, 0.5).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(cache.len(), 1);
    }
}

//! Wave operators of a Lindbladian `𝓛` against the free conjugation group `𝓛₀ = ad(H₀)`.
//!
//! Superoperators act on row-major stacked matrices. `e^{−it𝓛}` is `exp(tG)` and
//! `e^{it𝓛₀}` is the conjugation `ρ ↦ UρU*`, `U = e^{itH₀}`, whose superoperator is
//! `U ⊗ Ū`; products with it are applied without forming the Kronecker product.

use crate::hilbert::{wave_operator, TimeSign};
use crate::limits::{induced_trace_norm, LimitError, LimitResult, Metric, PlateauTracker, PropagatorWalk, Schedule};
use crate::linalg::{
    apply_super, identity, kron_left_mul, kron_right_mul, matmul, min_eig_hermitian, op_exp, stack, trace, trace_norm, unstack, CMat, CVec,
    LinalgError,
};
use crate::lindblad::{dissipative_hamiltonian, free_generator, generator_from_parts, propagator};
use crate::report::{Clause, Verdict};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScatteringError {
    #[error(transparent)]
    Limit(#[from] LimitError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("input vector has norm {0}, expected 1")]
    NotNormalized(f64),
    #[error("required limit did not converge: {0}")]
    NotConverged(String),
}

impl From<crate::limits::ScheduleError> for ScatteringError {
    fn from(e: crate::limits::ScheduleError) -> Self {
        ScatteringError::Limit(e.into())
    }
}

/// `𝓛ρ = [H_sa, ρ] − (i/2){K, ρ} + iΣC_jρC_j*` against the free `𝓛₀ = ad(H_free)`.
#[derive(Debug, Clone)]
pub struct OpenSystem {
    pub h_free: CMat,
    pub h_sa: CMat,
    pub cs: Vec<CMat>,
    /// `H = H_sa − (i/2)ΣC_j*C_j`.
    pub h: CMat,
    /// Stacked generator of `e^{−it𝓛}`.
    pub g: CMat,
}

impl OpenSystem {
    pub fn new(h_free: CMat, h_sa: CMat, cs: Vec<CMat>) -> Result<Self, LinalgError> {
        let h = dissipative_hamiltonian(&h_sa, &cs)?;
        let g = generator_from_parts(&h, &cs, 1.0);
        Ok(Self { h_free, h_sa, cs, h, g })
    }

    /// No potential: `H_sa = H_free`.
    pub fn free(h0: &CMat, cs: Vec<CMat>) -> Result<Self, LinalgError> {
        Self::new(h0.clone(), h0.clone(), cs)
    }

    pub fn dim(&self) -> usize {
        self.h_free.nrows()
    }

    pub fn free_generator(&self) -> CMat {
        free_generator(&self.h_free)
    }

    /// `Σ_j C_j X C_j*`.
    pub fn jump(&self, x: &CMat) -> CMat {
        let mut out = CMat::zeros(x.nrows(), x.ncols());
        for cj in &self.cs {
            out += cj * x * cj.adjoint();
        }
        out
    }
}

/// `U = e^{itA}` and its conjugate, the factors of `U ⊗ Ū`.
fn conjugation(a: &CMat, t: f64) -> Result<(CMat, CMat), LinalgError> {
    let u = op_exp(a, -t)?;
    let ub = u.conjugate();
    Ok((u, ub))
}

/// Which plateau limits one pass over the schedule should track.
#[derive(Debug, Clone, Copy, Default)]
pub struct LimitRequest {
    pub omega_plus: bool,
    pub omega_minus: bool,
    /// `e^{it𝓛₀}e^{−2it𝓛}e^{it𝓛₀}`.
    pub sigma_direct: bool,
    /// `Ω⁺(𝓛, 𝓛₁)` with `𝓛₁ = H(·) − (·)H*`.
    pub omega_plus_l1: bool,
}

impl LimitRequest {
    pub fn all() -> Self {
        Self { omega_plus: true, omega_minus: true, sigma_direct: true, omega_plus_l1: true }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LindbladLimits {
    pub omega_plus: Option<LimitResult>,
    pub omega_minus: Option<LimitResult>,
    pub sigma_direct: Option<LimitResult>,
    pub omega_plus_l1: Option<LimitResult>,
}

/// One pass over the schedule stepping `exp(tG)` and feeding every requested family.
///
/// Per checkpoint this holds `exp(t_k G)`, its square when `σ` is requested, and at most
/// `PLATEAU_RUN + 1` samples per family.
pub fn lindblad_limits(sys: &OpenSystem, schedule: &Schedule, req: LimitRequest) -> Result<LindbladLimits, ScatteringError> {
    let dd = sys.dim() * sys.dim();
    let mk = |on: bool| -> Result<Option<PlateauTracker>, ScatteringError> {
        Ok(if on { Some(PlateauTracker::new(schedule, Metric::InducedTrace, identity(dd))?) } else { None })
    };
    let mut plus = mk(req.omega_plus)?;
    let mut minus = mk(req.omega_minus)?;
    let mut sigma = mk(req.sigma_direct)?;
    let mut l1 = mk(req.omega_plus_l1)?;
    let mut walk = PropagatorWalk::with_exp(&sys.g, propagator);
    for &t in &schedule.checkpoints {
        let active = |x: &Option<PlateauTracker>| x.as_ref().is_some_and(|tr| !tr.done());
        if !(active(&plus) || active(&minus) || active(&sigma) || active(&l1)) {
            break;
        }
        let p = walk.at(t)?.clone();
        let (u, ub) = conjugation(&sys.h_free, t)?;
        if active(&plus) {
            plus.as_mut().unwrap().push(kron_right_mul(&p, &u, &ub));
        }
        if active(&minus) {
            minus.as_mut().unwrap().push(kron_left_mul(&u, &ub, &p));
        }
        if active(&sigma) {
            let p2 = matmul(&p, &p);
            sigma.as_mut().unwrap().push(kron_left_mul(&u, &ub, &kron_right_mul(&p2, &u, &ub)));
        }
        if active(&l1) {
            // e^{it𝓛₁}ρ = e^{itH}ρe^{−itH*} has superoperator V ⊗ V̄ with V = e^{itH}.
            // It grows without bound once H has decaying modes.
            let tracker = l1.as_mut().unwrap();
            match conjugation(&sys.h, t) {
                Ok((v, vb)) => tracker.push(kron_right_mul(&p, &v, &vb)),
                Err(e @ LinalgError::Overflow { .. }) => tracker.abort(format!("e^{{itH}} at t = {t}: {e}")),
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(LindbladLimits {
        omega_plus: plus.map(PlateauTracker::finish),
        omega_minus: minus.map(PlateauTracker::finish),
        sigma_direct: sigma.map(PlateauTracker::finish),
        omega_plus_l1: l1.map(PlateauTracker::finish),
    })
}

/// `Ω⁺(𝓛, 𝓛₀) = s-lim_{t→+∞} e^{−it𝓛}e^{it𝓛₀}`.
pub fn omega_plus(sys: &OpenSystem, schedule: &Schedule) -> Result<LimitResult, ScatteringError> {
    let r = lindblad_limits(sys, schedule, LimitRequest { omega_plus: true, ..Default::default() })?;
    Ok(r.omega_plus.expect("requested"))
}

/// `Ω⁻(𝓛₀, 𝓛) = s-lim_{t→+∞} e^{it𝓛₀}e^{−it𝓛}` on the trace class.
pub fn omega_minus(sys: &OpenSystem, schedule: &Schedule) -> Result<LimitResult, ScatteringError> {
    let r = lindblad_limits(sys, schedule, LimitRequest { omega_minus: true, ..Default::default() })?;
    Ok(r.omega_minus.expect("requested"))
}

/// `σ = Ω⁻(𝓛₀,𝓛)Ω⁺(𝓛,𝓛₀)`.
pub fn scattering_endomorphism(omega_minus: &LimitResult, omega_plus: &LimitResult) -> Result<CMat, ScatteringError> {
    for (name, r) in [("omega_minus", omega_minus), ("omega_plus", omega_plus)] {
        if !r.converged {
            return Err(ScatteringError::NotConverged(format!("{name}: {}", r.failure().unwrap_or_default())));
        }
    }
    Ok(matmul(&omega_minus.value, &omega_plus.value))
}

/// `Ω⁺(𝓛,𝓛₁)∘(ρ ↦ W₊ρW₊*)` with `W₊ = W₊(H, H₀)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Factorization {
    pub w_plus: LimitResult,
    pub omega_plus_l1: LimitResult,
    #[serde(skip)]
    pub composed: CMat,
    /// Induced trace-norm distance to the directly computed `Ω⁺`.
    pub residual: f64,
}

pub fn omega_plus_factorized(
    sys: &OpenSystem,
    schedule: &Schedule,
    omega_plus_l1: LimitResult,
    direct: &CMat,
) -> Result<Factorization, ScatteringError> {
    let w_plus = wave_operator(&sys.h, &sys.h_free, TimeSign::Plus, None, schedule)?;
    let composed = kron_right_mul(&omega_plus_l1.value, &w_plus.value, &w_plus.value.conjugate());
    let residual = induced_trace_norm(&(direct - &composed));
    Ok(Factorization { w_plus, omega_plus_l1, composed, residual })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TransitionProbability {
    pub value: f64,
    /// Imaginary part of `⟨φ_out, (σ|φ_in⟩⟨φ_in|)φ_out⟩`; zero up to rounding for Hermiticity-preserving `σ`.
    pub imag: f64,
}

/// `⟨φ_out, (σ|φ_in⟩⟨φ_in|)φ_out⟩`.
pub fn transition_probability(phi_in: &CVec, phi_out: &CVec, sigma: &CMat) -> Result<TransitionProbability, ScatteringError> {
    for v in [phi_in, phi_out] {
        let n = v.norm();
        if (n - 1.0).abs() > 1e-8 {
            return Err(ScatteringError::NotNormalized(n));
        }
    }
    let rho = phi_in * phi_in.adjoint();
    let out = apply_super(sigma, &rho);
    let z = phi_out.dotc(&(out * phi_out));
    Ok(TransitionProbability { value: z.re, imag: z.im })
}

/// `(W₋ρW₋*, ∫₀ᵀ e^{is𝓛₀}(W₋ΣC_j(e^{−is𝓛}ρ)C_j*W₋*)ds)` with `W₋ = W₋(H₀, H)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElasticSplit {
    #[serde(skip)]
    pub elastic: CMat,
    #[serde(skip)]
    pub inelastic: CMat,
    /// Trace norm of the integrand at `T` relative to its maximum.
    pub tail_ratio: f64,
    pub decayed: bool,
}

impl ElasticSplit {
    pub fn total(&self) -> CMat {
        &self.elastic + &self.inelastic
    }
}

pub fn elastic_inelastic_split(sys: &OpenSystem, rho: &CMat, w_minus: &CMat, t: f64, dt: f64) -> Result<ElasticSplit, ScatteringError> {
    let (n, step) = crate::smoothness::trapezoid_steps(t, dt);
    let d = sys.dim();
    let p1 = propagator(&sys.g, step)?;
    let (u1, _) = conjugation(&sys.h_free, step)?;
    let mut u = identity(d);
    let mut v: CVec = stack(rho);
    let mut inelastic = CMat::zeros(d, d);
    let mut peak: f64 = 0.0;
    let mut last = 0.0;
    for m in 0..=n {
        let rho_s = unstack(&v, d);
        let inner = w_minus * sys.jump(&rho_s) * w_minus.adjoint();
        let g = &u * inner * u.adjoint();
        let gn = trace_norm(&g);
        peak = peak.max(gn);
        last = gn;
        let w = if m == 0 || m == n { 0.5 } else { 1.0 };
        inelastic += g.map(|z| z * (w * step));
        if m < n {
            v = &p1 * v;
            u = &u1 * u;
        }
    }
    let tail_ratio = if peak == 0.0 { 0.0 } else { last / peak };
    Ok(ElasticSplit { elastic: w_minus * rho * w_minus.adjoint(), inelastic, tail_ratio, decayed: tail_ratio <= 0.1 })
}

/// Trace, positivity and Hermiticity of `S(ρ)` on sample states.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StateMapCheck {
    pub trace_residual: f64,
    pub min_eig: f64,
}

pub fn check_on_states(s: &CMat, states: &[CMat]) -> StateMapCheck {
    let mut out = StateMapCheck { trace_residual: 0.0, min_eig: f64::INFINITY };
    for rho in states {
        let r = apply_super(s, rho);
        out.trace_residual = out.trace_residual.max((trace(&r) - trace(rho)).norm());
        out.min_eig = out.min_eig.min(min_eig_hermitian(&crate::linalg::hermitian_part(&r)));
    }
    out
}

/// Probes of `‖e^{−it𝓛}ρ‖₁` for `t ∈ [−T, T]` and of `∫‖ΣC_j(e^{−it𝓛}ρ)C_j*‖₁dt`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceNormProbe {
    pub t_max: f64,
    pub dt: f64,
    /// `max_{t, ρ} ‖e^{−it𝓛}ρ‖₁/‖ρ‖₁`.
    pub max_growth: f64,
    /// Per state, `∫_{−T}^{T}‖ΣC_jρ_tC_j*‖₁dt / ‖ρ‖₁`.
    pub integrals: Vec<f64>,
    /// Cumulative integrals never decreased (they cannot, up to rounding).
    pub monotone: bool,
    /// Largest integrand at `|t| = T` relative to its peak.
    pub tail_ratio: f64,
}

pub fn trace_norm_probe(sys: &OpenSystem, states: &[CMat], t: f64, dt: f64) -> Result<TraceNormProbe, ScatteringError> {
    let (n, step) = crate::smoothness::trapezoid_steps(t, dt);
    let d = sys.dim();
    let forward = propagator(&sys.g, step)?;
    let backward = propagator(&sys.g, -step)?;
    let mut max_growth: f64 = 1.0;
    let mut integrals = Vec::with_capacity(states.len());
    let mut monotone = true;
    let mut tail_ratio: f64 = 0.0;
    for rho in states {
        let norm0 = trace_norm(rho);
        let mut total = 0.0;
        for p in [&forward, &backward] {
            let mut v = stack(rho);
            let mut cumulative = 0.0;
            let mut peak: f64 = 0.0;
            let mut last = 0.0;
            for m in 0..=n {
                let r = unstack(&v, d);
                max_growth = max_growth.max(trace_norm(&r) / norm0);
                let f = trace_norm(&sys.jump(&r));
                peak = peak.max(f);
                last = f;
                let w = if m == 0 || m == n { 0.5 } else { 1.0 };
                let next = cumulative + w * step * f;
                monotone &= next >= cumulative;
                cumulative = next;
                if m < n {
                    v = p * v;
                }
            }
            total += cumulative;
            if peak > 0.0 {
                tail_ratio = tail_ratio.max(last / peak);
            }
        }
        integrals.push(total / norm0);
    }
    Ok(TraceNormProbe { t_max: t, dt: step, max_growth, integrals, monotone, tail_ratio })
}

/// Options for [`completeness_report`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompletenessOptions {
    /// Times `±τ` at which the intertwining relations are checked.
    pub tau: f64,
    pub residual_tol: f64,
    pub probe_states: usize,
    pub probe_dt: f64,
    pub seed: u64,
}

impl Default for CompletenessOptions {
    fn default() -> Self {
        Self { tau: 1.0, residual_tol: 1e-4, probe_states: 10, probe_dt: 0.05, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompletenessReport {
    pub c0: f64,
    pub c_tilde0: f64,
    pub limits: LindbladLimits,
    pub clauses: Vec<Clause>,
    pub inverse_plus_minus: f64,
    pub inverse_minus_plus: f64,
    pub intertwining_plus: f64,
    pub intertwining_minus: f64,
    pub probe: TraceNormProbe,
    /// Both inverse identities pass.
    pub similarity_certified: bool,
}

/// Existence, inverse, intertwining, uniform-bound and integrability clauses for `𝓛` vs `𝓛₀`.
pub fn completeness_report(
    sys: &OpenSystem,
    schedule: &Schedule,
    c0: f64,
    c_tilde0: f64,
    opts: &CompletenessOptions,
) -> Result<CompletenessReport, ScatteringError> {
    let d = sys.dim();
    let dd = d * d;
    let limits = lindblad_limits(sys, schedule, LimitRequest { omega_plus: true, omega_minus: true, ..Default::default() })?;
    let plus = limits.omega_plus.as_ref().expect("requested");
    let minus = limits.omega_minus.as_ref().expect("requested");
    let id = identity(dd);
    let inv_pm = induced_trace_norm(&(matmul(&plus.value, &minus.value) - &id));
    let inv_mp = induced_trace_norm(&(matmul(&minus.value, &plus.value) - &id));

    let mut int_plus: f64 = 0.0;
    let mut int_minus: f64 = 0.0;
    for tau in [opts.tau, -opts.tau] {
        let p = propagator(&sys.g, tau)?;
        // e^{−iτ𝓛₀} is conjugation by e^{−iτH₀}.
        let (u, ub) = conjugation(&sys.h_free, -tau)?;
        // e^{−iτ𝓛}Ω⁺ = Ω⁺e^{−iτ𝓛₀}
        int_plus = int_plus.max(induced_trace_norm(&(matmul(&p, &plus.value) - kron_right_mul(&plus.value, &u, &ub))));
        // e^{−iτ𝓛₀}Ω⁻ = Ω⁻e^{−iτ𝓛}
        int_minus = int_minus.max(induced_trace_norm(&(kron_left_mul(&u, &ub, &minus.value) - matmul(&minus.value, &p))));
    }

    let mut rng = crate::random::rng(opts.seed);
    let states: Vec<CMat> = (0..opts.probe_states).map(|k| crate::random::density_matrix(d, 1 + k % d, &mut rng)).collect();
    let probe = trace_norm_probe(sys, &states, schedule.t_max, opts.probe_dt)?;

    let tol = opts.residual_tol;
    let both = plus.converged && minus.converged;
    let completeness_threshold = 2.0 - std::f64::consts::SQRT_2;
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let mut clauses = vec![
        Clause::existence("omega_plus exists", 2.0, c0, plus.converged, plus.last_residual()),
        Clause::existence("omega_minus exists", 2.0, c0, minus.converged, minus.last_residual()),
        Clause::residual("omega_plus * omega_minus = id", completeness_threshold, c0, inv_pm, tol, both),
        Clause::residual("omega_minus * omega_plus = id", completeness_threshold, c0, inv_mp, tol, both),
        Clause::residual("intertwining e^{-itL} omega_plus = omega_plus e^{-itL0}", 2.0, c0, int_plus, tol, plus.converged),
        Clause::residual("intertwining e^{-itL0} omega_minus = omega_minus e^{-itL}", 2.0, c0, int_minus, tol, minus.converged),
    ];
    if c_tilde0 < half {
        let bound = 1.0 / (1.0 - 2.0 * c_tilde0 * c_tilde0);
        clauses.push(
            Clause::residual(
                "uniform bound |e^{-itL} rho|_1 <= |rho|_1 / (1 - 2 c_tilde0^2)",
                half,
                c_tilde0,
                probe.max_growth,
                bound * 1.05,
                true,
            )
            .with_note(format!("bound {bound:.6} with 5% slack")),
        );
    } else {
        clauses.push(Clause::residual(
            "uniform bound |e^{-itL} rho|_1 <= |rho|_1 / (1 - 2 c_tilde0^2)",
            half,
            c_tilde0,
            probe.max_growth,
            f64::INFINITY,
            true,
        ));
    }
    let integral_max = probe.integrals.iter().copied().fold(0.0, f64::max);
    clauses.push(
        Clause::residual("integrability of |C(e^{-itL} rho)C*|_1", half, c_tilde0, probe.tail_ratio, 0.1, probe.monotone)
            .with_note(format!("max integral / |rho|_1 = {integral_max:.6}; residual is the integrand tail ratio")),
    );
    let similarity_certified = clauses[2].verdict == Verdict::Pass && clauses[3].verdict == Verdict::Pass;
    Ok(CompletenessReport {
        c0,
        c_tilde0,
        limits,
        clauses,
        inverse_plus_minus: inv_pm,
        inverse_minus_plus: inv_mp,
        intertwining_plus: int_plus,
        intertwining_minus: int_minus,
        probe,
        similarity_certified,
    })
}

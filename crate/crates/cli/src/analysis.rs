//! Analysis stages shared by the scenario runner and the verification suites.

use lindscat_core::capture::{
    capture_sweep, classify_spectrum, escape_probability_direct, gaussian_packet, point_spectrum_proxy, range_formula_check, CaptureSweep,
    SpectralClassification, SweepOptions,
};
use lindscat_core::hilbert::{
    integral_representation_residual, intertwining_residual, inverse_residual, scattering_operator, wave_operator, TimeSign,
};
use lindscat_core::limits::{induced_trace_norm, LimitError, LimitResult, Metric, Schedule};
use lindscat_core::linalg::{min_singular, op_norm, CMat, CVec, LinalgError};
use lindscat_core::model::LatticeModel;
use lindscat_core::random;
use lindscat_core::report::{Clause, Verdict};
use lindscat_core::scattering::{
    check_on_states, completeness_report, lindblad_limits, omega_plus_factorized, scattering_endomorphism, CompletenessOptions,
    CompletenessReport, LimitRequest, OpenSystem, ScatteringError,
};
use lindscat_core::smoothness::{
    estimate_c0, estimate_c_tilde0, estimate_c_v, resolvent_smoothness, smoothness_chain, supersmooth_constant, SmoothnessChain,
    SmoothnessEstimate, ZGrid,
};
use serde::Serialize;

/// Largest superoperator side the runner materializes.
pub const MAX_SUPER_DIM: usize = 1024;

/// Points per line of the resolvent grid.
pub const Z_POINTS: usize = 96;

#[derive(Debug, Clone, Serialize)]
pub struct NamedLimit {
    pub name: String,
    pub result: LimitResult,
}

fn named(name: &str, result: &LimitResult) -> NamedLimit {
    NamedLimit { name: name.into(), result: result.clone() }
}

/// A limit that could not be sampled (propagator overflow) recorded as aborted.
pub fn aborted_limit(d: usize, schedule: &Schedule, metric: Metric, reason: String) -> LimitResult {
    LimitResult {
        value: CMat::zeros(d, d),
        checkpoints: Vec::new(),
        plateau: None,
        plateau_std: None,
        recurrence_detected: false,
        converged: false,
        tol: schedule.tol,
        metric,
        aborted: Some(reason),
    }
}

/// Overflow of a growing propagator becomes a non-converged limit; other errors propagate.
pub fn guard_overflow(r: Result<LimitResult, LimitError>, d: usize, schedule: &Schedule) -> Result<LimitResult, LimitError> {
    match r {
        Err(LimitError::Linalg(e @ LinalgError::Overflow { .. })) => Ok(aborted_limit(d, schedule, Metric::Operator, e.to_string())),
        other => other,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SmoothnessStage {
    pub c0: SmoothnessEstimate,
    pub c_tilde0: SmoothnessEstimate,
    pub c0_prime: SmoothnessEstimate,
    pub d0: SmoothnessEstimate,
    pub c_v: Option<SmoothnessEstimate>,
    pub chain: SmoothnessChain,
    pub clauses: Vec<Clause>,
}

impl SmoothnessStage {
    pub fn constants(&self) -> Vec<SmoothnessEstimate> {
        let mut v = vec![self.c0.clone(), self.c_tilde0.clone(), self.c0_prime.clone(), self.d0.clone()];
        v.extend(self.c_v.clone());
        v
    }
}

/// `c₀`, `c̃₀`, `c'₀`, `d₀` (and `c_V` when `H_sa ≠ H₀`) plus the propagator-bound chain.
pub fn smoothness_stage(
    h_free: &CMat,
    h_sa: &CMat,
    model: Option<&LatticeModel>,
    cs: &[CMat],
    t: f64,
    dt: f64,
) -> Result<SmoothnessStage, LinalgError> {
    let h = lindscat_core::lindblad::dissipative_hamiltonian(h_sa, cs)?;
    let c0 = estimate_c0(h_free, cs, t, dt)?;
    let c_tilde0 = estimate_c_tilde0(&h, cs, t, dt)?;
    let grid = ZGrid::for_operator(h_free, None, Z_POINTS);
    let c0_prime = resolvent_smoothness(h_free, cs, &grid);
    let d0 = supersmooth_constant(h_free, cs, &grid);
    let c_v = match model {
        Some(m) if m.v.is_some() => {
            let proxy = point_spectrum_proxy(h_free, h_sa, m.sites, m.internal_dim);
            Some(estimate_c_v(h_sa, cs, &proxy.pi_ac, t, dt)?)
        }
        _ => None,
    };
    let chain = smoothness_chain(h_free, cs, t, dt, 400)?;
    let clauses = chain
        .checks
        .iter()
        .map(|ch| Clause {
            name: ch.name.clone(),
            claimed_threshold: ch.threshold,
            measured_constant: ch.measured,
            residual: Some(ch.measured),
            tolerance: Some(ch.threshold),
            verdict: if ch.passed { Verdict::Pass } else { Verdict::Fail },
            note: Some("propagator bound chain for H0 - (i/2)C*C on the measurement window".into()),
        })
        .collect();
    Ok(SmoothnessStage { c0, c_tilde0, c0_prime, d0, c_v, chain, clauses })
}

#[derive(Debug, Clone, Serialize)]
pub struct HilbertStage {
    pub limits: Vec<NamedLimit>,
    pub scattering_route_residual: f64,
    pub integral_representation_residual: f64,
    pub clauses: Vec<Clause>,
    #[serde(skip)]
    pub w_plus_h_h0: CMat,
}

/// The four wave operators between `H` and `H₀`, their identities, and `S(H,H₀)` by two routes.
pub fn hilbert_stage(h: &CMat, h0: &CMat, c0: f64, schedule: &Schedule, tol: f64, dt: f64) -> Result<HilbertStage, LimitError> {
    let d = h.nrows();
    let w = |a: &CMat, b: &CMat, s: TimeSign| guard_overflow(wave_operator(a, b, s, None, schedule), d, schedule);
    let wp_h_h0 = w(h, h0, TimeSign::Plus)?;
    let wm_h0_h = w(h0, h, TimeSign::Minus)?;
    let wm_h_h0 = w(h, h0, TimeSign::Minus)?;
    let wp_h0_h = w(h0, h, TimeSign::Plus)?;
    let s = match scattering_operator(h, h0, schedule) {
        Ok(s) => Some(s),
        Err(LimitError::Linalg(LinalgError::Overflow { .. })) => None,
        Err(e) => return Err(e),
    };
    let ir = integral_representation_residual(h, h0, &wp_h_h0.value, TimeSign::Plus, schedule.t_max, dt)?;

    let mut clauses = Vec::new();
    for (name, l) in
        [("W+(H,H0) exists", &wp_h_h0), ("W-(H0,H) exists", &wm_h0_h), ("W-(H,H0) exists", &wm_h_h0), ("W+(H0,H) exists", &wp_h0_h)]
    {
        let mut c = Clause::existence(name, 2.0, c0, l.converged, l.last_residual());
        if let Some(f) = l.failure() {
            c = c.with_note(f);
        }
        clauses.push(c);
    }
    let pair = |a: &LimitResult, b: &LimitResult| a.converged && b.converged;
    clauses.push(Clause::residual(
        "W+(H,H0) W+(H0,H) = 1",
        2.0,
        c0,
        inverse_residual(&wp_h_h0.value, &wp_h0_h.value),
        tol,
        pair(&wp_h_h0, &wp_h0_h),
    ));
    clauses.push(Clause::residual(
        "W+(H0,H) W+(H,H0) = 1",
        2.0,
        c0,
        inverse_residual(&wp_h0_h.value, &wp_h_h0.value),
        tol,
        pair(&wp_h_h0, &wp_h0_h),
    ));
    clauses.push(Clause::residual(
        "W-(H,H0) W-(H0,H) = 1",
        2.0,
        c0,
        inverse_residual(&wm_h_h0.value, &wm_h0_h.value),
        tol,
        pair(&wm_h_h0, &wm_h0_h),
    ));
    clauses.push(Clause::residual(
        "W-(H0,H) W-(H,H0) = 1",
        2.0,
        c0,
        inverse_residual(&wm_h0_h.value, &wm_h_h0.value),
        tol,
        pair(&wm_h_h0, &wm_h0_h),
    ));
    for (name, l, a, b) in [
        ("H W+(H,H0) = W+(H,H0) H0", &wp_h_h0, h, h0),
        ("H0 W-(H0,H) = W-(H0,H) H", &wm_h0_h, h0, h),
        ("H W-(H,H0) = W-(H,H0) H0", &wm_h_h0, h, h0),
        ("H0 W+(H0,H) = W+(H0,H) H", &wp_h0_h, h0, h),
    ] {
        clauses.push(Clause::residual(name, 2.0, c0, intertwining_residual(&l.value, a, b), tol, l.converged));
    }
    for (name, l) in [("|W+(H,H0)| <= 1", &wp_h_h0), ("|W-(H0,H)| <= 1", &wm_h0_h)] {
        clauses.push(Clause::residual(name, f64::INFINITY, c0, op_norm(&l.value), 1.0 + 1e-8, l.converged));
    }
    let margin = 1.0 - c0 / 2.0 - 0.05;
    let sm = min_singular(&wp_h_h0.value);
    clauses.push(
        Clause::residual("injectivity margin of W+(H,H0)", 2.0, c0, (margin - sm).max(0.0), 0.0, wp_h_h0.converged)
            .with_note(format!("min singular value {sm:.6e} against 1 - c0/2 - 0.05 = {margin:.6e}")),
    );
    let dm = min_singular(&wm_h0_h.value);
    clauses.push(
        Clause::residual("W-(H0,H) has dense range", 2.0, c0, if dm > 0.0 { 0.0 } else { 1.0 }, 0.0, wm_h0_h.converged)
            .with_note(format!("min singular value {dm:.6e}")),
    );
    let (route, s_conv) = match &s {
        Some(s) => (s.route_residual, s.converged()),
        None => (f64::INFINITY, false),
    };
    clauses.push(Clause::residual("S(H,H0) direct vs W-(H0,H) W+(H,H0)", 2.0, c0, route, 1e-4, s_conv));
    clauses.push(
        Clause::residual("integral representation of W+(H,H0)", 2.0, c0, ir.residual, 1e-4, wp_h_h0.converged && ir.decayed)
            .with_note(format!("integrand tail ratio {:.3e}", ir.tail_ratio)),
    );

    let mut limits =
        vec![named("W+(H,H0)", &wp_h_h0), named("W-(H0,H)", &wm_h0_h), named("W-(H,H0)", &wm_h_h0), named("W+(H0,H)", &wp_h0_h)];
    match &s {
        Some(s) => limits.push(named("S(H,H0)", &s.direct)),
        None => limits
            .push(named("S(H,H0)", &aborted_limit(d, schedule, Metric::Operator, "propagator e^{2isH} exceeded the growth cap".into()))),
    }
    Ok(HilbertStage {
        limits,
        scattering_route_residual: route,
        integral_representation_residual: ir.residual,
        clauses,
        w_plus_h_h0: wp_h_h0.value,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LindbladStage {
    pub completeness: CompletenessReport,
    pub limits: Vec<NamedLimit>,
    /// `(trace residual, min eigenvalue)` of Ω⁺, Ω⁻ and σ on random states.
    pub state_checks: Vec<(String, f64, f64)>,
    pub factorization_residual: Option<f64>,
    pub clauses: Vec<Clause>,
}

/// Completeness clauses of `𝓛` against `𝓛₀`, state properties of the limits and the factorization route.
pub fn lindblad_stage(
    sys: &OpenSystem,
    schedule: &Schedule,
    c0: f64,
    c_tilde0: f64,
    tol: f64,
    seed: u64,
) -> Result<LindbladStage, ScatteringError> {
    let opts = CompletenessOptions { residual_tol: tol, seed, ..CompletenessOptions::default() };
    let rep = completeness_report(sys, schedule, c0, c_tilde0, &opts)?;
    let plus = rep.limits.omega_plus.clone().expect("requested");
    let minus = rep.limits.omega_minus.clone().expect("requested");
    let mut clauses = rep.clauses.clone();
    let mut limits = vec![named("Omega+", &plus), named("Omega-", &minus)];

    let d = sys.dim();
    let mut rng = random::rng(seed ^ 0x5eed);
    let states: Vec<CMat> = (0..10).map(|k| random::density_matrix(d, 1 + k % d, &mut rng)).collect();
    let mut state_checks = Vec::new();
    let sigma = scattering_endomorphism(&minus, &plus).ok();
    let mut maps: Vec<(&str, &CMat, bool)> = vec![("Omega+", &plus.value, plus.converged), ("Omega-", &minus.value, minus.converged)];
    if let Some(s) = &sigma {
        maps.push(("sigma", s, true));
    }
    for (name, m, conv) in maps {
        let chk = check_on_states(m, &states);
        state_checks.push((name.to_string(), chk.trace_residual, chk.min_eig));
        clauses.push(Clause::residual(&format!("{name} preserves trace"), 2.0, c0, chk.trace_residual, 1e-8, conv));
        clauses.push(Clause::residual(&format!("{name} preserves positivity"), 2.0, c0, (-chk.min_eig).max(0.0), 1e-8, conv));
    }

    let l1 = lindblad_limits(sys, schedule, LimitRequest { omega_plus_l1: true, ..Default::default() })?.omega_plus_l1.expect("requested");
    limits.push(named("Omega+(L,L1)", &l1));
    let l1_converged = l1.converged;
    let l1_note = l1.failure();
    let fact = omega_plus_factorized(sys, schedule, l1, &plus.value)?;
    limits.push(named("W+(H,H0) for factorization", &fact.w_plus));
    let conv = plus.converged && l1_converged && fact.w_plus.converged;
    let mut clause = Clause::residual("Omega+ = Omega+(L,L1) o W+(H,H0)(.)W+(H,H0)*", 2.0, c0, fact.residual, tol, conv);
    if let Some(n) = l1_note {
        clause = clause.with_note(format!("Omega+(L,L1): {n}"));
    }
    clauses.push(clause);
    Ok(LindbladStage { completeness: rep, limits, state_checks, factorization_residual: Some(fact.residual), clauses })
}

#[derive(Debug, Clone, Serialize)]
pub struct CaptureStage {
    pub classification: SpectralClassification,
    pub c_v: f64,
    pub range_max_angle: f64,
    pub range_rank: usize,
    pub target_rank: usize,
    pub bound_overlap: f64,
    pub min_singular: f64,
    pub escape: Vec<f64>,
    pub escape_limits: Vec<NamedLimit>,
    pub max_increase: f64,
    pub sweep: Option<CaptureSweep>,
    pub clauses: Vec<Clause>,
}

pub struct CaptureInputs<'a> {
    pub model: &'a LatticeModel,
    pub h_sa: &'a CMat,
    pub cs: &'a [CMat],
    pub packets: &'a [CVec],
    pub c_v: f64,
    pub real_tol: f64,
    pub window: f64,
    pub smoothness_t: f64,
    pub smoothness_dt: f64,
    pub eps: f64,
    /// Coupling multipliers for the sweep; empty skips it.
    pub amplitudes: &'a [f64],
}

/// Classification, range formula, escape probabilities and the optional amplitude sweep.
pub fn capture_stage(inp: &CaptureInputs, schedule: &Schedule) -> Result<CaptureStage, ScatteringError> {
    let m = inp.model;
    let proxy = point_spectrum_proxy(&m.h0, inp.h_sa, m.sites, m.internal_dim);
    let sys = OpenSystem::new(m.h0.clone(), inp.h_sa.clone(), inp.cs.to_vec())?;
    let cls = classify_spectrum(&sys.h, inp.cs, &proxy, inp.real_tol, inp.window)?;
    let range = range_formula_check(&sys, &cls, schedule, inp.c_v)?;
    let mut escape = Vec::new();
    let mut raw = Vec::new();
    let mut escape_limits = Vec::new();
    let mut max_increase = f64::NEG_INFINITY;
    let mut all_conv = true;
    for (k, psi) in inp.packets.iter().enumerate() {
        let rho = psi * psi.adjoint();
        let e = escape_probability_direct(&sys, &cls.pi, &rho, schedule)?;
        max_increase = max_increase.max(e.max_increase);
        all_conv &= e.limit.converged;
        escape.push(e.escape.value);
        raw.push(e.escape.raw);
        escape_limits.push(named(&format!("escape packet {k}"), &e.limit));
    }
    let cv = inp.c_v;
    let mut clauses = vec![
        Clause::residual("H_b(H) = H_pp(H_V) cap Ker C", f64::INFINITY, 0.0, cls.cross_check_angle, 1e-6, true).with_note(format!(
            "bound rank {}, independent rank {}",
            cls.bound.rank(),
            cls.cross_check_rank
        )),
        Clause::residual("H_b(H) = H_b(H*)", f64::INFINITY, 0.0, cls.adjoint_bound_angle, 1e-6, true),
        Clause::residual("decaying basis decays within the window", f64::INFINITY, 0.0, cls.decay_check, 1e-6, true),
        Clause::residual("Ran W+(H,H0) = (H_b(H) + H_d(H*))^perp", 2.0, cv, range.max_angle, 1e-3, range.w_plus.converged)
            .with_note(format!("range rank {}, target rank {}", range.range_rank, range.target_rank)),
        Clause::residual(
            "injectivity margin of W+(H,H0)",
            2.0,
            cv,
            (range.margin_threshold - range.min_singular).max(0.0),
            0.0,
            range.w_plus.converged,
        )
        .with_note(format!("min singular value {:.6e} against 1 - c_V/2 - 0.05 = {:.6e}", range.min_singular, range.margin_threshold)),
    ];
    if !raw.is_empty() {
        let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw_excess = (-lo).max(hi - 1.0).max(0.0);
        clauses.push(
            Clause::residual("0 <= escape probability <= 1", f64::INFINITY, 0.0, raw_excess, 1e-8, all_conv)
                .with_note(format!("largest per-step increase of tr(Pi rho_t Pi): {max_increase:.3e} (diagnostic)")),
        );
    }
    let sweep = if inp.amplitudes.is_empty() {
        None
    } else {
        let base = inp.cs.to_vec();
        let opts = SweepOptions {
            eps: inp.eps,
            t_smooth: inp.smoothness_t,
            dt_smooth: inp.smoothness_dt,
            tol: inp.real_tol,
            t_window: inp.window,
        };
        let sw = capture_sweep(m, |a| base.iter().map(|c| c.map(|z| z * a)).collect(), inp.amplitudes, inp.packets, schedule, &opts)?;
        for row in &sw.rows {
            clauses.push(
                Clause::existence(
                    &format!("modified wave operator exists at amplitude {}", row.amplitude),
                    2.0 / sw.c1.value.max(f64::MIN_POSITIVE),
                    row.weighted_norm,
                    row.converged,
                    0.0,
                )
                .with_note(format!("|C<X>^(1+eps)| = {:.6e}, c1 = {:.6e}", row.weighted_norm, sw.c1.value)),
            );
        }
        Some(sw)
    };
    Ok(CaptureStage {
        c_v: cv,
        range_max_angle: range.max_angle,
        range_rank: range.range_rank,
        target_rank: range.target_rank,
        bound_overlap: range.bound_overlap,
        min_singular: range.min_singular,
        classification: cls,
        escape,
        escape_limits,
        max_increase,
        sweep,
        clauses,
    })
}

/// Default incoming packets: `x₀ = −L/4`, `σ = L/12`, `k₀ ∈ {0.8, 1.6}`, level 0.
pub fn default_packets(model: &LatticeModel) -> Vec<CVec> {
    let l = model.sites as f64 * model.spacing;
    [0.8, 1.6].iter().map(|&k0| gaussian_packet(model, -l / 4.0, l / 12.0, k0, 0)).collect()
}

/// Induced trace-norm distance between two superoperators.
pub fn super_distance(a: &CMat, b: &CMat) -> f64 {
    induced_trace_norm(&(a - b))
}

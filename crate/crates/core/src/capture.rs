//! Capture by a dissipative target: spectral classification of `H = H_V − (i/2)C*C`,
//! the modified wave operator `Ω̃⁻`, escape probabilities and the range formula for `W₊`.
//!
//! A finite lattice has no continuous spectrum, so the point spectrum of `H_V` is a
//! proxy: eigenvalues outside the free band plus in-band states with participation
//! ratio below `0.15·n`.

use crate::hilbert::{wave_operator, TimeSign};
use crate::limits::{plateau_limit, LimitError, LimitResult, Metric, PlateauTracker, PropagatorWalk, Schedule};
use crate::linalg::{
    apply_super, c, hermitian_eig, identity, invariant_subspace, kron_left_mul, max_eig_hermitian, min_singular, op_exp, op_norm,
    principal_angles, stack, trace, unstack, CMat, CVec, LinalgError, SubspaceBasis,
};
use crate::lindblad::propagator;
use crate::model::{LatticeModel, ScalarField};
use crate::scattering::{OpenSystem, ScatteringError};
use crate::smoothness::{estimate_c_v, weight, SmoothnessEstimate};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Participation-ratio cut for in-band localized states, as a fraction of the site count.
pub const LOCALIZATION_FRACTION: f64 = 0.15;

/// Norm reduction a decaying mode must reach by the end of the window.
pub const DECAY_FACTOR: f64 = 1e6;

/// `1/Σ_x p(x)²` with `p(x)` the site occupation summed over internal levels.
pub fn participation_ratio(v: &CVec, internal_dim: usize) -> f64 {
    let n = v.len() / internal_dim;
    let total = v.norm_squared();
    let mut s = 0.0;
    for x in 0..n {
        let p: f64 = (0..internal_dim).map(|a| v[x * internal_dim + a].norm_sqr()).sum::<f64>() / total;
        s += p * p;
    }
    1.0 / s
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointSpectrumProxy {
    /// `[min σ(H₀), max σ(H₀)]`.
    pub band: (f64, f64),
    pub out_of_band: Vec<f64>,
    pub localized_in_band: Vec<f64>,
    pub basis: SubspaceBasis,
    #[serde(skip)]
    pub pi_ac: CMat,
}

impl PointSpectrumProxy {
    pub fn count(&self) -> usize {
        self.basis.rank()
    }
}

/// Point-spectrum proxy of `H_V` relative to the band of `H₀`.
pub fn point_spectrum_proxy(h0: &CMat, h_v: &CMat, sites: usize, internal_dim: usize) -> PointSpectrumProxy {
    let (v0, _) = hermitian_eig(h0);
    let (lo, hi) = (v0[0], v0[v0.len() - 1]);
    let margin = 1e-9 * (hi - lo).abs().max(1.0);
    let (vals, vecs) = hermitian_eig(h_v);
    let mut out_of_band = Vec::new();
    let mut localized = Vec::new();
    let mut cols = Vec::new();
    for (k, &lam) in vals.iter().enumerate() {
        let v = vecs.column(k).into_owned();
        if lam < lo - margin || lam > hi + margin {
            out_of_band.push(lam);
            cols.push(k);
        } else if participation_ratio(&v, internal_dim) < LOCALIZATION_FRACTION * sites as f64 {
            localized.push(lam);
            cols.push(k);
        }
    }
    let d = h_v.nrows();
    let m = CMat::from_fn(d, cols.len(), |r, j| vecs[(r, cols[j])]);
    let basis = SubspaceBasis::column_space(&m, 1e-8);
    let pi_ac = identity(d) - basis.projector();
    PointSpectrumProxy { band: (lo, hi), out_of_band, localized_in_band: localized, basis, pi_ac }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralClassification {
    /// `ℋ_b(H)`: real-eigenvalue invariant subspace of `H` within the point-spectrum proxy.
    pub bound: SubspaceBasis,
    /// `ℋ_d(H)`: eigenvalues with `−Im λ` above the decay cut.
    pub decaying: SubspaceBasis,
    /// `ℋ_d(H*)`.
    pub decaying_adjoint: SubspaceBasis,
    /// Projection onto `(ℋ_b ⊕ ℋ_d)^⊥`.
    #[serde(skip)]
    pub pi: CMat,
    /// Decay-rate cut actually used.
    pub decay_cut: f64,
    /// Tolerance actually used for `|Im λ| ≤ tol`.
    pub real_tol: f64,
    pub t_window: f64,
    /// `max ‖e^{−iTH}u‖` over the decaying basis at the window end.
    pub decay_check: f64,
    /// Largest principal angle between `ℋ_b(H)` and `ℋ_b(H*)`.
    pub adjoint_bound_angle: f64,
    /// Largest principal angle between `ℋ_b(H)` and `ℋ_pp(H_V) ∩ Ker C`, computed independently.
    pub cross_check_angle: f64,
    pub cross_check_rank: usize,
    pub flags: Vec<String>,
}

/// `Ker C` for stacked couplings, with the SVD threshold `1e−8·σ_max`.
pub fn coupling_kernel(cs: &[CMat], d: usize) -> SubspaceBasis {
    let mut adj = CMat::zeros(d, d * cs.len().max(1));
    for (j, cj) in cs.iter().enumerate() {
        adj.columns_mut(j * d, d).copy_from(&cj.adjoint());
    }
    SubspaceBasis::column_space(&adj, 1e-8).complement()
}

fn max_angle(u: &SubspaceBasis, v: &SubspaceBasis) -> f64 {
    if u.rank() != v.rank() {
        return std::f64::consts::FRAC_PI_2;
    }
    principal_angles(u, v).into_iter().fold(0.0, f64::max)
}

/// Put the cut inside the widest gap of decay rates near `kappa` when an eigenvalue sits close to it.
fn choose_cut(rates: &[f64], kappa: f64, tol: f64) -> (f64, Option<String>) {
    let near = |cut: f64| rates.iter().any(|&r| (r - cut).abs() <= tol.max(0.05 * cut));
    if !near(kappa) {
        return (kappa, None);
    }
    let mut pts: Vec<f64> = rates.iter().copied().filter(|&r| r > 0.5 * kappa && r < 2.0 * kappa).collect();
    pts.push(0.5 * kappa);
    pts.push(2.0 * kappa);
    pts.sort_by(f64::total_cmp);
    let (mut best, mut cut) = (0.0, kappa);
    for w in pts.windows(2) {
        if w[1] - w[0] > best {
            best = w[1] - w[0];
            cut = 0.5 * (w[0] + w[1]);
        }
    }
    (cut, Some(format!("decay cut moved from {kappa:.4e} to {cut:.4e} to avoid a straddling eigenvalue")))
}

/// Invariant subspace with the straddle tolerance widened tenfold on each clustering failure.
fn robust_invariant(
    a: &CMat,
    select: impl Fn(Complex64) -> bool + Copy,
    tol: f64,
    flags: &mut Vec<String>,
    what: &str,
) -> Result<(SubspaceBasis, f64), LinalgError> {
    let mut t = tol;
    for _ in 0..4 {
        match invariant_subspace(a, select, t) {
            Ok(b) => return Ok((b, t)),
            Err(LinalgError::Clustering { re, im }) => {
                flags.push(format!("{what}: eigenvalue {re:.6e}{im:+.6e}i straddles the boundary at tol {t:.1e}"));
                t *= 10.0;
            }
            Err(e) => return Err(e),
        }
    }
    invariant_subspace(a, select, t).map(|b| (b, t))
}

/// Real-eigenvalue subspace of `a` restricted to the point-spectrum proxy.
fn bound_part(a: &CMat, proxy: &SubspaceBasis, tol: f64, flags: &mut Vec<String>, what: &str) -> Result<(SubspaceBasis, f64), LinalgError> {
    let (real, used) = robust_invariant(a, move |z: Complex64| z.im.abs() <= tol, tol, flags, what)?;
    // Small angular slack: real eigenvectors of H and eigenvectors of H_V agree to rounding.
    Ok((real.intersect(proxy, 1e-6), used))
}

/// Classify `H` into bound, decaying and scattering parts.
///
/// `t_window` sets the decay cut `ln(10⁶)/t_window`: a mode counts as decaying when its
/// norm drops by `10⁶` within the window.
pub fn classify_spectrum(
    h: &CMat,
    cs: &[CMat],
    proxy: &PointSpectrumProxy,
    tol: f64,
    t_window: f64,
) -> Result<SpectralClassification, LinalgError> {
    let d = h.nrows();
    let mut flags = Vec::new();
    let hs = h.adjoint();
    let (bound, real_tol) = bound_part(h, &proxy.basis, tol, &mut flags, "bound(H)")?;
    let (bound_adj, _) = bound_part(&hs, &proxy.basis, tol, &mut flags, "bound(H*)")?;

    let rates: Vec<f64> = crate::linalg::eigenvalues(h)?.iter().map(|z| -z.im).collect();
    let (cut, moved) = choose_cut(&rates, DECAY_FACTOR.ln() / t_window, tol);
    flags.extend(moved);
    let (decaying, _) = robust_invariant(h, move |z: Complex64| -z.im > cut, tol, &mut flags, "decaying(H)")?;
    let (decaying_adjoint, _) = robust_invariant(&hs, move |z: Complex64| z.im > cut, tol, &mut flags, "decaying(H*)")?;

    let excluded = bound.sum(&decaying);
    let pi = identity(d) - excluded.projector();

    let decay_check = if decaying.rank() == 0 {
        0.0
    } else {
        let u = op_exp(h, t_window)? * &decaying.vectors;
        (0..u.ncols()).map(|j| u.column(j).norm()).fold(0.0, f64::max)
    };
    let independent = proxy.basis.intersect(&coupling_kernel(cs, d), 1e-6);
    Ok(SpectralClassification {
        adjoint_bound_angle: max_angle(&bound, &bound_adj),
        cross_check_angle: max_angle(&bound, &independent),
        cross_check_rank: independent.rank(),
        bound,
        decaying,
        decaying_adjoint,
        pi,
        decay_cut: cut,
        real_tol,
        t_window,
        decay_check,
        flags,
    })
}

/// Classification for a lattice model with the given couplings.
pub fn classify_model(model: &LatticeModel, cs: &[CMat], tol: f64, t_window: f64) -> Result<SpectralClassification, LinalgError> {
    let h_v = model.h_v();
    let proxy = point_spectrum_proxy(&model.h0, &h_v, model.sites, model.internal_dim);
    let h = crate::lindblad::dissipative_hamiltonian(&h_v, cs)?;
    classify_spectrum(&h, cs, &proxy, tol, t_window)
}

/// `Ω̃⁻ = s-lim_{t→+∞} e^{it𝓛₀}(Πe^{−it𝓛}(·)Π)`; the compressed map is `(UΠ ⊗ ŪΠ̄)·exp(tG)`.
pub fn modified_omega_minus(sys: &OpenSystem, pi: &CMat, schedule: &Schedule) -> Result<LimitResult, ScatteringError> {
    let dd = sys.dim() * sys.dim();
    let pib = pi.conjugate();
    let mut walk = PropagatorWalk::with_exp(&sys.g, propagator);
    let first = kron_left_mul(pi, &pib, &identity(dd));
    let mut tracker = PlateauTracker::new(schedule, Metric::InducedTrace, first)?;
    for &t in &schedule.checkpoints {
        if tracker.done() {
            break;
        }
        let p = walk.at(t)?;
        let u = op_exp(&sys.h_free, -t)?;
        let ub = u.conjugate();
        tracker.push(kron_left_mul(&(&u * pi), &(&ub * &pib), p));
    }
    Ok(tracker.finish())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EscapeProbability {
    /// `tr(Ω̃⁻ρ)` clamped to `[0, 1]`.
    pub value: f64,
    pub raw: f64,
    /// `1 − value`.
    pub capture: f64,
}

impl EscapeProbability {
    fn from_raw(raw: f64) -> Self {
        let value = raw.clamp(0.0, 1.0);
        Self { value, raw, capture: 1.0 - value }
    }
}

/// `tr(Ω̃⁻ρ)` from the superoperator.
pub fn escape_probability(omega_tilde: &CMat, rho: &CMat) -> EscapeProbability {
    EscapeProbability::from_raw(trace(&apply_super(omega_tilde, rho)).re)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectEscape {
    pub escape: EscapeProbability,
    /// Plateau limit of the scalar `tr(Πρ_tΠ)`.
    pub limit: LimitResult,
    /// Largest step-to-step increase of `tr(Πρ_tΠ)` (non-positive for monotone absorption).
    pub max_increase: f64,
}

/// `tr(Ω̃⁻ρ) = lim tr(Πe^{−it𝓛}(ρ)Π)`, since `e^{it𝓛₀}` preserves the trace.
pub fn escape_probability_direct(sys: &OpenSystem, pi: &CMat, rho: &CMat, schedule: &Schedule) -> Result<DirectEscape, ScatteringError> {
    let d = sys.dim();
    let mut steps: Option<(f64, CMat)> = None;
    let mut v = stack(rho);
    let mut t_prev = 0.0;
    let scalar = |x: f64| CMat::from_element(1, 1, c(x, 0.0));
    let start = trace(&(pi * rho)).re;
    let mut prev = start;
    let mut max_increase = f64::NEG_INFINITY;
    let limit = plateau_limit(schedule, Metric::Operator, scalar(start), |t| {
        let dt = t - t_prev;
        if !matches!(&steps, Some((s, _)) if (s - dt).abs() <= 1e-12 * t.max(1.0)) {
            steps = Some((dt, propagator(&sys.g, dt)?));
        }
        v = &steps.as_ref().expect("set above").1 * &v;
        t_prev = t;
        let r = unstack(&v, d);
        let value = trace(&(pi * r)).re;
        max_increase = max_increase.max(value - prev);
        prev = value;
        Ok(scalar(value))
    })?;
    Ok(DirectEscape { escape: EscapeProbability::from_raw(limit.value[(0, 0)].re), limit, max_increase })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RangeReport {
    pub w_plus: LimitResult,
    pub range_rank: usize,
    pub target_rank: usize,
    /// Largest principal angle between `Ran W₊` and `(ℋ_b(H) ⊕ ℋ_d(H*))^⊥` (`π/2` on rank mismatch).
    pub max_angle: f64,
    /// `‖P_excl W₊‖ / ‖W₊‖` with `P_excl` the projector onto `ℋ_b(H) ⊕ ℋ_d(H*)`.
    pub excluded_leakage: f64,
    /// `max_b ‖b*W₊‖ / ‖W₊‖` over the bound basis.
    pub bound_overlap: f64,
    pub min_singular: f64,
    /// `1 − c_V/2 − 0.05`.
    pub margin_threshold: f64,
    pub margin_ok: bool,
}

/// Range formula `Ran W₊(H,H₀) = (ℋ_b(H) ⊕ ℋ_d(H*))^⊥` and the injectivity margin.
pub fn range_formula_check(
    sys: &OpenSystem,
    cls: &SpectralClassification,
    schedule: &Schedule,
    c_v: f64,
) -> Result<RangeReport, LimitError> {
    let w_plus = wave_operator(&sys.h, &sys.h_free, TimeSign::Plus, None, schedule)?;
    let w = &w_plus.value;
    let range = SubspaceBasis::column_space(w, 1e-8);
    let excluded = cls.bound.sum(&cls.decaying_adjoint);
    let target = excluded.complement();
    let wn = op_norm(w).max(f64::MIN_POSITIVE);
    let leakage = if excluded.rank() == 0 { 0.0 } else { op_norm(&(excluded.vectors.adjoint() * w)) / wn };
    let bound_overlap = (0..cls.bound.rank()).map(|j| (cls.bound.vectors.column(j).adjoint() * w).norm() / wn).fold(0.0, f64::max);
    let m = min_singular(w);
    let threshold = 1.0 - c_v / 2.0 - 0.05;
    Ok(RangeReport {
        range_rank: range.rank(),
        target_rank: target.rank(),
        max_angle: max_angle(&range, &target),
        excluded_leakage: leakage,
        bound_overlap,
        min_singular: m,
        margin_threshold: threshold,
        margin_ok: m >= threshold,
        w_plus,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialReport {
    pub proxy: PointSpectrumProxy,
    pub w_plus_hv_h0: LimitResult,
    pub w_plus_h0_hv: LimitResult,
    /// `‖W₊(H_V,H₀)*W₊(H_V,H₀) − 1‖`.
    pub isometry_residual: f64,
    /// `‖W₊(H_V,H₀)W₊(H_V,H₀)* − Π_ac‖`.
    pub range_residual: f64,
    /// `‖W₊(H_V,H₀)W₊(H₀,H_V) − Π_ac‖`.
    pub completeness_residual: f64,
}

/// Finite-lattice proxy for a purely absolutely continuous `H_V` off its point spectrum.
pub fn assumption_v0_report(model: &LatticeModel, schedule: &Schedule) -> Result<PotentialReport, LimitError> {
    let h_v = model.h_v();
    let proxy = point_spectrum_proxy(&model.h0, &h_v, model.sites, model.internal_dim);
    let w1 = wave_operator(&h_v, &model.h0, TimeSign::Plus, None, schedule)?;
    let w2 = wave_operator(&model.h0, &h_v, TimeSign::Plus, Some(&proxy.pi_ac), schedule)?;
    let d = h_v.nrows();
    Ok(PotentialReport {
        isometry_residual: op_norm(&(w1.value.adjoint() * &w1.value - identity(d))),
        range_residual: op_norm(&(&w1.value * w1.value.adjoint() - &proxy.pi_ac)),
        completeness_residual: op_norm(&(&w1.value * &w2.value - &proxy.pi_ac)),
        proxy,
        w_plus_hv_h0: w1,
        w_plus_h0_hv: w2,
    })
}

/// Normalized Gaussian packet `exp(−(x−x₀)²/(4σ²) + ik₀x)` in one internal level.
pub fn gaussian_packet(model: &LatticeModel, x0: f64, sigma: f64, k0: f64, level: usize) -> CVec {
    let xs = model.coordinates();
    let d_int = model.internal_dim;
    let mut v = CVec::zeros(model.dim());
    for (k, &x) in xs.iter().enumerate() {
        let amp = (-(x - x0).powi(2) / (4.0 * sigma * sigma)).exp();
        v[k * d_int + level] = c(0.0, k0 * x).exp() * amp;
    }
    let n = v.norm();
    v.map(|z| z / n)
}

/// `‖C⟨X⟩^{1+ε}‖` for stacked couplings.
pub fn weighted_coupling_norm(model: &LatticeModel, cs: &[CMat], eps: f64) -> f64 {
    let w = weight(model, -(1.0 + eps));
    let mut q = CMat::zeros(model.dim(), model.dim());
    for cj in cs {
        let cw = cj * &w;
        q += cw.adjoint() * cw;
    }
    max_eig_hermitian(&q).max(0.0).sqrt()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOptions {
    pub eps: f64,
    pub t_smooth: f64,
    pub dt_smooth: f64,
    pub tol: f64,
    pub t_window: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub amplitude: f64,
    pub weighted_norm: f64,
    pub hypothesis_holds: bool,
    pub bound_rank: usize,
    pub decaying_rank: usize,
    /// Escape probability per incoming packet.
    pub escape: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaptureSweep {
    /// `c₁` proxy: `c_V` with the weight `⟨X⟩^{−1−ε}` on `Π_ac(H_V)`.
    pub c1: SmoothnessEstimate,
    pub rows: Vec<SweepRow>,
    /// Mean escape probability is non-increasing along the sweep (reported, not asserted).
    pub monotone: bool,
}

/// Escape probabilities of `packets` for each coupling amplitude.
pub fn capture_sweep(
    model: &LatticeModel,
    coupling: impl Fn(f64) -> Vec<CMat>,
    amplitudes: &[f64],
    packets: &[CVec],
    schedule: &Schedule,
    opts: &SweepOptions,
) -> Result<CaptureSweep, ScatteringError> {
    let h_v = model.h_v();
    let proxy = point_spectrum_proxy(&model.h0, &h_v, model.sites, model.internal_dim);
    let probe = weight(model, 1.0 + opts.eps);
    let c1 = estimate_c_v(&h_v, &[probe], &proxy.pi_ac, opts.t_smooth, opts.dt_smooth)?;
    let mut rows = Vec::with_capacity(amplitudes.len());
    for &a in amplitudes {
        let cs = coupling(a);
        let weighted = weighted_coupling_norm(model, &cs, opts.eps);
        let sys = OpenSystem::new(model.h0.clone(), h_v.clone(), cs.clone())?;
        let cls = classify_spectrum(&sys.h, &cs, &proxy, opts.tol, opts.t_window)?;
        let mut escape = Vec::with_capacity(packets.len());
        let mut converged = true;
        for psi in packets {
            let rho = psi * psi.adjoint();
            let e = escape_probability_direct(&sys, &cls.pi, &rho, schedule)?;
            converged &= e.limit.converged;
            escape.push(e.escape.value);
        }
        rows.push(SweepRow {
            amplitude: a,
            weighted_norm: weighted,
            hypothesis_holds: c1.value == 0.0 || weighted < 2.0 / c1.value,
            bound_rank: cls.bound.rank(),
            decaying_rank: cls.decaying.rank(),
            escape,
            converged,
        });
    }
    let means: Vec<f64> = rows.iter().map(|r| r.escape.iter().sum::<f64>() / r.escape.len().max(1) as f64).collect();
    let monotone = means.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    Ok(CaptureSweep { c1, rows, monotone })
}

/// Site field `f` placed on one internal level: `diag(f) ⊗ |level⟩⟨level|`.
pub fn level_field(model: &LatticeModel, f: &ScalarField, level: usize) -> CMat {
    let d_int = model.internal_dim;
    let mut m = CMat::zeros(model.dim(), model.dim());
    for (k, z) in f.values.iter().enumerate() {
        m[(k * d_int + level, k * d_int + level)] = *z;
    }
    m
}

/// Absorbing-patch model: free particle with internal levels `{0, 1}`, a single-site well
/// of depth `depth` at `well_site` acting on both levels, and one jump operator
/// `C = √γ|b⟩⟨p|` sending the level-0 state `p` at site `patch_site` into the deepest
/// level-1 well state `b`.
///
/// With `patch_site == well_site` the level-0 well state overlaps `p` strongly and decays
/// fast, while delocalized band states barely see the patch.
#[derive(Debug, Clone)]
pub struct AbsorbingPatch {
    pub model: LatticeModel,
    pub bound_state: CVec,
    pub patch: CVec,
    pub coupling: CMat,
}

pub fn absorbing_patch(
    sites: usize,
    spacing: f64,
    gap: f64,
    depth: f64,
    well_site: usize,
    patch_site: usize,
    gamma: f64,
) -> Result<AbsorbingPatch, crate::model::ModelError> {
    let h_int = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(gap, 0.0)]);
    let base = LatticeModel::new(sites, spacing, crate::model::Boundary::Dirichlet, h_int)?;
    if well_site >= sites || patch_site >= sites {
        return Err(crate::model::ModelError::Lattice(format!("well site {well_site} and patch site {patch_site} must be below {sites}")));
    }
    let mut values = vec![c(0.0, 0.0); sites];
    values[well_site] = c(-depth, 0.0);
    let well = ScalarField { values };
    let v = level_field(&base, &well, 0) + level_field(&base, &well, 1);
    let model = base.with_potential(v)?;
    // Levels decouple, so each eigenvector lives on one level; take the lowest level-1 one.
    let (_, vecs) = hermitian_eig(&model.h_v());
    let level1 = |j: usize| (0..sites).map(|k| vecs[(2 * k + 1, j)].norm_sqr()).sum::<f64>();
    let j = (0..vecs.ncols()).find(|&j| level1(j) > 0.5).expect("level 1 is populated");
    let bound_state = vecs.column(j).into_owned();
    let mut patch = CVec::zeros(model.dim());
    patch[patch_site * 2] = c(1.0, 0.0);
    let coupling = (&bound_state * patch.adjoint()).map(|z| z * gamma.sqrt());
    let model = model.with_coupling(coupling.clone())?;
    Ok(AbsorbingPatch { model, bound_state, patch, coupling })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, ONE, ZERO};
    use crate::model::Boundary;
    use crate::random;

    #[test]
    fn participation_ratio_examples() {
        let v = CVec::from_vec(vec![ONE, ZERO, ZERO, ZERO]);
        assert!((participation_ratio(&v, 1) - 1.0).abs() < 1e-12);
        let u = CVec::from_vec(vec![ONE; 4]);
        assert!((participation_ratio(&u, 1) - 4.0).abs() < 1e-12);
        assert!((participation_ratio(&u, 2) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn free_lattice_has_no_point_spectrum() {
        let m = LatticeModel::scalar(24, 1.0, Boundary::Dirichlet).unwrap();
        let p = point_spectrum_proxy(&m.h0, &m.h_v(), 24, 1);
        assert_eq!(p.count(), 0);
        assert!(frobenius(&(p.pi_ac - identity(24))) < 1e-12);
    }

    #[test]
    fn deep_well_has_one_state_below_the_band() {
        let m = LatticeModel::scalar(25, 1.0, Boundary::Dirichlet).unwrap();
        let f = ScalarField::from_fn(&m, |x| if x.abs() < 0.5 { -3.0 } else { 0.0 });
        let v = crate::model::position_multiplier(&f, &m);
        let m = m.with_potential(v).unwrap();
        let p = point_spectrum_proxy(&m.h0, &m.h_v(), 25, 1);
        assert_eq!(p.out_of_band.len(), 1);
        assert!(p.out_of_band[0] < p.band.0);
    }

    #[test]
    fn classification_examples() {
        // C = 0, V = 0: nothing bound, nothing decaying, Π = 1.
        let m = LatticeModel::scalar(12, 1.0, Boundary::Dirichlet).unwrap();
        let z = CMat::zeros(12, 12);
        let cls = classify_model(&m, &[z], 1e-8, 20.0).unwrap();
        assert_eq!(cls.bound.rank(), 0);
        assert_eq!(cls.decaying.rank(), 0);
        assert!(frobenius(&(&cls.pi - identity(12))) < 1e-10);

        // H = −(i/2)·1: every mode decays.
        let h = identity(4).map(|z| z * c(0.0, -0.5));
        let proxy = point_spectrum_proxy(&CMat::zeros(4, 4), &CMat::zeros(4, 4), 4, 1);
        let cls = classify_spectrum(&h, &[identity(4)], &proxy, 1e-8, 60.0).unwrap();
        assert_eq!(cls.decaying.rank(), 4);
        assert_eq!(cls.bound.rank(), 0);
        assert!(cls.decay_check < 1e-6);
        assert!(frobenius(&cls.pi) < 1e-10);
    }

    #[test]
    fn remote_coupling_keeps_the_bound_state() {
        let m = LatticeModel::scalar(20, 1.0, Boundary::Dirichlet).unwrap();
        let f = ScalarField::from_fn(&m, |x| if (x + 4.5).abs() < 0.5 { -4.0 } else { 0.0 });
        let v = crate::model::position_multiplier(&f, &m);
        let m = m.with_potential(v).unwrap();
        let (vals, vecs) = hermitian_eig(&m.h_v());
        assert!(vals[0] < -0.5);
        let phi_b = SubspaceBasis::column_space(&vecs.columns(0, 1).into_owned(), 1e-8);
        // Coupling supported on the far right, where φ_b is below 1e-8.
        let g = ScalarField::from_fn(&m, |x| if x > 7.0 { 0.8 } else { 0.0 });
        let cc = crate::model::coupling_position(&g, &m);
        let cls = classify_model(&m, &[cc], 1e-8, 20.0).unwrap();
        assert_eq!(cls.bound.rank(), 1);
        assert!(max_angle(&cls.bound, &phi_b) < 1e-4);
        assert!(cls.cross_check_angle < 1e-6);
        assert!(cls.adjoint_bound_angle < 1e-6);
    }

    #[test]
    fn escape_on_free_and_absorbing_toys() {
        let m = LatticeModel::scalar(6, 1.0, Boundary::Dirichlet).unwrap();
        let sys = OpenSystem::free(&m.h0, vec![CMat::zeros(6, 6)]).unwrap();
        let s = Schedule::linear(4.0, 8, 1e-8);
        let om = modified_omega_minus(&sys, &identity(6), &s).unwrap();
        assert!(om.converged);
        assert!(frobenius(&(&om.value - identity(36))) < 1e-10);
        let mut rng = random::rng(1);
        let rho = random::density_matrix(6, 2, &mut rng);
        assert!((escape_probability(&om.value, &rho).value - 1.0).abs() < 1e-10);

        // Uniform absorption: every mode of H decays and Π vanishes.
        let k = identity(3);
        let h = crate::lindblad::dissipative_hamiltonian(&CMat::zeros(3, 3), &[k.clone()]).unwrap();
        let proxy = point_spectrum_proxy(&CMat::zeros(3, 3), &CMat::zeros(3, 3), 3, 1);
        let cls = classify_spectrum(&h, &[k], &proxy, 1e-8, 60.0).unwrap();
        assert!(frobenius(&cls.pi) < 1e-10);
    }

    #[test]
    fn patch_model_routes_agree() {
        let p = absorbing_patch(10, 1.0, 0.5, 3.0, 2, 7, 20.0).unwrap();
        let h_v = p.model.h_v();
        let sys = OpenSystem::new(p.model.h0.clone(), h_v.clone(), p.model.couplings.clone()).unwrap();
        let cls = classify_model(&p.model, &p.model.couplings, 1e-8, 6.0).unwrap();
        assert_eq!(cls.bound.rank(), 1);
        assert!(cls.cross_check_angle < 1e-6);
        assert!(cls.decaying.rank() >= 1);
        let s = Schedule::linear(6.0, 6, 1e-6);
        let om = modified_omega_minus(&sys, &cls.pi, &s).unwrap();
        let mut rng = random::rng(2);
        for _ in 0..5 {
            let rho = random::density_matrix(20, 3, &mut rng);
            let sup = trace(&apply_super(&om.value, &rho)).re;
            let direct = escape_probability_direct(&sys, &cls.pi, &rho, &s).unwrap();
            // Both routes sample tr(Πρ_tΠ) at the same checkpoints.
            if om.plateau.is_none() && direct.limit.plateau.is_none() {
                assert!((sup - direct.escape.raw).abs() < 1e-9);
            }
            assert!((-1e-8..=1.0 + 1e-8).contains(&sup));
        }
        // Mixture linearity.
        let a = random::density_matrix(20, 1, &mut rng);
        let b = random::density_matrix(20, 1, &mut rng);
        let mix = (&a + &b).map(|z| z * 0.5);
        let (ea, eb, em) = (escape_probability(&om.value, &a), escape_probability(&om.value, &b), escape_probability(&om.value, &mix));
        assert!((em.raw - 0.5 * (ea.raw + eb.raw)).abs() < 1e-12);
    }
}

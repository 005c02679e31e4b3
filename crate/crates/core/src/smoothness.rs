//! Smoothness constants on a finite time window.
//!
//! Every improper time integral is truncated at `T` and evaluated with the
//! composite trapezoid rule. For Hermitian generators the trapezoid sum is
//! evaluated in closed form in the eigenbasis (a geometric series per
//! frequency pair); otherwise the propagator is stepped node by node.

use crate::linalg::{c, hermitian_eig, is_normal, matmul, max_eig_hermitian, min_singular, op_exp, op_norm, CMat, CVec, LinalgError};
use crate::lindblad::absorption;
use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeRange {
    /// `[0, T]`
    HalfLine,
    /// `[−T, T]`
    FullLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantKind {
    C0,
    CTilde0,
    CV,
    C0Prime,
    D0,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothnessEstimate {
    pub kind: ConstantKind,
    pub value: f64,
    /// Truncation time `T` (zero for resolvent kinds).
    pub t_trunc: f64,
    /// Effective quadrature step (zero for resolvent kinds).
    pub dt: f64,
    /// Heuristic size of the neglected tail `∫_{|t|>T}`; `None` when no decay was seen.
    pub tail_bound: Option<f64>,
    pub converged: bool,
    /// Value of the independent second route, when one exists.
    pub cross_check: Option<f64>,
    pub grid: Option<ZGridSummary>,
    pub flags: Vec<String>,
}

/// Time grid of the composite trapezoid rule: `N` steps of `T/N` with `N = max(1, round(T/dt))`.
pub fn trapezoid_steps(t: f64, dt: f64) -> (usize, f64) {
    let n = ((t / dt).round() as usize).max(1);
    (n, t / n as f64)
}

/// `Σ_{m=0}^{N} w_m e^{iωmδ}` with trapezoid weights `δ·(½, 1, …, 1, ½)`.
fn trapezoid_phase_sum(omega: f64, n: usize, delta: f64) -> Complex64 {
    let theta = omega * delta;
    let z = c(0.0, theta).exp();
    let zn = c(0.0, theta * n as f64).exp();
    let geometric = if theta.abs() < 1e-9 { c(n as f64 + 1.0, 0.0) } else { (c(1.0, 0.0) - zn * z) / (c(1.0, 0.0) - z) };
    (geometric - (c(1.0, 0.0) + zn) * 0.5) * delta
}

/// `∫ e^{itA*} Q e^{−itA} dt` over `range` by composite trapezoid, with `Q = ΣC_j*C_j`.
pub fn gram_operator(a: &CMat, cs: &[CMat], range: TimeRange, t: f64, dt: f64) -> Result<CMat, LinalgError> {
    let q = absorption(cs, a.nrows());
    gram_operator_q(a, &q, range, t, dt)
}

pub fn gram_operator_q(a: &CMat, q: &CMat, range: TimeRange, t: f64, dt: f64) -> Result<CMat, LinalgError> {
    if is_normal(a) && crate::linalg::hermiticity_defect(a) <= 1e-12 * (1.0 + op_norm(a)) {
        Ok(gram_hermitian_closed_form(a, q, range, t, dt))
    } else {
        gram_stepping(a, q, range, t, dt)
    }
}

/// Trapezoid sum evaluated node by node with a stepped propagator.
pub fn gram_stepping(a: &CMat, q: &CMat, range: TimeRange, t: f64, dt: f64) -> Result<CMat, LinalgError> {
    let (n, step) = trapezoid_steps(t, dt);
    let d = a.nrows();
    let mut total = CMat::zeros(d, d);
    let signs: &[f64] = match range {
        TimeRange::HalfLine => &[1.0],
        TimeRange::FullLine => &[1.0, -1.0],
    };
    for &sign in signs {
        let u1 = op_exp(a, sign * step)?;
        let mut u = CMat::identity(d, d);
        for m in 0..=n {
            let w = if m == 0 || m == n { 0.5 } else { 1.0 };
            total += (u.adjoint() * q * &u).map(|z| z * (w * step));
            if m < n {
                u = &u1 * u;
            }
        }
    }
    Ok(total)
}

/// Same trapezoid sum for Hermitian `A`, in closed form on the eigenbasis.
pub fn gram_hermitian_closed_form(a: &CMat, q: &CMat, range: TimeRange, t: f64, dt: f64) -> CMat {
    let (n, step) = trapezoid_steps(t, dt);
    let (vals, u) = hermitian_eig(a);
    let m = u.adjoint() * q * &u;
    let d = vals.len();
    // Integrand entry (j, k) in the eigenbasis carries e^{it(λ_j − λ_k)}.
    let w = CMat::from_fn(d, d, |j, k| {
        let omega = vals[j] - vals[k];
        match range {
            TimeRange::HalfLine => trapezoid_phase_sum(omega, n, step),
            TimeRange::FullLine => trapezoid_phase_sum(omega, n, step) + trapezoid_phase_sum(-omega, n, step),
        }
    });
    let inner = m.component_mul(&w);
    matmul(&matmul(&u, &inner), &u.adjoint())
}

/// Top eigenvector of a Hermitian matrix.
fn top_eigvec(g: &CMat) -> (f64, CVec) {
    let (vals, u) = hermitian_eig(g);
    let k = vals.len() - 1;
    (vals[k].max(0.0), u.column(k).into_owned())
}

/// Integrand `Σ‖C_j e^{−itA}u‖²` on the trapezoid nodes of `[0, T]` and, for the
/// full line, of `[−T, 0]`. Returns `(|t|, value)` pairs.
fn integrand_profile(a: &CMat, cs: &[CMat], u: &CVec, range: TimeRange, t: f64, dt: f64) -> Result<Vec<(f64, f64)>, LinalgError> {
    let (n, step) = trapezoid_steps(t, dt);
    let mut out = Vec::new();
    let signs: &[f64] = match range {
        TimeRange::HalfLine => &[1.0],
        TimeRange::FullLine => &[1.0, -1.0],
    };
    for &sign in signs {
        let u1 = op_exp(a, sign * step)?;
        let mut v = u.clone();
        for m in 0..=n {
            let f: f64 = cs.iter().map(|cj| (cj * &v).norm_squared()).sum();
            out.push((m as f64 * step, f));
            if m < n {
                v = &u1 * v;
            }
        }
    }
    Ok(out)
}

/// Decay heuristic: the integrand must drop by a factor 10 over `[T/2, T]`
/// relative to its peak on `[0, T/2]`. Returns `(converged, tail estimate)`.
fn decay_verdict(profile: &[(f64, f64)], t: f64, sides: f64) -> (bool, Option<f64>) {
    let early = profile.iter().filter(|(s, _)| *s < 0.5 * t).map(|p| p.1).fold(0.0, f64::max);
    let late = profile.iter().filter(|(s, _)| *s >= 0.5 * t).map(|p| p.1).fold(0.0, f64::max);
    if early == 0.0 && late == 0.0 {
        return (true, Some(0.0));
    }
    if late * 10.0 > early {
        return (false, None);
    }
    if late == 0.0 {
        return (true, Some(0.0));
    }
    // Exponential extrapolation at the observed rate over half a window.
    let rate = (early / late).ln() / (0.5 * t);
    (true, Some(sides * late / rate))
}

/// `c₀ = (λ_max ∫_{−T}^{T} e^{itH₀}C*Ce^{−itH₀}dt)^{1/2}` with the decay heuristic.
pub fn estimate_c0(h0: &CMat, cs: &[CMat], t: f64, dt: f64) -> Result<SmoothnessEstimate, LinalgError> {
    let g = gram_operator(h0, cs, TimeRange::FullLine, t, dt)?;
    let (lmax, u) = top_eigvec(&g);
    let profile = integrand_profile(h0, cs, &u, TimeRange::FullLine, t, dt)?;
    let (converged, tail) = decay_verdict(&profile, t, 2.0);
    let mut flags = Vec::new();
    if !converged {
        flags.push("integrand did not decay by a factor 10 over [T/2, T]".into());
    }
    Ok(SmoothnessEstimate {
        kind: ConstantKind::C0,
        value: lmax.sqrt(),
        t_trunc: t,
        dt: trapezoid_steps(t, dt).1,
        tail_bound: tail,
        converged,
        cross_check: None,
        grid: None,
        flags,
    })
}

/// `c̃₀` on `[0, T]` by two routes: the norm-loss identity
/// `∫₀ᵀ‖Ce^{−itH}u‖² = ‖u‖² − ‖e^{−iTH}u‖²` gives `(1 − σ_min(e^{−iTH})²)^{1/2}`
/// (the reported value, free of quadrature error), and the half-line Gram
/// operator gives the cross-check.
pub fn estimate_c_tilde0(h: &CMat, cs: &[CMat], t: f64, dt: f64) -> Result<SmoothnessEstimate, LinalgError> {
    let g = gram_operator(h, cs, TimeRange::HalfLine, t, dt)?;
    let gram_route = max_eig_hermitian(&g).max(0.0).sqrt();
    let smin = min_singular(&op_exp(h, t)?);
    let decay_route = (1.0 - smin * smin).max(0.0).sqrt();
    let (_, u) = top_eigvec(&g);
    let profile = integrand_profile(h, cs, &u, TimeRange::HalfLine, t, dt)?;
    let (converged, tail) = decay_verdict(&profile, t, 1.0);
    let mut flags = Vec::new();
    if (gram_route - decay_route).abs() > 1e-3 {
        flags.push(format!("route disagreement {:.3e}", (gram_route - decay_route).abs()));
    }
    if !converged {
        flags.push("integrand did not decay by a factor 10 over [T/2, T]".into());
    }
    Ok(SmoothnessEstimate {
        kind: ConstantKind::CTilde0,
        value: decay_route,
        t_trunc: t,
        dt: trapezoid_steps(t, dt).1,
        tail_bound: tail,
        converged,
        cross_check: Some(gram_route),
        grid: None,
        flags,
    })
}

/// `c_V = (λ_max Π G Π)^{1/2}` with `G` the full-line Gram operator of `H_V`.
pub fn estimate_c_v(h_v: &CMat, cs: &[CMat], pi_ac: &CMat, t: f64, dt: f64) -> Result<SmoothnessEstimate, LinalgError> {
    let comm = op_norm(&(h_v * pi_ac - pi_ac * h_v));
    let mut flags = Vec::new();
    if comm > 1e-8 * (1.0 + op_norm(h_v)) {
        flags.push(format!("projection does not commute with H_V ({comm:.3e})"));
    }
    let g = gram_operator(h_v, cs, TimeRange::FullLine, t, dt)?;
    let pgp = pi_ac * g * pi_ac;
    let (lmax, u) = top_eigvec(&pgp);
    let (converged, tail) = if lmax == 0.0 {
        (true, Some(0.0))
    } else {
        let profile = integrand_profile(h_v, cs, &u, TimeRange::FullLine, t, dt)?;
        decay_verdict(&profile, t, 2.0)
    };
    if !converged {
        flags.push("integrand did not decay by a factor 10 over [T/2, T]".into());
    }
    Ok(SmoothnessEstimate {
        kind: ConstantKind::CV,
        value: lmax.sqrt(),
        t_trunc: t,
        dt: trapezoid_steps(t, dt).1,
        tail_bound: tail,
        converged,
        cross_check: None,
        grid: None,
        flags,
    })
}

/// Horizontal lines `Im z ∈ {η, 2η, 4η}` sweeping `Re z` across `[λ_min, λ_max]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZGrid {
    pub eta: f64,
    pub eta_min: f64,
    pub imag_parts: Vec<f64>,
    pub real_parts: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZGridSummary {
    pub eta: f64,
    pub lines: Vec<f64>,
    pub points_per_line: usize,
    pub re_min: f64,
    pub re_max: f64,
    /// Location of the supremum.
    pub argmax_re: f64,
    pub argmax_im: f64,
}

impl ZGrid {
    /// Default grid; `eta = None` uses `0.05·(λ_max − λ_min)`.
    pub fn for_operator(h0: &CMat, eta: Option<f64>, points: usize) -> Self {
        let (vals, _) = hermitian_eig(h0);
        let (lo, hi) = (vals[0], vals[vals.len() - 1]);
        let width = (hi - lo).max(1e-12);
        let eta = eta.unwrap_or(0.05 * width);
        let points = points.max(2);
        let real_parts = (0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect();
        Self { eta, eta_min: 1e-6 * width, imag_parts: vec![eta, 2.0 * eta, 4.0 * eta], real_parts }
    }

    pub fn points(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.imag_parts.iter().flat_map(move |&y| self.real_parts.iter().map(move |&x| c(x, y)))
    }

    fn summary(&self, arg: Complex64) -> ZGridSummary {
        ZGridSummary {
            eta: self.eta,
            lines: self.imag_parts.clone(),
            points_per_line: self.real_parts.len(),
            re_min: self.real_parts[0],
            re_max: *self.real_parts.last().unwrap(),
            argmax_re: arg.re,
            argmax_im: arg.im,
        }
    }
}

/// Couplings stacked into one tall operator, so `C*C = ΣC_j*C_j`.
fn stacked_couplings(cs: &[CMat], d: usize) -> CMat {
    let mut out = CMat::zeros(d * cs.len().max(1), d);
    for (j, cj) in cs.iter().enumerate() {
        out.rows_mut(j * d, d).copy_from(cj);
    }
    out
}

/// `c'₀ = max_z ‖C((H₀−z)^{−1} − (H₀−z̄)^{−1})C*‖` over the grid.
pub fn resolvent_smoothness(h0: &CMat, cs: &[CMat], grid: &ZGrid) -> SmoothnessEstimate {
    let (vals, u) = hermitian_eig(h0);
    let d = vals.len();
    let cq = stacked_couplings(cs, d) * &u;
    let k = cq.adjoint() * &cq;
    let mut best = (0.0, c(0.0, 0.0));
    for z in grid.points() {
        // (λ−z)^{−1} − (λ−z̄)^{−1} = 2i·η/((λ−x)² + η²), so the norm is 2·λ_max(D^{1/2} K D^{1/2}).
        let s: Vec<f64> = vals.iter().map(|&l| (z.im / ((l - z.re).powi(2) + z.im * z.im)).sqrt()).collect();
        let m = CMat::from_fn(d, d, |i, j| k[(i, j)] * s[i] * s[j]);
        let v = 2.0 * max_eig_hermitian(&m).max(0.0);
        if v > best.0 {
            best = (v, z);
        }
    }
    resolvent_estimate(ConstantKind::C0Prime, best, grid)
}

/// `d₀ = max_z ‖C(H₀−z)^{−1}C*‖` over the grid.
pub fn supersmooth_constant(h0: &CMat, cs: &[CMat], grid: &ZGrid) -> SmoothnessEstimate {
    let (vals, u) = hermitian_eig(h0);
    let d = vals.len();
    let cq = stacked_couplings(cs, d) * &u;
    // ‖A D A*‖ = ‖B D B*‖ with B = ΣV* from the thin SVD A = UΣV*.
    let svd = cq.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let b = CMat::from_fn(vt.nrows(), d, |i, j| vt[(i, j)] * svd.singular_values[i]);
    let mut best = (0.0, c(0.0, 0.0));
    for z in grid.points() {
        let dz: Vec<Complex64> = vals.iter().map(|&l| c(1.0, 0.0) / (c(l, 0.0) - z)).collect();
        let bd = CMat::from_fn(b.nrows(), d, |i, j| b[(i, j)] * dz[j]);
        let v = op_norm(&(bd * b.adjoint()));
        if v > best.0 {
            best = (v, z);
        }
    }
    resolvent_estimate(ConstantKind::D0, best, grid)
}

fn resolvent_estimate(kind: ConstantKind, best: (f64, Complex64), grid: &ZGrid) -> SmoothnessEstimate {
    let mut flags = Vec::new();
    if grid.eta < grid.eta_min {
        flags.push(format!("grid line Im z = {:.3e} is below η_min = {:.3e}", grid.eta, grid.eta_min));
    }
    SmoothnessEstimate {
        kind,
        value: best.0,
        t_trunc: 0.0,
        dt: 0.0,
        tail_bound: None,
        converged: flags.is_empty(),
        cross_check: None,
        grid: Some(grid.summary(best.1)),
        flags,
    }
}

/// `max_{t ∈ [−T, T]} ‖e^{−itH}‖` sampled on `2n+1` equispaced points.
pub fn max_propagator_norm(h: &CMat, t: f64, n: usize) -> Result<f64, LinalgError> {
    let n = n.max(1);
    let mut m: f64 = 1.0;
    for k in 1..=n {
        let s = t * k as f64 / n as f64;
        m = m.max(op_norm(&op_exp(h, s)?)).max(op_norm(&op_exp(h, -s)?));
    }
    Ok(m)
}

/// The finite-window bounds linking `c₀`, `c̃₀` and `max‖e^{−itH}‖`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoothnessChain {
    pub c0: SmoothnessEstimate,
    pub c_tilde0: SmoothnessEstimate,
    /// `m = max_{|t|≤T} ‖e^{−itH}‖`.
    pub max_propagator_norm: f64,
    /// `1/(1 − c₀/2)` when `c₀ < 2`.
    pub c0_propagator_bound: Option<f64>,
    /// `1 − (1 − c₀/2)²` when `c₀ < 2`.
    pub c0_c_tilde_bound: Option<f64>,
    /// `(1 − c̃₀²)^{−1/2}` when `c̃₀ < 1`.
    pub c_tilde_propagator_bound: Option<f64>,
    /// `(1 − m^{−2})^{1/2}`.
    pub converse_bound: f64,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn le(name: &str, measured: f64, threshold: f64) -> Self {
        Self { name: name.into(), measured, threshold, passed: measured <= threshold }
    }

    pub fn ge(name: &str, measured: f64, threshold: f64) -> Self {
        Self { name: name.into(), measured, threshold, passed: measured >= threshold }
    }
}

/// Measure `c₀` on `[−T,T]`, `c̃₀` on `[0,T]` and `m` on `[−T,T]`, then test the chain.
pub fn smoothness_chain(h0: &CMat, cs: &[CMat], t: f64, dt: f64, samples: usize) -> Result<SmoothnessChain, LinalgError> {
    let h = crate::lindblad::dissipative_hamiltonian(h0, cs)?;
    let c0 = estimate_c0(h0, cs, t, dt)?;
    let ct = estimate_c_tilde0(&h, cs, t, dt)?;
    let m = max_propagator_norm(&h, t, samples)?;
    let mut checks = vec![Check::le("c_tilde0 <= 1 + 1e-9", ct.value, 1.0 + 1e-9)];
    let (pb, cb) = if c0.value < 2.0 {
        let pb = 1.0 / (1.0 - c0.value / 2.0);
        let cb = 1.0 - (1.0 - c0.value / 2.0).powi(2);
        checks.push(Check::le("max|e^{-itH}| <= (1 - c0/2)^{-1}", m, pb * (1.0 + 1e-6)));
        checks.push(Check::le("c_tilde0^2 <= 1 - (1 - c0/2)^2", ct.value * ct.value, cb + 1e-6));
        (Some(pb), Some(cb))
    } else {
        (None, None)
    };
    let tb = if ct.value < 1.0 {
        let tb = (1.0 - ct.value * ct.value).powf(-0.5);
        checks.push(Check::le("max|e^{-itH}| <= (1 - c_tilde0^2)^{-1/2}", m, tb * (1.0 + 1e-6)));
        Some(tb)
    } else {
        None
    };
    let converse = (1.0 - 1.0 / (m * m)).max(0.0).sqrt();
    if m > 1.0 {
        checks.push(Check::le("c_tilde0 <= (1 - m^{-2})^{1/2}", ct.value, converse + 1e-6));
    }
    Ok(SmoothnessChain {
        c0,
        c_tilde0: ct,
        max_propagator_norm: m,
        c0_propagator_bound: pb,
        c0_c_tilde_bound: cb,
        c_tilde_propagator_bound: tb,
        converse_bound: converse,
        checks,
    })
}

/// Weight operator `⟨X⟩^{−s} ⊗ 1`.
pub fn weight(model: &crate::model::LatticeModel, s: f64) -> CMat {
    let f = crate::model::ScalarField::from_fn(model, |x| (1.0 + x * x).powf(-s / 2.0));
    crate::model::position_multiplier(&f, model)
}

/// `diag(v) ⊗ 1` for a real vector.
pub fn diagonal(v: &[f64]) -> CMat {
    CMat::from_diagonal(&DVector::from_iterator(v.len(), v.iter().map(|&x| c(x, 0.0))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, identity, ONE, ZERO};
    use crate::lindblad::dissipative_hamiltonian;
    use crate::random;

    #[test]
    fn gram_examples() {
        let mut rng = random::rng(1);
        let h = random::hermitian(3, 1.0, &mut rng);
        let z = gram_operator(&h, &[CMat::zeros(3, 3)], TimeRange::HalfLine, 2.0, 0.1).unwrap();
        assert_eq!(frobenius(&z), 0.0);
        let g = gram_operator(&h, &[identity(3)], TimeRange::HalfLine, 2.0, 0.1).unwrap();
        assert!(frobenius(&(g - identity(3).map(|x| x * 2.0))) < 1e-12);
        let sz = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, c(-1.0, 0.0)]);
        let cc = CMat::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        let g = gram_operator(&sz, &[cc], TimeRange::HalfLine, 3.0, 0.01).unwrap();
        let expect = CMat::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, c(3.0, 0.0)]);
        assert!(frobenius(&(g - expect)) < 1e-12);
    }

    #[test]
    fn closed_form_matches_stepping() {
        let mut rng = random::rng(2);
        let (h0, cs) = random::model(6, 2, 2.0, 0.5, &mut rng);
        let q = absorption(&cs, 6);
        for range in [TimeRange::HalfLine, TimeRange::FullLine] {
            let a = gram_hermitian_closed_form(&h0, &q, range, 3.0, 0.01);
            let b = gram_stepping(&h0, &q, range, 3.0, 0.01).unwrap();
            assert!(frobenius(&(a - b)) < 1e-10);
        }
    }

    #[test]
    fn gram_is_monotone_in_t() {
        let mut rng = random::rng(3);
        let (h0, cs) = random::model(5, 1, 1.0, 0.5, &mut rng);
        let h = dissipative_hamiltonian(&h0, &cs).unwrap();
        let g1 = gram_operator(&h, &cs, TimeRange::HalfLine, 1.0, 0.01).unwrap();
        let g2 = gram_operator(&h, &cs, TimeRange::HalfLine, 2.0, 0.01).unwrap();
        assert!(crate::linalg::min_eig_hermitian(&(g2 - g1)) > -1e-12);
    }

    #[test]
    fn c0_examples() {
        let h0 = CMat::from_row_slice(2, 2, &[ZERO, c(-1.0, 0.0), c(-1.0, 0.0), ZERO]);
        let zero = estimate_c0(&h0, &[CMat::zeros(2, 2)], 5.0, 0.01).unwrap();
        assert_eq!(zero.value, 0.0);
        assert!(zero.converged);
        let id = estimate_c0(&h0, &[identity(2)], 5.0, 0.01).unwrap();
        assert!(!id.converged);
        let eps = 0.1;
        let cc = CMat::from_row_slice(2, 2, &[c(eps, 0.0), ZERO, ZERO, ZERO]);
        let coarse = estimate_c0(&h0, &[cc.clone()], 5.0, 0.01).unwrap();
        let q = absorption(&[cc], 2);
        let fine = gram_stepping(&h0, &q, TimeRange::FullLine, 5.0, 0.001).unwrap();
        let oracle = max_eig_hermitian(&fine).sqrt();
        assert!((coarse.value - oracle).abs() / oracle < 1e-3);
    }

    #[test]
    fn c_tilde0_examples() {
        let mut rng = random::rng(4);
        let h0 = random::hermitian(4, 1.0, &mut rng);
        let z = estimate_c_tilde0(&h0, &[CMat::zeros(4, 4)], 3.0, 0.01).unwrap();
        assert!(z.value.abs() < 1e-7);
        let hd = dissipative_hamiltonian(&CMat::zeros(3, 3), &[identity(3)]).unwrap();
        let full = estimate_c_tilde0(&hd, &[identity(3)], 40.0, 0.01).unwrap();
        assert!((full.value - 1.0).abs() < 1e-8);
        assert!(full.value <= 1.0 + 1e-9);
        let (h0, cs) = random::model(5, 2, 1.0, 0.6, &mut rng);
        let h = dissipative_hamiltonian(&h0, &cs).unwrap();
        let e = estimate_c_tilde0(&h, &cs, 4.0, 0.005).unwrap();
        assert!((e.value - e.cross_check.unwrap()).abs() < 1e-3);
        assert!(e.flags.iter().all(|f| !f.contains("disagreement")));
    }

    #[test]
    fn c_v_examples() {
        let mut rng = random::rng(5);
        let (h0, cs) = random::model(4, 1, 1.0, 0.5, &mut rng);
        assert_eq!(estimate_c_v(&h0, &[CMat::zeros(4, 4)], &identity(4), 2.0, 0.01).unwrap().value, 0.0);
        assert_eq!(estimate_c_v(&h0, &cs, &CMat::zeros(4, 4), 2.0, 0.01).unwrap().value, 0.0);
        let full = estimate_c_v(&h0, &cs, &identity(4), 2.0, 0.01).unwrap();
        let fine = gram_stepping(&h0, &absorption(&cs, 4), TimeRange::FullLine, 2.0, 0.001).unwrap();
        let oracle = max_eig_hermitian(&fine).sqrt();
        assert!((full.value - oracle).abs() / oracle < 1e-3);
    }

    #[test]
    fn resolvent_examples() {
        let h0 = CMat::zeros(1, 1);
        let grid = ZGrid { eta: 0.1, eta_min: 1e-9, imag_parts: vec![0.1], real_parts: vec![-1.0, 0.0, 1.0] };
        let r = resolvent_smoothness(&h0, &[identity(1)], &grid);
        // 2·Im z/|z|² peaks at Re z = 0 with value 2/η.
        assert!((r.value - 20.0).abs() < 1e-10);
        let grid = ZGrid::for_operator(&CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]), None, 11);
        let cz = CMat::zeros(2, 2);
        assert_eq!(resolvent_smoothness(&grid_h(), &[cz.clone()], &grid).value, 0.0);
        assert_eq!(supersmooth_constant(&grid_h(), &[cz], &grid).value, 0.0);
    }

    fn grid_h() -> CMat {
        CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    #[test]
    fn supersmooth_dominates_half_resolvent_gap() {
        let mut rng = random::rng(6);
        let (h0, cs) = random::model(6, 1, 1.0, 0.5, &mut rng);
        for k in 0..5 {
            let eta = 0.05 * (k + 1) as f64;
            let grid = ZGrid { eta, eta_min: 0.0, imag_parts: vec![eta], real_parts: vec![-0.3 + 0.1 * k as f64] };
            let cp = resolvent_smoothness(&h0, &cs, &grid).value;
            let d0 = supersmooth_constant(&h0, &cs, &grid).value;
            assert!(d0 >= 0.5 * cp - 1e-12);
        }
    }

    #[test]
    fn chain_on_random_model() {
        let mut rng = random::rng(7);
        let (h0, cs) = random::model(4, 1, 1.0, 0.25, &mut rng);
        let chain = smoothness_chain(&h0, &cs, 3.0, 0.005, 30).unwrap();
        assert!(chain.c0.value < 2.0);
        for ch in &chain.checks {
            assert!(ch.passed, "{ch:?}");
        }
    }
}

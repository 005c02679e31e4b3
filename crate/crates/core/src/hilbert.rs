//! Hilbert-space wave operators for a dissipative `H` against a self-adjoint `H₀`.
//!
//! `W±(A, B) = s-lim_{t→∓∞} e^{itA}e^{−itB}`. With `s = ∓t → +∞` the sampled family is
//! `e^{∓isA}e^{±isB}`, so `W₊` samples `e^{−isA}e^{isB}` and `W₋` samples `e^{isA}e^{−isB}`.

use crate::limits::{plateau_limit, LimitError, LimitResult, Metric, PropagatorWalk, Schedule};
use crate::linalg::{c, identity, matmul, min_singular, op_exp, op_norm, CMat, LinalgError, SubspaceBasis};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeSign {
    /// `W₊`: `t → −∞`.
    Plus,
    /// `W₋`: `t → +∞`.
    Minus,
}

impl TimeSign {
    /// Sign `σ` with `t = σ·s`, `s → +∞`.
    pub fn direction(self) -> f64 {
        match self {
            TimeSign::Plus => -1.0,
            TimeSign::Minus => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TimeSign::Plus => "+",
            TimeSign::Minus => "-",
        }
    }
}

fn neg(a: &CMat) -> CMat {
    a.map(|z| -z)
}

/// Plateau limit of `e^{itA}e^{−itB}Π` as `t → ∓∞`.
pub fn wave_operator(
    a: &CMat,
    b: &CMat,
    sign: TimeSign,
    pre_projection: Option<&CMat>,
    schedule: &Schedule,
) -> Result<LimitResult, LimitError> {
    if a.shape() != b.shape() {
        return Err(LinalgError::Dimension("wave operator needs A and B of equal size".into()).into());
    }
    let d = a.nrows();
    let pi = pre_projection.cloned().unwrap_or_else(|| identity(d));
    // e^{itA} with t = σs is e^{−is(−σA)}.
    let sigma = sign.direction();
    let a_gen = a.map(|z| z * -sigma);
    let b_gen = b.map(|z| z * sigma);
    let mut wa = PropagatorWalk::new(&a_gen);
    let mut wb = PropagatorWalk::new(&b_gen);
    let initial = pi.clone();
    plateau_limit(schedule, Metric::Operator, initial, |s| {
        let ua = wa.at(s)?.clone();
        let ub = wb.at(s)?;
        Ok(matmul(&matmul(&ua, ub), &pi))
    })
}

/// `‖A·W − W·B‖ / (1 + ‖A‖‖W‖)`.
pub fn intertwining_residual(w: &CMat, a: &CMat, b: &CMat) -> f64 {
    op_norm(&(a * w - w * b)) / (1.0 + op_norm(a) * op_norm(w))
}

/// `‖XY − I‖`.
pub fn inverse_residual(x: &CMat, y: &CMat) -> f64 {
    op_norm(&(x * y - identity(x.nrows())))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegralRepresentation {
    /// `max_{j,k} |⟨(W − 1 − J)e_j, e_k⟩|` with `J` the truncated integral.
    pub residual: f64,
    /// `‖g(T)‖ / max_s ‖g(s)‖` for the integrand `g`.
    pub tail_ratio: f64,
    /// False when the integrand has not dropped by a factor 10 at `T`.
    pub decayed: bool,
}

/// Truncated integral of `d/dt[e^{itA}e^{−itB}] = e^{itA}·i(A−B)·e^{−itB}` from `0` to `∓T`.
///
/// For `A − B = ±(i/2)C*C` the entries are the paired integrals `±½∫⟨C·u, C·v⟩`.
pub fn wave_integral(a: &CMat, b: &CMat, sign: TimeSign, t: f64, dt: f64) -> Result<(CMat, f64), LinalgError> {
    let d = a.nrows();
    let dmat = (a - b).map(|z| z * c(0.0, 1.0));
    let sigma = sign.direction();
    let (n, step) = crate::smoothness::trapezoid_steps(t, dt);
    let a_gen = a.map(|z| z * -sigma);
    let b_gen = b.map(|z| z * sigma);
    let ua1 = op_exp(&a_gen, step)?;
    let ub1 = op_exp(&b_gen, step)?;
    let mut ua = identity(d);
    let mut ub = identity(d);
    let mut total = CMat::zeros(d, d);
    let mut peak: f64 = 0.0;
    let mut last = 0.0;
    for m in 0..=n {
        let g = &ua * &dmat * &ub;
        let gn = op_norm(&g);
        peak = peak.max(gn);
        last = gn;
        let w = if m == 0 || m == n { 0.5 } else { 1.0 };
        total += g.map(|z| z * (w * step * sigma));
        if m < n {
            ua = &ua * &ua1;
            ub = &ub1 * &ub;
        }
    }
    let ratio = if peak == 0.0 { 0.0 } else { last / peak };
    Ok((total, ratio))
}

/// Compares a computed `W±(A, B)` against `1 + ∫₀^{∓T} e^{itA}i(A−B)e^{−itB}dt`.
pub fn integral_representation_residual(
    a: &CMat,
    b: &CMat,
    w: &CMat,
    sign: TimeSign,
    t: f64,
    dt: f64,
) -> Result<IntegralRepresentation, LinalgError> {
    let (j, tail_ratio) = wave_integral(a, b, sign, t, dt)?;
    let diff = w - identity(a.nrows()) - j;
    let residual = diff.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(IntegralRepresentation { residual, tail_ratio, decayed: tail_ratio <= 0.1 })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatteringResult {
    /// Plateau limit of `e^{isH₀}e^{−2isH}e^{isH₀}`.
    pub direct: LimitResult,
    pub w_minus_h0_h: LimitResult,
    pub w_plus_h_h0: LimitResult,
    #[serde(skip)]
    pub composed: CMat,
    /// `‖S_direct − W₋(H₀,H)W₊(H,H₀)‖`.
    pub route_residual: f64,
}

impl ScatteringResult {
    pub fn value(&self) -> &CMat {
        &self.direct.value
    }

    pub fn converged(&self) -> bool {
        self.direct.converged && self.w_minus_h0_h.converged && self.w_plus_h_h0.converged
    }
}

/// `S(H, H₀)` by the direct limit and by composing the two wave operators.
pub fn scattering_operator(h: &CMat, h0: &CMat, schedule: &Schedule) -> Result<ScatteringResult, LimitError> {
    let d = h.nrows();
    let mh0 = neg(h0);
    let h2 = h.map(|z| z * 2.0);
    let mut w0 = PropagatorWalk::new(&mh0);
    let mut wh = PropagatorWalk::new(&h2);
    let direct = plateau_limit(schedule, Metric::Operator, identity(d), |s| {
        let u0 = w0.at(s)?.clone();
        let uh = wh.at(s)?;
        Ok(matmul(&matmul(&u0, uh), &u0))
    })?;
    let wm = wave_operator(h0, h, TimeSign::Minus, None, schedule)?;
    let wp = wave_operator(h, h0, TimeSign::Plus, None, schedule)?;
    let composed = &wm.value * &wp.value;
    let route_residual = op_norm(&(&direct.value - &composed));
    Ok(ScatteringResult { direct, w_minus_h0_h: wm, w_plus_h_h0: wp, composed, route_residual })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClosedRangeReport {
    pub min_singular: f64,
    pub range_rank: usize,
    /// `max_t ‖e^{−itH}Q‖` with `Q` an orthonormal basis of `Ran W`.
    pub restricted_bound: Option<f64>,
    /// `max_{t,j} ‖e^{−itH}We_j‖ / ‖We_j‖`.
    pub columnwise_bound: Option<f64>,
    /// Restricted bound on the first and second half of the grid; growth signals an unbounded trend.
    pub first_half_bound: Option<f64>,
    pub second_half_bound: Option<f64>,
    /// `m·M` with `m = min_singular`, `M = restricted_bound`; equals 1 for an exact intertwiner.
    pub product: Option<f64>,
    /// `product ∈ [0.9, 1.1]`.
    pub consistent: bool,
}

/// Closed-range versus bounded-restricted-propagator diagnostic.
pub fn closed_range_diagnostic(w: &CMat, h: &CMat, t_grid: &[f64]) -> Result<ClosedRangeReport, LinalgError> {
    let m = min_singular(w);
    let range = SubspaceBasis::column_space(w, 1e-8);
    if range.rank() == 0 {
        return Ok(ClosedRangeReport {
            min_singular: m,
            range_rank: 0,
            restricted_bound: None,
            columnwise_bound: None,
            first_half_bound: None,
            second_half_bound: None,
            product: None,
            consistent: false,
        });
    }
    let q = &range.vectors;
    let col_norms: Vec<f64> = (0..w.ncols()).map(|j| w.column(j).norm()).collect();
    let wmax = col_norms.iter().copied().fold(0.0, f64::max);
    let mut restricted: f64 = 1.0;
    let mut columnwise: f64 = 1.0;
    let mut halves = [1.0f64, 1.0f64];
    let tmax = t_grid.iter().map(|t| t.abs()).fold(0.0, f64::max);
    for &t in t_grid {
        let u = op_exp(h, t)?;
        let r = op_norm(&(&u * q));
        restricted = restricted.max(r);
        halves[usize::from(t.abs() > 0.5 * tmax)] = halves[usize::from(t.abs() > 0.5 * tmax)].max(r);
        let uw = &u * w;
        for j in 0..w.ncols() {
            if col_norms[j] > 1e-8 * wmax {
                columnwise = columnwise.max(uw.column(j).norm() / col_norms[j]);
            }
        }
    }
    let product = m * restricted;
    Ok(ClosedRangeReport {
        min_singular: m,
        range_rank: range.rank(),
        restricted_bound: Some(restricted),
        columnwise_bound: Some(columnwise),
        first_half_bound: Some(halves[0]),
        second_half_bound: Some(halves[1]),
        product: Some(product),
        consistent: (0.9..=1.1).contains(&product),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdjointReport {
    pub sign: TimeSign,
    pub w_h_h0: LimitResult,
    pub w_h0_hstar: LimitResult,
    pub w_h0_h: LimitResult,
    pub w_hstar_h0: LimitResult,
    /// `‖W±(H₀,H*) − W±(H,H₀)*‖`.
    pub residual_h0_hstar: f64,
    /// `‖W±(H*,H₀) − W±(H₀,H)*‖`.
    pub residual_hstar_h0: f64,
}

impl AdjointReport {
    pub fn all_converged(&self) -> bool {
        self.w_h_h0.converged && self.w_h0_hstar.converged && self.w_h0_h.converged && self.w_hstar_h0.converged
    }
}

/// Adjoint wave operators and the identities `W±(H₀,H*) = W±(H,H₀)*`, `W±(H*,H₀) = W±(H₀,H)*`.
pub fn adjoint_wave_operator(h: &CMat, h0: &CMat, sign: TimeSign, schedule: &Schedule) -> Result<AdjointReport, LimitError> {
    let hs = h.adjoint();
    let w_h_h0 = wave_operator(h, h0, sign, None, schedule)?;
    let w_h0_hstar = wave_operator(h0, &hs, sign, None, schedule)?;
    let w_h0_h = wave_operator(h0, h, sign, None, schedule)?;
    let w_hstar_h0 = wave_operator(&hs, h0, sign, None, schedule)?;
    let residual_h0_hstar = op_norm(&(&w_h0_hstar.value - w_h_h0.value.adjoint()));
    let residual_hstar_h0 = op_norm(&(&w_hstar_h0.value - w_h0_h.value.adjoint()));
    Ok(AdjointReport { sign, w_h_h0, w_h0_hstar, w_h0_h, w_hstar_h0, residual_h0_hstar, residual_hstar_h0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, ONE, ZERO};
    use crate::lindblad::dissipative_hamiltonian;
    use crate::random;

    fn diag(a: f64, b: Complex) -> CMat {
        CMat::from_row_slice(2, 2, &[c(a, 0.0), ZERO, ZERO, b])
    }
    type Complex = num_complex::Complex64;

    /// `H₀ = diag(0, 1)`, `C = √γ|1⟩⟨1|`: `W₊(H,H₀) = diag(1, 0)` reached at rate `γ/2`.
    fn diagonal_toy(gamma: f64) -> (CMat, CMat, CMat) {
        let h0 = diag(0.0, ONE);
        let cc = diag(0.0, c(gamma.sqrt(), 0.0));
        let h = dissipative_hamiltonian(&h0, &[cc.clone()]).unwrap();
        (h0, h, cc)
    }

    #[test]
    fn equal_generators_give_identity() {
        let mut rng = random::rng(1);
        let h = random::hermitian(4, 1.0, &mut rng);
        let s = Schedule::linear(10.0, 10, 1e-10);
        for sign in [TimeSign::Plus, TimeSign::Minus] {
            let w = wave_operator(&h, &h, sign, None, &s).unwrap();
            assert!(w.converged);
            assert_eq!(w.plateau.unwrap().0, 0.0);
            assert!(frobenius(&(w.value - identity(4))) < 1e-10);
        }
    }

    #[test]
    fn sign_convention_on_diagonal_toy() {
        let (h0, h, _) = diagonal_toy(1.0);
        let s = Schedule::linear(60.0, 30, 1e-9);
        let wp = wave_operator(&h, &h0, TimeSign::Plus, None, &s).unwrap();
        assert!(wp.converged);
        assert!(frobenius(&(&wp.value - diag(1.0, ZERO))) < 1e-9);
        assert!(op_norm(&wp.value) <= 1.0 + 1e-8);
        // e^{itH}e^{−itH₀} for t → +∞ grows like e^{t/2} on the absorbed level.
        let wm = wave_operator(&h, &h0, TimeSign::Minus, None, &s);
        assert!(matches!(wm, Ok(ref r) if !r.converged) || wm.is_err());
        assert!(intertwining_residual(&wp.value, &h, &h0) < 1e-9);
    }

    #[test]
    fn intertwining_definition() {
        let mut rng = random::rng(2);
        let a = random::hermitian(3, 1.0, &mut rng);
        let b = random::hermitian(3, 1.0, &mut rng);
        let w = random::operator(3, 1.0, &mut rng);
        assert_eq!(intertwining_residual(&identity(3), &a, &a), 0.0);
        let r = intertwining_residual(&w, &a, &b);
        let direct = op_norm(&(&a * &w - &w * &b)) / (1.0 + op_norm(&a) * op_norm(&w));
        assert!(r > 0.0);
        assert_eq!(r, direct);
    }

    #[test]
    fn integral_representation_on_toys() {
        let (h0, h, _) = diagonal_toy(0.8);
        let w = diag(1.0, ZERO);
        let coarse = integral_representation_residual(&h, &h0, &w, TimeSign::Plus, 60.0, 2e-3).unwrap();
        let fine = integral_representation_residual(&h, &h0, &w, TimeSign::Plus, 60.0, 1e-3).unwrap();
        assert!(fine.decayed);
        assert!(fine.residual <= 1e-6, "{}", fine.residual);
        assert!(fine.residual < coarse.residual);
        // Trapezoid error is second order.
        assert!(coarse.residual / fine.residual > 3.5);

        // Fully absorbing qubit: every state decays, so W₊(H,H₀) = 0 exactly.
        let h0 = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        let cc = diag(0.0, c(1.0, 0.0));
        let h = dissipative_hamiltonian(&h0, &[cc]).unwrap();
        let r = integral_representation_residual(&h, &h0, &CMat::zeros(2, 2), TimeSign::Plus, 80.0, 1e-3).unwrap();
        assert!(r.residual <= 1e-6, "{}", r.residual);

        let z = integral_representation_residual(&h0, &h0, &identity(2), TimeSign::Minus, 5.0, 1e-2).unwrap();
        assert_eq!(z.residual, 0.0);
    }

    #[test]
    fn scattering_toy_routes_agree() {
        let (h0, h, _) = diagonal_toy(1.0);
        let s = Schedule::linear(60.0, 30, 1e-9);
        let r = scattering_operator(&h, &h0, &s).unwrap();
        assert!(r.converged());
        assert!(r.route_residual < 1e-9);
        assert!(frobenius(&(r.value() - diag(1.0, ZERO))) < 1e-9);
        let free = scattering_operator(&h0, &h0, &s).unwrap();
        assert!(frobenius(&(free.value() - identity(2))) < 1e-10);
    }

    #[test]
    fn closed_range_examples() {
        let mut rng = random::rng(3);
        let h0 = random::hermitian(3, 1.0, &mut rng);
        let grid: Vec<f64> = (-10..=10).map(|k| k as f64).collect();
        let r = closed_range_diagnostic(&identity(3), &h0, &grid).unwrap();
        assert!((r.min_singular - 1.0).abs() < 1e-12);
        assert!((r.restricted_bound.unwrap() - 1.0).abs() < 1e-12);
        assert!(r.consistent);
        let z = closed_range_diagnostic(&CMat::zeros(3, 3), &h0, &grid).unwrap();
        assert_eq!(z.range_rank, 0);
        assert!(!z.consistent);
    }

    #[test]
    fn adjoint_identities_on_toy() {
        let (h0, h, _) = diagonal_toy(1.0);
        let s = Schedule::linear(60.0, 30, 1e-9);
        let r = adjoint_wave_operator(&h, &h0, TimeSign::Plus, &s).unwrap();
        assert!(r.w_h_h0.converged && r.w_h0_hstar.converged);
        assert!(r.residual_h0_hstar < 1e-9);
        let free = adjoint_wave_operator(&h0, &h0, TimeSign::Minus, &s).unwrap();
        assert!(free.all_converged());
        assert_eq!(free.residual_h0_hstar, 0.0);
        assert_eq!(free.residual_hstar_h0, 0.0);
    }
}

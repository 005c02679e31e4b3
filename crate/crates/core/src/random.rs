//! Seeded random operators, states and models for property checks.

use crate::linalg::{c, frobenius, matmul, op_norm, trace, CMat, CVec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rng: &mut SeededRng) -> f64 {
    // Box–Muller keeps the sampler independent of distribution crates.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre(d: usize, rng: &mut SeededRng) -> CMat {
    CMat::from_fn(d, d, |_, _| c(gaussian(rng), gaussian(rng)) * std::f64::consts::FRAC_1_SQRT_2)
}

/// Random Hermitian matrix scaled to operator norm `scale`.
pub fn hermitian(d: usize, scale: f64, rng: &mut SeededRng) -> CMat {
    let g = ginibre(d, rng);
    let h = (&g + g.adjoint()).map(|z| z * 0.5);
    let n = op_norm(&h);
    h.map(|z| z * (scale / n))
}

/// Random operator scaled to operator norm `scale`.
pub fn operator(d: usize, scale: f64, rng: &mut SeededRng) -> CMat {
    let g = ginibre(d, rng);
    let n = op_norm(&g);
    g.map(|z| z * (scale / n))
}

pub fn unit_vector(d: usize, rng: &mut SeededRng) -> CVec {
    let v = CVec::from_fn(d, |_, _| c(gaussian(rng), gaussian(rng)));
    let n = v.norm();
    v.map(|z| z / n)
}

/// Random density matrix `GG*/tr(GG*)` with Ginibre `G` of the given rank.
pub fn density_matrix(d: usize, rank: usize, rng: &mut SeededRng) -> CMat {
    let g = CMat::from_fn(d, rank.max(1), |_, _| c(gaussian(rng), gaussian(rng)));
    let rho = matmul(&g, &g.adjoint());
    let t = trace(&rho).re;
    rho.map(|z| z / t)
}

/// Random Hermitian matrix of unit trace norm (not necessarily positive).
pub fn hermitian_trace_class(d: usize, rng: &mut SeededRng) -> CMat {
    let h = hermitian(d, 1.0, rng);
    let n = crate::linalg::trace_norm(&h);
    h.map(|z| z / n)
}

/// Random operator of unit trace norm.
pub fn trace_class(d: usize, rng: &mut SeededRng) -> CMat {
    let g = ginibre(d, rng);
    let n = crate::linalg::trace_norm(&g);
    g.map(|z| z / n)
}

/// Random `(H₀, [C_j])` pair: `‖H₀‖ = h_scale`, each `‖C_j‖ = c_scale`.
pub fn model(d: usize, couplings: usize, h_scale: f64, c_scale: f64, rng: &mut SeededRng) -> (CMat, Vec<CMat>) {
    let h0 = hermitian(d, h_scale, rng);
    let cs = (0..couplings).map(|_| operator(d, c_scale, rng)).collect();
    (h0, cs)
}

pub fn is_unit_trace(rho: &CMat) -> bool {
    (trace(rho).re - 1.0).abs() < 1e-10 && frobenius(&(rho - rho.adjoint())) < 1e-10
}

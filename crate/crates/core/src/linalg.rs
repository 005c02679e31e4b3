//! Dense complex linear algebra on the truncated Hilbert space.
//!
//! Operators are `d×d` complex matrices. Superoperators are `d²×d²` matrices
//! acting on stacked operators, with the convention
//! `stack(A X B) = (A ⊗ Bᵀ) stack(X)` where `⊗` is the standard Kronecker
//! product. Under that convention the stacked index of `X[(i, k)]` is `i·d + k`.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Complex literal helper.
#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("propagator norm {norm:.3e} exceeds growth cap {cap:.3e}")]
    Overflow { norm: f64, cap: f64 },
    #[error("eigenvalue {re:.6e}{im:+.6e}i lies within tolerance of the selection boundary")]
    Clustering { re: f64, im: f64 },
    #[error("Schur decomposition did not converge")]
    NoConvergence,
}

/// Default cap on `‖e^{-itA}‖` before `op_exp` reports runaway growth.
pub const GROWTH_CAP: f64 = 1e12;

/// Below this many scalar multiply-adds, nalgebra's generic product is used directly.
const FAST_MATMUL_MIN: usize = 48 * 48 * 48;

/// Complex product routed through four real GEMMs once the problem is large enough.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "matmul inner dimensions");
    if a.nrows() * a.ncols() * b.ncols() < FAST_MATMUL_MIN {
        return a * b;
    }
    let ar = a.map(|z| z.re);
    let ai = a.map(|z| z.im);
    let br = b.map(|z| z.re);
    let bi = b.map(|z| z.im);
    let mut re = &ar * &br;
    re.gemm(-1.0, &ai, &bi, 1.0);
    let mut im = &ar * &bi;
    im.gemm(1.0, &ai, &br, 1.0);
    DMatrix::from_fn(a.nrows(), b.ncols(), |i, j| c(re[(i, j)], im[(i, j)]))
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn zeros(d: usize) -> CMat {
    CMat::zeros(d, d)
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint()
}

pub fn is_square(a: &CMat) -> bool {
    a.nrows() == a.ncols()
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Singular values in nonincreasing order.
pub fn singular_values(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    s
}

/// Spectral norm (largest singular value).
pub fn op_norm(a: &CMat) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

pub fn trace_norm(a: &CMat) -> f64 {
    singular_values(a).iter().sum()
}

pub fn min_singular(a: &CMat) -> f64 {
    singular_values(a).last().copied().unwrap_or(0.0)
}

pub fn trace(a: &CMat) -> Complex64 {
    a.diagonal().iter().sum()
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).map(|z| z * 0.5)
}

pub fn hermiticity_defect(a: &CMat) -> f64 {
    frobenius(&(a - a.adjoint()))
}

/// Eigen-decomposition of the Hermitian part of `a`: ascending eigenvalues and
/// the unitary whose columns are the matching eigenvectors.
///
/// The Schur form of a Hermitian matrix is diagonal, so its Schur vectors are
/// eigenvectors. `symmetric_eigen` is only the fallback: its eigenvectors lose
/// accuracy on block-diagonal inputs with close eigenvalues. The shift keeps
/// the diagonal away from zero; nalgebra's deflation test never fires on an
/// exactly zero block.
pub fn hermitian_eig(a: &CMat) -> (Vec<f64>, CMat) {
    let hp = hermitian_part(a);
    let shift = frobenius(&hp) + 1.0;
    let shifted = &hp + CMat::identity(hp.nrows(), hp.ncols()) * c(shift, 0.0);
    let (raw_vals, raw_vecs): (Vec<f64>, CMat) = match Schur::try_new(shifted, 1e-15, 100_000) {
        Some(s) => {
            let (q, t) = s.unpack();
            ((0..t.nrows()).map(|k| t[(k, k)].re - shift).collect(), q)
        }
        None => {
            let eig = hp.symmetric_eigen();
            (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
        }
    };
    let mut order: Vec<usize> = (0..raw_vals.len()).collect();
    order.sort_by(|&i, &j| raw_vals[i].total_cmp(&raw_vals[j]));
    let vals = order.iter().map(|&i| raw_vals[i]).collect();
    let vecs = CMat::from_fn(a.nrows(), order.len(), |r, k| raw_vecs[(r, order[k])]);
    (vals, vecs)
}

/// Ascending eigenvalues of the Hermitian part of `a`, without eigenvectors.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    let mut vals: Vec<f64> = hermitian_part(a).symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

pub fn min_eig_hermitian(a: &CMat) -> f64 {
    hermitian_eigenvalues(a).first().copied().unwrap_or(0.0)
}

pub fn max_eig_hermitian(a: &CMat) -> f64 {
    hermitian_eigenvalues(a).last().copied().unwrap_or(0.0)
}

/// `‖AA* − A*A‖ ≤ 1e−12·‖A‖²` in Frobenius norm.
pub fn is_normal(a: &CMat) -> bool {
    let n = frobenius(a);
    if n == 0.0 {
        return true;
    }
    let ah = a.adjoint();
    frobenius(&(matmul(a, &ah) - matmul(&ah, a))) <= 1e-12 * n * n
}

/// Apply a scalar function through the eigendecomposition of a Hermitian matrix.
pub fn hermitian_function(a: &CMat, f: impl Fn(f64) -> Complex64) -> CMat {
    let (vals, q) = hermitian_eig(a);
    let mut qf = q.clone();
    for (k, &v) in vals.iter().enumerate() {
        let fv = f(v);
        for r in 0..qf.nrows() {
            qf[(r, k)] *= fv;
        }
    }
    matmul(&qf, &q.adjoint())
}

/// `e^{−itA}` with a growth cap.
pub fn op_exp(a: &CMat, t: f64) -> Result<CMat, LinalgError> {
    op_exp_capped(a, t, GROWTH_CAP)
}

pub fn op_exp_capped(a: &CMat, t: f64, cap: f64) -> Result<CMat, LinalgError> {
    if !is_square(a) {
        return Err(LinalgError::Dimension(format!("{}x{} is not square", a.nrows(), a.ncols())));
    }
    let d = a.nrows();
    if t == 0.0 || d == 0 {
        return Ok(identity(d));
    }
    let out = if is_normal(a) && a.nrows() <= 256 { spectral_exp_normal(a, t) } else { expm(&a.map(|z| z * c(0.0, -t))) };
    let growth = if d <= 256 { op_norm(&out) } else { frobenius(&out) };
    if !growth.is_finite() || growth > cap {
        return Err(LinalgError::Overflow { norm: growth, cap });
    }
    Ok(out)
}

fn spectral_exp_normal(a: &CMat, t: f64) -> CMat {
    if hermiticity_defect(a) <= 1e-14 * (1.0 + frobenius(a)) {
        return hermitian_function(a, |v| (c(0.0, -t * v)).exp());
    }
    // Normal but not Hermitian: the complex Schur form is diagonal up to roundoff.
    match Schur::try_new(a.clone(), 1e-15, 10_000) {
        Some(s) => {
            let (q, tmat) = s.unpack();
            let mut qf = q.clone();
            for k in 0..a.nrows() {
                let f = (c(0.0, -t) * tmat[(k, k)]).exp();
                for r in 0..a.nrows() {
                    qf[(r, k)] *= f;
                }
            }
            matmul(&qf, &q.adjoint())
        }
        None => expm(&a.map(|z| z * c(0.0, -t))),
    }
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn one_norm(a: &CMat) -> f64 {
    (0..a.ncols()).map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// `e^X` by scaling and squaring around the degree-13 Padé approximant.
pub fn expm(x: &CMat) -> CMat {
    let d = x.nrows();
    let norm = one_norm(x);
    const THETA13: f64 = 5.371920351148152;
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = x.map(|z| z * 2f64.powi(-s));
    let id = identity(d);
    let a2 = matmul(&a, &a);
    let a4 = matmul(&a2, &a2);
    let a6 = matmul(&a4, &a2);
    let b = &PADE13;
    let sc = |m: &CMat, f: f64| m.map(|z| z * f);
    let u_inner = &sc(&a6, b[13]) + &sc(&a4, b[11]) + &sc(&a2, b[9]);
    let u_tail = &sc(&a6, b[7]) + &sc(&a4, b[5]) + &sc(&a2, b[3]) + &sc(&id, b[1]);
    let u = matmul(&a, &(matmul(&a6, &u_inner) + u_tail));
    let v_inner = &sc(&a6, b[12]) + &sc(&a4, b[10]) + &sc(&a2, b[8]);
    let v = matmul(&a6, &v_inner) + sc(&a6, b[6]) + sc(&a4, b[4]) + sc(&a2, b[2]) + sc(&id, b[0]);
    let numer = &v + &u;
    let denom = &v - &u;
    let mut r = denom.lu().solve(&numer).expect("Padé denominator is invertible for scaled input");
    for _ in 0..s {
        r = matmul(&r, &r);
    }
    r
}

/// Kronecker product `a ⊗ b` with index `(i·nb + k, j·mb + l)`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (na, ma) = a.shape();
    let (nb, mb) = b.shape();
    CMat::from_fn(na * nb, ma * mb, |r, s| a[(r / nb, s / mb)] * b[(r % nb, s % mb)])
}

/// Superoperator of `X ↦ L X R`.
pub fn left_right_superop(l: &CMat, r: &CMat) -> Result<CMat, LinalgError> {
    if !is_square(l) || !is_square(r) || l.nrows() != r.nrows() {
        return Err(LinalgError::Dimension(format!("left {}x{} vs right {}x{}", l.nrows(), l.ncols(), r.nrows(), r.ncols())));
    }
    Ok(kron(l, &r.transpose()))
}

pub fn stack(x: &CMat) -> CVec {
    let d = x.nrows();
    CVec::from_fn(d * x.ncols(), |p, _| x[(p / x.ncols(), p % x.ncols())])
}

pub fn unstack(v: &CVec, d: usize) -> CMat {
    CMat::from_fn(d, d, |i, k| v[i * d + k])
}

/// Hilbert dimension of a superoperator.
pub fn super_dim(s: &CMat) -> usize {
    let d = (s.nrows() as f64).sqrt().round() as usize;
    assert_eq!(d * d, s.nrows(), "superoperator side must be a square");
    d
}

pub fn apply_super(s: &CMat, x: &CMat) -> CMat {
    unstack(&(s * stack(x)), x.nrows())
}

/// Choi matrix `Σ_{jk} |j⟩⟨k| ⊗ S(|j⟩⟨k|)`.
pub fn choi(s: &CMat) -> CMat {
    let d = super_dim(s);
    CMat::from_fn(d * d, d * d, |r, q| {
        let (j, a) = (r / d, r % d);
        let (k, b) = (q / d, q % d);
        s[(a * d + b, j * d + k)]
    })
}

/// `M·(U ⊗ V)` without forming the Kronecker product.
pub fn kron_right_mul(m: &CMat, u: &CMat, v: &CMat) -> CMat {
    let d = u.nrows();
    let ut = u.transpose();
    let mut out = CMat::zeros(m.nrows(), m.ncols());
    for row in 0..m.nrows() {
        let r = CMat::from_fn(d, d, |i, k| m[(row, i * d + k)]);
        let y = &ut * r * v;
        for j in 0..d {
            for l in 0..d {
                out[(row, j * d + l)] = y[(j, l)];
            }
        }
    }
    out
}

/// `(U ⊗ V)·M` without forming the Kronecker product.
pub fn kron_left_mul(u: &CMat, v: &CMat, m: &CMat) -> CMat {
    let d = u.nrows();
    let vt = v.transpose();
    let mut out = CMat::zeros(m.nrows(), m.ncols());
    for col in 0..m.ncols() {
        let r = CMat::from_fn(d, d, |j, l| m[(j * d + l, col)]);
        let y = u * r * &vt;
        for i in 0..d {
            for k in 0..d {
                out[(i * d + k, col)] = y[(i, k)];
            }
        }
    }
    out
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    matmul(a, b) - matmul(b, a)
}

/// Orthonormal list of vectors spanning a subspace of `C^dim`, stored as columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceBasis {
    pub dim: usize,
    #[serde(skip)]
    pub vectors: CMat,
}

impl SubspaceBasis {
    pub fn empty(dim: usize) -> Self {
        Self { dim, vectors: CMat::zeros(dim, 0) }
    }

    pub fn full(dim: usize) -> Self {
        Self { dim, vectors: identity(dim) }
    }

    /// Orthonormal basis of the column space of `m`; singular values below
    /// `rel_tol·σ_max` count as zero.
    pub fn column_space(m: &CMat, rel_tol: f64) -> Self {
        let dim = m.nrows();
        if m.ncols() == 0 || frobenius(m) == 0.0 {
            return Self::empty(dim);
        }
        let svd = m.clone().svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] > rel_tol * smax).collect();
        let vectors = CMat::from_fn(dim, keep.len(), |r, k| u[(r, keep[k])]);
        Self { dim, vectors }
    }

    pub fn rank(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn projector(&self) -> CMat {
        matmul(&self.vectors, &self.vectors.adjoint())
    }

    pub fn gram_defect(&self) -> f64 {
        frobenius(&(self.vectors.adjoint() * &self.vectors - identity(self.rank())))
    }

    /// Orthonormal basis of the orthogonal complement.
    pub fn complement(&self) -> Self {
        if self.rank() == 0 {
            return Self::full(self.dim);
        }
        let p = identity(self.dim) - self.projector();
        Self::column_space(&p, 1e-8)
    }

    /// Orthonormal basis of the span of both subspaces.
    pub fn sum(&self, other: &Self) -> Self {
        let mut m = CMat::zeros(self.dim, self.rank() + other.rank());
        m.columns_mut(0, self.rank()).copy_from(&self.vectors);
        m.columns_mut(self.rank(), other.rank()).copy_from(&other.vectors);
        Self::column_space(&m, 1e-8)
    }

    /// Intersection: directions of `self` whose principal angle to `other` is at most `angle_tol`.
    pub fn intersect(&self, other: &Self, angle_tol: f64) -> Self {
        if self.rank() == 0 || other.rank() == 0 {
            return Self::empty(self.dim);
        }
        let m = self.vectors.adjoint() * &other.vectors;
        let svd = m.svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let cos_min = angle_tol.cos();
        let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] >= cos_min).collect();
        let coeffs = CMat::from_fn(self.rank(), keep.len(), |r, k| u[(r, keep[k])]);
        let v = &self.vectors * coeffs;
        Self::column_space(&v, 1e-8)
    }
}

/// Principal angles in nonincreasing order; one angle per direction of the smaller subspace.
pub fn principal_angles(u: &SubspaceBasis, v: &SubspaceBasis) -> Vec<f64> {
    assert_eq!(u.dim, v.dim, "principal angles need a common ambient space");
    if u.rank() == 0 || v.rank() == 0 {
        return Vec::new();
    }
    let m = u.vectors.adjoint() * &v.vectors;
    let mut s = singular_values(&m);
    s.truncate(u.rank().min(v.rank()));
    let mut angles: Vec<f64> = s.iter().map(|&x| x.clamp(0.0, 1.0).acos()).collect();
    angles.sort_by(|a, b| b.partial_cmp(a).unwrap());
    angles
}

/// Largest principal angle, with `π/2` whenever the ranks differ.
pub fn subspace_distance(u: &SubspaceBasis, v: &SubspaceBasis) -> f64 {
    if u.rank() != v.rank() {
        return std::f64::consts::FRAC_PI_2;
    }
    principal_angles(u, v).first().copied().unwrap_or(0.0)
}

/// Swap the adjacent diagonal entries `k, k+1` of an upper-triangular `t`,
/// updating the Schur vectors `q` so that `A = Q T Q*` is preserved.
fn swap_schur(t: &mut CMat, q: &mut CMat, k: usize) {
    let a = t[(k, k)];
    let b = t[(k, k + 1)];
    let cc = t[(k + 1, k + 1)];
    // Eigenvector of the 2×2 block for eigenvalue cc.
    let v0 = b;
    let v1 = cc - a;
    let nv = (v0.norm_sqr() + v1.norm_sqr()).sqrt();
    if nv == 0.0 {
        return;
    }
    let (g0, g1) = (v0 / nv, v1 / nv);
    // Unitary G = [[g0, -conj(g1)], [g1, conj(g0)]].
    let n = t.nrows();
    for j in 0..n {
        let x = t[(k, j)];
        let y = t[(k + 1, j)];
        t[(k, j)] = g0.conj() * x + g1.conj() * y;
        t[(k + 1, j)] = -g1 * x + g0 * y;
    }
    for i in 0..n {
        let x = t[(i, k)];
        let y = t[(i, k + 1)];
        t[(i, k)] = x * g0 + y * g1;
        t[(i, k + 1)] = -x * g1.conj() + y * g0.conj();
        let x = q[(i, k)];
        let y = q[(i, k + 1)];
        q[(i, k)] = x * g0 + y * g1;
        q[(i, k + 1)] = -x * g1.conj() + y * g0.conj();
    }
    t[(k + 1, k)] = ZERO;
}

/// Complex Schur form `A = Q T Q*` with `T` upper triangular.
pub fn schur(a: &CMat) -> Result<(CMat, CMat), LinalgError> {
    let s = Schur::try_new(a.clone(), 1e-15, 100_000).ok_or(LinalgError::NoConvergence)?;
    let (q, mut t) = s.unpack();
    for j in 0..t.ncols() {
        for i in (j + 1)..t.nrows() {
            t[(i, j)] = ZERO;
        }
    }
    Ok((q, t))
}

pub fn eigenvalues(a: &CMat) -> Result<Vec<Complex64>, LinalgError> {
    let (_, t) = schur(a)?;
    Ok(t.diagonal().iter().copied().collect())
}

/// Orthonormal basis of the invariant subspace belonging to the eigenvalues
/// picked by `select`, by reordering the complex Schur form.
///
/// Returns `Clustering` if moving an eigenvalue by `tol/2` in any of the four
/// axis directions changes the selection.
pub fn invariant_subspace(a: &CMat, select: impl Fn(Complex64) -> bool, tol: f64) -> Result<SubspaceBasis, LinalgError> {
    let d = a.nrows();
    let (mut q, mut t) = schur(a)?;
    let delta = 0.5 * tol;
    for k in 0..d {
        let lam = t[(k, k)];
        let s = select(lam);
        for step in [c(delta, 0.0), c(-delta, 0.0), c(0.0, delta), c(0.0, -delta)] {
            if select(lam + step) != s {
                return Err(LinalgError::Clustering { re: lam.re, im: lam.im });
            }
        }
    }
    // Bubble selected eigenvalues to the leading block, preserving relative order.
    let mut head = 0;
    for k in 0..d {
        if select(t[(k, k)]) {
            let mut j = k;
            while j > head {
                swap_schur(&mut t, &mut q, j - 1);
                j -= 1;
            }
            head += 1;
        }
    }
    let vectors = q.columns(0, head).into_owned();
    Ok(SubspaceBasis { dim: d, vectors })
}

/// `‖(I−P) A P‖` for the orthogonal projector onto `basis`.
pub fn invariance_residual(a: &CMat, basis: &SubspaceBasis) -> f64 {
    if basis.rank() == 0 {
        return 0.0;
    }
    let ap = a * &basis.vectors;
    let pap = &basis.vectors * (basis.vectors.adjoint() * &ap);
    op_norm(&(ap - pap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn random(d: usize, rng: &mut ChaCha8Rng) -> CMat {
        CMat::from_fn(d, d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn unit(d: usize, k: usize) -> CVec {
        CVec::from_fn(d, |i, _| if i == k { ONE } else { ZERO })
    }

    #[test]
    fn trace_norm_examples() {
        assert!((trace_norm(&identity(4)) - 4.0).abs() < 1e-12);
        let u = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 2.0)]);
        let v = CVec::from_vec(vec![c(3.0, 0.0), c(0.0, -4.0)]);
        let rank1 = &u * v.adjoint();
        assert!((trace_norm(&rank1) - u.norm() * v.norm()).abs() < 1e-12);
        let diag = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(-2.0, 0.0), c(0.0, 3.0)]));
        assert!((trace_norm(&diag) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn hermitian_eig_on_decoupled_blocks() {
        // Two copies of a tridiagonal chain shifted by 0.5: close eigenvalues across blocks.
        let n = 12;
        let mut a = CMat::zeros(2 * n, 2 * n);
        for k in 0..n {
            for l in 0..2 {
                let i = 2 * k + l;
                a[(i, i)] = c(2.0 + 0.5 * l as f64 - if k == 5 { 3.0 } else { 0.0 }, 0.0);
                if k + 1 < n {
                    a[(i, i + 2)] = c(-1.0, 0.0);
                    a[(i + 2, i)] = c(-1.0, 0.0);
                }
            }
        }
        let (vals, vecs) = hermitian_eig(&a);
        for (k, &v) in vals.iter().enumerate() {
            let x = vecs.column(k);
            assert!((&a * x - x * c(v, 0.0)).norm() < 1e-12);
        }
        assert!(frobenius(&(vecs.adjoint() * &vecs - identity(2 * n))) < 1e-12);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn hermitian_eig_with_zero_blocks() {
        let (vals, vecs) = hermitian_eig(&zeros(6));
        assert!(vals.iter().all(|v| v.abs() < 1e-14));
        assert!(frobenius(&(vecs.adjoint() * &vecs - identity(6))) < 1e-12);
        let mut a = zeros(6);
        a[(0, 0)] = c(1.0, 0.0);
        a[(0, 1)] = c(0.0, 0.5);
        a[(1, 0)] = c(0.0, -0.5);
        let (vals, vecs) = hermitian_eig(&a);
        for (k, &v) in vals.iter().enumerate() {
            let x = vecs.column(k);
            assert!((&a * x - x * c(v, 0.0)).norm() < 1e-13);
        }
        assert!((vals[5] - (0.5 + 0.5f64.sqrt())).abs() < 1e-13);
        let fast = hermitian_eigenvalues(&a);
        assert!(fast.iter().zip(&vals).all(|(x, y)| (x - y).abs() < 1e-13));
    }

    #[test]
    fn exp_examples() {
        let z = zeros(3);
        assert!(frobenius(&(op_exp(&z, 1.7).unwrap() - identity(3))) < 1e-15);
        let d = CMat::from_diagonal(&CVec::from_vec(vec![c(0.3, 0.0), c(-1.1, 0.0)]));
        let e = op_exp(&d, 2.0).unwrap();
        assert!((e[(0, 0)] - (c(0.0, -0.6)).exp()).norm() < 1e-14);
        assert!((e[(1, 1)] - (c(0.0, 2.2)).exp()).norm() < 1e-14);
        let n = CMat::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        let e = op_exp(&n, 1.0).unwrap();
        let expect = identity(2) - n.map(|x| x * I);
        assert!(frobenius(&(e - expect)) < 1e-14);
    }

    #[test]
    fn exp_agrees_with_taylor_oracle_for_nonnormal() {
        // Independent oracle: plain Taylor series of e^{-itA} with many terms at small norm.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random(5, &mut rng).map(|z| z * 0.3);
        let t = 0.9;
        let x = a.map(|z| z * c(0.0, -t));
        let mut term = identity(5);
        let mut sum = identity(5);
        for k in 1..60 {
            term = (&term * &x).map(|z| z / k as f64);
            sum += &term;
        }
        assert!(frobenius(&(op_exp(&a, t).unwrap() - sum)) < 1e-13);
    }

    #[test]
    fn exp_overflow_signal() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![c(0.0, 5.0), c(0.0, 0.0)]));
        // e^{-itA} = diag(e^{5t}, 1) grows for t > 0.
        assert!(matches!(op_exp(&a, 10.0), Err(LinalgError::Overflow { .. })));
        assert!(op_exp(&a, -10.0).is_ok());
    }

    #[test]
    fn fast_matmul_matches_generic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(70, &mut rng);
        let b = random(70, &mut rng);
        assert!(frobenius(&(matmul(&a, &b) - &a * &b)) < 1e-10);
    }

    #[test]
    fn superop_identity_and_matrix_units() {
        let s = left_right_superop(&identity(3), &identity(3)).unwrap();
        assert!(frobenius(&(s - identity(9))) < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random(2, &mut rng);
        let s = left_right_superop(&a, &identity(2)).unwrap();
        for j in 0..2 {
            for k in 0..2 {
                let e = unit(2, j) * unit(2, k).adjoint();
                let direct = &a * &e;
                assert!(frobenius(&(apply_super(&s, &e) - direct)) < 1e-12);
            }
        }
        let b = CMat::from_diagonal(&CVec::from_vec(vec![c(2.0, 0.0), c(0.0, -1.0)]));
        let s = left_right_superop(&identity(2), &b).unwrap();
        let x = random(2, &mut rng);
        let y = apply_super(&s, &x);
        for i in 0..2 {
            for j in 0..2 {
                assert!((y[(i, j)] - x[(i, j)] * b[(j, j)]).norm() < 1e-14);
            }
        }
        assert!(left_right_superop(&identity(2), &identity(3)).is_err());
    }

    #[test]
    fn kron_structured_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (u, v) = (random(3, &mut rng), random(3, &mut rng));
        let m = random(9, &mut rng);
        let k = kron(&u, &v);
        assert!(frobenius(&(kron_right_mul(&m, &u, &v) - &m * &k)) < 1e-12);
        assert!(frobenius(&(kron_left_mul(&u, &v, &m) - &k * &m)) < 1e-12);
    }

    #[test]
    fn choi_examples() {
        let id = identity(4);
        let ch = choi(&id);
        let omega = CVec::from_fn(4, |p, _| if p == 0 || p == 3 { c(0.5f64.sqrt(), 0.0) } else { ZERO });
        let expect = (&omega * omega.adjoint()).map(|z| z * 2.0);
        assert!(frobenius(&(ch - expect)) < 1e-14);
        // Transpose map: enumerate images of the matrix units, then diagonalize.
        let mut tr = zeros(4);
        for j in 0..2 {
            for k in 0..2 {
                let e = unit(2, j) * unit(2, k).adjoint();
                let img = stack(&e.transpose());
                tr.set_column(j * 2 + k, &img);
            }
        }
        assert!((min_eig_hermitian(&choi(&tr)) + 1.0).abs() < 1e-12);
        let h = {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let r = random(2, &mut rng);
            &r + r.adjoint()
        };
        let u = op_exp(&h, 0.7).unwrap();
        let s = left_right_superop(&u, &u.adjoint()).unwrap();
        let (vals, _) = hermitian_eig(&choi(&s));
        assert!(vals[0] > -1e-12);
        assert_eq!(vals.iter().filter(|&&v| v > 1e-9).count(), 1);
    }

    /// Roots of the characteristic polynomial via Faddeev–LeVerrier and a companion matrix.
    fn charpoly_roots(a: &CMat) -> Vec<f64> {
        let n = a.nrows();
        let mut coeffs = vec![ONE];
        let mut m = zeros(n);
        for k in 1..=n {
            m = a * &m + identity(n).map(|z| z * coeffs[k - 1]);
            let ck = -trace(&(a * &m)) / k as f64;
            coeffs.push(ck);
        }
        let comp = CMat::from_fn(n, n, |i, j| {
            if i == 0 {
                -coeffs[j + 1]
            } else if i == j + 1 {
                ONE
            } else {
                ZERO
            }
        });
        let mut r: Vec<f64> = eigenvalues(&comp).unwrap().iter().map(|z| z.re).collect();
        r.sort_by(|x, y| x.partial_cmp(y).unwrap());
        r
    }

    #[test]
    fn min_eig_examples() {
        assert!((min_eig_hermitian(&identity(3)) - 1.0).abs() < 1e-14);
        let d = CMat::from_diagonal(&CVec::from_vec(vec![c(3.0, 0.0), c(-0.5, 0.0)]));
        assert!((min_eig_hermitian(&d) + 0.5).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let r = random(4, &mut rng);
        let h = &r + r.adjoint();
        let roots = charpoly_roots(&h);
        assert!((min_eig_hermitian(&h) - roots[0]).abs() < 1e-9);
    }

    #[test]
    fn min_singular_examples() {
        assert!((min_singular(&identity(3)) - 1.0).abs() < 1e-14);
        let d = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
        assert!(min_singular(&d).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random(3, &mut rng);
        let oracle = min_eig_hermitian(&(a.adjoint() * &a)).sqrt();
        assert!((min_singular(&a) - oracle).abs() < 1e-10);
    }

    #[test]
    fn invariant_subspace_examples() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(2.0, -1.0)]));
        let tol = 1e-9;
        let b = invariant_subspace(&a, |z| z.im >= -tol, tol).unwrap();
        assert_eq!(b.rank(), 1);
        assert!(subspace_distance(&b, &SubspaceBasis { dim: 2, vectors: CMat::from_column_slice(2, 1, &[ONE, ZERO]) }) < 1e-12);
        // Jordan block at −i plus a real eigenvalue: decaying part is the 2-dim block.
        let j = CMat::from_row_slice(3, 3, &[c(0.0, -1.0), ONE, c(0.3, 0.0), ZERO, c(0.0, -1.0), c(0.2, 0.0), ZERO, ZERO, c(0.5, 0.0)]);
        let dec = invariant_subspace(&j, |z| z.im < -tol, tol).unwrap();
        assert_eq!(dec.rank(), 2);
        assert!(invariance_residual(&j, &dec) < 1e-12);
        assert!(dec.gram_defect() < 1e-10);
        let all = invariant_subspace(&j, |_| true, tol).unwrap();
        assert_eq!(all.rank(), 3);
    }

    #[test]
    fn invariant_subspace_reorders_interleaved_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = random(8, &mut rng);
        let h = &r + r.adjoint();
        let g = random(8, &mut rng);
        let a = h - (g.adjoint() * &g).map(|z| z * c(0.0, 0.25));
        let ev = eigenvalues(&a).unwrap();
        let mut ims: Vec<f64> = ev.iter().map(|z| z.im).collect();
        ims.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let cut = 0.5 * (ims[3] + ims[4]);
        let b = invariant_subspace(&a, |z| z.im < cut, 1e-12).unwrap();
        assert_eq!(b.rank(), 4);
        assert!(invariance_residual(&a, &b) < 1e-10 * op_norm(&a));
        // The restriction carries exactly the selected eigenvalues.
        let restricted = b.vectors.adjoint() * &a * &b.vectors;
        let mut got: Vec<f64> = eigenvalues(&restricted).unwrap().iter().map(|z| z.im).collect();
        got.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for k in 0..4 {
            assert!((got[k] - ims[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn invariant_subspace_reports_boundary_eigenvalue() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, -1.2e-9), c(0.0, -1.0)]));
        let r = invariant_subspace(&a, |z| z.im < -1e-9, 1e-9);
        assert!(matches!(r, Err(LinalgError::Clustering { .. })));
    }

    #[test]
    fn principal_angle_examples() {
        let e1 = SubspaceBasis { dim: 2, vectors: CMat::from_column_slice(2, 1, &[ONE, ZERO]) };
        let e2 = SubspaceBasis { dim: 2, vectors: CMat::from_column_slice(2, 1, &[ZERO, ONE]) };
        let s = 0.5f64.sqrt();
        let d = SubspaceBasis { dim: 2, vectors: CMat::from_column_slice(2, 1, &[c(s, 0.0), c(s, 0.0)]) };
        assert!(principal_angles(&e1, &e1)[0].abs() < 1e-7);
        assert!((principal_angles(&e1, &e2)[0] - FRAC_PI_2).abs() < 1e-12);
        assert!((principal_angles(&e1, &d)[0] - FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn subspace_set_operations() {
        let full = SubspaceBasis::full(3);
        let e1 = SubspaceBasis { dim: 3, vectors: CMat::from_column_slice(3, 1, &[ONE, ZERO, ZERO]) };
        let comp = e1.complement();
        assert_eq!(comp.rank(), 2);
        assert_eq!(e1.sum(&comp).rank(), 3);
        assert_eq!(full.intersect(&e1, 1e-6).rank(), 1);
        assert_eq!(comp.intersect(&e1, 1e-6).rank(), 0);
    }
}

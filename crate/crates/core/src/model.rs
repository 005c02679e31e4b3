//! Lattice models: discrete Laplacians, multiplication operators, spin spaces
//! and the coupling families `g(X)·X`, `g(X)·S` and `g(X)(αX+βP)f(P) + h.c.`.
//!
//! Hilbert space ordering is `site ⊗ internal`, i.e. basis index `k·d_int + a`.

use crate::linalg::{c, hermitian_function, hermiticity_defect, identity, kron, min_eig_hermitian, op_norm, CMat, ONE, ZERO};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid lattice: {0}")]
    Lattice(String),
    #[error("field has {got} values but the lattice has {expected} sites")]
    FieldLength { got: usize, expected: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("internal Hamiltonian is not positive semidefinite (min eigenvalue {0:.3e})")]
    InternalNotPsd(f64),
    #[error("operator `{0}` is not Hermitian")]
    NotHermitian(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Dirichlet,
    Periodic,
}

/// `−Δ` on `n` sites with spacing `h`: `(2u_k − u_{k−1} − u_{k+1})/h²`.
pub fn discrete_laplacian(n: usize, h: f64, boundary: Boundary) -> Result<CMat, ModelError> {
    if n < 2 || !(h > 0.0) {
        return Err(ModelError::Lattice(format!("need n >= 2 and h > 0, got n={n}, h={h}")));
    }
    let s = 1.0 / (h * h);
    let mut m = CMat::zeros(n, n);
    for k in 0..n {
        m[(k, k)] += c(2.0 * s, 0.0);
        if k + 1 < n {
            m[(k, k + 1)] -= c(s, 0.0);
            m[(k + 1, k)] -= c(s, 0.0);
        }
    }
    if boundary == Boundary::Periodic {
        m[(0, n - 1)] -= c(s, 0.0);
        m[(n - 1, 0)] -= c(s, 0.0);
    }
    Ok(m)
}

/// Site coordinates centered at the lattice midpoint.
pub fn site_coordinates(n: usize, h: f64) -> Vec<f64> {
    let mid = (n as f64 - 1.0) / 2.0;
    (0..n).map(|k| (k as f64 - mid) * h).collect()
}

/// Named field shapes evaluated at site coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldPreset {
    Gaussian { width: f64, amplitude: f64 },
    Box { radius: f64, amplitude: f64 },
    CoulombCut { radius: f64 },
    Constant { value: f64 },
    Values { values: Vec<f64> },
}

impl FieldPreset {
    pub fn sample(&self, model: &LatticeModel) -> Result<ScalarField, ModelError> {
        let xs = model.coordinates();
        let values: Vec<Complex64> = match self {
            FieldPreset::Gaussian { width, amplitude } => {
                xs.iter().map(|x| c(amplitude * (-x * x / (2.0 * width * width)).exp(), 0.0)).collect()
            }
            FieldPreset::Box { radius, amplitude } => {
                xs.iter().map(|x| c(if x.abs() <= *radius { *amplitude } else { 0.0 }, 0.0)).collect()
            }
            FieldPreset::CoulombCut { radius } => xs.iter().map(|x| c(1.0 / x.abs().max(*radius), 0.0)).collect(),
            FieldPreset::Constant { value } => xs.iter().map(|_| c(*value, 0.0)).collect(),
            FieldPreset::Values { values } => values.iter().map(|&v| c(v, 0.0)).collect(),
        };
        ScalarField::new(values, model)
    }
}

/// One value per lattice site.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<Complex64>,
}

impl ScalarField {
    pub fn new(values: Vec<Complex64>, model: &LatticeModel) -> Result<Self, ModelError> {
        if values.len() != model.sites {
            return Err(ModelError::FieldLength { got: values.len(), expected: model.sites });
        }
        Ok(Self { values })
    }

    pub fn from_fn(model: &LatticeModel, f: impl Fn(f64) -> f64) -> Self {
        Self { values: model.coordinates().iter().map(|&x| c(f(x), 0.0)).collect() }
    }

    pub fn zero(model: &LatticeModel) -> Self {
        Self { values: vec![ZERO; model.sites] }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Pointwise product.
    pub fn times(&self, other: &ScalarField) -> ScalarField {
        ScalarField { values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect() }
    }
}

#[derive(Debug, Clone)]
pub struct LatticeModel {
    pub sites: usize,
    pub spacing: f64,
    pub boundary: Boundary,
    pub internal_dim: usize,
    pub h_int: CMat,
    pub h0: CMat,
    pub v: Option<CMat>,
    pub couplings: Vec<CMat>,
}

impl LatticeModel {
    /// Free model `H₀ = −Δ ⊗ 1 + 1 ⊗ H_int` with no potential and no couplings.
    pub fn new(sites: usize, spacing: f64, boundary: Boundary, h_int: CMat) -> Result<Self, ModelError> {
        if h_int.nrows() != h_int.ncols() || h_int.nrows() == 0 {
            return Err(ModelError::Dimension("internal Hamiltonian must be square and nonempty".into()));
        }
        if hermiticity_defect(&h_int) > 1e-10 {
            return Err(ModelError::NotHermitian("h_int"));
        }
        let m = min_eig_hermitian(&h_int);
        if m < -1e-12 {
            return Err(ModelError::InternalNotPsd(m));
        }
        let d_int = h_int.nrows();
        let lap = discrete_laplacian(sites, spacing, boundary)?;
        let h0 = kron(&lap, &identity(d_int)) + kron(&identity(sites), &h_int);
        Ok(Self { sites, spacing, boundary, internal_dim: d_int, h_int, h0, v: None, couplings: Vec::new() })
    }

    /// Scalar particle (`d_int = 1`, `H_int = 0`).
    pub fn scalar(sites: usize, spacing: f64, boundary: Boundary) -> Result<Self, ModelError> {
        Self::new(sites, spacing, boundary, CMat::zeros(1, 1))
    }

    pub fn dim(&self) -> usize {
        self.sites * self.internal_dim
    }

    pub fn coordinates(&self) -> Vec<f64> {
        site_coordinates(self.sites, self.spacing)
    }

    pub fn with_potential(mut self, v: CMat) -> Result<Self, ModelError> {
        self.check_dim(&v)?;
        if hermiticity_defect(&v) > 1e-10 {
            return Err(ModelError::NotHermitian("v"));
        }
        self.v = Some(v);
        Ok(self)
    }

    pub fn with_coupling(mut self, cj: CMat) -> Result<Self, ModelError> {
        self.check_dim(&cj)?;
        self.couplings.push(cj);
        Ok(self)
    }

    fn check_dim(&self, a: &CMat) -> Result<(), ModelError> {
        if a.nrows() != self.dim() || a.ncols() != self.dim() {
            return Err(ModelError::Dimension(format!("operator is {}x{} but the model has dim {}", a.nrows(), a.ncols(), self.dim())));
        }
        Ok(())
    }

    /// `H_V = H₀ + V`.
    pub fn h_v(&self) -> CMat {
        match &self.v {
            Some(v) => &self.h0 + v,
            None => self.h0.clone(),
        }
    }

    /// Position operator `X ⊗ 1`.
    pub fn position(&self) -> CMat {
        position_multiplier(&ScalarField::from_fn(self, |x| x), self)
    }
}

/// `diag(f(x_k)) ⊗ 1_internal`.
pub fn position_multiplier(f: &ScalarField, model: &LatticeModel) -> CMat {
    let site = CMat::from_diagonal(&nalgebra::DVector::from_vec(f.values.clone()));
    kron(&site, &identity(model.internal_dim))
}

/// Central-difference momentum `−i(u_{k+1} − u_{k−1})/(2h)` on the site factor, tensored with `1`.
pub fn momentum_operator(model: &LatticeModel) -> Result<CMat, ModelError> {
    let n = model.sites;
    if n < 3 {
        return Err(ModelError::Lattice(format!("momentum operator needs n >= 3, got {n}")));
    }
    let s = c(0.0, -1.0 / (2.0 * model.spacing));
    let mut p = CMat::zeros(n, n);
    for k in 0..n {
        let up = if k + 1 < n {
            Some(k + 1)
        } else if model.boundary == Boundary::Periodic {
            Some(0)
        } else {
            None
        };
        let down = if k > 0 {
            Some(k - 1)
        } else if model.boundary == Boundary::Periodic {
            Some(n - 1)
        } else {
            None
        };
        if let Some(j) = up {
            p[(k, j)] += s;
        }
        if let Some(j) = down {
            p[(k, j)] -= s;
        }
    }
    Ok(kron(&p, &identity(model.internal_dim)))
}

/// Spin matrices `(Sx, Sy, Sz)` for spin `s = two_s/2` in the `m = s, s−1, …, −s` basis.
pub fn spin_matrices(two_s: usize) -> Result<(CMat, CMat, CMat), ModelError> {
    if two_s < 1 {
        return Err(ModelError::Dimension("two_s must be at least 1".into()));
    }
    let d = two_s + 1;
    let s = two_s as f64 / 2.0;
    let m = |k: usize| s - k as f64;
    let mut sp = CMat::zeros(d, d);
    for k in 1..d {
        // S+ |m⟩ = sqrt(s(s+1) − m(m+1)) |m+1⟩, with |m+1⟩ at index k−1.
        let mk = m(k);
        sp[(k - 1, k)] = c((s * (s + 1.0) - mk * (mk + 1.0)).sqrt(), 0.0);
    }
    let sm = sp.adjoint();
    let sx = (&sp + &sm).map(|z| z * 0.5);
    let sy = (&sp - &sm).map(|z| z * c(0.0, -0.5));
    let sz = CMat::from_fn(d, d, |i, j| if i == j { c(m(i), 0.0) } else { ZERO });
    Ok((sx, sy, sz))
}

/// `C = g(X)·X`.
pub fn coupling_position(g: &ScalarField, model: &LatticeModel) -> CMat {
    let x = ScalarField::from_fn(model, |x| x);
    position_multiplier(&g.times(&x), model)
}

/// `C = g(X) ⊗ S`.
pub fn coupling_spin(g: &ScalarField, s: &CMat, model: &LatticeModel) -> Result<CMat, ModelError> {
    if s.nrows() != model.internal_dim || s.ncols() != model.internal_dim {
        return Err(ModelError::Dimension(format!(
            "spin operator is {}x{} but internal dim is {}",
            s.nrows(),
            s.ncols(),
            model.internal_dim
        )));
    }
    let site = CMat::from_diagonal(&nalgebra::DVector::from_vec(g.values.clone()));
    Ok(kron(&site, s))
}

/// `C = g(X)(αX + βP) f(P) + h.c.` with `f(P)` from the spectral calculus of the discrete momentum.
pub fn coupling_mixed(
    g: &ScalarField,
    f: impl Fn(f64) -> f64,
    alpha: Complex64,
    beta: Complex64,
    model: &LatticeModel,
) -> Result<CMat, ModelError> {
    let p = momentum_operator(model)?;
    let x = model.position();
    let fp = hermitian_function(&p, |v| c(f(v), 0.0));
    let gx = position_multiplier(g, model);
    let inner = x.map(|z| z * alpha) + p.map(|z| z * beta);
    let half = gx * inner * fp;
    Ok(&half + half.adjoint())
}

/// `β Σ_j diag(B_j) ⊗ S_j`.
pub fn zeeman_hamiltonian(b: [&ScalarField; 3], beta: f64, s: [&CMat; 3], model: &LatticeModel) -> Result<CMat, ModelError> {
    let mut out = CMat::zeros(model.dim(), model.dim());
    for j in 0..3 {
        let real = ScalarField { values: b[j].values.iter().map(|z| c(z.re, 0.0)).collect() };
        out += coupling_spin(&real, s[j], model)?.map(|z| z * beta);
    }
    Ok(out)
}

/// Discretized Rollnik norm `(Σ_{x≠y} |D(x)||D(y)| / |x−y|² · h²)^{1/2}`.
pub fn rollnik_norm(d: &ScalarField, model: &LatticeModel) -> f64 {
    let xs = model.coordinates();
    let h2 = model.spacing * model.spacing;
    let mut sum = 0.0;
    for (i, xi) in xs.iter().enumerate() {
        for (j, xj) in xs.iter().enumerate() {
            if i != j {
                sum += d.values[i].norm() * d.values[j].norm() / (xi - xj).powi(2) * h2;
            }
        }
    }
    sum.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorollaryVerdict {
    pub lhs: f64,
    pub existence_threshold: f64,
    pub completeness_threshold: f64,
    pub existence: bool,
    pub completeness: bool,
}

/// `‖(Σg)^{1/2}‖_∞ ‖Σg‖_{3/2}^{1/2}` compared against the two corollary thresholds.
pub fn corollary_condition(g: [&ScalarField; 3], s_norm: f64, model: &LatticeModel) -> CorollaryVerdict {
    let h = model.spacing;
    let sum: Vec<f64> = (0..model.sites).map(|k| g.iter().map(|f| f.values[k].norm()).sum()).collect();
    let sup = sum.iter().copied().fold(0.0, f64::max);
    let l32 = sum.iter().map(|v| v.powf(1.5) * h).sum::<f64>().powf(2.0 / 3.0);
    let lhs = sup.sqrt() * l32.sqrt();
    let pi13 = std::f64::consts::PI.powf(1.0 / 3.0);
    let existence_threshold = pi13 * (2f64.powi(19) / 3.0).powf(1.0 / 6.0) / (3.0 * s_norm);
    let completeness_threshold = pi13 * (2f64.powi(19) / 3f64.powi(13)).powf(1.0 / 6.0) / (3.0 * s_norm);
    CorollaryVerdict {
        lhs,
        existence_threshold,
        completeness_threshold,
        existence: lhs < existence_threshold,
        completeness: lhs < completeness_threshold,
    }
}

/// Operator norm of a coupling (the bounded-coupling standing assumption).
pub fn coupling_norm(cj: &CMat) -> f64 {
    op_norm(cj)
}

/// Single-site projector `|k⟩⟨k| ⊗ 1`.
pub fn site_projector(model: &LatticeModel, k: usize) -> CMat {
    let mut vals = vec![ZERO; model.sites];
    vals[k] = ONE;
    position_multiplier(&ScalarField { values: vals }, model)
}

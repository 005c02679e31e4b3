//! Scenario description to matrices.

use crate::scenario::{CouplingSpec, Scenario, Spacing, SpinAxis};
use lindscat_core::limits::{Schedule, ScheduleError};
use lindscat_core::linalg::{c, hermitian_eig, CMat};
use lindscat_core::model::{
    coupling_mixed, coupling_position, coupling_spin, position_multiplier, spin_matrices, LatticeModel, ModelError, ScalarField,
};

#[derive(Debug, Clone)]
pub struct Built {
    /// Carries `V` as its potential and the couplings.
    pub model: LatticeModel,
    /// `H₀ = −Δ ⊗ 1 + 1 ⊗ H_int`.
    pub h_free: CMat,
    /// `H₀ + V + Zeeman`.
    pub h_sa: CMat,
    pub cs: Vec<CMat>,
}

fn spin_component(two_s: usize, axis: &SpinAxis) -> Result<CMat, ModelError> {
    let (sx, sy, sz) = spin_matrices(two_s)?;
    Ok(match axis {
        SpinAxis::X => sx,
        SpinAxis::Y => sy,
        SpinAxis::Z => sz,
    })
}

pub fn build(s: &Scenario) -> Result<Built, ModelError> {
    let m = &s.model;
    let d_int = m.internal_dim;
    let h_int = CMat::from_fn(d_int, d_int, |i, j| if i == j { c(i as f64 * m.internal_gap, 0.0) } else { c(0.0, 0.0) });
    let mut model = LatticeModel::new(m.sites, m.spacing, m.boundary, h_int)?;
    let h_free = model.h0.clone();
    let mut extra = CMat::zeros(model.dim(), model.dim());
    if let Some(p) = &m.potential {
        let v = position_multiplier(&p.sample(&model)?, &model);
        extra += &v;
        model = model.with_potential(v)?;
    }
    if let Some(z) = &m.zeeman {
        let b = z.field.sample(&model)?;
        extra += coupling_spin(&b, &spin_component(d_int - 1, &z.axis)?, &model)?.map(|w| w * z.beta);
    }
    let h_sa = &h_free + &extra;
    let coupling = match &m.coupling {
        CouplingSpec::None => None,
        CouplingSpec::Position { field } => Some(coupling_position(&field.sample(&model)?, &model)),
        CouplingSpec::Spin { field, axis } => Some(coupling_spin(&field.sample(&model)?, &spin_component(d_int - 1, axis)?, &model)?),
        CouplingSpec::Mixed { field, alpha, beta, momentum_width } => {
            let w = *momentum_width;
            Some(coupling_mixed(&field.sample(&model)?, move |p| (-p * p / (2.0 * w * w)).exp(), c(*alpha, 0.0), c(*beta, 0.0), &model)?)
        }
        CouplingSpec::Capture { field, target_level } => Some(capture_coupling(&model, &h_sa, &field.sample(&model)?, *target_level)),
    };
    let cs = match coupling {
        Some(cj) => {
            model = model.with_coupling(cj.clone())?;
            vec![cj]
        }
        None => vec![CMat::zeros(model.dim(), model.dim())],
    };
    Ok(Built { model, h_free, h_sa, cs })
}

/// `|b⟩⟨g ⊗ 0|` with `b` the lowest eigenvector of `H_sa` compressed to `target` and `g`
/// the field's site profile (not normalized, so the field amplitude sets `‖C‖`).
fn capture_coupling(model: &LatticeModel, h_sa: &CMat, g: &ScalarField, target: usize) -> CMat {
    let d_int = model.internal_dim;
    let n = model.sites;
    let block = CMat::from_fn(n, n, |i, j| h_sa[(i * d_int + target, j * d_int + target)]);
    let (_, vecs) = hermitian_eig(&block);
    let mut out = CMat::zeros(model.dim(), model.dim());
    for i in 0..n {
        for j in 0..n {
            out[(i * d_int + target, j * d_int)] = vecs[(i, 0)] * g.values[j].conj();
        }
    }
    out
}

pub fn schedule(s: &Scenario) -> Result<Schedule, ScheduleError> {
    let sd = &s.schedule;
    let mut out = match sd.spacing {
        Spacing::Linear => Schedule::linear(s.t_max(), sd.checkpoints, s.tolerances.limit),
        Spacing::Geometric => Schedule::geometric(sd.t_first, s.t_max(), sd.checkpoints, s.tolerances.limit),
    };
    out.recurrence_guard = sd.recurrence_guard;
    out.validate()?;
    Ok(out)
}

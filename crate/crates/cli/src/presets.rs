//! Named scenarios.

use crate::scenario::{CaptureSpec, CouplingSpec, Outputs, Scenario, SpinAxis, ZeemanSpec};
use lindscat_core::model::FieldPreset;

pub const NAMES: [&str; 4] = ["free", "position-decoherence", "capture-well", "siegmann-demo"];

pub fn default_capture() -> CaptureSpec {
    CaptureSpec { amplitudes: vec![0.0, 0.5, 1.0, 2.0, 4.0], eps: 0.5, packets: Vec::new(), window: None }
}

pub fn expand(name: &str) -> Option<Scenario> {
    let mut s = Scenario::base();
    s.name = name.to_string();
    s.preset = Some(name.to_string());
    match name {
        // C = 0, V = 0.
        "free" => {}
        // C = g(X)·X with a narrow Gaussian g.
        "position-decoherence" => {
            s.model.sites = 12;
            s.model.coupling = CouplingSpec::Position { field: FieldPreset::Gaussian { width: 1.0, amplitude: 0.05 } };
            s.outputs.timeseries = true;
        }
        // Gaussian well felt by both levels; the coupling moves level-0 amplitude near the
        // well into the level-1 bound state.
        "capture-well" => {
            s.model.sites = 16;
            s.model.internal_dim = 2;
            s.model.internal_gap = 0.5;
            s.model.potential = Some(FieldPreset::Gaussian { width: 1.0, amplitude: -2.0 });
            s.model.coupling = CouplingSpec::Capture { field: FieldPreset::Gaussian { width: 1.5, amplitude: 1.0 }, target_level: 1 };
            s.capture = Some(default_capture());
            s.outputs = Outputs { report: true, timeseries: true, sweep: true };
        }
        // Spin-1/2 film: Zeeman precession about z inside the film, spin-flip dissipation along x.
        "siegmann-demo" => {
            s.model.sites = 12;
            s.model.internal_dim = 2;
            s.model.zeeman = Some(ZeemanSpec { field: FieldPreset::Box { radius: 2.0, amplitude: 1.0 }, beta: 2.0, axis: SpinAxis::Z });
            s.model.coupling = CouplingSpec::Spin { field: FieldPreset::Box { radius: 2.0, amplitude: 0.15 }, axis: SpinAxis::X };
            s.outputs.timeseries = true;
        }
        _ => return None,
    }
    Some(s)
}

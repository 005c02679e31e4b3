//! Scenario runner: stages, report assembly and output files.

use crate::analysis::{self, CaptureInputs, NamedLimit, MAX_SUPER_DIM};
use crate::assemble;
use crate::scenario::Scenario;
use lindscat_core::capture::{gaussian_packet, SweepRow};
use lindscat_core::linalg::CVec;
use lindscat_core::lindblad::dissipative_hamiltonian;
use lindscat_core::report::{severity, Clause, Verdict};
use lindscat_core::scattering::OpenSystem;
use lindscat_core::smoothness::SmoothnessEstimate;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

/// Version tag carried by every report; bump together with `schema/report-v1.schema.json`.
pub const SCHEMA_TAG: &str = "lindscat-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Smoothness,
    WaveOp,
    Capture,
}

impl Command {
    pub fn label(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Smoothness => "smoothness",
            Command::WaveOp => "wave-op",
            Command::Capture => "capture",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CaptureSummary {
    pub bound_rank: usize,
    pub decaying_rank: usize,
    pub decaying_adjoint_rank: usize,
    pub decay_cut: f64,
    pub flags: Vec<String>,
    pub range_rank: usize,
    pub target_rank: usize,
    pub range_max_angle: f64,
    pub bound_overlap: f64,
    pub min_singular: f64,
    pub escape: Vec<f64>,
    pub max_increase: f64,
    pub c1: Option<SmoothnessEstimate>,
    pub sweep: Vec<SweepRow>,
    pub sweep_monotone: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: String,
    pub command: String,
    pub scenario: Scenario,
    pub constants: Vec<SmoothnessEstimate>,
    pub limits: Vec<NamedLimit>,
    pub verdicts: Vec<Clause>,
    pub capture: Option<CaptureSummary>,
    pub diagnostics: BTreeMap<String, f64>,
    pub skipped: Vec<String>,
    pub errors: Vec<String>,
    /// 0 all pass, 1 a verdict failed, 2 non-convergence or a stage error.
    pub severity: i32,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        self.severity
    }

    pub fn failed(&self) -> Vec<&Clause> {
        self.verdicts.iter().filter(|c| c.verdict == Verdict::Fail).collect()
    }
}

fn packets(s: &Scenario, model: &lindscat_core::model::LatticeModel) -> Vec<CVec> {
    match &s.capture {
        Some(c) if !c.packets.is_empty() => c.packets.iter().map(|p| gaussian_packet(model, p.x0, p.sigma, p.k0, p.level)).collect(),
        _ => analysis::default_packets(model),
    }
}

/// Run the stages selected by `command`. Module errors are recorded, not raised.
pub fn run(s: &Scenario, command: Command) -> Report {
    let mut report = Report {
        schema: SCHEMA_TAG.into(),
        command: command.label().into(),
        scenario: s.clone(),
        constants: Vec::new(),
        limits: Vec::new(),
        verdicts: Vec::new(),
        capture: None,
        diagnostics: BTreeMap::new(),
        skipped: Vec::new(),
        errors: Vec::new(),
        severity: 0,
    };
    run_into(s, command, &mut report);
    let sev = severity(report.verdicts.iter().map(|c| c.verdict));
    report.severity = if sev == 0 && !report.errors.is_empty() { 2 } else { sev };
    report
}

fn run_into(s: &Scenario, command: Command, r: &mut Report) {
    let built = match assemble::build(s) {
        Ok(b) => b,
        Err(e) => return r.errors.push(format!("model: {e}")),
    };
    let schedule = match assemble::schedule(s) {
        Ok(x) => x,
        Err(e) => return r.errors.push(format!("schedule: {e}")),
    };
    let (t, dt) = (s.smoothness_t(), s.tolerances.smoothness_dt);
    let sm = match analysis::smoothness_stage(&built.h_free, &built.h_sa, Some(&built.model), &built.cs, t, dt) {
        Ok(x) => x,
        Err(e) => return r.errors.push(format!("smoothness: {e}")),
    };
    r.constants = sm.constants();
    r.verdicts.extend(sm.clauses.iter().cloned());
    r.diagnostics.insert("max_propagator_norm".into(), sm.chain.max_propagator_norm);
    let c0 = sm.c0.value;
    let c_tilde0 = sm.c_tilde0.value;
    if command == Command::Smoothness {
        return;
    }

    if matches!(command, Command::Run | Command::WaveOp) {
        let h = match dissipative_hamiltonian(&built.h_sa, &built.cs) {
            Ok(h) => h,
            Err(e) => return r.errors.push(format!("hamiltonian: {e}")),
        };
        match analysis::hilbert_stage(&h, &built.h_free, c0, &schedule, s.tolerances.residual, dt) {
            Ok(st) => {
                r.limits.extend(st.limits);
                r.verdicts.extend(st.clauses);
                r.diagnostics.insert("scattering_route_residual".into(), st.scattering_route_residual);
                r.diagnostics.insert("integral_representation_residual".into(), st.integral_representation_residual);
            }
            Err(e) => r.errors.push(format!("hilbert wave operators: {e}")),
        }
        let dd = s.dim() * s.dim();
        if dd > MAX_SUPER_DIM {
            r.skipped.push(format!("Lindblad wave operators: superoperator side {dd} exceeds {MAX_SUPER_DIM}"));
        } else {
            let res = OpenSystem::new(built.h_free.clone(), built.h_sa.clone(), built.cs.clone())
                .map_err(Into::into)
                .and_then(|sys| analysis::lindblad_stage(&sys, &schedule, c0, c_tilde0, s.tolerances.lindblad, s.seed));
            match res {
                Ok(st) => {
                    r.limits.extend(st.limits);
                    r.verdicts.extend(st.clauses);
                    r.diagnostics.insert("omega_inverse_plus_minus".into(), st.completeness.inverse_plus_minus);
                    r.diagnostics.insert("omega_inverse_minus_plus".into(), st.completeness.inverse_minus_plus);
                    r.diagnostics.insert("omega_probe_max_growth".into(), st.completeness.probe.max_growth);
                    if let Some(f) = st.factorization_residual {
                        r.diagnostics.insert("omega_factorization_residual".into(), f);
                    }
                }
                Err(e) => r.errors.push(format!("lindblad wave operators: {e}")),
            }
        }
    }

    let wants_capture = command == Command::Capture || (command == Command::Run && s.capture.is_some());
    if wants_capture {
        let cap = s.capture.clone().unwrap_or_else(crate::presets::default_capture);
        let pk = packets(s, &built.model);
        let c_v = sm.c_v.as_ref().map_or(c0, |e| e.value);
        let amplitudes = if s.outputs.sweep || command == Command::Capture { cap.amplitudes.clone() } else { Vec::new() };
        let inp = CaptureInputs {
            model: &built.model,
            h_sa: &built.h_sa,
            cs: &built.cs,
            packets: &pk,
            c_v,
            real_tol: s.tolerances.real,
            window: cap.window.unwrap_or_else(|| s.t_max()),
            smoothness_t: t,
            smoothness_dt: dt,
            eps: cap.eps,
            amplitudes: &amplitudes,
        };
        match analysis::capture_stage(&inp, &schedule) {
            Ok(st) => {
                r.limits.extend(st.escape_limits.iter().cloned());
                r.verdicts.extend(st.clauses.iter().cloned());
                let cls = &st.classification;
                r.capture = Some(CaptureSummary {
                    bound_rank: cls.bound.rank(),
                    decaying_rank: cls.decaying.rank(),
                    decaying_adjoint_rank: cls.decaying_adjoint.rank(),
                    decay_cut: cls.decay_cut,
                    flags: cls.flags.clone(),
                    range_rank: st.range_rank,
                    target_rank: st.target_rank,
                    range_max_angle: st.range_max_angle,
                    bound_overlap: st.bound_overlap,
                    min_singular: st.min_singular,
                    escape: st.escape.clone(),
                    max_increase: st.max_increase,
                    c1: st.sweep.as_ref().map(|w| w.c1.clone()),
                    sweep: st.sweep.as_ref().map(|w| w.rows.clone()).unwrap_or_default(),
                    sweep_monotone: st.sweep.as_ref().map(|w| w.monotone),
                });
            }
            Err(e) => r.errors.push(format!("capture: {e}")),
        }
    }
}

/// C `%.12e` formatting.
pub fn fmt_e12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.12e}");
    let (mant, exp) = s.split_once('e').expect("exponent present");
    let e: i32 = exp.parse().expect("integer exponent");
    format!("{mant}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}

fn column_name(name: &str) -> String {
    let mut out = String::new();
    for ch in name.chars() {
        match ch {
            '+' => out.push_str("plus"),
            '-' => out.push_str("minus"),
            c if c.is_ascii_alphanumeric() => out.push(c.to_ascii_lowercase()),
            _ => {
                if !out.ends_with('_') {
                    out.push('_');
                }
            }
        }
    }
    out.trim_matches('_').to_string()
}

/// Limit time series: header `t`, then `<limit>_residual`, `<limit>_norm` per limit.
pub fn timeseries_csv(limits: &[NamedLimit]) -> Result<String, csv::Error> {
    let mut ts: Vec<f64> = limits.iter().flat_map(|l| l.result.checkpoints.iter().map(|c| c.t)).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    for l in limits {
        let n = column_name(&l.name);
        header.push(format!("{n}_residual"));
        header.push(format!("{n}_norm"));
    }
    w.write_record(&header)?;
    for &t in &ts {
        let mut row = vec![fmt_e12(t)];
        for l in limits {
            match l.result.checkpoints.iter().find(|c| (c.t - t).abs() <= 1e-12 * t.abs().max(1.0)) {
                Some(c) => {
                    row.push(fmt_e12(c.residual));
                    row.push(fmt_e12(c.norm));
                }
                None => row.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is UTF-8"))
}

/// One row per sweep amplitude.
pub fn sweep_csv(c: &CaptureSummary, c_v_unit: f64) -> Result<String, csv::Error> {
    let n_packets = c.sweep.first().map_or(0, |r| r.escape.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["amplitude", "c_v", "c1", "weighted_norm", "hypothesis_holds"].iter().map(|s| s.to_string()).collect();
    header.extend((0..n_packets).map(|k| format!("escape_{k}")));
    header.extend(["mean_escape", "bound_rank", "decaying_rank", "converged"].iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    let c1 = c.c1.as_ref().map_or(f64::NAN, |e| e.value);
    for r in &c.sweep {
        let mut row = vec![fmt_e12(r.amplitude), fmt_e12(r.amplitude * c_v_unit), fmt_e12(c1), fmt_e12(r.weighted_norm)];
        row.push(u8::from(r.hypothesis_holds).to_string());
        row.extend(r.escape.iter().map(|&e| fmt_e12(e)));
        row.push(fmt_e12(r.escape.iter().sum::<f64>() / r.escape.len().max(1) as f64));
        row.push(r.bound_rank.to_string());
        row.push(r.decaying_rank.to_string());
        row.push(u8::from(r.converged).to_string());
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is UTF-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    JsonCsv,
}

pub fn report_json(r: &Report) -> String {
    let mut s = serde_json::to_string_pretty(r).expect("report serializes");
    s.push('\n');
    s
}

/// Write `report.json`, the `report.meta.json` timestamp sidecar and, for `json+csv`,
/// `timeseries.csv` and `sweep.csv` as the scenario's outputs request.
pub fn write_outputs(dir: &Path, r: &Report, format: Format) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let outs = &r.scenario.outputs;
    if outs.report {
        let p = dir.join("report.json");
        std::fs::write(&p, report_json(r))?;
        written.push(p);
        let stamp = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let meta = serde_json::json!({ "report": "report.json", "generated_unix": stamp, "version": env!("CARGO_PKG_VERSION") });
        let p = dir.join("report.meta.json");
        std::fs::write(&p, format!("{}\n", serde_json::to_string_pretty(&meta).expect("meta serializes")))?;
        written.push(p);
    }
    if format == Format::JsonCsv {
        let to_io = |e: csv::Error| io::Error::new(io::ErrorKind::Other, e);
        if outs.timeseries {
            let p = dir.join("timeseries.csv");
            std::fs::write(&p, timeseries_csv(&r.limits).map_err(to_io)?)?;
            written.push(p);
        }
        if outs.sweep {
            if let Some(c) = &r.capture {
                let unit = r.constants.iter().find(|e| e.kind == lindscat_core::smoothness::ConstantKind::CV).map_or(f64::NAN, |e| e.value);
                let p = dir.join("sweep.csv");
                std::fs::write(&p, sweep_csv(c, unit).map_err(to_io)?)?;
                written.push(p);
            }
        }
    }
    Ok(written)
}

//! Subcommand bodies. Each returns the files to write and a report; nothing
//! touches the output directory until the computation has succeeded.

use std::fmt::Write as _;

use parity_qst::csvfmt::{format_sig, num, write_row};
use parity_qst::dynamics::Trajectory;
use parity_qst::effective::hybridization_check;
use parity_qst::models::{build_dicke_mediator, build_parity, build_qrs, DickeParams, ParityKind, QrsParams};
use parity_qst::protocol::{
    run_correlations, run_population_inversion, run_qst_fidelity, thermal_product_uhlmann, DressedFrame, Mediator,
    QstConfig, TransferConfig,
};
use parity_qst::spectral::{
    convergence_audit, convergence_audit_with, dark_ladder, selection_audit, spectrum_sweep, SpectrumRow, SweepPoint,
};
use serde_json::json;

use crate::config::{parse_sweep, Config, MediatorKind};
use crate::error::CliError;
use crate::svg::{Line, Plot};

pub struct Output {
    pub files: Vec<(String, Vec<u8>)>,
    pub report: String,
    /// Set when a property check failed (exit code 1).
    pub check_failed: bool,
    sep: &'static str,
}

impl Output {
    fn new() -> Self {
        Self { files: Vec::new(), report: String::new(), check_failed: false, sep: ": " }
    }

    /// Numeric reports use `key=value` lines.
    fn numeric() -> Self {
        Self { sep: "=", ..Self::new() }
    }

    fn add_report(&mut self, name: &str) {
        let text = self.report.clone();
        self.add(name, text.into_bytes());
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn line(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.report, "{key}{}{value}", self.sep);
    }
}

fn trajectory_csv(t: &Trajectory) -> Vec<u8> {
    let mut buf = Vec::new();
    t.write_csv(&mut buf).expect("writing to memory");
    buf
}

fn merge(a: &Trajectory, b: &Trajectory) -> Result<Trajectory, CliError> {
    let mut out = a.clone();
    for s in &b.series {
        out.push(&s.name, s.values.clone())?;
    }
    Ok(out)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn trajectory_plot(t: &Trajectory, names: &[&str], title: &str, y_label: &str) -> Vec<u8> {
    let lines = names
        .iter()
        .enumerate()
        .filter_map(|(i, n)| {
            t.get(n).map(|v| Line {
                points: t.times.iter().cloned().zip(v.iter().cloned()).collect(),
                color: PALETTE[i % PALETTE.len()],
                dashed: false,
            })
        })
        .collect();
    Plot { title: title.into(), x_label: "t ω_cav".into(), y_label: y_label.into(), lines }.render().into_bytes()
}

/// Mediator-only sweep point for one parameter value.
fn sweep_point(cfg: &Config, param: &str, value: f64) -> parity_qst::Result<SweepPoint> {
    let mut c = cfg.clone();
    match param {
        "g" => c.mediator.g = [value; 2],
        "omega_q" => c.mediator.omega_q = [value; 2],
        _ => c.mediator.omega_cav = value,
    }
    match c.mediator.kind {
        MediatorKind::Rabi => {
            let q: QrsParams = c.qrs();
            let h = build_qrs(&q)?;
            let parity = build_parity(h.layout(), ParityKind::Qrs)?;
            Ok(SweepPoint { hamiltonian: h, parity, identical_qubits: q.qubits_identical() })
        }
        MediatorKind::Dicke => {
            let d: DickeParams = c.dicke();
            let h = build_dicke_mediator(&d)?;
            let parity = build_parity(h.layout(), ParityKind::Dicke)?;
            Ok(SweepPoint { hamiltonian: h, parity, identical_qubits: d.qubits_identical() })
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    parity_qst::dynamics::linspace(a, b, n)
}

pub fn spectrum(cfg: &Config, plot: bool) -> Result<Output, CliError> {
    let sweep = parse_sweep(&cfg.spectrum.sweep)?;
    let grid = linspace(sweep.start, sweep.stop, sweep.points);
    let rows = spectrum_sweep(&sweep.param, &grid, cfg.spectrum.levels, |v| sweep_point(cfg, &sweep.param, v))?;
    let mut out = Output::new();
    let mut csv = Vec::new();
    write_row(&mut csv, &[sweep.param.clone(), "level_index".into(), "freq".into(), "parity".into(), "dark".into()])?;
    for r in &rows {
        write_row(&mut csv, &[num(r.param), r.level_index.to_string(), num(r.freq), r.parity.to_string(), r.dark.to_string()])?;
    }
    out.add("spectrum.csv", csv);
    if plot {
        out.add("spectrum.svg", spectrum_plot(&rows, &sweep.param));
    }
    out.line("sweep", &cfg.spectrum.sweep);
    out.line("levels", cfg.spectrum.levels);
    out.line("rows", rows.len());
    Ok(out)
}

/// One polyline per run of constant (parity, dark) along each level index.
fn spectrum_plot(rows: &[SpectrumRow], param: &str) -> Vec<u8> {
    let levels = rows.iter().map(|r| r.level_index).max().map_or(0, |m| m + 1);
    let mut lines = Vec::new();
    for k in 0..levels {
        let pts: Vec<&SpectrumRow> = rows.iter().filter(|r| r.level_index == k).collect();
        let mut run: Vec<(f64, f64)> = Vec::new();
        let mut key = None;
        for r in pts {
            let this = (r.parity, r.dark);
            if let Some((p, d)) = key.filter(|k| *k != this) {
                let last = *run.last().expect("non-empty run");
                lines.push(Line { points: std::mem::take(&mut run), color: if p > 0 { PALETTE[0] } else { PALETTE[1] }, dashed: d });
                run.push(last);
            }
            key = Some(this);
            run.push((r.param, r.freq));
        }
        if let Some((p, d)) = key {
            lines.push(Line { points: run, color: if p > 0 { PALETTE[0] } else { PALETTE[1] }, dashed: d });
        }
    }
    Plot { title: "Mediator spectrum (blue: p = +1, red: p = -1, dashed: dark)".into(), x_label: param.into(), y_label: "ν / ω_cav".into(), lines }
        .render()
        .into_bytes()
}

pub fn transfer(cfg: &Config, effective_only: bool, plot: bool) -> Result<Output, CliError> {
    let Mediator::Rabi(model) = cfg.build_mediator()? else {
        return Err(CliError::Config("transfer runs on the rabi mediator".into()));
    };
    let t = &cfg.transfer;
    let tc = TransferConfig {
        model,
        time_points: t.time_points,
        horizon: t.horizon,
        t_max: t.t_max,
        channels: t.channels,
        full: !(effective_only || t.effective_only),
    };
    tc.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let pi = run_population_inversion(&tc)?;
    let corr = run_correlations(&tc)?;
    let scale = cfg.scale();
    let mut out = Output::numeric();
    let eff = merge(&pi.effective, &corr.effective)?;
    out.add("transfer_effective.csv", trajectory_csv(&eff));
    let names = ["p_up_down", "p_down_up", "leakage", "eof", "entropy_mediator"];
    if plot {
        out.add("transfer_effective.svg", trajectory_plot(&eff, &names, "Effective model", "value"));
    }
    let full = match (&pi.full, &corr.full) {
        (Some(a), Some(b)) => Some(merge(a, b)?),
        _ => None,
    };
    if let Some(f) = &full {
        out.add("transfer_full.csv", trajectory_csv(f));
        if plot {
            out.add("transfer_full.svg", trajectory_plot(f, &names, "Full model", "value"));
        }
    }
    let arbiter = pi.full_half_period.unwrap_or(pi.effective_half_period);
    out.line("half_period_omega_cav", format_sig(arbiter, 6));
    out.line("half_period_ns", format_sig(scale.nanoseconds(arbiter), 6));
    out.line("half_period_source", if pi.full_half_period.is_some() { "full model" } else { "effective model" });
    out.line("effective_half_period_omega_cav", format_sig(pi.effective_half_period, 6));
    out.line("doublet_formula_half_period_omega_cav", format_sig(pi.formula_half_period, 6));
    out.line("j_eff_formula", format_sig(pi.params.j_eff, 6));
    out.line("chi10", format_sig(pi.params.chi10.norm(), 6));
    out.line("nu10", format_sig(pi.params.nu10, 6));
    if let Some(l) = pi.max_leakage {
        out.line("max_leakage", format_sig(l, 6));
    }
    let summary = json!({
        "half_period_omega_cav": arbiter,
        "full_half_period": pi.full_half_period,
        "effective_half_period": pi.effective_half_period,
        "formula_half_period": pi.formula_half_period,
        "params": pi.params,
        "max_leakage": pi.max_leakage,
    });
    out.add("transfer_report.json", serde_json::to_vec_pretty(&summary).expect("serializable"));
    out.add_report("transfer_report.txt");
    Ok(out)
}

pub fn qst_config(cfg: &Config) -> Result<QstConfig, CliError> {
    let mut q = QstConfig::new(cfg.build_mediator()?);
    let s = &cfg.qst;
    q.theta = cfg.theta();
    q.losses = cfg.losses();
    q.samples = s.samples;
    q.sampling = s.sampling;
    q.seed = s.seed;
    q.time_points = s.time_points;
    q.horizon = s.horizon;
    q.t_max = s.t_max;
    if let Some(c) = s.frame_cutoff {
        q.frame_cutoff = c;
    }
    q.upward_rates = s.upward_rates;
    q.channels = cfg.transfer.channels;
    q.propagator = cfg.propagator();
    q.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(q)
}

pub fn qst(cfg: &Config, plot: bool) -> Result<Output, CliError> {
    let q = qst_config(cfg)?;
    let r = run_qst_fidelity(&q)?;
    let mut out = Output::numeric();
    out.add("qst_average.csv", trajectory_csv(&r.trajectory));
    let mut samples = Vec::new();
    write_row(&mut samples, &["index".into(), "theta".into(), "phi".into(), "fidelity_min".into(), "fidelity_max".into()])?;
    for (i, (s, e)) in r.samples.iter().zip(&r.sample_extrema).enumerate() {
        write_row(&mut samples, &[i.to_string(), num(s.theta), num(s.phi), num(e.min), num(e.max)])?;
    }
    out.add("qst_samples.csv", samples);
    if plot {
        let names = ["fidelity_envelope", "fidelity_sample_min", "fidelity_sample_max"];
        out.add("qst_average.svg", trajectory_plot(&r.trajectory, &names, "Bloch-averaged transfer fidelity", "F"));
    }
    let scale = cfg.scale();
    out.line("F_peak", format_sig(r.peak_fidelity, 6));
    out.line("t_peak_omega_cav", format_sig(r.peak_time, 6));
    out.line("t_peak_ns", format_sig(scale.nanoseconds(r.peak_time), 6));
    out.line("F_peak_rotating_frame", format_sig(r.rotating_peak_fidelity, 6));
    out.line("samples", r.samples.len());
    out.line("frame_levels", r.frame_levels);
    if let Some(t) = r.transfer_time_estimate {
        out.line("transfer_time_estimate_omega_cav", format_sig(t, 6));
    }
    out.line("theta", format_sig(q.theta, 6));
    out.line("max_trace_drift", format_sig(r.max_trace_drift, 3));
    out.line("min_eigenvalue", format_sig(r.min_eigenvalue, 3));
    out.line("truncated_thermal_weight", format_sig(r.truncated_weight, 3));
    let summary = json!({
        "peak_fidelity": r.peak_fidelity,
        "peak_time": r.peak_time,
        "rotating_peak_fidelity": r.rotating_peak_fidelity,
        "rotating_peak_time": r.rotating_peak_time,
        "transfer_time_estimate": r.transfer_time_estimate,
        "frame_levels": r.frame_levels,
        "truncated_weight": r.truncated_weight,
        "max_trace_drift": r.max_trace_drift,
        "min_eigenvalue": r.min_eigenvalue,
    });
    out.add("qst_report.json", serde_json::to_vec_pretty(&summary).expect("serializable"));
    out.add_report("qst_report.txt");
    Ok(out)
}

const SELECTION_FORBIDDEN: f64 = 1e-10;
const SELECTION_ALLOWED: f64 = 1e-3;
const LADDER_TOL: f64 = 1e-8;
const COMMUTATOR_TOL: f64 = 1e-8;

pub fn check(cfg: &Config) -> Result<Output, CliError> {
    let mediator = cfg.build_mediator()?;
    let mut out = Output::new();
    let mut items = serde_json::Map::new();
    let verdict = |out: &mut Output, items: &mut serde_json::Map<String, serde_json::Value>, name: &str, pass: bool, detail: serde_json::Value| {
        out.line(name, if pass { "PASS" } else { "FAIL" });
        out.check_failed |= !pass;
        items.insert(name.into(), json!({ "pass": pass, "detail": detail }));
    };

    // parity commutes with the mediator and the full Hamiltonian
    let mut worst: f64 = 0.0;
    for (h, kind) in [
        (mediator.mediator_hamiltonian()?, mediator.mediator_parity_kind()),
        (mediator.full_hamiltonian()?, mediator.full_parity_kind()),
    ] {
        let p = build_parity(h.layout(), kind)?;
        worst = worst.max(h.commutator(&p)?.max_norm());
    }
    verdict(&mut out, &mut items, "parity_commutation", worst < COMMUTATOR_TOL, json!({ "max_commutator": worst }));

    let es = mediator.mediator_eigensystem()?;
    let sel = selection_audit(&es, cfg.check.levels)?;
    // with several modes, individual quadratures may vanish between opposite-parity levels
    let single_mode = matches!(mediator, Mediator::Rabi(_));
    let sel_ok = sel.max_forbidden < SELECTION_FORBIDDEN && (!single_mode || sel.min_allowed > SELECTION_ALLOWED);
    verdict(&mut out, &mut items, "selection_rules", sel_ok, serde_json::to_value(sel).expect("serializable"));

    if mediator.identical_qubits() {
        let grid = linspace(0.0, 1.0, cfg.check.sweep_points.max(2));
        let rows = spectrum_sweep("g", &grid, cfg.check.levels.max(40), |g| sweep_point(cfg, "g", g))?;
        let d = dark_ladder(&rows, cfg.mediator.omega_cav);
        let ok = d.max_offset < LADDER_TOL && d.max_spacing_error < LADDER_TOL && d.min_rungs >= 2;
        verdict(&mut out, &mut items, "dark_ladder", ok, serde_json::to_value(d).expect("serializable"));
    } else {
        out.line("dark_ladder", "skipped (qubits not identical)");
        items.insert("dark_ladder".into(), json!({ "skipped": "qubits not identical" }));
    }

    let conv = match &mediator {
        Mediator::Rabi(p) => convergence_audit(&p.qrs, cfg.check.levels)?,
        Mediator::Dicke(p) => convergence_audit_with(p.n_fock, cfg.check.levels, |n| {
            build_dicke_mediator(&DickeParams { n_fock: n, ..p.clone() })
        })?,
    };
    verdict(&mut out, &mut items, "fock_convergence", conv.converged, serde_json::to_value(&conv).expect("serializable"));

    let theta = cfg.theta();
    let th = thermal_product_uhlmann(&mediator, theta)?;
    out.line("thermal_product", format_sig(th.overlap, 4));
    out.line("thermal_product_uhlmann", format_sig(th.uhlmann.unwrap_or(f64::NAN), 4));
    items.insert("thermal_product".into(), serde_json::to_value(th).expect("serializable"));

    let losses = cfg.losses();
    if losses.kappa == 0.0 && losses.gamma == 0.0 {
        out.line("dressed_rates", "none (kappa = gamma = 0)");
        items.insert("dressed_rates".into(), json!([]));
    } else {
        let q = qst_config(cfg)?;
        let frame = DressedFrame::new(&mediator, q.frame_cutoff)?;
        let rates = frame.rates(&mediator, &losses)?;
        out.line("dressed_rates", format!("{} transitions among {} levels", rates.len(), frame.levels));
        items.insert("dressed_rates".into(), serde_json::to_value(&rates).expect("serializable"));
    }

    if let Mediator::Rabi(p) = &mediator {
        match hybridization_check(p) {
            Ok(h) => {
                out.line("hybridization_overlap", format_sig(h.overlap_symmetric.min(h.overlap_antisymmetric), 4));
                items.insert("hybridization".into(), serde_json::to_value(h).expect("serializable"));
            }
            Err(e) => {
                out.line("hybridization_overlap", format!("unavailable ({e})"));
            }
        }
    }

    let machine = json!({ "pass": !out.check_failed, "items": items });
    out.add("check_report.json", serde_json::to_vec_pretty(&machine).expect("serializable"));
    out.add_report("check_report.txt");
    Ok(out)
}

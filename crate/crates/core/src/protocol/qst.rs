//! Bloch-averaged state-transfer fidelity in the dressed mediator frame.
//!
//! The mediator is represented by its lowest K eigenlevels and the two
//! external sites in their bare basis, so the generator acts on K·d² states.
//! Evolution is linear in ρ(0), hence four propagations of
//! ρ_th ⊗ B ⊗ |↓⟩⟨↓| with B ∈ {I, σx, σy, σz} give the reduced state of
//! qubit 2 for every input χ: ρ_2(χ) = ½(R_I + r·R_σ).

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bloch::{bloch_samples, BlochState, SamplingScheme};
use super::{LossRates, Mediator};
use crate::dynamics::lindblad::{bose_occupation, propagate, DressedRate, JumpMatrix, Lindbladian, Propagator};
use crate::dynamics::{boltzmann_weights, linspace, refined_peak, Trajectory};
use crate::effective::{branch_coefficients, Channels};
use crate::error::{QstError, Result};
use crate::models::ExternalSite;
use crate::qops::{eigh_matrix, kron, pauli, Axis, FactorRole, Operator, SubsystemLayout, C64, ONE, ZERO};
use crate::spectral::{degenerate_clusters, EigenSystem, DEGENERACY_GAP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QstConfig {
    pub mediator: Mediator,
    /// k_B T / ħω_cav.
    pub theta: f64,
    pub losses: LossRates,
    pub samples: usize,
    pub sampling: SamplingScheme,
    pub seed: u64,
    pub time_points: usize,
    /// Time horizon in units of the estimated transfer time.
    pub horizon: f64,
    /// Explicit horizon; overrides `horizon`.
    pub t_max: Option<f64>,
    /// Mediator levels with ν_k − ν_0 up to this value form the frame.
    pub frame_cutoff: f64,
    /// Add thermal absorption L = |ψ_k⟩⟨ψ_j| at rate Γ n̄(ν_kj).
    pub upward_rates: bool,
    /// Channels used for the transfer-time estimate.
    pub channels: Channels,
    pub propagator: Propagator,
    /// Number of output times at which positivity is checked.
    pub positivity_checks: usize,
}

impl QstConfig {
    pub fn new(mediator: Mediator) -> Self {
        let frame_cutoff = match &mediator {
            Mediator::Rabi(_) => 4.5,
            Mediator::Dicke(_) => 3.2,
        };
        Self {
            mediator,
            theta: 0.0,
            losses: LossRates::none(),
            samples: 4000,
            sampling: SamplingScheme::Fibonacci,
            seed: 0,
            time_points: 600,
            horizon: 2.5,
            t_max: None,
            frame_cutoff,
            upward_rates: false,
            channels: Channels::AllAllowed,
            propagator: Propagator::Chebyshev { tol: 1e-12 },
            positivity_checks: 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mediator.validate()?;
        self.losses.validate()?;
        if !(self.theta >= 0.0) || self.theta.is_infinite() {
            return Err(QstError::InvalidParameter(format!("theta must be finite and >= 0, got {}", self.theta)));
        }
        if self.samples == 0 {
            return Err(QstError::InvalidParameter("samples must be >= 1".into()));
        }
        if self.time_points < 2 {
            return Err(QstError::InvalidParameter("time_points must be >= 2".into()));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(QstError::InvalidParameter(format!("horizon must be > 0, got {}", self.horizon)));
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0) || !t.is_finite() {
                return Err(QstError::InvalidParameter(format!("t_max must be > 0, got {t}")));
            }
        }
        if !(self.frame_cutoff > 0.0) {
            return Err(QstError::InvalidParameter(format!("frame_cutoff must be > 0, got {}", self.frame_cutoff)));
        }
        Ok(())
    }
}

/// Truncated mediator eigenbasis ⊗ two external sites.
#[derive(Debug, Clone)]
pub struct DressedFrame {
    pub levels: usize,
    pub site_dim: usize,
    /// ν_k − ν_0 for the retained levels.
    pub energies: Vec<f64>,
    pub hamiltonian: Operator,
    pub sites: [ExternalSite; 2],
    pub eigensystem: EigenSystem,
}

impl DressedFrame {
    pub fn new(mediator: &Mediator, cutoff: f64) -> Result<Self> {
        mediator.validate()?;
        let es = mediator.mediator_eigensystem()?;
        let e0 = es.freqs[0];
        let mut levels = 0;
        for c in degenerate_clusters(&es.freqs, DEGENERACY_GAP) {
            if es.freqs[c.start] - e0 <= cutoff || levels < 2 {
                levels = c.end;
            } else {
                break;
            }
        }
        let sites = [mediator.external_site(0), mediator.external_site(1)];
        let d = sites[0].levels;
        let y = mediator.external_couplings(&es, levels)?;
        let energies: Vec<f64> = es.freqs[..levels].iter().map(|f| f - e0).collect();
        let id_d = Array2::<C64>::eye(d);
        let id_k = Array2::<C64>::eye(levels);
        let diag = Array2::from_shape_fn((levels, levels), |(i, j)| if i == j { C64::new(energies[i], 0.0) } else { ZERO });
        let h = kron(&diag, &Array2::eye(d * d))
            + kron(&id_k, &kron(&sites[0].hamiltonian(), &id_d))
            + kron(&id_k, &kron(&id_d, &sites[1].hamiltonian()))
            + kron(&y[0], &kron(&sites[0].x, &id_d))
            + kron(&y[1], &kron(&id_d, &sites[1].x));
        let layout = SubsystemLayout::new(&[
            (levels, FactorRole::Level),
            (d, FactorRole::ExternalQubit),
            (d, FactorRole::ExternalQubit),
        ])?;
        let hamiltonian = Operator::new(layout, crate::qops::hermitian_part(&h))?;
        Ok(Self { levels, site_dim: d, energies, hamiltonian, sites, eigensystem: es })
    }

    pub fn dim(&self) -> usize {
        self.levels * self.site_dim * self.site_dim
    }

    fn index(&self, k: usize, a: usize, b: usize) -> usize {
        (k * self.site_dim + a) * self.site_dim + b
    }

    /// Dressed decay rates among the retained levels.
    pub fn rates(&self, mediator: &Mediator, losses: &LossRates) -> Result<Vec<DressedRate>> {
        crate::dynamics::dressed_rates(
            &self.eigensystem,
            losses.kappa,
            losses.gamma,
            &mediator.mode_freqs(),
            mediator.omega_q(),
            self.levels,
        )
    }

    pub fn lindbladian(&self, mediator: &Mediator, losses: &LossRates, theta: f64, upward: bool) -> Result<Lindbladian> {
        losses.validate()?;
        let d = self.site_dim;
        let dd = d * d;
        let mut jumps = Vec::new();
        let level_jump = |to: usize, from: usize| {
            JumpMatrix::Sparse((0..dd).map(|e| (to * dd + e, from * dd + e, ONE)).collect())
        };
        for r in self.rates(mediator, losses)? {
            let nbar = if upward { bose_occupation(self.energies[r.upper] - self.energies[r.lower], theta) } else { 0.0 };
            jumps.push((r.total() * (1.0 + nbar), level_jump(r.lower, r.upper)));
            if nbar > 0.0 {
                jumps.push((r.total() * nbar, level_jump(r.upper, r.lower)));
            }
        }
        let id_k = Array2::<C64>::eye(self.levels);
        let id_d = Array2::<C64>::eye(d);
        for j in 0..2 {
            let site = &self.sites[j];
            let place = |m: &Array2<C64>| if j == 0 { kron(&id_k, &kron(m, &id_d)) } else { kron(&id_k, &kron(&id_d, m)) };
            if losses.gamma_ext[j] > 0.0 {
                jumps.push((losses.gamma_ext[j], JumpMatrix::from_dense(&place(&site.x))));
            }
            if losses.gamma_phi[j] > 0.0 {
                jumps.push((losses.gamma_phi[j], JumpMatrix::from_dense(&place(&site.z))));
            }
        }
        Lindbladian::from_parts(self.hamiltonian.data().clone(), jumps)
    }

    /// Thermal mediator weights on the retained levels and the discarded weight.
    pub fn thermal_weights(&self, theta: f64) -> (Vec<f64>, f64) {
        let all = boltzmann_weights(&self.eigensystem.freqs, theta);
        let kept: f64 = all[..self.levels].iter().sum();
        (all[..self.levels].iter().map(|p| p / kept).collect(), 1.0 - kept)
    }

    /// diag(p) ⊗ B ⊗ |↓⟩⟨↓| where `b` acts on the qubit pair of site 1.
    fn input(&self, weights: &[f64], b: &Array2<C64>) -> Array2<C64> {
        let n = self.dim();
        let s = &self.sites[0];
        let pair = [s.up, s.down];
        let down2 = self.sites[1].down;
        let mut m = Array2::zeros((n, n));
        for (k, p) in weights.iter().enumerate() {
            for (i, &a) in pair.iter().enumerate() {
                for (j, &c) in pair.iter().enumerate() {
                    m[(self.index(k, a, down2), self.index(k, c, down2))] = b[(i, j)] * *p;
                }
            }
        }
        m
    }

    /// diag(p) ⊗ |χ⟩⟨χ| ⊗ |↓⟩⟨↓|.
    pub fn initial_state(&self, weights: &[f64], chi: &BlochState) -> Array2<C64> {
        let c = chi.amplitudes();
        self.input(weights, &Array2::from_shape_fn((2, 2), |(i, j)| c[i] * c[j].conj()))
    }

    /// Reduced 2×2 state of site 2 on (|↑⟩, |↓⟩).
    fn reduce_site2(&self, rho: &Array2<C64>) -> [[C64; 2]; 2] {
        let s = &self.sites[1];
        let pair = [s.up, s.down];
        let mut out = [[ZERO; 2]; 2];
        for k in 0..self.levels {
            for e in 0..self.site_dim {
                for (i, &a) in pair.iter().enumerate() {
                    for (j, &b) in pair.iter().enumerate() {
                        out[i][j] += rho[(self.index(k, e, a), self.index(k, e, b))];
                    }
                }
            }
        }
        out
    }
}

/// Transfer time π/(2|c0|) from the second-order flip-flop coefficient.
pub fn estimated_transfer_time(mediator: &Mediator, es: &EigenSystem, channels: Channels) -> Result<f64> {
    let y = mediator.external_couplings(es, es.len())?;
    let c = branch_coefficients(&es.freqs, &y, mediator.omega_ext(), 0, channels)?;
    let m = c.flip_flop.norm();
    if m < 1e-14 {
        return Err(QstError::InvalidParameter(
            "no exchange coupling between the external qubits; set t_max explicitly".into(),
        ));
    }
    Ok(std::f64::consts::FRAC_PI_2 / m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleExtrema {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct QstResult {
    /// Series: fidelity_envelope (phase-optimized average), fidelity_rotating
    /// (average in the frame rotating at ω_ext,2), optimal_phase,
    /// fidelity_sample_min, fidelity_sample_max.
    pub trajectory: Trajectory,
    pub peak_time: f64,
    pub peak_fidelity: f64,
    pub rotating_peak_time: f64,
    pub rotating_peak_fidelity: f64,
    /// Per-sample fidelity range over the whole horizon (envelope phase).
    pub sample_extrema: Vec<SampleExtrema>,
    pub samples: Vec<BlochState>,
    pub transfer_time_estimate: Option<f64>,
    pub frame_levels: usize,
    pub truncated_weight: f64,
    pub max_trace_drift: f64,
    pub min_eigenvalue: f64,
}

/// Coefficients of F(α) = w_up ρ↑↑ + w_down ρ↓↓ + Re(z ρ↑↓ e^{−iα}) for one sample.
struct SampleWeights {
    r: [f64; 3],
    w_up: f64,
    w_down: f64,
    z: C64,
}

impl SampleWeights {
    fn new(s: &BlochState) -> Self {
        let [a, b] = s.amplitudes();
        Self { r: s.bloch_vector(), w_up: a.norm_sqr(), w_down: b.norm_sqr(), z: a.conj() * b * 2.0 }
    }

    /// (diagonal part, coherence coefficient) for the reduced state at one time.
    fn parts(&self, red: &[[[C64; 2]; 2]; 4]) -> (f64, C64) {
        let el = |i: usize, j: usize| {
            let mut v = red[0][i][j];
            for a in 0..3 {
                v += red[a + 1][i][j] * self.r[a];
            }
            v * 0.5
        };
        (self.w_up * el(0, 0).re + self.w_down * el(1, 1).re, self.z * el(0, 1))
    }
}

const FIDELITY_SLACK: f64 = 1e-6;

pub fn run_qst_fidelity(cfg: &QstConfig) -> Result<QstResult> {
    cfg.validate()?;
    let frame = DressedFrame::new(&cfg.mediator, cfg.frame_cutoff)?;
    let estimate = estimated_transfer_time(&cfg.mediator, &frame.eigensystem, cfg.channels);
    let t_max = match (cfg.t_max, &estimate) {
        (Some(t), _) => t,
        (None, Ok(t)) => cfg.horizon * t,
        (None, Err(e)) => return Err(QstError::InvalidParameter(e.to_string())),
    };
    let times = linspace(0.0, t_max, cfg.time_points);
    let samples = bloch_samples(cfg.samples, cfg.sampling, cfg.seed)?;
    let l = frame.lindbladian(&cfg.mediator, &cfg.losses, cfg.theta, cfg.upward_rates)?;
    let (weights, truncated_weight) = frame.thermal_weights(cfg.theta);
    log::info!(
        "qst: frame of {} levels (dim {}), t_max = {t_max:.4}, {} samples",
        frame.levels,
        frame.dim(),
        samples.len()
    );

    let stride = (cfg.time_points / cfg.positivity_checks.max(1)).max(1);
    let is_check = |i: usize| cfg.positivity_checks > 0 && (i % stride == 0 || i + 1 == cfg.time_points);
    let bases = [
        Array2::<C64>::eye(2),
        pauli(Axis::X).into_data(),
        pauli(Axis::Y).into_data(),
        pauli(Axis::Z).into_data(),
    ];
    type Run = (Vec<[[C64; 2]; 2]>, Vec<f64>, Vec<(usize, Array2<C64>)>);
    let runs: Vec<Run> = bases
        .par_iter()
        .map(|b| -> Result<Run> {
            let mut red = Vec::with_capacity(times.len());
            let mut traces = Vec::with_capacity(times.len());
            let mut full = Vec::new();
            propagate(&l, frame.input(&weights, b), &times, cfg.propagator, |i, _, rho| {
                red.push(frame.reduce_site2(rho));
                traces.push(rho.diag().sum().re);
                if is_check(i) {
                    full.push((i, rho.clone()));
                }
                Ok(())
            })?;
            Ok((red, traces, full))
        })
        .collect::<Result<_>>()?;

    let mut max_trace_drift: f64 = 0.0;
    for (b, run) in runs.iter().enumerate() {
        let target = if b == 0 { 2.0 } else { 0.0 };
        for tr in &run.1 {
            max_trace_drift = max_trace_drift.max((tr - target).abs() * 0.5);
        }
    }
    let mut min_eigenvalue = f64::INFINITY;
    for c in 0..runs[0].2.len() {
        let e_i = &runs[0].2[c].1;
        for a in 1..4 {
            for sign in [1.0, -1.0] {
                let mut rho = e_i.clone();
                rho.scaled_add(C64::new(sign, 0.0), &runs[a].2[c].1);
                rho.mapv_inplace(|v| v * 0.5);
                let ev = eigh_matrix(&crate::qops::hermitian_part(&rho))?.values;
                min_eigenvalue = min_eigenvalue.min(ev[0]);
            }
        }
    }

    let reduced: Vec<[[[C64; 2]; 2]; 4]> =
        (0..times.len()).map(|i| [runs[0].0[i], runs[1].0[i], runs[2].0[i], runs[3].0[i]]).collect();
    let sw: Vec<SampleWeights> = samples.iter().map(SampleWeights::new).collect();
    let ns = samples.len() as f64;
    let omega2 = cfg.mediator.omega_ext()[1];

    // Phase-optimized average per time: F̄(α) = A + Re(Z e^{−iα}) peaks at α = arg Z.
    let mut envelope = Vec::with_capacity(times.len());
    let mut rotating = Vec::with_capacity(times.len());
    let mut phase = Vec::with_capacity(times.len());
    let mut smin = Vec::with_capacity(times.len());
    let mut smax = Vec::with_capacity(times.len());
    let mut extrema = vec![SampleExtrema { min: f64::INFINITY, max: f64::NEG_INFINITY }; samples.len()];
    for (i, red) in reduced.iter().enumerate() {
        let parts: Vec<(f64, C64)> = sw.iter().map(|w| w.parts(red)).collect();
        let a: f64 = parts.iter().map(|p| p.0).sum::<f64>() / ns;
        let z: C64 = parts.iter().map(|p| p.1).sum::<C64>() / ns;
        let alpha = z.arg();
        let rot = C64::from_polar(1.0, omega2 * times[i]);
        envelope.push(a + z.norm());
        rotating.push(a + (z * rot).re);
        phase.push(alpha);
        let unrot = C64::from_polar(1.0, -alpha);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (s, p) in parts.iter().enumerate() {
            let f = p.0 + (p.1 * unrot).re;
            if !f.is_finite() || !(-FIDELITY_SLACK..=1.0 + FIDELITY_SLACK).contains(&f) {
                return Err(QstError::Sample {
                    index: s,
                    theta: samples[s].theta,
                    phi: samples[s].phi,
                    source: Box::new(QstError::Accuracy(format!("fidelity {f} at t = {}", times[i]))),
                });
            }
            lo = lo.min(f);
            hi = hi.max(f);
            extrema[s].min = extrema[s].min.min(f);
            extrema[s].max = extrema[s].max.max(f);
        }
        smin.push(lo);
        smax.push(hi);
    }
    let (peak_time, peak_fidelity) = refined_peak(&times, &envelope);
    let (rotating_peak_time, rotating_peak_fidelity) = refined_peak(&times, &rotating);
    let mut trajectory = Trajectory::new(times)?;
    trajectory.push("fidelity_envelope", envelope)?;
    trajectory.push("fidelity_rotating", rotating)?;
    trajectory.push("optimal_phase", phase)?;
    trajectory.push("fidelity_sample_min", smin)?;
    trajectory.push("fidelity_sample_max", smax)?;
    trajectory.diagnostics.max_trace_drift = max_trace_drift;
    trajectory.diagnostics.min_eigenvalue = min_eigenvalue.is_finite().then_some(min_eigenvalue);
    Ok(QstResult {
        trajectory,
        peak_time,
        peak_fidelity,
        rotating_peak_time,
        rotating_peak_fidelity,
        sample_extrema: extrema,
        samples,
        transfer_time_estimate: estimate.ok(),
        frame_levels: frame.levels,
        truncated_weight,
        max_trace_drift,
        min_eigenvalue,
    })
}

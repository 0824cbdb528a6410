//! Population exchange and entanglement between the external qubits, from
//! the full model and from the effective Hamiltonian.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    entanglement_of_formation, evolve_unitary_with, linspace, refined_peak, Hamiltonian, InitialState, StateRef,
    Tolerances, Trajectory,
};
use crate::effective::{build_effective, effective_params, reduced_ket, Channels, EffectiveParams};
use crate::error::{QstError, Result};
use crate::models::{build_full, FullModelParams};
use crate::qops::{eigh_matrix, kron_vec, DensityMatrix, FactorRole, Operator, SubsystemLayout, C64, DOWN, UP};
use crate::spectral::{diagonalize_qrs, EigenSystem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub model: FullModelParams,
    pub time_points: usize,
    /// Horizon in units of the effective half-period.
    pub horizon: f64,
    pub t_max: Option<f64>,
    pub channels: Channels,
    /// Also evolve the full model (otherwise only the effective one).
    pub full: bool,
}

impl TransferConfig {
    pub fn new(model: FullModelParams) -> Self {
        Self { model, time_points: 1500, horizon: 2.2, t_max: None, channels: Channels::AllAllowed, full: true }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.time_points < 3 {
            return Err(QstError::InvalidParameter("time_points must be >= 3".into()));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(QstError::InvalidParameter(format!("horizon must be > 0, got {}", self.horizon)));
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0) || !t.is_finite() {
                return Err(QstError::InvalidParameter(format!("t_max must be > 0, got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PopulationInversion {
    /// p_up_down, p_down_up on the effective model.
    pub effective: Trajectory,
    /// p_up_down, p_down_up (projections onto ψ0 ⊗ basis) and leakage.
    pub full: Option<Trajectory>,
    /// π/(2|c0|) from the effective flip-flop coefficient.
    pub effective_half_period: f64,
    /// π/|j_eff| from the doublet formula.
    pub formula_half_period: f64,
    /// First maximum of p_down_up in the full model.
    pub full_half_period: Option<f64>,
    pub max_leakage: Option<f64>,
    pub params: EffectiveParams,
}

#[derive(Debug, Clone, Serialize)]
pub struct Correlations {
    /// eof (log2 units) and entropy_mediator (nats).
    pub effective: Trajectory,
    pub full: Option<Trajectory>,
    pub effective_half_period: f64,
}

struct Setup {
    es: EigenSystem,
    params: EffectiveParams,
    h_eff: crate::effective::EffectiveHamiltonian,
    times: Vec<f64>,
}

fn setup(cfg: &TransferConfig) -> Result<Setup> {
    cfg.validate()?;
    let es = diagonalize_qrs(&cfg.model.qrs)?;
    let params = effective_params(&es, cfg.model.omega_ext, cfg.model.lambda)?;
    let h_eff = build_effective(&params, &es, cfg.channels)?;
    let t_max = match cfg.t_max {
        Some(t) => t,
        None if h_eff.branches[0].flip_flop.norm() > 0.0 => cfg.horizon * h_eff.half_period(),
        None => return Err(QstError::InvalidParameter("no exchange coupling; set t_max explicitly".into())),
    };
    Ok(Setup { es, params, h_eff, times: linspace(0.0, t_max, cfg.time_points) })
}

/// Reshape a pure state on [rest, ext, ext] into its (rest × 4) coefficient matrix.
fn split(psi: ArrayView1<C64>) -> Array2<C64> {
    let rows = psi.len() / 4;
    Array2::from_shape_fn((rows, 4), |(i, j)| psi[i * 4 + j])
}

fn ext_layout() -> SubsystemLayout {
    SubsystemLayout::new(&[(2, FactorRole::ExternalQubit), (2, FactorRole::ExternalQubit)]).expect("static layout")
}

/// EoF of the qubit pair and the entropy of the rest, which equals that of
/// the qubit pair for a pure global state.
fn correlations_of(m: &Array2<C64>) -> Result<(f64, f64)> {
    let rho = m.t().dot(&m.mapv(|c| c.conj()));
    let dm = DensityMatrix::new_unchecked(Operator::new(ext_layout(), crate::qops::hermitian_part(&rho))?);
    let eof = entanglement_of_formation(&dm)?;
    let s = eigh_matrix(dm.data())?
        .values
        .iter()
        .filter(|p| **p > crate::dynamics::ENTROPY_CLAMP)
        .map(|p| -p * p.ln())
        .sum();
    Ok((eof, s))
}

fn ext_ket(a: usize, b: usize) -> Array1<C64> {
    let mut v = Array1::zeros(4);
    v[a * 2 + b] = C64::new(1.0, 0.0);
    v
}

fn overlap_sq(a: &Array1<C64>, psi: ArrayView1<C64>) -> f64 {
    a.iter().zip(psi.iter()).map(|(x, y)| x.conj() * y).sum::<C64>().norm_sqr()
}

struct Series {
    pops: Vec<[f64; 2]>,
    corr: Vec<(f64, f64)>,
}

fn evolve(h: &Operator, psi0: Array1<C64>, times: &[f64], targets: [&Array1<C64>; 2], corr: bool) -> Result<Series> {
    let mut out = Series { pops: Vec::with_capacity(times.len()), corr: Vec::new() };
    evolve_unitary_with(&Hamiltonian::Static(h), &InitialState::Pure(psi0), times, Tolerances::default(), |_, _, s| {
        let StateRef::Pure(psi) = s else { unreachable!("pure input stays pure") };
        out.pops.push([overlap_sq(targets[0], psi), overlap_sq(targets[1], psi)]);
        if corr {
            out.corr.push(correlations_of(&split(psi))?);
        }
        Ok(())
    })?;
    Ok(out)
}

fn run_effective(s: &Setup, corr: bool) -> Result<Series> {
    let a = reduced_ket(0, [UP, DOWN]);
    let b = reduced_ket(0, [DOWN, UP]);
    evolve(&s.h_eff.operator, a.clone(), &s.times, [&a, &b], corr)
}

fn run_full(cfg: &TransferConfig, s: &Setup, corr: bool) -> Result<Series> {
    let h = build_full(&cfg.model)?;
    let psi0 = s.es.state(0);
    let a = kron_vec(psi0, ext_ket(UP, DOWN).view());
    let b = kron_vec(psi0, ext_ket(DOWN, UP).view());
    evolve(&h, a.clone(), &s.times, [&a, &b], corr)
}

fn column(v: &[[f64; 2]], k: usize) -> Vec<f64> {
    v.iter().map(|p| p[k]).collect()
}

/// Exchange |↑↓⟩ → |↓↑⟩ with the mediator starting in its ground state.
pub fn run_population_inversion(cfg: &TransferConfig) -> Result<PopulationInversion> {
    let s = setup(cfg)?;
    let eff = run_effective(&s, false)?;
    let mut effective = Trajectory::new(s.times.clone())?;
    effective.push("p_up_down", column(&eff.pops, 0))?;
    effective.push("p_down_up", column(&eff.pops, 1))?;
    let t_half = s.h_eff.half_period();

    let (mut full, mut full_half_period, mut max_leakage) = (None, None, None);
    if cfg.full {
        let f = run_full(cfg, &s, false)?;
        let leak: Vec<f64> = f.pops.iter().map(|p| (1.0 - p[0] - p[1]).max(0.0)).collect();
        max_leakage = Some(leak.iter().cloned().fold(0.0, f64::max));
        let down_up = column(&f.pops, 1);
        let (lo, hi) = (0.5 * t_half, 1.5 * t_half);
        if *s.times.last().expect("non-empty grid") < hi {
            return Err(QstError::SearchWindow(format!(
                "horizon {:.4} does not cover the search window [{lo:.4}, {hi:.4}]",
                s.times.last().expect("non-empty grid")
            )));
        }
        let idx: Vec<usize> = (0..s.times.len()).filter(|&i| s.times[i] >= lo && s.times[i] <= hi).collect();
        let (i0, i1) = (idx[0], idx[idx.len() - 1] + 1);
        full_half_period = Some(refined_peak(&s.times[i0..i1], &down_up[i0..i1]).0);
        let mut traj = Trajectory::new(s.times.clone())?;
        traj.push("p_up_down", column(&f.pops, 0))?;
        traj.push("p_down_up", down_up)?;
        traj.push("leakage", leak)?;
        full = Some(traj);
    }
    Ok(PopulationInversion {
        effective,
        full,
        effective_half_period: t_half,
        formula_half_period: s.params.formula_half_period(),
        full_half_period,
        max_leakage,
        params: s.params,
    })
}

/// Entanglement of formation between the external qubits and entropy of the
/// mediator during the exchange.
pub fn run_correlations(cfg: &TransferConfig) -> Result<Correlations> {
    let s = setup(cfg)?;
    let to_traj = |series: Series| -> Result<Trajectory> {
        let mut t = Trajectory::new(s.times.clone())?;
        t.push("eof", series.corr.iter().map(|c| c.0).collect())?;
        t.push("entropy_mediator", series.corr.iter().map(|c| c.1).collect())?;
        Ok(t)
    };
    let effective = to_traj(run_effective(&s, true)?)?;
    let full = if cfg.full { Some(to_traj(run_full(cfg, &s, true)?)?) } else { None };
    Ok(Correlations { effective, full, effective_half_period: s.h_eff.half_period() })
}

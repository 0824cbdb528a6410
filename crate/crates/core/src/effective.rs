//! Second-order dispersive Hamiltonian for the external qubit pair.
//!
//! The mediator is kept in its lowest two eigenlevels {ψ0, ψ1}. Virtual
//! excursions to the other levels generate, per branch p, a τ1–τ2 exchange
//! and single-qubit Stark shifts.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{QstError, Result};
use crate::models::{build_full, quadrature, FullModelParams};
use crate::qops::{
    hermitian_eigendecomposition, kron, kron_vec, pauli, sigma_plus, Axis, FactorRole, Operator,
    SubsystemLayout, C64, DOWN, ONE, UP, ZERO,
};
use crate::spectral::{diagonalize_qrs, EigenSystem, DEGENERACY_GAP, FORBIDDEN_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channels {
    /// Only the partner level of the doublet mediates (the textbook form).
    Doublet,
    /// Every dipole-allowed mediator level contributes.
    #[default]
    AllAllowed,
}

#[derive(Debug, Clone, Serialize)]
pub struct EffectiveParams {
    pub chi10: C64,
    pub nu10: f64,
    pub omega_ext: [f64; 2],
    pub lambda: [f64; 2],
    pub delta: [f64; 2],
    pub mu: [f64; 2],
    pub j_eff: f64,
}

impl EffectiveParams {
    /// Half-period π/|j_eff| of the exchange term ½ j_eff τ1xτ2x.
    pub fn formula_half_period(&self) -> f64 {
        std::f64::consts::PI / self.j_eff.abs()
    }
}

fn check_dispersive(delta: [f64; 2], lambda: [f64; 2]) -> Result<()> {
    for j in 0..2 {
        let limit = 10.0 * lambda[j];
        if delta[j].abs() < limit || delta[j] == 0.0 {
            return Err(QstError::Resonance { qubit: j, detuning: delta[j].abs(), limit });
        }
    }
    Ok(())
}

pub fn effective_params(es: &EigenSystem, omega_ext: [f64; 2], lambda: [f64; 2]) -> Result<EffectiveParams> {
    if es.len() < 2 {
        return Err(QstError::InvalidParameter("eigensystem needs at least two levels".into()));
    }
    let x = es.matrix_elements(&quadrature(&es.layout, 0)?, 2)?;
    let chi10 = x[(0, 1)];
    let nu10 = es.nu(1, 0);
    let delta = [omega_ext[0] - nu10, omega_ext[1] - nu10];
    let mu = [omega_ext[0] + nu10, omega_ext[1] + nu10];
    check_dispersive(delta, lambda)?;
    let j_eff = chi10.norm_sqr()
        * lambda[0]
        * lambda[1]
        * (1.0 / mu[0] + 1.0 / mu[1] - 1.0 / delta[0] - 1.0 / delta[1]);
    Ok(EffectiveParams { chi10, nu10, omega_ext, lambda, delta, mu, j_eff })
}

/// Second-order coefficients for one mediator branch p.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BranchCoefficients {
    /// ⟨p↓↑|H|p↑↓⟩
    pub flip_flop: C64,
    /// ⟨p↑↑|H|p↓↓⟩
    pub pair: C64,
    /// Stark shift of |↑⟩_j and |↓⟩_j.
    pub stark_up: [f64; 2],
    pub stark_down: [f64; 2],
}

/// Coefficients of branch `p` given the couplings `y[j]` of external qubit j
/// in the mediator eigenbasis (y_j = Σ_r λ_{j,r} X_r).
pub fn branch_coefficients(
    freqs: &[f64],
    y: &[Array2<C64>; 2],
    omega: [f64; 2],
    p: usize,
    channels: Channels,
) -> Result<BranchCoefficients> {
    let k_max = y[0].nrows().min(freqs.len());
    let intermediates: Vec<usize> = match channels {
        Channels::Doublet => vec![1 - p],
        Channels::AllAllowed => (0..k_max).filter(|&k| k != p).collect(),
    };
    let mut c = BranchCoefficients { flip_flop: ZERO, pair: ZERO, stark_up: [0.0; 2], stark_down: [0.0; 2] };
    for k in intermediates {
        let y1 = (y[0][(p, k)], y[0][(k, p)]);
        let y2 = (y[1][(p, k)], y[1][(k, p)]);
        if y1.0.norm() < FORBIDDEN_THRESHOLD && y2.0.norm() < FORBIDDEN_THRESHOLD {
            continue;
        }
        let nu = freqs[k] - freqs[p];
        for j in 0..2 {
            if (omega[j] - nu).abs() < DEGENERACY_GAP {
                return Err(QstError::Resonance { qubit: j, detuning: (omega[j] - nu).abs(), limit: DEGENERACY_GAP });
            }
        }
        let r = |j: usize| 1.0 / (omega[j] - nu);
        let a = |j: usize| 1.0 / (omega[j] + nu);
        // ↑↓ → k↓↓ → ↓↑ and ↑↓ → k↑↑ → ↓↑
        c.flip_flop += y2.0 * y1.1 * 0.5 * (r(0) + r(1)) - y1.0 * y2.1 * 0.5 * (a(0) + a(1));
        // ↓↓ → k↑↓ → ↑↑ and ↓↓ → k↓↑ → ↑↑
        c.pair += y2.0 * y1.1 * 0.5 * (r(1) - a(0)) + y1.0 * y2.1 * 0.5 * (r(0) - a(1));
        for (j, yj) in [y1, y2].iter().enumerate() {
            let w = yj.0.norm_sqr();
            c.stark_up[j] += w * r(j);
            c.stark_down[j] -= w * a(j);
        }
    }
    Ok(c)
}

#[derive(Debug, Clone)]
pub struct EffectiveHamiltonian {
    /// Operator on [level(2), external, external].
    pub operator: Operator,
    pub h0: Operator,
    pub interaction: Operator,
    pub branches: [BranchCoefficients; 2],
    pub channels: Channels,
}

impl EffectiveHamiltonian {
    pub fn layout(&self) -> &SubsystemLayout {
        self.operator.layout()
    }

    /// Half-period of the ground-branch exchange, π/(2|c0|).
    pub fn half_period(&self) -> f64 {
        std::f64::consts::FRAC_PI_2 / self.branches[0].flip_flop.norm()
    }
}

pub fn reduced_layout() -> SubsystemLayout {
    SubsystemLayout::new(&[
        (2, FactorRole::Level),
        (2, FactorRole::ExternalQubit),
        (2, FactorRole::ExternalQubit),
    ])
    .expect("static layout")
}

/// Two-qubit operator from the branch coefficients.
fn branch_operator(c: &BranchCoefficients) -> Array2<C64> {
    let sp = sigma_plus().into_data();
    let sm = sp.t().to_owned();
    let id = Array2::<C64>::eye(2);
    let up = Array2::from_shape_fn((2, 2), |(i, j)| if i == UP && j == UP { ONE } else { ZERO });
    let dn = Array2::from_shape_fn((2, 2), |(i, j)| if i == DOWN && j == DOWN { ONE } else { ZERO });
    let mut m = kron(&sm, &sp) * c.flip_flop + kron(&sp, &sm) * c.flip_flop.conj();
    m = m + kron(&sp, &sp) * c.pair + kron(&sm, &sm) * c.pair.conj();
    for j in 0..2 {
        let (u, d) = (C64::new(c.stark_up[j], 0.0), C64::new(c.stark_down[j], 0.0));
        let local = &up * u + &dn * d;
        m = m + if j == 0 { kron(&local, &id) } else { kron(&id, &local) };
    }
    m
}

pub fn build_effective(ep: &EffectiveParams, es: &EigenSystem, channels: Channels) -> Result<EffectiveHamiltonian> {
    check_dispersive(ep.delta, ep.lambda)?;
    let x = es.matrix_elements(&quadrature(&es.layout, 0)?, es.len())?;
    let y = [x.mapv(|v| v * ep.lambda[0]), x.mapv(|v| v * ep.lambda[1])];
    let branches = [
        branch_coefficients(&es.freqs, &y, ep.omega_ext, 0, channels)?,
        branch_coefficients(&es.freqs, &y, ep.omega_ext, 1, channels)?,
    ];
    let layout = reduced_layout();
    let level = Array2::from_shape_fn((2, 2), |(i, j)| if i == 1 && j == 1 { C64::new(ep.nu10, 0.0) } else { ZERO });
    let z = pauli(Axis::Z).into_data();
    let id2 = Array2::<C64>::eye(2);
    let h0 = kron(&level, &Array2::eye(4))
        + kron(&id2, &kron(&z, &id2)) * (0.5 * ep.omega_ext[0])
        + kron(&id2, &kron(&id2, &z)) * (0.5 * ep.omega_ext[1]);
    let mut v = Array2::<C64>::zeros((8, 8));
    for (p, c) in branches.iter().enumerate() {
        let proj = Array2::from_shape_fn((2, 2), |(i, j)| if i == p && j == p { ONE } else { ZERO });
        v = v + kron(&proj, &branch_operator(c));
    }
    let h0 = Operator::new(layout.clone(), h0)?;
    let interaction = Operator::new(layout, v)?;
    let operator = h0.add(&interaction)?;
    Ok(EffectiveHamiltonian { operator, h0, interaction, branches, channels })
}

/// Mediator eigenbasis state ⊗ external basis states on the reduced layout.
pub fn reduced_ket(level: usize, ext: [usize; 2]) -> Array1<C64> {
    let mut v = Array1::zeros(8);
    v[level * 4 + ext[0] * 2 + ext[1]] = ONE;
    v
}

#[derive(Debug, Clone, Serialize)]
pub struct HybridizationReport {
    pub energies: [f64; 2],
    pub gap: f64,
    /// |⟨ψ0(↑↓ + ↓↑)/√2|state⟩|² for the better-matching state.
    pub overlap_symmetric: f64,
    /// |⟨ψ0(↑↓ − ↓↑)/√2|state⟩|² for the other state.
    pub overlap_antisymmetric: f64,
    pub degenerate: bool,
    pub target_energy: f64,
}

pub const HYBRIDIZATION_WINDOW: f64 = 0.05;

/// Locate the full-model pair built from ψ0 ⊗ {↑↓, ↓↑} near the ground energy
/// plus the mean external frequency.
pub fn hybridization_check(p: &FullModelParams) -> Result<HybridizationReport> {
    let qrs = diagonalize_qrs(&p.qrs)?;
    let h = build_full(p)?;
    let eig = hermitian_eigendecomposition(&h)?;
    let e0 = eig.values[0];
    let target = e0 + 0.5 * (p.omega_ext[0] + p.omega_ext[1]);
    let psi0 = qrs.state(0);
    let ext = |a: usize, b: usize| {
        let mut v = Array1::<C64>::zeros(4);
        v[a * 2 + b] = ONE;
        v
    };
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = kron_vec(psi0, ((ext(UP, DOWN) + ext(DOWN, UP)) * C64::new(s, 0.0)).view());
    let minus = kron_vec(psi0, ((ext(UP, DOWN) - ext(DOWN, UP)) * C64::new(s, 0.0)).view());
    let ov = |a: &Array1<C64>, k: usize| {
        let col = eig.vectors.column(k);
        a.iter().zip(col.iter()).map(|(x, y)| x.conj() * y).sum::<C64>().norm_sqr()
    };
    let mut cand: Vec<(usize, f64)> = (0..eig.values.len())
        .filter(|&k| (eig.values[k] - target).abs() < HYBRIDIZATION_WINDOW)
        .map(|k| (k, ov(&plus, k) + ov(&minus, k)))
        .collect();
    if cand.len() < 2 {
        return Err(QstError::SearchWindow(format!(
            "fewer than two eigenstates within {HYBRIDIZATION_WINDOW} of E = {target:.6}"
        )));
    }
    cand.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (a, b) = (cand[0].0, cand[1].0);
    let (sym, anti) = if ov(&plus, a) >= ov(&plus, b) { (a, b) } else { (b, a) };
    let gap = (eig.values[a] - eig.values[b]).abs();
    Ok(HybridizationReport {
        energies: [eig.values[sym] - e0, eig.values[anti] - e0],
        gap,
        overlap_symmetric: ov(&plus, sym),
        overlap_antisymmetric: ov(&minus, anti),
        degenerate: gap < DEGENERACY_GAP,
        target_energy: target - e0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::QrsParams;

    fn paper_es() -> EigenSystem {
        diagonalize_qrs(&QrsParams::symmetric(0.3, 1.0, 16)).unwrap()
    }

    #[test]
    fn zero_lambda_gives_zero_coupling() {
        let es = paper_es();
        let ep = effective_params(&es, [1.2386; 2], [0.0, 0.02]).unwrap();
        assert_eq!(ep.j_eff, 0.0);
    }

    #[test]
    fn resonance_rejected() {
        let es = paper_es();
        let nu10 = es.nu(1, 0);
        let err = effective_params(&es, [nu10 + 0.05, 1.2], [0.02; 2]).unwrap_err();
        assert!(matches!(err, QstError::Resonance { qubit: 0, .. }));
    }

    #[test]
    fn doublet_exchange_matches_formula() {
        let es = paper_es();
        let w = es.forbidden_resonance().unwrap();
        let ep = effective_params(&es, [w; 2], [0.02; 2]).unwrap();
        let he = build_effective(&ep, &es, Channels::Doublet).unwrap();
        let el = he.operator.data()[(2, 1)].norm(); // ⟨ψ0↓↑|H|ψ0↑↓⟩
        assert!((el - 0.5 * ep.j_eff.abs()).abs() < 1e-15);
        for i in 0..4 {
            for j in 4..8 {
                assert_eq!(he.operator.data()[(i, j)], ZERO);
            }
        }
    }
}

//! Thermal initial states.

use ndarray::Array2;
use serde::Serialize;

use super::bloch::BlochState;
use super::Mediator;
use crate::dynamics::{gibbs_state, uhlmann_fidelity, ThermalParams};
use crate::error::{QstError, Result};
use crate::qops::{kron, DensityMatrix, Operator, C64, ONE, ZERO};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThermalProductReport {
    pub theta: f64,
    /// tr(ρ_G ρ_prod) between the full Gibbs state and ρ_th ⊗ |↓↓⟩⟨↓↓|.
    pub overlap: f64,
    /// Squared Uhlmann fidelity between the same pair, when requested.
    pub uhlmann: Option<f64>,
}

fn site_projector(mediator: &Mediator, j: usize, chi: Option<&BlochState>) -> Array2<C64> {
    let site = mediator.external_site(j);
    let mut m = Array2::zeros((site.levels, site.levels));
    match chi {
        None => m[(site.down, site.down)] = ONE,
        Some(s) => {
            let c = s.amplitudes();
            let idx = [site.up, site.down];
            for a in 0..2 {
                for b in 0..2 {
                    m[(idx[a], idx[b])] = c[a] * c[b].conj();
                }
            }
        }
    }
    m
}

fn product_state(mediator: &Mediator, theta: f64, chi: Option<&BlochState>) -> Result<DensityMatrix> {
    let h = mediator.mediator_hamiltonian()?;
    let rho_th = gibbs_state(&h, &ThermalParams::new(theta)?)?;
    let ext = kron(&site_projector(mediator, 0, chi), &site_projector(mediator, 1, None));
    let layout = mediator.as_dicke().layout();
    let data = kron(rho_th.data(), &ext);
    DensityMatrix::new(Operator::new(layout, data)?)
}

/// ρ_th(mediator) ⊗ |χ⟩⟨χ| ⊗ |↓⟩⟨↓| on the full layout.
pub fn prepare_qst_state(mediator: &Mediator, theta: f64, chi: &BlochState) -> Result<DensityMatrix> {
    mediator.validate()?;
    product_state(mediator, theta, Some(chi))
}

fn gibbs_pair(mediator: &Mediator, theta: f64) -> Result<(DensityMatrix, DensityMatrix)> {
    mediator.validate()?;
    if !(theta >= 0.0) || theta.is_infinite() {
        return Err(QstError::InvalidParameter(format!("theta must be finite and >= 0, got {theta}")));
    }
    let full = gibbs_state(&mediator.full_hamiltonian()?, &ThermalParams::new(theta)?)?;
    Ok((full, product_state(mediator, theta, None)?))
}

fn overlap(g: &DensityMatrix, p: &DensityMatrix) -> f64 {
    let (a, b) = (g.data(), p.data());
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc.re
}

/// Compare the Gibbs state of the coupled system with the product of the
/// mediator Gibbs state and both external qubits in |↓⟩.
pub fn thermal_product_check(mediator: &Mediator, theta: f64) -> Result<ThermalProductReport> {
    let (g, p) = gibbs_pair(mediator, theta)?;
    Ok(ThermalProductReport { theta, overlap: overlap(&g, &p), uhlmann: None })
}

/// As [`thermal_product_check`], also computing the Uhlmann fidelity.
pub fn thermal_product_uhlmann(mediator: &Mediator, theta: f64) -> Result<ThermalProductReport> {
    let (g, p) = gibbs_pair(mediator, theta)?;
    Ok(ThermalProductReport { theta, overlap: overlap(&g, &p), uhlmann: Some(uhlmann_fidelity(&g, &p)?) })
}

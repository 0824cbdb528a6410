//! Experiments: population inversion, correlations, thermal product state and
//! Bloch-averaged state-transfer fidelity.

pub mod bloch;
pub mod qst;
pub mod thermal;
pub mod transfer;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{QstError, Result};
use crate::models::{
    build_dicke, build_dicke_mediator, build_full, build_parity, build_qrs, DickeParams, ExternalSite,
    FullModelParams, ParityKind,
};
use crate::qops::{Operator, SubsystemLayout, C64};
use crate::spectral::{detect_dark_states, diagonalize_with_parity, EigenSystem};
use crate::units::PhysicalScale;

pub use bloch::{bloch_samples, BlochState, SamplingScheme};
pub use qst::{run_qst_fidelity, DressedFrame, QstConfig, QstResult, SampleExtrema};
pub use thermal::{prepare_qst_state, thermal_product_check, thermal_product_uhlmann, ThermalProductReport};
pub use transfer::{run_correlations, run_population_inversion, Correlations, PopulationInversion, TransferConfig};

/// Mediator plus external qubits, single-mode or multi-mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Mediator {
    Rabi(FullModelParams),
    Dicke(DickeParams),
}

impl Mediator {
    pub fn validate(&self) -> Result<()> {
        match self {
            Mediator::Rabi(p) => p.validate(),
            Mediator::Dicke(p) => p.validate(),
        }
    }

    pub fn as_dicke(&self) -> DickeParams {
        match self {
            Mediator::Rabi(p) => p.as_dicke(),
            Mediator::Dicke(p) => p.clone(),
        }
    }

    /// Mediator Hamiltonian alone (cavities and Rabi qubits).
    pub fn mediator_hamiltonian(&self) -> Result<Operator> {
        match self {
            Mediator::Rabi(p) => build_qrs(&p.qrs),
            Mediator::Dicke(p) => build_dicke_mediator(p),
        }
    }

    pub fn full_hamiltonian(&self) -> Result<Operator> {
        match self {
            Mediator::Rabi(p) => build_full(p),
            Mediator::Dicke(p) => build_dicke(p),
        }
    }

    pub fn mediator_parity_kind(&self) -> ParityKind {
        match self {
            Mediator::Rabi(_) => ParityKind::Qrs,
            Mediator::Dicke(_) => ParityKind::Dicke,
        }
    }

    pub fn full_parity_kind(&self) -> ParityKind {
        match self {
            Mediator::Rabi(_) => ParityKind::Full,
            Mediator::Dicke(_) => ParityKind::Dicke,
        }
    }

    pub fn identical_qubits(&self) -> bool {
        self.as_dicke().qubits_identical()
    }

    pub fn mediator_layout(&self) -> SubsystemLayout {
        match self {
            Mediator::Rabi(p) => p.qrs.layout(),
            Mediator::Dicke(p) => p.mediator_layout(),
        }
    }

    /// Parity-labelled mediator eigensystem with dark flags.
    pub fn mediator_eigensystem(&self) -> Result<EigenSystem> {
        let h = self.mediator_hamiltonian()?;
        let p = build_parity(h.layout(), self.mediator_parity_kind())?;
        detect_dark_states(diagonalize_with_parity(&h, &p)?, self.identical_qubits())
    }

    pub fn mode_freqs(&self) -> Vec<f64> {
        self.as_dicke().mode_freqs
    }

    pub fn omega_q(&self) -> [f64; 2] {
        self.as_dicke().omega_q
    }

    pub fn omega_ext(&self) -> [f64; 2] {
        self.as_dicke().omega_ext
    }

    /// λ_{j,r} indexed [r][j].
    pub fn lambda_matrix(&self) -> Vec<[f64; 2]> {
        self.as_dicke().lambda_matrix
    }

    pub fn external_site(&self, j: usize) -> ExternalSite {
        self.as_dicke().external_site(j)
    }

    /// y_j = Σ_r λ_{j,r} X_r over the lowest `k` mediator levels.
    pub fn external_couplings(&self, es: &EigenSystem, k: usize) -> Result<[Array2<C64>; 2]> {
        let lam = self.lambda_matrix();
        let mut y = [Array2::<C64>::zeros((k, k)), Array2::<C64>::zeros((k, k))];
        for (r, row) in lam.iter().enumerate() {
            let x = es.matrix_elements(&crate::models::quadrature(&es.layout, r)?, k)?;
            for j in 0..2 {
                if row[j] != 0.0 {
                    y[j].scaled_add(C64::new(row[j], 0.0), &x);
                }
            }
        }
        Ok(y)
    }
}

/// Loss rates in units of ω_cav.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRates {
    pub kappa: f64,
    pub gamma: f64,
    pub gamma_ext: [f64; 2],
    pub gamma_phi: [f64; 2],
}

impl LossRates {
    pub fn none() -> Self {
        Self { kappa: 0.0, gamma: 0.0, gamma_ext: [0.0; 2], gamma_phi: [0.0; 2] }
    }

    /// From Γ/2π values in MHz.
    pub fn from_mhz(scale: &PhysicalScale, kappa: f64, gamma: f64, gamma_ext: f64, gamma_phi: f64) -> Self {
        Self {
            kappa: scale.rate_from_mhz(kappa),
            gamma: scale.rate_from_mhz(gamma),
            gamma_ext: [scale.rate_from_mhz(gamma_ext); 2],
            gamma_phi: [scale.rate_from_mhz(gamma_phi); 2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.kappa, self.gamma, self.gamma_ext[0], self.gamma_ext[1], self.gamma_phi[0], self.gamma_phi[1]];
        if all.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(QstError::InvalidParameter(format!("loss rates must be non-negative: {self:?}")));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.kappa == 0.0
            && self.gamma == 0.0
            && self.gamma_ext.iter().chain(&self.gamma_phi).all(|r| *r == 0.0)
    }
}

//! Reference parameter sets.
//!
//! Cavity at 8.13 GHz, g = 0.3, identical Rabi qubits at ω_cav, external
//! qubits at the first parity-forbidden mediator transition with λ = 0.02,
//! 100 mK, and loss rates κ/2π = 0.1 MHz, γ/2π = 15 MHz,
//! γ_j/2π = 0.48 MHz, γ_φ/2π = 0.15 MHz.

use crate::error::{QstError, Result};
use crate::models::{build_dicke_mediator, build_parity, DickeParams, FullModelParams, ParityKind, QrsParams};
use crate::protocol::LossRates;
use crate::spectral::{detect_dark_states, diagonalize_qrs, diagonalize_with_parity};
use crate::units::PhysicalScale;

pub const CAVITY_GHZ: f64 = 8.13;
pub const COUPLING: f64 = 0.3;
pub const LAMBDA: f64 = 0.02;
pub const TEMPERATURE_MK: f64 = 100.0;
pub const FOCK_SINGLE_MODE: usize = 16;
pub const FOCK_PER_MODE: usize = 8;

pub fn scale() -> PhysicalScale {
    PhysicalScale::from_ghz(CAVITY_GHZ)
}

pub fn theta() -> f64 {
    scale().theta_from_millikelvin(TEMPERATURE_MK)
}

pub fn losses() -> LossRates {
    LossRates::from_mhz(&scale(), 0.10, 15.0, 0.48, 0.15)
}

pub fn qrs() -> QrsParams {
    QrsParams::symmetric(COUPLING, 1.0, FOCK_SINGLE_MODE)
}

/// External qubits tuned to the first parity-forbidden QRS transition.
pub fn full_model() -> Result<FullModelParams> {
    let q = qrs();
    let w = diagonalize_qrs(&q)?
        .forbidden_resonance()
        .ok_or_else(|| QstError::SearchWindow("no parity-forbidden transition in the truncated spectrum".into()))?;
    Ok(FullModelParams { qrs: q, omega_ext: [w; 2], lambda: [LAMBDA; 2] })
}

/// Two degenerate modes whose bright combination reproduces the single-mode
/// couplings; external qubits at the first parity-forbidden transition.
pub fn dicke() -> Result<DickeParams> {
    let mut p = DickeParams::degenerate(2, COUPLING, LAMBDA, 1.0, 1.0, FOCK_PER_MODE);
    let h = build_dicke_mediator(&p)?;
    let par = build_parity(h.layout(), ParityKind::Dicke)?;
    let es = detect_dark_states(diagonalize_with_parity(&h, &par)?, p.qubits_identical())?;
    let w = es
        .forbidden_resonance()
        .ok_or_else(|| QstError::SearchWindow("no parity-forbidden transition in the truncated spectrum".into()))?;
    p.omega_ext = [w; 2];
    Ok(p)
}

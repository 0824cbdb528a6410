//! Time evolution, thermal states and information measures.

pub mod chebyshev;
pub mod integrate;
pub mod lindblad;
pub mod unitary;

use std::io::{self, Write};

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::csvfmt::{num, write_row};
use crate::error::{QstError, Result};
use crate::qops::{eigh_matrix, hermitian_eigendecomposition, min_eigenvalue, DensityMatrix, Operator, C64};
use crate::spectral::DEGENERACY_GAP;
use crate::units::PhysicalScale;

pub use chebyshev::{bessel_j_sequence, ChebyshevPropagator};
pub use integrate::{integrate_dp5, IntegrationStats, Tolerances};
pub use lindblad::{
    dressed_jump_operators, dressed_rates, evolve_lindblad, DressedRate, EvolveOptions, Jump, JumpMatrix,
    Lindbladian, LindbladSpec, Propagator,
};
pub use unitary::{evolve_unitary, evolve_unitary_with, Hamiltonian, InitialState, StateRef};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    pub theta: f64,
    pub scale: Option<PhysicalScale>,
}

impl ThermalParams {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta >= 0.0) {
            return Err(QstError::InvalidParameter(format!("theta must be >= 0, got {theta}")));
        }
        Ok(Self { theta, scale: None })
    }

    pub fn from_millikelvin(t_mk: f64, scale: PhysicalScale) -> Result<Self> {
        let mut tp = Self::new(scale.theta_from_millikelvin(t_mk))?;
        tp.scale = Some(scale);
        Ok(tp)
    }
}

/// Boltzmann weights exp(−(E−E0)/θ)/Z. θ = 0 spreads weight uniformly over
/// the degenerate ground space, θ = ∞ over all levels.
pub fn boltzmann_weights(energies: &[f64], theta: f64) -> Vec<f64> {
    let e0 = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = if theta == 0.0 {
        energies.iter().map(|e| if e - e0 < DEGENERACY_GAP { 1.0 } else { 0.0 }).collect()
    } else if theta.is_infinite() {
        vec![1.0; energies.len()]
    } else {
        energies.iter().map(|e| (-(e - e0) / theta).exp()).collect()
    };
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

pub fn gibbs_state(h: &Operator, tp: &ThermalParams) -> Result<DensityMatrix> {
    if !(tp.theta >= 0.0) {
        return Err(QstError::InvalidParameter(format!("theta must be >= 0, got {}", tp.theta)));
    }
    let eig = hermitian_eigendecomposition(h)?;
    let p = boltzmann_weights(eig.values.as_slice().expect("contiguous"), tp.theta);
    let v = &eig.vectors;
    let n = v.nrows();
    let mut scaled = v.clone();
    for (j, pj) in p.iter().enumerate() {
        scaled.column_mut(j).mapv_inplace(|c| c * *pj);
    }
    let rho = scaled.dot(&crate::qops::dagger(v));
    debug_assert_eq!(rho.nrows(), n);
    Ok(DensityMatrix::new_unchecked(Operator::new(h.layout().clone(), crate::qops::hermitian_part(&rho))?))
}

/// ⟨χ|ρ|χ⟩.
pub fn state_fidelity(rho: &DensityMatrix, chi: ArrayView1<C64>) -> Result<f64> {
    let f = rho.operator().expectation(chi)?;
    Ok(f.re.clamp(0.0, 1.0))
}

/// Squared Uhlmann fidelity (tr √(√ρ σ √ρ))².
pub fn uhlmann_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(QstError::DimensionMismatch { expected: rho.dim(), found: sigma.dim() });
    }
    let e = eigh_matrix(rho.data())?;
    let mut s = e.vectors.clone();
    for (j, l) in e.values.iter().enumerate() {
        let r = l.max(0.0).sqrt();
        s.column_mut(j).mapv_inplace(|c| c * r);
    }
    let sqrt_rho = s.dot(&crate::qops::dagger(&e.vectors));
    let m = sqrt_rho.dot(&sigma.data().dot(&sqrt_rho));
    let ev = eigh_matrix(&m)?.values;
    let t: f64 = ev.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok(t * t)
}

pub const ENTROPY_CLAMP: f64 = 1e-14;

/// −Σ p ln p in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let ev = rho.eigenvalues()?;
    Ok(ev.iter().filter(|&&p| p > ENTROPY_CLAMP).map(|&p| -p * p.ln()).sum::<f64>().max(0.0))
}

fn check_two_qubit(rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != 4 {
        return Err(QstError::InvalidDensityMatrix(format!("expected a 4x4 two-qubit state, got {}", rho.dim())));
    }
    let tr = rho.operator().trace();
    if (tr.re - 1.0).abs() > 1e-8 || rho.operator().hermiticity_error() > 1e-8 {
        return Err(QstError::InvalidDensityMatrix(format!("trace {tr} or Hermiticity violated")));
    }
    if min_eigenvalue(rho.data())? < -1e-8 {
        return Err(QstError::InvalidDensityMatrix("negative eigenvalue".into()));
    }
    Ok(())
}

/// Wootters concurrence from the eigenvalues of √ρ ρ̃ √ρ, ρ̃ = (σy⊗σy) ρ* (σy⊗σy).
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    check_two_qubit(rho)?;
    let r = rho.data();
    // σy⊗σy is real antidiagonal with signs (−1, 1, 1, −1)
    let sign = [-1.0, 1.0, 1.0, -1.0];
    let tilde = Array2::from_shape_fn((4, 4), |(i, j)| r[(3 - i, 3 - j)].conj() * (sign[i] * sign[j]));
    let e = eigh_matrix(r)?;
    let mut s = e.vectors.clone();
    for (j, l) in e.values.iter().enumerate() {
        let q = l.max(0.0).sqrt();
        s.column_mut(j).mapv_inplace(|c| c * q);
    }
    let sq = s.dot(&crate::qops::dagger(&e.vectors));
    let m = sq.dot(&tilde.dot(&sq));
    let mut l: Vec<f64> = eigh_matrix(&m)?.values.iter().map(|x| x.max(0.0).sqrt()).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    Ok((l[0] - l[1] - l[2] - l[3]).max(0.0))
}

fn binary_entropy(x: f64) -> f64 {
    let h = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    h(x) + h(1.0 - x)
}

/// Entanglement of formation in ebits.
pub fn entanglement_of_formation(rho: &DensityMatrix) -> Result<f64> {
    let c = concurrence(rho)?.min(1.0);
    Ok(binary_entropy(0.5 * (1.0 + (1.0 - c * c).max(0.0).sqrt())).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub max_trace_drift: f64,
    pub min_eigenvalue: Option<f64>,
    pub max_norm_drift: f64,
}

/// Time grid with named observable series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub series: Vec<Series>,
    pub diagnostics: Diagnostics,
}

impl Trajectory {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        check_times(&times)?;
        Ok(Self { times, series: Vec::new(), diagnostics: Diagnostics::default() })
    }

    pub fn push(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.times.len() {
            return Err(QstError::DimensionMismatch { expected: self.times.len(), found: values.len() });
        }
        self.series.push(Series { name: name.to_string(), values });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.series.iter().find(|s| s.name == name).map(|s| s.values.as_slice())
    }

    /// Long format: `t,observable_name,value`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write_row(w, &["t".into(), "observable_name".into(), "value".into()])?;
        for (i, t) in self.times.iter().enumerate() {
            for s in &self.series {
                write_row(w, &[num(*t), s.name.clone(), num(s.values[i])])?;
            }
        }
        Ok(())
    }
}

pub fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(QstError::InvalidParameter("time grid is empty".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(QstError::InvalidParameter("time grid must be strictly increasing".into()));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(QstError::InvalidParameter("time grid contains non-finite values".into()));
    }
    Ok(())
}

pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Maximum of sampled data with a three-point parabolic refinement.
pub fn refined_peak(times: &[f64], values: &[f64]) -> (f64, f64) {
    let (i, &v) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty series");
    if i == 0 || i + 1 >= values.len() {
        return (times[i], v);
    }
    let (y0, y1, y2) = (values[i - 1], v, values[i + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    let h_left = times[i] - times[i - 1];
    let h_right = times[i + 1] - times[i];
    if denom >= 0.0 || (h_left - h_right).abs() > 1e-9 * h_left.max(h_right) {
        return (times[i], v);
    }
    let x = 0.5 * (y0 - y2) / denom;
    (times[i] + x * h_left, y1 - 0.25 * (y0 - y2) * x)
}

pub(crate) fn column_vector(v: ArrayView1<C64>) -> Array2<C64> {
    v.to_owned().insert_axis(ndarray::Axis(1))
}

pub(crate) fn vector_norm(v: ArrayView1<C64>) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

//! Lindblad master equation with dressed and local dissipators.
//!
//! dρ/dt = −i[H, ρ] + Σ_j r_j (L_j ρ L_j† − ½{L_j†L_j, ρ}).
//! The anticommutator terms are folded into H_eff = H − (i/2) Σ r L†L, so
//! for Hermitian ρ the coherent part is −i M + (−i M)† with M = H_eff ρ.

use ndarray::linalg::general_mat_mul;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::chebyshev::ChebyshevPropagator;
use super::integrate::{integrate_dp5, Tolerances};
use super::{check_times, Diagnostics, Trajectory};
use crate::error::{QstError, Result};
use crate::models::{quadrature, rabi_sigma_x};
use crate::qops::{dagger, eigh_matrix, min_eigenvalue, DensityMatrix, Operator, C64, ONE, ZERO};
use crate::spectral::{classify, EigenSystem, TransitionClass, DEGENERACY_GAP, FORBIDDEN_THRESHOLD};

#[derive(Debug, Clone)]
pub struct Jump {
    pub operator: Operator,
    pub rate: f64,
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct LindbladSpec {
    pub hamiltonian: Operator,
    pub dressed_jumps: Vec<Jump>,
    pub local_jumps: Vec<Jump>,
}

impl LindbladSpec {
    pub fn unitary(hamiltonian: Operator) -> Self {
        Self { hamiltonian, dressed_jumps: Vec::new(), local_jumps: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        for j in self.dressed_jumps.iter().chain(&self.local_jumps) {
            if !(j.rate >= 0.0 && j.rate.is_finite()) {
                return Err(QstError::InvalidParameter(format!("jump '{}' has rate {}", j.label, j.rate)));
            }
            if j.operator.layout() != self.hamiltonian.layout() {
                return Err(QstError::LayoutMismatch(format!(
                    "jump '{}' on {} but H on {}",
                    j.label,
                    j.operator.layout(),
                    self.hamiltonian.layout()
                )));
            }
        }
        Ok(())
    }
}

/// Jump operator storage: triplets (row, col, value) or a dense matrix.
#[derive(Debug, Clone)]
pub enum JumpMatrix {
    Sparse(Vec<(usize, usize, C64)>),
    Dense(Array2<C64>),
}

impl JumpMatrix {
    /// Triplet storage when it holds at most `4n` entries.
    pub fn from_dense(m: &Array2<C64>) -> Self {
        let nnz: Vec<(usize, usize, C64)> = m
            .indexed_iter()
            .filter(|(_, v)| **v != ZERO)
            .map(|((i, j), v)| (i, j, *v))
            .collect();
        if nnz.len() <= 4 * m.nrows() {
            JumpMatrix::Sparse(nnz)
        } else {
            JumpMatrix::Dense(m.clone())
        }
    }

    fn to_dense(&self, n: usize) -> Array2<C64> {
        match self {
            JumpMatrix::Dense(m) => m.clone(),
            JumpMatrix::Sparse(t) => {
                let mut m = Array2::zeros((n, n));
                for &(i, j, v) in t {
                    m[(i, j)] += v;
                }
                m
            }
        }
    }
}

/// Precomputed generator acting on Hermitian matrices.
#[derive(Debug, Clone)]
pub struct Lindbladian {
    n: usize,
    h_eff: Array2<C64>,
    jumps: Vec<(f64, JumpMatrix)>,
    spectral_range: f64,
    dissipation: f64,
}

impl Lindbladian {
    pub fn new(spec: &LindbladSpec) -> Result<Self> {
        spec.validate()?;
        let herr = spec.hamiltonian.hermiticity_error();
        if herr > 1e-10 * spec.hamiltonian.max_norm().max(1.0) {
            return Err(QstError::NotHermitian(herr));
        }
        let jumps = spec
            .dressed_jumps
            .iter()
            .chain(&spec.local_jumps)
            .filter(|j| j.rate > 0.0)
            .map(|j| (j.rate, JumpMatrix::from_dense(j.operator.data())))
            .collect();
        Self::from_parts(spec.hamiltonian.data().clone(), jumps)
    }

    pub fn from_parts(h: Array2<C64>, jumps: Vec<(f64, JumpMatrix)>) -> Result<Self> {
        let n = h.nrows();
        let ev = eigh_matrix(&h)?.values;
        let spectral_range = ev[n - 1] - ev[0];
        let mut h_eff = h;
        let mut dissipation = 0.0;
        for (rate, l) in &jumps {
            let ld = l.to_dense(n);
            let ldl = dagger(&ld).dot(&ld);
            let norm2 = eigh_matrix(&ldl)?.values.iter().cloned().fold(0.0, f64::max);
            dissipation += rate * norm2;
            h_eff.scaled_add(C64::new(0.0, -0.5 * rate), &ldl);
        }
        Ok(Self { n, h_eff, jumps, spectral_range, dissipation })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// E_max − E_min of the Hamiltonian.
    pub fn spectral_range(&self) -> f64 {
        self.spectral_range
    }

    /// Σ_j r_j ‖L_j†L_j‖.
    pub fn dissipation(&self) -> f64 {
        self.dissipation
    }

    /// out = L(ρ) for Hermitian ρ. `scratch` is overwritten.
    pub fn apply(&self, rho: &Array2<C64>, out: &mut Array2<C64>, scratch: &mut Array2<C64>) {
        general_mat_mul(ONE, &self.h_eff, rho, ZERO, scratch);
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                // −i M_ij + i conj(M_ji)
                let a = scratch[(i, j)];
                let b = scratch[(j, i)];
                out[(i, j)] = C64::new(a.im + b.im, -a.re + b.re);
            }
        }
        for (rate, l) in &self.jumps {
            match l {
                JumpMatrix::Sparse(t) => {
                    for &(ra, sa, ca) in t {
                        let ca = ca * *rate;
                        for &(rb, sb, cb) in t {
                            out[(ra, rb)] += ca * rho[(sa, sb)] * cb.conj();
                        }
                    }
                }
                JumpMatrix::Dense(m) => {
                    let lr = m.dot(rho);
                    general_mat_mul(C64::new(*rate, 0.0), &lr, &dagger(m), ONE, out);
                }
            }
        }
    }

    /// Convenience wrapper allocating its own buffers.
    pub fn apply_alloc(&self, rho: &Array2<C64>) -> Array2<C64> {
        let mut out = Array2::zeros((self.n, self.n));
        let mut scratch = Array2::zeros((self.n, self.n));
        self.apply(rho, &mut out, &mut scratch);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Propagator {
    /// Dormand–Prince 5(4) with the given tolerances.
    Adaptive(Tolerances),
    /// Chebyshev expansion of the propagator for time-independent generators.
    Chebyshev { tol: f64 },
}

impl Default for Propagator {
    fn default() -> Self {
        Propagator::Adaptive(Tolerances::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub propagator: Propagator,
    /// Check the minimum eigenvalue at every output time.
    pub check_positivity: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { propagator: Propagator::default(), check_positivity: true }
    }
}

pub const TRACE_DRIFT_TOL: f64 = 1e-8;
pub const POSITIVITY_TOL: f64 = 1e-7;

/// Propagate a Hermitian matrix under `l`, calling `on_output` at each time.
pub fn propagate<O>(l: &Lindbladian, rho0: Array2<C64>, times: &[f64], propagator: Propagator, mut on_output: O) -> Result<()>
where
    O: FnMut(usize, f64, &Array2<C64>) -> Result<()>,
{
    check_times(times)?;
    match propagator {
        Propagator::Adaptive(tol) => {
            let n = l.dim();
            let mut scratch = Array2::zeros((n, n));
            integrate_dp5(|_, y, dy| l.apply(y, dy, &mut scratch), times[0], rho0, times, tol, on_output)?;
        }
        Propagator::Chebyshev { tol } => {
            let prop = ChebyshevPropagator::new(l, tol);
            let mut rho = rho0;
            on_output(0, times[0], &rho)?;
            for i in 1..times.len() {
                rho = prop.propagate(&rho, times[i] - times[i - 1]);
                on_output(i, times[i], &rho)?;
            }
        }
    }
    Ok(())
}

/// Evolve ρ0 and record ⟨O⟩ for each named observable.
pub fn evolve_lindblad(
    spec: &LindbladSpec,
    rho0: &DensityMatrix,
    times: &[f64],
    observables: &[(&str, &Operator)],
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    if rho0.layout() != spec.hamiltonian.layout() {
        return Err(QstError::LayoutMismatch(format!("{} vs {}", rho0.layout(), spec.hamiltonian.layout())));
    }
    let l = Lindbladian::new(spec)?;
    let mut traj = Trajectory::new(times.to_vec())?;
    let mut values = vec![Vec::with_capacity(times.len()); observables.len()];
    let mut diag = Diagnostics { min_eigenvalue: opts.check_positivity.then_some(f64::INFINITY), ..Default::default() };
    propagate(&l, rho0.data().clone(), times, opts.propagator, |_, t, rho| {
        let tr = rho.diag().sum();
        let drift = (tr - ONE).norm();
        diag.max_trace_drift = diag.max_trace_drift.max(drift);
        if drift > TRACE_DRIFT_TOL {
            return Err(QstError::Accuracy(format!("trace drift {drift:.3e} at t = {t}")));
        }
        if let Some(m) = diag.min_eigenvalue.as_mut() {
            let e = min_eigenvalue(rho)?;
            *m = m.min(e);
            if e < -POSITIVITY_TOL {
                return Err(QstError::Accuracy(format!("eigenvalue {e:.3e} at t = {t}")));
            }
        }
        for (k, (_, op)) in observables.iter().enumerate() {
            values[k].push(expectation_dm(op.data(), rho));
        }
        Ok(())
    })?;
    for ((name, _), v) in observables.iter().zip(values) {
        traj.push(name, v)?;
    }
    traj.diagnostics = diag;
    Ok(traj)
}

/// Re tr(Oρ).
pub fn expectation_dm(op: &Array2<C64>, rho: &Array2<C64>) -> f64 {
    let n = op.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += op[(i, j)] * rho[(j, i)];
        }
    }
    acc.re
}

/// Downward transition k → j (j < k) with its two rate contributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DressedRate {
    pub lower: usize,
    pub upper: usize,
    pub gamma_x: f64,
    pub gamma_q: f64,
}

impl DressedRate {
    pub fn total(&self) -> f64 {
        self.gamma_x + self.gamma_q
    }
}

/// Dressed rates among the lowest `levels` eigenstates.
///
/// Γ_X = Σ_r (κ/ω_r) ν_kj |X^r_jk|² vanishes exactly for parity- or
/// dark-forbidden pairs. Γ_γ = Σ_i (γ/ω_{q,i}) ν_kj |σ^x_{i,jk}|² vanishes for
/// equal parities; σ_i^x alone breaks exchange symmetry, so it does couple
/// dark and bright levels.
pub fn dressed_rates(
    es: &EigenSystem,
    kappa: f64,
    gamma: f64,
    mode_freqs: &[f64],
    omega_q: [f64; 2],
    levels: usize,
) -> Result<Vec<DressedRate>> {
    if kappa < 0.0 || gamma < 0.0 {
        return Err(QstError::InvalidParameter("loss rates must be non-negative".into()));
    }
    let k = levels.min(es.len());
    let mut out = Vec::new();
    if kappa == 0.0 && gamma == 0.0 {
        return Ok(out);
    }
    let xs: Vec<Array2<C64>> = (0..mode_freqs.len())
        .map(|r| es.matrix_elements(&quadrature(&es.layout, r)?, k))
        .collect::<Result<_>>()?;
    let sx: Vec<Array2<C64>> =
        (0..2).map(|i| es.matrix_elements(&rabi_sigma_x(&es.layout, i)?, k)).collect::<Result<_>>()?;
    for upper in 1..k {
        for lower in 0..upper {
            let nu = es.nu(upper, lower);
            if nu <= DEGENERACY_GAP {
                continue;
            }
            let mut gx = 0.0;
            for (r, x) in xs.iter().enumerate() {
                let a = x[(lower, upper)].norm();
                if classify(es, lower, upper, a) == TransitionClass::Allowed && a >= FORBIDDEN_THRESHOLD {
                    gx += kappa / mode_freqs[r] * nu * a * a;
                }
            }
            let mut gq = 0.0;
            if es.parity[lower] != es.parity[upper] {
                for (i, s) in sx.iter().enumerate() {
                    let a = s[(lower, upper)].norm();
                    if a >= FORBIDDEN_THRESHOLD {
                        gq += gamma / omega_q[i] * nu * a * a;
                    }
                }
            }
            if gx + gq > 0.0 {
                out.push(DressedRate { lower, upper, gamma_x: gx, gamma_q: gq });
            }
        }
    }
    Ok(out)
}

/// |ψ_j⟩⟨ψ_k| on the eigensystem's layout with rate Γ_X + Γ_γ.
pub fn dressed_jump_operators(
    es: &EigenSystem,
    kappa: f64,
    gamma: f64,
    mode_freqs: &[f64],
    omega_q: [f64; 2],
) -> Result<Vec<Jump>> {
    dressed_rates(es, kappa, gamma, mode_freqs, omega_q, es.len())?
        .into_iter()
        .map(|r| {
            let a = es.state(r.lower);
            let b = es.state(r.upper);
            let m = Array2::from_shape_fn((a.len(), a.len()), |(i, j)| a[i] * b[j].conj());
            Ok(Jump {
                operator: Operator::new(es.layout.clone(), m)?,
                rate: r.total(),
                label: format!("psi{}<-psi{}", r.lower, r.upper),
            })
        })
        .collect()
}

/// Mean thermal occupation 1/(e^{ν/θ} − 1).
pub fn bose_occupation(nu: f64, theta: f64) -> f64 {
    if theta <= 0.0 {
        0.0
    } else {
        1.0 / ((nu / theta).exp() - 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::{FactorRole, SubsystemLayout};

    fn two_level() -> SubsystemLayout {
        SubsystemLayout::single(2, FactorRole::Level).unwrap()
    }

    #[test]
    fn single_jump_decay_both_propagators() {
        let l = two_level();
        let gamma = 0.3;
        let mut lower = Operator::zeros(&l).into_data();
        lower[(0, 1)] = ONE;
        let spec = LindbladSpec {
            hamiltonian: Operator::zeros(&l),
            dressed_jumps: vec![Jump { operator: Operator::new(l.clone(), lower).unwrap(), rate: gamma, label: "decay".into() }],
            local_jumps: vec![],
        };
        let rho0 = DensityMatrix::new(Operator::from_diagonal(&l, &[0.0, 1.0]).unwrap()).unwrap();
        let p1 = Operator::from_diagonal(&l, &[0.0, 1.0]).unwrap();
        let times: Vec<f64> = (0..11).map(|i| i as f64).collect();
        for prop in [Propagator::default(), Propagator::Chebyshev { tol: 1e-13 }] {
            let opts = EvolveOptions { propagator: prop, check_positivity: true };
            let tr = evolve_lindblad(&spec, &rho0, &times, &[("p1", &p1)], &opts).unwrap();
            for (t, v) in tr.times.iter().zip(tr.get("p1").unwrap()) {
                assert!((v - (-gamma * t).exp()).abs() < 1e-6, "{prop:?} t={t}: {v}");
            }
        }
    }

    #[test]
    fn negative_rate_rejected() {
        let l = two_level();
        let spec = LindbladSpec {
            hamiltonian: Operator::zeros(&l),
            dressed_jumps: vec![],
            local_jumps: vec![Jump { operator: Operator::identity(&l), rate: -1.0, label: "bad".into() }],
        };
        assert!(Lindbladian::new(&spec).is_err());
    }
}

//! Parity-resolved spectra, dark states and dipole selection rules.

use ndarray::{s, Array2};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{QstError, Result};
use crate::models::{build_parity, build_qrs, singlet_projector, ParityKind, QrsParams};
use crate::qops::{dagger, eigh_matrix, hermitian_eigendecomposition, Operator, SubsystemLayout, C64};

/// Eigenvalues closer than this are treated as one degenerate cluster.
pub const DEGENERACY_GAP: f64 = 1e-9;
/// |X_jk| below this counts as a vanishing matrix element.
pub const FORBIDDEN_THRESHOLD: f64 = 1e-10;
pub const DARK_FIDELITY: f64 = 1.0 - 1e-8;
pub const COMMUTATOR_TOL: f64 = 1e-8;
const PARITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// Eigenfrequencies ν_j, ascending.
    pub freqs: Vec<f64>,
    /// Eigenvectors as columns.
    pub states: Array2<C64>,
    pub parity: Vec<i8>,
    pub dark: Vec<bool>,
    pub layout: SubsystemLayout,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// ν_jk = ν_j − ν_k.
    pub fn nu(&self, j: usize, k: usize) -> f64 {
        self.freqs[j] - self.freqs[k]
    }

    pub fn state(&self, j: usize) -> ndarray::ArrayView1<'_, C64> {
        self.states.column(j)
    }

    /// Matrix of `op` in the eigenbasis, restricted to the lowest `k` levels.
    pub fn matrix_elements(&self, op: &Operator, k: usize) -> Result<Array2<C64>> {
        if op.layout() != &self.layout {
            return Err(QstError::LayoutMismatch(format!("{} vs {}", op.layout(), self.layout)));
        }
        let v = self.states.slice(s![.., ..k]);
        let vd = dagger(&v.to_owned());
        Ok(vd.dot(&op.data().dot(&v)))
    }

    /// Excitation energy of the lowest bright excited level sharing the
    /// ground-state parity, i.e. the first parity-forbidden transition.
    pub fn forbidden_resonance(&self) -> Option<f64> {
        let p0 = *self.parity.first()?;
        (1..self.len())
            .find(|&k| self.parity[k] == p0 && !self.dark[k] && self.nu(k, 0) > DEGENERACY_GAP)
            .map(|k| self.nu(k, 0))
    }
}

/// Split ascending eigenvalues into clusters of near-degenerate levels.
pub fn degenerate_clusters(freqs: &[f64], gap: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=freqs.len() {
        if i == freqs.len() || freqs[i] - freqs[i - 1] >= gap {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Rotate the columns `cols` of `v` so they diagonalize `op` within their span.
fn rotate_block(v: &mut Array2<C64>, cols: &[usize], op: &Array2<C64>) -> Result<()> {
    if cols.len() < 2 {
        return Ok(());
    }
    let n = v.nrows();
    let mut sub = Array2::<C64>::zeros((n, cols.len()));
    for (c, &j) in cols.iter().enumerate() {
        sub.column_mut(c).assign(&v.column(j));
    }
    let m = dagger(&sub).dot(&op.dot(&sub));
    let w = eigh_matrix(&m)?.vectors;
    let rotated = sub.dot(&w);
    for (c, &j) in cols.iter().enumerate() {
        v.column_mut(j).assign(&rotated.column(c));
    }
    Ok(())
}

pub fn diagonalize_with_parity(h: &Operator, p: &Operator) -> Result<EigenSystem> {
    let comm = h.commutator(p)?.max_norm();
    if comm > COMMUTATOR_TOL {
        return Err(QstError::SymmetryBroken(comm));
    }
    let eig = hermitian_eigendecomposition(h)?;
    let freqs = eig.values.to_vec();
    let mut v = eig.vectors;
    for cl in degenerate_clusters(&freqs, DEGENERACY_GAP) {
        let cols: Vec<usize> = cl.collect();
        rotate_block(&mut v, &cols, p.data())?;
    }
    let mut parity = Vec::with_capacity(freqs.len());
    for j in 0..freqs.len() {
        let e = p.expectation(v.column(j))?.re;
        if e.abs() < 1.0 - PARITY_TOL {
            return Err(QstError::AmbiguousParity { index: j, expectation: e });
        }
        parity.push(if e > 0.0 { 1 } else { -1 });
    }
    let n = freqs.len();
    Ok(EigenSystem { freqs, states: v, parity, dark: vec![false; n], layout: h.layout().clone() })
}

/// Flag singlet ⊗ Fock eigenstates. Degenerate same-parity clusters are
/// rotated onto singlet-projector eigenstates first, so crossings of the dark
/// ladder with bright levels are resolved by spin symmetry, not energy.
pub fn detect_dark_states(mut es: EigenSystem, identical_qubits: bool) -> Result<EigenSystem> {
    es.dark = vec![false; es.len()];
    if !identical_qubits {
        log::warn!("Rabi qubits are not identical; dark-state detection skipped");
        return Ok(es);
    }
    let singlet = singlet_projector(&es.layout)?;
    for cl in degenerate_clusters(&es.freqs, DEGENERACY_GAP) {
        for sign in [1i8, -1] {
            let cols: Vec<usize> = cl.clone().filter(|&j| es.parity[j] == sign).collect();
            rotate_block(&mut es.states, &cols, singlet.data())?;
        }
    }
    for j in 0..es.len() {
        es.dark[j] = singlet.expectation(es.states.column(j))?.re > DARK_FIDELITY;
    }
    Ok(es)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransitionClass {
    Allowed,
    ParityForbidden,
    DarkForbidden,
}

#[derive(Debug, Clone)]
pub struct TransitionTable {
    pub x: Array2<C64>,
    pub class: Array2<TransitionClass>,
}

impl TransitionTable {
    pub fn abs(&self, j: usize, k: usize) -> f64 {
        self.x[(j, k)].norm()
    }
}

pub fn classify(es: &EigenSystem, j: usize, k: usize, x_abs: f64) -> TransitionClass {
    if es.dark[j] != es.dark[k] {
        TransitionClass::DarkForbidden
    } else if es.parity[j] == es.parity[k] && x_abs < FORBIDDEN_THRESHOLD {
        TransitionClass::ParityForbidden
    } else {
        TransitionClass::Allowed
    }
}

pub fn transition_elements(es: &EigenSystem, coupling: &Operator) -> Result<TransitionTable> {
    let x = es.matrix_elements(coupling, es.len())?;
    let n = es.len();
    let class = Array2::from_shape_fn((n, n), |(j, k)| classify(es, j, k, x[(j, k)].norm()));
    Ok(TransitionTable { x, class })
}

pub struct SweepPoint {
    pub hamiltonian: Operator,
    pub parity: Operator,
    pub identical_qubits: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub param: f64,
    pub level_index: usize,
    pub freq: f64,
    pub parity: i8,
    pub dark: bool,
}

/// Lowest `levels` eigenfrequencies per grid point, evaluated in parallel and
/// assembled in grid order.
pub fn spectrum_sweep<F>(param: &str, grid: &[f64], levels: usize, build: F) -> Result<Vec<SpectrumRow>>
where
    F: Fn(f64) -> Result<SweepPoint> + Sync,
{
    if grid.is_empty() {
        return Err(QstError::InvalidParameter("sweep grid is empty".into()));
    }
    let per_point: Vec<Result<Vec<SpectrumRow>>> = grid
        .par_iter()
        .map(|&x| {
            let pt = build(x)?;
            let es = diagonalize_with_parity(&pt.hamiltonian, &pt.parity)?;
            let es = detect_dark_states(es, pt.identical_qubits)?;
            Ok((0..levels.min(es.len()))
                .map(|k| SpectrumRow {
                    param: x,
                    level_index: k,
                    freq: es.freqs[k],
                    parity: es.parity[k],
                    dark: es.dark[k],
                })
                .collect())
        })
        .collect();
    let mut rows = Vec::with_capacity(grid.len() * levels);
    for (index, (r, &value)) in per_point.into_iter().zip(grid).enumerate() {
        match r {
            Ok(v) => rows.extend(v),
            Err(e) => {
                return Err(QstError::GridPoint {
                    index,
                    param: param.to_string(),
                    value,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(rows)
}

pub fn diagonalize_qrs(p: &QrsParams) -> Result<EigenSystem> {
    let h = build_qrs(p)?;
    let par = build_parity(h.layout(), ParityKind::Qrs)?;
    detect_dark_states(diagonalize_with_parity(&h, &par)?, p.qubits_identical())
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub n_fock: usize,
    pub n_fock_reference: usize,
    pub levels: usize,
    pub shifts: Vec<f64>,
    pub max_shift: f64,
    pub tolerance: f64,
    pub converged: bool,
}

pub const CONVERGENCE_TOL: f64 = 1e-8;
pub const CONVERGENCE_EXTRA_FOCK: usize = 6;

/// Compare the lowest `levels` eigenvalues at n_fock and n_fock + 6.
pub fn convergence_audit_with<F>(n_fock: usize, levels: usize, build: F) -> Result<ConvergenceReport>
where
    F: Fn(usize) -> Result<Operator>,
{
    let reference = n_fock + CONVERGENCE_EXTRA_FOCK;
    let a = hermitian_eigendecomposition(&build(n_fock)?)?.values;
    let b = hermitian_eigendecomposition(&build(reference)?)?.values;
    let k = levels.min(a.len()).min(b.len());
    let shifts: Vec<f64> = (0..k).map(|i| (a[i] - b[i]).abs()).collect();
    let max_shift = shifts.iter().cloned().fold(0.0, f64::max);
    Ok(ConvergenceReport {
        n_fock,
        n_fock_reference: reference,
        levels: k,
        converged: max_shift <= CONVERGENCE_TOL && k == levels,
        shifts,
        max_shift,
        tolerance: CONVERGENCE_TOL,
    })
}

pub fn convergence_audit(p: &QrsParams, levels: usize) -> Result<ConvergenceReport> {
    convergence_audit_with(p.n_fock, levels, |n| build_qrs(&QrsParams { n_fock: n, ..p.clone() }))
}

/// Largest forbidden and smallest allowed quadrature element among the
/// lowest `levels` states. Forbidden means equal parity or a dark state
/// involved; each pair takes the largest |X| over the given modes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SelectionAudit {
    pub levels: usize,
    pub max_forbidden: f64,
    pub min_allowed: f64,
    pub allowed_pairs: usize,
    pub dark_states: usize,
}

pub fn selection_audit(es: &EigenSystem, levels: usize) -> Result<SelectionAudit> {
    let k = levels.min(es.len());
    let modes = es.layout.slots_of(crate::qops::FactorRole::Cavity).len();
    let xs = (0..modes)
        .map(|r| es.matrix_elements(&crate::models::quadrature(&es.layout, r)?, k))
        .collect::<Result<Vec<_>>>()?;
    let mut a = SelectionAudit { levels: k, max_forbidden: 0.0, min_allowed: f64::INFINITY, allowed_pairs: 0, dark_states: 0 };
    a.dark_states = es.dark[..k].iter().filter(|d| **d).count();
    for j in 0..k {
        for l in (j + 1)..k {
            if es.dark[j] && es.dark[l] {
                // the dark ladder is closed under the quadrature
                continue;
            }
            let x = xs.iter().map(|m| m[(j, l)].norm()).fold(0.0, f64::max);
            if es.parity[j] == es.parity[l] || es.dark[j] || es.dark[l] {
                a.max_forbidden = a.max_forbidden.max(x);
            } else {
                a.min_allowed = a.min_allowed.min(x);
                a.allowed_pairs += 1;
            }
        }
    }
    Ok(a)
}

/// Dark levels of a sweep against the ladder N·ω_cav.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DarkLadder {
    /// max |E − N ω_cav| over the distinct dark energies at each point.
    pub max_offset: f64,
    /// max |ΔE − ω_cav| between consecutive distinct dark energies.
    pub max_spacing_error: f64,
    /// Fewest distinct dark energies found at any grid point.
    pub min_rungs: usize,
}

pub fn dark_ladder(rows: &[SpectrumRow], omega_cav: f64) -> DarkLadder {
    let mut out = DarkLadder { max_offset: 0.0, max_spacing_error: 0.0, min_rungs: usize::MAX };
    let mut params: Vec<f64> = rows.iter().map(|r| r.param).collect();
    params.dedup();
    for p in params {
        let mut e: Vec<f64> = rows.iter().filter(|r| r.param == p && r.dark).map(|r| r.freq).collect();
        e.sort_by(f64::total_cmp);
        e.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        out.min_rungs = out.min_rungs.min(e.len());
        for (n, v) in e.iter().enumerate() {
            out.max_offset = out.max_offset.max((v - n as f64 * omega_cav).abs());
        }
        for w in e.windows(2) {
            out.max_spacing_error = out.max_spacing_error.max((w[1] - w[0] - omega_cav).abs());
        }
    }
    if out.min_rungs == usize::MAX {
        out.min_rungs = 0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clusters() {
        let c = degenerate_clusters(&[0.0, 1.0, 1.0 + 1e-12, 2.0], 1e-9);
        assert_eq!(c, vec![0..1, 1..3, 3..4]);
    }

    #[test]
    fn zero_coupling_parity_and_dark() {
        let es = diagonalize_qrs(&QrsParams::symmetric(0.0, 1.0, 8)).unwrap();
        assert_eq!(es.parity[0], 1);
        // singlet ⊗ |0⟩ at energy 0 is degenerate with |↓↓,1⟩ and |↑↓+↓↑⟩|0⟩
        let dark: Vec<usize> = (0..es.len()).filter(|&j| es.dark[j] && es.freqs[j].abs() < 1e-9).collect();
        assert_eq!(dark.len(), 1);
    }

    #[test]
    fn sweep_reports_grid_point() {
        let err = spectrum_sweep("g", &[0.1, -1.0], 4, |g| {
            let p = QrsParams::symmetric(g, 1.0, 4);
            let h = build_qrs(&p)?;
            let parity = build_parity(h.layout(), ParityKind::Qrs)?;
            Ok(SweepPoint { hamiltonian: h, parity, identical_qubits: true })
        })
        .unwrap_err();
        assert!(matches!(err, QstError::GridPoint { index: 1, .. }));
    }
}

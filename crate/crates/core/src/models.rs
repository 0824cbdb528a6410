//! Hamiltonian and symmetry-operator builders.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{QstError, Result};
use crate::qops::{
    embed, fock_annihilation, pauli, Axis, FactorRole, Operator, SubsystemLayout, C64, ONE,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrsParams {
    pub omega_cav: f64,
    pub omega_q: [f64; 2],
    pub g: [f64; 2],
    pub n_fock: usize,
}

impl QrsParams {
    pub fn symmetric(g: f64, omega_q: f64, n_fock: usize) -> Self {
        Self { omega_cav: 1.0, omega_q: [omega_q; 2], g: [g; 2], n_fock }
    }

    pub fn validate(&self) -> Result<()> {
        positive("omega_cav", self.omega_cav)?;
        positive("omega_q[0]", self.omega_q[0])?;
        positive("omega_q[1]", self.omega_q[1])?;
        for (i, g) in self.g.iter().enumerate() {
            non_negative(&format!("g[{i}]"), *g)?;
        }
        if self.n_fock < 2 {
            return Err(QstError::InvalidDimension(format!("n_fock = {} < 2", self.n_fock)));
        }
        Ok(())
    }

    pub fn qubits_identical(&self) -> bool {
        self.omega_q[0] == self.omega_q[1] && self.g[0] == self.g[1]
    }

    pub fn layout(&self) -> SubsystemLayout {
        SubsystemLayout::new(&[
            (self.n_fock, FactorRole::Cavity),
            (2, FactorRole::RabiQubit),
            (2, FactorRole::RabiQubit),
        ])
        .expect("validated dims")
    }
}

impl Default for QrsParams {
    fn default() -> Self {
        Self::symmetric(0.3, 1.0, 16)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullModelParams {
    pub qrs: QrsParams,
    pub omega_ext: [f64; 2],
    pub lambda: [f64; 2],
}

impl FullModelParams {
    pub fn validate(&self) -> Result<()> {
        self.qrs.validate()?;
        positive("omega_ext[0]", self.omega_ext[0])?;
        positive("omega_ext[1]", self.omega_ext[1])?;
        non_negative("lambda[0]", self.lambda[0])?;
        non_negative("lambda[1]", self.lambda[1])
    }

    pub fn layout(&self) -> SubsystemLayout {
        self.qrs.layout().tensor(&external_layout(2))
    }

    /// Equivalent single-mode Dicke description (same matrix).
    pub fn as_dicke(&self) -> DickeParams {
        DickeParams {
            mode_freqs: vec![self.qrs.omega_cav],
            g_matrix: vec![self.qrs.g],
            lambda_matrix: vec![self.lambda],
            omega_q: self.qrs.omega_q,
            omega_ext: self.omega_ext,
            n_fock: self.qrs.n_fock,
            external_levels: 2,
            anharmonicity: 0.0,
        }
    }
}

/// Multi-mode mediator. `g_matrix[r]` holds (g_{r,1}, g_{r,2}) and
/// `lambda_matrix[r]` holds (λ_{1,r}, λ_{2,r}).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DickeParams {
    pub mode_freqs: Vec<f64>,
    pub g_matrix: Vec<[f64; 2]>,
    pub lambda_matrix: Vec<[f64; 2]>,
    pub omega_q: [f64; 2],
    pub omega_ext: [f64; 2],
    pub n_fock: usize,
    pub external_levels: usize,
    pub anharmonicity: f64,
}

impl DickeParams {
    /// `modes` degenerate modes at ω_cav with g/√M and λ/√M, so the bright
    /// collective mode carries the single-mode couplings.
    pub fn degenerate(
        modes: usize,
        g: f64,
        lambda: f64,
        omega_q: f64,
        omega_ext: f64,
        n_fock: usize,
    ) -> Self {
        let s = (modes.max(1) as f64).sqrt();
        Self {
            mode_freqs: vec![1.0; modes],
            g_matrix: vec![[g / s; 2]; modes],
            lambda_matrix: vec![[lambda / s; 2]; modes],
            omega_q: [omega_q; 2],
            omega_ext: [omega_ext; 2],
            n_fock,
            external_levels: 2,
            anharmonicity: 0.0,
        }
    }

    pub fn modes(&self) -> usize {
        self.mode_freqs.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.mode_freqs.len();
        if m == 0 {
            return Err(QstError::InvalidParameter("Dicke manifold needs at least one mode".into()));
        }
        if self.g_matrix.len() != m || self.lambda_matrix.len() != m {
            return Err(QstError::InvalidParameter(format!(
                "coupling matrices must have one row per mode ({m})"
            )));
        }
        for (r, w) in self.mode_freqs.iter().enumerate() {
            positive(&format!("mode_freqs[{r}]"), *w)?;
        }
        for w in self.omega_q.iter().chain(&self.omega_ext) {
            positive("qubit frequency", *w)?;
        }
        for row in self.g_matrix.iter().chain(&self.lambda_matrix) {
            for c in row {
                non_negative("coupling", *c)?;
            }
        }
        if self.n_fock < 2 {
            return Err(QstError::InvalidDimension(format!("n_fock = {} < 2", self.n_fock)));
        }
        if !(self.external_levels == 2 || self.external_levels == 3) {
            return Err(QstError::InvalidParameter(format!(
                "external_levels must be 2 or 3, got {}",
                self.external_levels
            )));
        }
        Ok(())
    }

    pub fn qubits_identical(&self) -> bool {
        self.omega_q[0] == self.omega_q[1] && self.g_matrix.iter().all(|r| r[0] == r[1])
    }

    pub fn mediator_layout(&self) -> SubsystemLayout {
        let mut f: Vec<(usize, FactorRole)> =
            self.mode_freqs.iter().map(|_| (self.n_fock, FactorRole::Cavity)).collect();
        f.push((2, FactorRole::RabiQubit));
        f.push((2, FactorRole::RabiQubit));
        SubsystemLayout::new(&f).expect("validated dims")
    }

    pub fn layout(&self) -> SubsystemLayout {
        self.mediator_layout().tensor(&external_layout(self.external_levels))
    }

    pub fn external_site(&self, j: usize) -> ExternalSite {
        ExternalSite::new(self.external_levels, self.omega_ext[j], self.anharmonicity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
    pub target: usize,
}

/// Local operators of one external site.
///
/// Two-level sites use the spin convention (|↑⟩ at index 0). Three-level
/// transmons use the ladder order |0⟩,|1⟩,|2⟩ with the qubit pair
/// |↑⟩ = |1⟩, |↓⟩ = |0⟩; `x` and `z` restrict to τx and τz on that pair.
#[derive(Debug, Clone)]
pub struct ExternalSite {
    pub levels: usize,
    pub energies: Vec<f64>,
    pub x: Array2<C64>,
    pub z: Array2<C64>,
    pub up: usize,
    pub down: usize,
}

impl ExternalSite {
    pub fn new(levels: usize, omega: f64, anharmonicity: f64) -> Self {
        if levels == 2 {
            Self {
                levels,
                energies: vec![0.5 * omega, -0.5 * omega],
                x: pauli(Axis::X).into_data(),
                z: pauli(Axis::Z).into_data(),
                up: 0,
                down: 1,
            }
        } else {
            let mut x = Array2::zeros((3, 3));
            for n in 1..3 {
                let v = C64::new((n as f64).sqrt(), 0.0);
                x[(n - 1, n)] = v;
                x[(n, n - 1)] = v;
            }
            let mut z = Array2::zeros((3, 3));
            for n in 0..3 {
                z[(n, n)] = C64::new(2.0 * n as f64 - 1.0, 0.0);
            }
            Self {
                levels,
                energies: vec![-0.5 * omega, 0.5 * omega, 1.5 * omega - anharmonicity],
                x,
                z,
                up: 1,
                down: 0,
            }
        }
    }

    pub fn hamiltonian(&self) -> Array2<C64> {
        let mut h = Array2::zeros((self.levels, self.levels));
        for (k, e) in self.energies.iter().enumerate() {
            h[(k, k)] = C64::new(*e, 0.0);
        }
        h
    }

    /// Parity sign per level: −1 on |↓⟩, alternating up the ladder.
    pub fn parity_signs(&self) -> Vec<f64> {
        if self.levels == 2 {
            vec![1.0, -1.0]
        } else {
            (0..self.levels).map(|n| if n % 2 == 1 { 1.0 } else { -1.0 }).collect()
        }
    }
}

fn external_layout(levels: usize) -> SubsystemLayout {
    let role = if levels == 2 { FactorRole::ExternalQubit } else { FactorRole::Transmon };
    SubsystemLayout::new(&[(levels, role), (levels, role)]).expect("levels >= 2")
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(QstError::InvalidParameter(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(QstError::InvalidParameter(format!("{name} must be non-negative, got {v}")));
    }
    Ok(())
}

/// Kronecker product over all factors, identity where no operator is given.
fn product_operator(dims: &[usize], factors: &[(usize, &Array2<C64>)]) -> Array2<C64> {
    let mut out = Array2::from_elem((1, 1), ONE);
    for (slot, &d) in dims.iter().enumerate() {
        let next = match factors.iter().find(|(s, _)| *s == slot) {
            Some((_, m)) => crate::qops::kron(&out, m),
            None => crate::qops::kron(&out, &Array2::eye(d)),
        };
        out = next;
    }
    out
}

fn add_diag(h: &mut Array2<C64>, diag: &[f64]) {
    for (i, v) in diag.iter().enumerate() {
        h[(i, i)] += C64::new(*v, 0.0);
    }
}

/// Diagonal of Σ_slot f_slot(digit) on `layout`.
fn diagonal_sum(layout: &SubsystemLayout, per_slot: &[(usize, Vec<f64>)]) -> Vec<f64> {
    (0..layout.total_dim())
        .map(|i| {
            let d = layout.digits(i);
            per_slot.iter().map(|(s, v)| v[d[*s]]).sum()
        })
        .collect()
}

struct Assembly<'a> {
    mode_freqs: &'a [f64],
    g_matrix: &'a [[f64; 2]],
    omega_q: [f64; 2],
    n_fock: usize,
    external: Option<(Vec<ExternalSite>, &'a [[f64; 2]])>,
}

fn assemble(a: Assembly) -> Result<Operator> {
    let m = a.mode_freqs.len();
    let mut f: Vec<(usize, FactorRole)> = (0..m).map(|_| (a.n_fock, FactorRole::Cavity)).collect();
    f.push((2, FactorRole::RabiQubit));
    f.push((2, FactorRole::RabiQubit));
    if let Some((sites, _)) = &a.external {
        let role = if sites[0].levels == 2 { FactorRole::ExternalQubit } else { FactorRole::Transmon };
        f.push((sites[0].levels, role));
        f.push((sites[1].levels, role));
    }
    let layout = SubsystemLayout::new(&f)?;
    let dims = layout.dims().to_vec();
    let n = layout.total_dim();

    let mut per_slot: Vec<(usize, Vec<f64>)> = Vec::new();
    for (r, w) in a.mode_freqs.iter().enumerate() {
        per_slot.push((r, (0..a.n_fock).map(|k| w * k as f64).collect()));
    }
    for i in 0..2 {
        let w = a.omega_q[i];
        per_slot.push((m + i, vec![0.5 * w, -0.5 * w]));
    }
    if let Some((sites, _)) = &a.external {
        for (j, site) in sites.iter().enumerate() {
            per_slot.push((m + 2 + j, site.energies.clone()));
        }
    }
    let mut h = Array2::<C64>::zeros((n, n));
    add_diag(&mut h, &diagonal_sum(&layout, &per_slot));

    let a_op = fock_annihilation(a.n_fock)?.into_data();
    let quad = &a_op + &crate::qops::dagger(&a_op);
    let sx = pauli(Axis::X).into_data();
    for r in 0..m {
        for i in 0..2 {
            let g = a.g_matrix[r][i];
            if g != 0.0 {
                let t = product_operator(&dims, &[(r, &quad), (m + i, &sx)]);
                h.scaled_add(C64::new(g, 0.0), &t);
            }
        }
        if let Some((sites, lambda)) = &a.external {
            for (j, site) in sites.iter().enumerate() {
                let l = lambda[r][j];
                if l != 0.0 {
                    let t = product_operator(&dims, &[(r, &quad), (m + 2 + j, &site.x)]);
                    h.scaled_add(C64::new(l, 0.0), &t);
                }
            }
        }
    }
    Operator::new(layout, h)
}

/// ω_cav a†a + Σ_i (ω_{q,i}/2) σ_i^z + g_i σ_i^x (a + a†) on [n_fock, 2, 2].
pub fn build_qrs(p: &QrsParams) -> Result<Operator> {
    p.validate()?;
    assemble(Assembly {
        mode_freqs: &[p.omega_cav],
        g_matrix: &[p.g],
        omega_q: p.omega_q,
        n_fock: p.n_fock,
        external: None,
    })
}

/// QRS plus Σ_j (ω_j/2) τ_j^z + λ_j τ_j^x (a + a†) on [n_fock, 2, 2, 2, 2].
pub fn build_full(p: &FullModelParams) -> Result<Operator> {
    p.validate()?;
    build_dicke(&p.as_dicke())
}

/// Multi-mode mediator alone (no external sites).
pub fn build_dicke_mediator(p: &DickeParams) -> Result<Operator> {
    p.validate()?;
    assemble(Assembly {
        mode_freqs: &p.mode_freqs,
        g_matrix: &p.g_matrix,
        omega_q: p.omega_q,
        n_fock: p.n_fock,
        external: None,
    })
}

pub fn build_dicke(p: &DickeParams) -> Result<Operator> {
    p.validate()?;
    let sites = vec![p.external_site(0), p.external_site(1)];
    assemble(Assembly {
        mode_freqs: &p.mode_freqs,
        g_matrix: &p.g_matrix,
        omega_q: p.omega_q,
        n_fock: p.n_fock,
        external: Some((sites, &p.lambda_matrix)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParityKind {
    Qrs,
    Full,
    Dicke,
}

/// σ1z σ2z Π_r e^{iπ a_r† a_r} extended by the external-site parities.
pub fn build_parity(layout: &SubsystemLayout, kind: ParityKind) -> Result<Operator> {
    let roles = layout.roles();
    let cav = roles.iter().take_while(|r| **r == FactorRole::Cavity).count();
    let rest = &roles[cav..];
    let ext_ok = |r: &[FactorRole]| {
        r.len() == 2
            && r[0] == r[1]
            && matches!(r[0], FactorRole::ExternalQubit | FactorRole::Transmon)
    };
    let qubits_ok = rest.len() >= 2 && rest[0] == FactorRole::RabiQubit && rest[1] == FactorRole::RabiQubit;
    let ok = qubits_ok
        && match kind {
            ParityKind::Qrs => cav == 1 && rest.len() == 2,
            ParityKind::Full => cav == 1 && ext_ok(&rest[2..]),
            ParityKind::Dicke => cav >= 1 && (rest.len() == 2 || ext_ok(&rest[2..])),
        };
    if !ok {
        return Err(QstError::LayoutMismatch(format!("layout {layout} is not a {kind:?} layout")));
    }
    let dims = layout.dims();
    let per_slot: Vec<(usize, Vec<f64>)> = dims
        .iter()
        .zip(roles)
        .enumerate()
        .map(|(s, (&d, role))| {
            let signs = match role {
                FactorRole::Cavity => (0..d).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect(),
                FactorRole::RabiQubit | FactorRole::ExternalQubit => vec![1.0, -1.0],
                FactorRole::Transmon => ExternalSite::new(d, 1.0, 0.0).parity_signs(),
                FactorRole::Level => unreachable!("checked above"),
            };
            (s, signs)
        })
        .collect();
    let diag: Vec<f64> = (0..layout.total_dim())
        .map(|i| {
            let d = layout.digits(i);
            per_slot.iter().map(|(s, v)| v[d[*s]]).product()
        })
        .collect();
    Operator::from_diagonal(layout, &diag)
}

/// Ω cos(νt + φ) τ^x on the target external site of `layout`.
pub fn drive_term(p: &DriveParams, t: f64, layout: &SubsystemLayout) -> Result<Operator> {
    let slots = layout.external_slots();
    let slot = *slots.get(p.target).ok_or_else(|| {
        QstError::InvalidParameter(format!("drive target {} has no external site", p.target))
    })?;
    let c = p.amplitude * (p.frequency * t + p.phase).cos();
    let d = layout.dims()[slot];
    let site = ExternalSite::new(d, 1.0, 0.0);
    let x = Operator::new(SubsystemLayout::single(d, layout.roles()[slot])?, site.x)?;
    Ok(embed(&x, slot, layout)?.scale_re(c))
}

/// (a_r + a_r†) on the r-th cavity slot of `layout`.
pub fn quadrature(layout: &SubsystemLayout, mode: usize) -> Result<Operator> {
    let slots = layout.slots_of(FactorRole::Cavity);
    let slot = *slots
        .get(mode)
        .ok_or_else(|| QstError::InvalidParameter(format!("layout {layout} has no mode {mode}")))?;
    let a = fock_annihilation(layout.dims()[slot])?;
    embed(&a.add(&a.adjoint())?, slot, layout)
}

/// σ^x on Rabi qubit `i` (0 or 1) of `layout`.
pub fn rabi_sigma_x(layout: &SubsystemLayout, i: usize) -> Result<Operator> {
    let slots = layout.slots_of(FactorRole::RabiQubit);
    let slot = *slots
        .get(i)
        .ok_or_else(|| QstError::InvalidParameter(format!("layout {layout} has no Rabi qubit {i}")))?;
    embed(&pauli(Axis::X), slot, layout)
}

/// Projector onto the Rabi-qubit singlet (|↓↑⟩ − |↑↓⟩)/√2, identity elsewhere.
pub fn singlet_projector(layout: &SubsystemLayout) -> Result<Operator> {
    let slots = layout.slots_of(FactorRole::RabiQubit);
    if slots.len() != 2 || slots[1] != slots[0] + 1 {
        return Err(QstError::LayoutMismatch(format!("layout {layout} lacks adjacent Rabi qubits")));
    }
    // basis order ↑↑, ↑↓, ↓↑, ↓↓
    let mut s = Array2::<C64>::zeros((4, 4));
    s[(1, 1)] = C64::new(0.5, 0.0);
    s[(2, 2)] = C64::new(0.5, 0.0);
    s[(1, 2)] = C64::new(-0.5, 0.0);
    s[(2, 1)] = C64::new(-0.5, 0.0);
    let dims = layout.dims();
    let before: usize = dims[..slots[0]].iter().product();
    let after: usize = dims[slots[1] + 1..].iter().product();
    let full = crate::qops::kron(&crate::qops::kron(&Array2::eye(before), &s), &Array2::eye(after));
    Operator::new(layout.clone(), full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::{hermitian_eigendecomposition, ZERO};

    #[test]
    fn qrs_ground_at_zero_coupling() {
        let h = build_qrs(&QrsParams::symmetric(0.0, 1.0, 6)).unwrap();
        let e = hermitian_eigendecomposition(&h).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-12);
        assert_eq!(h.hermiticity_error(), 0.0);
    }

    #[test]
    fn parity_examples() {
        let p = QrsParams::symmetric(0.3, 1.0, 4);
        let par = build_parity(&p.layout(), ParityKind::Qrs).unwrap();
        let idx = p.layout().index(&[0, 1, 1]);
        assert_eq!(par.data()[(idx, idx)].re, 1.0);
        let sq = par.matmul(&par).unwrap();
        assert_eq!(sq.sub(&Operator::identity(&p.layout())).unwrap().max_norm(), 0.0);
        assert!(build_parity(&p.layout(), ParityKind::Full).is_err());
    }

    #[test]
    fn drive_zero_cases() {
        let fm = FullModelParams { qrs: QrsParams::symmetric(0.3, 1.0, 3), omega_ext: [1.2; 2], lambda: [0.02; 2] };
        let l = fm.layout();
        let d = DriveParams { amplitude: 0.0, frequency: 1.0, phase: 0.0, target: 0 };
        assert_eq!(drive_term(&d, 0.7, &l).unwrap().max_norm(), 0.0);
        let d = DriveParams { amplitude: 0.1, frequency: 1.0, phase: std::f64::consts::FRAC_PI_2, target: 0 };
        assert!(drive_term(&d, 0.0, &l).unwrap().max_norm() < 1e-17);
        let d = DriveParams { amplitude: 0.1, frequency: 1.0, phase: 0.0, target: 2 };
        assert!(drive_term(&d, 0.0, &l).is_err());
    }

    #[test]
    fn single_mode_dicke_is_full() {
        let fm = FullModelParams { qrs: QrsParams::symmetric(0.3, 1.0, 5), omega_ext: [1.2, 1.25], lambda: [0.02, 0.03] };
        let a = build_full(&fm).unwrap();
        let b = build_dicke(&fm.as_dicke()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn transmon_site_restricts_to_qubit() {
        let s = ExternalSite::new(3, 1.3, 0.2);
        assert!((s.energies[s.up] - s.energies[s.down] - 1.3).abs() < 1e-15);
        assert_eq!(s.x[(s.up, s.down)], ONE);
        assert_eq!(s.z[(s.up, s.up)], ONE);
        assert_eq!(s.z[(s.down, s.down)], -ONE);
        assert_eq!(s.x[(0, 0)], ZERO);
    }
}

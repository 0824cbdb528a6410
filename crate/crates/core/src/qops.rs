//! Dense operator algebra on tensor-product spaces.
//!
//! Factor order is fixed across the crate: cavities first, then the two Rabi
//! qubits, then the two external sites. The first factor varies slowest in the
//! composite index. Spin bases put |↑⟩ at index 0, so σz = diag(+1, −1).

use std::fmt;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ShapeBuilder};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QstError, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Index of the spin-up basis state on every qubit factor.
pub const UP: usize = 0;
/// Index of the spin-down basis state on every qubit factor.
pub const DOWN: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorRole {
    Cavity,
    RabiQubit,
    ExternalQubit,
    Transmon,
    /// Truncated set of mediator eigenlevels (dressed frame).
    Level,
}

impl fmt::Display for FactorRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FactorRole::Cavity => "cavity",
            FactorRole::RabiQubit => "rabi-qubit",
            FactorRole::ExternalQubit => "external-qubit",
            FactorRole::Transmon => "transmon",
            FactorRole::Level => "level",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubsystemLayout {
    dims: Vec<usize>,
    roles: Vec<FactorRole>,
}

impl SubsystemLayout {
    pub fn new(factors: &[(usize, FactorRole)]) -> Result<Self> {
        if factors.is_empty() {
            return Err(QstError::InvalidDimension("layout needs at least one factor".into()));
        }
        if let Some((d, r)) = factors.iter().find(|(d, _)| *d < 2) {
            return Err(QstError::InvalidDimension(format!("{r} factor of dimension {d}")));
        }
        Ok(Self {
            dims: factors.iter().map(|f| f.0).collect(),
            roles: factors.iter().map(|f| f.1).collect(),
        })
    }

    pub fn single(dim: usize, role: FactorRole) -> Result<Self> {
        Self::new(&[(dim, role)])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn roles(&self) -> &[FactorRole] {
        &self.roles
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Slots holding the given role, in layout order.
    pub fn slots_of(&self, role: FactorRole) -> Vec<usize> {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == role)
            .map(|(i, _)| i)
            .collect()
    }

    /// Slots of the external sites (two-level or transmon).
    pub fn external_slots(&self) -> Vec<usize> {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| matches!(r, FactorRole::ExternalQubit | FactorRole::Transmon))
            .map(|(i, _)| i)
            .collect()
    }

    /// Concatenation `self ⊗ other`.
    pub fn tensor(&self, other: &SubsystemLayout) -> SubsystemLayout {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let mut roles = self.roles.clone();
        roles.extend_from_slice(&other.roles);
        SubsystemLayout { dims, roles }
    }

    /// Layout restricted to the given slots (kept in the given order).
    pub fn select(&self, slots: &[usize]) -> Result<SubsystemLayout> {
        let mut dims = Vec::with_capacity(slots.len());
        let mut roles = Vec::with_capacity(slots.len());
        for &s in slots {
            if s >= self.len() {
                return Err(QstError::SlotOutOfRange { slot: s, len: self.len() });
            }
            dims.push(self.dims[s]);
            roles.push(self.roles[s]);
        }
        if dims.is_empty() {
            return Err(QstError::InvalidDimension("empty slot selection".into()));
        }
        Ok(SubsystemLayout { dims, roles })
    }

    /// Digits of a composite index, first factor first.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (k, d) in self.dims.iter().enumerate().rev() {
            out[k] = index % d;
            index /= d;
        }
        out
    }

    pub fn index(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (x, d)| acc * d + x)
    }
}

impl fmt::Display for SubsystemLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .dims
            .iter()
            .zip(&self.roles)
            .map(|(d, r)| format!("{r}:{d}"))
            .collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    layout: SubsystemLayout,
    data: Array2<C64>,
}

impl Operator {
    pub fn new(layout: SubsystemLayout, data: Array2<C64>) -> Result<Self> {
        let n = layout.total_dim();
        if data.nrows() != data.ncols() {
            return Err(QstError::InvalidDimension(format!(
                "operator matrix is {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if data.nrows() != n {
            return Err(QstError::DimensionMismatch { expected: n, found: data.nrows() });
        }
        Ok(Self { layout, data })
    }

    pub fn zeros(layout: &SubsystemLayout) -> Self {
        let n = layout.total_dim();
        Self { layout: layout.clone(), data: Array2::zeros((n, n)) }
    }

    pub fn identity(layout: &SubsystemLayout) -> Self {
        let n = layout.total_dim();
        Self { layout: layout.clone(), data: Array2::eye(n) }
    }

    pub fn from_diagonal(layout: &SubsystemLayout, diag: &[f64]) -> Result<Self> {
        let n = layout.total_dim();
        if diag.len() != n {
            return Err(QstError::DimensionMismatch { expected: n, found: diag.len() });
        }
        let mut data = Array2::zeros((n, n));
        for (i, &v) in diag.iter().enumerate() {
            data[(i, i)] = C64::new(v, 0.0);
        }
        Ok(Self { layout: layout.clone(), data })
    }

    /// |ψ⟩⟨ψ| for a state vector on `layout`.
    pub fn projector(layout: &SubsystemLayout, psi: ArrayView1<C64>) -> Result<Self> {
        let n = layout.total_dim();
        if psi.len() != n {
            return Err(QstError::DimensionMismatch { expected: n, found: psi.len() });
        }
        let data = Array2::from_shape_fn((n, n), |(i, j)| psi[i] * psi[j].conj());
        Ok(Self { layout: layout.clone(), data })
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn data(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn view(&self) -> ArrayView2<'_, C64> {
        self.data.view()
    }

    pub fn into_data(self) -> Array2<C64> {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn adjoint(&self) -> Operator {
        Self { layout: self.layout.clone(), data: dagger(&self.data) }
    }

    /// max |H − H†| over entries.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                err = err.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
            }
        }
        err
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn max_norm(&self) -> f64 {
        max_abs(&self.data)
    }

    pub fn trace(&self) -> C64 {
        self.data.diag().sum()
    }

    pub fn matmul(&self, other: &Operator) -> Result<Operator> {
        self.check_same(other)?;
        Ok(Self { layout: self.layout.clone(), data: self.data.dot(&other.data) })
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        self.check_same(other)?;
        let ab = self.data.dot(&other.data);
        let ba = other.data.dot(&self.data);
        Ok(Self { layout: self.layout.clone(), data: ab - ba })
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.check_same(other)?;
        Ok(Self { layout: self.layout.clone(), data: &self.data + &other.data })
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        self.check_same(other)?;
        Ok(Self { layout: self.layout.clone(), data: &self.data - &other.data })
    }

    pub fn scale(&self, c: C64) -> Operator {
        Self { layout: self.layout.clone(), data: self.data.mapv(|x| x * c) }
    }

    pub fn scale_re(&self, c: f64) -> Operator {
        self.scale(C64::new(c, 0.0))
    }

    pub fn add_assign_scaled(&mut self, other: &Operator, c: C64) -> Result<()> {
        self.check_same(other)?;
        self.data.scaled_add(c, &other.data);
        Ok(())
    }

    /// A ⊗ B with concatenated layouts.
    pub fn tensor(&self, other: &Operator) -> Operator {
        Self {
            layout: self.layout.tensor(&other.layout),
            data: kron(&self.data, &other.data),
        }
    }

    /// ⟨ψ|A|ψ⟩ for a (not necessarily normalized) vector.
    pub fn expectation(&self, psi: ArrayView1<C64>) -> Result<C64> {
        if psi.len() != self.dim() {
            return Err(QstError::DimensionMismatch { expected: self.dim(), found: psi.len() });
        }
        let hp = self.data.dot(&psi);
        Ok(psi.iter().zip(hp.iter()).map(|(a, b)| a.conj() * b).sum())
    }

    fn check_same(&self, other: &Operator) -> Result<()> {
        if self.layout != other.layout {
            return Err(QstError::LayoutMismatch(format!("{} vs {}", self.layout, other.layout)));
        }
        Ok(())
    }
}

/// Trace-one, Hermitian, positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    pub const TRACE_TOL: f64 = 1e-10;
    pub const EIG_TOL: f64 = 1e-10;

    pub fn new(op: Operator) -> Result<Self> {
        let tr = op.trace();
        if (tr.re - 1.0).abs() > Self::TRACE_TOL || tr.im.abs() > Self::TRACE_TOL {
            return Err(QstError::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let herr = op.hermiticity_error();
        if herr > 1e-10 {
            return Err(QstError::InvalidDensityMatrix(format!("not Hermitian ({herr:.3e})")));
        }
        let min = min_eigenvalue(op.data())?;
        if min < -Self::EIG_TOL {
            return Err(QstError::InvalidDensityMatrix(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self { op })
    }

    /// Skip validation; callers guarantee the invariants by construction.
    pub(crate) fn new_unchecked(op: Operator) -> Self {
        Self { op }
    }

    pub fn pure(layout: &SubsystemLayout, psi: ArrayView1<C64>) -> Result<Self> {
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(QstError::InvalidDensityMatrix("zero state vector".into()));
        }
        let v = psi.mapv(|c| c / norm);
        Ok(Self { op: Operator::projector(layout, v.view())? })
    }

    pub fn maximally_mixed(layout: &SubsystemLayout) -> Self {
        let n = layout.total_dim() as f64;
        Self { op: Operator::identity(layout).scale_re(1.0 / n) }
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn into_operator(self) -> Operator {
        self.op
    }

    pub fn layout(&self) -> &SubsystemLayout {
        self.op.layout()
    }

    pub fn data(&self) -> &Array2<C64> {
        self.op.data()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn purity(&self) -> f64 {
        let d = self.op.data();
        d.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn eigenvalues(&self) -> Result<Array1<f64>> {
        Ok(self.op.data().eigvalsh_sym()?)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        Self { op: self.op.tensor(&other.op) }
    }
}

trait EigvalshSym {
    fn eigvalsh_sym(&self) -> std::result::Result<Array1<f64>, ndarray_linalg::error::LinalgError>;
}

impl EigvalshSym for Array2<C64> {
    fn eigvalsh_sym(&self) -> std::result::Result<Array1<f64>, ndarray_linalg::error::LinalgError> {
        use ndarray_linalg::EigValsh;
        let h = hermitian_part(self);
        h.eigvalsh(UPLO::Lower)
    }
}

pub(crate) fn min_eigenvalue(a: &Array2<C64>) -> Result<f64> {
    let ev = a.eigvalsh_sym()?;
    Ok(ev.iter().cloned().fold(f64::INFINITY, f64::min))
}

pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|c| c.conj())
}

pub fn hermitian_part(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| 0.5 * (a[(i, j)] + a[(j, i)].conj()))
}

pub fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().fold(0.0, |m, c| m.max(c.norm()))
}

pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            let v = a[(i, j)];
            if v == ZERO {
                continue;
            }
            out.slice_mut(s![i * rb..(i + 1) * rb, j * cb..(j + 1) * cb])
                .assign(&b.mapv(|x| x * v));
        }
    }
    out
}

/// Fock annihilation operator on |0⟩…|n_max−1⟩.
pub fn fock_annihilation(n_max: usize) -> Result<Operator> {
    if n_max < 2 {
        return Err(QstError::InvalidDimension(format!("Fock truncation {n_max} < 2")));
    }
    let mut data = Array2::zeros((n_max, n_max));
    for k in 1..n_max {
        data[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    Operator::new(SubsystemLayout::single(n_max, FactorRole::Cavity)?, data)
}

/// Number operator a†a on a truncated mode.
pub fn fock_number(n_max: usize) -> Result<Operator> {
    let diag: Vec<f64> = (0..n_max).map(|k| k as f64).collect();
    Operator::from_diagonal(&SubsystemLayout::single(n_max, FactorRole::Cavity)?, &diag)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

pub fn pauli(axis: Axis) -> Operator {
    let m = match axis {
        Axis::X => [[ZERO, ONE], [ONE, ZERO]],
        Axis::Y => [[ZERO, -I], [I, ZERO]],
        Axis::Z => [[ONE, ZERO], [ZERO, -ONE]],
    };
    let data = Array2::from_shape_fn((2, 2), |(i, j)| m[i][j]);
    Operator {
        layout: SubsystemLayout { dims: vec![2], roles: vec![FactorRole::RabiQubit] },
        data,
    }
}

/// σ⁺ = |↑⟩⟨↓|.
pub fn sigma_plus() -> Operator {
    let mut op = Operator::zeros(&SubsystemLayout { dims: vec![2], roles: vec![FactorRole::RabiQubit] });
    op.data[(UP, DOWN)] = ONE;
    op
}

/// I ⊗ … ⊗ op ⊗ … ⊗ I with `op` acting on `slot`.
pub fn embed(op: &Operator, slot: usize, layout: &SubsystemLayout) -> Result<Operator> {
    if slot >= layout.len() {
        return Err(QstError::SlotOutOfRange { slot, len: layout.len() });
    }
    let d = layout.dims()[slot];
    if op.dim() != d {
        return Err(QstError::DimensionMismatch { expected: d, found: op.dim() });
    }
    Ok(Operator { layout: layout.clone(), data: embed_matrix(op.data(), slot, layout.dims()) })
}

pub(crate) fn embed_matrix(m: &Array2<C64>, slot: usize, dims: &[usize]) -> Array2<C64> {
    let d = dims[slot];
    let before: usize = dims[..slot].iter().product();
    let after: usize = dims[slot + 1..].iter().product();
    let n = before * d * after;
    let mut out = Array2::zeros((n, n));
    for b in 0..before {
        for a1 in 0..d {
            for a2 in 0..d {
                let v = m[(a1, a2)];
                if v == ZERO {
                    continue;
                }
                let r0 = (b * d + a1) * after;
                let c0 = (b * d + a2) * after;
                for c in 0..after {
                    out[(r0 + c, c0 + c)] = v;
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Array1<f64>,
    pub vectors: Array2<C64>,
}

/// Eigenvalues ascending with orthonormal eigenvectors as columns.
pub fn hermitian_eigendecomposition(h: &Operator) -> Result<Eigen> {
    let tol = 1e-12 * h.max_norm().max(1.0);
    let err = h.hermiticity_error();
    if err > tol {
        return Err(QstError::NotHermitian(err));
    }
    eigh_matrix(h.data())
}

pub(crate) fn eigh_matrix(a: &Array2<C64>) -> Result<Eigen> {
    // Column-major input: a row-major buffer reaches LAPACK as the transpose,
    // i.e. conj(A) for Hermitian A, which conjugates the eigenvectors.
    let n = a.nrows();
    let mut f = Array2::<C64>::zeros((n, n).f());
    f.assign(&hermitian_part(a));
    let (values, vectors) = f.eigh(UPLO::Lower)?;
    Ok(Eigen { values, vectors })
}

/// Reduced operator on the `keep` slots (in ascending slot order).
pub fn partial_trace_operator(op: &Operator, keep: &[usize]) -> Result<Operator> {
    let layout = op.layout();
    if keep.is_empty() {
        return Err(QstError::InvalidDimension("partial trace must keep at least one slot".into()));
    }
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    for &k in &keep {
        if k >= layout.len() {
            return Err(QstError::SlotOutOfRange { slot: k, len: layout.len() });
        }
    }
    let traced: Vec<usize> = (0..layout.len()).filter(|s| !keep.contains(s)).collect();
    let kept_layout = layout.select(&keep)?;
    if traced.is_empty() {
        return Ok(Operator { layout: kept_layout, data: op.data().clone() });
    }
    let traced_layout = layout.select(&traced)?;
    let dk = kept_layout.total_dim();
    let dt = traced_layout.total_dim();

    // compose[k * dt + t] = full index of (kept digits k, traced digits t)
    let mut compose = vec![0usize; dk * dt];
    let mut digits = vec![0usize; layout.len()];
    for k in 0..dk {
        let kd = kept_layout.digits(k);
        for t in 0..dt {
            let td = traced_layout.digits(t);
            for (slot, v) in keep.iter().zip(&kd) {
                digits[*slot] = *v;
            }
            for (slot, v) in traced.iter().zip(&td) {
                digits[*slot] = *v;
            }
            compose[k * dt + t] = layout.index(&digits);
        }
    }
    let data = op.data();
    let mut out = Array2::<C64>::zeros((dk, dk));
    for i in 0..dk {
        for j in 0..dk {
            let mut acc = ZERO;
            for t in 0..dt {
                acc += data[(compose[i * dt + t], compose[j * dt + t])];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(Operator { layout: kept_layout, data: out })
}

pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    Ok(DensityMatrix::new_unchecked(partial_trace_operator(rho.operator(), keep)?))
}

/// Basis ket for the given digits.
pub fn basis_ket(layout: &SubsystemLayout, digits: &[usize]) -> Result<Array1<C64>> {
    if digits.len() != layout.len() {
        return Err(QstError::DimensionMismatch { expected: layout.len(), found: digits.len() });
    }
    for (d, n) in digits.iter().zip(layout.dims()) {
        if d >= n {
            return Err(QstError::InvalidDimension(format!("digit {d} out of range {n}")));
        }
    }
    let mut v = Array1::zeros(layout.total_dim());
    v[layout.index(digits)] = ONE;
    Ok(v)
}

pub fn kron_vec(a: ArrayView1<C64>, b: ArrayView1<C64>) -> Array1<C64> {
    let mut out = Array1::zeros(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i * b.len() + j] = x * y;
        }
    }
    out
}

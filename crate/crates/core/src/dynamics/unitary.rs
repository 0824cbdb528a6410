//! Closed-system evolution.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::integrate::{integrate_dp5, Tolerances};
use super::lindblad::expectation_dm;
use super::{check_times, column_vector, vector_norm, Diagnostics, Trajectory};
use crate::error::{QstError, Result};
use crate::qops::{dagger, hermitian_eigendecomposition, DensityMatrix, Operator, C64, I, ZERO};

pub enum Hamiltonian<'a> {
    Static(&'a Operator),
    /// H(t) = H0 + Σ_k f_k(t) V_k.
    TimeDependent {
        h0: &'a Operator,
        terms: Vec<(&'a Operator, Box<dyn Fn(f64) -> f64 + Sync + 'a>)>,
    },
}

impl Hamiltonian<'_> {
    fn base(&self) -> &Operator {
        match self {
            Hamiltonian::Static(h) => h,
            Hamiltonian::TimeDependent { h0, .. } => h0,
        }
    }

    fn at(&self, t: f64) -> Array2<C64> {
        match self {
            Hamiltonian::Static(h) => h.data().clone(),
            Hamiltonian::TimeDependent { h0, terms } => {
                let mut m = h0.data().clone();
                for (v, f) in terms {
                    m.scaled_add(C64::new(f(t), 0.0), v.data());
                }
                m
            }
        }
    }
}

pub enum InitialState {
    Pure(Array1<C64>),
    Mixed(DensityMatrix),
}

pub enum StateRef<'a> {
    Pure(ArrayView1<'a, C64>),
    Mixed(ArrayView2<'a, C64>),
}

impl StateRef<'_> {
    pub fn expectation(&self, op: &Array2<C64>) -> f64 {
        match self {
            StateRef::Pure(psi) => {
                let hp = op.dot(psi);
                psi.iter().zip(hp.iter()).map(|(a, b)| a.conj() * b).sum::<C64>().re
            }
            StateRef::Mixed(rho) => expectation_dm(op, &rho.to_owned()),
        }
    }

    pub fn to_density(&self) -> Array2<C64> {
        match self {
            StateRef::Pure(psi) => {
                let n = psi.len();
                Array2::from_shape_fn((n, n), |(i, j)| psi[i] * psi[j].conj())
            }
            StateRef::Mixed(rho) => rho.to_owned(),
        }
    }
}

pub const NORM_DRIFT_TOL: f64 = 1e-9;

/// Evolve and hand each output state to `observe`. Static Hamiltonians use
/// the exact eigen-propagator; time-dependent ones use DP5 at `tol`.
pub fn evolve_unitary_with<O>(
    h: &Hamiltonian,
    state0: &InitialState,
    times: &[f64],
    tol: Tolerances,
    mut observe: O,
) -> Result<Diagnostics>
where
    O: FnMut(usize, f64, StateRef) -> Result<()>,
{
    check_times(times)?;
    let n = h.base().dim();
    let dim_in = match state0 {
        InitialState::Pure(v) => v.len(),
        InitialState::Mixed(r) => r.dim(),
    };
    if dim_in != n {
        return Err(QstError::DimensionMismatch { expected: n, found: dim_in });
    }
    let mut diag = Diagnostics::default();
    match h {
        Hamiltonian::Static(op) => {
            let eig = hermitian_eigendecomposition(op)?;
            let v = &eig.vectors;
            let vd = dagger(v);
            match state0 {
                InitialState::Pure(psi) => {
                    let n0 = vector_norm(psi.view());
                    let c = vd.dot(psi);
                    let mut buf = Array1::from_elem(n, ZERO);
                    for (k, &t) in times.iter().enumerate() {
                        for (i, e) in eig.values.iter().enumerate() {
                            buf[i] = c[i] * (-I * (e * (t - times[0]))).exp();
                        }
                        let psi_t = v.dot(&buf);
                        diag.max_norm_drift = diag.max_norm_drift.max((vector_norm(psi_t.view()) - n0).abs());
                        observe(k, t, StateRef::Pure(psi_t.view()))?;
                    }
                }
                InitialState::Mixed(rho) => {
                    let r = vd.dot(&rho.data().dot(v));
                    for (k, &t) in times.iter().enumerate() {
                        let ph: Vec<C64> = eig.values.iter().map(|e| (-I * (e * (t - times[0]))).exp()).collect();
                        let rt = Array2::from_shape_fn((n, n), |(i, j)| r[(i, j)] * ph[i] * ph[j].conj());
                        let rho_t = v.dot(&rt.dot(&vd));
                        diag.max_trace_drift = diag.max_trace_drift.max((rho_t.diag().sum().re - 1.0).abs());
                        observe(k, t, StateRef::Mixed(rho_t.view()))?;
                    }
                }
            }
        }
        Hamiltonian::TimeDependent { .. } => match state0 {
            InitialState::Pure(psi) => {
                let n0 = vector_norm(psi.view());
                integrate_dp5(
                    |t, y, dy| {
                        let m = h.at(t).dot(y);
                        dy.assign(&m.mapv(|c| -I * c));
                    },
                    times[0],
                    column_vector(psi.view()),
                    times,
                    tol,
                    |k, t, y| {
                        let col = y.column(0);
                        diag.max_norm_drift = diag.max_norm_drift.max((vector_norm(col) - n0).abs());
                        observe(k, t, StateRef::Pure(col))
                    },
                )?;
            }
            InitialState::Mixed(rho) => {
                integrate_dp5(
                    |t, y, dy| {
                        let ht = h.at(t);
                        let c = ht.dot(y) - y.dot(&ht);
                        dy.assign(&c.mapv(|z| -I * z));
                    },
                    times[0],
                    rho.data().clone(),
                    times,
                    tol,
                    |k, t, y| {
                        diag.max_trace_drift = diag.max_trace_drift.max((y.diag().sum().re - 1.0).abs());
                        observe(k, t, StateRef::Mixed(y.view()))
                    },
                )?;
            }
        },
    }
    if diag.max_norm_drift > NORM_DRIFT_TOL {
        return Err(QstError::Accuracy(format!("norm drift {:.3e}", diag.max_norm_drift)));
    }
    Ok(diag)
}

/// Record ⟨O⟩(t) for each named observable.
pub fn evolve_unitary(
    h: &Hamiltonian,
    state0: &InitialState,
    times: &[f64],
    observables: &[(&str, &Operator)],
) -> Result<Trajectory> {
    let mut values = vec![Vec::with_capacity(times.len()); observables.len()];
    let diag = evolve_unitary_with(h, state0, times, Tolerances::default(), |_, _, s| {
        for (k, (_, op)) in observables.iter().enumerate() {
            values[k].push(s.expectation(op.data()));
        }
        Ok(())
    })?;
    let mut traj = Trajectory::new(times.to_vec())?;
    for ((name, _), v) in observables.iter().zip(values) {
        traj.push(name, v)?;
    }
    traj.diagnostics = diag;
    Ok(traj)
}
